use std::fs;

use dcm_core::data::{
    load_csv, sample_wishart, split_domains, synth_covariances, synth_generate, synth_with_size, write_csv, CsvSchema,
    DataSet, LabelKind, Outputs, SynthConfig,
};
use dcm_core::linalg::{frobenius, sym_eig};
use dcm_core::Error;
use faer::{mat, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn wishart_mean_matches_eta_times_dof() {
    let (eta, n, dof, draws) = (0.5, 3, 5, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut acc = Mat::<f64>::zeros(n, n);
    for _ in 0..draws {
        acc += sample_wishart(eta, n, dof, &mut rng);
    }
    let want = eta * dof as f64;
    for i in 0..n {
        let mean = acc[(i, i)] / draws as f64;
        assert!((mean - want).abs() / want < 0.05, "diagonal mean {mean} vs {want}");
        for j in 0..i {
            assert!((acc[(i, j)] / draws as f64).abs() < 0.05 * want);
        }
    }
}

#[test]
fn wishart_draw_is_symmetric_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let s = sample_wishart(0.5, 10, 10, &mut rng);
        assert_eq!(s, s.transpose().to_owned());
        let low = *sym_eig(s.as_ref()).unwrap().values.last().unwrap();
        assert!(low >= -1e-10);
    }
}

#[test]
fn wishart_vanishes_as_eta_goes_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(frobenius(sample_wishart(0.0, 4, 4, &mut rng).as_ref()), 0.0);
    assert!(frobenius(sample_wishart(1e-14, 4, 4, &mut rng).as_ref()) < 1e-11);
}

#[test]
fn synth_is_bitwise_deterministic() {
    let cfg = SynthConfig::default().with_seed(17);
    let a = synth_generate(&cfg).unwrap();
    let b = synth_generate(&cfg).unwrap();
    assert_eq!(a, b);
    let bits = |d: &DataSet| (0..d.n()).flat_map(|i| (0..d.dim()).map(move |j| (i, j))).map(|(i, j)| d.x[(i, j)].to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(a, synth_generate(&SynthConfig::default().with_seed(18)).unwrap());
}

#[test]
fn synth_shape_and_labels() {
    let data = synth_generate(&SynthConfig::default()).unwrap();
    assert_eq!(data.dim(), 10);
    assert_eq!(data.domains(), (1..=10).collect::<Vec<_>>());
    assert_eq!(data.domain_sizes().values().sum::<usize>(), data.n());
    // Poisson(100) counts: every domain lands well inside [50, 150].
    assert!(data.domain_sizes().values().all(|&c| (50..=150).contains(&c)));
    match &data.y {
        Outputs::Discrete(y) => assert!(y.iter().all(|&v| v == 1 || v == -1)),
        _ => panic!("synthetic labels must be discrete"),
    }
}

#[test]
fn domain_stream_does_not_depend_on_domain_count() {
    let few = synth_generate(&SynthConfig { domains: 3, ..SynthConfig::default() }).unwrap();
    let many = synth_generate(&SynthConfig::default()).unwrap();
    let k = few.n();
    assert_eq!(few, many.select(&(0..k).collect::<Vec<_>>()));
}

#[test]
fn zero_poisson_draws_are_redrawn() {
    // Mean 1 gives P(0) ≈ 0.37 per domain; every domain must still be nonempty.
    let cfg = SynthConfig { domains: 40, mean_count: 1.0, ..SynthConfig::default() };
    let data = synth_generate(&cfg).unwrap();
    assert_eq!(data.domains().len(), 40);
}

#[test]
fn both_classes_present_with_positive_log_factor() {
    for seed in 0..50 {
        let cfg = SynthConfig { c: 2.0, ..SynthConfig::default().with_seed(seed) };
        let data = synth_with_size(&cfg, 500).unwrap();
        assert_eq!(data.n(), 500);
        let Outputs::Discrete(y) = &data.y else { unreachable!() };
        let pos = y.iter().filter(|&&v| v == 1).count();
        assert!(pos > 0 && pos < 500, "seed {seed}: {pos} positives");
    }
}

#[test]
fn empirical_covariance_converges_to_domain_covariance() {
    let cfg = SynthConfig { domains: 2, mean_count: 10_000.0, ..SynthConfig::default().with_seed(5) };
    let data = synth_generate(&cfg).unwrap();
    let sigmas = synth_covariances(&cfg).unwrap();
    for (t, sigma) in sigmas.iter().enumerate() {
        let idx: Vec<usize> = (0..data.n()).filter(|&i| data.d[i] == t as i64 + 1).collect();
        let n = idx.len() as f64;
        let dim = data.dim();
        // Zero-mean model: second moment, no mean subtraction.
        let emp = Mat::from_fn(dim, dim, |a, b| idx.iter().map(|&i| data.x[(i, a)] * data.x[(i, b)]).sum::<f64>() / n);
        let rel = frobenius((emp - sigma).as_ref()) / frobenius(sigma.as_ref());
        assert!(rel < 0.05, "domain {}: relative error {rel}", t + 1);
    }
}

#[test]
fn synth_rejects_bad_config() {
    let bad = SynthConfig { eta: 0.0, ..SynthConfig::default() };
    assert!(matches!(synth_generate(&bad), Err(Error::InvalidInput(_))));
    let bad = SynthConfig { mean_count: 0.5, ..SynthConfig::default() };
    assert!(matches!(synth_generate(&bad), Err(Error::InvalidInput(_))));
    let bad = SynthConfig { b1: vec![1.0], ..SynthConfig::default() };
    assert!(matches!(synth_generate(&bad), Err(Error::InvalidInput(_))));
}

#[test]
fn default_label_weights_are_unit_vectors() {
    let cfg = SynthConfig::default();
    for b in [&cfg.b1, &cfg.b2] {
        let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    assert_eq!(cfg.c, 0.5);
}

#[test]
fn handwritten_csv_loads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "tiny.csv", "a,b,y,domain\n1.5,-2,1,1\n0,3.25,-1,2\n");
    let data = load_csv(&p, &CsvSchema::default()).unwrap();
    let want = DataSet::with_names(
        mat![[1.5, -2.0], [0.0, 3.25]],
        Outputs::Discrete(vec![1, -1]),
        vec![1, 2],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    assert_eq!(data, want);
}

#[test]
fn csv_schema_selects_and_reorders_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "cols.csv", "site,f1,unused,target,f2\n3,0.5,x,1.25,7\n4,1.5,y,-0.5,8\n");
    let schema = CsvSchema {
        feature_cols: vec!["f2".into(), "f1".into()],
        label_col: "target".into(),
        domain_col: "site".into(),
        label_kind: LabelKind::Continuous,
    };
    let data = load_csv(&p, &schema).unwrap();
    assert_eq!(data.x, mat![[7.0, 0.5], [8.0, 1.5]]);
    assert_eq!(data.y, Outputs::Continuous(vec![1.25, -0.5]));
    assert_eq!(data.d, vec![3, 4]);
    assert_eq!(data.feature_names, vec!["f2".to_string(), "f1".to_string()]);
}

#[test]
fn csv_round_trip_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(&SynthConfig { domains: 3, mean_count: 20.0, ..SynthConfig::default() }).unwrap();
    let p = dir.path().join("rt.csv");
    write_csv(&data, &p).unwrap();
    assert_eq!(load_csv(&p, &CsvSchema::default()).unwrap(), data);

    let cont = DataSet::new(mat![[0.1], [1e-300]], Outputs::Continuous(vec![std::f64::consts::PI, -0.0]), vec![1, 2]).unwrap();
    write_csv(&cont, &p).unwrap();
    let schema = CsvSchema { label_kind: LabelKind::Continuous, ..CsvSchema::default() };
    assert_eq!(load_csv(&p, &schema).unwrap(), cont);
}

#[test]
fn bad_numeric_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("x1,x2,y,domain\n");
    for i in 0..5 {
        body.push_str(&format!("{i},1.0,1,1\n"));
    }
    body.push_str("0.5,abc,-1,2\n");
    body.push_str("1,2,1,2\n");
    let p = write_tmp(&dir, "bad.csv", &body);
    match load_csv(&p, &CsvSchema::default()) {
        Err(Error::Parse { line, msg, .. }) => {
            assert_eq!(line, 7);
            assert!(msg.contains("x2"), "{msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn fractional_discrete_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "frac.csv", "x,y,domain\n1,0.5,1\n");
    assert!(matches!(load_csv(&p, &CsvSchema::default()), Err(Error::Parse { line: 2, .. })));
    let p = write_tmp(&dir, "int.csv", "x,y,domain\n1,2.0,1\n");
    assert_eq!(load_csv(&p, &CsvSchema::default()).unwrap().y, Outputs::Discrete(vec![2]));
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "nodomain.csv", "x1,y\n1,1\n");
    assert!(matches!(load_csv(&p, &CsvSchema::default()), Err(Error::Schema(_))));
    let p = write_tmp(&dir, "nofeat.csv", "x1,y,domain\n1,1,1\n");
    let schema = CsvSchema { feature_cols: vec!["x9".into()], ..CsvSchema::default() };
    assert!(matches!(load_csv(&p, &schema), Err(Error::Schema(_))));
}

#[test]
fn empty_file_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "empty.csv", "");
    assert!(matches!(load_csv(&p, &CsvSchema::default()), Err(Error::InvalidInput(_))));
    let p = write_tmp(&dir, "header.csv", "x,y,domain\n");
    assert!(matches!(load_csv(&p, &CsvSchema::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_csv("/nonexistent/dir/none.csv", &CsvSchema::default()), Err(Error::Io { .. })));
}

#[test]
fn holding_out_one_domain_leaves_one_test_domain() {
    let data = synth_generate(&SynthConfig { domains: 4, mean_count: 15.0, ..SynthConfig::default() }).unwrap();
    let (tr, te) = split_domains(&data, &[1, 2, 4]).unwrap();
    assert_eq!(te.domains(), vec![3]);
    assert_eq!(tr.domains(), vec![1, 2, 4]);
    assert_eq!(tr.n() + te.n(), data.n());
}

#[test]
fn seven_three_split_of_ten_domains() {
    let data = synth_generate(&SynthConfig::default()).unwrap();
    let train = [1, 2, 4, 5, 7, 8, 10];
    let (tr, te) = split_domains(&data, &train).unwrap();
    assert_eq!(tr.domains().len(), 7);
    assert_eq!(te.domains(), vec![3, 6, 9]);
    assert_eq!(tr.n() + te.n(), data.n());
}

#[test]
fn split_rejects_unknown_or_improper_sets() {
    let data = synth_generate(&SynthConfig { domains: 3, mean_count: 10.0, ..SynthConfig::default() }).unwrap();
    assert!(matches!(split_domains(&data, &[4]), Err(Error::InvalidInput(_))));
    assert!(matches!(split_domains(&data, &[]), Err(Error::InvalidInput(_))));
    assert!(matches!(split_domains(&data, &[1, 2, 3]), Err(Error::InvalidInput(_))));
}

#[test]
fn dataset_rejects_mismatched_lengths() {
    let r = DataSet::new(Mat::zeros(3, 2), Outputs::Discrete(vec![1, 1]), vec![1, 1, 1]);
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_is_disjoint_and_exhaustive(seed in 0u64..500, t in 2usize..8, mask in 1u32..255) {
        let cfg = SynthConfig { domains: t, mean_count: 8.0, ..SynthConfig::default().with_seed(seed) };
        let data = synth_generate(&cfg).unwrap();
        let train: Vec<i64> = (1..=t as i64).filter(|d| mask >> (d - 1) & 1 == 1).collect();
        match split_domains(&data, &train) {
            Ok((tr, te)) => {
                prop_assert_eq!(tr.n() + te.n(), data.n());
                prop_assert!(tr.d.iter().all(|d| train.contains(d)));
                prop_assert!(te.d.iter().all(|d| !train.contains(d)));
            }
            Err(e) => prop_assert!(train.is_empty() || train.len() == t, "{e}"),
        }
    }
}
