use approx::assert_abs_diff_eq;
use dcm_core::kernels::{center_cross, center_gram, cross_gram, eval_kernel, gram, median_gamma, row_means, GramBundle};
use dcm_core::{Error, KernelSpec};
use faer::{mat, Mat};
use proptest::prelude::*;

fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

#[test]
fn rbf_of_identical_points_is_one() {
    let k = eval_kernel(&KernelSpec::rbf(3.7), &[1.5, -2.0, 0.25], &[1.5, -2.0, 0.25]).unwrap();
    assert_eq!(k, 1.0);
}

#[test]
fn delta_of_distinct_labels_is_zero() {
    assert_eq!(eval_kernel(&KernelSpec::delta(), &[3.0], &[7.0]).unwrap(), 0.0);
    assert_eq!(eval_kernel(&KernelSpec::delta(), &[3.0], &[3.0]).unwrap(), 1.0);
}

#[test]
fn rbf_scalar_value() {
    // exp(-0.5 * ((0-1)^2 + (0-1)^2)) = exp(-1)
    let k = eval_kernel(&KernelSpec::rbf(0.5), &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(k, 0.36787944117144233, epsilon = 1e-15);
}

#[test]
fn rbf_dimension_mismatch_is_rejected() {
    let err = eval_kernel(&KernelSpec::rbf(1.0), &[0.0, 0.0], &[1.0]).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
    let x = Mat::<f64>::zeros(2, 2);
    let z = Mat::<f64>::zeros(1, 3);
    assert!(matches!(cross_gram(&KernelSpec::rbf(1.0), x.as_ref(), z.as_ref()), Err(Error::InvalidInput(_))));
}

#[test]
fn nonpositive_gamma_is_rejected() {
    assert!(eval_kernel(&KernelSpec::rbf(0.0), &[0.0], &[1.0]).is_err());
    assert!(eval_kernel(&KernelSpec::rbf(-1.0), &[0.0], &[1.0]).is_err());
}

#[test]
fn gram_of_single_item() {
    let x = mat![[4.0, 2.0]];
    let k = gram(&KernelSpec::rbf(1.0), x.as_ref()).unwrap();
    assert_eq!(k, mat![[1.0]]);
}

#[test]
fn delta_gram_is_block_indicator() {
    let labels = mat![[1.0], [1.0], [2.0]];
    let k = gram(&KernelSpec::delta(), labels.as_ref()).unwrap();
    assert_eq!(k, mat![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
}

#[test]
fn rbf_gram_two_points() {
    let x = mat![[0.0, 0.0], [1.0, 1.0]];
    let k = gram(&KernelSpec::rbf(0.5), x.as_ref()).unwrap();
    let e = 0.36787944117144233;
    assert!(max_abs_diff(&k, &mat![[1.0, e], [e, 1.0]]) < 1e-15);
}

#[test]
fn cross_gram_against_itself_is_gram() {
    let x = mat![[0.3, -1.0], [2.0, 0.5], [1.1, 1.1], [-0.7, 0.2]];
    let spec = KernelSpec::rbf(0.8);
    let k = gram(&spec, x.as_ref()).unwrap();
    let kz = cross_gram(&spec, x.as_ref(), x.as_ref()).unwrap();
    assert!(max_abs_diff(&k, &kz) < 1e-15);
}

#[test]
fn cross_gram_training_point_column_has_unit_entry() {
    let x = mat![[0.0, 0.0], [3.0, 4.0], [10.0, 10.0]];
    let z = mat![[3.0, 4.0]];
    let kz = cross_gram(&KernelSpec::rbf(1.0), x.as_ref(), z.as_ref()).unwrap();
    assert_eq!(kz[(1, 0)], 1.0);
    assert!(kz[(0, 0)] < 1e-10 && kz[(2, 0)] < 1e-10);
}

#[test]
fn cross_gram_scalar_values() {
    let x = mat![[0.0]];
    let z = mat![[1.0], [2.0]];
    let kz = cross_gram(&KernelSpec::rbf(1.0), x.as_ref(), z.as_ref()).unwrap();
    assert_abs_diff_eq!(kz[(0, 0)], 0.36787944117144233, epsilon = 1e-15);
    assert_abs_diff_eq!(kz[(0, 1)], 0.018315638888734179, epsilon = 1e-15);
}

#[test]
fn centering_constant_gram_gives_zero() {
    let k = Mat::from_fn(4, 4, |_, _| 1.0);
    let c = center_gram(k.as_ref());
    assert!(max_abs_diff(&c, &Mat::zeros(4, 4)) < 1e-15);
}

#[test]
fn centering_two_by_two_identity() {
    let c = center_gram(Mat::<f64>::identity(2, 2).as_ref());
    assert!(max_abs_diff(&c, &mat![[0.5, -0.5], [-0.5, 0.5]]) < 1e-15);
}

#[test]
fn center_cross_of_training_column_matches_centered_gram() {
    let x = mat![[0.3, -1.0], [2.0, 0.5], [1.1, 1.1], [-0.7, 0.2], [0.0, 0.4]];
    let spec = KernelSpec::rbf(0.3);
    let k = gram(&spec, x.as_ref()).unwrap();
    let kc = center_gram(k.as_ref());
    let cc = center_cross(k.as_ref(), k.as_ref()).unwrap();
    assert!(max_abs_diff(&kc, &cc) < 1e-12);
}

#[test]
fn center_cross_constant_kernel_gives_zero_column() {
    let k = Mat::from_fn(3, 3, |_, _| 1.0);
    let kz = Mat::from_fn(3, 1, |_, _| 1.0);
    let c = center_cross(kz.as_ref(), k.as_ref()).unwrap();
    assert!(max_abs_diff(&c, &Mat::zeros(3, 1)) < 1e-15);
}

#[test]
fn center_cross_matches_explicit_feature_space() {
    // Linear kernel on explicit features: K = ΦΦᵀ, k_z = Φφ_z. Centered
    // entries are ⟨φ_i − φ̄, φ_z − φ̄⟩ with φ̄ the training mean.
    let phi = [[0.2, 1.0, -0.5], [1.5, -0.3, 0.8], [-0.9, 0.4, 0.1]];
    let phz = [0.7, -1.2, 0.3];
    let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let k = Mat::from_fn(3, 3, |i, j| dot(&phi[i], &phi[j]));
    let kz = Mat::from_fn(3, 1, |i, _| dot(&phi[i], &phz));
    let mean: [f64; 3] = std::array::from_fn(|c| phi.iter().map(|p| p[c]).sum::<f64>() / 3.0);
    let sub = |a: &[f64; 3]| -> [f64; 3] { std::array::from_fn(|c| a[c] - mean[c]) };
    let got = center_cross(kz.as_ref(), k.as_ref()).unwrap();
    for i in 0..3 {
        assert_abs_diff_eq!(got[(i, 0)], dot(&sub(&phi[i]), &sub(&phz)), epsilon = 1e-14);
    }
}

#[test]
fn center_cross_matches_embedding_as_extra_point() {
    // Append the test point as row N+1 of a 4x4 Gram and center it with
    // training-only means, C = I − 𝟙wᵀ, w = (1/3, 1/3, 1/3, 0). The
    // off-diagonal block of C·K·Cᵀ is the centered test column.
    let full = mat![
        [2.0, 0.3, 0.7, 0.9],
        [0.3, 1.5, 0.2, -0.4],
        [0.7, 0.2, 1.8, 0.5],
        [0.9, -0.4, 0.5, 1.2],
    ];
    let w = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
    let c = Mat::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 } - w[j]);
    let emb = &c * &full * c.transpose();
    let k = full.submatrix(0, 0, 3, 3).to_owned();
    let kz = full.submatrix(0, 3, 3, 1).to_owned();
    let got = center_cross(kz.as_ref(), k.as_ref()).unwrap();
    for i in 0..3 {
        assert_abs_diff_eq!(got[(i, 0)], emb[(i, 3)], epsilon = 1e-14);
    }
}

#[test]
fn center_cross_shape_mismatch() {
    let k = Mat::<f64>::identity(3, 3);
    let kz = Mat::<f64>::zeros(2, 1);
    assert!(matches!(center_cross(kz.as_ref(), k.as_ref()), Err(Error::InvalidInput(_))));
}

#[test]
fn median_heuristic() {
    assert_abs_diff_eq!(median_gamma(&[1.0, 2.0, 3.0]).unwrap(), 0.125, epsilon = 1e-15);
    assert!(median_gamma(&[0.0, 0.0, 1.0]).is_err());
}

#[test]
fn bundle_rows_sum_to_zero() {
    let x = mat![[0.3, -1.0], [2.0, 0.5], [1.1, 1.1], [-0.7, 0.2]];
    let kx = gram(&KernelSpec::rbf(0.5), x.as_ref()).unwrap();
    let ky = gram(&KernelSpec::delta(), mat![[1.0], [-1.0], [1.0], [1.0]].as_ref()).unwrap();
    let kd = gram(&KernelSpec::delta(), mat![[1.0], [1.0], [2.0], [2.0]].as_ref()).unwrap();
    let b = GramBundle::from_raw(kx.as_ref(), ky.as_ref(), kd.as_ref()).unwrap();
    for k in [&b.kx, &b.ky, &b.kd] {
        for r in row_means(k.as_ref()) {
            assert!(r.abs() < 1e-14);
        }
    }
}

fn points(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 1..max_n)
}

fn to_mat(p: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(p.len(), p[0].len(), |i, j| p[i][j])
}

proptest! {
    #[test]
    fn gram_symmetric_unit_diagonal(p in points(12, 3), gamma in 0.01f64..5.0) {
        let k = gram(&KernelSpec::rbf(gamma), to_mat(&p).as_ref()).unwrap();
        for i in 0..k.nrows() {
            prop_assert_eq!(k[(i, i)], 1.0);
            for j in 0..k.ncols() {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn centering_is_idempotent(p in points(12, 2), gamma in 0.01f64..5.0) {
        let k = gram(&KernelSpec::rbf(gamma), to_mat(&p).as_ref()).unwrap();
        let c1 = center_gram(k.as_ref());
        let c2 = center_gram(c1.as_ref());
        prop_assert!(max_abs_diff(&c1, &c2) <= 1e-12);
    }

    #[test]
    fn centered_rbf_gram_is_psd(p in points(15, 2), gamma in 0.01f64..5.0) {
        let k = gram(&KernelSpec::rbf(gamma), to_mat(&p).as_ref()).unwrap();
        let c = center_gram(k.as_ref());
        let eig = dcm_core::linalg::sym_eig(c.as_ref()).unwrap();
        let scale = c.norm_l2().max(1.0);
        prop_assert!(eig.values.iter().all(|&v| v >= -1e-10 * scale));
    }

    #[test]
    fn delta_gram_is_permutation_equivariant(labels in prop::collection::vec(0i64..4, 2..12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = labels.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let items = Mat::from_fn(n, 1, |i, _| labels[i] as f64);
        let permuted = Mat::from_fn(n, 1, |i, _| labels[perm[i]] as f64);
        let k = gram(&KernelSpec::delta(), items.as_ref()).unwrap();
        let kp = gram(&KernelSpec::delta(), permuted.as_ref()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(kp[(i, j)], k[(perm[i], perm[j])]);
            }
        }
    }
}
