use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcm_core::bench::{bench_csv, bench_sweep, loglog_slope, BenchConfig};
use dcm_core::data::synth_with_size;
use dcm_core::dcm::{Algorithm, KernelSet, ProjectionModel, SolverMode};
use dcm_core::eval::{evaluate_model, fit_method, run_experiment, ExperimentConfig, Method, Metric};
use dcm_core::{
    load_csv, load_features, load_model, save_model, synth_generate, write_csv, CsvSchema, DataSet, Error, LabelKind,
    Result, SynthConfig,
};

#[derive(Parser)]
#[command(name = "dcm", version, about = "Domain-invariant kernel projections: fit, transform, evaluate, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic multi-domain benchmark as CSV (plus a JSON sidecar).
    Synth(SynthArgs),
    /// Fit a projection on a CSV dataset and save the model.
    Fit(FitArgs),
    /// Project the rows of a CSV file with a saved model.
    Transform(TransformArgs),
    /// Repeated domain-split evaluation, or scoring of a saved model.
    Eval(EvalArgs),
    /// Time model fitting across sample sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Discrete,
    Continuous,
}

#[derive(Args)]
struct SchemaArgs {
    /// Comma-separated feature columns (default: all but label and domain).
    #[arg(long, value_delimiter = ',')]
    feature_cols: Vec<String>,
    #[arg(long, default_value = "y")]
    label_col: String,
    #[arg(long, default_value = "domain")]
    domain_col: String,
    #[arg(long, value_enum, default_value = "discrete")]
    label_kind: Kind,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            feature_cols: self.feature_cols.clone(),
            label_col: self.label_col.clone(),
            domain_col: self.domain_col.clone(),
            label_kind: match self.label_kind {
                Kind::Discrete => LabelKind::Discrete,
                Kind::Continuous => LabelKind::Continuous,
            },
        }
    }
}

#[derive(Args)]
struct Params {
    /// Ridge ε of the conditional operators.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// RBF width γ of the input kernel, k(a, b) = exp(−γ‖a − b‖²).
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// RBF width for continuous outputs (default: 1/(2·median(y)²)).
    #[arg(long)]
    gamma_y: Option<f64>,
    /// Number of projection directions.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Landmark count of the Nyström algorithms.
    #[arg(long = "M", default_value_t = 50)]
    landmarks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dense eigen-solver: `regularized` (ridge Nε) or `exact`.
    #[arg(long, default_value = "regularized")]
    solver: SolverMode,
}

impl Params {
    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            epsilon: self.epsilon,
            gamma: self.gamma,
            gamma_y: self.gamma_y,
            m: self.m,
            landmarks: self.landmarks,
            seed: self.seed,
            solver: self.solver,
            ..ExperimentConfig::default()
        }
    }

    fn check(&self, methods: &[Method]) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("--{name} must be positive, got {v}")));
            }
        }
        if let Some(g) = self.gamma_y {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput(format!("--gamma-y must be positive, got {g}")));
            }
        }
        if self.m == 0 {
            return Err(Error::InvalidInput("--m must be at least 1".into()));
        }
        let fast = methods.iter().any(|m| matches!(m, Method::Projection(a) if a.is_fast()));
        if fast && self.m > self.landmarks {
            return Err(Error::InvalidInput(format!(
                "--m {} exceeds --M {}: the Nyström path yields at most M directions",
                self.m, self.landmarks
            )));
        }
        Ok(())
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wishart scale η of the per-domain covariances.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 10)]
    domains: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Poisson mean of the per-domain sample count.
    #[arg(long, default_value_t = 100.0)]
    mean_count: f64,
    /// Offset inside the label's log factor.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Emit exactly this many rows (seeded subsample of a larger draw).
    #[arg(long)]
    rows: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "dcm")]
    algorithm: Algorithm,
    #[command(flatten)]
    params: Params,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// CSV of projected coordinates, one row per input row.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset CSV. Without it, fresh synthetic data is drawn per repetition.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report stem: writes `<stem>.json`, `<stem>.txt` and `<stem>.csv`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Single method to evaluate (ignored when --compare is given).
    #[arg(long, default_value = "dcm")]
    algorithm: Method,
    /// Comma-separated methods evaluated on identical splits.
    #[arg(long, value_delimiter = ',')]
    compare: Vec<Method>,
    /// Comma-separated metrics (default: accuracy,auc,gmean or rmse).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<Metric>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Domains used for training in each repetition.
    #[arg(long, default_value_t = 7)]
    train_domains: usize,
    /// Ridge penalty of the downstream predictor.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Wishart scale of the synthetic data.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Score a saved model instead: fit the predictor on --train, test on --input.
    #[arg(long, requires_all = ["train", "input"])]
    model: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
    sizes: Vec<usize>,
    #[arg(long, default_value = "fastdcm")]
    algorithm: Algorithm,
    /// Comma-separated algorithms (overrides --algorithm).
    #[arg(long, value_delimiter = ',')]
    compare: Vec<Algorithm>,
    /// Fits per point; the minimum time is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Timing CSV to write (also printed).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error[USAGE]: {}", e.render().to_string().trim_start_matches("error: ").trim_end());
            return ExitCode::from(2);
        }
    };
    let out = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Transform(a) => cmd_transform(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        domains: a.domains,
        dim: a.dim,
        eta: a.eta,
        mean_count: a.mean_count,
        c: a.c,
        ..SynthConfig::default().with_seed(a.seed)
    };
    let cfg = if cfg.dim == SynthConfig::default().dim {
        cfg
    } else {
        let (b1, b2) = dcm_core::data::default_weights(cfg.dim);
        SynthConfig { b1, b2, ..cfg }
    };
    let data = match a.rows {
        Some(n) => synth_with_size(&cfg, n)?,
        None => synth_generate(&cfg)?,
    };
    write_csv(&data, &a.output)?;
    let sidecar = a.output.with_extension("json");
    let mut meta = serde_json::to_value(&cfg).expect("config serializes");
    meta["rows"] = data.n().into();
    meta["domain_sizes"] = serde_json::to_value(data.domain_sizes()).expect("sizes serialize");
    write_text(&sidecar, &(serde_json::to_string_pretty(&meta).expect("json") + "\n"))?;
    println!("wrote {} rows over {} domains to {}", data.n(), data.domains().len(), a.output.display());
    Ok(())
}

fn eigen_summary(model: &ProjectionModel) -> String {
    let vals: Vec<String> = model.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
    let mut s = format!("{}: N = {}, m = {}, eigenvalues [{}]", model.algorithm, model.n_train(), model.m(), vals.join(", "));
    if let Some(l) = &model.landmarks {
        let _ = write!(s, ", M = {}", l.len());
    }
    s
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    a.params.check(&[Method::Projection(a.algorithm)])?;
    let data = load_csv(&a.input, &a.schema.schema())?;
    let kernels = KernelSet::for_data(&data, a.params.gamma, a.params.gamma_y)?;
    let model = fit_method(a.algorithm, &data, &kernels, &a.params.experiment(), a.params.seed)?;
    save_model(&model, &a.output)?;
    println!("{}", eigen_summary(&model));
    Ok(())
}

fn cmd_transform(a: &TransformArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (x, _) = load_features(&a.input, &a.schema.schema())?;
    let f = model.transform(x.as_ref())?;
    let mut out = (1..=model.m()).map(|j| format!("c{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for i in 0..f.ncols() {
        let row: Vec<String> = (0..f.nrows()).map(|j| format!("{}", f[(j, i)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(&a.output, &out)?;
    println!("projected {} rows onto {} directions", f.ncols(), model.m());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if let Some(model_path) = &a.model {
        return eval_saved_model(a, model_path);
    }
    let methods = if a.compare.is_empty() { vec![a.algorithm] } else { a.compare.clone() };
    a.params.check(&methods)?;
    let fixed: Option<DataSet> = a.input.as_ref().map(|p| load_csv(p, &a.schema.schema())).transpose()?;
    let base = a.params.experiment();
    let cfg = ExperimentConfig {
        methods,
        reps: a.reps,
        train_domains: a.train_domains,
        lambda: a.lambda,
        metrics: a.metrics.clone(),
        synth: SynthConfig { eta: a.eta, ..SynthConfig::default() },
        ..base
    };
    let report = run_experiment(&cfg, fixed.as_ref())?;
    print!("{}", report.to_text());
    if let Some(stem) = &a.output {
        report.write_all(stem)?;
    }
    Ok(())
}

fn eval_saved_model(a: &EvalArgs, model_path: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let schema = a.schema.schema();
    let train = load_csv(a.train.as_ref().expect("clap enforces --train"), &schema)?;
    let test = load_csv(a.input.as_ref().expect("clap enforces --input"), &schema)?;
    let metrics = if a.metrics.is_empty() { Metric::defaults_for(train.y.kind()) } else { a.metrics.clone() };
    let scores = evaluate_model(&model, &train, &test, a.lambda, &metrics)?;
    for (k, v) in &scores {
        println!("{k}\t{v:.6}");
    }
    if let Some(stem) = &a.output {
        let json = serde_json::json!({ "model": model_path, "algorithm": model.algorithm.name(), "metrics": scores });
        write_text(&stem.with_extension("json"), &(serde_json::to_string_pretty(&json).expect("json") + "\n"))?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let algorithms = if a.compare.is_empty() { vec![a.algorithm] } else { a.compare.clone() };
    let methods: Vec<Method> = algorithms.iter().map(|&x| Method::Projection(x)).collect();
    a.params.check(&methods)?;
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        landmarks: a.params.landmarks,
        algorithms: algorithms.clone(),
        epsilon: a.params.epsilon,
        gamma: a.params.gamma,
        m: a.params.m,
        seed: a.params.seed,
        repeats: a.repeats,
        ..BenchConfig::default()
    };
    let rows = bench_sweep(&cfg)?;
    let csv = bench_csv(&rows);
    print!("{csv}");
    for alg in &algorithms {
        let (ns, ts): (Vec<usize>, Vec<f64>) = rows.iter().filter(|r| r.algorithm == alg.name()).map(|r| (r.n, r.seconds)).unzip();
        if ns.len() >= 2 {
            println!("# {alg}: log-log slope {:.3}", loglog_slope(&ns, &ts)?);
        }
    }
    if let Some(p) = &a.output {
        write_text(p, &csv)?;
    }
    Ok(())
}
