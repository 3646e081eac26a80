//! Command-line front end. Every subcommand reads and writes the plain text
//! model and schema formats and CSV datasets, so each stage can be rerun
//! from the saved artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{ibp_output, symbolic_output_bounds};
use crate::calibrate::CalibrationConfig;
use crate::encode::{EncodeConfig, RepairMode};
use crate::model::Mlp;
use crate::pipeline::{build_program, run_repair, RepairConfig, RepairOutcome};
use crate::schema::{load_dataset, split_repair_sets, AttributeSchema, Dataset, RepairSplit};
use crate::solver::{export_lp_file, MilpLimits};
use crate::synth::{accuracy, generate, train_scaled, MinMax, SynthConfig};
use crate::verify::{
    cur, exact_range, is_fair_with, metrics, FairStatus, IdiMode, MetricsConfig, MetricsReport, VerifyConfig,
};

/// Default output directory when `--out-dir` is not given.
pub const OUT_DIR_ENV: &str = "IFREPAIR_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "ifrepair",
    version,
    about = "Provable individual-fairness repair for small ReLU classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a biased synthetic dataset, its schema and a trained baseline model.
    GenData(GenDataArgs),
    /// Train a baseline classifier on a dataset.
    Train(TrainArgs),
    /// Print interval, symbolic and exact output bounds over one neighbourhood.
    Bounds(BoundsArgs),
    /// Calibrate, repair and certify a model on a repair set.
    Repair(RepairArgs),
    /// Certify individual points with the exact verifier.
    Verify(VerifyArgs),
    /// Accuracy, CUR and IDI rates for a model.
    Metrics(MetricsArgs),
    /// Write the repair program as a CPLEX LP file without solving it.
    ExportLp(ExportLpArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of input attributes, the protected one included.
    #[arg(long, default_value_t = 6)]
    pub inputs: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub hidden: Vec<usize>,
    /// How strongly the protected attribute leaks into labels.
    #[arg(long, default_value_t = 1.0)]
    pub bias: f64,
    #[arg(long, default_value_t = 600)]
    pub rows: usize,
    /// Similarity tolerance on every non-sensitive attribute.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train on raw inputs instead of min-max scaled ones.
    #[arg(long)]
    pub no_scaling: bool,
    /// Output model path; defaults to `model.txt` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Centre of the neighbourhood, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub point: Vec<f64>,
}

/// Files and the deterministic split shared by repair, metrics and export-lp.
#[derive(Debug, Args)]
pub struct Inputs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Size of the repair set drawn from the dataset.
    #[arg(long, default_value_t = 10)]
    pub n_repair: usize,
    /// Size of the calibration set.
    #[arg(long, default_value_t = 100)]
    pub n_cal: usize,
    /// Seed for the split and for every sampled metric.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Naive,
    Symbolic,
}

impl From<ModeArg> for RepairMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => RepairMode::Naive,
            ModeArg::Symbolic => RepairMode::Symbolic,
        }
    }
}

#[derive(Debug, Args)]
pub struct RepairKnobs {
    #[arg(long, value_enum, default_value_t = ModeArg::Symbolic)]
    pub mode: ModeArg,
    /// Calibration iterations; 0 skips calibration.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Weight of the cross-entropy term during calibration.
    #[arg(long, default_value_t = 1.0)]
    pub bce_weight: f64,
    /// Bound on every entry of the final-layer change.
    #[arg(long, default_value_t = 10.0)]
    pub delta_max: f64,
    /// Branch-and-bound wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

impl RepairKnobs {
    fn config(&self) -> anyhow::Result<RepairConfig> {
        let mut cfg = RepairConfig {
            mode: self.mode.into(),
            calibration: CalibrationConfig {
                max_iter: self.iters,
                learning_rate: self.lr,
                bce_weight: self.bce_weight,
                ..CalibrationConfig::default()
            },
            encode: EncodeConfig {
                delta_max: self.delta_max,
                ..EncodeConfig::default()
            },
            ..RepairConfig::default()
        };
        if let Some(t) = self.time_limit {
            if !(t.is_finite() && t > 0.0) {
                bail!("--time-limit must be a positive number of seconds");
            }
            cfg.limits = MilpLimits {
                time_limit: Some(std::time::Duration::from_secs_f64(t)),
                ..cfg.limits
            };
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub knobs: RepairKnobs,
    /// Also write the final repair program to this LP file.
    #[arg(long)]
    pub export_lp: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// A single point to certify, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "data")]
    pub point: Option<Vec<f64>>,
    /// Certify every row of this dataset instead.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Certify at most this many rows.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Exit with status 1 unless every point is certified fair.
    #[arg(long)]
    pub require_fair: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IdiArg {
    /// Enumerate finite neighbourhoods, sample the rest.
    Enumerate,
    /// Always sample.
    Sample,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, value_enum, default_value_t = IdiArg::Enumerate)]
    pub mode: IdiArg,
    /// Samples per neighbourhood when sampling.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Uniform input-space points for IDI-S.
    #[arg(long, default_value_t = 2000)]
    pub space_points: usize,
    /// Write the metrics CSV here as well as printing the table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportLpArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub knobs: RepairKnobs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse the process arguments, run, and map failures to a nonzero exit.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Bounds(a) => bounds(&a),
        Command::Repair(a) => repair(&a),
        Command::Verify(a) => verify(&a),
        Command::Metrics(a) => metrics_cmd(&a),
        Command::ExportLp(a) => export_lp(&a),
    }
}

/// `--out-dir`, else `$IFREPAIR_OUT_DIR`, else the working directory.
pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn gen_data(a: &GenDataArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = SynthConfig::new(a.seed, a.inputs, a.hidden.clone(), a.bias);
    cfg.rows = a.rows;
    cfg.epsilon = a.epsilon;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    let (data, net, schema) = generate(&cfg)?;
    let dir = out_dir(a.out_dir.as_deref());
    ensure_dir(&dir)?;
    schema.save(dir.join("schema.txt"))?;
    data.save_csv(&schema, dir.join("data.csv"))?;
    net.save(dir.join("model.txt"))?;
    println!(
        "wrote {} rows, schema and a {:?} model (train accuracy {:.4}) to {}",
        data.len(),
        net.dims(),
        accuracy(&net, &data)?,
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn train(a: &TrainArgs) -> anyhow::Result<ExitCode> {
    let schema = AttributeSchema::load(&a.schema)?;
    let data = load_dataset(&a.data, &schema)?;
    let mut dims = vec![schema.dim()];
    dims.extend(&a.hidden);
    dims.push(1);
    let scale = (!a.no_scaling).then(|| MinMax::from_schema(&schema));
    let net = train_scaled(&data, &dims, a.epochs, a.lr, a.seed, scale.as_ref())?;
    let out = a.out.clone().unwrap_or_else(|| out_dir(None).join("model.txt"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    net.save(&out)?;
    println!(
        "trained {:?}: train accuracy {:.4}, saved to {}",
        dims,
        accuracy(&net, &data)?,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn bounds(a: &BoundsArgs) -> anyhow::Result<ExitCode> {
    let net = Mlp::load(&a.model)?;
    let schema = AttributeSchema::load(&a.schema)?;
    let b = schema.neighborhood(&a.point)?;
    let t = Instant::now();
    let ibp = ibp_output(&net, &b)?;
    let t_ibp = t.elapsed();
    let t = Instant::now();
    let sym = symbolic_output_bounds(&net, &b)?;
    let t_sym = t.elapsed();
    let t = Instant::now();
    let exact = exact_range(&net, &b)?;
    let t_exact = t.elapsed();
    println!("box lower {:?}", b.lower);
    println!("box upper {:?}", b.upper);
    println!("{:<10} {:>14} {:>14} {:>12}", "method", "lower", "upper", "time");
    for (name, (lo, hi), dt) in [
        ("interval", ibp, t_ibp),
        ("symbolic", sym, t_sym),
        ("exact", (exact.min, exact.max), t_exact),
    ] {
        println!("{name:<10} {lo:>14.6} {hi:>14.6} {:>12}", format!("{dt:.2?}"));
    }
    Ok(ExitCode::SUCCESS)
}

struct Loaded {
    net: Mlp,
    schema: AttributeSchema,
    split: RepairSplit,
}

fn load_inputs(i: &Inputs) -> anyhow::Result<Loaded> {
    let net = Mlp::load(&i.model)?;
    let schema = AttributeSchema::load(&i.schema)?;
    let data: Dataset = load_dataset(&i.data, &schema)?;
    let split = split_repair_sets(&data, i.n_repair, i.n_cal, i.seed)?;
    if split.repair.is_empty() {
        bail!("--n-repair must be at least 1");
    }
    Ok(Loaded { net, schema, split })
}

fn metrics_config(seed: u64, idi: IdiMode, space_points: usize) -> MetricsConfig {
    MetricsConfig {
        idi,
        space_points,
        space_seed: seed,
        verify: VerifyConfig::default(),
    }
}

/// Everything the `repair` subcommand reports.
#[derive(Debug, Clone)]
pub struct RepairReport {
    pub seed: u64,
    pub mode: RepairMode,
    pub before: MetricsReport,
    pub after: MetricsReport,
    pub objective: f64,
    /// `||dW||_1 + |db|` recomputed from the applied change.
    pub delta_l1: f64,
    pub big_m: f64,
    pub nodes: usize,
    pub attempts: usize,
    pub already_fair: bool,
    pub l_fair: (f64, f64),
    pub trace_path: PathBuf,
    pub model_path: PathBuf,
    pub seconds: [f64; 5],
}

impl RepairReport {
    const STAGES: [&'static str; 5] = ["calibrate", "bounds", "solve", "certify", "total"];

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k},{v}");
        };
        kv("seed", self.seed.to_string());
        kv("mode", self.mode.to_string());
        for (tag, m) in [("pre", &self.before), ("post", &self.after)] {
            kv(&format!("{tag}_accuracy"), m.accuracy.to_string());
            kv(&format!("{tag}_cur"), m.cur.rate().to_string());
            kv(&format!("{tag}_idi_d"), m.idi_data.to_string());
            kv(&format!("{tag}_idi_s"), m.idi_space.to_string());
        }
        kv("objective", self.objective.to_string());
        kv("delta_l1", self.delta_l1.to_string());
        kv("big_m", self.big_m.to_string());
        kv("nodes", self.nodes.to_string());
        kv("attempts", self.attempts.to_string());
        kv("already_fair", self.already_fair.to_string());
        kv("l_fair_initial", self.l_fair.0.to_string());
        kv("l_fair_final", self.l_fair.1.to_string());
        kv("trace", self.trace_path.display().to_string());
        kv("model", self.model_path.display().to_string());
        for (s, v) in Self::STAGES.iter().zip(self.seconds) {
            kv(&format!("seconds_{s}"), v.to_string());
        }
        out
    }
}

impl std::fmt::Display for RepairReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<12} {:>10} {:>10}", "metric", "before", "after")?;
        let rows = [
            ("accuracy", self.before.accuracy, self.after.accuracy),
            ("CUR", self.before.cur.rate(), self.after.cur.rate()),
            ("IDI-D", self.before.idi_data, self.after.idi_data),
            ("IDI-S", self.before.idi_space, self.after.idi_space),
        ];
        for (name, b, a) in rows {
            writeln!(f, "{name:<12} {b:>10.4} {a:>10.4}")?;
        }
        writeln!(f)?;
        writeln!(f, "mode          {}", self.mode)?;
        writeln!(f, "objective     {:.8}", self.objective)?;
        writeln!(f, "|dW|+|db|     {:.8}", self.delta_l1)?;
        writeln!(
            f,
            "Big-M         {:.3e} ({} attempt(s), {} nodes)",
            self.big_m, self.attempts, self.nodes
        )?;
        writeln!(f, "L_fair        {:.4} -> {:.4}", self.l_fair.0, self.l_fair.1)?;
        let times: Vec<String> = Self::STAGES
            .iter()
            .zip(self.seconds)
            .map(|(s, v)| format!("{s} {v:.2}s"))
            .collect();
        write!(f, "time          {}", times.join(", "))
    }
}

fn repair(a: &RepairArgs) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let Loaded { net, schema, split } = load_inputs(&a.inputs)?;
    let cfg = a.knobs.config()?;
    let seed = a.inputs.seed;
    let mcfg = metrics_config(seed, IdiMode::Enumerate { k: 100, seed }, 2000);
    let points = split.repair.inputs();
    let before = metrics(&net, &schema, &points, &split.test, &mcfg)?;

    let outcome: RepairOutcome = run_repair(&net, &schema, &points, &split.calibration, &cfg)
        .context("repair failed; no repaired model was written")?;

    let dir = out_dir(a.out_dir.as_deref());
    ensure_dir(&dir)?;
    if let Some(path) = &a.export_lp {
        let program = match &outcome.program {
            Some(p) => p.clone(),
            None => {
                let boxes = points
                    .iter()
                    .map(|x| schema.neighborhood(x))
                    .collect::<crate::Result<Vec<_>>>()?;
                build_program(&outcome.calibrated, &boxes, &cfg, &cfg.encode)?
            }
        };
        export_lp_file(&program.problem, path)?;
        println!("wrote repair program to {}", path.display());
    }

    // Certify what was written, not what is in memory.
    let model_path = dir.join("repaired.txt");
    outcome.model.save(&model_path)?;
    let reloaded = Mlp::load(&model_path)?;
    let check = cur(&reloaded, &schema, &points, &VerifyConfig::default())?;
    if check.rate() != 0.0 {
        std::fs::remove_file(&model_path).ok();
        bail!(
            "reloaded model failed certification on {} of {} repair inputs",
            check.unfair + check.undecided,
            check.total()
        );
    }
    let trace_path = dir.join("calibration.csv");
    outcome.trace.save_csv(&trace_path)?;
    let after = metrics(&reloaded, &schema, &points, &split.test, &mcfg)?;
    let t = outcome.times;
    let report = RepairReport {
        seed,
        mode: cfg.mode,
        before,
        after,
        objective: outcome.objective,
        delta_l1: outcome.delta.l1_norm(),
        big_m: outcome.big_m,
        nodes: outcome.nodes,
        attempts: outcome.attempts,
        already_fair: outcome.already_fair,
        l_fair: (outcome.trace.initial_fair(), outcome.trace.final_losses.0),
        trace_path,
        model_path,
        seconds: [
            t.calibrate.as_secs_f64(),
            t.bounds.as_secs_f64(),
            t.solve.as_secs_f64(),
            t.certify.as_secs_f64(),
            start.elapsed().as_secs_f64(),
        ],
    };
    let report_path = dir.join("report.csv");
    std::fs::write(&report_path, report.to_csv()).with_context(|| format!("writing {}", report_path.display()))?;
    println!("{report}");
    if outcome.already_fair {
        println!("model was already certified fair on every repair input; nothing changed");
    }
    println!("wrote {} and {}", report.model_path.display(), report_path.display());
    if (report.delta_l1 - report.objective).abs() > 1e-6 {
        bail!(
            "applied change has L1 norm {} but the solver reported {}",
            report.delta_l1,
            report.objective
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: &VerifyArgs) -> anyhow::Result<ExitCode> {
    let net = Mlp::load(&a.model)?;
    let schema = AttributeSchema::load(&a.schema)?;
    let points: Vec<Vec<f64>> = match (&a.point, &a.data) {
        (Some(p), None) => vec![p.clone()],
        (None, Some(d)) => load_dataset(d, &schema)?.inputs(),
        _ => bail!("give exactly one of --point or --data"),
    };
    let take = a.limit.unwrap_or(points.len()).min(points.len());
    let cfg = VerifyConfig::default();
    println!("{:>6} {:>12} {:>14} {:>14}", "row", "status", "min", "max");
    let mut not_fair = 0;
    for (i, x) in points[..take].iter().enumerate() {
        let c = is_fair_with(&net, &schema, x, &cfg)?;
        if c.status != FairStatus::CertifiedFair {
            not_fair += 1;
        }
        let status = match c.status {
            FairStatus::CertifiedFair => "fair",
            FairStatus::CertifiedUnfair => "unfair",
            FairStatus::Undecided => "undecided",
        };
        println!("{i:>6} {status:>12} {:>14.6} {:>14.6}", c.range.min, c.range.max);
        if let Some(w) = &c.witness {
            println!("       witness {w:?}");
        }
    }
    println!("{} of {take} certified fair", take - not_fair);
    Ok(if a.require_fair && not_fair > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn metrics_cmd(a: &MetricsArgs) -> anyhow::Result<ExitCode> {
    let Loaded { net, schema, split } = load_inputs(&a.inputs)?;
    let seed = a.inputs.seed;
    let idi = match a.mode {
        IdiArg::Enumerate => IdiMode::Enumerate { k: a.k, seed },
        IdiArg::Sample => IdiMode::Sample { k: a.k, seed },
    };
    let report = metrics(
        &net,
        &schema,
        &split.repair.inputs(),
        &split.test,
        &metrics_config(seed, idi, a.space_points),
    )?;
    println!("{report}");
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn export_lp(a: &ExportLpArgs) -> anyhow::Result<ExitCode> {
    let Loaded { net, schema, split } = load_inputs(&a.inputs)?;
    let cfg = a.knobs.config()?;
    let boxes = split
        .repair
        .inputs()
        .iter()
        .map(|x| schema.neighborhood(x))
        .collect::<crate::Result<Vec<_>>>()?;
    let net = if cfg.calibration.max_iter > 0 {
        crate::calibrate::calibrate(&net, &boxes, &split.calibration, &cfg.calibration)?.0
    } else {
        net
    };
    let program = build_program(&net, &boxes, &cfg, &cfg.encode)?;
    export_lp_file(&program.problem, &a.out)?;
    println!(
        "wrote {} program ({} variables, {} constraints, {} binaries) to {}",
        cfg.mode,
        program.problem.num_vars(),
        program.problem.num_cons(),
        program.problem.binaries().len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
