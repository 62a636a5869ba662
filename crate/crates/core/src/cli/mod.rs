//! `oodkit` command line: validate, probe, eval, synth, geometry.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage or I/O failure.
//! Settings resolve as flags, then the `--config` JSON file, then defaults.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{render_report, EvalReport, Format, ReportMeta};
use crate::pipeline::{evaluate, train_probe, ProbeKind};
use crate::probe::{accuracy, load_head, save_head, ProbeConfig, ProbeHead};
use crate::scorers::{save_scores, score_all, Method, ScorerParams};
use crate::store::{load_split, validate_manifest, Manifest, Role};
use crate::synth::{generate_scenario, run_geometry_sweep, write_scenario, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "oodkit",
    version,
    about = "OOD detection on frozen pre-trained embeddings"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "OODKIT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest and the array files it references.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train a probe on id_train and write the head plus metrics.json.
    Probe(RunArgs),
    /// Fit and score methods, then write the AUROC report.
    Eval(RunArgs),
    /// Write a synthetic scenario as a manifest plus NPY files.
    Synth(RunArgs),
    /// Run the synthetic concentrated/scattered experiment.
    Geometry(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    /// linear or mlp.
    #[arg(long, value_parser = parse_probe)]
    pub probe: Option<ProbeKind>,
    /// Directory of a head written by `probe`; skips training.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Neighbour rank for KNN.
    #[arg(long)]
    pub k: Option<usize>,
    /// ReAct clipping percentile of ID-train activations.
    #[arg(long = "react-p")]
    pub react_p: Option<f64>,
    /// Fraction of last-layer weights DICE zeroes.
    #[arg(long = "dice-sparsity")]
    pub dice_sparsity: Option<f64>,
    /// Principal dimension for ViM and Residual.
    #[arg(long = "vim-dprime")]
    pub vim_dprime: Option<usize>,
    /// Mahalanobis shrinkage, relative to trace/d.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Seed for probe training and synthesis.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated report formats: text, csv, json.
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    pub format: Option<Vec<Format>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Probe minibatch size.
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Peak learning rate of the cosine schedule.
    #[arg(long)]
    pub lr: Option<f64>,
    /// MLP hidden width.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Standardize features with ID-train statistics before probing.
    #[arg(long)]
    pub standardize: bool,
    /// Number of consecutive seeds for `geometry`.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Also write every score vector under `<out>/scores`.
    #[arg(long = "save-scores")]
    pub save_scores: bool,
    /// Synthetic feature dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Synthetic ID classes.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Concentrated OOD clusters.
    #[arg(long = "ood-clusters")]
    pub ood_clusters: Option<usize>,
    /// Points per cluster; scattered OOD gets clusters times this.
    #[arg(long = "n-per-cluster")]
    pub n_per_cluster: Option<usize>,
    /// Norm of every cluster mean.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Within-cluster standard deviation.
    #[arg(long = "sigma-id")]
    pub sigma_id: Option<f64>,
    /// Per-coordinate spread of scattered OOD (default 2r/sqrt(d)).
    #[arg(long = "sigma-scatter")]
    pub sigma_scatter: Option<f64>,
    /// Minimum distance between cluster means.
    #[arg(long)]
    pub separation: Option<f64>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_probe(s: &str) -> std::result::Result<ProbeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Fully resolved settings of one run; also the config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub probe: ProbeKind,
    pub probe_config: ProbeConfig,
    pub scorers: ScorerParams,
    pub seed: u64,
    pub formats: Vec<String>,
    pub scenario: ScenarioConfig,
    pub seeds: usize,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub head: Option<PathBuf>,
    #[serde(skip)]
    pub save_scores: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            methods: Method::ALL.to_vec(),
            probe: ProbeKind::Linear,
            probe_config: ProbeConfig::default(),
            scorers: ScorerParams::default(),
            seed: 0,
            formats: vec!["text".into(), "csv".into(), "json".into()],
            scenario: ScenarioConfig::default(),
            seeds: 1,
            out: None,
            head: None,
            save_scores: false,
        }
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        if args.manifest.is_some() {
            cfg.manifest = args.manifest.clone();
        }
        if args.out.is_some() {
            cfg.out = args.out.clone();
        }
        if args.head.is_some() {
            cfg.head = args.head.clone();
        }
        cfg.save_scores |= args.save_scores;
        set!(args.methods => cfg.methods);
        set!(args.probe => cfg.probe);
        set!(args.k => cfg.scorers.k);
        set!(args.react_p => cfg.scorers.react_percentile);
        set!(args.dice_sparsity => cfg.scorers.dice_sparsity);
        if args.vim_dprime.is_some() {
            cfg.scorers.vim_dim = args.vim_dprime;
        }
        set!(args.eps => cfg.scorers.mahalanobis_eps);
        set!(args.seed => cfg.seed);
        if let Some(f) = &args.format {
            cfg.formats = f
                .iter()
                .map(|f| f.extension().replace("txt", "text"))
                .collect();
        }
        set!(args.epochs => cfg.probe_config.epochs);
        set!(args.batch_size => cfg.probe_config.batch_size);
        set!(args.lr => cfg.probe_config.learning_rate);
        set!(args.hidden => cfg.probe_config.hidden_width);
        if args.standardize {
            cfg.probe_config.standardize_features = true;
        }
        set!(args.seeds => cfg.seeds);
        set!(args.dim => cfg.scenario.d);
        set!(args.classes => cfg.scenario.n_classes);
        set!(args.ood_clusters => cfg.scenario.n_ood_clusters);
        set!(args.n_per_cluster => cfg.scenario.n_per_cluster);
        set!(args.radius => cfg.scenario.radius);
        set!(args.sigma_id => cfg.scenario.sigma_id);
        if args.sigma_scatter.is_some() {
            cfg.scenario.sigma_scatter = args.sigma_scatter;
        }
        set!(args.separation => cfg.scenario.min_mean_separation);

        // one seed drives every random choice
        cfg.probe_config.seed = cfg.seed;
        cfg.scenario.seed = cfg.seed;

        if cfg.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if cfg.seeds == 0 {
            return Err(Error::Config("--seeds must be ≥ 1".into()));
        }
        cfg.formats()?;
        Ok(cfg)
    }

    pub fn formats(&self) -> Result<Vec<Format>> {
        self.formats.iter().map(|f| f.parse()).collect()
    }

    fn manifest(&self) -> Result<Manifest> {
        let path = self
            .manifest
            .as_ref()
            .ok_or_else(|| Error::Config("--manifest is required".into()))?;
        Manifest::load(path)
    }

    fn out_dir(&self) -> Result<&Path> {
        let out = self
            .out
            .as_deref()
            .ok_or_else(|| Error::Config("--out is required".into()))?;
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(out)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Json(_) | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_reports(cfg: &RunConfig, report: &EvalReport, stem: &str) -> Result<()> {
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        for f in cfg.formats()? {
            write_file(
                &out.join(format!("{stem}.{}", f.extension())),
                &render_report(report, f)?,
            )?;
        }
    }
    Ok(())
}

fn cmd_validate(manifest: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let m = match Manifest::load(manifest) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let issues = validate_manifest(&m);
    for issue in &issues {
        let _ = writeln!(out, "{issue}");
    }
    if issues.is_empty() {
        EXIT_OK
    } else {
        EXIT_DOMAIN
    }
}

fn id_test_name(manifest: &Manifest) -> Result<String> {
    let names = manifest.names_with_role(Role::IdTest);
    let first = names
        .first()
        .ok_or_else(|| Error::Manifest("no id_test split".into()))?;
    if names.len() > 1 {
        log::warn!("several id_test splits; evaluating against '{first}'");
    }
    Ok(first.to_string())
}

#[derive(Serialize)]
struct ProbeMetrics {
    probe: ProbeKind,
    train_accuracy: f64,
    id_test_accuracy: std::collections::BTreeMap<String, f64>,
    final_epoch_loss: Option<f64>,
    config: serde_json::Value,
}

fn cmd_probe(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let manifest = cfg.manifest()?;
    let train = load_split(&manifest, manifest.id_train_name()?)?;
    let (head, losses): (ProbeHead, Vec<f64>) = match cfg.probe {
        ProbeKind::Linear => {
            let (h, l) = crate::probe::train_linear_probe_logged(&train, &cfg.probe_config)?;
            (h.into(), l)
        }
        ProbeKind::Mlp => {
            let (h, l) = crate::probe::train_mlp_probe_logged(&train, &cfg.probe_config)?;
            (h.into(), l)
        }
    };
    let dir = cfg.out_dir()?;
    save_head(dir, &head)?;
    let mut id_test_accuracy = std::collections::BTreeMap::new();
    for name in manifest.names_with_role(Role::IdTest) {
        let split = load_split(&manifest, name)?;
        if split.labels.is_some() {
            id_test_accuracy.insert(name.to_string(), accuracy(&head, &split)?);
        }
    }
    let metrics = ProbeMetrics {
        probe: cfg.probe,
        train_accuracy: accuracy(&head, &train)?,
        id_test_accuracy,
        final_epoch_loss: losses.last().copied(),
        config: cfg.snapshot(),
    };
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    write_file(&dir.join("metrics.json"), text.as_bytes())?;
    let _ = write!(out, "{text}");
    Ok(EXIT_OK)
}

fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let manifest = cfg.manifest()?;
    let train = load_split(&manifest, manifest.id_train_name()?)?;
    let id_test = load_split(&manifest, &id_test_name(&manifest)?)?;
    let oods = manifest
        .names_with_role(Role::OodTest)
        .into_iter()
        .map(|n| load_split(&manifest, n))
        .collect::<Result<Vec<_>>>()?;
    if oods.is_empty() {
        return Err(Error::Manifest("no ood_test split to evaluate".into()));
    }
    let head = if let Some(dir) = &cfg.head {
        Some(load_head(dir)?)
    } else if cfg.methods.iter().any(Method::needs_head) {
        Some(train_probe(cfg.probe, &train, &cfg.probe_config)?)
    } else {
        None
    };
    let id_accuracy = match (&head, &id_test.labels) {
        (Some(h), Some(_)) => Some(accuracy(h, &id_test)?),
        _ => None,
    };
    let ood_refs: Vec<_> = oods.iter().collect();
    let report = evaluate(
        &cfg.methods,
        &train,
        head.as_ref(),
        &id_test,
        &ood_refs,
        &cfg.scorers,
        ReportMeta {
            dataset: manifest.dataset.clone(),
            id_accuracy,
            failures: Vec::new(),
            config: cfg.snapshot(),
        },
    )?;
    if cfg.out.is_some() {
        write_reports(cfg, &report, "report")?;
    }
    if cfg.save_scores {
        let dir = cfg.out_dir()?.join("scores");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut splits = vec![&id_test];
        splits.extend(oods.iter());
        for cell in score_all(&cfg.methods, &train, head.as_ref(), &splits, &cfg.scorers) {
            if let Ok(sv) = cell.outcome {
                save_scores(
                    dir.join(format!("{}__{}", cell.method.key(), cell.split)),
                    &sv,
                    &cfg.scorers,
                )?;
            }
        }
    }
    let _ = out.write_all(&render_report(&report, Format::Text)?);
    Ok(if report.cells.is_empty() {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    })
}

fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let scenario = generate_scenario(&cfg.scenario)?;
    let path = write_scenario(&scenario, cfg.out_dir()?)?;
    let _ = writeln!(out, "{}", path.display());
    Ok(EXIT_OK)
}

fn cmd_geometry(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed + i).collect();
    let summary = run_geometry_sweep(
        &cfg.scenario,
        &seeds,
        &cfg.methods,
        &cfg.scorers,
        &cfg.probe_config,
    )?;
    let report = if seeds.len() == 1 {
        summary.runs.into_iter().next().expect("one run")
    } else {
        summary.median
    };
    write_reports(cfg, &report, "geometry")?;
    let _ = out.write_all(&render_report(&report, Format::Text)?);
    Ok(if report.cells.is_empty() {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    })
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let run =
        |args: &RunArgs, f: fn(&RunConfig, &mut dyn Write) -> Result<i32>, out: &mut dyn Write| {
            RunConfig::resolve(args).and_then(|cfg| f(&cfg, out))
        };
    let result = match &cli.command {
        Command::Validate { manifest } => return cmd_validate(manifest, out, err),
        Command::Probe(a) => run(a, cmd_probe, out),
        Command::Eval(a) => run(a, cmd_eval, out),
        Command::Synth(a) => run(a, cmd_synth, out),
        Command::Geometry(a) => run(a, cmd_geometry, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Parse `args` (including the program name) and run, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => {
            // the pool's closure must be Send, so collect output and replay it
            let (code, o, e) = pool.install(|| {
                let (mut o, mut e) = (Vec::new(), Vec::new());
                let code = dispatch(cli, &mut o, &mut e);
                (code, o, e)
            });
            let _ = out.write_all(&o);
            let _ = err.write_all(&e);
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
