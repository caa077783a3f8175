//! The `pgnn` command line: dataset generation, training, checkpoint
//! evaluation, distortion measurement and the symmetry demonstration.
//!
//! Exit codes: 0 on success, 1 when arguments, configs or inputs fail
//! validation, 2 when a validated run fails.

mod checkpoint;
mod config;

pub use checkpoint::Checkpoint;
pub use config::{DatasetSpec, RunConfig, SplitConfig};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::graph::{
    connected_caveman, constant_features, grid_graph, load_edge_list, path_graph, write_edge_list, write_labels, Graph,
    PairTask,
};
use crate::metric::{all_pairs, bourgain_embed, measure_distortion, sample_anchor_family, AnchorFamily, Norm};
use crate::model::PgnnParams;
use crate::model::{gcn_embed, init_rng, make_distance_input, pgnn_embed, DistanceVariant, GcnParams, PgnnConfig};
use crate::train::{
    evaluate_split, model_embeddings, prepare_graph, run_experiment, EpochRecord, Metrics, ModelSpec, Setting,
    SplitMetrics,
};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "pgnn", version, about = "Position-aware graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as edges.tsv (+ labels.tsv).
    Generate {
        #[command(subcommand)]
        dataset: GenerateDataset,
    },
    /// Train from a JSON config; writes metrics.json and checkpoint.bin.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides train.repeats.
        #[arg(long)]
        repeats: Option<usize>,
        /// Output directory; overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on the validation and test pairs of a config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distortion of anchor-distance embeddings over random anchor draws.
    Distortion(DistortionArgs),
    /// Compare GCN and P-GNN end-node embeddings on the 5-node path.
    SymmetryDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum GenerateDataset {
    Grid {
        rows: usize,
        cols: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Communities {
        n_comm: usize,
        comm_size: usize,
        rewire_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct DistortionArgs {
    /// grid ROWS COLS | communities N_COMM SIZE P | path N | edge-list PATH
    #[arg(required = true, num_args = 1..)]
    dataset: Vec<String>,
    /// Anchor constant.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Embedding norm: 1, 2 or inf.
    #[arg(long, default_value = "1")]
    p: Norm,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Seeds the anchor draws (repeat r uses seed + r) and communities rewiring.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

type CmdResult = std::result::Result<(), Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate { dataset } => cmd_generate(dataset),
        Command::Train {
            config,
            seed,
            repeats,
            out,
        } => cmd_train(&config, seed, repeats, out),
        Command::Eval {
            config,
            checkpoint,
            out,
        } => cmd_eval(&config, &checkpoint, out.as_deref()),
        Command::Distortion(args) => cmd_distortion(args),
        Command::SymmetryDemo { seed, out } => cmd_symmetry_demo(seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Writes through a sibling temp file so readers never see partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| runtime(Error::io(path, e)))
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| runtime(Error::io(dir, e)))
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(dataset: GenerateDataset) -> CmdResult {
    let (g, header, out) = match dataset {
        GenerateDataset::Grid { rows, cols, out } => {
            let g = grid_graph(rows, cols).map_err(invalid)?;
            (g, format!("grid {rows} {cols}"), out)
        }
        GenerateDataset::Communities {
            n_comm,
            comm_size,
            rewire_prob,
            seed,
            out,
        } => {
            if !(0.0..=1.0).contains(&rewire_prob) {
                return Err(invalid(format!("rewire_prob must be in [0, 1], got {rewire_prob}")));
            }
            let g = connected_caveman(n_comm, comm_size, rewire_prob, seed).map_err(invalid)?;
            (
                g,
                format!("communities {n_comm} {comm_size} {rewire_prob} seed {seed}"),
                out,
            )
        }
    };
    create_dir(&out)?;
    let edges = out.join("edges.tsv");
    write_edge_list(&g, &edges, &header).map_err(runtime)?;
    if let Some(labels) = g.labels() {
        write_labels(labels, out.join("labels.tsv")).map_err(runtime)?;
    }
    Ok(())
}

fn config_base(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn model_label(model: &ModelSpec) -> String {
    match model {
        ModelSpec::Pgnn(c) => {
            let v = match c.variant {
                DistanceVariant::Exact => 'e',
                DistanceVariant::Fast => 'f',
            };
            format!("pgnn-{v}-{}l", c.layers)
        }
        ModelSpec::Gcn(c) => format!("gcn-{}l", c.layers),
    }
}

#[derive(Serialize)]
struct RepeatReport<'a> {
    repeat: usize,
    seed: u64,
    best_epoch: usize,
    val: SplitMetrics,
    test: SplitMetrics,
    log: &'a [EpochRecord],
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    task: PairTask,
    dataset: String,
    model: String,
    setting: Setting,
    repeats: usize,
    per_repeat: Vec<RepeatReport<'a>>,
    mean_auc: f64,
    std_auc: f64,
    wall_time_s: Option<f64>,
    config: &'a RunConfig,
}

fn metrics_report<'a>(cfg: &'a RunConfig, m: &'a Metrics, wall_time_s: Option<f64>) -> MetricsReport<'a> {
    MetricsReport {
        task: cfg.task,
        dataset: cfg.dataset.name(),
        model: model_label(&cfg.model),
        setting: cfg.train.setting,
        repeats: m.per_repeat.len(),
        per_repeat: m
            .per_repeat
            .iter()
            .map(|r| RepeatReport {
                repeat: r.repeat,
                seed: r.seed,
                best_epoch: r.best_epoch,
                val: r.val,
                test: r.test,
                log: &r.log,
            })
            .collect(),
        mean_auc: m.mean_auc,
        std_auc: m.std_auc,
        wall_time_s,
        config: cfg,
    }
}

fn cmd_train(config: &Path, seed: Option<u64>, repeats: Option<usize>, out: Option<PathBuf>) -> CmdResult {
    let mut cfg = RunConfig::read(config).map_err(invalid)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    if let Some(repeats) = repeats {
        cfg.train.repeats = repeats;
    }
    if out.is_some() {
        cfg.out = out;
    }
    cfg.validate().map_err(invalid)?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| invalid("no output directory: set `out` in the config or pass --out"))?;
    let (g, split) = cfg.materialize(config_base(config)).map_err(invalid)?;

    let start = Instant::now();
    let metrics = run_experiment(&g, &split, &cfg.model, &cfg.train).map_err(runtime)?;
    let wall = cfg.record_wall_time.then(|| start.elapsed().as_secs_f64());

    // checkpoint the repeat with the best validation AUC, earliest on ties
    let best = metrics
        .per_repeat
        .iter()
        .reduce(|a, b| if b.val.roc_auc > a.val.roc_auc { b } else { a })
        .expect("at least one repeat");
    let ckpt = Checkpoint::new(best.seed, best.params.clone(), best.anchors.as_ref());

    create_dir(&out)?;
    emit_json(&metrics_report(&cfg, &metrics, wall), Some(&out.join("metrics.json")))?;
    write_atomic(&out.join("checkpoint.bin"), &ckpt.encode())?;
    println!(
        "{} on {}: mean test AUC {:.4} +/- {:.4} over {} repeats",
        model_label(&cfg.model),
        cfg.dataset.name(),
        metrics.mean_auc,
        metrics.std_auc,
        metrics.per_repeat.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    task: PairTask,
    dataset: String,
    model: String,
    setting: Setting,
    checkpoint_seed: u64,
    val: SplitMetrics,
    test: SplitMetrics,
}

fn cmd_eval(config: &Path, checkpoint: &Path, out: Option<&Path>) -> CmdResult {
    let cfg = RunConfig::read(config).map_err(invalid)?;
    cfg.validate().map_err(invalid)?;
    let bytes = fs::read(checkpoint).map_err(|e| invalid(Error::io(checkpoint, e)))?;
    let ckpt = Checkpoint::decode(&bytes).map_err(invalid)?;
    let (g, split) = cfg.materialize(config_base(config)).map_err(invalid)?;
    let graph = prepare_graph(&g, &split, cfg.train.setting);
    let anchors = match &ckpt.anchors {
        Some(sets) => Some(AnchorFamily::from_sets(graph.n(), sets.clone()).map_err(invalid)?),
        None => None,
    };
    let z = model_embeddings(&graph, &cfg.model, &ckpt.params, anchors.as_ref()).map_err(invalid)?;
    let report = EvalReport {
        task: cfg.task,
        dataset: cfg.dataset.name(),
        model: model_label(&cfg.model),
        setting: cfg.train.setting,
        checkpoint_seed: ckpt.seed,
        val: evaluate_split(&z, &split.val_pos, &split.val_neg).map_err(runtime)?,
        test: evaluate_split(&z, &split.test_pos, &split.test_neg).map_err(runtime)?,
    };
    emit_json(&report, out)
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> std::result::Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    tok.parse().map_err(|e| invalid(format!("bad {what} {tok:?}: {e}")))
}

fn distortion_dataset(words: &[String], seed: u64) -> std::result::Result<(String, Graph), Failure> {
    let words: Vec<&str> = words.iter().map(String::as_str).collect();
    let g = match words.as_slice() {
        ["grid", r, c] => grid_graph(parse_num(r, "rows")?, parse_num(c, "cols")?),
        ["communities", n, s, p] => {
            let p: f64 = parse_num(p, "rewire_prob")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("rewire_prob must be in [0, 1], got {p}")));
            }
            connected_caveman(parse_num(n, "n_comm")?, parse_num(s, "comm_size")?, p, seed)
        }
        ["path", n] => path_graph(parse_num(n, "n")?),
        ["edge-list", path] => load_edge_list(path),
        _ => {
            return Err(invalid(format!(
                "unknown dataset {:?}; expected grid R C, communities N S P, path N or edge-list PATH",
                words.join(" ")
            )))
        }
    };
    Ok((words.join(" "), g.map_err(invalid)?))
}

#[derive(Serialize)]
struct DistortionRepeat {
    seed: u64,
    k: usize,
    expansion: f64,
    contraction: f64,
    /// `null` when two nodes share an embedding.
    distortion: f64,
}

#[derive(Serialize)]
struct DistortionReport {
    dataset: String,
    n: usize,
    c: f64,
    p: Norm,
    k: usize,
    repeats: usize,
    /// Worst case over repeats.
    expansion: f64,
    contraction: f64,
    distortion: f64,
    mean_distortion: f64,
    per_repeat: Vec<DistortionRepeat>,
}

fn cmd_distortion(args: DistortionArgs) -> CmdResult {
    if !(args.c.is_finite() && args.c > 0.0) {
        return Err(invalid(format!("--c must be > 0, got {}", args.c)));
    }
    if args.repeats == 0 {
        return Err(invalid("--repeats must be >= 1"));
    }
    let (name, g) = distortion_dataset(&args.dataset, args.seed)?;
    if g.n() < 2 {
        return Err(invalid("distortion needs at least two nodes"));
    }
    let comps = g.components();
    if comps.len() > 1 {
        let sizes: Vec<String> = comps
            .iter()
            .map(|c| format!("{} nodes from {}", c.len(), c[0]))
            .collect();
        return Err(invalid(Error::Disconnected(format!(
            "{} components: {}",
            comps.len(),
            sizes.join(", ")
        ))));
    }
    let dm = all_pairs(&g);
    let mut per_repeat = Vec::with_capacity(args.repeats);
    for r in 0..args.repeats {
        let seed = args.seed.wrapping_add(r as u64);
        let fam = sample_anchor_family(g.n(), args.c, seed).map_err(invalid)?;
        let emb = bourgain_embed(&dm, &fam).map_err(runtime)?;
        let d = measure_distortion(&dm, &emb, args.p).map_err(runtime)?;
        per_repeat.push(DistortionRepeat {
            seed,
            k: fam.k(),
            expansion: d.expansion,
            contraction: d.contraction,
            distortion: d.distortion,
        });
    }
    let worst = |f: fn(&DistortionRepeat) -> f64| per_repeat.iter().map(f).fold(0.0, f64::max);
    let report = DistortionReport {
        dataset: name,
        n: g.n(),
        c: args.c,
        p: args.p,
        k: per_repeat[0].k,
        repeats: args.repeats,
        expansion: worst(|r| r.expansion),
        contraction: worst(|r| r.contraction),
        distortion: worst(|r| r.distortion),
        mean_distortion: per_repeat.iter().map(|r| r.distortion).sum::<f64>() / args.repeats as f64,
        per_repeat,
    };
    emit_json(&report, args.out.as_deref())
}

#[derive(Debug, Serialize)]
pub struct SymmetryReport {
    /// `|h_0 - h_4|` under the GCN baseline.
    pub gcn_gap: f64,
    /// `|z_0 - z_4|` under P-GNN with the anchor set `{0}`.
    pub pgnn_gap: f64,
    pub gcn_identical: bool,
    pub pgnn_distinct: bool,
}

/// GCN and P-GNN end-node gaps on the 5-path with constant features.
///
/// P-GNN rows are compared before normalisation: with a single anchor set a
/// unit-length row keeps only the sign.
pub fn symmetry_demo(seed: u64) -> crate::Result<SymmetryReport> {
    let g = constant_features(&path_graph(5)?);
    let cfg = PgnnConfig {
        message_dim: 8,
        normalize_output: false,
        ..PgnnConfig::default()
    };
    let fam = AnchorFamily::from_sets(5, vec![vec![0]])?;
    let dm = make_distance_input(&g, cfg.variant);
    let mut rng = init_rng(seed);
    let pgnn = PgnnParams::init(1, &cfg, &mut rng);
    let z = pgnn_embed(&g, &dm, &fam, &pgnn, &cfg)?.z;
    let gcn = GcnParams::init(1, 8, 3, &mut rng);
    let h = gcn_embed(&g, &gcn)?;
    let gap = |m: &crate::Matrix| Norm::L2.distance(m.row(0), m.row(4));
    let (gcn_gap, pgnn_gap) = (gap(&h), gap(&z));
    Ok(SymmetryReport {
        gcn_gap,
        pgnn_gap,
        gcn_identical: h.row(0) == h.row(4),
        pgnn_distinct: pgnn_gap > 1e-6,
    })
}

fn cmd_symmetry_demo(seed: u64, out: Option<&Path>) -> CmdResult {
    let report = symmetry_demo(seed).map_err(runtime)?;
    emit_json(&report, out)?;
    if report.gcn_identical && report.pgnn_distinct {
        Ok(())
    } else {
        Err(runtime("symmetry expectations failed"))
    }
}
