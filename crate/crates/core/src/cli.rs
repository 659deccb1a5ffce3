//! The `spp` command line: prune, attach, train, merge, verify, count-params
//! and a demo-data generator.
//!
//! Exit codes: 0 success, 1 verification failure (or a diverged run),
//! 2 usage or input error, 3 internal invariant breach.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adapters::{Adapter, AdapterKind, DEFAULT_DROPOUT, DEFAULT_SCALE};
use crate::checkpoint::{
    calibration_input, dataset_from_store, dataset_to_store, load_net, net_to_store, save_net,
};
use crate::error::{Result, SppError};
use crate::numerics::{Rng, TensorStore};
use crate::pruning::{
    apply_mask, build_mask, collect_calibration, score_magnitude, score_wanda, SparsityPattern,
};
use crate::training::{
    count_trainable, make_teacher_student, train, ArchSpec, LayerShape, Optimizer, TrainConfig,
    TrainMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "spp",
    version,
    about = "Sparsity-preserving adapters for pruned linear layers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Magnitude,
    Wanda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Spp,
    Lora,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adamw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute masks and zero out pruned weights.
    Prune {
        input: PathBuf,
        output: PathBuf,
        /// `N:M` (e.g. 2:4) or `unstructured`.
        #[arg(long)]
        pattern: String,
        /// Fraction of weights to zero, for unstructured pruning.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_enum, default_value = "magnitude")]
        metric: Metric,
        /// Calibration store (required for wanda).
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Rank unstructured scores within each row instead of the whole matrix.
        #[arg(long)]
        row_wise: bool,
    },
    /// Attach freshly initialised adapters to every layer.
    Attach {
        input: PathBuf,
        output: PathBuf,
        #[arg(long = "r")]
        rank: usize,
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: f64,
        #[arg(long, default_value_t = DEFAULT_DROPOUT)]
        dropout: f64,
        #[arg(long, value_enum, default_value = "spp")]
        kind: KindArg,
        #[arg(long, env = "SPP_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Fine-tune adapters (or surviving weights with --baseline-eq3).
    Train {
        model: PathBuf,
        data: PathBuf,
        output: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Peak learning rate; defaults to 1e-3 for adamw, 1e-2 for sgd.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, value_enum, default_value = "adamw")]
        optimizer: OptimizerArg,
        #[arg(long, default_value_t = 0.03)]
        warmup_ratio: f64,
        #[arg(long, default_value_t = 0.001)]
        weight_decay: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, env = "SPP_SEED", default_value_t = 0)]
        seed: u64,
        /// Retrain surviving weights with `grad ⊙ mask` instead of adapters.
        #[arg(long)]
        baseline_eq3: bool,
        /// Per-step CSV; defaults to the output path with a `.csv` extension.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Final metrics as JSON; defaults to the output path with `.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fold adapters into the base weights.
    Merge {
        input: PathBuf,
        output: PathBuf,
        /// For LoRA layers, re-apply the original mask after merging.
        #[arg(long)]
        reprune_with_original_mask: bool,
    },
    /// Check every layer's mask pattern and that weights respect it.
    Verify { input: PathBuf },
    /// Trainable parameter count for SPP adapters on a preset or custom arch.
    CountParams {
        /// `llama7b`, `llama13b` or a JSON arch file.
        #[arg(long)]
        arch: String,
        #[arg(long = "r")]
        rank: usize,
    },
    /// Write a dense teacher model, its data and calibration inputs.
    Demo {
        dir: PathBuf,
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        #[arg(long, env = "SPP_SEED", default_value_t = 0)]
        seed: u64,
    },
}

/// Outcome of a subcommand that ran to completion.
enum Done {
    Ok,
    VerifyFailed,
}

pub fn exit_code(err: &SppError) -> i32 {
    match err {
        SppError::Invariant(_) => EXIT_INTERNAL,
        SppError::Diverged { .. } => EXIT_VERIFY,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(Done::Ok) => EXIT_OK,
        Ok(Done::VerifyFailed) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cmd: Command) -> Result<Done> {
    match cmd {
        Command::Prune {
            input,
            output,
            pattern,
            ratio,
            metric,
            calib,
            row_wise,
        } => cmd_prune(
            &input,
            &output,
            &pattern,
            ratio,
            metric,
            calib.as_deref(),
            row_wise,
        ),
        Command::Attach {
            input,
            output,
            rank,
            scale,
            dropout,
            kind,
            seed,
        } => cmd_attach(&input, &output, rank, scale, dropout, kind, seed),
        Command::Train {
            model,
            data,
            output,
            steps,
            lr,
            optimizer,
            warmup_ratio,
            weight_decay,
            batch_size,
            seed,
            baseline_eq3,
            csv,
            summary,
        } => {
            let optimizer = match optimizer {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Adamw => Optimizer::AdamW,
            };
            let cfg = TrainConfig {
                steps,
                lr: lr.unwrap_or_else(|| TrainConfig::default_lr(optimizer)),
                batch_size,
                warmup_ratio,
                weight_decay,
                seed,
                optimizer,
                mode: if baseline_eq3 {
                    TrainMode::FixedMask
                } else {
                    TrainMode::Adapters
                },
            };
            let csv = csv.unwrap_or_else(|| output.with_extension("csv"));
            let summary = summary.unwrap_or_else(|| output.with_extension("json"));
            cmd_train(&model, &data, &output, &csv, &summary, &cfg)
        }
        Command::Merge {
            input,
            output,
            reprune_with_original_mask,
        } => cmd_merge(&input, &output, reprune_with_original_mask),
        Command::Verify { input } => cmd_verify(&input),
        Command::CountParams { arch, rank } => cmd_count_params(&arch, rank),
        Command::Demo {
            dir,
            m,
            n,
            samples,
            seed,
        } => cmd_demo(&dir, m, n, samples, seed),
    }
}

fn parse_pattern(pattern: &str, ratio: Option<f64>, row_wise: bool) -> Result<SparsityPattern> {
    if pattern == "unstructured" {
        let ratio =
            ratio.ok_or_else(|| SppError::argument("--pattern unstructured needs --ratio"))?;
        let p = SparsityPattern::unstructured(ratio)?;
        Ok(match p {
            SparsityPattern::Unstructured { ratio, .. } => SparsityPattern::Unstructured {
                ratio,
                per_row: row_wise,
            },
            other => other,
        })
    } else {
        if ratio.is_some() {
            return Err(SppError::argument(
                "--ratio only applies to unstructured pruning",
            ));
        }
        if row_wise {
            return Err(SppError::argument(
                "--row-wise only applies to unstructured pruning",
            ));
        }
        pattern.parse()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| SppError::io(path, e))?;
    std::io::Write::write_all(&mut tmp, text.as_bytes()).map_err(|e| SppError::io(path, e))?;
    tmp.persist(path).map_err(|e| SppError::io(path, e.error))?;
    Ok(())
}

fn cmd_prune(
    input: &Path,
    output: &Path,
    pattern: &str,
    ratio: Option<f64>,
    metric: Metric,
    calib: Option<&Path>,
    row_wise: bool,
) -> Result<Done> {
    let pattern = parse_pattern(pattern, ratio, row_wise)?;
    if metric == Metric::Wanda && calib.is_none() {
        return Err(SppError::argument("--metric wanda needs --calib"));
    }
    let calib = calib.map(TensorStore::read).transpose()?;
    let mut net = load_net(input)?;
    if net.has_adapters() {
        return Err(SppError::State(
            "cannot prune a model with adapters attached".into(),
        ));
    }
    for l in net.layers() {
        let (m, n) = l.base.weight().shape();
        pattern
            .validate_for(m, n)
            .map_err(|e| SppError::pattern(format!("layer `{}`: {e}", l.name)))?;
    }

    // Wanda sees the activations of the already-pruned prefix.
    let mut propagated = calib
        .as_ref()
        .filter(|c| c.contains("x"))
        .map(|c| c.matrix("x"))
        .transpose()?;
    let loss = net.loss_kind();
    for l in net.layers_mut() {
        let scores = match (metric, &calib) {
            (Metric::Wanda, Some(c)) => {
                let xs = calibration_input(c, &l.name, propagated.as_ref())?;
                score_wanda(l.base.weight(), &collect_calibration(&xs))?
            }
            _ => score_magnitude(l.base.weight()),
        };
        let mask = build_mask(&scores, pattern)?;
        l.base = apply_mask(l.base.weight(), &mask)?;
        if let Some(x) = propagated.take() {
            let single = crate::training::ToyNet::new(vec![l.clone()], loss)?;
            propagated = Some(single.forward(&x)?);
        }
    }
    let mut failed = false;
    for (name, report) in net.verify() {
        println!("{name}: {report}");
        failed |= !report.passed();
    }
    if failed {
        return Err(SppError::Invariant(
            "freshly pruned layer failed verification".into(),
        ));
    }
    save_net(&net, output)?;
    Ok(Done::Ok)
}

fn cmd_attach(
    input: &Path,
    output: &Path,
    r: usize,
    scale: f64,
    dropout: f64,
    kind: KindArg,
    seed: u64,
) -> Result<Done> {
    if r == 0 {
        return Err(SppError::argument("--r must be at least 1"));
    }
    if !scale.is_finite() {
        return Err(SppError::argument(format!(
            "--scale must be finite, got {scale}"
        )));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(SppError::argument(format!(
            "--dropout must lie in [0, 1), got {dropout}"
        )));
    }
    let mut net = load_net(input)?;
    if net.has_adapters() {
        return Err(SppError::State("model already has adapters".into()));
    }
    let shapes: Vec<LayerShape> = net
        .layers()
        .iter()
        .map(|l| {
            let (m, n) = l.base.weight().shape();
            LayerShape::new(l.name.clone(), m, n)
        })
        .collect();
    let mut rng = Rng::seed_from_u64(seed);
    match kind {
        KindArg::Spp => {
            let arch = ArchSpec {
                name: "model".into(),
                blocks: 1,
                layers: shapes.clone(),
                extra_params: 0,
            };
            // lists every layer whose m is not a multiple of r
            let count = count_trainable(&arch, r)?;
            net.attach_spp(r, scale, dropout, &mut rng)?;
            for s in shapes.iter().filter(|s| s.m == r) {
                println!("{}: full-parameter mode (r = m = {r})", s.name);
            }
            println!("{count}");
        }
        KindArg::Lora => {
            net.attach_lora(r, scale, dropout, &mut rng)?;
            let trainable = net.trainable_adapter_params() as u64;
            let total: u64 = shapes.iter().map(|s| (s.m * s.n) as u64).sum();
            println!(
                "trainable={trainable} total={total} per_mille={:.4}",
                1000.0 * trainable as f64 / total as f64
            );
        }
    }
    save_net(&net, output)?;
    Ok(Done::Ok)
}

fn cmd_train(
    model: &Path,
    data: &Path,
    output: &Path,
    csv: &Path,
    summary: &Path,
    cfg: &TrainConfig,
) -> Result<Done> {
    cfg.validate()?;
    let net = load_net(model)?;
    match cfg.mode {
        TrainMode::Adapters if !net.has_adapters() => {
            return Err(SppError::argument(
                "model has no adapters; attach some or pass --baseline-eq3",
            ))
        }
        TrainMode::FixedMask if net.has_adapters() => {
            return Err(SppError::argument(
                "--baseline-eq3 needs a model without adapters",
            ))
        }
        _ => {}
    }
    let (train_set, eval_set) = dataset_from_store(&TensorStore::read(data)?)?;
    let (trained, record) = match train(&net, &train_set, eval_set.as_ref(), cfg) {
        Ok(v) => v,
        Err(e @ SppError::Diverged { .. }) => {
            eprintln!("error: {e}");
            return Ok(Done::VerifyFailed);
        }
        Err(e) => return Err(e),
    };
    if cfg.mode == TrainMode::Adapters {
        for (a, b) in net.layers().iter().zip(trained.layers()) {
            if a.base.weight() != b.base.weight() {
                return Err(SppError::Invariant(format!(
                    "frozen weight of `{}` changed",
                    a.name
                )));
            }
        }
    }
    let s = record
        .summary()
        .ok_or_else(|| SppError::Invariant("run finished without a summary".into()))?;
    match s.eval_loss {
        Some(e) => println!("train_loss={} eval_loss={}", s.train_loss, e),
        None => println!("train_loss={}", s.train_loss),
    }
    save_net(&trained, output)?;
    write_text(csv, &record.to_csv())?;
    write_text(summary, &(record.summary_json()? + "\n"))?;
    Ok(Done::Ok)
}

fn cmd_merge(input: &Path, output: &Path, reprune: bool) -> Result<Done> {
    let net = load_net(input)?;
    if !net.has_adapters() {
        return Err(SppError::argument("model has no adapters to merge"));
    }
    let kinds: Vec<Option<AdapterKind>> = net
        .layers()
        .iter()
        .map(|l| l.adapter.as_ref().map(Adapter::kind))
        .collect();
    let merged = net.merged(reprune)?;
    for ((name, report), kind) in merged.verify().into_iter().zip(kinds) {
        println!("{name}: {report}");
        if report.passed() {
            continue;
        }
        match kind {
            Some(AdapterKind::Lora) if !reprune => {
                log::warn!("layer `{name}` densified by LoRA merge; use --reprune-with-original-mask to restore the mask");
            }
            _ => {
                return Err(SppError::Invariant(format!(
                    "merged layer `{name}` violates its mask"
                )))
            }
        }
    }
    save_net(&merged, output)?;
    Ok(Done::Ok)
}

fn cmd_verify(input: &Path) -> Result<Done> {
    let net = load_net(input)?;
    let mut ok = true;
    for (name, report) in net.verify() {
        println!("{name}: {report}");
        ok &= report.passed();
    }
    Ok(if ok { Done::Ok } else { Done::VerifyFailed })
}

fn cmd_count_params(arch: &str, r: usize) -> Result<Done> {
    let spec = match ArchSpec::preset(arch) {
        Some(s) => s,
        None => {
            let path = Path::new(arch);
            if !path.is_file() {
                return Err(SppError::argument(format!(
                    "unknown arch `{arch}`; expected llama7b, llama13b or a JSON file"
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| SppError::io(path, e))?;
            ArchSpec::from_json(&text)?
        }
    };
    let c = count_trainable(&spec, r)?;
    println!("arch={} r={r}", spec.name);
    println!("trainable={}", c.trainable);
    println!("total={}", c.total);
    println!("per_mille={:.4}", c.per_mille);
    Ok(Done::Ok)
}

fn cmd_demo(dir: &Path, m: usize, n: usize, samples: usize, seed: u64) -> Result<Done> {
    let ts = make_teacher_student(seed, m, n, SparsityPattern::unstructured(0.0)?, samples)?;
    std::fs::create_dir_all(dir).map_err(|e| SppError::io(dir, e))?;
    net_to_store(&ts.teacher)?.write(dir.join("model.sppt"))?;
    dataset_to_store(&ts.train, Some(&ts.eval))?.write(dir.join("data.sppt"))?;
    let mut calib = TensorStore::new();
    let rows = ts.train.len().min(128);
    let idx: Vec<usize> = (0..rows).collect();
    calib.put_matrix("x", &ts.train.gather(&idx).0)?;
    calib.write(dir.join("calib.sppt"))?;
    println!(
        "wrote model.sppt ({m}x{n}), data.sppt ({} train / {} eval), calib.sppt ({rows} rows) to {}",
        ts.train.len(),
        ts.eval.len(),
        dir.display()
    );
    Ok(Done::Ok)
}
