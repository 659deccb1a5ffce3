//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use spp_core::adapters::{DropoutMask, SppAdapter, SppInit};
use spp_core::checkpoint::net_to_store;
use spp_core::numerics::alloc_track::Tracker;
use spp_core::numerics::{Matrix, Rng};
use spp_core::pruning::{verify_mask, SparsityPattern};
use spp_core::training::{count_trainable, make_teacher_student, train, ArchSpec, TrainConfig};

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

struct Capture;

impl log::Log for Capture {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            WARNINGS.lock().unwrap().push(record.args().to_string());
        }
    }

    fn flush(&self) {}
}

static LOGGER: Capture = Capture;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table1() -> Outcome {
    let c7 = count_trainable(&ArchSpec::llama7b(), 16).unwrap();
    let c13 = count_trainable(&ArchSpec::llama13b(), 16).unwrap();
    let pass = c7.trainable == 19_578_880
        && (c7.per_mille - 2.90).abs() <= 0.01
        && (c13.trainable as f64 - 3.1e7).abs() < 0.05e7
        && (c13.per_mille - 2.35).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "7B trainable={} per_mille={:.4} (vs rounded 6.8e9: {:.4}); 13B trainable={} per_mille={:.4}",
            c7.trainable,
            c7.per_mille,
            c7.per_mille_of(6.8e9),
            c13.trainable,
            c13.per_mille
        ),
    )
}

fn sparsity_preservation() -> Outcome {
    let mut rng = Rng::seed_from_u64(2024);
    let patterns = common::patterns();
    let mut cases = 0;
    let mut failures = 0;
    while cases < 1200 {
        let m = 1 + rng.below(64);
        let n = 8 * (1 + rng.below(8));
        let pattern = patterns[rng.below(patterns.len())];
        let layer = common::random_pruned(&mut rng, m, n, pattern);
        let rs = common::divisors(m);
        let r = rs[rng.below(rs.len())];
        let ad = common::random_spp(&mut rng, m, n, r, 0.0);
        let eff = ad.effective_weight(&layer).unwrap();
        let merged = ad.merge(&layer).unwrap();
        let mask = layer.mask().matrix();
        let leaked = eff
            .iter()
            .zip(mask.iter())
            .any(|(e, k)| *k == 0.0 && *e != 0.0);
        if leaked || merged.weight().nnz() != layer.weight().nnz() || !verify_mask(&merged).passed()
        {
            failures += 1;
        }
        cases += 1;
    }
    outcome(
        failures == 0,
        format!("{cases} cases, {failures} violations"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut big_buffers = Vec::new();
    for &b in &[1usize, 2, 7] {
        for &m in &[4usize, 8, 16] {
            for &n in &[4usize, 12] {
                for r in common::divisors(m) {
                    let layer = common::random_pruned(
                        &mut rng,
                        m,
                        n,
                        SparsityPattern::unstructured(0.5).unwrap(),
                    );
                    let ad = common::random_spp(&mut rng, m, n, r, 0.1);
                    let x = rng.uniform_matrix(-1.0, 1.0, b, n).unwrap();
                    let mask = DropoutMask::sample(b, n, 0.1, &mut rng).unwrap();
                    let (naive, _) = ad
                        .forward_naive_with(&x, &layer, mask.clone(), true)
                        .unwrap();
                    let tracker = Tracker::start();
                    let (fast, cache) = ad.forward_optimized_with(&x, &layer, mask, true).unwrap();
                    let report = tracker.finish();
                    drop(cache);
                    if report.allocated_shape(m, n) || report.allocated_shape(n, m) {
                        big_buffers.push((b, m, n, r));
                    }
                    worst = worst.max(naive.max_rel_diff(&fast).unwrap());
                    cases += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-12 && big_buffers.is_empty(),
        format!(
            "{cases} grid points, max rel diff {worst:.2e}, m×n buffers in optimized path: {}",
            big_buffers.len()
        ),
    )
}

fn gradients() -> Outcome {
    let mut rng = Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    for _ in 0..50 {
        for c in common::check_spp_instance(&mut rng)
            .into_iter()
            .chain(common::check_lora_instance(&mut rng))
        {
            if c.err > worst {
                worst = c.err;
                worst_name = c.name;
            }
        }
    }
    outcome(
        worst <= common::FD_TOL,
        format!("50 SPP + 50 LoRA instances, worst rel err {worst:.2e} ({worst_name})"),
    )
}

fn init_transparency() -> Outcome {
    let mut rng = Rng::seed_from_u64(5);
    let mut transparent = true;
    for _ in 0..20 {
        let (m, n) = (8, 8);
        let layer = common::random_pruned(&mut rng, m, n, SparsityPattern::two_four());
        let ad = SppAdapter::init(m, n, 4, 1.0, 0.05, &mut rng).unwrap();
        let x = rng.uniform_matrix(-1.0, 1.0, 3, n).unwrap();
        let base = x.matmul(layer.weight()).unwrap();
        for training in [true, false] {
            let (y, _) = ad
                .forward_optimized(&x, &layer, &mut rng, training)
                .unwrap();
            let (y2, _) = ad.forward_naive(&x, &layer, &mut rng, training).unwrap();
            transparent &= y == base && y2 == base;
        }
    }

    WARNINGS.lock().unwrap().clear();
    let layer = common::random_pruned(&mut rng, 8, 8, SparsityPattern::two_four());
    let ad = SppAdapter::init_with(SppInit::BothZero, 8, 8, 4, 1.0, 0.0, &mut rng).unwrap();
    let warned = WARNINGS
        .lock()
        .unwrap()
        .iter()
        .any(|w| w.contains("both factors zero"));
    let x = rng.uniform_matrix(-1.0, 1.0, 3, 8).unwrap();
    let (_, cache) = ad.forward_optimized(&x, &layer, &mut rng, true).unwrap();
    let grads = ad.backward(&layer, &cache, &Matrix::ones(3, 8)).unwrap();
    let alpha_dead = grads.d_alpha.nnz() == 0;
    outcome(
        transparent && warned && alpha_dead,
        format!("init forward == base: {transparent}; both-zero d_alpha == 0: {alpha_dead}; warning: {warned}"),
    )
}

fn recovery() -> Outcome {
    let mut all_better = true;
    let mut all_verified = true;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let ts = make_teacher_student(seed, 64, 64, SparsityPattern::two_four(), 2048).unwrap();
        let baseline = ts.student.loss_on(&ts.eval).unwrap();
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };

        let mut spp = ts.student.clone();
        spp.attach_spp(8, 1.0, 0.05, &mut Rng::seed_from_u64(seed))
            .unwrap();
        let (spp, _) = train(&spp, &ts.train, Some(&ts.eval), &cfg).unwrap();
        let merged = spp.merged(false).unwrap();
        let spp_loss = merged.loss_on(&ts.eval).unwrap();
        all_verified &= merged.verify().iter().all(|(_, r)| r.passed());
        all_better &= spp_loss < baseline;

        let mut lora = ts.student.clone();
        lora.attach_lora(8, 1.0, 0.05, &mut Rng::seed_from_u64(seed))
            .unwrap();
        let (lora, _) = train(&lora, &ts.train, Some(&ts.eval), &cfg).unwrap();
        let lora_star = lora.merged(true).unwrap().loss_on(&ts.eval).unwrap();
        let order = if lora_star >= spp_loss { ">=" } else { "<" };
        rows.push(format!(
            "seed {seed}: pruned {baseline:.5} spp {spp_loss:.5} lora* {lora_star:.5} (lora* {order} spp)"
        ));
    }
    for r in &rows {
        println!("    {r}");
    }
    outcome(
        all_better && all_verified,
        format!("spp < pruned on all seeds: {all_better}; merged verify: {all_verified}; lora* ordering reported only"),
    )
}

fn densification() -> Outcome {
    let mut rng = Rng::seed_from_u64(77);
    let patterns = common::patterns();
    let (mut lora_dense, mut spp_kept) = (0, 0);
    for _ in 0..100 {
        let m = 8 * (1 + rng.below(4));
        let n = 8 * (1 + rng.below(4));
        let pattern = patterns[rng.below(patterns.len())];
        let layer = common::random_pruned(&mut rng, m, n, pattern);
        let r_spp = [1, 2, 4, 8][rng.below(4)];
        let budget = m + r_spp * n;
        let r_lora = ((budget as f64 / (m + n) as f64).round() as usize).max(1);
        let spp = common::random_spp(&mut rng, m, n, r_spp, 0.0);
        let lora = common::random_lora(&mut rng, m, n, r_lora, 0.0);
        let nnz = layer.weight().nnz();
        if lora.merge_dense(&layer).unwrap().nnz() > nnz {
            lora_dense += 1;
        }
        if spp.merge(&layer).unwrap().weight().nnz() == nnz {
            spp_kept += 1;
        }
    }
    outcome(
        lora_dense == 100 && spp_kept == 100,
        format!("lora merge densified {lora_dense}/100, spp merge kept nnz {spp_kept}/100"),
    )
}

fn run_pipeline(dir: &std::path::Path, tag: &str) -> (Vec<u8>, String) {
    let ts = make_teacher_student(11, 32, 32, SparsityPattern::two_four(), 512).unwrap();
    let mut net = ts.student.clone();
    net.attach_spp(4, 1.0, 0.05, &mut Rng::seed_from_u64(11))
        .unwrap();
    let cfg = TrainConfig {
        steps: 120,
        seed: 11,
        ..TrainConfig::default()
    };
    let (trained, record) = train(&net, &ts.train, Some(&ts.eval), &cfg).unwrap();
    let path = dir.join(format!("{tag}.sppt"));
    net_to_store(&trained).unwrap().write(&path).unwrap();
    (std::fs::read(&path).unwrap(), record.to_csv())
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt_a, csv_a) = run_pipeline(dir.path(), "a");
    let (ckpt_b, csv_b) = run_pipeline(dir.path(), "b");
    let same = ckpt_a == ckpt_b && csv_a == csv_b;

    let golden: Vec<u64> = include_str!("data/rng_seed42.txt")
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    let mut rng = Rng::seed_from_u64(42);
    let ours: Vec<u64> = (0..golden.len()).map(|_| rng.next_u64()).collect();
    let mut reference = {
        use rand_core::{RngCore, SeedableRng};
        let mut r = rand_xoshiro::Xoshiro256StarStar::seed_from_u64(42);
        move || r.next_u64()
    };
    let independent: Vec<u64> = (0..golden.len()).map(|_| reference()).collect();
    let golden_ok = golden.len() == 16 && ours == golden && independent == golden;
    outcome(
        same && golden_ok,
        format!(
            "checkpoint {} bytes identical: {}; run.csv identical: {}; seed-42 golden vector: {golden_ok}",
            ckpt_a.len(),
            ckpt_a == ckpt_b,
            csv_a == csv_b
        ),
    )
}

fn main() {
    log::set_logger(&LOGGER).expect("logger installed once");
    log::set_max_level(log::LevelFilter::Warn);

    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("parameter count (7B/13B, r=16)", table1, None),
        (
            "sparsity preservation",
            sparsity_preservation,
            Some(Duration::from_secs(10)),
        ),
        (
            "optimized vs naive forward",
            oracle_equivalence,
            Some(Duration::from_secs(5)),
        ),
        (
            "gradient correctness",
            gradients,
            Some(Duration::from_secs(10)),
        ),
        (
            "init transparency and degenerate-init warning",
            init_transparency,
            None,
        ),
        (
            "recovery experiment",
            recovery,
            Some(Duration::from_secs(60)),
        ),
        ("densification contrast", densification, None),
        ("bit-reproducibility", reproducibility, None),
    ];

    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "criterion {} {}: {} ({}; {:.2}s{budget})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            out.detail,
            took.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
