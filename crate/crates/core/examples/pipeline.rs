//! prune -> attach -> train -> merge -> verify, in process.
use spp_core::numerics::Rng;
use spp_core::pruning::SparsityPattern;
use spp_core::training::{make_teacher_student, train, Optimizer, TrainConfig, TrainMode};

fn main() -> spp_core::Result<()> {
    let ts = make_teacher_student(0, 64, 64, SparsityPattern::two_four(), 2048)?;
    println!(
        "pruned student eval loss: {:.5}",
        ts.student.loss_on(&ts.eval)?
    );

    let mut net = ts.student.clone();
    net.attach_spp(8, 1.0, 0.05, &mut Rng::seed_from_u64(0))?;
    let (trained, record) = train(&net, &ts.train, Some(&ts.eval), &TrainConfig::default())?;
    for s in record.steps().iter().step_by(100) {
        println!("step {:>3} lr {:.2e} loss {:.5}", s.step, s.lr, s.loss);
    }
    println!("{}", record.summary_json()?);

    let merged = trained.merged(false)?;
    for (name, report) in merged.verify() {
        println!("{name}: {report}");
    }
    println!("merged eval loss: {:.5}", merged.loss_on(&ts.eval)?);

    // the fixed-mask baseline updates surviving weights directly
    let cfg = TrainConfig {
        mode: TrainMode::FixedMask,
        optimizer: Optimizer::Sgd,
        lr: 0.05,
        ..TrainConfig::default()
    };
    let (baseline, _) = train(&ts.student, &ts.train, Some(&ts.eval), &cfg)?;
    println!(
        "fixed-mask retraining eval loss: {:.5}",
        baseline.loss_on(&ts.eval)?
    );
    Ok(())
}
