//! Teacher–student recovery: pruned baseline vs SPP vs LoRA (re-pruned).
use spp_core::numerics::Rng;
use spp_core::pruning::SparsityPattern;
use spp_core::training::{make_teacher_student, train, TrainConfig};

fn main() -> spp_core::Result<()> {
    let r = 8;
    println!("seed  pruned      spp         lora*");
    for seed in 0..5u64 {
        let ts = make_teacher_student(seed, 64, 64, SparsityPattern::two_four(), 2048)?;
        let baseline = ts.student.loss_on(&ts.eval)?;
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };

        let mut spp = ts.student.clone();
        spp.attach_spp(r, 1.0, 0.05, &mut Rng::seed_from_u64(seed))?;
        let (spp, _) = train(&spp, &ts.train, Some(&ts.eval), &cfg)?;
        let spp_loss = spp.merged(false)?.loss_on(&ts.eval)?;

        let mut lora = ts.student.clone();
        lora.attach_lora(r, 1.0, 0.05, &mut Rng::seed_from_u64(seed))?;
        let (lora, _) = train(&lora, &ts.train, Some(&ts.eval), &cfg)?;
        let lora_loss = lora.merged(true)?.loss_on(&ts.eval)?;

        println!("{seed:<5} {baseline:<11.6} {spp_loss:<11.6} {lora_loss:<11.6}");
    }
    Ok(())
}
