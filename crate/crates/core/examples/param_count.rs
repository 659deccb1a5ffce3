//! Trainable parameter counts for LLaMA-shaped stacks and a custom arch.
use spp_core::training::{count_trainable, ArchSpec};

fn main() -> spp_core::Result<()> {
    for arch in [ArchSpec::llama7b(), ArchSpec::llama13b()] {
        for r in [8, 16, 32] {
            let c = count_trainable(&arch, r)?;
            println!("{:<9} r={r:<3} {c}", arch.name);
        }
    }
    let custom = ArchSpec::from_json(
        r#"{"name": "mlp", "blocks": 4, "layers": [
            {"name": "up", "m": 1024, "n": 256},
            {"name": "down", "m": 256, "n": 1024}
        ]}"#,
    )?;
    println!("{:<9} r=16  {}", custom.name, count_trainable(&custom, 16)?);
    Ok(())
}
