//! Writing a model with adapters to a tensor store and reading it back.
use spp_core::checkpoint::{load_net, save_net};
use spp_core::numerics::{Rng, TensorStore};
use spp_core::pruning::SparsityPattern;
use spp_core::training::make_teacher_student;

fn main() -> spp_core::Result<()> {
    let ts = make_teacher_student(4, 16, 32, SparsityPattern::two_four(), 64)?;
    let mut net = ts.student;
    net.attach_spp(4, 1.0, 0.05, &mut Rng::seed_from_u64(4))?;

    let dir = tempfile::tempdir().map_err(|e| spp_core::SppError::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let path = dir.path().join("model.sppt");
    save_net(&net, &path)?;

    let store = TensorStore::read(&path)?;
    for t in store.tensors() {
        println!("{:<14} {:?} dims={:?}", t.name, t.dtype, t.dims);
    }
    println!("__meta__: {}", store.json::<serde_json::Value>("__meta__")?);

    let back = load_net(&path)?;
    println!("round trip equal: {}", back == net);
    Ok(())
}
