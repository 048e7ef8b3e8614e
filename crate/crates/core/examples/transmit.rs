// Send a feature grid over a simulated link: quantize against a resized
// codebook, pack the indices, unpack them at the receiver and look the
// vectors back up.
//
// Run with `cargo run --release --example transmit`.

use kb_resize::harness::{train_dedicated_kb, HierarchyParams, SyntheticSource};
use kb_resize::{
    compute_ranking, dequantize, pack, quantize, resize, unpack, FeatureGrid, Payload,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> kb_resize::Result<()> {
    let source = SyntheticSource::hierarchical(8, HierarchyParams::default(), 11)?;
    let parent = train_dedicated_kb(
        &source.sample(3000, &mut ChaCha8Rng::seed_from_u64(0)),
        128,
        0,
    )?;
    let ranking = compute_ranking(&parent)?;

    let (h, w) = (16, 16);
    let cells = source.sample(h * w, &mut ChaCha8Rng::seed_from_u64(5));
    let features = FeatureGrid::new(h, w, source.dim(), cells.as_flat().to_vec())?;

    for k in [128, 32, 5, 1] {
        let kb = resize(&parent, &ranking, k)?;
        let payload = pack(&quantize(&features, &kb)?);
        let wire = payload.to_bytes();

        let received = unpack(&Payload::from_bytes(&wire)?)?;
        let restored = dequantize(&received, &kb)?;
        println!(
            "K={k:<4} {} bits/index, {} payload bits, {} bytes on the wire, MSE {:.6}",
            payload.bits_per_index,
            payload.payload_bits(),
            wire.len(),
            features.mean_squared_error(&restored)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kb_resize::Result<()> {
    run_example()
}
