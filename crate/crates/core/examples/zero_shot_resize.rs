// Train one parent codebook, rank it once, and cut children of every size
// from the ranking without retraining.
//
// Run with `cargo run --release --example zero_shot_resize`.

use kb_resize::harness::{evaluate_mse, train_dedicated_kb, HierarchyParams, SyntheticSource};
use kb_resize::{bits_per_index, compute_ranking, resize, verify_ranking};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> kb_resize::Result<()> {
    let source = SyntheticSource::hierarchical(8, HierarchyParams::default(), 7)?;
    let train = source.sample(4000, &mut ChaCha8Rng::seed_from_u64(1));
    let test = source.sample(1000, &mut ChaCha8Rng::seed_from_u64(2));

    let parent = train_dedicated_kb(&train, 256, 3)?;
    let ranking = compute_ranking(&parent)?;
    assert!(verify_ranking(&parent, &ranking).passed());
    println!(
        "parent K={} fingerprint {}",
        parent.size(),
        &ranking.parent_fingerprint[..16]
    );

    println!("{:>5} {:>5} {:>12}", "K", "bits", "test MSE");
    for k in [4, 8, 16, 32, 64, 128, 256] {
        let child = resize(&parent, &ranking, k)?;
        println!(
            "{k:>5} {:>5} {:>12.6}",
            bits_per_index(k as u64)?,
            evaluate_mse(&child, &test)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kb_resize::Result<()> {
    run_example()
}
