// A small rate-distortion sweep comparing zero-shot children with
// dedicated k-means codebooks and random subsets of the parent.
//
// Run with `cargo run --release --example rate_distortion_sweep`. The
// `kbresize eval` command runs the full-size version from a TOML file.

use kb_resize::harness::{self, EvalConfig};

pub fn run_example() -> kb_resize::Result<()> {
    let cfg = EvalConfig::from_toml_str(
        r#"
        [source]
        dim = 8
        [sweep]
        parent_size = 128
        child_sizes = [4, 8, 16, 32, 64, 128]
        n_train = 3000
        n_test = 1000
        seeds = [0, 1]
        "#,
    )?;
    let source = cfg.source.build()?;
    let records = harness::run_sweep(&source, &cfg.sweep)?;
    print!("{}", harness::summary_csv(&harness::summarize(&records)));
    if let Some(rate) = harness::zero_shot_win_rate(&records, 32) {
        println!(
            "zero-shot <= random subset in {:.0}% of cells with K <= 32",
            100.0 * rate
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kb_resize::Result<()> {
    run_example()
}
