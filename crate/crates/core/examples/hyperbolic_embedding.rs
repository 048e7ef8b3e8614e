// Lift codebook vectors into the Poincaré ball and measure them there.
//
// Run with `cargo run --example hyperbolic_embedding`.

use kb_resize::geometry::distance_from_origin;
use kb_resize::{exp_map, hyperbolic_distance, log_map};

pub fn run_example() -> kb_resize::Result<()> {
    let vectors: [&[f64]; 4] = [&[0.0, 0.0], &[0.5, 0.0], &[0.0, 1.5], &[3.0, 4.0]];
    let points = vectors
        .iter()
        .map(|v| exp_map(v))
        .collect::<kb_resize::Result<Vec<_>>>()?;

    println!(
        "{:>14} {:>10} {:>12} {:>12}",
        "vector", "ball norm", "from origin", "round trip"
    );
    for (v, p) in vectors.iter().zip(&points) {
        let back = log_map(p);
        let err = v
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "{:>14} {:>10.6} {:>12.6} {:>12.1e}",
            format!("{v:?}"),
            p.norm(),
            distance_from_origin(p),
            err
        );
    }

    println!("\npairwise hyperbolic distances");
    for (i, p) in points.iter().enumerate() {
        let row = points
            .iter()
            .map(|q| hyperbolic_distance(p, q).map(|d| format!("{d:8.4}")))
            .collect::<kb_resize::Result<Vec<_>>>()?;
        println!("{i}: {}", row.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kb_resize::Result<()> {
    run_example()
}
