#![allow(dead_code)]

use kb_resize::EuclideanCodebook;
use rand::Rng;
use rand_distr::StandardNormal;

/// Poincaré distance straight from the textbook formula.
pub fn oracle_distance(p: &[f64], q: &[f64]) -> f64 {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let diff: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    (1.0 + 2.0 * diff / ((1.0 - sq(p)) * (1.0 - sq(q)))).acosh()
}

/// Minimum total weight over every labelled spanning tree of the complete
/// graph on `n` nodes, enumerated through Prüfer sequences.
pub fn exhaustive_min_spanning_weight(n: usize, weight: impl Fn(usize, usize) -> f64) -> f64 {
    if n == 1 {
        return 0.0;
    }
    if n == 2 {
        return weight(0, 1);
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut total = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            total += weight(leaf, s);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        total += weight(rest[0], rest[1]);
        best = best.min(total);

        let mut pos = 0;
        loop {
            if pos == len {
                return best;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// Leaf pruning simulated from scratch: scan for the leaf farthest from the
/// origin, larger index on ties, and delete it.
pub fn naive_removal_order(parent: &[Option<usize>], norms: &[f64]) -> Vec<usize> {
    let n = parent.len();
    let mut alive = vec![true; n];
    let mut order = Vec::new();
    for _ in 1..n {
        let mut best: Option<usize> = None;
        for v in 0..n {
            let is_leaf = alive[v]
                && parent[v].is_some()
                && !(0..n).any(|c| alive[c] && parent[c] == Some(v));
            if is_leaf {
                best = match best {
                    Some(b) if norms[b] > norms[v] => Some(b),
                    _ => Some(v),
                };
            }
        }
        let v = best.unwrap();
        alive[v] = false;
        order.push(v);
    }
    order
}

pub fn gaussian_rows(rng: &mut impl Rng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// A random vector with norm drawn uniformly from `[0, max_norm]`.
pub fn vector_with_norm_at_most(rng: &mut impl Rng, dim: usize, max_norm: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = rng.random_range(0.0..=max_norm);
    if n == 0.0 {
        return vec![0.0; dim];
    }
    dir.iter().map(|x| x * r / n).collect()
}

/// Codebook whose vectors survive the f32 storage round trip unchanged.
pub fn random_codebook(rng: &mut impl Rng, n: usize, dim: usize, scale: f64) -> EuclideanCodebook {
    let rows: Vec<Vec<f64>> = gaussian_rows(rng, n, dim, scale)
        .into_iter()
        .map(|r| r.into_iter().map(|x| x as f32 as f64).collect())
        .collect();
    EuclideanCodebook::from_rows(&rows).unwrap()
}
