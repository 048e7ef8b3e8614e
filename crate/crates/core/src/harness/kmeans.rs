//! Deterministic k-means: k-means++ seeding followed by Lloyd iterations,
//! accelerated with Hamerly's distance bounds.
//!
//! The bounds only skip distance computations whose outcome is already
//! known, so the iterates are those of plain Lloyd (up to exact ties).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::samples::Samples;
use crate::codebook::EuclideanCodebook;
use crate::error::{Error, Result};
use crate::geometry::squared_distance as sq_dist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: EuclideanCodebook,
    pub iterations: usize,
    pub converged: bool,
}

/// Codebook trained from scratch on `samples` with default options.
pub fn train_dedicated_kb(samples: &Samples, k: usize, seed: u64) -> Result<EuclideanCodebook> {
    Ok(kmeans(samples, k, seed, KMeansOptions::default())?.codebook)
}

pub fn kmeans(samples: &Samples, k: usize, seed: u64, opts: KMeansOptions) -> Result<KMeansFit> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "{n} samples cannot support {k} clusters"
        )));
    }
    let dim = samples.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(samples, k, &mut rng);
    let mut state = Bounds::full_scan(samples, &centers, k);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let new_centers = recompute_centers(samples, &centers, &state, k);
        let shifts: Vec<f64> = centers
            .chunks_exact(dim)
            .zip(new_centers.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .collect();
        centers = new_centers;
        if shifts.iter().all(|&s| s <= opts.tolerance) {
            converged = true;
            break;
        }
        state.reassign(samples, &centers, &shifts, k);
    }

    Ok(KMeansFit {
        codebook: EuclideanCodebook::new(dim, centers)?,
        iterations,
        converged,
    })
}

/// D² seeding. Returns `k` centers, row-major.
fn plus_plus_init(samples: &Samples, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len();
    let dim = samples.dim();
    let mut centers = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.extend_from_slice(samples.row(first));
    let mut d2: Vec<f64> = samples
        .as_flat()
        .par_chunks_exact(dim)
        .map(|x| sq_dist(x, samples.row(first)))
        .collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = 0;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    last_positive = i;
                    acc += d;
                    if acc > target {
                        pick = Some(i);
                        break;
                    }
                }
            }
            pick.unwrap_or(last_positive)
        } else {
            // Every sample coincides with a center already.
            chosen.iter().position(|&c| !c).expect("n >= k")
        };
        chosen[pick] = true;
        let c = samples.row(pick).to_vec();
        d2.par_iter_mut()
            .zip(samples.as_flat().par_chunks_exact(dim))
            .for_each(|(d, x)| *d = d.min(sq_dist(x, &c)));
        centers.extend(c);
    }
    centers
}

/// Per-point assignment with Hamerly's upper/lower distance bounds.
struct Bounds {
    assign: Vec<u32>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

/// Nearest and second-nearest distances, smallest index on ties.
fn scan(x: &[f64], centers: &[f64], dim: usize) -> (u32, f64, f64) {
    let mut best = (0u32, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            second = best.1;
            best = (j as u32, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1.sqrt(), second.sqrt())
}

impl Bounds {
    fn full_scan(samples: &Samples, centers: &[f64], _k: usize) -> Self {
        let dim = samples.dim();
        let scanned: Vec<(u32, f64, f64)> = samples
            .as_flat()
            .par_chunks_exact(dim)
            .map(|x| scan(x, centers, dim))
            .collect();
        let mut b = Bounds {
            assign: Vec::with_capacity(scanned.len()),
            upper: Vec::with_capacity(scanned.len()),
            lower: Vec::with_capacity(scanned.len()),
        };
        for (a, u, l) in scanned {
            b.assign.push(a);
            b.upper.push(u);
            b.lower.push(l);
        }
        b
    }

    fn reassign(&mut self, samples: &Samples, centers: &[f64], shifts: &[f64], k: usize) {
        let dim = samples.dim();
        let (mut top, mut top_idx, mut runner_up) = (0.0f64, usize::MAX, 0.0f64);
        for (j, &s) in shifts.iter().enumerate() {
            if s > top {
                runner_up = top;
                top = s;
                top_idx = j;
            } else if s > runner_up {
                runner_up = s;
            }
        }
        // Half the distance from each center to its nearest other center.
        let half_gap: Vec<f64> = (0..k)
            .into_par_iter()
            .map(|a| {
                let ca = &centers[a * dim..(a + 1) * dim];
                let mut m = f64::INFINITY;
                for (b, cb) in centers.chunks_exact(dim).enumerate() {
                    if b != a {
                        m = m.min(sq_dist(ca, cb));
                    }
                }
                0.5 * m.sqrt()
            })
            .collect();

        self.assign
            .par_iter_mut()
            .zip(self.upper.par_iter_mut())
            .zip(self.lower.par_iter_mut())
            .zip(samples.as_flat().par_chunks_exact(dim))
            .for_each(|(((a, u), l), x)| {
                let cur = *a as usize;
                *u += shifts[cur];
                *l -= if cur == top_idx { runner_up } else { top };
                let bound = half_gap[cur].max(*l);
                if *u <= bound {
                    return;
                }
                *u = sq_dist(x, &centers[cur * dim..(cur + 1) * dim]).sqrt();
                if *u <= bound {
                    return;
                }
                let (na, nu, nl) = scan(x, centers, dim);
                *a = na;
                *u = nu;
                *l = nl;
            });
    }
}

/// Cluster means. An empty cluster is moved onto the sample that is farthest
/// from its own center (largest upper bound, smallest index on ties), each
/// such sample used at most once.
fn recompute_centers(samples: &Samples, old: &[f64], state: &Bounds, k: usize) -> Vec<f64> {
    let dim = samples.dim();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &a) in samples.rows().zip(&state.assign) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    let mut donors = Vec::new();
    if !empty.is_empty() {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&i, &j| state.upper[j].total_cmp(&state.upper[i]).then(i.cmp(&j)));
        donors = order;
    }
    let mut out = old.to_vec();
    let mut donor_iter = donors.into_iter();
    for j in 0..k {
        let dst = &mut out[j * dim..(j + 1) * dim];
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for (d, s) in dst.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                *d = s * inv;
            }
        } else if let Some(i) = donor_iter.next() {
            dst.copy_from_slice(samples.row(i));
        }
    }
    out
}
