//! Rate–distortion sweep comparing zero-shot children against codebooks
//! trained from scratch and random subsets of the parent.

pub mod config;
pub mod kmeans;
pub mod samples;
pub mod source;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codebook::EuclideanCodebook;
use crate::codec::{bits_per_index, nearest};
use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::ranking::{compute_ranking, resize};

pub use config::{EvalConfig, OutputConfig, SourceConfig, SweepConfig};
pub use kmeans::{kmeans, train_dedicated_kb, KMeansFit, KMeansOptions};
pub use samples::Samples;
pub use source::{Component, HierarchyParams, MixtureParams, SourceKind, SyntheticSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    ZeroShot,
    Dedicated,
    RandomSubset,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ZeroShot, Method::Dedicated, Method::RandomSubset];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroShot => "zero-shot",
            Method::Dedicated => "dedicated",
            Method::RandomSubset => "random-subset",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub method: Method,
    pub kb_size: usize,
    pub bits_per_index: u8,
    pub mse: f64,
}

/// SplitMix64 finalizer over a (seed, purpose, size) triple.
pub fn derive_seed(seed: u64, purpose: u64, size: u64) -> u64 {
    let mut z = seed
        ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ size.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const KMEANS_STREAM: u64 = 3;
const SUBSET_STREAM: u64 = 4;

/// Uniform `k`-subset of the parent without replacement, in draw order.
pub fn random_subset_kb(
    parent: &EuclideanCodebook,
    k: usize,
    seed: u64,
) -> Result<EuclideanCodebook> {
    let n = parent.size();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("subset size {k} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, n, k).into_vec();
    parent.select(&picks)
}

/// Mean over `test` of the squared distance to the nearest codebook vector.
pub fn evaluate_mse(kb: &EuclideanCodebook, test: &Samples) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if test.dim() != kb.dim() {
        return Err(Error::invalid(format!(
            "test dim {} does not match codebook dim {}",
            test.dim(),
            kb.dim()
        )));
    }
    let per_vector: Vec<f64> = test
        .as_flat()
        .par_chunks_exact(test.dim())
        .map(|x| nearest(kb, x).1)
        .collect();
    Ok(per_vector.iter().sum::<f64>() / test.len() as f64)
}

/// Runs every (seed, size, method) cell. Records come back sorted by seed,
/// then size, then method.
pub fn run_sweep(source: &SyntheticSource, sweep: &SweepConfig) -> Result<Vec<EvalRecord>> {
    sweep.validate()?;
    let per_seed: Vec<Vec<EvalRecord>> = sweep
        .seeds
        .par_iter()
        .map(|&seed| run_seed(source, sweep, seed))
        .collect::<Result<_>>()?;
    let mut records: Vec<EvalRecord> = per_seed.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.seed, r.kb_size, r.method));
    Ok(records)
}

fn run_seed(source: &SyntheticSource, sweep: &SweepConfig, seed: u64) -> Result<Vec<EvalRecord>> {
    let train = source.sample(
        sweep.n_train,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, TRAIN_STREAM, 0)),
    );
    let test = source.sample(
        sweep.n_test,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, TEST_STREAM, 0)),
    );
    let kmeans_seed = |k: usize| derive_seed(seed, KMEANS_STREAM, k as u64);
    let parent = train_dedicated_kb(&train, sweep.parent_size, kmeans_seed(sweep.parent_size))?;
    let ranking = compute_ranking(&parent)?;

    let mut records = Vec::with_capacity(3 * sweep.child_sizes.len());
    for &k in &sweep.child_sizes {
        let bits = bits_per_index(k as u64)?;
        let zero_shot = resize(&parent, &ranking, k)?;
        // Same data and seed as the parent, so the parent is its own dedicated KB.
        let dedicated = if k == sweep.parent_size {
            parent.clone()
        } else {
            train_dedicated_kb(&train, k, kmeans_seed(k))?
        };
        let random = random_subset_kb(&parent, k, derive_seed(seed, SUBSET_STREAM, k as u64))?;
        for (method, kb) in [
            (Method::ZeroShot, &zero_shot),
            (Method::Dedicated, &dedicated),
            (Method::RandomSubset, &random),
        ] {
            records.push(EvalRecord {
                seed,
                method,
                kb_size: k,
                bits_per_index: bits,
                mse: evaluate_mse(kb, &test)?,
            });
        }
    }
    Ok(records)
}

/// Per-(method, size) aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub kb_size: usize,
    pub bits_per_index: u8,
    pub runs: usize,
    pub mean_mse: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_mse: f64,
    /// `mean_mse` divided by the dedicated mean at the same size.
    pub ratio_to_dedicated: Option<f64>,
}

pub fn summarize(records: &[EvalRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, Method), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.kb_size, r.method)).or_default().push(r);
    }
    let means: BTreeMap<(usize, Method), f64> = groups
        .iter()
        .map(|(key, rs)| {
            (
                *key,
                rs.iter().map(|r| r.mse).sum::<f64>() / rs.len() as f64,
            )
        })
        .collect();
    groups
        .iter()
        .map(|(&(kb_size, method), rs)| {
            let mean = means[&(kb_size, method)];
            let std = if rs.len() > 1 {
                let ss: f64 = rs.iter().map(|r| (r.mse - mean).powi(2)).sum();
                (ss / (rs.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method,
                kb_size,
                bits_per_index: rs[0].bits_per_index,
                runs: rs.len(),
                mean_mse: mean,
                std_mse: std,
                ratio_to_dedicated: means.get(&(kb_size, Method::Dedicated)).map(|d| mean / d),
            }
        })
        .collect()
}

pub fn records_csv(records: &[EvalRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "method", "K", "bits_per_index", "mse"])
        .expect("in-memory write");
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.method.to_string(),
            r.kb_size.to_string(),
            r.bits_per_index.to_string(),
            fmt_g17(r.mse),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "K",
        "bits_per_index",
        "runs",
        "mean_mse",
        "std_mse",
        "ratio_to_dedicated",
    ])
    .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.kb_size.to_string(),
            r.bits_per_index.to_string(),
            r.runs.to_string(),
            fmt_g17(r.mean_mse),
            fmt_g17(r.std_mse),
            r.ratio_to_dedicated.map(fmt_g17).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Share of (seed, size) cells with `kb_size <= max_k` where zero-shot MSE is
/// no worse than the random subset.
pub fn zero_shot_win_rate(records: &[EvalRecord], max_k: usize) -> Option<f64> {
    let mut cells: BTreeMap<(u64, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kb_size <= max_k) {
        let cell = cells.entry((r.seed, r.kb_size)).or_default();
        match r.method {
            Method::ZeroShot => cell.0 = Some(r.mse),
            Method::RandomSubset => cell.1 = Some(r.mse),
            Method::Dedicated => {}
        }
    }
    let paired: Vec<bool> = cells.values().filter_map(|c| Some(c.0? <= c.1?)).collect();
    if paired.is_empty() {
        return None;
    }
    Some(paired.iter().filter(|&&w| w).count() as f64 / paired.len() as f64)
}
