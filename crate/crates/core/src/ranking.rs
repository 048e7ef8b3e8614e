//! Zero-shot resizing: one importance ranking per parent codebook, then
//! children of any size read straight off its prefix.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::EuclideanCodebook;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::geometry::{exp_map, log_map, PoincarePointSet};
use crate::tree::{build_mst, compute_removal_order, RemovalOrder, ReplayError, SemanticTree};

pub const KBR_VERSION: u32 = 1;

/// Parent indices ordered from most to least important.
///
/// The first `K` entries are exactly the nodes that survive pruning the
/// semantic tree down to `K` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceRanking {
    pub parent_fingerprint: String,
    pub survival_order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbrDocument {
    version: u32,
    parent_fingerprint: String,
    root: usize,
    survival_order: Vec<usize>,
}

impl ImportanceRanking {
    pub fn root(&self) -> usize {
        self.survival_order[0]
    }

    pub fn len(&self) -> usize {
        self.survival_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.survival_order.is_empty()
    }

    /// The leaf-removal sequence this ranking encodes.
    pub fn removal_order(&self) -> RemovalOrder {
        RemovalOrder {
            sequence: self.survival_order[1..].iter().rev().copied().collect(),
            root: self.root(),
        }
    }

    /// `KBR` text: a pretty-printed JSON object.
    pub fn to_kbr_string(&self) -> String {
        let doc = KbrDocument {
            version: KBR_VERSION,
            parent_fingerprint: self.parent_fingerprint.clone(),
            root: self.root(),
            survival_order: self.survival_order.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_kbr_str(text: &str) -> Result<Self> {
        let doc: KbrDocument = serde_json::from_str(text).map_err(|e| Error::Decode {
            offset: 0,
            message: format!("malformed ranking document: {e}"),
        })?;
        if doc.version != KBR_VERSION {
            return Err(Error::decode(
                0,
                format!("unsupported ranking version {}", doc.version),
            ));
        }
        let fp = &doc.parent_fingerprint;
        if fp.len() != 64
            || !fp
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(Error::decode(
                0,
                "parent_fingerprint must be 64 lowercase hex digits",
            ));
        }
        match doc.survival_order.first() {
            None => return Err(Error::decode(0, "survival_order is empty")),
            Some(&r) if r != doc.root => {
                return Err(Error::decode(
                    0,
                    format!("root {} does not lead survival_order (found {r})", doc.root),
                ))
            }
            _ => {}
        }
        Ok(Self {
            parent_fingerprint: doc.parent_fingerprint,
            survival_order: doc.survival_order,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_kbr_string().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kbr_str(&fs::read_to_string(path)?)
    }
}

/// Embeds the parent codebook and builds its master semantic tree.
pub fn build_semantic_tree(parent: &EuclideanCodebook) -> Result<(PoincarePointSet, SemanticTree)> {
    let points = PoincarePointSet::embed(parent.dim(), parent.as_flat())?;
    let tree = build_mst(&points)?;
    Ok((points, tree))
}

pub fn compute_ranking(parent: &EuclideanCodebook) -> Result<ImportanceRanking> {
    let (points, tree) = build_semantic_tree(parent)?;
    let order = compute_removal_order(&tree, &points)?;
    let mut survival_order = Vec::with_capacity(parent.size());
    survival_order.push(order.root);
    survival_order.extend(order.sequence.iter().rev());
    Ok(ImportanceRanking {
        parent_fingerprint: parent.fingerprint(),
        survival_order,
    })
}

/// Child codebook of size `k`: the `k` most important parent vectors, passed
/// through the exponential and logarithmic maps, most important first.
///
/// No tree or distance work happens here.
pub fn resize(
    parent: &EuclideanCodebook,
    ranking: &ImportanceRanking,
    k: usize,
) -> Result<EuclideanCodebook> {
    let found = parent.fingerprint();
    if found != ranking.parent_fingerprint {
        return Err(Error::StaleRanking {
            expected: ranking.parent_fingerprint.clone(),
            found,
        });
    }
    let n = parent.size();
    if ranking.len() != n {
        return Err(Error::invalid(format!(
            "ranking covers {} vectors, parent has {n}",
            ranking.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("target size {k} outside 1..={n}")));
    }
    let mut data = Vec::with_capacity(k * parent.dim());
    for &i in &ranking.survival_order[..k] {
        if i >= n {
            return Err(Error::invalid(format!("ranking index {i} out of range")));
        }
        data.extend(log_map(&exp_map(parent.vector(i))?));
    }
    EuclideanCodebook::new(parent.dim(), data)
}

/// First problem found by [`verify_ranking`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankingViolation {
    Fingerprint { expected: String, found: String },
    Length { expected: usize, found: usize },
    NotPermutation { position: usize, index: usize },
    RootMismatch { expected: usize, found: usize },
    Replay(ReplayError),
}

impl fmt::Display for RankingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fingerprint { expected, found } => {
                write!(
                    f,
                    "fingerprint mismatch: ranking has {expected}, parent is {found}"
                )
            }
            Self::Length { expected, found } => {
                write!(
                    f,
                    "ranking has {found} entries, parent has {expected} vectors"
                )
            }
            Self::NotPermutation { position, index } => {
                write!(
                    f,
                    "entry {index} at position {position} is out of range or repeated"
                )
            }
            Self::RootMismatch { expected, found } => {
                write!(f, "ranking root {found} differs from tree root {expected}")
            }
            Self::Replay(ReplayError::NotALeaf { step, node }) => {
                write!(f, "removal step {step}: node {node} is not a leaf")
            }
            Self::Replay(e) => write!(f, "removal replay failed: {e:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingReport {
    pub violation: Option<RankingViolation>,
}

impl RankingReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks fingerprint, permutation validity and that the encoded removal
/// order only ever removes leaves of the parent's semantic tree. Rebuilds the
/// tree, so this costs as much as [`compute_ranking`].
pub fn verify_ranking(parent: &EuclideanCodebook, ranking: &ImportanceRanking) -> RankingReport {
    RankingReport {
        violation: find_violation(parent, ranking),
    }
}

fn find_violation(
    parent: &EuclideanCodebook,
    ranking: &ImportanceRanking,
) -> Option<RankingViolation> {
    let found = parent.fingerprint();
    if found != ranking.parent_fingerprint {
        return Some(RankingViolation::Fingerprint {
            expected: ranking.parent_fingerprint.clone(),
            found,
        });
    }
    let n = parent.size();
    if ranking.len() != n {
        return Some(RankingViolation::Length {
            expected: n,
            found: ranking.len(),
        });
    }
    let mut seen = vec![false; n];
    for (position, &index) in ranking.survival_order.iter().enumerate() {
        if index >= n || std::mem::replace(&mut seen[index], true) {
            return Some(RankingViolation::NotPermutation { position, index });
        }
    }
    let tree = match build_semantic_tree(parent) {
        Ok((_, tree)) => tree,
        Err(_) => unreachable!("a valid codebook always embeds"),
    };
    if tree.root() != ranking.root() {
        return Some(RankingViolation::RootMismatch {
            expected: tree.root(),
            found: ranking.root(),
        });
    }
    ranking
        .removal_order()
        .replay(&tree)
        .err()
        .map(RankingViolation::Replay)
}
