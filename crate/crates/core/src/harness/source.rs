//! Synthetic feature sources standing in for encoder outputs.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::samples::Samples;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    GaussianMixture,
    HierarchicalGaussian,
}

/// Isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: Vec<f64>,
    pub scale: f64,
    pub weight: f64,
}

/// Two-level hierarchy: a few broad parent clusters whose means sit on a
/// sphere around the origin, each fanning out into narrow children. Child
/// means are displaced from their parent orthogonally to the parent's
/// direction, so every child lies strictly farther from the origin than its
/// parent while the parent stays the expected mean of its children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyParams {
    pub parents: usize,
    pub children_per_parent: usize,
    /// Norm of every parent mean.
    pub parent_radius: f64,
    /// Per-coordinate standard deviation of child means around their parent,
    /// before the radial part is removed.
    pub child_spread: f64,
    /// Per-coordinate standard deviation of samples around a child mean.
    pub leaf_scale: f64,
    /// Per-coordinate standard deviation of samples around a parent mean.
    pub parent_scale: f64,
    /// Share of samples drawn from the parent components directly.
    pub parent_weight: f64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            parents: 8,
            children_per_parent: 16,
            parent_radius: 0.5,
            child_spread: 0.15,
            leaf_scale: 0.03,
            parent_scale: 0.15,
            parent_weight: 0.2,
        }
    }
}

/// Flat mixture of equally weighted components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureParams {
    pub components: usize,
    pub spread: f64,
    pub scale: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            components: 64,
            spread: 0.5,
            scale: 0.05,
        }
    }
}

/// A fully specified synthetic distribution. Component means are drawn once
/// from `seed`; the same parameters and seed always give the same source.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    kind: SourceKind,
    dim: usize,
    seed: u64,
    components: Vec<Component>,
    weights: WeightedIndex<f64>,
}

fn gaussian_vec(rng: &mut impl Rng, center: &[f64], scale: f64) -> Vec<f64> {
    center
        .iter()
        .map(|&c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

impl SyntheticSource {
    pub fn hierarchical(dim: usize, params: HierarchyParams, seed: u64) -> Result<Self> {
        if dim == 0 || params.parents == 0 || params.children_per_parent == 0 {
            return Err(Error::invalid(
                "dim, parents and children_per_parent must be >= 1",
            ));
        }
        check_scale("parent_radius", params.parent_radius)?;
        check_scale("child_spread", params.child_spread)?;
        check_scale("leaf_scale", params.leaf_scale)?;
        check_scale("parent_scale", params.parent_scale)?;
        if !(0.0..1.0).contains(&params.parent_weight) {
            return Err(Error::invalid("parent_weight must lie in [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = vec![0.0; dim];
        let child_weight =
            (1.0 - params.parent_weight) / (params.parents * params.children_per_parent) as f64;
        let mut components = Vec::with_capacity(params.parents * (params.children_per_parent + 1));
        for _ in 0..params.parents {
            let direction = gaussian_vec(&mut rng, &origin, 1.0);
            let n = crate::geometry::norm(&direction).max(f64::MIN_POSITIVE);
            let parent: Vec<f64> = direction
                .iter()
                .map(|x| x * params.parent_radius / n)
                .collect();
            let unit: Vec<f64> = direction.iter().map(|x| x / n).collect();
            for _ in 0..params.children_per_parent {
                let mut offset = gaussian_vec(&mut rng, &origin, params.child_spread);
                let radial: f64 = offset.iter().zip(&unit).map(|(a, b)| a * b).sum();
                for (o, u) in offset.iter_mut().zip(&unit) {
                    *o -= radial * u;
                }
                components.push(Component {
                    mean: parent.iter().zip(&offset).map(|(a, b)| a + b).collect(),
                    scale: params.leaf_scale,
                    weight: child_weight,
                });
            }
            if params.parent_weight > 0.0 {
                components.push(Component {
                    mean: parent,
                    scale: params.parent_scale,
                    weight: params.parent_weight / params.parents as f64,
                });
            }
        }
        Self::from_components(SourceKind::HierarchicalGaussian, dim, seed, components)
    }

    pub fn gaussian_mixture(dim: usize, params: MixtureParams, seed: u64) -> Result<Self> {
        if dim == 0 || params.components == 0 {
            return Err(Error::invalid("dim and components must be >= 1"));
        }
        check_scale("spread", params.spread)?;
        check_scale("scale", params.scale)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = vec![0.0; dim];
        let components = (0..params.components)
            .map(|_| Component {
                mean: gaussian_vec(&mut rng, &origin, params.spread),
                scale: params.scale,
                weight: 1.0,
            })
            .collect();
        Self::from_components(SourceKind::GaussianMixture, dim, seed, components)
    }

    pub fn from_components(
        kind: SourceKind,
        dim: usize,
        seed: u64,
        components: Vec<Component>,
    ) -> Result<Self> {
        if components.iter().any(|c| c.mean.len() != dim) {
            return Err(Error::invalid("component mean has the wrong dimension"));
        }
        let weights = WeightedIndex::new(components.iter().map(|c| c.weight))
            .map_err(|e| Error::invalid(format!("component weights: {e}")))?;
        Ok(Self {
            kind,
            dim,
            seed,
            components,
            weights,
        })
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Samples {
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let c = &self.components[self.weights.sample(rng)];
            data.extend(gaussian_vec(rng, &c.mean, c.scale));
        }
        Samples::new(self.dim, data).expect("generated samples are finite")
    }
}
