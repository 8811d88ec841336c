//! Desk-scale synthetic corpora: per-category Gaussian mixtures quantized to
//! a grid (so exact duplicates can occur) with controlled cross-category
//! re-emission, plus the ground-truth parameters for oracle use.

use super::{RawDataset, Sample};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-category point spread around each mixture component.
const SIGMA: f64 = 0.05;
/// Offset between the two components of one category's mixture.
const COMPONENT_OFFSET: f64 = 0.08;
/// Minimum distance demanded between category centers.
const MIN_CENTER_DISTANCE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_categories: usize,
    pub samples_per_category: usize,
    /// Features are quantized to steps of 1/grid_resolution.
    pub grid_resolution: u32,
    /// overlap_matrix[i][j] is the probability that a point generated under
    /// category i is re-emitted under category j. Diagonal is 1.
    pub overlap_matrix: Vec<Vec<f64>>,
    pub dim: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Uniform pairwise overlap probability off the diagonal.
    pub fn uniform_overlap(
        n_categories: usize,
        samples_per_category: usize,
        grid_resolution: u32,
        overlap: f64,
        dim: usize,
        seed: u64,
    ) -> Self {
        let overlap_matrix = (0..n_categories)
            .map(|i| {
                (0..n_categories)
                    .map(|j| if i == j { 1.0 } else { overlap })
                    .collect()
            })
            .collect();
        Self {
            n_categories,
            samples_per_category,
            grid_resolution,
            overlap_matrix,
            dim,
            seed,
        }
    }

    /// Duplicate-free, well-separated corpus: zero overlap and a grid fine
    /// enough that accidental collisions are negligible.
    pub fn separable(n_categories: usize, samples_per_category: usize, dim: usize, seed: u64) -> Self {
        Self::uniform_overlap(n_categories, samples_per_category, 1_000_000, 0.0, dim, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_categories < 2 {
            return Err(Error::Argument("need at least 2 categories".into()));
        }
        if self.dim == 0 || self.grid_resolution == 0 || self.samples_per_category == 0 {
            return Err(Error::Argument(
                "dim, grid_resolution and samples_per_category must be positive".into(),
            ));
        }
        if self.overlap_matrix.len() != self.n_categories
            || self.overlap_matrix.iter().any(|r| r.len() != self.n_categories)
        {
            return Err(Error::Argument(format!(
                "overlap matrix must be {0}x{0}",
                self.n_categories
            )));
        }
        for (i, row) in self.overlap_matrix.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Argument(format!(
                        "overlap[{i}][{j}] = {p} outside [0,1]"
                    )));
                }
                if i == j && p != 1.0 {
                    return Err(Error::Argument("overlap diagonal must be 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn category_name(&self, index: usize) -> String {
        let width = (self.n_categories.saturating_sub(1)).to_string().len();
        format!("cat{index:0width$}")
    }

    /// Expected label-set size of a unique sample when the grid is fine
    /// enough that distinct draws never collide: 1 + sum of the row's
    /// off-diagonal re-emission probabilities, averaged over categories.
    pub fn expected_lcard(&self) -> f64 {
        let total: f64 = (0..self.n_categories)
            .map(|i| {
                1.0 + self.overlap_matrix[i]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p)
                    .sum::<f64>()
            })
            .sum();
        total / self.n_categories as f64
    }
}

/// The generator's own parameters, kept alongside the corpus so tests can
/// build independent oracles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthGroundTruth {
    pub spec: SynthSpec,
    /// Two component means per category.
    pub component_means: Vec<[Vec<f64>; 2]>,
    pub sigma: f64,
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn place_centers(spec: &SynthSpec, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.n_categories);
    for _ in 0..spec.n_categories {
        let mut accepted = None;
        for _attempt in 0..500 {
            let candidate: Vec<f64> =
                (0..spec.dim).map(|_| rng.gen_range(0.15..0.85)).collect();
            let ok = centers.iter().all(|c| {
                let d2: f64 = c
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= MIN_CENTER_DISTANCE
            });
            if ok {
                accepted = Some(candidate);
                break;
            }
        }
        centers.push(accepted.unwrap_or_else(|| {
            (0..spec.dim).map(|_| rng.gen_range(0.15..0.85)).collect()
        }));
    }
    centers
}

fn quantize(x: f64, resolution: u32) -> f64 {
    let r = resolution as f64;
    ((x.clamp(0.0, 1.0) * r).round()) / r
}

/// Generate a raw single-label corpus from the generator settings,
/// deterministic under the
/// seed, returned together with the generation parameters.
pub fn synth_generate(spec: &SynthSpec) -> Result<(RawDataset, SynthGroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let centers = place_centers(spec, &mut rng);
    let component_means: Vec<[Vec<f64>; 2]> = centers
        .iter()
        .map(|c| {
            let direction: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng)).collect();
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let second: Vec<f64> = c
                .iter()
                .zip(&direction)
                .map(|(m, d)| (m + COMPONENT_OFFSET * d / norm).clamp(0.05, 0.95))
                .collect();
            [c.clone(), second]
        })
        .collect();

    let labels: Vec<String> = (0..spec.n_categories).map(|i| spec.category_name(i)).collect();
    let mut samples = Vec::new();
    for i in 0..spec.n_categories {
        for _ in 0..spec.samples_per_category {
            let component = usize::from(rng.gen_bool(0.5));
            let point: Vec<f64> = component_means[i][component]
                .iter()
                .map(|&m| quantize(m + SIGMA * normal(&mut rng), spec.grid_resolution))
                .collect();
            samples.push(Sample {
                features: point.clone(),
                raw_label: labels[i].clone(),
            });
            for (j, label) in labels.iter().enumerate() {
                if j != i && rng.gen_range(0.0..1.0) < spec.overlap_matrix[i][j] {
                    samples.push(Sample {
                        features: point.clone(),
                        raw_label: label.clone(),
                    });
                }
            }
        }
    }
    let raw = RawDataset {
        feature_names: (0..spec.dim).map(|d| format!("f{d}")).collect(),
        samples,
        label_vocabulary: labels,
        text_cells: BTreeMap::new(),
        encodings: BTreeMap::new(),
    };
    let ground_truth = SynthGroundTruth {
        spec: spec.clone(),
        component_means,
        sigma: SIGMA,
    };
    Ok((raw, ground_truth))
}
