//! Seeded generators for statistical checks: log-normal risk scores for
//! conformal coverage and unit vectors with planted cluster structure for
//! leader clustering.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{dot, normalize};

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_calib: usize,
    pub n_test: usize,
    /// Mean of the underlying normal of the log-normal risk distribution.
    pub risk_log_mean: f64,
    /// Standard deviation of the underlying normal; 0 makes all risks equal.
    pub risk_log_sd: f64,
    pub n_points: usize,
    pub n_planted_clusters: usize,
    /// Cosine distance of every point from its cluster centre.
    pub spread: f64,
    /// Cosine distance between cluster centres, in `(0, 1]`.
    pub separation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_calib: 99,
            n_test: 1,
            risk_log_mean: 0.0,
            risk_log_sd: 1.0,
            n_points: 30,
            n_planted_clusters: 3,
            spread: 0.1,
            separation: 0.9,
        }
    }
}

impl SyntheticSpec {
    /// Cosine distance between any two points of the same planted cluster.
    pub fn intra_cluster_distance(&self) -> f64 {
        1.0 - (1.0 - self.spread).powi(2)
    }

    /// Cosine distance between any two points of different planted clusters.
    pub fn inter_cluster_distance(&self) -> f64 {
        1.0 - (1.0 - self.spread).powi(2) * (1.0 - self.separation)
    }
}

/// i.i.d. log-normal draws: `n_calib` calibration risks, then `n_test` test risks.
pub fn gen_risks(spec: &SyntheticSpec) -> Result<(Vec<f64>, Vec<f64>), SyntheticError> {
    let dist = LogNormal::new(spec.risk_log_mean, spec.risk_log_sd)
        .map_err(|e| SyntheticError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let calib = (0..spec.n_calib).map(|_| dist.sample(&mut rng)).collect();
    let test = (0..spec.n_test).map(|_| dist.sample(&mut rng)).collect();
    Ok((calib, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledPoint {
    pub vector: Vec<f64>,
    pub label: usize,
}

fn random_orthonormal_basis(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        for b in &basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        if let Some(unit) = normalize(&v) {
            if dot(&v, &v).sqrt() > 1e-6 {
                basis.push(unit);
            }
        }
    }
    basis
}

/// Unit vectors in `n_planted_clusters` groups (labels assigned round-robin,
/// order shuffled). Points of one cluster are exactly
/// [`SyntheticSpec::intra_cluster_distance`] apart and points of different
/// clusters exactly [`SyntheticSpec::inter_cluster_distance`] apart, so
/// leader clustering at any radius in between recovers the planted labels.
pub fn gen_clustered_points(spec: &SyntheticSpec) -> Result<Vec<LabelledPoint>, SyntheticError> {
    let bad = |m: String| Err(SyntheticError::InvalidSpec(m));
    if spec.n_planted_clusters == 0 {
        return bad("at least one planted cluster is required".into());
    }
    if !(0.0..1.0).contains(&spec.spread) {
        return bad(format!("spread {} must be in [0, 1)", spec.spread));
    }
    if !(spec.separation > 0.0 && spec.separation <= 1.0) {
        return bad(format!("separation {} must be in (0, 1]", spec.separation));
    }
    if spec.separation <= 2.0 * spec.spread {
        return bad(format!(
            "separation {} must exceed twice the spread {}",
            spec.separation, spec.spread
        ));
    }

    let k = spec.n_planted_clusters;
    let n = spec.n_points;
    let dim = 1 + k + n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let basis = random_orthonormal_basis(&mut rng, dim);
    let shared = &basis[0];

    let shared_weight = (1.0 - spec.separation).sqrt();
    let own_weight = spec.separation.sqrt();
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            shared
                .iter()
                .zip(&basis[1 + c])
                .map(|(s, e)| shared_weight * s + own_weight * e)
                .collect()
        })
        .collect();

    let toward = 1.0 - spec.spread;
    let away = (1.0 - toward * toward).sqrt();
    let mut points: Vec<LabelledPoint> = (0..n)
        .map(|i| {
            let label = i % k;
            let offset = &basis[1 + k + i];
            let vector = centres[label]
                .iter()
                .zip(offset)
                .map(|(c, u)| toward * c + away * u)
                .collect();
            LabelledPoint { vector, label }
        })
        .collect();
    points.shuffle(&mut rng);
    Ok(points)
}
