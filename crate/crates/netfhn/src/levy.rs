//! Compensated pure-jump noise on the nodes.
//!
//! A noise specification is a finite list of compound-Poisson bands, each with
//! a rate and a mark distribution on R^n. A single band is an ordinary
//! compound Poisson process; several bands approximate an infinite-activity
//! measure by truncation, each band mean-compensated. The square-integrability
//! of the intensity measure is available in closed form.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};

use crate::error::{Error, Result};

/// Mark distribution of one band.
#[derive(Debug, Clone)]
pub enum MarkDistribution {
    /// Finitely many atoms with probabilities.
    Atoms {
        points: Vec<DVector<f64>>,
        probs: Vec<f64>,
    },
    /// Centered isotropic Gaussian with the given per-component standard
    /// deviation.
    Gaussian { std: f64 },
    /// Uniform on the centered ball of the given radius.
    UniformBall { radius: f64 },
}

impl MarkDistribution {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Atoms { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return Err(Error::Parameter(
                        "atom list must be non-empty and match its probability list".into(),
                    ));
                }
                if points.iter().any(|p| p.len() != dim) {
                    return Err(Error::Dimension(format!(
                        "every atom must live in R^{dim}"
                    )));
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::Parameter("atom probabilities must be >= 0".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "atom probabilities must sum to 1, got {total}"
                    )));
                }
                Ok(())
            }
            Self::Gaussian { std } => {
                if *std <= 0.0 {
                    Err(Error::Parameter("Gaussian mark std must be positive".into()))
                } else {
                    Ok(())
                }
            }
            Self::UniformBall { radius } => {
                if *radius <= 0.0 {
                    Err(Error::Parameter("ball radius must be positive".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `E|x|^2` under the mark distribution, in closed form.
    fn second_moment(&self, dim: usize) -> f64 {
        match self {
            Self::Atoms { points, probs } => points
                .iter()
                .zip(probs)
                .map(|(x, p)| p * x.norm_squared())
                .sum(),
            Self::Gaussian { std } => dim as f64 * std * std,
            Self::UniformBall { radius } => radius * radius * dim as f64 / (dim as f64 + 2.0),
        }
    }

    /// Mean of the mark distribution (zero except for non-centered atoms).
    fn mean(&self, dim: usize) -> DVector<f64> {
        match self {
            Self::Atoms { points, probs } => {
                let mut m = DVector::zeros(dim);
                for (x, &p) in points.iter().zip(probs) {
                    m += x * p;
                }
                m
            }
            _ => DVector::zeros(dim),
        }
    }

    fn sample(&self, dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            Self::Atoms { points, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (x, &p) in points.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return x.clone();
                    }
                }
                points.last().unwrap().clone()
            }
            Self::Gaussian { std } => {
                DVector::from_fn(dim, |_, _| *std * rng.sample::<f64, _>(StandardNormal))
            }
            Self::UniformBall { radius } => loop {
                let x = DVector::from_fn(dim, |_, _| 2.0 * rng.random::<f64>() - 1.0);
                if x.norm_squared() <= 1.0 {
                    return x * *radius;
                }
            },
        }
    }
}

/// One compound-Poisson band: jumps arrive at `rate`, marks i.i.d.
#[derive(Debug, Clone)]
pub struct Band {
    pub rate: f64,
    pub marks: MarkDistribution,
}

/// The intensity measure of the node noise: a finite sum of bands on R^n.
#[derive(Debug, Clone)]
pub struct LevyMeasureSpec {
    dim: usize,
    bands: Vec<Band>,
}

impl LevyMeasureSpec {
    pub fn new(dim: usize, bands: Vec<Band>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("noise dimension must be positive".into()));
        }
        for band in &bands {
            if band.rate < 0.0 {
                return Err(Error::Parameter("band rate must be >= 0".into()));
            }
            band.marks.validate(dim)?;
        }
        Ok(Self { dim, bands })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// `int |x|^2 nu(dx)` in closed form: the sum of `rate * E|mark|^2` over
    /// bands. Finite by construction.
    pub fn second_moment(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| b.rate * b.marks.second_moment(self.dim))
            .sum()
    }

    /// `int x nu(dx)`: the per-unit-time compensator drift. Zero when every
    /// band is mean-zero.
    pub fn compensator_drift(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim);
        for b in &self.bands {
            d += b.marks.mean(self.dim) * b.rate;
        }
        d
    }

    /// Samples one path of jump times and marks on `(0, T]`.
    ///
    /// Reproducible and order-independent across paths: the RNG is seeded by
    /// `seed` with `path_index` as the stream counter.
    pub fn sample_jumps(&self, horizon: f64, seed: u64, path_index: u64) -> Result<NoisePath> {
        if horizon <= 0.0 {
            return Err(Error::Parameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index.wrapping_add(1));

        let mut events: Vec<(f64, DVector<f64>)> = Vec::new();
        for band in &self.bands {
            if band.rate == 0.0 {
                continue;
            }
            let poi = Poisson::new(band.rate * horizon)
                .map_err(|e| Error::Parameter(format!("invalid Poisson intensity: {e}")))?;
            let count = rng.sample(poi) as usize;
            for _ in 0..count {
                let t = rng.random::<f64>() * horizon;
                let mark = band.marks.sample(self.dim, &mut rng);
                events.push((t, mark));
            }
        }
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (times, marks) = events.into_iter().unzip();
        Ok(NoisePath {
            horizon,
            times,
            marks,
            compensator_drift: self.compensator_drift(),
        })
    }
}

/// One realized path of the compensated jump process.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub horizon: f64,
    /// Strictly increasing jump times in `(0, T]`.
    pub times: Vec<f64>,
    pub marks: Vec<DVector<f64>>,
    /// `int x nu(dx)`, subtracted per unit time so that `E L(t) = 0`.
    pub compensator_drift: DVector<f64>,
}

impl NoisePath {
    /// The compensated path value `L(t) = sum_{s_k <= t} x_k - t * drift`.
    pub fn value_at(&self, t: f64) -> DVector<f64> {
        let dim = self.compensator_drift.len();
        let mut v = DVector::zeros(dim);
        for (s, x) in self.times.iter().zip(&self.marks) {
            if *s <= t {
                v += x;
            }
        }
        v - &self.compensator_drift * t
    }

    pub fn n_jumps(&self) -> usize {
        self.times.len()
    }
}
