//! Simulation of the latent variate: draw an `n × m` matrix, aggregate each
//! row, pick the row holding the k-th smallest aggregate and report one of
//! its entries.
//!
//! Trial `i` draws from stream `i` of the run seed, row by row, so results
//! do not depend on how trials are spread over threads.

mod gof;

pub use gof::{goodness_of_fit, two_sample_ks, GofReport, Reference, ReferenceCdf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ParentDistribution;
use crate::error::{Error, Result};
use crate::order_engine::{LatentSpec, Role};
use crate::rng::CounterRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub spec: LatentSpec,
    /// One law for iid entries, or one per column.
    pub parents: Vec<ParentDistribution>,
    pub trials: u64,
    pub seed: u64,
    /// Equal-probability bins for histogram statistics.
    pub bins: usize,
    /// Column of the selected row to report (0 is the latent entry).
    pub column: usize,
}

impl McConfig {
    pub fn new(spec: LatentSpec, parents: Vec<ParentDistribution>, trials: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            spec,
            parents,
            trials,
            seed,
            bins: 100,
            column: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }

    pub fn with_column(mut self, column: usize) -> Self {
        self.column = column;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.parents.len() != 1 && self.parents.len() != self.spec.m {
            return Err(Error::Parameter(format!(
                "expected 1 or m = {} parent laws, got {}",
                self.spec.m,
                self.parents.len()
            )));
        }
        if self.trials < 1 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::Parameter("bins must be at least 2".into()));
        }
        if self.column >= self.spec.m {
            return Err(Error::Parameter(format!(
                "column {} out of range for m = {}",
                self.column, self.spec.m
            )));
        }
        for p in &self.parents {
            p.validated()?;
        }
        Ok(())
    }

    fn column_law(&self, c: usize) -> &ParentDistribution {
        if self.parents.len() == 1 {
            &self.parents[0]
        } else {
            &self.parents[c]
        }
    }
}

/// Scratch space reused across trials on one worker.
struct Trial {
    matrix: Vec<f64>,
    keys: Vec<(f64, u32)>,
}

impl Trial {
    fn run(&mut self, cfg: &McConfig, index: u64) -> f64 {
        let LatentSpec { n, k, m, role } = cfg.spec;
        let n = n as usize;
        let mut rng = CounterRng::new(cfg.seed, index);
        self.matrix.clear();
        self.keys.clear();
        for r in 0..n {
            let mut agg = match role {
                Role::Addend => 0.0,
                Role::Factor => 1.0,
            };
            for c in 0..m {
                let v = cfg.column_law(c).sample(&mut rng);
                self.matrix.push(v);
                match role {
                    Role::Addend => agg += v,
                    Role::Factor => agg *= v,
                }
            }
            self.keys.push((agg, r as u32));
        }
        // Ties (possible only through rounding) break by row index.
        let (_, &mut (_, row), _) = self
            .keys
            .select_nth_unstable_by(k as usize - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.matrix[row as usize * m + cfg.column]
    }
}

/// Draws `cfg.trials` latent variates; output order is trial order.
pub fn sample_latent(cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cap = cfg.spec.n as usize * cfg.spec.m;
    Ok((0..cfg.trials)
        .into_par_iter()
        .map_init(
            || Trial {
                matrix: Vec::with_capacity(cap),
                keys: Vec::with_capacity(cfg.spec.n as usize),
            },
            |t, i| t.run(cfg, i),
        )
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: u64,
}

pub fn mean_with_se(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    MeanEstimate {
        mean,
        standard_error: (var / n).sqrt(),
        trials: xs.len() as u64,
    }
}

/// Sample mean of the latent variate with its standard error.
pub fn estimate_latent_mean(cfg: &McConfig) -> Result<MeanEstimate> {
    if cfg.trials < 100 {
        return Err(Error::Parameter("mean estimation needs at least 100 trials".into()));
    }
    Ok(mean_with_se(&sample_latent(cfg)?))
}

/// A simulation together with its fit against a reference density.
#[derive(Debug, Clone, Serialize)]
pub struct McRun {
    pub config: McConfig,
    pub samples: Vec<f64>,
    pub report: GofReport,
}

/// Samples `cfg` and compares the draws with `reference`.
pub fn run(cfg: &McConfig, reference: &ReferenceCdf) -> Result<McRun> {
    let samples = sample_latent(cfg)?;
    let report = goodness_of_fit(&samples, Reference::Table(reference), cfg.bins)?;
    Ok(McRun {
        config: cfg.clone(),
        samples,
        report,
    })
}

#[cfg(test)]
mod tests;
