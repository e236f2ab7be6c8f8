use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::GridPosterior;
use crate::stats::{normal_pdf, quantile_sorted, sorted_copy, std_dev, trapezoid};

pub const MIN_KDE_DRAWS: usize = 30;
pub const MIN_INTERVAL_DRAWS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// `1.06 · SD · n^{-1/5}`
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub ordinates: Vec<f64>,
    pub bandwidth: f64,
    pub n_draws: usize,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.ordinates)
    }
}

/// Gaussian-kernel density estimate of `draws` evaluated on `grid`.
pub fn kde(draws: &[f64], grid: &[f64], rule: Bandwidth) -> Result<DensityEstimate> {
    if draws.len() < MIN_KDE_DRAWS {
        return Err(Error::Size(format!("kde needs at least {MIN_KDE_DRAWS} draws, got {}", draws.len())));
    }
    let sd = std_dev(draws);
    if !(sd > 0.0) {
        return Err(Error::Degenerate(format!("all {} draws equal {}; the density is a spike", draws.len(), draws[0])));
    }
    let h = match rule {
        Bandwidth::Silverman => 1.06 * sd * (draws.len() as f64).powf(-0.2),
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::Config(format!("bandwidth must be positive, got {h}"))),
    };
    // Sorted draws let each grid point skip kernels beyond 8 bandwidths.
    let sorted = sorted_copy(draws);
    let cut = 8.0 * h;
    let scale = 1.0 / (draws.len() as f64 * h);
    let ordinates = grid
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&d| d < x - cut);
            let hi = sorted.partition_point(|&d| d <= x + cut);
            sorted[lo..hi].iter().map(|&d| normal_pdf((x - d) / h)).sum::<f64>() * scale
        })
        .collect();
    Ok(DensityEstimate { grid: grid.to_vec(), ordinates, bandwidth: h, n_draws: draws.len() })
}

/// `sqrt((1/G) Σ_g (π̂_g − π_g)²)` over the exact posterior's grid. The estimate is linearly
/// interpolated onto that grid when the two grids differ.
pub fn rmse_density(est: &DensityEstimate, exact: &GridPosterior) -> Result<f64> {
    if exact.grid.is_empty() {
        return Err(Error::Shape("exact posterior has an empty grid".into()));
    }
    let on_grid: Vec<f64> = if est.grid == exact.grid {
        est.ordinates.clone()
    } else {
        let (lo, hi) = (est.grid[0], est.grid[est.grid.len() - 1]);
        if exact.grid[0] < lo || exact.grid[exact.grid.len() - 1] > hi {
            return Err(Error::Shape(format!(
                "estimate grid [{lo}, {hi}] does not cover the exact grid [{}, {}]",
                exact.grid[0],
                exact.grid[exact.grid.len() - 1]
            )));
        }
        let as_posterior =
            GridPosterior { grid: est.grid.clone(), density: est.ordinates.clone(), param_name: String::new() };
        exact.grid.iter().map(|&x| as_posterior.at(x)).collect()
    };
    let g = exact.grid.len() as f64;
    Ok((on_grid.iter().zip(&exact.density).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / g).sqrt())
}

/// Equal-tailed interval from type-7 empirical quantiles.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < MIN_INTERVAL_DRAWS {
        return Err(Error::Size(format!(
            "credible intervals need at least {MIN_INTERVAL_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    let s = sorted_copy(draws);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail)))
}
