use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, Normal};

use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::stats::{linspace, mean, trapezoid, variance};

/// Points on each axis of the integration grid.
pub const DEFAULT_JOINT_GRID: usize = 256;

/// Marginal posterior ordinates on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub param_name: String,
}

impl GridPosterior {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    pub fn mean(&self) -> f64 {
        let xf: Vec<f64> = self.grid.iter().zip(&self.density).map(|(x, f)| x * f).collect();
        trapezoid(&self.grid, &xf)
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let vf: Vec<f64> = self.grid.iter().zip(&self.density).map(|(x, f)| (x - m).powi(2) * f).collect();
        trapezoid(&self.grid, &vf).sqrt()
    }

    /// Linear interpolation of the density; zero outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&v| v <= x).clamp(1, g.len() - 1);
        let (x0, x1) = (g[i - 1], g[i]);
        let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.density[i - 1] * (1.0 - w) + self.density[i] * w
    }
}

/// Sufficient statistics of a Gaussian sample: `x̄`, `s²` (divisor `T-1`) and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub mean: f64,
    pub var: f64,
    pub t_len: usize,
}

impl GaussianStats {
    pub fn from_series(y: &TimeSeries) -> Result<Self> {
        if y.values.len() < 2 {
            return Err(Error::Size("the exact posterior needs T >= 2".into()));
        }
        Ok(GaussianStats { mean: mean(&y.values), var: variance(&y.values), t_len: y.values.len() })
    }
}

fn check_inputs(prior_box: [(f64, f64); 2], grid_size: usize) -> Result<()> {
    if grid_size < 64 {
        return Err(Error::Size(format!("grid_size must be at least 64, got {grid_size}")));
    }
    let [(m0, m1), (s0, s1)] = prior_box;
    if !(m0 < m1 && s0 < s1 && s0 > 0.0) {
        return Err(Error::Domain(format!("invalid prior box {prior_box:?}; sigma bounds must be positive")));
    }
    Ok(())
}

/// Evaluates `log p(data | μ, σ)` on a tensor grid and returns the two marginals.
///
/// Marginal grids have `2 * grid_size` points; the other coordinate is integrated over a
/// `grid_size` trapezoid grid. Everything is exponentiated only after subtracting the global
/// maximum of the log-likelihood.
fn marginals<F>(prior_box: [(f64, f64); 2], grid_size: usize, loglik: F) -> Result<(GridPosterior, GridPosterior)>
where
    F: Fn(f64, f64) -> f64,
{
    let [(m0, m1), (s0, s1)] = prior_box;
    let (mu_fine, sig_fine) = (linspace(m0, m1, 2 * grid_size), linspace(s0, s1, 2 * grid_size));
    let (mu_coarse, sig_coarse) = (linspace(m0, m1, grid_size), linspace(s0, s1, grid_size));

    let table = |xs: &[f64], ys: &[f64], swap: bool| -> Vec<Vec<f64>> {
        xs.iter().map(|&x| ys.iter().map(|&y| if swap { loglik(y, x) } else { loglik(x, y) }).collect()).collect()
    };
    let mu_table = table(&mu_fine, &sig_coarse, false);
    let sig_table = table(&sig_fine, &mu_coarse, true);
    let top = mu_table.iter().chain(&sig_table).flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical("log-likelihood is not finite anywhere on the grid".into()));
    }
    let integrate = |rows: &[Vec<f64>], inner: &[f64]| -> Vec<f64> {
        rows.iter()
            .map(|row| {
                let f: Vec<f64> = row.iter().map(|l| (l - top).exp()).collect();
                trapezoid(inner, &f)
            })
            .collect()
    };
    let finish = |grid: Vec<f64>, mut dens: Vec<f64>, name: &str| -> Result<GridPosterior> {
        let z = trapezoid(&grid, &dens);
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Numerical(format!(
                "posterior mass for {name} underflowed; evaluate the likelihood in log space on a narrower box"
            )));
        }
        dens.iter_mut().for_each(|d| *d /= z);
        Ok(GridPosterior { grid, density: dens, param_name: name.into() })
    };
    let mu_dens = integrate(&mu_table, &sig_coarse);
    let sig_dens = integrate(&sig_table, &mu_coarse);
    Ok((finish(mu_fine, mu_dens, "mu")?, finish(sig_fine, sig_dens, "sigma")?))
}

/// Exact marginal posteriors of `(μ, σ)` under a uniform prior on `prior_box`, from the full
/// Gaussian likelihood of `y`.
pub fn exact_gaussian_posterior(
    y: &TimeSeries,
    prior_box: [(f64, f64); 2],
    grid_size: usize,
) -> Result<(GridPosterior, GridPosterior)> {
    check_inputs(prior_box, grid_size)?;
    if y.values.len() < 2 {
        return Err(Error::Size("the exact posterior needs T >= 2".into()));
    }
    let t = y.values.len() as f64;
    marginals(prior_box, grid_size, |mu, sigma| {
        let ss: f64 = y.values.iter().map(|v| (v - mu) * (v - mu)).sum();
        -t * sigma.ln() - ss / (2.0 * sigma * sigma)
    })
}

/// Same posterior computed from the sampling densities of `(x̄, s²)`:
/// `x̄ ~ N(μ, σ²/T)` and `(T-1)s²/σ² ~ χ²_{T-1}`.
pub fn exact_gaussian_posterior_from_stats(
    stats: GaussianStats,
    prior_box: [(f64, f64); 2],
    grid_size: usize,
) -> Result<(GridPosterior, GridPosterior)> {
    check_inputs(prior_box, grid_size)?;
    if stats.t_len < 2 {
        return Err(Error::Size("the exact posterior needs T >= 2".into()));
    }
    let t = stats.t_len as f64;
    let chi = ChiSquared::new(t - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    marginals(prior_box, grid_size, |mu, sigma| {
        let normal = Normal::new(mu, sigma / t.sqrt()).expect("sigma > 0");
        let scale = (t - 1.0) / (sigma * sigma);
        normal.ln_pdf(stats.mean) + chi.ln_pdf(stats.var * scale) + scale.ln()
    })
}
