use serde::{Deserialize, Serialize};

use crate::engine::{acceptance_rates, AbcProblem, ImportanceProposal, RateEstimate};
use crate::error::{Error, Result};
use crate::stats::ols_line;

/// `ε v_T` below this is the small-tolerance regime.
pub const SMALL_REGIME_MAX: f64 = 0.3;
/// `ε v_T` above this is the large-tolerance regime.
pub const LARGE_REGIME_MIN: f64 = 3.0;
pub const MIN_GRID_POINTS: usize = 5;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeRegime {
    SmallEps,
    LargeEps,
    /// No regime split (analytic checks).
    Whole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub regime: SlopeRegime,
    pub slope: f64,
    pub stderr: f64,
    pub eps_range: (f64, f64),
    pub n_points: usize,
    /// Tolerances dropped for having no acceptances.
    pub dropped: Vec<f64>,
}

/// Least-squares slope of `log rate` on `log ε`, skipping points with zero acceptances.
pub fn fit_log_slope(points: &[RateEstimate], regime: SlopeRegime) -> Result<SlopeFit> {
    let (kept, dropped): (Vec<&RateEstimate>, Vec<&RateEstimate>) = points.iter().partition(|p| p.hits > 0);
    if kept.len() < MIN_FIT_POINTS {
        return Err(Error::Degenerate(format!(
            "only {} of {} tolerances had acceptances; need {MIN_FIT_POINTS}",
            kept.len(),
            points.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.eps.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.rate.ln()).collect();
    let (_, slope, stderr) = ols_line(&xs, &ys);
    let lo = kept.iter().map(|p| p.eps).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|p| p.eps).fold(0.0, f64::max);
    Ok(SlopeFit {
        regime,
        slope,
        stderr,
        eps_range: (lo, hi),
        n_points: kept.len(),
        dropped: dropped.iter().map(|p| p.eps).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    pub small: SlopeFit,
    pub large: SlopeFit,
    pub points: Vec<RateEstimate>,
}

/// Estimates acceptance rates on both tolerance grids from one proposal stream and fits the
/// log–log slope in each regime. Grid points must sit inside their regime, and the grids must
/// reach a decade beyond `ε = 1/v_T` on each side.
pub fn acceptance_slope(
    problem: &AbcProblem<'_>,
    small_grid: &[f64],
    large_grid: &[f64],
    v_t: f64,
    n: u64,
    seed: u64,
    proposal: Option<&ImportanceProposal>,
) -> Result<SlopePair> {
    if small_grid.len() < MIN_GRID_POINTS || large_grid.len() < MIN_GRID_POINTS {
        return Err(Error::Config(format!("each regime needs at least {MIN_GRID_POINTS} tolerances")));
    }
    if let Some(e) = small_grid.iter().find(|e| **e * v_t >= SMALL_REGIME_MAX) {
        return Err(Error::Config(format!("eps = {e} is outside the small regime (eps v_T < {SMALL_REGIME_MAX})")));
    }
    if let Some(e) = large_grid.iter().find(|e| **e * v_t <= LARGE_REGIME_MIN) {
        return Err(Error::Config(format!("eps = {e} is outside the large regime (eps v_T > {LARGE_REGIME_MIN})")));
    }
    let lo = small_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = large_grid.iter().copied().fold(0.0, f64::max);
    if lo * v_t > 0.1 || hi * v_t < 10.0 {
        return Err(Error::Config("the grid must span a decade on both sides of eps = 1/v_T".into()));
    }
    let all: Vec<f64> = small_grid.iter().chain(large_grid).copied().collect();
    let points = acceptance_rates(problem, &all, n, seed, proposal)?;
    let (s, l) = points.split_at(small_grid.len());
    Ok(SlopePair {
        small: fit_log_slope(s, SlopeRegime::SmallEps)?,
        large: fit_log_slope(l, SlopeRegime::LargeEps)?,
        points,
    })
}

/// `n` tolerances spaced evenly in `log ε` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::stats::linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}
