//! Small numerical and statistical helpers shared by the oracles and diagnostics.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Sample excess kurtosis `m4 / m2^2 - 3` (moment estimator).
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d2 = (x - m) * (x - m);
        (a + d2, b + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    m4 / (m2 * m2) - 3.0
}

/// Empirical quantile of already sorted data, linear interpolation between
/// order statistics (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> f64 {
    quantile_sorted(&sorted_copy(xs), 0.5)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Composite trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(grid: &[f64], ys: &[f64]) -> f64 {
    grid.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // The alternating series converges slowly here; use the theta-function form.
        let s: f64 = (1..=50)
            .map(|k| {
                let y = (2 * k - 1) as f64 * std::f64::consts::PI / x;
                (-y * y / 8.0).exp()
            })
            .sum();
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let sorted = sorted_copy(xs);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        d.max(upper).max(lower)
    })
}

/// Asymptotic p-value for a one-sample KS statistic with fully specified null,
/// using Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted_copy(a);
    let b = sorted_copy(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    let se = ne.sqrt();
    kolmogorov_sf((se + 0.12 + 0.11 / se) * d)
}

/// Significance levels with baked-in Lilliefors critical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    TenPercent,
    FivePercent,
    OnePercent,
}

impl Level {
    pub fn alpha(self) -> f64 {
        match self {
            Level::TenPercent => 0.10,
            Level::FivePercent => 0.05,
            Level::OnePercent => 0.01,
        }
    }
}

/// Critical value of the KS statistic against a normal law whose mean and SD were
/// estimated from the same sample (Lilliefors' large-sample table, `c / sqrt(n)`).
pub fn lilliefors_critical(n: usize, level: Level) -> f64 {
    let c = match level {
        Level::TenPercent => 0.805,
        Level::FivePercent => 0.886,
        Level::OnePercent => 1.031,
    };
    c / (n as f64).sqrt()
}

/// Critical value of the one-sample KS statistic against a fully specified law.
pub fn ks_critical(n: usize, level: Level) -> f64 {
    let c = match level {
        Level::TenPercent => 1.224,
        Level::FivePercent => 1.358,
        Level::OnePercent => 1.628,
    };
    let sn = (n as f64).sqrt();
    c / (sn + 0.12 + 0.11 / sn)
}

/// KS distance between the standardized sample and N(0, 1).
pub fn lilliefors_statistic(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let s = std_dev(xs);
    ks_statistic(xs, |x| normal_cdf((x - m) / s))
}

/// Ordinary least-squares line `y = a + b x`; returns `(intercept, slope, slope_stderr)`.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (intercept, slope, stderr)
}

/// Weighted least-squares line with weights `w`; returns `(intercept, slope, slope_stderr)`
/// where the standard error treats `1/w` as the known variance of each `y`.
pub fn wls_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope, (1.0 / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantiles_follow_type_seven() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_relative_eq!(quantile_sorted(&xs, 0.025), 3.475, epsilon = 1e-12);
        assert_relative_eq!(quantile_sorted(&xs, 0.975), 97.525, epsilon = 1e-12);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 100.0);
    }

    #[test]
    fn kolmogorov_tail_matches_reference_points() {
        // P(K > 1.3581) = 0.05 and P(K > 1.6276) = 0.01.
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.627_6) - 0.01).abs() < 1e-4);
        // Both branches agree where they meet.
        let a = kolmogorov_sf(0.299_999);
        let b = kolmogorov_sf(0.300_001);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn two_sample_ks_on_identical_samples_is_zero() {
        let a = [0.3, 0.1, 0.7, 0.2];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 + 2.0 * x).collect();
        let (a, b, se) = ols_line(&xs, &ys);
        assert_relative_eq!(a, 1.5, epsilon = 1e-12);
        assert_relative_eq!(b, 2.0, epsilon = 1e-12);
        assert!(se < 1e-7);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = linspace(0.0, 2.0, 11);
        let y: Vec<f64> = g.iter().map(|x| 3.0 * x + 1.0).collect();
        assert_relative_eq!(trapezoid(&g, &y), 8.0, epsilon = 1e-12);
    }
}
