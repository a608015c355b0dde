//! Small numerical helpers shared by the samplers and diagnostics.

use crate::error::{Result, SbiError};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Inclusive linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], q: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(SbiError::Empty("quantile input"));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, q))
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SbiError::Empty("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
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
    Ok(d)
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> Result<f64> {
    if x.is_empty() {
        return Err(SbiError::Empty("KS sample"));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Asymptotic Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Approximate p-value of a KS statistic computed from `n_eff` effective points
/// (Stephens' small-sample correction).
pub fn ks_pvalue(stat: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * stat)
}

/// Gaussian kernel density estimate evaluated on an evenly spaced grid over
/// `[lo, hi]`, Silverman bandwidth unless one is given.
pub fn kde_on_grid(x: &[f64], lo: f64, hi: f64, points: usize, bandwidth: Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(x));
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    // bin first, then smooth the histogram: O(points^2) instead of O(n * points)
    let width = (hi - lo) / (points - 1) as f64;
    let mut counts = vec![0.0; points];
    for &v in x {
        let k = ((v - lo) / width).round();
        if k >= 0.0 && (k as usize) < points {
            counts[k as usize] += 1.0;
        }
    }
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let reach = ((5.0 * h / width).ceil() as usize).max(1);
    let density = (0..points)
        .map(|i| {
            let a = i.saturating_sub(reach);
            let b = (i + reach).min(points - 1);
            (a..=b)
                .map(|j| counts[j] * (-0.5 * ((grid[i] - grid[j]) / h).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    (grid, density)
}

pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let sd = std_dev(x);
    let iqr = quantile(x, 0.75).unwrap_or(0.0) - quantile(x, 0.25).unwrap_or(0.0);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (x.len() as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1e-3
    }
}

/// Location of the highest kernel-density point over `[lo, hi]`.
pub fn kde_mode(x: &[f64], lo: f64, hi: f64) -> f64 {
    let (grid, dens) = kde_on_grid(x, lo, hi, 401, None);
    let k = dens
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    grid[k]
}

/// Number of local maxima of the kernel density exceeding `min_rel` times the
/// global maximum.
pub fn count_modes(x: &[f64], lo: f64, hi: f64, min_rel: f64) -> usize {
    let (_, d) = kde_on_grid(x, lo, hi, 401, None);
    let top = d.iter().cloned().fold(0.0, f64::max);
    (0..d.len())
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { d[i - 1] };
            let right = if i + 1 == d.len() { f64::NEG_INFINITY } else { d[i + 1] };
            d[i] > left && d[i] >= right && d[i] >= min_rel * top
        })
        .count()
}
