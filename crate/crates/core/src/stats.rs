//! Small statistics helpers shared by the experiment drivers.

use rand::Rng;

/// Linear-interpolation quantile (type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
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

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Percentile bootstrap interval of `stat` at level `1 - alpha`.
pub fn bootstrap_ci<R, F>(
    xs: &[f64],
    resamples: usize,
    alpha: f64,
    rng: &mut R,
    stat: F,
) -> (f64, f64)
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    assert!(!xs.is_empty(), "bootstrap of an empty sample");
    let mut buf = vec![0.0; xs.len()];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    (
        quantile_sorted(&stats, 0.5 * alpha),
        quantile_sorted(&stats, 1.0 - 0.5 * alpha),
    )
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Binomial logistic regression `P(x) = 1 / (1 + exp(-(a + b x)))` by
/// Newton-Raphson on grouped counts `(x, successes, trials)`.
/// `x` is standardised internally for conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LogisticFit {
    pub fn probability(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(self.intercept + self.slope * x)).exp())
    }

    /// Where the fitted curve equals one half.
    pub fn midpoint(&self) -> f64 {
        -self.intercept / self.slope
    }

    /// Abscissa where two fitted curves cross, if they are not parallel.
    pub fn intersection(&self, other: &LogisticFit) -> Option<f64> {
        let db = self.slope - other.slope;
        if db.abs() < 1e-12 * self.slope.abs().max(other.slope.abs()).max(1e-300) {
            return None;
        }
        Some((other.intercept - self.intercept) / db)
    }
}

pub fn logistic_fit(groups: &[(f64, u64, u64)]) -> Option<LogisticFit> {
    let total: u64 = groups.iter().map(|g| g.2).sum();
    if groups.len() < 2 || total == 0 {
        return None;
    }
    let xs: Vec<f64> = groups.iter().map(|g| g.0).collect();
    let mx = mean(&xs);
    let sx = variance(&xs).sqrt();
    if sx == 0.0 {
        return None;
    }
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, k, n) in groups {
            let z = (x - mx) / sx;
            let p = 1.0 / (1.0 + (-(a + b * z)).exp());
            let w = n as f64 * p * (1.0 - p);
            let r = k as f64 - n as f64 * p;
            ga += r;
            gb += r * z;
            haa += w;
            hab += w * z;
            hbb += w * z * z;
        }
        // Small ridge keeps perfectly separated data finite.
        let (haa, hbb) = (haa + 1e-9, hbb + 1e-9);
        let det = haa * hbb - hab * hab;
        if det <= 0.0 || !det.is_finite() {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        a += da;
        b += db;
        if da.abs() < 1e-10 && db.abs() < 1e-10 {
            break;
        }
        if a.abs() > 50.0 || b.abs() > 50.0 {
            break;
        }
    }
    Some(LogisticFit {
        intercept: a - b * mx / sx,
        slope: b / sx,
    })
}
