//! Paired significance tests: Wilcoxon signed-rank and the paired t-test.
//!
//! The Wilcoxon null distribution is enumerated exactly (via the subset-sum
//! distribution over doubled midranks) for n <= 20 pairs and approximated by a
//! tie-corrected normal with continuity correction above that. The t-tail is
//! evaluated through the regularized incomplete beta function.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite sentinel reported in place of an infinite t statistic when the
/// differences have zero variance.
pub const T_SENTINEL: f64 = 1e12;

/// Equal-length MSE samples from two experimental conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairedSample {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "paired sample lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.len() < 5 {
            return Err(Error::DegenerateSample("fewer than 5 pairs"));
        }
        if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("paired sample"));
        }
        Ok(Self { a, b })
    }

    fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

/// Wilcoxon signed-rank test, two-sided.
///
/// Zero differences are dropped; |differences| are ranked with midranks for
/// ties, and W is the smaller of the positive- and negative-rank sums.
pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<(f64, f64)> {
    let diffs: Vec<f64> = sample
        .differences()
        .into_iter()
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::DegenerateSample("all differences are zero"));
    }
    let n = diffs.len();

    // midranks of |d|
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }

    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let p = if n <= 20 {
        exact_two_sided_p(&ranks, w)
    } else {
        normal_two_sided_p(n, &tie_sizes, w)
    };
    Ok((w, p.min(1.0)))
}

/// Exact two-sided p by enumerating the null distribution of the rank sum.
///
/// Midranks are half-integers at worst, so doubling makes them integers and a
/// subset-sum count over 2^n equally likely sign assignments applies.
fn exact_two_sided_p(ranks: &[f64], w_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max_sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let n = ranks.len() as u32;
    let total = 2f64.powi(n as i32);
    debug_assert!((counts.iter().sum::<f64>() - total).abs() < 1e-6);

    let w2 = (2.0 * w_obs).round() as usize;
    let lower: f64 = counts[..=w2.min(max_sum)].iter().sum();
    // two-sided: both tails at distance w from the extremes
    (2.0 * lower / total).min(1.0)
}

/// Normal approximation with continuity correction and tie variance
/// correction, applied to W = min(W+, W-).
fn normal_two_sided_p(n: usize, tie_sizes: &[usize], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    // W <= mean by construction; correct toward the mean.
    let z = (w - mean + 0.5) / var.sqrt();
    2.0 * normal_cdf(z)
}

/// Paired t-test, two-sided: t = mean(d) / (sd(d) / sqrt(n)).
///
/// Zero-variance differences produce the capped sentinel with p = 0 (or a
/// degenerate error when the mean is also zero).
pub fn paired_t_test(sample: &PairedSample) -> Result<(f64, f64)> {
    let diffs = sample.differences();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Err(Error::DegenerateSample("all differences identical and zero"));
        }
        return Ok((mean.signum() * T_SENTINEL, 0.0));
    }
    let t = mean / (var / n).sqrt();
    let p = student_t_two_sided_p(t, n - 1.0);
    Ok((t, p))
}

/// Two-sided tail of Student's t with `nu` degrees of freedom:
/// p = I_{nu/(nu + t^2)}(nu/2, 1/2).
pub fn student_t_two_sided_p(t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = nu / (nu + t * t);
    incomplete_beta(nu / 2.0, 0.5, x).min(1.0)
}

/// Standard normal CDF via the regularized incomplete gamma function.
pub fn normal_cdf(z: f64) -> f64 {
    let half_erfc = 0.5 * gamma_q(0.5, z * z / 2.0);
    if z >= 0.0 {
        1.0 - half_erfc
    } else {
        half_erfc
    }
}

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "x outside [0, 1]");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // use the symmetry that keeps the continued fraction convergent
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - incomplete_beta(b, a, 1.0 - x)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized upper incomplete gamma Q(a, x).
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..300 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..300 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos approximation of ln Gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}
