//! Normality, paired-difference and one-way ANOVA tests.

use serde::{Deserialize, Serialize};

use super::special::{f_sf, normal_cdf, normal_quantile, normal_sf, student_t_two_sided};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Largest reduced sample for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub alpha: f64,
}

impl StatTestResult {
    fn new(name: &str, statistic: f64, p_value: f64, n: usize) -> Self {
        StatTestResult {
            test_name: name.to_string(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn significant(&self) -> bool {
        self.p_value < self.alpha
    }

    pub const CSV_HEADER: &'static str = "test_name,statistic,p_value,n";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.test_name, self.statistic, self.p_value, self.n)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} contains non-finite values")))
    }
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro-Wilk W and p-value (Royston's AS R94 approximation).
pub fn shapiro_wilk(sample: &[f64]) -> Result<StatTestResult> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::validation(format!("Shapiro-Wilk needs 3..=5000 values, got {n}")));
    }
    check_finite(sample, "sample")?;
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 || sum_sq_dev(&x) <= 0.0 {
        return Err(Error::validation("Shapiro-Wilk: sample has zero variance"));
    }

    let half = n / 2;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let an25 = n as f64 + 0.25;
        let m: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / an25)).collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / (n as f64).sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first..half {
            a[i] = -m[i] / fac;
        }
    }

    // W as the squared correlation of the data with the antisymmetric weights
    let xm = mean(&x);
    let mut num = 0.0;
    let mut ssa = 0.0;
    for i in 0..half {
        num += a[i] * (x[n - 1 - i] - x[i]);
        ssa += 2.0 * a[i] * a[i];
    }
    let ssx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let w = (num * num / (ssa * ssx)).min(1.0);

    let p = if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::FRAC_PI_3);
        p.max(0.0)
    } else {
        let w1 = 1.0 - w;
        if w1 <= 0.0 {
            1.0
        } else {
            let y = w1.ln();
            let nf = n as f64;
            if n <= 11 {
                let gamma = poly(&[-2.273, 0.459], nf);
                if y >= gamma {
                    1e-99
                } else {
                    let y = -(gamma - y).ln();
                    let m = poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf);
                    let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
                    normal_sf((y - m) / s)
                }
            } else {
                let ln_n = nf.ln();
                let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
                let s = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
                normal_sf((y - m) / s)
            }
        }
    };
    Ok(StatTestResult::new("shapiro_wilk", w, p, n))
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::validation(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    check_finite(a, "first sample")?;
    check_finite(b, "second sample")?;
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    let d = differences(a, b)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::validation(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let ss = sum_sq_dev(&d);
    if ss <= 0.0 {
        return Err(Error::validation("paired t-test: differences have zero variance"));
    }
    let sd = (ss / (n - 1) as f64).sqrt();
    let t = mean(&d) / (sd / (n as f64).sqrt());
    let p = student_t_two_sided(t, (n - 1) as f64)?;
    Ok(StatTestResult::new("paired_t", t, p, n))
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

struct SignedRanks {
    /// Twice the average ranks, so ties stay integral.
    doubled: Vec<u64>,
    w_plus: f64,
    w_minus: f64,
    tie_term: f64,
}

fn signed_ranks(d: &[f64]) -> Result<SignedRanks> {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    if nz.is_empty() {
        return Err(Error::validation("Wilcoxon test: all differences are zero"));
    }
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let (mut w_plus, mut w_minus) = (0.0, 0.0);
    for (r, v) in ranks.iter().zip(&nz) {
        if *v > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    Ok(SignedRanks {
        doubled: ranks.iter().map(|r| (2.0 * r).round() as u64).collect(),
        w_plus,
        w_minus,
        tie_term,
    })
}

/// Exact two-sided p: the share of the `2^n` sign assignments whose
/// `min(W+, W-)` is at most the observed one.
fn wilcoxon_exact_p(doubled: &[u64], w_min: f64) -> f64 {
    let total: u64 = doubled.iter().sum();
    // counts[s] = number of sign patterns whose doubled W+ equals s
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = (2.0 * w_min).round() as u64;
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as u64).min(total - s as u64) <= obs)
        .map(|(_, &c)| c)
        .sum();
    hits as f64 / (1u64 << doubled.len()) as f64
}

/// Normal approximation with tie and continuity corrections.
pub fn wilcoxon_normal_p(n: usize, w_min: f64, tie_term: f64) -> f64 {
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let diff = w_min - mu;
    let corrected = if diff < 0.0 { (diff + 0.5).min(0.0) } else { 0.0 };
    (2.0 * normal_cdf(corrected / var.sqrt())).min(1.0)
}

/// Wilcoxon signed-rank test on `a - b`; zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    let d = differences(a, b)?;
    let sr = signed_ranks(&d)?;
    let n = sr.doubled.len();
    let w = sr.w_plus.min(sr.w_minus);
    let p = if n <= WILCOXON_EXACT_MAX {
        wilcoxon_exact_p(&sr.doubled, w)
    } else {
        wilcoxon_normal_p(n, w, sr.tie_term)
    };
    Ok(StatTestResult::new("wilcoxon", w, p, n))
}

/// Same statistic as [`wilcoxon_signed_rank`] but always using the normal
/// approximation.
pub fn wilcoxon_signed_rank_approx(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    let d = differences(a, b)?;
    let sr = signed_ranks(&d)?;
    let n = sr.doubled.len();
    let w = sr.w_plus.min(sr.w_minus);
    Ok(StatTestResult::new("wilcoxon", w, wilcoxon_normal_p(n, w, sr.tie_term), n))
}

/// One-way ANOVA F test.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<StatTestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::validation(format!("ANOVA needs at least 2 groups, got {k}")));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::validation(format!("ANOVA group {i} has {} values; need 2", g.len())));
        }
        check_finite(g, "ANOVA group")?;
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len();
    let grand = mean(&all);
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| sum_sq_dev(g)).sum();
    if ssw <= 0.0 {
        return Err(Error::validation("ANOVA: zero within-group variance"));
    }
    let d1 = (k - 1) as f64;
    let d2 = (n - k) as f64;
    let f = (ssb / d1) / (ssw / d2);
    let p = f_sf(f, d1, d2)?;
    Ok(StatTestResult::new("anova", f, p, n))
}

/// Shapiro-Wilk on the differences, then the paired t-test if normality is
/// not rejected at `alpha`, otherwise Wilcoxon.
pub fn choose_paired_test(a: &[f64], b: &[f64], alpha: f64) -> Result<StatTestResult> {
    let d = differences(a, b)?;
    let normality = shapiro_wilk(&d)?;
    let mut result = if normality.p_value >= alpha {
        paired_t_test(a, b)?
    } else {
        wilcoxon_signed_rank(a, b)?
    };
    result.alpha = alpha;
    Ok(result)
}
