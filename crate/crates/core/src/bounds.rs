//! Numeric checks of the energy constant, the W lower bound, the convexity
//! inequality and the Peierls series.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ui};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::triangle::WKernel;

/// `ln 3 / ln 2 - 1`, where `zeta_alpha` reaches zero.
pub fn alpha_plus() -> f64 {
    3f64.ln() / 2f64.ln() - 1.0
}

/// Size function: `L^alpha` for `alpha > 0`, `ln L + 4` for `alpha = 0`.
pub fn h_alpha(alpha: f64, l: u64) -> f64 {
    if alpha == 0.0 {
        (l as f64).ln() + 4.0
    } else {
        (l as f64).powf(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HAlpha {
    alpha: f64,
}

impl HAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=crate::model::ALPHA_MAX).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1/2], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, l: u64) -> f64 {
        h_alpha(self.alpha, l)
    }
}

/// `1 - 2 (2^alpha - 1)` without domain checks.
pub fn zeta_alpha_raw(alpha: f64) -> f64 {
    1.0 - 2.0 * (2f64.powf(alpha) - 1.0)
}

/// `1 - 2 (2^alpha - 1)` on `[0, alpha_plus]`; zero at the right end.
pub fn zeta_alpha(alpha: f64) -> Result<f64> {
    let ap = alpha_plus();
    if !(0.0..=ap).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside [0, {ap}) where zeta_alpha > 0"
        )));
    }
    if alpha == ap {
        return Ok(0.0);
    }
    Ok(zeta_alpha_raw(alpha))
}

/// Right-hand side of the W lower bound: `zeta_alpha L^alpha`, or
/// `2 ln L + 8` at `alpha = 0`.
pub fn w_target(alpha: f64, l: u64) -> Result<f64> {
    if alpha == 0.0 {
        Ok(2.0 * (l as f64).ln() + 8.0)
    } else {
        Ok(zeta_alpha(alpha)? * h_alpha(alpha, l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WScanReport {
    pub alpha: f64,
    pub j1: f64,
    pub l_max: u64,
    /// `min_L W(L) - target(L)`.
    pub min_slack: f64,
    pub argmin: u64,
    pub violations: u64,
    pub first_violation: Option<u64>,
    /// Smallest `J(1)` with no violation for `L <= l_max`. `W` is affine in
    /// `J(1)` with slope 2, so this is exact.
    pub min_j1: f64,
    pub min_j1_argmax: u64,
}

impl WScanReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Scans `W(L) - target(L)` for `L = 1..=l_max`.
pub fn walpha_scan(alpha: f64, j1: f64, l_max: u64) -> Result<WScanReport> {
    if l_max == 0 {
        return Err(Error::InvalidParameter("L_max must be at least 1".into()));
    }
    let params = ModelParams::new(alpha, j1)?;
    let kernel = WKernel::new(params, l_max);
    let shift = 2.0 * (j1 - 1.0);
    let mut report = WScanReport {
        alpha,
        j1,
        l_max,
        min_slack: f64::INFINITY,
        argmin: 1,
        violations: 0,
        first_violation: None,
        min_j1: f64::NEG_INFINITY,
        min_j1_argmax: 1,
    };
    for l in 1..=l_max {
        let w = kernel.value(l);
        let target = w_target(alpha, l)?;
        let slack = w - target;
        if slack < report.min_slack {
            report.min_slack = slack;
            report.argmin = l;
        }
        if slack < 0.0 {
            report.violations += 1;
            report.first_violation.get_or_insert(l);
        }
        let needed = 1.0 + (target - (w - shift)) / 2.0;
        if needed > report.min_j1 {
            report.min_j1 = needed;
            report.min_j1_argmax = l;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub xs: Vec<u64>,
    pub y: u64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub n_max: usize,
    pub x_max: u64,
    pub checked: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub argmin: ConvexityViolation,
    pub first_violation: Option<ConvexityViolation>,
}

/// Brute-force check of
/// `b h(y) + (b - a) sum_i h(x_i) >= b h(sum_i x_i + y)` over
/// `1 <= x_i <= y <= x_max` with `n - 1` values `x_i`, `2 <= n <= n_max`.
pub fn convexity_check(alpha: f64, a: f64, b: f64, n_max: usize, x_max: u64) -> Result<ConvexityReport> {
    if !(a > 0.0 && a < b) {
        return Err(Error::InvalidParameter(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    if alpha == 0.0 {
        let p = b / (b - a);
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = 0 needs 1 < b/(b-a) < 2, got {p}"
            )));
        }
    }
    if n_max < 2 || x_max == 0 {
        return Err(Error::InvalidParameter("need n_max >= 2 and x_max >= 1".into()));
    }
    HAlpha::new(alpha)?;
    let top = (n_max as u64) * x_max;
    let h: Vec<f64> = (0..=top)
        .map(|l| if l == 0 { 0.0 } else { h_alpha(alpha, l) })
        .collect();
    let mut report = ConvexityReport {
        alpha,
        a,
        b,
        n_max,
        x_max,
        checked: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        argmin: ConvexityViolation {
            xs: Vec::new(),
            y: 0,
            slack: f64::INFINITY,
        },
        first_violation: None,
    };
    let mut xs = Vec::with_capacity(n_max);
    for y in 1..=x_max {
        for n in 2..=n_max {
            xs.clear();
            visit_multisets(&mut xs, n - 1, 1, y, &mut |xs| {
                let sum: u64 = xs.iter().sum();
                let hx: f64 = xs.iter().map(|&x| h[x as usize]).sum();
                let slack = b * h[y as usize] + (b - a) * hx - b * h[(sum + y) as usize];
                report.checked += 1;
                if slack < report.min_slack {
                    report.min_slack = slack;
                    report.argmin = ConvexityViolation {
                        xs: xs.to_vec(),
                        y,
                        slack,
                    };
                }
                if slack < 0.0 {
                    report.violations += 1;
                    if report.first_violation.is_none() {
                        report.first_violation = Some(ConvexityViolation {
                            xs: xs.to_vec(),
                            y,
                            slack,
                        });
                    }
                }
            });
        }
    }
    Ok(report)
}

// nondecreasing sequences of length k with entries in [from, to]
fn visit_multisets(xs: &mut Vec<u64>, k: usize, from: u64, to: u64, f: &mut impl FnMut(&[u64])) {
    if xs.len() == k {
        f(xs);
        return;
    }
    for x in from..=to {
        xs.push(x);
        visit_multisets(xs, k, x, to, f);
        xs.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    pub beta: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub m_max: u64,
    pub truncated: f64,
    /// Upper bound on the neglected terms.
    pub remainder: f64,
}

impl SeriesBound {
    pub fn upper(&self) -> f64 {
        self.truncated + self.remainder
    }

    pub fn below_half(&self) -> bool {
        self.upper() < 0.5
    }
}

/// Upper bound on `mu(0 in Gamma)`: `2 sum_m m exp(-zeta beta m^alpha / 2)`
/// for `alpha > 0`, `2 e^{-4 beta} sum_m m^{1 - beta}` for `alpha = 0`,
/// summed to `m_max` with an integral bound on the rest.
pub fn peierls_series_bound(beta: f64, zeta: f64, alpha: f64, m_max: u64) -> Result<SeriesBound> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be at least 1".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    HAlpha::new(alpha)?;
    let (truncated, remainder) = if alpha == 0.0 {
        if beta <= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "series sum m^(1-beta) diverges for beta = {beta} <= 2"
            )));
        }
        let pre = 2.0 * (-4.0 * beta).exp();
        let partial: f64 = (1..=m_max).rev().map(|m| (m as f64).powf(1.0 - beta)).sum();
        let rest = (m_max as f64).powf(2.0 - beta) / (beta - 2.0);
        (pre * partial, pre * rest)
    } else {
        if !(zeta > 0.0) {
            return Err(Error::InvalidParameter(format!("zeta must be positive, got {zeta}")));
        }
        let k = zeta * beta / 2.0;
        let term = |x: f64| x * (-k * x.powf(alpha)).exp();
        let partial: f64 = (1..=m_max).rev().map(|m| term(m as f64)).sum();
        // x e^{-k x^alpha} increases up to x* = (1 / (k alpha))^{1/alpha}
        let s = 2.0 / alpha;
        let m = m_max as f64;
        let integral = gamma_ui(s, k * m.powf(alpha)) * gamma(s) / (alpha * k.powf(s));
        let peak = (1.0 / (k * alpha)).powf(1.0 / alpha);
        let bump = if m < peak { term(peak) } else { 0.0 };
        (2.0 * partial, 2.0 * (integral + bump))
    };
    Ok(SeriesBound {
        beta,
        alpha,
        zeta,
        m_max,
        truncated,
        remainder,
    })
}

/// Smallest `beta` (to `1e-9` relative) with [`peierls_series_bound`] below 1/2.
pub fn peierls_beta_threshold(zeta: f64, alpha: f64, m_max: u64) -> Result<f64> {
    let below = |beta: f64| -> Result<bool> { Ok(peierls_series_bound(beta, zeta, alpha, m_max)?.below_half()) };
    let mut lo: f64 = if alpha == 0.0 { 2.0 + 1e-9 } else { 1e-9 };
    let mut hi = lo.max(1.0);
    while !below(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Internal("no beta threshold below 1e12".into()));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
