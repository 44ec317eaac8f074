//! Couplings and relative energies of spin configurations.
//!
//! The Hamiltonian counts every disagreeing pair `{x, y}` of the whole
//! lattice once, weighted by `J(|x - y|)`. Energies are always relative to
//! the all-plus ground state, so a configuration with finitely many minus
//! spins has finite energy. Interactions between the window and the infinite
//! all-plus exterior are evaluated with [`tail_sum`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triangle::{spins_from_triangles, Triangle, TriangleConfiguration};

/// Largest alpha covered by the model, `J(n) = n^-(2 - alpha)` for `n > 1`.
pub const ALPHA_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
    j1: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, j1: f64) -> Result<Self> {
        if !(0.0..=ALPHA_MAX).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1/2], got {alpha}"
            )));
        }
        if !(j1 > 0.0) || !j1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "J(1) must be positive and finite, got {j1}"
            )));
        }
        Ok(Self { alpha, j1 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    /// Decay exponent `2 - alpha` of the long-range part.
    pub fn exponent(&self) -> f64 {
        2.0 - self.alpha
    }

    /// Same model with a different nearest-neighbour coupling.
    pub fn with_j1(&self, j1: f64) -> Result<Self> {
        Self::new(self.alpha, j1)
    }
}

/// Inclusive interval of lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter(format!("window [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    /// Window of `len` sites containing the origin, with `len / 2` sites
    /// to its left.
    pub fn centered(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameter("window size must be positive".into()));
        }
        let lo = -((len / 2) as i64);
        Self::new(lo, lo + len as i64 - 1)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Finite window of `+1` / `-1` spins; every site outside is `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfiguration {
    window: Window,
    values: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(window: Window, values: Vec<i8>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::InvalidParameter(format!(
                "{} spin values for a window of {} sites",
                values.len(),
                window.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::InvalidParameter(format!("spin value {v} is not +1/-1")));
        }
        Ok(Self { window, values })
    }

    pub fn all_plus(window: Window) -> Self {
        Self {
            values: vec![1; window.len()],
            window,
        }
    }

    /// Minus spins exactly on `minus` (sites outside the window are ignored).
    pub fn with_minus(window: Window, minus: impl IntoIterator<Item = i64>) -> Self {
        let mut cfg = Self::all_plus(window);
        for x in minus {
            if window.contains(x) {
                cfg.values[(x - window.lo) as usize] = -1;
            }
        }
        cfg
    }

    /// Bit `k` of `bits` set means site `window.lo + k` is minus.
    pub fn from_bits(window: Window, bits: u64) -> Self {
        let values = (0..window.len())
            .map(|k| if bits >> k & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { window, values }
    }

    /// Parses a string of `+` and `-` characters; the first character is
    /// site `origin`.
    pub fn parse(spins: &str, origin: i64) -> Result<Self> {
        let values = spins
            .chars()
            .filter(|ch| !ch.is_whitespace())
            .map(|ch| match ch {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("unexpected spin character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        if values.is_empty() {
            return Err(Error::Parse("empty spin string".into()));
        }
        let window = Window::new(origin, origin + values.len() as i64 - 1)?;
        Self::new(window, values)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Spin at site `x`; `+1` outside the window.
    pub fn get(&self, x: i64) -> i8 {
        if self.window.contains(x) {
            self.values[(x - self.window.lo) as usize]
        } else {
            1
        }
    }

    pub fn is_all_plus(&self) -> bool {
        self.values.iter().all(|v| *v == 1)
    }

    pub fn minus_sites(&self) -> impl Iterator<Item = i64> + '_ {
        let lo = self.window.lo;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == -1)
            .map(move |(k, _)| lo + k as i64)
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            f.write_str(if *v == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// `J(n)`: `j1` at distance one, `n^-(2 - alpha)` beyond.
pub fn coupling(n: u64, params: &ModelParams) -> Result<f64> {
    match n {
        0 => Err(Error::SelfCoupling),
        1 => Ok(params.j1),
        _ => Ok(long_range(n, params.exponent())),
    }
}

fn long_range(n: u64, exponent: f64) -> f64 {
    (n as f64).powf(-exponent)
}

// B_2, B_4, ..., B_10 divided by (2k)!
const BERNOULLI_OVER_FACTORIAL: [f64; 5] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
];

/// Below this cutoff terms are summed directly before switching to the
/// Euler-Maclaurin remainder.
const DIRECT_CUTOFF: u64 = 64;

/// `sum_{n >= start} n^-(2 - alpha)`, accurate to well below `1e-12`.
pub fn tail_sum(start: u64, params: &ModelParams) -> Result<f64> {
    if start < 2 {
        return Err(Error::TailStart(start));
    }
    Ok(power_tail(start, params.exponent()))
}

/// `sum_{n >= start} n^-p` for `p > 1`, `start >= 1`.
pub(crate) fn power_tail(start: u64, p: f64) -> f64 {
    debug_assert!(p > 1.0 && start >= 1);
    let cutoff = start.max(DIRECT_CUTOFF);
    // Small terms first keeps the rounding error at the level of the result.
    let mut head = 0.0;
    for n in (start..cutoff).rev() {
        head += (n as f64).powf(-p);
    }
    head + euler_maclaurin_tail(cutoff as f64, p)
}

fn euler_maclaurin_tail(n: f64, p: f64) -> f64 {
    let f = n.powf(-p);
    let integral = n * f / (p - 1.0);
    let mut correction = 0.0;
    // rising factorial p (p + 1) ... (p + 2k) times n^(-p - 2k - 1)
    let mut rising = p;
    let mut power = f / n;
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if k > 0 {
            let j = (2 * k) as f64;
            rising *= (p + j - 1.0) * (p + j);
            power /= n * n;
        }
        correction += coeff * rising * power;
    }
    integral + 0.5 * f + correction
}

/// Couplings and exterior tails tabulated for windows up to a fixed length.
///
/// `tail(d)` is the total coupling between one site and the half-line of
/// sites starting at distance `d`, including `J(1)` when `d = 1`.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    params: ModelParams,
    couplings: Vec<f64>,
    tails: Vec<f64>,
}

impl CouplingTable {
    pub fn new(params: ModelParams, max_len: usize) -> Self {
        let max_len = max_len.max(1);
        let p = params.exponent();
        let mut couplings = vec![0.0; max_len + 1];
        couplings[1] = params.j1;
        for (n, slot) in couplings.iter_mut().enumerate().skip(2) {
            *slot = long_range(n as u64, p);
        }
        // tails[d] for d in 1..=max_len + 1, filled from the accurate far end.
        let mut tails = vec![0.0; max_len + 2];
        tails[max_len + 1] = power_tail(max_len as u64 + 1, p);
        for d in (1..=max_len).rev() {
            tails[d] = tails[d + 1] + couplings[d];
        }
        Self {
            params,
            couplings,
            tails,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn max_len(&self) -> usize {
        self.couplings.len() - 1
    }

    /// `J(n)` for `1 <= n <= max_len`.
    pub fn coupling(&self, n: usize) -> f64 {
        self.couplings[n]
    }

    /// Coupling of a site to all sites at distance `>= d`, `1 <= d <= max_len + 1`.
    pub fn tail(&self, d: usize) -> f64 {
        self.tails[d]
    }

    /// Relative energy of spins on a window of at most `max_len` sites.
    pub fn energy(&self, values: &[i8]) -> f64 {
        self.energy_with_boundary(values, 1)
    }

    /// Energy of `values` surrounded by an exterior of constant spin
    /// `boundary`, relative to the uniform `boundary` state.
    pub fn energy_with_boundary(&self, values: &[i8], boundary: i8) -> f64 {
        let len = values.len();
        assert!(len <= self.max_len(), "window longer than coupling table");
        let mut pairs = 0.0;
        let mut exterior = 0.0;
        for i in 0..len {
            if values[i] != boundary {
                exterior += self.tails[i + 1] + self.tails[len - i];
            }
            for j in i + 1..len {
                if values[i] != values[j] {
                    pairs += self.couplings[j - i];
                }
            }
        }
        pairs + exterior
    }

    /// `H(T)`: relative energy of the spin configuration encoded by a set of
    /// triangles (minus where the cover count is odd).
    pub fn triangle_energy(&self, triangles: &[Triangle]) -> f64 {
        let Some(lo) = triangles.iter().map(|t| t.lo).min() else {
            return 0.0;
        };
        let hi = triangles.iter().map(|t| t.hi).max().unwrap_or(lo);
        let mut values = vec![1i8; (hi - lo + 1) as usize];
        for t in triangles {
            for x in t.lo..=t.hi {
                values[(x - lo) as usize] *= -1;
            }
        }
        self.energy(&values)
    }
}

/// `h(sigma)`, the energy relative to the all-plus state.
pub fn relative_energy(sigma: &SpinConfiguration, params: &ModelParams) -> f64 {
    CouplingTable::new(*params, sigma.window().len()).energy(sigma.values())
}

/// `H(added | context) = H(added u context) - H(context)`.
pub fn conditional_energy(
    added: &TriangleConfiguration,
    context: &TriangleConfiguration,
    params: &ModelParams,
) -> Result<f64> {
    if let Some(t) = added.triangles().iter().find(|t| context.triangles().contains(t)) {
        return Err(Error::SharedTriangle(*t));
    }
    let union = added.union(context);
    union.validate()?;
    if added.is_empty() {
        return Ok(0.0);
    }
    let window = union.hull().expect("nonempty union");
    let table = CouplingTable::new(*params, window.len());
    let full = spins_from_triangles(&union, window)?;
    let rest = spins_from_triangles(context, window)?;
    Ok(table.energy(full.values()) - table.energy(rest.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    const ZETA_3_2: f64 = 2.612_375_348_685_488;

    fn params(alpha: f64, j1: f64) -> ModelParams {
        ModelParams::new(alpha, j1).unwrap()
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling(1, &params(0.0, 10.0)).unwrap(), 10.0);
        assert_abs_diff_eq!(
            coupling(2, &params(0.5, 1.0)).unwrap(),
            0.353_553_390_593_273_8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(coupling(4, &params(0.0, 1.0)).unwrap(), 0.0625, epsilon = 1e-15);
        assert_eq!(coupling(0, &params(0.0, 1.0)), Err(Error::SelfCoupling));
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(ModelParams::new(0.6, 1.0).is_err());
        assert!(ModelParams::new(-0.1, 1.0).is_err());
        assert!(ModelParams::new(0.2, 0.0).is_err());
    }

    #[test]
    fn tail_sum_matches_zeta_values() {
        assert_abs_diff_eq!(tail_sum(2, &params(0.0, 1.0)).unwrap(), ZETA2 - 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(tail_sum(2, &params(0.5, 1.0)).unwrap(), ZETA_3_2 - 1.0, epsilon = 1e-13);
        let far = tail_sum(1_000_000, &params(0.0, 1.0)).unwrap();
        assert!((far - 1e-6).abs() < 1e-8, "{far}");
        assert_eq!(tail_sum(1, &params(0.0, 1.0)), Err(Error::TailStart(1)));
    }

    #[test]
    fn tail_sum_agrees_with_direct_summation() {
        // oracle: plain summation to 10^6 plus the integral of the remainder
        for alpha in [0.0, 0.25, 0.5] {
            let p = 2.0 - alpha;
            let cutoff = 1_000_000u64;
            let mut direct = 0.0;
            for n in (7..cutoff).rev() {
                direct += (n as f64).powf(-p);
            }
            let rest = (cutoff as f64).powf(1.0 - p) / (p - 1.0) + 0.5 * (cutoff as f64).powf(-p);
            let oracle = direct + rest;
            assert_abs_diff_eq!(tail_sum(7, &params(alpha, 1.0)).unwrap(), oracle, epsilon = 1e-11);
        }
    }

    #[test]
    fn single_flip_energy_is_two_zeta2_tails() {
        let sigma = SpinConfiguration::with_minus(Window::new(-3, 3).unwrap(), [0]);
        assert_abs_diff_eq!(relative_energy(&sigma, &params(0.0, 1.0)), 2.0 * ZETA2, epsilon = 1e-12);
        let all_plus = SpinConfiguration::all_plus(Window::new(-3, 3).unwrap());
        assert_eq!(relative_energy(&all_plus, &params(0.3, 5.0)), 0.0);
    }

    #[test]
    fn two_site_droplet_matches_direct_summation() {
        // sigma = -1 on {0, 1}, alpha = 1/2, j1 = 2; oracle sums pairs out to 10^6.
        let prm = params(0.5, 2.0);
        let cutoff = 1_000_000i64;
        let j = |n: i64| if n == 1 { 2.0 } else { (n as f64).powf(-1.5) };
        let mut oracle = 0.0;
        for x in [0i64, 1] {
            for y in (-cutoff..=cutoff).rev() {
                if y != 0 && y != 1 {
                    oracle += j((x - y).abs());
                }
            }
        }
        // remainder beyond the cutoff on both sides, two minus sites
        let rem: f64 = [cutoff + 1, cutoff + 1, cutoff, cutoff + 2]
            .iter()
            .map(|d| (*d as f64).powf(-0.5) / 0.5 + 0.5 * (*d as f64).powf(-1.5))
            .sum();
        oracle += rem;
        let sigma = SpinConfiguration::with_minus(Window::new(0, 1).unwrap(), [0, 1]);
        assert_abs_diff_eq!(relative_energy(&sigma, &prm), oracle, epsilon = 1e-8);
    }

    #[test]
    fn energy_independent_of_window_padding() {
        let prm = params(0.25, 3.0);
        let tight = SpinConfiguration::with_minus(Window::new(0, 4).unwrap(), [0, 1, 4]);
        let wide = SpinConfiguration::with_minus(Window::new(-9, 13).unwrap(), [0, 1, 4]);
        assert_abs_diff_eq!(
            relative_energy(&tight, &prm),
            relative_energy(&wide, &prm),
            epsilon = 1e-11
        );
    }

    #[test]
    fn parse_round_trip() {
        let sigma = SpinConfiguration::parse("+--+-", -2).unwrap();
        assert_eq!(sigma.window(), Window::new(-2, 2).unwrap());
        assert_eq!(sigma.minus_sites().collect::<Vec<_>>(), vec![-1, 0, 2]);
        assert_eq!(sigma.to_string(), "+--+-");
        assert!(SpinConfiguration::parse("+x", 0).is_err());
    }

    #[test]
    fn conditional_energy_of_empty_addition_is_zero() {
        let prm = params(0.5, 4.0);
        let ctx = TriangleConfiguration::new(vec![Triangle::new(0, 2).unwrap()]);
        let empty = TriangleConfiguration::default();
        assert_eq!(conditional_energy(&empty, &ctx, &prm).unwrap(), 0.0);
    }

    #[test]
    fn conditional_energy_of_single_triangle_is_flip_energy() {
        let prm = params(0.0, 1.0);
        let added = TriangleConfiguration::new(vec![Triangle::new(0, 0).unwrap()]);
        let e = conditional_energy(&added, &TriangleConfiguration::default(), &prm).unwrap();
        assert_abs_diff_eq!(e, 2.0 * ZETA2, epsilon = 1e-12);
    }

    #[test]
    fn conditional_energy_rejects_shared_and_incompatible() {
        let prm = params(0.0, 1.0);
        let t = Triangle::new(0, 0).unwrap();
        let a = TriangleConfiguration::new(vec![t]);
        assert_eq!(conditional_energy(&a, &a, &prm), Err(Error::SharedTriangle(t)));
        let close = TriangleConfiguration::new(vec![Triangle::new(2, 3).unwrap()]);
        let wide = TriangleConfiguration::new(vec![Triangle::new(5, 6).unwrap()]);
        assert!(matches!(
            conditional_energy(&close, &wide, &prm),
            Err(Error::Incompatible(..))
        ));
    }
}
