//! Random-scan Metropolis sampling of the finite-volume measure with plus
//! boundary conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::decompose;
use crate::error::{Error, Result};
use crate::model::{CouplingTable, ModelParams, SpinConfiguration, Window};
use crate::triangle::build_triangles;

/// Batches per chain for the error bars.
pub const BATCHES: usize = 32;

/// Windows up to this size also get a full state histogram.
pub const HISTOGRAM_MAX_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of sites; the window is `[-len/2, len - 1 - len/2]`.
    pub window: usize,
    pub beta: f64,
    pub params: ModelParams,
    /// Total sweeps per chain, burn-in included. One sweep is `window`
    /// single-site proposals at uniformly random sites.
    pub sweeps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub chains: usize,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must hold at least one site".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.chains == 0 {
            return Err(Error::InvalidParameter("need at least one chain".into()));
        }
        Ok(())
    }

    pub fn window_interval(&self) -> Window {
        Window::centered(self.window).expect("nonempty window")
    }

    pub fn retained(&self) -> u64 {
        self.sweeps - self.burn_in
    }
}

/// Metropolis state with the local field `sum_y J(|x-y|) s_y + ext(x)` at
/// every site, so that flipping `x` costs `s_x field[x]`.
#[derive(Debug, Clone)]
pub struct Chain {
    table: CouplingTable,
    beta: f64,
    spins: Vec<i8>,
    field: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Chain {
    pub fn new(cfg: &SamplerConfig, chain_index: usize) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window;
        let table = CouplingTable::new(cfg.params, n);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chain_index as u64);
        let mut chain = Self {
            table,
            beta: cfg.beta,
            spins: vec![1; n],
            field: vec![0.0; n],
            rng,
        };
        chain.recompute_field();
        Ok(chain)
    }

    fn recompute_field(&mut self) {
        let n = self.spins.len();
        for x in 0..n {
            let mut f = self.table.tail(x + 1) + self.table.tail(n - x);
            for y in 0..n {
                if y != x {
                    f += self.table.coupling(x.abs_diff(y)) * self.spins[y] as f64;
                }
            }
            self.field[x] = f;
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Energy change of flipping site index `x`.
    pub fn flip_cost(&self, x: usize) -> f64 {
        self.spins[x] as f64 * self.field[x]
    }

    fn flip(&mut self, x: usize) {
        self.spins[x] = -self.spins[x];
        let delta = 2.0 * self.spins[x] as f64;
        for y in 0..self.spins.len() {
            if y != x {
                self.field[y] += delta * self.table.coupling(x.abs_diff(y));
            }
        }
    }

    /// One sweep of random-site proposals; returns accepted flips.
    pub fn sweep(&mut self) -> usize {
        let n = self.spins.len();
        let mut accepted = 0;
        for _ in 0..n {
            let x = self.rng.gen_range(0..n);
            let cost = self.flip_cost(x);
            if cost <= 0.0 || self.rng.gen::<f64>() < (-self.beta * cost).exp() {
                self.flip(x);
                accepted += 1;
            }
        }
        accepted
    }
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub batches: usize,
}

impl Estimate {
    /// Pools per-chain series: each is cut into [`BATCHES`] equal batches
    /// (the remainder is dropped) and the error bar comes from the spread
    /// of all batch means.
    pub fn from_series(series: &[Vec<f64>]) -> Self {
        let mut means = Vec::new();
        let mut total = 0.0;
        let mut samples = 0u64;
        for s in series {
            total += s.iter().sum::<f64>();
            samples += s.len() as u64;
            let size = s.len() / BATCHES;
            if size == 0 {
                continue;
            }
            means.extend(
                s.chunks_exact(size)
                    .take(BATCHES)
                    .map(|b| b.iter().sum::<f64>() / size as f64),
            );
        }
        let mean = if samples > 0 { total / samples as f64 } else { f64::NAN };
        let k = means.len();
        let stderr = if k > 1 {
            let m = means.iter().sum::<f64>() / k as f64;
            let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean,
            stderr,
            samples,
            batches: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub config: SamplerConfig,
    /// Indicator of a minus spin at the origin.
    pub minus_origin: Estimate,
    /// Fraction of minus spins in the window.
    pub minus_fraction: Estimate,
    pub acceptance: f64,
    /// Visits per state (bit `i` set = site `lo + i` is minus), pooled over
    /// chains; only for windows of at most [`HISTOGRAM_MAX_SITES`] sites.
    pub histogram: Option<Vec<u64>>,
}

struct ChainRun {
    origin: Vec<f64>,
    fraction: Vec<f64>,
    event: Vec<f64>,
    inclusion_failures: u64,
    accepted: u64,
    histogram: Option<Vec<u64>>,
}

fn origin_index(cfg: &SamplerConfig) -> usize {
    (0 - cfg.window_interval().lo) as usize
}

fn run_one(
    cfg: &SamplerConfig,
    chain_index: usize,
    contour_c: Option<f64>,
    observer: &mut dyn FnMut(&[i8]),
) -> Result<ChainRun> {
    let mut chain = Chain::new(cfg, chain_index)?;
    let window = cfg.window_interval();
    let o = origin_index(cfg);
    let keep = cfg.retained() as usize;
    let mut run = ChainRun {
        origin: Vec::with_capacity(keep),
        fraction: Vec::with_capacity(keep),
        event: Vec::new(),
        inclusion_failures: 0,
        accepted: 0,
        histogram: (cfg.window <= HISTOGRAM_MAX_SITES).then(|| vec![0; 1 << cfg.window]),
    };
    for s in 0..cfg.sweeps {
        run.accepted += chain.sweep() as u64;
        if s < cfg.burn_in {
            continue;
        }
        let spins = chain.spins();
        observer(spins);
        let minus0 = spins[o] == -1;
        run.origin.push(minus0 as u8 as f64);
        let minus = spins.iter().filter(|&&v| v == -1).count();
        run.fraction.push(minus as f64 / spins.len() as f64);
        if let Some(h) = run.histogram.as_mut() {
            let state = spins
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &v)| acc | (((v == -1) as usize) << i));
            h[state] += 1;
        }
        if let Some(c) = contour_c {
            let event = if minus == 0 {
                false
            } else {
                let sigma = SpinConfiguration::new(window, spins.to_vec())?;
                let partition = decompose(&build_triangles(&sigma), c)?;
                partition.contours().iter().any(|g| g.covers(0))
            };
            if minus0 && !event {
                run.inclusion_failures += 1;
            }
            run.event.push(event as u8 as f64);
        }
    }
    Ok(run)
}

fn run_all(cfg: &SamplerConfig, contour_c: Option<f64>) -> Result<Vec<ChainRun>> {
    cfg.validate()?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|i| run_one(cfg, i, contour_c, &mut |_| {}))
        .collect()
}

fn summarize(cfg: &SamplerConfig, runs: &[ChainRun]) -> ChainSummary {
    let origin: Vec<Vec<f64>> = runs.iter().map(|r| r.origin.clone()).collect();
    let fraction: Vec<Vec<f64>> = runs.iter().map(|r| r.fraction.clone()).collect();
    let accepted: u64 = runs.iter().map(|r| r.accepted).sum();
    let proposals = cfg.sweeps as f64 * cfg.window as f64 * cfg.chains as f64;
    let histogram = runs
        .iter()
        .try_fold(vec![0u64; 1 << cfg.window.min(HISTOGRAM_MAX_SITES)], |mut acc, r| {
            let h = r.histogram.as_ref()?;
            acc.iter_mut().zip(h).for_each(|(a, b)| *a += b);
            Some(acc)
        });
    ChainSummary {
        config: *cfg,
        minus_origin: Estimate::from_series(&origin),
        minus_fraction: Estimate::from_series(&fraction),
        acceptance: accepted as f64 / proposals,
        histogram,
    }
}

/// Runs `cfg.chains` independent chains in parallel, starting all-plus.
/// Chain `i` draws from stream `i` of the seeded generator.
pub fn run_chain(cfg: &SamplerConfig) -> Result<ChainSummary> {
    let runs = run_all(cfg, None)?;
    Ok(summarize(cfg, &runs))
}

/// Single chain, calling `observer` on every retained configuration.
pub fn run_chain_observed(cfg: &SamplerConfig, chain_index: usize, mut observer: impl FnMut(&[i8])) -> Result<()> {
    cfg.validate()?;
    run_one(cfg, chain_index, None, &mut observer).map(|_| ())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourEventSummary {
    pub summary: ChainSummary,
    pub c: f64,
    /// Frequency of some contour covering the origin.
    pub event: Estimate,
    /// Samples with a minus origin but no contour over it.
    pub inclusion_failures: u64,
}

/// Like [`run_chain`], and also decomposes every retained sample into
/// contours to estimate the probability that one of them covers the origin.
pub fn contour_event_estimate(cfg: &SamplerConfig, c: f64) -> Result<ContourEventSummary> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation constant must be positive, got {c}"
        )));
    }
    let runs = run_all(cfg, Some(c))?;
    let event: Vec<Vec<f64>> = runs.iter().map(|r| r.event.clone()).collect();
    Ok(ContourEventSummary {
        summary: summarize(cfg, &runs),
        c,
        event: Estimate::from_series(&event),
        inclusion_failures: runs.iter().map(|r| r.inclusion_failures).sum(),
    })
}

/// Exact Boltzmann probabilities of all `2^n` states of a small window,
/// indexed as in [`ChainSummary::histogram`].
pub fn exact_distribution(window: usize, beta: f64, params: &ModelParams) -> Result<Vec<f64>> {
    if window == 0 || window > HISTOGRAM_MAX_SITES {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration needs 1..={HISTOGRAM_MAX_SITES} sites, got {window}"
        )));
    }
    let table = CouplingTable::new(*params, window);
    let energies: Vec<f64> = (0..1usize << window)
        .map(|state| {
            let spins: Vec<i8> = (0..window).map(|i| if state >> i & 1 == 1 { -1 } else { 1 }).collect();
            table.energy(&spins)
        })
        .collect();
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// `(1/2) sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalized histogram.
pub fn empirical_distribution(histogram: &[u64]) -> Vec<f64> {
    let n: u64 = histogram.iter().sum();
    histogram.iter().map(|&k| k as f64 / n as f64).collect()
}
