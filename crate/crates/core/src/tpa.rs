//! TPA cooling schedules.
//!
//! A single TPA run walks upward from `β_min`: at `β_i` it draws `X ~ π_{β_i}`
//! and `U ~ Uniform(0, 1)` and moves to `β_{i+1} = β_i − ln U / H̃(X)`,
//! stopping once it leaves `[β_min, β_max]` (a zero energy sends it to `+∞`).
//! In `z = ln Z` coordinates the visited points form a rate-1 Poisson process,
//! so merging `k` runs gives rate `k`, and keeping every `d`-th point yields a
//! schedule whose consecutive `z`-gaps concentrate around `d/k`.

use std::fmt;

use crate::chains::{ChainBounds, GibbsChain, MarkovChain};
use crate::error::{Error, Result};
use crate::models::Hamiltonian;
use crate::oracle::Enumeration;
use crate::rng::{self, ChainRng};

/// Default thinning parameter.
pub const DEFAULT_D: usize = 64;

/// `max(1, ⌈log₂ H̃_max⌉)`.
pub fn default_k(h_max_shifted: f64) -> usize {
    if h_max_shifted > 2.0 {
        h_max_shifted.log2().ceil() as usize
    } else {
        1
    }
}

/// Source of (approximate) draws `H̃(X)` with `X ~ π_β`.
pub trait EnergySampler {
    fn sample_energy(&mut self, beta: f64) -> Result<f64>;

    /// Markov-chain steps spent so far.
    fn steps(&self) -> u64;
}

impl<S: EnergySampler + ?Sized> EnergySampler for &mut S {
    fn sample_energy(&mut self, beta: f64) -> Result<f64> {
        (**self).sample_energy(beta)
    }
    fn steps(&self) -> u64 {
        (**self).steps()
    }
}

/// Exact draws from the enumerated energy histogram.
pub struct ExactEnergySampler<'a> {
    enumeration: &'a Enumeration,
    rng: ChainRng,
    weights: Vec<f64>,
}

impl<'a> ExactEnergySampler<'a> {
    pub fn new(enumeration: &'a Enumeration, rng: ChainRng) -> Self {
        ExactEnergySampler {
            enumeration,
            rng,
            weights: Vec::with_capacity(enumeration.histogram().len()),
        }
    }
}

impl EnergySampler for ExactEnergySampler<'_> {
    fn sample_energy(&mut self, beta: f64) -> Result<f64> {
        let hist = self.enumeration.histogram();
        let (lo, hi) = self.enumeration.energy_range();
        let peak = (-beta * lo).max(-beta * hi);
        self.weights.clear();
        self.weights
            .extend(hist.iter().map(|&(e, c)| c as f64 * (-beta * e - peak).exp()));
        Ok(hist[rng::categorical(&mut self.rng, &self.weights)].0)
    }

    fn steps(&self) -> u64 {
        0
    }
}

/// Warm-started Gibbs draws: before every draw the chain is retargeted to the
/// requested `β` and advanced `T_unif` steps, with the bounds supplied by
/// `bounds(β)`.
pub struct GibbsEnergySampler<H: Hamiltonian, B> {
    chain: GibbsChain<H>,
    bounds: B,
}

impl<H, B> GibbsEnergySampler<H, B>
where
    H: Hamiltonian,
    B: FnMut(f64) -> Result<ChainBounds>,
{
    pub fn new(chain: GibbsChain<H>, bounds: B) -> Self {
        GibbsEnergySampler { chain, bounds }
    }

    pub fn into_chain(self) -> GibbsChain<H> {
        self.chain
    }
}

impl<H, B> EnergySampler for GibbsEnergySampler<H, B>
where
    H: Hamiltonian,
    B: FnMut(f64) -> Result<ChainBounds>,
{
    fn sample_energy(&mut self, beta: f64) -> Result<f64> {
        let bounds = (self.bounds)(beta)?;
        self.chain.set_beta(beta);
        self.chain.advance(bounds.t_unif());
        Ok(self.chain.energy())
    }

    fn steps(&self) -> u64 {
        self.chain.steps()
    }
}

/// One TPA run; returns the hit points strictly inside `(β_min, β_max]`.
pub fn tpa_single_run<S: EnergySampler + ?Sized>(
    sampler: &mut S,
    beta_min: f64,
    beta_max: f64,
    rng: &mut ChainRng,
) -> Result<Vec<f64>> {
    if !(beta_min < beta_max) {
        return Err(Error::param(format!("TPA needs β_min < β_max, got [{beta_min}, {beta_max}]")));
    }
    let mut beta = beta_min;
    let mut points = Vec::new();
    loop {
        let h = sampler.sample_energy(beta)?;
        if h < 0.0 {
            return Err(Error::param(format!("TPA needs a nonnegative Hamiltonian, drew {h}")));
        }
        if h == 0.0 {
            break;
        }
        let next = beta - rng::uniform_open(rng).ln() / h;
        if next > beta_max {
            break;
        }
        if next > beta {
            points.push(next);
        }
        beta = next;
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact,
    Gibbs,
    Grid,
    Trivial,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Gibbs => "gibbs",
            Backend::Grid => "grid",
            Backend::Trivial => "trivial",
        })
    }
}

/// Increasing inverse temperatures `β_0 < β_1 < … < β_ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    betas: Vec<f64>,
    pub k: usize,
    pub d: usize,
    pub backend: Backend,
}

impl Schedule {
    pub fn new(betas: Vec<f64>, k: usize, d: usize, backend: Backend) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::param("a schedule needs at least two inverse temperatures"));
        }
        if betas.windows(2).any(|w| !(w[0] < w[1])) || betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("schedule must be finite and strictly increasing"));
        }
        Ok(Schedule { betas, k, d, backend })
    }

    /// The empty schedule `β_min = β_max = beta`, with no intervals to estimate.
    pub fn trivial(beta: f64, k: usize, d: usize) -> Self {
        Schedule { betas: vec![beta, beta], k, d, backend: Backend::Trivial }
    }

    /// `ℓ` equal intervals; a debugging aid.
    pub fn uniform_grid(beta_min: f64, beta_max: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("grid needs at least one interval"));
        }
        let step = (beta_max - beta_min) / len as f64;
        let mut betas: Vec<f64> = (0..len).map(|i| beta_min + step * i as f64).collect();
        betas.push(beta_max);
        Schedule::new(betas, 0, 0, Backend::Grid)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `ℓ`, the number of intervals.
    pub fn len(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn beta_min(&self) -> f64 {
        self.betas[0]
    }

    pub fn beta_max(&self) -> f64 {
        self.betas[self.betas.len() - 1]
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.betas.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn delta_max(&self) -> f64 {
        self.deltas().into_iter().fold(0.0, f64::max)
    }

    /// `Δ = β_ℓ − β_0`.
    pub fn total(&self) -> f64 {
        self.beta_max() - self.beta_min()
    }
}

/// TPA(k, d): merges `k` independent runs (run `r` draws its uniforms from
/// stream `[r]` of `seed`, its energies from `sampler_for_run(r)`), sorts the
/// points, keeps one uniformly placed point among the first `d` and every
/// `d`-th after it, and adds both endpoints. Returns the schedule and the
/// Markov-chain steps spent by the samplers.
pub fn tpa_schedule<S, F>(
    beta_min: f64,
    beta_max: f64,
    k: usize,
    d: usize,
    mut sampler_for_run: F,
    seed: u64,
    backend: Backend,
) -> Result<(Schedule, u64)>
where
    S: EnergySampler,
    F: FnMut(usize) -> S,
{
    if k == 0 || d == 0 {
        return Err(Error::param(format!("TPA needs k ≥ 1 and d ≥ 1, got k={k}, d={d}")));
    }
    let mut points: Vec<(f64, usize, usize)> = Vec::new();
    let mut steps = 0;
    for run in 0..k {
        let mut sampler = sampler_for_run(run);
        let mut u = rng::stream(seed, &[run as u64]);
        let hits = tpa_single_run(&mut sampler, beta_min, beta_max, &mut u)?;
        steps += sampler.steps();
        points.extend(hits.into_iter().enumerate().map(|(j, b)| (b, run, j)));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pick = rng::stream(seed, &[u64::MAX]);
    let offset = rng::index(&mut pick, d);
    let mut betas = vec![beta_min];
    for &(b, _, _) in points.iter().skip(offset).step_by(d) {
        if b > betas[betas.len() - 1] && b < beta_max {
            betas.push(b);
        }
    }
    betas.push(beta_max);
    Ok((Schedule::new(betas, k, d, backend)?, steps))
}
