//! Markov chains targeting Gibbs distributions.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::Hamiltonian;
use crate::rng::{self, ChainRng};

pub trait MarkovChain {
    type State: Clone;

    /// One transition.
    fn step(&mut self);

    /// Transitions taken so far.
    fn steps(&self) -> u64;

    fn snapshot(&self) -> Self::State;

    fn set_state(&mut self, state: Self::State) -> Result<()>;

    fn advance(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }
}

/// Shared step counter. Chains holding a meter add their step counts to it
/// when they are dropped (or on [`GibbsChain::flush_meter`]).
#[derive(Clone, Debug, Default)]
pub struct StepMeter(Arc<AtomicU64>);

impl StepMeter {
    pub fn new() -> Self {
        StepMeter::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn total(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

// ---------------------------------------------------------------------------
// Single-site Gibbs sampler
// ---------------------------------------------------------------------------

/// Glauber dynamics: pick a site uniformly, resample it from its full
/// conditional under `π_β` (the value may stay the same).
pub struct GibbsChain<H: Hamiltonian> {
    model: H,
    beta: f64,
    state: Vec<u8>,
    energy: f64,
    rng: ChainRng,
    steps: u64,
    flushed: u64,
    meter: Option<StepMeter>,
    energies: Vec<f64>,
    weights: Vec<f64>,
}

impl<H: Hamiltonian> GibbsChain<H> {
    pub fn new(model: H, beta: f64, start: Vec<u8>, rng: ChainRng) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::param(format!("inverse temperature {beta} is not finite")));
        }
        model.space().validate(&start)?;
        let width = model.space().max_domain_size();
        let energy = model.energy(&start);
        Ok(GibbsChain {
            model,
            beta,
            state: start,
            energy,
            rng,
            steps: 0,
            flushed: 0,
            meter: None,
            energies: vec![0.0; width],
            weights: vec![0.0; width],
        })
    }

    /// Chain started from the all-first-label state.
    pub fn from_zero(model: H, beta: f64, rng: ChainRng) -> Result<Self> {
        let start = model.space().zero_state();
        GibbsChain::new(model, beta, start, rng)
    }

    pub fn with_meter(mut self, meter: StepMeter) -> Self {
        self.meter = Some(meter);
        self
    }

    pub fn model(&self) -> &H {
        &self.model
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    /// Energy of the current state.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Retargets the chain to `π_beta`, keeping its current state.
    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
    }

    pub fn flush_meter(&mut self) {
        if let Some(meter) = &self.meter {
            meter.add(self.steps - self.flushed);
            self.flushed = self.steps;
        }
    }
}

impl<H: Hamiltonian> MarkovChain for GibbsChain<H> {
    type State = Vec<u8>;

    fn step(&mut self) {
        let n = self.state.len();
        self.steps += 1;
        if n == 0 {
            return;
        }
        let site = rng::index(&mut self.rng, n);
        let q = self.model.space().domain_size(site);
        self.model
            .local_energies(&mut self.state, site, self.energy, &mut self.energies);
        let v = if q == 2 {
            let p0 = 1.0 / (1.0 + (-self.beta * (self.energies[1] - self.energies[0])).exp());
            usize::from(rng::uniform01(&mut self.rng) >= p0)
        } else {
            let e_min = self.energies[..q].iter().copied().fold(f64::INFINITY, f64::min);
            for v in 0..q {
                self.weights[v] = (-self.beta * (self.energies[v] - e_min)).exp();
            }
            rng::categorical(&mut self.rng, &self.weights[..q])
        };
        self.state[site] = v as u8;
        self.energy = self.energies[v];
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn snapshot(&self) -> Vec<u8> {
        self.state.clone()
    }

    fn set_state(&mut self, state: Vec<u8>) -> Result<()> {
        self.model.space().validate(&state)?;
        self.energy = self.model.energy(&state);
        self.state = state;
        Ok(())
    }
}

impl<H: Hamiltonian> Drop for GibbsChain<H> {
    fn drop(&mut self) {
        self.flush_meter();
    }
}

// ---------------------------------------------------------------------------
// Explicit transition matrix
// ---------------------------------------------------------------------------

/// Chain on `0..n` driven by an explicit row-stochastic matrix.
#[derive(Clone, Debug)]
pub struct MatrixChain {
    rows: Vec<Vec<f64>>,
    state: usize,
    rng: ChainRng,
    steps: u64,
}

impl MatrixChain {
    pub fn new(rows: Vec<Vec<f64>>, start: usize, rng: ChainRng) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("transition matrix is empty"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::param(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::param(format!("row {i} is not a probability vector")));
            }
        }
        if start >= n {
            return Err(Error::InvalidState(format!("start state {start} outside 0..{n}")));
        }
        Ok(MatrixChain { rows, state: start, rng, steps: 0 })
    }

    /// The chain `[[1−p, p], [q, 1−q]]`.
    pub fn two_state(p: f64, q: f64, start: usize, rng: ChainRng) -> Result<Self> {
        MatrixChain::new(vec![vec![1.0 - p, p], vec![q, 1.0 - q]], start, rng)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl MarkovChain for MatrixChain {
    type State = usize;

    fn step(&mut self) {
        self.state = rng::categorical(&mut self.rng, &self.rows[self.state]);
        self.steps += 1;
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn snapshot(&self) -> usize {
        self.state
    }

    fn set_state(&mut self, state: usize) -> Result<()> {
        if state >= self.rows.len() {
            return Err(Error::InvalidState(format!("state {state} outside 0..{}", self.rows.len())));
        }
        self.state = state;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Product chain
// ---------------------------------------------------------------------------

/// Product of component chains: each transition picks component `i` with
/// probability `ω_i` and advances only that component.
pub struct ProductChain<C> {
    components: Vec<C>,
    weights: Vec<f64>,
    uniform: bool,
    rng: ChainRng,
    steps: u64,
    last: usize,
}

impl<C: MarkovChain> ProductChain<C> {
    pub fn new(components: Vec<C>, weights: Vec<f64>, rng: ChainRng) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::param("product chain needs at least one component"));
        }
        if weights.len() != components.len() {
            return Err(Error::param(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param("product weights must form a probability vector"));
        }
        let uniform = weights.iter().all(|&w| w == weights[0]);
        Ok(ProductChain { components, weights, uniform, rng, steps: 0, last: 0 })
    }

    pub fn uniform(components: Vec<C>, rng: ChainRng) -> Result<Self> {
        let l = components.len();
        ProductChain::new(components, vec![1.0 / l as f64; l], rng)
    }

    pub fn components(&self) -> &[C] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [C] {
        &mut self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the component advanced by the latest transition.
    pub fn last_advanced(&self) -> usize {
        self.last
    }

    pub fn into_components(self) -> Vec<C> {
        self.components
    }
}

impl<C: MarkovChain> MarkovChain for ProductChain<C> {
    type State = Vec<C::State>;

    fn step(&mut self) {
        let i = if self.uniform {
            rng::index(&mut self.rng, self.components.len())
        } else {
            rng::categorical(&mut self.rng, &self.weights)
        };
        self.components[i].step();
        self.last = i;
        self.steps += 1;
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn snapshot(&self) -> Self::State {
        self.components.iter().map(MarkovChain::snapshot).collect()
    }

    fn set_state(&mut self, state: Self::State) -> Result<()> {
        if state.len() != self.components.len() {
            return Err(Error::InvalidState(format!(
                "joint state has {} parts, product has {} components",
                state.len(),
                self.components.len()
            )));
        }
        for (c, s) in self.components.iter_mut().zip(state) {
            c.set_state(s)?;
        }
        Ok(())
    }
}

/// The states visited after each of `length` transitions from `start`.
pub fn run_trace<C: MarkovChain>(chain: &mut C, start: C::State, length: usize) -> Result<Vec<C::State>> {
    if length == 0 {
        return Err(Error::EmptyTrace);
    }
    chain.set_state(start)?;
    Ok((0..length)
        .map(|_| {
            chain.step();
            chain.snapshot()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Spectral bounds
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    User,
    Oracle,
}

/// A-priori convergence data for a chain: `Λ` bounds the second-largest
/// absolute eigenvalue, `T` bounds `max(τ_rx, τ_mix)`, `π_min` bounds the
/// smallest stationary mass from below.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainBounds {
    pub lambda: f64,
    pub t: f64,
    pub pi_min: f64,
    pub provenance: Provenance,
}

impl ChainBounds {
    pub fn new(lambda: f64, t: f64, pi_min: f64, provenance: Provenance) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::param(format!("eigenvalue bound {lambda} outside [0, 1)")));
        }
        if !(t >= 1.0) || !t.is_finite() {
            return Err(Error::param(format!("time bound {t} must be a finite value ≥ 1")));
        }
        if !(pi_min > 0.0 && pi_min <= 1.0) {
            return Err(Error::param(format!("stationary mass bound {pi_min} outside (0, 1]")));
        }
        Ok(ChainBounds { lambda, t, pi_min, provenance })
    }

    pub fn user(lambda: f64, t: f64, pi_min: f64) -> Result<Self> {
        ChainBounds::new(lambda, t, pi_min, Provenance::User)
    }

    /// `1 / (1 − Λ)`.
    pub fn relaxation_time(&self) -> f64 {
        1.0 / (1.0 - self.lambda)
    }

    /// Warm-start length `⌈T · ln(1/π_min)⌉`.
    pub fn t_unif(&self) -> u64 {
        warm_start_steps(self.t, self.pi_min)
    }

    /// Bounds for the uniformly weighted product of chains whose transition
    /// matrices are positive semidefinite (true of heat-bath Glauber chains):
    /// every product eigenvalue is `1 − (1 − λ_i)/ℓ`, so
    /// `Λ⊗ = 1 − (1 − max Λ_i)/ℓ`, and `π_min⊗ = Π π_min,i`.
    pub fn uniform_product(parts: &[ChainBounds]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::param("product of zero chains"));
        }
        let l = parts.len() as f64;
        let lambda_max = parts.iter().map(|b| b.lambda).fold(0.0, f64::max);
        let lambda = 1.0 - (1.0 - lambda_max) / l;
        let t_max = parts.iter().map(|b| b.t).fold(1.0, f64::max);
        let log_pi: f64 = parts.iter().map(|b| b.pi_min.ln()).sum();
        let provenance = if parts.iter().all(|b| b.provenance == Provenance::Oracle) {
            Provenance::Oracle
        } else {
            Provenance::User
        };
        Ok(ChainBounds {
            lambda,
            t: l * t_max,
            pi_min: log_pi.exp().max(f64::MIN_POSITIVE),
            provenance,
        })
    }
}

/// `⌈t · ln(1/π_min)⌉`.
pub fn warm_start_steps(t: f64, pi_min: f64) -> u64 {
    (t * (1.0 / pi_min).ln()).ceil().max(0.0) as u64
}

/// Runs the chain for `T_unif` steps and returns the resulting state.
pub fn approx_sample<C: MarkovChain>(chain: &mut C, bounds: &ChainBounds) -> C::State {
    chain.advance(bounds.t_unif());
    chain.snapshot()
}
