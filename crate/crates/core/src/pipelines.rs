//! End-to-end partition-function estimators.
//!
//! Every method works on the shifted Hamiltonian `H̃ = H − H_min ≥ 0`, builds
//! a TPA(k, d) schedule from `β_min = 0` to `β_max`, estimates
//! `Q = Z̃(0)/Z̃(β_max)`, and reports `Z(β_max) = |Ω| / Q̂ · exp(−β_max H_min)`.
//!
//! - [`Method::Super`]: one adaptive mean estimate for `F = Π f_i` over the
//!   product of the chains at `β_0..β_{ℓ−1}` and one for `G = Π g_i` over the
//!   product at `β_1..β_ℓ`, each at precision `ε/(2+ε)` and confidence `δ/2`.
//! - [`Method::Parallel`]: an adaptive estimate per `f_i` (chain at `β_i`) and
//!   per `g_i` (chain at `β_{i+1}`), each at precision
//!   `((1+ε)^{1/ℓ} − 1)/((1+ε)^{1/ℓ} + 1)` and confidence `δ/2ℓ`.
//! - [`Method::Baseline`]: a fixed number of approximately independent samples
//!   of `F` and `G`, each drawn after `T_unif` steps of every component chain.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::chains::{ChainBounds, GibbsChain, MarkovChain, ProductChain, StepMeter};
use crate::error::{Error, Result};
use crate::estimators::TensorEstimator;
use crate::meanest::{rel_mean_est, MeanEstConfig, MeanEstimate, Observable};
use crate::models::{restore_partition, shifted_hamiltonian, Hamiltonian, OffsetHamiltonian};
use crate::oracle::{Enumeration, DEFAULT_CAP, SPECTRAL_CAP};
use crate::rng::{self, ChainRng};
use crate::tpa::{self, Backend, ExactEnergySampler, GibbsEnergySampler, Schedule};

const TPA_CHAINS: u64 = 1;
const TPA_UNIFORMS: u64 = 2;
const SUPER_STREAM: u64 = 3;
const PARALLEL_STREAM: u64 = 4;
const BASELINE_STREAM: u64 = 5;

/// Grid size used to bound mixing uniformly over the TPA range.
const TPA_BOUND_GRID: usize = 17;

/// Exponent of the Chernoff bound `P(Bin(g, 1/4) ≥ g/2) ≤ exp(−g·KL(1/2 ‖ 1/4))`.
const MEDIAN_KL: f64 = 0.143_841_036_225_890_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Super,
    Parallel,
    Baseline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Super, Method::Parallel, Method::Baseline];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Super => "super",
            Method::Parallel => "parallel",
            Method::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "super" => Ok(Method::Super),
            "parallel" => Ok(Method::Parallel),
            "baseline" => Ok(Method::Baseline),
            other => Err(Error::param(format!("unknown method {other:?} (expected super, parallel or baseline)"))),
        }
    }
}

/// Where chain bounds come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundsSource {
    /// Exact spectra of the Glauber chains (state spaces up to 4096).
    Oracle,
    /// The same user-supplied bounds at every inverse temperature.
    Manual(ChainBounds),
}

impl FromStr for BoundsSource {
    type Err = Error;

    /// `oracle` or `manual:<Λ>,<T>,<π_min>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            return Ok(BoundsSource::Oracle);
        }
        let Some(rest) = s.strip_prefix("manual:") else {
            return Err(Error::param(format!("bounds {s:?} must be `oracle` or `manual:Λ,T,π_min`")));
        };
        let parts = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| Error::param(format!("bad number {p:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        match parts.as_slice() {
            &[lambda, t, pi_min] => Ok(BoundsSource::Manual(ChainBounds::user(lambda, t, pi_min)?)),
            _ => Err(Error::param(format!("manual bounds need three values, got {}", parts.len()))),
        }
    }
}

/// How TPA draws its samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpaSampling {
    /// Warm-started Gibbs chains (counted in `m̂`).
    Gibbs,
    /// Exact draws from the enumerated distribution.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub beta_min: f64,
    pub beta_max: f64,
    pub eps: f64,
    pub delta: f64,
    /// TPA run count; `max(1, ⌈log₂ H̃_max⌉)` when `None`.
    pub k: Option<usize>,
    pub d: usize,
    /// Geometric ratio of the adaptive sample schedule.
    pub ratio: f64,
    pub seed: u64,
    pub tpa_sampling: TpaSampling,
    /// Trace length for the adaptive estimator; derived from `Λ` when `None`.
    pub trace_length: Option<u64>,
    /// Assumed bound on `V_rel[F]` and `V_rel[G]` for the baseline.
    pub baseline_vrel: f64,
}

impl PipelineConfig {
    pub fn new(method: Method, beta_max: f64, eps: f64, delta: f64, seed: u64) -> Self {
        PipelineConfig {
            method,
            beta_min: 0.0,
            beta_max,
            eps,
            delta,
            k: None,
            d: tpa::DEFAULT_D,
            ratio: 1.1,
            seed,
            tpa_sampling: TpaSampling::Gibbs,
            trace_length: None,
            baseline_vrel: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_min != 0.0 {
            return Err(Error::param(format!(
                "β_min must be 0 so that Z(β_min) = |Ω| is known exactly, got {}",
                self.beta_min
            )));
        }
        if !(self.beta_max >= self.beta_min) || !self.beta_max.is_finite() {
            return Err(Error::param(format!("β_max = {} must be finite and ≥ β_min", self.beta_max)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("ε = {} outside (0, 1)", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("δ = {} outside (0, 1)", self.delta)));
        }
        if self.k == Some(0) || self.d == 0 {
            return Err(Error::param("TPA needs k ≥ 1 and d ≥ 1"));
        }
        if !(self.ratio > 1.0) {
            return Err(Error::param(format!("ratio r = {} must exceed 1", self.ratio)));
        }
        if !(self.baseline_vrel > 0.0) {
            return Err(Error::param("baseline variance bound must be positive"));
        }
        Ok(())
    }
}

/// Chain bounds per inverse temperature, cached.
pub struct BoundsProvider {
    source: BoundsSource,
    enumeration: Option<Enumeration>,
    cache: Mutex<HashMap<u64, ChainBounds>>,
}

impl BoundsProvider {
    pub fn new<H: Hamiltonian + ?Sized>(model: &H, source: BoundsSource) -> Result<Self> {
        let enumeration = match source {
            BoundsSource::Oracle => {
                let states = model.space().state_count();
                if states > u128::from(SPECTRAL_CAP) {
                    return Err(Error::BoundsUnavailable(format!(
                        "{states} states exceed the oracle limit of {SPECTRAL_CAP}; supply manual bounds"
                    )));
                }
                Some(Enumeration::new(model, SPECTRAL_CAP)?)
            }
            BoundsSource::Manual(_) => None,
        };
        Ok(BoundsProvider { source, enumeration, cache: Mutex::new(HashMap::new()) })
    }

    pub fn source(&self) -> BoundsSource {
        self.source
    }

    pub fn at(&self, beta: f64) -> Result<ChainBounds> {
        match (self.source, &self.enumeration) {
            (BoundsSource::Manual(b), _) => Ok(b),
            (BoundsSource::Oracle, Some(en)) => {
                if let Some(b) = self.cache.lock().expect("bounds cache poisoned").get(&beta.to_bits()) {
                    return Ok(*b);
                }
                let b = en.chain_bounds(beta)?;
                self.cache.lock().expect("bounds cache poisoned").insert(beta.to_bits(), b);
                Ok(b)
            }
            (BoundsSource::Oracle, None) => unreachable!("oracle bounds always hold an enumeration"),
        }
    }

    /// Worst-case bounds over an evenly spaced grid of `[lo, hi]`.
    pub fn uniform_over(&self, lo: f64, hi: f64) -> Result<ChainBounds> {
        let mut worst = self.at(lo)?;
        for i in 1..TPA_BOUND_GRID {
            let beta = lo + (hi - lo) * i as f64 / (TPA_BOUND_GRID - 1) as f64;
            let b = self.at(beta)?;
            worst.lambda = worst.lambda.max(b.lambda);
            worst.t = worst.t.max(b.t);
            worst.pi_min = worst.pi_min.min(b.pi_min);
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub beta_max: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// Estimate of `Q = Z̃(β_min)/Z̃(β_max)`.
    pub q_hat: f64,
    /// `Ẑ(β_max)` for the shifted Hamiltonian.
    pub z_hat_shifted: f64,
    /// `Ẑ(β_max)` for the original Hamiltonian.
    pub z_hat: f64,
    pub log_z_hat: f64,
    /// The constant `c = −H_min` added to the Hamiltonian.
    pub offset: f64,
    /// `(μ̂, ν̂)`, one pair per interval for the parallel method, a single
    /// pair for the others.
    pub means: Vec<(f64, f64)>,
    /// `m̂`: TPA and estimator steps together.
    pub steps: u64,
    pub tpa_steps: u64,
    /// Steps counted by a shared meter attached to every chain.
    pub metered_steps: u64,
    pub schedule: Schedule,
    /// Certified relative error of `Q̂` (the requested `ε` for the baseline).
    pub certified_eps: f64,
    pub cap_hit: bool,
    pub wall_ms: f64,
    /// Adaptive estimator runs, in order (`F` then `G`, or `f_0, g_0, f_1, …`).
    pub runs: Vec<MeanEstimate>,
}

/// The fixed sample counts and step totals of a baseline run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselinePlan {
    pub samples: u64,
    /// Number of median-of-means groups (1 for a plain mean).
    pub groups: u64,
    pub steps: u64,
}

/// Sample count for one baseline estimator at precision `eps` and
/// confidence `delta` given `V_rel ≤ vrel`: the cheaper of Chebyshev
/// (`vrel/(ε²δ)`) and median-of-means (odd `⌈ln(1/δ)/KL⌉` groups of
/// `⌈4 vrel/ε²⌉`).
pub fn baseline_sample_count(vrel: f64, eps: f64, delta: f64) -> (u64, u64) {
    let chebyshev = (vrel / (eps * eps * delta)).ceil() as u64;
    let mut groups = ((1.0 / delta).ln() / MEDIAN_KL).ceil().max(1.0) as u64;
    if groups.is_multiple_of(2) {
        groups += 1;
    }
    let per_group = (4.0 * vrel / (eps * eps)).ceil() as u64;
    if groups * per_group < chebyshev {
        (groups * per_group, groups)
    } else {
        (chebyshev, 1)
    }
}

fn split_precision(eps: f64) -> f64 {
    eps / (2.0 + eps)
}

/// Per-estimator precision of the parallel method.
pub fn parallel_precision(eps: f64, len: usize) -> f64 {
    let root = (1.0 + eps).powf(1.0 / len as f64);
    (root - 1.0) / (root + 1.0)
}

/// Steps a baseline run will take on a given schedule.
pub fn baseline_plan(cfg: &PipelineConfig, schedule: &Schedule, bounds: &BoundsProvider) -> Result<BaselinePlan> {
    let (samples, groups) = baseline_sample_count(cfg.baseline_vrel, split_precision(cfg.eps), cfg.delta / 2.0);
    let betas = schedule.betas();
    let l = schedule.len();
    let mut per_sample = 0u64;
    for &b in &betas[..l] {
        per_sample += bounds.at(b)?.t_unif();
    }
    for &b in &betas[1..] {
        per_sample += bounds.at(b)?.t_unif();
    }
    Ok(BaselinePlan { samples, groups, steps: samples * per_sample })
}

type Shifted<'m, M> = OffsetHamiltonian<&'m M>;

/// Runs the configured method, building bounds from `source`.
pub fn estimate<M: Hamiltonian>(model: &M, cfg: &PipelineConfig, source: BoundsSource) -> Result<EstimateReport> {
    let bounds = BoundsProvider::new(model, source)?;
    estimate_with(model, cfg, &bounds)
}

pub fn superchain_trace_gibbs<M: Hamiltonian>(model: &M, cfg: &PipelineConfig, source: BoundsSource) -> Result<EstimateReport> {
    estimate(model, &PipelineConfig { method: Method::Super, ..cfg.clone() }, source)
}

pub fn parallel_trace_gibbs<M: Hamiltonian>(model: &M, cfg: &PipelineConfig, source: BoundsSource) -> Result<EstimateReport> {
    estimate(model, &PipelineConfig { method: Method::Parallel, ..cfg.clone() }, source)
}

pub fn baseline_tpa_ppe<M: Hamiltonian>(model: &M, cfg: &PipelineConfig, source: BoundsSource) -> Result<EstimateReport> {
    estimate(model, &PipelineConfig { method: Method::Baseline, ..cfg.clone() }, source)
}

/// Builds the TPA schedule the pipeline would use; returns it with its step cost.
pub fn pipeline_schedule<M: Hamiltonian>(
    model: &M,
    cfg: &PipelineConfig,
    bounds: &BoundsProvider,
    meter: &StepMeter,
) -> Result<(Schedule, u64)> {
    cfg.validate()?;
    let shifted = shifted_hamiltonian(model);
    schedule_for(&shifted, cfg, bounds, meter)
}

fn schedule_for<M: Hamiltonian>(
    shifted: &Shifted<'_, M>,
    cfg: &PipelineConfig,
    bounds: &BoundsProvider,
    meter: &StepMeter,
) -> Result<(Schedule, u64)> {
    let (_, h_max) = shifted.energy_range();
    let k = cfg.k.unwrap_or_else(|| tpa::default_k(h_max));
    if cfg.beta_max == cfg.beta_min {
        return Ok((Schedule::trivial(cfg.beta_min, k, cfg.d), 0));
    }
    let uniform_seed = rng::derive_seed(cfg.seed, &[TPA_UNIFORMS]);
    match cfg.tpa_sampling {
        TpaSampling::Gibbs => {
            let b = bounds.uniform_over(cfg.beta_min, cfg.beta_max)?;
            tpa::tpa_schedule(
                cfg.beta_min,
                cfg.beta_max,
                k,
                cfg.d,
                |run| {
                    let chain = GibbsChain::from_zero(shifted, cfg.beta_min, rng::stream(cfg.seed, &[TPA_CHAINS, run as u64]))
                        .expect("the zero state is valid")
                        .with_meter(meter.clone());
                    GibbsEnergySampler::new(chain, move |_| Ok(b))
                },
                uniform_seed,
                Backend::Gibbs,
            )
        }
        TpaSampling::Exact => {
            let en = Enumeration::new(shifted, DEFAULT_CAP)?;
            tpa::tpa_schedule(
                cfg.beta_min,
                cfg.beta_max,
                k,
                cfg.d,
                |run| ExactEnergySampler::new(&en, rng::stream(cfg.seed, &[TPA_CHAINS, run as u64])),
                uniform_seed,
                Backend::Exact,
            )
        }
    }
}

/// Runs the configured method with a shared bounds provider.
pub fn estimate_with<M: Hamiltonian>(model: &M, cfg: &PipelineConfig, bounds: &BoundsProvider) -> Result<EstimateReport> {
    cfg.validate()?;
    let start = Instant::now();
    let shifted = shifted_hamiltonian(model);
    let offset = shifted.offset();
    let meter = StepMeter::new();
    let states = model.space().state_count() as f64;

    let finish = |q_hat: f64,
                  means: Vec<(f64, f64)>,
                  steps: u64,
                  tpa_steps: u64,
                  schedule: Schedule,
                  certified_eps: f64,
                  cap_hit: bool,
                  runs: Vec<MeanEstimate>| {
        let z_hat_shifted = states / q_hat;
        EstimateReport {
            method: cfg.method,
            beta_max: cfg.beta_max,
            eps: cfg.eps,
            delta: cfg.delta,
            seed: cfg.seed,
            q_hat,
            z_hat_shifted,
            z_hat: restore_partition(z_hat_shifted, cfg.beta_max, offset),
            log_z_hat: states.ln() - q_hat.ln() + cfg.beta_max * offset,
            offset,
            means,
            steps,
            tpa_steps,
            metered_steps: meter.total(),
            schedule,
            certified_eps,
            cap_hit,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            runs,
        }
    };

    let (schedule, tpa_steps) = schedule_for(&shifted, cfg, bounds, &meter)?;
    if schedule.backend == Backend::Trivial {
        return Ok(finish(1.0, vec![(1.0, 1.0)], 0, 0, schedule, 0.0, false, Vec::new()));
    }
    let (h_min, h_max) = shifted.energy_range();
    let tensor = TensorEstimator::new(&schedule, h_min, h_max);

    match cfg.method {
        Method::Super => {
            let eps = split_precision(cfg.eps);
            let delta = cfg.delta / 2.0;
            let l = schedule.len();
            let betas = schedule.betas();
            let (af, bf) = tensor.range_f();
            let (ag, bg) = tensor.range_g();
            let f_run = super_side(&shifted, &tensor, &betas[..l], (af, bf), false, eps, delta, cfg, bounds, &meter)?;
            let g_run = super_side(&shifted, &tensor, &betas[1..], (ag, bg), true, eps, delta, cfg, bounds, &meter)?;
            let q_hat = g_run.mean / f_run.mean;
            let certified = ratio_error(&[(&f_run, &g_run)]);
            let cap_hit = f_run.cap_hit || g_run.cap_hit;
            let steps = tpa_steps + f_run.steps + g_run.steps;
            let means = vec![(f_run.mean, g_run.mean)];
            Ok(finish(q_hat, means, steps, tpa_steps, schedule, certified, cap_hit, vec![f_run, g_run]))
        }
        Method::Parallel => {
            let l = schedule.len();
            let eps = parallel_precision(cfg.eps, l);
            let delta = cfg.delta / (2.0 * l as f64);
            let tasks: Vec<(usize, bool)> = (0..l).flat_map(|i| [(i, false), (i, true)]).collect();
            let runs = tasks
                .par_iter()
                .map(|&(i, is_g)| {
                    let pair = tensor.pairs()[i];
                    let (beta, (a, b)) = if is_g { (pair.beta_hi, pair.range_g()) } else { (pair.beta_lo, pair.range_f()) };
                    let coef = if is_g { pair.half_width() } else { -pair.half_width() };
                    let cb = bounds.at(beta)?;
                    let mc = MeanEstConfig {
                        lambda: cb.lambda,
                        a,
                        b,
                        eps,
                        delta,
                        ratio: cfg.ratio,
                        pi_min: cb.pi_min,
                        trace_length: cfg.trace_length,
                    };
                    let path = |copy: u64| rng::stream(cfg.seed, &[PARALLEL_STREAM, i as u64, u64::from(is_g), copy]);
                    let mut copies = [0u64, 1].map(|c| {
                        let chain = GibbsChain::from_zero(&shifted, beta, path(c))
                            .expect("the zero state is valid")
                            .with_meter(meter.clone());
                        SingleObservable { chain, coef }
                    });
                    let [x, y] = &mut copies;
                    rel_mean_est(x, y, &mc)
                })
                .collect::<Result<Vec<MeanEstimate>>>()?;
            let pairs: Vec<(&MeanEstimate, &MeanEstimate)> = runs.chunks(2).map(|c| (&c[0], &c[1])).collect();
            let q_hat = pairs.iter().map(|(f, g)| g.mean / f.mean).product();
            let certified = ratio_error(&pairs);
            let cap_hit = runs.iter().any(|r| r.cap_hit);
            let means = pairs.iter().map(|(f, g)| (f.mean, g.mean)).collect();
            let steps = tpa_steps + runs.iter().map(|r| r.steps).sum::<u64>();
            Ok(finish(q_hat, means, steps, tpa_steps, schedule, certified, cap_hit, runs))
        }
        Method::Baseline => {
            let plan = baseline_plan(cfg, &schedule, bounds)?;
            let l = schedule.len();
            let betas = schedule.betas();
            let (mu, mu_steps) = baseline_side(&shifted, &tensor, &betas[..l], false, plan, cfg, bounds, &meter)?;
            let (nu, nu_steps) = baseline_side(&shifted, &tensor, &betas[1..], true, plan, cfg, bounds, &meter)?;
            let steps = tpa_steps + mu_steps + nu_steps;
            Ok(finish(nu / mu, vec![(mu, nu)], steps, tpa_steps, schedule, cfg.eps, false, Vec::new()))
        }
    }
}

/// Certified relative error of `Π ν̂_i/μ̂_i` from per-estimate errors.
fn ratio_error(pairs: &[(&MeanEstimate, &MeanEstimate)]) -> f64 {
    let mut up = 1.0;
    let mut down = 1.0;
    for (f, g) in pairs {
        up *= (1.0 + g.rel_err) / (1.0 - f.rel_err).max(f64::MIN_POSITIVE);
        down *= (1.0 - g.rel_err).max(0.0) / (1.0 + f.rel_err);
    }
    (up - 1.0).max(1.0 - down)
}

/// A single Gibbs chain observed through `exp(coef · H̃)`.
struct SingleObservable<'a, M: Hamiltonian> {
    chain: GibbsChain<&'a Shifted<'a, M>>,
    coef: f64,
}

impl<M: Hamiltonian> Observable for SingleObservable<'_, M> {
    fn advance(&mut self) -> f64 {
        self.chain.step();
        (self.coef * self.chain.energy()).exp()
    }

    fn burn(&mut self, n: u64) {
        self.chain.advance(n);
    }
}

/// A product chain observed through `exp(Σ coef_i · H̃(x_i))`.
struct ProductObservable<'a, M: Hamiltonian> {
    chain: ProductChain<GibbsChain<&'a Shifted<'a, M>>>,
    coefs: Vec<f64>,
}

impl<M: Hamiltonian> ProductObservable<'_, M> {
    fn value(&self) -> f64 {
        self.chain
            .components()
            .iter()
            .zip(&self.coefs)
            .map(|(c, k)| k * c.energy())
            .sum::<f64>()
            .exp()
    }
}

impl<M: Hamiltonian> Observable for ProductObservable<'_, M> {
    fn advance(&mut self) -> f64 {
        self.chain.step();
        self.value()
    }

    fn burn(&mut self, n: u64) {
        self.chain.advance(n);
    }
}

#[allow(clippy::too_many_arguments)]
fn super_side<'a, M: Hamiltonian>(
    shifted: &'a Shifted<'a, M>,
    tensor: &TensorEstimator,
    betas: &[f64],
    (a, b): (f64, f64),
    is_g: bool,
    eps: f64,
    delta: f64,
    cfg: &PipelineConfig,
    bounds: &BoundsProvider,
    meter: &StepMeter,
) -> Result<MeanEstimate> {
    let parts = betas.iter().map(|&beta| bounds.at(beta)).collect::<Result<Vec<_>>>()?;
    let product = ChainBounds::uniform_product(&parts)?;
    let sign = if is_g { 1.0 } else { -1.0 };
    let coefs: Vec<f64> = tensor.pairs().iter().map(|p| sign * p.half_width()).collect();
    let side = u64::from(is_g);
    let build = |copy: u64| -> Result<ProductObservable<'a, M>> {
        let comps = betas
            .iter()
            .enumerate()
            .map(|(i, &beta)| {
                Ok(GibbsChain::from_zero(shifted, beta, rng::stream(cfg.seed, &[SUPER_STREAM, side, copy, i as u64]))?
                    .with_meter(meter.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let chain = ProductChain::uniform(comps, rng::stream(cfg.seed, &[SUPER_STREAM, side, copy, u64::MAX]))?;
        Ok(ProductObservable { chain, coefs: coefs.clone() })
    };
    let mut x = build(0)?;
    let mut y = build(1)?;
    let mc = MeanEstConfig {
        lambda: product.lambda,
        a,
        b,
        eps,
        delta,
        ratio: cfg.ratio,
        pi_min: product.pi_min,
        trace_length: cfg.trace_length,
    };
    rel_mean_est(&mut x, &mut y, &mc)
}

#[allow(clippy::too_many_arguments)]
fn baseline_side<M: Hamiltonian>(
    shifted: &Shifted<'_, M>,
    tensor: &TensorEstimator,
    betas: &[f64],
    is_g: bool,
    plan: BaselinePlan,
    cfg: &PipelineConfig,
    bounds: &BoundsProvider,
    meter: &StepMeter,
) -> Result<(f64, u64)> {
    let side = u64::from(is_g);
    let sign = if is_g { 1.0 } else { -1.0 };
    let coefs: Vec<f64> = tensor.pairs().iter().map(|p| sign * p.half_width()).collect();
    let mut chains = Vec::with_capacity(betas.len());
    let mut gaps = Vec::with_capacity(betas.len());
    for (i, &beta) in betas.iter().enumerate() {
        let rng: ChainRng = rng::stream(cfg.seed, &[BASELINE_STREAM, side, i as u64]);
        chains.push(GibbsChain::from_zero(shifted, beta, rng)?.with_meter(meter.clone()));
        gaps.push(bounds.at(beta)?.t_unif());
    }
    let per_group = plan.samples / plan.groups;
    let mut group_means = Vec::with_capacity(plan.groups as usize);
    let mut steps = 0;
    for _ in 0..plan.groups {
        let mut sum = 0.0;
        for _ in 0..per_group {
            let mut log_value = 0.0;
            for ((chain, &gap), &coef) in chains.iter_mut().zip(&gaps).zip(&coefs) {
                chain.advance(gap);
                steps += gap;
                log_value += coef * chain.energy();
            }
            sum += log_value.exp();
        }
        group_means.push(sum / per_group as f64);
    }
    group_means.sort_by(f64::total_cmp);
    Ok((group_means[group_means.len() / 2], steps))
}
