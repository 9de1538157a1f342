//! Adaptive multiplicative mean estimation over Markov-chain traces.
//!
//! Two independent copies of a chain are warm-started for
//! `T_unif = ⌈T ln(1/π_min)⌉` steps. Each sample is the average of `f` over
//! the next `T` steps of a copy. Sample counts grow geometrically,
//! `m_i = ⌈α r^i⌉`; after each batch an empirical-Bernstein radius built from
//! the two-chain trace-variance estimate is turned into a multiplicative
//! error bound, and the estimator stops once that bound is at most `ε` (or
//! after `I` batches). The last batch is large enough for a Hoeffding-type
//! radius to certify `ε` at the smallest admissible mean, and that radius is
//! used there when it is the tighter one.

use std::f64::consts::SQRT_2;

use crate::chains::{warm_start_steps, MarkovChain};
use crate::error::{Error, Result};

/// A chain together with a function of its state.
pub trait Observable {
    /// Advances one Markov-chain step and returns `f` at the new state.
    fn advance(&mut self) -> f64;

    /// Advances `n` steps, ignoring the values.
    fn burn(&mut self, n: u64) {
        for _ in 0..n {
            self.advance();
        }
    }
}

impl<O: Observable + ?Sized> Observable for &mut O {
    fn advance(&mut self) -> f64 {
        (**self).advance()
    }
    fn burn(&mut self, n: u64) {
        (**self).burn(n)
    }
}

/// Pairs any [`MarkovChain`] with an observable `f(&chain)`.
pub struct Observed<C, F> {
    pub chain: C,
    f: F,
}

impl<C: MarkovChain, F: FnMut(&C) -> f64> Observed<C, F> {
    pub fn new(chain: C, f: F) -> Self {
        Observed { chain, f }
    }
}

impl<C: MarkovChain, F: FnMut(&C) -> f64> Observable for Observed<C, F> {
    fn advance(&mut self) -> f64 {
        self.chain.step();
        (self.f)(&self.chain)
    }

    fn burn(&mut self, n: u64) {
        self.chain.advance(n);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstConfig {
    /// Upper bound `Λ` on the second-largest absolute eigenvalue.
    pub lambda: f64,
    /// Declared range `[a, b]` of `f`.
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
    /// Geometric growth ratio `r` of the sample schedule.
    pub ratio: f64,
    /// Lower bound on the smallest stationary mass.
    pub pi_min: f64,
    /// Trace length; derived from `Λ` when `None`.
    pub trace_length: Option<u64>,
}

impl MeanEstConfig {
    pub fn new(lambda: f64, a: f64, b: f64, eps: f64, delta: f64) -> Self {
        MeanEstConfig {
            lambda,
            a,
            b,
            eps,
            delta,
            ratio: 1.1,
            pi_min: 1.0,
            trace_length: None,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn with_pi_min(mut self, pi_min: f64) -> Self {
        self.pi_min = pi_min;
        self
    }

    pub fn with_trace_length(mut self, t: u64) -> Self {
        self.trace_length = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::param(format!("Λ = {} outside [0, 1)", self.lambda)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("ε = {} outside (0, 1)", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("δ = {} outside (0, 1)", self.delta)));
        }
        if !(self.ratio > 1.0) || !self.ratio.is_finite() {
            return Err(Error::param(format!("ratio r = {} must exceed 1", self.ratio)));
        }
        if !(self.pi_min > 0.0 && self.pi_min <= 1.0) {
            return Err(Error::param(format!("π_min = {} outside (0, 1]", self.pi_min)));
        }
        if self.trace_length == Some(0) {
            return Err(Error::param("trace length must be at least 1"));
        }
        if !(self.a <= self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::param(format!("invalid range [{}, {}]", self.a, self.b)));
        }
        if !(self.a > 0.0) {
            return Err(Error::UnsupportedRange { a: self.a, b: self.b });
        }
        Ok(())
    }

    pub fn range(&self) -> f64 {
        self.b - self.a
    }

    /// `T = ⌈((1+Λ)/(1−Λ)) ln √2⌉` unless overridden.
    pub fn trace_len(&self) -> u64 {
        self.trace_length.unwrap_or_else(|| {
            (((1.0 + self.lambda) / (1.0 - self.lambda)) * SQRT_2.ln()).ceil().max(1.0) as u64
        })
    }

    /// `Λ' = Λ^T`, computed in log space.
    pub fn lambda_prime(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            (self.trace_len() as f64 * self.lambda.ln()).exp()
        }
    }

    /// Batch cap `I = 1 ∨ ⌊log_r((bR/2a²)·(1−ε)²/((1+ε)ε))⌋`.
    pub fn iteration_cap(&self) -> usize {
        let (a, b, eps) = (self.a, self.b, self.eps);
        let arg = b * self.range() / (2.0 * a * a) * (1.0 - eps).powi(2) / ((1.0 + eps) * eps);
        if arg > 0.0 {
            (arg.ln() / self.ratio.ln()).floor().max(1.0) as usize
        } else {
            1
        }
    }

    /// `ln(3I/δ)`.
    pub fn log_term(&self) -> f64 {
        (3.0 * self.iteration_cap() as f64 / self.delta).ln()
    }

    /// `α = (1+Λ') R ln(3I/δ) (1+ε) / ((1−Λ') b ε)`.
    pub fn alpha(&self) -> f64 {
        let lp = self.lambda_prime();
        (1.0 + lp) * self.range() * self.log_term() * (1.0 + self.eps) / ((1.0 - lp) * self.b * self.eps)
    }

    pub fn t_unif(&self) -> u64 {
        warm_start_steps(self.trace_len() as f64, self.pi_min)
    }

    /// Sample count at which the Hoeffding-type radius certifies precision
    /// `ε` even for the smallest admissible mean `a`:
    /// `(1+Λ') R² ln(3I/δ) (1−ε)² / (2 (1−Λ') a² ε²)`.
    pub fn worst_case_samples(&self) -> u64 {
        let lp = self.lambda_prime();
        let (r, a, eps) = (self.range(), self.a, self.eps);
        ((1.0 + lp) * r * r * self.log_term() * (1.0 - eps).powi(2) / (2.0 * (1.0 - lp) * a * a * eps * eps)).ceil()
            as u64
    }

    /// Hoeffding-type radius `√((1+Λ') R² ln(3I/δ) / (2 (1−Λ') m))`.
    pub fn hoeffding_radius(&self, m: u64) -> f64 {
        let lp = self.lambda_prime();
        let r = self.range();
        ((1.0 + lp) * r * r * self.log_term() / (2.0 * (1.0 - lp) * m as f64)).sqrt()
    }

    /// Sample counts `m_1, …, m_I`: `⌈α r^i⌉`, kept strictly increasing and
    /// positive, with the last one raised to [`Self::worst_case_samples`].
    pub fn sample_schedule(&self) -> Vec<u64> {
        let alpha = self.alpha();
        let cap = self.iteration_cap();
        let mut prev = 0u64;
        (1..=cap)
            .map(|i| {
                let mut m = (alpha * self.ratio.powi(i as i32)).ceil() as u64;
                if i == cap {
                    m = m.max(self.worst_case_samples());
                }
                prev = m.max(prev + 1);
                prev
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iteration {
    pub i: usize,
    pub m: u64,
    pub mean: f64,
    pub trace_var: f64,
    pub var_bound: f64,
    pub additive: f64,
    pub estimate: f64,
    pub rel_err: f64,
    /// Markov-chain steps over both copies, warm start included.
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanEstimate {
    /// `μ̂×`, the midpoint of the clamped confidence interval.
    pub mean: f64,
    /// Certified multiplicative error `ε̂×`.
    pub rel_err: f64,
    /// `m̂`: steps over both chains.
    pub steps: u64,
    /// The batch cap was reached with `ε̂× > ε`.
    pub cap_hit: bool,
    pub trace_len: u64,
    pub t_unif: u64,
    pub iterations: Vec<Iteration>,
}

impl MeanEstimate {
    /// `[μ̂×(1 − ε̂×), μ̂×(1 + ε̂×)]`, the clamped confidence interval.
    pub fn interval(&self) -> (f64, f64) {
        (self.mean * (1.0 - self.rel_err), self.mean * (1.0 + self.rel_err))
    }

    /// Whether `(1 − ε̂×) μ̂× ≤ μ ≤ (1 + ε̂×) μ̂×`.
    pub fn covers(&self, mu: f64) -> bool {
        let (lo, hi) = self.interval();
        let slack = 1e-12 * mu.abs();
        lo - slack <= mu && mu <= hi + slack
    }
}

/// `v̂ = (1/2m) Σ (x_{j,1} − x_{j,2})²` for paired trace averages.
pub fn trace_variance_estimate(pairs: &[(f64, f64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (2.0 * pairs.len() as f64)
}

/// Hoeffding-type deviation radius for an `m`-step average of a chain with
/// second eigenvalue `λ` and range `R`, at failure probability `δ`.
pub fn hoeffding_radius(lambda: f64, range: f64, delta: f64, m: u64) -> f64 {
    (2.0 * (1.0 + lambda) * (range * range / 4.0) * (2.0 / delta).ln() / ((1.0 - lambda) * m as f64)).sqrt()
}

/// Bernstein-type deviation radius with stationary variance `var`.
pub fn bernstein_radius(lambda: f64, range: f64, var: f64, delta: f64, m: u64) -> f64 {
    let l = (2.0 / delta).ln();
    let m = m as f64;
    10.0 * range * l / ((1.0 - lambda) * m) + (2.0 * (1.0 + lambda) * var * l / ((1.0 - lambda) * m)).sqrt()
}

fn trace_average<O: Observable + ?Sized>(obs: &mut O, t: u64) -> f64 {
    let mut sum = 0.0;
    for _ in 0..t {
        sum += obs.advance();
    }
    sum / t as f64
}

/// Estimates `E_π[f]` to multiplicative precision from two independent
/// copies of the same chain (each yielding `f` on [`Observable::advance`]).
pub fn rel_mean_est<A, B>(first: &mut A, second: &mut B, cfg: &MeanEstConfig) -> Result<MeanEstimate>
where
    A: Observable + ?Sized,
    B: Observable + ?Sized,
{
    cfg.validate()?;
    let t = cfg.trace_len();
    let lp = cfg.lambda_prime();
    let r = cfg.range();
    let l = cfg.log_term();
    let cap = cfg.iteration_cap();
    let t_unif = cfg.t_unif();
    let var_const = (11.0 + 21f64.sqrt()) * (1.0 + lp / 21f64.sqrt());

    first.burn(t_unif);
    second.burn(t_unif);

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut iterations = Vec::new();
    let mut prev = 0u64;
    for (idx, m) in cfg.sample_schedule().into_iter().enumerate() {
        let i = idx + 1;
        for _ in prev..m {
            let x1 = trace_average(first, t);
            let x2 = trace_average(second, t);
            sum += x1 + x2;
            sum_sq += (x1 - x2) * (x1 - x2);
        }
        prev = m;
        let mf = m as f64;
        let mean = sum / (2.0 * mf);
        let v = sum_sq / (2.0 * mf);
        let u = v
            + var_const * r * r * l / ((1.0 - lp) * mf)
            + ((1.0 + lp) * r * r * v * l / ((1.0 - lp) * mf)).sqrt();
        let mut additive = 10.0 * r * l / ((1.0 - lp) * mf) + ((1.0 + lp) * u * l / ((1.0 - lp) * mf)).sqrt();
        if i == cap {
            additive = additive.min(cfg.hoeffding_radius(m));
        }
        let lo = (mean - additive).max(cfg.a);
        let hi = (mean + additive).min(cfg.b);
        let estimate = (lo + hi) / 2.0;
        let rel_err = ((hi - lo) / (2.0 * estimate)).max(0.0);
        let steps = 2 * (t_unif + t * m);
        iterations.push(Iteration {
            i,
            m,
            mean,
            trace_var: v,
            var_bound: u,
            additive,
            estimate,
            rel_err,
            steps,
        });
        if i == cap || rel_err <= cfg.eps {
            return Ok(MeanEstimate {
                mean: estimate,
                rel_err,
                steps,
                cap_hit: rel_err > cfg.eps,
                trace_len: t,
                t_unif,
                iterations,
            });
        }
    }
    unreachable!("the batch cap always terminates the loop")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::MatrixChain;
    use crate::rng::stream;

    #[test]
    fn iteration_cap_example() {
        let cfg = MeanEstConfig::new(0.0, 0.5, 1.0, 0.1, 0.1).with_ratio(2.0);
        // ⌊log₂((0.5/0.5)·(0.81/0.11))⌋ = ⌊2.88⌋
        assert_eq!(cfg.iteration_cap(), 2);
    }

    #[test]
    fn trace_length_formula() {
        let cfg = MeanEstConfig::new(0.5, 1.0, 2.0, 0.1, 0.1);
        assert_eq!(cfg.trace_len(), (3.0 * SQRT_2.ln()).ceil() as u64);
        assert_eq!(MeanEstConfig::new(0.0, 1.0, 2.0, 0.1, 0.1).trace_len(), 1);
        assert_eq!(cfg.with_trace_length(17).trace_len(), 17);
        let slow = MeanEstConfig::new(1.0 - 1e-6, 1.0, 2.0, 0.1, 0.1);
        assert!(slow.lambda_prime() > 0.0 && slow.lambda_prime() < 1.0);
    }

    #[test]
    fn rejects_nonpositive_range() {
        let cfg = MeanEstConfig::new(0.0, 0.0, 1.0, 0.1, 0.1);
        assert!(matches!(cfg.validate(), Err(Error::UnsupportedRange { .. })));
        assert!(MeanEstConfig::new(0.0, 1.0, 2.0, 1.0, 0.1).validate().is_err());
        assert!(MeanEstConfig::new(0.0, 1.0, 2.0, 0.1, 0.1).with_ratio(1.0).validate().is_err());
    }

    struct Constant(f64, u64);

    impl Observable for Constant {
        fn advance(&mut self) -> f64 {
            self.1 += 1;
            self.0
        }
    }

    #[test]
    fn constant_function_stops_at_first_batch() {
        let cfg = MeanEstConfig::new(0.3, 2.5, 2.5, 0.05, 0.1).with_pi_min(0.25);
        let mut x = Constant(2.5, 0);
        let mut y = Constant(2.5, 0);
        let est = rel_mean_est(&mut x, &mut y, &cfg).unwrap();
        assert_eq!(est.mean, 2.5);
        assert_eq!(est.rel_err, 0.0);
        assert_eq!(est.iterations.len(), 1);
        assert!(!est.cap_hit);
        let t = cfg.trace_len();
        assert_eq!(est.steps, 2 * (cfg.t_unif() + t * est.iterations[0].m));
        assert_eq!(x.1 + y.1, est.steps);
    }

    #[test]
    fn schedule_is_strictly_increasing() {
        let cfg = MeanEstConfig::new(0.9, 0.2, 1.0, 0.02, 0.05);
        let s = cfg.sample_schedule();
        assert_eq!(s.len(), cfg.iteration_cap());
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(s[0] >= 1);
    }

    #[test]
    fn final_batch_certifies_worst_case() {
        for (a, b, eps, lambda) in [(0.8, 1.0, 0.05, 0.3), (0.2, 1.0, 0.1, 0.9), (0.5, 0.6, 0.01, 0.0)] {
            let cfg = MeanEstConfig::new(lambda, a, b, eps, 0.1);
            let m = *cfg.sample_schedule().last().unwrap();
            let rad = cfg.hoeffding_radius(m);
            assert!(rad <= a * eps / (1.0 - eps) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn trace_variance_of_identical_sequences_is_zero() {
        assert_eq!(trace_variance_estimate(&[(1.0, 1.0), (0.3, 0.3)]), 0.0);
        assert_eq!(trace_variance_estimate(&[(1.0, 0.0)]), 0.5);
    }

    #[test]
    fn estimate_is_inside_declared_range() {
        let f = |c: &MatrixChain| if c.state() == 1 { 2.0 } else { 1.0 };
        let cfg = MeanEstConfig::new(0.5, 1.0, 2.0, 0.1, 0.1).with_pi_min(0.5);
        for seed in 0..20 {
            let mut x = Observed::new(MatrixChain::two_state(0.25, 0.25, 0, stream(seed, &[0])).unwrap(), f);
            let mut y = Observed::new(MatrixChain::two_state(0.25, 0.25, 0, stream(seed, &[1])).unwrap(), f);
            let est = rel_mean_est(&mut x, &mut y, &cfg).unwrap();
            assert!(est.mean >= 1.0 && est.mean <= 2.0);
            assert_eq!(x.chain.steps() + y.chain.steps(), est.steps);
            assert!(est.rel_err <= 0.1 || est.cap_hit);
        }
    }

    #[test]
    fn radii_shrink_with_samples() {
        assert!(hoeffding_radius(0.5, 1.0, 0.1, 400) < hoeffding_radius(0.5, 1.0, 0.1, 100));
        let h = hoeffding_radius(0.0, 2.0, 0.1, 50);
        assert!((h - (2.0 * 20f64.ln() / 50.0).sqrt()).abs() < 1e-12);
        assert!(bernstein_radius(0.0, 1.0, 0.0, 0.1, 10) > 0.0);
    }
}
