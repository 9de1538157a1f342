//! Paired product estimators.
//!
//! For an interval `[β_i, β_{i+1}]` with `Δ_i = β_{i+1} − β_i`:
//! `f_i(x) = exp(−(Δ_i/2) H̃(x))` under `π_{β_i}` and
//! `g_i(y) = exp((Δ_i/2) H̃(y))` under `π_{β_{i+1}}`. Both have mean
//! `Z(mid)/Z(endpoint)`, so `Π E[g_i] / Π E[f_i] = Z(β_0)/Z(β_ℓ)`.

use crate::error::{Error, Result};
use crate::models::Hamiltonian;
use crate::oracle::Enumeration;
use crate::tpa::Schedule;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorPair {
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Extremes of the shifted Hamiltonian.
    pub h_min: f64,
    pub h_max: f64,
}

impl EstimatorPair {
    pub fn new(beta_lo: f64, beta_hi: f64, h_min: f64, h_max: f64) -> Self {
        EstimatorPair { beta_lo, beta_hi, h_min, h_max }
    }

    pub fn half_width(&self) -> f64 {
        (self.beta_hi - self.beta_lo) / 2.0
    }

    pub fn midpoint(&self) -> f64 {
        self.beta_lo + self.half_width()
    }

    pub fn f(&self, h: f64) -> f64 {
        (-self.half_width() * h).exp()
    }

    pub fn g(&self, h: f64) -> f64 {
        (self.half_width() * h).exp()
    }

    /// `(f(x), g(x))` from the shifted energy of `x`.
    pub fn eval(&self, h: f64) -> (f64, f64) {
        (self.f(h), self.g(h))
    }

    pub fn range_f(&self) -> (f64, f64) {
        (self.f(self.h_max), self.f(self.h_min))
    }

    pub fn range_g(&self) -> (f64, f64) {
        (self.g(self.h_min), self.g(self.h_max))
    }
}

/// `(f(x), g(x))` for a state of a shifted model.
pub fn eval_pair<H: Hamiltonian + ?Sized>(pair: &EstimatorPair, model: &H, state: &[u8]) -> Result<(f64, f64)> {
    let h = crate::models::eval_hamiltonian(model, state)?;
    Ok(pair.eval(h))
}

/// `F = Π f_i` and `G = Π g_i` over a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorEstimator {
    pairs: Vec<EstimatorPair>,
    h_min: f64,
    h_max: f64,
}

impl TensorEstimator {
    pub fn new(schedule: &Schedule, h_min: f64, h_max: f64) -> Self {
        let pairs = schedule
            .betas()
            .windows(2)
            .map(|w| EstimatorPair::new(w[0], w[1], h_min, h_max))
            .collect();
        TensorEstimator { pairs, h_min, h_max }
    }

    pub fn pairs(&self) -> &[EstimatorPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `Δ/2` over the whole schedule.
    fn half_total(&self) -> f64 {
        match (self.pairs.first(), self.pairs.last()) {
            (Some(first), Some(last)) => (last.beta_hi - first.beta_lo) / 2.0,
            _ => 0.0,
        }
    }

    /// `[exp(−(Δ/2) H_max), exp(−(Δ/2) H_min)]`.
    pub fn range_f(&self) -> (f64, f64) {
        let h = self.half_total();
        ((-h * self.h_max).exp(), (-h * self.h_min).exp())
    }

    /// `[exp((Δ/2) H_min), exp((Δ/2) H_max)]`.
    pub fn range_g(&self) -> (f64, f64) {
        let h = self.half_total();
        ((h * self.h_min).exp(), (h * self.h_max).exp())
    }

    /// `F(x_0..x_{ℓ−1})` from the shifted energies of chains at `β_0..β_{ℓ−1}`.
    pub fn eval_f(&self, energies: &[f64]) -> Result<f64> {
        self.check(energies)?;
        Ok(self.log_f(energies).exp())
    }

    /// `G(y_1..y_ℓ)` from the shifted energies of chains at `β_1..β_ℓ`.
    pub fn eval_g(&self, energies: &[f64]) -> Result<f64> {
        self.check(energies)?;
        Ok(self.log_g(energies).exp())
    }

    /// `(F, G)` with both tensors evaluated at the same joint state.
    pub fn eval(&self, energies: &[f64]) -> Result<(f64, f64)> {
        Ok((self.eval_f(energies)?, self.eval_g(energies)?))
    }

    pub fn log_f(&self, energies: &[f64]) -> f64 {
        -self.pairs.iter().zip(energies).map(|(p, h)| p.half_width() * h).sum::<f64>()
    }

    pub fn log_g(&self, energies: &[f64]) -> f64 {
        self.pairs.iter().zip(energies).map(|(p, h)| p.half_width() * h).sum()
    }

    fn check(&self, energies: &[f64]) -> Result<()> {
        if energies.len() != self.pairs.len() {
            return Err(Error::InvalidState(format!(
                "joint state has {} components, schedule has {} intervals",
                energies.len(),
                self.pairs.len()
            )));
        }
        Ok(())
    }
}

/// Exact per-interval moments from an enumerated shifted model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMoments {
    /// `E_{π_{β_i}}[f_i] = Z(mid)/Z(β_i)`.
    pub mu: f64,
    /// `E_{π_{β_{i+1}}}[g_i] = Z(mid)/Z(β_{i+1})`.
    pub nu: f64,
    pub vrel_f: f64,
    pub vrel_g: f64,
}

pub fn exact_pair_moments(en: &Enumeration, pair: &EstimatorPair) -> PairMoments {
    let (lo, mid, hi) = (
        en.log_partition(pair.beta_lo),
        en.log_partition(pair.midpoint()),
        en.log_partition(pair.beta_hi),
    );
    // V_rel[f] + 1 = V_rel[g] + 1 = Z(β_i) Z(β_{i+1}) / Z(mid)²
    let vrel = (lo + hi - 2.0 * mid).exp() - 1.0;
    PairMoments {
        mu: (mid - lo).exp(),
        nu: (mid - hi).exp(),
        vrel_f: vrel.max(0.0),
        vrel_g: vrel.max(0.0),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceDiagnostics {
    pub vrel_f: Vec<f64>,
    pub vrel_g: Vec<f64>,
    /// `V_rel[F] = Π (V_rel[f_i] + 1) − 1`.
    pub vrel_tensor_f: f64,
    pub vrel_tensor_g: f64,
    pub mu: f64,
    pub nu: f64,
    /// `Z(β_0)/Z(β_ℓ)`.
    pub q: f64,
    /// `Range(F)/μ + Range(G)/ν`.
    pub rel_range: f64,
    /// `√(Z(β_0)/Z(β_0 − Δ_max))`.
    pub alpha1: f64,
    /// `H_max / (2 E_{β_i}[H]) − 1` for `i = 1..=ℓ`.
    pub alpha0: Vec<f64>,
    /// Relative trace variances of `f_i` at the supplied trace lengths, when computed.
    pub reltrv_f: Option<Vec<f64>>,
}

/// Exact diagnostics for a schedule over an enumerated shifted model.
pub fn exact_diagnostics(en: &Enumeration, schedule: &Schedule) -> VarianceDiagnostics {
    let (h_min, h_max) = en.energy_range();
    let tensor = TensorEstimator::new(schedule, h_min, h_max);
    let moments: Vec<PairMoments> = tensor.pairs().iter().map(|p| exact_pair_moments(en, p)).collect();
    let mu: f64 = moments.iter().map(|m| m.mu).product();
    let nu: f64 = moments.iter().map(|m| m.nu).product();
    let vrel_tensor = |v: &dyn Fn(&PairMoments) -> f64| moments.iter().map(|m| v(m) + 1.0).product::<f64>() - 1.0;
    let (af, bf) = tensor.range_f();
    let (ag, bg) = tensor.range_g();
    let b0 = schedule.beta_min();
    let alpha1 = (0.5 * (en.log_partition(b0) - en.log_partition(b0 - schedule.delta_max()))).exp();
    let alpha0 = schedule.betas()[1..]
        .iter()
        .map(|&b| h_max / (2.0 * en.expect(b, |e| e)) - 1.0)
        .collect();
    VarianceDiagnostics {
        vrel_f: moments.iter().map(|m| m.vrel_f).collect(),
        vrel_g: moments.iter().map(|m| m.vrel_g).collect(),
        vrel_tensor_f: vrel_tensor(&|m| m.vrel_f),
        vrel_tensor_g: vrel_tensor(&|m| m.vrel_g),
        mu,
        nu,
        q: (en.log_partition(b0) - en.log_partition(schedule.beta_max())).exp(),
        rel_range: (bf - af) / mu + (bg - ag) / nu,
        alpha1,
        alpha0,
        reltrv_f: None,
    }
}

/// Adds exact relative trace variances of each `f_i` at trace length `tau`.
pub fn with_trace_variances(en: &Enumeration, schedule: &Schedule, mut diag: VarianceDiagnostics, tau: usize) -> Result<VarianceDiagnostics> {
    let (h_min, h_max) = en.energy_range();
    let tensor = TensorEstimator::new(schedule, h_min, h_max);
    let values = tensor
        .pairs()
        .iter()
        .map(|p| Ok(en.exact_trace_variance(p.beta_lo, |e| p.f(e), tau)?.reltrv))
        .collect::<Result<Vec<f64>>>()?;
    diag.reltrv_f = Some(values);
    Ok(diag)
}

/// Crossover precision
/// `ε₀ = (τ_prx/T)·(√(exp(Δ H_min)/Q) + √(Q/exp(Δ H_max)))·α₁`.
pub fn epsilon_zero(tau_prx: f64, t: f64, delta_total: f64, h_min: f64, h_max: f64, q: f64, alpha1: f64) -> f64 {
    (tau_prx / t) * (((delta_total * h_min).exp() / q).sqrt() + (q / (delta_total * h_max).exp()).sqrt()) * alpha1
}
