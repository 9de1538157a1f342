//! Brute-force ground truth for small state spaces.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chains::{ChainBounds, Provenance};
use crate::error::{Error, Result};
use crate::models::{Hamiltonian, SiteSpace};
use crate::rng::{self, ChainRng};

/// Default enumeration cap (`2^24` states).
pub const DEFAULT_CAP: u64 = 1 << 24;
/// Largest state space for transition-matrix spectra.
pub const SPECTRAL_CAP: u64 = 4096;
/// Largest state space for exact trace variances.
pub const TRACE_VARIANCE_CAP: u64 = 512;
/// Below this size spectra use a dense symmetric eigensolver.
const DENSE_CAP: usize = 1024;

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSummary {
    pub beta: f64,
    pub z: f64,
    pub log_z: f64,
    /// Distinct energies in increasing order with their state counts.
    pub histogram: Vec<(f64, u64)>,
    pub mean_energy: f64,
    pub var_energy: f64,
}

/// Every state of a model with its energy.
#[derive(Clone, Debug)]
pub struct Enumeration {
    space: SiteSpace,
    energies: Vec<f64>,
    histogram: Vec<(f64, u64)>,
}

impl Enumeration {
    pub fn new<H: Hamiltonian + ?Sized>(model: &H, cap: u64) -> Result<Self> {
        let space = model.space().clone();
        let states = space.state_count();
        if states > u128::from(cap) {
            return Err(Error::OracleUnavailable { states, cap });
        }
        let mut state = space.zero_state();
        let energies: Vec<f64> = (0..states as u64)
            .map(|i| {
                space.decode(i, &mut state);
                model.energy(&state)
            })
            .collect();
        let mut sorted = energies.clone();
        sorted.sort_by(f64::total_cmp);
        let mut histogram: Vec<(f64, u64)> = Vec::new();
        for e in sorted {
            match histogram.last_mut() {
                Some((last, count)) if *last == e => *count += 1,
                _ => histogram.push((e, 1)),
            }
        }
        Ok(Enumeration { space, energies, histogram })
    }

    pub fn space(&self) -> &SiteSpace {
        &self.space
    }

    pub fn state_count(&self) -> usize {
        self.energies.len()
    }

    /// Energies indexed by mixed-radix state index.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn histogram(&self) -> &[(f64, u64)] {
        &self.histogram
    }

    pub fn energy_range(&self) -> (f64, f64) {
        (self.histogram[0].0, self.histogram[self.histogram.len() - 1].0)
    }

    /// `max_e (−β e)`, the log of the largest Boltzmann factor.
    fn log_peak(&self, beta: f64) -> f64 {
        let (lo, hi) = self.energy_range();
        (-beta * lo).max(-beta * hi)
    }

    pub fn partition(&self, beta: f64) -> f64 {
        self.histogram
            .iter()
            .map(|&(e, c)| c as f64 * (-beta * e).exp())
            .collect::<KahanSum>()
            .value()
    }

    pub fn log_partition(&self, beta: f64) -> f64 {
        let peak = self.log_peak(beta);
        let scaled = self
            .histogram
            .iter()
            .map(|&(e, c)| c as f64 * (-beta * e - peak).exp())
            .collect::<KahanSum>()
            .value();
        peak + scaled.ln()
    }

    /// `E_{π_β}[g(H)]`.
    pub fn expect<G: Fn(f64) -> f64>(&self, beta: f64, g: G) -> f64 {
        let peak = self.log_peak(beta);
        let mut num = KahanSum::default();
        let mut den = KahanSum::default();
        for &(e, c) in &self.histogram {
            let w = c as f64 * (-beta * e - peak).exp();
            num.add(w * g(e));
            den.add(w);
        }
        num.value() / den.value()
    }

    pub fn exact_partition(&self, beta: f64) -> ExactSummary {
        let mean = self.expect(beta, |e| e);
        let var = self.expect(beta, |e| (e - mean) * (e - mean));
        ExactSummary {
            beta,
            z: self.partition(beta),
            log_z: self.log_partition(beta),
            histogram: self.histogram.clone(),
            mean_energy: mean,
            var_energy: var,
        }
    }

    /// `π_β` over state indices.
    pub fn probabilities(&self, beta: f64) -> Vec<f64> {
        let log_z = self.log_partition(beta);
        self.energies.iter().map(|&e| (-beta * e - log_z).exp()).collect()
    }

    pub fn sampler(&self, beta: f64) -> ExactSampler {
        let mut acc = KahanSum::default();
        let cdf = self
            .probabilities(beta)
            .into_iter()
            .map(|p| {
                acc.add(p);
                acc.value()
            })
            .collect();
        ExactSampler { cdf }
    }

    pub fn exact_sample(&self, beta: f64, rng: &mut ChainRng) -> Vec<u8> {
        let idx = self.sampler(beta).sample(rng);
        let mut state = self.space.zero_state();
        self.space.decode(idx as u64, &mut state);
        state
    }

    /// Single-site Gibbs transition matrix at `β`.
    pub fn glauber_matrix(&self, beta: f64) -> Result<TransitionMatrix> {
        let n_states = self.state_count();
        if n_states as u64 > SPECTRAL_CAP {
            return Err(Error::OracleUnavailable { states: n_states as u128, cap: SPECTRAL_CAP });
        }
        let n_sites = self.space.n_sites();
        let mut radix = Vec::with_capacity(n_sites);
        let mut r = 1usize;
        for i in 0..n_sites {
            radix.push(r);
            r *= self.space.domain_size(i);
        }
        let mut state = self.space.zero_state();
        let mut rows = Vec::with_capacity(n_states);
        for x in 0..n_states {
            self.space.decode(x as u64, &mut state);
            let mut row: Vec<(usize, f64)> = Vec::new();
            if n_sites == 0 {
                row.push((x, 1.0));
            }
            for site in 0..n_sites {
                let base = x - usize::from(state[site]) * radix[site];
                let q = self.space.domain_size(site);
                let mut weights: Vec<f64> = (0..q).map(|v| self.energies[base + v * radix[site]]).collect();
                crate::models::normalize_boltzmann(beta, &mut weights);
                for (v, w) in weights.into_iter().enumerate() {
                    row.push((base + v * radix[site], w / n_sites as f64));
                }
            }
            rows.push(row);
        }
        Ok(TransitionMatrix::from_entries(rows))
    }

    pub fn spectral(&self, beta: f64) -> Result<Spectral> {
        let p = self.glauber_matrix(beta)?;
        let pi = self.probabilities(beta);
        spectral(&p, &pi)
    }

    /// Oracle-backed bounds: `Λ = λ`, `T = max(⌈τ_rx⌉, ⌈τ_rx ln(2/√π_min)⌉)`,
    /// exact `π_min`.
    pub fn chain_bounds(&self, beta: f64) -> Result<ChainBounds> {
        let s = self.spectral(beta)?;
        let t_mix = (s.tau_rx * (2.0 / s.pi_min.sqrt()).ln()).ceil();
        let t = s.tau_rx.ceil().max(t_mix).max(1.0);
        ChainBounds::new(s.lambda, t, s.pi_min, Provenance::Oracle)
    }

    /// Exact relative trace variance of `g(H)` over Glauber traces of length `tau`.
    pub fn exact_trace_variance<G: Fn(f64) -> f64>(&self, beta: f64, g: G, tau: usize) -> Result<TraceMoments> {
        let n = self.state_count() as u64;
        if n > TRACE_VARIANCE_CAP {
            return Err(Error::OracleUnavailable { states: u128::from(n), cap: TRACE_VARIANCE_CAP });
        }
        let p = self.glauber_matrix(beta)?;
        let pi = self.probabilities(beta);
        let f: Vec<f64> = self.energies.iter().map(|&e| g(e)).collect();
        exact_trace_variance(&p, &pi, &f, tau)
    }
}

/// Inverse-CDF sampler over state indices.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    cdf: Vec<f64>,
}

impl ExactSampler {
    pub fn sample(&self, rng: &mut ChainRng) -> usize {
        let total = self.cdf[self.cdf.len() - 1];
        let u = rng::uniform01(rng) * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Sparse row-stochastic matrix.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Sums duplicate column entries within each row.
    pub fn from_entries(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut row| {
                row.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                for (j, p) in row {
                    match merged.last_mut() {
                        Some((k, q)) if *k == j => *q += p,
                        _ => merged.push((j, p)),
                    }
                }
                merged
            })
            .collect();
        TransitionMatrix { rows }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        TransitionMatrix::from_entries(
            rows.iter()
                .map(|r| r.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |pos| self.rows[i][pos].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] = p;
            }
        }
        m
    }

    /// `P v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * v[j]).sum())
            .collect()
    }

    /// `v P`.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                out[j] += v[i] * p;
            }
        }
        out
    }

    /// `max |π(x)P(x,y) − π(y)P(y,x)|`.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                worst = worst.max((pi[i] * p - pi[j] * self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max |(πP)(y) − π(y)|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        self.left_apply(pi)
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Stationary distribution by power iteration on `v ↦ vP` from uniform.
    pub fn stationary(&self, tol: f64, max_iter: usize) -> Vec<f64> {
        let n = self.len();
        let mut v = vec![1.0 / n as f64; n];
        for _ in 0..max_iter {
            let mut next = self.left_apply(&v);
            // average with the previous iterate so periodic chains also converge
            for (a, b) in next.iter_mut().zip(&v) {
                *a = 0.5 * (*a + b);
            }
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum::<f64>();
            v = next;
            if diff < tol {
                break;
            }
        }
        let total: f64 = v.iter().sum();
        v.iter().map(|x| x / total).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectral {
    /// Second-largest absolute eigenvalue.
    pub lambda: f64,
    pub tau_rx: f64,
    pub pi_min: f64,
}

/// Deflated symmetrisation `D^{1/2} P D^{−1/2} − √π √πᵀ` of a reversible chain.
fn deflated_symmetric(p: &TransitionMatrix, pi: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let sq: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for &(j, pij) in p.row(i) {
            s[(i, j)] += sq[i] * pij / sq[j];
        }
    }
    // symmetrise away round-off
    let s = (&s + s.transpose()) * 0.5;
    s - DMatrix::from_fn(n, n, |i, j| sq[i] * sq[j])
}

/// `λ` from a dense eigendecomposition; requires a reversible chain.
pub fn lambda_dense(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    let eig = SymmetricEigen::new(deflated_symmetric(p, pi));
    eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `λ` by power iteration on `P` restricted to the complement of `π`.
pub fn lambda_power(p: &TransitionMatrix, pi: &[f64], tol: f64, max_iter: usize) -> f64 {
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let project = |w: &mut Vec<f64>| {
        let dot: f64 = w.iter().zip(&sq).map(|(a, b)| a * b).sum();
        for (a, b) in w.iter_mut().zip(&sq) {
            *a -= dot * b;
        }
    };
    let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
    // symmetric operator S w = D^{1/2} P D^{-1/2} w
    let apply = |w: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = w.iter().zip(&sq).map(|(a, b)| a / b).collect();
        p.apply(&scaled).iter().zip(&sq).map(|(a, b)| a * b).collect()
    };
    let mut state = rng::stream(0x5eed, &[n as u64]);
    let mut w: Vec<f64> = (0..n).map(|_| rng::uniform01(&mut state) - 0.5).collect();
    project(&mut w);
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        // two steps so that ± eigenvalue pairs do not oscillate
        let mut w1 = apply(&w);
        project(&mut w1);
        let mut w2 = apply(&w1);
        project(&mut w2);
        let next = norm(&w2).sqrt();
        let done = (next - estimate).abs() <= tol * next.max(1e-300);
        estimate = next;
        w = w2;
        if done {
            break;
        }
    }
    estimate
}

/// Spectral data for a reversible chain with stationary law `pi`.
pub fn spectral(p: &TransitionMatrix, pi: &[f64]) -> Result<Spectral> {
    if p.len() as u64 > SPECTRAL_CAP {
        return Err(Error::OracleUnavailable { states: p.len() as u128, cap: SPECTRAL_CAP });
    }
    let lambda = if p.len() <= DENSE_CAP {
        lambda_dense(p, pi)
    } else {
        lambda_power(p, pi, 1e-12, 200_000)
    };
    let lambda = lambda.clamp(0.0, 1.0);
    Ok(Spectral {
        lambda,
        tau_rx: 1.0 / (1.0 - lambda),
        pi_min: pi.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceMoments {
    pub tau: usize,
    pub mean: f64,
    /// `E[f̄²]` under a stationary start.
    pub second_moment: f64,
    /// `E[f̄²]/E[f̄]² − 1`.
    pub reltrv: f64,
}

/// Exact moments of the trace average `f̄ = (1/τ) Σ_{t=1}^{τ} f(X_t)` with
/// `X_1 ~ π`: `E[f̄²] = (1/τ²)[τ c(0) + 2 Σ_{h=1}^{τ−1} (τ−h) c(h)]` where
/// `c(h) = Σ_x π(x) f(x) (P^h f)(x)`.
pub fn exact_trace_variance(p: &TransitionMatrix, pi: &[f64], f: &[f64], tau: usize) -> Result<TraceMoments> {
    if tau == 0 {
        return Err(Error::EmptyTrace);
    }
    let weighted: Vec<f64> = pi.iter().zip(f).map(|(a, b)| a * b).collect();
    let mean: f64 = weighted.iter().sum();
    let mut ph = f.to_vec();
    let mut total = KahanSum::default();
    for h in 0..tau {
        if h > 0 {
            ph = p.apply(&ph);
        }
        let c: f64 = weighted.iter().zip(&ph).map(|(a, b)| a * b).sum();
        let mult = if h == 0 { tau as f64 } else { 2.0 * (tau - h) as f64 };
        total.add(mult * c);
    }
    let second = total.value() / (tau as f64 * tau as f64);
    Ok(TraceMoments {
        tau,
        mean,
        second_moment: second,
        reltrv: (second / (mean * mean) - 1.0).max(0.0),
    })
}
