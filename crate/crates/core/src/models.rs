//! Discrete factor-graph models and their Hamiltonians.
//!
//! A state is a slice of per-site label indices (`u8`), so site `i` holds a
//! value in `0..domain_size(i)`. The flat state index used by the oracle is the
//! mixed-radix integer `Σ state[i] · Π_{j<i} domain_size(j)`, little-endian in
//! site order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-site label sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSpace {
    labels: Vec<Vec<i32>>,
}

impl SiteSpace {
    pub fn new(labels: Vec<Vec<i32>>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|d| d.is_empty()) {
            return Err(Error::InvalidModel(format!("site {i} has an empty domain")));
        }
        if let Some(i) = labels.iter().position(|d| d.len() > usize::from(u8::MAX) + 1) {
            return Err(Error::InvalidModel(format!("site {i} has more than 256 labels")));
        }
        Ok(SiteSpace { labels })
    }

    pub fn uniform(n_sites: usize, labels: &[i32]) -> Self {
        SiteSpace::new(vec![labels.to_vec(); n_sites]).expect("uniform domain is nonempty")
    }

    pub fn n_sites(&self) -> usize {
        self.labels.len()
    }

    pub fn domain_size(&self, site: usize) -> usize {
        self.labels[site].len()
    }

    pub fn labels(&self, site: usize) -> &[i32] {
        &self.labels[site]
    }

    pub fn max_domain_size(&self) -> usize {
        self.labels.iter().map(Vec::len).max().unwrap_or(1)
    }

    /// `|Ω|`, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        self.labels
            .iter()
            .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn validate(&self, state: &[u8]) -> Result<()> {
        if state.len() != self.n_sites() {
            return Err(Error::InvalidState(format!(
                "state has {} sites, model has {}",
                state.len(),
                self.n_sites()
            )));
        }
        for (i, &v) in state.iter().enumerate() {
            if usize::from(v) >= self.domain_size(i) {
                return Err(Error::InvalidState(format!(
                    "site {i} holds label index {v}, domain size is {}",
                    self.domain_size(i)
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self, state: &[u8]) -> u64 {
        let mut idx = 0u64;
        let mut radix = 1u64;
        for (i, &v) in state.iter().enumerate() {
            idx += u64::from(v) * radix;
            radix = radix.wrapping_mul(self.domain_size(i) as u64);
        }
        idx
    }

    pub fn decode(&self, mut idx: u64, state: &mut [u8]) {
        for (i, slot) in state.iter_mut().enumerate() {
            let q = self.domain_size(i) as u64;
            *slot = (idx % q) as u8;
            idx /= q;
        }
    }

    pub fn zero_state(&self) -> Vec<u8> {
        vec![0; self.n_sites()]
    }
}

/// A finite-domain energy function.
pub trait Hamiltonian: Send + Sync {
    fn space(&self) -> &SiteSpace;

    /// Energy of a state; the state must be valid for [`Hamiltonian::space`].
    fn energy(&self, state: &[u8]) -> f64;

    /// Writes the energy of `state` with `site` set to each label index into
    /// `out[..domain_size(site)]`. `state` is restored before returning.
    fn site_energies(&self, state: &mut [u8], site: usize, out: &mut [f64]) {
        let original = state[site];
        for v in 0..self.space().domain_size(site) {
            state[site] = v as u8;
            out[v] = self.energy(state);
        }
        state[site] = original;
    }

    /// Same as [`Hamiltonian::site_energies`], given `current = energy(state)`.
    fn local_energies(&self, state: &mut [u8], site: usize, current: f64, out: &mut [f64]) {
        let _ = current;
        self.site_energies(state, site, out)
    }

    /// Exact `(H_min, H_max)`.
    fn energy_range(&self) -> (f64, f64);
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for &H {
    fn space(&self) -> &SiteSpace {
        (**self).space()
    }
    fn energy(&self, state: &[u8]) -> f64 {
        (**self).energy(state)
    }
    fn site_energies(&self, state: &mut [u8], site: usize, out: &mut [f64]) {
        (**self).site_energies(state, site, out)
    }
    fn local_energies(&self, state: &mut [u8], site: usize, current: f64, out: &mut [f64]) {
        (**self).local_energies(state, site, current, out)
    }
    fn energy_range(&self) -> (f64, f64) {
        (**self).energy_range()
    }
}

/// Raw Hamiltonian value with the state checked against the model.
pub fn eval_hamiltonian<H: Hamiltonian + ?Sized>(model: &H, state: &[u8]) -> Result<f64> {
    model.space().validate(state)?;
    Ok(model.energy(state))
}

/// Gibbs conditional of `site` given the rest of `state` at inverse temperature `beta`.
pub fn conditional_weights<H: Hamiltonian + ?Sized>(
    model: &H,
    beta: f64,
    state: &[u8],
    site: usize,
) -> Result<Vec<f64>> {
    let n_sites = model.space().n_sites();
    if site >= n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    model.space().validate(state)?;
    let mut scratch = state.to_vec();
    let mut out = vec![0.0; model.space().domain_size(site)];
    model.site_energies(&mut scratch, site, &mut out);
    normalize_boltzmann(beta, &mut out);
    Ok(out)
}

/// Turns energies into normalised Boltzmann weights in place.
pub(crate) fn normalize_boltzmann(beta: f64, energies: &mut [f64]) {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for e in energies.iter_mut() {
        *e = (-beta * (*e - e_min)).exp();
        total += *e;
    }
    for e in energies.iter_mut() {
        *e /= total;
    }
}

// ---------------------------------------------------------------------------
// Ising lattice
// ---------------------------------------------------------------------------

/// Ferromagnetic Ising model on an open-boundary `side × side` grid with
/// `H(x) = −Σ_{(i,j)∈E} 1(x_i = x_j)` and spins in `{−1, +1}`.
#[derive(Clone, Debug)]
pub struct IsingModel {
    side: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    space: SiteSpace,
}

impl IsingModel {
    pub fn new(side: usize) -> Self {
        let n = side * side;
        let mut edges = Vec::with_capacity(2 * side * side.saturating_sub(1));
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                if c + 1 < side {
                    edges.push((i, i + 1));
                }
                if r + 1 < side {
                    edges.push((i, i + side));
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        IsingModel {
            side,
            edges,
            neighbors,
            space: SiteSpace::uniform(n, &[-1, 1]),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    fn agreeing_neighbors(&self, state: &[u8], site: usize, value: u8) -> usize {
        self.neighbors[site].iter().filter(|&&j| state[j] == value).count()
    }
}

impl Hamiltonian for IsingModel {
    fn space(&self) -> &SiteSpace {
        &self.space
    }

    fn energy(&self, state: &[u8]) -> f64 {
        0.0 - self.edges.iter().filter(|&&(i, j)| state[i] == state[j]).count() as f64
    }

    fn site_energies(&self, state: &mut [u8], site: usize, out: &mut [f64]) {
        self.local_energies(state, site, self.energy(state), out)
    }

    fn local_energies(&self, state: &mut [u8], site: usize, current: f64, out: &mut [f64]) {
        // integer-valued, so the local update is exact
        let base = current + self.agreeing_neighbors(state, site, state[site]) as f64;
        for v in 0..2u8 {
            out[usize::from(v)] = base - self.agreeing_neighbors(state, site, v) as f64;
        }
    }

    fn energy_range(&self) -> (f64, f64) {
        // a checkerboard disagrees on every edge of the bipartite grid
        (-(self.edges.len() as f64), 0.0)
    }
}

// ---------------------------------------------------------------------------
// Logical voting model
// ---------------------------------------------------------------------------

/// Logical voting model with a query `Q ∈ {−1, 1}` and voters `T_i, F_i ∈ {0, 1}`:
///
/// `H(Q, T, F) = ωQ·max_i T_i − ωQ·max_i F_i + Σ ω_{T_i} T_i + Σ ω_{F_i} F_i`.
///
/// Site 0 is `Q`, sites `1..=n` are `T`, sites `n+1..=2n` are `F`.
#[derive(Clone, Debug)]
pub struct VotingModel {
    omega: f64,
    omega_t: Vec<f64>,
    omega_f: Vec<f64>,
    space: SiteSpace,
}

impl VotingModel {
    pub fn new(omega: f64, omega_t: Vec<f64>, omega_f: Vec<f64>) -> Result<Self> {
        if omega_t.len() != omega_f.len() {
            return Err(Error::InvalidModel(format!(
                "omega_t has {} weights but omega_f has {}",
                omega_t.len(),
                omega_f.len()
            )));
        }
        let all = std::iter::once(&omega).chain(&omega_t).chain(&omega_f);
        if let Some(w) = all.clone().find(|w| !(-1.0..=1.0).contains(*w)) {
            return Err(Error::InvalidModel(format!("voting weight {w} outside [-1, 1]")));
        }
        let n = omega_t.len();
        let mut labels = vec![vec![-1, 1]];
        labels.extend(std::iter::repeat_n(vec![0, 1], 2 * n));
        Ok(VotingModel {
            omega,
            omega_t,
            omega_f,
            space: SiteSpace::new(labels)?,
        })
    }

    /// The three-voter model used for the fixed-parameter voting experiments.
    pub fn reference() -> Self {
        VotingModel::new(0.9, vec![0.2, 0.5, 0.1], vec![-0.8, -0.2, -0.9])
            .expect("reference weights are valid")
    }

    pub fn n(&self) -> usize {
        self.omega_t.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn omega_t(&self) -> &[f64] {
        &self.omega_t
    }

    pub fn omega_f(&self) -> &[f64] {
        &self.omega_f
    }
}

/// Extremes of `Σ w_i s_i` over binary `s` with `max_i s_i = 1`.
fn nonempty_subset_extremes(w: &[f64]) -> (f64, f64) {
    let neg: f64 = w.iter().filter(|&&x| x < 0.0).sum();
    let pos: f64 = w.iter().filter(|&&x| x > 0.0).sum();
    let lo = if neg < 0.0 { neg } else { w.iter().copied().fold(f64::INFINITY, f64::min) };
    let hi = if pos > 0.0 { pos } else { w.iter().copied().fold(f64::NEG_INFINITY, f64::max) };
    (lo, hi)
}

impl Hamiltonian for VotingModel {
    fn space(&self) -> &SiteSpace {
        &self.space
    }

    fn energy(&self, state: &[u8]) -> f64 {
        let n = self.n();
        let q = if state[0] == 0 { -1.0 } else { 1.0 };
        let (t, f) = state[1..].split_at(n);
        // max over an all-zero block is 0
        let max_t = if t.contains(&1) { 1.0 } else { 0.0 };
        let max_f = if f.contains(&1) { 1.0 } else { 0.0 };
        let lin_t: f64 = t.iter().zip(&self.omega_t).map(|(&s, w)| f64::from(s) * w).sum();
        let lin_f: f64 = f.iter().zip(&self.omega_f).map(|(&s, w)| f64::from(s) * w).sum();
        self.omega * q * max_t - self.omega * q * max_f + lin_t + lin_f
    }

    fn energy_range(&self) -> (f64, f64) {
        let (t_lo, t_hi) = nonempty_subset_extremes(&self.omega_t);
        let (f_lo, f_hi) = nonempty_subset_extremes(&self.omega_f);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let blocks: &[(f64, f64, f64)] = if self.n() == 0 {
            &[(0.0, 0.0, 0.0)]
        } else {
            &[(0.0, 0.0, 0.0), (1.0, t_lo, t_hi)]
        };
        for q in [-1.0, 1.0] {
            for &(mt, tl, th) in blocks {
                let f_blocks = [(0.0, 0.0, 0.0), (1.0, f_lo, f_hi)];
                for &(mf, fl, fh) in f_blocks.iter().take(if self.n() == 0 { 1 } else { 2 }) {
                    let inter = self.omega * q * mt - self.omega * q * mf;
                    lo = lo.min(inter + tl + fl);
                    hi = hi.max(inter + th + fh);
                }
            }
        }
        (lo, hi)
    }
}

// ---------------------------------------------------------------------------
// Explicit tables
// ---------------------------------------------------------------------------

/// Energies listed for every state in mixed-radix order; labels are `0..q`.
#[derive(Clone, Debug)]
pub struct TableModel {
    energies: Vec<f64>,
    space: SiteSpace,
    range: (f64, f64),
}

impl TableModel {
    pub fn new(domains: &[usize], energies: Vec<f64>) -> Result<Self> {
        let labels = domains
            .iter()
            .map(|&q| (0..q as i32).collect())
            .collect::<Vec<Vec<i32>>>();
        let space = SiteSpace::new(labels)?;
        if space.state_count() != energies.len() as u128 {
            return Err(Error::InvalidModel(format!(
                "table lists {} energies for {} states",
                energies.len(),
                space.state_count()
            )));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite energy {e}")));
        }
        let range = energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        Ok(TableModel { energies, space, range })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

impl Hamiltonian for TableModel {
    fn space(&self) -> &SiteSpace {
        &self.space
    }

    fn energy(&self, state: &[u8]) -> f64 {
        self.energies[self.space.encode(state) as usize]
    }

    fn energy_range(&self) -> (f64, f64) {
        self.range
    }
}

// ---------------------------------------------------------------------------
// Constant offset
// ---------------------------------------------------------------------------

/// `H̃(x) = H(x) + c`. With `c = −H_min` the shifted Hamiltonian is
/// nonnegative and `Z(β, H) = Z(β, H̃)·exp(βc)`.
#[derive(Clone, Debug)]
pub struct OffsetHamiltonian<H> {
    base: H,
    offset: f64,
    range: (f64, f64),
}

impl<H: Hamiltonian> OffsetHamiltonian<H> {
    pub fn with_offset(base: H, offset: f64) -> Self {
        let (lo, hi) = base.energy_range();
        OffsetHamiltonian {
            base,
            offset,
            range: (lo + offset, hi + offset),
        }
    }

    pub fn base(&self) -> &H {
        &self.base
    }

    /// The constant `c` added to the base energies.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Recovers `Z(β, H)` from `Z(β, H + c)`.
    pub fn restore_partition(&self, shifted_z: f64, beta: f64) -> f64 {
        restore_partition(shifted_z, beta, self.offset)
    }

    pub fn restore_log_partition(&self, shifted_log_z: f64, beta: f64) -> f64 {
        shifted_log_z + beta * self.offset
    }
}

/// `Z(β, H) = Z(β, H + c)·exp(βc)`.
pub fn restore_partition(shifted_z: f64, beta: f64, offset: f64) -> f64 {
    shifted_z * (beta * offset).exp()
}

impl<H: Hamiltonian> Hamiltonian for OffsetHamiltonian<H> {
    fn space(&self) -> &SiteSpace {
        self.base.space()
    }

    fn energy(&self, state: &[u8]) -> f64 {
        self.base.energy(state) + self.offset
    }

    fn site_energies(&self, state: &mut [u8], site: usize, out: &mut [f64]) {
        self.base.site_energies(state, site, out);
        let q = self.base.space().domain_size(site);
        for e in &mut out[..q] {
            *e += self.offset;
        }
    }

    fn local_energies(&self, state: &mut [u8], site: usize, current: f64, out: &mut [f64]) {
        self.base.local_energies(state, site, current - self.offset, out);
        let q = self.base.space().domain_size(site);
        for e in &mut out[..q] {
            *e += self.offset;
        }
    }

    fn energy_range(&self) -> (f64, f64) {
        self.range
    }
}

/// Shifts `model` so that its minimum energy is zero.
pub fn shifted_hamiltonian<H: Hamiltonian>(model: H) -> OffsetHamiltonian<H> {
    let (h_min, _) = model.energy_range();
    OffsetHamiltonian::with_offset(model, -h_min)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// On-disk model description (TOML).
///
/// ```toml
/// kind = "ising"
/// side = 3
/// ```
///
/// ```toml
/// kind = "voting"
/// n = 3
/// omega = 0.9
/// omega_t = [0.2, 0.5, 0.1]
/// omega_f = [-0.8, -0.2, -0.9]
/// ```
///
/// ```toml
/// kind = "table"
/// domains = [2, 2]
/// energies = [0.0, 1.0, 1.0, 2.0]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Ising {
        side: usize,
    },
    Voting {
        n: usize,
        omega: f64,
        omega_t: Vec<f64>,
        omega_f: Vec<f64>,
    },
    Table {
        domains: Vec<usize>,
        energies: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model specs always serialise")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ModelSpec::parse(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Ising { side } => {
                if *side == 0 {
                    return Err(Error::InvalidModel("ising side must be positive".into()));
                }
                Model::Ising(IsingModel::new(*side))
            }
            ModelSpec::Voting { n, omega, omega_t, omega_f } => {
                if omega_t.len() != *n {
                    return Err(Error::InvalidModel(format!(
                        "n = {n} but omega_t has {} weights",
                        omega_t.len()
                    )));
                }
                Model::Voting(VotingModel::new(*omega, omega_t.clone(), omega_f.clone())?)
            }
            ModelSpec::Table { domains, energies } => {
                Model::Table(TableModel::new(domains, energies.clone())?)
            }
        })
    }
}

/// Any of the built-in models.
#[derive(Clone, Debug)]
pub enum Model {
    Ising(IsingModel),
    Voting(VotingModel),
    Table(TableModel),
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        ModelSpec::load(path)?.build()
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Ising(m) => ModelSpec::Ising { side: m.side() },
            Model::Voting(m) => ModelSpec::Voting {
                n: m.n(),
                omega: m.omega(),
                omega_t: m.omega_t().to_vec(),
                omega_f: m.omega_f().to_vec(),
            },
            Model::Table(m) => {
                let domains = (0..m.space().n_sites()).map(|i| m.space().domain_size(i)).collect();
                ModelSpec::Table { domains, energies: m.energies().to_vec() }
            }
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Ising(m) => write!(f, "ising{0}x{0}", m.side()),
            Model::Voting(m) => write!(f, "voting{}", m.n()),
            Model::Table(m) => write!(f, "table{}", m.energies().len()),
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Ising($m) => $e,
            Model::Voting($m) => $e,
            Model::Table($m) => $e,
        }
    };
}

impl Hamiltonian for Model {
    fn space(&self) -> &SiteSpace {
        dispatch!(self, m => m.space())
    }
    fn energy(&self, state: &[u8]) -> f64 {
        dispatch!(self, m => m.energy(state))
    }
    fn site_energies(&self, state: &mut [u8], site: usize, out: &mut [f64]) {
        dispatch!(self, m => m.site_energies(state, site, out))
    }
    fn local_energies(&self, state: &mut [u8], site: usize, current: f64, out: &mut [f64]) {
        dispatch!(self, m => m.local_energies(state, site, current, out))
    }
    fn energy_range(&self) -> (f64, f64) {
        dispatch!(self, m => m.energy_range())
    }
}
