//! Disorder laws, their Hölder certificates, and i.i.d. potential sampling.
//!
//! Every site draw is keyed by `(seed, trial, site)` through a ChaCha8
//! stream: the seed and trial form the key, the packed site coordinates
//! select the stream. A site therefore carries the same potential in every
//! box that contains it, and trials can run on any worker in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeBox;

/// Coordinates must satisfy `|c| < 2^20` so three of them pack into a stream id.
pub const MAX_SAMPLED_COORD: i64 = 1 << 20;
const MAX_SAMPLED_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisorderKind {
    /// Uniform on `[−M, M]`.
    Uniform,
    /// `V = U^{1/λ}` with `U` uniform on `[0,1]`, so `P(V ≤ v) = v^λ`.
    Power,
    /// `V = high` with probability `p`, else `low`.
    Bernoulli { low: f64, high: f64, p: f64 },
    /// Piecewise-linear quantile function through `quantiles[k]` at `u = k/K`.
    QuantileTable { quantiles: Vec<f64> },
}

/// A single-site law with its Hölder data `(λ, β, β₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// Support bound `M`: `supp μ ⊆ [−M, M]`.
    pub m: f64,
    pub lambda: f64,
    pub beta: f64,
    pub beta0: f64,
}

impl DisorderSpec {
    pub fn new(kind: DisorderKind, m: f64, lambda: f64, beta: f64, beta0: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("supp(μ)⊆[−M,M] with M>0", format!("M = {m}")));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::invalid("λ∈(0,1]", format!("lambda = {lambda}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("β>0", format!("beta = {beta}")));
        }
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::invalid("β₀>0", format!("beta0 = {beta0}")));
        }
        let within = |v: f64| v.is_finite() && v.abs() <= m;
        match &kind {
            DisorderKind::Uniform => {}
            DisorderKind::Power => {
                if m < 1.0 {
                    return Err(Error::invalid("supp(μ)⊆[−M,M]", format!("power law lives on [0,1] but M = {m}")));
                }
            }
            DisorderKind::Bernoulli { low, high, p } => {
                if !(within(*low) && within(*high)) {
                    return Err(Error::invalid("supp(μ)⊆[−M,M]", format!("atoms {low}, {high} with M = {m}")));
                }
                if !(low < high) {
                    return Err(Error::invalid(
                        "supp(μ) contains at least two points",
                        format!("atoms {low}, {high}"),
                    ));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid("p∈[0,1]", format!("p = {p}")));
                }
            }
            DisorderKind::QuantileTable { quantiles } => {
                if quantiles.len() < 2 || !quantiles.iter().all(|&q| within(q)) {
                    return Err(Error::invalid("supp(μ)⊆[−M,M]", format!("quantiles {quantiles:?} with M = {m}")));
                }
                if quantiles.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::invalid("non-decreasing quantile table", format!("{quantiles:?}")));
                }
                if quantiles[0] == quantiles[quantiles.len() - 1] {
                    return Err(Error::invalid("supp(μ) contains at least two points", format!("{quantiles:?}")));
                }
            }
        }
        Ok(DisorderSpec {
            kind,
            m,
            lambda,
            beta,
            beta0,
        })
    }

    /// Uniform law on `[−M, M]` with `λ = 1`.
    pub fn uniform(m: f64, beta: f64, beta0: f64) -> Result<Self> {
        Self::new(DisorderKind::Uniform, m, 1.0, beta, beta0)
    }

    /// `true` for kinds with a Hölder-continuous law (everything but Bernoulli).
    pub fn is_holder_kind(&self) -> bool {
        !matches!(self.kind, DisorderKind::Bernoulli { .. })
    }

    /// Quantile function `u ∈ [0,1) ↦ V`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            DisorderKind::Uniform => -self.m + 2.0 * self.m * u,
            DisorderKind::Power => u.powf(1.0 / self.lambda),
            DisorderKind::Bernoulli { low, high, p } => {
                if u < *p {
                    *high
                } else {
                    *low
                }
            }
            DisorderKind::QuantileTable { quantiles } => {
                let k = (quantiles.len() - 1) as f64;
                let t = (u * k).min(k);
                let i = (t.floor() as usize).min(quantiles.len() - 2);
                let frac = t - i as f64;
                quantiles[i] + frac * (quantiles[i + 1] - quantiles[i])
            }
        }
    }

    /// `μ((−∞, v])`.
    pub fn cdf(&self, v: f64) -> f64 {
        match &self.kind {
            DisorderKind::Uniform => ((v + self.m) / (2.0 * self.m)).clamp(0.0, 1.0),
            DisorderKind::Power => v.clamp(0.0, 1.0).powf(self.lambda),
            DisorderKind::Bernoulli { low, high, p } => {
                if v < *low {
                    0.0
                } else if v < *high {
                    1.0 - p
                } else {
                    1.0
                }
            }
            DisorderKind::QuantileTable { quantiles } => table_cdf(quantiles, v),
        }
    }

    /// `μ((−∞, v))`.
    fn cdf_left(&self, v: f64) -> f64 {
        match &self.kind {
            DisorderKind::Bernoulli { low, high, p } => {
                if v <= *low {
                    0.0
                } else if v <= *high {
                    1.0 - p
                } else {
                    1.0
                }
            }
            _ => self.cdf(v),
        }
    }

    /// `μ([a, b])`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b < a {
            0.0
        } else {
            (self.cdf(b) - self.cdf_left(a)).max(0.0)
        }
    }

    /// Points where `a ↦ μ([a, a+δ])` can change slope.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DisorderKind::Uniform => vec![-self.m, self.m],
            DisorderKind::Power => vec![0.0, 1.0],
            DisorderKind::Bernoulli { low, high, .. } => vec![*low, *high],
            DisorderKind::QuantileTable { quantiles } => quantiles.clone(),
        }
    }

    /// `sup_a μ([a, a+δ])`, exact for every supported kind.
    pub fn max_interval_mass(&self, delta: f64) -> f64 {
        let bps = self.breakpoints();
        bps.iter()
            .flat_map(|&b| [b, b - delta])
            .map(|a| self.interval_mass(a, a + delta))
            .fold(0.0, f64::max)
    }
}

/// CDF of the piecewise-linear quantile table (piecewise-constant density).
fn table_cdf(q: &[f64], v: f64) -> f64 {
    let k = (q.len() - 1) as f64;
    if v < q[0] {
        return 0.0;
    }
    if v >= q[q.len() - 1] {
        return 1.0;
    }
    // Last segment whose left node is ≤ v; flat segments are atoms of zero width.
    let mut acc = 0.0;
    for (i, w) in q.windows(2).enumerate() {
        if v >= w[1] {
            acc = (i + 1) as f64 / k;
            continue;
        }
        if v >= w[0] && w[1] > w[0] {
            acc = (i as f64 + (v - w[0]) / (w[1] - w[0])) / k;
        }
        break;
    }
    acc
}

fn pack_site(site: &[i64]) -> Result<u64> {
    if site.len() > MAX_SAMPLED_DIM {
        return Err(Error::invalid("d≤3 for sampling", format!("d = {}", site.len())));
    }
    let mut code = 0u64;
    for &c in site {
        if c.abs() >= MAX_SAMPLED_COORD {
            return Err(Error::Precondition(format!(
                "site coordinate {c} outside the sampled range |c| < 2^20"
            )));
        }
        code = (code << 21) | (c + MAX_SAMPLED_COORD) as u64;
    }
    Ok(code)
}

/// The uniform variate attached to `(seed, trial, site)`, in `[0, 1)`.
pub fn site_uniform(seed: u64, trial: u64, site: &[i64]) -> Result<f64> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&(site.len() as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(pack_site(site)?);
    Ok((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// One i.i.d. draw per site of `b`, in the box's lexicographic order.
pub fn sample_potential(b: &LatticeBox, spec: &DisorderSpec, seed: u64, trial: u64) -> Result<Vec<f64>> {
    let mut buf = vec![0; b.dim()];
    (0..b.checked_len().ok_or_else(|| Error::invalid("(2L+1)^d fits in memory", format!("{b}")))?)
        .map(|i| {
            b.coords_into(i, &mut buf);
            site_uniform(seed, trial, &buf).map(|u| spec.quantile(u))
        })
        .collect()
}

/// One row of a Hölder check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub delta: f64,
    /// `sup_a μ([a, a+δ])`.
    pub max_mass: f64,
    /// `β^{−1} δ^λ`.
    pub bound: f64,
    /// `false` when `δ > β₀` (outside the certified range, not checked).
    pub checked: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub rows: Vec<HolderRow>,
    pub pass: bool,
    /// `false` for laws with atoms; such laws never satisfy the bound for
    /// small enough `δ`.
    pub holder_kind: bool,
}

/// Checks `μ([a,b]) ≤ β^{−1}|b−a|^λ` for `0 ≤ b−a ≤ β₀` on a grid of widths.
///
/// Equality is accepted up to a relative `1e-12`.
pub fn holder_check(spec: &DisorderSpec, deltas: &[f64]) -> HolderReport {
    let rows: Vec<HolderRow> = deltas
        .iter()
        .map(|&delta| {
            let max_mass = spec.max_interval_mass(delta);
            let bound = delta.powf(spec.lambda) / spec.beta;
            let checked = delta >= 0.0 && delta <= spec.beta0;
            HolderRow {
                delta,
                max_mass,
                bound,
                checked,
                pass: !checked || max_mass <= bound * (1.0 + 1e-12),
            }
        })
        .collect();
    HolderReport {
        pass: rows.iter().all(|r| r.pass),
        rows,
        holder_kind: spec.is_holder_kind(),
    }
}
