//! The scale ladder `L_{s+1} = [L_s^α]` and the κ recursion, in log domain.
//!
//! Admissible starting scales have `log L₀` in the millions, so the ladder
//! never materialises `L`: it carries `log L_s` and uses the continuous
//! surrogate `log L_{s+1} = α·log L_s`.

use serde::{Deserialize, Serialize};

use super::MsaParams;
use crate::error::{Error, Result};

/// Result of one integer scale step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextScale {
    pub scale: u64,
    /// `[L^α] ≤ L`: the ladder does not grow at this step.
    pub stalled: bool,
}

/// `[L^α]`.
pub fn next_scale(l: u64, alpha: f64) -> Result<NextScale> {
    if l < 2 {
        return Err(Error::invalid("L≥2", format!("L = {l}")));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::invalid("α≥1", format!("alpha = {alpha}")));
    }
    let log_next = alpha * (l as f64).ln();
    if log_next >= 63.0 * std::f64::consts::LN_2 {
        return Err(Error::NumericalRefusal(format!(
            "[{l}^{alpha}] exceeds 2^63; use the log-domain ladder"
        )));
    }
    let raw = (l as f64).powf(alpha);
    // Snap values that are integers up to rounding before taking the floor.
    let nearest = raw.round();
    let scale = if (raw - nearest).abs() <= 4.0 * f64::EPSILON * raw {
        nearest
    } else {
        raw.floor()
    } as u64;
    Ok(NextScale {
        scale,
        stalled: scale <= l,
    })
}

/// The three loss terms subtracted from κ at one scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLoss {
    /// `10γ/log^{ρ−1} L`.
    pub envelope: f64,
    /// `10γ/L^{4α/5−1}`.
    pub boundary: f64,
    /// `(30+c)/log^{ρ−ρ′} L`.
    pub resonance: f64,
}

impl ScaleLoss {
    pub fn total(&self) -> f64 {
        self.envelope + self.boundary + self.resonance
    }
}

/// Loss terms evaluated at `log L`.
pub fn scale_loss(log_l: f64, params: &MsaParams) -> Result<ScaleLoss> {
    if !(log_l > 0.0) {
        return Err(Error::invalid("log L>0", format!("log L = {log_l}")));
    }
    let w = &params.weights;
    if log_l.is_infinite() {
        return Ok(ScaleLoss {
            envelope: 0.0,
            boundary: 0.0,
            resonance: 0.0,
        });
    }
    Ok(ScaleLoss {
        envelope: 10.0 * w.gamma / log_l.powf(w.rho - 1.0),
        boundary: 10.0 * w.gamma * (-(0.8 * params.alpha - 1.0) * log_l).exp(),
        resonance: params.resonance_constant() / log_l.powf(w.rho - w.rho_prime),
    })
}

/// `κ_{s+1} = κ_s − loss(log L_s)`.
pub fn kappa_step(kappa: f64, log_l: f64, params: &MsaParams) -> Result<f64> {
    Ok(kappa - scale_loss(log_l, params)?.total())
}

/// Lower end of the κ window at scale `l`: `11γ/log^{ρ−1}l + 11γ/l^{4α/5−1} + (31+2^ρ)/log^{ρ−ρ′}l`.
pub fn kappa_window_floor(log_l: f64, params: &MsaParams) -> Result<f64> {
    if !(log_l > 0.0) {
        return Err(Error::invalid("log L>0", format!("log L = {log_l}")));
    }
    let w = &params.weights;
    Ok(11.0 * w.gamma / log_l.powf(w.rho - 1.0)
        + 11.0 * w.gamma * (-(0.8 * params.alpha - 1.0) * log_l).exp()
        + (31.0 + 2f64.powf(w.rho)) / log_l.powf(w.rho - w.rho_prime))
}

/// Closed-form upper bound on the total loss `Σ_k loss(α^k log L₀)`.
///
/// The first and third terms are geometric series with ratios
/// `α^{−(ρ−1)}` and `α^{−(ρ−ρ′)}`; the middle one uses
/// `α^k ≥ 1 + k(α−1)` to become geometric too.
pub fn series_loss_bound(log_l0: f64, params: &MsaParams) -> Result<f64> {
    let first = scale_loss(log_l0, params)?;
    let a = params.alpha;
    let w = &params.weights;
    let ratio_env = a.powf(-(w.rho - 1.0));
    let ratio_res = a.powf(-(w.rho - w.rho_prime));
    let decay = (0.8 * a - 1.0) * log_l0;
    let boundary = if decay.is_infinite() {
        0.0
    } else {
        10.0 * w.gamma * (-decay).exp() / -(-decay * (a - 1.0)).exp_m1()
    };
    Ok(first.envelope / (1.0 - ratio_env) + boundary + first.resonance / (1.0 - ratio_res))
}

/// Iterated ladder over `horizon` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    /// `log L_s` for `s = 0..=horizon`.
    pub log_l: Vec<f64>,
    /// `κ_s` for `s = 0..=horizon`.
    pub kappa: Vec<f64>,
    pub horizon: usize,
    /// `min_s κ_s > κ∞` over the horizon.
    pub valid: bool,
    /// `κ₀ − κ_horizon`.
    pub total_loss: f64,
    /// Closed-form series bound at `log L₀`.
    pub series_bound: f64,
    /// `series_bound < κ₀ − κ∞`: validity for every horizon.
    pub series_valid: bool,
}

pub fn ladder(params: &MsaParams, log_l0: f64, horizon: usize) -> Result<ScaleLadder> {
    if horizon < 1 {
        return Err(Error::invalid("horizon≥1", "horizon = 0"));
    }
    let mut log_l = Vec::with_capacity(horizon + 1);
    let mut kappa = Vec::with_capacity(horizon + 1);
    log_l.push(log_l0);
    kappa.push(params.kappa0);
    for s in 0..horizon {
        kappa.push(kappa_step(kappa[s], log_l[s], params)?);
        log_l.push(params.alpha * log_l[s]);
    }
    let min_kappa = kappa.iter().copied().fold(f64::INFINITY, f64::min);
    let series_bound = series_loss_bound(log_l0, params)?;
    Ok(ScaleLadder {
        total_loss: params.kappa0 - kappa[horizon],
        valid: min_kappa > params.kappa_inf,
        series_valid: series_bound < params.kappa0 - params.kappa_inf,
        series_bound,
        log_l,
        kappa,
        horizon,
    })
}

/// Smallest `log L₀` (to relative `1e-12`) whose series bound is strictly
/// below `κ₀ − κ∞`. `None` when `κ₀ = κ∞`.
pub fn minimal_log_l0(params: &MsaParams) -> Result<Option<f64>> {
    let budget = params.kappa0 - params.kappa_inf;
    if !(budget > 0.0) {
        return Ok(None);
    }
    let ok = |x: f64| series_loss_bound(x, params).map(|b| b < budget);
    let mut lo = 1.0;
    if ok(lo)? {
        return Ok(Some(lo));
    }
    let mut hi = 2.0;
    while !ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(None);
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
