//! Multi-scale analysis: the scale ladder, the initial-scale constants,
//! Monte Carlo probability estimates and the coupling checker.

mod coupling;
mod ladder;
mod probability;

pub use coupling::{coupling_check, CouplingOutcome, CouplingReport, Hypothesis};
pub use ladder::{
    kappa_step, kappa_window_floor, ladder, minimal_log_l0, next_scale, scale_loss, series_loss_bound, NextScale,
    ScaleLadder, ScaleLoss,
};
pub use probability::{
    estimate_bad_pair_prob, pair_resonance_check, partner_center, wegner_bound, wegner_check, BadPairReport,
    PairResonanceReport, WegnerReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::WeightParams;

/// Which constant accompanies the resonance term of the κ loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossConstant {
    /// `30 + 2^ρ`.
    #[default]
    TwoPowRho,
    /// `30 + α^{ρ′}`.
    AlphaPowRhoPrime,
}

/// Parameters of the induction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaParams {
    pub alpha: f64,
    pub p: f64,
    pub d: usize,
    pub weights: WeightParams,
    pub kappa0: f64,
    pub kappa_inf: f64,
    #[serde(default)]
    pub loss_constant: LossConstant,
}

impl MsaParams {
    pub fn new(alpha: f64, p: f64, d: usize, weights: WeightParams, kappa0: f64, kappa_inf: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d≥1", "d = 0"));
        }
        let df = d as f64;
        if !(p > 5.0 * df && p.is_finite()) {
            return Err(Error::invalid("p>5d", format!("p = {p}, d = {d}")));
        }
        let alpha_max = 2.0 * p / (p + 2.0 * df);
        if !(alpha > 1.25 && alpha < alpha_max) {
            return Err(Error::invalid(
                "α∈(5/4,2p/(p+2d))",
                format!("alpha = {alpha}, upper end {alpha_max}"),
            ));
        }
        if !(kappa0 > 0.0 && kappa0 <= weights.gamma / 5.0) {
            return Err(Error::invalid(
                "κ₀∈(0,γ/5]",
                format!("kappa0 = {kappa0}, gamma = {}", weights.gamma),
            ));
        }
        if !(kappa_inf > 0.0 && kappa_inf < kappa0) {
            return Err(Error::invalid(
                "κ∞∈(0,κ₀)",
                format!("kappa_inf = {kappa_inf}, kappa0 = {kappa0}"),
            ));
        }
        Ok(MsaParams {
            alpha,
            p,
            d,
            weights,
            kappa0,
            kappa_inf,
            loss_constant: LossConstant::TwoPowRho,
        })
    }

    pub fn with_loss_constant(mut self, c: LossConstant) -> Self {
        self.loss_constant = c;
        self
    }

    /// Numerator of the resonance loss term.
    pub fn resonance_constant(&self) -> f64 {
        match self.loss_constant {
            LossConstant::TwoPowRho => 30.0 + 2f64.powf(self.weights.rho),
            LossConstant::AlphaPowRhoPrime => 30.0 + self.alpha.powf(self.weights.rho_prime),
        }
    }
}

/// Constants of the initial-scale estimate, with their logarithms (the
/// values themselves underflow quickly).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialScaleConstants {
    pub zeta: f64,
    pub eta: f64,
    pub epsilon0: f64,
    pub log_zeta: f64,
    pub log_epsilon0: f64,
    pub l0: u64,
    pub gamma_norm: f64,
}

/// `ζ = ½(β^{−1}L₀^p(2L₀+1)^d)^{−1/λ}`, `η = ζ/2`,
/// `ε₀ = min(ζ/(4‖Γ‖), ζ²/(2(2L₀+1)^d))`.
pub fn initial_constants(
    beta: f64,
    lambda: f64,
    p: f64,
    d: usize,
    l0: u64,
    gamma_norm: f64,
) -> Result<InitialScaleConstants> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("β>0", format!("beta = {beta}")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("λ∈(0,1]", format!("lambda = {lambda}")));
    }
    if !(p > 0.0) || d == 0 || l0 == 0 {
        return Err(Error::invalid(
            "p>0, d≥1, L₀≥1",
            format!("p = {p}, d = {d}, L0 = {l0}"),
        ));
    }
    if !(gamma_norm > 0.0) {
        return Err(Error::invalid("‖Γ‖>0", format!("gamma_norm = {gamma_norm}")));
    }
    let log_volume = d as f64 * (2.0 * l0 as f64 + 1.0).ln();
    let log_zeta = -std::f64::consts::LN_2 - (-beta.ln() + p * (l0 as f64).ln() + log_volume) / lambda;
    let log_first = log_zeta - (4.0 * gamma_norm).ln();
    let log_second = 2.0 * log_zeta - std::f64::consts::LN_2 - log_volume;
    let log_epsilon0 = log_first.min(log_second);
    let zeta = log_zeta.exp();
    Ok(InitialScaleConstants {
        zeta,
        eta: zeta / 2.0,
        epsilon0: log_epsilon0.exp(),
        log_zeta,
        log_epsilon0,
        l0,
        gamma_norm,
    })
}
