//! Monte Carlo estimates of resonance and bad-cube probabilities.
//!
//! Every trial draws its potential from the counter-keyed stream, so a trial
//! index fully determines its outcome and disjoint trial ranges can be
//! tallied separately and merged.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::greens::{classify_cube_energies, distance_to_sorted};
use crate::lattice::{LatticeBox, Site};
use crate::operator::Model;
use crate::stats::{Estimate, Executor, Tally};
use crate::weight::WeightParams;

/// `β^{−1}2^λ(2L+1)^{d(1+λ)}ε^λ`.
pub fn wegner_bound(spec: &DisorderSpec, d: usize, radius: i64, eps: f64) -> f64 {
    let n = (2.0 * radius as f64 + 1.0).powi(d as i32);
    2f64.powf(spec.lambda) * n.powf(1.0 + spec.lambda) * eps.powf(spec.lambda) / spec.beta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub radius: i64,
    pub energy: f64,
    pub eps: f64,
    pub tally: Tally,
    pub estimate: Option<Estimate>,
    pub bound: f64,
    /// Observed frequency at or below the bound.
    pub frequency_within: bool,
    /// Upper CI edge at or below `bound + slack`.
    pub ci_within: bool,
}

/// Frequency of `dist(E, σ(H_{B_L})) ≤ ε` against the Wegner bound.
#[allow(clippy::too_many_arguments)]
pub fn wegner_check(
    model: &Model,
    d: usize,
    radius: i64,
    energy: f64,
    eps: f64,
    trials: Range<u64>,
    seed: u64,
    executor: &Executor,
) -> Result<WegnerReport> {
    let spec = &model.disorder;
    if !spec.is_holder_kind() {
        return Err(Error::Precondition(
            "the disorder law has atoms, so no Hölder bound μ([a,b]) ≤ β^{−1}|b−a|^λ holds".into(),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid("ε≥0", format!("eps = {eps}")));
    }
    let volume = (2.0 * radius as f64 + 1.0).powi(d as i32);
    if eps * volume > spec.beta0 {
        return Err(Error::Precondition(format!(
            "ε(2L+1)^d ≤ β₀ fails: {eps}·{volume} > {}",
            spec.beta0
        )));
    }
    let b = LatticeBox::centered(d, radius)?;
    let hits = executor.run(trials, |t| {
        let sample = model.sample(&b, seed, t)?;
        Ok(distance_to_sorted(sample.spectrum(), energy) <= eps)
    })?;
    let tally: Tally = hits.into_iter().collect();
    let bound = wegner_bound(spec, d, radius, eps);
    let estimate = tally.estimate();
    Ok(WegnerReport {
        radius,
        energy,
        eps,
        tally,
        frequency_within: estimate.map_or(true, |e| e.frequency <= bound),
        ci_within: estimate.map_or(true, |e| e.ci_high <= bound + 0.02),
        estimate,
        bound,
    })
}

/// Center of the partner box: `(2L+1)e₁`, so `B_L(0)` and `B_L(partner)`
/// are disjoint and carry independent potentials.
pub fn partner_center(d: usize, radius: i64) -> Site {
    Site::origin(d).shifted(0, 2 * radius + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResonanceReport {
    pub big_l: i64,
    pub l: i64,
    /// `2e^{−log^{ρ′}L}`.
    pub threshold: f64,
    pub tally: Tally,
    pub estimate: Option<Estimate>,
    /// `2β^{−1}4^λ(2L+1)^{d(4+λ)}e^{−λ log^{ρ′}l}`.
    pub event_bound: f64,
    /// `β^{−1}4^λ(2L+1)^{d(2+λ)}e^{−λ log^{ρ′}L}`, the single-pair estimate.
    pub pair_bound: f64,
    pub event_bound_vacuous: bool,
    pub pair_bound_vacuous: bool,
    /// Both boxes used the same potential.
    pub diagnostic: bool,
    /// `26l ≤ L`, needed for the bounds to describe the multi-scale event;
    /// the frequency itself is meaningful either way.
    pub scales_nested: bool,
}

/// Frequency of `dist(σ(H₁), σ(H₂)) ≤ 2e^{−log^{ρ′}L}` for two disjoint boxes.
///
/// In diagnostic mode the second box is the first one again.
#[allow(clippy::too_many_arguments)]
pub fn pair_resonance_check(
    model: &Model,
    d: usize,
    big_l: i64,
    l: i64,
    weights: &WeightParams,
    trials: Range<u64>,
    seed: u64,
    diagnostic: bool,
    executor: &Executor,
) -> Result<PairResonanceReport> {
    if l < 1 || big_l < 1 {
        return Err(Error::invalid("L≥1, l≥1", format!("l = {l}, L = {big_l}")));
    }
    let rp = weights.rho_prime;
    let threshold = 2.0 * (-(big_l as f64).ln().powf(rp)).exp();
    let b1 = LatticeBox::centered(d, big_l)?;
    let b2 = if diagnostic {
        b1.clone()
    } else {
        LatticeBox::new(partner_center(d, big_l), big_l)?
    };
    let hits = executor.run(trials, |t| {
        let s1 = model.sample(&b1, seed, t)?;
        let s2 = model.sample(&b2, seed, t)?;
        let other = s2.spectrum();
        Ok(s1
            .spectrum()
            .iter()
            .any(|&e| distance_to_sorted(other, e) <= threshold))
    })?;
    let tally: Tally = hits.into_iter().collect();
    let spec = &model.disorder;
    let lam = spec.lambda;
    let n = (2.0 * big_l as f64 + 1.0).powi(d as i32);
    let event_bound =
        2.0 * 4f64.powf(lam) * n.powf(4.0 + lam) * (-lam * (l as f64).ln().powf(rp)).exp() / spec.beta;
    let pair_bound = 4f64.powf(lam) * n.powf(2.0 + lam) * (-lam * (big_l as f64).ln().powf(rp)).exp() / spec.beta;
    Ok(PairResonanceReport {
        big_l,
        l,
        threshold,
        estimate: tally.estimate(),
        tally,
        event_bound,
        pair_bound,
        event_bound_vacuous: event_bound >= 1.0,
        pair_bound_vacuous: pair_bound >= 1.0,
        diagnostic,
        scales_nested: 26 * l <= big_l,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPairReport {
    pub radius: i64,
    pub kappa: f64,
    pub energies: Vec<f64>,
    pub tally: Tally,
    /// `None` when no trials ran.
    pub estimate: Option<Estimate>,
}

/// Frequency that some grid energy makes both `B_L(0)` and `B_L((2L+1)e₁)`
/// `(κ,E)`-bad. The grid under-approximates "some `E` in the interval".
#[allow(clippy::too_many_arguments)]
pub fn estimate_bad_pair_prob(
    model: &Model,
    d: usize,
    radius: i64,
    kappa: f64,
    energies: &[f64],
    weights: &WeightParams,
    trials: Range<u64>,
    seed: u64,
    executor: &Executor,
) -> Result<BadPairReport> {
    if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("finite non-empty energy grid", format!("{energies:?}")));
    }
    let b1 = LatticeBox::centered(d, radius)?;
    let b2 = LatticeBox::new(partner_center(d, radius), radius)?;
    let hits = executor.run(trials, |t| {
        let r1 = classify_cube_energies(&model.sample(&b1, seed, t)?, energies, kappa, weights)?;
        let r2 = classify_cube_energies(&model.sample(&b2, seed, t)?, energies, kappa, weights)?;
        Ok(r1.iter().zip(&r2).any(|(a, b)| !a.good && !b.good))
    })?;
    let tally: Tally = hits.into_iter().collect();
    Ok(BadPairReport {
        radius,
        kappa,
        energies: energies.to_vec(),
        estimate: tally.estimate(),
        tally,
    })
}
