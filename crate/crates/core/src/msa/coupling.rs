//! Direct verification of the coupling step on one sampled box.
//!
//! Given `B_L(x)` with `L = [l^α]`, the step asserts that `B_L(x)` is
//! `(κ′,E)`-good whenever (1) `B_L(x)` is E-NR, (2) every `B_{jl}(z) ⊆ B_L(x)`
//! with `j ∈ {2, 8, 26}` is E-NR at its own scale, and (3) at most three
//! pairwise disjoint `l`-cubes are `(κ,E)`-bad. Here `κ′ = κ − loss(log l)`.

use serde::{Deserialize, Serialize};

use super::{next_scale, scale_loss, MsaParams};
use crate::error::{Error, Result};
use crate::greens::{classify_cube, is_e_nr, SourceMode};
use crate::lattice::{LatticeBox, Site};
use crate::operator::OperatorSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    OuterNonResonant,
    SubcubesNonResonant,
    FewBadCubes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingOutcome {
    Pass,
    Counterexample,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub outcome: CouplingOutcome,
    pub energy: f64,
    pub l: i64,
    pub big_l: i64,
    pub kappa: f64,
    pub kappa_prime: f64,
    /// `log(dist/threshold)` for the outer box.
    pub outer_log_margin: f64,
    /// Smallest `log(dist/threshold)` over the `2l`, `8l`, `26l` subcubes;
    /// `None` when no such subcube fits.
    pub subcube_log_margin: Option<f64>,
    pub subcubes_checked: usize,
    /// Centers of the greedily extracted disjoint bad `l`-cubes.
    pub bad_cubes: Vec<Site>,
    pub l_cubes_checked: usize,
    pub failed: Vec<Hypothesis>,
    /// `log|G| + κ′ log^ρ(‖x−y‖+1)` at the worst out-shell site, when the
    /// conclusion was evaluated.
    pub conclusion_log_excess: Option<f64>,
    /// The hypothesis closest to failing, measured on a common log scale
    /// (the bad-cube count enters as `log(4/(count+1))`).
    pub tightest: Hypothesis,
}

fn contained_centers(parent: &LatticeBox, radius: i64) -> Result<Vec<Site>> {
    let inner = parent.radius() - radius;
    Ok(match inner {
        i if i < 0 => Vec::new(),
        0 => vec![parent.center().clone()],
        i => LatticeBox::new(parent.center().clone(), i)?.sites().collect(),
    })
}

/// Evaluates the hypotheses on `outer` and, if they hold, the conclusion.
pub fn coupling_check(
    outer: &OperatorSample,
    energy: f64,
    l: i64,
    kappa: f64,
    params: &MsaParams,
) -> Result<CouplingReport> {
    let b = outer.lattice_box();
    if l < 2 {
        return Err(Error::invalid("l≥2", format!("l = {l}")));
    }
    let expected = next_scale(l as u64, params.alpha)?.scale;
    if expected != b.radius() as u64 {
        return Err(Error::Precondition(format!(
            "L = [l^α] fails: [{l}^{}] = {expected}, box radius {}",
            params.alpha,
            b.radius()
        )));
    }
    let weights = &params.weights;
    let rp = weights.rho_prime;

    let outer_res = is_e_nr(outer, energy, rp);
    let outer_log_margin = outer_res.log_margin();

    let mut subcube_log_margin: Option<f64> = None;
    let mut subcubes_checked = 0;
    for j in [2, 8, 26] {
        for z in contained_centers(b, j * l)? {
            let sub = outer.restrict(&LatticeBox::new(z, j * l)?)?;
            let m = is_e_nr(&sub, energy, rp).log_margin();
            subcube_log_margin = Some(subcube_log_margin.map_or(m, |s: f64| s.min(m)));
            subcubes_checked += 1;
        }
    }

    let mut bad_cubes: Vec<Site> = Vec::new();
    let mut l_cubes_checked = 0;
    for z in contained_centers(b, l)? {
        l_cubes_checked += 1;
        if bad_cubes.iter().any(|c| c.sup_dist(&z) <= 2 * l) {
            continue;
        }
        let sub = outer.restrict(&LatticeBox::new(z.clone(), l)?)?;
        if !classify_cube(&sub, energy, kappa, weights, SourceMode::Center)?.good {
            bad_cubes.push(z);
        }
    }

    let mut failed = Vec::new();
    if outer_log_margin < 0.0 {
        failed.push(Hypothesis::OuterNonResonant);
    }
    if subcube_log_margin.is_some_and(|m| m < 0.0) {
        failed.push(Hypothesis::SubcubesNonResonant);
    }
    if bad_cubes.len() > 3 {
        failed.push(Hypothesis::FewBadCubes);
    }

    let kappa_prime = kappa - scale_loss((l as f64).ln(), params)?.total();
    let (outcome, conclusion_log_excess) = if failed.is_empty() {
        let report = classify_cube(outer, energy, kappa_prime, weights, SourceMode::Center)?;
        let outcome = if report.good {
            CouplingOutcome::Pass
        } else {
            CouplingOutcome::Counterexample
        };
        (outcome, report.worst_witness.map(|w| w.log_excess))
    } else {
        (CouplingOutcome::NotApplicable, None)
    };

    let count_margin = (4.0 / (bad_cubes.len() as f64 + 1.0)).ln();
    let mut candidates = vec![
        (outer_log_margin, Hypothesis::OuterNonResonant),
        (count_margin, Hypothesis::FewBadCubes),
    ];
    if let Some(m) = subcube_log_margin {
        candidates.push((m, Hypothesis::SubcubesNonResonant));
    }
    let tightest = candidates
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|c| c.1)
        .expect("non-empty");

    Ok(CouplingReport {
        outcome,
        energy,
        l,
        big_l: b.radius(),
        kappa,
        kappa_prime,
        outer_log_margin,
        subcube_log_margin,
        subcubes_checked,
        bad_cubes,
        l_cubes_checked,
        failed,
        conclusion_log_excess,
        tightest,
    })
}
