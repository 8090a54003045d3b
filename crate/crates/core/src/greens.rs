//! Spectra, resolvents, resonance and goodness classification.
//!
//! A box `B_L(x)` is *E-non-resonant* when `dist(E, σ(H_B)) ≥ e^{−log^{ρ′}L}`
//! and *(κ,E)-good* when it is non-resonant and
//! `|G(x,y)| ≤ e^{−κ log^ρ(‖x−y‖+1)}` on the out-shell `L^{4/5} < ‖y−x‖ ≤ L`.
//! Envelope comparisons are done in log space so they stay monotone in κ and
//! never underflow.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Site};
use crate::operator::OperatorSample;
use crate::weight::{log_weight, WeightParams};

/// Resolvents closer than this to the spectrum are refused.
pub const REFUSAL_DISTANCE: f64 = 1e-12;

/// Ascending spectrum of the sample.
pub fn spectrum(sample: &OperatorSample) -> &[f64] {
    sample.spectrum()
}

/// `dist(E, σ(H_B))`.
pub fn resonance_distance(sample: &OperatorSample, energy: f64) -> f64 {
    distance_to_sorted(sample.spectrum(), energy)
}

pub(crate) fn distance_to_sorted(values: &[f64], energy: f64) -> f64 {
    let pos = values.partition_point(|&v| v < energy);
    let above = values.get(pos).map(|v| v - energy);
    let below = pos.checked_sub(1).map(|i| energy - values[i]);
    match (above, below) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => f64::INFINITY,
    }
}

/// `e^{−log^{ρ′} L}`.
pub fn nr_threshold(radius: i64, rho_prime: f64) -> f64 {
    (-(radius as f64).ln().powf(rho_prime)).exp()
}

/// Resonance verdict for one `(box, E)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub distance: f64,
    pub threshold: f64,
    pub non_resonant: bool,
    /// `L = 1`: `log L = 0` makes the threshold 1.
    pub degenerate: bool,
}

impl Resonance {
    pub fn new(distance: f64, radius: i64, rho_prime: f64) -> Self {
        let threshold = nr_threshold(radius, rho_prime);
        Resonance {
            distance,
            threshold,
            non_resonant: distance >= threshold,
            degenerate: radius == 1,
        }
    }

    /// `log(distance/threshold)`; non-negative iff non-resonant.
    pub fn log_margin(&self) -> f64 {
        self.distance.ln() - self.threshold.ln()
    }
}

/// E-NR test with `L` the box radius.
pub fn is_e_nr(sample: &OperatorSample, energy: f64, rho_prime: f64) -> Resonance {
    Resonance::new(
        resonance_distance(sample, energy),
        sample.lattice_box().radius(),
        rho_prime,
    )
}

/// `G = (H_B − E)^{−1}` via LU factorisation of the shifted matrix.
pub fn greens(sample: &OperatorSample, energy: f64) -> Result<DMatrix<Complex64>> {
    let distance = resonance_distance(sample, energy);
    if distance < REFUSAL_DISTANCE {
        return Err(Error::NumericalRefusal(format!(
            "E = {energy} lies within {distance:e} of σ(H) for {}",
            sample.lattice_box()
        )));
    }
    sample.matrix().shifted_inverse(energy).ok_or_else(|| {
        Error::NumericalRefusal(format!("singular shift at E = {energy} for {}", sample.lattice_box()))
    })
}

/// Row `G(x, ·)` from the eigendecomposition: `Σ_k v_k(x) v̄_k(·)/(λ_k − E)`.
pub fn greens_row_spectral(sample: &OperatorSample, source: usize, energy: f64) -> Result<Vec<Complex64>> {
    let distance = resonance_distance(sample, energy);
    if distance < REFUSAL_DISTANCE {
        return Err(Error::NumericalRefusal(format!(
            "E = {energy} lies within {distance:e} of σ(H) for {}",
            sample.lattice_box()
        )));
    }
    let eig = sample.eigensystem();
    let n = sample.dim();
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(k);
        let w = col[source] / (lambda - energy);
        for (y, r) in row.iter_mut().enumerate() {
            *r += w * col[y].conj();
        }
    }
    Ok(row)
}

/// The out-shell site where `|G(x,y)|` comes closest to (or furthest past)
/// its allowed envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub source: Site,
    pub site: Site,
    /// `|G(x, y)|`.
    pub value: f64,
    /// `e^{−κ log^ρ(‖x−y‖+1)}`.
    pub envelope: f64,
    /// `log|G(x,y)| + κ log^ρ(‖x−y‖+1)`; positive means violation.
    pub log_excess: f64,
}

impl Witness {
    pub fn violates(&self) -> bool {
        self.log_excess > 0.0
    }
}

/// Classification of one cube at one energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeReport {
    pub lattice_box: LatticeBox,
    pub energy: f64,
    pub resonance_distance: f64,
    pub nr_threshold: f64,
    pub enr: bool,
    pub kappa: f64,
    pub good: bool,
    /// Present whenever the cube is non-resonant and its out-shell is not
    /// empty.
    pub worst_witness: Option<Witness>,
}

/// Which sources the decay condition is tested from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceMode {
    /// The box center, as in the definition of a good cube.
    #[default]
    Center,
    /// Every site `x'` of the box, against the out-shell around `x'`'s own
    /// center; strictly stronger than the definition.
    AllSites,
}

/// How Green's function rows are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GreensRoute {
    /// LU factorisation of `H − E`.
    #[default]
    Factorization,
    /// Eigendecomposition, reused across energies.
    Spectral,
}

/// Classifies `B_L(x)` as `(κ,E)`-good or bad.
pub fn classify_cube(
    sample: &OperatorSample,
    energy: f64,
    kappa: f64,
    weights: &WeightParams,
    mode: SourceMode,
) -> Result<CubeReport> {
    classify_with(sample, energy, kappa, weights, mode, GreensRoute::Factorization)
}

/// Classifies the cube at every energy, reusing one eigendecomposition.
pub fn classify_cube_energies(
    sample: &OperatorSample,
    energies: &[f64],
    kappa: f64,
    weights: &WeightParams,
) -> Result<Vec<CubeReport>> {
    energies
        .iter()
        .map(|&e| classify_with(sample, e, kappa, weights, SourceMode::Center, GreensRoute::Spectral))
        .collect()
}

pub(crate) fn classify_with(
    sample: &OperatorSample,
    energy: f64,
    kappa: f64,
    weights: &WeightParams,
    mode: SourceMode,
    route: GreensRoute,
) -> Result<CubeReport> {
    if !(kappa.is_finite()) {
        return Err(Error::invalid("finite κ", format!("kappa = {kappa}")));
    }
    let b = sample.lattice_box();
    let resonance = is_e_nr(sample, energy, weights.rho_prime);
    let mut report = CubeReport {
        lattice_box: b.clone(),
        energy,
        resonance_distance: resonance.distance,
        nr_threshold: resonance.threshold,
        enr: resonance.non_resonant,
        kappa,
        good: false,
        worst_witness: None,
    };
    if !resonance.non_resonant {
        return Ok(report);
    }

    let center = b.index_of(b.center().coords()).expect("center inside box");
    let shell = b.out_shell_indices();
    let sources: Vec<usize> = match mode {
        SourceMode::Center => vec![center],
        SourceMode::AllSites => (0..b.len()).collect(),
    };
    let full = match (route, mode) {
        (GreensRoute::Factorization, _) => Some(greens(sample, energy)?),
        (GreensRoute::Spectral, SourceMode::AllSites) => Some(greens(sample, energy)?),
        (GreensRoute::Spectral, SourceMode::Center) => None,
    };
    let spectral_row = match &full {
        Some(_) => None,
        None => Some(greens_row_spectral(sample, center, energy)?),
    };

    let d = b.dim();
    let mut src = vec![0; d];
    let mut dst = vec![0; d];
    let mut disp = vec![0; d];
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for &s in &sources {
        b.coords_into(s, &mut src);
        // For off-center sources the shell is taken around the source with the
        // same radius, restricted to the box.
        let targets: Vec<usize> = if s == center {
            shell.clone()
        } else {
            let threshold = b.out_shell_threshold();
            (0..b.len())
                .filter(|&t| {
                    b.coords_into(t, &mut dst);
                    let r = crate::lattice::sup_dist(&dst, &src);
                    r as f64 > threshold && r <= b.radius()
                })
                .collect()
        };
        for t in targets {
            b.coords_into(t, &mut dst);
            for k in 0..d {
                disp[k] = dst[k] - src[k];
            }
            let g = match (&full, &spectral_row) {
                (Some(m), _) => m[(s, t)].norm(),
                (None, Some(row)) => row[t].norm(),
                _ => unreachable!(),
            };
            let weight = log_weight(&disp, weights.rho);
            let excess = g.ln() + kappa * weight;
            if worst.map_or(true, |w| excess > w.2) {
                worst = Some((s, t, excess, g));
            }
        }
    }

    report.good = worst.map_or(true, |w| w.2 <= 0.0);
    report.worst_witness = worst.map(|(s, t, excess, g)| {
        let source = b.site_at(s);
        let site = b.site_at(t);
        let weight = log_weight(&site.displacement(&source), weights.rho);
        Witness {
            source,
            site,
            value: g,
            envelope: (-kappa * weight).exp(),
            log_excess: excess,
        }
    });
    Ok(report)
}

/// Residual of the geometric resolvent identity on one inner box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventResidual {
    /// `max |G_L(x,y) + ε Σ G_l(x,m) Γ(m,n) G_L(n,y)|`.
    pub residual: f64,
    pub inner_norm: f64,
    pub outer_norm: f64,
    /// Kernel row sum over the outer box.
    pub row_sum: f64,
    /// `‖G_l‖₂‖G_L‖₂·ε·row_sum`.
    pub scale: f64,
}

impl ResolventResidual {
    /// `residual ≤ 1e-9·scale`.
    pub fn within(&self, rel: f64) -> bool {
        self.residual <= rel * self.scale
    }
}

/// Checks `G_L(x,y) = −ε Σ_{m∈B_l, n∈B_L∖B_l} G_l(x,m) Γ(m,n) G_L(n,y)`
/// for `y ∈ B_L ∖ B_l` and `x` the inner center (or every inner site).
///
/// The hopping entries are re-evaluated from the kernel rather than read
/// back from the assembled matrix.
pub fn geometric_resolvent_residual(
    outer: &OperatorSample,
    inner_box: &LatticeBox,
    energy: f64,
    all_sources: bool,
) -> Result<ResolventResidual> {
    let ob = outer.lattice_box();
    if !inner_box.is_subset_of(ob) || inner_box == ob {
        return Err(Error::Precondition(format!("{inner_box} is not strictly inside {ob}")));
    }
    let inner = outer.restrict(inner_box)?;
    let g_outer = greens(outer, energy)?;
    let g_inner = greens(&inner, energy)?;
    let idx = ob.indices_of(inner_box)?;
    let mut in_inner = vec![false; ob.len()];
    for &i in &idx {
        in_inner[i] = true;
    }
    let rest: Vec<usize> = (0..ob.len()).filter(|&i| !in_inner[i]).collect();

    let d = ob.dim();
    let coords = ob.coordinate_table();
    let kernel = outer.kernel();
    let eps = outer.epsilon();
    let mut disp = vec![0; d];
    // coupling[m_local][n_rest] = ε·Γ(m, n)
    let coupling = DMatrix::from_fn(idx.len(), rest.len(), |m, n| {
        let (a, b) = (idx[m], rest[n]);
        for k in 0..d {
            disp[k] = coords[a * d + k] - coords[b * d + k];
        }
        kernel.eval(&disp) * eps
    });
    let g_rest = DMatrix::from_fn(rest.len(), rest.len(), |n, y| g_outer[(rest[n], rest[y])]);

    let sources: Vec<usize> = if all_sources {
        (0..idx.len()).collect()
    } else {
        vec![inner_box.index_of(inner_box.center().coords()).expect("center")]
    };
    let mut residual = 0.0f64;
    for x in sources {
        let through = g_inner.row(x) * &coupling * &g_rest;
        for (yn, &y) in rest.iter().enumerate() {
            residual = residual.max((g_outer[(idx[x], y)] + through[yn]).norm());
        }
    }

    let inner_norm = 1.0 / resonance_distance(&inner, energy);
    let outer_norm = 1.0 / resonance_distance(outer, energy);
    let row_sum = kernel_row_sum_within(outer);
    Ok(ResolventResidual {
        residual,
        inner_norm,
        outer_norm,
        row_sum,
        scale: inner_norm * outer_norm * eps * row_sum,
    })
}

/// Largest kernel row sum `max_x Σ_y |φ(x−y)|` inside the sample's box.
fn kernel_row_sum_within(sample: &OperatorSample) -> f64 {
    let b = sample.lattice_box();
    let d = b.dim();
    let coords = b.coordinate_table();
    let kernel = sample.kernel();
    let mut disp = vec![0; d];
    (0..b.len())
        .map(|i| {
            (0..b.len())
                .map(|j| {
                    for k in 0..d {
                        disp[k] = coords[i * d + k] - coords[j * d + k];
                    }
                    kernel.eval(&disp).norm()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}
