//! Eigenfunction diagnostics: decay fits against the log-power envelope,
//! participation ratios, the Poisson identity and the ensemble experiment
//! comparing eigenfunction decay with the hopping decay.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{greens, resonance_distance};
use crate::lattice::{sup_dist, LatticeBox, Site};
use crate::operator::{Model, OperatorSample};
use crate::stats::{median_iqr, Executor};

/// Amplitudes below this fraction of the maximum are treated as eigensolver noise.
pub const DEFAULT_FLOOR: f64 = 1e-13;

/// One eigenvalue with its normalised eigenvector.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<Complex64>,
}

/// Eigenpairs in ascending order of eigenvalue.
pub fn eigenpairs(sample: &OperatorSample) -> Vec<Eigenpair> {
    let eig = sample.eigensystem();
    eig.values
        .iter()
        .enumerate()
        .map(|(k, &value)| Eigenpair {
            value,
            vector: eig.vectors.column(k).into_owned(),
        })
        .collect()
}

/// Accuracy of an eigendecomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenResiduals {
    /// `max_k ‖Hv_k − λ_k v_k‖₂ / ‖H‖₂`.
    pub reconstruction: f64,
    /// `max |V†V − I|`.
    pub orthonormality: f64,
    /// `max_x |Σ_k |v_k(x)|² − 1|`.
    pub completeness: f64,
}

pub fn eigen_residuals(sample: &OperatorSample) -> EigenResiduals {
    let eig = sample.eigensystem();
    let h = sample.matrix().to_complex();
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let v = &eig.vectors;
    let hv = &h * v;
    let reconstruction = (0..v.ncols())
        .map(|k| (hv.column(k) - v.column(k) * Complex64::new(eig.values[k], 0.0)).norm())
        .fold(0.0, f64::max)
        / norm;
    let gram = v.adjoint() * v;
    let n = gram.nrows();
    let mut orthonormality = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            orthonormality = orthonormality.max((gram[(i, j)] - target).norm());
        }
    }
    let completeness = v
        .row_iter()
        .map(|row| (row.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    EigenResiduals {
        reconstruction,
        orthonormality,
        completeness,
    }
}

/// `(Σ|ψ|²)² / Σ|ψ|⁴`.
pub fn participation_ratio(psi: &[Complex64]) -> Result<f64> {
    let scale = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Precondition("participation ratio of a zero vector".into()));
    }
    let (s2, s4) = psi.iter().fold((0.0, 0.0), |(a, b), z| {
        let p = (z.norm() / scale).powi(2);
        (a + p, b + p * p)
    });
    Ok(s2 * s2 / s4)
}

/// Regression family for `log(−log|ψ|)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayFamily {
    /// `|ψ| ≈ e^{−c log^ρ(1+r)}`: regress on `log log(1+r)`.
    #[default]
    LogPower,
    /// `|ψ| ≈ e^{−c r^s}`: regress on `log r`.
    Stretched,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub family: DecayFamily,
    pub floor: f64,
    pub min_radius: i64,
    pub min_points: usize,
    /// Exponent to hold fixed in an additional constrained fit.
    pub rho_hint: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            family: DecayFamily::LogPower,
            floor: DEFAULT_FLOOR,
            min_radius: 2,
            min_points: 8,
            rho_hint: None,
        }
    }
}

/// Fit with the exponent held at the hint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedFit {
    pub rho: f64,
    pub c: f64,
    pub r2: f64,
    /// The fixed exponent explains the profile markedly worse than the free fit.
    pub envelope_mismatch: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub center: Site,
    pub c: f64,
    pub rho_fit: f64,
    pub r2: f64,
    pub floor: f64,
    pub n_points: usize,
    pub constrained: Option<ConstrainedFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FitOutcome {
    Fit(DecayFit),
    NoFit { center: Site, n_points: usize },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitOutcome::Fit(f) => Some(f),
            FitOutcome::NoFit { .. } => None,
        }
    }
}

/// Regression points `(x, y)` used by [`decay_fit`].
pub fn decay_points(b: &LatticeBox, amplitudes: &[f64], opts: &FitOptions) -> Result<(Site, Vec<(f64, f64)>)> {
    if amplitudes.len() != b.len() {
        return Err(Error::Precondition(format!(
            "{} amplitudes for {} sites",
            amplitudes.len(),
            b.len()
        )));
    }
    let (arg, max) = amplitudes
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(ai, am), (i, &a)| if a > am { (i, a) } else { (ai, am) });
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Precondition("decay fit of a zero profile".into()));
    }
    let d = b.dim();
    let mut center = vec![0; d];
    b.coords_into(arg, &mut center);
    let mut buf = vec![0; d];
    let mut points = Vec::new();
    for (i, &a) in amplitudes.iter().enumerate() {
        let u = a / max;
        if !(u > opts.floor && u < 1.0) {
            continue;
        }
        b.coords_into(i, &mut buf);
        let r = sup_dist(&buf, &center);
        if r < opts.min_radius {
            continue;
        }
        let x = match opts.family {
            DecayFamily::LogPower => (r as f64).ln_1p().ln(),
            DecayFamily::Stretched => (r as f64).ln(),
        };
        points.push((x, (-u.ln()).ln()));
    }
    Ok((Site(center), points))
}

/// Least-squares fit of `log(−log|ψ(x)|) = log c + ρ·X(‖x − x₀‖)`, with
/// `x₀` the first (lexicographically smallest) amplitude maximiser.
pub fn decay_fit(b: &LatticeBox, amplitudes: &[f64], opts: &FitOptions) -> Result<FitOutcome> {
    let (center, points) = decay_points(b, amplitudes, opts)?;
    let n = points.len();
    if n < opts.min_points.max(2) {
        return Ok(FitOutcome::NoFit { center, n_points: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Ok(FitOutcome::NoFit { center, n_points: n });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2_of = |a: f64, s: f64| {
        if syy <= 0.0 {
            return 1.0;
        }
        let ss: f64 = points.iter().map(|p| (p.1 - a - s * p.0).powi(2)).sum();
        (1.0 - ss / syy).clamp(0.0, 1.0)
    };
    let r2 = r2_of(intercept, slope);
    let constrained = opts.rho_hint.map(|rho| {
        let a = my - rho * mx;
        let cr2 = r2_of(a, rho);
        ConstrainedFit {
            rho,
            c: a.exp(),
            r2: cr2,
            envelope_mismatch: cr2 < 0.9 || r2 - cr2 > 0.05,
        }
    });
    Ok(FitOutcome::Fit(DecayFit {
        center,
        c: intercept.exp(),
        rho_fit: slope,
        r2,
        floor: opts.floor,
        n_points: n,
        constrained,
    }))
}

/// `|ψ(x)|` for every site.
pub fn amplitudes(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().map(|z| z.norm()).collect()
}

/// Outcome of the Poisson identity check on one inner box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonResidual {
    /// `max_{x∈B} |ψ(x) + ε Σ_{x′∈B, x″∉B} G_B(x,x′) φ(x′−x″) ψ(x″)|`.
    pub residual: f64,
    /// `ε · (kernel tail beyond the outer box) · max|ψ|`: the term an
    /// infinite-volume eigenfunction would add from outside the outer box.
    pub tail_term: f64,
    pub max_amplitude: f64,
    /// `dist(E, σ(H_B))`.
    pub inner_distance: f64,
    /// `‖((H−E)ψ)|_B‖₂ / dist(E, σ(H_B))`: the residual that eigenvector
    /// round-off alone can produce.
    pub roundoff_bound: f64,
}

/// Checks the Poisson identity for `ψ` on `inner ⊆ outer` at energy `E`.
pub fn poisson_residual(
    outer: &OperatorSample,
    psi: &[Complex64],
    energy: f64,
    inner: &LatticeBox,
) -> Result<PoissonResidual> {
    let ob = outer.lattice_box();
    if psi.len() != ob.len() {
        return Err(Error::Precondition(format!("{} amplitudes for {} sites", psi.len(), ob.len())));
    }
    let inner_idx = ob.indices_of(inner)?;
    let mut in_inner = vec![false; ob.len()];
    for &i in &inner_idx {
        in_inner[i] = true;
    }
    let outside: Vec<usize> = (0..ob.len()).filter(|&i| !in_inner[i]).collect();
    let inner_sample = outer.restrict(inner)?;
    let g = greens(&inner_sample, energy)?;

    let kernel = outer.kernel();
    let eps = outer.epsilon();
    let d = ob.dim();
    let coords = ob.coordinate_table();
    let mut disp = vec![0; d];
    // Boundary source u(x′) = Σ_{x″∉B} φ(x′−x″) ψ(x″).
    let source: Vec<Complex64> = inner_idx
        .iter()
        .map(|&a| {
            outside.iter().fold(Complex64::new(0.0, 0.0), |acc, &b| {
                for k in 0..d {
                    disp[k] = coords[a * d + k] - coords[b * d + k];
                }
                acc + kernel.eval(&disp) * psi[b]
            })
        })
        .collect();
    let residual = inner_idx
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let rhs: Complex64 = (0..inner_idx.len()).map(|j| g[(i, j)] * source[j]).sum::<Complex64>() * -eps;
            (psi[x] - rhs).norm()
        })
        .fold(0.0, f64::max);
    let max_amplitude = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let inner_distance = resonance_distance(&inner_sample, energy);
    let hpsi = outer.matrix().to_complex() * DVector::from_column_slice(psi);
    let eigen_defect = inner_idx
        .iter()
        .map(|&x| (hpsi[x] - psi[x] * energy).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let gap = (ob.radius() - (sup_dist(inner.center().coords(), ob.center().coords()) + inner.radius())).max(0);
    let tail_term = eps * kernel.tail_bound(d, gap as u64 + 1) * max_amplitude;
    Ok(PoissonResidual {
        residual,
        tail_term,
        max_amplitude,
        inner_distance,
        roundoff_bound: eigen_defect / inner_distance,
    })
}

/// Normalisation and growth data of a candidate generalised eigenfunction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedEigenCheck {
    pub energy: f64,
    /// `ψ` rescaled so that `ψ(0) = 1` when `normalized`.
    pub psi: Vec<Complex64>,
    pub normalized: bool,
    /// `max_x |ψ(x)|/(1+‖x‖)^d`; at most 1 for a polynomially bounded solution.
    pub polynomial_witness: f64,
    pub polynomially_bounded: bool,
    /// `max_x |(Hψ − Eψ)(x)|` inside the box.
    pub equation_residual: f64,
}

pub fn generalized_eigen_check(
    sample: &OperatorSample,
    psi: &[Complex64],
    energy: f64,
    normalize: bool,
) -> Result<GeneralizedEigenCheck> {
    let b = sample.lattice_box();
    if psi.len() != b.len() {
        return Err(Error::Precondition(format!("{} amplitudes for {} sites", psi.len(), b.len())));
    }
    let d = b.dim();
    let mut psi = psi.to_vec();
    if normalize {
        let origin = b
            .index_of(&vec![0; d])
            .ok_or_else(|| Error::Precondition(format!("{b} does not contain the origin")))?;
        let v0 = psi[origin];
        if v0.norm() == 0.0 {
            return Err(Error::Precondition("ψ(0) = 0 cannot be normalised".into()));
        }
        for z in &mut psi {
            *z /= v0;
        }
    }
    let mut buf = vec![0; d];
    let polynomial_witness = (0..b.len())
        .map(|i| {
            b.coords_into(i, &mut buf);
            let r = buf.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as f64;
            psi[i].norm() / (1.0 + r).powi(d as i32)
        })
        .fold(0.0, f64::max);
    let v = DVector::from_column_slice(&psi);
    let hv = sample.matrix().to_complex() * &v;
    let equation_residual = (0..psi.len())
        .map(|i| (hv[i] - v[i] * energy).norm())
        .fold(0.0, f64::max);
    Ok(GeneralizedEigenCheck {
        energy,
        psi,
        normalized: normalize,
        polynomially_bounded: polynomial_witness <= 1.0 + 1e-12,
        polynomial_witness,
        equation_residual,
    })
}

/// Which eigenvectors get their regression points exported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "count")]
pub enum PlotSelection {
    None,
    PerSeed(usize),
    All,
}

/// Ensemble experiment configuration.
#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub model: Model,
    pub d: usize,
    /// Box radius; the chain has `N = (2R+1)^d` sites.
    pub radius: i64,
    pub seed: u64,
    /// Number of disorder realisations (trial indices `0..realisations`).
    pub realisations: u64,
    pub energy_window: Option<(f64, f64)>,
    /// Drop eigenvectors centred closer than this fraction of the side to
    /// the boundary.
    pub edge_fraction: f64,
    pub fit: FitOptions,
    pub plot: PlotSelection,
    /// Hopping `(γ, ρ)` the fits are compared with.
    pub hopping: Option<(f64, f64)>,
    /// Proven decay coefficient `κ∞/(2α^ρ)`, when MSA parameters are known.
    pub proven_coefficient: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub seed: u64,
    pub eigenvalue: f64,
    pub center: Site,
    pub c: Option<f64>,
    pub rho_fit: Option<f64>,
    pub r2: Option<f64>,
    pub n_points: usize,
    pub participation_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub seed: u64,
    pub eigenvalue: f64,
    /// `(log log(1+r), log(−log|ψ|))` or `(log r, log(−log|ψ|))`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Option<Self> {
        median_iqr(values).map(|(median, q1, q3)| Quartiles { median, q1, q3 })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub selected: usize,
    pub fitted: usize,
    pub no_fit: usize,
    pub c: Option<Quartiles>,
    pub rho_fit: Option<Quartiles>,
    pub r2: Option<Quartiles>,
    pub participation_ratio: Option<Quartiles>,
    pub hopping_gamma: Option<f64>,
    pub hopping_rho: Option<f64>,
    pub proven_coefficient: Option<f64>,
    /// Median `ρ_fit` within `0.3` of the hopping exponent.
    pub rho_matches_hopping: Option<bool>,
    /// Median `r²` of fitted states is at least `0.9`.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub rows: Vec<EnsembleRow>,
    pub plots: Vec<PlotSeries>,
    pub summary: EnsembleSummary,
}

fn run_realisation(cfg: &EnsembleConfig, b: &LatticeBox, trial: u64) -> Result<(Vec<EnsembleRow>, Vec<PlotSeries>)> {
    let sample = cfg.model.sample(b, cfg.seed, trial)?;
    let eig = sample.eigensystem();
    let margin = (cfg.edge_fraction * b.side() as f64).ceil() as i64;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (k, &value) in eig.values.iter().enumerate() {
        if let Some((lo, hi)) = cfg.energy_window {
            if value < lo || value > hi {
                continue;
            }
        }
        let psi: Vec<Complex64> = eig.vectors.column(k).iter().copied().collect();
        let amps = amplitudes(&psi);
        let (center, points) = decay_points(b, &amps, &cfg.fit)?;
        let depth = b.radius() - sup_dist(center.coords(), b.center().coords());
        if depth < margin {
            continue;
        }
        let outcome = decay_fit(b, &amps, &cfg.fit)?;
        let fit = outcome.fit();
        rows.push(EnsembleRow {
            seed: trial,
            eigenvalue: value,
            center,
            c: fit.map(|f| f.c),
            rho_fit: fit.map(|f| f.rho_fit),
            r2: fit.map(|f| f.r2),
            n_points: points.len(),
            participation_ratio: participation_ratio(&psi)?,
        });
        let export = match cfg.plot {
            PlotSelection::None => false,
            PlotSelection::All => true,
            PlotSelection::PerSeed(n) => plots.len() < n,
        };
        if export && fit.is_some() {
            plots.push(PlotSeries {
                seed: trial,
                eigenvalue: value,
                points,
            });
        }
    }
    Ok((rows, plots))
}

/// Diagonalises each realisation, fits every eigenvector centred away from
/// the boundary and aggregates the fitted `(c, ρ)`.
pub fn yeung_oono_experiment(cfg: &EnsembleConfig, executor: &Executor) -> Result<EnsembleReport> {
    if !(0.0..0.5).contains(&cfg.edge_fraction) {
        return Err(Error::invalid("edge fraction ∈ [0, 1/2)", format!("{}", cfg.edge_fraction)));
    }
    let b = LatticeBox::centered(cfg.d, cfg.radius)?;
    let per_seed = executor.run(0..cfg.realisations, |t| run_realisation(cfg, &b, t))?;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (r, p) in per_seed {
        rows.extend(r);
        plots.extend(p);
    }
    let collect = |f: fn(&EnsembleRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<_>>();
    let cs = collect(|r| r.c);
    let rhos = collect(|r| r.rho_fit);
    let r2s = collect(|r| r.r2);
    let prs: Vec<f64> = rows.iter().map(|r| r.participation_ratio).collect();
    let rho_q = Quartiles::of(&rhos);
    let r2_q = Quartiles::of(&r2s);
    let summary = EnsembleSummary {
        selected: rows.len(),
        fitted: cs.len(),
        no_fit: rows.len() - cs.len(),
        c: Quartiles::of(&cs),
        rho_fit: rho_q,
        r2: r2_q,
        participation_ratio: Quartiles::of(&prs),
        hopping_gamma: cfg.hopping.map(|h| h.0),
        hopping_rho: cfg.hopping.map(|h| h.1),
        proven_coefficient: cfg.proven_coefficient,
        rho_matches_hopping: match (cfg.hopping, rho_q) {
            (Some((_, rho)), Some(q)) => Some((q.median - rho).abs() <= 0.3),
            _ => None,
        },
        consistent: r2_q.is_some_and(|q| q.median >= 0.9),
    };
    Ok(EnsembleReport { rows, plots, summary })
}
