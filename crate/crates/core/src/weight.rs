//! Weight functions `log^ρ(‖x‖+1)`, the quasi-metric constant, hopping
//! kernels and row-sum bounds for the hopping operator.
//!
//! The weight `w_ρ(x) = log^ρ(‖x‖∞ + 1)` is not a metric: it fails the
//! triangle inequality. It does satisfy it up to an additive constant,
//!
//! ```text
//! log^ρ(1 + Σ xᵢ) ≤ Σ log^ρ(1 + xᵢ) + C(ρ)·log^ρ n,
//! ```
//!
//! and [`quasi_metric_constant`] certifies the smallest constant that works
//! for a given `(ρ, n)` by locating the maximiser of
//! `F(x₁,…,xₙ) = log^ρ(1+Σxᵢ) − Σ log^ρ(1+xᵢ)` on the diagonal.

use std::collections::BTreeMap;
use std::f64::consts::E;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel magnitudes below this are flushed to zero.
pub const KERNEL_FLUSH: f64 = 1e-300;

/// Parameters of the log-power envelope used by the resonance and decay tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    /// Hopping decay rate γ.
    pub gamma: f64,
    /// Envelope exponent ρ.
    pub rho: f64,
    /// Resonance exponent ρ′.
    pub rho_prime: f64,
}

impl WeightParams {
    pub fn new(gamma: f64, rho: f64, rho_prime: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("γ>0", format!("gamma = {gamma}")));
        }
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::invalid("ρ>1", format!("rho = {rho}")));
        }
        if !(rho_prime > 1.0 && rho_prime < rho) {
            return Err(Error::invalid(
                "ρ′∈(1,ρ)",
                format!("rho_prime = {rho_prime}, rho = {rho}"),
            ));
        }
        Ok(WeightParams {
            gamma,
            rho,
            rho_prime,
        })
    }
}

/// Sup-norm of an integer displacement.
pub fn sup_norm(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

/// `log^ρ(r + 1)` for a real radius `r ≥ 0`.
#[inline]
pub fn log_power(r: f64, rho: f64) -> f64 {
    r.ln_1p().powf(rho)
}

/// The weight `log^ρ(‖x‖∞ + 1)` of a lattice displacement.
pub fn log_weight(x: &[i64], rho: f64) -> f64 {
    log_power(sup_norm(x) as f64, rho)
}

/// `F(x₁,…,xₙ) = log^ρ(1+Σxᵢ) − Σ log^ρ(1+xᵢ)`.
pub fn quasi_metric_excess(xs: &[f64], rho: f64) -> f64 {
    let total: f64 = xs.iter().sum();
    log_power(total, rho) - xs.iter().map(|&x| log_power(x, rho)).sum::<f64>()
}

/// `F` restricted to the diagonal `x₁ = … = xₙ = x`.
pub fn diagonal_excess(x: f64, n: u32, rho: f64) -> f64 {
    let n = f64::from(n);
    log_power(n * x, rho) - n * log_power(x, rho)
}

/// `h(1+x) = log^{ρ−1}(1+x)/(1+x)`, whose level sets locate the maximiser.
fn h_shifted(x: f64, rho: f64) -> f64 {
    x.ln_1p().powf(rho - 1.0) / (1.0 + x)
}

/// Certified quasi-metric constant for one `(ρ, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricCertificate {
    pub rho: f64,
    pub n: u32,
    /// Interior maximiser of `F` on the diagonal (0 for `n = 1`).
    pub x0: f64,
    /// `max F = F(x0,…,x0)`.
    pub sup_f: f64,
    /// `sup_f / log^ρ n` (0 for `n = 1`).
    pub c_rho: f64,
}

impl QuasiMetricCertificate {
    /// Right-hand side slack `C(ρ)·log^ρ n` guaranteed by this certificate.
    pub fn slack(&self) -> f64 {
        self.sup_f
    }

    /// Bracket that must contain `x0` for `n ≥ 2`.
    pub fn bracket(rho: f64, n: u32) -> (f64, f64) {
        let top = (rho - 1.0).exp_m1();
        (top / f64::from(n), top)
    }
}

/// Solves `h(1+n·x) = h(1+x)` by bisection and returns the certificate.
pub fn quasi_metric_constant(rho: f64, n: u32) -> Result<QuasiMetricCertificate> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::invalid("ρ>1", format!("rho = {rho}")));
    }
    if n == 0 {
        return Err(Error::invalid("n≥1", "n = 0"));
    }
    if n == 1 {
        return Ok(QuasiMetricCertificate {
            rho,
            n,
            x0: 0.0,
            sup_f: 0.0,
            c_rho: 0.0,
        });
    }

    let nf = f64::from(n);
    let g = |x: f64| h_shifted(nf * x, rho) - h_shifted(x, rho);
    let (mut lo, mut hi) = QuasiMetricCertificate::bracket(rho, n);
    let (f_lo, f_hi) = (g(lo), g(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    // Bisect down to adjacent floats; the bracket shrinks well below 1e-12.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    let sup_f = diagonal_excess(x0, n, rho).max(0.0);
    Ok(QuasiMetricCertificate {
        rho,
        n,
        x0,
        sup_f,
        c_rho: sup_f / nf.ln().powf(rho),
    })
}

/// One failed instance of the quasi-metric inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricViolation {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricReport {
    pub certificate: QuasiMetricCertificate,
    pub checked: usize,
    pub violations: Vec<QuasiMetricViolation>,
}

impl QuasiMetricReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `log^ρ(1+Σxᵢ) ≤ Σ log^ρ(1+xᵢ) + C(ρ)·log^ρ n` on every sample
/// using the certified constant for `(ρ, n)`.
///
/// A relative slack of `1e-12` absorbs rounding in the two sums.
pub fn verify_quasi_metric(rho: f64, n: u32, samples: &[Vec<f64>]) -> Result<QuasiMetricReport> {
    let certificate = quasi_metric_constant(rho, n)?;
    let mut violations = Vec::new();
    for (index, xs) in samples.iter().enumerate() {
        if xs.len() != n as usize {
            return Err(Error::Precondition(format!(
                "sample {index} has {} coordinates, expected {n}",
                xs.len()
            )));
        }
        if let Some(bad) = xs.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!(
                "sample {index} has non-positive coordinate {bad}"
            )));
        }
        let lhs = log_power(xs.iter().sum(), rho);
        let rhs = xs.iter().map(|&x| log_power(x, rho)).sum::<f64>() + certificate.slack();
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            violations.push(QuasiMetricViolation { index, lhs, rhs });
        }
    }
    Ok(QuasiMetricReport {
        certificate,
        checked: samples.len(),
        violations,
    })
}

/// Empirical envelope `C(ρ) = sup_n supF/log^ρ n`, evaluated up to `n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricEnvelope {
    pub rho: f64,
    pub n_max: u32,
    /// `(n, supF/log^ρ n)` for every evaluated `n`.
    pub ratios: Vec<(u32, f64)>,
    pub sup_sampled: f64,
    pub argmax_n: u32,
    /// Extrapolated `n → ∞` value of the ratio (linear fit in `1/log n` over
    /// the last decade of evaluated `n`).
    pub limit_estimate: f64,
    /// `max(sup_sampled, limit_estimate)`.
    pub c_rho: f64,
}

/// Evaluates the per-`n` constants on `2..=16` and a log-spaced grid up to
/// `n_max`, then extrapolates the tail.
///
/// Not a certificate beyond `n_max`; the minimal constant is not known in
/// closed form.
pub fn quasi_metric_envelope(rho: f64, n_max: u32) -> Result<QuasiMetricEnvelope> {
    if n_max < 2 {
        return Err(Error::invalid("n_max≥2", format!("n_max = {n_max}")));
    }
    let mut ns: Vec<u32> = (2..=n_max.min(16)).collect();
    let mut t = 16.0_f64;
    while t < f64::from(n_max) {
        t *= 10f64.powf(0.1);
        ns.push((t.round() as u32).min(n_max));
    }
    ns.dedup();

    let mut ratios = Vec::with_capacity(ns.len());
    for &n in &ns {
        ratios.push((n, quasi_metric_constant(rho, n)?.c_rho));
    }
    let (argmax_n, sup_sampled) = ratios
        .iter()
        .copied()
        .fold((2, f64::NEG_INFINITY), |acc, (n, r)| if r > acc.1 { (n, r) } else { acc });

    let cut = f64::from(n_max) / 10.0;
    let tail: Vec<(f64, f64)> = ratios
        .iter()
        .filter(|(n, _)| f64::from(*n) >= cut && *n >= 2)
        .map(|&(n, r)| (1.0 / f64::from(n).ln(), r))
        .collect();
    let limit_estimate = if tail.len() >= 2 {
        let m = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            my - (sxy / sxx) * mx
        } else {
            my
        }
    } else {
        sup_sampled
    };

    Ok(QuasiMetricEnvelope {
        rho,
        n_max,
        ratios,
        sup_sampled,
        argmax_n,
        limit_estimate,
        c_rho: sup_sampled.max(limit_estimate),
    })
}

/// Finite hopping table keyed by displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    dim: usize,
    entries: BTreeMap<Vec<i64>, Complex64>,
}

impl KernelTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    /// `|φ(x)| = e^{−γ log^ρ(‖x‖+1)}`.
    LogPower { gamma: f64, rho: f64 },
    /// `|φ(x)| = e^{−‖x‖^s}` with `s ∈ (0,1)`.
    Stretched { s: f64 },
    /// Explicit finite support.
    Table(KernelTable),
}

/// Hopping amplitude `φ`, with `Γ_φ(x,y) = φ(x−y)`.
///
/// `φ(0) = 0` always and `φ(−x) = conj φ(x)`. The optional phase is a wave
/// vector `k`, contributing the unimodular factor `e^{i k·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoppingKernel {
    kind: KernelKind,
    phase: Option<Vec<f64>>,
    scale: f64,
}

impl HoppingKernel {
    pub fn log_power(gamma: f64, rho: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("γ>0", format!("gamma = {gamma}")));
        }
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::invalid("ρ>1", format!("rho = {rho}")));
        }
        Ok(Self::from_kind(KernelKind::LogPower { gamma, rho }))
    }

    pub fn stretched(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid("s∈(0,1)", format!("s = {s}")));
        }
        Ok(Self::from_kind(KernelKind::Stretched { s }))
    }

    /// Builds a table kernel. Missing mirror entries `−x ↦ conj φ(x)` are
    /// filled in; inconsistent mirrors and a non-zero origin entry are errors.
    pub fn table<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut map: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        let mut dim = None;
        for (x, v) in entries {
            if *dim.get_or_insert(x.len()) != x.len() || x.is_empty() {
                return Err(Error::invalid(
                    "table displacements share one dimension d≥1",
                    format!("{x:?}"),
                ));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::invalid("finite hopping values", format!("{x:?} ↦ {v}")));
            }
            if x.iter().all(|&c| c == 0) {
                if v != Complex64::new(0.0, 0.0) {
                    return Err(Error::invalid("φ(0)=0", format!("φ(0) = {v}")));
                }
                continue;
            }
            let mirror: Vec<i64> = x.iter().map(|c| -c).collect();
            for (key, val) in [(x, v), (mirror, v.conj())] {
                match map.get(&key) {
                    Some(existing) if *existing != val => {
                        return Err(Error::invalid(
                            "φ(−x)=conj φ(x)",
                            format!("{key:?} given as {existing} and {val}"),
                        ));
                    }
                    _ => {
                        map.insert(key, val);
                    }
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::invalid("non-empty table", "no entries"))?;
        Ok(Self::from_kind(KernelKind::Table(KernelTable { dim, entries: map })))
    }

    fn from_kind(kind: KernelKind) -> Self {
        HoppingKernel {
            kind,
            phase: None,
            scale: 1.0,
        }
    }

    /// Attaches the unimodular factor `e^{i k·x}`.
    pub fn with_phase(mut self, wave_vector: Vec<f64>) -> Result<Self> {
        if wave_vector.is_empty() || wave_vector.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("finite wave vector", format!("{wave_vector:?}")));
        }
        self.phase = Some(wave_vector);
        Ok(self)
    }

    /// Multiplies every amplitude by `a ≥ 0`.
    pub fn scaled(mut self, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("kernel scale ≥ 0", format!("scale = {a}")));
        }
        self.scale *= a;
        Ok(self)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn phase(&self) -> Option<&[f64]> {
        self.phase.as_deref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `true` when every amplitude is real, so assembled operators are real
    /// symmetric.
    pub fn is_real(&self) -> bool {
        let phase_free = self
            .phase
            .as_ref()
            .map_or(true, |k| k.iter().all(|&c| c == 0.0));
        let table_real = match &self.kind {
            KernelKind::Table(t) => t.entries.values().all(|v| v.im == 0.0),
            _ => true,
        };
        phase_free && table_real
    }

    /// Checks that the kernel can act on `Z^d`.
    pub fn check_dimension(&self, d: usize) -> Result<()> {
        if let KernelKind::Table(t) = &self.kind {
            if t.dim != d {
                return Err(Error::invalid(
                    "kernel dimension matches lattice dimension",
                    format!("table d = {}, lattice d = {d}", t.dim),
                ));
            }
        }
        if let Some(k) = &self.phase {
            if k.len() != d {
                return Err(Error::invalid(
                    "kernel dimension matches lattice dimension",
                    format!("wave vector d = {}, lattice d = {d}", k.len()),
                ));
            }
        }
        Ok(())
    }

    /// Magnitude bound for `‖x‖∞ = r`, exact for the envelope kinds.
    pub fn envelope(&self, r: u64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let m = match &self.kind {
            KernelKind::LogPower { gamma, rho } => (-gamma * log_power(r as f64, *rho)).exp(),
            KernelKind::Stretched { s } => (-(r as f64).powf(*s)).exp(),
            KernelKind::Table(t) => t
                .entries
                .iter()
                .filter(|(x, _)| sup_norm(x) == r)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max),
        };
        flush(self.scale * m)
    }

    /// `φ(x)`.
    pub fn eval(&self, x: &[i64]) -> Complex64 {
        let r = sup_norm(x);
        if r == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let base = match &self.kind {
            KernelKind::Table(t) => match t.entries.get(x) {
                Some(v) => *v * self.scale,
                None => return Complex64::new(0.0, 0.0),
            },
            _ => Complex64::new(self.envelope(r), 0.0),
        };
        if base.norm() < KERNEL_FLUSH {
            return Complex64::new(0.0, 0.0);
        }
        match &self.phase {
            Some(k) => {
                let theta: f64 = k.iter().zip(x).map(|(k, &c)| k * c as f64).sum();
                base * Complex64::from_polar(1.0, theta)
            }
            None => base,
        }
    }

    /// Upper bound on `Σ_{‖x‖∞ > radius} |φ(x)|` over `Z^d`.
    ///
    /// Infinite when the analytic tail estimate does not apply yet at this
    /// radius (its integrand is not decreasing there).
    pub fn tail_bound(&self, d: usize, radius: u64) -> f64 {
        let df = d as f64;
        match &self.kind {
            KernelKind::Table(t) => t
                .entries
                .iter()
                .filter(|(x, _)| sup_norm(x) > radius)
                .map(|(_, v)| flush(v.norm() * self.scale))
                .sum(),
            // Σ_{r>R} shell(r)·e^{−γ log^ρ(r+1)} ≤ 2d·3^{d−1}∫_{log(R+1)}^∞ e^{du−γu^ρ} du,
            // and the convex exponent gives ∫_a^∞ e^{−g} ≤ e^{−g(a)}/g′(a).
            KernelKind::LogPower { gamma, rho } => {
                let u = (radius as f64).ln_1p();
                let g = gamma * u.powf(*rho) - df * u;
                let dg = gamma * rho * u.powf(rho - 1.0) - df;
                if dg <= 0.0 {
                    return f64::INFINITY;
                }
                self.scale * 2.0 * df * 3f64.powf(df - 1.0) * (-g).exp() / dg
            }
            // Σ_{r>R} shell(r)·e^{−r^s} ≤ (2d·5^{d−1}/s)∫_{R^s}^∞ v^{d/s−1}e^{−v} dv.
            KernelKind::Stretched { s } => {
                if radius == 0 {
                    return f64::INFINITY;
                }
                let a = (radius as f64).powf(*s);
                let k = df / s - 1.0;
                let g = a - k * a.ln();
                let dg = 1.0 - k / a;
                if dg <= 0.0 {
                    return f64::INFINITY;
                }
                self.scale * 2.0 * df * 5f64.powf(df - 1.0) / s * (-g).exp() / dg
            }
        }
    }
}

fn flush(v: f64) -> f64 {
    if v < KERNEL_FLUSH {
        0.0
    } else {
        v
    }
}

/// Number of sites of `Z^d` at sup-norm exactly `r`.
pub fn shell_count(d: usize, r: u64) -> f64 {
    let d = d as i32;
    if r == 0 {
        1.0
    } else {
        let r = r as f64;
        (2.0 * r + 1.0).powi(d) - (2.0 * r - 1.0).powi(d)
    }
}

/// Row-sum bound `‖Γ_φ‖₂ ≤ Σ_x |φ(x)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    /// The bound.
    pub value: f64,
    /// Radius at which the best truncated-sum-plus-tail split was found.
    pub split_radius: u64,
    pub truncated_sum: f64,
    pub tail: f64,
}

/// Upper bound on `‖Γ_φ‖₂` from the truncated shell sum plus an analytic tail.
///
/// The value is the minimum over all split radii `1..=radius`, so it is
/// non-increasing in `radius`. Table kernels return the exact finite sum.
pub fn gamma_norm_bound(kernel: &HoppingKernel, d: usize, radius: u64) -> Result<NormBound> {
    if radius < 1 {
        return Err(Error::invalid("R≥1", format!("R = {radius}")));
    }
    if d == 0 {
        return Err(Error::invalid("d≥1", "d = 0"));
    }
    kernel.check_dimension(d)?;
    if let KernelKind::Table(t) = &kernel.kind {
        let sum = t.entries.values().map(|v| flush(v.norm() * kernel.scale)).sum();
        return Ok(NormBound {
            value: sum,
            split_radius: radius,
            truncated_sum: sum,
            tail: 0.0,
        });
    }
    let mut partial = 0.0;
    let mut best = NormBound {
        value: f64::INFINITY,
        split_radius: 1,
        truncated_sum: 0.0,
        tail: f64::INFINITY,
    };
    for r in 1..=radius {
        partial += shell_count(d, r) * kernel.envelope(r);
        let tail = kernel.tail_bound(d, r);
        if partial + tail < best.value {
            best = NormBound {
                value: partial + tail,
                split_radius: r,
                truncated_sum: partial,
                tail,
            };
        }
    }
    Ok(best)
}

/// `e^{ρ−1}`, the right end of the box on which `F` attains its maximum.
pub fn quasi_metric_domain(rho: f64) -> f64 {
    E.powf(rho - 1.0)
}
