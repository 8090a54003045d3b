//! Finite-volume operators `H_B = εΓ_φ|_B + diag(V)`.

use std::sync::{Arc, OnceLock};

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::disorder::{sample_potential, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::weight::HoppingKernel;

/// Dense storage refuses boxes with more sites than this.
pub const MAX_DENSE_SITES: usize = 20_000;

/// Dense Hermitian matrix; real symmetric storage when every entry is real.
#[derive(Clone, Debug, PartialEq)]
pub enum HermitianMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            HermitianMatrix::Real(m) => m.nrows(),
            HermitianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            HermitianMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            HermitianMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            HermitianMatrix::Real(m) => m.map(|v| Complex64::new(v, 0.0)),
            HermitianMatrix::Complex(m) => m.clone(),
        }
    }

    /// `max |H − H†|`.
    pub fn hermitian_defect(&self) -> f64 {
        match self {
            HermitianMatrix::Real(m) => (m - m.transpose()).amax(),
            HermitianMatrix::Complex(m) => (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// Principal submatrix on `indices`, in that order.
    pub fn principal(&self, indices: &[usize]) -> HermitianMatrix {
        let n = indices.len();
        match self {
            HermitianMatrix::Real(m) => {
                HermitianMatrix::Real(DMatrix::from_fn(n, n, |i, j| m[(indices[i], indices[j])]))
            }
            HermitianMatrix::Complex(m) => {
                HermitianMatrix::Complex(DMatrix::from_fn(n, n, |i, j| m[(indices[i], indices[j])]))
            }
        }
    }

    /// `true` when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.entry(i, j) == Complex64::new(0.0, 0.0)))
    }

    fn diagonal_order(&self) -> (Vec<f64>, Vec<usize>) {
        let diag: Vec<f64> = (0..self.dim()).map(|i| self.entry(i, i).re).collect();
        let mut order: Vec<usize> = (0..diag.len()).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        (order.iter().map(|&k| diag[k]).collect(), order)
    }

    /// Ascending eigenvalues; exact for diagonal matrices.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.is_diagonal() {
            return self.diagonal_order().0;
        }
        let mut v: Vec<f64> = match self {
            HermitianMatrix::Real(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
            HermitianMatrix::Complex(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
        };
        v.sort_by(f64::total_cmp);
        v
    }

    /// Ascending eigenvalues with orthonormal eigenvectors as columns.
    ///
    /// A diagonal matrix yields standard basis vectors exactly.
    pub fn eigensystem(&self) -> Eigensystem {
        if self.is_diagonal() {
            let (values, order) = self.diagonal_order();
            let n = values.len();
            let vectors = DMatrix::from_fn(n, n, |i, j| Complex64::new(f64::from(u8::from(order[j] == i)), 0.0));
            return Eigensystem { values, vectors };
        }
        match self {
            HermitianMatrix::Real(m) => {
                let (values, vectors) = sorted_eigen(m.clone());
                Eigensystem {
                    values,
                    vectors: vectors.map(|v| Complex64::new(v, 0.0)),
                }
            }
            HermitianMatrix::Complex(m) => {
                let (values, vectors) = sorted_eigen(m.clone());
                Eigensystem { values, vectors }
            }
        }
    }

    /// `(H − E)^{−1}` by LU factorisation of the shifted matrix.
    pub fn shifted_inverse(&self, energy: f64) -> Option<DMatrix<Complex64>> {
        match self {
            HermitianMatrix::Real(m) => {
                let mut a = m.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] -= energy;
                }
                a.lu().try_inverse().map(|g| g.map(|v| Complex64::new(v, 0.0)))
            }
            HermitianMatrix::Complex(m) => {
                let mut a = m.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] -= energy;
                }
                a.lu().try_inverse()
            }
        }
    }
}

fn sorted_eigen<T>(m: DMatrix<T>) -> (Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = eig.eigenvectors.nrows();
    let vectors = DMatrix::from_fn(n, order.len(), |i, j| eig.eigenvectors[(i, order[j])].clone());
    (values, vectors)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// One realisation of the random operator on a box.
#[derive(Debug)]
pub struct OperatorSample {
    lattice_box: LatticeBox,
    potential: Vec<f64>,
    epsilon: f64,
    kernel: Arc<HoppingKernel>,
    matrix: HermitianMatrix,
    seed: u64,
    trial: u64,
    spectrum: OnceLock<Vec<f64>>,
    eigensystem: OnceLock<Eigensystem>,
}

impl Clone for OperatorSample {
    fn clone(&self) -> Self {
        OperatorSample {
            lattice_box: self.lattice_box.clone(),
            potential: self.potential.clone(),
            epsilon: self.epsilon,
            kernel: Arc::clone(&self.kernel),
            matrix: self.matrix.clone(),
            seed: self.seed,
            trial: self.trial,
            spectrum: self.spectrum.clone(),
            eigensystem: self.eigensystem.clone(),
        }
    }
}

/// Assembles `H = εΓ_φ + diag(V)` on `b`; entry `(x, y)` is `ε·φ(x − y)`
/// for `x ≠ y`, written once and mirrored so `H = H†` exactly.
pub fn assemble(b: &LatticeBox, potential: Vec<f64>, epsilon: f64, kernel: Arc<HoppingKernel>) -> Result<OperatorSample> {
    assemble_keyed(b, potential, epsilon, kernel, 0, 0)
}

pub(crate) fn assemble_keyed(
    b: &LatticeBox,
    potential: Vec<f64>,
    epsilon: f64,
    kernel: Arc<HoppingKernel>,
    seed: u64,
    trial: u64,
) -> Result<OperatorSample> {
    let n = b.checked_len().unwrap_or(usize::MAX);
    if n > MAX_DENSE_SITES {
        return Err(Error::TooLarge {
            sites: n,
            limit: MAX_DENSE_SITES,
        });
    }
    if potential.len() != n {
        return Err(Error::Precondition(format!(
            "potential has {} values for {n} sites",
            potential.len()
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("ε≥0", format!("epsilon = {epsilon}")));
    }
    kernel.check_dimension(b.dim())?;

    let d = b.dim();
    let coords = b.coordinate_table();
    let mut disp = vec![0i64; d];
    let mut hop = |i: usize, j: usize| {
        for k in 0..d {
            disp[k] = coords[i * d + k] - coords[j * d + k];
        }
        kernel.eval(&disp) * epsilon
    };

    let matrix = if kernel.is_real() {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = potential[i];
            for j in 0..i {
                let v = hop(i, j).re;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        HermitianMatrix::Real(m)
    } else {
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(potential[i], 0.0);
            for j in 0..i {
                let v = hop(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        HermitianMatrix::Complex(m)
    };

    Ok(OperatorSample {
        lattice_box: b.clone(),
        potential,
        epsilon,
        kernel,
        matrix,
        seed,
        trial,
        spectrum: OnceLock::new(),
        eigensystem: OnceLock::new(),
    })
}

/// Samples the potential for `(seed, trial)` and assembles the operator.
pub fn sample_operator(
    b: &LatticeBox,
    spec: &DisorderSpec,
    epsilon: f64,
    kernel: Arc<HoppingKernel>,
    seed: u64,
    trial: u64,
) -> Result<OperatorSample> {
    let n = b.checked_len().unwrap_or(usize::MAX);
    if n > MAX_DENSE_SITES {
        return Err(Error::TooLarge {
            sites: n,
            limit: MAX_DENSE_SITES,
        });
    }
    let potential = sample_potential(b, spec, seed, trial)?;
    assemble_keyed(b, potential, epsilon, kernel, seed, trial)
}

impl OperatorSample {
    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self) -> &Arc<HoppingKernel> {
        &self.kernel
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Ascending spectrum, computed once.
    pub fn spectrum(&self) -> &[f64] {
        self.spectrum.get_or_init(|| match self.eigensystem.get() {
            Some(e) => e.values.clone(),
            None => self.matrix.eigenvalues(),
        })
    }

    /// Eigenpairs, computed once.
    pub fn eigensystem(&self) -> &Eigensystem {
        self.eigensystem.get_or_init(|| self.matrix.eigensystem())
    }

    /// `H_{sub} = R_sub H R_sub`, sharing this sample's potential.
    pub fn restrict(&self, sub: &LatticeBox) -> Result<OperatorSample> {
        let idx = self.lattice_box.indices_of(sub)?;
        Ok(OperatorSample {
            lattice_box: sub.clone(),
            potential: idx.iter().map(|&i| self.potential[i]).collect(),
            epsilon: self.epsilon,
            kernel: Arc::clone(&self.kernel),
            matrix: self.matrix.principal(&idx),
            seed: self.seed,
            trial: self.trial,
            spectrum: OnceLock::new(),
            eigensystem: OnceLock::new(),
        })
    }
}

/// Kernel, disorder law and coupling strength: everything needed to draw
/// `H_B` on any box.
#[derive(Clone, Debug)]
pub struct Model {
    pub kernel: Arc<HoppingKernel>,
    pub disorder: DisorderSpec,
    pub epsilon: f64,
}

impl Model {
    pub fn new(kernel: HoppingKernel, disorder: DisorderSpec, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("ε≥0", format!("epsilon = {epsilon}")));
        }
        Ok(Model {
            kernel: Arc::new(kernel),
            disorder,
            epsilon,
        })
    }

    pub fn sample(&self, b: &LatticeBox, seed: u64, trial: u64) -> Result<OperatorSample> {
        sample_operator(b, &self.disorder, self.epsilon, Arc::clone(&self.kernel), seed, trial)
    }
}
