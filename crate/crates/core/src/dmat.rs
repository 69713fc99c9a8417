//! Doubled-up complex matrices, the structural constants `J`, `Psi` and the
//! quadrature permutation, and the phase-shifted quadrature transforms.
//!
//! A doubled-up matrix acts on stacked vectors `(a, a#)`; for `U, V` of
//! shape `r x k` the doubled-up matrix is `[[U, V], [conj(V), conj(U)]]`.
//! Quadrature vectors are ordered `(q_1, ..., q_n, p_1, ..., p_n)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cmax_abs, to_complex, CMat, RMat, I};

/// Tolerance used when validating the doubled-up block structure.
pub const DELTA_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DoubledMatrix {
    rows_half: usize,
    cols_half: usize,
    entries: CMat,
    /// Set by constructors that produce `[[U, V], [V#, U#]]`. Advisory only:
    /// [`DoubledMatrix::is_delta_structured`] checks the entries.
    delta_flag: bool,
}

impl DoubledMatrix {
    /// Wraps a `2n x 2m` complex matrix without asserting any block structure.
    pub fn new(entries: CMat) -> Result<Self> {
        if !entries.nrows().is_multiple_of(2) || !entries.ncols().is_multiple_of(2) || entries.is_empty() {
            return Err(Error::dim(
                "doubled-up matrix",
                "even, nonzero row and column counts",
                format!("{}x{}", entries.nrows(), entries.ncols()),
            ));
        }
        Ok(Self {
            rows_half: entries.nrows() / 2,
            cols_half: entries.ncols() / 2,
            entries,
            delta_flag: false,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows_half: n,
            cols_half: n,
            entries: CMat::identity(2 * n, 2 * n),
            delta_flag: true,
        }
    }

    pub fn rows_half(&self) -> usize {
        self.rows_half
    }

    pub fn cols_half(&self) -> usize {
        self.cols_half
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn delta_flag(&self) -> bool {
        self.delta_flag
    }

    /// Upper-left `U` block.
    pub fn u(&self) -> CMat {
        self.entries.view((0, 0), (self.rows_half, self.cols_half)).into_owned()
    }

    /// Upper-right `V` block.
    pub fn v(&self) -> CMat {
        self.entries
            .view((0, self.cols_half), (self.rows_half, self.cols_half))
            .into_owned()
    }

    /// Largest entrywise deviation from `[[U, V], [V#, U#]]`.
    pub fn delta_residual(&self) -> f64 {
        let (n, m) = (self.rows_half, self.cols_half);
        let u = self.u();
        let v = self.v();
        let lower_left = self.entries.view((n, 0), (n, m));
        let lower_right = self.entries.view((n, m), (n, m));
        let r1 = cmax_abs(&(lower_left - v.conjugate()));
        let r2 = cmax_abs(&(lower_right - u.conjugate()));
        r1.max(r2)
    }

    pub fn is_delta_structured(&self, tol: f64) -> bool {
        self.delta_residual() <= tol
    }

    /// `X^flat = Psi_m X^dagger Psi_n`.
    pub fn flat(&self) -> DoubledMatrix {
        let psi_n = psi_c(self.rows_half);
        let psi_m = psi_c(self.cols_half);
        DoubledMatrix {
            rows_half: self.cols_half,
            cols_half: self.rows_half,
            entries: psi_m * self.entries.adjoint() * psi_n,
            delta_flag: self.delta_flag,
        }
    }

    pub fn mul(&self, rhs: &DoubledMatrix) -> Result<DoubledMatrix> {
        if self.cols_half != rhs.rows_half {
            return Err(Error::dim(
                "doubled-up product",
                format!("right operand with {} row pairs", self.cols_half),
                rhs.rows_half,
            ));
        }
        Ok(DoubledMatrix {
            rows_half: self.rows_half,
            cols_half: rhs.cols_half,
            entries: &self.entries * &rhs.entries,
            delta_flag: self.delta_flag && rhs.delta_flag,
        })
    }
}

/// `Delta(U, V) = [[U, V], [conj(V), conj(U)]]`.
pub fn delta(u: &CMat, v: &CMat) -> Result<DoubledMatrix> {
    if u.shape() != v.shape() {
        return Err(Error::dim(
            "delta(U, V)",
            format!("{:?}", u.shape()),
            format!("{:?}", v.shape()),
        ));
    }
    if u.is_empty() {
        return Err(Error::dim("delta(U, V)", "nonempty blocks", "0 entries"));
    }
    let (r, k) = u.shape();
    let mut e = CMat::zeros(2 * r, 2 * k);
    e.view_mut((0, 0), (r, k)).copy_from(u);
    e.view_mut((0, k), (r, k)).copy_from(v);
    e.view_mut((r, 0), (r, k)).copy_from(&v.conjugate());
    e.view_mut((r, k), (r, k)).copy_from(&u.conjugate());
    Ok(DoubledMatrix {
        rows_half: r,
        cols_half: k,
        entries: e,
        delta_flag: true,
    })
}

/// Scalar convenience for single-mode blocks.
pub fn delta_scalar(u: Complex64, v: Complex64) -> DoubledMatrix {
    delta(&CMat::from_element(1, 1, u), &CMat::from_element(1, 1, v)).expect("1x1 blocks always conform")
}

pub fn flat(x: &DoubledMatrix) -> DoubledMatrix {
    x.flat()
}

/// `J_n = [[0, I], [-I, 0]]`.
pub fn j_matrix(n: usize) -> RMat {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// `Psi_n = diag(I, -I)`.
pub fn psi(n: usize) -> RMat {
    RMat::from_diagonal(&nalgebra::DVector::from_fn(
        2 * n,
        |i, _| if i < n { 1.0 } else { -1.0 },
    ))
}

fn psi_c(n: usize) -> CMat {
    to_complex(&psi(n))
}

/// Permutation taking `(d_1, ..., d_2n)` to `(d_1, d_3, ..., d_2, d_4, ...)`.
pub fn permutation(n: usize) -> RMat {
    let mut p = RMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        p[(k, 2 * k)] = 1.0;
        p[(n + k, 2 * k + 1)] = 1.0;
    }
    p
}

#[derive(Clone, Debug)]
pub struct StructuralConstants {
    pub dimension: usize,
    pub j: RMat,
    pub psi: RMat,
    pub p: RMat,
}

impl StructuralConstants {
    pub fn new(n: usize) -> Self {
        Self {
            dimension: n,
            j: j_matrix(n),
            psi: psi(n),
            p: permutation(n),
        }
    }
}

/// Unitary map from doubled-up coordinates to phase-shifted quadratures.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTransform {
    angles: Vec<f64>,
    matrix: CMat,
}

impl PhaseTransform {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.angles.len()
    }

    /// Zero-phase transform on `n` modes.
    pub fn standard(n: usize) -> Self {
        lambda_matrix(&vec![0.0; n])
    }

    /// `Lambda_self X Lambda_right^dagger`.
    pub fn sandwich(&self, x: &CMat, right: &PhaseTransform) -> CMat {
        &self.matrix * x * right.matrix.adjoint()
    }

    /// `Lambda_self^dagger Y Lambda_right`, the inverse of [`Self::sandwich`].
    pub fn unsandwich(&self, y: &CMat, right: &PhaseTransform) -> CMat {
        self.matrix.adjoint() * y * &right.matrix
    }
}

/// Single-mode block `M diag(e^{i theta}, e^{-i theta})`.
pub fn mode_block(theta: f64) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e = Complex64::from_polar(1.0, theta);
    let ec = e.conj();
    CMat::from_row_slice(2, 2, &[e * s, ec * s, -I * e * s, I * ec * s])
}

/// `Lambda = P diag(M_1, ..., M_n) P^T` for the given per-mode phases.
pub fn lambda_matrix(angles: &[f64]) -> PhaseTransform {
    let n = angles.len();
    let mut blocks = CMat::zeros(2 * n, 2 * n);
    for (k, &theta) in angles.iter().enumerate() {
        blocks.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&mode_block(theta));
    }
    let p = to_complex(&permutation(n));
    PhaseTransform {
        angles: angles.to_vec(),
        matrix: &p * blocks * p.transpose(),
    }
}

/// `Lambda_c Psi Lambda_b^dagger` for a pair of transforms on the same
/// channel count.
pub fn phase_coupling(lc: &PhaseTransform, lb: &PhaseTransform) -> CMat {
    lc.matrix() * psi_c(lc.dimension()) * lb.matrix().adjoint()
}
