//! Open quantum harmonic-oscillator models in annihilation form, ideal
//! squeezers, conversion to phase-shifted quadrature form, and the
//! realizability check and completion that go with it.

use num_complex::Complex64;

use crate::dmat::{delta, delta_scalar, j_matrix, phase_coupling, psi, DoubledMatrix, PhaseTransform};
use crate::error::{Error, Result};
use crate::linalg::{cmax_abs, diag2, norm2, real_checked, to_complex, CMat, RMat, I};

/// Entries of the quadrature matrices may carry at most this much
/// imaginary residue before conversion is rejected.
pub const CONVERSION_TOL: f64 = 1e-8;

/// Tolerance on Hermitian/symmetric Hamiltonian blocks.
pub const HAMILTONIAN_TOL: f64 = 1e-12;

/// `n` oscillators coupled to `m` field channels through
/// `L = C_- a + C_+ a#`, with Hamiltonian `H = 1/2 a^dagger Delta(Omega_-, Omega_+) a`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenSystem {
    pub c_minus: CMat,
    pub c_plus: CMat,
    pub omega_minus: CMat,
    pub omega_plus: CMat,
}

impl OpenSystem {
    pub fn new(c_minus: CMat, c_plus: CMat, omega_minus: CMat, omega_plus: CMat) -> Result<Self> {
        let sys = Self {
            c_minus,
            c_plus,
            omega_minus,
            omega_plus,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn n_modes(&self) -> usize {
        self.c_minus.ncols()
    }

    pub fn n_channels(&self) -> usize {
        self.c_minus.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.c_minus.shape();
        if n == 0 || m == 0 {
            return Err(Error::dim("open system coupling", "nonempty C_-", format!("{m}x{n}")));
        }
        if self.c_plus.shape() != (m, n) {
            return Err(Error::dim(
                "C_+",
                format!("{m}x{n}"),
                format!("{:?}", self.c_plus.shape()),
            ));
        }
        if self.omega_minus.shape() != (n, n) {
            return Err(Error::dim(
                "Omega_-",
                format!("{n}x{n}"),
                format!("{:?}", self.omega_minus.shape()),
            ));
        }
        if self.omega_plus.shape() != (n, n) {
            return Err(Error::dim(
                "Omega_+",
                format!("{n}x{n}"),
                format!("{:?}", self.omega_plus.shape()),
            ));
        }
        let herm = cmax_abs(&(&self.omega_minus - self.omega_minus.adjoint()));
        if herm > HAMILTONIAN_TOL {
            return Err(Error::Validation(format!(
                "Omega_- is not Hermitian (deviation {herm:e})"
            )));
        }
        let sym = cmax_abs(&(&self.omega_plus - self.omega_plus.transpose()));
        if sym > HAMILTONIAN_TOL {
            return Err(Error::Validation(format!(
                "Omega_+ is not symmetric (deviation {sym:e})"
            )));
        }
        Ok(())
    }

    pub fn coupling(&self) -> DoubledMatrix {
        delta(&self.c_minus, &self.c_plus).expect("shapes validated")
    }

    pub fn hamiltonian(&self) -> DoubledMatrix {
        delta(&self.omega_minus, &self.omega_plus).expect("shapes validated")
    }

    /// Real symmetric `R = Lambda_a Delta(Omega_-, Omega_+) Lambda_a^dagger`,
    /// the Hamiltonian as it appears in quadrature form.
    pub fn quadrature_hamiltonian(&self, la: &PhaseTransform) -> Result<RMat> {
        let h = la.sandwich(self.hamiltonian().entries(), la);
        real_checked(&h, CONVERSION_TOL, "Hamiltonian")
    }
}

/// `(A, B, C)` of the annihilation-form dynamics.
#[derive(Clone, Debug)]
pub struct AnnihilationRealization {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
}

/// `A = -1/2 C^flat C - i Psi Delta(Omega_-, Omega_+)`, `B = -C^flat`,
/// `C = Delta(C_-, C_+)`.
pub fn build_system(sys: &OpenSystem) -> Result<AnnihilationRealization> {
    sys.validate()?;
    let n = sys.n_modes();
    let c = sys.coupling();
    let c_flat = c.flat();
    let cfc = c_flat.mul(&c)?;
    let a = cfc.entries() * Complex64::new(-0.5, 0.0) - to_complex(&psi(n)) * sys.hamiltonian().entries() * I;
    Ok(AnnihilationRealization {
        a,
        b: -c_flat.into_entries(),
        c: c.into_entries(),
    })
}

/// Single-mode ideal squeezer `Delta(cosh r, sinh r)`, zero-phase quadrature
/// form `diag(e^r, e^-r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Squeezer {
    pub r: f64,
    pub s_quad: RMat,
}

impl Squeezer {
    pub fn identity() -> Self {
        Self::from_r(0.0)
    }

    pub fn from_r(r: f64) -> Self {
        Self {
            r,
            s_quad: diag2(r.exp(), (-r).exp()),
        }
    }

    /// Squeezer reached by a DPA with decay `kappa` and pump `eps` in the
    /// fast limit: `r = ln((kappa + eps) / (kappa - eps))`.
    pub fn from_kappa_eps(kappa: f64, eps: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(eps.abs() < kappa) {
            return Err(Error::Domain(format!(
                "DPA parameters need |eps| < kappa, got kappa={kappa}, eps={eps}"
            )));
        }
        Ok(Self::from_r(((kappa + eps) / (kappa - eps)).ln()))
    }

    /// Ingests a squeezer printed as `diag(d1, d2)`: `r = ln(d1)`, and the
    /// second entry is regenerated so the determinant is exactly one.
    pub fn from_diagonal(first: f64) -> Result<Self> {
        if !(first > 0.0) {
            return Err(Error::Domain(format!(
                "squeezer diagonal must be positive, got {first}"
            )));
        }
        Ok(Self::from_r(first.ln()))
    }

    pub fn annihilation(&self) -> DoubledMatrix {
        delta_scalar(Complex64::new(self.r.cosh(), 0.0), Complex64::new(self.r.sinh(), 0.0))
    }
}

/// Block-diagonal annihilation-form squeezer over several channels.
pub fn squeezer_bank(squeezers: &[Squeezer]) -> Result<DoubledMatrix> {
    let m = squeezers.len();
    let cosh = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        squeezers.iter().map(|s| Complex64::new(s.r.cosh(), 0.0)),
    ));
    let sinh = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        squeezers.iter().map(|s| Complex64::new(s.r.sinh(), 0.0)),
    ));
    delta(&cosh, &sinh)
}

/// Real quadrature matrices `A~ = La A La^dag`, `B~ = La B Lb^dag`,
/// `C~ = Lc C La^dag`, `S~ = Lb S Lb^dag`, together with the transforms.
#[derive(Clone, Debug)]
pub struct QuadRealization {
    pub a_t: RMat,
    pub b_t: RMat,
    pub c_t: RMat,
    pub s_t: RMat,
    pub lambda_a: PhaseTransform,
    pub lambda_b: PhaseTransform,
    pub lambda_c: PhaseTransform,
}

impl QuadRealization {
    pub fn n_modes(&self) -> usize {
        self.a_t.nrows() / 2
    }

    pub fn n_channels(&self) -> usize {
        self.b_t.ncols() / 2
    }

    /// Real `Lambda_c Lambda_b^dagger`, the output feedthrough in quadrature form.
    pub fn feedthrough(&self) -> Result<RMat> {
        let d = self.lambda_c.matrix() * self.lambda_b.matrix().adjoint();
        real_checked(&d, CONVERSION_TOL, "feedthrough")
    }
}

pub fn to_quadrature(
    real_form: &AnnihilationRealization,
    s: &DoubledMatrix,
    la: &PhaseTransform,
    lb: &PhaseTransform,
    lc: &PhaseTransform,
) -> Result<QuadRealization> {
    let n2 = real_form.a.nrows();
    let m2 = real_form.b.ncols();
    let shapes_ok = real_form.a.ncols() == n2
        && real_form.b.nrows() == n2
        && real_form.c.shape() == (m2, n2)
        && s.entries().shape() == (m2, m2)
        && la.matrix().nrows() == n2
        && lb.matrix().nrows() == m2
        && lc.matrix().nrows() == m2;
    if !shapes_ok {
        return Err(Error::dim(
            "quadrature conversion",
            format!("A {n2}x{n2}, B {n2}x{m2}, C {m2}x{n2}, S {m2}x{m2}, Lambda_a {n2}, Lambda_b/c {m2}"),
            format!(
                "A {:?}, B {:?}, C {:?}, S {:?}, Lambda {}/{}/{}",
                real_form.a.shape(),
                real_form.b.shape(),
                real_form.c.shape(),
                s.entries().shape(),
                la.matrix().nrows(),
                lb.matrix().nrows(),
                lc.matrix().nrows()
            ),
        ));
    }
    Ok(QuadRealization {
        a_t: real_checked(&la.sandwich(&real_form.a, la), CONVERSION_TOL, "A")?,
        b_t: real_checked(&la.sandwich(&real_form.b, lb), CONVERSION_TOL, "B")?,
        c_t: real_checked(&lc.sandwich(&real_form.c, la), CONVERSION_TOL, "C")?,
        s_t: real_checked(&lb.sandwich(s.entries(), lb), CONVERSION_TOL, "S")?,
        lambda_a: la.clone(),
        lambda_b: lb.clone(),
        lambda_c: lc.clone(),
    })
}

/// Residuals of the two realizability identities, as largest singular values:
/// `A~ J + J A~^T + B~ J B~^T` and `B~ + i J C~^T (Lc Psi Lb^dagger)`.
pub fn check_realizability(q: &QuadRealization) -> (f64, f64) {
    let n = q.n_modes();
    let m = q.n_channels();
    let jn = j_matrix(n);
    let jm = j_matrix(m);
    let r1 = &q.a_t * &jn + &jn * q.a_t.transpose() + &q.b_t * &jm * q.b_t.transpose();
    let k = phase_coupling(&q.lambda_c, &q.lambda_b);
    let r2 = to_complex(&q.b_t) + to_complex(&jn) * to_complex(&q.c_t.transpose()) * k * I;
    (norm2(&r1), crate::linalg::cnorm2(&r2))
}

/// Output of [`complete_realization`]: the reconstructed system plus how far
/// the supplied `B~` was from the realizable range.
#[derive(Clone, Debug)]
pub struct Completion {
    pub system: OpenSystem,
    /// Imaginary residue of the reconstructed `C~` plus deviation of `C` from
    /// doubled-up form. Zero (to rounding) when `B~` is realizable.
    pub residual: f64,
}

/// Reconstructs the unique coupling `Delta(C_-, C_+)` compatible with `B~`
/// under the given transforms, and the Hamiltonian from the symmetric `R`
/// (`A~ = 1/2 J C~^T J C~ + J R`). Noisy `B~` is not projected; the
/// distance from the realizable range is reported in `residual`.
pub fn complete_realization(
    b_t: &RMat,
    la: &PhaseTransform,
    lb: &PhaseTransform,
    lc: &PhaseTransform,
    r: &RMat,
) -> Result<Completion> {
    let n2 = b_t.nrows();
    let m2 = b_t.ncols();
    if !n2.is_multiple_of(2)
        || !m2.is_multiple_of(2)
        || la.matrix().nrows() != n2
        || lb.matrix().nrows() != m2
        || lc.matrix().nrows() != m2
    {
        return Err(Error::dim(
            "realization completion",
            "B~ of size 2n x 2m with matching transforms",
            format!("B~ {n2}x{m2}"),
        ));
    }
    if r.shape() != (n2, n2) {
        return Err(Error::dim(
            "Hamiltonian R",
            format!("{n2}x{n2}"),
            format!("{:?}", r.shape()),
        ));
    }
    let asym = crate::linalg::max_abs(&(r - r.transpose()));
    if asym > HAMILTONIAN_TOL * (1.0 + crate::linalg::max_abs(r)) {
        return Err(Error::Validation(format!("R is not symmetric (deviation {asym:e})")));
    }
    let jn = to_complex(&j_matrix(n2 / 2));

    // C~^T = -i J B~ (Lc Psi Lb^dagger)^dagger = -i J B~ Lb Psi Lc^dagger.
    let k = phase_coupling(lc, lb);
    let c_t_complex = (-(jn * to_complex(b_t) * k.adjoint()) * I).transpose();
    let imag = crate::linalg::imag_residue(&c_t_complex);
    let c_t = c_t_complex.map(|z| Complex64::new(z.re, 0.0));
    let c_full = lc.unsandwich(&c_t, la);
    let c = DoubledMatrix::new(c_full)?;
    let c_minus = c.u();
    let c_plus = c.v();
    let structure = c.delta_residual();

    let h = la.matrix().adjoint() * to_complex(r) * la.matrix();
    let h = DoubledMatrix::new(h)?;
    let mut omega_minus = h.u();
    let mut omega_plus = h.v();
    // Rounding from the unitary sandwich; R symmetric makes these exact.
    omega_minus = (&omega_minus + omega_minus.adjoint()) * Complex64::new(0.5, 0.0);
    omega_plus = (&omega_plus + omega_plus.transpose()) * Complex64::new(0.5, 0.0);

    Ok(Completion {
        system: OpenSystem::new(c_minus, c_plus, omega_minus, omega_plus)?,
        residual: imag.max(structure),
    })
}

/// `(1/2) J C~^T J C~ + J R`: the quadrature drift for coupling `C~` and
/// Hamiltonian `R`.
pub fn drift_from_parts(c_t: &RMat, r: &RMat) -> RMat {
    let n = c_t.ncols() / 2;
    let m = c_t.nrows() / 2;
    let jn = j_matrix(n);
    let jm = j_matrix(m);
    (&jn * c_t.transpose() * &jm * c_t) * 0.5 + &jn * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmat::lambda_matrix;
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> OpenSystem {
        let mut cm = || CMat::from_fn(m, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let c_minus = cm();
        let c_plus = cm();
        let g = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let omega_minus = (&g + g.adjoint()) * c(0.5, 0.0);
        let g = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let omega_plus = (&g + g.transpose()) * c(0.5, 0.0);
        OpenSystem::new(c_minus, c_plus, omega_minus, omega_plus).unwrap()
    }

    fn random_angles(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        (0..k)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect()
    }

    fn dpa_system(kappa: f64, eps: f64) -> OpenSystem {
        OpenSystem::new(
            CMat::from_element(1, 1, c(kappa.sqrt(), 0.0)),
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(0.0, eps / 2.0)),
        )
        .unwrap()
    }

    #[test]
    fn dpa_drift_in_quadrature_form() {
        let sys = dpa_system(1.0, 0.5);
        let rf = build_system(&sys).unwrap();
        // Annihilation form is -1/2 [[kappa, -eps], [-eps, kappa]].
        let expect = CMat::from_row_slice(2, 2, &[c(-0.5, 0.), c(0.25, 0.), c(0.25, 0.), c(-0.5, 0.)]);
        assert!(cmax_abs(&(&rf.a - expect)) < 1e-15);
        let l = lambda_matrix(&[0.0]);
        let q = to_quadrature(&rf, &DoubledMatrix::identity(1), &l, &l, &l).unwrap();
        // Quadrature form decouples into -(kappa - eps)/2 and -(kappa + eps)/2.
        assert!(max_abs(&(&q.a_t - diag2(-0.25, -0.75))) < 1e-15);
    }

    #[test]
    fn closed_oscillator() {
        let omega = 0.3;
        let sys = OpenSystem::new(
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(omega, 0.0)),
            CMat::zeros(1, 1),
        )
        .unwrap();
        let rf = build_system(&sys).unwrap();
        let expect = to_complex(&psi(1)) * delta_scalar(c(omega, 0.0), c(0.0, 0.0)).entries() * (-I);
        assert!(cmax_abs(&(&rf.a - expect)) < 1e-15);
        assert!(cmax_abs(&rf.b) == 0.0);
    }

    #[test]
    fn drift_plus_flat_equals_minus_cflat_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let sys = random_system(&mut rng, 2, 3);
            let rf = build_system(&sys).unwrap();
            let a = DoubledMatrix::new(rf.a.clone()).unwrap();
            let c = DoubledMatrix::new(rf.c.clone()).unwrap();
            let lhs = a.entries() + a.flat().entries();
            let rhs = -c.flat().mul(&c).unwrap().into_entries();
            assert!(cmax_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian_hamiltonian() {
        let err = OpenSystem::new(
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(0.0, 1.0)),
            CMat::zeros(1, 1),
        );
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = OpenSystem::new(
            CMat::zeros(1, 2),
            CMat::zeros(1, 2),
            CMat::zeros(2, 2),
            CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(2., 0.), c(0., 0.)]),
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn squeezer_constructors() {
        let s = Squeezer::from_kappa_eps(1.0, 0.0).unwrap();
        assert_eq!(s.r, 0.0);
        assert_eq!(s.s_quad, RMat::identity(2, 2));

        let s = Squeezer::from_diagonal(1.5876).unwrap();
        assert!((s.s_quad[(0, 0)] - 1.5876).abs() < 1e-12);
        assert!((s.s_quad[(1, 1)] - 0.6299).abs() < 5e-5);

        let s = Squeezer::from_kappa_eps(3.0, 1.0).unwrap();
        assert!((s.r - 2f64.ln()).abs() < 1e-15);
        assert!(max_abs(&(&s.s_quad - diag2(2.0, 0.5))) < 1e-15);

        assert!(matches!(Squeezer::from_kappa_eps(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(Squeezer::from_kappa_eps(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn printed_squeezer_is_renormalized() {
        let s = Squeezer::from_diagonal(230.3001).unwrap();
        assert!((s.s_quad.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn squeezer_is_bogoliubov_and_quadrature_diagonal() {
        let l = lambda_matrix(&[0.0]);
        for k in -30..=30 {
            let r = k as f64 * 0.1;
            let s = Squeezer::from_r(r);
            let a = s.annihilation();
            let id = CMat::identity(2, 2);
            assert!(cmax_abs(&(a.flat().mul(&a).unwrap().entries() - &id)) < 1e-12);
            assert!(cmax_abs(&(a.mul(&a.flat()).unwrap().entries() - &id)) < 1e-12);
            let q = real_checked(&l.sandwich(a.entries(), &l), 1e-12, "S").unwrap();
            assert!(max_abs(&(q - &s.s_quad)) < 1e-12 * r.exp().max(1.0));
            assert!((s.s_quad.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_system_converts_to_zero() {
        let sys = OpenSystem::new(
            CMat::zeros(2, 1),
            CMat::zeros(2, 1),
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
        )
        .unwrap();
        let rf = build_system(&sys).unwrap();
        let la = lambda_matrix(&[0.0]);
        let lb = lambda_matrix(&[0.0, 0.0]);
        let q = to_quadrature(&rf, &DoubledMatrix::identity(2), &la, &lb, &lb).unwrap();
        assert_eq!(max_abs(&q.a_t), 0.0);
        assert_eq!(max_abs(&q.b_t), 0.0);
        assert_eq!(max_abs(&q.c_t), 0.0);
        let (r1, r2) = check_realizability(&q);
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn conversion_rejects_non_doubled_input() {
        let la = lambda_matrix(&[0.0]);
        let rf = AnnihilationRealization {
            a: CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]),
            b: CMat::zeros(2, 2),
            c: CMat::zeros(2, 2),
        };
        let err = to_quadrature(&rf, &DoubledMatrix::identity(1), &la, &la, &la);
        assert!(matches!(err, Err(Error::Conversion { block: "A", .. })));
    }

    #[test]
    fn realizability_holds_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 1 + trial % 3;
            let m = 1 + (trial / 3) % 3;
            let sys = random_system(&mut rng, n, m);
            let rf = build_system(&sys).unwrap();
            let la = lambda_matrix(&random_angles(&mut rng, n));
            let lb = lambda_matrix(&random_angles(&mut rng, m));
            let lc = lambda_matrix(&random_angles(&mut rng, m));
            let q = to_quadrature(&rf, &DoubledMatrix::identity(m), &la, &lb, &lc).unwrap();
            let (r1, r2) = check_realizability(&q);
            assert!(r1 <= 1e-10 && r2 <= 1e-10, "trial {trial}: {r1:e} {r2:e}");
        }
    }

    #[test]
    fn perturbed_drift_fails_realizability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = random_system(&mut rng, 1, 2);
        let rf = build_system(&sys).unwrap();
        let la = lambda_matrix(&[0.2]);
        let lb = lambda_matrix(&[0.1, -0.4]);
        let mut q = to_quadrature(&rf, &DoubledMatrix::identity(2), &la, &lb, &lb).unwrap();
        q.a_t[(0, 0)] += 0.1;
        let (r1, _) = check_realizability(&q);
        assert!(r1 > 0.01);
    }

    #[test]
    fn completion_round_trip_and_uniqueness() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for trial in 0..30 {
            let n = 1 + trial % 2;
            let m = 1 + trial % 3;
            let sys = random_system(&mut rng, n, m);
            let rf = build_system(&sys).unwrap();
            let la = lambda_matrix(&random_angles(&mut rng, n));
            let lb = lambda_matrix(&random_angles(&mut rng, m));
            let lc = lambda_matrix(&random_angles(&mut rng, m));
            let q = to_quadrature(&rf, &DoubledMatrix::identity(m), &la, &lb, &lc).unwrap();
            let r = sys.quadrature_hamiltonian(&la).unwrap();
            let done = complete_realization(&q.b_t, &la, &lb, &lc, &r).unwrap();
            assert!(done.residual < 1e-10);
            assert!(cmax_abs(&(&done.system.c_minus - &sys.c_minus)) < 1e-9);
            assert!(cmax_abs(&(&done.system.c_plus - &sys.c_plus)) < 1e-9);
            assert!(cmax_abs(&(&done.system.omega_minus - &sys.omega_minus)) < 1e-9);
            assert!(cmax_abs(&(&done.system.omega_plus - &sys.omega_plus)) < 1e-9);

            let back = build_system(&done.system).unwrap();
            let q2 = to_quadrature(&back, &DoubledMatrix::identity(m), &la, &lb, &lc).unwrap();
            assert!(max_abs(&(&q2.b_t - &q.b_t)) < 1e-9);
            assert!(max_abs(&(&q2.a_t - drift_from_parts(&q.c_t, &r))) < 1e-9);
            let (r1, r2) = check_realizability(&q2);
            assert!(r1 < 1e-10 && r2 < 1e-10);

            // A different Hamiltonian leaves the coupling untouched.
            let g = RMat::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-1.0..1.0));
            let r_other = (&g + g.transpose()) * 0.5;
            let other = complete_realization(&q.b_t, &la, &lb, &lc, &r_other).unwrap();
            assert_eq!(other.system.c_minus, done.system.c_minus);
            assert_eq!(other.system.c_plus, done.system.c_plus);
            assert!(
                cmax_abs(&(&other.system.omega_minus - &done.system.omega_minus)) > 1e-6
                    || cmax_abs(&(&other.system.omega_plus - &done.system.omega_plus)) > 1e-6
            );
        }
    }

    #[test]
    fn completion_of_zero_coupling() {
        let l = lambda_matrix(&[0.0]);
        let done = complete_realization(&RMat::zeros(2, 2), &l, &l, &l, &RMat::zeros(2, 2)).unwrap();
        assert_eq!(cmax_abs(&done.system.c_minus), 0.0);
        assert_eq!(cmax_abs(&done.system.c_plus), 0.0);
        assert_eq!(cmax_abs(&done.system.omega_minus), 0.0);
        assert_eq!(cmax_abs(&done.system.omega_plus), 0.0);
    }

    #[test]
    fn completion_rejects_asymmetric_r() {
        let l = lambda_matrix(&[0.0]);
        let r = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let err = complete_realization(&RMat::zeros(2, 2), &l, &l, &l, &r);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn completion_recovers_plant_output_coupling() {
        // Noise channel of the cavity plant: B~_1 = 2 sqrt(kappa) [[0, 0], [0, -1]]
        // with output row C~_2 = 2 sqrt(kappa) [[1, 0], [0, 0]].
        let k = 0.01f64;
        let b1 = RMat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0 * k.sqrt()]);
        let l = lambda_matrix(&[0.0]);
        let done = complete_realization(&b1, &l, &l, &l, &RMat::zeros(2, 2)).unwrap();
        let rf = build_system(&done.system).unwrap();
        let q = to_quadrature(&rf, &DoubledMatrix::identity(1), &l, &l, &l).unwrap();
        let expect_c = RMat::from_row_slice(2, 2, &[2.0 * k.sqrt(), 0.0, 0.0, 0.0]);
        assert!(max_abs(&(&q.c_t - expect_c)) < 1e-12);
        // C_- = C_+ = sqrt(kappa): the coupling L = sqrt(kappa)(a + a*).
        assert!((done.system.c_minus[(0, 0)] - c(k.sqrt(), 0.0)).norm() < 1e-12);
        assert!((done.system.c_plus[(0, 0)] - c(k.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_phase_matches_amplitude_phase_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random_system(&mut rng, 1, 1);
        let rf = build_system(&sys).unwrap();
        let l = lambda_matrix(&[0.0]);
        let q = to_quadrature(&rf, &DoubledMatrix::identity(1), &l, &l, &l).unwrap();
        // q = (a + a*)/sqrt2, p = -i(a - a*)/sqrt2 written out by hand.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = CMat::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(0., -s), c(0., s)]);
        let a_t = &m * &rf.a * m.adjoint();
        assert!(max_abs(&(a_t.map(|z| z.re) - &q.a_t)) < 1e-14);
    }
}
