//! Plant and controller realizations, direct coupling, squeezer placement
//! and closed-loop assembly.

use nalgebra::Schur;

use crate::dmat::{j_matrix, lambda_matrix, phase_coupling, DoubledMatrix};
use crate::error::{Error, Result};
use crate::linalg::{block, channel_block, check_shape, check_square, cnorm2, norm2, rotation, to_complex, RMat, I};
use crate::qsys::{build_system, check_realizability, to_quadrature, OpenSystem, QuadRealization, Squeezer};

/// Quadrature plant
/// `dx = A x + B du + B1 dB_in1 + B2 dB_in2`, `dy = C2 x + D21 dB_in1 + D22 du`,
/// `z = C1 x + D beta_u (+ D12 noise)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadPlant {
    pub a: RMat,
    pub b: RMat,
    pub b1: RMat,
    pub b2: RMat,
    pub c1: RMat,
    pub d: RMat,
    pub d12: RMat,
    pub d21: RMat,
    pub d22: RMat,
    pub c2: RMat,
    /// Mode, input and output phases the matrices were generated with.
    pub phases: [f64; 3],
}

impl QuadPlant {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = check_square(&self.a, "plant A")?;
        if n % 2 != 0 {
            return Err(Error::dim("plant A", "even dimension", n.to_string()));
        }
        let nu = self.b.ncols();
        let ny = self.c2.nrows();
        check_shape(&self.b, n, nu, "plant B")?;
        check_shape(&self.b1, n, self.b1.ncols(), "plant B1")?;
        check_shape(&self.b2, n, self.b2.ncols(), "plant B2")?;
        check_shape(&self.c2, ny, n, "plant C2")?;
        check_shape(&self.d21, ny, self.b1.ncols(), "plant D21")?;
        check_shape(&self.d22, ny, nu, "plant D22")?;
        let nz = self.c1.nrows();
        check_shape(&self.c1, nz, n, "plant C1")?;
        check_shape(&self.d, nz, nu, "plant D")?;
        check_shape(&self.d12, nz, self.b1.ncols(), "plant D12")?;
        Ok(())
    }

    /// Realizability residuals: the drift identity over all field inputs and
    /// the output identity for the measured channel (`B1`, `C2`).
    pub fn realizability(&self) -> (f64, f64) {
        channel_realizability(
            &self.a,
            &[&self.b, &self.b1, &self.b2],
            &self.b1,
            &self.c2,
            self.phases[2],
        )
    }
}

/// Residuals of `A J + J A^T + sum B_l J B_l^T` over all inputs and of
/// `B_ch + i J C_ch^T (M(out) Psi M(0)^dagger)` for the one channel that has
/// both an input and an output, the output carrying phase `out_phase`.
pub fn channel_realizability(a: &RMat, inputs: &[&RMat], b_ch: &RMat, c_ch: &RMat, out_phase: f64) -> (f64, f64) {
    let n = a.nrows() / 2;
    let jn = j_matrix(n);
    let mut r1 = a * &jn + &jn * a.transpose();
    for b in inputs {
        let jm = j_matrix(b.ncols() / 2);
        r1 += *b * jm * b.transpose();
    }
    let k = phase_coupling(&lambda_matrix(&[out_phase]), &lambda_matrix(&[0.0]));
    let r2 = to_complex(b_ch) + to_complex(&jn) * to_complex(&c_ch.transpose()) * k * I;
    (norm2(&r1), cnorm2(&r2))
}

/// Parameters of the single-cavity plant with three fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example2Params {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub delta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            theta3: 0.0,
            delta: 0.1,
            kappa1: 0.01,
            kappa2: 0.01,
            kappa3: 0.01,
        }
    }
}

impl Example2Params {
    pub fn with_phases(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
            ..Self::default()
        }
    }
}

pub fn example2_plant(p: &Example2Params) -> Result<QuadPlant> {
    for (name, k) in [("kappa1", p.kappa1), ("kappa2", p.kappa2), ("kappa3", p.kappa3)] {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {k}")));
        }
    }
    let (s1, c1) = p.theta1.sin_cos();
    let (s2, c2) = p.theta2.sin_cos();
    let (s3, c3) = p.theta3.sin_cos();
    let g = |k: f64| 2.0 * k.sqrt();
    let noise = |k: f64| RMat::from_row_slice(2, 2, &[0.0, g(k) * s1, 0.0, -g(k) * c1]);
    Ok(QuadPlant {
        a: RMat::from_row_slice(2, 2, &[0.0, p.delta, -p.delta, 0.0]),
        b: RMat::from_row_slice(2, 2, &[-s1 * s2, s1 * c2, c1 * s2, -c1 * c2]) * g(p.kappa1),
        b1: noise(p.kappa2),
        b2: noise(p.kappa3),
        c1: RMat::identity(2, 2),
        d: RMat::identity(2, 2),
        d12: RMat::zeros(2, 2),
        d21: rotation(p.theta3),
        d22: RMat::zeros(2, 2),
        c2: RMat::from_row_slice(2, 2, &[c3 * c1, c3 * s1, s3 * c1, s3 * s1]) * g(p.kappa2),
        phases: [p.theta1, p.theta2, p.theta3],
    })
}

/// A plant given either by the cavity parameters or by explicit matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum PlantModel {
    Example2(Example2Params),
    Explicit(QuadPlant),
}

impl PlantModel {
    pub fn plant(&self) -> Result<QuadPlant> {
        match self {
            PlantModel::Example2(p) => example2_plant(p),
            PlantModel::Explicit(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }

    /// The plant regenerated with new mode/input/output phases. Only the
    /// parametric model can be re-phased.
    pub fn with_phases(&self, phases: [f64; 3]) -> Result<QuadPlant> {
        match self {
            PlantModel::Example2(p) => example2_plant(&Example2Params {
                theta1: phases[0],
                theta2: phases[1],
                theta3: phases[2],
                ..*p
            }),
            PlantModel::Explicit(_) => Err(Error::Validation(
                "plant phases can only be optimized for the parametric cavity plant".into(),
            )),
        }
    }
}

/// Coherent controller
/// `dxi = AK xi + BK dy_o + BK1 dv_K1 + BK2 dv_K2`, `du_o = CK xi + DK dv_K1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadController {
    pub ak: RMat,
    pub bk: RMat,
    pub bk1: RMat,
    pub bk2: RMat,
    pub ck: RMat,
    pub dk: RMat,
    /// Mode, y_o-input and u_o-output phases.
    pub phases: [f64; 3],
}

/// Field channel order of a controller built from an [`OpenSystem`] with
/// three channels.
pub const CH_VK1: usize = 0;
pub const CH_VK2: usize = 1;
pub const CH_YO: usize = 2;

impl QuadController {
    pub fn n_states(&self) -> usize {
        self.ak.nrows()
    }

    pub fn zero(n_states: usize) -> Self {
        Self {
            ak: RMat::zeros(n_states, n_states),
            bk: RMat::zeros(n_states, 2),
            bk1: RMat::zeros(n_states, 2),
            bk2: RMat::zeros(n_states, 2),
            ck: RMat::zeros(2, n_states),
            dk: RMat::identity(2, 2),
            phases: [0.0; 3],
        }
    }

    /// Converts a one-mode, three-channel open system with channels ordered
    /// `(v_K1 / u_o, v_K2, y_o)`. `theta4` is applied to the mode, `theta5`
    /// to the `y_o` input and `theta6` to the `u_o` output.
    pub fn from_open_system(
        sys: &OpenSystem,
        theta4: f64,
        theta5: f64,
        theta6: f64,
    ) -> Result<(Self, QuadRealization)> {
        if sys.n_modes() != 1 || sys.n_channels() != 3 {
            return Err(Error::dim(
                "controller open system",
                "1 mode, 3 channels",
                format!("{} modes, {} channels", sys.n_modes(), sys.n_channels()),
            ));
        }
        let la = lambda_matrix(&[theta4]);
        let mut b_angles = [0.0; 3];
        b_angles[CH_YO] = theta5;
        let mut c_angles = [0.0; 3];
        c_angles[CH_VK1] = theta6;
        let lb = lambda_matrix(&b_angles);
        let lc = lambda_matrix(&c_angles);
        let rf = build_system(sys)?;
        let q = to_quadrature(&rf, &DoubledMatrix::identity(3), &la, &lb, &lc)?;
        let d = q.feedthrough()?;
        let ctrl = Self {
            ak: q.a_t.clone(),
            bk: crate::linalg::channel_cols(&q.b_t, CH_YO, 3),
            bk1: crate::linalg::channel_cols(&q.b_t, CH_VK1, 3),
            bk2: crate::linalg::channel_cols(&q.b_t, CH_VK2, 3),
            ck: crate::linalg::channel_rows(&q.c_t, CH_VK1, 3),
            dk: channel_block(&d, CH_VK1, CH_VK1, 3, 3),
            phases: [theta4, theta5, theta6],
        };
        Ok((ctrl, q))
    }

    pub fn validate(&self) -> Result<()> {
        let n = check_square(&self.ak, "controller AK")?;
        check_shape(&self.bk, n, 2, "controller BK")?;
        check_shape(&self.bk1, n, 2, "controller BK1")?;
        check_shape(&self.bk2, n, 2, "controller BK2")?;
        check_shape(&self.ck, 2, n, "controller CK")?;
        check_shape(&self.dk, 2, 2, "controller DK")?;
        Ok(())
    }
}

impl QuadController {
    /// Residuals computed from the controller blocks alone: drift identity
    /// over `(BK, BK1, BK2)`, output identity for `u_o` against `v_K1`.
    pub fn realizability(&self) -> (f64, f64) {
        channel_realizability(
            &self.ak,
            &[&self.bk, &self.bk1, &self.bk2],
            &self.bk1,
            &self.ck,
            self.phases[2],
        )
    }
}

/// Realizability residuals of a controller's full quadrature realization.
pub fn controller_realizability(q: &QuadRealization) -> (f64, f64) {
    check_realizability(q)
}

/// `(B12, B21 = J B12^T J)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectCoupling {
    pub b12: RMat,
    pub b21: RMat,
}

pub fn make_direct_coupling(b12: &RMat) -> Result<DirectCoupling> {
    let n2 = check_square(b12, "B12")?;
    if n2 % 2 != 0 || n2 == 0 {
        return Err(Error::dim("B12", "nonempty even dimension", n2.to_string()));
    }
    let j = j_matrix(n2 / 2);
    Ok(DirectCoupling {
        b12: b12.clone(),
        b21: &j * b12.transpose() * &j,
    })
}

impl DirectCoupling {
    pub fn zero(n_states: usize) -> Self {
        Self {
            b12: RMat::zeros(n_states, n_states),
            b21: RMat::zeros(n_states, n_states),
        }
    }
}

/// Squeezers on the control field `u`, the measurement `y` and the two
/// controller vacuum inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezerSet {
    pub u: Squeezer,
    pub y: Squeezer,
    pub vk1: Squeezer,
    pub vk2: Squeezer,
}

impl Default for SqueezerSet {
    fn default() -> Self {
        Self::identity()
    }
}

impl SqueezerSet {
    pub fn identity() -> Self {
        Self::from_r([0.0; 4])
    }

    pub fn from_r(r: [f64; 4]) -> Self {
        Self {
            u: Squeezer::from_r(r[0]),
            y: Squeezer::from_r(r[1]),
            vk1: Squeezer::from_r(r[2]),
            vk2: Squeezer::from_r(r[3]),
        }
    }

    pub fn r_values(&self) -> [f64; 4] {
        [self.u.r, self.y.r, self.vk1.r, self.vk2.r]
    }
}

/// Real closed-loop matrices. `g` stacks the noise columns
/// `(B_in1, v_K1, v_K2)` and `b` carries `B_in2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    pub a: RMat,
    pub b: RMat,
    pub g: RMat,
    pub c: RMat,
    pub h: RMat,
    pub d12: RMat,
}

/// 2x2-grid blocks of a [`ClosedLoop`], split at the plant/controller
/// boundary and at the noise channel boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopBlocks {
    pub a: [[RMat; 2]; 2],
    pub b: [RMat; 2],
    pub g: [Vec<RMat>; 2],
    pub c: [RMat; 2],
    pub h: Vec<RMat>,
    pub d12: RMat,
}

impl ClosedLoop {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// `[B G]`, all noise inputs side by side.
    pub fn noise(&self) -> RMat {
        let mut w = RMat::zeros(self.a.nrows(), self.b.ncols() + self.g.ncols());
        w.columns_mut(0, self.b.ncols()).copy_from(&self.b);
        w.columns_mut(self.b.ncols(), self.g.ncols()).copy_from(&self.g);
        w
    }

    /// Splits at plant dimension `np` and into 2-column noise blocks.
    pub fn blocks(&self, np: usize) -> LoopBlocks {
        let n = self.a.nrows();
        let nk = n - np;
        let sub = |m: &RMat, r0: usize, nr: usize, c0: usize, nc: usize| m.view((r0, c0), (nr, nc)).into_owned();
        let split_cols =
            |m: &RMat, r0: usize, nr: usize| (0..m.ncols() / 2).map(|j| sub(m, r0, nr, 2 * j, 2)).collect::<Vec<_>>();
        LoopBlocks {
            a: [
                [sub(&self.a, 0, np, 0, np), sub(&self.a, 0, np, np, nk)],
                [sub(&self.a, np, nk, 0, np), sub(&self.a, np, nk, np, nk)],
            ],
            b: [
                sub(&self.b, 0, np, 0, self.b.ncols()),
                sub(&self.b, np, nk, 0, self.b.ncols()),
            ],
            g: [split_cols(&self.g, 0, np), split_cols(&self.g, np, nk)],
            c: [
                sub(&self.c, 0, self.c.nrows(), 0, np),
                sub(&self.c, 0, self.c.nrows(), np, nk),
            ],
            h: split_cols(&self.h, 0, self.h.nrows()),
            d12: self.d12.clone(),
        }
    }

    pub fn from_blocks(parts: &LoopBlocks) -> Result<Self> {
        let g0: Vec<&RMat> = parts.g[0].iter().collect();
        let g1: Vec<&RMat> = parts.g[1].iter().collect();
        let h: Vec<&RMat> = parts.h.iter().collect();
        Ok(Self {
            a: block(
                &[&[&parts.a[0][0], &parts.a[0][1]], &[&parts.a[1][0], &parts.a[1][1]]],
                "A_cl",
            )?,
            b: block(&[&[&parts.b[0]], &[&parts.b[1]]], "B_cl")?,
            g: block(&[&g0, &g1], "G_cl")?,
            c: block(&[&[&parts.c[0], &parts.c[1]]], "C_cl")?,
            h: block(&[&h], "H_cl")?,
            d12: parts.d12.clone(),
        })
    }
}

/// Coherent feedback loop with squeezers and direct coupling:
///
/// ```text
/// A_cl = [[A, B Su CK + B12], [BK Sy C2 + B21, AK]]
/// B_cl = [B2; BK Sy D22]
/// G_cl = [[B1, B Su DK Sv1, 0], [BK Sy D21, BK1 Sv1, BK2 Sv2]]
/// C_cl = [C1, D Su CK]
/// H_cl = [D12, D Su DK Sv1, 0]
/// ```
pub fn assemble(plant: &QuadPlant, ctrl: &QuadController, sq: &SqueezerSet, dc: &DirectCoupling) -> Result<ClosedLoop> {
    plant.validate()?;
    ctrl.validate()?;
    let np = plant.n_states();
    let nk = ctrl.n_states();
    check_shape(&plant.b, np, 2, "plant B")?;
    check_shape(&plant.c2, 2, np, "plant C2")?;
    check_shape(&plant.b1, np, 2, "plant B1")?;
    check_shape(&dc.b12, np, nk, "B12")?;
    check_shape(&dc.b21, nk, np, "B21")?;
    let su = &sq.u.s_quad;
    let sy = &sq.y.s_quad;
    let s1 = &sq.vk1.s_quad;
    let s2 = &sq.vk2.s_quad;

    let a12 = &plant.b * su * &ctrl.ck + &dc.b12;
    let a21 = &ctrl.bk * sy * &plant.c2 + &dc.b21;
    let a = block(&[&[&plant.a, &a12], &[&a21, &ctrl.ak]], "A_cl")?;

    let bk_d22 = &ctrl.bk * sy * &plant.d22;
    let b = block(&[&[&plant.b2], &[&bk_d22]], "B_cl")?;

    let zp = RMat::zeros(np, 2);
    let g01 = &plant.b * su * &ctrl.dk * s1;
    let g10 = &ctrl.bk * sy * &plant.d21;
    let g11 = &ctrl.bk1 * s1;
    let g12 = &ctrl.bk2 * s2;
    let g = block(&[&[&plant.b1, &g01, &zp], &[&g10, &g11, &g12]], "G_cl")?;

    let c01 = &plant.d * su * &ctrl.ck;
    let c = block(&[&[&plant.c1, &c01]], "C_cl")?;

    let nz = plant.c1.nrows();
    let h1 = &plant.d * su * &ctrl.dk * s1;
    let h = block(&[&[&plant.d12, &h1, &RMat::zeros(nz, 2)]], "H_cl")?;

    Ok(ClosedLoop {
        a,
        b,
        g,
        c,
        h,
        d12: plant.d12.clone(),
    })
}

/// Everything needed to assemble one coherent feedback loop.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentDesign {
    pub plant: QuadPlant,
    pub controller: QuadController,
    pub squeezers: SqueezerSet,
    pub coupling: DirectCoupling,
}

impl CoherentDesign {
    pub fn closed_loop(&self) -> Result<ClosedLoop> {
        assemble(&self.plant, &self.controller, &self.squeezers, &self.coupling)
    }
}

/// Largest real part of the eigenvalues; the matrix is Hurwitz iff negative.
pub fn spectral_abscissa(a: &RMat) -> Result<f64> {
    check_square(a, "spectral abscissa")?;
    if a.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &RMat) -> bool {
    matches!(spectral_abscissa(a), Ok(x) if x < 0.0)
}
