//! Measurement-based LQG design: Riccati solvers, the Kalman filter plus
//! state-feedback controller, and its closed-loop cost.

use crate::error::{Error, Result};
use crate::linalg::{block, check_shape, check_square, max_abs, symmetrize, RMat};
use crate::lqg::{lqg_evaluate, lyap_solve};
use crate::netgen::{example2_plant, spectral_abscissa, ClosedLoop, Example2Params, QuadPlant};

/// Stabilizing solution of
/// `A^T X + X A - (X B + N) R^-1 (B^T X + N^T) + Q = 0`.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub x: RMat,
    /// Largest absolute entry of the Riccati expression at `x`.
    pub residual: f64,
    /// Spectral abscissa of `A - B K`, `K = R^-1 (B^T X + N^T)`.
    pub closed_loop_abscissa: f64,
    pub gain: RMat,
}

const SIGN_MAX_ITER: usize = 200;
const NEWTON_MAX_ITER: usize = 50;

fn check_problem(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat) -> Result<(usize, usize)> {
    let nx = check_square(a, "Riccati A")?;
    let nu = b.ncols();
    check_shape(b, nx, nu, "Riccati B")?;
    check_shape(q, nx, nx, "Riccati Q")?;
    check_shape(r, nu, nu, "Riccati R")?;
    check_shape(n, nx, nu, "Riccati N")?;
    if max_abs(&(r - r.transpose())) > 1e-12 * (1.0 + max_abs(r)) {
        return Err(Error::Validation("R is not symmetric".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::Validation("R is not positive definite".into()));
    }
    Ok((nx, nu))
}

fn inverse(m: &RMat, what: &str) -> Result<RMat> {
    m.clone()
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Synthesis(format!("{what} is singular")))
}

pub fn riccati_residual(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat, x: &RMat) -> Result<f64> {
    let ri = inverse(r, "R")?;
    let xb = x * b + n;
    Ok(max_abs(&(a.transpose() * x + x * a - &xb * ri * xb.transpose() + q)))
}

fn finish(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat, x: RMat) -> Result<RiccatiSolution> {
    let x = symmetrize(&x);
    let ri = inverse(r, "R")?;
    let gain = &ri * (b.transpose() * &x + n.transpose());
    let closed_loop_abscissa = spectral_abscissa(&(a - b * &gain))?;
    let residual = riccati_residual(a, b, q, r, n, &x)?;
    if !(closed_loop_abscissa < 0.0) {
        return Err(Error::Synthesis(format!(
            "Riccati solution is not stabilizing (abscissa {closed_loop_abscissa:e})"
        )));
    }
    Ok(RiccatiSolution {
        x,
        residual,
        closed_loop_abscissa,
        gain,
    })
}

/// Stable invariant subspace of the Hamiltonian matrix by the matrix sign
/// function, then Newton-Kleinman refinement.
pub fn care_solve(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat) -> Result<RiccatiSolution> {
    let (nx, _) = check_problem(a, b, q, r, n)?;
    let ri = inverse(r, "R")?;
    let a_bar = a - b * &ri * n.transpose();
    let q_bar = symmetrize(&(q - n * &ri * n.transpose()));
    let g = symmetrize(&(b * &ri * b.transpose()));
    let ham = block(&[&[&a_bar, &-&g], &[&-&q_bar, &-a_bar.transpose()]], "Hamiltonian")?;

    let dim = 2 * nx;
    let mut z = ham;
    for _ in 0..SIGN_MAX_ITER {
        let zi = inverse(&z, "Hamiltonian iterate (imaginary-axis eigenvalue)")?;
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / dim as f64)
        } else {
            1.0
        };
        let next = (&z * c + zi / c) * 0.5;
        let change = max_abs(&(&next - &z)) / max_abs(&next).max(1.0);
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    let eye = RMat::identity(nx, nx);
    let z11 = z.view((0, 0), (nx, nx)).into_owned();
    let z12 = z.view((0, nx), (nx, nx)).into_owned();
    let z21 = z.view((nx, 0), (nx, nx)).into_owned();
    let z22 = z.view((nx, nx), (nx, nx)).into_owned();
    let lhs = block(&[&[&z12], &[&(z22 + &eye)]], "sign lhs")?;
    let rhs = -block(&[&[&(z11 + &eye)], &[&z21]], "sign rhs")?;
    let x = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Synthesis(format!("stable subspace solve failed: {e}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Synthesis("no stabilizing solution".into()));
    }
    let x = symmetrize(&x);
    let gain = &ri * (b.transpose() * &x + n.transpose());
    if !(spectral_abscissa(&(a - b * &gain))? < 0.0) {
        return Err(Error::Synthesis("no stabilizing solution".into()));
    }
    let refined = newton_from_gain(a, b, q, r, n, gain, 3)?;
    finish(a, b, q, r, n, refined)
}

/// Newton-Kleinman iteration started from a stabilizing gain. Each step
/// solves the Lyapunov equation of the current closed loop.
fn newton_from_gain(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat, mut k: RMat, max_iter: usize) -> Result<RMat> {
    let ri = inverse(r, "R")?;
    let mut x_prev: Option<RMat> = None;
    for _ in 0..max_iter {
        let acl = a - b * &k;
        let w = q - n * &k - k.transpose() * n.transpose() + k.transpose() * r * &k;
        let x = lyap_solve(&acl.transpose(), &w)
            .map_err(|e| Error::Synthesis(format!("Newton step lost stability: {e}")))?
            .p;
        k = &ri * (b.transpose() * &x + n.transpose());
        if let Some(prev) = &x_prev {
            if max_abs(&(&x - prev)) <= 1e-14 * max_abs(&x).max(1.0) {
                return Ok(x);
            }
        }
        x_prev = Some(x);
    }
    x_prev.ok_or_else(|| Error::Synthesis("Newton iteration did not run".into()))
}

/// Bass stabilizing gain `K = B^T Y^-1` with
/// `(A + beta I) Y + Y (A + beta I)^T = 2 B B^T`, `beta` above the spectral radius.
pub fn bass_gain(a: &RMat, b: &RMat) -> Result<RMat> {
    let nx = check_square(a, "Bass A")?;
    let radius = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let beta = 1.0 + radius;
    let shifted = -(a + RMat::identity(nx, nx) * beta);
    let y = lyap_solve(&shifted, &(b * b.transpose() * 2.0))?.p;
    let yi = y
        .try_inverse()
        .ok_or_else(|| Error::Synthesis("(A, B) is not controllable; Bass gain undefined".into()))?;
    Ok(b.transpose() * yi)
}

/// Pure Newton-Kleinman solve from the Bass gain.
pub fn care_newton(a: &RMat, b: &RMat, q: &RMat, r: &RMat, n: &RMat) -> Result<RiccatiSolution> {
    check_problem(a, b, q, r, n)?;
    let k0 = bass_gain(a, b)?;
    let x = newton_from_gain(a, b, q, r, n, k0, NEWTON_MAX_ITER)?;
    finish(a, b, q, r, n, x)
}

/// Classical controller `dxh = AK xh dt + BK dy`, `beta_u = CK xh`, and its
/// closed-loop cost.
#[derive(Clone, Debug)]
pub struct MeasurementDesign {
    pub regulator: RiccatiSolution,
    pub filter: RiccatiSolution,
    /// State-feedback gain `K`, `beta_u = -K xh`.
    pub k: RMat,
    /// Filter gain `L`.
    pub l: RMat,
    pub ak: RMat,
    pub bk: RMat,
    pub ck: RMat,
    pub closed_loop: ClosedLoop,
    pub j: f64,
    pub abscissa: f64,
}

/// Kalman filter on the measured rows of `y`, regulator for `z = x + beta_u`
/// (`Q = I`, `R = I`, `N = I`). Process noise is `[B, B1, B2]` (the control
/// field's vacuum enters through `B`), measurement noise `D21[rows]` on
/// `B_in1`, all unit intensity.
pub fn design_measurement_lqg(plant: &QuadPlant, rows: &[usize]) -> Result<MeasurementDesign> {
    plant.validate()?;
    if rows.is_empty() {
        return Err(Error::Validation("no measured rows".into()));
    }
    let ny = plant.c2.nrows();
    if let Some(bad) = rows.iter().find(|&&r| r >= ny) {
        return Err(Error::Validation(format!(
            "measured row {bad} out of range (y has {ny} rows)"
        )));
    }
    let nx = plant.n_states();
    let nu = plant.b.ncols();
    if plant.c1.shape() != (nx, nx) || plant.d.shape() != (nx, nu) {
        return Err(Error::dim(
            "performance output",
            "z = x + D beta_u",
            format!("C1 {:?}", plant.c1.shape()),
        ));
    }
    let a = &plant.a;
    let b = &plant.b;
    let cy = plant.c2.select_rows(rows);
    let dy = plant.d21.select_rows(rows);
    let n1 = plant.b1.ncols();
    let n2 = plant.b2.ncols();

    let wn = block(&[&[b, &plant.b1, &plant.b2]], "process noise")?;
    let vn = block(
        &[&[&RMat::zeros(rows.len(), nu), &dy, &RMat::zeros(rows.len(), n2)]],
        "measurement noise",
    )?;
    let qe = &wn * wn.transpose();
    let re = &vn * vn.transpose();
    let se = &wn * vn.transpose();
    let filter = care_solve(&a.transpose(), &cy.transpose(), &qe, &re, &se)?;
    let re_inv = inverse(&re, "measurement noise covariance")?;
    let l = (&filter.x * cy.transpose() + &se) * re_inv;

    // z = C1 x + D beta_u  =>  Q = C1^T C1, R = D^T D, N = C1^T D.
    let q = plant.c1.transpose() * &plant.c1;
    let r = plant.d.transpose() * &plant.d;
    let n = plant.c1.transpose() * &plant.d;
    let regulator = care_solve(a, b, &q, &r, &n)?;
    let k = regulator.gain.clone();

    let ak = a - b * &k - &l * &cy;
    let bk = l.clone();
    let ck = -&k;
    let closed_loop = ClosedLoop {
        a: block(&[&[a, &(b * &ck)], &[&(&l * &cy), &ak]], "measurement A_cl")?,
        b: RMat::zeros(2 * nx, 0),
        g: block(&[&[&wn], &[&(&l * &vn)]], "measurement G_cl")?,
        c: block(&[&[&plant.c1, &(&plant.d * &ck)]], "measurement C_cl")?,
        h: RMat::zeros(plant.c1.nrows(), nu + n1 + n2),
        d12: plant.d12.clone(),
    };
    let eval = lqg_evaluate(&closed_loop)?;
    Ok(MeasurementDesign {
        regulator,
        filter,
        k,
        l,
        ak,
        bk,
        ck,
        closed_loop,
        j: eval.j,
        abscissa: eval.abscissa,
    })
}

/// `J(theta3)` over a grid with the other plant parameters fixed; failed
/// designs are recorded as infinite cost.
#[derive(Clone, Debug)]
pub struct Theta3Scan {
    pub rows: Vec<(f64, f64)>,
    pub argmin: usize,
}

pub fn scan_theta3(base: &Example2Params, grid: &[f64], measured: &[usize]) -> Result<Theta3Scan> {
    if grid.is_empty() {
        return Err(Error::Validation("empty theta3 grid".into()));
    }
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t3| {
            let p = Example2Params { theta3: t3, ..*base };
            let j = example2_plant(&p)
                .and_then(|plant| design_measurement_lqg(&plant, measured))
                .map(|d| d.j)
                .unwrap_or(f64::INFINITY);
            (t3, j)
        })
        .collect();
    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(Theta3Scan { rows, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> RMat {
        RMat::from_element(1, 1, x)
    }

    #[test]
    fn scalar_closed_forms() {
        let x = care_solve(&s(-1.0), &s(1.0), &s(1.0), &s(1.0), &s(0.0)).unwrap();
        assert!((x.x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-13);
        let x = care_solve(&s(0.0), &s(1.0), &s(1.0), &s(1.0), &s(0.0)).unwrap();
        assert!((x.x[(0, 0)] - 1.0).abs() < 1e-13);
        let a = diag2(-1.0, -3.0);
        let x = care_solve(
            &a,
            &RMat::identity(2, 2),
            &RMat::zeros(2, 2),
            &RMat::identity(2, 2),
            &RMat::zeros(2, 2),
        )
        .unwrap();
        assert!(max_abs(&x.x) < 1e-13);
    }

    #[test]
    fn rejects_bad_weights() {
        let r = care_solve(&s(0.0), &s(1.0), &s(1.0), &s(-1.0), &s(0.0));
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn unstabilizable_pair_fails() {
        let r = care_solve(
            &diag2(1.0, -1.0),
            &RMat::from_column_slice(2, 1, &[0.0, 1.0]),
            &RMat::identity(2, 2),
            &s(1.0),
            &RMat::zeros(2, 1),
        );
        assert!(matches!(r, Err(Error::Synthesis(_))));
    }

    #[test]
    fn regulator_at_zero_phase() {
        let p = example2_plant(&Example2Params::default()).unwrap();
        let eye = RMat::identity(2, 2);
        let x = care_solve(&p.a, &p.b, &eye, &eye, &eye).unwrap();
        assert!(max_abs(&(&x.x - &eye * 10.0)) < 1e-9);
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng) -> (RMat, RMat, RMat, RMat, RMat) {
        let nx = rng.gen_range(1..=4);
        let nu = rng.gen_range(1..=nx);
        let a = RMat::from_fn(nx, nx, |_, _| rng.gen_range(-2.0..2.0));
        let b = RMat::from_fn(nx, nu, |_, _| rng.gen_range(-1.0..1.0));
        let g = RMat::from_fn(nu, nu, |_, _| rng.gen_range(-1.0..1.0));
        let r = &g * g.transpose() + RMat::identity(nu, nu) * 0.5;
        let n = RMat::from_fn(nx, nu, |_, _| rng.gen_range(-0.5..0.5));
        let c = RMat::from_fn(nx, nx, |_, _| rng.gen_range(-1.0..1.0));
        let q = c.transpose() * &c + &n * r.clone().try_inverse().unwrap() * n.transpose();
        (a, b, q, r, n)
    }

    #[test]
    fn subspace_and_newton_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 100 {
            let (a, b, q, r, n) = random_instance(&mut rng);
            let Ok(x1) = care_solve(&a, &b, &q, &r, &n) else {
                continue;
            };
            let x2 = care_newton(&a, &b, &q, &r, &n).unwrap();
            let scale = max_abs(&x1.x).max(1.0);
            assert!(max_abs(&(&x1.x - &x2.x)) / scale < 1e-7);
            assert!(x1.residual <= 1e-8 * scale);
            assert!(x1.closed_loop_abscissa < 0.0);
            checked += 1;
        }
    }

    #[test]
    fn case_table() {
        let cases = [
            ((0.0, 0.0, 0.0), 4.8468),
            ((0.0, -0.5294, -0.5498), 4.0551),
            ((0.52, 0.0, 0.0), 3.7544),
            ((0.04, -0.49, -0.1), 3.7388),
        ];
        for ((t1, t2, t3), want) in cases {
            let p = example2_plant(&Example2Params::with_phases(t1, t2, t3)).unwrap();
            let d = design_measurement_lqg(&p, &[0]).unwrap();
            assert!((d.j - want).abs() < 0.05, "{t1} {t2} {t3}: {} vs {want}", d.j);
        }
    }

    #[test]
    fn full_measurement_is_rotation_invariant() {
        let mut js = Vec::new();
        for k in -4..=4 {
            let p = example2_plant(&Example2Params::with_phases(0.2, -0.3, 0.35 * k as f64)).unwrap();
            js.push(design_measurement_lqg(&p, &[0, 1]).unwrap().j);
        }
        for j in &js {
            assert!((j - js[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn scan_finds_zero_phase() {
        let grid: Vec<f64> = (-12..=12).map(|k| k as f64 * 0.125).collect();
        let scan = scan_theta3(&Example2Params::default(), &grid, &[0]).unwrap();
        assert_eq!(scan.rows[scan.argmin].0, 0.0);
        let one = scan_theta3(&Example2Params::default(), &[0.3], &[0]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.argmin, 0);
        assert!(scan_theta3(&Example2Params::default(), &[], &[0]).is_err());
    }
}
