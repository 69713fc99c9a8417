//! Lyapunov solver, steady-state LQG index and the vacuum bound.

use crate::error::{Error, Result};
use crate::linalg::{check_square, max_abs, symmetrize, RMat};
use crate::netgen::{spectral_abscissa, ClosedLoop};

/// Steady-state covariance `P` of `A P + P A^T + W = 0`.
#[derive(Clone, Debug)]
pub struct LyapunovSolution {
    pub p: RMat,
    /// Largest absolute entry of `A P + P A^T + W`.
    pub residual: f64,
}

/// Solves `A P + P A^T + W = 0` through the Kronecker sum
/// `(I (x) A + A (x) I) vec(P) = -vec(W)` (column-major vec).
pub fn lyap_solve(a: &RMat, w: &RMat) -> Result<LyapunovSolution> {
    let n = check_square(a, "Lyapunov A")?;
    if w.shape() != (n, n) {
        return Err(Error::dim("Lyapunov W", format!("{n}x{n}"), format!("{:?}", w.shape())));
    }
    let abscissa = spectral_abscissa(a)?;
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let w = symmetrize(w);
    let eye = RMat::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = nalgebra::DVector::from_iterator(n * n, w.iter().map(|x| -x));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Conditioning(format!("singular Kronecker system (abscissa {abscissa:e})")))?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Conditioning("non-finite Lyapunov solution".into()));
    }
    let p = symmetrize(&RMat::from_column_slice(n, n, sol.as_slice()));
    let residual = max_abs(&(a * &p + &p * a.transpose() + &w));
    Ok(LyapunovSolution { p, residual })
}

/// Everything computed on the way to `J`.
#[derive(Clone, Debug)]
pub struct LqgEvaluation {
    pub j: f64,
    pub abscissa: f64,
    pub lyapunov_residual: f64,
    pub covariance: RMat,
}

/// `J = Tr(C P C^T)` with `A P + P A^T + [B G][B G]^T = 0`.
pub fn lqg_evaluate(cl: &ClosedLoop) -> Result<LqgEvaluation> {
    let abscissa = spectral_abscissa(&cl.a)?;
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let noise = cl.noise();
    let sol = lyap_solve(&cl.a, &(&noise * noise.transpose()))?;
    let j = (&cl.c * &sol.p * cl.c.transpose()).trace();
    Ok(LqgEvaluation {
        j,
        abscissa,
        lyapunov_residual: sol.residual,
        covariance: sol.p,
    })
}

pub fn lqg_index(cl: &ClosedLoop) -> Result<f64> {
    lqg_evaluate(cl).map(|e| e.j)
}

/// `2 + c1 + c3` where `CK^T CK = [[c1, c2], [c2, c3]]`: the cost of a loop
/// whose plant and controller rest in the vacuum state.
pub fn vacuum_bound(ck: &RMat) -> Result<f64> {
    if ck.ncols() != 2 {
        return Err(Error::dim("vacuum bound CK", "2 columns", ck.ncols().to_string()));
    }
    let c = ck.transpose() * ck;
    Ok(2.0 + c[(0, 0)] + c[(1, 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag2;
    use crate::netgen::{assemble, example2_plant, DirectCoupling, Example2Params, QuadController, SqueezerSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `int_0^inf e^{At} W e^{A^T t} dt` by Simpson on a short interval
    /// followed by interval doubling, `P(2T) = P(T) + E P(T) E^T`.
    fn gramian(a: &RMat, w: &RMat) -> RMat {
        let n = a.nrows();
        let scale = a.norm().max(1e-3);
        let dt = 1.0 / (64.0 * scale);
        let steps = 8;
        let h = dt / steps as f64;
        let eh = (a * h).exp();
        let mut e = RMat::identity(n, n);
        let mut p = RMat::zeros(n, n);
        for k in 0..=steps {
            let wgt = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            p += &e * w * e.transpose() * (wgt * h / 3.0);
            e = &eh * e;
        }
        let mut big = (a * dt).exp();
        for _ in 0..80 {
            p = &p + &big * &p * big.transpose();
            big = &big * &big;
            if big.norm() < 1e-18 {
                break;
            }
        }
        p
    }

    fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> RMat {
        let g = RMat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let shift = crate::netgen::spectral_abscissa(&g).unwrap() + rng.gen_range(0.2..1.5);
        g - RMat::identity(n, n) * shift
    }

    #[test]
    fn closed_form_cases() {
        let s = lyap_solve(&-RMat::identity(3, 3), &(RMat::identity(3, 3) * 2.0)).unwrap();
        assert!(max_abs(&(s.p - RMat::identity(3, 3))) < 1e-14);
        let s = lyap_solve(&diag2(-1.0, -2.0), &diag2(2.0, 4.0)).unwrap();
        assert!(max_abs(&(s.p - RMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn rejects_unstable() {
        let a = RMat::from_row_slice(2, 2, &[0.0, 0.1, -0.1, 0.0]);
        assert!(matches!(
            lyap_solve(&a, &RMat::identity(2, 2)),
            Err(Error::NotHurwitz(_))
        ));
        assert!(matches!(
            lyap_solve(&RMat::identity(2, 2), &RMat::identity(2, 2)),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn agrees_with_integrated_gramian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..50 {
            let n = 1 + trial % 12;
            let a = random_hurwitz(&mut rng, n);
            let b = RMat::from_fn(n, 1 + trial % 3, |_, _| rng.gen_range(-1.0..1.0));
            let w = &b * b.transpose();
            let s = lyap_solve(&a, &w).unwrap();
            let g = gramian(&a, &w);
            let scale = 1.0f64.max(max_abs(&g));
            assert!(max_abs(&(&s.p - &g)) / scale < 1e-6, "trial {trial}");
            assert!(s.residual <= 1e-9 * 1.0f64.max(w.norm()));
            let ev = s.p.clone().symmetric_eigenvalues();
            assert!(ev.min() > -1e-10);
        }
    }

    #[test]
    fn invariant_under_symmetrizing_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hurwitz(&mut rng, 5);
        let w = RMat::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let p1 = lyap_solve(&a, &w).unwrap().p;
        let p2 = lyap_solve(&a, &((&w + w.transpose()) * 0.5)).unwrap().p;
        assert!(max_abs(&(p1 - p2)) < 1e-14);
    }

    #[test]
    fn vacuum_bound_examples() {
        assert_eq!(vacuum_bound(&RMat::zeros(2, 2)).unwrap(), 2.0);
        assert_eq!(vacuum_bound(&RMat::identity(2, 2)).unwrap(), 4.0);
        let ck = RMat::from_row_slice(2, 2, &[0.0, 0.0, 0.1715, -0.0272]);
        assert!((vacuum_bound(&ck).unwrap() - 2.03015).abs() < 1e-5);
    }

    fn first_ladder_loop() -> ClosedLoop {
        let p = example2_plant(&Example2Params::default()).unwrap();
        let m = |v: [f64; 4]| RMat::from_row_slice(2, 2, &v);
        let k = QuadController {
            ak: m([0.0251, -0.3787, 0.0665, -0.2121]),
            bk: m([1.0273, -0.1964, 0.8235, -0.0492]),
            bk1: m([0.1125, -0.5992, 0.1504, -0.1284]),
            bk2: m([0.6008e-10, -0.3049e-10, 0.1938e-10, -0.2273e-10]),
            ck: m([0.1284, -0.5993, 0.1506, -0.1126]),
            dk: RMat::identity(2, 2),
            phases: [0.0; 3],
        };
        assemble(&p, &k, &SqueezerSet::identity(), &DirectCoupling::zero(2)).unwrap()
    }

    #[test]
    fn rotation_of_a_vacuum_channel_leaves_cost() {
        let cl = first_ladder_loop();
        let j0 = lqg_index(&cl).unwrap();
        let rot = crate::linalg::rotation(0.83);
        for col in 0..3 {
            let mut g = cl.g.clone();
            let rotated = g.columns(2 * col, 2) * &rot;
            g.columns_mut(2 * col, 2).copy_from(&rotated);
            let j = lqg_index(&ClosedLoop { g, ..cl.clone() }).unwrap();
            assert!((j - j0).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_leaves_cost() {
        let cl = first_ladder_loop();
        let j0 = lqg_index(&cl).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let t = RMat::identity(4, 4) + RMat::from_fn(4, 4, |_, _| rng.gen_range(-0.4..0.4));
            let ti = t.clone().try_inverse().unwrap();
            let moved = ClosedLoop {
                a: &t * &cl.a * &ti,
                b: &t * &cl.b,
                g: &t * &cl.g,
                c: &cl.c * &ti,
                ..cl.clone()
            };
            assert!((lqg_index(&moved).unwrap() - j0).abs() < 1e-8);
        }
    }

    #[test]
    fn evaluation_reports_details() {
        let e = lqg_evaluate(&first_ladder_loop()).unwrap();
        assert!(e.abscissa < 0.0);
        assert!(e.lyapunov_residual < 1e-12);
        assert!((e.j - 4.1787).abs() < 0.02);
    }
}
