//! Degenerate parametric amplifiers in place of ideal squeezers: the
//! per-squeezer model, the 12-state loop, the h-independent certificate
//! matrix and h sweeps.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{block, check_shape, diag2, to_complex, CMat, RMat};
use crate::lqg::lqg_evaluate;
use crate::netgen::{assemble, spectral_abscissa, ClosedLoop, CoherentDesign, SqueezerSet};

/// `A_u = -1/2 diag((kappa - eps)/h, (kappa + eps)/h)`,
/// `B_u = C_u = -sqrt(kappa/h) I`, `D_u = -I`.
#[derive(Clone, Debug, PartialEq)]
pub struct DpaRealization {
    pub kappa: f64,
    pub eps: f64,
    pub h: f64,
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
    pub d: RMat,
}

impl DpaRealization {
    pub fn new(kappa: f64, eps: f64, h: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(h > 0.0) {
            return Err(Error::Domain(format!(
                "DPA needs kappa > 0 and h > 0, got kappa={kappa}, h={h}"
            )));
        }
        if !(eps.abs() < kappa) {
            return Err(Error::Domain(format!(
                "DPA needs |eps| < kappa, got eps={eps}, kappa={kappa}"
            )));
        }
        let g = -(kappa / h).sqrt();
        Ok(Self {
            kappa,
            eps,
            h,
            a: diag2(-0.5 * (kappa - eps) / h, -0.5 * (kappa + eps) / h),
            b: RMat::identity(2, 2) * g,
            c: RMat::identity(2, 2) * g,
            d: -RMat::identity(2, 2),
        })
    }

    /// Squeeze strength of the `h -> 0` limit.
    pub fn r(&self) -> f64 {
        ((self.kappa + self.eps) / (self.kappa - self.eps)).ln()
    }
}

/// DPA whose limit is the squeezer of strength `r`: `eps = kappa tanh(r/2)`.
pub fn dpa_for_squeezer(r: f64, kappa: f64, h: f64) -> Result<DpaRealization> {
    DpaRealization::new(kappa, kappa * (r / 2.0).tanh(), h)
}

fn resolvent_transfer(a: &RMat, b: &RMat, c: &RMat, d: &RMat, omega: f64) -> Result<CMat> {
    let n = a.nrows();
    let res = CMat::identity(n, n) * Complex64::new(0.0, omega) - to_complex(a);
    let inv = res
        .try_inverse()
        .ok_or_else(|| Error::Numeric(format!("i*{omega} is an eigenvalue of A_u")))?;
    Ok(to_complex(d) + to_complex(c) * inv * to_complex(b))
}

/// `G(i omega) = D_u + C_u (i omega I - A_u)^-1 B_u` of the model above.
/// Its DC gain is `diag((kappa + eps)/(kappa - eps), (kappa - eps)/(kappa + eps))`.
pub fn dpa_transfer(d: &DpaRealization, omega: f64) -> Result<CMat> {
    resolvent_transfer(&d.a, &d.b, &d.c, &d.d, omega)
}

/// Transfer of the bare amplifier, output `sqrt(kappa/h) x + B_in`. Its limit
/// is the squeezer rotated by pi.
pub fn raw_dpa_transfer(d: &DpaRealization, omega: f64) -> Result<CMat> {
    resolvent_transfer(&d.a, &d.b, &-&d.c, &-&d.d, omega)
}

/// Per-DPA decay rates for `(u, y, v_K1, v_K2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpaKappas(pub [f64; 4]);

impl Default for DpaKappas {
    fn default() -> Self {
        Self([1.0; 4])
    }
}

#[derive(Clone, Debug)]
pub struct DpaSet {
    pub u: DpaRealization,
    pub y: DpaRealization,
    pub vk1: DpaRealization,
    pub vk2: DpaRealization,
}

impl DpaSet {
    pub fn for_squeezers(sq: &SqueezerSet, kappas: &DpaKappas, h: f64) -> Result<Self> {
        let [ku, ky, k1, k2] = kappas.0;
        Ok(Self {
            u: dpa_for_squeezer(sq.u.r, ku, h)?,
            y: dpa_for_squeezer(sq.y.r, ky, h)?,
            vk1: dpa_for_squeezer(sq.vk1.r, k1, h)?,
            vk2: dpa_for_squeezer(sq.vk2.r, k2, h)?,
        })
    }
}

/// The loop with every squeezer replaced by its DPA. States are ordered
/// `(x, xi, x_vk1, x_vk2, x_yo, x_u)`; `b` carries `B_in2` and `g` the
/// columns `(B_in1, v_K1, v_K2)`. The performance output is the plant state
/// plus the signal part `D CK xi` of the controller output.
pub fn extended_closed_loop(design: &CoherentDesign, dpas: &DpaSet) -> Result<ClosedLoop> {
    let p = &design.plant;
    let k = &design.controller;
    let dc = &design.coupling;
    p.validate()?;
    k.validate()?;
    let np = p.n_states();
    let nk = k.n_states();
    check_shape(&p.d22, 2, 2, "plant D22")?;
    if p.d22.iter().any(|&x| x != 0.0) {
        return Err(Error::Validation("the DPA loop requires D22 = 0".into()));
    }
    check_shape(&dc.b12, np, nk, "B12")?;
    check_shape(&dc.b21, nk, np, "B21")?;
    let (u, y, v1, v2) = (&dpas.u, &dpas.y, &dpas.vk1, &dpas.vk2);
    let z = |r: usize, c: usize| RMat::zeros(r, c);

    let row_x = [
        p.a.clone(),
        &p.b * &u.d * &k.ck + &dc.b12,
        &p.b * &u.d * &k.dk * &v1.c,
        z(np, 2),
        z(np, 2),
        &p.b * &u.c,
    ];
    let row_xi = [
        &k.bk * &y.d * &p.c2 + &dc.b21,
        k.ak.clone(),
        &k.bk1 * &v1.c,
        &k.bk2 * &v2.c,
        &k.bk * &y.c,
        z(nk, 2),
    ];
    let row_v1 = [z(2, np), z(2, nk), v1.a.clone(), z(2, 2), z(2, 2), z(2, 2)];
    let row_v2 = [z(2, np), z(2, nk), z(2, 2), v2.a.clone(), z(2, 2), z(2, 2)];
    let row_y = [&y.b * &p.c2, z(2, nk), z(2, 2), z(2, 2), y.a.clone(), z(2, 2)];
    let row_u = [
        z(2, np),
        &u.b * &k.ck,
        &u.b * &k.dk * &v1.c,
        z(2, 2),
        z(2, 2),
        u.a.clone(),
    ];
    let rows = [&row_x, &row_xi, &row_v1, &row_v2, &row_y, &row_u];
    let a_rows: Vec<Vec<&RMat>> = rows.iter().map(|r| r.iter().collect()).collect();
    let a_refs: Vec<&[&RMat]> = a_rows.iter().map(|r| r.as_slice()).collect();
    let a = block(&a_refs, "extended A_cl")?;

    // Noise columns (B_in1, v_K1, v_K2); B_in2 is kept separately.
    let g_x = [p.b1.clone(), &p.b * &u.d * &k.dk * &v1.d, z(np, 2)];
    let g_xi = [&k.bk * &y.d * &p.d21, &k.bk1 * &v1.d, &k.bk2 * &v2.d];
    let g_v1 = [z(2, 2), v1.b.clone(), z(2, 2)];
    let g_v2 = [z(2, 2), z(2, 2), v2.b.clone()];
    let g_y = [&y.b * &p.d21, z(2, 2), z(2, 2)];
    let g_u = [z(2, 2), &u.b * &k.dk * &v1.d, z(2, 2)];
    let g_all = [&g_x, &g_xi, &g_v1, &g_v2, &g_y, &g_u];
    let g_rows: Vec<Vec<&RMat>> = g_all.iter().map(|r| r.iter().collect()).collect();
    let g_refs: Vec<&[&RMat]> = g_rows.iter().map(|r| r.as_slice()).collect();
    let g = block(&g_refs, "extended G_cl")?;

    let b = block(
        &[
            &[&p.b2],
            &[&z(nk, 2)],
            &[&z(2, 2)],
            &[&z(2, 2)],
            &[&z(2, 2)],
            &[&z(2, 2)],
        ],
        "extended B_cl",
    )?;
    let nz = p.c1.nrows();
    let c = block(
        &[&[&p.c1, &(&p.d * &k.ck), &z(nz, 2), &z(nz, 2), &z(nz, 2), &z(nz, 2)]],
        "extended C_cl",
    )?;
    Ok(ClosedLoop {
        a,
        b,
        g,
        c,
        h: z(nz, 6),
        d12: p.d12.clone(),
    })
}

/// Certificate matrix and the largest eigenvalue of its symmetric part.
#[derive(Clone, Debug)]
pub struct UpsilonCertificate {
    pub upsilon: RMat,
    pub lambda_max_sym: f64,
    /// Largest entry difference between the matrix built at `h = 1` and at
    /// `h = 0.01`.
    pub h_deviation: f64,
}

impl UpsilonCertificate {
    pub fn holds(&self) -> bool {
        self.lambda_max_sym < 0.0
    }
}

/// `[[A1, A1 A3 A4^-1 / sqrt h], [sqrt h A2, A2 A3 A4^-1]]` with `A1` the
/// ideal-squeezer loop, `A2 = [[By C2, 0], [0, Bu CK]]`,
/// `A3 = [[0, B Cu], [BK Cy, 0]]`, `A4 = diag(Ay, Au)`.
pub fn upsilon_at(design: &CoherentDesign, kappas: &DpaKappas, h: f64) -> Result<RMat> {
    let a1 = assemble(&design.plant, &design.controller, &design.squeezers, &design.coupling)?.a;
    let dp = DpaSet::for_squeezers(&design.squeezers, kappas, h)?;
    let p = &design.plant;
    let k = &design.controller;
    let (np, nk) = (p.n_states(), k.n_states());
    let a2 = block(
        &[
            &[&(&dp.y.b * &p.c2), &RMat::zeros(2, nk)],
            &[&RMat::zeros(2, np), &(&dp.u.b * &k.ck)],
        ],
        "A2",
    )?;
    let a3 = block(
        &[
            &[&RMat::zeros(np, 2), &(&p.b * &dp.u.c)],
            &[&(&k.bk * &dp.y.c), &RMat::zeros(nk, 2)],
        ],
        "A3",
    )?;
    let a4 = block(&[&[&dp.y.a, &RMat::zeros(2, 2)], &[&RMat::zeros(2, 2), &dp.u.a]], "A4")?;
    let a4i = a4
        .try_inverse()
        .ok_or_else(|| Error::Numeric("A4 is singular".into()))?;
    let sh = h.sqrt();
    let upper_right = &a1 * &a3 * &a4i / sh;
    let lower_left = &a2 * sh;
    let lower_right = &a2 * &a3 * &a4i;
    block(&[&[&a1, &upper_right], &[&lower_left, &lower_right]], "Upsilon")
}

pub fn upsilon_certificate(design: &CoherentDesign, kappas: &DpaKappas) -> Result<UpsilonCertificate> {
    let ideal = design.closed_loop()?;
    let ab = spectral_abscissa(&ideal.a)?;
    if !(ab < 0.0) {
        return Err(Error::NotHurwitz(ab));
    }
    let upsilon = upsilon_at(design, kappas, 1.0)?;
    let other = upsilon_at(design, kappas, 0.01)?;
    let h_deviation = crate::linalg::max_abs(&(&upsilon - &other));
    let sym = &upsilon + upsilon.transpose();
    let lambda_max_sym = sym.symmetric_eigenvalues().max();
    Ok(UpsilonCertificate {
        upsilon,
        lambda_max_sym,
        h_deviation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub h: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "spectral_abscissa")]
    pub abscissa: f64,
}

/// `J(h)` of the DPA loop. Non-Hurwitz or failed points get infinite cost.
pub fn h_sweep(design: &CoherentDesign, kappas: &DpaKappas, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(bad) = grid.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::Domain(format!("h must be positive, got {bad}")));
    }
    Ok(grid
        .par_iter()
        .map(|&h| {
            let cl = DpaSet::for_squeezers(&design.squeezers, kappas, h).and_then(|d| extended_closed_loop(design, &d));
            match cl {
                Ok(cl) => {
                    let abscissa = spectral_abscissa(&cl.a).unwrap_or(f64::NAN);
                    let j = lqg_evaluate(&cl).map(|e| e.j).unwrap_or(f64::INFINITY);
                    SweepRow { h, j, abscissa }
                }
                Err(_) => SweepRow {
                    h,
                    j: f64::INFINITY,
                    abscissa: f64::NAN,
                },
            }
        })
        .collect())
}

/// `points` values from `h_max` down to `h_min`, evenly spaced in log scale.
pub fn geometric_grid(h_min: f64, h_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(h_min > 0.0) || !(h_max >= h_min) || points == 0 {
        return Err(Error::Domain(format!(
            "bad grid: h_min={h_min}, h_max={h_max}, points={points}"
        )));
    }
    if points == 1 {
        return Ok(vec![h_max]);
    }
    let (lo, hi) = (h_min.log10(), h_max.log10());
    Ok((0..points)
        .map(|i| 10f64.powf(hi + (lo - hi) * i as f64 / (points - 1) as f64))
        .collect())
}

/// Deviation of a transfer from a real diagonal target.
pub fn transfer_deviation(g: &CMat, target: &RMat) -> f64 {
    crate::linalg::cnorm2(&(g - to_complex(target)))
}
