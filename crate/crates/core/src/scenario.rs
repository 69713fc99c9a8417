//! Scenario files: JSON descriptions of a plant, a controller, squeezers,
//! coupling and the analyses to run on them.
//!
//! Real matrices are row-major nested arrays. Complex entries are `[re, im]`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};
use crate::netgen::{
    make_direct_coupling, CoherentDesign, DirectCoupling, Example2Params, PlantModel, QuadController, QuadPlant,
    SqueezerSet,
};
use crate::optim::{decode, DesignVector, OptimizerConfig};
use crate::qsys::{OpenSystem, QuadRealization, Squeezer};

pub type RealMatrix = Vec<Vec<f64>>;
pub type ComplexMatrix = Vec<Vec<[f64; 2]>>;

pub fn real_matrix(rows: &RealMatrix, field: &str) -> Result<RMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 {
        return Err(Error::Config(format!("{field}: empty matrix")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nc) {
        return Err(Error::Config(format!(
            "{field}: row {i} has {} entries, expected {nc}",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{field}: non-finite entry")));
    }
    Ok(RMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn complex_matrix(rows: &ComplexMatrix, field: &str) -> Result<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 {
        return Err(Error::Config(format!("{field}: empty matrix")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nc) {
        return Err(Error::Config(format!(
            "{field}: row {i} has {} entries, expected {nc}",
            r.len()
        )));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn to_real_rows(m: &RMat) -> RealMatrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn to_complex_rows(m: &CMat) -> ComplexMatrix {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn default_delta() -> f64 {
    0.1
}

fn default_kappa() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// The single-cavity plant with three fields.
    Example2 {
        #[serde(default)]
        theta1: f64,
        #[serde(default)]
        theta2: f64,
        #[serde(default)]
        theta3: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_kappa")]
        kappa1: f64,
        #[serde(default = "default_kappa")]
        kappa2: f64,
        #[serde(default = "default_kappa")]
        kappa3: f64,
    },
    Explicit {
        a: RealMatrix,
        b: RealMatrix,
        b1: RealMatrix,
        b2: RealMatrix,
        c1: RealMatrix,
        d: RealMatrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d12: Option<RealMatrix>,
        d21: RealMatrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d22: Option<RealMatrix>,
        c2: RealMatrix,
        #[serde(default)]
        phases: [f64; 3],
    },
}

impl PlantSpec {
    pub fn model(&self) -> Result<PlantModel> {
        match self {
            PlantSpec::Example2 {
                theta1,
                theta2,
                theta3,
                delta,
                kappa1,
                kappa2,
                kappa3,
            } => Ok(PlantModel::Example2(Example2Params {
                theta1: *theta1,
                theta2: *theta2,
                theta3: *theta3,
                delta: *delta,
                kappa1: *kappa1,
                kappa2: *kappa2,
                kappa3: *kappa3,
            })),
            PlantSpec::Explicit {
                a,
                b,
                b1,
                b2,
                c1,
                d,
                d12,
                d21,
                d22,
                c2,
                phases,
            } => {
                let b1m = real_matrix(b1, "plant.b1")?;
                let bm = real_matrix(b, "plant.b")?;
                let c1m = real_matrix(c1, "plant.c1")?;
                let c2m = real_matrix(c2, "plant.c2")?;
                let d12m = match d12 {
                    Some(m) => real_matrix(m, "plant.d12")?,
                    None => RMat::zeros(c1m.nrows(), b1m.ncols()),
                };
                let d22m = match d22 {
                    Some(m) => real_matrix(m, "plant.d22")?,
                    None => RMat::zeros(c2m.nrows(), bm.ncols()),
                };
                let plant = QuadPlant {
                    a: real_matrix(a, "plant.a")?,
                    b: bm,
                    b1: b1m,
                    b2: real_matrix(b2, "plant.b2")?,
                    c1: c1m,
                    d: real_matrix(d, "plant.d")?,
                    d12: d12m,
                    d21: real_matrix(d21, "plant.d21")?,
                    d22: d22m,
                    c2: c2m,
                    phases: *phases,
                };
                plant.validate()?;
                Ok(PlantModel::Explicit(plant))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// One mode, channels ordered `(v_K1 / u_o, v_K2, y_o)`.
    OpenSystem {
        c_minus: ComplexMatrix,
        c_plus: ComplexMatrix,
        omega_minus: ComplexMatrix,
        omega_plus: ComplexMatrix,
        #[serde(default)]
        theta4: f64,
        #[serde(default)]
        theta5: f64,
        #[serde(default)]
        theta6: f64,
    },
    Matrices {
        ak: RealMatrix,
        bk: RealMatrix,
        bk1: RealMatrix,
        bk2: RealMatrix,
        ck: RealMatrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dk: Option<RealMatrix>,
    },
    /// A flat design vector; it also fixes coupling, squeezers and, when
    /// it has 29 entries, the phases.
    DesignVector { values: Vec<f64> },
}

impl ControllerSpec {
    pub fn open_system(&self) -> Result<Option<OpenSystem>> {
        match self {
            ControllerSpec::OpenSystem {
                c_minus,
                c_plus,
                omega_minus,
                omega_plus,
                ..
            } => Ok(Some(OpenSystem::new(
                complex_matrix(c_minus, "controller.c_minus")?,
                complex_matrix(c_plus, "controller.c_plus")?,
                complex_matrix(omega_minus, "controller.omega_minus")?,
                complex_matrix(omega_plus, "controller.omega_plus")?,
            )?)),
            ControllerSpec::DesignVector { values } => Ok(Some(DesignVector::new(values.clone())?.open_system()?)),
            ControllerSpec::Matrices { .. } => Ok(None),
        }
    }
}

/// A squeezer given by its strength or by the first entry of its printed
/// quadrature diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SqueezerSpec {
    R { r: f64 },
    Diagonal { diagonal: f64 },
}

impl Default for SqueezerSpec {
    fn default() -> Self {
        SqueezerSpec::R { r: 0.0 }
    }
}

impl SqueezerSpec {
    pub fn squeezer(&self) -> Result<Squeezer> {
        match *self {
            SqueezerSpec::R { r } if r.is_finite() => Ok(Squeezer::from_r(r)),
            SqueezerSpec::R { r } => Err(Error::Config(format!("squeezer strength {r} is not finite"))),
            SqueezerSpec::Diagonal { diagonal } => Squeezer::from_diagonal(diagonal),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqueezerSpecs {
    pub u: SqueezerSpec,
    pub y: SqueezerSpec,
    pub vk1: SqueezerSpec,
    pub vk2: SqueezerSpec,
}

impl SqueezerSpecs {
    pub fn set(&self) -> Result<SqueezerSet> {
        Ok(SqueezerSet {
            u: self.u.squeezer()?,
            y: self.y.squeezer()?,
            vk1: self.vk1.squeezer()?,
            vk2: self.vk2.squeezer()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub b12: RealMatrix,
}

fn unit_kappas() -> [f64; 4] {
    [1.0; 4]
}

fn default_h_min() -> f64 {
    1e-5
}

fn default_h_max() -> f64 {
    1.0
}

fn default_points() -> usize {
    11
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpaSpec {
    /// Decay rates of the amplifiers replacing `(S_u, S_y, S_vK1, S_vK2)`.
    #[serde(default = "unit_kappas")]
    pub kappas: [f64; 4],
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    #[serde(default = "default_h_max")]
    pub h_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for DpaSpec {
    fn default() -> Self {
        Self {
            kappas: unit_kappas(),
            h_min: default_h_min(),
            h_max: default_h_max(),
            points: default_points(),
        }
    }
}

fn first_row() -> Vec<usize> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    #[serde(default = "first_row")]
    pub measured_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta3_grid: Option<Vec<f64>>,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            measured_rows: first_row(),
            theta3_grid: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Eval,
    DpaSweep,
    Certificate,
    Optimize,
    Baseline,
}

/// A published or expected cost with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub j: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeezers: Option<SqueezerSpecs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpa: Option<DpaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub analysis: Vec<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

/// A scenario's controller in both forms, when a full realization exists.
#[derive(Clone, Debug)]
pub struct ResolvedController {
    pub controller: QuadController,
    pub realization: Option<QuadRealization>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("scenario file is empty".into()));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn plant_model(&self) -> Result<PlantModel> {
        self.plant.model()
    }

    fn design_vector(&self) -> Result<Option<DesignVector>> {
        match &self.controller {
            Some(ControllerSpec::DesignVector { values }) => {
                if self.squeezers.is_some() || self.coupling.is_some() {
                    return Err(Error::Config(
                        "a design_vector controller fixes squeezers and coupling; remove those fields".into(),
                    ));
                }
                Ok(Some(DesignVector::new(values.clone())?))
            }
            _ => Ok(None),
        }
    }

    pub fn resolve_controller(&self) -> Result<Option<ResolvedController>> {
        let Some(spec) = &self.controller else {
            return Ok(None);
        };
        match spec {
            ControllerSpec::OpenSystem {
                theta4, theta5, theta6, ..
            } => {
                let sys = spec.open_system()?.expect("open system controller");
                let (controller, q) = QuadController::from_open_system(&sys, *theta4, *theta5, *theta6)?;
                Ok(Some(ResolvedController {
                    controller,
                    realization: Some(q),
                }))
            }
            ControllerSpec::DesignVector { .. } => {
                let v = self.design_vector()?.expect("design vector controller");
                let d = decode(&v, &self.plant_model()?)?;
                Ok(Some(ResolvedController {
                    controller: d.design.controller,
                    realization: Some(d.realization),
                }))
            }
            ControllerSpec::Matrices {
                ak,
                bk,
                bk1,
                bk2,
                ck,
                dk,
            } => {
                let controller = QuadController {
                    ak: real_matrix(ak, "controller.ak")?,
                    bk: real_matrix(bk, "controller.bk")?,
                    bk1: real_matrix(bk1, "controller.bk1")?,
                    bk2: real_matrix(bk2, "controller.bk2")?,
                    ck: real_matrix(ck, "controller.ck")?,
                    dk: match dk {
                        Some(m) => real_matrix(m, "controller.dk")?,
                        None => RMat::identity(2, 2),
                    },
                    phases: [0.0; 3],
                };
                controller.validate()?;
                Ok(Some(ResolvedController {
                    controller,
                    realization: None,
                }))
            }
        }
    }

    /// The plant as it enters the loop (re-phased by a 29-entry design vector).
    pub fn plant(&self) -> Result<QuadPlant> {
        match self.design_vector()? {
            Some(v) => Ok(decode(&v, &self.plant_model()?)?.design.plant),
            None => self.plant_model()?.plant(),
        }
    }

    pub fn design(&self) -> Result<CoherentDesign> {
        if let Some(v) = self.design_vector()? {
            return Ok(decode(&v, &self.plant_model()?)?.design);
        }
        let plant = self.plant()?;
        let ctrl = self
            .resolve_controller()?
            .ok_or_else(|| Error::Config(format!("scenario '{}' has no controller", self.name)))?
            .controller;
        let squeezers = self.squeezers.unwrap_or_default().set()?;
        let coupling = match &self.coupling {
            Some(c) => make_direct_coupling(&real_matrix(&c.b12, "coupling.b12")?)?,
            None => DirectCoupling::zero(plant.n_states()),
        };
        Ok(CoherentDesign {
            plant,
            controller: ctrl,
            squeezers,
            coupling,
        })
    }

    pub fn dpa_spec(&self) -> DpaSpec {
        self.dpa.clone().unwrap_or_default()
    }

    pub fn baseline_spec(&self) -> BaselineSpec {
        self.baseline.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn every_fixture_round_trips() {
        for name in fixtures::NAMES {
            let text = fixtures::get(name).unwrap();
            let s = Scenario::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&s.name, name);
            let again = Scenario::from_json(&s.to_json().unwrap()).unwrap();
            assert_eq!(again, s);
        }
    }

    #[test]
    fn full_precision_survives() {
        let mut s = Scenario::from_json(fixtures::get("sec4.3").unwrap()).unwrap();
        s.squeezers = Some(SqueezerSpecs {
            u: SqueezerSpec::R { r: 0.1 + 0.2 },
            ..Default::default()
        });
        let again = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(again.squeezers.unwrap().u, SqueezerSpec::R { r: 0.1 + 0.2 });
    }

    #[test]
    fn diagnostics_name_the_problem() {
        assert!(matches!(Scenario::from_json(""), Err(Error::Config(_))));
        let err = Scenario::from_json("{\n \"name\": \"x\",\n \"plant\": {\"kind\": \"nope\"}\n}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let err = Scenario::from_json(r#"{"name": "x", "plant": {"kind": "example2"}, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn ragged_matrix_is_reported() {
        let err = real_matrix(&vec![vec![1.0, 2.0], vec![3.0]], "controller.ak").unwrap_err();
        assert!(err.to_string().contains("controller.ak"));
    }

    #[test]
    fn design_vector_excludes_other_parts() {
        let text = r#"{"name": "x", "plant": {"kind": "example2"},
            "controller": {"kind": "design_vector", "values": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]},
            "coupling": {"b12": [[0, 0], [0, 0]]}}"#;
        let s = Scenario::from_json(text).unwrap();
        assert!(matches!(s.design(), Err(Error::Config(_))));
    }
}
