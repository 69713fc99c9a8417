//! Controller parametrization and two-stage synthesis: a seeded real-coded
//! genetic search followed by bounded Nelder-Mead refinement.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};
use crate::lqg::{lqg_evaluate, LqgEvaluation};
use crate::netgen::{
    make_direct_coupling, spectral_abscissa, CoherentDesign, DirectCoupling, PlantModel, QuadController, QuadPlant,
    SqueezerSet,
};
use crate::qsys::{check_realizability, OpenSystem, QuadRealization};

/// Length without and with the six phase angles.
pub const LEN_BASE: usize = 23;
pub const LEN_PHASES: usize = 29;

/// Offsets into the vector. Complex entries are stored as (re, im) pairs.
pub mod layout {
    pub const C_MINUS: usize = 0;
    pub const C_PLUS: usize = 6;
    pub const OMEGA_MINUS: usize = 12;
    pub const OMEGA_PLUS: usize = 13;
    pub const B12: usize = 15;
    pub const SQUEEZE: usize = 19;
    pub const THETA: usize = 23;
}

/// Flat real parameters: `C_-` and `C_+` (3 complex each), `Omega_-`,
/// `Omega_+` (complex), `B12` row-major, `(r_u, r_y, r_vK1, r_vK2)` and
/// optionally `theta1..theta6`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignVector {
    pub values: Vec<f64>,
}

impl DesignVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != LEN_BASE && values.len() != LEN_PHASES {
            return Err(Error::dim(
                "design vector",
                format!("{LEN_BASE} or {LEN_PHASES} entries"),
                values.len().to_string(),
            ));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("design vector has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(phases: bool) -> Self {
        Self {
            values: vec![0.0; if phases { LEN_PHASES } else { LEN_BASE }],
        }
    }

    pub fn has_phases(&self) -> bool {
        self.values.len() == LEN_PHASES
    }

    pub fn from_parts(sys: &OpenSystem, b12: &RMat, r: [f64; 4], phases: Option<[f64; 6]>) -> Result<Self> {
        if sys.n_modes() != 1 || sys.n_channels() != 3 {
            return Err(Error::dim(
                "design controller",
                "1 mode, 3 channels",
                format!("{}x{}", sys.n_channels(), sys.n_modes()),
            ));
        }
        if b12.shape() != (2, 2) {
            return Err(Error::dim("design B12", "2x2", format!("{:?}", b12.shape())));
        }
        let mut v = Self::zeros(phases.is_some());
        for i in 0..3 {
            v.values[layout::C_MINUS + 2 * i] = sys.c_minus[(i, 0)].re;
            v.values[layout::C_MINUS + 2 * i + 1] = sys.c_minus[(i, 0)].im;
            v.values[layout::C_PLUS + 2 * i] = sys.c_plus[(i, 0)].re;
            v.values[layout::C_PLUS + 2 * i + 1] = sys.c_plus[(i, 0)].im;
        }
        v.values[layout::OMEGA_MINUS] = sys.omega_minus[(0, 0)].re;
        v.values[layout::OMEGA_PLUS] = sys.omega_plus[(0, 0)].re;
        v.values[layout::OMEGA_PLUS + 1] = sys.omega_plus[(0, 0)].im;
        for (k, x) in b12.transpose().iter().enumerate() {
            v.values[layout::B12 + k] = *x;
        }
        v.values[layout::SQUEEZE..layout::SQUEEZE + 4].copy_from_slice(&r);
        if let Some(t) = phases {
            v.values[layout::THETA..].copy_from_slice(&t);
        }
        Ok(v)
    }

    pub fn open_system(&self) -> Result<OpenSystem> {
        let v = &self.values;
        let c = |k: usize| Complex64::new(v[k], v[k + 1]);
        OpenSystem::new(
            CMat::from_fn(3, 1, |i, _| c(layout::C_MINUS + 2 * i)),
            CMat::from_fn(3, 1, |i, _| c(layout::C_PLUS + 2 * i)),
            CMat::from_element(1, 1, Complex64::new(v[layout::OMEGA_MINUS], 0.0)),
            CMat::from_element(1, 1, c(layout::OMEGA_PLUS)),
        )
    }

    pub fn b12(&self) -> RMat {
        RMat::from_row_slice(2, 2, &self.values[layout::B12..layout::B12 + 4])
    }

    pub fn squeeze(&self) -> [f64; 4] {
        let mut r = [0.0; 4];
        r.copy_from_slice(&self.values[layout::SQUEEZE..layout::SQUEEZE + 4]);
        r
    }

    /// `theta1..theta6`, zero when the vector carries no phases.
    pub fn phases(&self) -> [f64; 6] {
        let mut t = [0.0; 6];
        if self.has_phases() {
            t.copy_from_slice(&self.values[layout::THETA..]);
        }
        t
    }

    /// The same design with all phases present (zero if absent).
    pub fn with_phase_slots(&self) -> Self {
        let mut values = self.values.clone();
        values.resize(LEN_PHASES, 0.0);
        Self { values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    /// Couplings and Hamiltonian in `[-500, 500]`, `B12` in `[-2e5, 2e5]`,
    /// squeeze strengths in `[-10, 10]`, phases in `[-pi, pi]`.
    pub fn default_for(phases: bool) -> Self {
        let mut hi = vec![500.0; LEN_BASE];
        for x in &mut hi[layout::B12..layout::B12 + 4] {
            *x = 2e5;
        }
        for x in &mut hi[layout::SQUEEZE..layout::SQUEEZE + 4] {
            *x = 10.0;
        }
        if phases {
            hi.extend([PI; 6]);
        }
        let lo = hi.iter().map(|x| -x).collect();
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || (self.lo.len() != LEN_BASE && self.lo.len() != LEN_PHASES) {
            return Err(Error::Config(format!(
                "bounds need {LEN_BASE} or {LEN_PHASES} entries on both sides"
            )));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("every lower bound must be below its upper bound".into()));
        }
        Ok(())
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.lo.len()
            && v.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn clamp(&self, v: &mut [f64]) {
        for (x, (l, h)) in v.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }
}

/// A decoded design vector.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub open_system: OpenSystem,
    pub realization: QuadRealization,
    pub design: CoherentDesign,
    pub phases: [f64; 6],
}

/// Builds the plant (re-phased if the vector carries phases), the realizable
/// controller, the coupling and the squeezers.
pub fn decode(v: &DesignVector, model: &PlantModel) -> Result<Decoded> {
    let sys = v.open_system()?;
    let phases = v.phases();
    let plant: QuadPlant = if v.has_phases() {
        model.with_phases([phases[0], phases[1], phases[2]])?
    } else {
        model.plant()?
    };
    let (controller, realization) = QuadController::from_open_system(&sys, phases[3], phases[4], phases[5])?;
    let coupling: DirectCoupling = make_direct_coupling(&v.b12())?;
    Ok(Decoded {
        open_system: sys,
        realization,
        design: CoherentDesign {
            plant,
            controller,
            squeezers: SqueezerSet::from_r(v.squeeze()),
            coupling,
        },
        phases,
    })
}

/// Realizability residuals of the decoded controller.
pub fn decoded_realizability(d: &Decoded) -> (f64, f64) {
    check_realizability(&d.realization)
}

/// Cost of a non-Hurwitz candidate: `base + weight * max(0, abscissa)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub base: f64,
    pub weight: f64,
}

impl Default for Penalty {
    fn default() -> Self {
        Self { base: 1e6, weight: 1e3 }
    }
}

impl Penalty {
    pub fn is_penalized(&self, value: f64) -> bool {
        !(value < self.base)
    }
}

/// Full evaluation of a candidate; errors for non-Hurwitz loops.
pub fn evaluate(v: &DesignVector, model: &PlantModel) -> Result<(Decoded, LqgEvaluation)> {
    let d = decode(v, model)?;
    let eval = lqg_evaluate(&d.design.closed_loop()?)?;
    Ok((d, eval))
}

/// `J` if the loop is Hurwitz, otherwise the penalty.
pub fn objective(v: &DesignVector, model: &PlantModel, penalty: &Penalty) -> f64 {
    let loop_a = decode(v, model).and_then(|d| d.design.closed_loop());
    let cl = match loop_a {
        Ok(cl) => cl,
        Err(_) => return penalty.base * 10.0,
    };
    match spectral_abscissa(&cl.a) {
        Ok(ab) if ab < 0.0 => match lqg_evaluate(&cl) {
            Ok(e) if e.j.is_finite() => e.j,
            _ => penalty.base,
        },
        Ok(ab) => penalty.base + penalty.weight * ab.max(0.0),
        Err(_) => penalty.base * 10.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-coordinate mutation probability.
    pub mutation_rate: f64,
    /// Standard deviation of the multiplicative log-normal mutation.
    pub mutation_scale: f64,
    /// Standard deviation of the additive mutation.
    pub mutation_shift: f64,
    pub crossover_rate: f64,
    /// BLX extension: mixing weights are drawn from `[-alpha, 1 + alpha]`.
    pub crossover_alpha: f64,
    pub tournament: usize,
    pub elitism: usize,
    pub seed: u64,
    pub penalty: Penalty,
    /// Relative size of the initial simplex.
    pub local_step: f64,
    /// Stop when the spread of simplex values falls below this.
    pub local_ftol: f64,
    /// Stop restarting when the best point moves less than this.
    pub local_xtol: f64,
    pub local_max_iter: u64,
    pub local_restarts: usize,
    pub phases: bool,
    pub bounds: Option<Bounds>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 200,
            mutation_rate: 0.1,
            mutation_scale: 0.5,
            mutation_shift: 0.01,
            crossover_rate: 1.0,
            crossover_alpha: 0.25,
            tournament: 2,
            elitism: 1,
            seed: 1,
            penalty: Penalty::default(),
            local_step: 0.05,
            local_ftol: 1e-12,
            local_xtol: 1e-10,
            local_max_iter: 4000,
            local_restarts: 5,
            phases: false,
            bounds: None,
        }
    }
}

impl OptimizerConfig {
    pub fn bounds(&self) -> Bounds {
        self.bounds.clone().unwrap_or_else(|| Bounds::default_for(self.phases))
    }

    pub fn dimension(&self) -> usize {
        if self.phases {
            LEN_PHASES
        } else {
            LEN_BASE
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.population == 0 {
            return bad("population");
        }
        if self.tournament == 0 {
            return bad("tournament size");
        }
        if !(self.mutation_scale > 0.0) || !(self.mutation_shift >= 0.0) || !(self.local_step > 0.0) {
            return bad("mutation and simplex scales");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        if !(self.crossover_alpha >= 0.0) {
            return Err(Error::Config("crossover alpha must be non-negative".into()));
        }
        if self.elitism > self.population {
            return Err(Error::Config("elitism exceeds population".into()));
        }
        if !(self.penalty.base > 0.0) || !(self.penalty.weight >= 0.0) {
            return bad("penalty base");
        }
        if !(self.local_ftol > 0.0) || !(self.local_xtol > 0.0) {
            return bad("local tolerances");
        }
        let b = self.bounds();
        b.validate()?;
        if b.len() != self.dimension() {
            return Err(Error::Config(format!(
                "bounds have {} entries, design has {}",
                b.len(),
                self.dimension()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best: f64,
    pub feasible: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: DesignVector,
    pub objective: f64,
    pub trace: Vec<GenerationStat>,
}

fn sample_coordinate(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // Sign-symmetric, log-uniform magnitude from 1e-3 up to the bound;
    // uniform for narrow or one-sided ranges.
    let top = hi.abs().max(lo.abs());
    if lo < 0.0 && hi > 0.0 && top > 1e-2 && top > 4.0 {
        let mag = 10f64.powf(rng.gen_range(-3.0..top.log10()));
        let x = if rng.gen_bool(0.5) { mag } else { -mag };
        x.clamp(lo, hi)
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn evaluate_all(pop: &[Vec<f64>], model: &PlantModel, penalty: &Penalty) -> Vec<f64> {
    pop.par_iter()
        .map(|v| objective(&DesignVector { values: v.clone() }, model, penalty))
        .collect()
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [Vec<f64>], f: &[f64], size: usize) -> &'a [f64] {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let i = rng.gen_range(0..pop.len());
        if f[i] < f[best] {
            best = i;
        }
    }
    &pop[best]
}

fn argmin(f: &[f64]) -> usize {
    f.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Real-coded GA: tournament selection, BLX crossover, log-normal plus
/// additive mutation, elitism. The random stream is drawn sequentially;
/// only objective evaluations run in parallel, so results depend on the
/// seed alone. `starts` are placed into the initial population.
pub fn stage1_global(model: &PlantModel, cfg: &OptimizerConfig, starts: &[DesignVector]) -> Result<SearchResult> {
    cfg.validate()?;
    let bounds = cfg.bounds();
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = Normal::new(0.0, cfg.mutation_scale).map_err(|e| Error::Config(e.to_string()))?;
    let shift =
        Normal::new(0.0, cfg.mutation_shift.max(f64::MIN_POSITIVE)).map_err(|e| Error::Config(e.to_string()))?;

    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
    for s in starts.iter().take(cfg.population) {
        if s.values.len() != dim {
            return Err(Error::dim("start vector", dim.to_string(), s.values.len().to_string()));
        }
        let mut v = s.values.clone();
        bounds.clamp(&mut v);
        pop.push(v);
    }
    while pop.len() < cfg.population {
        pop.push(
            (0..dim)
                .map(|i| sample_coordinate(&mut rng, bounds.lo[i], bounds.hi[i]))
                .collect(),
        );
    }
    let mut f = evaluate_all(&pop, model, &cfg.penalty);
    let stat = |g: usize, f: &[f64]| GenerationStat {
        generation: g,
        best: f[argmin(f)],
        feasible: f.iter().filter(|x| !cfg.penalty.is_penalized(**x)).count(),
    };
    let mut trace = vec![stat(0, &f)];

    for g in 1..=cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
        let mut next: Vec<Vec<f64>> = order.iter().take(cfg.elitism).map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let a = tournament(&mut rng, &pop, &f, cfg.tournament);
            let b = tournament(&mut rng, &pop, &f, cfg.tournament);
            let cross = rng.gen_bool(cfg.crossover_rate);
            let mut child: Vec<f64> = (0..dim)
                .map(|i| {
                    if cross {
                        let w = rng.gen_range(-cfg.crossover_alpha..=1.0 + cfg.crossover_alpha);
                        a[i] + w * (b[i] - a[i])
                    } else {
                        a[i]
                    }
                })
                .collect();
            for x in child.iter_mut() {
                if rng.gen_bool(cfg.mutation_rate) {
                    *x = *x * scale.sample(&mut rng).exp() + shift.sample(&mut rng);
                }
            }
            bounds.clamp(&mut child);
            next.push(child);
        }
        let elite = cfg.elitism.min(next.len());
        let mut fresh = evaluate_all(&next[elite..], model, &cfg.penalty);
        let mut nf: Vec<f64> = order.iter().take(elite).map(|&i| f[i]).collect();
        nf.append(&mut fresh);
        pop = next;
        f = nf;
        trace.push(stat(g, &f));
    }
    let i = argmin(&f);
    if cfg.penalty.is_penalized(f[i]) {
        return Err(Error::Infeasible(format!(
            "no Hurwitz candidate after {} generations (best penalty {:e})",
            cfg.generations, f[i]
        )));
    }
    Ok(SearchResult {
        best: DesignVector { values: pop[i].clone() },
        objective: f[i],
        trace,
    })
}

struct LocalProblem<'a> {
    model: &'a PlantModel,
    bounds: &'a Bounds,
    penalty: Penalty,
}

impl LocalProblem<'_> {
    fn project(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut q = p.to_vec();
        self.bounds.clamp(&mut q);
        let excess: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
        (q, excess)
    }
}

impl CostFunction for LocalProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (q, excess) = self.project(p);
        Ok(objective(&DesignVector { values: q }, self.model, &self.penalty) + excess)
    }
}

/// Bounded Nelder-Mead from `start`, restarted around the incumbent until
/// the best point stops moving. The result never has a larger objective
/// than the start.
pub fn stage2_local(model: &PlantModel, start: &DesignVector, cfg: &OptimizerConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let bounds = cfg.bounds();
    if start.values.len() != bounds.len() {
        return Err(Error::dim(
            "local start",
            bounds.len().to_string(),
            start.values.len().to_string(),
        ));
    }
    let problem = LocalProblem {
        model,
        bounds: &bounds,
        penalty: cfg.penalty,
    };
    let mut best = problem.project(&start.values).0;
    let mut best_f = objective(&DesignVector { values: best.clone() }, model, &cfg.penalty);
    if cfg.penalty.is_penalized(best_f) {
        return Err(Error::Infeasible(format!(
            "local start is not Hurwitz (objective {best_f:e})"
        )));
    }
    let mut trace = vec![GenerationStat {
        generation: 0,
        best: best_f,
        feasible: 1,
    }];
    for round in 1..=cfg.local_restarts.max(1) {
        let mut simplex = vec![best.clone()];
        for i in 0..best.len() {
            let mut p = best.clone();
            let width = bounds.hi[i] - bounds.lo[i];
            let step = (cfg.local_step * best[i].abs()).max(1e-6 * width).max(1e-4);
            p[i] = if p[i] + step <= bounds.hi[i] {
                p[i] + step
            } else {
                p[i] - step
            };
            simplex.push(p);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(cfg.local_ftol)
            .map_err(|e| Error::Config(e.to_string()))?;
        let res = Executor::new(
            LocalProblem {
                model,
                bounds: &bounds,
                penalty: cfg.penalty,
            },
            solver,
        )
        .configure(|s| s.max_iters(cfg.local_max_iter))
        .run()
        .map_err(|e| Error::Numeric(format!("local search failed: {e}")))?;
        let Some(p) = res.state().get_best_param().cloned() else {
            break;
        };
        let (q, _) = problem.project(&p);
        let fq = objective(&DesignVector { values: q.clone() }, model, &cfg.penalty);
        let moved = q.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let improved = fq < best_f;
        if improved {
            best = q;
            best_f = fq;
        }
        trace.push(GenerationStat {
            generation: round,
            best: best_f,
            feasible: 1,
        });
        if !improved || moved < cfg.local_xtol {
            break;
        }
    }
    Ok(SearchResult {
        best: DesignVector { values: best },
        objective: best_f,
        trace,
    })
}

/// Both stages: global search, then local refinement of its best point.
pub fn optimize(
    model: &PlantModel,
    cfg: &OptimizerConfig,
    starts: &[DesignVector],
) -> Result<(SearchResult, SearchResult)> {
    let global = stage1_global(model, cfg, starts)?;
    let local = stage2_local(model, &global.best, cfg)?;
    Ok((global, local))
}

/// Outcome of [`synthesize`]. With phases enabled, `phase_free` holds the
/// nested run whose optimum seeded the phase search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Synthesis {
    pub global: SearchResult,
    pub local: SearchResult,
    pub phase_free: Option<Box<Synthesis>>,
}

impl Synthesis {
    pub fn best(&self) -> &DesignVector {
        &self.local.best
    }

    pub fn objective(&self) -> f64 {
        self.local.objective
    }
}

/// Two-stage synthesis. When phases are enabled the phase-free problem is
/// solved first with the same seed and its optimum, with all phases zero,
/// joins the initial population of the phase search, so the larger search
/// space never returns a worse design.
pub fn synthesize(model: &PlantModel, cfg: &OptimizerConfig) -> Result<Synthesis> {
    cfg.validate()?;
    if !cfg.phases {
        let (global, local) = optimize(model, cfg, &[])?;
        return Ok(Synthesis {
            global,
            local,
            phase_free: None,
        });
    }
    let bounds = cfg.bounds();
    let inner_cfg = OptimizerConfig {
        phases: false,
        bounds: Some(Bounds {
            lo: bounds.lo[..LEN_BASE].to_vec(),
            hi: bounds.hi[..LEN_BASE].to_vec(),
        }),
        ..cfg.clone()
    };
    let inner = synthesize(model, &inner_cfg)?;
    let lifted = inner.best().with_phase_slots();
    let (global, local) = optimize(model, cfg, &[lifted])?;
    Ok(Synthesis {
        global,
        local,
        phase_free: Some(Box::new(inner)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::netgen::Example2Params;

    fn model() -> PlantModel {
        PlantModel::Example2(Example2Params::default())
    }

    fn published() -> DesignVector {
        let c = |re, im| Complex64::new(re, im);
        let sys = OpenSystem::new(
            CMat::from_column_slice(3, 1, &[c(-0.0136, 0.0857), c(-0.0473, -0.3509), c(2.7099, 19.4445)]),
            CMat::from_column_slice(3, 1, &[c(0.0136, 0.0857), c(0.0286, -0.2251), c(0.0763, -0.3437)]),
            CMat::from_element(1, 1, c(0.9768, 0.0)),
            CMat::from_element(1, 1, c(-2.4874, -0.3771)),
        )
        .unwrap();
        let b12 = RMat::from_row_slice(2, 2, &[151.1269, 0.0621, 1.3904, 123.8024]);
        let r = [230.3001f64.ln(), 1.1253f64.ln(), 0.0972f64.ln(), 0.5163f64.ln()];
        DesignVector::from_parts(&sys, &b12, r, None).unwrap()
    }

    #[test]
    fn zero_vector_decodes_to_trivial_parts() {
        let d = decode(&DesignVector::zeros(false), &model()).unwrap();
        assert_eq!(max_abs(&d.design.controller.ak), 0.0);
        assert_eq!(max_abs(&d.design.controller.ck), 0.0);
        assert_eq!(max_abs(&d.design.coupling.b12), 0.0);
        assert_eq!(d.design.squeezers, SqueezerSet::identity());
        let j = objective(&DesignVector::zeros(false), &model(), &Penalty::default());
        assert_eq!(j, Penalty::default().base);
    }

    #[test]
    fn published_vector_decodes_to_printed_controller() {
        let d = decode(&published(), &model()).unwrap();
        let k = &d.design.controller;
        let close = |m: &RMat, v: [f64; 4], tol: f64| max_abs(&(m - RMat::from_row_slice(2, 2, &v))) < tol;
        assert!(close(&k.ak, [-193.0685, 3.4642, 1.5106, -192.3144], 5e-3));
        assert!(close(&k.bk, [-2.6336, -19.7882, 19.1008, -2.7862], 5e-3));
        assert!(close(&k.bk1, [0.0272, 0.0, 0.1715, 0.0], 5e-4));
        assert!(close(&k.bk2, [0.0759, 0.1258, -0.5760, 0.0187], 5e-4));
        assert!(close(&k.ck, [0.0, 0.0, 0.1715, -0.0272], 5e-4));
        assert!(close(&k.dk, [1.0, 0.0, 0.0, 1.0], 1e-15));
        let j = objective(&published(), &model(), &Penalty::default());
        assert!((j - 2.0004).abs() < 0.01);
    }

    #[test]
    fn layout_round_trip() {
        let v = published();
        let back = DesignVector::from_parts(&v.open_system().unwrap(), &v.b12(), v.squeeze(), None).unwrap();
        assert_eq!(back, v);
        let p = v.with_phase_slots();
        assert!(p.has_phases() && p.phases() == [0.0; 6]);
        assert_eq!(
            objective(&p, &model(), &Penalty::default()),
            objective(&v, &model(), &Penalty::default())
        );
        assert!(DesignVector::new(vec![0.0; 5]).is_err());
    }

    #[test]
    fn random_vectors_decode_realizably() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = Bounds::default_for(true);
        for _ in 0..100 {
            let v: Vec<f64> = (0..LEN_PHASES)
                .map(|i| sample_coordinate(&mut rng, b.lo[i], b.hi[i]))
                .collect();
            let d = decode(&DesignVector { values: v }, &model()).unwrap();
            let (r1, r2) = decoded_realizability(&d);
            assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
        }
    }

    #[test]
    fn bounds_contain_published_optima() {
        assert!(Bounds::default_for(false).contains(&published().values));
        let b = Bounds::default_for(true);
        assert!(b.hi[layout::B12] >= 1.3774e5);
        assert!(b.hi[layout::SQUEEZE] >= 9235.8f64.ln());
    }

    #[test]
    fn trivial_search_returns_start() {
        let cfg = OptimizerConfig {
            population: 1,
            generations: 0,
            ..Default::default()
        };
        let r = stage1_global(&model(), &cfg, &[published()]).unwrap();
        assert_eq!(r.best, published());
    }

    #[test]
    fn short_search_is_deterministic() {
        let cfg = OptimizerConfig {
            population: 24,
            generations: 6,
            seed: 5,
            ..Default::default()
        };
        let a = stage1_global(&model(), &cfg, &[]);
        let b = stage1_global(&model(), &cfg, &[]);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a.best, b.best);
                assert_eq!(a.objective.to_bits(), b.objective.to_bits());
            }
            (Err(_), Err(_)) => {}
            _ => panic!("nondeterministic outcome"),
        }
    }

    #[test]
    fn local_search_near_published_optimum() {
        let cfg = OptimizerConfig {
            local_max_iter: 600,
            local_restarts: 1,
            ..Default::default()
        };
        let start = published();
        let f0 = objective(&start, &model(), &cfg.penalty);
        let r = stage2_local(&model(), &start, &cfg).unwrap();
        assert!(r.objective <= f0);
        assert!(f0 - r.objective < 1e-3);
    }

    #[test]
    fn local_search_rejects_infeasible_start() {
        let r = stage2_local(&model(), &DesignVector::zeros(false), &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            population: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            phases: true,
            bounds: Some(Bounds::default_for(false)),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
