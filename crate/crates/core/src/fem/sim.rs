//! Load program, equilibrium iterations and homogenised responses.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::anderson::Anderson;
use super::cholesky::Factor;
use super::damage::{crack_band_width, equivalent_strain, principal, solve_damage};
use super::element::N_GAUSS;
use super::material::PhaseMaterials;
use super::model::{build_model, QuadModel};
use super::oracle::IterativeSystem;
use super::profile::{surface_eigenstrain, ShrinkageProfile, N_STEPS, SNAPSHOT_STRIDE};
use super::FemError;
use crate::grid::Grid;
use crate::microgen::{Microstructure, PhaseGrid};
use crate::scenario::Scenario;

const ANDERSON_DEPTH: usize = 8;
/// Iterations without halving the residual before the operator is refreshed.
const STALL_WINDOW: usize = 12;
const DIVERGENCE_FACTOR: f64 = 10.0;
const REFRESH_INTERVAL: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    /// Sparse Cholesky, reused while the secant stiffness is unchanged.
    Cholesky,
    /// Independently assembled system solved by Jacobi-preconditioned CG.
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub materials: PhaseMaterials,
    /// Overrides the scenario's default profile.
    pub profile: Option<ShrinkageProfile>,
    /// Depth of the beam core represented by trusses (NonUniform), mm.
    pub core_depth_mm: f64,
    /// Relative equilibrium residual accepted at the end of a step.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Times an increment may be halved after failing to converge.
    pub max_bisections: usize,
    pub solver: SolverKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            materials: PhaseMaterials::default(),
            profile: None,
            core_depth_mm: 18.0,
            residual_tol: 1e-6,
            max_iterations: 300,
            max_bisections: 4,
            solver: SolverKind::Cholesky,
        }
    }
}

impl SimConfig {
    pub fn profile_for(&self, scenario: Scenario) -> ShrinkageProfile {
        self.profile.clone().unwrap_or(match scenario {
            Scenario::Uniform => ShrinkageProfile::Uniform,
            Scenario::NonUniform => ShrinkageProfile::depth_decay(),
        })
    }
}

/// History variables: `κ` and `ω` per Gauss point, crack band per element.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementState {
    pub kappa: Vec<f64>,
    pub omega: Vec<f64>,
    /// Fixed when an element first exceeds its onset strain, m.
    pub band: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    /// Load level in (possibly fractional) steps.
    pub step: f64,
    pub u: Vec<f64>,
    pub history: ElementState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub iterations: usize,
    pub bisections: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub t: usize,
    /// Element-averaged damage, row-major on the pixel raster.
    pub omega: Grid<f64>,
    pub eps_imposed_surface: f64,
    pub eps_observed: f64,
    pub k: f64,
    pub omega_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: Scenario,
    pub snapshots: Vec<SimSnapshot>,
    pub log: Vec<StepLog>,
    pub wall_time_s: f64,
}

/// Normalisation of the total damage ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DamageNormalization {
    /// Mean over every pixel.
    #[default]
    AllPixels,
    /// Mean over mortar and ITZ pixels only.
    ShrinkingPhases,
}

pub fn total_damage(omega: &Grid<f64>, phase: &PhaseGrid, norm: DamageNormalization) -> f64 {
    match norm {
        DamageNormalization::AllPixels => omega.data().iter().sum::<f64>() / omega.len() as f64,
        DamageNormalization::ShrinkingPhases => {
            let (mut sum, mut n) = (0.0, 0usize);
            for (w, p) in omega.data().iter().zip(phase.codes.data()) {
                if p.shrinks() {
                    sum += w;
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        }
    }
}

enum Preconditioner {
    None,
    Direct(Factor),
    Iterative(IterativeSystem),
}

pub struct Simulator<'m> {
    pub model: &'m QuadModel,
    pub config: SimConfig,
    profile: ShrinkageProfile,
    precond: Preconditioner,
    /// Moduli the current preconditioner was built from.
    precond_scale: Vec<f64>,
    /// Secant operators factorised (or assembled, for the iterative route) so far.
    pub factorizations: usize,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m QuadModel, config: SimConfig) -> Self {
        let profile = config.profile_for(model.scenario);
        Self {
            model,
            config,
            profile,
            precond: Preconditioner::None,
            precond_scale: Vec::new(),
            factorizations: 0,
        }
    }

    pub fn initial_state(&self) -> SimState {
        let n_gp = N_GAUSS * self.model.n_elements();
        SimState {
            step: 0.0,
            u: vec![0.0; self.model.n_free()],
            history: ElementState {
                kappa: vec![0.0; n_gp],
                omega: vec![0.0; n_gp],
                band: vec![None; self.model.n_elements()],
            },
        }
    }

    /// Element eigenstrains at load level `step` (zero in non-shrinking phases).
    pub fn eigenstrains(&self, step: f64) -> Vec<f64> {
        let m = self.model;
        (0..m.n_elements())
            .map(|e| {
                if m.materials.get(m.phases[e]).shrinks {
                    self.profile.eigenstrain(step, m.depth_mm[e])
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn scale(&self, omega: &[f64]) -> Vec<f64> {
        let m = self.model;
        (0..omega.len())
            .map(|i| (1.0 - omega[i]) * m.materials.get(m.phases[i / N_GAUSS]).e)
            .collect()
    }

    /// Makes the preconditioner the exact secant operator for `scale`.
    fn refresh(&mut self, scale: &[f64]) -> Result<(), FemError> {
        if !matches!(self.precond, Preconditioner::None) && self.precond_scale == scale {
            return Ok(());
        }
        let core = self.model.core_stiffness();
        self.precond = match self.config.solver {
            SolverKind::Cholesky => {
                let values = self.model.assemble(scale, core);
                Preconditioner::Direct(self.model.factor(&values)?)
            }
            SolverKind::ConjugateGradient => {
                Preconditioner::Iterative(IterativeSystem::assemble(self.model, scale, core))
            }
        };
        self.factorizations += 1;
        self.precond_scale = scale.to_vec();
        Ok(())
    }

    /// Applies the inverse of the current secant operator in place.
    fn apply(&self, rhs: &mut [f64]) -> Result<(), FemError> {
        match &self.precond {
            Preconditioner::Direct(llt) => llt.solve_in_place(rhs),
            Preconditioner::Iterative(sys) => {
                let x = sys.solve(rhs)?;
                rhs.copy_from_slice(&x);
            }
            Preconditioner::None => unreachable!("preconditioner used before refresh"),
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(FemError::SingularSystem);
        }
        Ok(())
    }

    /// Solves `K(scale) x = rhs` in place.
    fn solve(&mut self, scale: &[f64], rhs: &mut [f64]) -> Result<(), FemError> {
        self.refresh(scale)?;
        self.apply(rhs)
    }

    fn rhs(&self, scale: &[f64], eps: &[f64], step: f64) -> Vec<f64> {
        match self.config.solver {
            SolverKind::Cholesky => {
                self.model
                    .eigen_force(scale, eps, self.model.core_eigen_force(&self.profile, step))
            }
            SolverKind::ConjugateGradient => {
                IterativeSystem::eigen_force(self.model, scale, eps, self.model.core_eigen_force(&self.profile, step))
            }
        }
    }

    /// Internal force residual of displacement `u` with moduli `scale`.
    fn residual(&self, u: &[f64], scale: &[f64], eps: &[f64], step: f64) -> Vec<f64> {
        let m = self.model;
        let mut r = vec![0.0; m.n_free()];
        for e in 0..m.n_elements() {
            let ue = m.local_u(e, u);
            let shrink = if m.materials.get(m.phases[e]).shrinks {
                eps[e]
            } else {
                0.0
            };
            let mut fe = [0.0; 8];
            for q in 0..N_GAUSS {
                let mut strain = m.unit.strain(q, &ue);
                strain[0] -= shrink;
                strain[1] -= shrink;
                let sigma = m.unit.stress(scale[N_GAUSS * e + q], strain);
                m.unit.add_internal_force(q, sigma, &mut fe);
            }
            m.scatter_vec(e, &fe, &mut r);
        }
        r[m.hxx] += m.core_stiffness() * u[m.hxx] - m.core_eigen_force(&self.profile, step);
        r
    }

    /// History update from a trial displacement, starting from committed `κ`.
    fn update_history(&self, committed: &ElementState, u: &[f64], eps: &[f64]) -> Result<ElementState, FemError> {
        let m = self.model;
        let mut next = committed.clone();
        for e in 0..m.n_elements() {
            let mat = m.materials.get(m.phases[e]);
            if !mat.softens() {
                continue;
            }
            let ue = m.local_u(e, u);
            let shrink = if mat.shrinks { eps[e] } else { 0.0 };
            let mut eq = [0.0; N_GAUSS];
            let mut sig = [[0.0; 3]; N_GAUSS];
            for q in 0..N_GAUSS {
                let mut strain = m.unit.strain(q, &ue);
                strain[0] -= shrink;
                strain[1] -= shrink;
                sig[q] = m.unit.stress(mat.e, strain);
                eq[q] = equivalent_strain(sig[q], mat.e);
            }
            let onset = mat.onset_strain();
            if next.band[e].is_none() {
                let (q, &top) = eq.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                if top > onset {
                    let (_, _, theta) = principal(sig[q]);
                    next.band[e] = Some(crack_band_width(m.pitch, theta));
                }
            }
            for q in 0..N_GAUSS {
                let i = N_GAUSS * e + q;
                if eq[q] > next.kappa[i] {
                    next.kappa[i] = eq[q];
                    if let Some(h) = next.band[e] {
                        next.omega[i] = solve_damage(eq[q], mat, h)?.max(committed.omega[i]);
                    }
                }
            }
        }
        Ok(next)
    }

    /// Residual-driven secant iterations at a fixed load level.
    ///
    /// Corrections are `K_s⁻¹ R(u)` with `K_s` a secant operator that is only
    /// refactorised when progress stalls, and the corrections are Anderson
    /// mixed. The first iterate is the plain secant solve with the committed
    /// damage.
    ///
    /// A few points can switch between loading and unloading on every
    /// iteration and pin the residual. Once progress stalls, the trial
    /// history therefore becomes the base of the next update, so `κ` is a
    /// maximum over the remaining iterations as well and the set of loading
    /// points can only grow.
    fn equilibrate(&mut self, state: &SimState, target: f64) -> Result<(SimState, usize, f64), FemError> {
        let eps = self.eigenstrains(target);
        let committed_scale = self.scale(&state.history.omega);
        let mut u = state.u.clone();
        let mut mixer = Anderson::new(ANDERSON_DEPTH);
        let mut since_refresh = 0usize;
        let mut best = f64::INFINITY;
        let mut best_at = 0usize;
        let mut last_res = f64::INFINITY;
        let mut base = state.history.clone();
        let mut ratchet = false;
        for it in 1..=self.config.max_iterations {
            let history = self.update_history(&base, &u, &eps)?;
            let scale = self.scale(&history.omega);
            let f_ref = norm(&self.rhs(&scale, &eps, target));
            let mut r = self.residual(&u, &scale, &eps, target);
            let r_norm = norm(&r);
            last_res = if f_ref > 0.0 { r_norm / f_ref } else { r_norm };
            if r_norm <= self.config.residual_tol * f_ref || r_norm == 0.0 {
                return Ok((
                    SimState {
                        step: target,
                        u,
                        history,
                    },
                    it,
                    last_res,
                ));
            }
            if last_res < 0.5 * best {
                best = last_res;
                best_at = it;
            }
            let stalled = it - best_at >= STALL_WINDOW || last_res > DIVERGENCE_FACTOR * best;
            if it == 1 {
                self.refresh(&committed_scale)?;
            } else if stalled || since_refresh >= REFRESH_INTERVAL {
                ratchet |= stalled;
                self.refresh(&scale)?;
                mixer.reset();
                since_refresh = 0;
                best = last_res;
                best_at = it;
            }
            since_refresh += 1;
            if ratchet {
                base = history;
            }
            self.apply(&mut r)?;
            r.iter_mut().for_each(|v| *v = -*v);
            u = mixer.next(&u, &r);
        }
        log_nonconvergence(target, last_res);
        Err(FemError::StepNonConvergence {
            step: target.ceil() as usize,
        })
    }

    fn advance(
        &mut self,
        state: &SimState,
        target: f64,
        level: usize,
        log: &mut StepLog,
    ) -> Result<SimState, FemError> {
        match self.equilibrate(state, target) {
            Ok((s, it, res)) => {
                log.iterations += it;
                log.residual = res;
                Ok(s)
            }
            Err(FemError::StepNonConvergence { .. }) if level < self.config.max_bisections => {
                log.bisections = log.bisections.max(level + 1);
                let mid = 0.5 * (state.step + target);
                let half = self.advance(state, mid, level + 1, log)?;
                self.advance(&half, target, level + 1, log)
            }
            Err(e) => Err(e),
        }
    }

    /// Moves the state to load level `target` with automatic bisection.
    pub fn step(&mut self, state: &SimState, target: f64) -> Result<(SimState, StepLog), FemError> {
        let mut log = StepLog {
            step: target.round() as usize,
            iterations: 0,
            bisections: 0,
            residual: 0.0,
        };
        let s = self.advance(state, target, 0, &mut log).map_err(|e| match e {
            FemError::StepNonConvergence { .. } => FemError::StepNonConvergence { step: log.step },
            other => other,
        })?;
        Ok((s, log))
    }

    /// Axial secant modulus with damage frozen and transverse stress free.
    pub fn homogenized_stiffness(&mut self, state: &SimState) -> Result<f64, FemError> {
        let hxx = self.model.hxx;
        self.compliance_modulus(state, hxx)
    }

    /// Secant modulus along y of a fully periodic cell, defined like
    /// [`homogenized_stiffness`](Self::homogenized_stiffness).
    pub fn transverse_stiffness(&mut self, state: &SimState) -> Result<f64, FemError> {
        let hyy = self
            .model
            .hyy
            .ok_or_else(|| FemError::InvalidModel("no transverse strain control in this scenario".into()))?;
        self.compliance_modulus(state, hyy)
    }

    fn compliance_modulus(&mut self, state: &SimState, dof: usize) -> Result<f64, FemError> {
        let scale = self.scale(&state.history.omega);
        let mut z = vec![0.0; self.model.n_free()];
        z[dof] = 1.0;
        self.solve(&scale, &mut z)?;
        let compliance = z[dof];
        if !(compliance > 0.0) || !compliance.is_finite() {
            return Err(FemError::SingularSystem);
        }
        Ok(1.0 / (compliance * self.model.volume()))
    }

    pub fn observed_shrinkage(&self, state: &SimState) -> f64 {
        let m = self.model;
        match m.scenario {
            Scenario::Uniform => 0.5 * (state.u[m.hxx] + state.u[m.hyy.unwrap()]),
            Scenario::NonUniform => state.u[m.hxx],
        }
    }

    pub fn omega_field(&self, state: &SimState) -> Grid<f64> {
        let m = self.model;
        Grid::from_fn(m.height, m.width, |r, c| {
            let e = r * m.width + c;
            state.history.omega[N_GAUSS * e..N_GAUSS * e + N_GAUSS]
                .iter()
                .sum::<f64>()
                / N_GAUSS as f64
        })
    }

    pub fn snapshot(&mut self, state: &SimState, t: usize) -> Result<SimSnapshot, FemError> {
        let omega = self.omega_field(state);
        let phase = PhaseGrid {
            codes: Grid::from_vec(self.model.height, self.model.width, self.model.phases.clone()),
            pitch: self.model.pitch * 1e3,
        };
        let k = match self.homogenized_stiffness(state) {
            Ok(k) => k,
            Err(FemError::SingularSystem) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(SimSnapshot {
            t,
            omega_total: total_damage(&omega, &phase, DamageNormalization::AllPixels),
            omega,
            eps_imposed_surface: surface_eigenstrain(state.step),
            eps_observed: self.observed_shrinkage(state),
            k,
        })
    }
}

fn log_nonconvergence(target: f64, res: f64) {
    log::debug!("equilibrium iterations stalled at load {target:.4}, residual {res:.3e}");
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Full 100-step load program with snapshots every 10 steps.
pub fn run_model(model: &QuadModel, config: &SimConfig) -> Result<SimResult, FemError> {
    let start = Instant::now();
    let mut sim = Simulator::new(model, config.clone());
    let mut state = sim.initial_state();
    let mut snapshots = vec![sim.snapshot(&state, 0)?];
    let mut log = Vec::with_capacity(N_STEPS);
    for step in 1..=N_STEPS {
        let (next, entry) = sim.step(&state, step as f64)?;
        state = next;
        log.push(entry);
        if step % SNAPSHOT_STRIDE == 0 {
            snapshots.push(sim.snapshot(&state, step / SNAPSHOT_STRIDE)?);
        }
    }
    Ok(SimResult {
        scenario: model.scenario,
        snapshots,
        log,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run(micro: &Microstructure, config: &SimConfig) -> Result<SimResult, FemError> {
    if let Some(ShrinkageProfile::Table(t)) = &config.profile {
        t.check(micro.phase.height() as f64 * micro.phase.pitch, micro.phase.pitch)?;
    }
    let model = build_model(&micro.phase, micro.scenario, &config.materials, config.core_depth_mm)?;
    run_model(&model, config)
}

impl SimResult {
    pub fn omega_stack(&self) -> Vec<&Grid<f64>> {
        self.snapshots.iter().map(|s| &s.omega).collect()
    }

    pub fn total_damage_with(&self, phase: &PhaseGrid, norm: DamageNormalization) -> Vec<f64> {
        self.snapshots
            .iter()
            .map(|s| total_damage(&s.omega, phase, norm))
            .collect()
    }
}

#[cfg(test)]
mod props;
