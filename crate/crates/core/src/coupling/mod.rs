//! Fixed-stress split driver.
//!
//! Each time step iterates: a flow solve with the total stress and plastic
//! porosity frozen at the previous iterate, then a mechanics solve with the
//! pressure frozen at the new flow iterate. From the second iterate on, the
//! flow solve is done in increment form (`K δx = δb`, with the same
//! factorization), and every iteration is recorded by the contraction monitor
//! in [`report`].

pub mod report;

use std::fmt;
use std::sync::Arc;

pub use report::{
    contraction_report, convergence_criterion, iteration_difference, ContractionReport, ConvergenceTolerances,
    IterationDifference, ReportContext,
};

use crate::error::{Error, Result};
use crate::flow::{
    accumulation_increment, assemble_flow_rhs, dirichlet_load, local_mass_residual, FlowOperator, FlowRhs,
    FlowSolution, StressHistory,
};
use crate::linsolve::norm2;
use crate::material::{Constants, GaussPointState, MaterialModel};
use crate::mech::{external_force, pressure_force, strain_field, stress_divergence, MechOperator, MechSolution, Tractions};
use crate::mesh::{DofMap, Geometry, HexMesh, Point, Side};
use crate::par::ExecPolicy;
use crate::tensor::{SymTensor2, Tensor4};

/// Boundary pressure `g(side, x, t)`; `None` where no data is prescribed.
pub type PressureFn = Arc<dyn Fn(Side, &Point, f64) -> Option<f64> + Send + Sync>;
/// Volumetric source `q(x, t)`, evaluated at cell centers.
pub type SourceFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PressureBc {
    /// Constant pressure per side, indexed by [`Side::index`].
    Constant([Option<f64>; 6]),
    Field(PressureFn),
}

impl PressureBc {
    fn value(&self, side: Side, x: &Point, t: f64) -> Option<f64> {
        match self {
            PressureBc::Constant(v) => v[side.index()],
            PressureBc::Field(f) => f(side, x, t),
        }
    }
}

impl fmt::Debug for PressureBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PressureBc::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            PressureBc::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Clone, Default)]
pub enum Source {
    #[default]
    None,
    Uniform(f64),
    PerCell(Vec<f64>),
    Field(SourceFn),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::None => f.write_str("None"),
            Source::Uniform(q) => f.debug_tuple("Uniform").field(q).finish(),
            Source::PerCell(v) => f.debug_tuple("PerCell").field(&v.len()).finish(),
            Source::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Loads and data of a run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub pressure: PressureBc,
    pub tractions: Tractions,
    pub source: Source,
    pub initial_pressure: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self { pressure: PressureBc::Constant([None; 6]), tractions: [None; 6], source: Source::None, initial_pressure: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingControls {
    pub convergence: ConvergenceTolerances,
    pub max_iterations: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Solve mechanics once with the initial pressure before the first step.
    pub equilibrate: bool,
}

impl Default for CouplingControls {
    fn default() -> Self {
        Self {
            convergence: ConvergenceTolerances::default(),
            max_iterations: 100,
            newton_tol: crate::mech::NEWTON_TOL,
            newton_max_iter: crate::mech::NEWTON_MAX_ITER,
            equilibrate: false,
        }
    }
}

/// One coupling iterate (or a converged time level).
#[derive(Clone, Debug, PartialEq)]
pub struct SplitState {
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// Committed history; `sigma` is the total stress.
    pub gauss: Vec<GaussPointState>,
    pub eps: Vec<SymTensor2>,
    pub time_level: usize,
    pub iteration: usize,
    pub time: f64,
}

impl SplitState {
    pub fn sigma(&self) -> Vec<SymTensor2> {
        self.gauss.iter().map(|g| g.sigma).collect()
    }

    pub fn phi_p(&self) -> Vec<f64> {
        self.gauss.iter().map(|g| g.phi_p).collect()
    }

    /// Checks sizes and boundary constraints against a dof map.
    pub fn check(&self, dofs: &DofMap) -> Result<()> {
        let n_gauss = dofs.n_cells * crate::mesh::GP_PER_CELL;
        if self.p.len() != dofs.n_cells
            || self.z.len() != dofs.n_faces
            || self.u.len() != dofs.n_displacement()
            || self.gauss.len() != n_gauss
            || self.eps.len() != n_gauss
        {
            return Err(Error::Dimension("state does not match the dof map".into()));
        }
        if self.z.iter().zip(&dofs.flux_fixed).any(|(z, &f)| f && *z != 0.0) {
            return Err(Error::Boundary("nonzero flux on a no-flow face".into()));
        }
        if self.u.iter().zip(&dofs.constrained).any(|(u, &c)| c && *u != 0.0) {
            return Err(Error::Boundary("nonzero constrained displacement".into()));
        }
        Ok(())
    }
}

/// Residuals of the unsplit discrete system at a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonolithicResidual {
    /// Flow equations with the actual (not lagged) stress, relative in the solver norm.
    pub flow: f64,
    /// `‖f_int − f_ext‖` on free dofs over the load scale.
    pub mechanics: f64,
}

impl MonolithicResidual {
    pub fn max(&self) -> f64 {
        self.flow.max(self.mechanics)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rel_dp: f64,
    pub rel_du: f64,
    pub bracket: f64,
    pub max_ratio: f64,
    pub newton_iterations: usize,
    pub plastic_points: usize,
    /// Largest per-cell mass residual relative to the cell's own scale.
    pub mass_residual: f64,
    pub monolithic_flow: f64,
    pub monolithic_mechanics: f64,
    pub flow_factorizations: usize,
    pub mech_factorizations: usize,
}

impl StepSummary {
    pub const FIELDS: [&'static str; 16] = [
        "step",
        "time",
        "dt",
        "iterations",
        "converged",
        "rel_dp",
        "rel_du",
        "bracket",
        "max_ratio",
        "newton_iterations",
        "plastic_points",
        "mass_residual",
        "monolithic_flow",
        "monolithic_mechanics",
        "flow_factorizations",
        "mech_factorizations",
    ];

    pub fn values(&self) -> [f64; 16] {
        [
            self.step as f64,
            self.time,
            self.dt,
            self.iterations as f64,
            self.converged as u8 as f64,
            self.rel_dp,
            self.rel_du,
            self.bracket,
            self.max_ratio,
            self.newton_iterations as f64,
            self.plastic_points as f64,
            self.mass_residual,
            self.monolithic_flow,
            self.monolithic_mechanics,
            self.flow_factorizations as f64,
            self.mech_factorizations as f64,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: SplitState,
    pub reports: Vec<ContractionReport>,
    pub summary: StepSummary,
    /// Per-cell mass residuals (absolute) of the converged state.
    pub mass_residual: Vec<f64>,
}

/// Mesh, material, data and cached operators of a coupled run.
pub struct Simulation {
    pub mesh: HexMesh,
    pub geom: Geometry,
    pub dofs: DofMap,
    pub model: MaterialModel,
    pub consts: Constants,
    pub scenario: Scenario,
    pub controls: CouplingControls,
    pub policy: ExecPolicy,
    f_ext: Vec<f64>,
    flow: Option<FlowOperator>,
    mech: MechOperator,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("cells", &self.mesh.n_cells())
            .field("scenario", &self.scenario)
            .field("controls", &self.controls)
            .finish_non_exhaustive()
    }
}

impl Simulation {
    /// `mesh` must already carry boundary markers.
    pub fn new(
        mesh: HexMesh,
        model: MaterialModel,
        scenario: Scenario,
        controls: CouplingControls,
        policy: ExecPolicy,
    ) -> Result<Self> {
        let consts = model.constants()?;
        let geom = Geometry::new(&mesh, policy)?;
        let dofs = DofMap::new(&mesh)?;
        let f_ext = external_force(&mesh, &geom, &scenario.tractions, model.body_force())?;
        if let Source::PerCell(q) = &scenario.source {
            if q.len() != mesh.n_cells() {
                return Err(Error::config("source", format!("{} values for {} cells", q.len(), mesh.n_cells())));
            }
        }
        let mut mech = MechOperator::new(dofs.constrained.clone());
        mech.newton_tol = controls.newton_tol;
        mech.max_iter = controls.newton_max_iter;
        Ok(Self { mesh, geom, dofs, model, consts, scenario, controls, policy, f_ext, flow: None, mech })
    }

    pub fn flow_operator(&self) -> Option<&FlowOperator> {
        self.flow.as_ref()
    }

    pub fn flow_factorizations(&self) -> usize {
        self.flow.as_ref().map_or(0, |f| f.factorizations())
    }

    pub fn mech_factorizations(&self) -> usize {
        self.mech.factorizations()
    }

    pub fn external_force(&self) -> &[f64] {
        &self.f_ext
    }

    fn ensure_flow(&mut self, dt: f64) -> Result<()> {
        match &mut self.flow {
            Some(op) => op.set_dt(dt),
            None => {
                let rho_g = self.model.gravity.map(|g| self.model.fluid_density * g);
                self.flow = Some(FlowOperator::new(
                    &self.mesh,
                    &self.geom,
                    &self.consts.mobility_inv,
                    self.consts.storage,
                    self.consts.skempton,
                    rho_g,
                    self.dofs.flux_fixed.clone(),
                    dt,
                    self.policy,
                )?);
                Ok(())
            }
        }
    }

    fn source_at(&self, t: f64) -> Vec<f64> {
        let n = self.mesh.n_cells();
        match &self.scenario.source {
            Source::None => vec![0.0; n],
            Source::Uniform(q) => vec![*q; n],
            Source::PerCell(q) => q.clone(),
            Source::Field(f) => (0..n).map(|c| f(&self.mesh.cell_center(c), t)).collect(),
        }
    }

    fn dirichlet_at(&self, t: f64) -> Result<Vec<f64>> {
        let bc = &self.scenario.pressure;
        dirichlet_load(&self.mesh, &|side, x| bc.value(side, x, t))
    }

    fn state_from(&self, p: Vec<f64>, z: Vec<f64>, mech: MechSolution, level: usize, iteration: usize, time: f64) -> SplitState {
        let eps = strain_field(&self.mesh, &self.geom, &mech.u, self.policy);
        SplitState { p, z, u: mech.u, gauss: mech.states, eps, time_level: level, iteration, time }
    }

    /// Time-level-0 state: uniform initial pressure, zero displacement and
    /// `σ = −α p₀`, or the mechanical equilibrium under `p₀` when requested.
    pub fn initial_state(&mut self) -> Result<SplitState> {
        let n_gauss = self.geom.n_gauss();
        let p0 = self.scenario.initial_pressure;
        let p = vec![p0; self.mesh.n_cells()];
        let gauss = vec![GaussPointState { sigma: self.model.biot * -p0, ..Default::default() }; n_gauss];
        let mut state = SplitState {
            p,
            z: vec![0.0; self.mesh.n_faces()],
            u: vec![0.0; self.dofs.n_displacement()],
            gauss,
            eps: vec![SymTensor2::zero(); n_gauss],
            time_level: 0,
            iteration: 0,
            time: 0.0,
        };
        if self.controls.equilibrate {
            let old = vec![GaussPointState::default(); n_gauss];
            let sol = self.mech.solve(&self.mesh, &self.geom, &self.model, &state.p, &state.u, &old, &self.f_ext, self.policy)?;
            state = self.state_from(state.p, state.z, sol, 0, 0, 0.0);
        }
        Ok(state)
    }

    /// Advances one Backward-Euler step with fixed-stress coupling iterations.
    pub fn fixed_stress_step(&mut self, state_n: &SplitState, dt: f64) -> Result<StepOutcome> {
        state_n.check(&self.dofs)?;
        self.ensure_flow(dt)?;
        let t = state_n.time + dt;
        let level = state_n.time_level + 1;
        let source = self.source_at(t);
        let dirichlet = self.dirichlet_at(t)?;
        let sigma_n = state_n.sigma();
        let phi_n = state_n.phi_p();
        let flow = self.flow.as_ref().expect("flow operator built above");

        let hist = StressHistory { sigma_old: &sigma_n, sigma: &sigma_n, phi_old: &phi_n, phi: &phi_n };
        let rhs = assemble_flow_rhs(flow, &self.geom, &state_n.p, &hist, &source, &dirichlet);
        let sol = flow.solve(&rhs)?;
        let mut newton = 0;
        let mech = self.mech.solve(&self.mesh, &self.geom, &self.model, &sol.p, &state_n.u, &state_n.gauss, &self.f_ext, self.policy)?;
        newton += mech.newton_iterations;
        let mut current = self.state_from(sol.p, sol.z, mech, level, 1, t);

        let mut dsigma_prev: Vec<SymTensor2> = current.gauss.iter().zip(&sigma_n).map(|(a, b)| a.sigma - *b).collect();
        let mut dphi_prev: Vec<f64> = current.gauss.iter().zip(&phi_n).map(|(a, b)| a.phi_p - b).collect();
        let mut reports: Vec<ContractionReport> = Vec::new();
        let mut initial_bracket = None;
        let mut converged = false;

        for m in 2..=self.controls.max_iterations {
            let flow = self.flow.as_ref().expect("flow operator built above");
            let inc_p = accumulation_increment(&self.geom, self.consts.storage, &self.consts.skempton, &dsigma_prev, &dphi_prev);
            let inc_rhs = FlowRhs { z: vec![0.0; self.mesh.n_faces()], p: inc_p.iter().map(|v| -v).collect() };
            let inc = flow.solve(&inc_rhs)?;
            let p: Vec<f64> = current.p.iter().zip(&inc.p).map(|(a, b)| a + b).collect();
            let z: Vec<f64> = current.z.iter().zip(&inc.z).map(|(a, b)| a + b).collect();
            let mech = self.mech.solve(&self.mesh, &self.geom, &self.model, &p, &current.u, &state_n.gauss, &self.f_ext, self.policy)?;
            newton += mech.newton_iterations;
            let tangents: Vec<Tensor4> = mech.tangents.clone();
            let (plastic, its) = (mech.plastic_points, mech.newton_iterations);
            let new = self.state_from(p, z, mech, level, m, t);
            let diff = iteration_difference(&new, &current, &self.consts)?.with_flow_increment(&inc.p, &inc.z, &self.consts);
            let p_norm = self
                .geom
                .volumes
                .iter()
                .zip(&new.p)
                .map(|(v, p)| v * p * p)
                .sum::<f64>()
                .sqrt();
            let ctx = ReportContext {
                geom: &self.geom,
                model: &self.model,
                consts: &self.consts,
                a_zz: &flow.darcy.a_zz,
                dt,
                tangents: &tangents,
                plastic_points: plastic,
                newton_iterations: its,
                p_norm,
                u_norm: norm2(&new.u),
            };
            let report = contraction_report(level, m, &diff, &dsigma_prev, &dphi_prev, &ctx);
            let init = *initial_bracket.get_or_insert(report.bracket);
            converged = convergence_criterion(&report, init, &self.controls.convergence);
            reports.push(report);
            dsigma_prev = diff.dsigma;
            dphi_prev = diff.dphi;
            current = new;
            if converged {
                break;
            }
        }
        if !converged {
            return Err(Error::CouplingNotConverged { iterations: self.controls.max_iterations, reports });
        }

        let mono = self.monolithic_residual(&current, state_n, dt)?;
        let (mass, mass_rel) = self.mass_residual(&current, state_n, dt);
        let last = reports.last().expect("at least one report");
        let summary = StepSummary {
            step: level,
            time: t,
            dt,
            iterations: current.iteration,
            converged,
            rel_dp: last.rel_dp,
            rel_du: last.rel_du,
            bracket: last.bracket,
            max_ratio: reports.iter().skip(1).map(|r| r.ratio).fold(0.0, f64::max),
            newton_iterations: newton,
            plastic_points: last.plastic_points,
            mass_residual: mass_rel,
            monolithic_flow: mono.flow,
            monolithic_mechanics: mono.mechanics,
            flow_factorizations: self.flow_factorizations(),
            mech_factorizations: self.mech_factorizations(),
        };
        Ok(StepOutcome { state: current, reports, summary, mass_residual: mass })
    }

    /// Plugs a state into the unsplit equations of the step `old → new`.
    pub fn monolithic_residual(&self, new: &SplitState, old: &SplitState, dt: f64) -> Result<MonolithicResidual> {
        let flow = self.flow.as_ref().ok_or_else(|| Error::config("dt", "no flow operator assembled yet"))?;
        if flow.dt != dt {
            return Err(Error::config("dt", "state was computed with a different step size"));
        }
        let t = old.time + dt;
        let (sn, s) = (old.sigma(), new.sigma());
        let (pn, ph) = (old.phi_p(), new.phi_p());
        let hist = StressHistory { sigma_old: &sn, sigma: &s, phi_old: &pn, phi: &ph };
        let rhs = assemble_flow_rhs(flow, &self.geom, &old.p, &hist, &self.source_at(t), &self.dirichlet_at(t)?);
        let flow_res = flow.residual(&FlowSolution { p: new.p.clone(), z: new.z.clone() }, &rhs);

        let f_int = stress_divergence(&self.mesh, &self.geom, &s, self.policy);
        let r: Vec<f64> = f_int
            .iter()
            .zip(&self.f_ext)
            .zip(&self.dofs.constrained)
            .map(|((a, b), &c)| if c { 0.0 } else { a - b })
            .collect();
        let scale = norm2(&self.f_ext) + norm2(&pressure_force(&self.mesh, &self.geom, &self.model, &new.p, self.policy));
        let mech_res = if norm2(&r) == 0.0 { 0.0 } else { norm2(&r) / scale };
        Ok(MonolithicResidual { flow: flow_res, mechanics: mech_res })
    }

    /// Per-cell mass residuals and the largest one relative to its cell scale
    /// `C|E||p−pⁿ| + |∫(C/3)B:Δσ + Δφ| + Δt Σ_f |z_f| + Δt|q||E|`.
    pub fn mass_residual(&self, new: &SplitState, old: &SplitState, dt: f64) -> (Vec<f64>, f64) {
        let Some(flow) = self.flow.as_ref() else { return (vec![0.0; self.mesh.n_cells()], 0.0) };
        let t = old.time + dt;
        let (sn, s) = (old.sigma(), new.sigma());
        let (pn, ph) = (old.phi_p(), new.phi_p());
        let hist = StressHistory { sigma_old: &sn, sigma: &s, phi_old: &pn, phi: &ph };
        let q = self.source_at(t);
        let sol = FlowSolution { p: new.p.clone(), z: new.z.clone() };
        let res = local_mass_residual(flow, &self.geom, &sol, &old.p, &hist, &q);
        let ds: Vec<SymTensor2> = s.iter().zip(&sn).map(|(a, b)| *a - *b).collect();
        let dphi: Vec<f64> = ph.iter().zip(&pn).map(|(a, b)| a - b).collect();
        let inc = accumulation_increment(&self.geom, self.consts.storage, &self.consts.skempton, &ds, &dphi);
        let mut worst: f64 = 0.0;
        for c in 0..self.mesh.n_cells() {
            let vol = self.geom.volumes[c];
            let flux: f64 = self.mesh.cell_faces[c].iter().map(|&f| new.z[f].abs()).sum();
            let scale = self.consts.storage * vol * (new.p[c] - old.p[c]).abs() + inc[c].abs() + dt * flux + dt * q[c].abs() * vol;
            let r = if res[c] == 0.0 { 0.0 } else { res[c].abs() / scale };
            worst = worst.max(r);
        }
        (res, worst)
    }
}

/// History of a transient run; `error` is set if a step failed, in which case
/// the vectors hold everything up to the failing step.
#[derive(Debug)]
pub struct TransientRun {
    pub states: Vec<SplitState>,
    pub summaries: Vec<StepSummary>,
    pub reports: Vec<ContractionReport>,
    pub error: Option<Error>,
}

/// Marches over the given step sizes starting from the initial state.
pub fn run_transient(sim: &mut Simulation, dts: &[f64]) -> TransientRun {
    let mut run = TransientRun { states: Vec::new(), summaries: Vec::new(), reports: Vec::new(), error: None };
    let mut state = match sim.initial_state() {
        Ok(s) => s,
        Err(e) => {
            run.error = Some(e);
            return run;
        }
    };
    run.states.push(state.clone());
    for &dt in dts {
        match sim.fixed_stress_step(&state, dt) {
            Ok(out) => {
                run.reports.extend(out.reports);
                run.summaries.push(out.summary);
                state = out.state;
                run.states.push(state.clone());
            }
            Err(e) => {
                if let Error::CouplingNotConverged { reports, .. } = &e {
                    run.reports.extend(reports.iter().cloned());
                }
                run.error = Some(e);
                break;
            }
        }
    }
    run
}
