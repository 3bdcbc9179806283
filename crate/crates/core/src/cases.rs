//! Built-in scenarios shared by `poro verify` and the acceptance suite.
//!
//! The canonical case is a unit cube with a drained left face: the block
//! starts at a uniform pore pressure `p₀` and the left face is held at zero,
//! so fluid drains out and the skeleton compacts. All six sides carry rollers
//! except the top, which is loaded by the traction that balances the initial
//! stress `σ = −α p₀`, so the initial state is an exact equilibrium.

use std::sync::Arc;

use crate::coupling::{ConvergenceTolerances, CouplingControls, PressureBc, Scenario, Simulation, Source};
use crate::error::Result;
use crate::material::{orthotropic_stiffness, MaterialModel, Plasticity};
use crate::mech::Tractions;
use crate::mesh::{generate_brick, BoundaryRules, BoxBounds, FlowBc, MechBc, Side};
use crate::par::ExecPolicy;
use crate::tensor::SymTensor2;

/// Initial pore pressure of the canonical drawdown (Pa).
pub const CANONICAL_P0: f64 = 1.0e6;
pub const CANONICAL_DT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Isotropic,
    /// Orthotropic stiffness with a diagonal, non-spherical Biot tensor (off-diagonal
    /// entries would put shear tractions on the rollers and spoil the initial equilibrium).
    Orthotropic,
}

/// A ready-to-run simulation plus its time steps.
#[derive(Debug)]
pub struct Case {
    pub name: &'static str,
    pub sim: Simulation,
    pub dts: Vec<f64>,
}

/// Canonical poroelastic parameters: E = 1 GPa, ν = 0.25, α = 0.8, M = 1 GPa, κ = 1e-12 m²/(Pa·s).
pub fn canonical_material(variant: Variant) -> Result<MaterialModel> {
    let mut model = MaterialModel::isotropic(1.0e9, 0.25, 0.8, 1.0e9, 1.0e-12);
    model.gravity = [0.0; 3];
    if variant == Variant::Orthotropic {
        model.stiffness = orthotropic_stiffness([1.4e9, 1.0e9, 0.7e9], 0.25, 0.2, 0.3, 4.5e8, 3.5e8, 3.0e8)?;
        model.biot = SymTensor2::diag(0.85, 0.75, 0.65);
    }
    model.validate()?;
    Ok(model)
}

fn drawdown_rules() -> BoundaryRules {
    BoundaryRules::uniform(FlowBc::Neumann, MechBc::Dirichlet)
        .set(Side::Left, FlowBc::Dirichlet, MechBc::Dirichlet)
        .set(Side::Top, FlowBc::Neumann, MechBc::Neumann)
}

fn drawdown_scenario(model: &MaterialModel) -> Scenario {
    let mut tractions: Tractions = [None; 6];
    // σ·n on the top face for σ = −α p₀.
    tractions[Side::Top.index()] = Some([0, 1, 2].map(|i| -CANONICAL_P0 * model.biot.get(i, 2)));
    let mut pressure = [None; 6];
    pressure[Side::Left.index()] = Some(0.0);
    Scenario { pressure: PressureBc::Constant(pressure), tractions, source: Source::None, initial_pressure: CANONICAL_P0 }
}

/// Controls with coupling tolerance `tol` on all three stopping tests.
pub fn controls(tol: f64) -> CouplingControls {
    CouplingControls {
        convergence: ConvergenceTolerances { tol, tol_bracket: tol, bracket_abs_tol: 1e-300 },
        max_iterations: 200,
        newton_tol: 1e-12,
        ..Default::default()
    }
}

fn drawdown(name: &'static str, model: MaterialModel, n: usize, tol: f64, steps: usize, policy: ExecPolicy) -> Result<Case> {
    let mesh = generate_brick(n, n, n, BoxBounds::unit(), 0.0, 0)?.classify_boundary(&drawdown_rules())?;
    let scenario = drawdown_scenario(&model);
    let sim = Simulation::new(mesh, model, scenario, controls(tol), policy)?;
    Ok(Case { name, sim, dts: vec![CANONICAL_DT; steps] })
}

/// Canonical elastic drawdown on an `n³` mesh.
pub fn canonical(variant: Variant, n: usize, tol: f64, steps: usize, policy: ExecPolicy) -> Result<Case> {
    let name = match variant {
        Variant::Isotropic => "canonical-isotropic",
        Variant::Orthotropic => "canonical-orthotropic",
    };
    drawdown(name, canonical_material(variant)?, n, tol, steps, policy)
}

/// Canonical drawdown with associative Drucker–Prager plasticity; the
/// compaction near the drained face drives points onto the yield surface.
pub fn plastic_canonical(n: usize, tol: f64, steps: usize, policy: ExecPolicy) -> Result<Case> {
    let mut model = canonical_material(Variant::Isotropic)?;
    model.plasticity = Plasticity::DruckerPrager { yield_stress: 5.0e3, hardening: 2.0e8, friction: 0.1, beta_p: 0.5 };
    model.validate()?;
    drawdown("drucker-prager", model, n, tol, steps, policy)
}

/// Canonical drawdown with α = 0: flow and mechanics decouple.
pub fn decoupled(n: usize, tol: f64, steps: usize, policy: ExecPolicy) -> Result<Case> {
    let mut model = canonical_material(Variant::Isotropic)?;
    model.biot = SymTensor2::zero();
    drawdown("decoupled", model, n, tol, steps, policy)
}

/// Manufactured 1D consolidation in the unit cube (nondimensional units):
/// `p = t cos(πx)`, `u = (α t sin(πx) / (π (λ+2μ)), 0, 0)`, all sides on
/// rollers and no-flow, source `q = (1/M + α²/(λ+2μ)) cos(πx) + κ π² t cos(πx)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manufactured {
    pub young: f64,
    pub poisson: f64,
    pub biot: f64,
    pub biot_modulus: f64,
    pub mobility: f64,
}

impl Default for Manufactured {
    fn default() -> Self {
        Self { young: 1.0, poisson: 0.25, biot: 0.8, biot_modulus: 1.0, mobility: 1.0 }
    }
}

impl Manufactured {
    /// Constrained (P-wave) modulus `λ + 2μ`.
    pub fn constrained_modulus(&self) -> f64 {
        let (e, nu) = (self.young, self.poisson);
        e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    pub fn pressure(&self, x: f64, t: f64) -> f64 {
        t * (std::f64::consts::PI * x).cos()
    }

    pub fn displacement(&self, x: f64, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        self.biot * t * (pi * x).sin() / (pi * self.constrained_modulus())
    }

    pub fn source(&self, x: f64, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let c = (pi * x).cos();
        (1.0 / self.biot_modulus + self.biot * self.biot / self.constrained_modulus()) * c + self.mobility * pi * pi * t * c
    }

    pub fn case(&self, n: usize, steps: usize, t_end: f64, tol: f64, policy: ExecPolicy) -> Result<Case> {
        let rules = BoundaryRules::uniform(FlowBc::Neumann, MechBc::Dirichlet);
        let mesh = generate_brick(n, n, n, BoxBounds::unit(), 0.0, 0)?.classify_boundary(&rules)?;
        let mut model = MaterialModel::isotropic(self.young, self.poisson, self.biot, self.biot_modulus, self.mobility);
        model.gravity = [0.0; 3];
        let this = *self;
        let scenario = Scenario {
            pressure: PressureBc::Constant([None; 6]),
            tractions: [None; 6],
            source: Source::Field(Arc::new(move |x, t| this.source(x[0], t))),
            initial_pressure: 0.0,
        };
        let sim = Simulation::new(mesh, model, scenario, controls(tol), policy)?;
        Ok(Case { name: "manufactured-1d", sim, dts: vec![t_end / steps as f64; steps] })
    }

    /// Volume-weighted L² error of the cell pressures against the exact cell-center values.
    pub fn pressure_error(&self, sim: &Simulation, p: &[f64], t: f64) -> f64 {
        let mut err = 0.0;
        for (c, (&pc, &vol)) in p.iter().zip(&sim.geom.volumes).enumerate() {
            let x = sim.mesh.cell_center(c);
            err += vol * (pc - self.pressure(x[0], t)).powi(2);
        }
        err.sqrt()
    }
}
