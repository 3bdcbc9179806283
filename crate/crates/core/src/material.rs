//! Constitutive layer: anisotropic poroelastic parameters, the storage
//! constant `C` and Skempton tensor `B`, Hooke's law in both directions,
//! fluid-content bookkeeping and a closest-point return map for von Mises and
//! Drucker–Prager plasticity with linear isotropic hardening.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::tensor::{SymTensor2, Tensor4};

/// Yield-function tolerance (relative to the initial yield stress) below which a trial state is elastic.
pub const ELASTIC_TOL: f64 = 1e-11;

const RETURN_MAP_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Plasticity {
    None,
    /// `f = ‖dev σ̂‖ − √(2/3)(σ_y + H ᾱ)`, associative.
    VonMises { yield_stress: f64, hardening: f64, beta_p: f64 },
    /// `f = ‖dev σ̂‖ + η tr σ̂ − √(2/3)(σ_y + H ᾱ)`, associative (dilatant, tension positive).
    DruckerPrager { yield_stress: f64, hardening: f64, friction: f64, beta_p: f64 },
}

impl Plasticity {
    fn params(&self) -> Option<(f64, f64, f64, f64)> {
        match *self {
            Plasticity::None => None,
            Plasticity::VonMises { yield_stress, hardening, beta_p } => Some((yield_stress, hardening, 0.0, beta_p)),
            Plasticity::DruckerPrager { yield_stress, hardening, friction, beta_p } => {
                Some((yield_stress, hardening, friction, beta_p))
            }
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, Plasticity::None)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialModel {
    /// Drained stiffness `𝔻` (Pa).
    pub stiffness: Tensor4,
    /// Biot tensor `α`.
    pub biot: SymTensor2,
    /// Biot modulus `M` (Pa).
    pub biot_modulus: f64,
    /// Absolute permeability `K` (m²).
    pub permeability: Matrix3<f64>,
    /// Fluid viscosity `μ` (Pa·s).
    pub viscosity: f64,
    /// Fluid compressibility `c` (1/Pa); only used for the reported density field.
    pub fluid_compressibility: f64,
    pub fluid_density: f64,
    pub rock_density: f64,
    pub porosity: f64,
    pub gravity: [f64; 3],
    pub plasticity: Plasticity,
}

/// Isotropic stiffness from Young's modulus and Poisson's ratio.
pub fn isotropic_stiffness(young: f64, poisson: f64) -> Tensor4 {
    let bulk = young / (3.0 * (1.0 - 2.0 * poisson));
    let shear = young / (2.0 * (1.0 + poisson));
    Tensor4::isotropic(bulk, shear)
}

/// Orthotropic stiffness (material axes aligned with x, y, z) from the nine engineering constants.
#[allow(clippy::too_many_arguments)]
pub fn orthotropic_stiffness(
    e: [f64; 3],
    nu12: f64,
    nu13: f64,
    nu23: f64,
    g12: f64,
    g13: f64,
    g23: f64,
) -> Result<Tensor4> {
    let mut s = Matrix6::zeros();
    for i in 0..3 {
        s[(i, i)] = 1.0 / e[i];
    }
    s[(0, 1)] = -nu12 / e[0];
    s[(1, 0)] = s[(0, 1)];
    s[(0, 2)] = -nu13 / e[0];
    s[(2, 0)] = s[(0, 2)];
    s[(1, 2)] = -nu23 / e[1];
    s[(2, 1)] = s[(1, 2)];
    // Mandel shear slots: √2 ε_ij = σ_M / (2 G_ij)
    s[(3, 3)] = 1.0 / (2.0 * g23);
    s[(4, 4)] = 1.0 / (2.0 * g13);
    s[(5, 5)] = 1.0 / (2.0 * g12);
    Tensor4::from_mandel(s).invert()
}

fn is_spd6(m: &Matrix6<f64>) -> bool {
    let scale = m.amax();
    (m - m.transpose()).amax() <= 1e-12 * scale && m.symmetric_eigenvalues().min() > 0.0
}

fn is_spd3(m: &Matrix3<f64>) -> bool {
    let scale = m.amax();
    (m - m.transpose()).amax() <= 1e-12 * scale && m.symmetric_eigenvalues().min() > 0.0
}

impl MaterialModel {
    /// Isotropic poroelastic model with default fluid/rock properties and no gravity.
    pub fn isotropic(young: f64, poisson: f64, biot: f64, biot_modulus: f64, mobility: f64) -> Self {
        Self {
            stiffness: isotropic_stiffness(young, poisson),
            biot: SymTensor2::identity() * biot,
            biot_modulus,
            permeability: Matrix3::identity() * mobility,
            viscosity: 1.0,
            fluid_compressibility: 0.0,
            fluid_density: 1000.0,
            rock_density: 2650.0,
            porosity: 0.2,
            gravity: [0.0, 0.0, -9.81],
            plasticity: Plasticity::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !is_spd6(self.stiffness.mandel()) {
            return Err(Error::material("stiffness", "must be symmetric positive definite"));
        }
        if !(self.biot_modulus > 0.0 && self.biot_modulus.is_finite()) {
            return Err(Error::material("biot_modulus", format!("must be > 0, got {}", self.biot_modulus)));
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::material("porosity", format!("must lie in (0, 1), got {}", self.porosity)));
        }
        if !(self.viscosity > 0.0) {
            return Err(Error::material("viscosity", format!("must be > 0, got {}", self.viscosity)));
        }
        if !is_spd3(&self.permeability) {
            return Err(Error::material("permeability", "must be symmetric positive definite"));
        }
        if !(self.fluid_compressibility >= 0.0) {
            return Err(Error::material("fluid_compressibility", "must be >= 0"));
        }
        if !(self.fluid_density >= 0.0 && self.rock_density >= 0.0) {
            return Err(Error::material("fluid_density", "densities must be >= 0"));
        }
        if let Some((sy, h, eta, beta)) = self.plasticity.params() {
            if !(sy > 0.0) {
                return Err(Error::material("yield_stress", format!("must be > 0, got {sy}")));
            }
            if !(h >= 0.0) {
                return Err(Error::material("hardening", format!("must be >= 0, got {h}")));
            }
            if !(eta >= 0.0) {
                return Err(Error::material("friction", format!("must be >= 0, got {eta}")));
            }
            if !beta.is_finite() {
                return Err(Error::material("beta_p", "must be finite"));
            }
        }
        Ok(())
    }

    /// Hydraulic conductivity `κ = K/μ`.
    pub fn mobility(&self) -> Matrix3<f64> {
        self.permeability / self.viscosity
    }

    /// Reported density field `ρ = ρ₀(1 + c(p − p₀))`.
    pub fn density(&self, p: f64, p0: f64) -> f64 {
        self.fluid_density * (1.0 + self.fluid_compressibility * (p - p0))
    }

    /// Body force `f = ρφ g + ρ_r(1 − φ) g` with `φ = φ₀`, `ρ = ρ₀`.
    pub fn body_force(&self) -> [f64; 3] {
        let w = self.fluid_density * self.porosity + self.rock_density * (1.0 - self.porosity);
        self.gravity.map(|g| w * g)
    }

    /// Derived constants (compliance, `C`, `B`, `κ⁻¹`).
    pub fn constants(&self) -> Result<Constants> {
        self.validate()?;
        let compliance = self.stiffness.invert()?;
        let storage = storage_constant_with(self, &compliance);
        let skempton = skempton_tensor(self, &compliance, storage);
        let mobility_inv = self
            .mobility()
            .try_inverse()
            .ok_or_else(|| Error::material("permeability", "not invertible"))?;
        Ok(Constants { compliance, storage, skempton, mobility_inv })
    }
}

/// Quantities derived once from a [`MaterialModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    /// `𝔻⁻¹`.
    pub compliance: Tensor4,
    /// `C = 1/M + α : 𝔻⁻¹ α`.
    pub storage: f64,
    /// `B = (3/C) 𝔻⁻¹ α`.
    pub skempton: SymTensor2,
    /// `κ⁻¹`.
    pub mobility_inv: Matrix3<f64>,
}

fn storage_constant_with(model: &MaterialModel, compliance: &Tensor4) -> f64 {
    1.0 / model.biot_modulus + compliance.quadratic(&model.biot, &model.biot)
}

/// `C = 1/M + α : 𝔻⁻¹ α`, the constant making both fluid-content forms agree.
pub fn storage_constant(model: &MaterialModel) -> Result<f64> {
    model.validate()?;
    Ok(storage_constant_with(model, &model.stiffness.invert()?))
}

/// Same constant with an arbitrary (e.g. elastoplastic) compliance.
pub fn storage_constant_for(model: &MaterialModel, compliance: &Tensor4) -> f64 {
    storage_constant_with(model, compliance)
}

/// `B = (3/C) 𝔻⁻¹ α`.
pub fn skempton_tensor(model: &MaterialModel, compliance: &Tensor4, storage: f64) -> SymTensor2 {
    compliance.apply(&model.biot) * (3.0 / storage)
}

/// `σ = 𝔻(ε − εᵖ) − α p`.
pub fn stress_from_strain(eps: &SymTensor2, eps_p: &SymTensor2, p: f64, model: &MaterialModel) -> SymTensor2 {
    model.stiffness.apply(&(*eps - *eps_p)) - model.biot * p
}

/// `ε = 𝔻ᵉᵖ⁻¹ σ + (C/3) B p`.
pub fn strain_from_stress(sigma: &SymTensor2, p: f64, tangent_inv: &Tensor4, storage: f64, skempton: &SymTensor2) -> SymTensor2 {
    tangent_inv.apply(sigma) + *skempton * (storage / 3.0 * p)
}

/// `ζ = C p + (C/3) B : σ + φᵖ`.
pub fn fluid_content(p: f64, sigma: &SymTensor2, phi_p: f64, storage: f64, skempton: &SymTensor2) -> f64 {
    storage * p + storage / 3.0 * skempton.ddot(sigma) + phi_p
}

/// History variables at one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GaussPointState {
    pub eps_p: SymTensor2,
    /// Plastic porosity `φᵖ = β_p tr εᵖ`.
    pub phi_p: f64,
    /// Total stress.
    pub sigma: SymTensor2,
    /// Equivalent plastic strain `ᾱ`.
    pub accumulated_plastic: f64,
}

#[derive(Clone, Debug)]
pub struct ReturnMapResult {
    /// Effective stress `σ̂ = 𝔻(ε − εᵖ)`.
    pub effective_stress: SymTensor2,
    /// Continuum elastoplastic tangent `𝔻ᵉᵖ` (equals `𝔻` for elastic steps).
    pub tangent: Tensor4,
    /// Algorithmic tangent consistent with the backward-Euler return, used by Newton.
    pub algorithmic_tangent: Tensor4,
    /// New history; `sigma` holds the effective stress until the caller subtracts `α p`.
    pub state: GaussPointState,
    pub plastic: bool,
    pub increment: f64,
}

fn yield_value(s: &SymTensor2, eta: f64, sy: f64, h: f64, alpha_bar: f64) -> f64 {
    s.deviator().norm() + eta * s.trace() - (2.0_f64 / 3.0).sqrt() * (sy + h * alpha_bar)
}

/// Yield function value of an effective stress for the model's current hardening state.
pub fn yield_function(model: &MaterialModel, effective: &SymTensor2, accumulated_plastic: f64) -> Option<f64> {
    model.plasticity.params().map(|(sy, h, eta, _)| yield_value(effective, eta, sy, h, accumulated_plastic))
}

/// Strain-driven backward-Euler closest-point return from `state_old`.
pub fn return_map(eps_trial: &SymTensor2, state_old: &GaussPointState, model: &MaterialModel) -> Result<ReturnMapResult> {
    let d = &model.stiffness;
    let trial = d.apply(&(*eps_trial - state_old.eps_p));
    let elastic = |state: GaussPointState| ReturnMapResult {
        effective_stress: trial,
        tangent: *d,
        algorithmic_tangent: *d,
        state: GaussPointState { sigma: trial, ..state },
        plastic: false,
        increment: 0.0,
    };
    let Some((sy, h, eta, beta)) = model.plasticity.params() else {
        return Ok(elastic(*state_old));
    };
    let abar0 = state_old.accumulated_plastic;
    if yield_value(&trial, eta, sy, h, abar0) <= ELASTIC_TOL * sy {
        return Ok(elastic(*state_old));
    }

    let compliance = d.invert()?;
    let ident = SymTensor2::identity();
    let p_dev = Tensor4::deviatoric_projector();
    let sqrt23 = (2.0_f64 / 3.0).sqrt();
    let flow_dir = |s: &SymTensor2| -> Result<(SymTensor2, f64)> {
        let dev = s.deviator();
        let q = dev.norm();
        if !(q > 1e-14 * sy) {
            return Err(Error::ReturnMap("return reached the cone apex".into()));
        }
        Ok((dev * (1.0 / q) + ident * eta, q))
    };
    let dm_dsigma = |s: &SymTensor2, q: f64| -> Tensor4 {
        let n = s.deviator() * (1.0 / q);
        (p_dev - Tensor4::dyad(&n, &n)) * (1.0 / q)
    };

    let mut sigma = trial;
    let mut dgamma = 0.0;
    let scale = trial.norm().max(sy);
    let mut converged = false;
    for _ in 0..RETURN_MAP_MAX_ITER {
        let (m, q) = flow_dir(&sigma)?;
        let r1 = compliance.apply(&(sigma - trial)) + m * dgamma;
        let r2 = yield_value(&sigma, eta, sy, h, abar0 + sqrt23 * dgamma);
        if d.apply(&r1).norm() <= 1e-14 * scale && r2.abs() <= 1e-14 * sy {
            converged = true;
            break;
        }
        let a = compliance + dm_dsigma(&sigma, q) * dgamma;
        let mut jac = SMatrix::<f64, 7, 7>::zeros();
        jac.fixed_view_mut::<6, 6>(0, 0).copy_from(a.mandel());
        for i in 0..6 {
            jac[(i, 6)] = m.mandel()[i];
            jac[(6, i)] = m.mandel()[i];
        }
        jac[(6, 6)] = -2.0 / 3.0 * h;
        let mut rhs = SVector::<f64, 7>::zeros();
        for i in 0..6 {
            rhs[i] = -r1.mandel()[i];
        }
        rhs[6] = -r2;
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::ReturnMap("singular local Jacobian".into()))?;
        sigma = SymTensor2::from_mandel(std::array::from_fn(|i| sigma.mandel()[i] + delta[i]));
        dgamma += delta[6];
    }
    if !converged {
        return Err(Error::ReturnMap(format!("local Newton did not converge in {RETURN_MAP_MAX_ITER} iterations")));
    }
    if dgamma < 0.0 {
        return Err(Error::ReturnMap(format!("negative plastic multiplier {dgamma:e}")));
    }

    let (m, q) = flow_dir(&sigma)?;
    let eps_p = state_old.eps_p + m * dgamma;
    let abar = abar0 + sqrt23 * dgamma;
    let effective = d.apply(&(*eps_trial - eps_p));
    let f = yield_value(&effective, eta, sy, h, abar);
    if f > 1e-10 * sy {
        return Err(Error::ReturnMap(format!("returned stress violates yield condition by {f:e}")));
    }

    let hh = 2.0 / 3.0 * h;
    let dm = d.apply(&m);
    let tangent = *d - Tensor4::dyad(&dm, &dm) * (1.0 / (m.ddot(&dm) + hh));
    let xi = (compliance + dm_dsigma(&sigma, q) * dgamma).invert()?;
    let xm = xi.apply(&m);
    let algorithmic = xi - Tensor4::dyad(&xm, &xm) * (1.0 / (m.ddot(&xm) + hh));

    Ok(ReturnMapResult {
        effective_stress: effective,
        tangent,
        algorithmic_tangent: algorithmic,
        state: GaussPointState { eps_p, phi_p: beta * eps_p.trace(), sigma: effective, accumulated_plastic: abar },
        plastic: true,
        increment: dgamma,
    })
}
