//! Iteration differences and the contraction monitor.
//!
//! For consecutive coupling iterates `m − 1` and `m` the monitor evaluates
//! every term of the contraction estimate by Gauss quadrature, and also the
//! exact energy balance the discrete equations satisfy. The two differ by
//! algebraic terms that are reported separately:
//!
//! ```text
//! stated_lhs + algebra_correction − galerkin_term − constitutive_remainder
//!            + porosity_lag_term = cross_term
//! ```
//!
//! * `algebra_correction = −(C/9)‖B:δσ‖² − (δφᵖ, δp) + ⅓(B:δσ, δφᵖ) − ⅓(B:δσ, δ_fφᵖ)`
//!   collects what the expansion of `‖δζ‖²` and the bracket leave over;
//! * `galerkin_term = (δσ : δε)` vanishes by the mechanics equations;
//! * `constitutive_remainder = (δσ : 𝔻ᵉᵖ⁻¹δσ + (C/3)B δp − δε)` vanishes for
//!   elastic steps (the inverse constitutive law is exact there);
//! * `porosity_lag_term = (δ^{(m−1)}φᵖ, δp)` comes from lagging `φᵖ` in the flow solve.

use crate::error::{Error, Result};
use crate::linsolve::{norm2, SparseMatrix};
use crate::material::{fluid_content, Constants, MaterialModel};
use crate::mesh::{Geometry, GP_PER_CELL};
use crate::tensor::{SymTensor2, Tensor4};

use super::SplitState;

/// Changes between two coupling iterates; `*_flow` are the changes over the flow solve alone.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationDifference {
    pub dp: Vec<f64>,
    pub dz: Vec<f64>,
    pub du: Vec<f64>,
    pub dsigma: Vec<SymTensor2>,
    pub deps: Vec<SymTensor2>,
    pub dphi: Vec<f64>,
    pub dp_flow: Vec<f64>,
    /// Plastic porosity does not evolve during the flow solve, so this is zero.
    pub dphi_flow: Vec<f64>,
    /// Per Gauss point.
    pub dzeta: Vec<f64>,
    pub dzeta_flow: Vec<f64>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a - b).collect()
}

/// Componentwise differences `new − old` of two iterates of the same step.
pub fn iteration_difference(new: &SplitState, old: &SplitState, consts: &Constants) -> Result<IterationDifference> {
    if new.p.len() != old.p.len()
        || new.z.len() != old.z.len()
        || new.u.len() != old.u.len()
        || new.gauss.len() != old.gauss.len()
        || new.eps.len() != old.eps.len()
    {
        return Err(Error::Dimension("iterates belong to different discretizations".into()));
    }
    let dsigma = new.gauss.iter().zip(&old.gauss).map(|(a, b)| a.sigma - b.sigma).collect();
    let deps = new.eps.iter().zip(&old.eps).map(|(a, b)| *a - *b).collect();
    let dphi = new.gauss.iter().zip(&old.gauss).map(|(a, b)| a.phi_p - b.phi_p).collect();
    let dp = sub(&new.p, &old.p);
    let mut d = IterationDifference {
        dp_flow: dp.clone(),
        dp,
        dz: sub(&new.z, &old.z),
        du: sub(&new.u, &old.u),
        dsigma,
        deps,
        dphi,
        dphi_flow: vec![0.0; new.gauss.len()],
        dzeta: Vec::new(),
        dzeta_flow: Vec::new(),
    };
    d.refresh_fluid_content(consts);
    Ok(d)
}

impl IterationDifference {
    /// Replaces `δp`, `δz` by the increments returned by an incremental flow solve,
    /// avoiding the cancellation of subtracting nearly equal iterates.
    pub fn with_flow_increment(mut self, dp: &[f64], dz: &[f64], consts: &Constants) -> Self {
        self.dp = dp.to_vec();
        self.dp_flow = dp.to_vec();
        self.dz = dz.to_vec();
        self.refresh_fluid_content(consts);
        self
    }

    /// `δζ = Cδp + (C/3)B:δσ + δφᵖ` and `δ_fζ = Cδp + δ_fφᵖ` at Gauss points.
    fn refresh_fluid_content(&mut self, consts: &Constants) {
        let n = self.dsigma.len();
        self.dzeta = (0..n)
            .map(|i| fluid_content(self.dp[i / GP_PER_CELL], &self.dsigma[i], self.dphi[i], consts.storage, &consts.skempton))
            .collect();
        self.dzeta_flow =
            (0..n).map(|i| consts.storage * self.dp_flow[i / GP_PER_CELL] + self.dphi_flow[i]).collect();
    }
}

/// One row of the contraction monitor.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ContractionReport {
    pub step: usize,
    pub iteration: usize,
    /// `(C/6)‖B:δ^{(m)}σ‖²`.
    pub metric_sigma: f64,
    /// `(C/2)‖δp‖²`.
    pub pressure_term: f64,
    /// `Δt‖κ^{-1/2}δz‖²`.
    pub darcy_term: f64,
    /// `(δσ : 𝔻ᵉᵖ⁻¹ δσ)`; NaN where the tangent is singular.
    pub compliance_term: f64,
    /// `(1/2C)‖δζ‖²`.
    pub zeta_term: f64,
    /// `(1/C)‖δφᵖ − δ_fφᵖ‖²`.
    pub phi_gap_term: f64,
    /// `(1/C)‖δζ − δ_fζ‖² + (1/2C)‖δφᵖ‖² + ⅓(B:δσ, δ_fφᵖ)`.
    pub bracket: f64,
    /// `(C/6)‖B:δ^{(m−1)}σ‖²`.
    pub rhs_prev: f64,
    /// `−(C/3)(B:δ^{(m−1)}σ, δp)`.
    pub cross_term: f64,
    pub stated_lhs: f64,
    pub algebra_correction: f64,
    pub galerkin_term: f64,
    pub constitutive_remainder: f64,
    pub porosity_lag_term: f64,
    /// Sum of magnitudes of all ledger terms, used to make residuals relative.
    pub ledger_scale: f64,
    /// Relative residual of the closed energy balance.
    pub ledger_residual: f64,
    /// Relative residual of `stated_lhs = cross_term`.
    pub ledger_residual_stated: f64,
    /// `(1/C)‖δζ−δ_fζ‖² − (1/C)‖δφ−δ_fφ‖² − ⅓(B:δσ, δφ−δ_fφ) − (C/9)‖B:δσ‖²`, relative.
    pub convergence_identity_residual: f64,
    /// Same identity with the coefficient `⅔` that the expansion actually produces.
    pub convergence_identity_residual_closed: f64,
    /// `(C/3)(½‖B:δ^{(m−1)}σ‖² + ½‖δp‖²)`.
    pub young_bound: f64,
    pub young_slack: f64,
    /// `metric_sigma / rhs_prev` (0 when both vanish).
    pub ratio: f64,
    pub rel_dp: f64,
    pub rel_du: f64,
    /// Smallest `1/M + α:𝔻ᵉᵖ⁻¹α` over Gauss points (equals `C` on elastic steps).
    pub storage_tangent: f64,
    pub plastic_points: usize,
    pub newton_iterations: usize,
}

impl ContractionReport {
    /// Column names in the order of [`ContractionReport::values`].
    pub const FIELDS: [&'static str; 31] = [
        "step",
        "iteration",
        "metric_sigma",
        "pressure_term",
        "darcy_term",
        "compliance_term",
        "zeta_term",
        "phi_gap_term",
        "bracket",
        "rhs_prev",
        "cross_term",
        "stated_lhs",
        "algebra_correction",
        "galerkin_term",
        "constitutive_remainder",
        "porosity_lag_term",
        "ledger_scale",
        "ledger_residual",
        "ledger_residual_stated",
        "convergence_identity_residual",
        "convergence_identity_residual_closed",
        "young_bound",
        "young_slack",
        "ratio",
        "rel_dp",
        "rel_du",
        "storage_tangent",
        "plastic_points",
        "newton_iterations",
        "cross_nonnegative",
        "compliance_nonnegative",
    ];

    pub fn values(&self) -> [f64; 31] {
        [
            self.step as f64,
            self.iteration as f64,
            self.metric_sigma,
            self.pressure_term,
            self.darcy_term,
            self.compliance_term,
            self.zeta_term,
            self.phi_gap_term,
            self.bracket,
            self.rhs_prev,
            self.cross_term,
            self.stated_lhs,
            self.algebra_correction,
            self.galerkin_term,
            self.constitutive_remainder,
            self.porosity_lag_term,
            self.ledger_scale,
            self.ledger_residual,
            self.ledger_residual_stated,
            self.convergence_identity_residual,
            self.convergence_identity_residual_closed,
            self.young_bound,
            self.young_slack,
            self.ratio,
            self.rel_dp,
            self.rel_du,
            self.storage_tangent,
            self.plastic_points as f64,
            self.newton_iterations as f64,
            self.cross_nonnegative(0.0) as u8 as f64,
            (self.compliance_term >= 0.0) as u8 as f64,
        ]
    }

    /// `cross_term ≥ −tol·ledger_scale`.
    pub fn cross_nonnegative(&self, tol: f64) -> bool {
        self.cross_term >= -tol * self.ledger_scale
    }

    /// The contraction inequality `metric_sigma ≤ rhs_prev (1 + tol)`.
    pub fn contraction_holds(&self, tol: f64) -> bool {
        self.metric_sigma <= self.rhs_prev * (1.0 + tol)
    }

    /// Whether the Young bound holds, allowing `tol·ledger_scale` of round-off.
    pub fn young_holds(&self, tol: f64) -> bool {
        self.young_slack >= -tol * self.ledger_scale
    }
}

/// Everything besides the differences that the monitor needs.
pub struct ReportContext<'a> {
    pub geom: &'a Geometry,
    pub model: &'a MaterialModel,
    pub consts: &'a Constants,
    /// The Darcy mass matrix `(κ⁻¹ z, v)`.
    pub a_zz: &'a SparseMatrix,
    pub dt: f64,
    /// Continuum tangents of iterate `m`, per Gauss point.
    pub tangents: &'a [Tensor4],
    pub plastic_points: usize,
    pub newton_iterations: usize,
    /// `‖p^{(m)}‖` (volume-weighted) and `‖u^{(m)}‖` for relative increments.
    pub p_norm: f64,
    pub u_norm: f64,
}

fn relative(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Evaluates every monitor term for iteration `iteration` of `step`.
///
/// `dsigma_prev`, `dphi_prev` are `δ^{(m−1)}σ`, `δ^{(m−1)}φᵖ` (with iterate 0 being the time-level-n state).
pub fn contraction_report(
    step: usize,
    iteration: usize,
    diff: &IterationDifference,
    dsigma_prev: &[SymTensor2],
    dphi_prev: &[f64],
    ctx: &ReportContext<'_>,
) -> ContractionReport {
    let c = ctx.consts.storage;
    let bt = &ctx.consts.skempton;
    let weights = ctx.geom.weights();
    let elastic_compliance = &ctx.consts.compliance;

    let mut x = 0.0; // ‖B:δσ‖²
    let mut x_prev = 0.0; // ‖B:δ^{(m−1)}σ‖²
    let mut p2 = 0.0; // ‖δp‖²
    let mut y_prev = 0.0; // (B:δ^{(m−1)}σ, δp)
    let mut zeta2 = 0.0;
    let mut gap2 = 0.0; // ‖δφ − δ_fφ‖²
    let mut jump2 = 0.0; // ‖δζ − δ_fζ‖²
    let mut dphi2 = 0.0;
    let mut b_dphi_flow = 0.0; // (B:δσ, δ_fφ)
    let mut b_dphi = 0.0; // (B:δσ, δφ)
    let mut p_dphi = 0.0; // (δp, δφ)
    let mut lag = 0.0; // (δ^{(m−1)}φ, δp)
    let mut compliance = 0.0;
    let mut galerkin = 0.0;
    let mut remainder = 0.0;
    let mut storage_tangent = f64::INFINITY;

    for (i, &w) in weights.iter().enumerate() {
        let dp = diff.dp[i / GP_PER_CELL];
        let ds = &diff.dsigma[i];
        let b = bt.ddot(ds);
        let b_prev = bt.ddot(&dsigma_prev[i]);
        x += w * b * b;
        x_prev += w * b_prev * b_prev;
        p2 += w * dp * dp;
        y_prev += w * b_prev * dp;
        zeta2 += w * diff.dzeta[i] * diff.dzeta[i];
        let g = diff.dphi[i] - diff.dphi_flow[i];
        gap2 += w * g * g;
        let jump = diff.dzeta[i] - diff.dzeta_flow[i];
        jump2 += w * jump * jump;
        dphi2 += w * diff.dphi[i] * diff.dphi[i];
        b_dphi_flow += w * b * diff.dphi_flow[i];
        b_dphi += w * b * diff.dphi[i];
        p_dphi += w * dp * diff.dphi[i];
        lag += w * dphi_prev[i] * dp;

        let tangent = &ctx.tangents[i];
        let inv = if tangent == &ctx.model.stiffness {
            Some(*elastic_compliance)
        } else {
            tangent.invert().ok()
        };
        let (comp_i, st_i) = match inv {
            Some(inv) => {
                let dsc = inv.apply(ds);
                (ds.ddot(&dsc), 1.0 / ctx.model.biot_modulus + inv.quadratic(&ctx.model.biot, &ctx.model.biot))
            }
            None => (f64::NAN, f64::NAN),
        };
        compliance += w * comp_i;
        storage_tangent = if st_i.is_nan() || storage_tangent.is_nan() { f64::NAN } else { storage_tangent.min(st_i) };
        let de = &diff.deps[i];
        galerkin += w * ds.ddot(de);
        // (δσ : 𝔻ᵉᵖ⁻¹δσ + (C/3)B δp − δε), split so the elastic case cancels exactly
        remainder += w * (comp_i + c / 3.0 * b * dp - ds.ddot(de));
    }
    let darcy = ctx.dt * ctx.a_zz.bilinear(&diff.dz, &diff.dz);

    let metric = c / 6.0 * x;
    let pressure = c / 2.0 * p2;
    let zeta = zeta2 / (2.0 * c);
    let phi_gap = gap2 / c;
    let bracket = jump2 / c + dphi2 / (2.0 * c) + b_dphi_flow / 3.0;
    let rhs_prev = c / 6.0 * x_prev;
    let cross = -c / 3.0 * y_prev;
    let stated = metric + pressure + darcy + compliance + zeta + phi_gap - bracket;
    let algebra = -c / 9.0 * x - p_dphi + b_dphi / 3.0 - b_dphi_flow / 3.0;

    let terms = [
        metric, pressure, darcy, compliance, zeta, phi_gap, bracket, cross, algebra, galerkin, remainder, lag,
    ];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    let closed = stated + algebra - galerkin - remainder + lag - cross;
    let stated_err = stated - cross;

    // (1/C)‖δζ−δ_fζ‖² − (1/C)‖δφ−δ_fφ‖² − k(B:δσ, δφ−δ_fφ) = (C/9)‖B:δσ‖²
    let b_gap = b_dphi - b_dphi_flow;
    let id_scale = jump2 / c + gap2 / c + b_gap.abs() + c / 9.0 * x;
    let id_stated = jump2 / c - gap2 / c - b_gap / 3.0 - c / 9.0 * x;
    let id_closed = jump2 / c - gap2 / c - 2.0 * b_gap / 3.0 - c / 9.0 * x;

    let young = c / 3.0 * (0.5 * x_prev + 0.5 * p2);
    let p_norm_delta = p2.sqrt();
    ContractionReport {
        step,
        iteration,
        metric_sigma: metric,
        pressure_term: pressure,
        darcy_term: darcy,
        compliance_term: compliance,
        zeta_term: zeta,
        phi_gap_term: phi_gap,
        bracket,
        rhs_prev,
        cross_term: cross,
        stated_lhs: stated,
        algebra_correction: algebra,
        galerkin_term: galerkin,
        constitutive_remainder: remainder,
        porosity_lag_term: lag,
        ledger_scale: scale,
        ledger_residual: relative(closed.abs(), scale),
        ledger_residual_stated: relative(stated_err.abs(), scale),
        convergence_identity_residual: relative(id_stated.abs(), id_scale),
        convergence_identity_residual_closed: relative(id_closed.abs(), id_scale),
        young_bound: young,
        young_slack: young - cross,
        ratio: relative(metric, rhs_prev),
        rel_dp: relative(p_norm_delta, ctx.p_norm),
        rel_du: relative(norm2(&diff.du), ctx.u_norm),
        storage_tangent,
        plastic_points: ctx.plastic_points,
        newton_iterations: ctx.newton_iterations,
    }
}

/// Stopping rule for the coupling loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceTolerances {
    /// Bound on `‖δp‖/‖p‖` and `‖δu‖/‖u‖`.
    pub tol: f64,
    /// Bound on `bracket / bracket(first report of the step)`.
    pub tol_bracket: f64,
    /// Absolute floor for the bracket threshold.
    pub bracket_abs_tol: f64,
}

impl Default for ConvergenceTolerances {
    fn default() -> Self {
        Self { tol: 1e-8, tol_bracket: 1e-8, bracket_abs_tol: 1e-30 }
    }
}

/// `rel‖δp‖ ≤ tol ∧ rel‖δu‖ ≤ tol ∧ bracket ≤ max(tol_bracket·initial, abs floor)`.
pub fn convergence_criterion(report: &ContractionReport, initial_bracket: f64, tol: &ConvergenceTolerances) -> bool {
    report.rel_dp <= tol.tol
        && report.rel_du <= tol.tol
        && report.bracket <= (tol.tol_bracket * initial_bracket).max(tol.bracket_abs_tol)
}
