//! Mixed P0/RT0 discretization of the flow subproblem.
//!
//! Unknowns are one pressure per cell and one *total* flux per face, taken
//! along the face orientation (outward for boundary faces, +axis for interior
//! faces). Velocities on a cell come from the reference lowest-order
//! Raviart–Thomas functions through the contravariant Piola map
//! `v = DF v̂ / det DF`, which preserves face fluxes on any hexahedron.
//!
//! The saddle system solved per coupling iteration is
//!
//! ```text
//! [  A    −Bᵀ         ] [z]   [ f_z      ]
//! [ −B   −diag(C|E|)/Δt ] [p] = [ −f_p / Δt ]
//! ```
//!
//! Its matrix does not depend on the lagged stress, so it is assembled and
//! factorized once and reused for every iteration of a time step.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linsolve::{LdltFactor, SparseMatrix};
use crate::mesh::{gauss_points_2d, face_map, FlowBc, Geometry, GaussPoint, HexMesh, Point, Side};
use crate::par::{map_indexed, ExecPolicy};
use crate::tensor::SymTensor2;

/// Reference RT0 function of local face `local` (−ξ, +ξ, −η, +η, −ζ, +ζ) with unit outward flux.
pub fn rt0_reference(local: usize, xi: &[f64; 3]) -> Vector3<f64> {
    let a = local / 2;
    let mut v = Vector3::zeros();
    v[a] = if local % 2 == 1 { (1.0 + xi[a]) / 8.0 } else { -(1.0 - xi[a]) / 8.0 };
    v
}

/// Physical velocity of local face function `local` at a Gauss point (Piola map).
pub fn rt0_physical(local: usize, gp: &GaussPoint) -> Vector3<f64> {
    gp.jac * rt0_reference(local, &gp.xi) / gp.det
}

/// Darcy blocks of the mixed system.
#[derive(Clone, Debug)]
pub struct DarcyBlocks {
    /// `(κ⁻¹ z, v)`, faces × faces.
    pub a_zz: SparseMatrix,
    /// `(∇·z, θ)`, cells × faces; entries are the orientation signs `±1`.
    pub b_div: SparseMatrix,
}

fn local_darcy(cell: &[GaussPoint; 8], kinv: &Matrix3<f64>) -> [[f64; 6]; 6] {
    let mut a = [[0.0; 6]; 6];
    for gp in cell {
        let v: [Vector3<f64>; 6] = std::array::from_fn(|l| rt0_physical(l, gp));
        for i in 0..6 {
            let kv = kinv * v[i];
            for j in 0..6 {
                a[i][j] += gp.weight * kv.dot(&v[j]);
            }
        }
    }
    a
}

pub fn assemble_darcy(mesh: &HexMesh, geom: &Geometry, mobility_inv: &Matrix3<f64>, policy: ExecPolicy) -> DarcyBlocks {
    let locals = map_indexed(policy, mesh.n_cells(), |c| local_darcy(&geom.points[c], mobility_inv));
    let mut ta = Vec::with_capacity(36 * mesh.n_cells());
    let mut tb = Vec::with_capacity(6 * mesh.n_cells());
    for (c, local) in locals.iter().enumerate() {
        let faces = mesh.cell_faces[c];
        let s = faces.map(|f| mesh.orientation(c, f));
        for i in 0..6 {
            tb.push((c, faces[i], s[i]));
            for j in 0..6 {
                ta.push((faces[i], faces[j], s[i] * s[j] * local[i][j]));
            }
        }
    }
    DarcyBlocks {
        a_zz: SparseMatrix::from_triplets(mesh.n_faces(), mesh.n_faces(), ta),
        b_div: SparseMatrix::from_triplets(mesh.n_cells(), mesh.n_faces(), tb),
    }
}

/// `(ρ₀ g, v_f)` for every face.
pub fn gravity_load(mesh: &HexMesh, geom: &Geometry, rho_g: [f64; 3], policy: ExecPolicy) -> Vec<f64> {
    let g = Vector3::from(rho_g);
    let locals = map_indexed(policy, mesh.n_cells(), |c| {
        let mut out = [0.0; 6];
        for gp in &geom.points[c] {
            for (l, o) in out.iter_mut().enumerate() {
                *o += gp.weight * g.dot(&rt0_physical(l, gp));
            }
        }
        out
    });
    let mut load = vec![0.0; mesh.n_faces()];
    for (c, local) in locals.iter().enumerate() {
        for (l, &f) in mesh.cell_faces[c].iter().enumerate() {
            load[f] += mesh.orientation(c, f) * local[l];
        }
    }
    load
}

/// `−(g, v_f·n)` on flow-Dirichlet faces. `g` returns `None` where no data is available.
pub fn dirichlet_load(mesh: &HexMesh, g: &dyn Fn(Side, &Point) -> Option<f64>) -> Result<Vec<f64>> {
    let mut load = vec![0.0; mesh.n_faces()];
    for f in mesh.boundary_faces() {
        let face = &mesh.faces[f];
        let (Some(marker), Some(side)) = (face.marker, face.side) else {
            return Err(Error::Boundary(format!("boundary face {f} carries no marker")));
        };
        if marker.flow != FlowBc::Dirichlet {
            continue;
        }
        let corners = mesh.face_corners(f);
        for st in gauss_points_2d() {
            let (x, _) = face_map(&corners, &st);
            let value = g(side, &x).ok_or_else(|| {
                Error::Boundary(format!("no Dirichlet pressure on side {side} (face {f})"))
            })?;
            // the normal flux density of v_f per unit reference area is 1/4
            load[f] -= 0.25 * value;
        }
    }
    Ok(load)
}

/// Stress and plastic porosity at Gauss points entering the accumulation term.
#[derive(Clone, Copy, Debug)]
pub struct StressHistory<'a> {
    pub sigma_old: &'a [SymTensor2],
    pub sigma: &'a [SymTensor2],
    pub phi_old: &'a [f64],
    pub phi: &'a [f64],
}

impl StressHistory<'_> {
    fn cell_increments(&self, geom: &Geometry, storage: f64, skempton: &SymTensor2) -> Vec<f64> {
        let ds: Vec<SymTensor2> = self.sigma.iter().zip(self.sigma_old).map(|(a, b)| *a - *b).collect();
        let dphi: Vec<f64> = self.phi.iter().zip(self.phi_old).map(|(a, b)| a - b).collect();
        accumulation_increment(geom, storage, skempton, &ds, &dphi)
    }
}

/// `∫_E [(C/3) B:Δσ + Δφᵖ]` for every cell, from Gauss-point increments.
pub fn accumulation_increment(
    geom: &Geometry,
    storage: f64,
    skempton: &SymTensor2,
    dsigma: &[SymTensor2],
    dphi: &[f64],
) -> Vec<f64> {
    geom.points
        .iter()
        .enumerate()
        .map(|(c, gps)| {
            gps.iter()
                .enumerate()
                .map(|(q, gp)| {
                    let i = Geometry::gp(c, q);
                    gp.weight * (storage / 3.0 * skempton.ddot(&dsigma[i]) + dphi[i])
                })
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRhs {
    pub z: Vec<f64>,
    /// Accumulation-row data `f_p` before division by `−Δt`.
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    pub p: Vec<f64>,
    pub z: Vec<f64>,
}

/// Assembled and factorized flow operator for a fixed time-step size.
#[derive(Clone, Debug)]
pub struct FlowOperator {
    pub darcy: DarcyBlocks,
    pub gravity: Vec<f64>,
    pub volumes: Vec<f64>,
    pub flux_fixed: Vec<bool>,
    pub storage: f64,
    pub skempton: SymTensor2,
    pub dt: f64,
    matrix: SparseMatrix,
    factor: LdltFactor,
    factorizations: usize,
}

impl FlowOperator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: &HexMesh,
        geom: &Geometry,
        mobility_inv: &Matrix3<f64>,
        storage: f64,
        skempton: SymTensor2,
        rho_g: [f64; 3],
        flux_fixed: Vec<bool>,
        dt: f64,
        policy: ExecPolicy,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config("dt", format!("time step must be > 0, got {dt}")));
        }
        let darcy = assemble_darcy(mesh, geom, mobility_inv, policy);
        let gravity = gravity_load(mesh, geom, rho_g, policy);
        let matrix = Self::system_matrix(&darcy, &geom.volumes, &flux_fixed, storage, dt);
        let factor = LdltFactor::new(&matrix)?;
        Ok(Self {
            darcy,
            gravity,
            volumes: geom.volumes.clone(),
            flux_fixed,
            storage,
            skempton,
            dt,
            matrix,
            factor,
            factorizations: 1,
        })
    }

    fn system_matrix(darcy: &DarcyBlocks, volumes: &[f64], flux_fixed: &[bool], storage: f64, dt: f64) -> SparseMatrix {
        let nf = darcy.a_zz.nrows();
        let nc = darcy.b_div.nrows();
        let mut t = Vec::with_capacity(darcy.a_zz.nnz() + 2 * darcy.b_div.nnz() + nc);
        for i in 0..nf {
            t.extend(darcy.a_zz.row(i).map(|(j, v)| (i, j, v)));
        }
        for c in 0..nc {
            for (f, v) in darcy.b_div.row(c) {
                t.push((nf + c, f, -v));
                t.push((f, nf + c, -v));
            }
            t.push((nf + c, nf + c, -storage * volumes[c] / dt));
        }
        let mut fixed = flux_fixed.to_vec();
        fixed.resize(nf + nc, false);
        SparseMatrix::from_triplets(nf + nc, nf + nc, t).with_identity_rows(&fixed)
    }

    /// Re-assembles for a new time-step size; no-op if `dt` is unchanged.
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if dt == self.dt {
            return Ok(());
        }
        if !(dt > 0.0) {
            return Err(Error::config("dt", format!("time step must be > 0, got {dt}")));
        }
        self.matrix = Self::system_matrix(&self.darcy, &self.volumes, &self.flux_fixed, self.storage, dt);
        self.factor = LdltFactor::new(&self.matrix)?;
        self.factorizations += 1;
        self.dt = dt;
        Ok(())
    }

    /// Number of factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn n_cells(&self) -> usize {
        self.darcy.b_div.nrows()
    }

    pub fn n_faces(&self) -> usize {
        self.darcy.a_zz.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn system_rhs(&self, rhs: &FlowRhs) -> Vec<f64> {
        let mut b: Vec<f64> =
            rhs.z.iter().zip(&self.flux_fixed).map(|(&z, &fixed)| if fixed { 0.0 } else { z }).collect();
        b.extend(rhs.p.iter().map(|f| -f / self.dt));
        b
    }

    /// Solves the saddle system; no-flow fluxes come out exactly zero.
    pub fn solve(&self, rhs: &FlowRhs) -> Result<FlowSolution> {
        let nf = self.n_faces();
        let x = self.factor.solve_checked(&self.matrix, &self.system_rhs(rhs))?;
        let mut z = x[..nf].to_vec();
        for (z, &fixed) in z.iter_mut().zip(&self.flux_fixed) {
            if fixed {
                *z = 0.0;
            }
        }
        Ok(FlowSolution { p: x[nf..].to_vec(), z })
    }

    /// Relative residual of a solution in the equilibrated norm used by the solver.
    pub fn residual(&self, sol: &FlowSolution, rhs: &FlowRhs) -> f64 {
        let mut x = sol.z.clone();
        x.extend_from_slice(&sol.p);
        self.factor.scaled_residual(&self.matrix, &x, &self.system_rhs(rhs))
    }
}

/// Flow right-hand side with the lagged stress and plastic porosity.
///
/// `source` is the volumetric rate per cell; `dirichlet` comes from [`dirichlet_load`].
pub fn assemble_flow_rhs(
    op: &FlowOperator,
    geom: &Geometry,
    p_old: &[f64],
    lagged: &StressHistory<'_>,
    source: &[f64],
    dirichlet: &[f64],
) -> FlowRhs {
    let inc = lagged.cell_increments(geom, op.storage, &op.skempton);
    let p = (0..op.n_cells())
        .map(|c| {
            let vol = op.volumes[c];
            op.dt * source[c] * vol + op.storage * vol * p_old[c] - inc[c]
        })
        .collect();
    let z = op
        .gravity
        .iter()
        .zip(dirichlet)
        .zip(&op.flux_fixed)
        .map(|((g, d), &fixed)| if fixed { 0.0 } else { g + d })
        .collect();
    FlowRhs { z, p }
}

/// Cellwise `∫(ζⁿ⁺¹ − ζⁿ) + Δt ∫_∂E z·n − Δt ∫ q` with the actual new stress.
pub fn local_mass_residual(
    op: &FlowOperator,
    geom: &Geometry,
    sol: &FlowSolution,
    p_old: &[f64],
    current: &StressHistory<'_>,
    source: &[f64],
) -> Vec<f64> {
    let inc = current.cell_increments(geom, op.storage, &op.skempton);
    let div = op.darcy.b_div.matvec(&sol.z);
    (0..op.n_cells())
        .map(|c| {
            let vol = op.volumes[c];
            op.storage * vol * (sol.p[c] - p_old[c]) + inc[c] + op.dt * (div[c] - source[c] * vol)
        })
        .collect()
}
