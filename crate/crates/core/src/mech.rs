//! Trilinear (Q1) Galerkin discretization of quasi-static momentum balance
//! with the pore pressure frozen, solved by Newton's method on the
//! return-mapped residual.
//!
//! Displacement unknown `3v + i` is component `i` of vertex `v`. Roller sides
//! fix the face-normal component; everything else is driven by tractions and
//! the body force.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::linsolve::{norm2, LdltFactor, SparseMatrix};
use crate::material::{return_map, GaussPointState, MaterialModel};
use crate::mesh::{gauss_points_2d, face_map, Geometry, HexMesh, MechBc, Side, GP_PER_CELL};
use crate::par::{map_indexed, ExecPolicy};
use crate::tensor::{SymTensor2, Tensor4, SQRT_2};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 25;

type BMat = SMatrix<f64, 6, 24>;
type Local = SVector<f64, 24>;
type LocalMat = SMatrix<f64, 24, 24>;

/// Symmetric strain–displacement operator in Mandel form.
fn b_matrix(grad: &[[f64; 3]; 8]) -> BMat {
    let mut b = BMat::zeros();
    let r = 1.0 / SQRT_2;
    for (a, g) in grad.iter().enumerate() {
        let c = 3 * a;
        for i in 0..3 {
            b[(i, c + i)] = g[i];
        }
        b[(3, c + 1)] = g[2] * r;
        b[(3, c + 2)] = g[1] * r;
        b[(4, c)] = g[2] * r;
        b[(4, c + 2)] = g[0] * r;
        b[(5, c)] = g[1] * r;
        b[(5, c + 1)] = g[0] * r;
    }
    b
}

fn gather(mesh: &HexMesh, cell: usize, u: &[f64]) -> Local {
    let verts = &mesh.cells[cell];
    Local::from_fn(|k, _| u[3 * verts[k / 3] + k % 3])
}

fn strain_of(b: &BMat, u_loc: &Local) -> SymTensor2 {
    SymTensor2::from_mandel_vector(b * u_loc)
}

/// Small strain `½(∇u + ∇uᵀ)` at reference point `xi` of `cell`.
pub fn strain_at_gauss(mesh: &HexMesh, cell: usize, xi: [f64; 3], u: &[f64]) -> Result<SymTensor2> {
    let gp = crate::mesh::GaussPoint::new(&mesh.cell_vertices(cell), xi, 1.0, cell)?;
    Ok(strain_of(&b_matrix(&gp.grad), &gather(mesh, cell, u)))
}

/// Strain at every Gauss point, in flat Gauss-point order.
pub fn strain_field(mesh: &HexMesh, geom: &Geometry, u: &[f64], policy: ExecPolicy) -> Vec<SymTensor2> {
    map_indexed(policy, mesh.n_cells(), |c| {
        let u_loc = gather(mesh, c, u);
        geom.points[c].clone().map(|gp| strain_of(&b_matrix(&gp.grad), &u_loc))
    })
    .into_iter()
    .flatten()
    .collect()
}

/// `Σ_E ∫ Bᵀ τ`: the transpose of strain sampling applied to a Gauss-point field.
pub fn stress_divergence(mesh: &HexMesh, geom: &Geometry, field: &[SymTensor2], policy: ExecPolicy) -> Vec<f64> {
    let locals = map_indexed(policy, mesh.n_cells(), |c| {
        let mut f = Local::zeros();
        for (q, gp) in geom.points[c].iter().enumerate() {
            f += b_matrix(&gp.grad).transpose() * field[Geometry::gp(c, q)].mandel() * gp.weight;
        }
        f
    });
    let mut out = vec![0.0; 3 * mesh.n_vertices()];
    scatter(mesh, &locals, &mut out);
    out
}

fn scatter(mesh: &HexMesh, locals: &[Local], out: &mut [f64]) {
    for (c, f) in locals.iter().enumerate() {
        for (k, v) in f.iter().enumerate() {
            out[3 * mesh.cells[c][k / 3] + k % 3] += v;
        }
    }
}

/// Applied tractions per side (`None` = traction-free).
pub type Tractions = [Option<[f64; 3]>; 6];

/// `(t, q)_{Γ_N} + (f, q)_Ω`.
pub fn external_force(mesh: &HexMesh, geom: &Geometry, tractions: &Tractions, body_force: [f64; 3]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; 3 * mesh.n_vertices()];
    for (c, gps) in geom.points.iter().enumerate() {
        for gp in gps {
            for (a, &v) in mesh.cells[c].iter().enumerate() {
                for i in 0..3 {
                    f[3 * v + i] += gp.weight * gp.shape[a] * body_force[i];
                }
            }
        }
    }
    for side in Side::ALL {
        let Some(t) = tractions[side.index()] else { continue };
        for fid in mesh.boundary_faces() {
            let face = &mesh.faces[fid];
            if face.side != Some(side) {
                continue;
            }
            let marker = face.marker.ok_or_else(|| Error::Boundary(format!("boundary face {fid} carries no marker")))?;
            if marker.mech != MechBc::Neumann {
                return Err(Error::Boundary(format!("traction given on side {side}, which is not a traction side")));
            }
            let corners = mesh.face_corners(fid);
            for st in gauss_points_2d() {
                let (_, n) = face_map(&corners, &st);
                let da = n.norm();
                let (s, r) = (st[0], st[1]);
                let shape = [
                    0.25 * (1.0 - s) * (1.0 - r),
                    0.25 * (1.0 + s) * (1.0 - r),
                    0.25 * (1.0 + s) * (1.0 + r),
                    0.25 * (1.0 - s) * (1.0 + r),
                ];
                for (a, &v) in face.vertices.iter().enumerate() {
                    for i in 0..3 {
                        f[3 * v + i] += da * shape[a] * t[i];
                    }
                }
            }
        }
    }
    Ok(f)
}

/// `Σ_E ∫ Bᵀ (α p)` for cell pressures `p`.
pub fn pressure_force(mesh: &HexMesh, geom: &Geometry, model: &MaterialModel, p: &[f64], policy: ExecPolicy) -> Vec<f64> {
    let field: Vec<SymTensor2> = (0..geom.n_gauss()).map(|i| model.biot * p[i / GP_PER_CELL]).collect();
    stress_divergence(mesh, geom, &field, policy)
}

/// Assembles `Σ_E ∫ Bᵀ 𝔻_q B` for per-Gauss-point tangents, with identity rows on constrained dofs.
pub fn assemble_stiffness(
    mesh: &HexMesh,
    geom: &Geometry,
    tangent: &(dyn Fn(usize) -> Tensor4 + Sync),
    constrained: &[bool],
    policy: ExecPolicy,
) -> SparseMatrix {
    let locals = map_indexed(policy, mesh.n_cells(), |c| {
        let mut k = LocalMat::zeros();
        for (q, gp) in geom.points[c].iter().enumerate() {
            let b = b_matrix(&gp.grad);
            k += b.transpose() * tangent(Geometry::gp(c, q)).mandel() * b * gp.weight;
        }
        k
    });
    let n = 3 * mesh.n_vertices();
    let mut t = Vec::with_capacity(576 * mesh.n_cells());
    for (c, k) in locals.iter().enumerate() {
        let dof = |l: usize| 3 * mesh.cells[c][l / 3] + l % 3;
        for i in 0..24 {
            for j in 0..24 {
                t.push((dof(i), dof(j), k[(i, j)]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t).with_identity_rows(constrained)
}

/// Caches the elastic factorization across mechanics solves.
#[derive(Clone, Debug)]
pub struct MechOperator {
    pub constrained: Vec<bool>,
    pub newton_tol: f64,
    pub max_iter: usize,
    elastic: Option<(SparseMatrix, LdltFactor)>,
    factorizations: usize,
}

#[derive(Clone, Debug)]
pub struct MechSolution {
    pub u: Vec<f64>,
    /// Total stress `σ̂ − α p` per Gauss point.
    pub sigma: Vec<SymTensor2>,
    /// Candidate history (committed by the caller at the end of the step).
    pub states: Vec<GaussPointState>,
    /// Continuum elastoplastic tangent per Gauss point.
    pub tangents: Vec<Tensor4>,
    pub newton_iterations: usize,
    /// Final `‖R‖` on free dofs and the scale it was judged against.
    pub residual: f64,
    pub scale: f64,
    pub plastic_points: usize,
}

struct CellEval {
    f_int: Local,
    sigma: [SymTensor2; 8],
    states: [GaussPointState; 8],
    tangent: [Tensor4; 8],
    algorithmic: [Tensor4; 8],
    plastic: usize,
}

fn evaluate_cell(
    mesh: &HexMesh,
    geom: &Geometry,
    model: &MaterialModel,
    c: usize,
    u: &[f64],
    p: f64,
    old: &[GaussPointState],
) -> Result<CellEval> {
    let u_loc = gather(mesh, c, u);
    let mut f_int = Local::zeros();
    let mut sigma = [SymTensor2::zero(); 8];
    let mut states = [GaussPointState::default(); 8];
    let mut tangent = [Tensor4::zero(); 8];
    let mut algorithmic = [Tensor4::zero(); 8];
    let mut plastic = 0;
    for (q, gp) in geom.points[c].iter().enumerate() {
        let b = b_matrix(&gp.grad);
        let rm = return_map(&strain_of(&b, &u_loc), &old[Geometry::gp(c, q)], model)?;
        let total = rm.effective_stress - model.biot * p;
        f_int += b.transpose() * total.mandel() * gp.weight;
        sigma[q] = total;
        states[q] = GaussPointState { sigma: total, ..rm.state };
        tangent[q] = rm.tangent;
        algorithmic[q] = rm.algorithmic_tangent;
        plastic += rm.plastic as usize;
    }
    Ok(CellEval { f_int, sigma, states, tangent, algorithmic, plastic })
}

impl MechOperator {
    pub fn new(constrained: Vec<bool>) -> Self {
        Self { constrained, newton_tol: NEWTON_TOL, max_iter: NEWTON_MAX_ITER, elastic: None, factorizations: 0 }
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn elastic_factor(&mut self, mesh: &HexMesh, geom: &Geometry, model: &MaterialModel, policy: ExecPolicy) -> Result<&(SparseMatrix, LdltFactor)> {
        if self.elastic.is_none() {
            let d = model.stiffness;
            let k = assemble_stiffness(mesh, geom, &|_| d, &self.constrained, policy);
            let f = LdltFactor::new(&k)?;
            self.factorizations += 1;
            self.elastic = Some((k, f));
        }
        Ok(self.elastic.as_ref().expect("factor cached above"))
    }

    /// Newton solve of `f_int(u; p) = f_ext` starting from `u_start`, with the
    /// return map always starting from `states_old`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        mesh: &HexMesh,
        geom: &Geometry,
        model: &MaterialModel,
        p: &[f64],
        u_start: &[f64],
        states_old: &[GaussPointState],
        f_ext: &[f64],
        policy: ExecPolicy,
    ) -> Result<MechSolution> {
        let n = 3 * mesh.n_vertices();
        if u_start.len() != n || f_ext.len() != n || p.len() != mesh.n_cells() || states_old.len() != geom.n_gauss() {
            return Err(Error::Dimension("mechanics inputs do not match the mesh".into()));
        }
        let constrained = self.constrained.clone();
        let free = |v: &mut Vec<f64>| {
            for (x, &c) in v.iter_mut().zip(&constrained) {
                if c {
                    *x = 0.0;
                }
            }
        };
        let mut u = u_start.to_vec();
        free(&mut u);
        // loads on all dofs, reactions included, so the scale never collapses to round-off
        let fp = pressure_force(mesh, geom, model, p, policy);
        let mut scale = norm2(f_ext) + norm2(&fp);
        let mut iterations = 0;
        loop {
            let evals = map_indexed(policy, mesh.n_cells(), |c| evaluate_cell(mesh, geom, model, c, &u, p[c], states_old));
            let evals: Vec<CellEval> = evals.into_iter().collect::<Result<_>>()?;
            let mut f_int = vec![0.0; n];
            scatter(mesh, &evals.iter().map(|e| e.f_int).collect::<Vec<_>>(), &mut f_int);
            let mut r: Vec<f64> = f_int.iter().zip(f_ext).map(|(a, b)| a - b).collect();
            free(&mut r);
            let rn = norm2(&r);
            if scale == 0.0 {
                scale = norm2(&f_int).max(f64::MIN_POSITIVE);
            }
            let plastic_points: usize = evals.iter().map(|e| e.plastic).sum();
            if rn <= self.newton_tol * scale {
                return Ok(MechSolution {
                    u,
                    sigma: evals.iter().flat_map(|e| e.sigma).collect(),
                    states: evals.iter().flat_map(|e| e.states).collect(),
                    tangents: evals.iter().flat_map(|e| e.tangent).collect(),
                    newton_iterations: iterations,
                    residual: rn,
                    scale,
                    plastic_points,
                });
            }
            if iterations == self.max_iter {
                return Err(Error::Newton { iterations, residual: rn / scale });
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let du = if plastic_points == 0 {
                let (k, f) = self.elastic_factor(mesh, geom, model, policy)?;
                f.solve_checked(k, &rhs)?
            } else {
                let alg: Vec<Tensor4> = evals.iter().flat_map(|e| e.algorithmic).collect();
                let k = assemble_stiffness(mesh, geom, &|i| alg[i], &self.constrained, policy);
                self.factorizations += 1;
                LdltFactor::new(&k)?.solve_checked(&k, &rhs)?
            };
            for (u, d) in u.iter_mut().zip(du) {
                *u += d;
            }
            iterations += 1;
        }
    }
}

/// `f_int − f_ext` on constrained dofs (zero elsewhere).
pub fn reactions(mesh: &HexMesh, geom: &Geometry, sigma: &[SymTensor2], f_ext: &[f64], constrained: &[bool], policy: ExecPolicy) -> Vec<f64> {
    let f_int = stress_divergence(mesh, geom, sigma, policy);
    f_int
        .iter()
        .zip(f_ext)
        .zip(constrained)
        .map(|((a, b), &c)| if c { a - b } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Plasticity;
    use crate::mesh::{generate_brick, trilinear_map, BoundaryRules, BoxBounds, DofMap, FlowBc, GaussPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, distortion: f64, rules: &BoundaryRules) -> (HexMesh, Geometry, Vec<bool>) {
        let mesh = generate_brick(n, n, n, BoxBounds::unit(), distortion, 11).unwrap().classify_boundary(rules).unwrap();
        let geom = Geometry::new(&mesh, ExecPolicy::Sequential).unwrap();
        let constrained = DofMap::new(&mesh).unwrap().constrained;
        (mesh, geom, constrained)
    }

    fn all_rollers() -> BoundaryRules {
        BoundaryRules::uniform(FlowBc::Neumann, MechBc::Dirichlet)
    }

    /// Rollers on left, front and bottom; the other sides are traction sides.
    fn uniaxial_rules() -> BoundaryRules {
        BoundaryRules::uniform(FlowBc::Neumann, MechBc::Neumann)
            .set(Side::Left, FlowBc::Neumann, MechBc::Dirichlet)
            .set(Side::Front, FlowBc::Neumann, MechBc::Dirichlet)
            .set(Side::Bottom, FlowBc::Neumann, MechBc::Dirichlet)
    }

    fn field(mesh: &HexMesh, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Vec<f64> {
        mesh.vertices.iter().flat_map(|x| f(x)).collect()
    }

    #[test]
    fn rigid_translation_and_uniform_stretch() {
        let (mesh, _, _) = setup(2, 0.3, &all_rollers());
        let u = field(&mesh, |_| [0.3, -1.0, 2.0]);
        for c in 0..mesh.n_cells() {
            assert!(strain_at_gauss(&mesh, c, [0.1, -0.2, 0.3], &u).unwrap().norm() < 1e-13);
        }
        let u = field(&mesh, |x| [x[0], 0.0, 0.0]);
        for c in 0..mesh.n_cells() {
            let e = strain_at_gauss(&mesh, c, [0.5, 0.5, -0.5], &u).unwrap();
            assert!((e - SymTensor2::diag(1.0, 0.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn strain_matches_finite_difference_gradient() {
        let (mesh, _, _) = setup(3, 0.4, &all_rollers());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u: Vec<f64> = (0..3 * mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = 13;
        let verts = mesh.cell_vertices(c);
        let xi = [0.2, -0.4, 0.6];
        let disp = |xi: &[f64; 3]| -> nalgebra::Vector3<f64> {
            let n = crate::mesh::shape_functions(xi);
            let mut out = nalgebra::Vector3::zeros();
            for a in 0..8 {
                for i in 0..3 {
                    out[i] += n[a] * u[3 * mesh.cells[c][a] + i];
                }
            }
            out
        };
        let h = 1e-6;
        let mut du = nalgebra::Matrix3::zeros();
        let mut dx = nalgebra::Matrix3::zeros();
        for k in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p[k] += h;
            m[k] -= h;
            du.set_column(k, &((disp(&p) - disp(&m)) / (2.0 * h)));
            let (xp, _) = trilinear_map(&verts, &p);
            let (xm, _) = trilinear_map(&verts, &m);
            dx.set_column(k, &((nalgebra::Vector3::from(xp) - nalgebra::Vector3::from(xm)) / (2.0 * h)));
        }
        let grad = du * dx.try_inverse().unwrap();
        let sym = (grad + grad.transpose()) * 0.5;
        let e = strain_at_gauss(&mesh, c, xi, &u).unwrap().to_matrix3();
        assert!((e - sym).amax() < 1e-8, "{}", (e - sym).amax());
    }

    #[test]
    fn zero_loads_give_zero_displacement() {
        let (mesh, geom, constrained) = setup(2, 0.2, &uniaxial_rules());
        let model = MaterialModel::isotropic(1e9, 0.25, 0.8, 1e9, 1e-12);
        let mut op = MechOperator::new(constrained);
        let n = 3 * mesh.n_vertices();
        let sol = op
            .solve(&mesh, &geom, &model, &vec![0.0; mesh.n_cells()], &vec![0.0; n], &vec![GaussPointState::default(); geom.n_gauss()], &vec![0.0; n], ExecPolicy::Sequential)
            .unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
        assert_eq!(sol.newton_iterations, 0);
    }

    fn top_traction(t: f64) -> Tractions {
        let mut tr = [None; 6];
        tr[Side::Top.index()] = Some([0.0, 0.0, t]);
        tr
    }

    #[test]
    fn uniaxial_elastic_closed_form_and_reactions() {
        let (mesh, geom, constrained) = setup(1, 0.0, &uniaxial_rules());
        let e = 2e9;
        let model = MaterialModel::isotropic(e, 0.0, 0.8, 1e9, 1e-12);
        let t = -3e6;
        let f_ext = external_force(&mesh, &geom, &top_traction(t), [0.0; 3]).unwrap();
        let mut op = MechOperator::new(constrained.clone());
        let n = 3 * mesh.n_vertices();
        let states = vec![GaussPointState::default(); geom.n_gauss()];
        let sol = op
            .solve(&mesh, &geom, &model, &[0.0], &vec![0.0; n], &states, &f_ext, ExecPolicy::Sequential)
            .unwrap();
        assert_eq!(sol.newton_iterations, 1);
        for (v, x) in mesh.vertices.iter().enumerate() {
            assert!((sol.u[3 * v + 2] - t / e * x[2]).abs() < 1e-10 * (t / e).abs());
            assert!(sol.u[3 * v].abs() < 1e-10 * (t / e).abs());
        }
        for s in &sol.sigma {
            assert!((s.get(2, 2) - t).abs() < 1e-10 * t.abs());
        }
        let r = reactions(&mesh, &geom, &sol.sigma, &f_ext, &constrained, ExecPolicy::Sequential);
        let rz: f64 = (0..mesh.n_vertices()).map(|v| r[3 * v + 2]).sum();
        let applied: f64 = (0..mesh.n_vertices()).map(|v| f_ext[3 * v + 2]).sum();
        assert!((rz + applied).abs() < 1e-10 * applied.abs());

        // linearity
        let f2: Vec<f64> = f_ext.iter().map(|f| 2.0 * f).collect();
        let sol2 = op.solve(&mesh, &geom, &model, &[0.0], &vec![0.0; n], &states, &f2, ExecPolicy::Sequential).unwrap();
        for (a, b) in sol.u.iter().zip(&sol2.u) {
            assert!((2.0 * a - b).abs() <= 1e-10 * (t / e).abs());
        }
        assert_eq!(op.factorizations(), 1);
    }

    #[test]
    fn uniform_pressure_on_rollers_gives_hydrostatic_stress() {
        let (mesh, geom, constrained) = setup(3, 0.3, &all_rollers());
        let model = MaterialModel::isotropic(1e9, 0.25, 1.0, 1e9, 1e-12);
        let p = vec![2e6; mesh.n_cells()];
        let n = 3 * mesh.n_vertices();
        let mut op = MechOperator::new(constrained);
        let sol = op
            .solve(&mesh, &geom, &model, &p, &vec![0.0; n], &vec![GaussPointState::default(); geom.n_gauss()], &vec![0.0; n], ExecPolicy::Sequential)
            .unwrap();
        assert!(sol.u.iter().all(|v| v.abs() < 1e-12));
        for s in &sol.sigma {
            assert!((*s + SymTensor2::identity() * 2e6).norm() < 1e-6);
        }
    }

    /// Uniaxial-strain compression of one element against the scalar radial return.
    #[test]
    fn plastic_uniaxial_strain_matches_radial_return() {
        let rules = all_rollers().set(Side::Top, FlowBc::Neumann, MechBc::Neumann);
        let (mesh, geom, constrained) = setup(1, 0.0, &rules);
        let (young, nu, sy, h) = (1e9, 0.25, 5e6, 1e8);
        let model = MaterialModel {
            plasticity: Plasticity::VonMises { yield_stress: sy, hardening: h, beta_p: 0.5 },
            ..MaterialModel::isotropic(young, nu, 0.8, 1e9, 1e-12)
        };
        let t = -2e7;
        let f_ext = external_force(&mesh, &geom, &top_traction(t), [0.0; 3]).unwrap();
        let n = 3 * mesh.n_vertices();
        let mut op = MechOperator::new(constrained);
        let sol = op
            .solve(&mesh, &geom, &model, &[0.0], &vec![0.0; n], &vec![GaussPointState::default(); 8], &f_ext, ExecPolicy::Sequential)
            .unwrap();
        assert!(sol.plastic_points == 8 && sol.newton_iterations > 1);

        let k = young / (3.0 * (1.0 - 2.0 * nu));
        let g = young / (2.0 * (1.0 + nu));
        let r23 = (2.0_f64 / 3.0).sqrt();
        let szz = |e: f64| {
            let q_tr = 2.0 * g * e.abs() * r23;
            let ratio = if q_tr <= r23 * sy { 1.0 } else { 1.0 - 2.0 * g * (q_tr - r23 * sy) / (2.0 * g + 2.0 / 3.0 * h) / q_tr };
            k * e + ratio * 2.0 * g * 2.0 / 3.0 * e
        };
        let (mut lo, mut hi) = (-1.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if szz(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let e = 0.5 * (lo + hi);
        for (v, x) in mesh.vertices.iter().enumerate() {
            assert!((sol.u[3 * v + 2] - e * x[2]).abs() < 1e-9 * e.abs(), "{} vs {}", sol.u[3 * v + 2], e * x[2]);
        }
        for (st, s) in sol.states.iter().zip(&sol.sigma) {
            let f = crate::material::yield_function(&model, s, st.accumulated_plastic).unwrap();
            assert!(f.abs() < 1e-8 * sy);
            assert!((st.phi_p - 0.5 * st.eps_p.trace()).abs() < 1e-18);
        }
    }

    #[test]
    fn galerkin_orthogonality_of_solution() {
        let (mesh, geom, constrained) = setup(2, 0.3, &uniaxial_rules());
        let model = MaterialModel::isotropic(1e9, 0.3, 0.8, 1e9, 1e-12);
        let f_ext = external_force(&mesh, &geom, &top_traction(-1e6), [0.0, 0.0, -2e4]).unwrap();
        let n = 3 * mesh.n_vertices();
        let mut op = MechOperator::new(constrained.clone());
        let sol = op
            .solve(&mesh, &geom, &model, &vec![1e5; 8], &vec![0.0; n], &vec![GaussPointState::default(); geom.n_gauss()], &f_ext, ExecPolicy::Sequential)
            .unwrap();
        let fi = stress_divergence(&mesh, &geom, &sol.sigma, ExecPolicy::Sequential);
        let r: Vec<f64> = (0..n).filter(|&i| !constrained[i]).map(|i| fi[i] - f_ext[i]).collect();
        assert!(norm2(&r) <= NEWTON_TOL * sol.scale);
    }

    #[test]
    fn traction_on_roller_side_is_rejected() {
        let (mesh, geom, _) = setup(1, 0.0, &all_rollers());
        assert!(matches!(external_force(&mesh, &geom, &top_traction(1.0), [0.0; 3]), Err(Error::Boundary(_))));
    }

    #[test]
    fn stiffness_is_symmetric_and_policies_agree() {
        let (mesh, geom, constrained) = setup(3, 0.3, &uniaxial_rules());
        let d = crate::material::isotropic_stiffness(1e9, 0.3);
        let a = assemble_stiffness(&mesh, &geom, &|_| d, &constrained, ExecPolicy::Sequential);
        let b = assemble_stiffness(&mesh, &geom, &|_| d, &constrained, ExecPolicy::Parallel);
        assert_eq!(a, b);
        assert!(a.is_symmetric(1e-13));
        let _ = GaussPoint::new(&mesh.cell_vertices(0), [0.0; 3], 1.0, 0).unwrap();
    }
}
