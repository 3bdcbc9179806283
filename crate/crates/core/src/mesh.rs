//! Structured (optionally distorted) hexahedral meshes of a box, boundary
//! markers, degree-of-freedom numbering and the per-cell quadrature cache.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::par::{map_indexed, ExecPolicy};

pub type Point = [f64; 3];

/// Reference coordinates of the eight hex vertices (VTK_HEXAHEDRON order).
pub const REF_VERTICES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local faces in the order `-ξ, +ξ, -η, +η, -ζ, +ζ`, vertices ordered so the
/// right-hand normal points out of the cell.
pub const LOCAL_FACES: [[usize; 4]; 6] =
    [[0, 4, 7, 3], [1, 2, 6, 5], [0, 1, 5, 4], [3, 7, 6, 2], [0, 3, 2, 1], [4, 5, 6, 7]];

/// Two-point Gauss abscissa.
pub const GAUSS_2: f64 = 0.577_350_269_189_625_8;

/// 2×2×2 Gauss points (all weights 1), ordered with ξ fastest.
pub fn gauss_points_3d() -> [[f64; 3]; 8] {
    let g = [-GAUSS_2, GAUSS_2];
    let mut pts = [[0.0; 3]; 8];
    let mut n = 0;
    for &z in &g {
        for &y in &g {
            for &x in &g {
                pts[n] = [x, y, z];
                n += 1;
            }
        }
    }
    pts
}

/// 2×2 Gauss points on the reference square (weights 1).
pub fn gauss_points_2d() -> [[f64; 2]; 4] {
    [[-GAUSS_2, -GAUSS_2], [GAUSS_2, -GAUSS_2], [GAUSS_2, GAUSS_2], [-GAUSS_2, GAUSS_2]]
}

/// Trilinear shape functions at `xi`.
pub fn shape_functions(xi: &[f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, r) in REF_VERTICES.iter().enumerate() {
        n[a] = 0.125 * (1.0 + xi[0] * r[0]) * (1.0 + xi[1] * r[1]) * (1.0 + xi[2] * r[2]);
    }
    n
}

/// Reference gradients `∂N_a/∂ξ_j`.
pub fn shape_gradients(xi: &[f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, r) in REF_VERTICES.iter().enumerate() {
        let fx = 1.0 + xi[0] * r[0];
        let fy = 1.0 + xi[1] * r[1];
        let fz = 1.0 + xi[2] * r[2];
        g[a] = [0.125 * r[0] * fy * fz, 0.125 * fx * r[1] * fz, 0.125 * fx * fy * r[2]];
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The six sides of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Front,
    Back,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 6] = [Side::Left, Side::Right, Side::Front, Side::Back, Side::Bottom, Side::Top];

    pub fn axis(self) -> Axis {
        match self {
            Side::Left | Side::Right => Axis::X,
            Side::Front | Side::Back => Axis::Y,
            Side::Bottom | Side::Top => Axis::Z,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Side::Right | Side::Back | Side::Top)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Front => "front",
            Side::Back => "back",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Side::ALL
            .into_iter()
            .find(|side| side.name() == s)
            .ok_or_else(|| format!("unknown side `{s}` (expected left/right/front/back/bottom/top)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowBc {
    /// Prescribed pressure (Γ_D^f).
    Dirichlet,
    /// No flow, `z·n = 0` (Γ_N^f).
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechBc {
    /// Roller, `u·n = 0` (Γ_D^p).
    Dirichlet,
    /// Prescribed traction (Γ_N^p).
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryMarker {
    pub flow: FlowBc,
    pub mech: MechBc,
}

/// Per-side boundary assignment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryRules {
    pub sides: [Option<BoundaryMarker>; 6],
}

impl BoundaryRules {
    pub fn uniform(flow: FlowBc, mech: MechBc) -> Self {
        Self { sides: [Some(BoundaryMarker { flow, mech }); 6] }
    }

    pub fn set(mut self, side: Side, flow: FlowBc, mech: MechBc) -> Self {
        self.sides[side.index()] = Some(BoundaryMarker { flow, mech });
        self
    }

    pub fn get(&self, side: Side) -> Option<BoundaryMarker> {
        self.sides[side.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxBounds {
    pub min: Point,
    pub max: Point,
}

impl BoxBounds {
    pub fn unit() -> Self {
        Self { min: [0.0; 3], max: [1.0; 3] }
    }

    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Vertices ordered so the right-hand normal is the face orientation.
    pub vertices: [usize; 4],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub axis: Axis,
    pub side: Option<Side>,
    pub marker: Option<BoundaryMarker>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct HexMesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 8]>,
    pub faces: Vec<Face>,
    /// Global face index for each local face (`-ξ, +ξ, -η, +η, -ζ, +ζ`).
    pub cell_faces: Vec<[usize; 6]>,
    pub dims: [usize; 3],
    pub bounds: BoxBounds,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic value in `[-0.5, 0.5)` for a vertex component.
fn perturbation(seed: u64, vertex: usize, component: usize) -> f64 {
    let h = splitmix64(seed ^ splitmix64((vertex as u64) * 3 + component as u64));
    (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Structured brick of `nx·ny·nz` cells. Interior vertices are shifted by
/// `distortion × spacing × r`, `r ∈ [-½, ½)` from a seeded hash, so box sides
/// stay planar.
pub fn generate_brick(
    nx: usize,
    ny: usize,
    nz: usize,
    bounds: BoxBounds,
    distortion: f64,
    seed: u64,
) -> Result<HexMesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::Mesh(format!("cell counts must be >= 1, got ({nx}, {ny}, {nz})")));
    }
    if !(0.0..1.0).contains(&distortion) {
        return Err(Error::Mesh(format!("distortion must lie in [0, 1), got {distortion}")));
    }
    for k in 0..3 {
        if !(bounds.max[k] > bounds.min[k]) {
            return Err(Error::Mesh("box bounds must satisfy min < max".into()));
        }
    }
    let n = [nx, ny, nz];
    let h: [f64; 3] = std::array::from_fn(|k| (bounds.max[k] - bounds.min[k]) / n[k] as f64);
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let cid = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let idx = [i, j, k];
                let mut p: Point = std::array::from_fn(|a| bounds.min[a] + idx[a] as f64 * h[a]);
                let interior = (0..3).all(|a| idx[a] > 0 && idx[a] < n[a]);
                if interior && distortion > 0.0 {
                    let v = vertices.len();
                    for a in 0..3 {
                        p[a] += distortion * h[a] * perturbation(seed, v, a);
                    }
                }
                vertices.push(p);
            }
        }
    }

    let mut cells = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells.push([
                    vid(i, j, k),
                    vid(i + 1, j, k),
                    vid(i + 1, j + 1, k),
                    vid(i, j + 1, k),
                    vid(i, j, k + 1),
                    vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1),
                    vid(i, j + 1, k + 1),
                ]);
            }
        }
    }

    let mut faces = Vec::new();
    let mut cell_faces = vec![[usize::MAX; 6]; cells.len()];
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let a = axis.index();
        let (min_side, max_side) = match axis {
            Axis::X => (Side::Left, Side::Right),
            Axis::Y => (Side::Front, Side::Back),
            Axis::Z => (Side::Bottom, Side::Top),
        };
        let mut counts = n;
        counts[a] += 1;
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let idx = [i, j, k];
                    let layer = idx[a];
                    let cell_at = |l: usize| {
                        let mut c = idx;
                        c[a] = l;
                        cid(c[0], c[1], c[2])
                    };
                    let (owner, neighbor, local, side) = if layer == 0 {
                        (cell_at(0), None, 2 * a, Some(min_side))
                    } else if layer == n[a] {
                        (cell_at(layer - 1), None, 2 * a + 1, Some(max_side))
                    } else {
                        (cell_at(layer - 1), Some(cell_at(layer)), 2 * a + 1, None)
                    };
                    let fid = faces.len();
                    let lv = LOCAL_FACES[local];
                    faces.push(Face {
                        vertices: lv.map(|v| cells[owner][v]),
                        owner,
                        neighbor,
                        axis,
                        side,
                        marker: None,
                    });
                    cell_faces[owner][local] = fid;
                    if let Some(nb) = neighbor {
                        cell_faces[nb][2 * a] = fid;
                    }
                }
            }
        }
    }

    let mesh = HexMesh { vertices, cells, faces, cell_faces, dims: n, bounds };
    mesh.check_jacobians()?;
    Ok(mesh)
}

/// Physical point and Jacobian `J_ij = ∂x_i/∂ξ_j` of the trilinear map.
pub fn trilinear_map(vertices: &[Point; 8], xi: &[f64; 3]) -> (Point, Matrix3<f64>) {
    let n = shape_functions(xi);
    let g = shape_gradients(xi);
    let mut x = [0.0; 3];
    let mut jac = Matrix3::zeros();
    for a in 0..8 {
        for i in 0..3 {
            x[i] += n[a] * vertices[a][i];
            for j in 0..3 {
                jac[(i, j)] += vertices[a][i] * g[a][j];
            }
        }
    }
    (x, jac)
}

/// Point, and tangent cross product `∂x/∂s × ∂x/∂t` on a bilinear face.
pub fn face_map(corners: &[Point; 4], st: &[f64; 2]) -> (Point, Vector3<f64>) {
    let (s, t) = (st[0], st[1]);
    let n = [
        0.25 * (1.0 - s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 + t),
        0.25 * (1.0 - s) * (1.0 + t),
    ];
    let ds = [-0.25 * (1.0 - t), 0.25 * (1.0 - t), 0.25 * (1.0 + t), -0.25 * (1.0 + t)];
    let dt = [-0.25 * (1.0 - s), -0.25 * (1.0 + s), 0.25 * (1.0 + s), 0.25 * (1.0 - s)];
    let mut x = [0.0; 3];
    let mut xs = Vector3::zeros();
    let mut xt = Vector3::zeros();
    for a in 0..4 {
        for i in 0..3 {
            x[i] += n[a] * corners[a][i];
            xs[i] += ds[a] * corners[a][i];
            xt[i] += dt[a] * corners[a][i];
        }
    }
    (x, xs.cross(&xt))
}

impl HexMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 8] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn face_corners(&self, face: usize) -> [Point; 4] {
        self.faces[face].vertices.map(|v| self.vertices[v])
    }

    /// `+1` if `cell` owns `face` (face orientation is outward for it), `-1` otherwise.
    pub fn orientation(&self, cell: usize, face: usize) -> f64 {
        if self.faces[face].owner == cell {
            1.0
        } else {
            -1.0
        }
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_boundary()).map(|(i, _)| i)
    }

    /// Vector area `∫_f n dA` of a face, along its orientation. Exact for bilinear faces.
    pub fn face_area_vector(&self, face: usize) -> Vector3<f64> {
        let [a, b, c, d] = self.face_corners(face).map(Vector3::from);
        0.5 * (c - a).cross(&(d - b))
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        trilinear_map(&self.cell_vertices(cell), &[0.0; 3]).0
    }

    /// Largest vertex-to-vertex distance in the cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let v = self.cell_vertices(cell);
        let mut d: f64 = 0.0;
        for a in 0..8 {
            for b in a + 1..8 {
                d = d.max((Vector3::from(v[a]) - Vector3::from(v[b])).norm());
            }
        }
        d
    }

    /// Mesh size `h = max_E diam(E)`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    pub fn check_jacobians(&self) -> Result<()> {
        let pts = gauss_points_3d();
        for c in 0..self.n_cells() {
            let verts = self.cell_vertices(c);
            for xi in pts.iter().chain(REF_VERTICES.iter()) {
                let det = trilinear_map(&verts, xi).1.determinant();
                if !(det > 0.0) {
                    return Err(Error::Jacobian { cell: c, det });
                }
            }
        }
        Ok(())
    }

    /// Attaches flow and mechanics markers to every boundary face.
    pub fn classify_boundary(mut self, rules: &BoundaryRules) -> Result<Self> {
        for side in Side::ALL {
            let marker = rules
                .get(side)
                .ok_or_else(|| Error::Boundary(format!("side `{side}` has no boundary assignment")))?;
            if marker.mech == MechBc::Dirichlet {
                let a = side.axis().index();
                let plane = if side.is_max() { self.bounds.max[a] } else { self.bounds.min[a] };
                let tol = 1e-12 * (self.bounds.max[a] - self.bounds.min[a]);
                let planar = self
                    .faces
                    .iter()
                    .filter(|f| f.side == Some(side))
                    .all(|f| f.vertices.iter().all(|&v| (self.vertices[v][a] - plane).abs() <= tol));
                if !planar {
                    return Err(Error::Boundary(format!(
                        "mechanics Dirichlet requested on non-axis-aligned side `{side}`"
                    )));
                }
            }
        }
        for f in self.faces.iter_mut() {
            if let Some(side) = f.side {
                f.marker = rules.get(side);
            }
        }
        Ok(self)
    }

    pub fn count_faces(&self, pred: impl Fn(&BoundaryMarker) -> bool) -> usize {
        self.faces.iter().filter(|f| f.marker.as_ref().is_some_and(&pred)).count()
    }
}

/// Geometry of one Gauss point of a cell.
#[derive(Clone, Debug)]
pub struct GaussPoint {
    pub xi: [f64; 3],
    pub x: Point,
    pub jac: Matrix3<f64>,
    pub det: f64,
    /// Quadrature weight times `det J`.
    pub weight: f64,
    pub shape: [f64; 8],
    /// Physical gradients `∂N_a/∂x_j`.
    pub grad: [[f64; 3]; 8],
}

impl GaussPoint {
    pub fn new(vertices: &[Point; 8], xi: [f64; 3], weight: f64, cell: usize) -> Result<Self> {
        let (x, jac) = trilinear_map(vertices, &xi);
        let det = jac.determinant();
        if !(det > 0.0) {
            return Err(Error::Jacobian { cell, det });
        }
        let inv = jac.try_inverse().ok_or(Error::Jacobian { cell, det })?;
        let gref = shape_gradients(&xi);
        let mut grad = [[0.0; 3]; 8];
        for a in 0..8 {
            for j in 0..3 {
                // ∂N/∂x_j = Σ_k ∂N/∂ξ_k ∂ξ_k/∂x_j
                grad[a][j] = (0..3).map(|k| gref[a][k] * inv[(k, j)]).sum();
            }
        }
        Ok(Self { xi, x, jac, det, weight: weight * det, shape: shape_functions(&xi), grad })
    }
}

/// Precomputed 2×2×2 quadrature data for every cell.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub points: Vec<[GaussPoint; 8]>,
    pub volumes: Vec<f64>,
}

pub const GP_PER_CELL: usize = 8;

impl Geometry {
    pub fn new(mesh: &HexMesh, policy: ExecPolicy) -> Result<Self> {
        let pts = gauss_points_3d();
        let per_cell = map_indexed(policy, mesh.n_cells(), |c| -> Result<[GaussPoint; 8]> {
            let verts = mesh.cell_vertices(c);
            let v: Vec<GaussPoint> =
                pts.iter().map(|xi| GaussPoint::new(&verts, *xi, 1.0, c)).collect::<Result<_>>()?;
            Ok(v.try_into().expect("eight Gauss points"))
        });
        let points: Vec<[GaussPoint; 8]> = per_cell.into_iter().collect::<Result<_>>()?;
        let volumes = points.iter().map(|gp| gp.iter().map(|g| g.weight).sum()).collect();
        Ok(Self { points, volumes })
    }

    pub fn n_gauss(&self) -> usize {
        self.points.len() * GP_PER_CELL
    }

    /// Flat index of Gauss point `q` in `cell`.
    #[inline]
    pub fn gp(cell: usize, q: usize) -> usize {
        cell * GP_PER_CELL + q
    }

    /// Quadrature weights in flat Gauss-point order.
    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().flat_map(|c| c.iter().map(|g| g.weight)).collect()
    }
}

/// Degree-of-freedom numbering: `[pressures | fluxes | displacements]`.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_cells: usize,
    pub n_faces: usize,
    pub n_vertices: usize,
    /// `true` for displacement components fixed by a roller (`u·n = 0`).
    pub constrained: Vec<bool>,
    /// `true` for fluxes fixed to zero on no-flow faces.
    pub flux_fixed: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &HexMesh) -> Result<Self> {
        let mut constrained = vec![false; 3 * mesh.n_vertices()];
        let mut flux_fixed = vec![false; mesh.n_faces()];
        for (fid, f) in mesh.faces.iter().enumerate() {
            if !f.is_boundary() {
                continue;
            }
            let marker = f
                .marker
                .ok_or_else(|| Error::Boundary(format!("boundary face {fid} carries no marker")))?;
            if marker.flow == FlowBc::Neumann {
                flux_fixed[fid] = true;
            }
            if marker.mech == MechBc::Dirichlet {
                for &v in &f.vertices {
                    constrained[3 * v + f.axis.index()] = true;
                }
            }
        }
        Ok(Self { n_cells: mesh.n_cells(), n_faces: mesh.n_faces(), n_vertices: mesh.n_vertices(), constrained, flux_fixed })
    }

    pub fn pressure(&self, cell: usize) -> usize {
        cell
    }

    pub fn flux(&self, face: usize) -> usize {
        self.n_cells + face
    }

    pub fn displacement(&self, vertex: usize, component: usize) -> usize {
        self.n_cells + self.n_faces + 3 * vertex + component
    }

    pub fn n_displacement(&self) -> usize {
        3 * self.n_vertices
    }

    pub fn total(&self) -> usize {
        self.n_cells + self.n_faces + 3 * self.n_vertices
    }
}
