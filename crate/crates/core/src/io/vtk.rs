//! Legacy ASCII VTK output (`DATASET UNSTRUCTURED_GRID`, hexahedra).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::coupling::SplitState;
use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::mesh::{HexMesh, GP_PER_CELL};

const VTK_HEXAHEDRON: u8 = 12;

/// Renders cell pressure, point displacement, cell-averaged stress
/// invariants (mean stress, von Mises), plastic porosity and the fluid density
/// `ρ₀(1 + c(p − p_ref))` of `state`.
pub fn render_vtk(state: &SplitState, mesh: &HexMesh, model: &MaterialModel, p_ref: f64) -> Result<String> {
    let (nc, nv) = (mesh.n_cells(), mesh.n_vertices());
    if state.p.len() != nc || state.u.len() != 3 * nv || state.gauss.len() != nc * GP_PER_CELL {
        return Err(Error::Dimension("state does not match the mesh".into()));
    }
    let mut s = String::new();
    // Writing into a String cannot fail.
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "fixed-stress level {} t={:e}", state.time_level, state.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 9 * nc);
    for c in &mesh.cells {
        let _ = writeln!(s, "8 {}", c.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        let _ = writeln!(s, "{VTK_HEXAHEDRON}");
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for p in &state.p {
        let _ = writeln!(s, "{p:e}");
    }
    let cell_avg = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..nc).map(|c| (0..GP_PER_CELL).map(|q| f(c * GP_PER_CELL + q)).sum::<f64>() / GP_PER_CELL as f64).collect()
    };
    let mean = cell_avg(&|i| state.gauss[i].sigma.trace() / 3.0);
    let mises = cell_avg(&|i| state.gauss[i].sigma.von_mises());
    let phi = cell_avg(&|i| state.gauss[i].phi_p);
    let rho: Vec<f64> = state.p.iter().map(|&p| model.density(p, p_ref)).collect();
    for (name, field) in
        [("mean_stress", &mean), ("von_mises_stress", &mises), ("plastic_porosity", &phi), ("fluid_density", &rho)]
    {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in field {
            let _ = writeln!(s, "{v:e}");
        }
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    let _ = writeln!(s, "VECTORS displacement double");
    for u in state.u.chunks_exact(3) {
        let _ = writeln!(s, "{:e} {:e} {:e}", u[0], u[1], u[2]);
    }
    Ok(s)
}

pub fn write_vtk(state: &SplitState, mesh: &HexMesh, model: &MaterialModel, p_ref: f64, path: &Path) -> Result<()> {
    fs::write(path, render_vtk(state, mesh, model, p_ref)?)?;
    Ok(())
}
