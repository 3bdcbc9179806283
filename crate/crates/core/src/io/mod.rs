//! Configuration input, VTK field output and CSV reports.

pub mod config;
pub mod csv;
pub mod vtk;

pub use config::RunConfig;
pub use csv::{parse_csv, render_reports, render_steps, render_summary, CsvTable};
pub use vtk::{render_vtk, write_vtk};
