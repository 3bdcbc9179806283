//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! block = [
//!   row
//!   row
//! ]
//! ```
//!
//! Sections: `mesh`, `boundary`, `material`, `time`, `coupling`, `scenario`,
//! `output`. Unknown sections and keys are rejected with their line number;
//! every value is validated at parse time. Vector values are whitespace
//! separated. Symmetric tensors are listed as `xx yy zz yz xz xy`; the
//! optional `stiffness` block holds six rows of the 6×6 Voigt matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix6};

use crate::coupling::{ConvergenceTolerances, CouplingControls, PressureBc, Scenario, Simulation, Source};
use crate::error::{Error, Result};
use crate::material::{MaterialModel, Plasticity};
use crate::mech::Tractions;
use crate::mesh::{generate_brick, BoundaryRules, BoxBounds, FlowBc, MechBc, Side};
use crate::par::ExecPolicy;
use crate::tensor::{SymTensor2, Tensor4};

const SECTIONS: [&str; 7] = ["mesh", "boundary", "material", "time", "coupling", "scenario", "output"];

#[derive(Clone, Debug, PartialEq)]
pub struct MeshConfig {
    pub n: [usize; 3],
    pub bounds: BoxBounds,
    pub distortion: f64,
    pub seed: u64,
    /// Flow and mechanics condition per side, indexed by [`Side::index`].
    pub sides: [(FlowBc, MechBc); 6],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub initial_pressure: f64,
    pub gravity: bool,
    pub pressure: [Option<f64>; 6],
    pub tractions: Tractions,
    /// Uniform volumetric source rate (1/s).
    pub source: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    /// Write a VTK snapshot every this many steps; 0 disables field output.
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub material: MaterialModel,
    pub time: TimeConfig,
    pub coupling: CouplingControls,
    pub scenario: ScenarioConfig,
    pub output: OutputConfig,
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: Value,
}

#[derive(Debug)]
enum Value {
    Scalar(String),
    Block(Vec<(usize, String)>),
}

/// `section → key → entry`, with every key consumed exactly once.
struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l).trim()));
        while let Some((line, raw)) = lines.next() {
            if raw.is_empty() {
                continue;
            }
            if let Some(rest) = raw.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line, message: format!("malformed section header `{raw}`") })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line, message: format!("unknown section `[{name}]`") });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = raw.split_once('=') else {
                return Err(Error::Parse { line, message: format!("expected `key = value`, found `{raw}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.clone() else {
                return Err(Error::Parse { line, message: format!("key `{key}` outside of any [section]") });
            };
            if key.is_empty() {
                return Err(Error::Parse { line, message: "empty key".into() });
            }
            let value = if value == "[" {
                let mut rows = Vec::new();
                loop {
                    match lines.next() {
                        Some((_, "]")) => break,
                        Some((l, row)) if !row.is_empty() => rows.push((l, row.to_string())),
                        Some(_) => {}
                        None => return Err(Error::Parse { line, message: format!("unterminated block `{key}`") }),
                    }
                }
                Value::Block(rows)
            } else {
                Value::Scalar(value.to_string())
            };
            let k = (sec.clone(), key.to_string());
            if entries.contains_key(&k) {
                return Err(Error::Parse { line, message: format!("duplicate key `{key}` in [{sec}]") });
            }
            entries.insert(k, Entry { line, value });
        }
        Ok(Self { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn scalar<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<(usize, T)>> {
        let Some(entry) = self.take(section, key) else { return Ok(None) };
        match entry.value {
            Value::Scalar(s) => parse_token(&s, entry.line, key).map(|v| Some((entry.line, v))),
            Value::Block(_) => Err(Error::Parse { line: entry.line, message: format!("`{key}` expects a single value") }),
        }
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.scalar(section, key)?.map_or(default, |(_, v)| v))
    }

    fn vector(&mut self, section: &str, key: &str) -> Result<Option<(usize, Vec<f64>)>> {
        let Some(entry) = self.take(section, key) else { return Ok(None) };
        match entry.value {
            Value::Scalar(s) => {
                let v = s.split_whitespace().map(|t| parse_token(t, entry.line, key)).collect::<Result<Vec<f64>>>()?;
                Ok(Some((entry.line, v)))
            }
            Value::Block(_) => Err(Error::Parse { line: entry.line, message: format!("`{key}` expects a vector") }),
        }
    }

    fn fixed<const N: usize>(&mut self, section: &str, key: &str, default: [f64; N]) -> Result<[f64; N]> {
        match self.vector(section, key)? {
            None => Ok(default),
            Some((line, v)) => v.try_into().map_err(|v: Vec<f64>| Error::Parse {
                line,
                message: format!("`{key}` expects {N} values, got {}", v.len()),
            }),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some(((sec, key), e)) => Err(Error::Parse { line: e.line, message: format!("unknown key `{key}` in [{sec}]") }),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_token<T: FromStr>(s: &str, line: usize, key: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse { line, message: format!("cannot parse `{s}` for `{key}`") })
}

fn parse_bool(s: &str, line: usize, key: &str) -> Result<bool> {
    match s {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(Error::Parse { line, message: format!("`{key}` expects on/off, got `{s}`") }),
    }
}

fn sym_from(v: &[f64], line: usize, key: &str) -> Result<SymTensor2> {
    match *v {
        [a] => Ok(SymTensor2::identity() * a),
        [xx, yy, zz] => Ok(SymTensor2::diag(xx, yy, zz)),
        [xx, yy, zz, yz, xz, xy] => Ok(SymTensor2::from_components(xx, yy, zz, yz, xz, xy)),
        _ => Err(Error::Parse { line, message: format!("`{key}` expects 1, 3 or 6 values, got {}", v.len()) }),
    }
}

/// Voigt stiffness (engineering shear strains) to the Mandel representation.
pub fn voigt_to_mandel(c: &Matrix6<f64>) -> Tensor4 {
    let w = |i: usize| if i < 3 { 1.0 } else { std::f64::consts::SQRT_2 };
    Tensor4::from_mandel(Matrix6::from_fn(|i, j| c[(i, j)] * w(i) * w(j)))
}

fn parse_side_bc(s: &str, line: usize, key: &str) -> Result<(FlowBc, MechBc)> {
    let mut flow = None;
    let mut mech = None;
    for t in s.split_whitespace() {
        match t {
            "pressure" => flow = Some(FlowBc::Dirichlet),
            "noflow" => flow = Some(FlowBc::Neumann),
            "roller" => mech = Some(MechBc::Dirichlet),
            "traction" => mech = Some(MechBc::Neumann),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("`{key}`: unknown condition `{t}` (pressure|noflow, roller|traction)"),
                })
            }
        }
    }
    match (flow, mech) {
        (Some(f), Some(m)) => Ok((f, m)),
        _ => Err(Error::Parse { line, message: format!("`{key}` needs one flow and one mechanics condition") }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::parse(text)?;

        let n = [t.get("mesh", "nx", 4usize)?, t.get("mesh", "ny", 4usize)?, t.get("mesh", "nz", 4usize)?];
        let min = t.fixed("mesh", "min", [0.0; 3])?;
        let max = t.fixed("mesh", "max", [1.0; 3])?;
        let distortion = t.get("mesh", "distortion", 0.0)?;
        let seed = t.get("mesh", "seed", 0u64)?;
        if n.contains(&0) {
            return Err(Error::config("nx", "cell counts must be >= 1"));
        }
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(Error::config("max", "box must have max > min in every direction"));
        }
        if !(0.0..0.5).contains(&distortion) {
            return Err(Error::config("distortion", format!("must lie in [0, 0.5), got {distortion}")));
        }
        let mut sides = [(FlowBc::Neumann, MechBc::Dirichlet); 6];
        for side in Side::ALL {
            if let Some(e) = t.take("boundary", side.name()) {
                let Value::Scalar(s) = e.value else {
                    return Err(Error::Parse { line: e.line, message: "boundary entries are single lines".into() });
                };
                sides[side.index()] = parse_side_bc(&s, e.line, side.name())?;
            }
        }

        let material = parse_material(&mut t)?;

        let time = TimeConfig { dt: t.get("time", "dt", 1.0)?, n_steps: t.get("time", "n_steps", 1usize)? };
        if !(time.dt > 0.0 && time.dt.is_finite()) {
            return Err(Error::config("dt", format!("must be > 0, got {}", time.dt)));
        }

        let defaults = CouplingControls::default();
        let tol = t.get("coupling", "tol", defaults.convergence.tol)?;
        let coupling = CouplingControls {
            convergence: ConvergenceTolerances {
                tol,
                tol_bracket: t.get("coupling", "tol_bracket", defaults.convergence.tol_bracket)?,
                bracket_abs_tol: t.get("coupling", "bracket_abs_tol", defaults.convergence.bracket_abs_tol)?,
            },
            max_iterations: t.get("coupling", "max_coupling_iters", defaults.max_iterations)?,
            newton_tol: t.get("coupling", "newton_tol", defaults.newton_tol)?,
            newton_max_iter: t.get("coupling", "newton_max_iter", defaults.newton_max_iter)?,
            equilibrate: match t.scalar::<String>("coupling", "equilibrate")? {
                Some((line, s)) => parse_bool(&s, line, "equilibrate")?,
                None => defaults.equilibrate,
            },
        };
        for (field, v) in [
            ("tol", coupling.convergence.tol),
            ("tol_bracket", coupling.convergence.tol_bracket),
            ("newton_tol", coupling.newton_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(field, format!("must lie in (0, 1), got {v}")));
            }
        }
        if coupling.max_iterations < 2 {
            return Err(Error::config("max_coupling_iters", "must be >= 2"));
        }

        let gravity = match t.scalar::<String>("scenario", "gravity")? {
            Some((line, s)) => parse_bool(&s, line, "gravity")?,
            None => false,
        };
        let mut scenario = ScenarioConfig {
            initial_pressure: t.get("scenario", "initial_pressure", 0.0)?,
            gravity,
            pressure: [None; 6],
            tractions: [None; 6],
            source: t.get("scenario", "source", 0.0)?,
        };
        for side in Side::ALL {
            let i = side.index();
            if let Some((line, p)) = t.scalar::<f64>("scenario", &format!("pressure.{}", side.name()))? {
                if sides[i].0 != FlowBc::Dirichlet {
                    return Err(Error::Parse { line, message: format!("pressure given on no-flow side `{side}`") });
                }
                scenario.pressure[i] = Some(p);
            }
            let key = format!("traction.{}", side.name());
            if let Some((line, _)) = t.entries.get(&("scenario".into(), key.clone())).map(|e| (e.line, ())) {
                let v = t.fixed("scenario", &key, [0.0; 3])?;
                if sides[i].1 != MechBc::Neumann {
                    return Err(Error::Parse { line, message: format!("traction given on roller side `{side}`") });
                }
                scenario.tractions[i] = Some(v);
            }
        }
        for side in Side::ALL {
            if sides[side.index()].0 == FlowBc::Dirichlet && scenario.pressure[side.index()].is_none() {
                scenario.pressure[side.index()] = Some(scenario.initial_pressure);
            }
        }

        let output = OutputConfig {
            directory: t.get("output", "directory", "out".to_string())?,
            snapshot_every: t.get("output", "snapshot_every", 0usize)?,
        };
        t.finish()?;

        let mut material = material;
        if !gravity {
            material.gravity = [0.0; 3];
        }
        Ok(Self {
            mesh: MeshConfig { n, bounds: BoxBounds::new(min, max), distortion, seed, sides },
            material,
            time,
            coupling,
            scenario,
            output,
        })
    }

    pub fn rules(&self) -> BoundaryRules {
        let (f, m) = self.mesh.sides[0];
        Side::ALL.into_iter().fold(BoundaryRules::uniform(f, m), |r, side| {
            let (f, m) = self.mesh.sides[side.index()];
            r.set(side, f, m)
        })
    }

    /// Builds the simulation and its time steps.
    pub fn build(&self, policy: ExecPolicy) -> Result<(Simulation, Vec<f64>)> {
        let m = &self.mesh;
        let mesh = generate_brick(m.n[0], m.n[1], m.n[2], m.bounds, m.distortion, m.seed)?.classify_boundary(&self.rules())?;
        let scenario = Scenario {
            pressure: PressureBc::Constant(self.scenario.pressure),
            tractions: self.scenario.tractions,
            source: if self.scenario.source == 0.0 { Source::None } else { Source::Uniform(self.scenario.source) },
            initial_pressure: self.scenario.initial_pressure,
        };
        let sim = Simulation::new(mesh, self.material.clone(), scenario, self.coupling, policy)?;
        Ok((sim, vec![self.time.dt; self.time.n_steps]))
    }

    /// Every resolved configuration value as `section.key = value`, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let m = &self.mesh;
        put("mesh.nx", m.n[0].to_string());
        put("mesh.ny", m.n[1].to_string());
        put("mesh.nz", m.n[2].to_string());
        put("mesh.min", join(&m.bounds.min));
        put("mesh.max", join(&m.bounds.max));
        put("mesh.distortion", m.distortion.to_string());
        put("mesh.seed", m.seed.to_string());
        for side in Side::ALL {
            let (f, mb) = m.sides[side.index()];
            let f = if f == FlowBc::Dirichlet { "pressure" } else { "noflow" };
            let mb = if mb == MechBc::Dirichlet { "roller" } else { "traction" };
            put(&format!("boundary.{}", side.name()), format!("{f} {mb}"));
        }
        let mat = &self.material;
        let mut rows = String::new();
        for i in 0..6 {
            let _ = write!(rows, "{}{}", if i > 0 { "; " } else { "" }, join(&mat.stiffness.mandel().row(i).iter().copied().collect::<Vec<_>>()));
        }
        put("material.stiffness_mandel", rows);
        put("material.biot", join(&mat.biot.to_array()));
        put("material.biot_modulus", mat.biot_modulus.to_string());
        put("material.permeability", join(mat.permeability.as_slice()));
        put("material.viscosity", mat.viscosity.to_string());
        put("material.fluid_compressibility", mat.fluid_compressibility.to_string());
        put("material.fluid_density", mat.fluid_density.to_string());
        put("material.rock_density", mat.rock_density.to_string());
        put("material.porosity", mat.porosity.to_string());
        put("material.gravity", join(&mat.gravity));
        put("material.plasticity", format!("{:?}", mat.plasticity));
        put("time.dt", self.time.dt.to_string());
        put("time.n_steps", self.time.n_steps.to_string());
        let c = &self.coupling;
        put("coupling.tol", c.convergence.tol.to_string());
        put("coupling.tol_bracket", c.convergence.tol_bracket.to_string());
        put("coupling.bracket_abs_tol", c.convergence.bracket_abs_tol.to_string());
        put("coupling.max_coupling_iters", c.max_iterations.to_string());
        put("coupling.newton_tol", c.newton_tol.to_string());
        put("coupling.newton_max_iter", c.newton_max_iter.to_string());
        put("coupling.equilibrate", c.equilibrate.to_string());
        let s = &self.scenario;
        put("scenario.initial_pressure", s.initial_pressure.to_string());
        put("scenario.gravity", s.gravity.to_string());
        put("scenario.source", s.source.to_string());
        for side in Side::ALL {
            if let Some(p) = s.pressure[side.index()] {
                put(&format!("scenario.pressure.{}", side.name()), p.to_string());
            }
            if let Some(tr) = s.tractions[side.index()] {
                put(&format!("scenario.traction.{}", side.name()), join(&tr));
            }
        }
        put("output.directory", self.output.directory.clone());
        put("output.snapshot_every", self.output.snapshot_every.to_string());
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_material(t: &mut Table) -> Result<MaterialModel> {
    let young = t.get("material", "young", 1.0e9)?;
    let poisson = t.get("material", "poisson", 0.25)?;
    if !(young > 0.0) {
        return Err(Error::material("young", format!("must be > 0, got {young}")));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::material("poisson", format!("must lie in (-1, 0.5), got {poisson}")));
    }
    let mut model = MaterialModel::isotropic(young, poisson, 0.8, 1.0e9, 1.0e-12);
    if let Some(e) = t.take("material", "stiffness") {
        let Value::Block(rows) = e.value else {
            return Err(Error::Parse { line: e.line, message: "`stiffness` expects a block of 6 rows".into() });
        };
        if rows.len() != 6 {
            return Err(Error::Parse { line: e.line, message: format!("`stiffness` needs 6 rows, got {}", rows.len()) });
        }
        let mut c = Matrix6::zeros();
        for (i, (line, row)) in rows.iter().enumerate() {
            let vals = row.split_whitespace().map(|s| parse_token(s, *line, "stiffness")).collect::<Result<Vec<f64>>>()?;
            if vals.len() != 6 {
                return Err(Error::Parse { line: *line, message: format!("stiffness row needs 6 values, got {}", vals.len()) });
            }
            for (j, v) in vals.into_iter().enumerate() {
                c[(i, j)] = v;
            }
        }
        model.stiffness = voigt_to_mandel(&c);
    }
    if let Some((line, v)) = t.vector("material", "biot")? {
        model.biot = sym_from(&v, line, "biot")?;
    }
    model.biot_modulus = t.get("material", "biot_modulus", model.biot_modulus)?;
    if let Some((line, v)) = t.vector("material", "permeability")? {
        let k = sym_from(&v, line, "permeability")?;
        model.permeability = Matrix3::from_fn(|i, j| k.get(i, j));
    }
    model.viscosity = t.get("material", "viscosity", model.viscosity)?;
    model.fluid_compressibility = t.get("material", "fluid_compressibility", model.fluid_compressibility)?;
    model.fluid_density = t.get("material", "fluid_density", model.fluid_density)?;
    model.rock_density = t.get("material", "rock_density", model.rock_density)?;
    model.porosity = t.get("material", "porosity", model.porosity)?;
    let kind = t.get("material", "plasticity", "none".to_string())?;
    let yield_stress = t.get("material", "yield_stress", 1.0e6)?;
    let hardening = t.get("material", "hardening", 0.0)?;
    let friction = t.get("material", "friction", 0.0)?;
    let beta_p = t.get("material", "beta_p", 1.0)?;
    model.plasticity = match kind.as_str() {
        "none" => Plasticity::None,
        "von_mises" => Plasticity::VonMises { yield_stress, hardening, beta_p },
        "drucker_prager" => Plasticity::DruckerPrager { yield_stress, hardening, friction, beta_p },
        other => return Err(Error::config("plasticity", format!("unknown model `{other}` (none|von_mises|drucker_prager)"))),
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.mesh.n, [4, 4, 4]);
        assert_eq!(cfg.time, TimeConfig { dt: 1.0, n_steps: 1 });
        assert_eq!(cfg.coupling, CouplingControls::default());
        assert_eq!(cfg.material.gravity, [0.0; 3]);
        assert_eq!(cfg.material.biot_modulus, 1.0e9);
        assert!(cfg.mesh.sides.iter().all(|s| *s == (FlowBc::Neumann, MechBc::Dirichlet)));
        assert_eq!(cfg.output.snapshot_every, 0);
    }

    #[test]
    fn negative_biot_modulus_names_the_field() {
        let err = RunConfig::parse("[material]\nbiot_modulus = -1\n").unwrap_err();
        assert!(matches!(&err, Error::Material { field, .. } if field == "biot_modulus"), "{err}");
    }

    #[test]
    fn stiffness_block_row_count_is_checked() {
        let text = "[material]\nstiffness = [\n1 0 0 0 0 0\n0 1 0 0 0 0\n]\n";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn voigt_stiffness_block_matches_isotropic() {
        let (l, mu) = (4.0e8, 4.0e8);
        let mut text = String::from("[material]\nstiffness = [\n");
        for i in 0..6 {
            let row: Vec<String> = (0..6)
                .map(|j| {
                    let v = if i < 3 && j < 3 { l + if i == j { 2.0 * mu } else { 0.0 } } else if i == j { mu } else { 0.0 };
                    v.to_string()
                })
                .collect();
            text += &row.join(" ");
            text.push('\n');
        }
        text += "]\n";
        let cfg = RunConfig::parse(&text).unwrap();
        let expect = Tensor4::isotropic(l + 2.0 * mu / 3.0, mu);
        assert!((cfg.material.stiffness.mandel() - expect.mandel()).amax() < 1e-6);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[time]\ndt = 2\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = RunConfig::parse("[nope]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = RunConfig::parse("dt = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn boundary_and_scenario_entries() {
        let text = "\
[boundary]
left = pressure roller
top = noflow traction   # loaded
[scenario]
initial_pressure = 5
pressure.left = 1
traction.top = 0 0 -3
gravity = on
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.mesh.sides[Side::Left.index()], (FlowBc::Dirichlet, MechBc::Dirichlet));
        assert_eq!(cfg.mesh.sides[Side::Top.index()], (FlowBc::Neumann, MechBc::Neumann));
        assert_eq!(cfg.scenario.pressure[Side::Left.index()], Some(1.0));
        assert_eq!(cfg.scenario.tractions[Side::Top.index()], Some([0.0, 0.0, -3.0]));
        assert_eq!(cfg.material.gravity, [0.0, 0.0, -9.81]);
        let (sim, dts) = cfg.build(ExecPolicy::Sequential).unwrap();
        assert_eq!(dts, vec![1.0]);
        assert_eq!(sim.mesh.n_cells(), 64);
    }

    #[test]
    fn inconsistent_side_data_is_rejected() {
        let err = RunConfig::parse("[scenario]\ntraction.top = 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = RunConfig::parse("[scenario]\npressure.left = 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = RunConfig::parse("[boundary]\nleft = wet roller\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_and_malformed_values() {
        assert!(matches!(RunConfig::parse("[time]\ndt=1\ndt=2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(RunConfig::parse("[time]\ndt = abc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(RunConfig::parse("[mesh]\nmin = 0 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(RunConfig::parse("[time]\ndt = -1\n"), Err(Error::Config { .. })));
        assert!(matches!(RunConfig::parse("[material]\nplasticity = cam_clay\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn echo_is_complete_and_stable() {
        let cfg = RunConfig::parse("[material]\nplasticity = von_mises\nyield_stress = 3e6\n").unwrap();
        let a = cfg.echo();
        assert_eq!(a, cfg.echo());
        assert!(a.iter().any(|(k, v)| k == "material.plasticity" && v.contains("3000000")));
        assert!(a.iter().any(|(k, _)| k == "coupling.tol"));
    }
}
