//! Line-oriented `section.key = value` experiment configuration.

use cavity_core::coupled_solver::{InitialVelocity, SolverConfig};
use cavity_core::geometry::{CavityShape, MAX_CYLINDER_REFINEMENT, MAX_ELLIPSOID_REFINEMENT};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}: {msg}")]
    Syntax {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error("{key}: unknown key")]
    UnknownKey { key: String },
    #[error("{key} = {value}: {msg}")]
    Invalid {
        key: String,
        value: String,
        msg: String,
    },
    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}

impl ConfigError {
    fn invalid(key: &str, value: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            value: value.to_string(),
            msg: msg.into(),
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "mesh.shape",
    "mesh.semi_axes",
    "mesh.radius",
    "mesh.height",
    "mesh.file",
    "mesh.refinement",
    "liquid.rho",
    "liquid.nu",
    "body.inertia",
    "body.values",
    "initial.omega",
    "initial.theta",
    "initial.phi",
    "initial.magnitude",
    "initial.frame",
    "initial.velocity",
    "initial.beta",
    "solver.tau",
    "solver.t_end",
    "solver.theta",
    "solver.sigma",
    "solver.epsilon",
    "solver.max_subiters",
    "solver.relax_against",
    "solver.old_torque",
    "solver.body_inertia",
    "solver.convection",
    "solver.pressure",
    "solver.refactor",
    "solver.max_peclet",
    "output.dir",
    "output.plots",
    "experiment.kind",
    "experiment.nu_values",
    "experiment.spin",
    "checks.energy",
    "checks.energy_tol",
    "checks.momentum",
    "checks.momentum_tol",
];

/// Raw key/value assignments, later ones overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    /// directory relative paths are resolved against
    base: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |msg: String| ConfigError::Syntax {
                source_name: source_name.to_string(),
                line: line_no,
                msg,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `section.key = value`, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(syntax(format!("key {key:?} has no section")));
            }
            if value.is_empty() {
                return Err(syntax(format!("{key} has an empty value")));
            }
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(syntax(format!("{key} already set on line {prev}")));
            }
            raw.set(key, value)?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let mut raw = RawConfig::parse(&text, &path.display().to_string())?;
        raw.base = path.parent().map(Path::to_path_buf);
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
            });
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `other` on top of `self`.
    pub fn merge(&mut self, other: RawConfig) {
        self.values.extend(other.values);
        if other.base.is_some() {
            self.base = other.base;
        }
    }

    /// `key=value` as given on the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            ConfigError::invalid(assignment, "", "expected key=value")
        })?;
        self.set(key.trim(), value)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Number, optionally written with `pi`: `0.5`, `pi`, `-pi/48`, `2*pi`, `3pi/4`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{s:?} is not finite"))
        };
    }
    let bad = || format!("{s:?} is not a number");
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let factor = num.strip_suffix("pi").ok_or_else(bad)?.trim();
    let factor = factor.strip_suffix('*').unwrap_or(factor).trim();
    let k = match factor {
        "" => 1.0,
        "-" => -1.0,
        f => f.parse::<f64>().map_err(|_| bad())?,
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(k * PI / den)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_number).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("{s:?} is not a boolean (true|false)")),
    }
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodySpec {
    /// eigenvalues of the total tensor `I_B + I_L`
    TargetTotal([f64; 3]),
    /// shell tensor, body frame, row-major
    Explicit([f64; 9]),
    /// shell chosen so that the total tensor is `λ𝟙`
    Isotropic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaSpec {
    Components([f64; 3]),
    /// `magnitude·[cos θ, cos φ sin θ, sin φ sin θ]`
    Angles { theta: f64, phi: f64, magnitude: f64 },
}

impl OmegaSpec {
    pub fn components(&self) -> [f64; 3] {
        match *self {
            OmegaSpec::Components(w) => w,
            OmegaSpec::Angles {
                theta,
                phi,
                magnitude,
            } => [
                magnitude * theta.cos(),
                magnitude * phi.cos() * theta.sin(),
                magnitude * phi.sin() * theta.sin(),
            ],
        }
    }
}

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($variant),+
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("unknown value {s:?} (expected {})", [$($text),+].join("|"))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($name::$variant => $text),+
                })
            }
        }
    };
}

text_enum!(Frame {
    Eigen => "eigen",
    Body => "body",
});

text_enum!(ExperimentKind {
    Run => "run",
    SweepNu => "sweep-nu",
    Attainability => "attainability",
    Stability => "stability-perturbation",
    FlipOver => "flip-over",
});

#[derive(Debug, Clone, PartialEq)]
pub struct Checks {
    pub energy: bool,
    /// per-step tolerance on the increase of ℰ, relative to ℰ(0)
    pub energy_tol: f64,
    pub momentum: bool,
    /// largest relative drift of `|I·ω∞|`
    pub momentum_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub shape: CavityShape,
    pub refinement: u32,
    pub body: BodySpec,
    pub omega: OmegaSpec,
    /// frame of the `initial.omega` components
    pub frame: Frame,
    pub velocity: InitialVelocity,
    /// also carries `liquid.rho` and `liquid.nu`
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub plots: bool,
    pub kind: ExperimentKind,
    /// viscosities of `sweep-nu` and `flip-over`; empty means `liquid.nu` only
    pub nu_values: Vec<f64>,
    /// reference permanent rotation `ω₀ e₃` of the stability experiment
    pub spin: f64,
    pub checks: Checks,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            shape: CavityShape::Ellipsoid {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            },
            refinement: 0,
            body: BodySpec::TargetTotal([2.2, 2.2, 2.8]),
            omega: OmegaSpec::Components([0.0, 0.0, 1.0]),
            frame: Frame::Eigen,
            velocity: InitialVelocity::Zero,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            plots: true,
            kind: ExperimentKind::Run,
            nu_values: Vec::new(),
            spin: 0.0,
            checks: Checks {
                energy: true,
                energy_tol: 1e-8,
                momentum: true,
                momentum_tol: 0.01,
            },
        }
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn value<T>(
        &self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, ConfigError> {
        match self.raw.get(key) {
            None => Ok(default),
            Some(v) => parse(v).map_err(|m| ConfigError::invalid(key, v, m)),
        }
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.value(key, default, parse_number)
    }

    fn parsed<T: FromStr<Err = String>>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        self.value(key, default, |s| s.parse())
    }

    fn integer(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.value(key, default, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("{s:?} is not a non-negative integer"))
        })
    }

    fn array<const N: usize>(&self, key: &str, default: [f64; N]) -> Result<[f64; N], ConfigError> {
        self.value(key, default, |s| {
            let v = parse_list(s)?;
            v.try_into()
                .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
        })
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.raw.get(key)
    }
}

/// Range check naming the key and the admissible interval.
fn check(key: &str, value: f64, ok: bool, bound: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, &value.to_string(), format!("must lie in {bound}")))
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
        let r = Reader { raw };
        let d = ExperimentConfig::default();
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match &raw.base {
                Some(base) if p.is_relative() && !base.as_os_str().is_empty() => base.join(p),
                _ => p,
            }
        };

        let shape_name = r.text("mesh.shape").unwrap_or("ellipsoid");
        let shape = match shape_name {
            "ellipsoid" => {
                let [a, b, c] = r.array("mesh.semi_axes", [1.0, 1.0, 1.0])?;
                for v in [a, b, c] {
                    check("mesh.semi_axes", v, v > 0.0, "(0, inf)")?;
                }
                CavityShape::Ellipsoid { a, b, c }
            }
            "cylinder" => {
                let radius = r.number("mesh.radius", 1.0)?;
                let height = r.number("mesh.height", 3f64.sqrt())?;
                check("mesh.radius", radius, radius > 0.0, "(0, inf)")?;
                check("mesh.height", height, height > 0.0, "(0, inf)")?;
                CavityShape::Cylinder { radius, height }
            }
            "file" => {
                let given = r.text("mesh.file").ok_or_else(|| {
                    ConfigError::invalid("mesh.shape", "file", "requires mesh.file")
                })?;
                let path = resolve(given);
                if !path.is_file() {
                    return Err(ConfigError::File {
                        path,
                        msg: "mesh.file: no such file".into(),
                    });
                }
                CavityShape::FromFile { path }
            }
            other => {
                return Err(ConfigError::invalid(
                    "mesh.shape",
                    other,
                    "expected ellipsoid|cylinder|file",
                ))
            }
        };
        let refinement = r.integer("mesh.refinement", d.refinement as usize)?;
        let max_ref = match shape {
            CavityShape::Ellipsoid { .. } => MAX_ELLIPSOID_REFINEMENT as usize,
            CavityShape::Cylinder { .. } => MAX_CYLINDER_REFINEMENT as usize,
            CavityShape::FromFile { .. } => usize::MAX,
        };
        if refinement > max_ref {
            return Err(ConfigError::invalid(
                "mesh.refinement",
                &refinement.to_string(),
                format!("must lie in [0, {max_ref}]"),
            ));
        }

        let mut solver = SolverConfig::default();
        solver.rho = r.number("liquid.rho", solver.rho)?;
        check("liquid.rho", solver.rho, solver.rho > 0.0, "(0, inf)")?;
        solver.nu = r.number("liquid.nu", solver.nu)?;
        check("liquid.nu", solver.nu, solver.nu > 0.0, "(0, inf)")?;

        let body = match r.text("body.inertia").unwrap_or("target_total") {
            "target_total" => {
                let [a, b, c] = r.array("body.values", [2.2, 2.2, 2.8])?;
                check("body.values", a, a > 0.0, "(0, inf)")?;
                if !(a <= b && b <= c) {
                    return Err(ConfigError::invalid(
                        "body.values",
                        &format_list(&[a, b, c]),
                        "target eigenvalues must be ascending",
                    ));
                }
                BodySpec::TargetTotal([a, b, c])
            }
            "explicit" => {
                let values = r.value("body.values", Vec::new(), parse_list)?;
                let m = match values.len() {
                    3 => [
                        values[0], 0.0, 0.0, 0.0, values[1], 0.0, 0.0, 0.0, values[2],
                    ],
                    9 => values.clone().try_into().unwrap(),
                    n => {
                        return Err(ConfigError::invalid(
                            "body.values",
                            &format_list(&values),
                            format!("explicit inertia needs 3 (diagonal) or 9 numbers, got {n}"),
                        ))
                    }
                };
                BodySpec::Explicit(m)
            }
            "isotropic" => {
                let [lambda] = r.array("body.values", [2.0])?;
                check("body.values", lambda, lambda > 0.0, "(0, inf)")?;
                BodySpec::Isotropic(lambda)
            }
            other => {
                return Err(ConfigError::invalid(
                    "body.inertia",
                    other,
                    "expected target_total|explicit|isotropic",
                ))
            }
        };

        let omega = match r.text("initial.omega") {
            Some("angles") => OmegaSpec::Angles {
                theta: r.number("initial.theta", 0.0)?,
                phi: r.number("initial.phi", 0.0)?,
                magnitude: r.number("initial.magnitude", 2.0 * PI)?,
            },
            _ => OmegaSpec::Components(r.array("initial.omega", [0.0, 0.0, 1.0])?),
        };
        let frame = r.parsed("initial.frame", d.frame)?;
        let velocity = match r.parsed("initial.velocity", d.velocity)? {
            InitialVelocity::RadialProfile { .. } => InitialVelocity::RadialProfile {
                beta: r.number("initial.beta", -1.0)?,
            },
            v => v,
        };

        solver.tau = r.number("solver.tau", solver.tau)?;
        check("solver.tau", solver.tau, solver.tau > 0.0, "(0, inf)")?;
        solver.t_end = r.number("solver.t_end", solver.t_end)?;
        check("solver.t_end", solver.t_end, solver.t_end >= 0.0, "[0, inf)")?;
        solver.theta = r.number("solver.theta", solver.theta)?;
        check(
            "solver.theta",
            solver.theta,
            (0.0..=1.0).contains(&solver.theta),
            "[0, 1]",
        )?;
        solver.sigma = r.number("solver.sigma", solver.sigma)?;
        check(
            "solver.sigma",
            solver.sigma,
            solver.sigma > 0.0 && solver.sigma < 1.0,
            "(0, 1)",
        )?;
        solver.epsilon = r.number("solver.epsilon", solver.epsilon)?;
        check("solver.epsilon", solver.epsilon, solver.epsilon > 0.0, "(0, inf)")?;
        solver.max_subiters = r.integer("solver.max_subiters", solver.max_subiters)?;
        check(
            "solver.max_subiters",
            solver.max_subiters as f64,
            solver.max_subiters >= 2,
            "[2, inf)",
        )?;
        solver.relax_against = r.parsed("solver.relax_against", solver.relax_against)?;
        solver.old_torque = r.parsed("solver.old_torque", solver.old_torque)?;
        solver.body_inertia = r.parsed("solver.body_inertia", solver.body_inertia)?;
        solver.convection = r.parsed("solver.convection", solver.convection)?;
        solver.pressure = r.parsed("solver.pressure", solver.pressure)?;
        solver.refactor = r.parsed("solver.refactor", solver.refactor)?;
        solver.max_peclet = r.number("solver.max_peclet", solver.max_peclet)?;
        check(
            "solver.max_peclet",
            solver.max_peclet,
            solver.max_peclet > 0.0,
            "(0, inf)",
        )?;
        solver
            .validate()
            .map_err(|e| ConfigError::invalid("solver", "", e.to_string()))?;

        let output_dir = r
            .text("output.dir")
            .map_or(d.output_dir.clone(), PathBuf::from);
        let plots = r.value("output.plots", d.plots, parse_bool)?;

        let kind = r.parsed("experiment.kind", d.kind)?;
        let nu_values = r.value("experiment.nu_values", Vec::new(), parse_list)?;
        for &nu in &nu_values {
            check("experiment.nu_values", nu, nu > 0.0, "(0, inf)")?;
        }
        let spin = r.number("experiment.spin", d.spin)?;

        let checks = Checks {
            energy: r.value("checks.energy", d.checks.energy, parse_bool)?,
            energy_tol: r.number("checks.energy_tol", d.checks.energy_tol)?,
            momentum: r.value("checks.momentum", d.checks.momentum, parse_bool)?,
            momentum_tol: r.number("checks.momentum_tol", d.checks.momentum_tol)?,
        };
        check(
            "checks.energy_tol",
            checks.energy_tol,
            checks.energy_tol >= 0.0,
            "[0, inf)",
        )?;
        check(
            "checks.momentum_tol",
            checks.momentum_tol,
            checks.momentum_tol >= 0.0,
            "[0, inf)",
        )?;

        Ok(ExperimentConfig {
            shape,
            refinement: refinement as u32,
            body,
            omega,
            frame,
            velocity,
            solver,
            output_dir,
            plots,
            kind,
            nu_values,
            spin,
            checks,
        })
    }

    /// Viscosities of a sweep: `experiment.nu_values`, or `liquid.nu` alone.
    pub fn sweep_values(&self) -> Vec<f64> {
        if self.nu_values.is_empty() {
            vec![self.solver.nu]
        } else {
            self.nu_values.clone()
        }
    }

    /// Normalised echo: every key that applies, defaults filled in, in `KEYS` order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.shape {
            CavityShape::Ellipsoid { a, b, c } => {
                line("mesh.shape", "ellipsoid".into());
                line("mesh.semi_axes", format_list(&[*a, *b, *c]));
            }
            CavityShape::Cylinder { radius, height } => {
                line("mesh.shape", "cylinder".into());
                line("mesh.radius", radius.to_string());
                line("mesh.height", height.to_string());
            }
            CavityShape::FromFile { path } => {
                line("mesh.shape", "file".into());
                line("mesh.file", path.display().to_string());
            }
        }
        line("mesh.refinement", self.refinement.to_string());
        let s = &self.solver;
        line("liquid.rho", s.rho.to_string());
        line("liquid.nu", s.nu.to_string());
        match &self.body {
            BodySpec::TargetTotal(v) => {
                line("body.inertia", "target_total".into());
                line("body.values", format_list(v));
            }
            BodySpec::Explicit(m) => {
                line("body.inertia", "explicit".into());
                line("body.values", format_list(m));
            }
            BodySpec::Isotropic(l) => {
                line("body.inertia", "isotropic".into());
                line("body.values", l.to_string());
            }
        }
        match self.omega {
            OmegaSpec::Components(w) => line("initial.omega", format_list(&w)),
            OmegaSpec::Angles {
                theta,
                phi,
                magnitude,
            } => {
                line("initial.omega", "angles".into());
                line("initial.theta", theta.to_string());
                line("initial.phi", phi.to_string());
                line("initial.magnitude", magnitude.to_string());
            }
        }
        line("initial.frame", self.frame.to_string());
        line("initial.velocity", self.velocity.to_string());
        if let InitialVelocity::RadialProfile { beta } = self.velocity {
            line("initial.beta", beta.to_string());
        }
        line("solver.tau", s.tau.to_string());
        line("solver.t_end", s.t_end.to_string());
        line("solver.theta", s.theta.to_string());
        line("solver.sigma", s.sigma.to_string());
        line("solver.epsilon", s.epsilon.to_string());
        line("solver.max_subiters", s.max_subiters.to_string());
        line("solver.relax_against", s.relax_against.to_string());
        line("solver.old_torque", s.old_torque.to_string());
        line("solver.body_inertia", s.body_inertia.to_string());
        line("solver.convection", s.convection.to_string());
        line("solver.pressure", s.pressure.to_string());
        line("solver.refactor", s.refactor.to_string());
        line("solver.max_peclet", s.max_peclet.to_string());
        line("output.dir", self.output_dir.display().to_string());
        line("output.plots", self.plots.to_string());
        line("experiment.kind", self.kind.to_string());
        if !self.nu_values.is_empty() {
            line("experiment.nu_values", format_list(&self.nu_values));
        }
        line("experiment.spin", self.spin.to_string());
        let c = &self.checks;
        line("checks.energy", c.energy.to_string());
        line("checks.energy_tol", c.energy_tol.to_string());
        line("checks.momentum", c.momentum.to_string());
        line("checks.momentum_tol", c.momentum_tol.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_raw(&RawConfig::parse(text, "test")?)
    }

    #[test]
    fn minimal_file_echoes_defaults() {
        let cfg = build("liquid.nu = 0.05\n").unwrap();
        let echo = cfg.echo();
        assert!(echo.contains("liquid.nu = 0.05\n"));
        assert!(echo.contains("solver.sigma = 0.5\n"));
        assert!(echo.contains("mesh.semi_axes = 1, 1, 1\n"));
        assert!(echo.contains("solver.pressure = p1_quadratic\n"));
        // the echo is itself a valid config with the same meaning
        assert_eq!(build(&echo).unwrap(), cfg);
    }

    #[test]
    fn sigma_out_of_range_names_field_and_bound() {
        let e = build("solver.sigma = 1.2").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("solver.sigma"), "{msg}");
        assert!(msg.contains("(0, 1)"), "{msg}");
    }

    #[test]
    fn missing_mesh_file_reports_path() {
        let e = build("mesh.shape = file\nmesh.file = /nonexistent/cavity.mesh").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/cavity.mesh"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let e = RawConfig::parse("# comment\nliquid.nu 0.1", "cfg").unwrap_err();
        assert_eq!(e.to_string().split(':').nth(1), Some("2"));
        assert!(RawConfig::parse("liquid.nu = 1\nliquid.nu = 2", "cfg").is_err());
        assert!(matches!(
            RawConfig::parse("liquid.mu = 1", "cfg"),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_number("pi/48").unwrap(), PI / 48.0);
        assert_eq!(parse_number("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("-pi").unwrap(), -PI);
        assert_eq!(parse_number("3pi/4").unwrap(), 0.75 * PI);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert!(parse_number("pie").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn angle_form_of_the_initial_spin() {
        let cfg = build("initial.omega = angles\ninitial.theta = pi/48\ninitial.phi = 0").unwrap();
        let w = cfg.omega.components();
        assert!((w[0] - 2.0 * PI * (PI / 48.0).cos()).abs() < 1e-15);
        assert!((w[1] - 2.0 * PI * (PI / 48.0).sin()).abs() < 1e-15);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn body_value_counts_are_checked() {
        assert!(build("body.inertia = explicit\nbody.values = 1, 2").is_err());
        let cfg = build("body.inertia = explicit\nbody.values = 1, 2, 3").unwrap();
        assert_eq!(
            cfg.body,
            BodySpec::Explicit([1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0])
        );
        assert!(build("body.values = 3, 2, 1").is_err());
    }

    #[test]
    fn later_assignments_override() {
        let mut raw = RawConfig::parse("liquid.nu = 0.1", "a").unwrap();
        raw.set_assignment("liquid.nu=0.02").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.solver.nu, 0.02);
        assert_eq!(cfg.sweep_values(), vec![0.02]);
    }

    #[test]
    fn refinement_bound_depends_on_shape() {
        assert!(build("mesh.refinement = 4").is_err());
        assert!(build("mesh.shape = cylinder\nmesh.refinement = 4").is_ok());
    }
}
