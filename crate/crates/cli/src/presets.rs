//! Built-in experiment presets, written in the config syntax so that a config file and
//! `--set` assignments can override any of their keys. All use the skew-symmetric
//! convection form, which stays stable at the low viscosities of the sweeps.

use crate::config::{ConfigError, RawConfig};

/// Asymmetric body spun almost about its minor axis, swept over ν.
pub const PAPER_91: &str = "
mesh.shape = ellipsoid
mesh.semi_axes = 1, 1, 1
body.inertia = target_total
body.values = 5.54, 6.73, 6.76
initial.omega = angles
initial.theta = pi/48
initial.phi = 0
initial.magnitude = 2*pi
initial.velocity = zero
liquid.nu = 0.1
solver.t_end = 80
solver.convection = skew_symmetric
experiment.kind = sweep-nu
experiment.nu_values = 0.1, 0.05, 0.02, 0.01
";

/// Asymmetric body with large transverse spin: the small-data condition fails.
pub const PAPER_92A: &str = "
mesh.shape = ellipsoid
mesh.semi_axes = 1, 1, 1
body.inertia = target_total
body.values = 5.54, 6.73, 6.76
initial.omega = 4.44, 3.14, 3.14
initial.velocity = zero
liquid.nu = 0.1
solver.t_end = 40
solver.convection = skew_symmetric
experiment.kind = flip-over
";

/// Symmetric body with the liquid initially out of rigid rotation, `E(0) > 0`.
pub const PAPER_92B: &str = "
mesh.shape = ellipsoid
mesh.semi_axes = 1, 1, 1
body.inertia = target_total
body.values = 4.99, 4.99, 5.54
initial.omega = 4.44, 3.14, 3.14
initial.velocity = radial_profile
initial.beta = -1
liquid.nu = 0.1
solver.t_end = 40
solver.convection = skew_symmetric
experiment.kind = flip-over
";

/// `r(0) = 0`: the final orientation of e₃ is decided by the viscosity.
pub const PAPER_93: &str = "
mesh.shape = ellipsoid
mesh.semi_axes = 1, 1, 1
body.inertia = target_total
body.values = 5.54, 6.73, 6.76
initial.omega = 6.2697, 0.4109, 0
initial.velocity = zero
liquid.nu = 0.05
solver.t_end = 80
solver.convection = skew_symmetric
experiment.kind = flip-over
experiment.nu_values = 0.05, 0.04, 0.035, 0.03, 0.02
";

pub const PRESETS: [(&str, &str); 4] = [
    ("paper-91", PAPER_91),
    ("paper-92a", PAPER_92A),
    ("paper-92b", PAPER_92B),
    ("paper-93", PAPER_93),
];

pub fn preset(name: &str) -> Result<RawConfig, ConfigError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::UnknownKey {
            key: format!("preset {name}"),
        })?;
    RawConfig::parse(text, name)
}
