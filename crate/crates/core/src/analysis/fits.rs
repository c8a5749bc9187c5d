use super::AnalysisError;
use crate::coupled_solver::TimeSeries;
use nalgebra::Vector3;

/// Threshold on `‖ω(t) − ω̄‖ / ‖ω(0) − ω̄‖` defining the time to reach equilibrium.
pub const TC_RATIO: f64 = 0.1;
/// Fraction of the run used to estimate the asymptotic angular velocity.
pub const FINAL_WINDOW: f64 = 0.1;
/// Largest window standard deviation, relative to `|ω̄|`, accepted as stationary.
pub const STATIONARITY_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaBar {
    pub mean: Vector3<f64>,
    /// root-mean-square deviation over the window
    pub std: f64,
    pub window_start: f64,
}

/// Mean of `ω` over the final 10% of the time span, with a stationarity check.
pub fn estimate_omega_bar(
    times: &[f64],
    omegas: &[Vector3<f64>],
) -> Result<OmegaBar, AnalysisError> {
    if times.len() < 2 {
        return Err(AnalysisError::TooFewPoints {
            need: 2,
            got: times.len(),
        });
    }
    let (t0, t1) = (times[0], *times.last().unwrap());
    let start = t1 - FINAL_WINDOW * (t1 - t0);
    let window: Vec<&Vector3<f64>> = times
        .iter()
        .zip(omegas)
        .filter(|(t, _)| **t >= start)
        .map(|(_, w)| w)
        .collect();
    let n = window.len() as f64;
    let mean: Vector3<f64> = window.iter().copied().sum::<Vector3<f64>>() / n;
    let std = (window
        .iter()
        .map(|w| (*w - mean).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    if std > STATIONARITY_TOL * mean.norm() {
        return Err(AnalysisError::Precondition(format!(
            "final window is not stationary: std {std:.3e} vs |mean| {:.3e}",
            mean.norm()
        )));
    }
    Ok(OmegaBar {
        mean,
        std,
        window_start: start,
    })
}

/// First time the mismatch ratio drops below 0.1, linearly interpolated between samples.
pub fn detect_tc_samples(
    times: &[f64],
    omegas: &[Vector3<f64>],
    omega_bar: &Vector3<f64>,
) -> Result<f64, AnalysisError> {
    let d0 = (omegas[0] - omega_bar).norm();
    if !(d0 > 0.0) {
        return Err(AnalysisError::Undefined(
            "t_c undefined: omega(0) equals omega_bar".into(),
        ));
    }
    let ratio = |i: usize| (omegas[i] - omega_bar).norm() / d0;
    for i in 1..times.len() {
        let r1 = ratio(i);
        if r1 < TC_RATIO {
            let r0 = ratio(i - 1);
            return Ok(times[i - 1] + (r0 - TC_RATIO) / (r0 - r1) * (times[i] - times[i - 1]));
        }
    }
    Err(AnalysisError::Undefined(
        "the ratio never drops below 0.1".into(),
    ))
}

/// `t_c` of a run; `ω̄` is estimated from the final window unless supplied.
pub fn detect_tc(
    series: &TimeSeries,
    omega_bar: Option<Vector3<f64>>,
) -> Result<f64, AnalysisError> {
    let times = series.times();
    let omegas: Vec<Vector3<f64>> = series.records.iter().map(|r| r.omega).collect();
    let bar = match omega_bar {
        Some(b) => b,
        None => estimate_omega_bar(&times, &omegas)?.mean,
    };
    detect_tc_samples(&times, &omegas, &bar)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit, AnalysisError> {
    if x.len() < 2 {
        return Err(AnalysisError::TooFewPoints {
            need: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(AnalysisError::Undefined("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Exponent `p` of `t_c ≈ c ν^p` by least squares in log–log coordinates.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::TooFewPoints {
            need: 2,
            got: points.len(),
        });
    }
    for &(nu, tc) in points {
        for v in [nu, tc] {
            if !(v > 0.0) {
                return Err(AnalysisError::NonPositive(v));
            }
        }
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(linear_fit(&x, &y)?.slope)
}

/// `t_c` against `ν` as printed for the reference full-scale runs.
pub const REFERENCE_TC: [(f64, f64); 4] = [(0.1, 50.8), (0.05, 63.3), (0.02, 75.2), (0.01, 99.8)];

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// `c₂` in `‖v(t)‖ ≈ c₁‖v(0)‖ e^{−c₂ μ t}`
    pub rate: f64,
    /// `c₁‖v(0)‖`, the fitted value at `t = 0`
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Log-linear fit of samples `(t, ‖v‖)` over the first decade of decay after the peak.
pub fn decay_fit_samples(times: &[f64], v: &[f64], mu: f64) -> Result<DecayFit, AnalysisError> {
    let peak = (0..v.len())
        .max_by(|&i, &j| v[i].total_cmp(&v[j]))
        .ok_or(AnalysisError::TooFewPoints { need: 3, got: 0 })?;
    if !(v[peak] > 0.0) {
        return Err(AnalysisError::NonPositive(v[peak]));
    }
    let mut end = peak;
    while end + 1 < v.len() && v[end + 1] > 0.0 && v[end] >= 0.1 * v[peak] {
        end += 1;
    }
    if end - peak + 1 < 3 {
        return Err(AnalysisError::TooFewPoints {
            need: 3,
            got: end - peak + 1,
        });
    }
    let x = &times[peak..=end];
    let y: Vec<f64> = v[peak..=end].iter().map(|s| s.ln()).collect();
    let fit = linear_fit(x, &y)?;
    Ok(DecayFit {
        rate: -fit.slope / mu,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window: (x[0], *x.last().unwrap()),
    })
}

/// Decay of `‖v‖₂` for a run with spherical total inertia; `force` skips the check.
pub fn decay_fit(series: &TimeSeries, force: bool) -> Result<DecayFit, AnalysisError> {
    let [a, _, c] = series.eigenvalues;
    if !force && c - a > 1e-6 * c {
        return Err(AnalysisError::Precondition(format!(
            "decay fit needs spherical total inertia, eigenvalues {:?}",
            series.eigenvalues
        )));
    }
    let t = series.times();
    let v: Vec<f64> = series.records.iter().map(|r| r.v_l2).collect();
    decay_fit_samples(&t, &v, series.mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipOverReport {
    /// sign of `r` at `t = 0` (−1, 0, 1)
    pub sign_r0: i8,
    /// sign of the final `r`, 0 when it vanishes to tolerance
    pub sign_rbar: i8,
    pub r0: f64,
    pub rbar: f64,
    /// `cos θ = C r∞ / |I ω∞|` at the first and last samples
    pub cos_theta0: f64,
    pub cos_theta_inf: f64,
    pub degenerate: bool,
    pub flipped: bool,
}

fn sign(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

pub fn cos_theta(momentum_eig: &Vector3<f64>) -> f64 {
    let n = momentum_eig.norm();
    if n > 0.0 {
        momentum_eig.z / n
    } else {
        0.0
    }
}

pub fn flip_over_report(series: &TimeSeries) -> FlipOverReport {
    let first = &series.records[0];
    let last = series.last();
    let tol = 1e-6 * last.pqr.norm().max(first.pqr.norm());
    let sign_r0 = sign(first.pqr.z, tol);
    let sign_rbar = sign(last.pqr.z, tol);
    let degenerate = sign_rbar == 0 || sign_r0 == 0;
    FlipOverReport {
        sign_r0,
        sign_rbar,
        r0: first.pqr.z,
        rbar: last.pqr.z,
        cos_theta0: cos_theta(&first.momentum_eig),
        cos_theta_inf: cos_theta(&last.momentum_eig),
        degenerate,
        flipped: !degenerate && sign_r0 != sign_rbar,
    }
}
