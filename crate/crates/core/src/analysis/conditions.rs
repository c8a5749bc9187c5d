use super::AnalysisError;
use nalgebra::Vector3;
use std::fmt;

/// Eigenvalues closer than this (relative) count as equal when selecting the case.
const EQUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaCase {
    /// `A = B < C`
    SymmetricOblate,
    /// `A < B = C`
    SymmetricProlate,
    /// `A < B < C`
    Asymmetric,
    /// `A = B = C`
    Spherical,
}

impl InertiaCase {
    pub fn classify(abc: [f64; 3]) -> Result<InertiaCase, AnalysisError> {
        let [a, b, c] = abc;
        if !(a > 0.0 && a <= b && b <= c) {
            return Err(AnalysisError::Unordered(abc));
        }
        let eq = |x: f64, y: f64| (y - x) <= EQUAL_TOL * y;
        Ok(match (eq(a, b), eq(b, c)) {
            (true, true) => InertiaCase::Spherical,
            (true, false) => InertiaCase::SymmetricOblate,
            (false, true) => InertiaCase::SymmetricProlate,
            (false, false) => InertiaCase::Asymmetric,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            InertiaCase::SymmetricOblate => "a (A = B < C)",
            InertiaCase::SymmetricProlate => "b (A < B = C)",
            InertiaCase::Asymmetric => "c (A < B < C)",
            InertiaCase::Spherical => "spherical (A = B = C)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// `lhs ≤ rhs` holds but the strict lower bound `0 < lhs` fails with `lhs = 0`
    DegenerateBoundary,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::DegenerateBoundary => "degenerate boundary",
        })
    }
}

/// One condition of the form `0 < lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub name: &'static str,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
}

impl Inequality {
    fn new(name: &'static str, statement: &'static str, lhs: f64, rhs: f64) -> Inequality {
        let verdict = if lhs > 0.0 && lhs <= rhs {
            Verdict::Satisfied
        } else if lhs == 0.0 && rhs >= 0.0 {
            Verdict::DegenerateBoundary
        } else {
            Verdict::Violated
        };
        Inequality {
            name,
            statement,
            lhs,
            rhs,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub case: InertiaCase,
    pub inequalities: Vec<Inequality>,
    /// `Violated` if any inequality is violated, else `DegenerateBoundary` if any is
    /// degenerate, else `Satisfied`.
    pub verdict: Verdict,
    pub prediction: String,
}

impl ConditionReport {
    pub fn inequality(&self, name: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|i| i.name == name)
    }
}

/// Attainability conditions for initial liquid energy `E(0)` and initial `ω∞` components
/// `(p, q, r)` in the eigenframe of `I = diag(A, B, C)`.
pub fn attainability_report(
    e0: f64,
    pqr: Vector3<f64>,
    abc: [f64; 3],
) -> Result<ConditionReport, AnalysisError> {
    let case = InertiaCase::classify(abc)?;
    if e0 == 0.0 && pqr == Vector3::zeros() {
        return Err(AnalysisError::ZeroData);
    }
    let [a, b, c] = abc;
    let (p, q, r) = (pqr.x, pqr.y, pqr.z);
    let (inequalities, holds, fails) = match case {
        InertiaCase::SymmetricOblate => (
            vec![Inequality::new(
                "oblate",
                "0 < E(0) <= (C - A) C r(0)^2 / (2A)",
                e0,
                (c - a) * c * r * r / (2.0 * a),
            )],
            "p, q -> 0 and r -> r_bar != 0: permanent rotation about e3",
            "no conclusion: the sufficient condition for rotation about e3 fails",
        ),
        InertiaCase::SymmetricProlate => (
            vec![Inequality::new(
                "prolate",
                "0 < E(0) <= B (B - A) (q(0)^2 + r(0)^2) / (2A)",
                e0,
                b * (b - a) * (q * q + r * r) / (2.0 * a),
            )],
            "p -> 0, (q, r) -> (q_bar, r_bar) != 0: permanent rotation in the e2-e3 plane",
            "no conclusion: the sufficient condition excluding rotation about e1 fails",
        ),
        InertiaCase::Asymmetric => (
            vec![
                Inequality::new(
                    "asymmetric_first",
                    "0 < E(0) + A (B - A) p(0)^2 / (2B) <= C (C - B) r(0)^2 / (2B)",
                    e0 + a * (b - a) * p * p / (2.0 * b),
                    c * (c - b) * r * r / (2.0 * b),
                ),
                Inequality::new(
                    "asymmetric_second",
                    "0 < E(0) <= B (B - A) q(0)^2 / (2A) + C (C - A) r(0)^2 / (2A)",
                    e0,
                    b * (b - a) * q * q / (2.0 * a) + c * (c - a) * r * r / (2.0 * a),
                ),
            ],
            "p, q -> 0 and r -> r_bar != 0: permanent rotation about e3",
            "no conclusion: a sufficient condition for rotation about e3 fails",
        ),
        InertiaCase::Spherical => (
            Vec::new(),
            "v -> 0 and omega -> omega_inf(0): every axis is a permanent axis",
            "",
        ),
    };
    let verdict = if inequalities.iter().any(|i| i.verdict == Verdict::Violated) {
        Verdict::Violated
    } else if inequalities
        .iter()
        .any(|i| i.verdict == Verdict::DegenerateBoundary)
    {
        Verdict::DegenerateBoundary
    } else {
        Verdict::Satisfied
    };
    let prediction = match verdict {
        Verdict::Satisfied => holds.to_string(),
        Verdict::Violated => fails.to_string(),
        Verdict::DegenerateBoundary => format!(
            "{holds} (only the strict bound 0 < E(0) fails, with E(0) = 0; \
             the limiting argument still applies but is not the printed hypothesis)"
        ),
    };
    Ok(ConditionReport {
        case,
        inequalities,
        verdict,
        prediction,
    })
}

/// Published two-decimal inputs of the attainability experiments and the values printed
/// next to them, for side-by-side reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedCheck {
    pub description: &'static str,
    pub inertia: [f64; 3],
    pub omega0: Vector3<f64>,
    pub e0: f64,
    pub inequality: &'static str,
    /// printed (lhs, rhs); `None` where only one side is printed
    pub printed: (Option<f64>, Option<f64>),
}

pub fn published_checks() -> Vec<PublishedCheck> {
    vec![
        PublishedCheck {
            description: "large transverse spin, asymmetric body",
            inertia: [5.54, 6.73, 6.76],
            omega0: Vector3::new(4.44, 3.14, 3.14),
            e0: 0.0,
            inequality: "asymmetric_first",
            printed: (Some(9.6860), Some(0.1310)),
        },
        PublishedCheck {
            description: "small transverse spin, asymmetric body",
            inertia: [5.54, 6.73, 6.76],
            omega0: Vector3::new(0.444, 0.314, 3.14),
            e0: 0.0,
            inequality: "asymmetric_first",
            printed: (None, None),
        },
        PublishedCheck {
            description: "symmetric body, liquid initially out of rigid rotation",
            inertia: [4.99, 4.99, 5.54],
            omega0: Vector3::new(0.444, 0.314, 3.14),
            e0: 341.6,
            inequality: "oblate",
            printed: (Some(341.6), Some(6.0786)),
        },
    ]
}

/// `r* = −ω₀ ± sqrt((A²p̃² + B²q̃²)/C² + (r̃ + ω₀)²)`, sign of `ω₀`: the limit of the
/// perturbation of a permanent rotation `ω₀ e₃`.
pub fn predict_rstar(
    abc: [f64; 3],
    omega0: f64,
    perturbation: Vector3<f64>,
) -> Result<f64, AnalysisError> {
    let [a, b, c] = abc;
    if !(c > b) {
        return Err(AnalysisError::Precondition(format!(
            "requires C > B, got B = {b}, C = {c}"
        )));
    }
    if omega0 == 0.0 {
        return Err(AnalysisError::Precondition(
            "omega0 must be non-zero".into(),
        ));
    }
    let (p, q, r) = (perturbation.x, perturbation.y, perturbation.z);
    let root = ((a * a * p * p + b * b * q * q) / (c * c) + (r + omega0).powi(2)).sqrt();
    Ok(-omega0 + omega0.signum() * root)
}

/// `m = max{2C, A(C − A), B(C − B)} / min{…}`.
pub fn stability_margin(abc: [f64; 3]) -> Result<f64, AnalysisError> {
    let [a, b, c] = abc;
    let terms = [2.0 * c, a * (c - a), b * (c - b)];
    let lo = terms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(AnalysisError::Undefined(format!(
            "stability margin needs A, B < C (terms {terms:?})"
        )));
    }
    Ok(hi / lo)
}
