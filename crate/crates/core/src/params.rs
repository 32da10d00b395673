//! Model parameters, validation, and closed-form phase exponents.
//!
//! A model instance is a spatial random graph on a box: vertices from a
//! unit-intensity Poisson process or the integer lattice, i.i.d. Pareto marks
//! with tail exponent `tau - 1` (`tau = inf` means all marks are 1), and edges
//! drawn independently with probability
//!
//! ```text
//! p * min(1, beta * kappa(w_u, w_v) / dist^d)^alpha      (polynomial profile)
//! p * 1{ beta * kappa(w_u, w_v) >= dist^d }              (threshold profile)
//! ```
//!
//! where `kappa` couples the two marks. [`compute_exponents`] evaluates the
//! closed forms for the polynomial growth exponents of boundary counts and
//! the stretched-exponential exponents of cluster-size decay, identifies which
//! edge strategy dominates, and reports how many strategies tie (ties signal a
//! phase boundary, where polylog corrections appear).

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use serde::{Deserialize, Serialize};

/// Tolerance used when testing exponent ties.
pub const TIE_TOL: f64 = 1e-9;

/// Mark-coupling kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    /// `max(w1,w2) * min(w1,w2)^sigma`, `sigma >= 0`.
    Interpolation { sigma: f64 },
    /// `(w1^(1/d) + w2^(1/d))^d`; behaves like the `sigma = 0` kernel up to
    /// constants (it is sandwiched between it and twice it), and all exponent
    /// formulas treat it as `sigma = 0`.
    Sum,
}

/// Edge-probability profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// Deterministic range: connect (with prob. `p`) iff
    /// `beta * kappa >= dist^d`. Equivalent to `alpha = inf`.
    Threshold,
    /// Polynomial decay with exponent `alpha` in (1, inf).
    Polynomial,
}

/// Vertex point process on the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexProcess {
    /// Unit-intensity Poisson point process.
    Ppp,
    /// All integer lattice points of the box.
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension, `>= 1`.
    pub d: u32,
    /// Mark tail parameter in `(2, inf]`; `inf` means unit marks.
    pub tau: ExtReal,
    /// Profile decay in `(1, inf]`; `inf` iff the profile is `Threshold`.
    pub alpha: ExtReal,
    pub kernel: KernelKind,
    /// Edge-density multiplier, `> 0`.
    pub beta: f64,
    /// Bernoulli cap `p` in `(0, 1]`.
    pub p: f64,
    pub profile: ProfileKind,
    pub vertex_process: VertexProcess,
}

impl ModelParams {
    /// The `sigma` used in all exponent formulas (`Sum` counts as 0).
    pub fn sigma_eff(&self) -> f64 {
        match self.kernel {
            KernelKind::Interpolation { sigma } => sigma,
            KernelKind::Sum => 0.0,
        }
    }

    pub fn is_threshold(&self) -> bool {
        self.profile == ProfileKind::Threshold
    }

    /// `tau` as f64 (`inf` for unit marks).
    pub fn tau_f(&self) -> f64 {
        self.tau.as_f64()
    }

    /// `alpha` as f64 (`inf` for the threshold profile).
    pub fn alpha_f(&self) -> f64 {
        self.alpha.as_f64()
    }

    pub fn unit_marks(&self) -> bool {
        !self.tau.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::RejectDomain("d must be >= 1".into()));
        }
        match self.tau {
            ExtReal::Finite(t) if !(t.is_finite() && t > 2.0) => {
                return Err(Error::RejectDomain(format!("tau must be in (2, inf], got {t}")));
            }
            ExtReal::NegInf => {
                return Err(Error::RejectDomain("tau must be in (2, inf]".into()));
            }
            _ => {}
        }
        match self.alpha {
            ExtReal::Finite(a) if !(a.is_finite() && a > 1.0) => {
                return Err(Error::RejectDomain(format!("alpha must be in (1, inf], got {a}")));
            }
            ExtReal::NegInf => {
                return Err(Error::RejectDomain("alpha must be in (1, inf]".into()));
            }
            _ => {}
        }
        if let KernelKind::Interpolation { sigma } = self.kernel {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::RejectDomain(format!("sigma must be >= 0, got {sigma}")));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::RejectDomain(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.p.is_finite() && self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::RejectDomain(format!("p must be in (0, 1], got {}", self.p)));
        }
        let alpha_inf = !self.alpha.is_finite();
        match self.profile {
            ProfileKind::Threshold if !alpha_inf => Err(Error::RejectInconsistent(
                "threshold profile requires alpha = inf".into(),
            )),
            ProfileKind::Polynomial if alpha_inf => Err(Error::RejectInconsistent(
                "polynomial profile requires finite alpha".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// The four strategies by which an edge can cross a box boundary: a short
/// edge near the surface, a long edge between two low-mark vertices, a long
/// edge from a high-mark vertex to a low-mark one, or a long edge between two
/// high-mark vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseType {
    #[serde(rename = "short")]
    Short,
    #[serde(rename = "ll")]
    LowLow,
    #[serde(rename = "hl")]
    HighLow,
    #[serde(rename = "hh")]
    HighHigh,
}

/// Closed-form exponents for a parameter point.
///
/// `zeta_*` are polynomial growth exponents of boundary-vertex counts (and the
/// stretch exponents of cluster-size decay); `-inf` marks a strategy that is
/// unavailable at this parameter point (e.g. no high marks when `tau = inf`).
/// `gamma_*` are the optimal mark exponents behind each strategy and `eta_*`
/// the matching entropy exponents; a `gamma`/`eta` is omitted when its closed
/// form is not determined by the given parameters. Values are reported even
/// when negative (useful for seeing how far a strategy is from dominance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub zeta_short: f64,
    pub zeta_ll: ExtReal,
    pub zeta_hl: ExtReal,
    pub zeta_hh: ExtReal,
    /// `max(0, zeta_ll, zeta_hl, zeta_hh)`: growth exponent of the count of
    /// inner-half-box vertices with a long downward edge across the boundary.
    pub zeta_long: f64,
    /// `max(zeta_short, zeta_long)`: growth exponent of the count of box
    /// vertices with any downward edge across the boundary.
    pub zeta_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_ll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_ll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_hl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_hh: Option<f64>,
    /// Number of strategies attaining `max(zeta_short, zeta_ll, zeta_hl,
    /// zeta_hh)` within `1e-9`; values `>= 2` indicate a phase boundary with
    /// polylog corrections to the pure power laws.
    pub multiplicity: u8,
    /// The strategies attaining the maximum, in fixed order
    /// (short, ll, hl, hh).
    pub dominant_types: Vec<PhaseType>,
    /// Alternative cluster-decay exponent that replaces `zeta_star` in the
    /// decay upper bound when the high-high strategy dominates and
    /// `sigma > tau - 1` (very strong mark coupling): `1/(sigma + 1 -
    /// (tau-1)/alpha)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_decay_alt: Option<f64>,
    /// Growth exponent of the expected number of edges from the inner half
    /// box to the complement of the box, with both endpoint marks truncated
    /// at the natural maximum `n^(1/(tau-1))`. Its sign matches the sign of
    /// `zeta_long`; `-inf` when such edges die out (e.g. threshold profile
    /// with bounded kernel reach).
    pub two_minus_delta_eff: ExtReal,
}

/// Exponent of the expected truncated edge count between the inner half box
/// and the box complement, by maximizing the piecewise-linear exponent of the
/// contribution of (mark-class, mark-class, distance-class) triples.
///
/// Writing `a = log_n w_u`, `b = log_n w_v` for the two mark exponents (each
/// capped at the natural maximum `mu = 1/(tau-1)`) and `rd = log_n dist^d >=
/// 1` for the distance class, the expected count of such pairs grows like
/// `n^(2 - (a+b)(tau-1) + rd - 1)` and each pair is an edge with probability
/// exponent `-alpha * max(0, rd - ke)` where `ke = max(a,b) + sigma*min(a,b)`
/// is the kernel exponent. Maximizing over `rd` first and then over `(a, b)`
/// leaves a piecewise-linear objective on `[0, mu]^2` whose maximum sits on a
/// vertex of the subdivision induced by `{a = b, a + sigma*b = 1,
/// sigma*a + b = 1}` and the square's edges; we enumerate those vertices.
fn edge_boundary_exponent(params: &ModelParams) -> ExtReal {
    let alpha = params.alpha;
    let sigma = params.sigma_eff();

    // Unit marks: only (a, b) = (0, 0).
    let mu = match params.tau {
        ExtReal::Finite(t) => 1.0 / (t - 1.0),
        _ => {
            return match alpha {
                ExtReal::Finite(a) => ExtReal::Finite(2.0 - a),
                _ => ExtReal::NegInf,
            };
        }
    };
    let tau1 = params.tau_f() - 1.0;

    let objective = |a: f64, b: f64| -> ExtReal {
        let ke = a.max(b) + sigma * a.min(b);
        let base = 2.0 - (a + b) * tau1;
        if ke >= 1.0 {
            ExtReal::Finite(base + ke - 1.0)
        } else {
            match alpha {
                ExtReal::Finite(al) => ExtReal::Finite(base - al * (1.0 - ke)),
                _ => ExtReal::NegInf,
            }
        }
    };

    // Lines as (ca, cb, rhs) for ca*a + cb*b = rhs.
    let lines = [
        (1.0, 0.0, 0.0),
        (1.0, 0.0, mu),
        (0.0, 1.0, 0.0),
        (0.0, 1.0, mu),
        (1.0, -1.0, 0.0),
        (1.0, sigma, 1.0),
        (sigma, 1.0, 1.0),
    ];
    let mut best = ExtReal::NegInf;
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a1, b1, r1) = lines[i];
            let (a2, b2, r2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            let a = (r1 * b2 - r2 * b1) / det;
            let b = (a1 * r2 - a2 * r1) / det;
            if (-1e-12..=mu + 1e-12).contains(&a) && (-1e-12..=mu + 1e-12).contains(&b) {
                best = best.max(objective(a.clamp(0.0, mu), b.clamp(0.0, mu)));
            }
        }
    }
    best
}

/// Evaluate all closed-form exponents for a validated parameter point.
pub fn compute_exponents(params: &ModelParams) -> Result<ExponentReport> {
    params.validate()?;

    let d = params.d as f64;
    let sigma = params.sigma_eff();
    let inv_alpha = match params.alpha {
        ExtReal::Finite(a) => 1.0 / a,
        _ => 0.0,
    };
    let alpha_finite = params.alpha.finite();
    let tau_finite = params.tau.finite();

    let zeta_short = (d - 1.0) / d;

    let zeta_ll = match alpha_finite {
        Some(a) => ExtReal::Finite(2.0 - a),
        None => ExtReal::NegInf,
    };

    let zeta_hl = match (tau_finite, alpha_finite) {
        (Some(t), Some(a)) => ExtReal::Finite((t - 1.0) / a - (t - 2.0)),
        _ => ExtReal::NegInf,
    };

    // Strongest-strategy mark exponent for high-high pairs. The second branch
    // takes over for weak coupling (tau > sigma + 2) and keeps the value
    // continuous and monotone across the switch; at alpha = inf both branches
    // reduce to 1/(sigma+1).
    let gamma_hh = tau_finite.map(|t| {
        if t <= sigma + 2.0 {
            (1.0 - inv_alpha) / (sigma + 1.0 - (t - 1.0) * inv_alpha)
        } else {
            1.0 / (sigma + 1.0)
        }
    });

    let zeta_hh = match (tau_finite, gamma_hh) {
        (Some(t), Some(g)) => ExtReal::Finite(1.0 - g * (t - 1.0)),
        _ => ExtReal::NegInf,
    };

    let zeta_long = [zeta_ll, zeta_hl, zeta_hh]
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.as_f64()));
    let zeta_star = zeta_short.max(zeta_long);

    let all = [ExtReal::Finite(zeta_short), zeta_ll, zeta_hl, zeta_hh];
    let peak = all.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.as_f64()));
    let types = [PhaseType::Short, PhaseType::LowLow, PhaseType::HighLow, PhaseType::HighHigh];
    let dominant_types: Vec<PhaseType> = all
        .iter()
        .zip(types)
        .filter(|(z, _)| z.as_f64() >= peak - TIE_TOL)
        .map(|(_, t)| t)
        .collect();
    let multiplicity = dominant_types.len() as u8;

    let gamma_hl = Some(1.0 - inv_alpha);
    let gamma_ll = match (tau_finite, alpha_finite) {
        (Some(t), Some(a)) => Some((a - 1.0) / (t - 1.0)),
        _ => None,
    };
    let eta_ll = Some(inv_alpha);
    let eta_hl = tau_finite.map(|t| 1.0 - (1.0 - inv_alpha) * (t - 1.0) * inv_alpha);
    let eta_hh = gamma_hh.map(|g| 1.0 - sigma * g);

    let cluster_decay_alt = match (tau_finite, zeta_hh.finite()) {
        (Some(t), Some(zhh))
            if sigma > t - 1.0 && zhh > 0.0 && (zeta_long - zhh).abs() <= TIE_TOL =>
        {
            Some(1.0 / (sigma + 1.0 - (t - 1.0) * inv_alpha))
        }
        _ => None,
    };

    Ok(ExponentReport {
        zeta_short,
        zeta_ll,
        zeta_hl,
        zeta_hh,
        zeta_long,
        zeta_star,
        gamma_ll,
        gamma_hl,
        gamma_hh,
        eta_ll,
        eta_hl,
        eta_hh,
        multiplicity,
        dominant_types,
        cluster_decay_alt,
        two_minus_delta_eff: edge_boundary_exponent(params),
    })
}
