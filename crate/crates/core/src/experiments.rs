//! Monte Carlo experiments over graph sequences: cluster-size laws, tail
//! asymptotics, and scaling fits against the predicted exponents.
//!
//! The driver is [`run_scaling_experiment`]. Every experiment follows the
//! same shape: a grid of target volumes, a number of replicates per volume,
//! one summary statistic per replicate, aggregated rows with confidence
//! intervals, and a least-squares fit of a transformed statistic against a
//! transformed volume whose slope is compared to a closed-form prediction.
//!
//! Replicate seeds are derived deterministically from the master seed, so a
//! whole experiment is reproducible bit for bit regardless of the number of
//! worker threads: replicate `r` of grid lane `i` uses
//! `derive_seed(master, i * replicates + r)`, and each replicate splits that
//! into separate streams for vertices, the distinguished origin, and edges.

use crate::components::{
    downward_boundary_count, edge_boundary_count, summarize, ComponentSummary, UnionFind,
};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::graphgen::{generate_cellgrid_with, generate_edges_with, GenOptions};
use crate::params::{compute_exponents, ExponentReport, ModelParams, TIE_TOL};
use crate::pointprocess::{palm_insert_origin, sample_vertices, BoxSpec};
use crate::seed::derive_seed;
use crate::stats::{linear_fit, mean_ci, mean_std, median_iqr, wilson_interval, Z95};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

// --------------------------------------------------------------------------
// Cluster-size law
// --------------------------------------------------------------------------

/// Cluster-size law seen from a distinguished origin, estimated over
/// independent replicates that each condition the vertex set to contain a
/// fresh vertex at the center. `theta_hat` is the fraction of replicates
/// whose origin lies in the largest component of the box — a finite-box proxy
/// for the density of the unbounded cluster, upward-biased at small volumes
/// and converging as the volume grows. `theta_ell[l-1]` is the fraction whose
/// origin lies in a non-largest component of size exactly `l`
/// (for `l = 1..=ell_max`), and `tail_mass` the remaining fraction (origin in
/// a finite component larger than `ell_max`). The three parts sum to one
/// exactly, since every replicate is classified into exactly one bucket.
/// `n_used` records the target volume the law was estimated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLawEstimate {
    pub theta_hat: f64,
    pub theta_ell: Vec<f64>,
    pub tail_mass: f64,
    pub replicates: usize,
    pub n_used: f64,
}

/// Estimate the cluster-size law at one volume by classifying the origin's
/// component per replicate (size within the target box, and whether it is the
/// largest one).
pub fn estimate_cluster_law(
    params: &ModelParams,
    spec: &BoxSpec,
    ell_max: usize,
    replicates: usize,
    master_seed: u64,
    opts: &GenOptions,
) -> Result<ClusterLawEstimate> {
    params.validate()?;
    if ell_max == 0 {
        return Err(Error::RejectDomain("ell_max must be at least 1".into()));
    }
    if replicates == 0 {
        return Err(Error::RejectDomain("need at least one replicate".into()));
    }
    let origin_stats = collect_origin_stats(params, spec, opts, replicates, master_seed, 0)?;
    let mut giant_hits = 0u64;
    let mut ell_hits = vec![0u64; ell_max];
    let mut tail_hits = 0u64;
    for &(size, in_giant) in &origin_stats {
        if in_giant {
            giant_hits += 1;
        } else if size as usize <= ell_max {
            ell_hits[size as usize - 1] += 1;
        } else {
            tail_hits += 1;
        }
    }
    let inv = 1.0 / replicates as f64;
    Ok(ClusterLawEstimate {
        theta_hat: giant_hits as f64 * inv,
        theta_ell: ell_hits.iter().map(|&c| c as f64 * inv).collect(),
        tail_mass: tail_hits as f64 * inv,
        replicates,
        n_used: spec.volume,
    })
}

// --------------------------------------------------------------------------
// Tail analysis: inverting the cluster-size generating function
// --------------------------------------------------------------------------

/// Output of [`hubs_analysis`]: the real-valued solution `hubs_value` of
/// `H(z) = 1 - rho` mapped through `log z / log(1 - p)`, a bracket
/// `hubs_interval` accounting for the truncation of the cluster-size law,
/// the integer ceilings `h_up`/`h_lo` used in tail-rate predictions, and the
/// predicted polynomial rate `rate_upper = (tau - 2) * h_up` of the upper
/// tail (absent for unit marks).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailAnalysis {
    pub hubs_value: f64,
    pub hubs_interval: (f64, f64),
    pub h_up: u64,
    pub h_lo: u64,
    pub rate_upper: Option<f64>,
}

/// Solve `H(z*) = 1 - rho` for the cluster-size generating function
/// `H(z) = sum_l theta_l z^l` and report `log z* / log(1 - p)`.
///
/// The truncated law only brackets `H`: the primary inversion assigns the
/// unobserved tail mass to exponent `ell_max + 1` (the tightest upper bound
/// on `H` available), while the interval comes from dropping the tail
/// entirely (lower end) and counting it as constant mass (upper end). When
/// the tail mass is zero the bracket collapses to the primary value.
pub fn hubs_analysis(
    law: &ClusterLawEstimate,
    rho: f64,
    p: f64,
    tau: ExtReal,
) -> Result<TailAnalysis> {
    if !(0.0..1.0).contains(&rho) || rho <= 0.0 {
        return Err(Error::OutOfRange(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(0.0..=1.0).contains(&p) || p <= 0.0 {
        return Err(Error::OutOfRange(format!("edge retention p must lie in (0, 1], got {p}")));
    }
    let target = 1.0 - rho;
    let tail = law.tail_mass;
    let reachable = 1.0 - law.theta_hat;
    if target <= tail || target > reachable + 1e-12 {
        return Err(Error::OutOfRange(format!(
            "1 - rho = {target} outside the invertible range ({tail}, {reachable}]: \
             rho must lie in [{}, {})",
            law.theta_hat,
            1.0 - tail
        )));
    }
    let rate = |h_up: u64| tau.finite().map(|t| (t - 2.0) * h_up as f64);
    if p >= 1.0 {
        // Every potential edge is kept; the size-biased construction
        // degenerates and the solution is pinned at one.
        return Ok(TailAnalysis {
            hubs_value: 1.0,
            hubs_interval: (1.0, 1.0),
            h_up: 1,
            h_lo: 1,
            rate_upper: rate(1),
        });
    }

    let ell_max = law.theta_ell.len();
    let trunc = |z: f64| -> f64 {
        let mut acc = 0.0;
        let mut zp = 1.0;
        for &t in &law.theta_ell {
            zp *= z;
            acc += t * zp;
        }
        acc
    };
    // Monotone increasing brackets of H on [0, 1].
    let h_primary = |z: f64| trunc(z) + tail * z.powi(ell_max as i32 + 1);
    let h_upper = |z: f64| trunc(z) + tail;
    let h_lower = trunc;
    let bisect = |f: &dyn Fn(f64) -> f64| -> f64 {
        if f(1.0) < target {
            return 1.0; // the bracket never reaches the target
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let log_q = (1.0 - p).ln();
    let to_hubs = |z: f64| {
        if z >= 1.0 {
            0.0
        } else {
            z.ln() / log_q
        }
    };
    let hubs_value = to_hubs(bisect(&h_primary));
    // Larger generating function -> smaller root -> larger hubs value.
    let hubs_hi = to_hubs(bisect(&h_upper));
    let hubs_lo = to_hubs(bisect(&h_lower));
    debug_assert!(hubs_lo <= hubs_value + 1e-6 && hubs_value <= hubs_hi + 1e-6);

    // Integer ceilings, snapping near-integers to defeat solver noise.
    let nearest = hubs_value.round();
    let is_integer = (hubs_value - nearest).abs() <= 1e-9;
    let h_up = if is_integer { nearest as u64 } else { hubs_value.ceil() as u64 };
    let h_lo = if is_integer { nearest as u64 + 1 } else { h_up };
    Ok(TailAnalysis {
        hubs_value,
        hubs_interval: (hubs_lo, hubs_hi),
        h_up,
        h_lo,
        rate_upper: rate(h_up),
    })
}

// --------------------------------------------------------------------------
// Experiment plans
// --------------------------------------------------------------------------

/// The measured quantity of a scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Giant-component fraction per volume; fluctuation scaling.
    Lln,
    /// Probability the giant fraction falls at or below `rho`.
    LowerTail,
    /// Probability the giant fraction reaches `rho` or more.
    UpperTail,
    /// Size of the second-largest component.
    SecondLargest,
    /// Decay of `P(origin cluster >= k, not the largest)` in `k`.
    ClusterDecay,
    /// Vertices with a mark-decreasing edge leaving the target box.
    Boundary,
    /// Edges leaving the target box from its inner half-volume box.
    EdgeBoundary,
    /// Giant fraction as a function of the edge-density parameter.
    ThetaScan,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lln => "lln",
            ExperimentKind::LowerTail => "lower_tail",
            ExperimentKind::UpperTail => "upper_tail",
            ExperimentKind::SecondLargest => "second_largest",
            ExperimentKind::ClusterDecay => "cluster_decay",
            ExperimentKind::Boundary => "boundary",
            ExperimentKind::EdgeBoundary => "edge_boundary",
            ExperimentKind::ThetaScan => "theta_scan",
        }
    }

    pub fn parse(s: &str) -> Option<ExperimentKind> {
        Some(match s {
            "lln" => ExperimentKind::Lln,
            "lower_tail" => ExperimentKind::LowerTail,
            "upper_tail" => ExperimentKind::UpperTail,
            "second_largest" => ExperimentKind::SecondLargest,
            "cluster_decay" => ExperimentKind::ClusterDecay,
            "boundary" => ExperimentKind::Boundary,
            "edge_boundary" => ExperimentKind::EdgeBoundary,
            "theta_scan" => ExperimentKind::ThetaScan,
            _ => return None,
        })
    }

    /// Default box enlargement: experiments that count structure crossing
    /// the target box boundary, or that condition on the cluster of an
    /// interior point, sample a strictly larger region so the structure is
    /// not clipped; pure bulk statistics use the target box itself.
    pub fn default_enlargement(self) -> f64 {
        match self {
            ExperimentKind::Boundary
            | ExperimentKind::EdgeBoundary
            | ExperimentKind::ClusterDecay => 3.0,
            _ => 1.0,
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub params: ModelParams,
    /// Target volumes (expected vertex counts at unit intensity).
    pub n_grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub enlargement: f64,
    /// Giant-fraction threshold for the tail experiments; estimated from a
    /// pilot run when absent.
    pub rho: Option<f64>,
    /// Truncation depth of the cluster-size law.
    pub ell_max: usize,
    /// Cluster sizes probed by the decay experiment.
    pub k_grid: Vec<u64>,
    /// Boundary experiment: count from the half-volume inner box instead of
    /// the full target box.
    pub half: bool,
    /// Edge-density values probed by the scan experiment.
    pub beta_grid: Vec<f64>,
    pub gen_opts: GenOptions,
}

impl ExperimentPlan {
    pub fn new(kind: ExperimentKind, params: ModelParams) -> Self {
        ExperimentPlan {
            kind,
            params,
            n_grid: vec![1000.0, 2000.0, 4000.0, 8000.0],
            replicates: 200,
            seed: 0,
            enlargement: kind.default_enlargement(),
            rho: None,
            ell_max: 64,
            k_grid: vec![8, 11, 16, 23, 32, 45, 64, 91, 128, 181, 256],
            half: false,
            beta_grid: Vec::new(),
            gen_opts: GenOptions::default(),
        }
    }
}

/// One aggregated measurement: the statistic named in `statistic`, measured
/// at scale `n` (a volume, or a cluster size for the decay experiment, or
/// the scanned parameter lane's volume), with a 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: f64,
    pub statistic: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: u64,
}

/// Least-squares fit of transformed measurements, with the closed-form
/// slope prediction when one exists.
///
/// `x_transform` is one of `"log n"`, `"log log n"`, or `"k^<power>"` with
/// the numeric power inlined (e.g. `"k^0.4"`); `y_transform` is `"log"` or
/// `"log(-log)"`. The names fully determine the transforms, so a consumer
/// can reconstruct the fitted curve in raw coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub statistic: String,
    pub x_transform: String,
    pub y_transform: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr_slope: f64,
    pub predicted_slope: Option<f64>,
    /// The transformed points the fit used.
    pub points: Vec<(f64, f64)>,
}

/// Experiment output: per-scale rows, fits, human-readable warnings, and the
/// exponent report for the parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub rows: Vec<ExperimentRow>,
    pub fits: Vec<ScalingFit>,
    pub warnings: Vec<String>,
    pub exponents: ExponentReport,
}

// --------------------------------------------------------------------------
// Driver
// --------------------------------------------------------------------------

/// Run one experiment plan to completion.
pub fn run_scaling_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.params.validate()?;
    validate_plan(plan)?;
    let report = compute_exponents(&plan.params)?;
    let mut warnings = Vec::new();
    if report.multiplicity >= 2 {
        warnings.push(format!(
            "{} scaling mechanisms tie for the dominant exponent (within {TIE_TOL}); \
             the parameters sit on a phase boundary and finite-size effects may be strong",
            report.multiplicity
        ));
    }
    let (rows, fits) = match plan.kind {
        ExperimentKind::Lln => run_lln(plan, &report, &mut warnings)?,
        ExperimentKind::LowerTail | ExperimentKind::UpperTail => {
            run_tail(plan, &report, &mut warnings)?
        }
        ExperimentKind::SecondLargest => run_second_largest(plan, &report, &mut warnings)?,
        ExperimentKind::ClusterDecay => run_cluster_decay(plan, &report, &mut warnings)?,
        ExperimentKind::Boundary | ExperimentKind::EdgeBoundary => {
            run_boundary(plan, &report, &mut warnings)?
        }
        ExperimentKind::ThetaScan => run_theta_scan(plan, &mut warnings)?,
    };
    Ok(ExperimentResult { kind: plan.kind, rows, fits, warnings, exponents: report })
}

fn validate_plan(plan: &ExperimentPlan) -> Result<()> {
    if plan.n_grid.is_empty() {
        return Err(Error::RejectDomain("n_grid must not be empty".into()));
    }
    if plan.n_grid.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::RejectDomain("n_grid entries must be positive and finite".into()));
    }
    if plan.replicates == 0 {
        return Err(Error::RejectDomain("need at least one replicate".into()));
    }
    if plan.ell_max == 0 {
        return Err(Error::RejectDomain("ell_max must be at least 1".into()));
    }
    if let Some(rho) = plan.rho {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::RejectDomain(format!("rho must lie in (0, 1), got {rho}")));
        }
    }
    match plan.kind {
        ExperimentKind::SecondLargest => {
            if plan.n_grid.iter().any(|&v| v < 3.0) {
                return Err(Error::RejectDomain(
                    "second_largest needs volumes of at least 3 (doubly logarithmic scale)"
                        .into(),
                ));
            }
        }
        ExperimentKind::ClusterDecay => {
            if plan.k_grid.is_empty() || plan.k_grid.iter().any(|&k| k == 0) {
                return Err(Error::RejectDomain("k_grid must list positive cluster sizes".into()));
            }
        }
        ExperimentKind::ThetaScan => {
            if plan.beta_grid.is_empty() {
                return Err(Error::RejectDomain("theta_scan requires a beta_grid".into()));
            }
            if plan.beta_grid.iter().any(|&b| !b.is_finite() || b <= 0.0) {
                return Err(Error::RejectDomain("beta_grid entries must be positive".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Compact relabeling of the vertices inside the target box of `spec`:
/// `labels[i]` is the new id of vertex `i`, or `u32::MAX` for vertices of the
/// enlarged sampling region that fall outside the target box. Also returns
/// the number of relabeled vertices.
fn target_box_labels(vs: &crate::model::VertexSet, spec: &BoxSpec) -> (Vec<u32>, usize) {
    let mut labels = vec![u32::MAX; vs.len()];
    let mut next = 0u32;
    for (i, label) in labels.iter_mut().enumerate() {
        if spec.in_target(vs.position(i)) {
            *label = next;
            next += 1;
        }
    }
    (labels, next as usize)
}

/// Per-replicate component summaries at one volume, in replicate order.
/// Returns `(target-box vertex count, summary)` per replicate.
///
/// Component statistics describe the graph induced on the target box: when
/// the sampling region is enlarged, vertices outside the box and edges
/// touching them are excluded before components are computed.
fn collect_summaries(
    params: &ModelParams,
    spec: &BoxSpec,
    opts: &GenOptions,
    replicates: usize,
    master: u64,
    lane: usize,
    with_origin: bool,
) -> Result<Vec<(usize, ComponentSummary)>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(usize, ComponentSummary)> {
            let r_seed = derive_seed(master, (lane * replicates + r) as u64);
            let mut vs = sample_vertices(spec, params, derive_seed(r_seed, 0))?;
            let origin = if with_origin {
                Some(palm_insert_origin(&mut vs, params, derive_seed(r_seed, 1)))
            } else {
                None
            };
            let (labels, n_in) = target_box_labels(&vs, spec);
            let mut uf = UnionFind::new(n_in);
            generate_edges_with(&vs, params, spec, derive_seed(r_seed, 2), opts, |u, v| {
                let (lu, lv) = (labels[u as usize], labels[v as usize]);
                if lu != u32::MAX && lv != u32::MAX {
                    uf.union(lu, lv);
                }
            })?;
            let origin = origin.map(|o| {
                let label = labels[o as usize];
                debug_assert_ne!(label, u32::MAX, "the origin sits inside the target box");
                label
            });
            Ok((n_in, summarize(&mut uf, origin)))
        })
        .collect()
}

/// Per-replicate Palm statistics at one volume: the origin's cluster size and
/// whether that cluster is the largest one, both on the graph induced on the
/// target box. Streams each replicate through a union-find without
/// materializing per-component size lists, so memory stays flat in the
/// replicate count. Seed layout matches [`collect_summaries`] with an origin,
/// so the two collectors are interchangeable statistically.
fn collect_origin_stats(
    params: &ModelParams,
    spec: &BoxSpec,
    opts: &GenOptions,
    replicates: usize,
    master: u64,
    lane: usize,
) -> Result<Vec<(u64, bool)>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(u64, bool)> {
            let r_seed = derive_seed(master, (lane * replicates + r) as u64);
            let mut vs = sample_vertices(spec, params, derive_seed(r_seed, 0))?;
            let origin = palm_insert_origin(&mut vs, params, derive_seed(r_seed, 1));
            let (labels, n_in) = target_box_labels(&vs, spec);
            let origin = labels[origin as usize];
            debug_assert_ne!(origin, u32::MAX, "the origin sits inside the target box");
            let mut uf = UnionFind::new(n_in);
            generate_edges_with(&vs, params, spec, derive_seed(r_seed, 2), opts, |u, v| {
                let (lu, lv) = (labels[u as usize], labels[v as usize]);
                if lu != u32::MAX && lv != u32::MAX {
                    uf.union(lu, lv);
                }
            })?;
            // Largest component with the same tie rule as `summarize`: the
            // first vertex (ascending id) attaining the maximum size wins.
            let mut giant = 0u64;
            let mut giant_root = u32::MAX;
            let mut covered = 0u64;
            for i in 0..n_in as u32 {
                let root = uf.find(i);
                let s = uf.size_of(root) as u64;
                if s > giant {
                    giant = s;
                    giant_root = root;
                }
                if root == i {
                    covered += s;
                }
            }
            assert_eq!(covered, n_in as u64, "component sizes must partition the vertex set");
            Ok((uf.size_of(origin) as u64, uf.find(origin) == giant_root))
        })
        .collect()
}

fn giant_fractions(summaries: &[(usize, ComponentSummary)]) -> Vec<f64> {
    summaries
        .iter()
        .map(|(n, s)| if *n == 0 { 0.0 } else { s.giant as f64 / *n as f64 })
        .collect()
}

fn make_fit(
    statistic: &str,
    x_transform: &str,
    y_transform: &str,
    points: Vec<(f64, f64)>,
    predicted_slope: Option<f64>,
) -> Result<ScalingFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let lf = linear_fit(&xs, &ys)?;
    Ok(ScalingFit {
        statistic: statistic.to_string(),
        x_transform: x_transform.to_string(),
        y_transform: y_transform.to_string(),
        slope: lf.slope,
        intercept: lf.intercept,
        r2: lf.r2,
        stderr_slope: lf.stderr_slope,
        predicted_slope,
        points,
    })
}

/// Minimum per-bin event count for a frequency bin to enter a fit.
const MIN_EVENTS: u64 = 5;

type RowsAndFits = (Vec<ExperimentRow>, Vec<ScalingFit>);

fn run_lln(
    plan: &ExperimentPlan,
    report: &ExponentReport,
    warnings: &mut Vec<String>,
) -> Result<RowsAndFits> {
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (gi, &vol) in plan.n_grid.iter().enumerate() {
        let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
        let summaries = collect_summaries(
            &plan.params,
            &spec,
            &plan.gen_opts,
            plan.replicates,
            plan.seed,
            gi,
            false,
        )?;
        let fracs = giant_fractions(&summaries);
        let (mean, lo, hi) = mean_ci(&fracs);
        rows.push(ExperimentRow {
            n: vol,
            statistic: "theta_hat".into(),
            value: mean,
            ci_low: lo,
            ci_high: hi,
            replicates: plan.replicates as u64,
        });
        let (_, sd) = mean_std(&fracs);
        // Normal-theory interval for a standard deviation.
        let rel = Z95 / (2.0 * (plan.replicates.max(2) as f64 - 1.0)).sqrt();
        rows.push(ExperimentRow {
            n: vol,
            statistic: "theta_hat_std".into(),
            value: sd,
            ci_low: sd * (1.0 - rel).max(0.0),
            ci_high: sd * (1.0 + rel),
            replicates: plan.replicates as u64,
        });
        if sd > 0.0 {
            points.push((vol.ln(), sd.ln()));
        } else {
            warnings.push(format!(
                "n={vol}: giant-fraction fluctuation is exactly zero; bin left out of the fit"
            ));
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientEvents(format!(
            "only {} volumes with nonzero fluctuation; need 3 for a fit",
            points.len()
        )));
    }
    let fit = make_fit(
        "theta_hat_std",
        "log n",
        "log",
        points,
        Some(report.zeta_star - 1.0),
    )?;
    Ok((rows, vec![fit]))
}

fn run_tail(
    plan: &ExperimentPlan,
    report: &ExponentReport,
    warnings: &mut Vec<String>,
) -> Result<RowsAndFits> {
    let lower = plan.kind == ExperimentKind::LowerTail;
    // Pilot cluster law at the median volume: supplies the default threshold
    // and (for the upper tail) the predicted decay rate.
    let law = {
        let mut vols = plan.n_grid.clone();
        vols.sort_unstable_by(|a, b| a.total_cmp(b));
        let median_vol = vols[vols.len() / 2];
        let spec = BoxSpec::new(median_vol, plan.params.d, 1.0)?;
        estimate_cluster_law(
            &plan.params,
            &spec,
            plan.ell_max,
            plan.replicates.min(1000),
            derive_seed(plan.seed, u64::MAX),
            &plan.gen_opts,
        )?
    };
    let rho = match plan.rho {
        Some(r) => r,
        None if lower => {
            if law.theta_hat <= 0.01 {
                return Err(Error::OutOfRange(format!(
                    "pilot giant fraction {:.4} is too small to pick a lower-tail threshold; \
                     supply rho explicitly or use supercritical parameters",
                    law.theta_hat
                )));
            }
            0.5 * law.theta_hat
        }
        None => law.theta_hat + 0.5 * (1.0 - law.theta_hat),
    };
    let predicted = if lower {
        Some(report.zeta_star)
    } else {
        match hubs_analysis(&law, rho, plan.params.p, plan.params.tau) {
            Ok(analysis) => match analysis.rate_upper {
                Some(rate) => Some(-rate),
                None => {
                    warnings.push(
                        "upper-tail rate prediction needs heavy-tailed marks; none emitted"
                            .into(),
                    );
                    None
                }
            },
            Err(e) => {
                warnings.push(format!("upper-tail rate prediction unavailable: {e}"));
                None
            }
        }
    };

    let stat = if lower { "lower_tail_prob" } else { "upper_tail_prob" };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (gi, &vol) in plan.n_grid.iter().enumerate() {
        let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
        let summaries = collect_summaries(
            &plan.params,
            &spec,
            &plan.gen_opts,
            plan.replicates,
            plan.seed,
            gi,
            false,
        )?;
        let fracs = giant_fractions(&summaries);
        let successes = fracs
            .iter()
            .filter(|&&f| if lower { f < rho } else { f > rho })
            .count() as u64;
        let trials = plan.replicates as u64;
        let f = successes as f64 / trials as f64;
        let (lo, hi) = wilson_interval(successes, trials);
        rows.push(ExperimentRow {
            n: vol,
            statistic: stat.into(),
            value: f,
            ci_low: lo,
            ci_high: hi,
            replicates: trials,
        });
        if successes < MIN_EVENTS {
            warnings.push(format!(
                "n={vol}: only {successes} tail events of {trials}; bin left out of the fit"
            ));
            continue;
        }
        if lower {
            if successes == trials {
                warnings.push(format!(
                    "n={vol}: tail event happened every time; doubly logarithmic transform \
                     undefined, bin left out of the fit"
                ));
                continue;
            }
            points.push((vol.ln(), (-f.ln()).ln()));
        } else {
            points.push((vol.ln(), f.ln()));
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientEvents(format!(
            "only {} usable volumes for the {stat} fit; need 3 \
             (rho={rho}; tune rho or raise replicates)",
            points.len()
        )));
    }
    let fit = if lower {
        make_fit(stat, "log n", "log(-log)", points, predicted)?
    } else {
        make_fit(stat, "log n", "log", points, predicted)?
    };
    Ok((rows, vec![fit]))
}

fn run_second_largest(
    plan: &ExperimentPlan,
    report: &ExponentReport,
    warnings: &mut Vec<String>,
) -> Result<RowsAndFits> {
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (gi, &vol) in plan.n_grid.iter().enumerate() {
        let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
        let summaries = collect_summaries(
            &plan.params,
            &spec,
            &plan.gen_opts,
            plan.replicates,
            plan.seed,
            gi,
            false,
        )?;
        let seconds: Vec<f64> = summaries.iter().map(|(_, s)| s.second as f64).collect();
        let (med, q1, q3) = median_iqr(&seconds);
        rows.push(ExperimentRow {
            n: vol,
            statistic: "second_largest".into(),
            value: med,
            ci_low: q1,
            ci_high: q3,
            replicates: plan.replicates as u64,
        });
        let positive = seconds.iter().filter(|&&s| s > 0.0).count() as u64;
        if med <= 0.0 || positive < MIN_EVENTS {
            warnings.push(format!(
                "n={vol}: second-largest component is degenerate \
                 ({positive} positive of {}); bin left out of the fit",
                plan.replicates
            ));
            continue;
        }
        points.push((vol.ln().ln(), med.ln()));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientEvents(format!(
            "only {} usable volumes for the second_largest fit; need 3",
            points.len()
        )));
    }
    let predicted = if report.zeta_star > TIE_TOL {
        Some(1.0 / report.zeta_star)
    } else {
        warnings.push(
            "dominant exponent is zero; no slope prediction for the second-largest component"
                .into(),
        );
        None
    };
    let fit = make_fit("second_largest", "log log n", "log", points, predicted)?;
    Ok((rows, vec![fit]))
}

fn run_cluster_decay(
    plan: &ExperimentPlan,
    report: &ExponentReport,
    warnings: &mut Vec<String>,
) -> Result<RowsAndFits> {
    // Probe at the largest volume only: the decay in k is an asymptotic
    // statement about a single large graph sequence member.
    let (gi, &vol) = plan
        .n_grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("validated non-empty");
    let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
    let origin_stats = collect_origin_stats(
        &plan.params,
        &spec,
        &plan.gen_opts,
        plan.replicates,
        plan.seed,
        gi,
    )?;
    let trials = plan.replicates as u64;
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &k in &plan.k_grid {
        let successes = origin_stats
            .iter()
            .filter(|&&(cluster, in_giant)| cluster > k && !in_giant)
            .count() as u64;
        let f = successes as f64 / trials as f64;
        let (lo, hi) = wilson_interval(successes, trials);
        rows.push(ExperimentRow {
            n: k as f64,
            statistic: "cluster_decay_prob".into(),
            value: f,
            ci_low: lo,
            ci_high: hi,
            replicates: trials,
        });
        if successes < MIN_EVENTS {
            warnings.push(format!(
                "k={k}: only {successes} events of {trials}; bin left out of the fit"
            ));
            continue;
        }
        raw.push((k as f64, f.ln()));
    }
    if raw.len() < 3 {
        return Err(Error::InsufficientEvents(format!(
            "only {} usable cluster sizes for the decay fit; need 3 \
             (raise replicates or trim k_grid)",
            raw.len()
        )));
    }
    let mut fits = Vec::new();
    if report.zeta_star > TIE_TOL {
        let points: Vec<(f64, f64)> =
            raw.iter().map(|&(k, y)| (k.powf(report.zeta_star), y)).collect();
        fits.push(make_fit(
            "cluster_decay_prob",
            &format!("k^{}", report.zeta_star),
            "log",
            points,
            None,
        )?);
    } else {
        warnings.push(
            "dominant exponent is zero; stretched-exponential decay fit skipped".into(),
        );
    }
    if let Some(alt) = report.cluster_decay_alt {
        let points: Vec<(f64, f64)> = raw.iter().map(|&(k, y)| (k.powf(alt), y)).collect();
        fits.push(make_fit("cluster_decay_prob", &format!("k^{alt}"), "log", points, None)?);
    }
    Ok((rows, fits))
}

fn run_boundary(
    plan: &ExperimentPlan,
    report: &ExponentReport,
    warnings: &mut Vec<String>,
) -> Result<RowsAndFits> {
    let edge = plan.kind == ExperimentKind::EdgeBoundary;
    let stat = if edge {
        "edge_boundary"
    } else if plan.half {
        "downward_boundary_half"
    } else {
        "downward_boundary"
    };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (gi, &vol) in plan.n_grid.iter().enumerate() {
        let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
        let counts: Vec<u64> = (0..plan.replicates)
            .into_par_iter()
            .map(|r| -> Result<u64> {
                let r_seed = derive_seed(plan.seed, (gi * plan.replicates + r) as u64);
                let vs = sample_vertices(&spec, &plan.params, derive_seed(r_seed, 0))?;
                let g = generate_cellgrid_with(
                    vs,
                    &plan.params,
                    spec,
                    None,
                    derive_seed(r_seed, 2),
                    &plan.gen_opts,
                )?;
                if edge {
                    edge_boundary_count(&g, vol, plan.params.tau)
                } else {
                    downward_boundary_count(&g, vol, plan.half)
                }
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let (mean, lo, hi) = mean_ci(&values);
        rows.push(ExperimentRow {
            n: vol,
            statistic: stat.into(),
            value: mean,
            ci_low: lo,
            ci_high: hi,
            replicates: plan.replicates as u64,
        });
        let positive = counts.iter().filter(|&&c| c > 0).count() as u64;
        if positive < MIN_EVENTS || mean <= 0.0 {
            warnings.push(format!(
                "n={vol}: only {positive} replicates with boundary structure; \
                 bin left out of the fit"
            ));
            continue;
        }
        points.push((vol.ln(), mean.ln()));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientEvents(format!(
            "only {} usable volumes for the {stat} fit; need 3",
            points.len()
        )));
    }
    let predicted = if edge {
        match report.two_minus_delta_eff {
            ExtReal::Finite(v) => Some(v),
            _ => {
                warnings.push(
                    "edge-boundary exponent is degenerate for these parameters; \
                     no slope prediction emitted"
                        .into(),
                );
                None
            }
        }
    } else if plan.half {
        Some(report.zeta_long)
    } else {
        Some(report.zeta_star)
    };
    let fit = make_fit(stat, "log n", "log", points, predicted)?;
    Ok((rows, vec![fit]))
}

fn run_theta_scan(plan: &ExperimentPlan, warnings: &mut Vec<String>) -> Result<RowsAndFits> {
    let &vol = plan
        .n_grid
        .iter()
        .max_by(|a, b| a.total_cmp(b))
        .expect("validated non-empty");
    let spec = BoxSpec::new(vol, plan.params.d, plan.enlargement)?;
    let mut rows = Vec::new();
    for (bi, &beta) in plan.beta_grid.iter().enumerate() {
        let mut params = plan.params;
        params.beta = beta;
        params.validate()?;
        let summaries = collect_summaries(
            &params,
            &spec,
            &plan.gen_opts,
            plan.replicates,
            plan.seed,
            bi,
            false,
        )?;
        let fracs = giant_fractions(&summaries);
        let (mean, lo, hi) = mean_ci(&fracs);
        rows.push(ExperimentRow {
            n: vol,
            statistic: format!("theta_hat[beta={beta}]"),
            value: mean,
            ci_low: lo,
            ci_high: hi,
            replicates: plan.replicates as u64,
        });
    }
    if rows.iter().all(|r| r.value <= 0.05) {
        warnings.push(
            "every scanned density looks subcritical (giant fraction at or below 0.05)".into(),
        );
    }
    Ok((rows, Vec::new()))
}
