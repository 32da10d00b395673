//! Vertex sampling: boxes, Poisson and lattice point processes, Pareto marks.
//!
//! The target box of volume `n` is `[-n^(1/d)/2, n^(1/d)/2)^d` (half-open, so
//! every point of space is owned by exactly one translate). Experiments may
//! sample vertices in an enlarged concentric box to expose the target to
//! incoming long edges; the `enlargement` factor scales the side length of
//! the sampled region (volume `n * enlargement^d`).
//!
//! Draw order per call is fixed and documented: first the Poisson count,
//! then positions (exponential spacings in d=1, uniforms then a lexicographic
//! sort in d>=2), then one mark uniform per vertex in final position order.
//! Unit marks (`tau = inf`) consume no mark draws.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::model::VertexSet;
use crate::params::{ModelParams, VertexProcess};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

/// Largest expected vertex count a single sample may request.
pub const MAX_EXPECTED_POINTS: f64 = 1e8;

/// Geometry of one sampling run: target volume `volume` (the `n` of the
/// scaling laws) in dimension `d`, sampled inside the concentric box whose
/// side is `enlargement` times the target side (volume
/// `enlargement^d * volume`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub volume: f64,
    pub d: u32,
    pub enlargement: f64,
}

/// Side length of the box of volume `vol` in dimension `d`, snapped to the
/// nearest integer when within relative 1e-9 (so lattice boxes built from
/// integer volumes get exact sides despite `powf` rounding).
pub(crate) fn side_of_volume(vol: f64, d: u32) -> f64 {
    let s = if d == 1 { vol } else { vol.powf(1.0 / d as f64) };
    let r = s.round();
    if (s - r).abs() < 1e-9 * s.max(1.0) {
        r
    } else {
        s
    }
}

impl BoxSpec {
    pub fn new(volume: f64, d: u32, enlargement: f64) -> Result<Self> {
        if !(volume.is_finite() && volume > 0.0) {
            return Err(Error::RejectDomain(format!("box volume must be > 0, got {volume}")));
        }
        if d == 0 {
            return Err(Error::RejectDomain("d must be >= 1".into()));
        }
        if !(enlargement.is_finite() && enlargement >= 1.0) {
            return Err(Error::RejectDomain(format!(
                "enlargement must be >= 1, got {enlargement}"
            )));
        }
        Ok(BoxSpec { volume, d, enlargement })
    }

    pub fn sampling_volume(&self) -> f64 {
        self.volume * self.enlargement.powi(self.d as i32)
    }

    /// Side of the sampled (enlarged) box.
    pub fn side(&self) -> f64 {
        side_of_volume(self.sampling_volume(), self.d)
    }

    /// Side of the target box.
    pub fn target_side(&self) -> f64 {
        side_of_volume(self.volume, self.d)
    }

    /// Whether `pos` lies in the concentric box of volume `vol` (half-open).
    pub fn in_box_of_volume(&self, pos: &[f64], vol: f64) -> bool {
        let half = side_of_volume(vol, self.d) / 2.0;
        pos.iter().all(|&x| (-half..half).contains(&x))
    }

    /// Whether `pos` lies in the target box.
    pub fn in_target(&self, pos: &[f64]) -> bool {
        self.in_box_of_volume(pos, self.volume)
    }
}

/// Quantile transform of the mark law: the mark whose survival probability is
/// `u`, i.e. `u^(-1/(tau-1))` for `u` in (0, 1]. `tau = inf` yields 1.
/// Exponents -1/2 and -2/3 (`tau` = 3 and 2.5) take root-based fast paths
/// that agree with `powf` to a unit or two in the last place.
pub fn pareto_inverse(u: f64, tau: ExtReal) -> f64 {
    debug_assert!(u > 0.0 && u <= 1.0);
    let t = match tau {
        ExtReal::Finite(t) => t,
        _ => return 1.0,
    };
    let e = -1.0 / (t - 1.0);
    if e == -0.5 {
        1.0 / u.sqrt()
    } else if e == -2.0 / 3.0 {
        let c = u.cbrt();
        1.0 / (c * c)
    } else {
        u.powf(e)
    }
}

fn draw_mark<R: Rng>(rng: &mut R, tau: ExtReal) -> f64 {
    if tau.is_finite() {
        // 1 - u is in (0, 1], avoiding an infinite mark at u = 0.
        let u: f64 = rng.random();
        pareto_inverse(1.0 - u, tau)
    } else {
        1.0
    }
}

/// Sample the vertex set for one replicate. Positions are in nondecreasing
/// lexicographic order; the result is a pure function of `(spec, params,
/// seed)`.
pub fn sample_vertices(spec: &BoxSpec, params: &ModelParams, seed: u64) -> Result<VertexSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match params.vertex_process {
        VertexProcess::Ppp => sample_ppp(spec, params, &mut rng),
        VertexProcess::Lattice => sample_lattice(spec, params, &mut rng),
    }
}

fn sample_ppp(spec: &BoxSpec, params: &ModelParams, rng: &mut ChaCha8Rng) -> Result<VertexSet> {
    let vol = spec.sampling_volume();
    if vol > MAX_EXPECTED_POINTS {
        return Err(Error::Capacity(format!(
            "expected vertex count {vol:.3e} exceeds limit {MAX_EXPECTED_POINTS:.0e}"
        )));
    }
    let n = Poisson::new(vol)
        .map_err(|e| Error::RejectDomain(format!("invalid Poisson intensity: {e}")))?
        .sample(rng) as usize;
    let d = spec.d as usize;
    let side = spec.side();
    let mut vs = VertexSet::with_capacity(spec.d, n);

    if d == 1 {
        // Exponential spacings: partial sums of n+1 unit exponentials,
        // normalized by the total, are exactly the order statistics of n
        // uniforms — no sort needed.
        let mut sums = Vec::with_capacity(n + 1);
        let mut acc = 0.0f64;
        for _ in 0..=n {
            acc += rng.sample::<f64, _>(Exp1);
            sums.push(acc);
        }
        let total = *sums.last().expect("n+1 >= 1 spacings");
        vs.positions.extend(sums[..n].iter().map(|s| (s / total - 0.5) * side));
        vs.marks.reserve(n);
        for _ in 0..n {
            vs.marks.push(draw_mark(rng, params.tau));
        }
    } else {
        let mut coords = vec![0.0f64; n * d];
        for c in coords.iter_mut() {
            *c = (rng.random::<f64>() - 0.5) * side;
        }
        // Sort vertices lexicographically by position for a canonical order.
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            let pa = &coords[a as usize * d..a as usize * d + d];
            let pb = &coords[b as usize * d..b as usize * d + d];
            pa.iter().zip(pb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for &i in &order {
            vs.positions.extend_from_slice(&coords[i as usize * d..i as usize * d + d]);
        }
        vs.marks.reserve(n);
        for _ in 0..n {
            vs.marks.push(draw_mark(rng, params.tau));
        }
    }
    Ok(vs)
}

fn sample_lattice(spec: &BoxSpec, params: &ModelParams, rng: &mut ChaCha8Rng) -> Result<VertexSet> {
    let side = spec.side();
    let d = spec.d as usize;
    // Integer points k with -side/2 <= k < side/2 per axis.
    let lo = (-side / 2.0).ceil() as i64;
    let hi = (side / 2.0).ceil() as i64 - 1;
    let per_axis = (hi - lo + 1).max(0) as f64;
    let total = per_axis.powi(d as i32);
    if total > MAX_EXPECTED_POINTS {
        return Err(Error::Capacity(format!(
            "lattice vertex count {total:.3e} exceeds limit {MAX_EXPECTED_POINTS:.0e}"
        )));
    }
    let total = total as usize;
    let mut vs = VertexSet::with_capacity(spec.d, total);
    let mut point = vec![lo; d];
    let mut pos = vec![0.0f64; d];
    for _ in 0..total {
        for (x, &k) in pos.iter_mut().zip(point.iter()) {
            *x = k as f64;
        }
        vs.push(&pos, 1.0);
        // Row-major increment: last axis fastest.
        for axis in (0..d).rev() {
            point[axis] += 1;
            if point[axis] <= hi {
                break;
            }
            point[axis] = lo;
        }
    }
    if params.tau.is_finite() {
        for m in vs.marks.iter_mut() {
            *m = draw_mark(rng, params.tau);
        }
    }
    Ok(vs)
}

/// Append the origin with a freshly drawn mark, returning its vertex id.
/// This realizes the point-of-view vertex for cluster statistics on a Poisson
/// sample; for lattice processes the origin is already a vertex and callers
/// should locate it instead of appending.
pub fn palm_insert_origin(vs: &mut VertexSet, params: &ModelParams, seed: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = vs.len() as u32;
    let origin = vec![0.0f64; vs.d as usize];
    vs.push(&origin, draw_mark(&mut rng, params.tau));
    id
}

/// Index of the lattice vertex at the origin, if present.
pub fn find_origin(vs: &VertexSet) -> Option<u32> {
    (0..vs.len()).find(|&i| vs.position(i).iter().all(|&x| x == 0.0)).map(|i| i as u32)
}
