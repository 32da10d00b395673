//! Graph samplers.
//!
//! Two generators produce the same edge distribution:
//!
//! - [`generate_naive`]: one uniform draw per vertex pair, compared against
//!   the pair's connection probability. Quadratic; the reference.
//! - [`generate_cellgrid`]: bins vertices into a cell grid, draws candidate
//!   pairs blockwise from dominating envelope probabilities, and thins each
//!   candidate to its exact connection probability. Near-linear for the
//!   parameter ranges of interest.
//!
//! The cell-grid sampler is exact, not approximate: within each block of
//! pairs it samples a Binomial(T, q) count of candidates with q an upper
//! bound for every pair probability in the block, picks the candidate slots
//! uniformly, and accepts each with ratio (true probability)/q — which
//! realizes independent Bernoulli draws at the true probability for every
//! pair. Blocks partition the set of pairs, so each pair is decided exactly
//! once. Some blocks contain phantom slots that correspond to no real pair;
//! these are rejected without consuming randomness, which leaves the law of
//! the real pairs untouched.
//!
//! All randomness comes from a single ChaCha8 stream consumed in a fixed
//! traversal order, so a graph is a pure function of `(vertices, params,
//! seed)`; thread counts or scheduling cannot change it.

use crate::error::{Error, Result};
use crate::model::VertexSet;
use crate::params::ModelParams;
use crate::pointprocess::BoxSpec;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use std::collections::HashSet;
use std::io::Write;

/// Vertex-count limit for the quadratic reference generator.
pub const NAIVE_MAX_VERTICES: usize = 50_000;

/// A sampled graph: vertices, undirected edges as `(u, v)` pairs with
/// `u < v` in ascending order, the box geometry, and the distinguished
/// vertex (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    pub vertices: VertexSet,
    pub edges: Vec<(u32, u32)>,
    pub box_spec: BoxSpec,
    pub origin: Option<u32>,
}

impl SpatialGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Write a plain-text edge list: one `u v` pair per line.
    pub fn write_edge_list(&self, mut w: impl Write) -> std::io::Result<()> {
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Write vertices as commented header lines,
    /// `# vertex <id> <x_1> ... <x_d> <mark>`, one per vertex. Prepending
    /// this block to an edge list yields a single self-describing file whose
    /// `#` lines carry the geometry and whose remaining lines are edges.
    pub fn write_vertex_list(&self, mut w: impl Write) -> std::io::Result<()> {
        for i in 0..self.vertices.len() {
            write!(w, "# vertex {i}")?;
            for &c in self.vertices.position(i) {
                write!(w, " {c}")?;
            }
            writeln!(w, " {}", self.vertices.mark(i))?;
        }
        Ok(())
    }
}

/// Far-phase strategy of the cell-grid sampler.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarMode {
    /// Visit every far cell pair. Exact work O(#cells^2).
    PairLoop,
    /// Group far cell pairs by their displacement vector; requires unit
    /// marks (constant kernel).
    Displacement,
    /// Group vertices into dyadic mark layers; window pass for cell pairs
    /// within kernel reach, shell-group pass for the polynomial tail.
    Layered,
}

/// Tuning knobs for the cell-grid sampler. Defaults are chosen for general
/// use; experiments may tighten them. Changing knobs changes which exact
/// algorithm runs, never the sampled distribution.
#[doc(hidden)]
#[derive(Debug, Clone)]
pub struct GenOptions {
    /// Force a far-phase mode (default: automatic).
    pub far_mode: Option<FarMode>,
    /// Target mean number of vertices per grid cell.
    pub occupancy: f64,
    /// Scales the layered window radius up (>= 1); larger windows shrink the
    /// envelope waste of the tail pass at the cost of more bucket visits.
    pub window_factor: f64,
    /// Geometric growth of tail shell groups (> 1); smaller means tighter
    /// distance envelopes and more groups.
    pub group_growth: f64,
    /// Largest `#cells^2 / 2` for which the automatic mode picks
    /// [`FarMode::PairLoop`].
    pub pairloop_limit: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            far_mode: None,
            occupancy: 4.0,
            window_factor: 1.0,
            group_growth: 2.0,
            pairloop_limit: 4e6,
        }
    }
}

/// Kernel dispatch resolved once per run; every variant reproduces
/// [`kernel_eval`] bit-for-bit for its parameter range.
#[derive(Clone, Copy)]
enum KernelFn {
    /// Interpolation with `sigma = 0`.
    Max,
    /// Interpolation with `sigma = 1` (`max * min = w1 * w2`).
    Product,
    /// Interpolation with general `sigma`.
    MaxMinPow(f64),
    /// Sum kernel in one dimension.
    Sum1,
    /// Sum kernel in general dimension.
    SumD(u32),
}

impl KernelFn {
    fn resolve(kernel: crate::params::KernelKind, d: u32) -> KernelFn {
        match kernel {
            crate::params::KernelKind::Interpolation { sigma } => {
                if sigma == 0.0 {
                    KernelFn::Max
                } else if sigma == 1.0 {
                    KernelFn::Product
                } else {
                    KernelFn::MaxMinPow(sigma)
                }
            }
            crate::params::KernelKind::Sum => {
                if d == 1 {
                    KernelFn::Sum1
                } else {
                    KernelFn::SumD(d)
                }
            }
        }
    }

    #[inline]
    fn eval(self, w1: f64, w2: f64) -> f64 {
        match self {
            KernelFn::Max => {
                if w1 >= w2 {
                    w1
                } else {
                    w2
                }
            }
            KernelFn::Product => w1 * w2,
            KernelFn::MaxMinPow(sigma) => {
                let (hi, lo) = if w1 >= w2 { (w1, w2) } else { (w2, w1) };
                hi * lo.powf(sigma)
            }
            KernelFn::Sum1 => w1 + w2,
            KernelFn::SumD(d) => {
                let inv_d = 1.0 / d as f64;
                (w1.powf(inv_d) + w2.powf(inv_d)).powi(d as i32)
            }
        }
    }
}

/// Precomputed per-run connection context.
struct Ctx<'a> {
    vs: &'a VertexSet,
    d: u32,
    beta: f64,
    p: f64,
    threshold: bool,
    alpha: f64,
    /// `alpha` as a small integer exponent, when exact.
    alpha_int: Option<i32>,
    /// `2 * alpha` as a small integer exponent, when exact (half-integer
    /// `alpha`, e.g. 1.5).
    alpha_half2: Option<i32>,
    kfn: KernelFn,
}

impl<'a> Ctx<'a> {
    fn new(vs: &'a VertexSet, params: &ModelParams) -> Self {
        let alpha = params.alpha_f();
        let alpha_int = if params.alpha.is_finite() && alpha.fract() == 0.0 && alpha <= 64.0 {
            Some(alpha as i32)
        } else {
            None
        };
        let twice = alpha * 2.0;
        let alpha_half2 = if params.alpha.is_finite()
            && alpha_int.is_none()
            && twice.fract() == 0.0
            && twice <= 128.0
        {
            Some(twice as i32)
        } else {
            None
        };
        Ctx {
            vs,
            d: params.d,
            beta: params.beta,
            p: params.p,
            threshold: params.is_threshold(),
            alpha,
            alpha_int,
            alpha_half2,
            kfn: KernelFn::resolve(params.kernel, params.d),
        }
    }

    #[inline]
    fn kernel(&self, w1: f64, w2: f64) -> f64 {
        self.kfn.eval(w1, w2)
    }

    /// Probability for kernel value `kappa` at distance^d `dist_pow_d`.
    #[inline]
    fn prob(&self, kappa: f64, dist_pow_d: f64) -> f64 {
        let reach = self.beta * kappa;
        if reach >= dist_pow_d {
            return self.p; // saturated profile (covers coincident points)
        }
        if self.threshold {
            return 0.0;
        }
        let x = reach / dist_pow_d;
        match (self.alpha_int, self.alpha_half2) {
            (Some(k), _) => self.p * x.powi(k),
            (None, Some(k2)) => self.p * x.sqrt().powi(k2),
            (None, None) => self.p * x.powf(self.alpha),
        }
    }

    /// Exact connection probability of vertices `a`, `b`.
    #[inline(always)]
    fn pair_prob(&self, a: u32, b: u32) -> f64 {
        let (a, b) = (a as usize, b as usize);
        let kappa = self.kernel(self.vs.marks[a], self.vs.marks[b]);
        // Flat-slice distance for the common dimensions; same arithmetic as
        // `VertexSet::distance_pow_d`.
        let pos = &self.vs.positions;
        let dist = match self.d {
            1 => (pos[a] - pos[b]).abs(),
            2 => {
                let dx = pos[2 * a] - pos[2 * b];
                let dy = pos[2 * a + 1] - pos[2 * b + 1];
                dx * dx + dy * dy
            }
            _ => self.vs.distance_pow_d(a, b),
        };
        self.prob(kappa, dist)
    }
}

/// Exact Binomial(t, p) sample. Small means use an inverse-CDF walk (one
/// uniform in the common K=0 case); large means defer to the library
/// sampler.
fn sample_binomial<R: Rng>(rng: &mut R, t: u64, p: f64) -> u64 {
    if t == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return t;
    }
    let mean = t as f64 * p;
    if mean < 16.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut pk = ((t as f64) * (-p).ln_1p()).exp(); // (1-p)^t
        let mut cum = pk;
        let r = p / (1.0 - p);
        while u >= cum {
            k += 1;
            if k > t {
                return t;
            }
            pk *= ((t - k + 1) as f64 / k as f64) * r;
            cum += pk;
            if pk < 1e-290 && u >= cum {
                // Far tail beyond float resolution.
                return k;
            }
        }
        k
    } else {
        rand_distr::Binomial::new(t, p).expect("valid binomial parameters").sample(rng)
    }
}

/// Uniformly sample `k` distinct slots from `[0, t)`, ascending.
fn sample_slots<R: Rng>(rng: &mut R, t: u64, k: u64, out: &mut Vec<u64>) {
    out.clear();
    debug_assert!(k <= t);
    if k == 0 {
        return;
    }
    if k == t {
        out.extend(0..t);
        return;
    }
    if t <= 64.max(k.saturating_mul(8)) {
        // Sequential selection sampling: exact, already sorted.
        let mut need = k;
        let mut left = t;
        for slot in 0..t {
            if need == 0 {
                break;
            }
            let u: f64 = rng.random();
            if u * (left as f64) < need as f64 {
                out.push(slot);
                need -= 1;
            }
            left -= 1;
        }
        return;
    }
    if k <= 16 {
        // Rejection: t >= 8k makes duplicates rare.
        while (out.len() as u64) < k {
            let s = rng.random_range(0..t);
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out.sort_unstable();
        return;
    }
    // Floyd's algorithm for large k.
    let mut chosen: HashSet<u64> = HashSet::with_capacity(k as usize);
    for j in (t - k)..t {
        let x = rng.random_range(0..=j);
        if chosen.insert(x) {
            out.push(x);
        } else {
            chosen.insert(j);
            out.push(j);
        }
    }
    out.sort_unstable();
}

/// Reference generator: every pair gets one uniform draw.
pub fn generate_naive(
    vertices: VertexSet,
    params: &ModelParams,
    box_spec: BoxSpec,
    origin: Option<u32>,
    seed: u64,
) -> Result<SpatialGraph> {
    params.validate()?;
    let n = vertices.len();
    if n > NAIVE_MAX_VERTICES {
        return Err(Error::Capacity(format!(
            "naive generator limited to {NAIVE_MAX_VERTICES} vertices, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = Ctx::new(&vertices, params);
    let mut edges = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            let u: f64 = rng.random();
            if u < ctx.pair_prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    Ok(SpatialGraph { vertices, edges, box_spec, origin })
}

/// Cell-grid generator; equal in distribution to [`generate_naive`].
pub fn generate_cellgrid(
    vertices: VertexSet,
    params: &ModelParams,
    box_spec: BoxSpec,
    origin: Option<u32>,
    seed: u64,
) -> Result<SpatialGraph> {
    generate_cellgrid_with(vertices, params, box_spec, origin, seed, &GenOptions::default())
}

#[doc(hidden)]
pub fn generate_cellgrid_with(
    vertices: VertexSet,
    params: &ModelParams,
    box_spec: BoxSpec,
    origin: Option<u32>,
    seed: u64,
    opts: &GenOptions,
) -> Result<SpatialGraph> {
    let mut edges = Vec::new();
    generate_edges_with(&vertices, params, &box_spec, seed, opts, |u, v| edges.push((u, v)))?;
    edges.sort_unstable();
    debug_assert!(edges.windows(2).all(|w| w[0] != w[1]), "duplicate edge emitted");
    Ok(SpatialGraph { vertices, edges, box_spec, origin })
}

/// Stream the edges of one exact sample to `emit` (each with `u < v`, order
/// deterministic but unsorted) without materializing the edge list.
pub fn generate_edges_with(
    vertices: &VertexSet,
    params: &ModelParams,
    box_spec: &BoxSpec,
    seed: u64,
    opts: &GenOptions,
    mut emit: impl FnMut(u32, u32),
) -> Result<()> {
    params.validate()?;
    if vertices.d != params.d || box_spec.d != params.d {
        return Err(Error::RejectInconsistent(format!(
            "dimension mismatch: params d={}, vertices d={}, box d={}",
            params.d, vertices.d, box_spec.d
        )));
    }
    let n = vertices.len();
    if n < 2 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = Ctx::new(vertices, params);

    // --- Hub phase -------------------------------------------------------
    // A vertex whose kernel reach covers the whole box diameter connects to
    // every other vertex with probability exactly p (the profile saturates).
    // Handle such vertices directly so the grid only ever sees bounded
    // kernel reaches.
    let side = box_spec.side();
    let diam_pow_d = side.powi(params.d as i32) * (params.d as f64).powf(params.d as f64 / 2.0);
    let is_hub: Vec<bool> =
        (0..n).map(|i| ctx.beta * ctx.kernel(vertices.mark(i), 1.0) >= diam_pow_d).collect();
    let hubs: Vec<u32> = (0..n as u32).filter(|&i| is_hub[i as usize]).collect();
    if !hubs.is_empty() {
        let work = hubs.len() as u128 * n as u128;
        if work > 2_000_000_000 {
            return Err(Error::Capacity(format!(
                "{} saturated-reach vertices over {n} vertices is beyond the pair budget",
                hubs.len()
            )));
        }
        for &h in &hubs {
            for v in 0..n as u32 {
                if v == h || (is_hub[v as usize] && v < h) {
                    continue;
                }
                if ctx.p >= 1.0 || rng.random::<f64>() < ctx.p {
                    emit(h.min(v), h.max(v));
                }
            }
        }
        if hubs.len() == n {
            return Ok(());
        }
    }

    // --- Grid ------------------------------------------------------------
    let grid = CellGrid::build(vertices, box_spec, &is_hub, opts.occupancy)?;

    // Near phase: all pairs in cells at Chebyshev distance <= 1 get a direct
    // decision (a coin unless the probability is 0 or 1).
    near_phase(&grid, &ctx, &mut rng, &mut emit);

    // Far phase: cells at Chebyshev distance >= 2.
    let far_mode = opts.far_mode.unwrap_or_else(|| {
        let cells = grid.n_cells as f64;
        if cells * cells / 2.0 <= opts.pairloop_limit {
            FarMode::PairLoop
        } else if !params.tau.is_finite() {
            FarMode::Displacement
        } else {
            FarMode::Layered
        }
    });
    match far_mode {
        FarMode::PairLoop => {
            far_pairloop(&grid, &ctx, &mut rng, &mut emit);
            Ok(())
        }
        FarMode::Displacement => {
            if params.tau.is_finite() {
                return Err(Error::RejectInconsistent(
                    "displacement mode requires unit marks".into(),
                ));
            }
            far_displacement(&grid, &ctx, &mut rng, &mut emit)
        }
        FarMode::Layered => far_layered(&grid, &ctx, &mut rng, opts, &mut emit),
    }
}

// --------------------------------------------------------------------------
// Cell grid
// --------------------------------------------------------------------------

struct CellGrid {
    d: usize,
    /// Cells per axis.
    m: i64,
    /// Cell side length.
    r0: f64,
    n_cells: usize,
    /// CSR vertex lists per cell (vertex ids ascending within a cell).
    start: Vec<usize>,
    verts: Vec<u32>,
    /// Max mark per cell (0 for empty cells).
    wmax: Vec<f64>,
    /// Largest cell population.
    max_count: usize,
    /// Absolute slack subtracted from distance lower bounds to stay a true
    /// lower bound under float rounding of the binning arithmetic.
    dist_slack: f64,
}

impl CellGrid {
    fn build(vs: &VertexSet, spec: &BoxSpec, exclude: &[bool], occupancy: f64) -> Result<CellGrid> {
        let d = spec.d as usize;
        let side = spec.side();
        let n_included = exclude.iter().filter(|&&x| !x).count().max(1);
        let r0_target = (occupancy * spec.sampling_volume() / n_included as f64)
            .powf(1.0 / d as f64)
            .max(1.0);
        let m = ((side / r0_target).floor() as i64).max(1);
        let r0 = side / m as f64;
        let n_cells = (m as u64)
            .checked_pow(d as u32)
            .filter(|&c| c <= u32::MAX as u64)
            .ok_or_else(|| {
                Error::Capacity(format!("cell grid {m}^{d} exceeds the addressable cell budget"))
            })? as usize;

        let mut counts = vec![0usize; n_cells];
        let half_side = side / 2.0;
        let inv_r0 = 1.0 / r0;
        // Truncating cast instead of floor: the scaled coordinate exceeds -1,
        // so truncation and floor agree after the clamp. Any boundary drift
        // from the reciprocal multiply is far below `dist_slack`.
        let cell_of = |pos: &[f64]| -> usize {
            let mut id = 0usize;
            for &x in pos {
                let c = (((x + half_side) * inv_r0) as i64).clamp(0, m - 1);
                id = id * m as usize + c as usize;
            }
            id
        };
        for i in 0..vs.len() {
            if !exclude[i] {
                counts[cell_of(vs.position(i))] += 1;
            }
        }
        let mut start = Vec::with_capacity(n_cells + 1);
        let mut acc = 0usize;
        start.push(0);
        for c in &counts {
            acc += c;
            start.push(acc);
        }
        let mut fill = start.clone();
        let mut verts = vec![0u32; acc];
        let mut wmax = vec![0.0f64; n_cells];
        for i in 0..vs.len() {
            if exclude[i] {
                continue;
            }
            let c = cell_of(vs.position(i));
            verts[fill[c]] = i as u32;
            fill[c] += 1;
            wmax[c] = wmax[c].max(vs.mark(i));
        }
        let max_count = counts.iter().copied().max().unwrap_or(0);
        Ok(CellGrid {
            d,
            m,
            r0,
            n_cells,
            start,
            verts,
            wmax,
            max_count,
            dist_slack: side * 1e-12,
        })
    }

    #[inline]
    fn members(&self, cell: usize) -> &[u32] {
        &self.verts[self.start[cell]..self.start[cell + 1]]
    }

    #[inline]
    fn count(&self, cell: usize) -> usize {
        self.start[cell + 1] - self.start[cell]
    }

    /// Decode a cell id into per-axis coordinates.
    #[inline]
    fn coords_of(&self, cell: usize, out: &mut [i64]) {
        if self.d == 1 {
            out[0] = cell as i64;
            return;
        }
        let mut c = cell;
        for k in (0..self.d).rev() {
            out[k] = (c % self.m as usize) as i64;
            c /= self.m as usize;
        }
    }

    fn id_of(&self, coords: &[i64]) -> usize {
        let mut id = 0usize;
        for &c in coords {
            debug_assert!((0..self.m).contains(&c));
            id = id * self.m as usize + c as usize;
        }
        id
    }

    /// Lower bound for `dist^d` between any two points of cells offset by
    /// `delta`, valid under float rounding.
    fn dist_min_pow_d(&self, delta: &[i64]) -> f64 {
        let mut norm_sq = 0.0f64;
        for &dc in delta {
            let k = dc.unsigned_abs();
            if k >= 2 {
                let gap = ((k - 1) as f64 * self.r0 - self.dist_slack).max(0.0);
                norm_sq += gap * gap;
            }
        }
        match self.d {
            1 => norm_sq.sqrt(),
            2 => norm_sq,
            _ => norm_sq.powf(self.d as f64 / 2.0),
        }
    }
}

/// Envelope probability for a block: prob(kappa_env, dist_env), slightly
/// inflated to stay an upper bound for every pair in the block under float
/// rounding (the acceptance ratio caps at 1, so inflation only costs work).
#[inline]
fn envelope(ctx: &Ctx, kappa_env: f64, dist_min_pow_d: f64) -> f64 {
    let raw = ctx.prob(kappa_env, dist_min_pow_d);
    if raw == 0.0 {
        0.0
    } else {
        (raw * (1.0 + 1e-12)).min(1.0)
    }
}

/// Decide one candidate pair given its envelope: accept with probability
/// `pij / q`.
#[inline]
fn accept_pair<R: Rng>(rng: &mut R, ctx: &Ctx, a: u32, b: u32, q: f64) -> bool {
    let pij = ctx.pair_prob(a, b);
    if pij <= 0.0 {
        return false;
    }
    assert!(
        pij <= q * (1.0 + 1e-9),
        "envelope violated: pair probability {pij} exceeds block bound {q}"
    );
    pij >= q || rng.random::<f64>() < pij / q
}

fn near_phase<R: Rng>(grid: &CellGrid, ctx: &Ctx, rng: &mut R, emit: &mut impl FnMut(u32, u32)) {
    let d = grid.d;
    // Lexicographically positive neighbor offsets in {-1,0,1}^d.
    let mut neighbor_deltas: Vec<Vec<i64>> = Vec::new();
    let mut delta = vec![-1i64; d];
    'outer: loop {
        if delta.iter().any(|&x| x != 0) && *delta.iter().find(|&&x| x != 0).unwrap() > 0 {
            neighbor_deltas.push(delta.clone());
        }
        for k in (0..d).rev() {
            delta[k] += 1;
            if delta[k] <= 1 {
                continue 'outer;
            }
            delta[k] = -1;
        }
        break;
    }

    let mut coords = vec![0i64; d];
    let mut ncoords = vec![0i64; d];
    for cell in 0..grid.n_cells {
        let members = grid.members(cell);
        if members.is_empty() {
            continue;
        }
        // Within-cell pairs.
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                decide_direct(rng, ctx, a, b, emit);
            }
        }
        // Pairs into lex-positive neighbor cells.
        grid.coords_of(cell, &mut coords);
        'delta: for nd in &neighbor_deltas {
            for k in 0..d {
                ncoords[k] = coords[k] + nd[k];
                if !(0..grid.m).contains(&ncoords[k]) {
                    continue 'delta;
                }
            }
            let other = grid.members(grid.id_of(&ncoords));
            for &a in members {
                for &b in other {
                    decide_direct(rng, ctx, a, b, emit);
                }
            }
        }
    }
}

/// Direct decision for one pair: skip degenerate probabilities, coin
/// otherwise.
#[inline]
fn decide_direct<R: Rng>(rng: &mut R, ctx: &Ctx, a: u32, b: u32, emit: &mut impl FnMut(u32, u32)) {
    let pij = ctx.pair_prob(a, b);
    if pij >= 1.0 || (pij > 0.0 && rng.random::<f64>() < pij) {
        emit(a.min(b), a.max(b));
    }
}

/// Sample one block of pairs: `t` slots under envelope `q`, decoded by
/// `pair_of(slot) -> Option<(a, b)>` (`None` marks a phantom slot).
fn sample_block<R: Rng>(
    rng: &mut R,
    ctx: &Ctx,
    t: u64,
    q: f64,
    slots: &mut Vec<u64>,
    mut pair_of: impl FnMut(u64) -> Option<(u32, u32)>,
    emit: &mut impl FnMut(u32, u32),
) {
    if t == 0 || q <= 0.0 {
        return;
    }
    let k = sample_binomial(rng, t, q);
    if k == 0 {
        return;
    }
    if k == t {
        // Every slot is a candidate; the slot sampler would return exactly
        // 0..t, so enumerate directly without materializing the list.
        for s in 0..t {
            if let Some((a, b)) = pair_of(s) {
                if accept_pair(rng, ctx, a, b, q) {
                    emit(a.min(b), a.max(b));
                }
            }
        }
        return;
    }
    sample_slots(rng, t, k, slots);
    for &s in slots.iter() {
        if let Some((a, b)) = pair_of(s) {
            if accept_pair(rng, ctx, a, b, q) {
                emit(a.min(b), a.max(b));
            }
        }
    }
}

fn far_pairloop<R: Rng>(grid: &CellGrid, ctx: &Ctx, rng: &mut R, emit: &mut impl FnMut(u32, u32)) {
    let d = grid.d;
    let mut ca = vec![0i64; d];
    let mut cb = vec![0i64; d];
    let mut delta = vec![0i64; d];
    let mut slots = Vec::new();
    for a_cell in 0..grid.n_cells {
        let na = grid.count(a_cell);
        if na == 0 {
            continue;
        }
        grid.coords_of(a_cell, &mut ca);
        for b_cell in (a_cell + 1)..grid.n_cells {
            let nb = grid.count(b_cell);
            if nb == 0 {
                continue;
            }
            grid.coords_of(b_cell, &mut cb);
            let mut cheb = 0i64;
            for k in 0..d {
                delta[k] = cb[k] - ca[k];
                cheb = cheb.max(delta[k].abs());
            }
            if cheb <= 1 {
                continue; // near phase already decided these
            }
            let q = envelope(ctx, ctx.kernel(grid.wmax[a_cell], grid.wmax[b_cell]), grid.dist_min_pow_d(&delta));
            if q <= 0.0 {
                continue;
            }
            let amembers = grid.members(a_cell);
            let bmembers = grid.members(b_cell);
            sample_block(
                rng,
                ctx,
                (na * nb) as u64,
                q,
                &mut slots,
                |s| Some((amembers[(s / nb as u64) as usize], bmembers[(s % nb as u64) as usize])),
                emit,
            );
        }
    }
}

fn far_displacement<R: Rng>(
    grid: &CellGrid,
    ctx: &Ctx,
    rng: &mut R,
    emit: &mut impl FnMut(u32, u32),
) -> Result<()> {
    let d = grid.d;
    let m = grid.m;
    let kappa = ctx.kernel(1.0, 1.0);
    // Threshold profiles have a hard reach: displacements beyond it have
    // probability zero for every pair and are skipped entirely (the +1 makes
    // the cutoff strict under float rounding).
    let rc: i64 = if ctx.threshold {
        let reach = (ctx.beta * kappa).powf(1.0 / d as f64);
        (((reach / grid.r0).ceil() as i64) + 1).min(m - 1)
    } else {
        m - 1
    };

    let cmax = grid.max_count as u64;
    if cmax == 0 || rc < 2 {
        return Ok(());
    }
    let mut delta = vec![-rc; d];
    let mut slots = Vec::new();
    let mut acoords = vec![0i64; d];
    let mut bcoords = vec![0i64; d];
    'outer: loop {
        let lex_positive = delta.iter().copied().find(|&x| x != 0).map(|x| x > 0).unwrap_or(false);
        let cheb = delta.iter().map(|x| x.abs()).max().unwrap_or(0);
        if lex_positive && cheb >= 2 {
            let mut n_anchor: u64 = 1;
            for &dc in delta.iter() {
                n_anchor *= (m - dc.abs()) as u64;
            }
            let q = envelope(ctx, kappa, grid.dist_min_pow_d(&delta));
            if q > 0.0 && n_anchor > 0 {
                let t128 = (n_anchor as u128) * (cmax as u128) * (cmax as u128);
                let t: u64 = t128.try_into().map_err(|_| {
                    Error::Capacity(format!("displacement block of {t128} slots"))
                })?;
                sample_block(
                    rng,
                    ctx,
                    t,
                    q,
                    &mut slots,
                    |s| {
                        let pair_r = s % (cmax * cmax);
                        let mut anchor = s / (cmax * cmax);
                        // Mixed-radix decode of the anchor cell (axis 0
                        // slowest), offset into the feasible range.
                        for k in (0..d).rev() {
                            let span = (m - delta[k].abs()) as u64;
                            let digit = (anchor % span) as i64;
                            anchor /= span;
                            let lo = (-delta[k]).max(0);
                            acoords[k] = lo + digit;
                            bcoords[k] = acoords[k] + delta[k];
                        }
                        let a_cell = grid.id_of(&acoords);
                        let b_cell = grid.id_of(&bcoords);
                        let i = (pair_r / cmax) as usize;
                        let j = (pair_r % cmax) as usize;
                        let am = grid.members(a_cell);
                        let bm = grid.members(b_cell);
                        if i >= am.len() || j >= bm.len() {
                            None
                        } else {
                            Some((am[i], bm[j]))
                        }
                    },
                    emit,
                );
            }
        }
        for k in (0..d).rev() {
            delta[k] += 1;
            if delta[k] <= rc {
                continue 'outer;
            }
            delta[k] = -rc;
        }
        break;
    }
    Ok(())
}

// --------------------------------------------------------------------------
// Layered far phase
// --------------------------------------------------------------------------

/// Vertices of one dyadic mark layer, grouped into per-cell buckets (CSR,
/// bucket cell ids ascending).
struct LayerBuckets {
    cells: Vec<u32>,
    start: Vec<usize>,
    verts: Vec<u32>,
    wmax: Vec<f64>,
    layer_wmax: f64,
    max_count: usize,
}

impl LayerBuckets {
    fn bucket_of(&self, cell: u32) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }

    fn count(&self, b: usize) -> usize {
        self.start[b + 1] - self.start[b]
    }

    fn members(&self, b: usize) -> &[u32] {
        &self.verts[self.start[b]..self.start[b + 1]]
    }

    /// Buckets whose cell id lies in `[lo_cell, hi_cell]`.
    fn bucket_range(&self, lo_cell: u32, hi_cell: u32) -> std::ops::Range<usize> {
        let lo = self.cells.partition_point(|&c| c < lo_cell);
        let hi = self.cells.partition_point(|&c| c <= hi_cell);
        lo..hi
    }
}

fn build_layers(grid: &CellGrid, vs: &VertexSet) -> Vec<LayerBuckets> {
    // Pass over cells in id order; within a cell, split members by layer.
    // The layer count comes from a flat scan of all marks; marks of vertices
    // excluded from the grid can only add empty trailing layers, which the
    // far phase skips.
    let n_layers = 1 + vs.marks.iter().map(|&w| layer_of(w)).max().unwrap_or(0);
    let mut layer_pop = vec![0usize; n_layers];
    for &w in &vs.marks {
        layer_pop[layer_of(w)] += 1;
    }
    let mut layers: Vec<LayerBuckets> = layer_pop
        .iter()
        .map(|&pop| {
            // `pop` counts grid members plus excluded vertices, so it is an
            // upper bound on both the vertex and bucket totals.
            let buckets = pop.min(grid.n_cells);
            let mut start = Vec::with_capacity(buckets + 1);
            start.push(0);
            LayerBuckets {
                cells: Vec::with_capacity(buckets),
                start,
                verts: Vec::with_capacity(pop),
                wmax: Vec::with_capacity(buckets),
                layer_wmax: 0.0,
                max_count: 0,
            }
        })
        .collect();
    for cell in 0..grid.n_cells {
        let members = grid.members(cell);
        if members.is_empty() {
            continue;
        }
        for &v in members {
            let w = vs.mark(v as usize);
            let l = layer_of(w);
            let lb = &mut layers[l];
            if lb.cells.last() != Some(&(cell as u32)) {
                lb.cells.push(cell as u32);
                lb.start.push(lb.verts.len());
                lb.wmax.push(0.0);
            }
            lb.verts.push(v);
            *lb.start.last_mut().unwrap() = lb.verts.len();
            let bi = lb.wmax.len() - 1;
            lb.wmax[bi] = lb.wmax[bi].max(w);
            lb.layer_wmax = lb.layer_wmax.max(w);
        }
    }
    for lb in &mut layers {
        lb.max_count = (0..lb.cells.len()).map(|b| lb.count(b)).max().unwrap_or(0);
    }
    layers
}

#[inline]
fn layer_of(w: f64) -> usize {
    debug_assert!(w >= 1.0 && w.is_finite());
    // floor(log2(w)) for finite w >= 1 is exactly the unbiased exponent
    // field; the bit extraction avoids a libm call per vertex.
    ((w.to_bits() >> 52) as i64 - 1023).max(0) as usize
}

/// Number of cells at Chebyshev distance exactly `s >= 1` in dimension `d`.
fn shell_count(d: u32, s: i64) -> u64 {
    let a = (2 * s + 1) as u64;
    let b = (2 * s - 1) as u64;
    a.pow(d) - b.pow(d)
}

/// Decode shell index `k` in `[0, shell_count(d, s))` into an offset vector
/// with Chebyshev norm exactly `s`.
fn shell_decode(d: usize, s: i64, k: u64, out: &mut [i64]) {
    debug_assert!(s >= 1);
    if d == 1 {
        debug_assert!(k < 2);
        out[0] = if k == 0 { -s } else { s };
        return;
    }
    let face = ((2 * s + 1) as u64).pow(d as u32 - 1);
    if k < face {
        out[0] = -s;
        decode_box(s, k, &mut out[1..]);
    } else if k < 2 * face {
        out[0] = s;
        decode_box(s, k - face, &mut out[1..]);
    } else {
        let k2 = k - 2 * face;
        let inner = shell_count(d as u32 - 1, s);
        out[0] = -s + 1 + (k2 / inner) as i64;
        shell_decode(d - 1, s, k2 % inner, &mut out[1..]);
    }
}

/// Decode index `k` into the box `[-s, s]^len(out)` (row-major).
fn decode_box(s: i64, mut k: u64, out: &mut [i64]) {
    let width = (2 * s + 1) as u64;
    for slot in out.iter_mut().rev() {
        *slot = (k % width) as i64 - s;
        k /= width;
    }
    debug_assert_eq!(k, 0);
}

/// Geometric groups of Chebyshev shells `[s_lo, s_hi]` with cumulative cell
/// counts for slot decoding.
struct ShellGroup {
    s_lo: i64,
    cum: Vec<u64>,
    total: u64,
}

fn build_shell_groups(d: u32, first: i64, last: i64, growth: f64) -> Vec<ShellGroup> {
    let mut groups = Vec::new();
    let mut lo = first;
    while lo <= last {
        let hi = (((lo as f64) * growth).floor() as i64 - 1).clamp(lo, last);
        let mut cum = Vec::with_capacity((hi - lo + 1) as usize);
        let mut acc = 0u64;
        for s in lo..=hi {
            acc += shell_count(d, s);
            cum.push(acc);
        }
        groups.push(ShellGroup { s_lo: lo, total: acc, cum });
        lo = hi + 1;
    }
    groups
}

impl ShellGroup {
    /// Map a cell index in `[0, total)` to `(shell radius, index in shell)`.
    fn locate(&self, idx: u64) -> (i64, u64) {
        let pos = self.cum.partition_point(|&c| c <= idx);
        let base = if pos == 0 { 0 } else { self.cum[pos - 1] };
        (self.s_lo + pos as i64, idx - base)
    }
}

fn far_layered<R: Rng>(
    grid: &CellGrid,
    ctx: &Ctx,
    rng: &mut R,
    opts: &GenOptions,
    emit: &mut impl FnMut(u32, u32),
) -> Result<()> {
    let d = grid.d;
    let m = grid.m;
    let layers = build_layers(grid, ctx.vs);
    let n_layers = layers.len();
    let mut slots = Vec::new();
    let mut src_coords = vec![0i64; d];
    let mut tgt_coords = vec![0i64; d];
    let mut offset = vec![0i64; d];

    for l1 in 0..n_layers {
        if layers[l1].cells.is_empty() {
            continue;
        }
        for l2 in l1..n_layers {
            if layers[l2].cells.is_empty() {
                continue;
            }
            // Window radius: within it, bucket pairs get exact envelopes;
            // beyond it the kernel reach of these layers is exceeded, so a
            // threshold profile has no edges and a polynomial one is handled
            // by the tail pass. `r1` is the smallest radius whose exterior
            // distance bound `r1 * r0 - dist_slack` meets the reach, so
            // every skipped cell pair provably has a zero threshold
            // envelope.
            let reach = ctx.beta * ctx.kernel(layers[l1].layer_wmax, layers[l2].layer_wmax);
            let reach_len = reach.powf(1.0 / d as f64);
            let r1_exact = (((reach_len + grid.dist_slack) / grid.r0).ceil() as i64).max(1);
            let scaled = (r1_exact as f64 * opts.window_factor).ceil() as i64;
            let r1 = scaled.max(r1_exact).min(m - 1);

            // Iterate from the side with fewer buckets.
            let (src_l, tgt_l) =
                if layers[l1].cells.len() <= layers[l2].cells.len() { (l1, l2) } else { (l2, l1) };
            let (src, tgt) = (&layers[src_l], &layers[tgt_l]);
            let same = l1 == l2;

            if r1 >= 2 {
                // A radius-1 window is fully covered by the near phase.
                window_pass(
                    grid, ctx, rng, src, tgt, same, r1, &mut src_coords, &mut tgt_coords,
                    &mut slots, emit,
                );
            }

            if !ctx.threshold && r1 < m - 1 {
                tail_pass(
                    grid,
                    ctx,
                    rng,
                    src,
                    tgt,
                    same,
                    r1,
                    opts.group_growth,
                    &mut src_coords,
                    &mut tgt_coords,
                    &mut offset,
                    &mut slots,
                    emit,
                )?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn window_pass<R: Rng>(
    grid: &CellGrid,
    ctx: &Ctx,
    rng: &mut R,
    src: &LayerBuckets,
    tgt: &LayerBuckets,
    same: bool,
    r1: i64,
    src_coords: &mut [i64],
    tgt_coords: &mut [i64],
    slots: &mut Vec<u64>,
    emit: &mut impl FnMut(u32, u32),
) {
    let d = grid.d;
    let m = grid.m;
    let mut delta = vec![0i64; d];
    // Row prefixes: all-but-last-axis offsets in [-r1, r1]^(d-1).
    let mut prefix = vec![-r1; d.saturating_sub(1)];
    // In one dimension each source bucket has a single window row whose
    // bounds slide forward monotonically, so two cursors replace the
    // per-row binary searches.
    let mut cur_lo = 0usize;
    let mut cur_hi = 0usize;
    for sb in 0..src.cells.len() {
        let src_cell = src.cells[sb];
        let sc = src.count(sb);
        if sc == 0 {
            continue;
        }
        grid.coords_of(src_cell as usize, src_coords);
        // Enumerate rows of the Chebyshev window.
        loop {
            let mut in_grid = true;
            for k in 0..d - 1 {
                tgt_coords[k] = src_coords[k] + prefix[k];
                if !(0..m).contains(&tgt_coords[k]) {
                    in_grid = false;
                    break;
                }
            }
            if in_grid {
                let lo_last = (src_coords[d - 1] - r1).max(0);
                let hi_last = (src_coords[d - 1] + r1).min(m - 1);
                tgt_coords[d - 1] = lo_last;
                let lo_cell = grid.id_of(tgt_coords) as u32;
                let hi_cell = lo_cell + (hi_last - lo_last) as u32;
                let range = if d == 1 {
                    while cur_lo < tgt.cells.len() && tgt.cells[cur_lo] < lo_cell {
                        cur_lo += 1;
                    }
                    cur_hi = cur_hi.max(cur_lo);
                    while cur_hi < tgt.cells.len() && tgt.cells[cur_hi] <= hi_cell {
                        cur_hi += 1;
                    }
                    cur_lo..cur_hi
                } else {
                    tgt.bucket_range(lo_cell, hi_cell)
                };
                for tb in range {
                    let tgt_cell = tgt.cells[tb];
                    if same && tgt_cell <= src_cell {
                        continue;
                    }
                    grid.coords_of(tgt_cell as usize, tgt_coords);
                    let mut cheb = 0i64;
                    for k in 0..d {
                        delta[k] = tgt_coords[k] - src_coords[k];
                        cheb = cheb.max(delta[k].abs());
                    }
                    if cheb <= 1 {
                        continue; // near phase
                    }
                    let q = envelope(
                        ctx,
                        ctx.kernel(src.wmax[sb], tgt.wmax[tb]),
                        grid.dist_min_pow_d(&delta),
                    );
                    if q <= 0.0 {
                        continue;
                    }
                    let tc = tgt.count(tb);
                    let sm = src.members(sb);
                    let tm = tgt.members(tb);
                    sample_block(
                        rng,
                        ctx,
                        (sc * tc) as u64,
                        q,
                        slots,
                        |s| Some((sm[(s / tc as u64) as usize], tm[(s % tc as u64) as usize])),
                        emit,
                    );
                }
            }
            // Next row prefix.
            if d == 1 {
                break;
            }
            let mut k = d - 1;
            loop {
                k -= 1;
                prefix[k] += 1;
                if prefix[k] <= r1 {
                    break;
                }
                prefix[k] = -r1;
                if k == 0 {
                    break;
                }
            }
            if prefix.iter().all(|&x| x == -r1) {
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn tail_pass<R: Rng>(
    grid: &CellGrid,
    ctx: &Ctx,
    rng: &mut R,
    src: &LayerBuckets,
    tgt: &LayerBuckets,
    same: bool,
    r1: i64,
    growth: f64,
    src_coords: &mut [i64],
    tgt_coords: &mut [i64],
    offset: &mut [i64],
    slots: &mut Vec<u64>,
    emit: &mut impl FnMut(u32, u32),
) -> Result<()> {
    let d = grid.d;
    let m = grid.m;
    let groups = build_shell_groups(d as u32, r1 + 1, m - 1, growth);
    if groups.is_empty() || tgt.max_count == 0 {
        return Ok(());
    }
    let cmax = tgt.max_count as u64;
    for sb in 0..src.cells.len() {
        let sc = src.count(sb) as u64;
        if sc == 0 {
            continue;
        }
        let src_cell = src.cells[sb];
        grid.coords_of(src_cell as usize, src_coords);
        let sm = src.members(sb);
        let kappa_env = ctx.kernel(src.wmax[sb], tgt.layer_wmax);
        for g in &groups {
            // All cells of the group are at Chebyshev distance >= s_lo.
            let gap = (((g.s_lo - 1) as f64) * grid.r0 - grid.dist_slack).max(0.0);
            let dist_env = match d {
                1 => gap,
                2 => gap * gap,
                _ => gap.powi(d as i32),
            };
            let q = envelope(ctx, kappa_env, dist_env);
            if q <= 0.0 {
                continue;
            }
            let t128 = sc as u128 * cmax as u128 * g.total as u128;
            let t: u64 = t128
                .try_into()
                .map_err(|_| Error::Capacity(format!("tail block of {t128} slots")))?;
            sample_block(
                rng,
                ctx,
                t,
                q,
                slots,
                |s| {
                    let i = (s % sc) as usize;
                    let rest = s / sc;
                    let cell_idx = rest / cmax;
                    let j = (rest % cmax) as usize;
                    let (radius, k_in_shell) = g.locate(cell_idx);
                    shell_decode(d, radius, k_in_shell, offset);
                    for k in 0..d {
                        tgt_coords[k] = src_coords[k] + offset[k];
                        if !(0..m).contains(&tgt_coords[k]) {
                            return None;
                        }
                    }
                    let tgt_cell = grid.id_of(tgt_coords) as u32;
                    if same && tgt_cell <= src_cell {
                        return None;
                    }
                    let tb = tgt.bucket_of(tgt_cell)?;
                    if j >= tgt.count(tb) {
                        return None;
                    }
                    Some((sm[i], tgt.members(tb)[j]))
                },
                emit,
            );
        }
    }
    Ok(())
}
