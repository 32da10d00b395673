//! Brute-force reference implementations used to validate the fast paths.
//!
//! Everything here favors obviousness over speed: breadth-first search
//! instead of union-find, full pair enumeration instead of grid blocking,
//! textbook statistics instead of streaming updates. Unit tests compare the
//! production code against these; downstream crates can opt in through the
//! `oracles` feature.

use crate::components::ComponentSummary;
use crate::error::{Error, Result};
use crate::model::{connection_prob_from, kernel_eval, VertexSet};
use crate::params::{ModelParams, VertexProcess};
use crate::pointprocess::{sample_vertices, BoxSpec};
use std::collections::BTreeMap;
use std::collections::VecDeque;

/// Component structure by breadth-first search over adjacency lists.
///
/// Components are discovered in ascending order of their smallest vertex id,
/// and the giant is the first component attaining the maximum size — the
/// same tie rule the union-find summarizer uses.
pub fn bfs_components(
    n_vertices: usize,
    edges: &[(u32, u32)],
    origin: Option<u32>,
) -> ComponentSummary {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_vertices];
    for &(u, v) in edges {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let mut seen = vec![false; n_vertices];
    let mut comp_of = vec![u32::MAX; n_vertices];
    let mut sizes_by_discovery: Vec<u64> = Vec::new();
    for start in 0..n_vertices {
        if seen[start] {
            continue;
        }
        let comp_id = sizes_by_discovery.len() as u32;
        let mut size = 0u64;
        let mut queue = VecDeque::from([start as u32]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            size += 1;
            comp_of[v as usize] = comp_id;
            for &w in &adj[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        sizes_by_discovery.push(size);
    }

    let giant = sizes_by_discovery.iter().copied().max().unwrap_or(0);
    let giant_comp = sizes_by_discovery.iter().position(|&s| s == giant);
    let mut sizes = sizes_by_discovery.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let second = if sizes.len() > 1 { sizes[1] } else { 0 };
    let mut census: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in &sizes_by_discovery {
        *census.entry(s).or_insert(0) += 1;
    }
    let origin_cluster = origin.map(|o| sizes_by_discovery[comp_of[o as usize] as usize]);
    let origin_in_giant =
        origin.map(|o| Some(comp_of[o as usize] as usize) == giant_comp);
    ComponentSummary { sizes, giant, second, census, origin_cluster, origin_in_giant }
}

/// Expected number of edges: the sum of all pair connection probabilities.
pub fn expected_edge_count(vs: &VertexSet, params: &ModelParams) -> f64 {
    let n = vs.len();
    assert!(n <= 20_000, "oracle is quadratic; keep it small");
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let kappa = kernel_eval(params.kernel, params.d, vs.mark(i), vs.mark(j));
            total += connection_prob_from(kappa, vs.distance_pow_d(i, j), params);
        }
    }
    total
}

/// Exact expected downward-boundary count for lattice vertices with constant
/// marks: the sum over lattice points `u` of the target box of the
/// probability that `u` connects to at least one lattice point of the sampled
/// (enlarged) region outside the box. Uses the same point set as the sampler,
/// so the truncation at the region edge matches the Monte Carlo counter.
///
/// Quadratic in the point count; refuses regions beyond 10^4 points.
pub fn expected_downward_boundary_lattice(
    n: f64,
    params: &ModelParams,
    enlargement: f64,
) -> Result<f64> {
    if params.vertex_process != VertexProcess::Lattice || !params.unit_marks() {
        return Err(Error::RejectDomain(
            "the exact boundary expectation needs lattice vertices with constant marks".into(),
        ));
    }
    let spec = BoxSpec::new(n, params.d, enlargement)?;
    let vs = sample_vertices(&spec, params, 0)?;
    if vs.len() > 10_000 {
        return Err(Error::Capacity(format!(
            "exact boundary expectation over {} lattice points exceeds the 10^4 budget",
            vs.len()
        )));
    }
    let inside: Vec<bool> = (0..vs.len()).map(|i| spec.in_target(vs.position(i))).collect();
    let mut total = 0.0;
    for u in 0..vs.len() {
        if !inside[u] {
            continue;
        }
        let mut miss = 1.0;
        for v in 0..vs.len() {
            if inside[v] {
                continue;
            }
            let kappa = kernel_eval(params.kernel, params.d, vs.mark(u), vs.mark(v));
            miss *= 1.0 - connection_prob_from(kappa, vs.distance_pow_d(u, v), params);
        }
        total += 1.0 - miss;
    }
    Ok(total)
}

/// Mark distribution function: P(W <= w).
pub fn pareto_cdf(w: f64, tau: f64) -> f64 {
    if w < 1.0 {
        0.0
    } else {
        1.0 - w.powf(-(tau - 1.0))
    }
}

/// Two-sample Kolmogorov-Smirnov test. Returns the statistic and the
/// asymptotic p-value (small p means the samples look different).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|u, v| u.total_cmp(v));
    ys.sort_unstable_by(|u, v| u.total_cmp(v));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, ks_survival(lambda))
}

/// One-sample Kolmogorov-Smirnov test against a distribution function.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    assert!(!samples.is_empty());
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|u, v| u.total_cmp(v));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - k as f64 / n).abs());
        d = d.max(((k + 1) as f64 / n - f).abs());
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    (d, ks_survival(lambda))
}

/// Kolmogorov distribution survival function Q(lambda).
fn ks_survival(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += term;
        sign = -sign;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bfs_handles_paths_and_isolates() {
        // 0-1-2 path, 3-4 edge, 5 isolated.
        let summary = bfs_components(6, &[(0, 1), (1, 2), (3, 4)], Some(5));
        assert_eq!(summary.sizes, vec![3, 2, 1]);
        assert_eq!(summary.giant, 3);
        assert_eq!(summary.second, 2);
        assert_eq!(summary.origin_cluster, Some(1));
        assert_eq!(summary.origin_in_giant, Some(false));
    }

    #[test]
    fn bfs_tie_break_prefers_smallest_vertex() {
        // Two components of size 2; the one containing vertex 0 is "the"
        // giant.
        let summary = bfs_components(4, &[(0, 3), (1, 2)], Some(1));
        assert_eq!(summary.giant, 2);
        assert_eq!(summary.origin_in_giant, Some(false));
        let summary = bfs_components(4, &[(0, 3), (1, 2)], Some(3));
        assert_eq!(summary.origin_in_giant, Some(true));
    }

    #[test]
    fn ks_accepts_same_distribution_and_rejects_shifted() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.1).collect();
        let (_, p_same) = ks_two_sample(&a, &b);
        let (_, p_diff) = ks_two_sample(&a, &c);
        assert!(p_same > 1e-4, "same-law samples rejected: p={p_same}");
        assert!(p_diff < 1e-6, "shifted samples accepted: p={p_diff}");
        let (_, p_one) = ks_one_sample(&a, |x| x.clamp(0.0, 1.0));
        assert!(p_one > 1e-4, "uniform sample rejected against its own law");
    }

    #[test]
    fn boundary_expectation_single_candidate_and_vanishing_density() {
        use crate::ext::ExtReal;
        use crate::params::{KernelKind, ProfileKind};
        // d=1, target {-1, 0}, region {-1, 0, 1}: the only outside candidate
        // is 1, reachable only from 0 (distance 1) under a radius-1 rule, so
        // the expectation is exactly the retention probability.
        let params = ModelParams {
            d: 1,
            tau: ExtReal::PosInf,
            alpha: ExtReal::PosInf,
            kernel: KernelKind::Interpolation { sigma: 0.0 },
            beta: 1.0,
            p: 0.37,
            profile: ProfileKind::Threshold,
            vertex_process: VertexProcess::Lattice,
        };
        let e = expected_downward_boundary_lattice(2.0, &params, 1.5).unwrap();
        assert!((e - 0.37).abs() < 1e-12, "{e}");

        let faint = ModelParams {
            alpha: ExtReal::Finite(1.5),
            beta: 1e-12,
            p: 1.0,
            profile: ProfileKind::Polynomial,
            ..params
        };
        let e = expected_downward_boundary_lattice(64.0, &faint, 3.0).unwrap();
        assert!(e < 1e-9, "{e}");

        let ppp = ModelParams { vertex_process: VertexProcess::Ppp, ..params };
        assert!(expected_downward_boundary_lattice(2.0, &ppp, 1.5).is_err());
        assert!(expected_downward_boundary_lattice(1e6, &params, 3.0).is_err());
    }

    #[test]
    fn boundary_expectation_matches_monte_carlo() {
        use crate::components::downward_boundary_count;
        use crate::ext::ExtReal;
        use crate::graphgen::generate_cellgrid;
        use crate::params::{KernelKind, ProfileKind};
        use crate::seed::derive_seed;
        let params = ModelParams {
            d: 1,
            tau: ExtReal::PosInf,
            alpha: ExtReal::Finite(1.5),
            kernel: KernelKind::Interpolation { sigma: 0.0 },
            beta: 1.0,
            p: 1.0,
            profile: ProfileKind::Polynomial,
            vertex_process: VertexProcess::Lattice,
        };
        let n = 32.0;
        let spec = BoxSpec::new(n, 1, 3.0).unwrap();
        let expect = expected_downward_boundary_lattice(n, &params, 3.0).unwrap();
        let reps = 400;
        let counts: Vec<f64> = (0..reps)
            .map(|r| {
                let seed = derive_seed(9, r);
                let vs = sample_vertices(&spec, &params, derive_seed(seed, 0)).unwrap();
                let g =
                    generate_cellgrid(vs, &params, spec, None, derive_seed(seed, 2)).unwrap();
                downward_boundary_count(&g, n, false).unwrap() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs exact {expect} (se {se})"
        );
    }

    #[test]
    fn ks_survival_reference_values() {
        // Q(0.5) ~ 0.9639, Q(1.0) ~ 0.2700, Q(1.5) ~ 0.0222 (classical
        // table values).
        assert!((ks_survival(0.5) - 0.9639).abs() < 5e-4);
        assert!((ks_survival(1.0) - 0.2700).abs() < 5e-4);
        assert!((ks_survival(1.5) - 0.0222).abs() < 5e-4);
    }
}
