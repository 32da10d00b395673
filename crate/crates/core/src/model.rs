//! Marked vertices, kernel evaluation, and pairwise connection probabilities.

use crate::params::{KernelKind, ModelParams, ProfileKind};
use serde::{Deserialize, Serialize};

/// A single vertex with its spatial position and mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedVertex {
    pub id: u32,
    pub position: Vec<f64>,
    pub mark: f64,
}

/// A set of marked vertices in structure-of-arrays layout: `positions` holds
/// `len * d` coordinates (vertex-major), `marks` one value per vertex.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VertexSet {
    pub d: u32,
    pub positions: Vec<f64>,
    pub marks: Vec<f64>,
}

impl VertexSet {
    pub fn new(d: u32) -> Self {
        VertexSet { d, positions: Vec::new(), marks: Vec::new() }
    }

    pub fn with_capacity(d: u32, n: usize) -> Self {
        VertexSet { d, positions: Vec::with_capacity(n * d as usize), marks: Vec::with_capacity(n) }
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn push(&mut self, position: &[f64], mark: f64) {
        debug_assert_eq!(position.len(), self.d as usize);
        self.positions.extend_from_slice(position);
        self.marks.push(mark);
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.d as usize;
        &self.positions[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn mark(&self, i: usize) -> f64 {
        self.marks[i]
    }

    pub fn vertex(&self, i: usize) -> MarkedVertex {
        MarkedVertex { id: i as u32, position: self.position(i).to_vec(), mark: self.marks[i] }
    }

    /// Euclidean distance between vertices `i` and `j`, raised to the `d`-th
    /// power (the natural volume scale of the model).
    #[inline]
    pub fn distance_pow_d(&self, i: usize, j: usize) -> f64 {
        distance_pow_d(self.position(i), self.position(j), self.d)
    }
}

/// `|x - y|^d` for the Euclidean norm.
#[inline]
pub fn distance_pow_d(x: &[f64], y: &[f64], d: u32) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    match d {
        1 => (x[0] - y[0]).abs(),
        2 => {
            let dx = x[0] - y[0];
            let dy = x[1] - y[1];
            dx * dx + dy * dy
        }
        _ => {
            let norm_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            norm_sq.powf(d as f64 / 2.0)
        }
    }
}

/// Evaluate the mark-coupling kernel for marks `w1, w2 >= 1`.
pub fn kernel_eval(kernel: KernelKind, d: u32, w1: f64, w2: f64) -> f64 {
    match kernel {
        KernelKind::Interpolation { sigma } => {
            let (hi, lo) = if w1 >= w2 { (w1, w2) } else { (w2, w1) };
            if sigma == 0.0 {
                hi
            } else if sigma == 1.0 {
                hi * lo
            } else {
                hi * lo.powf(sigma)
            }
        }
        KernelKind::Sum => {
            if d == 1 {
                w1 + w2
            } else {
                let inv_d = 1.0 / d as f64;
                (w1.powf(inv_d) + w2.powf(inv_d)).powi(d as i32)
            }
        }
    }
}

/// Connection probability as a function of the kernel value and
/// `dist^d`. Coincident positions (`dist_pow_d = 0`) yield `p`.
pub fn connection_prob_from(kappa: f64, dist_pow_d: f64, params: &ModelParams) -> f64 {
    debug_assert!(kappa > 0.0 && dist_pow_d >= 0.0);
    let reach = params.beta * kappa;
    match params.profile {
        ProfileKind::Threshold => {
            if reach >= dist_pow_d {
                params.p
            } else {
                0.0
            }
        }
        ProfileKind::Polynomial => {
            if reach >= dist_pow_d {
                params.p
            } else {
                params.p * (reach / dist_pow_d).powf(params.alpha_f())
            }
        }
    }
}

/// Connection probability for two marked vertices.
pub fn connection_prob(u: &MarkedVertex, v: &MarkedVertex, params: &ModelParams) -> f64 {
    let kappa = kernel_eval(params.kernel, params.d, u.mark, v.mark);
    let dist = distance_pow_d(&u.position, &v.position, params.d);
    connection_prob_from(kappa, dist, params)
}

/// A connection probability together with a degeneracy flag for coincident
/// positions (possible on multisets of sampled points, never on the lattice).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnProb {
    pub value: f64,
    pub degenerate: bool,
}

/// Like [`connection_prob`], reporting whether the pair was coincident.
pub fn connection_prob_detailed(u: &MarkedVertex, v: &MarkedVertex, params: &ModelParams) -> ConnProb {
    let dist = distance_pow_d(&u.position, &v.position, params.d);
    let kappa = kernel_eval(params.kernel, params.d, u.mark, v.mark);
    ConnProb { value: connection_prob_from(kappa, dist, params), degenerate: dist == 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::ExtReal;
    use crate::params::VertexProcess;

    fn params(alpha: ExtReal, kernel: KernelKind, beta: f64, p: f64, d: u32) -> ModelParams {
        ModelParams {
            d,
            tau: ExtReal::Finite(2.5),
            alpha,
            kernel,
            beta,
            p,
            profile: if alpha.is_finite() { ProfileKind::Polynomial } else { ProfileKind::Threshold },
            vertex_process: VertexProcess::Ppp,
        }
    }

    #[test]
    fn kernel_worked_examples() {
        let k1 = KernelKind::Interpolation { sigma: 1.0 };
        let k0 = KernelKind::Interpolation { sigma: 0.0 };
        assert_eq!(kernel_eval(k1, 1, 2.0, 3.0), 6.0);
        assert_eq!(kernel_eval(k1, 1, 3.0, 2.0), 6.0);
        assert_eq!(kernel_eval(k0, 1, 2.0, 3.0), 3.0);
        assert_eq!(kernel_eval(KernelKind::Sum, 2, 1.0, 1.0), 4.0);
        assert_eq!(kernel_eval(KernelKind::Sum, 1, 2.0, 3.0), 5.0);
        // General sigma agrees with the closed form.
        let ks = KernelKind::Interpolation { sigma: 0.5 };
        assert!((kernel_eval(ks, 3, 4.0, 9.0) - 9.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn sum_kernel_sandwiched_by_sigma_zero() {
        // max <= sum-kernel <= 2^d * max, so it is a sigma = 0 kernel up to
        // constants.
        for d in 1..=3u32 {
            for &(w1, w2) in &[(1.0f64, 1.0f64), (1.0, 10.0), (7.0, 2.0), (100.0, 3.0)] {
                let s = kernel_eval(KernelKind::Sum, d, w1, w2);
                let m = w1.max(w2);
                assert!(s >= m && s <= 2f64.powi(d as i32) * m + 1e-9, "d={d} w=({w1},{w2})");
            }
        }
    }

    #[test]
    fn connection_prob_worked_example() {
        // p=0.8, beta=1, alpha=2, kappa=1, dist^d=2: 0.8 * (1/2)^2 = 0.2.
        let p = params(ExtReal::Finite(2.0), KernelKind::Interpolation { sigma: 1.0 }, 1.0, 0.8, 1);
        assert!((connection_prob_from(1.0, 2.0, &p) - 0.2).abs() < 1e-15);
        // Inside the reach the cap applies.
        assert_eq!(connection_prob_from(1.0, 0.5, &p), 0.8);
    }

    #[test]
    fn threshold_profile_is_indicator_times_p() {
        let p = params(ExtReal::PosInf, KernelKind::Interpolation { sigma: 1.0 }, 2.0, 0.7, 2);
        assert_eq!(connection_prob_from(3.0, 5.9, &p), 0.7);
        assert_eq!(connection_prob_from(3.0, 6.0, &p), 0.7);
        assert_eq!(connection_prob_from(3.0, 6.0 + 1e-9, &p), 0.0);
    }

    #[test]
    fn coincident_positions_yield_p() {
        let pp = params(ExtReal::Finite(2.0), KernelKind::Interpolation { sigma: 1.0 }, 1.0, 0.8, 2);
        let u = MarkedVertex { id: 0, position: vec![0.25, -1.0], mark: 1.0 };
        let v = MarkedVertex { id: 1, position: vec![0.25, -1.0], mark: 3.0 };
        let c = connection_prob_detailed(&u, &v, &pp);
        assert!(c.degenerate);
        assert_eq!(c.value, 0.8);
        let w = MarkedVertex { id: 2, position: vec![0.25, 0.0], mark: 3.0 };
        assert!(!connection_prob_detailed(&u, &w, &pp).degenerate);
    }

    #[test]
    fn probability_bounds_and_monotonicity() {
        let pp = params(ExtReal::Finite(1.5), KernelKind::Interpolation { sigma: 0.5 }, 0.9, 1.0, 2);
        let mut last = 1.0;
        for i in 0..50 {
            let dist = 0.1 * (i as f64 + 1.0);
            let c = connection_prob_from(2.0, dist * dist, &pp);
            assert!((0.0..=pp.p).contains(&c));
            assert!(c <= last + 1e-15, "must be nonincreasing in distance");
            last = c;
        }
        let mut last = 0.0;
        for w in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let kappa = kernel_eval(pp.kernel, pp.d, w, 3.0);
            let c = connection_prob_from(kappa, 100.0, &pp);
            assert!(c >= last, "must be nondecreasing in marks");
            last = c;
        }
    }

    #[test]
    fn vertex_set_layout_and_distance() {
        let mut vs = VertexSet::new(2);
        vs.push(&[0.0, 0.0], 1.0);
        vs.push(&[3.0, 4.0], 2.0);
        assert_eq!(vs.len(), 2);
        assert_eq!(vs.position(1), &[3.0, 4.0]);
        assert_eq!(vs.mark(1), 2.0);
        // d=2: distance^2 = 25.
        assert_eq!(vs.distance_pow_d(0, 1), 25.0);
        let v = vs.vertex(1);
        assert_eq!(v.id, 1);
        assert_eq!(v.position, vec![3.0, 4.0]);

        let mut vs3 = VertexSet::new(3);
        vs3.push(&[0.0, 0.0, 0.0], 1.0);
        vs3.push(&[1.0, 2.0, 2.0], 1.0);
        // |x-y| = 3, d=3: 27.
        assert!((vs3.distance_pow_d(0, 1) - 27.0).abs() < 1e-12);
    }
}
