//! Per-interval quadrature kernel.
//!
//! A step from `t0` to `t1` evaluates semigroup factors at the same 16
//! Gauss-Legendre nodes over and over (once per fixed-point iteration, per
//! node, per direction). This kernel precomputes the three factor tables
//!
//! ```text
//! in_f[j, c]   = e^{lambda_c (s_j - t0)}   (propagate the left state)
//! out_f[j, c]  = e^{lambda_c (s_j - t1)}   (propagate the step increment)
//! back_f[j, c] = e^{lambda_c (t1 - s_j)}   (weight the integrand)
//! ```
//!
//! once per interval, so the inner loops are pure elementwise arithmetic.
//! The expressions match [`SpectralSemigroup::flow`] exactly, factor for
//! factor, so kernel-based and flow-based evaluation produce identical
//! floats.

use crate::hilbert::{SpectralSemigroup, StateVector};
use crate::quadrature::GL16;

pub(crate) struct IntervalKernel {
    dim: usize,
    /// `(s_j, scaled weight, theta_j)` per node.
    pub nodes: [(f64, f64, f64); 16],
    in_f: Vec<f64>,
    out_f: Vec<f64>,
    back_f: Vec<f64>,
}

impl IntervalKernel {
    pub fn new(sg: &SpectralSemigroup, t0: f64, t1: f64) -> Self {
        let mid = 0.5 * (t0 + t1);
        let half = 0.5 * (t1 - t0);
        let delta = t1 - t0;
        let dim = sg.dim();
        let mut nodes = [(0.0, 0.0, 0.0); 16];
        let mut in_f = Vec::with_capacity(16 * dim);
        let mut out_f = Vec::with_capacity(16 * dim);
        let mut back_f = Vec::with_capacity(16 * dim);
        for (j, &(x, w)) in GL16.iter().enumerate() {
            let s = mid + half * x;
            nodes[j] = (s, half * w, (s - t0) / delta);
            for &l in sg.eigenvalues() {
                in_f.push((l * (s - t0)).exp());
                out_f.push((l * (s - t1)).exp());
                back_f.push((l * (t1 - s)).exp());
            }
        }
        Self { dim, nodes, in_f, out_f, back_f }
    }

    /// Interior state at node `j`: `S_{s-t0} x + theta_j S_{s-t1} g`.
    pub fn node_state(&self, j: usize, x: &StateVector, g: &StateVector) -> StateVector {
        let theta = self.nodes[j].2;
        let base = &self.in_f[j * self.dim..(j + 1) * self.dim];
        let out = &self.out_f[j * self.dim..(j + 1) * self.dim];
        StateVector::combine(base, x, theta, out, g)
    }

    /// `acc += scale * w_j * S_{t1 - s_j} v`.
    pub fn accumulate_back(&self, j: usize, scale: f64, v: &StateVector, acc: &mut StateVector) {
        let w = self.nodes[j].1;
        let back = &self.back_f[j * self.dim..(j + 1) * self.dim];
        acc.product_axpy(scale * w, back, v);
    }
}
