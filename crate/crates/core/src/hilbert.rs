//! Finite-dimensional state space and the diagonal semigroup acting on it.
//!
//! States live in `R^d` with the Euclidean inner product, standing in for a
//! separable Hilbert space truncated to its first `d` spectral modes. The
//! generator `A` is diagonal in this basis, so `S_t = e^{tA}` applies exactly
//! as coordinatewise factors `e^{lambda_i t}`, with growth bound
//! `||S_t x|| <= e^{alpha t} ||x||` where `alpha = max_i lambda_i`.

use std::ops::{Add, Mul, Sub};

use smallvec::SmallVec;

use crate::error::{CoreError, Result};

/// Inline storage capacity; typical truncation dimensions stay heap-free.
type Coords = SmallVec<[f64; 8]>;

/// Element of the truncated state space: a vector of Galerkin coefficients.
///
/// All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coords: Coords,
}

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CoreError::InvalidInput("state vector must be nonempty".into()));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(CoreError::InvalidInput("state vector has non-finite entry".into()));
        }
        Ok(Self { coords: Coords::from_vec(coords) })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coords: std::iter::repeat(0.0).take(dim).collect() }
    }

    /// All coordinates set to `value`.
    pub fn constant(dim: usize, value: f64) -> Self {
        Self { coords: std::iter::repeat(value).take(dim).collect() }
    }

    /// Vector with equal coordinates and Euclidean norm `|norm|`
    /// (each coordinate is `norm / sqrt(d)`).
    pub fn uniform_with_norm(dim: usize, norm: f64) -> Self {
        Self::constant(dim, norm / (dim as f64).sqrt())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }

    /// In-place `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            *a += factor * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| f(c)).collect(),
        }
    }

    /// `factors_x o x + theta (factors_g o g)` (elementwise products).
    pub(crate) fn combine(
        factors_x: &[f64],
        x: &StateVector,
        theta: f64,
        factors_g: &[f64],
        g: &StateVector,
    ) -> Self {
        debug_assert_eq!(factors_x.len(), x.dim());
        debug_assert_eq!(factors_g.len(), g.dim());
        Self {
            coords: (0..x.dim())
                .map(|c| factors_x[c] * x.coords[c] + theta * (factors_g[c] * g.coords[c]))
                .collect(),
        }
    }

    /// In-place `self += w * (factors o v)`.
    pub(crate) fn product_axpy(&mut self, w: f64, factors: &[f64], v: &StateVector) {
        debug_assert_eq!(factors.len(), v.dim());
        for ((a, f), b) in self.coords.iter_mut().zip(factors).zip(&v.coords) {
            *a += w * (f * b);
        }
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        StateVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        StateVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &StateVector {
    type Output = StateVector;
    fn mul(self, rhs: f64) -> StateVector {
        self.scaled(rhs)
    }
}

/// Diagonal representation of the semigroup `S_t = e^{tA}`.
///
/// `alpha` is the growth bound `max_i lambda_i`, so `||S_t x|| <= e^{alpha t}
/// ||x||` holds exactly for every `t >= 0`, and `S_s S_t = S_{s+t}` holds to
/// rounding error.
#[derive(Debug, Clone)]
pub struct SpectralSemigroup {
    eigenvalues: Vec<f64>,
    alpha: f64,
}

impl SpectralSemigroup {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(CoreError::InvalidInput("semigroup needs at least one eigenvalue".into()));
        }
        if !eigenvalues.iter().all(|l| l.is_finite()) {
            return Err(CoreError::InvalidInput("semigroup eigenvalue not finite".into()));
        }
        let alpha = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { eigenvalues, alpha })
    }

    /// Identity semigroup (`A = 0`) in dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            eigenvalues: vec![0.0; dim],
            alpha: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Growth bound `alpha = max_i lambda_i`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Apply `S_t` to `x`. Rejects negative `t`; the semigroup is only
    /// defined forward in time.
    pub fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "semigroup time must be nonnegative, got {t}"
            )));
        }
        self.check_dim(x)?;
        Ok(self.flow(t, x))
    }

    /// Flow map for any real `t` (diagonal generators extend to a group).
    ///
    /// Internal kernels use small negative offsets when reconstructing
    /// interior values on a step; public callers should go through
    /// [`SpectralSemigroup::apply`].
    pub(crate) fn flow(&self, t: f64, x: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), x.dim());
        StateVector {
            coords: self
                .eigenvalues
                .iter()
                .zip(x.coords())
                .map(|(l, c)| (l * t).exp() * c)
                .collect(),
        }
    }

    /// Semigroup with every eigenvalue shifted by `delta`; its flow is
    /// `e^{delta t} S_t`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.iter().map(|l| l + delta).collect(),
            alpha: self.alpha + delta,
        }
    }

    fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(CoreError::InvalidInput(format!(
                "dimension mismatch: semigroup is {}-dimensional, state is {}-dimensional",
                self.dim(),
                x.dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn apply_at_zero_is_identity() {
        let sg = SpectralSemigroup::new(vec![-2.0, -1.0, 0.5]).unwrap();
        let x = StateVector::new(vec![1.0, -3.0, 0.25]).unwrap();
        let y = sg.apply(0.0, &x).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn scalar_exponential_decay() {
        // lambda = -1, t = 1, x = 2  =>  2 e^{-1}
        let sg = SpectralSemigroup::new(vec![-1.0]).unwrap();
        let x = StateVector::new(vec![2.0]).unwrap();
        let y = sg.apply(1.0, &x).unwrap();
        assert_abs_diff_eq!(y.coords()[0], 0.7357588823428847, epsilon = 1e-15);
    }

    #[test]
    fn negative_time_rejected() {
        let sg = SpectralSemigroup::new(vec![-1.0]).unwrap();
        let x = StateVector::new(vec![1.0]).unwrap();
        assert!(sg.apply(-0.1, &x).is_err());
    }

    #[test]
    fn growth_bound_and_semigroup_law() {
        let sg = SpectralSemigroup::new(vec![-2.0, -1.0]).unwrap();
        assert_eq!(sg.alpha(), -1.0);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = StateVector::new(vec![
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ])
            .unwrap();
            let s = rng.random_range(0.0..2.0);
            let t = rng.random_range(0.0..2.0);
            // ||S_t x|| <= e^{alpha t} ||x||, here alpha = -1
            let y = sg.apply(3.0, &x).unwrap();
            assert!(y.norm() <= (-3.0f64).exp() * x.norm() + 1e-12 * x.norm());
            // S_s S_t = S_{s+t}
            let a = sg.apply(s, &sg.apply(t, &x).unwrap()).unwrap();
            let b = sg.apply(s + t, &x).unwrap();
            let scale = b.norm().max(1.0);
            assert!((&a - &b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(StateVector::new(vec![f64::NAN]).is_err());
        assert!(SpectralSemigroup::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn uniform_with_norm_has_requested_norm() {
        let x = StateVector::uniform_with_norm(8, 1.5);
        assert_abs_diff_eq!(x.norm(), 1.5, epsilon = 1e-14);
    }
}
