//! Drift and jump coefficient families, the full problem specification, and
//! an empirical validator for the structural constants the solvers rely on.
//!
//! A drift `f` declares a semimonotonicity constant `M` with
//! `<f(t,x) - f(t,y), x - y> <= M ||x - y||^2` and a growth constant `D_f`
//! with `||f(t,x)||^2 <= D_f (1 + ||x||^2)`. A jump coefficient `k` declares
//! `C` (mean-square Lipschitz under `nu`), `F` (pth-power Lipschitz and
//! growth under `nu`) and its share `D_k` of the combined growth constant
//! `D = D_f + D_k`. Declared constants are valid on a stated sampling
//! radius, not certified globally; [`validate_hypothesis`] is the
//! regression test connecting them to the concrete functions.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::hilbert::{SpectralSemigroup, StateVector};
use crate::measure::IntensityMeasure;
use crate::rng::path_rng;

type DriftFn = dyn Fn(f64, &StateVector) -> StateVector + Send + Sync;
type JumpFn = dyn Fn(f64, &[f64], &StateVector) -> StateVector + Send + Sync;

/// Nonlinear drift `f(t, x)` with declared semimonotonicity and growth
/// constants.
#[derive(Clone)]
pub struct DriftCoefficient {
    eval: Arc<DriftFn>,
    /// Semimonotonicity constant `M` (may be negative).
    pub semimonotone: f64,
    /// Growth constant `D_f`.
    pub growth_sq: f64,
}

impl DriftCoefficient {
    pub fn new(
        eval: impl Fn(f64, &StateVector) -> StateVector + Send + Sync + 'static,
        semimonotone: f64,
        growth_sq: f64,
    ) -> Self {
        Self { eval: Arc::new(eval), semimonotone, growth_sq }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(move |_, _| StateVector::zeros(dim), 0.0, 0.0)
    }

    pub fn eval(&self, t: f64, x: &StateVector) -> StateVector {
        (self.eval)(t, x)
    }
}

impl std::fmt::Debug for DriftCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftCoefficient")
            .field("semimonotone", &self.semimonotone)
            .field("growth_sq", &self.growth_sq)
            .finish_non_exhaustive()
    }
}

/// Jump coefficient `k(t, xi, x)` with declared integral-Lipschitz and
/// growth constants under the intensity measure.
#[derive(Clone)]
pub struct JumpCoefficient {
    eval: Arc<JumpFn>,
    /// Closed-form `int_E k(t, xi, x) nu(dxi)` when the family has one.
    nu_mean: Option<Arc<DriftFn>>,
    /// `C`: `int ||k(t,xi,x) - k(t,xi,y)||^2 nu(dxi) <= C ||x - y||^2`.
    pub lipschitz_sq: f64,
    /// `F`: same in pth power, plus `int ||k(t,xi,x)||^p nu <= F (1 + ||x||^p)`.
    pub pth_bound: f64,
    /// `D_k`: `int ||k(t,xi,x)||^2 nu <= D_k (1 + ||x||^2)`.
    pub growth_sq: f64,
}

impl JumpCoefficient {
    pub fn new(
        eval: impl Fn(f64, &[f64], &StateVector) -> StateVector + Send + Sync + 'static,
        lipschitz_sq: f64,
        pth_bound: f64,
        growth_sq: f64,
    ) -> Self {
        Self { eval: Arc::new(eval), nu_mean: None, lipschitz_sq, pth_bound, growth_sq }
    }

    /// Attach a closed-form compensator density; the solvers use it instead
    /// of mark-space quadrature when present.
    pub fn with_compensator(
        mut self,
        nu_mean: impl Fn(f64, &StateVector) -> StateVector + Send + Sync + 'static,
    ) -> Self {
        self.nu_mean = Some(Arc::new(nu_mean));
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(move |_, _, _| StateVector::zeros(dim), 0.0, 0.0, 0.0)
    }

    pub fn eval(&self, t: f64, xi: &[f64], x: &StateVector) -> StateVector {
        (self.eval)(t, xi, x)
    }

    /// Compensator density `int_E k(t, xi, x) nu(dxi)`.
    pub fn compensator_mean(
        &self,
        nu: &IntensityMeasure,
        dim: usize,
        t: f64,
        x: &StateVector,
    ) -> StateVector {
        match &self.nu_mean {
            Some(f) => f(t, x),
            None => nu.integrate_vec(dim, |xi| self.eval(t, xi, x)),
        }
    }
}

impl std::fmt::Debug for JumpCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpCoefficient")
            .field("lipschitz_sq", &self.lipschitz_sq)
            .field("pth_bound", &self.pth_bound)
            .field("growth_sq", &self.growth_sq)
            .finish_non_exhaustive()
    }
}

/// Initial condition law. Both variants have all moments finite.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    PointMass(StateVector),
    UniformBall { center: StateVector, radius: f64 },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::PointMass(x) => x.dim(),
            InitialLaw::UniformBall { center, .. } => center.dim(),
        }
    }

    pub fn sample(&self, rng: &mut crate::rng::PathRng) -> StateVector {
        match self {
            InitialLaw::PointMass(x) => x.clone(),
            InitialLaw::UniformBall { center, radius } => {
                let dim = center.dim();
                let mut out = center.clone();
                out.axpy(1.0, &uniform_ball(rng, dim, *radius));
                out
            }
        }
    }
}

fn uniform_ball(rng: &mut crate::rng::PathRng, dim: usize, radius: f64) -> StateVector {
    use rand_distr::{Distribution, StandardNormal};
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let dir = StateVector::new(dir).expect("normal draws are finite");
    let norm = dir.norm();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    if norm == 0.0 {
        StateVector::zeros(dim)
    } else {
        dir.scaled(r / norm)
    }
}

/// Full problem instance
/// `dX = A X dt + f(t, X) dt + int_E k(t, xi, X_-) Ntilde(dt, dxi)`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub semigroup: SpectralSemigroup,
    pub drift: DriftCoefficient,
    pub jump: JumpCoefficient,
    pub nu: IntensityMeasure,
    pub initial: InitialLaw,
    /// Moment exponent `p >= 2`.
    pub p: f64,
    /// Terminal time `T > 0`.
    pub horizon: f64,
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        self.semigroup.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(CoreError::InvalidInput(format!("moment exponent p must be >= 2, got {}", self.p)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CoreError::InvalidInput(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.initial.dim() != self.dim() {
            return Err(CoreError::InvalidInput("initial law dimension does not match semigroup".into()));
        }
        for q in [1.0, 2.0, self.p] {
            if !self.nu.norm_moment(q).is_finite() {
                return Err(CoreError::InvalidInput(format!("mark law norm moment of order {q} is not finite")));
            }
        }
        Ok(())
    }

    /// Combined growth constant `D = D_f + D_k`.
    pub fn growth_constant(&self) -> f64 {
        self.drift.growth_sq + self.jump.growth_sq
    }
}

/// Change of variables removing the semigroup growth bound: with
/// `alpha = max_i lambda_i`,
///
/// ```text
/// Stilde_t = e^{-alpha t} S_t,
/// ftilde(t, x) = e^{-alpha t} f(t, e^{alpha t} x),
/// ktilde(t, xi, x) = e^{-alpha t} k(t, xi, e^{alpha t} x),
/// ```
///
/// so `X` solves the original system iff `Xtilde_t = e^{-alpha t} X_t`
/// solves the returned one, under the same jump path. The returned
/// semigroup is a contraction (growth bound exactly 0). `M`, `C`, `F` are
/// invariant under the transform; the growth constants pick up
/// `max(1, e^{-2 alpha T})` on `[0, T]`.
pub fn rescale_system(sys: &SystemSpec) -> SystemSpec {
    let alpha = sys.semigroup.alpha();
    let drift = sys.drift.clone();
    let jump = sys.jump.clone();
    let growth_factor = (-2.0 * alpha * sys.horizon).exp().max(1.0);
    let mut rescaled_jump = JumpCoefficient::new(
        {
            let jump = jump.clone();
            move |t, xi, x| {
                let blown = x.scaled((alpha * t).exp());
                jump.eval(t, xi, &blown).scaled((-alpha * t).exp())
            }
        },
        sys.jump.lipschitz_sq,
        sys.jump.pth_bound,
        sys.jump.growth_sq * growth_factor,
    );
    if let Some(mean) = jump.nu_mean.clone() {
        rescaled_jump = rescaled_jump.with_compensator(move |t, x| {
            let blown = x.scaled((alpha * t).exp());
            mean(t, &blown).scaled((-alpha * t).exp())
        });
    }
    SystemSpec {
        semigroup: sys.semigroup.shifted(-alpha),
        drift: DriftCoefficient::new(
            move |t, x| {
                let blown = x.scaled((alpha * t).exp());
                drift.eval(t, &blown).scaled((-alpha * t).exp())
            },
            sys.drift.semimonotone,
            sys.drift.growth_sq * growth_factor,
        ),
        jump: rescaled_jump,
        nu: sys.nu.clone(),
        initial: sys.initial.clone(),
        p: sys.p,
        horizon: sys.horizon,
    }
}

/// Empirical maxima of the defining ratios next to the declared constants.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub radius: f64,
    pub seed: u64,
    pub declared_m: f64,
    pub declared_c: f64,
    pub declared_d: f64,
    pub declared_f: f64,
    pub empirical_m: f64,
    pub empirical_c: f64,
    pub empirical_d: f64,
    pub empirical_f: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Sample `(t, x, y)` with `||x||, ||y|| <= radius` and record the maxima of
/// the ratios defining `M`, `C`, `D`, `F`. Passes when every empirical value
/// is below its declared constant with slack `1e-9 (1 + |declared|)`.
///
/// Mark-space integrals use the measure's deterministic integration, so the
/// verdict is reproducible for a fixed seed.
pub fn validate_hypothesis(
    sys: &SystemSpec,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(CoreError::InvalidInput("validator needs at least one sample".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CoreError::InvalidInput(format!("validator radius must be positive, got {radius}")));
    }
    sys.validate()?;

    let dim = sys.dim();
    let p = sys.p;
    let chunks: Vec<(u64, usize)> = split_counts(n_samples, 64);
    let maxima = chunks
        .par_iter()
        .map(|&(chunk_idx, count)| -> Result<[f64; 4]> {
            let mut rng = path_rng(seed, chunk_idx);
            let mut m_max = f64::NEG_INFINITY;
            let mut c_max: f64 = 0.0;
            let mut d_max: f64 = 0.0;
            let mut f_max: f64 = 0.0;
            for _ in 0..count {
                let t = rng.random_range(0.0..sys.horizon);
                let x = uniform_ball(&mut rng, dim, radius);
                let y = uniform_ball(&mut rng, dim, radius);
                let diff = &x - &y;
                let dist_sq = diff.norm_sq();

                let fx = sys.drift.eval(t, &x);
                let fy = sys.drift.eval(t, &y);
                if !(fx.is_finite() && fy.is_finite()) {
                    return Err(CoreError::Numerical("drift returned non-finite value".into()));
                }
                if dist_sq > 0.0 {
                    m_max = m_max.max((&fx - &fy).dot(&diff) / dist_sq);
                    let ksq_diff = sys.nu.integrate_scalar(|xi| {
                        (&sys.jump.eval(t, xi, &x) - &sys.jump.eval(t, xi, &y)).norm_sq()
                    });
                    c_max = c_max.max(ksq_diff / dist_sq);
                    let kp_diff = sys.nu.integrate_scalar(|xi| {
                        (&sys.jump.eval(t, xi, &x) - &sys.jump.eval(t, xi, &y))
                            .norm()
                            .powf(p)
                    });
                    f_max = f_max.max(kp_diff / dist_sq.sqrt().powf(p));
                }
                let ksq = sys.nu.integrate_scalar(|xi| sys.jump.eval(t, xi, &x).norm_sq());
                let kp = sys.nu.integrate_scalar(|xi| sys.jump.eval(t, xi, &x).norm().powf(p));
                if !(ksq.is_finite() && kp.is_finite()) {
                    return Err(CoreError::Numerical("jump coefficient returned non-finite value".into()));
                }
                d_max = d_max.max((fx.norm_sq() + ksq) / (1.0 + x.norm_sq()));
                f_max = f_max.max(kp / (1.0 + x.norm().powf(p)));
            }
            Ok([m_max, c_max, d_max, f_max])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold([f64::NEG_INFINITY, 0.0, 0.0, 0.0], |acc, m| {
            [acc[0].max(m[0]), acc[1].max(m[1]), acc[2].max(m[2]), acc[3].max(m[3])]
        });

    let declared = [
        sys.drift.semimonotone,
        sys.jump.lipschitz_sq,
        sys.growth_constant(),
        sys.jump.pth_bound,
    ];
    let names = ["M", "C", "D", "F"];
    let mut failures = Vec::new();
    for ((&emp, &dec), name) in maxima.iter().zip(&declared).zip(names) {
        if emp > dec + 1e-9 * (1.0 + dec.abs()) {
            failures.push(format!("{name}: empirical {emp} exceeds declared {dec}"));
        }
    }
    Ok(ValidationReport {
        n_samples,
        radius,
        seed,
        declared_m: declared[0],
        declared_c: declared[1],
        declared_d: declared[2],
        declared_f: declared[3],
        empirical_m: maxima[0],
        empirical_c: maxima[1],
        empirical_d: maxima[2],
        empirical_f: maxima[3],
        passed: failures.is_empty(),
        failures,
    })
}

fn split_counts(total: usize, chunk: usize) -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    let mut left = total;
    let mut idx = 0u64;
    while left > 0 {
        let take = left.min(chunk);
        out.push((idx, take));
        left -= take;
        idx += 1;
    }
    out
}

/// Convenience override map used by the builtin families and the config
/// layer.
pub type Overrides = BTreeMap<String, f64>;
