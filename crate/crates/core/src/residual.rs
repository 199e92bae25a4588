//! Variational residuals of elliptic and parabolic problems tested against
//! spectral modes.
//!
//! For a field `u` the residual functional is
//!
//! ```text
//! r(v) = ∫ s v + q·∇v  -  ∫ A∇u·∇v + (b·∇u + c u + ∂ₜu) v
//! ```
//!
//! where `s` and `q` are the source density and source flux. Tested
//! against inner-rectangle modes the integral runs over the inner
//! rectangle only (the modes vanish outside it). Tested against
//! outer-rectangle modes it runs over the polygon, with the modes simply
//! restricted to it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approximant::Field;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::quadrature::{Rule1d, Rule2d};
use crate::spectral::{RieszSolver, SpectralSpace};

pub type Mat2 = [[f64; 2]; 2];

/// Bounds on the coefficients used by the stability constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    /// Coercivity constant (lower bound on the smallest eigenvalue of `A`).
    pub a0: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_c: f64,
}

/// Extreme eigenvalues of a symmetric 2×2 matrix.
pub fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    let r = (d * d + off * off).sqrt();
    (m - r, m + r)
}

/// Coefficients of `-∇·(A∇u) + b·∇u + c u = f`, possibly region-dependent.
pub trait CoefficientModel: Send + Sync {
    fn diffusion(&self, x: Point, region: Option<&str>, mu: &[f64]) -> Mat2;

    fn convection(&self, _x: Point, _mu: &[f64]) -> [f64; 2] {
        [0.0; 2]
    }

    fn reaction(&self, _x: Point, _mu: &[f64]) -> f64 {
        0.0
    }

    /// Source density `s` (pairs with `v`).
    fn source(&self, t: f64, x: Point, mu: &[f64]) -> f64;

    /// Source flux `q` (pairs with `∇v`); zero for ordinary right-hand sides.
    fn source_flux(&self, _t: f64, _x: Point, _mu: &[f64]) -> [f64; 2] {
        [0.0; 2]
    }

    fn bounds(&self, mu: &[f64]) -> CoefficientBounds;
}

/// Elliptic problem with its admissible parameter box.
#[derive(Clone)]
pub struct EllipticProblem {
    pub name: String,
    pub coefficients: Arc<dyn CoefficientModel>,
    /// `[lo, hi]` for every parameter component.
    pub parameter_box: Vec<[f64; 2]>,
}

impl EllipticProblem {
    pub fn new(name: impl Into<String>, coefficients: Arc<dyn CoefficientModel>, parameter_box: Vec<[f64; 2]>) -> Self {
        EllipticProblem {
            name: name.into(),
            coefficients,
            parameter_box,
        }
    }

    pub fn check_parameter(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.parameter_box.len() {
            return Err(Error::domain(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.parameter_box.len(),
                mu.len()
            )));
        }
        for (k, (&m, &[lo, hi])) in mu.iter().zip(&self.parameter_box).enumerate() {
            let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if !(m >= lo - tol && m <= hi + tol) {
                return Err(Error::domain(format!(
                    "parameter {k} = {m} outside [{lo}, {hi}] for {}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, mu: &[f64]) -> CoefficientBounds {
        self.coefficients.bounds(mu)
    }
}

/// `u̇ + A u = f` on `(0, T)` with `u(0) = 0`.
#[derive(Clone)]
pub struct SpaceTimeProblem {
    pub spatial: EllipticProblem,
    pub horizon: f64,
}

impl SpaceTimeProblem {
    pub fn new(spatial: EllipticProblem, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("time horizon {horizon} must be positive")));
        }
        Ok(SpaceTimeProblem { spatial, horizon })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Inner,
    Outer,
}

/// Residual tested against every mode of a spectral space.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalVector {
    pub values: Vec<f64>,
    pub region: Region,
    pub quadrature_points: usize,
    pub time: Option<f64>,
}

impl FunctionalVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Shared kernel. Points are visited in rule order and every entry is
/// accumulated in that order, so the result is bit-reproducible.
fn assemble(
    coeffs: &dyn CoefficientModel,
    field: &dyn Field,
    mu: &[f64],
    time: Option<f64>,
    space: &SpectralSpace,
    rule: &Rule2d,
) -> Vec<f64> {
    let (nx, ny) = space.order();
    let mut out = vec![0.0; nx * ny];
    let mut s = space.scratch();
    let mut ax = vec![0.0; nx];
    let mut bx = vec![0.0; nx];
    let t = time.unwrap_or(0.0);
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        if !space.eval_factors(p, &mut s) {
            continue;
        }
        let u = field.sample(t, p, mu);
        let a = coeffs.diffusion(p, rule.region(q), mu);
        let b = coeffs.convection(p, mu);
        let c = coeffs.reaction(p, mu);
        let src = coeffs.source(t, p, mu);
        let flux_src = coeffs.source_flux(t, p, mu);
        let mut scalar = src - (b[0] * u.grad[0] + b[1] * u.grad[1]) - c * u.value;
        if time.is_some() {
            scalar -= u.dt;
        }
        // r(φ) = ∫ scalar φ - flux·∇φ
        let flux = [
            a[0][0] * u.grad[0] + a[0][1] * u.grad[1] - flux_src[0],
            a[1][0] * u.grad[0] + a[1][1] * u.grad[1] - flux_src[1],
        ];
        for i in 0..nx {
            ax[i] = w * (scalar * s.vx[i] - flux[0] * s.dx[i]);
            bx[i] = -w * flux[1] * s.vx[i];
        }
        for i in 0..nx {
            let row = &mut out[i * ny..(i + 1) * ny];
            let (ai, bi) = (ax[i], bx[i]);
            for j in 0..ny {
                row[j] += ai * s.vy[j] + bi * s.dy[j];
            }
        }
    }
    out
}

fn checked(values: Vec<f64>, region: Region, rule: &Rule2d, time: Option<f64>) -> Result<FunctionalVector> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("residual entry {k} is not finite")));
    }
    Ok(FunctionalVector {
        values,
        region,
        quadrature_points: rule.len(),
        time,
    })
}

/// Residual tested against modes of the inner rectangle; `quad` covers
/// the inner rectangle and should be tagged by the domain's subregions.
pub fn elliptic_residual_inner(
    problem: &EllipticProblem,
    field: &dyn Field,
    mu: &[f64],
    space_on_inner: &SpectralSpace,
    quad: &Rule2d,
) -> Result<FunctionalVector> {
    problem.check_parameter(mu)?;
    let v = assemble(problem.coefficients.as_ref(), field, mu, None, space_on_inner, quad);
    checked(v, Region::Inner, quad, None)
}

/// Residual tested against modes of the outer rectangle, integrated over
/// the polygon (`quad` is a polygon rule on the domain).
pub fn elliptic_residual_outer(
    problem: &EllipticProblem,
    field: &dyn Field,
    mu: &[f64],
    space_on_outer: &SpectralSpace,
    quad: &Rule2d,
) -> Result<FunctionalVector> {
    problem.check_parameter(mu)?;
    let v = assemble(problem.coefficients.as_ref(), field, mu, None, space_on_outer, quad);
    checked(v, Region::Outer, quad, None)
}

/// Space-time residual at a fixed time, including the `∂ₜu` pairing.
pub fn parabolic_residual_at_time(
    problem: &SpaceTimeProblem,
    field: &dyn Field,
    mu: &[f64],
    t: f64,
    space: &SpectralSpace,
    quad: &Rule2d,
    region: Region,
) -> Result<FunctionalVector> {
    problem.spatial.check_parameter(mu)?;
    if !(0.0..=problem.horizon).contains(&t) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", problem.horizon)));
    }
    let v = assemble(problem.spatial.coefficients.as_ref(), field, mu, Some(t), space, quad);
    checked(v, region, quad, Some(t))
}

/// `‖r‖_{L2(I; Y')}` by a time quadrature over per-time spatial dual norms.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeNorm {
    pub norm: f64,
    /// `(t_q, ‖r(t_q)‖)` at each time node.
    pub per_time: Vec<(f64, f64)>,
}

pub fn spacetime_dual_norm(
    problem: &SpaceTimeProblem,
    field: &dyn Field,
    mu: &[f64],
    region: Region,
    solver: &RieszSolver,
    quad: &Rule2d,
    time_rule: &Rule1d,
) -> Result<SpaceTimeNorm> {
    let mut sq = 0.0;
    let mut per_time = Vec::with_capacity(time_rule.len());
    for (&t, &w) in time_rule.nodes.iter().zip(&time_rule.weights) {
        let f = parabolic_residual_at_time(problem, field, mu, t, &solver.space, quad, region)?;
        let eta = solver.dual_norm(&f.values)?;
        sq += w * eta * eta;
        per_time.push((t, eta));
    }
    Ok(SpaceTimeNorm {
        norm: sq.sqrt(),
        per_time,
    })
}

/// Region-wise constant coefficients; the usual choice for custom problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantCoefficients {
    pub diffusion: Mat2,
    /// Overrides of `diffusion` by subregion name.
    #[serde(default)]
    pub region_diffusion: std::collections::BTreeMap<String, Mat2>,
    #[serde(default)]
    pub convection: [f64; 2],
    #[serde(default)]
    pub reaction: f64,
    pub source: f64,
}

impl CoefficientModel for ConstantCoefficients {
    fn diffusion(&self, _x: Point, region: Option<&str>, _mu: &[f64]) -> Mat2 {
        region
            .and_then(|r| self.region_diffusion.get(r))
            .copied()
            .unwrap_or(self.diffusion)
    }

    fn convection(&self, _x: Point, _mu: &[f64]) -> [f64; 2] {
        self.convection
    }

    fn reaction(&self, _x: Point, _mu: &[f64]) -> f64 {
        self.reaction
    }

    fn source(&self, _t: f64, _x: Point, _mu: &[f64]) -> f64 {
        self.source
    }

    fn bounds(&self, _mu: &[f64]) -> CoefficientBounds {
        let mats = std::iter::once(&self.diffusion).chain(self.region_diffusion.values());
        let (mut a0, mut na) = (f64::INFINITY, 0.0f64);
        for m in mats {
            let (lo, hi) = sym_eigenvalues(m);
            a0 = a0.min(lo);
            na = na.max(hi);
        }
        CoefficientBounds {
            a0,
            norm_a: na,
            norm_b: self.convection[0].hypot(self.convection[1]),
            norm_c: self.reaction.abs(),
        }
    }
}

type ScalarFn = dyn Fn(f64, Point, &[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, Point, &[f64]) -> [f64; 2] + Send + Sync;

/// Problem with scalar diffusion `κ I` and closure-defined sources:
/// Laplace, heat and manufactured-solution tests.
#[derive(Clone)]
pub struct ScalarDiffusion {
    pub kappa: f64,
    pub source: Arc<ScalarFn>,
    pub flux: Option<Arc<VectorFn>>,
}

impl ScalarDiffusion {
    pub fn laplace() -> Self {
        ScalarDiffusion {
            kappa: 1.0,
            source: Arc::new(|_, _, _| 0.0),
            flux: None,
        }
    }

    pub fn with_source(mut self, f: impl Fn(f64, Point, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_flux(mut self, q: impl Fn(f64, Point, &[f64]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.flux = Some(Arc::new(q));
        self
    }
}

impl CoefficientModel for ScalarDiffusion {
    fn diffusion(&self, _x: Point, _region: Option<&str>, _mu: &[f64]) -> Mat2 {
        [[self.kappa, 0.0], [0.0, self.kappa]]
    }

    fn source(&self, t: f64, x: Point, mu: &[f64]) -> f64 {
        (self.source)(t, x, mu)
    }

    fn source_flux(&self, t: f64, x: Point, mu: &[f64]) -> [f64; 2] {
        self.flux.as_ref().map_or([0.0; 2], |q| q(t, x, mu))
    }

    fn bounds(&self, _mu: &[f64]) -> CoefficientBounds {
        CoefficientBounds {
            a0: self.kappa,
            norm_a: self.kappa,
            norm_b: 0.0,
            norm_c: 0.0,
        }
    }
}
