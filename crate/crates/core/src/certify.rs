//! Error bounds from residual dual norms.
//!
//! `lower = c_B ‖r_◯‖` uses the inner rectangle, `upper = C_B ‖r_◻‖` the
//! outer one. Gram factorizations depend only on the rectangles and the
//! orders, so a [`Certifier`] builds them once and shares them between
//! parameters and worker threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::approximant::Field;
use crate::error::{Error, Result};
use crate::geometry::{poincare_bound, Embedding, Polygon, Rect};
use crate::quadrature::{gauss_legendre, polygon_rule, tensor_rule, Rule1d, Rule2d};
use crate::residual::{
    elliptic_residual_inner, elliptic_residual_outer, spacetime_dual_norm, EllipticProblem, Region,
    SpaceTimeProblem,
};
use crate::spectral::RieszSolver;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    AnalyticElliptic,
    UserConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ingredients {
    pub a0: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_c: f64,
    pub s_pf: f64,
}

/// Multipliers of the error-residual sandwich.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    /// `c_B = ‖B‖⁻¹`.
    pub lower: f64,
    /// `C_B = ‖B⁻¹‖`.
    pub upper: f64,
    pub provenance: Provenance,
    pub ingredients: Option<Ingredients>,
}

/// `c_B = (‖A‖ + s_PF ‖b‖ + s_PF² ‖c‖)⁻¹`, `C_B = a₀⁻¹`.
pub fn elliptic_constants(a0: f64, norm_a: f64, norm_b: f64, norm_c: f64, s_pf: f64) -> Result<StabilityConstants> {
    if !(a0 > 0.0) {
        return Err(Error::NotCoercive(a0));
    }
    if !(norm_a >= 0.0 && norm_b >= 0.0 && norm_c >= 0.0) {
        return Err(Error::domain("coefficient norms must be non-negative"));
    }
    if !(s_pf > 0.0) {
        return Err(Error::domain(format!("Poincaré constant {s_pf} must be positive")));
    }
    let lower = 1.0 / (norm_a + s_pf * norm_b + s_pf * s_pf * norm_c);
    let upper = 1.0 / a0;
    Ok(StabilityConstants {
        lower,
        upper,
        provenance: Provenance::AnalyticElliptic,
        ingredients: Some(Ingredients {
            a0,
            norm_a,
            norm_b,
            norm_c,
            s_pf,
        }),
    })
}

impl StabilityConstants {
    pub fn user(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::config(format!(
                "stability constants must satisfy 0 < c_B <= C_B < inf, got c_B = {lower}, C_B = {upper}"
            )));
        }
        Ok(StabilityConstants {
            lower,
            upper,
            provenance: Provenance::UserConfig,
            ingredients: None,
        })
    }
}

/// Constants of an elliptic problem at `mu`, with the Poincaré constant of
/// the outer rectangle standing in for that of the domain.
pub fn problem_constants(problem: &EllipticProblem, mu: &[f64], outer: &Rect) -> Result<StabilityConstants> {
    let b = problem.bounds(mu);
    elliptic_constants(b.a0, b.norm_a, b.norm_b, b.norm_c, poincare_bound(outer))
}

/// Discretization parameters of a certification run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub inner_order: (usize, usize),
    pub outer_order: (usize, usize),
    /// Gauss points per direction on the inner rectangle.
    pub inner_points: usize,
    /// Total degree of the triangle rules on the domain.
    pub polygon_order: usize,
    pub polygon_refine: usize,
    pub time_points: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            inner_order: (16, 16),
            outer_order: (24, 24),
            inner_points: 32,
            polygon_order: 32,
            polygon_refine: 2,
            time_points: 16,
        }
    }
}

impl Resolution {
    pub fn validate(&self) -> Result<()> {
        let orders = [self.inner_order.0, self.inner_order.1, self.outer_order.0, self.outer_order.1];
        if orders.contains(&0) {
            return Err(Error::config("spectral orders must be at least 1"));
        }
        if self.inner_points == 0 || self.polygon_order == 0 || self.time_points == 0 {
            return Err(Error::config("quadrature sizes must be at least 1"));
        }
        Ok(())
    }
}

/// Quadrature for one domain of the embedding.
#[derive(Clone, Debug)]
pub struct PreparedDomain {
    pub embedding: Embedding,
    pub inner_rule: Rule2d,
    pub outer_rule: Rule2d,
    /// Wall-clock seconds spent building each rule.
    pub inner_rule_s: f64,
    pub outer_rule_s: f64,
}

/// Factored Gram systems on the inner and outer rectangles.
#[derive(Clone, Debug)]
pub struct Certifier {
    pub resolution: Resolution,
    pub inner: Arc<RieszSolver>,
    pub outer: Arc<RieszSolver>,
    /// Wall-clock seconds spent factoring each Gram system.
    pub setup_inner_s: f64,
    pub setup_outer_s: f64,
    time_rule: Rule1d,
}

impl Certifier {
    pub fn new(inner: Rect, outer: Rect, resolution: Resolution) -> Result<Self> {
        resolution.validate()?;
        let clock = Instant::now();
        let inner_solver = RieszSolver::new(inner, resolution.inner_order)?;
        let setup_inner_s = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let outer_solver = RieszSolver::new(outer, resolution.outer_order)?;
        let setup_outer_s = clock.elapsed().as_secs_f64();
        Ok(Certifier {
            resolution,
            inner: Arc::new(inner_solver),
            outer: Arc::new(outer_solver),
            setup_inner_s,
            setup_outer_s,
            time_rule: gauss_legendre(resolution.time_points)?,
        })
    }

    pub fn inner_rect(&self) -> &Rect {
        self.inner.space.rect()
    }

    pub fn outer_rect(&self) -> &Rect {
        self.outer.space.rect()
    }

    /// Validates the embedding and builds both rules. The inner rule is
    /// tagged by the domain's subregions for piecewise coefficients.
    pub fn prepare(&self, domain: Polygon) -> Result<PreparedDomain> {
        let embedding = Embedding::new(*self.inner_rect(), domain, *self.outer_rect())?;
        let clock = Instant::now();
        let g = gauss_legendre(self.resolution.inner_points)?;
        let inner_rule = tensor_rule(&g, &g, &embedding.inner).tagged_by(&embedding.domain);
        let inner_rule_s = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let outer_rule = polygon_rule(&embedding.domain, self.resolution.polygon_order, self.resolution.polygon_refine)?;
        let outer_rule_s = clock.elapsed().as_secs_f64();
        Ok(PreparedDomain {
            embedding,
            inner_rule,
            outer_rule,
            inner_rule_s,
            outer_rule_s,
        })
    }

    pub fn time_rule(&self, horizon: f64) -> Rule1d {
        self.time_rule.mapped(0.0, horizon)
    }
}

/// Estimated true error with its discretization allowance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceError {
    pub value: f64,
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub inner_s: f64,
    pub outer_s: f64,
    pub oracle_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mu: Vec<f64>,
    pub dual_inner: f64,
    pub dual_outer: f64,
    pub lower: f64,
    pub upper: f64,
    pub constants: StabilityConstants,
    pub reference: Option<ReferenceError>,
    pub inner_order: (usize, usize),
    pub outer_order: (usize, usize),
    pub timings: PhaseTimings,
}

impl BoundReport {
    pub fn eff_lower(&self) -> Option<f64> {
        self.reference.map(|r| self.lower / r.value)
    }

    pub fn eff_upper(&self) -> Option<f64> {
        self.reference.map(|r| self.upper / r.value)
    }

    /// `lower ≤ upper`. Fails only when the outer space under-resolves the
    /// residual, since discrete dual norms approach the true ones from below.
    pub fn is_consistent(&self) -> bool {
        self.lower <= self.upper
    }

    /// `lower ≤ ref` and `ref ≤ upper`, each up to `rel·ref + slack`.
    pub fn encloses_reference(&self, rel: f64) -> Option<bool> {
        self.reference.map(|r| {
            let tol = rel * r.value + r.slack;
            self.lower <= r.value + tol && r.value <= self.upper + tol
        })
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{name} dual norm is {v}")))
    }
}

pub fn certify_elliptic(
    certifier: &Certifier,
    problem: &EllipticProblem,
    field: &dyn Field,
    mu: &[f64],
    prepared: &PreparedDomain,
) -> Result<BoundReport> {
    let constants = problem_constants(problem, mu, certifier.outer_rect())?;

    let clock = Instant::now();
    let f_in = elliptic_residual_inner(problem, field, mu, &certifier.inner.space, &prepared.inner_rule)?;
    let dual_inner = finite("inner", certifier.inner.dual_norm(&f_in.values)?)?;
    let inner_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let f_out = elliptic_residual_outer(problem, field, mu, &certifier.outer.space, &prepared.outer_rule)?;
    let dual_outer = finite("outer", certifier.outer.dual_norm(&f_out.values)?)?;
    let outer_s = clock.elapsed().as_secs_f64();

    Ok(BoundReport {
        mu: mu.to_vec(),
        dual_inner,
        dual_outer,
        lower: constants.lower * dual_inner,
        upper: constants.upper * dual_outer,
        constants,
        reference: None,
        inner_order: certifier.resolution.inner_order,
        outer_order: certifier.resolution.outer_order,
        timings: PhaseTimings {
            inner_s,
            outer_s,
            oracle_s: 0.0,
        },
    })
}

/// Space-time bounds. The constants of the parabolic error-residual
/// relation are not derivable from the coefficients here and must be given.
pub fn certify_parabolic(
    certifier: &Certifier,
    problem: &SpaceTimeProblem,
    field: &dyn Field,
    mu: &[f64],
    prepared: &PreparedDomain,
    constants: Option<StabilityConstants>,
) -> Result<BoundReport> {
    let constants = constants.ok_or_else(|| {
        Error::config("parabolic problems need \"parabolic_constants\": {\"lower\": c_B, \"upper\": C_B}")
    })?;
    let time_rule = certifier.time_rule(problem.horizon);

    let clock = Instant::now();
    let inner = spacetime_dual_norm(problem, field, mu, Region::Inner, &certifier.inner, &prepared.inner_rule, &time_rule)?;
    let inner_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let outer = spacetime_dual_norm(problem, field, mu, Region::Outer, &certifier.outer, &prepared.outer_rule, &time_rule)?;
    let outer_s = clock.elapsed().as_secs_f64();

    let dual_inner = finite("inner space-time", inner.norm)?;
    let dual_outer = finite("outer space-time", outer.norm)?;
    Ok(BoundReport {
        mu: mu.to_vec(),
        dual_inner,
        dual_outer,
        lower: constants.lower * dual_inner,
        upper: constants.upper * dual_outer,
        constants,
        reference: None,
        inner_order: certifier.resolution.inner_order,
        outer_order: certifier.resolution.outer_order,
        timings: PhaseTimings {
            inner_s,
            outer_s,
            oracle_s: 0.0,
        },
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    pub serial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub mu: Vec<f64>,
    pub outcome: std::result::Result<BoundReport, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    fn of(mut v: Vec<f64>) -> Option<Spread> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Spread {
            min: v[0],
            median,
            max: v[n - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub succeeded: usize,
    pub failed: usize,
    pub eff_lower: Option<Spread>,
    pub eff_upper: Option<Spread>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Evaluates `eval` at every parameter. Failures are recorded per row and
/// never stop the sweep; rows come back in parameter order.
pub fn sweep<F>(params: &[Vec<f64>], options: SweepOptions, eval: F) -> Result<Sweep>
where
    F: Fn(&[f64]) -> Result<BoundReport> + Sync,
{
    if params.is_empty() {
        return Err(Error::config("parameter list is empty"));
    }
    let run = |(index, mu): (usize, &Vec<f64>)| SweepRow {
        index,
        mu: mu.clone(),
        outcome: eval(mu).map_err(|e| e.to_string()),
    };
    let rows: Vec<SweepRow> = if options.serial || options.workers == Some(1) {
        params.iter().enumerate().map(run).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.workers {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| params.par_iter().enumerate().map(run).collect())
    };
    let ok: Vec<&BoundReport> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let summary = SweepSummary {
        succeeded: ok.len(),
        failed: rows.len() - ok.len(),
        eff_lower: Spread::of(ok.iter().filter_map(|r| r.eff_lower()).collect()),
        eff_upper: Spread::of(ok.iter().filter_map(|r| r.eff_upper()).collect()),
    };
    Ok(Sweep { rows, summary })
}
