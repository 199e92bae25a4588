//! Ready-made problems: saw blade, notched square, heat square, and
//! user-supplied polygons with constant coefficients.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::approximant::{Field, FnField, Sample};
use crate::certify::{problem_constants, StabilityConstants};
use crate::error::{Error, Result};
use crate::geometry::{notched_square, poincare_bound, sawblade_domain, Point, Polygon, Rect, SawbladeParams, BLADE};
use crate::residual::{
    sym_eigenvalues, CoefficientBounds, CoefficientModel, ConstantCoefficients, EllipticProblem, Mat2,
    SpaceTimeProblem,
};

pub const CATALOG: &[&str] = &["sawblade", "sawblade-laplace", "notch", "heat-square"];

/// `μ_region · diag(1, 2)` with `μ₁` on the teeth and `μ₂` on the blade.
#[derive(Clone, Copy, Debug, Default)]
pub struct SawbladeCoefficients;

impl CoefficientModel for SawbladeCoefficients {
    fn diffusion(&self, _x: Point, region: Option<&str>, mu: &[f64]) -> Mat2 {
        let m = if region == Some(BLADE) { mu[1] } else { mu[0] };
        [[m, 0.0], [0.0, 2.0 * m]]
    }

    fn source(&self, _t: f64, _x: Point, _mu: &[f64]) -> f64 {
        1.0
    }

    fn bounds(&self, mu: &[f64]) -> CoefficientBounds {
        CoefficientBounds {
            a0: mu[0].min(mu[1]),
            norm_a: 2.0 * mu[0].max(mu[1]),
            norm_b: 0.0,
            norm_c: 0.0,
        }
    }
}

pub const NOTCH_DIFFUSION: Mat2 = [[0.5, 0.25], [0.25, 0.5]];
pub const NOTCH_CONVECTION: [f64; 2] = [10.0, -3.0];

/// Recessed-square coefficients: constant `A`, `b`, `c = xy + 1`, `f = 10`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NotchCoefficients;

impl CoefficientModel for NotchCoefficients {
    fn diffusion(&self, _x: Point, _region: Option<&str>, _mu: &[f64]) -> Mat2 {
        NOTCH_DIFFUSION
    }

    fn convection(&self, _x: Point, _mu: &[f64]) -> [f64; 2] {
        NOTCH_CONVECTION
    }

    fn reaction(&self, x: Point, _mu: &[f64]) -> f64 {
        x[0] * x[1] + 1.0
    }

    fn source(&self, _t: f64, _x: Point, _mu: &[f64]) -> f64 {
        10.0
    }

    fn bounds(&self, _mu: &[f64]) -> CoefficientBounds {
        let (lo, hi) = sym_eigenvalues(&NOTCH_DIFFUSION);
        CoefficientBounds {
            a0: lo,
            norm_a: hi,
            norm_b: NOTCH_CONVECTION[0].hypot(NOTCH_CONVECTION[1]),
            // xy + 1 on the unit square
            norm_c: 2.0,
        }
    }
}

/// `μ I` diffusion with the source that makes `t sin πx sin πy` exact.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeatCoefficients;

impl CoefficientModel for HeatCoefficients {
    fn diffusion(&self, _x: Point, _region: Option<&str>, mu: &[f64]) -> Mat2 {
        [[mu[0], 0.0], [0.0, mu[0]]]
    }

    fn source(&self, t: f64, x: Point, mu: &[f64]) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin() * (1.0 + 2.0 * PI * PI * mu[0] * t)
    }

    fn bounds(&self, mu: &[f64]) -> CoefficientBounds {
        CoefficientBounds {
            a0: mu[0],
            norm_a: mu[0],
            norm_b: 0.0,
            norm_c: 0.0,
        }
    }
}

/// Scalar diffusion `I` with zero data.
#[derive(Clone, Copy, Debug, Default)]
pub struct LaplaceCoefficients;

impl CoefficientModel for LaplaceCoefficients {
    fn diffusion(&self, _x: Point, _region: Option<&str>, _mu: &[f64]) -> Mat2 {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    fn source(&self, _t: f64, _x: Point, _mu: &[f64]) -> f64 {
        0.0
    }

    fn bounds(&self, _mu: &[f64]) -> CoefficientBounds {
        CoefficientBounds {
            a0: 1.0,
            norm_a: 1.0,
            norm_b: 0.0,
            norm_c: 0.0,
        }
    }
}

/// Same operator with the source removed, so the exact solution is zero.
#[derive(Clone)]
pub struct Homogeneous(pub Arc<dyn CoefficientModel>);

impl CoefficientModel for Homogeneous {
    fn diffusion(&self, x: Point, region: Option<&str>, mu: &[f64]) -> Mat2 {
        self.0.diffusion(x, region, mu)
    }

    fn convection(&self, x: Point, mu: &[f64]) -> [f64; 2] {
        self.0.convection(x, mu)
    }

    fn reaction(&self, x: Point, mu: &[f64]) -> f64 {
        self.0.reaction(x, mu)
    }

    fn source(&self, _t: f64, _x: Point, _mu: &[f64]) -> f64 {
        0.0
    }

    fn bounds(&self, mu: &[f64]) -> CoefficientBounds {
        self.0.bounds(mu)
    }
}

#[derive(Clone)]
pub enum ProblemKind {
    Elliptic(EllipticProblem),
    Parabolic(SpaceTimeProblem),
}

#[derive(Clone, Debug)]
enum DomainSpec {
    Fixed(Polygon),
    Notch,
}

type TruthFn = Arc<dyn Fn(&[f64]) -> Arc<dyn Field> + Send + Sync>;

/// A problem together with its embedding and default parameter grid.
#[derive(Clone)]
pub struct CatalogProblem {
    pub id: String,
    pub kind: ProblemKind,
    pub inner: Rect,
    pub outer: Rect,
    domain: DomainSpec,
    truth: Option<TruthFn>,
    pub default_parameters: Vec<Vec<f64>>,
}

/// `n` equidistant points of `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Tensor grid with `n` points per parameter box side.
pub fn parameter_grid(bounds: &[[f64; 2]], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &[lo, hi] in bounds {
        let axis = linspace(lo, hi, n);
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn sawblade(params: SawbladeParams) -> Result<CatalogProblem> {
    let poly = sawblade_domain(&params)?;
    let h = params.blade_height;
    let bounds = vec![[0.1, 1.0], [0.05, 0.1]];
    Ok(CatalogProblem {
        id: "sawblade".into(),
        kind: ProblemKind::Elliptic(EllipticProblem::new("sawblade", Arc::new(SawbladeCoefficients), bounds.clone())),
        inner: Rect::new(0.0, params.length, 0.0, h)?,
        outer: Rect::new(0.0, params.length, 0.0, h + params.tooth_height)?,
        domain: DomainSpec::Fixed(poly),
        truth: None,
        default_parameters: parameter_grid(&bounds, 7),
    })
}

/// Saw blade with the Laplacian and zero data: the exact solution is zero.
pub fn sawblade_laplace(params: SawbladeParams) -> Result<CatalogProblem> {
    let mut p = sawblade(params)?;
    p.id = "sawblade-laplace".into();
    p.kind = ProblemKind::Elliptic(EllipticProblem::new("sawblade-laplace", Arc::new(LaplaceCoefficients), vec![]));
    p.truth = Some(Arc::new(|_: &[f64]| Arc::new(crate::approximant::ZeroField) as Arc<dyn Field>));
    p.default_parameters = vec![vec![]];
    Ok(p)
}

pub fn notch() -> CatalogProblem {
    let bounds = vec![[0.0, FRAC_PI_2]];
    CatalogProblem {
        id: "notch".into(),
        kind: ProblemKind::Elliptic(EllipticProblem::new("notch", Arc::new(NotchCoefficients), bounds)),
        inner: Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.25,
            y1: 1.0,
        },
        outer: Rect::unit(),
        domain: DomainSpec::Notch,
        truth: None,
        default_parameters: linspace(0.0, FRAC_PI_2, 9).into_iter().map(|m| vec![m]).collect(),
    }
}

pub const HEAT_HORIZON: f64 = 1.0;

/// `u̇ − μΔu = f` on the unit square with exact solution `t sin πx sin πy`.
pub fn heat_square() -> CatalogProblem {
    let bounds = vec![[0.5, 2.0]];
    let spatial = EllipticProblem::new("heat-square", Arc::new(HeatCoefficients), bounds);
    let truth: TruthFn = Arc::new(|_: &[f64]| {
        Arc::new(FnField::new(|t, p, _| {
            let (sx, cx) = (PI * p[0]).sin_cos();
            let (sy, cy) = (PI * p[1]).sin_cos();
            Sample {
                value: t * sx * sy,
                grad: [t * PI * cx * sy, t * PI * sx * cy],
                dt: sx * sy,
            }
        })) as Arc<dyn Field>
    });
    CatalogProblem {
        id: "heat-square".into(),
        kind: ProblemKind::Parabolic(SpaceTimeProblem {
            spatial,
            horizon: HEAT_HORIZON,
        }),
        inner: Rect {
            x0: 0.2,
            x1: 0.8,
            y0: 0.2,
            y1: 0.8,
        },
        outer: Rect::unit(),
        domain: DomainSpec::Fixed(Polygon::new(Rect::unit().corners().to_vec()).expect("unit square")),
        truth: Some(truth),
        default_parameters: linspace(0.5, 2.0, 4).into_iter().map(|m| vec![m]).collect(),
    }
}

/// Polygon with region-wise constant coefficients. `outer` defaults to the
/// bounding rectangle of the polygon.
pub fn custom(poly: Polygon, coefficients: ConstantCoefficients, inner: Rect, outer: Option<Rect>) -> Result<CatalogProblem> {
    let outer = outer.unwrap_or_else(|| poly.bounding_rect());
    for name in coefficients.region_diffusion.keys() {
        if !poly.subregions().iter().any(|s| &s.name == name) {
            return Err(Error::config(format!("coefficient region {name:?} is not a subregion of the polygon")));
        }
    }
    Ok(CatalogProblem {
        id: "custom".into(),
        kind: ProblemKind::Elliptic(EllipticProblem::new("custom", Arc::new(coefficients), vec![])),
        inner,
        outer,
        domain: DomainSpec::Fixed(poly),
        truth: None,
        default_parameters: vec![vec![]],
    })
}

/// Fixed-geometry catalog entry by id.
pub fn lookup(id: &str) -> Result<CatalogProblem> {
    match id {
        "sawblade" => sawblade(SawbladeParams::default()),
        "sawblade-laplace" => sawblade_laplace(SawbladeParams::default()),
        "notch" => Ok(notch()),
        "heat-square" => Ok(heat_square()),
        _ => Err(Error::config(format!(
            "unknown problem {id:?}; the catalog has {} (or use \"custom\" with a polygon file)",
            CATALOG.join(", ")
        ))),
    }
}

impl CatalogProblem {
    pub fn domain(&self, mu: &[f64]) -> Result<Polygon> {
        match &self.domain {
            DomainSpec::Fixed(p) => Ok(p.clone()),
            DomainSpec::Notch => notched_square(*mu.first().ok_or_else(|| Error::domain("notch needs the angle μ"))?),
        }
    }

    /// The domain when it does not depend on the parameter.
    pub fn fixed_domain(&self) -> Option<&Polygon> {
        match &self.domain {
            DomainSpec::Fixed(p) => Some(p),
            DomainSpec::Notch => None,
        }
    }

    /// Spatial operator (the whole problem in the elliptic case).
    pub fn spatial(&self) -> &EllipticProblem {
        match &self.kind {
            ProblemKind::Elliptic(p) => p,
            ProblemKind::Parabolic(p) => &p.spatial,
        }
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self.kind, ProblemKind::Parabolic(_))
    }

    pub fn truth(&self, mu: &[f64]) -> Option<Arc<dyn Field>> {
        self.truth.as_ref().map(|f| f(mu))
    }

    /// Elliptic problem with the source removed; its exact solution is zero.
    pub fn homogeneous(&self) -> Result<CatalogProblem> {
        let ProblemKind::Elliptic(p) = &self.kind else {
            return Err(Error::config(format!("{} is not elliptic", self.id)));
        };
        let mut q = self.clone();
        q.kind = ProblemKind::Elliptic(EllipticProblem {
            name: format!("{}-homogeneous", p.name),
            coefficients: Arc::new(Homogeneous(p.coefficients.clone())),
            parameter_box: p.parameter_box.clone(),
        });
        q.truth = Some(Arc::new(|_: &[f64]| Arc::new(crate::approximant::ZeroField) as Arc<dyn Field>));
        Ok(q)
    }

    /// Analytic constants at `mu` (elliptic problems only).
    pub fn constants(&self, mu: &[f64]) -> Result<StabilityConstants> {
        problem_constants(self.spatial(), mu, &self.outer)
    }

    /// Human-readable problem sheet.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let sample = self.default_parameters.first().cloned().unwrap_or_default();
        let _ = writeln!(s, "problem      {}", self.id);
        match self.domain(&sample) {
            Ok(poly) => {
                let _ = writeln!(
                    s,
                    "domain       {} vertices, area {:.6}, subregions [{}]",
                    poly.vertices().len(),
                    poly.area(),
                    poly.subregions().iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", ")
                );
            }
            Err(e) => {
                let _ = writeln!(s, "domain       unavailable: {e}");
            }
        }
        let r = |r: &Rect| format!("({}, {}) x ({}, {})", r.x0, r.x1, r.y0, r.y1);
        let _ = writeln!(s, "inner        {}", r(&self.inner));
        let _ = writeln!(s, "outer        {}", r(&self.outer));
        let _ = writeln!(s, "s_PF(outer)  {:.6}", poincare_bound(&self.outer));
        let pbox = &self.spatial().parameter_box;
        if !pbox.is_empty() {
            let b: Vec<String> = pbox.iter().map(|[a, b]| format!("[{a}, {b}]")).collect();
            let _ = writeln!(s, "parameters   {}", b.join(" x "));
        }
        let _ = writeln!(s, "coefficients {}", self.coefficient_text());
        let _ = writeln!(s, "constants    {}", self.constant_text());
        if !sample.is_empty() || !self.is_parabolic() {
            match self.constants(&sample) {
                Ok(c) if !self.is_parabolic() => {
                    let _ = writeln!(s, "at mu = {:?}: c_B = {:.6}, C_B = {:.6}", sample, c.lower, c.upper);
                }
                Ok(_) => {}
                Err(e) => {
                    let _ = writeln!(s, "at mu = {sample:?}: {e}");
                }
            }
        }
        s
    }

    fn coefficient_text(&self) -> &'static str {
        match self.id.as_str() {
            "sawblade" => "A = mu_1 diag(1,2) on the teeth, mu_2 diag(1,2) on the blade; b = 0, c = 0, f = 1",
            "sawblade-laplace" => "A = I, b = 0, c = 0, f = 0 (exact solution 0)",
            "notch" => "A = [[1/2, 1/4], [1/4, 1/2]], b = (10, -3), c = xy + 1, f = 10; mu = recess angle",
            "heat-square" => "u_t - mu Laplace u = f on (0, 1), f chosen so that u = t sin(pi x) sin(pi y)",
            _ => "region-wise constant A, constant b, c and f",
        }
    }

    fn constant_text(&self) -> &'static str {
        match self.id.as_str() {
            "sawblade" => "c_B = 1/(2 max(mu_1, mu_2)), C_B = 1/min(mu_1, mu_2)",
            "notch" => "c_B = 1/(|A| + s_PF |b| + s_PF^2 |c|), C_B = 1/lambda_min(A) = 4",
            "heat-square" => "user supplied (parabolic_constants in the run config)",
            _ => "c_B = 1/(|A| + s_PF |b| + s_PF^2 |c|), C_B = 1/a0",
        }
    }
}
