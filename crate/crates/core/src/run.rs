//! Configuration-driven runs: JSON config in, one CSV row per parameter out.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::approximant::{bump_field, masked_field, Adf, Combination, Field, FnField, InputLayout, MlpField, MlpWeights, Sample, Separable, TimeProfile, ZeroField};
use crate::catalog::{custom, lookup, parameter_grid, sawblade, sawblade_laplace, CatalogProblem, ProblemKind};
use crate::certify::{
    certify_elliptic, certify_parabolic, sweep, BoundReport, Certifier, PreparedDomain, ReferenceError, Resolution,
    StabilityConstants, Sweep, SweepOptions,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Rect, SawbladeParams};
use crate::oracle::reference_error;
use crate::quadrature::Rule2d;
use crate::residual::ConstantCoefficients;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub id: String,
    /// Generator parameters for the saw-blade problems.
    #[serde(default)]
    pub sawblade: Option<SawbladeParams>,
    /// Polygon file for `custom`.
    #[serde(default)]
    pub polygon: Option<PathBuf>,
    #[serde(default)]
    pub coefficients: Option<ConstantCoefficients>,
    /// `[x0, x1, y0, y1]`; required for `custom`.
    #[serde(default)]
    pub inner: Option<[f64; 4]>,
    #[serde(default)]
    pub outer: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// The problem's exact solution.
    Exact,
    /// Elliptic: zero data and field `−scale·bump`, so the error is the
    /// bump. Parabolic: `truth − scale·t·bump`.
    TruthMinusBump {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `φ_Ω · (offset + amplitude cos(kx π x) cos(ky π y))` with `φ_Ω` the
    /// distance function of the domain.
    Perturbed {
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: [u32; 2],
    },
    /// Parabolic: `truth + amplitude·σ(t)·bump`.
    Separable {
        profile: TimeProfile,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Mlp {
        path: PathBuf,
        #[serde(default)]
        layout: Option<InputLayout>,
        #[serde(default = "yes")]
        mask: bool,
    },
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_offset() -> f64 {
    0.5
}
fn default_amplitude() -> f64 {
    0.25
}
fn default_modes() -> [u32; 2] {
    [2, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Parameters {
    /// `n` equidistant values per parameter box side.
    Grid(usize),
    List(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub inner_order: (usize, usize),
    pub outer_order: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub inner_points: usize,
    pub polygon_order: usize,
    pub polygon_refine: usize,
    pub time_points: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        let r = Resolution::default();
        SpectralConfig {
            inner_order: r.inner_order,
            outer_order: r.outer_order,
        }
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let r = Resolution::default();
        QuadratureConfig {
            inner_points: r.inner_points,
            polygon_order: r.polygon_order,
            polygon_refine: r.polygon_refine,
            time_points: r.time_points,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub enabled: bool,
    pub refine: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            enabled: false,
            refine: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    pub field: FieldSpec,
    #[serde(default)]
    pub parameters: Option<Parameters>,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub parabolic_constants: Option<ConstantsConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Seeds the boundary sample points of the zero-trace diagnostic.
    #[serde(default)]
    pub seed: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn rect(v: [f64; 4]) -> Result<Rect> {
    Rect::new(v[0], v[1], v[2], v[3])
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        c.base_dir = base_dir.to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            inner_order: self.spectral.inner_order,
            outer_order: self.spectral.outer_order,
            inner_points: self.quadrature.inner_points,
            polygon_order: self.quadrature.polygon_order,
            polygon_refine: self.quadrature.polygon_refine,
            time_points: self.quadrature.time_points,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.resolution().validate()?;
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1"));
        }
        if let Some(c) = self.parabolic_constants {
            StabilityConstants::user(c.lower, c.upper)?;
        }
        for path in [self.problem.polygon.as_ref(), self.mlp_path()].into_iter().flatten() {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(Error::config(format!("referenced file {} does not exist", p.display())));
            }
        }
        if let Some(Parameters::Grid(0)) = self.parameters {
            return Err(Error::config("parameter grid needs at least one point per side"));
        }
        if self.problem()?.is_parabolic() && self.parabolic_constants.is_none() {
            return Err(Error::config(
                "parabolic problems need \"parabolic_constants\": {\"lower\": c_B, \"upper\": C_B}",
            ));
        }
        Ok(())
    }

    fn mlp_path(&self) -> Option<&PathBuf> {
        match &self.field {
            FieldSpec::Mlp { path, .. } => Some(path),
            _ => None,
        }
    }

    /// Resolves the problem entry, including the homogeneous switch for
    /// elliptic `truth-minus-bump` fields.
    pub fn problem(&self) -> Result<CatalogProblem> {
        let pc = &self.problem;
        let base = match pc.id.as_str() {
            "custom" => {
                let poly = Polygon::load(&self.resolve(
                    pc.polygon.as_ref().ok_or_else(|| Error::config("custom problem needs \"polygon\""))?,
                ))?;
                let coeffs = pc
                    .coefficients
                    .clone()
                    .ok_or_else(|| Error::config("custom problem needs \"coefficients\""))?;
                let inner = rect(pc.inner.ok_or_else(|| Error::config("custom problem needs \"inner\""))?)?;
                custom(poly, coeffs, inner, pc.outer.map(rect).transpose()?)?
            }
            "sawblade" if pc.sawblade.is_some() => sawblade(pc.sawblade.unwrap_or_default())?,
            "sawblade-laplace" if pc.sawblade.is_some() => sawblade_laplace(pc.sawblade.unwrap_or_default())?,
            id => lookup(id)?,
        };
        let mut base = base;
        if pc.id != "custom" {
            if let Some(i) = pc.inner {
                base.inner = rect(i)?;
            }
            if let Some(o) = pc.outer {
                base.outer = rect(o)?;
            }
        }
        match (&self.field, base.is_parabolic()) {
            (FieldSpec::TruthMinusBump { .. }, false) => base.homogeneous(),
            _ => Ok(base),
        }
    }

    pub fn parameter_list(&self, problem: &CatalogProblem) -> Vec<Vec<f64>> {
        match &self.parameters {
            None => problem.default_parameters.clone(),
            Some(Parameters::Grid(n)) => parameter_grid(&problem.spatial().parameter_box, *n),
            Some(Parameters::List(l)) => l.clone(),
        }
    }
}

/// Builds the field at one parameter.
pub fn build_field(
    spec: &FieldSpec,
    problem: &CatalogProblem,
    mu: &[f64],
    domain: &Polygon,
    weights: Option<&MlpWeights>,
) -> Result<Arc<dyn Field>> {
    let truth = || {
        problem
            .truth(mu)
            .ok_or_else(|| Error::config(format!("problem {} has no known exact solution", problem.id)))
    };
    let bump: Arc<dyn Field> = Arc::new(bump_field(problem.inner));
    Ok(match spec {
        FieldSpec::Zero => Arc::new(ZeroField),
        FieldSpec::Exact => truth()?,
        FieldSpec::TruthMinusBump { scale } => {
            if problem.is_parabolic() {
                let tb: Arc<dyn Field> = Arc::new(Separable {
                    profile: TimeProfile::Linear,
                    spatial: bump,
                });
                Arc::new(Combination::new().with(1.0, truth()?).with(-scale, tb))
            } else {
                Arc::new(Combination::new().with(1.0, truth()?).with(-scale, bump))
            }
        }
        FieldSpec::Perturbed {
            offset,
            amplitude,
            modes,
        } => {
            let (o, a) = (*offset, *amplitude);
            let (kx, ky) = (modes[0] as f64 * std::f64::consts::PI, modes[1] as f64 * std::f64::consts::PI);
            let raw = FnField::new(move |_, p, _| {
                let (sx, cx) = (kx * p[0]).sin_cos();
                let (sy, cy) = (ky * p[1]).sin_cos();
                Sample {
                    value: o + a * cx * cy,
                    grad: [-a * kx * sx * cy, -a * ky * cx * sy],
                    dt: 0.0,
                }
            });
            Arc::new(masked_field(Arc::new(raw), Adf::new(domain)))
        }
        FieldSpec::Separable { profile, amplitude } => {
            if !problem.is_parabolic() {
                return Err(Error::config("separable fields need a parabolic problem"));
            }
            let s: Arc<dyn Field> = Arc::new(Separable {
                profile: *profile,
                spatial: bump,
            });
            Arc::new(Combination::new().with(1.0, truth()?).with(*amplitude, s))
        }
        FieldSpec::Mlp { layout, mask, .. } => {
            let w = weights.ok_or_else(|| Error::config("MLP weights were not loaded"))?;
            let layout = layout.unwrap_or(if problem.is_parabolic() {
                InputLayout::SpaceTime
            } else {
                InputLayout::Stationary
            });
            let net: Arc<dyn Field> = Arc::new(MlpField::new(w.clone(), layout, mu.len())?);
            if *mask {
                Arc::new(masked_field(net, Adf::new(domain)))
            } else {
                net
            }
        }
    })
}

/// `|field − truth|_{H¹}` by quadrature (stationary fields, `t = 0`).
pub fn quadrature_error(field: &dyn Field, truth: &dyn Field, rule: &Rule2d, mu: &[f64]) -> f64 {
    let mut sq = 0.0;
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        let (a, b) = (field.sample(0.0, p, mu), truth.sample(0.0, p, mu));
        let (ex, ey) = (a.grad[0] - b.grad[0], a.grad[1] - b.grad[1]);
        sq += w * (ex * ex + ey * ey);
    }
    sq.sqrt()
}

/// Largest `|field|` over random points on the domain boundary.
pub fn trace_defect(field: &dyn Field, domain: &Polygon, mu: &[f64], samples: usize, seed: u64, t: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(Point, Point)> = domain.edges().collect();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (a, b) = edges[rng.random_range(0..edges.len())];
        let s: f64 = rng.random();
        let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        worst = worst.max(field.value(t, p, mu).abs());
    }
    worst
}

pub const TRACE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub n_params: usize,
    pub sweep: Sweep,
    /// Non-fatal notes, one per affected row.
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn all_failed(&self) -> bool {
        self.sweep.summary.succeeded == 0
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["param_index".to_string()];
        h.extend((1..=self.n_params).map(|k| format!("mu_{k}")));
        h.extend(
            [
                "dual_inner",
                "dual_outer",
                "lower_bound",
                "upper_bound",
                "ref_error",
                "ref_slack",
                "eff_lower",
                "eff_upper",
                "t_inner_s",
                "t_outer_s",
                "t_oracle_s",
                "error",
            ]
            .map(String::from),
        );
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Numerical(format!("CSV output failed: {e}"));
        out.write_record(self.header()).map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.sweep.rows {
            let mut rec = vec![row.index.to_string()];
            let mut mu: Vec<String> = row.mu.iter().map(f64::to_string).collect();
            mu.resize(self.n_params, String::new());
            rec.extend(mu);
            match &row.outcome {
                Ok(r) => {
                    rec.extend([r.dual_inner, r.dual_outer, r.lower, r.upper].map(|v| v.to_string()));
                    rec.push(opt(r.reference.map(|x| x.value)));
                    rec.push(opt(r.reference.map(|x| x.slack)));
                    rec.push(opt(r.eff_lower()));
                    rec.push(opt(r.eff_upper()));
                    rec.extend([r.timings.inner_s, r.timings.outer_s, r.timings.oracle_s].map(|v| format!("{v:.6}")));
                    rec.push(if r.is_consistent() {
                        String::new()
                    } else {
                        "lower bound exceeds upper bound; raise the outer order".into()
                    });
                }
                Err(e) => {
                    rec.extend(std::iter::repeat_n(String::new(), 11));
                    rec.push(e.clone());
                }
            }
            out.write_record(rec).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Numerical(format!("CSV output failed: {e}")))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

struct RowContext<'a> {
    config: &'a RunConfig,
    problem: &'a CatalogProblem,
    certifier: &'a Certifier,
    fixed: Option<&'a PreparedDomain>,
    weights: Option<&'a MlpWeights>,
}

impl RowContext<'_> {
    fn row(&self, mu: &[f64]) -> Result<(BoundReport, Option<String>)> {
        let owned;
        let prepared = match self.fixed {
            Some(p) => p,
            None => {
                owned = self.certifier.prepare(self.problem.domain(mu)?)?;
                &owned
            }
        };
        let domain = &prepared.embedding.domain;
        let field = build_field(&self.config.field, self.problem, mu, domain, self.weights)?;
        let mut report = match &self.problem.kind {
            ProblemKind::Elliptic(p) => certify_elliptic(self.certifier, p, field.as_ref(), mu, prepared)?,
            ProblemKind::Parabolic(p) => {
                let c = match self.config.parabolic_constants {
                    Some(c) => Some(StabilityConstants::user(c.lower, c.upper)?),
                    None => None,
                };
                certify_parabolic(self.certifier, p, field.as_ref(), mu, prepared, c)?
            }
        };
        if let ProblemKind::Elliptic(p) = &self.problem.kind {
            let clock = Instant::now();
            let reference = match self.problem.truth(mu) {
                Some(truth) => Some(ReferenceError {
                    value: quadrature_error(field.as_ref(), truth.as_ref(), &prepared.outer_rule, mu),
                    slack: 0.0,
                }),
                None if self.config.oracle.enabled => {
                    Some(reference_error(p, field.as_ref(), mu, domain, self.config.oracle.refine)?.0)
                }
                None => None,
            };
            report.reference = reference;
            report.timings.oracle_s = if reference.is_some() { clock.elapsed().as_secs_f64() } else { 0.0 };
        }
        let horizon = match &self.problem.kind {
            ProblemKind::Parabolic(p) => p.horizon,
            ProblemKind::Elliptic(_) => 0.0,
        };
        let defect = trace_defect(field.as_ref(), domain, mu, 256, self.config.seed, horizon);
        let warning = (defect > TRACE_TOL).then(|| {
            format!("field is not zero on the boundary (max |u| = {defect:e} at 256 samples); bounds assume zero trace")
        });
        Ok((report, warning))
    }
}

/// Executes a run. `options` overrides the config's worker count.
pub fn run(config: &RunConfig, options: SweepOptions) -> Result<RunOutput> {
    let problem = config.problem()?;
    let params = config.parameter_list(&problem);
    let pbox = problem.spatial().parameter_box.len();
    for (i, mu) in params.iter().enumerate() {
        if mu.len() != pbox {
            return Err(Error::config(format!(
                "parameter {i} has {} components, problem {} takes {pbox}",
                mu.len(),
                problem.id
            )));
        }
    }
    let weights = match &config.field {
        FieldSpec::Mlp { path, .. } => Some(MlpWeights::load(&config.resolve(path))?),
        _ => None,
    };
    let certifier = Certifier::new(problem.inner, problem.outer, config.resolution())?;
    let fixed = match problem.fixed_domain() {
        Some(d) => Some(certifier.prepare(d.clone())?),
        None => None,
    };
    let ctx = RowContext {
        config,
        problem: &problem,
        certifier: &certifier,
        fixed: fixed.as_ref(),
        weights: weights.as_ref(),
    };
    let warnings = std::sync::Mutex::new(Vec::new());
    let options = SweepOptions {
        workers: options.workers.or(config.workers),
        serial: options.serial,
    };
    let mut sweep = sweep(&params, options, |mu| {
        let (report, warning) = ctx.row(mu)?;
        if let Some(w) = warning {
            warnings.lock().expect("warning list").push((mu.to_vec(), w));
        }
        Ok(report)
    })?;
    sweep.rows.sort_by_key(|r| r.index);
    let mut notes = warnings.into_inner().expect("warning list");
    notes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(RunOutput {
        n_params: pbox,
        sweep,
        warnings: notes.into_iter().map(|(mu, w)| format!("mu = {mu:?}: {w}")).collect(),
    })
}
