//! Black-box fields under certification.
//!
//! A [`Field`] returns its value, spatial gradient and time derivative at
//! `(t, x, μ)`; stationary fields ignore `t` and report a zero time
//! derivative. MLPs read their inputs as `(x, y, μ...)` or, in space-time
//! layout, `(t, x, y, μ...)`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Rect};
use crate::quadrature::gauss_legendre;

/// Pointwise evaluation of a field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub grad: [f64; 2],
    pub dt: f64,
}

pub trait Field: Send + Sync {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample;

    fn value(&self, t: f64, x: Point, mu: &[f64]) -> f64 {
        self.sample(t, x, mu).value
    }
}

impl<F: Field + ?Sized> Field for Arc<F> {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        (**self).sample(t, x, mu)
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        (**self).sample(t, x, mu)
    }
}

/// Identically zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl Field for ZeroField {
    fn sample(&self, _: f64, _: Point, _: &[f64]) -> Sample {
        Sample::default()
    }
}

type SampleFn = dyn Fn(f64, Point, &[f64]) -> Sample + Send + Sync;

/// Field defined by a closure returning the full sample.
#[derive(Clone)]
pub struct FnField(Arc<SampleFn>);

impl FnField {
    pub fn new(f: impl Fn(f64, Point, &[f64]) -> Sample + Send + Sync + 'static) -> Self {
        FnField(Arc::new(f))
    }
}

impl Field for FnField {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        (self.0)(t, x, mu)
    }
}

/// `Σ c_k u_k`.
#[derive(Clone, Default)]
pub struct Combination {
    terms: Vec<(f64, Arc<dyn Field>)>,
}

impl Combination {
    pub fn new() -> Self {
        Combination::default()
    }

    pub fn with(mut self, coeff: f64, field: Arc<dyn Field>) -> Self {
        self.terms.push((coeff, field));
        self
    }
}

impl Field for Combination {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        let mut out = Sample::default();
        for (c, f) in &self.terms {
            let s = f.sample(t, x, mu);
            out.value += c * s.value;
            out.grad[0] += c * s.grad[0];
            out.grad[1] += c * s.grad[1];
            out.dt += c * s.dt;
        }
        out
    }
}

/// Scalar time profile `σ(t)` with its derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    Constant,
    Linear,
    Exp { rate: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeProfile::Constant => (1.0, 0.0),
            TimeProfile::Linear => (t, 1.0),
            TimeProfile::Exp { rate } => {
                let e = (rate * t).exp();
                (e, rate * e)
            }
        }
    }

    /// `‖σ‖_{L2(0,T)}` in closed form.
    pub fn l2_norm(&self, horizon: f64) -> f64 {
        match *self {
            TimeProfile::Constant => horizon.sqrt(),
            TimeProfile::Linear => (horizon.powi(3) / 3.0).sqrt(),
            TimeProfile::Exp { rate: 0.0 } => horizon.sqrt(),
            TimeProfile::Exp { rate } => (((2.0 * rate * horizon).exp() - 1.0) / (2.0 * rate)).sqrt(),
        }
    }
}

/// `σ(t) · e(x)` for a stationary `e`.
#[derive(Clone)]
pub struct Separable {
    pub profile: TimeProfile,
    pub spatial: Arc<dyn Field>,
}

impl Field for Separable {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        let (s, ds) = self.profile.eval(t);
        let e = self.spatial.sample(0.0, x, mu);
        Sample {
            value: s * e.value,
            grad: [s * e.grad[0], s * e.grad[1]],
            dt: ds * e.value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let a = z.tanh();
                (a, 1.0 - a * a)
            }
            Activation::Identity => (z, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// Row-major weights, `out × in`.
    #[serde(rename = "W")]
    pub weights: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Feed-forward network `Φ^{l+1} = W^{l+1} ρ(Φ^l) + b^{l+1}` with a scalar
/// output and no activation after the last layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub input_dim: usize,
    pub activation: Activation,
    pub layers: Vec<DenseLayer>,
}

impl MlpWeights {
    pub fn validate(&self) -> Result<()> {
        let err = |i: usize, m: String| Error::Load {
            location: format!("layer {i}"),
            message: m,
        };
        if self.layers.is_empty() {
            return Err(Error::Load {
                location: "layers".into(),
                message: "network has no layers".into(),
            });
        }
        let mut width = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.b.len() {
                return Err(err(i, format!("W has {} rows but b has {} entries", l.weights.len(), l.b.len())));
            }
            if l.weights.is_empty() {
                return Err(err(i, "layer has no outputs".into()));
            }
            for (r, row) in l.weights.iter().enumerate() {
                if row.len() != width {
                    return Err(err(i, format!("row {r} of W has {} columns, expected {width}", row.len())));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(err(i, format!("non-finite entry in row {r} of W")));
                }
            }
            if l.b.iter().any(|v| !v.is_finite()) {
                return Err(err(i, "non-finite entry in b".into()));
            }
            width = l.weights.len();
        }
        if width != 1 {
            return Err(err(self.layers.len() - 1, format!("output dimension is {width}, expected 1")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: MlpWeights = serde_json::from_str(text).map_err(|e| Error::Load {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MlpWeights::from_json(&text)
    }

    /// Forward pass.
    pub fn eval(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.input_dim, "input dimension mismatch");
        let mut cur = z.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut next: Vec<f64> = l
                .weights
                .iter()
                .zip(&l.b)
                .map(|(row, b)| row.iter().zip(&cur).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            if i != last {
                for v in next.iter_mut() {
                    *v = self.activation.apply(*v).0;
                }
            }
            cur = next;
        }
        cur[0]
    }

    /// Output value and its gradient with respect to every input, by a
    /// reverse sweep over the stored activation derivatives.
    pub fn eval_with_input_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(z.len(), self.input_dim, "input dimension mismatch");
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(last);
        let mut cur = z.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let pre: Vec<f64> = l
                .weights
                .iter()
                .zip(&l.b)
                .map(|(row, b)| row.iter().zip(&cur).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            inputs.push(std::mem::take(&mut cur));
            if i == last {
                cur = pre;
            } else {
                let (act, der): (Vec<f64>, Vec<f64>) = pre.iter().map(|&v| self.activation.apply(v)).unzip();
                slopes.push(der);
                cur = act;
            }
        }
        let out = cur[0];
        let mut adj = vec![1.0];
        for i in (0..=last).rev() {
            let l = &self.layers[i];
            if i != last {
                for (a, d) in adj.iter_mut().zip(&slopes[i]) {
                    *a *= d;
                }
            }
            let width = inputs[i].len();
            let mut back = vec![0.0; width];
            for (row, a) in l.weights.iter().zip(&adj) {
                for (bk, w) in back.iter_mut().zip(row) {
                    *bk += a * w;
                }
            }
            adj = back;
        }
        (out, adj)
    }
}

/// Load and validate a weight file.
pub fn mlp_load(path: &Path) -> Result<MlpWeights> {
    MlpWeights::load(path)
}

pub fn mlp_eval(w: &MlpWeights, z: &[f64]) -> f64 {
    w.eval(z)
}

pub fn mlp_input_grad(w: &MlpWeights, z: &[f64]) -> Vec<f64> {
    w.eval_with_input_grad(z).1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputLayout {
    /// `(x, y, μ...)`
    Stationary,
    /// `(t, x, y, μ...)`
    SpaceTime,
}

/// An MLP viewed as a field.
#[derive(Clone, Debug)]
pub struct MlpField {
    pub weights: MlpWeights,
    pub layout: InputLayout,
}

impl MlpField {
    pub fn new(weights: MlpWeights, layout: InputLayout, n_params: usize) -> Result<Self> {
        let expected = match layout {
            InputLayout::Stationary => 2 + n_params,
            InputLayout::SpaceTime => 3 + n_params,
        };
        if weights.input_dim != expected {
            return Err(Error::Load {
                location: "input_dim".into(),
                message: format!(
                    "network takes {} inputs, {layout:?} layout with {n_params} parameters needs {expected}",
                    weights.input_dim
                ),
            });
        }
        Ok(MlpField { weights, layout })
    }
}

impl Field for MlpField {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        let mut z = Vec::with_capacity(self.weights.input_dim);
        if self.layout == InputLayout::SpaceTime {
            z.push(t);
        }
        z.extend_from_slice(&x);
        z.extend_from_slice(mu);
        let (value, g) = self.weights.eval_with_input_grad(&z);
        match self.layout {
            InputLayout::Stationary => Sample { value, grad: [g[0], g[1]], dt: 0.0 },
            InputLayout::SpaceTime => Sample { value, grad: [g[1], g[2]], dt: g[0] },
        }
    }
}

/// Approximate distance function of a polygon: R-equivalence composition
/// `φ = (Σ d_i^{-2})^{-1/2}` of the distances `d_i` to each edge segment.
/// Vanishes exactly on the boundary and is positive inside.
#[derive(Clone, Debug)]
pub struct Adf {
    edges: Vec<(Point, Point)>,
}

impl Adf {
    pub fn new(poly: &Polygon) -> Self {
        Adf { edges: poly.edges().collect() }
    }

    /// Value and gradient.
    pub fn eval(&self, p: Point) -> (f64, [f64; 2]) {
        let mut sum = 0.0;
        let mut gsum = [0.0; 2];
        for &(a, b) in &self.edges {
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
            let r = [p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1]];
            let d2 = r[0] * r[0] + r[1] * r[1];
            if d2 == 0.0 {
                return (0.0, [0.0; 2]);
            }
            // ∇ d^{-2} = -2 r / d⁴
            sum += 1.0 / d2;
            let d4 = d2 * d2;
            gsum[0] += -2.0 * r[0] / d4;
            gsum[1] += -2.0 * r[1] / d4;
        }
        let phi = 1.0 / sum.sqrt();
        // φ = S^{-1/2}  ⇒  ∇φ = -½ S^{-3/2} ∇S
        let c = -0.5 * phi * phi * phi;
        (phi, [c * gsum[0], c * gsum[1]])
    }
}

pub fn build_adf(poly: &Polygon) -> Adf {
    Adf::new(poly)
}

/// `φ · raw`, which has zero trace on the polygon boundary.
#[derive(Clone)]
pub struct MaskedField {
    pub raw: Arc<dyn Field>,
    pub adf: Adf,
}

impl Field for MaskedField {
    fn sample(&self, t: f64, x: Point, mu: &[f64]) -> Sample {
        let (phi, gphi) = self.adf.eval(x);
        let s = self.raw.sample(t, x, mu);
        Sample {
            value: phi * s.value,
            grad: [
                phi * s.grad[0] + s.value * gphi[0],
                phi * s.grad[1] + s.value * gphi[1],
            ],
            dt: phi * s.dt,
        }
    }
}

pub fn masked_field(raw: Arc<dyn Field>, adf: Adf) -> MaskedField {
    MaskedField { raw, adf }
}

/// `c · ((x-x0)(x1-x)(y-y0)(y1-y))²` on `inner`, zero outside, scaled to
/// unit `H¹` seminorm.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    rect: Rect,
    scale: f64,
}

fn bump_1d(a: f64, b: f64, x: f64) -> (f64, f64) {
    let q = (x - a) * (b - x);
    let dq = b + a - 2.0 * x;
    (q * q, 2.0 * q * dq)
}

impl Bump {
    pub fn new(rect: Rect) -> Self {
        // integrands have degree ≤ 8 per direction; 8 points are exact
        let g = gauss_legendre(8).expect("8-point rule");
        let gx = g.mapped(rect.x0, rect.x1);
        let gy = g.mapped(rect.y0, rect.y1);
        let moments = |r: &crate::quadrature::Rule1d, a: f64, b: f64| {
            r.nodes.iter().zip(&r.weights).fold((0.0, 0.0), |(v, d), (&x, &w)| {
                let (f, df) = bump_1d(a, b, x);
                (v + w * f * f, d + w * df * df)
            })
        };
        let (vx, dx) = moments(&gx, rect.x0, rect.x1);
        let (vy, dy) = moments(&gy, rect.y0, rect.y1);
        let seminorm = (dx * vy + vx * dy).sqrt();
        Bump { rect, scale: 1.0 / seminorm }
    }

    pub fn support(&self) -> &Rect {
        &self.rect
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, p: Point) -> (f64, [f64; 2]) {
        let r = &self.rect;
        if !(p[0] > r.x0 && p[0] < r.x1 && p[1] > r.y0 && p[1] < r.y1) {
            return (0.0, [0.0; 2]);
        }
        let (fx, dfx) = bump_1d(r.x0, r.x1, p[0]);
        let (fy, dfy) = bump_1d(r.y0, r.y1, p[1]);
        let c = self.scale;
        (c * fx * fy, [c * dfx * fy, c * fx * dfy])
    }
}

impl Field for Bump {
    fn sample(&self, _: f64, x: Point, _: &[f64]) -> Sample {
        let (value, grad) = self.eval(x);
        Sample { value, grad, dt: 0.0 }
    }
}

pub fn bump_field(inner: Rect) -> Bump {
    Bump::new(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{notched_square, sawblade_domain, SawbladeParams};

    fn net_2_4_1() -> MlpWeights {
        MlpWeights {
            input_dim: 2,
            activation: Activation::Tanh,
            layers: vec![
                DenseLayer {
                    weights: vec![vec![0.5, -1.0], vec![1.5, 0.25], vec![-0.75, 0.8], vec![0.1, 0.2]],
                    b: vec![0.1, -0.2, 0.3, 0.0],
                },
                DenseLayer {
                    weights: vec![vec![1.0, -0.5, 2.0, 0.7]],
                    b: vec![0.05],
                },
            ],
        }
    }

    #[test]
    fn linear_single_layer_picks_first_input() {
        let w = MlpWeights {
            input_dim: 2,
            activation: Activation::Tanh,
            layers: vec![DenseLayer { weights: vec![vec![1.0, 0.0]], b: vec![0.0] }],
        };
        w.validate().unwrap();
        assert_eq!(w.eval(&[0.3, 0.9]), 0.3);
        assert_eq!(mlp_input_grad(&w, &[0.3, 0.9]), vec![1.0, 0.0]);
    }

    #[test]
    fn zero_network_is_zero() {
        let mut w = net_2_4_1();
        for l in w.layers.iter_mut() {
            l.weights.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
            l.b.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(w.eval(&[0.3, 0.7]), 0.0);
        assert_eq!(mlp_input_grad(&w, &[0.3, 0.7]), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_forward_pass() {
        // hidden pre-activations at (0.3, 0.7):
        //   0.15 - 0.7 + 0.1 = -0.45 ; 0.45 + 0.175 - 0.2 = 0.425
        //  -0.225 + 0.56 + 0.3 = 0.635 ; 0.03 + 0.14 = 0.17
        let h = [(-0.45f64).tanh(), 0.425f64.tanh(), 0.635f64.tanh(), 0.17f64.tanh()];
        let expected = h[0] - 0.5 * h[1] + 2.0 * h[2] + 0.7 * h[3] + 0.05;
        assert!((mlp_eval(&net_2_4_1(), &[0.3, 0.7]) - expected).abs() < 1e-12);
    }

    #[test]
    fn load_errors_name_the_layer() {
        let bad = r#"{"input_dim": 2, "activation": "tanh",
            "layers": [{"W": [[1, 2], [3, 4]], "b": [0, 0]}, {"W": [[1, 2, 3]], "b": [0]}]}"#;
        match MlpWeights::from_json(bad) {
            Err(Error::Load { location, .. }) => assert_eq!(location, "layer 1"),
            other => panic!("{other:?}"),
        }
        let relu = r#"{"input_dim": 1, "activation": "relu", "layers": [{"W": [[1]], "b": [0]}]}"#;
        assert!(matches!(MlpWeights::from_json(relu), Err(Error::Load { .. })));
        let wide = r#"{"input_dim": 1, "activation": "tanh", "layers": [{"W": [[1], [2]], "b": [0, 1]}]}"#;
        assert!(matches!(MlpWeights::from_json(wide), Err(Error::Load { .. })));
    }

    #[test]
    fn non_finite_weights_rejected() {
        let mut w = net_2_4_1();
        w.layers[0].b[2] = f64::NAN;
        match w.validate() {
            Err(Error::Load { location, .. }) => assert_eq!(location, "layer 0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn adf_on_unit_square() {
        let sq = Rect::unit().to_polygon();
        let adf = build_adf(&sq);
        let (c, g) = adf.eval([0.5, 0.5]);
        assert!((c - 0.25).abs() < 1e-15);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        for p in [[0.5, 0.0], [1.0, 0.5], [0.0, 0.0], [1.0, 1.0]] {
            assert!(adf.eval(p).0.abs() < 1e-12);
        }
        for &(x, y) in &[(0.1, 0.2), (0.33, 0.91), (0.7, 0.45)] {
            assert!((adf.eval([x, y]).0 - adf.eval([1.0 - x, y]).0).abs() < 1e-12);
        }
    }

    #[test]
    fn adf_gradient_matches_differences() {
        let poly = sawblade_domain(&SawbladeParams::default()).unwrap();
        let adf = build_adf(&poly);
        let h = 1e-6;
        for &p in &[[0.3, 0.2], [2.1, 0.4], [3.7, 0.55], [1.25, 0.8]] {
            let (_, g) = adf.eval(p);
            let fx = (adf.eval([p[0] + h, p[1]]).0 - adf.eval([p[0] - h, p[1]]).0) / (2.0 * h);
            let fy = (adf.eval([p[0], p[1] + h]).0 - adf.eval([p[0], p[1] - h]).0) / (2.0 * h);
            assert!((fx - g[0]).abs() < 1e-6 && (fy - g[1]).abs() < 1e-6);
            assert!(adf.eval(p).0 > 0.0);
        }
    }

    #[test]
    fn mask_of_constant_is_adf() {
        let poly = notched_square(0.8).unwrap();
        let adf = build_adf(&poly);
        let one = FnField::new(|_, _, _| Sample { value: 1.0, ..Default::default() });
        let m = masked_field(Arc::new(one), adf.clone());
        for p in [[0.2, 0.3], [0.9, 0.9], [0.5, 0.6]] {
            assert_eq!(m.value(0.0, p, &[]), adf.eval(p).0);
        }
        for (a, b) in poly.edges() {
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            assert!(m.value(0.0, mid, &[]).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_properties() {
        let inner = Rect::new(0.0, 4.0, 0.0, 0.5).unwrap();
        let b = bump_field(inner);
        for p in inner.boundary_samples(4) {
            let (v, g) = b.eval(p);
            assert_eq!(v, 0.0);
            assert_eq!(g, [0.0, 0.0]);
        }
        assert!(b.eval(inner.center()).0 > 0.0);
        assert_eq!(b.eval([1.0, 0.7]).0, 0.0);
        // independent seminorm check with a finer product rule
        let g = gauss_legendre(20).unwrap();
        let rule = crate::quadrature::tensor_rule(&g, &g, &inner);
        let s: f64 = rule.integrate(|p| {
            let (_, d) = b.eval(p);
            d[0] * d[0] + d[1] * d[1]
        });
        assert!((s.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_time_profiles() {
        assert!((TimeProfile::Linear.l2_norm(1.0) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let e = TimeProfile::Exp { rate: 1.0 };
        let g = gauss_legendre(16).unwrap().mapped(0.0, 2.0);
        let quad = g.integrate(|t| e.eval(t).0.powi(2)).sqrt();
        assert!((quad - e.l2_norm(2.0)).abs() < 1e-12);
    }
}
