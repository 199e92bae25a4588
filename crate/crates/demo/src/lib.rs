//! Browser front end: certification sweeps, field previews and a dual-norm
//! convergence study, each returned as a JSON string.

use std::f64::consts::PI;
use std::path::Path;

use dualcert::catalog::{self, CatalogProblem};
use dualcert::certify::SweepOptions;
use dualcert::geometry::Rect;
use dualcert::oracle::{hat_functional, mesh_polygon, p1_dual_norm};
use dualcert::quadrature::{gauss_legendre, tensor_rule};
use dualcert::run::{build_field, run, FieldSpec, RunConfig};
use dualcert::RieszSolver;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

pub mod api {
    use super::*;

    type ApiResult = Result<String, String>;

    fn text<T: Serialize>(v: &T) -> ApiResult {
        serde_json::to_string(v).map_err(|e| e.to_string())
    }

    fn problem(id: &str) -> Result<CatalogProblem, String> {
        catalog::lookup(id).map_err(|e| e.to_string())
    }

    pub fn catalog_ids() -> ApiResult {
        let ids: Vec<&str> = catalog::CATALOG.iter().copied().filter(|id| *id != "heat-square").collect();
        text(&ids)
    }

    pub fn describe(id: &str) -> ApiResult {
        Ok(problem(id)?.describe())
    }

    #[derive(Serialize)]
    struct Row {
        mu: Vec<f64>,
        lower: Option<f64>,
        upper: Option<f64>,
        reference: Option<f64>,
        slack: Option<f64>,
        error: Option<String>,
    }

    /// Bounds over `grid` parameter values per box side with the
    /// perturbed field of the given amplitude.
    pub fn sweep(id: &str, grid: usize, amplitude: f64, order: usize, oracle_refine: usize) -> ApiResult {
        let config = json!({
            "schema_version": 1,
            "problem": {"id": id},
            "field": {"kind": "perturbed", "amplitude": amplitude},
            "parameters": {"grid": grid},
            "spectral": {"inner_order": [order, order], "outer_order": [order, order]},
            "quadrature": {"polygon_order": (order + 8).min(32), "polygon_refine": 1},
            "oracle": {"enabled": oracle_refine > 0, "refine": oracle_refine.max(1)},
        });
        let config = RunConfig::from_json(&config.to_string(), Path::new(".")).map_err(|e| e.to_string())?;
        let out = run(&config, SweepOptions { workers: None, serial: true }).map_err(|e| e.to_string())?;
        let rows: Vec<Row> = out
            .sweep
            .rows
            .iter()
            .map(|r| match &r.outcome {
                Ok(b) => Row {
                    mu: r.mu.clone(),
                    lower: Some(b.lower),
                    upper: Some(b.upper),
                    reference: b.reference.map(|x| x.value),
                    slack: b.reference.map(|x| x.slack),
                    error: None,
                },
                Err(e) => Row {
                    mu: r.mu.clone(),
                    lower: None,
                    upper: None,
                    reference: None,
                    slack: None,
                    error: Some(e.clone()),
                },
            })
            .collect();
        text(&json!({"n_params": out.n_params, "rows": rows}))
    }

    /// Domain outline, embedding rectangles and the perturbed field sampled
    /// on an `n × n` grid over the outer rectangle (`null` outside Ω).
    pub fn scene(id: &str, mu: &[f64], amplitude: f64, n: usize) -> ApiResult {
        let p = problem(id)?;
        let domain = p.domain(mu).map_err(|e| e.to_string())?;
        let spec = FieldSpec::Perturbed {
            offset: 0.5,
            amplitude,
            modes: [2, 1],
        };
        let field = build_field(&spec, &p, mu, &domain, None).map_err(|e| e.to_string())?;
        let o = p.outer;
        let n = n.clamp(2, 400);
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            let y = o.y0 + (j as f64 + 0.5) / n as f64 * o.height();
            for i in 0..n {
                let x = o.x0 + (i as f64 + 0.5) / n as f64 * o.width();
                values.push(domain.contains([x, y]).then(|| field.value(0.0, [x, y], mu)));
            }
        }
        let rect = |r: &Rect| json!([r.x0, r.x1, r.y0, r.y1]);
        text(&json!({
            "polygon": domain.vertices(),
            "inner": rect(&p.inner),
            "outer": rect(&o),
            "n": n,
            "values": values,
        }))
    }

    /// Dual norm of `v ↦ ∫ sin πx sin πy v` on the unit square by the
    /// spectral and P1 Riesz solves, next to its closed form.
    pub fn convergence(max_order: usize, max_level: usize) -> ApiResult {
        let exact = 1.0 / (2.0 * 2f64.sqrt() * PI);
        let sine = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
        let g = gauss_legendre(32).map_err(|e| e.to_string())?;
        let rule = tensor_rule(&g, &g, &Rect::unit());
        let mut spectral = Vec::new();
        for n in 1..=max_order.clamp(1, 24) {
            let solver = RieszSolver::new(Rect::unit(), (n, n)).map_err(|e| e.to_string())?;
            let b = solver.space.eval_basis(&rule.points);
            let mut f = vec![0.0; solver.space.dim()];
            for (k, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let s = sine(p);
                for (m, fm) in f.iter_mut().enumerate() {
                    *fm += w * s * b.value(k, m);
                }
            }
            let v = solver.dual_norm(&f).map_err(|e| e.to_string())?;
            spectral.push(json!({"order": n, "value": v, "gap": exact - v}));
        }
        let square = Rect::unit().to_polygon();
        let mut p1 = Vec::new();
        for level in 0..=max_level.min(6) {
            let mesh = mesh_polygon(&square, level).map_err(|e| e.to_string())?;
            let f = hat_functional(&mesh, sine, |_| [0.0; 2], 8).map_err(|e| e.to_string())?;
            let v = p1_dual_norm(&mesh, &f).map_err(|e| e.to_string())?;
            p1.push(json!({"level": level, "dofs": mesh.dofs().n, "value": v, "gap": exact - v}));
        }
        text(&json!({"exact": exact, "spectral": spectral, "p1": p1}))
    }
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn catalog_ids() -> Result<String, JsValue> {
    js(api::catalog_ids())
}

#[wasm_bindgen]
pub fn describe(id: &str) -> Result<String, JsValue> {
    js(api::describe(id))
}

#[wasm_bindgen]
pub fn sweep(id: &str, grid: usize, amplitude: f64, order: usize, oracle_refine: usize) -> Result<String, JsValue> {
    js(api::sweep(id, grid, amplitude, order, oracle_refine))
}

#[wasm_bindgen]
pub fn scene(id: &str, mu: Vec<f64>, amplitude: f64, n: usize) -> Result<String, JsValue> {
    js(api::scene(id, &mu, amplitude, n))
}

#[wasm_bindgen]
pub fn convergence(max_order: usize, max_level: usize) -> Result<String, JsValue> {
    js(api::convergence(max_order, max_level))
}
