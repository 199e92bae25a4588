//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with the
//! measured quantity next to its pinned tolerance, then asserts.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use dualcert::approximant::{Activation, Bump, Combination, DenseLayer, Field, MlpWeights, Separable, TimeProfile};
use dualcert::catalog::{self, CatalogProblem, ProblemKind};
use dualcert::certify::{elliptic_constants, problem_constants, Resolution, SweepOptions};
use dualcert::geometry::{notched_square, sawblade_domain, Polygon, Rect, SawbladeParams};
use dualcert::oracle::{hat_functional, mesh_polygon, p1_dual_norm};
use dualcert::quadrature::{gauss_legendre, gauss_lobatto, polygon_rule, tensor_rule, triangle_rule, Rule2d};
use dualcert::residual::{parabolic_residual_at_time, spacetime_dual_norm, Region};
use dualcert::run::{build_field, run, FieldSpec, RunConfig};
use dualcert::{certify_elliptic, Certifier, RieszSolver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACTNESS_TOL: f64 = 1e-6;
const EXACTNESS_SECS: f64 = 10.0;
const CONSTANTS_TOL: f64 = 1e-14;
const SPECTRAL_CLOSED_FORM_TOL: f64 = 1e-8;
const SPECTRAL_CLOSED_FORM_SECS: f64 = 1.0;
const P1_CLOSED_FORM_REL: f64 = 0.01;
const P1_CLOSED_FORM_LEVELS: usize = 3;
const P1_CLOSED_FORM_SECS: f64 = 30.0;
const ENCLOSURE_MIN_ROWS: usize = 20;
const ENCLOSURE_SECS: f64 = 300.0;
const BOCHNER_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-12;
const QUADRATURE_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-6;
const PHASE_RATIO: f64 = 0.1;

fn verdict(name: &str, pass: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_json(text, Path::new(".")).expect("config")
}

fn eigen_dual_norm() -> f64 {
    1.0 / (2.0 * 2f64.sqrt() * PI)
}

fn sine(p: [f64; 2]) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

fn spectral_functional(solver: &RieszSolver, rule: &Rule2d, s: impl Fn([f64; 2]) -> f64, q: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let b = solver.space.eval_basis(&rule.points);
    let mut f = vec![0.0; solver.space.dim()];
    for (k, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let (sv, qv) = (s(p), q(p));
        for (m, fm) in f.iter_mut().enumerate() {
            let g = b.gradient(k, m);
            *fm += w * (sv * b.value(k, m) + qv[0] * g[0] + qv[1] * g[1]);
        }
    }
    f
}

#[test]
fn sandwich_exactness_for_the_bump_error() {
    let clock = Instant::now();
    let c = config(
        r#"{"schema_version": 1, "problem": {"id": "sawblade-laplace"}, "field": {"kind": "truth-minus-bump"},
            "spectral": {"inner_order": [16, 16], "outer_order": [16, 16]}}"#,
    );
    let out = run(&c, SweepOptions { workers: None, serial: true }).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let b = out.sweep.rows[0].outcome.as_ref().unwrap();
    let (dl, du) = ((b.lower - 1.0).abs(), (b.upper - 1.0).abs());
    let lower_ok = verdict(
        "sandwich exactness (lower)",
        dl <= EXACTNESS_TOL,
        format!("lower = {:.15}, |lower - 1| = {dl:.2e} (tol {EXACTNESS_TOL:e})", b.lower),
    );
    let upper_ok = verdict(
        "sandwich exactness (upper)",
        du <= EXACTNESS_TOL,
        format!("upper = {:.15}, |upper - 1| = {du:.2e} (tol {EXACTNESS_TOL:e})", b.upper),
    );
    let time_ok = verdict(
        "sandwich exactness (runtime)",
        secs < EXACTNESS_SECS,
        format!("{secs:.2} s (limit {EXACTNESS_SECS} s)"),
    );
    assert!(lower_ok && upper_ok && time_ok);
}

#[test]
fn analytic_stability_constants() {
    let saw = catalog::sawblade(SawbladeParams::default()).unwrap();
    let notch = catalog::notch();
    let mut worst: f64 = 0.0;
    for mu in [[0.1, 0.05], [0.3, 0.1], [1.0, 0.07], [0.55, 0.55], [0.1, 0.1]] {
        let k = problem_constants(saw.spatial(), &mu, &saw.outer).unwrap();
        let lo = 1.0 / (2.0 * mu[0].max(mu[1]));
        let up = 1.0 / mu[0].min(mu[1]);
        worst = worst.max(((k.lower - lo) / lo).abs()).max(((k.upper - up) / up).abs());
    }
    for mu in [0.0, 0.4, FRAC_PI_4, 1.5] {
        let k = problem_constants(notch.spatial(), &[mu], &notch.outer).unwrap();
        worst = worst.max((k.upper - 4.0).abs() / 4.0);
    }
    let direct = elliptic_constants(0.25, 0.75, 0.0, 0.0, 1.0).unwrap();
    worst = worst.max((direct.upper - 4.0).abs()).max((direct.lower - 4.0 / 3.0).abs());
    let ok = verdict(
        "analytic constants",
        worst <= CONSTANTS_TOL,
        format!("worst relative deviation {worst:.2e} (tol {CONSTANTS_TOL:e})"),
    );
    assert!(ok);
}

const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;

#[test]
fn eigenfunction_dual_norm_closed_form() {
    let exact = eigen_dual_norm();
    let clock = Instant::now();
    let solver = RieszSolver::new(Rect::unit(), (12, 12)).unwrap();
    let g = gauss_legendre(32).unwrap();
    let rule = tensor_rule(&g, &g, &Rect::unit());
    let f = spectral_functional(&solver, &rule, sine, |_| [0.0; 2]);
    let spectral = solver.dual_norm(&f).unwrap();
    let spectral_secs = clock.elapsed().as_secs_f64();
    let ds = (spectral - exact).abs();
    let spectral_ok = verdict(
        "closed form (spectral, order 12)",
        ds <= SPECTRAL_CLOSED_FORM_TOL && spectral_secs < SPECTRAL_CLOSED_FORM_SECS,
        format!("{spectral:.12} vs {exact:.12}, error {ds:.2e} (tol {SPECTRAL_CLOSED_FORM_TOL:e}), {spectral_secs:.3} s"),
    );

    let clock = Instant::now();
    let square = Rect::unit().to_polygon();
    let mut gaps = Vec::new();
    for level in 1..=P1_CLOSED_FORM_LEVELS + 1 {
        let mesh = mesh_polygon(&square, level).unwrap();
        let f = hat_functional(&mesh, sine, |_| [0.0; 2], 8).unwrap();
        gaps.push((exact - p1_dual_norm(&mesh, &f).unwrap()) / exact);
    }
    let p1_secs = clock.elapsed().as_secs_f64();
    let gap = gaps[P1_CLOSED_FORM_LEVELS - 1];
    let ladder: Vec<String> = gaps.iter().enumerate().map(|(l, g)| format!("L{}={:.2}%", l + 1, 100.0 * g)).collect();
    let p1_ok = verdict(
        "closed form (P1, 3 refinement levels)",
        gap.abs() <= P1_CLOSED_FORM_REL && p1_secs < P1_CLOSED_FORM_SECS,
        format!(
            "relative gap {:.3}% at level {P1_CLOSED_FORM_LEVELS} (tol {}%), ladder {}, {p1_secs:.2} s",
            100.0 * gap,
            100.0 * P1_CLOSED_FORM_REL,
            ladder.join(" ")
        ),
    );
    assert!(spectral_ok && p1_ok);
}

#[test]
fn enclosure_under_a_perturbed_field() {
    let clock = Instant::now();
    let mut rows = 0;
    let mut failures = Vec::new();
    let mut worst_lower: f64 = 0.0;
    let mut worst_upper: f64 = f64::INFINITY;
    for (id, params) in [("sawblade", r#"{"grid": 4}"#), ("notch", r#"{"grid": 9}"#)] {
        let c = config(&format!(
            r#"{{"schema_version": 1, "problem": {{"id": "{id}"}}, "field": {{"kind": "perturbed"}},
                "parameters": {params}, "oracle": {{"enabled": true, "refine": 4}}}}"#
        ));
        let out = run(&c, SweepOptions::default()).unwrap();
        for row in &out.sweep.rows {
            rows += 1;
            let b = match &row.outcome {
                Ok(b) => b,
                Err(e) => {
                    failures.push(format!("{id} {:?}: {e}", row.mu));
                    continue;
                }
            };
            let r = b.reference.unwrap();
            let rel = r.slack / r.value;
            let lower_ok = b.lower <= r.value * (1.0 + rel);
            let upper_ok = r.value <= b.upper * (1.0 + rel);
            if !(lower_ok && upper_ok) {
                failures.push(format!("{id} {:?}: {:.4e} / {:.4e} / {:.4e}", row.mu, b.lower, r.value, b.upper));
            }
            worst_lower = worst_lower.max(b.lower / r.value);
            worst_upper = worst_upper.min(b.upper / r.value);
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    let ok = verdict(
        "enclosure under perturbation",
        failures.is_empty() && rows >= ENCLOSURE_MIN_ROWS && secs < ENCLOSURE_SECS,
        format!(
            "{rows} rows (min {ENCLOSURE_MIN_ROWS}), {} violations, max eff_lower {worst_lower:.3}, min eff_upper {worst_upper:.3}, {secs:.1} s (limit {ENCLOSURE_SECS} s)",
            failures.len()
        ),
    );
    for f in &failures {
        println!("  {f}");
    }
    assert!(ok);
}

#[test]
fn bochner_chain_for_a_separable_perturbation() {
    let problem = catalog::heat_square();
    let ProblemKind::Parabolic(st) = &problem.kind else {
        panic!("heat-square is parabolic")
    };
    let domain = problem.fixed_domain().unwrap().clone();
    let certifier = Certifier::new(problem.inner, problem.outer, Resolution::default()).unwrap();
    let prepared = certifier.prepare(domain.clone()).unwrap();
    let time_rule = certifier.time_rule(st.horizon);
    let mut worst_scaling: f64 = 0.0;
    let mut chain_ok = true;
    let mut detail = Vec::new();
    for (mu, rate) in [(0.5, 1.5), (1.0, -2.0), (2.0, 0.7)] {
        let profile = TimeProfile::Exp { rate };
        let spec = FieldSpec::Separable { profile, amplitude: 0.3 };
        let on_inner = build_field(&spec, &problem, &[mu], &domain, None).unwrap();
        // a perturbation reaching past the inner rectangle, so that the
        // outer norm is strictly larger and the chain is not tight
        let wide: Arc<dyn Field> = Arc::new(
            Combination::new().with(1.0, problem.truth(&[mu]).unwrap()).with(
                0.3,
                Arc::new(Separable {
                    profile,
                    spatial: Arc::new(Bump::new(Rect::unit())),
                }),
            ),
        );
        for (name, field) in [("inner bump", &on_inner), ("square bump", &wide)] {
            let mut norms = [0.0; 2];
            for (slot, (region, solver, rule)) in [
                (Region::Inner, &certifier.inner, &prepared.inner_rule),
                (Region::Outer, &certifier.outer, &prepared.outer_rule),
            ]
            .into_iter()
            .enumerate()
            {
                let n = spacetime_dual_norm(st, field.as_ref(), &[mu], region, solver, rule, &time_rule).unwrap();
                let r0 = parabolic_residual_at_time(st, field.as_ref(), &[mu], 0.0, &solver.space, rule, region).unwrap();
                let closed = profile.l2_norm(st.horizon) * solver.dual_norm(&r0.values).unwrap();
                worst_scaling = worst_scaling.max((n.norm - closed).abs() / closed);
                norms[slot] = n.norm;
            }
            if name == "square bump" {
                chain_ok &= norms[0] <= norms[1];
            }
            detail.push(format!("mu={mu} {name}: {:.6} / {:.6}", norms[0], norms[1]));
        }
    }
    let ok = verdict(
        "Bochner chain",
        chain_ok && worst_scaling <= BOCHNER_TOL,
        format!(
            "inner <= outer for the square bump: {chain_ok}; worst separable scaling deviation {worst_scaling:.2e} (tol {BOCHNER_TOL:e}); {}",
            detail.join(", ")
        ),
    );
    assert!(ok);
}

struct SmoothFunctional {
    terms: Vec<[f64; 4]>,
    flux: Vec<[f64; 5]>,
}

impl SmoothFunctional {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut wave = |extra: usize| -> Vec<f64> {
            let mut w = vec![rng.random_range(-1.0..1.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            w.extend((0..extra).map(|_| rng.random_range(0.0..6.3)));
            w
        };
        let terms = (0..3).map(|_| wave(1).try_into().unwrap()).collect();
        let flux = (0..2).map(|_| wave(2).try_into().unwrap()).collect();
        SmoothFunctional { terms, flux }
    }

    fn s(&self, p: [f64; 2]) -> f64 {
        self.terms.iter().map(|t| t[0] * (t[1] * p[0] + t[2] * p[1] + t[3]).sin()).sum()
    }

    fn q(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for t in &self.flux {
            let arg = t[1] * p[0] + t[2] * p[1];
            out[0] += t[0] * (arg + t[3]).cos();
            out[1] += t[0] * (arg + t[4]).sin();
        }
        out
    }
}

#[test]
fn nested_spaces_give_monotone_dual_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let g = gauss_legendre(40).unwrap();
    let rule = tensor_rule(&g, &g, &rect);
    let poly = notched_square(0.6).unwrap();
    let meshes: Vec<_> = (0..=5).map(|l| mesh_polygon(&poly, l).unwrap()).collect();
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..10 {
        let f = SmoothFunctional::random(&mut rng);
        let mut prev = 0.0;
        for n in 2..=16 {
            let solver = RieszSolver::new(rect, (n, n)).unwrap();
            let v = solver.dual_norm(&spectral_functional(&solver, &rule, |p| f.s(p), |p| f.q(p))).unwrap();
            if v < prev - MONOTONE_TOL {
                violations += 1;
                worst = worst.max(prev - v);
            }
            prev = v;
            checks += 1;
        }
        let mut prev = 0.0;
        for mesh in &meshes {
            let h = hat_functional(mesh, |p| f.s(p), |p| f.q(p), 10).unwrap();
            let v = p1_dual_norm(mesh, &h).unwrap();
            if v < prev - MONOTONE_TOL {
                violations += 1;
                worst = worst.max(prev - v);
            }
            prev = v;
            checks += 1;
        }
    }
    let ok = verdict(
        "nested monotonicity",
        violations == 0,
        format!("{violations} violations in {checks} ladder steps (tol {MONOTONE_TOL:e}), worst decrease {worst:.2e}"),
    );
    assert!(ok);
}

fn monomial_over_polygon(poly: &Polygon, a: i32, b: i32) -> f64 {
    // Green: ∫ x^a y^b dA = ∮ x^{a+1} y^b / (a+1) dy
    let g = gauss_legendre(20).unwrap().mapped(0.0, 1.0);
    poly.edges()
        .map(|(p, q)| {
            g.nodes
                .iter()
                .zip(&g.weights)
                .map(|(&s, &w)| {
                    let x = p[0] + s * (q[0] - p[0]);
                    let y = p[1] + s * (q[1] - p[1]);
                    w * x.powi(a + 1) * y.powi(b) * (q[1] - p[1])
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / (a + 1) as f64
}

fn rule_error(rule: &Rule2d, a: i32, b: i32, exact: f64) -> f64 {
    (rule.integrate(|p| p[0].powi(a) * p[1].powi(b)) - exact).abs()
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[test]
fn quadrature_and_gradient_suites() {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=24 {
        let g = gauss_legendre(n).unwrap();
        for k in 0..2 * n as i32 {
            let exact = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
            worst = worst.max((g.integrate(|x| x.powi(k)) - exact).abs());
            cases += 1;
        }
        if n >= 2 {
            let l = gauss_lobatto(n).unwrap();
            for k in 0..(2 * n as i32 - 2) {
                let exact = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
                worst = worst.max((l.integrate(|x| x.powi(k)) - exact).abs());
                cases += 1;
            }
        }
    }
    let rect = Rect::new(-0.5, 1.0, 0.2, 0.9).unwrap();
    for n in 1..=10 {
        let g = gauss_legendre(n).unwrap();
        let rule = tensor_rule(&g, &g, &rect);
        for a in 0..2 * n as i32 {
            for b in 0..2 * n as i32 {
                let mx = (rect.x1.powi(a + 1) - rect.x0.powi(a + 1)) / (a + 1) as f64;
                let my = (rect.y1.powi(b + 1) - rect.y0.powi(b + 1)) / (b + 1) as f64;
                worst = worst.max(rule_error(&rule, a, b, mx * my));
                cases += 1;
            }
        }
    }
    let reference = dualcert::geometry::Triangle::new([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
    let skew = dualcert::geometry::Triangle::new([0.3, -0.2], [1.1, 0.4], [-0.1, 0.8]);
    let skew_poly = Polygon::new(skew.vertices.to_vec()).unwrap();
    for order in 1..=16usize {
        let r = triangle_rule(order, &reference).unwrap();
        let s = triangle_rule(order, &skew).unwrap();
        for a in 0..=order as i32 {
            for b in 0..=(order as i32 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                worst = worst.max(rule_error(&r, a, b, exact));
                worst = worst.max(rule_error(&s, a, b, monomial_over_polygon(&skew_poly, a, b)));
                cases += 2;
            }
        }
    }
    for poly in [sawblade_domain(&SawbladeParams::default()).unwrap(), notched_square(0.9).unwrap()] {
        for order in [2usize, 6, 10] {
            let rule = polygon_rule(&poly, order, 1).unwrap();
            for a in 0..=order as i32 {
                for b in 0..=(order as i32 - a) {
                    let exact = monomial_over_polygon(&poly, a, b);
                    let err = rule_error(&rule, a, b, exact) / exact.abs().max(1.0);
                    worst = worst.max(err);
                    cases += 1;
                }
            }
        }
    }
    let quad_ok = verdict(
        "quadrature exactness",
        worst <= QUADRATURE_TOL,
        format!("{cases} monomial cases, worst error {worst:.2e} (tol {QUADRATURE_TOL:e})"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_grad: f64 = 0.0;
    for net in 0..20 {
        let input_dim = 2 + net % 3;
        let depth = 1 + net % 4;
        let mut width = input_dim;
        let mut layers = Vec::new();
        for l in 0..=depth {
            let out = if l == depth { 1 } else { rng.random_range(3..12) };
            let scale = 1.5 / (width as f64).sqrt();
            layers.push(DenseLayer {
                weights: (0..out).map(|_| (0..width).map(|_| rng.random_range(-scale..scale)).collect()).collect(),
                b: (0..out).map(|_| rng.random_range(-0.5..0.5)).collect(),
            });
            width = out;
        }
        let w = MlpWeights {
            input_dim,
            activation: Activation::Tanh,
            layers,
        };
        w.validate().unwrap();
        for _ in 0..5 {
            let z: Vec<f64> = (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, grad) = w.eval_with_input_grad(&z);
            let h = 1e-5;
            for i in 0..input_dim {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[i] += h;
                zm[i] -= h;
                let fd = (w.eval(&zp) - w.eval(&zm)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
            }
        }
    }
    let grad_ok = verdict(
        "MLP input gradients",
        worst_grad <= GRADIENT_TOL,
        format!("20 tanh networks, worst finite-difference mismatch {worst_grad:.2e} (tol {GRADIENT_TOL:e})"),
    );
    assert!(quad_ok && grad_ok);
}

fn phase_totals(problem: &CatalogProblem, params: &[Vec<f64>]) -> (f64, f64) {
    let certifier = Certifier::new(problem.inner, problem.outer, Resolution::default()).unwrap();
    let prepared = certifier.prepare(problem.fixed_domain().unwrap().clone()).unwrap();
    let field = Arc::new(dualcert::approximant::ZeroField);
    let (mut inner, mut outer) = (
        certifier.setup_inner_s + prepared.inner_rule_s,
        certifier.setup_outer_s + prepared.outer_rule_s,
    );
    for mu in params {
        let b = certify_elliptic(&certifier, problem.spatial(), field.as_ref(), mu, &prepared).unwrap();
        inner += b.timings.inner_s;
        outer += b.timings.outer_s;
    }
    (inner, outer)
}

#[test]
fn inner_phase_is_cheap() {
    let problem = catalog::sawblade(SawbladeParams::default()).unwrap();
    let params = catalog::parameter_grid(&problem.spatial().parameter_box, 4);
    let (inner, outer) = phase_totals(&problem, &params);
    let ratio = inner / outer;
    let ok = verdict(
        "inner phase cost",
        ratio < PHASE_RATIO,
        format!(
            "inner {inner:.4} s, outer {outer:.4} s over {} rows, ratio {ratio:.3} (limit {PHASE_RATIO})",
            params.len()
        ),
    );
    assert!(ok);
}
