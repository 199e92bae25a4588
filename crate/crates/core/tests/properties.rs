use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use dualcert::approximant::{Activation, Bump, DenseLayer, FnField, MlpWeights, Sample};
use dualcert::certify::{elliptic_constants, Resolution};
use dualcert::geometry::{notched_square, sawblade_domain, triangulate, Rect, SawbladeParams};
use dualcert::oracle::{h1_error, interpolate, mesh_polygon, P1Field};
use dualcert::residual::{ConstantCoefficients, EllipticProblem};
use dualcert::{certify_elliptic, Certifier, RieszSolver};
use proptest::prelude::*;

fn laplace() -> EllipticProblem {
    let c = ConstantCoefficients {
        diffusion: [[1.0, 0.0], [0.0, 1.0]],
        region_diffusion: Default::default(),
        convection: [0.0, 0.0],
        reaction: 0.0,
        source: 0.0,
    };
    EllipticProblem::new("laplace", Arc::new(c), vec![])
}

fn small_resolution() -> Resolution {
    Resolution {
        inner_order: (6, 6),
        outer_order: (6, 6),
        inner_points: 12,
        polygon_order: 10,
        polygon_refine: 0,
        time_points: 4,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_norm_is_a_norm(
        w in 0.2f64..3.0, h in 0.2f64..3.0, nx in 1usize..7, ny in 1usize..7,
        seed in proptest::collection::vec(-1.0f64..1.0, 72), a in -5.0f64..5.0,
    ) {
        let solver = RieszSolver::new(Rect::new(-0.3, w - 0.3, 0.1, h + 0.1).unwrap(), (nx, ny)).unwrap();
        let n = nx * ny;
        let f = &seed[..n];
        let g = &seed[36..36 + n];
        let sum: Vec<f64> = f.iter().zip(g).map(|(x, y)| x + y).collect();
        let scaled: Vec<f64> = f.iter().map(|x| a * x).collect();
        let (nf, ng) = (solver.dual_norm(f).unwrap(), solver.dual_norm(g).unwrap());
        prop_assert!(nf >= 0.0);
        prop_assert!(solver.dual_norm(&sum).unwrap() <= nf + ng + 1e-12 * (nf + ng));
        prop_assert!((solver.dual_norm(&scaled).unwrap() - a.abs() * nf).abs() <= 1e-12 * (1.0 + nf * a.abs()));
    }

    #[test]
    fn bounds_scale_with_the_field(scale in -4.0f64..4.0, mu in 0.0f64..FRAC_PI_2) {
        let domain = notched_square(mu).unwrap();
        let inner = Rect::new(0.0, 1.0, 0.25, 1.0).unwrap();
        let certifier = Certifier::new(inner, Rect::unit(), small_resolution()).unwrap();
        let prepared = certifier.prepare(domain).unwrap();
        let bump = Bump::new(Rect::new(0.1, 0.9, 0.3, 0.9).unwrap());
        let unit = certify_elliptic(&certifier, &laplace(), &bump, &[], &prepared).unwrap();
        let field = FnField::new(move |_, p, _| {
            let (v, g) = bump.eval(p);
            Sample { value: scale * v, grad: [scale * g[0], scale * g[1]], dt: 0.0 }
        });
        let b = certify_elliptic(&certifier, &laplace(), &field, &[], &prepared).unwrap();
        prop_assert!((b.lower - scale.abs() * unit.lower).abs() <= 1e-12 * (1.0 + unit.lower));
        prop_assert!((b.upper - scale.abs() * unit.upper).abs() <= 1e-12 * (1.0 + unit.upper));
    }

    #[test]
    fn stability_constants_are_ordered(
        a0 in 1e-3f64..5.0, spread in 0.0f64..5.0, nb in 0.0f64..20.0, nc in 0.0f64..5.0, s in 0.01f64..2.0,
    ) {
        let k = elliptic_constants(a0, a0 + spread, nb, nc, s).unwrap();
        prop_assert!(k.lower > 0.0 && k.lower <= k.upper);
        prop_assert!((k.upper - 1.0 / a0).abs() <= 1e-15 / a0);
        let stronger = elliptic_constants(a0, a0 + spread, nb + 1.0, nc, s).unwrap();
        prop_assert!(stronger.lower < k.lower);
    }

    #[test]
    fn triangulation_matches_the_polygon(mu in 0.0f64..FRAC_PI_2, pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 40)) {
        let poly = notched_square(mu).unwrap();
        let tris = triangulate(&poly).unwrap();
        prop_assert!((tris.total_area() - poly.area()).abs() <= 1e-13);
        for (x, y) in pts {
            let p = [x, y];
            if poly.boundary_distance(p) < 1e-9 {
                continue;
            }
            prop_assert_eq!(tris.contains(p), poly.contains(p));
        }
    }

    #[test]
    fn sawblade_area_formula(n in 1usize..12, h in 0.1f64..2.0, t in 0.05f64..2.0, l in 0.5f64..8.0) {
        let params = SawbladeParams { n_teeth: n, blade_height: h, tooth_height: t, length: l, tooth_base: None };
        let poly = sawblade_domain(&params).unwrap();
        let expected = l * h + 0.5 * l * t;
        prop_assert!((poly.area() - expected).abs() <= 1e-12 * expected);
        let rect = poly.bounding_rect();
        prop_assert!((rect.height() - (h + t)).abs() <= 1e-12 && (rect.width() - l).abs() <= 1e-12);
    }

    #[test]
    fn p1_interpolation_reproduces_p1_fields(mu in 0.0f64..FRAC_PI_2, values in proptest::collection::vec(-2.0f64..2.0, 64)) {
        let mesh = mesh_polygon(&notched_square(mu).unwrap(), 1).unwrap();
        let nodal: Vec<f64> = mesh
            .boundary
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { 0.0 } else { values[i % values.len()] })
            .collect();
        let field = P1Field::new(mesh.clone(), nodal.clone()).unwrap();
        let back = interpolate(&field, &mesh, &[]);
        for (x, y) in back.iter().zip(&nodal) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let e = h1_error(&field, &nodal, &mesh, &[]).unwrap();
        prop_assert!(e <= 1e-10, "{e:e}");
    }

    #[test]
    fn mlp_weights_round_trip(ws in proptest::collection::vec(-2.0f64..2.0, 21), z in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)) {
        let w = MlpWeights {
            input_dim: 3,
            activation: Activation::Tanh,
            layers: vec![
                DenseLayer { weights: ws[..12].chunks(3).map(<[f64]>::to_vec).collect(), b: ws[12..16].to_vec() },
                DenseLayer { weights: vec![ws[16..20].to_vec()], b: vec![ws[20]] },
            ],
        };
        let text = serde_json::to_string(&w).unwrap();
        let back = MlpWeights::from_json(&text).unwrap();
        let z = [z.0, z.1, z.2];
        prop_assert_eq!(back.eval(&z), w.eval(&z));
    }
}
