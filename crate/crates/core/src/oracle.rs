//! Linear finite elements on a refined triangulation of the domain.
//!
//! Used as an independent reference: Galerkin solutions stand in for the
//! unknown truth, and the P1 Riesz solve cross-checks the spectral dual
//! norms on domains where both apply.

use std::collections::HashMap;

use web_time::Instant;

use crate::approximant::{Field, Sample};
use crate::certify::ReferenceError;
use crate::error::{Error, Result};
use crate::geometry::{refine, triangulate, Point, Polygon, Triangle};
use crate::linalg::{BandedLu, Csr, TripletBuilder};
use crate::quadrature::{triangle_rule, Rule2d};
use crate::residual::EllipticProblem;

const DEDUP_TOL: f64 = 1e-12;
const ASSEMBLY_ORDER: usize = 4;
const ERROR_ORDER: usize = 8;

/// Conforming triangle mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Subregion index per triangle.
    pub tags: Vec<Option<usize>>,
    pub regions: Vec<String>,
}

struct VertexPool {
    cells: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
    points: Vec<Point>,
}

impl VertexPool {
    fn new(scale: f64) -> Self {
        VertexPool {
            cells: HashMap::new(),
            cell: 16.0 * DEDUP_TOL * scale.max(1.0),
            points: Vec::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.cells.get(&(kx + dx, ky + dy)) {
                    for &i in list {
                        let q = self.points[i];
                        if (q[0] - p[0]).hypot(q[1] - p[1]) <= DEDUP_TOL {
                            return i;
                        }
                    }
                }
            }
        }
        let i = self.points.len();
        self.points.push(p);
        self.cells.entry((kx, ky)).or_default().push(i);
        i
    }
}

/// Ear-clip triangulation of `poly` refined `levels` times, with vertices
/// merged within 1e-12.
pub fn mesh_polygon(poly: &Polygon, levels: usize) -> Result<Mesh> {
    let tris = refine(&triangulate(poly)?, levels);
    let bb = poly.bounding_rect();
    let scale = bb.width().max(bb.height());
    let mut pool = VertexPool::new(scale);
    let mut triangles = Vec::with_capacity(tris.len());
    let mut tags = Vec::with_capacity(tris.len());
    for t in &tris.triangles {
        let [a, b, c] = t.vertices.map(|p| pool.insert(p));
        // keep counter-clockwise orientation
        if t.signed_area() > 0.0 {
            triangles.push([a, b, c]);
        } else {
            triangles.push([a, c, b]);
        }
        tags.push(t.tag);
    }
    let vertices = pool.points;
    let tol = DEDUP_TOL * scale.max(1.0) * 10.0;
    let boundary: Vec<bool> = vertices.iter().map(|&p| poly.boundary_distance(p) <= tol).collect();

    // conformity: interior edges are shared by exactly two triangles
    let mut edges: HashMap<(usize, usize), u8> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (i, j) = (t[k], t[(k + 1) % 3]);
            *edges.entry((i.min(j), i.max(j))).or_default() += 1;
        }
    }
    for (&(i, j), &count) in &edges {
        let on_boundary = {
            let m = [0.5 * (vertices[i][0] + vertices[j][0]), 0.5 * (vertices[i][1] + vertices[j][1])];
            boundary[i] && boundary[j] && poly.boundary_distance(m) <= tol
        };
        let fine = match count {
            1 => on_boundary,
            2 => true,
            _ => false,
        };
        if !fine {
            return Err(Error::geometry(format!(
                "mesh is not conforming at edge ({:?}, {:?})",
                vertices[i], vertices[j]
            )));
        }
    }
    let regions = poly.subregions().iter().map(|s| s.name.clone()).collect();
    Ok(Mesh {
        vertices,
        triangles,
        boundary,
        tags,
        regions,
    })
}

/// Interior vertex numbering for the Dirichlet-reduced system.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// `dof[v]` for interior vertices.
    pub dof: Vec<Option<usize>>,
    pub n: usize,
}

impl Mesh {
    pub fn dofs(&self) -> DofMap {
        let mut n = 0;
        let dof = self
            .boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    n += 1;
                    Some(n - 1)
                }
            })
            .collect();
        DofMap { dof, n }
    }

    pub fn triangle(&self, k: usize) -> Triangle {
        let [a, b, c] = self.triangles[k];
        Triangle {
            vertices: [self.vertices[a], self.vertices[b], self.vertices[c]],
            tag: self.tags[k],
        }
    }

    pub fn region(&self, k: usize) -> Option<&str> {
        self.tags[k].and_then(|t| self.regions.get(t)).map(String::as_str)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.triangle(k).area()).sum()
    }
}

/// Barycentric gradients of the three hat functions on a triangle.
fn hat_gradients(t: &Triangle) -> [[f64; 2]; 3] {
    let [a, b, c] = t.vertices;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ]
}

fn hat_values(t: &Triangle, g: &[[f64; 2]; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = t.vertices;
    let l = |k: usize, v: Point| g[k][0] * (p[0] - v[0]) + g[k][1] * (p[1] - v[1]);
    // λ_k vanishes on the opposite edge, which passes through the next vertex
    [l(0, b), l(1, c), l(2, a)]
}

fn element_rule(t: &Triangle, order: usize) -> Result<Rule2d> {
    triangle_rule(order, t)
}

/// Galerkin system of the elliptic form on interior vertices.
pub fn assemble_system(problem: &EllipticProblem, mu: &[f64], mesh: &Mesh) -> Result<(Csr, Vec<f64>, DofMap)> {
    problem.check_parameter(mu)?;
    let dofs = mesh.dofs();
    if dofs.n == 0 {
        return Err(Error::geometry("mesh has no interior vertices"));
    }
    let coeffs = problem.coefficients.as_ref();
    let mut sym = TripletBuilder::new(dofs.n);
    let mut rhs = vec![0.0; dofs.n];
    for k in 0..mesh.triangles.len() {
        let t = mesh.triangle(k);
        let g = hat_gradients(&t);
        let rule = element_rule(&t, ASSEMBLY_ORDER)?;
        let region = mesh.region(k);
        let mut kd = [[0.0; 3]; 3];
        let mut ke = [[0.0; 3]; 3];
        let mut fe = [0.0; 3];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let a = coeffs.diffusion(p, region, mu);
            let b = coeffs.convection(p, mu);
            let c = coeffs.reaction(p, mu);
            let s = coeffs.source(0.0, p, mu);
            let q = coeffs.source_flux(0.0, p, mu);
            let phi = hat_values(&t, &g, p);
            for i in 0..3 {
                for j in i..3 {
                    let agj = [a[0][0] * g[j][0] + a[0][1] * g[j][1], a[1][0] * g[j][0] + a[1][1] * g[j][1]];
                    kd[i][j] += w * (agj[0] * g[i][0] + agj[1] * g[i][1] + c * phi[j] * phi[i]);
                }
                for j in 0..3 {
                    ke[i][j] += w * (b[0] * g[j][0] + b[1] * g[j][1]) * phi[i];
                }
                fe[i] += w * (s * phi[i] + q[0] * g[i][0] + q[1] * g[i][1]);
            }
        }
        // the symmetric part is mirrored so that the matrix is symmetric
        // to the last bit when b = 0
        for i in 0..3 {
            for j in 0..3 {
                ke[i][j] += if i <= j { kd[i][j] } else { kd[j][i] };
            }
        }
        let v = mesh.triangles[k];
        for i in 0..3 {
            let Some(di) = dofs.dof[v[i]] else { continue };
            rhs[di] += fe[i];
            for j in 0..3 {
                if let Some(dj) = dofs.dof[v[j]] {
                    sym.add(di, dj, ke[i][j]);
                }
            }
        }
    }
    Ok((sym.build(), rhs, dofs))
}

/// Nodal values (boundary zero) of the P1 Galerkin solution.
pub fn p1_solve(problem: &EllipticProblem, mu: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    let (k, f, dofs) = assemble_system(problem, mu, mesh)?;
    let lu = BandedLu::factor(&k, "P1 Galerkin system")?;
    let x = lu.solve(&f);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("P1 solution is not finite".into()));
    }
    Ok(dofs.dof.iter().map(|d| d.map_or(0.0, |i| x[i])).collect())
}

/// P1 stiffness matrix of the gradient inner product.
pub fn stiffness(mesh: &Mesh) -> (Csr, DofMap) {
    let dofs = mesh.dofs();
    let mut b = TripletBuilder::new(dofs.n);
    for k in 0..mesh.triangles.len() {
        let t = mesh.triangle(k);
        let g = hat_gradients(&t);
        let area = t.area();
        let v = mesh.triangles[k];
        let mut ke = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                ke[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                ke[j][i] = ke[i][j];
            }
        }
        for i in 0..3 {
            let Some(di) = dofs.dof[v[i]] else { continue };
            for j in 0..3 {
                if let Some(dj) = dofs.dof[v[j]] {
                    b.add(di, dj, ke[i][j]);
                }
            }
        }
    }
    (b.build(), dofs)
}

/// `√(Fᵀ K⁻¹ F)` for a functional given on the interior vertices.
pub fn p1_dual_norm(mesh: &Mesh, functional: &[f64]) -> Result<f64> {
    let (k, dofs) = stiffness(mesh);
    if functional.len() != dofs.n {
        return Err(Error::domain(format!(
            "functional has {} entries, mesh has {} interior vertices",
            functional.len(),
            dofs.n
        )));
    }
    let lu = BandedLu::factor(&k, "P1 stiffness")?;
    let g = lu.solve(functional);
    let sq: f64 = functional.iter().zip(&g).map(|(a, b)| a * b).sum();
    if !sq.is_finite() {
        return Err(Error::Numerical("P1 dual norm is not finite".into()));
    }
    Ok(sq.max(0.0).sqrt())
}

/// `∫ s φ_i + q·∇φ_i` on the interior hats.
pub fn hat_functional(mesh: &Mesh, s: impl Fn(Point) -> f64, q: impl Fn(Point) -> [f64; 2], order: usize) -> Result<Vec<f64>> {
    let dofs = mesh.dofs();
    let mut out = vec![0.0; dofs.n];
    for k in 0..mesh.triangles.len() {
        let t = mesh.triangle(k);
        let g = hat_gradients(&t);
        let rule = element_rule(&t, order)?;
        let v = mesh.triangles[k];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let (sv, qv) = (s(p), q(p));
            let phi = hat_values(&t, &g, p);
            for i in 0..3 {
                if let Some(d) = dofs.dof[v[i]] {
                    out[d] += w * (sv * phi[i] + qv[0] * g[i][0] + qv[1] * g[i][1]);
                }
            }
        }
    }
    Ok(out)
}

/// Elliptic residual of `field` tested against the interior hats.
pub fn residual_functional(problem: &EllipticProblem, field: &dyn Field, mu: &[f64], mesh: &Mesh, order: usize) -> Result<Vec<f64>> {
    problem.check_parameter(mu)?;
    let coeffs = problem.coefficients.as_ref();
    let dofs = mesh.dofs();
    let mut out = vec![0.0; dofs.n];
    for k in 0..mesh.triangles.len() {
        let t = mesh.triangle(k);
        let g = hat_gradients(&t);
        let rule = element_rule(&t, order)?;
        let region = mesh.region(k);
        let v = mesh.triangles[k];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let u = field.sample(0.0, p, mu);
            let a = coeffs.diffusion(p, region, mu);
            let b = coeffs.convection(p, mu);
            let src = coeffs.source(0.0, p, mu);
            let qs = coeffs.source_flux(0.0, p, mu);
            let scalar = src - (b[0] * u.grad[0] + b[1] * u.grad[1]) - coeffs.reaction(p, mu) * u.value;
            let flux = [
                a[0][0] * u.grad[0] + a[0][1] * u.grad[1] - qs[0],
                a[1][0] * u.grad[0] + a[1][1] * u.grad[1] - qs[1],
            ];
            let phi = hat_values(&t, &g, p);
            for i in 0..3 {
                if let Some(d) = dofs.dof[v[i]] {
                    out[d] += w * (scalar * phi[i] - flux[0] * g[i][0] - flux[1] * g[i][1]);
                }
            }
        }
    }
    Ok(out)
}

/// `|field − u_h|_{H¹(Ω)}` with `u_h` given by nodal values.
pub fn h1_error(field: &dyn Field, nodal: &[f64], mesh: &Mesh, mu: &[f64]) -> Result<f64> {
    if nodal.len() != mesh.vertices.len() {
        return Err(Error::domain("nodal vector does not match the mesh"));
    }
    let mut sq = 0.0;
    for k in 0..mesh.triangles.len() {
        let t = mesh.triangle(k);
        let g = hat_gradients(&t);
        let v = mesh.triangles[k];
        let gh = [
            nodal[v[0]] * g[0][0] + nodal[v[1]] * g[1][0] + nodal[v[2]] * g[2][0],
            nodal[v[0]] * g[0][1] + nodal[v[1]] * g[1][1] + nodal[v[2]] * g[2][1],
        ];
        let rule = element_rule(&t, ERROR_ORDER)?;
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let s = field.sample(0.0, p, mu);
            let (ex, ey) = (s.grad[0] - gh[0], s.grad[1] - gh[1]);
            sq += w * (ex * ex + ey * ey);
        }
    }
    if !sq.is_finite() {
        return Err(Error::Numerical("H1 error is not finite".into()));
    }
    Ok(sq.sqrt())
}

/// Nodal interpolant of a field.
pub fn interpolate(field: &dyn Field, mesh: &Mesh, mu: &[f64]) -> Vec<f64> {
    mesh.vertices
        .iter()
        .zip(&mesh.boundary)
        .map(|(&p, &b)| if b { 0.0 } else { field.value(0.0, p, mu) })
        .collect()
}

/// Piecewise linear field on a mesh; zero outside it.
#[derive(Clone, Debug)]
pub struct P1Field {
    mesh: Mesh,
    nodal: Vec<f64>,
    buckets: Vec<Vec<usize>>,
    grid: (usize, usize),
    origin: Point,
    cell: [f64; 2],
}

impl P1Field {
    pub fn new(mesh: Mesh, nodal: Vec<f64>) -> Result<Self> {
        if nodal.len() != mesh.vertices.len() {
            return Err(Error::domain("nodal vector does not match the mesh"));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let side = (mesh.triangles.len() as f64).sqrt().ceil().max(1.0) as usize;
        let grid = (side, side);
        let cell = [(hi[0] - lo[0]) / side as f64, (hi[1] - lo[1]) / side as f64];
        let mut f = P1Field {
            buckets: vec![Vec::new(); side * side],
            mesh,
            nodal,
            grid,
            origin: lo,
            cell,
        };
        for k in 0..f.mesh.triangles.len() {
            let t = f.mesh.triangle(k);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in t.vertices {
                for d in 0..2 {
                    a[d] = a[d].min(v[d]);
                    b[d] = b[d].max(v[d]);
                }
            }
            let (i0, j0) = f.cell_of(a);
            let (i1, j1) = f.cell_of(b);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    f.buckets[i * grid.1 + j].push(k);
                }
            }
        }
        Ok(f)
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let c = |d: usize, n: usize| {
            let r = ((p[d] - self.origin[d]) / self.cell[d]).floor();
            (r.max(0.0) as usize).min(n - 1)
        };
        (c(0, self.grid.0), c(1, self.grid.1))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }
}

impl Field for P1Field {
    fn sample(&self, _t: f64, x: Point, _mu: &[f64]) -> Sample {
        let (i, j) = self.cell_of(x);
        for &k in &self.buckets[i * self.grid.1 + j] {
            let t = self.mesh.triangle(k);
            if t.contains(x) {
                let g = hat_gradients(&t);
                let phi = hat_values(&t, &g, x);
                let v = self.mesh.triangles[k];
                let mut s = Sample::default();
                for m in 0..3 {
                    let u = self.nodal[v[m]];
                    s.value += u * phi[m];
                    s.grad[0] += u * g[m][0];
                    s.grad[1] += u * g[m][1];
                }
                return s;
            }
        }
        Sample::default()
    }
}

/// Estimated `|u − field|_{H¹}` from Galerkin solutions on two successive
/// refinements. The slack is three times their difference.
pub fn reference_error(
    problem: &EllipticProblem,
    field: &dyn Field,
    mu: &[f64],
    domain: &Polygon,
    levels: usize,
) -> Result<(ReferenceError, f64)> {
    if levels == 0 {
        return Err(Error::config("oracle refinement must be at least 1"));
    }
    let clock = Instant::now();
    let mut errs = [0.0; 2];
    for (slot, l) in [levels - 1, levels].into_iter().enumerate() {
        let mesh = mesh_polygon(domain, l)?;
        let u = p1_solve(problem, mu, &mesh)?;
        errs[slot] = h1_error(field, &u, &mesh, mu)?;
    }
    Ok((
        ReferenceError {
            value: errs[1],
            slack: 3.0 * (errs[1] - errs[0]).abs(),
        },
        clock.elapsed().as_secs_f64(),
    ))
}
