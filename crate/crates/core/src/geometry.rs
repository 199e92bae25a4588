//! Polygonal domains, axis-aligned rectangles and the embedding triple
//! `inner ⊂ domain ⊂ outer` used by the bound computations.
//!
//! Polygons are stored counter-clockwise. A polygon may carry named
//! subregions that partition it (material regions for piecewise
//! coefficients); triangulation then runs per subregion so that every
//! triangle knows which region it belongs to.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Distance below which a point counts as lying on an edge.
pub const EDGE_TOL: f64 = 1e-12;

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Signed shoelace area of a closed ring (positive for counter-clockwise).
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Axis-aligned open rectangle `(x0, x1) × (y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(Error::geometry("rectangle with non-finite coordinates"));
        }
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::geometry(format!(
                "rectangle ({x0}, {x1}) x ({y0}, {y1}) has non-positive extent"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ]
    }

    /// Corners plus `per_edge` equispaced interior samples on each edge.
    pub fn boundary_samples(&self, per_edge: usize) -> Vec<Point> {
        let c = self.corners();
        let mut out = c.to_vec();
        for e in 0..4 {
            let a = c[e];
            let b = c[(e + 1) % 4];
            for k in 1..=per_edge {
                let s = k as f64 / (per_edge + 1) as f64;
                out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        out
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon {
            vertices: self.corners().to_vec(),
            subregions: Vec::new(),
        }
    }
}

/// Named piece of a polygon partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Subregion {
    pub name: String,
    pub vertices: Vec<Point>,
}

/// Simple polygon with optional subregion partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
    subregions: Vec<Subregion>,
}

/// On-disk polygon layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolygonFile {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub subregions: BTreeMap<String, Vec<[f64; 2]>>,
}

fn bbox_scale(ring: &[Point]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in ring {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(f64::MIN_POSITIVE)
}

/// Checks a ring for the defects that make it unusable and returns it in
/// counter-clockwise order.
fn validate_ring(ring: &[Point], what: &str) -> Result<Vec<Point>> {
    let n = ring.len();
    if n < 3 {
        return Err(Error::geometry(format!("{what}: needs at least 3 vertices, got {n}")));
    }
    if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::geometry(format!("{what}: non-finite vertex")));
    }
    let scale = bbox_scale(ring);
    for i in 0..n {
        if dist(ring[i], ring[(i + 1) % n]) <= EDGE_TOL * scale.max(1.0) {
            return Err(Error::geometry(format!(
                "{what}: repeated consecutive vertex at index {i}"
            )));
        }
    }
    let area = signed_area(ring);
    if area.abs() <= 1e-14 * scale * scale {
        return Err(Error::geometry(format!("{what}: zero area")));
    }
    if !is_simple(ring) {
        return Err(Error::geometry(format!("{what}: polygon is not simple")));
    }
    let mut v = ring.to_vec();
    if area < 0.0 {
        v.reverse();
    }
    Ok(v)
}

fn on_segment(p: Point, a: Point, b: Point, tol: f64) -> bool {
    segment_distance(p, a, b) <= tol
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point, tol: f64) -> bool {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
    {
        return true;
    }
    let lt = tol.sqrt();
    on_segment(c, a, b, lt) || on_segment(d, a, b, lt) || on_segment(a, c, d, lt) || on_segment(b, c, d, lt)
}

/// True when no two non-adjacent edges touch and no vertex folds back
/// onto its neighbouring edge.
pub fn is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    let scale = bbox_scale(ring);
    let tol = 1e-24 * scale * scale;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let c = ring[(i + 2) % n];
        // spike: b -> c doubles back along a -> b
        if cross(a, b, c).abs() <= 1e-14 * scale * scale {
            let ab = sub(b, a);
            let bc = sub(c, b);
            if ab[0] * bc[0] + ab[1] * bc[1] < 0.0 {
                return false;
            }
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let c = ring[j];
            let d = ring[(j + 1) % n];
            if segments_touch(a, b, c, d, tol) {
                return false;
            }
        }
    }
    true
}

/// Even-odd containment on a raw ring. Points within [`EDGE_TOL`] of an
/// edge count as inside.
pub fn point_in_ring(ring: &[Point], p: Point) -> Result<bool> {
    let n = ring.len();
    if n < 3 {
        return Err(Error::geometry("ring with fewer than 3 vertices"));
    }
    for i in 0..n {
        if ring[i] == ring[(i + 1) % n] {
            return Err(Error::geometry(format!("repeated consecutive vertex at index {i}")));
        }
    }
    Ok(ring_contains(ring, p))
}

fn ring_contains(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if segment_distance(p, a, b) <= EDGE_TOL {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        Ok(Polygon {
            vertices: validate_ring(&vertices, "polygon")?,
            subregions: Vec::new(),
        })
    }

    /// Builds a polygon whose subregions must partition it.
    pub fn with_subregions(vertices: Vec<Point>, subregions: Vec<(String, Vec<Point>)>) -> Result<Self> {
        let mut poly = Polygon::new(vertices)?;
        let area = poly.area();
        let mut subs = Vec::with_capacity(subregions.len());
        for (name, ring) in subregions {
            let ring = validate_ring(&ring, &format!("subregion '{name}'"))?;
            if let Some(p) = ring.iter().find(|p| !poly.contains(**p)) {
                return Err(Error::geometry(format!(
                    "subregion '{name}' vertex ({}, {}) lies outside the polygon",
                    p[0], p[1]
                )));
            }
            subs.push(Subregion { name, vertices: ring });
        }
        if !subs.is_empty() {
            let total: f64 = subs.iter().map(|s| signed_area(&s.vertices)).sum();
            if ((total - area) / area).abs() > 1e-10 {
                return Err(Error::geometry(format!(
                    "subregions cover area {total}, polygon area is {area}"
                )));
            }
            // pairwise interior-disjointness probed at triangle centroids
            for (i, s) in subs.iter().enumerate() {
                for tri in ear_clip(&s.vertices)? {
                    let c = [
                        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
                        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
                    ];
                    for (j, o) in subs.iter().enumerate() {
                        if i != j && ring_contains(&o.vertices, c) {
                            return Err(Error::geometry(format!(
                                "subregions '{}' and '{}' overlap",
                                s.name, o.name
                            )));
                        }
                    }
                }
            }
        }
        poly.subregions = subs;
        Ok(poly)
    }

    pub fn from_file_data(data: PolygonFile) -> Result<Self> {
        let subs = data.subregions.into_iter().collect();
        Polygon::with_subregions(data.vertices, subs)
    }

    pub fn to_file_data(&self) -> PolygonFile {
        PolygonFile {
            vertices: self.vertices.clone(),
            subregions: self
                .subregions
                .iter()
                .map(|s| (s.name.clone(), s.vertices.clone()))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: PolygonFile =
            serde_json::from_str(text).map_err(|e| Error::config(format!("polygon file: {e}")))?;
        Polygon::from_file_data(data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Polygon::from_json(&text)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn subregions(&self) -> &[Subregion] {
        &self.subregions
    }

    pub fn subregion_name(&self, tag: Option<usize>) -> Option<&str> {
        tag.and_then(|t| self.subregions.get(t)).map(|s| s.name.as_str())
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bounding_rect(&self) -> Rect {
        let mut r = Rect {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in &self.vertices {
            r.x0 = r.x0.min(p[0]);
            r.x1 = r.x1.max(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.y1 = r.y1.max(p[1]);
        }
        r
    }

    /// Closed containment (edge points count as inside).
    pub fn contains(&self, p: Point) -> bool {
        ring_contains(&self.vertices, p)
    }

    /// Index of the first subregion containing `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        self.subregions.iter().position(|s| ring_contains(&s.vertices, p))
    }

    /// Distance from `p` to the outer boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Free-function form of [`Polygon::contains`].
pub fn point_in_polygon(poly: &Polygon, p: Point) -> bool {
    poly.contains(p)
}

/// Triangle with the index of the subregion it was cut from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub vertices: [Point; 3],
    pub tag: Option<usize>,
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Self {
        Triangle { vertices: [a, b, c], tag: None }
    }

    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * cross(a, b, c)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        let [a, b, c] = self.vertices;
        let s = self.signed_area().signum();
        let tol = -1e-14 * self.area().max(1e-300);
        s * cross(a, b, p) >= tol && s * cross(b, c, p) >= tol && s * cross(c, a, p) >= tol
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triangulation {
    pub triangles: Vec<Triangle>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.triangles.iter().any(|t| t.contains(p))
    }
}

fn min_angle_quality(a: Point, b: Point, c: Point) -> f64 {
    // 4√3·area / Σ edge² is 1 for equilateral, → 0 for slivers
    let l2 = |u: Point, v: Point| {
        let d = sub(u, v);
        d[0] * d[0] + d[1] * d[1]
    };
    let s = l2(a, b) + l2(b, c) + l2(c, a);
    2.0 * 3f64.sqrt() * cross(a, b, c) / s
}

/// Ear clipping on a counter-clockwise simple ring. Collinear vertices are
/// kept (never clipped as degenerate ears), so edges shared with
/// neighbouring regions stay conforming. Among the valid ears the best
/// shaped one is clipped first.
pub fn ear_clip(ring: &[Point]) -> Result<Vec<[Point; 3]>> {
    let scale = bbox_scale(ring);
    let eps = 1e-14 * scale * scale;
    let mut idx: Vec<usize> = (0..ring.len()).collect();
    let mut out = Vec::with_capacity(ring.len().saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let ip = idx[(k + m - 1) % m];
            let ic = idx[k];
            let inx = idx[(k + 1) % m];
            let (a, b, c) = (ring[ip], ring[ic], ring[inx]);
            if cross(a, b, c) <= eps {
                continue;
            }
            let tri = Triangle::new(a, b, c);
            let blocked = idx.iter().any(|&q| {
                q != ip && q != ic && q != inx && {
                    let p = ring[q];
                    p != a && p != b && p != c && tri.contains(p)
                }
            });
            if blocked {
                continue;
            }
            let q = min_angle_quality(a, b, c);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let Some((k, _)) = best else {
            return Err(Error::geometry("ear clipping found no ear; polygon is not simple"));
        };
        let m = idx.len();
        out.push([ring[idx[(k + m - 1) % m]], ring[idx[k]], ring[idx[(k + 1) % m]]]);
        idx.remove(k);
    }
    let (a, b, c) = (ring[idx[0]], ring[idx[1]], ring[idx[2]]);
    if cross(a, b, c) <= eps {
        return Err(Error::geometry("ear clipping left a degenerate triangle"));
    }
    out.push([a, b, c]);
    Ok(out)
}

/// Triangulates the polygon, or each subregion when a partition exists.
pub fn triangulate(poly: &Polygon) -> Result<Triangulation> {
    let mut triangles = Vec::new();
    if poly.subregions.is_empty() {
        for [a, b, c] in ear_clip(&poly.vertices)? {
            triangles.push(Triangle { vertices: [a, b, c], tag: None });
        }
    } else {
        for (i, s) in poly.subregions.iter().enumerate() {
            for [a, b, c] in ear_clip(&s.vertices)? {
                triangles.push(Triangle { vertices: [a, b, c], tag: Some(i) });
            }
        }
    }
    Ok(Triangulation { triangles })
}

/// Uniform midpoint refinement: every level splits each triangle into 4.
pub fn refine(tris: &Triangulation, levels: usize) -> Triangulation {
    let mut cur = tris.triangles.clone();
    for _ in 0..levels {
        let mut next = Vec::with_capacity(cur.len() * 4);
        for t in &cur {
            let [a, b, c] = t.vertices;
            let mid = |u: Point, v: Point| [0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])];
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            for v in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
                next.push(Triangle { vertices: v, tag: t.tag });
            }
        }
        cur = next;
    }
    Triangulation { triangles: cur }
}

/// Saw-blade generator parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SawbladeParams {
    pub n_teeth: usize,
    pub blade_height: f64,
    pub tooth_height: f64,
    pub length: f64,
    /// Base width of each tooth; `None` tiles the top edge.
    pub tooth_base: Option<f64>,
}

impl Default for SawbladeParams {
    fn default() -> Self {
        SawbladeParams {
            n_teeth: 8,
            blade_height: 0.5,
            tooth_height: 0.5,
            length: 4.0,
            tooth_base: None,
        }
    }
}

pub const BLADE: &str = "blade";

/// Rectangle `(0, L) × (0, h)` (region "blade") with `n` triangular teeth
/// (regions "tooth00", "tooth01", ...) of height `t` centred in equal
/// slots along the top edge.
pub fn sawblade_domain(params: &SawbladeParams) -> Result<Polygon> {
    let SawbladeParams {
        n_teeth: n,
        blade_height: h,
        tooth_height: t,
        length: l,
        tooth_base,
    } = *params;
    if n == 0 {
        return Err(Error::geometry("saw blade needs at least one tooth"));
    }
    if !(h > 0.0 && t > 0.0 && l > 0.0) {
        return Err(Error::geometry("saw blade dimensions must be positive"));
    }
    let slot = l / n as f64;
    let base = tooth_base.unwrap_or(slot);
    if !(base > 0.0) || n as f64 * base > l * (1.0 + 1e-12) {
        return Err(Error::geometry(format!(
            "{n} teeth of base {base} do not fit on a blade of length {l}"
        )));
    }
    let mut top: Vec<Point> = Vec::new(); // right to left along y = h
    let mut teeth = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let c = (k as f64 + 0.5) * slot;
        let (xl, xr) = if base >= slot {
            // tiled: neighbouring teeth share base corners bit-for-bit
            let xr = if k == n - 1 { l } else { (k + 1) as f64 * slot };
            (k as f64 * slot, xr)
        } else {
            (c - 0.5 * base, c + 0.5 * base)
        };
        top.push([xr, h]);
        top.push([c, h + t]);
        top.push([xl, h]);
        teeth.push((format!("tooth{k:02}"), vec![[xl, h], [xr, h], [c, h + t]]));
    }
    teeth.reverse();

    let mut outer = vec![[0.0, 0.0], [l, 0.0], [l, h]];
    outer.extend(top.iter().copied());
    outer.push([0.0, h]);
    dedup_ring(&mut outer);

    let mut blade = vec![[0.0, 0.0], [l, 0.0], [l, h]];
    blade.extend(top.iter().copied().filter(|p| p[1] == h));
    blade.push([0.0, h]);
    dedup_ring(&mut blade);

    let mut subs = vec![(BLADE.to_string(), blade)];
    subs.extend(teeth);
    Polygon::with_subregions(outer, subs)
}

fn dedup_ring(ring: &mut Vec<Point>) {
    ring.dedup_by(|a, b| dist(*a, *b) <= 1e-14);
    while ring.len() > 1 && dist(ring[0], ring[ring.len() - 1]) <= 1e-14 {
        ring.pop();
    }
}

/// Apex of the recess cut into the unit square by [`notched_square`].
pub const NOTCH_APEX: Point = [0.5, 0.25];

/// Unit square with a symmetric triangular recess on the bottom edge.
/// The apex sits at [`NOTCH_APEX`]; `mu` is the opening angle at the apex.
pub fn notched_square(mu: f64) -> Result<Polygon> {
    if !(0.0..=PI / 2.0 + 1e-14).contains(&mu) {
        return Err(Error::domain(format!("notch angle {mu} outside [0, pi/2]")));
    }
    if mu == 0.0 {
        return Polygon::new(Rect::unit().corners().to_vec());
    }
    let depth = NOTCH_APEX[1];
    let half = depth * (0.5 * mu).tan();
    let cx = NOTCH_APEX[0];
    Polygon::new(vec![
        [0.0, 0.0],
        [cx - half, 0.0],
        NOTCH_APEX,
        [cx + half, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
    ])
}

/// Sharp Friedrichs constant of a rectangle with sides `a`, `b`:
/// `1 / (π √(1/a² + 1/b²))`. Upper bound for every subdomain.
pub fn poincare_bound(outer: &Rect) -> f64 {
    let (a, b) = (outer.width(), outer.height());
    1.0 / (PI * (1.0 / (a * a) + 1.0 / (b * b)).sqrt())
}

/// Embedding triple `inner ⊂ domain ⊂ outer`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub inner: Rect,
    pub domain: Polygon,
    pub outer: Rect,
}

impl Embedding {
    pub fn new(inner: Rect, domain: Polygon, outer: Rect) -> Result<Self> {
        for p in inner.boundary_samples(7) {
            if !domain.contains(p) {
                return Err(Error::geometry(format!(
                    "inner rectangle point ({}, {}) lies outside the domain",
                    p[0], p[1]
                )));
            }
        }
        let tol = EDGE_TOL * outer.width().max(outer.height());
        for p in domain.vertices() {
            let inside_inner = p[0] > inner.x0 + tol
                && p[0] < inner.x1 - tol
                && p[1] > inner.y0 + tol
                && p[1] < inner.y1 - tol;
            if inside_inner {
                return Err(Error::geometry(format!(
                    "domain vertex ({}, {}) pokes into the inner rectangle",
                    p[0], p[1]
                )));
            }
            if p[0] < outer.x0 - tol || p[0] > outer.x1 + tol || p[1] < outer.y0 - tol || p[1] > outer.y1 + tol {
                return Err(Error::geometry(format!(
                    "domain vertex ({}, {}) lies outside the outer rectangle",
                    p[0], p[1]
                )));
            }
        }
        Ok(Embedding { inner, domain, outer })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::new(Rect::unit().corners().to_vec()).unwrap()
    }

    #[test]
    fn unit_square_containment() {
        let sq = unit_square();
        assert!(sq.contains([0.5, 0.5]));
        assert!(!sq.contains([1.5, 0.5]));
        // edge points are inside
        assert!(sq.contains([1.0, 0.5]));
        assert!(sq.contains([0.0, 0.0]));
    }

    #[test]
    fn degenerate_ring_is_rejected() {
        let ring = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(point_in_ring(&ring, [0.2, 0.2]), Err(Error::InvalidGeometry(_))));
        assert!(Polygon::new(ring.to_vec()).is_err());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(Polygon::new(bowtie), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let p = Polygon::new(cw).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn sawblade_gap_between_teeth_is_outside() {
        let saw = sawblade_domain(&SawbladeParams::default()).unwrap();
        // x = 2 is a valley between tooth 3 and tooth 4
        assert!(!saw.contains([2.0, 0.95]));
        assert!(saw.contains([2.25, 0.95]));
        assert!(saw.contains([2.0, 0.25]));
    }

    #[test]
    fn single_tooth_is_a_pentagon() {
        let p = sawblade_domain(&SawbladeParams {
            n_teeth: 1,
            length: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.vertices().len(), 5);
        assert!((p.area() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sawblade_area_and_regions() {
        let params = SawbladeParams::default();
        let p = sawblade_domain(&params).unwrap();
        let base = 4.0 / 8.0;
        assert!((p.area() - (2.0 + 8.0 * base * 0.5 / 2.0)).abs() < 1e-13);
        assert_eq!(p.subregions().len(), 9);
        assert_eq!(p.subregion_name(p.locate([2.0, 0.25])), Some(BLADE));
        let tooth = &p.subregions()[3];
        let c = Triangle::new(tooth.vertices[0], tooth.vertices[1], tooth.vertices[2]).centroid();
        assert!(p.subregion_name(p.locate(c)).unwrap().starts_with("tooth"));
    }

    #[test]
    fn overlapping_teeth_rejected() {
        let r = sawblade_domain(&SawbladeParams {
            n_teeth: 4,
            tooth_base: Some(1.5),
            ..Default::default()
        });
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn spaced_teeth_keep_partition() {
        let p = sawblade_domain(&SawbladeParams {
            n_teeth: 3,
            tooth_base: Some(0.8),
            ..Default::default()
        })
        .unwrap();
        assert!((p.area() - (2.0 + 3.0 * 0.8 * 0.25)).abs() < 1e-13);
        let t = triangulate(&p).unwrap();
        assert!((t.total_area() - p.area()).abs() < 1e-12);
    }

    #[test]
    fn notch_areas() {
        assert!((notched_square(0.0).unwrap().area() - 1.0).abs() < 1e-15);
        let a = notched_square(PI / 2.0).unwrap().area();
        // recess triangle: base 2·0.25·tan(π/4) = 0.5, depth 0.25
        assert!((a - (1.0 - 0.0625)).abs() < 1e-14, "{a}");
        assert!(matches!(notched_square(2.0), Err(Error::Domain(_))));
        assert!(matches!(notched_square(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn notch_embeddings_hold_over_mu_grid() {
        let inner = Rect::new(0.0, 1.0, 0.25, 1.0).unwrap();
        for k in 0..=32 {
            let mu = k as f64 / 32.0 * PI / 2.0;
            let dom = notched_square(mu).unwrap();
            Embedding::new(inner, dom, Rect::unit()).unwrap();
        }
    }

    #[test]
    fn embedding_rejects_bad_inner() {
        let dom = notched_square(1.0).unwrap();
        let inner = Rect::new(0.0, 1.0, 0.1, 1.0).unwrap();
        assert!(Embedding::new(inner, dom, Rect::unit()).is_err());
    }

    #[test]
    fn triangulation_counts() {
        assert_eq!(triangulate(&unit_square()).unwrap().len(), 2);
        for t in &triangulate(&unit_square()).unwrap().triangles {
            assert!((t.area() - 0.5).abs() < 1e-15);
        }
        let quad = Polygon::new(vec![[0.0, 0.0], [2.0, 0.1], [2.5, 1.5], [-0.3, 1.0]]).unwrap();
        let t = triangulate(&quad).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.total_area() - quad.area()).abs() < 1e-14);
        let ell = Polygon::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        let t = triangulate(&ell).unwrap();
        assert_eq!(t.len(), 4);
        assert!((t.total_area() - 3.0).abs() < 1e-14);
        assert!(t.triangles.iter().all(|t| t.signed_area() > 0.0));
    }

    #[test]
    fn refinement_counts_and_area() {
        let t = triangulate(&unit_square()).unwrap();
        assert_eq!(refine(&t, 0), t);
        let one = Triangulation { triangles: vec![t.triangles[0]] };
        assert_eq!(refine(&one, 1).len(), 4);
        let r = refine(&t, 3);
        assert_eq!(r.len(), 128);
        assert!((r.total_area() - 1.0).abs() < 1e-12);
        assert!(r.triangles.iter().all(|t| t.signed_area() > 0.0));
    }

    #[test]
    fn poincare_values() {
        assert!((poincare_bound(&Rect::unit()) - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-15);
        let r = Rect::new(0.0, 4.0, 0.0, 1.0).unwrap();
        assert!((poincare_bound(&r) - 0.308_806).abs() < 1e-6);
        let long = Rect::new(0.0, 1e8, 0.0, 1.0).unwrap();
        assert!((poincare_bound(&long) - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn polygon_file_round_trip() {
        let saw = sawblade_domain(&SawbladeParams::default()).unwrap();
        let text = serde_json::to_string(&saw.to_file_data()).unwrap();
        let back = Polygon::from_json(&text).unwrap();
        assert!((back.area() - saw.area()).abs() < 1e-14);
        assert_eq!(back.subregions().len(), saw.subregions().len());
    }
}
