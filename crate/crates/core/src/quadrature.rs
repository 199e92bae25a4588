//! Gauss rules on intervals, rectangles, triangles and polygons.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{refine, triangulate, Point, Polygon, Rect, Triangle};

/// One-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub degree: usize,
}

/// Two-dimensional rule; `tags` carries the subregion index of each point
/// when the rule was built on a partitioned polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule2d {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
    pub tags: Vec<Option<usize>>,
    /// Names behind the tag indices.
    pub regions: Vec<String>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the three-term identity; endpoints handled separately
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        x.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

impl Rule1d {
    /// Affine map from `(-1, 1)` onto `(a, b)`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule1d {
        let h = 0.5 * (b - a);
        Rule1d {
            nodes: self.nodes.iter().map(|x| a + (x + 1.0) * h).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
            degree: self.degree,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre rule with `n` points on `(-1, 1)`, exact to degree `2n-1`.
/// Nodes by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Result<Rule1d> {
    if n == 0 {
        return Err(Error::domain("Gauss-Legendre rule needs at least one point"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule1d { nodes, weights, degree: 2 * n - 1 })
}

/// Gauss-Lobatto rule with `n ≥ 2` points on `[-1, 1]` including both
/// endpoints, exact to degree `2n-3`.
pub fn gauss_lobatto(n: usize) -> Result<Rule1d> {
    if n < 2 {
        return Err(Error::domain("Gauss-Lobatto rule needs at least two points"));
    }
    let order = n - 1;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for j in 0..n.div_ceil(2) {
        // Chebyshev-Gauss-Lobatto start, Newton on (1-x²) P'_N
        let mut x = (PI * j as f64 / order as f64).cos();
        if j > 0 {
            for _ in 0..100 {
                let (p_n, _) = legendre(order, x);
                let (p_nm1, _) = legendre(order - 1, x);
                let dx = (x * p_n - p_nm1) / (n as f64 * p_n);
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
        }
        let (p_n, _) = legendre(order, x);
        let w = 2.0 / ((order * n) as f64 * p_n * p_n);
        nodes[j] = -x;
        nodes[n - 1 - j] = x;
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule1d { nodes, weights, degree: 2 * n - 3 })
}

/// Product of two rules on `(-1, 1)`, mapped to `rect`.
pub fn tensor_rule(rule_x: &Rule1d, rule_y: &Rule1d, rect: &Rect) -> Rule2d {
    let rx = rule_x.mapped(rect.x0, rect.x1);
    let ry = rule_y.mapped(rect.y0, rect.y1);
    let mut points = Vec::with_capacity(rx.len() * ry.len());
    let mut weights = Vec::with_capacity(rx.len() * ry.len());
    for (&x, &wx) in rx.nodes.iter().zip(&rx.weights) {
        for (&y, &wy) in ry.nodes.iter().zip(&ry.weights) {
            points.push([x, y]);
            weights.push(wx * wy);
        }
    }
    let tags = vec![None; points.len()];
    Rule2d {
        points,
        weights,
        degree: rule_x.degree.min(rule_y.degree),
        tags,
        regions: Vec::new(),
    }
}

/// Collapsed-coordinate Gauss rule on a triangle, exact for total degree
/// `order`.
pub fn triangle_rule(order: usize, tri: &Triangle) -> Result<Rule2d> {
    if order == 0 {
        return Err(Error::domain("triangle rule order must be at least 1"));
    }
    let [a, b, c] = tri.vertices;
    let det = tri.signed_area() * 2.0;
    let scale = (b[0] - a[0]).hypot(b[1] - a[1]).max((c[0] - a[0]).hypot(c[1] - a[1]));
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::geometry("degenerate triangle in quadrature"));
    }
    let m = (order + 3) / 2;
    let g = gauss_legendre(m)?.mapped(0.0, 1.0);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (&u, &wu) in g.nodes.iter().zip(&g.weights) {
        for (&v, &wv) in g.nodes.iter().zip(&g.weights) {
            let s = u;
            let t = v * (1.0 - u);
            points.push([
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ]);
            weights.push(wu * wv * (1.0 - u) * det.abs());
        }
    }
    let tags = vec![tri.tag; points.len()];
    Ok(Rule2d {
        points,
        weights,
        degree: order,
        tags,
        regions: Vec::new(),
    })
}

/// Union of triangle rules over the refined triangulation of `poly`.
pub fn polygon_rule(poly: &Polygon, order: usize, refine_levels: usize) -> Result<Rule2d> {
    let tris = refine(&triangulate(poly)?, refine_levels);
    let mut rule = Rule2d {
        points: Vec::new(),
        weights: Vec::new(),
        degree: order,
        tags: Vec::new(),
        regions: region_names(poly),
    };
    for t in &tris.triangles {
        let r = triangle_rule(order, t)?;
        rule.points.extend(r.points);
        rule.weights.extend(r.weights);
        rule.tags.extend(r.tags);
    }
    Ok(rule)
}

fn region_names(poly: &Polygon) -> Vec<String> {
    poly.subregions().iter().map(|s| s.name.clone()).collect()
}

impl Rule2d {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Replaces the tags with the subregion each point falls in.
    pub fn tagged_by(mut self, poly: &Polygon) -> Self {
        self.tags = self.points.iter().map(|&p| poly.locate(p)).collect();
        self.regions = region_names(poly);
        self
    }

    pub fn region(&self, point: usize) -> Option<&str> {
        self.tags[point].and_then(|t| self.regions.get(t)).map(String::as_str)
    }
}
