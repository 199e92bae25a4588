//! Tensor-product Legendre spaces with homogeneous Dirichlet values on a
//! rectangle and the Riesz solve for discrete `H^{-1}` dual norms.
//!
//! The 1D modes are `ψ_k(ξ) = L_{k+1}(ξ) - L_{k-1}(ξ)` for `k = 1..n`,
//! mapped affinely from `(-1, 1)`. Since `ψ_k' = (2k+1) L_k`, the 1D
//! stiffness matrix is diagonal and the mass matrix pentadiagonal (only
//! `|j-k| ∈ {0, 2}` couple). The 2D Gram matrix of the gradient inner
//! product is the Kronecker sum `K_x ⊗ M_y + M_x ⊗ K_y`, with modes
//! numbered `i * n_y + j` for `ψ_i(x) ψ_j(y)`.

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::linalg::DenseCholesky;
use crate::quadrature::gauss_legendre;

/// Values and physical derivatives of the 1D modes at `x` on `(a, b)`.
/// Writes `n` entries into each output slice.
pub fn eval_modes_1d(n: usize, a: f64, b: f64, x: f64, values: &mut [f64], derivs: &mut [f64]) {
    let len = b - a;
    let xi = (2.0 * (x - a) - len) / len;
    let jac = 2.0 / len;
    // L_{k-1}, L_k, L_{k+1} walked upwards
    let (mut lm1, mut l0) = (1.0, xi);
    for k in 1..=n {
        let kf = k as f64;
        let lp1 = ((2.0 * kf + 1.0) * xi * l0 - kf * lm1) / (kf + 1.0);
        values[k - 1] = lp1 - lm1;
        derivs[k - 1] = (2.0 * kf + 1.0) * l0 * jac;
        lm1 = l0;
        l0 = lp1;
    }
}

/// Reference-interval 1D mass matrix (dense, row-major `n × n`).
fn reference_mass(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 1..=n {
        let kf = k as f64;
        m[(k - 1) * n + (k - 1)] = 2.0 / (2.0 * kf + 3.0) + 2.0 / (2.0 * kf - 1.0);
        if k + 2 <= n {
            let v = -2.0 / (2.0 * kf + 3.0);
            m[(k - 1) * n + (k + 1)] = v;
            m[(k + 1) * n + (k - 1)] = v;
        }
    }
    m
}

/// 1D stiffness and mass on an interval of length `len`.
#[derive(Clone, Debug)]
pub struct Factor1d {
    pub n: usize,
    /// Diagonal of the stiffness matrix.
    pub stiffness: Vec<f64>,
    /// Dense row-major mass matrix.
    pub mass: Vec<f64>,
}

impl Factor1d {
    fn new(n: usize, len: f64) -> Self {
        let stiffness = (1..=n).map(|k| 2.0 * (2.0 * k as f64 + 1.0) * 2.0 / len).collect();
        let mass = reference_mass(n).into_iter().map(|v| v * len / 2.0).collect();
        Factor1d { n, stiffness, mass }
    }

    /// Quadrature assembly of the same matrices, returning the largest
    /// relative mismatch and the largest off-diagonal stiffness entry.
    fn cross_check(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let n = self.n;
        let rule = gauss_legendre(n + 2)?.mapped(a, b);
        let mut k = vec![0.0; n * n];
        let mut m = vec![0.0; n * n];
        let (mut v, mut d) = (vec![0.0; n], vec![0.0; n]);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            eval_modes_1d(n, a, b, x, &mut v, &mut d);
            for i in 0..n {
                for j in 0..n {
                    k[i * n + j] += w * d[i] * d[j];
                    m[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        let scale = self.stiffness.iter().chain(&self.mass).fold(0.0f64, |s, x| s.max(x.abs()));
        let mut mismatch: f64 = 0.0;
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let kd = if i == j { self.stiffness[i] } else { 0.0 };
                mismatch = mismatch.max((k[i * n + j] - kd).abs() / scale);
                mismatch = mismatch.max((m[i * n + j] - self.mass[i * n + j]).abs() / scale);
                if i != j {
                    off = off.max(k[i * n + j].abs() / scale);
                }
            }
        }
        Ok((mismatch, off))
    }
}

/// Dirichlet tensor space on a rectangle.
#[derive(Clone, Debug)]
pub struct SpectralSpace {
    rect: Rect,
    nx: usize,
    ny: usize,
    fx: Factor1d,
    fy: Factor1d,
}

/// Mode values and gradients at a set of points, laid out `[point][mode]`.
#[derive(Clone, Debug)]
pub struct BasisValues {
    pub dim: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl BasisValues {
    pub fn value(&self, point: usize, mode: usize) -> f64 {
        self.values[point * self.dim + mode]
    }

    pub fn gradient(&self, point: usize, mode: usize) -> [f64; 2] {
        self.gradients[point * self.dim + mode]
    }
}

/// Scratch buffers for repeated point evaluation.
#[derive(Clone, Debug)]
pub struct ModeScratch {
    pub vx: Vec<f64>,
    pub dx: Vec<f64>,
    pub vy: Vec<f64>,
    pub dy: Vec<f64>,
}

impl SpectralSpace {
    pub fn new(rect: Rect, order: (usize, usize)) -> Result<Self> {
        let (nx, ny) = order;
        if nx == 0 || ny == 0 {
            return Err(Error::domain(format!("spectral order ({nx}, {ny}) must be at least 1")));
        }
        let space = SpectralSpace {
            rect,
            nx,
            ny,
            fx: Factor1d::new(nx, rect.width()),
            fy: Factor1d::new(ny, rect.height()),
        };
        let worst = rect
            .boundary_samples(5)
            .into_iter()
            .flat_map(|p| space.eval_basis(&[p]).values)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e-12 {
            return Err(Error::Numerical(format!(
                "basis does not vanish on the boundary (max |psi| = {worst:e})"
            )));
        }
        Ok(space)
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn order(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn dim(&self) -> usize {
        self.nx * self.ny
    }

    pub fn scratch(&self) -> ModeScratch {
        ModeScratch {
            vx: vec![0.0; self.nx],
            dx: vec![0.0; self.nx],
            vy: vec![0.0; self.ny],
            dy: vec![0.0; self.ny],
        }
    }

    /// Fills the 1D factors at `p`; returns `false` outside the closed
    /// rectangle, where all modes vanish (zero extension).
    pub fn eval_factors(&self, p: Point, s: &mut ModeScratch) -> bool {
        if !self.rect.contains(p) {
            return false;
        }
        let r = &self.rect;
        eval_modes_1d(self.nx, r.x0, r.x1, p[0], &mut s.vx, &mut s.dx);
        eval_modes_1d(self.ny, r.y0, r.y1, p[1], &mut s.vy, &mut s.dy);
        true
    }

    pub fn eval_basis(&self, points: &[Point]) -> BasisValues {
        let dim = self.dim();
        let mut values = vec![0.0; dim * points.len()];
        let mut gradients = vec![[0.0; 2]; dim * points.len()];
        let mut s = self.scratch();
        for (q, &p) in points.iter().enumerate() {
            if !self.eval_factors(p, &mut s) {
                continue;
            }
            for i in 0..self.nx {
                for j in 0..self.ny {
                    let m = q * dim + i * self.ny + j;
                    values[m] = s.vx[i] * s.vy[j];
                    gradients[m] = [s.dx[i] * s.vy[j], s.vx[i] * s.dy[j]];
                }
            }
        }
        BasisValues { dim, values, gradients }
    }

    pub fn factor_x(&self) -> &Factor1d {
        &self.fx
    }

    pub fn factor_y(&self) -> &Factor1d {
        &self.fy
    }

    /// Assembles and factors the gradient Gram matrix. The Kronecker factors
    /// are cross-checked against quadrature before use.
    pub fn assemble_gram(&self) -> Result<GramSystem> {
        let r = &self.rect;
        for (f, a, b) in [(&self.fx, r.x0, r.x1), (&self.fy, r.y0, r.y1)] {
            let (mismatch, off) = f.cross_check(a, b)?;
            if mismatch > 1e-10 || off > 1e-12 {
                return Err(Error::Numerical(format!(
                    "1D Gram factors disagree with quadrature (rel {mismatch:e}, off-diagonal stiffness {off:e})"
                )));
            }
        }
        let matrix = kronecker_gram(&self.fx, &self.fy);
        let dim = self.dim();
        let factor = DenseCholesky::factor(&matrix, dim, "spectral Gram matrix")?;
        Ok(GramSystem {
            order: self.order(),
            matrix,
            factor,
        })
    }
}

/// `K_x ⊗ M_y + M_x ⊗ K_y` as a dense row-major matrix.
pub fn kronecker_gram(fx: &Factor1d, fy: &Factor1d) -> Vec<f64> {
    let (nx, ny) = (fx.n, fy.n);
    let dim = nx * ny;
    let mut g = vec![0.0; dim * dim];
    for i in 0..nx {
        for k in 0..nx {
            let mx = fx.mass[i * nx + k];
            let kx = if i == k { fx.stiffness[i] } else { 0.0 };
            if mx == 0.0 && kx == 0.0 {
                continue;
            }
            for j in 0..ny {
                for l in 0..ny {
                    let my = fy.mass[j * ny + l];
                    let ky = if j == l { fy.stiffness[j] } else { 0.0 };
                    g[(i * ny + j) * dim + k * ny + l] = kx * my + mx * ky;
                }
            }
        }
    }
    g
}

/// Factored Gram system of a [`SpectralSpace`].
#[derive(Clone, Debug)]
pub struct GramSystem {
    order: (usize, usize),
    matrix: Vec<f64>,
    factor: DenseCholesky,
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn order(&self) -> (usize, usize) {
        self.order
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn min_pivot(&self) -> f64 {
        self.factor.min_pivot()
    }

    /// Riesz solve `G g = F`; returns `(√(Fᵀg), g)`.
    pub fn dual_norm(&self, functional: &[f64]) -> Result<(f64, Vec<f64>)> {
        if functional.len() != self.dim() {
            return Err(Error::domain(format!(
                "functional has {} entries, space has dimension {}",
                functional.len(),
                self.dim()
            )));
        }
        if functional.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("functional has non-finite entries".into()));
        }
        let g = self.factor.solve(functional);
        let sq: f64 = functional.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !sq.is_finite() {
            return Err(Error::Numerical("non-finite dual norm".into()));
        }
        Ok((sq.max(0.0).sqrt(), g))
    }
}

/// Convenience: space plus factored Gram system on one rectangle.
#[derive(Clone, Debug)]
pub struct RieszSolver {
    pub space: SpectralSpace,
    pub gram: GramSystem,
}

impl RieszSolver {
    pub fn new(rect: Rect, order: (usize, usize)) -> Result<Self> {
        let space = SpectralSpace::new(rect, order)?;
        let gram = space.assemble_gram()?;
        Ok(RieszSolver { space, gram })
    }

    pub fn dual_norm(&self, functional: &[f64]) -> Result<f64> {
        Ok(self.gram.dual_norm(functional)?.0)
    }
}
