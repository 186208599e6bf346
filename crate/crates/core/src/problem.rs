//! Diffusion-reaction problems `−∇·(A∇u) + c u = f` with weakly imposed
//! Dirichlet data `g_D` and Neumann data `−n·A∇u = g_N`.

use std::fmt;
use std::sync::Arc;

use crate::error::{AneError, Result};
use crate::quadrature::{Domain, Point, QuadratureMesh};

/// Symmetric 2×2 matrix; one-dimensional problems use only `[0][0]`.
pub type Mat2 = [[f64; 2]; 2];

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Point) -> Mat2 + Send + Sync>;

#[derive(Clone)]
pub struct PdeProblem {
    pub domain: Domain,
    pub diffusion: MatrixFn,
    pub reaction: ScalarFn,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub neumann: ScalarFn,
    pub gamma_d: f64,
    pub gamma_n: f64,
    pub exact: Option<ScalarFn>,
    pub exact_grad: Option<VectorFn>,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("domain", &self.domain)
            .field("gamma_d", &self.gamma_d)
            .field("gamma_n", &self.gamma_n)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

fn constant(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

impl PdeProblem {
    /// `−Δu = 0` with homogeneous data and unit penalties.
    pub fn new(domain: Domain) -> Self {
        PdeProblem {
            domain,
            diffusion: Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]),
            reaction: constant(0.0),
            source: constant(0.0),
            dirichlet: constant(0.0),
            neumann: constant(0.0),
            gamma_d: 1.0,
            gamma_n: 1.0,
            exact: None,
            exact_grad: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn with_diffusion(mut self, a: impl Fn(&Point) -> Mat2 + Send + Sync + 'static) -> Self {
        self.diffusion = Arc::new(a);
        self
    }

    /// `A(x) = α(x) I`.
    pub fn with_scalar_diffusion(self, alpha: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.with_diffusion(move |x| {
            let a = alpha(x);
            [[a, 0.0], [0.0, a]]
        })
    }

    pub fn with_reaction(mut self, c: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Arc::new(c);
        self
    }

    pub fn with_source(mut self, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    pub fn with_neumann(mut self, g: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.neumann = Arc::new(g);
        self
    }

    pub fn with_penalties(mut self, gamma_d: f64, gamma_n: f64) -> Self {
        self.gamma_d = gamma_d;
        self.gamma_n = gamma_n;
        self
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(u));
        self.exact_grad = Some(Arc::new(grad));
        self
    }

    /// Exact flux `σ = −A∇u`, when the exact solution is known.
    pub fn exact_flux(&self, x: &Point) -> Option<Point> {
        let g = (self.exact_grad.as_ref()?)(x);
        let a = (self.diffusion)(x);
        let s = mat_vec(&a, &g, self.dim());
        Some([-s[0], -s[1]])
    }

    /// Coefficients evaluated once at every node of `mesh`.
    pub fn sample(&self, mesh: &QuadratureMesh) -> Result<SampledProblem> {
        if mesh.dim != self.dim() {
            return Err(AneError::DimensionMismatch {
                expected: self.dim(),
                got: mesh.dim,
            });
        }
        if !(self.gamma_d > 0.0 && self.gamma_n > 0.0) {
            return Err(AneError::InvalidArgument(
                "penalty weights must be positive".into(),
            ));
        }
        let d = self.dim();
        let mut diffusion = Vec::with_capacity(mesh.len());
        let mut diffusion_inv = Vec::with_capacity(mesh.len());
        let mut reaction = Vec::with_capacity(mesh.len());
        let mut source = Vec::with_capacity(mesh.len());
        for x in &mesh.points {
            let a = (self.diffusion)(x);
            let inv = sym_inverse(&a, d).ok_or_else(|| {
                AneError::Precondition(format!("diffusion is not positive definite at {x:?}"))
            })?;
            let c = (self.reaction)(x);
            if !(c >= 0.0) {
                return Err(AneError::Precondition(format!(
                    "reaction coefficient {c} is negative at {x:?}"
                )));
            }
            diffusion.push(a);
            diffusion_inv.push(inv);
            reaction.push(c);
            source.push((self.source)(x));
        }
        Ok(SampledProblem {
            dim: d,
            gamma_d: self.gamma_d,
            gamma_n: self.gamma_n,
            diffusion,
            diffusion_inv,
            reaction,
            source,
            g_dirichlet: mesh.dirichlet.points.iter().map(|x| (self.dirichlet)(x)).collect(),
            g_neumann: mesh.neumann.points.iter().map(|x| (self.neumann)(x)).collect(),
        })
    }
}

/// Problem data at the nodes of one mesh.
#[derive(Clone, Debug)]
pub struct SampledProblem {
    pub dim: usize,
    pub gamma_d: f64,
    pub gamma_n: f64,
    pub diffusion: Vec<Mat2>,
    pub diffusion_inv: Vec<Mat2>,
    pub reaction: Vec<f64>,
    pub source: Vec<f64>,
    pub g_dirichlet: Vec<f64>,
    pub g_neumann: Vec<f64>,
}

#[inline]
pub fn mat_vec(a: &Mat2, v: &Point, dim: usize) -> Point {
    if dim == 1 {
        [a[0][0] * v[0], 0.0]
    } else {
        [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
    }
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Inverse of a symmetric positive definite matrix, `None` otherwise.
pub fn sym_inverse(a: &Mat2, dim: usize) -> Option<Mat2> {
    if dim == 1 {
        let v = a[0][0];
        return (v > 0.0).then(|| [[1.0 / v, 0.0], [0.0, 0.0]]);
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (a[0][1].abs() + a[1][0].abs() + 1.0);
    if !(a[0][0] > 0.0 && det > 0.0 && sym) {
        return None;
    }
    Some([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

#[inline]
pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}
