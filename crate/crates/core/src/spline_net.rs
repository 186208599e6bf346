//! Two-layer spline networks `c₀ + Σᵢ cᵢ τ_k(ωᵢ·x − bᵢ)` with `τ_k(t) = max(0, t)^k`.
//!
//! Directions live on the unit sphere by construction: in two dimensions each
//! neuron carries an angle `φᵢ` and `ωᵢ = (cos φᵢ, sin φᵢ)`; in one dimension
//! `ωᵢ = +1` is fixed and only the breakpoint `bᵢ` moves.
//!
//! Flat parameter layout (shared by the optimizer and the linear solves):
//!
//! ```text
//! [ c₀ (o values) | neuron 1: (φ₁ if d = 2), b₁, c₁ (o values) | neuron 2: ... ]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::quadrature::Point;

/// `max(0, t)^k`.
#[inline]
pub fn activation(k: u32, t: f64) -> f64 {
    if t > 0.0 {
        t.powi(k as i32)
    } else {
        0.0
    }
}

/// `k max(0, t)^(k-1)`; for `k = 1` the Heaviside function with value 0 at `t = 0`.
#[inline]
pub fn activation_deriv(k: u32, t: f64) -> f64 {
    if t > 0.0 {
        if k == 1 {
            1.0
        } else {
            k as f64 * t.powi(k as i32 - 1)
        }
    } else {
        0.0
    }
}

#[inline]
fn activation_deriv2(k: u32, t: f64) -> f64 {
    if t > 0.0 && k >= 2 {
        let kf = k as f64;
        kf * (kf - 1.0) * t.powi(k as i32 - 2)
    } else {
        0.0
    }
}

/// Values of `τ_k`, `τ_k'` and `τ_k''` at a positive argument.
#[inline]
fn activation_triple(k: u32, t: f64) -> (f64, f64, f64) {
    match k {
        1 => (t, 1.0, 0.0),
        2 => (t * t, 2.0 * t, 2.0),
        3 => (t * t * t, 3.0 * t * t, 6.0 * t),
        _ => (
            activation(k, t),
            activation_deriv(k, t),
            activation_deriv2(k, t),
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplineNetwork {
    degree: u32,
    dim: usize,
    out_dim: usize,
    /// Direction angles, `d = 2` only.
    angles: Vec<f64>,
    omegas: Vec<Point>,
    biases: Vec<f64>,
    /// Row-major `n × o`.
    out_weights: Vec<f64>,
    out_bias: Vec<f64>,
}

/// JSON form of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub k: u32,
    pub d: usize,
    pub o: usize,
    pub n: usize,
    pub omegas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub out_weights: Vec<Vec<f64>>,
    pub out_bias: Vec<f64>,
}

fn check_shape(degree: u32, dim: usize, out_dim: usize) -> Result<()> {
    if degree == 0 {
        return Err(AneError::InvalidArgument("degree must be at least 1".into()));
    }
    if !(1..=2).contains(&dim) {
        return Err(AneError::InvalidArgument(format!(
            "input dimension must be 1 or 2, got {dim}"
        )));
    }
    if out_dim == 0 {
        return Err(AneError::InvalidArgument("output dimension must be at least 1".into()));
    }
    Ok(())
}

impl SplineNetwork {
    /// A one-dimensional network; all directions are `+1`.
    pub fn new_1d(
        degree: u32,
        out_dim: usize,
        biases: Vec<f64>,
        out_weights: Vec<f64>,
        out_bias: Vec<f64>,
    ) -> Result<Self> {
        check_shape(degree, 1, out_dim)?;
        let n = biases.len();
        let omegas = vec![[1.0, 0.0]; n];
        Self::assemble(degree, 1, out_dim, Vec::new(), omegas, biases, out_weights, out_bias)
    }

    /// A two-dimensional network with directions `(cos φᵢ, sin φᵢ)`.
    pub fn new_2d(
        degree: u32,
        out_dim: usize,
        angles: Vec<f64>,
        biases: Vec<f64>,
        out_weights: Vec<f64>,
        out_bias: Vec<f64>,
    ) -> Result<Self> {
        check_shape(degree, 2, out_dim)?;
        if angles.len() != biases.len() {
            return Err(AneError::DimensionMismatch {
                expected: biases.len(),
                got: angles.len(),
            });
        }
        let omegas = angles.iter().map(|a| [a.cos(), a.sin()]).collect();
        Self::assemble(degree, 2, out_dim, angles, omegas, biases, out_weights, out_bias)
    }

    /// Hyperplanes from `(directions, biases)` with all output weights zero.
    pub fn with_hyperplanes(
        degree: u32,
        dim: usize,
        out_dim: usize,
        angles_or_empty: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        let n = biases.len();
        match dim {
            1 => Self::new_1d(degree, out_dim, biases, vec![0.0; n * out_dim], vec![0.0; out_dim]),
            _ => Self::new_2d(
                degree,
                out_dim,
                angles_or_empty,
                biases,
                vec![0.0; n * out_dim],
                vec![0.0; out_dim],
            ),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        degree: u32,
        dim: usize,
        out_dim: usize,
        angles: Vec<f64>,
        omegas: Vec<Point>,
        biases: Vec<f64>,
        out_weights: Vec<f64>,
        out_bias: Vec<f64>,
    ) -> Result<Self> {
        let n = biases.len();
        if out_weights.len() != n * out_dim {
            return Err(AneError::DimensionMismatch {
                expected: n * out_dim,
                got: out_weights.len(),
            });
        }
        if out_bias.len() != out_dim {
            return Err(AneError::DimensionMismatch {
                expected: out_dim,
                got: out_bias.len(),
            });
        }
        Ok(SplineNetwork {
            degree,
            dim,
            out_dim,
            angles,
            omegas,
            biases,
            out_weights,
            out_bias,
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn neurons(&self) -> usize {
        self.biases.len()
    }

    pub fn omegas(&self) -> &[Point] {
        &self.omegas
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Row-major `n × o` output weights.
    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn out_bias(&self) -> &[f64] {
        &self.out_bias
    }

    /// Number of parameters `(d + o) n + o` counting each direction as `d` reals.
    pub fn param_count(&self) -> usize {
        (self.dim + self.out_dim) * self.neurons() + self.out_dim
    }

    fn stride(&self) -> usize {
        self.dim + self.out_dim
    }

    /// Length of the flat trainable vector (angles instead of full directions).
    pub fn flat_len(&self) -> usize {
        self.out_dim + self.neurons() * self.stride()
    }

    /// Offset of neuron `i`'s block in the flat vector.
    pub fn neuron_offset(&self, i: usize) -> usize {
        self.out_dim + i * self.stride()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.flat_len());
        p.extend_from_slice(&self.out_bias);
        let o = self.out_dim;
        for i in 0..self.neurons() {
            if self.dim == 2 {
                p.push(self.angles[i]);
            }
            p.push(self.biases[i]);
            p.extend_from_slice(&self.out_weights[i * o..(i + 1) * o]);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.flat_len() {
            return Err(AneError::DimensionMismatch {
                expected: self.flat_len(),
                got: p.len(),
            });
        }
        let o = self.out_dim;
        self.out_bias.copy_from_slice(&p[..o]);
        let mut off = o;
        for i in 0..self.neurons() {
            if self.dim == 2 {
                let a = p[off];
                if a != self.angles[i] {
                    self.angles[i] = a;
                    self.omegas[i] = [a.cos(), a.sin()];
                }
                off += 1;
            }
            self.biases[i] = p[off];
            off += 1;
            self.out_weights[i * o..(i + 1) * o].copy_from_slice(&p[off..off + o]);
            off += o;
        }
        Ok(())
    }

    /// Replace output weights and bias, keeping the hyperplanes.
    pub fn set_output(&mut self, out_bias: &[f64], out_weights: &[f64]) -> Result<()> {
        if out_bias.len() != self.out_dim || out_weights.len() != self.out_weights.len() {
            return Err(AneError::DimensionMismatch {
                expected: self.out_weights.len() + self.out_dim,
                got: out_weights.len() + out_bias.len(),
            });
        }
        self.out_bias.copy_from_slice(out_bias);
        self.out_weights.copy_from_slice(out_weights);
        Ok(())
    }

    /// Append a neuron with zero output weights. `angle` is ignored for `d = 1`.
    pub fn push_neuron(&mut self, angle: f64, bias: f64) {
        if self.dim == 2 {
            self.angles.push(angle);
            self.omegas.push([angle.cos(), angle.sin()]);
        } else {
            self.omegas.push([1.0, 0.0]);
        }
        self.biases.push(bias);
        self.out_weights.extend(std::iter::repeat_n(0.0, self.out_dim));
    }

    /// Same hyperplanes with a different output dimension and zero output weights.
    pub fn with_out_dim(&self, out_dim: usize) -> Result<Self> {
        Self::with_hyperplanes(
            self.degree,
            self.dim,
            out_dim,
            self.angles.clone(),
            self.biases.clone(),
        )
    }

    /// Signed distance-like argument `ωᵢ·x − bᵢ`.
    #[inline]
    pub fn preactivation(&self, i: usize, x: &Point) -> f64 {
        let w = &self.omegas[i];
        w[0] * x[0] + w[1] * x[1] - self.biases[i]
    }

    /// Value of the `i`-th basis function `τ_k(ωᵢ·x − bᵢ)`.
    #[inline]
    pub fn basis(&self, i: usize, x: &Point) -> f64 {
        activation(self.degree, self.preactivation(i, x))
    }

    /// Spatial gradient of the `i`-th basis function.
    #[inline]
    pub fn basis_grad(&self, i: usize, x: &Point) -> Point {
        let d1 = activation_deriv(self.degree, self.preactivation(i, x));
        let w = &self.omegas[i];
        [w[0] * d1, w[1] * d1]
    }

    /// Value and spatial gradient at one point. `value` has length `o`,
    /// `grad` length `o` (rows of the `o × d` Jacobian, padded to two columns).
    #[inline]
    pub fn eval_point(&self, x: &Point, with_grad: bool, value: &mut [f64], grad: &mut [Point]) {
        let o = self.out_dim;
        value.copy_from_slice(&self.out_bias);
        if with_grad {
            grad.iter_mut().for_each(|g| *g = [0.0, 0.0]);
        }
        let k = self.degree;
        for i in 0..self.neurons() {
            let t = self.preactivation(i, x);
            if t <= 0.0 {
                continue;
            }
            let c = &self.out_weights[i * o..(i + 1) * o];
            let (a, d1, _) = activation_triple(k, t);
            if with_grad {
                let w = self.omegas[i];
                for r in 0..o {
                    value[r] += c[r] * a;
                    let s = c[r] * d1;
                    grad[r][0] += s * w[0];
                    grad[r][1] += s * w[1];
                }
            } else {
                for r in 0..o {
                    value[r] += c[r] * a;
                }
            }
        }
    }

    /// Accumulate into `out` the parameter gradient of
    /// `⟨v_cot, u(x)⟩ + ⟨g_cot, ∇u(x)⟩` at one point.
    #[inline]
    pub fn accumulate_adjoint(
        &self,
        x: &Point,
        v_cot: &[f64],
        g_cot: Option<&[Point]>,
        out: &mut [f64],
    ) {
        let o = self.out_dim;
        let k = self.degree;
        let two_d = self.dim == 2;
        for (r, v) in v_cot.iter().enumerate() {
            out[r] += v;
        }
        let stride = self.stride();
        for i in 0..self.neurons() {
            let t = self.preactivation(i, x);
            if t <= 0.0 {
                continue;
            }
            let (a, d1, d2) = activation_triple(k, t);
            let c = &self.out_weights[i * o..(i + 1) * o];
            let w = self.omegas[i];
            let base = o + i * stride;
            let c_off = base + self.dim;
            // Coefficient of τ'(t) and τ''(t) in d/dt, plus the direct
            // dependence of ∇u on the direction.
            let mut s_val = 0.0;
            let mut s_grad = 0.0;
            let mut q = [0.0, 0.0];
            for r in 0..o {
                let mut dc = v_cot[r] * a;
                s_val += c[r] * v_cot[r];
                if let Some(g) = g_cot {
                    let gw = g[r][0] * w[0] + g[r][1] * w[1];
                    dc += gw * d1;
                    s_grad += c[r] * gw;
                    q[0] += g[r][0] * c[r];
                    q[1] += g[r][1] * c[r];
                }
                out[c_off + r] += dc;
            }
            let dt = s_val * d1 + s_grad * d2;
            if two_d {
                // dω/dφ = (−sin φ, cos φ) = (−w₁, w₀)
                let dw = [-w[1], w[0]];
                out[base] += dt * (dw[0] * x[0] + dw[1] * x[1]) + d1 * (q[0] * dw[0] + q[1] * dw[1]);
                out[base + 1] -= dt;
            } else {
                out[base] -= dt;
            }
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<Point> {
        if p.len() != self.dim {
            return Err(AneError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(if self.dim == 1 { [p[0], 0.0] } else { [p[0], p[1]] })
    }

    /// Network outputs, one `o`-vector per point.
    pub fn evaluate<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<Vec<Vec<f64>>> {
        let mut grad = vec![[0.0; 2]; self.out_dim];
        points
            .iter()
            .map(|p| {
                let x = self.check_point(p.as_ref())?;
                let mut v = vec![0.0; self.out_dim];
                self.eval_point(&x, false, &mut v, &mut grad);
                Ok(v)
            })
            .collect()
    }

    /// Spatial Jacobians, one row-major `o × d` matrix per point.
    pub fn gradient_x<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<Vec<Vec<f64>>> {
        let mut v = vec![0.0; self.out_dim];
        let mut grad = vec![[0.0; 2]; self.out_dim];
        points
            .iter()
            .map(|p| {
                let x = self.check_point(p.as_ref())?;
                self.eval_point(&x, true, &mut v, &mut grad);
                Ok(grad
                    .iter()
                    .flat_map(|g| g[..self.dim].iter().copied())
                    .collect())
            })
            .collect()
    }

    /// Adjoint of [`evaluate`](Self::evaluate): `Σ_q ∂⟨cot_q, u(x_q)⟩/∂θ` in the flat layout.
    pub fn param_gradient<P: AsRef<[f64]>, C: AsRef<[f64]>>(
        &self,
        cotangents: &[C],
        points: &[P],
    ) -> Result<Vec<f64>> {
        if cotangents.len() != points.len() {
            return Err(AneError::DimensionMismatch {
                expected: points.len(),
                got: cotangents.len(),
            });
        }
        let mut out = vec![0.0; self.flat_len()];
        for (cot, p) in cotangents.iter().zip(points) {
            let x = self.check_point(p.as_ref())?;
            let cot = cot.as_ref();
            if cot.len() != self.out_dim {
                return Err(AneError::DimensionMismatch {
                    expected: self.out_dim,
                    got: cot.len(),
                });
            }
            self.accumulate_adjoint(&x, cot, None, &mut out);
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        let o = self.out_dim;
        NetworkSnapshot {
            k: self.degree,
            d: self.dim,
            o,
            n: self.neurons(),
            omegas: self.omegas.iter().map(|w| w[..self.dim].to_vec()).collect(),
            biases: self.biases.clone(),
            out_weights: self.out_weights.chunks(o).map(|c| c.to_vec()).collect(),
            out_bias: self.out_bias.clone(),
        }
    }

    pub fn from_snapshot(s: &NetworkSnapshot) -> Result<Self> {
        check_shape(s.k, s.d, s.o)?;
        if s.omegas.len() != s.n || s.biases.len() != s.n || s.out_weights.len() != s.n {
            return Err(AneError::InvalidArgument(format!(
                "snapshot arrays disagree with n = {}",
                s.n
            )));
        }
        let mut out_weights = Vec::with_capacity(s.n * s.o);
        for c in &s.out_weights {
            if c.len() != s.o {
                return Err(AneError::DimensionMismatch {
                    expected: s.o,
                    got: c.len(),
                });
            }
            out_weights.extend_from_slice(c);
        }
        if s.d == 1 {
            // One-dimensional networks keep every direction at +1.
            if s.omegas.iter().any(|w| w.len() != 1 || w[0] != 1.0) {
                return Err(AneError::InvalidArgument(
                    "one-dimensional snapshots must use direction +1".into(),
                ));
            }
            Self::new_1d(s.k, s.o, s.biases.clone(), out_weights, s.out_bias.clone())
        } else {
            let mut angles = Vec::with_capacity(s.n);
            for w in &s.omegas {
                if w.len() != 2 {
                    return Err(AneError::DimensionMismatch {
                        expected: 2,
                        got: w.len(),
                    });
                }
                let norm = w[0].hypot(w[1]);
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(AneError::InvalidArgument(format!(
                        "direction {w:?} is not a unit vector"
                    )));
                }
                angles.push(w[1].atan2(w[0]));
            }
            Self::new_2d(s.k, s.o, angles, s.biases.clone(), out_weights, s.out_bias.clone())
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_snapshot(&serde_json::from_str(s)?)
    }
}
