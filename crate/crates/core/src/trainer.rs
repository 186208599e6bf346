//! Full-batch Adam over the flat parameter vector of a [`SplineNetwork`],
//! stopped by a relative-decrease plateau rule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::spline_net::SplineNetwork;

/// A differentiable loss over network parameters.
pub trait Objective: Sync {
    /// Loss at `net`; writes the gradient w.r.t. the flat parameters into `grad`.
    fn value_and_grad(&self, net: &SplineNetwork, grad: &mut [f64]) -> f64;

    fn value(&self, net: &SplineNetwork) -> f64 {
        let mut g = vec![0.0; net.flat_len()];
        self.value_and_grad(net, &mut g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Plateau window `W` in iterations.
    pub window: usize,
    /// Plateau threshold `ρ` on the relative decrease over the window.
    pub threshold: f64,
    pub max_iter: usize,
    /// Record every `trace_every`-th loss value.
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            window: 2000,
            threshold: 1e-3,
            max_iter: 200_000,
            trace_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(AneError::InvalidArgument("learning rate must be positive".into()));
        }
        if self.window == 0 {
            return Err(AneError::InvalidArgument("plateau window must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(AneError::InvalidArgument("plateau threshold must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(AneError::InvalidArgument("Adam moments must lie in [0, 1)".into()));
        }
        if self.trace_every == 0 {
            return Err(AneError::InvalidArgument("trace_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Plateau,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Number of Adam updates performed.
    pub iterations: usize,
    pub initial_loss: f64,
    /// Loss of the returned parameters (the best iterate seen).
    pub final_loss: f64,
    pub best_iteration: usize,
    /// `(iteration, loss)` samples; the last entry is `(iterations, final_loss)`.
    pub trace: Vec<(usize, f64)>,
    pub stop_reason: StopReason,
    /// Human-readable statement of the plateau rule that was applied.
    pub plateau_rule: String,
}

impl TrainReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in &self.trace {
            s.push_str(&format!("{i},{l}\n"));
        }
        s
    }
}

/// Adam state for a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Minimise `loss` starting from `net`. Returns the best iterate seen.
pub fn train(
    net: &SplineNetwork,
    loss: &dyn Objective,
    cfg: &TrainConfig,
) -> Result<(SplineNetwork, TrainReport)> {
    cfg.validate()?;
    let mut work = net.clone();
    let mut params = work.params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), cfg);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(cfg.window + 1);
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut initial_loss = f64::NAN;

    let mut iter = 0usize;
    let stop_reason = loop {
        work.set_params(&params)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let value = loss.value_and_grad(&work, &mut grad);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(AneError::NonFiniteLoss {
                iteration: iter,
                value,
            });
        }
        if iter == 0 {
            initial_loss = value;
        }
        if value < best.0 {
            best.0 = value;
            best.1.copy_from_slice(&params);
            best.2 = iter;
        }
        if iter.is_multiple_of(cfg.trace_every) {
            trace.push((iter, value));
        }
        history.push_back(value);
        if history.len() > cfg.window + 1 {
            history.pop_front();
        }
        if iter >= cfg.window {
            let old = history[0];
            let decrease = (old - value) / old.abs().max(f64::MIN_POSITIVE);
            if decrease < cfg.threshold {
                break StopReason::Plateau;
            }
        }
        if iter >= cfg.max_iter {
            break StopReason::MaxIter;
        }
        adam.update(&mut params, &grad);
        iter += 1;
    };

    work.set_params(&best.1)?;
    trace.push((iter, best.0));
    Ok((
        work,
        TrainReport {
            iterations: iter,
            initial_loss,
            final_loss: best.0,
            best_iteration: best.2,
            trace,
            stop_reason,
            plateau_rule: format!(
                "stop when (L[t-{w}] - L[t]) / |L[t-{w}]| < {r}",
                w = cfg.window,
                r = cfg.threshold
            ),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ‖c − c*‖² over the output weights of a 1D network.
    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value_and_grad(&self, net: &SplineNetwork, grad: &mut [f64]) -> f64 {
            let mut loss = 0.0;
            for (i, t) in self.target.iter().enumerate() {
                let off = net.neuron_offset(i) + 1;
                let c = net.out_weights()[i];
                loss += (c - t).powi(2);
                grad[off] = 2.0 * (c - t);
            }
            loss
        }
    }

    struct Constant;

    impl Objective for Constant {
        fn value_and_grad(&self, _: &SplineNetwork, _: &mut [f64]) -> f64 {
            1.5
        }
    }

    struct Nan;

    impl Objective for Nan {
        fn value_and_grad(&self, _: &SplineNetwork, _: &mut [f64]) -> f64 {
            f64::NAN
        }
    }

    fn net3() -> SplineNetwork {
        SplineNetwork::new_1d(1, 1, vec![0.2, 0.5, 0.8], vec![0.0; 3], vec![0.0]).unwrap()
    }

    #[test]
    fn quadratic_toy_converges() {
        let target = vec![1.0, -0.5, 2.0];
        let cfg = TrainConfig {
            learning_rate: 0.01,
            window: 100,
            threshold: 1e-6,
            max_iter: 5000,
            ..TrainConfig::default()
        };
        let (out, rep) = train(&net3(), &Quadratic { target: target.clone() }, &cfg).unwrap();
        assert!(rep.iterations <= 5000);
        for (c, t) in out.out_weights().iter().zip(&target) {
            assert!((c - t).abs() < 1e-4, "{c} vs {t}");
        }
        // Breakpoints receive no gradient and stay put.
        assert_eq!(out.biases(), net3().biases());
    }

    #[test]
    fn constant_loss_stops_after_window() {
        let cfg = TrainConfig {
            window: 37,
            ..TrainConfig::default()
        };
        let (_, rep) = train(&net3(), &Constant, &cfg).unwrap();
        assert_eq!(rep.iterations, 37);
        assert_eq!(rep.stop_reason, StopReason::Plateau);
        assert_eq!(rep.trace.last().unwrap().1, rep.final_loss);
    }

    #[test]
    fn never_stops_before_window() {
        let cfg = TrainConfig {
            window: 50,
            threshold: 0.999,
            ..TrainConfig::default()
        };
        let (_, rep) = train(&net3(), &Quadratic { target: vec![1.0; 3] }, &cfg).unwrap();
        assert!(rep.iterations >= 50);
    }

    #[test]
    fn max_iter_stop() {
        let cfg = TrainConfig {
            window: 1000,
            max_iter: 10,
            ..TrainConfig::default()
        };
        let (_, rep) = train(&net3(), &Quadratic { target: vec![1.0; 3] }, &cfg).unwrap();
        assert_eq!(rep.iterations, 10);
        assert_eq!(rep.stop_reason, StopReason::MaxIter);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let err = train(&net3(), &Nan, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, AneError::NonFiniteLoss { iteration: 0, .. }));
    }

    #[test]
    fn adam_single_step_matches_formula() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut p = vec![1.0, -2.0];
        let g = [0.5, -3.0];
        let mut adam = Adam::new(2, &cfg);
        adam.update(&mut p, &g);
        // First step: m̂ = g, v̂ = g², update = lr·g/(|g| + ε).
        let expect = [
            1.0 - 0.1 * 0.5 / (0.5 + 1e-8),
            -2.0 - 0.1 * -3.0 / (3.0 + 1e-8),
        ];
        assert!((p[0] - expect[0]).abs() < 1e-12);
        assert!((p[1] - expect[1]).abs() < 1e-12);
        // Second step by hand.
        let g2 = [0.1, 0.2];
        adam.update(&mut p, &g2);
        let m = [0.9 * 0.1 * 0.5 + 0.1 * 0.1, 0.9 * 0.1 * -3.0 + 0.1 * 0.2];
        let v = [
            0.999 * 0.001 * 0.25 + 0.001 * 0.01,
            0.999 * 0.001 * 9.0 + 0.001 * 0.04,
        ];
        let c1 = 1.0 - 0.81;
        let c2 = 1.0 - 0.999f64 * 0.999;
        for j in 0..2 {
            let e = expect[j] - 0.1 * (m[j] / c1) / ((v[j] / c2).sqrt() + 1e-8);
            assert!((p[j] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            window: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            threshold: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic_trace() {
        let cfg = TrainConfig {
            max_iter: 300,
            window: 1000,
            ..TrainConfig::default()
        };
        let q = Quadratic { target: vec![0.3, 0.1, -0.2] };
        let (_, a) = train(&net3(), &q, &cfg).unwrap();
        let (_, b) = train(&net3(), &q, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}
