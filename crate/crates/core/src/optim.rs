//! First- and quasi-second-order optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Limited-memory BFGS with a backtracking Armijo line search.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    pub lr: f64,
    pub memory: usize,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    pub fn new(lr: f64, memory: usize) -> Self {
        Lbfgs {
            lr,
            memory: memory.max(1),
            s: Vec::new(),
            y: Vec::new(),
        }
    }

    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.s.len()];
        for i in (0..self.s.len()).rev() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            q.iter_mut()
                .zip(&self.y[i])
                .for_each(|(q, y)| *q -= alpha[i] * y);
        }
        if let (Some(s), Some(y)) = (self.s.last(), self.y.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..self.s.len() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            let beta = rho * dot(&self.y[i], &q);
            q.iter_mut()
                .zip(&self.s[i])
                .for_each(|(q, s)| *q += (alpha[i] - beta) * s);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    /// One iteration from `x` with value `f` and gradient `g`. `eval` returns
    /// value and gradient at a trial point. Returns the accepted value and
    /// gradient (unchanged when no decrease was found).
    pub fn step(
        &mut self,
        x: &mut [f64],
        f: f64,
        g: &[f64],
        mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    ) -> (f64, Vec<f64>) {
        let mut d = self.direction(g);
        let mut slope = dot(g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            self.s.clear();
            self.y.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(g, &d);
        }
        let mut step = if self.s.is_empty() {
            let gnorm = g.iter().map(|v| v.abs()).sum::<f64>();
            self.lr * (1.0 / gnorm.max(1e-12)).min(1.0)
        } else {
            self.lr
        };
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + step * d).collect();
            let (ft, gt) = eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                let s: Vec<f64> = d.iter().map(|d| step * d).collect();
                let y: Vec<f64> = gt.iter().zip(g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 {
                    if self.s.len() == self.memory {
                        self.s.remove(0);
                        self.y.remove(0);
                    }
                    self.s.push(s);
                    self.y.push(y);
                }
                x.copy_from_slice(&trial);
                return (ft, gt);
            }
            step *= 0.5;
        }
        (f, g.to_vec())
    }
}
