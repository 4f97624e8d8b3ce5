use super::tape::{Activation, Tape, Var};
use super::tensor::{Mat, SparseMat};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Named trainable matrices of one network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<Mat>,
}

impl ParamSet {
    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|m| tape.leaf(m.clone())).collect()
    }

    pub fn grads(&self, tape: &Tape, bound: &[Var]) -> Result<Vec<Mat>> {
        bound.iter().map(|v| tape.grad_or_zero(*v)).collect()
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names
            && self.values.iter().zip(&other.values).all(|(a, b)| a.shape() == b.shape())
    }

    /// Flattened copy of all values, in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|m| m.data.iter().copied()).collect()
    }
}

/// Uniform in `[-limit, limit]`.
pub fn uniform_init<R: Rng + ?Sized>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Mat {
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Mat { rows, cols, data }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `act(x W + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
    pub act: Activation,
}

impl Dense {
    /// Glorot-uniform weights unless `limit` is given; zero bias.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        act: Activation,
        limit: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let lim = limit.unwrap_or_else(|| glorot_limit(fan_in, fan_out));
        let w = params.add(format!("{name}.w"), uniform_init(fan_in, fan_out, lim, rng));
        let b = params.add(format!("{name}.b"), Mat::zeros(1, fan_out));
        Self { w, b, act }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        let h = tape.matmul(x, bound[self.w])?;
        let h = tape.add_bias(h, bound[self.b])?;
        tape.act(self.act, h)
    }

    pub fn fan_in(&self, params: &ParamSet) -> usize {
        params.values[self.w].rows
    }
}

/// Graph convolution `act(A_norm X W + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub dense: Dense,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        Self { dense: Dense::new(params, name, fan_in, fan_out, act, None, rng) }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], adj: &Arc<SparseMat>, x: Var) -> Result<Var> {
        let h = tape.aggregate(Arc::clone(adj), x)?;
        self.dense.forward(tape, bound, h)
    }
}

/// Adam with bias correction. Ascent is descent on negated gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Mat]) -> Result<()> {
        if grads.len() != params.values.len() {
            return Err(Error::Dimension(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.values.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.values.iter().map(|p| Mat::zeros(p.rows, p.cols)).collect();
            self.v = self.m.clone();
        }
        if grads.iter().any(|g| g.data.iter().any(|x| !x.is_finite())) {
            return Err(Error::Training("non-finite gradient".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .values
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.shape() != g.shape() {
                return Err(Error::Dimension("gradient shape differs from parameter".into()));
            }
            for i in 0..p.data.len() {
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g.data[i];
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g.data[i] * g.data[i];
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::normalized_adjacency;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut ps = ParamSet::default();
        ps.add("x", Mat::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        let mut adam = Adam::new(0.01);
        let g = Mat::from_vec(1, 3, vec![3.0, -0.1, 1e-3]).unwrap();
        adam.step(&mut ps, &[g]).unwrap();
        // Bias-corrected first step is lr * sign(g) up to eps.
        let want = [0.99, -1.99, 0.49];
        for (a, b) in ps.values[0].data.iter().zip(want) {
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
    }

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut ps = ParamSet::default();
        ps.add("x", Mat::from_vec(1, 2, vec![3.0, -4.0]).unwrap());
        let mut adam = Adam::new(0.05);
        for _ in 0..2000 {
            let g = ps.values[0].map(|v| 2.0 * (v - 1.0));
            adam.step(&mut ps, &[g]).unwrap();
        }
        assert!(ps.values[0].data.iter().all(|v| (v - 1.0).abs() < 1e-3));
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut ps = ParamSet::default();
        ps.add("x", Mat::zeros(1, 1));
        let mut adam = Adam::new(0.1);
        assert!(matches!(adam.step(&mut ps, &[Mat::scalar(f64::NAN)]), Err(Error::Training(_))));
        assert!(matches!(adam.step(&mut ps, &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn gcn_layer_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ps = ParamSet::default();
        let layer = GcnLayer::new(&mut ps, "g", 3, 2, Activation::Identity, &mut rng);
        ps.values[layer.dense.b] = Mat::from_vec(1, 2, vec![0.1, -0.2]).unwrap();
        let adj = Arc::new(normalized_adjacency(4, &[(0, 1), (1, 2), (2, 3)]).unwrap());
        let x = uniform_init(4, 3, 1.0, &mut rng);
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape);
        let xv = tape.leaf(x.clone());
        let y = layer.forward(&mut tape, &bound, &adj, xv).unwrap();
        let want = adj.to_dense().matmul(&x).unwrap().matmul(&ps.values[layer.dense.w]).unwrap();
        for r in 0..4 {
            for c in 0..2 {
                let b = ps.values[layer.dense.b].data[c];
                assert!((tape.value(y).get(r, c) - want.get(r, c) - b).abs() < 1e-12);
            }
        }
    }
}
