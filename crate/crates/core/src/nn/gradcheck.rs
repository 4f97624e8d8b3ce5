//! Central finite-difference checks of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::error::Result;
use rand::seq::index::sample;
use rand::Rng;

/// Largest relative error between tape gradients and central differences.
///
/// `f` builds a scalar from leaves holding `inputs`. Per input tensor the
/// error is `|g_tape - g_fd| / max(|g_tape|, |g_fd|)` over the checked
/// coordinates (2-norms). With `per_tensor = Some(k)` only `k` random
/// coordinates of each tensor are perturbed.
pub fn max_relative_error<F, R>(
    inputs: &[Mat],
    eps: f64,
    per_tensor: Option<usize>,
    rng: &mut R,
    f: F,
) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng + ?Sized,
{
    let eval = |vals: &[Mat]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data[0])
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut vals = inputs.to_vec();
    for (t, v) in vars.iter().enumerate() {
        let g = tape.grad_or_zero(*v)?;
        let n = inputs[t].len();
        let coords: Vec<usize> = match per_tensor {
            Some(k) if k < n => sample(rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        let (mut diff, mut na, mut nf) = (0.0, 0.0, 0.0);
        for &c in &coords {
            let x0 = vals[t].data[c];
            vals[t].data[c] = x0 + eps;
            let up = eval(&vals)?;
            vals[t].data[c] = x0 - eps;
            let dn = eval(&vals)?;
            vals[t].data[c] = x0;
            let fd = (up - dn) / (2.0 * eps);
            diff += (g.data[c] - fd).powi(2);
            na += g.data[c].powi(2);
            nf += fd * fd;
        }
        let scale = na.sqrt().max(nf.sqrt());
        if scale > 0.0 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    Ok(worst)
}
