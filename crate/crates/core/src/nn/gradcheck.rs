//! Central finite differences against reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{model_backward, model_forward, Mode, PreparedGraph};
use super::model::Model;
use super::tape::Tape;
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    /// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)`, or the absolute error when both are below 1e-10.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub groups: Vec<GroupError>,
    /// Some evaluation ran next to a Lanczos breakdown; the comparison is not meaningful there.
    pub near_breakdown: bool,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.relative_error).fold(0.0, f64::max)
    }
}

/// Scalar probe `Σ c ⊙ output` in eval mode.
fn probe(model: &Model, pg: &PreparedGraph, c: &Matrix) -> Result<(f64, bool)> {
    let mut tape = Tape::new();
    let pass = model_forward(model, pg, &mut tape, Mode::Eval)?;
    let v = tape
        .value(pass.output)
        .as_slice()
        .iter()
        .zip(c.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    Ok((v, pass.near_breakdown || pass.breakdown))
}

/// Compares the gradient of a random linear probe of the output with central
/// differences of step `h`, one parameter group at a time.
pub fn finite_difference_check(model: &Model, pg: &PreparedGraph, h: f64, probe_seed: u64) -> Result<GradCheck> {
    let mut tape = Tape::new();
    let pass = model_forward(model, pg, &mut tape, Mode::Eval)?;
    let mut near_breakdown = pass.near_breakdown || pass.breakdown;
    let (r, c) = tape.value(pass.output).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
    let weights = Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let grads = model_backward(model, &tape, &pass, &weights)?;

    let mut groups = Vec::with_capacity(grads.names.len());
    for (p, name) in grads.names.iter().enumerate() {
        let analytic = &grads.values[p];
        let mut fd = Matrix::zeros(analytic.rows(), analytic.cols());
        for idx in 0..analytic.len() {
            let mut plus = model.clone();
            plus.params_mut()[p].as_mut_slice()[idx] += h;
            let mut minus = model.clone();
            minus.params_mut()[p].as_mut_slice()[idx] -= h;
            let (fp, bp) = probe(&plus, pg, &weights)?;
            let (fm, bm) = probe(&minus, pg, &weights)?;
            near_breakdown |= bp || bm;
            fd.as_mut_slice()[idx] = (fp - fm) / (2.0 * h);
        }
        let diff = analytic.sub(&fd).frobenius_norm();
        let scale = analytic.frobenius_norm().max(fd.frobenius_norm());
        let relative_error = if scale < 1e-10 { diff } else { diff / scale };
        groups.push(GroupError {
            name: name.clone(),
            relative_error,
        });
    }
    Ok(GradCheck { groups, near_breakdown })
}
