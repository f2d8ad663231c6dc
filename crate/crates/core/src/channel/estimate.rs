//! Recovering a Poincaré rotation from probe/response pairs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::polarization::{nearest_rotation, PoincareRotation, StokesVector};

/// Minimum degree of polarization accepted for a response.
pub const MIN_RESPONSE_DOP: f64 = 0.5;
/// Two unit responses closer than this (in `|a x b|`) are treated as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-6;

/// The canonical probe frame `{H, D, R}`.
pub const PROBE_FRAME: [StokesVector; 3] = [StokesVector::H, StokesVector::D, StokesVector::R];

/// Least-squares proper rotation taking `inputs` to `outputs`.
///
/// Solves the orthogonal Procrustes problem on the normalized vectors:
/// with `M = sum(out_i in_i^T) = U S V^T`, the answer is
/// `U diag(1, 1, det(U V^T)) V^T`. Exact whenever the outputs are a rotated
/// copy of an orthonormal input frame.
pub fn estimate_rotation(inputs: &[StokesVector], outputs: &[StokesVector]) -> Result<PoincareRotation> {
    if inputs.len() != outputs.len() || inputs.len() < 2 {
        return Err(Error::Estimation(format!(
            "need matching probe/response sets of at least two states, got {} and {}",
            inputs.len(),
            outputs.len()
        )));
    }
    let ins = unit_vectors(inputs, "probe")?;
    let outs = unit_vectors(outputs, "response")?;
    check_not_parallel(&ins, "probe")?;
    check_not_parallel(&outs, "response")?;

    let m = ins
        .iter()
        .zip(&outs)
        .fold(Matrix3::zeros(), |acc, (i, o)| acc + o * i.transpose());
    let r = nearest_rotation(&m).ok_or_else(|| Error::Estimation("SVD did not converge".into()))?;
    PoincareRotation::new(r)
}

fn unit_vectors(states: &[StokesVector], what: &str) -> Result<Vec<Vector3<f64>>> {
    states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let dop = s.dop();
            if !(dop >= MIN_RESPONSE_DOP) {
                return Err(Error::Estimation(format!(
                    "{what} {k} has degree of polarization {dop:.3} < {MIN_RESPONSE_DOP}"
                )));
            }
            Ok(s.to_vector() / dop)
        })
        .collect()
}

fn check_not_parallel(v: &[Vector3<f64>], what: &str) -> Result<()> {
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i].cross(&v[j]).norm() < PARALLEL_TOLERANCE {
                return Err(Error::Estimation(format!("{what}s {i} and {j} are parallel")));
            }
        }
    }
    Ok(())
}
