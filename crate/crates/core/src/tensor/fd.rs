use super::Tensor;
use crate::error::{CoreError, Result};

/// Central-difference gradient of a scalar function at `point`:
/// (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
///
/// Test oracle for reverse-mode gradients; independent of the tape.
pub fn finite_diff_grad<F>(f: F, point: &Tensor, h: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(CoreError::InvalidArgument(
            "finite difference step must be positive".into(),
        ));
    }
    let mut grad = Tensor::zeros(point.shape());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = point.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(CoreError::non_finite("finite difference evaluation"));
        }
        grad.data_mut()[i] = g;
    }
    Ok(grad)
}
