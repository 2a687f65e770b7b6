//! Central finite-difference gradient verification.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences of `loss`
/// around `params`. Returns the maximum over parameters of
/// `|analytic - fd| / (|analytic| + |fd| + 1e-12)`.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "grad_check got {} params but {} analytic entries",
            params.len(),
            analytic.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Config("grad_check step must be positive".into()));
    }
    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        work[i] = params[i] + step;
        let up = loss(&work)?;
        work[i] = params[i] - step;
        let down = loss(&work)?;
        work[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at probe of parameter {i} (f+ = {up}, f- = {down})"
            )));
        }
        let fd = (up - down) / (2.0 * step);
        let rel = (analytic[i] - fd).abs() / (analytic[i].abs() + fd.abs() + 1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::sigmoid;

    #[test]
    fn quadratic_gradient_matches() {
        // loss = sum p^2 at p = [1, 2] has gradient [2, 4].
        let params = [1.0, 2.0];
        let analytic = [2.0, 4.0];
        let err = grad_check(
            |p| Ok(p.iter().map(|v| v * v).sum()),
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let params = [0.0];
        let analytic = [0.25];
        let err = grad_check(|p| Ok(sigmoid(p[0])), &params, &analytic, 1e-5).unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let params = [1.0];
        let analytic = [0.0];
        let res = grad_check(|_| Ok(f64::INFINITY), &params, &analytic, 1e-5);
        assert!(res.is_err());
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let params = [1.0];
        let analytic = [5.0]; // true derivative is 2
        let err = grad_check(|p| Ok(p[0] * p[0]), &params, &analytic, 1e-5).unwrap();
        assert!(err > 0.1);
    }
}
