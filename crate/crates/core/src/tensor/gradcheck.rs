//! Central-difference gradient verification.

use super::{no_grad, set_nan_checks, Tensor};
use crate::error::{Error, Result};

/// Outcome of a gradient check: the worst relative error and where it was.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Max over coordinates of `|analytic - numeric| / max(1, |numeric|)`, with
/// `numeric` the central difference of step `eps`. `f` must map `x` to a
/// scalar.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    grad_check_coords(f, x, eps, None).map(|r| r.max_rel_err)
}

/// As [`grad_check`], restricted to `coords` when given.
pub fn grad_check_coords<F>(f: F, x: &Tensor, eps: f64, coords: Option<&[usize]>) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let prev = set_nan_checks(true);
    let out = run(&f, x, eps, coords);
    set_nan_checks(prev);
    out
}

fn run<F>(f: &F, x: &Tensor, eps: f64, coords: Option<&[usize]>) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("grad_check input is not finite".into()));
    }
    let leaf = x.detach_param();
    let y = f(&leaf)?;
    if y.numel() != 1 {
        return Err(Error::Contract(format!("grad_check needs a scalar function, got shape {:?}", y.shape())));
    }
    let analytic = if y.requires_grad() {
        y.backward()?;
        leaf.grad().unwrap_or_else(|| vec![0.0; x.numel()])
    } else {
        vec![0.0; x.numel()]
    };

    let eval = |data: Vec<f64>| -> Result<f64> {
        let t = Tensor::new(data, x.shape())?;
        let v = no_grad(|| f(&t))?.item();
        if !v.is_finite() {
            return Err(Error::NonFinite { op: "grad_check objective".into() });
        }
        Ok(v)
    };

    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.numel()).collect();
            &all
        }
    };
    let mut report = GradCheckReport { max_rel_err: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
    for &i in coords {
        if i >= x.numel() {
            return Err(Error::index("grad_check", format!("coordinate {i} out of range")));
        }
        let mut plus = x.to_vec();
        plus[i] += eps;
        let mut minus = x.to_vec();
        minus[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_rel_err || i == coords[0] {
            report = GradCheckReport {
                max_rel_err: err.max(report.max_rel_err),
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops;

    #[test]
    fn sum_is_exact_on_dyadic_points() {
        let x = Tensor::from_fn(&[3, 4], |i| i as f64 - 5.0);
        let err = grad_check(ops::sum_all, &x, 1.0 / 1024.0).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = Tensor::from_fn(&[4], |i| i as f64 * 0.3 + 0.1);
        let bad = |t: &Tensor| {
            let y = Tensor::from_op("bad_square", t.data().iter().map(|v| v * v).collect(), vec![4], &[t], |ctx| {
                vec![Some(ctx.inputs[0].data().iter().map(|v| 3.0 * v).collect())]
            })?;
            ops::sum_all(&y)
        };
        let r = grad_check_coords(bad, &x, 1e-5, None).unwrap();
        assert!(r.max_rel_err > 0.1);
        assert_eq!(r.worst_index, 3);
    }

    #[test]
    fn non_scalar_rejected() {
        let x = Tensor::zeros(&[2]);
        assert!(grad_check(|t| ops::mul_scalar(t, 2.0), &x, 1e-5).is_err());
    }
}
