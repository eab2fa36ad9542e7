use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

fn binary(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
    backward: impl Fn(&[f64], &[f64], &[f64]) -> (Option<Vec<f64>>, Option<Vec<f64>>) + 'static,
) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_op(op, data, a.shape().to_vec(), &[a, b], move |ctx| {
        let (ga, gb) = backward(ctx.grad, ctx.inputs[0].data(), ctx.inputs[1].data());
        vec![ga.filter(|_| ctx.inputs[0].requires_grad()), gb.filter(|_| ctx.inputs[1].requires_grad())]
    })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary("add", a, b, |x, y| x + y, |g, _, _| (Some(g.to_vec()), Some(g.to_vec())))
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary("sub", a, b, |x, y| x - y, |g, _, _| (Some(g.to_vec()), Some(g.iter().map(|v| -v).collect())))
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(
        "mul",
        a,
        b,
        |x, y| x * y,
        |g, a, b| {
            (Some(g.iter().zip(b).map(|(g, b)| g * b).collect()), Some(g.iter().zip(a).map(|(g, a)| g * a).collect()))
        },
    )
}

pub fn div(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(
        "div",
        a,
        b,
        |x, y| x / y,
        |g, a, b| {
            (
                Some(g.iter().zip(b).map(|(g, b)| g / b).collect()),
                Some(g.iter().zip(a.iter().zip(b)).map(|(g, (a, b))| -g * a / (b * b)).collect()),
            )
        },
    )
}

pub fn add_scalar(a: &Tensor, c: f64) -> Result<Tensor> {
    let data = a.data().iter().map(|x| x + c).collect();
    Tensor::from_op("add_scalar", data, a.shape().to_vec(), &[a], |ctx| vec![Some(ctx.grad.to_vec())])
}

pub fn mul_scalar(a: &Tensor, c: f64) -> Result<Tensor> {
    let data = a.data().iter().map(|x| x * c).collect();
    Tensor::from_op("mul_scalar", data, a.shape().to_vec(), &[a], move |ctx| {
        vec![Some(ctx.grad.iter().map(|g| g * c).collect())]
    })
}

pub fn relu(a: &Tensor) -> Result<Tensor> {
    let data = a.data().iter().map(|&x| x.max(0.0)).collect();
    Tensor::from_op("relu", data, a.shape().to_vec(), &[a], |ctx| {
        let x = ctx.inputs[0].data();
        vec![Some(ctx.grad.iter().zip(x).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect())]
    })
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh form: `0.5 x (1 + tanh(c (x + a x^3)))`.
pub fn gelu(a: &Tensor) -> Result<Tensor> {
    let data = a.data().iter().map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())).collect();
    Tensor::from_op("gelu", data, a.shape().to_vec(), &[a], |ctx| {
        let x = ctx.inputs[0].data();
        vec![Some(
            ctx.grad
                .iter()
                .zip(x)
                .map(|(&g, &x)| {
                    let u = GELU_C * (x + GELU_A * x * x * x);
                    let t = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                    g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                })
                .collect(),
        )]
    })
}
