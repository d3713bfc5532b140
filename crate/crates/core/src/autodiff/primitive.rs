use super::{Array, AutodiffError};

/// A primitive operation that can be recorded on a [`Tape`](super::Tape).
///
/// Reductions named "last axis" act on the trailing dimension: `[n] -> []`
/// and `[b, n] -> [b]`. Every primitive's derivative is itself expressed with
/// primitives from this set, which is what makes gradients re-differentiable.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    /// Elementwise `a / b`, defined as `0` wherever `b == 0`.
    SafeDiv,
    /// `[m, k] x [k, n] -> [m, n]`.
    MatMul,
    Transpose,
    Tanh,
    Sigmoid,
    /// `log(1 + exp(x))`.
    Softplus,
    Exp,
    Log,
    Square,
    Sqrt,
    /// `max(x, c)`; the derivative at `x == c` is taken to be 0.
    MaxWithConstant(f64),
    ScalarMul(f64),
    AddScalar(f64),
    Sum,
    Mean,
    SumLastAxis,
    /// Euclidean norm over the last axis. The gradient at the zero vector is
    /// defined as the zero vector.
    L2Norm,
    /// `[b, n] + [n] -> [b, n]`, adding the row vector to every row.
    BroadcastAdd,
    /// `[b, n] -> [n]`.
    SumRows,
    /// `[n] -> [b, n]`.
    RepeatRows(usize),
    /// Appends a trailing axis of the given length by repetition.
    ExpandLastAxis(usize),
    /// Broadcasts a one-element array to the given shape.
    Fill(Vec<usize>),
    Reshape(Vec<usize>),
    /// Selects entries of a vector: `out[k] = x[indices[k]]`.
    Gather(Vec<usize>),
    /// Adjoint of `Gather`: `out[indices[k]] += x[k]` into a zero vector of length `len`.
    ScatterAdd { indices: Vec<usize>, len: usize },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::SafeDiv => "safe_div",
            Primitive::MatMul => "matmul",
            Primitive::Transpose => "transpose",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Softplus => "softplus",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Square => "square",
            Primitive::Sqrt => "sqrt",
            Primitive::MaxWithConstant(_) => "max_with_constant",
            Primitive::ScalarMul(_) => "scalar_mul",
            Primitive::AddScalar(_) => "add_scalar",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::SumLastAxis => "sum_last_axis",
            Primitive::L2Norm => "l2_norm",
            Primitive::BroadcastAdd => "broadcast_add",
            Primitive::SumRows => "sum_rows",
            Primitive::RepeatRows(_) => "repeat_rows",
            Primitive::ExpandLastAxis(_) => "expand_last_axis",
            Primitive::Fill(_) => "fill",
            Primitive::Reshape(_) => "reshape",
            Primitive::Gather(_) => "gather",
            Primitive::ScatterAdd { .. } => "scatter_add",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::SafeDiv
            | Primitive::MatMul
            | Primitive::BroadcastAdd => 2,
            _ => 1,
        }
    }

    /// Applies the primitive to concrete input values.
    pub fn apply(&self, inputs: &[&Array]) -> Result<Array, AutodiffError> {
        if inputs.len() != self.arity() {
            return Err(AutodiffError::Arity {
                primitive: self.name(),
                expected: self.arity(),
                got: inputs.len(),
            });
        }
        let mismatch = || AutodiffError::ShapeMismatch {
            primitive: self.name(),
            shapes: inputs.iter().map(|a| a.shape().to_vec()).collect(),
        };
        let x = inputs[0];
        let out = match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::SafeDiv => {
                let y = inputs[1];
                if x.shape() != y.shape() {
                    return Err(mismatch());
                }
                match self {
                    Primitive::Add => x.zip_with(y, |a, b| a + b),
                    Primitive::Sub => x.zip_with(y, |a, b| a - b),
                    Primitive::Mul => x.zip_with(y, |a, b| a * b),
                    _ => x.zip_with(y, |a, b| if b == 0.0 { 0.0 } else { a / b }),
                }
            }
            Primitive::MatMul => {
                let y = inputs[1];
                let (&[m, k], &[k2, n]) = (x.shape(), y.shape()) else {
                    return Err(mismatch());
                };
                if k != k2 {
                    return Err(mismatch());
                }
                let (a, b) = (x.values(), y.values());
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = a[i * k + p];
                        for j in 0..n {
                            out[i * n + j] += aip * b[p * n + j];
                        }
                    }
                }
                Array::new(vec![m, n], out)?
            }
            Primitive::Transpose => {
                let &[m, n] = x.shape() else {
                    return Err(mismatch());
                };
                let a = x.values();
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        out[j * m + i] = a[i * n + j];
                    }
                }
                Array::new(vec![n, m], out)?
            }
            Primitive::Tanh => x.map(f64::tanh),
            Primitive::Sigmoid => x.map(sigmoid),
            Primitive::Softplus => x.map(softplus),
            Primitive::Exp => x.map(f64::exp),
            Primitive::Log => x.map(f64::ln),
            Primitive::Square => x.map(|v| v * v),
            Primitive::Sqrt => x.map(f64::sqrt),
            Primitive::MaxWithConstant(c) => x.map(|v| v.max(*c)),
            Primitive::ScalarMul(c) => x.map(|v| v * c),
            Primitive::AddScalar(c) => x.map(|v| v + c),
            Primitive::Sum => Array::scalar(x.values().iter().sum()),
            Primitive::Mean => {
                if x.is_empty() {
                    return Err(mismatch());
                }
                Array::scalar(x.values().iter().sum::<f64>() / x.len() as f64)
            }
            Primitive::SumLastAxis | Primitive::L2Norm => {
                let (lead, n) = split_last(x.shape()).ok_or_else(mismatch)?;
                let square = matches!(self, Primitive::L2Norm);
                let out = x
                    .values()
                    .chunks(n.max(1))
                    .take(lead.iter().product())
                    .map(|row| {
                        if square {
                            row.iter().map(|v| v * v).sum::<f64>().sqrt()
                        } else {
                            row.iter().sum()
                        }
                    })
                    .collect();
                Array::new(lead.to_vec(), out)?
            }
            Primitive::BroadcastAdd => {
                let y = inputs[1];
                let (&[_, n], &[n2]) = (x.shape(), y.shape()) else {
                    return Err(mismatch());
                };
                if n != n2 {
                    return Err(mismatch());
                }
                let b = y.values();
                let out = x
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v + b[i % n])
                    .collect();
                Array::new(x.shape().to_vec(), out)?
            }
            Primitive::SumRows => {
                let &[_, n] = x.shape() else {
                    return Err(mismatch());
                };
                let mut out = vec![0.0; n];
                for row in x.values().chunks(n.max(1)) {
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                Array::vector(out)
            }
            Primitive::RepeatRows(b) => {
                let &[n] = x.shape() else {
                    return Err(mismatch());
                };
                Array::new(vec![*b, n], x.values().repeat(*b))?
            }
            Primitive::ExpandLastAxis(n) => {
                if x.shape().len() > 1 {
                    return Err(mismatch());
                }
                let mut shape = x.shape().to_vec();
                shape.push(*n);
                let out = x
                    .values()
                    .iter()
                    .flat_map(|&v| std::iter::repeat_n(v, *n))
                    .collect();
                Array::new(shape, out)?
            }
            Primitive::Fill(shape) => {
                if !x.is_scalar() {
                    return Err(mismatch());
                }
                Array::full(shape, x.item())
            }
            Primitive::Reshape(shape) => {
                if shape.iter().product::<usize>() != x.len() {
                    return Err(mismatch());
                }
                x.reshaped(shape.clone())
            }
            Primitive::Gather(indices) => {
                if x.shape().len() != 1 {
                    return Err(mismatch());
                }
                let v = x.values();
                let mut out = Vec::with_capacity(indices.len());
                for &i in indices {
                    let value = v.get(i).ok_or(AutodiffError::IndexOutOfRange {
                        primitive: self.name(),
                        index: i,
                        len: v.len(),
                    })?;
                    out.push(*value);
                }
                Array::vector(out)
            }
            Primitive::ScatterAdd { indices, len } => {
                if x.shape() != [indices.len()] {
                    return Err(mismatch());
                }
                let mut out = vec![0.0; *len];
                for (&i, v) in indices.iter().zip(x.values()) {
                    let slot = out.get_mut(i).ok_or(AutodiffError::IndexOutOfRange {
                        primitive: self.name(),
                        index: i,
                        len: *len,
                    })?;
                    *slot += v;
                }
                Array::vector(out)
            }
        };
        Ok(out)
    }
}

fn split_last(shape: &[usize]) -> Option<(&[usize], usize)> {
    match shape {
        [] => None,
        [lead @ .., n] if lead.len() <= 1 => Some((lead, *n)),
        _ => None,
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
