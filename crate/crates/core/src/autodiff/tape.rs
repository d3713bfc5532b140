use std::collections::HashMap;

use super::{Array, AutodiffError, Primitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Apply(Primitive, Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Array,
}

/// What to differentiate, and whether the resulting gradients should stay on
/// the tape for further differentiation.
#[derive(Debug, Clone)]
pub struct GradRequest {
    pub output: NodeId,
    pub wrt: Vec<NodeId>,
    pub create_graph: bool,
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    values: HashMap<NodeId, Array>,
    nodes: Option<HashMap<NodeId, NodeId>>,
}

impl Gradients {
    /// Gradient value with respect to `wrt`.
    pub fn get(&self, wrt: NodeId) -> Option<&Array> {
        self.values.get(&wrt)
    }

    /// Tape node holding the gradient; only present when the request asked
    /// for `create_graph`.
    pub fn node(&self, wrt: NodeId) -> Option<NodeId> {
        self.nodes.as_ref().and_then(|n| n.get(&wrt).copied())
    }

    pub fn into_values(self) -> HashMap<NodeId, Array> {
        self.values
    }
}

/// Append-only record of primitive applications with eagerly cached values.
///
/// Node ids are topologically ordered by construction: a node can only refer
/// to nodes recorded before it.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input or constant.
    pub fn leaf(&mut self, value: Array) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.leaf(Array::scalar(value))
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    /// Applies `primitive` to the values of `inputs` and records the result.
    pub fn record(&mut self, primitive: Primitive, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        for &id in inputs {
            if !self.contains(id) {
                return Err(AutodiffError::UnknownNode(id.0));
            }
        }
        let values: Vec<&Array> = inputs.iter().map(|&id| self.value(id)).collect();
        let value = primitive.apply(&values)?;
        Ok(self.push(Op::Apply(primitive, inputs.to_vec()), value))
    }

    fn push(&mut self, op: Op, value: Array) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Recomputes every non-leaf node from its inputs and returns the first
    /// node whose recomputed value differs bitwise from the cached one.
    pub fn replay(&self) -> Result<Option<NodeId>, AutodiffError> {
        let mut values: Vec<Array> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match &node.op {
                Op::Leaf => node.value.clone(),
                Op::Apply(p, inputs) => {
                    let args: Vec<&Array> = inputs.iter().map(|id| &values[id.0]).collect();
                    p.apply(&args)?
                }
            };
            let same = v.shape() == node.value.shape()
                && v.values()
                    .iter()
                    .zip(node.value.values())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Ok(Some(NodeId(i)));
            }
            values.push(v);
        }
        Ok(None)
    }

    /// Reverse-mode differentiation of a scalar node.
    ///
    /// Gradients of `wrt` nodes that `output` does not depend on are zero
    /// arrays. Without `create_graph` the tape is left exactly as it was.
    pub fn backward(&mut self, req: &GradRequest) -> Result<Gradients, AutodiffError> {
        let mark = self.nodes.len();
        let nodes = self.grad(req.output, &req.wrt)?;
        let values = req
            .wrt
            .iter()
            .zip(&nodes)
            .map(|(&w, &g)| (w, self.value(g).clone()))
            .collect();
        if req.create_graph {
            Ok(Gradients {
                values,
                nodes: Some(req.wrt.iter().copied().zip(nodes).collect()),
            })
        } else {
            self.nodes.truncate(mark);
            Ok(Gradients { values, nodes: None })
        }
    }

    /// Gradient values only; leaves the tape unchanged.
    pub fn gradient_values(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<Array>, AutodiffError> {
        let mark = self.nodes.len();
        let nodes = self.grad(output, wrt)?;
        let values = nodes.iter().map(|&g| self.value(g).clone()).collect();
        self.nodes.truncate(mark);
        Ok(values)
    }

    /// Records the gradient computation on the tape and returns one node per
    /// `wrt` entry, each differentiable again.
    pub fn grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>, AutodiffError> {
        if !self.contains(output) {
            return Err(AutodiffError::UnknownNode(output.0));
        }
        if let Some(w) = wrt.iter().find(|w| !self.contains(**w)) {
            return Err(AutodiffError::UnknownNode(w.0));
        }
        let out_shape = self.value(output).shape().to_vec();
        if !self.value(output).is_scalar() {
            return Err(AutodiffError::NonScalarOutput(out_shape));
        }

        let n = output.0 + 1;
        let mut depends = vec![false; n];
        for w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for i in 0..n {
            if !depends[i] {
                if let Op::Apply(_, inputs) = &self.nodes[i].op {
                    depends[i] = inputs.iter().any(|j| depends[j.0]);
                }
            }
        }

        let mut grads: Vec<Option<NodeId>> = vec![None; n];
        if depends[output.0] {
            grads[output.0] = Some(self.leaf(Array::full(&out_shape, 1.0)));
        }
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            let Op::Apply(prim, inputs) = self.nodes[i].op.clone() else {
                continue;
            };
            let needs: Vec<bool> = inputs.iter().map(|j| depends[j.0]).collect();
            if !needs.contains(&true) {
                continue;
            }
            let contributions = self.vjp(&prim, &inputs, NodeId(i), g, &needs)?;
            for (input, contribution) in inputs.iter().zip(contributions) {
                let Some(c) = contribution else { continue };
                grads[input.0] = Some(match grads[input.0] {
                    None => c,
                    Some(acc) => self.record(Primitive::Add, &[acc, c])?,
                });
            }
        }

        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let shape = self.value(*w).shape().to_vec();
                    Ok(self.leaf(Array::zeros(&shape)))
                }
            })
            .collect()
    }

    /// Vector-Jacobian product of one recorded node, built from primitives.
    fn vjp(
        &mut self,
        prim: &Primitive,
        inputs: &[NodeId],
        out: NodeId,
        g: NodeId,
        needs: &[bool],
    ) -> Result<Vec<Option<NodeId>>, AutodiffError> {
        use Primitive as P;
        let x = inputs[0];
        let want = |k: usize| needs.get(k).copied().unwrap_or(false);
        let mut r: Vec<Option<NodeId>> = vec![None; inputs.len()];
        match prim {
            P::Add => {
                r[0] = want(0).then_some(g);
                r[1] = want(1).then_some(g);
            }
            P::Sub => {
                r[0] = want(0).then_some(g);
                if want(1) {
                    r[1] = Some(self.record(P::ScalarMul(-1.0), &[g])?);
                }
            }
            P::Mul => {
                if want(0) {
                    r[0] = Some(self.record(P::Mul, &[g, inputs[1]])?);
                }
                if want(1) {
                    r[1] = Some(self.record(P::Mul, &[g, x])?);
                }
            }
            P::SafeDiv => {
                let y = inputs[1];
                if want(0) {
                    r[0] = Some(self.record(P::SafeDiv, &[g, y])?);
                }
                if want(1) {
                    let go = self.record(P::Mul, &[g, out])?;
                    let q = self.record(P::SafeDiv, &[go, y])?;
                    r[1] = Some(self.record(P::ScalarMul(-1.0), &[q])?);
                }
            }
            P::MatMul => {
                let y = inputs[1];
                if want(0) {
                    let yt = self.record(P::Transpose, &[y])?;
                    r[0] = Some(self.record(P::MatMul, &[g, yt])?);
                }
                if want(1) {
                    let xt = self.record(P::Transpose, &[x])?;
                    r[1] = Some(self.record(P::MatMul, &[xt, g])?);
                }
            }
            P::Transpose => r[0] = Some(self.record(P::Transpose, &[g])?),
            P::Tanh => {
                let sq = self.record(P::Square, &[out])?;
                let neg = self.record(P::ScalarMul(-1.0), &[sq])?;
                let d = self.record(P::AddScalar(1.0), &[neg])?;
                r[0] = Some(self.record(P::Mul, &[g, d])?);
            }
            P::Sigmoid => {
                let neg = self.record(P::ScalarMul(-1.0), &[out])?;
                let one_minus = self.record(P::AddScalar(1.0), &[neg])?;
                let d = self.record(P::Mul, &[out, one_minus])?;
                r[0] = Some(self.record(P::Mul, &[g, d])?);
            }
            P::Softplus => {
                let s = self.record(P::Sigmoid, &[x])?;
                r[0] = Some(self.record(P::Mul, &[g, s])?);
            }
            P::Exp => r[0] = Some(self.record(P::Mul, &[g, out])?),
            P::Log => r[0] = Some(self.record(P::SafeDiv, &[g, x])?),
            P::Square => {
                let gx = self.record(P::Mul, &[g, x])?;
                r[0] = Some(self.record(P::ScalarMul(2.0), &[gx])?);
            }
            P::Sqrt => {
                let half = self.record(P::ScalarMul(0.5), &[g])?;
                r[0] = Some(self.record(P::SafeDiv, &[half, out])?);
            }
            P::MaxWithConstant(c) => {
                let mask = self.value(x).map(|v| if v > *c { 1.0 } else { 0.0 });
                let mask = self.leaf(mask);
                r[0] = Some(self.record(P::Mul, &[g, mask])?);
            }
            P::ScalarMul(c) => r[0] = Some(self.record(P::ScalarMul(*c), &[g])?),
            P::AddScalar(_) => r[0] = Some(g),
            P::Sum => {
                let shape = self.value(x).shape().to_vec();
                r[0] = Some(self.record(P::Fill(shape), &[g])?);
            }
            P::Mean => {
                let shape = self.value(x).shape().to_vec();
                let scale = 1.0 / self.value(x).len() as f64;
                let gs = self.record(P::ScalarMul(scale), &[g])?;
                r[0] = Some(self.record(P::Fill(shape), &[gs])?);
            }
            P::SumLastAxis => {
                let n = last_dim(self.value(x));
                r[0] = Some(self.record(P::ExpandLastAxis(n), &[g])?);
            }
            P::L2Norm => {
                let n = last_dim(self.value(x));
                let ge = self.record(P::ExpandLastAxis(n), &[g])?;
                let ne = self.record(P::ExpandLastAxis(n), &[out])?;
                let unit = self.record(P::SafeDiv, &[x, ne])?;
                r[0] = Some(self.record(P::Mul, &[ge, unit])?);
            }
            P::BroadcastAdd => {
                r[0] = want(0).then_some(g);
                if want(1) {
                    r[1] = Some(self.record(P::SumRows, &[g])?);
                }
            }
            P::SumRows => {
                let rows = self.value(x).shape()[0];
                r[0] = Some(self.record(P::RepeatRows(rows), &[g])?);
            }
            P::RepeatRows(_) => r[0] = Some(self.record(P::SumRows, &[g])?),
            P::ExpandLastAxis(_) => r[0] = Some(self.record(P::SumLastAxis, &[g])?),
            P::Fill(_) => {
                let shape = self.value(x).shape().to_vec();
                let s = self.record(P::Sum, &[g])?;
                r[0] = Some(self.record(P::Reshape(shape), &[s])?);
            }
            P::Reshape(_) => {
                let shape = self.value(x).shape().to_vec();
                r[0] = Some(self.record(P::Reshape(shape), &[g])?);
            }
            P::Gather(indices) => {
                let len = self.value(x).len();
                r[0] = Some(self.record(
                    P::ScatterAdd {
                        indices: indices.clone(),
                        len,
                    },
                    &[g],
                )?);
            }
            P::ScatterAdd { indices, .. } => {
                r[0] = Some(self.record(P::Gather(indices.clone()), &[g])?);
            }
        }
        Ok(r)
    }
}

fn last_dim(a: &Array) -> usize {
    a.shape().last().copied().unwrap_or(1)
}

macro_rules! unary {
    ($($name:ident => $prim:ident),* $(,)?) => {
        impl Tape {
            $(
                pub fn $name(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
                    self.record(Primitive::$prim, &[x])
                }
            )*
        }
    };
}

macro_rules! binary {
    ($($name:ident => $prim:ident),* $(,)?) => {
        impl Tape {
            $(
                pub fn $name(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
                    self.record(Primitive::$prim, &[a, b])
                }
            )*
        }
    };
}

unary! {
    transpose => Transpose,
    tanh => Tanh,
    sigmoid => Sigmoid,
    softplus => Softplus,
    exp => Exp,
    log => Log,
    square => Square,
    sqrt => Sqrt,
    sum => Sum,
    mean => Mean,
    sum_last_axis => SumLastAxis,
    l2_norm => L2Norm,
    sum_rows => SumRows,
}

binary! {
    add => Add,
    sub => Sub,
    mul => Mul,
    safe_div => SafeDiv,
    matmul => MatMul,
    broadcast_add => BroadcastAdd,
}

impl Tape {
    pub fn scalar_mul(&mut self, x: NodeId, c: f64) -> Result<NodeId, AutodiffError> {
        self.record(Primitive::ScalarMul(c), &[x])
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId, AutodiffError> {
        self.record(Primitive::AddScalar(c), &[x])
    }

    pub fn max_with_constant(&mut self, x: NodeId, c: f64) -> Result<NodeId, AutodiffError> {
        self.record(Primitive::MaxWithConstant(c), &[x])
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, AutodiffError> {
        self.record(Primitive::Reshape(shape.to_vec()), &[x])
    }

    pub fn gather(&mut self, x: NodeId, indices: &[usize]) -> Result<NodeId, AutodiffError> {
        self.record(Primitive::Gather(indices.to_vec()), &[x])
    }

    pub fn neg(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.scalar_mul(x, -1.0)
    }
}
