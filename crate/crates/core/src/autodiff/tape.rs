//! The tape: eagerly evaluated primitives with reverse-mode adjoints.

/// Tensor shape. No broadcasting; binary elementwise ops require equal
/// shapes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => *n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense real tensor, row-major for matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn scalar(x: f64) -> Self {
        Self {
            shape: Shape::Scalar,
            data: vec![x],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: Shape::Vector(data.len()),
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self {
            shape: Shape::Matrix(rows, cols),
            data,
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.len();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape, Shape::Scalar, "item() needs a scalar");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    Div(VarId, VarId),
    AddConst(VarId),
    ScaleConst(VarId, f64),
    MatVec(VarId, VarId),
    MatMul(VarId, VarId),
    Sum(VarId),
    Mean(VarId),
    Square(VarId),
    Abs(VarId),
    Exp(VarId),
    Softplus(VarId),
    Elu(VarId),
    MaxConst(VarId, f64),
    Concat(Vec<VarId>),
    Reshape(VarId),
    Slice(VarId, usize),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Records primitives in topological order; single forward construction,
/// single [`Tape::backward`] pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Numerically stable softplus ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ELU with alpha = 1.
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> VarId {
        self.nodes.push(Node { op, value });
        VarId(self.nodes.len() - 1)
    }

    /// Record an input node: a parameter leaf or a constant. Gradients are
    /// computed for any input you ask about; unused ones cost nothing.
    pub fn input(&mut self, value: Tensor) -> VarId {
        self.push(Op::Input, value)
    }

    /// Alias of [`Tape::input`] for values that are data, not parameters.
    pub fn constant(&mut self, value: Tensor) -> VarId {
        self.input(value)
    }

    fn binary_elementwise(
        &mut self,
        a: VarId,
        b: VarId,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> VarId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            va.shape(),
            vb.shape(),
            "elementwise op on mismatched shapes"
        );
        let data = va
            .data()
            .iter()
            .zip(vb.data().iter())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor {
            shape: va.shape().clone(),
            data,
        };
        self.push(op, value)
    }

    fn unary_elementwise(&mut self, a: VarId, op: Op, f: impl Fn(f64) -> f64) -> VarId {
        let va = &self.nodes[a.0].value;
        let value = Tensor {
            shape: va.shape().clone(),
            data: va.data().iter().map(|x| f(*x)).collect(),
        };
        self.push(op, value)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        self.binary_elementwise(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        self.binary_elementwise(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        self.binary_elementwise(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: VarId, b: VarId) -> VarId {
        self.binary_elementwise(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn add_const(&mut self, a: VarId, c: f64) -> VarId {
        self.unary_elementwise(a, Op::AddConst(a), |x| x + c)
    }

    pub fn scale_const(&mut self, a: VarId, c: f64) -> VarId {
        self.unary_elementwise(a, Op::ScaleConst(a, c), |x| x * c)
    }

    pub fn matvec(&mut self, a: VarId, x: VarId) -> VarId {
        let (va, vx) = (&self.nodes[a.0].value, &self.nodes[x.0].value);
        let (rows, cols) = match va.shape() {
            Shape::Matrix(r, c) => (*r, *c),
            other => panic!("matvec lhs must be a matrix, got {other:?}"),
        };
        assert_eq!(
            vx.shape(),
            &Shape::Vector(cols),
            "matvec rhs must be a vector of length {cols}"
        );
        let mut out = vec![0.0; rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &va.data()[i * cols..(i + 1) * cols];
            *o = row
                .iter()
                .zip(vx.data().iter())
                .map(|(m, v)| m * v)
                .sum();
        }
        self.push(Op::MatVec(a, x), Tensor::vector(out))
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (ar, ac) = match va.shape() {
            Shape::Matrix(r, c) => (*r, *c),
            other => panic!("matmul lhs must be a matrix, got {other:?}"),
        };
        let (br, bc) = match vb.shape() {
            Shape::Matrix(r, c) => (*r, *c),
            other => panic!("matmul rhs must be a matrix, got {other:?}"),
        };
        assert_eq!(ac, br, "matmul inner dimensions must agree");
        let mut out = vec![0.0; ar * bc];
        for i in 0..ar {
            for k in 0..ac {
                let aik = va.data()[i * ac + k];
                for j in 0..bc {
                    out[i * bc + j] += aik * vb.data()[k * bc + j];
                }
            }
        }
        self.push(Op::MatMul(a, b), Tensor::matrix(ar, bc, out))
    }

    pub fn sum(&mut self, a: VarId) -> VarId {
        let total = self.nodes[a.0].value.data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(total))
    }

    pub fn mean(&mut self, a: VarId) -> VarId {
        let v = &self.nodes[a.0].value;
        assert!(!v.is_empty(), "mean of an empty tensor");
        let m = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(m))
    }

    pub fn square(&mut self, a: VarId) -> VarId {
        self.unary_elementwise(a, Op::Square(a), |x| x * x)
    }

    pub fn abs(&mut self, a: VarId) -> VarId {
        self.unary_elementwise(a, Op::Abs(a), f64::abs)
    }

    pub fn exp(&mut self, a: VarId) -> VarId {
        self.unary_elementwise(a, Op::Exp(a), f64::exp)
    }

    pub fn softplus(&mut self, a: VarId) -> VarId {
        self.unary_elementwise(a, Op::Softplus(a), softplus)
    }

    pub fn elu(&mut self, a: VarId) -> VarId {
        self.unary_elementwise(a, Op::Elu(a), elu)
    }

    pub fn max_const(&mut self, a: VarId, c: f64) -> VarId {
        self.unary_elementwise(a, Op::MaxConst(a, c), |x| x.max(c))
    }

    pub fn concat(&mut self, parts: &[VarId]) -> VarId {
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.nodes[p.0].value;
            assert!(
                matches!(v.shape(), Shape::Vector(_) | Shape::Scalar),
                "concat takes vectors and scalars"
            );
            data.extend_from_slice(v.data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data))
    }

    pub fn reshape(&mut self, a: VarId, shape: Shape) -> VarId {
        let v = &self.nodes[a.0].value;
        assert_eq!(v.len(), shape.len(), "reshape must preserve length");
        let value = Tensor {
            shape,
            data: v.data().to_vec(),
        };
        self.push(Op::Reshape(a), value)
    }

    /// Contiguous sub-vector `[offset, offset + len)` of a vector.
    pub fn slice(&mut self, a: VarId, offset: usize, len: usize) -> VarId {
        let v = &self.nodes[a.0].value;
        assert!(
            matches!(v.shape(), Shape::Vector(_)),
            "slice takes a vector"
        );
        assert!(offset + len <= v.len(), "slice out of bounds");
        let data = v.data()[offset..offset + len].to_vec();
        self.push(Op::Slice(a, offset), Tensor::vector(data))
    }

    /// Dense affine layer `W x + b`.
    pub fn dense(&mut self, w: VarId, b: VarId, x: VarId) -> VarId {
        let wx = self.matvec(w, x);
        self.add(wx, b)
    }

    /// Reverse pass from a scalar root. Returns adjoints for every node that
    /// influences the root.
    pub fn backward(&self, root: VarId) -> Gradients {
        assert_eq!(
            self.nodes[root.0].value.shape(),
            &Shape::Scalar,
            "backward needs a scalar root"
        );
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.accumulate(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        Gradients { adj }
    }

    fn accumulate(&self, node: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        fn acc_into(slot: &mut Option<Tensor>, shape: &Shape, f: impl FnOnce(&mut [f64])) {
            let t = slot.get_or_insert_with(|| Tensor::zeros(shape.clone()));
            f(t.data_mut());
        }

        let value_of = |id: VarId| &self.nodes[id.0].value;

        match &self.nodes[node].op {
            Op::Input => {}
            Op::Add(a, b) => {
                for id in [a, b] {
                    acc_into(&mut adj[id.0], value_of(*id).shape(), |d| {
                        for (o, gi) in d.iter_mut().zip(g.data()) {
                            *o += gi;
                        }
                    });
                }
            }
            Op::Sub(a, b) => {
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for (o, gi) in d.iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                });
                acc_into(&mut adj[b.0], value_of(*b).shape(), |d| {
                    for (o, gi) in d.iter_mut().zip(g.data()) {
                        *o -= gi;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (value_of(*a).data().to_vec(), value_of(*b).data().to_vec());
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), y) in d.iter_mut().zip(g.data()).zip(&vb) {
                        *o += gi * y;
                    }
                });
                acc_into(&mut adj[b.0], value_of(*b).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        *o += gi * x;
                    }
                });
            }
            Op::Div(a, b) => {
                let (va, vb) = (value_of(*a).data().to_vec(), value_of(*b).data().to_vec());
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), y) in d.iter_mut().zip(g.data()).zip(&vb) {
                        *o += gi / y;
                    }
                });
                acc_into(&mut adj[b.0], value_of(*b).shape(), |d| {
                    for (i, o) in d.iter_mut().enumerate() {
                        *o -= g.data()[i] * va[i] / (vb[i] * vb[i]);
                    }
                });
            }
            Op::AddConst(a) => {
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for (o, gi) in d.iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                });
            }
            Op::ScaleConst(a, c) => {
                let c = *c;
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for (o, gi) in d.iter_mut().zip(g.data()) {
                        *o += gi * c;
                    }
                });
            }
            Op::MatVec(a, x) => {
                let (rows, cols) = match value_of(*a).shape() {
                    Shape::Matrix(r, c) => (*r, *c),
                    _ => unreachable!(),
                };
                let xv = value_of(*x).data().to_vec();
                let av = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for i in 0..rows {
                        let gi = g.data()[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            d[i * cols + j] += gi * xv[j];
                        }
                    }
                });
                acc_into(&mut adj[x.0], value_of(*x).shape(), |d| {
                    for i in 0..rows {
                        let gi = g.data()[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            d[j] += av[i * cols + j] * gi;
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (ar, ac) = match value_of(*a).shape() {
                    Shape::Matrix(r, c) => (*r, *c),
                    _ => unreachable!(),
                };
                let bc = match value_of(*b).shape() {
                    Shape::Matrix(_, c) => *c,
                    _ => unreachable!(),
                };
                let av = value_of(*a).data().to_vec();
                let bv = value_of(*b).data().to_vec();
                // dA = G B^T, dB = A^T G
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for i in 0..ar {
                        for k in 0..ac {
                            let mut acc = 0.0;
                            for j in 0..bc {
                                acc += g.data()[i * bc + j] * bv[k * bc + j];
                            }
                            d[i * ac + k] += acc;
                        }
                    }
                });
                acc_into(&mut adj[b.0], value_of(*b).shape(), |d| {
                    for k in 0..ac {
                        for j in 0..bc {
                            let mut acc = 0.0;
                            for i in 0..ar {
                                acc += av[i * ac + k] * g.data()[i * bc + j];
                            }
                            d[k * bc + j] += acc;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gi = g.item();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for o in d.iter_mut() {
                        *o += gi;
                    }
                });
            }
            Op::Mean(a) => {
                let n = value_of(*a).len() as f64;
                let gi = g.item() / n;
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for o in d.iter_mut() {
                        *o += gi;
                    }
                });
            }
            Op::Square(a) => {
                let va = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        *o += 2.0 * x * gi;
                    }
                });
            }
            Op::Abs(a) => {
                // Subgradient 0 at exactly zero, so the L1 regularizer's
                // frequent exact zeros stay reproducible.
                let va = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        let s = if *x > 0.0 {
                            1.0
                        } else if *x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *o += s * gi;
                    }
                });
            }
            Op::Exp(a) => {
                let out = self.nodes[node].value.data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), e) in d.iter_mut().zip(g.data()).zip(&out) {
                        *o += e * gi;
                    }
                });
            }
            Op::Softplus(a) => {
                let va = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        *o += sigmoid(*x) * gi;
                    }
                });
            }
            Op::Elu(a) => {
                let va = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        let slope = if *x > 0.0 { 1.0 } else { x.exp() };
                        *o += slope * gi;
                    }
                });
            }
            Op::MaxConst(a, c) => {
                let c = *c;
                let va = value_of(*a).data().to_vec();
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for ((o, gi), x) in d.iter_mut().zip(g.data()).zip(&va) {
                        if *x > c {
                            *o += gi;
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = value_of(*p).len();
                    acc_into(&mut adj[p.0], value_of(*p).shape(), |d| {
                        for (o, gi) in d.iter_mut().zip(&g.data()[offset..offset + n]) {
                            *o += gi;
                        }
                    });
                    offset += n;
                }
            }
            Op::Reshape(a) => {
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for (o, gi) in d.iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                });
            }
            Op::Slice(a, offset) => {
                let offset = *offset;
                acc_into(&mut adj[a.0], value_of(*a).shape(), |d| {
                    for (o, gi) in d[offset..offset + g.len()].iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                });
            }
        }
    }
}

/// Adjoints from one backward pass.
pub struct Gradients {
    adj: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, id: VarId) -> Option<&Tensor> {
        self.adj[id.0].as_ref()
    }

    /// Gradient for `id`, or zeros when the node does not affect the root.
    pub fn wrt_or_zeros(&self, id: VarId, shape: &Shape) -> Tensor {
        match &self.adj[id.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape.clone()),
        }
    }
}
