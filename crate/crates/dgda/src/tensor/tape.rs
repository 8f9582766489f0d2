use super::matrix::{sigmoid, softplus};
use super::{Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Exp(usize),
    Softplus(usize),
    Clamp(usize, f64, f64),
    ConcatCols(Vec<usize>),
    MeanRows(usize),
    Sum(usize),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded forward computation. Nodes are appended in execution order, so
/// every node's inputs precede it and a single reverse sweep propagates
/// gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradient accumulators produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of the backward root with respect to `v` (zero if `v` did not
    /// contribute to the root).
    pub fn of(&self, v: Var) -> &Tensor {
        &self.grads[v.0]
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Record an input value (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a.0, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a.0))
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        for i in 0..t.rows() {
            for j in 0..t.cols() {
                let v = t.get(i, j);
                if v <= 0.0 {
                    return Err(TensorError::LogDomain { value: v, row: i, col: j });
                }
            }
        }
        let value = t.map(f64::ln);
        Ok(self.push(value, Op::Log(a.0)))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(value, Op::Exp(a.0))
    }

    /// log(1 + e^x), computed in overflow-safe form.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(softplus);
        self.push(value, Op::Softplus(a.0))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        self.push(value, Op::Clamp(a.0, lo, hi))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::Empty("concat_cols"));
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for (idx, &p) in parts.iter().enumerate() {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(TensorError::RowCountMismatch {
                    index: idx,
                    got: t.rows(),
                    expected: rows,
                });
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            for i in 0..rows {
                for j in 0..t.cols() {
                    out.set(i, offset + j, t.get(i, j));
                }
            }
            offset += t.cols();
        }
        let ids = parts.iter().map(|v| v.0).collect();
        Ok(self.push(out, Op::ConcatCols(ids)))
    }

    /// Column means, a 1 x cols result.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).mean_rows()?;
        Ok(self.push(value, Op::MeanRows(a.0)))
    }

    /// Sum of all entries, a 1x1 result.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a.0))
    }

    /// Reverse sweep from a finite 1x1 root. Returns a gradient per node;
    /// nodes that do not contribute to the root keep zero gradients.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(TensorError::NonScalarRoot {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        if !rv.item().is_finite() {
            return Err(TensorError::NonFinite("backward"));
        }
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[root.0].set(0, 0, 1.0);

        for idx in (0..=root.0).rev() {
            // Cheap skip: a node with an all-zero gradient contributes nothing.
            if grads[idx].data().iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[idx].clone();
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.nodes[*b].value.transpose())?;
                    let db = self.nodes[*a].value.transpose().matmul(&g)?;
                    accumulate(&mut grads[*a], &da);
                    accumulate(&mut grads[*b], &db);
                }
                Op::Transpose(a) => {
                    let da = g.transpose();
                    accumulate(&mut grads[*a], &da);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], &g);
                    accumulate(&mut grads[*b], &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[*a], &g);
                    accumulate_scaled(&mut grads[*b], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let da = g.mul(&self.nodes[*b].value)?;
                    let db = g.mul(&self.nodes[*a].value)?;
                    accumulate(&mut grads[*a], &da);
                    accumulate(&mut grads[*b], &db);
                }
                Op::Scale(a, c) => {
                    accumulate_scaled(&mut grads[*a], &g, *c);
                }
                Op::Relu(a) => {
                    let da = g.zip_map(&self.nodes[*a].value, "relu_grad", |gv, x| {
                        if x > 0.0 {
                            gv
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::Sigmoid(a) => {
                    // d/dx sigmoid = s(1-s), using the stored output.
                    let da = g.zip_map(&self.nodes[idx].value, "sigmoid_grad", |gv, s| {
                        gv * s * (1.0 - s)
                    })?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::Log(a) => {
                    let da = g.zip_map(&self.nodes[*a].value, "log_grad", |gv, x| gv / x)?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::Exp(a) => {
                    let da = g.zip_map(&self.nodes[idx].value, "exp_grad", |gv, e| gv * e)?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::Softplus(a) => {
                    let da = g.zip_map(&self.nodes[*a].value, "softplus_grad", |gv, x| {
                        gv * sigmoid(x)
                    })?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::Clamp(a, lo, hi) => {
                    let da = g.zip_map(&self.nodes[*a].value, "clamp_grad", |gv, x| {
                        if x >= *lo && x <= *hi {
                            gv
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut grads[*a], &da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, pcols) = self.nodes[p].value.shape();
                        let mut slice = Tensor::zeros(rows, pcols);
                        for i in 0..rows {
                            for j in 0..pcols {
                                slice.set(i, j, g.get(i, offset + j));
                            }
                        }
                        accumulate(&mut grads[p], &slice);
                        offset += pcols;
                    }
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.nodes[*a].value.shape();
                    let inv = 1.0 / rows as f64;
                    let mut da = Tensor::zeros(rows, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            da.set(i, j, g.get(0, j) * inv);
                        }
                    }
                    accumulate(&mut grads[*a], &da);
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    let (rows, cols) = self.nodes[*a].value.shape();
                    accumulate(&mut grads[*a], &Tensor::filled(rows, cols, gv));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(dst: &mut Tensor, src: &Tensor) {
    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

fn accumulate_scaled(dst: &mut Tensor, src: &Tensor, c: f64) {
    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += c * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]));
        let root = tape.sum(w);
        let grads = tape.backward(root).unwrap();
        assert_eq!(*grads.of(w), Tensor::ones(2, 2));
    }

    #[test]
    fn backward_of_relu_sum_masks_negatives() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_rows(&[vec![-1.0, 1.0]]));
        let r = tape.relu(w);
        let root = tape.sum(r);
        let grads = tape.backward(root).unwrap();
        assert_eq!(*grads.of(w), Tensor::from_rows(&[vec![0.0, 1.0]]));
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::zeros(2, 2));
        let err = tape.backward(w).unwrap_err();
        assert!(matches!(err, TensorError::NonScalarRoot { rows: 2, cols: 2 }));
    }

    #[test]
    fn non_contributing_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(2.0));
        let unused = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]));
        let root = tape.sum(a);
        let grads = tape.backward(root).unwrap();
        assert_eq!(*grads.of(unused), Tensor::zeros(1, 3));
    }

    #[test]
    fn concat_cols_routes_gradient_slices() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(3, 2));
        let b = tape.leaf(Tensor::zeros(3, 4));
        let c = tape.concat_cols(&[a, b]).unwrap();
        assert_eq!(tape.value(c).shape(), (3, 6));
        let root = tape.sum(c);
        let grads = tape.backward(root).unwrap();
        assert_eq!(*grads.of(a), Tensor::ones(3, 2));
        assert_eq!(*grads.of(b), Tensor::ones(3, 4));
    }

    #[test]
    fn concat_cols_single_part_is_identity() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0]]));
        let c = tape.concat_cols(&[a]).unwrap();
        assert_eq!(tape.value(c), tape.value(a));
    }

    #[test]
    fn concat_cols_row_mismatch() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(3, 2));
        let b = tape.leaf(Tensor::zeros(2, 2));
        let err = tape.concat_cols(&[a, b]).unwrap_err();
        assert!(matches!(
            err,
            TensorError::RowCountMismatch { index: 1, got: 2, expected: 3 }
        ));
    }

    #[test]
    fn log_domain_error_reports_entry() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 0.0]]));
        let err = tape.log(a).unwrap_err();
        assert!(matches!(err, TensorError::LogDomain { row: 0, col: 1, .. }));
    }

    #[test]
    fn log_exp_inverse_pair() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(1.5));
        let e = tape.exp(a);
        let l = tape.log(e).unwrap();
        assert!((tape.value(l).item() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(0.0));
        let s = tape.sigmoid(a);
        assert_eq!(tape.value(s).item(), 0.5);
    }

    #[test]
    fn relu_forward_sign_case() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![-1.0, 2.0]]));
        let r = tape.relu(a);
        assert_eq!(*tape.value(r), Tensor::from_rows(&[vec![0.0, 2.0]]));
    }

    #[test]
    fn mean_rows_gradient_is_uniform() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![2.0, 4.0], vec![4.0, 8.0]]));
        let m = tape.mean_rows(a).unwrap();
        assert_eq!(*tape.value(m), Tensor::from_rows(&[vec![3.0, 6.0]]));
        let root = tape.sum(m);
        let grads = tape.backward(root).unwrap();
        assert_eq!(*grads.of(a), Tensor::filled(2, 2, 0.5));
    }

    #[test]
    fn backward_linearity_over_independent_subgraphs() {
        // root = sum(a*a) + sum(b*b) gives the same gradients as each
        // subgraph differentiated on its own.
        let av = Tensor::from_rows(&[vec![1.5, -2.0]]);
        let bv = Tensor::from_rows(&[vec![0.25, 4.0]]);

        let mut joint = Tape::new();
        let a = joint.leaf(av.clone());
        let b = joint.leaf(bv.clone());
        let aa = joint.mul(a, a).unwrap();
        let bb = joint.mul(b, b).unwrap();
        let sa = joint.sum(aa);
        let sb = joint.sum(bb);
        let root = joint.add(sa, sb).unwrap();
        let joint_grads = joint.backward(root).unwrap();

        let mut alone = Tape::new();
        let a2 = alone.leaf(av);
        let aa2 = alone.mul(a2, a2).unwrap();
        let ra = alone.sum(aa2);
        let alone_grads = alone.backward(ra).unwrap();

        assert_eq!(joint_grads.of(a), alone_grads.of(a2));
        assert_eq!(*joint_grads.of(b), Tensor::from_rows(&[vec![0.5, 8.0]]));
    }
}
