//! Reverse-mode differentiation over a recorded graph of small dense tensors.
//!
//! Every node holds a row-major matrix value (scalars are `1 x 1`). Operations
//! append nodes; [`Graph::backward`] walks them in reverse and accumulates
//! adjoints into every tracked node. Adjoints accumulate across calls until
//! [`Graph::zero_grad`].

use std::sync::Arc;

use num_complex::Complex;

use crate::numerics::NumericsError;
use crate::scalar::Scalar;
use crate::signal::fft::FftPlan;
use crate::signal::stft::{stft_with_layout, window, StftLayout, WindowKind};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Value and accumulated adjoint of a scalar node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValue<T> {
    pub value: T,
    pub adjoint: T,
}

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad_left: usize,
    in_len: usize,
    out_len: usize,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    Offset(Var),
    Abs(Var),
    Square(Var),
    Sqrt(Var),
    Log(Var),
    Exp(Var),
    MaxConst(Var, T),
    Elu(Var),
    Sum(Var),
    Mean(Var),
    PassThrough(Var),
    Reshape(Var),
    Transpose(Var),
    SliceCols { input: Var, start: usize },
    GatherRows { table: Var, rows: Vec<usize> },
    MatMul(Var, Var),
    MatMulConst { input: Var, rhs: Arc<Vec<T>>, rhs_cols: usize },
    Conv1d { input: Var, weight: Var, bias: Var, geom: ConvGeometry },
    ConvTranspose1d { input: Var, weight: Var, bias: Var, geom: ConvGeometry },
    StftMagnitude { input: Var, layout: StftLayout, window: Arc<Vec<T>>, spectrum: Vec<Complex<T>> },
}

#[derive(Debug)]
struct Node<T> {
    value: Vec<T>,
    adjoint: Vec<T>,
    shape: Shape,
    tracked: bool,
    op: Op<T>,
}

/// A computation graph. Single-threaded; build one graph per thread.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, shape: Shape, tracked: bool, op: Op<T>) -> Var {
        debug_assert_eq!(value.len(), shape.len());
        let adjoint = if tracked { vec![T::zero(); value.len()] } else { Vec::new() };
        self.nodes.push(Node { value, adjoint, shape, tracked, op });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Vec<T>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "param value does not match its shape");
        self.push(value, Shape::new(rows, cols), true, Op::Leaf)
    }

    /// An input that never receives an adjoint.
    pub fn constant(&mut self, value: Vec<T>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "constant value does not match its shape");
        self.push(value, Shape::new(rows, cols), false, Op::Leaf)
    }

    pub fn scalar_param(&mut self, value: T) -> Var {
        self.param(vec![value], 1, 1)
    }

    pub fn scalar_constant(&mut self, value: T) -> Var {
        self.constant(vec![value], 1, 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        let node = &self.nodes[v.0];
        assert_eq!(node.value.len(), 1, "node is not a scalar");
        node.value[0]
    }

    /// Accumulated adjoint; all zeros for untracked nodes.
    pub fn grad(&self, v: Var) -> Vec<T> {
        let node = &self.nodes[v.0];
        if node.tracked {
            node.adjoint.clone()
        } else {
            vec![T::zero(); node.value.len()]
        }
    }

    pub fn dual(&self, v: Var) -> DualValue<T> {
        let value = self.scalar(v);
        let adjoint = self.grad(v)[0];
        DualValue { value, adjoint }
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.adjoint.iter_mut().for_each(|a| *a = T::zero());
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Shape {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "{op}: shape mismatch {sa:?} vs {sb:?}");
        sa
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let tracked = self.tracked(a);
        self.push(value, self.shape(a), tracked, op)
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(T, T) -> T, op: Op<T>) -> Var {
        let shape = self.same_shape(a, b, name);
        let value = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(value, shape, tracked, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::Offset(a))
    }

    /// Elementwise `|x|`; the subgradient at 0 is 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.abs(), Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.sqrt(), Op::Sqrt(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.ln(), Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    /// Elementwise `max(x, c)`; the gradient passes only where `x > c`.
    pub fn max_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| if x > c { x } else { c }, Op::MaxConst(a, c))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { x.exp() - T::one() }, Op::Elu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(vec![total], Shape::new(1, 1), tracked, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        assert!(n > 0, "mean of an empty node");
        let total: T = self.value(a).iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(vec![total / T::of_usize(n)], Shape::new(1, 1), tracked, Op::Mean(a))
    }

    /// Sum of scalar nodes; `None` for an empty list.
    pub fn add_all(&mut self, terms: &[Var]) -> Option<Var> {
        let (&first, rest) = terms.split_first()?;
        Some(rest.iter().fold(first, |acc, &t| self.add(acc, t)))
    }

    /// Forward value `value`, backward passes the adjoint to `input` unchanged.
    pub fn pass_through(&mut self, input: Var, value: Vec<T>) -> Var {
        assert_eq!(value.len(), self.value(input).len(), "pass_through: shape mismatch");
        let shape = self.shape(input);
        let tracked = self.tracked(input);
        self.push(value, shape, tracked, Op::PassThrough(input))
    }

    /// Stop-gradient: same value, no adjoint flows back.
    pub fn detach(&mut self, a: Var) -> Var {
        let value = self.value(a).to_vec();
        let shape = self.shape(a);
        self.push(value, shape, false, Op::Leaf)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        assert_eq!(self.shape(a).len(), rows * cols, "reshape: element count changes");
        let value = self.value(a).to_vec();
        let tracked = self.tracked(a);
        self.push(value, Shape::new(rows, cols), tracked, Op::Reshape(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let Shape { rows, cols } = self.shape(a);
        let src = self.value(a);
        let mut value = vec![T::zero(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                value[c * rows + r] = src[r * cols + c];
            }
        }
        let tracked = self.tracked(a);
        self.push(value, Shape::new(cols, rows), tracked, Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let Shape { rows, cols } = self.shape(a);
        assert!(start + len <= cols, "slice_cols: {start}+{len} exceeds {cols} columns");
        let src = self.value(a);
        let mut value = Vec::with_capacity(rows * len);
        for r in 0..rows {
            value.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let tracked = self.tracked(a);
        self.push(value, Shape::new(rows, len), tracked, Op::SliceCols { input: a, start })
    }

    /// Selects rows of `table` (e.g. codebook entries) by index.
    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Var {
        let Shape { rows: n_rows, cols } = self.shape(table);
        let src = self.value(table);
        let mut value = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            assert!(r < n_rows, "gather_rows: row {r} out of range {n_rows}");
            value.extend_from_slice(&src[r * cols..(r + 1) * cols]);
        }
        let tracked = self.tracked(table);
        self.push(value, Shape::new(rows.len(), cols), tracked, Op::GatherRows { table, rows: rows.to_vec() })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa.cols, sb.rows, "matmul: inner dimensions differ");
        let value = matmul_values(self.value(a), self.value(b), sa.rows, sa.cols, sb.cols);
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(value, Shape::new(sa.rows, sb.cols), tracked, Op::MatMul(a, b))
    }

    /// `a * rhs` for a constant `rhs` of `a.cols x rhs_cols`.
    pub fn matmul_const(&mut self, a: Var, rhs: Arc<Vec<T>>, rhs_cols: usize) -> Var {
        let sa = self.shape(a);
        assert_eq!(rhs.len(), sa.cols * rhs_cols, "matmul_const: rhs has the wrong size");
        let value = matmul_values(self.value(a), &rhs, sa.rows, sa.cols, rhs_cols);
        let tracked = self.tracked(a);
        self.push(value, Shape::new(sa.rows, rhs_cols), tracked, Op::MatMulConst { input: a, rhs, rhs_cols })
    }

    /// Strided 1-D convolution.
    ///
    /// `input` is `in_channels x in_len`, `weight` is `out_channels x (in_channels * kernel)`
    /// and `bias` is `out_channels x 1`. Output sample `t` reads input positions
    /// `t * stride + k - pad_left`; positions outside the input read zero.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad_left: usize, out_len: usize) -> Var {
        let si = self.shape(input);
        let sw = self.shape(weight);
        let out_channels = sw.rows;
        assert_eq!(sw.cols % si.rows, 0, "conv1d: weight columns not a multiple of input channels");
        assert_eq!(self.shape(bias).len(), out_channels, "conv1d: bias length");
        let geom = ConvGeometry {
            in_channels: si.rows,
            out_channels,
            kernel: sw.cols / si.rows,
            stride,
            pad_left,
            in_len: si.cols,
            out_len,
        };
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let mut y = vec![T::zero(); out_channels * out_len];
        for o in 0..out_channels {
            let yrow = &mut y[o * out_len..(o + 1) * out_len];
            yrow.iter_mut().for_each(|v| *v = b[o]);
            for c in 0..geom.in_channels {
                let xrow = &x[c * geom.in_len..(c + 1) * geom.in_len];
                for k in 0..geom.kernel {
                    let wk = w[(o * geom.in_channels + c) * geom.kernel + k];
                    let (t0, t1) = tap_range(k, pad_left, stride, geom.in_len, out_len);
                    for t in t0..t1 {
                        yrow[t] += wk * xrow[t * stride + k - pad_left];
                    }
                }
            }
        }
        let tracked = self.tracked(input) || self.tracked(weight) || self.tracked(bias);
        self.push(y, Shape::new(out_channels, out_len), tracked, Op::Conv1d { input, weight, bias, geom })
    }

    /// Strided 1-D transposed convolution.
    ///
    /// `input` is `in_channels x in_len`, `weight` is `in_channels x (out_channels * kernel)`.
    /// Input sample `t` scatters into output positions `t * stride + k - pad_left`;
    /// positions outside `0..out_len` are dropped.
    pub fn conv_transpose1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad_left: usize,
        out_len: usize,
    ) -> Var {
        let si = self.shape(input);
        let sw = self.shape(weight);
        assert_eq!(sw.rows, si.rows, "conv_transpose1d: weight rows must equal input channels");
        let out_channels = self.shape(bias).len();
        assert_eq!(sw.cols % out_channels, 0, "conv_transpose1d: weight columns");
        let geom = ConvGeometry {
            in_channels: si.rows,
            out_channels,
            kernel: sw.cols / out_channels,
            stride,
            pad_left,
            in_len: si.cols,
            out_len,
        };
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let mut y = vec![T::zero(); out_channels * out_len];
        for o in 0..out_channels {
            y[o * out_len..(o + 1) * out_len].iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..geom.in_channels {
            let xrow = &x[c * geom.in_len..(c + 1) * geom.in_len];
            for o in 0..out_channels {
                let yrow = &mut y[o * out_len..(o + 1) * out_len];
                for k in 0..geom.kernel {
                    let wk = w[(c * out_channels + o) * geom.kernel + k];
                    let (t0, t1) = tap_range(k, pad_left, stride, out_len, geom.in_len);
                    for t in t0..t1 {
                        yrow[t * stride + k - pad_left] += wk * xrow[t];
                    }
                }
            }
        }
        let tracked = self.tracked(input) || self.tracked(weight) || self.tracked(bias);
        self.push(y, Shape::new(out_channels, out_len), tracked, Op::ConvTranspose1d { input, weight, bias, geom })
    }

    /// Hann-windowed STFT magnitudes (`frames x bins`) of a flattened signal node.
    pub fn stft_magnitude(&mut self, input: Var, window_length: usize, hop_length: usize) -> Result<Var, NumericsError> {
        let samples = self.value(input);
        let layout = StftLayout::new(samples.len(), window_length, hop_length)?;
        let win = Arc::new(window::<T>(WindowKind::Hann, window_length));
        let spec = stft_with_layout(samples, &layout, &win);
        let value = spec.data.iter().map(|c| c.norm()).collect();
        let tracked = self.tracked(input);
        let shape = Shape::new(spec.frames, spec.bins);
        Ok(self.push(value, shape, tracked, Op::StftMagnitude { input, layout, window: win, spectrum: spec.data }))
    }

    /// Backpropagates from a scalar output with seed 1.
    pub fn backward(&mut self, output: Var) -> Result<(), NumericsError> {
        if self.shape(output).len() != 1 {
            return Err(NumericsError::NotScalar(self.shape(output).rows, self.shape(output).cols));
        }
        self.backward_with_seed(output, vec![T::one()])
    }

    /// Backpropagates an arbitrary seed adjoint for `output`.
    pub fn backward_with_seed(&mut self, output: Var, seed: Vec<T>) -> Result<(), NumericsError> {
        assert_eq!(seed.len(), self.value(output).len(), "seed must match the output size");
        let n = output.0 + 1;
        let mut adj: Vec<Vec<T>> = vec![Vec::new(); n];
        adj[output.0] = seed;
        for i in (0..n).rev() {
            if adj[i].is_empty() || !self.nodes[i].tracked {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                return Err(NumericsError::NonFiniteAdjoint { node: i, element: bad });
            }
            self.propagate(i, &g, &mut adj)?;
            for (a, d) in self.nodes[i].adjoint.iter_mut().zip(&g) {
                *a += *d;
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], adj: &mut [Vec<T>]) -> Result<(), NumericsError> {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let slot = |v: Var, adj: &mut [Vec<T>]| -> Option<usize> {
            if !nodes[v.0].tracked {
                return None;
            }
            if adj[v.0].is_empty() {
                adj[v.0] = vec![T::zero(); nodes[v.0].value.len()];
            }
            Some(v.0)
        };
        let domain = |op: &'static str| NumericsError::Domain { op, node: i };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(s) = slot(v, adj) {
                        add_into(&mut adj[s], g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(s) = slot(*a, adj) {
                    add_into(&mut adj[s], g);
                }
                if let Some(s) = slot(*b, adj) {
                    adj[s].iter_mut().zip(g).for_each(|(d, &gv)| *d -= gv);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &y) in adj[s].iter_mut().zip(g).zip(vb) {
                        *d += gv * y;
                    }
                }
                if let Some(s) = slot(*b, adj) {
                    for ((d, &gv), &x) in adj[s].iter_mut().zip(g).zip(va) {
                        *d += gv * x;
                    }
                }
            }
            Op::Div(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                if vb.iter().any(|&y| y == T::zero()) {
                    return Err(domain("div"));
                }
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &y) in adj[s].iter_mut().zip(g).zip(vb) {
                        *d += gv / y;
                    }
                }
                if let Some(s) = slot(*b, adj) {
                    for (((d, &gv), &x), &y) in adj[s].iter_mut().zip(g).zip(va).zip(vb) {
                        *d -= gv * x / (y * y);
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(s) = slot(*a, adj) {
                    adj[s].iter_mut().zip(g).for_each(|(d, &gv)| *d += gv * *c);
                }
            }
            Op::Offset(a) | Op::PassThrough(a) | Op::Reshape(a) => {
                if let Some(s) = slot(*a, adj) {
                    add_into(&mut adj[s], g);
                }
            }
            Op::Abs(a) => {
                let x = &nodes[a.0].value;
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &xv) in adj[s].iter_mut().zip(g).zip(x) {
                        if xv > T::zero() {
                            *d += gv;
                        } else if xv < T::zero() {
                            *d -= gv;
                        }
                    }
                }
            }
            Op::Square(a) => {
                let x = &nodes[a.0].value;
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &xv) in adj[s].iter_mut().zip(g).zip(x) {
                        *d += gv * (xv + xv);
                    }
                }
            }
            Op::Sqrt(a) => {
                let x = &nodes[a.0].value;
                let y = &node.value;
                if x.iter().zip(g).any(|(&xv, &gv)| xv < T::zero() || (xv == T::zero() && gv != T::zero())) {
                    return Err(domain("sqrt"));
                }
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &yv) in adj[s].iter_mut().zip(g).zip(y) {
                        if gv != T::zero() {
                            *d += gv / (yv + yv);
                        }
                    }
                }
            }
            Op::Log(a) => {
                let x = &nodes[a.0].value;
                if x.iter().any(|&xv| xv <= T::zero()) {
                    return Err(domain("log"));
                }
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &xv) in adj[s].iter_mut().zip(g).zip(x) {
                        *d += gv / xv;
                    }
                }
            }
            Op::Exp(a) => {
                let y = &node.value;
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &yv) in adj[s].iter_mut().zip(g).zip(y) {
                        *d += gv * yv;
                    }
                }
            }
            Op::MaxConst(a, c) => {
                let x = &nodes[a.0].value;
                if let Some(s) = slot(*a, adj) {
                    for ((d, &gv), &xv) in adj[s].iter_mut().zip(g).zip(x) {
                        if xv > *c {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Elu(a) => {
                let x = &nodes[a.0].value;
                let y = &node.value;
                if let Some(s) = slot(*a, adj) {
                    for (((d, &gv), &xv), &yv) in adj[s].iter_mut().zip(g).zip(x).zip(y) {
                        *d += if xv > T::zero() { gv } else { gv * (yv + T::one()) };
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(s) = slot(*a, adj) {
                    adj[s].iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(s) = slot(*a, adj) {
                    let share = g[0] / T::of_usize(adj[s].len());
                    adj[s].iter_mut().for_each(|d| *d += share);
                }
            }
            Op::Transpose(a) => {
                let Shape { rows, cols } = nodes[a.0].shape;
                if let Some(s) = slot(*a, adj) {
                    for r in 0..rows {
                        for c in 0..cols {
                            adj[s][r * cols + c] += g[c * rows + r];
                        }
                    }
                }
            }
            Op::SliceCols { input, start } => {
                let Shape { rows, cols } = nodes[input.0].shape;
                let len = node.shape.cols;
                if let Some(s) = slot(*input, adj) {
                    for r in 0..rows {
                        add_into(&mut adj[s][r * cols + start..r * cols + start + len], &g[r * len..(r + 1) * len]);
                    }
                }
            }
            Op::GatherRows { table, rows } => {
                let cols = nodes[table.0].shape.cols;
                if let Some(s) = slot(*table, adj) {
                    for (j, &r) in rows.iter().enumerate() {
                        add_into(&mut adj[s][r * cols..(r + 1) * cols], &g[j * cols..(j + 1) * cols]);
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (nodes[a.0].shape, nodes[b.0].shape);
                let (m, k, n) = (sa.rows, sa.cols, sb.cols);
                if let Some(s) = slot(*a, adj) {
                    matmul_grad_lhs(&mut adj[s], g, &nodes[b.0].value, m, k, n);
                }
                if let Some(s) = slot(*b, adj) {
                    let va = &nodes[a.0].value;
                    for r in 0..m {
                        for p in 0..k {
                            let x = va[r * k + p];
                            if x == T::zero() {
                                continue;
                            }
                            let drow = &mut adj[s][p * n..(p + 1) * n];
                            for (d, &gv) in drow.iter_mut().zip(&g[r * n..(r + 1) * n]) {
                                *d += x * gv;
                            }
                        }
                    }
                }
            }
            Op::MatMulConst { input, rhs, rhs_cols } => {
                let sa = nodes[input.0].shape;
                if let Some(s) = slot(*input, adj) {
                    matmul_grad_lhs(&mut adj[s], g, rhs, sa.rows, sa.cols, *rhs_cols);
                }
            }
            Op::Conv1d { input, weight, bias, geom } => {
                let x = &nodes[input.0].value;
                let w = &nodes[weight.0].value;
                let ConvGeometry { in_channels, out_channels, kernel, stride, pad_left, in_len, out_len } = *geom;
                if let Some(s) = slot(*bias, adj) {
                    for o in 0..out_channels {
                        adj[s][o] += g[o * out_len..(o + 1) * out_len].iter().copied().sum();
                    }
                }
                if let Some(s) = slot(*weight, adj) {
                    for o in 0..out_channels {
                        let grow = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..in_channels {
                            let xrow = &x[c * in_len..(c + 1) * in_len];
                            for k in 0..kernel {
                                let (t0, t1) = tap_range(k, pad_left, stride, in_len, out_len);
                                let mut acc = T::zero();
                                for t in t0..t1 {
                                    acc += grow[t] * xrow[t * stride + k - pad_left];
                                }
                                adj[s][(o * in_channels + c) * kernel + k] += acc;
                            }
                        }
                    }
                }
                if let Some(s) = slot(*input, adj) {
                    for o in 0..out_channels {
                        let grow = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..in_channels {
                            let drow = &mut adj[s][c * in_len..(c + 1) * in_len];
                            for k in 0..kernel {
                                let wk = w[(o * in_channels + c) * kernel + k];
                                let (t0, t1) = tap_range(k, pad_left, stride, in_len, out_len);
                                for t in t0..t1 {
                                    drow[t * stride + k - pad_left] += wk * grow[t];
                                }
                            }
                        }
                    }
                }
            }
            Op::ConvTranspose1d { input, weight, bias, geom } => {
                let x = &nodes[input.0].value;
                let w = &nodes[weight.0].value;
                let ConvGeometry { in_channels, out_channels, kernel, stride, pad_left, in_len, out_len } = *geom;
                if let Some(s) = slot(*bias, adj) {
                    for o in 0..out_channels {
                        adj[s][o] += g[o * out_len..(o + 1) * out_len].iter().copied().sum();
                    }
                }
                if let Some(s) = slot(*weight, adj) {
                    for c in 0..in_channels {
                        let xrow = &x[c * in_len..(c + 1) * in_len];
                        for o in 0..out_channels {
                            let grow = &g[o * out_len..(o + 1) * out_len];
                            for k in 0..kernel {
                                let (t0, t1) = tap_range(k, pad_left, stride, out_len, in_len);
                                let mut acc = T::zero();
                                for t in t0..t1 {
                                    acc += xrow[t] * grow[t * stride + k - pad_left];
                                }
                                adj[s][(c * out_channels + o) * kernel + k] += acc;
                            }
                        }
                    }
                }
                if let Some(s) = slot(*input, adj) {
                    for c in 0..in_channels {
                        for o in 0..out_channels {
                            let grow = &g[o * out_len..(o + 1) * out_len];
                            for k in 0..kernel {
                                let wk = w[(c * out_channels + o) * kernel + k];
                                let (t0, t1) = tap_range(k, pad_left, stride, out_len, in_len);
                                let drow = &mut adj[s][c * in_len..(c + 1) * in_len];
                                for t in t0..t1 {
                                    drow[t] += wk * grow[t * stride + k - pad_left];
                                }
                            }
                        }
                    }
                }
            }
            Op::StftMagnitude { input, layout, window, spectrum } => {
                if let Some(s) = slot(*input, adj) {
                    stft_magnitude_grad(&mut adj[s], g, &node.value, spectrum, layout, window);
                }
            }
        }
        Ok(())
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Output positions `t` in `t0..t1` for which `t * stride + k - pad_left`
/// lies in `0..src_len`, limited to `t < dst_len`.
#[inline]
fn tap_range(k: usize, pad_left: usize, stride: usize, src_len: usize, dst_len: usize) -> (usize, usize) {
    let t0 = if pad_left > k { (pad_left - k).div_ceil(stride) } else { 0 };
    if src_len + pad_left < k + 1 {
        return (0, 0);
    }
    let t1 = ((src_len - 1 + pad_left - k) / stride + 1).min(dst_len);
    (t0.min(t1), t1)
}

fn matmul_values<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for p in 0..k {
            let x = a[r * k + p];
            if x == T::zero() {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += x * bv;
            }
        }
    }
    out
}

/// `da += g * b^T` for `a: m x k`, `b: k x n`.
fn matmul_grad_lhs<T: Scalar>(da: &mut [T], g: &[T], b: &[T], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let grow = &g[r * n..(r + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = T::zero();
            for (&gv, &bv) in grow.iter().zip(brow) {
                acc += gv * bv;
            }
            da[r * k + p] += acc;
        }
    }
}

/// Adjoint of `|STFT(x)|` with respect to the input samples.
///
/// For a bin `X = sum_n w_n x_{p(n)} e^{-i theta_kn}` the magnitude adjoint `g`
/// becomes `c = g X / |X|` on the complex value (zero where `|X| = 0`), and the
/// frame adjoint is `Re(sum_k conj(c_k) e^{-i theta_kn})`, one forward FFT per frame.
fn stft_magnitude_grad<T: Scalar>(
    dx: &mut [T],
    g: &[T],
    magnitude: &[T],
    spectrum: &[Complex<T>],
    layout: &StftLayout,
    window: &[T],
) {
    let n = layout.window_length;
    let bins = layout.bins();
    let plan = FftPlan::<T>::new(n).expect("validated window length");
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for t in 0..layout.frames {
        buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        let mut any = false;
        for k in 0..bins {
            let idx = t * bins + k;
            let mag = magnitude[idx];
            if mag == T::zero() || g[idx] == T::zero() {
                continue;
            }
            let scale = g[idx] / mag;
            buf[k] = spectrum[idx].conj() * scale;
            any = true;
        }
        if !any {
            continue;
        }
        plan.forward(&mut buf);
        let start = t * layout.hop_length;
        for (j, c) in buf.iter().enumerate() {
            dx[layout.source_index(start + j)] += c.re * window[j];
        }
    }
}
