use std::collections::HashMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::params::{ParamId, ParameterStore};
use super::NnetError;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a 3-D convolution; 2-D convolutions use depth 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvGeom {
    pub fn output(&self) -> [usize; 3] {
        std::array::from_fn(|a| (self.input[a] + 2 * self.pad[a] - self.kernel[a]) / self.stride[a] + 1)
    }

    fn patch(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    fn positions(&self) -> usize {
        self.output().iter().product()
    }

    /// Calls `f(row, col, input_offset)` for every in-bounds entry of the
    /// im2col matrix.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [d, h, w] = self.input;
        let [kd, kh, kw] = self.kernel;
        let out = self.output();
        for c in 0..self.in_channels {
            for a in 0..kd {
                for b in 0..kh {
                    for e in 0..kw {
                        let row = ((c * kd + a) * kh + b) * kw + e;
                        for od in 0..out[0] {
                            let z = (od * self.stride[0] + a) as isize - self.pad[0] as isize;
                            if z < 0 || z >= d as isize {
                                continue;
                            }
                            for oh in 0..out[1] {
                                let y = (oh * self.stride[1] + b) as isize - self.pad[1] as isize;
                                if y < 0 || y >= h as isize {
                                    continue;
                                }
                                for ow in 0..out[2] {
                                    let x = (ow * self.stride[2] + e) as isize - self.pad[2] as isize;
                                    if x < 0 || x >= w as isize {
                                        continue;
                                    }
                                    let col = (od * out[1] + oh) * out[2] + ow;
                                    let offset = ((c * d + z as usize) * h + y as usize) * w + x as usize;
                                    f(row, col, offset);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

enum Op {
    Input,
    Param(ParamId),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LayerNorm { x: Var, inv_std: f64 },
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv { x: Var, w: Var, b: Var, geom: ConvGeom, cols: Vec<f64> },
    MeanPool(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Slice(Var, usize),
    Dot(Var, Var),
    Softmax(Var),
    WeightedSum { weights: Var, values: Vec<Var> },
    SoftmaxCrossEntropy { logits: Var, label: usize, probs: Vec<f64>, clamped: bool },
    Mse { pred: Var, target: Vec<f64> },
    Sum(Vec<Var>),
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Variance floor inside layer normalization.
pub const LN_EPS: f64 = 1e-5;

/// Probability floor inside the cross-entropy logarithm.
pub const CE_CLAMP: f64 = 1e-12;

/// Gradients of trainable parameters, indexed by parameter id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Self {
            grads: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// `self += other`, in parameter order.
    pub fn accumulate(&mut self, other: &Gradients) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize(other.grads.len(), None);
        }
        for (dst, src) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.iter_mut().zip(src).for_each(|(a, b)| *a += b),
                    None => *dst = Some(src.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Tape of one forward computation. Parameters are read from the store by
/// reference; values of intermediate nodes are owned by the tape.
pub struct Graph<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
    record: bool,
    consumed: bool,
}

impl<'s> Graph<'s> {
    /// A tape that can be differentiated.
    pub fn new(store: &'s ParameterStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            record: true,
            consumed: false,
        }
    }

    /// A forward-only tape: nothing needs a gradient and no backward caches
    /// are kept.
    pub fn inference(store: &'s ParameterStore) -> Self {
        Self {
            record: false,
            ..Self::new(store)
        }
    }

    pub fn store(&self) -> &ParameterStore {
        self.store
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || shape.iter().product::<usize>() == value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match self.nodes[v.0].op {
            Op::Param(id) => &self.store.get(id).tensor.data,
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn len(&self, v: Var) -> usize {
        self.value(v).len()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var, NnetError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnetError::Shape(format!("input shape {shape:?} vs {} values", data.len())));
        }
        Ok(self.push(shape, data, Op::Input, false))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let needs = self.record && self.store.trainable(id);
        let shape = self.store.get(id).tensor.shape.clone();
        let v = self.push(shape, Vec::new(), Op::Param(id), needs);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        if self.len(a) != self.len(b) {
            return Err(NnetError::Shape(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let needs = self.ng(a) || self.ng(b);
        Ok(self.push(self.shape(a).to_vec(), value, Op::Add(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).iter().map(|x| x * s).collect();
        let needs = self.ng(a);
        self.push(self.shape(a).to_vec(), value, Op::Scale(a, s), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        let needs = self.ng(a);
        self.push(self.shape(a).to_vec(), value, Op::Relu(a), needs)
    }

    /// Zero mean and unit variance over all entries, without affine terms.
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + LN_EPS).sqrt();
        let value = v.iter().map(|a| (a - mean) * inv_std).collect();
        let needs = self.ng(x);
        self.push(self.shape(x).to_vec(), value, Op::LayerNorm { x, inv_std }, needs)
    }

    /// `W x + b` with `W` of shape `[out, in]`; `x` is read flat.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NnetError> {
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || ws[1] != self.len(x) || b.is_some_and(|b| self.len(b) != ws[0]) {
            return Err(NnetError::Shape(format!("linear {:?} · {:?}", ws, self.shape(x))));
        }
        let (out, inp) = (ws[0], ws[1]);
        let xv = self.value(x);
        let wv = self.value(w);
        let mut value: Vec<f64> = match b {
            Some(b) => self.value(b).to_vec(),
            None => vec![0.0; out],
        };
        for (o, y) in value.iter_mut().enumerate() {
            let row = &wv[o * inp..(o + 1) * inp];
            *y += row.iter().zip(xv).map(|(a, c)| a * c).sum::<f64>();
        }
        let needs = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        Ok(self.push(vec![out], value, Op::Linear { x, w, b }, needs))
    }

    /// Cross-correlation of `x` (`[C, D, H, W]`) with `w`
    /// (`[O, C, kd, kh, kw]`) plus per-channel bias.
    pub fn conv(&mut self, x: Var, w: Var, b: Var, stride: [usize; 3], pad: [usize; 3]) -> Result<Var, NnetError> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 4 || ws.len() != 5 || ws[1] != xs[0] || self.len(b) != ws[0] {
            return Err(NnetError::Shape(format!("conv input {xs:?} with kernel {ws:?}")));
        }
        let geom = ConvGeom {
            in_channels: xs[0],
            out_channels: ws[0],
            input: [xs[1], xs[2], xs[3]],
            kernel: [ws[2], ws[3], ws[4]],
            stride,
            pad,
        };
        for a in 0..3 {
            if geom.input[a] + 2 * pad[a] < geom.kernel[a] || stride[a] == 0 {
                return Err(NnetError::Shape(format!("kernel {ws:?} larger than padded input {xs:?}")));
            }
        }
        let (p, n) = (geom.patch(), geom.positions());
        let mut cols = vec![0.0; p * n];
        let xv = self.value(x);
        geom.for_each_tap(|row, col, off| cols[row * n + col] = xv[off]);
        let o = geom.out_channels;
        let mut value = vec![0.0; o * n];
        {
            let bv = self.value(b);
            for (c, chunk) in value.chunks_mut(n).enumerate() {
                chunk.fill(bv[c]);
            }
            let wm = ArrayView2::from_shape((o, p), self.value(w)).unwrap();
            let cm = ArrayView2::from_shape((p, n), &cols).unwrap();
            let mut ym = ArrayViewMut2::from_shape((o, n), &mut value).unwrap();
            general_mat_mul(1.0, &wm, &cm, 1.0, &mut ym);
        }
        let needs = self.ng(x) || self.ng(w) || self.ng(b);
        if !(self.record && self.ng(w)) {
            cols = Vec::new();
        }
        let out = geom.output();
        Ok(self.push(vec![o, out[0], out[1], out[2]], value, Op::Conv { x, w, b, geom, cols }, needs))
    }

    /// Mean over every axis but the first.
    pub fn mean_pool(&mut self, x: Var) -> Var {
        let c = self.shape(x)[0];
        let n = self.len(x) / c;
        let value = self.value(x).chunks(n).map(|ch| ch.iter().sum::<f64>() / n as f64).collect();
        let needs = self.ng(x);
        self.push(vec![c], value, Op::MeanPool(x), needs)
    }

    /// Flat concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::new();
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        let needs = parts.iter().any(|&p| self.ng(p));
        self.push(vec![value.len()], value, Op::Concat(parts.to_vec()), needs)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, NnetError> {
        if shape.iter().product::<usize>() != self.len(x) {
            return Err(NnetError::Shape(format!("reshape {:?} to {shape:?}", self.shape(x))));
        }
        let value = self.value(x).to_vec();
        let needs = self.ng(x);
        Ok(self.push(shape, value, Op::Reshape(x), needs))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnetError> {
        if start + len > self.len(x) {
            return Err(NnetError::Shape(format!("slice {start}..{} of {}", start + len, self.len(x))));
        }
        let value = self.value(x)[start..start + len].to_vec();
        let needs = self.ng(x);
        Ok(self.push(vec![len], value, Op::Slice(x, start), needs))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        if self.len(a) != self.len(b) {
            return Err(NnetError::Shape(format!("dot {:?} · {:?}", self.shape(a), self.shape(b))));
        }
        let v = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        let needs = self.ng(a) || self.ng(b);
        Ok(self.push(vec![1], vec![v], Op::Dot(a, b), needs))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax(self.value(x));
        let needs = self.ng(x);
        self.push(vec![value.len()], value, Op::Softmax(x), needs)
    }

    /// `Σ_i weights[i] · values[i]`.
    pub fn weighted_sum(&mut self, weights: Var, values: &[Var]) -> Result<Var, NnetError> {
        if self.len(weights) != values.len() || values.is_empty() {
            return Err(NnetError::Shape("weighted_sum arity".into()));
        }
        let n = self.len(values[0]);
        if values.iter().any(|&v| self.len(v) != n) {
            return Err(NnetError::Shape("weighted_sum value lengths differ".into()));
        }
        let mut value = vec![0.0; n];
        for (&a, &v) in self.value(weights).iter().zip(values) {
            for (y, x) in value.iter_mut().zip(self.value(v)) {
                *y += a * x;
            }
        }
        let needs = self.ng(weights) || values.iter().any(|&v| self.ng(v));
        Ok(self.push(
            vec![n],
            value,
            Op::WeightedSum {
                weights,
                values: values.to_vec(),
            },
            needs,
        ))
    }

    /// `−ln max(softmax(logits)[label], 1e−12)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, NnetError> {
        if label >= self.len(logits) {
            return Err(NnetError::Shape(format!("label {label} with {} classes", self.len(logits))));
        }
        let probs = softmax(self.value(logits));
        let clamped = probs[label] < CE_CLAMP;
        let loss = -probs[label].max(CE_CLAMP).ln();
        let needs = self.ng(logits);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::SoftmaxCrossEntropy {
                logits,
                label,
                probs,
                clamped,
            },
            needs,
        ))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var, NnetError> {
        if self.len(pred) != target.len() {
            return Err(NnetError::Shape(format!("mse {} vs {}", self.len(pred), target.len())));
        }
        let n = target.len() as f64;
        let v = self.value(pred).iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
        let needs = self.ng(pred);
        Ok(self.push(
            vec![1],
            vec![v],
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
            needs,
        ))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let v = parts.iter().map(|&p| self.value(p).iter().sum::<f64>()).sum();
        let needs = parts.iter().any(|&p| self.ng(p));
        self.push(vec![1], vec![v], Op::Sum(parts.to_vec()), needs)
    }

    /// Reverse sweep from a scalar `loss`. Gradients of frozen parameters are
    /// never formed. A tape can be swept once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnetError> {
        if self.consumed {
            return Err(NnetError::BackwardTwice);
        }
        if !self.record {
            return Err(NnetError::Shape("backward on an inference tape".into()));
        }
        if self.len(loss) != 1 {
            return Err(NnetError::Shape(format!("loss must be scalar, got {:?}", self.shape(loss))));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(self.store);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            let node = &self.nodes[i];
            let mut send = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                if self.nodes[v.0].needs_grad {
                    let n = self.nodes[v.0].shape.iter().product();
                    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
                    f(slot);
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.grads[id.0] = Some(g),
                Op::Add(a, b) => {
                    send(*a, &mut |s| s.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    send(*b, &mut |s| s.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::Scale(a, c) => send(*a, &mut |s| s.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y)),
                Op::Relu(a) => {
                    let y = &node.value;
                    send(*a, &mut |s| {
                        for ((x, gy), yv) in s.iter_mut().zip(&g).zip(y) {
                            if *yv > 0.0 {
                                *x += gy;
                            }
                        }
                    });
                }
                Op::LayerNorm { x, inv_std } => {
                    let y = &node.value;
                    let n = y.len() as f64;
                    let g_mean = g.iter().sum::<f64>() / n;
                    let gy_mean = g.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
                    send(*x, &mut |s| {
                        for ((d, gi), yi) in s.iter_mut().zip(&g).zip(y) {
                            *d += inv_std * (gi - g_mean - yi * gy_mean);
                        }
                    });
                }
                Op::Linear { x, w, b } => {
                    let xv = value_of(self.store, &self.nodes, *x);
                    let wv = value_of(self.store, &self.nodes, *w);
                    let inp = xv.len();
                    send(*w, &mut |s| {
                        for (o, gy) in g.iter().enumerate() {
                            if *gy != 0.0 {
                                for (d, xi) in s[o * inp..(o + 1) * inp].iter_mut().zip(xv) {
                                    *d += gy * xi;
                                }
                            }
                        }
                    });
                    send(*x, &mut |s| {
                        for (o, gy) in g.iter().enumerate() {
                            if *gy != 0.0 {
                                for (d, wi) in s.iter_mut().zip(&wv[o * inp..(o + 1) * inp]) {
                                    *d += gy * wi;
                                }
                            }
                        }
                    });
                    if let Some(b) = b {
                        send(*b, &mut |s| s.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    }
                }
                Op::Conv { x, w, b, geom, cols } => {
                    let (o, p, n) = (geom.out_channels, geom.patch(), geom.positions());
                    let gm = ArrayView2::from_shape((o, n), &g).unwrap();
                    send(*b, &mut |s| {
                        for (c, ch) in g.chunks(n).enumerate() {
                            s[c] += ch.iter().sum::<f64>();
                        }
                    });
                    send(*w, &mut |s| {
                        let cm = ArrayView2::from_shape((p, n), cols).unwrap();
                        let mut sm = ArrayViewMut2::from_shape((o, p), s).unwrap();
                        general_mat_mul(1.0, &gm, &cm.t(), 1.0, &mut sm);
                    });
                    let wv = value_of(self.store, &self.nodes, *w);
                    send(*x, &mut |s| {
                        let wm = ArrayView2::from_shape((o, p), wv).unwrap();
                        let gcols = wm.t().dot(&gm);
                        let gc = gcols.as_slice().unwrap();
                        geom.for_each_tap(|row, col, off| s[off] += gc[row * n + col]);
                    });
                }
                Op::MeanPool(x) => {
                    let c = node.shape[0];
                    send(*x, &mut |s| {
                        let m = s.len() / c;
                        for (ch, gy) in s.chunks_mut(m).zip(&g) {
                            ch.iter_mut().for_each(|d| *d += gy / m as f64);
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n: usize = self.nodes[p.0].shape.iter().product();
                        send(p, &mut |s| s.iter_mut().zip(&g[off..off + n]).for_each(|(x, y)| *x += y));
                        off += n;
                    }
                }
                Op::Reshape(x) => send(*x, &mut |s| s.iter_mut().zip(&g).for_each(|(a, y)| *a += y)),
                Op::Slice(x, start) => {
                    send(*x, &mut |s| s[*start..*start + g.len()].iter_mut().zip(&g).for_each(|(a, y)| *a += y))
                }
                Op::Dot(a, b) => {
                    let av = value_of(self.store, &self.nodes, *a);
                    let bv = value_of(self.store, &self.nodes, *b);
                    send(*a, &mut |s| s.iter_mut().zip(bv).for_each(|(d, y)| *d += g[0] * y));
                    send(*b, &mut |s| s.iter_mut().zip(av).for_each(|(d, y)| *d += g[0] * y));
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let gy_dot_y: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    send(*x, &mut |s| {
                        for ((d, gy), yv) in s.iter_mut().zip(&g).zip(y) {
                            *d += yv * (gy - gy_dot_y);
                        }
                    });
                }
                Op::WeightedSum { weights, values } => {
                    let wv = value_of(self.store, &self.nodes, *weights).to_vec();
                    let vals: Vec<Vec<f64>> = values.iter().map(|&v| value_of(self.store, &self.nodes, v).to_vec()).collect();
                    send(*weights, &mut |s| {
                        for (d, v) in s.iter_mut().zip(&vals) {
                            *d += v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
                        }
                    });
                    for (&v, a) in values.iter().zip(&wv) {
                        send(v, &mut |s| s.iter_mut().zip(&g).for_each(|(d, y)| *d += a * y));
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    label,
                    probs,
                    clamped,
                } => {
                    if !clamped {
                        send(*logits, &mut |s| {
                            for (j, (d, p)) in s.iter_mut().zip(probs).enumerate() {
                                *d += g[0] * (p - if j == *label { 1.0 } else { 0.0 });
                            }
                        });
                    }
                }
                Op::Mse { pred, target } => {
                    let pv = value_of(self.store, &self.nodes, *pred);
                    let n = target.len() as f64;
                    send(*pred, &mut |s| {
                        for ((d, p), t) in s.iter_mut().zip(pv).zip(target) {
                            *d += g[0] * 2.0 * (p - t) / n;
                        }
                    });
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        send(p, &mut |s| s.iter_mut().for_each(|d| *d += g[0]));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn value_of<'a>(store: &'a ParameterStore, nodes: &'a [Node], v: Var) -> &'a [f64] {
    match nodes[v.0].op {
        Op::Param(id) => &store.get(id).tensor.data,
        _ => &nodes[v.0].value,
    }
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
