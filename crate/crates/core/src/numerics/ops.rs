//! Differentiable tensor operations.
//!
//! Every op computes its forward value eagerly and, when an operand tracks
//! gradients, records a closure producing the vector-Jacobian product for
//! each operand.

use super::float::Float;
use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Trailing-dimension broadcast of two shapes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `src` viewed in `out`'s index space; broadcast axes get 0.
fn broadcast_strides(src: &[usize], out: &[usize]) -> Vec<usize> {
    let offset = out.len() - src.len();
    let s = strides(src);
    (0..out.len())
        .map(|i| {
            if i < offset || src[i - offset] == 1 {
                0
            } else {
                s[i - offset]
            }
        })
        .collect()
}

/// Visits every index of `shape`, passing the source offsets for each of the
/// given stride sets.
fn for_each_offset<const K: usize>(
    shape: &[usize],
    st: [&[usize]; K],
    mut f: impl FnMut([usize; K]),
) {
    let n = numel(shape);
    let mut idx = vec![0usize; shape.len()];
    let mut off = [0usize; K];
    for _ in 0..n {
        f(off);
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            for k in 0..K {
                off[k] += st[k][d];
            }
            if idx[d] < shape[d] {
                break;
            }
            for k in 0..K {
                off[k] -= st[k][d] * shape[d];
            }
            idx[d] = 0;
        }
    }
}

fn binary<F: Float>(
    op: &'static str,
    a: &Tensor<F>,
    b: &Tensor<F>,
    f: impl Fn(F, F) -> F,
    grad: impl Fn(F, F, F) -> (F, F) + Send + Sync + 'static,
) -> Result<Tensor<F>> {
    let out_shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| {
        Error::shape(
            op,
            format!("{:?} and {:?} do not broadcast", a.shape(), b.shape()),
        )
    })?;
    let data = if a.shape() == b.shape() {
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
    } else {
        let sa = broadcast_strides(a.shape(), &out_shape);
        let sb = broadcast_strides(b.shape(), &out_shape);
        let (ad, bd) = (a.data(), b.data());
        let mut out = Vec::with_capacity(numel(&out_shape));
        for_each_offset(&out_shape, [&sa, &sb], |[ia, ib]| out.push(f(ad[ia], bd[ib])));
        out
    };
    let shape = out_shape.clone();
    Ok(Tensor::from_op(
        data,
        out_shape,
        vec![a.clone(), b.clone()],
        Box::new(move |g, _, p| {
            let (a, b) = (&p[0], &p[1]);
            let sa = broadcast_strides(a.shape(), &shape);
            let sb = broadcast_strides(b.shape(), &shape);
            let mut ga = vec![F::zero(); a.numel()];
            let mut gb = vec![F::zero(); b.numel()];
            let (ad, bd) = (a.data(), b.data());
            let mut i = 0;
            for_each_offset(&shape, [&sa, &sb], |[ia, ib]| {
                let (da, db) = grad(ad[ia], bd[ib], g[i]);
                ga[ia] = ga[ia] + da;
                gb[ib] = gb[ib] + db;
                i += 1;
            });
            vec![ga, gb]
        }),
    ))
}

fn unary<F: Float>(
    x: &Tensor<F>,
    f: impl Fn(F) -> F,
    // (input, output, upstream) -> downstream
    grad: impl Fn(F, F, F) -> F + Send + Sync + 'static,
) -> Tensor<F> {
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_op(
        data,
        x.shape().to_vec(),
        vec![x.clone()],
        Box::new(move |g, out, p| {
            vec![p[0]
                .data()
                .iter()
                .zip(out)
                .zip(g)
                .map(|((&x, &y), &g)| grad(x, y, g))
                .collect()]
        }),
    )
}

fn check_axis(op: &'static str, axis: usize, rank: usize) -> Result<()> {
    if axis >= rank {
        Err(Error::Axis { op, axis, rank })
    } else {
        Ok(())
    }
}

/// `(outer, len, inner)` decomposition around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    )
}

/// Plain row-major GEMM accumulate: `c[m,n] += a[m,k] * b[k,n]`, with optional
/// transposition of either operand.
#[allow(clippy::too_many_arguments)]
fn gemm_acc<F: Float>(
    a: &[F],
    b: &[F],
    c: &mut [F],
    m: usize,
    k: usize,
    n: usize,
    trans_a: bool,
    trans_b: bool,
) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = if trans_a { a[p * m + i] } else { a[i * k + p] };
            if av == F::zero() {
                continue;
            }
            if trans_b {
                for (j, cv) in crow.iter_mut().enumerate() {
                    *cv = *cv + av * b[j * k + p];
                }
            } else {
                let brow = &b[p * n..(p + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv = *cv + av * bv;
                }
            }
        }
    }
}

/// Pairs of (a matrix index, b matrix index) for every broadcast batch index.
fn batch_pairs(a_batch: &[usize], b_batch: &[usize], out_batch: &[usize]) -> Vec<(usize, usize)> {
    let sa = broadcast_strides(a_batch, out_batch);
    let sb = broadcast_strides(b_batch, out_batch);
    let mut pairs = Vec::with_capacity(numel(out_batch));
    for_each_offset(out_batch, [&sa, &sb], |[ia, ib]| pairs.push((ia, ib)));
    pairs
}

impl<F: Float> Tensor<F> {
    pub fn add(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        binary("add", self, other, |a, b| a + b, |_, _, g| (g, g))
    }

    pub fn sub(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        binary("sub", self, other, |a, b| a - b, |_, _, g| (g, -g))
    }

    pub fn mul(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        binary("mul", self, other, |a, b| a * b, |a, b, g| (g * b, g * a))
    }

    pub fn div(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        binary(
            "div",
            self,
            other,
            |a, b| a / b,
            |a, b, g| (g / b, -g * a / (b * b)),
        )
    }

    pub fn add_scalar(&self, s: F) -> Tensor<F> {
        unary(self, |x| x + s, |_, _, g| g)
    }

    pub fn mul_scalar(&self, s: F) -> Tensor<F> {
        unary(self, |x| x * s, move |_, _, g| g * s)
    }

    pub fn neg(&self) -> Tensor<F> {
        unary(self, |x| -x, |_, _, g| -g)
    }

    pub fn relu(&self) -> Tensor<F> {
        unary(
            self,
            |x| if x < F::zero() { F::zero() } else { x },
            |x, _, g| if x > F::zero() { g } else { F::zero() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<F> {
        unary(
            self,
            |x| F::one() / (F::one() + (-x).exp()),
            |_, y, g| g * y * (F::one() - y),
        )
    }

    pub fn sqrt(&self) -> Tensor<F> {
        unary(self, |x| x.sqrt(), |_, y, g| g / (y + y))
    }

    pub fn exp(&self) -> Tensor<F> {
        unary(self, |x| x.exp(), |_, y, g| g * y)
    }

    pub fn ln(&self) -> Tensor<F> {
        unary(self, |x| x.ln(), |x, _, g| g / x)
    }

    pub fn square(&self) -> Tensor<F> {
        unary(self, |x| x * x, |x, _, g| g * (x + x))
    }

    /// Batched matrix product over the last two axes; leading axes broadcast.
    pub fn matmul(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::shape(
                "matmul",
                format!("operands must be at least 2-D, got {sa:?} and {sb:?}"),
            ));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("inner dimensions differ: {sa:?} x {sb:?}"),
            ));
        }
        let (ba, bb) = (&sa[..sa.len() - 2], &sb[..sb.len() - 2]);
        let out_batch = broadcast_shape(ba, bb).ok_or_else(|| {
            Error::shape(
                "matmul",
                format!("batch axes {ba:?} and {bb:?} do not broadcast"),
            )
        })?;
        let pairs = batch_pairs(ba, bb, &out_batch);
        let mut data = vec![F::zero(); pairs.len() * m * n];
        for (o, &(ia, ib)) in pairs.iter().enumerate() {
            gemm_acc(
                &self.data()[ia * m * k..(ia + 1) * m * k],
                &other.data()[ib * k * n..(ib + 1) * k * n],
                &mut data[o * m * n..(o + 1) * m * n],
                m,
                k,
                n,
                false,
                false,
            );
        }
        let mut shape = out_batch;
        shape.extend([m, n]);
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, p| {
                let (a, b) = (p[0].data(), p[1].data());
                let mut ga = vec![F::zero(); a.len()];
                let mut gb = vec![F::zero(); b.len()];
                for (o, &(ia, ib)) in pairs.iter().enumerate() {
                    let go = &g[o * m * n..(o + 1) * m * n];
                    // dA = dC . B^T, dB = A^T . dC
                    gemm_acc(
                        go,
                        &b[ib * k * n..(ib + 1) * k * n],
                        &mut ga[ia * m * k..(ia + 1) * m * k],
                        m,
                        n,
                        k,
                        false,
                        true,
                    );
                    gemm_acc(
                        &a[ia * m * k..(ia + 1) * m * k],
                        go,
                        &mut gb[ib * k * n..(ib + 1) * k * n],
                        k,
                        m,
                        n,
                        true,
                        false,
                    );
                }
                vec![ga, gb]
            }),
        ))
    }

    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor<F>> {
        check_axis("sum", axis, self.rank())?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        let x = self.data();
        let mut data = vec![F::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &x[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (d, &v) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d = *d + v;
                }
            }
        }
        let shape = reduced_shape(self.shape(), axis, keepdim);
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    for _ in 0..len {
                        gx.extend_from_slice(&g[o * inner..(o + 1) * inner]);
                    }
                }
                vec![gx]
            }),
        ))
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor<F>> {
        check_axis("mean", axis, self.rank())?;
        let len = F::of(self.shape()[axis] as f64);
        Ok(self.sum_axis(axis, keepdim)?.mul_scalar(F::one() / len))
    }

    /// Maximum along `axis`; the gradient goes to the first maximal element.
    pub fn max_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor<F>> {
        check_axis("max", axis, self.rank())?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        let x = self.data();
        let mut data = vec![F::zero(); outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut best = x[o * len * inner + i];
                let mut at = 0;
                for l in 1..len {
                    let v = x[(o * len + l) * inner + i];
                    if v > best {
                        best = v;
                        at = l;
                    }
                }
                data[o * inner + i] = best;
                arg[o * inner + i] = at;
            }
        }
        let shape = reduced_shape(self.shape(), axis, keepdim);
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![F::zero(); outer * len * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let j = o * inner + i;
                        gx[(o * len + arg[j]) * inner + i] = g[j];
                    }
                }
                vec![gx]
            }),
        ))
    }

    pub fn sum_all(&self) -> Tensor<F> {
        let total = self.data().iter().copied().sum();
        let n = self.numel();
        Tensor::from_op(
            vec![total],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |g, _, _| vec![vec![g[0]; n]]),
        )
    }

    pub fn mean_all(&self) -> Tensor<F> {
        let n = F::of(self.numel() as f64);
        self.sum_all().mul_scalar(F::one() / n)
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<F>> {
        check_axis("softmax", axis, self.rank())?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        let x = self.data();
        let mut data = vec![F::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| x[at(l)]).fold(F::neg_infinity(), F::max);
                let mut z = F::zero();
                for l in 0..len {
                    let e = (x[at(l)] - max).exp();
                    data[at(l)] = e;
                    z = z + e;
                }
                for l in 0..len {
                    data[at(l)] = data[at(l)] / z;
                }
            }
        }
        Ok(Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g, y, _| {
                let mut gx = vec![F::zero(); y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |l: usize| (o * len + l) * inner + i;
                        let dot: F = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                        for l in 0..len {
                            gx[at(l)] = y[at(l)] * (g[at(l)] - dot);
                        }
                    }
                }
                vec![gx]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<F>> {
        if numel(shape) != self.numel() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape()),
            ));
        }
        Ok(Tensor::from_op(
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|g, _, _| vec![g.to_vec()]),
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor<F>> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::shape(
                "permute",
                format!("{axes:?} is not a permutation of {rank} axes"),
            ));
        }
        let in_strides = strides(self.shape());
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape()[a]).collect();
        let gather: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let x = self.data();
        let mut data = Vec::with_capacity(x.len());
        for_each_offset(&out_shape, [&gather], |[i]| data.push(x[i]));
        let shape = out_shape.clone();
        Ok(Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |g, _, p| {
                let mut gx = vec![F::zero(); p[0].numel()];
                let mut o = 0;
                for_each_offset(&shape, [&gather], |[i]| {
                    gx[i] = g[o];
                    o += 1;
                });
                vec![gx]
            }),
        ))
    }

    pub fn transpose(&self, a: usize, b: usize) -> Result<Tensor<F>> {
        check_axis("transpose", a.max(b), self.rank())?;
        let mut axes: Vec<usize> = (0..self.rank()).collect();
        axes.swap(a, b);
        self.permute(&axes)
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor<F>], axis: usize) -> Result<Tensor<F>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no tensors given"))?;
        check_axis("concat", axis, first.rank())?;
        for p in parts {
            let same_rank = p.rank() == first.rank();
            if !same_rank
                || (0..first.rank()).any(|d| d != axis && p.shape()[d] != first.shape()[d])
            {
                return Err(Error::shape(
                    "concat",
                    format!(
                        "{:?} does not match {:?} off axis {axis}",
                        p.shape(),
                        first.shape()
                    ),
                ));
            }
        }
        let outer = numel(&first.shape()[..axis]);
        let inner = numel(&first.shape()[axis + 1..]);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &l) in parts.iter().zip(&lens) {
                data.extend_from_slice(&p.data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        Ok(Tensor::from_op(
            data,
            shape,
            parts.to_vec(),
            Box::new(move |g, _, _| {
                let mut grads: Vec<Vec<F>> =
                    lens.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
                let mut at = 0;
                for _ in 0..outer {
                    for (gp, &l) in grads.iter_mut().zip(&lens) {
                        gp.extend_from_slice(&g[at..at + l * inner]);
                        at += l * inner;
                    }
                }
                grads
            }),
        ))
    }

    /// Zero-pads `axis` with `before` and `after` entries.
    pub fn pad(&self, axis: usize, before: usize, after: usize) -> Result<Tensor<F>> {
        check_axis("pad", axis, self.rank())?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        let new_len = before + len + after;
        let mut data = vec![F::zero(); outer * new_len * inner];
        let x = self.data();
        for o in 0..outer {
            data[(o * new_len + before) * inner..(o * new_len + before + len) * inner]
                .copy_from_slice(&x[o * len * inner..(o + 1) * len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = new_len;
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    gx.extend_from_slice(
                        &g[(o * new_len + before) * inner..(o * new_len + before + len) * inner],
                    );
                }
                vec![gx]
            }),
        ))
    }

    /// Gathers entries `indices` of `axis` (repeats allowed).
    pub fn index_select(&self, axis: usize, indices: &[usize]) -> Result<Tensor<F>> {
        check_axis("index_select", axis, self.rank())?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        if indices.is_empty() {
            return Err(Error::shape("index_select", "empty index list"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::shape(
                "index_select",
                format!("index {bad} out of range for extent {len}"),
            ));
        }
        let x = self.data();
        let mut data = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                data.extend_from_slice(&x[(o * len + i) * inner..(o * len + i + 1) * inner]);
            }
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = indices.len();
        let indices = indices.to_vec();
        Ok(Tensor::from_op(
            data,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![F::zero(); outer * len * inner];
                let mut at = 0;
                for o in 0..outer {
                    for &i in &indices {
                        let dst = &mut gx[(o * len + i) * inner..(o * len + i + 1) * inner];
                        for (d, &v) in dst.iter_mut().zip(&g[at..at + inner]) {
                            *d = *d + v;
                        }
                        at += inner;
                    }
                }
                vec![gx]
            }),
        ))
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<F>> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.index_select(axis, &idx)
    }

    /// Convolution along axis 2 of a `(B, C_in, T, N)` tensor with a
    /// `(C_out, C_in, K)` kernel, zero padding `pad` on both ends of time.
    pub fn conv_time(&self, kernel: &Tensor<F>, stride: usize, pad: usize) -> Result<Tensor<F>> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 4 || ks.len() != 3 || xs[1] != ks[1] {
            return Err(Error::shape(
                "conv_time",
                format!("input {xs:?} and kernel {ks:?} are not (B,C_in,T,N) / (C_out,C_in,K)"),
            ));
        }
        if stride == 0 {
            return Err(Error::shape("conv_time", "stride must be positive"));
        }
        let (b, cin, t, n) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, kt) = (ks[0], ks[2]);
        if t + 2 * pad < kt {
            return Err(Error::shape(
                "conv_time",
                format!("{t} frames with padding {pad} are shorter than kernel width {kt}"),
            ));
        }
        let t_out = (t + 2 * pad - kt) / stride + 1;
        let geom = ConvGeom {
            b,
            cin,
            cout,
            t,
            t_out,
            n,
            kt,
            stride,
            pad,
        };
        let mut data = vec![F::zero(); b * cout * t_out * n];
        geom.forward(self.data(), kernel.data(), &mut data);
        Ok(Tensor::from_op(
            data,
            vec![b, cout, t_out, n],
            vec![self.clone(), kernel.clone()],
            Box::new(move |g, _, p| {
                let mut gx = vec![F::zero(); p[0].numel()];
                let mut gk = vec![F::zero(); p[1].numel()];
                geom.backward(p[0].data(), p[1].data(), g, &mut gx, &mut gk);
                vec![gx, gk]
            }),
        ))
    }

    /// Mean negative log-likelihood of `labels` under row-stochastic `(B, K)`
    /// probabilities, with probabilities clamped below at 1e-12.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor<F>> {
        let s = self.shape();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("probabilities {s:?} vs {} labels", labels.len()),
            ));
        }
        let (b, k) = (s[0], s[1]);
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Label {
                label,
                num_classes: k,
            });
        }
        let floor = F::of(1e-12);
        let p = self.data();
        let total: F = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let v = p[i * k + l];
                // NaN must survive the clamp so divergence stays visible
                -(if v < floor { floor } else { v }).ln()
            })
            .sum();
        let labels = labels.to_vec();
        let bf = F::of(b as f64);
        Ok(Tensor::from_op(
            vec![total / bf],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |g, _, parents| {
                let p = parents[0].data();
                let mut gp = vec![F::zero(); p.len()];
                for (i, &l) in labels.iter().enumerate() {
                    let v = p[i * k + l];
                    if v >= floor {
                        gp[i * k + l] = -g[0] / (bf * v);
                    }
                }
                vec![gp]
            }),
        ))
    }
}

fn reduced_shape(shape: &[usize], axis: usize, keepdim: bool) -> Vec<usize> {
    let mut s = shape.to_vec();
    if keepdim {
        s[axis] = 1;
    } else {
        s.remove(axis);
    }
    s
}

#[derive(Clone, Copy)]
struct ConvGeom {
    b: usize,
    cin: usize,
    cout: usize,
    t: usize,
    t_out: usize,
    n: usize,
    kt: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    /// Input frame feeding output frame `to` through tap `k`, if not padding.
    fn src(&self, to: usize, k: usize) -> Option<usize> {
        (to * self.stride + k).checked_sub(self.pad).filter(|&s| s < self.t)
    }

    fn forward<F: Float>(&self, x: &[F], w: &[F], out: &mut [F]) {
        let &ConvGeom { b, cin, cout, t, t_out, n, kt, .. } = self;
        for bi in 0..b {
            for o in 0..cout {
                let dst = &mut out[(bi * cout + o) * t_out * n..(bi * cout + o + 1) * t_out * n];
                for i in 0..cin {
                    let xin = &x[(bi * cin + i) * t * n..(bi * cin + i + 1) * t * n];
                    for k in 0..kt {
                        let wv = w[(o * cin + i) * kt + k];
                        for to in 0..t_out {
                            if let Some(s) = self.src(to, k) {
                                let row = &mut dst[to * n..(to + 1) * n];
                                for (d, &v) in row.iter_mut().zip(&xin[s * n..(s + 1) * n]) {
                                    *d = *d + wv * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn backward<F: Float>(&self, x: &[F], w: &[F], g: &[F], gx: &mut [F], gw: &mut [F]) {
        let &ConvGeom { b, cin, cout, t, t_out, n, kt, .. } = self;
        for bi in 0..b {
            for o in 0..cout {
                let gout = &g[(bi * cout + o) * t_out * n..(bi * cout + o + 1) * t_out * n];
                for i in 0..cin {
                    let base = (bi * cin + i) * t * n;
                    for k in 0..kt {
                        let wi = (o * cin + i) * kt + k;
                        let wv = w[wi];
                        let mut acc = F::zero();
                        for to in 0..t_out {
                            if let Some(s) = self.src(to, k) {
                                let grow = &gout[to * n..(to + 1) * n];
                                let xs = &x[base + s * n..base + (s + 1) * n];
                                let gxs = &mut gx[base + s * n..base + (s + 1) * n];
                                for j in 0..n {
                                    acc = acc + grow[j] * xs[j];
                                    gxs[j] = gxs[j] + wv * grow[j];
                                }
                            }
                        }
                        gw[wi] = gw[wi] + acc;
                    }
                }
            }
        }
    }
}
