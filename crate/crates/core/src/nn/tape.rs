//! Reverse-mode autodiff over a flat operation list.
//!
//! `Tape::leaf` registers a differentiable input (parameters, images under
//! test); `Tape::constant` registers data that never needs a gradient
//! (ground truth, frozen parameters, masks). Gradients are only computed
//! along paths that reach a differentiable leaf.

use std::sync::Arc;

use crate::image::LabelMap;
use crate::nn::conv;
use crate::nn::tensor::Tensor;
use crate::parallel;
use crate::resample::Plan2d;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

pub struct GradSink {
    grads: Vec<Option<Tensor>>,
    requires: Vec<bool>,
}

impl GradSink {
    /// Does this node need a gradient at all?
    pub fn wants(&self, id: usize) -> bool {
        self.requires[id]
    }

    pub fn add(&mut self, id: usize, g: Tensor) {
        if !self.requires[id] {
            return;
        }
        match &mut self.grads[id] {
            Some(t) => t.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

type BackFn = Box<dyn Fn(&[Tensor], &Tensor, &mut GradSink) + Send + Sync>;

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    requires: Vec<bool>,
    backs: Vec<Option<BackFn>>,
}

/// Gradients of one backward pass, indexed by `Var`.
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads[v.0].take()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    fn push(&mut self, value: Tensor, requires: bool, back: Option<BackFn>) -> Var {
        self.values.push(value);
        self.requires.push(requires);
        self.backs.push(back);
        Var(self.values.len() - 1)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, true, None)
    }

    /// Non-differentiable data.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, None)
    }

    fn any_requires(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires[v.0])
    }

    /// Backward pass from a scalar root. Returns gradients for every
    /// differentiable leaf reached.
    pub fn backward(&self, root: Var) -> Grads {
        assert_eq!(self.values[root.0].numel(), 1, "backward needs a scalar root");
        let mut sink = GradSink {
            grads: vec![None; self.values.len()],
            requires: self.requires.clone(),
        };
        // the root always gets a seed, even if marked non-differentiable
        sink.requires[root.0] = true;
        sink.add(root.0, Tensor::filled(self.values[root.0].shape(), 1.0));
        for id in (0..=root.0).rev() {
            if sink.grads[id].is_none() {
                continue;
            }
            if let Some(back) = &self.backs[id] {
                let g = sink.grads[id].take().expect("grad present");
                back(&self.values, &g, &mut sink);
            }
        }
        Grads { grads: sink.grads }
    }

    // ---- elementwise and structural ops ----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape());
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let req = self.any_requires(&[a, b]);
        self.push(
            out,
            req,
            Some(Box::new(move |_v, g, sink| {
                if sink.wants(a.0) {
                    sink.add(a.0, g.clone());
                }
                if sink.wants(b.0) {
                    sink.add(b.0, g.clone());
                }
            })),
        )
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v *= k;
        }
        let req = self.requires[a.0];
        self.push(
            out,
            req,
            Some(Box::new(move |_v, g, sink| {
                if sink.wants(a.0) {
                    let mut gg = g.clone();
                    for v in gg.data_mut() {
                        *v *= k;
                    }
                    sink.add(a.0, gg);
                }
            })),
        )
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let req = self.requires[a.0];
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let x = &values[a.0];
                let mut gg = g.clone();
                for (gv, xv) in gg.data_mut().iter_mut().zip(x.data()) {
                    if *xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                sink.add(a.0, gg);
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        let req = self.requires[a.0];
        let id_holder = self.values.len();
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let y = &values[id_holder];
                let mut gg = g.clone();
                for (gv, yv) in gg.data_mut().iter_mut().zip(y.data()) {
                    *gv *= yv * (1.0 - yv);
                }
                sink.add(a.0, gg);
            })),
        )
    }

    /// Concatenate along the channel axis of NCHW tensors.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let (n, _, h, w) = self.value(parts[0]).dims4();
        let mut channels = Vec::with_capacity(parts.len());
        let mut total_c = 0;
        for &p in parts {
            let (pn, pc, ph, pw) = self.value(p).dims4();
            assert!(pn == n && ph == h && pw == w, "concat shape mismatch");
            channels.push(pc);
            total_c += pc;
        }
        let mut out = Tensor::zeros(&[n, total_c, h, w]);
        let plane = h * w;
        {
            let od = out.data_mut();
            let mut c_off = 0;
            for (&p, &pc) in parts.iter().zip(&channels) {
                let pd = self.value(p).data();
                for ni in 0..n {
                    let dst = ((ni * total_c) + c_off) * plane;
                    let src = ni * pc * plane;
                    od[dst..dst + pc * plane].copy_from_slice(&pd[src..src + pc * plane]);
                }
                c_off += pc;
            }
        }
        let parts_v: Vec<Var> = parts.to_vec();
        let req = self.any_requires(parts);
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                let gd = g.data();
                let mut c_off = 0;
                for (&p, &pc) in parts_v.iter().zip(&channels) {
                    if sink.wants(p.0) {
                        let shape = values[p.0].shape().to_vec();
                        let mut gp = Tensor::zeros(&shape);
                        for ni in 0..n {
                            let src = ((ni * total_c) + c_off) * plane;
                            let dst = ni * pc * plane;
                            gp.data_mut()[dst..dst + pc * plane]
                                .copy_from_slice(&gd[src..src + pc * plane]);
                        }
                        sink.add(p.0, gp);
                    }
                    c_off += pc;
                }
            })),
        )
    }

    /// Extract sample `n` of an NCHW batch as a [1, C, H, W] tensor.
    pub fn select_batch(&mut self, a: Var, n: usize) -> Var {
        let (nn, c, h, w) = self.value(a).dims4();
        assert!(n < nn);
        let plane = c * h * w;
        let data = self.value(a).data()[n * plane..(n + 1) * plane].to_vec();
        let out = Tensor::from_vec(&[1, c, h, w], data).unwrap();
        let req = self.requires[a.0];
        self.push(
            out,
            req,
            Some(Box::new(move |_values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let mut gp = Tensor::zeros(&[nn, c, h, w]);
                gp.data_mut()[n * plane..(n + 1) * plane].copy_from_slice(g.data());
                sink.add(a.0, gp);
            })),
        )
    }

    // ---- network ops ----

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let out = conv::conv2d_forward(self.value(x), self.value(w), self.value(b), stride, pad);
        let in_shape = self.value(x).dims4();
        let ws = self.value(w).shape().to_vec();
        let req = self.any_requires(&[x, w, b]);
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                if sink.wants(x.0) {
                    sink.add(
                        x.0,
                        conv::conv2d_backward_input(g, &values[w.0], in_shape, stride, pad),
                    );
                }
                if sink.wants(w.0) {
                    sink.add(
                        w.0,
                        conv::conv2d_backward_weight(g, &values[x.0], ws[2], ws[3], stride, pad),
                    );
                }
                if sink.wants(b.0) {
                    sink.add(b.0, conv::conv2d_backward_bias(g));
                }
            })),
        )
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let out = conv::conv_transpose2d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            pad,
        );
        let in_shape = self.value(x).dims4();
        let ws = self.value(w).shape().to_vec();
        let req = self.any_requires(&[x, w, b]);
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                if sink.wants(x.0) {
                    sink.add(
                        x.0,
                        conv::conv_transpose2d_backward_input(g, &values[w.0], in_shape, stride, pad),
                    );
                }
                if sink.wants(w.0) {
                    sink.add(
                        w.0,
                        conv::conv_transpose2d_backward_weight(
                            g,
                            &values[x.0],
                            ws[2],
                            ws[3],
                            stride,
                            pad,
                        ),
                    );
                }
                if sink.wants(b.0) {
                    sink.add(b.0, conv::conv2d_backward_bias(g));
                }
            })),
        )
    }

    /// Per-pixel softmax over the channel axis.
    pub fn softmax_channels(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let plane = h * w;
        let xd = self.value(a).data();
        let mut out = vec![0.0; xd.len()];
        for ni in 0..n {
            for p in 0..plane {
                let mut mx = f64::NEG_INFINITY;
                for k in 0..c {
                    mx = mx.max(xd[(ni * c + k) * plane + p]);
                }
                let mut sum = 0.0;
                for k in 0..c {
                    let e = (xd[(ni * c + k) * plane + p] - mx).exp();
                    out[(ni * c + k) * plane + p] = e;
                    sum += e;
                }
                for k in 0..c {
                    out[(ni * c + k) * plane + p] /= sum;
                }
            }
        }
        let out = Tensor::from_vec(&[n, c, h, w], out).unwrap();
        let req = self.requires[a.0];
        let out_id = self.values.len();
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let y = values[out_id].data();
                let gd = g.data();
                let mut gx = Tensor::zeros(&[n, c, h, w]);
                let gxd = gx.data_mut();
                for ni in 0..n {
                    for p in 0..plane {
                        let mut dot = 0.0;
                        for k in 0..c {
                            let i = (ni * c + k) * plane + p;
                            dot += gd[i] * y[i];
                        }
                        for k in 0..c {
                            let i = (ni * c + k) * plane + p;
                            gxd[i] = y[i] * (gd[i] - dot);
                        }
                    }
                }
                sink.add(a.0, gx);
            })),
        )
    }

    /// 2x2 average pooling, stride 2 (dims must be even).
    pub fn avg_pool2(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2 needs even dims");
        let (ho, wo) = (h / 2, w / 2);
        let xd = self.value(a).data();
        let mut out = vec![0.0; n * c * ho * wo];
        for nc in 0..n * c {
            let src = &xd[nc * h * w..(nc + 1) * h * w];
            let dst = &mut out[nc * ho * wo..(nc + 1) * ho * wo];
            for oy in 0..ho {
                for ox in 0..wo {
                    dst[oy * wo + ox] = 0.25
                        * (src[2 * oy * w + 2 * ox]
                            + src[2 * oy * w + 2 * ox + 1]
                            + src[(2 * oy + 1) * w + 2 * ox]
                            + src[(2 * oy + 1) * w + 2 * ox + 1]);
                }
            }
        }
        let out = Tensor::from_vec(&[n, c, ho, wo], out).unwrap();
        let req = self.requires[a.0];
        self.push(
            out,
            req,
            Some(Box::new(move |_values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let gd = g.data();
                let mut gx = Tensor::zeros(&[n, c, h, w]);
                let gxd = gx.data_mut();
                for nc in 0..n * c {
                    let src = &gd[nc * ho * wo..(nc + 1) * ho * wo];
                    let dst = &mut gxd[nc * h * w..(nc + 1) * h * w];
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let gv = 0.25 * src[oy * wo + ox];
                            dst[2 * oy * w + 2 * ox] = gv;
                            dst[2 * oy * w + 2 * ox + 1] = gv;
                            dst[(2 * oy + 1) * w + 2 * ox] = gv;
                            dst[(2 * oy + 1) * w + 2 * ox + 1] = gv;
                        }
                    }
                }
                sink.add(a.0, gx);
            })),
        )
    }

    /// [N, C, H, W] -> [N, C] mean over the spatial axes.
    pub fn global_avg_pool(&mut self, a: Var) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let plane = h * w;
        let xd = self.value(a).data();
        let mut out = vec![0.0; n * c];
        for (nc, o) in out.iter_mut().enumerate() {
            *o = xd[nc * plane..(nc + 1) * plane].iter().sum::<f64>() / plane as f64;
        }
        let out = Tensor::from_vec(&[n, c], out).unwrap();
        let req = self.requires[a.0];
        self.push(
            out,
            req,
            Some(Box::new(move |_values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let gd = g.data();
                let mut gx = Tensor::zeros(&[n, c, h, w]);
                for nc in 0..n * c {
                    let gv = gd[nc] / plane as f64;
                    for v in &mut gx.data_mut()[nc * plane..(nc + 1) * plane] {
                        *v = gv;
                    }
                }
                sink.add(a.0, gx);
            })),
        )
    }

    /// [N, C] x [C] + [1] -> [N].
    pub fn affine_vec(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xs = self.value(x).shape().to_vec();
        assert_eq!(xs.len(), 2);
        let (n, c) = (xs[0], xs[1]);
        assert_eq!(self.value(w).numel(), c);
        assert_eq!(self.value(b).numel(), 1);
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let b0 = self.value(b).data()[0];
        let mut out = vec![0.0; n];
        for (ni, o) in out.iter_mut().enumerate() {
            let mut acc = b0;
            for ci in 0..c {
                acc += xd[ni * c + ci] * wd[ci];
            }
            *o = acc;
        }
        let out = Tensor::from_vec(&[n], out).unwrap();
        let req = self.any_requires(&[x, w, b]);
        self.push(
            out,
            req,
            Some(Box::new(move |values, g, sink| {
                let gd = g.data();
                if sink.wants(x.0) {
                    let wd = values[w.0].data();
                    let mut gx = Tensor::zeros(&[n, c]);
                    for ni in 0..n {
                        for ci in 0..c {
                            gx.data_mut()[ni * c + ci] = gd[ni] * wd[ci];
                        }
                    }
                    sink.add(x.0, gx);
                }
                if sink.wants(w.0) {
                    let xd = values[x.0].data();
                    let mut gw = Tensor::zeros(&[c]);
                    for ci in 0..c {
                        let mut acc = 0.0;
                        for ni in 0..n {
                            acc += gd[ni] * xd[ni * c + ci];
                        }
                        gw.data_mut()[ci] = acc;
                    }
                    sink.add(w.0, gw);
                }
                if sink.wants(b.0) {
                    sink.add(b.0, Tensor::from_vec(&[1], vec![gd.iter().sum()]).unwrap());
                }
            })),
        )
    }

    /// Bicubic resampling of every (n, c) plane to `out_h` x `out_w`.
    pub fn resample(&mut self, a: Var, out_h: usize, out_w: usize) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        let plan = Arc::new(Plan2d::new(h, w, out_h, out_w));
        let xd = self.value(a).data();
        let planes = parallel::map_indexed(n * c, |nc| plan.apply_plane(&xd[nc * h * w..(nc + 1) * h * w]));
        let mut out = Vec::with_capacity(n * c * out_h * out_w);
        for p in planes {
            out.extend_from_slice(&p);
        }
        let out = Tensor::from_vec(&[n, c, out_h, out_w], out).unwrap();
        let req = self.requires[a.0];
        let plan_b = plan.clone();
        self.push(
            out,
            req,
            Some(Box::new(move |_values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let gd = g.data();
                let planes = parallel::map_indexed(n * c, |nc| {
                    plan_b.apply_plane_transposed(&gd[nc * out_h * out_w..(nc + 1) * out_h * out_w])
                });
                let mut gx = Vec::with_capacity(n * c * h * w);
                for p in planes {
                    gx.extend_from_slice(&p);
                }
                sink.add(a.0, Tensor::from_vec(&[n, c, h, w], gx).unwrap());
            })),
        )
    }

    pub fn downsample2(&mut self, a: Var) -> Var {
        let (_, _, h, w) = self.value(a).dims4();
        assert!(h % 2 == 0 && w % 2 == 0, "downsample2 needs even dims");
        self.resample(a, h / 2, w / 2)
    }

    pub fn upsample2(&mut self, a: Var) -> Var {
        let (_, _, h, w) = self.value(a).dims4();
        self.resample(a, h * 2, w * 2)
    }

    // ---- loss reductions ----

    /// Mean of |a - b| over all elements.
    pub fn mean_abs_diff(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape());
        let n = self.value(a).numel() as f64;
        let diffs: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs())
            .collect();
        let val = parallel::sum(&diffs) / n;
        let req = self.any_requires(&[a, b]);
        self.push(
            Tensor::scalar(val),
            req,
            Some(Box::new(move |values, g, sink| {
                let g0 = g.data()[0] / n;
                let ad = values[a.0].data();
                let bd = values[b.0].data();
                let sign: Vec<f64> = ad
                    .iter()
                    .zip(bd)
                    .map(|(x, y)| {
                        if x > y {
                            g0
                        } else if x < y {
                            -g0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if sink.wants(a.0) {
                    sink.add(
                        a.0,
                        Tensor::from_vec(values[a.0].shape(), sign.clone()).unwrap(),
                    );
                }
                if sink.wants(b.0) {
                    let neg: Vec<f64> = sign.iter().map(|v| -v).collect();
                    sink.add(b.0, Tensor::from_vec(values[b.0].shape(), neg).unwrap());
                }
            })),
        )
    }

    /// Sum of mask ⊙ |a - b| over all elements; `mask` is an H×W plane
    /// broadcast over batch and channels.
    pub fn masked_sum_abs_diff(&mut self, a: Var, b: Var, mask: Arc<Vec<f64>>) -> Var {
        let (n, c, h, w) = self.value(a).dims4();
        assert_eq!(self.value(a).shape(), self.value(b).shape());
        assert_eq!(mask.len(), h * w);
        let plane = h * w;
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let mut acc = 0.0;
        for nc in 0..n * c {
            for p in 0..plane {
                acc += mask[p] * (ad[nc * plane + p] - bd[nc * plane + p]).abs();
            }
        }
        let req = self.any_requires(&[a, b]);
        let mask_b = mask.clone();
        self.push(
            Tensor::scalar(acc),
            req,
            Some(Box::new(move |values, g, sink| {
                let g0 = g.data()[0];
                let ad = values[a.0].data();
                let bd = values[b.0].data();
                let mut ga = Tensor::zeros(values[a.0].shape());
                for nc in 0..n * c {
                    for p in 0..plane {
                        let i = nc * plane + p;
                        let s = if ad[i] > bd[i] {
                            1.0
                        } else if ad[i] < bd[i] {
                            -1.0
                        } else {
                            0.0
                        };
                        ga.data_mut()[i] = g0 * mask_b[p] * s;
                    }
                }
                if sink.wants(b.0) {
                    let mut gb = ga.clone();
                    for v in gb.data_mut() {
                        *v = -*v;
                    }
                    sink.add(b.0, gb);
                }
                if sink.wants(a.0) {
                    sink.add(a.0, ga);
                }
            })),
        )
    }

    /// Mean over pixels of -log p(true class); probabilities clamped at
    /// `eps` so saturated predictions stay finite.
    pub fn cross_entropy_mean(&mut self, probs: Var, labels: &LabelMap, eps: f64) -> Var {
        let (n, c, h, w) = self.value(probs).dims4();
        assert_eq!(n, 1, "cross_entropy_mean takes one sample; batch via select_batch");
        assert_eq!((labels.height, labels.width), (h, w));
        let plane = h * w;
        let pd = self.value(probs).data();
        let mut acc = 0.0;
        for p in 0..plane {
            let k = labels.classes[p] as usize;
            assert!(k < c, "label {k} out of range for {c} classes");
            acc += -(pd[k * plane + p].max(eps)).ln();
        }
        let val = acc / plane as f64;
        let req = self.requires[probs.0];
        let labels_v = labels.classes.clone();
        self.push(
            Tensor::scalar(val),
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(probs.0) {
                    return;
                }
                let g0 = g.data()[0] / plane as f64;
                let pd = values[probs.0].data();
                let mut gp = Tensor::zeros(&[n, c, h, w]);
                for p in 0..plane {
                    let k = labels_v[p] as usize;
                    let v = pd[k * plane + p];
                    if v > eps {
                        gp.data_mut()[k * plane + p] = -g0 / v;
                    }
                }
                sink.add(probs.0, gp);
            })),
        )
    }

    /// Mean over a vector of -log(max(x, eps)).
    pub fn neg_log_mean(&mut self, a: Var, eps: f64) -> Var {
        let n = self.value(a).numel() as f64;
        let val = self
            .value(a)
            .data()
            .iter()
            .map(|v| -(v.max(eps)).ln())
            .sum::<f64>()
            / n;
        let req = self.requires[a.0];
        self.push(
            Tensor::scalar(val),
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let g0 = g.data()[0] / n;
                let xd = values[a.0].data();
                let gx: Vec<f64> = xd
                    .iter()
                    .map(|v| if *v > eps { -g0 / v } else { 0.0 })
                    .collect();
                sink.add(a.0, Tensor::from_vec(values[a.0].shape(), gx).unwrap());
            })),
        )
    }

    /// Mean over a vector of -log(max(1 - x, eps)).
    pub fn neg_log_one_minus_mean(&mut self, a: Var, eps: f64) -> Var {
        let n = self.value(a).numel() as f64;
        let val = self
            .value(a)
            .data()
            .iter()
            .map(|v| -((1.0 - v).max(eps)).ln())
            .sum::<f64>()
            / n;
        let req = self.requires[a.0];
        self.push(
            Tensor::scalar(val),
            req,
            Some(Box::new(move |values, g, sink| {
                if !sink.wants(a.0) {
                    return;
                }
                let g0 = g.data()[0] / n;
                let xd = values[a.0].data();
                let gx: Vec<f64> = xd
                    .iter()
                    .map(|v| {
                        let r = 1.0 - v;
                        if r > eps {
                            g0 / r
                        } else {
                            0.0
                        }
                    })
                    .collect();
                sink.add(a.0, Tensor::from_vec(values[a.0].shape(), gx).unwrap());
            })),
        )
    }

    /// Ordered weighted sum of scalars: `sum_i w_i * s_i`, accumulated
    /// left to right (the ordering is part of the logged-loss contract).
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut acc = 0.0;
        for &(v, w) in terms {
            assert_eq!(self.value(v).numel(), 1);
            acc += w * self.value(v).item();
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let req = self.any_requires(&vars);
        let terms_v: Vec<(Var, f64)> = terms.to_vec();
        self.push(
            Tensor::scalar(acc),
            req,
            Some(Box::new(move |_values, g, sink| {
                let g0 = g.data()[0];
                for &(v, w) in &terms_v {
                    if sink.wants(v.0) {
                        sink.add(v.0, Tensor::scalar(g0 * w));
                    }
                }
            })),
        )
    }
}
