//! Direct 2-D convolution / transposed convolution kernels (NCHW, zero
//! padding). Forward and all backward passes are gather-style: every
//! output element is produced by one ordered inner loop, so the parallel
//! and sequential modes agree bitwise.

use crate::nn::tensor::Tensor;
use crate::parallel;

pub fn conv2d_out_shape(
    in_h: usize,
    in_w: usize,
    k_h: usize,
    k_w: usize,
    stride: usize,
    pad: usize,
) -> (usize, usize) {
    (
        (in_h + 2 * pad - k_h) / stride + 1,
        (in_w + 2 * pad - k_w) / stride + 1,
    )
}

/// `x`: [N, Cin, H, W]; `w`: [Cout, Cin, Kh, Kw]; `b`: [Cout].
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
    conv2d_forward_mode(x, w, b, stride, pad, cfg!(feature = "parallel"))
}

#[doc(hidden)]
pub fn conv2d_forward_mode(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
    pad: usize,
    par: bool,
) -> Tensor {
    let (n, cin, ih, iw) = x.dims4();
    let ws = w.shape();
    assert_eq!(ws.len(), 4);
    let (cout, wcin, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    assert_eq!(cin, wcin, "conv2d channel mismatch");
    assert_eq!(b.numel(), cout);
    assert!(ih + 2 * pad >= kh && iw + 2 * pad >= kw);
    let (ho, wo) = conv2d_out_shape(ih, iw, kh, kw, stride, pad);

    let xs = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![0.0; n * cout * ho * wo];
    parallel::fill_chunks_mode(
        &mut out,
        ho * wo,
        |idx, slice| {
            let ni = idx / cout;
            let co = idx % cout;
            slice.fill(bd[co]);
            for ci in 0..cin {
                let xplane = &xs[(ni * cin + ci) * ih * iw..(ni * cin + ci + 1) * ih * iw];
                let wbase = &wd[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                for dy in 0..kh {
                    let wrow = &wbase[dy * kw..(dy + 1) * kw];
                    for oh in 0..ho {
                        let iy = (oh * stride + dy) as isize - pad as isize;
                        if iy < 0 || iy >= ih as isize {
                            continue;
                        }
                        let xrow = &xplane[iy as usize * iw..(iy as usize + 1) * iw];
                        let orow = &mut slice[oh * wo..(oh + 1) * wo];
                        for (ow, o) in orow.iter_mut().enumerate() {
                            let ix0 = (ow * stride) as isize - pad as isize;
                            let lo = (-ix0).max(0) as usize;
                            let hi = ((iw as isize - ix0).min(kw as isize)).max(0) as usize;
                            let mut acc = 0.0;
                            for dx in lo..hi {
                                acc += wrow[dx] * xrow[(ix0 + dx as isize) as usize];
                            }
                            *o += acc;
                        }
                    }
                }
            }
        },
        par,
    );
    Tensor::from_vec(&[n, cout, ho, wo], out).unwrap()
}

pub fn conv2d_backward_input(
    g: &Tensor,
    w: &Tensor,
    in_shape: (usize, usize, usize, usize),
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, cin, ih, iw) = in_shape;
    let (gn, cout, ho, wo) = g.dims4();
    assert_eq!(gn, n);
    let ws = w.shape();
    let (kh, kw) = (ws[2], ws[3]);
    let gd = g.data();
    let wd = w.data();
    let mut out = vec![0.0; n * cin * ih * iw];
    parallel::fill_chunks(&mut out, ih * iw, |idx, slice| {
        let ni = idx / cin;
        let ci = idx % cin;
        for iy in 0..ih {
            for ix in 0..iw {
                let mut acc = 0.0;
                for co in 0..cout {
                    let gplane = &gd[(ni * cout + co) * ho * wo..(ni * cout + co + 1) * ho * wo];
                    let wbase = &wd[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                    for dy in 0..kh {
                        let t = iy as isize + pad as isize - dy as isize;
                        if t < 0 || t % stride as isize != 0 {
                            continue;
                        }
                        let oh = (t / stride as isize) as usize;
                        if oh >= ho {
                            continue;
                        }
                        for dx in 0..kw {
                            let u = ix as isize + pad as isize - dx as isize;
                            if u < 0 || u % stride as isize != 0 {
                                continue;
                            }
                            let ow = (u / stride as isize) as usize;
                            if ow >= wo {
                                continue;
                            }
                            acc += wbase[dy * kw + dx] * gplane[oh * wo + ow];
                        }
                    }
                }
                slice[iy * iw + ix] = acc;
            }
        }
    });
    Tensor::from_vec(&[n, cin, ih, iw], out).unwrap()
}

pub fn conv2d_backward_weight(
    g: &Tensor,
    x: &Tensor,
    k_h: usize,
    k_w: usize,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, cin, ih, iw) = x.dims4();
    let (_, cout, ho, wo) = g.dims4();
    let gd = g.data();
    let xs = x.data();
    let mut out = vec![0.0; cout * cin * k_h * k_w];
    parallel::fill_chunks(&mut out, k_h * k_w, |idx, slice| {
        let co = idx / cin;
        let ci = idx % cin;
        for dy in 0..k_h {
            for dx in 0..k_w {
                let mut acc = 0.0;
                for ni in 0..n {
                    let gplane = &gd[(ni * cout + co) * ho * wo..(ni * cout + co + 1) * ho * wo];
                    let xplane = &xs[(ni * cin + ci) * ih * iw..(ni * cin + ci + 1) * ih * iw];
                    for oh in 0..ho {
                        let iy = (oh * stride + dy) as isize - pad as isize;
                        if iy < 0 || iy >= ih as isize {
                            continue;
                        }
                        let xrow = &xplane[iy as usize * iw..(iy as usize + 1) * iw];
                        let grow = &gplane[oh * wo..(oh + 1) * wo];
                        for (ow, gv) in grow.iter().enumerate() {
                            let ix = (ow * stride + dx) as isize - pad as isize;
                            if ix >= 0 && ix < iw as isize {
                                acc += gv * xrow[ix as usize];
                            }
                        }
                    }
                }
                slice[dy * k_w + dx] = acc;
            }
        }
    });
    Tensor::from_vec(&[cout, cin, k_h, k_w], out).unwrap()
}

pub fn conv2d_backward_bias(g: &Tensor) -> Tensor {
    let (n, cout, ho, wo) = g.dims4();
    let gd = g.data();
    let out = parallel::map_indexed(cout, |co| {
        let mut acc = 0.0;
        for ni in 0..n {
            let plane = &gd[(ni * cout + co) * ho * wo..(ni * cout + co + 1) * ho * wo];
            for v in plane {
                acc += v;
            }
        }
        acc
    });
    Tensor::from_vec(&[cout], out).unwrap()
}

/// Transposed convolution. `x`: [N, Cin, H, W]; `w`: [Cin, Cout, Kh, Kw].
/// Output spatial size is `(in - 1) * stride - 2 * pad + k`.
pub fn conv_transpose2d_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, cin, ih, iw) = x.dims4();
    let ws = w.shape();
    let (wcin, cout, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    assert_eq!(cin, wcin, "conv_transpose2d channel mismatch");
    assert_eq!(b.numel(), cout);
    let oh = (ih - 1) * stride + kh - 2 * pad;
    let ow = (iw - 1) * stride + kw - 2 * pad;
    let xs = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![0.0; n * cout * oh * ow];
    parallel::fill_chunks(&mut out, oh * ow, |idx, slice| {
        let ni = idx / cout;
        let co = idx % cout;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bd[co];
                for ci in 0..cin {
                    let xplane = &xs[(ni * cin + ci) * ih * iw..(ni * cin + ci + 1) * ih * iw];
                    let wbase = &wd[(ci * cout + co) * kh * kw..(ci * cout + co + 1) * kh * kw];
                    for dy in 0..kh {
                        let t = oy as isize + pad as isize - dy as isize;
                        if t < 0 || t % stride as isize != 0 {
                            continue;
                        }
                        let iy = (t / stride as isize) as usize;
                        if iy >= ih {
                            continue;
                        }
                        for dx in 0..kw {
                            let u = ox as isize + pad as isize - dx as isize;
                            if u < 0 || u % stride as isize != 0 {
                                continue;
                            }
                            let ix = (u / stride as isize) as usize;
                            if ix >= iw {
                                continue;
                            }
                            acc += wbase[dy * kw + dx] * xplane[iy * iw + ix];
                        }
                    }
                }
                slice[oy * ow + ox] = acc;
            }
        }
    });
    Tensor::from_vec(&[n, cout, oh, ow], out).unwrap()
}

pub fn conv_transpose2d_backward_input(
    g: &Tensor,
    w: &Tensor,
    in_shape: (usize, usize, usize, usize),
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, cin, ih, iw) = in_shape;
    let (_, cout, oh, ow) = g.dims4();
    let ws = w.shape();
    let (kh, kw) = (ws[2], ws[3]);
    let gd = g.data();
    let wd = w.data();
    let mut out = vec![0.0; n * cin * ih * iw];
    parallel::fill_chunks(&mut out, ih * iw, |idx, slice| {
        let ni = idx / cin;
        let ci = idx % cin;
        for iy in 0..ih {
            for ix in 0..iw {
                let mut acc = 0.0;
                for co in 0..cout {
                    let gplane = &gd[(ni * cout + co) * oh * ow..(ni * cout + co + 1) * oh * ow];
                    let wbase = &wd[(ci * cout + co) * kh * kw..(ci * cout + co + 1) * kh * kw];
                    for dy in 0..kh {
                        let oy = (iy * stride + dy) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        for dx in 0..kw {
                            let ox = (ix * stride + dx) as isize - pad as isize;
                            if ox >= 0 && ox < ow as isize {
                                acc += wbase[dy * kw + dx]
                                    * gplane[oy as usize * ow + ox as usize];
                            }
                        }
                    }
                }
                slice[iy * iw + ix] = acc;
            }
        }
    });
    Tensor::from_vec(&[n, cin, ih, iw], out).unwrap()
}

pub fn conv_transpose2d_backward_weight(
    g: &Tensor,
    x: &Tensor,
    k_h: usize,
    k_w: usize,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, cin, ih, iw) = x.dims4();
    let (_, cout, oh, ow) = g.dims4();
    let gd = g.data();
    let xs = x.data();
    let mut out = vec![0.0; cin * cout * k_h * k_w];
    parallel::fill_chunks(&mut out, k_h * k_w, |idx, slice| {
        let ci = idx / cout;
        let co = idx % cout;
        for dy in 0..k_h {
            for dx in 0..k_w {
                let mut acc = 0.0;
                for ni in 0..n {
                    let gplane = &gd[(ni * cout + co) * oh * ow..(ni * cout + co + 1) * oh * ow];
                    let xplane = &xs[(ni * cin + ci) * ih * iw..(ni * cin + ci + 1) * ih * iw];
                    for iy in 0..ih {
                        let oy = (iy * stride + dy) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        let grow = &gplane[oy as usize * ow..(oy as usize + 1) * ow];
                        let xrow = &xplane[iy * iw..(iy + 1) * iw];
                        for ix in 0..iw {
                            let ox = (ix * stride + dx) as isize - pad as isize;
                            if ox >= 0 && ox < ow as isize {
                                acc += xrow[ix] * grow[ox as usize];
                            }
                        }
                    }
                }
                slice[dy * k_w + dx] = acc;
            }
        }
    });
    Tensor::from_vec(&[cin, cout, k_h, k_w], out).unwrap()
}
