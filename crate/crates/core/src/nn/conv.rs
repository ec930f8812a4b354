//! Direct convolution and transposed-convolution kernels.
//!
//! Plain loops over contiguous slices, parallelised over disjoint
//! slices only (batch items, output channels) so summation order is
//! fixed and results are independent of the thread count.

use ndarray::{Array1, Array4, ArrayD, Axis, Zip};

use crate::error::{Error, Result};

use super::layer::{as1, LayerSpec, LayerState, Pad2};
use super::tensor::Tensor4;

struct ConvGeometry {
    out_channels: usize,
    filter: usize,
    stride: (usize, usize),
    pad: Pad2,
}

fn geometry(spec: &LayerSpec) -> ConvGeometry {
    match *spec {
        LayerSpec::Conv { out_channels, filter, stride, pad, .. }
        | LayerSpec::Deconv { out_channels, filter, stride, pad, .. } => ConvGeometry {
            out_channels,
            filter,
            stride,
            pad,
        },
        _ => unreachable!("conv kernels called with a non-conv layer"),
    }
}

fn out_dims(spec: &LayerSpec, input: &Tensor4) -> Result<(usize, usize)> {
    let (_, c, h, w) = input.dim();
    let (_, oh, ow) = spec.output_shape((c, h, w))?;
    Ok((oh, ow))
}

pub fn conv_forward(spec: &LayerSpec, state: &LayerState, input: &Tensor4) -> Result<Tensor4> {
    let g = geometry(spec);
    let (b, c, h, w) = input.dim();
    let (oh, ow) = out_dims(spec, input)?;
    let weight = &state.trainable[0];
    let bias = as1(&state.trainable[1]);
    let wslice = weight.as_slice().expect("weights are contiguous");

    let mut out = Array4::zeros((b, g.out_channels, oh, ow));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(input.data().axis_iter(Axis(0)))
        .par_for_each(|mut ob, ib| {
            let xin = ib.as_slice().expect("input is contiguous");
            let os = ob.as_slice_mut().expect("output is contiguous");
            for o in 0..g.out_channels {
                let wbase = o * c * g.filter * g.filter;
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = bias[o];
                        for ci in 0..c {
                            let wrow = wbase + ci * g.filter * g.filter;
                            for p in 0..g.filter {
                                let iy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xrow = (ci * h + iy as usize) * w;
                                for q in 0..g.filter {
                                    let ix = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += xin[xrow + ix as usize]
                                        * wslice[wrow + p * g.filter + q];
                                }
                            }
                        }
                        os[(o * oh + i) * ow + j] = acc;
                    }
                }
            }
        });
    Tensor4::new(out)
}

pub fn conv_backward(
    spec: &LayerSpec,
    state: &LayerState,
    input: &Array4<f64>,
    upstream: &Tensor4,
) -> Result<(Tensor4, Vec<ArrayD<f64>>)> {
    let g = geometry(spec);
    let (b, c, h, w) = input.dim();
    let (_, oc, oh, ow) = upstream.dim();
    if oc != g.out_channels {
        return Err(Error::Shape(format!(
            "conv backward: upstream has {} channels, layer produces {}",
            oc, g.out_channels
        )));
    }
    let weight = &state.trainable[0];
    let wslice = weight.as_slice().expect("weights are contiguous");

    // input gradient: parallel over batch items
    let mut d_input = Array4::zeros((b, c, h, w));
    Zip::from(d_input.axis_iter_mut(Axis(0)))
        .and(upstream.data().axis_iter(Axis(0)))
        .par_for_each(|mut db, ub| {
            let ds = db.as_slice_mut().expect("gradient is contiguous");
            let us = ub.as_slice().expect("upstream is contiguous");
            for o in 0..g.out_channels {
                let wbase = o * c * g.filter * g.filter;
                for i in 0..oh {
                    for j in 0..ow {
                        let grad = us[(o * oh + i) * ow + j];
                        if grad == 0.0 {
                            continue;
                        }
                        for ci in 0..c {
                            let wrow = wbase + ci * g.filter * g.filter;
                            for p in 0..g.filter {
                                let iy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let drow = (ci * h + iy as usize) * w;
                                for q in 0..g.filter {
                                    let ix = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    ds[drow + ix as usize] +=
                                        grad * wslice[wrow + p * g.filter + q];
                                }
                            }
                        }
                    }
                }
            }
        });

    // weight and bias gradients: parallel over output channels
    let mut d_weight = ArrayD::zeros(weight.raw_dim());
    let mut d_bias = Array1::zeros(g.out_channels);
    let xin_all = input.as_slice().expect("input is contiguous");
    let ups_all = upstream.data().as_slice().expect("upstream is contiguous");
    let out_index: Array1<usize> = Array1::from_iter(0..g.out_channels);
    Zip::from(d_weight.axis_iter_mut(Axis(0)))
        .and(d_bias.axis_iter_mut(Axis(0)))
        .and(&out_index)
        .par_for_each(|mut dw, mut dbias, &o| {
            let dw = dw.as_slice_mut().expect("gradient is contiguous");
            let mut bias_acc = 0.0;
            for bi in 0..b {
                let xbase = bi * c * h * w;
                let ubase = (bi * g.out_channels + o) * oh * ow;
                for i in 0..oh {
                    for j in 0..ow {
                        let grad = ups_all[ubase + i * ow + j];
                        bias_acc += grad;
                        if grad == 0.0 {
                            continue;
                        }
                        for ci in 0..c {
                            let wrow = ci * g.filter * g.filter;
                            for p in 0..g.filter {
                                let iy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xrow = xbase + (ci * h + iy as usize) * w;
                                for q in 0..g.filter {
                                    let ix = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    dw[wrow + p * g.filter + q] += grad * xin_all[xrow + ix as usize];
                                }
                            }
                        }
                    }
                }
            }
            dbias.fill(bias_acc);
        });

    Ok((
        Tensor4::new(d_input)?,
        vec![d_weight, d_bias.into_dyn()],
    ))
}

pub fn deconv_forward(spec: &LayerSpec, state: &LayerState, input: &Tensor4) -> Result<Tensor4> {
    let g = geometry(spec);
    let (b, c, h, w) = input.dim();
    let (oh, ow) = out_dims(spec, input)?;
    let weight = &state.trainable[0]; // [in, out, f, f]
    let bias = as1(&state.trainable[1]);
    let wslice = weight.as_slice().expect("weights are contiguous");

    let mut out = Array4::zeros((b, g.out_channels, oh, ow));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(input.data().axis_iter(Axis(0)))
        .par_for_each(|mut ob, ib| {
            let xin = ib.as_slice().expect("input is contiguous");
            let os = ob.as_slice_mut().expect("output is contiguous");
            for o in 0..g.out_channels {
                let obase = o * oh * ow;
                for v in os[obase..obase + oh * ow].iter_mut() {
                    *v = bias[o];
                }
                for ci in 0..c {
                    let wrow = (ci * g.out_channels + o) * g.filter * g.filter;
                    for i in 0..h {
                        for j in 0..w {
                            let x = xin[(ci * h + i) * w + j];
                            if x == 0.0 {
                                continue;
                            }
                            for p in 0..g.filter {
                                let oy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if oy < 0 || oy >= oh as isize {
                                    continue;
                                }
                                let orow = obase + oy as usize * ow;
                                for q in 0..g.filter {
                                    let ox = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ox < 0 || ox >= ow as isize {
                                        continue;
                                    }
                                    os[orow + ox as usize] += x * wslice[wrow + p * g.filter + q];
                                }
                            }
                        }
                    }
                }
            }
        });
    Tensor4::new(out)
}

pub fn deconv_backward(
    spec: &LayerSpec,
    state: &LayerState,
    input: &Array4<f64>,
    upstream: &Tensor4,
) -> Result<(Tensor4, Vec<ArrayD<f64>>)> {
    let g = geometry(spec);
    let (b, c, h, w) = input.dim();
    let (_, oc, oh, ow) = upstream.dim();
    if oc != g.out_channels {
        return Err(Error::Shape(format!(
            "deconv backward: upstream has {} channels, layer produces {}",
            oc, g.out_channels
        )));
    }
    let weight = &state.trainable[0];
    let wslice = weight.as_slice().expect("weights are contiguous");

    let mut d_input = Array4::zeros((b, c, h, w));
    Zip::from(d_input.axis_iter_mut(Axis(0)))
        .and(upstream.data().axis_iter(Axis(0)))
        .par_for_each(|mut db, ub| {
            let ds = db.as_slice_mut().expect("gradient is contiguous");
            let us = ub.as_slice().expect("upstream is contiguous");
            for ci in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        let mut acc = 0.0;
                        for o in 0..g.out_channels {
                            let wrow = (ci * g.out_channels + o) * g.filter * g.filter;
                            let obase = o * oh * ow;
                            for p in 0..g.filter {
                                let oy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if oy < 0 || oy >= oh as isize {
                                    continue;
                                }
                                let orow = obase + oy as usize * ow;
                                for q in 0..g.filter {
                                    let ox = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ox < 0 || ox >= ow as isize {
                                        continue;
                                    }
                                    acc += us[orow + ox as usize]
                                        * wslice[wrow + p * g.filter + q];
                                }
                            }
                        }
                        ds[(ci * h + i) * w + j] = acc;
                    }
                }
            }
        });

    // weight gradient: parallel over input channels (first weight axis)
    let mut d_weight = ArrayD::zeros(weight.raw_dim());
    let xin_all = input.as_slice().expect("input is contiguous");
    let ups_all = upstream.data().as_slice().expect("upstream is contiguous");
    let in_index: Array1<usize> = Array1::from_iter(0..c);
    Zip::from(d_weight.axis_iter_mut(Axis(0)))
        .and(&in_index)
        .par_for_each(|mut dwc, &ci| {
            let dw = dwc.as_slice_mut().expect("gradient is contiguous");
            for bi in 0..b {
                let xbase = (bi * c + ci) * h * w;
                let ubase = bi * g.out_channels * oh * ow;
                for i in 0..h {
                    for j in 0..w {
                        let x = xin_all[xbase + i * w + j];
                        if x == 0.0 {
                            continue;
                        }
                        for o in 0..g.out_channels {
                            let wrow = o * g.filter * g.filter;
                            let orow0 = ubase + o * oh * ow;
                            for p in 0..g.filter {
                                let oy = (i * g.stride.0 + p) as isize - g.pad.top as isize;
                                if oy < 0 || oy >= oh as isize {
                                    continue;
                                }
                                let orow = orow0 + oy as usize * ow;
                                for q in 0..g.filter {
                                    let ox = (j * g.stride.1 + q) as isize - g.pad.left as isize;
                                    if ox < 0 || ox >= ow as isize {
                                        continue;
                                    }
                                    dw[wrow + p * g.filter + q] += x * ups_all[orow + ox as usize];
                                }
                            }
                        }
                    }
                }
            }
        });

    let mut d_bias = Array1::zeros(g.out_channels);
    for bi in 0..b {
        for o in 0..g.out_channels {
            d_bias[o] += upstream
                .data()
                .index_axis(Axis(0), bi)
                .index_axis(Axis(0), o)
                .sum();
        }
    }

    Ok((
        Tensor4::new(d_input)?,
        vec![d_weight, d_bias.into_dyn()],
    ))
}
