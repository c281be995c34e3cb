//! Trilinear interpolation kernels shared by warping, field upsampling and
//! volume resampling, plus their adjoints for the autodiff graph.
//!
//! Sampling convention: a grid of extent `n` has samples at integer
//! coordinates `0..n-1`; out-of-range coordinates are clamped to the border.
//! Resampling between grids aligns the first and last samples of both grids
//! (corner alignment), so resampling onto the same extent is the identity.

/// Per-axis interpolation table entry: low corner, high corner, fraction.
#[derive(Clone, Copy, Debug)]
pub struct AxisWeight {
    pub i0: usize,
    pub i1: usize,
    pub frac: f64,
}

/// Corner-aligned source positions for resampling `n_in` samples onto `n_out`.
pub fn axis_table(n_in: usize, n_out: usize) -> Vec<AxisWeight> {
    assert!(n_in >= 1 && n_out >= 1);
    let scale = if n_out > 1 {
        (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
    } else {
        0.0
    };
    (0..n_out)
        .map(|j| {
            let pos = j as f64 * scale;
            split_coord(pos, n_in)
        })
        .collect()
}

/// Split a clamped coordinate into corner indices and an interpolation
/// fraction. `pos` must already lie in `[0, n-1]`.
#[inline]
fn split_coord(pos: f64, n: usize) -> AxisWeight {
    let mut i0 = pos.floor() as usize;
    if i0 + 1 >= n {
        i0 = n.saturating_sub(2).min(i0);
    }
    let i1 = (i0 + 1).min(n - 1);
    AxisWeight { i0, i1, frac: pos - i0 as f64 }
}

#[inline]
fn clamp_coord(x: f64, n: usize) -> f64 {
    x.max(0.0).min((n - 1) as f64)
}

#[inline]
fn flat(s: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    (i * s[1] + j) * s[2] + k
}

/// Trilinear sample of one channel at a clamped fractional coordinate.
#[inline]
pub fn trilinear_sample(src: &[f64], s: [usize; 3], x: [f64; 3]) -> f64 {
    let a = split_coord(clamp_coord(x[0], s[0]), s[0]);
    let b = split_coord(clamp_coord(x[1], s[1]), s[1]);
    let c = split_coord(clamp_coord(x[2], s[2]), s[2]);
    gather(src, s, a, b, c)
}

#[inline]
fn gather(src: &[f64], s: [usize; 3], a: AxisWeight, b: AxisWeight, c: AxisWeight) -> f64 {
    let (fa, fb, fc) = (a.frac, b.frac, c.frac);
    let (ga, gb, gc) = (1.0 - fa, 1.0 - fb, 1.0 - fc);
    let v000 = src[flat(s, a.i0, b.i0, c.i0)];
    let v001 = src[flat(s, a.i0, b.i0, c.i1)];
    let v010 = src[flat(s, a.i0, b.i1, c.i0)];
    let v011 = src[flat(s, a.i0, b.i1, c.i1)];
    let v100 = src[flat(s, a.i1, b.i0, c.i0)];
    let v101 = src[flat(s, a.i1, b.i0, c.i1)];
    let v110 = src[flat(s, a.i1, b.i1, c.i0)];
    let v111 = src[flat(s, a.i1, b.i1, c.i1)];
    ga * (gb * (gc * v000 + fc * v001) + fb * (gc * v010 + fc * v011))
        + fa * (gb * (gc * v100 + fc * v101) + fb * (gc * v110 + fc * v111))
}

/// Resample `channels` stacked grids of shape `s_in` onto `s_out`
/// (corner-aligned trilinear).
pub fn resample_channels(
    src: &[f64],
    channels: usize,
    s_in: [usize; 3],
    s_out: [usize; 3],
) -> Vec<f64> {
    let t0 = axis_table(s_in[0], s_out[0]);
    let t1 = axis_table(s_in[1], s_out[1]);
    let t2 = axis_table(s_in[2], s_out[2]);
    let n_in: usize = s_in.iter().product();
    let n_out: usize = s_out.iter().product();
    let mut out = vec![0.0; channels * n_out];
    for ch in 0..channels {
        let sv = &src[ch * n_in..(ch + 1) * n_in];
        let ov = &mut out[ch * n_out..(ch + 1) * n_out];
        let mut idx = 0;
        for a in &t0 {
            for b in &t1 {
                for c in &t2 {
                    ov[idx] = gather(sv, s_in, *a, *b, *c);
                    idx += 1;
                }
            }
        }
    }
    out
}

/// Adjoint of [`resample_channels`]: scatters output-grid gradients back to
/// the input grid.
pub fn resample_channels_adjoint(
    grad_out: &[f64],
    channels: usize,
    s_in: [usize; 3],
    s_out: [usize; 3],
) -> Vec<f64> {
    let t0 = axis_table(s_in[0], s_out[0]);
    let t1 = axis_table(s_in[1], s_out[1]);
    let t2 = axis_table(s_in[2], s_out[2]);
    let n_in: usize = s_in.iter().product();
    let n_out: usize = s_out.iter().product();
    let mut grad_in = vec![0.0; channels * n_in];
    for ch in 0..channels {
        let gv = &grad_out[ch * n_out..(ch + 1) * n_out];
        let iv = &mut grad_in[ch * n_in..(ch + 1) * n_in];
        let mut idx = 0;
        for a in &t0 {
            for b in &t1 {
                for c in &t2 {
                    scatter(iv, s_in, *a, *b, *c, gv[idx]);
                    idx += 1;
                }
            }
        }
    }
    grad_in
}

#[inline]
fn scatter(dst: &mut [f64], s: [usize; 3], a: AxisWeight, b: AxisWeight, c: AxisWeight, g: f64) {
    let (fa, fb, fc) = (a.frac, b.frac, c.frac);
    let (ga, gb, gc) = (1.0 - fa, 1.0 - fb, 1.0 - fc);
    dst[flat(s, a.i0, b.i0, c.i0)] += ga * gb * gc * g;
    dst[flat(s, a.i0, b.i0, c.i1)] += ga * gb * fc * g;
    dst[flat(s, a.i0, b.i1, c.i0)] += ga * fb * gc * g;
    dst[flat(s, a.i0, b.i1, c.i1)] += ga * fb * fc * g;
    dst[flat(s, a.i1, b.i0, c.i0)] += fa * gb * gc * g;
    dst[flat(s, a.i1, b.i0, c.i1)] += fa * gb * fc * g;
    dst[flat(s, a.i1, b.i1, c.i0)] += fa * fb * gc * g;
    dst[flat(s, a.i1, b.i1, c.i1)] += fa * fb * fc * g;
}

/// Warp `channels` stacked grids through a displacement field.
///
/// `field` holds per-voxel displacements in voxel units, component-major
/// `(3, s0, s1, s2)`; the sample for output voxel `p` is read at `p + u(p)`.
pub fn warp_channels(src: &[f64], channels: usize, s: [usize; 3], field: &[f64]) -> Vec<f64> {
    let n: usize = s.iter().product();
    debug_assert_eq!(field.len(), 3 * n);
    debug_assert_eq!(src.len(), channels * n);
    let mut out = vec![0.0; channels * n];
    let mut idx = 0;
    for i in 0..s[0] {
        for j in 0..s[1] {
            for k in 0..s[2] {
                let a = split_coord(clamp_coord(i as f64 + field[idx], s[0]), s[0]);
                let b = split_coord(clamp_coord(j as f64 + field[n + idx], s[1]), s[1]);
                let c = split_coord(clamp_coord(k as f64 + field[2 * n + idx], s[2]), s[2]);
                for ch in 0..channels {
                    out[ch * n + idx] = gather(&src[ch * n..(ch + 1) * n], s, a, b, c);
                }
                idx += 1;
            }
        }
    }
    out
}

/// Gradient of [`warp_channels`] with respect to the source values.
pub fn warp_backward_src(
    grad_out: &[f64],
    channels: usize,
    s: [usize; 3],
    field: &[f64],
) -> Vec<f64> {
    let n: usize = s.iter().product();
    let mut grad_src = vec![0.0; channels * n];
    let mut idx = 0;
    for i in 0..s[0] {
        for j in 0..s[1] {
            for k in 0..s[2] {
                let a = split_coord(clamp_coord(i as f64 + field[idx], s[0]), s[0]);
                let b = split_coord(clamp_coord(j as f64 + field[n + idx], s[1]), s[1]);
                let c = split_coord(clamp_coord(k as f64 + field[2 * n + idx], s[2]), s[2]);
                for ch in 0..channels {
                    scatter(&mut grad_src[ch * n..(ch + 1) * n], s, a, b, c, grad_out[ch * n + idx]);
                }
                idx += 1;
            }
        }
    }
    grad_src
}

/// Gradient of [`warp_channels`] with respect to the displacement field.
///
/// Where a sample coordinate is clamped at the border the derivative with
/// respect to that component is zero.
pub fn warp_backward_field(
    src: &[f64],
    channels: usize,
    s: [usize; 3],
    field: &[f64],
    grad_out: &[f64],
) -> Vec<f64> {
    let n: usize = s.iter().product();
    let mut grad_field = vec![0.0; 3 * n];
    let mut idx = 0;
    for i in 0..s[0] {
        for j in 0..s[1] {
            for k in 0..s[2] {
                let x0 = i as f64 + field[idx];
                let x1 = j as f64 + field[n + idx];
                let x2 = k as f64 + field[2 * n + idx];
                let live0 = x0 > 0.0 && x0 < (s[0] - 1) as f64;
                let live1 = x1 > 0.0 && x1 < (s[1] - 1) as f64;
                let live2 = x2 > 0.0 && x2 < (s[2] - 1) as f64;
                let a = split_coord(clamp_coord(x0, s[0]), s[0]);
                let b = split_coord(clamp_coord(x1, s[1]), s[1]);
                let c = split_coord(clamp_coord(x2, s[2]), s[2]);
                let (fa, fb, fc) = (a.frac, b.frac, c.frac);
                let (ga, gb, gc) = (1.0 - fa, 1.0 - fb, 1.0 - fc);
                for ch in 0..channels {
                    let g = grad_out[ch * n + idx];
                    if g == 0.0 {
                        continue;
                    }
                    let sv = &src[ch * n..(ch + 1) * n];
                    let v000 = sv[flat(s, a.i0, b.i0, c.i0)];
                    let v001 = sv[flat(s, a.i0, b.i0, c.i1)];
                    let v010 = sv[flat(s, a.i0, b.i1, c.i0)];
                    let v011 = sv[flat(s, a.i0, b.i1, c.i1)];
                    let v100 = sv[flat(s, a.i1, b.i0, c.i0)];
                    let v101 = sv[flat(s, a.i1, b.i0, c.i1)];
                    let v110 = sv[flat(s, a.i1, b.i1, c.i0)];
                    let v111 = sv[flat(s, a.i1, b.i1, c.i1)];
                    if live0 {
                        let d = gb * (gc * (v100 - v000) + fc * (v101 - v001))
                            + fb * (gc * (v110 - v010) + fc * (v111 - v011));
                        grad_field[idx] += g * d;
                    }
                    if live1 {
                        let d = ga * (gc * (v010 - v000) + fc * (v011 - v001))
                            + fa * (gc * (v110 - v100) + fc * (v111 - v101));
                        grad_field[n + idx] += g * d;
                    }
                    if live2 {
                        let d = ga * (gb * (v001 - v000) + fb * (v011 - v010))
                            + fa * (gb * (v101 - v100) + fb * (v111 - v110));
                        grad_field[2 * n + idx] += g * d;
                    }
                }
                idx += 1;
            }
        }
    }
    grad_field
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_table_identity_when_sizes_match() {
        for t in axis_table(5, 5) {
            assert_eq!(t.frac, 0.0);
            assert_eq!(t.i1, (t.i0 + 1).min(4));
        }
    }

    #[test]
    fn sample_at_integer_coordinates_is_exact() {
        let s = [2, 2, 2];
        let src: Vec<f64> = (0..8).map(|v| v as f64).collect();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let v = trilinear_sample(&src, s, [i as f64, j as f64, k as f64]);
                    assert_eq!(v, src[flat(s, i, j, k)]);
                }
            }
        }
    }

    #[test]
    fn sample_clamps_outside_the_grid() {
        let s = [2, 2, 2];
        let src: Vec<f64> = (0..8).map(|v| v as f64).collect();
        assert_eq!(trilinear_sample(&src, s, [-3.0, 0.0, 0.0]), 0.0);
        assert_eq!(trilinear_sample(&src, s, [5.0, 1.0, 1.0]), 7.0);
    }
}
