//! Displacement fields and the warping, upsampling and composition
//! operators used by the coarse-to-fine registration cascade.

use crate::error::{Error, Result};
use crate::interp;
use crate::volume::{LabelMap, Volume};

/// Per-voxel 3-vector displacements in voxel units, component-major
/// `(3, s0, s1, s2)`.
///
/// A sample for output voxel `p` is read at location `p + u(p)` in the input
/// grid; displacements are *not* normalized coordinates, which keeps the
/// upsampling and composition arithmetic exact.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl DisplacementField {
    pub fn new(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let expect: usize = 3 * shape.iter().product::<usize>();
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "size mismatch: field shape {shape:?} expects {expect} values, payload has {}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("displacement field contains non-finite values".into()));
        }
        Ok(DisplacementField { shape, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        DisplacementField { shape, data: vec![0.0; 3 * shape.iter().product::<usize>()] }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Number of voxels per component.
    pub fn voxels(&self) -> usize {
        self.shape.iter().product()
    }

    /// Flat component-major data `(3, s0, s1, s2)`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Displacement components of one component plane.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    /// Displacement vector at voxel `(i, j, k)`.
    pub fn at(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let n = self.voxels();
        let idx = (i * self.shape[1] + j) * self.shape[2] + k;
        [self.data[idx], self.data[n + idx], self.data[2 * n + idx]]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.data.len() as f64
    }
}

/// Warp a volume through a displacement field with trilinear interpolation.
///
/// Sample coordinates are clamped to the grid box, so border samples are
/// duplicated rather than zero-filled.
pub fn warp_trilinear(src: &Volume, field: &DisplacementField) -> Result<Volume> {
    if src.shape() != field.shape() {
        return Err(Error::ShapeMismatch(format!(
            "volume shape {:?} does not match field shape {:?}",
            src.shape(),
            field.shape()
        )));
    }
    let out = interp::warp_channels(src.data(), 1, src.shape(), field.data());
    Volume::new(src.shape(), src.spacing(), out)
}

/// Warp a label map with zero-order (nearest-neighbor) interpolation.
///
/// Coordinates are rounded half away from zero per component and clamped to
/// the grid, so no new label values can appear.
pub fn warp_nearest(src: &LabelMap, field: &DisplacementField) -> Result<LabelMap> {
    if src.shape() != field.shape() {
        return Err(Error::ShapeMismatch(format!(
            "label shape {:?} does not match field shape {:?}",
            src.shape(),
            field.shape()
        )));
    }
    let s = src.shape();
    let n = field.voxels();
    let f = field.data();
    let mut out = Vec::with_capacity(n);
    let mut idx = 0;
    for i in 0..s[0] {
        for j in 0..s[1] {
            for k in 0..s[2] {
                let si = round_clamp(i as f64 + f[idx], s[0]);
                let sj = round_clamp(j as f64 + f[n + idx], s[1]);
                let sk = round_clamp(k as f64 + f[2 * n + idx], s[2]);
                out.push(src.at(si, sj, sk));
                idx += 1;
            }
        }
    }
    LabelMap::new(s, out)
}

#[inline]
fn round_clamp(x: f64, n: usize) -> usize {
    // f64::round rounds half away from zero.
    let r = x.round();
    if r <= 0.0 {
        0
    } else {
        (r as usize).min(n - 1)
    }
}

/// Upsample a field by a factor of 2 per axis: each component is trilinearly
/// interpolated onto the doubled, corner-aligned grid and the displacement
/// values are multiplied by 2 (voxel units of the finer grid).
pub fn upsample_field(field: &DisplacementField) -> DisplacementField {
    let s = field.shape();
    upsample_field_to(field, [2 * s[0], 2 * s[1], 2 * s[2]])
}

/// [`upsample_field`] onto an explicit target grid. The value scale stays 2
/// regardless of the exact target extents; targets other than `2s` exist to
/// absorb ceil-rounded pyramid shapes.
pub fn upsample_field_to(field: &DisplacementField, target: [usize; 3]) -> DisplacementField {
    let mut data = interp::resample_channels(field.data(), 3, field.shape(), target);
    for v in &mut data {
        *v *= 2.0;
    }
    DisplacementField { shape: target, data }
}

/// Compose an (already upsampled) accumulated field with the residual field
/// estimated on top of it: `out(p) = acc(p + res(p)) + res(p)`.
///
/// Applying `out` in one warp equals warping with `acc` first and `res`
/// after, up to interpolation error; the identity is exact for constant
/// (translation) fields.
pub fn compose(accumulated_up: &DisplacementField, residual: &DisplacementField) -> Result<DisplacementField> {
    if accumulated_up.shape() != residual.shape() {
        return Err(Error::ShapeMismatch(format!(
            "field shapes differ: {:?} vs {:?}",
            accumulated_up.shape(),
            residual.shape()
        )));
    }
    let mut data = interp::warp_channels(
        accumulated_up.data(),
        3,
        accumulated_up.shape(),
        residual.data(),
    );
    for (o, r) in data.iter_mut().zip(residual.data()) {
        *o += r;
    }
    Ok(DisplacementField { shape: residual.shape(), data })
}
