//! Volume and label-map data model plus preprocessing: normalization,
//! center cropping, slice reduction and grid resampling.

use crate::error::{Error, Result};
use crate::interp;

/// 3-D scalar intensity grid, row-major with the first axis slowest-varying.
///
/// `spacing` is millimeters per voxel and is carried as metadata only; all
/// geometry in this crate is expressed in voxel units.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    shape: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl Volume {
    pub fn new(shape: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidArgument(format!(
                "volume extents must be >= 2, got {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "size mismatch: shape {shape:?} expects {expect} values, payload has {}",
                data.len()
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("volume contains non-finite values".into()));
        }
        Ok(Volume { shape, spacing, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        let n = shape.iter().product();
        Volume { shape, spacing: [1.0; 3], data: vec![0.0; n] }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable voxel access. Finiteness is re-validated when saving.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    /// Min-max scale intensities to `[0, 1]`; a constant volume maps to all
    /// zeros.
    pub fn normalize(&self) -> Volume {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        let data = if range == 0.0 {
            vec![0.0; self.data.len()]
        } else {
            self.data.iter().map(|&v| (v - lo) / range).collect()
        };
        Volume { shape: self.shape, spacing: self.spacing, data }
    }

    /// Keep a centered window of extent `target`. With an odd remainder the
    /// window start is rounded down, so the extra removed voxel falls on the
    /// high-index side.
    pub fn center_crop(&self, target: [usize; 3]) -> Result<Volume> {
        let start = crop_start(self.shape, target)?;
        let mut data = Vec::with_capacity(target.iter().product());
        for i in 0..target[0] {
            for j in 0..target[1] {
                let row = ((start[0] + i) * self.shape[1] + start[1] + j) * self.shape[2] + start[2];
                data.extend_from_slice(&self.data[row..row + target[2]]);
            }
        }
        Ok(Volume { shape: target, spacing: self.spacing, data })
    }

    /// Retain `keep` evenly spaced slices along `axis` (first and last slices
    /// always survive).
    pub fn reduce_slices(&self, axis: usize, keep: usize) -> Result<Volume> {
        let picks = slice_indices(self.shape, axis, keep)?;
        let mut shape = self.shape;
        shape[axis] = keep;
        let mut data = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            let si = if axis == 0 { picks[i] } else { i };
            for j in 0..shape[1] {
                let sj = if axis == 1 { picks[j] } else { j };
                for k in 0..shape[2] {
                    let sk = if axis == 2 { picks[k] } else { k };
                    data.push(self.at(si, sj, sk));
                }
            }
        }
        let mut spacing = self.spacing;
        spacing[axis] *= (self.shape[axis] - 1) as f64 / (keep - 1) as f64;
        Ok(Volume { shape, spacing, data })
    }

    /// Trilinear resampling onto a uniform grid of `target` extents, with the
    /// two grids aligned at the volume corners.
    pub fn resample_to(&self, target: [usize; 3]) -> Result<Volume> {
        if target.iter().any(|&t| t < 2) {
            return Err(Error::InvalidArgument(format!(
                "resample target extents must be >= 2, got {target:?}"
            )));
        }
        if target == self.shape {
            return Ok(self.clone());
        }
        let data = interp::resample_channels(&self.data, 1, self.shape, target);
        let mut spacing = self.spacing;
        for a in 0..3 {
            spacing[a] *= (self.shape[a] - 1) as f64 / (target[a] - 1) as f64;
        }
        Ok(Volume { shape: target, spacing, data })
    }
}

/// 3-D grid of anatomical region ids; 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    shape: [usize; 3],
    data: Vec<u16>,
    region_ids: Vec<u16>,
}

impl LabelMap {
    pub fn new(shape: [usize; 3], data: Vec<u16>) -> Result<Self> {
        if shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidArgument(format!(
                "label map extents must be >= 2, got {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "size mismatch: shape {shape:?} expects {expect} values, payload has {}",
                data.len()
            )));
        }
        let mut region_ids: Vec<u16> = data.iter().copied().filter(|&v| v != 0).collect();
        region_ids.sort_unstable();
        region_ids.dedup();
        Ok(LabelMap { shape, data, region_ids })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    /// Distinct nonzero labels present, ascending.
    pub fn region_ids(&self) -> &[u16] {
        &self.region_ids
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> u16 {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }
}

fn crop_start(shape: [usize; 3], target: [usize; 3]) -> Result<[usize; 3]> {
    let mut start = [0usize; 3];
    for a in 0..3 {
        if target[a] > shape[a] {
            return Err(Error::InvalidArgument(format!(
                "crop target {target:?} exceeds shape {shape:?}"
            )));
        }
        if target[a] < 2 {
            return Err(Error::InvalidArgument(format!(
                "crop target extents must be >= 2, got {target:?}"
            )));
        }
        start[a] = (shape[a] - target[a]) / 2;
    }
    Ok(start)
}

/// Evenly spaced slice picks `round(j * (n-1) / (keep-1))`.
fn slice_indices(shape: [usize; 3], axis: usize, keep: usize) -> Result<Vec<usize>> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis must be 0..=2, got {axis}")));
    }
    let n = shape[axis];
    if keep < 2 || keep > n {
        return Err(Error::InvalidArgument(format!(
            "keep must lie in [2, {n}], got {keep}"
        )));
    }
    let step = (n as f64 - 1.0) / (keep as f64 - 1.0);
    Ok((0..keep).map(|j| (j as f64 * step).round() as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: [usize; 3]) -> Volume {
        let n: usize = shape.iter().product();
        Volume::new(shape, [1.0; 3], (0..n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn new_rejects_payload_size_mismatch() {
        let err = Volume::new([2, 2, 2], [1.0; 3], vec![0.0; 7]).unwrap_err();
        assert!(err.to_string().contains("size mismatch"));
    }

    #[test]
    fn new_rejects_non_finite() {
        let err = Volume::new([2, 2, 2], [1.0; 3], vec![f64::NAN; 8]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn normalize_min_max() {
        let v = Volume::new([2, 2, 2], [1.0; 3], vec![2.0, 4.0, 6.0, 2.0, 4.0, 6.0, 2.0, 4.0]).unwrap();
        let n = v.normalize();
        assert_eq!(&n.data()[..3], &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_fixed_point_on_unit_range() {
        let v = Volume::new([2, 2, 2], [1.0; 3], vec![0.0, 0.25, 1.0, 0.5, 0.125, 0.75, 0.3, 0.9]).unwrap();
        assert_eq!(v.normalize().data(), v.data());
    }

    #[test]
    fn normalize_constant_to_zeros() {
        let v = Volume::new([2, 2, 2], [1.0; 3], vec![5.0; 8]).unwrap();
        assert!(v.normalize().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn center_crop_even_remainder() {
        let v = ramp([6, 6, 6]);
        let c = v.center_crop([4, 4, 4]).unwrap();
        // Window [1, 5) per axis.
        assert_eq!(c.at(0, 0, 0), v.at(1, 1, 1));
        assert_eq!(c.at(3, 3, 3), v.at(4, 4, 4));
    }

    #[test]
    fn center_crop_identity() {
        let v = ramp([4, 5, 6]);
        assert_eq!(v.center_crop([4, 5, 6]).unwrap(), v);
    }

    #[test]
    fn center_crop_odd_remainder_keeps_low_window() {
        let v = ramp([5, 5, 5]);
        let c = v.center_crop([4, 4, 4]).unwrap();
        // Window [0, 4): the extra removed voxel sits on the high-index side.
        assert_eq!(c.at(0, 0, 0), v.at(0, 0, 0));
        assert_eq!(c.at(3, 3, 3), v.at(3, 3, 3));
    }

    #[test]
    fn center_crop_rejects_oversized_target() {
        assert!(ramp([4, 4, 4]).center_crop([5, 4, 4]).is_err());
    }

    #[test]
    fn center_crop_composes() {
        let v = ramp([7, 8, 9]);
        let once = v.center_crop([4, 4, 4]).unwrap();
        let twice = v.center_crop([6, 6, 6]).unwrap().center_crop([4, 4, 4]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn reduce_slices_paper_shape() {
        let v = Volume::zeros([20, 24, 20]);
        let r = v.reduce_slices(1, 3).unwrap();
        assert_eq!(r.shape(), [20, 3, 20]);
    }

    #[test]
    fn reduce_slices_identity_and_endpoints() {
        let v = ramp([4, 5, 4]);
        assert_eq!(v.reduce_slices(1, 5).unwrap(), v);
        let r = v.reduce_slices(1, 2).unwrap();
        // Keeps slices 0 and 4.
        assert_eq!(r.at(2, 0, 3), v.at(2, 0, 3));
        assert_eq!(r.at(2, 1, 3), v.at(2, 4, 3));
    }

    #[test]
    fn reduce_slices_rejects_bad_keep() {
        let v = ramp([4, 5, 4]);
        assert!(v.reduce_slices(1, 1).is_err());
        assert!(v.reduce_slices(1, 6).is_err());
    }

    #[test]
    fn resample_identity() {
        let v = ramp([3, 4, 5]);
        assert_eq!(v.resample_to([3, 4, 5]).unwrap(), v);
    }

    #[test]
    fn resample_ramp_stays_linear() {
        // Axis-0 ramp doubled in resolution stays an exact linear ramp.
        let shape = [4, 2, 2];
        let mut data = vec![0.0; 16];
        for i in 0..4 {
            for r in 0..4 {
                data[i * 4 + r] = i as f64;
            }
        }
        let v = Volume::new(shape, [1.0; 3], data).unwrap();
        let r = v.resample_to([8, 2, 2]).unwrap();
        let scale = 3.0 / 7.0;
        for i in 0..8 {
            let want = i as f64 * scale;
            assert!((r.at(i, 0, 0) - want).abs() < 1e-12);
            assert!((r.at(i, 1, 1) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_matches_corner_oracle() {
        // Brute-force oracle: weighted sum over the 8 enclosing corners.
        let shape = [3, 3, 3];
        let mut rng = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        let data: Vec<f64> = (0..27).map(|_| next()).collect();
        let v = Volume::new(shape, [1.0; 3], data.clone()).unwrap();
        let target = [5, 4, 6];
        let r = v.resample_to(target).unwrap();
        for oi in 0..target[0] {
            for oj in 0..target[1] {
                for ok in 0..target[2] {
                    let pos = [
                        oi as f64 * 2.0 / (target[0] - 1) as f64,
                        oj as f64 * 2.0 / (target[1] - 1) as f64,
                        ok as f64 * 2.0 / (target[2] - 1) as f64,
                    ];
                    let mut want = 0.0;
                    for (ci, wi) in corner(pos[0]) {
                        for (cj, wj) in corner(pos[1]) {
                            for (ck, wk) in corner(pos[2]) {
                                want += wi * wj * wk * data[(ci * 3 + cj) * 3 + ck];
                            }
                        }
                    }
                    let got = r.at(oi, oj, ok);
                    assert!((got - want).abs() < 1e-9, "({oi},{oj},{ok}): {got} vs {want}");
                }
            }
        }
    }

    fn corner(x: f64) -> [(usize, f64); 2] {
        let i0 = (x.floor() as usize).min(1);
        let f = x - i0 as f64;
        [(i0, 1.0 - f), (i0 + 1, f)]
    }

    #[test]
    fn label_map_collects_region_ids() {
        let lm = LabelMap::new([2, 2, 2], vec![0, 3, 1, 0, 3, 3, 0, 1]).unwrap();
        assert_eq!(lm.region_ids(), &[1, 3]);
    }
}
