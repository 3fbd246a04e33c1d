//! Class activation maps and their conversion to image-space polygons.
//!
//! `M(x, y) = Σ_k w_k f_k(x, y)` over the final convolutional feature maps; the
//! global-pooled class score is the sum of `M` over the grid. The map is
//! upsampled to image resolution, thresholded at `M ≥ τ`, and each connected
//! foreground region is traced into a polygon.

mod trace;

pub use trace::{label_components, trace_polygons, ImagePolygon};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CamError {
    #[error("feature map has {features} channels but {weights} class weights were given")]
    ChannelMismatch { features: usize, weights: usize },
    #[error("dimensions must be positive")]
    EmptyDimensions,
    #[error("payload has {got} values, expected {expected}")]
    PayloadSize { expected: usize, got: usize },
    #[error("non-finite value")]
    NonFinite,
}

/// K channels of H′×W′ activations, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self, CamError> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(CamError::EmptyDimensions);
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(CamError::PayloadSize {
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CamError::NonFinite);
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }
}

/// Per-channel weights of the target class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(Vec<f32>);

impl ClassWeights {
    pub fn new(w: Vec<f32>) -> Result<Self, CamError> {
        if w.is_empty() {
            return Err(CamError::EmptyDimensions);
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(CamError::NonFinite);
        }
        Ok(ClassWeights(w))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dense row-major grid of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGrid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ActivationGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, CamError> {
        if height == 0 || width == 0 {
            return Err(CamError::EmptyDimensions);
        }
        if values.len() != height * width {
            return Err(CamError::PayloadSize {
                expected: height * width,
                got: values.len(),
            });
        }
        Ok(ActivationGrid { height, width, values })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self, CamError> {
        if height == 0 || width == 0 {
            return Err(CamError::EmptyDimensions);
        }
        if data.len() != height * width {
            return Err(CamError::PayloadSize {
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(BinaryMask { height, width, data })
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds reads as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Weighted channel sum, accumulated in f64 in channel order.
pub fn compute_cam(features: &FeatureMap, weights: &ClassWeights) -> Result<ActivationGrid, CamError> {
    if features.channels != weights.len() {
        return Err(CamError::ChannelMismatch {
            features: features.channels,
            weights: weights.len(),
        });
    }
    let n = features.height * features.width;
    let mut values = vec![0.0f64; n];
    for (k, &w) in weights.as_slice().iter().enumerate() {
        let w = f64::from(w);
        for (acc, &f) in values.iter_mut().zip(features.channel(k)) {
            *acc += w * f64::from(f);
        }
    }
    ActivationGrid::new(features.height, features.width, values)
}

/// Global-pooled class score: the sum of the activation map.
pub fn class_score(grid: &ActivationGrid) -> f64 {
    grid.values.iter().sum()
}

/// `M ≥ τ`, inclusive at the threshold.
pub fn threshold_mask(grid: &ActivationGrid, tau: f64) -> BinaryMask {
    BinaryMask {
        height: grid.height,
        width: grid.width,
        data: grid.values.iter().map(|&v| v >= tau).collect(),
    }
}

/// Bilinear resampling with corner-aligned sampling: output pixel `x` reads
/// source coordinate `x · (W′−1)/(W−1)`.
pub fn upsample(grid: &ActivationGrid, width: usize, height: usize) -> Result<ActivationGrid, CamError> {
    if width == 0 || height == 0 {
        return Err(CamError::EmptyDimensions);
    }
    let scale = |out: usize, src: usize| {
        if out > 1 {
            (src - 1) as f64 / (out - 1) as f64
        } else {
            0.0
        }
    };
    let sx = scale(width, grid.width);
    let sy = scale(height, grid.height);
    let axis = |i: usize, s: f64, n: usize| {
        let f = i as f64 * s;
        let i0 = (f.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, f - i0 as f64)
    };
    let xs: Vec<_> = (0..width).map(|x| axis(x, sx, grid.width)).collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, sy, grid.height);
        for &(x0, x1, fx) in &xs {
            let top = grid.get(x0, y0) * (1.0 - fx) + grid.get(x1, y0) * fx;
            let bottom = grid.get(x0, y1) * (1.0 - fx) + grid.get(x1, y1) * fx;
            values.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    ActivationGrid::new(height, width, values)
}

/// Drops polygons whose region covers fewer than `min_pixels` mask pixels.
pub fn min_region_filter(polys: Vec<ImagePolygon>, min_pixels: usize) -> Vec<ImagePolygon> {
    polys.into_iter().filter(|p| p.pixel_area >= min_pixels).collect()
}

/// CAM → upsample to the image size → threshold → trace → speckle filter.
pub fn extract_polygons(
    features: &FeatureMap,
    weights: &ClassWeights,
    image_width: usize,
    image_height: usize,
    tau: f64,
    min_pixels: usize,
) -> Result<Vec<ImagePolygon>, CamError> {
    let cam = compute_cam(features, weights)?;
    let full = upsample(&cam, image_width, image_height)?;
    let mask = threshold_mask(&full, tau);
    Ok(min_region_filter(trace_polygons(&mask), min_pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmap(k: usize, h: usize, w: usize, f: impl Fn(usize) -> f32) -> FeatureMap {
        FeatureMap::new(k, h, w, (0..k * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn zero_weights_zero_map() {
        let f = fmap(3, 2, 2, |i| i as f32);
        let m = compute_cam(&f, &ClassWeights::new(vec![0.0; 3]).unwrap()).unwrap();
        assert!(m.values.iter().all(|&v| v == 0.0));
        assert_eq!(class_score(&m), 0.0);
    }

    #[test]
    fn single_channel_identity() {
        let f = fmap(1, 3, 2, |i| i as f32 * 0.5 - 1.0);
        let m = compute_cam(&f, &ClassWeights::new(vec![1.0]).unwrap()).unwrap();
        let expect: Vec<f64> = f.data().iter().map(|&v| v as f64).collect();
        assert_eq!(m.values, expect);
        assert_eq!(class_score(&m), expect.iter().sum::<f64>());
    }

    #[test]
    fn channel_mismatch() {
        let f = fmap(2, 1, 1, |_| 1.0);
        assert_eq!(
            compute_cam(&f, &ClassWeights::new(vec![1.0]).unwrap()),
            Err(CamError::ChannelMismatch {
                features: 2,
                weights: 1
            })
        );
    }

    #[test]
    fn threshold_is_inclusive() {
        let g = ActivationGrid::new(1, 4, vec![-1.0, 0.0, -0.0, 2.0]).unwrap();
        assert_eq!(threshold_mask(&g, 0.0).data, vec![false, true, true, true]);
        let neg = ActivationGrid::new(2, 2, vec![-1.0, -2.0, -0.5, -1e-9]).unwrap();
        assert_eq!(threshold_mask(&neg, 0.0).count(), 0);
    }

    #[test]
    fn upsample_cases() {
        let c = ActivationGrid::new(2, 3, vec![1.5; 6]).unwrap();
        let u = upsample(&c, 7, 5).unwrap();
        assert!(u.values.iter().all(|&v| (v - 1.5).abs() < 1e-12));

        let g = ActivationGrid::new(2, 3, vec![0.1, 0.7, -2.0, 4.0, 0.0, 3.3]).unwrap();
        let same = upsample(&g, 3, 2).unwrap();
        for (a, b) in same.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-12);
        }

        let ramp = ActivationGrid::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = upsample(&ramp, 4, 2).unwrap();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for row in 0..2 {
            for (x, e) in expect.iter().enumerate() {
                assert!((r.get(x, row) - e).abs() < 1e-12);
            }
        }
        assert_eq!(upsample(&ramp, 0, 2), Err(CamError::EmptyDimensions));
    }

    #[test]
    fn speckle_filter() {
        let mut data = vec![false; 100];
        for i in [0, 1, 10] {
            data[i] = true;
        }
        for y in 5..8 {
            for x in 5..8 {
                data[y * 10 + x] = true;
            }
        }
        let mask = BinaryMask::new(10, 10, data).unwrap();
        let polys = trace_polygons(&mask);
        assert_eq!(polys.len(), 2);
        assert_eq!(min_region_filter(polys.clone(), 0), polys);
        let kept = min_region_filter(polys, 4);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].pixel_area, 9);
    }
}
