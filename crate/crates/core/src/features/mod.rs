//! The 21-dimensional visual descriptor of an image.
//!
//! Layout:
//!
//! | slots    | content                                                   |
//! |----------|-----------------------------------------------------------|
//! | `0..15`  | five dominant colours as `(h / 360, s, v)`, largest first |
//! | `15`     | mean brightness                                           |
//! | `16`     | mean saturation                                           |
//! | `17`     | brightness contrast (population std of `v`)               |
//! | `18`     | saturation contrast (population std of `s`)               |
//! | `19`     | cool colour ratio, `30 <= h <= 110`                       |
//! | `20`     | clear colour ratio, `v > 0.7`                             |

mod kmeans;
mod ppm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kmeans::{dominant_colors, DOMINANT_COLORS, KMEANS_MAX_ITER, KMEANS_SAMPLE_LIMIT, KMEANS_TOLERANCE};
pub use ppm::{read_ppm, read_ppm_file, write_ppm};

pub const FEATURE_DIM: usize = 21;

pub const COOL_HUE_MIN: f64 = 30.0;
pub const COOL_HUE_MAX: f64 = 110.0;
pub const CLEAR_BRIGHTNESS: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; FEATURE_DIM])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.0.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let got = v.len();
        let arr: [f64; FEATURE_DIM] = v.try_into().map_err(|_| Error::Dimension {
            expected: FEATURE_DIM,
            got,
        })?;
        Ok(FeatureVector(arr))
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0.to_vec()
    }
}

/// Decoded RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("degenerate size {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(PixelGrid { width, height, pixels })
    }

    pub fn uniform(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        PixelGrid::new(width, height, vec![rgb; width * height]).expect("valid size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn to_hsv(&self) -> Vec<Hsv> {
        self.pixels.iter().map(|&[r, g, b]| rgb_to_hsv(r, g, b)).collect()
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Standard hexcone conversion. Achromatic pixels get hue 0.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> Hsv {
    let (rf, gf, bf) = (f64::from(r) / 255.0, f64::from(g) / 255.0, f64::from(b) / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let h = if delta == 0.0 {
        0.0
    } else if max == rf {
        60.0 * ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    Hsv {
        h: if h >= 360.0 { h - 360.0 } else { h },
        s,
        v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightnessSaturation {
    pub mean_v: f64,
    pub mean_s: f64,
    pub contrast_v: f64,
    pub contrast_s: f64,
}

/// Population mean and standard deviation. Values are summed in sorted order
/// and offset by the minimum, so the result ignores pixel order and is exactly
/// zero for constant input.
fn mean_and_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let lo = v[0];
    let shifted = v.iter().map(|x| x - lo).sum::<f64>() / n;
    let var = v.iter().map(|x| (x - lo - shifted).powi(2)).sum::<f64>() / n;
    (lo + shifted, var.sqrt())
}

pub fn brightness_saturation_stats_hsv(hsv: &[Hsv]) -> BrightnessSaturation {
    assert!(!hsv.is_empty(), "image must be non-empty");
    let (mean_v, contrast_v) = mean_and_std(hsv.iter().map(|p| p.v));
    let (mean_s, contrast_s) = mean_and_std(hsv.iter().map(|p| p.s));
    BrightnessSaturation {
        mean_v,
        mean_s,
        contrast_v,
        contrast_s,
    }
}

pub fn brightness_saturation_stats(img: &PixelGrid) -> BrightnessSaturation {
    brightness_saturation_stats_hsv(&img.to_hsv())
}

fn fraction(hsv: &[Hsv], pred: impl Fn(&Hsv) -> bool) -> f64 {
    assert!(!hsv.is_empty(), "image must be non-empty");
    hsv.iter().filter(|p| pred(p)).count() as f64 / hsv.len() as f64
}

pub fn cool_color_ratio_hsv(hsv: &[Hsv]) -> f64 {
    fraction(hsv, |p| (COOL_HUE_MIN..=COOL_HUE_MAX).contains(&p.h))
}

pub fn cool_color_ratio(img: &PixelGrid) -> f64 {
    cool_color_ratio_hsv(&img.to_hsv())
}

pub fn clear_color_ratio_hsv(hsv: &[Hsv]) -> f64 {
    fraction(hsv, |p| p.v > CLEAR_BRIGHTNESS)
}

pub fn clear_color_ratio(img: &PixelGrid) -> f64 {
    clear_color_ratio_hsv(&img.to_hsv())
}

pub fn extract_features(img: &PixelGrid, seed: u64) -> FeatureVector {
    let hsv = img.to_hsv();
    let mut out = [0.0; FEATURE_DIM];
    out[..15].copy_from_slice(&dominant_colors(img, DOMINANT_COLORS, seed));
    let stats = brightness_saturation_stats_hsv(&hsv);
    out[15] = stats.mean_v;
    out[16] = stats.mean_s;
    out[17] = stats.contrast_v;
    out[18] = stats.contrast_s;
    out[19] = cool_color_ratio_hsv(&hsv);
    out[20] = clear_color_ratio_hsv(&hsv);
    FeatureVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hsv(h: f64, s: f64, v: f64) -> Hsv {
        Hsv { h, s, v }
    }

    #[test]
    fn hsv_of_black_red_and_gray() {
        assert_eq!(rgb_to_hsv(0, 0, 0), hsv(0.0, 0.0, 0.0));
        assert_eq!(rgb_to_hsv(255, 0, 0), hsv(0.0, 1.0, 1.0));
        let gray = rgb_to_hsv(128, 128, 128);
        assert_eq!((gray.h, gray.s), (0.0, 0.0));
        assert!((gray.v - 128.0 / 255.0).abs() < 1e-15);
        assert!((gray.v - 0.502).abs() < 1e-3);
    }

    #[test]
    fn hsv_primary_and_secondary_hues() {
        assert_eq!(rgb_to_hsv(0, 255, 0).h, 120.0);
        assert_eq!(rgb_to_hsv(0, 0, 255).h, 240.0);
        assert_eq!(rgb_to_hsv(255, 255, 0).h, 60.0);
        assert_eq!(rgb_to_hsv(255, 0, 255).h, 300.0);
        let wrap = rgb_to_hsv(255, 0, 1);
        assert!(wrap.h > 359.0 && wrap.h < 360.0);
    }

    #[test]
    fn uniform_image_has_zero_contrast() {
        let stats = brightness_saturation_stats(&PixelGrid::uniform(4, 3, [200, 30, 90]));
        assert_eq!(stats.contrast_v, 0.0);
        assert_eq!(stats.contrast_s, 0.0);
    }

    #[test]
    fn two_point_brightness_contrast() {
        let mut px = vec![[0u8, 0, 0]; 8];
        px[4..].fill([255, 255, 255]);
        let stats = brightness_saturation_stats(&PixelGrid::new(4, 2, px).unwrap());
        assert!((stats.mean_v - 0.5).abs() < 1e-15);
        assert!((stats.contrast_v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn black_image_is_dark_and_unsaturated() {
        let stats = brightness_saturation_stats(&PixelGrid::uniform(2, 2, [0, 0, 0]));
        assert_eq!(stats.mean_v, 0.0);
        assert_eq!(stats.mean_s, 0.0);
    }

    #[test]
    fn cool_band_is_inclusive() {
        assert_eq!(cool_color_ratio_hsv(&[hsv(70.0, 1.0, 1.0)]), 1.0);
        assert_eq!(cool_color_ratio_hsv(&[hsv(240.0, 1.0, 1.0)]), 0.0);
        assert_eq!(cool_color_ratio_hsv(&[hsv(50.0, 1.0, 1.0), hsv(200.0, 1.0, 1.0)]), 0.5);
        assert_eq!(cool_color_ratio_hsv(&[hsv(30.0, 1.0, 1.0), hsv(110.0, 1.0, 1.0)]), 1.0);
        // Pure green (h = 120) sits outside the band.
        assert_eq!(cool_color_ratio(&PixelGrid::uniform(1, 1, [0, 255, 0])), 0.0);
    }

    #[test]
    fn clear_threshold_is_strict() {
        assert_eq!(clear_color_ratio_hsv(&[hsv(0.0, 0.0, 0.8)]), 1.0);
        assert_eq!(clear_color_ratio_hsv(&[hsv(0.0, 0.0, 0.7)]), 0.0);
        assert_eq!(clear_color_ratio_hsv(&[hsv(0.0, 0.0, 0.9), hsv(0.0, 0.0, 0.1)]), 0.5);
    }

    #[test]
    fn mid_gray_feature_tail() {
        let f = extract_features(&PixelGrid::uniform(5, 5, [128, 128, 128]), 3);
        let v = 128.0 / 255.0;
        assert!((f.0[15] - v).abs() < 1e-12);
        assert_eq!(&f.0[16..], &[0.0, 0.0, 0.0, 0.0, 0.0]);
        let bright = extract_features(&PixelGrid::uniform(5, 5, [200, 200, 200]), 3);
        assert_eq!(bright.0[20], 1.0);
    }

    #[test]
    fn feature_vector_rejects_wrong_length() {
        assert!(matches!(
            FeatureVector::try_from(vec![0.0; 20]),
            Err(Error::Dimension { expected: 21, got: 20 })
        ));
        let json = serde_json::to_string(&FeatureVector::zeros()).unwrap();
        assert_eq!(serde_json::from_str::<FeatureVector>(&json).unwrap(), FeatureVector::zeros());
    }

    #[test]
    fn pixel_grid_validates_length() {
        assert!(PixelGrid::new(2, 2, vec![[0, 0, 0]; 3]).is_err());
        assert!(PixelGrid::new(0, 2, vec![]).is_err());
    }
}
