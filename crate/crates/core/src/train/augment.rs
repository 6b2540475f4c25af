use rand::Rng;

use super::config::TrainConfig;
use crate::geometry::CropRect;

/// Plans a square random resized crop inside a `src × src` image.
///
/// The area fraction `s` is drawn uniformly from
/// `[crop_scale_min, crop_scale_max]` and the side is `round(src · √s)`,
/// nudged by one pixel when rounding pushes the area outside the range.
/// Offsets are uniform over every position that keeps the crop inside the
/// source. The caller resizes the crop to `cfg.input_size`.
pub fn random_resized_crop_plan<R: Rng + ?Sized>(
    src: u32,
    cfg: &TrainConfig,
    rng: &mut R,
) -> CropRect {
    if src == 0 {
        return CropRect::new(0, 0, 0, 0);
    }
    let scale = if cfg.crop_scale_min < cfg.crop_scale_max {
        rng.gen_range(cfg.crop_scale_min..=cfg.crop_scale_max)
    } else {
        cfg.crop_scale_min
    };
    let src_f = f64::from(src);
    let area = |side: u32| f64::from(side) * f64::from(side) / (src_f * src_f);

    let mut side = libm::round(src_f * libm::sqrt(scale)).clamp(1.0, src_f) as u32;
    if area(side) < cfg.crop_scale_min && side < src {
        side += 1;
    } else if area(side) > cfg.crop_scale_max && side > 1 {
        side -= 1;
    }

    let slack = src - side;
    let x = rng.gen_range(0..=slack);
    let y = rng.gen_range(0..=slack);
    CropRect::new(x, y, side, side)
}
