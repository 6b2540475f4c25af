use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CropRect;

/// Side of the square images sent to the captioning model.
pub const CAPTION_INPUT_SIZE: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizePlan {
    pub resized_w: u32,
    pub resized_h: u32,
    /// Crop in resized-image pixels.
    pub crop: CropRect,
}

/// Resize so the shorter side equals `target` (long side rounded half up),
/// then take the centered `target × target` square (offsets floored).
///
/// Integer arithmetic only, so plans are identical on every platform.
pub fn resize_center_crop_plan(w: u32, h: u32, target: u32) -> Result<ResizePlan> {
    if w == 0 || h == 0 || target == 0 {
        return Err(Error::InvalidArgument {
            field: "image size",
            reason: "width, height and target must be at least 1",
        });
    }
    let short = u64::from(w.min(h));
    let t = u64::from(target);
    // round(x · t / short) with ties up
    let scale = |x: u32| ((2 * u64::from(x) * t + short) / (2 * short)) as u32;
    let (resized_w, resized_h) = if w <= h {
        (target, scale(h))
    } else {
        (scale(w), target)
    };
    let crop = CropRect::new(
        (resized_w - target) / 2,
        (resized_h - target) / 2,
        target,
        target,
    );
    Ok(ResizePlan {
        resized_w,
        resized_h,
        crop,
    })
}
