//! Semantic localization: sliding-window attention maps over large scenes
//! and the four map-quality scores.
//!
//! Maps live on a grid of cells; cell `(cx, cy)` has its center at
//! `(cx + 0.5, cy + 0.5)` in continuous cell coordinates. Distances are
//! normalized by the half-diagonal of the lattice of cell centers,
//! `0.5 · sqrt((W-1)² + (H-1)²)`, which is the largest mean distance any
//! distribution on the grid can have from its own centroid. That keeps every
//! score in `[0, 1]`:
//!
//! - `R_su`: probability mass inside the ground-truth region;
//! - `R_as`: centroid-to-GT-centroid distance over the half-diagonal, clamped
//!   (lower is better);
//! - `R_da`: one minus the mass-weighted mean distance from the centroid over
//!   the half-diagonal (higher means more concentrated attention);
//! - `R_mi = w_su R_su + w_as (1 - R_as) + w_da R_da`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CropRect;
use crate::matrix::{dot, EmbeddingMatrix};

/// Nonnegative per-cell mass summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SemLocMap {
    width: usize,
    height: usize,
    mass: Vec<f32>,
}

impl SemLocMap {
    /// Normalizes nonnegative cell weights to unit mass. An all-zero field
    /// becomes the uniform map.
    pub fn from_weights(width: usize, height: usize, weights: &[f64]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty {
                what: "localization grid",
            });
        }
        if weights.len() != width * height {
            return Err(Error::ShapeMismatch {
                what: "map cells",
                expected: width * height,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument {
                field: "map weights",
                reason: "must be finite and nonnegative",
            });
        }
        let total: f64 = weights.iter().sum();
        let mass = if total > 0.0 {
            weights.iter().map(|w| (w / total) as f32).collect()
        } else {
            vec![(1.0 / weights.len() as f64) as f32; weights.len()]
        };
        Ok(Self {
            width,
            height,
            mass,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mass(&self) -> &[f32] {
        &self.mass
    }

    #[inline]
    pub fn at(&self, cx: usize, cy: usize) -> f32 {
        self.mass[cy * self.width + cx]
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(i, &m)| {
            let (cx, cy) = (i % self.width, i / self.width);
            (cx as f64 + 0.5, cy as f64 + 0.5, f64::from(m))
        })
    }

    fn total(&self) -> f64 {
        self.mass.iter().map(|&m| f64::from(m)).sum()
    }

    /// Half the diagonal of the cell-center lattice.
    pub fn half_diagonal(&self) -> f64 {
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        0.5 * libm::sqrt(w * w + h * h)
    }

    /// Renders the map as an 8-bit grayscale raster scaled so the heaviest
    /// cell is 255. Row-major, one byte per cell.
    pub fn to_gray8(&self) -> Vec<u8> {
        let max = self.mass.iter().copied().fold(0.0f32, f32::max);
        self.mass
            .iter()
            .map(|&m| {
                if max > 0.0 {
                    libm::round(f64::from(m / max) * 255.0) as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Union of rectangles in cell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRegion {
    width: usize,
    height: usize,
    rects: Vec<CropRect>,
    mask: Vec<bool>,
}

impl GroundTruthRegion {
    pub fn new(width: usize, height: usize, rects: Vec<CropRect>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::Empty {
                what: "ground-truth region",
            });
        }
        let (w32, h32) = (
            u32::try_from(width).unwrap_or(u32::MAX),
            u32::try_from(height).unwrap_or(u32::MAX),
        );
        if rects.iter().any(|r| !r.fits_within(w32, h32)) {
            return Err(Error::InvalidArgument {
                field: "ground-truth rect",
                reason: "must be non-empty and inside the map",
            });
        }
        let mut mask = vec![false; width * height];
        for r in &rects {
            for cy in r.y..r.y + r.h {
                for cx in r.x..r.x + r.w {
                    mask[cy as usize * width + cx as usize] = true;
                }
            }
        }
        Ok(Self {
            width,
            height,
            rects,
            mask,
        })
    }

    pub fn rects(&self) -> &[CropRect] {
        &self.rects
    }

    pub fn contains_cell(&self, cx: usize, cy: usize) -> bool {
        self.mask[cy * self.width + cx]
    }

    /// Mean of the centers of all cells in the union.
    pub fn centroid(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            sx += (i % self.width) as f64 + 0.5;
            sy += (i / self.width) as f64 + 0.5;
            n += 1;
        }
        (sx / n as f64, sy / n as f64)
    }

    fn check_matches(&self, map: &SemLocMap) -> Result<()> {
        if (self.width, self.height) != (map.width, map.height) {
            return Err(Error::ShapeMismatch {
                what: "ground-truth grid cells",
                expected: map.width * map.height,
                found: self.width * self.height,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemLocWeights {
    pub w_su: f64,
    pub w_as: f64,
    pub w_da: f64,
}

impl SemLocWeights {
    pub fn new(w_su: f64, w_as: f64, w_da: f64) -> Result<Self> {
        let sum = w_su + w_as + w_da;
        if [w_su, w_as, w_da].iter().any(|w| !(*w >= 0.0)) || !((sum - 1.0).abs() <= 1e-9) {
            return Err(Error::WeightSumInvalid { sum });
        }
        Ok(Self { w_su, w_as, w_da })
    }
}

impl Default for SemLocWeights {
    fn default() -> Self {
        Self {
            w_su: 1.0 / 3.0,
            w_as: 1.0 / 3.0,
            w_da: 1.0 / 3.0,
        }
    }
}

/// Windows of side `window` at offsets `0, stride, 2·stride, …` on each axis;
/// the last window on each axis is pulled back flush with the far edge so the
/// whole scene is covered. Row-major order (y outer).
pub fn window_grid(scene_w: u32, scene_h: u32, window: u32, stride: u32) -> Result<Vec<CropRect>> {
    if window == 0 || window > scene_w || window > scene_h {
        return Err(Error::WindowTooLarge {
            window,
            scene_w,
            scene_h,
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument {
            field: "stride",
            reason: "must be at least 1",
        });
    }
    let offsets = |len: u32| {
        let mut out = Vec::new();
        let mut o = 0u32;
        loop {
            if o + window >= len {
                out.push(len - window);
                break;
            }
            out.push(o);
            o += stride;
        }
        out
    };
    let (xs, ys) = (offsets(scene_w), offsets(scene_h));
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| CropRect::new(x, y, window, window)))
        .collect())
}

/// Per-cell mean score of the windows covering each cell, before shifting
/// and normalization. A window covers a cell when it contains the cell's
/// center; cells are `cell × cell` pixels (clipped at the scene edge).
/// Uncovered cells are `None`.
pub fn window_mean_field(
    window_scores: &[(CropRect, f32)],
    scene_w: u32,
    scene_h: u32,
    cell: u32,
) -> Result<(usize, usize, Vec<Option<f64>>)> {
    if window_scores.is_empty() {
        return Err(Error::NoWindows);
    }
    if cell == 0 || scene_w == 0 || scene_h == 0 {
        return Err(Error::InvalidArgument {
            field: "cell / scene size",
            reason: "must be at least 1",
        });
    }
    if let Some(index) = window_scores.iter().position(|(_, s)| !s.is_finite()) {
        return Err(Error::NaNScore { index });
    }
    let gw = scene_w.div_ceil(cell) as usize;
    let gh = scene_h.div_ceil(cell) as usize;
    let center = |c: usize, len: u32| {
        let lo = c as u32 * cell;
        let hi = (lo + cell).min(len);
        0.5 * (f64::from(lo) + f64::from(hi))
    };

    let mut sums = vec![0.0f64; gw * gh];
    let mut counts = vec![0u32; gw * gh];
    for (rect, score) in window_scores {
        // only cells whose pixel span intersects the rect can have their center inside
        let cx0 = (rect.x / cell) as usize;
        let cy0 = (rect.y / cell) as usize;
        let cx1 = ((rect.x + rect.w).div_ceil(cell) as usize).min(gw);
        let cy1 = ((rect.y + rect.h).div_ceil(cell) as usize).min(gh);
        for cy in cy0..cy1 {
            let py = center(cy, scene_h);
            for cx in cx0..cx1 {
                if rect.contains_point(center(cx, scene_w), py) {
                    sums[cy * gw + cx] += f64::from(*score);
                    counts[cy * gw + cx] += 1;
                }
            }
        }
    }
    let field = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s / f64::from(n)))
        .collect();
    Ok((gw, gh, field))
}

/// Builds the attention map: per-cell window mean, shifted so the minimum is
/// zero, normalized to unit mass. Uncovered cells get zero mass; a constant
/// field yields the uniform map.
pub fn similarity_map(
    window_scores: &[(CropRect, f32)],
    scene_w: u32,
    scene_h: u32,
    cell: u32,
) -> Result<SemLocMap> {
    let (gw, gh, field) = window_mean_field(window_scores, scene_w, scene_h, cell)?;
    let min = field
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = field.iter().map(|v| v.map_or(0.0, |v| v - min)).collect();
    SemLocMap::from_weights(gw, gh, &shifted)
}

/// Mass-weighted mean of cell centers.
pub fn prob_centroid(map: &SemLocMap) -> (f64, f64) {
    let total = map.total();
    let (sx, sy) = map
        .cells()
        .fold((0.0, 0.0), |(sx, sy), (x, y, m)| (sx + m * x, sy + m * y));
    (sx / total, sy / total)
}

/// Fraction of mass inside the ground-truth region.
pub fn r_su(map: &SemLocMap, gt: &GroundTruthRegion) -> Result<f64> {
    gt.check_matches(map)?;
    let inside: f64 = map
        .mass
        .iter()
        .zip(&gt.mask)
        .filter(|(_, &in_gt)| in_gt)
        .map(|(&m, _)| f64::from(m))
        .sum();
    Ok((inside / map.total()).clamp(0.0, 1.0))
}

/// Centroid shift from the GT centroid, as a fraction of the half-diagonal.
pub fn r_as(map: &SemLocMap, gt: &GroundTruthRegion) -> Result<f64> {
    gt.check_matches(map)?;
    let (px, py) = prob_centroid(map);
    let (gx, gy) = gt.centroid();
    let dist = libm::hypot(px - gx, py - gy);
    let half = map.half_diagonal();
    if half == 0.0 {
        return Ok(if dist == 0.0 { 0.0 } else { 1.0 });
    }
    Ok((dist / half).clamp(0.0, 1.0))
}

/// One minus the mean distance of mass from its centroid, as a fraction of
/// the half-diagonal.
pub fn r_da(map: &SemLocMap) -> f64 {
    let half = map.half_diagonal();
    if half == 0.0 {
        return 1.0;
    }
    let (px, py) = prob_centroid(map);
    let spread = map
        .cells()
        .map(|(x, y, m)| m * libm::hypot(x - px, y - py))
        .sum::<f64>()
        / map.total();
    (1.0 - spread / half).clamp(0.0, 1.0)
}

pub fn r_mi(rsu: f64, ras: f64, rda: f64, w: &SemLocWeights) -> f64 {
    w.w_su * rsu + w.w_as * (1.0 - ras) + w.w_da * rda
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemLocScores {
    pub r_su: f64,
    pub r_as: f64,
    pub r_da: f64,
    pub r_mi: f64,
}

pub fn score_map(
    map: &SemLocMap,
    gt: &GroundTruthRegion,
    weights: &SemLocWeights,
) -> Result<SemLocScores> {
    let su = r_su(map, gt)?;
    let as_ = r_as(map, gt)?;
    let da = r_da(map);
    Ok(SemLocScores {
        r_su: su,
        r_as: as_,
        r_da: da,
        r_mi: r_mi(su, as_, da, weights),
    })
}

/// A scene cut into windows, each with its (normalized) embedding.
#[derive(Debug, Clone)]
pub struct SceneWindows {
    pub scene_w: u32,
    pub scene_h: u32,
    /// Map cell size in pixels.
    pub cell: u32,
    pub rects: Vec<CropRect>,
    pub embeddings: EmbeddingMatrix,
}

#[derive(Debug, Clone)]
pub struct SemLocReport {
    pub scores: SemLocScores,
    pub map: SemLocMap,
}

/// Scores every window against the query, builds the attention map and
/// evaluates it against the ground truth (given in map cells).
pub fn semloc_report(
    scene: &SceneWindows,
    query: &[f32],
    gt: &GroundTruthRegion,
    weights: &SemLocWeights,
) -> Result<SemLocReport> {
    if !scene.embeddings.is_normalized() {
        return Err(Error::NotNormalized {
            what: "window embeddings",
        });
    }
    if scene.rects.len() != scene.embeddings.rows() {
        return Err(Error::ShapeMismatch {
            what: "window embeddings",
            expected: scene.rects.len(),
            found: scene.embeddings.rows(),
        });
    }
    if query.len() != scene.embeddings.dim() {
        return Err(Error::DimMismatch {
            left: scene.embeddings.dim(),
            right: query.len(),
        });
    }
    let window_scores: Vec<(CropRect, f32)> = scene
        .rects
        .iter()
        .zip(scene.embeddings.iter_rows())
        .map(|(r, e)| (*r, dot(e, query) as f32))
        .collect();
    let map = similarity_map(&window_scores, scene.scene_w, scene.scene_h, scene.cell)?;
    let scores = score_map(&map, gt, weights)?;
    Ok(SemLocReport { scores, map })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_mass(w: usize, h: usize, cx: usize, cy: usize) -> SemLocMap {
        let mut m = vec![0.0; w * h];
        m[cy * w + cx] = 1.0;
        SemLocMap::from_weights(w, h, &m).unwrap()
    }

    #[test]
    fn grid_examples() {
        assert_eq!(
            window_grid(512, 512, 512, 7).unwrap(),
            vec![CropRect::new(0, 0, 512, 512)]
        );
        let g = window_grid(1024, 1024, 512, 512).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[3], CropRect::new(512, 512, 512, 512));
        let g = window_grid(768, 768, 512, 512).unwrap();
        let xs: Vec<u32> = g.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![0, 256, 0, 256]);
        assert!(matches!(
            window_grid(256, 768, 512, 512),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn constant_field_is_uniform() {
        let m = similarity_map(&[(CropRect::new(0, 0, 4, 4), 0.3)], 4, 4, 1).unwrap();
        assert!(m.mass().iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-7));
    }

    #[test]
    fn disjoint_windows_one_hot() {
        let m = similarity_map(
            &[
                (CropRect::new(0, 0, 2, 2), 1.0),
                (CropRect::new(2, 0, 2, 2), 0.0),
            ],
            4,
            2,
            1,
        )
        .unwrap();
        for cy in 0..2 {
            for cx in 0..4 {
                let expected = if cx < 2 { 0.25 } else { 0.0 };
                assert!((m.at(cx, cy) - expected).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn overlap_takes_mean() {
        let (_, _, f) = window_mean_field(
            &[
                (CropRect::new(0, 0, 2, 1), 0.8),
                (CropRect::new(1, 0, 2, 1), 0.2),
            ],
            3,
            1,
            1,
        )
        .unwrap();
        assert_eq!(f[0], Some(0.800000011920929));
        assert!((f[1].unwrap() - 0.5).abs() < 1e-7);
        assert!(matches!(
            window_mean_field(&[], 3, 1, 1),
            Err(Error::NoWindows)
        ));
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(prob_centroid(&point_mass(5, 5, 2, 3)), (2.5, 3.5));
        let uniform = SemLocMap::from_weights(6, 4, &[1.0; 24]).unwrap();
        let (x, y) = prob_centroid(&uniform);
        assert!((x - 3.0).abs() < 1e-6 && (y - 2.0).abs() < 1e-6);
        let mut two = vec![0.0; 16];
        two[0] = 1.0;
        two[15] = 1.0;
        let (x, y) = prob_centroid(&SemLocMap::from_weights(4, 4, &two).unwrap());
        assert_eq!((x, y), (2.0, 2.0));
    }

    #[test]
    fn r_su_examples() {
        let gt = GroundTruthRegion::new(4, 4, vec![CropRect::new(0, 0, 2, 4)]).unwrap();
        assert_eq!(r_su(&point_mass(4, 4, 1, 1), &gt).unwrap(), 1.0);
        assert_eq!(r_su(&point_mass(4, 4, 3, 1), &gt).unwrap(), 0.0);
        let uniform = SemLocMap::from_weights(4, 4, &[1.0; 16]).unwrap();
        assert!((r_su(&uniform, &gt).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn r_as_examples() {
        let gt = GroundTruthRegion::new(5, 5, vec![CropRect::new(2, 2, 1, 1)]).unwrap();
        assert_eq!(r_as(&point_mass(5, 5, 2, 2), &gt).unwrap(), 0.0);
        let far = GroundTruthRegion::new(5, 5, vec![CropRect::new(4, 4, 1, 1)]).unwrap();
        assert_eq!(r_as(&point_mass(5, 5, 0, 0), &far).unwrap(), 1.0);
        let uniform = SemLocMap::from_weights(5, 5, &[1.0; 25]).unwrap();
        assert!(r_as(&uniform, &gt).unwrap() < 1e-6);
    }

    #[test]
    fn r_da_examples() {
        assert_eq!(r_da(&point_mass(6, 3, 4, 1)), 1.0);
        let mut corners = vec![0.0; 9];
        corners[0] = 1.0;
        corners[8] = 1.0;
        assert!(r_da(&SemLocMap::from_weights(3, 3, &corners).unwrap()).abs() < 1e-7);
        let uniform = r_da(&SemLocMap::from_weights(8, 8, &[1.0; 64]).unwrap());
        assert!(uniform > 0.0 && uniform < 1.0, "{uniform}");
    }

    #[test]
    fn r_mi_examples() {
        let w = SemLocWeights::new(0.5, 0.25, 0.25).unwrap();
        assert_eq!(r_mi(1.0, 0.0, 1.0, &w), 1.0);
        assert_eq!(r_mi(0.0, 1.0, 0.0, &w), 0.0);
        let v = r_mi(0.7349, 0.2877, 0.7070, &SemLocWeights::default());
        assert!((v - 0.71807).abs() < 1e-4, "{v}");
        assert!(matches!(
            SemLocWeights::new(0.5, 0.5, 0.5),
            Err(Error::WeightSumInvalid { .. })
        ));
        assert!(SemLocWeights::new(1.2, -0.1, -0.1).is_err());
    }

    #[test]
    fn gt_validation() {
        assert!(GroundTruthRegion::new(4, 4, vec![]).is_err());
        assert!(GroundTruthRegion::new(4, 4, vec![CropRect::new(3, 3, 2, 1)]).is_err());
        let gt = GroundTruthRegion::new(
            4,
            4,
            vec![CropRect::new(0, 0, 2, 2), CropRect::new(1, 1, 2, 2)],
        )
        .unwrap();
        // union of 7 cells
        let (x, y) = gt.centroid();
        assert!((x - 1.5).abs() < 1e-12 && (y - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gray8_scales_to_max() {
        let m = SemLocMap::from_weights(2, 1, &[1.0, 3.0]).unwrap();
        assert_eq!(m.to_gray8(), vec![85, 255]);
    }
}
