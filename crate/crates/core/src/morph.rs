//! The end-to-end morph pipeline: warp both subjects onto their averaged
//! landmarks, fuse in the wavelet-packet domain, reconstruct and splice
//! the face hull back onto each subject's frame.

use crate::error::{Error, Result};
use crate::geometry::{
    average_landmarks, convex_hull, delaunay, hull_mask, splice, warp_image, LandmarkSet, Point,
};
use crate::image::Image;
use crate::wavelet::{fuse_subbands, packet_decompose, packet_reconstruct, WaveletFamily};

#[derive(Debug, Clone, Copy)]
pub struct MorphConfig {
    /// Landmark averaging weight towards subject J.
    pub alpha: f64,
    pub family: WaveletFamily,
    pub levels: usize,
    /// Feather radius in pixels for the hull splice; 0 is a hard splice.
    pub feather: f64,
}

impl Default for MorphConfig {
    fn default() -> Self {
        MorphConfig {
            alpha: 0.5,
            family: WaveletFamily::Haar,
            levels: 3,
            feather: 0.0,
        }
    }
}

/// Everything a morph job produces.
#[derive(Debug, Clone)]
pub struct MorphResult {
    /// Reconstructed full-frame morph before splicing.
    pub raw_morph: Image,
    /// Hull region spliced onto subject I's frame.
    pub on_source: Image,
    /// Hull region spliced onto subject J's frame.
    pub on_destination: Image,
    /// The averaged (common) landmarks, un-augmented.
    pub common_landmarks: LandmarkSet,
    /// Convex hull of the common landmarks, counterclockwise.
    pub hull: Vec<Point>,
}

/// Runs the morph pipeline on one aligned pair.
///
/// Steps: average landmarks, augment with frame points, Delaunay-mesh the
/// common set, warp both images onto it, center-crop to dimensions
/// divisible by `2^levels`, per-channel packet decomposition, fusion and
/// reconstruction, clip to `[0, 255]`, re-embed the window, then splice
/// the hull of the core common landmarks onto both original frames.
///
/// Outside the divisible window (a border of at most `2^levels - 1`
/// pixels per axis) the raw morph falls back to plain pixel averaging of
/// the two warped subjects.
pub fn generate_morph(
    img_i: &Image,
    img_j: &Image,
    lms_i: &LandmarkSet,
    lms_j: &LandmarkSet,
    cfg: &MorphConfig,
) -> Result<MorphResult> {
    if !img_i.same_shape(img_j) {
        return Err(Error::Shape(format!(
            "input images differ: {}x{}x{} vs {}x{}x{}",
            img_i.height(),
            img_i.width(),
            img_i.channels(),
            img_j.height(),
            img_j.width(),
            img_j.channels()
        )));
    }
    if lms_i.is_augmented() || lms_j.is_augmented() {
        return Err(Error::State("landmark sets must not be pre-augmented".into()));
    }
    let (h, w) = (img_i.height(), img_i.width());
    check_in_frame(lms_i, w, h, "subject I")?;
    check_in_frame(lms_j, w, h, "subject J")?;

    let common = average_landmarks(lms_i, lms_j, cfg.alpha)?;
    let aug_i = lms_i.augment_boundary(w, h)?;
    let aug_j = lms_j.augment_boundary(w, h)?;
    let aug_k = common.augment_boundary(w, h)?;

    let mesh = delaunay(aug_k.points())?;
    let warped_i = warp_image(img_i, &aug_i, &aug_k, &mesh)?;
    let warped_j = warp_image(img_j, &aug_j, &aug_k, &mesh)?;

    let div = 1usize << cfg.levels;
    let crop_h = (h / div) * div;
    let crop_w = (w / div) * div;
    if crop_h == 0 || crop_w == 0 {
        return Err(Error::Shape(format!(
            "{h}x{w} image too small for a {}-level decomposition",
            cfg.levels
        )));
    }
    let y0 = (h - crop_h) / 2;
    let x0 = (w - crop_w) / 2;

    let win_i = warped_i.crop(y0, x0, crop_h, crop_w)?;
    let win_j = warped_j.crop(y0, x0, crop_h, crop_w)?;
    let mut fused_planes = Vec::with_capacity(win_i.channels());
    for c in 0..win_i.channels() {
        let grid_i = packet_decompose(&win_i.channel_plane(c), cfg.levels, cfg.family)?;
        let grid_j = packet_decompose(&win_j.channel_plane(c), cfg.levels, cfg.family)?;
        let fused = fuse_subbands(&grid_i, &grid_j)?;
        fused_planes.push(packet_reconstruct(&fused)?);
    }
    let fused_window = Image::from_planes(&fused_planes)?.clipped(0.0, 255.0)?;

    // Full-frame raw morph: averaged warps with the fused window re-embedded.
    let mut raw = warped_i.clone();
    for (o, &j) in raw.pixels_mut().iter_mut().zip(warped_j.pixels()) {
        *o = 0.5 * (*o + j);
    }
    for y in 0..crop_h {
        for x in 0..crop_w {
            for c in 0..fused_window.channels() {
                raw.set(y0 + y, x0 + x, c, fused_window.get(y, x, c));
            }
        }
    }

    let hull = convex_hull(common.core_points())?;
    let mask = hull_mask(&hull, w, h, cfg.feather);
    let on_source = splice(&raw, img_i, &mask)?;
    let on_destination = splice(&raw, img_j, &mask)?;

    Ok(MorphResult {
        raw_morph: raw,
        on_source,
        on_destination,
        common_landmarks: common,
        hull,
    })
}

fn check_in_frame(lms: &LandmarkSet, w: usize, h: usize, who: &str) -> Result<()> {
    for (i, p) in lms.core_points().iter().enumerate() {
        if p.x < 0.0 || p.y < 0.0 || p.x > (w - 1) as f64 || p.y > (h - 1) as f64 {
            return Err(Error::InvalidArgument(format!(
                "{who} landmark {i} at ({}, {}) outside the {w}x{h} frame",
                p.x, p.y
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hull_mask;

    fn face_like_landmarks(w: usize, h: usize, shift: f64) -> LandmarkSet {
        // A ring of points plus interior detail, vaguely face-shaped,
        // jittered so no two sets are identical.
        let cx = w as f64 / 2.0 + shift;
        let cy = h as f64 / 2.0;
        let rx = w as f64 * 0.3;
        let ry = h as f64 * 0.35;
        let mut pts = Vec::new();
        for k in 0..12 {
            let t = k as f64 / 12.0 * std::f64::consts::TAU;
            pts.push(Point::new(cx + rx * t.cos(), cy + ry * t.sin()));
        }
        pts.push(Point::new(cx - rx * 0.4, cy - ry * 0.3));
        pts.push(Point::new(cx + rx * 0.4, cy - ry * 0.3));
        pts.push(Point::new(cx, cy + ry * 0.35));
        LandmarkSet::new(pts).unwrap()
    }

    fn textured_image(h: usize, w: usize, seed: u64) -> Image {
        let mut img = Image::new(h, w, 1, 0.0).unwrap();
        let mut s = seed | 1;
        for y in 0..h {
            for x in 0..w {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                let noise = (s >> 33) as f64 / (1u64 << 31) as f64 * 40.0;
                let base = 80.0 + 60.0 * ((x as f64 / 9.0).sin() * (y as f64 / 7.0).cos());
                img.set(y, x, 0, (base + noise).clamp(0.0, 255.0));
            }
        }
        img
    }

    #[test]
    fn self_morph_is_identity_over_crop() {
        let img = textured_image(40, 40, 3);
        let lms = face_like_landmarks(40, 40, 0.0);
        let res = generate_morph(&img, &img, &lms, &lms, &MorphConfig::default()).unwrap();
        // 40 divides by 8, so the fused window covers the whole frame.
        let err = res.raw_morph.linf_distance(&img).unwrap();
        assert!(err <= 1e-3, "self-morph error {err}");
    }

    #[test]
    fn self_morph_identity_with_uneven_dims() {
        let img = textured_image(37, 43, 5);
        let lms = face_like_landmarks(43, 37, 0.0);
        let res = generate_morph(&img, &img, &lms, &lms, &MorphConfig::default()).unwrap();
        // Interior window starts at ((37-32)/2, (43-40)/2) = (2, 1).
        let win = res.raw_morph.crop(2, 1, 32, 40).unwrap();
        let want = img.crop(2, 1, 32, 40).unwrap();
        let err = win.linf_distance(&want).unwrap();
        assert!(err <= 1e-3, "self-morph error over window {err}");
        // The border fill averages two identical warps, so the whole frame
        // should match as well.
        let err = res.raw_morph.linf_distance(&img).unwrap();
        assert!(err <= 1e-3, "self-morph full-frame error {err}");
    }

    #[test]
    fn constant_pair_gives_baseband_average() {
        let a = Image::new(32, 32, 1, 100.0).unwrap();
        let b = Image::new(32, 32, 1, 200.0).unwrap();
        let lms = face_like_landmarks(32, 32, 0.0);
        let res = generate_morph(&a, &b, &lms, &lms, &MorphConfig::default()).unwrap();
        for &v in res.raw_morph.pixels() {
            assert!((v - 150.0).abs() < 1e-9, "expected 150, got {v}");
        }
    }

    #[test]
    fn splice_leaves_outside_hull_untouched() {
        let a = textured_image(48, 48, 11);
        let b = textured_image(48, 48, 13);
        let la = face_like_landmarks(48, 48, -2.0);
        let lb = face_like_landmarks(48, 48, 2.0);
        let res = generate_morph(&a, &b, &la, &lb, &MorphConfig::default()).unwrap();

        assert!(res.on_source.same_shape(&a));
        assert!(res.on_destination.same_shape(&b));
        assert!(res.raw_morph.same_shape(&a));

        let mask = hull_mask(&res.hull, 48, 48, 0.0);
        let mut outside = 0;
        for y in 0..48 {
            for x in 0..48 {
                if mask.get(y, x) == 0.0 {
                    outside += 1;
                    assert_eq!(res.on_source.get(y, x, 0), a.get(y, x, 0));
                    assert_eq!(res.on_destination.get(y, x, 0), b.get(y, x, 0));
                }
            }
        }
        assert!(outside > 100, "hull mask suspiciously large");
    }

    #[test]
    fn pipeline_is_deterministic() {
        let a = textured_image(40, 40, 21);
        let b = textured_image(40, 40, 22);
        let la = face_like_landmarks(40, 40, -1.5);
        let lb = face_like_landmarks(40, 40, 1.5);
        let r1 = generate_morph(&a, &b, &la, &lb, &MorphConfig::default()).unwrap();
        let r2 = generate_morph(&a, &b, &la, &lb, &MorphConfig::default()).unwrap();
        assert_eq!(r1.raw_morph.pixels(), r2.raw_morph.pixels());
        assert_eq!(r1.on_source.pixels(), r2.on_source.pixels());
        assert_eq!(r1.on_destination.pixels(), r2.on_destination.pixels());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let a = Image::new(32, 32, 1, 0.0).unwrap();
        let b = Image::new(32, 40, 1, 0.0).unwrap();
        let lms = face_like_landmarks(32, 32, 0.0);
        assert!(matches!(
            generate_morph(&a, &b, &lms, &lms, &MorphConfig::default()),
            Err(Error::Shape(_))
        ));

        let aug = lms.augment_boundary(32, 32).unwrap();
        let a2 = Image::new(32, 32, 1, 0.0).unwrap();
        assert!(matches!(
            generate_morph(&a, &a2, &aug, &lms, &MorphConfig::default()),
            Err(Error::State(_))
        ));
    }
}
