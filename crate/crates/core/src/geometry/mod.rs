//! Landmark handling, Delaunay meshing, piecewise-affine warping and
//! convex-hull splicing.

mod delaunay;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use delaunay::{delaunay, TriangleMesh};

use delaunay::{orient2d, snap, SnappedPoint};

/// Number of core facial landmarks expected from annotation files.
pub const CORE_LANDMARK_COUNT: usize = 68;

/// A pixel-coordinate point, origin top-left, x rightward, y downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }
}

/// An ordered landmark list, optionally augmented with 8 frame points.
///
/// The core points (the first `core_count`) are the facial landmarks;
/// augmentation appends, in this order, the corners
/// `(0,0), (w-1,0), (0,h-1), (w-1,h-1)` and the midpoints of the top,
/// bottom, left and right edges, so a Delaunay mesh on the augmented set
/// covers the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
    core_count: usize,
    augmented: bool,
}

#[derive(Serialize, Deserialize)]
struct LandmarkFile {
    width: usize,
    height: usize,
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<LandmarkSet> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("landmark set may not be empty".into()));
        }
        let core_count = points.len();
        Ok(LandmarkSet {
            points,
            core_count,
            augmented: false,
        })
    }

    /// Reads the JSON annotation format:
    /// `{"width": w, "height": h, "points": [[x, y], ...]}` with exactly
    /// 68 points, all inside the `w` x `h` frame.
    pub fn load_json(path: impl AsRef<Path>) -> Result<LandmarkSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LandmarkFile = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, format!("landmark json: {e}")))?;
        if file.points.len() != CORE_LANDMARK_COUNT {
            return Err(Error::format(
                path,
                format!(
                    "expected {CORE_LANDMARK_COUNT} landmark points, found {}",
                    file.points.len()
                ),
            ));
        }
        for (i, p) in file.points.iter().enumerate() {
            if p[0] < 0.0
                || p[1] < 0.0
                || p[0] > (file.width - 1) as f64
                || p[1] > (file.height - 1) as f64
            {
                return Err(Error::format(
                    path,
                    format!("landmark {i} at ({}, {}) lies outside the {}x{} frame",
                        p[0], p[1], file.width, file.height),
                ));
            }
        }
        LandmarkSet::new(file.points.iter().map(|p| Point::new(p[0], p[1])).collect())
    }

    pub fn save_json(&self, path: impl AsRef<Path>, width: usize, height: usize) -> Result<()> {
        let path = path.as_ref();
        let file = LandmarkFile {
            width,
            height,
            points: self.core_points().iter().map(|p| [p.x, p.y]).collect(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::format(path, format!("landmark json: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// The landmarks proper, excluding any frame augmentation points.
    pub fn core_points(&self) -> &[Point] {
        &self.points[..self.core_count]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn core_count(&self) -> usize {
        self.core_count
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// Appends the 8 frame points for a `w` x `h` image.
    pub fn augment_boundary(&self, width: usize, height: usize) -> Result<LandmarkSet> {
        if self.augmented {
            return Err(Error::State("landmark set is already augmented".into()));
        }
        let w = (width - 1) as f64;
        let h = (height - 1) as f64;
        let mut points = self.points.clone();
        points.extend_from_slice(&[
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(0.0, h),
            Point::new(w, h),
            Point::new(w / 2.0, 0.0),
            Point::new(w / 2.0, h),
            Point::new(0.0, h / 2.0),
            Point::new(w, h / 2.0),
        ]);
        Ok(LandmarkSet {
            points,
            core_count: self.core_count,
            augmented: true,
        })
    }
}

/// Convex combination of two aligned landmark sets:
/// `(1 - alpha) * a + alpha * b` per point.
pub fn average_landmarks(a: &LandmarkSet, b: &LandmarkSet, alpha: f64) -> Result<LandmarkSet> {
    if a.len() != b.len() || a.augmented != b.augmented {
        return Err(Error::Shape(format!(
            "landmark sets differ: {} points (augmented: {}) vs {} points (augmented: {})",
            a.len(),
            a.augmented,
            b.len(),
            b.augmented
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    let points = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| Point::new((1.0 - alpha) * p.x + alpha * q.x, (1.0 - alpha) * p.y + alpha * q.y))
        .collect();
    Ok(LandmarkSet {
        points,
        core_count: a.core_count,
        augmented: a.augmented,
    })
}

/// A 2x3 affine transform acting on pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    /// Row-major `[[a, b, tx], [c, d, ty]]`.
    pub m: [[f64; 3]; 2],
}

impl AffineTransform {
    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y + self.m[0][2],
            self.m[1][0] * p.x + self.m[1][1] * p.y + self.m[1][2],
        )
    }
}

/// The unique affine transform mapping three source vertices onto three
/// destination vertices.
pub fn affine_from_triangles(src: &[Point; 3], dst: &[Point; 3]) -> Result<AffineTransform> {
    let det = src[0].x * (src[1].y - src[2].y) - src[0].y * (src[1].x - src[2].x)
        + (src[1].x * src[2].y - src[2].x * src[1].y);
    if det.abs() < 1e-9 {
        return Err(Error::Geometry(format!(
            "source triangle is degenerate (doubled area {det:.3e})"
        )));
    }
    // Cramer's rule on [x y 1] * row^T = target, one row per output axis.
    let solve = |t0: f64, t1: f64, t2: f64| {
        let a = t0 * (src[1].y - src[2].y) - src[0].y * (t1 - t2) + (t1 * src[2].y - t2 * src[1].y);
        let b = src[0].x * (t1 - t2) - t0 * (src[1].x - src[2].x) + (src[1].x * t2 - src[2].x * t1);
        let c = src[0].x * (src[1].y * t2 - src[2].y * t1)
            - src[0].y * (src[1].x * t2 - src[2].x * t1)
            + t0 * (src[1].x * src[2].y - src[2].x * src[1].y);
        [a / det, b / det, c / det]
    };
    Ok(AffineTransform {
        m: [
            solve(dst[0].x, dst[1].x, dst[2].x),
            solve(dst[0].y, dst[1].y, dst[2].y),
        ],
    })
}

/// Piecewise-affine warp by inverse mapping: every output pixel is located
/// in its destination-mesh triangle, mapped back to the source frame with
/// that triangle's inverse affine and bilinearly sampled.
pub fn warp_image(
    img: &Image,
    src_lms: &LandmarkSet,
    dst_lms: &LandmarkSet,
    mesh: &TriangleMesh,
) -> Result<Image> {
    if src_lms.len() != dst_lms.len() || src_lms.augmented != dst_lms.augmented {
        return Err(Error::Shape("source and destination landmark sets differ".into()));
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let src = src_lms.points();
    let dst = dst_lms.points();

    // Per-triangle inverse mapping (destination -> source).
    let mut inverse = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let d = [dst[t[0]], dst[t[1]], dst[t[2]]];
        let s = [src[t[0]], src[t[1]], src[t[2]]];
        inverse.push((d, affine_from_triangles(&d, &s)?));
    }

    let mut out = Image::new(h, w, ch, 0.0)?;
    let mut claimed = vec![false; h * w];
    for pass in 0..2 {
        // The second pass widens the inclusion tolerance to absorb float
        // error on shared edges; after boundary augmentation no pixel
        // should survive it unclaimed.
        let tol = if pass == 0 { -1e-9 } else { -1e-6 };
        for (tri, affine) in &inverse {
            let min_x = tri.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let max_x = tri.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let min_y = tri.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
            let max_y = tri.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
            let x0 = (min_x.floor().max(0.0)) as usize;
            let x1 = (max_x.ceil().min((w - 1) as f64)) as usize;
            let y0 = (min_y.floor().max(0.0)) as usize;
            let y1 = (max_y.ceil().min((h - 1) as f64)) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if claimed[y * w + x] {
                        continue;
                    }
                    let p = Point::new(x as f64, y as f64);
                    if barycentric_inside(p, tri, tol) {
                        let s = affine.apply(p);
                        for c in 0..ch {
                            out.set(y, x, c, img.sample_bilinear(s.x, s.y, c));
                        }
                        claimed[y * w + x] = true;
                    }
                }
            }
        }
        if claimed.iter().all(|&c| c) {
            return Ok(out);
        }
    }
    let missing = claimed.iter().filter(|&&c| !c).count();
    Err(Error::Internal(format!(
        "{missing} pixels not covered by the warp mesh"
    )))
}

fn barycentric_inside(p: Point, tri: &[Point; 3], tol: f64) -> bool {
    let area = cross(tri[0], tri[1], tri[2]);
    if area == 0.0 {
        return false;
    }
    let w0 = cross(tri[1], tri[2], p) / area;
    let w1 = cross(tri[2], tri[0], p) / area;
    let w2 = cross(tri[0], tri[1], p) / area;
    w0 >= tol && w1 >= tol && w2 >= tol
}

fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Convex hull of a point set, counterclockwise (positive orientation in
/// the stored coordinate system), starting at the lexicographically
/// smallest point, with collinearboundary points dropped. Turn decisions
/// use the same exact quantized predicates as the triangulation.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if points.len() < 3 {
        return Err(Error::Geometry(format!(
            "convex hull needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut indexed: Vec<(SnappedPoint, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (snap(p), i))
        .collect();
    indexed.sort_unstable();
    indexed.dedup_by_key(|e| e.0);

    let s = |e: &(SnappedPoint, usize)| e.0;
    let mut lower: Vec<(SnappedPoint, usize)> = Vec::new();
    for &e in &indexed {
        while lower.len() >= 2
            && orient2d(s(&lower[lower.len() - 2]), s(&lower[lower.len() - 1]), e.0) <= 0
        {
            lower.pop();
        }
        lower.push(e);
    }
    let mut upper: Vec<(SnappedPoint, usize)> = Vec::new();
    for &e in indexed.iter().rev() {
        while upper.len() >= 2
            && orient2d(s(&upper[upper.len() - 2]), s(&upper[upper.len() - 1]), e.0) <= 0
        {
            upper.pop();
        }
        upper.push(e);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::Geometry("all points are collinear".into()));
    }
    // The chain is already positively oriented for this predicate; rotate
    // so the lexicographically smallest point leads.
    let start = (0..lower.len()).min_by_key(|&i| lower[i].0).unwrap();
    lower.rotate_left(start);
    Ok(lower.into_iter().map(|(_, i)| points[i]).collect())
}

/// Per-pixel weights in `[0, 1]`; the blending carrier for hull splicing.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Mask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Rasterizes a convex polygon: 1 inside, 0 outside. With `feather > 0`
/// the value ramps linearly from 0 at the boundary to 1 at depth
/// `feather`, entirely inside the polygon, so pixels outside the hull are
/// never touched by a splice. A degenerate polygon gives an all-zero mask.
pub fn hull_mask(poly: &[Point], width: usize, height: usize, feather: f64) -> Mask {
    let mut values = vec![0.0; width * height];
    if poly.len() >= 3 {
        for y in 0..height {
            for x in 0..width {
                let p = Point::new(x as f64, y as f64);
                let mut inside = true;
                let mut depth = f64::INFINITY;
                for i in 0..poly.len() {
                    let a = poly[i];
                    let b = poly[(i + 1) % poly.len()];
                    let c = cross(a, b, p);
                    if c < 0.0 {
                        inside = false;
                        break;
                    }
                    let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
                    if len > 0.0 {
                        depth = depth.min(c / len);
                    }
                }
                if inside {
                    values[y * width + x] = if feather > 0.0 {
                        (depth / feather).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                }
            }
        }
    }
    Mask {
        height,
        width,
        values,
    }
}

/// Blends `mask * morph + (1 - mask) * background` per pixel and channel.
/// Weights of exactly 0 or 1 copy the corresponding input bit-for-bit.
pub fn splice(morph: &Image, background: &Image, mask: &Mask) -> Result<Image> {
    if !morph.same_shape(background)
        || mask.height != morph.height()
        || mask.width != morph.width()
    {
        return Err(Error::Shape(format!(
            "splice inputs differ: morph {}x{}x{}, background {}x{}x{}, mask {}x{}",
            morph.height(),
            morph.width(),
            morph.channels(),
            background.height(),
            background.width(),
            background.channels(),
            mask.height,
            mask.width
        )));
    }
    let mut out = background.clone();
    for y in 0..morph.height() {
        for x in 0..morph.width() {
            let m = mask.get(y, x);
            if m == 0.0 {
                continue;
            }
            for c in 0..morph.channels() {
                let v = if m == 1.0 {
                    morph.get(y, x, c)
                } else {
                    let bg = background.get(y, x, c);
                    bg + m * (morph.get(y, x, c) - bg)
                };
                out.set(y, x, c, v);
            }
        }
    }
    Ok(out)
}
