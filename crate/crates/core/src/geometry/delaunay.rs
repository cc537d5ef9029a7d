//! Delaunay triangulation with exact integer predicates.
//!
//! Input coordinates are quantized to a 1/64-pixel grid and all orientation
//! and in-circle tests run in `i128` arithmetic, so the combinatorial result
//! is exact and bit-deterministic. Only connectivity comes from the
//! quantized coordinates; downstream affine transforms use the original
//! `f64` points.
//!
//! Cocircular tie-break: in every cocircular quad the kept diagonal is the
//! one incident to the lexicographically smallest (by `(x, y)`) vertex.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::Point;

/// Quantization factor for exact predicates (1/64 pixel).
pub(crate) const SNAP: f64 = 64.0;

pub(crate) type SnappedPoint = (i64, i64);

pub(crate) fn snap(p: Point) -> SnappedPoint {
    ((p.x * SNAP).round() as i64, (p.y * SNAP).round() as i64)
}

/// Twice the signed area of `(a, b, c)`; positive when counterclockwise
/// in the stored coordinate system.
pub(crate) fn orient2d(a: SnappedPoint, b: SnappedPoint, c: SnappedPoint) -> i128 {
    let abx = (b.0 - a.0) as i128;
    let aby = (b.1 - a.1) as i128;
    let acx = (c.0 - a.0) as i128;
    let acy = (c.1 - a.1) as i128;
    abx * acy - aby * acx
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `(a, b, c)`, zero when cocircular.
pub(crate) fn incircle(a: SnappedPoint, b: SnappedPoint, c: SnappedPoint, d: SnappedPoint) -> i128 {
    let adx = (a.0 - d.0) as i128;
    let ady = (a.1 - d.1) as i128;
    let bdx = (b.0 - d.0) as i128;
    let bdy = (b.1 - d.1) as i128;
    let cdx = (c.0 - d.0) as i128;
    let cdy = (c.1 - d.1) as i128;
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    adx * (bdy * clift - cdy * blift) - ady * (bdx * clift - cdx * blift)
        + alift * (bdx * cdy - cdx * bdy)
}

/// A triangulation as vertex-index triples into the point list it was
/// built from. Triangles are counterclockwise and stored in a canonical
/// order (smallest index first within each triple, triples sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleMesh {
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Delaunay triangulation of a point set.
///
/// Bowyer-Watson insertion in input order followed by a Lawson flip pass
/// that also canonicalizes cocircular quads per the tie-break above.
pub fn delaunay(points: &[Point]) -> Result<TriangleMesh> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Geometry(format!(
            "triangulation needs at least 3 points, got {n}"
        )));
    }
    let snapped: Vec<SnappedPoint> = points.iter().map(|&p| snap(p)).collect();

    let mut sorted = snapped.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Geometry("duplicate points in triangulation input".into()));
    }
    if !has_non_collinear_triple(&snapped) {
        return Err(Error::Geometry("all points are collinear".into()));
    }

    let verts = with_super_triangle(&snapped);
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for p in 0..n {
        insert_point(p, &verts, &mut tris);
    }

    // Drop everything attached to the synthetic outer triangle.
    tris.retain(|t| t.iter().all(|&v| v < n));
    for t in &mut tris {
        orient_ccw(t, &verts);
    }

    flip_pass(&mut tris, &verts);

    Ok(canonicalize(tris))
}

fn has_non_collinear_triple(pts: &[SnappedPoint]) -> bool {
    // Anchor on two distinct points, then scan for a third off their line.
    let a = pts[0];
    let Some(&b) = pts.iter().find(|&&q| q != a) else {
        return false;
    };
    pts.iter().any(|&c| orient2d(a, b, c) != 0)
}

fn with_super_triangle(snapped: &[SnappedPoint]) -> Vec<SnappedPoint> {
    let min_x = snapped.iter().map(|p| p.0).min().unwrap();
    let max_x = snapped.iter().map(|p| p.0).max().unwrap();
    let min_y = snapped.iter().map(|p| p.1).min().unwrap();
    let max_y = snapped.iter().map(|p| p.1).max().unwrap();
    let span = (max_x - min_x).max(max_y - min_y).max(1);
    let m = span.saturating_mul(256) + 1024;
    let cx = (min_x + max_x) / 2;
    let cy = (min_y + max_y) / 2;
    let mut verts = snapped.to_vec();
    verts.push((cx - 3 * m, cy - m));
    verts.push((cx + 3 * m, cy - m));
    verts.push((cx, cy + 3 * m));
    verts
}

fn insert_point(p: usize, verts: &[SnappedPoint], tris: &mut Vec<[usize; 3]>) {
    let pt = verts[p];
    let mut bad = Vec::new();
    for (i, t) in tris.iter().enumerate() {
        let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
        let (a, b, c) = if orient2d(a, b, c) >= 0 { (a, b, c) } else { (a, c, b) };
        if incircle(a, b, c, pt) > 0 {
            bad.push(i);
        }
    }

    // Cavity boundary: edges used by exactly one bad triangle.
    let mut directed: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for &i in &bad {
        let t = tris[i];
        for k in 0..3 {
            let (u, v) = (t[k], t[(k + 1) % 3]);
            let key = (u.min(v), u.max(v));
            *directed.entry(key).or_insert(0) += 1;
        }
    }
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for &i in &bad {
        let t = tris[i];
        for k in 0..3 {
            let (u, v) = (t[k], t[(k + 1) % 3]);
            let key = (u.min(v), u.max(v));
            if directed[&key] == 1 {
                boundary.push((u, v));
            }
        }
    }

    for &i in bad.iter().rev() {
        tris.swap_remove(i);
    }
    for (u, v) in boundary {
        let mut t = [p, u, v];
        if orient2d(verts[t[0]], verts[t[1]], verts[t[2]]) == 0 {
            continue; // degenerate fan, cannot happen for points off the edge
        }
        orient_ccw(&mut t, verts);
        tris.push(t);
    }
}

fn orient_ccw(t: &mut [usize; 3], verts: &[SnappedPoint]) {
    if orient2d(verts[t[0]], verts[t[1]], verts[t[2]]) < 0 {
        t.swap(1, 2);
    }
}

/// Lawson flips restoring the empty-circumcircle property, plus the
/// deterministic cocircular canonicalization.
fn flip_pass(tris: &mut [[usize; 3]], verts: &[SnappedPoint]) {
    let max_rounds = 4 * tris.len() * tris.len() + 16;
    for _ in 0..max_rounds {
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, t) in tris.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                edges.entry((u.min(v), u.max(v))).or_default().push(i);
            }
        }
        let mut flipped = false;
        for ((a, b), owners) in &edges {
            if owners.len() != 2 {
                continue;
            }
            let (t1, t2) = (owners[0], owners[1]);
            let c = third_vertex(tris[t1], *a, *b);
            let d = third_vertex(tris[t2], *a, *b);
            let mut tri1 = [*a, *b, c];
            orient_ccw(&mut tri1, verts);
            let s = incircle(verts[tri1[0]], verts[tri1[1]], verts[tri1[2]], verts[d]);
            let should_flip = if s > 0 {
                true
            } else if s == 0 {
                // Cocircular: diagonal must touch the lex-smallest quad vertex.
                let m = [*a, *b, c, d]
                    .into_iter()
                    .min_by_key(|&v| verts[v])
                    .unwrap();
                m != *a && m != *b
            } else {
                false
            };
            if should_flip && flip_valid(*a, *b, c, d, verts) {
                tris[t1] = [c, d, *a];
                tris[t2] = [d, c, *b];
                orient_ccw(&mut tris[t1], verts);
                orient_ccw(&mut tris[t2], verts);
                flipped = true;
                break;
            }
        }
        if !flipped {
            return;
        }
    }
}

fn third_vertex(t: [usize; 3], a: usize, b: usize) -> usize {
    t.into_iter().find(|&v| v != a && v != b).unwrap()
}

/// A diagonal swap is only legal when the quad is strictly convex.
fn flip_valid(a: usize, b: usize, c: usize, d: usize, verts: &[SnappedPoint]) -> bool {
    let (pa, pb, pc, pd) = (verts[a], verts[b], verts[c], verts[d]);
    let s1 = orient2d(pc, pd, pa);
    let s2 = orient2d(pc, pd, pb);
    let s3 = orient2d(pa, pb, pc);
    let s4 = orient2d(pa, pb, pd);
    (s1 > 0) != (s2 > 0) && s1 != 0 && s2 != 0 && (s3 > 0) != (s4 > 0) && s3 != 0 && s4 != 0
}

fn canonicalize(mut tris: Vec<[usize; 3]>) -> TriangleMesh {
    for t in &mut tris {
        // Rotate the cyclic order so the smallest index leads.
        let k = (0..3).min_by_key(|&k| t[k]).unwrap();
        t.rotate_left(k);
    }
    tris.sort_unstable();
    TriangleMesh { triangles: tris }
}
