//! Shared test fixtures: procedurally generated face-like images with
//! consistent 68-point landmark annotations, and desk-scale corpora
//! built from them.

use morphlet::geometry::{LandmarkSet, Point};
use morphlet::image::Image;
use morphlet::morph::{generate_morph, MorphConfig};

pub const FACE_SIZE: usize = 96;

/// SplitMix64; enough randomness for procedural textures and layouts.
pub struct Rng(pub u64);

impl Rng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }
}

pub struct SyntheticFace {
    pub image: Image,
    pub landmarks: LandmarkSet,
}

/// Draws a face-like image (elliptical head, eyes, brows, nose, mouth on
/// a textured background) and places 68 landmarks consistent with the
/// drawn geometry. Deterministic per seed.
pub fn synthetic_face(seed: u64) -> SyntheticFace {
    let n = FACE_SIZE;
    let mut rng = Rng(seed.wrapping_mul(0x5851f42d4c957f2d).wrapping_add(1));

    let cx = n as f64 * rng.range(0.46, 0.54);
    let cy = n as f64 * rng.range(0.48, 0.55);
    let head_rx = n as f64 * rng.range(0.24, 0.30);
    let head_ry = n as f64 * rng.range(0.30, 0.38);
    let skin = rng.range(120.0, 170.0);
    let bg = rng.range(185.0, 225.0);
    let eye_dx = head_rx * rng.range(0.40, 0.52);
    let eye_y = cy - head_ry * rng.range(0.18, 0.28);
    let eye_rx = head_rx * rng.range(0.16, 0.22);
    let eye_ry = eye_rx * rng.range(0.45, 0.65);
    let eye_tone = rng.range(30.0, 70.0);
    let brow_lift = eye_ry * rng.range(2.2, 3.2);
    let nose_tip_y = cy + head_ry * rng.range(0.08, 0.16);
    let mouth_y = cy + head_ry * rng.range(0.42, 0.55);
    let mouth_rx = head_rx * rng.range(0.38, 0.52);
    let mouth_ry = mouth_rx * rng.range(0.18, 0.30);
    let mouth_tone = rng.range(50.0, 90.0);

    // Texture phases for the smooth banded noise.
    let (p1, p2, p3) = (
        rng.range(0.0, std::f64::consts::TAU),
        rng.range(0.0, std::f64::consts::TAU),
        rng.range(0.0, std::f64::consts::TAU),
    );
    let (f1, f2) = (rng.range(0.15, 0.35), rng.range(0.10, 0.25));

    let mut img = Image::new(n, n, 1, 0.0).unwrap();
    let mut noise = Rng(seed ^ 0xabcdef);
    let ellipse = |x: f64, y: f64, ex: f64, ey: f64, rx: f64, ry: f64| -> f64 {
        let dx = (x - ex) / rx;
        let dy = (y - ey) / ry;
        dx * dx + dy * dy
    };
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64, y as f64);
            let grain = noise.range(-6.0, 6.0);
            let bands = 8.0 * (xf * f1 + p1).sin() * (yf * f2 + p2).cos()
                + 5.0 * ((xf + yf) * 0.11 + p3).sin();
            let mut v = bg - 0.15 * yf + bands + grain;

            let head = ellipse(xf, yf, cx, cy, head_rx, head_ry);
            if head <= 1.0 {
                // Shaded skin, darker towards the silhouette.
                v = skin + bands + grain - 18.0 * head;
                for side in [-1.0, 1.0] {
                    let e = ellipse(xf, yf, cx + side * eye_dx, eye_y, eye_rx, eye_ry);
                    if e <= 1.0 {
                        v = eye_tone + 30.0 * e + grain * 0.5;
                    }
                    let b = ellipse(
                        xf,
                        yf,
                        cx + side * eye_dx,
                        eye_y - brow_lift,
                        eye_rx * 1.3,
                        eye_ry * 0.5,
                    );
                    if b <= 1.0 {
                        v = eye_tone * 0.8 + grain * 0.5;
                    }
                }
                let nose = ellipse(xf, yf, cx, nose_tip_y, eye_rx * 0.5, eye_ry * 2.2);
                if nose <= 1.0 {
                    v -= 25.0 * (1.0 - nose);
                }
                let mouth = ellipse(xf, yf, cx, mouth_y, mouth_rx, mouth_ry);
                if mouth <= 1.0 {
                    v = mouth_tone + 25.0 * mouth + grain * 0.5;
                }
            }
            img.set(y, x, 0, v.clamp(0.0, 255.0));
        }
    }

    // 68 landmarks tied to the same geometry.
    let mut pts: Vec<Point> = Vec::with_capacity(68);
    // 0-16: jawline, left temple around the chin to the right temple.
    for k in 0..17 {
        let theta = std::f64::consts::PI * (0.9 - 1.8 * (k as f64 / 16.0)) + std::f64::consts::FRAC_PI_2;
        pts.push(Point::new(
            cx + head_rx * theta.cos(),
            cy + head_ry * theta.sin(),
        ));
    }
    // 17-26: brows, five points each.
    for side in [-1.0f64, 1.0] {
        for k in 0..5 {
            let t = (k as f64 / 4.0 - 0.5) * 2.0;
            pts.push(Point::new(
                cx + side * eye_dx + t * eye_rx * 1.3 * side,
                eye_y - brow_lift - eye_ry * 0.5 * (1.0 - t * t),
            ));
        }
    }
    // 27-30: nose bridge; 31-35: nostril row.
    for k in 0..4 {
        let t = k as f64 / 3.0;
        pts.push(Point::new(
            cx,
            eye_y + (nose_tip_y - eye_y) * (0.25 + 0.75 * t),
        ));
    }
    for k in 0..5 {
        let t = k as f64 / 4.0 - 0.5;
        pts.push(Point::new(
            cx + t * eye_rx * 1.6,
            nose_tip_y + eye_ry * 1.2,
        ));
    }
    // 36-47: eye contours, six points each.
    for side in [-1.0f64, 1.0] {
        let ex = cx + side * eye_dx;
        for k in 0..6 {
            let theta = k as f64 / 6.0 * std::f64::consts::TAU;
            pts.push(Point::new(
                ex + eye_rx * theta.cos(),
                eye_y + eye_ry * theta.sin(),
            ));
        }
    }
    // 48-59: outer lip ring; 60-67: inner ring.
    for k in 0..12 {
        let theta = k as f64 / 12.0 * std::f64::consts::TAU;
        pts.push(Point::new(
            cx + mouth_rx * theta.cos(),
            mouth_y + mouth_ry * theta.sin(),
        ));
    }
    for k in 0..8 {
        let theta = k as f64 / 8.0 * std::f64::consts::TAU;
        pts.push(Point::new(
            cx + mouth_rx * 0.55 * theta.cos(),
            mouth_y + mouth_ry * 0.55 * theta.sin(),
        ));
    }
    assert_eq!(pts.len(), 68);
    // Tiny deterministic jitter so no configuration is exactly cocircular.
    for (i, p) in pts.iter_mut().enumerate() {
        let mut j = Rng(seed ^ (i as u64).wrapping_mul(0x9e37));
        p.x = (p.x + j.range(-0.4, 0.4)).clamp(1.0, (n - 2) as f64);
        p.y = (p.y + j.range(-0.4, 0.4)).clamp(1.0, (n - 2) as f64);
    }

    SyntheticFace {
        image: img,
        landmarks: LandmarkSet::new(pts).unwrap(),
    }
}

/// A desk corpus: `n_bona` bona fide faces and `n_morphs` wavelet morphs
/// built from disjoint face pairs (two spliced outputs per pair).
pub struct DeskCorpus {
    pub bona_fide: Vec<Image>,
    pub morphs: Vec<Image>,
}

pub fn desk_corpus(n_bona: usize, n_morphs: usize, seed: u64) -> DeskCorpus {
    let cfg = MorphConfig::default();
    let bona_fide: Vec<Image> = (0..n_bona)
        .map(|i| synthetic_face(seed + i as u64).image)
        .collect();
    let mut morphs = Vec::with_capacity(n_morphs);
    let mut k = 0u64;
    while morphs.len() < n_morphs {
        let a = synthetic_face(seed + 10_000 + 2 * k);
        let b = synthetic_face(seed + 10_001 + 2 * k);
        let res = generate_morph(&a.image, &b.image, &a.landmarks, &b.landmarks, &cfg)
            .expect("synthetic faces must morph");
        morphs.push(res.on_source);
        if morphs.len() < n_morphs {
            morphs.push(res.on_destination);
        }
        k += 1;
    }
    DeskCorpus { bona_fide, morphs }
}
