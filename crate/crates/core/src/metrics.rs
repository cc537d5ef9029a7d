//! Quality and attack-success measurement: SSIM scalar and map,
//! hull-region comparison, embedding distances and ROC/AUC.

use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::image::Image;
use crate::wavelet::{packet_decompose, WaveletFamily};

/// SSIM constants per the reference formulation: 11x11 Gaussian window
/// with sigma 1.5, `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = 255`.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian smoothing with border renormalization: near the
/// frame edge the kernel weights are rescaled over the in-bounds taps, so
/// the map keeps full image dimensions.
fn smooth(field: &Array2<f64>, kernel: &[f64; SSIM_WINDOW]) -> Array2<f64> {
    let (h, w) = field.dim();
    let r = SSIM_WINDOW / 2;
    let mut rows = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut weight = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                let ix = x as isize + t as isize - r as isize;
                if ix >= 0 && ix < w as isize {
                    acc += k * field[(y, ix as usize)];
                    weight += k;
                }
            }
            rows[(y, x)] = acc / weight;
        }
    }
    let mut out = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut weight = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                let iy = y as isize + t as isize - r as isize;
                if iy >= 0 && iy < h as isize {
                    acc += k * rows[(iy as usize, x)];
                    weight += k;
                }
            }
            out[(y, x)] = acc / weight;
        }
    }
    out
}

/// Per-pixel local SSIM map over the grayscale conversions of `a` and
/// `b`, same dimensions as the inputs, values in `[-1, 1]`.
pub fn ssim_map(a: &Image, b: &Image) -> Result<Image> {
    if a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels() {
        return Err(Error::Shape(format!(
            "ssim inputs differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    let x = a.to_grayscale().channel_plane(0);
    let y = b.to_grayscale().channel_plane(0);
    let kernel = gaussian_kernel();

    let mu_x = smooth(&x, &kernel);
    let mu_y = smooth(&y, &kernel);
    let xx = smooth(&(&x * &x), &kernel);
    let yy = smooth(&(&y * &y), &kernel);
    let xy = smooth(&(&x * &y), &kernel);

    let (h, w) = x.dim();
    let mut map = Image::new(h, w, 1, 0.0)?;
    map.set_value_range(-1.0, 1.0);
    for iy in 0..h {
        for ix in 0..w {
            let (mx, my) = (mu_x[(iy, ix)], mu_y[(iy, ix)]);
            let var_x = xx[(iy, ix)] - mx * mx;
            let var_y = yy[(iy, ix)] - my * my;
            let cov = xy[(iy, ix)] - mx * my;
            let v = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2));
            map.set(iy, ix, 0, v);
        }
    }
    Ok(map)
}

/// Mean of the local SSIM map; 1 for identical images, symmetric in its
/// arguments.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    let map = ssim_map(a, b)?;
    Ok(map.pixels().iter().sum::<f64>() / map.pixels().len() as f64)
}

/// Crops an image to the bounding box of a hull polygon; pixels inside
/// the box but outside the hull are replaced by the per-channel in-hull
/// mean so SSIM statistics see no background structure.
pub fn hull_crop(img: &Image, hull: &[Point]) -> Result<Image> {
    if hull.len() < 3 {
        return Err(Error::Data("hull polygon has fewer than 3 vertices".into()));
    }
    let (h, w) = (img.height(), img.width());
    let min_x = hull.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = hull.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = hull.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = hull.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let x0 = min_x.floor().max(0.0) as usize;
    let y0 = min_y.floor().max(0.0) as usize;
    let x1 = (max_x.ceil() as usize).min(w - 1);
    let y1 = (max_y.ceil() as usize).min(h - 1);
    if x1 < x0 || y1 < y0 {
        return Err(Error::Data("hull lies outside the image frame".into()));
    }
    let (ch, cw) = (y1 - y0 + 1, x1 - x0 + 1);

    let mask = crate::geometry::hull_mask(hull, w, h, 0.0);
    let mut means = vec![0.0; img.channels()];
    let mut count = 0usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(y, x) == 1.0 {
                count += 1;
                for c in 0..img.channels() {
                    means[c] += img.get(y, x, c);
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::Data("hull contains no pixels".into()));
    }
    for m in &mut means {
        *m /= count as f64;
    }

    let mut out = Image::new(ch, cw, img.channels(), 0.0)?;
    for y in 0..ch {
        for x in 0..cw {
            let inside = mask.get(y0 + y, x0 + x) == 1.0;
            for c in 0..img.channels() {
                let v = if inside {
                    img.get(y0 + y, x0 + x, c)
                } else {
                    means[c]
                };
                out.set(y, x, c, v);
            }
        }
    }
    Ok(out)
}

/// A deterministic fixed-dimension image embedding.
pub trait EmbeddingProvider {
    fn dimension(&self) -> usize;
    fn embed(&self, img: &Image) -> Result<Vec<f64>>;
}

/// L2 distance between the embeddings of two images.
pub fn embedding_distance(
    provider: &dyn EmbeddingProvider,
    a: &Image,
    b: &Image,
) -> Result<f64> {
    let ea = provider.embed(a)?;
    let eb = provider.embed(b)?;
    if ea.len() != provider.dimension() || eb.len() != provider.dimension() {
        return Err(Error::Provider(format!(
            "embedding length {} / {} does not match declared dimension {}",
            ea.len(),
            eb.len(),
            provider.dimension()
        )));
    }
    Ok(ea
        .iter()
        .zip(&eb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Built-in toy provider: grayscale, resize to 64x64, 3-level Haar packet
/// decomposition, flattened 8x8 baseband, unit-normalized. An all-zero
/// baseband (black image) embeds as the zero vector.
pub struct WaveletBasebandProvider;

impl EmbeddingProvider for WaveletBasebandProvider {
    fn dimension(&self) -> usize {
        64
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        let resized = img.to_grayscale().resize_bilinear(64, 64)?;
        let grid = packet_decompose(&resized.channel_plane(0), 3, WaveletFamily::Haar)?;
        let mut v: Vec<f64> = grid.baseband().iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Ok(v)
    }
}

static EMBED_TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// External provider speaking the subprocess contract: the image is
/// written to a temporary PNG, the command is invoked with that path as
/// its final argument, and stdout's first line must hold
/// `dimension` space-separated reals.
pub struct SubprocessProvider {
    program: String,
    args: Vec<String>,
    dimension: usize,
}

impl SubprocessProvider {
    pub fn new(program: impl Into<String>, args: Vec<String>, dimension: usize) -> Self {
        SubprocessProvider {
            program: program.into(),
            args,
            dimension,
        }
    }
}

impl EmbeddingProvider for SubprocessProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        let tag = EMBED_TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!(
            "morphlet-embed-{}-{tag}.png",
            std::process::id()
        ));
        img.save(&path)?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&path)
            .output();
        let _ = std::fs::remove_file(&path);
        let output = output.map_err(|e| {
            Error::Provider(format!("failed to run '{}': {e}", self.program))
        })?;
        if !output.status.success() {
            return Err(Error::Provider(format!(
                "'{}' exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let line = stdout.lines().next().unwrap_or("");
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|e| {
            Error::Provider(format!("'{}' produced a non-numeric embedding: {e}", self.program))
        })?;
        if values.len() != self.dimension {
            return Err(Error::Provider(format!(
                "'{}' produced {} values, expected {}",
                self.program,
                values.len(),
                self.dimension
            )));
        }
        Ok(values)
    }
}

/// Scored, binary-labeled samples for ROC analysis. Which class counts
/// as positive is an experiment-level convention the caller documents.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    entries: Vec<(f64, bool)>,
}

impl ScoreSet {
    pub fn new(entries: Vec<(f64, bool)>) -> Result<ScoreSet> {
        for (s, _) in &entries {
            if !s.is_finite() {
                return Err(Error::Data(format!("non-finite score {s}")));
            }
        }
        Ok(ScoreSet { entries })
    }

    pub fn entries(&self) -> &[(f64, bool)] {
        &self.entries
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|(_, p)| *p).count()
    }

    pub fn negatives(&self) -> usize {
        self.entries.len() - self.positives()
    }

    /// Reads `score,label` CSV rows, label 1 = positive, 0 = negative.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<ScoreSet> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::format(path, format!("scores csv: {e}")))?;
        let mut entries = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::format(path, format!("scores csv row {i}: {e}")))?;
            if row.len() != 2 {
                return Err(Error::format(
                    path,
                    format!("scores csv row {i}: expected 2 columns, found {}", row.len()),
                ));
            }
            let score: f64 = row[0].trim().parse().map_err(|e| {
                Error::format(path, format!("scores csv row {i}: bad score: {e}"))
            })?;
            let label = match row[1].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::format(
                        path,
                        format!("scores csv row {i}: label must be 0 or 1, found '{other}'"),
                    ))
                }
            };
            entries.push((score, label));
        }
        ScoreSet::new(entries)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::format(path, format!("scores csv: {e}")))?;
        writer
            .write_record(["score", "label"])
            .map_err(|e| Error::format(path, format!("scores csv: {e}")))?;
        for (score, label) in &self.entries {
            writer
                .write_record([format!("{score}"), if *label { "1".into() } else { "0".to_string() }])
                .map_err(|e| Error::format(path, format!("scores csv: {e}")))?;
        }
        writer
            .flush()
            .map_err(|e| Error::io(path, e))
    }
}

/// ROC curve from a threshold sweep over the sorted unique scores,
/// predicting positive at `score >= threshold`. Equal scores collapse
/// into one threshold; the curve runs from (0, 0) to (1, 1) and is
/// monotone in both coordinates.
pub fn roc(scores: &ScoreSet) -> Result<Vec<(f64, f64)>> {
    let p = scores.positives();
    let n = scores.negatives();
    if p == 0 || n == 0 {
        return Err(Error::Data(format!(
            "ROC needs both classes: {p} positives, {n} negatives"
        )));
    }
    let mut sorted = scores.entries.clone();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(curve)
}

/// Trapezoidal area under a ROC curve; equals the pairwise
/// Mann-Whitney statistic for tie-free scores.
pub fn auc(curve: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    for pair in curve.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_image(h: usize, w: usize, ch: usize, seed: u64) -> Image {
        let mut s = seed | 1;
        let pixels = (0..h * w * ch)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (s >> 33) as f64 / (1u64 << 31) as f64 * 255.0
            })
            .collect();
        Image::from_pixels(h, w, ch, pixels).unwrap()
    }

    #[test]
    fn ssim_self_is_one() {
        let img = lcg_image(24, 24, 1, 5);
        let s = ssim(&img, &img).unwrap();
        assert!((s - 1.0).abs() <= 1e-9);
        let map = ssim_map(&img, &img).unwrap();
        assert!(map.pixels().iter().all(|&v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = lcg_image(20, 28, 1, 7);
        let b = lcg_image(20, 28, 1, 8);
        let s1 = ssim(&a, &b).unwrap();
        let s2 = ssim(&b, &a).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        assert!(s1.abs() <= 1.0);
    }

    #[test]
    fn ssim_of_inverted_image_is_negative() {
        let mut img = Image::new(32, 32, 1, 0.0).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                img.set(y, x, 0, x as f64 / 31.0 * 255.0);
            }
        }
        let mut inv = img.clone();
        for v in inv.pixels_mut() {
            *v = 255.0 - *v;
        }
        let s = ssim(&img, &inv).unwrap();
        assert!(s < 0.0, "inverted structure should give negative ssim, got {s}");
    }

    #[test]
    fn ssim_map_mean_equals_scalar() {
        let a = lcg_image(19, 23, 3, 11);
        let b = lcg_image(19, 23, 3, 12);
        let map = ssim_map(&a, &b).unwrap();
        let mean = map.pixels().iter().sum::<f64>() / map.pixels().len() as f64;
        assert_eq!(mean, ssim(&a, &b).unwrap());
    }

    #[test]
    fn ssim_map_localizes_differences() {
        let a = Image::new(40, 40, 1, 128.0).unwrap();
        let mut b = a.clone();
        for y in 0..6 {
            for x in 0..6 {
                b.set(y, x, 0, 255.0);
            }
        }
        let map = ssim_map(&a, &b).unwrap();
        assert!(map.get(0, 0, 0) < 0.9);
        assert!(map.get(30, 30, 0) > 0.999);
    }

    #[test]
    fn ssim_rejects_shape_mismatch() {
        let a = Image::new(8, 8, 1, 0.0).unwrap();
        let b = Image::new(8, 9, 1, 0.0).unwrap();
        assert!(matches!(ssim(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn hull_crop_full_frame_is_identity() {
        let img = lcg_image(16, 16, 1, 3);
        let hull = vec![
            Point::new(0.0, 0.0),
            Point::new(15.0, 0.0),
            Point::new(15.0, 15.0),
            Point::new(0.0, 15.0),
        ];
        let crop = hull_crop(&img, &hull).unwrap();
        assert_eq!(crop.pixels(), img.pixels());
    }

    #[test]
    fn hull_crop_constant_image_stays_constant() {
        let img = Image::new(20, 20, 3, 99.0).unwrap();
        let hull = vec![
            Point::new(5.0, 5.0),
            Point::new(14.0, 6.0),
            Point::new(10.0, 15.0),
        ];
        let crop = hull_crop(&img, &hull).unwrap();
        assert!(crop.pixels().iter().all(|&v| (v - 99.0).abs() < 1e-12));
    }

    #[test]
    fn hull_crop_dims_follow_bounding_box() {
        let img = lcg_image(20, 20, 1, 9);
        let hull = vec![
            Point::new(4.0, 6.0),
            Point::new(13.0, 6.0),
            Point::new(13.0, 15.0),
            Point::new(4.0, 15.0),
        ];
        let crop = hull_crop(&img, &hull).unwrap();
        assert_eq!((crop.height(), crop.width()), (10, 10));
        assert!(matches!(hull_crop(&img, &hull[..2]), Err(Error::Data(_))));
    }

    #[test]
    fn toy_embedding_distance_basics() {
        let p = WaveletBasebandProvider;
        let img = lcg_image(32, 32, 1, 4);
        assert_eq!(embedding_distance(&p, &img, &img).unwrap(), 0.0);

        // Constant 0 embeds as the zero vector, constant 255 as a unit
        // vector, so the distance is exactly 1.
        let black = Image::new(32, 32, 1, 0.0).unwrap();
        let white = Image::new(32, 32, 1, 255.0).unwrap();
        let d = embedding_distance(&p, &black, &white).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "expected unit distance, got {d}");
    }

    #[test]
    fn embedding_distance_triangle_inequality() {
        let p = WaveletBasebandProvider;
        for seed in 0..5 {
            let a = lcg_image(24, 24, 1, seed * 3 + 1);
            let b = lcg_image(24, 24, 1, seed * 3 + 2);
            let c = lcg_image(24, 24, 1, seed * 3 + 3);
            let ab = embedding_distance(&p, &a, &b).unwrap();
            let bc = embedding_distance(&p, &b, &c).unwrap();
            let ac = embedding_distance(&p, &a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn roc_perfect_separation() {
        let s = ScoreSet::new(vec![(0.9, true), (0.8, true), (0.3, false), (0.2, false)]).unwrap();
        let curve = roc(&s).unwrap();
        assert_eq!(curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));
        assert!(curve.contains(&(0.0, 1.0)));
        assert_eq!(auc(&curve), 1.0);
    }

    #[test]
    fn roc_quarter_example() {
        let s = ScoreSet::new(vec![(0.9, true), (0.8, false), (0.3, true), (0.2, false)]).unwrap();
        let a = auc(&roc(&s).unwrap());
        assert!((a - 0.75).abs() < 1e-12);
    }

    #[test]
    fn roc_rejects_single_class() {
        let s = ScoreSet::new(vec![(0.5, true), (0.4, true)]).unwrap();
        assert!(matches!(roc(&s), Err(Error::Data(_))));
    }

    #[test]
    fn roc_is_monotone_with_ties() {
        let s = ScoreSet::new(vec![
            (0.5, true),
            (0.5, false),
            (0.5, true),
            (0.2, false),
            (0.9, false),
        ])
        .unwrap();
        let curve = roc(&s).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].0 >= pair[0].0);
            assert!(pair[1].1 >= pair[0].1);
        }
    }

    /// Brute-force pairwise ordering statistic (0.5 credit for ties).
    fn pairwise_auc(entries: &[(f64, bool)]) -> f64 {
        let mut total = 0usize;
        let mut credit = 0.0;
        for &(sp, lp) in entries {
            if !lp {
                continue;
            }
            for &(sn, ln) in entries {
                if ln {
                    continue;
                }
                total += 1;
                if sp > sn {
                    credit += 1.0;
                } else if sp == sn {
                    credit += 0.5;
                }
            }
        }
        credit / total as f64
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut s = 2024u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..50 {
            let n = 5 + (next() * 100.0) as usize;
            let mut entries = Vec::new();
            let mut used = std::collections::BTreeSet::new();
            for _ in 0..n {
                // Tie-free scores via uniqueness filtering.
                let mut v = next();
                while !used.insert(v.to_bits()) {
                    v = next();
                }
                entries.push((v, next() > 0.5));
            }
            if entries.iter().all(|(_, l)| *l) || entries.iter().all(|(_, l)| !*l) {
                continue;
            }
            let set = ScoreSet::new(entries.clone()).unwrap();
            let a = auc(&roc(&set).unwrap());
            let oracle = pairwise_auc(&entries);
            assert!((a - oracle).abs() <= 1e-12, "auc {a} vs oracle {oracle}");
        }
    }

    #[test]
    fn auc_random_labels_near_half() {
        let mut s = 7u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 33) as f64 / (1u64 << 31) as f64
        };
        let entries: Vec<(f64, bool)> = (0..4000).map(|_| (next(), next() > 0.5)).collect();
        let set = ScoreSet::new(entries).unwrap();
        let a = auc(&roc(&set).unwrap());
        assert!((a - 0.5).abs() < 0.05, "random-label auc {a}");
    }

    #[test]
    fn score_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let set = ScoreSet::new(vec![(0.25, true), (0.75, false), (1.0, true)]).unwrap();
        set.save_csv(&path).unwrap();
        let back = ScoreSet::load_csv(&path).unwrap();
        assert_eq!(back.entries(), set.entries());

        std::fs::write(&path, "score,label\nnot-a-number,1\n").unwrap();
        assert!(matches!(ScoreSet::load_csv(&path), Err(Error::Format { .. })));
        std::fs::write(&path, "score,label\n0.5,2\n").unwrap();
        assert!(matches!(ScoreSet::load_csv(&path), Err(Error::Format { .. })));
    }
}
