//! Raster representation, PNG I/O, sampling and elementary image arithmetic.
//!
//! The canonical in-memory layout is row-major, top-to-bottom, with
//! channels interleaved: the sample for channel `c` of the pixel at
//! column `x`, row `y` lives at index `(y * width + x) * channels + c`.
//! Every module in this crate assumes that order.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Rec. 601 luma weights used for all RGB-to-grayscale conversions.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A real-valued raster with 1 (grayscale) or 3 (RGB) channels.
///
/// Pixels stay `f64` through the whole pipeline; wavelet coefficients and
/// iterative perturbation steps are fractional, so quantization happens
/// only in [`Image::save`].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
    value_range: (f64, f64),
}

impl Image {
    /// Creates an image filled with a constant value, range `[0, 255]`.
    pub fn new(height: usize, width: usize, channels: usize, fill: f64) -> Result<Image> {
        Self::from_pixels(height, width, channels, vec![fill; height * width * channels])
    }

    /// Wraps an existing buffer in canonical interleaved order.
    pub fn from_pixels(
        height: usize,
        width: usize,
        channels: usize,
        pixels: Vec<f64>,
    ) -> Result<Image> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "pixel buffer length {} does not match {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            pixels,
            value_range: (0.0, 255.0),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }

    pub fn set_value_range(&mut self, lo: f64, hi: f64) {
        self.value_range = (lo, hi);
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )));
        }
        Ok(())
    }

    /// Loads an 8-bit grayscale or RGB PNG. Samples are converted to `f64`
    /// verbatim; the declared range is `[0, 255]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::format(path, format!("png decode failed: {e}")))?;

        let info = reader.info();
        if info.bit_depth != png::BitDepth::Eight {
            return Err(Error::format(
                path,
                format!("unsupported bit depth {:?} (only 8-bit supported)", info.bit_depth),
            ));
        }
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::Rgb => 3,
            other => {
                return Err(Error::format(
                    path,
                    format!("unsupported color type {other:?} (only grayscale and RGB supported)"),
                ))
            }
        };

        let mut buf = vec![0u8; reader.output_buffer_size()];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::format(path, format!("png decode failed: {e}")))?;
        let (width, height) = (frame.width as usize, frame.height as usize);
        let bytes = &buf[..frame.buffer_size()];
        let pixels = bytes.iter().map(|&b| f64::from(b)).collect();
        Image::from_pixels(height, width, channels, pixels)
    }

    /// Writes an 8-bit PNG. Each sample is rounded to the nearest integer;
    /// values that round outside `[0, 255]` are a range error.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.pixels.len());
        for &v in &self.pixels {
            let q = v.round();
            if !(0.0..=255.0).contains(&q) {
                return Err(Error::Range(format!(
                    "pixel value {v} does not round into [0, 255]"
                )));
            }
            bytes.push(q as u8);
        }

        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(if self.channels == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::format(path, format!("png encode failed: {e}")))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::format(path, format!("png encode failed: {e}")))?;
        Ok(())
    }

    /// Bilinear sample of one channel at a fractional position.
    /// Coordinates outside the frame are clamped to the border, so the
    /// function is total; at integer lattice points it reproduces the
    /// stored pixel exactly.
    pub fn sample_bilinear(&self, x: f64, y: f64, channel: usize) -> f64 {
        let ((x0, wx0), (x1, wx1)) = bilinear_taps(x, self.width);
        let ((y0, wy0), (y1, wy1)) = bilinear_taps(y, self.height);
        wy0 * (wx0 * self.get(y0, x0, channel) + wx1 * self.get(y0, x1, channel))
            + wy1 * (wx0 * self.get(y1, x0, channel) + wx1 * self.get(y1, x1, channel))
    }

    /// Clamps every pixel into `[lo, hi]`. Idempotent and monotone.
    pub fn clipped(&self, lo: f64, hi: f64) -> Result<Image> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "clip bounds inverted: lo={lo} > hi={hi}"
            )));
        }
        let mut out = self.clone();
        for v in &mut out.pixels {
            *v = v.clamp(lo, hi);
        }
        Ok(out)
    }

    /// Extracts one channel as a matrix (rows = image rows).
    pub fn channel_plane(&self, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.height, self.width), |(y, x)| self.get(y, x, c))
    }

    /// Reassembles an image from per-channel planes of equal shape.
    pub fn from_planes(planes: &[Array2<f64>]) -> Result<Image> {
        let channels = planes.len();
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "plane count must be 1 or 3, got {channels}"
            )));
        }
        let (height, width) = planes[0].dim();
        for p in planes {
            if p.dim() != (height, width) {
                return Err(Error::Shape("channel planes differ in shape".into()));
            }
        }
        let mut img = Image::new(height, width, channels, 0.0)?;
        for (c, p) in planes.iter().enumerate() {
            for y in 0..height {
                for x in 0..width {
                    img.set(y, x, c, p[(y, x)]);
                }
            }
        }
        Ok(img)
    }

    /// Rec. 601 luma conversion; a grayscale image is returned unchanged.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Image::new(self.height, self.width, 1, 0.0).expect("valid dims");
        out.value_range = self.value_range;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = LUMA_WEIGHTS[0] * self.get(y, x, 0)
                    + LUMA_WEIGHTS[1] * self.get(y, x, 1)
                    + LUMA_WEIGHTS[2] * self.get(y, x, 2);
                out.set(y, x, 0, v);
            }
        }
        out
    }

    /// Adjoint of [`Image::to_grayscale`]: distributes a grayscale gradient
    /// back over `channels` channels with the same luma weights.
    pub fn grayscale_adjoint(grad_gray: &Image, channels: usize) -> Result<Image> {
        if grad_gray.channels != 1 {
            return Err(Error::Shape("grayscale gradient must have one channel".into()));
        }
        if channels == 1 {
            return Ok(grad_gray.clone());
        }
        let mut out = Image::new(grad_gray.height, grad_gray.width, channels, 0.0)?;
        for y in 0..grad_gray.height {
            for x in 0..grad_gray.width {
                let g = grad_gray.get(y, x, 0);
                for c in 0..channels {
                    out.set(y, x, c, LUMA_WEIGHTS[c] * g);
                }
            }
        }
        Ok(out)
    }

    /// Bilinear resize with corner alignment: output position `o` samples
    /// the source at `o * (src - 1) / (dst - 1)`. Resizing to the same
    /// dimensions is an exact copy.
    pub fn resize_bilinear(&self, new_height: usize, new_width: usize) -> Result<Image> {
        if new_height == 0 || new_width == 0 {
            return Err(Error::InvalidArgument("resize target must be non-empty".into()));
        }
        let mut out = Image::new(new_height, new_width, self.channels, 0.0)?;
        out.value_range = self.value_range;
        for oy in 0..new_height {
            let sy = source_pos(oy, new_height, self.height);
            for ox in 0..new_width {
                let sx = source_pos(ox, new_width, self.width);
                for c in 0..self.channels {
                    out.set(oy, ox, c, self.sample_bilinear(sx, sy, c));
                }
            }
        }
        Ok(out)
    }

    /// Adjoint of [`Image::resize_bilinear`]: scatters a gradient at the
    /// resized dimensions back to `(src_height, src_width)` through the
    /// exact same interpolation taps.
    pub fn resize_bilinear_adjoint(&self, src_height: usize, src_width: usize) -> Result<Image> {
        let mut out = Image::new(src_height, src_width, self.channels, 0.0)?;
        for oy in 0..self.height {
            let sy = source_pos(oy, self.height, src_height);
            let ((y0, wy0), (y1, wy1)) = bilinear_taps(sy, src_height);
            for ox in 0..self.width {
                let sx = source_pos(ox, self.width, src_width);
                let ((x0, wx0), (x1, wx1)) = bilinear_taps(sx, src_width);
                for c in 0..self.channels {
                    let g = self.get(oy, ox, c);
                    out.set(y0, x0, c, out.get(y0, x0, c) + wy0 * wx0 * g);
                    out.set(y0, x1, c, out.get(y0, x1, c) + wy0 * wx1 * g);
                    out.set(y1, x0, c, out.get(y1, x0, c) + wy1 * wx0 * g);
                    out.set(y1, x1, c, out.get(y1, x1, c) + wy1 * wx1 * g);
                }
            }
        }
        Ok(out)
    }

    /// Copies the `crop_h` x `crop_w` window whose top-left corner is at
    /// row `y0`, column `x0`.
    pub fn crop(&self, y0: usize, x0: usize, crop_h: usize, crop_w: usize) -> Result<Image> {
        if y0 + crop_h > self.height || x0 + crop_w > self.width || crop_h == 0 || crop_w == 0 {
            return Err(Error::Shape(format!(
                "crop {crop_h}x{crop_w}+{y0}+{x0} exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut out = Image::new(crop_h, crop_w, self.channels, 0.0)?;
        out.value_range = self.value_range;
        for y in 0..crop_h {
            for x in 0..crop_w {
                for c in 0..self.channels {
                    out.set(y, x, c, self.get(y0 + y, x0 + x, c));
                }
            }
        }
        Ok(out)
    }

    /// Per-pixel difference `self - other`.
    pub fn sub(&self, other: &Image) -> Result<Image> {
        self.check_same_shape(other, "image subtraction")?;
        let mut out = self.clone();
        for (o, &b) in out.pixels.iter_mut().zip(&other.pixels) {
            *o -= b;
        }
        Ok(out)
    }

    /// Largest absolute per-sample difference between two images.
    pub fn linf_distance(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other, "L-infinity distance")?;
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Clamped interpolation taps for a fractional coordinate on a row or
/// column of length `len`: two indices with their weights. Shared by
/// sampling, resize and the resize adjoint so forward and adjoint use
/// identical weights.
#[inline]
fn bilinear_taps(pos: f64, len: usize) -> ((usize, f64), (usize, f64)) {
    let max = (len - 1) as f64;
    let p = pos.clamp(0.0, max);
    let i0 = p.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    let frac = p - i0 as f64;
    ((i0, 1.0 - frac), (i1, frac))
}

/// Corner-aligned source position for a resize output index.
#[inline]
fn source_pos(out_idx: usize, out_len: usize, src_len: usize) -> f64 {
    if out_len == 1 {
        (src_len - 1) as f64 / 2.0
    } else {
        out_idx as f64 * (src_len - 1) as f64 / (out_len - 1) as f64
    }
}

/// Per-pixel absolute difference, min-max rescaled to `[0, 1]`.
/// If all differences are equal the output is all zeros.
pub fn minmax_absdiff_map(a: &Image, b: &Image) -> Result<Image> {
    a.check_same_shape(b, "difference map")?;
    let diffs: Vec<f64> = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| (x - y).abs())
        .collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let pixels = if span > 0.0 {
        diffs.iter().map(|&d| (d - min) / span).collect()
    } else {
        vec![0.0; diffs.len()]
    };
    let mut out = Image::from_pixels(a.height, a.width, a.channels, pixels)?;
    out.value_range = (0.0, 1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_length_enforced() {
        assert!(Image::from_pixels(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::from_pixels(2, 2, 1, vec![0.0; 4]).is_ok());
        assert!(Image::from_pixels(2, 2, 2, vec![0.0; 8]).is_err());
    }

    #[test]
    fn save_load_round_trip_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let img = Image::from_pixels(2, 2, 1, vec![0.0, 255.0, 128.0, 64.0]).unwrap();
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(back.height(), 2);
        assert_eq!(back.width(), 2);
        assert_eq!(back.channels(), 1);
        assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn save_load_round_trip_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt3.png");
        let pixels: Vec<f64> = (0..3 * 4 * 3).map(|i| (i * 7 % 256) as f64).collect();
        let img = Image::from_pixels(3, 4, 3, pixels).unwrap();
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn save_rounds_to_nearest_integer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.png");
        let img = Image::from_pixels(1, 2, 1, vec![255.4, 10.6]).unwrap();
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(back.pixels(), &[255.0, 11.0]);
    }

    #[test]
    fn save_rejects_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        let img = Image::from_pixels(1, 1, 1, vec![-3.0]).unwrap();
        match img.save(&path) {
            Err(Error::Range(_)) => {}
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.png");
        let img = Image::new(8, 8, 1, 100.0).unwrap();
        img.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        match Image::load(&path) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_missing_file() {
        match Image::load("/nonexistent/nowhere.png") {
            Err(Error::Io { .. }) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_rgba() {
        // Hand-encode a 1x1 RGBA PNG via the png crate.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        {
            let file = File::create(&path).unwrap();
            let mut enc = png::Encoder::new(BufWriter::new(file), 1, 1);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 2, 3, 4]).unwrap();
        }
        match Image::load(&path) {
            Err(Error::Format { detail, .. }) => assert!(detail.contains("color type")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bilinear_exact_at_lattice() {
        let img = Image::from_pixels(2, 2, 1, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(img.sample_bilinear(1.0, 1.0, 0), 30.0);
        assert_eq!(img.sample_bilinear(0.0, 0.0, 0), 0.0);
        assert_eq!(img.sample_bilinear(1.0, 0.0, 0), 10.0);
    }

    #[test]
    fn bilinear_midpoints() {
        let img = Image::from_pixels(1, 2, 1, vec![10.0, 20.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.0, 0), 15.0);

        let img = Image::from_pixels(2, 2, 1, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.5, 0), 15.0);
    }

    #[test]
    fn bilinear_clamps_outside() {
        let img = Image::from_pixels(2, 2, 1, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(img.sample_bilinear(-2.0, -2.0, 0), 0.0);
        assert_eq!(img.sample_bilinear(100.0, 100.0, 0), 30.0);
    }

    #[test]
    fn clip_clamps_and_is_idempotent() {
        let img = Image::from_pixels(1, 3, 1, vec![-5.0, 100.0, 300.0]).unwrap();
        let once = img.clipped(0.0, 255.0).unwrap();
        assert_eq!(once.pixels(), &[0.0, 100.0, 255.0]);
        let twice = once.clipped(0.0, 255.0).unwrap();
        assert_eq!(once.pixels(), twice.pixels());
    }

    #[test]
    fn clip_identity_when_in_range() {
        let img = Image::from_pixels(1, 3, 1, vec![0.0, 100.0, 255.0]).unwrap();
        assert_eq!(img.clipped(0.0, 255.0).unwrap().pixels(), img.pixels());
    }

    #[test]
    fn clip_rejects_inverted_bounds() {
        let img = Image::new(1, 1, 1, 0.0).unwrap();
        assert!(img.clipped(10.0, 0.0).is_err());
    }

    #[test]
    fn diff_map_identical_inputs() {
        let a = Image::new(2, 2, 1, 42.0).unwrap();
        let map = minmax_absdiff_map(&a, &a).unwrap();
        assert!(map.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diff_map_rescales() {
        let a = Image::from_pixels(1, 3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let b = Image::new(1, 3, 1, 0.0).unwrap();
        let map = minmax_absdiff_map(&a, &b).unwrap();
        assert_eq!(map.pixels(), &[0.0, 0.5, 1.0]);

        let a = Image::from_pixels(1, 2, 1, vec![0.0, 2.0]).unwrap();
        let zero = Image::new(1, 2, 1, 0.0).unwrap();
        let map = minmax_absdiff_map(&a, &zero).unwrap();
        assert_eq!(map.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn diff_map_shape_mismatch() {
        let a = Image::new(2, 2, 1, 0.0).unwrap();
        let b = Image::new(2, 3, 1, 0.0).unwrap();
        assert!(matches!(minmax_absdiff_map(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn resize_identity_when_same_dims() {
        let pixels: Vec<f64> = (0..48).map(|i| i as f64).collect();
        let img = Image::from_pixels(4, 4, 3, pixels).unwrap();
        let resized = img.resize_bilinear(4, 4).unwrap();
        assert_eq!(resized.pixels(), img.pixels());
    }

    #[test]
    fn resize_adjoint_is_true_adjoint() {
        // <R x, y> must equal <x, R^T y> for the pair to back-propagate
        // gradients exactly through the resize.
        let mut rng = 41u64;
        let mut next = move || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng >> 33) as f64 / (1u64 << 31) as f64
        };
        let x = Image::from_pixels(5, 7, 1, (0..35).map(|_| next()).collect()).unwrap();
        let y = Image::from_pixels(9, 4, 1, (0..36).map(|_| next()).collect()).unwrap();
        let rx = x.resize_bilinear(9, 4).unwrap();
        let rty = y.resize_bilinear_adjoint(5, 7).unwrap();
        let lhs: f64 = rx.pixels().iter().zip(y.pixels()).map(|(&a, &b)| a * b).sum();
        let rhs: f64 = x.pixels().iter().zip(rty.pixels()).map(|(&a, &b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn grayscale_weights_sum_to_one() {
        let img = Image::new(2, 2, 3, 100.0).unwrap();
        let gray = img.to_grayscale();
        for &v in gray.pixels() {
            assert!((v - 100.0).abs() < 1e-9);
        }
    }
}
