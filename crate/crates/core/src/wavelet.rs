//! 2D wavelet-packet analysis/synthesis and the sub-band fusion rule.
//!
//! A full packet tree is built: every sub-band is split again at each
//! level, so `levels = 3` yields `4^3 = 64` uniform bands arranged in an
//! 8x8 grid. Band `(r, c)` is indexed in natural (Paley) order: reading
//! the binary digits of `r` from most to least significant gives the
//! vertical filter choice (0 = low-pass, 1 = high-pass) applied at levels
//! 1, 2, 3, and `c` does the same for the horizontal axis. The baseband
//! therefore sits at `(0, 0)`.
//!
//! Filters are orthonormal and applied with periodic boundary extension,
//! which keeps the analysis exactly energy-preserving and invertible for
//! any even signal length. Summation order is fixed (row-major, taps in
//! filter order), so results are bit-deterministic.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::Image;

const HAAR_LO: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

// Daubechies-4 analysis low-pass: ((1 +/- sqrt 3), (3 +/- sqrt 3)) / (4 sqrt 2).
const DB2_LO: [f64; 4] = [
    0.4829629131445341,
    0.8365163037378079,
    0.2241438680420134,
    -0.1294095225512604,
];

/// Orthonormal filter family used for analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaveletFamily {
    #[default]
    Haar,
    Db2,
}

impl WaveletFamily {
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR_LO,
            WaveletFamily::Db2 => &DB2_LO,
        }
    }

    /// High-pass by alternating flip: `g[t] = (-1)^t h[L-1-t]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let len = h.len();
        (0..len)
            .map(|t| {
                let v = h[len - 1 - t];
                if t % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
        }
    }

    pub fn parse(s: &str) -> Result<WaveletFamily> {
        match s {
            "haar" => Ok(WaveletFamily::Haar),
            "db2" => Ok(WaveletFamily::Db2),
            other => Err(Error::InvalidArgument(format!(
                "unknown wavelet family '{other}' (expected haar or db2)"
            ))),
        }
    }
}

/// The uniform sub-band grid of a wavelet-packet decomposition.
#[derive(Debug, Clone)]
pub struct SubbandGrid {
    levels: usize,
    /// `side * side` coefficient matrices in row-major grid order.
    bands: Vec<Array2<f64>>,
    source_dims: (usize, usize),
    family: WaveletFamily,
}

impl SubbandGrid {
    /// Grid side length, `2^levels`.
    pub fn side(&self) -> usize {
        1 << self.levels
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn band(&self, r: usize, c: usize) -> &Array2<f64> {
        &self.bands[r * self.side() + c]
    }

    pub fn band_mut(&mut self, r: usize, c: usize) -> &mut Array2<f64> {
        let side = self.side();
        &mut self.bands[r * side + c]
    }

    /// The low-frequency baseband at grid position (0, 0).
    pub fn baseband(&self) -> &Array2<f64> {
        self.band(0, 0)
    }

    pub fn bands(&self) -> &[Array2<f64>] {
        &self.bands
    }

    fn compatible(&self, other: &SubbandGrid) -> Result<()> {
        if self.levels != other.levels
            || self.source_dims != other.source_dims
            || self.family != other.family
        {
            return Err(Error::Shape(format!(
                "sub-band grids differ: {} levels {:?} {} vs {} levels {:?} {}",
                self.levels,
                self.source_dims,
                self.family.name(),
                other.levels,
                other.source_dims,
                other.family.name()
            )));
        }
        Ok(())
    }
}

fn analyze_1d(signal: &[f64], h: &[f64], g: &[f64], low: &mut [f64], high: &mut [f64]) {
    let n = signal.len();
    for k in 0..n / 2 {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for t in 0..h.len() {
            let s = signal[(2 * k + t) % n];
            lo += h[t] * s;
            hi += g[t] * s;
        }
        low[k] = lo;
        high[k] = hi;
    }
}

fn synthesize_1d(low: &[f64], high: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    for k in 0..low.len() {
        for t in 0..h.len() {
            out[(2 * k + t) % n] += h[t] * low[k] + g[t] * high[k];
        }
    }
}

/// One separable analysis level. Returns `(ll, lh, hl, hh)` where the
/// first letter is the vertical (row-axis) filter and the second the
/// horizontal: `lh` is vertically low-passed and horizontally high-passed.
///
/// With orthonormal Haar, `[[1, 2], [3, 4]]` maps to `ll = [[5]]`,
/// `lh = [[-1]]`, `hl = [[-2]]`, `hh = [[0]]`.
pub fn dwt2_level(
    mat: &Array2<f64>,
    family: WaveletFamily,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>)> {
    let (rows, cols) = mat.dim();
    if rows % 2 != 0 || cols % 2 != 0 || rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "analysis level requires non-empty even dimensions, got {rows}x{cols}"
        )));
    }
    let h = family.lowpass();
    let g = family.highpass();
    let (hr, hc) = (rows / 2, cols / 2);

    // Horizontal pass over rows.
    let mut xl = Array2::zeros((rows, hc));
    let mut xh = Array2::zeros((rows, hc));
    let mut low = vec![0.0; hc];
    let mut high = vec![0.0; hc];
    let mut buf = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            buf[c] = mat[(r, c)];
        }
        analyze_1d(&buf, h, &g, &mut low, &mut high);
        for c in 0..hc {
            xl[(r, c)] = low[c];
            xh[(r, c)] = high[c];
        }
    }

    // Vertical pass over columns.
    let mut ll = Array2::zeros((hr, hc));
    let mut lh = Array2::zeros((hr, hc));
    let mut hl = Array2::zeros((hr, hc));
    let mut hh = Array2::zeros((hr, hc));
    let mut col = vec![0.0; rows];
    let mut lo2 = vec![0.0; hr];
    let mut hi2 = vec![0.0; hr];
    for c in 0..hc {
        for r in 0..rows {
            col[r] = xl[(r, c)];
        }
        analyze_1d(&col, h, &g, &mut lo2, &mut hi2);
        for r in 0..hr {
            ll[(r, c)] = lo2[r];
            hl[(r, c)] = hi2[r];
        }
        for r in 0..rows {
            col[r] = xh[(r, c)];
        }
        analyze_1d(&col, h, &g, &mut lo2, &mut hi2);
        for r in 0..hr {
            lh[(r, c)] = lo2[r];
            hh[(r, c)] = hi2[r];
        }
    }
    Ok((ll, lh, hl, hh))
}

/// Exact inverse of [`dwt2_level`].
pub fn idwt2_level(
    ll: &Array2<f64>,
    lh: &Array2<f64>,
    hl: &Array2<f64>,
    hh: &Array2<f64>,
    family: WaveletFamily,
) -> Result<Array2<f64>> {
    let dim = ll.dim();
    if lh.dim() != dim || hl.dim() != dim || hh.dim() != dim {
        return Err(Error::Shape("sub-band quadrants differ in shape".into()));
    }
    let (hr, hc) = dim;
    let (rows, cols) = (hr * 2, hc * 2);
    let h = family.lowpass();
    let g = family.highpass();

    // Undo the vertical pass.
    let mut xl = Array2::zeros((rows, hc));
    let mut xh = Array2::zeros((rows, hc));
    let mut lo = vec![0.0; hr];
    let mut hi = vec![0.0; hr];
    let mut col = vec![0.0; rows];
    for c in 0..hc {
        for r in 0..hr {
            lo[r] = ll[(r, c)];
            hi[r] = hl[(r, c)];
        }
        synthesize_1d(&lo, &hi, h, &g, &mut col);
        for r in 0..rows {
            xl[(r, c)] = col[r];
        }
        for r in 0..hr {
            lo[r] = lh[(r, c)];
            hi[r] = hh[(r, c)];
        }
        synthesize_1d(&lo, &hi, h, &g, &mut col);
        for r in 0..rows {
            xh[(r, c)] = col[r];
        }
    }

    // Undo the horizontal pass.
    let mut out = Array2::zeros((rows, cols));
    let mut lo2 = vec![0.0; hc];
    let mut hi2 = vec![0.0; hc];
    let mut row = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..hc {
            lo2[c] = xl[(r, c)];
            hi2[c] = xh[(r, c)];
        }
        synthesize_1d(&lo2, &hi2, h, &g, &mut row);
        for c in 0..cols {
            out[(r, c)] = row[c];
        }
    }
    Ok(out)
}

/// Full wavelet-packet decomposition: every child band is split again at
/// each level, yielding `4^levels` uniform bands.
pub fn packet_decompose(
    mat: &Array2<f64>,
    levels: usize,
    family: WaveletFamily,
) -> Result<SubbandGrid> {
    let (rows, cols) = mat.dim();
    let div = 1usize << levels;
    if rows == 0 || cols == 0 || rows % div != 0 || cols % div != 0 {
        return Err(Error::Shape(format!(
            "packet decomposition at {levels} levels requires non-empty dimensions \
             divisible by {div}, got {rows}x{cols}; pad or crop the input first"
        )));
    }
    let side = div;
    let mut bands: Vec<Option<Array2<f64>>> = vec![None; side * side];
    decompose_rec(mat.clone(), levels, 0, 0, side, family, &mut bands)?;
    Ok(SubbandGrid {
        levels,
        bands: bands.into_iter().map(|b| b.expect("band filled")).collect(),
        source_dims: (rows, cols),
        family,
    })
}

fn decompose_rec(
    mat: Array2<f64>,
    remaining: usize,
    r0: usize,
    c0: usize,
    grid_side: usize,
    family: WaveletFamily,
    bands: &mut [Option<Array2<f64>>],
) -> Result<()> {
    if remaining == 0 {
        bands[r0 * grid_side + c0] = Some(mat);
        return Ok(());
    }
    let (ll, lh, hl, hh) = dwt2_level(&mat, family)?;
    let half = 1usize << (remaining - 1);
    decompose_rec(ll, remaining - 1, r0, c0, grid_side, family, bands)?;
    decompose_rec(lh, remaining - 1, r0, c0 + half, grid_side, family, bands)?;
    decompose_rec(hl, remaining - 1, r0 + half, c0, grid_side, family, bands)?;
    decompose_rec(hh, remaining - 1, r0 + half, c0 + half, grid_side, family, bands)?;
    Ok(())
}

/// Inverse of [`packet_decompose`], exact up to floating-point error.
pub fn packet_reconstruct(grid: &SubbandGrid) -> Result<Array2<f64>> {
    let side = grid.side();
    let expected = (
        grid.source_dims.0 / side,
        grid.source_dims.1 / side,
    );
    for band in &grid.bands {
        if band.dim() != expected {
            return Err(Error::Shape(format!(
                "band of shape {:?} in a grid expecting {:?}",
                band.dim(),
                expected
            )));
        }
    }
    reconstruct_rec(grid, grid.levels, 0, 0)
}

fn reconstruct_rec(grid: &SubbandGrid, remaining: usize, r0: usize, c0: usize) -> Result<Array2<f64>> {
    if remaining == 0 {
        return Ok(grid.band(r0, c0).clone());
    }
    let half = 1usize << (remaining - 1);
    let ll = reconstruct_rec(grid, remaining - 1, r0, c0)?;
    let lh = reconstruct_rec(grid, remaining - 1, r0, c0 + half)?;
    let hl = reconstruct_rec(grid, remaining - 1, r0 + half, c0)?;
    let hh = reconstruct_rec(grid, remaining - 1, r0 + half, c0 + half)?;
    idwt2_level(&ll, &lh, &hl, &hh, grid.family)
}

/// Fuses two decompositions: the baseband is averaged elementwise, every
/// detail band takes the coefficient of larger magnitude (sign retained,
/// ties keep `a`'s value). Every detail coefficient of the result is
/// therefore one of the two input coefficients.
pub fn fuse_subbands(a: &SubbandGrid, b: &SubbandGrid) -> Result<SubbandGrid> {
    a.compatible(b)?;
    let side = a.side();
    let mut bands = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let ba = a.band(r, c);
            let bb = b.band(r, c);
            if ba.dim() != bb.dim() {
                return Err(Error::Shape("fused bands differ in shape".into()));
            }
            let fused = if r == 0 && c == 0 {
                let mut m = ba.clone();
                m.zip_mut_with(bb, |x, &y| *x = (*x + y) / 2.0);
                m
            } else {
                let mut m = ba.clone();
                m.zip_mut_with(bb, |x, &y| {
                    if y.abs() > x.abs() {
                        *x = y;
                    }
                });
                m
            };
            bands.push(fused);
        }
    }
    Ok(SubbandGrid {
        levels: a.levels,
        bands,
        source_dims: a.source_dims,
        family: a.family,
    })
}

/// Debug view: tiles the grid into one grayscale image, each band
/// min-max normalized to `[0, 255]` (constant bands render black).
pub fn subband_montage(grid: &SubbandGrid) -> Image {
    let side = grid.side();
    let (bh, bw) = grid.baseband().dim();
    let mut img = Image::new(side * bh, side * bw, 1, 0.0).expect("valid dims");
    for r in 0..side {
        for c in 0..side {
            let band = grid.band(r, c);
            let min = band.iter().copied().fold(f64::INFINITY, f64::min);
            let max = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = max - min;
            for y in 0..bh {
                for x in 0..bw {
                    let v = if span > 0.0 {
                        (band[(y, x)] - min) / span * 255.0
                    } else {
                        0.0
                    };
                    img.set(r * bh + y, c * bw + x, 0, v);
                }
            }
        }
    }
    img
}
