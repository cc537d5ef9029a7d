//! A compact differentiable two-class (bona fide vs morph) convolutional
//! classifier with training, inference and exact input gradients.
//!
//! Architecture, fixed: grayscale input resized to 64x64 and scaled to
//! `[0, 1]`, then conv 3x3x8 (zero-padded) + ReLU + 2x2 max-pool,
//! conv 3x3x16 + ReLU + 2x2 max-pool, flatten (channel-major), dense to
//! 2 logits, softmax. All arithmetic is `f64` and every backward pass is
//! written out by hand, so input gradients are exact up to rounding and
//! the whole attack loop stays self-contained.
//!
//! Preprocessing is linear (luma, bilinear resize, 1/255 scale), so the
//! loss gradient is back-propagated through it and lands at the original
//! image resolution and channel count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

pub const INPUT_SIZE: usize = 64;
const CONV1_OUT: usize = 8;
const CONV2_OUT: usize = 16;
const KERNEL: usize = 3;
const NUM_CLASSES: usize = 2;
const POOL1_SIZE: usize = INPUT_SIZE / 2; // 32
const POOL2_SIZE: usize = POOL1_SIZE / 2; // 16
const FLAT_LEN: usize = CONV2_OUT * POOL2_SIZE * POOL2_SIZE; // 4096

const MODEL_MAGIC: &[u8; 4] = b"MDTC";
const MODEL_VERSION: u32 = 1;
/// Preprocessing contract tag: grayscale, bilinear resize to 64x64, /255.
const PREPROC_TAG: u32 = 1;

/// Two-class label; the morph class is what the attack walks away from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    BonaFide = 0,
    Morph = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    conv1_w: Array4<f64>, // [8, 1, 3, 3]
    conv1_b: Array1<f64>,
    conv2_w: Array4<f64>, // [16, 8, 3, 3]
    conv2_b: Array1<f64>,
    fc_w: Array2<f64>, // [2, 4096]
    fc_b: Array1<f64>,
}

/// Training hyperparameters. Plain SGD with a fixed learning rate and a
/// seeded shuffle; a fixed seed makes training bit-reproducible.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            seed: 42,
        }
    }
}

/// Loss value with its input gradient and the forward probabilities.
pub struct LossAndGradient {
    /// Cross-entropy `-log p_y`.
    pub loss: f64,
    /// Gradient of the loss w.r.t. the original image pixels.
    pub gradient: Image,
    pub p_bonafide: f64,
    pub p_morph: f64,
}

impl DetectorModel {
    /// All-zero weights; forward gives exactly (0.5, 0.5).
    pub fn zeroed() -> DetectorModel {
        DetectorModel {
            conv1_w: Array4::zeros((CONV1_OUT, 1, KERNEL, KERNEL)),
            conv1_b: Array1::zeros(CONV1_OUT),
            conv2_w: Array4::zeros((CONV2_OUT, CONV1_OUT, KERNEL, KERNEL)),
            conv2_b: Array1::zeros(CONV2_OUT),
            fc_w: Array2::zeros((NUM_CLASSES, FLAT_LEN)),
            fc_b: Array1::zeros(NUM_CLASSES),
        }
    }

    /// Seeded uniform init, `+/- 1/sqrt(fan_in)` per layer.
    pub fn random(seed: u64) -> DetectorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = DetectorModel::zeroed();
        let b1 = 1.0 / ((KERNEL * KERNEL) as f64).sqrt();
        for v in model.conv1_w.iter_mut() {
            *v = rng.gen_range(-b1..b1);
        }
        let b2 = 1.0 / ((CONV1_OUT * KERNEL * KERNEL) as f64).sqrt();
        for v in model.conv2_w.iter_mut() {
            *v = rng.gen_range(-b2..b2);
        }
        let bf = 1.0 / (FLAT_LEN as f64).sqrt();
        for v in model.fc_w.iter_mut() {
            *v = rng.gen_range(-bf..bf);
        }
        model
    }

    /// Class probabilities `(p_bonafide, p_morph)`.
    pub fn forward(&self, img: &Image) -> (f64, f64) {
        let x = preprocess(img);
        let trace = self.forward_trace(&x);
        (trace.probs[0], trace.probs[1])
    }

    pub fn classify(&self, img: &Image) -> Label {
        let (pb, pm) = self.forward(img);
        if pm > pb {
            Label::Morph
        } else {
            Label::BonaFide
        }
    }

    /// Cross-entropy loss against `y` and its gradient w.r.t. the original
    /// image, back-propagated through the preprocessing.
    pub fn loss_and_input_gradient(&self, img: &Image, y: Label) -> Result<LossAndGradient> {
        let x = preprocess(img);
        let trace = self.forward_trace(&x);
        let loss = -trace.probs[y.index()].max(f64::MIN_POSITIVE).ln();

        let mut dlogits = trace.probs.clone();
        dlogits[y.index()] -= 1.0;
        let grads = self.backward_trace(&x, &trace, &dlogits);
        let gradient = preprocess_adjoint(&grads.input, img)?;

        Ok(LossAndGradient {
            loss,
            gradient,
            p_bonafide: trace.probs[0],
            p_morph: trace.probs[1],
        })
    }

    fn forward_trace(&self, x: &Array2<f64>) -> ForwardTrace {
        let input = x
            .clone()
            .into_shape_with_order((1, INPUT_SIZE, INPUT_SIZE))
            .expect("preprocessed input is 64x64");
        let pre1 = conv_same(&input, &self.conv1_w, &self.conv1_b);
        let act1 = relu(&pre1);
        let (pool1, arg1) = maxpool2(&act1);
        let pre2 = conv_same(&pool1, &self.conv2_w, &self.conv2_b);
        let act2 = relu(&pre2);
        let (pool2, arg2) = maxpool2(&act2);
        let flat = flatten(&pool2);
        let mut logits = self.fc_b.clone();
        for k in 0..NUM_CLASSES {
            let mut acc = 0.0;
            for i in 0..FLAT_LEN {
                acc += self.fc_w[(k, i)] * flat[i];
            }
            logits[k] += acc;
        }
        let probs = softmax(&logits);
        ForwardTrace {
            input,
            pre1,
            pool1,
            arg1,
            pre2,
            arg2,
            flat,
            probs,
        }
    }

    fn backward_trace(
        &self,
        _x: &Array2<f64>,
        trace: &ForwardTrace,
        dlogits: &Array1<f64>,
    ) -> Gradients {
        let mut fc_w = Array2::zeros((NUM_CLASSES, FLAT_LEN));
        let mut dflat = vec![0.0; FLAT_LEN];
        for k in 0..NUM_CLASSES {
            for i in 0..FLAT_LEN {
                fc_w[(k, i)] = dlogits[k] * trace.flat[i];
                dflat[i] += dlogits[k] * self.fc_w[(k, i)];
            }
        }
        let fc_b = dlogits.clone();

        let dpool2 = unflatten(&dflat, CONV2_OUT, POOL2_SIZE);
        let dact2 = maxpool2_backward(&dpool2, &trace.arg2, (CONV2_OUT, POOL1_SIZE, POOL1_SIZE));
        let dpre2 = relu_backward(&dact2, &trace.pre2);
        let (dpool1, conv2_w, conv2_b) = conv_same_backward(&trace.pool1, &self.conv2_w, &dpre2);

        let dact1 = maxpool2_backward(&dpool1, &trace.arg1, (CONV1_OUT, INPUT_SIZE, INPUT_SIZE));
        let dpre1 = relu_backward(&dact1, &trace.pre1);
        let (dinput, conv1_w, conv1_b) = conv_same_backward(&trace.input, &self.conv1_w, &dpre1);

        let input = dinput
            .into_shape_with_order((INPUT_SIZE, INPUT_SIZE))
            .expect("single channel input gradient");
        Gradients {
            input,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            fc_w,
            fc_b,
        }
    }

    fn apply_gradients(&mut self, g: &Gradients, lr: f64) {
        self.conv1_w.zip_mut_with(&g.conv1_w, |w, &d| *w -= lr * d);
        self.conv1_b.zip_mut_with(&g.conv1_b, |w, &d| *w -= lr * d);
        self.conv2_w.zip_mut_with(&g.conv2_w, |w, &d| *w -= lr * d);
        self.conv2_b.zip_mut_with(&g.conv2_b, |w, &d| *w -= lr * d);
        self.fc_w.zip_mut_with(&g.fc_w, |w, &d| *w -= lr * d);
        self.fc_b.zip_mut_with(&g.fc_b, |w, &d| *w -= lr * d);
    }

    /// Serializes magic, version, architecture descriptor and all weight
    /// tensors, little-endian; the round trip is bit-exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
            w.write_all(bytes).map_err(|e| Error::io(path, e))
        };
        write(&mut w, MODEL_MAGIC)?;
        write(&mut w, &MODEL_VERSION.to_le_bytes())?;
        for v in [
            INPUT_SIZE as u32,
            INPUT_SIZE as u32,
            CONV1_OUT as u32,
            KERNEL as u32,
            CONV2_OUT as u32,
            KERNEL as u32,
            NUM_CLASSES as u32,
            PREPROC_TAG,
        ] {
            write(&mut w, &v.to_le_bytes())?;
        }
        for (dims, data) in self.tensors() {
            write(&mut w, &(dims.len() as u32).to_le_bytes())?;
            for d in &dims {
                write(&mut w, &(*d as u32).to_le_bytes())?;
            }
            for v in data {
                write(&mut w, &v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DetectorModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = ModelReader {
            inner: BufReader::new(file),
            path: path.to_path_buf(),
        };
        let magic = r.bytes::<4>()?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Model {
                path: path.into(),
                detail: "bad magic, not a detector model file".into(),
            });
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let arch = [
            ("input height", INPUT_SIZE),
            ("input width", INPUT_SIZE),
            ("conv1 channels", CONV1_OUT),
            ("conv1 kernel", KERNEL),
            ("conv2 channels", CONV2_OUT),
            ("conv2 kernel", KERNEL),
            ("classes", NUM_CLASSES),
            ("preprocessing tag", PREPROC_TAG as usize),
        ];
        for (name, expected) in arch {
            let got = r.u32()? as usize;
            if got != expected {
                return Err(Error::Model {
                    path: path.into(),
                    detail: format!("{name}: expected {expected}, found {got}"),
                });
            }
        }

        let mut model = DetectorModel::zeroed();
        let shapes: Vec<Vec<usize>> = model.tensors().iter().map(|(d, _)| d.clone()).collect();
        let mut loaded: Vec<Vec<f64>> = Vec::new();
        for dims in &shapes {
            let ndim = r.u32()? as usize;
            if ndim != dims.len() {
                return Err(Error::Model {
                    path: path.into(),
                    detail: format!("tensor rank {ndim}, expected {}", dims.len()),
                });
            }
            for &d in dims {
                let got = r.u32()? as usize;
                if got != d {
                    return Err(Error::Model {
                        path: path.into(),
                        detail: format!("tensor dimension {got}, expected {d}"),
                    });
                }
            }
            let len: usize = dims.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(r.f64()?);
            }
            loaded.push(data);
        }
        let mut trailing = [0u8; 1];
        if r.inner.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::Model {
                path: path.into(),
                detail: "trailing bytes after weight tensors".into(),
            });
        }
        model.assign_tensors(&loaded);
        Ok(model)
    }

    fn tensors(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        vec![
            (self.conv1_w.shape().to_vec(), self.conv1_w.iter().copied().collect()),
            (self.conv1_b.shape().to_vec(), self.conv1_b.iter().copied().collect()),
            (self.conv2_w.shape().to_vec(), self.conv2_w.iter().copied().collect()),
            (self.conv2_b.shape().to_vec(), self.conv2_b.iter().copied().collect()),
            (self.fc_w.shape().to_vec(), self.fc_w.iter().copied().collect()),
            (self.fc_b.shape().to_vec(), self.fc_b.iter().copied().collect()),
        ]
    }

    fn assign_tensors(&mut self, data: &[Vec<f64>]) {
        for (dst, src) in self.conv1_w.iter_mut().zip(&data[0]) {
            *dst = *src;
        }
        for (dst, src) in self.conv1_b.iter_mut().zip(&data[1]) {
            *dst = *src;
        }
        for (dst, src) in self.conv2_w.iter_mut().zip(&data[2]) {
            *dst = *src;
        }
        for (dst, src) in self.conv2_b.iter_mut().zip(&data[3]) {
            *dst = *src;
        }
        for (dst, src) in self.fc_w.iter_mut().zip(&data[4]) {
            *dst = *src;
        }
        for (dst, src) in self.fc_b.iter_mut().zip(&data[5]) {
            *dst = *src;
        }
    }
}

struct ModelReader {
    inner: BufReader<File>,
    path: std::path::PathBuf,
}

impl ModelReader {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Model {
            path: self.path.clone(),
            detail: "truncated file".into(),
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }
}

struct ForwardTrace {
    input: Array3<f64>,
    pre1: Array3<f64>,
    pool1: Array3<f64>,
    arg1: Vec<usize>,
    pre2: Array3<f64>,
    arg2: Vec<usize>,
    flat: Vec<f64>,
    probs: Array1<f64>,
}

struct Gradients {
    input: Array2<f64>,
    conv1_w: Array4<f64>,
    conv1_b: Array1<f64>,
    conv2_w: Array4<f64>,
    conv2_b: Array1<f64>,
    fc_w: Array2<f64>,
    fc_b: Array1<f64>,
}

impl Gradients {
    fn zeroed() -> Gradients {
        Gradients {
            input: Array2::zeros((INPUT_SIZE, INPUT_SIZE)),
            conv1_w: Array4::zeros((CONV1_OUT, 1, KERNEL, KERNEL)),
            conv1_b: Array1::zeros(CONV1_OUT),
            conv2_w: Array4::zeros((CONV2_OUT, CONV1_OUT, KERNEL, KERNEL)),
            conv2_b: Array1::zeros(CONV2_OUT),
            fc_w: Array2::zeros((NUM_CLASSES, FLAT_LEN)),
            fc_b: Array1::zeros(NUM_CLASSES),
        }
    }

    fn accumulate(&mut self, other: &Gradients) {
        self.conv1_w.zip_mut_with(&other.conv1_w, |a, &b| *a += b);
        self.conv1_b.zip_mut_with(&other.conv1_b, |a, &b| *a += b);
        self.conv2_w.zip_mut_with(&other.conv2_w, |a, &b| *a += b);
        self.conv2_b.zip_mut_with(&other.conv2_b, |a, &b| *a += b);
        self.fc_w.zip_mut_with(&other.fc_w, |a, &b| *a += b);
        self.fc_b.zip_mut_with(&other.fc_b, |a, &b| *a += b);
    }

    fn scale(&mut self, s: f64) {
        self.conv1_w.mapv_inplace(|v| v * s);
        self.conv1_b.mapv_inplace(|v| v * s);
        self.conv2_w.mapv_inplace(|v| v * s);
        self.conv2_b.mapv_inplace(|v| v * s);
        self.fc_w.mapv_inplace(|v| v * s);
        self.fc_b.mapv_inplace(|v| v * s);
    }
}

/// Grayscale, bilinear-resize to 64x64 and scale to `[0, 1]`.
pub fn preprocess(img: &Image) -> Array2<f64> {
    let gray = img.to_grayscale();
    let resized = gray
        .resize_bilinear(INPUT_SIZE, INPUT_SIZE)
        .expect("resize to fixed 64x64 cannot fail");
    Array2::from_shape_fn((INPUT_SIZE, INPUT_SIZE), |(y, x)| {
        resized.get(y, x, 0) / 255.0
    })
}

/// Adjoint of [`preprocess`]: maps a gradient at the 64x64 network input
/// back to the original image dimensions and channels.
fn preprocess_adjoint(grad: &Array2<f64>, original: &Image) -> Result<Image> {
    let mut g64 = Image::new(INPUT_SIZE, INPUT_SIZE, 1, 0.0)?;
    for y in 0..INPUT_SIZE {
        for x in 0..INPUT_SIZE {
            g64.set(y, x, 0, grad[(y, x)] / 255.0);
        }
    }
    let g_gray = g64.resize_bilinear_adjoint(original.height(), original.width())?;
    Image::grayscale_adjoint(&g_gray, original.channels())
}

/// Zero-padded "same" convolution over `[in_ch, h, w]` feature maps.
fn conv_same(input: &Array3<f64>, weights: &Array4<f64>, bias: &Array1<f64>) -> Array3<f64> {
    let (in_ch, h, w) = input.dim();
    let (out_ch, w_in_ch, kh, kw) = weights.dim();
    debug_assert_eq!(in_ch, w_in_ch);
    let (ry, rx) = (kh / 2, kw / 2);
    let mut out = Array3::zeros((out_ch, h, w));
    for oc in 0..out_ch {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[oc];
                for ic in 0..in_ch {
                    for ky in 0..kh {
                        let iy = y as isize + ky as isize - ry as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = x as isize + kx as isize - rx as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += input[(ic, iy as usize, ix as usize)]
                                * weights[(oc, ic, ky, kx)];
                        }
                    }
                }
                out[(oc, y, x)] = acc;
            }
        }
    }
    out
}

/// Gradients of a same convolution w.r.t. input, weights and bias.
fn conv_same_backward(
    input: &Array3<f64>,
    weights: &Array4<f64>,
    grad_out: &Array3<f64>,
) -> (Array3<f64>, Array4<f64>, Array1<f64>) {
    let (in_ch, h, w) = input.dim();
    let (out_ch, _, kh, kw) = weights.dim();
    let (ry, rx) = (kh / 2, kw / 2);
    let mut d_input = Array3::zeros((in_ch, h, w));
    let mut d_weights = Array4::zeros(weights.raw_dim());
    let mut d_bias = Array1::zeros(out_ch);
    for oc in 0..out_ch {
        for y in 0..h {
            for x in 0..w {
                let g = grad_out[(oc, y, x)];
                if g == 0.0 {
                    continue;
                }
                d_bias[oc] += g;
                for ic in 0..in_ch {
                    for ky in 0..kh {
                        let iy = y as isize + ky as isize - ry as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = x as isize + kx as isize - rx as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let (iy, ix) = (iy as usize, ix as usize);
                            d_input[(ic, iy, ix)] += g * weights[(oc, ic, ky, kx)];
                            d_weights[(oc, ic, ky, kx)] += g * input[(ic, iy, ix)];
                        }
                    }
                }
            }
        }
    }
    (d_input, d_weights, d_bias)
}

fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// ReLU subgradient: zero at and below the kink.
fn relu_backward(grad: &Array3<f64>, pre: &Array3<f64>) -> Array3<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// 2x2 max-pool, stride 2. Ties route to the first maximum in row-major
/// window order, recorded in the returned argmax table.
fn maxpool2(input: &Array3<f64>) -> (Array3<f64>, Vec<usize>) {
    let (ch, h, w) = input.dim();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Array3::zeros((ch, oh, ow));
    let mut argmax = vec![0usize; ch * oh * ow];
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (iy, ix) = (2 * oy + dy, 2 * ox + dx);
                        let v = input[(c, iy, ix)];
                        if v > best {
                            best = v;
                            best_idx = iy * w + ix;
                        }
                    }
                }
                out[(c, oy, ox)] = best;
                argmax[(c * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
    (out, argmax)
}

/// Routes pooled gradients back to the recorded argmax positions only.
fn maxpool2_backward(
    grad: &Array3<f64>,
    argmax: &[usize],
    input_dim: (usize, usize, usize),
) -> Array3<f64> {
    let (ch, h, w) = input_dim;
    let (_, oh, ow) = grad.dim();
    let mut out = Array3::zeros((ch, h, w));
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let flat = argmax[(c * oh + oy) * ow + ox];
                out[(c, flat / w, flat % w)] += grad[(c, oy, ox)];
            }
        }
    }
    out
}

/// Channel-major row-major flatten, the fixed order the dense layer sees.
fn flatten(x: &Array3<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

fn unflatten(flat: &[f64], ch: usize, side: usize) -> Array3<f64> {
    Array3::from_shape_vec((ch, side, side), flat.to_vec()).expect("flat length matches")
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Array1<f64> = logits.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    exps / sum
}

/// Trains on preprocessed samples with label-balanced input listing:
/// bona fides first, then morphs. Deterministic for a fixed seed.
pub fn train(
    bona_fide: &[Image],
    morphs: &[Image],
    cfg: &TrainConfig,
) -> Result<DetectorModel> {
    if bona_fide.is_empty() || morphs.is_empty() {
        return Err(Error::Data(
            "training needs at least one image of each class".into(),
        ));
    }
    let mut samples: Vec<(Array2<f64>, Label)> = Vec::new();
    for img in bona_fide {
        samples.push((preprocess(img), Label::BonaFide));
    }
    for img in morphs {
        samples.push((preprocess(img), Label::Morph));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = DetectorModel::random(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        // Fisher-Yates with the session RNG keeps the batch order seeded.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut acc = Gradients::zeroed();
            for &idx in batch {
                let (x, y) = &samples[idx];
                let trace = model.forward_trace(x);
                let mut dlogits = trace.probs.clone();
                dlogits[y.index()] -= 1.0;
                let g = model.backward_trace(x, &trace, &dlogits);
                acc.accumulate(&g);
            }
            acc.scale(1.0 / batch.len() as f64);
            model.apply_gradients(&acc, cfg.learning_rate);
        }
    }
    Ok(model)
}

/// Mean cross-entropy of the model over a labeled set.
pub fn mean_loss(model: &DetectorModel, images: &[Image], label: Label) -> f64 {
    let mut total = 0.0;
    for img in images {
        let x = preprocess(img);
        let trace = model.forward_trace(&x);
        total += -trace.probs[label.index()].max(f64::MIN_POSITIVE).ln();
    }
    total / images.len().max(1) as f64
}
