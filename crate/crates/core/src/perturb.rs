//! Basic-iterative-method adversarial perturbation with total-variation
//! smoothing.
//!
//! Each step ascends `L_adv = J(x, y=morph) - lambda * TV(x - x_orig)`
//! by a signed-gradient move of size `beta`, then projects back into the
//! L-infinity ball of radius `epsilon` around the original image and into
//! the valid pixel range. Ascending the morph-class cross-entropy pushes
//! the detector towards the bona-fide label while the TV term keeps the
//! residual smooth.

use crate::detector::{DetectorModel, Label};
use crate::error::{Error, Result};
use crate::image::Image;

/// Attack hyperparameters. `beta` and `epsilon` are in `[0, 255]` pixel
/// units; defaults are step 6, budget 2, TV weight 0.1, 10 iterations.
#[derive(Debug, Clone, Copy)]
pub struct PerturbConfig {
    /// Step size per iteration, pixel units.
    pub beta: f64,
    /// L-infinity budget around the original image, pixel units.
    pub epsilon: f64,
    /// Total-variation weight.
    pub lambda: f64,
    pub iterations: usize,
    pub pixel_range: (f64, f64),
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            beta: 6.0,
            epsilon: 2.0,
            lambda: 0.1,
            iterations: 10,
            pixel_range: (0.0, 255.0),
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "step size beta must be positive, got {}",
                self.beta
            )));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "budget epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "TV weight lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidArgument("iteration count must be at least 1".into()));
        }
        if self.pixel_range.0 > self.pixel_range.1 {
            return Err(Error::InvalidArgument("pixel range inverted".into()));
        }
        Ok(())
    }
}

/// State recorded at the top of one attack iteration, before the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub l_adv: f64,
    pub cross_entropy: f64,
    pub tv: f64,
    pub p_morph: f64,
}

/// The attack output: per-iteration records plus the final image.
#[derive(Debug, Clone)]
pub struct PerturbTrace {
    pub records: Vec<IterationRecord>,
    pub adversarial: Image,
    /// `max |adversarial - original|` over all samples.
    pub final_linf: f64,
}

/// Isotropic total variation of a residual image, summed over channels:
/// `sum sqrt(down_diff^2 + right_diff^2)` with missing neighbors at the
/// bottom/right border contributing zero difference.
pub fn tv(residual: &Image) -> f64 {
    let (h, w, ch) = (residual.height(), residual.width(), residual.channels());
    let mut total = 0.0;
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                let v = residual.get(y, x, c);
                let dy = if y + 1 < h { v - residual.get(y + 1, x, c) } else { 0.0 };
                let dx = if x + 1 < w { v - residual.get(y, x + 1, c) } else { 0.0 };
                total += (dy * dy + dx * dx).sqrt();
            }
        }
    }
    total
}

/// Smoothing constant for the TV gradient: each norm becomes
/// `sqrt(dy^2 + dx^2 + DELTA^2)` so the gradient exists at zero residual.
const TV_SMOOTHING: f64 = 1e-8;

/// Analytic gradient of the smoothed total variation.
pub fn tv_gradient(residual: &Image) -> Image {
    let (h, w, ch) = (residual.height(), residual.width(), residual.channels());
    let mut grad = Image::new(h, w, ch, 0.0).expect("same dims as input");
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                let v = residual.get(y, x, c);
                let dy = if y + 1 < h { v - residual.get(y + 1, x, c) } else { 0.0 };
                let dx = if x + 1 < w { v - residual.get(y, x + 1, c) } else { 0.0 };
                let norm = (dy * dy + dx * dx + TV_SMOOTHING * TV_SMOOTHING).sqrt();
                // d/dv of this pixel's own term.
                let own = (dy + dx) / norm;
                grad.set(y, x, c, grad.get(y, x, c) + own);
                // This pixel appears negated in the terms of its upper and
                // left neighbors.
                if y + 1 < h {
                    grad.set(y + 1, x, c, grad.get(y + 1, x, c) - dy / norm);
                }
                if x + 1 < w {
                    grad.set(y, x + 1, c, grad.get(y, x + 1, c) - dx / norm);
                }
            }
        }
    }
    grad
}

/// One BIM update:
/// `clip_range(x_orig + clamp(x_adv + beta * sign(grad) - x_orig, -eps, eps))`,
/// with `sign(0) = 0`.
pub fn bim_step(
    x_adv: &Image,
    x_orig: &Image,
    grad_l_adv: &Image,
    cfg: &PerturbConfig,
) -> Result<Image> {
    if !x_adv.same_shape(x_orig) || !x_adv.same_shape(grad_l_adv) {
        return Err(Error::Shape("BIM step inputs differ in shape".into()));
    }
    let (lo, hi) = cfg.pixel_range;
    let mut out = x_adv.clone();
    for ((o, &orig), &g) in out
        .pixels_mut()
        .iter_mut()
        .zip(x_orig.pixels())
        .zip(grad_l_adv.pixels())
    {
        let stepped = *o + cfg.beta * signum0(g);
        let residual = (stepped - orig).clamp(-cfg.epsilon, cfg.epsilon);
        *o = (orig + residual).clamp(lo, hi);
    }
    Ok(out)
}

#[inline]
fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Runs the full attack against a detector. The target label is fixed to
/// the morph class: each step ascends its cross-entropy so the sample
/// drifts towards bona fide. Deterministic for fixed inputs.
pub fn perturb(
    morph: &Image,
    model: &DetectorModel,
    cfg: &PerturbConfig,
) -> Result<PerturbTrace> {
    cfg.validate()?;
    let mut x_adv = morph.clone();
    let mut records = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let lg = model.loss_and_input_gradient(&x_adv, Label::Morph)?;
        let residual = x_adv.sub(morph)?;
        let tv_value = tv(&residual);
        let tv_grad = tv_gradient(&residual);

        records.push(IterationRecord {
            l_adv: lg.loss - cfg.lambda * tv_value,
            cross_entropy: lg.loss,
            tv: tv_value,
            p_morph: lg.p_morph,
        });

        let mut grad = lg.gradient;
        for (g, &t) in grad.pixels_mut().iter_mut().zip(tv_grad.pixels()) {
            *g -= cfg.lambda * t;
        }
        x_adv = bim_step(&x_adv, morph, &grad, cfg)?;
    }
    let final_linf = x_adv.linf_distance(morph)?;
    if final_linf > cfg.epsilon + 1e-9 {
        return Err(Error::Internal(format!(
            "perturbation budget violated: {final_linf} > {}",
            cfg.epsilon
        )));
    }
    Ok(PerturbTrace {
        records,
        adversarial: x_adv,
        final_linf,
    })
}
