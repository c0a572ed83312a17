//! Finite-difference gradient oracle evaluated in double-double arithmetic.
//!
//! The loss is recomputed from scratch with ~32 significant digits, so the
//! central difference quotient is limited by truncation only; one Richardson
//! step from the base step removes the O(h²) term.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::Rng;
use sgnlab_core::net::{Activation, LossKind, NetSpec, Params};

pub const BASE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DD {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };
    const LN2: DD = DD { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

    pub fn new(x: f64) -> DD {
        DD { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn mul_f64(self, b: f64) -> DD {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        let (s, t) = quick_two_sum(p, e + self.lo * b);
        DD { hi: s, lo: t }
    }

    fn powi2(self, k: i32) -> DD {
        let f = 2f64.powi(k);
        DD { hi: self.hi * f, lo: self.lo * f }
    }

    pub fn exp(self) -> DD {
        if self.hi > 700.0 {
            return DD::new(f64::INFINITY);
        }
        if self.hi < -700.0 {
            return DD::ZERO;
        }
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - DD::LN2.mul_f64(k)).powi2(-10);
        // Taylor series of e^r - 1 for |r| < 2^-11
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = term * r / DD::new(n as f64);
            sum = sum + term;
        }
        // (1 + s)^2 - 1 = 2s + s^2, repeated squaring without losing the small part
        for _ in 0..10 {
            sum = sum.powi2(1) + sum * sum;
        }
        (sum + DD::ONE).powi2(k as i32)
    }

    pub fn ln(self) -> DD {
        assert!(self.hi > 0.0, "logarithm of non-positive value");
        let mut y = DD::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - DD::ONE;
        }
        y
    }

    pub fn max(self, other: DD) -> DD {
        if self.to_f64() >= other.to_f64() {
            self
        } else {
            other
        }
    }

    pub fn abs(self) -> DD {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, b: DD) -> DD {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DD { hi, lo }
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, b: DD) -> DD {
        self + (-b)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, b: DD) -> DD {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        DD { hi, lo }
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, b: DD) -> DD {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::new(q3)
    }
}

fn sigmoid(x: DD) -> DD {
    if x.hi >= 0.0 {
        DD::ONE / (DD::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (DD::ONE + e)
    }
}

fn activate(act: Activation, x: DD) -> DD {
    match act {
        Activation::Relu => x.max(DD::ZERO),
        Activation::LeakyRelu(s) => {
            if x.hi > 0.0 {
                x
            } else {
                x.mul_f64(s)
            }
        }
        Activation::Sigmoid => sigmoid(x),
        Activation::Tanh => {
            let a = x.abs();
            let t = DD::ONE - DD::new(2.0) / ((a.powi2(1)).exp() + DD::ONE);
            if x.hi < 0.0 {
                -t
            } else {
                t
            }
        }
        Activation::SoftPlus => x.max(DD::ZERO) + (DD::ONE + (-x.abs()).exp()).ln(),
        Activation::Identity => x,
    }
}

/// Loss of the network whose flat parameters are `flat` with entry `index`
/// shifted by `delta`, all in double-double. The flat layout is rebuilt here
/// from the layer sizes: per layer, row-major weights followed by biases.
/// Also returns the smallest |pre-activation| seen at a kinked activation.
pub fn dd_loss(spec: &NetSpec, flat: &[f64], index: usize, delta: f64, input: &[f64], target: &[f64]) -> (DD, f64) {
    let param = |i: usize| {
        if i == index {
            DD::new(flat[i]) + DD::new(delta)
        } else {
            DD::new(flat[i])
        }
    };
    let sizes = spec.layer_sizes();
    let mut a: Vec<DD> = input.iter().map(|&x| DD::new(x)).collect();
    let mut offset = 0;
    let mut kink_margin = f64::INFINITY;
    for k in 0..sizes.len() - 1 {
        let (cols, rows) = (sizes[k], sizes[k + 1]);
        let act = spec.activations()[k];
        let mut next = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut u = param(offset + rows * cols + i);
            for j in 0..cols {
                u = u + param(offset + i * cols + j) * a[j];
            }
            if act.has_kink() {
                kink_margin = kink_margin.min(u.to_f64().abs());
            }
            next.push(activate(act, u));
        }
        offset += rows * cols + rows;
        a = next;
    }
    let loss = match spec.loss() {
        LossKind::Mse => a
            .iter()
            .zip(target)
            .map(|(&o, &y)| (o - DD::new(y)) * (o - DD::new(y)))
            .fold(DD::ZERO, |s, x| s + x),
        LossKind::CrossEntropy => {
            let m = a.iter().copied().fold(DD::new(f64::NEG_INFINITY), DD::max);
            let z = a.iter().map(|&o| (o - m).exp()).fold(DD::ZERO, |s, x| s + x);
            let lse = m + z.ln();
            a.iter()
                .zip(target)
                .map(|(&o, &y)| (lse - o).mul_f64(y))
                .fold(DD::ZERO, |s, x| s + x)
        }
    };
    (loss, kink_margin)
}

/// Central difference with step `BASE_STEP`, Richardson-extrapolated with
/// the half step.
pub fn fd_gradient(spec: &NetSpec, params: &Params, input: &[f64], target: &[f64]) -> Vec<f64> {
    let flat = params.as_flat();
    (0..flat.len())
        .map(|i| {
            let diff = |h: f64| {
                let (up, _) = dd_loss(spec, flat, i, h, input, target);
                let (down, _) = dd_loss(spec, flat, i, -h, input, target);
                ((up - down) / DD::new(2.0 * h)).to_f64()
            };
            let (d1, d2) = (diff(BASE_STEP), diff(BASE_STEP / 2.0));
            (4.0 * d2 - d1) / 3.0
        })
        .collect()
}

/// A random dense net (1 to 4 learnable layers, widths up to 16) with a
/// sample whose kinked pre-activations all stay at least `1e-3` from the kink.
pub struct Case {
    pub spec: NetSpec,
    pub params: Params,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

pub fn random_activation<R: Rng>(rng: &mut R, which: usize) -> Activation {
    match which % 6 {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu(rng.random_range(0.01..0.3)),
        2 => Activation::Sigmoid,
        3 => Activation::Tanh,
        4 => Activation::SoftPlus,
        _ => Activation::Identity,
    }
}

/// `force` pins the activation of every layer and the loss, for coverage.
pub fn random_case<R: Rng>(rng: &mut R, force: Option<(usize, LossKind)>) -> Case {
    let depth = rng.random_range(1..=4);
    let loss = force.map(|f| f.1).unwrap_or(if rng.random_bool(0.5) { LossKind::Mse } else { LossKind::CrossEntropy });
    let mut sizes: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=16)).collect();
    if loss == LossKind::CrossEntropy {
        sizes[depth] = sizes[depth].max(2);
    }
    let acts: Vec<Activation> = (0..depth)
        .map(|_| {
            let w = force.map(|f| f.0).unwrap_or_else(|| rng.random_range(0..6));
            random_activation(rng, w)
        })
        .collect();
    let spec = NetSpec::new(sizes.clone(), acts, loss).unwrap();
    let params = Params::init_uniform(&spec, rng.random());
    let out = sizes[depth];
    let target: Vec<f64> = match loss {
        LossKind::Mse => (0..out).map(|_| rng.random_range(-1.0..1.0)).collect(),
        LossKind::CrossEntropy => {
            let mut t = vec![0.0; out];
            t[rng.random_range(0..out)] = 1.0;
            t
        }
    };
    loop {
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, margin) = dd_loss(&spec, params.as_flat(), usize::MAX, 0.0, &input, &target);
        if margin >= 1e-3 {
            return Case { spec, params, input, target };
        }
    }
}

/// Largest relative error of `analytic` against `reference` over entries with
/// `|reference| > 1e-8`, and the number of entries checked.
pub fn max_relative_error(analytic: &[f64], reference: &[f64]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (a, r) in analytic.iter().zip(reference) {
        if r.abs() > 1e-8 {
            worst = worst.max((a - r).abs() / r.abs());
            checked += 1;
        }
    }
    (worst, checked)
}
