//! Integer-order Bessel functions of the first and second kind.
//!
//! `J_0..J_n` come from Miller's backward recurrence normalized with
//! `J_0 + 2 Σ J_2k = 1`. `Y_0` and `Y_1` use the Neumann series in the
//! same `J_k` values, higher `Y_n` the (stable) upward recurrence.

use std::f64::consts::PI;

use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// First kind, `J_n`.
    J,
    /// Second kind, `Y_n`.
    Y,
}

pub fn bessel(kind: BesselKind, order: u32, x: f64) -> Result<f64> {
    match kind {
        BesselKind::J => Ok(bessel_j(order, x)),
        BesselKind::Y => bessel_y(order, x),
    }
}

/// `J_n(x)` for any real `x`.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    let n = order as usize;
    if x < 0.0 {
        let v = bessel_j(order, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    j_sequence(n, x)[n]
}

/// `Y_n(x)`, `x > 0`.
pub fn bessel_y(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Y_{order}({x}) requires x > 0")));
    }
    let (y0, y1) = y0_y1(x);
    if order == 0 {
        return Ok(y0);
    }
    let (mut prev, mut cur) = (y0, y1);
    for k in 1..order {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `J_0(x) .. J_n(x)` (length at least `n + 2`) for `x > 0`.
fn j_sequence(n: usize, x: f64) -> Vec<f64> {
    let reach = (n as f64).max(x);
    let mut m = (reach + 20.0 + (40.0 * reach).sqrt()).ceil() as usize + n / 2;
    if m % 2 == 1 {
        m += 1;
    }
    let mut out = vec![0.0; m + 2];
    let (mut jp1, mut j) = (0.0_f64, 1e-30_f64);
    out[m] = j;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        out[k - 1] = j;
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            for v in out[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += out[0];
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

fn y0_y1(x: f64) -> (f64, f64) {
    let js = j_sequence(2, x);
    let ln_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < js.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * js[2 * k] / k as f64;
        s1 += sign * (js[2 * k - 1] - js[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * (ln_term * js[0] - 2.0 * s0);
    let y1 = 2.0 / PI * (ln_term * js[1] - js[0] / x + s1);
    (y0, y1)
}

/// `J_n'(x) = (J_{n-1}(x) - J_{n+1}(x)) / 2`, with `J_0' = -J_1`.
pub fn bessel_j_derivative(order: u32, x: f64) -> f64 {
    if order == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(order - 1, x) - bessel_j(order + 1, x))
    }
}

/// The `index`-th positive root of `J_order` (`index >= 1`).
pub fn bessel_root(order: u32, index: u32) -> Result<f64> {
    if index == 0 {
        return Err(Error::Domain("Bessel root index starts at 1".into()));
    }
    let step = 0.05;
    let mut a = (order as f64).max(step);
    let mut fa = bessel_j(order, a);
    let mut found = 0;
    loop {
        let b = a + step;
        let fb = bessel_j(order, b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == index {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                if fa == 0.0 {
                    return Ok(a);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = bessel_j(order, mid);
                    if fm == 0.0 {
                        return Ok(mid);
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * hi {
                        break;
                    }
                }
                let mut r = 0.5 * (lo + hi);
                for _ in 0..3 {
                    let d = bessel_j_derivative(order, r);
                    let dr = bessel_j(order, r) / d;
                    if !(dr.abs() < step) {
                        break;
                    }
                    r -= dr;
                }
                return Ok(r);
            }
        }
        a = b;
        fa = fb;
        if a > 1e4 {
            return Err(Error::Domain(format!("no root {index} of J_{order} found")));
        }
    }
}
