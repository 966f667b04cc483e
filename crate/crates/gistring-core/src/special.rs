//! Special functions: exponential integrals, Laguerre polynomials and
//! compactly supported test functions.

use alloc::vec::Vec;

use num_traits::Float;

use crate::err::{Error, Result};
use crate::Complex;

pub const EULER_GAMMA: f64 = 0.577215664901532860606512090082402431;

/// Principal-branch exponential integral `E1(z)`, analytic off `(-inf, 0]`.
///
/// Power series near the origin, Lentz continued fraction elsewhere. Points
/// close to the cut converge slowly; boundary values on the cut itself are
/// provided by [`e1_below_cut`].
pub fn exp_e1(z: Complex) -> Result<Complex> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::Domain("E1 is singular at zero"));
    }
    if z.im == 0.0 && z.re < 0.0 {
        return Err(Error::Domain("E1 branch cut; use a boundary evaluation"));
    }
    // series on a disk, and also left of the imaginary axis where the
    // continued fraction fails (cancellation stays mild there as long as the
    // argument is not too far from the negative real axis)
    if z.norm() <= 6.0 || (z.re < 0.0 && z.norm() <= 25.0) {
        // E1(z) = -gamma - ln z + sum (-1)^{k+1} z^k / (k k!)
        let mut sum = Complex::new(0.0, 0.0);
        let mut term = Complex::new(1.0, 0.0);
        for k in 1..500 {
            term = term * z / (k as f64);
            let add = term / (k as f64);
            sum += if k % 2 == 1 { add } else { -add };
            if add.norm() < 1e-18 * (1.0 + sum.norm()) {
                break;
            }
        }
        return Ok(-Complex::new(EULER_GAMMA, 0.0) - z.ln() + sum);
    }
    if z.re < 0.0 {
        return Err(Error::Unsupported(
            "E1 far from the positive real axis with large modulus",
        ));
    }
    // modified Lentz on E1(z) = e^{-z} / (z + 1/(1 + 1/(z + 2/(1 + 2/(z + ...)))))
    let tiny = 1e-300;
    let mut f = Complex::new(tiny, 0.0);
    let mut c = f;
    let mut d = Complex::new(0.0, 0.0);
    let mut b;
    let mut a;
    for i in 0..1000 {
        if i == 0 {
            a = Complex::new(1.0, 0.0);
            b = z;
        } else {
            let k = (i + 1) / 2;
            a = Complex::new(k as f64, 0.0);
            b = if i % 2 == 1 {
                Complex::new(1.0, 0.0)
            } else {
                z
            };
        }
        d = b + a * d;
        if d.norm() < tiny {
            d = Complex::new(tiny, 0.0);
        }
        c = b + a / c;
        if c.norm() < tiny {
            c = Complex::new(tiny, 0.0);
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        let gap = (delta - Complex::new(1.0, 0.0)).norm();
        if gap < 2e-15 {
            return Ok((-z).exp() * f);
        }
        if i == 999 {
            return Err(Error::Accuracy {
                context: "E1 continued fraction",
                target: 2e-15,
                achieved: gap,
            });
        }
    }
    unreachable!()
}

/// Real exponential integral `Ei(x)` for `x > 0`.
pub fn exp_ei(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("Ei implemented for positive arguments"));
    }
    if x < 40.0 {
        // Ei(x) = gamma + ln x + sum x^k/(k k!), all terms positive
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add < 1e-17 * (1.0 + sum) {
                break;
            }
        }
        Ok(EULER_GAMMA + x.ln() + sum)
    } else {
        // asymptotic e^x/x sum k!/x^k, truncated at the smallest term
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..200 {
            let next = term * k as f64 / x;
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        Ok(x.exp() / x * sum)
    }
}

/// Boundary value `E1(-t - i0)` for `t > 0`: equals `-Ei(t) + i pi`.
pub fn e1_below_cut(t: f64) -> Result<Complex> {
    Ok(Complex::new(-exp_ei(t)?, core::f64::consts::PI))
}

/// Laguerre polynomial values `L_0(x), ..., L_n(x)` by the three-term
/// recurrence `(k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}`.
pub fn laguerre_seq(n: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n == 0 {
        return v;
    }
    v.push(1.0 - x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * v[k] - kf * v[k - 1]) / (kf + 1.0);
        v.push(next);
    }
    v
}

/// `L_n(x)`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    *laguerre_seq(n, x).last().expect("nonempty")
}

/// Smooth bump supported on `(center - halfwidth, center + halfwidth)`:
/// `phi = exp(-1/(1 - s^2))` in the scaled variable `s`.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub center: f64,
    pub halfwidth: f64,
}

impl Bump {
    pub fn new(center: f64, halfwidth: f64) -> Result<Self> {
        if !(halfwidth.is_finite() && halfwidth > 0.0 && center.is_finite()) {
            return Err(Error::Invalid("bump needs a finite center and positive width"));
        }
        Ok(Bump { center, halfwidth })
    }

    fn s(&self, x: f64) -> f64 {
        (x - self.center) / self.halfwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            self.eval(x) * (-2.0 * s / (q * q)) / self.halfwidth
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        let s = self.s(x);
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            let g = -2.0 * s / (q * q);
            let gp = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
            self.eval(x) * (g * g + gp) / (self.halfwidth * self.halfwidth)
        }
    }
}
