//! Direct spectral problem: fundamental system, Weyl functions, eigenvalues
//! and spectral measures.
//!
//! The solution pair `theta, phi` of `-f'' = z omega f + z^2 upsilon f` is
//! propagated by exact 2x2 transfer matrices: free intervals and atom kicks
//! for the jump parts, closed-form power solutions on the model density
//! segments. The quasi-derivative `f^[1] = f' + z w f` is left-continuous
//! and jumps only at `upsilon` atoms; the plain slope `f'` jumps at every
//! atom by `-(z omega_n + z^2 upsilon_n) f`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::err::{Error, Result};
use crate::model::{alpha_ramp, AcDensity, AcPiece, Length, SpectralMeasure, StringCoefficients, Tail};
use crate::Complex;

const ONE: Complex = Complex::new(1.0, 0.0);
const ZERO: Complex = Complex::new(0.0, 0.0);

/// Values of the fundamental system at `(z, x)`.
///
/// `theta_q`, `phi_q` are the left-continuous quasi-derivatives
/// `f' + z w f`; `theta_slope`, `phi_slope` are the right slopes `f'(x+)`
/// (the kick of an atom sitting exactly at `x` is included in the slopes
/// but not in the quasi-derivatives).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalSystemValue {
    pub z: Complex,
    pub x: f64,
    pub theta: Complex,
    pub theta_q: Complex,
    pub phi: Complex,
    pub phi_q: Complex,
    pub theta_slope: Complex,
    pub phi_slope: Complex,
}

/// Two-column state `(f, f')` for the pair `(theta, phi)`.
#[derive(Debug, Clone, Copy)]
struct SysState {
    th: (Complex, Complex),
    ph: (Complex, Complex),
}

impl SysState {
    fn init() -> Self {
        SysState {
            th: (ONE, ZERO),
            ph: (ZERO, ONE),
        }
    }

    fn apply(&mut self, t: [Complex; 4]) {
        let f = |v: (Complex, Complex)| (t[0] * v.0 + t[1] * v.1, t[2] * v.0 + t[3] * v.1);
        self.th = f(self.th);
        self.ph = f(self.ph);
    }

    fn kick(&mut self, g: Complex) {
        self.th.1 -= g * self.th.0;
        self.ph.1 -= g * self.ph.0;
    }
}

/// `sinh(mu t)/mu` with a series fallback near `mu t = 0`.
fn sinhc_over(mu: Complex, t: f64) -> Complex {
    let w = mu * t;
    if w.norm() < 1e-5 {
        let w2 = w * w;
        (ONE + w2 / 6.0 + w2 * w2 / 120.0) * t
    } else {
        w.sinh() / mu
    }
}

/// Transfer matrix over `[a, b]` for `-f'' = q r^2 (1 + r s)^{-2} f`
/// (power-law segment; `q = z/(4 alpha)` with `r = 2 sqrt(alpha)` for the
/// alpha density, `q = z^2/(4 beta^2)` with `r = 2 beta` for the beta one).
fn power_segment(r: f64, q: Complex, a: f64, b: f64) -> [Complex; 4] {
    let ua = 1.0 + r * a;
    let ub = 1.0 + r * b;
    let t = (ub / ua).ln();
    let mu = (Complex::new(0.25, 0.0) - q).sqrt();
    let ch = (mu * t).cosh();
    let s = sinhc_over(mu, t);
    let sp = (ub / ua).sqrt();
    let g = (ua * ub).sqrt();
    [
        (ch - s * 0.5) * sp,
        s * (g / r),
        -s * q * (r / g),
        (ch + s * 0.5) / sp,
    ]
}

fn free_segment(len: f64) -> [Complex; 4] {
    [ONE, Complex::new(len, 0.0), ZERO, ONE]
}

fn segment(tail: Tail, z: Complex, a: f64, b: f64) -> [Complex; 4] {
    if z == ZERO {
        return free_segment(b - a);
    }
    match tail {
        Tail::Constant(_) => free_segment(b - a),
        Tail::ModelAlpha { alpha, .. } => {
            power_segment(2.0 * alpha.sqrt(), z / (4.0 * alpha), a, b)
        }
        Tail::ModelBeta { beta } => {
            power_segment(2.0 * beta, z * z / (4.0 * beta * beta), a, b)
        }
    }
}

/// Propagate both solutions to `x`, optionally including the kick of an atom
/// located exactly at `x`.
fn raw_system(s: &StringCoefficients, z: Complex, x: f64, kick_at_x: bool) -> SysState {
    let tail = s.tail();
    let mut st = SysState::init();
    let mut pos = 0.0;
    for a in s.atoms() {
        if a.x > x {
            break;
        }
        if a.x > pos {
            st.apply(segment(tail, z, pos, a.x));
            pos = a.x;
        }
        if a.x < x || kick_at_x {
            st.kick(z * a.omega + z * z * a.upsilon);
        }
    }
    if x > pos {
        st.apply(segment(tail, z, pos, x));
    }
    st
}

/// `w(x+)`: right limit of the anti-derivative (atom at `x` included).
fn w_right(s: &StringCoefficients, x: f64) -> f64 {
    let mut v = 0.0;
    for a in s.atoms() {
        if a.x <= x {
            v += a.omega;
        } else {
            break;
        }
    }
    if let Tail::ModelAlpha { alpha, .. } = s.tail() {
        v += alpha_ramp(alpha, x);
    }
    v
}

/// Fundamental system at `(z, x)`; `0 <= x < L` (`x = L` allowed for finite
/// strings so the endpoint data is reachable).
pub fn propagate(s: &StringCoefficients, z: Complex, x: f64) -> Result<FundamentalSystemValue> {
    if !(x >= 0.0) || (s.length().is_finite() && x > s.length().upper()) {
        return Err(Error::Domain("propagation point outside the string"));
    }
    let left = raw_system(s, z, x, false);
    let zw = z * s.w(x);
    let theta_q = left.th.1 + zw * left.th.0;
    let phi_q = left.ph.1 + zw * left.ph.0;
    let mut right = left;
    if let Some(a) = s.atoms().iter().find(|a| a.x == x) {
        right.kick(z * a.omega + z * z * a.upsilon);
    }
    Ok(FundamentalSystemValue {
        z,
        x,
        theta: left.th.0,
        theta_q,
        phi: left.ph.0,
        phi_q,
        theta_slope: right.th.1,
        phi_slope: right.ph.1,
    })
}

/// Weyl coefficient of the part of the string beyond the attach point,
/// in the global quasi-derivative convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWeylCoefficient {
    tail: Tail,
    length: Length,
    /// attach position (last atom of the string)
    x: f64,
    /// eventual constant of the jump part of `w`
    c: f64,
}

impl TailWeylCoefficient {
    pub fn of(s: &StringCoefficients) -> Self {
        TailWeylCoefficient {
            tail: s.tail(),
            length: s.length(),
            x: s.attach_point(),
            c: s.total_omega(),
        }
    }

    /// `M(z)` off the real axis (or on the real axis away from poles, cuts
    /// and, for finite strings, zero).
    pub fn eval(&self, z: Complex) -> Result<Complex> {
        match self.tail {
            Tail::Constant(_) => match self.length {
                Length::Infinite => Ok(Complex::new(self.c, 0.0)),
                Length::Finite(l) => {
                    if z == ZERO {
                        return Err(Error::Domain("representation pole at zero"));
                    }
                    Ok(Complex::new(self.c, 0.0) - (z * (l - self.x)).inv())
                }
            },
            Tail::ModelAlpha { alpha, .. } => {
                let sa = alpha.sqrt();
                if z.im == 0.0 && z.re >= alpha {
                    return Err(Error::Domain("point on the essential spectrum"));
                }
                let root = (Complex::new(alpha, 0.0) - z).sqrt();
                let u = 1.0 + 2.0 * sa * self.x;
                Ok(Complex::new(self.c, 0.0)
                    + ((Complex::new(sa, 0.0) + root).inv() + self.x) / u)
            }
            Tail::ModelBeta { beta } => {
                if z.im == 0.0 && z.re.abs() >= beta {
                    return Err(Error::Domain("point on the essential spectrum"));
                }
                let ik = -((Complex::new(beta, 0.0) - z) / (Complex::new(beta, 0.0) + z)).sqrt();
                let u = 1.0 + 2.0 * beta * self.x;
                Ok(Complex::new(self.c, 0.0) + (ONE + ik) / ((ONE - ik) * u))
            }
        }
    }

    /// `z M(z)`, stable at `z = 0` for finite strings.
    pub fn z_eval(&self, z: Complex) -> Result<Complex> {
        if let (Tail::Constant(_), Length::Finite(l)) = (self.tail, self.length) {
            return Ok(z * self.c - Complex::new(1.0 / (l - self.x), 0.0));
        }
        Ok(z * self.eval(z)?)
    }

    /// Boundary value `M(lambda + i0)` on the essential spectrum of the
    /// tail.
    pub fn boundary(&self, lambda: f64) -> Result<Complex> {
        match self.tail {
            Tail::Constant(_) => Err(Error::Domain(
                "constant tails have no essential spectrum to evaluate on",
            )),
            Tail::ModelAlpha { alpha, .. } => {
                if !(lambda > alpha) {
                    return Err(Error::Domain("boundary point below the branch point"));
                }
                let sa = alpha.sqrt();
                // sqrt(alpha - z) -> -i sqrt(lambda - alpha) from above
                let root = Complex::new(0.0, -(lambda - alpha).sqrt());
                let u = 1.0 + 2.0 * sa * self.x;
                Ok(Complex::new(self.c, 0.0)
                    + ((Complex::new(sa, 0.0) + root).inv() + self.x) / u)
            }
            Tail::ModelBeta { beta } => {
                if !(lambda.abs() > beta) {
                    return Err(Error::Domain("boundary point inside the spectral gap"));
                }
                let k = ((lambda - beta) / (lambda + beta)).sqrt();
                let ik = Complex::new(0.0, k);
                let u = 1.0 + 2.0 * beta * self.x;
                Ok(Complex::new(self.c, 0.0) + (ONE + ik) / ((ONE - ik) * u))
            }
        }
    }
}

/// Quasi-derivative data at the attach point, with every atom kick applied
/// and the right limit of `w` in the quasi-derivative.
fn attach_data(s: &StringCoefficients, z: Complex) -> (Complex, Complex, Complex, Complex) {
    let xc = s.attach_point();
    let st = raw_system(s, z, xc, true);
    let zw = z * w_right(s, xc);
    (
        st.th.0,
        st.th.1 + zw * st.th.0,
        st.ph.0,
        st.ph.1 + zw * st.ph.0,
    )
}

fn assemble_weyl(
    s: &StringCoefficients,
    z: Complex,
    m_tail: Complex,
    zm_tail: Complex,
) -> Result<Complex> {
    let (th, th_q, ph, ph_q) = attach_data(s, z);
    let den = ph_q - zm_tail * ph;
    let num = m_tail * th - th_q / z;
    let scale = ph_q.norm() + (zm_tail * ph).norm();
    if den.norm() <= 1e-14 * scale.max(1e-300) {
        return Err(Error::Domain("evaluation at a pole of the Weyl function"));
    }
    Ok(num / den)
}

/// Weyl function `m(z)` away from the real poles; `m(0)` is the analytic
/// extension (infinite strings only).
pub fn weyl(s: &StringCoefficients, z: Complex) -> Result<Complex> {
    if z == ZERO {
        if s.length().is_finite() {
            return Err(Error::Domain("representation pole at zero"));
        }
        return Ok(Complex::new(s.c_asymptote()?, 0.0));
    }
    let tc = TailWeylCoefficient::of(s);
    let m_tail = tc.eval(z)?;
    assemble_weyl(s, z, m_tail, z * m_tail)
}

/// Boundary value `m(lambda + i0)` for `lambda` inside the essential
/// spectrum of the tail.
pub fn weyl_boundary(s: &StringCoefficients, lambda: f64) -> Result<Complex> {
    let tc = TailWeylCoefficient::of(s);
    let m_tail = tc.boundary(lambda)?;
    let z = Complex::new(lambda, 0.0);
    assemble_weyl(s, z, m_tail, z * m_tail)
}

fn backward_segment(tail: Tail, z: Complex, lo: f64, hi: f64, r_hi: f64) -> f64 {
    let t = segment(tail, z, lo, hi);
    (t[0].re * r_hi - t[2].re) / (t[3].re - t[1].re * r_hi)
}

/// Quasi-derivative ratio `psi^[1](x-) / psi(x)` of the Weyl solution at a
/// real point off the essential spectrum of the tail.
///
/// Computed by sweeping the logarithmic derivative backward from the attach
/// point, so the value stays accurate deep inside a spectral gap, where the
/// forward fundamental system loses the decaying solution to cancellation.
/// Zeros of `psi(x)` surface as `Error::Precision`.
pub fn gap_quasi_ratio(s: &StringCoefficients, lambda: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain("position must be finite and nonnegative"));
    }
    if s.length().is_finite() {
        return Err(Error::Unsupported("backward ratio needs an infinite string"));
    }
    let tail = s.tail();
    let att = s.attach_point();
    let y0 = if x > att { x } else { att };
    let tc = TailWeylCoefficient {
        tail,
        length: s.length(),
        x: y0,
        c: s.total_omega(),
    };
    let z = Complex::new(lambda, 0.0);
    // the tail ratio is real off the essential spectrum
    let mut r = lambda * tc.eval(z)?.re - lambda * w_right(s, y0);
    let mut hi = y0;
    for a in s.atoms().iter().rev() {
        if a.x > hi {
            continue;
        }
        if a.x < x {
            break;
        }
        if hi > a.x {
            r = backward_segment(tail, z, a.x, hi, r);
            hi = a.x;
        }
        // crossing the atom from the right restores the pre-kick slope
        r += lambda * a.omega + lambda * lambda * a.upsilon;
    }
    if hi > x {
        r = backward_segment(tail, z, x, hi, r);
    }
    let h = r + lambda * s.w(x);
    if !h.is_finite() {
        return Err(Error::Precision("ratio pole hit during backward sweep"));
    }
    Ok(h)
}

/// Closed-form reference Weyl functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Alpha { alpha: f64, c: f64 },
    Beta { beta: f64, c: f64 },
    /// Stieltjes transform of the exponential weight shifted to `[alpha, inf)`.
    Laguerre { alpha: f64 },
}

pub fn model_weyl(kind: ModelKind, z: Complex) -> Result<Complex> {
    match kind {
        ModelKind::Alpha { alpha, c } => {
            if z.im == 0.0 && z.re >= alpha {
                return Err(Error::Domain("point on the cut"));
            }
            let root = (Complex::new(alpha, 0.0) - z).sqrt();
            Ok(Complex::new(c, 0.0) + (Complex::new(alpha.sqrt(), 0.0) + root).inv())
        }
        ModelKind::Beta { beta, c } => {
            if z.im == 0.0 && z.re.abs() >= beta {
                return Err(Error::Domain("point on the cut"));
            }
            let ik = -((Complex::new(beta, 0.0) - z) / (Complex::new(beta, 0.0) + z)).sqrt();
            Ok(Complex::new(c, 0.0) + (ONE + ik) / (ONE - ik))
        }
        ModelKind::Laguerre { alpha } => {
            if z.im == 0.0 && z.re >= alpha {
                return Err(Error::Domain("point on the cut"));
            }
            let a = Complex::new(alpha, 0.0) - z;
            Ok(a.exp() * crate::special::exp_e1(a)?)
        }
    }
}

/// Boundary values `m(lambda + i0)` of the reference models on their cuts.
pub fn model_weyl_boundary(kind: ModelKind, lambda: f64) -> Result<Complex> {
    match kind {
        ModelKind::Alpha { alpha, c } => {
            if !(lambda > alpha) {
                return Err(Error::Domain("boundary point below the branch point"));
            }
            let root = Complex::new(0.0, -(lambda - alpha).sqrt());
            Ok(Complex::new(c, 0.0) + (Complex::new(alpha.sqrt(), 0.0) + root).inv())
        }
        ModelKind::Beta { beta, c } => {
            if !(lambda.abs() > beta) {
                return Err(Error::Domain("boundary point inside the gap"));
            }
            let ik = Complex::new(0.0, ((lambda - beta) / (lambda + beta)).sqrt());
            Ok(Complex::new(c, 0.0) + (ONE + ik) / (ONE - ik))
        }
        ModelKind::Laguerre { alpha } => {
            if !(lambda > alpha) {
                return Err(Error::Domain("boundary point below the branch point"));
            }
            let t = lambda - alpha;
            Ok(Complex::new((-t).exp(), 0.0) * crate::special::e1_below_cut(t)?)
        }
    }
}

/// Real Weyl denominator `phi^[1] - z M phi` used for eigenvalue location.
fn weyl_denominator(s: &StringCoefficients, tc: &TailWeylCoefficient, lambda: f64) -> Result<f64> {
    let z = Complex::new(lambda, 0.0);
    let (_, _, ph, ph_q) = attach_data(s, z);
    let zm = tc.z_eval(z)?;
    Ok((ph_q - zm * ph).re)
}

/// Numerator `z m(z) D(z) = theta z M - theta^[1]` at real `z`.
fn weyl_numerator(s: &StringCoefficients, tc: &TailWeylCoefficient, lambda: f64) -> Result<f64> {
    let z = Complex::new(lambda, 0.0);
    let (th, th_q, _, _) = attach_data(s, z);
    let zm = tc.z_eval(z)?;
    Ok((th * zm - th_q).re)
}

fn window_check(s: &StringCoefficients, lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) {
        return Err(Error::Invalid("empty search window"));
    }
    match s.tail() {
        Tail::Constant(_) => Ok(()),
        Tail::ModelAlpha { alpha, .. } => {
            if hi >= alpha {
                Err(Error::Domain("window touches the essential spectrum"))
            } else {
                Ok(())
            }
        }
        Tail::ModelBeta { beta } => {
            if lo <= -beta || hi >= beta {
                Err(Error::Domain("window touches the essential spectrum"))
            } else {
                Ok(())
            }
        }
    }
}

/// Sample grid over `[lo, hi]`: logarithmic in each sign domain so windows
/// spanning orders of magnitude stay resolved, bridged across zero.
fn scan_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let scale = lo.abs().max(hi.abs());
    let small = 1e-8 * scale;
    let mut g: Vec<f64> = alloc::vec![lo, hi];
    if lo <= 0.0 && hi >= 0.0 {
        g.push(0.0);
        g.push(small.min(hi));
        g.push((-small).max(lo));
    }
    for sign in [1.0f64, -1.0] {
        let a = if sign > 0.0 { lo.max(small) } else { (-hi).max(small) };
        let b = if sign > 0.0 { hi } else { -lo };
        if b <= a {
            continue;
        }
        let (la, lb) = (a.ln(), b.ln());
        let n = (((lb - la) / core::f64::consts::LN_10 * per_decade as f64).ceil() as usize)
            .max(16);
        for i in 0..=n {
            g.push(sign * (la + (lb - la) * i as f64 / n as f64).exp());
        }
    }
    g.retain(|x| *x >= lo && *x <= hi && x.is_finite());
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    g.dedup();
    g
}

/// Eigenvalues (poles of `m`) inside `[lo, hi]` with the weights
/// `rho_j = -Res m`, located by sign scan and bisection.
pub fn eigenvalues(s: &StringCoefficients, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    window_check(s, lo, hi)?;
    let tc = TailWeylCoefficient::of(s);
    let grid = scan_grid(lo, hi, 512);
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &grid {
        let d = weyl_denominator(s, &tc, x)?;
        if d == 0.0 {
            if x != 0.0 {
                out.push((x, residue_at(s, &tc, x)?));
            }
            prev = None;
            continue;
        }
        if let Some((px, pd)) = prev {
            if (pd < 0.0) != (d < 0.0) {
                let root = bisect(|t| weyl_denominator(s, &tc, t), px, x)?;
                if root != 0.0 {
                    out.push((root, residue_at(s, &tc, root)?));
                }
            }
        }
        prev = Some((x, d));
    }
    out.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * (1.0 + a.0.abs()));
    Ok(out)
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fa < 0.0) != (fm < 0.0) {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
        if (b - a).abs() <= 1e-14 * (a.abs() + b.abs() + 1e-30) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// `rho_j = -Res_{lambda} m = -N(lambda) / (lambda D'(lambda))` with the
/// derivative by second-order Richardson differences.
fn residue_at(s: &StringCoefficients, tc: &TailWeylCoefficient, lambda: f64) -> Result<f64> {
    let h = 1e-6 * (1.0 + lambda.abs());
    let d = |t: f64| weyl_denominator(s, tc, t);
    let d1h = (d(lambda + h)? - d(lambda - h)?) / (2.0 * h);
    let d2h = (d(lambda + 2.0 * h)? - d(lambda - 2.0 * h)?) / (4.0 * h);
    let dp = (4.0 * d1h - d2h) / 3.0;
    let num = weyl_numerator(s, tc, lambda)?;
    // m = (z M theta - theta^[1]) / (z D), so Res m = N(lambda)/(lambda D')
    Ok(-num / (lambda * dp))
}

/// First and second `z`-derivatives of the fundamental system at `z = 0`,
/// in closed form from coefficient integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDerivatives {
    pub theta_dot: f64,
    pub theta_q_dot: f64,
    pub phi_dot: f64,
    pub phi_q_dot: f64,
    pub theta_ddot: f64,
    pub theta_q_ddot: f64,
    pub phi_q_ddot: f64,
}

/// Derivatives of `theta, phi` (and quasi-derivatives) with respect to `z`
/// at `z = 0`, evaluated at position `x`.
pub fn derivatives_at_zero(s: &StringCoefficients, x: f64) -> Result<ZeroDerivatives> {
    if !(x >= 0.0) || (s.length().is_finite() && x > s.length().upper()) {
        return Err(Error::Domain("evaluation point outside the string"));
    }
    let iw = s.int_w(x);
    let iw2 = s.int_w2(x);
    let ixw = s.int_xw(x);
    let ixw2 = s.int_xw2(x);
    let iiw = x * iw - ixw;
    let iiw2 = x * iw2 - ixw2;
    let ucdf = s.upsilon_cdf(x);
    let uxm = s.upsilon_first_moment(x);
    let iiu = x * ucdf - uxm;
    Ok(ZeroDerivatives {
        theta_dot: -iw,
        theta_q_dot: 0.0,
        phi_dot: iiw - ixw,
        phi_q_dot: iw,
        theta_ddot: iw * iw - 2.0 * iiw2 - 2.0 * iiu,
        theta_q_ddot: -2.0 * iw2 - 2.0 * ucdf,
        phi_q_ddot: iw * iw - 2.0 * ixw2 - 2.0 * uxm,
    })
}

/// `(m(0), m'(0))` for infinite strings, in closed form.
pub fn weyl_taylor(s: &StringCoefficients) -> Result<(f64, f64)> {
    let c = s.c_asymptote()?;
    let xc = s.attach_point();
    // int_0^xc (w - c)^2 piecewise, with the ramp folded in for alpha tails
    let mut m1 = 0.0;
    match s.tail() {
        Tail::ModelAlpha { alpha, .. } => {
            // w - c = (step - total_omega) - 1/(r u) with r = 2 sqrt(alpha)
            let r = 2.0 * alpha.sqrt();
            for (a, b, v) in s.step_pieces(xc) {
                let d = v - s.total_omega();
                m1 += d * d * (b - a);
                m1 -= 2.0 * d * crate::model::prim::int_um1(r, a, b) / r;
                m1 += crate::model::prim::int_um2(r, a, b) / (r * r);
            }
            m1 += 1.0 / (r * r * r * (1.0 + r * xc));
        }
        _ => {
            for (a, b, v) in s.step_pieces(xc) {
                let d = v - c;
                m1 += d * d * (b - a);
            }
        }
    }
    m1 += s.upsilon_total();
    Ok((c, m1))
}

/// Spectral measure of the string: eigenvalues below/inside the essential
/// spectrum plus the tabulated ac density on `[edge, lambda_max]`, sampled
/// with quadratic clustering at the band edges. `n` controls the table
/// resolution.
pub fn extract_spectral_measure(
    s: &StringCoefficients,
    lambda_min: f64,
    lambda_max: f64,
    n: usize,
) -> Result<SpectralMeasure> {
    if !(lambda_min < lambda_max) || n < 8 {
        return Err(Error::Invalid("bad extraction window"));
    }
    let mut ac = Vec::new();
    let mut atoms = Vec::new();
    match s.tail() {
        Tail::Constant(_) => {
            atoms = eigenvalues(s, lambda_min, lambda_max)?;
        }
        Tail::ModelAlpha { alpha, .. } => {
            let edge = alpha * (1.0 - 1e-8) - 1e-12;
            if lambda_min < edge {
                atoms = eigenvalues(s, lambda_min, edge)?;
            }
            if lambda_max > alpha {
                ac.push(sample_band(s, alpha, lambda_max, n, false)?);
            }
        }
        Tail::ModelBeta { beta } => {
            let lo = lambda_min.max(-beta * (1.0 - 1e-8));
            let hi = lambda_max.min(beta * (1.0 - 1e-8));
            if lo < hi {
                atoms = eigenvalues(s, lo, hi)?;
            }
            if lambda_max > beta {
                ac.push(sample_band(s, beta, lambda_max, n, false)?);
            }
            if lambda_min < -beta {
                ac.push(sample_band(s, beta, -lambda_min, n, true)?);
            }
        }
    }
    SpectralMeasure::new(atoms, ac)
}

/// Table of `pi^-1 Im m(lambda + i0)` over one band starting at `edge`
/// (mirrored to the negative axis when `reflect` is set).
fn sample_band(
    s: &StringCoefficients,
    edge: f64,
    lambda_max: f64,
    n: usize,
    reflect: bool,
) -> Result<AcPiece> {
    let xi_max = (lambda_max - edge).max(0.0).sqrt();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push((if reflect { -edge } else { edge }, 0.0));
    for j in 1..=n {
        let xi = xi_max * j as f64 / n as f64;
        let lam = edge + xi * xi;
        let signed = if reflect { -lam } else { lam };
        let m = weyl_boundary(s, signed)?;
        nodes.push((signed, m.im.max(0.0) / core::f64::consts::PI));
    }
    if reflect {
        nodes.reverse();
    }
    let (lo, hi) = (nodes[0].0, nodes[nodes.len() - 1].0);
    Ok(AcPiece {
        lo,
        hi,
        kind: AcDensity::Table { nodes },
        flow_time: 0.0,
    })
}
