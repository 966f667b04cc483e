//! Coefficient data for generalized indefinite strings.
//!
//! A string is a triple `(L, omega, upsilon)`. Both measures split into an
//! atomic part (stored explicitly) and an absolutely continuous part fixed by
//! the [`Tail`] descriptor, which selects one of the closed-form model
//! densities. This restriction is what makes every downstream computation
//! exact: transfer matrices multiply in closed form and every coefficient
//! integral has an antiderivative.
//!
//! The normalized anti-derivative `w(x) = omega([0, x))` is left-continuous
//! with `w(0) = 0`; an `omega` jump at `x = 0` therefore shows up in `w(0+)`
//! but not in `w(0)`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::err::{Error, Result};
use crate::quad;
use crate::Complex;

/// Relative tolerance for the redundant consistency checks performed by the
/// constructors (tail constant versus accumulated jumps).
const CONSISTENCY_TOL: f64 = 1e-9;

/// Length of the string; the coefficient measures live on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Length {
    Finite(f64),
    Infinite,
}

impl Length {
    pub fn is_finite(&self) -> bool {
        matches!(self, Length::Finite(_))
    }

    /// Upper endpoint as a float; `inf` for infinite strings.
    pub fn upper(&self) -> f64 {
        match self {
            Length::Finite(l) => *l,
            Length::Infinite => f64::INFINITY,
        }
    }
}

/// Point interaction at `x`: a jump of `w` by `omega` and a point mass
/// `upsilon >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub omega: f64,
    pub upsilon: f64,
}

impl Atom {
    pub fn new(x: f64, omega: f64, upsilon: f64) -> Self {
        Atom { x, omega, upsilon }
    }
}

/// Absolutely continuous parts of the coefficients.
///
/// The tail fixes the ac densities on all of `[0, L)`; the atomic parts are
/// stored separately in [`StringCoefficients`].
///
/// * `Constant(c)`: no ac parts. `w` is a pure jump function whose eventual
///   value must equal `c`.
/// * `ModelAlpha { alpha, c }`: `omega` has density `(1 + 2 sqrt(alpha) x)^-2`
///   so that beyond the last jump `w(x) = c + x / (1 + 2 sqrt(alpha) x)`;
///   `upsilon` has no ac part. Infinite length only.
/// * `ModelBeta { beta }`: `omega` has no ac part; `upsilon` has density
///   `(1 + 2 beta x)^-2`. Infinite length only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Constant(f64),
    ModelAlpha { alpha: f64, c: f64 },
    ModelBeta { beta: f64 },
}

/// `x / (1 + 2 sqrt(alpha) x)`: the model ramp carried by a `ModelAlpha` tail.
pub fn alpha_ramp(alpha: f64, x: f64) -> f64 {
    x / (1.0 + 2.0 * alpha.sqrt() * x)
}

/// Coefficients `(L, omega, upsilon)` of a generalized indefinite string.
///
/// Atoms are kept sorted by position; equal positions are merged at
/// construction by summing weights and atoms with both weights zero are
/// dropped. All `upsilon` weights are nonnegative. For `Constant` and
/// `ModelAlpha` tails the stored constant must agree with the total `omega`
/// jump sum, so the representation of a given string is unique.
#[derive(Debug, Clone, PartialEq)]
pub struct StringCoefficients {
    length: Length,
    atoms: Vec<Atom>,
    tail: Tail,
}

impl StringCoefficients {
    pub fn new(length: Length, atoms: Vec<Atom>, tail: Tail) -> Result<Self> {
        if let Length::Finite(l) = length {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Invalid("finite length must be positive"));
            }
        }
        match tail {
            Tail::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::Invalid("tail constant must be finite"));
                }
            }
            Tail::ModelAlpha { alpha, c } => {
                if !(alpha.is_finite() && alpha > 0.0 && c.is_finite()) {
                    return Err(Error::Invalid("ModelAlpha tail needs alpha > 0"));
                }
                if length.is_finite() {
                    return Err(Error::Invalid("ModelAlpha tail needs infinite length"));
                }
            }
            Tail::ModelBeta { beta } => {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(Error::Invalid("ModelBeta tail needs beta > 0"));
                }
                if length.is_finite() {
                    return Err(Error::Invalid("ModelBeta tail needs infinite length"));
                }
            }
        }
        let mut atoms = atoms;
        for a in &atoms {
            if !(a.x.is_finite() && a.omega.is_finite() && a.upsilon.is_finite()) {
                return Err(Error::Invalid("atom data must be finite"));
            }
            if a.x < 0.0 || a.x >= length.upper() {
                return Err(Error::Invalid("atom position outside [0, L)"));
            }
            if a.upsilon < 0.0 {
                return Err(Error::Invalid("upsilon weights must be nonnegative"));
            }
        }
        atoms.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite positions"));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(m) if m.x == a.x => {
                    m.omega += a.omega;
                    m.upsilon += a.upsilon;
                }
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.omega != 0.0 || a.upsilon != 0.0);
        let total: f64 = merged.iter().map(|a| a.omega).sum();
        let scale = 1.0 + merged.iter().map(|a| a.omega.abs()).sum::<f64>();
        let tail_c = match tail {
            Tail::Constant(c) => Some(c),
            Tail::ModelAlpha { c, .. } => Some(c),
            Tail::ModelBeta { .. } => None,
        };
        if let Some(c) = tail_c {
            if (c - total).abs() > CONSISTENCY_TOL * (scale + c.abs()) {
                return Err(Error::Invalid(
                    "tail constant must equal the sum of all omega jumps",
                ));
            }
        }
        Ok(StringCoefficients {
            length,
            atoms: merged,
            tail,
        })
    }

    /// Pure model string with `w(x) = c + x/(1 + 2 sqrt(alpha) x)` and
    /// `upsilon = 0`; the constant enters as an `omega` atom at the origin.
    pub fn model_alpha(alpha: f64, c: f64) -> Result<Self> {
        let atoms = if c != 0.0 {
            alloc::vec![Atom::new(0.0, c, 0.0)]
        } else {
            Vec::new()
        };
        StringCoefficients::new(Length::Infinite, atoms, Tail::ModelAlpha { alpha, c })
    }

    /// Pure model string with constant `w = c` (a single jump at the origin)
    /// and `d upsilon = (1 + 2 beta x)^-2 dx`.
    pub fn model_beta(beta: f64, c: f64) -> Result<Self> {
        let atoms = if c != 0.0 {
            alloc::vec![Atom::new(0.0, c, 0.0)]
        } else {
            Vec::new()
        };
        StringCoefficients::new(Length::Infinite, atoms, Tail::ModelBeta { beta })
    }

    pub fn length(&self) -> Length {
        self.length
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Sum of all `omega` jumps.
    pub fn total_omega(&self) -> f64 {
        self.atoms.iter().map(|a| a.omega).sum()
    }

    /// Position of the last atom (0 when there are none). Beyond this point
    /// the string coincides with its tail model and closed-form Weyl
    /// coefficients can be attached.
    pub fn attach_point(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.x)
    }

    /// Ac part of `w` at `x`.
    fn ac_w(&self, x: f64) -> f64 {
        match self.tail {
            Tail::ModelAlpha { alpha, .. } => alpha_ramp(alpha, x),
            _ => 0.0,
        }
    }

    /// Left-continuous `w(x) = omega([0, x))`.
    pub fn w(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for a in &self.atoms {
            if a.x < x {
                s += a.omega;
            } else {
                break;
            }
        }
        s + self.ac_w(x)
    }

    /// Left-continuous `upsilon([0, x))`.
    pub fn upsilon_cdf(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for a in &self.atoms {
            if a.x < x {
                s += a.upsilon;
            } else {
                break;
            }
        }
        if let Tail::ModelBeta { beta } = self.tail {
            if x > 0.0 {
                s += prim::int_um2(2.0 * beta, 0.0, x);
            }
        }
        s
    }

    /// Square root of the ac density of `upsilon`.
    pub fn varrho(&self, x: f64) -> f64 {
        match self.tail {
            Tail::ModelBeta { beta } => 1.0 / (1.0 + 2.0 * beta * x),
            _ => 0.0,
        }
    }

    /// `(w(x), upsilon([0, x)))` with a domain check.
    pub fn query_coefficients(&self, x: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0 && x < self.length.upper()) {
            return Err(Error::Domain("evaluation point outside [0, L)"));
        }
        Ok((self.w(x), self.upsilon_cdf(x)))
    }

    /// `lim_{x -> inf} w(x) - (ac ramp)`, i.e. the eventual constant of the
    /// jump part; equals the tail constant for `Constant` and `ModelAlpha`
    /// tails.
    pub fn eventual_step(&self) -> f64 {
        self.total_omega()
    }

    /// `lim_{x -> inf} x^{-1} int_0^x w`, read off the tail descriptor.
    pub fn c_asymptote(&self) -> Result<f64> {
        if self.length.is_finite() {
            return Err(Error::Domain("c_asymptote needs an infinite string"));
        }
        Ok(match self.tail {
            Tail::Constant(c) => c,
            Tail::ModelAlpha { alpha, c } => c + 0.5 / alpha.sqrt(),
            Tail::ModelBeta { .. } => self.total_omega(),
        })
    }

    /// Constant pieces `(a, b, value)` of the jump part of `w` covering
    /// `[0, hi)`; pieces with `a == b` are skipped.
    pub(crate) fn step_pieces(&self, hi: f64) -> Vec<(f64, f64, f64)> {
        let mut pieces = Vec::with_capacity(self.atoms.len() + 1);
        let mut prev = 0.0;
        let mut acc = 0.0;
        for a in &self.atoms {
            if a.omega == 0.0 {
                continue;
            }
            if a.x >= hi {
                break;
            }
            if a.x > prev {
                pieces.push((prev, a.x, acc));
            }
            acc += a.omega;
            prev = a.x;
        }
        if hi > prev {
            pieces.push((prev, hi, acc));
        }
        pieces
    }

    /// `int_0^x w` in closed form.
    pub fn int_w(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (a, b, v) in self.step_pieces(x) {
            s += v * (b - a);
        }
        if let Tail::ModelAlpha { alpha, .. } = self.tail {
            if x > 0.0 {
                s += prim::int_s_um1(2.0 * alpha.sqrt(), 0.0, x);
            }
        }
        s
    }

    /// `int_0^x w^2` in closed form.
    pub fn int_w2(&self, x: f64) -> f64 {
        let mut s = 0.0;
        match self.tail {
            Tail::ModelAlpha { alpha, .. } => {
                let r = 2.0 * alpha.sqrt();
                for (a, b, v) in self.step_pieces(x) {
                    s += v * v * (b - a) + 2.0 * v * prim::int_s_um1(r, a, b);
                    // int s^2 u^-2 = r^-2 int (1 - 2/u + 1/u^2)
                    s += ((b - a) - 2.0 * prim::int_um1(r, a, b) + prim::int_um2(r, a, b))
                        / (r * r);
                }
            }
            _ => {
                for (a, b, v) in self.step_pieces(x) {
                    s += v * v * (b - a);
                }
            }
        }
        s
    }

    /// `int_0^x s w(s) ds` in closed form.
    pub fn int_xw(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (a, b, v) in self.step_pieces(x) {
            s += v * 0.5 * (b * b - a * a);
        }
        if let Tail::ModelAlpha { alpha, .. } = self.tail {
            let r = 2.0 * alpha.sqrt();
            // int s^2 u^-1 = r^-2 int (u - 2 + 1/u)
            s += (prim::int_u(r, 0.0, x) - 2.0 * x + prim::int_um1(r, 0.0, x)) / (r * r);
        }
        s
    }

    /// `int_0^x s w(s)^2 ds` in closed form.
    pub fn int_xw2(&self, x: f64) -> f64 {
        let mut s = 0.0;
        match self.tail {
            Tail::ModelAlpha { alpha, .. } => {
                let r = 2.0 * alpha.sqrt();
                for (a, b, v) in self.step_pieces(x) {
                    s += v * v * 0.5 * (b * b - a * a);
                    // cross term: 2 v int s^2 u^-1
                    s += 2.0 * v
                        * (prim::int_u(r, a, b) - 2.0 * (b - a) + prim::int_um1(r, a, b))
                        / (r * r);
                    // int s^3 u^-2 = r^-3 int (u - 3 + 3/u - 1/u^2)
                    s += (prim::int_u(r, a, b) - 3.0 * (b - a) + 3.0 * prim::int_um1(r, a, b)
                        - prim::int_um2(r, a, b))
                        / (r * r * r);
                }
            }
            _ => {
                for (a, b, v) in self.step_pieces(x) {
                    s += v * v * 0.5 * (b * b - a * a);
                }
            }
        }
        s
    }

    /// `int_{[0,x)} s d upsilon(s)` in closed form.
    pub fn upsilon_first_moment(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for a in &self.atoms {
            if a.x < x {
                s += a.x * a.upsilon;
            } else {
                break;
            }
        }
        if let Tail::ModelBeta { beta } = self.tail {
            if x > 0.0 {
                let r = 2.0 * beta;
                s += (prim::int_um1(r, 0.0, x) - prim::int_um2(r, 0.0, x)) / r;
            }
        }
        s
    }

    /// Total mass `upsilon([0, L))`, possibly infinite-string exact.
    pub fn upsilon_total(&self) -> f64 {
        let mut s: f64 = self.atoms.iter().map(|a| a.upsilon).sum();
        if let Tail::ModelBeta { beta } = self.tail {
            s += 0.5 / beta;
        }
        s
    }

    /// Truncated value of the condition functional selected by `mode`.
    ///
    /// The cutoff truncates integrals and atom sums to `[0, cutoff)`; the
    /// remainder beyond the cutoff is returned exactly where the tail makes
    /// it available in closed form. Modes with no integral truncation
    /// (`BoundedInverse`, `DiscreteSum`) ignore the cutoff.
    pub fn condition_functional(
        &self,
        mode: ConditionMode,
        cutoff: f64,
    ) -> Result<ConditionEstimate> {
        if !(cutoff >= 0.0) {
            return Err(Error::Invalid("cutoff must be nonnegative"));
        }
        match mode {
            ConditionMode::HsAlpha { alpha, c } => {
                let (t_alpha, t_c) = match self.tail {
                    Tail::ModelAlpha { alpha, c } => (alpha, c),
                    _ => {
                        return Err(Error::Invalid(
                            "HS-alpha functional needs a ModelAlpha tail",
                        ))
                    }
                };
                if (alpha - t_alpha).abs() > 1e-12 * t_alpha.max(1.0) {
                    return Err(Error::Invalid("HS-alpha parameter must match the tail"));
                }
                let c_eff = c.unwrap_or(t_c);
                if (c_eff - t_c).abs() > 1e-12 * (1.0 + t_c.abs()) {
                    return Err(Error::Invalid(
                        "the functional diverges for this constant; use the tail constant",
                    ));
                }
                // After subtracting the ramp, w - c reduces to the jump part
                // minus c: piecewise constant, vanishing beyond the last atom.
                Ok(self.square_class_estimate(c_eff, cutoff))
            }
            ConditionMode::HsBeta { beta, c } => {
                let t_beta = match self.tail {
                    Tail::ModelBeta { beta } => beta,
                    _ => {
                        return Err(Error::Invalid(
                            "HS-beta functional needs a ModelBeta tail",
                        ))
                    }
                };
                if (beta - t_beta).abs() > 1e-12 * t_beta.max(1.0) {
                    return Err(Error::Invalid("HS-beta parameter must match the tail"));
                }
                let c_eff = c.unwrap_or_else(|| self.total_omega());
                if (c_eff - self.total_omega()).abs() > 1e-12 * (1.0 + c_eff.abs()) {
                    return Err(Error::Invalid(
                        "the functional diverges for this constant; use the eventual w value",
                    ));
                }
                // varrho matches the model profile exactly, so only the jump
                // part of w and the singular (atomic) part of upsilon count.
                Ok(self.square_class_estimate(c_eff, cutoff))
            }
            ConditionMode::BoundedInverse => {
                if self.length.is_finite() {
                    return Err(Error::Domain(
                        "the inverse-boundedness functional needs an infinite string",
                    ));
                }
                let value = match self.tail {
                    Tail::Constant(_) => 0.0,
                    Tail::ModelAlpha { alpha, .. } => 1.0 / (16.0 * alpha * alpha),
                    Tail::ModelBeta { beta } => 1.0 / (4.0 * beta * beta),
                };
                Ok(ConditionEstimate {
                    value,
                    tail_bound: Some(0.0),
                })
            }
            ConditionMode::DiscreteSum { alpha, c, terms } => {
                if !matches!(self.tail, Tail::Constant(_)) {
                    return Err(Error::Invalid(
                        "the discrete class sum needs a purely atomic string",
                    ));
                }
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::Invalid("discrete class sum needs alpha > 0"));
                }
                let c_eff = c.unwrap_or_else(|| -self.total_omega());
                let mut value = 0.0;
                let mut acc = c_eff;
                let mut prev = 0.0;
                let mut n = 0usize;
                for a in &self.atoms {
                    if a.x == 0.0 {
                        acc += a.omega;
                        continue;
                    }
                    n += 1;
                    if n > terms {
                        break;
                    }
                    let ell = a.x - prev;
                    let q = ell / a.x;
                    let lin = a.x * acc + 0.25 / alpha;
                    value += q * q * q + q * lin * lin + a.x * a.upsilon;
                    acc += a.omega;
                    prev = a.x;
                }
                Ok(ConditionEstimate {
                    value,
                    tail_bound: None,
                })
            }
        }
    }

    /// `int (step(w) - c)^2 x dx + sum_{x_k < cutoff} x_k upsilon_k` with the
    /// exact remainder beyond the cutoff. Shared by the two HS modes.
    fn square_class_estimate(&self, c: f64, cutoff: f64) -> ConditionEstimate {
        let last = self.attach_point();
        let mut value = 0.0;
        let mut rest = 0.0;
        for (a, b, v) in self.step_pieces(last) {
            let d = v - c;
            let full = d * d * 0.5 * (b * b - a * a);
            if b <= cutoff {
                value += full;
            } else if a >= cutoff {
                rest += full;
            } else {
                value += d * d * 0.5 * (cutoff * cutoff - a * a);
                rest += d * d * 0.5 * (b * b - cutoff * cutoff);
            }
        }
        for atom in &self.atoms {
            let term = atom.x * atom.upsilon;
            if atom.x < cutoff {
                value += term;
            } else {
                rest += term;
            }
        }
        ConditionEstimate {
            value,
            tail_bound: Some(rest),
        }
    }
}

/// Square-integrability class tested by
/// [`StringCoefficients::condition_functional`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionMode {
    /// `int (w(x) - c - x/(1+2 sqrt(alpha) x))^2 x dx + int x d upsilon`.
    /// Finite only against a matching `ModelAlpha` tail. `c` defaults to the
    /// tail constant (any other value makes the integral diverge).
    HsAlpha { alpha: f64, c: Option<f64> },
    /// `int (w - c)^2 x dx + int (varrho - 1/(1+2 beta x))^2 x dx +
    /// int x d upsilon_s` where `upsilon = varrho^2 dx + upsilon_s`.
    /// Finite only against a matching `ModelBeta` tail; `c` defaults to the
    /// eventual value of `w`.
    HsBeta { beta: f64, c: Option<f64> },
    /// `limsup_x x (int_x^inf (w - c)^2 ds + upsilon([x, inf)))` with
    /// `c` the growth coefficient of `int w`; evaluated exactly from the
    /// tail descriptor.
    BoundedInverse,
    /// For purely atomic strings with atoms at `0 <= x_0 < x_1 < ...`:
    /// partial sum over `n = 1..=terms` of
    /// `(l_n/x_n)^3 + (l_n/x_n)(x_n(c + sum_{k<n} omega_k) + 1/(4 alpha))^2
    ///  + x_n upsilon_n`, `l_n = x_n - x_{n-1}`. `c` defaults to minus the
    /// total `omega` sum.
    DiscreteSum {
        alpha: f64,
        c: Option<f64>,
        terms: usize,
    },
}

/// Truncated functional value and the exact remainder beyond the cutoff
/// (`None` when no closed form for the remainder exists).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub tail_bound: Option<f64>,
}

/// Closed-form primitives for `u = 1 + r s`, `r > 0`. All integrals run over
/// `[a, b]` with `0 <= a <= b`.
pub(crate) mod prim {
    use num_traits::Float;

    /// `int u ds`.
    pub fn int_u(r: f64, a: f64, b: f64) -> f64 {
        (b - a) + 0.5 * r * (b * b - a * a)
    }

    /// `int u^-1 ds`.
    pub fn int_um1(r: f64, a: f64, b: f64) -> f64 {
        (r * (b - a) / (1.0 + r * a)).ln_1p() / r
    }

    /// `int u^-2 ds`.
    pub fn int_um2(r: f64, a: f64, b: f64) -> f64 {
        (b - a) / ((1.0 + r * a) * (1.0 + r * b))
    }

    /// `int s u^-1 ds`.
    pub fn int_s_um1(r: f64, a: f64, b: f64) -> f64 {
        ((b - a) - int_um1(r, a, b)) / r
    }
}

/// Spectral measure: atoms plus named ac components.
///
/// Atoms never sit at the origin. The ac density on a piece is the named
/// closed form times the flow weight `exp(-t/(2 lambda))` with `t` the
/// piece's `flow_time` (zero for static measures).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    ac: Vec<AcPiece>,
}

/// One ac component supported on `[lo, hi]` (`hi` may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct AcPiece {
    pub lo: f64,
    pub hi: f64,
    pub kind: AcDensity,
    pub flow_time: f64,
}

/// Named closed-form ac densities.
#[derive(Debug, Clone, PartialEq)]
pub enum AcDensity {
    /// `sqrt(lambda - alpha) / (pi lambda)` on `[alpha, inf)`.
    ModelAlpha { alpha: f64 },
    /// `sqrt(lambda^2 - beta^2) / (pi |lambda|)` on `|lambda| >= beta`.
    ModelBeta { beta: f64 },
    /// `exp(-(lambda - alpha))` on `[alpha, inf)`.
    ShiftedExponential { alpha: f64 },
    /// Piecewise-linear interpolation of `(lambda, density)` nodes.
    Table { nodes: Vec<(f64, f64)> },
}

impl AcDensity {
    /// Pointwise density value (without any flow weight).
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            AcDensity::ModelAlpha { alpha } => {
                if lambda >= *alpha {
                    (lambda - alpha).sqrt() / (core::f64::consts::PI * lambda)
                } else {
                    0.0
                }
            }
            AcDensity::ModelBeta { beta } => {
                let a = lambda.abs();
                if a >= *beta {
                    (lambda * lambda - beta * beta).sqrt() / (core::f64::consts::PI * a)
                } else {
                    0.0
                }
            }
            AcDensity::ShiftedExponential { alpha } => {
                if lambda >= *alpha {
                    (-(lambda - alpha)).exp()
                } else {
                    0.0
                }
            }
            AcDensity::Table { nodes } => {
                if nodes.is_empty() {
                    return 0.0;
                }
                let first = nodes[0];
                let last = nodes[nodes.len() - 1];
                if lambda < first.0 || lambda > last.0 {
                    return 0.0;
                }
                match nodes.binary_search_by(|n| n.0.partial_cmp(&lambda).expect("finite")) {
                    Ok(i) => nodes[i].1,
                    Err(i) => {
                        let (x0, y0) = nodes[i - 1];
                        let (x1, y1) = nodes[i];
                        y0 + (y1 - y0) * (lambda - x0) / (x1 - x0)
                    }
                }
            }
        }
    }
}

impl AcPiece {
    /// Density including the flow weight, zero outside `[lo, hi]`.
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda < self.lo || lambda > self.hi {
            return 0.0;
        }
        let base = self.kind.eval(lambda);
        if self.flow_time == 0.0 || base == 0.0 {
            base
        } else {
            base * (-self.flow_time / (2.0 * lambda)).exp()
        }
    }
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, ac: Vec<AcPiece>) -> Result<Self> {
        let mut atoms = atoms;
        for &(l, w) in &atoms {
            if !(l.is_finite() && w.is_finite()) {
                return Err(Error::Invalid("measure data must be finite"));
            }
            if l == 0.0 {
                return Err(Error::Invalid("spectral measures have no mass at zero"));
            }
            if w <= 0.0 {
                return Err(Error::Invalid("atom weights must be positive"));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite positions"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(m) if m.0 == a.0 => m.1 += a.1,
                _ => merged.push(a),
            }
        }
        for p in &ac {
            if !(p.lo.is_finite() && p.lo < p.hi && p.flow_time.is_finite()) {
                return Err(Error::Invalid("ac support must be a nonempty interval"));
            }
            if let AcDensity::Table { nodes } = &p.kind {
                if nodes.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::Invalid("table nodes must be strictly increasing"));
                }
                if nodes.iter().any(|n| !(n.0.is_finite() && n.1 >= 0.0)) {
                    return Err(Error::Invalid("table densities must be nonnegative"));
                }
            }
        }
        Ok(SpectralMeasure { atoms: merged, ac })
    }

    /// Purely atomic measure.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        SpectralMeasure::new(atoms, Vec::new())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn ac_pieces(&self) -> &[AcPiece] {
        &self.ac
    }

    /// Total ac density at `lambda`.
    pub fn density(&self, lambda: f64) -> f64 {
        self.ac.iter().map(|p| p.density(lambda)).sum()
    }

    /// `int d rho / (1 + lambda^2)` as (truncated value, tail bound). The
    /// truncation point for unbounded pieces is `lo + span`; the bound uses
    /// the closed-form majorant of each named density.
    pub fn poisson_norm(&self, span: f64) -> Result<(f64, f64)> {
        let mut value: f64 = self
            .atoms
            .iter()
            .map(|&(l, w)| w / (1.0 + l * l))
            .sum();
        let mut bound = 0.0;
        for p in &self.ac {
            let hi = if p.hi.is_finite() { p.hi } else { p.lo + span };
            let q = quad::adaptive(
                |l| p.density(l) / (1.0 + l * l),
                p.lo.min(hi),
                hi.max(p.lo),
                1e-10,
                1e-13,
            )?;
            value += q.value;
            if !p.hi.is_finite() {
                // flow weight tends to 1 at +inf and is bounded there
                bound += match &p.kind {
                    // density <= lambda^-1/2, so the rest is <= (2/3) hi^-3/2 / pi
                    AcDensity::ModelAlpha { .. } => {
                        2.0 / (3.0 * core::f64::consts::PI) * hi.powf(-1.5)
                    }
                    // density <= 1/pi
                    AcDensity::ModelBeta { .. } => {
                        (core::f64::consts::FRAC_PI_2 - hi.atan()) / core::f64::consts::PI
                    }
                    AcDensity::ShiftedExponential { alpha } => {
                        (-(hi - alpha)).exp() / (1.0 + hi * hi)
                    }
                    AcDensity::Table { .. } => 0.0,
                };
            }
        }
        Ok((value, bound))
    }

    /// All mass strictly below `lambda0` (atoms only; ac pieces must not
    /// intersect).
    pub fn atoms_below(&self, lambda0: f64) -> impl Iterator<Item = &(f64, f64)> {
        self.atoms.iter().filter(move |a| a.0 < lambda0)
    }
}

/// Integral representation of a Herglotz function
/// `m(z) = c1 z + c2 - 1/(L z) + int (1/(lambda - z) - lambda/(1+lambda^2)) d rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzRepresentation {
    pub c1: f64,
    pub c2: f64,
    pub length: Length,
    pub rho: SpectralMeasure,
}

impl HerglotzRepresentation {
    /// Evaluate the representation off the real axis (or at a real point
    /// away from the support).
    pub fn eval(&self, z: Complex) -> Result<Complex> {
        if z == Complex::new(0.0, 0.0) && self.length.is_finite() {
            return Err(Error::Domain("representation pole at zero"));
        }
        let mut m = Complex::new(self.c1, 0.0) * z + Complex::new(self.c2, 0.0);
        if let Length::Finite(l) = self.length {
            m -= (z * l).inv();
        }
        for &(l, w) in self.rho.atoms() {
            let d = Complex::new(l, 0.0) - z;
            if d.norm() == 0.0 {
                return Err(Error::Domain("evaluation at an atom of rho"));
            }
            m += w * (d.inv() - Complex::new(l / (1.0 + l * l), 0.0));
        }
        for p in self.rho.ac_pieces() {
            let f = |lambda: f64| {
                let d = Complex::new(lambda, 0.0) - z;
                p.density(lambda) * (d.inv() - Complex::new(lambda / (1.0 + lambda * lambda), 0.0))
            };
            let q = if p.hi.is_finite() {
                quad::adaptive_complex(f, p.lo, p.hi, 1e-10, 1e-13)?
            } else {
                quad::adaptive_complex_to_inf(f, p.lo, 1e-10, 1e-13)?
            };
            m += q.value;
        }
        Ok(m)
    }
}

/// One cell of a Hamiltonian on a grid interval of length `len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HCell {
    pub len: f64,
    pub kind: CellKind,
}

/// Matrix profile of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellKind {
    /// Constant symmetric nonnegative matrix.
    Const { h11: f64, h12: f64, h22: f64 },
    /// `h(s) = diag(scale^-2 e^{2 q s}, scale^2 e^{-2 q s})`, `s` relative to
    /// the cell start. Arises from Dirac reductions; determinant is one.
    ExpDiag { q: f64, scale: f64 },
}

impl CellKind {
    /// Matrix entries at relative position `s` inside the cell.
    pub fn at(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            CellKind::Const { h11, h12, h22 } => (h11, h12, h22),
            CellKind::ExpDiag { q, scale } => {
                let e = (q * s).exp();
                let a = e / scale;
                let b = scale / e;
                (a * a, 0.0, b * b)
            }
        }
    }
}

/// Tail of a Hamiltonian past its last explicit cell.
#[derive(Debug, Clone, PartialEq)]
pub enum HTail {
    /// Constant cell repeated to infinity.
    Const { h11: f64, h12: f64, h22: f64 },
    /// Image of a string tail: the remaining string beyond position `x`
    /// (where `w(x+) = w`) under the string-to-canonical change of
    /// variables.
    String { tail: Tail, x: f64, w: f64 },
    /// Constant-coefficient Dirac half line with potential `q` entering
    /// through `diag(scale^-2 e^{2qs}, scale^2 e^{-2qs})`.
    Dirac { q: f64, scale: f64 },
}

/// Canonical system `J f' = z h f` given by cells plus a tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    cells: Vec<HCell>,
    tail: HTail,
}

impl Hamiltonian {
    pub fn new(cells: Vec<HCell>, tail: HTail) -> Result<Self> {
        for c in &cells {
            if !(c.len.is_finite() && c.len > 0.0) {
                return Err(Error::Invalid("cell lengths must be positive"));
            }
            match c.kind {
                CellKind::Const { h11, h12, h22 } => {
                    validate_psd(h11, h12, h22)?;
                }
                CellKind::ExpDiag { q, scale } => {
                    if !(q.is_finite() && scale.is_finite() && scale > 0.0) {
                        return Err(Error::Invalid("ExpDiag cell needs finite q, scale > 0"));
                    }
                }
            }
        }
        match &tail {
            HTail::Const { h11, h12, h22 } => {
                validate_psd(*h11, *h12, *h22)?;
            }
            HTail::String { tail, x, w } => {
                if !(x.is_finite() && *x >= 0.0 && w.is_finite()) {
                    return Err(Error::Invalid("string tail needs finite attach data"));
                }
                match tail {
                    Tail::Constant(c) if !c.is_finite() => {
                        return Err(Error::Invalid("tail constant must be finite"))
                    }
                    Tail::ModelAlpha { alpha, .. } if !(*alpha > 0.0) => {
                        return Err(Error::Invalid("ModelAlpha tail needs alpha > 0"))
                    }
                    Tail::ModelBeta { beta } if !(*beta > 0.0) => {
                        return Err(Error::Invalid("ModelBeta tail needs beta > 0"))
                    }
                    _ => {}
                }
            }
            HTail::Dirac { q, scale } => {
                if !(q.is_finite() && scale.is_finite() && *scale > 0.0) {
                    return Err(Error::Invalid("Dirac tail needs finite q, scale > 0"));
                }
            }
        }
        Ok(Hamiltonian { cells, tail })
    }

    pub fn cells(&self) -> &[HCell] {
        &self.cells
    }

    pub fn tail(&self) -> &HTail {
        &self.tail
    }

    /// True when every explicit cell and a constant tail have unit trace.
    pub fn is_trace_normalized(&self) -> bool {
        let cell_ok = self.cells.iter().all(|c| match c.kind {
            CellKind::Const { h11, h22, .. } => (h11 + h22 - 1.0).abs() <= 1e-12,
            CellKind::ExpDiag { q, .. } => q == 0.0,
        });
        let tail_ok = match &self.tail {
            HTail::Const { h11, h22, .. } => (h11 + h22 - 1.0).abs() <= 1e-12,
            _ => false,
        };
        cell_ok && tail_ok
    }
}

fn validate_psd(h11: f64, h12: f64, h22: f64) -> Result<()> {
    if !(h11.is_finite() && h12.is_finite() && h22.is_finite()) {
        return Err(Error::Invalid("cell matrices must be finite"));
    }
    let tr = h11 + h22;
    let det = h11 * h22 - h12 * h12;
    let scale = h11.abs().max(h22.abs()).max(h12.abs()).max(1.0);
    if h11 < -1e-14 * scale || h22 < -1e-14 * scale || det < -1e-12 * scale * scale {
        return Err(Error::Invalid("cell matrices must be nonnegative"));
    }
    if !(tr > 0.0) {
        return Err(Error::Invalid("cell matrices must have positive trace"));
    }
    Ok(())
}

/// Conservative multi-peakon profile: `u(x) = 1/2 sum p_n e^{-|x - x_n|}`
/// plus singular masses `upsilon_n >= 0` at the peaks, in the phase space
/// with asymptote parameter `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakonState {
    pub positions: Vec<f64>,
    pub heights: Vec<f64>,
    pub upsilons: Vec<f64>,
    pub kappa: f64,
}

impl PeakonState {
    pub fn new(
        positions: Vec<f64>,
        heights: Vec<f64>,
        upsilons: Vec<f64>,
        kappa: f64,
    ) -> Result<Self> {
        if positions.len() != heights.len() || positions.len() != upsilons.len() {
            return Err(Error::Invalid("peakon fields must have equal length"));
        }
        if positions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("peakon positions must be strictly increasing"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("peakon positions must be finite"));
        }
        if heights.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("peakon heights must be finite"));
        }
        if upsilons.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("peakon masses must be nonnegative"));
        }
        if heights
            .iter()
            .zip(&upsilons)
            .any(|(p, v)| *p == 0.0 && *v == 0.0)
        {
            return Err(Error::Invalid("every peak needs a height or a mass"));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Invalid("kappa must be positive"));
        }
        Ok(PeakonState {
            positions,
            heights,
            upsilons,
            kappa,
        })
    }

    /// Profile value `u(x)`.
    pub fn u(&self, x: f64) -> f64 {
        0.5 * self
            .positions
            .iter()
            .zip(&self.heights)
            .map(|(xn, p)| p * (-(x - xn).abs()).exp())
            .sum::<f64>()
    }

    /// One-sided derivative `u'(x+)`.
    pub fn u_prime(&self, x: f64) -> f64 {
        0.5 * self
            .positions
            .iter()
            .zip(&self.heights)
            .map(|(xn, p)| {
                let s = if x < *xn { 1.0 } else { -1.0 };
                s * p * (-(x - xn).abs()).exp()
            })
            .sum::<f64>()
    }
}
