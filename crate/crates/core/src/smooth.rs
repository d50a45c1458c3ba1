//! Closed-form scalar functions of one variable with exact derivative jets.
//!
//! A [`SmoothFn`] is an expression tree over constants, affine maps and the
//! usual transcendental library, together with an explicit open interval on
//! which evaluation is allowed.  Evaluation produces an exact [`Jet4`];
//! singular points (a log of a non-positive argument, a pole of `coth`)
//! raise errors instead of propagating non-finite values, so verification
//! runs fail loudly.

use crate::jet::Jet4;
use crate::scalar::Real;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothError {
    #[error("point {s} is outside the evaluation domain ({lo}, {hi})")]
    DomainError { s: f64, lo: f64, hi: f64 },
    #[error("singular argument at s = {s}: {what}")]
    Singular { s: f64, what: &'static str },
    #[error("division by zero at s = {s}")]
    DivisionByZero { s: f64 },
    #[error("non-finite jet entry at s = {s}")]
    NonFinite { s: f64 },
}

/// Open interval, possibly unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Real> Interval<S> {
    pub fn new(lo: S, hi: S) -> Self {
        Interval { lo, hi }
    }

    pub fn all() -> Self {
        Interval {
            lo: S::neg_infinity(),
            hi: S::infinity(),
        }
    }

    pub fn contains(&self, s: S) -> bool {
        s > self.lo && s < self.hi
    }

    pub fn intersect(&self, o: &Interval<S>) -> Interval<S> {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn width(&self) -> S {
        self.hi - self.lo
    }
}

#[derive(Debug)]
enum Unary<S> {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Coth,
    Exp,
    Log,
    Pow(S),
}

#[derive(Debug)]
enum Expr<S> {
    Const(S),
    Affine { a: S, b: S },
    Unary(Unary<S>, Arc<Expr<S>>),
    Sum(Arc<Expr<S>>, Arc<Expr<S>>),
    Product(Arc<Expr<S>>, Arc<Expr<S>>),
    Quotient(Arc<Expr<S>>, Arc<Expr<S>>),
    Compose(Arc<Expr<S>>, Arc<Expr<S>>),
    Hermite(HermiteSpline<S>),
}

/// C^1 piecewise-cubic interpolant matching values and first derivatives
/// at strictly increasing knots.  Used to turn sampled trajectories back
/// into warp factors and potentials.
#[derive(Clone, Debug)]
pub struct HermiteSpline<S> {
    pub knots: Vec<S>,
    pub values: Vec<S>,
    pub derivs: Vec<S>,
}

impl<S: Real> HermiteSpline<S> {
    pub fn new(knots: Vec<S>, values: Vec<S>, derivs: Vec<S>) -> Self {
        assert!(knots.len() >= 2, "spline needs at least two knots");
        assert_eq!(knots.len(), values.len());
        assert_eq!(knots.len(), derivs.len());
        assert!(
            knots.windows(2).all(|w| w[0] < w[1]),
            "spline knots must increase strictly"
        );
        HermiteSpline {
            knots,
            values,
            derivs,
        }
    }

    fn segment(&self, s: S) -> usize {
        // rightmost segment whose left knot is <= s
        let mut lo = 0usize;
        let mut hi = self.knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn eval(&self, s: S) -> Jet4<S> {
        let i = self.segment(s);
        let (s0, s1) = (self.knots[i], self.knots[i + 1]);
        let dt = s1 - s0;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        // cubic p(t) = v0 + m0 t + c2 t^2 + c3 t^3 on t in [0, dt]
        let c2 = (S::of(3.0) * (v1 - v0) / dt - S::of(2.0) * m0 - m1) / dt;
        let c3 = (S::of(-2.0) * (v1 - v0) / dt + m0 + m1) / (dt * dt);
        let t = s - s0;
        let v = v0 + t * (m0 + t * (c2 + t * c3));
        let d1 = m0 + t * (S::of(2.0) * c2 + S::of(3.0) * c3 * t);
        let d2 = S::of(2.0) * c2 + S::of(6.0) * c3 * t;
        let d3 = S::of(6.0) * c3;
        Jet4::new(v, d1, d2, d3, S::zero())
    }

    fn span(&self) -> Interval<S> {
        Interval::new(self.knots[0], *self.knots.last().unwrap())
    }
}

/// A scalar function of the warped coordinate with exact derivatives.
#[derive(Clone, Debug)]
pub struct SmoothFn<S> {
    expr: Arc<Expr<S>>,
    domain: Interval<S>,
}

impl<S: Real> SmoothFn<S> {
    fn from_expr(expr: Expr<S>, domain: Interval<S>) -> Self {
        SmoothFn {
            expr: Arc::new(expr),
            domain,
        }
    }

    pub fn constant(c: S) -> Self {
        Self::from_expr(Expr::Const(c), Interval::all())
    }

    /// `s ↦ a·s + b`
    pub fn affine(a: S, b: S) -> Self {
        Self::from_expr(Expr::Affine { a, b }, Interval::all())
    }

    pub fn identity() -> Self {
        Self::affine(S::one(), S::zero())
    }

    /// `s ↦ a·s`
    pub fn linear(a: S) -> Self {
        Self::affine(a, S::zero())
    }

    pub fn hermite(spline: HermiteSpline<S>) -> Self {
        let span = spline.span();
        Self::from_expr(Expr::Hermite(spline), span)
    }

    pub fn domain(&self) -> Interval<S> {
        self.domain
    }

    /// Restrict (intersect) the evaluation domain.
    pub fn with_domain(mut self, lo: S, hi: S) -> Self {
        self.domain = self.domain.intersect(&Interval::new(lo, hi));
        self
    }

    fn unary(self, u: Unary<S>) -> Self {
        let domain = self.domain;
        Self::from_expr(Expr::Unary(u, self.expr), domain)
    }

    pub fn sin(self) -> Self {
        self.unary(Unary::Sin)
    }
    pub fn cos(self) -> Self {
        self.unary(Unary::Cos)
    }
    pub fn sinh(self) -> Self {
        self.unary(Unary::Sinh)
    }
    pub fn cosh(self) -> Self {
        self.unary(Unary::Cosh)
    }
    pub fn tanh(self) -> Self {
        self.unary(Unary::Tanh)
    }
    pub fn coth(self) -> Self {
        self.unary(Unary::Coth)
    }
    pub fn exp(self) -> Self {
        self.unary(Unary::Exp)
    }
    pub fn log(self) -> Self {
        self.unary(Unary::Log)
    }
    /// `s ↦ f(s)^p` for real `p` (integer `p` also allowed on negative bases).
    pub fn powf(self, p: S) -> Self {
        self.unary(Unary::Pow(p))
    }
    pub fn scale(self, c: S) -> Self {
        SmoothFn::constant(c) * self
    }

    /// Composition `self ∘ inner`.
    pub fn compose(self, inner: SmoothFn<S>) -> Self {
        let domain = inner.domain;
        Self::from_expr(Expr::Compose(self.expr, inner.expr), domain)
    }

    /// Exact jet `(f, f', f'', f''', f'''')` at an interior point.
    pub fn eval_jet(&self, s: S) -> Result<Jet4<S>, SmoothError> {
        if !self.domain.contains(s) {
            return Err(SmoothError::DomainError {
                s: s.as_f64(),
                lo: self.domain.lo.as_f64(),
                hi: self.domain.hi.as_f64(),
            });
        }
        let jet = eval_expr(&self.expr, s)?;
        if !jet.is_finite() {
            return Err(SmoothError::NonFinite { s: s.as_f64() });
        }
        Ok(jet)
    }

    /// Value channel only.
    pub fn value(&self, s: S) -> Result<S, SmoothError> {
        self.eval_jet(s).map(|j| j.v)
    }
}

impl<S: Real> Add for SmoothFn<S> {
    type Output = SmoothFn<S>;
    fn add(self, o: Self) -> Self {
        let domain = self.domain.intersect(&o.domain);
        SmoothFn::from_expr(Expr::Sum(self.expr, o.expr), domain)
    }
}

impl<S: Real> Sub for SmoothFn<S> {
    type Output = SmoothFn<S>;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<S: Real> Neg for SmoothFn<S> {
    type Output = SmoothFn<S>;
    fn neg(self) -> Self {
        self.scale(-S::one())
    }
}

impl<S: Real> Mul for SmoothFn<S> {
    type Output = SmoothFn<S>;
    fn mul(self, o: Self) -> Self {
        let domain = self.domain.intersect(&o.domain);
        SmoothFn::from_expr(Expr::Product(self.expr, o.expr), domain)
    }
}

impl<S: Real> Div for SmoothFn<S> {
    type Output = SmoothFn<S>;
    fn div(self, o: Self) -> Self {
        let domain = self.domain.intersect(&o.domain);
        SmoothFn::from_expr(Expr::Quotient(self.expr, o.expr), domain)
    }
}

fn eval_expr<S: Real>(expr: &Expr<S>, s: S) -> Result<Jet4<S>, SmoothError> {
    match expr {
        Expr::Const(c) => Ok(Jet4::constant(*c)),
        Expr::Affine { a, b } => {
            let z = S::zero();
            Ok(Jet4::new(*a * s + *b, *a, z, z, z))
        }
        Expr::Unary(u, inner) => {
            let g = eval_expr(inner, s)?;
            let table = unary_table(u, g.v, s)?;
            Ok(g.compose(table))
        }
        Expr::Sum(l, r) => Ok(eval_expr(l, s)? + eval_expr(r, s)?),
        Expr::Product(l, r) => Ok(eval_expr(l, s)? * eval_expr(r, s)?),
        Expr::Quotient(l, r) => {
            let num = eval_expr(l, s)?;
            let den = eval_expr(r, s)?;
            if den.v == S::zero() {
                return Err(SmoothError::DivisionByZero { s: s.as_f64() });
            }
            Ok(num / den)
        }
        Expr::Compose(outer, inner) => {
            let g = eval_expr(inner, s)?;
            let f = eval_expr(outer, g.v)?;
            Ok(g.compose([f.v, f.d1, f.d2, f.d3, f.d4]))
        }
        Expr::Hermite(spline) => {
            let span = spline.span();
            if !span.contains(s) {
                return Err(SmoothError::DomainError {
                    s: s.as_f64(),
                    lo: span.lo.as_f64(),
                    hi: span.hi.as_f64(),
                });
            }
            Ok(spline.eval(s))
        }
    }
}

/// Derivative table `(u, u', u'', u''', u'''')` of a library function at `x`.
fn unary_table<S: Real>(u: &Unary<S>, x: S, s: S) -> Result<[S; 5], SmoothError> {
    let c2 = S::of(2.0);
    let c6 = S::of(6.0);
    Ok(match u {
        Unary::Sin => {
            let (sn, cs) = (x.sin(), x.cos());
            [sn, cs, -sn, -cs, sn]
        }
        Unary::Cos => {
            let (sn, cs) = (x.sin(), x.cos());
            [cs, -sn, -cs, sn, cs]
        }
        Unary::Sinh => {
            let (sh, ch) = (x.sinh(), x.cosh());
            [sh, ch, sh, ch, sh]
        }
        Unary::Cosh => {
            let (sh, ch) = (x.sinh(), x.cosh());
            [ch, sh, ch, sh, ch]
        }
        Unary::Tanh => {
            let t = x.tanh();
            tanh_like_table(t)
        }
        Unary::Coth => {
            if x.sinh() == S::zero() {
                return Err(SmoothError::Singular {
                    s: s.as_f64(),
                    what: "coth pole",
                });
            }
            let t = x.cosh() / x.sinh();
            // coth satisfies y' = 1 - y^2, the same recursion as tanh
            tanh_like_table(t)
        }
        Unary::Exp => {
            let e = x.exp();
            [e, e, e, e, e]
        }
        Unary::Log => {
            if x <= S::zero() {
                return Err(SmoothError::Singular {
                    s: s.as_f64(),
                    what: "log of non-positive argument",
                });
            }
            let i = x.recip();
            let i2 = i * i;
            [x.ln(), i, -i2, c2 * i2 * i, -c6 * i2 * i2]
        }
        Unary::Pow(p) => {
            let p = *p;
            if x == S::zero() {
                return Err(SmoothError::Singular {
                    s: s.as_f64(),
                    what: "power of zero base",
                });
            }
            let integral = p == p.round();
            if x < S::zero() && !integral {
                return Err(SmoothError::Singular {
                    s: s.as_f64(),
                    what: "fractional power of negative base",
                });
            }
            let pw = |q: S| -> S {
                if integral {
                    x.powi(q.round().as_f64() as i32)
                } else {
                    x.powf(q)
                }
            };
            let one = S::one();
            let u0 = pw(p);
            let u1 = p * pw(p - one);
            let u2 = p * (p - one) * pw(p - c2);
            let u3 = p * (p - one) * (p - c2) * pw(p - S::of(3.0));
            let u4 = p * (p - one) * (p - c2) * (p - S::of(3.0)) * pw(p - S::of(4.0));
            [u0, u1, u2, u3, u4]
        }
    })
}

fn tanh_like_table<S: Real>(t: S) -> [S; 5] {
    // for y with y' = 1 - y^2 (tanh and coth alike)
    let one = S::one();
    let w = one - t * t;
    let u1 = w;
    let u2 = -S::of(2.0) * t * w;
    let u3 = w * (S::of(6.0) * t * t - S::of(2.0));
    let u4 = w * (S::of(16.0) * t - S::of(24.0) * t * t * t);
    [t, u1, u2, u3, u4]
}

/// Logarithmic derivative `f'(s)/f(s)`.
pub fn d_log<S: Real>(f: &SmoothFn<S>, s: S) -> Result<S, SmoothError> {
    let jet = f.eval_jet(s)?;
    if jet.v == S::zero() {
        return Err(SmoothError::DivisionByZero { s: s.as_f64() });
    }
    Ok(jet.d1 / jet.v)
}

/// Convenience alias matching the operation vocabulary.
pub fn eval_jet<S: Real>(f: &SmoothFn<S>, s: S) -> Result<Jet4<S>, SmoothError> {
    f.eval_jet(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maclaurin_jet_of_sine() {
        let f = SmoothFn::<f64>::identity().sin();
        let j = f.eval_jet(0.0).unwrap();
        assert_eq!((j.v, j.d1, j.d2, j.d3, j.d4), (0.0, 1.0, 0.0, -1.0, 0.0));
    }

    #[test]
    fn jet_of_exp_2s_at_origin() {
        let f = SmoothFn::<f64>::linear(2.0).exp();
        let j = f.eval_jet(0.0).unwrap();
        assert_eq!((j.v, j.d1, j.d2, j.d3, j.d4), (1.0, 2.0, 4.0, 8.0, 16.0));
    }

    #[test]
    fn d_log_of_exponential_is_rate() {
        let f = SmoothFn::<f64>::linear(1.7).exp();
        for s in [-0.4, 0.0, 2.3] {
            assert!((d_log(&f, s).unwrap() - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn d_log_of_sin_scaled_is_cot() {
        // h = sin(sqrt(L) s) has h'/h = sqrt(L) cot(sqrt(L) s)
        let lam = 2.3f64;
        let c = lam.sqrt();
        let h = SmoothFn::linear(c).sin();
        let s = 0.6;
        let expect = c * (c * s).cos() / (c * s).sin();
        assert!((d_log(&h, s).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn log_rejects_nonpositive_argument() {
        let f = SmoothFn::<f64>::identity().log();
        assert!(matches!(
            f.eval_jet(-1.0),
            Err(SmoothError::Singular { .. })
        ));
    }

    #[test]
    fn domain_violation_is_loud() {
        let f = SmoothFn::<f64>::identity().with_domain(0.0, 1.0);
        assert!(matches!(
            f.eval_jet(2.0),
            Err(SmoothError::DomainError { .. })
        ));
        // boundary is not interior
        assert!(f.eval_jet(1.0).is_err());
        assert!(f.eval_jet(0.5).is_ok());
    }

    #[test]
    fn division_by_zero_value_is_reported() {
        let f = SmoothFn::<f64>::constant(1.0) / SmoothFn::identity().sin();
        assert!(matches!(
            f.eval_jet(0.0),
            Err(SmoothError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn coth_pole_is_reported() {
        let f = SmoothFn::<f64>::identity().coth();
        assert!(matches!(f.eval_jet(0.0), Err(SmoothError::Singular { .. })));
        let j = f.eval_jet(1.0).unwrap();
        assert!((j.v - 1.0f64.cosh() / 1.0f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn general_composition_chains() {
        // f = log(cos(s)) composed as outer log with inner cos
        let outer = SmoothFn::<f64>::identity().log();
        let inner = SmoothFn::identity().cos();
        let f = outer.compose(inner);
        let direct = SmoothFn::<f64>::identity().cos().log();
        let s = 0.4;
        let a = f.eval_jet(s).unwrap();
        let b = direct.eval_jet(s).unwrap();
        assert!((a.v - b.v).abs() < 1e-15);
        assert!((a.d3 - b.d3).abs() < 1e-12);
        assert!((a.d4 - b.d4).abs() < 1e-12);
    }

    #[test]
    fn hermite_matches_data_at_knots() {
        let knots: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let values: Vec<f64> = knots.iter().map(|s| s.sin()).collect();
        let derivs: Vec<f64> = knots.iter().map(|s| s.cos()).collect();
        let f = SmoothFn::hermite(HermiteSpline::new(knots, values, derivs));
        let j = f.eval_jet(0.95).unwrap();
        assert!((j.v - 0.95f64.sin()).abs() < 1e-6);
        assert!((j.d1 - 0.95f64.cos()).abs() < 1e-5);
    }
}
