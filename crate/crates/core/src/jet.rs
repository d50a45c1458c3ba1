//! Fourth-order jets: a value together with its first four derivatives
//! with respect to the curve parameter.
//!
//! All catalog metrics are curves of closed-form functions of one variable,
//! so order-4 jets are enough to give exact Ricci, scalar and Cotton data
//! (the Cotton obstruction consumes third derivatives of the warp factors).

use crate::scalar::Real;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value and derivatives `(f, f', f'', f''', f'''')` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet4<S> {
    pub v: S,
    pub d1: S,
    pub d2: S,
    pub d3: S,
    pub d4: S,
}

impl<S: Real> Jet4<S> {
    pub fn new(v: S, d1: S, d2: S, d3: S, d4: S) -> Self {
        Jet4 { v, d1, d2, d3, d4 }
    }

    /// Jet of a constant.
    pub fn constant(c: S) -> Self {
        let z = S::zero();
        Jet4::new(c, z, z, z, z)
    }

    /// Jet of the identity curve `s ↦ s`.
    pub fn variable(s: S) -> Self {
        let z = S::zero();
        Jet4::new(s, S::one(), z, z, z)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.d1.is_finite()
            && self.d2.is_finite()
            && self.d3.is_finite()
            && self.d4.is_finite()
    }

    pub fn scale(self, c: S) -> Self {
        Jet4::new(self.v * c, self.d1 * c, self.d2 * c, self.d3 * c, self.d4 * c)
    }

    /// Drop the value and shift: the jet of `f'` to order 3 (4th entry zeroed).
    ///
    /// The top derivative is unknown at this order; callers must not rely on
    /// the `d4` channel of the result.
    pub fn shift(self) -> Self {
        Jet4::new(self.d1, self.d2, self.d3, self.d4, S::zero())
    }

    /// Chain rule through a univariate map given its derivatives at `self.v`.
    ///
    /// `outer = (u(g), u'(g), u''(g), u'''(g), u''''(g))` with `g = self.v`.
    pub fn compose(self, outer: [S; 5]) -> Self {
        let [u0, u1, u2, u3, u4] = outer;
        let g1 = self.d1;
        let g2 = self.d2;
        let g3 = self.d3;
        let g4 = self.d4;
        let c3 = S::of(3.0);
        let c4 = S::of(4.0);
        let c6 = S::of(6.0);
        let d1 = u1 * g1;
        let d2 = u2 * g1 * g1 + u1 * g2;
        let d3 = u3 * g1 * g1 * g1 + c3 * u2 * g1 * g2 + u1 * g3;
        let d4 = u4 * g1 * g1 * g1 * g1
            + c6 * u3 * g1 * g1 * g2
            + u2 * (c3 * g2 * g2 + c4 * g1 * g3)
            + u1 * g4;
        Jet4::new(u0, d1, d2, d3, d4)
    }
}

impl<S: Real> Add for Jet4<S> {
    type Output = Jet4<S>;
    fn add(self, o: Self) -> Self {
        Jet4::new(
            self.v + o.v,
            self.d1 + o.d1,
            self.d2 + o.d2,
            self.d3 + o.d3,
            self.d4 + o.d4,
        )
    }
}

impl<S: Real> Sub for Jet4<S> {
    type Output = Jet4<S>;
    fn sub(self, o: Self) -> Self {
        Jet4::new(
            self.v - o.v,
            self.d1 - o.d1,
            self.d2 - o.d2,
            self.d3 - o.d3,
            self.d4 - o.d4,
        )
    }
}

impl<S: Real> Neg for Jet4<S> {
    type Output = Jet4<S>;
    fn neg(self) -> Self {
        Jet4::new(-self.v, -self.d1, -self.d2, -self.d3, -self.d4)
    }
}

impl<S: Real> Mul for Jet4<S> {
    type Output = Jet4<S>;
    /// Leibniz rule with binomial weights.
    fn mul(self, o: Self) -> Self {
        let c3 = S::of(3.0);
        let c4 = S::of(4.0);
        let c6 = S::of(6.0);
        let v = self.v * o.v;
        let d1 = self.d1 * o.v + self.v * o.d1;
        let d2 = self.d2 * o.v + S::of(2.0) * self.d1 * o.d1 + self.v * o.d2;
        let d3 = self.d3 * o.v + c3 * self.d2 * o.d1 + c3 * self.d1 * o.d2 + self.v * o.d3;
        let d4 = self.d4 * o.v
            + c4 * self.d3 * o.d1
            + c6 * self.d2 * o.d2
            + c4 * self.d1 * o.d3
            + self.v * o.d4;
        Jet4::new(v, d1, d2, d3, d4)
    }
}

impl<S: Real> Div for Jet4<S> {
    type Output = Jet4<S>;
    /// Solve `f = q·g` for the derivatives of `q` successively.
    /// The caller is responsible for `o.v != 0`.
    fn div(self, o: Self) -> Self {
        let c2 = S::of(2.0);
        let c3 = S::of(3.0);
        let c4 = S::of(4.0);
        let c6 = S::of(6.0);
        let q0 = self.v / o.v;
        let q1 = (self.d1 - q0 * o.d1) / o.v;
        let q2 = (self.d2 - c2 * q1 * o.d1 - q0 * o.d2) / o.v;
        let q3 = (self.d3 - c3 * q2 * o.d1 - c3 * q1 * o.d2 - q0 * o.d3) / o.v;
        let q4 = (self.d4 - c4 * q3 * o.d1 - c6 * q2 * o.d2 - c4 * q1 * o.d3 - q0 * o.d4) / o.v;
        Jet4::new(q0, q1, q2, q3, q4)
    }
}
