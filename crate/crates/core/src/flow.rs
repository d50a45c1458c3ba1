//! The two-eigenvalue structure ODE system and its first-integral monitors.
//!
//! State is `(s, f′, X, Y, h₁, h₂)` with constants `(m, λ, r₁, r₂, k₁, k₂)`:
//! `X` and `Y` are the logarithmic warp derivatives of the two fiber blocks,
//! `f′` the radial derivative of the potential.  The closure used for `f″`
//! presumes the on-shell identities of the two-eigenvalue reduction;
//! off-shell starts are permitted but flagged on the trajectory.
//!
//! Integration is a classical fixed-step 4th-order one-step method: runs are
//! bit-reproducible, and drift of the conserved combinations is the step
//! based error measure.
//!
//! Only the two-eigenvalue system (and its single-eigenvalue specialization,
//! see [`single_eig_residual`]) is closed here; systems with three or more
//! warp rates have no closed evolution for the scalar-curvature term and are
//! excluded by the eigenvalue-count obstruction anyway
//! ([`three_eig_obstruction`]).

use crate::analysis::Potential;
use crate::scalar::Real;
use crate::smooth::{HermiteSpline, SmoothFn};
use crate::warped::{FiberBlock, GeomError, MultiWarpedMetric};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("trajectory blew up at s = {s} (|state| or warp bound exceeded)")]
    BlowUp { s: f64, last: Box<str> },
    #[error("step too large: monitor drift {drift} between adjacent samples at s = {s}")]
    StepTooLarge { s: f64, drift: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Constants of the two-eigenvalue system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdeParams<S> {
    pub m: S,
    pub lambda: S,
    pub r1: usize,
    pub r2: usize,
    pub k1: S,
    pub k2: S,
}

impl<S: Real> OdeParams<S> {
    pub fn new(
        m: S,
        lambda: S,
        r1: usize,
        r2: usize,
        k1: S,
        k2: S,
    ) -> Result<Self, FlowError> {
        if m == S::zero() || m == S::one() || m == -S::one() || !m.is_finite() {
            return Err(FlowError::Param(format!("m = {m} is excluded")));
        }
        if r1 < 1 || r2 < 1 {
            return Err(FlowError::Param("block multiplicities must be >= 1".into()));
        }
        Ok(OdeParams {
            m,
            lambda,
            r1,
            r2,
            k1,
            k2,
        })
    }

    pub fn dimension(&self) -> usize {
        1 + self.r1 + self.r2
    }
}

/// Point of the structure flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ODEState<S> {
    pub s: S,
    pub fp: S,
    pub x: S,
    pub y: S,
    pub h1: S,
    pub h2: S,
    pub params: OdeParams<S>,
}

impl<S: Real> ODEState<S> {
    pub fn is_finite(&self) -> bool {
        self.s.is_finite()
            && self.fp.is_finite()
            && self.x.is_finite()
            && self.y.is_finite()
            && self.h1.is_finite()
            && self.h2.is_finite()
    }

    fn norm(&self) -> S {
        self.fp
            .abs()
            .max(self.x.abs())
            .max(self.y.abs())
            .max(self.h1.abs())
            .max(self.h2.abs())
    }
}

/// Derivatives `(f″, X′, Y′, h₁′, h₂′)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivs<S> {
    pub fp_dot: S,
    pub x_dot: S,
    pub y_dot: S,
    pub h1_dot: S,
    pub h2_dot: S,
}

/// Right-hand side of the two-eigenvalue flow:
/// `X′ = −X² − f′X/m − XY` (symmetrically for `Y`),
/// `f″ = f′(X+Y) − 2m(n−1)/(m−1)·XY + f′²/m`, `h′ = ξh`.
pub fn two_eig_rhs<S: Real>(st: &ODEState<S>) -> Result<Derivs<S>, FlowError> {
    let p = st.params;
    if !st.is_finite() {
        return Err(FlowError::Param("state must be finite".into()));
    }
    let m = p.m;
    let n = S::of_usize(p.dimension());
    let xy = st.x * st.y;
    let x_dot = -st.x * st.x - st.fp * st.x / m - xy;
    let y_dot = -st.y * st.y - st.fp * st.y / m - xy;
    let fp_dot = st.fp * (st.x + st.y) - S::of(2.0) * m * (n - S::one()) / (m - S::one()) * xy
        + st.fp * st.fp / m;
    Ok(Derivs {
        fp_dot,
        x_dot,
        y_dot,
        h1_dot: st.x * st.h1,
        h2_dot: st.y * st.h2,
    })
}

/// Conserved combinations and structural identities monitored along flows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// Main first integral coupling `XY`, `f′` and `λ`.
    PrimaryIntegral,
    /// `XY · (slope relation)`: vanishes whenever either factor does.
    ProductObstruction,
    /// `(r₁−1)X + (r₂−1)Y − (m+1)f′/m` (the two-warp branch relation).
    SlopeRelation,
    /// `f′(X + Y + f′/m) − m(n−1)/(m−1)·XY`.
    PotentialProduct,
    /// Difference of the fiber curvature terms.
    FiberDiff,
    /// Sum of the fiber curvature terms.
    FiberSum,
    /// First moment of the fiber terms (weights `X`, `−Y`).
    FiberMomentX,
    /// Cross moment of the fiber terms (weights `−Y`, `X`).
    FiberMomentCross,
    /// Scaled moment combination.
    FiberMomentScaled,
    /// Quadratic balance of `Σξ²` against the potential slope.
    QuadraticBalance,
}

impl Monitor {
    pub const ALL: [Monitor; 10] = [
        Monitor::PrimaryIntegral,
        Monitor::ProductObstruction,
        Monitor::SlopeRelation,
        Monitor::PotentialProduct,
        Monitor::FiberDiff,
        Monitor::FiberSum,
        Monitor::FiberMomentX,
        Monitor::FiberMomentCross,
        Monitor::FiberMomentScaled,
        Monitor::QuadraticBalance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Monitor::PrimaryIntegral => "primary_integral",
            Monitor::ProductObstruction => "product_obstruction",
            Monitor::SlopeRelation => "slope_relation",
            Monitor::PotentialProduct => "potential_product",
            Monitor::FiberDiff => "fiber_diff",
            Monitor::FiberSum => "fiber_sum",
            Monitor::FiberMomentX => "fiber_moment_x",
            Monitor::FiberMomentCross => "fiber_moment_cross",
            Monitor::FiberMomentScaled => "fiber_moment_scaled",
            Monitor::QuadraticBalance => "quadratic_balance",
        }
    }

    pub fn eval<S: Real>(&self, st: &ODEState<S>) -> S {
        let p = st.params;
        let m = p.m;
        let n = S::of_usize(p.dimension());
        let one = S::one();
        let two = S::of(2.0);
        let (x, y, fp) = (st.x, st.y, st.fp);
        let xy = x * y;
        let r1 = S::of_usize(p.r1);
        let r2 = S::of_usize(p.r2);
        let f1 = (r1 - one) * p.k1 / (st.h1 * st.h1);
        let f2 = (r2 - one) * p.k2 / (st.h2 * st.h2);
        let s1 = r1 * x + r2 * y;
        let s2 = r1 * x * x + r2 * y * y;
        let l = (r1 - one) * x + (r2 - one) * y;
        // on-shell value of X′ + X² + f′X/m (and the Y analogue)
        let pval = -xy;
        let nm1 = n - one;
        match self {
            Monitor::PrimaryIntegral => {
                (m + one) * xy - (m - one) / (m * nm1) * fp * l
                    - (m * m - one) / (m * nm1) * fp * (x + y)
                    + (m - one) * p.lambda / nm1
            }
            Monitor::ProductObstruction => xy * (l - (m + one) / m * fp),
            Monitor::SlopeRelation => l - (m + one) / m * fp,
            Monitor::PotentialProduct => {
                fp * (x + y + fp / m) - m * nm1 / (m - one) * xy
            }
            Monitor::FiberDiff => f1 - f2 - (x - y) * (l - (m + one) / m * fp),
            Monitor::FiberSum => {
                f1 + f2
                    - ((two * m + n - one) / m * pval
                        + (m + one) / m * p.lambda
                        + (s2 - x * x - y * y)
                        - (m + one) / (m * m) * fp * s1
                        + two / m * fp * l)
            }
            Monitor::FiberMomentX => {
                f1 * x
                    - f2 * y
                    - ((x - y) * (pval + p.lambda)
                        + (x - y) * (x + y) * l
                        + (x - y) * (xy - (m + one) / m * fp * (x + y)))
            }
            Monitor::FiberMomentCross => -f1 * y + f2 * x - (x - y) * (pval + p.lambda + xy),
            Monitor::FiberMomentScaled => {
                (m - one) / m * (f1 * x - f2 * y)
                    - (x - y)
                        * ((m + n - two) / m * pval + (s2 - x * x - y * y)
                            - (m + one) / m * xy)
                    - (x - y)
                        * (fp / m * l - (x + y + fp / m) * l / m)
            }
            Monitor::QuadraticBalance => {
                nm1 / m * pval - (m - one) / m * p.lambda
                    + s2
                    + (m - one) / (m * m) * fp * s1
                    - (x + y) * (s1 - (m - one) / m * fp)
            }
        }
    }
}

/// Evaluate every monitor at a state, with names.
pub fn monitor_first_integrals<S: Real>(st: &ODEState<S>) -> Vec<(&'static str, S)> {
    Monitor::ALL
        .iter()
        .map(|mon| (mon.name(), mon.eval(st)))
        .collect()
}

/// Sampled trajectory with per-sample monitor residuals.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory<S> {
    pub monitors: Vec<Monitor>,
    pub samples: Vec<ODEState<S>>,
    /// `residuals[i][j]` = monitor `j` at sample `i`.
    pub residuals: Vec<Vec<S>>,
    /// True when the initial state already violated the primary integral.
    pub off_shell_start: bool,
}

impl<S: Real> Trajectory<S> {
    /// Worst drift from the initial value among the monitors that started
    /// on-shell (the varying columns are diagnostics, not integrals).
    pub fn max_drift(&self) -> S {
        let mut worst = S::zero();
        for col in 0..self.monitors.len() {
            let first = self.residuals[0][col];
            if first.abs() > S::of(ON_SHELL_TOL) {
                continue;
            }
            for row in &self.residuals {
                worst = worst.max((row[col] - first).abs());
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,fp,X,Y,h1,h2");
        for m in &self.monitors {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        for (st, res) in self.samples.iter().zip(&self.residuals) {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                st.s, st.fp, st.x, st.y, st.h1, st.h2
            ));
            for v in res {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

const BLOWUP_NORM: f64 = 1e12;
const DRIFT_LIMIT: f64 = 1e-3;
const ON_SHELL_TOL: f64 = 1e-6;

/// Fixed-step classical 4th-order integration from `st0` to `s_end`.
///
/// Aborts with [`FlowError::BlowUp`] when a warp factor hits zero or the
/// state norm explodes, and with [`FlowError::StepTooLarge`] when any
/// monitor residual drifts by more than `1e−3` across one step.
pub fn integrate<S: Real>(
    st0: ODEState<S>,
    s_end: S,
    step: S,
    monitors: &[Monitor],
) -> Result<Trajectory<S>, FlowError> {
    if step <= S::zero() {
        return Err(FlowError::Param("step must be positive".into()));
    }
    if s_end == st0.s {
        return Err(FlowError::Param("empty integration range".into()));
    }
    if !st0.is_finite() {
        return Err(FlowError::Param("initial state must be finite".into()));
    }
    let monitors: Vec<Monitor> = if monitors.is_empty() {
        vec![Monitor::PrimaryIntegral]
    } else {
        monitors.to_vec()
    };

    let dir = if s_end > st0.s { S::one() } else { -S::one() };
    let eval_res = |st: &ODEState<S>| -> Vec<S> {
        monitors.iter().map(|m| m.eval(st)).collect()
    };

    let off_shell_start =
        Monitor::PrimaryIntegral.eval(&st0).abs() > S::of(ON_SHELL_TOL);

    let mut samples = vec![st0];
    let mut residuals = vec![eval_res(&st0)];
    // the step gate watches only monitors that hold at the start: the other
    // columns are recorded but vary legitimately along the flow
    let gated: Vec<bool> = residuals[0]
        .iter()
        .map(|r| r.abs() <= S::of(ON_SHELL_TOL))
        .collect();
    let mut st = st0;

    let total = (s_end - st0.s).abs();
    let steps = (total / step).ceil().as_f64() as usize;
    for i in 0..steps {
        let remaining = (s_end - st.s).abs();
        let h = dir * step.min(remaining);
        let next = rk4_step(&st, h)?;
        let s_reached = next.s;

        if next.h1 <= S::zero()
            || next.h2 <= S::zero()
            || !next.is_finite()
            || next.norm() > S::of(BLOWUP_NORM)
        {
            return Err(FlowError::BlowUp {
                s: s_reached.as_f64(),
                last: format!("{st:?}").into_boxed_str(),
            });
        }

        let res = eval_res(&next);
        let drift = res
            .iter()
            .zip(residuals.last().unwrap())
            .zip(&gated)
            .filter(|(_, keep)| **keep)
            .fold(S::zero(), |acc, ((a, b), _)| acc.max((*a - *b).abs()));
        if drift > S::of(DRIFT_LIMIT) {
            return Err(FlowError::StepTooLarge {
                s: s_reached.as_f64(),
                drift: drift.as_f64(),
            });
        }

        samples.push(next);
        residuals.push(res);
        st = next;
        if i + 1 == steps {
            break;
        }
    }

    Ok(Trajectory {
        monitors,
        samples,
        residuals,
        off_shell_start,
    })
}

fn rk4_step<S: Real>(st: &ODEState<S>, h: S) -> Result<ODEState<S>, FlowError> {
    let half = S::of(0.5);
    let sixth = S::of(1.0 / 6.0);
    let two = S::of(2.0);

    let advance = |base: &ODEState<S>, d: &Derivs<S>, dt: S| ODEState {
        s: base.s + dt,
        fp: base.fp + dt * d.fp_dot,
        x: base.x + dt * d.x_dot,
        y: base.y + dt * d.y_dot,
        h1: base.h1 + dt * d.h1_dot,
        h2: base.h2 + dt * d.h2_dot,
        params: base.params,
    };

    let k1 = two_eig_rhs(st)?;
    let k2 = two_eig_rhs(&advance(st, &k1, half * h))?;
    let k3 = two_eig_rhs(&advance(st, &k2, half * h))?;
    let k4 = two_eig_rhs(&advance(st, &k3, h))?;

    Ok(ODEState {
        s: st.s + h,
        fp: st.fp + h * sixth * (k1.fp_dot + two * k2.fp_dot + two * k3.fp_dot + k4.fp_dot),
        x: st.x + h * sixth * (k1.x_dot + two * k2.x_dot + two * k3.x_dot + k4.x_dot),
        y: st.y + h * sixth * (k1.y_dot + two * k2.y_dot + two * k3.y_dot + k4.y_dot),
        h1: st.h1 + h * sixth * (k1.h1_dot + two * k2.h1_dot + two * k3.h1_dot + k4.h1_dot),
        h2: st.h2 + h * sixth * (k1.h2_dot + two * k2.h2_dot + two * k3.h2_dot + k4.h2_dot),
        params: st.params,
    })
}

/// The quantity `Σ multᵢ ξᵢ² + ((m−1)/m²) f′²` whose strict positivity on
/// states with three or more distinct `ξ` values certifies that such states
/// admit no solution.
pub fn three_eig_obstruction<S: Real>(
    m: S,
    fp: S,
    xis: &[(S, usize)],
) -> Result<S, FlowError> {
    if !(m > S::one()) {
        return Err(FlowError::Param(format!("m = {m} must exceed 1")));
    }
    let mut distinct: Vec<S> = Vec::new();
    for (v, _) in xis {
        if !distinct.contains(v) {
            distinct.push(*v);
        }
    }
    if distinct.len() < 3 {
        return Err(FlowError::Param(
            "need at least three distinct eigenvalue candidates".into(),
        ));
    }
    let sum: S = xis
        .iter()
        .map(|(v, mult)| S::of_usize(*mult) * *v * *v)
        .sum();
    Ok(sum + (m - S::one()) / (m * m) * fp * fp)
}

/// Residual of the single-eigenvalue (one-block) eigenvalue equation
/// `−f′ξ + λ = −ξ′ − (n−1)ξ² + (n−2)k/h²`.
pub fn single_eig_residual<S: Real>(
    xi: S,
    xi_prime: S,
    fp: S,
    lambda: S,
    k: S,
    h: S,
    n: usize,
) -> S {
    let lhs = -fp * xi + lambda;
    let rhs = -xi_prime - S::of_usize(n - 1) * xi * xi + S::of_usize(n - 2) * k / (h * h);
    lhs - rhs
}

/// Rebuild a two-block warped metric and potential from a trajectory by
/// cubic interpolation matching `(h, h′ = ξh)` at the knots; `f` is the
/// cubic-accurate quadrature of the sampled `f′`.
pub fn reconstruct_metric<S: Real>(
    traj: &Trajectory<S>,
) -> Result<(MultiWarpedMetric<S>, Potential<S>), FlowError> {
    if traj.samples.len() < 3 {
        return Err(FlowError::Param("trajectory too short to reconstruct".into()));
    }
    let mut samples = traj.samples.clone();
    if samples[0].s > samples[samples.len() - 1].s {
        samples.reverse();
    }
    let p = samples[0].params;

    let knots: Vec<S> = samples.iter().map(|st| st.s).collect();
    let h1v: Vec<S> = samples.iter().map(|st| st.h1).collect();
    let h1d: Vec<S> = samples.iter().map(|st| st.x * st.h1).collect();
    let h2v: Vec<S> = samples.iter().map(|st| st.h2).collect();
    let h2d: Vec<S> = samples.iter().map(|st| st.y * st.h2).collect();
    let fpv: Vec<S> = samples.iter().map(|st| st.fp).collect();
    let fpd: Vec<S> = samples
        .iter()
        .map(|st| two_eig_rhs(st).map(|d| d.fp_dot))
        .collect::<Result<_, _>>()?;

    // f by cubic-exact quadrature of the f′ interpolant
    let mut fv = Vec::with_capacity(knots.len());
    let half = S::of(0.5);
    let twelfth = S::of(1.0 / 12.0);
    let mut acc = S::zero();
    fv.push(acc);
    for i in 1..knots.len() {
        let dt = knots[i] - knots[i - 1];
        acc = acc
            + half * dt * (fpv[i - 1] + fpv[i])
            + twelfth * dt * dt * (fpd[i - 1] - fpd[i]);
        fv.push(acc);
    }

    let h1 = SmoothFn::hermite(HermiteSpline::new(knots.clone(), h1v, h1d));
    let h2 = SmoothFn::hermite(HermiteSpline::new(knots.clone(), h2v, h2d));
    let f = SmoothFn::hermite(HermiteSpline::new(knots, fv, fpv));

    let b1 = FiberBlock::space_form(p.r1, p.k1)?;
    let b2 = FiberBlock::space_form(p.r2, p.k2)?;
    let domain = crate::smooth::Interval::new(samples[0].s, samples[samples.len() - 1].s);
    let metric = MultiWarpedMetric::new(domain, vec![(h1, b1), (h2, b2)])?;
    let potential = Potential::new(f, p.m, p.lambda)
        .map_err(|e| FlowError::Param(e.to_string()))?;
    Ok((metric, potential))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exponential-warp stationary solution: X = c, Y = 0, f′ = −mc.
    fn fixed_point_state() -> ODEState<f64> {
        let c = 1.0; // sqrt(-Λ) with Λ = -1
        let m = 2.0;
        let r = 3usize;
        let lambda = (m + r as f64) * (-1.0);
        let params = OdeParams::new(m, lambda, r, 2, 0.0, lambda / 1.0).unwrap();
        ODEState {
            s: 0.0,
            fp: -m * c,
            x: c,
            y: 0.0,
            h1: 1.0,
            h2: 1.0,
            params,
        }
    }

    /// On-shell state of the sine-warp family at a given s (m=2, r=2, Λ=1).
    fn sine_family_state(s: f64) -> ODEState<f64> {
        let m = 2.0;
        let lambda = 4.0;
        let params = OdeParams::new(m, lambda, 2, 2, 1.0, 4.0).unwrap();
        ODEState {
            s,
            fp: m * s.tan(),
            x: 1.0 / s.tan(),
            y: 0.0,
            h1: s.sin(),
            h2: 1.0,
            params,
        }
    }

    #[test]
    fn fixed_point_has_zero_rhs() {
        let st = fixed_point_state();
        let d = two_eig_rhs(&st).unwrap();
        assert!(d.x_dot.abs() < 1e-14);
        assert!(d.y_dot.abs() < 1e-14);
        assert!(d.fp_dot.abs() < 1e-14);
    }

    #[test]
    fn sine_family_rhs_matches_exact_derivatives() {
        for s in [0.4, 0.7, 1.2] {
            let st = sine_family_state(s);
            let d = two_eig_rhs(&st).unwrap();
            // X = cot s: X' = -csc^2; f' = 2 tan s: f'' = 2 sec^2
            let xdot_exact = -1.0 / s.sin().powi(2);
            let fpdot_exact = 2.0 / s.cos().powi(2);
            assert!((d.x_dot - xdot_exact).abs() < 1e-12, "s = {s}");
            assert!((d.fp_dot - fpdot_exact).abs() < 1e-12, "s = {s}");
            assert!((d.h1_dot - s.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_equal_eigenvalues_stay_finite() {
        let mut st = fixed_point_state();
        st.y = st.x;
        let d = two_eig_rhs(&st).unwrap();
        assert!(d.x_dot.is_finite() && d.y_dot.is_finite() && d.fp_dot.is_finite());
        assert_eq!(d.x_dot, d.y_dot);
    }

    #[test]
    fn sine_family_monitors_vanish() {
        let st = sine_family_state(0.8);
        for (name, v) in monitor_first_integrals(&st) {
            // the slope relation is specific to the two-positive-warp branch
            if name == "slope_relation" || name == "potential_product" {
                continue;
            }
            assert!(v.abs() < 1e-12, "{name} = {v:.3e}");
        }
        // Y = 0 kills the product obstruction exactly
        assert_eq!(Monitor::ProductObstruction.eval(&st), 0.0);
    }

    #[test]
    fn random_state_violates_some_monitor() {
        let params = OdeParams::new(2.0, 0.7, 2, 2, 0.3, -0.4).unwrap();
        let st = ODEState {
            s: 0.0,
            fp: 0.9,
            x: 0.6,
            y: -0.8,
            h1: 1.2,
            h2: 0.7,
            params,
        };
        let worst = monitor_first_integrals(&st)
            .iter()
            .fold(0.0f64, |acc, (_, v): &(_, f64)| acc.max(v.abs()));
        assert!(worst > 1e-3);
    }

    #[test]
    fn integration_tracks_closed_form() {
        let st0 = sine_family_state(0.3);
        let traj = integrate(st0, 1.2, 1e-3, &[Monitor::PrimaryIntegral]).unwrap();
        assert!(!traj.off_shell_start);
        let last = traj.samples.last().unwrap();
        assert!((last.s - 1.2).abs() < 1e-12);
        assert!((last.x - 1.0 / 1.2f64.tan()).abs() < 1e-8);
        assert!((last.fp - 2.0 * 1.2f64.tan()).abs() < 1e-7);
        assert!(traj.max_drift() < 1e-10);
    }

    #[test]
    fn fixed_point_trajectory_is_constant() {
        let st0 = fixed_point_state();
        let traj = integrate(st0, 2.0, 1e-2, &[Monitor::PrimaryIntegral]).unwrap();
        for st in &traj.samples {
            assert!((st.x - st0.x).abs() < 1e-12);
            assert!((st.fp - st0.fp).abs() < 1e-12);
        }
    }

    #[test]
    fn big_step_is_rejected() {
        let st0 = sine_family_state(0.3);
        match integrate(st0, 1.4, 0.5, &[Monitor::PrimaryIntegral]) {
            Err(FlowError::StepTooLarge { .. }) | Err(FlowError::BlowUp { .. }) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn drift_shrinks_at_fourth_order() {
        let st0 = sine_family_state(0.35);
        let drift = |step: f64| {
            integrate(st0, 1.15, step, &[Monitor::PrimaryIntegral])
                .unwrap()
                .max_drift()
        };
        let d1 = drift(0.02);
        let d2 = drift(0.01);
        assert!(d1 / d2 >= 8.0, "drift ratio {}", d1 / d2);
    }

    #[test]
    fn obstruction_examples() {
        // degenerate all-zero state
        assert_eq!(
            three_eig_obstruction(2.0, 0.0, &[(0.0, 1), (1.0, 1), (2.0, 1)]).unwrap(),
            5.0
        );
        // quoted arithmetic: xi = (1,2,3), fp = 1, m = 2 -> 14 + 1/4
        let v: f64 = three_eig_obstruction(2.0, 1.0, &[(1.0, 1), (2.0, 1), (3.0, 1)]).unwrap();
        assert!((v - 14.25).abs() < 1e-15);
        // m <= 1 rejected
        assert!(three_eig_obstruction(0.5, 1.0, &[(1.0, 1), (2.0, 1), (3.0, 1)]).is_err());
        // fewer than three distinct values rejected
        assert!(three_eig_obstruction(2.0, 1.0, &[(1.0, 1), (1.0, 2)]).is_err());
    }

    #[test]
    fn reconstruction_matches_equation() {
        use crate::analysis::qe_residual;
        let st0 = sine_family_state(0.4);
        let traj = integrate(st0, 1.1, 2e-4, &[Monitor::PrimaryIntegral]).unwrap();
        let (g, p) = reconstruct_metric(&traj).unwrap();
        // evaluate at interior knots
        for idx in [traj.samples.len() / 4, traj.samples.len() / 2] {
            let s = traj.samples[idx].s;
            let (r0, rb) = qe_residual(&g, &p, s).unwrap();
            assert!(r0.abs() < 1e-6, "radial {r0:.2e}");
            assert!(rb.iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn trajectory_csv_has_expected_columns() {
        let st0 = sine_family_state(0.5);
        let traj = integrate(st0, 0.7, 1e-2, &[Monitor::PrimaryIntegral, Monitor::FiberDiff])
            .unwrap();
        let csv = traj.to_csv();
        assert!(csv.starts_with("s,fp,X,Y,h1,h2,primary_integral,fiber_diff"));
    }
}
