//! Constructors for the classified warped quasi-Einstein families, with
//! programmatic parameter derivation and a plain key-value configuration
//! format.
//!
//! Family naming follows the warp shape:
//!  * `single-warp`: one warped Einstein fiber (the D-flat shape), realized
//!    through the sine/cosh/exp/sinh presets;
//!  * `product-sin|cosh|exp|sinh`: an Einstein factor times a warped factor
//!    that is itself Einstein, warp `sin(√Λ s)`, `cosh(√−Λ s)`, `e^{√−Λ s}`
//!    or `sinh(√−Λ s)`;
//!  * `power-law`: two Ricci-flat fibers with power-law warps and a
//!    logarithmic potential (the λ = 0 branch);
//!  * `exp-pair`: the would-be constant-ratio branch with two exponential
//!    warps — its consistency check always fails, and the constructor
//!    reports the quantified contradiction;
//!  * `complete-exp|complete-sinh`: the globally complete product shapes,
//!    parameterized by λ instead of Λ.

use crate::analysis::{evaluate_family, qe_residual, AnalysisError, Potential, QEReport};
use crate::flow::{ODEState, OdeParams};
use crate::scalar::Real;
use crate::smooth::{Interval, SmoothFn};
use crate::warped::{FiberBlock, FiberModel, GeomError, MultiWarpedMetric};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("parameter error: {0}")]
    Param(String),
    #[error("no real ratio root: discriminant = {discriminant}")]
    NoRealRoot { discriminant: f64 },
    #[error("degenerate ratio root t = {root} (0 and 1 are excluded)")]
    DegenerateRoot { root: f64 },
    #[error("empty warp domain")]
    DomainEmpty,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Warp shape of the Einstein-factor families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpCase {
    Sin,
    Cosh,
    Exp,
    Sinh,
}

impl WarpCase {
    pub const ALL: [WarpCase; 4] = [WarpCase::Sin, WarpCase::Cosh, WarpCase::Exp, WarpCase::Sinh];

    pub fn name(&self) -> &'static str {
        match self {
            WarpCase::Sin => "sin",
            WarpCase::Cosh => "cosh",
            WarpCase::Exp => "exp",
            WarpCase::Sinh => "sinh",
        }
    }

    fn parse(s: &str) -> Result<Self, CatalogError> {
        match s {
            "sin" => Ok(WarpCase::Sin),
            "cosh" => Ok(WarpCase::Cosh),
            "exp" => Ok(WarpCase::Exp),
            "sinh" => Ok(WarpCase::Sinh),
            other => Err(CatalogError::Config(format!("unknown warp case '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootChoice {
    Plus,
    Minus,
}

/// A fully constructed family: metric, potential, recommended sample window
/// and the resolved parameter set (embedded into reports).
#[derive(Clone, Debug)]
pub struct ResolvedFamily<S> {
    pub name: String,
    pub metric: MultiWarpedMetric<S>,
    pub potential: Potential<S>,
    pub window: Interval<S>,
    pub params: BTreeMap<String, serde_json::Value>,
}

impl<S: Real + Serialize> ResolvedFamily<S> {
    pub fn evaluate(&self, samples: usize) -> Result<QEReport<S>, AnalysisError> {
        evaluate_family(
            &self.metric,
            &self.potential,
            self.window,
            samples,
            self.params.clone(),
        )
    }

    /// Structure-flow state at `s0` (two-block families only).
    pub fn initial_state(&self, s0: S) -> Result<ODEState<S>, CatalogError> {
        let blocks = self.metric.blocks();
        if blocks.len() != 2 {
            return Err(CatalogError::Param(
                "flow states need exactly two fiber blocks".into(),
            ));
        }
        let jets = self.metric.block_jets(s0)?;
        let f = self
            .potential
            .f_jet(s0)
            .map_err(GeomError::Smooth)?;
        let params = OdeParams::new(
            self.potential.m,
            self.potential.lambda,
            blocks[0].1.dim,
            blocks[1].1.dim,
            blocks[0].1.k,
            blocks[1].1.k,
        )
        .map_err(|e| CatalogError::Param(e.to_string()))?;
        Ok(ODEState {
            s: s0,
            fp: f.d1,
            x: jets[0].xi,
            y: jets[1].xi,
            h1: jets[0].h.v,
            h2: jets[1].h.v,
            params,
        })
    }
}

fn num<S: Real>(v: S) -> serde_json::Value {
    serde_json::json!(v.as_f64())
}

/// Warp function, potential, fiber curvature `k₁` and maximal domain of one
/// Einstein-factor case with rate `c = √|Λ|`.
#[allow(clippy::type_complexity)]
fn case_data<S: Real>(
    case: WarpCase,
    m: S,
    big_lambda: S,
) -> Result<(SmoothFn<S>, SmoothFn<S>, S, Interval<S>), CatalogError> {
    let zero = S::zero();
    match case {
        WarpCase::Sin => {
            if big_lambda <= zero {
                return Err(CatalogError::Param(
                    "the sine case needs Lambda > 0".into(),
                ));
            }
            let c = big_lambda.sqrt();
            let half_period = S::of(std::f64::consts::FRAC_PI_2) / c;
            let h = SmoothFn::linear(c).sin();
            let f = SmoothFn::linear(c).cos().log().scale(-m);
            Ok((h, f, big_lambda, Interval::new(zero, half_period)))
        }
        WarpCase::Cosh => {
            if big_lambda >= zero {
                return Err(CatalogError::Param(
                    "the cosh case needs Lambda < 0".into(),
                ));
            }
            let c = (-big_lambda).sqrt();
            let h = SmoothFn::linear(c).cosh();
            let f = SmoothFn::linear(c).sinh().log().scale(-m);
            Ok((h, f, big_lambda, Interval::new(zero, S::infinity())))
        }
        WarpCase::Exp => {
            if big_lambda >= zero {
                return Err(CatalogError::Param(
                    "the exponential case needs Lambda < 0".into(),
                ));
            }
            let c = (-big_lambda).sqrt();
            let h = SmoothFn::linear(c).exp();
            let f = SmoothFn::linear(-m * c);
            Ok((h, f, zero, Interval::all()))
        }
        WarpCase::Sinh => {
            if big_lambda >= zero {
                return Err(CatalogError::Param(
                    "the sinh case needs Lambda < 0".into(),
                ));
            }
            let c = (-big_lambda).sqrt();
            let h = SmoothFn::linear(c).sinh();
            let f = SmoothFn::linear(c).cosh().log().scale(-m);
            Ok((h, f, -big_lambda, Interval::new(zero, S::infinity())))
        }
    }
}

fn case_window<S: Real>(case: WarpCase, big_lambda: S) -> Interval<S> {
    match case {
        WarpCase::Sin => {
            let c = big_lambda.sqrt();
            Interval::new(S::of(0.08) / c, S::of(1.35) / c)
        }
        WarpCase::Cosh | WarpCase::Sinh => {
            let c = (-big_lambda).sqrt();
            Interval::new(S::of(0.15) / c, S::of(2.2) / c)
        }
        WarpCase::Exp => Interval::new(S::of(-1.0), S::of(1.0)),
    }
}

fn first_fiber<S: Real>(r: usize, k: S) -> Result<FiberBlock<S>, CatalogError> {
    Ok(FiberBlock::space_form(r, k)?)
}

/// Warped Einstein factor times an Einstein factor.
///
/// Derivations: `λ = (m+r)Λ`, `ρ = rΛ`, first fiber constant `k₁` is
/// `Λ, Λ, 0, −Λ` across the four cases; the supplied second fiber must have
/// Einstein constant exactly `λ` (the constructor checks rather than
/// rescaling).
pub fn make_einstein_product<S: Real + Serialize>(
    case: WarpCase,
    m: S,
    r: usize,
    big_lambda: S,
    fiber2: FiberBlock<S>,
) -> Result<ResolvedFamily<S>, CatalogError> {
    if !(m > S::one()) {
        return Err(CatalogError::Param(format!("m = {m} must exceed 1")));
    }
    if r < 1 {
        return Err(CatalogError::Param("first block needs r >= 1".into()));
    }
    if big_lambda == S::zero() || !big_lambda.is_finite() {
        return Err(CatalogError::Param("Lambda must be nonzero finite".into()));
    }
    let lambda = (m + S::of_usize(r)) * big_lambda;
    let constant = fiber2.einstein_constant();
    let tol = S::of(1e-12) * (S::one() + lambda.abs());
    if (constant - lambda).abs() > tol {
        return Err(CatalogError::Param(format!(
            "second fiber Einstein constant {constant} must equal lambda = {lambda}"
        )));
    }

    let (h1, f, k1, domain) = case_data(case, m, big_lambda)?;
    let block1 = first_fiber(r, k1)?;
    let metric = MultiWarpedMetric::new(
        domain,
        vec![(h1, block1), (SmoothFn::constant(S::one()), fiber2)],
    )?;
    let potential = Potential::new(f, m, lambda)?;
    potential.validate_for_dimension(metric.dimension())?;

    let rho = S::of_usize(r) * big_lambda;
    let mut params = BTreeMap::new();
    params.insert("kind".into(), format!("product-{}", case.name()).into());
    params.insert("m".into(), num(m));
    params.insert("r".into(), serde_json::json!(r));
    params.insert("r2".into(), serde_json::json!(fiber2.dim));
    params.insert("n".into(), serde_json::json!(metric.dimension()));
    params.insert("Lambda".into(), num(big_lambda));
    params.insert("lambda".into(), num(lambda));
    params.insert("rho".into(), num(rho));
    params.insert("k1".into(), num(k1));
    params.insert("k2".into(), num(fiber2.k));
    params.insert(
        "fiber2".into(),
        serde_json::to_value(fiber2.model).unwrap(),
    );

    Ok(ResolvedFamily {
        name: format!("product-{}", case.name()),
        metric,
        potential,
        window: case_window(case, big_lambda),
        params,
    })
}

/// The warped factor of [`make_einstein_product`] on its own: a single-warp family of
/// dimension `r + 1` (needs `r ≥ 3`).
pub fn make_single_warp<S: Real + Serialize>(
    case: WarpCase,
    m: S,
    r: usize,
    big_lambda: S,
) -> Result<ResolvedFamily<S>, CatalogError> {
    if r < 3 {
        return Err(CatalogError::Param(
            "single-warp presets need r >= 3 (total dimension >= 4)".into(),
        ));
    }
    if !(m > S::one()) {
        return Err(CatalogError::Param(format!("m = {m} must exceed 1")));
    }
    let (h1, f, k1, domain) = case_data(case, m, big_lambda)?;
    let lambda = (m + S::of_usize(r)) * big_lambda;
    let block1 = first_fiber(r, k1)?;
    let metric = MultiWarpedMetric::new(domain, vec![(h1, block1)])?;
    let potential = Potential::new(f, m, lambda)?;
    potential.validate_for_dimension(metric.dimension())?;

    let mut params = BTreeMap::new();
    params.insert("kind".into(), "single-warp".into());
    params.insert("case".into(), case.name().into());
    params.insert("m".into(), num(m));
    params.insert("r".into(), serde_json::json!(r));
    params.insert("n".into(), serde_json::json!(metric.dimension()));
    params.insert("Lambda".into(), num(big_lambda));
    params.insert("lambda".into(), num(lambda));
    params.insert("rho".into(), num(S::of_usize(r) * big_lambda));
    params.insert("k1".into(), num(k1));

    Ok(ResolvedFamily {
        name: "single-warp".into(),
        metric,
        potential,
        window: case_window(case, big_lambda),
        params,
    })
}

/// Validation-only acceptance of a user-supplied single-warp family:
/// the pair is accepted when the defining-equation residual stays below
/// `1e−8` on the window.
pub fn validate_single_warp<S: Real + Serialize>(
    metric: MultiWarpedMetric<S>,
    potential: Potential<S>,
    window: Interval<S>,
) -> Result<ResolvedFamily<S>, CatalogError> {
    if metric.blocks().len() != 1 {
        return Err(CatalogError::Param(
            "single-warp validation expects exactly one fiber block".into(),
        ));
    }
    let gate = S::of(1e-8);
    for s in crate::analysis::sample_grid(window, 50) {
        let (r0, rb) = qe_residual(&metric, &potential, s)?;
        let worst = rb.iter().fold(r0.abs(), |acc, v| acc.max(v.abs()));
        if worst > gate {
            return Err(CatalogError::Param(format!(
                "not a quasi-Einstein pair: residual {worst} at s = {s} exceeds 1e-8"
            )));
        }
    }
    let mut params = BTreeMap::new();
    params.insert("kind".into(), "single-warp (validated)".into());
    params.insert("m".into(), num(potential.m));
    params.insert("lambda".into(), num(potential.lambda));
    params.insert("n".into(), serde_json::json!(metric.dimension()));
    Ok(ResolvedFamily {
        name: "single-warp".into(),
        metric,
        potential,
        window,
        params,
    })
}

/// Roots of the eigenvalue-ratio quadratic for two nonvanishing warps.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioRoots<S> {
    pub t_plus: S,
    pub t_minus: S,
    pub discriminant: S,
}

/// Coefficients `(a, b, c)` of the ratio quadratic `a t² + b t + c = 0`
/// in `t = X/Y`, with `r2 = n − 1 − r1`.
pub fn ratio_quadratic<S: Real>(m: S, n: usize, r1: usize) -> (S, S, S) {
    let one = S::one();
    let two = S::of(2.0);
    let r2 = n - 1 - r1;
    let r1s = S::of_usize(r1);
    let r2s = S::of_usize(r2);
    let a = (r1s - one) * (m + r1s) / (m + one);
    let b = two * ((r1s - one) * (r2s - one) / (m + one) - (m + S::of_usize(n - 2)) / (m - one));
    let c = (r2s - one) * (m + r2s) / (m + one);
    (a, b, c)
}

/// Solve the ratio relation for `t = X/Y`.
///
/// For `r1 = 1` the quadratic degenerates to a linear relation with the
/// single root `(m−1)(n−3)/(2(m+1))`, returned in both slots.
pub fn derive_ratio_roots<S: Real>(
    m: S,
    n: usize,
    r1: usize,
) -> Result<RatioRoots<S>, CatalogError> {
    if m == S::zero() || m == S::one() || m == -S::one() || m == S::of(2.0) - S::of_usize(n) {
        return Err(CatalogError::Param(format!("m = {m} is excluded")));
    }
    if r1 < 1 || r1 > n - 2 {
        return Err(CatalogError::Param(format!(
            "need 1 <= r1 <= n-2, got r1 = {r1}, n = {n}"
        )));
    }
    let (a, b, c) = ratio_quadratic(m, n, r1);
    let four = S::of(4.0);
    let two = S::of(2.0);
    let disc = b * b - four * a * c;

    let degenerate = |t: S| -> Result<S, CatalogError> {
        let eps = S::of(1e-12);
        if t.abs() <= eps || (t - S::one()).abs() <= eps {
            Err(CatalogError::DegenerateRoot { root: t.as_f64() })
        } else {
            Ok(t)
        }
    };

    if a == S::zero() {
        if b == S::zero() {
            return Err(CatalogError::Param("ratio relation is vacuous".into()));
        }
        // r1 = 1: the relation is linear with root (m−1)(n−3)/(2(m+1))
        let t = degenerate((m - S::one()) * S::of_usize(n - 3) / (two * (m + S::one())))?;
        return Ok(RatioRoots {
            t_plus: t,
            t_minus: t,
            discriminant: disc,
        });
    }
    if disc <= S::zero() {
        return Err(CatalogError::NoRealRoot {
            discriminant: disc.as_f64(),
        });
    }
    let sq = disc.sqrt();
    let t_plus = degenerate((-b + sq) / (two * a))?;
    let t_minus = degenerate((-b - sq) / (two * a))?;
    Ok(RatioRoots {
        t_plus,
        t_minus,
        discriminant: disc,
    })
}

/// Power-law branch coefficients for a ratio root `t`:
/// `b₁ = 1 + 1/t + [(r₁−1) + (r₂−1)/t]/(m+1)`, `b₂ = b₁ t`,
/// `b₃ = m[(r₁−1) + (r₂−1)/t]/((m+1) b₁)`.
pub fn power_law_coefficients<S: Real>(m: S, n: usize, r1: usize, t: S) -> (S, S, S) {
    let one = S::one();
    let r2 = n - 1 - r1;
    let slope = (S::of_usize(r1) - one) + (S::of_usize(r2) - one) / t;
    let b1 = one + t.recip() + slope / (m + one);
    let b2 = b1 * t;
    let b3 = m * slope / ((m + one) * b1);
    (b1, b2, b3)
}

/// Two Ricci-flat fibers with power-law warps, `λ = 0`.
pub fn make_power_law<S: Real + Serialize>(
    m: S,
    n: usize,
    r1: usize,
    c1: S,
    t: S,
) -> Result<ResolvedFamily<S>, CatalogError> {
    let eps = S::of(1e-12);
    if t.abs() <= eps || (t - S::one()).abs() <= eps {
        return Err(CatalogError::DegenerateRoot { root: t.as_f64() });
    }
    let (a, b, c) = ratio_quadratic(m, n, r1);
    let qval = a * t * t + b * t + c;
    let scale = a.abs().max(b.abs()).max(c.abs()) * (S::one() + t * t);
    if qval.abs() > S::of(1e-9) * scale {
        return Err(CatalogError::Param(format!(
            "t = {t} does not satisfy the ratio relation (residual {qval})"
        )));
    }
    let r2 = n - 1 - r1;
    let (b1, b2, b3) = power_law_coefficients(m, n, r1, t);
    if b1 == S::zero() {
        return Err(CatalogError::Param(
            "this root sits on the constant-warp branch".into(),
        ));
    }
    let c2 = c1 * t;

    // domain { b1 s + c1 > 0 }; the second warp argument b2 s + c2 = t(b1 s + c1)
    // vanishes at the same endpoint.
    let boundary = -c1 / b1;
    let domain = if b1 > S::zero() {
        Interval::new(boundary, S::infinity())
    } else {
        Interval::new(S::neg_infinity(), boundary)
    };
    if domain.is_empty() {
        return Err(CatalogError::DomainEmpty);
    }

    let h1 = SmoothFn::affine(b1, c1).powf(b1.recip());
    let h2 = if t > S::zero() {
        SmoothFn::affine(b2, c2).powf(b2.recip())
    } else {
        SmoothFn::affine(-b2, -c2).powf(b2.recip())
    };
    let f = SmoothFn::affine(b1, c1).log().scale(b3);

    let fiber = |r: usize| -> Result<FiberBlock<S>, CatalogError> {
        Ok(if r == 1 {
            FiberBlock::new(1, S::zero(), FiberModel::Line)?
        } else {
            FiberBlock::new(r, S::zero(), FiberModel::FlatTorus)?
        })
    };
    let metric = MultiWarpedMetric::new(domain, vec![(h1, fiber(r1)?), (h2, fiber(r2)?)])?;
    let potential = Potential::new(f, m, S::zero())?;
    potential.validate_for_dimension(n)?;

    // sample window: keep both warp arguments (u and t·u) of order one,
    // clear of the collapsing endpoint where cancellation degrades the
    // closed forms
    let scale = S::one().max(t.abs().recip());
    let map = |u: S| (u * scale - c1) / b1;
    let (w0, w1) = if b1 > S::zero() {
        (map(S::of(0.6)), map(S::of(3.1)))
    } else {
        (map(S::of(3.1)), map(S::of(0.6)))
    };

    let mut params = BTreeMap::new();
    params.insert("kind".into(), "power-law".into());
    params.insert("m".into(), num(m));
    params.insert("n".into(), serde_json::json!(n));
    params.insert("r1".into(), serde_json::json!(r1));
    params.insert("r2".into(), serde_json::json!(r2));
    params.insert("t".into(), num(t));
    params.insert("b1".into(), num(b1));
    params.insert("b2".into(), num(b2));
    params.insert("b3".into(), num(b3));
    params.insert("c1".into(), num(c1));
    params.insert("c2".into(), num(c2));
    params.insert("lambda".into(), num(S::zero()));

    Ok(ResolvedFamily {
        name: "power-law".into(),
        metric,
        potential,
        window: Interval::new(w0, w1),
        params,
    })
}

/// The eigenvalue ratio forced by constancy of `X`, and the residual it
/// leaves in the ratio relation.  A genuine family would need both to hold;
/// the residual equals `(m+1)(n−1)(m+r₂)/((m−1)(m+r₁))`, nonzero for every
/// admissible parameter choice.
pub fn exp_pair_ratio<S: Real>(m: S, n: usize, r1: usize) -> (S, S) {
    let r2 = n - 1 - r1;
    let t0 = -(m + S::of_usize(r2)) / (m + S::of_usize(r1));
    let (a, b, c) = ratio_quadratic(m, n, r1);
    (t0, a * t0 * t0 + b * t0 + c)
}

/// Potential slope of the would-be exponential pair:
/// `f′ = m c₃ [(r₁−1) + (r₂−1) b₄]/(m+1)`.
pub fn exp_pair_slope<S: Real>(m: S, r1: usize, r2: usize, b4: S, c3: S) -> S {
    let one = S::one();
    m * c3 * ((S::of_usize(r1) - one) + (S::of_usize(r2) - one) * b4) / (m + one)
}

/// Constant-ratio branch with two exponential warps.
///
/// The branch requires the warp ratio to simultaneously make `X` constant
/// and satisfy the ratio relation; these are incompatible, so construction
/// always fails with the quantified contradiction.  Kept as an operation so
/// the emptiness is checked, not assumed.
pub fn make_exp_pair<S: Real + Serialize>(
    m: S,
    n: usize,
    r1: usize,
    c3: S,
    t: S,
) -> Result<ResolvedFamily<S>, CatalogError> {
    if c3 == S::zero() {
        return Err(CatalogError::Param("c3 must be nonzero".into()));
    }
    if r1 < 2 || r1 > n.saturating_sub(3) {
        return Err(CatalogError::Param(format!(
            "need 2 <= r1 <= n-3, got r1 = {r1}, n = {n}"
        )));
    }
    let (b1, _, _) = power_law_coefficients(m, n, r1, t);
    let (t0, qres) = exp_pair_ratio(m, n, r1);
    if b1.abs() > S::of(1e-9) {
        return Err(CatalogError::Param(format!(
            "constant-warp branch needs the decay coefficient to vanish: got b1 = {b1} \
             for t = {t}; the only constant-X ratio is t = {t0}"
        )));
    }
    Err(CatalogError::Param(format!(
        "constant-warp branch is inconsistent: the constant-X ratio t = {t0} leaves \
         residual {qres} in the ratio relation (nonzero for every admissible m, n, r1), \
         so no family exists on this branch"
    )))
}

/// Globally complete product shapes, `λ < 0`, warp `exp` or `sinh`:
/// `Λ = λ/(m + k − 1)` with a `k`-dimensional warped factor and an
/// `(n−k)`-dimensional Einstein factor with constant `λ`.
pub fn make_global_product<S: Real + Serialize>(
    case: WarpCase,
    m: S,
    n: usize,
    k: usize,
    lambda: S,
) -> Result<ResolvedFamily<S>, CatalogError> {
    if !matches!(case, WarpCase::Exp | WarpCase::Sinh) {
        return Err(CatalogError::Param(
            "complete product shapes use the exp or sinh warp".into(),
        ));
    }
    if lambda >= S::zero() {
        return Err(CatalogError::Param("lambda must be negative".into()));
    }
    if k < 2 || k > n - 2 {
        return Err(CatalogError::Param(format!(
            "need 2 <= k <= n-2, got k = {k}, n = {n}"
        )));
    }
    let big_lambda = lambda / (m + S::of_usize(k - 1));
    let r2 = n - k;
    let k2 = lambda / S::of_usize(r2 - 1);
    let fiber2 = FiberBlock::space_form(r2, k2)?;
    let mut fam = make_einstein_product(case, m, k - 1, big_lambda, fiber2)?;
    fam.name = format!("complete-{}", case.name());
    fam.params
        .insert("kind".into(), fam.name.clone().into());
    fam.params.insert("k".into(), serde_json::json!(k));
    Ok(fam)
}

/// Parsed key-value family description.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl FamilySpec {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut fields = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CatalogError::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let kind = fields
            .remove("kind")
            .ok_or_else(|| CatalogError::Config("missing 'kind'".into()))?;
        Ok(FamilySpec { kind, fields })
    }

    pub fn to_config_string(&self) -> String {
        let mut out = format!("kind = {}\n", self.kind);
        for (k, v) in &self.fields {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    fn float<S: Real>(&self, key: &str) -> Result<S, CatalogError> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| CatalogError::Config(format!("missing '{key}'")))?;
        raw.parse::<f64>()
            .map(S::of)
            .map_err(|_| CatalogError::Config(format!("'{key}' is not a number: {raw}")))
    }

    fn float_or<S: Real>(&self, key: &str, default: S) -> Result<S, CatalogError> {
        if self.fields.contains_key(key) {
            self.float(key)
        } else {
            Ok(default)
        }
    }

    fn integer(&self, key: &str) -> Result<usize, CatalogError> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| CatalogError::Config(format!("missing '{key}'")))?;
        raw.parse::<usize>()
            .map_err(|_| CatalogError::Config(format!("'{key}' is not an integer: {raw}")))
    }

    /// Construct the family this spec describes.
    ///
    /// The negative-control knobs `perturb_lambda` and `perturb_k2` shift
    /// the potential constant or the second fiber constant *after*
    /// construction, producing a deliberately broken pair for residual
    /// testing.
    pub fn resolve<S: Real + Serialize>(&self) -> Result<ResolvedFamily<S>, CatalogError> {
        let mut fam = self.resolve_exact::<S>()?;
        if self.fields.contains_key("perturb_lambda") {
            let delta = self.float::<S>("perturb_lambda")?;
            fam.potential = Potential::new(
                fam.potential.f.clone(),
                fam.potential.m,
                fam.potential.lambda + delta,
            )?;
            fam.params
                .insert("perturb_lambda".into(), num(delta));
        }
        if self.fields.contains_key("perturb_k2") {
            let delta = self.float::<S>("perturb_k2")?;
            let blocks = fam.metric.blocks();
            if blocks.len() != 2 {
                return Err(CatalogError::Param(
                    "perturb_k2 needs a two-block family".into(),
                ));
            }
            let (h1, b1) = blocks[0].clone();
            let (h2, b2) = blocks[1].clone();
            let bad = FiberBlock::space_form(b2.dim, b2.k + delta)?;
            fam.metric =
                MultiWarpedMetric::new(fam.metric.domain(), vec![(h1, b1), (h2, bad)])?;
            fam.params.insert("perturb_k2".into(), num(delta));
        }
        Ok(fam)
    }

    fn resolve_exact<S: Real + Serialize>(&self) -> Result<ResolvedFamily<S>, CatalogError> {
        match self.kind.as_str() {
            "single-warp" => {
                let case = WarpCase::parse(
                    self.fields
                        .get("case")
                        .ok_or_else(|| CatalogError::Config("missing 'case'".into()))?,
                )?;
                make_single_warp(case, self.float::<S>("m")?, self.integer("r")?, self.float("Lambda")?)
            }
            kind if kind.starts_with("product-") => {
                let case = WarpCase::parse(&kind["product-".len()..])?;
                let m = self.float::<S>("m")?;
                let r = self.integer("r")?;
                let big_lambda = self.float::<S>("Lambda")?;
                let r2 = self.integer("r2")?;
                let lambda = (m + S::of_usize(r)) * big_lambda;
                if r2 < 2 {
                    return Err(CatalogError::Param(
                        "the Einstein factor needs r2 >= 2".into(),
                    ));
                }
                let k2 = lambda / S::of_usize(r2 - 1);
                let fiber2 = match self.fields.get("fiber2").map(|s| s.as_str()) {
                    None | Some("space-form") => FiberBlock::space_form(r2, k2)?,
                    Some("sphere-product") => {
                        FiberBlock::new(r2, k2, FiberModel::SphereProduct)?
                    }
                    Some(other) => {
                        return Err(CatalogError::Config(format!(
                            "unknown fiber2 model '{other}'"
                        )))
                    }
                };
                make_einstein_product(case, m, r, big_lambda, fiber2)
            }
            "power-law" => {
                let m = self.float::<S>("m")?;
                let n = self.integer("n")?;
                let r1 = self.integer("r1")?;
                let c1 = self.float_or("c1", S::one())?;
                let roots = derive_ratio_roots(m, n, r1)?;
                let t = match self.fields.get("root").map(|s| s.as_str()) {
                    None | Some("plus") => roots.t_plus,
                    Some("minus") => roots.t_minus,
                    Some(other) => {
                        return Err(CatalogError::Config(format!(
                            "root must be plus or minus, got '{other}'"
                        )))
                    }
                };
                make_power_law(m, n, r1, c1, t)
            }
            "exp-pair" => {
                let m = self.float::<S>("m")?;
                let n = self.integer("n")?;
                let r1 = self.integer("r1")?;
                let c3 = self.float_or("c3", S::one())?;
                let (t0, _) = exp_pair_ratio(m, n, r1);
                make_exp_pair(m, n, r1, c3, t0)
            }
            kind if kind.starts_with("complete-") => {
                let case = WarpCase::parse(&kind["complete-".len()..])?;
                make_global_product(
                    case,
                    self.float::<S>("m")?,
                    self.integer("n")?,
                    self.integer("k")?,
                    self.float("lambda")?,
                )
            }
            other => Err(CatalogError::Config(format!("unknown kind '{other}'"))),
        }
    }
}

/// One catalog entry for listings: the kind, its parameter schema and the
/// defining formulas.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub parameters: &'static str,
    pub formulas: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            kind: "single-warp",
            parameters: "case = sin|cosh|exp|sinh, m > 1, r >= 3, Lambda (sign per case)",
            formulas: "g = ds^2 + h^2(s) g_E;  h/f per case below;  lambda = (m+r) Lambda",
        },
        CatalogEntry {
            kind: "product-sin",
            parameters: "m > 1, r >= 1, Lambda > 0, r2 >= 2 [, fiber2 = space-form|sphere-product]",
            formulas: "h1 = sin(c s), f = -m log(cos(c s)), c = sqrt(Lambda); k1 = Lambda; second factor Einstein with constant (m+r) Lambda",
        },
        CatalogEntry {
            kind: "product-cosh",
            parameters: "m > 1, r >= 1, Lambda < 0, r2 >= 2 [, fiber2]",
            formulas: "h1 = cosh(c s), f = -m log(sinh(c s)), c = sqrt(-Lambda); k1 = Lambda",
        },
        CatalogEntry {
            kind: "product-exp",
            parameters: "m > 1, r >= 1, Lambda < 0, r2 >= 2 [, fiber2]",
            formulas: "h1 = e^{c s}, f = -m c s, c = sqrt(-Lambda); k1 = 0 (flat fiber)",
        },
        CatalogEntry {
            kind: "product-sinh",
            parameters: "m > 1, r >= 1, Lambda < 0, r2 >= 2 [, fiber2]",
            formulas: "h1 = sinh(c s), f = -m log(cosh(c s)), c = sqrt(-Lambda); k1 = -Lambda",
        },
        CatalogEntry {
            kind: "power-law",
            parameters: "m, n, r1, c1 (default 1), root = plus|minus",
            formulas: "g = ds^2 + (b1 s + c1)^{2/b1} g_flat + (b2 s + c2)^{2/b2} g_flat, f = b3 log(b1 s + c1), lambda = 0; b1, b2, b3 derived from the ratio root",
        },
        CatalogEntry {
            kind: "exp-pair",
            parameters: "m, n, 2 <= r1 <= n-3, c3 != 0",
            formulas: "g = ds^2 + e^{2 c3 s} g_flat + e^{2 b4 c3 s} g_flat (consistency check always fails: the branch is empty)",
        },
        CatalogEntry {
            kind: "complete-exp",
            parameters: "m > 1, n, 2 <= k <= n-2, lambda < 0",
            formulas: "alias of product-exp with Lambda = lambda/(m+k-1), r = k-1, flat first fiber",
        },
        CatalogEntry {
            kind: "complete-sinh",
            parameters: "m > 1, n, 2 <= k <= n-2, lambda < 0",
            formulas: "alias of product-sinh with Lambda = lambda/(m+k-1), r = k-1, spherical first fiber",
        },
    ]
}
