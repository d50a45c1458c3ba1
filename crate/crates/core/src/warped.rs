//! Multiply warped product metrics over an interval and their adapted-frame
//! curvature in closed form.
//!
//! The metric is `ds² + Σ_j h_j(s)² g̃_j` with each fiber `g̃_j` an Einstein
//! metric of dimension `r_j` and Einstein constant `(r_j − 1) k_j`.  In the
//! adapted orthonormal frame the Ricci tensor is diagonal with a radial
//! eigenvalue and one eigenvalue per fiber block, and the whole curvature
//! package (scalar curvature and its derivative, Schouten slots, the
//! harmonic-Weyl obstruction, frame Weyl components) is a pointwise rational
//! expression in the warp jets.

use crate::jet::Jet4;
use crate::scalar::Real;
use crate::smooth::{Interval, SmoothError, SmoothFn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error("warp factor {block} is not positive at s = {s}")]
    NonPositiveWarp { block: usize, s: f64 },
    #[error("invalid fiber block: {0}")]
    InvalidFiber(String),
    #[error("total dimension {n} is below 4")]
    DimensionTooSmall { n: usize },
    #[error("fiber block {block} has no curvature realization for this request")]
    UnsupportedFiber { block: usize },
}

/// Geometric realization of a fiber, fixing its full curvature tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberModel {
    /// One-dimensional factor; no intrinsic curvature.
    Line,
    /// Flat torus/Euclidean factor of any dimension, `k = 0`.
    FlatTorus,
    /// Round sphere of sectional curvature `k > 0`.
    RoundSphere,
    /// Hyperbolic space of sectional curvature `k < 0`.
    Hyperbolic,
    /// Product of two equal round spheres of dimension `r/2` each;
    /// Einstein but not a space form.  Requires even `r ≥ 4` and `k > 0`.
    SphereProduct,
    /// Einstein fiber known only through its constant: supports the
    /// Ricci-level analysis, rejects Weyl and chart requests.
    Abstract,
}

/// Einstein fiber of dimension `r` with fiber Ricci `(r − 1) k · g̃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberBlock<S> {
    pub dim: usize,
    pub k: S,
    pub model: FiberModel,
}

impl<S: Real> FiberBlock<S> {
    pub fn new(dim: usize, k: S, model: FiberModel) -> Result<Self, GeomError> {
        if dim < 1 {
            return Err(GeomError::InvalidFiber("dimension must be >= 1".into()));
        }
        let zero = S::zero();
        match model {
            FiberModel::Line => {
                if dim != 1 {
                    return Err(GeomError::InvalidFiber("line fiber must have r = 1".into()));
                }
            }
            FiberModel::FlatTorus => {
                if dim > 1 && k != zero {
                    return Err(GeomError::InvalidFiber(
                        "flat fiber requires k = 0".into(),
                    ));
                }
            }
            FiberModel::RoundSphere => {
                if dim < 2 || k <= zero {
                    return Err(GeomError::InvalidFiber(
                        "round sphere requires r >= 2 and k > 0".into(),
                    ));
                }
            }
            FiberModel::Hyperbolic => {
                if dim < 2 || k >= zero {
                    return Err(GeomError::InvalidFiber(
                        "hyperbolic fiber requires r >= 2 and k < 0".into(),
                    ));
                }
            }
            FiberModel::SphereProduct => {
                if dim < 4 || !dim.is_multiple_of(2) || k <= zero {
                    return Err(GeomError::InvalidFiber(
                        "sphere product requires even r >= 4 and k > 0".into(),
                    ));
                }
            }
            FiberModel::Abstract => {}
        }
        // the (r-1)k term vanishes for one-dimensional fibers
        let k = if dim == 1 { zero } else { k };
        Ok(FiberBlock { dim, k, model })
    }

    /// Pick the space-form (or line/flat) model matching the sign of `k`.
    pub fn space_form(dim: usize, k: S) -> Result<Self, GeomError> {
        let model = if dim == 1 {
            FiberModel::Line
        } else if k > S::zero() {
            FiberModel::RoundSphere
        } else if k < S::zero() {
            FiberModel::Hyperbolic
        } else {
            FiberModel::FlatTorus
        };
        Self::new(dim, k, model)
    }

    /// Einstein constant of the fiber metric, `(r − 1) k`.
    pub fn einstein_constant(&self) -> S {
        S::of_usize(self.dim - 1) * self.k
    }
}

/// `ds² + Σ_j h_j(s)² g̃_j` over an open interval.
#[derive(Clone, Debug)]
pub struct MultiWarpedMetric<S> {
    domain: Interval<S>,
    blocks: Vec<(SmoothFn<S>, FiberBlock<S>)>,
    n: usize,
}

impl<S: Real> MultiWarpedMetric<S> {
    pub fn new(
        domain: Interval<S>,
        blocks: Vec<(SmoothFn<S>, FiberBlock<S>)>,
    ) -> Result<Self, GeomError> {
        let n = 1 + blocks.iter().map(|(_, b)| b.dim).sum::<usize>();
        if n < 4 {
            return Err(GeomError::DimensionTooSmall { n });
        }
        let domain = blocks
            .iter()
            .fold(domain, |d, (h, _)| d.intersect(&h.domain()));
        if domain.is_empty() {
            return Err(GeomError::InvalidFiber("empty common domain".into()));
        }
        Ok(MultiWarpedMetric { domain, blocks, n })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> Interval<S> {
        self.domain
    }

    pub fn blocks(&self) -> &[(SmoothFn<S>, FiberBlock<S>)] {
        &self.blocks
    }

    /// Warp jets and logarithmic-derivative jets for every block.
    pub fn block_jets(&self, s: S) -> Result<Vec<BlockJets<S>>, GeomError> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(idx, (h, block))| {
                let jet = h.eval_jet(s)?;
                if jet.v <= S::zero() {
                    return Err(GeomError::NonPositiveWarp {
                        block: idx,
                        s: s.as_f64(),
                    });
                }
                Ok(BlockJets::new(jet, *block))
            })
            .collect()
    }
}

/// Per-block data at a point: the warp jet and `ξ = h'/h` with derivatives.
#[derive(Clone, Copy, Debug)]
pub struct BlockJets<S> {
    pub h: Jet4<S>,
    pub fiber: FiberBlock<S>,
    pub xi: S,
    pub xi1: S,
    pub xi2: S,
    pub xi3: S,
}

impl<S: Real> BlockJets<S> {
    fn new(h: Jet4<S>, fiber: FiberBlock<S>) -> Self {
        let c2 = S::of(2.0);
        let h0 = h.v;
        let q1 = h.d1 / h0;
        let q2 = h.d2 / h0;
        let q3 = h.d3 / h0;
        let q4 = h.d4 / h0;
        let xi = q1;
        let xi1 = q2 - xi * xi;
        let xi2 = q3 - q2 * xi - c2 * xi * xi1;
        let xi3 = q4 - q3 * xi - (q3 - q2 * xi) * xi - q2 * xi1 - c2 * xi1 * xi1 - c2 * xi * xi2;
        BlockJets {
            h,
            fiber,
            xi,
            xi1,
            xi2,
            xi3,
        }
    }

    /// `(r − 1) k / h²`
    fn fiber_term(&self) -> S {
        S::of_usize(self.fiber.dim - 1) * self.fiber.k / (self.h.v * self.h.v)
    }
}

/// Curvature data of the adapted orthonormal frame at a single point.
#[derive(Clone, Debug)]
pub struct AdaptedCurvature<S> {
    /// Radial Ricci eigenvalue (along ∂s).
    pub lambda1: S,
    /// Fiber Ricci eigenvalues, one per block (multiplicity `r_j`).
    pub lambda_blocks: Vec<S>,
    /// Logarithmic warp derivatives `ξ_j = h_j'/h_j`.
    pub xi_blocks: Vec<S>,
    /// Scalar curvature and its s-derivative.
    pub r: S,
    pub dr: S,
    /// Schouten slots `λ_x − R/(2(n−1))`.
    pub schouten_radial: S,
    pub schouten_blocks: Vec<S>,
    /// Harmonic-Weyl obstruction per block:
    /// `o_j = λ_j' − (λ₁ − λ_j) ξ_j − R'/(2(n−1))`.
    pub cotton_obstruction: Vec<S>,
}

impl<S: Real> AdaptedCurvature<S> {
    /// Full Cotton tensor norm implied by the obstruction values:
    /// the only nonzero frame components are `C_{1aa} = −C_{a1a} = o_j`.
    pub fn cotton_norm(&self, g: &MultiWarpedMetric<S>) -> S {
        let two = S::of(2.0);
        let mut sum = S::zero();
        for (o, (_, b)) in self.cotton_obstruction.iter().zip(g.blocks()) {
            sum = sum + S::of_usize(b.dim) * *o * *o;
        }
        (two * sum).sqrt()
    }
}

/// Full adapted-frame curvature package at `s`.
pub fn adapted_curvature<S: Real>(
    g: &MultiWarpedMetric<S>,
    s: S,
) -> Result<AdaptedCurvature<S>, GeomError> {
    let jets = g.block_jets(s)?;
    let n = g.dimension();
    let two = S::of(2.0);

    // sums over the n-1 fiber directions, each block counted with multiplicity
    let mut trace_xi = S::zero();
    let mut trace_xi1 = S::zero();
    let mut lambda1 = S::zero();
    let mut lambda1_prime = S::zero();
    for b in &jets {
        let r = S::of_usize(b.fiber.dim);
        trace_xi = trace_xi + r * b.xi;
        trace_xi1 = trace_xi1 + r * b.xi1;
        lambda1 = lambda1 - r * (b.xi1 + b.xi * b.xi);
        lambda1_prime = lambda1_prime - r * (b.xi2 + two * b.xi * b.xi1);
    }

    let mut lambda_blocks = Vec::with_capacity(jets.len());
    let mut lambda_primes = Vec::with_capacity(jets.len());
    let mut xi_blocks = Vec::with_capacity(jets.len());
    for b in &jets {
        let fib = b.fiber_term();
        let lam = -b.xi1 - b.xi * trace_xi + fib;
        let lam_prime = -b.xi2 - b.xi1 * trace_xi - b.xi * trace_xi1 - two * fib * b.xi;
        lambda_blocks.push(lam);
        lambda_primes.push(lam_prime);
        xi_blocks.push(b.xi);
    }

    let mut r_scalar = lambda1;
    let mut dr = lambda1_prime;
    for (b, (lam, lamp)) in jets.iter().zip(lambda_blocks.iter().zip(&lambda_primes)) {
        let mult = S::of_usize(b.fiber.dim);
        r_scalar = r_scalar + mult * *lam;
        dr = dr + mult * *lamp;
    }

    let half_trace = r_scalar / (two * S::of_usize(n - 1));
    let dr_term = dr / (two * S::of_usize(n - 1));
    let schouten_radial = lambda1 - half_trace;
    let schouten_blocks: Vec<S> = lambda_blocks.iter().map(|l| *l - half_trace).collect();
    let cotton_obstruction: Vec<S> = lambda_blocks
        .iter()
        .zip(lambda_primes.iter())
        .zip(xi_blocks.iter())
        .map(|((lam, lamp), xi)| *lamp - (lambda1 - *lam) * *xi - dr_term)
        .collect();

    Ok(AdaptedCurvature {
        lambda1,
        lambda_blocks,
        xi_blocks,
        r: r_scalar,
        dr,
        schouten_radial,
        schouten_blocks,
        cotton_obstruction,
    })
}

/// Radial eigenvalue, per-block eigenvalues and `ξ` values.
pub fn ricci_eigenvalues<S: Real>(
    g: &MultiWarpedMetric<S>,
    s: S,
) -> Result<(S, Vec<S>, Vec<S>), GeomError> {
    let c = adapted_curvature(g, s)?;
    Ok((c.lambda1, c.lambda_blocks, c.xi_blocks))
}

/// Scalar curvature and its derivative.
pub fn scalar_curvature<S: Real>(g: &MultiWarpedMetric<S>, s: S) -> Result<(S, S), GeomError> {
    let c = adapted_curvature(g, s)?;
    Ok((c.r, c.dr))
}

/// Harmonic-Weyl obstruction per block; the metric has vanishing Cotton
/// tensor at `s` exactly when every entry vanishes.
pub fn cotton_obstruction<S: Real>(g: &MultiWarpedMetric<S>, s: S) -> Result<Vec<S>, GeomError> {
    Ok(adapted_curvature(g, s)?.cotton_obstruction)
}

/// Classes of frame directions for the sparse Weyl listing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameSlot {
    Radial,
    Block(usize),
    /// One factor of a sphere-product fiber.
    Factor(usize, usize),
}

/// One orthonormal-frame component `W_{ijij}` with `i`, `j` drawn from the
/// given slot classes, together with the number of unordered index pairs
/// realizing it.
#[derive(Clone, Copy, Debug)]
pub struct WeylComponent<S> {
    pub slots: (FrameSlot, FrameSlot),
    pub value: S,
    pub pairs: usize,
}

#[derive(Clone, Debug)]
pub struct WeylFrame<S> {
    pub components: Vec<WeylComponent<S>>,
    pub norm_sq: S,
}

impl<S: Real> WeylFrame<S> {
    pub fn norm(&self) -> S {
        self.norm_sq.sqrt()
    }
}

/// Nonzero orthonormal-frame Weyl components `W_{ijij}` and the squared norm.
///
/// Requires every block to carry a concrete curvature realization; abstract
/// Einstein fibers only support Ricci-level analysis.
pub fn weyl_frame<S: Real>(g: &MultiWarpedMetric<S>, s: S) -> Result<WeylFrame<S>, GeomError> {
    let jets = g.block_jets(s)?;
    let curv = adapted_curvature(g, s)?;
    let n = g.dimension();
    let nm2 = S::of_usize(n - 2);

    // sectional curvatures of the warped metric per slot-pair class
    // radial-block: -(xi' + xi^2); cross-block: -xi_a xi_b;
    // intra-block: K_fiber/h^2 - xi^2 with K_fiber from the model.
    let schouten = |slot: FrameSlot| -> S {
        match slot {
            FrameSlot::Radial => curv.schouten_radial,
            FrameSlot::Block(j) | FrameSlot::Factor(j, _) => curv.schouten_blocks[j],
        }
    };

    let mut components: Vec<WeylComponent<S>> = Vec::new();
    let mut push = |slots: (FrameSlot, FrameSlot), sec: S, pairs: usize| {
        if pairs == 0 {
            return;
        }
        let w = sec - (schouten(slots.0) + schouten(slots.1)) / nm2;
        components.push(WeylComponent {
            slots,
            value: w,
            pairs,
        });
    };

    for (j, b) in jets.iter().enumerate() {
        let r = b.fiber.dim;
        let sec_rad = -(b.xi1 + b.xi * b.xi);
        push((FrameSlot::Radial, FrameSlot::Block(j)), sec_rad, r);

        // intra-block planes
        if r >= 2 {
            let h2 = b.h.v * b.h.v;
            let xi2 = b.xi * b.xi;
            match b.fiber.model {
                FiberModel::FlatTorus => {
                    push(
                        (FrameSlot::Block(j), FrameSlot::Block(j)),
                        -xi2,
                        r * (r - 1) / 2,
                    );
                }
                FiberModel::RoundSphere | FiberModel::Hyperbolic => {
                    push(
                        (FrameSlot::Block(j), FrameSlot::Block(j)),
                        b.fiber.k / h2 - xi2,
                        r * (r - 1) / 2,
                    );
                }
                FiberModel::SphereProduct => {
                    let q = r / 2;
                    // each factor is a round sphere of radius^2 = (q-1)/((r-1)k)
                    let rho2 = S::of_usize(q - 1) / (S::of_usize(r - 1) * b.fiber.k);
                    let same = rho2.recip() / h2 - xi2;
                    push(
                        (FrameSlot::Factor(j, 0), FrameSlot::Factor(j, 0)),
                        same,
                        q * (q - 1), // both factors together
                    );
                    push(
                        (FrameSlot::Factor(j, 0), FrameSlot::Factor(j, 1)),
                        -xi2,
                        q * q,
                    );
                }
                FiberModel::Abstract => {
                    return Err(GeomError::UnsupportedFiber { block: j })
                }
                FiberModel::Line => unreachable!("line fibers have r = 1"),
            }
        }

        // cross-block planes
        for (l, b2) in jets.iter().enumerate().skip(j + 1) {
            push(
                (FrameSlot::Block(j), FrameSlot::Block(l)),
                -b.xi * b2.xi,
                r * b2.fiber.dim,
            );
        }
    }

    let four = S::of(4.0);
    let norm_sq = components.iter().fold(S::zero(), |acc, c| {
        acc + four * S::of_usize(c.pairs) * c.value * c.value
    });

    Ok(WeylFrame {
        components,
        norm_sq,
    })
}
