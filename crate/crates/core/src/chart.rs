//! Brute-force coordinate-chart curvature engine.
//!
//! Everything here is computed from pointwise evaluations of the metric
//! matrix alone, with 4th-order central finite differences: Christoffel
//! symbols, the full Riemann tensor, Ricci, scalar, Schouten, Weyl, Cotton,
//! covariant Hessians and the D-tensor.  It is deliberately independent of
//! the closed-form adapted-frame engine so the two can check each other.
//!
//! Index conventions are pinned by the trivial checks: the unit round sphere
//! has `R_{ijij} = +g_ii g_jj` in coordinates (sectional curvature +1) and
//! the Weyl tensor of any space form vanishes.

use crate::scalar::Real;
use crate::smooth::Interval;
use crate::tensor::{Mat, Ten3, Ten4};
use crate::warped::{FiberModel, GeomError, MultiWarpedMetric};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("finite-difference stencil leaves the valid box at coordinate {coord}")]
    StencilOutOfRange { coord: usize },
    #[error("metric is not positive definite at a queried point")]
    NonPositiveDefinite,
    #[error("dimension {n} exceeds the dense-tensor limit 8")]
    DimensionTooLarge { n: usize },
    #[error("dimension {n} is too small for this operation (need >= {need})")]
    DimensionTooSmall { n: usize, need: usize },
    #[error("fiber block {block} has no chart realization")]
    UnsupportedFiber { block: usize },
    #[error("field evaluation failed: {0}")]
    Eval(String),
}

impl From<GeomError> for ChartError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::UnsupportedFiber { block } => ChartError::UnsupportedFiber { block },
            other => ChartError::Eval(other.to_string()),
        }
    }
}

type MetricFn<S> = dyn Fn(&[S]) -> Result<Mat<S>, ChartError> + Send + Sync;
type ScalarFn<S> = dyn Fn(&[S]) -> Result<S, ChartError> + Send + Sync;

/// A metric given as a coordinate field over a box.
#[derive(Clone)]
pub struct ChartMetricField<S> {
    pub n: usize,
    metric: Arc<MetricFn<S>>,
    pub box_lo: Vec<S>,
    pub box_hi: Vec<S>,
    pub fd_step: Vec<S>,
}

/// A scalar function over the same chart.
#[derive(Clone)]
pub struct ScalarField<S> {
    f: Arc<ScalarFn<S>>,
}

impl<S: Real> ScalarField<S> {
    pub fn from_fn(f: impl Fn(&[S]) -> Result<S, ChartError> + Send + Sync + 'static) -> Self {
        ScalarField { f: Arc::new(f) }
    }

    pub fn eval(&self, x: &[S]) -> Result<S, ChartError> {
        (self.f)(x)
    }
}

/// Gradient, covariant Hessian and Laplace-Beltrami value of a scalar.
#[derive(Clone, Debug)]
pub struct HessianData<S> {
    /// `∂_i φ`
    pub grad_lower: Vec<S>,
    /// `g^{ij} ∂_j φ`
    pub grad_upper: Vec<S>,
    /// `∇²φ_{ij} = ∂_i∂_j φ − Γ^k_{ij} ∂_k φ`
    pub hess: Mat<S>,
    pub laplacian: S,
}

/// All curvature tensors at one point, dense and all-lower unless noted.
#[derive(Clone, Debug)]
pub struct CurvatureBundle<S> {
    pub g: Mat<S>,
    pub ginv: Mat<S>,
    /// `Γ^k_{ij}` indexed `(k, i, j)`.
    pub gamma: Ten3<S>,
    pub riemann: Ten4<S>,
    pub ricci: Mat<S>,
    pub r: S,
    pub schouten: Mat<S>,
    pub weyl: Ten4<S>,
    /// `C_{ijk} = ∇_i A_{jk} − ∇_j A_{ik}`.
    pub cotton: Ten3<S>,
    /// `E_{ij} = R_{ij} − (R/2) g_{ij}`.
    pub einstein: Mat<S>,
}

const D1_OFFSETS: [i32; 4] = [-2, -1, 1, 2];

fn d1_weights<S: Real>() -> [S; 4] {
    [
        S::of(1.0 / 12.0),
        S::of(-8.0 / 12.0),
        S::of(8.0 / 12.0),
        S::of(-1.0 / 12.0),
    ]
}

impl<S: Real> ChartMetricField<S> {
    pub fn new(
        n: usize,
        metric: impl Fn(&[S]) -> Result<Mat<S>, ChartError> + Send + Sync + 'static,
        box_lo: Vec<S>,
        box_hi: Vec<S>,
        fd_step: Vec<S>,
    ) -> Result<Self, ChartError> {
        if n > 8 {
            return Err(ChartError::DimensionTooLarge { n });
        }
        assert_eq!(box_lo.len(), n);
        assert_eq!(box_hi.len(), n);
        assert_eq!(fd_step.len(), n);
        Ok(ChartMetricField {
            n,
            metric: Arc::new(metric),
            box_lo,
            box_hi,
            fd_step,
        })
    }

    /// Same field with all finite-difference steps multiplied by `c`.
    pub fn with_step_scale(&self, c: S) -> Self {
        let mut f = self.clone();
        for h in f.fd_step.iter_mut() {
            *h = *h * c;
        }
        f
    }

    pub fn metric_at(&self, x: &[S]) -> Result<Mat<S>, ChartError> {
        let g = (self.metric)(x)?;
        if !g.is_finite() || !g.is_positive_definite() {
            return Err(ChartError::NonPositiveDefinite);
        }
        Ok(g)
    }

    /// Check that every stencil touched within `layers` nested first-derivative
    /// passes stays inside the valid box.
    pub fn ensure_margin(&self, x: &[S], layers: usize) -> Result<(), ChartError> {
        let reach = S::of_usize(2 * layers);
        for i in 0..self.n {
            let r = reach * self.fd_step[i];
            if x[i] - r < self.box_lo[i] || x[i] + r > self.box_hi[i] {
                return Err(ChartError::StencilOutOfRange { coord: i });
            }
        }
        Ok(())
    }

    /// A point comfortably inside the box (for sampling helpers).
    pub fn center(&self) -> Vec<S> {
        let half = S::of(0.5);
        (0..self.n)
            .map(|i| (self.box_lo[i] + self.box_hi[i]) * half)
            .collect()
    }

    fn d_metric(&self, x: &[S]) -> Result<Ten3<S>, ChartError> {
        let n = self.n;
        let w = d1_weights::<S>();
        let mut out = Ten3::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                let g = self.metric_at(&y)?;
                for j in 0..n {
                    for k in 0..n {
                        out[(i, j, k)] = out[(i, j, k)] + *wt * g[(j, k)] / h;
                    }
                }
            }
            y[i] = x[i];
        }
        Ok(out)
    }

    fn dd_metric(&self, x: &[S]) -> Result<Ten4<S>, ChartError> {
        let n = self.n;
        let w1 = d1_weights::<S>();
        // 4th-order pure second derivative: (-1, 16, -30, 16, -1)/12h^2
        let w2 = [
            S::of(-1.0 / 12.0),
            S::of(16.0 / 12.0),
            S::of(-30.0 / 12.0),
            S::of(16.0 / 12.0),
            S::of(-1.0 / 12.0),
        ];
        let off2: [i32; 5] = [-2, -1, 0, 1, 2];
        let mut out = Ten4::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let hi = self.fd_step[i];
            // diagonal
            for (off, wt) in off2.iter().zip(w2.iter()) {
                y[i] = x[i] + S::of(*off as f64) * hi;
                let g = self.metric_at(&y)?;
                for k in 0..n {
                    for l in 0..n {
                        out[(i, i, k, l)] = out[(i, i, k, l)] + *wt * g[(k, l)] / (hi * hi);
                    }
                }
            }
            y[i] = x[i];
            // cross terms: tensor product of two first-derivative stencils
            for j in (i + 1)..n {
                let hj = self.fd_step[j];
                for (oi, wi) in D1_OFFSETS.iter().zip(w1.iter()) {
                    for (oj, wj) in D1_OFFSETS.iter().zip(w1.iter()) {
                        y[i] = x[i] + S::of(*oi as f64) * hi;
                        y[j] = x[j] + S::of(*oj as f64) * hj;
                        let g = self.metric_at(&y)?;
                        let c = *wi * *wj / (hi * hj);
                        for k in 0..n {
                            for l in 0..n {
                                out[(i, j, k, l)] = out[(i, j, k, l)] + c * g[(k, l)];
                            }
                        }
                    }
                }
                y[i] = x[i];
                y[j] = x[j];
                for k in 0..n {
                    for l in 0..n {
                        out[(j, i, k, l)] = out[(i, j, k, l)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Christoffel symbols `Γ^k_{ij}` and the inverse metric.
    pub fn christoffel(&self, x: &[S]) -> Result<(Ten3<S>, Mat<S>), ChartError> {
        let g = self.metric_at(x)?;
        let ginv = g.inverse().ok_or(ChartError::NonPositiveDefinite)?;
        let dg = self.d_metric(x)?;
        Ok((christoffel_from(&dg, &ginv), ginv))
    }

    /// Full curvature bundle, Cotton included.
    pub fn curvature_at(&self, x: &[S]) -> Result<CurvatureBundle<S>, ChartError> {
        // Cotton differentiates the Schouten field, which itself uses a
        // two-layer stencil: require a four-layer margin overall.
        self.ensure_margin(x, 4)?;
        let mut bundle = self.core_bundle(x)?;
        bundle.cotton = self.cotton_at(x, &bundle)?;
        Ok(bundle)
    }

    /// Richardson-extrapolated bundle: combines evaluations at step `h` and
    /// `h/2` to cancel the leading error term of the 4th-order scheme.
    pub fn curvature_at_refined(&self, x: &[S]) -> Result<CurvatureBundle<S>, ChartError> {
        let coarse = self.curvature_at(x)?;
        let fine = self.with_step_scale(S::of(0.5)).curvature_at(x)?;
        Ok(richardson(coarse, fine))
    }

    /// Everything except Cotton (no nested stencils).
    fn core_bundle(&self, x: &[S]) -> Result<CurvatureBundle<S>, ChartError> {
        self.ensure_margin(x, 2)?;
        let n = self.n;
        let g = self.metric_at(x)?;
        let ginv = g.inverse().ok_or(ChartError::NonPositiveDefinite)?;
        let dg = self.d_metric(x)?;
        let ddg = self.dd_metric(x)?;
        let gamma = christoffel_from(&dg, &ginv);

        let half = S::of(0.5);
        let mut riemann = Ten4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = half
                            * (ddg[(i, l, j, k)] + ddg[(j, k, i, l)]
                                - ddg[(i, k, j, l)]
                                - ddg[(j, l, i, k)]);
                        for m in 0..n {
                            for p in 0..n {
                                v = v + g[(m, p)]
                                    * (gamma[(m, i, l)] * gamma[(p, j, k)]
                                        - gamma[(m, i, k)] * gamma[(p, j, l)]);
                            }
                        }
                        riemann[(i, j, k, l)] = v;
                    }
                }
            }
        }

        let mut ricci = Mat::zeros(n);
        for j in 0..n {
            for l in 0..n {
                let mut v = S::zero();
                for i in 0..n {
                    for k in 0..n {
                        v = v + ginv[(i, k)] * riemann[(i, j, k, l)];
                    }
                }
                ricci[(j, l)] = v;
            }
        }
        let mut r = S::zero();
        for i in 0..n {
            for j in 0..n {
                r = r + ginv[(i, j)] * ricci[(i, j)];
            }
        }

        let schouten = schouten_from(&ricci, &g, r, n);

        let mut einstein = ricci.clone();
        einstein.add_scaled(&g, -r * half);

        let mut weyl = Ten4::zeros(n);
        if n >= 3 {
            let nm2 = S::of_usize(n - 2);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            weyl[(i, j, k, l)] = riemann[(i, j, k, l)]
                                - (schouten[(i, k)] * g[(j, l)] + schouten[(j, l)] * g[(i, k)]
                                    - schouten[(i, l)] * g[(j, k)]
                                    - schouten[(j, k)] * g[(i, l)])
                                    / nm2;
                        }
                    }
                }
            }
        }

        Ok(CurvatureBundle {
            g,
            ginv,
            gamma,
            riemann,
            ricci,
            r,
            schouten,
            weyl,
            cotton: Ten3::zeros(n),
            einstein,
        })
    }

    /// Schouten tensor alone (used as the differentiated field for Cotton).
    fn schouten_at(&self, x: &[S]) -> Result<Mat<S>, ChartError> {
        let n = self.n;
        let g = self.metric_at(x)?;
        let ginv = g.inverse().ok_or(ChartError::NonPositiveDefinite)?;
        let dg = self.d_metric(x)?;
        let ddg = self.dd_metric(x)?;
        let gamma = christoffel_from(&dg, &ginv);
        let half = S::of(0.5);
        let mut ricci = Mat::zeros(n);
        for j in 0..n {
            for l in 0..n {
                let mut v = S::zero();
                for i in 0..n {
                    for k in 0..n {
                        let mut rm = half
                            * (ddg[(i, l, j, k)] + ddg[(j, k, i, l)]
                                - ddg[(i, k, j, l)]
                                - ddg[(j, l, i, k)]);
                        for m in 0..n {
                            for p in 0..n {
                                rm = rm
                                    + g[(m, p)]
                                        * (gamma[(m, i, l)] * gamma[(p, j, k)]
                                            - gamma[(m, i, k)] * gamma[(p, j, l)]);
                            }
                        }
                        v = v + ginv[(i, k)] * rm;
                    }
                }
                ricci[(j, l)] = v;
            }
        }
        let mut r = S::zero();
        for i in 0..n {
            for j in 0..n {
                r = r + ginv[(i, j)] * ricci[(i, j)];
            }
        }
        Ok(schouten_from(&ricci, &g, r, n))
    }

    fn cotton_at(&self, x: &[S], bundle: &CurvatureBundle<S>) -> Result<Ten3<S>, ChartError> {
        let n = self.n;
        let w = d1_weights::<S>();
        // ∂_i A_{jk}
        let mut da = Ten3::<S>::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                let a = self.schouten_at(&y)?;
                for j in 0..n {
                    for k in 0..n {
                        da[(i, j, k)] = da[(i, j, k)] + *wt * a[(j, k)] / h;
                    }
                }
            }
            y[i] = x[i];
        }
        // ∇_i A_{jk} then antisymmetrize
        let gamma = &bundle.gamma;
        let a = &bundle.schouten;
        let mut nabla = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = da[(i, j, k)];
                    for l in 0..n {
                        v = v - gamma[(l, i, j)] * a[(l, k)] - gamma[(l, i, k)] * a[(j, l)];
                    }
                    nabla[(i, j, k)] = v;
                }
            }
        }
        let mut cotton = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    cotton[(i, j, k)] = nabla[(i, j, k)] - nabla[(j, i, k)];
                }
            }
        }
        Ok(cotton)
    }

    /// Gradient, covariant Hessian and Laplacian of a scalar field.
    pub fn hessian_and_gradient(
        &self,
        phi: &ScalarField<S>,
        x: &[S],
    ) -> Result<HessianData<S>, ChartError> {
        self.ensure_margin(x, 2)?;
        let n = self.n;
        let (gamma, ginv) = self.christoffel(x)?;
        let grad_lower = self.d_scalar(phi, x)?;
        let ddphi = self.dd_scalar(phi, x)?;
        let mut hess = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = ddphi[(i, j)];
                for k in 0..n {
                    v = v - gamma[(k, i, j)] * grad_lower[k];
                }
                hess[(i, j)] = v;
            }
        }
        let mut grad_upper = vec![S::zero(); n];
        for i in 0..n {
            for j in 0..n {
                grad_upper[i] = grad_upper[i] + ginv[(i, j)] * grad_lower[j];
            }
        }
        let mut laplacian = S::zero();
        for i in 0..n {
            for j in 0..n {
                laplacian = laplacian + ginv[(i, j)] * hess[(i, j)];
            }
        }
        Ok(HessianData {
            grad_lower,
            grad_upper,
            hess,
            laplacian,
        })
    }

    /// Richardson-extrapolated Hessian data (steps `h` and `h/2` combined).
    pub fn hessian_and_gradient_refined(
        &self,
        phi: &ScalarField<S>,
        x: &[S],
    ) -> Result<HessianData<S>, ChartError> {
        let coarse = self.hessian_and_gradient(phi, x)?;
        let fine = self
            .with_step_scale(S::of(0.5))
            .hessian_and_gradient(phi, x)?;
        let c16 = S::of(16.0 / 15.0);
        let cm1 = S::of(-1.0 / 15.0);
        let n = self.n;
        let mut hess = Mat::zeros(n);
        let mut grad_lower = vec![S::zero(); n];
        let mut grad_upper = vec![S::zero(); n];
        for i in 0..n {
            grad_lower[i] = c16 * fine.grad_lower[i] + cm1 * coarse.grad_lower[i];
            grad_upper[i] = c16 * fine.grad_upper[i] + cm1 * coarse.grad_upper[i];
            for j in 0..n {
                hess[(i, j)] = c16 * fine.hess[(i, j)] + cm1 * coarse.hess[(i, j)];
            }
        }
        let laplacian = c16 * fine.laplacian + cm1 * coarse.laplacian;
        Ok(HessianData {
            grad_lower,
            grad_upper,
            hess,
            laplacian,
        })
    }

    fn d_scalar(&self, phi: &ScalarField<S>, x: &[S]) -> Result<Vec<S>, ChartError> {
        let n = self.n;
        let w = d1_weights::<S>();
        let mut out = vec![S::zero(); n];
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                out[i] = out[i] + *wt * phi.eval(&y)? / h;
            }
            y[i] = x[i];
        }
        Ok(out)
    }

    fn dd_scalar(&self, phi: &ScalarField<S>, x: &[S]) -> Result<Mat<S>, ChartError> {
        let n = self.n;
        let w1 = d1_weights::<S>();
        let w2 = [
            S::of(-1.0 / 12.0),
            S::of(16.0 / 12.0),
            S::of(-30.0 / 12.0),
            S::of(16.0 / 12.0),
            S::of(-1.0 / 12.0),
        ];
        let off2: [i32; 5] = [-2, -1, 0, 1, 2];
        let mut out = Mat::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let hi = self.fd_step[i];
            for (off, wt) in off2.iter().zip(w2.iter()) {
                y[i] = x[i] + S::of(*off as f64) * hi;
                out[(i, i)] = out[(i, i)] + *wt * phi.eval(&y)? / (hi * hi);
            }
            y[i] = x[i];
            for j in (i + 1)..n {
                let hj = self.fd_step[j];
                let mut acc = S::zero();
                for (oi, wi) in D1_OFFSETS.iter().zip(w1.iter()) {
                    for (oj, wj) in D1_OFFSETS.iter().zip(w1.iter()) {
                        y[i] = x[i] + S::of(*oi as f64) * hi;
                        y[j] = x[j] + S::of(*oj as f64) * hj;
                        acc = acc + *wi * *wj * phi.eval(&y)? / (hi * hj);
                    }
                }
                y[i] = x[i];
                y[j] = x[j];
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        Ok(out)
    }

    /// `∇_i (∇²φ)_{jk}`: one covariant derivative of the Hessian field.
    pub fn nabla_hessian(
        &self,
        phi: &ScalarField<S>,
        x: &[S],
    ) -> Result<Ten3<S>, ChartError> {
        self.ensure_margin(x, 4)?;
        let n = self.n;
        let w = d1_weights::<S>();
        let mut dh = Ten3::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                let hd = self.hessian_and_gradient(phi, &y)?;
                for j in 0..n {
                    for k in 0..n {
                        dh[(i, j, k)] = dh[(i, j, k)] + *wt * hd.hess[(j, k)] / h;
                    }
                }
            }
            y[i] = x[i];
        }
        let (gamma, _) = self.christoffel(x)?;
        let hess = self.hessian_and_gradient(phi, x)?.hess;
        let mut out = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dh[(i, j, k)];
                    for l in 0..n {
                        v = v - gamma[(l, i, j)] * hess[(l, k)] - gamma[(l, i, k)] * hess[(j, l)];
                    }
                    out[(i, j, k)] = v;
                }
            }
        }
        Ok(out)
    }

    /// `∇_i R_{jk}`: one covariant derivative of the Ricci field.
    pub fn nabla_ricci(&self, x: &[S]) -> Result<Ten3<S>, ChartError> {
        self.ensure_margin(x, 4)?;
        let n = self.n;
        let w = d1_weights::<S>();
        let mut dric = Ten3::zeros(n);
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                let b = self.core_bundle(&y)?;
                for j in 0..n {
                    for k in 0..n {
                        dric[(i, j, k)] = dric[(i, j, k)] + *wt * b.ricci[(j, k)] / h;
                    }
                }
            }
            y[i] = x[i];
        }
        let b = self.core_bundle(x)?;
        let mut out = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dric[(i, j, k)];
                    for l in 0..n {
                        v = v - b.gamma[(l, i, j)] * b.ricci[(l, k)]
                            - b.gamma[(l, i, k)] * b.ricci[(j, l)];
                    }
                    out[(i, j, k)] = v;
                }
            }
        }
        Ok(out)
    }

    /// `∂_i R`: coordinate gradient of the scalar curvature field.
    pub fn grad_scalar_curvature(&self, x: &[S]) -> Result<Vec<S>, ChartError> {
        self.ensure_margin(x, 4)?;
        let n = self.n;
        let w = d1_weights::<S>();
        let mut out = vec![S::zero(); n];
        let mut y = x.to_vec();
        for i in 0..n {
            let h = self.fd_step[i];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[i] = x[i] + S::of(*off as f64) * h;
                out[i] = out[i] + *wt * self.core_bundle(&y)?.r / h;
            }
            y[i] = x[i];
        }
        Ok(out)
    }

    /// Divergence of the Weyl tensor on the last slot, `∇^l W_{ijkl}`.
    pub fn div_weyl(&self, x: &[S]) -> Result<Ten3<S>, ChartError> {
        if self.n < 4 {
            return Err(ChartError::DimensionTooSmall { n: self.n, need: 4 });
        }
        self.ensure_margin(x, 4)?;
        let n = self.n;
        let w = d1_weights::<S>();
        let mut dweyl = vec![Ten4::zeros(n); n];
        let mut y = x.to_vec();
        for m in 0..n {
            let h = self.fd_step[m];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[m] = x[m] + S::of(*off as f64) * h;
                let b = self.core_bundle(&y)?;
                dweyl[m].add_scaled(&b.weyl, *wt / h);
            }
            y[m] = x[m];
        }
        let b = self.core_bundle(x)?;
        let mut out = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = S::zero();
                    for l in 0..n {
                        for m in 0..n {
                            // ∇_m W_{ijkl}
                            let mut nw = dweyl[m][(i, j, k, l)];
                            for p in 0..n {
                                nw = nw
                                    - b.gamma[(p, m, i)] * b.weyl[(p, j, k, l)]
                                    - b.gamma[(p, m, j)] * b.weyl[(i, p, k, l)]
                                    - b.gamma[(p, m, k)] * b.weyl[(i, j, p, l)]
                                    - b.gamma[(p, m, l)] * b.weyl[(i, j, k, p)];
                            }
                            v = v + b.ginv[(l, m)] * nw;
                        }
                    }
                    out[(i, j, k)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Contracted second Bianchi check: `∇^j E_{ij}`.
    pub fn div_einstein(&self, x: &[S]) -> Result<Vec<S>, ChartError> {
        self.ensure_margin(x, 4)?;
        let n = self.n;
        let w = d1_weights::<S>();
        let mut de = Ten3::zeros(n);
        let mut y = x.to_vec();
        for m in 0..n {
            let h = self.fd_step[m];
            for (off, wt) in D1_OFFSETS.iter().zip(w.iter()) {
                y[m] = x[m] + S::of(*off as f64) * h;
                let b = self.core_bundle(&y)?;
                for i in 0..n {
                    for j in 0..n {
                        de[(m, i, j)] = de[(m, i, j)] + *wt * b.einstein[(i, j)] / h;
                    }
                }
            }
            y[m] = x[m];
        }
        let b = self.core_bundle(x)?;
        let mut out = vec![S::zero(); n];
        for i in 0..n {
            let mut v = S::zero();
            for j in 0..n {
                for m in 0..n {
                    let mut ne = de[(m, i, j)];
                    for p in 0..n {
                        ne = ne
                            - b.gamma[(p, m, i)] * b.einstein[(p, j)]
                            - b.gamma[(p, m, j)] * b.einstein[(i, p)];
                    }
                    v = v + b.ginv[(j, m)] * ne;
                }
            }
            out[i] = v;
        }
        Ok(out)
    }

    /// The 3-tensor built from Schouten, Einstein tensor and `∇f`:
    /// `D_{ijk} = (A_{ij}∇_k f − A_{ik}∇_j f)/(n−2)
    ///          + (g_{ij}E_{kl} − g_{ik}E_{jl})∇^l f /((n−1)(n−2))`.
    pub fn d_tensor(
        &self,
        f: &ScalarField<S>,
        x: &[S],
    ) -> Result<(Ten3<S>, S), ChartError> {
        if self.n < 3 {
            return Err(ChartError::DimensionTooSmall { n: self.n, need: 3 });
        }
        let n = self.n;
        let b = self.core_bundle(x)?;
        let hd = self.hessian_and_gradient(f, x)?;
        let nm2 = S::of_usize(n - 2);
        let nm1nm2 = S::of_usize(n - 1) * nm2;
        // E_{k}{}^{l}∇_l f = E_{kl} g^{lm} ∂_m f
        let mut e_grad = vec![S::zero(); n];
        for k in 0..n {
            for l in 0..n {
                e_grad[k] = e_grad[k] + b.einstein[(k, l)] * hd.grad_upper[l];
            }
        }
        let mut d = Ten3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    d[(i, j, k)] = (b.schouten[(i, j)] * hd.grad_lower[k]
                        - b.schouten[(i, k)] * hd.grad_lower[j])
                        / nm2
                        + (b.g[(i, j)] * e_grad[k] - b.g[(i, k)] * e_grad[j]) / nm1nm2;
                }
            }
        }
        let norm = tensor3_norm(&d, &b.ginv);
        Ok((d, norm))
    }
}

/// Combine a step-`h` and a step-`h/2` bundle: `(16 B_{h/2} − B_h)/15`.
/// Both are 4th-order accurate, so the combination cancels the leading term.
fn richardson<S: Real>(coarse: CurvatureBundle<S>, fine: CurvatureBundle<S>) -> CurvatureBundle<S> {
    let c16 = S::of(16.0 / 15.0);
    let cm1 = S::of(-1.0 / 15.0);
    let mut out = fine;
    out.gamma.add_scaled(&out.gamma.clone(), c16 - S::one());
    out.gamma.add_scaled(&coarse.gamma, cm1);
    out.riemann.add_scaled(&out.riemann.clone(), c16 - S::one());
    out.riemann.add_scaled(&coarse.riemann, cm1);
    out.ricci.add_scaled(&out.ricci.clone(), c16 - S::one());
    out.ricci.add_scaled(&coarse.ricci, cm1);
    out.r = c16 * out.r + cm1 * coarse.r;
    out.schouten.add_scaled(&out.schouten.clone(), c16 - S::one());
    out.schouten.add_scaled(&coarse.schouten, cm1);
    out.weyl.add_scaled(&out.weyl.clone(), c16 - S::one());
    out.weyl.add_scaled(&coarse.weyl, cm1);
    out.cotton.add_scaled(&out.cotton.clone(), c16 - S::one());
    out.cotton.add_scaled(&coarse.cotton, cm1);
    out.einstein.add_scaled(&out.einstein.clone(), c16 - S::one());
    out.einstein.add_scaled(&coarse.einstein, cm1);
    out
}

fn christoffel_from<S: Real>(dg: &Ten3<S>, ginv: &Mat<S>) -> Ten3<S> {
    let n = ginv.n;
    let half = S::of(0.5);
    let mut gamma = Ten3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = S::zero();
                for l in 0..n {
                    v = v + ginv[(k, l)] * (dg[(i, j, l)] + dg[(j, i, l)] - dg[(l, i, j)]);
                }
                gamma[(k, i, j)] = half * v;
            }
        }
    }
    gamma
}

fn schouten_from<S: Real>(ricci: &Mat<S>, g: &Mat<S>, r: S, n: usize) -> Mat<S> {
    let mut a = ricci.clone();
    a.add_scaled(g, -r / (S::of(2.0) * S::of_usize(n - 1)));
    a
}

/// Metric-aware norm of a 3-tensor: `sqrt(T_{ijk} T_{lmn} g^{il} g^{jm} g^{kn})`.
pub fn tensor3_norm<S: Real>(t: &Ten3<S>, ginv: &Mat<S>) -> S {
    let n = t.n;
    let mut sum = S::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        for p in 0..n {
                            sum = sum
                                + t[(i, j, k)]
                                    * t[(l, m, p)]
                                    * ginv[(i, l)]
                                    * ginv[(j, m)]
                                    * ginv[(k, p)];
                        }
                    }
                }
            }
        }
    }
    sum.abs().sqrt()
}

/// Metric-aware norm of a 4-tensor.
pub fn tensor4_norm<S: Real>(t: &Ten4<S>, ginv: &Mat<S>) -> S {
    let n = t.n;
    // contract pairwise through g^{-1}: fold one index at a time
    let mut sum = S::zero();
    // brute force is 8 nested loops; keep n small. Use the diagonal trick:
    // norms here are only needed on charts where g is block diagonal but not
    // necessarily diagonal, so do the full contraction.
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                for d in 0..n {
                                    sum = sum
                                        + t[(i, j, k, l)]
                                            * t[(a, b, c, d)]
                                            * ginv[(i, a)]
                                            * ginv[(j, b)]
                                            * ginv[(k, c)]
                                            * ginv[(l, d)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    sum.abs().sqrt()
}

/// Chart realization of a multiply warped metric.
///
/// Coordinates are `(s, y_1 …)` with each fiber realized in its model chart:
/// flat factors in Cartesian coordinates, spheres stereographically away
/// from the poles, hyperbolic factors in the upper half space.
pub fn realize_chart<S: Real>(
    g: &MultiWarpedMetric<S>,
    s_window: Interval<S>,
) -> Result<ChartMetricField<S>, ChartError> {
    let n = g.dimension();
    if n > 8 {
        return Err(ChartError::DimensionTooLarge { n });
    }
    let window = g.domain().intersect(&s_window);
    if window.is_empty() {
        return Err(ChartError::Eval("empty sampling window".into()));
    }

    type FiberEval<S> = Box<dyn Fn(&[S], &mut Mat<S>, usize) + Send + Sync>;

    struct FiberChart<S> {
        dim: usize,
        lo: Vec<S>,
        hi: Vec<S>,
        eval: FiberEval<S>,
    }

    fn stereo_block<S: Real>(
        scale2: S,
        coords: std::ops::Range<usize>,
    ) -> impl Fn(&[S], &mut Mat<S>, usize) + Send + Sync {
        // metric scale2 * 4 δ / (1+|y|^2)^2 on the given coordinate span
        move |y: &[S], out: &mut Mat<S>, base: usize| {
            let mut norm2 = S::zero();
            for c in coords.clone() {
                norm2 = norm2 + y[c] * y[c];
            }
            let one = S::one();
            let den = (one + norm2) * (one + norm2);
            let factor = S::of(4.0) * scale2 / den;
            for c in coords.clone() {
                out[(base + c, base + c)] = factor;
            }
        }
    }

    let mut fibers: Vec<FiberChart<S>> = Vec::new();
    for (idx, (_, block)) in g.blocks().iter().enumerate() {
        let r = block.dim;
        let chart = match block.model {
            FiberModel::Line | FiberModel::FlatTorus => FiberChart {
                dim: r,
                lo: vec![S::of(-0.6); r],
                hi: vec![S::of(0.6); r],
                eval: Box::new(move |_y, out, base| {
                    for c in 0..r {
                        out[(base + c, base + c)] = S::one();
                    }
                }),
            },
            FiberModel::RoundSphere => {
                // radius^2 = 1/k
                let rho2 = block.k.recip();
                FiberChart {
                    dim: r,
                    lo: vec![S::of(-0.25); r],
                    hi: vec![S::of(0.25); r],
                    eval: Box::new(stereo_block(rho2, 0..r)),
                }
            }
            FiberModel::Hyperbolic => {
                let scale = (-block.k).recip();
                FiberChart {
                    dim: r,
                    lo: {
                        let mut lo = vec![S::of(-0.3); r];
                        lo[r - 1] = S::of(0.6);
                        lo
                    },
                    hi: {
                        let mut hi = vec![S::of(0.3); r];
                        hi[r - 1] = S::of(1.6);
                        hi
                    },
                    eval: Box::new(move |y: &[S], out: &mut Mat<S>, base: usize| {
                        let last = y[r - 1];
                        let f = scale / (last * last);
                        for c in 0..r {
                            out[(base + c, base + c)] = f;
                        }
                    }),
                }
            }
            FiberModel::Abstract => {
                return Err(ChartError::UnsupportedFiber { block: idx });
            }
            FiberModel::SphereProduct => {
                let q = r / 2;
                if q < 2 {
                    return Err(ChartError::UnsupportedFiber { block: idx });
                }
                let rho2 = S::of_usize(q - 1) / (S::of_usize(r - 1) * block.k);
                let first = stereo_block(rho2, 0..q);
                let second = stereo_block(rho2, q..r);
                FiberChart {
                    dim: r,
                    lo: vec![S::of(-0.25); r],
                    hi: vec![S::of(0.25); r],
                    eval: Box::new(move |y, out, base| {
                        first(y, out, base);
                        second(y, out, base);
                    }),
                }
            }
        };
        fibers.push(chart);
    }

    let warps: Vec<crate::smooth::SmoothFn<S>> =
        g.blocks().iter().map(|(h, _)| h.clone()).collect();

    let mut box_lo = vec![window.lo];
    let mut box_hi = vec![window.hi];
    for f in &fibers {
        box_lo.extend_from_slice(&f.lo);
        box_hi.extend_from_slice(&f.hi);
    }

    // step: 1e-2 of the local chart scale per coordinate
    let fd_step: Vec<S> = box_lo
        .iter()
        .zip(&box_hi)
        .map(|(lo, hi)| {
            let w = (*hi - *lo).min(S::of(2.0));
            S::of(0.01) * w.max(S::of(0.2))
        })
        .collect();

    let dims: Vec<usize> = fibers.iter().map(|f| f.dim).collect();
    let evals: Vec<FiberEval<S>> = fibers.into_iter().map(|f| f.eval).collect();

    let metric = move |x: &[S]| -> Result<Mat<S>, ChartError> {
        let mut out = Mat::zeros(n);
        out[(0, 0)] = S::one();
        let s = x[0];
        let mut base = 1usize;
        for ((h, dim), eval) in warps.iter().zip(&dims).zip(&evals) {
            let hv = h
                .value(s)
                .map_err(|e| ChartError::Eval(e.to_string()))?;
            let h2 = hv * hv;
            let mut fib = Mat::zeros(n);
            eval(&x[base..base + dim], &mut fib, 0);
            for a in 0..*dim {
                for b in 0..*dim {
                    out[(base + a, base + b)] = h2 * fib[(a, b)];
                }
            }
            base += dim;
        }
        Ok(out)
    };

    ChartMetricField::new(n, metric, box_lo, box_hi, fd_step)
}

/// Deterministic interior sample points of a chart box, margin wide enough
/// for the deepest stencils.
pub fn interior_points<S: Real>(
    field: &ChartMetricField<S>,
    count: usize,
) -> Vec<Vec<S>> {
    let n = field.n;
    let mut pts = Vec::with_capacity(count);
    for t in 0..count {
        let frac = S::of(0.25) + S::of(0.5) * S::of_usize(t + 1) / S::of_usize(count + 1);
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            // stagger coordinates so points are generic
            let shift = S::of(0.043) * S::of_usize((i * (t + 3)) % 7);
            let f = frac + shift - S::of(0.08);
            let f = f.max(S::of(0.2)).min(S::of(0.8));
            x.push(field.box_lo[i] + f * (field.box_hi[i] - field.box_lo[i]));
        }
        pts.push(x);
    }
    pts
}
