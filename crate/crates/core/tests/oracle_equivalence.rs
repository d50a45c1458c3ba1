//! Cross-checks between the closed-form adapted-frame engine and the
//! finite-difference chart oracle, plus the oracle's own structural
//! identities on nontrivial metrics.

use qev_core::analysis::{chart_cotton_norm, chart_point, chart_qe_residual, qe_residual, Potential};
use qev_core::chart::{realize_chart, tensor4_norm};
use qev_core::smooth::{Interval, SmoothFn};
use qev_core::warped::{
    adapted_curvature, weyl_frame, FiberBlock, FiberModel, MultiWarpedMetric,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Fam = (MultiWarpedMetric<f64>, Interval<f64>);

/// A pool of supported metrics: space forms, cones, exact families and
/// generic (non-Einstein) warpings over realizable fibers.
fn metric_pool(rng: &mut ChaCha8Rng) -> Vec<Fam> {
    let mut pool: Vec<Fam> = Vec::new();
    let id = SmoothFn::<f64>::identity;

    // generic single-block warps over each space-form model
    for (k, model) in [
        (1.0, FiberModel::RoundSphere),
        (0.0, FiberModel::FlatTorus),
        (-1.0, FiberModel::Hyperbolic),
    ] {
        let a = rng.gen_range(0.2..0.6);
        let h = (id() * id() + SmoothFn::constant(1.0 + a)).powf(0.5);
        let b = FiberBlock::new(3, k, model).unwrap();
        pool.push((
            MultiWarpedMetric::new(Interval::all(), vec![(h, b)]).unwrap(),
            Interval::new(0.3, 1.6),
        ));
    }

    // two-block generic metrics (nonzero Cotton and Weyl)
    for _ in 0..3 {
        let a = rng.gen_range(0.3..0.7);
        let c = rng.gen_range(0.3..0.6);
        let h1 = (id() * id() + SmoothFn::constant(1.0)).powf(0.5);
        let h2 = SmoothFn::linear(c).exp().scale(a + 0.8);
        let b1 = FiberBlock::new(3, 1.0, FiberModel::RoundSphere).unwrap();
        let b2 = FiberBlock::new(2, 0.0, FiberModel::FlatTorus).unwrap();
        pool.push((
            MultiWarpedMetric::new(Interval::all(), vec![(h1, b1), (h2, b2)]).unwrap(),
            Interval::new(0.25, 1.5),
        ));
    }

    // exponential warp over hyperbolic fiber times sphere fiber
    let h1 = SmoothFn::linear(0.7).exp();
    let b1 = FiberBlock::new(2, -1.0, FiberModel::Hyperbolic).unwrap();
    let h2 = SmoothFn::constant(1.2);
    let b2 = FiberBlock::new(2, 2.0, FiberModel::RoundSphere).unwrap();
    pool.push((
        MultiWarpedMetric::new(Interval::all(), vec![(h1, b1), (h2, b2)]).unwrap(),
        Interval::new(-0.5, 0.7),
    ));

    // sphere-product fiber (Einstein, not a space form)
    let h = SmoothFn::constant(1.0);
    let b = FiberBlock::new(4, 1.0 / 3.0, FiberModel::SphereProduct).unwrap();
    pool.push((
        MultiWarpedMetric::new(Interval::all(), vec![(h, b)]).unwrap(),
        Interval::new(-0.8, 0.8),
    ));

    // warped sphere-product block with a line factor
    let h = SmoothFn::linear(0.4).cosh();
    let b = FiberBlock::new(4, 0.5, FiberModel::SphereProduct).unwrap();
    let line = FiberBlock::new(1, 0.0, FiberModel::Line).unwrap();
    pool.push((
        MultiWarpedMetric::new(
            Interval::all(),
            vec![(h, b), (SmoothFn::constant(1.0), line)],
        )
        .unwrap(),
        Interval::new(-0.6, 0.9),
    ));

    // exact classified families
    for spec in [
        "kind = product-sin\nm = 2\nr = 2\nLambda = 1\nr2 = 2\n",
        "kind = product-sinh\nm = 2\nr = 2\nLambda = -1\nr2 = 2\n",
        "kind = power-law\nm = 2\nn = 5\nr1 = 1\n",
    ] {
        let fam: qev_core::Family = qev_core::catalog::FamilySpec::parse(spec)
            .unwrap()
            .resolve()
            .unwrap();
        pool.push((fam.metric.clone(), fam.window));
    }

    // a cone and a round sphere
    let h = id().with_domain(0.0, f64::INFINITY);
    let b = FiberBlock::new(3, 1.0, FiberModel::RoundSphere).unwrap();
    pool.push((
        MultiWarpedMetric::new(Interval::new(0.0, f64::INFINITY), vec![(h, b)]).unwrap(),
        Interval::new(0.8, 2.2),
    ));
    let h = id().sin().with_domain(0.0, std::f64::consts::PI);
    let b = FiberBlock::new(4, 1.0, FiberModel::RoundSphere).unwrap();
    pool.push((
        MultiWarpedMetric::new(Interval::new(0.0, std::f64::consts::PI), vec![(h, b)]).unwrap(),
        Interval::new(0.7, 2.3),
    ));

    pool
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[test]
fn engines_agree_on_metric_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pool = metric_pool(&mut rng);
    assert!(pool.len() >= 12);
    for (idx, (g, window)) in pool.iter().enumerate() {
        let field = realize_chart(g, *window).unwrap();
        let margin = 0.18 * window.width();
        let inner_lo = window.lo + margin;
        let inner_hi = window.hi - margin;
        for pt in 0..10 {
            let s = inner_lo + (inner_hi - inner_lo) * (pt as f64 + 0.5) / 10.0;
            let x = chart_point(&field, s, pt);
            let curv = adapted_curvature(g, s).unwrap();
            let bundle = field.curvature_at_refined(&x).unwrap();

            assert!(
                rel(curv.lambda1, bundle.ricci[(0, 0)]) < 1e-5,
                "metric {idx} at s={s}: lambda1 {} vs {}",
                curv.lambda1,
                bundle.ricci[(0, 0)]
            );
            let mut base = 1usize;
            for (lam, (_, blk)) in curv.lambda_blocks.iter().zip(g.blocks()) {
                for c in 0..blk.dim {
                    let slot = base + c;
                    let chart_lam = bundle.ricci[(slot, slot)] / bundle.g[(slot, slot)];
                    assert!(
                        rel(*lam, chart_lam) < 1e-5,
                        "metric {idx} block eigenvalue: {lam} vs {chart_lam}"
                    );
                }
                base += blk.dim;
            }
            assert!(
                rel(curv.r, bundle.r) < 1e-5,
                "metric {idx}: R {} vs {}",
                curv.r,
                bundle.r
            );
            assert!(
                rel(curv.cotton_norm(g), chart_cotton_norm(&bundle)) < 1e-5,
                "metric {idx}: cotton norm"
            );
            let wf = weyl_frame(g, s).unwrap();
            let chart_w = tensor4_norm(&bundle.weyl, &bundle.ginv);
            assert!(
                rel(wf.norm(), chart_w) < 1e-5,
                "metric {idx}: weyl {} vs {}",
                wf.norm(),
                chart_w
            );
        }
    }
}

#[test]
fn harmonic_weyl_equivalence() {
    // obstruction vanishing <=> full chart Cotton norm tiny, across the pool
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (g, window) in metric_pool(&mut rng) {
        let field = realize_chart(&g, window).unwrap();
        let s = window.lo + 0.5 * window.width();
        let x = chart_point(&field, s, 3);
        let curv = adapted_curvature(&g, s).unwrap();
        let worst_obstruction = curv
            .cotton_obstruction
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let chart_norm = chart_cotton_norm(&field.curvature_at_refined(&x).unwrap());
        if worst_obstruction <= 1e-10 {
            assert!(chart_norm <= 1e-6, "closed form 0 but chart {chart_norm:.2e}");
        }
        if chart_norm <= 1e-6 {
            assert!(
                worst_obstruction <= 1e-5,
                "chart 0 but obstruction {worst_obstruction:.2e}"
            );
        }
    }
}

#[test]
fn qe_frame_chart_agreement_on_families() {
    for spec in [
        "kind = product-sin\nm = 2\nr = 2\nLambda = 1\nr2 = 2\n",
        "kind = product-exp\nm = 2\nr = 3\nLambda = -1\nr2 = 2\n",
        "kind = power-law\nm = 2\nn = 5\nr1 = 1\n",
        "kind = complete-sinh\nm = 2\nn = 6\nk = 3\nlambda = -4\n",
    ] {
        let fam: qev_core::Family = qev_core::catalog::FamilySpec::parse(spec)
            .unwrap()
            .resolve()
            .unwrap();
        let field = realize_chart(&fam.metric, fam.window).unwrap();
        let fscalar = fam.potential.realize_scalar_field();
        let s = fam.window.lo + 0.45 * fam.window.width();
        let x = chart_point(&field, s, 2);
        let (q, bundle, _) =
            chart_qe_residual(&field, &fscalar, &x, fam.potential.m, fam.potential.lambda)
                .unwrap();
        let (res_radial, res_blocks) = qe_residual(&fam.metric, &fam.potential, s).unwrap();
        assert!(rel(res_radial, q[(0, 0)]) < 1e-5, "{spec}: radial");
        let mut base = 1usize;
        for (res, (_, blk)) in res_blocks.iter().zip(fam.metric.blocks()) {
            let slot = base;
            let chart_res = q[(slot, slot)] / bundle.g[(slot, slot)];
            assert!(rel(*res, chart_res) < 1e-5, "{spec}: block");
            base += blk.dim;
        }
        // off-diagonal residual slots are structurally zero
        let n = field.n;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(q[(i, j)].abs() < 1e-5, "{spec}: offdiag ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn divergence_of_weyl_recovers_cotton() {
    // C_ijk = -((n-2)/(n-3)) div W on a non-conformally-flat chart
    let id = SmoothFn::<f64>::identity;
    let h1 = (id() * id() + SmoothFn::constant(1.0)).powf(0.5);
    let b1 = FiberBlock::new(3, 1.0, FiberModel::RoundSphere).unwrap();
    let h2 = SmoothFn::linear(0.5).exp();
    let b2 = FiberBlock::new(2, 0.0, FiberModel::FlatTorus).unwrap();
    let g = MultiWarpedMetric::new(Interval::all(), vec![(h1, b1), (h2, b2)]).unwrap();
    let field = realize_chart(&g, Interval::new(0.2, 1.5)).unwrap();
    let x = chart_point(&field, 0.8, 1);
    let n = field.n;
    let bundle = field.curvature_at_refined(&x).unwrap();
    let dw = field.div_weyl(&x).unwrap();
    let fac = (n as f64 - 2.0) / (n as f64 - 3.0);
    let mut worst = 0.0f64;
    let mut cmax = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                cmax = cmax.max(bundle.cotton[(i, j, k)].abs());
                worst = worst.max((bundle.cotton[(i, j, k)] + fac * dw[(i, j, k)]).abs());
            }
        }
    }
    assert!(cmax > 1e-2, "control: Cotton should be nonzero, got {cmax:.2e}");
    assert!(worst < 1e-4, "identity residual {worst:.2e}");
}

#[test]
fn contracted_bianchi_on_generic_chart() {
    let id = SmoothFn::<f64>::identity;
    let h1 = (id() * id() + SmoothFn::constant(1.3)).powf(0.5);
    let b1 = FiberBlock::new(3, 1.0, FiberModel::RoundSphere).unwrap();
    let h2 = SmoothFn::linear(0.4).cosh();
    let b2 = FiberBlock::new(2, -1.0, FiberModel::Hyperbolic).unwrap();
    let g = MultiWarpedMetric::new(Interval::all(), vec![(h1, b1), (h2, b2)]).unwrap();
    let field = realize_chart(&g, Interval::new(0.2, 1.4)).unwrap();
    let x = chart_point(&field, 0.7, 2);
    let div_e: Vec<f64> = field.div_einstein(&x).unwrap();
    for v in div_e {
        assert!(v.abs() < 1e-5, "div E component {v:.2e}");
    }
}

#[test]
fn model_fibers_realize_their_einstein_constants() {
    // chart Ricci of a static (h = 1) fiber block must equal (r-1)k g
    for (r, k, model) in [
        (3, 0.8, FiberModel::RoundSphere),
        (3, -0.6, FiberModel::Hyperbolic),
        (3, 0.0, FiberModel::FlatTorus),
        (4, 0.5, FiberModel::SphereProduct),
    ] {
        let b = FiberBlock::new(r, k, model).unwrap();
        let constant: f64 = b.einstein_constant();
        let g = MultiWarpedMetric::new(
            Interval::all(),
            vec![(SmoothFn::constant(1.0), b)],
        )
        .unwrap();
        let field = realize_chart(&g, Interval::new(-1.0, 1.0)).unwrap();
        let x = chart_point(&field, 0.0, 1);
        let bundle = field.curvature_at_refined(&x).unwrap();
        for i in 1..field.n {
            for j in 1..field.n {
                let expect = constant * bundle.g[(i, j)];
                assert!(
                    (bundle.ricci[(i, j)] - expect).abs() < 1e-6,
                    "{model:?}: Ricci ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn exponential_pair_chart_is_diagonal_with_two_rates() {
    // hand-built pair of exponential warps over flat fibers: the chart
    // metric must be diag(1, e^{2 c3 s} I, e^{2 b4 c3 s} I)
    let c3 = 0.6f64;
    let b4 = -0.55f64;
    let h1 = SmoothFn::linear(c3).exp();
    let h2 = SmoothFn::linear(b4 * c3).exp();
    let f1 = FiberBlock::new(2, 0.0, FiberModel::FlatTorus).unwrap();
    let f2 = FiberBlock::new(2, 0.0, FiberModel::FlatTorus).unwrap();
    let g = MultiWarpedMetric::new(Interval::all(), vec![(h1, f1), (h2, f2)]).unwrap();
    let field = realize_chart(&g, Interval::new(-1.0, 1.0)).unwrap();
    let x = chart_point(&field, 0.4, 0);
    let gm = field.metric_at(&x).unwrap();
    assert!((gm[(0, 0)] - 1.0).abs() < 1e-15);
    for slot in 1..=2 {
        assert!((gm[(slot, slot)] - (2.0 * c3 * 0.4).exp()).abs() < 1e-13);
    }
    for slot in 3..=4 {
        assert!((gm[(slot, slot)] - (2.0 * b4 * c3 * 0.4).exp()).abs() < 1e-13);
    }
    for i in 0..5 {
        for j in 0..5 {
            if i != j {
                assert_eq!(gm[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn complete_product_instance_has_visible_weyl_in_both_engines() {
    let fam: qev_core::Family = qev_core::catalog::FamilySpec::parse(
        "kind = complete-exp\nm = 2\nn = 6\nk = 3\nlambda = -4\n",
    )
    .unwrap()
    .resolve()
    .unwrap();
    let s = fam.window.lo + 0.5 * fam.window.width();
    let closed = weyl_frame(&fam.metric, s).unwrap().norm();
    assert!(closed > 1e-3, "closed-form Weyl norm {closed:.2e}");
    let field = realize_chart(&fam.metric, fam.window).unwrap();
    let x = chart_point(&field, s, 1);
    let bundle = field.curvature_at_refined(&x).unwrap();
    let chart = tensor4_norm(&bundle.weyl, &bundle.ginv);
    assert!(rel(closed, chart) < 1e-5);
}

#[test]
fn random_potentials_keep_frame_chart_consistency() {
    // Hessian of f(s) in the warped chart: radial slot f'', fiber diagonal
    // f' xi_a g_aa
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let id = SmoothFn::<f64>::identity;
    let h = (id() * id() + SmoothFn::constant(1.0)).powf(0.5);
    let b = FiberBlock::new(3, 1.0, FiberModel::RoundSphere).unwrap();
    let g = MultiWarpedMetric::new(Interval::all(), vec![(h, b)]).unwrap();
    let field = realize_chart(&g, Interval::new(0.2, 1.5)).unwrap();
    for _ in 0..5 {
        let a = rng.gen_range(0.5..1.5);
        let f = SmoothFn::linear(a).cos().scale(1.3);
        let p = Potential::new(f, 2.0, 0.0).unwrap();
        let fscalar = p.realize_scalar_field();
        let s = rng.gen_range(0.55..1.15);
        let x = chart_point(&field, s, 4);
        let hd = field.hessian_and_gradient(&fscalar, &x).unwrap();
        let fj = p.f_jet(s).unwrap();
        let jets = g.block_jets(s).unwrap();
        assert!(rel(hd.hess[(0, 0)], fj.d2) < 1e-6);
        for slot in 1..field.n {
            let gval = field.metric_at(&x).unwrap()[(slot, slot)];
            let expect = fj.d1 * jets[0].xi * gval;
            assert!(rel(hd.hess[(slot, slot)], expect) < 1e-5);
        }
    }
}
