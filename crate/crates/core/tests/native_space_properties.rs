//! Subspace-projection properties on nested center sets.

use nalgebra::DVector;
use native_critic::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_box() -> BoxDomain {
    BoxDomain::symmetric(2, 1.0).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0]
}

struct Nested {
    kernel: KernelSpec,
    coarse: CenterSet,
    coarse_gf: GrammianFactor,
    fine: CenterSet,
    fine_gf: GrammianFactor,
    embed: Vec<usize>,
}

fn nested(kernel: KernelSpec) -> Nested {
    let coarse = CenterSet::uniform_grid(&unit_box(), 3).unwrap();
    let fine = CenterSet::uniform_grid(&unit_box(), 5).unwrap();
    let coarse_gf = grammian(&kernel, &coarse).unwrap();
    let fine_gf = grammian(&kernel, &fine).unwrap();
    let embed = coarse.embedding_into(&fine).unwrap();
    Nested {
        kernel,
        coarse,
        coarse_gf,
        fine,
        fine_gf,
        embed,
    }
}

fn random_fine_element(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> HNElement {
    HNElement::new(DVector::from_fn(n, |_, _| {
        (rng.random::<f64>() * 2.0 - 1.0) * scale
    }))
}

#[test]
fn projection_interpolates_fine_targets_at_coarse_centers() {
    let s = nested(KernelSpec::sobolev_matern(2, 2.5, 0.8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let target = random_fine_element(&mut rng, s.fine.len(), 1.0);
        let samples: Vec<f64> = s
            .coarse
            .centers()
            .iter()
            .map(|c| target.eval(&s.kernel, &s.fine, c).unwrap())
            .collect();
        let proj = project(&s.coarse_gf, &samples).unwrap();
        for (i, c) in s.coarse.centers().iter().enumerate() {
            let v = proj.eval(&s.kernel, &s.coarse, c).unwrap();
            let scale = samples[i].abs().max(1e-3);
            assert!(
                (v - samples[i]).abs() <= 1e-8 * scale,
                "center {i}: {v} vs {}",
                samples[i]
            );
        }
    }
}

#[test]
fn projection_beats_random_subspace_elements_in_h_norm() {
    let s = nested(KernelSpec::gaussian(2, 0.8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    // difference norms are computed in the joint (fine) coordinate system
    let diff_norm = |fine_coeffs: &DVector<f64>, coarse_coeffs: &DVector<f64>| -> f64 {
        let mut d = fine_coeffs.clone();
        for (ci, &fi) in s.embed.iter().enumerate() {
            d[fi] -= coarse_coeffs[ci];
        }
        h_norm(&HNElement::new(d), &s.fine_gf).unwrap()
    };
    for _ in 0..20 {
        let target = random_fine_element(&mut rng, s.fine.len(), 1.0);
        let samples: Vec<f64> = s
            .coarse
            .centers()
            .iter()
            .map(|c| target.eval(&s.kernel, &s.fine, c).unwrap())
            .collect();
        let proj = project(&s.coarse_gf, &samples).unwrap();
        let best = diff_norm(target.coeffs(), proj.coeffs());
        for _ in 0..50 {
            let rival = random_fine_element(&mut rng, s.coarse.len(), 1.0);
            let other = diff_norm(target.coeffs(), rival.coeffs());
            assert!(best <= other + 1e-10, "projection lost: {best} vs {other}");
        }
    }
}

#[test]
fn power_function_bounds_pointwise_projection_error() {
    let s = nested(KernelSpec::sobolev_matern(2, 2.5, 0.8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let target = random_fine_element(&mut rng, s.fine.len(), 1.0);
    let samples: Vec<f64> = s
        .coarse
        .centers()
        .iter()
        .map(|c| target.eval(&s.kernel, &s.fine, c).unwrap())
        .collect();
    let proj = project(&s.coarse_gf, &samples).unwrap();
    // exact residual H-norm from the orthogonal split
    let full = h_norm(&target, &s.fine_gf).unwrap();
    let inner = h_norm(&proj, &s.coarse_gf).unwrap();
    let residual_norm = (full * full - inner * inner).max(0.0).sqrt();
    for _ in 0..100 {
        let x = random_point(&mut rng);
        let err = (target.eval(&s.kernel, &s.fine, &x).unwrap()
            - proj.eval(&s.kernel, &s.coarse, &x).unwrap())
        .abs();
        let bound = power_function(&s.kernel, &s.coarse, &s.coarse_gf, &x).unwrap() * residual_norm;
        assert!(
            err <= bound * (1.0 + 1e-6) + 1e-12,
            "at {x:?}: err {err} exceeds bound {bound}"
        );
    }
}

#[test]
fn power_function_nonnegative_and_zero_at_centers() {
    let kernel = KernelSpec::inverse_multiquadric(2, 1.0, 1.0, -0.5).unwrap();
    let cs = CenterSet::uniform_grid(&unit_box(), 4).unwrap();
    let gf = grammian(&kernel, &cs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..200 {
        let x = random_point(&mut rng);
        assert!(power_function(&kernel, &cs, &gf, &x).unwrap() >= 0.0);
    }
    for c in cs.centers() {
        assert!(power_function(&kernel, &cs, &gf, c).unwrap() <= 1e-7);
    }
}

#[test]
fn fill_distance_and_sup_power_shrink_along_nested_refinements() {
    let kernel = KernelSpec::sobolev_matern(2, 2.5, 0.8).unwrap();
    let mut prev_h = f64::INFINITY;
    let mut prev_p = f64::INFINITY;
    for m in [3usize, 5, 9] {
        let cs = CenterSet::uniform_grid(&unit_box(), m).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        let h = fill_distance(&cs, 81).unwrap();
        let p = sup_power(&kernel, &cs, &gf, 81).unwrap().value;
        assert!(h < prev_h, "fill distance did not shrink at m={m}");
        assert!(p < prev_p, "sup power did not shrink at m={m}");
        prev_h = h;
        prev_p = p;
    }
}

#[test]
fn uniform_grid_fill_distance_matches_fine_grid_oracle() {
    // the exact fill distance of an m x m grid is half the cell diagonal
    for m in [3usize, 5] {
        let cs = CenterSet::uniform_grid(&unit_box(), m).unwrap();
        let exact = 2.0 / (m - 1) as f64 * 0.5 * 2.0f64.sqrt();
        let est = fill_distance(&cs, 101).unwrap();
        let oracle = fill_distance(&cs, 401).unwrap();
        let cell = 2.0 / 100.0;
        assert!(est <= exact + 1e-12);
        assert!((oracle - exact).abs() <= cell, "oracle {oracle} vs exact {exact}");
        assert!((est - oracle).abs() <= cell * 2.0f64.sqrt());
    }
}

#[test]
fn doubling_bound_dominates_manufactured_projection_residual() {
    // v = Lu lies in the uncertainty class with radius |u|_L2; its
    // projection residual in H-norm must sit under sqrt(vol) sup_P radius.
    let kernel = KernelSpec::sobolev_matern(2, 2.5, 0.8).unwrap();
    let domain = unit_box();
    let u = |x: &[f64]| (1.2 * x[0]).cos() * (0.8 * x[1] + 0.3).sin() + 0.4;
    let quad_res = 61;
    let radius = l2_norm_on_grid(&domain, quad_res, u).unwrap();

    // represent v = Lu approximately in a fine subspace to get a
    // computable H-norm of the residual
    let fine = CenterSet::uniform_grid(&domain, 9).unwrap();
    let fine_gf = grammian(&kernel, &fine).unwrap();
    let v_samples: Vec<f64> = fine
        .centers()
        .iter()
        .map(|c| integral_operator(&kernel, &domain, quad_res, u, c).unwrap())
        .collect();
    let v_fine = project(&fine_gf, &v_samples).unwrap();

    let coarse = CenterSet::uniform_grid(&domain, 3).unwrap();
    let coarse_gf = grammian(&kernel, &coarse).unwrap();
    let embed = coarse.embedding_into(&fine).unwrap();
    let coarse_samples: Vec<f64> = embed.iter().map(|&fi| v_samples[fi]).collect();
    let proj = project(&coarse_gf, &coarse_samples).unwrap();

    let full = h_norm(&v_fine, &fine_gf).unwrap();
    let inner = h_norm(&proj, &coarse_gf).unwrap();
    let residual = (full * full - inner * inner).max(0.0).sqrt();

    let bound = doubling_bound(&kernel, &coarse, &coarse_gf, 81, radius).unwrap();
    assert!(
        residual <= bound,
        "residual {residual} exceeds doubling bound {bound}"
    );
    // and the bound is not vacuous by orders of magnitude at this scale
    assert!(bound < 100.0 * residual.max(1e-6), "bound {bound} vs residual {residual}");
}
