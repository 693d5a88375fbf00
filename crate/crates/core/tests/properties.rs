use num_complex::Complex64;
use proptest::prelude::*;
use quillen::chern_calculus::verify::{random_curvature, random_scalar_matrix};
use quillen::chern_calculus::{
    chern_by_delta, classes_from_power_sums, inv_two_pi_i, power_sums_from_classes,
};
use quillen::energy::{k_energy, PotentialPath};
use quillen::form_algebra::{ExtElement, FormMatrix};
use quillen::surface_model::{
    conformal_to_potential, potential_to_conformal, random_field, BandLimited, ConformalTorus, TorusShape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_form(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> ExtElement {
    let mut e = ExtElement::zero(n).unwrap();
    for mask in 0u32..(1 << (2 * n)) {
        if mask.count_ones() as usize != degree {
            continue;
        }
        let hol: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
        let anti: Vec<usize> = (0..n).filter(|b| mask & (1 << (n + b)) != 0).collect();
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        e = e.try_add(&ExtElement::from_indices(n, &hol, &anti, c).unwrap()).unwrap();
    }
    e
}

fn random_even_matrix(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> FormMatrix {
    FormMatrix::from_fn(n, dim, |_, _| {
        let d = 2 * rng.random_range(0..=n);
        Ok(random_form(n, d, rng))
    })
    .unwrap()
}

fn field(shape: TorusShape, band: usize, amp: f64, seed: u64) -> Vec<f64> {
    random_field(shape, BandLimited::new(band, amp), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonicalization_is_idempotent(seed in any::<u64>(), n in 1usize..=3, d in 0usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_form(n, d.min(2 * n), &mut rng);
        let c = e.canonical();
        prop_assert_eq!(c.canonical(), c.clone());
        prop_assert_eq!(c, e);
    }

    #[test]
    fn wedge_degrees_add_and_odd_forms_square_to_zero(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_form(n, 1, &mut rng);
        let b = random_form(n, 2, &mut rng);
        let ab = a.wedge(&b).unwrap();
        if !ab.is_zero() {
            prop_assert_eq!(ab.pure_degree(), Some(3));
        }
        prop_assert!(a.wedge(&a).unwrap().max_abs() < 1e-12);
        if n >= 2 {
            let odd = a.wedge(&b).unwrap();
            prop_assert!(odd.wedge(&odd).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn trace_is_linear(seed in any::<u64>(), n in 1usize..=3, dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_even_matrix(n, dim, &mut rng);
        let b = random_even_matrix(n, dim, &mut rng);
        let c = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = a.scale(c).trace();
        prop_assert!(lhs.distance(&a.trace().scale(c)).unwrap() < 1e-12);
        let sum = a.try_add(&b).unwrap().trace();
        prop_assert!(sum.distance(&a.trace().try_add(&b.trace()).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn even_form_matrices_commute_under_trace(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_even_matrix(n, 2, &mut rng);
        let b = random_even_matrix(n, 2, &mut rng);
        let ab = a.mat_mul(&b).unwrap().trace();
        let ba = b.mat_mul(&a).unwrap().trace();
        prop_assert!(ab.distance(&ba).unwrap() < 1e-10);
    }

    #[test]
    fn newton_round_trip(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = random_curvature(n, &mut rng).unwrap();
        let classes = chern_by_delta(&omega, inv_two_pi_i()).unwrap();
        let sums = power_sums_from_classes(classes.classes(), n, n).unwrap();
        let back = classes_from_power_sums(&sums, n).unwrap();
        for j in 0..=n {
            let scale = 1.0f64.max(classes.class(j).max_abs());
            prop_assert!(back[j].distance(&classes.class(j)).unwrap() / scale < 1e-10);
        }
    }

    #[test]
    fn scalar_variation_matrix_has_even_entries(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_scalar_matrix(n, &mut rng).unwrap();
        prop_assert!(u.require_bidegree(0, 0).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauss_bonnet_for_band_limited_factors(seed in any::<u64>(), band in 1usize..=4, amp in 0.01f64..0.5) {
        let shape = TorusShape::square(16).unwrap();
        let m = ConformalTorus::new(shape, field(shape, band, amp, seed)).unwrap();
        prop_assert!(m.gauss_bonnet_residual() < 1e-8);
    }

    #[test]
    fn curvature_scaling_law(seed in any::<u64>(), c in -1.0f64..1.0) {
        let shape = TorusShape::new(Complex64::new(0.2, 1.1), 16).unwrap();
        let m = ConformalTorus::new(shape, field(shape, 3, 0.3, seed)).unwrap();
        let k = m.gauss_curvature();
        let scaled = m.rescaled(c).gauss_curvature();
        let top = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in k.iter().zip(&scaled) {
            prop_assert!((b - (-2.0 * c).exp() * a).abs() <= 1e-12 * top.max(1.0));
        }
    }

    #[test]
    fn potential_bridge_preserves_class(seed in any::<u64>(), amp in 0.01f64..0.4) {
        let shape = TorusShape::square(16).unwrap();
        let m = ConformalTorus::new(shape, field(shape, 3, amp, seed)).unwrap();
        let p = conformal_to_potential(&m).unwrap();
        let back = potential_to_conformal(&p);
        prop_assert!((back.area() - p.base().area()).abs() < 1e-12 * back.area());
        let err = m.phi().iter().zip(back.phi()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn k_energy_translation_invariance(seed in any::<u64>(), c in -5.0f64..5.0) {
        let shape = TorusShape::square(16).unwrap();
        let base = ConformalTorus::flat(shape);
        let p1 = field(shape, 2, 0.002, seed);
        let p2 = field(shape, 2, 0.002, seed.wrapping_add(1));
        let shift = |p: &[f64]| p.iter().map(|v| v + c).collect::<Vec<_>>();
        let a = k_energy(&PotentialPath::straight(base.clone(), p1.clone(), p2.clone())).unwrap();
        let b = k_energy(&PotentialPath::straight(base, shift(&p1), shift(&p2))).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-10);
    }

    #[test]
    fn k_energy_reparametrization_gauge(seed in any::<u64>(), k in 0.5f64..3.0) {
        let shape = TorusShape::square(16).unwrap();
        let base = ConformalTorus::flat(shape);
        let p1 = field(shape, 2, 0.002, seed);
        let p2 = field(shape, 2, 0.002, seed.wrapping_add(7));
        let path = PotentialPath::straight(base, p1, p2);
        let warped = path.reparametrized(0.0, 1.0, move |v| v.powf(k), move |v| k * v.powf(k - 1.0));
        let a = k_energy(&path).unwrap();
        // σ(v) = v^k is smooth on (0, 1]; its endpoint singularity for k < 1
        // is integrable and Gauss nodes avoid the endpoint.
        let b = k_energy(&warped).unwrap();
        let tol = 3.0 * (a.quadrature_error + b.quadrature_error);
        prop_assert!((a.value - b.value).abs() < tol.max(1e-13), "{} vs {} (tol {tol})", a.value, b.value);
    }
}
