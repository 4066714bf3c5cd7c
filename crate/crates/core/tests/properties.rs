use gevrey_core::coeffs::{delta_mismatches, delta_table};
use gevrey_core::cutoff::{bspline, smoothstep};
use gevrey_core::exactnum::{derive_params, q, to_f64};
use gevrey_core::greens::{weak_delta_check, GreensFn, OdeOperator};
use gevrey_core::spectral::{eigen_residual, eigenfunction, inner_product, laguerre, laguerre_explicit, Parity};
use gevrey_core::transform::gevrey_fit;
use num_complex::Complex64;
use num_traits::Zero;
use proptest::prelude::*;

fn parity() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laguerre_recurrence_matches_explicit_sum(k in 0u32..10, num in -9i64..40, den in 1i64..12) {
        let alpha = q(num, den);
        prop_assume!(to_f64(&alpha) > -1.0);
        prop_assert_eq!(laguerre(k, &alpha).unwrap(), laguerre_explicit(k, &alpha).unwrap());
    }

    #[test]
    fn eigenfunctions_solve_the_equation_exactly(par in parity(), k in 0u32..8, n in 0u32..4) {
        prop_assert!(eigen_residual(&eigenfunction(par, k, n)).is_zero());
    }

    #[test]
    fn eigenfunctions_are_orthogonal(par in parity(), a in 0u32..7, b in 0u32..7, n in 0u32..3) {
        let (f, g) = (eigenfunction(par, a, n), eigenfunction(par, b, n));
        let ip = inner_product(&f, &g).unwrap();
        if a == b {
            prop_assert!(to_f64(&ip.coeff) > 0.0);
        } else {
            prop_assert!(ip.coeff.is_zero());
        }
    }

    #[test]
    fn derived_exponents_are_consistent(n in 0u32..7, m in 1u32..7) {
        let p = derive_params(n, m).unwrap();
        let mq = m as i64;
        prop_assert_eq!(&p.theta, &q(2 * mq, 2 * mq - 1));
        prop_assert_eq!(&p.s0, &p.theta);
        prop_assert!(p.c0 > 0.0 && p.c0.is_finite());
        prop_assert!((p.c1.re - p.c0).abs() <= 1e-12 * p.c0);
    }

    #[test]
    fn green_modes_are_roots_in_the_upper_half_plane(m in 1u32..5, e in 0.5f64..20.0) {
        let g = GreensFn::new(OdeOperator::new(m, e));
        prop_assert_eq!(g.modes.len(), m as usize);
        let scale = g.op.c.powi(2 * m as i32);
        for mu in &g.modes {
            prop_assert!(mu.im > 0.0);
            let symbol = (Complex64::i() * mu).powu(2 * m) + g.op.const_term();
            prop_assert!(symbol.norm() <= 1e-11 * scale, "symbol {}", symbol);
        }
    }

    #[test]
    fn smoothstep_halves_sum_to_one(x in -0.5f64..1.5, a in 1u32..4) {
        let s = smoothstep(x, a, 0).deriv(0) + smoothstep(1.0 - x, a, 0).deriv(0);
        prop_assert!((s - 1.0).abs() <= 1e-14);
        let v = smoothstep(x, a, 0).deriv(0);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn bspline_partition_of_unity(order in 1usize..9, x in 0.0f64..1.0) {
        let s: f64 = (0..order).map(|j| bspline(order, x + j as f64)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn green_functions_invert_the_operator(m in 1u32..4, e in 0.5f64..12.0) {
        let g = GreensFn::new(OdeOperator::new(m, e));
        let rep = weak_delta_check(&g, &[(0.0, 1.0), (0.4, 1.3)]).unwrap();
        prop_assert!(rep.max_residual <= 1e-6, "residual {}", rep.max_residual);
    }

    #[test]
    fn delta_table_matches_its_oracle(n in 0u32..4) {
        prop_assert!(delta_mismatches(n, 5, 4).unwrap().is_empty());
        prop_assert_eq!(delta_table(n, 5, 4).to_json(), delta_table(n, 5, 4).to_json());
    }

    #[test]
    fn gevrey_fit_recovers_clean_profiles(s in 1.2f64..3.0, c in 0.5f64..3.0, a in -5.0f64..5.0) {
        let eta: Vec<f64> = (0..200).map(|k| 40.0 * (20.0f64).powf(k as f64 / 199.0)).collect();
        let y: Vec<f64> = eta.iter().map(|e| a - c * e.powf(1.0 / s)).collect();
        let fit = gevrey_fit(&eta, &y, false).unwrap();
        prop_assert!((fit.s_hat - s).abs() <= 0.01 * s, "s {} vs {}", fit.s_hat, s);
        prop_assert!((fit.c_hat - c).abs() <= 0.01 * c, "c {} vs {}", fit.c_hat, c);
    }
}
