use proptest::prelude::*;
use stochastic_volterra::grid::TimeGrid;
use stochastic_volterra::kernel::KernelSpec;
use stochastic_volterra::regularity::{kappa, kappa_integrals, kappa_integrals_quadrature, predicted_exponent};
use stochastic_volterra::resolvent::solve_scalar;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riesz_resolvent_is_a_contraction(rho in 1.1f64..1.9, log_mu in -1.0f64..2.0) {
        let grid = TimeGrid::uniform(2.0, 256).unwrap();
        let table = solve_scalar(&KernelSpec::riesz(rho), 10f64.powf(log_mu), &grid).unwrap();
        prop_assert_eq!(table.s[0], 1.0);
        prop_assert!(table.sup_abs() <= 1.0 + 1e-6);
    }

    #[test]
    fn kappa_closed_forms_match_quadrature(k in -1.95f64..-0.05, t in 0.1f64..3.0, h in 1e-3f64..1.0) {
        let closed = kappa_integrals(k, t, h).unwrap();
        let (q1, q2) = kappa_integrals_quadrature(k, t, h).unwrap();
        prop_assert!(((closed.i1 - q1) / q1).abs() < 1e-9);
        prop_assert!(((closed.i2 - q2) / q2).abs() < 1e-9);
    }

    #[test]
    fn exponent_never_exceeds_one_half(r in -1.0f64..0.99, s in -1.0f64..1.0, rho in 1.01f64..1.99) {
        let e = predicted_exponent(kappa(r, s, rho));
        prop_assert!(e <= 0.5);
    }
}
