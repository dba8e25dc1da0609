use chemostat::equilibria::{
    classify, coexistence_equilibrium, critical_dilution, critical_dilution_bounds, inequality_certificates,
    lambda_at, stability_report, two_species_equilibrium, two_species_lambda, washout, Classification, Verdict,
};
use chemostat::{ChemostatModel, Monod, MonodKinetics};
use proptest::prelude::*;

fn kinetics(max_n: usize) -> impl Strategy<Value = MonodKinetics> {
    prop::collection::vec((0.2f64..5.0, 0.05f64..3.0), 1..=max_n)
        .prop_map(|v| MonodKinetics::new(v.into_iter().map(|(m, a)| Monod::new(m, a)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn critical_dilution_bracketed_and_non_increasing(k in kinetics(8), e1 in 0.0f64..4.0, de in 0.0f64..4.0) {
        let (a, b) = (critical_dilution(&k, e1).unwrap(), critical_dilution(&k, e1 + de).unwrap());
        prop_assert!(b <= a + 1e-12);
        let (lo, hi) = critical_dilution_bounds(&k, e1);
        prop_assert!(lo - 1e-12 <= a && a <= hi + 1e-12);
    }

    #[test]
    fn coexistence_point_is_consistent(k in kinetics(8), eps in 0.01f64..3.0, frac in 0.02f64..0.98) {
        let uc = critical_dilution(&k, eps).unwrap();
        let model = ChemostatModel::new(k, eps, frac * uc).unwrap();
        prop_assume!(classify(&model).unwrap() == Classification::Coexistence);
        let eq = coexistence_equilibrium(&model).unwrap();
        prop_assert!(eq.x.iter().all(|&v| v > 0.0));
        prop_assert!(eq.s > 0.0 && eq.s < 1.0);
        prop_assert!((eq.x.iter().sum::<f64>() + eq.s - 1.0).abs() <= 1e-10);
        prop_assert!(lambda_at(&model, eq.s).abs() <= 1e-11);
        let d = model.drift(&eq.state());
        prop_assert!(d.dx.iter().chain([&d.ds]).all(|v| v.abs() <= 1e-9));
        for c in inequality_certificates(&model, Some(&eq)).unwrap() {
            prop_assert!(c.slack() >= -1e-9, "{:?}", c);
        }
    }

    #[test]
    fn stability_dichotomy(k in kinetics(6), eps in 0.01f64..3.0, frac in 0.05f64..1.6) {
        let uc = critical_dilution(&k, eps).unwrap();
        let u = frac * uc;
        prop_assume!((u - uc).abs() > 1e-3);
        let model = ChemostatModel::new(k, eps, u).unwrap();
        let wo = stability_report(&model, &washout(&model)).unwrap();
        if u < uc {
            let eq = coexistence_equilibrium(&model).unwrap();
            let rep = stability_report(&model, &eq).unwrap();
            prop_assert!(rep.jacobian_abscissa < 0.0);
            prop_assert!(rep.a_abscissa.unwrap() < 0.0);
            prop_assert_eq!(wo.verdict, Verdict::Unstable);
        } else {
            prop_assert!(wo.jacobian_abscissa < 0.0);
            prop_assert_eq!(wo.verdict, Verdict::GasClaimed);
        }
    }

    #[test]
    fn two_species_solver_matches_closed_form(k in kinetics(2), eps in 0.0f64..2.0, s in 0.0f64..1.0, u in 0.01f64..1.0) {
        prop_assume!(k.n() == 2);
        let model = ChemostatModel::new(k.clone(), eps, u).unwrap();
        let closed = two_species_lambda(&k, s, u, eps).unwrap();
        prop_assert!((model.assemble_b(s).top_eigenvalue() - closed).abs() <= 1e-12 * (1.0 + closed.abs()));
    }

    #[test]
    fn two_species_equilibrium_matches_solver(k in kinetics(2), eps in 0.01f64..2.0, frac in 0.05f64..0.95) {
        prop_assume!(k.n() == 2);
        let uc = critical_dilution(&k, eps).unwrap();
        let model = ChemostatModel::new(k.clone(), eps, frac * uc).unwrap();
        let eq = coexistence_equilibrium(&model).unwrap();
        let closed = two_species_equilibrium(&k, frac * uc, eps).unwrap();
        prop_assert!((eq.s - closed.s).abs() <= 1e-10);
        prop_assert!((eq.x[0] - closed.x1).abs() <= 1e-8);
        prop_assert!((eq.x[1] - closed.x2).abs() <= 1e-8);
    }
}
