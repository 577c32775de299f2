mod common;

use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use common::{random_polynomial, rng, spread};
use torus_psido::lattice::{aniso_bracket, bracket, forward_difference, multi_indices_up_to, TruncationBox};
use torus_psido::linalg::{polar, spectral_norm};
use torus_psido::symbol::{
    class_norm, class_norm_with_order, extend, parabolicity_estimate, resolvent_symbol, ExtensionKernel,
    LambdaPlan, Symbol,
};

const RAYS: [f64; 3] = [0.0, FRAC_PI_2, -FRAC_PI_2];
const MODULI: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extension_interpolates(seed in any::<u64>(), n in 1usize..=2, d in 1usize..=2, k in prop::collection::vec(-20i64..=20, 2)) {
        let a = random_polynomial(n, d, 2, &mut rng(seed));
        let xi: Vec<f64> = k[..n].iter().map(|&x| x as f64).collect();
        prop_assert_eq!(extend(&a, &ExtensionKernel::default(), &xi), a.eval(&k[..n]));
    }

    #[test]
    fn class_report_is_consistent(seed in any::<u64>(), n in 1usize..=2, radius in 2u32..=10) {
        let a = random_polynomial(n, 2, 2, &mut rng(seed)).with_order(2.0);
        let rep = class_norm(&a, TruncationBox::new(n, radius)).unwrap();
        prop_assert!(rep.constants.iter().all(|c| c.constant.is_finite() && c.constant >= 0.0));
        let max = rep.constants.iter().map(|c| c.constant).fold(0.0, f64::max);
        prop_assert_eq!(rep.norm, max);
    }

    #[test]
    fn kappa_is_monotone_under_refinement(scale in 0.25f64..4.0, jordan in any::<bool>()) {
        let base = if jordan { Symbol::jordan(1, 2, 2.0) } else { Symbol::shifted_laplacian(1, 1) };
        let a = base.scaled(scale.into());
        let mut previous = 0.0;
        for per_decade in [2, 4, 8, 16] {
            let plan = LambdaPlan { radius: 16, per_decade, ..LambdaPlan::default() };
            let kappa = parabolicity_estimate(&a, &plan).kappa_estimate;
            prop_assert!(kappa >= previous);
            previous = kappa;
        }
    }
}

#[test]
fn bracket_power_class_norm_is_uniform_in_the_box() {
    for n in 1..=2usize {
        for s in [-1.0, 0.5, 2.0, 3.0] {
            let a = Symbol::bracket_power(n, 1, s);
            let norms: Vec<f64> = [8u32, 16, 32, 64]
                .iter()
                .map(|&k| class_norm(&a, TruncationBox::new(n, k)).unwrap().norm)
                .collect();
            for w in norms.windows(2) {
                let ratio = w[1] / w[0];
                assert!((0.9..=1.1).contains(&ratio), "n={n} s={s}: norms {norms:?}");
            }
        }
    }
}

/// |Delta^gamma (a + lambda)^{-1}| <k,lambda>^{2m} <k>^{|gamma| - m} stays bounded over the sweep.
///
/// The box must reach |k| ~ |lambda|^{1/m}, where the suprema sit.
#[test]
fn resolvent_differences_are_bounded() {
    let radius = 256;
    for a in [Symbol::shifted_laplacian(1, 1), Symbol::jordan(1, 2, 2.0)] {
        let m = a.order;
        let rho = a.regularity;
        let table_box = TruncationBox::new(1, radius + rho);
        for gamma in multi_indices_up_to(1, rho).into_iter().filter(|g| g.order() >= 1) {
            for theta in RAYS {
                let maxima: Vec<f64> = MODULI
                    .iter()
                    .map(|&r| {
                        let lambda = polar(r, theta);
                        let (b, _) = resolvent_symbol(&a, lambda, table_box).unwrap();
                        TruncationBox::new(1, radius)
                            .points()
                            .map(|k| {
                                let diff = forward_difference(&b, &gamma, &k).unwrap();
                                spectral_norm(&diff)
                                    * aniso_bracket(&k, lambda, m).powf(2.0 * m)
                                    * bracket(&k).powf(gamma.order() as f64 - m)
                            })
                            .fold(0.0, f64::max)
                    })
                    .collect();
                assert!(spread(&maxima) < 4.0, "{} gamma {:?} arg {theta}: {maxima:?}", a.label, gamma.0);
            }
        }
    }
}

/// (1 + |lambda|) |(a + lambda)^{-1}|_{S^{0,rho}} stays bounded over the sweep.
///
/// Third differences anchored at small k dominate at |lambda| = 1 for n = 2,
/// so the band is wider than for the difference bound.
#[test]
fn resolvent_symbol_class_is_bounded() {
    for (a, radius) in [
        (Symbol::shifted_laplacian(1, 1), 256),
        (Symbol::jordan(1, 2, 2.0), 256),
        (Symbol::shifted_laplacian(2, 1), 160),
    ] {
        let table_box = TruncationBox::new(a.n, radius + a.regularity);
        for theta in RAYS {
            let scaled: Vec<f64> = MODULI
                .iter()
                .map(|&r| {
                    let (b, _) = resolvent_symbol(&a, polar(r, theta), table_box).unwrap();
                    (1.0 + r) * class_norm_with_order(&b, TruncationBox::new(a.n, radius), 0.0).unwrap().norm
                })
                .collect();
            assert!(spread(&scaled) < 8.0, "{} n={} arg {theta}: {scaled:?}", a.label, a.n);
        }
    }
}
