mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use common::{compactly_supported, random_table, rng};
use torus_psido::lattice::{
    aniso_bracket, backward_difference, bracket, forward_difference, leibniz_rhs, LatticeFunction, MultiIndex,
    Product, TruncationBox,
};
use torus_psido::linalg::{max_abs_diff, CMatrix};
use torus_psido::oracles::difference_by_expansion;

fn table_scale(t: &torus_psido::lattice::Tabulated) -> f64 {
    t.values
        .iter()
        .flat_map(|m| m.iter().map(|z| z.norm()))
        .fold(0.0, f64::max)
}

fn multi_index(n: usize, orders: &[u32]) -> MultiIndex {
    MultiIndex(orders[..n].to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repeated_differences_match_expansion(
        seed in any::<u64>(),
        n in 1usize..=2,
        d in 1usize..=3,
        orders in prop::collection::vec(0u32..=2, 2),
        k in prop::collection::vec(-3i64..=3, 2),
    ) {
        let alpha = multi_index(n, &orders);
        let table = random_table(TruncationBox::new(n, 8), d, &mut rng(seed));
        let scale = table_scale(&table) * 2f64.powi(alpha.order() as i32);
        let fast = forward_difference(&table, &alpha, &k[..n]).unwrap();
        let slow = difference_by_expansion(&table, &alpha, &k[..n]).unwrap();
        prop_assert!(max_abs_diff(&fast, &slow) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn leibniz_rule(
        seed in any::<u64>(),
        n in 1usize..=2,
        d in 1usize..=3,
        orders in prop::collection::vec(0u32..=4, 2),
        k in prop::collection::vec(-2i64..=2, 2),
    ) {
        let mut orders = orders;
        if n == 2 && orders[0] + orders[1] > 4 {
            orders[1] = 4 - orders[0];
        }
        let alpha = multi_index(n, &orders);
        let mut r = rng(seed);
        let domain = TruncationBox::new(n, 7);
        let f = random_table(domain, d, &mut r);
        let g = random_table(domain, d, &mut r);
        let lhs = forward_difference(&Product(&f, &g), &alpha, &k[..n]).unwrap();
        let rhs = leibniz_rhs(&f, &g, &alpha, &k[..n]).unwrap();
        let scale = table_scale(&f) * table_scale(&g) * 4f64.powi(alpha.order() as i32) * d as f64;
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12 * scale);
    }

    #[test]
    fn summation_by_parts(
        seed in any::<u64>(),
        n in 1usize..=2,
        d in 1usize..=2,
        orders in prop::collection::vec(0u32..=3, 2),
    ) {
        let mut orders = orders;
        if n == 2 && orders[0] + orders[1] > 3 {
            orders[1] = 3 - orders[0];
        }
        let gamma = multi_index(n, &orders);
        let mut r = rng(seed);
        let support = TruncationBox::new(n, 2);
        let f = compactly_supported(random_table(support, d, &mut r));
        let g = compactly_supported(random_table(support, d, &mut r));
        let mut lhs = CMatrix::zeros(d, d);
        let mut rhs = CMatrix::zeros(d, d);
        for k in TruncationBox::new(n, 6).points() {
            lhs += f.eval(&k) * forward_difference(&g, &gamma, &k).unwrap();
            rhs += backward_difference(&f, &gamma, &k).unwrap() * g.eval(&k);
        }
        if gamma.order() % 2 == 1 {
            rhs = -rhs;
        }
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12 * 8f64.powi(gamma.order() as i32).max(1.0) * 25.0);
    }

    #[test]
    fn bracket_monotonicity(
        k in prop::collection::vec(-1000i64..=1000, 1..=3),
        re in 0.0f64..1e4,
        im in -1e4f64..1e4,
        m in 0.1f64..4.0,
    ) {
        let lambda = Complex64::new(re, im);
        let b = aniso_bracket(&k, lambda, m);
        prop_assert!(bracket(&k) <= b);
        prop_assert!(lambda.norm().powf(1.0 / m) <= b * (1.0 + 1e-15));
    }

    #[test]
    fn box_enumeration(n in 1usize..=3, radius in 0u32..=4) {
        let bx = TruncationBox::new(n, radius);
        let side = 2 * radius as usize + 1;
        prop_assert_eq!(bx.len(), side.pow(n as u32));
        let points: Vec<Vec<i64>> = bx.points().collect();
        prop_assert_eq!(points.len(), bx.len());
        prop_assert!(points.windows(2).all(|w| w[0] < w[1]));
        for (i, p) in points.iter().enumerate() {
            prop_assert_eq!(bx.index_of(p), Some(i));
        }
    }
}

#[test]
fn stencil_outside_domain_is_an_error() {
    let table = random_table(TruncationBox::new(1, 2), 1, &mut rng(0));
    assert!(forward_difference(&table, &MultiIndex(vec![1]), &[2]).is_err());
    assert!(backward_difference(&table, &MultiIndex(vec![1]), &[-2]).is_err());
}
