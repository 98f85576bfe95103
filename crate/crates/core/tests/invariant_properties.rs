//! Property tests for the algebraic invariants: group laws under random
//! words, boundary formulas under exhaustive set differences, and the
//! divergence witness for the boundary-weighted series.

use btl_core::aiset::{self, AlmostInvariantSet};
use btl_core::group::{AfpGroup, Element, Embedding, Family, FiniteGroupTable, GroupModel, HnnGroup};
use proptest::prelude::*;

fn afp33() -> GroupModel {
    GroupModel::new(Family::Afp(
        AfpGroup::free_product(
            FiniteGroupTable::cyclic(3, 'a').unwrap(),
            FiniteGroupTable::cyclic(3, 'b').unwrap(),
        )
        .unwrap(),
    ))
}

fn hnn_z4() -> GroupModel {
    let a = FiniteGroupTable::cyclic(4, 'a').unwrap();
    let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
    let c_in_a = Embedding::new(&c, &a, vec![0, 2]).unwrap();
    let alpha = Embedding::new(&c, &a, vec![0, 2]).unwrap();
    GroupModel::new(Family::Hnn(HnnGroup::new(a, c, c_in_a, alpha).unwrap()))
}

fn word_from_indices(group: &GroupModel, indices: &[u8]) -> Element {
    let gens = group.generators();
    let mut acc = group.identity();
    for &i in indices {
        acc = group.mul(&acc, &gens[i as usize % gens.len()]);
    }
    acc
}

proptest! {
    #[test]
    fn afp_group_laws(w1 in prop::collection::vec(0u8..6, 0..8),
                      w2 in prop::collection::vec(0u8..6, 0..8),
                      w3 in prop::collection::vec(0u8..6, 0..8)) {
        let g = afp33();
        let (a, b, c) = (word_from_indices(&g, &w1), word_from_indices(&g, &w2), word_from_indices(&g, &w3));
        prop_assert_eq!(g.mul(&g.mul(&a, &b), &c), g.mul(&a, &g.mul(&b, &c)));
        prop_assert_eq!(g.mul(&a, &g.inv(&a)), g.identity());
        prop_assert_eq!(g.mul(&g.identity(), &a.clone()), a);
    }

    #[test]
    fn hnn_group_laws(w1 in prop::collection::vec(0u8..6, 0..8),
                      w2 in prop::collection::vec(0u8..6, 0..8),
                      w3 in prop::collection::vec(0u8..6, 0..8)) {
        let g = hnn_z4();
        let (a, b, c) = (word_from_indices(&g, &w1), word_from_indices(&g, &w2), word_from_indices(&g, &w3));
        prop_assert_eq!(g.mul(&g.mul(&a, &b), &c), g.mul(&a, &g.mul(&b, &c)));
        prop_assert_eq!(g.mul(&a, &g.inv(&a)), g.identity());
    }

    #[test]
    fn inverse_preserves_word_length(w in prop::collection::vec(0u8..6, 0..10)) {
        for g in [afp33(), hnn_z4()] {
            let e = word_from_indices(&g, &w);
            prop_assert_eq!(g.word_length(&e), g.word_length(&g.inv(&e)));
        }
    }
}

#[test]
fn afp_boundary_formula_exhaustive_small() {
    let g = afp33();
    let w = AlmostInvariantSet::afp_ends();
    for n in 1..=3u32 {
        for el in g.sphere(n).unwrap() {
            let report = aiset::boundary(&g, &w, &el, n + 2).unwrap();
            assert!(report.certified);
            assert_eq!(
                report.symmetric_difference_size() as u32,
                2 * n,
                "g = {}",
                g.element_label(&el)
            );
            assert_eq!(report.signed_flow(), 0);
        }
    }
}

#[test]
fn hnn_boundary_bound_exhaustive_small() {
    let g = hnn_z4();
    let w = AlmostInvariantSet::hnn_ends();
    for n in 1..=3u32 {
        for el in g.sphere(n).unwrap() {
            let report = aiset::boundary(&g, &w, &el, n + 2).unwrap();
            assert!(report.certified, "g = {}", g.element_label(&el));
            let size = report.symmetric_difference_size() as u32;
            assert!(size <= 2 * n * 2, "bound violated at {}", g.element_label(&el));
            assert_eq!(report.signed_flow(), 0);
        }
    }
}

#[test]
fn divergence_witness_below_threshold() {
    for g in [afp33(), hnn_z4()] {
        let kappa = aiset::kappa_bound(&g).unwrap() * 0.99;
        let partials = aiset::divergence_partials(&g, kappa, 30).unwrap();
        // partial sums keep growing: the last increment ratio stays >= 1 - 1e-6
        for window in partials.windows(2) {
            let increment = window[1] - window[0];
            assert!(increment > 0.0);
        }
        let tail_ratio = (partials[29] - partials[28]) / (partials[28] - partials[27]);
        assert!(tail_ratio >= 1.0 - 1e-6, "family {}: tail ratio {tail_ratio}", g.family_name());
    }
}
