//! Fixtures with nontrivial edge subgroups: an amalgam of Z/4 and Z/6 over a
//! shared Z/2, and an HNN extension of the Klein four-group whose stable
//! letter conjugates one Z/2 onto a different one. These drive the coset
//! decomposition and subgroup-folding paths that trivial amalgams never
//! touch.

use std::collections::HashSet;

use btl_core::aiset::{self, AlmostInvariantSet};
use btl_core::classify;
use btl_core::group::{
    AfpGroup, Element, Embedding, Family, FiniteGroupTable, GroupModel, HnnGroup, HnnWord,
};
use btl_core::profile::MarginalProfile;

/// Z/4 amalgamated with Z/6 over the common subgroup of order two.
fn amalgam_z4_z6() -> GroupModel {
    let a = FiniteGroupTable::cyclic(4, 'a').unwrap();
    let b = FiniteGroupTable::cyclic(6, 'b').unwrap();
    let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
    let c_in_a = Embedding::new(&c, &a, vec![0, 2]).unwrap();
    let c_in_b = Embedding::new(&c, &b, vec![0, 3]).unwrap();
    GroupModel::new(Family::Afp(AfpGroup::new(a, b, c, c_in_a, c_in_b).unwrap()))
}

fn klein_table() -> FiniteGroupTable {
    FiniteGroupTable::from_table(
        vec!["e".into(), "x".into(), "y".into(), "z".into()],
        vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2], vec![2, 3, 0, 1], vec![3, 2, 1, 0]],
    )
    .unwrap()
}

/// HNN extension of the Klein group whose stable letter carries one order-two
/// subgroup onto a different one.
fn hnn_klein_twisted() -> GroupModel {
    let a = klein_table();
    let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
    let c_in_a = Embedding::new(&c, &a, vec![0, 1]).unwrap(); // c -> x
    let alpha = Embedding::new(&c, &a, vec![0, 2]).unwrap(); // alpha(c) = y
    GroupModel::new(Family::Hnn(HnnGroup::new(a, c, c_in_a, alpha).unwrap()))
}

fn bfs_ball(group: &GroupModel, radius: u32) -> HashSet<Element> {
    let gens = group.generators();
    let mut seen: HashSet<Element> = HashSet::new();
    seen.insert(group.identity());
    let mut frontier = vec![group.identity()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in frontier.drain(..) {
            for s in &gens {
                let product = group.mul(&g, s);
                if group.word_length(&product) <= radius && seen.insert(product.clone()) {
                    next.push(product);
                }
            }
        }
        frontier = next;
    }
    seen
}

#[test]
fn amalgam_sphere_counts_with_shared_subgroup() {
    let g = amalgam_z4_z6();
    // [A:C] = 2, [B:C] = 3, |A| = 4: count = 2 * 1^(n-1) * 2^n * 4
    let reference = bfs_ball(&g, 4);
    for n in 1..=4u32 {
        let formula = 2u64 * 2u64.pow(n) * 4;
        assert_eq!(g.sphere_count(n).unwrap(), formula, "n = {n}");
        let by_bfs = reference.iter().filter(|e| g.word_length(e) == n).count() as u64;
        assert_eq!(by_bfs, formula, "enumeration at n = {n}");
        assert_eq!(g.sphere(n).unwrap().len() as u64, formula);
    }
}

#[test]
fn amalgam_group_laws_and_subgroup_identification() {
    let g = amalgam_z4_z6();
    // a^2 and b^3 are the same group element (the shared subgroup generator)
    let gens = g.generators();
    let a = &gens[0]; // a
    let b = gens.iter().find(|e| g.element_label(e).contains('b')).unwrap();
    let a2 = g.mul(a, a);
    let b3 = g.mul(&g.mul(b, b), b);
    assert_eq!(a2, b3, "shared subgroup elements must have one normal form");

    // sampled associativity and inverses across three syllable levels
    let ball = g.enumerate_ball(2).unwrap();
    for x in ball.iter().step_by(13) {
        assert_eq!(g.mul(x, &g.inv(x)), g.identity());
        for y in ball.iter().step_by(17) {
            for z in ball.iter().step_by(29) {
                assert_eq!(g.mul(&g.mul(x, y), z), g.mul(x, &g.mul(y, z)));
            }
        }
    }
}

#[test]
fn amalgam_boundary_formula_with_larger_subgroup() {
    let g = amalgam_z4_z6();
    let w = AlmostInvariantSet::afp_ends();
    // |C| = 2: exact symmetric difference 2n|C| = 4n
    for n in 1..=2u32 {
        for el in g.sphere(n).unwrap().iter().step_by(3) {
            let report = aiset::boundary(&g, &w, el, n + 2).unwrap();
            assert!(report.certified);
            assert_eq!(
                report.symmetric_difference_size() as u32,
                4 * n,
                "g = {}",
                g.element_label(el)
            );
            assert_eq!(report.signed_flow(), 0);
        }
    }
    let bound = aiset::kappa_bound(&g).unwrap();
    assert!((bound - 2f64.ln() / 4.0).abs() < 1e-12);
}

#[test]
fn amalgam_candidate_still_classifies_to_squared_parameter() {
    let g = amalgam_z4_z6();
    let lambda: f64 = 0.9;
    let p = MarginalProfile::type_iii_candidate(AlmostInvariantSet::afp_ends(), lambda).unwrap();
    let cons = btl_core::conserve::decide_conservativeness(&g, &p, None, 3, false).unwrap();
    assert_eq!(cons.tag, btl_core::conserve::ConservativenessTag::StronglyConservative);
    let verdict = classify::classify(
        &g,
        &p,
        &cons,
        &classify::ClassifyOptions { radius: 3, generators: None },
    )
    .unwrap();
    match verdict.tag {
        classify::TypeTag::TypeIIILambda(l) => assert!((l - lambda * lambda).abs() < 1e-9),
        other => panic!("unexpected verdict {other:?}"),
    }
}

#[test]
fn twisted_hnn_relation() {
    let g = hnn_klein_twisted();
    let t = Element::Hnn(HnnWord { lead: 0, letters: vec![(1, 0)] });
    let tinv = g.inv(&t);
    let x = Element::Hnn(HnnWord { lead: 1, letters: vec![] });
    let y = Element::Hnn(HnnWord { lead: 2, letters: vec![] });
    let z = Element::Hnn(HnnWord { lead: 3, letters: vec![] });
    // t^-1 x t = y but z is carried nowhere: t^-1 z t stays two letters long
    assert_eq!(g.mul(&g.mul(&tinv, &x), &t), y);
    assert_eq!(g.mul(&g.mul(&t, &y), &tinv), x);
    let moved = g.mul(&g.mul(&tinv, &z), &t);
    assert_eq!(g.word_length(&moved), 2);
}

#[test]
fn twisted_hnn_counts_and_britton_soundness() {
    let g = hnn_klein_twisted();
    let Family::Hnn(model) = &g.family else { unreachable!() };
    let reference = bfs_ball(&g, 3);
    for n in 1..=3u32 {
        // 2 |A| rho1 (rho1 + rho2)^(n-1) = 16 * 3^(n-1)
        let formula = 16 * 3u64.pow(n - 1);
        assert_eq!(g.sphere_count(n).unwrap(), formula);
        let by_bfs = reference.iter().filter(|e| g.word_length(e) == n).count() as u64;
        assert_eq!(by_bfs, formula, "n = {n}");
    }
    for e in g.enumerate_ball(3).unwrap() {
        let Element::Hnn(w) = &e else { unreachable!() };
        assert!(model.is_britton_reduced(w), "pinch in {}", g.element_label(&e));
        assert_eq!(g.mul(&e, &g.inv(&e)), g.identity());
    }
}

#[test]
fn twisted_hnn_boundary_and_flow() {
    let g = hnn_klein_twisted();
    let w = AlmostInvariantSet::hnn_ends();
    for n in 1..=2u32 {
        for el in g.sphere(n).unwrap().iter().step_by(5) {
            let report = aiset::boundary(&g, &w, el, n + 2).unwrap();
            assert!(report.certified, "g = {}", g.element_label(el));
            assert!(report.symmetric_difference_size() as u32 <= 4 * n);
            assert_eq!(report.signed_flow(), 0);
        }
    }
}

#[test]
fn planar_lattice_classifies_constant_profile() {
    let z2 = GroupModel::lattice(2).unwrap();
    assert_eq!(z2.ends(), btl_core::group::Ends::One);
    let p = MarginalProfile::constant(0.3).unwrap();
    let cons = btl_core::conserve::decide_conservativeness(&z2, &p, None, 6, false).unwrap();
    let verdict = classify::classify(
        &z2,
        &p,
        &cons,
        &classify::ClassifyOptions { radius: 6, generators: None },
    )
    .unwrap();
    assert_eq!(verdict.tag, classify::TypeTag::TypeII1);
}

mod word_properties {
    use super::*;
    use proptest::prelude::*;

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
        fn amalgam_laws_over_shared_subgroup(w1 in prop::collection::vec(0u8..8, 0..10),
                                             w2 in prop::collection::vec(0u8..8, 0..10),
                                             w3 in prop::collection::vec(0u8..8, 0..10)) {
            let g = amalgam_z4_z6();
            let (a, b, c) = (
                word_from_indices(&g, &w1),
                word_from_indices(&g, &w2),
                word_from_indices(&g, &w3),
            );
            prop_assert_eq!(g.mul(&g.mul(&a, &b), &c), g.mul(&a, &g.mul(&b, &c)));
            prop_assert_eq!(g.mul(&a, &g.inv(&a)), g.identity());
            prop_assert_eq!(g.word_length(&a), g.word_length(&g.inv(&a)));
        }

        #[test]
        fn twisted_hnn_laws(w1 in prop::collection::vec(0u8..6, 0..10),
                            w2 in prop::collection::vec(0u8..6, 0..10)) {
            let g = hnn_klein_twisted();
            let a = word_from_indices(&g, &w1);
            let b = word_from_indices(&g, &w2);
            prop_assert_eq!(g.mul(&g.mul(&a, &b), &g.inv(&b)), a.clone());
            prop_assert_eq!(g.mul(&a, &g.inv(&a)), g.identity());
        }
    }
}
