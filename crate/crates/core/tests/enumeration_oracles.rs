//! Exhaustive oracles for the word machinery: breadth-first closure under
//! generator multiplication defines the reference ball, independent of the
//! canonical-form enumerators and the closed counting formulas.

use std::collections::HashSet;

use btl_core::group::{
    AfpGroup, ChainGroup, Element, Embedding, Family, FiniteGroupTable, GroupModel, HnnGroup,
};

fn afp(a: usize, b: usize) -> GroupModel {
    GroupModel::new(Family::Afp(
        AfpGroup::free_product(
            FiniteGroupTable::cyclic(a, 'a').unwrap(),
            FiniteGroupTable::cyclic(b, 'b').unwrap(),
        )
        .unwrap(),
    ))
}

fn hnn_z4_id() -> GroupModel {
    let a = FiniteGroupTable::cyclic(4, 'a').unwrap();
    let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
    let c_in_a = Embedding::new(&c, &a, vec![0, 2]).unwrap();
    let alpha = Embedding::new(&c, &a, vec![0, 2]).unwrap();
    GroupModel::new(Family::Hnn(HnnGroup::new(a, c, c_in_a, alpha).unwrap()))
}

/// Closure of the identity under generator multiplication, truncated at the
/// given word length. Every element the group law can reach shows up here, so
/// this is the reference enumeration.
fn bfs_ball(group: &GroupModel, radius: u32) -> HashSet<Element> {
    let gens = group.generators();
    let mut seen: HashSet<Element> = HashSet::new();
    let mut frontier = vec![group.identity()];
    seen.insert(group.identity());
    while let Some(next) = {
        let mut next = Vec::new();
        for g in frontier.drain(..) {
            for s in &gens {
                let product = group.mul(&g, s);
                if group.word_length(&product) <= radius && seen.insert(product.clone()) {
                    next.push(product);
                }
            }
        }
        if next.is_empty() {
            None
        } else {
            Some(next)
        }
    } {
        frontier = next;
    }
    seen
}

#[test]
fn afp_ball_matches_bfs_closure() {
    let g = afp(3, 3);
    for radius in 0..=3u32 {
        let listed: HashSet<Element> = g.enumerate_ball(radius).unwrap().into_iter().collect();
        let reference = bfs_ball(&g, radius);
        assert_eq!(listed, reference, "radius {radius}");
    }
    // the radius-1 ball consists of the 3 factor-A elements plus the 18
    // one-syllable words
    assert_eq!(g.enumerate_ball(1).unwrap().len(), 21);
}

#[test]
fn afp_sphere_counts_match_bfs_and_formula() {
    for (a, b) in [(3usize, 3usize), (2, 4)] {
        let g = afp(a, b);
        let reference = bfs_ball(&g, 5);
        for n in 1..=5u32 {
            let by_formula = g.sphere_count(n).unwrap();
            let by_enumeration =
                reference.iter().filter(|e| g.word_length(e) == n).count() as u64;
            assert_eq!(by_formula, by_enumeration, "factors ({a},{b}), n = {n}");
            assert_eq!(g.sphere(n).unwrap().len() as u64, by_formula);
        }
    }
}

#[test]
fn hnn_sphere_counts_match_bfs_and_formula() {
    let g = hnn_z4_id();
    let reference = bfs_ball(&g, 4);
    for n in 1..=4u32 {
        let by_formula = g.sphere_count(n).unwrap();
        let by_enumeration = reference.iter().filter(|e| g.word_length(e) == n).count() as u64;
        assert_eq!(by_formula, by_enumeration, "n = {n}");
        assert_eq!(g.sphere(n).unwrap().len() as u64, by_formula);
    }
    assert_eq!(g.sphere_count(3).unwrap(), 144);
}

#[test]
fn hnn_enumeration_is_britton_sound() {
    let g = hnn_z4_id();
    let Family::Hnn(model) = &g.family else { unreachable!() };
    for e in g.enumerate_ball(4).unwrap() {
        let Element::Hnn(w) = &e else { unreachable!() };
        assert!(model.is_britton_reduced(w), "pinch in {}", g.element_label(&e));
    }
}

#[test]
fn hnn_defining_relation_for_all_subgroup_elements() {
    let g = hnn_z4_id();
    let Family::Hnn(model) = &g.family else { unreachable!() };
    let t = Element::Hnn(btl_core::group::HnnWord { lead: 0, letters: vec![(1, 0)] });
    let tinv = g.inv(&t);
    for c in 0..model.c.order() as u16 {
        let a_elem = Element::Hnn(btl_core::group::HnnWord {
            lead: model.c_in_a.apply(c),
            letters: vec![],
        });
        let alpha_elem = Element::Hnn(btl_core::group::HnnWord {
            lead: model.alpha.apply(c),
            letters: vec![],
        });
        let conjugated = g.mul(&g.mul(&tinv, &a_elem), &t);
        assert_eq!(conjugated, alpha_elem);
    }
}

#[test]
fn integer_and_chain_ball_sizes() {
    let z = GroupModel::integers();
    let ball = z.enumerate_ball(2).unwrap();
    assert_eq!(ball.len(), 5);

    let chain = GroupModel::new(Family::Chain(ChainGroup::z2_sum()));
    assert_eq!(chain.enumerate_ball(3).unwrap().len(), 8);
}

#[test]
fn balls_are_ordered_and_inverse_closed() {
    for g in [afp(3, 3), hnn_z4_id(), GroupModel::integers()] {
        let ball = g.enumerate_ball(3).unwrap();
        for pair in ball.windows(2) {
            let ka = g.sort_key(&pair[0]);
            let kb = g.sort_key(&pair[1]);
            assert!(ka < kb, "ball order violated in {}", g.family_name());
        }
        let set: HashSet<Element> = ball.iter().cloned().collect();
        assert_eq!(set.len(), ball.len());
        for e in &ball {
            assert!(set.contains(&g.inv(e)));
        }
    }
}

#[test]
fn free_product_multiplication_against_rewriting_oracle() {
    use rand::{Rng, SeedableRng};
    let g = afp(3, 3);

    // Rewriting oracle for the trivial amalgam: alternate runs of the two
    // cyclic generators, cancel modulo the orders, no cross-factor mixing.
    fn reduce(word: Vec<(u8, u16)>, orders: [u16; 2]) -> Vec<(u8, u16)> {
        let mut out: Vec<(u8, u16)> = Vec::new();
        for mut syl in word {
            loop {
                syl.1 %= orders[syl.0 as usize];
                if syl.1 == 0 {
                    break;
                }
                match out.last() {
                    Some(&(f, e)) if f == syl.0 => {
                        out.pop();
                        syl = (f, e + syl.1);
                    }
                    _ => {
                        out.push(syl);
                        break;
                    }
                }
            }
        }
        out
    }

    fn realize(g: &GroupModel, word: &[(u8, u16)]) -> Element {
        let gens = g.generators(); // [a, a^2, b, b^2]
        let mut acc = g.identity();
        for &(f, e) in word {
            let gen = if f == 0 { &gens[0] } else { &gens[2] };
            for _ in 0..e {
                acc = g.mul(&acc, gen);
            }
        }
        acc
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..300 {
        let len1 = rng.gen_range(0..5);
        let len2 = rng.gen_range(0..5);
        let w1: Vec<(u8, u16)> = (0..len1).map(|_| (rng.gen_range(0..2), rng.gen_range(1..3))).collect();
        let w2: Vec<(u8, u16)> = (0..len2).map(|_| (rng.gen_range(0..2), rng.gen_range(1..3))).collect();
        let lhs = g.mul(&realize(&g, &w1), &realize(&g, &w2));
        let mut concat = w1.clone();
        concat.extend_from_slice(&w2);
        let rhs = realize(&g, &reduce(concat, [3, 3]));
        assert_eq!(lhs, rhs);
    }
}
