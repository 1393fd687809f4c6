mod common;

use proptest::prelude::*;

use magep_core::densekit::batched_matmul;
use magep_core::layers::{init_equivariant, init_invariant};
use magep_core::oracle::{naive_equivariant_forward, naive_invariant_forward};
use magep_core::weightspace::random_weights;
use magep_core::{contract, max_rel_diff, GroupElement, MonomialElement, Rng, Tensor, Variant, WeightSpec};

use common::UNIT;

fn tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), rng.uniform_vec(len, -1.0, 1.0)).unwrap()
}

fn spec_strategy() -> impl Strategy<Value = WeightSpec> {
    (2usize..=4, 1usize..=2)
        .prop_flat_map(|(l, d)| (prop::collection::vec(1usize..=4, l + 1), Just(d)))
        .prop_map(|(widths, d)| WeightSpec::new(widths, d).unwrap())
}

fn monomial(n: usize, variant: Variant, rng: &mut Rng) -> MonomialElement {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let scales = (0..n)
        .map(|_| match variant {
            Variant::PositiveScaling => rng.uniform(0.25f64.ln(), 4f64.ln()).exp(),
            Variant::SignFlip => rng.sign(),
        })
        .collect();
    MonomialElement::new(scales, perm).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_matches_loops(b in 1usize..3, d in 1usize..3, p in 1usize..4, j in 1usize..4, k in 1usize..4, e in 1usize..3, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let phi = tensor(&[e, d, p, j], &mut rng);
        let x = tensor(&[b, d, p, k], &mut rng);
        let got = contract("edpj,bdpk->bejk", &[&phi, &x]).unwrap();
        let want = Tensor::from_fn(&[b, e, j, k], |i| {
            let mut acc = 0.0;
            for dd in 0..d {
                for pp in 0..p {
                    acc += phi.get(&[i[1], dd, pp, i[2]]) * x.get(&[i[0], dd, pp, i[3]]);
                }
            }
            acc
        });
        prop_assert!(max_rel_diff(got.data(), want.data()) <= 1e-13);
    }

    #[test]
    fn matmul_is_associative(m in 1usize..5, n in 1usize..5, q in 1usize..5, r in 1usize..5, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = tensor(&[2, m, n], &mut rng);
        let b = tensor(&[2, n, q], &mut rng);
        let c = tensor(&[2, q, r], &mut rng);
        let left = batched_matmul(&batched_matmul(&a, &b).unwrap(), &c).unwrap();
        let right = batched_matmul(&a, &batched_matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(max_rel_diff(left.data(), right.data()) <= 1e-12);
    }

    #[test]
    fn monomial_group_laws(n in 1usize..6, sign in any::<bool>(), seed in any::<u64>()) {
        let variant = if sign { Variant::SignFlip } else { Variant::PositiveScaling };
        let mut rng = Rng::new(seed);
        let (a, b, c) = (monomial(n, variant, &mut rng), monomial(n, variant, &mut rng), monomial(n, variant, &mut rng));
        let ab_c = a.compose(&b).unwrap().compose(&c).unwrap();
        let a_bc = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(ab_c.perm(), a_bc.perm());
        prop_assert!(max_rel_diff(ab_c.scales(), a_bc.scales()) <= 1e-14);
        let id = a.compose(&a.inverse()).unwrap();
        prop_assert!(id.perm().iter().enumerate().all(|(k, &p)| k == p));
        prop_assert!(id.scales().iter().all(|s| (s - 1.0).abs() <= 1e-14));
        prop_assert_eq!(&a.compose(&MonomialElement::identity(n)).unwrap(), &a);
        let x = rng.uniform_vec(n, -1.0, 1.0);
        let dense = a.to_dense();
        let via_dense: Vec<f64> = (0..n).map(|i| (0..n).map(|k| dense.get(&[i, k]) * x[k]).sum()).collect();
        prop_assert!(max_rel_diff(&a.act_vector(&x).unwrap(), &via_dense) <= 1e-14);
    }

    #[test]
    fn action_is_a_homomorphism(spec in spec_strategy(), sign in any::<bool>(), seed in any::<u64>()) {
        let variant = if sign { Variant::SignFlip } else { Variant::PositiveScaling };
        let mut rng = Rng::new(seed);
        let g = GroupElement::sample(&spec, variant, (0.25, 4.0), &mut rng).unwrap();
        let h = GroupElement::sample(&spec, variant, (0.25, 4.0), &mut rng).unwrap();
        let u = random_weights(&spec, &mut rng, UNIT, None).unwrap();
        let lhs = g.act(&h.act(&u).unwrap()).unwrap();
        let rhs = g.compose(&h).unwrap().act(&u).unwrap();
        prop_assert!(max_rel_diff(&lhs.flatten(), &rhs.flatten()) <= 1e-12);
        let back = g.inverse().act(&g.act(&u).unwrap()).unwrap();
        prop_assert!(max_rel_diff(&back.flatten(), &u.flatten()) <= 1e-12);
    }

    #[test]
    fn layers_match_naive_loops(spec in spec_strategy(), e in 1usize..=3, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let d = spec.channels();
        let eq = init_equivariant(&spec, d, e, &mut rng, 1.0).unwrap();
        let inv = init_invariant(&spec, d, e, 2, &mut rng, 1.0).unwrap();
        let u = random_weights(&spec, &mut rng, UNIT, Some(2)).unwrap();
        let a = eq.forward(&u).unwrap();
        let b = naive_equivariant_forward(&eq, &u).unwrap();
        prop_assert!(max_rel_diff(&a.flatten(), &b.flatten()) <= 1e-12);
        let a = inv.forward(&u).unwrap();
        let b = naive_invariant_forward(&inv, &u).unwrap();
        prop_assert!(max_rel_diff(a.data(), b.data()) <= 1e-12);
    }
}
