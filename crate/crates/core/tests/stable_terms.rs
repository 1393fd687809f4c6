mod common;

use magep_core::densekit::{batched_matmul, batched_matvec};
use magep_core::stableterms::{all_terms, bw_term, bw_term_via, w_chain, wb_term, ww_term, ww_term_via};
use magep_core::{max_rel_diff, GroupElement, PsiParams, Rng, Tensor, Variant};

use common::{random_object, random_spec};

fn rel(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    max_rel_diff(a.data(), b.data())
}

#[test]
fn terms_transform_by_boundary_factors() {
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    for trial in 0..60 {
        let spec = random_spec(&mut rng);
        let l = spec.layers();
        let u = random_object(&spec, &mut rng);
        let psi = PsiParams::random(&spec, &mut rng);
        let variant = if trial % 2 == 0 {
            Variant::PositiveScaling
        } else {
            Variant::SignFlip
        };
        let g = GroupElement::sample(&spec, variant, (0.25, 4.0), &mut rng).unwrap();
        let gu = g.act(&u).unwrap();
        let sandwich = |t: &Tensor, s: usize, r: usize| {
            g.layer(r)
                .right_act_inverse(&g.layer(s).left_act_matrix(t).unwrap())
                .unwrap()
        };
        for s in 1..=l {
            for t in 0..s {
                worst = worst.max(rel(
                    &w_chain(&gu, s, t).unwrap(),
                    &sandwich(&w_chain(&u, s, t).unwrap(), s, t),
                ));
                if t > 0 {
                    let expect = g.layer(s).left_act_vector(&wb_term(&u, s, t).unwrap()).unwrap();
                    worst = worst.max(rel(&wb_term(&gu, s, t).unwrap(), &expect));
                }
            }
            worst = worst.max(rel(gu.bias(s), &g.layer(s).left_act_vector(u.bias(s)).unwrap()));
            for t in 0..l {
                let a = bw_term(&gu, s, t, &psi).unwrap();
                worst = worst.max(rel(&a, &sandwich(&bw_term(&u, s, t, &psi).unwrap(), s, t)));
                let a = ww_term(&gu, s, t, &psi).unwrap();
                worst = worst.max(rel(&a, &sandwich(&ww_term(&u, s, t, &psi).unwrap(), s, t)));
            }
        }
    }
    assert!(worst <= 1e-10, "worst stability residual {worst}");
}

#[test]
fn chain_identities() {
    let mut rng = Rng::new(102);
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let spec = random_spec(&mut rng);
        let l = spec.layers();
        let u = random_object(&spec, &mut rng);
        for s in 1..=l {
            assert_eq!(&w_chain(&u, s, s - 1).unwrap(), u.weight(s));
            for t in 0..s {
                for r in 0..t {
                    let prod = batched_matmul(&w_chain(&u, s, t).unwrap(), &w_chain(&u, t, r).unwrap()).unwrap();
                    worst = worst.max(rel(&prod, &w_chain(&u, s, r).unwrap()));
                    if r > 0 {
                        let v = batched_matvec(&w_chain(&u, s, t).unwrap(), &wb_term(&u, t, r).unwrap()).unwrap();
                        worst = worst.max(rel(&v, &wb_term(&u, s, r).unwrap()));
                    }
                    // [bW]^(s)(s,t) [W]^(t,r) = [bW]^(s)(s,r) for a shared row ψ.
                    let row = Tensor::new(vec![1, spec.width(s)], rng.uniform_vec(spec.width(s), -1.0, 1.0)).unwrap();
                    let lhs =
                        batched_matmul(&bw_term_via(&u, s, s, t, &row).unwrap(), &w_chain(&u, t, r).unwrap()).unwrap();
                    worst = worst.max(rel(&lhs, &bw_term_via(&u, s, s, r, &row).unwrap()));
                    let (n0, nl) = (spec.width(0), spec.width(l));
                    let psi = Tensor::new(vec![n0, nl], rng.uniform_vec(n0 * nl, -1.0, 1.0)).unwrap();
                    let lhs =
                        batched_matmul(&ww_term_via(&u, s, l, t, &psi).unwrap(), &w_chain(&u, t, r).unwrap()).unwrap();
                    worst = worst.max(rel(&lhs, &ww_term_via(&u, s, l, r, &psi).unwrap()));
                }
            }
        }
    }
    assert!(worst <= 1e-12, "worst chain residual {worst}");
}

#[test]
fn bulk_evaluation_matches_direct() {
    let mut rng = Rng::new(103);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec = random_spec(&mut rng);
        let l = spec.layers();
        let u = random_object(&spec, &mut rng);
        let psi = PsiParams::random(&spec, &mut rng);
        let set = all_terms(&u, &psi).unwrap();
        for s in 1..=l {
            for t in 0..s {
                worst = worst.max(rel(set.w(s, t), &w_chain(&u, s, t).unwrap()));
                if t > 0 {
                    worst = worst.max(rel(set.wb(s, t), &wb_term(&u, s, t).unwrap()));
                }
            }
            for t in 0..l {
                worst = worst.max(rel(set.bw(s, t), &bw_term(&u, s, t, &psi).unwrap()));
                worst = worst.max(rel(set.ww(s, t), &ww_term(&u, s, t, &psi).unwrap()));
            }
            assert_eq!(set.b(s), u.bias(s));
        }
    }
    assert!(worst <= 1e-13, "worst bulk residual {worst}");
}
