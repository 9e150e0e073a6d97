//! Property coverage for the polynomial substrate: canonical form,
//! homogeneity propagation, division round trips, valuation additivity,
//! and jacobian degrees.

mod common;

use birdeg::poly::{jacobian_det, parse_poly, MultiPoly, Rat};
use common::{random_homogeneous, rat, rng};
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;

fn assert_canonical(p: &MultiPoly) {
    for (m, c) in p.terms() {
        assert!(!c.is_zero(), "zero coefficient stored");
        assert_eq!(m.arity(), p.var_count());
    }
}

proptest! {
    #[test]
    fn add_mul_substitute_stay_canonical(seed in 0u64..500) {
        let mut r = rng(seed);
        let deg_a = r.gen_range(1..=3);
        let a = random_homogeneous(&mut r, 3, deg_a, 0.7);
        let b = random_homogeneous(&mut r, 3, a.total_degree().unwrap(), 0.7);
        let sum = a.add(&b).unwrap();
        let prod = a.mul(&b).unwrap();
        assert_canonical(&sum);
        assert_canonical(&prod);
        let images = vec![
            random_homogeneous(&mut r, 3, 2, 0.8),
            random_homogeneous(&mut r, 3, 2, 0.8),
            random_homogeneous(&mut r, 3, 2, 0.8),
        ];
        let comp = a.substitute(&images).unwrap();
        assert_canonical(&comp);
        // homogeneity propagation: deg m into deg 2 images gives deg 2m or 0
        if !comp.is_zero() {
            prop_assert!(comp.is_homogeneous());
            prop_assert_eq!(
                comp.total_degree().unwrap(),
                2 * a.total_degree().unwrap()
            );
        }
    }
}

#[test]
fn division_round_trip_and_negative_certificates() {
    let mut r = rng(7);
    let mut not_divisible_seen = 0;
    for _ in 0..120 {
        let deg_d = r.gen_range(1..=2);
        let d = random_homogeneous(&mut r, 3, deg_d, 0.8);
        let deg_p = r.gen_range(2..=4);
        let p = random_homogeneous(&mut r, 3, deg_p, 0.6);
        match p.exact_divide(&d).unwrap() {
            Some(q) => {
                assert_eq!(d.mul(&q).unwrap(), p);
            }
            None => {
                not_divisible_seen += 1;
                // on 5 random lines, univariate divisibility must fail on at
                // least one
                let mut failed_on_a_line = false;
                for _ in 0..5 {
                    let base: Vec<Rat> = (0..3).map(|_| rat(r.gen_range(-5..=5))).collect();
                    let dir: Vec<Rat> = {
                        let mut v: Vec<Rat> =
                            (0..3).map(|_| rat(r.gen_range(-5..=5))).collect();
                        if v.iter().all(|c| c.is_zero()) {
                            v[0] = rat(1);
                        }
                        v
                    };
                    let pr = p.restrict_to_line(&base, &dir).unwrap();
                    let dr = d.restrict_to_line(&base, &dir).unwrap();
                    if dr.is_zero() {
                        continue;
                    }
                    let (_, rem) = pr.univariate_divmod(&dr).unwrap();
                    if !rem.is_zero() {
                        failed_on_a_line = true;
                        break;
                    }
                }
                assert!(
                    failed_on_a_line,
                    "no line certified the failed division: p={p:?} d={d:?}"
                );
            }
        }
        // multiplied back, always divisible with the exact quotient
        let prod = p.mul(&d).unwrap();
        let q = prod.exact_divide(&d).unwrap().expect("constructed multiple");
        assert_eq!(q, p);
    }
    assert!(not_divisible_seen > 10, "generator never produced non-multiples");
}

#[test]
fn extract_power_valuation_is_additive() {
    let mut r = rng(11);
    let irreducibles = [
        parse_poly("x-y", &["x", "y", "z"]).unwrap(),
        parse_poly("z", &["x", "y", "z"]).unwrap(),
        parse_poly("x+2*y-3*z", &["x", "y", "z"]).unwrap(),
        parse_poly("x*z-y^2", &["x", "y", "z"]).unwrap(),
        parse_poly("x^2+y*z", &["x", "y", "z"]).unwrap(),
    ];
    for trial in 0..200 {
        let d = &irreducibles[trial % irreducibles.len()];
        let dd = d.total_degree().unwrap();
        let deg_p = r.gen_range(1..=3);
        let mut p = random_homogeneous(&mut r, 3, deg_p, 0.7);
        let deg_q = r.gen_range(1..=3);
        let mut q = random_homogeneous(&mut r, 3, deg_q, 0.7);
        // salt in explicit powers so nonzero valuations actually occur
        p = p.mul(&d.pow(r.gen_range(0..=2))).unwrap();
        q = q.mul(&d.pow(r.gen_range(0..=2))).unwrap();
        let (tp, _) = p.extract_power(d).unwrap();
        let (tq, _) = q.extract_power(d).unwrap();
        let (tpq, rest) = p.mul(&q).unwrap().extract_power(d).unwrap();
        assert_eq!(tpq, tp + tq, "valuation not additive for d of degree {dd}");
        assert!(rest.exact_divide(d).unwrap().is_none());
    }
}

#[test]
fn jacobian_degree_formula() {
    let mut r = rng(13);
    for _ in 0..50 {
        let deg = r.gen_range(1..=3u32);
        let comps: Vec<MultiPoly> = (0..3)
            .map(|_| random_homogeneous(&mut r, 3, deg, 0.6))
            .collect();
        let det = jacobian_det(&comps).unwrap();
        if !det.is_zero() {
            assert!(det.is_homogeneous());
            assert_eq!(det.total_degree().unwrap(), 3 * (deg - 1));
        }
    }
}

#[test]
fn substitute_identity_and_zero_images() {
    let mut r = rng(17);
    let ident = vec![
        MultiPoly::var(3, 0),
        MultiPoly::var(3, 1),
        MultiPoly::var(3, 2),
    ];
    for _ in 0..20 {
        let deg_p = r.gen_range(1..=4);
        let p = random_homogeneous(&mut r, 3, deg_p, 0.5);
        assert_eq!(p.substitute(&ident).unwrap(), p);
    }
    let p = parse_poly("x^2 + y*z", &["x", "y", "z"]).unwrap();
    let zeroed = p
        .substitute(&[
            MultiPoly::zero(2),
            MultiPoly::var(2, 0),
            MultiPoly::var(2, 1),
        ])
        .unwrap();
    assert_eq!(zeroed, parse_poly("u*v", &["u", "v"]).unwrap());
}
