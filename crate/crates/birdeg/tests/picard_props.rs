//! Lattice side: matrix powers against golden degrees, divisor classes of
//! actual iterates, eigenvalue-1 classes, and the intersection form.

mod common;

use birdeg::blowup::elementary_indices;
use birdeg::dynamics::run_index_iteration;
use birdeg::fixtures::FixtureRegistry;
use birdeg::picard::{DivisorClass, PicardMatrix};
use common::{random_homogeneous, rng};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

#[test]
fn hh_powers_match_golden_degrees() {
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let pf = fixture.picard.as_ref().unwrap();
        for (n, &d) in fixture.golden_degrees.iter().enumerate().take(13) {
            assert_eq!(
                pf.matrix.power_hh_entry(n as u64),
                BigInt::from(d),
                "{id} at n={n}"
            );
        }
        assert_eq!(pf.matrix.power_hh_entry(0), BigInt::from(1));
    }
    // linear growth continues far past the golden table
    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    let m = &ex3.picard.as_ref().unwrap().matrix;
    assert_eq!(m.power_hh_entry(7), BigInt::from(8));
    for n in 0..=50u64 {
        assert_eq!(m.power_hh_entry(n), BigInt::from(n + 1));
    }
    let ex1 = FixtureRegistry::load("ex1-penrose-smith").unwrap();
    assert_eq!(
        ex1.picard.as_ref().unwrap().matrix.power_hh_entry(4),
        BigInt::from(13)
    );
}

/// Divisor class of a polynomial: degree times H minus the elementary
/// indices over the fixture's tower charts, in basis order.
fn class_of(fixture: &birdeg::fixtures::Fixture, p: &birdeg::poly::MultiPoly) -> DivisorClass {
    let mut coeffs = vec![BigInt::from(p.total_degree().unwrap())];
    for tower_id in &fixture.mu_towers {
        let chart = fixture.charts.get(tower_id).unwrap();
        for mu in elementary_indices(chart, p).unwrap() {
            coeffs.push(BigInt::from(-(mu as i64)));
        }
    }
    DivisorClass { coeffs }
}

#[test]
fn pull_back_acts_as_the_matrix_on_iterate_classes() {
    let fixture = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let pf = fixture.picard.as_ref().unwrap();
    let mut r = rng(61);
    let (_, states) = run_index_iteration(
        &fixture.map,
        &fixture.charts,
        &fixture.tracked,
        6,
        &mut r,
    )
    .unwrap();
    // generic line: class is plain H
    let c0 = class_of(&fixture, &states[0].p);
    assert_eq!(c0, DivisorClass::from_i64(&[1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]));
    // the first pull-back has the fixed support pattern (2; 0^5, 1, 0, 0, 1, 1)
    let c1 = class_of(&fixture, &states[1].p);
    assert_eq!(
        c1,
        DivisorClass::from_i64(&[2, 0, 0, 0, 0, 0, -1, 0, 0, -1, -1])
    );
    assert_eq!(pf.matrix.apply_to_class(&c0).unwrap(), c1);
    // and the whole chain transforms by the matrix
    for n in 0..(states.len() - 1) {
        let cn = class_of(&fixture, &states[n].p);
        let cn1 = class_of(&fixture, &states[n + 1].p);
        assert_eq!(pf.matrix.apply_to_class(&cn).unwrap(), cn1, "n={n}");
    }
    // zero class maps to zero
    let z = DivisorClass::zero(pf.matrix.rank());
    assert_eq!(pf.matrix.apply_to_class(&z).unwrap(), z);
}

#[test]
fn index_relations_on_random_polynomials() {
    // second check of the declared tower relations, driven from the lattice
    // side: 100 random forms per fixture with relations
    let mut r = rng(67);
    let fixture = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    for _ in 0..100 {
        let deg_p = r.gen_range(1..=3);
        let p = random_homogeneous(&mut r, 3, deg_p, 0.7);
        for rel in &fixture.nu_mu_relations {
            let chart = fixture.charts.get(&rel.chart).unwrap();
            let tower = fixture.charts.get(&rel.tower).unwrap();
            let mus = elementary_indices(tower, &p).unwrap();
            let combined = birdeg::blowup::nu_from_mu(&rel.relation, &mus).unwrap();
            assert_eq!(
                combined,
                birdeg::blowup::local_index(chart, &p).unwrap() as i64
            );
        }
    }
}

#[test]
fn full_mu_recurrence_reproduces_degrees() {
    let fixture = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let mu_rec = fixture.mu_recurrence.as_ref().unwrap();
    let degrees = mu_rec.degree_sequence(13).unwrap();
    let got: Vec<i64> = degrees.iter().map(|v| v.to_i64().unwrap()).collect();
    assert_eq!(got, fixture.golden_degrees);

    // the recurrence state matches chart-computed elementary indices along
    // an actual iteration
    let mut r = rng(71);
    let (_, states) = run_index_iteration(
        &fixture.map,
        &fixture.charts,
        &fixture.tracked,
        6,
        &mut r,
    )
    .unwrap();
    let mut state: Vec<BigInt> = mu_rec.initial.iter().map(|&c| BigInt::from(c)).collect();
    for st in &states {
        let class = class_of(&fixture, &st.p);
        let from_rec: Vec<BigInt> = std::iter::once(state[0].clone())
            .chain(state[1..].iter().map(|m| -m.clone()))
            .collect();
        assert_eq!(class.coeffs, from_rec, "n={}", st.n);
        state = mu_rec.step(&state).unwrap();
    }
}

#[test]
fn fixed_classes_contain_the_known_invariant_classes() {
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let pf = fixture.picard.as_ref().unwrap();
        let fixed = pf.matrix.fixed_classes();
        for known in &pf.known_fixed_classes {
            let v = DivisorClass::from_i64(known);
            assert_eq!(
                pf.matrix.apply_to_class(&v).unwrap(),
                v,
                "{id}: declared class not fixed"
            );
        }
        match id {
            &"ex1-penrose-smith" | &"ex2-dpi-plane" => assert_eq!(fixed.len(), 3, "{id}"),
            &"ex3-linearizable" => assert_eq!(fixed.len(), 1),
            _ => assert!(fixed.is_empty(), "{id}"),
        }
        // every reported generator is genuinely fixed
        for v in &fixed {
            assert_eq!(pf.matrix.apply_to_class(v).unwrap(), *v, "{id}");
        }
    }
}

#[test]
fn intersection_products_and_orthogonality() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let pf = ex2.picard.as_ref().unwrap();
    let basis = &pf.matrix.basis;
    let rank = basis.rank();
    let unit = |i: usize| {
        let mut v = vec![0i64; rank];
        v[i] = 1;
        DivisorClass::from_i64(&v)
    };
    assert_eq!(
        PicardMatrix::intersection_product(basis, &unit(0), &unit(0)).unwrap(),
        BigInt::from(1)
    );
    assert_eq!(
        PicardMatrix::intersection_product(basis, &unit(1), &unit(2)).unwrap(),
        BigInt::zero()
    );
    // the degree-4 invariant class has self-intersection zero
    let quartic = DivisorClass::from_i64(&pf.known_fixed_classes[0]);
    assert_eq!(
        PicardMatrix::intersection_product(basis, &quartic, &quartic).unwrap(),
        BigInt::zero()
    );

    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let pf = fixture.picard.as_ref().unwrap();
        let orth = pf.matrix.orthogonality_check().unwrap();
        assert_eq!(
            orth,
            fixture.automorphism.unwrap(),
            "{id}: orthogonality must match the automorphism flag"
        );
    }
}
