//! Operation-level coverage on the builtin maps: pull-backs, proper
//! pull-backs, the iteration oracle, contraction and inverse verification,
//! orbits, invariants of motion, and the structural degree-drop law.

mod common;

use birdeg::blowup::multiplicity_at_point;
use birdeg::fixtures::FixtureRegistry;
use birdeg::poly::{parse_poly, MultiPoly};
use birdeg::ratmap::{BirationalMapDescriptor, MapError, ProjectivePoint};
use common::{random_homogeneous, rng};
use num_traits::Zero;
use rand::Rng;
use std::collections::BTreeMap;

const XYZ: [&str; 3] = ["x", "y", "z"];

fn p(src: &str) -> MultiPoly {
    parse_poly(src, &XYZ).unwrap()
}

fn pt(coords: &[i64]) -> ProjectivePoint {
    ProjectivePoint::from_integers(coords).unwrap()
}

#[test]
fn pull_back_examples() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    assert_eq!(ex2.map.pull_back(&p("x")).unwrap(), p("y*(y-z)"));
    assert_eq!(
        ex2.map.pull_back(&MultiPoly::one(3)).unwrap(),
        MultiPoly::one(3)
    );
    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    assert_eq!(ex3.map.pull_back(&p("z")).unwrap(), p("z*(x-y+z)"));
    assert!(matches!(
        ex2.map.pull_back(&p("x + y*z")),
        Err(MapError::NotHomogeneous)
    ));
}

#[test]
fn proper_pull_back_examples() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    // generic line: no factor splits off, the image is a conic
    let (ptilde, nu) = ex2
        .map
        .proper_pull_back(&p("x+2*y+5*z"), &ex2.charts)
        .unwrap();
    assert_eq!(ptilde.total_degree().unwrap(), 2);
    assert_eq!(nu["y-z"], 0);
    assert_eq!(nu["z"], 0);

    // pulling back a critical line: the image is exactly its pull-back,
    // with both indices zero (the line misses both contraction targets)
    let (ptilde, nu) = ex2.map.proper_pull_back(&p("y-z"), &ex2.charts).unwrap();
    assert_eq!(ptilde, p("x*z-(y-z)^2"));
    assert_eq!(nu["y-z"], 0);
    assert_eq!(nu["z"], 0);

    // a form through a target point picks up the matching factor: x
    // vanishes at [0:1:0], the target of y-z
    let (ptilde, nu) = ex2.map.proper_pull_back(&p("x"), &ex2.charts).unwrap();
    assert_eq!(nu["y-z"], 1);
    assert_eq!(nu["z"], 0);
    assert_eq!(ptilde, p("y"));
}

#[test]
fn generic_position_gives_trivial_split() {
    let mut r = rng(41);
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let targets: Vec<&ProjectivePoint> = fixture
            .map
            .critical_factors
            .iter()
            .map(|f| &f.target)
            .collect();
        let mut found = 0;
        while found < 10 {
            let deg_q = r.gen_range(1..=3);
            let q = random_homogeneous(&mut r, 3, deg_q, 0.8);
            if targets
                .iter()
                .any(|t| q.evaluate(t.coords()).unwrap().is_zero())
            {
                continue;
            }
            found += 1;
            let (ptilde, nu) = fixture.map.proper_pull_back(&q, &fixture.charts).unwrap();
            assert!(nu.values().all(|&v| v == 0), "{id}");
            assert_eq!(ptilde, fixture.map.pull_back(&q).unwrap());
        }
    }
}

#[test]
fn proper_pull_back_reconstruction_and_multiplicity_bound() {
    let mut r = rng(43);
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        for _ in 0..100 {
            let deg_q = r.gen_range(1..=4);
            let q = random_homogeneous(&mut r, 3, deg_q, 0.6);
            let (ptilde, nu) = fixture.map.proper_pull_back(&q, &fixture.charts).unwrap();
            // reconstruction: product of factor powers times the residue
            let mut rebuilt = ptilde.clone();
            for factor in &fixture.map.critical_factors {
                rebuilt = rebuilt
                    .mul(&factor.polynomial.pow(nu[factor.id.as_str()]))
                    .unwrap();
            }
            assert_eq!(rebuilt, fixture.map.pull_back(&q).unwrap(), "{id}");
            // lower bound: index at least the multiplicity of the target
            for factor in &fixture.map.critical_factors {
                let m = multiplicity_at_point(&q, &factor.target).unwrap();
                assert!(
                    nu[factor.id.as_str()] >= m,
                    "{id}: factor {} index {} below multiplicity {m}",
                    factor.id,
                    nu[factor.id.as_str()]
                );
            }
        }
    }
}

#[test]
fn iterate_minimal_examples() {
    let mut r = rng(47);
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let it = ex2.map.iterate_minimal(3, &mut r).unwrap();
    assert_eq!(it.degree, 7);
    let it1 = ex2.map.iterate_minimal(1, &mut r).unwrap();
    assert_eq!(it1.components, ex2.map.components);
    assert_eq!(it1.degree, 2);
    let gq = FixtureRegistry::load("generic-quadratic").unwrap();
    let it5 = gq.map.iterate_minimal(5, &mut r).unwrap();
    assert_eq!(it5.degree, 32);
    assert!(matches!(
        ex2.map.iterate_minimal(0, &mut r),
        Err(MapError::ZeroIterate)
    ));
}

#[test]
fn indeterminacy_membership() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    assert!(ex2.map.indeterminacy_contains(&pt(&[0, 1, 1])).unwrap());
    assert!(ex2.map.indeterminacy_contains(&pt(&[1, 0, 0])).unwrap());
    assert!(!ex2.map.indeterminacy_contains(&pt(&[1, 1, 1])).unwrap());
    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    assert!(ex3.map.indeterminacy_contains(&pt(&[1, 1, 0])).unwrap());
    assert!(ex3.map.indeterminacy_contains(&pt(&[0, 1, 0])).unwrap());
}

#[test]
fn critical_factor_verification() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let (exps, scalar) = ex2.map.verify_critical_factors().unwrap();
    assert_eq!(exps["y-z"], 2);
    assert_eq!(exps["z"], 1);
    assert_eq!(scalar, common::rat(2));

    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    let (exps, scalar) = ex3.map.verify_critical_factors().unwrap();
    assert_eq!(exps["z"], 2);
    assert_eq!(exps["x-y+z"], 1);
    assert_eq!(scalar, common::rat(2));

    // dropping a declared factor leaves a non-constant residual
    let mut crippled = ex2.map.clone();
    crippled.critical_factors.retain(|f| f.id == "z");
    assert!(matches!(
        crippled.verify_critical_factors(),
        Err(MapError::IncompleteFactorList { degree: 2 })
    ));
}

#[test]
fn inverse_verification() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let k_plus = ex2.map.verify_inverse().unwrap();
    assert_eq!(k_plus, p("z*(y-z)^2"));

    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    let k_plus = ex3.map.verify_inverse().unwrap();
    assert_eq!(k_plus.total_degree().unwrap(), 3);
    assert_eq!(k_plus, p("z^2*(x-y+z)"));

    // identity map with identity inverse: K+ = 1
    let identity = BirationalMapDescriptor {
        name: "identity".into(),
        dimension: 2,
        variables: XYZ.iter().map(|s| s.to_string()).collect(),
        components: vec![p("x"), p("y"), p("z")],
        critical_factors: vec![],
        inverse: Some(vec![p("x"), p("y"), p("z")]),
        parametrizations: BTreeMap::new(),
    };
    assert_eq!(identity.verify_inverse().unwrap(), MultiPoly::one(3));

    // undeclared factor in K+ is reported
    let mut partial = ex2.map.clone();
    partial.critical_factors.retain(|f| f.id == "z");
    assert!(matches!(
        partial.verify_inverse(),
        Err(MapError::UnexplainedFactor { degree: 2 })
    ));

    // wrong inverse data
    let mut wrong = ex2.map.clone();
    wrong.inverse = Some(vec![p("x^2"), p("y^2"), p("z^2")]);
    assert!(matches!(wrong.verify_inverse(), Err(MapError::NotInverse)));
    let mut missing = ex2.map.clone();
    missing.inverse = None;
    assert!(matches!(
        missing.verify_inverse(),
        Err(MapError::MissingInverse)
    ));
}

#[test]
fn contraction_targets() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    assert_eq!(ex2.map.contraction_check("z").unwrap(), pt(&[1, 0, 1]));
    assert_eq!(ex2.map.contraction_check("y-z").unwrap(), pt(&[0, 1, 0]));
    let ex3 = FixtureRegistry::load("ex3-linearizable").unwrap();
    assert_eq!(
        ex3.map.contraction_check("x-y+z").unwrap(),
        pt(&[1, 0, 0])
    );

    // deliberately wrong declared target
    let mut wrong = ex2.map.clone();
    wrong.critical_factors[0].target = pt(&[1, 1, 1]);
    assert!(matches!(
        wrong.contraction_check("y-z"),
        Err(MapError::TargetMismatch { .. })
    ));

    // a factor that is not contracted at all (identity map, fake factor)
    let not_contracted = BirationalMapDescriptor {
        name: "identity".into(),
        dimension: 2,
        variables: XYZ.iter().map(|s| s.to_string()).collect(),
        components: vec![p("x"), p("y"), p("z")],
        critical_factors: vec![birdeg::ratmap::CriticalFactor {
            id: "z".into(),
            polynomial: p("z"),
            target: pt(&[1, 0, 0]),
            chart: "none".into(),
        }],
        inverse: None,
        parametrizations: BTreeMap::new(),
    };
    assert!(matches!(
        not_contracted.contraction_check("z"),
        Err(MapError::NotContractedToPoint { .. })
    ));
}

#[test]
fn orbits_until_indeterminacy() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    let res = ex2
        .map
        .orbit_until_indeterminate(&pt(&[0, 1, 0]), 10)
        .unwrap();
    assert!(res.hit);
    assert_eq!(res.orbit, vec![pt(&[0, 1, 0]), pt(&[1, 0, 1]), pt(&[0, 1, 1])]);

    let ex1 = FixtureRegistry::load("ex1-penrose-smith").unwrap();
    let a1 = ex1.map.critical_factors[0].target.clone();
    let res = ex1.map.orbit_until_indeterminate(&a1, 10).unwrap();
    assert!(res.hit);
    assert_eq!(res.orbit.len(), 3);
    assert_eq!(res.orbit[0], pt(&[0, 1, -2]));
    assert_eq!(res.orbit[1], pt(&[0, 1, -1]));
    assert_eq!(res.orbit[2], pt(&[0, 2, -1]));

    // fixed point outside the indeterminacy set: constant orbit, no hit
    let fixed = pt(&[2, 2, 1]);
    let res = ex2.map.orbit_until_indeterminate(&fixed, 5).unwrap();
    assert!(!res.hit);
    assert!(res.orbit.iter().all(|q| *q == fixed));
    assert_eq!(res.orbit.len(), 6);
}

#[test]
fn rational_invariant_checks() {
    let ex2 = FixtureRegistry::load("ex2-dpi-plane").unwrap();
    assert!(ex2
        .map
        .verify_rational_invariant(&p("z*(x+y-z)^3"), &p("x^2*y^2"))
        .unwrap());
    assert!(ex2
        .map
        .verify_rational_invariant(&p("x^2*y^2"), &p("x^2*y^2"))
        .unwrap());
    assert!(!ex2
        .map
        .verify_rational_invariant(&p("x^3*z"), &p("y^4"))
        .unwrap());
    assert!(matches!(
        ex2.map.verify_rational_invariant(&p("x"), &p("y^2")),
        Err(MapError::InvariantShape)
    ));
}

#[test]
fn degree_drop_starts_at_first_orbit_completion() {
    let mut r = rng(53);
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let horizon = 6usize;
        // earliest completion: orbit index of the indeterminate point, plus 1
        let mut first_drop: Option<usize> = None;
        for factor in &fixture.map.critical_factors {
            let res = fixture
                .map
                .orbit_until_indeterminate(&factor.target, 12)
                .unwrap();
            if res.hit {
                let n_star = res.orbit.len(); // (len-1) index + 1
                first_drop = Some(first_drop.map_or(n_star, |v: usize| v.min(n_star)));
            }
        }
        let degrees = fixture
            .map
            .minimal_degree_sequence(horizon, &mut r)
            .unwrap();
        let d_plus = fixture.map.degree();
        for n in 1..horizon {
            let dropped = degrees[n + 1] < d_plus * degrees[n];
            match first_drop {
                Some(n_star) if n >= n_star => {
                    if n == n_star {
                        assert!(dropped, "{id}: expected first drop at n = {n_star}");
                    }
                }
                _ => assert!(
                    !dropped,
                    "{id}: unexpected drop at n = {n} (first completion {first_drop:?})"
                ),
            }
        }
    }
}

#[test]
fn fekete_submultiplicativity() {
    for id in FixtureRegistry::builtin_ids() {
        let fixture = FixtureRegistry::load(id).unwrap();
        let rec = fixture.recurrence.as_ref().unwrap();
        let d: Vec<i64> = rec
            .degree_sequence(8)
            .unwrap()
            .iter()
            .map(|v| num_traits::ToPrimitive::to_i64(v).unwrap())
            .collect();
        for n in 1..=7usize {
            for m in 1..=(8 - n) {
                assert!(
                    d[n + m] <= d[n] * d[m],
                    "{id}: d({})={} > d({n})*d({m})={}",
                    n + m,
                    d[n + m],
                    d[n] * d[m]
                );
            }
        }
    }
}

#[test]
fn oracle_matches_index_iteration() {
    let mut r = rng(59);
    for (id, horizon) in [
        ("ex1-penrose-smith", 8usize),
        ("ex2-dpi-plane", 8),
        ("ex3-linearizable", 8),
        ("generic-quadratic", 6),
    ] {
        let fixture = FixtureRegistry::load(id).unwrap();
        let oracle = fixture
            .map
            .minimal_degree_sequence(horizon, &mut r)
            .unwrap();
        let (_, states) = birdeg::dynamics::run_index_iteration(
            &fixture.map,
            &fixture.charts,
            &fixture.tracked,
            horizon,
            &mut r,
        )
        .unwrap();
        let index_degrees: Vec<u32> = states.iter().map(|s| s.d).collect();
        assert_eq!(oracle, index_degrees, "{id}");
    }
}
