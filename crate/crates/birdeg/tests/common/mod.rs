//! Shared helpers for the integration suites.

use birdeg::poly::{MultiPoly, Rat};
use num_bigint::BigInt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rat(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Random homogeneous polynomial of the given total degree in `vars`
/// variables, with small integer coefficients; never zero.
pub fn random_homogeneous(
    rng: &mut impl Rng,
    vars: usize,
    degree: u32,
    density: f64,
) -> MultiPoly {
    loop {
        let mut terms = Vec::new();
        for exps in exponent_vectors(vars, degree) {
            if rng.gen_bool(density) {
                let c = rng.gen_range(-4i64..=4);
                if c != 0 {
                    terms.push((exps, rat(c)));
                }
            }
        }
        let p = MultiPoly::from_terms(vars, terms);
        if !p.is_zero() {
            return p;
        }
    }
}

pub fn exponent_vectors(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn go(vars: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if vars == 1 {
            let mut full = prefix.clone();
            full.push(degree);
            out.push(full);
            return;
        }
        for e in 0..=degree {
            prefix.push(e);
            go(vars - 1, degree - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(vars, degree, &mut Vec::new(), &mut out);
    out
}
