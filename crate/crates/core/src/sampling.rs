//! Seeded random generators for endomorphisms and sparse polynomials, used
//! by the sign-pinning search, the structure sampler and the property
//! suites. Everything is deterministic per seed.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{GradedPoly, Monomial};
use crate::error::Result;
use crate::linear::{Endomorphism, GradedBasis};
use crate::mat;
use crate::scalar::Scalar;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random endomorphism of the given degree with small integer entries on the
/// degree-allowed positions.
pub fn random_endomorphism<S: Scalar>(
    basis: &Arc<GradedBasis<S>>,
    degree: i32,
    rng: &mut ChaCha8Rng,
) -> Endomorphism<S> {
    let n = basis.dim();
    let mut entries = mat::zeros::<S>(n, n);
    for i in 0..n {
        for j in 0..n {
            if basis.degree(j) == basis.degree(i) + degree {
                entries[i][j] = S::from_int(rng.gen_range(-3..=3));
            }
        }
    }
    Endomorphism::new(basis.clone(), degree, entries).expect("entries respect the degree pattern")
}

/// Random endomorphism projected onto its transpose-antisymmetric part
/// `(A - A~)/2`; retries until nonzero (if the degree sector admits one).
pub fn random_antisymmetric<S: Scalar>(
    basis: &Arc<GradedBasis<S>>,
    degree: i32,
    rng: &mut ChaCha8Rng,
) -> Option<Endomorphism<S>> {
    for _ in 0..32 {
        let a = random_endomorphism(basis, degree, rng);
        let anti = a.antisymmetric_part();
        if !anti.is_zero() {
            return Some(anti);
        }
    }
    None
}

/// Random endomorphism projected onto its transpose-symmetric part
/// `(A + A~)/2`; retries until nonzero.
pub fn random_symmetric<S: Scalar>(
    basis: &Arc<GradedBasis<S>>,
    degree: i32,
    rng: &mut ChaCha8Rng,
) -> Option<Endomorphism<S>> {
    for _ in 0..32 {
        let a = random_endomorphism(basis, degree, rng);
        let half = S::from_ratio(1, 2);
        let sym = a.add(&a.transpose()).expect("degrees match").scale(&half);
        if !sym.is_zero() {
            return Some(sym);
        }
    }
    None
}

/// Sparse random polynomial: up to `terms` monomials of total degree at most
/// `max_degree`, small integer coefficients.
pub fn random_poly<S: Scalar>(
    basis: &Arc<GradedBasis<S>>,
    max_degree: usize,
    terms: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GradedPoly<S>> {
    let mut list = Vec::with_capacity(terms);
    for _ in 0..terms {
        let mut exps = vec![0u32; basis.dim()];
        let degree = rng.gen_range(0..=max_degree);
        let mut budget = degree;
        while budget > 0 {
            let i = rng.gen_range(0..basis.dim());
            if basis.odd(i) {
                if exps[i] == 0 {
                    exps[i] = 1;
                    budget -= 1;
                } else {
                    budget -= 1; // skip: odd square would vanish
                }
            } else {
                exps[i] += 1;
                budget -= 1;
            }
        }
        let coeff = S::from_int(rng.gen_range(-3..=3));
        list.push((Monomial::from_exponents(exps), coeff));
    }
    GradedPoly::from_terms(basis.clone(), list)
}

/// Sparse random polynomial, homogeneous of one internal degree. Returns the
/// zero polynomial when the sector is empty at the degree bound.
pub fn random_homogeneous_poly<S: Scalar>(
    basis: &Arc<GradedBasis<S>>,
    internal_degree: i32,
    max_degree: usize,
    terms: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GradedPoly<S>> {
    let candidates: Vec<Monomial> = crate::bv::monomials_up_to_degree(basis, max_degree)
        .into_iter()
        .filter(|m| m.internal_degree(basis.as_ref()) == internal_degree)
        .collect();
    if candidates.is_empty() {
        return Ok(GradedPoly::zero(basis.clone()));
    }
    let mut list = Vec::with_capacity(terms);
    for _ in 0..terms {
        let m = candidates[rng.gen_range(0..candidates.len())].clone();
        let coeff = S::from_int(rng.gen_range(-3..=3));
        list.push((m, coeff));
    }
    GradedPoly::from_terms(basis.clone(), list)
}
