//! Property suite for the BV operator calculus over exact rationals: the
//! second-order (seven-term) identity, nilpotency and commutators of
//! deformed Laplacians, the bracket axioms, the bracket-from-Laplacian
//! formula, the quadratic-form commutator and derivation identities, the
//! derivation-defect identity of the two-deformer bracket, and ad-type
//! infinitesimal canonical maps.

use std::sync::Arc;

use bvflow_core::bv::{
    bracket, canonical_bracket, hamiltonian_derivation, mixed_bracket, quadratic_form,
    DeformedLaplacian,
};
use bvflow_core::sampling::{
    random_antisymmetric, random_homogeneous_poly, random_poly, seeded_rng,
};
use bvflow_core::{Endomorphism, GradedBasis, GradedPoly, Rat, Scalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn parity(d: i32) -> bool {
    d.rem_euclid(2) == 1
}

fn signed(p: bool, poly: GradedPoly<Rat>) -> GradedPoly<Rat> {
    if p {
        poly.neg()
    } else {
        poly
    }
}

fn basis6() -> Arc<GradedBasis<Rat>> {
    GradedBasis::<Rat>::standard_pairs(3)
}

fn basis4() -> Arc<GradedBasis<Rat>> {
    GradedBasis::<Rat>::standard_pairs(2)
}

fn random_homogeneous(
    basis: &Arc<GradedBasis<Rat>>,
    rng: &mut ChaCha8Rng,
    max_degree: usize,
) -> GradedPoly<Rat> {
    let span: i32 = max_degree as i32;
    for _ in 0..16 {
        let d = rng.gen_range(-span..=span.min(2));
        let p = random_homogeneous_poly(basis, d, max_degree, 4, rng).unwrap();
        if !p.is_zero() {
            return p;
        }
    }
    GradedPoly::one(basis.clone())
}

fn antisym(
    basis: &Arc<GradedBasis<Rat>>,
    degree: i32,
    rng: &mut ChaCha8Rng,
) -> Option<Endomorphism<Rat>> {
    random_antisymmetric(basis, degree, rng)
}

#[test]
fn seven_term_second_order_identity() {
    // 200 random triples, deformers of even and odd degree.
    let basis = basis6();
    let mut rng = seeded_rng(101);
    let mut count = 0;
    while count < 200 {
        let da = if count % 2 == 0 { 0 } else { -1 };
        let Some(a) = antisym(&basis, da, &mut rng) else { continue };
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let u = random_homogeneous(&basis, &mut rng, 3);
        let v = random_homogeneous(&basis, &mut rng, 3);
        let w = random_homogeneous(&basis, &mut rng, 3);
        let (du, dv, _dw) = (
            u.homogeneous_degree().unwrap(),
            v.homogeneous_degree().unwrap(),
            w.homogeneous_degree().unwrap(),
        );
        let weight = a.degree() + 1;
        let uv = u.mul(&v).unwrap();
        let uw = u.mul(&w).unwrap();
        let vw = v.mul(&w).unwrap();
        let uvw = uv.mul(&w).unwrap();
        let mut rhs = signed(true, lap.apply(&u).unwrap().mul(&vw).unwrap());
        rhs = rhs
            .add(&signed(
                !parity(weight * du),
                u.mul(&lap.apply(&v).unwrap()).unwrap().mul(&w).unwrap(),
            ))
            .unwrap();
        rhs = rhs
            .add(&signed(
                !parity(weight * (du + dv)),
                uv.mul(&lap.apply(&w).unwrap()).unwrap(),
            ))
            .unwrap();
        rhs = rhs.add(&lap.apply(&uv).unwrap().mul(&w).unwrap()).unwrap();
        rhs = rhs
            .add(&signed(
                parity((du + weight) * dv),
                v.mul(&lap.apply(&uw).unwrap()).unwrap(),
            ))
            .unwrap();
        rhs = rhs
            .add(&signed(
                parity(weight * du),
                u.mul(&lap.apply(&vw).unwrap()).unwrap(),
            ))
            .unwrap();
        let lhs = lap.apply(&uvw).unwrap();
        assert!(
            lhs.sub(&rhs).unwrap().is_zero(),
            "seven-term identity failed at sample {count}"
        );
        count += 1;
    }
}

#[test]
fn laplacian_nilpotency_and_commutators() {
    let basis = basis6();
    let mut rng = seeded_rng(202);
    for k in 0..60 {
        let Some(a) = antisym(&basis, 0, &mut rng) else { continue };
        let lap = DeformedLaplacian::new(a).unwrap();
        let u = random_poly(&basis, 4, 5, &mut rng).unwrap();
        assert!(
            lap.apply(&lap.apply(&u).unwrap()).unwrap().is_zero(),
            "Delta_A^2 != 0 at sample {k}"
        );
    }
    // [Delta_A, Delta_B] = 0 for antisymmetric A, B of any degree.
    for k in 0..60 {
        let da = [0, -1, 1][k % 3];
        let db = [0, 1, -1][(k / 3) % 3];
        let (Some(a), Some(b)) = (antisym(&basis, da, &mut rng), antisym(&basis, db, &mut rng))
        else {
            continue;
        };
        let la = DeformedLaplacian::new(a.clone()).unwrap();
        let lb = DeformedLaplacian::new(b.clone()).unwrap();
        let u = random_poly(&basis, 4, 5, &mut rng).unwrap();
        let ab = la.apply(&lb.apply(&u).unwrap()).unwrap();
        let ba = lb.apply(&la.apply(&u).unwrap()).unwrap();
        let sign = parity((a.degree() + 1) * (b.degree() + 1));
        let comm = ab.sub(&signed(sign, ba)).unwrap();
        assert!(comm.is_zero(), "[Delta_A, Delta_B] != 0 at sample {k}");
    }
}

#[test]
fn bracket_degree_antisymmetry_jacobi_leibniz() {
    let basis = basis6();
    let mut rng = seeded_rng(303);
    let mut count = 0;
    while count < 200 {
        let da = if count % 3 == 0 { -1 } else { 0 };
        let Some(a) = antisym(&basis, da, &mut rng) else { continue };
        let u = random_homogeneous(&basis, &mut rng, 3);
        let v = random_homogeneous(&basis, &mut rng, 3);
        let w = random_homogeneous(&basis, &mut rng, 3);
        let (du, dv, dw) = (
            u.homogeneous_degree().unwrap(),
            v.homogeneous_degree().unwrap(),
            w.homogeneous_degree().unwrap(),
        );
        // Degree.
        let uv = bracket(&u, &v, &a).unwrap();
        if let Some(d) = uv.homogeneous_degree() {
            if !uv.is_zero() {
                assert_eq!(d, du + dv + a.degree() + 1, "bracket degree wrong");
            }
        }
        // Shifted antisymmetry.
        let vu = bracket(&v, &u, &a).unwrap();
        let sign = parity(a.degree() * (du + dv) + (du + 1) * (dv + 1));
        assert!(
            uv.add(&signed(sign, vu)).unwrap().is_zero(),
            "antisymmetry failed at {count}"
        );
        // Two-slot Leibniz.
        let vw_prod = v.mul(&w).unwrap();
        let lhs = bracket(&u, &vw_prod, &a).unwrap();
        let rhs = bracket(&u, &v, &a)
            .unwrap()
            .mul(&w)
            .unwrap()
            .add(&signed(
                parity((du + a.degree() + 1) * dv),
                v.mul(&bracket(&u, &w, &a).unwrap()).unwrap(),
            ))
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().is_zero(), "Leibniz failed at {count}");
        // Unit annihilation.
        let one = GradedPoly::one(basis.clone());
        assert!(bracket(&u, &one, &a).unwrap().is_zero());
        // Graded Jacobi for even deformers.
        if a.degree() % 2 == 0 {
            let t1 = signed(
                parity((dw + 1) * (du + 1)),
                bracket(&u, &bracket(&v, &w, &a).unwrap(), &a).unwrap(),
            );
            let t2 = signed(
                parity((du + 1) * (dv + 1)),
                bracket(&v, &bracket(&w, &u, &a).unwrap(), &a).unwrap(),
            );
            let t3 = signed(
                parity((dv + 1) * (dw + 1)),
                bracket(&w, &bracket(&u, &v, &a).unwrap(), &a).unwrap(),
            );
            assert!(
                t1.add(&t2).unwrap().add(&t3).unwrap().is_zero(),
                "Jacobi failed at {count}"
            );
        }
        count += 1;
    }
}

#[test]
fn bracket_from_laplacian_formula() {
    let basis = basis6();
    let mut rng = seeded_rng(404);
    let mut count = 0;
    while count < 100 {
        let da = if count % 2 == 0 { 0 } else { -1 };
        let Some(a) = antisym(&basis, da, &mut rng) else { continue };
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let u = random_homogeneous(&basis, &mut rng, 3);
        let v = random_homogeneous(&basis, &mut rng, 3);
        let du = u.homogeneous_degree().unwrap();
        let weight = a.degree() + 1;
        let uv = u.mul(&v).unwrap();
        let inner = lap
            .apply(&uv)
            .unwrap()
            .sub(&lap.apply(&u).unwrap().mul(&v).unwrap())
            .unwrap()
            .sub(&signed(parity(weight * du), u.mul(&lap.apply(&v).unwrap()).unwrap()))
            .unwrap();
        let rhs = signed(parity(weight * du), inner);
        let lhs = bracket(&u, &v, &a).unwrap();
        assert!(
            lhs.sub(&rhs).unwrap().is_zero(),
            "bracket-from-Laplacian failed at {count}"
        );
        count += 1;
    }
}

#[test]
fn quadratic_commutator_identity() {
    // [<x,B ad x>, Delta_A] = (-1)^{1+|B|} Delta_{AB+BA} for even
    // antisymmetric A and antisymmetric B.
    let basis = basis4();
    let mut rng = seeded_rng(505);
    let mut count = 0;
    while count < 60 {
        let db = [0, -1, 1][count % 3];
        let (Some(a), Some(b)) = (antisym(&basis, 0, &mut rng), antisym(&basis, db, &mut rng))
        else {
            continue;
        };
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let combo = a.matmul(&b).unwrap().add(&b.matmul(&a).unwrap()).unwrap();
        let lap_combo = DeformedLaplacian::new(combo).unwrap();
        let u = random_poly(&basis, 4, 5, &mut rng).unwrap();
        let deriv = |p: &GradedPoly<Rat>| hamiltonian_derivation(&b, p).unwrap();
        let lhs = deriv(&lap.apply(&u).unwrap())
            .sub(&signed(
                parity(b.degree() * (a.degree() + 1)),
                lap.apply(&deriv(&u)).unwrap(),
            ))
            .unwrap();
        let rhs = signed(!parity(b.degree()), lap_combo.apply(&u).unwrap());
        assert!(
            lhs.sub(&rhs).unwrap().is_zero(),
            "commutator identity failed at {count} (|B| = {db})"
        );
        count += 1;
    }
}

#[test]
fn quadratic_derivation_identity_on_brackets() {
    // <x,B ad x> (u,v)_A = (<x,B ad x> u, v)_A
    //   + (-1)^{|B|(|u|+1)} (u, <x,B ad x> v)_A
    //   - (-1)^{|B|(|u|+1)} (u, v)_{AB+BA}.
    let basis = basis4();
    let mut rng = seeded_rng(606);
    let mut count = 0;
    while count < 60 {
        let db = [0, -1, 1][count % 3];
        let (Some(a), Some(b)) = (antisym(&basis, 0, &mut rng), antisym(&basis, db, &mut rng))
        else {
            continue;
        };
        let combo = a.matmul(&b).unwrap().add(&b.matmul(&a).unwrap()).unwrap();
        let u = random_homogeneous(&basis, &mut rng, 3);
        let v = random_homogeneous(&basis, &mut rng, 3);
        let du = u.homogeneous_degree().unwrap();
        let deriv = |p: &GradedPoly<Rat>| hamiltonian_derivation(&b, p).unwrap();
        let lhs = deriv(&bracket(&u, &v, &a).unwrap());
        let sign = parity(b.degree() * (du + 1));
        let rhs = bracket(&deriv(&u), &v, &a)
            .unwrap()
            .add(&signed(sign, bracket(&u, &deriv(&v), &a).unwrap()))
            .unwrap()
            .sub(&signed(sign, bracket(&u, &v, &combo).unwrap()))
            .unwrap();
        assert!(
            lhs.sub(&rhs).unwrap().is_zero(),
            "derivation identity failed at {count} (|B| = {db})"
        );
        count += 1;
    }
}

#[test]
fn mixed_bracket_defect_identity() {
    // Delta_A (u,v)_B = (Delta_A u, v)_B
    //   + (-1)^{(|A|+1)(|B|+|u|+1)} (u, Delta_A v)_B + [u,v]_{A,B},
    // including the A = B case.
    let basis = basis4();
    let mut rng = seeded_rng(707);
    let mut count = 0;
    while count < 60 {
        let (da, db) = [(0, 0), (0, -1), (-1, 0)][count % 3];
        let (Some(a), Some(mut b)) =
            (antisym(&basis, da, &mut rng), antisym(&basis, db, &mut rng))
        else {
            continue;
        };
        if count % 4 == 0 && da == db {
            b = a.clone();
        }
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let u = random_homogeneous(&basis, &mut rng, 3);
        let v = random_homogeneous(&basis, &mut rng, 3);
        let du = u.homogeneous_degree().unwrap();
        let lhs = lap.apply(&bracket(&u, &v, &b).unwrap()).unwrap();
        let sign = parity((a.degree() + 1) * (b.degree() + du + 1));
        let rhs = bracket(&lap.apply(&u).unwrap(), &v, &b)
            .unwrap()
            .add(&signed(sign, bracket(&u, &lap.apply(&v).unwrap(), &b).unwrap()))
            .unwrap()
            .add(&mixed_bracket(&u, &v, &a, &b).unwrap())
            .unwrap();
        assert!(
            lhs.sub(&rhs).unwrap().is_zero(),
            "defect identity failed at {count} (|A|={da}, |B|={db})"
        );
        count += 1;
    }
}

#[test]
fn mixed_bracket_annihilates_constants() {
    let basis = basis4();
    let mut rng = seeded_rng(708);
    let a = antisym(&basis, 0, &mut rng).unwrap();
    let b = antisym(&basis, 0, &mut rng).unwrap();
    let u = random_poly(&basis, 3, 4, &mut rng).unwrap();
    let c = GradedPoly::constant(basis.clone(), Rat::from_int(7));
    assert!(mixed_bracket(&c, &u, &a, &b).unwrap().is_zero());
    assert!(mixed_bracket(&u, &c, &a, &b).unwrap().is_zero());
}

#[test]
fn ad_type_infinitesimal_canonical_maps() {
    // xi = ad_E p for |p| = -1 is infinitesimal canonical with Jacobian
    // e_xi = -Delta_E p: Delta(xi u) - xi(Delta u) + (e_xi, u)_E = 0.
    let basis = basis6();
    let mut rng = seeded_rng(808);
    let lap = DeformedLaplacian::canonical(basis.clone());
    for k in 0..40 {
        let p = random_homogeneous_poly(&basis, -1, 3, 4, &mut rng).unwrap();
        if p.is_zero() {
            continue;
        }
        let u = random_poly(&basis, 3, 4, &mut rng).unwrap();
        let xi = |w: &GradedPoly<Rat>| canonical_bracket(&p, w).unwrap();
        let e_xi = lap.apply(&p).unwrap().neg();
        let residual = lap
            .apply(&xi(&u))
            .unwrap()
            .sub(&xi(&lap.apply(&u).unwrap()))
            .unwrap()
            .add(&canonical_bracket(&e_xi, &u).unwrap())
            .unwrap();
        assert!(residual.is_zero(), "ad-type canonical map failed at {k}");
    }
}

#[test]
fn trace_transpose_commutator_on_random_pairs() {
    // grtr [A,B] = 0, [A,B]~ = [A~,B~], grtr A~ = grtr A and A~~ = A on
    // 100+ random homogeneous pairs across degree sectors.
    use bvflow_core::{graded_commutator, graded_trace};
    let basis = basis6();
    let mut rng = seeded_rng(1111);
    let mut count = 0;
    while count < 120 {
        let da = [0, 1, -1][count % 3];
        let db = [0, -1, 1][(count / 3) % 3];
        let a = bvflow_core::sampling::random_endomorphism::<Rat>(&basis, da, &mut rng);
        let b = bvflow_core::sampling::random_endomorphism::<Rat>(&basis, db, &mut rng);
        let comm = graded_commutator(&a, &b).unwrap();
        assert!(graded_trace(&comm).is_zero(), "trace of commutator at {count}");
        assert_eq!(
            comm.transpose(),
            graded_commutator(&a.transpose(), &b.transpose()).unwrap(),
            "transpose does not intertwine the commutator at {count}"
        );
        assert_eq!(graded_trace(&a.transpose()), graded_trace(&a));
        assert_eq!(a.transpose().transpose(), a, "involution at {count}");
        if a.is_antisymmetric(0.0) {
            assert!(graded_trace(&a).is_zero());
        }
        count += 1;
    }
}

#[test]
fn identity_witness_has_zero_canonical_residual() {
    use bvflow_core::bv::{canonical_residual, CanonicalMapWitness};
    use bvflow_core::FlowMap;
    let basis = basis4();
    let id = Endomorphism::identity(basis.clone());
    let w = CanonicalMapWitness::new(
        FlowMap::identity(basis.clone(), 6),
        id.clone(),
        id,
        GradedPoly::zero(basis.clone()),
    )
    .unwrap();
    let probe = GradedPoly::from_factor_list(basis, &[0, 2], Rat::from_int(1));
    let check = canonical_residual(&w, &[probe]).unwrap();
    assert!(check.canonical_exact && check.jacobian_me_exact && check.bracket_preservation_exact);
}

#[test]
fn laplacian_annihilates_unit_and_coordinates() {
    let basis = basis4();
    let mut rng = seeded_rng(909);
    let a = antisym(&basis, 0, &mut rng).unwrap();
    let lap = DeformedLaplacian::new(a).unwrap();
    assert!(lap.apply(&GradedPoly::one(basis.clone())).unwrap().is_zero());
    for i in 0..basis.dim() {
        let xi = GradedPoly::coordinate(basis.clone(), i);
        assert!(lap.apply(&xi).unwrap().is_zero());
    }
}

#[test]
fn quadratic_form_depends_on_symmetric_part_only() {
    let basis = basis4();
    let mut rng = seeded_rng(1010);
    for _ in 0..20 {
        let a = random_antisymmetric(&basis, 0, &mut rng).unwrap();
        assert!(quadratic_form(&a).unwrap().is_zero());
    }
}

#[test]
fn scaling_map_is_not_canonical() {
    // x -> 2x with r = 0 between identical canonical Laplacians has a
    // nonzero residual on a quadratic probe.
    use bvflow_core::bv::{canonical_residual, CanonicalMapWitness};
    use bvflow_core::FlowMap;
    let basis = basis4();
    let two = Rat::from_int(2);
    let mat: Vec<Vec<Rat>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| if i == j { two.clone() } else { Rat::from_int(0) })
                .collect()
        })
        .collect();
    let map = FlowMap::linear(basis.clone(), &mat, 6).unwrap();
    let id = Endomorphism::identity(basis.clone());
    let w = CanonicalMapWitness::new(
        map,
        id.clone(),
        id,
        GradedPoly::zero(basis.clone()),
    )
    .unwrap();
    let probe = GradedPoly::from_factor_list(basis.clone(), &[0, 2], Rat::from_int(1));
    let check = canonical_residual(&w, &[probe]).unwrap();
    assert!(check.canonical > 0.0);
}

#[test]
fn linear_substitution_transforms_quadratic_forms_by_congruence() {
    // apply(x -> Mx) on <x,Bx> agrees with the brute-force expansion
    // sum (Mx)_i B^i_j (Mx)^j built directly from polynomial products.
    use bvflow_core::FlowMap;
    let basis = basis4();
    let mut rng = seeded_rng(1313);
    for _ in 0..12 {
        let m_endo = bvflow_core::sampling::random_endomorphism::<Rat>(&basis, 0, &mut rng);
        let b = bvflow_core::sampling::random_symmetric::<Rat>(&basis, 1, &mut rng).unwrap();
        let phi = FlowMap::linear(basis.clone(), m_endo.entries(), 8).unwrap();
        let (via_map, truncated) = phi.apply(&quadratic_form(&b).unwrap()).unwrap();
        assert!(!truncated);
        // Brute force: images of the coordinates and their symplectic duals.
        let image: Vec<GradedPoly<Rat>> = (0..4)
            .map(|j| {
                let mut p = GradedPoly::zero(basis.clone());
                for (k, c) in m_endo.entries()[j].iter().enumerate() {
                    p = p
                        .add(&GradedPoly::coordinate(basis.clone(), k).scale(c))
                        .unwrap();
                }
                p
            })
            .collect();
        let mut direct = GradedPoly::zero(basis.clone());
        for i in 0..4 {
            for j in 0..4 {
                let coeff = b.entry(i, j);
                if coeff.is_zero() {
                    continue;
                }
                // (Mx)_i = -w_il (Mx)^l
                let mut dual = GradedPoly::zero(basis.clone());
                for (l, img) in image.iter().enumerate() {
                    let w = &basis.omega()[i][l];
                    if !w.is_zero() {
                        dual = dual.add(&img.scale(&w.neg())).unwrap();
                    }
                }
                direct = direct
                    .add(&dual.scale(coeff).mul(&image[j]).unwrap())
                    .unwrap();
            }
        }
        assert_eq!(via_map, direct);
    }
}

#[test]
fn quadratic_action_master_equation_residual_formula() {
    // For S = <x,Bx> with symmetric B and even antisymmetric A:
    // Delta_A S + (S,S)_A / 2 = grtr(AB) + 2 <x,BABx>.
    use bvflow_core::{qme_residual, HbarSeries};
    let basis = basis4();
    let mut rng = seeded_rng(1414);
    for k in 0..10 {
        // The action must be degree 0, so B carries degree 1; the deformer
        // alternates between the even and odd antisymmetric sectors.
        let da = if k % 2 == 0 { 0 } else { -1 };
        let Some(a) = random_antisymmetric::<Rat>(&basis, da, &mut rng) else {
            continue;
        };
        let Some(b) = bvflow_core::sampling::random_symmetric::<Rat>(&basis, 1, &mut rng) else {
            continue;
        };
        let s = quadratic_form(&b).unwrap();
        let series = HbarSeries::from_poly(s, 1);
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let residual = qme_residual(&series, &lap, false).unwrap();
        let bab = b.matmul(&a).unwrap().matmul(&b).unwrap();
        let expected = GradedPoly::constant(
            basis.clone(),
            bvflow_core::graded_trace(&a.matmul(&b).unwrap()),
        )
        .add(&quadratic_form(&bab).unwrap().scale(&Rat::from_int(2)))
        .unwrap();
        assert_eq!(residual.coefficient(0), &expected);
        assert!(residual.coefficient(1).is_zero());
    }
}
