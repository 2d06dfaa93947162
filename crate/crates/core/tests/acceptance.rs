//! Acceptance suite: every criterion is executed at its stated tolerance and
//! prints one pass/fail line. Criterion 8 (command-line determinism and exit
//! codes) lives in the driver crate's own acceptance suite.

use std::sync::Arc;
use std::time::Instant;

use bvflow_core::bv::{
    bracket, flow_suite, hamiltonian_derivation, quadratic_form, reconstruct_flow,
    sign_convention_survivors, DeformedLaplacian, FlowSuiteTolerances, ProbeMode,
};
use bvflow_core::gl11::{dim2_unit, sample_gl11, validate_gl11, Nilpotency};
use bvflow_core::perturbation::{
    full_action_partner_residual, interaction_me_residual, partner_solve, rge_evolve,
    InteractionTerm,
};
use bvflow_core::report::all_pass;
use bvflow_core::sampling::{random_antisymmetric, random_homogeneous_poly, seeded_rng};
use bvflow_core::{
    qme_residual, tol, FreeModel, GradedBasis, GradedPoly, HbarSeries, Rat, Scalar,
    SIGNS,
};
use rand::Rng;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let flag = if pass { "PASS" } else { "FAIL" };
    println!("[{flag}] {criterion}: {detail}");
    assert!(pass, "{criterion}: {detail}");
}

fn probe_monomials<S: Scalar>(basis: &Arc<GradedBasis<S>>, dmax: usize) -> Vec<GradedPoly<S>> {
    bvflow_core::bv::monomials_up_to_degree(basis, dmax)
        .into_iter()
        .filter(|m| !m.is_unit())
        .map(|m| GradedPoly::from_terms(basis.clone(), [(m, S::one())]).expect("valid"))
        .collect()
}

fn dim4_nilpotent() -> FreeModel<Rat> {
    FreeModel::new(sample_gl11::<Rat>(4, 42, Nilpotency::Nilpotent, 4000).unwrap()).unwrap()
}

#[test]
fn criterion_1_sign_pinning_oracle() {
    let start = Instant::now();
    let basis = GradedBasis::<Rat>::standard_pairs(2);
    let survivors = sign_convention_survivors(&basis, 20260810, 4).unwrap();
    let elapsed = start.elapsed();
    let unique = survivors.len() == 1 && survivors[0] == SIGNS;
    let fast = elapsed.as_secs_f64() < 10.0;
    verdict(
        "criterion 1 (sign-pinning oracle)",
        unique && fast,
        &format!(
            "{} survivor(s), frozen assignment matched: {}, search took {:.2}s (< 10s)",
            survivors.len(),
            survivors.first() == Some(&SIGNS),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_bv_axiom_suite() {
    let start = Instant::now();
    let basis = GradedBasis::<Rat>::standard_pairs(3);
    let mut rng = seeded_rng(4242);
    let mut samples = 0usize;
    let mut all_exact = true;
    let parity = |d: i32| d.rem_euclid(2) == 1;
    let signed = |p: bool, q: GradedPoly<Rat>| if p { q.neg() } else { q };
    while samples < 200 {
        let Some(a) = random_antisymmetric(&basis, 0, &mut rng) else { continue };
        let lap = DeformedLaplacian::new(a.clone()).unwrap();
        let mut draw = |limit: usize| loop {
            let d = rng.gen_range(-2..=2);
            let p = random_homogeneous_poly::<Rat>(&basis, d, limit, 3, &mut rng).unwrap();
            if !p.is_zero() {
                return p;
            }
        };
        let u = draw(5);
        let v = draw(4);
        let w = draw(3);
        let (du, dv) = (
            u.homogeneous_degree().unwrap(),
            v.homogeneous_degree().unwrap(),
        );
        // Seven-term second-order identity.
        let uv = u.mul(&v).unwrap();
        let vw = v.mul(&w).unwrap();
        let uw = u.mul(&w).unwrap();
        let uvw = uv.mul(&w).unwrap();
        let mut rhs = signed(true, lap.apply(&u).unwrap().mul(&vw).unwrap());
        rhs = rhs
            .add(&signed(!parity(du), u.mul(&lap.apply(&v).unwrap()).unwrap().mul(&w).unwrap()))
            .unwrap();
        rhs = rhs
            .add(&signed(!parity(du + dv), uv.mul(&lap.apply(&w).unwrap()).unwrap()))
            .unwrap();
        rhs = rhs.add(&lap.apply(&uv).unwrap().mul(&w).unwrap()).unwrap();
        rhs = rhs
            .add(&signed(parity((du + 1) * dv), v.mul(&lap.apply(&uw).unwrap()).unwrap()))
            .unwrap();
        rhs = rhs
            .add(&signed(parity(du), u.mul(&lap.apply(&vw).unwrap()).unwrap()))
            .unwrap();
        all_exact &= lap.apply(&uvw).unwrap().sub(&rhs).unwrap().is_zero();
        // Nilpotency and the mixed commutator (both operators of odd total
        // degree, so the graded commutator is the anticommutator).
        all_exact &= lap.apply(&lap.apply(&u).unwrap()).unwrap().is_zero();
        if let Some(b) = random_antisymmetric(&basis, 0, &mut rng) {
            let lb = DeformedLaplacian::new(b).unwrap();
            let ab = lap.apply(&lb.apply(&u).unwrap()).unwrap();
            let ba = lb.apply(&lap.apply(&u).unwrap()).unwrap();
            all_exact &= ab.add(&ba).unwrap().is_zero();
        }
        // Bracket antisymmetry, Jacobi, Leibniz, bracket-from-Laplacian.
        let br_uv = bracket(&u, &v, &a).unwrap();
        let br_vu = bracket(&v, &u, &a).unwrap();
        all_exact &= br_uv
            .add(&signed(parity((du + 1) * (dv + 1)), br_vu))
            .unwrap()
            .is_zero();
        let t1 = signed(
            parity((w.homogeneous_degree().unwrap() + 1) * (du + 1)),
            bracket(&u, &bracket(&v, &w, &a).unwrap(), &a).unwrap(),
        );
        let t2 = signed(
            parity((du + 1) * (dv + 1)),
            bracket(&v, &bracket(&w, &u, &a).unwrap(), &a).unwrap(),
        );
        let t3 = signed(
            parity((dv + 1) * (w.homogeneous_degree().unwrap() + 1)),
            bracket(&w, &br_uv, &a).unwrap(),
        );
        all_exact &= t1.add(&t2).unwrap().add(&t3).unwrap().is_zero();
        let leib = bracket(&u, &vw, &a)
            .unwrap()
            .sub(&br_uv.mul(&w).unwrap())
            .unwrap()
            .sub(&signed(parity((du + 1) * dv), v.mul(&bracket(&u, &w, &a).unwrap()).unwrap()))
            .unwrap();
        all_exact &= leib.is_zero();
        let from_lap = signed(
            parity(du),
            lap.apply(&uv)
                .unwrap()
                .sub(&lap.apply(&u).unwrap().mul(&v).unwrap())
                .unwrap()
                .sub(&signed(parity(du), u.mul(&lap.apply(&v).unwrap()).unwrap()))
                .unwrap(),
        );
        all_exact &= br_uv.sub(&from_lap).unwrap().is_zero();
        samples += 1;
    }
    let elapsed = start.elapsed();
    verdict(
        "criterion 2 (BV axiom suite)",
        all_exact && elapsed.as_secs_f64() < 60.0,
        &format!(
            "{samples} random tuples, all identities exactly zero: {all_exact}, {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_gl11_fixtures_and_negative_controls() {
    let fixtures: Vec<(&str, Vec<bvflow_core::CheckRecord>)> = vec![
        (
            "dim 2",
            validate_gl11(dim2_unit::<Rat>().structure()).unwrap(),
        ),
        (
            "dim 4",
            validate_gl11(dim4_nilpotent().structure()).unwrap(),
        ),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (name, records) in &fixtures {
        let ok = all_pass(records);
        pass &= ok;
        detail.push_str(&format!("{name}: {} axioms pass; ", records.len()));
    }
    // Negative controls: each corruption must fail on exactly the named
    // axiom class.
    let m = dim4_nilpotent();
    let mut corrupt_h = m.structure().clone();
    corrupt_h.h = corrupt_h.h.scale(&Rat::from_int(2));
    let failed: Vec<String> = validate_gl11(&corrupt_h)
        .unwrap()
        .into_iter()
        .filter(|r| !r.pass)
        .map(|r| r.name)
        .collect();
    pass &= failed == vec!["comm_q_qbar_h".to_string()];
    detail.push_str(&format!("corrupted H fails exactly {failed:?}; "));
    let mut corrupt_q = m.structure().clone();
    corrupt_q.q = corrupt_q.q.scale(&Rat::from_int(3));
    let failed_q: Vec<String> = validate_gl11(&corrupt_q)
        .unwrap()
        .into_iter()
        .filter(|r| !r.pass)
        .map(|r| r.name)
        .collect();
    pass &= failed_q.contains(&"comm_q_qbar_h".to_string())
        || failed_q.contains(&"comm_f_q".to_string());
    detail.push_str(&format!("corrupted Q fails {failed_q:?}"));
    verdict("criterion 3 (gl(1|1) fixtures)", pass, &detail);
}

#[test]
fn criterion_4_free_basic_model() {
    // Exact master equation over five rational grid points, nilpotent H.
    let m = dim4_nilpotent();
    let mut pass = true;
    let mut worst_exact = true;
    for k in -2..=2 {
        let t = Rat::from_ratio(k, 3);
        let action = HbarSeries::from_poly(m.free_action(&t).unwrap(), 2);
        let lap = m.free_laplacian(&t).unwrap();
        worst_exact &= qme_residual(&action, &lap, false).unwrap().is_zero();
    }
    pass &= worst_exact;
    // Float master equation at five grid points.
    let mf = dim2_unit::<f64>();
    let mut worst_float: f64 = 0.0;
    for k in -2..=2 {
        let t = k as f64 * 0.3;
        let action = HbarSeries::from_poly(mf.free_action(&t).unwrap(), 2);
        let lap = mf.free_laplacian(&t).unwrap();
        worst_float = worst_float.max(qme_residual(&action, &lap, false).unwrap().max_abs_coeff());
    }
    pass &= worst_float <= tol::FREE_QME_F64;
    // Flow suite with finite differences at step 1e-4.
    let family = mf.basic_flow_family(
        vec![0.0, 0.35, 0.7],
        8,
        ProbeMode::CentralDifference { step: 1e-4 },
    );
    let probes = probe_monomials(mf.basis(), 3);
    let records = flow_suite(
        &family,
        &probes,
        FlowSuiteTolerances {
            algebraic: tol::FLOW_FD,
            finite_difference: tol::FLOW_FD,
        },
    )
    .unwrap();
    let suite_ok = all_pass(&records);
    let suite_max = bvflow_core::report::max_residual(&records);
    pass &= suite_ok;
    // Conjugation-built Laplacian equals the direct deformer formula on all
    // monomials of degree <= 4 (exact, rational).
    let t = Rat::from_ratio(3, 4);
    let zero = Rat::from_int(0);
    let to_t = m.free_flow(&zero, &t, 8).unwrap();
    let to_zero = m.free_flow(&t, &zero, 8).unwrap();
    let canonical = DeformedLaplacian::canonical(m.basis().clone());
    let direct = m.free_laplacian(&t).unwrap();
    let mut conj_exact = true;
    for probe in probe_monomials(m.basis(), 4) {
        let (pulled, _) = to_zero.apply(&probe).unwrap();
        let (conjugated, _) = to_t.apply(&canonical.apply(&pulled).unwrap()).unwrap();
        conj_exact &= conjugated.sub(&direct.apply(&probe).unwrap()).unwrap().is_zero();
    }
    pass &= conj_exact;
    verdict(
        "criterion 4 (free basic model)",
        pass,
        &format!(
            "exact ME: {worst_exact}, float ME max {worst_float:.2e} (<= {:.0e}), \
             flow suite max {suite_max:.2e} (<= {:.0e}, pass {suite_ok}), \
             conjugation-built Laplacian exact: {conj_exact}",
            tol::FREE_QME_F64,
            tol::FLOW_FD
        ),
    );
}

#[test]
fn criterion_5_extended_model() {
    let m = dim4_nilpotent();
    let probes = probe_monomials(m.basis(), 3);
    let records = m
        .extended_checks(&Rat::from_ratio(-1, 3), &Rat::from_ratio(1, 2), &probes, 8, 0.0)
        .unwrap();
    let rational_ok = all_pass(&records);
    let mf = dim2_unit::<f64>();
    let probes_f = probe_monomials(mf.basis(), 3);
    let records_f = mf.extended_checks(&0.3, &0.8, &probes_f, 8, 1e-10).unwrap();
    let float_ok = all_pass(&records_f);
    // Polchinski projection with second-order convergence at h and h/2.
    let r1 = mf.polchinski_residual(&0.3, &1e-4).unwrap();
    let r2 = mf.polchinski_residual(&0.3, &5e-5).unwrap();
    let ratio = r1 / r2;
    let polchinski_ok = r1 <= tol::POLCHINSKI && (2.0..8.0).contains(&ratio);
    verdict(
        "criterion 5 (extended model)",
        rational_ok && float_ok && polchinski_ok,
        &format!(
            "componentwise MEs + soul-from-flow exact: {rational_ok}, float: {float_ok}, \
             Polchinski residual {r1:.2e} (<= {:.0e}) with h-halving ratio {ratio:.1}",
            tol::POLCHINSKI
        ),
    );
}

#[test]
fn criterion_6_reconstruction() {
    let m = dim2_unit::<f64>();
    let probes = probe_monomials(m.basis(), 3);
    let generator = {
        let model = m.clone();
        move |_tau: &f64| model.free_generator()
    };
    let laplacians = m.laplacian_family(1e-4);
    let rec =
        reconstruct_flow(&generator, &laplacians, &0.0, &1.0, 100, 6, &probes, 1e-9).unwrap();
    let closed = m.free_flow(&0.0, &1.0, 6).unwrap();
    let err100 = rec.map.max_image_diff(&closed).unwrap();
    let rec50 =
        reconstruct_flow(&generator, &laplacians, &0.0, &1.0, 50, 6, &probes, 1e-9).unwrap();
    let err50 = rec50.map.max_image_diff(&closed).unwrap();
    let ratio = err50 / err100;
    let pass = err100 <= tol::RECONSTRUCT
        && (13.0..=19.0).contains(&ratio)
        && all_pass(&rec.checks);
    verdict(
        "criterion 6 (reconstruction)",
        pass,
        &format!(
            "closed-form error {err100:.2e} (<= {:.0e}) at 100 steps over |t-s| = 1, \
             step-halving ratio {ratio:.1} in 16 +/- 3, hypotheses checked: {}",
            tol::RECONSTRUCT,
            all_pass(&rec.checks)
        ),
    );
}

#[test]
fn criterion_7_perturbation() {
    let m = FreeModel::new(sample_gl11::<f64>(4, 42, Nilpotency::Nilpotent, 4000).unwrap()).unwrap();
    let x = GradedPoly::coordinate(m.basis().clone(), 3);
    let cubic = x.mul(&x).unwrap().mul(&x).unwrap().scale(&0.1);
    let seeded = InteractionTerm::new(HbarSeries::from_poly(cubic, 4), 0.0).unwrap();
    let start_res = interaction_me_residual(&seeded, &m).unwrap().max_abs_coeff();
    let seeded_ok = start_res <= 1e-9;
    let (evolved, _) = rge_evolve(&seeded, &m, &1.0, 200, 6).unwrap();
    let end_res = interaction_me_residual(&evolved, &m).unwrap().max_abs_coeff();
    let trajectory_ok = end_res <= tol::TRAJECTORY_F64;
    // Full-vs-interaction cancellation, exact in rational mode on the
    // ladder basis where the residual is nonvacuous.
    let ml = bvflow_core::gl11::ladder4::<Rat>();
    let ladder_cubic =
        GradedPoly::from_factor_list(ml.basis().clone(), &[1, 2, 3], Rat::from_int(1));
    let il = InteractionTerm::new(HbarSeries::from_poly(ladder_cubic, 3), Rat::from_int(0)).unwrap();
    let full = HbarSeries::from_poly(ml.free_action(&Rat::from_int(0)).unwrap(), 3)
        .add(il.series())
        .unwrap();
    let lap = ml.free_laplacian(&Rat::from_int(0)).unwrap();
    let full_res = qme_residual(&full, &lap, true).unwrap();
    let int_res = interaction_me_residual(&il, &ml).unwrap();
    let cancellation_exact = full_res == int_res && !int_res.is_zero();
    // Partner: solve along a tamer trajectory where the truncated system is
    // consistent, report the residual, and confirm that a zero residual
    // implies the full-action partner equation.
    let tame = InteractionTerm::new(
        HbarSeries::from_poly(
            {
                let x = GradedPoly::coordinate(m.basis().clone(), 3);
                x.mul(&x).unwrap().mul(&x).unwrap().scale(&0.02)
            },
            4,
        ),
        0.0,
    )
    .unwrap();
    let (tame_evolved, _) = rge_evolve(&tame, &m, &0.25, 100, 8).unwrap();
    let partner = partner_solve(&tame_evolved, &m, 8).unwrap();
    let partner_zero = partner.residual <= 1e-9;
    let full_partner = full_action_partner_residual(
        tame_evolved.series(),
        &partner.series,
        &m,
        tame_evolved.scale(),
    )
    .unwrap()
    .max_abs_coeff();
    let partner_ok = partner_zero && full_partner <= tol::PARTNER_FULL;
    verdict(
        "criterion 7 (perturbation)",
        seeded_ok && trajectory_ok && cancellation_exact && partner_ok,
        &format!(
            "seeded ME {start_res:.1e} (<= 1e-9), after 200 steps K=4 D_max=6: {end_res:.2e} \
             (<= {:.0e}); cancellation exact on nonvacuous residual: {cancellation_exact}; \
             partner residual {:.2e} reported (zero branch exercised), full-action partner \
             equation {full_partner:.2e} (<= {:.0e})",
            tol::TRAJECTORY_F64,
            partner.residual,
            tol::PARTNER_FULL
        ),
    );
}

#[test]
fn quadratic_form_identities_cross_check() {
    // The three pinned identities replayed once on the shipped dim-4
    // structure as a direct spot check of the frozen constants.
    let m = dim4_nilpotent();
    let basis = m.basis().clone();
    let mut rng = seeded_rng(99);
    let a = random_antisymmetric::<Rat>(&basis, 0, &mut rng).unwrap();
    let b = bvflow_core::sampling::random_symmetric::<Rat>(&basis, 0, &mut rng).unwrap();
    let c = bvflow_core::sampling::random_symmetric::<Rat>(&basis, 0, &mut rng).unwrap();
    let lap = DeformedLaplacian::new(a.clone()).unwrap();
    let qb = quadratic_form(&b).unwrap();
    let qc = quadratic_form(&c).unwrap();
    let id1 = lap
        .apply(&qb)
        .unwrap()
        .sub(&GradedPoly::constant(
            basis.clone(),
            bvflow_core::graded_trace(&a.matmul(&b).unwrap()),
        ))
        .unwrap();
    let id2 = bracket(&qb, &qc, &a)
        .unwrap()
        .sub(
            &quadratic_form(&b.matmul(&a).unwrap().matmul(&c).unwrap())
                .unwrap()
                .scale(&Rat::from_int(4)),
        )
        .unwrap();
    let combo = a.matmul(&b).unwrap().add(&b.matmul(&a).unwrap()).unwrap();
    let id3 = hamiltonian_derivation(&a, &qb)
        .unwrap()
        .sub(&quadratic_form(&combo).unwrap())
        .unwrap();
    assert!(id1.is_zero() && id2.is_zero() && id3.is_zero());
}
