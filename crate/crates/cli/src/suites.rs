//! Suite runners: each named suite produces a list of check records,
//! prefixed with the suite name. Suites run in parallel (capped by
//! BVFLOW_THREADS) and are reassembled in the order requested.

use std::sync::Arc;

use bvflow_core::bv::{
    bracket, flow_suite, hamiltonian_derivation, quadratic_form, reconstruct_flow,
    sign_convention_survivors, DeformedLaplacian, FlowSuiteTolerances, ProbeMode,
};
use bvflow_core::gl11::validate_gl11;
use bvflow_core::perturbation::{
    full_action_partner_residual, interaction_me_residual_series, partner_solve_series,
    rge_evolve, InteractionTerm,
};
use bvflow_core::report::{residual_record, CheckRecord};
use bvflow_core::sampling::{random_antisymmetric, random_homogeneous_poly, seeded_rng};
use bvflow_core::{
    graded_trace, qme_residual, GradedBasis, GradedPoly, HbarSeries, Scalar, SIGNS,
};
use rand::Rng;

use crate::scenario::Resolved;

fn probe_monomials<S: Scalar>(basis: &Arc<GradedBasis<S>>, dmax: usize) -> Vec<GradedPoly<S>> {
    bvflow_core::bv::monomials_up_to_degree(basis, dmax)
        .into_iter()
        .filter(|m| !m.is_unit())
        .map(|m| GradedPoly::from_terms(basis.clone(), [(m, S::one())]).expect("valid"))
        .collect()
}

pub fn run_suite<S: Scalar>(name: &str, scenario: &Resolved<S>) -> Vec<CheckRecord> {
    let result = match name {
        "identities" => identities_suite(scenario),
        "gl11" => gl11_suite(scenario),
        "free-flow" => free_flow_suite(scenario),
        "extended" => extended_suite(scenario),
        "perturbation" => perturbation_suite(scenario),
        "reconstruct" => reconstruct_suite(scenario),
        other => Err(bvflow_core::Error::Invalid(format!("unknown suite {other}"))),
    };
    match result {
        Ok(records) => records
            .into_iter()
            .map(|r| r.prefixed(name))
            .collect(),
        Err(e) => {
            eprintln!("suite {name} failed to execute: {e}");
            vec![CheckRecord {
                name: format!("{name}.execution"),
                residual: -1.0,
                tolerance: 0.0,
                pass: false,
                truncated: false,
            }]
        }
    }
}

type SuiteResult = bvflow_core::Result<Vec<CheckRecord>>;

/// Sign-pinning uniqueness plus the randomized BV axiom battery.
fn identities_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    let basis = s.model.basis().clone();
    let mut records = Vec::new();
    if S::EXACT {
        // The pinning search runs on the standard dimension-4 arena: lower
        // dimensions do not discriminate the full sign-choice space.
        let pinning_basis = GradedBasis::<S>::standard_pairs(2);
        let survivors = sign_convention_survivors(&pinning_basis, s.seed.wrapping_add(1), 2)?;
        let unique = survivors.len() == 1 && survivors[0] == SIGNS;
        records.push(CheckRecord {
            name: "sign_pinning_unique".into(),
            residual: (survivors.len() as f64 - 1.0).abs(),
            tolerance: 0.0,
            pass: unique,
            truncated: false,
        });
    }
    let mut rng = seeded_rng(s.seed);
    let tol = s.tolerance;
    let parity = |d: i32| d.rem_euclid(2) == 1;
    let mut worst_seven: f64 = 0.0;
    let mut exact_seven = true;
    let mut worst_nilp: f64 = 0.0;
    let mut exact_nilp = true;
    let mut worst_bracket: f64 = 0.0;
    let mut exact_bracket = true;
    let mut worst_quad: f64 = 0.0;
    let mut exact_quad = true;
    let mut count = 0usize;
    while count < s.samples {
        let Some(a) = random_antisymmetric(&basis, 0, &mut rng) else { continue };
        let lap = DeformedLaplacian::new(a.clone())?;
        let mut draw = |limit: usize| loop {
            let d = rng.gen_range(-2..=2);
            let p = random_homogeneous_poly::<S>(&basis, d, limit, 3, &mut rng)
                .expect("sampling is valid");
            if !p.is_zero() {
                return p;
            }
        };
        let u = draw(4);
        let v = draw(3);
        let w = draw(3);
        let du = u.homogeneous_degree().expect("homogeneous");
        let dv = v.homogeneous_degree().expect("homogeneous");
        let signed = |p: bool, q: GradedPoly<S>| if p { q.neg() } else { q };
        // Seven-term identity.
        let uv = u.mul(&v)?;
        let vw = v.mul(&w)?;
        let uw = u.mul(&w)?;
        let mut rhs = signed(true, lap.apply(&u)?.mul(&vw)?);
        rhs = rhs.add(&signed(!parity(du), u.mul(&lap.apply(&v)?)?.mul(&w)?))?;
        rhs = rhs.add(&signed(!parity(du + dv), uv.mul(&lap.apply(&w)?)?))?;
        rhs = rhs.add(&lap.apply(&uv)?.mul(&w)?)?;
        rhs = rhs.add(&signed(parity((du + 1) * dv), v.mul(&lap.apply(&uw)?)?))?;
        rhs = rhs.add(&signed(parity(du), u.mul(&lap.apply(&vw)?)?))?;
        let seven = lap.apply(&uv.mul(&w)?)?.sub(&rhs)?;
        worst_seven = worst_seven.max(seven.max_abs_coeff());
        exact_seven &= seven.is_zero();
        // Nilpotency.
        let nilp = lap.apply(&lap.apply(&u)?)?;
        worst_nilp = worst_nilp.max(nilp.max_abs_coeff());
        exact_nilp &= nilp.is_zero();
        // Bracket antisymmetry and Leibniz.
        let br_uv = bracket(&u, &v, &a)?;
        let anti = br_uv.add(&signed(parity((du + 1) * (dv + 1)), bracket(&v, &u, &a)?))?;
        let leib = bracket(&u, &vw, &a)?
            .sub(&br_uv.mul(&w)?)?
            .sub(&signed(parity((du + 1) * dv), v.mul(&bracket(&u, &w, &a)?)?))?;
        worst_bracket = worst_bracket.max(anti.max_abs_coeff()).max(leib.max_abs_coeff());
        exact_bracket &= anti.is_zero() && leib.is_zero();
        // Quadratic-form identities.
        if let (Some(b), Some(c)) = (
            bvflow_core::sampling::random_symmetric(&basis, 0, &mut rng),
            bvflow_core::sampling::random_symmetric(&basis, 0, &mut rng),
        ) {
            let qb = quadratic_form(&b)?;
            let qc = quadratic_form(&c)?;
            let id1 = lap.apply(&qb)?.sub(&GradedPoly::constant(
                basis.clone(),
                graded_trace(&a.matmul(&b)?),
            ))?;
            let id2 = bracket(&qb, &qc, &a)?
                .sub(&quadratic_form(&b.matmul(&a)?.matmul(&c)?)?.scale(&S::from_int(4)))?;
            let combo = a.matmul(&b)?.add(&b.matmul(&a)?)?;
            let id3 = hamiltonian_derivation(&a, &qb)?.sub(&quadratic_form(&combo)?)?;
            worst_quad = worst_quad
                .max(id1.max_abs_coeff())
                .max(id2.max_abs_coeff())
                .max(id3.max_abs_coeff());
            exact_quad &= id1.is_zero() && id2.is_zero() && id3.is_zero();
        }
        count += 1;
    }
    records.push(residual_record::<S>("seven_term", worst_seven, exact_seven, tol, false));
    records.push(residual_record::<S>("nilpotency", worst_nilp, exact_nilp, tol, false));
    records.push(residual_record::<S>(
        "bracket_axioms",
        worst_bracket,
        exact_bracket,
        tol,
        false,
    ));
    records.push(residual_record::<S>(
        "quadratic_identities",
        worst_quad,
        exact_quad,
        tol,
        false,
    ));
    Ok(records)
}

fn gl11_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    validate_gl11(s.model.structure())
}

fn free_flow_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    let mut records = Vec::new();
    let mut worst_me: f64 = 0.0;
    let mut exact_me = true;
    for t in &s.grid {
        let action = HbarSeries::from_poly(s.model.free_action(t)?, s.hbar_order);
        let lap = s.model.free_laplacian(t)?;
        let res = qme_residual(&action, &lap, false)?;
        worst_me = worst_me.max(res.max_abs_coeff());
        exact_me &= res.is_zero();
    }
    records.push(residual_record::<S>(
        "master_equation",
        worst_me,
        exact_me,
        bvflow_core::tol::FREE_QME_F64.max(s.tolerance),
        false,
    ));
    let family = s.model.basic_flow_family(
        s.grid.clone(),
        s.max_degree.max(8),
        ProbeMode::CentralDifference {
            step: s.fd_step.clone(),
        },
    );
    let probes = probe_monomials(s.model.basis(), 3);
    let tols = if S::EXACT {
        FlowSuiteTolerances::exact_with_fd(bvflow_core::tol::FLOW_FD)
    } else {
        FlowSuiteTolerances {
            algebraic: bvflow_core::tol::STATIC_F64.max(s.tolerance),
            finite_difference: bvflow_core::tol::FLOW_FD.max(s.tolerance),
        }
    };
    records.extend(flow_suite(&family, &probes, tols)?);
    // Flow-built Laplacian against the direct deformer formula.
    let t = s.grid.last().expect("grid nonempty");
    let origin = &s.grid[0];
    let to_t = s.model.free_flow(origin, t, s.max_degree.max(8))?;
    let to_origin = s.model.free_flow(t, origin, s.max_degree.max(8))?;
    let base = s.model.free_laplacian(origin)?;
    let direct = s.model.free_laplacian(t)?;
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for probe in probe_monomials(s.model.basis(), 4) {
        let (pulled, _) = to_origin.apply(&probe)?;
        let (conjugated, _) = to_t.apply(&base.apply(&pulled)?)?;
        let diff = conjugated.sub(&direct.apply(&probe)?)?;
        worst = worst.max(diff.max_abs_coeff());
        exact &= diff.is_zero();
    }
    records.push(residual_record::<S>(
        "flow_built_laplacian",
        worst,
        exact,
        bvflow_core::tol::STATIC_F64.max(s.tolerance),
        false,
    ));
    Ok(records)
}

fn extended_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    let probes = probe_monomials(s.model.basis(), 3);
    let from = &s.grid[0];
    let to = s.grid.last().expect("grid nonempty");
    let mut records = s.model.extended_checks(
        from,
        to,
        &probes,
        s.max_degree.max(8),
        bvflow_core::tol::STATIC_F64.max(s.tolerance),
    )?;
    let mid_index = s.grid.len() / 2;
    let r1 = s.model.polchinski_residual(&s.grid[mid_index], &s.fd_step)?;
    records.push(residual_record::<S>(
        "polchinski_projection",
        r1,
        r1 == 0.0,
        bvflow_core::tol::POLCHINSKI.max(s.tolerance),
        false,
    ));
    Ok(records)
}

fn perturbation_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    let Some(series) = &s.interaction else {
        return Err(bvflow_core::Error::Invalid(
            "the perturbation suite needs an `interaction` literal in the scenario".into(),
        ));
    };
    let from = s.grid[0].clone();
    let to = s.grid.last().expect("grid nonempty").clone();
    let mut records = Vec::new();
    let me_start = interaction_me_residual_series(series, &s.model, &from)?;
    records.push(residual_record::<S>(
        "interaction_me_initial",
        me_start.max_abs_coeff(),
        me_start.is_zero(),
        bvflow_core::tol::STATIC_F64.max(s.tolerance),
        false,
    ));
    // Full-vs-interaction cancellation at the initial scale.
    let full = HbarSeries::from_poly(s.model.free_action(&from)?, series.order()).add(series)?;
    let lap = s.model.free_laplacian(&from)?;
    let full_res = qme_residual(&full, &lap, true)?;
    let cancel = full_res.sub(&me_start)?;
    records.push(residual_record::<S>(
        "full_vs_interaction_cancellation",
        cancel.max_abs_coeff(),
        cancel.is_zero(),
        1e-12,
        false,
    ));
    let interaction = InteractionTerm::new(series.clone(), from.clone())?;
    let (evolved, truncated) = rge_evolve(&interaction, &s.model, &to, s.steps, s.max_degree)?;
    let me_end = interaction_me_residual_series(evolved.series(), &s.model, &to)?;
    records.push(residual_record::<S>(
        "interaction_me_evolved",
        me_end.max_abs_coeff(),
        me_end.is_zero(),
        bvflow_core::tol::TRAJECTORY_F64.max(s.tolerance),
        truncated,
    ));
    // Partner solve at the interaction's own scale. (Exact-mode coefficient
    // growth along trajectories makes the evolved-scale solve expensive;
    // the initial scale exercises the same contract.)
    let partner = partner_solve_series(series, &s.model, &from, s.max_degree)?;
    records.push(residual_record::<S>(
        "partner_residual",
        partner.residual,
        partner.residual_is_zero,
        f64::MAX, // reported, existence not guaranteed
        false,
    ));
    if partner.residual_is_zero || partner.residual <= 1e-9 {
        let full_partner =
            full_action_partner_residual(series, &partner.series, &s.model, &from)?;
        records.push(residual_record::<S>(
            "full_action_partner_equation",
            full_partner.max_abs_coeff(),
            full_partner.is_zero(),
            bvflow_core::tol::PARTNER_FULL.max(s.tolerance),
            false,
        ));
    }
    Ok(records)
}

fn reconstruct_suite<S: Scalar>(s: &Resolved<S>) -> SuiteResult {
    let probes = probe_monomials(s.model.basis(), 3);
    let model = s.model.clone();
    let generator = move |_tau: &S| model.free_generator();
    let laplacians = s.model.laplacian_family(s.fd_step.clone());
    let from = &s.grid[0];
    let to = s.grid.last().expect("grid nonempty");
    let rec = reconstruct_flow(
        &generator,
        &laplacians,
        from,
        to,
        s.steps,
        s.max_degree,
        &probes,
        if S::EXACT { 0.0 } else { bvflow_core::tol::STATIC_F64.max(s.tolerance) },
    )?;
    let mut records = rec.checks;
    let closed = s.model.free_flow(from, to, s.max_degree)?;
    let err = rec.map.max_image_diff(&closed)?;
    records.push(residual_record::<S>(
        "closed_form_match",
        err,
        err == 0.0,
        bvflow_core::tol::RECONSTRUCT.max(s.tolerance),
        rec.map.truncated(),
    ));
    // The integrated map must itself be canonical between the endpoint
    // Laplacians, to the integrator's order.
    let jac = rec.map.log_jacobian().clone();
    let witness = bvflow_core::CanonicalMapWitness::new(
        rec.map,
        s.model.free_laplacian(from)?.deformer().clone(),
        s.model.free_laplacian(to)?.deformer().clone(),
        jac,
    )?;
    let check = bvflow_core::canonical_residual(&witness, &probes)?;
    records.push(residual_record::<S>(
        "reconstructed_canonicality",
        check.max_residual(),
        check.canonical_exact && check.jacobian_me_exact && check.bracket_preservation_exact,
        bvflow_core::tol::RECONSTRUCT.max(s.tolerance),
        check.truncated,
    ));
    Ok(records)
}

/// Runs the requested suites, in parallel up to the thread cap, and returns
/// the records in request order.
pub fn run_all<S: Scalar>(scenario: &Resolved<S>, threads: usize) -> Vec<CheckRecord> {
    let names: Vec<&str> = scenario.checks.iter().map(String::as_str).collect();
    let mut slots: Vec<Option<Vec<CheckRecord>>> = vec![None; names.len()];
    let threads = threads.max(1);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in names
            .iter()
            .enumerate()
            .collect::<Vec<_>>()
            .chunks((names.len() + threads - 1) / threads.max(1))
        {
            let chunk: Vec<(usize, &str)> = chunk.iter().map(|(i, n)| (*i, **n)).collect();
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|(i, name)| (i, run_suite(name, scenario)))
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            for (i, records) in handle.join().expect("suite thread panicked") {
                slots[i] = Some(records);
            }
        }
    });
    slots.into_iter().flatten().flatten().collect()
}
