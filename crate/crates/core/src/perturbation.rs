//! The loop-graded interacting theory: interaction master equation, flow
//! evolution of the interaction term, the degree -1 partner term, and
//! assembly of the full flow's infinitesimal generator and Jacobian.

use std::collections::BTreeMap;

use crate::algebra::{GradedPoly, HbarSeries, Monomial};
use crate::bv::{
    bracket_series, hamiltonian_derivation, quadratic_form, DeformedLaplacian, Derivation,
    GeneratorData,
};
use crate::error::{Error, Result};
use crate::gl11::FreeModel;
use crate::linear::graded_trace;
use crate::mat;
use crate::scalar::Scalar;

/// An interaction term: a series of degree 0 polynomials, at least cubic at
/// order zero, attached to the scale at which it is defined.
#[derive(Debug, Clone)]
pub struct InteractionTerm<S: Scalar> {
    series: HbarSeries<S>,
    scale: S,
}

impl<S: Scalar> InteractionTerm<S> {
    pub fn new(series: HbarSeries<S>, scale: S) -> Result<Self> {
        for (g, coeff) in series.coefficients().iter().enumerate() {
            if !coeff.is_homogeneous_of(0) {
                return Err(Error::DegreeViolation(format!(
                    "interaction coefficient at order {g} is not homogeneous of degree 0"
                )));
            }
        }
        let lowest = series
            .coefficient(0)
            .terms()
            .map(|(m, _)| m.total_degree())
            .min();
        if let Some(d) = lowest {
            if d < 3 {
                return Err(Error::Invalid(format!(
                    "order-zero interaction must be at least cubic, found degree {d}"
                )));
            }
        }
        Ok(Self { series, scale })
    }

    pub fn series(&self) -> &HbarSeries<S> {
        &self.series
    }

    pub fn scale(&self) -> &S {
        &self.scale
    }
}

/// The degree -1 partner of an interaction term, with the achieved residual
/// of the partner equation.
#[derive(Debug, Clone)]
pub struct PartnerTerm<S: Scalar> {
    pub series: HbarSeries<S>,
    pub residual: f64,
    pub residual_is_zero: bool,
}

/// The degree 1 first-order operator `Q u = <x, Q (x, u)_E>_E`.
pub fn q_op<S: Scalar>(m: &FreeModel<S>, u: &GradedPoly<S>) -> Result<GradedPoly<S>> {
    hamiltonian_derivation(&m.structure().q, u)
}

/// The degree 0 first-order operator `H u = <x, H (x, u)_E>_E`.
pub fn h_op<S: Scalar>(m: &FreeModel<S>, u: &GradedPoly<S>) -> Result<GradedPoly<S>> {
    hamiltonian_derivation(&m.structure().h, u)
}

fn q_op_series<S: Scalar>(m: &FreeModel<S>, s: &HbarSeries<S>) -> Result<HbarSeries<S>> {
    s.map_coeffs(|p| q_op(m, p))
}

fn h_op_series<S: Scalar>(m: &FreeModel<S>, s: &HbarSeries<S>) -> Result<HbarSeries<S>> {
    s.map_coeffs(|p| h_op(m, p))
}

/// Residual of the interaction master equation
/// `hbar Delta I - Q I + 1/2 (I, I)` at the interaction's own scale; zero
/// iff the full action (free plus interaction) satisfies the weighted master
/// equation.
pub fn interaction_me_residual<S: Scalar>(
    interaction: &InteractionTerm<S>,
    m: &FreeModel<S>,
) -> Result<HbarSeries<S>> {
    interaction_me_residual_series(interaction.series(), m, interaction.scale())
}

/// Same residual on a raw series (used by the trajectory checks before the
/// cubic invariant is re-established).
pub fn interaction_me_residual_series<S: Scalar>(
    series: &HbarSeries<S>,
    m: &FreeModel<S>,
    t: &S,
) -> Result<HbarSeries<S>> {
    let lap = m.free_laplacian(t)?;
    let delta = lap.apply_series(series)?.shift_up();
    let qi = q_op_series(m, series)?;
    let br = bracket_series(series, series, lap.deformer())?.scale(&S::from_ratio(1, 2));
    delta.sub(&qi)?.add(&br)
}

/// Right-hand side of the flow equation for the interaction term at scale
/// `tau`: `hbar Delta_* I + 1/2 (I, I)_*`.
pub fn rge_rhs<S: Scalar>(
    series: &HbarSeries<S>,
    m: &FreeModel<S>,
    tau: &S,
) -> Result<HbarSeries<S>> {
    let star = m.star_laplacian(tau)?;
    let delta = star.apply_series(series)?.shift_up();
    let br = bracket_series(series, series, star.deformer())?.scale(&S::from_ratio(1, 2));
    delta.add(&br)
}

/// Classical 4th-order integration of the interaction flow equation from the
/// interaction's scale to `t`, order by order in the loop parameter, with
/// polynomial degree truncated at `max_degree` (flagged).
pub fn rge_evolve<S: Scalar>(
    interaction: &InteractionTerm<S>,
    m: &FreeModel<S>,
    t: &S,
    steps: usize,
    max_degree: usize,
) -> Result<(InteractionTerm<S>, bool)> {
    if steps < 2 {
        return Err(Error::Invalid("need at least 2 integration steps".into()));
    }
    let s = interaction.scale().clone();
    let h = t.sub(&s).div(&S::from_int(steps as i64))?;
    let half = S::from_ratio(1, 2);
    let sixth = S::from_ratio(1, 6);
    let third = S::from_ratio(1, 3);
    let mut state = interaction.series().clone();
    let mut truncated = false;
    let mut clip = |series: &HbarSeries<S>| {
        let (out, tr) = series.truncate_above(max_degree);
        truncated |= tr;
        out
    };
    for k in 0..steps {
        let tau = s.add(&h.mul(&S::from_int(k as i64)));
        let tau_half = tau.add(&h.mul(&half));
        let tau_full = tau.add(&h);
        let k1 = rge_rhs(&state, m, &tau)?;
        let s2 = clip(&state.add(&k1.scale(&h.mul(&half)))?);
        let k2 = rge_rhs(&s2, m, &tau_half)?;
        let s3 = clip(&state.add(&k2.scale(&h.mul(&half)))?);
        let k3 = rge_rhs(&s3, m, &tau_half)?;
        let s4 = clip(&state.add(&k3.scale(&h))?);
        let k4 = rge_rhs(&s4, m, &tau_full)?;
        let mut inc = k1.scale(&sixth);
        inc = inc.add(&k2.scale(&third))?;
        inc = inc.add(&k3.scale(&third))?;
        inc = inc.add(&k4.scale(&sixth))?;
        state = clip(&state.add(&inc.scale(&h))?);
    }
    Ok((InteractionTerm::new(state, t.clone())?, truncated))
}

/// Residual series of the partner equation
/// `hbar Delta I* - Q I* + (I, I*) - hbar Delta_* I + 1/2 H I - 1/2 (I,I)_*`.
pub fn partner_equation_residual<S: Scalar>(
    i: &HbarSeries<S>,
    istar: &HbarSeries<S>,
    m: &FreeModel<S>,
    t: &S,
) -> Result<HbarSeries<S>> {
    let lap = m.free_laplacian(t)?;
    let star = m.star_laplacian(t)?;
    let lhs = lap
        .apply_series(istar)?
        .shift_up()
        .sub(&q_op_series(m, istar)?)?
        .add(&bracket_series(i, istar, lap.deformer())?)?;
    let rhs = star
        .apply_series(i)?
        .shift_up()
        .sub(&h_op_series(m, i)?.scale(&S::from_ratio(1, 2)))?
        .add(&bracket_series(i, i, star.deformer())?.scale(&S::from_ratio(1, 2)))?;
    lhs.sub(&rhs)
}

/// Assembles the linear system for the partner term's coefficients over the
/// truncated monomial and loop-order space, and returns the least-squares
/// solution (exact solve when the system is consistent in exact mode)
/// together with the achieved residual of the partner equation. Existence of
/// a partner is not guaranteed; an irreducible residual is reported, never
/// silently accepted.
pub fn partner_solve<S: Scalar>(
    interaction: &InteractionTerm<S>,
    m: &FreeModel<S>,
    max_degree: usize,
) -> Result<PartnerTerm<S>> {
    partner_solve_series(interaction.series(), m, interaction.scale(), max_degree)
}

pub fn partner_solve_series<S: Scalar>(
    i: &HbarSeries<S>,
    m: &FreeModel<S>,
    t: &S,
    max_degree: usize,
) -> Result<PartnerTerm<S>> {
    let basis = i.basis().clone();
    let order = i.order();
    let lap = m.free_laplacian(t)?;
    let star = m.star_laplacian(t)?;

    // Right-hand side.
    let rhs = star
        .apply_series(i)?
        .shift_up()
        .sub(&h_op_series(m, i)?.scale(&S::from_ratio(1, 2)))?
        .add(&bracket_series(i, i, star.deformer())?.scale(&S::from_ratio(1, 2)))?;

    // Unknown basis: degree -1 monomials, at least cubic at order zero.
    let monomials = crate::bv::monomials_up_to_degree(&basis, max_degree);
    let mut unknowns: Vec<(usize, Monomial)> = Vec::new();
    for g in 0..=order {
        for mono in &monomials {
            if mono.internal_degree(basis.as_ref()) != -1 {
                continue;
            }
            if g == 0 && mono.total_degree() < 3 {
                continue;
            }
            unknowns.push((g, mono.clone()));
        }
    }

    // The linearized left-hand-side operator applied to a basis element.
    let apply_lhs = |p: &HbarSeries<S>| -> Result<HbarSeries<S>> {
        let delta = lap.apply_series(p)?.shift_up();
        let q = q_op_series(m, p)?;
        let mix = bracket_series(i, p, lap.deformer())?;
        delta.sub(&q)?.add(&mix)
    };

    // Collect columns and the row key set.
    type Key = (usize, Monomial);
    let mut row_keys: BTreeMap<Key, usize> = BTreeMap::new();
    let intern = |keys: &mut BTreeMap<Key, usize>, series: &HbarSeries<S>| {
        for (g, coeff) in series.coefficients().iter().enumerate() {
            for (mono, _) in coeff.terms() {
                let next = keys.len();
                keys.entry((g, mono.clone())).or_insert(next);
            }
        }
    };
    intern(&mut row_keys, &rhs);
    let mut columns: Vec<HbarSeries<S>> = Vec::with_capacity(unknowns.len());
    for (g, mono) in &unknowns {
        let mut e = HbarSeries::zero(basis.clone(), order);
        e.set_coefficient(
            *g,
            GradedPoly::from_terms(basis.clone(), [(mono.clone(), S::one())])?,
        );
        let col = apply_lhs(&e)?;
        intern(&mut row_keys, &col);
        columns.push(col);
    }

    let rows = row_keys.len();
    let cols = unknowns.len();
    let mut a = mat::zeros::<S>(rows, cols);
    for (c, col) in columns.iter().enumerate() {
        for (g, coeff) in col.coefficients().iter().enumerate() {
            for (mono, v) in coeff.terms() {
                let r = row_keys[&(g, mono.clone())];
                a[r][c] = v.clone();
            }
        }
    }
    let mut b = vec![S::zero(); rows];
    for (g, coeff) in rhs.coefficients().iter().enumerate() {
        for (mono, v) in coeff.terms() {
            b[row_keys[&(g, mono.clone())]] = v.clone();
        }
    }

    // Normal equations: consistent by construction, so the consistency
    // check is skipped in float mode (eliminated rows carry pure roundoff).
    // The achieved residual below is recomputed through the actual
    // operators, so nothing is silently accepted.
    let at_a = normal_matrix(&a);
    let at_b = transpose_apply(&a, &b);
    let pivot_tol = if S::EXACT {
        0.0
    } else {
        1e-10 * (1.0 + mat::max_abs(&at_a))
    };
    let x = mat::solve(&at_a, &at_b, pivot_tol, S::EXACT)
        .ok_or_else(|| Error::Invalid("normal equations unexpectedly inconsistent".into()))?;

    let mut series = HbarSeries::zero(basis.clone(), order);
    for ((g, mono), coeff) in unknowns.iter().zip(&x) {
        if coeff.is_zero() {
            continue;
        }
        let add = GradedPoly::from_terms(basis.clone(), [(mono.clone(), coeff.clone())])?;
        series.set_coefficient(*g, series.coefficient(*g).add(&add)?);
    }
    let achieved = partner_equation_residual(i, &series, m, t)?;
    Ok(PartnerTerm {
        series,
        residual: achieved.max_abs_coeff(),
        residual_is_zero: achieved.is_zero(),
    })
}

fn normal_matrix<S: Scalar>(a: &mat::Mat<S>) -> mat::Mat<S> {
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let mut out = mat::zeros::<S>(cols, cols);
    for r in 0..rows {
        for i in 0..cols {
            if a[r][i].is_zero() {
                continue;
            }
            for j in 0..cols {
                if a[r][j].is_zero() {
                    continue;
                }
                out[i][j] = out[i][j].add(&a[r][i].mul(&a[r][j]));
            }
        }
    }
    out
}

fn transpose_apply<S: Scalar>(a: &mat::Mat<S>, b: &[S]) -> Vec<S> {
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let mut out = vec![S::zero(); cols];
    for r in 0..rows {
        if b[r].is_zero() {
            continue;
        }
        for (c, out_c) in out.iter_mut().enumerate() {
            if !a[r][c].is_zero() {
                *out_c = out_c.add(&a[r][c].mul(&b[r]));
            }
        }
    }
    out
}

/// Residual of the full-action partner equation
/// `hbar Delta S* + (S, S*) = hbar Delta_* S + 1/2 (S, S)_*` with
/// `S = S0 + I` and `S* = S0* + I*`.
pub fn full_action_partner_residual<S: Scalar>(
    i: &HbarSeries<S>,
    istar: &HbarSeries<S>,
    m: &FreeModel<S>,
    t: &S,
) -> Result<HbarSeries<S>> {
    let order = i.order();
    let s_full = HbarSeries::from_poly(m.free_action(t)?, order).add(i)?;
    let s_star = HbarSeries::from_poly(m.soul_action(t)?, order).add(istar)?;
    let lap = m.free_laplacian(t)?;
    let star = m.star_laplacian(t)?;
    let lhs = lap
        .apply_series(&s_star)?
        .shift_up()
        .add(&bracket_series(&s_full, &s_star, lap.deformer())?)?;
    let rhs = star
        .apply_series(&s_full)?
        .shift_up()
        .add(&bracket_series(&s_full, &s_full, star.deformer())?.scale(&S::from_ratio(1, 2)))?;
    lhs.sub(&rhs)
}

/// Infinitesimal generator and Jacobian rate of the full interacting flow at
/// scale `t`: `chi = 1/2 <x, H ad x> - ad_{e^{-tH}} I*` and
/// `r = Delta_{e^{-tH}} I*`.
///
/// The partner's order-zero coefficient feeds the degree -1 Hamiltonian part
/// (exact when the partner is concentrated at order zero; series-level
/// transport checks live in [`full_action_partner_residual`] and
/// [`polchinski_split_residual`]).
pub fn full_generator<S: Scalar>(
    istar: &PartnerTerm<S>,
    m: &FreeModel<S>,
    t: &S,
) -> Result<GeneratorData<S>> {
    let istar0 = istar.series.coefficient(0).clone();
    if !istar0.is_zero() && istar0.homogeneous_degree() != Some(-1) {
        return Err(Error::DegreeViolation(
            "partner term must be homogeneous of degree -1".into(),
        ));
    }
    let deformer = m.free_laplacian(t)?.deformer().clone();
    let jacobian_rate = DeformedLaplacian::new(deformer.clone())?.apply(&istar0)?;
    Ok(GeneratorData {
        derivation: Derivation {
            basis: m.basis().clone(),
            linear: Some(m.flow_generator_matrix()?),
            hamiltonian: Some((deformer, istar0)),
        },
        jacobian_rate,
    })
}

/// Residual of the Polchinski-split form of the full flow equation at scale
/// `t`: `dS/dt - hbar Delta_* S - 1/2 (S,S)_* - chi_bar S - hbar r_bar`,
/// where `chi_bar = -ad_* S0_t` and
/// `r_bar = -2 Delta_* S0_t - 1/2 grtr(qbar q)`.
pub fn polchinski_split_residual<S: Scalar>(
    m: &FreeModel<S>,
    t: &S,
    s_full: &HbarSeries<S>,
    s_dot: &HbarSeries<S>,
) -> Result<HbarSeries<S>> {
    let order = s_full.order();
    let star = m.star_laplacian(t)?;
    let free = HbarSeries::from_poly(m.free_action(t)?, order);
    let mut rhs = star.apply_series(s_full)?.shift_up();
    rhs = rhs.add(&bracket_series(s_full, s_full, star.deformer())?.scale(&S::from_ratio(1, 2)))?;
    // chi_bar S = -(S0, S)_*
    rhs = rhs.sub(&bracket_series(&free, s_full, star.deformer())?)?;
    // hbar r_bar
    let qbar_q = m.structure().qbar.matmul(&m.structure().q)?;
    let r_bar = star
        .apply(&m.free_action(t)?)?
        .scale(&S::from_int(-2))
        .sub(&GradedPoly::constant(
            m.basis().clone(),
            graded_trace(&qbar_q).mul(&S::from_ratio(1, 2)),
        ))?;
    rhs = rhs.add(&HbarSeries::from_poly(r_bar, order).shift_up())?;
    s_dot.sub(&rhs)
}

/// Builds a quadratic interaction that mimics a charge deformation
/// `Q -> Q + eps B`: `I = -eps/2 <x, B e^{tH} x>`. Used by the partner
/// cross-checks; `B` must anticommute with both charges and commute with the
/// Hamiltonian for the deformed structure to stay a valid one.
pub fn charge_deformation_interaction<S: Scalar>(
    m: &FreeModel<S>,
    b: &crate::linear::Endomorphism<S>,
    eps: &S,
    t: &S,
    order: usize,
) -> Result<HbarSeries<S>> {
    let be = b.matmul(&m.exp_h(t)?)?;
    let poly = quadratic_form(&be)?.scale(&eps.div(&S::from_int(-2))?);
    Ok(HbarSeries::from_poly(poly, order))
}
