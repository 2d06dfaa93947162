//! Symplectic gl(1|1) structures and the free renormalization-group models
//! they generate: scale-dependent Laplacians, flow maps, free actions, the
//! odd-parameter extension (realized componentwise as body/soul pairs) and
//! the Polchinski-form projection of the flow equation.

use std::sync::Arc;

use crate::algebra::{FlowMap, GradedPoly};
use crate::bv::{
    hamiltonian_derivation, quadratic_form, DeformedLaplacian, Derivation, FlowFamily,
    GeneratorData, LaplacianFamily, ProbeMode,
};
use crate::error::{Error, Result};
use crate::linear::{
    graded_commutator, graded_trace, matrix_exp, same_basis, Endomorphism, GradedBasis,
};
use crate::mat::Mat;
use crate::report::{residual_record, CheckRecord};
use crate::sampling::{random_endomorphism, seeded_rng};
use crate::scalar::Scalar;

/// Float-mode tolerance for the structure axioms.
pub const GL11_TOL: f64 = 1e-12;

/// Supercharges, Hamiltonian and grading operator of a gl(1|1) structure:
/// degrees 1, -1, 0, 0.
#[derive(Debug, Clone)]
pub struct Gl11Structure<S: Scalar> {
    pub q: Endomorphism<S>,
    pub qbar: Endomorphism<S>,
    pub h: Endomorphism<S>,
    pub f: Endomorphism<S>,
}

impl<S: Scalar> Gl11Structure<S> {
    pub fn new(
        q: Endomorphism<S>,
        qbar: Endomorphism<S>,
        h: Endomorphism<S>,
        f: Endomorphism<S>,
    ) -> Result<Self> {
        let basis = q.basis();
        for (name, op, degree) in [
            ("q", &q, 1),
            ("qbar", &qbar, -1),
            ("h", &h, 0),
            ("f", &f, 0),
        ] {
            if op.degree() != degree {
                return Err(Error::DegreeViolation(format!(
                    "{name} must have degree {degree}, got {}",
                    op.degree()
                )));
            }
            if !same_basis(op.basis(), basis) {
                return Err(Error::BasisMismatch);
            }
        }
        Ok(Self { q, qbar, h, f })
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        self.q.basis()
    }

    /// The zero structure over a basis: only the grading operator survives.
    pub fn zero(basis: Arc<GradedBasis<S>>) -> Self {
        Self {
            q: Endomorphism::zero(basis.clone(), 1),
            qbar: Endomorphism::zero(basis.clone(), -1),
            h: Endomorphism::zero(basis.clone(), 0),
            f: Endomorphism::euler(basis),
        }
    }

    /// `{qbar, q} = qbar q - q qbar`, taken literally in plain matrix order.
    /// Note the graded commutator of the two odd charges is
    /// `qbar q + q qbar = h` instead; the two conventions are reconciled only
    /// inside symmetrized quadratic forms, and the invariant
    /// `{qbar,q} + 2 q qbar = h` ties them together.
    pub fn anticommutator_qbar_q(&self) -> Result<Endomorphism<S>> {
        self.qbar.matmul(&self.q)?.sub(&self.q.matmul(&self.qbar)?)
    }
}

fn axiom_record<S: Scalar>(name: &str, residual: &Endomorphism<S>) -> CheckRecord {
    residual_record::<S>(
        name,
        residual.max_abs(),
        residual.is_zero(),
        GL11_TOL,
        false,
    )
}

/// Per-axiom residuals of the graded commutation relations, transposition
/// conditions and trace identities. Passes iff every record passes.
pub fn validate_gl11<S: Scalar>(s: &Gl11Structure<S>) -> Result<Vec<CheckRecord>> {
    let basis = s.basis().clone();
    let id = Endomorphism::identity(basis.clone());
    let mut records = vec![axiom_record("comm_q_q", &graded_commutator(&s.q, &s.q)?)];
    records.push(axiom_record(
        "comm_qbar_qbar",
        &graded_commutator(&s.qbar, &s.qbar)?,
    ));
    records.push(axiom_record(
        "comm_q_qbar_h",
        &graded_commutator(&s.q, &s.qbar)?.sub(&s.h)?,
    ));
    records.push(axiom_record("comm_q_h", &graded_commutator(&s.q, &s.h)?));
    records.push(axiom_record(
        "comm_qbar_h",
        &graded_commutator(&s.qbar, &s.h)?,
    ));
    records.push(axiom_record(
        "comm_f_q",
        &graded_commutator(&s.f, &s.q)?.sub(&s.q)?,
    ));
    records.push(axiom_record(
        "comm_f_qbar",
        &graded_commutator(&s.f, &s.qbar)?.add(&s.qbar)?,
    ));
    records.push(axiom_record("comm_f_h", &graded_commutator(&s.f, &s.h)?));
    records.push(axiom_record(
        "transpose_q",
        &s.q.transpose().sub(&s.q)?,
    ));
    records.push(axiom_record(
        "transpose_qbar",
        &s.qbar.transpose().add(&s.qbar)?,
    ));
    records.push(axiom_record("transpose_h", &s.h.transpose().add(&s.h)?));
    records.push(axiom_record(
        "transpose_f",
        &s.f.transpose().sub(&s.f)?.sub(&id)?,
    ));
    for (name, op) in [
        ("trace_q", &s.q),
        ("trace_qbar", &s.qbar),
        ("trace_h", &s.h),
    ] {
        let tr = graded_trace(op);
        records.push(residual_record::<S>(
            name,
            tr.abs_f64(),
            tr.is_zero(),
            GL11_TOL,
            false,
        ));
    }
    Ok(records)
}

/// Body/soul pair: the two components of an element over the odd-extended
/// parameter space. On homogeneous content the soul sits one degree below
/// the body.
#[derive(Debug, Clone, PartialEq)]
pub struct Extended<T> {
    pub body: T,
    pub soul: T,
}

/// The extended structure at one scale: even and odd Laplacians plus the
/// body/soul action pair.
pub type ExtendedFamily<S> = (DeformedLaplacian<S>, DeformedLaplacian<S>, Extended<GradedPoly<S>>);

/// Whether a degree 0 endomorphism is nilpotent (checked by matrix powers).
pub fn is_nilpotent<S: Scalar>(a: &Endomorphism<S>) -> Result<bool> {
    let n = a.basis().dim();
    let mut power = a.clone();
    for _ in 0..n {
        if S::EXACT {
            if power.is_zero() {
                return Ok(true);
            }
        } else if power.max_abs() <= 1e-12 {
            return Ok(true);
        }
        power = power.matmul(a)?;
    }
    Ok(if S::EXACT {
        power.is_zero()
    } else {
        power.max_abs() <= 1e-12
    })
}

/// Nilpotency requirement of the structure sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nilpotency {
    Any,
    Nilpotent,
    NonNilpotent,
}

/// Seeded randomized search for a gl(1|1) structure over the standard block
/// basis of the given dimension. Charges are sampled with small integer
/// entries and projected onto their symmetry type; the Hamiltonian is the
/// graded commutator of the charges. Deterministic per seed.
pub fn sample_gl11<S: Scalar>(
    dim: usize,
    seed: u64,
    nilpotency: Nilpotency,
    budget: usize,
) -> Result<Gl11Structure<S>> {
    if !dim.is_multiple_of(2) || dim == 0 || dim > 6 {
        return Err(Error::Invalid(format!(
            "dimension {dim} cannot carry paired degrees (need 2, 4 or 6)"
        )));
    }
    let basis = GradedBasis::<S>::standard_pairs(dim / 2);
    let mut rng = seeded_rng(seed);
    let half = S::from_ratio(1, 2);
    for _ in 0..budget {
        let q_raw = random_endomorphism(&basis, 1, &mut rng);
        let q = q_raw.add(&q_raw.transpose())?.scale(&half);
        let qbar_raw = random_endomorphism(&basis, -1, &mut rng);
        let qbar = qbar_raw.antisymmetric_part();
        if q.is_zero() || qbar.is_zero() {
            continue;
        }
        let h = q.matmul(&qbar)?.add(&qbar.matmul(&q)?)?;
        let f = Endomorphism::euler(basis.clone());
        let candidate = Gl11Structure::new(q, qbar, h.clone(), f)?;
        if !crate::report::all_pass(&validate_gl11(&candidate)?) {
            continue;
        }
        let nil = is_nilpotent(&h)?;
        let keep = match nilpotency {
            Nilpotency::Any => true,
            Nilpotency::Nilpotent => nil && !h.is_zero(),
            Nilpotency::NonNilpotent => !nil,
        };
        if keep {
            return Ok(candidate);
        }
    }
    Err(Error::SearchExhausted(format!(
        "no gl(1|1) structure found at dimension {dim} within {budget} draws"
    )))
}

/// A free model: a gl(1|1) structure whose grading operator is the Euler
/// endomorphism of the basis.
#[derive(Debug, Clone)]
pub struct FreeModel<S: Scalar> {
    basis: Arc<GradedBasis<S>>,
    structure: Gl11Structure<S>,
}

impl<S: Scalar> FreeModel<S> {
    pub fn new(structure: Gl11Structure<S>) -> Result<Self> {
        let basis = structure.basis().clone();
        let euler = Endomorphism::euler(basis.clone());
        let diff = structure.f.sub(&euler)?;
        let ok = if S::EXACT {
            diff.is_zero()
        } else {
            diff.max_abs() <= GL11_TOL
        };
        if !ok {
            return Err(Error::Invalid(
                "free model requires the grading operator to equal the Euler endomorphism".into(),
            ));
        }
        Ok(Self { basis, structure })
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        &self.basis
    }

    pub fn structure(&self) -> &Gl11Structure<S> {
        &self.structure
    }

    /// `e^{tau H}`.
    pub fn exp_h(&self, tau: &S) -> Result<Endomorphism<S>> {
        matrix_exp(&self.structure.h, tau)
    }

    /// The scale-`t` Laplacian: deformer `e^{-tH}`. Antisymmetry of the
    /// deformer follows from `H~ = -H`.
    pub fn free_laplacian(&self, t: &S) -> Result<DeformedLaplacian<S>> {
        DeformedLaplacian::new(self.exp_h(&t.neg())?)
    }

    /// The odd deformer `qbar e^{-tH}` of the extended structure.
    pub fn star_deformer(&self, t: &S) -> Result<Endomorphism<S>> {
        self.structure.qbar.matmul(&self.exp_h(&t.neg())?)
    }

    /// The scale-`t` odd Laplacian of the extended structure.
    pub fn star_laplacian(&self, t: &S) -> Result<DeformedLaplacian<S>> {
        DeformedLaplacian::new(self.star_deformer(t)?)
    }

    /// Coordinate matrix of the flow-driving derivation `1/2 <x, H ad x>`,
    /// extracted by applying the derivation to each coordinate.
    pub fn flow_generator_matrix(&self) -> Result<Mat<S>> {
        let h = &self.structure.h;
        let half = S::from_ratio(1, 2);
        let m = crate::bv::derivation_coordinate_matrix(&self.basis, |x| {
            hamiltonian_derivation(h, x)
        })?;
        Ok(m.iter()
            .map(|row| row.iter().map(|c| c.mul(&half)).collect())
            .collect())
    }

    /// The flow map transporting scale-`s` data to scale `t`: linear
    /// substitution by the matrix exponential of the coordinate action of
    /// `1/2 <x, H ad x>`, with zero logarithmic Jacobian.
    pub fn free_flow(&self, s: &S, t: &S, max_degree: usize) -> Result<FlowMap<S>> {
        let m = self.flow_generator_matrix()?;
        let generator = Endomorphism::new(self.basis.clone(), 0, m)?;
        let exp = matrix_exp(&generator, &t.sub(s))?;
        FlowMap::linear(self.basis.clone(), exp.entries(), max_degree)
    }

    /// The free action `S0_t = -1/2 <x, Q e^{tH} x>`: quadratic, homogeneous
    /// of degree 0.
    pub fn free_action(&self, t: &S) -> Result<GradedPoly<S>> {
        let qe = self.structure.q.matmul(&self.exp_h(t)?)?;
        Ok(quadratic_form(&qe)?.scale(&S::from_ratio(-1, 2)))
    }

    /// The soul component `S0*_t = -1/4 <x, {qbar,q} e^{tH} x>` of the
    /// extended action.
    pub fn soul_action(&self, t: &S) -> Result<GradedPoly<S>> {
        let a = self
            .structure
            .anticommutator_qbar_q()?
            .matmul(&self.exp_h(t)?)?;
        Ok(quadratic_form(&a)?.scale(&S::from_ratio(-1, 4)))
    }

    /// The odd flow component `chi0* = 1/2 <x, qbar ad x>` applied to `u`.
    pub fn soul_derivation(&self, u: &GradedPoly<S>) -> Result<GradedPoly<S>> {
        Ok(hamiltonian_derivation(&self.structure.qbar, u)?.scale(&S::from_ratio(1, 2)))
    }

    /// The extended family at scale `t`: the even and odd Laplacians plus
    /// the body/soul components of the extended action.
    pub fn extended_family(
        &self,
        t: &S,
    ) -> Result<ExtendedFamily<S>> {
        let body = self.free_action(t)?;
        let soul = self.soul_action(t)?;
        if !soul.is_homogeneous_of(-1) {
            return Err(Error::DegreeViolation(
                "soul component must sit one degree below the body".into(),
            ));
        }
        Ok((
            self.free_laplacian(t)?,
            self.star_laplacian(t)?,
            Extended { body, soul },
        ))
    }

    /// Residual of the Polchinski-form projection of the flow equation at
    /// scale `t`, with the time derivative taken by central differences of
    /// step `h`:
    /// `dS0/dt = -Delta_* S0 - 1/2 (S0,S0)_* - 1/2 grtr(qbar q)`.
    pub fn polchinski_residual(&self, t: &S, h: &S) -> Result<f64> {
        Ok(self.polchinski_residual_poly(t, h)?.max_abs_coeff())
    }

    pub fn polchinski_residual_poly(&self, t: &S, h: &S) -> Result<GradedPoly<S>> {
        let plus = self.free_action(&t.add(h))?;
        let minus = self.free_action(&t.sub(h))?;
        let two_h = h.add(h);
        let lhs = plus.sub(&minus)?.scale(&S::one().div(&two_h)?);
        let rhs = self.polchinski_rhs(t)?;
        lhs.sub(&rhs)
    }

    /// Right-hand side of the Polchinski-form flow equation at scale `t`.
    pub fn polchinski_rhs(&self, t: &S) -> Result<GradedPoly<S>> {
        let action = self.free_action(t)?;
        let star = self.star_laplacian(t)?;
        let mut rhs = star.apply(&action)?.neg();
        rhs = rhs.sub(
            &crate::bv::bracket(&action, &action, star.deformer())?.scale(&S::from_ratio(1, 2)),
        )?;
        let qbar_q = self.structure.qbar.matmul(&self.structure.q)?;
        let trace_term =
            GradedPoly::constant(self.basis.clone(), graded_trace(&qbar_q).mul(&S::from_ratio(1, 2)));
        rhs.sub(&trace_term)
    }

    /// Generator data of the free flow: linear part `1/2 <x, H ad x>`, no
    /// Hamiltonian part, zero Jacobian rate.
    pub fn free_generator(&self) -> Result<GeneratorData<S>> {
        Ok(GeneratorData {
            derivation: Derivation::linear(self.basis.clone(), self.flow_generator_matrix()?),
            jacobian_rate: GradedPoly::zero(self.basis.clone()),
        })
    }

    /// The scale-indexed Laplacian family with its exact deformer rate
    /// `d/dt e^{-tH} = -H e^{-tH}`.
    pub fn laplacian_family(&self, fd_step: S) -> LaplacianFamily<S> {
        let model = self.clone();
        let model_rate = self.clone();
        LaplacianFamily {
            at: Arc::new(move |t: &S| model.free_laplacian(t)),
            rate: Some(Arc::new(move |t: &S| {
                Ok(model_rate
                    .structure
                    .h
                    .matmul(&model_rate.exp_h(&t.neg())?)?
                    .neg())
            })),
            fd_step,
        }
    }

    /// The basic flow family on a grid with the requested probe mode.
    pub fn basic_flow_family(
        &self,
        grid: Vec<S>,
        max_degree: usize,
        probe: ProbeMode<S>,
    ) -> FlowFamily<S> {
        let model_map = self.clone();
        let model_lap = self.clone();
        FlowFamily {
            map_at: Arc::new(move |t: &S, s: &S| model_map.free_flow(s, t, max_degree)),
            laplacian_at: Arc::new(move |t: &S| model_lap.free_laplacian(t)),
            grid,
            probe,
        }
    }

    /// Exact probe mode for the free family (requires nilpotent `H` in exact
    /// mode; valid in float mode as well).
    pub fn exact_probe(&self) -> ProbeMode<S> {
        let model_gen = self.clone();
        let model_rate = self.clone();
        ProbeMode::Exact {
            generator: Arc::new(move |_t: &S| model_gen.free_generator()),
            deformer_rate: Arc::new(move |t: &S| {
                Ok(model_rate
                    .structure
                    .h
                    .matmul(&model_rate.exp_h(&t.neg())?)?
                    .neg())
            }),
        }
    }

    /// Named residuals of the extended (body/soul) structure at scales
    /// `s, t`: the two componentwise master equations, the soul-from-flow
    /// identity, the algebraic odd-evolution identity and the commutation of
    /// the odd flow component with the even flow.
    pub fn extended_checks(
        &self,
        s: &S,
        t: &S,
        probes: &[GradedPoly<S>],
        max_degree: usize,
        float_tol: f64,
    ) -> Result<Vec<CheckRecord>> {
        let (lap, star, action) = self.extended_family(t)?;
        let mut records = Vec::new();

        let me_body = crate::bv::bracket(&action.body, &action.body, lap.deformer())?
            .scale(&S::from_ratio(1, 2))
            .add(&lap.apply(&action.body)?)?;
        records.push(residual_record::<S>(
            "extended_me_body",
            me_body.max_abs_coeff(),
            me_body.is_zero(),
            float_tol,
            false,
        ));

        let me_soul = star
            .apply(&action.body)?
            .sub(&lap.apply(&action.soul)?)?
            .add(
                &crate::bv::bracket(&action.body, &action.body, star.deformer())?
                    .scale(&S::from_ratio(1, 2)),
            )?
            .sub(&crate::bv::bracket(&action.body, &action.soul, lap.deformer())?)?;
        records.push(residual_record::<S>(
            "extended_me_soul",
            me_soul.max_abs_coeff(),
            me_soul.is_zero(),
            float_tol,
            false,
        ));

        let soul_s = self.soul_action(s)?;
        let from_flow = self.soul_derivation(&self.free_action(s)?)?;
        let soul_residual = from_flow.sub(&soul_s)?;
        records.push(residual_record::<S>(
            "soul_from_flow",
            soul_residual.max_abs_coeff(),
            soul_residual.is_zero(),
            float_tol,
            false,
        ));

        let mut star_evo: f64 = 0.0;
        let mut star_evo_exact = true;
        let mut star_comm: f64 = 0.0;
        let mut star_comm_exact = true;
        let flow = self.free_flow(s, t, max_degree)?;
        for u in probes {
            // Delta*_t u = 1/2 [<x, qbar ad x>, Delta_t] u with the graded
            // commutator of an odd and an odd operator (anticommutator).
            let d = |v: &GradedPoly<S>| hamiltonian_derivation(&self.structure.qbar, v);
            let anti = d(&lap.apply(u)?)?.add(&lap.apply(&d(u)?)?)?;
            let residual = star.apply(u)?.sub(&anti.scale(&S::from_ratio(1, 2)))?;
            star_evo = star_evo.max(residual.max_abs_coeff());
            star_evo_exact &= residual.is_zero();

            let (flow_u, _) = flow.apply(u)?;
            let (flow_soul_u, _) = flow.apply(&self.soul_derivation(u)?)?;
            let comm = self.soul_derivation(&flow_u)?.sub(&flow_soul_u)?;
            star_comm = star_comm.max(comm.max_abs_coeff());
            star_comm_exact &= comm.is_zero();
        }
        records.push(residual_record::<S>(
            "star_evolution_identity",
            star_evo,
            star_evo_exact,
            float_tol,
            false,
        ));
        records.push(residual_record::<S>(
            "star_flow_commutation",
            star_comm,
            star_comm_exact,
            float_tol,
            false,
        ));
        Ok(records)
    }
}

/// A four-dimensional ladder structure over degrees (-2, -1, 0, 1) with unit
/// charge chains and `H` the identity. Unlike the two-degree block bases,
/// its degree 0 polynomial sector contains odd coordinates, so the
/// interaction master equation is not vacuous on it.
pub fn ladder4<S: Scalar>() -> FreeModel<S> {
    let mut omega = crate::mat::zeros::<S>(4, 4);
    omega[0][3] = S::one();
    omega[3][0] = S::one().neg();
    omega[1][2] = S::one();
    omega[2][1] = S::one().neg();
    let basis = GradedBasis::<S>::new(vec![-2, -1, 0, 1], omega).expect("valid ladder pairing");
    let mut qm = crate::mat::zeros::<S>(4, 4);
    qm[0][1] = S::one();
    qm[2][3] = S::one();
    let q = Endomorphism::new(basis.clone(), 1, qm).expect("degree pattern");
    let mut qbm = crate::mat::zeros::<S>(4, 4);
    qbm[1][0] = S::one();
    qbm[3][2] = S::one();
    let qbar = Endomorphism::new(basis.clone(), -1, qbm).expect("degree pattern");
    let h = q
        .matmul(&qbar)
        .expect("same basis")
        .add(&qbar.matmul(&q).expect("same basis"))
        .expect("degrees match");
    let f = Endomorphism::euler(basis);
    let structure = Gl11Structure::new(q, qbar, h, f).expect("degrees");
    FreeModel::new(structure).expect("grading operator is Euler")
}

/// The two-dimensional structure with unit charges: `H` is the identity
/// (invertible, float-mode flows) over degrees (-1, 0).
pub fn dim2_unit<S: Scalar>() -> FreeModel<S> {
    let basis = GradedBasis::<S>::standard_pairs(1);
    let mut q_entries = crate::mat::zeros::<S>(2, 2);
    q_entries[0][1] = S::one();
    let q = Endomorphism::new(basis.clone(), 1, q_entries).expect("degree pattern");
    let mut qbar_entries = crate::mat::zeros::<S>(2, 2);
    qbar_entries[1][0] = S::one();
    let qbar = Endomorphism::new(basis.clone(), -1, qbar_entries).expect("degree pattern");
    let h = Endomorphism::identity(basis.clone());
    let f = Endomorphism::euler(basis.clone());
    let structure = Gl11Structure::new(q, qbar, h, f).expect("degrees");
    FreeModel::new(structure).expect("grading operator is Euler")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::all_pass;
    use crate::scalar::Rat;

    #[test]
    fn zero_structure_validates() {
        let basis = GradedBasis::<Rat>::standard_pairs(1);
        let s = Gl11Structure::zero(basis);
        assert!(all_pass(&validate_gl11(&s).unwrap()));
    }

    #[test]
    fn dim2_unit_structure_validates() {
        let m = dim2_unit::<Rat>();
        let records = validate_gl11(m.structure()).unwrap();
        for r in &records {
            assert!(r.pass, "axiom {} failed with residual {}", r.name, r.residual);
        }
    }

    #[test]
    fn ladder4_structure_validates() {
        let m = ladder4::<Rat>();
        let records = validate_gl11(m.structure()).unwrap();
        for r in &records {
            assert!(r.pass, "axiom {} failed with residual {}", r.name, r.residual);
        }
    }

    #[test]
    fn chained_charge_fails_squaring_axiom() {
        // On the ladder basis a charge with consecutive steps has a nonzero
        // square: the named axiom must fail.
        let m = ladder4::<Rat>();
        let basis = m.basis().clone();
        let mut qm = crate::mat::zeros::<Rat>(4, 4);
        qm[0][1] = Rat::from_int(1);
        qm[1][2] = Rat::from_int(1);
        let bad_q = Endomorphism::new(basis, 1, qm).unwrap();
        let mut s = m.structure().clone();
        s.q = bad_q;
        let records = validate_gl11(&s).unwrap();
        let failed: Vec<&str> = records
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        assert!(failed.contains(&"comm_q_q"), "failed axioms: {failed:?}");
    }

    #[test]
    fn dim2_commutators_match_structure() {
        let m = dim2_unit::<Rat>();
        let s = m.structure();
        let qqbar = graded_commutator(&s.q, &s.qbar).unwrap();
        assert_eq!(qqbar, s.h);
        let fq = graded_commutator(&s.f, &s.q).unwrap();
        assert_eq!(fq, s.q);
    }

    #[test]
    fn corrupted_h_fails_named_axiom() {
        let m = dim2_unit::<Rat>();
        let mut s = m.structure().clone();
        s.h = s.h.scale(&Rat::from_int(2));
        let records = validate_gl11(&s).unwrap();
        let bad: Vec<&str> = records
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        assert!(bad.contains(&"comm_q_qbar_h"));
    }

    #[test]
    fn anticommutator_invariant() {
        // {qbar, q} + 2 q qbar = h as matrices.
        let m = dim2_unit::<Rat>();
        let s = m.structure();
        let lhs = s
            .anticommutator_qbar_q()
            .unwrap()
            .add(&s.q.matmul(&s.qbar).unwrap().scale(&Rat::from_int(2)))
            .unwrap();
        assert_eq!(lhs, s.h);
    }

    #[test]
    fn sampler_rejects_odd_dimension() {
        assert!(sample_gl11::<Rat>(3, 1, Nilpotency::Any, 10).is_err());
    }

    #[test]
    fn sampler_output_validates() {
        let s = sample_gl11::<Rat>(4, 7, Nilpotency::Any, 4000).unwrap();
        assert!(all_pass(&validate_gl11(&s).unwrap()));
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_gl11::<Rat>(4, 42, Nilpotency::Nilpotent, 4000).unwrap();
        let b = sample_gl11::<Rat>(4, 42, Nilpotency::Nilpotent, 4000).unwrap();
        assert_eq!(a.q.entries(), b.q.entries());
        assert_eq!(a.qbar.entries(), b.qbar.entries());
        assert_eq!(a.h.entries(), b.h.entries());
    }
}
