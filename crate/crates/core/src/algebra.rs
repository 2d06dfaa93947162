//! The graded-commutative polynomial algebra on the coordinates of a graded
//! basis: sparse sign-normalized polynomials with Koszul signs, left partial
//! derivatives, truncated series in the loop-counting parameter, and algebra
//! morphisms given by coordinate substitution.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linear::{same_basis, GradedBasis};
use crate::mat::{self, Mat};
use crate::scalar::{signed, Scalar};

/// Exponent vector in canonical coordinate order. Odd-degree coordinates
/// carry exponent 0 or 1. Ordered graded-lex (total exponent first, then
/// lexicographic), which fixes the serialization order of polynomials.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn unit(dim: usize) -> Self {
        Self {
            exps: vec![0; dim],
        }
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[i] = 1;
        Self { exps }
    }

    pub fn from_exponents(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.exps[i]
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    /// Total exponent count (polynomial degree).
    pub fn total_degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    /// Internal grading: sum of coordinate degrees weighted by exponents.
    pub fn internal_degree<S: Scalar>(&self, basis: &GradedBasis<S>) -> i32 {
        self.exps
            .iter()
            .enumerate()
            .map(|(i, &e)| basis.degree(i) * e as i32)
            .sum()
    }

    pub fn is_unit(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Number of odd-degree factors with coordinate index strictly below `i`.
    fn odd_prefix_count<S: Scalar>(&self, basis: &GradedBasis<S>, i: usize) -> u32 {
        self.exps[..i]
            .iter()
            .enumerate()
            .filter(|&(k, &e)| e > 0 && basis.odd(k))
            .map(|(_, &e)| e)
            .sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Merges two monomials, returning the interleaving Koszul sign, or `None`
/// when an odd coordinate would square to zero.
fn merge_monomials<S: Scalar>(
    basis: &GradedBasis<S>,
    a: &Monomial,
    b: &Monomial,
) -> Option<(Monomial, bool)> {
    let dim = basis.dim();
    let mut exps = vec![0u32; dim];
    let mut swaps = 0u32;
    // Odd factors of `b` at coordinate j cross every odd factor of `a` at a
    // strictly larger coordinate index.
    let mut odd_suffix_of_a = 0u32;
    for j in (0..dim).rev() {
        let ea = a.exps[j];
        let eb = b.exps[j];
        if basis.odd(j) {
            if ea + eb > 1 {
                return None;
            }
            if eb == 1 {
                swaps += odd_suffix_of_a;
            }
            odd_suffix_of_a += ea;
        }
        exps[j] = ea + eb;
    }
    Some((Monomial { exps }, swaps % 2 == 1))
}

/// Sparse sign-normalized polynomial over a graded basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedPoly<S: Scalar> {
    basis: Arc<GradedBasis<S>>,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> GradedPoly<S> {
    pub fn zero(basis: Arc<GradedBasis<S>>) -> Self {
        Self {
            basis,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(basis: Arc<GradedBasis<S>>, c: S) -> Self {
        let mut p = Self::zero(basis);
        if !c.is_zero() {
            let unit = Monomial::unit(p.basis.dim());
            p.terms.insert(unit, c);
        }
        p
    }

    pub fn one(basis: Arc<GradedBasis<S>>) -> Self {
        Self::constant(basis, S::one())
    }

    /// The coordinate `x^i`.
    pub fn coordinate(basis: Arc<GradedBasis<S>>, i: usize) -> Self {
        let m = Monomial::coordinate(basis.dim(), i);
        let mut p = Self::zero(basis);
        p.terms.insert(m, S::one());
        p
    }

    /// The symplectic-dual coordinate `x_i = -w_{ij} x^j`.
    pub fn dual_coordinate(basis: Arc<GradedBasis<S>>, i: usize) -> Self {
        let mut p = Self::zero(basis.clone());
        for j in 0..basis.dim() {
            let c = basis.omega()[i][j].neg();
            if !c.is_zero() {
                p.add_term(Monomial::coordinate(basis.dim(), j), c);
            }
        }
        p
    }

    /// Builds from a term list, normalizing and dropping zeros.
    pub fn from_terms(
        basis: Arc<GradedBasis<S>>,
        terms: impl IntoIterator<Item = (Monomial, S)>,
    ) -> Result<Self> {
        let mut p = Self::zero(basis);
        for (m, c) in terms {
            if m.dim() != p.basis.dim() {
                return Err(Error::DimensionMismatch(
                    "monomial exponent count must match basis dimension".into(),
                ));
            }
            for (i, &e) in m.exponents().iter().enumerate() {
                if p.basis.odd(i) && e > 1 {
                    return Err(Error::Invalid(format!(
                        "odd coordinate {i} has exponent {e} > 1"
                    )));
                }
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Constructs the normalized term for an ordered factor list of
    /// coordinate indices, recording the Koszul sign of sorting.
    pub fn from_factor_list(basis: Arc<GradedBasis<S>>, factors: &[usize], coeff: S) -> Self {
        let mut acc = Self::constant(basis.clone(), coeff);
        for &i in factors {
            acc = acc.mul(&Self::coordinate(basis.clone(), i)).expect("same basis");
        }
        acc
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        &self.basis
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> S {
        self.coefficient(&Monomial::unit(self.basis.dim()))
    }

    /// Drops the constant term; used for comparisons modulo the central
    /// (constant multiples of the unit) ambiguity of logarithmic Jacobians.
    pub fn without_constant_term(&self) -> Self {
        let mut p = self.clone();
        p.terms.remove(&Monomial::unit(self.basis.dim()));
        p
    }

    fn add_term(&mut self, m: Monomial, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(self.basis.clone());
        }
        Self {
            basis: self.basis.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.mul(c)))
                .collect(),
        }
    }

    /// Graded-commutative product with Koszul signs.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        let mut out = Self::zero(self.basis.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, negate)) = merge_monomials(&self.basis, ma, mb) {
                    out.add_term(m, signed(negate, ca.mul(cb)));
                }
            }
        }
        Ok(out)
    }

    /// Product truncated at total polynomial degree `dmax`; the flag reports
    /// whether anything was dropped.
    pub fn mul_truncated(&self, other: &Self, dmax: usize) -> Result<(Self, bool)> {
        self.check_basis(other)?;
        let mut out = Self::zero(self.basis.clone());
        let mut truncated = false;
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if (ma.total_degree() + mb.total_degree()) as usize > dmax {
                    truncated = true;
                    continue;
                }
                if let Some((m, negate)) = merge_monomials(&self.basis, ma, mb) {
                    out.add_term(m, signed(negate, ca.mul(cb)));
                }
            }
        }
        Ok((out, truncated))
    }

    /// Drops monomials above total degree `dmax`.
    pub fn truncate_above(&self, dmax: usize) -> (Self, bool) {
        let mut out = Self::zero(self.basis.clone());
        let mut truncated = false;
        for (m, c) in &self.terms {
            if m.total_degree() as usize > dmax {
                truncated = true;
            } else {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        (out, truncated)
    }

    /// Left partial derivative with the sign rule
    /// `d_i(x^j m) = delta^j_i m + (-1)^{e_i e_j} x^j d_i m`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.basis.clone());
        let odd_i = self.basis.odd(i);
        for (m, c) in &self.terms {
            let e = m.exponent(i);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[i] -= 1;
            let negate = odd_i && m.odd_prefix_count(&self.basis, i) % 2 == 1;
            let coeff = signed(negate, c.mul(&S::from_int(e as i64)));
            out.add_term(Monomial { exps }, coeff);
        }
        out
    }

    /// Set of internal degrees present.
    pub fn degrees_present(&self) -> Vec<i32> {
        let mut ds: Vec<i32> = self
            .terms
            .keys()
            .map(|m| m.internal_degree(&self.basis))
            .collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// `Some(degree)` when every monomial shares one internal degree; the
    /// zero polynomial is homogeneous of every degree (`Some(0)` returned).
    pub fn homogeneous_degree(&self) -> Option<i32> {
        let ds = self.degrees_present();
        match ds.len() {
            0 => Some(0),
            1 => Some(ds[0]),
            _ => None,
        }
    }

    pub fn is_homogeneous_of(&self, degree: i32) -> bool {
        self.terms
            .keys()
            .all(|m| m.internal_degree(&self.basis) == degree)
    }

    /// Splits into homogeneous components by internal degree.
    pub fn homogeneous_parts(&self) -> Vec<(i32, Self)> {
        let mut map: BTreeMap<i32, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = m.internal_degree(&self.basis);
            map.entry(d)
                .or_insert_with(|| Self::zero(self.basis.clone()))
                .terms
                .insert(m.clone(), c.clone());
        }
        map.into_iter().collect()
    }

    /// Residual norm: maximum absolute coefficient over canonical monomials.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(S::abs_f64).fold(0.0, f64::max)
    }

    pub fn max_total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Monomial::total_degree)
            .max()
            .unwrap_or(0)
    }
}

impl<S: Scalar> fmt::Display for GradedPoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 1 {
                    write!(f, "*x{}", i + 1)?;
                } else if e > 1 {
                    write!(f, "*x{}^{}", i + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// Truncated formal power series in the loop-counting parameter with
/// polynomial coefficients. Arithmetic truncates uniformly at the fixed
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct HbarSeries<S: Scalar> {
    basis: Arc<GradedBasis<S>>,
    coeffs: Vec<GradedPoly<S>>,
}

impl<S: Scalar> HbarSeries<S> {
    pub fn zero(basis: Arc<GradedBasis<S>>, order: usize) -> Self {
        let coeffs = (0..=order).map(|_| GradedPoly::zero(basis.clone())).collect();
        Self { basis, coeffs }
    }

    pub fn from_poly(p: GradedPoly<S>, order: usize) -> Self {
        let mut s = Self::zero(p.basis().clone(), order);
        s.coeffs[0] = p;
        s
    }

    pub fn from_coeffs(coeffs: Vec<GradedPoly<S>>) -> Result<Self> {
        let basis = coeffs
            .first()
            .ok_or_else(|| Error::Invalid("series needs at least the order-0 coefficient".into()))?
            .basis()
            .clone();
        for c in &coeffs {
            if !same_basis(c.basis(), &basis) {
                return Err(Error::BasisMismatch);
            }
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        &self.basis
    }

    /// Truncation order K: powers 0..=K are stored.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficient(&self, power: usize) -> &GradedPoly<S> {
        &self.coeffs[power]
    }

    pub fn coefficients(&self) -> &[GradedPoly<S>] {
        &self.coeffs
    }

    pub fn set_coefficient(&mut self, power: usize, p: GradedPoly<S>) {
        self.coeffs[power] = p;
    }

    fn check(&self, other: &Self) -> Result<()> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        if self.order() != other.order() {
            return Err(Error::DimensionMismatch(format!(
                "series truncation orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(GradedPoly::neg).collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zero(self.basis.clone(), self.order());
        for g in 0..=self.order() {
            let mut acc = GradedPoly::zero(self.basis.clone());
            for a in 0..=g {
                acc = acc.add(&self.coeffs[a].mul(&other.coeffs[g - a])?)?;
            }
            out.coeffs[g] = acc;
        }
        Ok(out)
    }

    /// Multiplication by the series parameter: shifts powers up by one,
    /// dropping the top coefficient (series truncation semantics).
    pub fn shift_up(&self) -> Self {
        let order = self.order();
        let mut out = Self::zero(self.basis.clone(), order);
        for g in 1..=order {
            out.coeffs[g] = self.coeffs[g - 1].clone();
        }
        out
    }

    /// Applies a polynomial map to each coefficient.
    pub fn map_coeffs(
        &self,
        mut f: impl FnMut(&GradedPoly<S>) -> Result<GradedPoly<S>>,
    ) -> Result<Self> {
        let coeffs = self.coeffs.iter().map(&mut f).collect::<Result<_>>()?;
        Ok(Self {
            basis: self.basis.clone(),
            coeffs,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(GradedPoly::is_zero)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(GradedPoly::max_abs_coeff)
            .fold(0.0, f64::max)
    }

    pub fn truncate_above(&self, dmax: usize) -> (Self, bool) {
        let mut truncated = false;
        let coeffs = self
            .coeffs
            .iter()
            .map(|p| {
                let (q, t) = p.truncate_above(dmax);
                truncated |= t;
                q
            })
            .collect();
        (
            Self {
                basis: self.basis.clone(),
                coeffs,
            },
            truncated,
        )
    }
}

/// First-order operator `u -> sum_l coeffs[l] * d_l u`. Any such operator is
/// a graded derivation; linear coordinate actions and Hamiltonian vector
/// fields are both expressed this way.
pub fn coefficient_derivation<S: Scalar>(
    coeffs: &[GradedPoly<S>],
    u: &GradedPoly<S>,
) -> Result<GradedPoly<S>> {
    let Some(first) = coeffs.first() else {
        return Err(Error::Invalid("derivation needs one coefficient per coordinate".into()));
    };
    let mut out = GradedPoly::zero(first.basis().clone());
    for (l, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let du = u.partial(l);
        if du.is_zero() {
            continue;
        }
        out = out.add(&c.mul(&du)?)?;
    }
    Ok(out)
}

/// An algebra morphism represented by per-coordinate image polynomials
/// (degree-truncated) plus an additive logarithmic-Jacobian element.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap<S: Scalar> {
    basis: Arc<GradedBasis<S>>,
    images: Vec<GradedPoly<S>>,
    max_degree: usize,
    log_jacobian: GradedPoly<S>,
    truncated: bool,
}

impl<S: Scalar> FlowMap<S> {
    /// Validates that the image of each coordinate is homogeneous of that
    /// coordinate's degree.
    pub fn new(
        basis: Arc<GradedBasis<S>>,
        images: Vec<GradedPoly<S>>,
        max_degree: usize,
        log_jacobian: GradedPoly<S>,
    ) -> Result<Self> {
        if images.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "need {} coordinate images, got {}",
                basis.dim(),
                images.len()
            )));
        }
        for (i, img) in images.iter().enumerate() {
            if !same_basis(img.basis(), &basis) {
                return Err(Error::BasisMismatch);
            }
            if !img.is_homogeneous_of(basis.degree(i)) {
                return Err(Error::DegreeViolation(format!(
                    "image of coordinate {i} is not homogeneous of degree {}",
                    basis.degree(i)
                )));
            }
        }
        if !same_basis(log_jacobian.basis(), &basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(Self {
            basis,
            images,
            max_degree,
            log_jacobian,
            truncated: false,
        })
    }

    pub fn identity(basis: Arc<GradedBasis<S>>, max_degree: usize) -> Self {
        let images = (0..basis.dim())
            .map(|i| GradedPoly::coordinate(basis.clone(), i))
            .collect();
        let log_jacobian = GradedPoly::zero(basis.clone());
        Self {
            basis,
            images,
            max_degree,
            log_jacobian,
            truncated: false,
        }
    }

    /// Linear substitution `x^i -> M^i_j x^j` (requires a degree-preserving
    /// matrix) with zero logarithmic Jacobian.
    pub fn linear(basis: Arc<GradedBasis<S>>, m: &Mat<S>, max_degree: usize) -> Result<Self> {
        let n = basis.dim();
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "substitution matrix must be {n}x{n}"
            )));
        }
        let mut images = Vec::with_capacity(n);
        for (i, row) in m.iter().enumerate() {
            let mut img = GradedPoly::zero(basis.clone());
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    img = img.add(&GradedPoly::coordinate(basis.clone(), j).scale(c))?;
                }
            }
            if !img.is_homogeneous_of(basis.degree(i)) {
                return Err(Error::DegreeViolation(format!(
                    "row {i} of the substitution matrix mixes coordinate degrees"
                )));
            }
            images.push(img);
        }
        let log_jacobian = GradedPoly::zero(basis.clone());
        Ok(Self {
            basis,
            images,
            max_degree,
            log_jacobian,
            truncated: false,
        })
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        &self.basis
    }

    pub fn images(&self) -> &[GradedPoly<S>] {
        &self.images
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn log_jacobian(&self) -> &GradedPoly<S> {
        &self.log_jacobian
    }

    pub fn with_log_jacobian(mut self, r: GradedPoly<S>) -> Result<Self> {
        if !same_basis(r.basis(), &self.basis) {
            return Err(Error::BasisMismatch);
        }
        self.log_jacobian = r;
        Ok(self)
    }

    /// Whether any operation that produced this map dropped terms above the
    /// degree bound.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub(crate) fn set_truncated(&mut self, t: bool) {
        self.truncated = t;
    }

    /// Substitutes coordinate images into `u`. Returns the image and a flag
    /// recording whether truncation occurred.
    pub fn apply(&self, u: &GradedPoly<S>) -> Result<(GradedPoly<S>, bool)> {
        if !same_basis(u.basis(), &self.basis) {
            return Err(Error::BasisMismatch);
        }
        let mut out = GradedPoly::zero(self.basis.clone());
        let mut truncated = false;
        for (m, c) in u.terms() {
            let mut acc = GradedPoly::constant(self.basis.clone(), c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                for _ in 0..e {
                    let (next, t) = acc.mul_truncated(&self.images[i], self.max_degree)?;
                    truncated |= t;
                    acc = next;
                    if acc.is_zero() {
                        break;
                    }
                }
            }
            out = out.add(&acc)?;
        }
        Ok((out, truncated))
    }

    /// Applies the morphism coefficient-wise to a series.
    pub fn apply_series(&self, s: &HbarSeries<S>) -> Result<(HbarSeries<S>, bool)> {
        let mut truncated = false;
        let out = s.map_coeffs(|p| {
            let (q, t) = self.apply(p)?;
            truncated |= t;
            Ok(q)
        })?;
        Ok((out, truncated))
    }

    /// Composition `self . other` (apply `other` first). Images are composed
    /// by substitution; the logarithmic Jacobian follows the cocycle rule
    /// `r = r_self + self(r_other)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        if self.max_degree != other.max_degree {
            return Err(Error::DimensionMismatch(format!(
                "flow maps have different degree bounds: {} vs {}",
                self.max_degree, other.max_degree
            )));
        }
        let mut truncated = self.truncated || other.truncated;
        let mut images = Vec::with_capacity(self.basis.dim());
        for img in &other.images {
            let (composed, t) = self.apply(img)?;
            truncated |= t;
            images.push(composed);
        }
        let (jac_image, t) = self.apply(&other.log_jacobian)?;
        truncated |= t;
        let log_jacobian = self.log_jacobian.add(&jac_image)?;
        Ok(Self {
            basis: self.basis.clone(),
            images,
            max_degree: self.max_degree,
            log_jacobian,
            truncated,
        })
    }

    /// Linear part of the coordinate images.
    pub fn linear_part(&self) -> Mat<S> {
        let n = self.basis.dim();
        let mut m = mat::zeros::<S>(n, n);
        for (i, img) in self.images.iter().enumerate() {
            for (mon, c) in img.terms() {
                if mon.total_degree() == 1 {
                    let j = mon
                        .exponents()
                        .iter()
                        .position(|&e| e == 1)
                        .expect("degree-1 monomial");
                    m[i][j] = c.clone();
                }
            }
        }
        m
    }

    /// Compositional inverse, computed degree by degree. Requires an
    /// invertible linear part; the result satisfies `self . inv = id` up to
    /// the degree bound. The inverse Jacobian follows `r_inv = -inv(r)`.
    pub fn invert(&self) -> Result<Self> {
        let n = self.basis.dim();
        let lin = self.linear_part();
        let lin_inv = mat::inverse(&lin)?;
        // Nonlinear remainder N with self = L + N on coordinates.
        let linear_map = Self::linear(self.basis.clone(), &lin, self.max_degree)?;
        let mut nonlinear = Vec::with_capacity(n);
        let mut has_nonlinear = false;
        for (i, img) in self.images.iter().enumerate() {
            let diff = img.sub(&linear_map.images[i])?;
            has_nonlinear |= !diff.is_zero();
            nonlinear.push(diff);
        }
        let mut inverse = Self::linear(self.basis.clone(), &lin_inv, self.max_degree)?;
        if has_nonlinear {
            // Pointwise iteration psi_{k+1}(y) = L^{-1} (y - N(psi_k(y)));
            // degree-d terms stabilize after d rounds. As substitution maps,
            // applying L^{-1} pointwise after a map is `map.compose(linear)`.
            let lin_inv_map = Self::linear(self.basis.clone(), &lin_inv, self.max_degree)?;
            for _ in 0..self.max_degree {
                let mut images = Vec::with_capacity(n);
                for i in 0..n {
                    let x_i = GradedPoly::coordinate(self.basis.clone(), i);
                    let (n_of_psi, _) = inverse.apply(&nonlinear[i])?;
                    images.push(x_i.sub(&n_of_psi)?);
                }
                let candidate = Self {
                    basis: self.basis.clone(),
                    images,
                    max_degree: self.max_degree,
                    log_jacobian: GradedPoly::zero(self.basis.clone()),
                    truncated: false,
                };
                inverse = candidate.compose(&lin_inv_map)?;
            }
        }
        let (jac_img, _) = inverse.apply(&self.log_jacobian)?;
        inverse.log_jacobian = jac_img.neg();
        Ok(inverse)
    }

    /// Maximum coefficient difference over coordinate images.
    pub fn max_image_diff(&self, other: &Self) -> Result<f64> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.images.iter().zip(&other.images) {
            worst = worst.max(a.sub(b)?.max_abs_coeff());
        }
        Ok(worst)
    }
}
