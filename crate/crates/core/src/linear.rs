//! Graded vector spaces carrying a degree -1 symplectic pairing, together
//! with homogeneous endomorphisms, the graded trace, the symplectic
//! transpose, the Euler endomorphism and matrix exponentials.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mat::{self, Mat};
use crate::scalar::{parity, Scalar};

/// Float-mode tolerance for structural matrix identities (omega inversion,
/// exponential inverses).
pub const MATRIX_TOL: f64 = 1e-13;

/// Coordinate degrees together with the symplectic matrix of the degree -1
/// pairing. The ambient datum of everything else in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedBasis<S: Scalar> {
    degrees: Vec<i32>,
    omega: Mat<S>,
    omega_inv: Mat<S>,
}

impl<S: Scalar> GradedBasis<S> {
    /// Builds a basis from coordinate degrees (canonically sorted ascending)
    /// and the symplectic matrix `omega`. Validates the degree -1 pairing
    /// condition, antisymmetry, invertibility and paired degree counts.
    pub fn new(degrees: Vec<i32>, omega: Mat<S>) -> Result<Arc<Self>> {
        let n = degrees.len();
        if omega.len() != n || omega.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "omega must be {n}x{n} to match {n} coordinate degrees"
            )));
        }
        if degrees.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid(
                "coordinate degrees must be sorted ascending (canonical order)".into(),
            ));
        }
        for (i, row) in omega.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() && degrees[i] + degrees[j] + 1 != 0 {
                    return Err(Error::InvalidOmega(format!(
                        "omega[{i}][{j}] nonzero but degrees {} + {} + 1 != 0",
                        degrees[i], degrees[j]
                    )));
                }
                let skew = v.add(&omega[j][i]);
                if if S::EXACT {
                    !skew.is_zero()
                } else {
                    skew.abs_f64() > MATRIX_TOL
                } {
                    return Err(Error::InvalidOmega(format!(
                        "omega is not antisymmetric at ({i},{j})"
                    )));
                }
            }
        }
        for &d in &degrees {
            let here = degrees.iter().filter(|&&x| x == d).count();
            let partner = degrees.iter().filter(|&&x| x == -1 - d).count();
            if here != partner {
                return Err(Error::InvalidOmega(format!(
                    "degree {d} has {here} coordinates but degree {} has {partner}",
                    -1 - d
                )));
            }
        }
        let omega_inv = mat::inverse(&omega).map_err(|_| {
            Error::InvalidOmega("omega is singular".into())
        })?;
        let product = mat::mul(&omega, &omega_inv);
        let err = mat::max_abs_diff(&product, &mat::identity(n));
        if (S::EXACT && err != 0.0) || (!S::EXACT && err > MATRIX_TOL) {
            return Err(Error::InvalidOmega(format!(
                "omega * omega_inv deviates from identity by {err}"
            )));
        }
        Ok(Arc::new(Self {
            degrees,
            omega,
            omega_inv,
        }))
    }

    /// Convenience constructor: `pairs` coordinates of degree `-1` followed by
    /// `pairs` coordinates of degree `0`, with the block pairing
    /// `omega[i][pairs + i] = 1`.
    pub fn standard_pairs(pairs: usize) -> Arc<Self> {
        let mut degrees = vec![-1; pairs];
        degrees.extend(vec![0; pairs]);
        let mut omega = mat::zeros::<S>(2 * pairs, 2 * pairs);
        for i in 0..pairs {
            omega[i][pairs + i] = S::one();
            omega[pairs + i][i] = S::one().neg();
        }
        Self::new(degrees, omega).expect("standard pairing is valid")
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[i32] {
        &self.degrees
    }

    pub fn degree(&self, i: usize) -> i32 {
        self.degrees[i]
    }

    /// Parity of the i-th coordinate degree.
    pub fn odd(&self, i: usize) -> bool {
        parity(self.degrees[i])
    }

    pub fn omega(&self) -> &Mat<S> {
        &self.omega
    }

    pub fn omega_inv(&self) -> &Mat<S> {
        &self.omega_inv
    }
}

/// Returns true when the two handles denote the same basis (pointer or
/// structural equality).
pub fn same_basis<S: Scalar>(a: &Arc<GradedBasis<S>>, b: &Arc<GradedBasis<S>>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A homogeneous endomorphism of fixed degree with scalar component matrix.
/// Components compose contravariantly: operators act on coordinates, so the
/// graded commutator of two endomorphisms multiplies matrices in right-action
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Endomorphism<S: Scalar> {
    basis: Arc<GradedBasis<S>>,
    degree: i32,
    entries: Mat<S>,
}

impl<S: Scalar> Endomorphism<S> {
    /// Validates the entry-degree invariant: `entries[i][j]` may be nonzero
    /// only when `degree(j) = degree(i) + degree`.
    pub fn new(basis: Arc<GradedBasis<S>>, degree: i32, entries: Mat<S>) -> Result<Self> {
        let n = basis.dim();
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "endomorphism matrix must be {n}x{n}"
            )));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() && basis.degree(j) != basis.degree(i) + degree {
                    return Err(Error::DegreeViolation(format!(
                        "entry ({i},{j}) nonzero but degree {} != degree {} + {degree}",
                        basis.degree(j),
                        basis.degree(i)
                    )));
                }
            }
        }
        Ok(Self {
            basis,
            degree,
            entries,
        })
    }

    pub fn zero(basis: Arc<GradedBasis<S>>, degree: i32) -> Self {
        let n = basis.dim();
        Self {
            basis,
            degree,
            entries: mat::zeros(n, n),
        }
    }

    pub fn identity(basis: Arc<GradedBasis<S>>) -> Self {
        let n = basis.dim();
        Self {
            basis,
            degree: 0,
            entries: mat::identity(n),
        }
    }

    /// The Euler endomorphism: diagonal matrix of coordinate degrees.
    pub fn euler(basis: Arc<GradedBasis<S>>) -> Self {
        let n = basis.dim();
        let mut entries = mat::zeros::<S>(n, n);
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = S::from_int(i64::from(basis.degree(i)));
        }
        Self {
            basis,
            degree: 0,
            entries,
        }
    }

    /// `(-1)^{pF}`: the diagonal endomorphism with entries `(-1)^{p eps_i}`.
    pub fn sign_power_euler(basis: Arc<GradedBasis<S>>, p: i32) -> Self {
        let n = basis.dim();
        let mut entries = mat::zeros::<S>(n, n);
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = if parity(p * basis.degree(i)) {
                S::one().neg()
            } else {
                S::one()
            };
        }
        Self {
            basis,
            degree: 0,
            entries,
        }
    }

    pub fn basis(&self) -> &Arc<GradedBasis<S>> {
        &self.basis
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn entries(&self) -> &Mat<S> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        &self.entries[i][j]
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    /// Plain matrix product `self * other` (degree adds). Model formulas such
    /// as `Q e^{tH}` use this order.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self {
            basis: self.basis.clone(),
            degree: self.degree + other.degree,
            entries: mat::mul(&self.entries, &other.entries),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        if self.degree != other.degree {
            return Err(Error::DegreeViolation(format!(
                "cannot add endomorphisms of degrees {} and {}",
                self.degree, other.degree
            )));
        }
        Ok(Self {
            basis: self.basis.clone(),
            degree: self.degree,
            entries: mat::add(&self.entries, &other.entries),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            degree: self.degree,
            entries: mat::neg(&self.entries),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        Self {
            basis: self.basis.clone(),
            degree: self.degree,
            entries: mat::scale(&self.entries, c),
        }
    }

    pub fn is_zero(&self) -> bool {
        mat::is_zero(&self.entries)
    }

    pub fn max_abs(&self) -> f64 {
        mat::max_abs(&self.entries)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        mat::max_abs_diff(&self.entries, &other.entries)
    }

    /// Antisymmetric part `(A - A~)/2` under the symplectic transpose.
    pub fn antisymmetric_part(&self) -> Self {
        let half = S::from_ratio(1, 2);
        let t = self.transpose();
        self.sub(&t).expect("degrees match").scale(&half)
    }

    /// Whether `A~ = -A` holds (exactly, or to `tol` in float mode).
    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        let sum = match self.transpose().add(self) {
            Ok(s) => s,
            Err(_) => return false,
        };
        if S::EXACT {
            sum.is_zero()
        } else {
            sum.max_abs() <= tol
        }
    }
}

/// The graded trace `grtr A = sum_i (-1)^{(|A|+1) eps_i} A^i_i`.
pub fn graded_trace<S: Scalar>(a: &Endomorphism<S>) -> S {
    let weight = a.degree() + 1;
    let mut acc = S::zero();
    for i in 0..a.basis().dim() {
        let sign = parity(weight * a.basis().degree(i));
        let term = if sign {
            a.entry(i, i).neg()
        } else {
            a.entry(i, i).clone()
        };
        acc = acc.add(&term);
    }
    acc
}

impl<S: Scalar> Endomorphism<S> {
    /// Symplectic transpose. Component formula in the coordinate basis,
    /// obtained by converting the symplectic-dual-basis expression with
    /// omega: `(A~)^k_l = -sum_{i,j} w^{ki} (-1)^{|A|(e_i + e'_j) + e_i e'_j}
    /// A^j_i w_{jl}` where `e'_j = -e_j - 1`.
    pub fn transpose(&self) -> Self {
        let n = self.basis.dim();
        let omega = self.basis.omega();
        let omega_inv = self.basis.omega_inv();
        let deg = self.degree;
        let mut out = mat::zeros::<S>(n, n);
        for k in 0..n {
            for i in 0..n {
                if omega_inv[k][i].is_zero() {
                    continue;
                }
                for j in 0..n {
                    if self.entries[j][i].is_zero() {
                        continue;
                    }
                    for l in 0..n {
                        if omega[j][l].is_zero() {
                            continue;
                        }
                        let ei = self.basis.degree(i);
                        let ej_dual = -self.basis.degree(j) - 1;
                        let sign = parity(deg * (ei + ej_dual) + ei * ej_dual);
                        let mut term = omega_inv[k][i]
                            .mul(&self.entries[j][i])
                            .mul(&omega[j][l])
                            .neg();
                        if sign {
                            term = term.neg();
                        }
                        out[k][l] = out[k][l].add(&term);
                    }
                }
            }
        }
        Self {
            basis: self.basis.clone(),
            degree: deg,
            entries: out,
        }
    }
}

/// Graded commutator `[A, B] = AB - (-1)^{|A||B|} BA`, with components
/// composed in right-action (operator) order.
pub fn graded_commutator<S: Scalar>(
    a: &Endomorphism<S>,
    b: &Endomorphism<S>,
) -> Result<Endomorphism<S>> {
    let ab = b.matmul(a)?;
    let ba = a.matmul(b)?;
    let sign = parity(a.degree() * b.degree());
    if sign {
        ab.add(&ba)
    } else {
        ab.sub(&ba)
    }
}

/// Graded anticommutator of two matrices in plain product order:
/// `AB + BA`. Order-symmetric, so composition convention is immaterial.
pub fn anticommutator<S: Scalar>(
    a: &Endomorphism<S>,
    b: &Endomorphism<S>,
) -> Result<Endomorphism<S>> {
    a.matmul(b)?.add(&b.matmul(a)?)
}

/// Matrix exponential `e^{tau A}` of a degree 0 endomorphism.
///
/// Exact mode accepts only nilpotent arguments (the sum is finite); float
/// mode uses scaling and squaring with a truncated Taylor series, accurate to
/// about 1e-13 per entry at desk scale.
pub fn matrix_exp<S: Scalar>(a: &Endomorphism<S>, tau: &S) -> Result<Endomorphism<S>> {
    if a.degree() != 0 {
        return Err(Error::ExpNonzeroDegree(a.degree()));
    }
    if tau.is_zero() {
        return Ok(Endomorphism::identity(a.basis().clone()));
    }
    let n = a.basis().dim();
    if S::EXACT {
        let mut power = Endomorphism::identity(a.basis().clone());
        let mut sum = power.clone();
        let mut tau_pow = S::one();
        let mut factorial: i64 = 1;
        for k in 1..=n as i64 + 1 {
            power = power.matmul(a)?;
            if power.is_zero() {
                return Ok(sum);
            }
            if k as usize > n {
                return Err(Error::NotNilpotent);
            }
            tau_pow = tau_pow.mul(tau);
            factorial *= k;
            let coeff = tau_pow.div(&S::from_int(factorial))?;
            sum = sum.add(&power.scale(&coeff))?;
        }
        Ok(sum)
    } else {
        let norm = a.max_abs() * tau.abs_f64();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > 0.25 && squarings < 60 {
            scaled_norm /= 2.0;
            squarings += 1;
        }
        let scaled_tau = tau.div(&S::from_int(1i64 << squarings))?;
        let b = a.scale(&scaled_tau);
        let mut term = Endomorphism::identity(a.basis().clone());
        let mut sum = term.clone();
        for k in 1..=30i64 {
            term = term.matmul(&b)?.scale(&S::from_ratio(1, k));
            sum = sum.add(&term)?;
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        let mut result = sum;
        for _ in 0..squarings {
            result = result.matmul(&result)?;
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    fn basis_pair() -> Arc<GradedBasis<Rat>> {
        GradedBasis::<Rat>::standard_pairs(1)
    }

    fn rmat(entries: &[&[i64]]) -> Mat<Rat> {
        entries
            .iter()
            .map(|r| r.iter().map(|&x| Rat::from_int(x)).collect())
            .collect()
    }

    #[test]
    fn trace_of_identity_vanishes_on_matched_pair() {
        let b = basis_pair();
        let id = Endomorphism::identity(b);
        assert!(graded_trace(&id).is_zero());
    }

    #[test]
    fn trace_of_euler_is_one_on_degree_pair() {
        let b = basis_pair();
        let f = Endomorphism::euler(b);
        assert_eq!(graded_trace(&f), Rat::from_int(1));
    }

    #[test]
    fn euler_diagonal_matches_degrees() {
        let b = basis_pair();
        let f = Endomorphism::euler(b.clone());
        for i in 0..b.dim() {
            assert_eq!(*f.entry(i, i), Rat::from_int(i64::from(b.degree(i))));
        }
    }

    #[test]
    fn even_sign_power_of_euler_is_identity() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let s = Endomorphism::sign_power_euler(b.clone(), 2);
        assert_eq!(s, Endomorphism::identity(b));
    }

    #[test]
    fn transpose_of_identity_is_minus_identity() {
        let b = basis_pair();
        let id = Endomorphism::identity(b);
        assert_eq!(id.transpose(), id.neg());
    }

    #[test]
    fn transpose_of_euler_is_euler_plus_identity() {
        let b = basis_pair();
        let f = Endomorphism::euler(b.clone());
        let expected = f.add(&Endomorphism::identity(b)).unwrap();
        assert_eq!(f.transpose(), expected);
    }

    #[test]
    fn transpose_is_involutive() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let deg0 = Endomorphism::new(
            b.clone(),
            0,
            rmat(&[
                &[2, 3, 0, 0],
                &[5, 7, 0, 0],
                &[0, 0, -1, 4],
                &[0, 0, 6, 2],
            ]),
        )
        .unwrap();
        assert_eq!(deg0.transpose().transpose(), deg0);
        let deg1 = Endomorphism::new(
            b,
            1,
            rmat(&[
                &[0, 0, 1, 2],
                &[0, 0, 3, 4],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
            ]),
        )
        .unwrap();
        assert_eq!(deg1.transpose().transpose(), deg1);
    }

    #[test]
    fn product_transposition_law() {
        // (AB)~ = (-1)^{1+|A||B|} B~ A~ with plain matrix products.
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let a = Endomorphism::new(
            b.clone(),
            1,
            rmat(&[
                &[0, 0, 1, 2],
                &[0, 0, 3, -1],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
            ]),
        )
        .unwrap();
        let c = Endomorphism::new(
            b,
            -1,
            rmat(&[
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
                &[2, 1, 0, 0],
                &[-3, 4, 0, 0],
            ]),
        )
        .unwrap();
        let ac = a.matmul(&c).unwrap();
        let rhs = c.transpose().matmul(&a.transpose()).unwrap();
        // |A||C| = -1 odd: (AC)~ = B~A~ with positive sign here.
        let sign = parity(1 + a.degree() * c.degree());
        let rhs = if sign { rhs.neg() } else { rhs };
        assert_eq!(ac.transpose(), rhs);
    }

    #[test]
    fn graded_trace_invariant_under_transpose() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let a = Endomorphism::new(
            b,
            0,
            rmat(&[
                &[2, 3, 0, 0],
                &[5, 7, 0, 0],
                &[0, 0, -1, 4],
                &[0, 0, 6, 2],
            ]),
        )
        .unwrap();
        assert_eq!(graded_trace(&a.transpose()), graded_trace(&a));
    }

    #[test]
    fn exp_of_zero_time_is_identity() {
        let b = basis_pair();
        let h = Endomorphism::new(b.clone(), 0, rmat(&[&[1, 0], &[0, 1]])).unwrap();
        let e = matrix_exp(&h, &Rat::from_int(0)).unwrap();
        assert_eq!(e, Endomorphism::identity(b));
    }

    #[test]
    fn exact_exp_requires_nilpotent() {
        let b = basis_pair();
        let h = Endomorphism::identity(b);
        assert!(matches!(
            matrix_exp(&h, &Rat::from_int(1)),
            Err(Error::NotNilpotent)
        ));
    }

    #[test]
    fn exact_exp_of_nilpotent_is_finite_sum() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        // Strictly upper-triangular within the degree 0 block.
        let h = Endomorphism::new(
            b.clone(),
            0,
            rmat(&[
                &[0, 1, 0, 0],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
            ]),
        )
        .unwrap();
        let tau = Rat::from_ratio(3, 2);
        let e = matrix_exp(&h, &tau).unwrap();
        let expected = Endomorphism::identity(b)
            .add(&h.scale(&tau))
            .unwrap();
        assert_eq!(e, expected);
    }

    #[test]
    fn float_exp_inverse_check() {
        let b = GradedBasis::<f64>::standard_pairs(1);
        let h = Endomorphism::new(b.clone(), 0, vec![vec![0.7, 0.0], vec![0.0, 0.7]]).unwrap();
        let e = matrix_exp(&h, &1.3).unwrap();
        let e_inv = matrix_exp(&h, &-1.3).unwrap();
        let prod = e.matmul(&e_inv).unwrap();
        let id = Endomorphism::identity(b);
        assert!(prod.max_abs_diff(&id) <= MATRIX_TOL);
    }

    #[test]
    fn exp_rejects_nonzero_degree() {
        let b = basis_pair();
        let q = Endomorphism::new(b, 1, rmat(&[&[0, 1], &[0, 0]])).unwrap();
        assert!(matches!(
            matrix_exp(&q, &Rat::from_int(1)),
            Err(Error::ExpNonzeroDegree(1))
        ));
    }

    #[test]
    fn commutator_with_euler_grades_operators() {
        // [F, A] = |A| A for homogeneous A in right-action order.
        let b = basis_pair();
        let f = Endomorphism::euler(b.clone());
        let q = Endomorphism::new(b, 1, rmat(&[&[0, 1], &[0, 0]])).unwrap();
        let c = graded_commutator(&f, &q).unwrap();
        assert_eq!(c, q);
    }

    #[test]
    fn commutator_of_even_with_itself_vanishes() {
        let b = basis_pair();
        let h = Endomorphism::new(b, 0, rmat(&[&[2, 0], &[0, 3]])).unwrap();
        assert!(graded_commutator(&h, &h).unwrap().is_zero());
    }

    #[test]
    fn trace_of_commutator_vanishes() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let a = Endomorphism::new(
            b.clone(),
            1,
            rmat(&[
                &[0, 0, 1, 2],
                &[0, 0, 3, -1],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
            ]),
        )
        .unwrap();
        let c = Endomorphism::new(
            b,
            -1,
            rmat(&[
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
                &[2, 1, 0, 0],
                &[-3, 4, 0, 0],
            ]),
        )
        .unwrap();
        assert!(graded_trace(&graded_commutator(&a, &c).unwrap()).is_zero());
    }

    #[test]
    fn transpose_commutes_with_commutator() {
        let b = GradedBasis::<Rat>::standard_pairs(2);
        let a = Endomorphism::new(
            b.clone(),
            1,
            rmat(&[
                &[0, 0, 1, 2],
                &[0, 0, 3, -1],
                &[0, 0, 0, 0],
                &[0, 0, 0, 0],
            ]),
        )
        .unwrap();
        let c = Endomorphism::new(
            b,
            0,
            rmat(&[
                &[2, 3, 0, 0],
                &[5, 7, 0, 0],
                &[0, 0, -1, 4],
                &[0, 0, 6, 2],
            ]),
        )
        .unwrap();
        let lhs = graded_commutator(&a, &c).unwrap().transpose();
        let rhs = graded_commutator(&a.transpose(), &c.transpose()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn rejects_entry_degree_violation() {
        let b = basis_pair();
        assert!(Endomorphism::new(b, 1, rmat(&[&[1, 0], &[0, 0]])).is_err());
    }

    #[test]
    fn rejects_unsorted_degrees() {
        let omega = rmat(&[&[0, 1], &[-1, 0]]);
        assert!(GradedBasis::<Rat>::new(vec![0, -1], omega).is_err());
    }

    #[test]
    fn rejects_degree_condition_violation_in_omega() {
        let omega = rmat(&[&[0, 1], &[-1, 0]]);
        assert!(GradedBasis::<Rat>::new(vec![-2, 0], omega).is_err());
    }
}
