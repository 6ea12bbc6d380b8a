//! Kronecker algebra: products, sums, and slot substitution.
//!
//! The composite plant of a layered network is `A₁ ⊕ A₂ ⊕ … ⊕ A_m` (Kronecker
//! sum) driven through `B₁ ⊗ B₂ ⊗ … ⊗ B_m` (Kronecker product). Assembly of
//! the composite design weights additionally needs products in which exactly
//! one factor of a list is replaced by another matrix; [`slot_product`]
//! provides that operator. All folds are left-associated, matching the
//! row-major flat indexing used by [`crate::graphs::cartesian_product`].

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors from Kronecker-algebra operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KronError {
    /// Kronecker sums are only defined for square factors.
    #[error("kronecker sum requires square factors, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    /// Folded variants need at least one factor.
    #[error("factor list is empty")]
    EmptyList,
    /// Slot index outside `1..=len`.
    #[error("slot {slot} out of range for {len} factors (slots are 1-based)")]
    SlotOutOfRange { slot: usize, len: usize },
}

/// Kronecker product `a ⊗ b`: the block matrix whose `(i, j)` block is
/// `a[(i, j)] · b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker sum `a ⊕ b = a ⊗ I_m + I_n ⊗ b` for square `a` (n×n) and `b`
/// (m×m).
pub fn kron_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, KronError> {
    for m in [a, b] {
        if !m.is_square() {
            return Err(KronError::NonSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
    }
    let (n, m) = (a.nrows(), b.nrows());
    Ok(a.kronecker(&DMatrix::identity(m, m)) + DMatrix::identity(n, n).kronecker(b))
}

/// Left-associated Kronecker product `f₁ ⊗ f₂ ⊗ … ⊗ f_ℓ`.
pub fn kron_many(factors: &[DMatrix<f64>]) -> Result<DMatrix<f64>, KronError> {
    let (first, rest) = factors.split_first().ok_or(KronError::EmptyList)?;
    Ok(rest.iter().fold(first.clone(), |acc, f| acc.kronecker(f)))
}

/// Left-associated Kronecker sum `f₁ ⊕ f₂ ⊕ … ⊕ f_ℓ` of square factors.
pub fn kron_sum_many(factors: &[DMatrix<f64>]) -> Result<DMatrix<f64>, KronError> {
    let (first, rest) = factors.split_first().ok_or(KronError::EmptyList)?;
    if !first.is_square() {
        return Err(KronError::NonSquare {
            rows: first.nrows(),
            cols: first.ncols(),
        });
    }
    rest.iter().try_fold(first.clone(), |acc, f| kron_sum(&acc, f))
}

/// Kronecker product of `factors` with the factor at `slot` (1-based)
/// replaced by `d`:
///
/// `f₁ ⊗ … ⊗ f_{k−1} ⊗ d ⊗ f_{k+1} ⊗ … ⊗ f_ℓ`.
///
/// The replaced factor's dimensions do not constrain `d`; the caller chooses
/// a compatible shape for the surrounding algebra.
pub fn slot_product(
    factors: &[DMatrix<f64>],
    slot: usize,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>, KronError> {
    if factors.is_empty() {
        return Err(KronError::EmptyList);
    }
    if slot == 0 || slot > factors.len() {
        return Err(KronError::SlotOutOfRange {
            slot,
            len: factors.len(),
        });
    }
    let mut acc: Option<DMatrix<f64>> = None;
    for (i, f) in factors.iter().enumerate() {
        let next = if i + 1 == slot { d } else { f };
        acc = Some(match acc {
            None => next.clone(),
            Some(a) => a.kronecker(next),
        });
    }
    Ok(acc.expect("nonempty factor list"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Reference Kronecker product straight from the block definition, kept
    /// independent of the nalgebra kernel the implementation delegates to.
    fn kron_reference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let (p1, q1) = (a.nrows(), a.ncols());
        let (p2, q2) = (b.nrows(), b.ncols());
        DMatrix::from_fn(p1 * p2, q1 * q2, |i, j| {
            a[(i / p2, j / q2)] * b[(i % p2, j % q2)]
        })
    }

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn identity_kron_identity() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(kron(&i2, &i3), DMatrix::identity(6, 6));
    }

    #[test]
    fn row_times_column_blocks() {
        let a = mat(1, 2, &[1.0, 2.0]);
        let b = mat(2, 1, &[3.0, 4.0]);
        assert_eq!(kron(&a, &b), mat(2, 2, &[3.0, 6.0, 4.0, 8.0]));
    }

    #[test]
    fn scalar_kron_sum() {
        let a = mat(1, 1, &[2.5]);
        let b = mat(1, 1, &[-1.0]);
        assert_eq!(kron_sum(&a, &b).unwrap(), mat(1, 1, &[1.5]));
    }

    #[test]
    fn kron_sum_rejects_rectangular() {
        let a = mat(2, 3, &[0.0; 6]);
        let b = DMatrix::identity(2, 2);
        assert_eq!(
            kron_sum(&a, &b),
            Err(KronError::NonSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn kron_sum_eigenvalues_are_pairwise_sums() {
        let a = mat(3, 3, &[2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let b = mat(2, 2, &[0.0, 2.0, 2.0, 1.0]);
        let mut lhs: Vec<f64> = kron_sum(&a, &b)
            .unwrap()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        let la = a.symmetric_eigen().eigenvalues;
        let lb = b.symmetric_eigen().eigenvalues;
        let mut rhs: Vec<f64> = la.iter().flat_map(|x| lb.iter().map(move |y| x + y)).collect();
        lhs.sort_by(f64::total_cmp);
        rhs.sort_by(f64::total_cmp);
        for (x, y) in lhs.iter().zip(&rhs) {
            assert_relative_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn folds_match_scalar_arithmetic() {
        let factors = [mat(1, 1, &[1.0]), mat(1, 1, &[2.0]), mat(1, 1, &[4.0])];
        assert_eq!(kron_sum_many(&factors).unwrap(), mat(1, 1, &[7.0]));
        assert_eq!(kron_many(&factors).unwrap(), mat(1, 1, &[8.0]));
        assert_eq!(kron_many(&[]), Err(KronError::EmptyList));
        assert_eq!(kron_sum_many(&[]), Err(KronError::EmptyList));
    }

    #[test]
    fn kron_many_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let factors = [i2.clone(), i2.clone(), i2];
        assert_eq!(kron_many(&factors).unwrap(), DMatrix::identity(8, 8));
    }

    #[test]
    fn slot_product_single_slot_returns_replacement() {
        let d = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let got = slot_product(&[mat(3, 3, &[0.0; 9])], 1, &d).unwrap();
        assert_eq!(got, d);
    }

    #[test]
    fn slot_product_two_factors() {
        let m1 = mat(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let m2 = mat(2, 2, &[3.0, 1.0, 1.0, 3.0]);
        let p = mat(2, 2, &[5.0, 0.0, 0.0, 5.0]);
        assert_eq!(
            slot_product(&[m1, m2.clone()], 1, &p).unwrap(),
            kron(&p, &m2)
        );
    }

    #[test]
    fn slot_product_index_validation() {
        let factors = [DMatrix::<f64>::identity(2, 2)];
        let d = DMatrix::<f64>::identity(2, 2);
        assert_eq!(
            slot_product(&factors, 0, &d),
            Err(KronError::SlotOutOfRange { slot: 0, len: 1 })
        );
        assert_eq!(
            slot_product(&factors, 2, &d),
            Err(KronError::SlotOutOfRange { slot: 2, len: 1 })
        );
    }

    prop_compose! {
        fn small_matrix(max_dim: usize)
            (rows in 1..=max_dim, cols in 1..=max_dim)
            (data in prop::collection::vec(-3.0f64..3.0, rows * cols),
             rows in Just(rows), cols in Just(cols))
            -> DMatrix<f64>
        {
            DMatrix::from_vec(rows, cols, data)
        }
    }

    prop_compose! {
        fn small_square(max_dim: usize)
            (n in 1..=max_dim)
            (data in prop::collection::vec(-3.0f64..3.0, n * n), n in Just(n))
            -> DMatrix<f64>
        {
            DMatrix::from_vec(n, n, data)
        }
    }

    prop_compose! {
        fn square_pair(max_dim: usize)
            (n in 1..=max_dim)
            (x in prop::collection::vec(-3.0f64..3.0, n * n),
             y in prop::collection::vec(-3.0f64..3.0, n * n),
             n in Just(n))
            -> (DMatrix<f64>, DMatrix<f64>)
        {
            (DMatrix::from_vec(n, n, x), DMatrix::from_vec(n, n, y))
        }
    }

    proptest! {
        #[test]
        fn matches_block_definition(a in small_matrix(3), b in small_matrix(3)) {
            let got = kron(&a, &b);
            let want = kron_reference(&a, &b);
            prop_assert!((got - want).norm() == 0.0);
        }

        #[test]
        fn mixed_product((a, c) in square_pair(3), (b, d) in square_pair(3)) {
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            let scale = rhs.norm().max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }

        #[test]
        fn transpose_distributes(a in small_matrix(3), b in small_matrix(3)) {
            let lhs = kron(&a, &b).transpose();
            let rhs = kron(&a.transpose(), &b.transpose());
            prop_assert!((lhs - rhs).norm() == 0.0);
        }

        #[test]
        fn product_distributes_over_sum(a in small_square(3), (b, c) in square_pair(3)) {
            let lhs = kron(&a, &(&b + &c));
            let rhs = kron(&a, &b) + kron(&a, &c);
            let scale = rhs.norm().max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }

        #[test]
        fn slot_product_is_linear_in_replacement(
            x in small_square(2), (y, z) in square_pair(2), k in 1usize..=3,
        ) {
            let factors = [x.clone(), x.clone(), x];
            let lhs = slot_product(&factors, k, &(&y + &z)).unwrap();
            let rhs = slot_product(&factors, k, &y).unwrap()
                + slot_product(&factors, k, &z).unwrap();
            let scale = rhs.norm().max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }
    }
}
