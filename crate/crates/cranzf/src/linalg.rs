//! Small dense complex linear algebra.
//!
//! Everything in this crate works with vectors of at most a few dozen
//! entries (stacked channels live in `ℂ^{M·N_t}`), so the routines here are
//! plain loops over `Vec<Complex64>` rather than bindings to a BLAS.  The one
//! nontrivial routine is [`orthonormal_null_basis`], which fixes a
//! *deterministic* basis for the orthogonal complement of a span: the
//! downstream beamformers are invariant to the basis choice, but
//! reproducibility of a run is not.

use num_complex::Complex64;
use thiserror::Error;

/// Complex double-precision scalar.
pub type C64 = Complex64;

/// A complex column vector.
pub type CVector = Vec<C64>;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input vectors span the whole space; null space is empty")]
    NullSpaceEmpty,
    #[error("could not extend to a full orthonormal basis (degenerate input)")]
    DegenerateExtension,
    #[error("cannot normalize a (numerically) zero vector")]
    ZeroVector,
}

/// Dense complex matrix stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: Vec<CVector>,
}

impl CMatrix {
    pub fn from_columns(rows: usize, cols: Vec<CVector>) -> Self {
        for c in &cols {
            assert_eq!(c.len(), rows, "column length must equal row count");
        }
        Self { rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        let cols = (0..n).map(|j| unit_coordinate(n, j)).collect();
        Self { rows: n, cols }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &CVector {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[CVector] {
        &self.cols
    }

    /// `A† v` for a vector `v` of length `nrows`.
    pub fn adjoint_mul(&self, v: &[C64]) -> CVector {
        assert_eq!(v.len(), self.rows);
        self.cols.iter().map(|c| inner(c, v)).collect()
    }

    /// `A w` for a vector `w` of length `ncols`.
    pub fn mul(&self, w: &[C64]) -> CVector {
        assert_eq!(w.len(), self.cols.len());
        let mut out = vec![C64::ZERO; self.rows];
        for (c, &wj) in self.cols.iter().zip(w) {
            for (o, &cj) in out.iter_mut().zip(c) {
                *o += cj * wj;
            }
        }
        out
    }
}

/// Hermitian inner product `a† b` (conjugates the first argument).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sq(v).sqrt()
}

pub fn scale(v: &[C64], s: C64) -> CVector {
    v.iter().map(|x| x * s).collect()
}

/// `v + s·u`, in place.
pub fn axpy(v: &mut [C64], s: C64, u: &[C64]) {
    debug_assert_eq!(v.len(), u.len());
    for (x, &y) in v.iter_mut().zip(u) {
        *x += s * y;
    }
}

pub fn normalized(v: &[C64]) -> Result<CVector, LinalgError> {
    let n = norm(v);
    if n <= 0.0 || !n.is_finite() {
        return Err(LinalgError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn unit_coordinate(dim: usize, j: usize) -> CVector {
    let mut v = vec![C64::ZERO; dim];
    v[j] = C64::ONE;
    v
}

/// Subtracts from `v` its projection onto each vector of the orthonormal set
/// `onb`.  One classical Gram–Schmidt sweep.
fn project_out(v: &mut CVector, onb: &[CVector]) {
    for u in onb {
        let c = inner(u, v);
        axpy(v, -c, u);
    }
}

/// Component of `v` orthogonal to the span of the orthonormal set `onb`.
///
/// Projects twice; a single sweep loses orthogonality when `v` lies close to
/// the span.
pub fn residual(v: &[C64], onb: &[CVector]) -> CVector {
    let mut r = v.to_vec();
    project_out(&mut r, onb);
    project_out(&mut r, onb);
    r
}

/// Orthonormalizes `vectors` in index order by modified Gram–Schmidt with
/// re-orthogonalization, dropping vectors whose residual falls below
/// `rel_tol` times the largest input norm.  Returns the orthonormal set; its
/// length is the numerical rank.
pub fn orthonormalize(vectors: &[CVector], rel_tol: f64) -> Vec<CVector> {
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    let mut onb: Vec<CVector> = Vec::with_capacity(vectors.len());
    if scale == 0.0 {
        return onb;
    }
    for v in vectors {
        let r = residual(v, &onb);
        let n = norm(&r);
        if n > rel_tol * scale {
            onb.push(r.iter().map(|x| x / n).collect());
        }
    }
    onb
}

/// Rank threshold used throughout: channels are generically full rank, so the
/// threshold only guards degenerate (test) inputs.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Deterministic orthonormal basis for the orthogonal complement of
/// `span(vectors)` in `ℂ^dim`.
///
/// The basis is fixed by: orthonormalize the inputs in order, extend with the
/// coordinate vectors `e_0, e_1, …` in index order, re-orthonormalize.  Two
/// calls with identical inputs produce bit-identical output.
///
/// Errors when some input has the wrong length or when the inputs already
/// span the whole space.
pub fn orthonormal_null_basis(vectors: &[CVector], dim: usize) -> Result<CMatrix, LinalgError> {
    for v in vectors {
        if v.len() != dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let span = orthonormalize(vectors, RANK_REL_TOL);
    let rank = span.len();
    if rank >= dim {
        return Err(LinalgError::NullSpaceEmpty);
    }

    let want = dim - rank;
    let mut all = span;
    let mut null_cols: Vec<CVector> = Vec::with_capacity(want);
    for j in 0..dim {
        if null_cols.len() == want {
            break;
        }
        let e = unit_coordinate(dim, j);
        let r = residual(&e, &all);
        let n = norm(&r);
        if n > RANK_REL_TOL {
            let u: CVector = r.iter().map(|x| x / n).collect();
            all.push(u.clone());
            null_cols.push(u);
        }
    }
    if null_cols.len() != want {
        return Err(LinalgError::DegenerateExtension);
    }
    Ok(CMatrix::from_columns(dim, null_cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rand_cvec(rng: &mut ChaCha8Rng, dim: usize) -> CVector {
        (0..dim)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    }

    #[test]
    fn empty_span_gives_identity() {
        let n = orthonormal_null_basis(&[], 4).unwrap();
        assert_eq!(n, CMatrix::identity(4));
    }

    #[test]
    fn coordinate_vector_complement() {
        let e1 = unit_coordinate(3, 0);
        let n = orthonormal_null_basis(&[e1], 3).unwrap();
        assert_eq!(n.ncols(), 2);
        assert_eq!(n.column(0), &unit_coordinate(3, 1));
        assert_eq!(n.column(1), &unit_coordinate(3, 2));
    }

    #[test]
    fn random_span_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vs: Vec<CVector> = (0..3).map(|_| rand_cvec(&mut rng, 5)).collect();
        let n = orthonormal_null_basis(&vs, 5).unwrap();
        assert_eq!(n.ncols(), 2);
        // N†N = I
        for i in 0..2 {
            for j in 0..2 {
                let d = inner(n.column(i), n.column(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).norm() < 1e-12, "N†N entry {i},{j}: {d}");
            }
        }
        // v†N = 0 for every input
        for v in &vs {
            let proj = n.adjoint_mul(v);
            assert!(norm(&proj) < 1e-10 * norm(v));
        }
    }

    #[test]
    fn deterministic_for_identical_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vs: Vec<CVector> = (0..4).map(|_| rand_cvec(&mut rng, 7)).collect();
        let a = orthonormal_null_basis(&vs, 7).unwrap();
        let b = orthonormal_null_basis(&vs, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_span_is_an_error() {
        let vs: Vec<CVector> = (0..3).map(|j| unit_coordinate(3, j)).collect();
        assert_eq!(
            orthonormal_null_basis(&vs, 3).unwrap_err(),
            LinalgError::NullSpaceEmpty
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let vs = vec![unit_coordinate(4, 0)];
        assert!(matches!(
            orthonormal_null_basis(&vs, 3),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rank_deficient_inputs_are_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = rand_cvec(&mut rng, 4);
        let w = scale(&v, C64::new(-2.5, 0.75));
        let n = orthonormal_null_basis(&[v, w], 4).unwrap();
        assert_eq!(n.ncols(), 3);
    }

    proptest! {
        #[test]
        fn null_basis_orthogonality(seed in 0u64..500, k in 1usize..5, dim in 5usize..9) {
            prop_assume!(k < dim);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vs: Vec<CVector> = (0..k).map(|_| rand_cvec(&mut rng, dim)).collect();
            let n = orthonormal_null_basis(&vs, dim).unwrap();
            prop_assert_eq!(n.ncols(), dim - k);
            for i in 0..n.ncols() {
                for j in 0..n.ncols() {
                    let d = inner(n.column(i), n.column(j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - want).norm() < 1e-12);
                }
            }
            for v in &vs {
                prop_assert!(norm(&n.adjoint_mul(v)) < 1e-10 * norm(v));
            }
        }
    }
}
