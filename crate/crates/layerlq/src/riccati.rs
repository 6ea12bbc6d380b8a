//! Riccati machinery for linear-quadratic design under structured uncertainty.
//!
//! Three levels build on each other:
//!
//! 1. dense solvers: a Lyapunov solver ([`lyap`]) and a stabilizing
//!    algebraic-Riccati solver ([`solve_are`]) built from the matrix sign
//!    function plus Newton refinement;
//! 2. an uncertainty model for weighted structured drift perturbations,
//!    with the positive-semidefinite majorant ([`build_majorant`]) that
//!    dominates every admissible perturbation of the Lyapunov derivative;
//! 3. the guaranteed-cost fixed point ([`solve_guaranteed`]): the Riccati
//!    solution is recomputed against a state cost inflated by the majorant
//!    until the two agree, so the resulting quadratic form certifies a cost
//!    bound over the whole uncertainty set instead of the nominal plant only.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::kron::kron;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} contains a non-finite entry")]
    NonFinite(String),
    #[error("{0} must be symmetric")]
    NotSymmetric(String),
    #[error("{0} must be positive definite")]
    NotPositiveDefinite(String),
    #[error("{0} must be positive semidefinite (minimum eigenvalue {1:.3e})")]
    NotPositiveSemidefinite(String, f64),
    #[error("input pair is not controllable: reachable subspace has dimension {rank} of {n}")]
    NotControllable { rank: usize, n: usize },
    #[error("Schur iteration failed to converge")]
    SchurFailed,
    #[error("Lyapunov equation is singular: coefficient matrix has an eigenvalue pair summing to zero")]
    LyapunovSingular,
    #[error("sign-function iterate became singular; no stabilizing solution exists")]
    SingularHamiltonian,
    #[error("sign-function iteration did not converge within {0} steps")]
    SignIterationStalled(usize),
    #[error("Newton refinement stalled with residual {residual:.3e} after {iterations} steps")]
    NewtonStalled { residual: f64, iterations: usize },
    #[error("closed loop is unstable: spectral abscissa {0:.6}")]
    NotStabilizing(f64),
    #[error("guaranteed-cost iteration diverged at step {iteration} (solution norm {norm:.3e})")]
    GuaranteedDiverged { iteration: usize, norm: f64 },
    #[error("guaranteed-cost iteration did not settle within {max_iterations} steps (residual {last_residual:.3e})")]
    GuaranteedStalled {
        max_iterations: usize,
        last_residual: f64,
    },
    #[error("weight {weight} at index {index} exceeds its bound {bound}")]
    WeightOutOfBounds { index: usize, weight: f64, bound: f64 },
    #[error("invalid uncertainty model: {0}")]
    BadUncertainty(String),
}

/// Symmetric part of a matrix. Used to keep iterates exactly symmetric so
/// rounding cannot accumulate skew components across long fixed-point runs.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and the
/// eigenvector columns permuted to match.
pub fn eig_sym(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let se = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (to, &from) in order.iter().enumerate() {
        vectors.set_column(to, &se.eigenvectors.column(from));
    }
    (values, vectors)
}

/// Largest real part over the spectrum, read off the real Schur form so no
/// complex eigensolver is needed.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64, RiccatiError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "spectral abscissa needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (_, t) = a
        .clone()
        .try_schur(1e-12, 0)
        .ok_or(RiccatiError::SchurFailed)?
        .unpack();
    let mut worst = f64::NEG_INFINITY;
    for (start, size) in quasi_blocks(&t) {
        if size == 1 {
            worst = worst.max(t[(start, start)]);
        } else {
            let (a11, a12) = (t[(start, start)], t[(start, start + 1)]);
            let (a21, a22) = (t[(start + 1, start)], t[(start + 1, start + 1)]);
            let mean = 0.5 * (a11 + a22);
            let disc = 0.25 * (a11 - a22) * (a11 - a22) + a12 * a21;
            // A 2x2 block can still carry two real eigenvalues.
            let re = if disc >= 0.0 { mean + disc.sqrt() } else { mean };
            worst = worst.max(re);
        }
    }
    Ok(worst)
}

/// Diagonal block layout of a real quasi-triangular Schur factor: a nonzero
/// subdiagonal entry marks a 2x2 block.
fn quasi_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `Aᵀ X + X A + C = 0` by Bartels–Stewart: one real Schur
/// decomposition of `A`, then block forward substitution over the
/// quasi-triangular factor. Solvable exactly when no two eigenvalues of `A`
/// sum to zero; a Hurwitz `A` always qualifies.
pub fn lyap(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let n = a.nrows();
    if a.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "Lyapunov solve needs square matrices of one size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (u, t) = a
        .clone()
        .try_schur(1e-12, 0)
        .ok_or(RiccatiError::SchurFailed)?
        .unpack();
    let blocks = quasi_blocks(&t);
    let ct = u.transpose() * c * &u;
    let mut y = DMatrix::<f64>::zeros(n, n);
    for &(j0, sj) in &blocks {
        // Right-hand side for the whole block column at once; contributions
        // from already-solved columns enter through one dense product.
        let mut rhs = -ct.view((0, j0), (n, sj)).clone_owned();
        if j0 > 0 {
            rhs -= y.view((0, 0), (n, j0)) * t.view((0, j0), (j0, sj));
        }
        let tjj = t.view((j0, j0), (sj, sj)).clone_owned();
        for &(i0, si) in &blocks {
            let tii = t.view((i0, i0), (si, si)).clone_owned();
            let coeff = kron(&DMatrix::identity(sj, sj), &tii.transpose())
                + kron(&tjj.transpose(), &DMatrix::identity(si, si));
            let local = rhs.view((i0, 0), (si, sj)).clone_owned();
            let vec = DVector::from_column_slice(local.as_slice());
            let sol = coeff
                .lu()
                .solve(&vec)
                .ok_or(RiccatiError::LyapunovSingular)?;
            let z = DMatrix::from_column_slice(si, sj, sol.as_slice());
            y.view_mut((i0, j0), (si, sj)).copy_from(&z);
            let below = i0 + si;
            if below < n {
                let update = t.view((i0, below), (si, n - below)).transpose() * &z;
                let mut tail = rhs.view_mut((below, 0), (n - below, sj));
                tail -= update;
            }
        }
    }
    Ok(&u * y * u.transpose())
}

fn are_residual(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    a.transpose() * p + p * a + q - p * s * p
}

/// Rounding floor of the residual evaluation itself. Forming
/// `AᵀP + PA + Q − PSP` commits an error of order
/// `eps·(‖A‖‖P‖ + ‖Q‖ + ‖S‖‖P‖²)`, so once iterates reach that level the
/// measured residual is noise and further refinement cannot help. The
/// quadratic term matters: badly scaled plants (`‖P‖ ≫ ‖Q‖`, typical for
/// strongly unstable single-input systems) plateau far above any threshold
/// linear in `‖P‖` while already being exact to working precision.
fn residual_floor(a_norm: f64, s_norm: f64, q_norm: f64, p_norm: f64) -> f64 {
    64.0 * f64::EPSILON * (2.0 * a_norm * p_norm + q_norm + s_norm * p_norm * p_norm)
}

/// Stable-subspace extraction through the matrix sign function of the
/// Hamiltonian. Norm scaling accelerates the early phase; once the iteration
/// reaches its quadratic regime the scale factor is frozen at one so it
/// cannot disturb terminal convergence. The returned matrix is a close but
/// not fully converged solution; callers polish it with Newton steps.
fn sign_extract(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RiccatiError> {
    let n = a.nrows();
    let m = 2 * n;
    let mut z = DMatrix::<f64>::zeros(m, m);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-s));
    z.view_mut((n, 0), (n, n)).copy_from(&(-q));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    const MAX_STEPS: usize = 100;
    let mut rel_step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_STEPS {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or(RiccatiError::SingularHamiltonian)?;
        let scale = if rel_step < 1e-2 {
            1.0
        } else {
            (inv.norm() / z.norm()).sqrt()
        };
        let next = 0.5 * (&z * scale + &inv / scale);
        let step = (&next - &z).norm();
        let prev_rel = rel_step;
        rel_step = step / next.norm().max(f64::MIN_POSITIVE);
        z = next;
        if rel_step <= 1e-13 || (rel_step <= 1e-8 && rel_step >= prev_rel) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(RiccatiError::SignIterationStalled(MAX_STEPS));
    }

    // The stabilizing solution's graph spans the eigenspace of the sign
    // matrix at -1, so (W + I) annihilates [I; P]. Both block rows of that
    // identity are stacked into one over-determined least-squares solve.
    let eye = DMatrix::<f64>::identity(n, n);
    let mut stacked = DMatrix::<f64>::zeros(m, n);
    stacked
        .view_mut((0, 0), (n, n))
        .copy_from(&z.view((0, n), (n, n)).clone_owned());
    stacked
        .view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)).clone_owned() + &eye));
    let mut rhs = DMatrix::<f64>::zeros(m, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)).clone_owned() + &eye)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-z.view((n, 0), (n, n)).clone_owned()));
    let svd = stacked.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let p = svd
        .solve(&rhs, cutoff)
        .map_err(|_| RiccatiError::SingularHamiltonian)?;
    Ok(symmetrize(&p))
}

/// Newton iteration on the Riccati residual from a stabilizing start; each
/// step is one Lyapunov solve against the current closed loop. Quadratic
/// near the solution, so a warm start close to the answer costs one or two
/// steps only.
fn newton_polish(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    start: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RiccatiError> {
    const MAX_STEPS: usize = 40;
    let a_norm = a.norm();
    let s_norm = s.norm();
    let q_norm = q.norm();
    let plateau_tol =
        |p_norm: f64| (1e-9 * p_norm.max(1.0)).max(residual_floor(a_norm, s_norm, q_norm, p_norm));
    let mut p = symmetrize(start);
    let mut best = p.clone();
    let mut best_norm = f64::INFINITY;
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_STEPS {
        let rnorm = are_residual(a, s, q, &p).norm();
        let p_norm = p.norm();
        if rnorm < best_norm {
            best_norm = rnorm;
            best = p.clone();
        }
        // Full precision, or the rounding floor: good enough and no longer
        // improving.
        if rnorm <= 1e-12 * p_norm.max(1.0) || (rnorm >= prev && rnorm <= plateau_tol(p_norm)) {
            return Ok(best);
        }
        prev = rnorm;
        let acl = a - &(s * &p);
        let w = symmetrize(&(q + &(&p * s * &p)));
        p = symmetrize(&lyap(&acl, &w)?);
    }
    if best_norm <= plateau_tol(best.norm()) {
        Ok(best)
    } else {
        Err(RiccatiError::NewtonStalled {
            residual: best_norm,
            iterations: MAX_STEPS,
        })
    }
}

fn check_symmetric(name: &str, m: DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let dev = (&m - &m.transpose()).norm();
    if dev > 1e-9 * m.norm().max(1.0) {
        return Err(RiccatiError::NotSymmetric(name.to_string()));
    }
    Ok(symmetrize(&m))
}

/// Reachable-subspace dimension of the pair `(A, B)`, computed by expanding
/// an orthonormal basis one direction at a time. Every accepted direction is
/// re-normalized before it is pushed through `A`, so the test is immune to
/// the norm growth that makes the raw power sequence `B, AB, A²B, …`
/// numerically useless at larger sizes.
pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    if n == 0 || b.nrows() != n {
        return 0;
    }
    let tol = 64.0 * n as f64 * f64::EPSILON;
    let mut basis = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0usize;
    let mut frontier: Vec<DVector<f64>> = b.column_iter().map(|c| c.clone_owned()).collect();
    while rank < n && !frontier.is_empty() {
        let mut next = Vec::new();
        for f0 in frontier {
            let pre = f0.norm();
            if pre == 0.0 || !pre.is_finite() {
                continue;
            }
            let mut f = f0;
            // Two Gram-Schmidt passes; one is not reliable once the new
            // direction is nearly inside the current span.
            for _ in 0..2 {
                for j in 0..rank {
                    let coeff = basis.column(j).dot(&f);
                    f.axpy(-coeff, &basis.column(j).clone_owned(), 1.0);
                }
            }
            if f.norm() > tol * pre {
                let unit = f.normalize();
                basis.set_column(rank, &unit);
                rank += 1;
                next.push(a * &unit);
                if rank == n {
                    break;
                }
            }
        }
        frontier = next;
    }
    rank
}

/// Observable-subspace dimension of `(A, C)`, by duality with reachability.
pub fn observability_rank(a: &DMatrix<f64>, c: &DMatrix<f64>) -> usize {
    controllability_rank(&a.transpose(), &c.transpose())
}

/// One structured perturbation direction of the drift matrix together with
/// the largest admissible magnitude of its scalar weight.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyDirection {
    pub direction: DMatrix<f64>,
    pub weight_bound: f64,
}

/// Drift uncertainty of the form `ΔA = Σ wⱼ·Dⱼ` with `|wⱼ| ≤ bound(j)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UncertaintyModel {
    pub directions: Vec<UncertaintyDirection>,
}

impl UncertaintyModel {
    pub fn validate(&self, n: usize) -> Result<(), RiccatiError> {
        for (index, d) in self.directions.iter().enumerate() {
            if d.direction.nrows() != n || d.direction.ncols() != n {
                return Err(RiccatiError::BadUncertainty(format!(
                    "direction {index} is {}x{}, expected {n}x{n}",
                    d.direction.nrows(),
                    d.direction.ncols()
                )));
            }
            if !d.direction.iter().all(|v| v.is_finite()) {
                return Err(RiccatiError::BadUncertainty(format!(
                    "direction {index} contains a non-finite entry"
                )));
            }
            if !(d.weight_bound.is_finite() && d.weight_bound >= 0.0) {
                return Err(RiccatiError::BadUncertainty(format!(
                    "direction {index} has invalid weight bound {}",
                    d.weight_bound
                )));
            }
        }
        Ok(())
    }

    /// Builds the realized perturbation `Σ wⱼ·Dⱼ`, rejecting weights outside
    /// their bounds.
    pub fn realize(&self, weights: &[f64]) -> Result<DMatrix<f64>, RiccatiError> {
        if weights.len() != self.directions.len() {
            return Err(RiccatiError::BadUncertainty(format!(
                "got {} weights for {} directions",
                weights.len(),
                self.directions.len()
            )));
        }
        let n = match self.directions.first() {
            Some(d) => d.direction.nrows(),
            None => {
                return Err(RiccatiError::BadUncertainty(
                    "cannot realize an empty model".to_string(),
                ))
            }
        };
        let mut delta = DMatrix::<f64>::zeros(n, n);
        for (index, (w, d)) in weights.iter().zip(&self.directions).enumerate() {
            let slack = 1e-9 * d.weight_bound.max(1.0);
            if w.abs() > d.weight_bound + slack {
                return Err(RiccatiError::WeightOutOfBounds {
                    index,
                    weight: *w,
                    bound: d.weight_bound,
                });
            }
            delta += *w * &d.direction;
        }
        Ok(delta)
    }
}

/// Majorant of the uncertain part of the Lyapunov derivative: for each
/// direction the symmetric matrix `DⱼᵀP + PDⱼ` is replaced by its absolute
/// value (eigenvalues made non-negative in the same eigenbasis) and scaled by
/// the weight bound. The sum dominates `ΔAᵀP + PΔA` for every admissible
/// realization.
pub fn build_majorant(p: &DMatrix<f64>, model: &UncertaintyModel) -> DMatrix<f64> {
    let n = p.nrows();
    let mut total = DMatrix::<f64>::zeros(n, n);
    for d in &model.directions {
        let g = d.direction.transpose() * p + p * &d.direction;
        let (values, vectors) = eig_sym(&g);
        let abs = DMatrix::from_diagonal(&values.map(f64::abs));
        total += d.weight_bound * (&vectors * abs * vectors.transpose());
    }
    symmetrize(&total)
}

/// A validated continuous-time LQ problem `(A, B, Q, R)`.
///
/// Construction checks shapes, finiteness, symmetry, `Q ⪰ 0`, `R ≻ 0`, and
/// controllability of `(A, B)`, and caches `B R⁻¹ Bᵀ` so repeated solves do
/// not refactor `R`.
#[derive(Debug, Clone)]
pub struct AreProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    s: DMatrix<f64>,
    r_inv_bt: DMatrix<f64>,
}

impl AreProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self, RiccatiError> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(RiccatiError::DimensionMismatch(format!(
                "drift matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(RiccatiError::DimensionMismatch(format!(
                "input matrix must be {n}xM with M ≥ 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let m = b.ncols();
        if q.nrows() != n || q.ncols() != n {
            return Err(RiccatiError::DimensionMismatch(format!(
                "state cost must be {n}x{n}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(RiccatiError::DimensionMismatch(format!(
                "input cost must be {m}x{m}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        for (name, matrix) in [
            ("drift matrix", &a),
            ("input matrix", &b),
            ("state cost", &q),
            ("input cost", &r),
        ] {
            if !matrix.iter().all(|v| v.is_finite()) {
                return Err(RiccatiError::NonFinite(name.to_string()));
            }
        }
        let q = check_symmetric("state cost", q)?;
        let r = check_symmetric("input cost", r)?;
        let (qvals, _) = eig_sym(&q);
        let qmin = qvals[0];
        if qmin < -1e-9 * qvals[n - 1].abs().max(1.0) {
            return Err(RiccatiError::NotPositiveSemidefinite(
                "state cost".to_string(),
                qmin,
            ));
        }
        let chol = Cholesky::new(r.clone())
            .ok_or_else(|| RiccatiError::NotPositiveDefinite("input cost".to_string()))?;
        let r_inv_bt = chol.solve(&b.transpose());
        let s = symmetrize(&(&b * &r_inv_bt));
        let rank = controllability_rank(&a, &b);
        if rank != n {
            return Err(RiccatiError::NotControllable { rank, n });
        }
        Ok(Self {
            a,
            b,
            q,
            r,
            s,
            r_inv_bt,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    /// Cached `B R⁻¹ Bᵀ`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Stabilizing solution of `AᵀP + PA + Q − P B R⁻¹ Bᵀ P = 0` with the gain
/// and diagnostics derived from it.
#[derive(Debug, Clone)]
pub struct AreSolution {
    pub p: DMatrix<f64>,
    /// State-feedback gain `K = R⁻¹BᵀP`; the closed loop is `A − BK`.
    pub gain: DMatrix<f64>,
    pub residual: f64,
    pub closed_loop_abscissa: f64,
}

/// Fixed point of the majorant-inflated Riccati equation, certifying the
/// quadratic cost bound `x₀ᵀPx₀` over the whole admissible uncertainty set.
#[derive(Debug, Clone)]
pub struct GuaranteedSolution {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Majorant evaluated at the returned solution.
    pub majorant: DMatrix<f64>,
    /// Frobenius norm of `AᵀP + PA + Q + U(P) − P B R⁻¹ Bᵀ P`.
    pub residual: f64,
    pub closed_loop_abscissa: f64,
    pub iterations: usize,
}

fn finalize(problem: &AreProblem, p: DMatrix<f64>) -> Result<AreSolution, RiccatiError> {
    let gain = &problem.r_inv_bt * &p;
    let closed = &problem.a - &problem.b * &gain;
    let abscissa = spectral_abscissa(&closed)?;
    if abscissa >= 0.0 {
        return Err(RiccatiError::NotStabilizing(abscissa));
    }
    let residual = are_residual(&problem.a, &problem.s, &problem.q, &p).norm();
    Ok(AreSolution {
        p,
        gain,
        residual,
        closed_loop_abscissa: abscissa,
    })
}

/// Stabilizing LQ solve: sign-function subspace extraction followed by
/// Newton refinement down to rounding level.
pub fn solve_are(problem: &AreProblem) -> Result<AreSolution, RiccatiError> {
    let p0 = sign_extract(&problem.a, &problem.s, &problem.q)?;
    let p = newton_polish(&problem.a, &problem.s, &problem.q, &p0)?;
    finalize(problem, p)
}

/// Like [`solve_are`] but refines from a caller-supplied starting point,
/// which pays off when the start is near the solution (one or two Newton
/// steps instead of a full sign iteration). Falls back to the cold solver
/// whenever the warm path fails or lands on a non-stabilizing root.
pub fn solve_are_from(
    problem: &AreProblem,
    guess: &DMatrix<f64>,
) -> Result<AreSolution, RiccatiError> {
    let n = problem.state_dim();
    if guess.nrows() != n || guess.ncols() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "starting point must be {n}x{n}, got {}x{}",
            guess.nrows(),
            guess.ncols()
        )));
    }
    let warm = newton_polish(&problem.a, &problem.s, &problem.q, guess)
        .and_then(|p| finalize(problem, p));
    match warm {
        Ok(solution) => Ok(solution),
        Err(_) => solve_are(problem),
    }
}

/// Scalar cost bound `x₀ᵀ P x₀` certified by a solution matrix `P`.
pub fn guaranteed_cost_bound(p: &DMatrix<f64>, x0: &DVector<f64>) -> f64 {
    (x0.transpose() * p * x0)[(0, 0)]
}

const GUARANTEED_MAX_ITERATIONS: usize = 200;
const GUARANTEED_REL_TOL: f64 = 1e-11;

/// Fixed point of `P ↦ Riccati(Q + U(P))`: each pass inflates the state cost
/// by the uncertainty majorant evaluated at the previous solution and
/// re-solves, warm-starting Newton from that solution. Convergence is judged
/// on the residual of the majorant-inflated equation itself, so the returned
/// diagnostics describe exactly the certificate the caller relies on.
/// Divergence of the iterates is reported as an error rather than looping
/// forever; it means the uncertainty set is too large for this plant/cost
/// combination to admit a guaranteed-cost certificate of this form.
pub fn solve_guaranteed(
    problem: &AreProblem,
    model: &UncertaintyModel,
) -> Result<GuaranteedSolution, RiccatiError> {
    model.validate(problem.state_dim())?;
    let base = solve_are(problem)?;
    let mut p = base.p;
    let growth_cap = 1e12 * p.norm().max(problem.q.norm()).max(1.0);
    let mut prev_residual = f64::INFINITY;
    for iteration in 1..=GUARANTEED_MAX_ITERATIONS {
        let majorant = build_majorant(&p, model);
        let q_eff = symmetrize(&(&problem.q + &majorant));
        let residual = are_residual(&problem.a, &problem.s, &q_eff, &p).norm();
        let p_norm = p.norm();
        let scale = p_norm.max(1.0);
        // Tight target, or the evaluation floor of badly scaled instances:
        // still inside the certificate tolerance but no longer improving.
        let floor = residual_floor(problem.a.norm(), problem.s.norm(), q_eff.norm(), p_norm);
        let settled = residual <= GUARANTEED_REL_TOL * scale
            || (residual >= 0.9 * prev_residual && residual <= (1e-8 * scale).max(floor));
        if settled {
            let gain = &problem.r_inv_bt * &p;
            let closed = &problem.a - &problem.b * &gain;
            let abscissa = spectral_abscissa(&closed)?;
            if abscissa >= 0.0 {
                return Err(RiccatiError::NotStabilizing(abscissa));
            }
            return Ok(GuaranteedSolution {
                p,
                gain,
                majorant,
                residual,
                closed_loop_abscissa: abscissa,
                iterations: iteration,
            });
        }
        prev_residual = residual;
        let p_next = match newton_polish(&problem.a, &problem.s, &q_eff, &p) {
            Ok(x) => x,
            Err(_) => {
                let p0 = sign_extract(&problem.a, &problem.s, &q_eff)?;
                newton_polish(&problem.a, &problem.s, &q_eff, &p0)?
            }
        };
        let norm = p_next.norm();
        if !norm.is_finite() || norm > growth_cap {
            return Err(RiccatiError::GuaranteedDiverged { iteration, norm });
        }
        p = p_next;
    }
    Err(RiccatiError::GuaranteedStalled {
        max_iterations: GUARANTEED_MAX_ITERATIONS,
        last_residual: prev_residual,
    })
}
