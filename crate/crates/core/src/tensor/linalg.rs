//! Small dense linear algebra on [`Tensor`] used by the game solvers.
//! Sizes stay at desk scale (joint state 3M, stacked controls 2M), so plain
//! LU and Jacobi sweeps are sufficient and fully deterministic.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Solve `A X = B` by LU with partial pivoting. `A` is `[n,n]`, `B` is
/// `[n,m]` or `[n]`. Rejects singular systems with a pivot-ratio diagnostic.
pub fn lu_solve<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape().len() != 2 || a.shape()[0] != a.shape()[1] {
        return Err(Error::ShapeMismatch {
            op: "lu_solve",
            detail: format!("A must be square, got {:?}", a.shape()),
        });
    }
    let n = a.shape()[0];
    let (rhs_cols, vector_rhs) = match b.shape().len() {
        1 => (1, true),
        2 => (b.shape()[1], false),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "lu_solve",
                detail: format!("B must be rank 1 or 2, got {:?}", b.shape()),
            })
        }
    };
    if b.shape()[0] != n {
        return Err(Error::ShapeMismatch {
            op: "lu_solve",
            detail: format!("A is {n}x{n} but B has {} rows", b.shape()[0]),
        });
    }

    let mut lu = a.data().to_vec();
    let mut x = b.data().to_vec();
    let mut max_pivot = S::zero();
    let mut min_pivot = S::infinity();

    for col in 0..n {
        // partial pivot
        let mut pivot_row = col;
        let mut best = lu[col * n + col].abs();
        for r in (col + 1)..n {
            let v = lu[r * n + col].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if best == S::zero() || !best.is_finite() {
            return Err(Error::SingularSystem {
                detail: format!("zero pivot at column {col} (pivot ratio so far {})", ratio(max_pivot, min_pivot)),
            });
        }
        if pivot_row != col {
            for j in 0..n {
                lu.swap(col * n + j, pivot_row * n + j);
            }
            for j in 0..rhs_cols {
                x.swap(col * rhs_cols + j, pivot_row * rhs_cols + j);
            }
        }
        let p = lu[col * n + col];
        max_pivot = max_pivot.max(p.abs());
        min_pivot = min_pivot.min(p.abs());

        for r in (col + 1)..n {
            let f = lu[r * n + col] / p;
            if f == S::zero() {
                continue;
            }
            lu[r * n + col] = f;
            for j in (col + 1)..n {
                lu[r * n + j] = lu[r * n + j] - f * lu[col * n + j];
            }
            for j in 0..rhs_cols {
                x[r * rhs_cols + j] = x[r * rhs_cols + j] - f * x[col * rhs_cols + j];
            }
        }
    }

    let cond = ratio(max_pivot, min_pivot);
    if cond > S::c(1e14) {
        return Err(Error::SingularSystem {
            detail: format!("ill-conditioned system, pivot ratio {cond}"),
        });
    }

    // back substitution
    for col in (0..n).rev() {
        let p = lu[col * n + col];
        for j in 0..rhs_cols {
            let mut acc = x[col * rhs_cols + j];
            for k in (col + 1)..n {
                acc = acc - lu[col * n + k] * x[k * rhs_cols + j];
            }
            x[col * rhs_cols + j] = acc / p;
        }
    }

    let shape = if vector_rhs { vec![n] } else { vec![n, rhs_cols] };
    Tensor::from_vec(shape, x)
}

fn ratio<S: Scalar>(max: S, min: S) -> S {
    if min > S::zero() {
        max / min
    } else {
        S::infinity()
    }
}

/// Eigenvalues of a symmetric 2x2 `[[a, b], [b, c]]`, ascending.
pub fn sym_eig_2x2<S: Scalar>(a: S, b: S, c: S) -> (S, S) {
    let half = S::c(0.5);
    let mean = (a + c) * half;
    let diff = (a - c) * half;
    let disc = (diff * diff + b * b).sqrt();
    (mean - disc, mean + disc)
}

/// Clamp the eigenvalues of a symmetric 2x2 matrix to at least `floor`,
/// returning the reassembled matrix as `(a, b, c)` for `[[a, b], [b, c]]`.
pub fn clamp_sym_2x2<S: Scalar>(a: S, b: S, c: S, floor: S) -> (S, S, S) {
    let (l1, l2) = sym_eig_2x2(a, b, c);
    if l1 >= floor && l2 >= floor {
        return (a, b, c);
    }
    // eigenvector for l2 (the larger eigenvalue)
    let (vx, vy) = if b.abs() > S::c(1e-300) {
        (l2 - c, b)
    } else if a >= c {
        (S::one(), S::zero())
    } else {
        (S::zero(), S::one())
    };
    let norm = (vx * vx + vy * vy).sqrt();
    let (vx, vy) = if norm > S::zero() { (vx / norm, vy / norm) } else { (S::one(), S::zero()) };
    let c1 = l1.max(floor);
    let c2 = l2.max(floor);
    // A = c2 v vT + c1 (I - v vT)
    let na = c2 * vx * vx + c1 * vy * vy;
    let nb = (c2 - c1) * vx * vy;
    let nc = c2 * vy * vy + c1 * vx * vx;
    (na, nb, nc)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
/// Used for positive-semidefiniteness checks in diagnostics and tests.
pub fn sym_eigenvalues<S: Scalar>(m: &Tensor<S>) -> Result<Vec<S>> {
    if m.shape().len() != 2 || m.shape()[0] != m.shape()[1] {
        return Err(Error::ShapeMismatch {
            op: "sym_eigenvalues",
            detail: format!("expected square matrix, got {:?}", m.shape()),
        });
    }
    let n = m.shape()[0];
    let mut a = m.data().to_vec();
    let tol = S::c(1e-14);
    for _sweep in 0..60 {
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i * n + j].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (S::c(2.0) * apq);
                let t = {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<S> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let n = 6;
            let mut a = Tensor::zeros(vec![n, n]);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                }
                // diagonal dominance keeps the test matrices well-posed
                let d = a.at(i, i);
                a.set(i, i, d + 4.0);
            }
            let x_true = Tensor::vector((0..n).map(|i| (i as f64) - 2.5).collect()).unwrap();
            let b = a.matvec(&x_true).unwrap();
            let x = lu_solve(&a, &b).unwrap();
            assert!(x.linf_distance(&x_true).unwrap() < 1e-10);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        let b = Tensor::vector(vec![1.0, 1.0]).unwrap();
        match lu_solve(&a, &b) {
            Err(Error::SingularSystem { detail }) => assert!(detail.contains("pivot")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn eig_2x2_matches_jacobi() {
        let (a, b, c) = (2.0f64, -1.0, 0.5);
        let (l1, l2) = sym_eig_2x2(a, b, c);
        let m = Tensor::from_vec(vec![2, 2], vec![a, b, b, c]).unwrap();
        let eigs = sym_eigenvalues(&m).unwrap();
        assert!((l1 - eigs[0]).abs() < 1e-12);
        assert!((l2 - eigs[1]).abs() < 1e-12);
    }

    #[test]
    fn clamp_lifts_negative_eigenvalue() {
        // indefinite: eigenvalues -1 and 3
        let (a, b, c) = (1.0f64, 2.0, 1.0);
        let (ca, cb, cc) = clamp_sym_2x2(a, b, c, 1e-6);
        let (l1, l2) = sym_eig_2x2(ca, cb, cc);
        assert!(l1 >= 1e-6 - 1e-12);
        assert!((l2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_keeps_psd_matrix_exact() {
        let (a, b, c) = (2.0f64, 0.3, 1.0);
        let (ca, cb, cc) = clamp_sym_2x2(a, b, c, 1e-6);
        assert_eq!((ca, cb, cc), (a, b, c));
    }

    #[test]
    fn jacobi_on_diagonal_matrix() {
        let m = Tensor::from_vec(vec![3, 3], vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0])
            .unwrap();
        let eigs = sym_eigenvalues(&m).unwrap();
        assert_eq!(eigs, vec![-1.0, 2.0, 3.0]);
    }
}
