//! Spectral-radius estimation, ridge regression and correlation.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::numerics::rng::{child_seed, SeededRng};

// Restart vectors are drawn from fixed internal seeds so the estimate is a
// pure function of the matrix.
const RESTART_SEED: u64 = 0x005E_ED0F_5BEC_78A1;
const N_RESTARTS: u64 = 3;

/// Estimate the spectral radius (largest eigenvalue modulus) of a square
/// matrix.
///
/// Uses power iteration on a two-dimensional subspace with 3 random
/// restarts; the 2-d Rayleigh-Ritz step makes the iteration converge for
/// complex-conjugate dominant pairs, which real nonsymmetric random
/// matrices usually have. Returns the largest converged estimate.
///
/// `tol` is the relative tolerance on the estimate between iterations;
/// non-convergence within `max_iter` yields [`Error::Convergence`] carrying
/// the best estimate seen.
pub fn spectral_radius_estimate(m: &Array2<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::Dimension(format!(
            "spectral radius needs a square matrix, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    if rows == 1 {
        return Ok(m[[0, 0]].abs());
    }

    let n = rows;
    let mut best_overall = 0.0_f64;
    let mut best_converged: Option<f64> = None;

    for restart in 0..N_RESTARTS {
        let mut rng = SeededRng::new(child_seed(RESTART_SEED, restart));
        let mut q1 = random_unit_vector(n, &mut rng);
        let mut q2 = orthogonal_complement(&q1, &random_unit_vector(n, &mut rng), &mut rng);

        let mut rho = f64::NAN;
        let mut converged = false;

        for _ in 0..max_iter {
            let z1 = m.dot(&q1);
            let z2 = m.dot(&q2);

            // Rayleigh-Ritz on span{q1, q2}: B = Q^T A Q is 2x2 and its
            // eigenvalue moduli come from the quadratic formula.
            let b = [[q1.dot(&z1), q1.dot(&z2)], [q2.dot(&z1), q2.dot(&z2)]];
            let next = max_eigenvalue_modulus_2x2(&b);

            let z1_norm = norm(&z1);
            if z1_norm < 1e-300 && norm(&z2) < 1e-300 {
                // The iterate died out: nilpotent directions only.
                rho = 0.0;
                converged = true;
                break;
            }

            let scale = next.abs().max(f64::EPSILON);
            if !rho.is_nan() && (next - rho).abs() <= tol * scale {
                rho = next;
                converged = true;
                break;
            }
            if let Some(reference) = best_converged {
                // Another restart already converged; stop as soon as this
                // one agrees with it.
                if (next - reference).abs() <= tol * reference.abs().max(f64::EPSILON) {
                    rho = next;
                    converged = true;
                    break;
                }
            }
            rho = next;

            q1 = &z1 / z1_norm.max(1e-300);
            q2 = orthogonal_complement(&q1, &z2, &mut rng);
        }

        if rho.is_nan() {
            continue;
        }
        best_overall = best_overall.max(rho);
        if converged {
            best_converged = Some(best_converged.map_or(rho, |r: f64| r.max(rho)));
        }
    }

    match best_converged {
        Some(rho) => Ok(rho),
        None => Err(Error::Convergence {
            best_estimate: best_overall,
            iterations: max_iter,
        }),
    }
}

fn random_unit_vector(n: usize, rng: &mut SeededRng) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..n).map(|_| rng.uniform(-1.0, 1.0)));
        let nv = norm(&v);
        if nv > 1e-12 {
            return &v / nv;
        }
    }
}

/// Normalized component of `v` orthogonal to the unit vector `q`. Falls back
/// to fresh random directions when `v` is (numerically) parallel to `q`.
fn orthogonal_complement(q: &Array1<f64>, v: &Array1<f64>, rng: &mut SeededRng) -> Array1<f64> {
    let mut w = v - &(q * q.dot(v));
    let mut nw = norm(&w);
    while nw < 1e-12 {
        let fresh = random_unit_vector(q.len(), rng);
        w = &fresh - &(q * q.dot(&fresh));
        nw = norm(&w);
    }
    &w / nw
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Largest eigenvalue modulus of a 2x2 matrix, handling the complex pair
/// case (negative discriminant) where the modulus is sqrt(det).
fn max_eigenvalue_modulus_2x2(b: &[[f64; 2]; 2]) -> f64 {
    let tr = b[0][0] + b[1][1];
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        (tr / 2.0 + root).abs().max((tr / 2.0 - root).abs())
    } else {
        det.sqrt()
    }
}

/// Solve ridge regression `min ||X w^T - Y||^2 + lambda ||w||^2` and return
/// the readout weights with shape `outputs x features`.
///
/// `features` is `T x F` (one row per sample), `targets` is `T x Y`. The
/// solution is obtained from the normal equations `(X^T X + lambda I) w = X^T Y`
/// with a Cholesky solve, which is adequate at the feature counts used here
/// (F up to a few hundred). A singular system with `lambda == 0` reports
/// [`Error::Singular`].
pub fn ridge_solve(
    features: &Array2<f64>,
    targets: &Array2<f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    let (t, f) = features.dim();
    let (t2, y) = targets.dim();
    if t != t2 {
        return Err(Error::Dimension(format!(
            "features have {t} rows but targets have {t2}"
        )));
    }
    if t == 0 || f == 0 || y == 0 {
        return Err(Error::InvalidArgument("empty regression system".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    if t < f {
        log::warn!("ridge_solve: {t} samples for {f} features; system is underdetermined");
    }

    let mut gram = features.t().dot(features);
    for i in 0..f {
        gram[[i, i]] += lambda;
    }
    let rhs = features.t().dot(targets);

    let solution = cholesky_solve(&mut gram, &rhs).map_err(|_| {
        Error::Singular(format!(
            "normal equations are not positive definite (lambda = {lambda:e})"
        ))
    })?;

    let w_out = solution.t().to_owned();
    if w_out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(
            "solution contains non-finite entries".into(),
        ));
    }
    Ok(w_out)
}

/// In-place Cholesky factorization of `a` (symmetric positive definite)
/// followed by forward/back substitution for every column of `b`. Returns
/// the `F x Y` solution. Fails on a non-positive pivot.
fn cholesky_solve(a: &mut Array2<f64>, b: &Array2<f64>) -> std::result::Result<Array2<f64>, ()> {
    let n = a.nrows();
    // Lower factor stored in the lower triangle of `a`.
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= a[[j, k]] * a[[j, k]];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(());
        }
        let diag = diag.sqrt();
        a[[j, j]] = diag;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / diag;
        }
    }

    let cols = b.ncols();
    let mut x = b.to_owned();
    for c in 0..cols {
        // L z = b
        for i in 0..n {
            let mut v = x[[i, c]];
            for k in 0..i {
                v -= a[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = v / a[[i, i]];
        }
        // L^T w = z
        for i in (0..n).rev() {
            let mut v = x[[i, c]];
            for k in (i + 1)..n {
                v -= a[[k, i]] * x[[k, c]];
            }
            x[[i, c]] = v / a[[i, i]];
        }
    }
    Ok(x)
}

/// Squared Pearson correlation `cov(a,b)^2 / (var(a) var(b))`, in `[0, 1]`.
///
/// Inputs must have equal length >= 2; zero variance in either input is a
/// [`Error::DegenerateInput`] (the memory-capacity caller maps it to 0).
pub fn squared_correlation(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "correlation inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 2 samples".into(),
        ));
    }
    let n = a.len() as f64;
    let mean_a = a.sum() / n;
    let mean_b = b.sum() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateInput(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((cov * cov / (var_a * var_b)).clamp(0.0, 1.0))
}
