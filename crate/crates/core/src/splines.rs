//! Uniform B-spline bases on extended knot vectors.
//!
//! Every KAN activation is a linear combination of the `G + p` B-splines of
//! degree `p` living on a uniform grid of `G` intervals. The knot vector
//! extends `p` uniform steps past each end of the interior interval, which
//! keeps the partition of unity exact on the interior. Inputs outside the
//! interior are evaluated by the natural polynomial extension of the boundary
//! pieces (no clamping), so gradients survive the occasional out-of-range
//! sample between grid refits.

use crate::error::{Error, Result};

/// Largest supported polynomial degree. Local basis values live in fixed
/// stack buffers of `MAX_DEGREE + 1` entries.
pub const MAX_DEGREE: usize = 7;

/// Uniform B-spline grid: degree, interior interval, and interval count.
///
/// The implied knot vector is `t_i = g_min + (i − p)·h` for
/// `i = 0..=G + 2p` with spacing `h = (g_max − g_min)/G`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineGrid {
    degree: usize,
    g_min: f64,
    g_max: f64,
    num_intervals: usize,
}

/// Basis values (and optionally derivatives) of the `degree + 1` B-splines
/// that are nonzero on one knot span. Entry `r` corresponds to basis index
/// `span − degree + r`.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    /// Interior knot-span index, in `degree ..= degree + G − 1`.
    pub span: usize,
    /// `B_{span−p+r, p}(x)` for `r = 0..=degree`; trailing entries unused.
    pub values: [f64; MAX_DEGREE + 1],
    /// `dB_{span−p+r, p}/dx`; only filled when requested, else zeros.
    pub derivs: [f64; MAX_DEGREE + 1],
}

impl SplineGrid {
    /// Creates a grid of `num_intervals` uniform spans of degree `degree`
    /// splines over `interval`.
    pub fn new(degree: usize, interval: (f64, f64), num_intervals: usize) -> Result<Self> {
        let (g_min, g_max) = interval;
        if !(g_min.is_finite() && g_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "interval bounds must be finite, got ({g_min}, {g_max})"
            )));
        }
        if g_min >= g_max {
            return Err(Error::InvalidGrid(format!(
                "interval must satisfy g_min < g_max, got ({g_min}, {g_max})"
            )));
        }
        if num_intervals == 0 {
            return Err(Error::InvalidGrid("num_intervals must be >= 1".into()));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidGrid(format!(
                "degree {degree} exceeds supported maximum {MAX_DEGREE}"
            )));
        }
        Ok(SplineGrid {
            degree,
            g_min,
            g_max,
            num_intervals,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Interior interval `(g_min, g_max)`.
    pub fn interval(&self) -> (f64, f64) {
        (self.g_min, self.g_max)
    }

    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    /// Number of basis functions, `G + p`.
    pub fn basis_count(&self) -> usize {
        self.num_intervals + self.degree
    }

    /// Uniform knot spacing `h`.
    pub fn spacing(&self) -> f64 {
        (self.g_max - self.g_min) / self.num_intervals as f64
    }

    /// Knot `t_i = g_min + (i − p)·h` for `i = 0..=G + 2p`.
    pub fn knot(&self, i: usize) -> f64 {
        self.g_min + (i as f64 - self.degree as f64) * self.spacing()
    }

    /// Interior span containing `x`, clamped to `p ..= p + G − 1`. Out-of-range
    /// `x` lands on the nearest boundary span, whose polynomial piece then
    /// extends naturally.
    fn span_of(&self, x: f64) -> usize {
        let raw = ((x - self.g_min) / self.spacing()).floor();
        let lo = self.degree as f64;
        let hi = (self.degree + self.num_intervals - 1) as f64;
        (raw + self.degree as f64).clamp(lo, hi) as usize
    }

    /// Evaluates the `p + 1` basis functions nonzero on the span containing
    /// `x`, via the Cox–de Boor recurrence, optionally with derivatives.
    pub fn local_basis(&self, x: f64, with_derivs: bool) -> LocalBasis {
        let p = self.degree;
        let span = self.span_of(x);
        let mut values = [0.0; MAX_DEGREE + 1];
        let mut derivs = [0.0; MAX_DEGREE + 1];
        let mut lower = [0.0; MAX_DEGREE + 1];
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];

        values[0] = 1.0;
        for d in 1..=p {
            if d == p {
                // Entering the last round, `values` holds the degree p−1
                // basis: B_{span−(p−1)+q, p−1}(x) at slot q. Keep a copy for
                // the derivative formula below.
                lower = values;
            }
            left[d] = x - self.knot(span + 1 - d);
            right[d] = self.knot(span + d) - x;
            let mut saved = 0.0;
            for r in 0..d {
                let denom = right[r + 1] + left[d - r];
                let temp = values[r] / denom;
                values[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            values[d] = saved;
        }

        if with_derivs && p >= 1 {
            // dB_{i,p} = p·(B_{i,p−1}/(t_{i+p}−t_i) − B_{i+1,p−1}/(t_{i+p+1}−t_{i+1}))
            for r in 0..=p {
                let i = span - p + r;
                let a = if r >= 1 {
                    lower[r - 1] / (self.knot(i + p) - self.knot(i))
                } else {
                    0.0
                };
                let b = if r <= p - 1 {
                    lower[r] / (self.knot(i + p + 1) - self.knot(i + 1))
                } else {
                    0.0
                };
                derivs[r] = p as f64 * (a - b);
            }
        }

        LocalBasis {
            span,
            values,
            derivs,
        }
    }

    /// All `basis_count` basis values at `x` (dense vector).
    pub fn basis_eval(&self, x: f64) -> Vec<f64> {
        let local = self.local_basis(x, false);
        let mut out = vec![0.0; self.basis_count()];
        for r in 0..=self.degree {
            out[local.span - self.degree + r] = local.values[r];
        }
        out
    }

    /// All `basis_count` basis derivatives at `x` (dense vector).
    pub fn basis_deriv(&self, x: f64) -> Vec<f64> {
        let local = self.local_basis(x, true);
        let mut out = vec![0.0; self.basis_count()];
        for r in 0..=self.degree {
            out[local.span - self.degree + r] = local.derivs[r];
        }
        out
    }

    /// Spline value `Σ cᵢ·Bᵢ(x)` without materializing the dense basis.
    pub fn spline_value(&self, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.basis_count());
        let local = self.local_basis(x, false);
        let base = local.span - self.degree;
        (0..=self.degree)
            .map(|r| coeffs[base + r] * local.values[r])
            .sum()
    }
}

/// Least-squares refit of spline coefficients onto a new interval derived
/// from `samples`, with the default margin δ = max(1% of sample range, 0.01).
///
/// The represented function (including its polynomial extension past the old
/// boundary) is preserved in the least-squares sense; degree and interval
/// count are unchanged.
pub fn grid_refit(grid: &SplineGrid, coeffs: &[f64], samples: &[f64]) -> Result<(SplineGrid, Vec<f64>)> {
    let sets = [coeffs.to_vec()];
    let (new_grid, mut refit) = grid_refit_batch(grid, &sets, samples, None)?;
    Ok((new_grid, refit.pop().expect("one coefficient set in, one out")))
}

/// [`grid_refit`] with an explicit margin δ instead of the default rule.
pub fn grid_refit_with_margin(
    grid: &SplineGrid,
    coeffs: &[f64],
    samples: &[f64],
    margin: f64,
) -> Result<(SplineGrid, Vec<f64>)> {
    let sets = [coeffs.to_vec()];
    let (new_grid, mut refit) = grid_refit_batch(grid, &sets, samples, Some(margin))?;
    Ok((new_grid, refit.pop().expect("one coefficient set in, one out")))
}

/// Refits many coefficient sets sharing one grid (all edges of a KAN layer)
/// in a single pass: the new interval and the probe Gram matrix are computed
/// once, then each set is solved against its own right-hand side.
pub fn grid_refit_batch(
    grid: &SplineGrid,
    coeff_sets: &[Vec<f64>],
    samples: &[f64],
    margin: Option<f64>,
) -> Result<(SplineGrid, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "grid_refit requires at least one sample".into(),
        ));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::non_finite("grid_refit samples"));
    }
    let nb = grid.basis_count();
    for set in coeff_sets {
        if set.len() != nb {
            return Err(Error::dim("grid_refit coefficients", nb, set.len()));
        }
    }

    let (smin, smax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let delta = match margin {
        Some(m) => {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "refit margin must be finite and >= 0, got {m}"
                )));
            }
            m
        }
        None => (0.01 * (smax - smin)).max(0.01),
    };
    let new_grid = SplineGrid::new(grid.degree(), (smin - delta, smax + delta), grid.num_intervals())?;

    // Dense probes over the OLD interior — the refit must preserve the
    // function where it was defined; extension regions follow from the
    // smoothness of the fit.
    let n_probe = 256.max(8 * nb);
    let (lo, hi) = grid.interval();
    let step = (hi - lo) / (n_probe - 1) as f64;
    let probes: Vec<f64> = (0..n_probe).map(|t| lo + t as f64 * step).collect();

    // Normal equations G = AᵀA with A[t][i] = B_i(probe_t) on the new grid.
    let rows: Vec<Vec<f64>> = probes.iter().map(|&x| new_grid.basis_eval(x)).collect();
    let mut gram = vec![vec![0.0; nb]; nb];
    for row in &rows {
        for i in 0..nb {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..nb {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    // Extreme widenings can push a basis function's support entirely off the
    // probe range; a small ridge keeps the system solvable (the orphaned
    // coefficients collapse toward zero) without disturbing well-posed fits.
    let chol = match cholesky_factor(gram.clone()) {
        Some(c) => c,
        None => {
            let scale = (0..nb).map(|i| gram[i][i]).fold(0.0f64, f64::max).max(1.0);
            for (i, row) in gram.iter_mut().enumerate() {
                row[i] += 1e-9 * scale;
            }
            cholesky_factor(gram).ok_or(Error::SingularSystem {
                context: "grid_refit normal equations".into(),
            })?
        }
    };

    let refit = coeff_sets
        .iter()
        .map(|set| {
            let mut rhs = vec![0.0; nb];
            for (row, &x) in rows.iter().zip(&probes) {
                let y = grid.spline_value(set, x);
                for i in 0..nb {
                    rhs[i] += row[i] * y;
                }
            }
            cholesky_solve(&chol, &rhs)
        })
        .collect();
    Ok((new_grid, refit))
}

/// In-place Cholesky factorization of a symmetric positive-definite matrix;
/// returns the lower factor, or `None` if a pivot collapses.
fn cholesky_factor(mut g: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = g.len();
    for j in 0..n {
        let mut d = g[j][j];
        for k in 0..j {
            d -= g[j][k] * g[j][k];
        }
        if d <= 1e-12 {
            return None;
        }
        let ljj = d.sqrt();
        g[j][j] = ljj;
        for i in (j + 1)..n {
            let mut s = g[i][j];
            for k in 0..j {
                s -= g[i][k] * g[j][k];
            }
            g[i][j] = s / ljj;
        }
    }
    Some(g)
}

/// Solves `L·Lᵀ·x = b` given the lower Cholesky factor.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}
