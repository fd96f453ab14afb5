//! Non-negative least squares, `min ||A x - b||^2` subject to `x >= 0`.
//!
//! Lawson-Hanson active set on the normal equations `Q = A^T A`, `c = A^T b`,
//! seeded by a few projected-gradient steps. Working on `(Q, c)` lets callers
//! that reuse one design matrix cache its Gram matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_WARM_START_STEPS: usize = 0;

/// Solver settings. `max_iterations` counts columns added to the passive set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Projected-gradient steps taken from `x = 0` before the active-set phase.
    pub warm_start_steps: usize,
}

impl NnlsOptions {
    /// Defaults for a problem with `cols` unknowns.
    pub fn for_columns(cols: usize) -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 10 * cols,
            warm_start_steps: DEFAULT_WARM_START_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsProblem {
    design: DMatrix<f64>,
    target: DVector<f64>,
    tolerance: f64,
    max_iterations: usize,
}

impl NnlsProblem {
    /// Problem with the default tolerance and `10 * cols` iterations.
    pub fn new(design: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "NNLS design matrix",
                expected: 1,
                found: 0,
            });
        }
        if design.nrows() != target.len() {
            return Err(Error::DimensionMismatch {
                context: "NNLS target",
                expected: design.nrows(),
                found: target.len(),
            });
        }
        if design.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("NNLS problem"));
        }
        let max_iterations = 10 * design.ncols();
        Ok(Self {
            design,
            target,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        assert!(tolerance > 0.0, "tolerance must be positive");
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `||A x - b||^2`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (&self.design * x - &self.target).norm_squared()
    }

    pub fn normal_equations(&self) -> NormalEquations {
        NormalEquations {
            gram: self.design.tr_mul(&self.design),
            rhs: self.design.tr_mul(&self.target),
        }
    }
}

/// `Q = A^T A` and `c = A^T b`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl NormalEquations {
    pub fn new(gram: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch {
                context: "NNLS normal equations",
                expected: gram.nrows(),
                found: rhs.len(),
            });
        }
        if gram.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("NNLS normal equations"));
        }
        Ok(Self { gram, rhs })
    }

    /// Gradient of `1/2 ||A x - b||^2`, i.e. `Q x - c`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x - &self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnlsStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub status: NnlsStatus,
    /// Outer active-set iterations (columns added).
    pub iterations: usize,
}

pub fn nnls_solve(p: &NnlsProblem) -> Result<NnlsSolution> {
    let opts = NnlsOptions {
        tolerance: p.tolerance,
        max_iterations: p.max_iterations,
        ..NnlsOptions::for_columns(p.design.ncols())
    };
    nnls_solve_normal(&p.normal_equations(), &opts)
}

/// KKT conditions at relative tolerance `tol` (scaled by `||c||_inf`):
/// `|g_i| <= tol` where `x_i > 0`, and `g_i >= -tol` where `x_i = 0`.
pub fn kkt_satisfied(ne: &NormalEquations, x: &DVector<f64>, tol: f64) -> bool {
    if x.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return false;
    }
    let scale = ne.rhs.amax();
    let g = ne.gradient(x);
    x.iter().zip(g.iter()).all(|(&xi, &gi)| {
        if xi > 0.0 {
            gi.abs() <= tol * scale
        } else {
            gi >= -tol * scale
        }
    })
}

/// Least squares restricted to the passive columns, with one refinement step.
fn passive_solve(ne: &NormalEquations, passive: &[usize]) -> DVector<f64> {
    let k = passive.len();
    let q = DMatrix::from_fn(k, k, |i, j| ne.gram[(passive[i], passive[j])]);
    let c = DVector::from_fn(k, |i, _| ne.rhs[passive[i]]);
    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        match q.clone().cholesky() {
            Some(ch) => ch.solve(rhs),
            None => q
                .clone()
                .svd(true, true)
                .solve(rhs, f64::EPSILON * k as f64 * q.amax())
                .unwrap_or_else(|_| DVector::zeros(k)),
        }
    };
    let mut z = solve(&c);
    let r = &c - &q * &z;
    z += solve(&r);
    z
}

/// Scatters the passive solution into a full-length vector.
fn scatter(n: usize, passive: &[usize], z: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (&i, &v) in passive.iter().zip(z.iter()) {
        x[i] = v;
    }
    x
}

/// Lawson-Hanson inner loop: starting from feasible `x` supported on
/// `passive`, moves toward the passive least-squares solution while dropping
/// coordinates that hit zero. Returns the new feasible point.
fn feasible_step(ne: &NormalEquations, passive: &mut Vec<usize>, mut x: DVector<f64>) -> DVector<f64> {
    let n = x.len();
    loop {
        if passive.is_empty() {
            return DVector::zeros(n);
        }
        let z = passive_solve(ne, passive);
        if z.iter().all(|&v| v > 0.0) {
            return scatter(n, passive, &z);
        }
        // largest step keeping every passive coordinate non-negative
        let mut alpha = f64::INFINITY;
        let mut blocking = passive[0];
        for (&i, &zi) in passive.iter().zip(z.iter()) {
            if zi <= 0.0 {
                let a = x[i] / (x[i] - zi);
                if a < alpha {
                    alpha = a;
                    blocking = i;
                }
            }
        }
        let target = scatter(n, passive, &z);
        for &i in passive.iter() {
            x[i] += alpha * (target[i] - x[i]);
        }
        x[blocking] = 0.0;
        passive.retain(|&i| {
            if x[i] <= 0.0 {
                x[i] = 0.0;
                false
            } else {
                true
            }
        });
    }
}

/// Solves the NNLS problem given by its normal equations.
pub fn nnls_solve_normal(ne: &NormalEquations, opts: &NnlsOptions) -> Result<NnlsSolution> {
    let NnlsOptions {
        tolerance: tol,
        max_iterations,
        warm_start_steps,
    } = *opts;
    let n = ne.rhs.len();
    if ne.gram.nrows() != n || ne.gram.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "NNLS normal equations",
            expected: n,
            found: ne.gram.nrows(),
        });
    }
    if ne.gram.iter().chain(ne.rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("NNLS normal equations"));
    }
    let scale = ne.rhs.amax();
    let lipschitz = ne
        .gram
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if scale == 0.0 || lipschitz == 0.0 {
        return Ok(NnlsSolution {
            x: DVector::zeros(n),
            status: NnlsStatus::Converged,
            iterations: 0,
        });
    }
    let threshold = tol * scale;

    // projected-gradient warm start; the row-sum bound dominates the largest
    // eigenvalue of Q, so 1/lipschitz is a safe step
    let mut x = DVector::zeros(n);
    for _ in 0..warm_start_steps {
        let g = ne.gradient(&x);
        x.zip_apply(&g, |xi, gi| *xi = (*xi - gi / lipschitz).max(0.0));
    }
    let mut passive: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0).collect();
    x = feasible_step(ne, &mut passive, x);

    let mut excluded = vec![false; n];
    let mut iterations = 0;
    loop {
        let w = &ne.rhs - &ne.gram * &x;
        let mut in_passive = vec![false; n];
        passive.iter().for_each(|&i| in_passive[i] = true);
        let candidate = (0..n)
            .filter(|&i| !in_passive[i] && !excluded[i] && w[i] > threshold)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if w[b] >= w[i] => Some(b),
                _ => Some(i),
            });
        let Some(t) = candidate else {
            return Ok(NnlsSolution {
                x,
                status: NnlsStatus::Converged,
                iterations,
            });
        };
        if iterations >= max_iterations {
            return Ok(NnlsSolution {
                x,
                status: NnlsStatus::MaxIterations,
                iterations,
            });
        }
        iterations += 1;

        passive.push(t);
        passive.sort_unstable();
        let z = passive_solve(ne, &passive);
        let pos = passive.binary_search(&t).expect("t was just inserted");
        if !(z[pos] > 0.0) {
            // numerically dependent column; skip it until the passive set changes
            passive.remove(pos);
            excluded[t] = true;
            continue;
        }
        excluded.iter_mut().for_each(|e| *e = false);
        x = feasible_step(ne, &mut passive, x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("NNLS iterate"));
        }
    }
}
