//! Least angle regression with the lasso modification.
//!
//! Computes the piecewise-linear solution path of
//!
//! ```text
//!   min_b ||y - X b||^2 + lambda ||b||_1
//! ```
//!
//! as `lambda` decreases from the first activation value down to zero. With
//! this convention the stationarity conditions at any `lambda` read
//! `x_j' (y - X b) = (lambda / 2) sign(b_j)` on the active set and
//! `|x_j' (y - X b)| <= lambda / 2` off it, so the path is traced by keeping
//! the active correlations tied while they shrink. Columns are expected to
//! be on comparable scales (the sparse pipeline normalizes them to unit
//! Euclidean norm first).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot floor for the active-set Gram factorization; at or below this the
/// active columns are declared collinear.
const COLLINEAR_TOL: f64 = 1e-12;

/// What happened at a knot as `lambda` decreases through it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LarsAction {
    /// The variable becomes active at this knot.
    Enter(usize),
    /// The variable's coefficient hit zero and leaves the active set.
    Drop(usize),
    /// The path reached `lambda = 0`.
    Complete,
}

/// One knot of the solution path.
#[derive(Clone, Debug)]
pub struct LarsKnot {
    pub lambda: f64,
    /// Coefficients at this knot (exact zeros off the active set).
    pub beta: DVector<f64>,
    pub action: LarsAction,
}

/// Ordered solution path, `lambda` strictly decreasing.
#[derive(Clone, Debug)]
pub struct LarsPath {
    pub knots: Vec<LarsKnot>,
}

impl LarsPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

fn argmax_abs(v: &DVector<f64>) -> usize {
    let mut best = 0;
    let mut best_val = v[0].abs();
    for i in 1..v.len() {
        let a = v[i].abs();
        if a > best_val {
            best = i;
            best_val = a;
        }
    }
    best
}

/// Cholesky of the active-set Gram matrix; failure means two active columns
/// are (numerically) collinear.
fn gram_cholesky(x: &DMatrix<f64>, active: &[usize]) -> Result<DMatrix<f64>> {
    let k = active.len();
    let mut l = DMatrix::zeros(k, k);
    for (a, &ja) in active.iter().enumerate() {
        for (b, &jb) in active.iter().enumerate().take(a + 1) {
            let mut g = x.column(ja).dot(&x.column(jb));
            for t in 0..b {
                g -= l[(a, t)] * l[(b, t)];
            }
            if a == b {
                if !(g > COLLINEAR_TOL) {
                    return Err(Error::DegenerateDesign(format!(
                        "active columns are collinear (Gram pivot {g:.3e} at column {ja})"
                    )));
                }
                l[(a, a)] = g.sqrt();
            } else {
                l[(a, b)] = g / l[(b, b)];
            }
        }
    }
    Ok(l)
}

/// Lasso-variant LARS path for an already-scaled design.
///
/// `max_steps` bounds the number of path segments traced, which also bounds
/// the active-set size; the path may additionally end early at
/// `lambda = 0`.
pub fn lars_path(y: &DVector<f64>, x: &DMatrix<f64>, max_steps: usize) -> Result<LarsPath> {
    let n = x.nrows();
    let d = x.ncols();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "y has {} rows but X has {n}",
            y.len()
        )));
    }
    if d == 0 {
        return Err(Error::Domain("design has no columns".into()));
    }
    if max_steps == 0 {
        return Err(Error::Domain("max_steps must be positive".into()));
    }

    let mut beta: DVector<f64> = DVector::zeros(d);
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; d];
    let mut signs = vec![0.0f64; d];
    let mut knots: Vec<LarsKnot> = Vec::new();

    // correlations at beta = 0
    let mut corr = x.transpose() * y;
    let j0 = argmax_abs(&corr);
    let mut big_c = corr[j0].abs();
    let c_scale = big_c.max(f64::MIN_POSITIVE);
    let tiny = 1e-12 * c_scale;

    if big_c <= f64::MIN_POSITIVE {
        // response orthogonal to every column: the null solution is the path
        knots.push(LarsKnot {
            lambda: 0.0,
            beta,
            action: LarsAction::Complete,
        });
        return Ok(LarsPath { knots });
    }

    knots.push(LarsKnot {
        lambda: 2.0 * big_c,
        beta: beta.clone(),
        action: LarsAction::Enter(j0),
    });
    active.push(j0);
    is_active[j0] = true;
    signs[j0] = corr[j0].signum();

    for _segment in 0..max_steps {
        // direction keeping the active correlations tied: G_A w = s_A
        let l = gram_cholesky(x, &active)?;
        let s_vec = DVector::from_iterator(active.len(), active.iter().map(|&j| signs[j]));
        let half = l
            .solve_lower_triangular(&s_vec)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let w = l
            .tr_solve_lower_triangular(&half)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;

        // fitted-value velocity and its correlation with every column
        let mut velocity = DVector::zeros(n);
        for (idx, &j) in active.iter().enumerate() {
            velocity += x.column(j) * w[idx];
        }
        let a = x.transpose() * &velocity;

        // next event as the tied correlation level decreases by gamma
        let mut gamma = big_c; // default: run down to lambda = 0
        let mut event: Option<LarsAction> = None;
        for j in 0..d {
            if is_active[j] {
                continue;
            }
            for (num, den) in [(big_c - corr[j], 1.0 - a[j]), (big_c + corr[j], 1.0 + a[j])] {
                if den > tiny {
                    let g = num / den;
                    if g > tiny && g < gamma {
                        gamma = g;
                        event = Some(LarsAction::Enter(j));
                    }
                }
            }
        }
        for (idx, &j) in active.iter().enumerate() {
            if w[idx] != 0.0 {
                let g = -beta[j] / w[idx];
                if g > tiny && g < gamma {
                    gamma = g;
                    event = Some(LarsAction::Drop(j));
                }
            }
        }

        // advance to the event
        for (idx, &j) in active.iter().enumerate() {
            beta[j] += gamma * w[idx];
        }
        // refresh correlations from the residual to stop drift
        let residual = y - x * &beta;
        corr = x.transpose() * &residual;
        big_c -= gamma;

        match event {
            None => {
                knots.push(LarsKnot {
                    lambda: 0.0,
                    beta: beta.clone(),
                    action: LarsAction::Complete,
                });
                return Ok(LarsPath { knots });
            }
            Some(LarsAction::Enter(j)) => {
                knots.push(LarsKnot {
                    lambda: 2.0 * big_c,
                    beta: beta.clone(),
                    action: LarsAction::Enter(j),
                });
                active.push(j);
                is_active[j] = true;
                signs[j] = corr[j].signum();
            }
            Some(LarsAction::Drop(j)) => {
                beta[j] = 0.0;
                let pos = active.iter().position(|&k| k == j).expect("active");
                active.remove(pos);
                is_active[j] = false;
                signs[j] = 0.0;
                knots.push(LarsKnot {
                    lambda: 2.0 * big_c,
                    beta: beta.clone(),
                    action: LarsAction::Drop(j),
                });
            }
            Some(LarsAction::Complete) => unreachable!(),
        }

        if big_c <= tiny {
            break;
        }
    }

    Ok(LarsPath { knots })
}
