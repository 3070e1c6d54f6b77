//! Dense two-phase simplex for the small linear programs behind radial and
//! support queries on polytopes.
//!
//! Problems here have a handful of equality rows and at most a few thousand
//! columns, so a full tableau is the right tool: no factorization machinery,
//! and determinism (fixed pivot order, ties to the lowest index) comes for
//! free. Bland's rule kicks in after a stall to rule out cycling.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

/// Equality-form linear program: maximize `objective · x` subject to
/// `constraints · x = rhs`, with `x_j >= 0` unless `free[j]`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub free: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value at the returned point (0 unless `Optimal`).
    pub objective: f64,
    /// Primal point in the original variables (zeros unless `Optimal`).
    pub x: DVector<f64>,
    /// Relative feasibility residual ‖Ax − b‖∞ / (1 + ‖b‖∞).
    pub residual: f64,
    pub pivots: usize,
}

struct Tableau {
    /// Row-major, `width = ncols + 1`; the last entry of each row is the rhs.
    data: Vec<f64>,
    rows: usize,
    width: usize,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    bland: bool,
    stall: usize,
    limit: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] *= inv;
        }
        self.data[r * w + c] = 1.0; // kill roundoff on the pivot itself
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= f * self.data[r * w + j];
                }
                self.data[i * w + c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for j in 0..w {
                self.cost[j] -= f * self.data[r * w + j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs the simplex loop on the current cost row, pricing only columns in
    /// `0..ncols_active`. Returns `false` when the entering column is
    /// unbounded below in the ratio test.
    fn run(&mut self, ncols_active: usize) -> Result<bool> {
        let w = self.width;
        loop {
            if self.pivots >= self.limit {
                return Err(Error::IterationLimit(format!(
                    "simplex exceeded {} pivots",
                    self.limit
                )));
            }
            // entering column
            let mut enter = None;
            if self.bland {
                for j in 0..ncols_active {
                    if self.cost[j] > FEAS_TOL {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = FEAS_TOL;
                for j in 0..ncols_active {
                    if self.cost[j] > best {
                        best = self.cost[j];
                        enter = Some(j);
                    }
                }
            }
            let Some(jc) = enter else {
                return Ok(true);
            };
            // ratio test
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, jc);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, w - 1) / a;
                    if self.bland {
                        // lowest basis index among (near-)minimal ratios
                        let better = ratio < best_ratio - 1e-12 * (1.0 + best_ratio.abs());
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                        if better || (tie && leave.map_or(true, |l| self.basis[i] < self.basis[l]))
                        {
                            best_ratio = ratio.min(best_ratio);
                            leave = Some(i);
                        }
                    } else if ratio < best_ratio {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(ir) = leave else {
                return Ok(false);
            };
            let before = self.cost[w - 1];
            self.pivot(ir, jc);
            let after = self.cost[w - 1];
            // Objective row holds −z for a maximization, so progress is a
            // decrease; detect degenerate stalls and fall back to Bland.
            if !self.bland {
                if (before - after).abs() <= 1e-13 * (1.0 + before.abs()) {
                    self.stall += 1;
                    if self.stall > 2 * self.rows + 16 {
                        self.bland = true;
                    }
                } else {
                    self.stall = 0;
                }
            }
        }
    }
}

/// Solves an equality-form LP with a deterministic two-phase dense simplex.
pub fn solve(prob: &LpProblem) -> Result<LpSolution> {
    let m = prob.constraints.nrows();
    let n_orig = prob.constraints.ncols();
    if prob.objective.len() != n_orig || prob.rhs.len() != m || prob.free.len() != n_orig {
        return Err(Error::DimensionMismatch(format!(
            "lp: {} cols, {} objective entries, {} rows, {} rhs entries, {} bound flags",
            n_orig,
            prob.objective.len(),
            m,
            prob.rhs.len(),
            prob.free.len()
        )));
    }
    if prob.rhs.iter().any(|v| !v.is_finite())
        || prob.objective.iter().any(|v| !v.is_finite())
        || prob.constraints.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFiniteValue("lp data must be finite".into()));
    }

    // Split free variables as x = x⁺ − x⁻.
    let mut col_of: Vec<(usize, f64)> = Vec::new(); // internal col -> (orig var, sign)
    for j in 0..n_orig {
        col_of.push((j, 1.0));
        if prob.free[j] {
            col_of.push((j, -1.0));
        }
    }
    let n_int = col_of.len();
    let ncols = n_int + m; // + artificials
    let width = ncols + 1;

    let mut data = vec![0.0; m * width];
    for i in 0..m {
        let flip = if prob.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for (jc, &(j, sign)) in col_of.iter().enumerate() {
            data[i * width + jc] = flip * sign * prob.constraints[(i, j)];
        }
        data[i * width + n_int + i] = 1.0;
        data[i * width + ncols] = flip * prob.rhs[i];
    }

    // Phase 1 cost row: maximize −Σ artificials, priced out against the
    // artificial basis (reduced cost of column j is Σ_i a_ij).
    let mut cost = vec![0.0; width];
    for j in 0..n_int {
        let mut s = 0.0;
        for i in 0..m {
            s += data[i * width + j];
        }
        cost[j] = s;
    }
    let mut rhs_sum = 0.0;
    for i in 0..m {
        rhs_sum += data[i * width + ncols];
    }
    cost[ncols] = rhs_sum; // −z for max −Σart starts at Σb

    let mut tab = Tableau {
        data,
        rows: m,
        width,
        cost,
        basis: (n_int..n_int + m).collect(),
        pivots: 0,
        bland: false,
        stall: 0,
        limit: 50 * (m + n_int).max(64),
    };

    if !tab.run(n_int)? {
        return Err(Error::LpFailure("phase 1 reported unbounded".into()));
    }
    let infeas = tab.cost[width - 1].abs();
    let b_scale = 1.0 + prob.rhs.amax();
    if infeas > FEAS_TOL * b_scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: 0.0,
            x: DVector::zeros(n_orig),
            residual: f64::NAN,
            pivots: tab.pivots,
        });
    }

    // Drive artificials out of the basis; rows that cannot pivot are redundant
    // and get dropped.
    let mut drop_rows: Vec<usize> = Vec::new();
    for i in 0..m {
        if tab.basis[i] >= n_int {
            let mut pivoted = false;
            for j in 0..n_int {
                if tab.at(i, j).abs() > PIVOT_TOL {
                    tab.pivot(i, j);
                    pivoted = true;
                    break;
                }
            }
            if !pivoted {
                drop_rows.push(i);
            }
        }
    }
    if !drop_rows.is_empty() {
        let w = tab.width;
        let mut new_data = Vec::with_capacity((tab.rows - drop_rows.len()) * w);
        let mut new_basis = Vec::new();
        for i in 0..tab.rows {
            if !drop_rows.contains(&i) {
                new_data.extend_from_slice(&tab.data[i * w..(i + 1) * w]);
                new_basis.push(tab.basis[i]);
            }
        }
        tab.data = new_data;
        tab.basis = new_basis;
        tab.rows -= drop_rows.len();
    }

    // Phase 2 cost row from the real objective, priced out against the basis;
    // the rhs entry of the cost row then carries −z, matching phase 1.
    let c_int: Vec<f64> = col_of.iter().map(|&(j, s)| s * prob.objective[j]).collect();
    let mut cost = vec![0.0; width];
    for (j, &cj) in c_int.iter().enumerate() {
        cost[j] = cj;
    }
    for i in 0..tab.rows {
        let cb = if tab.basis[i] < n_int {
            c_int[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..width {
                cost[j] -= cb * tab.data[i * width + j];
            }
        }
    }
    tab.cost = cost;
    tab.bland = false;
    tab.stall = 0;

    let bounded = tab.run(n_int)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            x: DVector::zeros(n_orig),
            residual: f64::NAN,
            pivots: tab.pivots,
        });
    }

    let mut x = DVector::zeros(n_orig);
    for i in 0..tab.rows {
        if tab.basis[i] < n_int {
            let (j, sign) = col_of[tab.basis[i]];
            x[j] += sign * tab.at(i, width - 1);
        }
    }
    let objective = prob.objective.dot(&x);
    let residual = (&prob.constraints * &x - &prob.rhs).amax() / b_scale;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        residual,
        pivots: tab.pivots,
    })
}

/// One summand of a Minkowski sum in V-representation. With `mirror` set the
/// point set is interpreted as {±p_i}.
#[derive(Clone, Copy)]
pub struct VSummand<'a> {
    pub points: &'a [DVector<f64>],
    pub mirror: bool,
}

/// Radial function of conv(points) in direction `x` (not necessarily unit):
/// maximize t subject to t·x ∈ conv(P). Degree −1 homogeneous in `x`.
pub fn radial_vpolytope(points: &[DVector<f64>], mirror: bool, x: &DVector<f64>) -> Result<f64> {
    radial_sum_of_vpolytopes(&[VSummand { points, mirror }], x)
}

/// Radial function of a Minkowski sum of V-polytopes: maximize t subject to
/// t·x = Σ_s y_s with y_s ∈ conv(P_s). One barycentric block per summand keeps
/// the LP at n + #summands rows instead of forming pairwise point sums.
pub fn radial_sum_of_vpolytopes(summands: &[VSummand<'_>], x: &DVector<f64>) -> Result<f64> {
    let n = x.len();
    if summands.is_empty() {
        return Err(Error::InvalidBody("empty Minkowski sum".into()));
    }
    for s in summands {
        if s.points.is_empty() {
            return Err(Error::InvalidBody("summand with no points".into()));
        }
        if s.points.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch("summand point dimension".into()));
        }
    }
    let cols: usize = 1
        + summands
            .iter()
            .map(|s| s.points.len() * if s.mirror { 2 } else { 1 })
            .sum::<usize>();
    let rows = n + summands.len();
    let mut a = DMatrix::zeros(rows, cols);
    let mut c = DVector::zeros(cols);
    c[0] = 1.0;
    for d in 0..n {
        a[(d, 0)] = x[d];
    }
    let mut col = 1;
    for (s_idx, s) in summands.iter().enumerate() {
        let signs: &[f64] = if s.mirror { &[1.0, -1.0] } else { &[1.0] };
        for p in s.points {
            for &sg in signs {
                for d in 0..n {
                    a[(d, col)] = -sg * p[d];
                }
                a[(n + s_idx, col)] = 1.0;
                col += 1;
            }
        }
    }
    let mut rhs = DVector::zeros(rows);
    for s_idx in 0..summands.len() {
        rhs[n + s_idx] = 1.0;
    }
    let prob = LpProblem {
        objective: c,
        constraints: a,
        rhs,
        free: vec![false; cols],
    };
    let sol = solve(&prob)?;
    match sol.status {
        LpStatus::Optimal => {
            if sol.objective <= 0.0 {
                return Err(Error::InvalidBody(
                    "radial LP returned a non-positive value: origin not interior".into(),
                ));
            }
            Ok(sol.objective)
        }
        LpStatus::Infeasible => Err(Error::InvalidBody(
            "radial LP infeasible: origin not in the body".into(),
        )),
        LpStatus::Unbounded => Err(Error::InvalidBody(
            "radial LP unbounded: point set does not bound the body".into(),
        )),
    }
}

/// Support function of the symmetric H-polytope {x : |⟨a_i, x⟩| ≤ b_i} in
/// direction `u`: maximize ⟨u, x⟩ by LP over both constraint signs.
pub fn support_hpolytope(
    normals: &[DVector<f64>],
    offsets: &[f64],
    u: &DVector<f64>,
) -> Result<f64> {
    let n = u.len();
    let m = normals.len();
    if offsets.len() != m {
        return Err(Error::DimensionMismatch("normals vs offsets".into()));
    }
    let nvars = n + 2 * m; // x (free), slack pair per facet pair
    let rows = 2 * m;
    let mut a = DMatrix::zeros(rows, nvars);
    let mut rhs = DVector::zeros(rows);
    for (i, (nr, &b)) in normals.iter().zip(offsets).enumerate() {
        for d in 0..n {
            a[(2 * i, d)] = nr[d];
            a[(2 * i + 1, d)] = -nr[d];
        }
        a[(2 * i, n + 2 * i)] = 1.0;
        a[(2 * i + 1, n + 2 * i + 1)] = 1.0;
        rhs[2 * i] = b;
        rhs[2 * i + 1] = b;
    }
    let mut c = DVector::zeros(nvars);
    for d in 0..n {
        c[d] = u[d];
    }
    let mut free = vec![false; nvars];
    for f in free.iter_mut().take(n) {
        *f = true;
    }
    let prob = LpProblem {
        objective: c,
        constraints: a,
        rhs,
        free,
    };
    let sol = solve(&prob)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => Err(Error::InvalidBody("empty H-polytope".into())),
        LpStatus::Unbounded => Err(Error::InvalidBody(
            "unbounded H-polytope: facet normals do not span".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(coords: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(coords)
    }

    fn square() -> Vec<DVector<f64>> {
        vec![v(&[1.0, 1.0]), v(&[1.0, -1.0])]
    }

    #[test]
    fn radial_square_axis() {
        let r = radial_vpolytope(&square(), true, &v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn radial_square_corner() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = radial_vpolytope(&square(), true, &v(&[s, s])).unwrap();
        assert_relative_eq!(r, 2.0_f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn radial_cross_polytope_diagonal() {
        let pts = vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let d = 1.0 / 3.0_f64.sqrt();
        let r = radial_vpolytope(&pts, true, &v(&[d, d, d])).unwrap();
        assert_relative_eq!(r, d, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_system_detected() {
        // x1 + x2 = 1 and x1 + x2 = 2, x >= 0
        let prob = LpProblem {
            objective: v(&[1.0, 0.0]),
            constraints: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            rhs: v(&[1.0, 2.0]),
            free: vec![false, false],
        };
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // maximize x1 with x1 − x2 = 0, both free to grow
        let prob = LpProblem {
            objective: v(&[1.0, 0.0]),
            constraints: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            rhs: v(&[0.0]),
            free: vec![false, false],
        };
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn support_square_hrep() {
        let normals = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let offsets = vec![1.0, 1.0];
        let h = support_hpolytope(&normals, &offsets, &v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(h, 1.0, epsilon = 1e-9);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = support_hpolytope(&normals, &offsets, &v(&[s, s])).unwrap();
        assert_relative_eq!(h, 2.0_f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn optimal_solutions_are_feasible() {
        let pts = square();
        let x = v(&[0.3, -0.9]);
        let r = radial_vpolytope(&pts, true, &x).unwrap();
        assert!(r.is_finite() && r > 0.0);
        // relative feasibility residual contract
        let prob = LpProblem {
            objective: v(&[1.0, 1.0]),
            constraints: DMatrix::from_row_slice(1, 2, &[2.0, 1.0]),
            rhs: v(&[3.0]),
            free: vec![false, false],
        };
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.residual <= 1e-9);
    }

    #[test]
    fn sum_lp_matches_pairwise_candidates() {
        // Two squares: sum is the square of side 4; compare the block LP with
        // the explicit pairwise-sum candidate route.
        let a = square();
        let b: Vec<_> = square().iter().map(|p| p * 0.5).collect();
        let mut pairwise = Vec::new();
        for p in &a {
            for q in &b {
                pairwise.push(p + q);
                pairwise.push(p - q);
            }
        }
        for dir in [
            v(&[1.0, 0.0]),
            v(&[0.3, 0.7]),
            v(&[-0.5, 0.2]),
            v(&[0.6, 0.6]),
        ] {
            let via_blocks = radial_sum_of_vpolytopes(
                &[
                    VSummand {
                        points: &a,
                        mirror: true,
                    },
                    VSummand {
                        points: &b,
                        mirror: true,
                    },
                ],
                &dir,
            )
            .unwrap();
            let via_candidates = radial_vpolytope(&pairwise, true, &dir).unwrap();
            assert_relative_eq!(via_blocks, via_candidates, epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let pts = square();
        let x = v(&[0.123, 0.987]);
        let a = radial_vpolytope(&pts, true, &x).unwrap();
        let b = radial_vpolytope(&pts, true, &x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
