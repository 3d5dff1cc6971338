//! Two-phase revised simplex for `max c.x` subject to `A x = b, x >= 0`.
//!
//! The basis inverse is kept explicitly and refreshed by Gauss-Jordan
//! reinversion. Pricing uses Devex reference weights. A run of degenerate pivots first
//! triggers a small random shift of the basic values, removed again at the
//! optimum with a few dual simplex pivots; if stalling persists, pricing
//! switches to Bland's rule.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 100;
const STALL_LIMIT: usize = 50;
const PERTURBATION: f64 = 1e-7;
const MAX_PERTURBATIONS: usize = 3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    /// Sparse rows `(variable, coefficient)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub objective: Vec<f64>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        LpProblem { num_vars, rows: Vec::new(), rhs: Vec::new(), objective: vec![0.0; num_vars] }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// Largest `|A x - b|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| (row.iter().map(|&(k, a)| a * x[k]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    fn check(&self) -> Result<()> {
        if self.rows.len() != self.rhs.len() || self.objective.len() != self.num_vars {
            return Err(Error::DimensionMismatch("LP rows, rhs and objective disagree".into()));
        }
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            if !b.is_finite() || row.iter().any(|&(k, a)| k >= self.num_vars || !a.is_finite()) {
                return Err(Error::DimensionMismatch("LP row refers to a missing variable or is not finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Basic variables, one per kept row.
    pub basis: Vec<usize>,
    /// Row multipliers in the original row order; dropped redundant rows get 0.
    pub duals: Vec<f64>,
    /// `c_j - A_j . duals` per variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solve a single LP from scratch.
pub fn lp_maximize(lp: &LpProblem) -> Result<LpSolution> {
    lp.check()?;
    let mut s = Simplex::new(lp.num_vars, &lp.rows, &lp.rhs)?;
    s.maximize(&lp.objective)
}

/// Simplex state over a fixed constraint system; successive objectives
/// start from the previous optimal basis.
#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    /// Original index of each kept row.
    row_ids: Vec<usize>,
    num_original_rows: usize,
    /// +1 or -1: kept rows are scaled so the right-hand side is non-negative.
    row_sign: Vec<f64>,
    b: Vec<f64>,
    /// Column-compressed structural columns over kept rows.
    cols: Vec<Vec<(usize, f64)>>,
    /// Basis inverse, row-major `m x m`.
    binv: Vec<f64>,
    /// Basic variable per row; `n + i` is the artificial of kept row `i`.
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    xb: Vec<f64>,
    /// Shifted right-hand side while degeneracy is being broken.
    shifted: Option<Vec<f64>>,
    rng: StdRng,
    since_reinvert: usize,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Simplex {
    /// Set up the system and find a feasible basis (phase 1).
    pub fn new(n: usize, rows: &[Vec<(usize, f64)>], rhs: &[f64]) -> Result<Self> {
        let mut kept_rows = Vec::new();
        let mut row_ids = Vec::new();
        let mut b = Vec::new();
        let mut row_sign = Vec::new();
        for (i, (row, &v)) in rows.iter().zip(rhs).enumerate() {
            if row.iter().all(|&(_, a)| a == 0.0) {
                if v.abs() > FEAS_TOL {
                    return Err(Error::Infeasible);
                }
                continue;
            }
            let sign = if v < 0.0 { -1.0 } else { 1.0 };
            kept_rows.push(row);
            row_ids.push(i);
            b.push(sign * v);
            row_sign.push(sign);
        }
        let m = kept_rows.len();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in kept_rows.iter().enumerate() {
            for &(k, a) in row.iter() {
                if a != 0.0 {
                    cols[k].push((i, row_sign[i] * a));
                }
            }
        }
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            // merge repeated entries of a row
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(i, a) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += a,
                    _ => merged.push((i, a)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *col = merged;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut s = Simplex {
            n,
            row_ids,
            num_original_rows: rows.len(),
            row_sign,
            xb: b.clone(),
            b,
            cols,
            binv,
            basis: (n..n + m).collect(),
            position: vec![None; n + m],
            shifted: None,
            rng: StdRng::seed_from_u64(0),
            since_reinvert: 0,
            iterations: 0,
        };
        for (i, &v) in s.basis.iter().enumerate() {
            s.position[v] = Some(i);
        }
        s.phase_one()?;
        Ok(s)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.basis.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Seed for the degeneracy-breaking shifts.
    pub fn set_seed(&mut self, seed: u64) {
        self.rng = StdRng::seed_from_u64(seed);
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    fn phase_one(&mut self) -> Result<()> {
        let m = self.m();
        let mut cost = vec![0.0; self.n + m];
        for c in cost.iter_mut().skip(self.n) {
            *c = -1.0;
        }
        match self.iterate(&cost, true)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Numerical("phase one reported unbounded".into())),
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| v >= self.n)
            .map(|(_, &x)| x)
            .sum();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if infeasibility > FEAS_TOL * scale {
            return Err(Error::Infeasible);
        }
        self.drive_out_artificials()
    }

    /// Pivot zero-level artificials out of the basis; rows where that is
    /// impossible are linear combinations of the others and are dropped.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let mut redundant = Vec::new();
        for r in 0..self.m() {
            if self.basis[r] < self.n {
                continue;
            }
            let m = self.m();
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.position[j].is_some() {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(i, a)| row[i] * a).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    let alpha = self.ftran(j);
                    self.pivot(r, j, &alpha);
                }
                None => redundant.push(r),
            }
        }
        if !redundant.is_empty() {
            self.drop_rows(&redundant)?;
        }
        Ok(())
    }

    /// Remove kept rows whose artificial is stuck in the basis at `positions`.
    fn drop_rows(&mut self, positions: &[usize]) -> Result<()> {
        let drop_rows: Vec<usize> = positions.iter().map(|&r| self.basis[r] - self.n).collect();
        let keep: Vec<bool> = (0..self.m()).map(|i| !drop_rows.contains(&i)).collect();
        let mut new_index = vec![usize::MAX; self.m()];
        let mut next = 0;
        for i in 0..self.m() {
            if keep[i] {
                new_index[i] = next;
                next += 1;
            }
        }
        let old_basis: Vec<usize> =
            self.basis.iter().enumerate().filter(|(r, _)| !positions.contains(r)).map(|(_, &v)| v).collect();
        self.row_ids = self.row_ids.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
        self.row_sign = self.row_sign.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
        self.b = self.b.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
        for col in &mut self.cols {
            col.retain(|&(i, _)| keep[i]);
            col.iter_mut().for_each(|e| e.0 = new_index[e.0]);
        }
        let m = next;
        self.basis = old_basis
            .into_iter()
            .map(|v| if v >= self.n { self.n + new_index[v - self.n] } else { v })
            .collect();
        self.position = vec![None; self.n + m];
        for (i, &v) in self.basis.iter().enumerate() {
            self.position[v] = Some(i);
        }
        self.reinvert()
    }

    /// `B^-1 A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        let col = self.column(j);
        (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                col.iter().map(|&(i, a)| row[i] * a).sum()
            })
            .collect()
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m();
        let theta = self.xb[r] / alpha[r];
        for k in 0..m {
            if k != r {
                self.xb[k] -= theta * alpha[k];
            }
        }
        self.xb[r] = theta;
        let inv = 1.0 / alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        pivot_row.iter_mut().for_each(|v| *v *= inv);
        for (k, row) in before.chunks_exact_mut(m).chain(after.chunks_exact_mut(m)).enumerate() {
            let k = if k < r { k } else { k + 1 };
            let f = alpha[k];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        let leaving = self.basis[r];
        self.position[leaving] = None;
        self.position[entering] = Some(r);
        self.basis[r] = entering;
        self.since_reinvert += 1;
        self.iterations += 1;
    }

    /// Rebuild the basis inverse from scratch and recompute basic values.
    fn reinvert(&mut self) -> Result<()> {
        let m = self.m();
        let mut a = Mat::<f64>::zeros(m, m);
        for (c, &v) in self.basis.iter().enumerate() {
            for (i, x) in self.column(v) {
                a[(i, c)] = x;
            }
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let largest = (0..m).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
        if let Some(col) = (0..m).find(|&i| u[(i, i)].abs() <= 1e-12 * largest.max(1.0)) {
            return Err(Error::Numerical(format!("singular basis at column {col}")));
        }
        let dense = lu.inverse();
        let mut inv = vec![0.0; m * m];
        for c in 0..m {
            let col = dense.col(c);
            for r in 0..m {
                inv[r * m + c] = col[r];
            }
        }
        self.binv = inv;
        for k in 0..m {
            let b = self.shifted.as_ref().unwrap_or(&self.b);
            self.xb[k] = (0..m).map(|i| self.binv[k * m + i] * b[i]).sum();
        }
        self.since_reinvert = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for (k, &v) in self.basis.iter().enumerate() {
            let c = cost[v];
            if c != 0.0 {
                for (yi, &bi) in y.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        if j < self.n {
            cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
        } else {
            cost[j] - y[j - self.n]
        }
    }

    /// Raise every basic value by a small random amount, moving to a nearby
    /// right-hand side that keeps the basis feasible and nondegenerate.
    fn perturb(&mut self) {
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut b = self.b.clone();
        for k in 0..self.m() {
            let d = PERTURBATION * scale * (1.0 + self.rng.gen::<f64>());
            self.xb[k] += d;
            for (i, a) in self.column(self.basis[k]) {
                b[i] += a * d;
            }
        }
        self.shifted = Some(b);
    }

    /// Dual simplex pivots that remove negative basic values while keeping
    /// every reduced cost non-positive.
    fn restore_feasibility(&mut self, cost: &[f64], last: usize) -> Result<()> {
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let limit = 10 * self.m() + 100;
        for _ in 0..limit {
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
            }
            let (r, v) = self
                .xb
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (k, &v)| if v < best.1 { (k, v) } else { best });
            if v >= -FEAS_TOL * scale {
                self.xb.iter_mut().for_each(|x| *x = x.max(0.0));
                return Ok(());
            }
            let m = self.m();
            let y = self.duals(cost);
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..last {
                if self.position[j].is_some() {
                    continue;
                }
                let a: f64 = self.column(j).iter().map(|&(i, a)| row[i] * a).sum();
                if a >= -PIVOT_TOL {
                    continue;
                }
                let ratio = self.reduced_cost(j, cost, &y).min(0.0) / a;
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba.abs()),
                };
                if better {
                    best = Some((j, ratio, a));
                }
            }
            let Some((j, _, _)) = best else {
                return Err(Error::Infeasible);
            };
            let alpha = self.ftran(j);
            self.pivot(r, j, &alpha);
        }
        Err(Error::Numerical("could not restore feasibility after perturbation".into()))
    }

    /// Devex update for entering `q` and leaving row `r`, before the pivot.
    fn update_weights(&self, weights: &mut [f64], r: usize, q: usize, alpha: &[f64], last: usize) {
        let m = self.m();
        let row = &self.binv[r * m..(r + 1) * m];
        let wq = weights[q];
        let arq = alpha[r];
        let mut largest: f64 = 0.0;
        for j in 0..last {
            if self.position[j].is_some() || j == q {
                continue;
            }
            let a: f64 = if j < self.n {
                self.cols[j].iter().map(|&(i, v)| row[i] * v).sum()
            } else {
                row[j - self.n]
            };
            if a != 0.0 {
                let ratio = a / arq;
                weights[j] = weights[j].max(ratio * ratio * wq);
                largest = largest.max(weights[j]);
            }
        }
        let leaving = self.basis[r];
        weights[leaving] = (wq / (arq * arq)).max(1.0);
        if largest > 1e6 {
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    /// Smallest ratio; ties go to the lowest basic index.
    fn ratio_test_bland(&self, alpha: &[f64]) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for (k, &a) in alpha.iter().enumerate() {
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.xb[k].max(0.0) / a;
            leave = match leave {
                Some((bk, br)) if ratio > br + 1e-12 || (ratio >= br - 1e-12 && self.basis[k] > self.basis[bk]) => {
                    Some((bk, br))
                }
                _ => Some((k, ratio)),
            };
        }
        leave
    }

    /// Two-pass ratio test: among rows whose ratio is within the feasibility
    /// tolerance of the minimum, pivot on the largest entry.
    fn ratio_test_harris(&self, alpha: &[f64]) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for (k, &a) in alpha.iter().enumerate() {
            if a > PIVOT_TOL {
                bound = bound.min((self.xb[k].max(0.0) + FEAS_TOL) / a);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for (k, &a) in alpha.iter().enumerate() {
            if a > PIVOT_TOL {
                let ratio = self.xb[k].max(0.0) / a;
                if ratio <= bound && leave.is_none_or(|(bk, _)| a > alpha[bk]) {
                    leave = Some((k, ratio));
                }
            }
        }
        leave
    }

    /// Primal simplex from the current feasible basis. `cost` covers the
    /// artificials too; they may only enter in phase 1.
    fn iterate(&mut self, cost: &[f64], artificials_enter: bool) -> Result<Outcome> {
        let limit = 50 * (self.n + self.m()) + 1000;
        let scale = 1.0 + cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let tol = COST_TOL * scale;
        let mut stall = 0usize;
        let mut confirmed = false;
        let mut perturbations = 0;
        let mut weights = vec![1.0; self.n + self.m()];
        let start = self.iterations;
        loop {
            if self.iterations - start > limit {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
            }
            let last = if artificials_enter { self.n + self.m() } else { self.n };
            if stall >= STALL_LIMIT && self.shifted.is_none() && perturbations < MAX_PERTURBATIONS {
                self.perturb();
                perturbations += 1;
                stall = 0;
            }
            let y = self.duals(cost);
            // long runs fall back to Bland's rule for good to rule out cycling
            let bland = stall >= STALL_LIMIT || self.iterations - start > limit / 2;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..last {
                if self.position[j].is_some() {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                if d > tol {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    let score = d * d / weights[j];
                    if entering.is_none_or(|(bj, bd)| score > bd * bd / weights[bj]) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                if self.shifted.is_some() {
                    self.shifted = None;
                    self.reinvert()?;
                    self.restore_feasibility(cost, last)?;
                    confirmed = false;
                    stall = 0;
                    continue;
                }
                // confirm optimality on a fresh factorization
                if confirmed {
                    return Ok(Outcome::Optimal);
                }
                self.reinvert()?;
                if self.xb.iter().any(|&v| v < -1e-7) {
                    return Err(Error::Numerical("basic solution lost feasibility".into()));
                }
                self.xb.iter_mut().for_each(|v| *v = v.max(0.0));
                confirmed = true;
                continue;
            };
            confirmed = false;
            let alpha = self.ftran(q);
            let leave = if bland { self.ratio_test_bland(&alpha) } else { self.ratio_test_harris(&alpha) };
            let Some((r, theta)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if alpha[r].abs() < PIVOT_TOL {
                return Err(Error::Numerical(format!("pivot {} below tolerance", alpha[r])));
            }
            if theta > 0.0 {
                stall = 0;
            } else {
                stall += 1;
            }
            if !bland {
                self.update_weights(&mut weights, r, q, &alpha, last);
            }
            self.pivot(r, q, &alpha);
            if self.xb[r] < 0.0 {
                self.xb[r] = 0.0;
            }
        }
    }

    /// Maximize `c.x` from the current basis.
    pub fn maximize(&mut self, objective: &[f64]) -> Result<LpSolution> {
        if objective.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} entries for {} variables",
                objective.len(),
                self.n
            )));
        }
        let mut cost = objective.to_vec();
        cost.resize(self.n + self.m(), 0.0);
        match self.iterate(&cost, false)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Unbounded),
        }
        let mut x = vec![0.0; self.n];
        for (k, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                x[v] = self.xb[k].max(0.0);
            }
        }
        let y = self.duals(&cost);
        let reduced_costs: Vec<f64> = (0..self.n).map(|j| self.reduced_cost(j, &cost, &y)).collect();
        let mut duals = vec![0.0; self.num_original_rows];
        for (i, &yi) in y.iter().enumerate() {
            duals[self.row_ids[i]] = self.row_sign[i] * yi;
        }
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            value,
            x,
            basis: self.basis.clone(),
            duals,
            reduced_costs,
            iterations: self.iterations,
        })
    }
}
