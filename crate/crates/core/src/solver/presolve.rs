//! Reduction of the equality system shared by every scheme over one patch
//! set: symmetry orbits, independent rows, implied zeros, an interior point
//! and an orthonormal null-space basis.

use std::collections::HashSet;

use faer::{Mat, Par};

use super::lp::Simplex;
use crate::error::{Error, Result};
use crate::program::LinearSystem;

const RANK_TOL: f64 = 1e-9;
const POSITIVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Presolved {
    num_patches: usize,
    /// Orbit of each patch; `None` for patches fixed at zero by a row.
    orbit_of: Vec<Option<u32>>,
    orbit_size: Vec<usize>,
    /// Linearly independent rows over orbits.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    simplex: Simplex,
    /// Orbits that are positive at some feasible point.
    active: Vec<usize>,
    active_index: Vec<Option<usize>>,
    /// Orthonormal basis of the null space of the rows restricted to active orbits.
    null_basis: Mat<f64>,
    /// Feasible point, strictly positive on active orbits.
    interior: Vec<f64>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Indices of a maximal independent subset of `rows` (over `n` columns) and
/// an orthonormal basis of their common null space.
fn independent_rows(rows: &[Vec<(usize, f64)>], n: usize) -> (Vec<usize>, Mat<f64>) {
    if rows.is_empty() {
        return (Vec::new(), Mat::identity(n, n));
    }
    // columns of the transpose are the rows
    let mut at = Mat::<f64>::zeros(n, rows.len());
    for (i, row) in rows.iter().enumerate() {
        for &(k, a) in row {
            at[(k, i)] += a;
        }
    }
    let qr = at.col_piv_qr();
    let r = qr.R();
    let diag = r.nrows().min(r.ncols());
    let top = if diag > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = (0..diag).take_while(|&i| r[(i, i)].abs() > RANK_TOL * top.max(1.0)).count();
    let (fwd, _) = qr.P().arrays();
    let mut picked: Vec<usize> = fwd[..rank].to_vec();
    picked.sort_unstable();
    let q = qr.compute_Q();
    let null = q.subcols(rank, n - rank).to_owned();
    (picked, null)
}

impl Presolved {
    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    pub fn num_orbits(&self) -> usize {
        self.orbit_size.len()
    }

    pub fn orbit_of(&self, patch: usize) -> Option<usize> {
        self.orbit_of[patch].map(|o| o as usize)
    }

    pub fn orbit_size(&self, orbit: usize) -> usize {
        self.orbit_size[orbit]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn simplex(&self) -> &Simplex {
        &self.simplex
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn active_index(&self, orbit: usize) -> Option<usize> {
        self.active_index[orbit]
    }

    pub fn null_basis(&self) -> &Mat<f64> {
        &self.null_basis
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// Patch-space vector of an orbit-space point.
    pub fn expand(&self, q: &[f64]) -> Vec<f64> {
        self.orbit_of.iter().map(|o| o.map_or(0.0, |o| q[o as usize])).collect()
    }

    /// Orbit-space gradient of a function given its patch-space gradient.
    pub fn collapse(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_orbits()];
        for (x, o) in self.orbit_of.iter().enumerate() {
            if let Some(o) = o {
                out[*o as usize] += g[x];
            }
        }
        out
    }

    /// Orbit-space point of a symmetric patch-space point.
    pub fn restrict(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_orbits()];
        for (x, o) in self.orbit_of.iter().enumerate() {
            if let Some(o) = o {
                out[*o as usize] += p[x] / self.orbit_size[*o as usize] as f64;
            }
        }
        out
    }

    /// Largest `|A q - b|` over the kept rows.
    pub fn residual(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| (row.iter().map(|&(k, a)| a * q[k]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn presolve(system: &LinearSystem) -> Result<Presolved> {
    faer::set_global_parallelism(Par::Seq);
    let n = system.num_vars();
    let mut uf = UnionFind((0..n).collect());
    let mut zero = vec![false; n];
    let mut general = Vec::new();
    for row in system.rows() {
        match row.coeffs.as_slice() {
            [(a, ca), (b, cb)] if row.rhs == 0.0 && *ca == -*cb => uf.union(*a, *b),
            [(a, _)] if row.rhs == 0.0 => zero[*a] = true,
            _ => general.push(row),
        }
    }
    let roots: Vec<usize> = (0..n).map(|x| uf.find(x)).collect();
    let mut root_zero = vec![false; n];
    for x in 0..n {
        if zero[x] {
            root_zero[roots[x]] = true;
        }
    }
    let mut orbit_index = vec![usize::MAX; n];
    let mut orbit_size = Vec::new();
    let mut orbit_of = vec![None; n];
    for x in 0..n {
        let root = roots[x];
        if root_zero[root] {
            continue;
        }
        if orbit_index[root] == usize::MAX {
            orbit_index[root] = orbit_size.len();
            orbit_size.push(0);
        }
        orbit_size[orbit_index[root]] += 1;
        orbit_of[x] = Some(orbit_index[root] as u32);
    }
    let num_orbits = orbit_size.len();

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for row in general {
        let mut acc = vec![0.0; 0];
        let mut touched = Vec::new();
        for &(x, c) in &row.coeffs {
            if let Some(o) = orbit_of[x] {
                let o = o as usize;
                if acc.len() <= o {
                    acc.resize(o + 1, 0.0);
                }
                if acc[o] == 0.0 {
                    touched.push(o);
                }
                acc[o] += c;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let coeffs: Vec<(usize, f64)> = touched.iter().map(|&o| (o, acc[o])).filter(|e| e.1 != 0.0).collect();
        if coeffs.is_empty() {
            if row.rhs != 0.0 {
                return Err(Error::Infeasible);
            }
            continue;
        }
        let key: Vec<(usize, u64)> = coeffs.iter().map(|&(o, c)| (o, c.to_bits())).chain([(usize::MAX, row.rhs.to_bits())]).collect();
        if seen.insert(key) {
            rows.push(coeffs);
            rhs.push(row.rhs);
        }
    }
    if num_orbits == 0 {
        return Err(Error::Infeasible);
    }

    let (picked, mut null_basis) = independent_rows(&rows, num_orbits);
    let rows: Vec<Vec<(usize, f64)>> = picked.iter().map(|&i| rows[i].clone()).collect();
    let rhs: Vec<f64> = picked.iter().map(|&i| rhs[i]).collect();
    let simplex = Simplex::new(num_orbits, &rows, &rhs);
    let simplex = simplex?;

    let (active, interior) = match lifted_interior(num_orbits, &rows, &rhs)? {
        Some(q) => ((0..num_orbits).collect::<Vec<_>>(), q),
        None => implied_zeros(&simplex, num_orbits)?,
    };
    let mut active_index = vec![None; num_orbits];
    for (k, &o) in active.iter().enumerate() {
        active_index[o] = Some(k);
    }
    if active.len() < num_orbits {
        let restricted: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|row| row.iter().filter_map(|&(o, c)| active_index[o].map(|k| (k, c))).collect())
            .collect();
        null_basis = independent_rows(&restricted, active.len()).1;
    }
    Ok(Presolved {
        num_patches: n,
        orbit_of,
        orbit_size,
        rows,
        rhs,
        simplex,
        active,
        active_index,
        null_basis,
        interior,
    })
}

/// Maximize `t` over `q = s + t 1`, `s >= 0`, `A q = b`. Returns the point
/// when `t > 0`.
fn lifted_interior(n: usize, rows: &[Vec<(usize, f64)>], rhs: &[f64]) -> Result<Option<Vec<f64>>> {
    let totals: Vec<f64> = rows.iter().map(|row| row.iter().map(|e| e.1).sum()).collect();
    let scale = totals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(None);
    }
    // the extra column carries t * scale so its entries stay at most 1
    let lifted: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .zip(&totals)
        .map(|(row, &total)| {
            let mut r = row.clone();
            if total != 0.0 {
                r.push((n, total / scale));
            }
            r
        })
        .collect();
    let mut s = Simplex::new(n + 1, &lifted, rhs)?;
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let sol = match s.maximize(&c) {
        Ok(sol) => sol,
        Err(Error::Unbounded) => return Err(Error::Numerical("interior search unbounded".into())),
        Err(e) => return Err(e),
    };
    let t = sol.x[n] / scale;
    if t <= POSITIVE_TOL {
        return Ok(None);
    }
    Ok(Some(sol.x[..n].iter().map(|&v| v + t).collect()))
}

/// Find every orbit that some feasible point makes positive, by repeatedly
/// maximizing the mass on orbits not yet seen positive. Returns those orbits
/// and the average of the vertices found.
fn implied_zeros(simplex: &Simplex, n: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut s = simplex.clone();
    let mut positive = vec![false; n];
    let mut sum = vec![0.0; n];
    let mut count = 0usize;
    loop {
        let c: Vec<f64> = positive.iter().map(|&p| if p { 0.0 } else { 1.0 }).collect();
        let sol = s.maximize(&c)?;
        let mut fresh = false;
        for (o, &v) in sol.x.iter().enumerate() {
            if v > POSITIVE_TOL && !positive[o] {
                positive[o] = true;
                fresh = true;
            }
        }
        sum.iter_mut().zip(&sol.x).for_each(|(a, &v)| *a += v);
        count += 1;
        if !fresh || sol.value <= POSITIVE_TOL {
            break;
        }
    }
    let active: Vec<usize> = (0..n).filter(|&o| positive[o]).collect();
    let interior = sum.iter().enumerate().map(|(o, &v)| if positive[o] { v / count as f64 } else { 0.0 }).collect();
    Ok((active, interior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintSpec;
    use crate::patches::enumerate_patches;
    use crate::program::build_linear_system;

    fn presolved(name: &str, r: usize, s: usize) -> (LinearSystem, Presolved) {
        let spec = ConstraintSpec::load(name).unwrap();
        let ps = enumerate_patches(&spec, r, s, 0).unwrap();
        let sys = build_linear_system(&ps, spec.symmetry());
        let pre = presolve(&sys).unwrap();
        (sys, pre)
    }

    #[test]
    fn interior_is_feasible_and_positive() {
        for (name, r, s) in [("free", 2, 2), ("rll-1-inf", 2, 3), ("rll-0-2", 3, 3), ("nib", 3, 3), ("rll-2-inf", 2, 4)] {
            let (sys, pre) = presolved(name, r, s);
            let p = pre.expand(pre.interior());
            assert!(sys.residual(&p) < 1e-9, "{name}");
            for &o in pre.active() {
                assert!(pre.interior()[o] > 0.0, "{name}");
            }
        }
    }

    #[test]
    fn null_basis_is_orthonormal_kernel() {
        let (_, pre) = presolved("rll-0-2", 2, 3);
        let z = pre.null_basis();
        let k = z.ncols();
        assert!(k > 0);
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = (0..z.nrows()).map(|i| z[(i, a)] * z[(i, b)]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        for row in pre.rows() {
            for a in 0..k {
                let v: f64 = row.iter().map(|&(o, c)| c * z[(pre.active_index(o).unwrap(), a)]).sum();
                assert!(v.abs() < 1e-10);
            }
        }
        assert_eq!(pre.num_rows() + k, pre.active().len());
    }

    #[test]
    fn orbits_follow_symmetry() {
        let (_, pre) = presolved("free", 2, 2);
        // all-zero and all-one patches are the only fixed points of flips and complement
        assert_eq!(pre.orbit_size(pre.orbit_of(0).unwrap()), 2);
        assert_eq!(pre.num_patches(), 16);
        let total: usize = (0..pre.num_orbits()).map(|o| pre.orbit_size(o)).sum();
        assert_eq!(total, 16);
    }

    #[test]
    fn implied_zeros_detected() {
        // a 1 must sit left of another 1 that cannot exist
        let spec = ConstraintSpec::load("free").unwrap();
        let ps = enumerate_patches(&spec, 1, 2, 0).unwrap();
        let mut sys = build_linear_system(&ps, crate::constraint::Symmetry::NONE);
        let _ = &mut sys;
        let pre = presolve(&sys).unwrap();
        assert_eq!(pre.active().len(), pre.num_orbits());
        let direct = implied_zeros(pre.simplex(), pre.num_orbits()).unwrap();
        assert_eq!(direct.0.len(), pre.num_orbits());
    }
}
