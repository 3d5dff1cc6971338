//! Log-barrier Newton iterations restricted to the affine hull of the
//! feasible set. Used to bring the iterate close to the optimal face before
//! the conditional-gradient phase.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, Par, Side};

use super::presolve::Presolved;
use crate::program::ConcaveProgram;

const MU_START: f64 = 1e-2;
const MU_FACTOR: f64 = 0.1;
/// Centering is declared once a full step leaves a decrement below this many mu.
const CENTERED: f64 = 10.0;
const TIGHT: f64 = 1e-3;
const FINAL_STEPS: usize = 30;
const MU_MIN: f64 = 1e-13;
const BOUNDARY_FRACTION: f64 = 0.99;
const ARMIJO: f64 = 0.1;

#[derive(Clone, Debug)]
pub(crate) struct Refined {
    /// Orbit-space point, strictly positive on active orbits.
    pub q: Vec<f64>,
    pub steps: usize,
    pub mu: f64,
    pub cut_off: bool,
}

/// Per-term bookkeeping: the active orbits feeding each upsilon group and
/// the upsilon groups under each psi group.
struct TermLayout {
    weight: f64,
    members: Vec<Vec<(usize, f64)>>,
    children: Vec<Vec<usize>>,
}

fn layouts(program: &ConcaveProgram, pre: &Presolved) -> Vec<TermLayout> {
    program
        .terms()
        .iter()
        .map(|term| {
            let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); term.upsilon.num_groups()];
            for (x, &y) in term.upsilon.group_ids().iter().enumerate() {
                let Some(a) = pre.orbit_of(x).and_then(|o| pre.active_index(o)) else { continue };
                let list = &mut members[y as usize];
                match list.iter_mut().find(|e| e.0 == a) {
                    Some(e) => e.1 += 1.0,
                    None => list.push((a, 1.0)),
                }
            }
            let mut children = vec![Vec::new(); term.psi.num_groups()];
            for (y, &z) in term.y_to_z.iter().enumerate() {
                if !members[y].is_empty() {
                    children[z as usize].push(y);
                }
            }
            TermLayout { weight: term.weight, members, children }
        })
        .collect()
}

fn penalized(program: &ConcaveProgram, pre: &Presolved, q: &[f64], mu: f64) -> f64 {
    let f = program.value_unchecked(&pre.expand(q));
    f + mu * pre.active().iter().map(|&o| q[o].ln()).sum::<f64>()
}

/// Negated Hessian of the penalized objective in null-space coordinates,
/// as `B B^T` with one column of `B` per rank-one piece.
fn reduced_hessian(
    layouts: &[TermLayout],
    program: &ConcaveProgram,
    pre: &Presolved,
    zt: &Mat<f64>,
    p: &[f64],
    q: &[f64],
    mu: f64,
) -> Mat<f64> {
    let k = zt.nrows();
    let mut cols = pre.active().len();
    for l in layouts {
        cols += l.children.iter().map(|c| c.len().saturating_sub(1)).sum::<usize>();
    }
    let mut bt = Mat::<f64>::zeros(k, cols);
    let mut next = 0;
    let mut mean = vec![0.0; k];
    let mut v = vec![0.0; k];
    for (l, term) in layouts.iter().zip(program.terms()) {
        let py = term.upsilon.marginalize(p);
        let scale = (l.weight / std::f64::consts::LN_2).sqrt();
        for children in &l.children {
            let mut total = 0.0;
            for (i, &y) in children.iter().enumerate() {
                let w = py[y];
                v.iter_mut().for_each(|e| *e = 0.0);
                for &(a, count) in &l.members[y] {
                    let col = zt.col(a);
                    for r in 0..k {
                        v[r] += count * col[r];
                    }
                }
                v.iter_mut().for_each(|e| *e /= w);
                if i == 0 {
                    mean.copy_from_slice(&v);
                    total = w;
                    continue;
                }
                let before = total;
                total += w;
                let c = scale * (w * before / total).sqrt();
                let mut out = bt.col_mut(next);
                for r in 0..k {
                    let delta = v[r] - mean[r];
                    out[r] = c * delta;
                    mean[r] += w / total * delta;
                }
                next += 1;
            }
        }
    }
    let root = mu.sqrt();
    for (a, &o) in pre.active().iter().enumerate() {
        let c = root / q[o];
        let col = zt.col(a);
        let mut out = bt.col_mut(next);
        for r in 0..k {
            out[r] = c * col[r];
        }
        next += 1;
    }
    debug_assert_eq!(next, cols);
    let mut g = Mat::<f64>::zeros(k, k);
    matmul(
        g.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        bt.as_ref(),
        BlockStructure::Rectangular,
        bt.transpose(),
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
    g
}

pub(crate) fn refine(
    program: &ConcaveProgram,
    pre: &Presolved,
    max_steps: usize,
    gap_tolerance: f64,
    cutoff: Option<f64>,
) -> Refined {
    let mut q = pre.interior().to_vec();
    let z = pre.null_basis();
    let k = z.ncols();
    let active = pre.active();
    let mut out = Refined { q: Vec::new(), steps: 0, mu: MU_START, cut_off: false };
    if k == 0 || max_steps == 0 {
        out.q = q;
        return out;
    }
    let zt = z.transpose().to_owned();
    let layouts = layouts(program, pre);
    let mut mu = MU_START;
    let mut direction = vec![0.0; active.len()];
    let mut final_steps = 0;
    while out.steps < max_steps {
        let p = pre.expand(&q);
        if let Some(c) = cutoff {
            if program.value_unchecked(&p) >= c {
                out.cut_off = true;
                break;
            }
        }
        let gq = pre.collapse(&program.gradient_clipped(&p, f64::MIN_POSITIVE));
        let rhs = Mat::<f64>::from_fn(k, 1, |r, _| {
            active.iter().enumerate().map(|(a, &o)| zt[(r, a)] * (gq[o] + mu / q[o])).sum()
        });
        let mut g = reduced_hessian(&layouts, program, pre, &zt, &p, &q, mu);
        let u = match g.llt(Side::Lower) {
            Ok(llt) => llt.solve(&rhs),
            Err(_) => {
                let ridge = 1e-12 * (0..k).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1e-300);
                for i in 0..k {
                    g[(i, i)] += ridge;
                }
                match g.llt(Side::Lower) {
                    Ok(llt) => llt.solve(&rhs),
                    Err(_) => break,
                }
            }
        };
        let decrement: f64 = (0..k).map(|r| rhs[(r, 0)] * u[(r, 0)]).sum();
        if !decrement.is_finite() || decrement < 0.0 {
            break;
        }
        for (a, d) in direction.iter_mut().enumerate() {
            *d = (0..k).map(|r| zt[(r, a)] * u[(r, 0)]).sum();
        }
        let mut alpha_max: f64 = 1.0;
        for (a, &o) in active.iter().enumerate() {
            if direction[a] < 0.0 {
                alpha_max = alpha_max.min(BOUNDARY_FRACTION * q[o] / -direction[a]);
            }
        }
        let base = penalized(program, pre, &q, mu);
        let slack = 4.0 * f64::EPSILON * (base.abs() + 1.0);
        let mut alpha = alpha_max;
        let mut trial = q.clone();
        loop {
            for (a, &o) in active.iter().enumerate() {
                trial[o] = q[o] + alpha * direction[a];
            }
            let ok = trial.iter().all(|&v| v >= 0.0)
                && active.iter().all(|&o| trial[o] > 0.0)
                && penalized(program, pre, &trial, mu) >= base + ARMIJO * alpha * decrement - slack;
            if ok || alpha < 1e-14 {
                break;
            }
            alpha *= 0.5;
        }
        if alpha < 1e-14 {
            break;
        }
        q = trial;
        out.steps += 1;
        let tight = decrement < TIGHT * mu;
        if mu * active.len() as f64 <= 0.1 * gap_tolerance || mu <= MU_MIN {
            // near the boundary a loosely centered point still has a wide linearization gap
            final_steps += 1;
            if tight || final_steps >= FINAL_STEPS {
                break;
            }
        } else if tight || (alpha == 1.0 && decrement < CENTERED * mu) {
            mu *= MU_FACTOR;
        }
    }
    out.q = q;
    out.mu = mu;
    out
}
