//! Conditional-gradient ascent with optional away steps, in orbit space.

use std::collections::HashMap;

use super::lp::Simplex;
use super::presolve::Presolved;
use super::{SolveStatus, TracePoint};
use crate::error::Result;
use crate::program::ConcaveProgram;

const LINE_SEARCH_ITERATIONS: usize = 60;
const DROP_WEIGHT: f64 = 1e-14;

struct Atom {
    point: Vec<f64>,
    weight: f64,
}

pub(crate) struct Ascent {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

pub(crate) struct Settings {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    pub clip: f64,
    pub away_steps: bool,
    pub cutoff: Option<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Oracle<'a> {
    program: &'a ConcaveProgram,
    pre: &'a Presolved,
    clip: f64,
}

impl Oracle<'_> {
    fn value(&self, q: &[f64]) -> f64 {
        self.program.value_unchecked(&self.pre.expand(q))
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        self.pre.collapse(&self.program.gradient_clipped(&self.pre.expand(q), self.clip))
    }

    fn slope(&self, q: &[f64], d: &[f64], gamma: f64) -> f64 {
        let x: Vec<f64> = q.iter().zip(d).map(|(a, b)| (a + gamma * b).max(0.0)).collect();
        dot(&self.gradient(&x), d)
    }

    /// Step length in `[0, max]` maximizing the restriction along `d`.
    fn line_search(&self, q: &[f64], d: &[f64], max: f64) -> f64 {
        if self.slope(q, d, max) >= 0.0 {
            return max;
        }
        let (mut lo, mut hi) = (0.0, max);
        for _ in 0..LINE_SEARCH_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if self.slope(q, d, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

pub(crate) fn ascend(
    program: &ConcaveProgram,
    pre: &Presolved,
    simplex: &mut Simplex,
    start: Vec<f64>,
    settings: &Settings,
    trace: &mut Vec<TracePoint>,
) -> Result<Ascent> {
    let oracle = Oracle { program, pre, clip: settings.clip };
    let mut q = start;
    let mut atoms = vec![Atom { point: q.clone(), weight: 1.0 }];
    let mut vertex_atom: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut value = oracle.value(&q);
    let mut iterations = 0;
    let status = loop {
        let g = oracle.gradient(&q);
        let sol = simplex.maximize(&g)?;
        let here = dot(&g, &q);
        let gap = (sol.value - here).max(0.0);
        trace.push(TracePoint { iteration: iterations, value, gap, bound: value + gap });
        if gap <= settings.gap_tolerance {
            break SolveStatus::Converged;
        }
        if settings.cutoff.is_some_and(|c| value >= c) {
            break SolveStatus::CutOff;
        }
        if iterations >= settings.max_iterations {
            break SolveStatus::IterationLimit;
        }
        iterations += 1;

        let away = if settings.away_steps {
            atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| a.weight > 0.0 && a.weight < 1.0)
                .map(|(i, a)| (i, here - dot(&g, &a.point)))
                .fold(None, |best: Option<(usize, f64)>, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                })
                .filter(|&(_, away_gap)| away_gap > gap)
        } else {
            None
        };

        let (direction, max_step) = match away {
            Some((i, _)) => {
                let w = atoms[i].weight;
                let d: Vec<f64> = q.iter().zip(&atoms[i].point).map(|(a, b)| a - b).collect();
                (d, w / (1.0 - w))
            }
            None => (sol.x.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<f64>>(), 1.0),
        };
        let gamma = oracle.line_search(&q, &direction, max_step);
        let next: Vec<f64> = q.iter().zip(&direction).map(|(a, b)| (a + gamma * b).max(0.0)).collect();
        let next_value = oracle.value(&next);
        if gamma == 0.0 || next_value < value - 1e-12 {
            break SolveStatus::Stalled;
        }

        match away {
            Some((i, _)) => {
                for a in atoms.iter_mut() {
                    a.weight *= 1.0 + gamma;
                }
                atoms[i].weight -= gamma;
                if gamma >= max_step || atoms[i].weight <= DROP_WEIGHT {
                    atoms[i].weight = 0.0;
                }
            }
            None => {
                for a in atoms.iter_mut() {
                    a.weight *= 1.0 - gamma;
                    if a.weight <= DROP_WEIGHT {
                        a.weight = 0.0;
                    }
                }
                let mut key = sol.basis.clone();
                key.sort_unstable();
                match vertex_atom.get(&key) {
                    Some(&i) => atoms[i].weight += gamma,
                    None => {
                        vertex_atom.insert(key, atoms.len());
                        atoms.push(Atom { point: sol.x.clone(), weight: gamma });
                    }
                }
            }
        }
        q = next;
        value = next_value;
    };
    Ok(Ascent { q, iterations, status })
}
