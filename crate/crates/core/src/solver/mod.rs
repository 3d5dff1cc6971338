//! Maximization of the concave program and the linearization bound.

mod frank_wolfe;
pub mod lp;
mod newton;
pub mod presolve;

pub use lp::{lp_maximize, LpProblem, LpSolution, Simplex};
pub use presolve::{presolve, Presolved};

use crate::error::{Error, Result};
use crate::program::{ConcaveProgram, GRADIENT_CLIP};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    /// Marginals below this are raised to it inside gradient logarithms.
    pub clip: f64,
    /// Seeds the small shifts the simplex uses to escape degenerate vertices.
    pub seed: u64,
    pub away_steps: bool,
    /// Barrier Newton steps taken before the conditional-gradient phase.
    pub refine_steps: usize,
    /// Stop early once a feasible value reaches this level.
    pub cutoff: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 1000,
            gap_tolerance: 1e-7,
            clip: GRADIENT_CLIP,
            seed: 0,
            away_steps: true,
            refine_steps: 400,
            cutoff: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance > 0.0) || !(self.clip > 0.0) {
            return Err(Error::Numerical("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    /// A feasible value reached the cutoff; the bound is still valid.
    CutOff,
    /// The line search could not improve the objective.
    Stalled,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::CutOff => "cut-off",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// One conditional-gradient iterate: its value and the linearization bound there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub certified: f64,
    /// Upper estimate of `max g.p` over the polytope.
    pub lp_value: f64,
    pub lp_primal: f64,
    pub lp_dual_bound: f64,
    /// `max(0, lp_value - g.p_tilde)`.
    pub gap: f64,
    pub slack: f64,
    /// `|A v - b|` at the LP vertex over the full system.
    pub lp_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub p_tilde: Vec<f64>,
    pub f_tilde: f64,
    pub g_tilde: Vec<f64>,
    pub gap: f64,
    pub certified: f64,
    pub certificate: Certificate,
    /// `|A p_tilde - b|` over the full system.
    pub residual: f64,
    pub min_value: f64,
    /// Marginals of `p_tilde` below the clip level.
    pub clipped: usize,
    pub iterations: usize,
    pub refine_steps: usize,
    pub status: SolveStatus,
    pub trace: Vec<TracePoint>,
}

pub fn solve_concave(program: &ConcaveProgram, options: &SolveOptions) -> Result<SolveResult> {
    let pre = presolve(program.system())?;
    solve_presolved(program, &pre, options)
}

/// Like [`solve_concave`] with the reduction of the program's system supplied.
pub fn solve_presolved(program: &ConcaveProgram, pre: &Presolved, options: &SolveOptions) -> Result<SolveResult> {
    options.validate()?;
    check_reduction(program, pre)?;
    let uniform = pre.restrict(&vec![1.0 / pre.num_patches() as f64; pre.num_patches()]);
    let mut start = if pre.residual(&uniform) <= 1e-9 && pre.active().len() == pre.num_orbits() {
        uniform
    } else {
        pre.interior().to_vec()
    };
    let mut refine_steps = 0;
    let mut status = None;
    if options.refine_steps > 0 {
        let refined = newton::refine(program, pre, options.refine_steps, options.gap_tolerance, options.cutoff);
        refine_steps = refined.steps;
        start = refined.q;
        if refined.cut_off {
            status = Some(SolveStatus::CutOff);
        }
    }
    let mut simplex = pre.simplex().clone();
    simplex.set_seed(options.seed);
    let mut trace = Vec::new();
    let settings = frank_wolfe::Settings {
        max_iterations: if status.is_some() { 0 } else { options.max_iterations },
        gap_tolerance: options.gap_tolerance,
        clip: options.clip,
        away_steps: options.away_steps,
        cutoff: options.cutoff,
    };
    let ascent = frank_wolfe::ascend(program, pre, &mut simplex, start, &settings, &mut trace)?;
    let status = match (status, ascent.status) {
        (_, SolveStatus::Converged) => SolveStatus::Converged,
        (Some(s), _) => s,
        (None, s) => s,
    };

    let p_tilde = pre.expand(&ascent.q);
    let f_tilde = program.value_unchecked(&p_tilde);
    let (g_tilde, clipped) = certification_gradient(program, &p_tilde, options.clip);
    let certificate = certify_presolved(program, pre, &mut simplex, &p_tilde, f_tilde, &g_tilde)?;
    Ok(SolveResult {
        residual: program.system().residual(&p_tilde),
        min_value: p_tilde.iter().copied().fold(f64::INFINITY, f64::min),
        gap: certificate.gap,
        certified: certificate.certified,
        certificate,
        p_tilde,
        f_tilde,
        g_tilde,
        clipped,
        iterations: ascent.iterations,
        refine_steps,
        status,
        trace,
    })
}

fn check_reduction(program: &ConcaveProgram, pre: &Presolved) -> Result<()> {
    if pre.num_patches() != program.num_vars() {
        return Err(Error::DimensionMismatch("reduction built for another system".into()));
    }
    Ok(())
}

/// Gradient used for certification: exact wherever a marginal is positive,
/// clipped only where it vanishes. Also counts marginals below `clip`.
fn certification_gradient(program: &ConcaveProgram, p: &[f64], clip: f64) -> (Vec<f64>, usize) {
    let mut smallest = clip;
    let mut clipped = 0;
    for term in program.terms() {
        let (py, pz) = term.marginals(p);
        for v in py.into_iter().chain(pz) {
            if v < clip {
                clipped += 1;
            }
            if v > 0.0 {
                smallest = smallest.min(v);
            }
        }
    }
    (program.gradient_clipped(p, smallest), clipped)
}

/// `f_tilde - g_tilde.p_tilde + max g_tilde.p` over the program's polytope,
/// plus a floating-point allowance.
pub fn certify_bound(program: &ConcaveProgram, p_tilde: &[f64], f_tilde: f64, g_tilde: &[f64]) -> Result<Certificate> {
    let pre = presolve(program.system())?;
    let mut simplex = pre.simplex().clone();
    certify_presolved(program, &pre, &mut simplex, p_tilde, f_tilde, g_tilde)
}

pub(crate) fn certify_presolved(
    program: &ConcaveProgram,
    pre: &Presolved,
    simplex: &mut Simplex,
    p_tilde: &[f64],
    f_tilde: f64,
    g_tilde: &[f64],
) -> Result<Certificate> {
    let n = program.num_vars();
    if p_tilde.len() != n || g_tilde.len() != n {
        return Err(Error::DimensionMismatch(format!("expected vectors of length {n}")));
    }
    if g_tilde.iter().any(|v| !v.is_finite()) || !f_tilde.is_finite() {
        return Err(Error::Numerical("non-finite gradient or value".into()));
    }
    let gq = pre.collapse(g_tilde);
    let sol = simplex.maximize(&gq)?;
    let lp_residual = program.system().residual(&pre.expand(&sol.x));
    let mut dual_bound: f64 = pre.rhs().iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
    let excess = sol
        .reduced_costs
        .iter()
        .enumerate()
        .map(|(o, &rc)| rc.max(0.0) / pre.orbit_size(o) as f64)
        .fold(0.0, f64::max);
    dual_bound += excess;
    let lp_value = sol.value.max(dual_bound);
    let here: f64 = g_tilde.iter().zip(p_tilde).map(|(g, p)| g * p).sum();
    let gap = (lp_value - here).max(0.0);
    let norm = g_tilde.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let slack = n as f64 * f64::EPSILON * norm;
    Ok(Certificate {
        certified: f_tilde + gap + slack,
        lp_value,
        lp_primal: sol.value,
        lp_dual_bound: dual_bound,
        gap,
        slack,
        lp_residual,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::constraint::ConstraintSpec;
    use crate::patches::enumerate_patches;
    use crate::program::assemble_program;
    use crate::scheme::simple_scheme;

    fn program(name: &str, r: usize, s: usize, t: usize) -> ConcaveProgram {
        let spec = ConstraintSpec::load(name).unwrap();
        let ps = Arc::new(enumerate_patches(&spec, r, s, 0).unwrap());
        assemble_program(ps, &spec, &simple_scheme(r, s, t).unwrap()).unwrap()
    }

    #[test]
    fn free_shift_has_one_bit() {
        let prog = program("free", 2, 2, 1);
        let res = solve_concave(&prog, &SolveOptions::default()).unwrap();
        assert!((res.f_tilde - 1.0).abs() < 1e-6);
        assert!((res.certified - 1.0).abs() < 1e-6);
        assert_eq!(res.status, SolveStatus::Converged);
    }

    #[test]
    fn feasible_and_ordered() {
        for (name, r, s, t) in [("rll-1-inf", 2, 2, 1), ("rll-1-inf", 2, 3, 2), ("rll-0-2", 3, 3, 2), ("nib", 3, 3, 2)] {
            for refine_steps in [0, 400] {
                let prog = program(name, r, s, t);
                let opts = SolveOptions { refine_steps, max_iterations: 3000, ..SolveOptions::default() };
                let res = solve_concave(&prog, &opts).unwrap();
                assert!(res.residual <= 1e-9, "{name}");
                assert!(res.min_value >= 0.0);
                assert!(res.f_tilde <= res.certified);
                for t in &res.trace {
                    assert!(t.value <= t.bound);
                    assert!(t.gap >= 0.0);
                }
                for w in res.trace.windows(2) {
                    assert!(w[1].value >= w[0].value - 1e-12);
                }
            }
        }
    }

    #[test]
    fn refinement_agrees_with_plain_ascent() {
        let prog = program("rll-1-inf", 2, 3, 2);
        let plain = solve_concave(&prog, &SolveOptions { refine_steps: 0, max_iterations: 20000, ..SolveOptions::default() }).unwrap();
        let refined = solve_concave(&prog, &SolveOptions::default()).unwrap();
        assert!((plain.f_tilde - refined.f_tilde).abs() < 1e-6, "{} {}", plain.f_tilde, refined.f_tilde);
        assert!(refined.certified - refined.f_tilde < 1e-7);
    }

    #[test]
    fn deterministic_traces() {
        let prog = program("rll-0-2", 3, 3, 2);
        let opts = SolveOptions { refine_steps: 3, ..SolveOptions::default() };
        let a = solve_concave(&prog, &opts).unwrap();
        let b = solve_concave(&prog, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.p_tilde, b.p_tilde);
    }

    #[test]
    fn certify_at_uniform_free() {
        let prog = program("free", 2, 2, 1);
        let p = vec![1.0 / 16.0; 16];
        let f = prog.objective_value(&p).unwrap();
        let g = prog.objective_gradient(&p).unwrap();
        let c = certify_bound(&prog, &p, f, &g).unwrap();
        assert!((c.certified - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_options() {
        let prog = program("free", 2, 2, 1);
        let opts = SolveOptions { gap_tolerance: 0.0, ..SolveOptions::default() };
        assert!(solve_concave(&prog, &opts).is_err());
    }
}
