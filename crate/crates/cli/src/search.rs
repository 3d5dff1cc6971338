//! Exhaustive search over small declared scheme grids.

use std::sync::Arc;
use std::time::Instant;

use capbound_core::solver::{solve_presolved, Presolved};
use capbound_core::{
    assemble_with_system, simple_scheme, validate_scheme, Error, LinearSystem, PatchSet, Result, Scheme,
    SchemeTerm, SolveOptions, SolveResult, SolveStatus, TotalOrder,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub scheme: Scheme,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub label: String,
    pub certified: f64,
    pub f_tilde: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub evaluations: Vec<Evaluation>,
    pub best: usize,
    pub result: SolveResult,
}

/// Parse one term written `ORDER[PERIOD]@ANCHORS`.
///
/// `PERIOD` lists the color rows separated by `/`, one digit per color, and
/// defaults to `1`. `ANCHORS` is a comma separated list of `i.j` cells, one
/// per color. The weight is left at 1.
pub fn parse_term(text: &str) -> Result<SchemeTerm> {
    let bad = |why: &str| Error::Parse(format!("term `{text}`: {why}"));
    let (head, anchors) = text.trim().split_once('@').ok_or_else(|| bad("missing `@`"))?;
    let (order, period) = match head.split_once('[') {
        Some((order, rest)) => {
            let body = rest.strip_suffix(']').ok_or_else(|| bad("unclosed `[`"))?;
            let rows = body
                .split('/')
                .map(|row| {
                    row.chars()
                        .map(|c| c.to_digit(10).filter(|&d| d > 0).map(|d| d as u8))
                        .collect::<Option<Vec<u8>>>()
                        .ok_or_else(|| bad("period colors must be digits 1-9"))
                })
                .collect::<Result<Vec<_>>>()?;
            (order, rows)
        }
        None => (head, vec![vec![1]]),
    };
    let order = TotalOrder::parse(order.trim())?;
    let anchors = anchors
        .split(',')
        .map(|cell| {
            let (i, j) = cell.trim().split_once('.').ok_or_else(|| bad("anchors are written i.j"))?;
            let i = i.parse().map_err(|_| bad("bad anchor row"))?;
            let j = j.parse().map_err(|_| bad("bad anchor column"))?;
            Ok((i, j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SchemeTerm { order, rho: 1.0, period, anchors })
}

pub fn parse_terms(text: &str) -> Result<Vec<SchemeTerm>> {
    let terms: Vec<SchemeTerm> =
        text.split(';').filter(|t| !t.trim().is_empty()).map(parse_term).collect::<Result<_>>()?;
    if terms.is_empty() {
        return Err(Error::Parse("empty term list".into()));
    }
    Ok(terms)
}

pub fn term_label(term: &SchemeTerm) -> String {
    let mut out = term.order.name().to_string();
    if term.period != [vec![1u8]] {
        let rows: Vec<String> =
            term.period.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect();
        out.push_str(&format!("[{}]", rows.join("/")));
    }
    let anchors: Vec<String> = term.anchors.iter().map(|(i, j)| format!("{i}.{j}")).collect();
    out.push('@');
    out.push_str(&anchors.join(","));
    out
}

/// All weight vectors of length `k` with entries in multiples of `step`
/// summing to one, in lexicographic order.
pub fn weight_grid(k: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Parse("weight grid needs at least one term".into()));
    }
    let n = (1.0 / step).round();
    if !(step > 0.0) || n < 1.0 || (n * step - 1.0).abs() > 1e-9 || n > 1000.0 {
        return Err(Error::Parse(format!("rho step {step} must divide 1 into at most 1000 parts")));
    }
    let n = n as usize;
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    fn fill(i: usize, left: usize, n: usize, counts: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(counts.iter().map(|&c| c as f64 / n as f64).collect());
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            fill(i + 1, left - c, n, counts, out);
        }
    }
    fill(0, n, n, &mut counts, &mut out);
    Ok(out)
}

/// Candidate list: simple anchors first (by `t`), then the weight grid over
/// `terms`. Schemes equal to an earlier candidate are skipped.
pub fn candidates(r: usize, s: usize, sweep_t: bool, terms: &[SchemeTerm], step: f64) -> Result<Vec<Candidate>> {
    let mut out: Vec<Candidate> = Vec::new();
    if sweep_t {
        for t in 0..s {
            out.push(Candidate { label: format!("t={t}"), scheme: simple_scheme(r, s, t)? });
        }
    }
    if !terms.is_empty() {
        for weights in weight_grid(terms.len(), step)? {
            let mut chosen = Vec::new();
            let mut parts = Vec::new();
            for (term, &w) in terms.iter().zip(&weights) {
                if w == 0.0 {
                    continue;
                }
                chosen.push(SchemeTerm { rho: w, ..term.clone() });
                parts.push(format!("{w} {}", term_label(term)));
            }
            let scheme = Scheme { r, s, terms: chosen };
            validate_scheme(&scheme).into_result()?;
            if out.iter().any(|c| c.scheme == scheme) {
                continue;
            }
            out.push(Candidate { label: parts.join(" + "), scheme });
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("search space is empty; pass --sweep-t and/or --terms".into()));
    }
    Ok(out)
}

/// Solve every candidate and keep the smallest certified bound; ties go to
/// the earlier candidate. With `prune`, a solve stops once its objective
/// reaches the best bound so far, since it can no longer win.
pub fn search(
    ps: &Arc<PatchSet>,
    system: &Arc<LinearSystem>,
    pre: &Presolved,
    candidates: &[Candidate],
    options: &SolveOptions,
    prune: bool,
    mut progress: impl FnMut(usize, &Evaluation),
) -> Result<SearchOutcome> {
    let mut evaluations = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, SolveResult)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let start = Instant::now();
        let program = assemble_with_system(ps.clone(), system.clone(), &c.scheme)?;
        let mut opts = options.clone();
        if prune {
            opts.cutoff = best.as_ref().map(|(_, b)| b.certified);
        }
        let result = solve_presolved(&program, pre, &opts)?;
        let eval = Evaluation {
            label: c.label.clone(),
            certified: result.certified,
            f_tilde: result.f_tilde,
            gap: result.gap,
            status: result.status,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(i, &eval);
        evaluations.push(eval);
        if best.as_ref().map_or(true, |(_, b)| result.certified < b.certified) {
            best = Some((i, result));
        }
    }
    let (best, result) = best.expect("candidate list is non-empty");
    Ok(SearchOutcome { evaluations, best, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_terms() {
        let t = parse_term("skip[12]@2.4,2.4").unwrap();
        assert_eq!(t.order, TotalOrder::Skip);
        assert_eq!(t.period, vec![vec![1, 2]]);
        assert_eq!(t.anchors, vec![(2, 4), (2, 4)]);
        assert_eq!(term_label(&t), "skip[12]@2.4,2.4");
        let t = parse_term("lex@2.3").unwrap();
        assert_eq!(t.period, vec![vec![1]]);
        assert_eq!(term_label(&t), "lex@2.3");
        let t = parse_term("irs[12/21]@1.0,1.1").unwrap();
        assert_eq!(t.period, vec![vec![1, 2], vec![2, 1]]);
        assert!(parse_term("lex").is_err());
        assert!(parse_term("lex[0]@1.1").is_err());
        assert!(parse_term("diag@1.1").is_err());
        assert!(parse_terms(" ; ").is_err());
    }

    #[test]
    fn grid_is_lexicographic_and_sums_to_one() {
        let g = weight_grid(2, 0.25).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], vec![0.0, 1.0]);
        assert_eq!(g[4], vec![1.0, 0.0]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let g3 = weight_grid(3, 0.5).unwrap();
        assert_eq!(g3.len(), 6);
        assert!(g3.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-15));
        assert!(weight_grid(2, 0.3).is_err());
        assert!(weight_grid(2, 0.0).is_err());
    }

    #[test]
    fn pure_grid_points_that_repeat_simple_anchors_are_dropped() {
        let terms = parse_terms("lex@1.0;lex@1.1").unwrap();
        let c = candidates(2, 3, true, &terms, 0.5).unwrap();
        let labels: Vec<&str> = c.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["t=0", "t=1", "t=2", "0.5 lex@1.0 + 0.5 lex@1.1"]);
    }

    #[test]
    fn empty_space_is_rejected() {
        assert!(candidates(2, 2, false, &[], 0.5).is_err());
    }
}
