//! Command-line front end: enumeration, assembly, solving and certification
//! of capacity bounds, plus stripe baselines and scheme searches.

pub mod args;
pub mod report;
pub mod search;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use capbound_core::constraint::DEFAULT_SYMMETRY_CHECK_SIZE;
use capbound_core::scheme::{load_scheme, parse_simple, scheme_digest, scheme_psi_sets, SchemeFile};
use capbound_core::solver::{presolve, solve_presolved, Presolved};
use capbound_core::stripe::StripeBound;
use capbound_core::{
    assemble_with_system, build_linear_system, enumerate_patches, simple_scheme, stripe_upper_bound,
    validate_scheme, ConstraintSpec, Error, LinearSystem, PatchCache, PatchSet, RowTag, Scheme, SolveOptions,
    SolveResult,
};
use clap::Parser;

use args::{Cli, Command, EnumerateArgs, ProblemArgs, SearchArgs, SolveArgs, SolverArgs, StripeArgs, ValidateArgs};
use report::{fixed, scientific, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const CACHE_ENV: &str = "CAPBOUND_CACHE";

/// A run that stopped early, with the stage it had reached.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(stage: &'static str, error: Error) -> Self {
        Failure { stage, code: exit_code(&error), message: error.to_string() }
    }

    fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Failure { stage, code: EXIT_CONFIG, message: message.into() }
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Infeasible => EXIT_INFEASIBLE,
        Error::Unbounded
        | Error::Numerical(_)
        | Error::NegativeValue { .. }
        | Error::InvalidDistribution(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

type Step<T> = std::result::Result<T, Failure>;

trait At<T> {
    fn at(self, stage: &'static str) -> Step<T>;
}

impl<T> At<T> for capbound_core::Result<T> {
    fn at(self, stage: &'static str) -> Step<T> {
        self.map_err(|e| Failure::new(stage, e))
    }
}

/// Cache directory: the flag wins, then the environment, else no cache.
pub fn resolve_cache_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (mut report, out, result) = match &cli.command {
        Command::Solve(a) => {
            let mut r = Report::new("solve", SOLVE_KEYS);
            let res = cmd_solve(a, &mut r, stdout);
            (r, a.out.clone(), res)
        }
        Command::Stripe(a) => {
            let mut r = Report::new("stripe", STRIPE_KEYS);
            let res = cmd_stripe(a, &mut r, stdout);
            (r, a.out.clone(), res)
        }
        Command::Search(a) => {
            let mut r = Report::new("search", SEARCH_KEYS);
            let res = cmd_search(a, &mut r, stdout);
            (r, a.out.clone(), res)
        }
        Command::Enumerate(a) => {
            let mut r = Report::new("enumerate", ENUMERATE_KEYS);
            let res = cmd_enumerate(a, &mut r, stdout);
            (r, a.out.clone(), res)
        }
        Command::ValidateScheme(a) => {
            let mut r = Report::new("validate-scheme", VALIDATE_KEYS);
            let res = cmd_validate(a, &mut r, stdout);
            (r, a.out.clone(), res)
        }
    };
    let code = match result {
        Ok(()) => {
            report.set("stage", "done");
            EXIT_OK
        }
        Err(f) => {
            report.set("stage", f.stage);
            report.set("error", f.message.clone());
            let _ = writeln!(stderr, "error during {}: {}", f.stage, f.message);
            f.code
        }
    };
    if let Some(path) = out {
        if let Err(e) = report.write(&path) {
            let _ = writeln!(stderr, "cannot write {}: {e}", path.display());
            return if code == EXIT_OK { EXIT_CONFIG } else { code };
        }
    }
    code
}

const SOLVE_KEYS: &[&str] = &[
    "constraint",
    "constraint_digest",
    "r",
    "s",
    "delta",
    "scheme",
    "scheme_digest",
    "patches",
    "rows_normalization",
    "rows_vertical",
    "rows_horizontal",
    "rows_reflect",
    "rows_transpose",
    "rows_complement",
    "orbits",
    "independent_rows",
    "null_dimension",
    "gap_tol",
    "max_iters",
    "seed",
    "status",
    "refine_steps",
    "iterations",
    "f_tilde",
    "gap",
    "lp_value",
    "residual",
    "min_probability",
    "clipped",
    "certified",
    "stripe_width",
    "stripe_bound",
];

const STRIPE_KEYS: &[&str] =
    &["constraint", "constraint_digest", "width", "height", "vertices", "edges", "eigenvalue", "residual", "stripe_bound"];

const SEARCH_KEYS: &[&str] = &[
    "constraint",
    "constraint_digest",
    "r",
    "s",
    "delta",
    "patches",
    "candidates",
    "best_index",
    "best_label",
    "best_scheme_digest",
    "status",
    "f_tilde",
    "gap",
    "certified",
];

const ENUMERATE_KEYS: &[&str] = &["constraint", "constraint_digest", "r", "s", "delta", "patches", "patch_key"];

const VALIDATE_KEYS: &[&str] = &["scheme", "r", "s", "terms", "valid", "violations", "scheme_digest"];

struct Setup {
    spec: ConstraintSpec,
    ps: Arc<PatchSet>,
}

fn load_constraint(source: &str, report: &mut Report) -> Step<ConstraintSpec> {
    let spec = ConstraintSpec::load(source).at("config")?;
    spec.require_symmetry(DEFAULT_SYMMETRY_CHECK_SIZE).at("config")?;
    report.set("constraint", source);
    report.set("constraint_digest", spec.digest_hex());
    Ok(spec)
}

fn check_problem(p: &ProblemArgs) -> Step<()> {
    if p.r == 0 || p.s == 0 {
        return Err(Failure::config("config", format!("patch must be non-empty, got {}x{}", p.r, p.s)));
    }
    if p.r * p.s > 64 {
        return Err(Failure::config("config", format!("patch {}x{} is too large", p.r, p.s)));
    }
    Ok(())
}

fn enumerate(p: &ProblemArgs, report: &mut Report, out: &mut dyn Write) -> Step<Setup> {
    check_problem(p)?;
    let spec = load_constraint(&p.constraint, report)?;
    report.count("r", p.r);
    report.count("s", p.s);
    report.count("delta", p.delta);
    let start = Instant::now();
    let (ps, origin) = match resolve_cache_dir(p.cache_dir.as_deref()) {
        Some(dir) => {
            let (ps, hit) = PatchCache::new(&dir).load_or_enumerate(&spec, p.r, p.s, p.delta).at("enumerate")?;
            (ps, if hit { format!("cache hit in {}", dir.display()) } else { format!("cached in {}", dir.display()) })
        }
        None => (enumerate_patches(&spec, p.r, p.s, p.delta).at("enumerate")?, "no cache".to_string()),
    };
    report.count("patches", ps.len());
    let _ = writeln!(
        out,
        "patches      {} x {}, delta {}: {} admissible ({origin}, {:.2} s)",
        p.r,
        p.s,
        p.delta,
        ps.len(),
        start.elapsed().as_secs_f64()
    );
    if ps.is_empty() {
        return Err(Failure { stage: "enumerate", code: EXIT_INFEASIBLE, message: "patch set is empty".into() });
    }
    Ok(Setup { spec, ps: Arc::new(ps) })
}

fn solve_options(a: &SolverArgs) -> Step<SolveOptions> {
    if !(a.gap_tol > 0.0) || !a.gap_tol.is_finite() {
        return Err(Failure::config("config", format!("--gap-tol must be positive, got {}", a.gap_tol)));
    }
    Ok(SolveOptions {
        max_iterations: a.max_iters,
        gap_tolerance: a.gap_tol,
        seed: a.seed,
        refine_steps: a.refine_steps,
        away_steps: !a.no_away_steps,
        ..SolveOptions::default()
    })
}

fn reduce(
    setup: &Setup,
    report: &mut Report,
    out: &mut dyn Write,
) -> Step<(Arc<LinearSystem>, Presolved)> {
    let system = Arc::new(build_linear_system(&setup.ps, setup.spec.symmetry()));
    let counts: Vec<String> =
        RowTag::ALL.iter().map(|&t| format!("{} {}", t.name(), system.count(t))).collect();
    for tag in RowTag::ALL {
        let key = match tag {
            RowTag::Normalization => "rows_normalization",
            RowTag::Vertical => "rows_vertical",
            RowTag::Horizontal => "rows_horizontal",
            RowTag::Reflect => "rows_reflect",
            RowTag::Transpose => "rows_transpose",
            RowTag::Complement => "rows_complement",
        };
        report.count(key, system.count(tag));
    }
    let _ = writeln!(out, "rows         {}", counts.join(", "));
    let start = Instant::now();
    let pre = presolve(&system).at("presolve")?;
    report.count("orbits", pre.num_orbits());
    report.count("independent_rows", pre.num_rows());
    report.count("null_dimension", pre.null_basis().ncols());
    let _ = writeln!(
        out,
        "reduction    {} orbits, {} independent rows, null space {} ({:.2} s)",
        pre.num_orbits(),
        pre.num_rows(),
        pre.null_basis().ncols(),
        start.elapsed().as_secs_f64()
    );
    Ok((system, pre))
}

fn record_result(result: &SolveResult, report: &mut Report) {
    report.set("status", result.status.name());
    report.count("refine_steps", result.refine_steps);
    report.count("iterations", result.iterations);
    report.number("f_tilde", result.f_tilde);
    report.number("gap", result.gap);
    report.number("lp_value", result.certificate.lp_value);
    report.set("residual", scientific(result.residual));
    report.set("min_probability", scientific(result.min_value));
    report.count("clipped", result.clipped);
    report.number("certified", result.certified);
}

fn print_result(result: &SolveResult, seconds: f64, out: &mut dyn Write) {
    let _ = writeln!(
        out,
        "solver       {}, {} barrier steps, {} gradient iterations ({seconds:.2} s)",
        result.status.name(),
        result.refine_steps,
        result.iterations
    );
    let _ = writeln!(out, "f_tilde      {}", fixed(result.f_tilde));
    let _ = writeln!(out, "gap          {}", scientific(result.gap));
    let _ = writeln!(out, "residual     {}", scientific(result.residual));
    let _ = writeln!(out, "certified    {}", fixed(result.certified));
}

fn cmd_solve(a: &SolveArgs, report: &mut Report, out: &mut dyn Write) -> Step<()> {
    let options = solve_options(&a.solver)?;
    report.set("gap_tol", scientific(options.gap_tolerance));
    report.count("max_iters", options.max_iterations);
    report.set("seed", options.seed.to_string());
    let (scheme, label): (Scheme, String) = match (&a.scheme, &a.simple) {
        (Some(path), _) => (load_scheme(path).at("config")?, path.display().to_string()),
        (None, Some(simple)) => {
            let t = parse_simple(simple).at("config")?;
            (simple_scheme(a.problem.r, a.problem.s, t).at("config")?, format!("simple t={t}"))
        }
        (None, None) => return Err(Failure::config("config", "one of --scheme or --simple is required")),
    };
    if scheme.r != a.problem.r || scheme.s != a.problem.s {
        return Err(Failure::config(
            "config",
            format!("scheme is for {}x{} patches, not {}x{}", scheme.r, scheme.s, a.problem.r, a.problem.s),
        ));
    }
    validate_scheme(&scheme).into_result().at("config")?;
    report.set("scheme", label);
    report.set("scheme_digest", scheme_digest(&scheme).at("config")?);
    if a.stripe_width == Some(0) {
        return Err(Failure::config("config", "--stripe-width must be positive"));
    }

    let setup = enumerate(&a.problem, report, out)?;
    let (system, pre) = reduce(&setup, report, out)?;
    let program = assemble_with_system(setup.ps.clone(), system, &scheme).at("assemble")?;
    let start = Instant::now();
    let result = solve_presolved(&program, &pre, &options).at("solve")?;
    record_result(&result, report);
    print_result(&result, start.elapsed().as_secs_f64(), out);
    if let Some(width) = a.stripe_width {
        let stripe = stripe_upper_bound(&setup.spec, width).at("stripe")?;
        report.count("stripe_width", width);
        report.number("stripe_bound", stripe.bound);
        let _ = writeln!(out, "stripe       width {width}: {}", fixed(stripe.bound));
    }
    let _ = writeln!(out, "upper bound  {}", fixed(result.certified));
    Ok(())
}

fn record_stripe(b: &StripeBound, report: &mut Report) {
    report.count("width", b.width);
    report.count("height", b.height);
    report.count("vertices", b.vertices);
    report.count("edges", b.edges);
    report.number("eigenvalue", b.perron.eigenvalue);
    report.set("residual", scientific(b.perron.residual));
    report.number("stripe_bound", b.bound);
}

fn cmd_stripe(a: &StripeArgs, report: &mut Report, out: &mut dyn Write) -> Step<()> {
    if a.width == 0 {
        return Err(Failure::config("config", "--width must be positive"));
    }
    let spec = load_constraint(&a.constraint, report)?;
    let start = Instant::now();
    let b = stripe_upper_bound(&spec, a.width).at("stripe")?;
    record_stripe(&b, report);
    let _ = writeln!(
        out,
        "graph        width {}, height {}: {} vertices, {} edges",
        b.width, b.height, b.vertices, b.edges
    );
    let _ = writeln!(
        out,
        "eigenvalue   {} (residual {}, {} iterations, {:.3} s)",
        fixed(b.perron.eigenvalue),
        scientific(b.perron.residual),
        b.perron.iterations,
        start.elapsed().as_secs_f64()
    );
    let _ = writeln!(out, "upper bound  {}", fixed(b.bound));
    Ok(())
}

fn cmd_search(a: &SearchArgs, report: &mut Report, out: &mut dyn Write) -> Step<()> {
    let options = solve_options(&a.solver)?;
    let terms = match &a.terms {
        Some(t) => search::parse_terms(t).at("config")?,
        None => Vec::new(),
    };
    let candidates =
        search::candidates(a.problem.r, a.problem.s, a.sweep_t, &terms, a.rho_step).at("config")?;
    report.count("candidates", candidates.len());
    let setup = enumerate(&a.problem, report, out)?;
    let (system, pre) = reduce(&setup, report, out)?;
    let found = search::search(&setup.ps, &system, &pre, &candidates, &options, !a.no_prune, |i, e| {
        let _ = writeln!(
            out,
            "candidate {:>3}  {:<40} certified {}  ({}, {:.1} s)",
            i,
            e.label,
            fixed(e.certified),
            e.status.name(),
            e.seconds
        );
    })
    .at("search")?;
    let best = &candidates[found.best];
    report.count("best_index", found.best);
    report.set("best_label", best.label.clone());
    report.set("best_scheme_digest", scheme_digest(&best.scheme).at("search")?);
    report.set("status", found.result.status.name());
    report.number("f_tilde", found.result.f_tilde);
    report.number("gap", found.result.gap);
    report.number("certified", found.result.certified);
    if let Some(path) = &a.scheme_out {
        let text = SchemeFile::from_scheme(&best.scheme, false).at("search")?.to_toml();
        std::fs::write(path, text).map_err(|e| Failure::new("search", e.into()))?;
    }
    let _ = writeln!(out, "best         {} ({})", best.label, found.best);
    let _ = writeln!(out, "upper bound  {}", fixed(found.result.certified));
    Ok(())
}

fn cmd_enumerate(a: &EnumerateArgs, report: &mut Report, out: &mut dyn Write) -> Step<()> {
    let setup = enumerate(&a.problem, report, out)?;
    let key: String = setup.ps.key().iter().map(|b| format!("{b:02x}")).collect();
    report.set("patch_key", key);
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, report: &mut Report, out: &mut dyn Write) -> Step<()> {
    report.set("scheme", a.scheme.display().to_string());
    let file = SchemeFile::read(&a.scheme).at("config")?;
    let scheme = Scheme {
        r: file.r,
        s: file.s,
        terms: file
            .terms
            .iter()
            .map(|t| capbound_core::SchemeTerm {
                order: t.order,
                rho: t.rho,
                period: t.period.clone(),
                anchors: t.anchors.iter().map(|&[i, j]| (i, j)).collect(),
            })
            .collect(),
    };
    report.count("r", scheme.r);
    report.count("s", scheme.s);
    report.count("terms", scheme.terms.len());
    let check = validate_scheme(&scheme);
    report.count("violations", check.violations.len());
    for v in &check.violations {
        let _ = writeln!(out, "violation    {v}");
    }
    if !check.is_valid() {
        report.set("valid", "false");
        let first = check.violations[0].to_string();
        return Err(Failure::config("validate", first));
    }
    // explicit context sets must also agree with the derived ones
    file.into_scheme().at("validate")?;
    report.set("valid", "true");
    report.set("scheme_digest", scheme_digest(&scheme).at("validate")?);
    for set in scheme_psi_sets(&scheme).at("validate")? {
        let cells: Vec<String> = set.psi.iter().map(|(i, j)| format!("({i},{j})")).collect();
        let _ = writeln!(
            out,
            "term {} color {} anchor ({},{}): context {}",
            set.term,
            set.color,
            set.anchor.0,
            set.anchor.1,
            cells.join(" ")
        );
    }
    let _ = writeln!(out, "scheme is valid");
    Ok(())
}
