//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use capbound::report::parse_results;
use capbound_core::scheme::scheme_psi_sets;
use capbound_core::solver::{presolve, solve_presolved, Presolved};
use capbound_core::{
    assemble_with_system, build_linear_system, certify_bound, enumerate_patches, simple_scheme,
    stripe_upper_bound, ConcaveProgram, ConstraintSpec, LinearSystem, PatchSet, Scheme, SolveOptions,
};

const BUILTINS: [&str; 8] = ["free", "nib", "rll-1-inf", "rll-2-inf", "rll-0-1", "rll-0-2", "rll-1-2", "rll-1-3"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Small deterministic generator so the checks need no extra dependencies.
struct Lcg(u64);

impl Lcg {
    fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

/// Run the command line in-process and return its results file.
fn cli(args: &[&str]) -> Result<HashMap<String, String>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("results.txt");
    let mut argv = vec!["capbound"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = capbound::run(argv, &mut stdout, &mut stderr);
    if code != 0 {
        return Err(format!("exit {code}: {}", String::from_utf8_lossy(&stderr).trim()));
    }
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    Ok(parse_results(&text).into_iter().collect())
}

fn number(r: &HashMap<String, String>, key: &str) -> f64 {
    r.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

struct Instance {
    ps: Arc<PatchSet>,
    system: Arc<LinearSystem>,
    pre: Presolved,
}

fn instance(name: &str, r: usize, s: usize) -> Instance {
    let spec = ConstraintSpec::load(name).unwrap();
    let ps = Arc::new(enumerate_patches(&spec, r, s, 0).unwrap());
    let system = Arc::new(build_linear_system(&ps, spec.symmetry()));
    let pre = presolve(&system).unwrap();
    Instance { ps, system, pre }
}

impl Instance {
    fn program(&self, scheme: &Scheme) -> ConcaveProgram {
        assemble_with_system(self.ps.clone(), self.system.clone(), scheme).unwrap()
    }

    /// Feasible point: the interior point pushed a fraction `frac` of the
    /// way to the boundary along a random null-space direction.
    fn random_feasible(&self, rng: &mut Lcg, frac: f64) -> Vec<f64> {
        let z = self.pre.null_basis();
        let mut q = self.pre.interior().to_vec();
        if z.ncols() > 0 {
            let u: Vec<f64> = (0..z.ncols()).map(|_| rng.symmetric()).collect();
            let dir: Vec<f64> = (0..z.nrows()).map(|a| (0..z.ncols()).map(|c| z[(a, c)] * u[c]).sum()).collect();
            let mut step = f64::INFINITY;
            for (a, &o) in self.pre.active().iter().enumerate() {
                if dir[a] < 0.0 {
                    step = step.min(q[o] / -dir[a]);
                }
            }
            if step.is_finite() {
                for (a, &o) in self.pre.active().iter().enumerate() {
                    q[o] += frac * step * dir[a];
                }
            }
        }
        self.pre.expand(&q)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    match cli(&["solve", "--constraint", "free", "--r", "2", "--s", "2", "--simple", "t=1"]) {
        Ok(r) => {
            let c = number(&r, "certified");
            let secs = start.elapsed().as_secs_f64();
            outcome((c - 1.0).abs() <= 1e-6 && secs < 5.0, format!("certified {c:.9} in {secs:.2} s"))
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let args =
        ["search", "--constraint", "rll-0-2", "--r", "3", "--s", "5", "--sweep-t", "--terms", "lex@2.2;lex@2.3", "--rho-step", "0.25"];
    match cli(&args) {
        Ok(r) => {
            let c = number(&r, "certified");
            let elapsed = start.elapsed();
            let pass = (0.816007..=0.8172).contains(&c)
                && (c - 0.816731).abs() <= 5e-4
                && elapsed < Duration::from_secs(15 * 60);
            outcome(
                pass,
                format!(
                    "certified {c:.9} by `{}` in {:.0} s",
                    r.get("best_label").map_or("?", String::as_str),
                    elapsed.as_secs_f64()
                ),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let scheme = data("nib_skip.toml");
    match cli(&["solve", "--constraint", "nib", "--r", "3", "--s", "4", "--scheme", &scheme]) {
        Ok(r) => {
            let c = number(&r, "certified");
            let elapsed = start.elapsed();
            let pass = (0.922640..=0.9257).contains(&c)
                && (c - 0.92472).abs() <= 1e-3
                && elapsed < Duration::from_secs(10 * 60);
            outcome(pass, format!("certified {c:.9} in {:.1} s", elapsed.as_secs_f64()))
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let args = [
        "search", "--constraint", "rll-2-inf", "--r", "3", "--s", "8", "--terms", "lex@2.4;skip[12]@2.4,2.4", "--rho-step",
        "0.25",
    ];
    match cli(&args) {
        Ok(r) => {
            let c = number(&r, "certified");
            let elapsed = start.elapsed();
            let pass = (0.444202..=0.4470).contains(&c) && elapsed < Duration::from_secs(60 * 60);
            let stretch = if c <= 0.4457 + 1e-3 { "stretch target met" } else { "stretch target missed" };
            outcome(
                pass,
                format!(
                    "certified {c:.9} by `{}` in {:.0} s, {stretch}",
                    r.get("best_label").map_or("?", String::as_str),
                    elapsed.as_secs_f64()
                ),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_5() -> Outcome {
    let options = SolveOptions::default();
    let mut mu: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut needed: HashSet<(usize, usize)> = HashSet::new();
    for r in 2..=3 {
        for s in 2..=4 {
            needed.extend([(r, s), (r + 1, s), (r, s + 1)]);
        }
    }
    let mut sizes: Vec<_> = needed.into_iter().collect();
    sizes.sort_unstable();
    for (r, s) in sizes {
        let inst = instance("rll-1-inf", r, s);
        for t in 0..s {
            let program = inst.program(&simple_scheme(r, s, t).unwrap());
            match solve_presolved(&program, &inst.pre, &options) {
                Ok(res) => {
                    mu.insert((r, s, t), res.certified);
                }
                Err(e) => return outcome(false, format!("solve {r}x{s} t={t}: {e}")),
            }
        }
    }
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for r in 2..=3 {
        for s in 2..=4 {
            for t in 0..s {
                let here = mu[&(r, s, t)];
                let pairs = [(r + 1, s, t), (r, s + 1, t), (r, s + 1, t + 1)];
                for other in pairs {
                    let m = mu[&other];
                    checked += 1;
                    worst = worst.min(here - m);
                    if here < m - 1e-6 {
                        failures.push(format!("mu{:?}={here:.9} < mu{other:?}={m:.9}", (r, s, t)));
                    }
                }
            }
        }
    }
    if failures.is_empty() {
        outcome(true, format!("{checked} inequalities, smallest margin {worst:.3e}"))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn criterion_6() -> Outcome {
    let mut rng = Lcg(6);
    let mut points = 0;
    let mut early = 0;
    let mut failures = Vec::new();
    for name in BUILTINS {
        for (r, s) in [(2, 2), (2, 3)] {
            let inst = instance(name, r, s);
            for t in 0..s {
                let program = inst.program(&simple_scheme(r, s, t).unwrap());
                let best = solve_presolved(&program, &inst.pre, &SolveOptions::default()).unwrap();
                let (opt_lo, opt_hi) = (best.f_tilde, best.certified);
                let mut check = |label: String, f: f64, certified: f64, gap: f64, slack: f64| {
                    let sound = certified >= f && certified >= opt_lo - 1e-9;
                    let tight = certified - opt_lo <= gap + slack + (opt_hi - opt_lo) + 1e-9;
                    if !(sound && tight) {
                        failures.push(format!("{name} {r}x{s} t={t} {label}: f={f} certified={certified} optimum={opt_lo}"));
                    }
                };
                for _ in 0..3 {
                    let frac = 0.95 * rng.uniform();
                    let p = inst.random_feasible(&mut rng, frac);
                    let f = program.objective_value(&p).unwrap();
                    let g = program.objective_gradient(&p).unwrap();
                    let cert = certify_bound(&program, &p, f, &g).unwrap();
                    check("random point".into(), f, cert.certified, cert.gap, cert.slack);
                    points += 1;
                }
                for (refine_steps, max_iterations) in [(0, 0), (0, 2), (2, 0), (3, 3)] {
                    let options = SolveOptions { refine_steps, max_iterations, ..SolveOptions::default() };
                    let res = solve_presolved(&program, &inst.pre, &options).unwrap();
                    check(
                        format!("early stop {refine_steps}/{max_iterations}"),
                        res.f_tilde,
                        res.certified,
                        res.gap,
                        res.certificate.slack,
                    );
                    early += 1;
                }
            }
        }
    }
    let pass = failures.is_empty() && points >= 100;
    let detail = if failures.is_empty() {
        format!("{points} random points and {early} early-stopped solves")
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

/// Validity straight from the definitions of the builtin constraints.
fn oracle_valid(name: &str, grid: &[u8], r: usize, s: usize) -> bool {
    let at = |i: usize, j: usize| grid[i * s + j];
    let line_ok = |line: &[u8], d: usize, k: Option<usize>| {
        let mut run = 0;
        let mut seen_one = false;
        for &x in line {
            if x == 0 {
                run += 1;
                if k.is_some_and(|k| run > k) {
                    return false;
                }
            } else {
                if seen_one && run < d {
                    return false;
                }
                seen_one = true;
                run = 0;
            }
        }
        true
    };
    match name {
        "free" => true,
        "nib" => {
            for i in 1..r.saturating_sub(1) {
                for j in 1..s.saturating_sub(1) {
                    let c = at(i, j);
                    if [at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)].iter().all(|&n| n != c) {
                        return false;
                    }
                }
            }
            true
        }
        _ => {
            let mut parts = name.trim_start_matches("rll-").split('-');
            let d: usize = parts.next().unwrap().parse().unwrap();
            let k = match parts.next().unwrap() {
                "inf" => None,
                k => Some(k.parse().unwrap()),
            };
            (0..r).all(|i| line_ok(&(0..s).map(|j| at(i, j)).collect::<Vec<_>>(), d, k))
                && (0..s).all(|j| line_ok(&(0..r).map(|i| at(i, j)).collect::<Vec<_>>(), d, k))
        }
    }
}

/// Objective by direct summation over patches, independent of the program's
/// marginal maps.
fn direct_objective(ps: &PatchSet, scheme: &Scheme, p: &[f64]) -> f64 {
    let s = ps.cols();
    let mut total = 0.0;
    for set in scheme_psi_sets(scheme).unwrap() {
        let term = &scheme.terms[set.term];
        let weight = term.rho / term.colors() as f64;
        let mut py: HashMap<Vec<u8>, f64> = HashMap::new();
        let mut pz: HashMap<Vec<u8>, f64> = HashMap::new();
        for (x, patch) in ps.iter().enumerate() {
            let read = |cells: &mut dyn Iterator<Item = (i32, i32)>| -> Vec<u8> {
                cells.map(|(i, j)| patch[i as usize * s + j as usize]).collect()
            };
            *py.entry(read(&mut set.upsilon.iter())).or_default() += p[x];
            *pz.entry(read(&mut set.psi.iter())).or_default() += p[x];
        }
        let plogp = |m: &HashMap<Vec<u8>, f64>| m.values().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
        total += weight * (plogp(&pz) - plogp(&py));
    }
    total
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut sets = 0;
    for name in BUILTINS {
        let spec = ConstraintSpec::load(name).unwrap();
        for r in 1..=3 {
            for s in 1..=3 {
                let n = r * s;
                let brute: HashSet<Vec<u8>> = (0u32..1 << n)
                    .map(|bits| (0..n).map(|k| ((bits >> (n - 1 - k)) & 1) as u8).collect::<Vec<u8>>())
                    .filter(|g| oracle_valid(name, g, r, s))
                    .collect();
                let ps = enumerate_patches(&spec, r, s, 0).unwrap();
                let got: HashSet<Vec<u8>> = ps.iter().map(<[u8]>::to_vec).collect();
                if got.len() != ps.len() || got != brute {
                    failures.push(format!("{name} {r}x{s}: {} patches, oracle {}", ps.len(), brute.len()));
                }
                sets += 1;
            }
        }
    }
    let mut rng = Lcg(7);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let skip = Scheme {
        r: 3,
        s: 3,
        terms: vec![capbound_core::SchemeTerm {
            order: capbound_core::TotalOrder::Skip,
            rho: 1.0,
            period: vec![vec![1, 2]],
            anchors: vec![(2, 1), (2, 1)],
        }],
    };
    for (k, name) in BUILTINS.iter().enumerate() {
        let inst = instance(name, 3, 3);
        let schemes = [simple_scheme(3, 3, k % 3).unwrap(), skip.clone()];
        for scheme in &schemes {
            let program = inst.program(scheme);
            for _ in 0..4 {
                let raw: Vec<f64> = (0..inst.ps.len()).map(|_| rng.uniform()).collect();
                let total: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
                let a = program.objective_value(&p).unwrap();
                let b = direct_objective(&inst.ps, scheme, &p);
                worst = worst.max((a - b).abs());
                points += 1;
            }
        }
    }
    let pass = failures.is_empty() && worst <= 1e-12 && points >= 50;
    let detail = if failures.is_empty() {
        format!("{sets} patch sets match brute force; {points} points, max objective difference {worst:.1e}")
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn criterion_8() -> Outcome {
    let inst = instance("rll-1-inf", 2, 2);
    let mut rng = Lcg(8);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let program = inst.program(&simple_scheme(2, 2, k % 2).unwrap());
        let raw: Vec<f64> = (0..inst.ps.len()).map(|_| 0.2 + rng.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let g = program.objective_gradient(&p).unwrap();
        for i in 0..p.len() {
            let (mut up, mut down) = (p.clone(), p.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (program.objective_value(&up).unwrap() - program.objective_value(&down).unwrap()) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs()).max(1e-3);
            worst = worst.max((g[i] - fd).abs() / scale);
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over 20 points"))
}

fn criterion_9() -> Outcome {
    let mut rng = Lcg(9);
    let mut segments = 0;
    let mut worst = f64::INFINITY;
    while segments < 100 {
        for name in BUILTINS {
            let inst = instance(name, 2, 3);
            for t in 0..3 {
                let program = inst.program(&simple_scheme(2, 3, t).unwrap());
                let (frac_a, frac_b) = (rng.uniform(), rng.uniform());
                let a = inst.random_feasible(&mut rng, frac_a);
                let b = inst.random_feasible(&mut rng, frac_b);
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let fa = program.objective_value(&a).unwrap();
                let fb = program.objective_value(&b).unwrap();
                let fm = program.objective_value(&mid).unwrap();
                worst = worst.min(fm - 0.5 * (fa + fb));
                segments += 1;
            }
        }
    }
    outcome(worst >= -1e-9, format!("{segments} segments, smallest midpoint excess {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let mut slowest: f64 = 0.0;
    let mut check = |name: &str, width: usize, expect: f64, tol: f64| {
        let start = Instant::now();
        let b = stripe_upper_bound(&ConstraintSpec::load(name).unwrap(), width).unwrap();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        if (b.bound - expect).abs() > tol || secs >= 1.0 {
            failures.push(format!("{name} width {width}: {} in {secs:.2} s", b.bound));
        }
    };
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).log2();
    // real root of x^3 = x^2 + x + 1
    let mut x: f64 = 1.8;
    for _ in 0..100 {
        x -= (x * x * x - x * x - x - 1.0) / (3.0 * x * x - 2.0 * x - 1.0);
    }
    let tribonacci = x.log2();
    check("rll-1-inf", 1, golden, 1e-6);
    check("rll-0-2", 1, tribonacci, 1e-6);
    for width in 1..=8 {
        check("free", width, 1.0, 0.0);
    }
    let detail = if failures.is_empty() {
        format!("golden {golden:.6}, tribonacci {tribonacci:.6}, free exact; slowest {slowest:.3} s")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("free-shift sanity", criterion_1),
        ("(0,2)-RLL 3x5 search", criterion_2),
        ("n.i.b. 3x4 skip scheme", criterion_3),
        ("(2,inf)-RLL 3x8 lex+skip search", criterion_4),
        ("monotonicity in r, s, t", criterion_5),
        ("certification soundness", criterion_6),
        ("oracle equivalence", criterion_7),
        ("gradient check", criterion_8),
        ("concavity check", criterion_9),
        ("stripe baselines", criterion_10),
    ];
    // the long searches run alongside the quick checks
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|&(_, f)| scope.spawn(f)).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|e| {
                    let msg = e
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panicked".into());
                    outcome(false, msg)
                })
            })
            .collect()
    });
    let mut failed = 0;
    for (k, ((name, _), o)) in criteria.iter().zip(&outcomes).enumerate() {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}  {name}: {}", k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
