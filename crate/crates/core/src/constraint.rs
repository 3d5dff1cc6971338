//! 2-D constraints given by finite lists of forbidden windows.
//!
//! A configuration satisfies the constraint when no translate of a forbidden
//! pattern lies entirely inside its support with matching symbols. Builtins
//! cover the runlength-limited family, "no isolated bits" and the free shift.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{Cell, Configuration, IndexSet};

/// Side length used when checking declared symmetries at load time.
pub const DEFAULT_SYMMETRY_CHECK_SIZE: usize = 3;

/// Above this many configurations `verify_symmetry` samples instead of enumerating.
const EXHAUSTIVE_LIMIT: u64 = 1 << 22;
const SYMMETRY_SAMPLES: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ForbiddenWindow {
    pattern: Configuration,
}

impl ForbiddenWindow {
    pub fn new(pattern: Configuration) -> Result<Self> {
        if pattern.support().is_empty() {
            return Err(Error::InvalidConstraint("forbidden window with empty shape".into()));
        }
        // translate so the bounding box starts at the origin
        let (i0, j0, _, _) = pattern.support().bounding_box().unwrap();
        Ok(ForbiddenWindow { pattern: pattern.shift(-i0, -j0) })
    }

    pub fn horizontal(word: &[u8]) -> Result<Self> {
        ForbiddenWindow::new(Configuration::from_rows(&[word])?)
    }

    pub fn vertical(word: &[u8]) -> Result<Self> {
        let rows: Vec<[u8; 1]> = word.iter().map(|&v| [v]).collect();
        ForbiddenWindow::new(Configuration::from_rows(&rows)?)
    }

    pub fn shape(&self) -> &IndexSet {
        self.pattern.support()
    }

    pub fn pattern(&self) -> &Configuration {
        &self.pattern
    }

    pub fn height(&self) -> usize {
        let (_, _, i1, _) = self.shape().bounding_box().unwrap();
        i1 as usize + 1
    }

    pub fn width(&self) -> usize {
        let (_, _, _, j1) = self.shape().bounding_box().unwrap();
        j1 as usize + 1
    }

    /// Does the window, translated by `(di, dj)`, match `w`?
    fn matches_at(&self, w: &Configuration, di: i32, dj: i32) -> bool {
        self.pattern.iter().all(|((i, j), v)| w.get((i + di, j + dj)) == Some(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryFlag {
    /// Closed under horizontal and vertical mirror images.
    Reflect,
    Transpose,
    /// Closed under bitwise complement (binary alphabets only).
    Complement,
}

impl SymmetryFlag {
    pub const ALL: [SymmetryFlag; 3] =
        [SymmetryFlag::Reflect, SymmetryFlag::Transpose, SymmetryFlag::Complement];

    pub fn name(self) -> &'static str {
        match self {
            SymmetryFlag::Reflect => "reflect",
            SymmetryFlag::Transpose => "transpose",
            SymmetryFlag::Complement => "complement",
        }
    }
}

impl fmt::Display for SymmetryFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Symmetry {
    pub reflect: bool,
    pub transpose: bool,
    pub complement: bool,
}

impl Symmetry {
    pub const NONE: Symmetry = Symmetry { reflect: false, transpose: false, complement: false };
    pub const ALL: Symmetry = Symmetry { reflect: true, transpose: true, complement: true };

    pub fn has(self, flag: SymmetryFlag) -> bool {
        match flag {
            SymmetryFlag::Reflect => self.reflect,
            SymmetryFlag::Transpose => self.transpose,
            SymmetryFlag::Complement => self.complement,
        }
    }

    pub fn flags(self) -> Vec<SymmetryFlag> {
        SymmetryFlag::ALL.into_iter().filter(|&f| self.has(f)).collect()
    }

    pub fn from_flags(flags: &[SymmetryFlag]) -> Self {
        Symmetry {
            reflect: flags.contains(&SymmetryFlag::Reflect),
            transpose: flags.contains(&SymmetryFlag::Transpose),
            complement: flags.contains(&SymmetryFlag::Complement),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSpec {
    pub name: String,
    alphabet_size: u8,
    forbidden: Vec<ForbiddenWindow>,
    symmetry: Symmetry,
}

impl ConstraintSpec {
    pub fn new(
        name: impl Into<String>,
        alphabet_size: u8,
        forbidden: Vec<ForbiddenWindow>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(Error::InvalidConstraint(format!(
                "alphabet size must be at least 2, got {alphabet_size}"
            )));
        }
        if symmetry.complement && alphabet_size != 2 {
            return Err(Error::InvalidConstraint(
                "complement symmetry requires a binary alphabet".into(),
            ));
        }
        for w in &forbidden {
            if let Some(&symbol) = w.pattern.values().iter().find(|&&v| v >= alphabet_size) {
                return Err(Error::SymbolOutOfRange { symbol, alphabet_size });
            }
        }
        let mut forbidden = forbidden;
        forbidden.sort();
        forbidden.dedup();
        Ok(ConstraintSpec { name: name.into(), alphabet_size, forbidden, symmetry })
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    pub fn forbidden(&self) -> &[ForbiddenWindow] {
        &self.forbidden
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Height of the tallest forbidden window (0 when there are none).
    pub fn max_window_height(&self) -> usize {
        self.forbidden.iter().map(ForbiddenWindow::height).max().unwrap_or(0)
    }

    pub fn is_valid(&self, w: &Configuration) -> Result<bool> {
        if let Some(&symbol) = w.values().iter().find(|&&v| v >= self.alphabet_size) {
            return Err(Error::SymbolOutOfRange { symbol, alphabet_size: self.alphabet_size });
        }
        for window in &self.forbidden {
            let first = window.shape().cells()[0];
            for cell in w.support().iter() {
                if window.matches_at(w, cell.0 - first.0, cell.1 - first.1) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Deterministic text used for hashing; excludes the display name.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("alphabet={};", self.alphabet_size);
        for w in &self.forbidden {
            out.push_str("window=");
            for ((i, j), v) in w.pattern.iter() {
                out.push_str(&format!("({i},{j}):{v} "));
            }
            out.push(';');
        }
        for flag in self.symmetry.flags() {
            out.push_str(&format!("sym={flag};"));
        }
        out
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_text().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }

    /// Resolve a builtin name (`rll-d-k`, `nib`, `free`) or load a constraint file.
    pub fn load(source: &str) -> Result<Self> {
        match Builtin::parse(source) {
            Ok(b) => make_builtin(b),
            Err(parse_err) => {
                let path = Path::new(source);
                if path.exists() {
                    let spec = ConstraintFile::read(path)?.into_spec()?;
                    spec.require_symmetry(DEFAULT_SYMMETRY_CHECK_SIZE)?;
                    Ok(spec)
                } else {
                    Err(parse_err)
                }
            }
        }
    }

    /// Fail unless every declared flag passes [`verify_symmetry`] at size `m`.
    pub fn require_symmetry(&self, m: usize) -> Result<()> {
        let report = verify_symmetry(self, m)?;
        match report.checks.into_iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(check) => {
                let detail = match check.counterexample {
                    Some((a, b)) => format!("{a} and its image {b} differ in validity"),
                    None => String::new(),
                };
                Err(Error::SymmetryViolation { flag: check.flag.to_string(), detail })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// `(d, k)`-RLL; `k = None` means unbounded runs of zeros.
    Rll { d: usize, k: Option<usize> },
    Nib,
    Free,
}

impl Builtin {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "nib" => return Ok(Builtin::Nib),
            "free" | "unconstrained" => return Ok(Builtin::Free),
            _ => {}
        }
        let bad = || Error::Parse(format!("unknown constraint `{name}`"));
        let rest = name.strip_prefix("rll-").ok_or_else(bad)?;
        let (d, k) = rest.split_once('-').ok_or_else(bad)?;
        let d = d.parse().map_err(|_| bad())?;
        let k = match k {
            "inf" => None,
            k => Some(k.parse().map_err(|_| bad())?),
        };
        Ok(Builtin::Rll { d, k })
    }
}

pub fn make_builtin(builtin: Builtin) -> Result<ConstraintSpec> {
    match builtin {
        Builtin::Rll { d, k } => {
            if let Some(k) = k {
                if k <= d {
                    return Err(Error::InvalidConstraint(format!(
                        "rll needs d < k, got d={d} k={k}"
                    )));
                }
            }
            let mut words = Vec::new();
            for m in 0..d {
                let mut word = vec![1u8];
                word.extend(std::iter::repeat(0).take(m));
                word.push(1);
                words.push(word);
            }
            if let Some(k) = k {
                words.push(vec![0u8; k + 1]);
            }
            let mut forbidden = Vec::new();
            for word in &words {
                forbidden.push(ForbiddenWindow::horizontal(word)?);
                forbidden.push(ForbiddenWindow::vertical(word)?);
            }
            let name = match k {
                Some(k) => format!("rll-{d}-{k}"),
                None => format!("rll-{d}-inf"),
            };
            ConstraintSpec::new(
                name,
                2,
                forbidden,
                Symmetry { reflect: true, transpose: true, complement: false },
            )
        }
        Builtin::Nib => {
            let plus = |center: u8| {
                let other = 1 - center;
                Configuration::from_pairs([
                    ((0, 1), other),
                    ((1, 0), other),
                    ((1, 1), center),
                    ((1, 2), other),
                    ((2, 1), other),
                ])
                .and_then(ForbiddenWindow::new)
            };
            ConstraintSpec::new("nib", 2, vec![plus(0)?, plus(1)?], Symmetry::ALL)
        }
        Builtin::Free => ConstraintSpec::new("free", 2, Vec::new(), Symmetry::ALL),
    }
}

/// Mirror rows of a rectangular configuration with `rows` rows.
pub fn reflect_vertical(w: &Configuration, rows: usize) -> Configuration {
    let top = rows as i32 - 1;
    w.map_cells(|(i, j)| (top - i, j))
}

/// Mirror columns of a rectangular configuration with `cols` columns.
pub fn reflect_horizontal(w: &Configuration, cols: usize) -> Configuration {
    let right = cols as i32 - 1;
    w.map_cells(|(i, j)| (i, right - j))
}

pub fn transpose(w: &Configuration) -> Configuration {
    w.map_cells(|(i, j)| (j, i))
}

pub fn complement(w: &Configuration) -> Configuration {
    w.map_values(|v| 1 - v)
}

#[derive(Clone, Debug)]
pub struct FlagCheck {
    pub flag: SymmetryFlag,
    pub passed: bool,
    /// A configuration and its image that disagree on validity.
    pub counterexample: Option<(Configuration, Configuration)>,
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub size: usize,
    pub exhaustive: bool,
    pub checks: Vec<FlagCheck>,
}

impl SymmetryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Check every declared symmetry flag on all (or sampled) `k x k`
/// configurations for `1 <= k <= m`.
pub fn verify_symmetry(spec: &ConstraintSpec, m: usize) -> Result<SymmetryReport> {
    let q = spec.alphabet_size as u64;
    let mut exhaustive = true;
    let mut checks: Vec<FlagCheck> = spec
        .symmetry
        .flags()
        .into_iter()
        .map(|flag| FlagCheck { flag, passed: true, counterexample: None })
        .collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);

    for k in 1..=m {
        let cells = k * k;
        let total = q.checked_pow(cells as u32).filter(|&t| t <= EXHAUSTIVE_LIMIT);
        let support = IndexSet::rect(k, k);
        let mut visit = |values: Vec<u8>| -> Result<()> {
            let w = Configuration::new(support.clone(), values)?;
            let valid = spec.is_valid(&w)?;
            for check in checks.iter_mut().filter(|c| c.passed) {
                let images = match check.flag {
                    SymmetryFlag::Reflect => {
                        vec![reflect_horizontal(&w, k), reflect_vertical(&w, k)]
                    }
                    SymmetryFlag::Transpose => vec![transpose(&w)],
                    SymmetryFlag::Complement => vec![complement(&w)],
                };
                for image in images {
                    if spec.is_valid(&image)? != valid {
                        check.passed = false;
                        check.counterexample = Some((w.clone(), image));
                        break;
                    }
                }
            }
            Ok(())
        };
        match total {
            Some(total) => {
                for code in 0..total {
                    let mut values = vec![0u8; cells];
                    let mut c = code;
                    for slot in values.iter_mut().rev() {
                        *slot = (c % q) as u8;
                        c /= q;
                    }
                    visit(values)?;
                }
            }
            None => {
                exhaustive = false;
                for _ in 0..SYMMETRY_SAMPLES {
                    let values = (0..cells).map(|_| rng.gen_range(0..q) as u8).collect();
                    visit(values)?;
                }
            }
        }
    }
    Ok(SymmetryReport { size: m, exhaustive, checks })
}

/// Forbidden-window checker specialised to one rectangle.
///
/// Cells are numbered row-major. For every cell `k` the checker stores the
/// window placements that lie inside the rectangle and whose row-major last
/// cell is `k`, so a row-major fill can test each placement exactly once, as
/// soon as it is complete.
#[derive(Clone, Debug)]
pub struct RectChecker {
    rows: usize,
    cols: usize,
    ending_at: Vec<Vec<Vec<(usize, u8)>>>,
}

impl RectChecker {
    pub fn new(spec: &ConstraintSpec, rows: usize, cols: usize) -> Self {
        let mut ending_at = vec![Vec::new(); rows * cols];
        for window in spec.forbidden() {
            let (h, w) = (window.height(), window.width());
            if h > rows || w > cols {
                continue;
            }
            for di in 0..=(rows - h) {
                for dj in 0..=(cols - w) {
                    let placement: Vec<(usize, u8)> = window
                        .pattern()
                        .iter()
                        .map(|((i, j), v)| ((i as usize + di) * cols + j as usize + dj, v))
                        .collect();
                    let last = placement.iter().map(|&(k, _)| k).max().unwrap();
                    ending_at[last].push(placement);
                }
            }
        }
        RectChecker { rows, cols, ending_at }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// True if no placement completed at cell `k` matches `grid`.
    #[inline]
    pub fn ok_at(&self, grid: &[u8], k: usize) -> bool {
        self.ending_at[k]
            .iter()
            .all(|placement| placement.iter().any(|&(pos, v)| grid[pos] != v))
    }

    pub fn grid_is_valid(&self, grid: &[u8]) -> bool {
        (0..grid.len()).all(|k| self.ok_at(grid, k))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowEntry {
    cells: Vec<[i32; 2]>,
    values: Vec<u8>,
}

/// On-disk constraint description (TOML).
#[derive(Debug, Serialize, Deserialize)]
pub struct ConstraintFile {
    name: String,
    alphabet_size: u8,
    #[serde(default)]
    forbidden: Vec<WindowEntry>,
    #[serde(default)]
    symmetry: Vec<SymmetryFlag>,
}

impl ConstraintFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn into_spec(self) -> Result<ConstraintSpec> {
        let mut forbidden = Vec::with_capacity(self.forbidden.len());
        for entry in self.forbidden {
            if entry.cells.len() != entry.values.len() {
                return Err(Error::InvalidConstraint(format!(
                    "window has {} cells but {} values",
                    entry.cells.len(),
                    entry.values.len()
                )));
            }
            let pairs = entry.cells.iter().map(|&[i, j]| (i, j) as Cell).zip(entry.values);
            forbidden.push(ForbiddenWindow::new(Configuration::from_pairs(pairs)?)?);
        }
        let distinct: BTreeSet<SymmetryFlag> = self.symmetry.into_iter().collect();
        let flags: Vec<SymmetryFlag> = distinct.into_iter().collect();
        ConstraintSpec::new(self.name, self.alphabet_size, forbidden, Symmetry::from_flags(&flags))
    }

    pub fn from_spec(spec: &ConstraintSpec) -> Self {
        ConstraintFile {
            name: spec.name.clone(),
            alphabet_size: spec.alphabet_size,
            forbidden: spec
                .forbidden
                .iter()
                .map(|w| WindowEntry {
                    cells: w.shape().iter().map(|(i, j)| [i, j]).collect(),
                    values: w.pattern().values().to_vec(),
                })
                .collect(),
            symmetry: spec.symmetry.flags(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("constraint file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rll(d: usize, k: Option<usize>) -> ConstraintSpec {
        make_builtin(Builtin::Rll { d, k }).unwrap()
    }

    fn grid(rows: &[&[u8]]) -> Configuration {
        Configuration::from_rows(rows).unwrap()
    }

    #[test]
    fn builtin_window_counts() {
        let s = rll(1, None);
        assert_eq!(s.forbidden().len(), 2);
        assert!(s.forbidden().iter().all(|w| w.pattern().values() == [1, 1]));
        let s = rll(0, Some(2));
        assert_eq!(s.forbidden().len(), 2);
        assert!(s.forbidden().iter().all(|w| w.pattern().values() == [0, 0, 0]));
        assert_eq!(rll(2, Some(5)).forbidden().len(), 6);
        let nib = make_builtin(Builtin::Nib).unwrap();
        assert_eq!(nib.forbidden().len(), 2);
        assert!(nib.forbidden().iter().all(|w| w.shape().len() == 5));
        assert!(make_builtin(Builtin::Free).unwrap().forbidden().is_empty());
    }

    #[test]
    fn invalid_rll_parameters() {
        assert!(make_builtin(Builtin::Rll { d: 2, k: Some(2) }).is_err());
        assert!(make_builtin(Builtin::Rll { d: 3, k: Some(1) }).is_err());
    }

    #[test]
    fn parse_builtin_names() {
        assert_eq!(Builtin::parse("rll-1-inf").unwrap(), Builtin::Rll { d: 1, k: None });
        assert_eq!(Builtin::parse("rll-0-2").unwrap(), Builtin::Rll { d: 0, k: Some(2) });
        assert_eq!(Builtin::parse("nib").unwrap(), Builtin::Nib);
        assert_eq!(Builtin::parse("free").unwrap(), Builtin::Free);
        assert!(Builtin::parse("rll-x-2").is_err());
        assert!(Builtin::parse("square").is_err());
    }

    #[test]
    fn validity_examples() {
        let s = rll(1, None);
        assert!(!s.is_valid(&grid(&[&[1, 1]])).unwrap());
        assert!(s.is_valid(&grid(&[&[1, 0], &[0, 1]])).unwrap());
        assert!(!s.is_valid(&grid(&[&[1, 0], &[1, 0]])).unwrap());
        let nib = make_builtin(Builtin::Nib).unwrap();
        assert!(!nib.is_valid(&grid(&[&[0, 1, 0], &[1, 0, 1], &[0, 1, 0]])).unwrap());
        assert!(nib.is_valid(&grid(&[&[0, 1, 0], &[1, 1, 1], &[0, 1, 0]])).unwrap());
    }

    #[test]
    fn validity_on_irregular_support() {
        let s = rll(0, Some(2));
        let w = Configuration::from_pairs([((5, 5), 0), ((5, 6), 0), ((5, 7), 0)]).unwrap();
        assert!(!s.is_valid(&w).unwrap());
        let w = Configuration::from_pairs([((5, 5), 0), ((5, 6), 0), ((5, 8), 0)]).unwrap();
        assert!(s.is_valid(&w).unwrap());
    }

    #[test]
    fn symbol_out_of_range() {
        let s = rll(1, None);
        assert!(matches!(
            s.is_valid(&grid(&[&[2]])),
            Err(Error::SymbolOutOfRange { symbol: 2, alphabet_size: 2 })
        ));
    }

    #[test]
    fn nib_complement_exhaustive() {
        let nib = make_builtin(Builtin::Nib).unwrap();
        let report = verify_symmetry(&nib, 3).unwrap();
        assert!(report.exhaustive);
        assert!(report.all_passed());
    }

    #[test]
    fn rll02_transpose_exhaustive() {
        let report = verify_symmetry(&rll(0, Some(2)), 3).unwrap();
        assert!(report.all_passed());
    }

    #[test]
    fn wrong_complement_flag_is_caught() {
        let base = rll(1, None);
        let spec = ConstraintSpec::new(
            "bad",
            2,
            base.forbidden().to_vec(),
            Symmetry { reflect: false, transpose: false, complement: true },
        )
        .unwrap();
        let report = verify_symmetry(&spec, 2).unwrap();
        let check = &report.checks[0];
        assert!(!check.passed);
        let (a, b) = check.counterexample.clone().unwrap();
        assert_eq!(b, complement(&a));
        assert_ne!(spec.is_valid(&a).unwrap(), spec.is_valid(&b).unwrap());
        assert!(spec.require_symmetry(2).is_err());
    }

    #[test]
    fn complement_needs_binary() {
        let err = ConstraintSpec::new("x", 3, vec![], Symmetry::ALL).unwrap_err();
        assert!(matches!(err, Error::InvalidConstraint(_)));
    }

    #[test]
    fn builtins_pass_declared_symmetries() {
        for name in ["rll-1-inf", "rll-2-inf", "rll-0-2", "rll-1-3", "nib", "free"] {
            let spec = ConstraintSpec::load(name).unwrap();
            assert!(verify_symmetry(&spec, 3).unwrap().all_passed(), "{name}");
        }
    }

    #[test]
    fn rect_checker_agrees_with_is_valid() {
        let spec = make_builtin(Builtin::Nib).unwrap();
        let checker = RectChecker::new(&spec, 3, 3);
        for code in 0u32..512 {
            let values: Vec<u8> = (0..9).map(|b| ((code >> (8 - b)) & 1) as u8).collect();
            let w = Configuration::new(IndexSet::rect(3, 3), values.clone()).unwrap();
            assert_eq!(checker.grid_is_valid(&values), spec.is_valid(&w).unwrap());
        }
    }

    #[test]
    fn file_round_trip() {
        let spec = make_builtin(Builtin::Nib).unwrap();
        let text = ConstraintFile::from_spec(&spec).to_toml();
        let back = ConstraintFile::parse(&text).unwrap().into_spec().unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.digest(), spec.digest());
    }

    #[test]
    fn file_parse() {
        let text = r#"
            name = "no-11"
            alphabet_size = 2
            symmetry = ["reflect", "transpose"]
            [[forbidden]]
            cells = [[0, 0], [0, 1]]
            values = [1, 1]
            [[forbidden]]
            cells = [[0, 0], [1, 0]]
            values = [1, 1]
        "#;
        let spec = ConstraintFile::parse(text).unwrap().into_spec().unwrap();
        assert_eq!(spec.digest(), rll(1, None).digest());
        assert_eq!(spec.max_window_height(), 2);
    }
}
