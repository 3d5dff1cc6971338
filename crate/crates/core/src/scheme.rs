//! Bounding schemes: weighted terms, each a scan order with a periodic
//! coloring and one anchor per color.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cell, IndexSet, TotalOrder};

pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeTerm {
    pub order: TotalOrder,
    pub rho: f64,
    /// Color matrix repeated periodically over the plane; entries are 1-based colors.
    pub period: Vec<Vec<u8>>,
    /// Anchor of color `g + 1` at index `g`.
    pub anchors: Vec<Cell>,
}

impl SchemeTerm {
    pub fn colors(&self) -> usize {
        self.anchors.len()
    }

    pub fn period_dims(&self) -> (usize, usize) {
        (self.period.len(), self.period.first().map_or(0, Vec::len))
    }

    pub fn color_at(&self, (i, j): Cell) -> u8 {
        let (pi, pj) = self.period_dims();
        self.period[i.rem_euclid(pi as i32) as usize][j.rem_euclid(pj as i32) as usize]
    }

    /// First cell of the period (row-major) carrying `color`.
    pub fn representative(&self, color: u8) -> Option<Cell> {
        self.period.iter().enumerate().find_map(|(i, row)| {
            row.iter().position(|&c| c == color).map(|j| (i as i32, j as i32))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scheme {
    pub r: usize,
    pub s: usize,
    pub terms: Vec<SchemeTerm>,
}

/// Context set of one color of one term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiSet {
    pub term: usize,
    /// 1-based color.
    pub color: u8,
    pub anchor: Cell,
    pub psi: IndexSet,
    pub upsilon: IndexSet,
}

/// One lex term with a single color anchored at `(r - 1, t)`.
pub fn simple_scheme(r: usize, s: usize, t: usize) -> Result<Scheme> {
    if r == 0 || s == 0 {
        return Err(Error::InvalidScheme(format!("patch must be non-empty, got {r}x{s}")));
    }
    if t >= s {
        return Err(Error::InvalidScheme(format!("anchor column t={t} outside 0..{s}")));
    }
    Ok(Scheme {
        r,
        s,
        terms: vec![SchemeTerm {
            order: TotalOrder::Lex,
            rho: 1.0,
            period: vec![vec![1]],
            anchors: vec![(r as i32 - 1, t as i32)],
        }],
    })
}

fn in_rect((i, j): Cell, r: usize, s: usize) -> bool {
    i >= 0 && j >= 0 && (i as usize) < r && (j as usize) < s
}

/// Cells of the patch that precede `(i, j)` once the patch is placed with
/// `anchor` on `(i, j)`, in patch coordinates.
fn psi_at(order: TotalOrder, anchor: Cell, (i, j): Cell, r: usize, s: usize) -> IndexSet {
    let (di, dj) = (i - anchor.0, j - anchor.1);
    IndexSet::rect(r, s)
        .iter()
        .filter(|&(u, v)| order.precedes((u + di, v + dj), (i, j)))
        .collect()
}

fn check_structure(term: &SchemeTerm, r: usize, s: usize) -> std::result::Result<(), String> {
    let c = term.colors();
    if c == 0 {
        return Err("term has no anchors".into());
    }
    if c > u8::MAX as usize {
        return Err(format!("too many colors ({c})"));
    }
    let (pi, pj) = term.period_dims();
    if pi == 0 || pj == 0 || term.period.iter().any(|row| row.len() != pj) {
        return Err("period matrix must be a non-empty rectangle".into());
    }
    if let Some(&bad) = term.period.iter().flatten().find(|&&x| x == 0 || x as usize > c) {
        return Err(format!("period entry {bad} outside colors 1..={c}"));
    }
    if let Some(&a) = term.anchors.iter().find(|&&a| !in_rect(a, r, s)) {
        return Err(format!("anchor {a:?} outside the {r}x{s} patch"));
    }
    if !(term.rho.is_finite() && term.rho >= 0.0) {
        return Err(format!("weight {} must be a non-negative number", term.rho));
    }
    Ok(())
}

/// Context sets of every color of `term`.
pub fn derive_psi(term: &SchemeTerm, term_index: usize, r: usize, s: usize) -> Result<Vec<PsiSet>> {
    check_structure(term, r, s).map_err(Error::InvalidScheme)?;
    (1..=term.colors() as u8)
        .map(|color| {
            let rep = term.representative(color).ok_or_else(|| {
                Error::InvalidScheme(format!("color {color} does not occur in the period"))
            })?;
            let anchor = term.anchors[color as usize - 1];
            let psi = psi_at(term.order, anchor, rep, r, s);
            let upsilon = psi.union(&IndexSet::new(vec![anchor]));
            Ok(PsiSet { term: term_index, color, anchor, psi, upsilon })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Weights,
    Structure,
    ColorCount,
    PsiConsistency,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Weights => "weights",
            ViolationKind::Structure => "structure",
            ViolationKind::ColorCount => "color count",
            ViolationKind::PsiConsistency => "psi consistency",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub term: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term {
            Some(k) => write!(f, "{} (term {k}): {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemeReport {
    pub violations: Vec<Violation>,
}

impl SchemeReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidScheme(v.to_string())),
        }
    }
}

pub fn validate_scheme(scheme: &Scheme) -> SchemeReport {
    let mut violations = Vec::new();
    let mut push = |kind, term, message: String| violations.push(Violation { kind, term, message });
    if scheme.r == 0 || scheme.s == 0 {
        push(ViolationKind::Structure, None, format!("patch {}x{} is empty", scheme.r, scheme.s));
    }
    if scheme.terms.is_empty() {
        push(ViolationKind::Structure, None, "scheme has no terms".into());
    }
    let total: f64 = scheme.terms.iter().map(|t| t.rho).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        push(ViolationKind::Weights, None, format!("weights sum to {total}, not 1"));
    }
    for (k, term) in scheme.terms.iter().enumerate() {
        if let Err(msg) = check_structure(term, scheme.r, scheme.s) {
            push(ViolationKind::Structure, Some(k), msg);
            continue;
        }
        let mut counts = vec![0usize; term.colors()];
        for &x in term.period.iter().flatten() {
            counts[x as usize - 1] += 1;
        }
        if counts.iter().any(|&n| n != counts[0]) {
            push(ViolationKind::ColorCount, Some(k), format!("colors occur {counts:?} times per period"));
            continue;
        }
        let derived = match derive_psi(term, k, scheme.r, scheme.s) {
            Ok(d) => d,
            Err(e) => {
                push(ViolationKind::Structure, Some(k), e.to_string());
                continue;
            }
        };
        let (pi, pj) = term.period_dims();
        let (pi, pj) = (pi as i32, pj as i32);
        'cells: for i in -pi..2 * pi {
            for j in -pj..2 * pj {
                let color = term.color_at((i, j));
                let expect = &derived[color as usize - 1];
                let got = psi_at(term.order, expect.anchor, (i, j), scheme.r, scheme.s);
                if got != expect.psi {
                    push(
                        ViolationKind::PsiConsistency,
                        Some(k),
                        format!(
                            "context of color {color} at ({i},{j}) has {} cells, expected {}",
                            got.len(),
                            expect.psi.len()
                        ),
                    );
                    break 'cells;
                }
            }
        }
    }
    SchemeReport { violations }
}

/// Context sets of every (term, color) pair, validating first.
pub fn scheme_psi_sets(scheme: &Scheme) -> Result<Vec<PsiSet>> {
    validate_scheme(scheme).into_result()?;
    let mut out = Vec::new();
    for (k, term) in scheme.terms.iter().enumerate() {
        out.extend(derive_psi(term, k, scheme.r, scheme.s)?);
    }
    Ok(out)
}

/// Parse the value of `--simple`, written `t=<t>` (a bare integer is accepted too).
pub fn parse_simple(arg: &str) -> Result<usize> {
    let v = arg.trim();
    let v = v.strip_prefix("t=").unwrap_or(v);
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("expected t=<column>, got `{arg}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub order: TotalOrder,
    pub rho: f64,
    pub period: Vec<Vec<u8>>,
    pub anchors: Vec<[i32; 2]>,
    /// Optional explicit context sets, one list of cells per color.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<[i32; 2]>>>,
}

/// TOML form of a scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub r: usize,
    pub s: usize,
    pub terms: Vec<TermFile>,
}

impl SchemeFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_scheme(scheme: &Scheme, with_psi: bool) -> Result<Self> {
        let mut terms = Vec::new();
        for (k, t) in scheme.terms.iter().enumerate() {
            let psi = if with_psi {
                Some(
                    derive_psi(t, k, scheme.r, scheme.s)?
                        .into_iter()
                        .map(|p| p.psi.iter().map(|(i, j)| [i, j]).collect())
                        .collect(),
                )
            } else {
                None
            };
            terms.push(TermFile {
                order: t.order,
                rho: t.rho,
                period: t.period.clone(),
                anchors: t.anchors.iter().map(|&(i, j)| [i, j]).collect(),
                psi,
            });
        }
        Ok(SchemeFile { r: scheme.r, s: scheme.s, terms })
    }

    /// Convert, validating and cross-checking any explicit context sets.
    pub fn into_scheme(self) -> Result<Scheme> {
        let scheme = Scheme {
            r: self.r,
            s: self.s,
            terms: self
                .terms
                .iter()
                .map(|t| SchemeTerm {
                    order: t.order,
                    rho: t.rho,
                    period: t.period.clone(),
                    anchors: t.anchors.iter().map(|&[i, j]| (i, j)).collect(),
                })
                .collect(),
        };
        validate_scheme(&scheme).into_result()?;
        for (k, (tf, term)) in self.terms.iter().zip(&scheme.terms).enumerate() {
            let Some(given) = &tf.psi else { continue };
            let derived = derive_psi(term, k, scheme.r, scheme.s)?;
            if given.len() != derived.len() {
                return Err(Error::InvalidScheme(format!(
                    "term {k} lists {} context sets for {} colors",
                    given.len(),
                    derived.len()
                )));
            }
            for (cells, d) in given.iter().zip(&derived) {
                let g: IndexSet = cells.iter().map(|&[i, j]| (i, j)).collect();
                if g != d.psi {
                    return Err(Error::InvalidScheme(format!(
                        "term {k} color {}: listed context does not match the derived one",
                        d.color
                    )));
                }
            }
        }
        Ok(scheme)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scheme file serializes")
    }
}

pub fn load_scheme(path: &Path) -> Result<Scheme> {
    SchemeFile::read(path)?.into_scheme()
}

/// Hex SHA-256 of the scheme's TOML form.
pub fn scheme_digest(scheme: &Scheme) -> Result<String> {
    use sha2::{Digest, Sha256};
    let text = SchemeFile::from_scheme(scheme, false)?.to_toml();
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}
