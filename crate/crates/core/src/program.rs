//! The concave program over patch distributions: stationarity and symmetry
//! equalities plus a weighted sum of conditional entropies.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::constraint::{ConstraintSpec, Symmetry};
use crate::error::{Error, Result};
use crate::lattice::IndexSet;
use crate::patches::{marginal_map, MarginalMap, PatchSet};
use crate::scheme::{scheme_psi_sets, Scheme};

/// Marginals below this are replaced by it inside the gradient's logarithms.
pub const GRADIENT_CLIP: f64 = 1e-12;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    Normalization,
    Vertical,
    Horizontal,
    Reflect,
    Transpose,
    Complement,
}

impl RowTag {
    pub const ALL: [RowTag; 6] = [
        RowTag::Normalization,
        RowTag::Vertical,
        RowTag::Horizontal,
        RowTag::Reflect,
        RowTag::Transpose,
        RowTag::Complement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RowTag::Normalization => "normalization",
            RowTag::Vertical => "vertical",
            RowTag::Horizontal => "horizontal",
            RowTag::Reflect => "reflect",
            RowTag::Transpose => "transpose",
            RowTag::Complement => "complement",
        }
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One equality `sum coeff * p[var] = rhs`, coefficients sorted by variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub tag: RowTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    num_vars: usize,
    rows: Vec<Row>,
}

impl LinearSystem {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, tag: RowTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    /// Largest `|A p - b|` over the rows.
    pub fn residual(&self, p: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| (row.coeffs.iter().map(|&(k, c)| c * p[k]).sum::<f64>() - row.rhs).abs())
            .fold(0.0, f64::max)
    }
}

struct RowBuilder {
    num_vars: usize,
    rows: Vec<Row>,
    seen: HashSet<Vec<(usize, i64)>>,
}

impl RowBuilder {
    /// Add `sum_{plus} p - sum_{minus} p = rhs`, dropping empty and repeated rows.
    fn push(&mut self, plus: &[usize], minus: &[usize], rhs: f64, tag: RowTag) {
        let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
        for &x in plus {
            *acc.entry(x).or_default() += 1;
        }
        for &x in minus {
            *acc.entry(x).or_default() -= 1;
        }
        let mut key: Vec<(usize, i64)> = acc.into_iter().filter(|&(_, c)| c != 0).collect();
        if key.is_empty() {
            return;
        }
        let mut rhs = rhs;
        if key[0].1 < 0 {
            key.iter_mut().for_each(|e| e.1 = -e.1);
            rhs = -rhs;
        }
        let mut fingerprint = key.clone();
        fingerprint.push((usize::MAX, rhs.to_bits() as i64));
        if !self.seen.insert(fingerprint) {
            return;
        }
        self.rows.push(Row { coeffs: key.into_iter().map(|(k, c)| (k, c as f64)).collect(), rhs, tag });
    }

    /// Rows equating the marginals on `a` and on `b`, which must be congruent
    /// index sets whose sorted cells correspond one to one.
    fn marginal_pairs(&mut self, ps: &PatchSet, a: &IndexSet, b: &IndexSet, tag: RowTag) {
        let ma = marginal_map(ps, a).expect("subset lies inside the patch");
        let mb = marginal_map(ps, b).expect("subset lies inside the patch");
        self.marginal_pairs_mapped(&ma, &mb, |v| v.to_vec(), tag, false);
    }

    /// For each value `v` of `ma`, a row `sum_{x[a]=v} p - sum_{x[b]=t(v)} p = 0`.
    fn marginal_pairs_mapped(
        &mut self,
        ma: &MarginalMap,
        mb: &MarginalMap,
        t: impl Fn(&[u8]) -> Vec<u8>,
        tag: RowTag,
        skip_mirrored: bool,
    ) {
        let mut values: Vec<Vec<u8>> = (0..ma.num_groups()).map(|g| ma.group_value(g).to_vec()).collect();
        for g in 0..mb.num_groups() {
            values.push(mb.group_value(g).to_vec());
        }
        values.sort();
        values.dedup();
        let empty: Vec<usize> = Vec::new();
        for v in &values {
            let image = t(v);
            if skip_mirrored && image < *v {
                continue;
            }
            let plus = ma.find(v).map_or(&empty, |g| &ma.groups()[g]);
            let minus = mb.find(&image).map_or(&empty, |g| &mb.groups()[g]);
            self.push(plus, minus, 0.0, tag);
        }
    }

    /// Rows `p_x = p_{f(x)}`; an image outside the patch set forces `p_x = 0`.
    fn permutation(&mut self, ps: &PatchSet, f: impl Fn(&[u8]) -> Vec<u8>, tag: RowTag) {
        for (x, patch) in ps.iter().enumerate() {
            match ps.id_of(&f(patch)) {
                Some(y) if y > x => self.push(&[x], &[y], 0.0, tag),
                Some(_) => {}
                None => self.push(&[x], &[], 0.0, tag),
            }
        }
    }
}

/// Stationarity, normalization and symmetry equalities for `ps`.
pub fn build_linear_system(ps: &PatchSet, symmetry: Symmetry) -> LinearSystem {
    let (r, s) = (ps.rows(), ps.cols());
    let mut b = RowBuilder { num_vars: ps.len(), rows: Vec::new(), seen: HashSet::new() };
    let all: Vec<usize> = (0..ps.len()).collect();
    b.push(&all, &[], 1.0, RowTag::Normalization);
    if r >= 2 {
        let top = IndexSet::rect(r - 1, s);
        b.marginal_pairs(ps, &top, &top.shift(1, 0), RowTag::Vertical);
    }
    if s >= 2 {
        let left = IndexSet::rect(r, s - 1);
        b.marginal_pairs(ps, &left, &left.shift(0, 1), RowTag::Horizontal);
    }
    if symmetry.reflect {
        b.permutation(ps, |x| flip_rows(x, r, s), RowTag::Reflect);
        b.permutation(ps, |x| flip_cols(x, r, s), RowTag::Reflect);
    }
    if symmetry.complement && ps.alphabet_size() == 2 {
        b.permutation(ps, |x| x.iter().map(|&v| 1 - v).collect(), RowTag::Complement);
    }
    if symmetry.transpose {
        let m = r.min(s);
        let square = IndexSet::rect(m, m);
        let ms = marginal_map(ps, &square).expect("square lies inside the patch");
        b.marginal_pairs_mapped(&ms, &ms, |v| transpose_square(v, m), RowTag::Transpose, true);
    }
    LinearSystem { num_vars: b.num_vars, rows: b.rows }
}

/// Row-major symbols of `x` upside down.
pub fn flip_rows(x: &[u8], r: usize, s: usize) -> Vec<u8> {
    (0..r).rev().flat_map(|i| x[i * s..(i + 1) * s].iter().copied()).collect()
}

/// Row-major symbols of `x` mirrored left to right.
pub fn flip_cols(x: &[u8], r: usize, s: usize) -> Vec<u8> {
    (0..r).flat_map(|i| x[i * s..(i + 1) * s].iter().rev().copied()).collect()
}

pub fn transpose_square(v: &[u8], m: usize) -> Vec<u8> {
    (0..m * m).map(|k| v[(k % m) * m + k / m]).collect()
}

/// One conditional-entropy term: the anchor symbol given its context.
#[derive(Clone, Debug)]
pub struct ProgramTerm {
    pub term: usize,
    pub color: u8,
    /// `rho / c` for the owning scheme term.
    pub weight: f64,
    pub upsilon: MarginalMap,
    pub psi: MarginalMap,
    /// Context group of each upsilon group.
    pub y_to_z: Vec<u32>,
}

impl ProgramTerm {
    /// Upsilon and psi marginals of `p`.
    pub fn marginals(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let py = self.upsilon.marginalize(p);
        let mut pz = vec![0.0; self.psi.num_groups()];
        for (y, &z) in self.y_to_z.iter().enumerate() {
            pz[z as usize] += py[y];
        }
        (py, pz)
    }
}

#[derive(Clone, Debug)]
pub struct ConcaveProgram {
    patches: Arc<PatchSet>,
    system: Arc<LinearSystem>,
    terms: Vec<ProgramTerm>,
}

pub fn assemble_program(
    ps: Arc<PatchSet>,
    spec: &ConstraintSpec,
    scheme: &Scheme,
) -> Result<ConcaveProgram> {
    let system = Arc::new(build_linear_system(&ps, spec.symmetry()));
    assemble_with_system(ps, system, scheme)
}

/// Assemble against an already built system, letting several schemes share it.
pub fn assemble_with_system(
    ps: Arc<PatchSet>,
    system: Arc<LinearSystem>,
    scheme: &Scheme,
) -> Result<ConcaveProgram> {
    if scheme.r != ps.rows() || scheme.s != ps.cols() {
        return Err(Error::DimensionMismatch(format!(
            "scheme is for {}x{} patches but the patch set is {}x{}",
            scheme.r,
            scheme.s,
            ps.rows(),
            ps.cols()
        )));
    }
    if system.num_vars() != ps.len() {
        return Err(Error::DimensionMismatch("linear system built for another patch set".into()));
    }
    if ps.is_empty() {
        return Err(Error::DimensionMismatch("patch set is empty".into()));
    }
    let mut terms = Vec::new();
    for set in scheme_psi_sets(scheme)? {
        let t = &scheme.terms[set.term];
        if t.rho == 0.0 {
            continue;
        }
        let upsilon = marginal_map(&ps, &set.upsilon)?;
        let psi = marginal_map(&ps, &set.psi)?;
        let y_to_z = upsilon.groups().iter().map(|g| psi.group_of(g[0]) as u32).collect();
        terms.push(ProgramTerm {
            term: set.term,
            color: set.color,
            weight: t.rho / t.colors() as f64,
            upsilon,
            psi,
            y_to_z,
        });
    }
    Ok(ConcaveProgram { patches: ps, system, terms })
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl ConcaveProgram {
    pub fn patches(&self) -> &Arc<PatchSet> {
        &self.patches
    }

    pub fn system(&self) -> &Arc<LinearSystem> {
        &self.system
    }

    pub fn terms(&self) -> &[ProgramTerm] {
        &self.terms
    }

    pub fn num_vars(&self) -> usize {
        self.patches.len()
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "vector has {} entries for {} variables",
                p.len(),
                self.num_vars()
            )));
        }
        match p.iter().position(|&v| !(v >= 0.0)) {
            Some(index) => Err(Error::NegativeValue { index, value: p[index] }),
            None => Ok(()),
        }
    }

    /// Weighted conditional entropy in bits.
    pub fn objective_value(&self, p: &[f64]) -> Result<f64> {
        self.check(p)?;
        Ok(self.value_unchecked(p))
    }

    pub(crate) fn value_unchecked(&self, p: &[f64]) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            let (py, pz) = term.marginals(p);
            let hy: f64 = py.iter().map(|&v| xlnx(v)).sum();
            let hz: f64 = pz.iter().map(|&v| xlnx(v)).sum();
            total += term.weight * (hz - hy);
        }
        total / LN_2
    }

    /// Gradient of [`objective_value`](Self::objective_value), with marginals
    /// clipped at [`GRADIENT_CLIP`] inside the logarithms.
    pub fn objective_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        Ok(self.gradient_unchecked(p))
    }

    pub(crate) fn gradient_unchecked(&self, p: &[f64]) -> Vec<f64> {
        self.gradient_clipped(p, GRADIENT_CLIP)
    }

    pub(crate) fn gradient_clipped(&self, p: &[f64], clip: f64) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        for term in &self.terms {
            let (py, pz) = term.marginals(p);
            let lz: Vec<f64> = pz.iter().map(|&v| v.max(clip).ln()).collect();
            let per_y: Vec<f64> = py
                .iter()
                .zip(&term.y_to_z)
                .map(|(&v, &z)| term.weight * (lz[z as usize] - v.max(clip).ln()) / LN_2)
                .collect();
            for (x, &y) in term.upsilon.group_ids().iter().enumerate() {
                g[x] += per_y[y as usize];
            }
        }
        g
    }
}
