//! Index sets, configurations, scan orders and entropy.
//!
//! Cells are integer pairs `(i, j)` with `i` the row and `j` the column. Index
//! sets are kept sorted in row-major order so that two sets with the same
//! cells compare equal and iterate identically.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Cell = (i32, i32);

/// Tolerance on the total mass accepted by [`entropy`].
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// A finite set of cells in canonical (row-major) order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    cells: Vec<Cell>,
}

impl IndexSet {
    pub fn new(mut cells: Vec<Cell>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        IndexSet { cells }
    }

    pub fn empty() -> Self {
        IndexSet { cells: Vec::new() }
    }

    /// The rectangle `{(i, j) : 0 <= i < rows, 0 <= j < cols}`.
    pub fn rect(rows: usize, cols: usize) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for i in 0..rows as i32 {
            for j in 0..cols as i32 {
                cells.push((i, j));
            }
        }
        IndexSet { cells }
    }

    /// `rows x cols` rectangle grown by `delta` cells on every side.
    pub fn padded_rect(rows: usize, cols: usize, delta: usize) -> Self {
        let d = delta as i32;
        IndexSet::rect(rows + 2 * delta, cols + 2 * delta).shift(-d, -d)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// Position of `cell` in canonical order.
    pub fn position(&self, cell: Cell) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.cells.iter().all(|&c| other.contains(c))
    }

    pub fn shift(&self, alpha: i32, beta: i32) -> IndexSet {
        // a translation preserves row-major order
        IndexSet {
            cells: self.cells.iter().map(|&(i, j)| (i + alpha, j + beta)).collect(),
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        IndexSet::new(cells)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            cells: self.cells.iter().copied().filter(|&c| other.contains(c)).collect(),
        }
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            cells: self.cells.iter().copied().filter(|&c| !other.contains(c)).collect(),
        }
    }

    /// Smallest `(min_i, min_j, max_i, max_j)` box containing the set.
    pub fn bounding_box(&self) -> Option<(i32, i32, i32, i32)> {
        let first = *self.cells.first()?;
        let mut bb = (first.0, first.1, first.0, first.1);
        for &(i, j) in &self.cells {
            bb.0 = bb.0.min(i);
            bb.1 = bb.1.min(j);
            bb.2 = bb.2.max(i);
            bb.3 = bb.3.max(j);
        }
        Some(bb)
    }
}

impl FromIterator<Cell> for IndexSet {
    fn from_iter<T: IntoIterator<Item = Cell>>(iter: T) -> Self {
        IndexSet::new(iter.into_iter().collect())
    }
}

/// An assignment of alphabet symbols to the cells of an index set.
///
/// `values[k]` is the symbol at `support.cells()[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    support: IndexSet,
    values: Vec<u8>,
}

impl Configuration {
    pub fn new(support: IndexSet, values: Vec<u8>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cells but {} values",
                support.len(),
                values.len()
            )));
        }
        Ok(Configuration { support, values })
    }

    /// Build from unordered `(cell, value)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Cell, u8)>) -> Result<Self> {
        let mut pairs: Vec<(Cell, u8)> = pairs.into_iter().collect();
        pairs.sort_unstable_by_key(|&(c, _)| c);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DimensionMismatch(format!("cell {:?} assigned twice", w[0].0)));
            }
        }
        let (cells, values): (Vec<Cell>, Vec<u8>) = pairs.into_iter().unzip();
        Ok(Configuration { support: IndexSet { cells }, values })
    }

    /// A rectangular configuration from its rows, anchored at `(0, 0)`.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Ok(Configuration { support: IndexSet::rect(rows.len(), cols), values })
    }

    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, cell: Cell) -> Option<u8> {
        self.support.position(cell).map(|k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, u8)> + '_ {
        self.support.iter().zip(self.values.iter().copied())
    }

    pub fn shift(&self, alpha: i32, beta: i32) -> Configuration {
        Configuration { support: self.support.shift(alpha, beta), values: self.values.clone() }
    }

    /// `w[V]`.
    pub fn restrict(&self, subset: &IndexSet) -> Result<Configuration> {
        let mut values = Vec::with_capacity(subset.len());
        for cell in subset.iter() {
            match self.get(cell) {
                Some(v) => values.push(v),
                None => return Err(Error::NotASubset(cell)),
            }
        }
        Ok(Configuration { support: subset.clone(), values })
    }

    pub fn map_values(&self, f: impl Fn(u8) -> u8) -> Configuration {
        Configuration {
            support: self.support.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Apply a cell mapping; the result is re-sorted into canonical order.
    pub fn map_cells(&self, f: impl Fn(Cell) -> Cell) -> Configuration {
        Configuration::from_pairs(self.iter().map(|(c, v)| (f(c), v)))
            .expect("cell map must be injective")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some((i0, j0, i1, j1)) = self.support.bounding_box() else {
            return write!(f, "[]");
        };
        write!(f, "[")?;
        for i in i0..=i1 {
            if i > i0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for j in j0..=j1 {
                if j > j0 {
                    write!(f, ",")?;
                }
                match self.get((i, j)) {
                    Some(v) => write!(f, "{v}")?,
                    None => write!(f, "*")?,
                }
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// The scan orders that schemes can be built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TotalOrder {
    /// Row by row, left to right.
    Lex,
    /// Even rows (top to bottom) before odd rows; left to right within a row.
    Irs,
    /// Row by row; within a row even columns before odd columns.
    Skip,
}

impl TotalOrder {
    pub const ALL: [TotalOrder; 3] = [TotalOrder::Lex, TotalOrder::Irs, TotalOrder::Skip];

    pub fn name(self) -> &'static str {
        match self {
            TotalOrder::Lex => "lex",
            TotalOrder::Irs => "irs",
            TotalOrder::Skip => "skip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lex" => Ok(TotalOrder::Lex),
            "irs" => Ok(TotalOrder::Irs),
            "skip" => Ok(TotalOrder::Skip),
            other => Err(Error::Parse(format!("unknown order `{other}`"))),
        }
    }

    // Each order is the lexicographic order on a key; the key map is
    // injective, which makes the relation a strict total order.
    fn key(self, (i, j): Cell) -> (i32, i32, i32) {
        match self {
            TotalOrder::Lex => (i, j, 0),
            TotalOrder::Irs => (i.rem_euclid(2), i, j),
            TotalOrder::Skip => (i, j.rem_euclid(2), j),
        }
    }

    pub fn compare(self, p: Cell, q: Cell) -> Ordering {
        self.key(p).cmp(&self.key(q))
    }

    pub fn precedes(self, p: Cell, q: Cell) -> bool {
        self.compare(p, q) == Ordering::Less
    }
}

impl fmt::Display for TotalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The cells of `window` that precede `p`.
pub fn window_predecessors(order: TotalOrder, window: &IndexSet, p: Cell) -> IndexSet {
    IndexSet { cells: window.iter().filter(|&q| order.precedes(q, p)).collect() }
}

/// Shannon entropy in bits.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (k, &p) in dist.iter().enumerate() {
        if !(p >= 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {k} is {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("mass sums to {total}")));
    }
    Ok(-dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>())
}
