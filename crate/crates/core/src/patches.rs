//! Enumeration of the admissible `r x s` patches and their marginalizations.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::constraint::{ConstraintSpec, RectChecker};
use crate::error::{Error, Result};
use crate::lattice::{Cell, Configuration, IndexSet};

const CACHE_MAGIC: &[u8; 8] = b"CAPBPSET";
const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 4 + 4 + 4 + 1 + 8;

/// The admissible `rows x cols` patches in canonical (row-major value) order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchSet {
    key: [u8; 32],
    alphabet_size: u8,
    rows: usize,
    cols: usize,
    delta: usize,
    data: Vec<u8>,
    index: HashMap<Box<[u8]>, usize>,
}

/// Digest identifying a patch set: constraint contents plus dimensions.
pub fn patch_key(spec: &ConstraintSpec, rows: usize, cols: usize, delta: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(spec.canonical_text().as_bytes());
    h.update(format!("|r={rows}|s={cols}|delta={delta}").as_bytes());
    h.finalize().into()
}

impl PatchSet {
    fn from_data(
        key: [u8; 32],
        alphabet_size: u8,
        rows: usize,
        cols: usize,
        delta: usize,
        data: Vec<u8>,
    ) -> Self {
        let area = rows * cols;
        let index = data
            .chunks_exact(area.max(1))
            .enumerate()
            .map(|(id, p)| (p.to_vec().into_boxed_slice(), id))
            .collect();
        PatchSet { key, alphabet_size, rows, cols, delta, data, index }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.area()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major symbols of patch `id`.
    pub fn patch(&self, id: usize) -> &[u8] {
        let a = self.area();
        &self.data[id * a..(id + 1) * a]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.area())
    }

    pub fn id_of(&self, symbols: &[u8]) -> Option<usize> {
        self.index.get(symbols).copied()
    }

    pub fn configuration(&self, id: usize) -> Configuration {
        Configuration::new(IndexSet::rect(self.rows, self.cols), self.patch(id).to_vec())
            .expect("patch has rows*cols symbols")
    }

    pub fn window(&self) -> IndexSet {
        IndexSet::rect(self.rows, self.cols)
    }

    fn flat_index(&self, cell: Cell) -> Option<usize> {
        let (i, j) = cell;
        if i < 0 || j < 0 || i as usize >= self.rows || j as usize >= self.cols {
            return None;
        }
        Some(i as usize * self.cols + j as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.key);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&(self.delta as u32).to_le_bytes());
        out.push(self.alphabet_size);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err("truncated header".into());
        }
        if &bytes[..8] != CACHE_MAGIC {
            return Err("bad magic".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != CACHE_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let key: [u8; 32] = bytes[12..44].try_into().unwrap();
        let rows = u32_at(44) as usize;
        let cols = u32_at(48) as usize;
        let delta = u32_at(52) as usize;
        let alphabet_size = bytes[56];
        let count = u64::from_le_bytes(bytes[57..65].try_into().unwrap()) as usize;
        let data = &bytes[HEADER_LEN..];
        if rows == 0 || cols == 0 || data.len() != count * rows * cols {
            return Err("payload length does not match header".into());
        }
        if data.iter().any(|&v| v >= alphabet_size) {
            return Err("symbol out of range".into());
        }
        Ok(PatchSet::from_data(key, alphabet_size, rows, cols, delta, data.to_vec()))
    }
}

/// All admissible `rows x cols` patches.
///
/// With `delta = 0` a patch is admissible when it is locally valid. With
/// `delta > 0` it must also extend to a valid configuration on the rectangle
/// padded by `delta` cells on every side.
pub fn enumerate_patches(
    spec: &ConstraintSpec,
    rows: usize,
    cols: usize,
    delta: usize,
) -> Result<PatchSet> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(format!("patch must be non-empty, got {rows}x{cols}")));
    }
    let q = spec.alphabet_size();
    let checker = RectChecker::new(spec, rows, cols);
    let area = rows * cols;
    let mut data = Vec::new();
    let mut grid = vec![0u8; area];

    let padded = (delta > 0).then(|| {
        let checker = RectChecker::new(spec, rows + 2 * delta, cols + 2 * delta);
        let width = cols + 2 * delta;
        let fixed: Vec<Option<usize>> = (0..(rows + 2 * delta) * width)
            .map(|k| {
                let (i, j) = (k / width, k % width);
                let inside = (delta..delta + rows).contains(&i) && (delta..delta + cols).contains(&j);
                inside.then(|| (i - delta) * cols + (j - delta))
            })
            .collect();
        (checker, fixed)
    });

    // iterative row-major depth-first fill with prefix pruning
    let mut k = 0usize;
    let mut next_symbol = vec![0u8; area + 1];
    loop {
        if k == area {
            let keep = match &padded {
                None => true,
                Some((pc, fixed)) => extends(pc, fixed, &grid, q),
            };
            if keep {
                data.extend_from_slice(&grid);
            }
            k -= 1;
            continue;
        }
        let sym = next_symbol[k];
        if sym >= q {
            next_symbol[k] = 0;
            if k == 0 {
                break;
            }
            k -= 1;
            continue;
        }
        next_symbol[k] = sym + 1;
        grid[k] = sym;
        if checker.ok_at(&grid, k) {
            k += 1;
        }
    }
    Ok(PatchSet::from_data(patch_key(spec, rows, cols, delta), q, rows, cols, delta, data))
}

/// Backtracking search for a valid fill of the padding ring around `patch`.
fn extends(checker: &RectChecker, fixed: &[Option<usize>], patch: &[u8], q: u8) -> bool {
    let n = fixed.len();
    let mut grid: Vec<u8> = fixed.iter().map(|f| f.map_or(0, |p| patch[p])).collect();
    let mut next_symbol = vec![0u8; n];
    let mut k = 0usize;
    loop {
        if k == n {
            return true;
        }
        let ok = match fixed[k] {
            Some(_) => {
                // a fixed cell is tried exactly once
                if next_symbol[k] == 0 {
                    next_symbol[k] = q;
                    checker.ok_at(&grid, k)
                } else {
                    false
                }
            }
            None => {
                if next_symbol[k] < q {
                    grid[k] = next_symbol[k];
                    next_symbol[k] += 1;
                    checker.ok_at(&grid, k)
                } else {
                    false
                }
            }
        };
        if ok {
            k += 1;
        } else if fixed[k].is_some() || next_symbol[k] >= q {
            next_symbol[k] = 0;
            if k == 0 {
                return false;
            }
            k -= 1;
        }
    }
}

/// Partition of patch ids by their restriction to `subset`.
#[derive(Clone, Debug)]
pub struct MarginalMap {
    subset: IndexSet,
    group_of: Vec<u32>,
    groups: Vec<Vec<usize>>,
    group_values: Vec<Vec<u8>>,
}

impl MarginalMap {
    pub fn subset(&self) -> &IndexSet {
        &self.subset
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, id: usize) -> usize {
        self.group_of[id] as usize
    }

    pub fn group_ids(&self) -> &[u32] {
        &self.group_of
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Restriction values of group `g`, aligned with `subset().cells()`.
    pub fn group_value(&self, g: usize) -> &[u8] {
        &self.group_values[g]
    }

    pub fn group_configuration(&self, g: usize) -> Configuration {
        Configuration::new(self.subset.clone(), self.group_values[g].clone())
            .expect("group value matches subset")
    }

    /// Group whose restriction equals `values`, if any patch has it.
    pub fn find(&self, values: &[u8]) -> Option<usize> {
        self.group_values.binary_search_by(|v| v.as_slice().cmp(values)).ok()
    }

    /// Sum of `p` over each group.
    pub fn marginalize(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.groups.len()];
        for (x, &g) in self.group_of.iter().enumerate() {
            out[g as usize] += p[x];
        }
        out
    }
}

/// Group the patches of `ps` by their restriction to `subset`.
///
/// Groups are ordered by restriction value.
pub fn marginal_map(ps: &PatchSet, subset: &IndexSet) -> Result<MarginalMap> {
    let positions: Vec<usize> = subset
        .iter()
        .map(|c| {
            ps.flat_index(c).ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "cell {c:?} outside the {}x{} patch",
                    ps.rows(),
                    ps.cols()
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut by_value: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for (id, patch) in ps.iter().enumerate() {
        let key: Vec<u8> = positions.iter().map(|&k| patch[k]).collect();
        by_value.entry(key).or_default().push(id);
    }
    let mut group_of = vec![0u32; ps.len()];
    let mut groups = Vec::with_capacity(by_value.len());
    let mut group_values = Vec::with_capacity(by_value.len());
    for (g, (value, ids)) in by_value.into_iter().enumerate() {
        for &id in &ids {
            group_of[id] = g as u32;
        }
        groups.push(ids);
        group_values.push(value);
    }
    Ok(MarginalMap { subset: subset.clone(), group_of, groups, group_values })
}

/// On-disk cache of enumerated patch sets, keyed by [`patch_key`].
#[derive(Clone, Debug)]
pub struct PatchCache {
    dir: PathBuf,
}

impl PatchCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PatchCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &[u8; 32]) -> PathBuf {
        self.dir.join(format!("{}.patches", hex::encode(key)))
    }

    /// Load from the cache or enumerate and store. Returns the set and
    /// whether it came from the cache.
    pub fn load_or_enumerate(
        &self,
        spec: &ConstraintSpec,
        rows: usize,
        cols: usize,
        delta: usize,
    ) -> Result<(PatchSet, bool)> {
        let key = patch_key(spec, rows, cols, delta);
        let path = self.path_for(&key);
        if path.exists() {
            let bytes = std::fs::read(&path)?;
            let ps = PatchSet::from_bytes(&bytes)
                .map_err(|reason| Error::BadCache { path: path.clone(), reason })?;
            if ps.key != key || ps.rows != rows || ps.cols != cols || ps.delta != delta {
                return Err(Error::BadCache { path, reason: "header does not match request".into() });
            }
            return Ok((ps, true));
        }
        let ps = enumerate_patches(spec, rows, cols, delta)?;
        self.store(&ps)?;
        Ok((ps, false))
    }

    /// Write via a temporary file and an atomic rename.
    pub fn store(&self, ps: &PatchSet) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&ps.to_bytes())?;
        tmp.flush()?;
        tmp.persist(self.path_for(&ps.key)).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{make_builtin, Builtin};

    fn spec(name: &str) -> ConstraintSpec {
        ConstraintSpec::load(name).unwrap()
    }

    fn brute_force(spec: &ConstraintSpec, rows: usize, cols: usize) -> Vec<Vec<u8>> {
        let area = rows * cols;
        let mut out = Vec::new();
        for code in 0u64..(1 << area) {
            let values: Vec<u8> = (0..area).map(|b| ((code >> (area - 1 - b)) & 1) as u8).collect();
            let w = Configuration::new(IndexSet::rect(rows, cols), values.clone()).unwrap();
            if spec.is_valid(&w).unwrap() {
                out.push(values);
            }
        }
        out
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_patches(&spec("free"), 2, 2, 0).unwrap().len(), 16);
        assert_eq!(enumerate_patches(&spec("rll-2-inf"), 2, 2, 0).unwrap().len(), 7);
        assert_eq!(enumerate_patches(&spec("rll-0-2"), 1, 3, 0).unwrap().len(), 7);
        assert_eq!(enumerate_patches(&spec("rll-1-inf"), 2, 2, 0).unwrap().len(), 7);
    }

    #[test]
    fn matches_brute_force() {
        for name in ["rll-1-inf", "rll-2-inf", "rll-0-2", "nib"] {
            let s = spec(name);
            for rows in 1..=3 {
                for cols in 1..=3 {
                    let ps = enumerate_patches(&s, rows, cols, 0).unwrap();
                    let got: Vec<Vec<u8>> = ps.iter().map(<[u8]>::to_vec).collect();
                    assert_eq!(got, brute_force(&s, rows, cols), "{name} {rows}x{cols}");
                }
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(enumerate_patches(&spec("free"), 0, 3, 0).is_err());
    }

    #[test]
    fn padding_filters_and_is_monotone() {
        // a lone 1 at the corner of a 2x2 patch is fine for rll(0,2), but
        // padding exposes windows crossing the border
        for name in ["rll-0-2", "nib", "rll-2-inf"] {
            let s = spec(name);
            let mut prev: Option<PatchSet> = None;
            for delta in 0..=2 {
                let ps = enumerate_patches(&s, 2, 3, delta).unwrap();
                if let Some(prev) = &prev {
                    assert!(ps.iter().all(|p| prev.id_of(p).is_some()), "{name} delta={delta}");
                }
                prev = Some(ps);
            }
        }
    }

    #[test]
    fn padding_removes_non_extendable_patch() {
        // with d=1,k=1 a 1 must be followed by exactly one 0 then a 1 (checkerboard-like),
        // so "1 0 0" violates k=1 locally while "0 0" patches can never extend
        let s = make_builtin(Builtin::Rll { d: 1, k: Some(2) }).unwrap();
        let loose = enumerate_patches(&s, 3, 3, 0).unwrap();
        let tight = enumerate_patches(&s, 3, 3, 1).unwrap();
        assert!(tight.len() <= loose.len());
        for p in tight.iter() {
            let w = Configuration::new(IndexSet::rect(3, 3), p.to_vec()).unwrap();
            assert!(s.is_valid(&w).unwrap());
        }
    }

    #[test]
    fn marginal_examples() {
        let ps = enumerate_patches(&spec("free"), 2, 2, 0).unwrap();
        let top = marginal_map(&ps, &IndexSet::rect(1, 2)).unwrap();
        assert_eq!(top.num_groups(), 4);
        assert!(top.groups().iter().all(|g| g.len() == 4));
        let full = marginal_map(&ps, &ps.window()).unwrap();
        assert_eq!(full.num_groups(), ps.len());
        let none = marginal_map(&ps, &IndexSet::empty()).unwrap();
        assert_eq!(none.num_groups(), 1);
        assert_eq!(none.groups()[0].len(), 16);
        assert!(marginal_map(&ps, &IndexSet::new(vec![(2, 0)])).is_err());
    }

    #[test]
    fn marginal_partition_and_shift_consistency() {
        for name in ["rll-0-2", "nib", "rll-1-inf"] {
            let ps = enumerate_patches(&spec(name), 3, 3, 0).unwrap();
            let top = IndexSet::rect(2, 3);
            let a = marginal_map(&ps, &top).unwrap();
            let b = marginal_map(&ps, &top.shift(1, 0)).unwrap();
            assert_eq!(a.num_groups(), b.num_groups(), "{name}");
            let left = IndexSet::rect(3, 2);
            let c = marginal_map(&ps, &left).unwrap();
            let d = marginal_map(&ps, &left.shift(0, 1)).unwrap();
            assert_eq!(c.num_groups(), d.num_groups(), "{name}");
            let mut seen = vec![0; ps.len()];
            for g in a.groups() {
                for &id in g {
                    seen[id] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            for g in 0..a.num_groups() {
                assert!(spec(name).is_valid(&a.group_configuration(g)).unwrap());
                assert_eq!(a.find(a.group_value(g)), Some(g));
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PatchCache::new(dir.path());
        let s = spec("rll-0-2");
        let (cold, hit) = cache.load_or_enumerate(&s, 2, 3, 1).unwrap();
        assert!(!hit);
        let (warm, hit) = cache.load_or_enumerate(&s, 2, 3, 1).unwrap();
        assert!(hit);
        assert_eq!(cold, warm);
        let bytes = std::fs::read(cache.path_for(cold.key())).unwrap();
        assert_eq!(bytes, cold.to_bytes());
    }

    #[test]
    fn corrupt_cache_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PatchCache::new(dir.path());
        let s = spec("free");
        let ps = enumerate_patches(&s, 1, 2, 0).unwrap();
        std::fs::write(cache.path_for(ps.key()), b"CAPBPSET junk").unwrap();
        assert!(matches!(cache.load_or_enumerate(&s, 1, 2, 0), Err(Error::BadCache { .. })));
    }
}
