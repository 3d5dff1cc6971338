//! Stripe baseline: the growth rate of valid stripes of a fixed width,
//! from the Perron eigenvalue of a transfer graph over row stacks.

use std::collections::HashMap;

use crate::constraint::{ConstraintSpec, RectChecker};
use crate::error::{Error, Result};
use crate::patches::enumerate_patches;

pub const DEFAULT_VERTEX_LIMIT: usize = 1 << 20;
pub const DEFAULT_EDGE_LIMIT: usize = 1 << 27;
const EIGEN_TOL: f64 = 1e-12;
const MAX_POWER_ITERATIONS: usize = 2_000_000;

/// Sparse non-negative matrix in compressed row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for row in matrix {
            if row.len() != n {
                return Err(Error::DimensionMismatch("adjacency matrix must be square".into()));
            }
            for (j, &w) in row.iter().enumerate() {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::NegativeValue { index: j, value: w });
                }
                if w > 0.0 {
                    targets.push(j as u32);
                    weights.push(w);
                }
            }
            offsets.push(targets.len());
        }
        Ok(Adjacency { offsets, targets, weights })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()].iter().map(|&v| v as usize).zip(self.weights[range].iter().copied())
    }
}

/// Valid `height x width` blocks, joined when they overlap in `height - 1`
/// rows and the stacked block is valid.
#[derive(Clone, Debug)]
pub struct TransferGraph {
    width: usize,
    height: usize,
    /// Row-major blocks in lexicographic order.
    vertices: Vec<Vec<u8>>,
    adjacency: Adjacency,
}

impl TransferGraph {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.num_edges()
    }

    pub fn vertex(&self, id: usize) -> &[u8] {
        &self.vertices[id]
    }

    pub fn successors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(id).map(|(v, _)| v)
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }
}

/// Rows of memory needed so that edges see every vertical rule.
pub fn transfer_height(spec: &ConstraintSpec) -> usize {
    spec.max_window_height().saturating_sub(1).max(1)
}

pub fn build_transfer_graph(spec: &ConstraintSpec, width: usize) -> Result<TransferGraph> {
    build_transfer_graph_with_limits(spec, width, DEFAULT_VERTEX_LIMIT, DEFAULT_EDGE_LIMIT)
}

pub fn build_transfer_graph_with_limits(
    spec: &ConstraintSpec,
    width: usize,
    vertex_limit: usize,
    edge_limit: usize,
) -> Result<TransferGraph> {
    if width == 0 {
        return Err(Error::DimensionMismatch("stripe width must be at least 1".into()));
    }
    let h = transfer_height(spec);
    let blocks = enumerate_patches(spec, h, width, 0)?;
    if blocks.len() > vertex_limit {
        return Err(Error::BudgetExceeded { count: blocks.len(), limit: vertex_limit });
    }
    let mut vertices: Vec<Vec<u8>> = blocks.iter().map(|b| b.to_vec()).collect();
    vertices.sort();

    // group vertices by their top h-1 rows
    let overlap = (h - 1) * width;
    let mut by_top: HashMap<&[u8], Vec<u32>> = HashMap::new();
    for (id, v) in vertices.iter().enumerate() {
        by_top.entry(&v[..overlap]).or_default().push(id as u32);
    }
    let checker = RectChecker::new(spec, h + 1, width);
    let last_row = h * width..(h + 1) * width;
    let mut grid = vec![0u8; (h + 1) * width];
    let mut offsets = vec![0];
    let mut targets = Vec::new();
    for u in &vertices {
        grid[..h * width].copy_from_slice(u);
        if let Some(candidates) = by_top.get(&u[width..]) {
            for &v in candidates {
                grid[h * width..].copy_from_slice(&vertices[v as usize][overlap..]);
                if last_row.clone().all(|k| checker.ok_at(&grid, k)) {
                    targets.push(v);
                }
            }
        }
        if targets.len() > edge_limit {
            return Err(Error::BudgetExceeded { count: targets.len(), limit: edge_limit });
        }
        offsets.push(targets.len());
    }
    let weights = vec![1.0; targets.len()];
    Ok(TransferGraph { width, height: h, vertices, adjacency: Adjacency { offsets, targets, weights } })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perron {
    pub eigenvalue: f64,
    /// `|A v - lambda v| / |v|` in the max norm, on the dominant component.
    pub residual: f64,
    pub iterations: usize,
}

/// Strongly connected components, each listed in increasing vertex order.
fn components(a: &Adjacency) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // frames of (vertex, position in its edge list)
        let mut frames = vec![(root, a.offsets[root])];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut pos)) = frames.last_mut() {
            if *pos < a.offsets[u + 1] {
                let v = a.targets[*pos] as usize;
                *pos += 1;
                if index[v] == usize::MAX {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    frames.push((v, a.offsets[v]));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == u {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Power iteration on `A + I` restricted to one strongly connected
/// component; the shift makes the restriction primitive.
fn component_eigenvalue(a: &Adjacency, comp: &[usize], local: &[usize]) -> Result<Perron> {
    let m = comp.len();
    let mut v = vec![1.0; m];
    let mut w = vec![0.0; m];
    let apply = |v: &[f64], w: &mut [f64]| {
        for (i, &u) in comp.iter().enumerate() {
            w[i] = v[i];
            for (t, weight) in a.row(u) {
                let j = local[t];
                if j != usize::MAX {
                    w[i] += weight * v[j];
                }
            }
        }
    };
    for iteration in 1..=MAX_POWER_ITERATIONS {
        apply(&v, &mut w);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            let r = w[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let scale = w.iter().fold(0.0f64, |x, &y| x.max(y));
        for i in 0..m {
            v[i] = w[i] / scale;
        }
        if hi - lo <= EIGEN_TOL * hi {
            let lambda = 0.5 * (lo + hi) - 1.0;
            apply(&v, &mut w);
            let residual = (0..m).map(|i| (w[i] - v[i] - lambda * v[i]).abs()).fold(0.0, f64::max)
                / v.iter().fold(0.0f64, |x, &y| x.max(y));
            return Ok(Perron { eigenvalue: lambda, residual, iterations: iteration });
        }
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}

pub fn perron_of(a: &Adjacency) -> Result<Perron> {
    let mut best = Perron { eigenvalue: 0.0, residual: 0.0, iterations: 0 };
    let mut local = vec![usize::MAX; a.len()];
    for comp in components(a) {
        let has_edge = comp.iter().any(|&u| a.row(u).any(|(t, _)| comp.binary_search(&t).is_ok()));
        if !has_edge {
            continue;
        }
        for (i, &u) in comp.iter().enumerate() {
            local[u] = i;
        }
        let p = component_eigenvalue(a, &comp, &local)?;
        for &u in &comp {
            local[u] = usize::MAX;
        }
        if p.eigenvalue > best.eigenvalue {
            best = p;
        }
    }
    Ok(best)
}

pub fn perron_eigenvalue(g: &TransferGraph) -> Result<Perron> {
    perron_of(&g.adjacency)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StripeBound {
    pub width: usize,
    pub height: usize,
    pub vertices: usize,
    pub edges: usize,
    pub perron: Perron,
    /// `log2(lambda) / width` bits per symbol.
    pub bound: f64,
}

pub fn stripe_upper_bound(spec: &ConstraintSpec, width: usize) -> Result<StripeBound> {
    let g = build_transfer_graph(spec, width)?;
    let perron = perron_eigenvalue(&g)?;
    Ok(StripeBound {
        width,
        height: g.height(),
        vertices: g.num_vertices(),
        edges: g.num_edges(),
        bound: perron.eigenvalue.log2() / width as f64,
        perron,
    })
}
