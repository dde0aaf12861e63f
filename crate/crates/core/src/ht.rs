//! Hierarchical tensor format on binary dimension trees: leaf frames,
//! transfer tensors, arithmetic and error-controlled truncation.
//!
//! Conventions: the transfer tensor of an internal non-root vertex with
//! rank `r` and child ranks `r1`, `r2` is stored as an `(r1*r2) x r`
//! matrix whose row index runs over `(k1, k2)` with the first child
//! fastest. The root holds an `r_l x r_r` matrix. The value represented
//! by a vertex with frame columns `X[:, k]` is built bottom-up from
//! elementwise Kronecker combinations of its children.
//!
//! For `d = 1` the format degenerates to a single leaf frame whose
//! column sum is the represented vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cp::{CpOperator, CpTensor};
use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::san::next_index;
use crate::tree::DimensionTree;

#[derive(Debug, Clone)]
enum HtNode {
    /// `n x r` leaf frame.
    Leaf(DMatrix<f64>),
    /// `(r1*r2) x r` transfer matrix of an internal non-root vertex.
    Internal(DMatrix<f64>),
    /// `r_l x r_r` root transfer matrix.
    Root(DMatrix<f64>),
}

/// Tensor in hierarchical format over a fixed dimension tree.
#[derive(Debug, Clone)]
pub struct HtTensor {
    tree: DimensionTree,
    dims: Vec<usize>,
    nodes: Vec<HtNode>,
}

impl HtTensor {
    /// Converts a CP tensor; every rank component is bounded by
    /// `max(r, 1)`.
    pub fn from_cp(cp: &CpTensor, tree: &DimensionTree) -> Result<Self> {
        if tree.d() != cp.dims().len() {
            return Err(Error::DimMismatch(format!(
                "tree has {} leaves, tensor has {} modes",
                tree.d(),
                cp.dims().len()
            )));
        }
        let dims = cp.dims().to_vec();
        let r = cp.rank();
        if tree.d() == 1 {
            let n = dims[0];
            let mut u = DMatrix::zeros(n, r.max(1));
            for (nu, term) in cp.terms().iter().enumerate() {
                u.set_column(nu, &term[0]);
            }
            return Ok(HtTensor {
                tree: tree.clone(),
                dims,
                nodes: vec![HtNode::Leaf(u)],
            });
        }
        let rr = r.max(1);
        let mut nodes = Vec::with_capacity(tree.len());
        for id in 0..tree.len() {
            let node = if tree.is_leaf(id) {
                let mode = tree.leaf_mode(id);
                let mut u = DMatrix::zeros(dims[mode], rr);
                for (nu, term) in cp.terms().iter().enumerate() {
                    u.set_column(nu, &term[mode]);
                }
                HtNode::Leaf(u)
            } else if id == tree.root() {
                let mut c = DMatrix::zeros(rr, rr);
                for k in 0..r {
                    c[(k, k)] = 1.0;
                }
                HtNode::Root(c)
            } else {
                let mut b = DMatrix::zeros(rr * rr, rr);
                for k in 0..rr.min(r.max(if r == 0 { 1 } else { r })) {
                    b[(k + rr * k, k)] = 1.0;
                }
                if r == 0 {
                    b[(0, 0)] = 1.0;
                }
                HtNode::Internal(b)
            };
            nodes.push(node);
        }
        Ok(HtTensor {
            tree: tree.clone(),
            dims,
            nodes,
        })
    }

    /// Random tensor with the given uniform rank; used by studies and tests.
    pub fn random<R: Rng>(tree: &DimensionTree, dims: &[usize], rank: usize, rng: &mut R) -> Self {
        let rank = rank.max(1);
        let mut nodes = Vec::with_capacity(tree.len());
        if tree.d() == 1 {
            nodes.push(HtNode::Leaf(DMatrix::from_fn(dims[0], rank, |_, _| {
                rng.random_range(-1.0..1.0)
            })));
        } else {
            for id in 0..tree.len() {
                let node = if tree.is_leaf(id) {
                    let n = dims[tree.leaf_mode(id)];
                    let r = rank.min(n);
                    HtNode::Leaf(DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0)))
                } else if id == tree.root() {
                    let (l, r_) = tree.children(id).unwrap();
                    let rl = rank.min(dim_bound(tree, dims, l));
                    let rr = rank.min(dim_bound(tree, dims, r_));
                    HtNode::Root(DMatrix::from_fn(rl, rr, |_, _| rng.random_range(-1.0..1.0)))
                } else {
                    let (l, r_) = tree.children(id).unwrap();
                    let rt = rank.min(dim_bound(tree, dims, id));
                    let r1 = rank.min(dim_bound(tree, dims, l));
                    let r2 = rank.min(dim_bound(tree, dims, r_));
                    HtNode::Internal(DMatrix::from_fn(r1 * r2, rt, |_, _| {
                        rng.random_range(-1.0..1.0)
                    }))
                };
                nodes.push(node);
            }
        }
        HtTensor {
            tree: tree.clone(),
            dims: dims.to_vec(),
            nodes,
        }
    }

    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Rank component of the edge above a non-root vertex.
    pub fn rank(&self, id: usize) -> usize {
        match &self.nodes[id] {
            HtNode::Leaf(u) => u.ncols(),
            HtNode::Internal(b) => b.ncols(),
            HtNode::Root(_) => panic!("the root carries no edge rank"),
        }
    }

    /// All rank components, indexed by vertex id (`None` at the root).
    pub fn ranks(&self) -> Vec<Option<usize>> {
        (0..self.nodes.len())
            .map(|id| {
                if id == self.tree.root() && self.tree.d() > 1 {
                    None
                } else {
                    Some(self.rank(id))
                }
            })
            .collect()
    }

    /// Largest rank component.
    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().flatten().max().unwrap_or(1)
    }

    /// Number of stored reals: leaf frames, transfer tensors and the root
    /// transfer matrix.
    pub fn storage_size(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                HtNode::Leaf(u) => u.nrows() * u.ncols(),
                HtNode::Internal(b) => b.nrows() * b.ncols(),
                HtNode::Root(c) => c.nrows() * c.ncols(),
            })
            .sum()
    }

    fn uniform_storage(&self, r: usize) -> usize {
        if self.tree.d() == 1 {
            return self.dims[0] * r;
        }
        let mut total = 0;
        for id in 0..self.tree.len() {
            total += if self.tree.is_leaf(id) {
                self.dims[self.tree.leaf_mode(id)] * r
            } else if id == self.tree.root() {
                r * r
            } else {
                r * r * r
            };
        }
        total
    }

    /// Smallest integer uniform rank whose storage cost reaches the
    /// actual storage cost.
    pub fn effective_rank(&self) -> usize {
        let actual = self.storage_size();
        let mut r = 1;
        while self.uniform_storage(r) < actual {
            r += 1;
        }
        r
    }

    /// Single entry; cost linear in the tree size.
    pub fn entry(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.dims.len() || x.iter().zip(&self.dims).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: x.to_vec(),
                dims: self.dims.clone(),
            });
        }
        if self.tree.d() == 1 {
            let HtNode::Leaf(u) = &self.nodes[0] else {
                unreachable!()
            };
            return Ok(u.row(x[0]).sum());
        }
        let mut vecs: Vec<Option<DVector<f64>>> = vec![None; self.nodes.len()];
        let mut out = 0.0;
        for id in self.tree.post_order() {
            match &self.nodes[id] {
                HtNode::Leaf(u) => {
                    vecs[id] = Some(u.row(x[self.tree.leaf_mode(id)]).transpose());
                }
                HtNode::Internal(b) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let v1 = vecs[l].take().unwrap();
                    let v2 = vecs[r].take().unwrap();
                    vecs[id] = Some(b.tr_mul(&v2.kronecker(&v1)));
                }
                HtNode::Root(c) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let v1 = vecs[l].take().unwrap();
                    let v2 = vecs[r].take().unwrap();
                    out = (v1.transpose() * c * v2)[(0, 0)];
                }
            }
        }
        Ok(out)
    }

    /// Full reconstruction, for small state spaces only.
    pub fn to_dense(&self, cap: u128) -> Result<DenseTensor> {
        let states: u128 = self.dims.iter().map(|&n| n as u128).product();
        if states > cap {
            return Err(Error::CapExceeded { states, cap });
        }
        if self.tree.d() == 1 {
            let HtNode::Leaf(u) = &self.nodes[0] else {
                unreachable!()
            };
            let v: Vec<f64> = (0..u.nrows()).map(|i| u.row(i).sum()).collect();
            return DenseTensor::new(self.dims.clone(), v);
        }
        // frames[id] = (matrix over the vertex's modes, mode order with
        // the first entry fastest)
        let mut frames: Vec<Option<(DMatrix<f64>, Vec<usize>)>> = vec![None; self.nodes.len()];
        let mut result = None;
        for id in self.tree.post_order() {
            match &self.nodes[id] {
                HtNode::Leaf(u) => {
                    frames[id] = Some((u.clone(), vec![self.tree.leaf_mode(id)]));
                }
                HtNode::Internal(b) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let (f1, o1) = frames[l].take().unwrap();
                    let (f2, o2) = frames[r].take().unwrap();
                    let f = f2.kronecker(&f1) * b;
                    let mut order = o1;
                    order.extend(o2);
                    frames[id] = Some((f, order));
                }
                HtNode::Root(c) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let (f1, o1) = frames[l].take().unwrap();
                    let (f2, o2) = frames[r].take().unwrap();
                    let full = f1 * c * f2.transpose();
                    let mut order = o1;
                    order.extend(o2);
                    result = Some((full, order));
                }
            }
        }
        let (full, order) = result.unwrap();
        // full is column-major, so its flat slice has order[0] fastest
        let data = permute_to_natural(full.as_slice(), &order, &self.dims);
        DenseTensor::new(self.dims.clone(), data)
    }

    fn check_compatible(&self, other: &HtTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        if self.tree != other.tree {
            return Err(Error::TreeMismatch(
                "operands live on different dimension trees".into(),
            ));
        }
        Ok(())
    }

    /// Exact sum; rank components add.
    pub fn add(&self, other: &HtTensor) -> Result<HtTensor> {
        self.check_compatible(other)?;
        let nodes = (0..self.nodes.len())
            .map(|id| match (&self.nodes[id], &other.nodes[id]) {
                (HtNode::Leaf(a), HtNode::Leaf(b)) => {
                    let mut u = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                    u.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
                    u.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
                    HtNode::Leaf(u)
                }
                (HtNode::Internal(a), HtNode::Internal(b)) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    HtNode::Internal(block_embed(
                        a,
                        self.rank(l),
                        self.rank(r),
                        b,
                        other.rank(l),
                        other.rank(r),
                    ))
                }
                (HtNode::Root(a), HtNode::Root(b)) => {
                    let mut c = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
                    c.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
                    c.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols()))
                        .copy_from(b);
                    HtNode::Root(c)
                }
                _ => unreachable!("same tree implies same node kinds"),
            })
            .collect();
        Ok(HtTensor {
            tree: self.tree.clone(),
            dims: self.dims.clone(),
            nodes,
        })
    }

    /// Exact scalar multiple; ranks unchanged.
    pub fn scale(&self, c: f64) -> HtTensor {
        let mut out = self.clone();
        match &mut out.nodes[out.tree.root()] {
            HtNode::Root(m) => *m *= c,
            HtNode::Leaf(u) => *u *= c, // d = 1
            HtNode::Internal(_) => unreachable!(),
        }
        out
    }

    /// Frobenius inner product via per-vertex Gram matrices.
    pub fn inner(&self, other: &HtTensor) -> Result<f64> {
        self.check_compatible(other)?;
        if self.tree.d() == 1 {
            let (HtNode::Leaf(a), HtNode::Leaf(b)) = (&self.nodes[0], &other.nodes[0]) else {
                unreachable!()
            };
            let va = DVector::from_iterator(a.nrows(), (0..a.nrows()).map(|i| a.row(i).sum()));
            let vb = DVector::from_iterator(b.nrows(), (0..b.nrows()).map(|i| b.row(i).sum()));
            return Ok(va.dot(&vb));
        }
        let mut grams: Vec<Option<DMatrix<f64>>> = vec![None; self.nodes.len()];
        let mut out = 0.0;
        for id in self.tree.post_order() {
            match (&self.nodes[id], &other.nodes[id]) {
                (HtNode::Leaf(a), HtNode::Leaf(b)) => {
                    grams[id] = Some(a.tr_mul(b));
                }
                (HtNode::Internal(a), HtNode::Internal(b)) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let m1 = grams[l].take().unwrap();
                    let m2 = grams[r].take().unwrap();
                    grams[id] = Some(a.tr_mul(&apply_pair(&m1, &m2, b)));
                }
                (HtNode::Root(a), HtNode::Root(b)) => {
                    let (l, r) = self.tree.children(id).unwrap();
                    let m1 = grams[l].take().unwrap();
                    let m2 = grams[r].take().unwrap();
                    out = (m1.tr_mul(a) * m2).dot(b);
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    /// Frobenius norm, computed from the orthogonalized representation.
    pub fn norm(&self) -> f64 {
        if self.tree.d() == 1 {
            let HtNode::Leaf(u) = &self.nodes[0] else {
                unreachable!()
            };
            return (0..u.nrows())
                .map(|i| u.row(i).sum().powi(2))
                .sum::<f64>()
                .sqrt();
        }
        let mut work = self.clone();
        work.orthogonalize();
        match &work.nodes[work.tree.root()] {
            HtNode::Root(c) => c.norm(),
            _ => unreachable!(),
        }
    }

    /// Brings all leaf frames and transfer matrices to orthonormal
    /// columns, accumulating the triangular factors into the root.
    fn orthogonalize(&mut self) {
        debug_assert!(self.tree.d() > 1);
        let mut rfac: Vec<Option<DMatrix<f64>>> = vec![None; self.nodes.len()];
        for id in self.tree.post_order() {
            match &mut self.nodes[id] {
                HtNode::Leaf(u) => {
                    let qr = u.clone().qr();
                    let (q, r) = (qr.q(), qr.r());
                    *u = q;
                    rfac[id] = Some(r);
                }
                HtNode::Internal(b) => {
                    let (l, r_) = self.tree.children(id).unwrap();
                    let rl = rfac[l].take().unwrap();
                    let rr = rfac[r_].take().unwrap();
                    let qr = apply_pair(&rl, &rr, b).qr();
                    let (q, r) = (qr.q(), qr.r());
                    *b = q;
                    rfac[id] = Some(r);
                }
                HtNode::Root(c) => {
                    let (l, r_) = self.tree.children(id).unwrap();
                    let rl = rfac[l].take().unwrap();
                    let rr = rfac[r_].take().unwrap();
                    *c = rl * &*c * rr.transpose();
                }
            }
        }
    }

    /// Error-controlled truncation. The error budget `(eps_rel ||a||)^2`
    /// is split equally over the non-root vertices; each vertex keeps the
    /// leading eigenvectors of its reduced Gramian. Rank components never
    /// grow, never drop below 1 and respect `rank_cap` when given.
    pub fn truncate(&self, eps_rel: f64, rank_cap: Option<usize>) -> HtTensor {
        if self.tree.d() == 1 {
            let HtNode::Leaf(u) = &self.nodes[0] else {
                unreachable!()
            };
            let v = DVector::from_iterator(u.nrows(), (0..u.nrows()).map(|i| u.row(i).sum()));
            return HtTensor {
                tree: self.tree.clone(),
                dims: self.dims.clone(),
                nodes: vec![HtNode::Leaf(DMatrix::from_column_slice(u.nrows(), 1, v.as_slice()))],
            };
        }
        let mut work = self.clone();
        work.orthogonalize();
        let norm = match &work.nodes[work.tree.root()] {
            HtNode::Root(c) => c.norm(),
            _ => unreachable!(),
        };
        let budget = (eps_rel * norm).powi(2) / work.tree.non_root_count() as f64;

        // reduced Gramians, root to leaves
        let mut grams: Vec<Option<DMatrix<f64>>> = vec![None; work.nodes.len()];
        for id in work.tree.pre_order() {
            match &work.nodes[id] {
                HtNode::Root(c) => {
                    let (l, r) = work.tree.children(id).unwrap();
                    grams[l] = Some(c * c.transpose());
                    grams[r] = Some(c.tr_mul(c));
                }
                HtNode::Internal(b) => {
                    let (l, r) = work.tree.children(id).unwrap();
                    let g = grams[id].as_ref().unwrap();
                    let r1 = work.rank(l);
                    let r2 = work.rank(r);
                    let m = b * g;
                    let mut gl = DMatrix::zeros(r1, r1);
                    for k2 in 0..r2 {
                        let ms = m.rows(r1 * k2, r1);
                        let bs = b.rows(r1 * k2, r1);
                        gl += ms * bs.transpose();
                    }
                    let bsw = swap_pair_index(b, r1, r2);
                    let msw = swap_pair_index(&m, r1, r2);
                    let mut gr = DMatrix::zeros(r2, r2);
                    for k1 in 0..r1 {
                        let ms = msw.rows(r2 * k1, r2);
                        let bs = bsw.rows(r2 * k1, r2);
                        gr += ms * bs.transpose();
                    }
                    grams[l] = Some(gl);
                    grams[r] = Some(gr);
                }
                HtNode::Leaf(_) => {}
            }
        }

        // per-vertex spectral truncation
        let root = work.tree.root();
        let mut proj: Vec<Option<DMatrix<f64>>> = vec![None; work.nodes.len()];
        let mut chosen: Vec<usize> = vec![0; work.nodes.len()];
        let mut bases: Vec<Option<(DMatrix<f64>, Vec<f64>)>> = vec![None; work.nodes.len()];
        for id in 0..work.nodes.len() {
            if id == root {
                continue;
            }
            let g = grams[id].as_ref().unwrap();
            let sym = (g + g.transpose()) * 0.5;
            let (vectors, values) = spectral_basis(&sym);
            chosen[id] = select_rank(&values, budget, rank_cap);
            bases[id] = Some((vectors, values));
        }
        // the two root children have identical nonzero spectra; keep
        // their rank components equal
        let (rl, rr) = work.tree.children(root).unwrap();
        let target = chosen[rl]
            .max(chosen[rr])
            .min(work.rank(rl))
            .min(work.rank(rr));
        chosen[rl] = target;
        chosen[rr] = target;
        for id in 0..work.nodes.len() {
            if id == root {
                continue;
            }
            let (vectors, _) = bases[id].take().unwrap();
            proj[id] = Some(vectors.columns(0, chosen[id]).into_owned());
        }

        // apply the projections
        let nodes = (0..work.nodes.len())
            .map(|id| match &work.nodes[id] {
                HtNode::Leaf(u) => HtNode::Leaf(u * proj[id].as_ref().unwrap()),
                HtNode::Internal(b) => {
                    let (l, r) = work.tree.children(id).unwrap();
                    let s1 = proj[l].as_ref().unwrap();
                    let s2 = proj[r].as_ref().unwrap();
                    let st = proj[id].as_ref().unwrap();
                    HtNode::Internal(apply_pair(&s1.transpose(), &s2.transpose(), &(b * st)))
                }
                HtNode::Root(c) => {
                    let (l, r) = work.tree.children(id).unwrap();
                    let s1 = proj[l].as_ref().unwrap();
                    let s2 = proj[r].as_ref().unwrap();
                    HtNode::Root(s1.tr_mul(c) * s2)
                }
            })
            .collect();
        HtTensor {
            tree: work.tree,
            dims: work.dims,
            nodes,
        }
    }
}

/// Applies a CP operator mode-wise; each rank component of the result is
/// the input rank times the term count.
pub fn apply_cp_operator(op: &CpOperator, v: &HtTensor) -> Result<HtTensor> {
    if op.dims() != v.dims() {
        return Err(Error::DimMismatch(format!(
            "operator dims {:?} vs tensor dims {:?}",
            op.dims(),
            v.dims()
        )));
    }
    let mut out: Option<HtTensor> = None;
    for term in op.terms() {
        let mut applied = v.clone();
        for id in 0..applied.nodes.len() {
            if let HtNode::Leaf(u) = &mut applied.nodes[id] {
                let mode = applied.tree.leaf_mode(id);
                *u = &term[mode] * &*u;
            }
        }
        out = Some(match out {
            None => applied,
            Some(acc) => acc.add(&applied)?,
        });
    }
    Ok(out.expect("operator has at least one term"))
}

/// Number of leaves below a vertex bounds its meaningful rank.
fn dim_bound(tree: &DimensionTree, dims: &[usize], id: usize) -> usize {
    tree.node(id)
        .modes
        .iter()
        .map(|&m| dims[m])
        .fold(1usize, |a, b| a.saturating_mul(b))
        .min(1 << 20)
}

/// For every column `c` of `b` (length `m1.ncols() * m2.ncols()`, first
/// index fastest) computes `vec(m1 * C * m2^T)` with `C` the unfolding
/// of `c`.
fn apply_pair(m1: &DMatrix<f64>, m2: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (r1, r2) = (m1.ncols(), m2.ncols());
    let (s1, s2) = (m1.nrows(), m2.nrows());
    debug_assert_eq!(b.nrows(), r1 * r2);
    let mut out = DMatrix::zeros(s1 * s2, b.ncols());
    for c in 0..b.ncols() {
        let col = b.column(c);
        let cmat = DMatrix::from_column_slice(r1, r2, col.as_slice());
        let prod = m1 * cmat * m2.transpose();
        out.set_column(c, &DVector::from_column_slice(prod.as_slice()));
    }
    out
}

/// Reorders the paired row index `(k1, k2)` of `b` into `(k2, k1)`.
fn swap_pair_index(b: &DMatrix<f64>, r1: usize, r2: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for k2 in 0..r2 {
        for k1 in 0..r1 {
            out.set_row(k2 + r2 * k1, &b.row(k1 + r1 * k2));
        }
    }
    out
}

/// Embeds two transfer matrices block-diagonally in the paired row index.
fn block_embed(
    a: &DMatrix<f64>,
    r1a: usize,
    r2a: usize,
    b: &DMatrix<f64>,
    r1b: usize,
    r2b: usize,
) -> DMatrix<f64> {
    let (r1, r2) = (r1a + r1b, r2a + r2b);
    let mut out = DMatrix::zeros(r1 * r2, a.ncols() + b.ncols());
    for k in 0..a.ncols() {
        for k2 in 0..r2a {
            for k1 in 0..r1a {
                out[(k1 + r1 * k2, k)] = a[(k1 + r1a * k2, k)];
            }
        }
    }
    for k in 0..b.ncols() {
        for k2 in 0..r2b {
            for k1 in 0..r1b {
                out[(r1a + k1 + r1 * (r2a + k2), a.ncols() + k)] = b[(k1 + r1b * k2, k)];
            }
        }
    }
    out
}

/// Orthonormal eigenbasis of a symmetric positive semidefinite matrix with
/// eigenvalues sorted in decreasing order and clamped to be non-negative.
///
/// The symmetric eigensolver occasionally fails to converge and reports
/// non-finite values; the singular value decomposition is slower but robust,
/// and for a positive semidefinite matrix its singular pairs coincide with
/// the eigenpairs, so it serves as a fallback.
fn spectral_basis(sym: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let eig = sym.clone().symmetric_eigen();
    let finite = eig.eigenvalues.iter().all(|v| v.is_finite())
        && eig.eigenvectors.iter().all(|v| v.is_finite());
    let (basis, raw) = if finite {
        (eig.eigenvectors, eig.eigenvalues)
    } else {
        let svd = sym.clone().svd(true, false);
        (svd.u.expect("singular vectors requested"), svd.singular_values)
    };
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| raw[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(sym.nrows(), sym.ncols(), |i, j| basis[(i, order[j])]);
    (vectors, values)
}

/// Keeps the shortest prefix whose discarded tail fits in the budget.
fn select_rank(values_desc: &[f64], budget: f64, cap: Option<usize>) -> usize {
    let mut discarded = 0.0;
    let mut r = values_desc.len();
    while r > 1 {
        let next = discarded + values_desc[r - 1];
        if next <= budget {
            discarded = next;
            r -= 1;
        } else {
            break;
        }
    }
    if let Some(cap) = cap {
        r = r.min(cap.max(1));
    }
    r.max(1)
}

/// Rearranges flat data indexed with `order[0]` fastest into the natural
/// layout with mode 0 fastest.
fn permute_to_natural(data: &[f64], order: &[usize], dims: &[usize]) -> Vec<f64> {
    let d = order.len();
    let sizes_in_order: Vec<usize> = order.iter().map(|&m| dims[m]).collect();
    let mut nat_strides = vec![1usize; d];
    for mu in 1..d {
        nat_strides[mu] = nat_strides[mu - 1] * dims[mu - 1];
    }
    let mut out = vec![0.0; data.len()];
    let mut x = vec![0usize; d];
    let mut lin = 0usize;
    loop {
        let nat: usize = x
            .iter()
            .zip(order)
            .map(|(&xi, &m)| xi * nat_strides[m])
            .sum();
        out[nat] = data[lin];
        lin += 1;
        if !next_index(&mut x, &sizes_in_order) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const CAP: u128 = 1 << 20;

    fn random_cp(dims: &[usize], rank: usize, seed: u64) -> CpTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..rank)
            .map(|_| {
                dims.iter()
                    .map(|&n| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        CpTensor::new(dims.to_vec(), terms).unwrap()
    }

    fn cp_dense(cp: &CpTensor) -> DenseTensor {
        let mut t = DenseTensor::zeros(cp.dims().to_vec()).unwrap();
        let mut x = vec![0usize; cp.dims().len()];
        loop {
            let v = cp.entry(&x).unwrap();
            t.set(&x, v);
            if !next_index(&mut x, cp.dims()) {
                break;
            }
        }
        t
    }

    fn assert_dense_eq(a: &DenseTensor, b: &DenseTensor, eps: f64) {
        assert_eq!(a.dims(), b.dims());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_relative_eq!(x, y, epsilon = eps, max_relative = eps);
        }
    }

    #[test]
    fn rank_one_cp_gives_all_rank_one() {
        let tree = DimensionTree::balanced(3).unwrap();
        let p0 = CpTensor::unit(&[2, 2, 2], &[0, 1, 0]).unwrap();
        let ht = HtTensor::from_cp(&p0, &tree).unwrap();
        assert_eq!(ht.max_rank(), 1);
        assert_eq!(ht.entry(&[0, 1, 0]).unwrap(), 1.0);
        assert_eq!(ht.entry(&[1, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn cp_conversion_matches_dense() {
        let dims = [2, 3, 2];
        let tree = DimensionTree::balanced(3).unwrap();
        let cp = random_cp(&dims, 2, 7);
        let ht = HtTensor::from_cp(&cp, &tree).unwrap();
        assert!(ht.max_rank() <= 2);
        assert_dense_eq(&ht.to_dense(CAP).unwrap(), &cp_dense(&cp), 1e-12);
    }

    #[test]
    fn zero_cp_evaluates_to_zero() {
        let tree = DimensionTree::balanced(3).unwrap();
        let z = CpTensor::zero(vec![2, 2, 2]).unwrap();
        let ht = HtTensor::from_cp(&z, &tree).unwrap();
        assert_eq!(ht.to_dense(CAP).unwrap().norm(), 0.0);
        assert_eq!(ht.norm(), 0.0);
    }

    #[test]
    fn add_and_scale_match_dense() {
        let dims = [2, 2, 3];
        let tree = DimensionTree::balanced(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let b = HtTensor::random(&tree, &dims, 2, &mut rng);
        let da = a.to_dense(CAP).unwrap();
        let db = b.to_dense(CAP).unwrap();
        let sum = a.add(&b).unwrap().to_dense(CAP).unwrap();
        for i in 0..da.data().len() {
            assert_relative_eq!(sum.data()[i], da.data()[i] + db.data()[i], epsilon = 1e-12);
        }
        let scaled = a.scale(2.5).to_dense(CAP).unwrap();
        for i in 0..da.data().len() {
            assert_relative_eq!(scaled.data()[i], 2.5 * da.data()[i], epsilon = 1e-12);
        }
        // rank bookkeeping
        let s = a.add(&b).unwrap();
        for id in 0..tree.len() {
            if id != tree.root() {
                assert_eq!(s.rank(id), a.rank(id) + b.rank(id));
            }
        }
    }

    #[test]
    fn add_zero_is_identity() {
        let tree = DimensionTree::balanced(3).unwrap();
        let p0 = HtTensor::from_cp(&CpTensor::unit(&[2, 2, 2], &[0, 0, 0]).unwrap(), &tree).unwrap();
        let z = HtTensor::from_cp(&CpTensor::zero(vec![2, 2, 2]).unwrap(), &tree).unwrap();
        let s = p0.add(&z).unwrap();
        assert_dense_eq(&s.to_dense(CAP).unwrap(), &p0.to_dense(CAP).unwrap(), 1e-13);
    }

    #[test]
    fn inner_and_norm_match_dense() {
        let dims = [2, 2, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let b = HtTensor::random(&tree, &dims, 3, &mut rng);
        let da = a.to_dense(CAP).unwrap();
        let db = b.to_dense(CAP).unwrap();
        let dot: f64 = da.data().iter().zip(db.data()).map(|(x, y)| x * y).sum();
        assert_relative_eq!(a.inner(&b).unwrap(), dot, max_relative = 1e-12);
        assert_relative_eq!(a.norm(), da.norm(), max_relative = 1e-12);
        assert_relative_eq!(a.norm().powi(2), a.inner(&a).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn unit_vector_norms() {
        let tree = DimensionTree::balanced(4).unwrap();
        let p0 = HtTensor::from_cp(&CpTensor::unit(&[2; 4], &[0; 4]).unwrap(), &tree).unwrap();
        let e = HtTensor::from_cp(&CpTensor::ones(&[2; 4]).unwrap(), &tree).unwrap();
        assert_relative_eq!(p0.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p0.inner(&p0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.inner(&p0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entries_match_dense() {
        let dims = [2, 3, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let da = a.to_dense(CAP).unwrap();
        let mut x = vec![0usize; 4];
        loop {
            assert_relative_eq!(a.entry(&x).unwrap(), da.get(&x), max_relative = 1e-12, epsilon = 1e-13);
            if !next_index(&mut x, &dims) {
                break;
            }
        }
    }

    #[test]
    fn identity_operator_keeps_values() {
        let dims = [2, 2, 2];
        let tree = DimensionTree::balanced(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let id = CpOperator::identity(&dims).unwrap();
        let b = apply_cp_operator(&id, &a).unwrap();
        assert_dense_eq(&b.to_dense(CAP).unwrap(), &a.to_dense(CAP).unwrap(), 1e-12);
    }

    #[test]
    fn diagonal_operator_scales_mode() {
        let dims = [2, 2];
        let tree = DimensionTree::balanced(2).unwrap();
        let p0 = HtTensor::from_cp(&CpTensor::ones(&dims).unwrap(), &tree).unwrap();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let op = CpOperator::new(vec![2, 2], vec![vec![diag, DMatrix::identity(2, 2)]]).unwrap();
        let out = apply_cp_operator(&op, &p0).unwrap();
        assert_relative_eq!(out.entry(&[0, 0]).unwrap(), 1.0);
        assert_relative_eq!(out.entry(&[1, 0]).unwrap(), 2.0);
        assert_relative_eq!(out.entry(&[1, 1]).unwrap(), 2.0);
    }

    #[test]
    fn operator_multiplies_ranks_by_term_count() {
        let dims = [2, 2, 2];
        let tree = DimensionTree::balanced(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let id = CpOperator::identity(&dims).unwrap();
        let two = id.add(&id.scale(2.0)).unwrap();
        let b = apply_cp_operator(&two, &a).unwrap();
        for id_ in 0..tree.len() {
            if id_ != tree.root() {
                assert_eq!(b.rank(id_), 2 * a.rank(id_));
            }
        }
    }

    #[test]
    fn truncate_exact_at_eps_zero() {
        let dims = [2, 2, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = HtTensor::random(&tree, &dims, 3, &mut rng);
        let t = a.truncate(0.0, None);
        assert_dense_eq(&t.to_dense(CAP).unwrap(), &a.to_dense(CAP).unwrap(), 1e-12);
        for id in 0..tree.len() {
            if id != tree.root() {
                assert!(t.rank(id) <= a.rank(id));
            }
        }
    }

    #[test]
    fn truncate_rank_one_keeps_evaluation() {
        let tree = DimensionTree::balanced(3).unwrap();
        let p0 = HtTensor::from_cp(&CpTensor::unit(&[2, 2, 2], &[1, 0, 1]).unwrap(), &tree).unwrap();
        let t = p0.truncate(1e-8, None);
        assert_dense_eq(&t.to_dense(CAP).unwrap(), &p0.to_dense(CAP).unwrap(), 1e-13);
        assert_eq!(t.max_rank(), 1);
    }

    #[test]
    fn truncate_drops_small_component() {
        // sum of two product tensors with weights 1 and 1e-6
        let dims = [2usize, 2, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mk = |rng: &mut ChaCha8Rng| {
            let cores: Vec<DVector<f64>> = dims
                .iter()
                .map(|&n| {
                    let v = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
                    let n2 = v.norm();
                    v / n2
                })
                .collect();
            CpTensor::rank_one(cores).unwrap()
        };
        let a = HtTensor::from_cp(&mk(&mut rng), &tree).unwrap();
        let b = HtTensor::from_cp(&mk(&mut rng), &tree).unwrap().scale(1e-6);
        let s = a.add(&b).unwrap();
        let t = s.truncate(1e-3, None);
        assert_eq!(t.max_rank(), 1);
        let ds = s.to_dense(CAP).unwrap();
        let dt = t.to_dense(CAP).unwrap();
        let err: f64 = ds
            .data()
            .iter()
            .zip(dt.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-3 * ds.norm());
    }

    #[test]
    fn truncate_respects_rank_cap() {
        let dims = [2, 2, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let a = HtTensor::random(&tree, &dims, 3, &mut rng);
        let t = a.truncate(0.0, Some(2));
        assert!(t.max_rank() <= 2);
    }

    #[test]
    fn root_children_ranks_equal_after_truncation() {
        let dims = [2, 2, 2, 2];
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let a = HtTensor::random(&tree, &dims, 3, &mut rng);
        let b = HtTensor::random(&tree, &dims, 2, &mut rng);
        let t = a.add(&b).unwrap().truncate(1e-6, None);
        let (l, r) = tree.children(tree.root()).unwrap();
        assert_eq!(t.rank(l), t.rank(r));
    }

    #[test]
    fn storage_formula_all_rank_one() {
        let tree = DimensionTree::balanced(4).unwrap();
        let p0 = HtTensor::from_cp(&CpTensor::unit(&[2; 4], &[0; 4]).unwrap(), &tree).unwrap();
        // 4 leaves * 2 * 1 + 2 internal * 1 + 1 root
        assert_eq!(p0.storage_size(), 11);
        assert_eq!(p0.max_rank(), 1);
        assert_eq!(p0.effective_rank(), 1);
    }

    #[test]
    fn effective_rank_fixed_point_for_uniform() {
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for r in 1..=4 {
            let a = HtTensor::random(&tree, &[5, 5, 5, 5], r, &mut rng);
            assert_eq!(a.effective_rank(), r);
        }
    }

    #[test]
    fn effective_rank_matches_bruteforce() {
        let tree = DimensionTree::balanced(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let a = HtTensor::random(&tree, &[3, 4, 3, 4], 2, &mut rng);
        let b = HtTensor::random(&tree, &[3, 4, 3, 4], 3, &mut rng);
        let s = a.add(&b).unwrap();
        let actual = s.storage_size();
        let mut expect = 1;
        while s.uniform_storage(expect) < actual {
            expect += 1;
        }
        assert_eq!(s.effective_rank(), expect);
    }

    #[test]
    fn single_mode_round_trip() {
        let tree = DimensionTree::balanced(1).unwrap();
        let cp = random_cp(&[4], 3, 90);
        let ht = HtTensor::from_cp(&cp, &tree).unwrap();
        assert_dense_eq(&ht.to_dense(CAP).unwrap(), &cp_dense(&cp), 1e-12);
        let t = ht.truncate(0.0, None);
        assert_dense_eq(&t.to_dense(CAP).unwrap(), &cp_dense(&cp), 1e-12);
        assert_eq!(t.max_rank(), 1);
        assert_relative_eq!(ht.norm(), cp_dense(&cp).norm(), max_relative = 1e-12);
    }
}
