//! Binary dimension trees underlying the hierarchical format.
//!
//! Modes are 0-based internally. The canonical balanced tree for `d` modes
//! splits a vertex holding `k` leaves into the first `⌈k/2⌉` and the
//! remaining `⌊k/2⌋` leaves, following a given leaf order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Mode set of this vertex, sorted ascending.
    pub modes: Vec<usize>,
    /// Child node ids, `None` for leaves.
    pub children: Option<(usize, usize)>,
    /// Parent node id, `None` for the root.
    pub parent: Option<usize>,
}

/// Full binary tree over the modes `{0..d-1}` with exactly `d` leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTree {
    nodes: Vec<TreeNode>,
    d: usize,
}

impl DimensionTree {
    /// Balanced tree with leaves arranged by `leaf_order`, a permutation of
    /// `0..d`. The identity permutation yields the canonical tree.
    pub fn canonical(d: usize, leaf_order: &[usize]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidPermutation);
        }
        let mut seen = vec![false; d];
        if leaf_order.len() != d {
            return Err(Error::InvalidPermutation);
        }
        for &m in leaf_order {
            if m >= d || seen[m] {
                return Err(Error::InvalidPermutation);
            }
            seen[m] = true;
        }
        let mut nodes = Vec::new();
        build(&mut nodes, leaf_order, None);
        Ok(DimensionTree { nodes, d })
    }

    /// Canonical tree with identity leaf order.
    pub fn balanced(d: usize) -> Result<Self> {
        let order: Vec<usize> = (0..d).collect();
        Self::canonical(d, &order)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_none()
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        self.nodes[id].children
    }

    /// The single mode of a leaf vertex.
    pub fn leaf_mode(&self, id: usize) -> usize {
        debug_assert!(self.is_leaf(id));
        self.nodes[id].modes[0]
    }

    /// Leaf node id carrying the given mode.
    pub fn leaf_of_mode(&self, mode: usize) -> usize {
        (0..self.nodes.len())
            .find(|&id| self.is_leaf(id) && self.nodes[id].modes[0] == mode)
            .expect("mode not present in tree")
    }

    /// Node ids with children listed before parents.
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root(), false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded || self.is_leaf(id) {
                out.push(id);
            } else {
                let (l, r) = self.nodes[id].children.unwrap();
                stack.push((id, true));
                stack.push((r, false));
                stack.push((l, false));
            }
        }
        out
    }

    /// Node ids with parents listed before children.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut order = self.post_order();
        order.reverse();
        order
    }

    /// Number of non-root vertices, `2d - 2` for `d >= 2`.
    pub fn non_root_count(&self) -> usize {
        self.nodes.len() - 1
    }
}

fn build(nodes: &mut Vec<TreeNode>, leaves: &[usize], parent: Option<usize>) -> usize {
    let id = nodes.len();
    let mut modes: Vec<usize> = leaves.to_vec();
    modes.sort_unstable();
    nodes.push(TreeNode {
        modes,
        children: None,
        parent,
    });
    if leaves.len() > 1 {
        let split = leaves.len().div_ceil(2);
        let left = build(nodes, &leaves[..split], Some(id));
        let right = build(nodes, &leaves[split..], Some(id));
        nodes[id].children = Some((left, right));
    }
    id
}
