//! Outward directed rooted trees.
//!
//! Nodes are dense indices `0..len`. Children lists are ordered, and the
//! position of a child in its parent's list is the axis it occupies in the
//! parent's transition tensor.

use std::collections::VecDeque;

use crate::error::{HmtError, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    root: NodeId,
    /// Breadth-first order from the root.
    levels: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
}

impl Tree {
    /// Builds a tree from a parent list; the single `None` entry is the root.
    /// Children are ordered by ascending node id.
    pub fn from_parents(parent_of: &[Option<usize>]) -> Result<Self> {
        let len = parent_of.len();
        if len == 0 {
            return Err(HmtError::EmptyTree);
        }
        let mut root = None;
        let mut children = vec![Vec::new(); len];
        for (node, parent) in parent_of.iter().enumerate() {
            match *parent {
                None => match root {
                    None => root = Some(node),
                    Some(first) => {
                        return Err(HmtError::MultipleRoots {
                            first,
                            second: node,
                        })
                    }
                },
                Some(p) if p >= len => return Err(HmtError::DanglingParent { node, parent: p }),
                Some(p) if p == node => return Err(HmtError::CycleDetected { node }),
                Some(p) => children[p].push(node),
            }
        }
        // Without a root every node sits on (or hangs off) a cycle.
        let root = root.ok_or(HmtError::CycleDetected { node: 0 })?;

        let mut depth = vec![usize::MAX; len];
        let mut levels: Vec<Vec<NodeId>> = Vec::new();
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(node) = queue.pop_front() {
            let d = depth[node];
            if levels.len() <= d {
                levels.push(Vec::new());
            }
            levels[d].push(node);
            for &child in &children[node] {
                depth[child] = d + 1;
                queue.push_back(child);
            }
        }
        if let Some(node) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(HmtError::CycleDetected { node });
        }

        Ok(Tree {
            parent: parent_of.to_vec(),
            children,
            root,
            levels,
            depth,
        })
    }

    /// Full `branching`-ary tree with `generations` levels, numbered breadth-first
    /// from the root at 0.
    pub fn full(branching: usize, generations: usize) -> Self {
        assert!(branching >= 1 && generations >= 1);
        let mut parents = vec![None];
        let mut frontier = vec![0usize];
        for _ in 1..generations {
            let mut next = Vec::with_capacity(frontier.len() * branching);
            for &p in &frontier {
                for _ in 0..branching {
                    next.push(parents.len());
                    parents.push(Some(p));
                }
            }
            frontier = next;
        }
        Tree::from_parents(&parents).expect("full tree is well formed")
    }

    /// Chain `0 -> 1 -> ... -> len-1`.
    pub fn chain(len: usize) -> Self {
        assert!(len >= 1);
        let parents: Vec<_> = (0..len).map(|i| i.checked_sub(1)).collect();
        Tree::from_parents(&parents).expect("chain is well formed")
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parent
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.children[node].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&c| self.is_leaf(c))
    }

    pub fn interior(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&c| !self.is_leaf(c))
    }

    /// Distance from the root in edges.
    pub fn depth(&self, node: NodeId) -> usize {
        self.depth[node]
    }

    /// Number of node levels.
    pub fn generations(&self) -> usize {
        self.levels.len()
    }

    /// Position of `node` among its parent's children.
    pub fn child_position(&self, node: NodeId) -> Option<usize> {
        let p = self.parent[node]?;
        self.children[p].iter().position(|&c| c == node)
    }

    /// Siblings of `node` in children-list order, excluding `node` itself.
    pub fn siblings(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let sibs: &[NodeId] = match self.parent[node] {
            Some(p) => &self.children[p],
            None => &[],
        };
        sibs.iter().copied().filter(move |&s| s != node)
    }

    /// Every node after all of its descendants: deepest level first, root last.
    pub fn upward_order(&self) -> Vec<NodeId> {
        self.levels.iter().rev().flatten().copied().collect()
    }

    /// Breadth-first from the root.
    pub fn downward_order(&self) -> Vec<NodeId> {
        self.levels.iter().flatten().copied().collect()
    }

    /// Edge counts `(m, n)` from `u` and `v` to their most recent common
    /// ancestor, with `m <= n`.
    pub fn lineage_distance(&self, u: NodeId, v: NodeId) -> (usize, usize) {
        let (mut a, mut b) = (u, v);
        let (mut da, mut db) = (0usize, 0usize);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has parent");
            da += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has parent");
            db += 1;
        }
        while a != b {
            a = self.parent[a].expect("distinct nodes at equal depth are not roots");
            b = self.parent[b].expect("distinct nodes at equal depth are not roots");
            da += 1;
            db += 1;
        }
        (da.min(db), da.max(db))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        let t = Tree::from_parents(&[None]).unwrap();
        assert_eq!(t.root(), 0);
        assert!(t.children(0).is_empty());
        assert_eq!(t.upward_order(), vec![0]);
        assert_eq!(t.downward_order(), vec![0]);
    }

    #[test]
    fn one_division() {
        let t = Tree::from_parents(&[None, Some(0), Some(0)]).unwrap();
        assert_eq!(t.children(0), &[1, 2]);
        assert_eq!(t.upward_order(), vec![1, 2, 0]);
        assert_eq!(t.downward_order(), vec![0, 1, 2]);
        assert_eq!(t.child_position(2), Some(1));
        assert_eq!(t.siblings(1).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn chain_shape() {
        let t = Tree::from_parents(&[None, Some(0), Some(1)]).unwrap();
        assert_eq!(t.children(0), &[1]);
        assert_eq!(t.children(1), &[2]);
        assert_eq!(t, Tree::chain(3));
        assert_eq!(t.upward_order(), vec![2, 1, 0]);
    }

    #[test]
    fn root_need_not_be_first() {
        let t = Tree::from_parents(&[Some(2), Some(2), None]).unwrap();
        assert_eq!(t.root(), 2);
        assert_eq!(t.children(2), &[0, 1]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Tree::from_parents(&[]), Err(HmtError::EmptyTree));
        assert_eq!(
            Tree::from_parents(&[None, None]),
            Err(HmtError::MultipleRoots {
                first: 0,
                second: 1
            })
        );
        assert_eq!(
            Tree::from_parents(&[None, Some(5)]),
            Err(HmtError::DanglingParent { node: 1, parent: 5 })
        );
        assert!(matches!(
            Tree::from_parents(&[None, Some(2), Some(1)]),
            Err(HmtError::CycleDetected { .. })
        ));
        assert!(matches!(
            Tree::from_parents(&[Some(1), Some(0)]),
            Err(HmtError::CycleDetected { .. })
        ));
        assert!(matches!(
            Tree::from_parents(&[None, Some(1)]),
            Err(HmtError::CycleDetected { node: 1 })
        ));
    }

    fn is_ancestor(t: &Tree, a: NodeId, mut d: NodeId) -> bool {
        while let Some(p) = t.parent(d) {
            if p == a {
                return true;
            }
            d = p;
        }
        false
    }

    #[test]
    fn full_binary_upward_partial_order() {
        let t = Tree::full(2, 3);
        assert_eq!(t.len(), 7);
        let up = t.upward_order();
        assert_eq!(up, vec![3, 4, 5, 6, 1, 2, 0]);
        for (i, &a) in up.iter().enumerate() {
            for &b in &up[i + 1..] {
                // nothing later in the order may be a descendant of an earlier node
                assert!(!is_ancestor(&t, a, b));
            }
        }
    }

    #[test]
    fn lineage_distances() {
        let t = Tree::full(2, 3);
        assert_eq!(t.lineage_distance(4, 4), (0, 0));
        assert_eq!(t.lineage_distance(1, 2), (1, 1));
        assert_eq!(t.lineage_distance(1, 3), (0, 1));
        assert_eq!(t.lineage_distance(3, 1), (0, 1));
        assert_eq!(t.lineage_distance(3, 5), (2, 2));
        assert_eq!(t.lineage_distance(2, 3), (1, 2));
        assert_eq!(t.lineage_distance(0, 6), (0, 2));
    }

    #[test]
    fn leaf_interior_partition() {
        let t = Tree::full(3, 3);
        assert_eq!(t.leaves().count() + t.interior().count(), t.len());
        assert_eq!(t.len(), 13);
        assert_eq!(t.generations(), 3);
    }
}
