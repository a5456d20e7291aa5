//! Expectimax-style search trees `T(s, a)` and the constrictiveness count.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::factors::CriticalSet;
use crate::mdp::{ActionId, Mdp, StateId};
use crate::scalar::Scalar;
use crate::solver::ValueTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub state: StateId,
    pub parent: Option<usize>,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub parent: usize,
    pub action: ActionId,
    pub child: usize,
}

/// Tree rooted at `(root, root_action)`; node 0 is the root. No state repeats
/// along a root-to-node path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTree {
    pub root: StateId,
    pub root_action: ActionId,
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<TreeEdge>,
}

impl SearchTree {
    /// States from the root down to `node`.
    pub fn path(&self, node: usize) -> Vec<StateId> {
        let mut path = Vec::with_capacity(self.nodes[node].depth + 1);
        let mut cur = Some(node);
        while let Some(i) = cur {
            path.push(self.nodes[i].state);
            cur = self.nodes[i].parent;
        }
        path.reverse();
        path
    }

    fn on_path(&self, node: usize, s: StateId) -> bool {
        let mut cur = Some(node);
        while let Some(i) = cur {
            if self.nodes[i].state == s {
                return true;
            }
            cur = self.nodes[i].parent;
        }
        false
    }

    /// Distinct states occurring anywhere in the tree, root included.
    pub fn states(&self) -> BTreeSet<StateId> {
        self.nodes.iter().map(|n| n.state).collect()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        !self.edges.iter().any(|e| e.parent == node)
    }
}

/// Breadth-first expansion of `T(s, a)`.
///
/// The root expands only through `a`; other nodes through every enabled
/// action. A child is added per positive-probability successor that is not
/// already on the path from the root, which drops self-loops and cycles.
/// Targets and `Unreachable` states are leaves.
pub fn search_tree<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, s: StateId, a: ActionId) -> Result<SearchTree> {
    mdp.choice(s, a)?;
    let mut tree = SearchTree {
        root: s,
        root_action: a,
        nodes: vec![TreeNode {
            state: s,
            parent: None,
            depth: 0,
        }],
        edges: Vec::new(),
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        let state = tree.nodes[node].state;
        let choices = mdp.choices(state)?;
        let expand: Vec<_> = if node == 0 {
            choices.iter().filter(|c| c.action == a).collect()
        } else if values.is_target(state) || values.get(state).is_unreachable() {
            continue;
        } else {
            choices.iter().collect()
        };
        for choice in expand {
            for o in choice.support() {
                if tree.on_path(node, o.next) {
                    continue;
                }
                let child = tree.nodes.len();
                tree.nodes.push(TreeNode {
                    state: o.next,
                    parent: Some(node),
                    depth: tree.nodes[node].depth + 1,
                });
                tree.edges.push(TreeEdge {
                    parent: node,
                    action: choice.action,
                    child,
                });
                queue.push_back(child);
            }
        }
    }
    Ok(tree)
}

/// `ε(s, a)`: total number of enabled actions over the distinct critical
/// states in the tree, root state excluded.
pub fn constrictiveness<T: Scalar>(tree: &SearchTree, critical: &CriticalSet<T>, mdp: &Mdp<T>) -> usize {
    tree.states()
        .into_iter()
        .filter(|s| *s != tree.root && critical.contains(*s))
        .map(|s| mdp.choices(s).map_or(0, <[_]>::len))
        .sum()
}

/// Distinct states of `T(s, a)` other than `s`, without materializing the
/// tree.
///
/// A state occurs in the tree iff it is reachable from a successor of
/// `(s, a)` along edges that never re-enter `s` and never leave a target or
/// `Unreachable` state: the shortest such walk is a simple path, hence a tree
/// branch. This runs in `O(|transitions|)` where the tree can be exponential.
pub fn tree_footprint<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, s: StateId, a: ActionId) -> Result<BTreeSet<StateId>> {
    let root = mdp.choice(s, a)?;
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for o in root.support() {
        if o.next != s && seen.insert(o.next) {
            queue.push_back(o.next);
        }
    }
    while let Some(x) = queue.pop_front() {
        if values.is_target(x) || values.get(x).is_unreachable() {
            continue;
        }
        for c in mdp.choices(x)? {
            for o in c.support() {
                if o.next != s && seen.insert(o.next) {
                    queue.push_back(o.next);
                }
            }
        }
    }
    Ok(seen)
}

/// ε from a footprint as returned by [`tree_footprint`].
pub fn footprint_constrictiveness<T: Scalar>(footprint: &BTreeSet<StateId>, critical: &CriticalSet<T>, mdp: &Mdp<T>) -> usize {
    footprint
        .iter()
        .filter(|s| critical.contains(**s))
        .map(|s| mdp.choices(*s).map_or(0, <[_]>::len))
        .sum()
}
