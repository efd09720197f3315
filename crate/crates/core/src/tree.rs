//! Rooted marked trees over finite alphabets, stored as parent arenas.
//!
//! Used for seed atoms, tree reconstruction, and the tree fast path of
//! canonical coding. Vertex 0 is always the root. Each non-root vertex
//! stores the marks of both orientations of its parent edge:
//! `xi_down[v] = ξ(parent(v), v)` and `xi_up[v] = ξ(v, parent(v))`.

use crate::error::{GraphLdpError, Result};
use crate::mark::Sym;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedTree {
    pub mark: Vec<Sym>,
    /// `parent[0]` is ignored; encoded as `u32::MAX` in serialized form.
    pub parent: Vec<u32>,
    pub xi_down: Vec<Sym>,
    pub xi_up: Vec<Sym>,
    #[serde(skip)]
    children: Vec<Vec<u32>>,
}

pub const NO_PARENT: u32 = u32::MAX;

impl MarkedTree {
    pub fn new_root(mark: Sym) -> Self {
        MarkedTree {
            mark: vec![mark],
            parent: vec![NO_PARENT],
            xi_down: vec![0],
            xi_up: vec![0],
            children: vec![Vec::new()],
        }
    }

    /// Rebuild child lists after deserialization or manual construction.
    pub fn from_parts(mark: Vec<Sym>, parent: Vec<u32>, xi_down: Vec<Sym>, xi_up: Vec<Sym>) -> Result<Self> {
        let n = mark.len();
        if parent.len() != n || xi_down.len() != n || xi_up.len() != n {
            return Err(GraphLdpError::validation("tree arrays must have equal length"));
        }
        if n == 0 {
            return Err(GraphLdpError::validation("tree must have a root"));
        }
        if parent[0] != NO_PARENT {
            return Err(GraphLdpError::validation("vertex 0 must be the root"));
        }
        let mut children = vec![Vec::new(); n];
        for v in 1..n {
            let p = parent[v] as usize;
            if p >= n || parent[v] == NO_PARENT {
                return Err(GraphLdpError::validation(format!("bad parent of vertex {v}")));
            }
            if p >= v {
                return Err(GraphLdpError::validation(
                    "vertices must be ordered so parents precede children",
                ));
            }
            children[p].push(v as u32);
        }
        Ok(MarkedTree {
            mark,
            parent,
            xi_down,
            xi_up,
            children,
        })
    }

    pub fn add_child(&mut self, parent: u32, mark: Sym, xi_down: Sym, xi_up: Sym) -> u32 {
        let v = self.mark.len() as u32;
        self.mark.push(mark);
        self.parent.push(parent);
        self.xi_down.push(xi_down);
        self.xi_up.push(xi_up);
        self.children.push(Vec::new());
        self.children[parent as usize].push(v);
        v
    }

    pub fn len(&self) -> usize {
        self.mark.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn children(&self, v: u32) -> &[u32] {
        &self.children[v as usize]
    }

    /// Distance from the root, per vertex.
    pub fn depths(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.len()];
        for v in 1..self.len() {
            d[v] = d[self.parent[v] as usize] + 1;
        }
        d
    }

    pub fn depth(&self) -> u32 {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// The subtree hanging at `v` (including `v`), re-rooted at `v`,
    /// truncated `max_depth` levels below `v`.
    pub fn subtree(&self, v: u32, max_depth: u32) -> MarkedTree {
        let mut out = MarkedTree::new_root(self.mark[v as usize]);
        let mut stack = vec![(v, 0u32, 0u32)]; // (old id, new id, depth below v)
        while let Some((old, new, d)) = stack.pop() {
            if d == max_depth {
                continue;
            }
            for &c in self.children(old) {
                let nc = out.add_child(new, self.mark[c as usize], self.xi_down[c as usize], self.xi_up[c as usize]);
                stack.push((c, nc, d + 1));
            }
        }
        out
    }

    /// The component of `parent(v)` after deleting the edge `{v, parent(v)}`,
    /// re-rooted at `parent(v)` and truncated `max_depth` levels below it.
    /// The former grandparent becomes an ordinary child in the re-rooted
    /// view, with its two orientation marks swapped accordingly.
    pub fn rest_view(&self, v: u32, max_depth: u32) -> Result<MarkedTree> {
        let p = self.parent[v as usize];
        if p == NO_PARENT {
            return Err(GraphLdpError::validation("rest_view of the root is undefined"));
        }
        let mut out = MarkedTree::new_root(self.mark[p as usize]);
        // (old id, new id, excluded old neighbor, depth)
        let mut stack = vec![(p, 0u32, v, 0u32)];
        while let Some((old, new, excl, d)) = stack.pop() {
            if d == max_depth {
                continue;
            }
            for &c in self.children(old) {
                if c == excl {
                    continue;
                }
                let nc = out.add_child(new, self.mark[c as usize], self.xi_down[c as usize], self.xi_up[c as usize]);
                stack.push((c, nc, old, d + 1));
            }
            let up = self.parent[old as usize];
            if up != NO_PARENT && up != excl {
                // Walking upward flips the orientation: the mark from the
                // new child (`up`) toward `old` is xi_down[old] in the
                // original tree.
                let nc = out.add_child(new, self.mark[up as usize], self.xi_up[old as usize], self.xi_down[old as usize]);
                stack.push((up, nc, old, d + 1));
            }
        }
        Ok(out)
    }

    /// Copy truncated at the given depth below the root.
    pub fn truncated(&self, max_depth: u32) -> MarkedTree {
        self.subtree(0, max_depth)
    }

    /// Unlink all children of `v`; their subtrees become unreachable
    /// (arena slots are not reclaimed until [`MarkedTree::compact`]).
    pub fn clear_children(&mut self, v: u32) {
        self.children[v as usize].clear();
    }

    /// Append a copy of `template` below `v`: the template root is
    /// identified with `v` (marks must agree), its descendants are copied.
    pub fn graft(&mut self, v: u32, template: &MarkedTree) -> Result<()> {
        if template.mark[0] != self.mark[v as usize] {
            return Err(GraphLdpError::validation("graft root mark differs"));
        }
        let mut stack: Vec<(u32, u32)> = vec![(0, v)]; // (template id, arena id)
        while let Some((told, new)) = stack.pop() {
            for &c in template.children(told) {
                let nc = self.add_child(
                    new,
                    template.mark[c as usize],
                    template.xi_down[c as usize],
                    template.xi_up[c as usize],
                );
                stack.push((c, nc));
            }
        }
        Ok(())
    }

    /// Fresh tree containing exactly the vertices reachable from the root
    /// within `max_depth` levels, in BFS order. Drops unreachable arena
    /// slots left by [`MarkedTree::clear_children`].
    pub fn compact(&self, max_depth: u32) -> MarkedTree {
        let mut out = MarkedTree::new_root(self.mark[0]);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((0u32, 0u32, 0u32)); // (old, new, depth)
        while let Some((old, new, d)) = queue.pop_front() {
            if d == max_depth {
                continue;
            }
            for &c in self.children(old) {
                let nc = out.add_child(new, self.mark[c as usize], self.xi_down[c as usize], self.xi_up[c as usize]);
                queue.push_back((c, nc, d + 1));
            }
        }
        out
    }
}
