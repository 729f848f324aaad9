//! Node-disjoint path search by unit-capacity max-flow.

use std::collections::{BTreeSet, VecDeque};

use crate::graph::{NodeId, SignedDigraph};

struct FlowNet {
    // (to, capacity, reverse index)
    adj: Vec<Vec<(usize, i32, usize)>>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet { adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, u: usize, v: usize, cap: i32) {
        let (ru, rv) = (self.adj[v].len(), self.adj[u].len());
        self.adj[u].push((v, cap, ru));
        self.adj[v].push((u, 0, rv));
    }

    /// One shortest augmenting path; neighbours are scanned in insertion
    /// order so the result is deterministic.
    fn augment(&mut self, s: usize, t: usize) -> bool {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            if u == t {
                break;
            }
            for (k, &(v, cap, _)) in self.adj[u].iter().enumerate() {
                if cap > 0 && !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((u, k));
                    q.push_back(v);
                }
            }
        }
        if !seen[t] {
            return false;
        }
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            let (_, _, r) = self.adj[u][k];
            self.adj[u][k].1 -= 1;
            self.adj[v][r].1 += 1;
            v = u;
        }
        true
    }
}

/// Find one path per entry node, starting at pairwise distinct `sources`,
/// such that no two paths share a node. Intermediate nodes are restricted
/// to `allowed` (all nodes when `None`); paths end at their entry and never
/// pass through another entry. Returns `None` unless every entry is served.
///
/// Ties are broken towards lower node indices.
pub fn find_disjoint_input_paths(
    g: &SignedDigraph,
    sources: &[NodeId],
    entries: &[NodeId],
    allowed: Option<&BTreeSet<NodeId>>,
) -> Option<Vec<Vec<NodeId>>> {
    let n = g.node_count();
    if entries.is_empty() {
        return Some(Vec::new());
    }
    let src_set: BTreeSet<NodeId> = sources.iter().copied().filter(|&v| v < n).collect();
    let entry_set: BTreeSet<NodeId> = entries.iter().copied().collect();
    if entry_set.len() != entries.len() || entries.iter().any(|&v| v >= n) {
        return None;
    }
    let usable = |v: NodeId| {
        src_set.contains(&v) || entry_set.contains(&v) || allowed.is_none_or(|a| a.contains(&v))
    };
    // node v -> (2v in, 2v+1 out); super source 2n, super sink 2n+1
    let (s, t) = (2 * n, 2 * n + 1);
    let mut net = FlowNet::new(2 * n + 2);
    for v in 0..n {
        if usable(v) {
            net.add(2 * v, 2 * v + 1, 1);
        }
    }
    for &v in &src_set {
        net.add(s, 2 * v, 1);
    }
    for u in 0..n {
        if !usable(u) || entry_set.contains(&u) {
            continue;
        }
        for v in g.successors(u) {
            if usable(v) {
                net.add(2 * u + 1, 2 * v, 1);
            }
        }
    }
    for &v in entries {
        net.add(2 * v + 1, t, 1);
    }
    let mut flow = 0;
    while flow < entries.len() && net.augment(s, t) {
        flow += 1;
    }
    if flow < entries.len() {
        return None;
    }
    // Walk saturated arcs from each used source.
    let mut paths = Vec::new();
    for &(first, cap, _) in net.adj[s].clone().iter() {
        if cap != 0 {
            continue;
        }
        let mut path = vec![first / 2];
        let mut at = first + 1; // out-copy
        'walk: loop {
            for &(v, cap, _) in &net.adj[at] {
                if v == t && cap == 0 {
                    break 'walk;
                }
            }
            let next = net.adj[at]
                .iter()
                .find(|&&(v, cap, _)| v < 2 * n && v % 2 == 0 && v != at - 1 && cap == 0)
                .map(|&(v, _, _)| v);
            match next {
                Some(v) => {
                    path.push(v / 2);
                    at = v + 1;
                }
                None => break,
            }
        }
        paths.push(path);
    }
    // Order paths by the entry they serve.
    paths.sort_by_key(|p| entries.iter().position(|e| Some(e) == p.last()));
    Some(paths)
}
