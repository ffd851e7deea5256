//! Dinic max-flow on real capacities. Arc order is insertion order, so the
//! flow and the minimal source set are deterministic.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub nodes: usize,
    pub arcs: usize,
    pub phases: usize,
    pub augmentations: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    arcs: Vec<Arc>,
    tolerance: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], arcs: Vec::new(), tolerance: 0.0 }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) {
        debug_assert!(cap >= 0.0 && cap.is_finite());
        if cap <= 0.0 || from == to {
            return;
        }
        let a = self.arcs.len();
        self.arcs.push(Arc { to, cap, rev: a + 1 });
        self.arcs.push(Arc { to: from, cap: 0.0, rev: a });
        self.adj[from].push(a);
        self.adj[to].push(a + 1);
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.nodes()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.adj[v] {
                let arc = self.arcs[a];
                if arc.cap > self.tolerance && level[arc.to] == usize::MAX {
                    level[arc.to] = level[v] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    /// Maximum `s -> t` flow value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> (f64, FlowStats) {
        let max_cap = self.arcs.iter().map(|a| a.cap).fold(0.0, f64::max);
        self.tolerance = 1e-13 * max_cap;
        let mut stats = FlowStats { nodes: self.nodes(), arcs: self.arcs.len() / 2, ..Default::default() };
        let mut total = 0.0;
        while let Some(level) = self.levels(s, t) {
            stats.phases += 1;
            let mut next = vec![0usize; self.nodes()];
            loop {
                // Walk a blocking-flow path with current-arc pointers.
                let mut path: Vec<usize> = Vec::new();
                let mut v = s;
                let found = loop {
                    if v == t {
                        break true;
                    }
                    let mut advanced = false;
                    while next[v] < self.adj[v].len() {
                        let a = self.adj[v][next[v]];
                        let arc = self.arcs[a];
                        if arc.cap > self.tolerance && level[arc.to] == level[v] + 1 {
                            path.push(a);
                            v = arc.to;
                            advanced = true;
                            break;
                        }
                        next[v] += 1;
                    }
                    if !advanced {
                        if v == s {
                            break false;
                        }
                        // Dead end: retreat and skip the arc that led here.
                        let a = path.pop().expect("non-source node on path");
                        v = self.arcs[self.arcs[a].rev].to;
                        next[v] += 1;
                    }
                };
                if !found {
                    break;
                }
                let push = path.iter().map(|&a| self.arcs[a].cap).fold(f64::INFINITY, f64::min);
                for &a in &path {
                    self.arcs[a].cap -= push;
                    let r = self.arcs[a].rev;
                    self.arcs[r].cap += push;
                }
                total += push;
                stats.augmentations += 1;
            }
        }
        (total, stats)
    }

    /// Nodes reachable from `s` in the residual graph: the smallest source
    /// side among all minimum cuts.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &a in &self.adj[v] {
                let arc = self.arcs[a];
                if arc.cap > self.tolerance && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1: max flow 23.
        let mut g = FlowNetwork::new(6);
        for (a, b, c) in [(0, 1, 16.0), (0, 2, 13.0), (2, 1, 4.0), (1, 3, 12.0), (3, 2, 9.0), (2, 4, 14.0), (4, 3, 7.0), (3, 5, 20.0), (4, 5, 4.0)] {
            g.add_arc(a, b, c);
        }
        let (f, stats) = g.max_flow(0, 5);
        assert!((f - 23.0).abs() < 1e-12);
        assert!(stats.augmentations > 0);
        let side = g.source_side(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn minimal_source_side_under_ties() {
        // Two equal cuts: {s} and {s, a}; the minimal one is {s}.
        let mut g = FlowNetwork::new(3);
        g.add_arc(0, 1, 1.0);
        g.add_arc(1, 2, 1.0);
        let (f, _) = g.max_flow(0, 2);
        assert_eq!(f, 1.0);
        assert_eq!(g.source_side(0), vec![true, false, false]);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3);
        g.add_arc(0, 1, 2.0);
        assert_eq!(g.max_flow(0, 2).0, 0.0);
        assert_eq!(g.source_side(0), vec![true, true, false]);
    }
}
