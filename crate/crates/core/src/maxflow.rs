//! Dinic's maximum flow on real capacities.
//!
//! Residual capacities at or below `eps` count as saturated, which keeps the
//! level graph finite under rounding.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
}

#[derive(Debug)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    level: Vec<i32>,
    iter: Vec<usize>,
    eps: f64,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
            level: vec![-1; nodes],
            iter: vec![0; nodes],
            eps: 0.0,
        }
    }

    /// Adds `u → v` with capacity `cap` and its zero-capacity reverse edge.
    pub(crate) fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        self.adj[u].push(self.edges.len());
        self.edges.push(Edge { to: v, cap });
        self.adj[v].push(self.edges.len());
        self.edges.push(Edge { to: u, cap: 0.0 });
    }

    fn total_capacity(&self) -> f64 {
        self.edges.iter().step_by(2).map(|e| e.cap).sum()
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let e = &self.edges[id];
                if e.cap > self.eps && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.adj[u].len() {
            let id = self.adj[u][self.iter[u]];
            let (to, cap) = (self.edges[id].to, self.edges[id].cap);
            if cap > self.eps && self.level[to] == self.level[u] + 1 {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0.0 {
                    self.edges[id].cap -= d;
                    self.edges[id ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    /// Runs Dinic from `s` to `t`; saturation threshold is
    /// `rel_eps · (total capacity)`.
    pub(crate) fn max_flow(&mut self, s: usize, t: usize, rel_eps: f64) -> f64 {
        self.eps = rel_eps * self.total_capacity();
        let mut flow = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.eps {
                    break;
                }
                flow += f;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph (the source side of a
    /// minimum cut once `max_flow` has run).
    pub(crate) fn source_side(&mut self, s: usize) -> Vec<bool> {
        self.bfs(s);
        self.level.iter().map(|&l| l >= 0).collect()
    }
}
