//! Edmonds–Karp maximum flow on a sparse directed graph with `f64`
//! capacities. Infinite capacities express hard constraints.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    /// Residual capacity.
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<Edge>>,
    max_finite: f64,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        FlowGraph {
            adj: vec![Vec::new(); nodes],
            max_finite: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u → v` with capacity `forward` and `v → u` with capacity `backward`.
    pub fn add_edge(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        debug_assert!(forward >= 0.0 && backward >= 0.0);
        for c in [forward, backward] {
            if c.is_finite() {
                self.max_finite = self.max_finite.max(c);
            }
        }
        let (ru, rv) = (self.adj[v].len(), self.adj[u].len());
        self.adj[u].push(Edge {
            to: v,
            cap: forward,
            rev: ru,
        });
        self.adj[v].push(Edge {
            to: u,
            cap: backward,
            rev: rv,
        });
    }

    fn eps(&self) -> f64 {
        self.max_finite * 1e-12
    }

    /// Pushes the maximum flow from `s` to `t` and returns its value.
    /// An augmenting path of infinite capacity is an error.
    pub fn max_flow(&mut self, s: usize, t: usize) -> Result<f64> {
        let n = self.adj.len();
        let eps = self.eps();
        let mut total = 0.0;
        loop {
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (i, e) in self.adj[u].iter().enumerate() {
                    if e.cap > eps && !seen[e.to] {
                        seen[e.to] = true;
                        prev[e.to] = Some((u, i));
                        queue.push_back(e.to);
                    }
                }
            }
            if !seen[t] {
                return Ok(total);
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                bottleneck = bottleneck.min(self.adj[u][i].cap);
                v = u;
            }
            if bottleneck.is_infinite() {
                return Err(Error::InfeasibleConstraints(
                    "source and sink are joined by hard constraints".into(),
                ));
            }
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                let rev = self.adj[u][i].rev;
                self.adj[u][i].cap -= bottleneck;
                self.adj[v][rev].cap += bottleneck;
                v = u;
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `s` in the residual graph; after [`max_flow`]
    /// this is the source side of a minimum cut.
    ///
    /// [`max_flow`]: FlowGraph::max_flow
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let eps = self.eps();
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in &self.adj[u] {
                if e.cap > eps && !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}
