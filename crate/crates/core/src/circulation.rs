//! Exact minimum-cost circulation on the circulant pair graph of the torus.
//!
//! Edge `(v, k)` joins cell `v` to `v + d_k` and carries a flow `y` with
//! `|y| ≤ W_k` at cost `c_k y`. Flows start at `-W_k sign(c_k)`, which makes
//! every residual arc cost nonnegative, and only departures from that start are
//! stored, per node and sorted by offset.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::cellsolver::PairGraph;
use crate::error::{Error, Result};

const INF: i64 = i64::MAX / 4;

pub(crate) struct Circulation<'a> {
    graph: &'a PairGraph,
    caps: Vec<i64>,
    start: Vec<i64>,
    /// Departures of edges leaving each node, `(k, y - start_k)`.
    out_dev: Vec<Vec<(u32, i64)>>,
    /// Mirror of `out_dev` indexed by the head of each edge.
    in_dev: Vec<Vec<(u32, i64)>>,
    supply: Vec<i64>,
    source_flow: Vec<i64>,
    sink_flow: Vec<i64>,
    potential: Vec<i64>,
}

/// Result of a solve: node potentials and per-edge flow departures.
pub(crate) struct CirculationOutcome {
    pub potential: Vec<i64>,
    pub caps: Vec<i64>,
    pub start: Vec<i64>,
    pub departures: Vec<Vec<(u32, i64)>>,
    pub phases: usize,
}

fn lookup(list: &[(u32, i64)], k: u32) -> i64 {
    match list.binary_search_by_key(&k, |e| e.0) {
        Ok(p) => list[p].1,
        Err(_) => 0,
    }
}

fn add(list: &mut Vec<(u32, i64)>, k: u32, delta: i64) {
    match list.binary_search_by_key(&k, |e| e.0) {
        Ok(p) => list[p].1 += delta,
        Err(p) => list.insert(p, (k, delta)),
    }
}

impl<'a> Circulation<'a> {
    /// `supply[v]` is the required net outflow of node `v`; supplies sum to zero.
    pub(crate) fn new(graph: &'a PairGraph, caps: Vec<i64>, supply: Vec<i64>) -> Self {
        let n = graph.nodes();
        let start = caps.iter().zip(&graph.costs).map(|(w, c)| -w * c.signum()).collect();
        Circulation {
            graph,
            caps,
            start,
            out_dev: vec![Vec::new(); n],
            in_dev: vec![Vec::new(); n],
            supply,
            source_flow: vec![0; n],
            sink_flow: vec![0; n],
            potential: vec![0; n + 2],
        }
    }

    fn source(&self) -> usize {
        self.graph.nodes()
    }

    fn sink(&self) -> usize {
        self.graph.nodes() + 1
    }

    /// Calls `visit(arc, to, residual, cost)` for the arcs leaving `v`. Arcs
    /// without residual capacity are skipped unless `saturated` is set.
    #[inline]
    fn scan(&self, v: usize, saturated: bool, mut visit: impl FnMut(u32, usize, i64, i64)) {
        let n = self.graph.nodes();
        if v == self.source() {
            for u in 0..n {
                let r = self.supply[u].max(0) - self.source_flow[u];
                if r > 0 || (saturated && self.supply[u] > 0) {
                    visit(u as u32, u, r, 0);
                }
            }
            return;
        }
        if v == self.sink() {
            return;
        }
        let h = self.graph.half();
        let at = self.graph.coords(v);
        let (outs, ins) = (&self.out_dev[v], &self.in_dev[v]);
        let (mut co, mut ci) = (0usize, 0usize);
        for k in 0..h {
            let kk = k as u32;
            let mut dout = 0;
            if co < outs.len() && outs[co].0 == kk {
                dout = outs[co].1;
                co += 1;
            }
            let mut din = 0;
            if ci < ins.len() && ins[ci].0 == kk {
                din = ins[ci].1;
                ci += 1;
            }
            let cost = self.graph.costs[k];
            let forward = self.caps[k] - (self.start[k] + dout);
            if forward > 0 || saturated {
                visit(kk, self.graph.forward(at, k), forward, cost);
            }
            let backward = self.caps[k] + (self.start[k] + din);
            if backward > 0 || saturated {
                visit((h + k) as u32, self.graph.backward(at, k), backward, -cost);
            }
        }
        let r = (-self.supply[v]).max(0) - self.sink_flow[v];
        if r > 0 || (saturated && self.supply[v] < 0) {
            visit((2 * h) as u32, self.sink(), r, 0);
        }
    }

    /// Head and residual capacity of one arc.
    fn arc(&self, v: usize, a: u32) -> (usize, i64) {
        let h = self.graph.half();
        let a = a as usize;
        if v == self.source() {
            return (a, self.supply[a].max(0) - self.source_flow[a]);
        }
        let at = self.graph.coords(v);
        if a < h {
            let y = self.start[a] + lookup(&self.out_dev[v], a as u32);
            (self.graph.forward(at, a), self.caps[a] - y)
        } else if a < 2 * h {
            let k = a - h;
            let y = self.start[k] + lookup(&self.in_dev[v], k as u32);
            (self.graph.backward(at, k), self.caps[k] + y)
        } else {
            (self.sink(), (-self.supply[v]).max(0) - self.sink_flow[v])
        }
    }

    fn push(&mut self, v: usize, a: u32, amount: i64) {
        let h = self.graph.half();
        let a = a as usize;
        if v == self.source() {
            self.source_flow[a] += amount;
            return;
        }
        let at = self.graph.coords(v);
        if a < h {
            let to = self.graph.forward(at, a);
            add(&mut self.out_dev[v], a as u32, amount);
            add(&mut self.in_dev[to], a as u32, amount);
        } else if a < 2 * h {
            let k = a - h;
            let from = self.graph.backward(at, k);
            add(&mut self.out_dev[from], k as u32, -amount);
            add(&mut self.in_dev[v], k as u32, -amount);
        } else {
            self.sink_flow[v] += amount;
        }
    }

    fn remaining(&self) -> i64 {
        (0..self.graph.nodes()).map(|v| self.supply[v].max(0) - self.source_flow[v]).sum()
    }

    /// Successive shortest paths, each distance level saturated by a blocking flow.
    pub(crate) fn solve(mut self) -> Result<CirculationOutcome> {
        let mut phases = 0;
        while self.remaining() > 0 {
            let dist = self.dijkstra();
            let dt = dist[self.sink()];
            if dt >= INF {
                return Err(Error::Precondition(
                    "forcing cannot be balanced by the stencil weights; the cell energy is unbounded below".into(),
                ));
            }
            for (pi, d) in self.potential.iter_mut().zip(&dist) {
                *pi += (*d).min(dt);
            }
            self.blocking_flows();
            phases += 1;
        }
        let n = self.graph.nodes();
        self.potential.truncate(n);
        Ok(CirculationOutcome {
            potential: self.potential,
            caps: self.caps,
            start: self.start,
            departures: self.out_dev,
            phases,
        })
    }

    fn dijkstra(&self) -> Vec<i64> {
        let total = self.graph.nodes() + 2;
        let mut dist = vec![INF; total];
        let mut done = vec![false; total];
        let mut heap = BinaryHeap::new();
        dist[self.source()] = 0;
        heap.push(Reverse((0i64, self.source())));
        while let Some(Reverse((d, v))) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            let pv = self.potential[v];
            self.scan(v, false, |_, to, _, cost| {
                let nd = d + cost + pv - self.potential[to];
                if nd < dist[to] {
                    dist[to] = nd;
                    heap.push(Reverse((nd, to)));
                }
            });
        }
        dist
    }

    /// Dinic restricted to arcs of zero reduced cost. Reduced costs do not
    /// change within a phase, so those arcs are listed once.
    fn blocking_flows(&mut self) {
        let total = self.graph.nodes() + 2;
        let (s, t) = (self.source(), self.sink());
        let mut first = Vec::with_capacity(total + 1);
        let mut arcs: Vec<u32> = Vec::new();
        for v in 0..total {
            first.push(arcs.len());
            let pv = self.potential[v];
            self.scan(v, true, |a, to, _, cost| {
                if cost + pv - self.potential[to] == 0 {
                    arcs.push(a);
                }
            });
        }
        first.push(arcs.len());
        loop {
            let mut level = vec![u32::MAX; total];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &a in &arcs[first[v]..first[v + 1]] {
                    let (to, r) = self.arc(v, a);
                    if r > 0 && level[to] == u32::MAX {
                        level[to] = level[v] + 1;
                        queue.push_back(to);
                    }
                }
            }
            if level[t] == u32::MAX {
                return;
            }
            let mut next = first[..total].to_vec();
            let mut path: Vec<(usize, u32)> = Vec::new();
            let mut v = s;
            loop {
                if v == t {
                    let bottleneck = path.iter().map(|&(x, a)| self.arc(x, a).1).min().unwrap_or(0);
                    let mut cut = path.len();
                    for (idx, &(x, a)) in path.iter().enumerate() {
                        self.push(x, a, bottleneck);
                        if cut == path.len() && self.arc(x, a).1 == 0 {
                            cut = idx;
                        }
                    }
                    v = path[cut].0;
                    path.truncate(cut);
                    continue;
                }
                let mut advanced = false;
                while next[v] < first[v + 1] {
                    let a = arcs[next[v]];
                    let (to, r) = self.arc(v, a);
                    if r > 0 && level[to] == level[v] + 1 {
                        path.push((v, a));
                        v = to;
                        advanced = true;
                        break;
                    }
                    next[v] += 1;
                }
                if !advanced {
                    if v == s {
                        break;
                    }
                    level[v] = u32::MAX;
                    let (x, _) = path.pop().expect("non-source node has a parent arc");
                    next[x] += 1;
                    v = x;
                }
            }
        }
    }
}
