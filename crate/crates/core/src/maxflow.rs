//! Dinic maximum flow on an explicit graph with integer capacities.

use std::collections::VecDeque;

pub(crate) struct FlowGraph {
    nodes: usize,
    /// Arcs in pairs: `2e` is the forward arc of edge `e`, `2e + 1` its reverse.
    head: Vec<u32>,
    residual: Vec<i64>,
    first: Vec<usize>,
    order: Vec<u32>,
    built: bool,
}

impl FlowGraph {
    pub(crate) fn new(nodes: usize) -> Self {
        FlowGraph { nodes, head: Vec::new(), residual: Vec::new(), first: Vec::new(), order: Vec::new(), built: false }
    }

    /// Edge `a → b` with capacity `ab` and reverse capacity `ba`.
    pub(crate) fn add_edge(&mut self, a: usize, b: usize, ab: i64, ba: i64) {
        debug_assert!(!self.built && ab >= 0 && ba >= 0);
        if ab == 0 && ba == 0 {
            return;
        }
        self.head.push(b as u32);
        self.residual.push(ab);
        self.head.push(a as u32);
        self.residual.push(ba);
    }

    fn tail(&self, arc: usize) -> usize {
        self.head[arc ^ 1] as usize
    }

    fn build(&mut self) {
        let mut count = vec![0usize; self.nodes + 1];
        for arc in 0..self.head.len() {
            count[self.tail(arc) + 1] += 1;
        }
        for v in 0..self.nodes {
            count[v + 1] += count[v];
        }
        self.first = count.clone();
        self.order = vec![0; self.head.len()];
        for arc in 0..self.head.len() {
            let t = self.tail(arc);
            self.order[count[t]] = arc as u32;
            count[t] += 1;
        }
        self.built = true;
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        self.build();
        let mut total = 0i64;
        loop {
            let level = self.levels(s);
            if level[t] == u32::MAX {
                return total;
            }
            let mut next = self.first[..self.nodes].to_vec();
            let mut path: Vec<usize> = Vec::new();
            let mut v = s;
            loop {
                if v == t {
                    let bottleneck = path.iter().map(|&a| self.residual[a]).min().unwrap_or(0);
                    total += bottleneck;
                    let mut cut = path.len();
                    for (i, &a) in path.iter().enumerate() {
                        self.residual[a] -= bottleneck;
                        self.residual[a ^ 1] += bottleneck;
                        if cut == path.len() && self.residual[a] == 0 {
                            cut = i;
                        }
                    }
                    v = self.tail(path[cut]);
                    path.truncate(cut);
                    continue;
                }
                let mut advanced = false;
                while next[v] < self.first[v + 1] {
                    let a = self.order[next[v]] as usize;
                    let to = self.head[a] as usize;
                    if self.residual[a] > 0 && level[to] == level[v] + 1 {
                        path.push(a);
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
                    let a = path.pop().expect("non-source node has a parent arc");
                    let parent = self.tail(a);
                    next[parent] += 1;
                    v = parent;
                }
            }
        }
    }

    fn levels(&self, s: usize) -> Vec<u32> {
        let mut level = vec![u32::MAX; self.nodes];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.order[self.first[v]..self.first[v + 1]] {
                let to = self.head[a as usize] as usize;
                if self.residual[a as usize] > 0 && level[to] == u32::MAX {
                    level[to] = level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        level
    }

    /// Nodes that can still reach `t` in the residual graph. After a maximum
    /// flow, their complement is the largest source side of a minimum cut.
    pub(crate) fn reaches_sink(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            // An arc u → v with residual capacity is the reverse of an arc out of v.
            for &a in &self.order[self.first[v]..self.first[v + 1]] {
                let back = a as usize ^ 1;
                let u = self.head[a as usize] as usize;
                if self.residual[back] > 0 && !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
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
    fn classic_network() {
        // CLRS figure 26.1: maximum flow 23.
        let mut g = FlowGraph::new(6);
        for (a, b, c) in [(0, 1, 16), (0, 2, 13), (2, 1, 4), (1, 3, 12), (3, 2, 9), (2, 4, 14), (4, 3, 7), (3, 5, 20), (4, 5, 4)]
        {
            g.add_edge(a, b, c, 0);
        }
        assert_eq!(g.max_flow(0, 5), 23);
        let reach = g.reaches_sink(5);
        assert!(!reach[0] && reach[5]);
    }
}
