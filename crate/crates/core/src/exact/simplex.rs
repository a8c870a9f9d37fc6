//! Primal network simplex for the transportation problem on in-band arcs.
//!
//! Arcs are never stored: arc `k` of source `i` is decoded from the band
//! layout and its cost is evaluated from the separable cost tables. Only the
//! spanning tree (one parent arc per node) carries flow. The initial tree
//! hangs every node from an artificial root through big-M arcs; artificial
//! flow left at the optimum means the banded problem is infeasible.

use crate::transport::BandedCost;

const NONE: usize = usize::MAX;

/// Implicit arc set: for source `i = (m, n)` all sinks `(m', n')` with `n'`
/// in the band, ordered by `n'` then `m'`.
struct Arcs<'a> {
    bins: usize,
    cost: &'a BandedCost,
    start: Vec<usize>,
}

impl<'a> Arcs<'a> {
    fn new(cost: &'a BandedCost) -> Self {
        let bins = cost.grid().bins();
        let layout = cost.layout();
        let mut start = Vec::with_capacity(cost.grid().len() + 1);
        let mut acc = 0;
        for n in 0..cost.grid().frames() {
            let (lo, hi) = layout.targets(n);
            for _ in 0..bins {
                start.push(acc);
                acc += bins * (hi - lo + 1);
            }
        }
        start.push(acc);
        Self { bins, cost, start }
    }

    fn count(&self) -> usize {
        *self.start.last().unwrap()
    }

    fn sources(&self) -> usize {
        self.start.len() - 1
    }

    fn decode(&self, arc: usize) -> (usize, usize) {
        let i = self.start.partition_point(|&s| s <= arc) - 1;
        let local = arc - self.start[i];
        let (lo, _) = self.cost.layout().targets(i / self.bins);
        let n2 = lo + local / self.bins;
        (i, n2 * self.bins + local % self.bins)
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        let (m, n) = (i % self.bins, i / self.bins);
        let (m2, n2) = (j % self.bins, j / self.bins);
        self.cost.freq_costs()[m.abs_diff(m2)] + self.cost.time_cost(n.abs_diff(n2)).unwrap_or(f64::INFINITY)
    }
}

pub(crate) struct Solution {
    /// `(source, sink, flow)` on real tree arcs with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub artificial_flow: f64,
    pub pivots: usize,
}

pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &BandedCost) -> Solution {
    let mut ns = NetworkSimplex::new(supply, demand, cost);
    ns.run();
    ns.solution()
}

struct NetworkSimplex<'a> {
    arcs: Arcs<'a>,
    sources: usize,
    root: usize,
    art_cost: f64,
    eps: f64,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    block_size: usize,
    cursor: usize,
    pivots: usize,
}

impl<'a> NetworkSimplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a BandedCost) -> Self {
        let arcs = Arcs::new(cost);
        let arc_count = arcs.count();
        let sources = arcs.sources();
        let nodes = 2 * sources + 1;
        let root = 2 * sources;
        let art_cost = (cost.max_cost() + 1.0) * nodes as f64;
        let eps = 64.0 * f64::EPSILON * art_cost;
        let mut ns = Self {
            block_size: ((arcs.count() as f64).sqrt().ceil() as usize).max(10),
            arcs,
            sources,
            root,
            art_cost,
            eps,
            parent: vec![root; nodes],
            pred: (0..nodes).map(|v| arc_count + v).collect(),
            up: vec![false; nodes],
            flow: vec![0.0; nodes],
            depth: vec![1; nodes],
            pi: vec![0.0; nodes],
            first_child: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            cursor: 0,
            pivots: 0,
        };
        ns.parent[root] = NONE;
        ns.depth[root] = 0;
        for v in 0..root {
            if v < sources {
                ns.up[v] = true;
                ns.flow[v] = supply[v];
                ns.pi[v] = -art_cost;
            } else {
                ns.flow[v] = demand[v - sources];
                ns.pi[v] = art_cost;
            }
            ns.attach(v, root);
        }
        ns
    }

    fn is_artificial(&self, arc: usize) -> bool {
        arc >= self.arcs.count()
    }

    /// Tree arc of `v`; artificial arc ids follow the real ones.
    fn arc_id(&self, v: usize) -> usize {
        self.pred[v]
    }

    fn pred_cost(&self, v: usize) -> f64 {
        let p = self.pred[v];
        if self.is_artificial(p) {
            self.art_cost
        } else {
            let (i, j) = self.arcs.decode(p);
            self.arcs.cost(i, j)
        }
    }

    fn attach(&mut self, v: usize, p: usize) {
        self.parent[v] = p;
        self.prev_sib[v] = NONE;
        self.next_sib[v] = self.first_child[p];
        if self.first_child[p] != NONE {
            self.prev_sib[self.first_child[p]] = v;
        }
        self.first_child[p] = v;
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        let (prev, next) = (self.prev_sib[v], self.next_sib[v]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
    }

    /// Reduced costs of source `i`'s arcs; reports the most negative below `-eps`.
    fn scan_source(&self, i: usize, best: &mut (f64, usize), first_only: bool) -> bool {
        let bins = self.arcs.bins;
        let (m, n) = (i % bins, i / bins);
        let (lo, hi) = self.arcs.cost.layout().targets(n);
        let fc = self.arcs.cost.freq_costs();
        let pi_i = self.pi[i];
        let mut arc = self.arcs.start[i];
        for n2 in lo..=hi {
            let base = pi_i + self.arcs.cost.time_cost(n.abs_diff(n2)).unwrap();
            let sink_pi = &self.pi[self.sources + n2 * bins..self.sources + (n2 + 1) * bins];
            for (m2, &pj) in sink_pi.iter().enumerate() {
                let rc = fc[m.abs_diff(m2)] + base - pj;
                if rc < best.0 {
                    *best = (rc, arc);
                    if first_only {
                        return true;
                    }
                }
                arc += 1;
            }
        }
        false
    }

    /// Block search pricing starting at the cursor.
    fn find_entering_block(&mut self) -> Option<usize> {
        let mut best = (-self.eps, NONE);
        let mut scanned = 0;
        let mut in_block = 0;
        for _ in 0..self.sources {
            let i = self.cursor;
            self.cursor = (self.cursor + 1) % self.sources;
            self.scan_source(i, &mut best, false);
            let len = self.arcs.start[i + 1] - self.arcs.start[i];
            scanned += len;
            in_block += len;
            if in_block >= self.block_size {
                if best.1 != NONE {
                    return Some(best.1);
                }
                in_block = 0;
            }
        }
        debug_assert!(scanned == self.arcs.count());
        (best.1 != NONE).then_some(best.1)
    }

    /// Bland: the eligible arc of smallest index.
    fn find_entering_bland(&self) -> Option<usize> {
        let mut best = (-self.eps, NONE);
        for i in 0..self.sources {
            if self.scan_source(i, &mut best, true) {
                return Some(best.1);
            }
        }
        None
    }

    fn run(&mut self) {
        let mut degenerate_streak = 0;
        let bland_after = self.parent.len();
        loop {
            let entering = if degenerate_streak > bland_after {
                self.find_entering_bland()
            } else {
                self.find_entering_block()
            };
            let Some(arc) = entering else { break };
            let delta = self.pivot(arc);
            self.pivots += 1;
            if delta > 0.0 {
                degenerate_streak = 0;
            } else {
                degenerate_streak += 1;
            }
        }
        log::debug!("network simplex finished after {} pivots", self.pivots);
    }

    /// Pushes flow around the cycle closed by `arc` and re-hangs the tree.
    /// Returns the amount of flow moved.
    fn pivot(&mut self, arc: usize) -> f64 {
        let (i, j) = self.arcs.decode(arc);
        let (s, t) = (i, self.sources + j);

        let (mut u, mut v) = (s, t);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        let join = u;

        // leaving arc: minimum flow among arcs traversed against their
        // orientation, ties to the smallest arc id
        let mut delta = f64::INFINITY;
        let mut leave = NONE;
        let mut leave_on_t_side = false;
        let mut consider = |ns: &Self, w: usize, t_side: bool, delta: &mut f64, leave: &mut usize| {
            let f = ns.flow[w];
            if f < *delta || (f == *delta && ns.arc_id(w) < ns.arc_id(*leave)) {
                *delta = f;
                *leave = w;
                leave_on_t_side = t_side;
            }
        };
        let mut w = t;
        while w != join {
            if !self.up[w] {
                consider(self, w, true, &mut delta, &mut leave);
            }
            w = self.parent[w];
        }
        let mut w = s;
        while w != join {
            if self.up[w] {
                consider(self, w, false, &mut delta, &mut leave);
            }
            w = self.parent[w];
        }
        debug_assert!(leave != NONE);

        if delta > 0.0 {
            let mut w = t;
            while w != join {
                self.flow[w] += if self.up[w] { delta } else { -delta };
                w = self.parent[w];
            }
            let mut w = s;
            while w != join {
                self.flow[w] += if self.up[w] { -delta } else { delta };
                w = self.parent[w];
            }
        }
        // the minimum arc drops to exactly zero
        self.flow[leave] = 0.0;

        let (x, y) = if leave_on_t_side { (t, s) } else { (s, t) };
        let mut path = vec![x];
        while *path.last().unwrap() != leave {
            let w = *path.last().unwrap();
            path.push(self.parent[w]);
        }
        let old: Vec<(usize, bool, f64)> = path.iter().map(|&w| (self.pred[w], self.up[w], self.flow[w])).collect();
        for &w in &path {
            self.detach(w);
        }
        self.attach(x, y);
        self.pred[x] = arc;
        self.up[x] = x == s;
        self.flow[x] = delta;
        for k in 1..path.len() {
            let (w, below) = (path[k], path[k - 1]);
            self.attach(w, below);
            self.pred[w] = old[k - 1].0;
            self.up[w] = !old[k - 1].1;
            self.flow[w] = old[k - 1].2;
        }
        self.refresh_subtree(x);
        delta
    }

    /// Recomputes depth and potentials below (and including) `top`.
    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            let c = self.pred_cost(v);
            self.depth[v] = self.depth[p] + 1;
            self.pi[v] = if self.up[v] { self.pi[p] - c } else { self.pi[p] + c };
            let mut child = self.first_child[v];
            while child != NONE {
                stack.push(child);
                child = self.next_sib[child];
            }
        }
    }

    fn solution(&self) -> Solution {
        let mut flows = Vec::new();
        let mut artificial_flow = 0.0;
        for v in 0..self.root {
            let arc = self.arc_id(v);
            if self.is_artificial(arc) {
                artificial_flow += self.flow[v];
            } else if self.flow[v] > 0.0 {
                let (i, j) = self.arcs.decode(arc);
                flows.push((i, j, self.flow[v]));
            }
        }
        Solution {
            flows,
            artificial_flow,
            pivots: self.pivots,
        }
    }
}
