//! Primal network simplex for uncapacitated bipartite transportation,
//! specialized to the layout used everywhere in this crate: `ns` sources with
//! fixed supplies, `nt` sinks with fixed demands, arcs only from sources to
//! sinks, plus an artificial root that provides the initial basis.
//!
//! The tree is maintained in the classic thread/parent index arrays
//! (parent, predecessor arc, thread, reverse thread, successor count, last
//! successor), pivots use block search over the arc pool with a Bland-rule
//! fallback after degenerate stalls, and the arc pool can grow between
//! `optimize` calls (column generation) or have its costs rewritten in place
//! (warm restarts across Lloyd iterations).

use crate::error::{Error, Result};

const INVALID: u32 = u32::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
/// Relative reduced-cost tolerance for pivot admission.
const EPS_REL: f64 = 1e-13;

pub(crate) struct SimplexCore {
    ns: usize,
    nt: usize,
    root: usize,
    max_supply: f64,

    // Arc arrays. Arcs 0..ns+nt are artificial (node i <-> root); the pool
    // of real source->sink arcs starts at `pool_start`.
    src: Vec<u32>,
    dst: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pool_start: usize,

    // Spanning-tree structure indexed by node (root = ns + nt).
    parent: Vec<u32>,
    pred: Vec<u32>,
    pred_dir: Vec<i8>,
    thread: Vec<u32>,
    rev_thread: Vec<u32>,
    succ_num: Vec<u32>,
    last_succ: Vec<u32>,
    pi: Vec<f64>,

    // Pivot state.
    next_arc: usize,
    block_size: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    dirty_revs: Vec<u32>,
    stall_count: usize,
    bland: bool,

    // Sorted sink lists per source, for arc dedup during column generation.
    adj: Vec<Vec<u32>>,
}

impl SimplexCore {
    /// Builds the all-artificial initial basis. `max_cost_bound` must be an
    /// upper bound on every real arc cost that will ever be added.
    pub(crate) fn new(supplies: &[f64], demands: &[f64], max_cost_bound: f64) -> SimplexCore {
        let ns = supplies.len();
        let nt = demands.len();
        let n = ns + nt;
        let root = n;
        let art_cost = (max_cost_bound.max(0.0) + 1.0) * (n as f64 + 1.0);
        let max_supply = supplies
            .iter()
            .chain(demands.iter())
            .fold(0.0_f64, |a, &b| a.max(b));

        let mut src = Vec::with_capacity(2 * n);
        let mut dst = Vec::with_capacity(2 * n);
        let mut cost = Vec::with_capacity(2 * n);
        let mut flow = Vec::with_capacity(2 * n);
        let mut state = Vec::with_capacity(2 * n);
        let mut pred_dir = vec![0i8; n + 1];
        let mut pi = vec![0.0; n + 1];

        // Artificial arc for node i has arc index i.
        for (u, &s) in supplies.iter().enumerate() {
            src.push(u as u32);
            dst.push(root as u32);
            cost.push(art_cost);
            flow.push(s);
            state.push(STATE_TREE);
            pred_dir[u] = 1; // arc points u -> parent(root)
            pi[u] = -art_cost;
        }
        for (j, &dem) in demands.iter().enumerate() {
            let v = ns + j;
            src.push(root as u32);
            dst.push(v as u32);
            cost.push(art_cost);
            flow.push(dem);
            state.push(STATE_TREE);
            pred_dir[v] = -1; // arc points parent(root) -> v
            pi[v] = art_cost;
        }

        let mut thread = vec![0u32; n + 1];
        let mut rev_thread = vec![0u32; n + 1];
        for i in 0..n {
            thread[i] = if i + 1 < n { (i + 1) as u32 } else { root as u32 };
            rev_thread[i] = if i == 0 { root as u32 } else { (i - 1) as u32 };
        }
        thread[root] = 0;
        rev_thread[root] = (n - 1) as u32;

        let mut parent = vec![root as u32; n + 1];
        parent[root] = INVALID;
        let mut pred = (0..n as u32).collect::<Vec<_>>();
        pred.push(INVALID);
        let mut succ_num = vec![1u32; n + 1];
        succ_num[root] = (n + 1) as u32;
        let mut last_succ = (0..n as u32).collect::<Vec<_>>();
        last_succ.push((n - 1) as u32);

        SimplexCore {
            ns,
            nt,
            root,
            max_supply,
            src,
            dst,
            cost,
            flow,
            state,
            pool_start: n,
            parent,
            pred,
            pred_dir,
            thread,
            rev_thread,
            succ_num,
            last_succ,
            pi,
            next_arc: n,
            block_size: 64,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            dirty_revs: Vec::new(),
            stall_count: 0,
            bland: false,
            adj: vec![Vec::new(); ns],
        }
    }

    pub(crate) fn pool_len(&self) -> usize {
        self.src.len() - self.pool_start
    }

    pub(crate) fn potentials(&self) -> &[f64] {
        &self.pi
    }

    /// Adds a source->sink arc unless it is already present.
    pub(crate) fn add_arc(&mut self, s: usize, t: usize, c: f64) -> bool {
        let tl = t as u32;
        match self.adj[s].binary_search(&tl) {
            Ok(_) => false,
            Err(pos) => {
                self.adj[s].insert(pos, tl);
                self.src.push(s as u32);
                self.dst.push((self.ns + t) as u32);
                self.cost.push(c);
                self.flow.push(0.0);
                self.state.push(STATE_LOWER);
                true
            }
        }
    }

    /// Iterates pool arcs as (arc index, source, sink) triples.
    #[cfg(test)]
    pub(crate) fn pool_arcs(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        (self.pool_start..self.src.len())
            .map(move |a| (a, self.src[a], self.dst[a] - self.ns as u32))
    }

    /// Rewrites one arc's cost (tree structure and flows are untouched;
    /// call `recompute_potentials` once all costs are in place).
    #[cfg(test)]
    pub(crate) fn set_cost(&mut self, arc: usize, c: f64) {
        self.cost[arc] = c;
    }

    /// Rewrites every pool arc's cost from (source, sink) via `f`.
    /// Call `recompute_potentials` afterwards.
    pub(crate) fn rewrite_pool_costs(&mut self, f: impl Fn(u32, u32) -> f64) {
        let ns = self.ns as u32;
        for a in self.pool_start..self.src.len() {
            self.cost[a] = f(self.src[a], self.dst[a] - ns);
        }
    }

    /// Recomputes node potentials from the current tree by a preorder pass.
    pub(crate) fn recompute_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root] as usize;
        while u != self.root {
            let e = self.pred[u] as usize;
            let p = self.parent[u] as usize;
            self.pi[u] = if self.pred_dir[u] == 1 {
                self.pi[p] - self.cost[e]
            } else {
                self.pi[p] + self.cost[e]
            };
            u = self.thread[u] as usize;
        }
    }

    /// Replaces the untouched all-artificial basis with a northwest-corner
    /// basis built along the given row and column orders, adding the basic
    /// arcs to the (still empty) pool with costs from `cost`. When the
    /// orders follow a space-filling curve the start is geometrically close
    /// to optimal, which cuts cold-solve pivots by an order of magnitude.
    pub(crate) fn init_basis_nw(
        &mut self,
        row_order: &[u32],
        col_order: &[u32],
        cost: impl Fn(usize, usize) -> f64,
    ) {
        let ns = self.ns;
        let nt = self.nt;
        let n = ns + nt;
        let root = self.root;
        debug_assert_eq!(self.src.len(), self.pool_start, "pool must be empty");
        debug_assert_eq!(row_order.len(), ns);
        debug_assert_eq!(col_order.len(), nt);

        // Supplies and demands still sit on the artificial arcs.
        let mut arcs: Vec<(u32, f64)> = Vec::with_capacity(n - 1);
        let (mut i, mut j) = (0usize, 0usize);
        let mut ar = self.flow[row_order[0] as usize];
        let mut bc = self.flow[ns + col_order[0] as usize];
        loop {
            let s = row_order[i] as usize;
            let t = col_order[j] as usize;
            let f = ar.min(bc).max(0.0);
            let added = self.add_arc(s, t, cost(s, t));
            debug_assert!(added, "duplicate arc in northwest-corner walk");
            arcs.push(((self.src.len() - 1) as u32, f));
            if i + 1 == ns && j + 1 == nt {
                break;
            }
            if (ar <= bc && i + 1 < ns) || j + 1 == nt {
                bc -= f;
                i += 1;
                ar = self.flow[row_order[i] as usize];
            } else {
                ar -= f;
                j += 1;
                bc = self.flow[ns + col_order[j] as usize];
            }
        }

        // The whole mass now rides the NW arcs; artificial arcs drop to zero
        // and one of them (flow 0) keeps the root attached to the tree.
        for a in 0..n {
            self.flow[a] = 0.0;
            self.state[a] = STATE_LOWER;
        }
        for &(a, f) in &arcs {
            self.flow[a as usize] = f;
            self.state[a as usize] = STATE_TREE;
        }
        let connector = row_order[0] as usize;
        self.state[connector] = STATE_TREE;

        let mut adj_tree: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n + 1];
        adj_tree[connector].push((root as u32, connector as u32));
        adj_tree[root].push((connector as u32, connector as u32));
        for &(a, _) in &arcs {
            let u = self.src[a as usize];
            let v = self.dst[a as usize];
            adj_tree[u as usize].push((v, a));
            adj_tree[v as usize].push((u, a));
        }

        // Preorder DFS from the root rebuilds every tree array.
        let mut pos = vec![0u32; n + 1];
        let mut pre: Vec<u32> = Vec::with_capacity(n + 1);
        let mut visited = vec![false; n + 1];
        let mut stack: Vec<u32> = vec![root as u32];
        visited[root] = true;
        self.parent[root] = INVALID;
        self.pred[root] = INVALID;
        self.pred_dir[root] = 0;
        while let Some(u) = stack.pop() {
            pos[u as usize] = pre.len() as u32;
            pre.push(u);
            for &(w, a) in &adj_tree[u as usize] {
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    self.parent[w as usize] = u;
                    self.pred[w as usize] = a;
                    self.pred_dir[w as usize] =
                        if self.src[a as usize] == w { 1 } else { -1 };
                    stack.push(w);
                }
            }
        }
        debug_assert_eq!(pre.len(), n + 1, "northwest-corner basis is not spanning");

        for k in 0..=n {
            let u = pre[k] as usize;
            self.thread[u] = pre[(k + 1) % (n + 1)];
            self.rev_thread[u] = pre[(k + n) % (n + 1)];
            self.succ_num[u] = 1;
            self.last_succ[u] = u as u32;
        }
        for k in (1..=n).rev() {
            let w = pre[k] as usize;
            let p = self.parent[w] as usize;
            self.succ_num[p] += self.succ_num[w];
            if pos[self.last_succ[w] as usize] > pos[self.last_succ[p] as usize] {
                self.last_succ[p] = self.last_succ[w];
            }
        }
        self.recompute_potentials();
        self.next_arc = self.pool_start;
        self.stall_count = 0;
        self.bland = false;
    }

    /// Positive pool-arc flows as (source, sink, flow).
    pub(crate) fn flows(&self, min_flow: f64) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for a in self.pool_start..self.src.len() {
            if self.flow[a] > min_flow {
                out.push((self.src[a], self.dst[a] - self.ns as u32, self.flow[a]));
            }
        }
        out
    }

    /// Largest residual flow on an artificial arc (should be ~0 at optimum
    /// of a balanced instance).
    pub(crate) fn artificial_residual(&self) -> f64 {
        self.flow[..self.pool_start]
            .iter()
            .fold(0.0_f64, |a, &f| a.max(f))
    }

    #[inline]
    fn eps_for(&self, arc: usize) -> f64 {
        let u = self.src[arc] as usize;
        let v = self.dst[arc] as usize;
        EPS_REL
            * self.cost[arc]
                .abs()
                .max(self.pi[u].abs())
                .max(self.pi[v].abs())
                .max(1.0)
    }

    #[inline]
    fn reduced_cost(&self, arc: usize) -> f64 {
        self.cost[arc] + self.pi[self.src[arc] as usize] - self.pi[self.dst[arc] as usize]
    }

    /// Block-search pricing over the pool; Bland fallback scans from the
    /// first pool arc and admits the first violating arc.
    fn find_entering(&mut self) -> bool {
        let m = self.src.len();
        if self.pool_start == m {
            return false;
        }
        if self.bland {
            for a in self.pool_start..m {
                if self.state[a] == STATE_LOWER {
                    let rc = self.reduced_cost(a);
                    if rc < -self.eps_for(a) {
                        self.in_arc = a;
                        return true;
                    }
                }
            }
            return false;
        }
        let pool_len = m - self.pool_start;
        self.block_size = (((pool_len as f64).sqrt() as usize) + 1).max(64);
        let mut best = 0.0_f64;
        let mut best_arc = usize::MAX;
        let mut count = self.block_size;
        if self.next_arc < self.pool_start || self.next_arc >= m {
            self.next_arc = self.pool_start;
        }
        let mut a = self.next_arc;
        for _ in 0..pool_len {
            if self.state[a] == STATE_LOWER {
                let rc = self.reduced_cost(a);
                if rc < -self.eps_for(a) && rc < best {
                    best = rc;
                    best_arc = a;
                }
            }
            count -= 1;
            if count == 0 {
                if best_arc != usize::MAX {
                    break;
                }
                count = self.block_size;
            }
            a += 1;
            if a == m {
                a = self.pool_start;
            }
        }
        if best_arc == usize::MAX {
            false
        } else {
            self.in_arc = best_arc;
            self.next_arc = best_arc + 1;
            true
        }
    }

    fn find_join(&mut self) {
        let mut u = self.src[self.in_arc] as usize;
        let mut v = self.dst[self.in_arc] as usize;
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u] as usize;
            } else {
                v = self.parent[v] as usize;
            }
        }
        self.join = u;
    }

    /// Walks both tree paths to the join node and finds the blocking arc.
    /// Returns false when the cycle is unbounded (cannot happen on a
    /// transportation polytope with finite supplies).
    fn find_leaving(&mut self) -> bool {
        let first = self.src[self.in_arc] as usize;
        let second = self.dst[self.in_arc] as usize;
        self.delta = f64::INFINITY;
        let mut result = 0u8;

        let mut u = first;
        while u != self.join {
            // Arcs pointing with the walk (node -> parent) lose flow.
            if self.pred_dir[u] == 1 {
                let d = self.flow[self.pred[u] as usize].max(0.0);
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u] as usize;
        }
        let mut u = second;
        while u != self.join {
            // On the sink-side path, arcs pointing parent -> node lose flow.
            if self.pred_dir[u] == -1 {
                let d = self.flow[self.pred[u] as usize].max(0.0);
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u] as usize;
        }
        match result {
            1 => {
                self.u_in = first;
                self.v_in = second;
                true
            }
            2 => {
                self.u_in = second;
                self.v_in = first;
                true
            }
            _ => false,
        }
    }

    fn change_flow(&mut self) {
        if self.delta > 0.0 {
            self.flow[self.in_arc] += self.delta;
            let mut u = self.src[self.in_arc] as usize;
            while u != self.join {
                self.flow[self.pred[u] as usize] -= self.pred_dir[u] as f64 * self.delta;
                u = self.parent[u] as usize;
            }
            let mut u = self.dst[self.in_arc] as usize;
            while u != self.join {
                self.flow[self.pred[u] as usize] += self.pred_dir[u] as f64 * self.delta;
                u = self.parent[u] as usize;
            }
        }
        let out_arc = self.pred[self.u_out] as usize;
        self.state[self.in_arc] = STATE_TREE;
        self.state[out_arc] = STATE_LOWER;
        // Kill floating-point drift on the leaving arc.
        self.flow[out_arc] = 0.0;
    }

    fn update_tree(&mut self) {
        let u_out = self.u_out;
        let u_in = self.u_in;
        let v_in = self.v_in;
        let old_rev_thread = self.rev_thread[u_out] as usize;
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out] as usize;
        let v_out = self.parent[u_out] as usize;

        if u_in == u_out {
            self.parent[u_in] = v_in as u32;
            self.pred[u_in] = self.in_arc as u32;
            self.pred_dir[u_in] = if u_in == self.src[self.in_arc] as usize { 1 } else { -1 };

            if self.thread[v_in] as usize != u_out {
                let mut after = self.thread[old_last_succ] as usize;
                self.thread[old_rev_thread] = after as u32;
                self.rev_thread[after] = old_rev_thread as u32;
                after = self.thread[v_in] as usize;
                self.thread[v_in] = u_out as u32;
                self.rev_thread[u_out] = v_in as u32;
                self.thread[old_last_succ] = after as u32;
                self.rev_thread[after] = old_last_succ as u32;
            }
        } else {
            // Thread continuation after removing u_out's subtree.
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ] as usize
            } else {
                self.thread[v_in] as usize
            };

            // Re-hang the stem from u_in up to u_out.
            let mut stem = u_in;
            let mut stem_parent = v_in;
            let mut last = self.last_succ[u_in] as usize;
            let mut after = self.thread[last] as usize;
            self.thread[v_in] = u_in as u32;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in as u32);
            while stem != u_out {
                let next_stem = self.parent[stem] as usize;
                self.thread[last] = next_stem as u32;
                self.dirty_revs.push(last as u32);
                let before = self.rev_thread[stem] as usize;
                self.thread[before] = after as u32;
                self.rev_thread[after] = before as u32;
                self.parent[stem] = stem_parent as u32;
                stem_parent = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[stem_parent] {
                    self.rev_thread[stem_parent] as usize
                } else {
                    self.last_succ[stem] as usize
                };
                after = self.thread[last] as usize;
            }
            self.parent[u_out] = stem_parent as u32;
            self.thread[last] = thread_continue as u32;
            self.rev_thread[thread_continue] = last as u32;
            self.last_succ[u_out] = last as u32;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after as u32;
                self.rev_thread[after] = old_rev_thread as u32;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i] as usize;
                self.rev_thread[self.thread[u] as usize] = u as u32;
            }

            // Flip predecessor data and successor counts along the stem.
            let mut temp_succ_num = 0u32;
            let temp_last_succ = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u] as usize;
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                temp_succ_num += self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = temp_succ_num;
                self.last_succ[p] = temp_last_succ;
                u = p;
                p = self.parent[u] as usize;
            }
            self.pred[u_in] = self.in_arc as u32;
            self.pred_dir[u_in] = if u_in == self.src[self.in_arc] as usize { 1 } else { -1 };
            self.succ_num[u_in] = old_succ_num;
        }

        // Fix last_succ on the path from v_in up.
        let up_limit_out = if self.last_succ[self.join] as usize == v_in {
            self.join as i64
        } else {
            -1
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in as i64;
        while u >= 0 && self.last_succ[u as usize] as usize == v_in {
            self.last_succ[u as usize] = last_succ_out;
            u = parent_or_neg(&self.parent, u as usize);
        }
        // Fix last_succ on the path from v_out up.
        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out as i64;
            while u >= 0
                && u != up_limit_out
                && self.last_succ[u as usize] as usize == old_last_succ
            {
                self.last_succ[u as usize] = old_rev_thread as u32;
                u = parent_or_neg(&self.parent, u as usize);
            }
        } else if last_succ_out as usize != old_last_succ {
            let mut u = v_out as i64;
            while u >= 0
                && u != up_limit_out
                && self.last_succ[u as usize] as usize == old_last_succ
            {
                self.last_succ[u as usize] = last_succ_out;
                u = parent_or_neg(&self.parent, u as usize);
            }
        }

        // Successor counts from v_in and v_out up to the join.
        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u] as usize;
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u] as usize;
        }
    }

    fn update_potentials(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in] as usize] as usize;
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u] as usize;
        }
    }

    /// Pivots until no pool arc prices out. Returns the pivot count.
    pub(crate) fn optimize(&mut self, max_pivots: u64) -> Result<u64> {
        let mut pivots = 0u64;
        let stall_limit = 2 * (self.ns + self.nt) + 64;
        let degenerate_floor = 1e-15 * self.max_supply.max(1e-300);
        while self.find_entering() {
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Internal(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
            self.find_join();
            if !self.find_leaving() {
                return Err(Error::Internal(
                    "network simplex: unbounded pivot cycle".into(),
                ));
            }
            if self.delta < degenerate_floor {
                self.stall_count += 1;
                if self.stall_count > stall_limit {
                    self.bland = true;
                }
            } else {
                self.stall_count = 0;
                self.bland = false;
            }
            self.change_flow();
            self.update_tree();
            self.update_potentials();
        }
        Ok(pivots)
    }

    /// Drops every nonbasic zero-flow pool arc, keeping tree arcs and any arc
    /// carrying flow. Rebuilds the dedup lists and remaps predecessor arc
    /// indices. Used to bound pool growth across warm restarts.
    pub(crate) fn compact_pool(&mut self) {
        let m = self.src.len();
        let mut keep: Vec<usize> = Vec::with_capacity(m - self.pool_start);
        for a in self.pool_start..m {
            if self.state[a] == STATE_TREE || self.flow[a] > 0.0 {
                keep.push(a);
            }
        }
        if keep.len() == m - self.pool_start {
            return;
        }
        let mut remap = vec![INVALID; m];
        for (new_rel, &a) in keep.iter().enumerate() {
            remap[a] = (self.pool_start + new_rel) as u32;
        }
        for a in 0..self.pool_start {
            remap[a] = a as u32;
        }
        for list in &mut self.adj {
            list.clear();
        }
        let mut w = self.pool_start;
        for &a in &keep {
            self.src[w] = self.src[a];
            self.dst[w] = self.dst[a];
            self.cost[w] = self.cost[a];
            self.flow[w] = self.flow[a];
            self.state[w] = self.state[a];
            let s = self.src[w] as usize;
            let t = self.dst[w] - self.ns as u32;
            let pos = self.adj[s].binary_search(&t).unwrap_err();
            self.adj[s].insert(pos, t);
            w += 1;
        }
        self.src.truncate(w);
        self.dst.truncate(w);
        self.cost.truncate(w);
        self.flow.truncate(w);
        self.state.truncate(w);
        for u in 0..self.pred.len() {
            if self.pred[u] != INVALID {
                self.pred[u] = remap[self.pred[u] as usize];
                debug_assert!(self.pred[u] != INVALID, "tree arc dropped in compaction");
            }
        }
        self.next_arc = self.pool_start;
    }
}

#[inline]
fn parent_or_neg(parent: &[u32], u: usize) -> i64 {
    let p = parent[u];
    if p == INVALID {
        -1
    } else {
        p as i64
    }
}
