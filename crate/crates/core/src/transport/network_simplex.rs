//! Primal network simplex for the uniform-marginal transportation problem.
//!
//! `n` supply nodes (one unit each) ship to `k` demand nodes (`n/k` units
//! each) along arcs `(i, j)` priced by `C[i, j]`. Flows are integers, so the
//! optimum found is a vertex of the polytope and the returned coupling is
//! integral.
//!
//! The spanning-tree bookkeeping (parent/thread/successor arrays, strongly
//! feasible leaving-arc rule, block-search pricing) follows the classic
//! LEMON layout. An extra root node joins the demand nodes through zero-cost
//! artificial arcs that carry no flow, and the initial basis hangs every
//! supply node under the demand node of a balanced warm-start assignment.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;

/// Solution of one transportation problem.
#[derive(Clone, Debug)]
pub struct FlowSolution {
    /// Column assigned to each supply node.
    pub assignment: Vec<usize>,
    pub pivots: usize,
}

struct Simplex<'a> {
    n: usize,
    k: usize,
    /// Real arc count `n * k`; artificial arc of demand node `j` is `m + j`.
    m: usize,
    costs: &'a [f64],
    eps: f64,

    flow: Vec<i64>,
    in_tree: Vec<bool>,
    pi: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    root: usize,

    block_size: usize,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

impl<'a> Simplex<'a> {
    fn source(&self, e: usize) -> usize {
        if e < self.m {
            e / self.k
        } else {
            self.n + (e - self.m)
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.m {
            self.n + e % self.k
        } else {
            self.root
        }
    }

    fn cost(&self, e: usize) -> f64 {
        if e < self.m {
            self.costs[e]
        } else {
            0.0
        }
    }

    fn new(costs: &'a [f64], n: usize, k: usize, warm: &[usize]) -> Self {
        let m = n * k;
        let nodes = n + k + 1;
        let root = n + k;
        let max_abs = costs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let mut s = Simplex {
            n,
            k,
            m,
            costs,
            eps: 1e-11 * max_abs,
            flow: vec![0; m + k],
            in_tree: vec![false; m + k],
            pi: vec![0.0; nodes],
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            pred_dir: vec![UP; nodes],
            thread: vec![0; nodes],
            rev_thread: vec![0; nodes],
            succ_num: vec![1; nodes],
            last_succ: vec![0; nodes],
            dirty_revs: Vec::new(),
            root,
            block_size: ((m as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };

        // Members of each column in index order.
        let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(n / k); k];
        for (i, &j) in warm.iter().enumerate() {
            members[j].push(i);
        }

        // Preorder thread: root, demand 0, its supplies, demand 1, ...
        let mut order = Vec::with_capacity(nodes);
        order.push(root);
        for (j, group) in members.iter().enumerate() {
            let dj = n + j;
            order.push(dj);
            s.parent[dj] = root;
            s.pred[dj] = m + j;
            s.pred_dir[dj] = UP;
            s.in_tree[m + j] = true;
            s.pi[dj] = 0.0;
            s.succ_num[dj] = 1 + group.len();
            s.last_succ[dj] = group.last().copied().unwrap_or(dj);
            for &i in group {
                order.push(i);
                let e = i * k + j;
                s.parent[i] = dj;
                s.pred[i] = e;
                s.pred_dir[i] = UP;
                s.in_tree[e] = true;
                s.flow[e] = 1;
                s.pi[i] = -costs[e];
                s.succ_num[i] = 1;
                s.last_succ[i] = i;
            }
        }
        for w in 0..nodes {
            let a = order[w];
            let b = order[(w + 1) % nodes];
            s.thread[a] = b;
            s.rev_thread[b] = a;
        }
        s.succ_num[root] = nodes;
        s.last_succ[root] = order[nodes - 1];
        s
    }

    fn reduced_cost(&self, i: usize, j: usize, e: usize) -> f64 {
        self.costs[e] + self.pi[i] - self.pi[self.n + j]
    }

    /// Block search: scan blocks of arcs from a rotating start, pivot on the
    /// most negative reduced cost of the first block that has one. Ties go
    /// to the lowest arc index in scan order.
    fn find_entering_arc(&mut self) -> bool {
        let (m, k) = (self.m, self.k);
        let mut min = -self.eps;
        let mut best = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / k;
        let mut j = e % k;
        for _ in 0..m {
            if !self.in_tree[e] {
                let rc = self.reduced_cost(i, j, e);
                if rc < min {
                    min = rc;
                    best = e;
                }
            }
            e += 1;
            j += 1;
            if j == k {
                j = 0;
                i += 1;
            }
            if e == m {
                e = 0;
                i = 0;
                j = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE {
                    self.in_arc = best;
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if best != NONE {
            self.in_arc = best;
            self.next_arc = e;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Strongly feasible leaving-arc rule: strict comparison on the source
    /// side, non-strict on the target side.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = i64::MAX;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            let d = if self.pred_dir[u] == DOWN { i64::MAX } else { self.flow[self.pred[u]] };
            if d < delta {
                delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let d = if self.pred_dir[u] == UP { i64::MAX } else { self.flow[self.pred[u]] };
            if d <= delta {
                delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0 && delta != i64::MAX
    }

    fn change_flow(&mut self) {
        let leaving = self.pred[self.u_out];
        if self.delta > 0 {
            let val = self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= i64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += i64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.in_tree[self.in_arc] = true;
        self.in_tree[leaving] = false;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join) = (self.u_in, self.v_in, self.u_out, self.join);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(self.in_arc) { UP } else { DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = in_dir;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            // old_rev_thread == v_in means join and v_out coincide
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem nodes between u_in and u_out.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for idx in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[idx];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = in_dir;
            self.succ_num[u_in] = old_succ_num;
        }

        // last_succ from v_in towards the root
        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        // last_succ from v_out towards the root
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - f64::from(self.pred_dir[self.u_in]) * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn solve(&mut self, max_pivots: usize) -> Result<usize> {
        let mut pivots = 0;
        while self.find_entering_arc() {
            if pivots == max_pivots {
                return Err(Error::InvalidArgument(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::InvalidArgument("transport problem is unbounded".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
        }
        Ok(pivots)
    }

    fn assignment(&self) -> Vec<usize> {
        let mut out = vec![NONE; self.n];
        for i in 0..self.n {
            for j in 0..self.k {
                if self.flow[i * self.k + j] > 0 {
                    out[i] = j;
                }
            }
        }
        out
    }
}

/// Balanced starting assignment: exact for `k <= 2`, greedy cheapest-pair
/// otherwise.
fn warm_start(costs: &[f64], n: usize, k: usize) -> Vec<usize> {
    let cap = n / k;
    match k {
        1 => vec![0; n],
        2 => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                let da = costs[2 * a] - costs[2 * a + 1];
                let db = costs[2 * b] - costs[2 * b + 1];
                da.total_cmp(&db).then(a.cmp(&b))
            });
            let mut out = vec![1; n];
            for &i in &idx[..cap] {
                out[i] = 0;
            }
            out
        }
        _ => {
            let mut pairs: Vec<usize> = (0..n * k).collect();
            pairs.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
            let mut out = vec![NONE; n];
            let mut load = vec![0; k];
            let mut placed = 0;
            for e in pairs {
                let (i, j) = (e / k, e % k);
                if out[i] == NONE && load[j] < cap {
                    out[i] = j;
                    load[j] += 1;
                    placed += 1;
                    if placed == n {
                        break;
                    }
                }
            }
            out
        }
    }
}

/// Optimal balanced assignment for a row-major `n x k` cost slice.
pub fn solve_transport(costs: &[f64], n: usize, k: usize) -> Result<FlowSolution> {
    if k == 0 || k > n || !n.is_multiple_of(k) {
        return Err(Error::Unbalanced { n, k });
    }
    if costs.len() != n * k {
        return Err(Error::Dimension(format!("expected {} costs, got {}", n * k, costs.len())));
    }
    let warm = warm_start(costs, n, k);
    let mut simplex = Simplex::new(costs, n, k, &warm);
    let max_pivots = 64 * (n + k) * k + 10_000;
    let pivots = simplex.solve(max_pivots)?;
    Ok(FlowSolution { assignment: simplex.assignment(), pivots })
}
