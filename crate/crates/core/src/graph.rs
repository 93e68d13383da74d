//! Transition graphs, strongly connected components, Perron entropy and
//! first-return cycle enumeration.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netspec::{BoxLabel, NetworkSpec};

/// Directed graph over arbitrary vertex values with sorted adjacency lists.
#[derive(Clone, Debug)]
pub struct DiGraph<V> {
    vertices: Vec<V>,
    index: HashMap<V, usize>,
    adj: Vec<Vec<usize>>,
}

impl DiGraph<usize> {
    /// Graph on vertices `0..adj.len()` with the given successor lists.
    pub fn from_adjacency(adj: &[Vec<usize>]) -> Self {
        let mut g = DiGraph::new();
        for i in 0..adj.len() {
            g.add_vertex(i);
        }
        for (i, succ) in adj.iter().enumerate() {
            for &j in succ {
                g.add_edge(i, j);
            }
        }
        g
    }
}

impl<V: Clone + Eq + Hash> DiGraph<V> {
    pub fn new() -> Self {
        Self { vertices: Vec::new(), index: HashMap::new(), adj: Vec::new() }
    }

    pub fn add_vertex(&mut self, v: V) -> usize {
        if let Some(&i) = self.index.get(&v) {
            return i;
        }
        let i = self.vertices.len();
        self.index.insert(v.clone(), i);
        self.vertices.push(v);
        self.adj.push(Vec::new());
        i
    }

    /// Adds `u -> v`, creating missing vertices; duplicate edges are ignored.
    pub fn add_edge(&mut self, u: V, v: V) {
        let a = self.add_vertex(u);
        let b = self.add_vertex(v);
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
        }
    }

    pub fn remove_edge(&mut self, u: &V, v: &V) -> bool {
        let (Some(&a), Some(&b)) = (self.index.get(u), self.index.get(v)) else {
            return false;
        };
        match self.adj[a].binary_search(&b) {
            Ok(pos) => {
                self.adj[a].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn vertex_id(&self, v: &V) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn has_edge(&self, u: &V, v: &V) -> bool {
        match (self.index.get(u), self.index.get(v)) {
            (Some(&a), Some(&b)) => self.adj[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }
}

impl<V: Clone + Eq + Hash> Default for DiGraph<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> DiGraph<V> {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> &[V] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &V {
        &self.vertices[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Adjacency lists by vertex id.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn edges(&self) -> impl Iterator<Item = (&V, &V)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(move |(u, succ)| succ.iter().map(move |&v| (&self.vertices[u], &self.vertices[v])))
    }

    pub fn max_out_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn entropy(&self) -> f64 {
        entropy_of_adjacency(&self.adj)
    }

    pub fn to_dot(&self, name: &str, label: impl Fn(&V) -> String) -> String {
        let mut out = format!("digraph \"{name}\" {{\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "  v{i} [label=\"{}\"];", label(v));
        }
        for (u, succ) in self.adj.iter().enumerate() {
            for v in succ {
                let _ = writeln!(out, "  v{u} -> v{v};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Strongly connected components of an adjacency list, each sorted, listed
/// in order of their smallest vertex id.
pub fn scc_decompose(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    // (vertex, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

const POWER_TOL: f64 = 1e-12;
const DENSE_LIMIT: usize = 12;

/// Perron eigenvalue of the adjacency matrix (max over components).
pub fn perron_eigenvalue(adj: &[Vec<usize>]) -> f64 {
    scc_decompose(adj)
        .iter()
        .map(|comp| component_eigenvalue(adj, comp))
        .fold(0.0, f64::max)
}

/// `log2` of the Perron eigenvalue; 0 when no component carries branching.
pub fn entropy_of_adjacency(adj: &[Vec<usize>]) -> f64 {
    let mu = perron_eigenvalue(adj);
    if mu <= 1.0 {
        0.0
    } else {
        mu.log2()
    }
}

fn component_eigenvalue(adj: &[Vec<usize>], comp: &[usize]) -> f64 {
    let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let sub: Vec<Vec<usize>> = comp
        .iter()
        .map(|v| adj[*v].iter().filter_map(|w| local.get(w).copied()).collect())
        .collect();
    let edges: usize = sub.iter().map(Vec::len).sum();
    if edges == 0 {
        return 0.0;
    }
    // A strongly connected component with as many edges as vertices is a
    // single cycle.
    if edges == comp.len() {
        return 1.0;
    }
    if comp.len() < DENSE_LIMIT {
        dense_bisection(&sub)
    } else {
        power_iteration(&sub)
    }
}

/// Power iteration on `A + I` (aperiodic even when `A` is not), with
/// Collatz–Wielandt bounds as the stopping rule.
fn power_iteration(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    let mut x = vec![1.0f64; n];
    let mut y = vec![0.0f64; n];
    let mut estimate = 1.0;
    for _ in 0..1_000_000 {
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = *xi;
        }
        // y = (A + I) x with A acting as x_u <- sum over successors
        for (u, succ) in adj.iter().enumerate() {
            let mut s = 0.0;
            for &v in succ {
                s += x[v];
            }
            y[u] += s;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let norm = y.iter().fold(0.0f64, |m, v| m.max(*v));
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        estimate = 0.5 * (lo + hi) - 1.0;
        if hi - lo <= POWER_TOL * hi {
            break;
        }
    }
    estimate
}

/// Bisection on `x` using the M-matrix test: `xI - A` has an LU
/// factorisation with positive pivots iff `x` exceeds the spectral radius.
fn dense_bisection(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    let mut a = vec![vec![0.0f64; n]; n];
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            a[u][v] += 1.0;
        }
    }
    let above = |x: f64| -> bool {
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { x - a[i][j] } else { -a[i][j] }).collect())
            .collect();
        for k in 0..n {
            let p = m[k][k];
            if p <= 0.0 {
                return false;
            }
            let (top, rest) = m.split_at_mut(k + 1);
            let pivot_row = &top[k];
            for row in rest.iter_mut() {
                let factor = row[k] / p;
                if factor == 0.0 {
                    continue;
                }
                for (x, y) in row[k..].iter_mut().zip(&pivot_row[k..]) {
                    *x -= factor * y;
                }
            }
        }
        true
    };
    let mut lo = 1.0;
    let mut hi = adj.iter().map(Vec::len).max().unwrap_or(1) as f64;
    while hi - lo > POWER_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Box-level transition graph.
pub type TransitionGraph = DiGraph<BoxLabel>;

/// Edges `a -> a ± e_i` for every exit, plus self-loops on terminal boxes.
pub fn build_tg(spec: &NetworkSpec) -> TransitionGraph {
    let mut g = DiGraph::new();
    for a in spec.boxes() {
        g.add_vertex(a);
    }
    for a in spec.boxes() {
        let out = spec.out_directions(a);
        if out.is_empty() {
            g.add_edge(a, a);
        }
        for i in out.axes() {
            g.add_edge(a, a.flip(i));
        }
    }
    g
}

/// A closed box path through the starting edge, or a concatenation of them.
///
/// `boxes[0]` is the head of the starting edge and the last entry its tail, so
/// following the starting edge from the last box closes the loop.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CycleWord {
    pub label: String,
    #[serde(serialize_with = "ser_boxes")]
    pub boxes: Vec<BoxLabel>,
}

fn ser_boxes<S: serde::Serializer>(b: &[BoxLabel], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(b.iter().map(ToString::to_string))
}

impl CycleWord {
    pub fn new(label: impl Into<String>, boxes: Vec<BoxLabel>) -> Self {
        Self { label: label.into(), boxes }
    }

    /// `(tail, head)` of the starting edge.
    pub fn starting_edge(&self) -> (BoxLabel, BoxLabel) {
        (*self.boxes.last().expect("nonempty cycle"), self.boxes[0])
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Concatenation of several first-return cycles sharing a starting edge.
    pub fn concat(parts: &[&CycleWord]) -> CycleWord {
        CycleWord {
            label: parts.iter().map(|c| c.label.as_str()).collect(),
            boxes: parts.iter().flat_map(|c| c.boxes.iter().copied()).collect(),
        }
    }

    /// The box path with the first box repeated at the end.
    pub fn closed_path(&self) -> Vec<BoxLabel> {
        let mut p = self.boxes.clone();
        p.push(self.boxes[0]);
        p
    }

    /// Checks the closed path against `g` and the first-return property.
    pub fn check(&self, g: &TransitionGraph) -> Result<()> {
        if self.boxes.is_empty() {
            return Err(Error::PathNotClosed);
        }
        let (u, v) = self.starting_edge();
        let path = self.closed_path();
        for (k, w) in path.windows(2).enumerate() {
            if !g.has_edge(&w[0], &w[1]) {
                return Err(Error::NotAnEdge { from: w[0].to_string(), to: w[1].to_string() });
            }
            if k + 2 < path.len() && w[0] == u && w[1] == v {
                return Err(Error::InvalidArgument(format!(
                    "cycle {} revisits its starting edge",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// All first-return cycles through `(u, v)` with at most `max_len` edges,
/// sorted lexicographically by box sequence.
///
/// Vertices may repeat inside a cycle; only the starting edge is forbidden
/// away from the first position. Branches that cannot reach `u` within the
/// remaining budget are cut using BFS distances to `u`.
pub fn enumerate_first_return_cycles<V: Clone + Eq + Hash + Ord>(
    g: &DiGraph<V>,
    starting_edge: (&V, &V),
    max_len: usize,
) -> Vec<Vec<V>> {
    let (Some(u), Some(v)) = (g.vertex_id(starting_edge.0), g.vertex_id(starting_edge.1)) else {
        return Vec::new();
    };
    if !g.has_edge(starting_edge.0, starting_edge.1) || max_len == 0 {
        return Vec::new();
    }
    let n = g.vertex_count();
    // dist[x] = shortest distance from x to u avoiding the starting edge.
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, succ) in g.adjacency().iter().enumerate() {
        for &b in succ {
            if (a, b) != (u, v) {
                rev[b].push(a);
            }
        }
    }
    let mut dist = vec![usize::MAX; n];
    dist[u] = 0;
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &p in &rev[x] {
            if dist[p] == usize::MAX {
                dist[p] = dist[x] + 1;
                queue.push_back(p);
            }
        }
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut path = vec![v];
    // Edges used so far: the starting edge plus path edges.
    fn dfs(
        g_adj: &[Vec<usize>],
        dist: &[usize],
        edge: (usize, usize),
        budget: usize,
        path: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        let x = *path.last().expect("nonempty path");
        let used = path.len(); // edges including the starting edge
        if x == edge.0 {
            found.push(path.clone());
        }
        for &y in &g_adj[x] {
            if (x, y) == edge {
                continue;
            }
            if dist[y] == usize::MAX || used + 1 + dist[y] > budget {
                continue;
            }
            path.push(y);
            dfs(g_adj, dist, edge, budget, path, found);
            path.pop();
        }
    }
    if dist[v] < max_len {
        dfs(g.adjacency(), &dist, (u, v), max_len, &mut path, &mut found);
    }
    let mut cycles: Vec<Vec<V>> = found
        .into_iter()
        .map(|p| p.into_iter().map(|i| g.vertex(i).clone()).collect())
        .collect();
    cycles.sort();
    cycles.dedup();
    cycles
}

/// First-return cycles of the transition graph as labelled words `C1, C2, …`.
pub fn first_return_cycles(g: &TransitionGraph, edge: (BoxLabel, BoxLabel), max_len: usize) -> Vec<CycleWord> {
    enumerate_first_return_cycles(g, (&edge.0, &edge.1), max_len)
        .into_iter()
        .enumerate()
        .map(|(i, boxes)| CycleWord::new(format!("C{}", i + 1), boxes))
        .collect()
}

/// Union of the edge sets of the given closed box paths.
pub fn cycle_union_graph<'a>(cycles: impl IntoIterator<Item = &'a CycleWord>) -> TransitionGraph {
    let mut g = DiGraph::new();
    for c in cycles {
        for w in c.closed_path().windows(2) {
            g.add_edge(w[0], w[1]);
        }
    }
    g
}

/// Vertex set of a graph as a sorted set, handy for comparisons.
pub fn vertex_set<V: Clone + Ord>(g: &DiGraph<V>) -> BTreeSet<V> {
    g.vertices().iter().cloned().collect()
}
