//! Exact maximum clique search over bitset adjacency matrices.
//!
//! The search is a branch and bound in the MCQ/BBMC family:
//!
//! * vertices are relabelled in degeneracy (smallest-last) order and each
//!   root only branches into neighbours that come later in that order;
//! * roots whose core number cannot beat the incumbent are skipped;
//! * inside a branch, a greedy colouring of the candidate set bounds the
//!   largest clique it can still contain.
//!
//! A second, sequential pass then finds the lexicographically smallest clique
//! of the optimal size in the caller's vertex order, so the returned members
//! do not depend on root scheduling or thread count.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

/// Fixed-capacity set of vertex indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    fn from_words(words: Vec<u64>) -> Self {
        Self { words }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words
            .get(i / 64)
            .is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first(&self) -> Option<usize> {
        first_in(&self.words, 0)
    }

    /// Ascending iteration over members.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn intersect_with(&mut self, other: &[u64]) {
        for (a, b) in self.words.iter_mut().zip(other) {
            *a &= b;
        }
    }

    /// Clears every index `<= i`.
    pub fn clear_through(&mut self, i: usize) {
        let wi = i / 64;
        for w in &mut self.words[..wi] {
            *w = 0;
        }
        if let Some(w) = self.words.get_mut(wi) {
            let bit = i % 64;
            *w &= if bit == 63 { 0 } else { !0u64 << (bit + 1) };
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

fn first_in(words: &[u64], from_word: usize) -> Option<usize> {
    words[from_word..]
        .iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| (from_word + i) * 64 + w.trailing_zeros() as usize)
}

/// Symmetric, irreflexive adjacency matrix stored as one bitset row per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize) -> Self {
        let stride = n.div_ceil(64);
        Self {
            n,
            stride,
            bits: vec![0; n * stride],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::new(n);
        for (i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub(crate) fn from_rows(n: usize, rows: Vec<Vec<u64>>) -> Self {
        let stride = n.div_ceil(64);
        let mut bits = Vec::with_capacity(n * stride);
        for row in rows {
            debug_assert_eq!(row.len(), stride);
            bits.extend(row);
        }
        Self { n, stride, bits }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Adds the undirected edge `{i, j}`; self-loops are ignored.
    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.bits[i * self.stride + j / 64] |= 1 << (j % 64);
        self.bits[j * self.stride + i / 64] |= 1 << (i % 64);
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.stride + j / 64] & (1 << (j % 64)) != 0
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.stride..(i + 1) * self.stride]
    }

    pub fn neighbors(&self, i: usize) -> BitSet {
        BitSet::from_words(self.row(i).to_vec())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    pub fn is_clique(&self, members: &[usize]) -> bool {
        members
            .iter()
            .enumerate()
            .all(|(a, &i)| members[a + 1..].iter().all(|&j| i != j && self.has_edge(i, j)))
    }

    fn permuted(&self, order: &[usize]) -> Self {
        let mut position = vec![0; self.n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut out = Self::new(self.n);
        for (new_i, &old_i) in order.iter().enumerate() {
            for old_j in BitSet::from_words(self.row(old_i).to_vec()).iter() {
                let new_j = position[old_j];
                out.bits[new_i * out.stride + new_j / 64] |= 1 << (new_j % 64);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueResult {
    /// Ascending vertex indices.
    pub members: Vec<usize>,
    pub size: usize,
    /// True when the search ran to completion within its budget.
    pub certified_exact: bool,
}

impl CliqueResult {
    fn new(mut members: Vec<usize>, certified_exact: bool) -> Self {
        members.sort_unstable();
        Self {
            size: members.len(),
            members,
            certified_exact,
        }
    }
}

/// Search limits. Exhausting either returns the best clique found so far
/// with `certified_exact = false`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn time(d: Duration) -> Self {
        Self {
            time: Some(d),
            nodes: None,
        }
    }

    pub fn nodes(n: u64) -> Self {
        Self {
            time: None,
            nodes: Some(n),
        }
    }
}

/// Core number of every vertex and the smallest-last removal order.
pub fn degeneracy_order(g: &AdjacencyMatrix) -> (Vec<usize>, Vec<usize>) {
    // Linear-time bucket decomposition over a degree-sorted vertex array.
    let n = g.vertex_count();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i).iter().collect()).collect();
    let mut degree: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);
    let mut bin = vec![0usize; max_degree + 2];
    for &d in &degree {
        bin[d + 1] += 1;
    }
    for d in 1..bin.len() {
        bin[d] += bin[d - 1];
    }
    let mut vert = vec![0; n];
    let mut pos = vec![0; n];
    let mut fill = bin.clone();
    for v in 0..n {
        pos[v] = fill[degree[v]];
        vert[pos[v]] = v;
        fill[degree[v]] += 1;
    }
    for i in 0..n {
        let v = vert[i];
        for &u in &neighbors[v] {
            if degree[u] > degree[v] {
                let du = degree[u];
                let (pu, pw) = (pos[u], bin[du]);
                let w = vert[pw];
                if u != w {
                    vert.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    (degree, vert)
}

/// Deterministic greedy clique: several high-core seeds, each grown by
/// repeatedly adding the candidate with most neighbours among the remaining
/// candidates. Always a valid clique; not necessarily maximum.
pub fn greedy_clique_lower_bound(g: &AdjacencyMatrix) -> CliqueResult {
    let (core, _) = degeneracy_order(g);
    greedy_with_cores(g, &core)
}

const GREEDY_SEEDS: usize = 64;

fn greedy_with_cores(g: &AdjacencyMatrix, core: &[usize]) -> CliqueResult {
    let n = g.vertex_count();
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (std::cmp::Reverse(core[v]), std::cmp::Reverse(g.degree(v)), v));
    let mut best: Vec<usize> = Vec::new();
    for &seed in seeds.iter().take(GREEDY_SEEDS) {
        if core[seed] < best.len() {
            break;
        }
        let mut clique = vec![seed];
        let mut cand = g.neighbors(seed);
        while !cand.is_empty() {
            let pick = cand
                .iter()
                .map(|u| {
                    let common: usize = g
                        .row(u)
                        .iter()
                        .zip(cand.words())
                        .map(|(a, b)| (a & b).count_ones() as usize)
                        .sum();
                    (common, u)
                })
                .max_by_key(|&(common, u)| (common, std::cmp::Reverse(u)))
                .map(|(_, u)| u)
                .expect("nonempty");
            clique.push(pick);
            cand.intersect_with(g.row(pick));
        }
        clique.sort_unstable();
        if clique.len() > best.len() || (clique.len() == best.len() && clique < best) {
            best = clique;
        }
    }
    CliqueResult::new(best, true)
}

struct Limits {
    start: Instant,
    budget: Budget,
    nodes: AtomicU64,
    exhausted: AtomicBool,
}

impl Limits {
    fn new(budget: Budget) -> Self {
        Self {
            start: Instant::now(),
            budget,
            nodes: AtomicU64::new(0),
            exhausted: AtomicBool::new(false),
        }
    }

    /// Counts one search node; returns false once the budget is spent.
    fn tick(&self) -> bool {
        if self.exhausted.load(Ordering::Relaxed) {
            return false;
        }
        let count = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        let over_nodes = self.budget.nodes.is_some_and(|max| count > max);
        let over_time = count.is_multiple_of(256)
            && self
                .budget
                .time
                .is_some_and(|limit| self.start.elapsed() > limit);
        if over_nodes || over_time {
            self.exhausted.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }

    fn exhausted(&self) -> bool {
        self.exhausted.load(Ordering::Relaxed)
    }
}

/// Greedy colouring of `p` restricted to words `lo..`: returns vertices in
/// colour order with the colour (1-based) of each.
fn color_sort(g: &AdjacencyMatrix, p: &BitSet, lo: usize) -> (Vec<usize>, Vec<usize>) {
    let mut uncolored = p.clone();
    let mut order = Vec::new();
    let mut colors = Vec::new();
    let mut color = 0;
    let mut q = p.clone();
    while !uncolored.is_empty() {
        color += 1;
        q.words[lo..].copy_from_slice(&uncolored.words[lo..]);
        let mut from = lo;
        while let Some(v) = first_in(&q.words, from) {
            from = v / 64;
            q.remove(v);
            uncolored.remove(v);
            for (a, b) in q.words[from..].iter_mut().zip(&g.row(v)[from..]) {
                *a &= !b;
            }
            order.push(v);
            colors.push(color);
        }
    }
    (order, colors)
}

/// Upper bound on the clique number of `p` from a greedy colouring.
fn color_bound(g: &AdjacencyMatrix, p: &BitSet, lo: usize) -> usize {
    let mut uncolored = p.clone();
    let mut q = p.clone();
    let mut color = 0;
    while !uncolored.is_empty() {
        color += 1;
        q.words[lo..].copy_from_slice(&uncolored.words[lo..]);
        let mut from = lo;
        while let Some(v) = first_in(&q.words, from) {
            from = v / 64;
            q.remove(v);
            uncolored.remove(v);
            for (a, b) in q.words[from..].iter_mut().zip(&g.row(v)[from..]) {
                *a &= !b;
            }
        }
    }
    color
}

struct Incumbent {
    size: AtomicUsize,
    members: Mutex<Vec<usize>>,
}

impl Incumbent {
    fn offer(&self, clique: &[usize]) {
        let mut guard = self.members.lock().expect("incumbent lock");
        if clique.len() > guard.len() {
            *guard = clique.to_vec();
            self.size.store(clique.len(), Ordering::Relaxed);
        }
    }
}

fn expand(
    g: &AdjacencyMatrix,
    clique: &mut Vec<usize>,
    mut p: BitSet,
    lo: usize,
    best: &Incumbent,
    limits: &Limits,
) {
    if !limits.tick() {
        return;
    }
    let (order, colors) = color_sort(g, &p, lo);
    for idx in (0..order.len()).rev() {
        if clique.len() + colors[idx] <= best.size.load(Ordering::Relaxed) || limits.exhausted() {
            return;
        }
        let v = order[idx];
        clique.push(v);
        let mut next = p.clone();
        next.intersect_with(g.row(v));
        if next.is_empty() {
            if clique.len() > best.size.load(Ordering::Relaxed) {
                best.offer(clique);
            }
        } else {
            expand(g, clique, next, lo, best, limits);
        }
        clique.pop();
        p.remove(v);
    }
}

/// Finds the largest clique size, starting from `incumbent`.
fn search_size(
    g: &AdjacencyMatrix,
    core: &[usize],
    order: &[usize],
    incumbent: &[usize],
    limits: &Limits,
    parallel: bool,
) -> Vec<usize> {
    let n = g.vertex_count();
    let relabeled = g.permuted(order);
    let core_new: Vec<usize> = order.iter().map(|&v| core[v]).collect();
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let best = Incumbent {
        size: AtomicUsize::new(incumbent.len()),
        members: Mutex::new(incumbent.iter().map(|&v| position[v]).collect()),
    };

    let root = |v: usize| {
        let floor = best.size.load(Ordering::Relaxed);
        if core_new[v] < floor || limits.exhausted() {
            return;
        }
        let mut p = relabeled.neighbors(v);
        p.clear_through(v);
        let lo = (v + 1) / 64;
        for u in BitSet::from_words(p.words.clone()).iter() {
            if core_new[u] < floor {
                p.remove(u);
            }
        }
        if p.len() < floor {
            return;
        }
        if p.is_empty() {
            best.offer(&[v]);
            return;
        }
        let mut clique = vec![v];
        expand(&relabeled, &mut clique, p, lo, &best, limits);
    };

    if parallel {
        (0..n).into_par_iter().rev().for_each(root);
    } else {
        (0..n).rev().for_each(root);
    }
    let members = best.members.into_inner().expect("incumbent lock");
    members.into_iter().map(|v| order[v]).collect()
}

fn lex_extend(
    g: &AdjacencyMatrix,
    clique: &mut Vec<usize>,
    p: &BitSet,
    target: usize,
    limits: &Limits,
) -> bool {
    if clique.len() == target {
        return true;
    }
    if !limits.tick() {
        return false;
    }
    let lo = clique.last().map_or(0, |&v| (v + 1) / 64);
    let mut remaining = p.len();
    if clique.len() + remaining < target || clique.len() + color_bound(g, p, lo) < target {
        return false;
    }
    for u in p.iter() {
        if clique.len() + remaining < target {
            return false;
        }
        remaining -= 1;
        let mut next = p.clone();
        next.intersect_with(g.row(u));
        next.clear_through(u);
        clique.push(u);
        if lex_extend(g, clique, &next, target, limits) {
            return true;
        }
        clique.pop();
        if limits.exhausted() {
            return false;
        }
    }
    false
}

/// Lexicographically smallest clique of exactly `target` vertices.
fn lex_smallest(
    g: &AdjacencyMatrix,
    core: &[usize],
    target: usize,
    limits: &Limits,
) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    if target == 0 {
        return Some(Vec::new());
    }
    let mut eligible = BitSet::new(n);
    for v in 0..n {
        if core[v] + 1 >= target {
            eligible.insert(v);
        }
    }
    for v in eligible.iter() {
        let mut p = g.neighbors(v);
        p.intersect_with(eligible.words());
        p.clear_through(v);
        let mut clique = vec![v];
        if lex_extend(g, &mut clique, &p, target, limits) {
            return Some(clique);
        }
        if limits.exhausted() {
            return None;
        }
    }
    None
}

/// Configurable exact solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxCliqueSolver {
    pub budget: Budget,
    pub parallel: bool,
}

impl MaxCliqueSolver {
    pub fn solve(&self, g: &AdjacencyMatrix) -> CliqueResult {
        let n = g.vertex_count();
        if n == 0 {
            return CliqueResult::new(Vec::new(), true);
        }
        let limits = Limits::new(self.budget);
        let (core, order) = degeneracy_order(g);
        let greedy = greedy_with_cores(g, &core);
        let largest = search_size(g, &core, &order, &greedy.members, &limits, self.parallel);
        if limits.exhausted() {
            return CliqueResult::new(largest, false);
        }
        match lex_smallest(g, &core, largest.len(), &limits) {
            Some(members) => CliqueResult::new(members, true),
            None => CliqueResult::new(largest, false),
        }
    }
}

/// Maximum clique with the default (parallel) solver.
///
/// Among several maximum cliques the lexicographically smallest sorted
/// member list is returned.
pub fn max_clique(g: &AdjacencyMatrix, budget: Budget) -> CliqueResult {
    MaxCliqueSolver {
        budget,
        parallel: true,
    }
    .solve(g)
}
