//! Densest consistent subset of correspondences.
//!
//! The combinatorial problem is
//!
//! ```text
//! maximize   uᵀMu / uᵀu      over u ∈ {0,1}^m
//! subject to uᵢuⱼ = 0        whenever M(i,j) = 0
//! ```
//!
//! [`solve_densest`] relaxes it to the nonnegative unit sphere and enforces
//! the zero constraints with a penalty `d·uᵀC̄u` (C̄ = complement of the
//! constraint graph) whose weight grows geometrically. Each penalty stage is
//! solved by projected gradient ascent with backtracking; the final iterate is
//! rounded greedily. [`brute_force_densest`] enumerates every feasible subset
//! and serves as the reference for small problems.

use alloc::vec::Vec;

use crate::consistency::AffinityMatrix;
use crate::error::{Error, Result};

/// Largest problem accepted by [`brute_force_densest`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Weights at or below this are treated as structural zeros by the relaxation.
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    /// Walk `u` in descending order, add every index compatible with the set
    /// so far, stop at the first compatible index that would lower density.
    GreedyDensity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Inner loop stops once `‖u_{k+1} − u_k‖` drops below this.
    pub tolerance: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub power_iterations: usize,
    pub rounding: Rounding,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_outer_iterations: 60,
            max_inner_iterations: 200,
            tolerance: 1e-9,
            initial_penalty: 1e-2,
            penalty_growth: 2.0,
            power_iterations: 100,
            rounding: Rounding::GreedyDensity,
        }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.tolerance) || !positive(self.initial_penalty) {
            return Err(Error::InvalidParameter("solver tolerances must be positive"));
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth > 1.0) {
            return Err(Error::InvalidParameter("penalty growth must exceed one"));
        }
        if self.max_inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// A chosen set of candidate indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Selected indices, ascending.
    pub indices: Vec<usize>,
    /// Final continuous iterate (empty for the brute-force oracle).
    pub u: Vec<f64>,
    /// `1ᵀ_S M 1_S / |S|`, zero for an empty selection.
    pub objective: f64,
}

impl Selection {
    fn empty() -> Self {
        Self {
            indices: Vec::new(),
            u: Vec::new(),
            objective: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sparse view of the positive off-diagonal entries of an affinity matrix.
/// Two indices may be selected together iff they are adjacent here.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

/// Binarizes `M`: an edge exists wherever `M(i, j) > 0`.
pub fn binarize_constraints(m: &AffinityMatrix) -> ConstraintGraph {
    let n = m.size();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for i in 0..n {
        for (j, &w) in m.row(i).iter().enumerate() {
            if j != i && w > 0.0 {
                neighbors.push(j);
                weights.push(w);
            }
        }
        offsets.push(neighbors.len());
    }
    ConstraintGraph {
        offsets,
        neighbors,
        weights,
    }
}

impl ConstraintGraph {
    pub fn size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Neighbors of `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    fn weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// `Mu` (unit diagonal) and `C̄u` (non-adjacent, off-diagonal mass).
    fn products(&self, u: &[f64], mu: &mut [f64], cbu: &mut [f64]) {
        let total: f64 = u.iter().sum();
        for i in 0..self.size() {
            let mut weighted = u[i];
            let mut adjacent = 0.0;
            for (&j, &w) in self.neighbors(i).iter().zip(self.weights(i)) {
                weighted += w * u[j];
                adjacent += u[j];
            }
            mu[i] = weighted;
            cbu[i] = (total - u[i] - adjacent).max(0.0);
        }
    }
}

fn normalize(u: &mut [f64]) -> bool {
    let norm = libm::sqrt(u.iter().map(|x| x * x).sum::<f64>());
    if norm <= 0.0 || !norm.is_finite() {
        return false;
    }
    u.iter_mut().for_each(|x| *x /= norm);
    true
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Relaxation<'a> {
    graph: &'a ConstraintGraph,
    mu: Vec<f64>,
    cbu: Vec<f64>,
}

impl Relaxation<'_> {
    /// Penalized objective `uᵀMu − d·uᵀC̄u`; refreshes the cached products.
    fn objective(&mut self, u: &[f64], penalty: f64) -> f64 {
        self.graph.products(u, &mut self.mu, &mut self.cbu);
        dot(u, &self.mu) - penalty * dot(u, &self.cbu)
    }

    fn ascend(&mut self, u: &mut Vec<f64>, penalty: f64, params: &SolverParams) {
        let n = u.len();
        let mut value = self.objective(u, penalty);
        let mut step = 1.0;
        let mut trial = alloc::vec![0.0; n];
        let mut grad = alloc::vec![0.0; n];
        for _ in 0..params.max_inner_iterations {
            for i in 0..n {
                grad[i] = 2.0 * (self.mu[i] - penalty * self.cbu[i]);
            }
            let mut accepted = None;
            for _ in 0..40 {
                for i in 0..n {
                    trial[i] = (u[i] + step * grad[i]).max(0.0);
                }
                if normalize(&mut trial) {
                    let candidate = self.objective(&trial, penalty);
                    if candidate >= value {
                        accepted = Some(candidate);
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some(next_value) = accepted else {
                // Restore the cached products for `u`.
                self.objective(u, penalty);
                break;
            };
            let change = libm::sqrt(u.iter().zip(&trial).map(|(a, b)| (a - b) * (a - b)).sum());
            core::mem::swap(u, &mut trial);
            value = next_value;
            step = (step * 2.0).min(1e6);
            if change < params.tolerance {
                break;
            }
        }
        self.graph.products(u, &mut self.mu, &mut self.cbu);
    }

    /// Whether the support of `u` is free of constraint violations.
    fn feasible(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(&self.cbu)
            .all(|(&x, &c)| x <= SUPPORT_TOL || c <= SUPPORT_TOL)
    }
}

/// Normalized principal eigenvector estimate of `M` from the all-ones start.
fn power_iteration(graph: &ConstraintGraph, steps: usize) -> Vec<f64> {
    let n = graph.size();
    let mut u = alloc::vec![1.0; n];
    normalize(&mut u);
    let mut mu = alloc::vec![0.0; n];
    let mut cbu = alloc::vec![0.0; n];
    for _ in 0..steps {
        graph.products(&u, &mut mu, &mut cbu);
        if !normalize(&mut mu) {
            break;
        }
        core::mem::swap(&mut u, &mut mu);
    }
    u
}

/// Density `1ᵀ_S M 1_S / |S|` of an index set.
pub fn density(m: &AffinityMatrix, indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let total: f64 = indices
        .iter()
        .map(|&i| indices.iter().map(|&j| m.get(i, j)).sum::<f64>())
        .sum();
    total / indices.len() as f64
}

fn round_greedy(m: &AffinityMatrix, graph: &ConstraintGraph, u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::new();
    // Sum of M over ordered off-diagonal pairs inside `chosen`.
    let mut mass = 0.0;
    for &v in &order {
        if !chosen.iter().all(|&s| graph.has_edge(v, s)) {
            continue;
        }
        let link: f64 = chosen.iter().map(|&s| m.get(v, s)).sum();
        let k = chosen.len() as f64;
        let before = if chosen.is_empty() { 0.0 } else { 1.0 + mass / k };
        let after = 1.0 + (mass + 2.0 * link) / (k + 1.0);
        if after <= before + 1e-12 * before {
            break;
        }
        chosen.push(v);
        mass += 2.0 * link;
    }
    chosen.sort_unstable();
    chosen
}

/// Approximately solves the densest consistent subset problem.
///
/// The result always respects the hard constraints and is deterministic for a
/// given matrix and parameter set.
pub fn solve_densest(m: &AffinityMatrix, params: &SolverParams) -> Result<Selection> {
    params.validate()?;
    if m.is_empty() {
        return Ok(Selection::empty());
    }
    let graph = binarize_constraints(m);
    let n = graph.size();
    let mut u = power_iteration(&graph, params.power_iterations);
    let mut relax = Relaxation {
        graph: &graph,
        mu: alloc::vec![0.0; n],
        cbu: alloc::vec![0.0; n],
    };
    let mut penalty = params.initial_penalty;
    for _ in 0..params.max_outer_iterations {
        relax.ascend(&mut u, penalty, params);
        if relax.feasible(&u) {
            break;
        }
        penalty *= params.penalty_growth;
    }
    let indices = match params.rounding {
        Rounding::GreedyDensity => round_greedy(m, &graph, &u),
    };
    let objective = density(m, &indices);
    Ok(Selection {
        indices,
        u,
        objective,
    })
}

/// Exact maximizer by enumerating every feasible subset (`m ≤ 20`). Ties go to
/// the lexicographically smallest index set.
pub fn brute_force_densest(m: &AffinityMatrix) -> Result<Selection> {
    let n = m.size();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok(Selection::empty());
    }
    let adjacency: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && m.get(i, j) > 0.0)
                .fold(0u32, |acc, j| acc | (1 << j))
        })
        .collect();

    struct Search<'a> {
        m: &'a AffinityMatrix,
        adjacency: &'a [u32],
        current: Vec<usize>,
        best: Vec<usize>,
        best_density: f64,
    }

    impl Search<'_> {
        // Depth-first in increasing index order visits sets lexicographically,
        // so a strict improvement test keeps the smallest set among ties.
        fn visit(&mut self, start: usize, allowed: u32, mass: f64) {
            for v in start..self.adjacency.len() {
                if allowed & (1 << v) == 0 {
                    continue;
                }
                let link: f64 = self.current.iter().map(|&s| self.m.get(v, s)).sum();
                let next_mass = mass + 2.0 * link;
                self.current.push(v);
                let k = self.current.len() as f64;
                let d = 1.0 + next_mass / k;
                if d > self.best_density + 1e-12 * self.best_density {
                    self.best_density = d;
                    self.best.clone_from(&self.current);
                }
                self.visit(v + 1, allowed & self.adjacency[v], next_mass);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        m,
        adjacency: &adjacency,
        current: Vec::new(),
        best: Vec::new(),
        best_density: 0.0,
    };
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    search.visit(0, all, 0.0);
    Ok(Selection {
        objective: search.best_density,
        indices: search.best,
        u: Vec::new(),
    })
}
