//! Average inter-sample time metrics: the smallest average over the runs of
//! a traffic model, the cycles attaining it, and the best average a
//! scheduler can guarantee by sampling early.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DVector;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::{region_of, TrafficModel};
use crate::error::{Error, Result};
use crate::lti::PetcLoop;
use crate::sim::random_unit_vector;

pub type Rational = Ratio<i64>;

/// Directed graph with integer edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    nodes: usize,
    edges: Vec<(usize, usize, i64)>,
}

impl WeightedGraph {
    /// Every node needs an outgoing edge.
    pub fn new(nodes: usize, edges: Vec<(usize, usize, i64)>) -> Result<Self> {
        let g = Self::partial(nodes, edges)?;
        let mut out = vec![false; nodes];
        for &(u, _, _) in &g.edges {
            out[u] = true;
        }
        if let Some(v) = out.iter().position(|o| !o) {
            return Err(Error::MalformedModel(format!("node {v} has no outgoing edge")));
        }
        Ok(g)
    }

    /// Dead ends allowed.
    fn partial(nodes: usize, edges: Vec<(usize, usize, i64)>) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::MalformedModel("empty graph".into()));
        }
        if edges.iter().any(|&(u, v, _)| u >= nodes || v >= nodes) {
            return Err(Error::MalformedModel("edge endpoint out of range".into()));
        }
        Ok(Self { nodes, edges })
    }

    /// Natural transitions of `model`, weighted by inter-sample time.
    pub fn from_model(model: &TrafficModel) -> Result<Self> {
        let edges = model
            .edges()
            .iter()
            .filter(|e| e.k == model.output(e.from))
            .map(|e| (e.from, e.to, e.k as i64))
            .collect();
        Self::new(model.len(), edges)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, i64)] {
        &self.edges
    }

    pub fn scaled(&self, c: i64) -> Self {
        Self {
            nodes: self.nodes,
            edges: self.edges.iter().map(|&(u, v, w)| (u, v, w * c)).collect(),
        }
    }
}

/// Karp's minimum cycle mean over the whole graph; `None` if acyclic.
pub fn min_cycle_mean(g: &WeightedGraph) -> Option<Rational> {
    let n = g.nodes;
    // d[k][v]: lightest walk with exactly k edges ending in v, from anywhere.
    let mut d = vec![vec![None::<i64>; n]; n + 1];
    d[0] = vec![Some(0); n];
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k);
        let (prev, cur) = (&prev[k - 1], &mut cur[0]);
        for &(u, v, w) in &g.edges {
            if let Some(du) = prev[u] {
                let c = du + w;
                if cur[v].is_none_or(|x| c < x) {
                    cur[v] = Some(c);
                }
            }
        }
    }
    let mut best: Option<Rational> = None;
    for v in 0..n {
        let Some(dn) = d[n][v] else { continue };
        let worst = (0..n)
            .filter_map(|k| d[k][v].map(|dk| Rational::new(dn - dk, (n - k) as i64)))
            .max()?;
        if best.is_none_or(|b| worst < b) {
            best = Some(worst);
        }
    }
    best
}

/// Smallest average inter-sample time of the natural runs of `model`, in
/// multiples of `h`.
pub fn saist(model: &TrafficModel) -> Result<Rational> {
    let g = WeightedGraph::from_model(model)?;
    min_cycle_mean(&g).ok_or_else(|| Error::MalformedModel("no cycles".into()))
}

/// A simple cycle: its nodes in order and the weights of the edges leaving
/// each of them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cycle {
    pub nodes: Vec<usize>,
    pub weights: Vec<i64>,
}

impl Cycle {
    pub fn mean(&self) -> Rational {
        Rational::new(self.weights.iter().sum(), self.weights.len() as i64)
    }

    /// Rotation whose weight sequence is lexicographically largest.
    pub fn canonical(&self) -> Cycle {
        let n = self.nodes.len();
        let best = (0..n)
            .max_by(|&a, &b| {
                let ra = (0..n).map(|i| (self.weights[(a + i) % n], self.nodes[(a + i) % n]));
                let rb = (0..n).map(|i| (self.weights[(b + i) % n], self.nodes[(b + i) % n]));
                ra.cmp(rb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        Cycle {
            nodes: (0..n).map(|i| self.nodes[(best + i) % n]).collect(),
            weights: (0..n).map(|i| self.weights[(best + i) % n]).collect(),
        }
    }
}

/// Cycles enumerated beyond this count are dropped with a warning.
pub const MAX_REPORTED_CYCLES: usize = 10_000;

/// All simple cycles of mean `min_cycle_mean(g)`, canonically rotated.
pub fn min_mean_cycles_of(g: &WeightedGraph) -> Option<(Rational, Vec<Cycle>)> {
    let lambda = min_cycle_mean(g)?;
    let (p, q) = (*lambda.numer(), *lambda.denom());
    // With w' = q w - p no cycle is negative and optimal ones are zero, so
    // exactly their edges are tight for shortest-path potentials.
    let n = g.nodes;
    let mut pot = vec![0i64; n];
    for _ in 0..=n {
        let mut changed = false;
        for &(u, v, w) in &g.edges {
            let c = pot[u] + q * w - p;
            if c < pot[v] {
                pot[v] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut tight: BTreeMap<(usize, usize), BTreeSet<i64>> = BTreeMap::new();
    for &(u, v, w) in &g.edges {
        if pot[u] + q * w - p == pot[v] {
            tight.entry((u, v)).or_default().insert(w);
        }
    }
    let adj: Vec<Vec<usize>> = {
        let mut a = vec![Vec::new(); n];
        for &(u, v) in tight.keys() {
            a[u].push(v);
        }
        a
    };
    let mut cycles = BTreeSet::new();
    'outer: for nodes in simple_cycles(&adj) {
        let mut combos: Vec<Vec<i64>> = vec![vec![]];
        for i in 0..nodes.len() {
            let ws = &tight[&(nodes[i], nodes[(i + 1) % nodes.len()])];
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    ws.iter().map(move |&w| {
                        let mut c = c.clone();
                        c.push(w);
                        c
                    })
                })
                .collect();
        }
        for weights in combos {
            let c = Cycle {
                nodes: nodes.clone(),
                weights,
            };
            if c.mean() == lambda {
                cycles.insert(c.canonical());
                if cycles.len() >= MAX_REPORTED_CYCLES {
                    log::warn!("stopped after {MAX_REPORTED_CYCLES} optimal cycles");
                    break 'outer;
                }
            }
        }
    }
    Some((lambda, cycles.into_iter().collect()))
}

/// Smallest-average cycles of the natural runs of `model`.
pub fn min_mean_cycles(model: &TrafficModel) -> Result<Vec<Cycle>> {
    let g = WeightedGraph::from_model(model)?;
    Ok(min_mean_cycles_of(&g)
        .ok_or_else(|| Error::MalformedModel("no cycles".into()))?
        .1)
}

/// Johnson's algorithm; each cycle starts at its smallest node.
fn simple_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut out = Vec::new();
    for s in 0..n {
        // Restrict to the strongly connected component of s in nodes >= s.
        let mut g = DiGraph::<(), ()>::new();
        let idx: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
        for u in s..n {
            for &v in &adj[u] {
                if v >= s {
                    g.add_edge(idx[u], idx[v], ());
                }
            }
        }
        let comp = tarjan_scc(&g)
            .into_iter()
            .find(|c| c.contains(&idx[s]))
            .unwrap_or_default();
        let in_comp: Vec<bool> = {
            let mut m = vec![false; n];
            for c in comp {
                m[c.index()] = true;
            }
            m
        };
        if !adj[s].iter().any(|&v| in_comp[v]) {
            continue;
        }
        let mut blocked = vec![false; n];
        let mut bsets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut stack = vec![s];
        // Iterative circuit search: (node, next neighbour position, found).
        let mut frames: Vec<(usize, usize, bool)> = vec![(s, 0, false)];
        blocked[s] = true;
        while let Some(&mut (v, ref mut pos, ref mut found)) = frames.last_mut() {
            let nbrs = &adj[v];
            if *pos < nbrs.len() {
                let w = nbrs[*pos];
                *pos += 1;
                if !in_comp[w] {
                    continue;
                }
                if w == s {
                    out.push(stack.clone());
                    *found = true;
                } else if !blocked[w] {
                    blocked[w] = true;
                    stack.push(w);
                    frames.push((w, 0, false));
                }
                continue;
            }
            let f = *found;
            frames.pop();
            if f {
                unblock(v, &mut blocked, &mut bsets);
            } else {
                for &w in nbrs {
                    if in_comp[w] {
                        bsets[w].insert(v);
                    }
                }
            }
            stack.pop();
            if let Some(parent) = frames.last_mut() {
                parent.2 |= f;
            }
        }
    }
    out
}

fn unblock(u: usize, blocked: &mut [bool], bsets: &mut [BTreeSet<usize>]) {
    let mut work = vec![u];
    while let Some(x) = work.pop() {
        if blocked[x] {
            blocked[x] = false;
            work.extend(std::mem::take(&mut bsets[x]));
        }
    }
}

/// Per-node minimum (or maximum) cycle mean reachable from each node, for a
/// graph in which every node has a successor.
fn reachable_cycle_means(g: &WeightedGraph, maximize: bool) -> Vec<Rational> {
    let sign = if maximize { -1 } else { 1 };
    let mut pg = DiGraph::<(), i64>::new();
    let idx: Vec<NodeIndex> = (0..g.nodes).map(|_| pg.add_node(())).collect();
    for &(u, v, w) in &g.edges {
        pg.add_edge(idx[u], idx[v], sign * w);
    }
    // Tarjan returns components in reverse topological order.
    let sccs = tarjan_scc(&pg);
    let mut comp_of = vec![0usize; g.nodes];
    for (c, nodes) in sccs.iter().enumerate() {
        for n in nodes {
            comp_of[n.index()] = c;
        }
    }
    let mut val: Vec<Option<Rational>> = vec![None; sccs.len()];
    for (c, nodes) in sccs.iter().enumerate() {
        let local: BTreeMap<usize, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.index(), i)).collect();
        let mut inner = Vec::new();
        let mut best: Option<Rational> = None;
        for &(u, v, w) in &g.edges {
            let (cu, cv) = (comp_of[u], comp_of[v]);
            if cu != c {
                continue;
            }
            if cv == c {
                inner.push((local[&u], local[&v], sign * w));
            } else if let Some(x) = val[cv] {
                best = Some(best.map_or(x, |b: Rational| b.min(x)));
            }
        }
        if !inner.is_empty() {
            if let Some(m) = min_cycle_mean(&WeightedGraph::partial(nodes.len(), inner).unwrap()) {
                best = Some(best.map_or(m, |b| b.min(m)));
            }
        }
        val[c] = best;
    }
    (0..g.nodes)
        .map(|v| {
            let x = val[comp_of[v]].expect("total graphs reach a cycle");
            x * Rational::from_integer(sign)
        })
        .collect()
}

/// Controller picks `k` in a region, the adversary picks the successor;
/// each round pays `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeanPayoffGame {
    /// `choices[r]`: available `(k, successors)` for controller node `r`.
    choices: Vec<Vec<(u32, Vec<usize>)>>,
}

impl MeanPayoffGame {
    pub fn new(choices: Vec<Vec<(u32, Vec<usize>)>>) -> Result<Self> {
        let n = choices.len();
        if n == 0 {
            return Err(Error::MalformedModel("empty game".into()));
        }
        for (r, cs) in choices.iter().enumerate() {
            if cs.is_empty() || cs.iter().any(|(_, s)| s.is_empty()) {
                return Err(Error::MalformedModel(format!("node {r} has a dead end")));
            }
            if cs.iter().flat_map(|(_, s)| s).any(|&t| t >= n) {
                return Err(Error::MalformedModel("successor out of range".into()));
            }
        }
        Ok(Self { choices })
    }

    /// Arena of `model`: every `k <= output(r)` with at least one edge.
    pub fn from_model(model: &TrafficModel) -> Result<Self> {
        let choices = (0..model.len())
            .map(|r| {
                (1..=model.output(r))
                    .map(|k| (k, model.successors(r, k).collect::<Vec<_>>()))
                    .filter(|(_, s)| !s.is_empty())
                    .collect()
            })
            .collect();
        Self::new(choices)
    }

    pub fn nodes(&self) -> usize {
        self.choices.len()
    }

    pub fn choices(&self, r: usize) -> &[(u32, Vec<usize>)] {
        &self.choices[r]
    }

    /// Guaranteed average per node when the controller plays `sigma`
    /// (an index into `choices` per node).
    pub fn evaluate_controller(&self, sigma: &[usize]) -> Vec<Rational> {
        let mut edges = Vec::new();
        for (r, &c) in sigma.iter().enumerate() {
            let (k, succ) = &self.choices[r][c];
            edges.extend(succ.iter().map(|&t| (r, t, *k as i64)));
        }
        reachable_cycle_means(&WeightedGraph::partial(self.nodes(), edges).unwrap(), false)
    }

    /// Best average per node against an adversary playing `tau`
    /// (a successor per node and choice).
    pub fn evaluate_adversary(&self, tau: &[Vec<usize>]) -> Vec<Rational> {
        let mut edges = Vec::new();
        for (r, cs) in self.choices.iter().enumerate() {
            for (c, (k, _)) in cs.iter().enumerate() {
                edges.push((r, tau[r][c], *k as i64));
            }
        }
        reachable_cycle_means(&WeightedGraph::partial(self.nodes(), edges).unwrap(), true)
    }
}

/// Solution of a [`MeanPayoffGame`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPayoffSolution {
    /// Worst value over all start nodes.
    pub value: Rational,
    pub node_values: Vec<Rational>,
    /// Chosen `k` per controller node.
    pub strategy: Vec<u32>,
    /// Whether `value` was confirmed by matching strategy evaluations.
    /// Node values are always guaranteed by `strategy`; they are exact when
    /// every node was certified, otherwise only `value` is.
    pub certified: bool,
}

/// Optimal positional controller strategy by value iteration. Plain and
/// self-loop averaged iterations run side by side; after each batch the
/// greedy strategies of both players are evaluated exactly, and once the
/// controller's guaranteed value meets the value the adversary concedes,
/// the controller strategy is optimal.
pub fn mean_payoff_strategy(game: &MeanPayoffGame) -> Result<MeanPayoffSolution> {
    mean_payoff_strategy_capped(game, MAX_GAME_ROUNDS)
}

/// Upper limit on value-iteration rounds in [`mean_payoff_strategy`].
pub const MAX_GAME_ROUNDS: u128 = 1 << 18;

/// [`mean_payoff_strategy`] with an explicit round limit. If the limit is
/// hit before certification, the result carries the values guaranteed by the
/// last greedy controller strategy and `certified == false`.
pub fn mean_payoff_strategy_capped(
    game: &MeanPayoffGame,
    max_rounds: u128,
) -> Result<MeanPayoffSolution> {
    let n = game.nodes();
    let wmax = game
        .choices
        .iter()
        .flatten()
        .map(|(k, _)| *k as i64)
        .max()
        .unwrap_or(1);
    // Beyond this many rounds values are determined by rounding alone.
    let bound = 4 * (n as u128).pow(3) * wmax as u128 + 1;
    let limit = bound.min(max_rounds.max(1));
    let mut v = vec![0i64; n];
    let mut next = vec![0i64; n];
    // Averaged with a self-loop, the iteration is aperiodic; its greedy
    // strategies settle where those of the plain iteration can cycle.
    let mut u = vec![0f64; n];
    let mut unext = vec![0f64; n];
    let mut rounds: u128 = 0;
    let mut batch: u128 = n as u128 + 1;
    let mut best_upper: Option<Rational> = None;
    let mut best: Option<(Vec<Rational>, Vec<usize>)> = None;
    loop {
        let target = (rounds + batch).min(limit);
        while rounds < target {
            for r in 0..n {
                let (a, b) = game.choices[r].iter().fold(
                    (i64::MIN, f64::NEG_INFINITY),
                    |(a, b), (k, s)| {
                        let vi = s.iter().map(|&t| v[t]).min().unwrap();
                        let vu = s.iter().map(|&t| u[t]).fold(f64::INFINITY, f64::min);
                        (a.max(*k as i64 + vi), b.max(*k as f64 + vu))
                    },
                );
                next[r] = a;
                unext[r] = 0.5 * (u[r] + b);
            }
            let shift = unext.iter().copied().fold(f64::INFINITY, f64::min);
            unext.iter_mut().for_each(|x| *x -= shift);
            std::mem::swap(&mut v, &mut next);
            std::mem::swap(&mut u, &mut unext);
            rounds += 1;
        }
        let vf: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        for w in [&vf, &u] {
            let (sigma, tau) = greedy(game, w);
            let lower = game.evaluate_controller(&sigma);
            let upper = game.evaluate_adversary(&tau);
            if lower == upper {
                return Ok(solution(game, lower, &sigma, true));
            }
            let up = *upper.iter().min().unwrap();
            best_upper = Some(best_upper.map_or(up, |b| b.min(up)));
            let improves = best.as_ref().is_none_or(|(l, _)| {
                lower.iter().min() > l.iter().min()
                    || (lower.iter().min() == l.iter().min() && lower.iter().zip(l).all(|(a, b)| a >= b))
            });
            if improves {
                best = Some((lower, sigma));
            }
        }
        let (lower, sigma) = best.clone().unwrap();
        // The worst-case value is pinned even if some node values are not.
        if lower.iter().min() == best_upper.as_ref() {
            return Ok(solution(game, lower, &sigma, true));
        }
        if rounds >= bound {
            log::warn!("mean-payoff values not certified; rounding after {rounds} rounds");
            let node_values = (0..n)
                .map(|r| round_to_denominator(Rational::new(v[r], rounds as i64), n as i64))
                .collect();
            return Ok(solution(game, node_values, &sigma, false));
        }
        if rounds >= limit {
            log::warn!("mean-payoff values not certified after {rounds} rounds");
            return Ok(solution(game, lower, &sigma, false));
        }
        batch *= 2;
    }
}

fn greedy(game: &MeanPayoffGame, v: &[f64]) -> (Vec<usize>, Vec<Vec<usize>>) {
    const TOL: f64 = 1e-9;
    let mut sigma = Vec::with_capacity(v.len());
    let mut tau = Vec::with_capacity(v.len());
    for cs in &game.choices {
        let mut best = (f64::NEG_INFINITY, 0);
        let mut per = Vec::with_capacity(cs.len());
        for (c, (k, s)) in cs.iter().enumerate() {
            let mut t = s[0];
            for &x in s {
                if v[x] < v[t] - TOL {
                    t = x;
                }
            }
            per.push(t);
            let val = *k as f64 + v[t];
            // Ties go to the larger k.
            if val >= best.0 - TOL {
                best = (val, c);
            }
        }
        sigma.push(best.1);
        tau.push(per);
    }
    (sigma, tau)
}

fn solution(
    game: &MeanPayoffGame,
    node_values: Vec<Rational>,
    sigma: &[usize],
    certified: bool,
) -> MeanPayoffSolution {
    MeanPayoffSolution {
        value: *node_values.iter().min().unwrap(),
        strategy: sigma
            .iter()
            .enumerate()
            .map(|(r, &c)| game.choices[r][c].0)
            .collect(),
        node_values,
        certified,
    }
}

/// Closest fraction with denominator at most `max_den`.
fn round_to_denominator(x: Rational, max_den: i64) -> Rational {
    (1..=max_den.max(1))
        .map(|q| {
            let p = (x * Rational::from_integer(q)).round();
            Rational::new(p.to_integer(), q)
        })
        .min_by_key(|c| (*c - x).abs())
        .unwrap_or(x)
}

/// Outcome of [`closed_loop_saist_check`], in multiples of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopCheck {
    /// Smallest average over the recurrent part of each run: the samples
    /// between the first and last visit of its most revisited region, which
    /// form a closed walk of the abstraction.
    pub min_recurrent_average: f64,
    /// Smallest plain average over whole runs.
    pub min_run_average: f64,
}

/// Run the loop under the self-triggered `strategy` (a `k` per region of
/// `model`) from `trials` seeded random directions for `horizon` samples.
pub fn closed_loop_saist_check(
    lp: &PetcLoop,
    model: &TrafficModel,
    strategy: &[u32],
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<ClosedLoopCheck> {
    if strategy.len() != model.len() {
        return Err(Error::StrategyCoverage("strategy size differs from the model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_rec = f64::INFINITY;
    let mut min_run = f64::INFINITY;
    for _ in 0..trials {
        let mut x: DVector<f64> = random_unit_vector(lp.dim(), &mut rng);
        let mut regions = Vec::with_capacity(horizon);
        let mut ks = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let label = region_of(lp, &x, model.depth())?;
            let r = model
                .index_of(&label)
                .ok_or_else(|| Error::StrategyCoverage(label.to_string()))?;
            let k = strategy[r];
            regions.push(r);
            ks.push(k);
            x = lp.matrices().hold(k) * &x;
            x /= x.norm();
        }
        if ks.is_empty() {
            continue;
        }
        let total: u64 = ks.iter().map(|&k| k as u64).sum();
        min_run = min_run.min(total as f64 / ks.len() as f64);
        // Longest span between two visits of one region.
        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
        let mut span = None::<(usize, usize)>;
        for (i, &r) in regions.iter().enumerate() {
            let f = *first.entry(r).or_insert(i);
            if i > f && span.is_none_or(|(a, b)| i - f > b - a) {
                span = Some((f, i));
            }
        }
        if let Some((a, b)) = span {
            let s: u64 = ks[a..b].iter().map(|&k| k as u64).sum();
            min_rec = min_rec.min(s as f64 / (b - a) as f64);
        }
    }
    Ok(ClosedLoopCheck {
        min_recurrent_average: min_rec,
        min_run_average: min_run,
    })
}

/// Analysis results for the text report.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub h: f64,
    pub saist: Option<Rational>,
    pub cycles: Vec<Cycle>,
    pub optimized: Option<MeanPayoffSolution>,
}

/// Run the requested analyses on `model`.
pub fn analyze(model: &TrafficModel, want_saist: bool, optimize: bool) -> Result<Analysis> {
    let (saist, cycles) = if want_saist {
        let g = WeightedGraph::from_model(model)?;
        let (v, c) =
            min_mean_cycles_of(&g).ok_or_else(|| Error::MalformedModel("no cycles".into()))?;
        (Some(v), c)
    } else {
        (None, Vec::new())
    };
    let optimized = if optimize {
        Some(mean_payoff_strategy(&MeanPayoffGame::from_model(model)?)?)
    } else {
        None
    };
    Ok(Analysis {
        h: model.h(),
        saist,
        cycles,
        optimized,
    })
}

fn as_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Plain-text report; values are in multiples of `h`.
pub fn report(a: &Analysis) -> String {
    let mut out = String::new();
    if let Some(s) = a.saist {
        let _ = writeln!(out, "SAIST is {:?}", as_f64(s));
        let tuples: BTreeSet<String> = a
            .cycles
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.weights.iter().map(|w| w.to_string()).collect();
                if inner.len() == 1 {
                    format!("({},)", inner[0])
                } else {
                    format!("({})", inner.join(", "))
                }
            })
            .collect();
        let _ = writeln!(
            out,
            "Smallest average cycles: {{{}}}",
            tuples.into_iter().collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(out, "SAIST (exact) is {s} ({:?} s)", as_f64(s) * a.h);
    }
    if let Some(o) = &a.optimized {
        let _ = writeln!(out, "Optimized SAIST is {:?}", as_f64(o.value));
        let _ = writeln!(
            out,
            "Optimized SAIST (exact) is {} ({:?} s){}",
            o.value,
            as_f64(o.value) * a.h,
            if o.certified { "" } else { ", not certified" }
        );
    }
    out
}

/// `region,etc_k,strategy_k` rows.
pub fn strategy_csv(model: &TrafficModel, strategy: Option<&[u32]>) -> String {
    let mut out = String::from("region,etc_k,strategy_k\n");
    for (r, label) in model.regions().iter().enumerate() {
        let s = strategy.map_or(String::new(), |s| s[r].to_string());
        let _ = writeln!(out, "\"{label}\",{},{s}", model.output(r));
    }
    out
}
