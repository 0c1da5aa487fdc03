//! Scheduler synthesis as a safety game on the product of wait/trigger
//! systems: avoid every state in which two loops have just sampled.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::abstraction::TrafficModel;
use crate::error::{Error, Result};
use crate::ts::{
    parallel_compose, wait_trigger_transform, JointAction, ProductState, ProductSystem, WtAction,
    WtState,
};

/// States in which at most one loop has just sampled.
#[derive(Debug, Clone, Copy, Default)]
pub struct SafetySpec;

impl SafetySpec {
    pub fn contains(&self, product: &ProductSystem, s: &[u32]) -> bool {
        product.outputs(s).iter().filter(|o| o.is_trigger()).count() <= 1
    }
}

pub fn safe_set(_product: &ProductSystem) -> SafetySpec {
    SafetySpec
}

/// Explored part of a product: every seed and every safe state reachable
/// from the seeds through safe states, with their moves.
#[derive(Debug, Clone)]
pub struct GameGraph {
    states: Vec<ProductState>,
    index: HashMap<ProductState, u32>,
    safe: Vec<bool>,
    /// Enabled actions and their successors; empty for unexpanded states.
    moves: Vec<Vec<(JointAction, Vec<u32>)>>,
    seeds: Vec<u32>,
}

impl GameGraph {
    /// Explore from the product's initial states.
    pub fn reachable(product: &ProductSystem, spec: &SafetySpec) -> Self {
        Self::explore(product, spec, product.initial_states())
    }

    pub fn explore(product: &ProductSystem, spec: &SafetySpec, seeds: Vec<ProductState>) -> Self {
        let mut g = GameGraph {
            states: Vec::new(),
            index: HashMap::new(),
            safe: Vec::new(),
            moves: Vec::new(),
            seeds: Vec::new(),
        };
        let mut queue = VecDeque::new();
        for s in seeds {
            let (id, fresh) = g.intern(product, spec, s);
            if fresh {
                g.seeds.push(id);
                queue.push_back(id);
            }
        }
        let mut expanded = vec![false; g.states.len()];
        while let Some(id) = queue.pop_front() {
            let id = id as usize;
            if expanded.get(id).copied().unwrap_or(false) {
                continue;
            }
            if expanded.len() <= id {
                expanded.resize(id + 1, false);
            }
            expanded[id] = true;
            let s = g.states[id].clone();
            let mut moves = Vec::new();
            for u in product.enabled_actions(&s) {
                let mut succ = Vec::new();
                for t in product.successors(&s, u) {
                    let (tid, fresh) = g.intern(product, spec, t);
                    if fresh && g.safe[tid as usize] {
                        queue.push_back(tid);
                    }
                    succ.push(tid);
                }
                if !succ.is_empty() {
                    moves.push((u, succ));
                }
            }
            g.moves[id] = moves;
        }
        g
    }

    fn intern(&mut self, product: &ProductSystem, spec: &SafetySpec, s: ProductState) -> (u32, bool) {
        if let Some(&id) = self.index.get(&s) {
            return (id, false);
        }
        let id = self.states.len() as u32;
        self.safe.push(spec.contains(product, &s));
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.moves.push(Vec::new());
        (id, true)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, id: usize) -> &ProductState {
        &self.states[id]
    }

    pub fn id(&self, s: &[u32]) -> Option<usize> {
        self.index.get(s).map(|&i| i as usize)
    }

    pub fn is_safe(&self, id: usize) -> bool {
        self.safe[id]
    }

    pub fn moves(&self, id: usize) -> &[(JointAction, Vec<u32>)] {
        &self.moves[id]
    }

    pub fn seeds(&self) -> impl Iterator<Item = usize> + '_ {
        self.seeds.iter().map(|&i| i as usize)
    }
}

/// One application of the safety operator: keep the safe states of `z`
/// having an action whose successors are nonempty and all in `z`.
pub fn apply_operator(game: &GameGraph, z: &[bool]) -> Vec<bool> {
    (0..game.len())
        .map(|s| {
            z[s] && game.safe[s]
                && game.moves[s]
                    .iter()
                    .any(|(_, succ)| succ.iter().all(|&t| z[t as usize]))
        })
        .collect()
}

/// Largest fixed point of [`apply_operator`] over the explored states,
/// as a membership mask. Each removal only touches the predecessors of the
/// removed state.
pub fn safety_fixpoint(game: &GameGraph) -> Vec<bool> {
    let n = game.len();
    let mut z: Vec<bool> = game.safe.clone();
    let mut preds: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    let mut bad: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut good: Vec<u32> = vec![0; n];
    for s in 0..n {
        let mut counts = Vec::with_capacity(game.moves[s].len());
        for (a, (_, succ)) in game.moves[s].iter().enumerate() {
            let c = succ.iter().filter(|&&t| !z[t as usize]).count() as u32;
            if c == 0 {
                good[s] += 1;
            }
            counts.push(c);
            for &t in succ {
                preds[t as usize].push((s as u32, a as u32));
            }
        }
        bad.push(counts);
    }
    let mut queue: Vec<usize> = Vec::new();
    for s in 0..n {
        if z[s] && good[s] == 0 {
            z[s] = false;
            queue.push(s);
        }
    }
    while let Some(t) = queue.pop() {
        for &(p, a) in &preds[t] {
            let (p, a) = (p as usize, a as usize);
            if !z[p] {
                continue;
            }
            bad[p][a] += 1;
            if bad[p][a] == 1 {
                good[p] -= 1;
                if good[p] == 0 {
                    z[p] = false;
                    queue.push(p);
                }
            }
        }
    }
    debug_assert_eq!(apply_operator(game, &z), z);
    z
}

/// Deterministic choice among safe actions.
#[derive(Debug, Clone, Copy, Default)]
pub enum TieBreak {
    /// Per loop prefer `w` over `t`, first loop first.
    #[default]
    LateTrigger,
    /// Per loop prefer `t` over `w`.
    EarlyTrigger,
    Custom(fn(&[JointAction], usize) -> JointAction),
}

/// Safe actions per product state. The domain is the winning set plus any
/// initial state (where loops sample together at start-up) that has a safe
/// action into it.
#[derive(Debug, Clone)]
pub struct SchedulerStrategy {
    product: ProductSystem,
    table: BTreeMap<ProductState, Vec<JointAction>>,
    uncovered_initial: Vec<ProductState>,
}

/// Collect the safe actions of every winning state.
pub fn extract_scheduler(
    product: &ProductSystem,
    game: &GameGraph,
    winning: &[bool],
) -> Result<SchedulerStrategy> {
    if !winning.iter().any(|&w| w) {
        let sample: Vec<String> = game
            .seeds()
            .take(3)
            .map(|s| format!("({})", product.state_names(game.state(s)).join(", ")))
            .collect();
        return Err(Error::Unschedulable(format!(
            "every one of the {} explored states can be forced into a collision, e.g. from {}",
            game.len(),
            sample.join(", ")
        )));
    }
    let safe_actions = |s: usize| -> Vec<JointAction> {
        game.moves(s)
            .iter()
            .filter(|(_, succ)| succ.iter().all(|&t| winning[t as usize]))
            .map(|(u, _)| *u)
            .collect()
    };
    let mut table = BTreeMap::new();
    for s in 0..game.len() {
        if winning[s] {
            table.insert(game.state(s).clone(), safe_actions(s));
        }
    }
    let mut uncovered_initial = Vec::new();
    for s in game.seeds() {
        if winning[s] {
            continue;
        }
        let acts = safe_actions(s);
        if acts.is_empty() {
            uncovered_initial.push(game.state(s).clone());
        } else {
            table.insert(game.state(s).clone(), acts);
        }
    }
    if !uncovered_initial.is_empty() {
        log::warn!(
            "{} initial states cannot be scheduled",
            uncovered_initial.len()
        );
    }
    Ok(SchedulerStrategy {
        product: product.clone(),
        table,
        uncovered_initial,
    })
}

/// Build the wait/trigger product of `models` and solve its safety game.
pub fn synthesize(models: &[TrafficModel]) -> Result<SchedulerStrategy> {
    let systems = models
        .iter()
        .map(wait_trigger_transform)
        .collect::<Result<Vec<_>>>()?;
    let product = parallel_compose(systems)?;
    let spec = safe_set(&product);
    let game = GameGraph::reachable(&product, &spec);
    log::info!("explored {} product states", game.len());
    let winning = safety_fixpoint(&game);
    extract_scheduler(&product, &game, &winning)
}

impl SchedulerStrategy {
    pub fn product(&self) -> &ProductSystem {
        &self.product
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn actions(&self, s: &[u32]) -> Option<&[JointAction]> {
        self.table.get(s).map(|v| v.as_slice())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ProductState, &Vec<JointAction>)> {
        self.table.iter()
    }

    pub fn uncovered_initial(&self) -> &[ProductState] {
        &self.uncovered_initial
    }

    pub fn models(&self) -> Vec<&TrafficModel> {
        self.product.components().iter().map(|c| c.model()).collect()
    }
}

/// Pick one action for `current`.
pub fn step_scheduler(
    strategy: &SchedulerStrategy,
    current: &[u32],
    tie_break: TieBreak,
) -> Result<JointAction> {
    let n = strategy.product.arity();
    let acts = strategy
        .actions(current)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::SchedulingFault {
            step: 0,
            reason: format!(
                "state ({}) is outside the scheduler's domain",
                strategy.product.state_names(current).join(", ")
            ),
        })?;
    Ok(match tie_break {
        TieBreak::LateTrigger => *acts.iter().min_by_key(|a| a.late_key(n)).unwrap(),
        TieBreak::EarlyTrigger => *acts.iter().max_by_key(|a| a.late_key(n)).unwrap(),
        TieBreak::Custom(f) => {
            let a = f(acts, n);
            if !acts.contains(&a) {
                return Err(Error::SchedulingFault {
                    step: 0,
                    reason: "custom tie-break returned an unsafe action".into(),
                });
            }
            a
        }
    })
}

/// Online execution of a strategy, tracking the product state.
#[derive(Debug, Clone)]
pub struct Scheduler<'a> {
    strategy: &'a SchedulerStrategy,
    tie_break: TieBreak,
    current: ProductState,
    step: usize,
}

impl<'a> Scheduler<'a> {
    /// Start with every loop just sampled in the given regions.
    pub fn start(strategy: &'a SchedulerStrategy, regions: &[usize], tie_break: TieBreak) -> Result<Self> {
        let comps = strategy.product.components();
        if regions.len() != comps.len() {
            return Err(Error::Dimension("one region per loop is needed".into()));
        }
        let current = comps
            .iter()
            .zip(regions)
            .map(|(c, &r)| c.index(WtState::Trigger { region: r }).map(|i| i as u32))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::SchedulingFault {
                step: 0,
                reason: "initial region unknown to the traffic model".into(),
            })?;
        Ok(Self {
            strategy,
            tie_break,
            current,
            step: 0,
        })
    }

    pub fn current(&self) -> &ProductState {
        &self.current
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn choose(&self) -> Result<JointAction> {
        step_scheduler(self.strategy, &self.current, self.tie_break).map_err(|e| self.at_step(e))
    }

    fn at_step(&self, e: Error) -> Error {
        match e {
            Error::SchedulingFault { reason, .. } => Error::SchedulingFault {
                step: self.step,
                reason,
            },
            e => e,
        }
    }

    /// Apply `action`; `measured[i]` is the region observed by loop `i` if
    /// it sampled.
    pub fn advance(&mut self, action: JointAction, measured: &[Option<usize>]) -> Result<()> {
        let comps = self.strategy.product.components();
        let mut next = Vec::with_capacity(comps.len());
        for (i, c) in comps.iter().enumerate() {
            let x = self.current[i] as usize;
            let post = c.post(x, action.get(i));
            let t = match action.get(i) {
                WtAction::Wait => post.first().copied(),
                WtAction::Trigger => {
                    let r = measured.get(i).copied().flatten().ok_or_else(|| {
                        Error::SchedulingFault {
                            step: self.step,
                            reason: format!("loop {i} sampled without a measured region"),
                        }
                    })?;
                    let t = c.trigger_state(r);
                    post.contains(&t).then_some(t)
                }
            };
            let t = t.ok_or_else(|| Error::SchedulingFault {
                step: self.step,
                reason: format!(
                    "loop {i} moved from {} to a state the abstraction does not predict",
                    c.state_name(x)
                ),
            })?;
            next.push(t as u32);
        }
        self.step += 1;
        if self.strategy.actions(&next).is_none() {
            return Err(Error::SchedulingFault {
                step: self.step,
                reason: format!(
                    "state ({}) is outside the scheduler's domain",
                    self.strategy.product.state_names(&next).join(", ")
                ),
            });
        }
        self.current = next;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct StrategyEntry {
    state: Vec<String>,
    actions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct StrategyFile {
    loops: Vec<TrafficModel>,
    uncovered_initial: Vec<Vec<String>>,
    entries: Vec<StrategyEntry>,
}

impl Serialize for SchedulerStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.product.arity();
        StrategyFile {
            loops: self.models().into_iter().cloned().collect(),
            uncovered_initial: self
                .uncovered_initial
                .iter()
                .map(|st| self.product.state_names(st))
                .collect(),
            entries: self
                .table
                .iter()
                .map(|(st, acts)| StrategyEntry {
                    state: self.product.state_names(st),
                    actions: acts.iter().map(|a| a.render(n)).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SchedulerStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = StrategyFile::deserialize(d)?;
        let systems = f
            .loops
            .iter()
            .map(wait_trigger_transform)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let product = parallel_compose(systems).map_err(D::Error::custom)?;
        let n = product.arity();
        let state = |names: &[String]| {
            product
                .state_by_names(names)
                .ok_or_else(|| D::Error::custom(format!("unknown state ({})", names.join(", "))))
        };
        let mut table = BTreeMap::new();
        for e in &f.entries {
            let s = state(&e.state)?;
            let enabled = product.enabled_actions(&s);
            let acts = e
                .actions
                .iter()
                .map(|a| {
                    JointAction::parse(a)
                        .filter(|u| a.len() == n && enabled.contains(u))
                        .ok_or_else(|| D::Error::custom(format!("invalid action {a}")))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            table.insert(s, acts);
        }
        let uncovered_initial = f
            .uncovered_initial
            .iter()
            .map(|s| state(s))
            .collect::<std::result::Result<_, _>>()?;
        Ok(SchedulerStrategy {
            product,
            table,
            uncovered_initial,
        })
    }
}
