//! Finite transition systems, the wait/trigger reformulation of a traffic
//! model and the synchronous product of several of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::abstraction::TrafficModel;
use crate::error::{Error, Result};

/// Explicit finite system `(states, initial, actions, edges, outputs, H)`.
/// Names are kept as strings so heterogeneous systems share one format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSystem {
    states: Vec<String>,
    initial: Vec<usize>,
    actions: Vec<String>,
    /// `H(x)` for each state.
    outputs: Vec<String>,
    edges: BTreeSet<(usize, usize, usize)>,
}

impl FiniteSystem {
    pub fn new(
        states: Vec<String>,
        initial: Vec<usize>,
        actions: Vec<String>,
        outputs: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self> {
        if outputs.len() != states.len() {
            return Err(Error::MalformedModel("output map must be total".into()));
        }
        let unique: BTreeSet<_> = states.iter().collect();
        if unique.len() != states.len() {
            return Err(Error::MalformedModel("duplicate state names".into()));
        }
        if initial.iter().any(|&i| i >= states.len()) {
            return Err(Error::MalformedModel("initial state out of range".into()));
        }
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if edges
            .iter()
            .any(|&(s, a, t)| s >= states.len() || t >= states.len() || a >= actions.len())
        {
            return Err(Error::MalformedModel("edge references an undeclared state or action".into()));
        }
        Ok(Self {
            states,
            initial,
            actions,
            outputs,
            edges,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize, usize)> {
        &self.edges
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn post(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((state, 0, 0)..=(state, usize::MAX, usize::MAX))
            .map(|&(_, _, t)| t)
    }

    /// Whether some run from an initial state emits `trace` as the prefix of
    /// its output sequence.
    pub fn bounded_trace_membership<S: AsRef<str>>(&self, trace: &[S]) -> bool {
        let Some(first) = trace.first() else {
            return true;
        };
        let mut frontier: BTreeSet<usize> = self
            .initial
            .iter()
            .copied()
            .filter(|&s| self.outputs[s] == first.as_ref())
            .collect();
        for y in &trace[1..] {
            if frontier.is_empty() {
                return false;
            }
            frontier = frontier
                .iter()
                .flat_map(|&s| self.post(s))
                .filter(|&t| self.outputs[t] == y.as_ref())
                .collect();
        }
        !frontier.is_empty()
    }

    /// Graphviz rendering; states show their outputs, edges their actions.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph system {\n  rankdir=LR;\n");
        let initial: BTreeSet<_> = self.initial.iter().collect();
        for (i, s) in self.states.iter().enumerate() {
            let shape = if initial.contains(&i) { "doublecircle" } else { "circle" };
            let _ = writeln!(
                out,
                "  s{i} [label=\"{}\\n{}\", shape={shape}];",
                escape(s),
                escape(&self.outputs[i])
            );
        }
        for &(s, a, t) in &self.edges {
            let _ = writeln!(out, "  s{s} -> s{t} [label=\"{}\"];", escape(&self.actions[a]));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    states: Vec<String>,
    initial: Vec<String>,
    actions: Vec<String>,
    outputs: Vec<String>,
    edges: Vec<(String, String, String)>,
}

impl Serialize for FiniteSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemFile {
            states: self.states.clone(),
            initial: self.initial.iter().map(|&i| self.states[i].clone()).collect(),
            actions: self.actions.clone(),
            outputs: self.outputs.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, u, b)| {
                    (self.states[a].clone(), self.actions[u].clone(), self.states[b].clone())
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = SystemFile::deserialize(d)?;
        let si: BTreeMap<&str, usize> =
            f.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let ai: BTreeMap<&str, usize> =
            f.actions.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let look = |m: &BTreeMap<&str, usize>, k: &str| {
            m.get(k).copied().ok_or_else(|| D::Error::custom(format!("unknown name {k}")))
        };
        let initial = f.initial.iter().map(|s| look(&si, s)).collect::<Result<_, _>>()?;
        let edges = f
            .edges
            .iter()
            .map(|(a, u, b)| Ok((look(&si, a)?, look(&ai, u)?, look(&si, b)?)))
            .collect::<Result<Vec<_>, D::Error>>()?;
        FiniteSystem::new(f.states, initial, f.actions, f.outputs, edges).map_err(D::Error::custom)
    }
}

impl TrafficModel {
    /// The model as a plain finite system; actions and outputs are the
    /// inter-sample times in decimal.
    pub fn to_finite_system(&self) -> FiniteSystem {
        let states = self.regions().iter().map(|r| r.to_string()).collect();
        let actions = (1..=self.kmax()).map(|k| k.to_string()).collect();
        let outputs = (0..self.len()).map(|i| self.output(i).to_string()).collect();
        let edges = self.edges().iter().map(|e| (e.from, e.k as usize - 1, e.to));
        FiniteSystem::new(states, (0..self.len()).collect(), actions, outputs, edges)
            .expect("traffic models are well formed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WtAction {
    Wait,
    Trigger,
}

impl WtAction {
    pub fn symbol(self) -> char {
        match self {
            WtAction::Wait => 'w',
            WtAction::Trigger => 't',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WtOutput {
    /// Just sampled, and the next sample is due in one period.
    T1,
    /// Just sampled.
    T,
    /// Periods left before the deadline.
    Remaining(u32),
}

impl WtOutput {
    pub fn is_trigger(self) -> bool {
        matches!(self, WtOutput::T1 | WtOutput::T)
    }
}

impl fmt::Display for WtOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WtOutput::T1 => write!(f, "T1"),
            WtOutput::T => write!(f, "T"),
            WtOutput::Remaining(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WtState {
    /// Sampled in region `region`.
    Trigger { region: usize },
    /// `j` periods since sampling in `region`, `1 <= j < H(region)`.
    Wait { region: usize, j: u32 },
}

impl WtState {
    pub fn region(self) -> usize {
        match self {
            WtState::Trigger { region } | WtState::Wait { region, .. } => region,
        }
    }

    /// Periods elapsed since the last sample.
    pub fn elapsed(self) -> u32 {
        match self {
            WtState::Trigger { .. } => 0,
            WtState::Wait { j, .. } => j,
        }
    }
}

/// Per-period reformulation of a traffic model: at every checking instant
/// the loop either waits (`w`) or samples (`t`).
#[derive(Debug, Clone)]
pub struct WaitTriggerSystem {
    model: TrafficModel,
    states: Vec<WtState>,
    /// Index of `T_x` per region; `W_{x,j}` sits at `base[x] + j`.
    base: Vec<usize>,
    /// Successors per state, indexed by `[wait, trigger]`.
    next: Vec<[Vec<usize>; 2]>,
}

/// Build the wait/trigger system of `model`. Every `k <= H(x)` must have an
/// outgoing edge from `x`.
pub fn wait_trigger_transform(model: &TrafficModel) -> Result<WaitTriggerSystem> {
    let mut states = Vec::new();
    let mut base = Vec::with_capacity(model.len());
    for x in 0..model.len() {
        base.push(states.len());
        states.push(WtState::Trigger { region: x });
        for j in 1..model.output(x) {
            states.push(WtState::Wait { region: x, j });
        }
    }
    let mut next = vec![[Vec::new(), Vec::new()]; states.len()];
    for x in 0..model.len() {
        let h = model.output(x);
        for k in 1..=h {
            let targets: Vec<usize> = model.successors(x, k).map(|y| base[y]).collect();
            if targets.is_empty() {
                return Err(Error::IncompleteModel {
                    region: model.regions()[x].to_string(),
                    k,
                });
            }
            // Sampling k periods after x: from T_x when k = 1, else W_{x,k-1}.
            next[base[x] + k as usize - 1][1] = targets;
        }
        for j in 0..h.saturating_sub(1) {
            next[base[x] + j as usize][0] = vec![base[x] + j as usize + 1];
        }
    }
    Ok(WaitTriggerSystem {
        model: model.clone(),
        states,
        base,
        next,
    })
}

impl WaitTriggerSystem {
    pub fn model(&self) -> &TrafficModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> WtState {
        self.states[i]
    }

    pub fn index(&self, s: WtState) -> Option<usize> {
        match s {
            WtState::Trigger { region } => self.base.get(region).copied(),
            WtState::Wait { region, j } => {
                (region < self.model.len() && j >= 1 && j < self.model.output(region))
                    .then(|| self.base[region] + j as usize)
            }
        }
    }

    pub fn trigger_state(&self, region: usize) -> usize {
        self.base[region]
    }

    pub fn initial(&self) -> impl Iterator<Item = usize> + '_ {
        self.base.iter().copied()
    }

    pub fn output(&self, i: usize) -> WtOutput {
        match self.states[i] {
            WtState::Trigger { region } if self.model.output(region) == 1 => WtOutput::T1,
            WtState::Trigger { .. } => WtOutput::T,
            WtState::Wait { region, j } => WtOutput::Remaining(self.model.output(region) - j),
        }
    }

    pub fn post(&self, i: usize, a: WtAction) -> &[usize] {
        &self.next[i][a as usize]
    }

    pub fn enabled(&self, i: usize, a: WtAction) -> bool {
        !self.next[i][a as usize].is_empty()
    }

    /// `T(2,3)` or `W(2,3;1)`.
    pub fn state_name(&self, i: usize) -> String {
        let s = self.states[i];
        let seq = self.model.regions()[s.region()]
            .seq()
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",");
        match s {
            WtState::Trigger { .. } => format!("T({seq})"),
            WtState::Wait { j, .. } => format!("W({seq};{j})"),
        }
    }

    pub fn state_by_name(&self, name: &str) -> Option<usize> {
        let (kind, rest) = name.split_at_checked(1)?;
        let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
        let (seq, j) = match kind {
            "T" => (inner, None),
            "W" => {
                let (seq, j) = inner.split_once(';')?;
                (seq, Some(j.parse::<u32>().ok()?))
            }
            _ => return None,
        };
        let seq = seq
            .split(',')
            .map(|t| t.trim().parse::<u32>().ok())
            .collect::<Option<Vec<_>>>()?;
        let region = self
            .model
            .index_of(&crate::abstraction::RegionLabel::new(seq).ok()?)?;
        self.index(match j {
            None => WtState::Trigger { region },
            Some(j) => WtState::Wait { region, j },
        })
    }

    pub fn to_finite_system(&self) -> FiniteSystem {
        let states = (0..self.len()).map(|i| self.state_name(i)).collect();
        let outputs = (0..self.len()).map(|i| self.output(i).to_string()).collect();
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for a in [WtAction::Wait, WtAction::Trigger] {
                edges.extend(self.post(i, a).iter().map(|&t| (i, a as usize, t)));
            }
        }
        FiniteSystem::new(
            states,
            self.initial().collect(),
            vec!["w".into(), "t".into()],
            outputs,
            edges,
        )
        .expect("wait/trigger systems are well formed")
    }
}

/// One action per component; bit `i` set means component `i` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(pub u64);

impl JointAction {
    pub fn get(self, i: usize) -> WtAction {
        if self.0 >> i & 1 == 1 {
            WtAction::Trigger
        } else {
            WtAction::Wait
        }
    }

    pub fn from_actions(actions: &[WtAction]) -> Self {
        JointAction(
            actions
                .iter()
                .enumerate()
                .filter(|(_, a)| **a == WtAction::Trigger)
                .fold(0, |acc, (i, _)| acc | 1 << i),
        )
    }

    /// `"wt"`-style rendering for `n` components.
    pub fn render(self, n: usize) -> String {
        (0..n).map(|i| self.get(i).symbol()).collect()
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s.len() > 64 {
            return None;
        }
        let mut bits = 0;
        for (i, c) in s.chars().enumerate() {
            match c {
                'w' => {}
                't' => bits |= 1 << i,
                _ => return None,
            }
        }
        Some(JointAction(bits))
    }

    /// Order used to prefer late sampling: per component `w` before `t`,
    /// compared from the first component.
    pub fn late_key(self, n: usize) -> Vec<WtAction> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

/// Component state indices, one per loop.
pub type ProductState = Vec<u32>;

/// Synchronous composition of wait/trigger systems. States are never
/// materialized here; successors are produced on demand.
#[derive(Debug, Clone)]
pub struct ProductSystem {
    components: Vec<WaitTriggerSystem>,
}

pub fn parallel_compose(systems: Vec<WaitTriggerSystem>) -> Result<ProductSystem> {
    if systems.is_empty() {
        return Err(Error::Parameter("nothing to compose".into()));
    }
    if systems.len() > 64 {
        return Err(Error::Parameter("at most 64 loops can be composed".into()));
    }
    Ok(ProductSystem { components: systems })
}

impl ProductSystem {
    pub fn components(&self) -> &[WaitTriggerSystem] {
        &self.components
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    /// Size of the full syntactic product.
    pub fn state_count(&self) -> u128 {
        self.components.iter().map(|c| c.len() as u128).product()
    }

    pub fn initial_states(&self) -> Vec<ProductState> {
        cartesian(
            &self
                .components
                .iter()
                .map(|c| c.initial().map(|i| i as u32).collect())
                .collect::<Vec<_>>(),
        )
    }

    /// Every syntactic tuple; only sensible for small products.
    pub fn all_states(&self) -> Vec<ProductState> {
        cartesian(
            &self
                .components
                .iter()
                .map(|c| (0..c.len() as u32).collect())
                .collect::<Vec<_>>(),
        )
    }

    pub fn outputs(&self, s: &[u32]) -> Vec<WtOutput> {
        self.components
            .iter()
            .zip(s)
            .map(|(c, &i)| c.output(i as usize))
            .collect()
    }

    /// Joint actions whose every component move is enabled.
    pub fn enabled_actions(&self, s: &[u32]) -> Vec<JointAction> {
        let mut out = vec![0u64];
        for (i, (c, &x)) in self.components.iter().zip(s).enumerate() {
            let mut next = Vec::with_capacity(out.len() * 2);
            for &bits in &out {
                if c.enabled(x as usize, WtAction::Wait) {
                    next.push(bits);
                }
                if c.enabled(x as usize, WtAction::Trigger) {
                    next.push(bits | 1 << i);
                }
            }
            out = next;
        }
        let mut out: Vec<JointAction> = out.into_iter().map(JointAction).collect();
        out.sort();
        out
    }

    /// `Post_u(s)`; empty when some component cannot perform its move.
    pub fn successors(&self, s: &[u32], u: JointAction) -> Vec<ProductState> {
        let per: Vec<Vec<u32>> = self
            .components
            .iter()
            .zip(s)
            .enumerate()
            .map(|(i, (c, &x))| c.post(x as usize, u.get(i)).iter().map(|&t| t as u32).collect())
            .collect();
        cartesian(&per)
    }

    pub fn state_names(&self, s: &[u32]) -> Vec<String> {
        self.components
            .iter()
            .zip(s)
            .map(|(c, &i)| c.state_name(i as usize))
            .collect()
    }

    pub fn state_by_names<S: AsRef<str>>(&self, names: &[S]) -> Option<ProductState> {
        if names.len() != self.arity() {
            return None;
        }
        self.components
            .iter()
            .zip(names)
            .map(|(c, n)| c.state_by_name(n.as_ref()).map(|i| i as u32))
            .collect()
    }
}

fn cartesian(sets: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::with_capacity(sets.len())];
    for set in sets {
        let mut next = Vec::with_capacity(out.len() * set.len());
        for prefix in &out {
            for &x in set {
                let mut v = prefix.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
