use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{eigen_certificate, AngularPartition, Backend, SphereSweep};
use super::region::{region_of, RegionLabel};
use crate::error::{Error, Result};
use crate::lti::PetcLoop;

/// `(from, k, to)`: sampling `k` periods after entering `from` can land in `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: usize,
    pub k: u32,
    pub to: usize,
}

/// Finite traffic model of a PETC loop. States are regions, all of them
/// initial; the output of a region is its next (natural) inter-sample time
/// and the weight of an edge is its action `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficModel {
    h: f64,
    kmax: u32,
    depth: usize,
    etc_only: bool,
    regions: Vec<RegionLabel>,
    edges: BTreeSet<Transition>,
}

impl TrafficModel {
    /// Assemble and validate a model; regions are sorted and edges reindexed.
    pub fn new(
        h: f64,
        kmax: u32,
        etc_only: bool,
        regions: Vec<RegionLabel>,
        edges: impl IntoIterator<Item = (RegionLabel, u32, RegionLabel)>,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::MalformedModel("no regions".into()));
        }
        if !(h.is_finite() && h > 0.0) || kmax == 0 {
            return Err(Error::Parameter("h must be positive and kmax at least 1".into()));
        }
        let depth = regions[0].depth();
        let mut sorted = regions;
        sorted.sort();
        sorted.dedup();
        let index: BTreeMap<&RegionLabel, usize> =
            sorted.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let mut set = BTreeSet::new();
        for (from, k, to) in edges {
            let (Some(&f), Some(&t)) = (index.get(&from), index.get(&to)) else {
                return Err(Error::MalformedModel(format!(
                    "edge {from} -{k}-> {to} references an unknown region"
                )));
            };
            set.insert(Transition { from: f, k, to: t });
        }
        let model = Self {
            h,
            kmax,
            depth,
            etc_only,
            regions: sorted,
            edges: set,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for r in &self.regions {
            if r.depth() != self.depth {
                return Err(Error::MalformedModel("regions of mixed depth".into()));
            }
            if r.seq().iter().any(|&k| k > self.kmax) {
                return Err(Error::MalformedModel(format!("region {r} exceeds kmax")));
            }
        }
        let mut has_natural = vec![false; self.regions.len()];
        for e in &self.edges {
            let out = self.output(e.from);
            if e.k == 0 || e.k > out {
                return Err(Error::MalformedModel(format!(
                    "edge from {} with k = {} exceeds its output {}",
                    self.regions[e.from], e.k, out
                )));
            }
            if self.etc_only && e.k != out {
                return Err(Error::MalformedModel("early edge in an ETC-only model".into()));
            }
            if e.k == out {
                has_natural[e.from] = true;
            }
        }
        if let Some(i) = has_natural.iter().position(|ok| !ok) {
            return Err(Error::MalformedModel(format!(
                "region {} has no outgoing edge at its own inter-sample time",
                self.regions[i]
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kmax(&self) -> u32 {
        self.kmax
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn etc_only(&self) -> bool {
        self.etc_only
    }

    pub fn regions(&self) -> &[RegionLabel] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn edges(&self) -> &BTreeSet<Transition> {
        &self.edges
    }

    pub fn output(&self, region: usize) -> u32 {
        self.regions[region].first()
    }

    pub fn index_of(&self, label: &RegionLabel) -> Option<usize> {
        self.regions.binary_search(label).ok()
    }

    pub fn successors(&self, from: usize, k: u32) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range(Transition { from, k, to: 0 }..=Transition { from, k, to: usize::MAX })
            .map(|e| e.to)
    }

    pub fn has_edge(&self, from: usize, k: u32, to: usize) -> bool {
        self.edges.contains(&Transition { from, k, to })
    }

    /// The ETC-only restriction: keep only `k = output(from)`.
    pub fn etc_restriction(&self) -> TrafficModel {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.k == self.output(e.from))
            .copied()
            .collect();
        TrafficModel {
            etc_only: true,
            edges,
            ..self.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    h: f64,
    kmax: u32,
    depth: usize,
    etc_only: bool,
    states: Vec<RegionLabel>,
    initial: Vec<usize>,
    actions: Vec<u32>,
    outputs: Vec<u32>,
    /// `[from, k, to]` as state indices.
    edges: Vec<(usize, u32, usize)>,
    weights: Vec<u32>,
}

impl Serialize for TrafficModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelFile {
            h: self.h,
            kmax: self.kmax,
            depth: self.depth,
            etc_only: self.etc_only,
            states: self.regions.clone(),
            initial: (0..self.regions.len()).collect(),
            actions: (1..=self.kmax).collect(),
            outputs: (0..self.regions.len()).map(|i| self.output(i)).collect(),
            edges: self.edges.iter().map(|e| (e.from, e.k, e.to)).collect(),
            weights: self.edges.iter().map(|e| e.k).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrafficModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = ModelFile::deserialize(d)?;
        let n = f.states.len();
        if f.outputs.len() != n || f.weights.len() != f.edges.len() {
            return Err(D::Error::custom("outputs/weights do not match states/edges"));
        }
        for (i, s) in f.states.iter().enumerate() {
            if f.outputs[i] != s.first() {
                return Err(D::Error::custom(format!("output of {s} must be {}", s.first())));
            }
        }
        if f.depth != f.states.first().map_or(0, |s| s.depth()) {
            return Err(D::Error::custom("depth does not match the state labels"));
        }
        let mut edges = Vec::with_capacity(f.edges.len());
        for (&(from, k, to), &w) in f.edges.iter().zip(&f.weights) {
            if from >= n || to >= n {
                return Err(D::Error::custom("edge index out of range"));
            }
            if w != k {
                return Err(D::Error::custom("edge weight must equal its action"));
            }
            edges.push((f.states[from].clone(), k, f.states[to].clone()));
        }
        TrafficModel::new(f.h, f.kmax, f.etc_only, f.states, edges).map_err(D::Error::custom)
    }
}

/// Hand-built model with regions `(2)` and `(3)`, `kmax = 3` and `h = 1`:
/// `(2)` may move to either region when sampled at its deadline, and every
/// other sample stays in the source region.
pub fn two_region_example() -> TrafficModel {
    let r2 = RegionLabel::new(vec![2]).expect("valid label");
    let r3 = RegionLabel::new(vec![3]).expect("valid label");
    TrafficModel::new(
        1.0,
        3,
        false,
        vec![r2.clone(), r3.clone()],
        vec![
            (r2.clone(), 1, r2.clone()),
            (r2.clone(), 2, r2.clone()),
            (r2.clone(), 2, r3.clone()),
            (r3.clone(), 1, r3.clone()),
            (r3.clone(), 2, r3.clone()),
            (r3.clone(), 3, r3.clone()),
        ],
    )
    .expect("valid model")
}

/// Knobs for [`build_traffic_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractionOptions {
    pub depth: usize,
    /// Only the natural ETC transitions (`k = output`).
    pub etc_only: bool,
    pub backend: Backend,
    /// Keep regions the backend can neither witness nor refute, and every
    /// transition touching them.
    pub conservative: bool,
    /// Length of the simulated runs whose observed transitions are added.
    pub closure_steps: usize,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        Self {
            depth: 1,
            etc_only: false,
            backend: Backend::Auto,
            conservative: false,
            closure_steps: 20,
        }
    }
}

/// Regions found by the backend.
#[derive(Debug, Clone)]
pub struct RegionSet {
    pub depth: usize,
    /// Witnessed regions, with unit witnesses.
    pub witnessed: BTreeMap<RegionLabel, DVector<f64>>,
    /// Neither witnessed nor certified empty.
    pub unknown: BTreeSet<RegionLabel>,
    partition: Option<AngularPartition>,
}

impl RegionSet {
    pub fn labels(&self, include_unknown: bool) -> Vec<RegionLabel> {
        let mut out: Vec<_> = self.witnessed.keys().cloned().collect();
        if include_unknown {
            out.extend(self.unknown.iter().cloned());
            out.sort();
        }
        out
    }
}

/// All depth-`depth` regions not certified empty.
pub fn compute_regions(lp: &PetcLoop, depth: usize, backend: Backend) -> Result<RegionSet> {
    if depth == 0 {
        return Err(Error::Parameter("depth must be at least 1".into()));
    }
    match backend.resolve(lp.dim())? {
        Backend::Angular => {
            let part = AngularPartition::compute(lp, depth)?;
            Ok(RegionSet {
                depth,
                witnessed: part.regions(),
                unknown: BTreeSet::new(),
                partition: Some(part),
            })
        }
        Backend::Sweep { points } => {
            let sweep = SphereSweep::new(lp.dim(), points)?;
            // Breadth-first over prefix length: extend surviving prefixes only.
            let mut witnessed = BTreeMap::new();
            let mut unknown = BTreeSet::new();
            let mut frontier: Vec<RegionLabel> = vec![];
            for len in 1..=depth {
                let hits = sweep.regions(lp, len)?;
                let candidates: Vec<RegionLabel> = if len == 1 {
                    (1..=lp.kmax())
                        .map(|k| RegionLabel::new(vec![k]))
                        .collect::<Result<_>>()?
                } else {
                    frontier
                        .iter()
                        .flat_map(|p| {
                            (1..=lp.kmax()).map(move |k| {
                                let mut s = p.seq().to_vec();
                                s.push(k);
                                RegionLabel::new(s)
                            })
                        })
                        .collect::<Result<_>>()?
                };
                let mut next = Vec::new();
                let mut level_unknown = BTreeSet::new();
                for c in candidates {
                    if hits.contains_key(&c) {
                        next.push(c);
                    } else if eigen_certificate(lp, &c).is_none() {
                        level_unknown.insert(c.clone());
                        next.push(c);
                    }
                }
                frontier = next;
                if len == depth {
                    witnessed = hits;
                    unknown = level_unknown;
                }
            }
            Ok(RegionSet {
                depth,
                witnessed,
                unknown,
                partition: None,
            })
        }
        Backend::Auto => unreachable!("resolved above"),
    }
}

/// Sampled states used as transition witnesses, grouped by nothing: each
/// is classified on the fly.
fn witness_points(lp: &PetcLoop, regions: &RegionSet, backend: Backend) -> Result<Vec<DVector<f64>>> {
    Ok(match backend.resolve(lp.dim())? {
        Backend::Sweep { points } => SphereSweep::new(lp.dim(), points)?.points().to_vec(),
        _ => regions.witnessed.values().cloned().collect(),
    })
}

/// Transition relation over `regions`, as labels.
pub fn compute_transitions(
    lp: &PetcLoop,
    regions: &RegionSet,
    options: &AbstractionOptions,
) -> Result<BTreeSet<(RegionLabel, u32, RegionLabel)>> {
    let depth = regions.depth;
    let mut found: BTreeSet<(RegionLabel, u32, RegionLabel)> = BTreeSet::new();
    let wanted = |src: &RegionLabel, k: u32| {
        if options.etc_only {
            k == src.first()
        } else {
            k <= src.first()
        }
    };

    if let Some(part) = &regions.partition {
        // Exact for planar loops: refine the partition by the pre-image of
        // its own breakpoints under each hold map.
        let per_k: Vec<Vec<(RegionLabel, u32, RegionLabel)>> = (1..=lp.kmax())
            .into_par_iter()
            .map(|k| -> Result<Vec<_>> {
                let m = lp.matrices().hold(k);
                let mut out = Vec::new();
                for theta in part.image_refinement(m) {
                    let x = DVector::from_vec(vec![theta.cos(), theta.sin()]);
                    let src = region_of(lp, &x, depth)?;
                    if !wanted(&src, k) {
                        continue;
                    }
                    let y = m * &x;
                    if y.norm() == 0.0 {
                        continue;
                    }
                    out.push((src, k, region_of(lp, &y, depth)?));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        found.extend(per_k.into_iter().flatten());
    } else {
        let points = witness_points(lp, regions, options.backend)?;
        let chunks: Vec<Vec<(RegionLabel, u32, RegionLabel)>> = points
            .par_chunks(1024)
            .map(|chunk| -> Result<Vec<_>> {
                let mut out = Vec::new();
                for x in chunk {
                    let src = region_of(lp, x, depth)?;
                    for k in 1..=src.first() {
                        if !wanted(&src, k) {
                            continue;
                        }
                        let y = lp.matrices().hold(k) * x;
                        if y.norm() == 0.0 {
                            continue;
                        }
                        out.push((src.clone(), k, region_of(lp, &y, depth)?));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        found.extend(chunks.into_iter().flatten());
    }

    // Closure over simulated ETC runs from every witness.
    for x0 in regions.witnessed.values() {
        let mut x = x0.clone();
        let mut src = region_of(lp, &x, depth)?;
        for _ in 0..options.closure_steps {
            let k = src.first();
            let y = lp.matrices().hold(k) * &x;
            let norm = y.norm();
            if norm == 0.0 {
                break;
            }
            x = y / norm;
            let dst = region_of(lp, &x, depth)?;
            found.insert((src, k, dst.clone()));
            src = dst;
        }
    }

    if options.conservative && !regions.unknown.is_empty() {
        let all = regions.labels(true);
        for src in &all {
            for k in 1..=src.first() {
                if !wanted(src, k) {
                    continue;
                }
                for dst in &all {
                    if regions.unknown.contains(src) || regions.unknown.contains(dst) {
                        found.insert((src.clone(), k, dst.clone()));
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Build the traffic model of `lp`.
pub fn build_traffic_model(lp: &PetcLoop, options: &AbstractionOptions) -> Result<TrafficModel> {
    let mut regions = compute_regions(lp, options.depth, options.backend)?;
    let mut edges = compute_transitions(lp, &regions, options)?;

    // Labels reached by a transition but missed by the region search get
    // their own witness and outgoing edges, until closed.
    let mut queue: VecDeque<(RegionLabel, DVector<f64>)> = VecDeque::new();
    let enqueue = |edges: &BTreeSet<(RegionLabel, u32, RegionLabel)>,
                       regions: &mut RegionSet,
                       queue: &mut VecDeque<_>|
     -> Result<()> {
        let missing: Vec<RegionLabel> = edges
            .iter()
            .map(|(_, _, d)| d)
            .filter(|d| !regions.witnessed.contains_key(*d) && !regions.unknown.contains(*d))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for (s, k, d) in edges.iter() {
            if missing.contains(d) && regions.witnessed.contains_key(s) {
                let w = lp.matrices().hold(*k) * &regions.witnessed[s];
                let w = &w / w.norm();
                if &region_of(lp, &w, regions.depth)? == d && !regions.witnessed.contains_key(d) {
                    regions.witnessed.insert(d.clone(), w.clone());
                    queue.push_back((d.clone(), w));
                }
            }
        }
        for d in missing {
            if !regions.witnessed.contains_key(&d) {
                regions.unknown.insert(d);
            }
        }
        Ok(())
    };
    enqueue(&edges, &mut regions, &mut queue)?;
    while let Some((label, w)) = queue.pop_front() {
        let mut local = BTreeSet::new();
        for k in 1..=label.first() {
            if options.etc_only && k != label.first() {
                continue;
            }
            let y = lp.matrices().hold(k) * &w;
            if y.norm() > 0.0 {
                local.insert((label.clone(), k, region_of(lp, &y, regions.depth)?));
            }
        }
        enqueue(&local, &mut regions, &mut queue)?;
        edges.extend(local);
    }

    let include_unknown = options.conservative;
    let labels = regions.labels(include_unknown);
    let keep: BTreeSet<&RegionLabel> = labels.iter().collect();
    let dropped = edges
        .iter()
        .filter(|(s, _, d)| !keep.contains(s) || !keep.contains(d))
        .count();
    if dropped > 0 {
        log::warn!("{dropped} transitions touch regions that could not be witnessed");
    }
    let edges: Vec<_> = edges
        .into_iter()
        .filter(|(s, _, d)| keep.contains(s) && keep.contains(d))
        .collect();
    TrafficModel::new(lp.h(), lp.kmax(), options.etc_only, labels, edges)
}
