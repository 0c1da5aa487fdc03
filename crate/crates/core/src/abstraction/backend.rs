//! Region non-emptiness and witness search.
//!
//! Regions are cones, so only directions matter. Two search strategies are
//! provided:
//!
//! * [`AngularPartition`] (planar systems): every quadratic form involved in
//!   a depth-`l` label changes sign at no more than two directions, so the
//!   projective line splits into finitely many arcs on which the label is
//!   constant. Collecting all those sign changes (pulled back through the
//!   hold maps for deeper labels) and classifying one point per arc yields
//!   every region together with a witness. A label that owns no arc is empty
//!   up to a set of measure zero.
//! * [`SphereSweep`] (any dimension): classify a deterministic low-discrepancy
//!   point set on the unit sphere. Labels it does not hit are either refuted
//!   by an eigenvalue certificate or reported as unknown.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::region::{region_of, RegionLabel, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::lti::PetcLoop;

/// Witness search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Angular partition for planar loops, sphere sweep otherwise.
    #[default]
    Auto,
    Angular,
    Sweep { points: usize },
}

pub const DEFAULT_SWEEP_POINTS: usize = 100_000;

impl Backend {
    pub(crate) fn resolve(self, dim: usize) -> Result<Backend> {
        match self {
            Backend::Auto if dim == 2 => Ok(Backend::Angular),
            Backend::Auto => Ok(Backend::Sweep {
                points: DEFAULT_SWEEP_POINTS * (dim - 1).max(1),
            }),
            Backend::Angular if dim != 2 => Err(Error::Parameter(format!(
                "angular backend needs a planar system, got dimension {dim}"
            ))),
            Backend::Sweep { points: 0 } => {
                Err(Error::Parameter("sweep needs at least one point".into()))
            }
            b => Ok(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptinessCertificate {
    /// `N(k)` is negative definite: the trigger can never fire at step `k`.
    NeverTriggers { k: u32 },
    /// `N(k)` is positive semidefinite: the trigger always fires by step `k`.
    AlwaysTriggers { k: u32 },
    /// The label owns no arc of the exhaustive angular partition.
    ExhaustivePartition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionStatus {
    /// Unit-norm witness.
    Nonempty(DVector<f64>),
    EmptyCertified(EmptinessCertificate),
    /// Neither witnessed nor refuted; callers should treat it as nonempty.
    Unknown,
}

impl RegionStatus {
    pub fn possibly_nonempty(&self) -> bool {
        !matches!(self, RegionStatus::EmptyCertified(_))
    }
}

/// Sufficient emptiness test from the signs of the individual forms.
pub fn eigen_certificate(lp: &PetcLoop, label: &RegionLabel) -> Option<EmptinessCertificate> {
    let kmax = lp.kmax();
    let mats = lp.matrices();
    for &k in label.seq() {
        if k > kmax {
            return Some(EmptinessCertificate::NeverTriggers { k });
        }
        if k < kmax {
            let top = SymmetricEigen::new(mats.form(k).clone()).eigenvalues.max();
            if top < -TIE_TOLERANCE {
                return Some(EmptinessCertificate::NeverTriggers { k });
            }
        }
        for s in 1..k {
            let bottom = SymmetricEigen::new(mats.form(s).clone()).eigenvalues.min();
            if bottom > -TIE_TOLERANCE {
                return Some(EmptinessCertificate::AlwaysTriggers { k: s });
            }
        }
    }
    None
}

fn dir(theta: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.cos(), theta.sin()])
}

fn proj_angle(v: &DVector<f64>) -> f64 {
    let a = v[1].atan2(v[0]).rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Directions in `[0, pi)` where `x'Nx` changes sign.
fn form_roots(n: &DMatrix<f64>, out: &mut Vec<f64>) {
    let alpha = 0.5 * (n[(0, 0)] + n[(1, 1)]);
    let beta = 0.5 * (n[(0, 0)] - n[(1, 1)]);
    let gamma = 0.5 * (n[(0, 1)] + n[(1, 0)]);
    let r = beta.hypot(gamma);
    if r <= f64::EPSILON * alpha.abs().max(1e-300) {
        return;
    }
    let c = -alpha / r;
    if c.abs() > 1.0 {
        return;
    }
    let phi = gamma.atan2(beta);
    let d = c.acos();
    for two_theta in [phi + d, phi - d] {
        out.push((0.5 * two_theta).rem_euclid(PI) % PI);
    }
}

fn normalize_breaks(mut b: Vec<f64>) -> Vec<f64> {
    b.retain(|v| v.is_finite());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    b
}

/// Directions `theta` with `M dir(theta)` parallel to `dir(phi)` for every
/// `phi` in `breaks`.
fn pull_back(m: &DMatrix<f64>, breaks: &[f64]) -> Vec<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det.abs() <= 1e-14 * m.norm_squared() {
        return Vec::new();
    }
    let inv = [
        [m[(1, 1)] / det, -m[(0, 1)] / det],
        [-m[(1, 0)] / det, m[(0, 0)] / det],
    ];
    breaks
        .iter()
        .map(|&phi| {
            let (c, s) = (phi.cos(), phi.sin());
            let y = DVector::from_vec(vec![
                inv[0][0] * c + inv[0][1] * s,
                inv[1][0] * c + inv[1][1] * s,
            ]);
            proj_angle(&y)
        })
        .collect()
}

/// One arc of the projective line with constant label.
#[derive(Debug, Clone)]
pub struct Arc {
    pub lo: f64,
    /// May exceed `pi` for the arc that wraps around.
    pub hi: f64,
    pub label: RegionLabel,
}

impl Arc {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn witness(&self) -> DVector<f64> {
        dir(self.mid())
    }
}

/// Exhaustive partition of the directions of a planar loop by depth-`l` label.
#[derive(Debug, Clone)]
pub struct AngularPartition {
    depth: usize,
    breaks: Vec<f64>,
    arcs: Vec<Arc>,
}

fn arcs_of(breaks: &[f64]) -> Vec<(f64, f64)> {
    if breaks.is_empty() {
        return vec![(0.0, PI)];
    }
    let mut out: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    out.push((*breaks.last().unwrap(), breaks[0] + PI));
    out
}

impl AngularPartition {
    pub fn compute(lp: &PetcLoop, depth: usize) -> Result<Self> {
        if lp.dim() != 2 {
            return Err(Error::Parameter("angular partition needs a planar system".into()));
        }
        if depth == 0 {
            return Err(Error::Parameter("depth must be at least 1".into()));
        }
        let mats = lp.matrices();
        let mut first = Vec::new();
        for k in 1..lp.kmax() {
            form_roots(mats.form(k), &mut first);
        }
        let first = normalize_breaks(first);
        let first_arcs: Vec<(f64, f64, u32)> = arcs_of(&first)
            .into_iter()
            .map(|(lo, hi)| {
                let k = super::region::inter_sample_k_unit(lp, &dir(0.5 * (lo + hi)));
                (lo, hi, k)
            })
            .collect();

        let mut breaks = first.clone();
        for _ in 1..depth {
            let mut next = first.clone();
            let mut by_k: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
            for &(lo, hi, k) in &first_arcs {
                by_k.entry(k).or_default().push((lo, hi));
            }
            for (k, spans) in by_k {
                for theta in pull_back(mats.hold(k), &breaks) {
                    let inside = spans.iter().any(|&(lo, hi)| {
                        (theta > lo && theta < hi) || (theta + PI > lo && theta + PI < hi)
                    });
                    if inside {
                        next.push(theta);
                    }
                }
            }
            breaks = normalize_breaks(next);
        }

        let arcs = arcs_of(&breaks)
            .into_iter()
            .map(|(lo, hi)| {
                let label = region_of(lp, &dir(0.5 * (lo + hi)), depth)?;
                Ok(Arc { lo, hi, label })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            depth,
            breaks,
            arcs,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Each label with the midpoint of its widest arc as witness.
    pub fn regions(&self) -> BTreeMap<RegionLabel, DVector<f64>> {
        let mut best: BTreeMap<RegionLabel, (f64, f64)> = BTreeMap::new();
        for a in &self.arcs {
            let width = a.hi - a.lo;
            let e = best.entry(a.label.clone()).or_insert((width, a.mid()));
            if width > e.0 {
                *e = (width, a.mid());
            }
        }
        best.into_iter().map(|(l, (_, m))| (l, dir(m))).collect()
    }

    /// Sub-arcs on which both the label and the label after `M` are
    /// constant, given by their midpoints.
    pub fn image_refinement(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let mut all = self.breaks.clone();
        all.extend(pull_back(m, &self.breaks));
        arcs_of(&normalize_breaks(all))
            .into_iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Deterministic low-discrepancy directions on the unit sphere.
#[derive(Debug, Clone)]
pub struct SphereSweep {
    points: Vec<DVector<f64>>,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base as u64) as f64;
        i /= base as u64;
        f /= b;
    }
    r
}

impl SphereSweep {
    pub fn new(dim: usize, count: usize) -> Result<Self> {
        if dim == 0 || count == 0 {
            return Err(Error::Parameter("sweep needs a positive dimension and count".into()));
        }
        if dim == 2 {
            let points = (0..count)
                .map(|i| dir((i as f64 + 0.5) / count as f64 * PI))
                .collect();
            return Ok(Self { points });
        }
        if 2 * dim.div_ceil(2) > PRIMES.len() {
            return Err(Error::Parameter(format!("sweep supports dimension <= {}", PRIMES.len())));
        }
        let pairs = dim.div_ceil(2);
        let points = (1..=count as u64)
            .map(|i| {
                let mut v = Vec::with_capacity(2 * pairs);
                for p in 0..pairs {
                    // Box-Muller keeps the Halton structure while making the
                    // direction distribution uniform.
                    let u1 = radical_inverse(i, PRIMES[2 * p]).max(1e-300);
                    let u2 = radical_inverse(i, PRIMES[2 * p + 1]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    v.push(r * (2.0 * PI * u2).cos());
                    v.push(r * (2.0 * PI * u2).sin());
                }
                v.truncate(dim);
                let x = DVector::from_vec(v);
                let norm = x.norm();
                x / norm
            })
            .filter(|x| x.iter().all(|c| c.is_finite()))
            .collect();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Labels hit by the sweep, each with its first witness.
    pub fn regions(&self, lp: &PetcLoop, depth: usize) -> Result<BTreeMap<RegionLabel, DVector<f64>>> {
        let mut out = BTreeMap::new();
        for x in &self.points {
            let label = region_of(lp, x, depth)?;
            out.entry(label).or_insert_with(|| x.clone());
        }
        Ok(out)
    }
}

/// Decide whether `label` is realized by some sampled state.
pub fn region_nonempty(label: &RegionLabel, lp: &PetcLoop, backend: Backend) -> Result<RegionStatus> {
    if let Some(cert) = eigen_certificate(lp, label) {
        return Ok(RegionStatus::EmptyCertified(cert));
    }
    match backend.resolve(lp.dim())? {
        Backend::Angular => {
            let part = AngularPartition::compute(lp, label.depth())?;
            Ok(match part.regions().remove(label) {
                Some(w) => RegionStatus::Nonempty(w),
                None => RegionStatus::EmptyCertified(EmptinessCertificate::ExhaustivePartition),
            })
        }
        Backend::Sweep { points } => {
            let sweep = SphereSweep::new(lp.dim(), points)?;
            for x in sweep.points() {
                if &region_of(lp, x, label.depth())? == label {
                    return Ok(RegionStatus::Nonempty(x.clone()));
                }
            }
            Ok(RegionStatus::Unknown)
        }
        Backend::Auto => unreachable!("resolved above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::region::region_membership;
    use crate::lti::{LtiPlant, QuadraticTrigger};
    use nalgebra::dmatrix;

    fn tab_loop(kmax: u32) -> PetcLoop {
        let plant = LtiPlant::new(
            dmatrix![-0.5, 0.0; 0.0, 3.5],
            dmatrix![1.0; 1.0],
            dmatrix![1.02, -5.62],
        )
        .unwrap();
        let q = dmatrix![
            0.95, 0.0, -1.0, 0.0;
            0.0, 0.95, 0.0, -1.0;
            -1.0, 0.0, 1.0, 0.0;
            0.0, -1.0, 0.0, 1.0
        ];
        PetcLoop::new(plant, QuadraticTrigger::new(q, 0.01, kmax).unwrap()).unwrap()
    }

    fn never_firing(kmax: u32) -> PetcLoop {
        let plant = LtiPlant::new(
            dmatrix![0.0, 1.0; -2.0, 3.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, -4.0],
        )
        .unwrap();
        PetcLoop::new(
            plant,
            QuadraticTrigger::new(-DMatrix::identity(4, 4), 0.01, kmax).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn heartbeat_region_of_never_firing_trigger() {
        let lp = never_firing(5);
        let label = RegionLabel::new(vec![5]).unwrap();
        for backend in [Backend::Angular, Backend::Sweep { points: 100 }] {
            match region_nonempty(&label, &lp, backend).unwrap() {
                RegionStatus::Nonempty(w) => {
                    assert!((w.norm() - 1.0).abs() < 1e-12);
                    assert!(region_membership(&w, &label, &lp).unwrap());
                }
                other => panic!("expected witness, got {other:?}"),
            }
        }
    }

    #[test]
    fn negative_definite_form_certifies_emptiness() {
        let lp = never_firing(5);
        let label = RegionLabel::new(vec![1]).unwrap();
        assert_eq!(
            region_nonempty(&label, &lp, Backend::Sweep { points: 10 }).unwrap(),
            RegionStatus::EmptyCertified(EmptinessCertificate::NeverTriggers { k: 1 })
        );
    }

    #[test]
    fn form_roots_are_sign_changes() {
        let n = dmatrix![1.0, 0.3; 0.3, -2.0];
        let mut roots = Vec::new();
        form_roots(&n, &mut roots);
        assert_eq!(roots.len(), 2);
        for r in roots {
            let x = dir(r);
            assert!(x.dot(&(&n * &x)).abs() < 1e-12);
            let before = dir(r - 1e-6);
            let after = dir(r + 1e-6);
            assert!(before.dot(&(&n * &before)) * after.dot(&(&n * &after)) < 0.0);
        }
    }

    #[test]
    fn angular_witnesses_belong_to_their_regions() {
        let lp = tab_loop(20);
        for depth in 1..=3 {
            let part = AngularPartition::compute(&lp, depth).unwrap();
            for (label, w) in part.regions() {
                assert!(region_membership(&w, &label, &lp).unwrap(), "{label}");
            }
        }
    }

    #[test]
    fn angular_partition_matches_dense_sweep_at_depth_one() {
        let lp = tab_loop(20);
        let angular: Vec<_> = AngularPartition::compute(&lp, 1)
            .unwrap()
            .regions()
            .into_keys()
            .collect();
        let swept: Vec<_> = SphereSweep::new(2, 20_000)
            .unwrap()
            .regions(&lp, 1)
            .unwrap()
            .into_keys()
            .collect();
        assert_eq!(angular, swept);
    }

    #[test]
    fn higher_dimensional_sweep_points_are_unit() {
        let s = SphereSweep::new(3, 500).unwrap();
        assert!(s.points().len() > 490);
        for p in s.points() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn angular_backend_rejects_non_planar() {
        assert!(Backend::Angular.resolve(3).is_err());
        assert_eq!(Backend::Auto.resolve(2).unwrap(), Backend::Angular);
        assert!(matches!(Backend::Auto.resolve(3).unwrap(), Backend::Sweep { .. }));
    }
}
