use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::PetcLoop;

/// Values of `x'N(k)x` (for unit `x`) above `-TIE_TOLERANCE` count as a
/// trigger, so near-ties resolve to the earlier sample.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The next `l` inter-sample times `(k1, ..., kl)`, in multiples of `h`,
/// identifying an isosequential cone of sampled states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct RegionLabel(Vec<u32>);

impl TryFrom<Vec<u32>> for RegionLabel {
    type Error = Error;

    fn try_from(seq: Vec<u32>) -> Result<Self> {
        Self::new(seq)
    }
}

impl From<RegionLabel> for Vec<u32> {
    fn from(l: RegionLabel) -> Self {
        l.0
    }
}

impl RegionLabel {
    pub fn new(seq: Vec<u32>) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::Parameter("region label must be nonempty".into()));
        }
        if seq.contains(&0) {
            return Err(Error::Parameter("inter-sample times start at 1".into()));
        }
        Ok(Self(seq))
    }

    pub fn seq(&self) -> &[u32] {
        &self.0
    }

    /// Next inter-sample time of the region, which is also its output.
    pub fn first(&self) -> u32 {
        self.0[0]
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Drops the first entry; `None` for depth-1 labels.
    pub fn tail(&self) -> Option<RegionLabel> {
        (self.0.len() > 1).then(|| RegionLabel(self.0[1..].to_vec()))
    }

    pub fn prefix(&self, len: usize) -> RegionLabel {
        RegionLabel(self.0[..len].to_vec())
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

fn unit(x: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = x.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::UndefinedState);
    }
    Ok(x / norm)
}

/// PETC inter-sample time from sampled state `x`, in multiples of `h`:
/// the first `k < kmax` with `x'N(k)x > 0`, else `kmax`.
pub fn inter_sample_k(lp: &PetcLoop, x: &DVector<f64>) -> Result<u32> {
    let x = unit(x)?;
    Ok(inter_sample_k_unit(lp, &x))
}

pub(crate) fn inter_sample_k_unit(lp: &PetcLoop, x: &DVector<f64>) -> u32 {
    let mats = lp.matrices();
    (1..lp.kmax())
        .find(|&k| x.dot(&(mats.form(k) * x)) > -TIE_TOLERANCE)
        .unwrap_or(lp.kmax())
}

/// Depth-`depth` label of `x`: the inter-sample times of the next `depth`
/// samples of the PETC loop started from `x`.
pub fn region_of(lp: &PetcLoop, x: &DVector<f64>, depth: usize) -> Result<RegionLabel> {
    if depth == 0 {
        return Err(Error::Parameter("depth must be at least 1".into()));
    }
    let mut cur = unit(x)?;
    let mut seq = Vec::with_capacity(depth);
    for i in 0..depth {
        let k = inter_sample_k_unit(lp, &cur);
        seq.push(k);
        if i + 1 < depth {
            cur = unit(&(lp.matrices().hold(k) * &cur))?;
        }
    }
    Ok(RegionLabel(seq))
}

/// Whether `x` belongs to the isosequential region `label`.
pub fn region_membership(x: &DVector<f64>, label: &RegionLabel, lp: &PetcLoop) -> Result<bool> {
    Ok(&region_of(lp, x, label.depth())? == label)
}
