//! Closed-loop simulation of PETC loops on the checking grid, alone or
//! under a scheduler.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::abstraction::region::{inter_sample_k_unit, TIE_TOLERANCE};
use crate::abstraction::region_of;
use crate::error::{Error, Result};
use crate::game::{Scheduler, SchedulerStrategy, TieBreak};
use crate::lti::PetcLoop;
use crate::ts::WtAction;

/// Uniformly distributed direction in `R^dim`.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub loops: Vec<PetcLoop>,
    pub initial: Vec<DVector<f64>>,
    /// Number of checking periods to simulate.
    pub horizon: usize,
    pub scheduler: Option<&'a SchedulerStrategy>,
    pub tie_break: TieBreak,
}

impl<'a> SimConfig<'a> {
    pub fn new(loops: Vec<PetcLoop>, initial: Vec<DVector<f64>>, horizon: usize) -> Self {
        Self {
            loops,
            initial,
            horizon,
            scheduler: None,
            tie_break: TieBreak::default(),
        }
    }

    /// Initial states drawn from the unit sphere with a fixed seed.
    pub fn with_random_initial(loops: Vec<PetcLoop>, horizon: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let initial = loops
            .iter()
            .map(|lp| random_unit_vector(lp.dim(), &mut rng))
            .collect();
        Self::new(loops, initial, horizon)
    }

    pub fn scheduled(mut self, strategy: &'a SchedulerStrategy) -> Self {
        self.scheduler = Some(strategy);
        self
    }
}

/// State of all loops after one checking period.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStep {
    pub t: f64,
    pub states: Vec<DVector<f64>>,
    /// Last sampled state, as seen by each controller.
    pub held: Vec<DVector<f64>>,
    pub trigger: Vec<bool>,
    /// Sampled before the loop's own triggering condition required it.
    pub early: Vec<bool>,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub h: f64,
    /// Step 0 holds the initial states, sampled by every loop at start-up.
    pub steps: Vec<SimStep>,
}

/// Simulate `config` for `horizon` checking periods.
pub fn simulate(config: &SimConfig<'_>) -> Result<SimTrace> {
    let n = config.loops.len();
    if n == 0 {
        return Err(Error::Parameter("no loops to simulate".into()));
    }
    if config.initial.len() != n {
        return Err(Error::Dimension(format!(
            "{} initial states for {n} loops",
            config.initial.len()
        )));
    }
    let h = config.loops[0].h();
    if config.loops.iter().any(|lp| (lp.h() - h).abs() > 1e-12 * h) {
        return Err(Error::Parameter("all loops must share one checking period".into()));
    }
    for (lp, x) in config.loops.iter().zip(&config.initial) {
        if x.len() != lp.dim() {
            return Err(Error::Dimension("initial state size differs from the plant".into()));
        }
        if !(x.norm() > 0.0) || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::UndefinedState);
        }
    }

    let mut held: Vec<DVector<f64>> = config.initial.clone();
    let mut states = held.clone();
    let mut elapsed = vec![0u32; n];
    // Natural inter-sample time of each held state.
    let natural = |lp: &PetcLoop, x: &DVector<f64>| inter_sample_k_unit(lp, &(x / x.norm()));
    let mut deadline: Vec<u32> = config
        .loops
        .iter()
        .zip(&held)
        .map(|(lp, x)| natural(lp, x))
        .collect();

    let mut scheduler = match config.scheduler {
        Some(strategy) => {
            let models = strategy.models();
            if models.len() != n {
                return Err(Error::Dimension(format!(
                    "scheduler covers {} loops, {n} given",
                    models.len()
                )));
            }
            let regions = regions_of(config, &models, &held, 0)?;
            Some(Scheduler::start(strategy, &regions, config.tie_break)?)
        }
        None => None,
    };

    let mut steps = Vec::with_capacity(config.horizon + 1);
    steps.push(SimStep {
        t: 0.0,
        states: states.clone(),
        held: held.clone(),
        trigger: vec![false; n],
        early: vec![false; n],
        collision: false,
    });

    for step in 1..=config.horizon {
        for i in 0..n {
            elapsed[i] += 1;
            states[i] = config.loops[i].matrices().hold(elapsed[i]) * &held[i];
        }
        let (trigger, action) = match &scheduler {
            Some(s) => {
                let a = s.choose()?;
                ((0..n).map(|i| a.get(i) == WtAction::Trigger).collect::<Vec<_>>(), Some(a))
            }
            None => (
                (0..n)
                    .map(|i| {
                        let lp = &config.loops[i];
                        elapsed[i] >= lp.kmax() || {
                            let x = &held[i] / held[i].norm();
                            x.dot(&(lp.matrices().form(elapsed[i]) * &x)) > -TIE_TOLERANCE
                        }
                    })
                    .collect(),
                None,
            ),
        };
        let mut early = vec![false; n];
        for i in 0..n {
            if elapsed[i] > deadline[i] {
                return Err(Error::SchedulingFault {
                    step,
                    reason: format!("loop {i} missed its deadline"),
                });
            }
            if trigger[i] {
                early[i] = elapsed[i] < deadline[i];
                held[i] = states[i].clone();
                elapsed[i] = 0;
                deadline[i] = natural(&config.loops[i], &held[i]);
            }
        }
        if let (Some(s), Some(a)) = (scheduler.as_mut(), action) {
            let models = config.scheduler.unwrap().models();
            let regions = regions_of(config, &models, &held, step)?;
            let measured: Vec<Option<usize>> = (0..n)
                .map(|i| trigger[i].then_some(regions[i]))
                .collect();
            s.advance(a, &measured)?;
        }
        let collision = trigger.iter().filter(|&&t| t).count() >= 2;
        steps.push(SimStep {
            t: step as f64 * h,
            states: states.clone(),
            held: held.clone(),
            trigger,
            early,
            collision,
        });
    }
    Ok(SimTrace { h, steps })
}

fn regions_of(
    config: &SimConfig<'_>,
    models: &[&crate::abstraction::TrafficModel],
    xs: &[DVector<f64>],
    step: usize,
) -> Result<Vec<usize>> {
    config
        .loops
        .iter()
        .zip(models)
        .zip(xs)
        .enumerate()
        .map(|(i, ((lp, m), x))| {
            let label = region_of(lp, x, m.depth())?;
            m.index_of(&label).ok_or_else(|| Error::SchedulingFault {
                step,
                reason: format!("loop {i} sampled in region {label}, which its model lacks"),
            })
        })
        .collect()
}

/// Steps at which two or more loops sampled, with the loops involved.
pub fn collision_report(trace: &SimTrace) -> Vec<(usize, Vec<usize>)> {
    trace
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.collision)
        .map(|(i, s)| {
            (
                i,
                s.trigger
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| t)
                    .map(|(j, _)| j)
                    .collect(),
            )
        })
        .collect()
}

impl SimTrace {
    /// Steps at which loop `i` sampled, excluding start-up.
    pub fn trigger_steps(&self, i: usize) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.trigger[i])
            .map(|(k, _)| k)
            .collect()
    }

    /// Columns `t, x11, x12, ..., x1hat1, ..., trigger1, early1, ..., collision`.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.steps.first() else {
            return String::new();
        };
        let mut out = String::from("t");
        for (i, x) in first.states.iter().enumerate() {
            for j in 0..x.len() {
                let _ = write!(out, ",x{}{}", i + 1, j + 1);
            }
            for j in 0..x.len() {
                let _ = write!(out, ",x{}hat{}", i + 1, j + 1);
            }
        }
        for i in 0..first.states.len() {
            let _ = write!(out, ",trigger{},early{}", i + 1, i + 1);
        }
        out.push_str(",collision\n");
        for s in &self.steps {
            let _ = write!(out, "{:?}", s.t);
            for (x, xh) in s.states.iter().zip(&s.held) {
                for v in x.iter().chain(xh.iter()) {
                    let _ = write!(out, ",{v:?}");
                }
            }
            for (t, e) in s.trigger.iter().zip(&s.early) {
                let _ = write!(out, ",{},{}", *t as u8, *e as u8);
            }
            let _ = writeln!(out, ",{}", s.collision as u8);
        }
        out
    }
}
