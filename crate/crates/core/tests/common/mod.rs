#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use nalgebra::{dmatrix, DMatrix, DVector};
use num_rational::Ratio;
use petc_traffic::game::safe_set;
use petc_traffic::quant::MeanPayoffGame;
use petc_traffic::ts::{ProductState, ProductSystem};
use petc_traffic::{LtiPlant, PetcLoop, QuadraticTrigger, RegionLabel, TrafficModel};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// `[c I, -I; -I, I]`, i.e. `|x - x_i|^2 - (1 - c)|x|^2`.
pub fn relative_q(c: f64) -> DMatrix<f64> {
    dmatrix![
        c, 0.0, -1.0, 0.0;
        0.0, c, 0.0, -1.0;
        -1.0, 0.0, 1.0, 0.0;
        0.0, -1.0, 0.0, 1.0
    ]
}

pub fn plant_1() -> LtiPlant {
    LtiPlant::new(
        dmatrix![0.0, 1.0; -2.0, 3.0],
        dmatrix![0.0; 1.0],
        dmatrix![1.0, -4.0],
    )
    .unwrap()
}

pub fn plant_2() -> LtiPlant {
    LtiPlant::new(
        dmatrix![-0.5, 0.0; 0.0, 3.5],
        dmatrix![1.0; 1.0],
        dmatrix![1.02, -5.62],
    )
    .unwrap()
}

pub fn relative_loop(plant: LtiPlant, c: f64, h: f64, kmax: u32) -> PetcLoop {
    PetcLoop::new(plant, QuadraticTrigger::new(relative_q(c), h, kmax).unwrap()).unwrap()
}

pub fn lyapunov_loop() -> PetcLoop {
    let plant = plant_1();
    let p = dmatrix![1.0, 0.25; 0.25, 1.0];
    let ql = dmatrix![0.5, 0.25; 0.25, 1.5];
    let trig = QuadraticTrigger::lyapunov_decrease(&plant, &p, &ql, 0.8, 0.1, 20).unwrap();
    PetcLoop::new(plant, trig).unwrap()
}

/// `sum_{j < terms} (A t)^j / j!`.
pub fn series_expm(a: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let at = a * t;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for j in 1..terms {
        term = &term * &at / j as f64;
        sum += &term;
    }
    sum
}

/// `e^{At} + int_0^t e^{As} ds B K` by composite Simpson over the series.
pub fn hold_map_quadrature(p: &LtiPlant, t: f64, intervals: usize) -> DMatrix<f64> {
    let n = p.dim();
    let step = t / intervals as f64;
    let mut integral = DMatrix::<f64>::zeros(n, n);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += series_expm(p.a(), i as f64 * step, 50) * w;
    }
    integral *= step / 3.0;
    series_expm(p.a(), t, 50) + integral * p.b() * p.k()
}

pub fn random_unit<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

/// Smallest mean over all simple cycles, found by depth-first search from
/// each cycle's smallest node.
pub fn brute_min_cycle_mean(n: usize, edges: &[(usize, usize, i64)]) -> Option<Ratio<i64>> {
    fn dfs(
        start: usize,
        v: usize,
        sum: i64,
        len: i64,
        on: &mut Vec<bool>,
        edges: &[(usize, usize, i64)],
        best: &mut Option<Ratio<i64>>,
    ) {
        for &(a, b, w) in edges {
            if a != v || b < start {
                continue;
            }
            if b == start {
                let m = Ratio::new(sum + w, len + 1);
                if best.is_none_or(|x| m < x) {
                    *best = Some(m);
                }
            } else if !on[b] {
                on[b] = true;
                dfs(start, b, sum + w, len + 1, on, edges, best);
                on[b] = false;
            }
        }
    }
    let mut best = None;
    for s in 0..n {
        let mut on = vec![false; n];
        on[s] = true;
        dfs(s, s, 0, 0, &mut on, edges, &mut best);
    }
    best
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize, i64)>) {
    let n = rng.random_range(1..=8);
    let mut edges = Vec::new();
    for v in 0..n {
        for _ in 0..rng.random_range(1..=3) {
            edges.push((v, rng.random_range(0..n), rng.random_range(1..=20)));
        }
    }
    (n, edges)
}

/// Depth-1 model over labels `1..=kmax` with edges `(x, k, y)` drawn at random,
/// at least one per `k <= output(x)`.
pub fn random_model(rng: &mut ChaCha8Rng, kmax: u32, etc_only: bool) -> TrafficModel {
    let mut labels: Vec<u32> = (1..=kmax).collect();
    labels.shuffle(rng);
    labels.truncate(rng.random_range(1..=kmax as usize));
    let regions: Vec<RegionLabel> = labels.iter().map(|&k| RegionLabel::new(vec![k]).unwrap()).collect();
    let mut edges = Vec::new();
    for r in &regions {
        let ks: Vec<u32> = if etc_only { vec![r.first()] } else { (1..=r.first()).collect() };
        for k in ks {
            for _ in 0..rng.random_range(1..=2) {
                let to = regions[rng.random_range(0..regions.len())].clone();
                edges.push((r.clone(), k, to));
            }
        }
    }
    TrafficModel::new(1.0, kmax, etc_only, regions, edges).unwrap()
}

pub fn random_game(rng: &mut ChaCha8Rng) -> MeanPayoffGame {
    let n = rng.random_range(1..=6);
    let choices = (0..n)
        .map(|_| {
            let mut ks: Vec<u32> = (1..=10).collect();
            ks.shuffle(rng);
            ks.truncate(rng.random_range(1..=3));
            ks.sort();
            ks.into_iter()
                .map(|k| {
                    let mut succ: Vec<usize> = (0..n).collect();
                    succ.shuffle(rng);
                    succ.truncate(rng.random_range(1..=n.min(3)));
                    (k, succ)
                })
                .collect()
        })
        .collect();
    MeanPayoffGame::new(choices).unwrap()
}

/// Best worst-case mean over every positional controller strategy; the
/// adversary's reply to each is the smallest simple-cycle mean.
pub fn exhaustive_game_value(game: &MeanPayoffGame) -> Ratio<i64> {
    let n = game.nodes();
    let mut sigma = vec![0usize; n];
    let mut best: Option<Ratio<i64>> = None;
    loop {
        let edges: Vec<_> = (0..n)
            .flat_map(|r| {
                let (k, succ) = &game.choices(r)[sigma[r]];
                succ.iter().map(move |&t| (r, t, *k as i64))
            })
            .collect();
        let v = brute_min_cycle_mean(n, &edges).unwrap();
        if best.is_none_or(|b| v > b) {
            best = Some(v);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best.unwrap();
            }
            sigma[i] += 1;
            if sigma[i] < game.choices(i).len() {
                break;
            }
            sigma[i] = 0;
            i += 1;
        }
    }
}

/// Greatest fixed point of the safety operator over every product state.
pub fn naive_fixpoint(product: &ProductSystem) -> BTreeSet<ProductState> {
    let spec = safe_set(product);
    let mut z: BTreeSet<ProductState> = product
        .all_states()
        .into_iter()
        .filter(|s| spec.contains(product, s))
        .collect();
    loop {
        let next: BTreeSet<ProductState> = z
            .iter()
            .filter(|s| {
                product.enabled_actions(s).into_iter().any(|u| {
                    let succ = product.successors(s, u);
                    !succ.is_empty() && succ.iter().all(|t| z.contains(t))
                })
            })
            .cloned()
            .collect();
        if next == z {
            return z;
        }
        z = next;
    }
}
