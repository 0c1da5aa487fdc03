//! Linear-systems numerics: the matrix exponential, the sample-and-hold
//! transition matrices `M(kh)` and the triggering forms `N(kh)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Continuous-time plant `dx/dt = A x + B u` under state feedback `u = K x(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl LtiPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, k: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B must have {} rows, got {}",
                n,
                b.nrows()
            )));
        }
        if k.ncols() != n || k.nrows() != b.ncols() {
            return Err(Error::Dimension(format!(
                "K must be {}x{}, got {}x{}",
                b.ncols(),
                n,
                k.nrows(),
                k.ncols()
            )));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !(finite(&a) && finite(&b) && finite(&k)) {
            return Err(Error::Parameter("plant matrices must be finite".into()));
        }
        Ok(Self { a, b, k })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Zero-order-hold discretization `(A_d(t), B_d(t))`, read off the
    /// exponential of the augmented matrix `[[A, B], [0, 0]]`.
    pub fn discretize(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let m = self.b.ncols();
        let mut aug = DMatrix::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.a);
        aug.view_mut((0, n), (n, m)).copy_from(&self.b);
        let e = expm_unchecked(&aug, t);
        (
            e.view((0, 0), (n, n)).into_owned(),
            e.view((0, n), (n, m)).into_owned(),
        )
    }

    /// `M(t) = A_d(t) + B_d(t) K`: maps the sampled state to the state `t`
    /// seconds later while the input is held.
    pub fn hold_map(&self, t: f64) -> DMatrix<f64> {
        let (ad, bd) = self.discretize(t);
        ad + bd * &self.k
    }
}

/// Quadratic triggering rule: sample at the first check `kh` where
/// `[x(kh); x_i]' Q [x(kh); x_i] > 0`, or at `kmax h` at the latest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTrigger {
    q: DMatrix<f64>,
    h: f64,
    kmax: u32,
}

impl QuadraticTrigger {
    pub fn new(q: DMatrix<f64>, h: f64, kmax: u32) -> Result<Self> {
        if q.nrows() != q.ncols() || !q.nrows().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "triggering matrix must be square with even size, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if (&q - q.transpose()).amax() > 1e-12 {
            return Err(Error::Parameter("triggering matrix must be symmetric".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Parameter(format!("checking period must be positive, got {h}")));
        }
        if kmax == 0 {
            return Err(Error::Parameter("kmax must be at least 1".into()));
        }
        Ok(Self { q, h, kmax })
    }

    /// Lyapunov-decrease trigger: sample when the predicted one-period decrease
    /// of `V(x) = x'Px` falls short of `rho * h * x'Q_L x`, i.e. when
    /// `V(x̂) - V(x) + rho h x'Q_L x > 0` with `x̂ = A_d(h) x + B_d(h) K x_i`.
    pub fn lyapunov_decrease(
        plant: &LtiPlant,
        p: &DMatrix<f64>,
        q_lyap: &DMatrix<f64>,
        rho: f64,
        h: f64,
        kmax: u32,
    ) -> Result<Self> {
        let n = plant.dim();
        if p.shape() != (n, n) || q_lyap.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "Lyapunov matrices must be {n}x{n}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Parameter(format!("checking period must be positive, got {h}")));
        }
        let (ad, bd) = plant.discretize(h);
        let mut predict = DMatrix::zeros(n, 2 * n);
        predict.view_mut((0, 0), (n, n)).copy_from(&ad);
        predict
            .view_mut((0, n), (n, n))
            .copy_from(&(bd * plant.k()));
        let mut current = DMatrix::zeros(n, 2 * n);
        current
            .view_mut((0, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        let q = predict.transpose() * p * &predict - current.transpose() * p * &current
            + current.transpose() * q_lyap * &current * (rho * h);
        Self::new(symmetrize(&q), h, kmax)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kmax(&self) -> u32 {
        self.kmax
    }
}

/// Triggering form at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum TriggerForm {
    /// `x' N x > 0` means the trigger has fired by step `k`.
    Quadratic(DMatrix<f64>),
    /// Step `kmax`: the heartbeat forces a sample.
    AlwaysTriggers,
}

/// Precomputed `M(kh)` for `k = 1..=kmax` and `N(kh)` for `k = 1..kmax`.
#[derive(Debug, Clone)]
pub struct TransitionMatrices {
    m: Vec<DMatrix<f64>>,
    n: Vec<DMatrix<f64>>,
}

impl TransitionMatrices {
    pub fn compute(plant: &LtiPlant, trigger: &QuadraticTrigger) -> Self {
        let kmax = trigger.kmax();
        let m: Vec<_> = (1..=kmax)
            .map(|k| plant.hold_map(k as f64 * trigger.h()))
            .collect();
        let n = m[..(kmax as usize - 1)]
            .iter()
            .map(|mk| form_from_hold(mk, trigger.q()))
            .collect();
        Self { m, n }
    }

    /// `M(kh)`, `1 <= k <= kmax`.
    pub fn hold(&self, k: u32) -> &DMatrix<f64> {
        &self.m[k as usize - 1]
    }

    /// `N(kh)`, `1 <= k < kmax`.
    pub fn form(&self, k: u32) -> &DMatrix<f64> {
        &self.n[k as usize - 1]
    }

    pub fn kmax(&self) -> u32 {
        self.m.len() as u32
    }
}

/// A PETC loop: plant, trigger and the cached matrices both give rise to.
#[derive(Debug, Clone)]
pub struct PetcLoop {
    plant: LtiPlant,
    trigger: QuadraticTrigger,
    matrices: TransitionMatrices,
}

impl PetcLoop {
    pub fn new(plant: LtiPlant, trigger: QuadraticTrigger) -> Result<Self> {
        if trigger.q().nrows() != 2 * plant.dim() {
            return Err(Error::Dimension(format!(
                "triggering matrix must be {0}x{0} for a {1}-state plant",
                2 * plant.dim(),
                plant.dim()
            )));
        }
        let matrices = TransitionMatrices::compute(&plant, &trigger);
        Ok(Self {
            plant,
            trigger,
            matrices,
        })
    }

    pub fn plant(&self) -> &LtiPlant {
        &self.plant
    }

    pub fn trigger(&self) -> &QuadraticTrigger {
        &self.trigger
    }

    pub fn matrices(&self) -> &TransitionMatrices {
        &self.matrices
    }

    pub fn dim(&self) -> usize {
        self.plant.dim()
    }

    pub fn h(&self) -> f64 {
        self.trigger.h()
    }

    pub fn kmax(&self) -> u32 {
        self.trigger.kmax()
    }

    /// Value of the triggering function for current state `x` and held state `xi`.
    pub fn trigger_value(&self, x: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        let n = self.dim();
        let q = self.trigger.q();
        let z = DVector::from_iterator(2 * n, x.iter().chain(xi.iter()).copied());
        z.dot(&(q * &z))
    }
}

/// `e^{At}` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix exponential of non-finite input".into()));
    }
    Ok(expm_unchecked(a, t))
}

/// `M(kh)` for `1 <= k <= kmax`.
pub fn hold_transition_matrix(
    plant: &LtiPlant,
    trigger: &QuadraticTrigger,
    k: u32,
) -> Result<DMatrix<f64>> {
    if k == 0 || k > trigger.kmax() {
        return Err(Error::Parameter(format!(
            "k = {k} outside 1..={}",
            trigger.kmax()
        )));
    }
    Ok(plant.hold_map(k as f64 * trigger.h()))
}

/// `N(kh) = [M(kh); I]' Q [M(kh); I]`, or the heartbeat sentinel at `k = kmax`.
pub fn trigger_form(plant: &LtiPlant, trigger: &QuadraticTrigger, k: u32) -> Result<TriggerForm> {
    if trigger.q().nrows() != 2 * plant.dim() {
        return Err(Error::Dimension("triggering matrix does not match plant".into()));
    }
    if k == trigger.kmax() {
        return Ok(TriggerForm::AlwaysTriggers);
    }
    let m = hold_transition_matrix(plant, trigger, k)?;
    Ok(TriggerForm::Quadratic(form_from_hold(&m, trigger.q())))
}

pub(crate) fn form_from_hold(m: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(m);
    stacked
        .view_mut((n, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    symmetrize(&(stacked.transpose() * q * &stacked))
}

pub(crate) fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the unscaled [13/13] approximant is accurate to
// double precision.
const THETA13: f64 = 5.371920351148152;

fn expm_unchecked(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let x = a * t;
    let norm = one_norm(&x);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let x = x * 2f64.powi(-squarings);

    let id = DMatrix::<f64>::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x2 * &x4;
    let b = &PADE13;
    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + &id * b[1];
    let u = &x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn one_norm(x: &DMatrix<f64>) -> f64 {
    x.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn series_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let n = a.nrows();
        let at = a * t;
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for i in 1..50 {
            term = &term * &at / i as f64;
            sum += &term;
            if term.norm() < 1e-16 {
                break;
            }
        }
        sum
    }

    fn rel_err(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
        (x - reference).norm() / reference.norm()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&DMatrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn exp_of_diagonal() {
        let a = dmatrix![-0.5, 0.0; 0.0, 3.5];
        let e = matrix_exponential(&a, 0.01).unwrap();
        let expected = dmatrix![(-0.005f64).exp(), 0.0; 0.0, 0.035f64.exp()];
        assert!(rel_err(&e, &expected) < 1e-15);
    }

    #[test]
    fn exp_matches_series() {
        let a = dmatrix![0.0, 1.0; -2.0, 3.0];
        let e = matrix_exponential(&a, 0.01).unwrap();
        assert!(rel_err(&e, &series_exp(&a, 0.01)) < 1e-13);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            matrix_exponential(&DMatrix::zeros(2, 3), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn exp_needs_squaring_for_large_arguments() {
        let a = dmatrix![0.0, 1.0; -2.0, 3.0];
        let e = matrix_exponential(&a, 3.0).unwrap();
        let half = matrix_exponential(&a, 1.5).unwrap();
        assert!(rel_err(&e, &(&half * &half)) < 1e-12);
    }

    #[test]
    fn hold_map_of_integrator() {
        // A = 0, B = K = I: M(1) = I + I.
        let plant = LtiPlant::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let trigger = QuadraticTrigger::new(DMatrix::zeros(4, 4), 1.0, 1).unwrap();
        let m = hold_transition_matrix(&plant, &trigger, 1).unwrap();
        assert!((m - DMatrix::identity(2, 2) * 2.0).amax() < 1e-15);
    }

    #[test]
    fn hold_map_tends_to_identity() {
        let plant = LtiPlant::new(
            dmatrix![-0.5, 0.0; 0.0, 3.5],
            dmatrix![1.0; 1.0],
            dmatrix![1.02, -5.62],
        )
        .unwrap();
        let m = plant.hold_map(1e-12);
        assert!((m - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn hold_map_k_out_of_range() {
        let plant = LtiPlant::new(dmatrix![0.0], dmatrix![1.0], dmatrix![-1.0]).unwrap();
        let trigger = QuadraticTrigger::new(DMatrix::zeros(2, 2), 0.1, 3).unwrap();
        assert!(hold_transition_matrix(&plant, &trigger, 0).is_err());
        assert!(hold_transition_matrix(&plant, &trigger, 4).is_err());
        assert!(hold_transition_matrix(&plant, &trigger, 3).is_ok());
    }

    #[test]
    fn zero_trigger_gives_zero_form() {
        let plant = LtiPlant::new(
            dmatrix![0.0, 1.0; -2.0, 3.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, -4.0],
        )
        .unwrap();
        let trigger = QuadraticTrigger::new(DMatrix::zeros(4, 4), 0.01, 5).unwrap();
        for k in 1..5 {
            match trigger_form(&plant, &trigger, k).unwrap() {
                TriggerForm::Quadratic(n) => assert_eq!(n, DMatrix::zeros(2, 2)),
                TriggerForm::AlwaysTriggers => panic!("k < kmax"),
            }
        }
        assert_eq!(
            trigger_form(&plant, &trigger, 5).unwrap(),
            TriggerForm::AlwaysTriggers
        );
    }

    #[test]
    fn identity_hold_with_difference_form() {
        let mut q = DMatrix::zeros(4, 4);
        q.view_mut((0, 0), (2, 2)).fill_with_identity();
        q.view_mut((2, 2), (2, 2)).copy_from(&(-DMatrix::<f64>::identity(2, 2)));
        let n = form_from_hold(&DMatrix::identity(2, 2), &q);
        assert_eq!(n, DMatrix::zeros(2, 2));
    }

    #[test]
    fn plant_dimension_checks() {
        assert!(LtiPlant::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).is_err());
        assert!(LtiPlant::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1), DMatrix::zeros(1, 2)).is_err());
        assert!(LtiPlant::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn trigger_validation() {
        assert!(QuadraticTrigger::new(dmatrix![1.0, 2.0; 0.0, 1.0], 0.1, 2).is_err());
        assert!(QuadraticTrigger::new(DMatrix::zeros(2, 2), 0.0, 2).is_err());
        assert!(QuadraticTrigger::new(DMatrix::zeros(2, 2), 0.1, 0).is_err());
        assert!(QuadraticTrigger::new(DMatrix::zeros(3, 3), 0.1, 1).is_err());
    }
}
