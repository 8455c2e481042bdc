//! Continuous-time LTI plants, closed-loop assembly, exact zero-order-hold
//! discretization, and noisy step-response simulation.
//!
//! Polynomial coefficients are stored in ascending powers of `s` throughout,
//! matching the JSON plant-config format `{num: [...], den: [...], delay: T}`.

mod expm;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expm::expm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("denominator must have a nonzero leading coefficient")]
    ZeroDenominator,
    #[error("transfer function is improper (numerator degree exceeds denominator degree)")]
    Improper,
    #[error("delay must be positive (got {0})")]
    NonPositiveDelay(f64),
    #[error("Pade order {0} unsupported (1..=8)")]
    BadPadeOrder(usize),
    #[error("algebraic loop: 1 + D_c * D_p is singular")]
    AlgebraicLoop,
    #[error("time step must be positive (got {0})")]
    BadTimeStep(f64),
    #[error("step response needs at least 2 samples (got {0})")]
    BadSampleCount(usize),
    #[error("reference amplitude must be nonzero")]
    ZeroReference,
    #[error("unknown benchmark plant '{0}'")]
    UnknownPlant(String),
}

/// The three benchmark plants: a delayed lag, a high-order repeated-pole
/// model, and a non-minimum-phase model. All have unit DC gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantId {
    G1,
    G2,
    G3,
}

impl std::str::FromStr for PlantId {
    type Err = PlantError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "g1" => Ok(PlantId::G1),
            "g2" => Ok(PlantId::G2),
            "g3" => Ok(PlantId::G3),
            other => Err(PlantError::UnknownPlant(other.into())),
        }
    }
}

impl std::fmt::Display for PlantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlantId::G1 => write!(f, "g1"),
            PlantId::G2 => write!(f, "g2"),
            PlantId::G3 => write!(f, "g3"),
        }
    }
}

fn trim_trailing_zeros(mut v: Vec<f64>) -> Vec<f64> {
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    v
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(coeffs: &[f64], s: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

/// Rational transfer function, coefficients in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, PlantError> {
        let num = trim_trailing_zeros(num);
        let den = trim_trailing_zeros(den);
        if den.is_empty() || *den.last().unwrap() == 0.0 {
            return Err(PlantError::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn degree_num(&self) -> usize {
        self.num.len().saturating_sub(1)
    }

    pub fn degree_den(&self) -> usize {
        self.den.len() - 1
    }

    /// `deg num <= deg den`, required for state-space conversion.
    pub fn is_proper(&self) -> bool {
        self.degree_num() <= self.degree_den()
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.first().copied().unwrap_or(0.0) / self.den[0]
    }

    /// Series interconnection (polynomial product).
    pub fn series(&self, other: &TransferFunction) -> Result<TransferFunction, PlantError> {
        TransferFunction::new(
            poly_mul(&self.num, &other.num),
            poly_mul(&self.den, &other.den),
        )
    }
}

/// Plant description as loaded from JSON config; `delay` is replaced by a
/// third-order Pade approximant when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantConfig {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default)]
    pub delay: Option<f64>,
}

impl PlantConfig {
    pub fn to_transfer_function(&self) -> Result<TransferFunction, PlantError> {
        let base = TransferFunction::new(self.num.clone(), self.den.clone())?;
        match self.delay {
            Some(t) if t != 0.0 => base.series(&pade_delay(t, 3)?),
            _ => Ok(base),
        }
    }
}

/// Benchmark plants. `G1` carries a 5 s delay, returned with the delay
/// already replaced by the third-order Pade approximant.
pub fn benchmark_plant(id: PlantId) -> TransferFunction {
    match id {
        PlantId::G1 => {
            let lag = TransferFunction::new(vec![1.0], vec![1.0, 20.0]).expect("static");
            pade_delay(5.0, 3).expect("static").series(&lag).expect("static")
        }
        PlantId::G2 => {
            let mut den = vec![1.0];
            for _ in 0..8 {
                den = poly_mul(&den, &[1.0, 0.01]);
            }
            TransferFunction::new(vec![1.0], den).expect("static")
        }
        PlantId::G3 => {
            TransferFunction::new(vec![1.0, -5.0], vec![1.0, 30.0, 200.0]).expect("static")
        }
    }
}

/// Diagonal Pade approximant of the delay `e^{-Ts}`. The `m/m` table for
/// `e^x` has coefficients `c_k = (2m-k)! m! / ((2m)! k! (m-k)!)`; the result
/// matches the Taylor expansion of `e^{-Ts}` through order `2m`.
pub fn pade_delay(delay: f64, order: usize) -> Result<TransferFunction, PlantError> {
    if !(delay > 0.0) {
        return Err(PlantError::NonPositiveDelay(delay));
    }
    if order == 0 || order > 8 {
        return Err(PlantError::BadPadeOrder(order));
    }
    let m = order;
    let mut c = vec![1.0f64; m + 1];
    for k in 1..=m {
        // c_k / c_{k-1} = (m - k + 1) / ((2m - k + 1) k)
        c[k] = c[k - 1] * (m - k + 1) as f64 / ((2 * m - k + 1) as f64 * k as f64);
    }
    let num: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, &ck)| ck * (-delay).powi(k as i32))
        .collect();
    let den: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, &ck)| ck * delay.powi(k as i32))
        .collect();
    TransferFunction::new(num, den)
}

/// State-space realization `x' = Ax + Bu`, `y = Cx + Du`. Shapes are kept
/// general so a closed loop can expose its reference and noise inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Frequency response at a complex point (SIMO/MISO handled by shape).
    pub fn eval(&self, s: Complex<f64>) -> DMatrix<Complex<f64>> {
        let n = self.n_states();
        let to_c = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
        if n == 0 {
            return to_c(&self.d);
        }
        let mut si_a = to_c(&self.a) * Complex::new(-1.0, 0.0);
        for i in 0..n {
            si_a[(i, i)] += s;
        }
        let x = si_a
            .lu()
            .solve(&to_c(&self.b))
            .expect("sI - A singular at evaluation point");
        to_c(&self.c) * x + to_c(&self.d)
    }

    /// All eigenvalues of `A` strictly in the left half plane.
    pub fn is_hurwitz(&self) -> bool {
        if self.n_states() == 0 {
            return true;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .all(|ev| ev.re < 0.0)
    }

    /// Steady-state gain from input `j` to the first output (final value for
    /// a unit step on that input), valid for Hurwitz `A`.
    pub fn dc_gain(&self, j: usize) -> f64 {
        if self.n_states() == 0 {
            return self.d[(0, j)];
        }
        let x = self
            .a
            .clone()
            .lu()
            .solve(&(-self.b.column(j)))
            .expect("A is singular; no steady state");
        (self.c.row(0) * x)[(0, 0)] + self.d[(0, j)]
    }
}

/// Controllable canonical realization of a proper transfer function.
///
/// The companion form is built for the frequency-scaled polynomial
/// `D(lambda * s)` whose coefficients are O(1), then `A` and `B` are scaled
/// back by `lambda`. Without this, plants like `1/(0.01 s + 1)^8` produce
/// companion entries spanning 16 orders of magnitude and both the
/// eigensolver and the matrix exponential fall apart.
pub fn tf_to_ss(tf: &TransferFunction) -> Result<StateSpace, PlantError> {
    if !tf.is_proper() {
        return Err(PlantError::Improper);
    }
    let n = tf.degree_den();

    let lambda = {
        let k0 = tf.den.iter().position(|&v| v != 0.0).unwrap_or(0);
        if n > k0 {
            (tf.den[k0].abs() / tf.den[n].abs()).powf(1.0 / (n - k0) as f64)
        } else {
            1.0
        }
    };
    let den: Vec<f64> = tf
        .den
        .iter()
        .enumerate()
        .map(|(k, &v)| v * lambda.powi(k as i32))
        .collect();
    let num: Vec<f64> = tf
        .num
        .iter()
        .enumerate()
        .map(|(k, &v)| v * lambda.powi(k as i32))
        .collect();

    let lead = *den.last().unwrap();
    let a_coeffs: Vec<f64> = den[..n].iter().map(|&v| v / lead).collect();
    let mut b_coeffs = vec![0.0; n + 1];
    for (i, &v) in num.iter().enumerate() {
        b_coeffs[i] = v / lead;
    }
    let d = b_coeffs[n];

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = lambda;
    }
    for j in 0..n {
        a[(n - 1, j)] = -a_coeffs[j] * lambda;
    }
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(n - 1, 0)] = lambda;
    }
    let mut c = DMatrix::zeros(1, n);
    for j in 0..n {
        c[(0, j)] = b_coeffs[j] - d * a_coeffs[j];
    }
    Ok(StateSpace {
        a,
        b,
        c,
        d: DMatrix::from_element(1, 1, d),
    })
}

/// Negative unity feedback: the controller acts on `e = r - (y + v)` where
/// `v` is the measurement noise. Returns a system with inputs `(r, v)` and
/// the clean output `y`.
pub fn closed_loop(plant: &StateSpace, controller: &StateSpace) -> Result<StateSpace, PlantError> {
    assert_eq!(plant.n_inputs(), 1, "plant must be SISO");
    assert_eq!(plant.n_outputs(), 1, "plant must be SISO");
    assert_eq!(controller.n_inputs(), 1, "controller must be SISO");
    assert_eq!(controller.n_outputs(), 1, "controller must be SISO");

    let np = plant.n_states();
    let nc = controller.n_states();
    let dp = plant.d[(0, 0)];
    let dc = controller.d[(0, 0)];
    let denom = 1.0 + dc * dp;
    if denom.abs() < 1e-12 {
        return Err(PlantError::AlgebraicLoop);
    }
    let g = 1.0 / denom;

    let (ap, bp, cp) = (&plant.a, &plant.b, &plant.c);
    let (ac, bc, cc) = (&controller.a, &controller.b, &controller.c);

    let mut a = DMatrix::zeros(np + nc, np + nc);
    a.view_mut((0, 0), (np, np))
        .copy_from(&(ap - g * dc * bp * cp));
    a.view_mut((0, np), (np, nc)).copy_from(&(g * bp * cc));
    a.view_mut((np, 0), (nc, np)).copy_from(&(-g * bc * cp));
    a.view_mut((np, np), (nc, nc))
        .copy_from(&(ac - g * dp * bc * cc));

    let mut b = DMatrix::zeros(np + nc, 2);
    b.view_mut((0, 0), (np, 1)).copy_from(&(g * dc * bp));
    b.view_mut((0, 1), (np, 1)).copy_from(&(-g * dc * bp));
    b.view_mut((np, 0), (nc, 1)).copy_from(&(g * bc));
    b.view_mut((np, 1), (nc, 1)).copy_from(&(-g * bc));

    let mut c = DMatrix::zeros(1, np + nc);
    c.view_mut((0, 0), (1, np)).copy_from(&(g * cp));
    c.view_mut((0, np), (1, nc)).copy_from(&(g * dp * cc));

    let mut d = DMatrix::zeros(1, 2);
    d[(0, 0)] = g * dp * dc;
    d[(0, 1)] = -g * dp * dc;

    Ok(StateSpace { a, b, c, d })
}

/// Discrete closed-loop recurrence obtained by exact zero-order-hold
/// discretization (matrix exponential of the augmented `[A B; 0 0]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dt: f64,
}

impl DiscreteLoop {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
}

pub fn discretize_zoh(ss: &StateSpace, dt: f64) -> Result<DiscreteLoop, PlantError> {
    if !(dt > 0.0) {
        return Err(PlantError::BadTimeStep(dt));
    }
    let n = ss.n_states();
    let m = ss.n_inputs();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    aug.view_mut((0, n), (n, m)).copy_from(&ss.b);
    let e = expm(&(aug * dt));
    Ok(DiscreteLoop {
        a: e.view((0, 0), (n, n)).into(),
        b: e.view((0, n), (n, m)).into(),
        c: ss.c.clone(),
        d: ss.d.clone(),
        dt,
    })
}

/// Options for [`step_response_with`]. `noise_in_feedback` selects whether
/// measurement noise enters the loop or only the recorded samples.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub r_hat: f64,
    pub n_samples: usize,
    pub noise_std_frac: f64,
    pub noise_in_feedback: bool,
}

/// Step response from rest: reference jumps to `r_hat` at `t = 0` and per-
/// sample Gaussian measurement noise with standard deviation
/// `noise_std * |r_hat|` enters both the fed-back measurement and the
/// recorded output.
pub fn step_response<R: Rng + ?Sized>(
    dl: &DiscreteLoop,
    r_hat: f64,
    n_samples: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<Vec<f64>, PlantError> {
    step_response_with(
        dl,
        StepOptions {
            r_hat,
            n_samples,
            noise_std_frac: noise_std,
            noise_in_feedback: true,
        },
        rng,
    )
}

pub fn step_response_with<R: Rng + ?Sized>(
    dl: &DiscreteLoop,
    opts: StepOptions,
    rng: &mut R,
) -> Result<Vec<f64>, PlantError> {
    if opts.n_samples < 2 {
        return Err(PlantError::BadSampleCount(opts.n_samples));
    }
    if opts.r_hat == 0.0 {
        return Err(PlantError::ZeroReference);
    }
    let n = dl.n_states();
    let has_noise_input = dl.b.ncols() >= 2;
    let sigma = opts.noise_std_frac * opts.r_hat.abs();
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma > 0"));

    let mut x = DVector::zeros(n);
    let mut u = DVector::zeros(dl.b.ncols());
    u[0] = opts.r_hat;
    let mut y = Vec::with_capacity(opts.n_samples);
    for _ in 0..opts.n_samples {
        let v = normal.as_ref().map_or(0.0, |d| d.sample(rng));
        if has_noise_input {
            u[1] = if opts.noise_in_feedback { v } else { 0.0 };
        }
        let clean = (&dl.c * &x + &dl.d * &u)[(0, 0)];
        y.push(clean + v);
        x = &dl.a * &x + &dl.b * &u;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn g3_coefficients() {
        let g3 = benchmark_plant(PlantId::G3);
        assert_eq!(g3.num, vec![1.0, -5.0]);
        assert_eq!(g3.den, vec![1.0, 30.0, 200.0]);
    }

    #[test]
    fn benchmark_dc_gains_are_exactly_one() {
        for id in [PlantId::G1, PlantId::G2, PlantId::G3] {
            assert_eq!(benchmark_plant(id).dc_gain(), 1.0, "{id}");
        }
    }

    #[test]
    fn g2_denominator_is_binomial_expansion() {
        let g2 = benchmark_plant(PlantId::G2);
        // (1 + 0.01 s)^8: C(8,k) * 0.01^k
        let mut binom = 1.0f64;
        for (k, &coeff) in g2.den.iter().enumerate() {
            if k > 0 {
                binom *= (8 - k + 1) as f64 / k as f64;
            }
            let want = binom * 0.01f64.powi(k as i32);
            assert!(
                (coeff - want).abs() <= 1e-15 * want.abs(),
                "k={k}: {coeff} vs {want}"
            );
        }
    }

    #[test]
    fn pade_table_for_five_second_delay() {
        let p = pade_delay(5.0, 3).unwrap();
        let want_num = [1.0, -2.5, 2.5, -25.0 / 24.0];
        let want_den = [1.0, 2.5, 2.5, 25.0 / 24.0];
        for i in 0..4 {
            assert!((p.num[i] - want_num[i]).abs() < 1e-12);
            assert!((p.den[i] - want_den[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pade_is_all_pass() {
        let p = pade_delay(5.0, 3).unwrap();
        assert_eq!(p.eval(Complex::new(0.0, 0.0)).re, 1.0);
        for k in 1..=20 {
            let w = 0.1 * k as f64;
            let mag = p.eval(Complex::new(0.0, w)).norm();
            assert!((mag - 1.0).abs() < 1e-12, "w={w}: |G|={mag}");
        }
    }

    #[test]
    fn pade_rejects_bad_inputs() {
        assert!(matches!(pade_delay(0.0, 3), Err(PlantError::NonPositiveDelay(_))));
        assert!(matches!(pade_delay(-1.0, 3), Err(PlantError::NonPositiveDelay(_))));
        assert!(matches!(pade_delay(1.0, 0), Err(PlantError::BadPadeOrder(0))));
    }

    #[test]
    fn first_order_canonical_form() {
        let tf = TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let ss = tf_to_ss(&tf).unwrap();
        assert_eq!(ss.a[(0, 0)], -1.0);
        assert_eq!(ss.b[(0, 0)], 1.0);
        assert_eq!(ss.c[(0, 0)], 1.0);
        assert_eq!(ss.d[(0, 0)], 0.0);
    }

    #[test]
    fn g3_realization_has_two_states() {
        let ss = tf_to_ss(&benchmark_plant(PlantId::G3)).unwrap();
        assert_eq!(ss.n_states(), 2);
    }

    #[test]
    fn improper_tf_rejected() {
        let tf = TransferFunction::new(vec![0.0, 0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(tf_to_ss(&tf), Err(PlantError::Improper)));
    }

    #[test]
    fn static_loop_dc_gain_is_half() {
        // plant y = u, controller u = e (both stateless unit gains)
        let unit = StateSpace {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, 1.0),
        };
        let cl = closed_loop(&unit, &unit).unwrap();
        assert_eq!(cl.d[(0, 0)], 0.5);
        assert_eq!(cl.d[(0, 1)], -0.5);
    }

    #[test]
    fn integrating_controller_forces_unit_dc_gain() {
        // plant 1/(s+1), controller 1 + 1/s
        let plant = tf_to_ss(&TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        let ctrl = tf_to_ss(&TransferFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap()).unwrap();
        let cl = closed_loop(&plant, &ctrl).unwrap();
        assert!(cl.is_hurwitz());
        assert!((cl.dc_gain(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zoh_scalar_and_integrator() {
        let lag = StateSpace {
            a: DMatrix::from_element(1, 1, -1.0),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::zeros(1, 1),
        };
        let dl = discretize_zoh(&lag, 0.1).unwrap();
        assert!((dl.a[(0, 0)] - (-0.1f64).exp()).abs() < 1e-14);

        let integ = StateSpace {
            a: DMatrix::zeros(1, 1),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::zeros(1, 1),
        };
        let dl = discretize_zoh(&integ, 0.25).unwrap();
        assert!((dl.a[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((dl.b[(0, 0)] - 0.25).abs() < 1e-14);

        assert!(matches!(discretize_zoh(&integ, 0.0), Err(PlantError::BadTimeStep(_))));
    }

    #[test]
    fn step_response_settles_and_starts_at_zero() {
        let plant = tf_to_ss(&TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        let ctrl = tf_to_ss(&TransferFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap()).unwrap();
        let cl = closed_loop(&plant, &ctrl).unwrap();
        let dl = discretize_zoh(&cl, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = step_response(&dl, 1.0, 2000, 0.0, &mut rng).unwrap();
        assert_eq!(y[0], 0.0, "strictly proper loop: no instantaneous response");
        assert!((y[1999] - 1.0).abs() < 0.01, "settled to {}", y[1999]);
    }

    #[test]
    fn noisy_traces_are_seed_deterministic() {
        let plant = tf_to_ss(&benchmark_plant(PlantId::G3)).unwrap();
        let ctrl = tf_to_ss(&TransferFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap()).unwrap();
        let cl = closed_loop(&plant, &ctrl).unwrap();
        let dl = discretize_zoh(&cl, 0.01).unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            step_response(&dl, 1.0, 100, 0.05, &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn step_response_validates_inputs() {
        let plant = tf_to_ss(&benchmark_plant(PlantId::G3)).unwrap();
        let dl = discretize_zoh(&plant, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            step_response(&dl, 1.0, 1, 0.0, &mut rng),
            Err(PlantError::BadSampleCount(1))
        ));
        assert!(matches!(
            step_response(&dl, 0.0, 10, 0.0, &mut rng),
            Err(PlantError::ZeroReference)
        ));
    }

    #[test]
    fn plant_config_roundtrip_with_delay() {
        let cfg: PlantConfig =
            serde_json::from_str(r#"{"num": [1.0], "den": [1.0, 20.0], "delay": 5.0}"#).unwrap();
        let tf = cfg.to_transfer_function().unwrap();
        let g1 = benchmark_plant(PlantId::G1);
        assert_eq!(tf.den.len(), g1.den.len());
        for (a, b) in tf.num.iter().zip(&g1.num) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
