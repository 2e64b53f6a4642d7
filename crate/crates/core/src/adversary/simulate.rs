use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LearnerError, BLOWUP_NORM};
use crate::deception::Plant;
use crate::matsolve::Matrix;

/// Sum of sinusoids added to the attack channel, one set per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub amplitude: f64,
    /// `frequencies[c]` and `phases[c]` drive attack channel `c` (rad/s, rad).
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<Vec<f64>>,
}

impl Exploration {
    pub fn none(channels: usize) -> Self {
        Self {
            amplitude: 0.0,
            frequencies: vec![Vec::new(); channels],
            phases: vec![Vec::new(); channels],
        }
    }

    /// `2·(n(n+1)/2 + n·m_a)` sinusoids per channel with distinct
    /// frequencies drawn from [0.1, 50] rad/s.
    pub fn seeded(n: usize, m_a: usize, amplitude: f64, seed: u64) -> Self {
        let count = 2 * (n * (n + 1) / 2 + n * m_a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frequencies = Vec::with_capacity(m_a);
        let mut phases = Vec::with_capacity(m_a);
        for _ in 0..m_a {
            let mut freqs: Vec<f64> = Vec::with_capacity(count);
            while freqs.len() < count {
                let f = rng.random_range(0.1..=50.0);
                if freqs.iter().all(|g: &f64| (g - f).abs() > 1e-3) {
                    freqs.push(f);
                }
            }
            frequencies.push(freqs);
            phases.push((0..count).map(|_| rng.random_range(0.0..TAU)).collect());
        }
        Self {
            amplitude,
            frequencies,
            phases,
        }
    }

    pub fn channels(&self) -> usize {
        self.frequencies.len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels(),
            self.frequencies.iter().zip(&self.phases).map(|(fs, ps)| {
                self.amplitude
                    * fs.iter()
                        .zip(ps)
                        .map(|(f, p)| (f * t + p).sin())
                        .sum::<f64>()
            }),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub x0: Vec<f64>,
    /// Seconds.
    pub horizon: f64,
    /// RK4 step in seconds.
    pub dt: f64,
    pub exploration: Exploration,
}

impl TrajectorySpec {
    pub fn new(x0: Vec<f64>, horizon: f64, exploration: Exploration) -> Self {
        Self {
            x0,
            horizon,
            dt: 1e-3,
            exploration,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn validate(&self, plant: &Plant) -> Result<(), LearnerError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LearnerError::InvalidSpec(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(LearnerError::InvalidSpec(format!(
                "horizon {} is shorter than one step",
                self.horizon
            )));
        }
        if self.x0.len() != plant.n() || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::InvalidSpec(format!(
                "x0 must hold {} finite entries",
                plant.n()
            )));
        }
        if self.exploration.channels() != plant.m_a() {
            return Err(LearnerError::InvalidSpec(format!(
                "exploration drives {} channels, plant has {}",
                self.exploration.channels(),
                plant.m_a()
            )));
        }
        Ok(())
    }
}

/// Samples on the uniform grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Attack input `a(t_k) = Kx(t_k) + e(t_k)`.
    pub attacks: Vec<DVector<f64>>,
}

/// Integrates `ẋ = (A + B_uΛ)x + B_a(Kx + e(t))` with fixed-step RK4.
pub fn simulate_trajectory(
    plant: &Plant,
    lambda: &Matrix,
    attack_gain: &Matrix,
    spec: &TrajectorySpec,
) -> Result<Trajectory, LearnerError> {
    spec.validate(plant)?;
    if lambda.shape() != (plant.m_u(), plant.n()) || attack_gain.shape() != (plant.m_a(), plant.n())
    {
        return Err(LearnerError::DimensionMismatch(
            "Lambda or attack gain has the wrong shape".into(),
        ));
    }
    let closed = plant.spoofed(lambda) + &plant.b_a * attack_gain;
    let b_a = &plant.b_a;
    let explore = &spec.exploration;
    let f = |t: f64, x: &DVector<f64>| &closed * x + b_a * explore.eval(t);

    let steps = spec.steps();
    let dt = spec.dt;
    let mut x = DVector::from_column_slice(&spec.x0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut attacks = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        times.push(t);
        attacks.push(attack_gain * &x + explore.eval(t));
        states.push(x.clone());
        if k == steps {
            break;
        }
        let k1 = f(t, &x);
        let k2 = f(t + dt / 2.0, &(&x + &k1 * (dt / 2.0)));
        let k3 = f(t + dt / 2.0, &(&x + &k2 * (dt / 2.0)));
        let k4 = f(t + dt, &(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let norm = x.norm();
        if norm.is_nan() || norm > BLOWUP_NORM {
            return Err(LearnerError::Blowup { time: t + dt });
        }
    }
    Ok(Trajectory {
        dt,
        times,
        states,
        attacks,
    })
}
