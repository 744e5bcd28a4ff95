//! Adaptive Dormand–Prince 5(4) integration of mass-action systems.

use crate::crn::{ReactionNetwork, SystemState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration horizon in seconds.
    pub t_final: f64,
    /// Upper bound on attempted steps (accepted plus rejected).
    pub max_steps: usize,
    /// Stop once `‖dx/dt‖∞` drops below this. Zero disables the check.
    pub steady_state_threshold: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            t_final: 20.0,
            max_steps: 10_000_000,
            steady_state_threshold: 1e-8,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("t_final", self.t_final)?;
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be positive"));
        }
        if !(self.steady_state_threshold.is_finite() && self.steady_state_threshold >= 0.0) {
            return Err(Error::config(
                "steady_state_threshold",
                "must be a nonnegative number",
            ));
        }
        Ok(())
    }

    /// Copy with steady-state detection switched off.
    pub fn full_horizon(&self) -> Self {
        IntegratorConfig {
            steady_state_threshold: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TimeLimit,
    SteadyState,
    StepLimit,
}

/// Every accepted step of an integration, starting with the initial condition.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> SystemState {
        SystemState::new(
            self.final_time(),
            self.states.last().expect("trajectory is never empty").clone(),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time series of one species.
    pub fn series(&self, id: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[id]).collect()
    }

    /// CSV with header `t,<names>` and one row per accepted step.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for v in state {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates `network` from `initial` until `t_final`, a steady state, or the step limit.
pub fn integrate(
    network: &ReactionNetwork,
    initial: &SystemState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if initial.len() != network.n_species() {
        return Err(Error::DimensionMismatch {
            expected: network.n_species(),
            found: initial.len(),
        });
    }
    if let Some(s) = initial.concentrations.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial concentration of `{}` is negative",
            network.species()[s].name
        )));
    }
    integrate_with(
        |x, dx| network.eval_into(x, dx),
        &initial.concentrations,
        initial.time,
        cfg,
        |i| network.species()[i].name.clone(),
    )
}

/// Integrates and returns the terminal state; a step-limit stop is an error.
pub fn equilibrium(
    network: &ReactionNetwork,
    initial: &SystemState,
    cfg: &IntegratorConfig,
) -> Result<SystemState> {
    let traj = integrate(network, initial, cfg)?;
    if traj.terminated_by == Termination::StepLimit {
        return Err(Error::StepLimit {
            max_steps: cfg.max_steps,
            time: traj.final_time(),
        });
    }
    Ok(traj.final_state())
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_NONFINITE_RETRIES: usize = 30;
// Upper bound on the step as a fraction of the horizon. Without it the
// controller drifts to the stability boundary near a fixed point, where the
// deviation stops decaying and sits at the tolerance level.
const MAX_STEP_FRACTION: f64 = 0.05;

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let sum: f64 = v.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum();
    (sum / v.len() as f64).sqrt()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Dormand–Prince integration of an arbitrary right-hand side.
///
/// Components are clamped to be nonnegative after every accepted step.
/// `name_of` labels components in error messages.
pub fn integrate_with<F, N>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    cfg: &IntegratorConfig,
    name_of: N,
) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
    N: Fn(usize) -> String,
{
    cfg.validate()?;
    let dim = y0.len();
    if let Some(i) = y0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            species: name_of(i),
            time: t0,
        });
    }

    let t_end = t0 + cfg.t_final;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut times = vec![t];
    let mut states = vec![y.clone()];

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut scale = vec![0.0; dim];

    rhs(&y, &mut k1);
    let steady = |f: &[f64]| cfg.steady_state_threshold > 0.0 && max_norm(f) < cfg.steady_state_threshold;
    if steady(&k1) || dim == 0 {
        return Ok(Trajectory {
            times,
            states,
            terminated_by: Termination::SteadyState,
        });
    }

    // Initial step guess (Hairer, Nørsett & Wanner, II.4).
    for i in 0..dim {
        scale[i] = cfg.abs_tol + cfg.rel_tol * y[i].abs();
    }
    let d0 = rms_norm(&y, &scale);
    let d1 = rms_norm(&k1, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    for i in 0..dim {
        stage[i] = y[i] + h0 * k1[i];
    }
    rhs(&stage, &mut k2);
    for i in 0..dim {
        err[i] = k2[i] - k1[i];
    }
    let d2 = rms_norm(&err, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h_max = cfg.t_final * MAX_STEP_FRACTION;
    let mut h = (100.0 * h0).min(h1).min(h_max);

    let mut attempts = 0usize;
    let mut nonfinite_streak = 0usize;
    let mut last_rejected = false;

    loop {
        if t >= t_end {
            return Ok(Trajectory {
                times,
                states,
                terminated_by: Termination::TimeLimit,
            });
        }
        if attempts >= cfg.max_steps {
            return Ok(Trajectory {
                times,
                states,
                terminated_by: Termination::StepLimit,
            });
        }
        attempts += 1;

        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for i in 0..dim {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        rhs(&stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(&stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(&stage, &mut k4);
        for i in 0..dim {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(&stage, &mut k5);
        for i in 0..dim {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(&stage, &mut k6);
        for i in 0..dim {
            y_new[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(&y_new, &mut k7);
        for i in 0..dim {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            scale[i] = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
        }
        let err_norm = rms_norm(&err, &scale);

        if !err_norm.is_finite() {
            nonfinite_streak += 1;
            if nonfinite_streak > MAX_NONFINITE_RETRIES {
                let bad = y_new
                    .iter()
                    .chain(&err)
                    .position(|v| !v.is_finite())
                    .map(|i| i % dim)
                    .unwrap_or(0);
                return Err(Error::NonFinite {
                    species: name_of(bad),
                    time: t,
                });
            }
            h *= MIN_FACTOR;
            last_rejected = true;
            continue;
        }
        nonfinite_streak = 0;

        if err_norm <= 1.0 {
            t = if last { t_end } else { t + h };
            let mut clamped = false;
            for v in y_new.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    clamped = true;
                }
            }
            std::mem::swap(&mut y, &mut y_new);
            if clamped {
                rhs(&y, &mut k1);
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            times.push(t);
            states.push(y.clone());

            if steady(&k1) {
                return Ok(Trajectory {
                    times,
                    states,
                    terminated_by: Termination::SteadyState,
                });
            }

            let mut factor = if err_norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(h_max);
            last_rejected = false;
        } else {
            h *= (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            last_rejected = true;
        }
    }
}

/// Least-squares slope of `ln(error)` against time, using only samples with
/// `lo <= error <= hi`. `None` when fewer than three samples qualify.
pub fn tail_log_slope(times: &[f64], errors: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e >= lo && e <= hi && e > 0.0)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_l)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
