//! Invariant checks run by `crn-neuron verify`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{AlnnConfig, Evaluation};
use crate::crn::{ReactionNetwork, Role, SystemState};
use crate::dual_rail::{encode_all, DualRailValue};
use crate::error::Result;
use crate::feedforward::{
    closed_form_output, compile_feedforward, compute_p, finite_rate_equilibrium, forward,
    FeedforwardNetwork, PPair,
};
use crate::learner::{
    build_slow_system, compile_learning_with_catalyst, learn_step_simulated, resolve_fast,
    slow_equilibrium, FastBoundaryState, LearningNetwork,
};
use crate::ode::{tail_log_slope, IntegratorConfig, Trajectory};
use crate::pipeline::{lms_oracle, rng_for, samples_from_config, train};

const STREAM_VERIFY: u64 = 7;

/// Error band used when fitting the forward tail.
pub const FORWARD_FIT_BAND: (f64, f64) = (1e-7, 1e-2);
/// Error band used when fitting the slow-system tail. The weights approach
/// their limit as `t² e^{−t}`, so the band sits deep in the tail.
pub const SLOW_FIT_BAND: (f64, f64) = (1e-14, 1e-8);

/// Integrator settings for the forward tail fit.
pub fn forward_fit_integrator() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        t_final: 30.0,
        ..IntegratorConfig::default()
    }
    .full_horizon()
}

/// Integrator settings for the slow-system tail fit.
pub fn slow_fit_integrator() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-15,
        abs_tol: 1e-19,
        t_final: 60.0,
        ..IntegratorConfig::default()
    }
    .full_horizon()
}

/// [`tail_log_slope`] with the band's lower edge raised to 100 times the
/// numerical noise floor, taken as the median error over the last tenth of
/// the horizon.
pub fn tail_slope_above_floor(times: &[f64], errors: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let t_end = *times.last()?;
    let mut tail: Vec<f64> = times
        .iter()
        .zip(errors)
        .filter(|(t, _)| **t >= 0.9 * t_end)
        .map(|(_, e)| *e)
        .collect();
    if tail.is_empty() {
        return None;
    }
    tail.sort_by(f64::total_cmp);
    let floor = tail[tail.len() / 2];
    tail_log_slope(times, errors, lo.max(100.0 * floor), hi)
}

/// `|y(t) − y*|₁` against the finite-rate fixed point of the output rails.
pub fn forward_error_series(net: &FeedforwardNetwork, traj: &Trajectory, p: PPair) -> Vec<f64> {
    let target = finite_rate_equilibrium(p, net.k, net.k_inf);
    traj.states
        .iter()
        .map(|s| {
            (s[net.output.plus] - target.plus).abs() + (s[net.output.minus] - target.minus).abs()
        })
        .collect()
}

/// Tail log-slope of a forward run started from `y_init`.
pub fn forward_decay_slope(
    net: &FeedforwardNetwork,
    x: &[DualRailValue],
    w: &[DualRailValue],
    y_init: DualRailValue,
) -> Result<Option<f64>> {
    let out = forward(x, w, &forward_fit_integrator(), net, y_init)?;
    let errors = forward_error_series(net, &out.trajectory, compute_p(x, w)?);
    let (lo, hi) = FORWARD_FIT_BAND;
    Ok(tail_slope_above_floor(&out.trajectory.times, &errors, lo, hi))
}

/// Max-norm distance of every slow variable from the closed-form equilibrium.
pub fn slow_error_series(
    net: &LearningNetwork,
    traj: &Trajectory,
    fb: &FastBoundaryState,
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
) -> Result<Vec<f64>> {
    let eq = slow_equilibrium(fb, x_tilde, w_tilde, net.eta)?;
    Ok(traj
        .states
        .iter()
        .map(|s| {
            let state = SystemState::new(0.0, s.clone());
            net.read_equilibrium(&state).max_abs_diff(&eq)
        })
        .collect())
}

/// Tail log-slope of the slow subsystem from a resolved fast boundary.
pub fn slow_decay_slope(
    net: &LearningNetwork,
    fb: &FastBoundaryState,
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
) -> Result<Option<f64>> {
    let (_, traj) = learn_step_simulated(fb, x_tilde, w_tilde, &slow_fit_integrator(), net)?;
    let errors = slow_error_series(net, &traj, fb, x_tilde, w_tilde)?;
    let (lo, hi) = SLOW_FIT_BAND;
    Ok(tail_slope_above_floor(&traj.times, &errors, lo, hi))
}

/// Largest drift of any conserved catalyst along a trajectory.
pub fn catalyst_drift(network: &ReactionNetwork, traj: &Trajectory) -> f64 {
    let catalysts = network.conserved_catalysts();
    let first = &traj.states[0];
    traj.states
        .iter()
        .flat_map(|s| catalysts.iter().map(move |&c| (s[c] - first[c]).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity.
    pub value: f64,
    /// Bound the value was compared against.
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:<6}  {:>15}  {:>15}  detail\n", "check", "status", "value", "threshold");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:<6}  {:>15.9e}  {:>15.9e}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.threshold,
                c.detail
            );
        }
        out
    }
}

fn check(name: &'static str, value: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: value <= threshold,
        value,
        threshold,
        detail,
    }
}

struct Instances {
    rng: rand_chacha::ChaCha8Rng,
}

impl Instances {
    fn normal(&mut self, sd: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        sd * z
    }

    fn encoded(&mut self, len: usize, sd: f64) -> Result<Vec<DualRailValue>> {
        let values: Vec<f64> = (0..len).map(|_| self.normal(sd)).collect();
        encode_all(&values)
    }

    /// Inputs with the bias in front, and weights, for `n` inputs.
    fn forward_instance(&mut self, n: usize) -> Result<(Vec<DualRailValue>, Vec<DualRailValue>)> {
        let mut x = vec![FeedforwardNetwork::bias()];
        x.extend(self.encoded(n, 1.0)?);
        Ok((x, self.encoded(n + 1, 1.0)?))
    }

    fn learn_instance(
        &mut self,
        n: usize,
    ) -> Result<(FastBoundaryState, Vec<DualRailValue>, Vec<DualRailValue>)> {
        let d = DualRailValue::encode(self.normal(2.0))?;
        let y = DualRailValue::encode(self.normal(2.0))?;
        let (x, w) = self.forward_instance(n)?;
        Ok((resolve_fast(d, y)?, x, w))
    }

    fn random_y(&mut self) -> Result<DualRailValue> {
        let a: f64 = self.rng.random_range(0.0..3.0);
        let b: f64 = self.rng.random_range(0.0..3.0);
        DualRailValue::new(a, b)
    }
}

const FORWARD_INSTANCES: usize = 20;
const LEARN_INSTANCES: usize = 10;
const FIT_INSTANCES: usize = 5;

/// Runs every check for `cfg`.
pub fn verify(cfg: &AlnnConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let n = cfg.n;
    let ff = compile_feedforward(n, cfg.k, cfg.k_inf)?;
    let learn = compile_learning_with_catalyst(n, cfg.eta, cfg.k_l_inf, cfg.k1, cfg.beta0)?;
    let mut inst = Instances {
        rng: rng_for(cfg.seed, STREAM_VERIFY),
    };
    let mut checks = vec![structure_check(&ff, &learn, cfg)?];

    // Forward pass.
    let mut diff_err: f64 = 0.0;
    let mut ramp_err: f64 = 0.0;
    let mut finite_err: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for j in 0..FORWARD_INSTANCES {
        let (x, w) = inst.forward_instance(n)?;
        let y0 = if j % 2 == 0 { DualRailValue::ZERO } else { inst.random_y()? };
        let p = compute_p(&x, &w)?;
        let out = forward(&x, &w, &cfg.integrator, &ff, y0)?;
        diff_err = diff_err.max((out.y.decode() - p.decode()).abs());
        let ramp = closed_form_output(p);
        let tol = (1e-2 * p.decode().abs()).max(1e-3);
        ramp_err = ramp_err.max(
            (out.y.plus - ramp.plus)
                .abs()
                .max((out.y.minus - ramp.minus).abs())
                / tol,
        );
        let fin = finite_rate_equilibrium(p, cfg.k, cfg.k_inf);
        finite_err = finite_err.max(
            (out.raw.plus - fin.plus)
                .abs()
                .max((out.raw.minus - fin.minus).abs()),
        );
        residual = residual.max(out.raw.plus.min(out.raw.minus));
        drift = drift.max(catalyst_drift(&ff.network, &out.trajectory));
    }
    checks.push(check(
        "difference_identity",
        diff_err,
        1e-4,
        format!("max |decode(y) - (p+ - p-)| over {FORWARD_INSTANCES} instances"),
    ));
    checks.push(check(
        "ramp",
        ramp_err,
        1.0,
        "canonical output vs closed form, in units of max(1e-2|p+ - p-|, 1e-3)".into(),
    ));
    checks.push(check(
        "annihilation_sharpness",
        finite_err,
        1e-4,
        format!(
            "residual min(y+, y-) = {:.9e} at k_inf = {}; raw rails vs finite-rate fixed point",
            residual, cfg.k_inf
        ),
    ));

    // Learn step.
    let mut supp_err: f64 = 0.0;
    let mut update_err: f64 = 0.0;
    for _ in 0..LEARN_INSTANCES {
        let (fb, x, w) = inst.learn_instance(n)?;
        let closed = slow_equilibrium(&fb, &x, &w, cfg.eta)?;
        let (sim, traj) = learn_step_simulated(&fb, &x, &w, &cfg.integrator, &learn)?;
        supp_err = supp_err.max(sim.max_abs_diff(&closed));
        let e = fb.d.decode() - fb.y_tilde.decode();
        for (i, wn) in sim.w_new.iter().enumerate() {
            let lms = w[i].decode() + cfg.eta * x[i].decode() * e;
            update_err = update_err.max((wn.decode() - lms).abs());
        }
        drift = drift.max(catalyst_drift(&learn.network, &traj));
    }
    let k1_beta = cfg.k1 * cfg.beta0;
    let premise = if (k1_beta - 1.0).abs() > 1e-12 {
        format!("; k1*beta0 = {k1_beta} (update requires 1)")
    } else {
        String::new()
    };
    checks.push(check(
        "catalyst_conservation",
        drift,
        1e-9,
        "max drift of conserved catalysts along forward and learn runs".into(),
    ));
    checks.push(check(
        "supp4_agreement",
        supp_err,
        1e-3,
        format!("simulated slow system vs closed-form equilibrium{premise}"),
    ));
    checks.push(check(
        "weight_update",
        update_err,
        1e-3,
        format!("decoded weights vs w + eta*x*(d - y){premise}"),
    ));

    // Training against the LMS oracle.
    let samples = samples_from_config(cfg)?;
    let closed_cfg = AlnnConfig {
        evaluation: Evaluation::Closed,
        ..cfg.clone()
    };
    let crn = train(&samples, &closed_cfg)?;
    let oracle = lms_oracle(&samples, &closed_cfg)?;
    let closed_dev = if crn.records.len() == oracle.records.len() {
        crn.max_weight_deviation(&oracle)
    } else {
        f64::INFINITY
    };
    // Summation order in p matches plain arithmetic only for a single input.
    let closed_tol = if n == 1 { 0.0 } else { 1e-9 };
    checks.push(check(
        "oracle_equivalence_closed",
        closed_dev,
        closed_tol,
        format!("{} iterations, closed-form steps", crn.records.len()),
    ));
    let short = AlnnConfig {
        evaluation: Evaluation::Simulated,
        max_epochs: cfg.max_epochs.min(2),
        ..cfg.clone()
    };
    let short_samples = &samples[..samples.len().min(5)];
    let sim = train(short_samples, &short)?;
    let sim_oracle = lms_oracle(short_samples, &short)?;
    checks.push(check(
        "oracle_equivalence_simulated",
        sim.max_weight_deviation(&sim_oracle),
        1e-2,
        format!("{} iterations, integrated steps", sim.records.len()),
    ));

    // Exponential convergence.
    let mut ff_slope = f64::NEG_INFINITY;
    let mut slow_slope = f64::NEG_INFINITY;
    for _ in 0..FIT_INSTANCES {
        let (x, w) = inst.forward_instance(n)?;
        let s = forward_decay_slope(&ff, &x, &w, DualRailValue::ZERO)?.unwrap_or(f64::INFINITY);
        ff_slope = ff_slope.max(s);
        let (fb, x, w) = inst.learn_instance(n)?;
        let s = slow_decay_slope(&learn, &fb, &x, &w)?.unwrap_or(f64::INFINITY);
        slow_slope = slow_slope.max(s);
    }
    checks.push(check(
        "forward_exponential_rate",
        ff_slope,
        -0.5,
        format!("largest tail log-slope over {FIT_INSTANCES} runs"),
    ));
    checks.push(check(
        "slow_exponential_rate",
        slow_slope,
        -0.9,
        format!("largest tail log-slope over {FIT_INSTANCES} runs{premise}"),
    ));

    Ok(VerifyReport { checks })
}

fn structure_check(
    ff: &FeedforwardNetwork,
    learn: &LearningNetwork,
    cfg: &AlnnConfig,
) -> Result<CheckResult> {
    let n = cfg.n;
    let mut problems = Vec::new();
    if ff.network.reactions().len() != 4 * (n + 1) + 3 {
        problems.push("feedforward reaction count");
    }
    if learn.network.reactions().len() != 8 + 10 * (n + 1) {
        problems.push("learning reaction count");
    }
    let ff_expected: std::collections::BTreeSet<usize> =
        ff.inputs.iter().chain(&ff.weights).flat_map(|r| [r.plus, r.minus]).collect();
    if ff.network.conserved_catalysts() != ff_expected {
        problems.push("feedforward catalysts");
    }
    let mut learn_expected: std::collections::BTreeSet<usize> = learn
        .aux_inputs
        .iter()
        .chain(&learn.aux_weights)
        .flat_map(|r| [r.plus, r.minus])
        .collect();
    learn_expected.insert(learn.catalyst_b);
    if learn.network.conserved_catalysts() != learn_expected
        || learn.network.find(Role::CatalystB, None) != Some(learn.catalyst_b)
    {
        problems.push("learning catalysts");
    }
    let ones = vec![DualRailValue::new(1.0, 0.5)?; n + 1];
    let fb = resolve_fast(DualRailValue::new(1.0, 0.0)?, DualRailValue::new(0.0, 1.0)?)?;
    let (u, _) = build_slow_system(&ones, &ones, cfg.eta, &fb)?;
    let triangular = (0..u.nrows()).all(|i| (i + 1..u.ncols()).all(|j| u[(i, j)] == 0.0));
    let diagonal = (0..u.nrows()).all(|i| u[(i, i)] == -1.0);
    if !(triangular && diagonal) {
        problems.push("slow-system matrix");
    }
    Ok(check(
        "structure",
        problems.len() as f64,
        0.0,
        if problems.is_empty() {
            "reaction counts, catalyst sets, lower-triangular U".into()
        } else {
            format!("mismatch: {}", problems.join(", "))
        },
    ))
}
