//! Training loop: assignment, forward pass, permeation into the learning
//! compartment, learn step, permeation back.
//!
//! The two compartments are simulated as separate [`SystemState`]s. Species
//! cross the walls as instantaneous transfers between phases.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::config::{AlnnConfig, Evaluation, FastPath, TerminationPolicy, YInit};
use crate::crn::SystemState;
use crate::dual_rail::{encode_all, DualRailValue};
use crate::error::{Error, Result};
use crate::feedforward::{
    closed_form_output, compile_feedforward, compute_p, forward, FeedforwardNetwork,
};
use crate::learner::{
    compile_learning_with_catalyst, learn_step_full, learn_step_simulated, resolve_fast,
    slow_equilibrium, LearningNetwork, SlowEquilibrium,
};

// Independent RNG streams derived from one seed.
const STREAM_SAMPLES: u64 = 0;
const STREAM_WEIGHTS: u64 = 1;
const STREAM_Y_INIT: u64 = 2;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Output rails at the start of a forward pass.
pub(crate) fn initial_output(kind: YInit, rng: &mut ChaCha8Rng) -> Result<DualRailValue> {
    match kind {
        YInit::Zero => Ok(DualRailValue::ZERO),
        YInit::Random => {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            DualRailValue::new(a.abs(), b.abs())
        }
    }
}

/// Generator for forward-pass initial outputs under `seed`.
pub(crate) fn y_init_rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, STREAM_Y_INIT)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Inputs without the bias.
    pub x: Vec<f64>,
    /// Desired output.
    pub d: f64,
}

/// Samples `d = intercept + Σ c_i x_i + ε` with `x_i ~ U[x_lo, x_hi]` and
/// `ε ~ U[−noise_bound, noise_bound]`.
pub fn generate_linear_samples(
    count: usize,
    coefficients: &[f64],
    intercept: f64,
    x_lo: f64,
    x_hi: f64,
    noise_bound: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::config("samples", "need at least one sample"));
    }
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
        return Err(Error::config("x_lo", format!("invalid range [{x_lo}, {x_hi}]")));
    }
    if !(noise_bound.is_finite() && noise_bound >= 0.0) {
        return Err(Error::config("noise_bound", "must be nonnegative"));
    }
    let mut rng = rng_for(seed, STREAM_SAMPLES);
    let xs = Uniform::new_inclusive(x_lo, x_hi).expect("range checked above");
    Ok((0..count)
        .map(|_| {
            let x: Vec<f64> = coefficients.iter().map(|_| xs.sample(&mut rng)).collect();
            let noise = if noise_bound > 0.0 {
                rng.random_range(-noise_bound..=noise_bound)
            } else {
                0.0
            };
            let clean: f64 = intercept + coefficients.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>();
            Sample { x, d: clean + noise }
        })
        .collect())
}

/// One-dimensional case of [`generate_linear_samples`].
pub fn generate_line_samples(
    m: usize,
    slope: f64,
    intercept: f64,
    x_lo: f64,
    x_hi: f64,
    noise_bound: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    generate_linear_samples(m, &[slope], intercept, x_lo, x_hi, noise_bound, seed)
}

/// Training set described by the config; every input shares `slope`.
pub fn samples_from_config(cfg: &AlnnConfig) -> Result<Vec<Sample>> {
    let s = &cfg.samples;
    generate_linear_samples(
        s.count,
        &vec![s.slope; cfg.n],
        s.intercept,
        s.x_lo,
        s.x_hi,
        s.noise_bound,
        cfg.seed,
    )
}

/// Initial weights `w_0..w_n ~ N(0, 1)`.
pub fn initial_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, STREAM_WEIGHTS);
    (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based epoch.
    pub epoch: usize,
    /// 0-based position in the sample list.
    pub sample: usize,
    /// Decoded weights after this sample's update, bias first.
    pub weights: Vec<f64>,
    /// Decoded error `d − y` of this sample.
    pub error: f64,
    /// Decoded forward output.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub initial_weights: Vec<f64>,
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    pub epochs_used: usize,
}

impl TrainingTrace {
    pub fn final_weights(&self) -> &[f64] {
        self.records
            .last()
            .map(|r| r.weights.as_slice())
            .unwrap_or(&self.initial_weights)
    }

    /// Largest `|w_a − w_b|` over the common prefix of two traces.
    pub fn max_weight_deviation(&self, other: &TrainingTrace) -> f64 {
        self.records
            .iter()
            .zip(&other.records)
            .flat_map(|(a, b)| a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Mean of `½ e²` over each epoch.
    pub fn epoch_losses(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for r in &self.records {
            if out.len() < r.epoch {
                out.resize(r.epoch, (0.0, 0));
            }
            let slot = &mut out[r.epoch - 1];
            slot.0 += 0.5 * r.error * r.error;
            slot.1 += 1;
        }
        out.into_iter()
            .map(|(sum, n)| if n == 0 { 0.0 } else { sum / n as f64 })
            .collect()
    }

    /// `epoch,sample,w0,…,wn,error,y` rows followed by a summary comment.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,sample");
        for i in 0..self.initial_weights.len() {
            let _ = write!(out, ",w{i}");
        }
        out.push_str(",error,y\n");
        for r in &self.records {
            let _ = write!(out, "{},{}", r.epoch, r.sample);
            for w in &r.weights {
                let _ = write!(out, ",{w}");
            }
            let _ = writeln!(out, ",{},{}", r.error, r.y);
        }
        let _ = writeln!(
            out,
            "# converged={},epochs_used={}",
            self.converged, self.epochs_used
        );
        out
    }
}

fn epoch_converged(policy: TerminationPolicy, epoch: &[TraceRecord], epsilon: f64) -> bool {
    match policy {
        TerminationPolicy::LastSample => epoch.last().is_some_and(|r| r.error.abs() < epsilon),
        TerminationPolicy::AllSamples => {
            !epoch.is_empty() && epoch.iter().all(|r| r.error.abs() < epsilon)
        }
    }
}

fn check_samples(samples: &[Sample], n: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    for (j, s) in samples.iter().enumerate() {
        if s.x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.x.len(),
            });
        }
        if !s.d.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {j} is not finite")));
        }
    }
    Ok(())
}

/// Plain online LMS: `y = Σ x_i w_i`, `w ← w + η x (d − y)`, with the same
/// sample order and stopping rule as [`train`].
pub fn lms_oracle(samples: &[Sample], cfg: &AlnnConfig) -> Result<TrainingTrace> {
    lms_oracle_from(samples, cfg, &initial_weights(cfg.n, cfg.seed))
}

/// [`lms_oracle`] from explicit initial weights. `cfg.eta` is used as is, so a
/// zero rate is accepted here.
pub fn lms_oracle_from(
    samples: &[Sample],
    cfg: &AlnnConfig,
    initial: &[f64],
) -> Result<TrainingTrace> {
    check_samples(samples, cfg.n)?;
    check_weights(initial, cfg.n)?;
    let eta = cfg.eta;
    let mut w = initial.to_vec();
    let mut records = Vec::new();
    let mut converged = false;
    let mut epochs_used = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs_used = epoch;
        let start = records.len();
        for (j, s) in samples.iter().enumerate() {
            let x: Vec<f64> = std::iter::once(1.0).chain(s.x.iter().copied()).collect();
            let y = x.iter().zip(&w).fold(0.0, |acc, (xi, wi)| acc + xi * wi);
            let e = s.d - y;
            for (wi, xi) in w.iter_mut().zip(&x) {
                *wi += eta * (xi * e);
            }
            records.push(TraceRecord {
                epoch,
                sample: j,
                weights: w.clone(),
                error: e,
                y,
            });
        }
        if epoch_converged(cfg.termination_policy, &records[start..], cfg.epsilon) {
            converged = true;
            break;
        }
    }
    Ok(TrainingTrace {
        initial_weights: initial.to_vec(),
        records,
        converged,
        epochs_used,
    })
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial weights must be finite".into()));
    }
    Ok(())
}

/// Moves `X, W, Y` from the feedforward compartment into `X̃, W̃, Ỹ`.
///
/// Transfers add to the destination and empty the source, so a second
/// call with an empty source changes nothing.
pub fn permeate_forward_to_learning(
    ff: &FeedforwardNetwork,
    ff_state: &mut SystemState,
    learn: &LearningNetwork,
    learn_state: &mut SystemState,
) {
    let mut pairs = Vec::with_capacity(2 * ff.inputs.len() + 1);
    for i in 0..ff.inputs.len() {
        pairs.push((ff.inputs[i], learn.aux_inputs[i]));
        pairs.push((ff.weights[i], learn.aux_weights[i]));
    }
    pairs.push((ff.output, learn.aux_output));
    for (src, dst) in pairs {
        for (s, d) in [(src.plus, dst.plus), (src.minus, dst.minus)] {
            let moved = ff_state.get(s);
            learn_state.set(d, learn_state.get(d) + moved);
            ff_state.set(s, 0.0);
        }
    }
}

/// Returns `W` and `X̃ → X` to the feedforward compartment, keeps `B`, and
/// releases every other learning species.
pub fn permeate_learning_to_forward(
    learn: &LearningNetwork,
    learn_state: &mut SystemState,
    ff: &FeedforwardNetwork,
    ff_state: &mut SystemState,
) {
    for i in 0..ff.inputs.len() {
        for (src, dst) in [
            (learn.weights[i], ff.weights[i]),
            (learn.aux_inputs[i], ff.inputs[i]),
        ] {
            for (s, d) in [(src.plus, dst.plus), (src.minus, dst.minus)] {
                ff_state.set(d, ff_state.get(d) + learn_state.get(s));
                learn_state.set(s, 0.0);
            }
        }
    }
    for s in &learn.network.species().to_vec() {
        if s.id != learn.catalyst_b {
            learn_state.set(s.id, 0.0);
        }
    }
}

/// Compiled networks plus the configuration of a training run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub feedforward: FeedforwardNetwork,
    pub learning: LearningNetwork,
    pub config: AlnnConfig,
}

impl Pipeline {
    pub fn new(config: &AlnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            feedforward: compile_feedforward(config.n, config.k, config.k_inf)?,
            learning: compile_learning_with_catalyst(
                config.n,
                config.eta,
                config.k_l_inf,
                config.k1,
                config.beta0,
            )?,
            config: config.clone(),
        })
    }

    /// Runs the chemical training loop from weights drawn with the configured seed.
    pub fn train(&self, samples: &[Sample]) -> Result<TrainingTrace> {
        self.train_from(samples, &initial_weights(self.config.n, self.config.seed))
    }

    /// Runs the chemical training loop from explicit initial weights.
    pub fn train_from(&self, samples: &[Sample], initial: &[f64]) -> Result<TrainingTrace> {
        let cfg = &self.config;
        check_samples(samples, cfg.n)?;
        check_weights(initial, cfg.n)?;
        let ff = &self.feedforward;
        let learn = &self.learning;
        let initial = initial.to_vec();
        let mut ff_state = SystemState::zeros(ff.network.n_species());
        let mut learn_state = SystemState::zeros(learn.network.n_species());
        learn_state.set(learn.catalyst_b, learn.beta0);
        for (rail, w) in ff.weights.iter().zip(encode_all(&initial)?) {
            rail.write(&mut ff_state, w);
        }
        let mut y_rng = y_init_rng(cfg.seed);

        let mut records = Vec::new();
        let mut converged = false;
        let mut epochs_used = 0;
        for epoch in 1..=cfg.max_epochs {
            epochs_used = epoch;
            let start = records.len();
            for (j, sample) in samples.iter().enumerate() {
                let rec = self
                    .step(sample, &mut ff_state, &mut learn_state, &mut y_rng)
                    .map_err(|e| Error::TrainingStep {
                        epoch,
                        sample: j,
                        source: Box::new(e),
                    })?;
                records.push(TraceRecord {
                    epoch,
                    sample: j,
                    ..rec
                });
            }
            if epoch_converged(cfg.termination_policy, &records[start..], cfg.epsilon) {
                converged = true;
                break;
            }
        }
        Ok(TrainingTrace {
            initial_weights: initial,
            records,
            converged,
            epochs_used,
        })
    }

    fn step(
        &self,
        sample: &Sample,
        ff_state: &mut SystemState,
        learn_state: &mut SystemState,
        y_rng: &mut ChaCha8Rng,
    ) -> Result<TraceRecord> {
        let cfg = &self.config;
        let ff = &self.feedforward;
        let learn = &self.learning;

        // Assignment.
        let x_values: Vec<f64> = std::iter::once(1.0).chain(sample.x.iter().copied()).collect();
        let x = encode_all(&x_values)?;
        for (rail, xi) in ff.inputs.iter().zip(&x) {
            rail.write(ff_state, *xi);
        }
        let y_init = initial_output(cfg.y_init, y_rng)?;

        // Feedforward.
        let w = ff.read_weights(ff_state);
        let y = match cfg.evaluation {
            Evaluation::Closed => closed_form_output(compute_p(&x, &w)?),
            Evaluation::Simulated => {
                let out = forward(&x, &w, &cfg.integrator, ff, y_init)?;
                let mut terminal = out.trajectory.final_state();
                terminal.time = 0.0;
                *ff_state = terminal;
                out.y
            }
        };
        ff.output.write(ff_state, y);

        // Into the learning compartment; the desired output is re-assigned.
        permeate_forward_to_learning(ff, ff_state, learn, learn_state);
        learn.desired.write(learn_state, DualRailValue::encode(sample.d)?);

        let d = learn.desired.read(learn_state);
        let y_tilde = learn.aux_output.read(learn_state);
        let x_tilde: Vec<DualRailValue> = learn.aux_inputs.iter().map(|r| r.read(learn_state)).collect();
        let w_tilde: Vec<DualRailValue> = learn.aux_weights.iter().map(|r| r.read(learn_state)).collect();

        let eq: SlowEquilibrium = match (cfg.evaluation, cfg.fast_path) {
            (Evaluation::Closed, _) => {
                let fb = resolve_fast(d, y_tilde)?;
                let mut eq = slow_equilibrium(&fb, &x_tilde, &w_tilde, learn.eta)?;
                // Closed-form steps track plain arithmetic, so keep the weight
                // rails canonical as well.
                for w in eq.w_new.iter_mut() {
                    *w = w.canonicalize();
                }
                learn.desired.write(learn_state, fb.d);
                learn.aux_output.write(learn_state, fb.y_tilde);
                learn.error.write(learn_state, eq.e);
                for i in 0..=cfg.n {
                    learn.delta_weights[i].write(learn_state, eq.delta_w[i]);
                    learn.weights[i].write(learn_state, eq.w_new[i]);
                }
                eq
            }
            (Evaluation::Simulated, FastPath::Closed) => {
                let fb = resolve_fast(d, y_tilde)?;
                let (eq, traj) = learn_step_simulated(&fb, &x_tilde, &w_tilde, &cfg.integrator, learn)?;
                *learn_state = traj.final_state();
                eq
            }
            (Evaluation::Simulated, FastPath::Simulated) => {
                let (eq, traj) = learn_step_full(d, y_tilde, &x_tilde, &w_tilde, &cfg.integrator, learn)?;
                *learn_state = traj.final_state();
                eq
            }
        };
        learn_state.time = 0.0;

        permeate_learning_to_forward(learn, learn_state, ff, ff_state);

        Ok(TraceRecord {
            epoch: 0,
            sample: 0,
            weights: ff.read_weights(ff_state).iter().map(DualRailValue::decode).collect(),
            error: eq.e.decode(),
            y: y.decode(),
        })
    }
}

/// Builds the networks for `cfg` and trains on `samples`.
pub fn train(samples: &[Sample], cfg: &AlnnConfig) -> Result<TrainingTrace> {
    Pipeline::new(cfg)?.train(samples)
}
