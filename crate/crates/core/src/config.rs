//! Run configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ode::IntegratorConfig;

/// When a training run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationPolicy {
    /// Only the last sample of an epoch must satisfy `|e| < ε`.
    LastSample,
    /// Every sample of an epoch must satisfy `|e| < ε`.
    AllSamples,
}

/// Initial output concentrations for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YInit {
    Zero,
    /// Independent `|N(0, 1)|` draws.
    Random,
}

/// How the learning compartment's fast annihilations are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastPath {
    /// Resolve the annihilations in closed form and integrate the slow part.
    Closed,
    /// Integrate the whole learning network at finite `k_l_inf`.
    Simulated,
}

/// Whether training steps are integrated or evaluated from their closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    Simulated,
    Closed,
}

macro_rules! keyword_enum {
    ($ty:ty, $($text:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(format!(
                        "expected one of {}, got `{other}`",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl $ty {
            pub fn as_str(&self) -> &'static str {
                $(if *self == $variant { return $text; })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(TerminationPolicy, "last_sample" => TerminationPolicy::LastSample, "all_samples" => TerminationPolicy::AllSamples);
keyword_enum!(YInit, "zero" => YInit::Zero, "random" => YInit::Random);
keyword_enum!(FastPath, "closed" => FastPath::Closed, "simulated" => FastPath::Simulated);
keyword_enum!(Evaluation, "simulated" => Evaluation::Simulated, "closed" => Evaluation::Closed);

/// How the training set is generated: `d = intercept + slope · Σ x_i + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    pub slope: f64,
    pub intercept: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub noise_bound: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 30,
            slope: -2.0,
            intercept: 5.0,
            x_lo: -2.0,
            x_hi: 2.0,
            noise_bound: 0.3,
        }
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct AlnnConfig {
    /// Input dimension, bias excluded.
    pub n: usize,
    pub eta: f64,
    pub k: f64,
    pub k_inf: f64,
    pub k_l_inf: f64,
    pub k1: f64,
    pub beta0: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub termination_policy: TerminationPolicy,
    pub seed: u64,
    pub y_init: YInit,
    pub fast_path: FastPath,
    pub evaluation: Evaluation,
    pub integrator: IntegratorConfig,
    pub samples: SampleSpec,
}

impl Default for AlnnConfig {
    fn default() -> Self {
        AlnnConfig {
            n: 1,
            eta: 0.2,
            k: 1.0,
            k_inf: 500.0,
            k_l_inf: 500.0,
            k1: 1.0,
            beta0: 1.0,
            epsilon: 0.1,
            max_epochs: 100,
            termination_policy: TerminationPolicy::AllSamples,
            seed: 0,
            y_init: YInit::Zero,
            fast_path: FastPath::Closed,
            evaluation: Evaluation::Simulated,
            integrator: IntegratorConfig::default(),
            samples: SampleSpec::default(),
        }
    }
}

/// Keys reserved for run manifests; the config parser skips them.
pub const MANIFEST_PREFIX: &str = "manifest.";

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

impl AlnnConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = AlnnConfig::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let integ = &mut self.integrator;
        let samples = &mut self.samples;
        match key {
            "n" => self.n = parse_value(key, value)?,
            "eta" => self.eta = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "k_inf" => self.k_inf = parse_value(key, value)?,
            "k_l_inf" => self.k_l_inf = parse_value(key, value)?,
            "k1" => self.k1 = parse_value(key, value)?,
            "beta0" => self.beta0 = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "termination_policy" => self.termination_policy = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "y_init" => self.y_init = parse_value(key, value)?,
            "fast_path" => self.fast_path = parse_value(key, value)?,
            "evaluation" => self.evaluation = parse_value(key, value)?,
            "t_final" => integ.t_final = parse_value(key, value)?,
            "rel_tol" => integ.rel_tol = parse_value(key, value)?,
            "abs_tol" => integ.abs_tol = parse_value(key, value)?,
            "max_steps" => integ.max_steps = parse_value(key, value)?,
            "steady_state_threshold" => integ.steady_state_threshold = parse_value(key, value)?,
            "samples" => samples.count = parse_value(key, value)?,
            "slope" => samples.slope = parse_value(key, value)?,
            "intercept" => samples.intercept = parse_value(key, value)?,
            "x_lo" => samples.x_lo = parse_value(key, value)?,
            "x_hi" => samples.x_hi = parse_value(key, value)?,
            "noise_bound" => samples.noise_bound = parse_value(key, value)?,
            k if k.starts_with(MANIFEST_PREFIX) => {}
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Range checks for every field.
    ///
    /// `k1 · beta0 ≠ 1` is allowed here; it is a modelling error that the
    /// verification suite reports rather than a malformed file.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        for (field, v) in [
            ("k", self.k),
            ("k_inf", self.k_inf),
            ("k_l_inf", self.k_l_inf),
            ("k1", self.k1),
            ("beta0", self.beta0),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        self.integrator.validate()?;
        let s = &self.samples;
        if s.count == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        if !(s.x_lo.is_finite() && s.x_hi.is_finite() && s.x_lo < s.x_hi) {
            return Err(Error::config("x_lo", "need finite x_lo < x_hi"));
        }
        if !(s.noise_bound.is_finite() && s.noise_bound >= 0.0) {
            return Err(Error::config("noise_bound", "must be nonnegative"));
        }
        if !(s.slope.is_finite() && s.intercept.is_finite()) {
            return Err(Error::config("slope", "slope and intercept must be finite"));
        }
        Ok(())
    }

    /// Serializes every field, one `key = value` per line.
    pub fn to_kv(&self) -> String {
        let i = &self.integrator;
        let s = &self.samples;
        let mut out = String::new();
        let entries: Vec<(&str, String)> = vec![
            ("n", self.n.to_string()),
            ("eta", self.eta.to_string()),
            ("k", self.k.to_string()),
            ("k_inf", self.k_inf.to_string()),
            ("k_l_inf", self.k_l_inf.to_string()),
            ("k1", self.k1.to_string()),
            ("beta0", self.beta0.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("termination_policy", self.termination_policy.as_str().into()),
            ("seed", self.seed.to_string()),
            ("y_init", self.y_init.as_str().into()),
            ("fast_path", self.fast_path.as_str().into()),
            ("evaluation", self.evaluation.as_str().into()),
            ("t_final", i.t_final.to_string()),
            ("rel_tol", i.rel_tol.to_string()),
            ("abs_tol", i.abs_tol.to_string()),
            ("max_steps", i.max_steps.to_string()),
            ("steady_state_threshold", i.steady_state_threshold.to_string()),
            ("samples", s.count.to_string()),
            ("slope", s.slope.to_string()),
            ("intercept", s.intercept.to_string()),
            ("x_lo", s.x_lo.to_string()),
            ("x_hi", s.x_hi.to_string()),
            ("noise_bound", s.noise_bound.to_string()),
        ];
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
