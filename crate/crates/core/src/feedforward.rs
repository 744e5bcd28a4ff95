//! The feedforward CRN: computes `y = Σ x_i w_i` (bias at `i = 0`) as the
//! steady state of an output species pair.
//!
//! For each index `i` four catalytic reactions produce `Y⁺` from matched-sign
//! products and `Y⁻` from mismatched ones; `Y±` decay at rate `k` and
//! annihilate each other at rate `k_inf`. Inputs and weights are catalysts,
//! so the output obeys
//!
//! ```text
//! dy⁺/dt = k p⁺ − k y⁺ − k_inf y⁺ y⁻
//! dy⁻/dt = k p⁻ − k y⁻ − k_inf y⁺ y⁻
//! ```
//!
//! with `p±` the dual-rail partial sums from [`compute_p`]. Subtracting the two
//! lines shows `y⁺ − y⁻ → p⁺ − p⁻` for every `k_inf`; as `k_inf → ∞` the
//! smaller rail vanishes.

use crate::crn::{Compartment, NetworkBuilder, ReactionNetwork, Role, SystemState};
use crate::dual_rail::DualRailValue;
use crate::error::{Error, Result};
use crate::ode::{integrate, IntegratorConfig, Termination, Trajectory};

/// Species ids of a dual-rail pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RailIds {
    pub plus: usize,
    pub minus: usize,
}

impl RailIds {
    pub fn read(&self, state: &SystemState) -> DualRailValue {
        DualRailValue {
            plus: state.get(self.plus),
            minus: state.get(self.minus),
        }
    }

    pub fn write(&self, state: &mut SystemState, value: DualRailValue) {
        state.set(self.plus, value.plus);
        state.set(self.minus, value.minus);
    }
}

/// Compiled feedforward network for `n` inputs plus the bias.
#[derive(Debug, Clone)]
pub struct FeedforwardNetwork {
    pub network: ReactionNetwork,
    pub n: usize,
    pub k: f64,
    pub k_inf: f64,
    /// `X_i±` for `i = 0..=n`.
    pub inputs: Vec<RailIds>,
    /// `W_i±` for `i = 0..=n`.
    pub weights: Vec<RailIds>,
    pub output: RailIds,
}

/// Emits the feedforward reactions over indices `0..=n`.
pub fn compile_feedforward(n: usize, k: f64, k_inf: f64) -> Result<FeedforwardNetwork> {
    if n == 0 {
        return Err(Error::config("n", "at least one input is required"));
    }
    for (field, v) in [("k", k), ("k_inf", k_inf)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(field, format!("must be positive, got {v}")));
        }
    }

    let ff = Compartment::Feedforward;
    let mut b = NetworkBuilder::new();
    let mut inputs = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for i in 0..=n {
        inputs.push(RailIds {
            plus: b.species(format!("X{i}+"), ff, Role::InputPlus, Some(i)),
            minus: b.species(format!("X{i}-"), ff, Role::InputMinus, Some(i)),
        });
        weights.push(RailIds {
            plus: b.species(format!("W{i}+"), ff, Role::WeightPlus, Some(i)),
            minus: b.species(format!("W{i}-"), ff, Role::WeightMinus, Some(i)),
        });
    }
    let output = RailIds {
        plus: b.species("Y+", ff, Role::OutputPlus, None),
        minus: b.species("Y-", ff, Role::OutputMinus, None),
    };

    for i in 0..=n {
        let (x, w) = (inputs[i], weights[i]);
        // (w, x, product): like signs feed Y+, unlike signs feed Y-.
        let catalytic = [
            ("pp", w.plus, x.plus, output.plus),
            ("mm", w.minus, x.minus, output.plus),
            ("pm", w.plus, x.minus, output.minus),
            ("mp", w.minus, x.plus, output.minus),
        ];
        for (tag, wi, xi, y) in catalytic {
            b.reaction(
                format!("ff-cat-{tag}-{i}"),
                &[(wi, 1), (xi, 1)],
                &[(wi, 1), (xi, 1), (y, 1)],
                k,
            );
        }
    }
    b.reaction("ff-decay-y+", &[(output.plus, 1)], &[], k);
    b.reaction("ff-decay-y-", &[(output.minus, 1)], &[], k);
    b.reaction("ff-ann", &[(output.plus, 1), (output.minus, 1)], &[], k_inf);

    Ok(FeedforwardNetwork {
        network: b.build()?,
        n,
        k,
        k_inf,
        inputs,
        weights,
        output,
    })
}

/// Dual-rail partial sums of `Σ x_i w_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PPair {
    pub p_plus: f64,
    pub p_minus: f64,
}

impl PPair {
    pub fn decode(&self) -> f64 {
        self.p_plus - self.p_minus
    }
}

/// `p⁺ = Σ x⁺w⁺ + x⁻w⁻`, `p⁻ = Σ x⁺w⁻ + x⁻w⁺`.
pub fn compute_p(x: &[DualRailValue], w: &[DualRailValue]) -> Result<PPair> {
    if x.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: w.len(),
        });
    }
    let mut p = PPair {
        p_plus: 0.0,
        p_minus: 0.0,
    };
    for (xi, wi) in x.iter().zip(w) {
        p.p_plus += xi.plus * wi.plus + xi.minus * wi.minus;
        p.p_minus += xi.plus * wi.minus + xi.minus * wi.plus;
    }
    Ok(p)
}

/// Output equilibrium in the `k_inf → ∞` limit: the ramp `(max(Δ,0), max(−Δ,0))`
/// with `Δ = p⁺ − p⁻`. The tie `Δ = 0` gives `(0, 0)`.
pub fn closed_form_output(p: PPair) -> DualRailValue {
    if p.p_plus > p.p_minus {
        DualRailValue {
            plus: p.p_plus - p.p_minus,
            minus: 0.0,
        }
    } else {
        DualRailValue {
            plus: 0.0,
            minus: p.p_minus - p.p_plus,
        }
    }
}

/// Exact output equilibrium for finite `k` and `k_inf` (both rails nonzero).
///
/// Solves `p⁺ = y⁺ + r y⁺y⁻`, `y⁺ − y⁻ = p⁺ − p⁻` with `r = k_inf / k`.
pub fn finite_rate_equilibrium(p: PPair, k: f64, k_inf: f64) -> DualRailValue {
    let r = k_inf / k;
    let gap = (p.p_plus - p.p_minus).abs();
    let small_source = p.p_plus.min(p.p_minus);
    let lin = 1.0 + r * gap;
    let small = 2.0 * small_source / (lin + (lin * lin + 4.0 * r * small_source).sqrt());
    if p.p_plus >= p.p_minus {
        DualRailValue {
            plus: small + gap,
            minus: small,
        }
    } else {
        DualRailValue {
            plus: small,
            minus: small + gap,
        }
    }
}

/// Result of simulating the feedforward network.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Canonicalized terminal output.
    pub y: DualRailValue,
    /// Terminal output rails as integrated.
    pub raw: DualRailValue,
    pub trajectory: Trajectory,
}

impl FeedforwardNetwork {
    fn check_lengths(&self, x: &[DualRailValue], w: &[DualRailValue]) -> Result<()> {
        for len in [x.len(), w.len()] {
            if len != self.n + 1 {
                return Err(Error::DimensionMismatch {
                    expected: self.n + 1,
                    found: len,
                });
            }
        }
        Ok(())
    }

    /// State with inputs, weights and output set; everything else zero.
    pub fn initial_state(
        &self,
        x: &[DualRailValue],
        w: &[DualRailValue],
        y_init: DualRailValue,
    ) -> Result<SystemState> {
        self.check_lengths(x, w)?;
        let mut state = SystemState::zeros(self.network.n_species());
        for i in 0..=self.n {
            self.inputs[i].write(&mut state, x[i]);
            self.weights[i].write(&mut state, w[i]);
        }
        self.output.write(&mut state, y_init);
        Ok(state)
    }

    pub fn read_inputs(&self, state: &SystemState) -> Vec<DualRailValue> {
        self.inputs.iter().map(|r| r.read(state)).collect()
    }

    pub fn read_weights(&self, state: &SystemState) -> Vec<DualRailValue> {
        self.weights.iter().map(|r| r.read(state)).collect()
    }

    pub fn read_output(&self, state: &SystemState) -> DualRailValue {
        self.output.read(state)
    }

    /// The bias input `x_0 = (1, 0)`.
    pub fn bias() -> DualRailValue {
        DualRailValue {
            plus: 1.0,
            minus: 0.0,
        }
    }
}

/// Simulates the forward pass from `Y(0) = y_init` and returns the canonical output.
///
/// `x[0]` must be the bias `(1, 0)`.
pub fn forward(
    x: &[DualRailValue],
    w: &[DualRailValue],
    cfg: &IntegratorConfig,
    net: &FeedforwardNetwork,
    y_init: DualRailValue,
) -> Result<ForwardOutput> {
    net.check_lengths(x, w)?;
    if x[0] != FeedforwardNetwork::bias() {
        return Err(Error::InvalidInput(format!(
            "bias input must be (1, 0), got {}",
            x[0]
        )));
    }
    let initial = net.initial_state(x, w, y_init)?;
    let trajectory = integrate(&net.network, &initial, cfg)?;
    if trajectory.terminated_by == Termination::StepLimit {
        return Err(Error::StepLimit {
            max_steps: cfg.max_steps,
            time: trajectory.final_time(),
        });
    }
    let raw = net.read_output(&trajectory.final_state());
    Ok(ForwardOutput {
        y: raw.canonicalize(),
        raw,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_rail::encode_all;
    use approx::assert_abs_diff_eq;

    fn dr(plus: f64, minus: f64) -> DualRailValue {
        DualRailValue::new(plus, minus).unwrap()
    }

    #[test]
    fn reaction_and_species_counts() {
        let net = compile_feedforward(1, 1.0, 500.0).unwrap();
        assert_eq!(net.network.reactions().len(), 11);
        assert_eq!(net.network.n_species(), 10);
        let net = compile_feedforward(3, 1.0, 500.0).unwrap();
        assert_eq!(net.network.reactions().len(), 19);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(compile_feedforward(0, 1.0, 500.0).is_err());
        assert!(compile_feedforward(1, 0.0, 500.0).is_err());
        assert!(compile_feedforward(1, 1.0, -5.0).is_err());
    }

    #[test]
    fn only_outputs_are_non_catalysts() {
        let net = compile_feedforward(1, 1.0, 500.0).unwrap();
        let cats = net.network.conserved_catalysts();
        let names: Vec<&str> = cats
            .iter()
            .map(|&id| net.network.species()[id].name.as_str())
            .collect();
        assert_eq!(
            names,
            ["X0+", "X0-", "W0+", "W0-", "X1+", "X1-", "W1+", "W1-"]
        );
        assert!(!cats.contains(&net.output.plus));
        assert!(!cats.contains(&net.output.minus));
    }

    #[test]
    fn dump_round_trips() {
        let net = compile_feedforward(2, 1.0, 500.0).unwrap();
        let dump = net.network.dump();
        assert!(dump.contains("ff-cat-pp-1: X1+ + W1+ -> X1+ + W1+ + Y+ @ 1\n"));
        assert!(dump.contains("ff-ann: Y+ + Y- -> ∅ @ 500\n"));
        let mut parsed = net.network.parse_dump(&dump).unwrap();
        let mut original = net.network.reactions().to_vec();
        parsed.sort_by(|a, b| a.label.cmp(&b.label));
        original.sort_by(|a, b| a.label.cmp(&b.label));
        assert_eq!(parsed, original);
    }

    #[test]
    fn output_equations_match_closed_dynamics() {
        let net = compile_feedforward(1, 1.0, 500.0).unwrap();
        let x = [dr(1.0, 0.0), dr(0.3, 0.7)];
        let w = [dr(1.2, 0.4), dr(0.9, 2.0)];
        let y = dr(0.6, 0.25);
        let state = net.initial_state(&x, &w, y).unwrap();
        let f = net.network.vector_field(&state).unwrap();
        let p = compute_p(&x, &w).unwrap();
        let ann = 500.0 * y.plus * y.minus;
        assert_abs_diff_eq!(f[net.output.plus], p.p_plus - y.plus - ann, epsilon = 1e-12);
        assert_abs_diff_eq!(f[net.output.minus], p.p_minus - y.minus - ann, epsilon = 1e-12);
    }

    #[test]
    fn compute_p_examples() {
        let p = compute_p(&[dr(1.0, 0.0)], &[dr(0.0, 2.0)]).unwrap();
        assert_eq!((p.p_plus, p.p_minus), (0.0, 2.0));

        let p = compute_p(&[dr(1.0, 0.0), dr(1.0, 0.0)], &[dr(5.0, 0.0), dr(0.0, 2.0)]).unwrap();
        assert_eq!((p.p_plus, p.p_minus), (5.0, 2.0));
        assert_eq!(p.decode(), 3.0);

        let p = compute_p(&[dr(1.0, 0.0), dr(0.0, 3.0)], &[DualRailValue::ZERO; 2]).unwrap();
        assert_eq!((p.p_plus, p.p_minus), (0.0, 0.0));

        assert!(compute_p(&[dr(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn closed_form_branches() {
        let out = |pp, pm| {
            closed_form_output(PPair {
                p_plus: pp,
                p_minus: pm,
            })
        };
        assert_eq!(out(5.0, 2.0), dr(3.0, 0.0));
        assert_eq!(out(2.0, 5.0), dr(0.0, 3.0));
        assert_eq!(out(4.0, 4.0), dr(0.0, 0.0));
    }

    #[test]
    fn finite_rate_equilibrium_is_a_fixed_point() {
        let net = compile_feedforward(1, 1.0, 50.0).unwrap();
        let x = [dr(1.0, 0.0), dr(0.0, 1.5)];
        let w = [dr(0.7, 0.0), dr(0.0, 1.1)];
        let p = compute_p(&x, &w).unwrap();
        let y = finite_rate_equilibrium(p, 1.0, 50.0);
        let f = net
            .network
            .vector_field(&net.initial_state(&x, &w, y).unwrap())
            .unwrap();
        assert_abs_diff_eq!(f[net.output.plus], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[net.output.minus], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_examples() {
        let net = compile_feedforward(1, 1.0, 500.0).unwrap();
        let cfg = IntegratorConfig::default();

        let x = encode_all(&[1.0, 1.0]).unwrap();
        let w = encode_all(&[5.0, -2.0]).unwrap();
        let out = forward(&x, &w, &cfg, &net, DualRailValue::ZERO).unwrap();
        assert_abs_diff_eq!(out.y.decode(), 3.0, epsilon = 1e-4);
        assert!(out.y.is_canonical());

        let w = [DualRailValue::ZERO; 2];
        let out = forward(&x, &w, &cfg, &net, DualRailValue::ZERO).unwrap();
        assert_eq!(out.y, DualRailValue::ZERO);

        let x = encode_all(&[1.0, 0.0]).unwrap();
        let w = encode_all(&[4.9133, -1.9701]).unwrap();
        let out = forward(&x, &w, &cfg, &net, DualRailValue::ZERO).unwrap();
        assert_abs_diff_eq!(out.y.decode(), 4.9133, epsilon = 1e-4);
    }

    #[test]
    fn forward_requires_bias() {
        let net = compile_feedforward(1, 1.0, 500.0).unwrap();
        let x = encode_all(&[0.5, 1.0]).unwrap();
        let w = encode_all(&[1.0, 1.0]).unwrap();
        let err = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO);
        assert!(err.is_err());
    }

    #[test]
    fn catalysts_are_untouched_by_integration() {
        let net = compile_feedforward(2, 1.0, 500.0).unwrap();
        let x = encode_all(&[1.0, -0.4, 2.2]).unwrap();
        let w = encode_all(&[0.3, 1.7, -0.8]).unwrap();
        let out = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO).unwrap();
        let last = out.trajectory.final_state();
        assert_eq!(net.read_inputs(&last), x);
        for (got, want) in net.read_weights(&last).iter().zip(&w) {
            assert_abs_diff_eq!(got.plus, want.plus, epsilon = 1e-9);
            assert_abs_diff_eq!(got.minus, want.minus, epsilon = 1e-9);
        }
    }
}
