//! The online-learning CRN: error computation and LMS weight update.
//!
//! Error reactions (rate 1 unless noted):
//!
//! ```text
//! D⁺ → D⁺ + E⁺     Ỹ⁺ → Ỹ⁺ + E⁻     D⁻ → D⁻ + E⁻     Ỹ⁻ → Ỹ⁻ + E⁺
//! E⁺ → ∅           E⁻ → ∅
//! D⁺ + Ỹ⁺ → ∅ (k_l_inf)             D⁻ + Ỹ⁻ → ∅ (k_l_inf)
//! ```
//!
//! Weight-update reactions, per input index `i`:
//!
//! ```text
//! E⁺ + X̃ᵢ⁺ → … + ΔWᵢ⁺ (η)          E⁺ + X̃ᵢ⁻ → … + ΔWᵢ⁻ (η)
//! E⁻ + X̃ᵢ⁻ → … + ΔWᵢ⁺ (η)          E⁻ + X̃ᵢ⁺ → … + ΔWᵢ⁻ (η)
//! ΔWᵢ± → Wᵢ±        W̃ᵢ± → Wᵢ± + W̃ᵢ±        Wᵢ± + B → B (k1)
//! ```
//!
//! The annihilations are fast; once they settle, the remaining system is
//! linear with a lower-triangular matrix whose diagonal is `−1` (given
//! `k1·β(0) = 1`), and its equilibrium is one LMS step.

use nalgebra::{DMatrix, DVector};

use crate::crn::{Compartment, NetworkBuilder, ReactionNetwork, Role, SystemState};
use crate::dual_rail::DualRailValue;
use crate::error::{Error, Result};
use crate::feedforward::RailIds;
use crate::ode::{integrate, IntegratorConfig, Termination, Trajectory};

#[derive(Debug, Clone)]
pub struct LearningNetwork {
    pub network: ReactionNetwork,
    pub n: usize,
    pub eta: f64,
    pub k_l_inf: f64,
    pub k1: f64,
    /// Initial (and constant) concentration of the catalyst `B`.
    pub beta0: f64,
    pub desired: RailIds,
    pub aux_output: RailIds,
    pub error: RailIds,
    pub aux_inputs: Vec<RailIds>,
    pub aux_weights: Vec<RailIds>,
    pub delta_weights: Vec<RailIds>,
    pub weights: Vec<RailIds>,
    pub catalyst_b: usize,
}

/// Compiles the learning network with `β(0) = 1 / k1`.
pub fn compile_learning(n: usize, eta: f64, k_l_inf: f64, k1: f64) -> Result<LearningNetwork> {
    if !(k1.is_finite() && k1 > 0.0) {
        return Err(Error::config("k1", format!("must be positive, got {k1}")));
    }
    assemble(n, eta, k_l_inf, k1, 1.0 / k1, false)
}

/// Compiles with an explicit `β(0)`. Only `k1·β(0) = 1` realizes the LMS
/// update; other values are accepted so the mismatch can be diagnosed.
pub fn compile_learning_with_catalyst(
    n: usize,
    eta: f64,
    k_l_inf: f64,
    k1: f64,
    beta0: f64,
) -> Result<LearningNetwork> {
    assemble(n, eta, k_l_inf, k1, beta0, false)
}

fn assemble(
    n: usize,
    eta: f64,
    k_l_inf: f64,
    k1: f64,
    beta0: f64,
    allow_zero_eta: bool,
) -> Result<LearningNetwork> {
    if n == 0 {
        return Err(Error::config("n", "at least one input is required"));
    }
    let eta_ok = if allow_zero_eta {
        (0.0..=1.0).contains(&eta)
    } else {
        eta > 0.0 && eta <= 1.0
    };
    if !eta_ok {
        return Err(Error::config("eta", format!("must lie in (0, 1], got {eta}")));
    }
    for (field, v) in [("k_l_inf", k_l_inf), ("k1", k1), ("beta0", beta0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(field, format!("must be positive, got {v}")));
        }
    }

    let lc = Compartment::Learning;
    let mut b = NetworkBuilder::new();
    let pair = |b: &mut NetworkBuilder, name: &str, plus: Role, minus: Role, i: Option<usize>| {
        let suffix = i.map(|i| i.to_string()).unwrap_or_default();
        RailIds {
            plus: b.species(format!("{name}{suffix}+"), lc, plus, i),
            minus: b.species(format!("{name}{suffix}-"), lc, minus, i),
        }
    };
    let desired = pair(&mut b, "D", Role::DesiredPlus, Role::DesiredMinus, None);
    let aux_output = pair(&mut b, "Yt", Role::AuxOutputPlus, Role::AuxOutputMinus, None);
    let error = pair(&mut b, "E", Role::ErrorPlus, Role::ErrorMinus, None);
    let mut aux_inputs = Vec::with_capacity(n + 1);
    let mut aux_weights = Vec::with_capacity(n + 1);
    let mut delta_weights = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let i = Some(i);
        aux_inputs.push(pair(&mut b, "Xt", Role::AuxInputPlus, Role::AuxInputMinus, i));
        aux_weights.push(pair(&mut b, "Wt", Role::AuxWeightPlus, Role::AuxWeightMinus, i));
        delta_weights.push(pair(&mut b, "dW", Role::DeltaWeightPlus, Role::DeltaWeightMinus, i));
        weights.push(pair(&mut b, "W", Role::WeightPlus, Role::WeightMinus, i));
    }
    let catalyst_b = b.species("B", lc, Role::CatalystB, None);

    let (d, y, e) = (desired, aux_output, error);
    let catalytic = |b: &mut NetworkBuilder, label: &str, cat: usize, prod: usize| {
        b.reaction(label, &[(cat, 1)], &[(cat, 1), (prod, 1)], 1.0);
    };
    catalytic(&mut b, "err-cat-d+", d.plus, e.plus);
    catalytic(&mut b, "err-cat-yt+", y.plus, e.minus);
    catalytic(&mut b, "err-cat-d-", d.minus, e.minus);
    catalytic(&mut b, "err-cat-yt-", y.minus, e.plus);
    b.reaction("err-decay-e+", &[(e.plus, 1)], &[], 1.0);
    b.reaction("err-decay-e-", &[(e.minus, 1)], &[], 1.0);
    b.reaction("err-ann+", &[(d.plus, 1), (y.plus, 1)], &[], k_l_inf);
    b.reaction("err-ann-", &[(d.minus, 1), (y.minus, 1)], &[], k_l_inf);

    for i in 0..=n {
        let (x, dw, wt, w) = (aux_inputs[i], delta_weights[i], aux_weights[i], weights[i]);
        if eta > 0.0 {
            // (error rail, input rail, produced weight-change rail)
            let update = [
                ("pp", e.plus, x.plus, dw.plus),
                ("pm", e.plus, x.minus, dw.minus),
                ("mm", e.minus, x.minus, dw.plus),
                ("mp", e.minus, x.plus, dw.minus),
            ];
            for (tag, er, xr, out) in update {
                b.reaction(
                    format!("upd-cat-{tag}-{i}"),
                    &[(er, 1), (xr, 1)],
                    &[(er, 1), (xr, 1), (out, 1)],
                    eta,
                );
            }
        }
        b.reaction(format!("upd-conv+-{i}"), &[(dw.plus, 1)], &[(w.plus, 1)], 1.0);
        b.reaction(format!("upd-conv--{i}"), &[(dw.minus, 1)], &[(w.minus, 1)], 1.0);
        b.reaction(
            format!("upd-keep+-{i}"),
            &[(wt.plus, 1)],
            &[(wt.plus, 1), (w.plus, 1)],
            1.0,
        );
        b.reaction(
            format!("upd-keep--{i}"),
            &[(wt.minus, 1)],
            &[(wt.minus, 1), (w.minus, 1)],
            1.0,
        );
        b.reaction(
            format!("upd-decay+-{i}"),
            &[(w.plus, 1), (catalyst_b, 1)],
            &[(catalyst_b, 1)],
            k1,
        );
        b.reaction(
            format!("upd-decay--{i}"),
            &[(w.minus, 1), (catalyst_b, 1)],
            &[(catalyst_b, 1)],
            k1,
        );
    }

    Ok(LearningNetwork {
        network: b.build()?,
        n,
        eta,
        k_l_inf,
        k1,
        beta0,
        desired,
        aux_output,
        error,
        aux_inputs,
        aux_weights,
        delta_weights,
        weights,
        catalyst_b,
    })
}

/// Desired and auxiliary outputs after the fast annihilations have settled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastBoundaryState {
    pub d: DualRailValue,
    pub y_tilde: DualRailValue,
}

/// Equilibrium of the slow subsystem: error, weight change and new weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowEquilibrium {
    pub e: DualRailValue,
    pub delta_w: Vec<DualRailValue>,
    pub w_new: Vec<DualRailValue>,
}

impl SlowEquilibrium {
    pub fn decoded_weights(&self) -> Vec<f64> {
        self.w_new.iter().map(DualRailValue::decode).collect()
    }

    /// Largest componentwise gap over every rail of `e`, `Δw` and `w`.
    pub fn max_abs_diff(&self, other: &SlowEquilibrium) -> f64 {
        let rails = |s: &SlowEquilibrium| -> Vec<f64> {
            std::iter::once(s.e)
                .chain(s.delta_w.iter().copied())
                .chain(s.w_new.iter().copied())
                .flat_map(|v| [v.plus, v.minus])
                .collect()
        };
        let (a, b) = (rails(self), rails(other));
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter()
            .zip(&b)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
    }
}

/// `k_l_inf → ∞` limit of the annihilations `D± + Ỹ± → ∅`.
///
/// Matched rails cancel pairwise; mismatched rails pass through.
pub fn resolve_fast(d: DualRailValue, y: DualRailValue) -> Result<FastBoundaryState> {
    if !d.is_canonical() || !y.is_canonical() {
        return Err(Error::InvalidInput(format!(
            "fast resolution needs canonical inputs, got d = {d}, y = {y}"
        )));
    }
    let plus = d.plus.min(y.plus);
    let minus = d.minus.min(y.minus);
    Ok(FastBoundaryState {
        d: DualRailValue {
            plus: d.plus - plus,
            minus: d.minus - minus,
        },
        y_tilde: DualRailValue {
            plus: y.plus - plus,
            minus: y.minus - minus,
        },
    })
}

fn check_lengths(x_tilde: &[DualRailValue], w_tilde: &[DualRailValue]) -> Result<()> {
    if x_tilde.len() != w_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: x_tilde.len(),
            found: w_tilde.len(),
        });
    }
    if x_tilde.is_empty() {
        return Err(Error::InvalidInput("no inputs".into()));
    }
    Ok(())
}

/// Closed-form equilibrium of the slow subsystem (assumes `k1·β(0) = 1`).
pub fn slow_equilibrium(
    fb: &FastBoundaryState,
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
    eta: f64,
) -> Result<SlowEquilibrium> {
    check_lengths(x_tilde, w_tilde)?;
    let e = DualRailValue {
        plus: fb.d.plus + fb.y_tilde.minus,
        minus: fb.d.minus + fb.y_tilde.plus,
    };
    let delta_w: Vec<DualRailValue> = x_tilde
        .iter()
        .map(|x| DualRailValue {
            plus: eta * (e.plus * x.plus + e.minus * x.minus),
            minus: eta * (e.minus * x.plus + e.plus * x.minus),
        })
        .collect();
    let w_new = delta_w
        .iter()
        .zip(w_tilde)
        .map(|(dw, wt)| DualRailValue {
            plus: dw.plus + wt.plus,
            minus: dw.minus + wt.minus,
        })
        .collect();
    Ok(SlowEquilibrium { e, delta_w, w_new })
}

/// Position of each slow variable in the vector used by [`build_slow_system`]:
/// `(e⁺, e⁻, Δw₀⁺, Δw₀⁻, …, Δwₙ⁻, w₀⁺, w₀⁻, …, wₙ⁻)`.
pub fn slow_index_delta(i: usize, minus: bool) -> usize {
    2 + 2 * i + minus as usize
}

pub fn slow_index_weight(n_inputs: usize, i: usize, minus: bool) -> usize {
    2 + 2 * n_inputs + 2 * i + minus as usize
}

/// Assembles the slow subsystem `ż = U z + b` after the fast boundary is fixed.
pub fn build_slow_system(
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
    eta: f64,
    fb: &FastBoundaryState,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_lengths(x_tilde, w_tilde)?;
    let m = x_tilde.len();
    let dim = 2 + 4 * m;
    let mut u = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for i in 0..dim {
        u[(i, i)] = -1.0;
    }
    b[0] = fb.d.plus + fb.y_tilde.minus;
    b[1] = fb.d.minus + fb.y_tilde.plus;
    for (i, x) in x_tilde.iter().enumerate() {
        let dp = slow_index_delta(i, false);
        let dm = slow_index_delta(i, true);
        u[(dp, 0)] = eta * x.plus;
        u[(dp, 1)] = eta * x.minus;
        u[(dm, 0)] = eta * x.minus;
        u[(dm, 1)] = eta * x.plus;

        let wp = slow_index_weight(m, i, false);
        let wm = slow_index_weight(m, i, true);
        u[(wp, dp)] = 1.0;
        u[(wm, dm)] = 1.0;
        b[wp] = w_tilde[i].plus;
        b[wm] = w_tilde[i].minus;
    }
    Ok((u, b))
}

impl LearningNetwork {
    fn check_inputs(&self, x_tilde: &[DualRailValue], w_tilde: &[DualRailValue]) -> Result<()> {
        for len in [x_tilde.len(), w_tilde.len()] {
            if len != self.n + 1 {
                return Err(Error::DimensionMismatch {
                    expected: self.n + 1,
                    found: len,
                });
            }
        }
        Ok(())
    }

    /// Learning-compartment state before a learn step: `E`, `ΔW`, `W` empty,
    /// `B = β(0)`.
    pub fn initial_state(
        &self,
        d: DualRailValue,
        y_tilde: DualRailValue,
        x_tilde: &[DualRailValue],
        w_tilde: &[DualRailValue],
    ) -> Result<SystemState> {
        self.check_inputs(x_tilde, w_tilde)?;
        let mut state = SystemState::zeros(self.network.n_species());
        self.desired.write(&mut state, d);
        self.aux_output.write(&mut state, y_tilde);
        for i in 0..=self.n {
            self.aux_inputs[i].write(&mut state, x_tilde[i]);
            self.aux_weights[i].write(&mut state, w_tilde[i]);
        }
        state.set(self.catalyst_b, self.beta0);
        Ok(state)
    }

    pub fn read_equilibrium(&self, state: &SystemState) -> SlowEquilibrium {
        SlowEquilibrium {
            e: self.error.read(state),
            delta_w: self.delta_weights.iter().map(|r| r.read(state)).collect(),
            w_new: self.weights.iter().map(|r| r.read(state)).collect(),
        }
    }

    fn run(&self, initial: &SystemState, cfg: &IntegratorConfig) -> Result<(SlowEquilibrium, Trajectory)> {
        let trajectory = integrate(&self.network, initial, cfg)?;
        if trajectory.terminated_by == Termination::StepLimit {
            return Err(Error::StepLimit {
                max_steps: cfg.max_steps,
                time: trajectory.final_time(),
            });
        }
        Ok((self.read_equilibrium(&trajectory.final_state()), trajectory))
    }
}

/// Integrates the learning network from an already-resolved fast boundary.
///
/// One rail of each matched pair is zero, so the annihilations never fire
/// and only the slow subsystem evolves.
pub fn learn_step_simulated(
    fb: &FastBoundaryState,
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
    cfg: &IntegratorConfig,
    net: &LearningNetwork,
) -> Result<(SlowEquilibrium, Trajectory)> {
    let initial = net.initial_state(fb.d, fb.y_tilde, x_tilde, w_tilde)?;
    net.run(&initial, cfg)
}

/// Integrates the whole learning network, annihilations included, from the
/// unresolved desired and auxiliary outputs.
pub fn learn_step_full(
    d: DualRailValue,
    y_tilde: DualRailValue,
    x_tilde: &[DualRailValue],
    w_tilde: &[DualRailValue],
    cfg: &IntegratorConfig,
    net: &LearningNetwork,
) -> Result<(SlowEquilibrium, Trajectory)> {
    let initial = net.initial_state(d, y_tilde, x_tilde, w_tilde)?;
    net.run(&initial, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_rail::encode_all;
    use approx::assert_abs_diff_eq;

    fn dr(plus: f64, minus: f64) -> DualRailValue {
        DualRailValue::new(plus, minus).unwrap()
    }

    fn enc(v: f64) -> DualRailValue {
        DualRailValue::encode(v).unwrap()
    }

    #[test]
    fn reaction_count_and_rates() {
        let net = compile_learning(1, 0.2, 500.0, 1.0).unwrap();
        assert_eq!(net.network.reactions().len(), 28);
        for r in net.network.reactions() {
            if r.label.starts_with("upd-cat-") {
                assert_eq!(r.rate_constant, 0.2);
            }
            if r.label.starts_with("upd-decay") {
                assert_eq!(r.rate_constant, 1.0);
            }
            if r.label.starts_with("err-ann") {
                assert_eq!(r.rate_constant, 500.0);
            }
        }
        let net = compile_learning(3, 0.5, 100.0, 4.0).unwrap();
        assert_eq!(net.network.reactions().len(), 8 + 40);
        assert_eq!(net.k1 * net.beta0, 1.0);
    }

    #[test]
    fn rejects_out_of_range_eta() {
        assert!(compile_learning(1, 0.0, 500.0, 1.0).is_err());
        assert!(compile_learning(1, 1.5, 500.0, 1.0).is_err());
        assert!(compile_learning(1, 1.0, 500.0, 1.0).is_ok());
    }

    #[test]
    fn b_is_only_a_catalyst() {
        let net = compile_learning(2, 0.2, 500.0, 1.0).unwrap();
        let b = net.catalyst_b;
        for r in net.network.reactions() {
            let touches = r.reactants.contains_key(&b) || r.products.contains_key(&b);
            assert_eq!(touches, r.label.starts_with("upd-decay"), "{}", r.label);
            assert_eq!(r.net_change(b), 0);
        }
    }

    #[test]
    fn conserved_catalysts_are_aux_inputs_weights_and_b() {
        let net = compile_learning(1, 0.2, 500.0, 1.0).unwrap();
        let mut expected: Vec<usize> = net
            .aux_inputs
            .iter()
            .chain(&net.aux_weights)
            .flat_map(|r| [r.plus, r.minus])
            .chain([net.catalyst_b])
            .collect();
        expected.sort();
        let got: Vec<usize> = net.network.conserved_catalysts().into_iter().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn resolve_fast_examples() {
        let fb = resolve_fast(dr(3.0, 0.0), dr(2.0, 0.0)).unwrap();
        assert_eq!((fb.d, fb.y_tilde), (dr(1.0, 0.0), dr(0.0, 0.0)));
        let fb = resolve_fast(dr(2.0, 0.0), dr(3.0, 0.0)).unwrap();
        assert_eq!((fb.d, fb.y_tilde), (dr(0.0, 0.0), dr(1.0, 0.0)));
        let fb = resolve_fast(dr(3.0, 0.0), dr(0.0, 2.0)).unwrap();
        assert_eq!((fb.d, fb.y_tilde), (dr(3.0, 0.0), dr(0.0, 2.0)));
        let fb = resolve_fast(dr(0.0, 1.5), dr(0.0, 4.0)).unwrap();
        assert_eq!((fb.d, fb.y_tilde), (dr(0.0, 0.0), dr(0.0, 2.5)));
        assert!(resolve_fast(dr(1.0, 1.0), dr(0.0, 0.0)).is_err());
    }

    #[test]
    fn slow_equilibrium_examples() {
        // d = 3, y = 2, x = (1, 1), eta = 0.2: Δw = 0.2 · 1 · (3 − 2)
        let fb = resolve_fast(enc(3.0), enc(2.0)).unwrap();
        let x = encode_all(&[1.0, 1.0]).unwrap();
        let w = [DualRailValue::ZERO; 2];
        let eq = slow_equilibrium(&fb, &x, &w, 0.2).unwrap();
        for dw in &eq.delta_w {
            assert_abs_diff_eq!(dw.decode(), 0.2, epsilon = 1e-15);
        }

        let fb = resolve_fast(enc(1.25), enc(1.25)).unwrap();
        let w = encode_all(&[0.4, -0.9]).unwrap();
        let eq = slow_equilibrium(&fb, &x, &w, 0.2).unwrap();
        assert_eq!(eq.e, DualRailValue::ZERO);
        assert_eq!(eq.w_new, w);

        // d = -1, y = 2, x = (1), eta = 0.5, w = (1)
        let fb = resolve_fast(dr(0.0, 1.0), dr(2.0, 0.0)).unwrap();
        let eq = slow_equilibrium(&fb, &[dr(1.0, 0.0)], &[dr(1.0, 0.0)], 0.5).unwrap();
        assert_eq!(eq.e, dr(0.0, 3.0));
        assert_eq!(eq.delta_w, vec![dr(0.0, 1.5)]);
        assert_eq!(eq.w_new, vec![dr(1.0, 1.5)]);
        assert_eq!(eq.w_new[0].decode(), -0.5);
    }

    #[test]
    fn slow_system_shape_and_solution() {
        let fb = resolve_fast(enc(0.7), enc(-1.1)).unwrap();
        let x = [dr(1.0, 0.0)];
        let w = [dr(0.0, 0.3)];
        let (u, b) = build_slow_system(&x, &w, 0.2, &fb).unwrap();
        assert_eq!(u.shape(), (6, 6));
        for r in 0..6 {
            assert_eq!(u[(r, r)], -1.0);
            for c in r + 1..6 {
                assert_eq!(u[(r, c)], 0.0);
            }
        }
        let z = u.clone().lu().solve(&(-&b)).unwrap();
        let eq = slow_equilibrium(&fb, &x, &w, 0.2).unwrap();
        let expected = [
            eq.e.plus,
            eq.e.minus,
            eq.delta_w[0].plus,
            eq.delta_w[0].minus,
            eq.w_new[0].plus,
            eq.w_new[0].minus,
        ];
        for (got, want) in z.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        // Every eigenvalue is -1 iff U + I is nilpotent.
        let shifted = &u + DMatrix::<f64>::identity(6, 6);
        let mut power = DMatrix::<f64>::identity(6, 6);
        for _ in 0..6 {
            power = &power * &shifted;
        }
        assert!(power.iter().all(|v| v.abs() < 1e-12));
        for ev in u.complex_eigenvalues().iter() {
            assert_abs_diff_eq!(ev.re, -1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn simulated_learn_step_matches_closed_form() {
        let cfg = IntegratorConfig::default();
        let cases = [
            (enc(3.0), enc(2.0), vec![enc(1.0), enc(1.0)], vec![enc(0.0), enc(0.0)], 0.2),
            (enc(1.5), enc(1.5), vec![enc(1.0), enc(-0.5)], vec![enc(0.3), enc(-0.8)], 0.2),
            (enc(-1.0), enc(2.0), vec![enc(1.0), enc(0.4)], vec![enc(1.0), enc(0.0)], 0.5),
        ];
        for (d, y, x, w, eta) in cases {
            let net = compile_learning(1, eta, 500.0, 1.0).unwrap();
            let fb = resolve_fast(d, y).unwrap();
            let (sim, _) = learn_step_simulated(&fb, &x, &w, &cfg, &net).unwrap();
            let exact = slow_equilibrium(&fb, &x, &w, eta).unwrap();
            assert!(sim.max_abs_diff(&exact) <= 1e-3, "{sim:?} vs {exact:?}");
        }
    }

    #[test]
    fn zero_learning_rate_leaves_weights_alone() {
        let net = assemble(1, 0.0, 500.0, 1.0, 1.0, true).unwrap();
        assert_eq!(net.network.reactions().len(), 8 + 12);
        let fb = resolve_fast(enc(2.0), enc(-1.0)).unwrap();
        let x = encode_all(&[1.0, 0.7]).unwrap();
        let w = encode_all(&[-0.2, 1.3]).unwrap();
        let (sim, _) =
            learn_step_simulated(&fb, &x, &w, &IntegratorConfig::default(), &net).unwrap();
        for (dw, (got, want)) in sim.delta_w.iter().zip(sim.w_new.iter().zip(&w)) {
            assert_eq!(*dw, DualRailValue::ZERO);
            assert_abs_diff_eq!(got.plus, want.plus, epsilon = 1e-6);
            assert_abs_diff_eq!(got.minus, want.minus, epsilon = 1e-6);
        }
    }

    #[test]
    fn full_network_agrees_with_resolved_path() {
        let net = compile_learning(1, 0.2, 500.0, 1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let x = encode_all(&[1.0, -1.3]).unwrap();
        let w = encode_all(&[0.6, 0.2]).unwrap();
        for (d, y) in [(3.0, 2.0), (2.0, 3.0), (-1.0, -2.5), (1.0, -0.5), (-0.4, 0.9)] {
            let (d, y) = (enc(d), enc(y));
            let fb = resolve_fast(d, y).unwrap();
            let (slow, _) = learn_step_simulated(&fb, &x, &w, &cfg, &net).unwrap();
            let (full, _) = learn_step_full(d, y, &x, &w, &cfg, &net).unwrap();
            assert!(full.max_abs_diff(&slow) <= 1e-2, "{full:?} vs {slow:?}");
        }
    }

    #[test]
    fn catalyst_level_breaks_update_when_product_is_not_one() {
        let net = compile_learning_with_catalyst(1, 0.2, 500.0, 1.0, 2.0).unwrap();
        let fb = resolve_fast(enc(1.0), enc(0.0)).unwrap();
        let x = encode_all(&[1.0, 1.0]).unwrap();
        let w = encode_all(&[1.0, 1.0]).unwrap();
        let (sim, _) =
            learn_step_simulated(&fb, &x, &w, &IntegratorConfig::default(), &net).unwrap();
        let exact = slow_equilibrium(&fb, &x, &w, 0.2).unwrap();
        assert!(sim.max_abs_diff(&exact) > 0.1);
        // w = (Δw + w̃) / (k1 β0)
        assert_abs_diff_eq!(sim.w_new[0].plus, 0.6, epsilon = 1e-4);
    }
}
