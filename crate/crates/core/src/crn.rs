//! Species and reaction data model, and the mass-action vector field.
//!
//! A [`ReactionNetwork`] is a list of species plus a list of reactions
//! `Σ α_i X_i → Σ β_i X_i` with rate constants. Under mass-action kinetics
//! the rate of a reaction is `k · Π x_i^α_i` and
//!
//! ```text
//! dx_i/dt = Σ_j (β_ij − α_ij) · rate_j(x)
//! ```
//!
//! Networks are immutable once built; they can be shared across threads and
//! simulated any number of times.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Symbol used in reaction dumps for the empty complex.
pub const EMPTY_COMPLEX: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Compartment {
    Feedforward,
    Learning,
    Environment,
}

/// What a species stands for in the compiled neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    InputPlus,
    InputMinus,
    WeightPlus,
    WeightMinus,
    OutputPlus,
    OutputMinus,
    AuxInputPlus,
    AuxInputMinus,
    AuxWeightPlus,
    AuxWeightMinus,
    AuxOutputPlus,
    AuxOutputMinus,
    ErrorPlus,
    ErrorMinus,
    DeltaWeightPlus,
    DeltaWeightMinus,
    DesiredPlus,
    DesiredMinus,
    CatalystB,
    Waste,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: usize,
    pub name: String,
    pub compartment: Compartment,
    pub role: Role,
    /// Input index for per-input species (`0` is the bias), `None` otherwise.
    pub index: Option<usize>,
}

/// A single reaction with integer stoichiometry and a positive rate constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: BTreeMap<usize, u32>,
    pub products: BTreeMap<usize, u32>,
    pub rate_constant: f64,
    pub label: String,
}

impl Reaction {
    pub fn new(
        label: impl Into<String>,
        reactants: &[(usize, u32)],
        products: &[(usize, u32)],
        rate_constant: f64,
    ) -> Self {
        fn collect(side: &[(usize, u32)]) -> BTreeMap<usize, u32> {
            let mut map = BTreeMap::new();
            for &(id, coeff) in side {
                if coeff > 0 {
                    *map.entry(id).or_insert(0) += coeff;
                }
            }
            map
        }
        Reaction {
            reactants: collect(reactants),
            products: collect(products),
            rate_constant,
            label: label.into(),
        }
    }

    /// Net stoichiometric change `β − α` of a species in this reaction.
    pub fn net_change(&self, species: usize) -> i64 {
        let produced = self.products.get(&species).copied().unwrap_or(0) as i64;
        let consumed = self.reactants.get(&species).copied().unwrap_or(0) as i64;
        produced - consumed
    }

    fn species_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.reactants.keys().chain(self.products.keys()).copied()
    }
}

/// Mass-action rate `k · Π x_i^α_i` of `reaction` at `state`.
///
/// Negative concentrations are treated as zero and `0^0 = 1`.
pub fn mass_action_rate(reaction: &Reaction, state: &SystemState) -> f64 {
    reaction
        .reactants
        .iter()
        .fold(reaction.rate_constant, |acc, (&id, &alpha)| {
            acc * state.concentrations[id].max(0.0).powi(alpha as i32)
        })
}

/// Concentration vector at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub concentrations: Vec<f64>,
}

impl SystemState {
    pub fn zeros(n_species: usize) -> Self {
        SystemState {
            time: 0.0,
            concentrations: vec![0.0; n_species],
        }
    }

    pub fn new(time: f64, concentrations: Vec<f64>) -> Self {
        SystemState {
            time,
            concentrations,
        }
    }

    pub fn len(&self) -> usize {
        self.concentrations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concentrations.is_empty()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.concentrations[id]
    }

    pub fn set(&mut self, id: usize, value: f64) {
        self.concentrations[id] = value;
    }
}

// Flattened form of a reaction used in the hot loop.
#[derive(Debug, Clone)]
struct Kinetics {
    reactants: Vec<(usize, i32)>,
    deltas: Vec<(usize, f64)>,
    rate_constant: f64,
}

/// An immutable mass-action system: species, reactions and rate constants.
#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    kinetics: Vec<Kinetics>,
}

impl ReactionNetwork {
    /// Validates and freezes a network.
    pub fn new(species: Vec<Species>, reactions: Vec<Reaction>) -> Result<Self> {
        for (pos, s) in species.iter().enumerate() {
            if s.id != pos {
                return Err(Error::InvalidInput(format!(
                    "species `{}` has id {} but sits at position {pos}",
                    s.name, s.id
                )));
            }
        }
        let mut names = HashSet::new();
        let mut tags = HashSet::new();
        for s in &species {
            if !names.insert(s.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate species name `{}`",
                    s.name
                )));
            }
            if !tags.insert((s.compartment, s.role, s.index)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate role {:?}{} in compartment {:?}",
                    s.role,
                    s.index.map(|i| format!("[{i}]")).unwrap_or_default(),
                    s.compartment
                )));
            }
        }
        for r in &reactions {
            if !(r.rate_constant.is_finite() && r.rate_constant > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "reaction `{}` has non-positive rate constant {}",
                    r.label, r.rate_constant
                )));
            }
            if let Some(bad) = r.species_ids().find(|&id| id >= species.len()) {
                return Err(Error::InvalidInput(format!(
                    "reaction `{}` references unknown species id {bad}",
                    r.label
                )));
            }
        }

        let kinetics = reactions
            .iter()
            .map(|r| {
                let mut ids: BTreeSet<usize> = BTreeSet::new();
                ids.extend(r.species_ids());
                Kinetics {
                    reactants: r.reactants.iter().map(|(&i, &a)| (i, a as i32)).collect(),
                    deltas: ids
                        .into_iter()
                        .filter_map(|id| {
                            let d = r.net_change(id);
                            (d != 0).then_some((id, d as f64))
                        })
                        .collect(),
                    rate_constant: r.rate_constant,
                }
            })
            .collect();

        Ok(ReactionNetwork {
            species,
            reactions,
            kinetics,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn species_by_name(&self, name: &str) -> Option<&Species> {
        self.species.iter().find(|s| s.name == name)
    }

    /// Looks up a species by role and index, in any compartment.
    pub fn find(&self, role: Role, index: Option<usize>) -> Option<usize> {
        self.species
            .iter()
            .find(|s| s.role == role && s.index == index)
            .map(|s| s.id)
    }

    /// `dx/dt` at `state`. Pure; does not touch the state.
    pub fn vector_field(&self, state: &SystemState) -> Result<Vec<f64>> {
        if state.len() != self.n_species() {
            return Err(Error::DimensionMismatch {
                expected: self.n_species(),
                found: state.len(),
            });
        }
        let mut out = vec![0.0; self.n_species()];
        self.eval_into(&state.concentrations, &mut out);
        Ok(out)
    }

    /// Writes `dx/dt` at `x` into `out`. Lengths must match the species count.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for kin in &self.kinetics {
            let rate = kin
                .reactants
                .iter()
                .fold(kin.rate_constant, |acc, &(id, alpha)| {
                    acc * x[id].max(0.0).powi(alpha)
                });
            if rate == 0.0 {
                continue;
            }
            for &(id, delta) in &kin.deltas {
                out[id] += delta * rate;
            }
        }
    }

    /// Species whose net stoichiometric change is zero in every reaction.
    pub fn conserved_catalysts(&self) -> BTreeSet<usize> {
        (0..self.n_species())
            .filter(|&id| self.reactions.iter().all(|r| r.net_change(id) == 0))
            .collect()
    }

    /// Same network with every rate constant multiplied by `factor`.
    pub fn with_scaled_rates(&self, factor: f64) -> Result<Self> {
        let reactions = self
            .reactions
            .iter()
            .map(|r| Reaction {
                rate_constant: r.rate_constant * factor,
                ..r.clone()
            })
            .collect();
        ReactionNetwork::new(self.species.clone(), reactions)
    }

    fn format_complex(&self, side: &BTreeMap<usize, u32>) -> String {
        if side.is_empty() {
            return EMPTY_COMPLEX.to_string();
        }
        side.iter()
            .map(|(&id, &c)| {
                let name = &self.species[id].name;
                if c == 1 {
                    name.clone()
                } else {
                    format!("{c}{name}")
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Renders one reaction as `label: reactants -> products @ k`.
    pub fn format_reaction(&self, r: &Reaction) -> String {
        format!(
            "{}: {} -> {} @ {}",
            r.label,
            self.format_complex(&r.reactants),
            self.format_complex(&r.products),
            r.rate_constant
        )
    }

    /// Reaction dump, one reaction per line, sorted by label.
    pub fn dump(&self) -> String {
        let mut sorted: Vec<&Reaction> = self.reactions.iter().collect();
        sorted.sort_by(|a, b| a.label.cmp(&b.label));
        let mut out = String::new();
        for r in sorted {
            out.push_str(&self.format_reaction(r));
            out.push('\n');
        }
        out
    }

    /// Parses a reaction dump against this network's species names.
    pub fn parse_dump(&self, text: &str) -> Result<Vec<Reaction>> {
        let ids: HashMap<&str, usize> = self
            .species
            .iter()
            .map(|s| (s.name.as_str(), s.id))
            .collect();
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| parse_reaction_line(line, &ids))
            .collect()
    }
}

fn parse_reaction_line(line: &str, ids: &HashMap<&str, usize>) -> Result<Reaction> {
    let bad = |why: &str| Error::InvalidInput(format!("malformed reaction `{line}`: {why}"));
    let (label, rest) = line.split_once(':').ok_or_else(|| bad("missing `:`"))?;
    let (equation, rate) = rest.rsplit_once('@').ok_or_else(|| bad("missing `@`"))?;
    let (lhs, rhs) = equation
        .split_once("->")
        .ok_or_else(|| bad("missing `->`"))?;
    let rate_constant: f64 = rate
        .trim()
        .parse()
        .map_err(|_| bad("rate constant is not a number"))?;

    let parse_side = |side: &str| -> Result<Vec<(usize, u32)>> {
        let side = side.trim();
        if side == EMPTY_COMPLEX || side.is_empty() {
            return Ok(Vec::new());
        }
        side.split(" + ")
            .map(|term| {
                let term = term.trim();
                let digits = term.chars().take_while(char::is_ascii_digit).count();
                let (coeff, name) = term.split_at(digits);
                let coeff = if coeff.is_empty() {
                    1
                } else {
                    coeff.parse().map_err(|_| bad("bad coefficient"))?
                };
                let id = *ids
                    .get(name)
                    .ok_or_else(|| bad(&format!("unknown species `{name}`")))?;
                Ok((id, coeff))
            })
            .collect()
    };

    Ok(Reaction::new(
        label.trim(),
        &parse_side(lhs)?,
        &parse_side(rhs)?,
        rate_constant,
    ))
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Incremental construction of a [`ReactionNetwork`] with dense ids.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn species(
        &mut self,
        name: impl Into<String>,
        compartment: Compartment,
        role: Role,
        index: Option<usize>,
    ) -> usize {
        let id = self.species.len();
        self.species.push(Species {
            id,
            name: name.into(),
            compartment,
            role,
            index,
        });
        id
    }

    pub fn reaction(
        &mut self,
        label: impl Into<String>,
        reactants: &[(usize, u32)],
        products: &[(usize, u32)],
        rate_constant: f64,
    ) {
        self.reactions
            .push(Reaction::new(label, reactants, products, rate_constant));
    }

    pub fn build(self) -> Result<ReactionNetwork> {
        ReactionNetwork::new(self.species, self.reactions)
    }
}
