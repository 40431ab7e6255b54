use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value as Json;

use crate::carrier::Bits;
use crate::error::{Error, Result};
use crate::functor::FunctorSpec;
use crate::lifting::Lambda;
use crate::model::{functor_from_json, functor_to_json};
use crate::onestep::{onestep_to_text, parse_ml1, parse_so1, OneStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Ml1,
    So1,
}

/// A parity automaton over a one-step language: states, chromatic variable
/// set P, transition map on state x color, priorities, initial state. The
/// transition target is a one-step formula whose variables are states.
#[derive(Clone, Debug)]
pub struct Automaton {
    pub states: Vec<String>,
    pub initial: usize,
    pub priority: Vec<u32>,
    /// Chromatic variables, sorted; colors are masks over this list.
    pub chromatic: Vec<String>,
    pub flavor: Flavor,
    pub functor: FunctorSpec,
    pub lambda: Lambda,
    /// delta[state][color-mask] -> transition.
    pub delta: Vec<Vec<Transition>>,
}

/// A transition: the one-step formula (the contract surface) plus a move
/// plan that the acceptance game uses to enumerate Exists' valuations
/// without scanning the full valuation lattice.
#[derive(Clone, Debug)]
pub struct Transition {
    pub formula: OneStep,
    pub plan: MovePlan,
}

impl Transition {
    pub fn scanned(formula: OneStep, aut_states: &[String]) -> Transition {
        let occ: Vec<usize> = formula
            .free_vars()
            .iter()
            .filter_map(|v| aut_states.iter().position(|s| s == v))
            .collect();
        Transition {
            plan: MovePlan::Scan(occ),
            formula,
        }
    }
}

/// How to enumerate the minimal admissible valuations of a transition.
/// `Scan` brute-forces over the occurring state-variables. The composite
/// nodes mirror the closure constructions: unions take unions of move sets,
/// the monotonization wrapper keeps the inner minimal models, Boolean duals
/// take minimal transversals, and simulation states assemble moves from the
/// minimal models of the source automaton's transitions.
#[derive(Clone, Debug)]
pub enum MovePlan {
    /// Brute-force scan over these state indices (others fixed to empty).
    Scan(Vec<usize>),
    /// Disjunction: union of the alternatives' move sets.
    Or(Vec<(OneStep, MovePlan)>),
    /// Monotonization wrapper around the original formula and plan.
    UpClosure(Box<(OneStep, MovePlan)>),
    /// Boolean dual of a monotone inner formula.
    Transversal(Box<(OneStep, MovePlan)>),
    /// Simulation macro-state: conjunction over the range of the relation.
    Macro(MacroPlan),
}

/// Data for a simulation-state transition at a fixed color: the source
/// transitions to satisfy, and the target-state lookup for need-shaped
/// relations (already rewired through the stream automaton).
#[derive(Clone, Debug)]
pub struct MacroPlan {
    /// (source state index b, source formula Delta(b,c), source plan)
    pub conjuncts: Vec<(usize, OneStep, MovePlan)>,
    /// number of source-automaton states
    pub source_states: usize,
    /// need-relation (sorted pair list over source states) -> target state
    pub target_of: BTreeMap<Vec<(u16, u16)>, usize>,
}

/// A sparse valuation of automaton states by subsets of a local carrier:
/// sorted (state, nonzero mask) pairs.
pub type Valuation = Vec<(u32, Bits)>;

/// Pointwise order on sparse valuations.
pub fn val_leq(a: &Valuation, b: &Valuation) -> bool {
    a.iter().all(|&(s, m)| {
        m == 0
            || b.iter()
                .find(|&&(t, _)| t == s)
                .map(|&(_, n)| m & !n == 0)
                .unwrap_or(false)
    })
}

/// Keep only the minimal elements (and dedup).
pub fn minimalize(mut vals: Vec<Valuation>) -> Vec<Valuation> {
    for v in &mut vals {
        v.retain(|&(_, m)| m != 0);
        v.sort();
    }
    vals.sort();
    vals.dedup();
    let mut out: Vec<Valuation> = Vec::new();
    'outer: for v in &vals {
        for w in &vals {
            if w != v && val_leq(w, v) {
                continue 'outer;
            }
        }
        out.push(v.clone());
    }
    out
}

impl Automaton {
    pub fn color_count(&self) -> usize {
        1 << self.chromatic.len()
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Unbound(format!("automaton state {name}")))
    }

    /// The color mask of a node given its true variables.
    pub fn color_of(&self, true_vars: &[String]) -> usize {
        let mut c = 0usize;
        for (i, p) in self.chromatic.iter().enumerate() {
            if true_vars.iter().any(|v| v == p) {
                c |= 1 << i;
            }
        }
        c
    }

    pub fn color_vars(&self, color: usize) -> Vec<String> {
        self.chromatic
            .iter()
            .enumerate()
            .filter(|&(i, _)| color & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect()
    }

    /// Structural checks: delta total, flavor consistent, state variables
    /// in range.
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() || self.initial >= self.states.len() {
            return Err(Error::Malformed("bad initial state".into()));
        }
        if self.delta.len() != self.states.len() || self.priority.len() != self.states.len() {
            return Err(Error::Malformed("delta/priority not total on states".into()));
        }
        for row in &self.delta {
            if row.len() != self.color_count() {
                return Err(Error::Malformed("delta not total on colors".into()));
            }
            for t in row {
                match (&t.formula, self.flavor) {
                    (OneStep::Ml(_), Flavor::Ml1) | (OneStep::So(_), Flavor::So1) => {}
                    _ => {
                        return Err(Error::Malformed(
                            "transition flavor differs from automaton flavor".into(),
                        ))
                    }
                }
                for v in t.formula.free_vars() {
                    if !self.states.iter().any(|s| *s == v) {
                        return Err(Error::Malformed(format!(
                            "transition mentions unknown state {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// DOT rendering of the automaton graph: an edge per syntactic state
    /// occurrence in a transition formula, labeled with the color.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n");
        for (i, s) in self.states.iter().enumerate() {
            let mark = if i == self.initial { ", peripheries=2" } else { "" };
            let _ = writeln!(
                out,
                "  s{i} [label=\"{}\\nprio {}\"{mark}];",
                s.replace('"', "'"),
                self.priority[i]
            );
        }
        for (i, row) in self.delta.iter().enumerate() {
            for (c, t) in row.iter().enumerate() {
                for v in t.formula.free_vars() {
                    if let Ok(j) = self.state_index(&v) {
                        let _ = writeln!(
                            out,
                            "  s{i} -> s{j} [label=\"{}\"];",
                            self.color_vars(c).join(",")
                        );
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// JSON automaton files
// ---------------------------------------------------------------------------

pub fn automaton_to_json(aut: &Automaton) -> String {
    let mut delta = serde_json::Map::new();
    for (i, row) in aut.delta.iter().enumerate() {
        let mut colors = serde_json::Map::new();
        for (c, t) in row.iter().enumerate() {
            colors.insert(
                aut.color_vars(c).join(","),
                Json::String(onestep_to_text(&t.formula)),
            );
        }
        delta.insert(aut.states[i].clone(), Json::Object(colors));
    }
    let mut priority = serde_json::Map::new();
    for (i, s) in aut.states.iter().enumerate() {
        priority.insert(s.clone(), serde_json::json!(aut.priority[i]));
    }
    let doc = serde_json::json!({
        "states": aut.states,
        "initial": aut.states[aut.initial],
        "priority": priority,
        "chromatic": aut.chromatic,
        "flavor": match aut.flavor { Flavor::Ml1 => "ml1", Flavor::So1 => "so1" },
        "liftings": aut.lambda.names(),
        "functor": functor_to_json(&aut.functor),
        "delta": delta,
    });
    serde_json::to_string_pretty(&doc).expect("automaton serialization")
}

pub fn automaton_from_json(text: &str) -> Result<Automaton> {
    let doc: Json = serde_json::from_str(text)?;
    let states: Vec<String> = serde_json::from_value(
        doc.get("states")
            .ok_or_else(|| Error::Malformed("automaton file missing states".into()))?
            .clone(),
    )
    .map_err(|_| Error::Malformed("states must be a string list".into()))?;
    let initial_name = doc
        .get("initial")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Malformed("automaton file missing initial".into()))?;
    let initial = states
        .iter()
        .position(|s| s == initial_name)
        .ok_or_else(|| Error::Malformed("initial state not in state list".into()))?;
    let priority_map: BTreeMap<String, u32> = serde_json::from_value(
        doc.get("priority")
            .ok_or_else(|| Error::Malformed("missing priority".into()))?
            .clone(),
    )
    .map_err(|_| Error::Malformed("priority must map states to integers".into()))?;
    let mut priority = Vec::with_capacity(states.len());
    for s in &states {
        priority.push(
            *priority_map
                .get(s)
                .ok_or_else(|| Error::Malformed(format!("priority missing for {s}")))?,
        );
    }
    let mut chromatic: Vec<String> = serde_json::from_value(
        doc.get("chromatic")
            .ok_or_else(|| Error::Malformed("missing chromatic".into()))?
            .clone(),
    )
    .map_err(|_| Error::Malformed("chromatic must be a string list".into()))?;
    chromatic.sort();
    let flavor = match doc.get("flavor").and_then(|v| v.as_str()) {
        Some("ml1") => Flavor::Ml1,
        Some("so1") => Flavor::So1,
        _ => return Err(Error::Malformed("flavor must be ml1 or so1".into())),
    };
    let functor = functor_from_json(
        doc.get("functor")
            .ok_or_else(|| Error::Malformed("missing functor".into()))?,
    )?;
    let lambda = Lambda::standard(&functor);
    let delta_doc = doc
        .get("delta")
        .and_then(|v| v.as_object())
        .ok_or_else(|| Error::Malformed("missing delta".into()))?;

    let color_count = 1usize << chromatic.len();
    let mut delta = Vec::with_capacity(states.len());
    for s in &states {
        let row_doc = delta_doc
            .get(s)
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Malformed(format!("delta missing row for state {s}")))?;
        let mut row = Vec::with_capacity(color_count);
        for c in 0..color_count {
            let key: Vec<String> = chromatic
                .iter()
                .enumerate()
                .filter(|&(i, _)| c & (1 << i) != 0)
                .map(|(_, p)| p.clone())
                .collect();
            let key = key.join(",");
            let cell = row_doc.get(&key).and_then(|v| v.as_str()).ok_or_else(|| {
                Error::Malformed(format!("delta for {s} missing color {key:?}"))
            })?;
            let formula = match flavor {
                Flavor::Ml1 => OneStep::Ml(parse_ml1(cell)?),
                Flavor::So1 => OneStep::So(parse_so1(cell)?),
            };
            row.push(Transition::scanned(formula, &states));
        }
        delta.push(row);
    }
    let aut = Automaton {
        states,
        initial,
        priority,
        chromatic,
        flavor,
        functor,
        lambda,
        delta,
    };
    aut.validate()?;
    Ok(aut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onestep::So1;

    fn tiny() -> Automaton {
        let states = vec!["a0".to_string()];
        let f = OneStep::So(So1::Forall(
            "Z".into(),
            Box::new(So1::Sub("Z".into(), "a0".into())),
        ));
        Automaton {
            states: states.clone(),
            initial: 0,
            priority: vec![0],
            chromatic: vec!["p".into()],
            flavor: Flavor::So1,
            functor: FunctorSpec::Powerset,
            lambda: Lambda::standard(&FunctorSpec::Powerset),
            delta: vec![vec![
                Transition::scanned(f.clone(), &states),
                Transition::scanned(f, &states),
            ]],
        }
    }

    #[test]
    fn json_round_trip() {
        let a = tiny();
        let text = automaton_to_json(&a);
        let b = automaton_from_json(&text).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.priority, b.priority);
        assert_eq!(a.chromatic, b.chromatic);
        for (r1, r2) in a.delta.iter().zip(&b.delta) {
            for (t1, t2) in r1.iter().zip(r2) {
                assert_eq!(t1.formula, t2.formula);
            }
        }
    }

    #[test]
    fn minimalize_keeps_antichain() {
        let a: Valuation = vec![(0, 0b01)];
        let b: Valuation = vec![(0, 0b11)];
        let c: Valuation = vec![(1, 0b10)];
        let min = minimalize(vec![a.clone(), b, c.clone()]);
        assert_eq!(min.len(), 2);
        assert!(min.contains(&a));
        assert!(min.contains(&c));
    }

    #[test]
    fn validate_rejects_unknown_state_vars() {
        let mut a = tiny();
        a.delta[0][0] = Transition::scanned(
            OneStep::So(So1::Sub("ghost".into(), "a0".into())),
            &a.states,
        );
        assert!(a.validate().is_err());
    }
}
