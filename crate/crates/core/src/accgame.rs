use std::collections::HashMap;
use std::rc::Rc;

use crate::automaton::{minimalize, Automaton, Flavor, MacroPlan, MovePlan, Valuation};
use crate::carrier::{bits_iter, Bits, Carrier};
use crate::error::{Caps, Error, Result};
use crate::functor::{TObject, Value};
use crate::game::{solve_parity, ParityGame, Player, Position};
use crate::model::{TModel, TreeModel};
use crate::onestep::{eval_onestep, Env, OneStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Full,
    Tree,
}

/// The local one-step window the players see at a node.
struct LocalWindow {
    carrier: Carrier,
    alpha: TObject,
    /// local index -> global node index
    to_global: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Minimal admissible valuations
// ---------------------------------------------------------------------------

/// Computes Exists' move set for a transition on a local window, following
/// the transition's move plan. Returns minimal admissible valuations; the
/// restriction to minimal moves preserves winners because a smaller valuation
/// only removes options for the opponent.
pub fn min_moves(
    aut: &Automaton,
    formula: &OneStep,
    plan: &MovePlan,
    carrier: &Carrier,
    alpha: &TObject,
    caps: &Caps,
) -> Result<Vec<Valuation>> {
    let vals = plan_moves(aut, formula, plan, carrier, alpha, caps)?;
    Ok(minimalize(vals))
}

fn plan_moves(
    aut: &Automaton,
    formula: &OneStep,
    plan: &MovePlan,
    carrier: &Carrier,
    alpha: &TObject,
    caps: &Caps,
) -> Result<Vec<Valuation>> {
    match plan {
        MovePlan::Scan(occ) => {
            let named: Vec<(u32, String)> = occ
                .iter()
                .map(|&s| (s as u32, aut.states[s].clone()))
                .collect();
            scan_satisfying(aut, formula, &named, carrier, alpha, caps, true)
        }
        MovePlan::Or(alts) => {
            let mut out = Vec::new();
            for (f, p) in alts {
                out.extend(plan_moves(aut, f, p, carrier, alpha, caps)?);
            }
            Ok(out)
        }
        // an up-closure has the same minimal elements as the inner set
        MovePlan::UpClosure(inner) => {
            let (f, p) = &**inner;
            plan_moves(aut, f, p, carrier, alpha, caps)
        }
        MovePlan::Transversal(inner) => {
            let (f, p) = &**inner;
            let base = minimalize(plan_moves(aut, f, p, carrier, alpha, caps)?);
            transversals(&base, caps)
        }
        MovePlan::Macro(mp) => macro_moves(aut, mp, carrier, alpha, caps),
    }
}

/// Brute-force scan over the listed variables; each variable is a pair of
/// (output key, name used in the formula). With `minimal` the result is
/// pruned to the antichain of minimal satisfying valuations.
fn scan_satisfying(
    aut: &Automaton,
    formula: &OneStep,
    vars: &[(u32, String)],
    carrier: &Carrier,
    alpha: &TObject,
    caps: &Caps,
    minimal: bool,
) -> Result<Vec<Valuation>> {
    let n = carrier.len();
    if n > caps.quantifier {
        return Err(Error::Cap(format!(
            "one-step window of size {n} exceeds the quantifier cap {}",
            caps.quantifier
        )));
    }
    let per = 1u128 << n;
    let total = (per as f64).powi(vars.len() as i32);
    if total > caps.moves as f64 {
        return Err(Error::Cap(format!(
            "valuation scan of {total:.0} candidates exceeds the move cap"
        )));
    }
    let mut out = Vec::new();
    let mut assignment = vec![0 as Bits; vars.len()];
    loop {
        let mut env = Env::default();
        for (k, (_, name)) in vars.iter().enumerate() {
            env.push(name, assignment[k]);
        }
        if eval_onestep(formula, alpha, &mut env, &aut.lambda, caps.quantifier)? {
            let mut val: Valuation = vars
                .iter()
                .zip(&assignment)
                .filter(|&(_, &m)| m != 0)
                .map(|(&(key, _), &m)| (key, m))
                .collect();
            val.sort();
            out.push(val);
        }
        let mut pos = 0;
        while pos < assignment.len() {
            assignment[pos] += 1;
            if assignment[pos] < per {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
        if pos == assignment.len() {
            break;
        }
    }
    if minimal {
        out = minimalize(out);
    }
    Ok(out)
}

/// Minimal transversals of a family of valuations (viewed as sets of
/// (state, element) pairs): the minimal models of the Boolean dual of a
/// monotone formula with the given minimal models.
fn transversals(base: &[Valuation], caps: &Caps) -> Result<Vec<Valuation>> {
    let mut cur: Vec<Valuation> = vec![Vec::new()];
    for m in base {
        let pairs: Vec<(u32, usize)> = m
            .iter()
            .flat_map(|&(s, mask)| bits_iter(mask).map(move |i| (s, i)))
            .collect();
        if pairs.is_empty() {
            // the empty valuation satisfies the inner formula, so its
            // up-closure is everything and the dual is unsatisfiable
            return Ok(Vec::new());
        }
        let mut next: Vec<Valuation> = Vec::new();
        for t in &cur {
            let hits = pairs
                .iter()
                .any(|&(s, i)| t.iter().any(|&(v, m)| v == s && m & (1 << i) != 0));
            if hits {
                next.push(t.clone());
            } else {
                for &(s, i) in &pairs {
                    let mut ext = t.clone();
                    match ext.iter_mut().find(|(v, _)| *v == s) {
                        Some(slot) => slot.1 |= 1 << i,
                        None => ext.push((s, 1 << i)),
                    }
                    ext.sort();
                    next.push(ext);
                }
            }
        }
        cur = minimalize(next);
        if cur.len() > caps.moves {
            return Err(Error::Cap(
                "transversal enumeration exceeds the move cap".into(),
            ));
        }
    }
    Ok(cur)
}

/// Moves of a simulation macro-state: pick a minimal model W_b of each
/// source transition in the range of the relation, then send each window
/// element to the state recording exactly the (b, a) demands it witnesses.
fn macro_moves(
    aut: &Automaton,
    mp: &MacroPlan,
    carrier: &Carrier,
    alpha: &TObject,
    caps: &Caps,
) -> Result<Vec<Valuation>> {
    let mut per_conjunct: Vec<Vec<Valuation>> = Vec::with_capacity(mp.conjuncts.len());
    for (_, f, p) in &mp.conjuncts {
        per_conjunct.push(minimalize(plan_moves_source(aut, f, p, carrier, alpha, caps)?));
    }
    if per_conjunct.iter().any(|v| v.is_empty()) {
        return Ok(Vec::new()); // some conjunct is unsatisfiable here
    }
    let combos: usize = per_conjunct.iter().map(|v| v.len()).product();
    if combos > caps.moves {
        return Err(Error::Cap(format!(
            "macro-state move assembly of {combos} combinations exceeds the move cap"
        )));
    }
    let n = carrier.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_conjunct.len()];
    loop {
        // need(x) = { (b, a) | x in W_b(a) }
        let mut need: Vec<Vec<(u16, u16)>> = vec![Vec::new(); n];
        for (k, (b, _, _)) in mp.conjuncts.iter().enumerate() {
            let w = &per_conjunct[k][idx[k]];
            for &(a, mask) in w {
                for x in bits_iter(mask) {
                    need[x].push((*b as u16, a as u16));
                }
            }
        }
        let mut val: HashMap<usize, Bits> = HashMap::new();
        for (x, mut pairs) in need.into_iter().enumerate() {
            if pairs.is_empty() {
                continue;
            }
            pairs.sort();
            pairs.dedup();
            let target = mp.target_of.get(&pairs).ok_or_else(|| {
                Error::Malformed(format!(
                    "simulation reachable-state table is missing need shape {pairs:?}"
                ))
            })?;
            *val.entry(*target).or_insert(0) |= 1 << x;
        }
        let mut v: Valuation = val.into_iter().map(|(s, m)| (s as u32, m)).collect();
        v.sort();
        out.push(v);
        // odometer over combinations
        let mut pos = 0;
        while pos < idx.len() {
            idx[pos] += 1;
            if idx[pos] < per_conjunct[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == idx.len() {
            break;
        }
    }
    Ok(out)
}

/// Move sets for source-automaton transitions embedded in a macro plan. The
/// simulation construction renames source state variables to the "#<idx>"
/// namespace, so the valuations computed here are keyed by source index.
fn plan_moves_source(
    aut: &Automaton,
    formula: &OneStep,
    plan: &MovePlan,
    carrier: &Carrier,
    alpha: &TObject,
    caps: &Caps,
) -> Result<Vec<Valuation>> {
    match plan {
        MovePlan::Scan(_) => {
            let named: Vec<(u32, String)> = formula
                .free_vars()
                .into_iter()
                .map(|name| {
                    let idx: u32 = name
                        .strip_prefix('#')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| {
                            Error::Malformed(format!(
                                "source transition variable {name} lacks the #index form"
                            ))
                        })?;
                    Ok((idx, name))
                })
                .collect::<Result<_>>()?;
            scan_satisfying(aut, formula, &named, carrier, alpha, caps, true)
        }
        MovePlan::Or(alts) => {
            let mut out = Vec::new();
            for (f, p) in alts {
                out.extend(plan_moves_source(aut, f, p, carrier, alpha, caps)?);
            }
            Ok(out)
        }
        MovePlan::UpClosure(inner) => {
            let (f, p) = &**inner;
            plan_moves_source(aut, f, p, carrier, alpha, caps)
        }
        MovePlan::Transversal(inner) => {
            let (f, p) = &**inner;
            let base = minimalize(plan_moves_source(aut, f, p, carrier, alpha, caps)?);
            transversals(&base, caps)
        }
        // a source transition may itself come from a simulation; its macro
        // tables already point at this automaton's source indices
        MovePlan::Macro(mp) => macro_moves(aut, mp, carrier, alpha, caps),
    }
}

// ---------------------------------------------------------------------------
// Game construction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum PosKey {
    State(usize, usize),
    Val(usize, Vec<(u32, Bits)>),
}

pub struct BuiltGame {
    pub game: ParityGame,
    pub start_position: usize,
}

struct GameCtx<'a> {
    aut: &'a Automaton,
    model: &'a TModel,
    caps: &'a Caps,
    positions: Vec<Position>,
    keys: Vec<PosKey>,
    index: HashMap<PosKey, usize>,
}

impl GameCtx<'_> {
    fn intern(&mut self, key: PosKey) -> Result<usize> {
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let i = self.positions.len();
        if i >= self.caps.game_positions {
            return Err(Error::Cap("game position cap exceeded".into()));
        }
        let pos = match &key {
            PosKey::State(a, s) => Position {
                owner: Player::Exists,
                priority: self.aut.priority[*a],
                moves: Vec::new(),
                label: format!(
                    "({},{})",
                    self.aut.states[*a],
                    self.model.carrier.atom(*s)
                ),
            },
            PosKey::Val(s, val) => Position {
                owner: Player::Forall,
                priority: 0,
                moves: Vec::new(),
                label: format!(
                    "({},[{}])",
                    self.model.carrier.atom(*s),
                    val.iter()
                        .map(|(a, m)| format!("{}:{:b}", self.aut.states[*a as usize], m))
                        .collect::<Vec<_>>()
                        .join(" ")
                ),
            },
        };
        self.positions.push(pos);
        self.keys.push(key.clone());
        self.index.insert(key, i);
        Ok(i)
    }
}

/// Builds the acceptance game. `Mode::Full` plays the modal game over the
/// whole carrier (modal automata only); `Mode::Tree` plays the support-
/// restricted game over the frame windows. With `pruned` false, Exists'
/// moves are all admissible valuations over the occurring variables instead
/// of only the minimal ones (a cross-check path for small instances).
pub fn build_acceptance_game(
    aut: &Automaton,
    model: &TModel,
    frame: Option<&[Bits]>,
    start: usize,
    mode: Mode,
    caps: &Caps,
    pruned: bool,
) -> Result<BuiltGame> {
    aut.validate()?;
    if model.functor != aut.functor {
        return Err(Error::CarrierMismatch(format!(
            "automaton functor {} differs from model functor {}",
            aut.functor, model.functor
        )));
    }
    if mode == Mode::Full && aut.flavor != Flavor::Ml1 {
        return Err(Error::Unsupported(
            "the full-carrier game is defined for modal automata only".into(),
        ));
    }
    let frame = match (mode, frame) {
        (Mode::Tree, Some(f)) => Some(f),
        (Mode::Tree, None) => return Err(Error::Malformed("tree mode requires a frame".into())),
        (Mode::Full, _) => None,
    };

    let n_nodes = model.carrier.len();
    let mut windows: Vec<LocalWindow> = Vec::with_capacity(n_nodes);
    let mut colors: Vec<usize> = Vec::with_capacity(n_nodes);
    for s in 0..n_nodes {
        let window = match frame {
            Some(fr) => {
                let (sub, inj) = model.carrier.restrict(fr[s]);
                let alpha =
                    crate::functor::restrict_to_support(&model.sigma[s], fr[s]).map_err(|_| {
                        Error::NotASupport(format!(
                            "frame at {} does not support sigma there",
                            model.carrier.atom(s)
                        ))
                    })?;
                LocalWindow {
                    carrier: sub,
                    alpha,
                    to_global: inj.map,
                }
            }
            None => LocalWindow {
                carrier: model.carrier.clone(),
                alpha: model.sigma[s].clone(),
                to_global: (0..n_nodes).collect(),
            },
        };
        let true_vars = model.color_at(s, &aut.chromatic);
        colors.push(aut.color_of(&true_vars));
        windows.push(window);
    }

    let mut move_memo: HashMap<(usize, usize, usize, Value), Rc<Vec<Valuation>>> = HashMap::new();

    let mut ctx = GameCtx {
        aut,
        model,
        caps,
        positions: Vec::new(),
        keys: Vec::new(),
        index: HashMap::new(),
    };
    let start_position = ctx.intern(PosKey::State(aut.initial, start))?;

    let mut head = 0usize;
    while head < ctx.positions.len() {
        let key = ctx.keys[head].clone();
        match key {
            PosKey::State(a, s) => {
                let color = colors[s];
                let w = &windows[s];
                let memo_key = (a, color, w.carrier.len(), w.alpha.value.clone());
                let moves = match move_memo.get(&memo_key) {
                    Some(rc) => rc.clone(),
                    None => {
                        let t = &aut.delta[a][color];
                        let vals = if pruned {
                            min_moves(aut, &t.formula, &t.plan, &w.carrier, &w.alpha, caps)?
                        } else {
                            let named: Vec<(u32, String)> = t
                                .formula
                                .free_vars()
                                .iter()
                                .filter_map(|v| {
                                    aut.states
                                        .iter()
                                        .position(|x| x == v)
                                        .map(|i| (i as u32, v.clone()))
                                })
                                .collect();
                            scan_satisfying(
                                aut, &t.formula, &named, &w.carrier, &w.alpha, caps, false,
                            )?
                        };
                        let rc = Rc::new(vals);
                        move_memo.insert(memo_key, rc.clone());
                        rc
                    }
                };
                let mut edges = Vec::with_capacity(moves.len());
                for val in moves.iter() {
                    edges.push(ctx.intern(PosKey::Val(s, val.clone()))?);
                }
                ctx.positions[head].moves = edges;
            }
            PosKey::Val(s, val) => {
                let w = &windows[s];
                let mut edges = Vec::new();
                for &(b, mask) in &val {
                    for x in bits_iter(mask) {
                        let t = w.to_global[x];
                        edges.push(ctx.intern(PosKey::State(b as usize, t))?);
                    }
                }
                edges.sort();
                edges.dedup();
                ctx.positions[head].moves = edges;
            }
        }
        head += 1;
    }

    Ok(BuiltGame {
        game: ParityGame::new(ctx.positions, start_position),
        start_position,
    })
}

/// Acceptance: Exists wins the acceptance game from (initial, start).
pub fn accepts(
    aut: &Automaton,
    model: &TModel,
    frame: Option<&[Bits]>,
    start: usize,
    mode: Mode,
    caps: &Caps,
) -> Result<bool> {
    let built = build_acceptance_game(aut, model, frame, start, mode, caps, true)?;
    let solved = solve_parity(&built.game);
    Ok(solved.exists_wins(built.start_position))
}

pub fn accepts_tree(aut: &Automaton, tree: &TreeModel, caps: &Caps) -> Result<bool> {
    accepts(
        aut,
        &tree.model,
        Some(&tree.frame),
        tree.root,
        Mode::Tree,
        caps,
    )
}

/// The modal game over the full carrier.
pub fn accepts_full(aut: &Automaton, model: &TModel, start: usize, caps: &Caps) -> Result<bool> {
    accepts(aut, model, None, start, Mode::Full, caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Transition;
    use crate::functor::FunctorSpec;
    use crate::lifting::Lambda;
    use crate::onestep::{Lattice, Ml1, So1};
    use std::collections::BTreeMap;

    fn one_state_ml(formula: Ml1, priority: u32) -> Automaton {
        let states = vec!["a".to_string()];
        let f = OneStep::Ml(formula);
        Automaton {
            states: states.clone(),
            initial: 0,
            priority: vec![priority],
            chromatic: vec![],
            flavor: Flavor::Ml1,
            functor: FunctorSpec::Powerset,
            lambda: Lambda::standard(&FunctorSpec::Powerset),
            delta: vec![vec![Transition::scanned(f, &states)]],
        }
    }

    fn reflexive_point() -> TModel {
        let c = Carrier::new(["s"]).unwrap();
        let sigma = vec![TObject::powerset(&c, &["s"]).unwrap()];
        TModel::new(FunctorSpec::Powerset, c, sigma, BTreeMap::new()).unwrap()
    }

    #[test]
    fn top_automaton_accepts_everything() {
        let aut = one_state_ml(Ml1::Top, 0);
        let m = reflexive_point();
        assert!(accepts_full(&aut, &m, 0, &Caps::default()).unwrap());
    }

    #[test]
    fn bot_automaton_rejects_everything() {
        let aut = one_state_ml(Ml1::Bot, 0);
        let m = reflexive_point();
        assert!(!accepts_full(&aut, &m, 0, &Caps::default()).unwrap());
    }

    #[test]
    fn odd_dia_loop_rejected_even_accepted() {
        // single state, delta = dia(a): the unique infinite play loops with
        // the state's priority deciding the winner
        let dia = Ml1::Lift("dia".into(), vec![Lattice::var("a")]);
        let m = reflexive_point();
        let odd = one_state_ml(dia.clone(), 1);
        assert!(!accepts_full(&odd, &m, 0, &Caps::default()).unwrap());
        let even = one_state_ml(dia, 2);
        assert!(accepts_full(&even, &m, 0, &Caps::default()).unwrap());
    }

    #[test]
    fn full_mode_rejects_so_automata() {
        let states = vec!["a".to_string()];
        let f = OneStep::So(So1::Top);
        let aut = Automaton {
            states: states.clone(),
            initial: 0,
            priority: vec![0],
            chromatic: vec![],
            flavor: Flavor::So1,
            functor: FunctorSpec::Powerset,
            lambda: Lambda::standard(&FunctorSpec::Powerset),
            delta: vec![vec![Transition::scanned(f, &states)]],
        };
        let m = reflexive_point();
        assert!(accepts_full(&aut, &m, 0, &Caps::default()).is_err());
    }

    #[test]
    fn transversal_of_box_behaves_like_dia() {
        // minimal models of box(a) on alpha={x,y}: exactly {a -> {x,y}};
        // its transversals are the singletons, i.e. dia-moves.
        let c = Carrier::new(["x", "y"]).unwrap();
        let alpha = TObject::powerset(&c, &["x", "y"]).unwrap();
        let aut = one_state_ml(Ml1::Lift("box".into(), vec![Lattice::var("a")]), 0);
        let f = OneStep::Ml(Ml1::Lift("box".into(), vec![Lattice::var("a")]));
        let base = min_moves(
            &aut,
            &f,
            &MovePlan::Scan(vec![0]),
            &c,
            &alpha,
            &Caps::default(),
        )
        .unwrap();
        assert_eq!(base, vec![vec![(0u32, 0b11)]]);
        let duals = transversals(&base, &Caps::default()).unwrap();
        assert_eq!(duals.len(), 2);
        assert!(duals.contains(&vec![(0u32, 0b01)]));
        assert!(duals.contains(&vec![(0u32, 0b10)]));
    }

    #[test]
    fn tree_mode_game_on_a_path() {
        // two-node path, automaton visits child then stops
        let states = vec!["go".to_string(), "stop".to_string()];
        let dia_go = OneStep::Ml(Ml1::Lift("dia".into(), vec![Lattice::var("stop")]));
        let aut = Automaton {
            states: states.clone(),
            initial: 0,
            priority: vec![0, 0],
            chromatic: vec![],
            flavor: Flavor::Ml1,
            functor: FunctorSpec::Powerset,
            lambda: Lambda::standard(&FunctorSpec::Powerset),
            delta: vec![
                vec![Transition::scanned(dia_go, &states)],
                vec![Transition::scanned(OneStep::Ml(Ml1::Top), &states)],
            ],
        };
        let c = Carrier::new(["r", "c"]).unwrap();
        let ri = c.index_of("r").unwrap();
        let ci = c.index_of("c").unwrap();
        let mut sigma = vec![TObject::powerset(&c, &[]).unwrap(); 2];
        sigma[ri] = TObject::powerset(&c, &["c"]).unwrap();
        let model = TModel::new(FunctorSpec::Powerset, c.clone(), sigma, BTreeMap::new()).unwrap();
        let mut frame = vec![0; 2];
        frame[ri] = c.singleton("c").unwrap();
        frame[ci] = 0;
        let tree = TreeModel::new(model, frame, ri).unwrap();
        assert!(accepts_tree(&aut, &tree, &Caps::default()).unwrap());
    }
}
