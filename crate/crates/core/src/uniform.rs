use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::automaton::{Automaton, Flavor, Transition};
use crate::carrier::{bits_iter, Bits, Carrier, CarrierMap, MAX_CARRIER};
use crate::error::{Error, Result};
use crate::functor::{
    apply_map, enumerate_tobjects, minimal_antichain, FunctorSpec, TObject, Value,
};
use crate::lifting::{Lambda, Lifting, LiftingKind};
use crate::model::{OneStepModel, TModel, TreeModel};
use crate::onestep::{eval_so1, is_monotone_bruteforce, Lattice, Ml1, OneStep, So1};

/// A finitely parameterized uniform construction: maps (X, alpha) to a star
/// model (X_*, alpha_*, h : X_* -> X) with T(h)(alpha_*) = alpha. Omega-fold
/// copies are truncated to `m`; the supported-neighborhood construction also
/// depends on the quantifier depth `k` through its copy factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformConstruction {
    pub functor: FunctorSpec,
    pub m: usize,
    pub k: usize,
    pub kind: StarKind,
    /// quantifier-enumeration bound when evaluating formulas on star models
    pub eval_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarKind {
    Standard,
    /// The do-nothing construction (X, alpha, id). Trivially uniform; used
    /// to replay the inadequacy argument for the monotone neighborhood
    /// functor.
    NaiveIdentity,
}

impl UniformConstruction {
    pub fn standard(functor: FunctorSpec, m: usize, k: usize) -> UniformConstruction {
        UniformConstruction {
            functor,
            m,
            k,
            kind: StarKind::Standard,
            eval_cap: 16,
        }
    }

    pub fn naive_identity(functor: FunctorSpec) -> UniformConstruction {
        UniformConstruction {
            functor,
            m: 1,
            k: 0,
            kind: StarKind::NaiveIdentity,
            eval_cap: 16,
        }
    }

    /// Whether evaluation results can depend on the truncation parameter.
    pub fn truncated(&self) -> bool {
        fn has_truncated(f: &FunctorSpec) -> bool {
            match f {
                FunctorSpec::Powerset | FunctorSpec::MonNbhdStar => true,
                FunctorSpec::Product(a, b) => has_truncated(a) || has_truncated(b),
                FunctorSpec::Coproduct(ts) => ts.iter().any(has_truncated),
                FunctorSpec::Exp(t, _) => has_truncated(t),
                _ => false,
            }
        }
        self.kind == StarKind::Standard && has_truncated(&self.functor)
    }

    pub fn with_m(&self, m: usize) -> UniformConstruction {
        UniformConstruction { m, ..self.clone() }
    }
}

/// The result of one star construction.
#[derive(Clone, Debug)]
pub struct StarModel {
    pub carrier: Carrier,
    pub alpha: TObject,
    pub h: CarrierMap,
}

/// Applies the construction to (X, alpha). The defining law
/// T(h)(alpha_*) = alpha is asserted on every call.
pub fn construct_star(c: &UniformConstruction, alpha: &TObject) -> Result<StarModel> {
    if c.m == 0 {
        return Err(Error::Malformed("truncation parameter m must be >= 1".into()));
    }
    let star = match c.kind {
        StarKind::NaiveIdentity => StarModel {
            carrier: alpha.carrier.clone(),
            alpha: alpha.clone(),
            h: CarrierMap::identity(&alpha.carrier),
        },
        StarKind::Standard => build_star(c, alpha)?,
    };
    let back = apply_map(&star.h, &star.alpha)?;
    if back != *alpha {
        return Err(Error::Malformed(
            "uniform construction law violated: T(h)(alpha_*) != alpha".into(),
        ));
    }
    Ok(star)
}

fn build_star(c: &UniformConstruction, alpha: &TObject) -> Result<StarModel> {
    let (atoms, value, map_pairs) =
        star_value(&alpha.functor, &alpha.carrier, &alpha.value, c, "")?;
    let carrier = Carrier::new(atoms.clone())?;
    // the star value was produced relative to `atoms` in their given order;
    // re-express as masks relative to the sorted carrier
    let reindex: Vec<usize> = atoms
        .iter()
        .map(|a| carrier.index_of(a).expect("atom in carrier"))
        .collect();
    let value = reindex_value(&alpha.functor, &value, &reindex);
    let star_alpha = TObject::new(alpha.functor.clone(), carrier.clone(), value)?;
    let mut map = vec![usize::MAX; carrier.len()];
    for (atom_pos, src) in map_pairs {
        map[reindex[atom_pos]] = src;
    }
    if map.iter().any(|&m| m == usize::MAX) {
        return Err(Error::Malformed("star projection not total".into()));
    }
    let h = CarrierMap {
        dom: carrier.clone(),
        cod: alpha.carrier.clone(),
        map,
    };
    Ok(StarModel {
        carrier,
        alpha: star_alpha,
        h,
    })
}

/// Recursively builds the star carrier (as a list of fresh atom names), the
/// star value relative to that list order, and the projection pairs
/// (atom position, source index).
#[allow(clippy::type_complexity)]
fn star_value(
    spec: &FunctorSpec,
    x: &Carrier,
    v: &Value,
    c: &UniformConstruction,
    prefix: &str,
) -> Result<(Vec<String>, Value, Vec<(usize, usize)>)> {
    Ok(match (spec, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => (Vec::new(), Value::Const(s.clone()), Vec::new()),
        (FunctorSpec::Id, Value::Elem(i)) => (
            vec![format!("{prefix}e")],
            Value::Elem(0),
            vec![(0, *i)],
        ),
        (FunctorSpec::Powerset, Value::Set(mask)) => {
            let mut atoms = Vec::new();
            let mut pairs = Vec::new();
            for i in bits_iter(*mask) {
                for j in 0..c.m {
                    pairs.push((atoms.len(), i));
                    atoms.push(format!("{prefix}{}.{j}", x.atom(i)));
                }
            }
            let full = if atoms.is_empty() {
                0
            } else {
                (1u128 << atoms.len()) - 1
            };
            (atoms, Value::Set(full), pairs)
        }
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            let mut atoms = Vec::new();
            let mut pairs = Vec::new();
            for &(i, n) in entries {
                for j in 0..n {
                    pairs.push((atoms.len(), i));
                    atoms.push(format!("{prefix}{}.{j}", x.atom(i)));
                }
            }
            let ones: Vec<(usize, u64)> = (0..atoms.len()).map(|i| (i, 1)).collect();
            (atoms, Value::BagV(ones), pairs)
        }
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, support)) => {
            // carrier: (u, i, Z, j) with u in Z <= support, i < 2^k, j < m
            let copies = 1usize << c.k;
            let mut atoms = Vec::new();
            let mut pairs = Vec::new();
            let mut positions: BTreeMap<(usize, usize, Bits, usize), usize> = BTreeMap::new();
            let sub_subsets: Vec<Bits> = x
                .subsets()
                .into_iter()
                .filter(|&z| z != 0 && z & !support == 0)
                .collect();
            for &z in &sub_subsets {
                for u in bits_iter(z) {
                    for i in 0..copies {
                        for j in 0..c.m {
                            positions.insert((u, i, z, j), atoms.len());
                            pairs.push((atoms.len(), u));
                            atoms.push(format!("{prefix}{}.{i}.z{z:x}.{j}", x.atom(u)));
                        }
                    }
                }
            }
            if atoms.len() > MAX_CARRIER {
                return Err(Error::Cap(format!(
                    "star carrier of size {} exceeds the atom limit",
                    atoms.len()
                )));
            }
            // basic members: ceil(Y, j) for Y in the neighborhood family
            // (generated by the antichain), Y <= support
            let mut basics = Vec::new();
            for &z in &sub_subsets {
                if crate::functor::upclosed_contains(ac, z) {
                    for j in 0..c.m {
                        let mut mask: Bits = 0;
                        for u in bits_iter(z) {
                            for i in 0..copies {
                                mask |= 1 << positions[&(u, i, z, j)];
                            }
                        }
                        basics.push(mask);
                    }
                }
            }
            // the empty neighborhood member, when present, keeps the family full
            if crate::functor::upclosed_contains(ac, 0) {
                basics.push(0);
            }
            let full = if atoms.is_empty() {
                0
            } else {
                (1u128 << atoms.len()) - 1
            };
            (
                atoms,
                Value::NbhdStar(minimal_antichain(basics), full),
                pairs,
            )
        }
        (FunctorSpec::MonNbhd, _) => {
            return Err(Error::Unsupported(
                "no adequate uniform construction exists for the plain monotone neighborhood functor".into(),
            ))
        }
        (FunctorSpec::Product(fa, fb), Value::Pair(va, vb)) => {
            let (aa, va2, pa) = star_value(fa, x, va, c, &format!("{prefix}l."))?;
            let (ab, vb2, pb) = star_value(fb, x, vb, c, &format!("{prefix}r."))?;
            let offset = aa.len();
            let va3 = shift_value(fa, &va2, 0);
            let vb3 = shift_value(fb, &vb2, offset);
            let mut atoms = aa;
            atoms.extend(ab);
            let mut pairs = pa;
            pairs.extend(pb.into_iter().map(|(pos, src)| (pos + offset, src)));
            (atoms, Value::Pair(Box::new(va3), Box::new(vb3)), pairs)
        }
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            let (atoms, v2, pairs) = star_value(&ts[*i], x, u, c, prefix)?;
            (atoms, Value::Inj(*i, Box::new(v2)), pairs)
        }
        (FunctorSpec::Exp(t, cs), Value::Map(vs)) => {
            let mut sorted = cs.clone();
            sorted.sort();
            let mut atoms = Vec::new();
            let mut pairs = Vec::new();
            let mut parts = Vec::new();
            for (key, u) in sorted.iter().zip(vs) {
                let (aa, v2, pa) = star_value(t, x, u, c, &format!("{prefix}{key}."))?;
                let offset = atoms.len();
                parts.push(shift_value(t, &v2, offset));
                pairs.extend(pa.into_iter().map(|(pos, src)| (pos + offset, src)));
                atoms.extend(aa);
            }
            (atoms, Value::Map(parts), pairs)
        }
        _ => return Err(Error::Malformed("value does not match functor".into())),
    })
}

/// Shift all carrier references in a value by an offset (for embedding a
/// component star into a combined carrier laid out as concatenated blocks).
fn shift_value(spec: &FunctorSpec, v: &Value, offset: usize) -> Value {
    match (spec, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => Value::Const(s.clone()),
        (FunctorSpec::Id, Value::Elem(i)) => Value::Elem(i + offset),
        (FunctorSpec::Powerset, Value::Set(m)) => Value::Set(m << offset),
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            Value::BagV(entries.iter().map(|&(i, n)| (i + offset, n)).collect())
        }
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => {
            Value::Nbhd(ac.iter().map(|&m| m << offset).collect())
        }
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, s)) => {
            Value::NbhdStar(ac.iter().map(|&m| m << offset).collect(), s << offset)
        }
        (FunctorSpec::Product(fa, fb), Value::Pair(a, b)) => Value::Pair(
            Box::new(shift_value(fa, a, offset)),
            Box::new(shift_value(fb, b, offset)),
        ),
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            Value::Inj(*i, Box::new(shift_value(&ts[*i], u, offset)))
        }
        (FunctorSpec::Exp(t, _), Value::Map(vs)) => {
            Value::Map(vs.iter().map(|u| shift_value(t, u, offset)).collect())
        }
        _ => v.clone(),
    }
}

/// Re-express a value built against an unsorted atom list in terms of the
/// sorted carrier order.
fn reindex_value(spec: &FunctorSpec, v: &Value, reindex: &[usize]) -> Value {
    let remap_mask = |m: Bits| -> Bits {
        let mut out = 0;
        for i in bits_iter(m) {
            out |= 1 << reindex[i];
        }
        out
    };
    match (spec, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => Value::Const(s.clone()),
        (FunctorSpec::Id, Value::Elem(i)) => Value::Elem(reindex[*i]),
        (FunctorSpec::Powerset, Value::Set(m)) => Value::Set(remap_mask(*m)),
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            let mut v: Vec<(usize, u64)> =
                entries.iter().map(|&(i, n)| (reindex[i], n)).collect();
            v.sort();
            Value::BagV(v)
        }
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => {
            Value::Nbhd(minimal_antichain(ac.iter().map(|&m| remap_mask(m)).collect()))
        }
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, s)) => Value::NbhdStar(
            minimal_antichain(ac.iter().map(|&m| remap_mask(m)).collect()),
            remap_mask(*s),
        ),
        (FunctorSpec::Product(fa, fb), Value::Pair(a, b)) => Value::Pair(
            Box::new(reindex_value(fa, a, reindex)),
            Box::new(reindex_value(fb, b, reindex)),
        ),
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            Value::Inj(*i, Box::new(reindex_value(&ts[*i], u, reindex)))
        }
        (FunctorSpec::Exp(t, _), Value::Map(vs)) => {
            Value::Map(vs.iter().map(|u| reindex_value(t, u, reindex)).collect())
        }
        _ => v.clone(),
    }
}

// ---------------------------------------------------------------------------
// Induced one-step translation
// ---------------------------------------------------------------------------

type StarCache = Mutex<BTreeMap<(Carrier, Value, usize), (Carrier, TObject, CarrierMap)>>;

/// Evaluate phi on the star of (X, alpha) under the pulled-back valuation.
fn eval_on_star(
    c: &UniformConstruction,
    phi: &So1,
    alpha: &TObject,
    args: &BTreeMap<String, Bits>,
    lam: &Lambda,
    cache: &StarCache,
) -> Result<bool> {
    let key = (alpha.carrier.clone(), alpha.value.clone(), c.m);
    let star = {
        let mut guard = cache.lock().expect("star cache poisoned");
        match guard.get(&key) {
            Some((carrier, a, h)) => StarModel {
                carrier: carrier.clone(),
                alpha: a.clone(),
                h: h.clone(),
            },
            None => {
                let star = construct_star(c, alpha)?;
                guard.insert(
                    key,
                    (star.carrier.clone(), star.alpha.clone(), star.h.clone()),
                );
                star
            }
        }
    };
    if star.carrier.len() > c.eval_cap {
        return Err(Error::Cap(format!(
            "star carrier of size {} exceeds the evaluation cap {}",
            star.carrier.len(),
            c.eval_cap
        )));
    }
    let pulled: BTreeMap<String, Bits> = args
        .iter()
        .map(|(v, &m)| (v.clone(), star.h.preimage(m)))
        .collect();
    let model = OneStepModel::new(star.alpha.clone(), pulled)?;
    eval_so1(phi, &model, lam, c.eval_cap)
}

/// The induced modal atom phi*: alpha lies in the lifted set exactly when
/// phi holds in the star model under the pulled-back valuation. For
/// truncated constructions the truncation is doubled until two consecutive
/// evaluations agree (instability past the cap is an error).
pub fn so_to_ml_lifting(
    phi: &So1,
    construction: &UniformConstruction,
    lam: &Lambda,
    name: &str,
) -> Result<Lifting> {
    if phi.qdepth() > construction.k {
        return Err(Error::Malformed(format!(
            "formula depth {} exceeds the construction depth {}",
            phi.qdepth(),
            construction.k
        )));
    }
    let functor = construction.functor.clone();
    let (mono, _) = is_monotone_bruteforce(
        &OneStep::So(phi.clone()),
        &functor,
        lam,
        2,
    )?;
    if !mono {
        return Err(Error::Malformed(
            "induced translations require a monotone one-step formula".into(),
        ));
    }
    let vars: Vec<String> = phi.free_vars().into_iter().collect();
    let arity = vars.len();
    let phi = phi.clone();
    let base = construction.clone();
    let lam = lam.clone();
    let cache: Arc<StarCache> = Arc::new(Mutex::new(BTreeMap::new()));
    let max_m = (1usize << base.k).max(1) * 4;
    let evaluator = move |alpha: &TObject, masks: &[Bits]| -> Result<bool> {
        let args: BTreeMap<String, Bits> = vars
            .iter()
            .cloned()
            .zip(masks.iter().copied())
            .collect();
        if !base.truncated() {
            return eval_on_star(&base, &phi, alpha, &args, &lam, &cache);
        }
        let mut m = base.m;
        loop {
            let r1 = eval_on_star(&base.with_m(m), &phi, alpha, &args, &lam, &cache)?;
            let r2 = eval_on_star(&base.with_m(2 * m), &phi, alpha, &args, &lam, &cache)?;
            if r1 == r2 {
                return Ok(r1);
            }
            m *= 2;
            if m > max_m {
                return Err(Error::Unstable(format!(
                    "star evaluation did not stabilize up to truncation {m}"
                )));
            }
        }
    };
    Ok(Lifting {
        name: name.into(),
        arity,
        functor,
        kind: LiftingKind::Custom(Arc::new(evaluator)),
        dual: None,
    })
}

/// Translate a second-order automaton into a modal one: states, priorities
/// and the initial state are kept; every transition becomes a single induced
/// atom over its occurring state variables.
pub fn translate_automaton(
    aut: &Automaton,
    construction: &UniformConstruction,
) -> Result<Automaton> {
    if aut.flavor != Flavor::So1 {
        return Err(Error::Unsupported(
            "translation applies to second-order automata".into(),
        ));
    }
    let mut lambda = aut.lambda.clone();
    let mut delta = Vec::with_capacity(aut.states.len());
    for (i, row) in aut.delta.iter().enumerate() {
        let mut new_row = Vec::with_capacity(row.len());
        for (c, t) in row.iter().enumerate() {
            let OneStep::So(f) = &t.formula else { unreachable!() };
            let name = format!("star_{i}_{c}");
            let lift = so_to_ml_lifting(f, construction, &aut.lambda, &name)?;
            let vars: Vec<String> = f.free_vars().into_iter().collect();
            lambda.insert(lift);
            let ml = Ml1::Lift(name, vars.iter().map(|v| Lattice::Var(v.clone())).collect());
            new_row.push(Transition::scanned(OneStep::Ml(ml), &aut.states));
        }
        delta.push(new_row);
    }
    Ok(Automaton {
        states: aut.states.clone(),
        initial: aut.initial,
        priority: aut.priority.clone(),
        chromatic: aut.chromatic.clone(),
        flavor: Flavor::Ml1,
        functor: aut.functor.clone(),
        lambda,
        delta,
    })
}

// ---------------------------------------------------------------------------
// Unravelling
// ---------------------------------------------------------------------------

pub struct Unravelling {
    pub tree: TreeModel,
    /// node index -> source state index (the model homomorphism)
    pub gamma: Vec<usize>,
    /// nodes whose structure value was replaced by the empty-support leaf
    pub substituted: Vec<bool>,
}

impl Unravelling {
    /// The unravelling is total when no frontier node needed a leaf
    /// substitute.
    pub fn is_total(&self) -> bool {
        self.substituted.iter().all(|&b| !b)
    }
}

/// The canonical structure value with empty support, when the functor has
/// one.
fn empty_support_value(f: &FunctorSpec) -> Result<Value> {
    Ok(match f {
        FunctorSpec::Powerset => Value::Set(0),
        FunctorSpec::Bag => Value::BagV(Vec::new()),
        FunctorSpec::MonNbhd => Value::Nbhd(Vec::new()),
        FunctorSpec::MonNbhdStar => Value::NbhdStar(Vec::new(), 0),
        FunctorSpec::Const(c) => Value::Const(c[0].clone()),
        FunctorSpec::Id => {
            return Err(Error::Unsupported(
                "the identity functor has no empty-support leaf value".into(),
            ))
        }
        FunctorSpec::Product(a, b) => Value::Pair(
            Box::new(empty_support_value(a)?),
            Box::new(empty_support_value(b)?),
        ),
        FunctorSpec::Coproduct(ts) => Value::Inj(0, Box::new(empty_support_value(&ts[0])?)),
        FunctorSpec::Exp(t, cs) => {
            Value::Map((0..cs.len()).map(|_| empty_support_value(t)).collect::<Result<_>>()?)
        }
    })
}

/// Unravel a pointed model into a tree of the given depth through the
/// construction: each node carries a copy of the star carrier of its source
/// state's structure; gamma maps nodes back to the source and is verified to
/// be a model homomorphism off the frontier.
pub fn unravel(
    model: &TModel,
    point: usize,
    construction: &UniformConstruction,
    depth: usize,
) -> Result<Unravelling> {
    if depth == 0 {
        return Err(Error::Malformed("unravelling depth must be >= 1".into()));
    }
    // stars per source state
    let mut stars: Vec<StarModel> = Vec::with_capacity(model.carrier.len());
    for s in 0..model.carrier.len() {
        stars.push(construct_star(construction, &model.sigma[s])?);
    }
    // BFS node construction
    struct Node {
        gamma: usize,
        depth: usize,
        /// star element index this node came from (root: none)
        children: Vec<usize>,
    }
    let mut nodes: Vec<Node> = vec![Node {
        gamma: point,
        depth: 0,
        children: Vec::new(),
    }];
    let mut head = 0usize;
    while head < nodes.len() {
        let (g, d) = (nodes[head].gamma, nodes[head].depth);
        if d < depth {
            let star = &stars[g];
            for w in 0..star.carrier.len() {
                let child_gamma = star.h.apply(w);
                let idx = nodes.len();
                if idx >= MAX_CARRIER {
                    return Err(Error::Cap(format!(
                        "unravelling exceeds {MAX_CARRIER} nodes; lower the depth or truncation"
                    )));
                }
                nodes.push(Node {
                    gamma: child_gamma,
                    depth: d + 1,
                    children: Vec::new(),
                });
                nodes[head].children.push(idx);
            }
        }
        head += 1;
    }
    let width = match nodes.len() {
        0..=10 => 1,
        11..=100 => 2,
        _ => 3,
    };
    let carrier = Carrier::new(
        (0..nodes.len()).map(|i| format!("n{i:0width$}")),
    )?;
    // order check: numbered atoms sort in index order
    for (i, _) in nodes.iter().enumerate() {
        debug_assert_eq!(carrier.index_of(&format!("n{i:0width$}")).unwrap(), i);
    }
    let mut sigma: Vec<TObject> = Vec::with_capacity(nodes.len());
    let mut frame: Vec<Bits> = Vec::with_capacity(nodes.len());
    let mut substituted = vec![false; nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        let mut mask: Bits = 0;
        for &c in &node.children {
            mask |= 1 << c;
        }
        frame.push(mask);
        if node.depth < depth {
            // sigma = T(i_v)(alpha_star) along the bijection star -> children
            let star = &stars[node.gamma];
            let embed = CarrierMap {
                dom: star.carrier.clone(),
                cod: carrier.clone(),
                map: node.children.clone(),
            };
            sigma.push(apply_map(&embed, &star.alpha)?);
        } else {
            let star = &stars[node.gamma];
            if star.carrier.is_empty() {
                // natural leaf: embedding the empty star is exact
                let embed = CarrierMap {
                    dom: star.carrier.clone(),
                    cod: carrier.clone(),
                    map: Vec::new(),
                };
                sigma.push(apply_map(&embed, &star.alpha)?);
            } else {
                substituted[i] = true;
                sigma.push(TObject::new(
                    model.functor.clone(),
                    carrier.clone(),
                    empty_support_value(&model.functor)?,
                )?);
            }
        }
    }
    // valuation pulled back along gamma
    let gamma: Vec<usize> = nodes.iter().map(|n| n.gamma).collect();
    let valuation: BTreeMap<String, Bits> = model
        .valuation
        .iter()
        .map(|(v, &m)| {
            let mut pulled: Bits = 0;
            for (i, &g) in gamma.iter().enumerate() {
                if m & (1 << g) != 0 {
                    pulled |= 1 << i;
                }
            }
            (v.clone(), pulled)
        })
        .collect();
    let tree_model = TModel::new(model.functor.clone(), carrier.clone(), sigma, valuation)?;
    let tree = TreeModel::new(tree_model, frame, 0)?;
    // homomorphism check off the frontier
    let gmap = CarrierMap {
        dom: carrier.clone(),
        cod: model.carrier.clone(),
        map: gamma.clone(),
    };
    for (i, node) in nodes.iter().enumerate() {
        if node.depth < depth {
            let mapped = apply_map(&gmap, &tree.model.sigma[i])?;
            if mapped != model.sigma[node.gamma] {
                return Err(Error::Malformed(format!(
                    "unravelling map is not a homomorphism at node {i}"
                )));
            }
        }
    }
    Ok(Unravelling {
        tree,
        gamma,
        substituted,
    })
}

// ---------------------------------------------------------------------------
// Adequacy checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdequacyReport {
    pub squares_checked: usize,
    pub bijections_found: usize,
    pub violation: Option<String>,
    pub strong_failures: usize,
}

/// One (*) square: with beta = Tf(alpha), compare phi on the star of alpha
/// under V pulled back along f o h_alpha against phi on the star of beta
/// under V pulled back along h_beta. Returns a description on violation.
pub fn check_star_square(
    c: &UniformConstruction,
    f: &CarrierMap,
    alpha: &TObject,
    valuation: &BTreeMap<String, Bits>,
    phi: &So1,
    lam: &Lambda,
) -> Result<Option<String>> {
    let beta = apply_map(f, alpha)?;
    let star_a = construct_star(c, alpha)?;
    let star_b = construct_star(c, &beta)?;
    if star_a.carrier.len() > c.eval_cap || star_b.carrier.len() > c.eval_cap {
        return Err(Error::Cap("star carrier exceeds the evaluation cap".into()));
    }
    let fh = star_a.h.compose(f)?;
    let args_a: BTreeMap<String, Bits> = valuation
        .iter()
        .map(|(v, &m)| (v.clone(), fh.preimage(m)))
        .collect();
    let args_b: BTreeMap<String, Bits> = valuation
        .iter()
        .map(|(v, &m)| (v.clone(), star_b.h.preimage(m)))
        .collect();
    let lhs = eval_so1(
        phi,
        &OneStepModel::new(star_a.alpha.clone(), args_a)?,
        lam,
        c.eval_cap,
    )?;
    let rhs = eval_so1(
        phi,
        &OneStepModel::new(star_b.alpha.clone(), args_b)?,
        lam,
        c.eval_cap,
    )?;
    if lhs != rhs {
        Ok(Some(format!(
            "(*) fails: phi holds {lhs} on the star of alpha but {rhs} on the star of T f(alpha); \
             f map {:?}, alpha {:?}, valuation {:?}",
            f.map, alpha.value, valuation
        )))
    } else {
        Ok(None)
    }
}

/// Search for the strong-adequacy bijection g with T g(alpha_*) = beta_* and
/// f o h_alpha = h_beta o g.
pub fn find_strong_bijection(
    c: &UniformConstruction,
    f: &CarrierMap,
    alpha: &TObject,
) -> Result<Option<CarrierMap>> {
    let beta = apply_map(f, alpha)?;
    let star_a = construct_star(c, alpha)?;
    let star_b = construct_star(c, &beta)?;
    let n = star_a.carrier.len();
    if n != star_b.carrier.len() {
        return Ok(None);
    }
    if n > 10 {
        return Err(Error::Cap("strong-adequacy search above 10 star points".into()));
    }
    // g must respect the fiber condition f(h_a(x)) = h_b(g(x))
    let fh = star_a.h.compose(f)?;
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn rec(
        pos: usize,
        n: usize,
        fh: &CarrierMap,
        star_a: &StarModel,
        star_b: &StarModel,
        assignment: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> Result<bool> {
        if pos == n {
            let g = CarrierMap {
                dom: star_a.carrier.clone(),
                cod: star_b.carrier.clone(),
                map: assignment.clone(),
            };
            return Ok(apply_map(&g, &star_a.alpha)? == star_b.alpha);
        }
        for cand in 0..n {
            if used[cand] || star_b.h.apply(cand) != fh.apply(pos) {
                continue;
            }
            used[cand] = true;
            assignment[pos] = cand;
            if rec(pos + 1, n, fh, star_a, star_b, assignment, used)? {
                return Ok(true);
            }
            used[cand] = false;
            assignment[pos] = usize::MAX;
        }
        Ok(false)
    }
    if rec(0, n, &fh, &star_a, &star_b, &mut assignment, &mut used)? {
        Ok(Some(CarrierMap {
            dom: star_a.carrier,
            cod: star_b.carrier,
            map: assignment,
        }))
    } else {
        Ok(None)
    }
}

/// Default formula corpus for adequacy sampling over variables a, b: small
/// monotone formulas plus the empty-extension sentence that witnesses the
/// inadequacy of the naive monotone-neighborhood construction.
pub fn adequacy_corpus(lam: &Lambda, k: usize) -> Vec<So1> {
    let mut out = vec![
        So1::Top,
        So1::Forall("Z".into(), Box::new(So1::Sub("a".into(), "Z".into()))),
    ];
    for l in lam.iter() {
        if l.arity == 1 {
            out.push(So1::Lift(l.name.clone(), vec!["a".into()]));
            if k >= 1 {
                out.push(So1::Exists(
                    "Z".into(),
                    Box::new(So1::And(
                        Box::new(So1::Sub("Z".into(), "a".into())),
                        Box::new(So1::Lift(l.name.clone(), vec!["Z".into()])),
                    )),
                ));
            }
        }
    }
    out.retain(|f| f.qdepth() <= k);
    out
}

/// Samples maps, objects, valuations and corpus formulas, reporting the
/// first (*) violation and the outcome of the strong-adequacy search.
pub fn check_adequacy(
    c: &UniformConstruction,
    lam: &Lambda,
    k: usize,
    sample_budget: usize,
    seed: u64,
) -> Result<AdequacyReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let corpus = adequacy_corpus(lam, k);
    let mut checked = 0usize;
    let mut bijections = 0usize;
    let mut strong_failures = 0usize;
    let mut violation = None;
    'outer: for nx in 1..=3usize {
        for ny in 1..=3usize {
            let x = Carrier::numbered("x", nx);
            let y = Carrier::numbered("y", ny);
            let alphas = enumerate_tobjects(&c.functor, &x, 2)?;
            for _ in 0..3 {
                // random map and valuation
                let map: Vec<usize> = (0..nx).map(|_| rng.gen_range(0..ny)).collect();
                let f = CarrierMap {
                    dom: x.clone(),
                    cod: y.clone(),
                    map,
                };
                for alpha in &alphas {
                    let mut valuation = BTreeMap::new();
                    valuation.insert("a".to_string(), rng.gen_range(0..(1u128 << ny)));
                    valuation.insert("b".to_string(), rng.gen_range(0..(1u128 << ny)));
                    for phi in &corpus {
                        if checked >= sample_budget {
                            break 'outer;
                        }
                        checked += 1;
                        if let Some(v) = check_star_square(c, &f, alpha, &valuation, phi, lam)? {
                            violation = Some(v);
                            break 'outer;
                        }
                    }
                    match find_strong_bijection(c, &f, alpha) {
                        Ok(Some(_)) => bijections += 1,
                        Ok(None) => strong_failures += 1,
                        Err(_) => {}
                    }
                }
            }
        }
    }
    Ok(AdequacyReport {
        squares_checked: checked,
        bijections_found: bijections,
        violation,
        strong_failures,
    })
}
