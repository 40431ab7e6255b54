use std::collections::BTreeMap;

use crate::carrier::{bits_iter, Bits, Carrier, CarrierMap};
use crate::error::{Error, Result};
use crate::functor::{
    apply_map, minimal_supports, restrict_to_support, upclosed_contains, FunctorSpec, TObject,
    Value,
};
use crate::lifting::Lambda;
use crate::logic::{MsoFormula, MuFormula};
use crate::model::TModel;
use crate::onestep::{Env, So1};
use crate::uniform::{check_star_square, StarModel, UniformConstruction};

// ---------------------------------------------------------------------------
// Neighborhood bisimulations
// ---------------------------------------------------------------------------

/// The three bisimulation clauses at a pair: equal colors, and each
/// neighborhood on either side is matched by one whose members are covered
/// through the relation.
fn clauses_hold(m1: &TModel, m2: &TModel, rel: &[Bits], s1: usize, s2: usize) -> bool {
    let Value::Nbhd(ac1) = &m1.sigma[s1].value else {
        return false;
    };
    let Value::Nbhd(ac2) = &m2.sigma[s2].value else {
        return false;
    };
    // forward: for each Z1 in the family, R[Z1] must be in the other family;
    // monotonicity lets the antichain stand in for the full family
    for &z1 in ac1 {
        let mut image: Bits = 0;
        for t1 in bits_iter(z1) {
            image |= rel[t1];
        }
        if !upclosed_contains(ac2, image) {
            return false;
        }
    }
    for &z2 in ac2 {
        let mut preimage: Bits = 0;
        for (t1, &r) in rel.iter().enumerate() {
            if r & z2 != 0 {
                // t1 related to some member of z2
                let _ = t1;
            }
        }
        // preimage through the relation: t1 with rel[t1] meeting z2
        for (t1, &r) in rel.iter().enumerate() {
            if r & z2 != 0 {
                preimage |= 1 << t1;
            }
        }
        if !upclosed_contains(ac1, preimage) {
            return false;
        }
    }
    true
}

/// Greatest neighborhood bisimulation between two monotone-neighborhood
/// models, by iterated refinement from the color-respecting relation.
/// With `global`, the Forth/Back totality conditions are tested on the
/// fixpoint; None marks their failure.
pub fn largest_nbhd_bisim(
    m1: &TModel,
    m2: &TModel,
    global: bool,
) -> Result<Option<Vec<(usize, usize)>>> {
    if m1.functor != FunctorSpec::MonNbhd || m2.functor != FunctorSpec::MonNbhd {
        return Err(Error::Unsupported(
            "neighborhood bisimulations are for monotone-neighborhood models".into(),
        ));
    }
    let vars: Vec<String> = m1
        .valuation
        .keys()
        .chain(m2.valuation.keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let n1 = m1.carrier.len();
    let n2 = m2.carrier.len();
    let mut rel: Vec<Bits> = vec![0; n1];
    for s1 in 0..n1 {
        for s2 in 0..n2 {
            let c1: Vec<bool> = vars
                .iter()
                .map(|v| m1.valuation.get(v).map(|&m| m & (1 << s1) != 0).unwrap_or(false))
                .collect();
            let c2: Vec<bool> = vars
                .iter()
                .map(|v| m2.valuation.get(v).map(|&m| m & (1 << s2) != 0).unwrap_or(false))
                .collect();
            if c1 == c2 {
                rel[s1] |= 1 << s2;
            }
        }
    }
    loop {
        let mut changed = false;
        for s1 in 0..n1 {
            for s2 in bits_iter(rel[s1]).collect::<Vec<_>>() {
                if !clauses_hold(m1, m2, &rel, s1, s2) {
                    rel[s1] &= !(1 << s2);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if global {
        let forth = (0..n1).all(|s1| rel[s1] != 0);
        let mut covered: Bits = 0;
        for &r in &rel {
            covered |= r;
        }
        let back = covered == m2.carrier.full();
        if !(forth && back) {
            return Ok(None);
        }
    }
    let mut pairs = Vec::new();
    for (s1, &r) in rel.iter().enumerate() {
        for s2 in bits_iter(r) {
            pairs.push((s1, s2));
        }
    }
    Ok(Some(pairs))
}

/// Post-hoc verification that a relation satisfies the bisimulation clauses
/// at every pair.
pub fn is_nbhd_bisim(m1: &TModel, m2: &TModel, pairs: &[(usize, usize)]) -> bool {
    let mut rel: Vec<Bits> = vec![0; m1.carrier.len()];
    for &(a, b) in pairs {
        rel[a] |= 1 << b;
    }
    pairs.iter().all(|&(s1, s2)| {
        let colors_match = {
            let vars: Vec<String> = m1
                .valuation
                .keys()
                .chain(m2.valuation.keys())
                .cloned()
                .collect();
            vars.iter().all(|v| {
                let c1 = m1.valuation.get(v).map(|&m| m & (1 << s1) != 0).unwrap_or(false);
                let c2 = m2.valuation.get(v).map(|&m| m & (1 << s2) != 0).unwrap_or(false);
                c1 == c2
            })
        };
        colors_match && clauses_hold(m1, m2, &rel, s1, s2)
    })
}

// ---------------------------------------------------------------------------
// The supported companion of a neighborhood model
// ---------------------------------------------------------------------------

/// Declare the full carrier as every state's support.
pub fn to_global_mstar(m: &TModel) -> Result<TModel> {
    if m.functor != FunctorSpec::MonNbhd {
        return Err(Error::Unsupported("expected a monotone-neighborhood model".into()));
    }
    let full = m.carrier.full();
    let sigma = m
        .sigma
        .iter()
        .map(|t| {
            let Value::Nbhd(ac) = &t.value else { unreachable!() };
            TObject::new(
                FunctorSpec::MonNbhdStar,
                m.carrier.clone(),
                Value::NbhdStar(ac.clone(), full),
            )
        })
        .collect::<Result<_>>()?;
    TModel::new(
        FunctorSpec::MonNbhdStar,
        m.carrier.clone(),
        sigma,
        m.valuation.clone(),
    )
}

/// Forget the supports.
pub fn underlying_m(m: &TModel) -> Result<TModel> {
    if m.functor != FunctorSpec::MonNbhdStar {
        return Err(Error::Unsupported("expected a supported-neighborhood model".into()));
    }
    let sigma = m
        .sigma
        .iter()
        .map(|t| {
            let Value::NbhdStar(ac, _) = &t.value else { unreachable!() };
            TObject::new(FunctorSpec::MonNbhd, m.carrier.clone(), Value::Nbhd(ac.clone()))
        })
        .collect::<Result<_>>()?;
    TModel::new(
        FunctorSpec::MonNbhd,
        m.carrier.clone(),
        sigma,
        m.valuation.clone(),
    )
}

// ---------------------------------------------------------------------------
// Signatures and matching for star models
// ---------------------------------------------------------------------------

/// Star-carrier bookkeeping for a supported-neighborhood object: which atom
/// realizes each (element, copy, set, round) tuple, and the basic members.
pub struct MonStarMeta {
    pub star: StarModel,
    /// (source element, copy index, set mask over the source, round) per
    /// basic-member generator (Z, j): mask over the star carrier
    pub basics: Vec<((Bits, usize), Bits)>,
}

/// Rebuild the (u, i, Z, j) comprehension for a constructed star of a
/// supported-neighborhood object and list its basic members.
pub fn monstar_meta(c: &UniformConstruction, alpha: &TObject) -> Result<MonStarMeta> {
    if alpha.functor != FunctorSpec::MonNbhdStar {
        return Err(Error::Unsupported("expected a supported-neighborhood object".into()));
    }
    let star = crate::uniform::construct_star(c, alpha)?;
    let Value::NbhdStar(ac, support) = &alpha.value else {
        unreachable!()
    };
    let copies = 1usize << c.k;
    let x = &alpha.carrier;
    let mut basics = Vec::new();
    for z in x.subsets() {
        if z == 0 || z & !support != 0 {
            continue;
        }
        if !upclosed_contains(ac, z) {
            continue;
        }
        for j in 0..c.m {
            let mut mask: Bits = 0;
            for u in bits_iter(z) {
                for i in 0..copies {
                    let name = format!("{}.{i}.z{z:x}.{j}", x.atom(u));
                    mask |= 1 << star.carrier.index_of(&name)?;
                }
            }
            basics.push(((z, j), mask));
        }
    }
    Ok(MonStarMeta { star, basics })
}

/// A capped count of star elements per propositional type inside a basic
/// member: the m-signature.
pub type Signature = BTreeMap<Vec<String>, usize>;

pub fn m_signature(
    basic: Bits,
    star_carrier: &Carrier,
    valuation: &BTreeMap<String, Bits>,
    m: usize,
) -> Signature {
    let mut sig: Signature = BTreeMap::new();
    for e in bits_iter(basic) {
        let ty: Vec<String> = valuation
            .iter()
            .filter(|(_, &mask)| mask & (1 << e) != 0)
            .map(|(v, _)| v.clone())
            .collect();
        let slot = sig.entry(ty).or_insert(0);
        *slot = (*slot + 1).min(m);
    }
    let _ = star_carrier;
    sig
}

/// Count-profile matching between two star models at depth n: per
/// n-signature, the numbers of basic members agree, with counts at or above
/// the cap treated as the infinite bucket.
pub fn models_match(
    meta1: &MonStarMeta,
    v1: &BTreeMap<String, Bits>,
    meta2: &MonStarMeta,
    v2: &BTreeMap<String, Bits>,
    n: usize,
    cap: usize,
) -> Result<bool> {
    if v1.keys().collect::<Vec<_>>() != v2.keys().collect::<Vec<_>>() {
        return Err(Error::Malformed("matching requires equal variable sets".into()));
    }
    let count = |meta: &MonStarMeta, v: &BTreeMap<String, Bits>| -> BTreeMap<Signature, usize> {
        let mut out: BTreeMap<Signature, usize> = BTreeMap::new();
        for (_, mask) in &meta.basics {
            let sig = m_signature(*mask, &meta.star.carrier, v, n);
            *out.entry(sig).or_insert(0) += 1;
        }
        out
    };
    let c1 = count(meta1, v1);
    let c2 = count(meta2, v2);
    let mut sigs: Vec<&Signature> = c1.keys().chain(c2.keys()).collect();
    sigs.sort();
    sigs.dedup();
    for sig in sigs {
        let a = *c1.get(sig).unwrap_or(&0);
        let b = *c2.get(sig).unwrap_or(&0);
        let same = a == b || (a >= cap && b >= cap);
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// The inadequacy replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DemoStep {
    pub label: String,
    pub outcome: String,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub steps: Vec<DemoStep>,
}

impl CounterexampleReport {
    pub fn all_ok(&self) -> bool {
        self.steps.iter().all(|s| s.ok)
    }
}

/// Replays the checkable steps showing that the monotone neighborhood
/// functor admits no adequate uniform construction: the collapse of the
/// three-point neighborhood structure, the support analysis, and the failed
/// naturality square for the empty-extension sentence under the do-nothing
/// construction.
pub fn counterexample_demo() -> Result<CounterexampleReport> {
    let mut steps = Vec::new();
    let x = Carrier::new(["u*", "v*", "w*"])?;
    let y = Carrier::new(["u", "v"])?;
    let alpha = TObject::mon_nbhd(&x, &[&["u*", "v*"], &["u*", "w*"]])?;
    let f = CarrierMap::new(x.clone(), y.clone(), &[("u*", "u"), ("v*", "v"), ("w*", "u")])?;
    let beta = apply_map(&f, &alpha)?;
    let expected_beta = TObject::mon_nbhd(&y, &[&["u"]])?;
    steps.push(DemoStep {
        label: "collapse: M f(alpha) = beta".into(),
        outcome: format!("{:?}", beta.value),
        ok: beta == expected_beta,
    });

    let u_only = y.singleton("u")?;
    let restricted = restrict_to_support(&beta, u_only);
    steps.push(DemoStep {
        label: "support: {u} supports beta".into(),
        outcome: match &restricted {
            Ok(b) => format!("beta|{{u}} = {:?}", b.value),
            Err(e) => format!("{e}"),
        },
        ok: restricted.is_ok(),
    });

    let mins = minimal_supports(&alpha, 12)?;
    let v_star = x.singleton("v*")?;
    let all_contain = !mins.is_empty() && mins.iter().all(|&m| m & v_star != 0);
    steps.push(DemoStep {
        label: "supports of alpha: every minimal support contains v*".into(),
        outcome: format!(
            "minimal supports: {:?}",
            mins.iter().map(|&m| x.mask_to_atoms(m)).collect::<Vec<_>>()
        ),
        ok: all_contain,
    });

    // the (*) chain for the do-nothing construction: phi = forall Z (a sub Z)
    // breaks at the injection {u} -> {u,v} with V(a) = {v}
    let lam = Lambda::standard(&FunctorSpec::MonNbhd);
    let naive = UniformConstruction::naive_identity(FunctorSpec::MonNbhd);
    let yp = Carrier::new(["u"])?;
    let beta_p = TObject::mon_nbhd(&yp, &[&["u"]])?;
    let iota = CarrierMap::new(yp, y.clone(), &[("u", "u")])?;
    let mut valuation = BTreeMap::new();
    valuation.insert("a".to_string(), y.singleton("v")?);
    let phi = So1::Forall("Z".into(), Box::new(So1::Sub("a".into(), "Z".into())));
    let violation = check_star_square(&naive, &iota, &beta_p, &valuation, &phi, &lam)?;
    steps.push(DemoStep {
        label: "adequacy: the naive construction violates (*) on this data".into(),
        outcome: violation.clone().unwrap_or_else(|| "no violation".into()),
        ok: violation.is_some(),
    });

    Ok(CounterexampleReport { steps })
}

// ---------------------------------------------------------------------------
// Global modalities
// ---------------------------------------------------------------------------

/// Lifting names reserved for the global modalities in the surface syntax of
/// the monotone mu-calculus with global quantifiers.
pub const GLOBAL_EXISTS: &str = "gex";
pub const GLOBAL_FORALL: &str = "gall";

/// Substitute the global modalities by the support liftings: a formula of
/// the global monotone mu-calculus becomes a supported-neighborhood formula.
pub fn globalize(f: &MuFormula) -> MuFormula {
    match f {
        MuFormula::Lift(name, args) => {
            let new = match name.as_str() {
                GLOBAL_EXISTS => "E".to_string(),
                GLOBAL_FORALL => "Ed".to_string(),
                other => other.to_string(),
            };
            MuFormula::Lift(new, args.iter().map(globalize).collect())
        }
        MuFormula::Or(a, b) => MuFormula::or(globalize(a), globalize(b)),
        MuFormula::And(a, b) => MuFormula::and(globalize(a), globalize(b)),
        MuFormula::Mu(v, a) => MuFormula::Mu(v.clone(), Box::new(globalize(a))),
        MuFormula::Nu(v, a) => MuFormula::Nu(v.clone(), Box::new(globalize(a))),
        atom => atom.clone(),
    }
}

/// Direct semantics of the monotone mu-calculus with global modalities over
/// a plain neighborhood model: box and dia read the neighborhood family,
/// gall/gex quantify over the whole carrier.
pub fn eval_mu_global(f: &MuFormula, model: &TModel, s: usize) -> Result<bool> {
    if model.functor != FunctorSpec::MonNbhd {
        return Err(Error::Unsupported("expected a monotone-neighborhood model".into()));
    }
    f.check_positivity()?;
    let mut env = Env::default();
    let set = global_truth(f, model, &mut env)?;
    Ok(set & (1 << s) != 0)
}

fn global_truth(f: &MuFormula, model: &TModel, env: &mut Env) -> Result<Bits> {
    let full = model.carrier.full();
    Ok(match f {
        MuFormula::Var(v) => env.lookup(v).or_else(|_| model.var(v))?,
        MuFormula::NegVar(v) => full & !(env.lookup(v).or_else(|_| model.var(v))?),
        MuFormula::Bot => 0,
        MuFormula::Top => full,
        MuFormula::Or(a, b) => global_truth(a, model, env)? | global_truth(b, model, env)?,
        MuFormula::And(a, b) => global_truth(a, model, env)? & global_truth(b, model, env)?,
        MuFormula::Lift(name, args) => {
            if args.len() != 1 {
                return Err(Error::Arity {
                    name: name.clone(),
                    expected: 1,
                    got: args.len(),
                });
            }
            let arg = global_truth(&args[0], model, env)?;
            match name.as_str() {
                GLOBAL_FORALL => {
                    if arg == full {
                        full
                    } else {
                        0
                    }
                }
                GLOBAL_EXISTS => {
                    if arg != 0 {
                        full
                    } else {
                        0
                    }
                }
                "box" => {
                    let mut out = 0;
                    for s in 0..model.carrier.len() {
                        let Value::Nbhd(ac) = &model.sigma[s].value else {
                            unreachable!()
                        };
                        if upclosed_contains(ac, arg) {
                            out |= 1 << s;
                        }
                    }
                    out
                }
                "dia" => {
                    let mut out = 0;
                    for s in 0..model.carrier.len() {
                        let Value::Nbhd(ac) = &model.sigma[s].value else {
                            unreachable!()
                        };
                        if ac.iter().all(|&m| m & arg != 0) {
                            out |= 1 << s;
                        }
                    }
                    out
                }
                other => return Err(Error::UnknownLifting(other.into())),
            }
        }
        MuFormula::Mu(v, a) => {
            let mut cur: Bits = 0;
            loop {
                env.push(v, cur);
                let next = global_truth(a, model, env)?;
                env.pop();
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
        MuFormula::Nu(v, a) => {
            let mut cur: Bits = full;
            loop {
                env.push(v, cur);
                let next = global_truth(a, model, env)?;
                env.pop();
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Monotone MSO
// ---------------------------------------------------------------------------

/// Parse the monotone second-order surface language: the usual grammar where
/// the only lifting atom is `lift box(p, q)`.
pub fn parse_mmso(text: &str) -> Result<MsoFormula> {
    let f = crate::logic::parse_mso(text)?;
    validate_mmso(&f)?;
    Ok(f)
}

fn validate_mmso(f: &MsoFormula) -> Result<()> {
    match f {
        MsoFormula::Bot | MsoFormula::Sr(_) | MsoFormula::Sub(..) => Ok(()),
        MsoFormula::Lift(name, _, qs) => {
            if name != "box" || qs.len() != 1 {
                return Err(Error::Malformed(
                    "the monotone second-order language has box(p,q) as its only modality".into(),
                ));
            }
            Ok(())
        }
        MsoFormula::Or(a, b) => {
            validate_mmso(a)?;
            validate_mmso(b)
        }
        MsoFormula::Not(a) => validate_mmso(a),
        MsoFormula::Exists(_, a) => validate_mmso(a),
    }
}

/// Direct semantics of the monotone second-order language over a
/// neighborhood model: box(p,q) says every p-point has a neighborhood inside
/// q. Cross-checked against the generic evaluator with the box lifting.
pub fn eval_mmso(
    f: &MsoFormula,
    model: &TModel,
    point: usize,
    quant_cap: usize,
) -> Result<bool> {
    if model.functor != FunctorSpec::MonNbhd {
        return Err(Error::Unsupported("expected a monotone-neighborhood model".into()));
    }
    if model.carrier.len() > quant_cap {
        return Err(Error::Cap(format!(
            "carrier of size {} exceeds quantifier cap {quant_cap}",
            model.carrier.len()
        )));
    }
    validate_mmso(f)?;
    let mut env = Env::default();
    eval_mmso_rec(f, model, point, &mut env)
}

fn eval_mmso_rec(f: &MsoFormula, model: &TModel, point: usize, env: &mut Env) -> Result<bool> {
    let lookup = |v: &str, env: &Env| env.lookup(v).or_else(|_| model.var(v));
    Ok(match f {
        MsoFormula::Bot => false,
        MsoFormula::Sr(p) => lookup(p, env)? == 1 << point,
        MsoFormula::Sub(p, q) => lookup(p, env)? & !lookup(q, env)? == 0,
        MsoFormula::Lift(_, p, qs) => {
            let pm = lookup(p, env)?;
            let qm = lookup(&qs[0], env)?;
            let mut ok = true;
            for v in bits_iter(pm) {
                let Value::Nbhd(ac) = &model.sigma[v].value else {
                    unreachable!()
                };
                // some neighborhood of v lies inside q
                if !upclosed_contains(ac, qm) {
                    ok = false;
                    break;
                }
            }
            ok
        }
        MsoFormula::Or(a, b) => {
            eval_mmso_rec(a, model, point, env)? || eval_mmso_rec(b, model, point, env)?
        }
        MsoFormula::Not(a) => !eval_mmso_rec(a, model, point, env)?,
        MsoFormula::Exists(v, a) => {
            let n = model.carrier.len();
            let mut found = false;
            for s in 0..(1u128 << n) {
                env.push(v, s);
                let ok = eval_mmso_rec(a, model, point, env)?;
                env.pop();
                if ok {
                    found = true;
                    break;
                }
            }
            found
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::logic::{eval_mso, eval_mu, parse_mso, parse_mu};
    use crate::model::OneStepModel as _OSM;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn mon_model(
        atoms: &[&str],
        families: &[(&str, &[&[&str]])],
        vals: &[(&str, &[&str])],
    ) -> TModel {
        let c = Carrier::new(atoms.iter().copied()).unwrap();
        let mut sigma = vec![TObject::mon_nbhd(&c, &[]).unwrap(); c.len()];
        for (s, gens) in families {
            sigma[c.index_of(s).unwrap()] = TObject::mon_nbhd(&c, gens).unwrap();
        }
        let valuation = vals
            .iter()
            .map(|(v, set)| (v.to_string(), c.mask_of(set.iter().copied()).unwrap()))
            .collect();
        TModel::new(FunctorSpec::MonNbhd, c, sigma, valuation).unwrap()
    }

    #[test]
    fn identity_is_a_bisimulation() {
        let m = mon_model(
            &["a", "b"],
            &[("a", &[&["b"]]), ("b", &[&["a", "b"]])],
            &[("p", &["a"])],
        );
        let rel = largest_nbhd_bisim(&m, &m, false).unwrap().unwrap();
        for s in 0..2 {
            assert!(rel.contains(&(s, s)));
        }
        assert!(is_nbhd_bisim(&m, &m, &rel));
    }

    #[test]
    fn different_colors_unrelated() {
        let m1 = mon_model(&["a"], &[], &[("p", &["a"])]);
        let m2 = mon_model(&["a"], &[], &[("p", &[])]);
        let rel = largest_nbhd_bisim(&m1, &m2, false).unwrap().unwrap();
        assert!(rel.is_empty());
        assert!(largest_nbhd_bisim(&m1, &m2, true).unwrap().is_none());
    }

    #[test]
    fn duplicated_state_is_related() {
        // the three-point model duplicates b as b1, b2
        let m1 = mon_model(&["a", "b"], &[("a", &[&["b"]])], &[]);
        let c2 = Carrier::new(["a", "b1", "b2"]).unwrap();
        let mut sigma = vec![TObject::mon_nbhd(&c2, &[]).unwrap(); 3];
        sigma[c2.index_of("a").unwrap()] =
            TObject::mon_nbhd(&c2, &[&["b1"], &["b2"]]).unwrap();
        let m2 = TModel::new(FunctorSpec::MonNbhd, c2.clone(), sigma, BTreeMap::new()).unwrap();
        let rel = largest_nbhd_bisim(&m1, &m2, false).unwrap().unwrap();
        let b = m1.carrier.index_of("b").unwrap();
        assert!(rel.contains(&(b, c2.index_of("b1").unwrap())));
        assert!(rel.contains(&(b, c2.index_of("b2").unwrap())));
    }

    #[test]
    fn mu_formulas_invariant_under_bisim() {
        let lam = Lambda::standard(&FunctorSpec::MonNbhd);
        let corpus_texts = [
            "lift box(p)",
            "lift dia(p)",
            "mu x . (p or lift dia(x))",
            "nu x . (p and lift box(x))",
        ];
        let m1 = mon_model(
            &["a", "b"],
            &[("a", &[&["a", "b"]]), ("b", &[&["b"]])],
            &[("p", &["b"])],
        );
        let c2 = Carrier::new(["a", "b1", "b2"]).unwrap();
        let mut sigma = vec![TObject::mon_nbhd(&c2, &[]).unwrap(); 3];
        sigma[c2.index_of("a").unwrap()] =
            TObject::mon_nbhd(&c2, &[&["a", "b1", "b2"]]).unwrap();
        sigma[c2.index_of("b1").unwrap()] = TObject::mon_nbhd(&c2, &[&["b1"]]).unwrap();
        sigma[c2.index_of("b2").unwrap()] = TObject::mon_nbhd(&c2, &[&["b2"]]).unwrap();
        let mut valuation = BTreeMap::new();
        valuation.insert("p".to_string(), c2.mask_of(["b1", "b2"]).unwrap());
        let m2 = TModel::new(FunctorSpec::MonNbhd, c2, sigma, valuation).unwrap();
        let rel = largest_nbhd_bisim(&m1, &m2, false).unwrap().unwrap();
        assert!(!rel.is_empty());
        for text in corpus_texts {
            let phi = parse_mu(text).unwrap();
            for &(s1, s2) in &rel {
                assert_eq!(
                    eval_mu(&phi, &m1, s1, &lam).unwrap(),
                    eval_mu(&phi, &m2, s2, &lam).unwrap(),
                    "formula {text} at pair ({s1},{s2})"
                );
            }
        }
    }

    #[test]
    fn global_round_trip() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(1..=3);
            let c = Carrier::numbered("s", n);
            let objects =
                crate::functor::enumerate_tobjects(&FunctorSpec::MonNbhd, &c, 2).unwrap();
            let sigma: Vec<TObject> = (0..n)
                .map(|_| objects[rng.gen_range(0..objects.len())].clone())
                .collect();
            let mut valuation = BTreeMap::new();
            valuation.insert("p".to_string(), rng.gen_range(0..(1u128 << n)));
            let m = TModel::new(FunctorSpec::MonNbhd, c, sigma, valuation).unwrap();
            let g = to_global_mstar(&m).unwrap();
            // supports are full
            for t in &g.sigma {
                let Value::NbhdStar(_, sup) = &t.value else { panic!() };
                assert_eq!(*sup, m.carrier.full());
            }
            assert_eq!(underlying_m(&g).unwrap(), m);
        }
    }

    #[test]
    fn globalize_transfer() {
        let lam_star = Lambda::standard(&FunctorSpec::MonNbhdStar);
        let texts = [
            "lift gex(p)",
            "lift gall(top)",
            "lift gall(p) and lift box(p)",
            "mu x . (p or lift dia(x))",
        ];
        let models = [
            mon_model(&["a", "b"], &[("a", &[&["b"]])], &[("p", &["a"])]),
            mon_model(
                &["a", "b"],
                &[("a", &[&["a"], &["b"]]), ("b", &[&["b"]])],
                &[("p", &["a", "b"])],
            ),
        ];
        for text in texts {
            let psi = parse_mu(text).unwrap();
            let star_psi = globalize(&psi);
            for m in &models {
                let g = to_global_mstar(m).unwrap();
                for s in 0..m.carrier.len() {
                    assert_eq!(
                        eval_mu_global(&psi, m, s).unwrap(),
                        eval_mu(&star_psi, &g, s, &lam_star).unwrap(),
                        "formula {text} at {s}"
                    );
                }
            }
        }
    }

    #[test]
    fn globalize_no_globals_is_identity() {
        let psi = parse_mu("mu x . (p or lift dia(x))").unwrap();
        assert_eq!(globalize(&psi), psi);
    }

    #[test]
    fn mmso_direct_clause() {
        // the two-point model from the collapse example: beta at u, with
        // box(p,q) true when every p-point has a neighborhood inside q
        let m = mon_model(&["u", "v"], &[("u", &[&["u"]])], &[("p", &["u"]), ("q", &["u"])]);
        let f = parse_mmso("lift box(p, q)").unwrap();
        assert!(eval_mmso(&f, &m, 0, 8).unwrap());
        // vacuous when p is empty
        let m2 = mon_model(&["u", "v"], &[], &[("p", &[]), ("q", &[])]);
        assert!(eval_mmso(&f, &m2, 0, 8).unwrap());
    }

    #[test]
    fn mmso_agrees_with_generic_mso() {
        let lam = Lambda::standard(&FunctorSpec::MonNbhd);
        let mut rng = StdRng::seed_from_u64(11);
        let texts = [
            "lift box(p, q)",
            "exists r . (sr(r) and r sub p)",
            "not (p sub q)",
            "exists r . lift box(r, q)",
        ];
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let c = Carrier::numbered("s", n);
            let objects =
                crate::functor::enumerate_tobjects(&FunctorSpec::MonNbhd, &c, 2).unwrap();
            let sigma: Vec<TObject> = (0..n)
                .map(|_| objects[rng.gen_range(0..objects.len())].clone())
                .collect();
            let mut valuation = BTreeMap::new();
            valuation.insert("p".to_string(), rng.gen_range(0..(1u128 << n)));
            valuation.insert("q".to_string(), rng.gen_range(0..(1u128 << n)));
            let m = TModel::new(FunctorSpec::MonNbhd, c, sigma, valuation).unwrap();
            for text in texts {
                let f = parse_mso(text).unwrap();
                assert_eq!(
                    eval_mmso(&f, &m, 0, 8).unwrap(),
                    eval_mso(&f, &m, 0, &lam, 8).unwrap(),
                    "formula {text} on {m:?}"
                );
            }
        }
    }

    #[test]
    fn demo_replays_the_paper_data() {
        let report = counterexample_demo().unwrap();
        assert_eq!(report.steps.len(), 4);
        assert!(report.all_ok(), "{report:?}");
    }

    #[test]
    fn signature_caps() {
        // four elements of the empty type, cap 2
        let c = Carrier::numbered("e", 4);
        let mut v = BTreeMap::new();
        v.insert("a".to_string(), 0 as Bits);
        let sig = m_signature(c.full(), &c, &v, 2);
        assert_eq!(sig.get(&Vec::<String>::new()), Some(&2));
        // one marked element
        v.insert("a".to_string(), 1 as Bits);
        let sig = m_signature(c.full(), &c, &v, 2);
        assert_eq!(sig.get(&vec!["a".to_string()]), Some(&1));
    }

    #[test]
    fn star_model_matches_itself() {
        let x = Carrier::new(["u", "v"]).unwrap();
        let alpha = TObject::mon_nbhd_star(&x, &[&["u"]], &["u", "v"]).unwrap();
        let c = UniformConstruction::standard(FunctorSpec::MonNbhdStar, 2, 1);
        let meta = monstar_meta(&c, &alpha).unwrap();
        let mut v = BTreeMap::new();
        v.insert("a".to_string(), meta.star.h.preimage(x.singleton("u").unwrap()));
        for n in 1..=2 {
            assert!(models_match(&meta, &v, &meta, &v, n, 2).unwrap());
        }
    }

    #[test]
    fn matching_lemma_instance_and_perturbation() {
        // the collapse data lifted to supported neighborhoods: matching at
        // depth 2^k holds between the star of alpha pulled back along f and
        // the star of beta
        let x = Carrier::new(["u*", "v*", "w*"]).unwrap();
        let y = Carrier::new(["u", "v"]).unwrap();
        let f =
            CarrierMap::new(x.clone(), y.clone(), &[("u*", "u"), ("v*", "v"), ("w*", "u")])
                .unwrap();
        let alpha = TObject::mon_nbhd_star(&x, &[&["u*", "v*"], &["u*", "w*"]], &["u*", "v*", "w*"])
            .unwrap();
        let beta = apply_map(&f, &alpha).unwrap();
        let k = 1usize;
        let c = UniformConstruction::standard(FunctorSpec::MonNbhdStar, 2, k);
        let meta_a = monstar_meta(&c, &alpha).unwrap();
        let meta_b = monstar_meta(&c, &beta).unwrap();
        // V over Y pulled back along f . h_alpha on the left, h_beta on the right
        let v_y: BTreeMap<String, Bits> = [("a".to_string(), y.singleton("v").unwrap())]
            .into_iter()
            .collect();
        let fh = meta_a.star.h.compose(&f).unwrap();
        let v1: BTreeMap<String, Bits> = v_y
            .iter()
            .map(|(k2, &m)| (k2.clone(), fh.preimage(m)))
            .collect();
        let v2: BTreeMap<String, Bits> = v_y
            .iter()
            .map(|(k2, &m)| (k2.clone(), meta_b.star.h.preimage(m)))
            .collect();
        assert!(models_match(&meta_a, &v1, &meta_b, &v2, 1 << k, 2).unwrap());
        // perturbing the valuation breaks the match
        assert_ne!(v2["a"], 0);
        let mut v2_bad = v2.clone();
        v2_bad.insert("a".to_string(), 0);
        assert!(!models_match(&meta_a, &v1, &meta_b, &v2_bad, 1 << k, 2).unwrap());
    }

    #[test]
    fn matched_star_models_agree_on_atoms() {
        // matched at depth 1 -> equal verdicts on a sub b, box a, E a
        let lam = Lambda::standard(&FunctorSpec::MonNbhdStar);
        let x = Carrier::new(["u*", "v*", "w*"]).unwrap();
        let y = Carrier::new(["u", "v"]).unwrap();
        let f =
            CarrierMap::new(x.clone(), y.clone(), &[("u*", "u"), ("v*", "v"), ("w*", "u")])
                .unwrap();
        let alpha = TObject::mon_nbhd_star(&x, &[&["u*", "v*"], &["u*", "w*"]], &["u*", "v*", "w*"])
            .unwrap();
        let beta = apply_map(&f, &alpha).unwrap();
        let c = UniformConstruction::standard(FunctorSpec::MonNbhdStar, 2, 1);
        let meta_a = monstar_meta(&c, &alpha).unwrap();
        let meta_b = monstar_meta(&c, &beta).unwrap();
        let fh = meta_a.star.h.compose(&f).unwrap();
        for a_mask in [0 as Bits, y.singleton("u").unwrap(), y.full()] {
            for b_mask in [0 as Bits, y.singleton("v").unwrap(), y.full()] {
                let v1: BTreeMap<String, Bits> = [
                    ("a".to_string(), fh.preimage(a_mask)),
                    ("b".to_string(), fh.preimage(b_mask)),
                ]
                .into_iter()
                .collect();
                let v2: BTreeMap<String, Bits> = [
                    ("a".to_string(), meta_b.star.h.preimage(a_mask)),
                    ("b".to_string(), meta_b.star.h.preimage(b_mask)),
                ]
                .into_iter()
                .collect();
                if !models_match(&meta_a, &v1, &meta_b, &v2, 1, 2).unwrap() {
                    continue;
                }
                let m1 = _OSM::new(meta_a.star.alpha.clone(), v1.clone()).unwrap();
                let m2 = _OSM::new(meta_b.star.alpha.clone(), v2.clone()).unwrap();
                // a sub b
                let sub = So1::Sub("a".into(), "b".into());
                assert_eq!(
                    crate::onestep::eval_so1(&sub, &m1, &lam, 16).unwrap(),
                    crate::onestep::eval_so1(&sub, &m2, &lam, 16).unwrap()
                );
                for lift in ["box", "E"] {
                    let at = So1::Lift(lift.into(), vec!["a".into()]);
                    assert_eq!(
                        crate::onestep::eval_so1(&at, &m1, &lam, 16).unwrap(),
                        crate::onestep::eval_so1(&at, &m2, &lam, 16).unwrap(),
                        "atom {lift} a_mask {a_mask:b} b_mask {b_mask:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn global_bisim_invariance_of_global_formulas() {
        // two models related by a global bisimulation agree on global formulas
        let m1 = mon_model(&["a", "b"], &[("a", &[&["b"]]), ("b", &[&["b"]])], &[("p", &["b"])]);
        let c2 = Carrier::new(["a", "b1", "b2"]).unwrap();
        let mut sigma = vec![TObject::mon_nbhd(&c2, &[]).unwrap(); 3];
        sigma[c2.index_of("a").unwrap()] = TObject::mon_nbhd(&c2, &[&["b1"], &["b2"]]).unwrap();
        sigma[c2.index_of("b1").unwrap()] = TObject::mon_nbhd(&c2, &[&["b1"]]).unwrap();
        sigma[c2.index_of("b2").unwrap()] = TObject::mon_nbhd(&c2, &[&["b2"]]).unwrap();
        let mut valuation = BTreeMap::new();
        valuation.insert("p".to_string(), c2.mask_of(["b1", "b2"]).unwrap());
        let m2 = TModel::new(FunctorSpec::MonNbhd, c2, sigma, valuation).unwrap();
        let rel = largest_nbhd_bisim(&m1, &m2, true).unwrap();
        let rel = rel.expect("a global bisimulation exists");
        let texts = ["lift gex(p)", "lift gall(p or lift box(p))", "lift gex(lift box(p))"];
        for text in texts {
            let psi = parse_mu(text).unwrap();
            for &(s1, s2) in &rel {
                assert_eq!(
                    eval_mu_global(&psi, &m1, s1).unwrap(),
                    eval_mu_global(&psi, &m2, s2).unwrap(),
                    "formula {text} pair ({s1},{s2})"
                );
            }
        }
        let _ = corpus::tree_shapes(1);
    }
}
