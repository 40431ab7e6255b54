use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::carrier::{Bits, Carrier, CarrierMap};
use crate::error::{Error, Result};

/// Algebraic description of a set functor: the exponential polynomial grammar
/// plus the three built-in functors (powerset, bag, monotone neighborhood and
/// its supported variant).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctorSpec {
    Const(Vec<String>),
    Id,
    Product(Box<FunctorSpec>, Box<FunctorSpec>),
    Coproduct(Vec<FunctorSpec>),
    /// Exp(T, C) is the functor X -> (T X)^C for a finite nonempty set C.
    Exp(Box<FunctorSpec>, Vec<String>),
    Powerset,
    Bag,
    MonNbhd,
    MonNbhdStar,
}

impl fmt::Display for FunctorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctorSpec::Const(c) => write!(f, "Const({})", c.join(",")),
            FunctorSpec::Id => write!(f, "Id"),
            FunctorSpec::Product(a, b) => write!(f, "({a} x {b})"),
            FunctorSpec::Coproduct(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            FunctorSpec::Exp(t, c) => write!(f, "{t}^{{{}}}", c.join(",")),
            FunctorSpec::Powerset => write!(f, "P"),
            FunctorSpec::Bag => write!(f, "B"),
            FunctorSpec::MonNbhd => write!(f, "M"),
            FunctorSpec::MonNbhdStar => write!(f, "M*"),
        }
    }
}

impl FunctorSpec {
    /// Validates the grammar invariants: exponent and constant sets are
    /// finite and nonempty, coproducts have at least one summand.
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctorSpec::Const(c) => {
                if c.is_empty() {
                    return Err(Error::Malformed("constant functor with empty set".into()));
                }
            }
            FunctorSpec::Exp(t, c) => {
                if c.is_empty() {
                    return Err(Error::Malformed("exponent set is empty".into()));
                }
                t.validate()?;
            }
            FunctorSpec::Product(a, b) => {
                a.validate()?;
                b.validate()?;
            }
            FunctorSpec::Coproduct(ts) => {
                if ts.is_empty() {
                    return Err(Error::Malformed("coproduct with no summands".into()));
                }
                for t in ts {
                    t.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn product(a: FunctorSpec, b: FunctorSpec) -> FunctorSpec {
        FunctorSpec::Product(Box::new(a), Box::new(b))
    }

    pub fn exp<S: Into<String>, I: IntoIterator<Item = S>>(t: FunctorSpec, c: I) -> FunctorSpec {
        FunctorSpec::Exp(Box::new(t), c.into_iter().map(Into::into).collect())
    }

    pub fn constant<S: Into<String>, I: IntoIterator<Item = S>>(c: I) -> FunctorSpec {
        FunctorSpec::Const(c.into_iter().map(Into::into).collect())
    }
}

/// A value of T X, shaped by a `FunctorSpec`, with subsets of the carrier as
/// bitmasks. Neighborhood families are stored as their minimal antichain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Const(String),
    Elem(usize),
    Pair(Box<Value>, Box<Value>),
    Inj(usize, Box<Value>),
    /// Total map from the exponent set (in sorted order) to component values.
    Map(Vec<Value>),
    Set(Bits),
    /// Sparse bag: sorted (atom index, count > 0) pairs.
    BagV(Vec<(usize, u64)>),
    /// Upward-closed family as its minimal antichain, sorted.
    Nbhd(Vec<Bits>),
    /// Supported neighborhood: (antichain, support mask).
    NbhdStar(Vec<Bits>, Bits),
}

/// A value of T X together with its functor and carrier, so mismatches are
/// detectable errors rather than silent coercions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TObject {
    pub functor: FunctorSpec,
    pub carrier: Carrier,
    pub value: Value,
}

/// Reduce a family of sets to its minimal antichain, sorted and deduped.
pub fn minimal_antichain(mut sets: Vec<Bits>) -> Vec<Bits> {
    sets.sort();
    sets.dedup();
    let mut out: Vec<Bits> = Vec::new();
    for &s in &sets {
        if !sets.iter().any(|&t| t != s && t & s == t) {
            out.push(s);
        }
    }
    out
}

/// Membership of `z` in the upward closure generated by `antichain`.
pub fn upclosed_contains(antichain: &[Bits], z: Bits) -> bool {
    antichain.iter().any(|&m| m & z == m)
}

impl TObject {
    pub fn new(functor: FunctorSpec, carrier: Carrier, value: Value) -> Result<TObject> {
        functor.validate()?;
        let t = TObject {
            functor,
            carrier,
            value,
        };
        t.check()?;
        Ok(t)
    }

    /// Structural well-formedness: value matches functor shape, carriers in
    /// range, antichains canonical, supports actually support.
    pub fn check(&self) -> Result<()> {
        check_value(&self.functor, &self.carrier, &self.value)
    }

    pub fn powerset(carrier: &Carrier, atoms: &[&str]) -> Result<TObject> {
        let m = carrier.mask_of(atoms.iter().copied())?;
        TObject::new(FunctorSpec::Powerset, carrier.clone(), Value::Set(m))
    }

    pub fn bag(carrier: &Carrier, counts: &[(&str, u64)]) -> Result<TObject> {
        let mut v: Vec<(usize, u64)> = Vec::new();
        for (a, n) in counts {
            if *n > 0 {
                v.push((carrier.index_of(a)?, *n));
            }
        }
        v.sort();
        TObject::new(FunctorSpec::Bag, carrier.clone(), Value::BagV(v))
    }

    /// Monotone neighborhood value from generating sets (closed upward).
    pub fn mon_nbhd(carrier: &Carrier, gens: &[&[&str]]) -> Result<TObject> {
        let mut sets = Vec::new();
        for g in gens {
            sets.push(carrier.mask_of(g.iter().copied())?);
        }
        TObject::new(
            FunctorSpec::MonNbhd,
            carrier.clone(),
            Value::Nbhd(minimal_antichain(sets)),
        )
    }

    pub fn mon_nbhd_star(carrier: &Carrier, gens: &[&[&str]], support: &[&str]) -> Result<TObject> {
        let mut sets = Vec::new();
        for g in gens {
            sets.push(carrier.mask_of(g.iter().copied())?);
        }
        TObject::new(
            FunctorSpec::MonNbhdStar,
            carrier.clone(),
            Value::NbhdStar(minimal_antichain(sets), carrier.mask_of(support.iter().copied())?),
        )
    }
}

fn check_value(f: &FunctorSpec, x: &Carrier, v: &Value) -> Result<()> {
    let bad = |msg: String| Err(Error::Malformed(msg));
    match (f, v) {
        (FunctorSpec::Const(c), Value::Const(s)) => {
            if c.contains(s) {
                Ok(())
            } else {
                bad(format!("constant {s} not in {:?}", c))
            }
        }
        (FunctorSpec::Id, Value::Elem(i)) => {
            if *i < x.len() {
                Ok(())
            } else {
                bad(format!("element index {i} out of carrier of size {}", x.len()))
            }
        }
        (FunctorSpec::Product(a, b), Value::Pair(u, w)) => {
            check_value(a, x, u)?;
            check_value(b, x, w)
        }
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            if *i >= ts.len() {
                return bad(format!("injection index {i} out of range"));
            }
            check_value(&ts[*i], x, u)
        }
        (FunctorSpec::Exp(t, c), Value::Map(vs)) => {
            if vs.len() != c.len() {
                return bad(format!(
                    "exponent map has {} entries, expected {}",
                    vs.len(),
                    c.len()
                ));
            }
            for u in vs {
                check_value(t, x, u)?;
            }
            Ok(())
        }
        (FunctorSpec::Powerset, Value::Set(m)) => {
            if m & !x.full() != 0 {
                bad("subset exceeds carrier".into())
            } else {
                Ok(())
            }
        }
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            let mut last = None;
            for &(i, n) in entries {
                if i >= x.len() {
                    return bad(format!("bag index {i} out of carrier"));
                }
                if n == 0 {
                    return bad("bag stores a zero count".into());
                }
                if let Some(l) = last {
                    if i <= l {
                        return bad("bag entries not strictly sorted".into());
                    }
                }
                last = Some(i);
            }
            Ok(())
        }
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => check_antichain(x, ac),
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, support)) => {
            check_antichain(x, ac)?;
            if support & !x.full() != 0 {
                return bad("support exceeds carrier".into());
            }
            // Subfunctor condition: the support must support the family,
            // i.e. every antichain element lies inside it.
            if ac.iter().any(|&m| m & !support != 0) {
                return Err(Error::Malformed(
                    "declared support does not support the neighborhood family".into(),
                ));
            }
            Ok(())
        }
        _ => bad(format!("value shape does not match functor {f}")),
    }
}

fn check_antichain(x: &Carrier, ac: &[Bits]) -> Result<()> {
    let mut last = None;
    for &m in ac {
        if m & !x.full() != 0 {
            return Err(Error::Malformed("neighborhood exceeds carrier".into()));
        }
        if let Some(l) = last {
            if m <= l {
                return Err(Error::Malformed("antichain not strictly sorted".into()));
            }
        }
        last = Some(m);
    }
    for (i, &m) in ac.iter().enumerate() {
        for (j, &n) in ac.iter().enumerate() {
            if i != j && n & m == n {
                return Err(Error::Malformed(
                    "neighborhood family is not a minimal antichain".into(),
                ));
            }
        }
    }
    Ok(())
}

/// The functorial action T f applied to a value of T X along f : X -> Y.
pub fn apply_map(f: &CarrierMap, t: &TObject) -> Result<TObject> {
    if f.dom != t.carrier {
        return Err(Error::CarrierMismatch(format!(
            "apply_map: map domain {:?} differs from value carrier {:?}",
            f.dom, t.carrier
        )));
    }
    let value = apply_value(&t.functor, f, &t.value)?;
    TObject::new(t.functor.clone(), f.cod.clone(), value)
}

fn apply_value(spec: &FunctorSpec, f: &CarrierMap, v: &Value) -> Result<Value> {
    Ok(match (spec, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => Value::Const(s.clone()),
        (FunctorSpec::Id, Value::Elem(i)) => Value::Elem(f.apply(*i)),
        (FunctorSpec::Product(a, b), Value::Pair(u, w)) => Value::Pair(
            Box::new(apply_value(a, f, u)?),
            Box::new(apply_value(b, f, w)?),
        ),
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            Value::Inj(*i, Box::new(apply_value(&ts[*i], f, u)?))
        }
        (FunctorSpec::Exp(t, _), Value::Map(vs)) => Value::Map(
            vs.iter()
                .map(|u| apply_value(t, f, u))
                .collect::<Result<_>>()?,
        ),
        (FunctorSpec::Powerset, Value::Set(m)) => Value::Set(f.image(*m)),
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
            for &(i, n) in entries {
                let slot = acc.entry(f.apply(i)).or_insert(0);
                *slot = slot.checked_add(n).ok_or_else(|| {
                    Error::Malformed("bag count overflow under apply_map".into())
                })?;
            }
            Value::BagV(acc.into_iter().collect())
        }
        // M f (N) = { W <= Y | f^-1[W] in N }; since f^-1[W] >= m iff W >= f[m],
        // the image family is generated by the images of the antichain.
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => {
            Value::Nbhd(minimal_antichain(ac.iter().map(|&m| f.image(m)).collect()))
        }
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, support)) => Value::NbhdStar(
            minimal_antichain(ac.iter().map(|&m| f.image(m)).collect()),
            f.image(*support),
        ),
        _ => return Err(Error::Malformed("value does not match functor".into())),
    })
}

/// Decides by structural recursion whether `sub` (a subset mask of the value's
/// carrier) supports the value, and if so returns the unique restriction.
pub fn restrict_to_support(t: &TObject, sub: Bits) -> Result<TObject> {
    let (small, inj) = t.carrier.restrict(sub);
    let value = restrict_value(&t.functor, &inj, &t.value)?;
    TObject::new(t.functor.clone(), small, value)
}

fn restrict_value(spec: &FunctorSpec, inj: &CarrierMap, v: &Value) -> Result<Value> {
    let sub: Bits = inj.image(inj.dom.full());
    let fail = |msg: &str| Err(Error::NotASupport(msg.into()));
    Ok(match (spec, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => Value::Const(s.clone()),
        (FunctorSpec::Id, Value::Elem(i)) => {
            if sub & (1 << i) == 0 {
                return fail("Id value outside the candidate support");
            }
            Value::Elem(inj.preimage(1 << i).trailing_zeros() as usize)
        }
        (FunctorSpec::Product(a, b), Value::Pair(u, w)) => Value::Pair(
            Box::new(restrict_value(a, inj, u)?),
            Box::new(restrict_value(b, inj, w)?),
        ),
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            Value::Inj(*i, Box::new(restrict_value(&ts[*i], inj, u)?))
        }
        (FunctorSpec::Exp(t, _), Value::Map(vs)) => Value::Map(
            vs.iter()
                .map(|u| restrict_value(t, inj, u))
                .collect::<Result<_>>()?,
        ),
        (FunctorSpec::Powerset, Value::Set(m)) => {
            if m & !sub != 0 {
                return fail("subset not contained in the candidate support");
            }
            Value::Set(inj.preimage(*m))
        }
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            if entries.iter().any(|&(i, _)| sub & (1 << i) == 0) {
                return fail("bag support not contained in the candidate support");
            }
            Value::BagV(
                entries
                    .iter()
                    .map(|&(i, n)| (inj.preimage(1 << i).trailing_zeros() as usize, n))
                    .collect(),
            )
        }
        // X' supports an upward-closed family iff every antichain element is
        // contained in X'; the restriction keeps the same antichain.
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => {
            if ac.iter().any(|&m| m & !sub != 0) {
                return fail("an antichain element escapes the candidate support");
            }
            Value::Nbhd(ac.iter().map(|&m| inj.preimage(m)).collect())
        }
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, support)) => {
            if ac.iter().any(|&m| m & !sub != 0) || support & !sub != 0 {
                return fail("component escapes the candidate support");
            }
            Value::NbhdStar(
                ac.iter().map(|&m| inj.preimage(m)).collect(),
                inj.preimage(*support),
            )
        }
        _ => return Err(Error::Malformed("value does not match functor".into())),
    })
}

/// Whether `sub` supports the value (no restriction materialized).
pub fn is_support(t: &TObject, sub: Bits) -> bool {
    restrict_to_support(t, sub).is_ok()
}

/// All subset-minimal supports of the value, by brute force over subsets.
pub fn minimal_supports(t: &TObject, cap: usize) -> Result<Vec<Bits>> {
    let n = t.carrier.len();
    if n > cap {
        return Err(Error::Cap(format!(
            "minimal_supports: carrier of size {n} exceeds cap {cap}"
        )));
    }
    let mut found: Vec<Bits> = Vec::new();
    for sub in t.carrier.subsets() {
        if found.iter().any(|&m| m & sub == m) {
            continue; // a smaller support is already recorded
        }
        if is_support(t, sub) {
            found.push(sub);
        }
    }
    Ok(found)
}

/// Enumerate all of T X for a small carrier: used by brute-force checks.
/// Bag counts are bounded by `bag_max`.
pub fn enumerate_tobjects(spec: &FunctorSpec, x: &Carrier, bag_max: u64) -> Result<Vec<TObject>> {
    let values = enumerate_values(spec, x, bag_max)?;
    values
        .into_iter()
        .map(|v| TObject::new(spec.clone(), x.clone(), v))
        .collect()
}

fn enumerate_values(spec: &FunctorSpec, x: &Carrier, bag_max: u64) -> Result<Vec<Value>> {
    Ok(match spec {
        FunctorSpec::Const(c) => c.iter().map(|s| Value::Const(s.clone())).collect(),
        FunctorSpec::Id => (0..x.len()).map(Value::Elem).collect(),
        FunctorSpec::Product(a, b) => {
            let us = enumerate_values(a, x, bag_max)?;
            let ws = enumerate_values(b, x, bag_max)?;
            let mut out = Vec::new();
            for u in &us {
                for w in &ws {
                    out.push(Value::Pair(Box::new(u.clone()), Box::new(w.clone())));
                }
            }
            out
        }
        FunctorSpec::Coproduct(ts) => {
            let mut out = Vec::new();
            for (i, t) in ts.iter().enumerate() {
                for u in enumerate_values(t, x, bag_max)? {
                    out.push(Value::Inj(i, Box::new(u)));
                }
            }
            out
        }
        FunctorSpec::Exp(t, c) => {
            let us = enumerate_values(t, x, bag_max)?;
            let mut out: Vec<Vec<Value>> = vec![Vec::new()];
            for _ in 0..c.len() {
                let mut next = Vec::new();
                for partial in &out {
                    for u in &us {
                        let mut p = partial.clone();
                        p.push(u.clone());
                        next.push(p);
                    }
                }
                out = next;
                if out.len() > 1_000_000 {
                    return Err(Error::Cap("enumerate_tobjects: exponent blow-up".into()));
                }
            }
            out.into_iter().map(Value::Map).collect()
        }
        FunctorSpec::Powerset => x.subsets().into_iter().map(Value::Set).collect(),
        FunctorSpec::Bag => {
            let mut out: Vec<Vec<(usize, u64)>> = vec![Vec::new()];
            for i in 0..x.len() {
                let mut next = Vec::new();
                for partial in &out {
                    for n in 0..=bag_max {
                        let mut p = partial.clone();
                        if n > 0 {
                            p.push((i, n));
                        }
                        next.push(p);
                    }
                }
                out = next;
            }
            out.into_iter().map(Value::BagV).collect()
        }
        FunctorSpec::MonNbhd => enumerate_antichains(x)?.into_iter().map(Value::Nbhd).collect(),
        FunctorSpec::MonNbhdStar => {
            let acs = enumerate_antichains(x)?;
            let mut out = Vec::new();
            for ac in acs {
                let union: Bits = ac.iter().fold(0, |a, &b| a | b);
                for sup in x.subsets() {
                    if union & !sup == 0 {
                        out.push(Value::NbhdStar(ac.clone(), sup));
                    }
                }
            }
            out
        }
    })
}

/// All antichains over subsets of `x` (equivalently, all upward-closed
/// families). Exponential in 2^|x|; intended for carriers of size <= 4.
pub fn enumerate_antichains(x: &Carrier) -> Result<Vec<Vec<Bits>>> {
    if x.len() > 4 {
        return Err(Error::Cap(format!(
            "antichain enumeration over carrier of size {} (max 4)",
            x.len()
        )));
    }
    let subs = x.subsets();
    let mut out: Vec<Vec<Bits>> = vec![Vec::new()];
    // depth-first: each subset either joins the antichain (if incomparable) or not
    fn rec(subs: &[Bits], idx: usize, cur: &mut Vec<Bits>, out: &mut Vec<Vec<Bits>>) {
        if idx == subs.len() {
            return;
        }
        rec(subs, idx + 1, cur, out);
        let s = subs[idx];
        if cur.iter().all(|&t| t & s != t && t & s != s) {
            cur.push(s);
            let mut sorted = cur.clone();
            sorted.sort();
            out.push(sorted);
            rec(subs, idx + 1, cur, out);
            cur.pop();
        }
    }
    let mut cur = Vec::new();
    rec(&subs, 0, &mut cur, &mut out);
    out.sort();
    out.dedup();
    Ok(out)
}

/// Expand an upward-closed family from its antichain into the full set list.
pub fn upclosure_members(x: &Carrier, antichain: &[Bits]) -> Vec<Bits> {
    x.subsets()
        .into_iter()
        .filter(|&z| upclosed_contains(antichain, z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop61_x() -> (Carrier, TObject) {
        let x = Carrier::new(["u*", "v*", "w*"]).unwrap();
        let alpha = TObject::mon_nbhd(&x, &[&["u*", "v*"], &["u*", "w*"]]).unwrap();
        (x, alpha)
    }

    // Data from the proof that M admits no adequate uniform construction:
    // M f(alpha) = beta for f : u*,w* -> u, v* -> v.
    #[test]
    fn monnbhd_apply_map_collapses() {
        let (x, alpha) = prop61_x();
        let y = Carrier::new(["u", "v"]).unwrap();
        let f = CarrierMap::new(x, y.clone(), &[("u*", "u"), ("v*", "v"), ("w*", "u")]).unwrap();
        let beta = apply_map(&f, &alpha).unwrap();
        let expect = TObject::mon_nbhd(&y, &[&["u"]]).unwrap();
        assert_eq!(beta, expect);
    }

    #[test]
    fn identity_law() {
        let (x, alpha) = prop61_x();
        let id = CarrierMap::identity(&x);
        assert_eq!(apply_map(&id, &alpha).unwrap(), alpha);
    }

    #[test]
    fn bag_sums_over_preimage() {
        let x = Carrier::new(["x", "y"]).unwrap();
        let z = Carrier::new(["z"]).unwrap();
        let t = TObject::bag(&x, &[("x", 1), ("y", 1)]).unwrap();
        let f = CarrierMap::new(x, z.clone(), &[("x", "z"), ("y", "z")]).unwrap();
        let img = apply_map(&f, &t).unwrap();
        assert_eq!(img, TObject::bag(&z, &[("z", 2)]).unwrap());
    }

    #[test]
    fn restrict_monnbhd_support() {
        // beta = upclosure of {{u}} over {u,v}: {u} is a support.
        let y = Carrier::new(["u", "v"]).unwrap();
        let beta = TObject::mon_nbhd(&y, &[&["u"]]).unwrap();
        let sub = y.singleton("u").unwrap();
        let small = restrict_to_support(&beta, sub).unwrap();
        let yp = Carrier::new(["u"]).unwrap();
        assert_eq!(small, TObject::mon_nbhd(&yp, &[&["u"]]).unwrap());
        // And restriction followed by injection returns beta exactly.
        let (_, inj) = y.restrict(sub);
        assert_eq!(apply_map(&inj, &small).unwrap(), beta);
    }

    #[test]
    fn prop61_alpha_has_no_small_support() {
        // alpha cannot have a support omitting v*.
        let (x, alpha) = prop61_x();
        let sub = x.mask_of(["u*", "w*"]).unwrap();
        assert!(restrict_to_support(&alpha, sub).is_err());
        let mins = minimal_supports(&alpha, 12).unwrap();
        let v = x.singleton("v*").unwrap();
        assert!(!mins.is_empty());
        assert!(mins.iter().all(|&m| m & v != 0));
    }

    #[test]
    fn powerset_minimal_support_is_itself() {
        let c = Carrier::new(["a", "b", "c"]).unwrap();
        let t = TObject::powerset(&c, &["a", "b"]).unwrap();
        let mins = minimal_supports(&t, 12).unwrap();
        assert_eq!(mins, vec![c.mask_of(["a", "b"]).unwrap()]);
    }

    #[test]
    fn bag_minimal_support() {
        let c = Carrier::new(["x", "y"]).unwrap();
        let t = TObject::bag(&c, &[("x", 2)]).unwrap();
        let mins = minimal_supports(&t, 12).unwrap();
        assert_eq!(mins, vec![c.singleton("x").unwrap()]);
    }

    #[test]
    fn antichain_count_matches_dedekind() {
        // Antichains over subsets of a 2-element set: 6 of them
        // (free distributive lattice on 2 generators plus empty/full variants).
        let c = Carrier::new(["a", "b"]).unwrap();
        assert_eq!(enumerate_antichains(&c).unwrap().len(), 6);
        let c3 = Carrier::new(["a", "b", "c"]).unwrap();
        assert_eq!(enumerate_antichains(&c3).unwrap().len(), 20);
    }

    #[test]
    fn support_transport_on_samples() {
        // If X' supports alpha then f[X'] supports T f(alpha).
        let (x, alpha) = prop61_x();
        let y = Carrier::new(["u", "v"]).unwrap();
        let f = CarrierMap::new(x.clone(), y, &[("u*", "u"), ("v*", "v"), ("w*", "u")]).unwrap();
        for sub in x.subsets() {
            if is_support(&alpha, sub) {
                let img = apply_map(&f, &alpha).unwrap();
                assert!(is_support(&img, f.image(sub)));
            }
        }
    }
}
