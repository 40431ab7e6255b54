use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::carrier::{Bits, Carrier, CarrierMap};
use crate::error::{Error, Result};
use crate::functor::{
    apply_map, enumerate_tobjects, upclosed_contains, FunctorSpec, TObject, Value,
};

/// How a lifting decides membership.
#[derive(Clone)]
pub enum LiftingKind {
    /// Powerset box: alpha <= Z.
    BoxP,
    /// Powerset diamond: alpha meets Z.
    DiaP,
    /// Monotone neighborhood box: Z in N.
    BoxM,
    /// Monotone neighborhood diamond (dual of box): every neighborhood meets Z.
    DiaM,
    /// M* box: Z in N_alpha.
    BoxStar,
    /// M* diamond (dual of box).
    DiaStar,
    /// M* E: Z meets the support.
    EStar,
    /// M* E dual: the support is contained in Z.
    EdStar,
    /// Bag: at least k successors (with multiplicity) in Z.
    AtLeast(u64),
    /// Boolean dual of AtLeast(k): fewer than k successors outside Z.
    AtLeastDual(u64),
    /// Yoneda: membership via the table over T(2^n).
    Yoneda { table: YonedaTable },
    /// Boolean dual of a named lifting.
    DualOf(Box<Lifting>),
    /// Opaque evaluator (used for induced one-step translations).
    Custom(Arc<dyn Fn(&TObject, &[Bits]) -> Result<bool> + Send + Sync>),
}

impl fmt::Debug for LiftingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftingKind::BoxP => write!(f, "BoxP"),
            LiftingKind::DiaP => write!(f, "DiaP"),
            LiftingKind::BoxM => write!(f, "BoxM"),
            LiftingKind::DiaM => write!(f, "DiaM"),
            LiftingKind::BoxStar => write!(f, "BoxStar"),
            LiftingKind::DiaStar => write!(f, "DiaStar"),
            LiftingKind::EStar => write!(f, "EStar"),
            LiftingKind::EdStar => write!(f, "EdStar"),
            LiftingKind::AtLeast(k) => write!(f, "AtLeast({k})"),
            LiftingKind::AtLeastDual(k) => write!(f, "AtLeastDual({k})"),
            LiftingKind::Yoneda { .. } => write!(f, "Yoneda"),
            LiftingKind::DualOf(l) => write!(f, "DualOf({})", l.name),
            LiftingKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Yoneda representation of an n-place lifting: a subset of T(2^n).
/// The carrier `two_n` has one atom per subset of {0..n-1}.
#[derive(Clone, Debug)]
pub struct YonedaTable {
    pub arity: usize,
    pub two_n: Carrier,
    pub members: Vec<Value>,
}

/// An n-place predicate lifting for a fixed functor, with an evaluator
/// deciding membership on finite carriers.
#[derive(Clone, Debug)]
pub struct Lifting {
    pub name: String,
    pub arity: usize,
    pub functor: FunctorSpec,
    pub kind: LiftingKind,
    /// Name of the registered Boolean dual, when one exists.
    pub dual: Option<String>,
}

impl PartialEq for Lifting {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.arity == other.arity && self.functor == other.functor
    }
}
impl Eq for Lifting {}

impl Lifting {
    fn builtin(name: &str, arity: usize, functor: FunctorSpec, kind: LiftingKind, dual: &str) -> Lifting {
        Lifting {
            name: name.into(),
            arity,
            functor,
            kind,
            dual: Some(dual.into()),
        }
    }
}

/// Decides alpha in lambda_X(Z1,...,Zn).
pub fn lifting_member(l: &Lifting, alpha: &TObject, args: &[Bits]) -> Result<bool> {
    if args.len() != l.arity {
        return Err(Error::Arity {
            name: l.name.clone(),
            expected: l.arity,
            got: args.len(),
        });
    }
    if l.functor != alpha.functor {
        return Err(Error::CarrierMismatch(format!(
            "lifting {} is for functor {}, value has functor {}",
            l.name, l.functor, alpha.functor
        )));
    }
    let full = alpha.carrier.full();
    match (&l.kind, &alpha.value) {
        (LiftingKind::BoxP, Value::Set(m)) => Ok(m & !args[0] == 0),
        (LiftingKind::DiaP, Value::Set(m)) => Ok(m & args[0] != 0),
        (LiftingKind::BoxM, Value::Nbhd(ac)) => Ok(upclosed_contains(ac, args[0])),
        (LiftingKind::DiaM, Value::Nbhd(ac)) => Ok(ac.iter().all(|&m| m & args[0] != 0)),
        (LiftingKind::BoxStar, Value::NbhdStar(ac, _)) => Ok(upclosed_contains(ac, args[0])),
        (LiftingKind::DiaStar, Value::NbhdStar(ac, _)) => Ok(ac.iter().all(|&m| m & args[0] != 0)),
        (LiftingKind::EStar, Value::NbhdStar(_, sup)) => Ok(sup & args[0] != 0),
        (LiftingKind::EdStar, Value::NbhdStar(_, sup)) => Ok(sup & !args[0] == 0),
        (LiftingKind::AtLeast(k), Value::BagV(entries)) => {
            let total: u64 = entries
                .iter()
                .filter(|&&(i, _)| args[0] & (1 << i) != 0)
                .map(|&(_, n)| n)
                .sum();
            Ok(total >= *k)
        }
        (LiftingKind::AtLeastDual(k), Value::BagV(entries)) => {
            let outside: u64 = entries
                .iter()
                .filter(|&&(i, _)| args[0] & (1 << i) == 0)
                .map(|&(_, n)| n)
                .sum();
            Ok(outside < *k)
        }
        (LiftingKind::Yoneda { table }, _) => {
            let chi = characteristic_map(&alpha.carrier, args, &table.two_n);
            let image = apply_map(&chi, alpha)?;
            Ok(table.members.contains(&image.value))
        }
        (LiftingKind::DualOf(inner), _) => {
            let complemented: Vec<Bits> = args.iter().map(|&z| full & !z).collect();
            Ok(!lifting_member(inner, alpha, &complemented)?)
        }
        (LiftingKind::Custom(eval), _) => eval(alpha, args),
        _ => Err(Error::Malformed(format!(
            "lifting {} cannot evaluate a value of this shape",
            l.name
        ))),
    }
}

/// The carrier 2^n whose atoms name the subsets of {0..n-1}.
pub fn two_to_the(n: usize) -> Carrier {
    Carrier::new((0..(1usize << n)).map(|s| format!("s{s:02}"))).expect("2^n carrier")
}

/// chi_{Z1..Zn} : X -> 2^n sending x to { i | x in Z_i }.
fn characteristic_map(x: &Carrier, args: &[Bits], two_n: &Carrier) -> CarrierMap {
    let map = (0..x.len())
        .map(|i| {
            let mut s = 0usize;
            for (k, &z) in args.iter().enumerate() {
                if z & (1 << i) != 0 {
                    s |= 1 << k;
                }
            }
            s
        })
        .collect();
    CarrierMap {
        dom: x.clone(),
        cod: two_n.clone(),
        map,
    }
}

/// Builds the natural lifting represented by a subset of T(2^n), per the
/// Yoneda representation of liftings. Monotonicity of the table is checked by
/// brute force on small carriers and reported (non-monotone tables are
/// accepted but flagged).
pub fn yoneda_lifting(
    functor: &FunctorSpec,
    n: usize,
    members: Vec<Value>,
    name: &str,
) -> Result<(Lifting, bool)> {
    if has_bag(functor) {
        return Err(Error::Unsupported(
            "yoneda tables over the bag functor: T(2^n) is infinite".into(),
        ));
    }
    let two_n = two_to_the(n);
    let mut canon = members;
    for v in &canon {
        TObject::new(functor.clone(), two_n.clone(), v.clone())?;
    }
    canon.sort();
    canon.dedup();
    let lifting = Lifting {
        name: name.into(),
        arity: n,
        functor: functor.clone(),
        kind: LiftingKind::Yoneda {
            table: YonedaTable {
                arity: n,
                two_n,
                members: canon,
            },
        },
        dual: None,
    };
    let monotone = is_monotone_lifting(&lifting, 3)?;
    Ok((lifting, monotone))
}

fn has_bag(f: &FunctorSpec) -> bool {
    match f {
        FunctorSpec::Bag => true,
        FunctorSpec::Product(a, b) => has_bag(a) || has_bag(b),
        FunctorSpec::Coproduct(ts) => ts.iter().any(has_bag),
        FunctorSpec::Exp(t, _) => has_bag(t),
        _ => false,
    }
}

/// Brute-force monotonicity over all one-step models with |X| <= cap:
/// enlarging any single argument never removes alpha from the lifted set.
pub fn is_monotone_lifting(l: &Lifting, cap: usize) -> Result<bool> {
    for size in 0..=cap {
        let x = Carrier::numbered("x", size);
        for alpha in enumerate_tobjects(&l.functor, &x, 2)? {
            let subs = x.subsets();
            let mut args = vec![0 as Bits; l.arity];
            if !mono_rec(l, &alpha, &subs, &mut args, 0, &x)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn mono_rec(
    l: &Lifting,
    alpha: &TObject,
    subs: &[Bits],
    args: &mut Vec<Bits>,
    pos: usize,
    x: &Carrier,
) -> Result<bool> {
    if pos == args.len() {
        if !lifting_member(l, alpha, args)? {
            return Ok(true);
        }
        // enlarge each argument by one element at a time
        for k in 0..args.len() {
            let orig = args[k];
            for i in 0..x.len() {
                if orig & (1 << i) == 0 {
                    args[k] = orig | (1 << i);
                    let still = lifting_member(l, alpha, args)?;
                    args[k] = orig;
                    if !still {
                        return Ok(false);
                    }
                }
            }
        }
        return Ok(true);
    }
    for &s in subs {
        args[pos] = s;
        if !mono_rec(l, alpha, subs, args, pos + 1, x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of a naturality check.
#[derive(Debug, Clone)]
pub struct NaturalityReport {
    pub squares_checked: usize,
    pub violation: Option<String>,
}

/// Checks naturality squares f : X -> Y on all carriers up to size 3 within
/// the budget: alpha in lambda_X(f^-1 V) iff T f(alpha) in lambda_Y(V).
pub fn check_naturality(l: &Lifting, budget: usize) -> Result<NaturalityReport> {
    let mut checked = 0usize;
    for nx in 0..=3usize {
        for ny in 0..=3usize {
            let x = Carrier::numbered("x", nx);
            let y = Carrier::numbered("y", ny);
            if nx > 0 && ny == 0 {
                continue; // no maps
            }
            let alphas = enumerate_tobjects(&l.functor, &x, 2)?;
            let ysubs = y.subsets();
            // all maps X -> Y
            let total_maps = (ny as u64).pow(nx as u32).max(1);
            for code in 0..total_maps {
                let mut c = code;
                let mut map = Vec::with_capacity(nx);
                for _ in 0..nx {
                    map.push((c % ny.max(1) as u64) as usize);
                    c /= ny.max(1) as u64;
                }
                let f = CarrierMap {
                    dom: x.clone(),
                    cod: y.clone(),
                    map,
                };
                for alpha in &alphas {
                    let image = apply_map(&f, alpha)?;
                    let mut args = vec![0 as Bits; l.arity];
                    let viol = nat_rec(l, alpha, &image, &f, &ysubs, &mut args, 0, &mut checked, budget)?;
                    if let Some(v) = viol {
                        return Ok(NaturalityReport {
                            squares_checked: checked,
                            violation: Some(v),
                        });
                    }
                    if checked >= budget {
                        return Ok(NaturalityReport {
                            squares_checked: checked,
                            violation: None,
                        });
                    }
                }
            }
        }
    }
    Ok(NaturalityReport {
        squares_checked: checked,
        violation: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn nat_rec(
    l: &Lifting,
    alpha: &TObject,
    image: &TObject,
    f: &CarrierMap,
    ysubs: &[Bits],
    args: &mut Vec<Bits>,
    pos: usize,
    checked: &mut usize,
    budget: usize,
) -> Result<Option<String>> {
    if *checked >= budget {
        return Ok(None);
    }
    if pos == args.len() {
        *checked += 1;
        let pre: Vec<Bits> = args.iter().map(|&v| f.preimage(v)).collect();
        let lhs = lifting_member(l, alpha, &pre)?;
        let rhs = lifting_member(l, image, args)?;
        if lhs != rhs {
            return Ok(Some(format!(
                "naturality fails for {} at f: {:?} -> {:?} with map {:?}, alpha={:?}, args={:?}",
                l.name, f.dom, f.cod, f.map, alpha.value, args
            )));
        }
        return Ok(None);
    }
    for &s in ysubs {
        args[pos] = s;
        if let Some(v) = nat_rec(l, alpha, image, f, ysubs, args, pos + 1, checked, budget)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// A set Lambda of liftings for one functor, with name lookup and dual pairs.
#[derive(Clone, Debug, Default)]
pub struct Lambda {
    by_name: BTreeMap<String, Lifting>,
}

impl Lambda {
    pub fn empty() -> Lambda {
        Lambda::default()
    }

    /// The standard expressively complete lifting set for each functor:
    /// box/dia for powerset and monotone neighborhoods, Theta for M*, and
    /// graded `atleast` liftings for bags. Polynomial functors start empty
    /// (use yoneda tables).
    pub fn standard(f: &FunctorSpec) -> Lambda {
        let mut l = Lambda::empty();
        match f {
            FunctorSpec::Powerset => {
                l.insert(Lifting::builtin("box", 1, f.clone(), LiftingKind::BoxP, "dia"));
                l.insert(Lifting::builtin("dia", 1, f.clone(), LiftingKind::DiaP, "box"));
            }
            FunctorSpec::MonNbhd => {
                l.insert(Lifting::builtin("box", 1, f.clone(), LiftingKind::BoxM, "dia"));
                l.insert(Lifting::builtin("dia", 1, f.clone(), LiftingKind::DiaM, "box"));
            }
            FunctorSpec::MonNbhdStar => {
                l.insert(Lifting::builtin("box", 1, f.clone(), LiftingKind::BoxStar, "dia"));
                l.insert(Lifting::builtin("dia", 1, f.clone(), LiftingKind::DiaStar, "box"));
                l.insert(Lifting::builtin("E", 1, f.clone(), LiftingKind::EStar, "Ed"));
                l.insert(Lifting::builtin("Ed", 1, f.clone(), LiftingKind::EdStar, "E"));
            }
            FunctorSpec::Bag => {
                for k in 1..=3u64 {
                    l.insert(Lifting::builtin(
                        &format!("atleast{k}"),
                        1,
                        f.clone(),
                        LiftingKind::AtLeast(k),
                        &format!("atleast{k}d"),
                    ));
                    l.insert(Lifting::builtin(
                        &format!("atleast{k}d"),
                        1,
                        f.clone(),
                        LiftingKind::AtLeastDual(k),
                        &format!("atleast{k}"),
                    ));
                }
            }
            _ => {}
        }
        l
    }

    pub fn insert(&mut self, l: Lifting) {
        self.by_name.insert(l.name.clone(), l);
    }

    pub fn get(&self, name: &str) -> Result<&Lifting> {
        self.by_name
            .get(name)
            .ok_or_else(|| Error::UnknownLifting(name.into()))
    }

    pub fn names(&self) -> Vec<String> {
        self.by_name.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Lifting> {
        self.by_name.values()
    }

    /// The registered dual of a lifting, or an error.
    pub fn dual_of(&self, name: &str) -> Result<&Lifting> {
        let l = self.get(name)?;
        match &l.dual {
            Some(d) => self.get(d),
            None => Err(Error::NoDual(name.into())),
        }
    }

    /// Register the formal dual of a lifting under `name^d` if it has none.
    pub fn close_under_duals(&mut self) {
        let missing: Vec<Lifting> = self
            .by_name
            .values()
            .filter(|l| l.dual.is_none())
            .cloned()
            .collect();
        for l in missing {
            let dname = format!("{}^d", l.name);
            let dual = Lifting {
                name: dname.clone(),
                arity: l.arity,
                functor: l.functor.clone(),
                kind: LiftingKind::DualOf(Box::new(l.clone())),
                dual: Some(l.name.clone()),
            };
            self.by_name.get_mut(&l.name).unwrap().dual = Some(dname.clone());
            self.insert(dual);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mstar_box_and_e() {
        // alpha with N = upclosure{{u}}, S = {u,v}
        let c = Carrier::new(["u", "v"]).unwrap();
        let alpha = TObject::mon_nbhd_star(&c, &[&["u"]], &["u", "v"]).unwrap();
        let lam = Lambda::standard(&FunctorSpec::MonNbhdStar);
        let bx = lam.get("box").unwrap();
        let e = lam.get("E").unwrap();
        let zuv = c.full();
        assert!(lifting_member(bx, &alpha, &[zuv]).unwrap());
        assert!(!lifting_member(e, &alpha, &[0]).unwrap());
    }

    #[test]
    fn powerset_dia_is_dual_of_box() {
        // dia Z = not box (complement Z), checked by brute force.
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let bx = lam.get("box").unwrap().clone();
        let dia = lam.get("dia").unwrap();
        let formal = Lifting {
            name: "dia2".into(),
            arity: 1,
            functor: FunctorSpec::Powerset,
            kind: LiftingKind::DualOf(Box::new(bx)),
            dual: None,
        };
        for n in 0..=3usize {
            let x = Carrier::numbered("x", n);
            for alpha in enumerate_tobjects(&FunctorSpec::Powerset, &x, 2).unwrap() {
                for z in x.subsets() {
                    assert_eq!(
                        lifting_member(dia, &alpha, &[z]).unwrap(),
                        lifting_member(&formal, &alpha, &[z]).unwrap()
                    );
                }
            }
        }
        // spec example: alpha = {a,b}, Z = {b} -> dia true
        let c = Carrier::new(["a", "b"]).unwrap();
        let alpha = TObject::powerset(&c, &["a", "b"]).unwrap();
        assert!(lifting_member(dia, &alpha, &[c.singleton("b").unwrap()]).unwrap());
    }

    #[test]
    fn builtins_monotone_and_natural() {
        for f in [
            FunctorSpec::Powerset,
            FunctorSpec::MonNbhd,
            FunctorSpec::MonNbhdStar,
            FunctorSpec::Bag,
        ] {
            let lam = Lambda::standard(&f);
            for l in lam.iter() {
                assert!(
                    is_monotone_lifting(l, 3).unwrap(),
                    "{} over {} is not monotone",
                    l.name,
                    f
                );
                let rep = check_naturality(l, 20_000).unwrap();
                assert!(
                    rep.violation.is_none(),
                    "{} over {}: {:?}",
                    l.name,
                    f,
                    rep.violation
                );
            }
        }
    }

    #[test]
    fn dual_involution() {
        for f in [FunctorSpec::Powerset, FunctorSpec::MonNbhd, FunctorSpec::MonNbhdStar] {
            let lam = Lambda::standard(&f);
            for l in lam.iter() {
                let dd = Lifting {
                    name: "dd".into(),
                    arity: l.arity,
                    functor: f.clone(),
                    kind: LiftingKind::DualOf(Box::new(Lifting {
                        name: "d".into(),
                        arity: l.arity,
                        functor: f.clone(),
                        kind: LiftingKind::DualOf(Box::new(l.clone())),
                        dual: None,
                    })),
                    dual: None,
                };
                for n in 0..=3usize {
                    let x = Carrier::numbered("x", n);
                    for alpha in enumerate_tobjects(&f, &x, 2).unwrap() {
                        for z in x.subsets() {
                            assert_eq!(
                                lifting_member(l, &alpha, &[z]).unwrap(),
                                lifting_member(&dd, &alpha, &[z]).unwrap()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn yoneda_dia_matches_builtin() {
        // table = { S <= 2^1 | atom s01 (i.e. {0}) in S } represents dia.
        let two = two_to_the(1);
        let with1: Vec<Value> = two
            .subsets()
            .into_iter()
            .filter(|&s| s & two.singleton("s01").unwrap() != 0)
            .map(Value::Set)
            .collect();
        let (lift, monotone) =
            yoneda_lifting(&FunctorSpec::Powerset, 1, with1, "ydia").unwrap();
        assert!(monotone);
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let dia = lam.get("dia").unwrap();
        for n in 0..=3usize {
            let x = Carrier::numbered("x", n);
            for alpha in enumerate_tobjects(&FunctorSpec::Powerset, &x, 2).unwrap() {
                for z in x.subsets() {
                    assert_eq!(
                        lifting_member(&lift, &alpha, &[z]).unwrap(),
                        lifting_member(dia, &alpha, &[z]).unwrap(),
                        "mismatch at |X|={n}, z={z:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn yoneda_empty_and_full_tables() {
        let (never, _) = yoneda_lifting(&FunctorSpec::Powerset, 1, vec![], "never").unwrap();
        let two = two_to_the(1);
        let all: Vec<Value> = two.subsets().into_iter().map(Value::Set).collect();
        let (always, _) = yoneda_lifting(&FunctorSpec::Powerset, 1, all, "always").unwrap();
        let x = Carrier::numbered("x", 2);
        for alpha in enumerate_tobjects(&FunctorSpec::Powerset, &x, 2).unwrap() {
            for z in x.subsets() {
                assert!(!lifting_member(&never, &alpha, &[z]).unwrap());
                assert!(lifting_member(&always, &alpha, &[z]).unwrap());
            }
        }
    }

    #[test]
    fn yoneda_rejects_bag() {
        assert!(yoneda_lifting(&FunctorSpec::Bag, 1, vec![], "t").is_err());
    }
}
