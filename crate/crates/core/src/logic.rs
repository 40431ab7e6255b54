use std::collections::BTreeSet;

use crate::carrier::Bits;
use crate::error::{Error, Result};
use crate::lifting::{lifting_member, Lambda};
use crate::model::TModel;
use crate::onestep::Env;

/// Coalgebraic mu-calculus formulas in negation normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MuFormula {
    Var(String),
    NegVar(String),
    Bot,
    Top,
    Lift(String, Vec<MuFormula>),
    Or(Box<MuFormula>, Box<MuFormula>),
    And(Box<MuFormula>, Box<MuFormula>),
    Mu(String, Box<MuFormula>),
    Nu(String, Box<MuFormula>),
}

/// Coalgebraic monadic second-order formulas, in the minimal grammar.
/// Conjunction, universal quantification and the Em/Sing/eq abbreviations are
/// expanded by the parser.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MsoFormula {
    Bot,
    Sr(String),
    Sub(String, String),
    /// lambda(p, q1..qn): at every point of p, sigma lies in the lifted set.
    Lift(String, String, Vec<String>),
    Or(Box<MsoFormula>, Box<MsoFormula>),
    Not(Box<MsoFormula>),
    Exists(String, Box<MsoFormula>),
}

impl MuFormula {
    pub fn mu(v: &str, f: MuFormula) -> MuFormula {
        MuFormula::Mu(v.into(), Box::new(f))
    }
    pub fn nu(v: &str, f: MuFormula) -> MuFormula {
        MuFormula::Nu(v.into(), Box::new(f))
    }
    pub fn or(a: MuFormula, b: MuFormula) -> MuFormula {
        MuFormula::Or(Box::new(a), Box::new(b))
    }
    pub fn and(a: MuFormula, b: MuFormula) -> MuFormula {
        MuFormula::And(Box::new(a), Box::new(b))
    }
    pub fn var(v: &str) -> MuFormula {
        MuFormula::Var(v.into())
    }
    pub fn lift1(name: &str, f: MuFormula) -> MuFormula {
        MuFormula::Lift(name.into(), vec![f])
    }

    /// Free variables (fixpoint binders remove theirs).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        self.free_rec(&mut bound, &mut out);
        out
    }

    fn free_rec(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            MuFormula::Var(v) | MuFormula::NegVar(v) => {
                if !bound.iter().any(|b| b == v) {
                    out.insert(v.clone());
                }
            }
            MuFormula::Bot | MuFormula::Top => {}
            MuFormula::Lift(_, args) => {
                for a in args {
                    a.free_rec(bound, out);
                }
            }
            MuFormula::Or(a, b) | MuFormula::And(a, b) => {
                a.free_rec(bound, out);
                b.free_rec(bound, out);
            }
            MuFormula::Mu(v, a) | MuFormula::Nu(v, a) => {
                bound.push(v.clone());
                a.free_rec(bound, out);
                bound.pop();
            }
        }
    }

    /// The NNF guard: in eta p. phi, no free occurrence of p is negated.
    /// Since negation only applies to atoms, this is a syntactic scan.
    pub fn check_positivity(&self) -> Result<()> {
        fn rec(f: &MuFormula, binders: &mut Vec<String>) -> Result<()> {
            match f {
                MuFormula::NegVar(v) => {
                    if binders.iter().any(|b| b == v) {
                        return Err(Error::Malformed(format!(
                            "fixpoint variable {v} occurs negated in its binder's scope"
                        )));
                    }
                    Ok(())
                }
                MuFormula::Var(_) | MuFormula::Bot | MuFormula::Top => Ok(()),
                MuFormula::Lift(_, args) => {
                    for a in args {
                        rec(a, binders)?;
                    }
                    Ok(())
                }
                MuFormula::Or(a, b) | MuFormula::And(a, b) => {
                    rec(a, binders)?;
                    rec(b, binders)
                }
                MuFormula::Mu(v, a) | MuFormula::Nu(v, a) => {
                    binders.push(v.clone());
                    let r = rec(a, binders);
                    binders.pop();
                    r
                }
            }
        }
        rec(self, &mut Vec::new())
    }

    /// Negation in negation normal form; lifting atoms go to their duals.
    pub fn negate_nnf(&self, lam: &Lambda) -> Result<MuFormula> {
        Ok(match self {
            MuFormula::Var(v) => MuFormula::NegVar(v.clone()),
            MuFormula::NegVar(v) => MuFormula::Var(v.clone()),
            MuFormula::Bot => MuFormula::Top,
            MuFormula::Top => MuFormula::Bot,
            MuFormula::Lift(name, args) => {
                let d = lam.dual_of(name)?;
                MuFormula::Lift(
                    d.name.clone(),
                    args.iter().map(|a| a.negate_nnf(lam)).collect::<Result<_>>()?,
                )
            }
            MuFormula::Or(a, b) => MuFormula::and(a.negate_nnf(lam)?, b.negate_nnf(lam)?),
            MuFormula::And(a, b) => MuFormula::or(a.negate_nnf(lam)?, b.negate_nnf(lam)?),
            MuFormula::Mu(v, a) => {
                MuFormula::Nu(v.clone(), Box::new(a.swap_polarity(v).negate_nnf(lam)?))
            }
            MuFormula::Nu(v, a) => {
                MuFormula::Mu(v.clone(), Box::new(a.swap_polarity(v).negate_nnf(lam)?))
            }
        })
    }

    /// Swap Var(x) and NegVar(x) for free occurrences of x.
    fn swap_polarity(&self, x: &str) -> MuFormula {
        match self {
            MuFormula::Var(v) if v == x => MuFormula::NegVar(v.clone()),
            MuFormula::NegVar(v) if v == x => MuFormula::Var(v.clone()),
            MuFormula::Var(_) | MuFormula::NegVar(_) | MuFormula::Bot | MuFormula::Top => {
                self.clone()
            }
            MuFormula::Lift(name, args) => MuFormula::Lift(
                name.clone(),
                args.iter().map(|a| a.swap_polarity(x)).collect(),
            ),
            MuFormula::Or(a, b) => MuFormula::or(a.swap_polarity(x), b.swap_polarity(x)),
            MuFormula::And(a, b) => MuFormula::and(a.swap_polarity(x), b.swap_polarity(x)),
            MuFormula::Mu(v, a) if v != x => {
                MuFormula::Mu(v.clone(), Box::new(a.swap_polarity(x)))
            }
            MuFormula::Nu(v, a) if v != x => {
                MuFormula::Nu(v.clone(), Box::new(a.swap_polarity(x)))
            }
            shadowed => shadowed.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// mu-calculus semantics: Knaster-Tarski iteration
// ---------------------------------------------------------------------------

/// Truth set of a mu-calculus formula in a finite model. Fixpoints are
/// computed by naive iteration from bottom (mu) or top (nu); each converges
/// within |S|+1 rounds.
pub fn mu_truth_set(f: &MuFormula, model: &TModel, lam: &Lambda) -> Result<Bits> {
    f.check_positivity()?;
    let mut env = Env::default();
    truth_rec(f, model, lam, &mut env)
}

/// Point evaluation.
pub fn eval_mu(f: &MuFormula, model: &TModel, s: usize, lam: &Lambda) -> Result<bool> {
    Ok(mu_truth_set(f, model, lam)? & (1 << s) != 0)
}

fn truth_rec(f: &MuFormula, model: &TModel, lam: &Lambda, env: &mut Env) -> Result<Bits> {
    let full = model.carrier.full();
    Ok(match f {
        MuFormula::Var(v) => env.lookup(v).or_else(|_| model.var(v))?,
        MuFormula::NegVar(v) => full & !(env.lookup(v).or_else(|_| model.var(v))?),
        MuFormula::Bot => 0,
        MuFormula::Top => full,
        MuFormula::Lift(name, args) => {
            let l = lam.get(name)?;
            let arg_sets: Vec<Bits> = args
                .iter()
                .map(|a| truth_rec(a, model, lam, env))
                .collect::<Result<_>>()?;
            let mut out = 0;
            for s in 0..model.carrier.len() {
                if lifting_member(l, &model.sigma[s], &arg_sets)? {
                    out |= 1 << s;
                }
            }
            out
        }
        MuFormula::Or(a, b) => truth_rec(a, model, lam, env)? | truth_rec(b, model, lam, env)?,
        MuFormula::And(a, b) => truth_rec(a, model, lam, env)? & truth_rec(b, model, lam, env)?,
        MuFormula::Mu(v, a) => fixpoint(v, a, model, lam, env, 0)?,
        MuFormula::Nu(v, a) => fixpoint(v, a, model, lam, env, full)?,
    })
}

/// Knaster-Tarski iteration from the given start; a monotone operator
/// converges within |S|+1 rounds, so exceeding that bound means the operator
/// was not monotone (a broken custom lifting, say) and is reported.
fn fixpoint(
    v: &str,
    body: &MuFormula,
    model: &TModel,
    lam: &Lambda,
    env: &mut Env,
    start: Bits,
) -> Result<Bits> {
    let mut cur = start;
    for _ in 0..=model.carrier.len() + 1 {
        env.push(v, cur);
        let next = truth_rec(body, model, lam, env)?;
        env.pop();
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
    Err(Error::Malformed(format!(
        "fixpoint iteration for {v} did not converge; the unfolding operator is not monotone"
    )))
}

// ---------------------------------------------------------------------------
// MSO semantics: quantifier enumeration
// ---------------------------------------------------------------------------

/// Truth of an MSO formula at a point, by enumerating all subset witnesses
/// for each quantifier. The lifting clause evaluates sigma against the global
/// carrier, exactly as the logic prescribes.
pub fn eval_mso(
    f: &MsoFormula,
    model: &TModel,
    point: usize,
    lam: &Lambda,
    quant_cap: usize,
) -> Result<bool> {
    if model.carrier.len() > quant_cap {
        return Err(Error::Cap(format!(
            "eval_mso: carrier of size {} exceeds quantifier cap {quant_cap}",
            model.carrier.len()
        )));
    }
    let mut env = Env::default();
    eval_mso_rec(f, model, point, lam, &mut env)
}

fn eval_mso_rec(
    f: &MsoFormula,
    model: &TModel,
    point: usize,
    lam: &Lambda,
    env: &mut Env,
) -> Result<bool> {
    let lookup = |v: &str, env: &Env| env.lookup(v).or_else(|_| model.var(v));
    Ok(match f {
        MsoFormula::Bot => false,
        MsoFormula::Sr(p) => lookup(p, env)? == 1 << point,
        MsoFormula::Sub(p, q) => lookup(p, env)? & !lookup(q, env)? == 0,
        MsoFormula::Lift(name, p, qs) => {
            let l = lam.get(name)?;
            let args: Vec<Bits> = qs
                .iter()
                .map(|q| lookup(q, env))
                .collect::<Result<_>>()?;
            let pm = lookup(p, env)?;
            let mut ok = true;
            for v in 0..model.carrier.len() {
                if pm & (1 << v) != 0 && !lifting_member(l, &model.sigma[v], &args)? {
                    ok = false;
                    break;
                }
            }
            ok
        }
        MsoFormula::Or(a, b) => {
            eval_mso_rec(a, model, point, lam, env)? || eval_mso_rec(b, model, point, lam, env)?
        }
        MsoFormula::Not(a) => !eval_mso_rec(a, model, point, lam, env)?,
        MsoFormula::Exists(v, a) => {
            let n = model.carrier.len();
            let mut found = false;
            for s in 0..(1u128 << n) {
                env.push(v, s);
                let ok = eval_mso_rec(a, model, point, lam, env)?;
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

// ---------------------------------------------------------------------------
// Derived MSO forms
// ---------------------------------------------------------------------------

pub fn mso_not(a: MsoFormula) -> MsoFormula {
    MsoFormula::Not(Box::new(a))
}

pub fn mso_or(a: MsoFormula, b: MsoFormula) -> MsoFormula {
    MsoFormula::Or(Box::new(a), Box::new(b))
}

pub fn mso_and(a: MsoFormula, b: MsoFormula) -> MsoFormula {
    mso_not(mso_or(mso_not(a), mso_not(b)))
}

pub fn mso_implies(a: MsoFormula, b: MsoFormula) -> MsoFormula {
    mso_or(mso_not(a), b)
}

pub fn mso_forall(v: &str, a: MsoFormula) -> MsoFormula {
    mso_not(MsoFormula::Exists(v.into(), Box::new(mso_not(a))))
}

pub fn mso_top() -> MsoFormula {
    mso_not(MsoFormula::Bot)
}

pub fn mso_sub(p: &str, q: &str) -> MsoFormula {
    MsoFormula::Sub(p.into(), q.into())
}

/// p = q.
pub fn mso_eq(p: &str, q: &str) -> MsoFormula {
    mso_and(mso_sub(p, q), mso_sub(q, p))
}

/// Em(p): p denotes the empty set, rendered as "p is below every set"
/// (equivalent to the subset-antisymmetry form, and much smaller both to
/// evaluate and to compile).
pub fn mso_em(p: &str) -> MsoFormula {
    let q = fresh_for(p);
    mso_forall(&q, mso_sub(p, &q))
}

/// Sing(p): p denotes a singleton.
pub fn mso_sing(p: &str) -> MsoFormula {
    let q = fresh_for(p);
    mso_and(
        mso_not(mso_em(p)),
        mso_forall(
            &q,
            mso_implies(mso_sub(&q, p), mso_or(mso_em(&q), mso_eq(&q, p))),
        ),
    )
}

fn fresh_for(p: &str) -> String {
    format!("_q_{p}")
}

// ---------------------------------------------------------------------------
// mu -> MSO translation
// ---------------------------------------------------------------------------

/// The inductive point-relativized translation: the current point is carried
/// by a fresh second-order variable constrained to be a singleton via sr.
pub fn mu_to_mso(f: &MuFormula) -> MsoFormula {
    let mut fresh = 0usize;
    let x = "_x".to_string();
    let body = tr(f, &x, &mut fresh);
    MsoFormula::Exists(
        x.clone(),
        Box::new(mso_and(MsoFormula::Sr(x.clone()), body)),
    )
}

fn tr(f: &MuFormula, x: &str, fresh: &mut usize) -> MsoFormula {
    match f {
        MuFormula::Var(p) => mso_sub(x, p),
        MuFormula::NegVar(p) => mso_not(mso_sub(x, p)),
        MuFormula::Bot => MsoFormula::Bot,
        MuFormula::Top => mso_top(),
        MuFormula::Or(a, b) => mso_or(tr(a, x, fresh), tr(b, x, fresh)),
        MuFormula::And(a, b) => mso_and(tr(a, x, fresh), tr(b, x, fresh)),
        MuFormula::Lift(name, args) => {
            // exists q1..qn: each qi pinned to the truth set of the i-th
            // argument via singleton-relativized quantification.
            let qs: Vec<String> = (0..args.len())
                .map(|_| {
                    let q = format!("_q{}", *fresh);
                    *fresh += 1;
                    q
                })
                .collect();
            let mut body = MsoFormula::Lift(name.clone(), x.into(), qs.clone());
            for (q, arg) in qs.iter().zip(args).rev() {
                let pin = pin_truth_set(q, arg, fresh);
                body = MsoFormula::Exists(q.clone(), Box::new(mso_and(pin, body)));
            }
            body
        }
        MuFormula::Mu(p, a) => {
            // forall p. ("truth set of a" inside p -> x inside p)
            let y = format!("_y{}", *fresh);
            *fresh += 1;
            let pre = mso_forall(
                &y,
                mso_implies(
                    mso_and(mso_sing(&y), tr(a, &y, fresh)),
                    mso_sub(&y, p),
                ),
            );
            mso_forall(p, mso_implies(pre, mso_sub(x, p)))
        }
        MuFormula::Nu(p, a) => {
            // exists p. (x inside p and p is a post-fixpoint)
            let y = format!("_y{}", *fresh);
            *fresh += 1;
            let post = mso_forall(
                &y,
                mso_implies(
                    mso_and(mso_sing(&y), mso_sub(&y, p)),
                    tr(a, &y, fresh),
                ),
            );
            MsoFormula::Exists(p.into(), Box::new(mso_and(mso_sub(x, p), post)))
        }
    }
}

/// q is pinned to the truth set of `arg`: for every singleton y,
/// y inside q iff arg holds at y.
fn pin_truth_set(q: &str, arg: &MuFormula, fresh: &mut usize) -> MsoFormula {
    let y = format!("_y{}", *fresh);
    *fresh += 1;
    let at_y = tr(arg, &y, fresh);
    mso_forall(
        &y,
        mso_implies(
            mso_sing(&y),
            mso_and(
                mso_implies(mso_sub(&y, q), at_y.clone()),
                mso_implies(at_y, mso_sub(&y, q)),
            ),
        ),
    )
}

// ---------------------------------------------------------------------------
// Parsing and printing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Mu,
    Mso,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Mu(MuFormula),
    Mso(MsoFormula),
}

pub fn parse_formula(text: &str, flavor: Flavor) -> Result<Formula> {
    match flavor {
        Flavor::Mu => Ok(Formula::Mu(parse_mu(text)?)),
        Flavor::Mso => Ok(Formula::Mso(parse_mso(text)?)),
    }
}

struct P<'a> {
    toks: Vec<(String, usize, usize)>,
    pos: usize,
    text: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<(String, usize, usize)>> {
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut it = text.chars().peekable();
    while let Some(&c) = it.peek() {
        let (l0, c0) = (line, col);
        if c == '\n' {
            it.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            it.next();
            col += 1;
        } else if "().,".contains(c) {
            it.next();
            col += 1;
            toks.push((c.to_string(), l0, c0));
        } else if c.is_alphanumeric() || c == '_' {
            let mut s = String::new();
            while let Some(&c2) = it.peek() {
                if c2.is_alphanumeric() || c2 == '_' {
                    s.push(c2);
                    it.next();
                    col += 1;
                } else {
                    break;
                }
            }
            toks.push((s, l0, c0));
        } else {
            return Err(Error::Syntax {
                line: l0,
                col: c0,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(toks)
}

impl<'a> P<'a> {
    fn new(text: &'a str) -> Result<P<'a>> {
        Ok(P {
            toks: tokenize(text)?,
            pos: 0,
            text,
        })
    }
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|(s, _, _)| s.as_str())
    }
    fn bump(&mut self) -> Option<String> {
        let t = self.toks.get(self.pos).map(|(s, _, _)| s.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }
    fn err(&self, msg: &str) -> Error {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((1, self.text.len().max(1)));
        Error::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
    fn expect(&mut self, t: &str) -> Result<()> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected {t:?}")))
        }
    }
    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(s)
                if !s.is_empty()
                    && (s.chars().next().unwrap().is_alphabetic()
                        || s.starts_with('_'))
                    && !MU_KEYWORDS.contains(&s) =>
            {
                Ok(self.bump().unwrap())
            }
            _ => Err(self.err("expected an identifier")),
        }
    }
}

const MU_KEYWORDS: &[&str] = &[
    "mu", "nu", "lift", "and", "or", "not", "bot", "top", "exists", "forall", "sub", "sr", "em",
    "sing", "eq",
];

pub fn parse_mu(text: &str) -> Result<MuFormula> {
    let mut p = P::new(text)?;
    let f = mu_or(&mut p)?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    f.check_positivity()?;
    Ok(f)
}

fn mu_or(p: &mut P) -> Result<MuFormula> {
    let mut left = mu_and(p)?;
    while p.peek() == Some("or") {
        p.bump();
        let right = mu_and(p)?;
        left = MuFormula::or(left, right);
    }
    Ok(left)
}

fn mu_and(p: &mut P) -> Result<MuFormula> {
    let mut left = mu_atom(p)?;
    while p.peek() == Some("and") {
        p.bump();
        let right = mu_atom(p)?;
        left = MuFormula::and(left, right);
    }
    Ok(left)
}

fn mu_atom(p: &mut P) -> Result<MuFormula> {
    match p.peek() {
        Some("bot") => {
            p.bump();
            Ok(MuFormula::Bot)
        }
        Some("top") => {
            p.bump();
            Ok(MuFormula::Top)
        }
        Some("not") => {
            p.bump();
            let v = p.ident().map_err(|_| p.err("negation applies to variables only"))?;
            Ok(MuFormula::NegVar(v))
        }
        Some("mu") | Some("nu") => {
            let kw = p.bump().unwrap();
            let v = p.ident()?;
            p.expect(".")?;
            let body = mu_or(p)?;
            Ok(if kw == "mu" {
                MuFormula::Mu(v, Box::new(body))
            } else {
                MuFormula::Nu(v, Box::new(body))
            })
        }
        Some("lift") => {
            p.bump();
            let name = match p.bump() {
                Some(s) => s,
                None => return Err(p.err("expected lifting name")),
            };
            p.expect("(")?;
            let mut args = Vec::new();
            if p.peek() != Some(")") {
                loop {
                    args.push(mu_or(p)?);
                    if p.peek() == Some(",") {
                        p.bump();
                    } else {
                        break;
                    }
                }
            }
            p.expect(")")?;
            Ok(MuFormula::Lift(name, args))
        }
        Some("(") => {
            p.bump();
            let f = mu_or(p)?;
            p.expect(")")?;
            Ok(f)
        }
        Some(_) => Ok(MuFormula::Var(p.ident()?)),
        None => Err(p.err("expected a formula")),
    }
}

pub fn parse_mso(text: &str) -> Result<MsoFormula> {
    let mut p = P::new(text)?;
    let f = mso_or_p(&mut p)?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

fn mso_or_p(p: &mut P) -> Result<MsoFormula> {
    let mut left = mso_and_p(p)?;
    while p.peek() == Some("or") {
        p.bump();
        let right = mso_and_p(p)?;
        left = mso_or(left, right);
    }
    Ok(left)
}

fn mso_and_p(p: &mut P) -> Result<MsoFormula> {
    let mut left = mso_atom(p)?;
    while p.peek() == Some("and") {
        p.bump();
        let right = mso_atom(p)?;
        left = mso_and(left, right);
    }
    Ok(left)
}

fn mso_atom(p: &mut P) -> Result<MsoFormula> {
    match p.peek() {
        Some("bot") => {
            p.bump();
            Ok(MsoFormula::Bot)
        }
        Some("top") => {
            p.bump();
            Ok(mso_top())
        }
        Some("not") => {
            p.bump();
            Ok(mso_not(mso_atom(p)?))
        }
        Some("exists") | Some("forall") => {
            let kw = p.bump().unwrap();
            let v = p.ident()?;
            p.expect(".")?;
            let body = mso_or_p(p)?;
            Ok(if kw == "exists" {
                MsoFormula::Exists(v, Box::new(body))
            } else {
                mso_forall(&v, body)
            })
        }
        Some("sr") => {
            p.bump();
            p.expect("(")?;
            let v = p.ident()?;
            p.expect(")")?;
            Ok(MsoFormula::Sr(v))
        }
        Some("em") => {
            p.bump();
            p.expect("(")?;
            let v = p.ident()?;
            p.expect(")")?;
            Ok(mso_em(&v))
        }
        Some("sing") => {
            p.bump();
            p.expect("(")?;
            let v = p.ident()?;
            p.expect(")")?;
            Ok(mso_sing(&v))
        }
        Some("eq") => {
            p.bump();
            p.expect("(")?;
            let a = p.ident()?;
            p.expect(",")?;
            let b = p.ident()?;
            p.expect(")")?;
            Ok(mso_eq(&a, &b))
        }
        Some("lift") => {
            p.bump();
            let name = match p.bump() {
                Some(s) => s,
                None => return Err(p.err("expected lifting name")),
            };
            p.expect("(")?;
            let mut vars = vec![p.ident()?];
            while p.peek() == Some(",") {
                p.bump();
                vars.push(p.ident()?);
            }
            p.expect(")")?;
            let head = vars.remove(0);
            Ok(MsoFormula::Lift(name, head, vars))
        }
        Some("(") => {
            p.bump();
            let f = mso_or_p(p)?;
            p.expect(")")?;
            Ok(f)
        }
        Some(_) => {
            let a = p.ident()?;
            p.expect("sub")?;
            let b = p.ident()?;
            Ok(MsoFormula::Sub(a, b))
        }
        None => Err(p.err("expected a formula")),
    }
}

pub fn mu_to_text(f: &MuFormula) -> String {
    match f {
        MuFormula::Var(v) => v.clone(),
        MuFormula::NegVar(v) => format!("not {v}"),
        MuFormula::Bot => "bot".into(),
        MuFormula::Top => "top".into(),
        MuFormula::Lift(name, args) => format!(
            "lift {name}({})",
            args.iter().map(mu_to_text).collect::<Vec<_>>().join(", ")
        ),
        MuFormula::Or(a, b) => format!("({} or {})", mu_to_text(a), mu_to_text(b)),
        MuFormula::And(a, b) => format!("({} and {})", mu_to_text(a), mu_to_text(b)),
        MuFormula::Mu(v, a) => format!("mu {v} . ({})", mu_to_text(a)),
        MuFormula::Nu(v, a) => format!("nu {v} . ({})", mu_to_text(a)),
    }
}

pub fn mso_to_text(f: &MsoFormula) -> String {
    match f {
        MsoFormula::Bot => "bot".into(),
        MsoFormula::Sr(p) => format!("sr({p})"),
        MsoFormula::Sub(p, q) => format!("{p} sub {q}"),
        MsoFormula::Lift(name, p, qs) => {
            let mut all = vec![p.clone()];
            all.extend(qs.iter().cloned());
            format!("lift {name}({})", all.join(", "))
        }
        MsoFormula::Or(a, b) => format!("({} or {})", mso_to_text(a), mso_to_text(b)),
        MsoFormula::Not(a) => format!("not ({})", mso_to_text(a)),
        MsoFormula::Exists(v, a) => format!("exists {v} . ({})", mso_to_text(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::Carrier;
    use crate::functor::{FunctorSpec, TObject};
    use std::collections::BTreeMap;

    fn kripke(atoms: &[&str], edges: &[(&str, &[&str])], vals: &[(&str, &[&str])]) -> TModel {
        let c = Carrier::new(atoms.iter().copied()).unwrap();
        let mut sigma = vec![TObject::powerset(&c, &[]).unwrap(); c.len()];
        for (s, ts) in edges {
            sigma[c.index_of(s).unwrap()] = TObject::powerset(&c, ts).unwrap();
        }
        let valuation: BTreeMap<String, Bits> = vals
            .iter()
            .map(|(v, set)| (v.to_string(), c.mask_of(set.iter().copied()).unwrap()))
            .collect();
        TModel::new(FunctorSpec::Powerset, c, sigma, valuation).unwrap()
    }

    #[test]
    fn nu_box_on_reflexive_point() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let m = kripke(&["s"], &[("s", &["s"])], &[]);
        let f = parse_mu("nu p . lift box(p)").unwrap();
        assert!(eval_mu(&f, &m, 0, &lam).unwrap());
        let g = parse_mu("mu p . lift box(p)").unwrap();
        // on a reflexive point the least fixpoint of box is empty
        assert!(!eval_mu(&g, &m, 0, &lam).unwrap());
    }

    #[test]
    fn mu_reachability_on_path() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        // three-point path with q at the end
        let m = kripke(
            &["s0", "s1", "s2"],
            &[("s0", &["s1"]), ("s1", &["s2"])],
            &[("q", &["s2"])],
        );
        let f = parse_mu("mu p . (q or lift dia(p))").unwrap();
        assert!(eval_mu(&f, &m, 0, &lam).unwrap());
        let sets = mu_truth_set(&f, &m, &lam).unwrap();
        assert_eq!(sets, m.carrier.full());
    }

    #[test]
    fn positivity_guard() {
        assert!(parse_mu("mu p . not p").is_err());
        assert!(parse_mu("mu p . (q or lift dia(p))").is_ok());
    }

    #[test]
    fn mso_atoms() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let m = kripke(&["u", "v"], &[("u", &["v"])], &[("p", &["u"]), ("q", &["u", "v"])]);
        let sr = parse_mso("sr(p)").unwrap();
        assert!(eval_mso(&sr, &m, 0, &lam, 8).unwrap());
        assert!(!eval_mso(&sr, &m, 1, &lam, 8).unwrap());
        let sub = parse_mso("p sub q").unwrap();
        assert!(eval_mso(&sub, &m, 0, &lam, 8).unwrap());
        let sub2 = parse_mso("q sub p").unwrap();
        assert!(!eval_mso(&sub2, &m, 0, &lam, 8).unwrap());
    }

    #[test]
    fn mso_exists_singleton_with_dia() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        // root sees a q-point
        let m = kripke(&["u", "v"], &[("u", &["v"])], &[("q", &["v"])]);
        let f = parse_mso("exists p . (sr(p) and lift dia(p, q))").unwrap();
        assert!(eval_mso(&f, &m, 0, &lam, 8).unwrap());
        let m2 = kripke(&["u", "v"], &[("u", &["v"])], &[("q", &[])]);
        assert!(!eval_mso(&f, &m2, 0, &lam, 8).unwrap());
    }

    #[test]
    fn sing_em_abbreviations() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let m = kripke(&["u", "v"], &[], &[("p", &["u"]), ("z", &[]), ("w", &["u", "v"])]);
        assert!(eval_mso(&parse_mso("sing(p)").unwrap(), &m, 0, &lam, 8).unwrap());
        assert!(!eval_mso(&parse_mso("sing(z)").unwrap(), &m, 0, &lam, 8).unwrap());
        assert!(!eval_mso(&parse_mso("sing(w)").unwrap(), &m, 0, &lam, 8).unwrap());
        assert!(eval_mso(&parse_mso("em(z)").unwrap(), &m, 0, &lam, 8).unwrap());
        assert!(!eval_mso(&parse_mso("em(p)").unwrap(), &m, 0, &lam, 8).unwrap());
    }

    #[test]
    fn mu_nu_duality_on_samples() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let fs = [
            parse_mu("mu p . (q or lift dia(p))").unwrap(),
            parse_mu("nu p . (q and lift box(p))").unwrap(),
            parse_mu("mu p . lift box(p)").unwrap(),
        ];
        let models = [
            kripke(&["s"], &[("s", &["s"])], &[("q", &["s"])]),
            kripke(&["s0", "s1"], &[("s0", &["s1"]), ("s1", &["s0"])], &[("q", &["s1"])]),
            kripke(&["s0", "s1", "s2"], &[("s0", &["s1", "s2"])], &[("q", &["s2"])]),
        ];
        for f in &fs {
            let neg = f.negate_nnf(&lam).unwrap();
            for m in &models {
                let t = mu_truth_set(f, m, &lam).unwrap();
                let nt = mu_truth_set(&neg, m, &lam).unwrap();
                assert_eq!(t, m.carrier.full() & !nt, "duality failed for {f:?}");
            }
        }
    }

    #[test]
    fn mu_operator_monotone_on_samples() {
        // the Knaster-Tarski precondition, spot-checked: the unfolding
        // operator of each fixpoint subformula is monotone on sampled models
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let m = kripke(
            &["s0", "s1", "s2"],
            &[("s0", &["s1", "s2"]), ("s1", &["s0"])],
            &[("q", &["s2"])],
        );
        let body = parse_mu("q or lift dia(p)").unwrap();
        let subsets = m.carrier.subsets();
        for &a in &subsets {
            for &b in &subsets {
                if a & !b == 0 {
                    let fa = mu_truth_set(&body, &m.with_valuation("p", a), &lam).unwrap();
                    let fb = mu_truth_set(&body, &m.with_valuation("p", b), &lam).unwrap();
                    assert_eq!(fa & !fb, 0, "operator not monotone at {a:b} <= {b:b}");
                }
            }
        }
    }

    #[test]
    fn mu_to_mso_bottom_fixpoint() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let f = parse_mu("mu p . p").unwrap();
        let t = mu_to_mso(&f);
        for m in [
            kripke(&["s"], &[("s", &["s"])], &[]),
            kripke(&["s0", "s1"], &[("s0", &["s1"])], &[]),
        ] {
            for s in 0..m.carrier.len() {
                assert!(!eval_mso(&t, &m, s, &lam, 8).unwrap());
                assert!(!eval_mu(&f, &m, s, &lam).unwrap());
            }
        }
    }

    #[test]
    fn mu_to_mso_agreement_corpus() {
        let lam = Lambda::standard(&FunctorSpec::Powerset);
        let corpus = [
            parse_mu("q").unwrap(),
            parse_mu("lift dia(q)").unwrap(),
            parse_mu("lift box(q)").unwrap(),
            parse_mu("mu p . (q or lift dia(p))").unwrap(),
            parse_mu("nu p . lift box(p)").unwrap(),
        ];
        // all Kripke models over 2 states, one letter
        let c = ["s0", "s1"];
        for e0 in 0..4u32 {
            for e1 in 0..4u32 {
                for q in 0..4u32 {
                    let edges = |bits: u32| -> Vec<&'static str> {
                        let mut v = Vec::new();
                        if bits & 1 != 0 {
                            v.push("s0");
                        }
                        if bits & 2 != 0 {
                            v.push("s1");
                        }
                        v
                    };
                    let e0v = edges(e0);
                    let e1v = edges(e1);
                    let qv = edges(q);
                    let m = kripke(&c, &[("s0", &e0v), ("s1", &e1v)], &[("q", &qv)]);
                    for f in &corpus {
                        let t = mu_to_mso(f);
                        for s in 0..2 {
                            assert_eq!(
                                eval_mu(f, &m, s, &lam).unwrap(),
                                eval_mso(&t, &m, s, &lam, 8).unwrap(),
                                "formula {f:?} at {s}, e0={e0:02b} e1={e1:02b} q={q:02b}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parser_round_trips() {
        for t in [
            "mu p . lift dia(p)",
            "nu p . (q and lift box(p))",
            "(q or not q)",
        ] {
            let f = parse_mu(t).unwrap();
            assert_eq!(f, parse_mu(&mu_to_text(&f)).unwrap());
        }
        for t in [
            "exists p . sr(p)",
            "p sub q",
            "not (exists p . (sr(p) and lift dia(p, q)))",
            "sing(p)",
        ] {
            let f = parse_mso(t).unwrap();
            assert_eq!(f, parse_mso(&mso_to_text(&f)).unwrap());
        }
    }
}
