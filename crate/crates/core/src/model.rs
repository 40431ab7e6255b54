use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::carrier::{bits_iter, Bits, Carrier, CarrierMap};
use crate::error::{Error, Result};
use crate::functor::{self, FunctorSpec, TObject, Value};

/// A T-model: finite carrier, structure map sigma : S -> T S, and a valuation
/// of variables as subsets of S.
#[derive(Clone, Debug, PartialEq)]
pub struct TModel {
    pub functor: FunctorSpec,
    pub carrier: Carrier,
    /// sigma indexed by carrier atom order.
    pub sigma: Vec<TObject>,
    pub valuation: BTreeMap<String, Bits>,
}

impl TModel {
    pub fn new(
        functor: FunctorSpec,
        carrier: Carrier,
        sigma: Vec<TObject>,
        valuation: BTreeMap<String, Bits>,
    ) -> Result<TModel> {
        if sigma.len() != carrier.len() {
            return Err(Error::Malformed(format!(
                "sigma has {} entries for a carrier of size {}",
                sigma.len(),
                carrier.len()
            )));
        }
        for t in &sigma {
            if t.carrier != carrier || t.functor != functor {
                return Err(Error::CarrierMismatch(
                    "structure value not over the model carrier/functor".into(),
                ));
            }
        }
        for (v, m) in &valuation {
            if m & !carrier.full() != 0 {
                return Err(Error::Malformed(format!("valuation of {v} exceeds carrier")));
            }
        }
        Ok(TModel {
            functor,
            carrier,
            sigma,
            valuation,
        })
    }

    pub fn var(&self, name: &str) -> Result<Bits> {
        self.valuation
            .get(name)
            .copied()
            .ok_or_else(|| Error::Unbound(name.into()))
    }

    /// Variable set true at `s` restricted to the given universe of names:
    /// the conjugate coloring.
    pub fn color_at(&self, s: usize, universe: &[String]) -> Vec<String> {
        universe
            .iter()
            .filter(|p| {
                self.valuation
                    .get(*p)
                    .map(|m| m & (1 << s) != 0)
                    .unwrap_or(false)
            })
            .cloned()
            .collect()
    }

    pub fn with_valuation(&self, var: &str, mask: Bits) -> TModel {
        let mut m = self.clone();
        m.valuation.insert(var.into(), mask);
        m
    }
}

/// A T-model with a supporting Kripke frame forming a tree from the root.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    pub model: TModel,
    /// Children masks, indexed like the carrier.
    pub frame: Vec<Bits>,
    pub root: usize,
}

impl TreeModel {
    /// Validates the supporting-frame condition at every node, and tree-ness
    /// (unique path from the root to every node).
    pub fn new(model: TModel, frame: Vec<Bits>, root: usize) -> Result<TreeModel> {
        let t = TreeModel { model, frame, root };
        t.check_frame_supports()?;
        t.check_tree()?;
        Ok(t)
    }

    /// Builds a tree model when only supports matter (tree-ness unchecked):
    /// the acceptance game needs supports, not rootedness.
    pub fn with_frame_unchecked(model: TModel, frame: Vec<Bits>, root: usize) -> Result<TreeModel> {
        let t = TreeModel { model, frame, root };
        t.check_frame_supports()?;
        Ok(t)
    }

    pub fn check_frame_supports(&self) -> Result<()> {
        if self.frame.len() != self.model.carrier.len() {
            return Err(Error::Malformed("frame length differs from carrier".into()));
        }
        for (s, &succ) in self.frame.iter().enumerate() {
            functor::restrict_to_support(&self.model.sigma[s], succ).map_err(|_| {
                Error::NotASupport(format!(
                    "R({}) does not support sigma at that node",
                    self.model.carrier.atom(s)
                ))
            })?;
        }
        Ok(())
    }

    pub fn check_tree(&self) -> Result<()> {
        let n = self.model.carrier.len();
        let mut indeg = vec![0usize; n];
        for &succ in &self.frame {
            for c in bits_iter(succ) {
                indeg[c] += 1;
            }
        }
        if indeg[self.root] != 0 {
            return Err(Error::Malformed("root has an incoming edge".into()));
        }
        for (i, &d) in indeg.iter().enumerate() {
            if i != self.root && d != 1 {
                return Err(Error::Malformed(format!(
                    "node {} has in-degree {d}, not a tree",
                    self.model.carrier.atom(i)
                )));
            }
        }
        // reachability from the root
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(s) = stack.pop() {
            for c in bits_iter(self.frame[s]) {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        if seen.iter().any(|&b| !b) {
            return Err(Error::Malformed("not all nodes reachable from root".into()));
        }
        Ok(())
    }

    /// The local one-step window at `s`: carrier R(s), sigma restricted.
    pub fn local_window(&self, s: usize) -> Result<(Carrier, TObject, CarrierMap)> {
        let (sub, inj) = self.model.carrier.restrict(self.frame[s]);
        let alpha = functor::restrict_to_support(&self.model.sigma[s], self.frame[s])?;
        Ok((sub, alpha, inj))
    }
}

/// A one-step model (X, alpha, V).
#[derive(Clone, Debug, PartialEq)]
pub struct OneStepModel {
    pub carrier: Carrier,
    pub alpha: TObject,
    pub valuation: BTreeMap<String, Bits>,
}

impl OneStepModel {
    pub fn new(alpha: TObject, valuation: BTreeMap<String, Bits>) -> Result<OneStepModel> {
        for (v, m) in &valuation {
            if m & !alpha.carrier.full() != 0 {
                return Err(Error::Malformed(format!("valuation of {v} exceeds carrier")));
            }
        }
        Ok(OneStepModel {
            carrier: alpha.carrier.clone(),
            alpha,
            valuation,
        })
    }

    pub fn var(&self, name: &str) -> Result<Bits> {
        self.valuation
            .get(name)
            .copied()
            .ok_or_else(|| Error::Unbound(name.into()))
    }

    pub fn with_var(&self, name: &str, mask: Bits) -> OneStepModel {
        let mut m = self.clone();
        m.valuation.insert(name.into(), mask);
        m
    }
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    functor: Json,
    carrier: Vec<String>,
    sigma: BTreeMap<String, Json>,
    #[serde(default)]
    valuation: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    root: Option<String>,
    #[serde(default)]
    frame: Option<BTreeMap<String, Vec<String>>>,
}

pub fn functor_from_json(j: &Json) -> Result<FunctorSpec> {
    let err = |m: &str| Error::Malformed(format!("functor spec: {m}"));
    match j {
        Json::String(s) => match s.as_str() {
            "powerset" => Ok(FunctorSpec::Powerset),
            "bag" => Ok(FunctorSpec::Bag),
            "monnbhd" => Ok(FunctorSpec::MonNbhd),
            "monnbhdstar" => Ok(FunctorSpec::MonNbhdStar),
            "id" => Ok(FunctorSpec::Id),
            other => Err(err(&format!("unknown functor name {other}"))),
        },
        Json::Object(map) => {
            if let Some(c) = map.get("const") {
                let atoms: Vec<String> =
                    serde_json::from_value(c.clone()).map_err(|_| err("const expects a string list"))?;
                Ok(FunctorSpec::Const(atoms))
            } else if let Some(p) = map.get("product") {
                let parts: Vec<Json> =
                    serde_json::from_value(p.clone()).map_err(|_| err("product expects a pair"))?;
                if parts.len() != 2 {
                    return Err(err("product expects exactly two components"));
                }
                Ok(FunctorSpec::product(
                    functor_from_json(&parts[0])?,
                    functor_from_json(&parts[1])?,
                ))
            } else if let Some(p) = map.get("coproduct") {
                let parts: Vec<Json> =
                    serde_json::from_value(p.clone()).map_err(|_| err("coproduct expects a list"))?;
                Ok(FunctorSpec::Coproduct(
                    parts.iter().map(functor_from_json).collect::<Result<_>>()?,
                ))
            } else if let Some(e) = map.get("exp") {
                let base = e.get("base").ok_or_else(|| err("exp needs base"))?;
                let expo: Vec<String> = serde_json::from_value(
                    e.get("exponent").ok_or_else(|| err("exp needs exponent"))?.clone(),
                )
                .map_err(|_| err("exponent must be a string list"))?;
                Ok(FunctorSpec::Exp(Box::new(functor_from_json(base)?), expo))
            } else {
                Err(err("unrecognized functor object"))
            }
        }
        _ => Err(err("expected string or object")),
    }
}

pub fn functor_to_json(f: &FunctorSpec) -> Json {
    match f {
        FunctorSpec::Powerset => Json::String("powerset".into()),
        FunctorSpec::Bag => Json::String("bag".into()),
        FunctorSpec::MonNbhd => Json::String("monnbhd".into()),
        FunctorSpec::MonNbhdStar => Json::String("monnbhdstar".into()),
        FunctorSpec::Id => Json::String("id".into()),
        FunctorSpec::Const(c) => serde_json::json!({ "const": c }),
        FunctorSpec::Product(a, b) => {
            serde_json::json!({ "product": [functor_to_json(a), functor_to_json(b)] })
        }
        FunctorSpec::Coproduct(ts) => {
            serde_json::json!({ "coproduct": ts.iter().map(functor_to_json).collect::<Vec<_>>() })
        }
        FunctorSpec::Exp(t, c) => {
            serde_json::json!({ "exp": { "base": functor_to_json(t), "exponent": c } })
        }
    }
}

pub fn value_from_json(f: &FunctorSpec, carrier: &Carrier, j: &Json) -> Result<Value> {
    let err = |m: String| Error::Malformed(format!("value literal: {m}"));
    Ok(match f {
        FunctorSpec::Const(_) => {
            let s = j.as_str().ok_or_else(|| err("const expects a string".into()))?;
            Value::Const(s.into())
        }
        FunctorSpec::Id => {
            let s = j.as_str().ok_or_else(|| err("id expects an atom".into()))?;
            Value::Elem(carrier.index_of(s)?)
        }
        FunctorSpec::Product(a, b) => {
            let parts = j.as_array().filter(|v| v.len() == 2).ok_or_else(|| {
                err("product value expects a two-element array".into())
            })?;
            Value::Pair(
                Box::new(value_from_json(a, carrier, &parts[0])?),
                Box::new(value_from_json(b, carrier, &parts[1])?),
            )
        }
        FunctorSpec::Coproduct(ts) => {
            let o = j.as_object().ok_or_else(|| err("coproduct value expects {inj, value}".into()))?;
            let i = o
                .get("inj")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| err("coproduct value needs an inj index".into()))? as usize;
            if i >= ts.len() {
                return Err(err(format!("inj index {i} out of range")));
            }
            let inner = o.get("value").ok_or_else(|| err("coproduct value needs value".into()))?;
            Value::Inj(i, Box::new(value_from_json(&ts[i], carrier, inner)?))
        }
        FunctorSpec::Exp(t, c) => {
            let o = j.as_object().ok_or_else(|| err("exp value expects an object".into()))?;
            let mut sorted = c.clone();
            sorted.sort();
            let mut vs = Vec::new();
            for key in &sorted {
                let inner = o
                    .get(key)
                    .ok_or_else(|| err(format!("exp value missing entry for {key}")))?;
                vs.push(value_from_json(t, carrier, inner)?);
            }
            Value::Map(vs)
        }
        FunctorSpec::Powerset => {
            let atoms: Vec<String> = serde_json::from_value(j.clone())
                .map_err(|_| err("powerset value expects a string array".into()))?;
            Value::Set(carrier.mask_of(atoms.iter().map(|s| s.as_str()))?)
        }
        FunctorSpec::Bag => {
            let o: BTreeMap<String, u64> = serde_json::from_value(j.clone())
                .map_err(|_| err("bag value expects an object of counts".into()))?;
            let mut entries = Vec::new();
            for (a, n) in o {
                if n > 0 {
                    entries.push((carrier.index_of(&a)?, n));
                }
            }
            entries.sort();
            Value::BagV(entries)
        }
        FunctorSpec::MonNbhd => {
            let gens: Vec<Vec<String>> = serde_json::from_value(j.clone())
                .map_err(|_| err("monnbhd value expects an array of arrays".into()))?;
            let mut sets = Vec::new();
            for g in gens {
                sets.push(carrier.mask_of(g.iter().map(|s| s.as_str()))?);
            }
            Value::Nbhd(functor::minimal_antichain(sets))
        }
        FunctorSpec::MonNbhdStar => {
            let o = j
                .as_object()
                .ok_or_else(|| err("monnbhdstar value expects {nbhd, support}".into()))?;
            let gens: Vec<Vec<String>> = serde_json::from_value(
                o.get("nbhd").ok_or_else(|| err("missing nbhd".into()))?.clone(),
            )
            .map_err(|_| err("nbhd expects an array of arrays".into()))?;
            let support: Vec<String> = serde_json::from_value(
                o.get("support").ok_or_else(|| err("missing support".into()))?.clone(),
            )
            .map_err(|_| err("support expects a string array".into()))?;
            let mut sets = Vec::new();
            for g in gens {
                sets.push(carrier.mask_of(g.iter().map(|s| s.as_str()))?);
            }
            Value::NbhdStar(
                functor::minimal_antichain(sets),
                carrier.mask_of(support.iter().map(|s| s.as_str()))?,
            )
        }
    })
}

pub fn value_to_json(f: &FunctorSpec, carrier: &Carrier, v: &Value) -> Json {
    match (f, v) {
        (FunctorSpec::Const(_), Value::Const(s)) => Json::String(s.clone()),
        (FunctorSpec::Id, Value::Elem(i)) => Json::String(carrier.atom(*i).into()),
        (FunctorSpec::Product(a, b), Value::Pair(u, w)) => Json::Array(vec![
            value_to_json(a, carrier, u),
            value_to_json(b, carrier, w),
        ]),
        (FunctorSpec::Coproduct(ts), Value::Inj(i, u)) => {
            serde_json::json!({ "inj": i, "value": value_to_json(&ts[*i], carrier, u) })
        }
        (FunctorSpec::Exp(t, c), Value::Map(vs)) => {
            let mut sorted = c.clone();
            sorted.sort();
            let mut o = serde_json::Map::new();
            for (key, inner) in sorted.iter().zip(vs) {
                o.insert(key.clone(), value_to_json(t, carrier, inner));
            }
            Json::Object(o)
        }
        (FunctorSpec::Powerset, Value::Set(m)) => serde_json::json!(carrier.mask_to_atoms(*m)),
        (FunctorSpec::Bag, Value::BagV(entries)) => {
            let mut o = serde_json::Map::new();
            for &(i, n) in entries {
                o.insert(carrier.atom(i).into(), serde_json::json!(n));
            }
            Json::Object(o)
        }
        (FunctorSpec::MonNbhd, Value::Nbhd(ac)) => serde_json::json!(ac
            .iter()
            .map(|&m| carrier.mask_to_atoms(m))
            .collect::<Vec<_>>()),
        (FunctorSpec::MonNbhdStar, Value::NbhdStar(ac, sup)) => serde_json::json!({
            "nbhd": ac.iter().map(|&m| carrier.mask_to_atoms(m)).collect::<Vec<_>>(),
            "support": carrier.mask_to_atoms(*sup),
        }),
        _ => Json::Null,
    }
}

/// Parsed contents of a model file: the model, plus frame/root when present.
pub struct LoadedModel {
    pub model: TModel,
    pub root: Option<usize>,
    pub frame: Option<Vec<Bits>>,
}

impl LoadedModel {
    /// Requires the frame/root parts and assembles a validated tree model.
    pub fn into_tree(self) -> Result<TreeModel> {
        let root = self
            .root
            .ok_or_else(|| Error::Malformed("model file lacks a root".into()))?;
        let frame = self
            .frame
            .ok_or_else(|| Error::Malformed("model file lacks a frame".into()))?;
        TreeModel::new(self.model, frame, root)
    }
}

pub fn model_from_json(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    let functor = functor_from_json(&file.functor)?;
    let carrier = Carrier::new(file.carrier)?;
    let mut sigma = Vec::with_capacity(carrier.len());
    for atom in carrier.atoms() {
        let j = file
            .sigma
            .get(atom)
            .ok_or_else(|| Error::Malformed(format!("sigma missing entry for {atom}")))?;
        let v = value_from_json(&functor, &carrier, j)?;
        sigma.push(TObject::new(functor.clone(), carrier.clone(), v)?);
    }
    let mut valuation = BTreeMap::new();
    for (var, atoms) in &file.valuation {
        valuation.insert(
            var.clone(),
            carrier.mask_of(atoms.iter().map(|s| s.as_str()))?,
        );
    }
    let model = TModel::new(functor, carrier.clone(), sigma, valuation)?;
    let root = match &file.root {
        Some(r) => Some(carrier.index_of(r)?),
        None => None,
    };
    let frame = match &file.frame {
        Some(fr) => {
            let mut v = vec![0 as Bits; carrier.len()];
            for (atom, succs) in fr {
                v[carrier.index_of(atom)?] =
                    carrier.mask_of(succs.iter().map(|s| s.as_str()))?;
            }
            Some(v)
        }
        None => None,
    };
    Ok(LoadedModel { model, root, frame })
}

pub fn model_to_json(model: &TModel, root: Option<usize>, frame: Option<&[Bits]>) -> String {
    let mut sigma = BTreeMap::new();
    for (i, t) in model.sigma.iter().enumerate() {
        sigma.insert(
            model.carrier.atom(i).to_string(),
            value_to_json(&model.functor, &model.carrier, &t.value),
        );
    }
    let mut valuation = BTreeMap::new();
    for (v, m) in &model.valuation {
        valuation.insert(v.clone(), model.carrier.mask_to_atoms(*m));
    }
    let file = ModelFile {
        functor: functor_to_json(&model.functor),
        carrier: model.carrier.atoms().to_vec(),
        sigma,
        valuation,
        root: root.map(|r| model.carrier.atom(r).to_string()),
        frame: frame.map(|fr| {
            fr.iter()
                .enumerate()
                .map(|(i, &m)| {
                    (
                        model.carrier.atom(i).to_string(),
                        model.carrier.mask_to_atoms(m),
                    )
                })
                .collect()
        }),
    };
    serde_json::to_string_pretty(&file).expect("model serialization")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trip() {
        let text = r#"{
            "functor": "powerset",
            "carrier": ["s0", "s1", "s2"],
            "sigma": { "s0": ["s1"], "s1": ["s2"], "s2": [] },
            "valuation": { "p": ["s2"] },
            "root": "s0",
            "frame": { "s0": ["s1"], "s1": ["s2"], "s2": [] }
        }"#;
        let loaded = model_from_json(text).unwrap();
        let back = model_to_json(
            &loaded.model,
            loaded.root,
            loaded.frame.as_deref(),
        );
        let again = model_from_json(&back).unwrap();
        assert_eq!(loaded.model, again.model);
        assert_eq!(loaded.frame, again.frame);
        let tree = again.into_tree().unwrap();
        assert_eq!(tree.root, 0);
    }

    #[test]
    fn tree_check_rejects_cycles() {
        let c = Carrier::new(["a", "b"]).unwrap();
        let sigma = vec![
            TObject::powerset(&c, &["b"]).unwrap(),
            TObject::powerset(&c, &["a"]).unwrap(),
        ];
        let model = TModel::new(FunctorSpec::Powerset, c.clone(), sigma, BTreeMap::new()).unwrap();
        let frame = vec![c.singleton("b").unwrap(), c.singleton("a").unwrap()];
        assert!(TreeModel::new(model, frame, 0).is_err());
    }

    #[test]
    fn frame_must_support_sigma() {
        let c = Carrier::new(["a", "b"]).unwrap();
        let sigma = vec![
            TObject::powerset(&c, &["a", "b"]).unwrap(),
            TObject::powerset(&c, &[]).unwrap(),
        ];
        let model = TModel::new(FunctorSpec::Powerset, c.clone(), sigma, BTreeMap::new()).unwrap();
        // R(a) = {b} does not support sigma(a) = {a,b}
        let frame = vec![c.singleton("b").unwrap(), 0];
        assert!(TreeModel::new(model, frame, 0).is_err());
    }

    #[test]
    fn mstar_value_file() {
        let text = r#"{
            "functor": "monnbhdstar",
            "carrier": ["u", "v"],
            "sigma": {
                "u": { "nbhd": [["u"]], "support": ["u", "v"] },
                "v": { "nbhd": [], "support": [] }
            },
            "valuation": {}
        }"#;
        let loaded = model_from_json(text).unwrap();
        assert_eq!(loaded.model.sigma.len(), 2);
    }
}
