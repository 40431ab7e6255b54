//! Generated model corpora for cross-checks: exhaustive small pointed models
//! per functor, labeled rooted tree models, and seeded random samplers.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;

use crate::carrier::{Bits, Carrier};
use crate::error::Result;
use crate::functor::{enumerate_tobjects, FunctorSpec, TObject};
use crate::model::{TModel, TreeModel};

/// All models over carriers of size 1..=max_size for the functor, with every
/// valuation of the given letters. Bag counts bounded by `bag_max`.
pub fn enumerate_models(
    functor: &FunctorSpec,
    max_size: usize,
    letters: &[&str],
    bag_max: u64,
) -> Result<Vec<TModel>> {
    let mut out = Vec::new();
    for n in 1..=max_size {
        let carrier = Carrier::numbered("s", n);
        let objects = enumerate_tobjects(functor, &carrier, bag_max)?;
        // sigma: one object per node
        let mut sigma_choice = vec![0usize; n];
        loop {
            let sigma: Vec<TObject> = sigma_choice.iter().map(|&i| objects[i].clone()).collect();
            // valuations
            let mut val_masks = vec![0 as Bits; letters.len()];
            loop {
                let valuation: BTreeMap<String, Bits> = letters
                    .iter()
                    .zip(&val_masks)
                    .map(|(l, &m)| (l.to_string(), m))
                    .collect();
                out.push(TModel::new(
                    functor.clone(),
                    carrier.clone(),
                    sigma.clone(),
                    valuation,
                )?);
                let mut pos = 0;
                while pos < val_masks.len() {
                    val_masks[pos] += 1;
                    if val_masks[pos] < (1u128 << n) {
                        break;
                    }
                    val_masks[pos] = 0;
                    pos += 1;
                }
                if pos == val_masks.len() {
                    break;
                }
            }
            let mut pos = 0;
            while pos < n {
                sigma_choice[pos] += 1;
                if sigma_choice[pos] < objects.len() {
                    break;
                }
                sigma_choice[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
    }
    Ok(out)
}

/// All rooted labeled tree shapes on n nodes: parent vectors with
/// parent(i) < i and node 0 the root.
pub fn tree_shapes(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for i in 1..n {
        let mut next = Vec::new();
        for shape in &out {
            for p in 0..i {
                let mut s = shape.clone();
                s.push(p);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// All powerset tree models up to max_nodes with sigma equal to the child
/// set at every node, over all valuations of the letters.
pub fn enumerate_powerset_trees(max_nodes: usize, letters: &[&str]) -> Result<Vec<TreeModel>> {
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for shape in tree_shapes(n) {
            let carrier = Carrier::numbered("t", n);
            let mut children = vec![0 as Bits; n];
            for (i, &p) in shape.iter().enumerate() {
                children[p] |= 1 << (i + 1);
            }
            let sigma: Vec<TObject> = children
                .iter()
                .map(|&m| {
                    TObject::new(FunctorSpec::Powerset, carrier.clone(), crate::functor::Value::Set(m))
                })
                .collect::<Result<_>>()?;
            let mut val_masks = vec![0 as Bits; letters.len()];
            loop {
                let valuation: BTreeMap<String, Bits> = letters
                    .iter()
                    .zip(&val_masks)
                    .map(|(l, &m)| (l.to_string(), m))
                    .collect();
                let model = TModel::new(
                    FunctorSpec::Powerset,
                    carrier.clone(),
                    sigma.clone(),
                    valuation,
                )?;
                out.push(TreeModel::new(model, children.clone(), 0)?);
                let mut pos = 0;
                while pos < val_masks.len() {
                    val_masks[pos] += 1;
                    if val_masks[pos] < (1u128 << n) {
                        break;
                    }
                    val_masks[pos] = 0;
                    pos += 1;
                }
                if pos == val_masks.len() {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// A random powerset tree model with the requested node budget.
pub fn random_powerset_tree(
    rng: &mut StdRng,
    max_nodes: usize,
    letters: &[&str],
) -> Result<TreeModel> {
    let n = rng.gen_range(1..=max_nodes);
    let shape: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let carrier = Carrier::numbered("t", n);
    let mut children = vec![0 as Bits; n];
    for (i, &p) in shape.iter().enumerate() {
        children[p] |= 1 << (i + 1);
    }
    let sigma: Vec<TObject> = children
        .iter()
        .map(|&m| {
            TObject::new(
                FunctorSpec::Powerset,
                carrier.clone(),
                crate::functor::Value::Set(m),
            )
        })
        .collect::<Result<_>>()?;
    let valuation: BTreeMap<String, Bits> = letters
        .iter()
        .map(|l| {
            let m = rng.gen_range(0..(1u128 << n));
            (l.to_string(), m)
        })
        .collect();
    let model = TModel::new(FunctorSpec::Powerset, carrier, sigma, valuation)?;
    TreeModel::new(model, children, 0)
}

/// A random bag tree model: sigma at a node is a bag over its children with
/// the given maximal count.
pub fn random_bag_tree(
    rng: &mut StdRng,
    max_nodes: usize,
    max_count: u64,
    letters: &[&str],
) -> Result<TreeModel> {
    let n = rng.gen_range(1..=max_nodes);
    let shape: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let carrier = Carrier::numbered("t", n);
    let mut children = vec![0 as Bits; n];
    for (i, &p) in shape.iter().enumerate() {
        children[p] |= 1 << (i + 1);
    }
    let sigma: Vec<TObject> = children
        .iter()
        .map(|&m| {
            let counts: Vec<(usize, u64)> = crate::carrier::bits_iter(m)
                .map(|i| (i, rng.gen_range(1..=max_count)))
                .collect();
            TObject::new(
                FunctorSpec::Bag,
                carrier.clone(),
                crate::functor::Value::BagV(counts),
            )
        })
        .collect::<Result<_>>()?;
    let valuation: BTreeMap<String, Bits> = letters
        .iter()
        .map(|l| (l.to_string(), rng.gen_range(0..(1u128 << n))))
        .collect();
    let model = TModel::new(FunctorSpec::Bag, carrier, sigma, valuation)?;
    TreeModel::new(model, children, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_shape_counts() {
        assert_eq!(tree_shapes(1).len(), 1);
        assert_eq!(tree_shapes(2).len(), 1);
        assert_eq!(tree_shapes(3).len(), 2);
        assert_eq!(tree_shapes(4).len(), 6);
        assert_eq!(tree_shapes(5).len(), 24);
    }

    #[test]
    fn kripke_enumeration_count() {
        // one node: 2 sigma choices x 2 valuations; two nodes: 16 x 4
        let ms = enumerate_models(&FunctorSpec::Powerset, 2, &["p"], 2).unwrap();
        assert_eq!(ms.len(), 2 * 2 + 16 * 4);
    }
}
