use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Subsets of a carrier are bitmasks relative to the carrier's atom order.
pub type Bits = u128;

pub const MAX_CARRIER: usize = 128;

/// A named finite set of string atoms. Atoms are kept sorted and all subset
/// values are bitmasks relative to that order, so two carriers are
/// interchangeable exactly when they are equal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Carrier {
    atoms: Arc<Vec<String>>,
}

impl fmt::Debug for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.atoms.join(","))
    }
}

impl Carrier {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(atoms: I) -> Result<Carrier> {
        let mut v: Vec<String> = atoms.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        if v.len() > MAX_CARRIER {
            return Err(Error::Cap(format!(
                "carrier of size {} exceeds the {MAX_CARRIER}-atom limit",
                v.len()
            )));
        }
        Ok(Carrier { atoms: Arc::new(v) })
    }

    /// Carrier `{0, 1, ..., n-1}` with atoms named by a prefix.
    pub fn numbered(prefix: &str, n: usize) -> Carrier {
        let width = if n <= 10 { 1 } else { 2 };
        Carrier::new((0..n).map(|i| format!("{prefix}{i:0width$}"))).expect("small carrier")
    }

    pub fn empty() -> Carrier {
        Carrier::new(Vec::<String>::new()).unwrap()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &str {
        &self.atoms[i]
    }

    pub fn index_of(&self, atom: &str) -> Result<usize> {
        self.atoms
            .binary_search_by(|a| a.as_str().cmp(atom))
            .map_err(|_| Error::Unbound(format!("atom {atom} not in carrier {self:?}")))
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.index_of(atom).is_ok()
    }

    /// Full-set mask.
    pub fn full(&self) -> Bits {
        if self.atoms.is_empty() {
            0
        } else {
            (Bits::MAX >> (MAX_CARRIER - self.atoms.len())) as Bits
        }
    }

    pub fn singleton(&self, atom: &str) -> Result<Bits> {
        Ok(1 << self.index_of(atom)?)
    }

    pub fn mask_of<'a, I: IntoIterator<Item = &'a str>>(&self, atoms: I) -> Result<Bits> {
        let mut m = 0;
        for a in atoms {
            m |= self.singleton(a)?;
        }
        Ok(m)
    }

    pub fn mask_to_atoms(&self, mask: Bits) -> Vec<String> {
        bits_iter(mask).map(|i| self.atoms[i].clone()).collect()
    }

    /// All subsets, smallest first by popcount then numeric order.
    pub fn subsets(&self) -> Vec<Bits> {
        let n = self.atoms.len();
        let mut subs: Vec<Bits> = (0..(1u128 << n)).collect();
        subs.sort_by_key(|m| (m.count_ones(), *m));
        subs
    }

    /// Subcarrier consisting of the atoms in `mask`, plus the injection map.
    pub fn restrict(&self, mask: Bits) -> (Carrier, CarrierMap) {
        let atoms: Vec<String> = bits_iter(mask).map(|i| self.atoms[i].clone()).collect();
        let sub = Carrier::new(atoms).expect("subset of valid carrier");
        let map = bits_iter(mask).collect();
        (
            sub.clone(),
            CarrierMap {
                dom: sub,
                cod: self.clone(),
                map,
            },
        )
    }
}

/// A total map between carriers, stored by atom index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarrierMap {
    pub dom: Carrier,
    pub cod: Carrier,
    pub map: Vec<usize>,
}

impl CarrierMap {
    pub fn new(dom: Carrier, cod: Carrier, pairs: &[(&str, &str)]) -> Result<CarrierMap> {
        let mut map = vec![usize::MAX; dom.len()];
        for (x, y) in pairs {
            map[dom.index_of(x)?] = cod.index_of(y)?;
        }
        if let Some(i) = map.iter().position(|&m| m == usize::MAX) {
            return Err(Error::Malformed(format!(
                "map is not total: no image for {}",
                dom.atom(i)
            )));
        }
        Ok(CarrierMap { dom, cod, map })
    }

    pub fn identity(c: &Carrier) -> CarrierMap {
        CarrierMap {
            dom: c.clone(),
            cod: c.clone(),
            map: (0..c.len()).collect(),
        }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn compose(&self, after: &CarrierMap) -> Result<CarrierMap> {
        if self.cod != after.dom {
            return Err(Error::CarrierMismatch(
                "compose: codomain of first map differs from domain of second".into(),
            ));
        }
        Ok(CarrierMap {
            dom: self.dom.clone(),
            cod: after.cod.clone(),
            map: self.map.iter().map(|&i| after.map[i]).collect(),
        })
    }

    /// Direct image of a subset mask.
    pub fn image(&self, mask: Bits) -> Bits {
        let mut out = 0;
        for i in bits_iter(mask) {
            out |= 1 << self.map[i];
        }
        out
    }

    /// Preimage of a subset mask.
    pub fn preimage(&self, mask: Bits) -> Bits {
        let mut out = 0;
        for (i, &j) in self.map.iter().enumerate() {
            if mask & (1 << j) != 0 {
                out |= 1 << i;
            }
        }
        out
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = 0 as Bits;
        for &j in &self.map {
            if seen & (1 << j) != 0 {
                return false;
            }
            seen |= 1 << j;
        }
        true
    }

    pub fn is_surjective(&self) -> bool {
        let mut seen = 0 as Bits;
        for &j in &self.map {
            seen |= 1 << j;
        }
        seen == self.cod.full()
    }
}

/// Iterate over the set bit positions of a mask.
pub fn bits_iter(mask: Bits) -> impl Iterator<Item = usize> {
    BitsIter(mask)
}

struct BitsIter(Bits);

impl Iterator for BitsIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let i = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(i)
        }
    }
}
