//! Normed coordinate spaces in which every embedding lives.
//!
//! Vectors are finitely supported maps from opaque coordinate [`Key`]s to
//! scalars. A [`SpaceModel`] fixes the norm: an `ℓp` norm, a nested
//! `(⊕ ℓ_{p_i})_{ℓ_p}` sum over disjoint key blocks, or an evaluation norm
//! `max_f |⟨f, v⟩| + ε · max_k |v(k)|` over a declared functional family.

mod moduli;
mod projection;

pub use moduli::{auc_modulus_estimate, aus_modulus_estimate, lp_modulus_closed_form, ModulusConfig};
pub use projection::{level_projection, BranchField, Grading, ProjectionMode};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};
use crate::tree::TreeNode;

/// Opaque coordinate token; serialized as a JSON array of integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Key(pub Vec<u32>);

impl Key {
    pub fn node(s: &TreeNode) -> Key {
        Key(s.path().to_vec())
    }

    /// `(level, node)` key used by the leveled constructions.
    pub fn tagged(level: usize, s: &TreeNode) -> Key {
        let mut v = Vec::with_capacity(s.len() + 1);
        v.push(level as u32);
        v.extend_from_slice(s.path());
        Key(v)
    }

    pub fn index(i: usize) -> Key {
        Key(vec![i as u32])
    }

    pub fn to_slash(&self) -> String {
        self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("/")
    }

    pub fn from_slash(s: &str) -> Result<Key> {
        if s.is_empty() {
            return Ok(Key::default());
        }
        s.split('/')
            .map(|x| x.parse::<u32>().map_err(|e| Error::Parse(format!("bad key {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Key)
    }

    fn to_json_text(&self) -> String {
        let inner = self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        format!("[{inner}]")
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json_text())
    }
}

/// Finitely supported coordinate vector. Exact zeros are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T> {
    entries: BTreeMap<Key, T>,
}

impl<T: Real> Vector<T> {
    pub fn zero() -> Self {
        Vector { entries: BTreeMap::new() }
    }

    pub fn unit(key: Key) -> Self {
        let mut v = Self::zero();
        v.set(key, T::one());
        v
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (Key, T)>) -> Self {
        let mut v = Self::zero();
        for (k, x) in entries {
            v.add_at(k, x);
        }
        v
    }

    pub fn get(&self, key: &Key) -> T {
        self.entries.get(key).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, key: Key, value: T) {
        if value == T::zero() {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, value);
        }
    }

    pub fn add_at(&mut self, key: Key, value: T) {
        let cur = self.get(&key);
        self.set(key, cur + value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &T)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.entries.keys()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Vector<T>) {
        for (k, &x) in other.iter() {
            self.add_at(k.clone(), alpha * x);
        }
    }

    pub fn add(&self, other: &Vector<T>) -> Vector<T> {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Vector<T>) -> Vector<T> {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn scale(&self, alpha: T) -> Vector<T> {
        Vector::from_entries(self.iter().map(|(k, &x)| (k.clone(), alpha * x)))
    }

    pub fn max_abs(&self) -> T {
        self.entries.values().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Keeps only entries whose key satisfies the predicate.
    pub fn filter(&self, mut keep: impl FnMut(&Key) -> bool) -> Vector<T> {
        Vector {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, &x)| (k.clone(), x))
                .collect(),
        }
    }

    /// Dense coordinates over a key index; keys missing from the index are dropped.
    pub fn to_dense(&self, index: &KeyIndex) -> Vec<T> {
        let mut out = vec![T::zero(); index.len()];
        for (k, &x) in self.iter() {
            if let Some(i) = index.position(k) {
                out[i] = x;
            }
        }
        out
    }
}

impl<T: Real> Serialize for Vector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(&k.to_json_text(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Real> Deserialize<'de> for Vector<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);
        impl<'de, T: Real> Visitor<'de> for V<T> {
            type Value = Vector<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from JSON-array keys to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vector::zero();
                while let Some((k, v)) = access.next_entry::<String, T>()? {
                    let key: Vec<u32> = serde_json::from_str(&k).map_err(de::Error::custom)?;
                    out.set(Key(key), v);
                }
                Ok(out)
            }
        }
        deserializer.deserialize_map(V(std::marker::PhantomData))
    }
}

/// Bijection between a sorted key set and dense positions.
#[derive(Debug, Clone, Default)]
pub struct KeyIndex {
    keys: Vec<Key>,
    pos: HashMap<Key, usize>,
}

impl KeyIndex {
    pub fn new(keys: impl IntoIterator<Item = Key>) -> Self {
        let mut keys: Vec<Key> = keys.into_iter().collect();
        keys.sort();
        keys.dedup();
        let pos = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        KeyIndex { keys, pos }
    }

    pub fn from_vectors<'a, T: Real>(vectors: impl IntoIterator<Item = &'a Vector<T>>) -> Self {
        KeyIndex::new(vectors.into_iter().flat_map(|v| v.keys().cloned()))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn position(&self, key: &Key) -> Option<usize> {
        self.pos.get(key).copied()
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }
}

/// A linear functional with finitely many nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LinearFunctional<T> {
    pub entries: Vector<T>,
    /// Declared operator-norm bound against some space, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<T>,
}

impl<T: Real> LinearFunctional<T> {
    pub fn new(entries: Vector<T>) -> Self {
        LinearFunctional { entries, bound: None }
    }

    pub fn coordinate(key: Key) -> Self {
        LinearFunctional::new(Vector::unit(key))
    }

    pub fn with_bound(mut self, bound: T) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn apply(&self, v: &Vector<T>) -> T {
        pair_vectors(&self.entries, v)
    }
}

/// `⟨f, v⟩ = Σ_k f(k) v(k)`.
pub fn pair<T: Real>(f: &LinearFunctional<T>, v: &Vector<T>) -> T {
    f.apply(v)
}

/// Bilinear pairing of two coordinate maps, summed in key order.
pub fn pair_vectors<T: Real>(a: &Vector<T>, b: &Vector<T>) -> T {
    let (small, large) = if a.support_len() <= b.support_len() { (a, b) } else { (b, a) };
    compensated_sum(
        small
            .iter()
            .filter_map(|(k, &x)| large.entries.get(k).map(|&y| x * y)),
    )
}

/// Norm exponent `p ∈ [1, ∞]`; serialized as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent<T>(pub T);

impl<T: Real> Exponent<T> {
    pub fn infinity() -> Self {
        Exponent(T::infinity())
    }

    pub fn validate(self) -> Result<Self> {
        if self.0.is_nan() || self.0 < T::one() {
            return Err(Error::InvalidExponent(self.0.to_f64_lossy()));
        }
        Ok(self)
    }

    /// Conjugate exponent `q = p / (p - 1)`, with `1 <-> ∞`.
    pub fn conjugate(self) -> Self {
        let p = self.0;
        if p == T::one() {
            Exponent(T::infinity())
        } else if p.is_infinite() {
            Exponent(T::one())
        } else {
            Exponent(p / (p - T::one()))
        }
    }
}

impl<T: Real> Serialize for Exponent<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de, T: Real> Deserialize<'de> for Exponent<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => T::from_f64(x).map(Exponent).ok_or_else(|| de::Error::custom("bad exponent")),
            Raw::Str(s) if s == "inf" || s == "infinity" => Ok(Exponent(T::infinity())),
            Raw::Str(s) => Err(de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

/// One inner block of a nested sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Block<T> {
    pub p: Exponent<T>,
    pub keys: Vec<Key>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "lowercase", bound = "T: Real")]
pub enum SpaceModel<T> {
    Lp {
        p: Exponent<T>,
    },
    Nested {
        outer_p: Exponent<T>,
        blocks: Vec<Block<T>>,
    },
    Eval {
        epsilon: T,
        functionals: Vec<LinearFunctional<T>>,
    },
}

pub const DEFAULT_EVAL_EPSILON: f64 = 1e-6;

impl<T: Real> SpaceModel<T> {
    pub fn lp(p: T) -> Self {
        SpaceModel::Lp { p: Exponent(p) }
    }

    pub fn l1() -> Self {
        Self::lp(T::one())
    }

    pub fn l2() -> Self {
        Self::lp(T::lit(2.0))
    }

    pub fn linf() -> Self {
        SpaceModel::Lp { p: Exponent::infinity() }
    }

    pub fn nested(outer_p: T, blocks: Vec<(T, Vec<Key>)>) -> Result<Self> {
        let s = SpaceModel::Nested {
            outer_p: Exponent(outer_p),
            blocks: blocks
                .into_iter()
                .map(|(p, keys)| Block { p: Exponent(p), keys })
                .collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn eval(functionals: Vec<LinearFunctional<T>>, epsilon: T) -> Result<Self> {
        let s = SpaceModel::Eval { epsilon, functionals };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceModel::Lp { p } => {
                p.validate()?;
            }
            SpaceModel::Nested { outer_p, blocks } => {
                outer_p.validate()?;
                let mut seen = std::collections::HashSet::new();
                for b in blocks {
                    b.p.validate()?;
                    for k in &b.keys {
                        if !seen.insert(k) {
                            return Err(Error::OverlappingBlocks(k.clone()));
                        }
                    }
                }
            }
            SpaceModel::Eval { epsilon, .. } => {
                if epsilon.is_nan() || *epsilon < T::zero() {
                    return Err(Error::InvalidParameter(format!(
                        "evaluation-norm epsilon {epsilon} must be >= 0"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The exponent of an `ℓp` model.
    pub fn lp_exponent(&self) -> Option<T> {
        match self {
            SpaceModel::Lp { p } => Some(p.0),
            _ => None,
        }
    }

    /// Dual coordinate norm: `ℓq` for `ℓp`, blockwise conjugates for nested sums.
    pub fn dual(&self) -> Result<Self> {
        match self {
            SpaceModel::Lp { p } => Ok(SpaceModel::Lp { p: p.conjugate() }),
            SpaceModel::Nested { outer_p, blocks } => Ok(SpaceModel::Nested {
                outer_p: outer_p.conjugate(),
                blocks: blocks
                    .iter()
                    .map(|b| Block { p: b.p.conjugate(), keys: b.keys.clone() })
                    .collect(),
            }),
            SpaceModel::Eval { .. } => Err(Error::Unsupported(
                "dual of an evaluation norm is not represented".into(),
            )),
        }
    }

    pub fn norm(&self, v: &Vector<T>) -> Result<T> {
        norm(v, self)
    }

    /// Precomputes the norm over a fixed dense key universe.
    pub fn compile(&self, index: &KeyIndex) -> Result<CompiledNorm<T>> {
        self.validate()?;
        Ok(match self {
            SpaceModel::Lp { p } => CompiledNorm::Lp(p.0),
            SpaceModel::Nested { outer_p, blocks } => {
                let mut block_of = vec![usize::MAX; index.len()];
                for (bi, b) in blocks.iter().enumerate() {
                    for k in &b.keys {
                        if let Some(i) = index.position(k) {
                            block_of[i] = bi;
                        }
                    }
                }
                if let Some(i) = block_of.iter().position(|&b| b == usize::MAX) {
                    return Err(Error::KeyOutsideBlocks(index.keys()[i].clone()));
                }
                let mut members = vec![Vec::new(); blocks.len()];
                for (i, &b) in block_of.iter().enumerate() {
                    members[b].push(i);
                }
                CompiledNorm::Nested {
                    outer: outer_p.0,
                    inner: blocks.iter().map(|b| b.p.0).collect(),
                    members,
                }
            }
            SpaceModel::Eval { epsilon, functionals } => CompiledNorm::Eval {
                epsilon: *epsilon,
                functionals: functionals
                    .iter()
                    .map(|f| {
                        f.entries
                            .iter()
                            .filter_map(|(k, &x)| index.position(k).map(|i| (i, x)))
                            .collect()
                    })
                    .collect(),
            },
        })
    }
}

/// `ℓp` norm of a list of magnitudes, scaled by the maximum to avoid overflow.
pub fn lp_norm_of<T: Real>(values: impl Iterator<Item = T> + Clone, p: T) -> T {
    if p == T::one() {
        return compensated_sum(values.map(|x| x.abs()));
    }
    let max = values.clone().fold(T::zero(), |m, x| m.max(x.abs()));
    if p.is_infinite() || max == T::zero() {
        return max;
    }
    let s = compensated_sum(values.map(|x| {
        let r = x.abs() / max;
        if p == T::lit(2.0) {
            r * r
        } else {
            r.powf(p)
        }
    }));
    if p == T::lit(2.0) {
        max * s.sqrt()
    } else {
        max * s.powf(p.recip())
    }
}

/// Norm of `v` in `space`.
pub fn norm<T: Real>(v: &Vector<T>, space: &SpaceModel<T>) -> Result<T> {
    space.validate()?;
    match space {
        SpaceModel::Lp { p } => Ok(lp_norm_of(v.entries.values().copied(), p.0)),
        SpaceModel::Nested { outer_p, blocks } => {
            let mut block_of: HashMap<&Key, usize> = HashMap::new();
            for (bi, b) in blocks.iter().enumerate() {
                for k in &b.keys {
                    block_of.insert(k, bi);
                }
            }
            let mut parts: Vec<Vec<T>> = vec![Vec::new(); blocks.len()];
            for (k, &x) in v.iter() {
                let bi = *block_of.get(k).ok_or_else(|| Error::KeyOutsideBlocks(k.clone()))?;
                parts[bi].push(x);
            }
            let inner: Vec<T> = parts
                .iter()
                .zip(blocks)
                .map(|(xs, b)| lp_norm_of(xs.iter().copied(), b.p.0))
                .collect();
            Ok(lp_norm_of(inner.into_iter(), outer_p.0))
        }
        SpaceModel::Eval { epsilon, functionals } => {
            let sup = functionals
                .iter()
                .fold(T::zero(), |m, f| m.max(f.apply(v).abs()));
            Ok(sup + *epsilon * v.max_abs())
        }
    }
}

/// A [`SpaceModel`] specialised to a dense key universe.
#[derive(Debug, Clone)]
pub enum CompiledNorm<T> {
    Lp(T),
    Nested {
        outer: T,
        inner: Vec<T>,
        members: Vec<Vec<usize>>,
    },
    Eval {
        epsilon: T,
        functionals: Vec<Vec<(usize, T)>>,
    },
}

impl<T: Real> CompiledNorm<T> {
    pub fn norm(&self, x: &[T]) -> T {
        match self {
            CompiledNorm::Lp(p) => lp_norm_of(x.iter().copied(), *p),
            CompiledNorm::Nested { outer, inner, members } => {
                let parts: Vec<T> = members
                    .iter()
                    .zip(inner)
                    .map(|(m, &p)| lp_norm_of(m.iter().map(|&i| x[i]), p))
                    .collect();
                lp_norm_of(parts.into_iter(), *outer)
            }
            CompiledNorm::Eval { epsilon, functionals } => {
                let sup = functionals.iter().fold(T::zero(), |m, f| {
                    m.max(compensated_sum(f.iter().map(|&(i, c)| c * x[i])).abs())
                });
                sup + *epsilon * x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
            }
        }
    }

    /// Norm of `a - b` without allocating when possible.
    pub fn dist(&self, a: &[T], b: &[T], scratch: &mut Vec<T>) -> T {
        scratch.clear();
        scratch.extend(a.iter().zip(b).map(|(&x, &y)| x - y));
        self.norm(scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_entries(xs.iter().enumerate().map(|(i, &x)| (Key::index(i), x)))
    }

    #[test]
    fn lp_examples() {
        let x = v(&[1.0, -2.0, 3.0]);
        assert_eq!(norm(&x, &SpaceModel::l1()).unwrap(), 6.0);
        assert_eq!(norm(&x, &SpaceModel::linf()).unwrap(), 3.0);
        assert!((norm(&x, &SpaceModel::l2()).unwrap() - 14f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nested_example() {
        let space = SpaceModel::nested(
            2.0,
            vec![
                (1.0, vec![Key::index(0), Key::index(1)]),
                (1.0, vec![Key::index(2), Key::index(3)]),
            ],
        )
        .unwrap();
        let x = v(&[1.0, 1.0, 2.0, 0.0]);
        assert!((norm(&x, &space).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        let outside = Vector::unit(Key::index(9));
        assert_eq!(norm(&outside, &space), Err(Error::KeyOutsideBlocks(Key::index(9))));
    }

    #[test]
    fn invalid_exponent_and_overlap() {
        let x = v(&[1.0]);
        assert!(matches!(norm(&x, &SpaceModel::lp(0.5)), Err(Error::InvalidExponent(_))));
        let r = SpaceModel::nested(2.0, vec![(1.0, vec![Key::index(0)]), (2.0, vec![Key::index(0)])]);
        assert_eq!(r, Err(Error::OverlappingBlocks(Key::index(0))));
    }

    #[test]
    fn pairing_examples() {
        let e1 = LinearFunctional::<f64>::coordinate(Key::index(1));
        assert_eq!(pair(&e1, &Vector::unit(Key::index(1))), 1.0);
        let zero = LinearFunctional::new(Vector::zero());
        assert_eq!(pair(&zero, &v(&[3.0, 4.0])), 0.0);
        let a = Key(vec![7]);
        let b = Key(vec![8]);
        let f = LinearFunctional::new(Vector::from_entries([(a.clone(), 1.0), (b.clone(), 1.0)]));
        let x = Vector::from_entries([(a, 0.3), (b, -0.1)]);
        assert!((pair::<f64>(&f, &x) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn eval_norm_adds_regularizer() {
        let f = LinearFunctional::coordinate(Key::index(0));
        let space = SpaceModel::eval(vec![f], 0.5).unwrap();
        assert_eq!(norm(&v(&[2.0, -4.0]), &space).unwrap(), 2.0 + 0.5 * 4.0);
    }

    #[test]
    fn compiled_matches_sparse() {
        let x = v(&[1.0, -2.0, 0.5, 3.0]);
        let idx = KeyIndex::from_vectors([&x]);
        let dense = x.to_dense(&idx);
        let spaces = vec![
            SpaceModel::l1(),
            SpaceModel::lp(3.0),
            SpaceModel::linf(),
            SpaceModel::nested(2.0, vec![(1.0, vec![Key::index(0), Key::index(1)]), (3.0, vec![Key::index(2), Key::index(3)])]).unwrap(),
            SpaceModel::eval(vec![LinearFunctional::coordinate(Key::index(3))], 1e-6).unwrap(),
        ];
        for s in spaces {
            let c = s.compile(&idx).unwrap();
            assert!((c.norm(&dense) - norm(&x, &s).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn json_shapes() {
        let x = Vector::from_entries([(Key(vec![1, 2]), 0.5)]);
        assert_eq!(serde_json::to_string(&x).unwrap(), r#"{"[1,2]":0.5}"#);
        let back: Vector<f64> = serde_json::from_str(r#"{"[1,2]":0.5}"#).unwrap();
        assert_eq!(back, x);
        let s: SpaceModel<f64> = serde_json::from_str(r#"{"norm":"lp","p":2}"#).unwrap();
        assert_eq!(s, SpaceModel::l2());
        let s: SpaceModel<f64> = serde_json::from_str(r#"{"norm":"lp","p":"inf"}"#).unwrap();
        assert_eq!(s, SpaceModel::linf());
        let s: SpaceModel<f64> = serde_json::from_str(
            r#"{"norm":"nested","outer_p":2,"blocks":[{"p":1.5,"keys":[[0],[1]]}]}"#,
        )
        .unwrap();
        assert!(matches!(s, SpaceModel::Nested { .. }));
        let s: SpaceModel<f64> =
            serde_json::from_str(r#"{"norm":"eval","epsilon":1e-6,"functionals":[{"entries":{"[0]":1.0}}]}"#).unwrap();
        assert!(matches!(s, SpaceModel::Eval { .. }));
    }

    #[test]
    fn dual_exponents() {
        assert_eq!(SpaceModel::<f64>::l1().dual().unwrap(), SpaceModel::linf());
        assert_eq!(SpaceModel::<f64>::l2().dual().unwrap(), SpaceModel::l2());
        assert_eq!(SpaceModel::<f64>::lp(3.0).dual().unwrap(), SpaceModel::lp(1.5));
    }
}
