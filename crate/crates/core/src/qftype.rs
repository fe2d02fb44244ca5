//! Quantifier-free types of tuples.
//!
//! A `QfType` over a signature and `var_count` variables records, for every
//! relation symbol and every tuple of variables of matching arity, whether the
//! atom holds. The map is total: absent atoms are not "unknown", construction
//! fails unless every slot is filled. `non_redundant` additionally asserts the
//! variables denote pairwise-distinct elements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::Signature;
use crate::structure::FinStructure;

pub type AtomKey = (String, Vec<usize>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QfType {
    pub signature: Signature,
    pub var_count: usize,
    atoms: BTreeMap<AtomKey, bool>,
    pub non_redundant: bool,
}

#[derive(Serialize, Deserialize)]
struct QfTypeJson {
    signature: Signature,
    var_count: usize,
    atoms: Vec<(String, Vec<usize>, bool)>,
    non_redundant: bool,
}

/// All tuples of length `arity` over variables `0..var_count`.
pub fn var_tuples(var_count: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..var_count).map(move |v| {
                    let mut n = t.clone();
                    n.push(v);
                    n
                })
            })
            .collect();
    }
    out
}

impl QfType {
    /// Build a total type by evaluating `f` on every atom slot.
    pub fn from_fn(
        signature: Signature,
        var_count: usize,
        non_redundant: bool,
        mut f: impl FnMut(&str, &[usize]) -> bool,
    ) -> Result<Self> {
        signature.validate()?;
        let mut atoms = BTreeMap::new();
        for rel in &signature.relations {
            for tuple in var_tuples(var_count, rel.arity) {
                let v = f(&rel.name, &tuple);
                atoms.insert((rel.name.clone(), tuple), v);
            }
        }
        Ok(QfType {
            signature,
            var_count,
            atoms,
            non_redundant,
        })
    }

    /// The all-false type (no atom holds).
    pub fn all_false(signature: Signature, var_count: usize, non_redundant: bool) -> Result<Self> {
        Self::from_fn(signature, var_count, non_redundant, |_, _| false)
    }

    pub fn atom(&self, relation: &str, vars: &[usize]) -> Result<bool> {
        self.atoms
            .get(&(relation.to_string(), vars.to_vec()))
            .copied()
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!(
                    "no atom {relation}({vars:?}) in type on {} vars",
                    self.var_count
                ))
            })
    }

    pub fn set_atom(&mut self, relation: &str, vars: &[usize], value: bool) -> Result<()> {
        let key = (relation.to_string(), vars.to_vec());
        if !self.atoms.contains_key(&key) {
            return Err(Error::IndexOutOfRange(format!(
                "no atom {relation}({vars:?}) in type on {} vars",
                self.var_count
            )));
        }
        self.atoms.insert(key, value);
        Ok(())
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&AtomKey, bool)> {
        self.atoms.iter().map(|(k, &v)| (k, v))
    }

    pub fn true_atom_count(&self) -> usize {
        self.atoms.values().filter(|&&v| v).count()
    }

    /// Does the tuple (of element indices) realize this type in `s`?
    pub fn satisfied_by(&self, s: &FinStructure, tuple: &[usize]) -> Result<bool> {
        if tuple.len() != self.var_count {
            return Err(Error::IndexOutOfRange(format!(
                "type has {} vars, tuple has {}",
                self.var_count,
                tuple.len()
            )));
        }
        if self.signature != s.signature {
            return Err(Error::SignatureMismatch(
                "type and structure signatures differ".into(),
            ));
        }
        for &i in tuple {
            if i >= s.size() {
                return Err(Error::IndexOutOfRange(format!("element index {i}")));
            }
        }
        if self.non_redundant {
            for a in 0..tuple.len() {
                for b in (a + 1)..tuple.len() {
                    if tuple[a] == tuple[b] {
                        return Ok(false);
                    }
                }
            }
        }
        for ((rel, vars), want) in &self.atoms {
            let mapped: Vec<usize> = vars.iter().map(|&v| tuple[v]).collect();
            if s.holds(rel, &mapped) != *want {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Restrict to the variables listed (reindexed in the given order).
    pub fn restrict_vars(&self, vars: &[usize]) -> Result<QfType> {
        for &v in vars {
            if v >= self.var_count {
                return Err(Error::IndexOutOfRange(format!(
                    "variable {v} out of range ({} vars)",
                    self.var_count
                )));
            }
        }
        QfType::from_fn(
            self.signature.clone(),
            vars.len(),
            self.non_redundant,
            |rel, slot| {
                let mapped: Vec<usize> = slot.iter().map(|&v| vars[v]).collect();
                self.atom(rel, &mapped).unwrap()
            },
        )
    }

    /// Restrict to the first `layer_count` layers of the signature.
    pub fn restrict_language(&self, layer_count: usize) -> Result<QfType> {
        let sig = self.signature.restrict_layers(layer_count)?;
        QfType::from_fn(sig, self.var_count, self.non_redundant, |rel, slot| {
            self.atom(rel, slot).unwrap()
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(QfTypeJson {
            signature: self.signature.clone(),
            var_count: self.var_count,
            atoms: self
                .atoms
                .iter()
                .map(|((r, v), &b)| (r.clone(), v.clone(), b))
                .collect(),
            non_redundant: self.non_redundant,
        })
        .expect("type serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<QfType> {
        let raw: QfTypeJson = serde_json::from_value(value.clone())?;
        let mut t = QfType::all_false(raw.signature, raw.var_count, raw.non_redundant)?;
        let expected = t.atoms.len();
        let mut seen = 0usize;
        for (rel, vars, b) in raw.atoms {
            t.set_atom(&rel, &vars, b)?;
            seen += 1;
        }
        if seen != expected {
            return Err(Error::Parse(format!(
                "type atom list has {seen} entries, signature requires {expected}"
            )));
        }
        Ok(t)
    }
}

/// The quantifier-free type of a tuple of elements in a structure.
/// `non_redundant` is set exactly when the elements are pairwise distinct.
pub fn qf_type_of(s: &FinStructure, labels: &[String]) -> Result<QfType> {
    let tuple: Vec<usize> = labels
        .iter()
        .map(|l| s.element_index(l))
        .collect::<Result<_>>()?;
    let distinct = (0..tuple.len()).all(|a| ((a + 1)..tuple.len()).all(|b| tuple[a] != tuple[b]));
    QfType::from_fn(s.signature.clone(), tuple.len(), distinct, |rel, vars| {
        let mapped: Vec<usize> = vars.iter().map(|&v| tuple[v]).collect();
        s.holds(rel, &mapped)
    })
}
