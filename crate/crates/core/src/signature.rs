//! Layered relational signatures.
//!
//! A signature is a finite list of relation symbols, each with an arity and a
//! layer index. Layers order the symbols into generations: layer 0 holds the
//! base language, later layers hold symbols introduced by language expansions.
//! Constant and function symbols are intentionally absent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single relation symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
    pub layer: usize,
}

/// A finite relational signature partitioned into layers `0..layers`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub relations: Vec<RelationSymbol>,
    pub layers: usize,
}

impl Signature {
    pub fn new(relations: Vec<RelationSymbol>, layers: usize) -> Result<Self> {
        let sig = Signature { relations, layers };
        sig.validate()?;
        Ok(sig)
    }

    /// A signature with a single symmetric-intent binary relation `E0` on layer 0.
    pub fn single_binary() -> Self {
        Signature {
            relations: vec![RelationSymbol {
                name: "E0".into(),
                arity: 2,
                layer: 0,
            }],
            layers: 1,
        }
    }

    /// `k` binary edge relations `E0..E{k-1}`, one per layer.
    pub fn layered_binary(k: usize) -> Self {
        Signature {
            relations: (0..k)
                .map(|i| RelationSymbol {
                    name: format!("E{i}"),
                    arity: 2,
                    layer: i,
                })
                .collect(),
            layers: k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.relations {
            if r.layer >= self.layers {
                return Err(Error::IndexOutOfRange(format!(
                    "relation {} on layer {} but signature has {} layers",
                    r.name, r.layer, self.layers
                )));
            }
            if r.arity == 0 {
                return Err(Error::IndexOutOfRange(format!(
                    "relation {} has arity 0",
                    r.name
                )));
            }
            if !seen.insert(r.name.clone()) {
                return Err(Error::SignatureMismatch(format!(
                    "duplicate relation name {}",
                    r.name
                )));
            }
        }
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Result<&RelationSymbol> {
        self.relations
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::SignatureMismatch(format!("no relation named {name}")))
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.relations.iter().any(|r| r.name == name)
    }

    /// The sub-signature consisting of layers `0..layer_count`.
    pub fn restrict_layers(&self, layer_count: usize) -> Result<Signature> {
        if layer_count > self.layers {
            return Err(Error::IndexOutOfRange(format!(
                "cannot restrict to {layer_count} layers, signature has {}",
                self.layers
            )));
        }
        Ok(Signature {
            relations: self
                .relations
                .iter()
                .filter(|r| r.layer < layer_count)
                .cloned()
                .collect(),
            layers: layer_count,
        })
    }

    /// Relation names in declaration order.
    pub fn names(&self) -> Vec<&str> {
        self.relations.iter().map(|r| r.name.as_str()).collect()
    }
}
