//! Finite relational structures with labelled elements.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::Signature;

/// A finite structure: a signature, a labelled element list, and for each
/// relation symbol the set of tuples (stored as element indices) on which it
/// holds. Tuples may repeat elements; relations are not implicitly symmetric —
/// symmetric relations store both orientations explicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinStructure {
    pub signature: Signature,
    elements: Vec<String>,
    relations: BTreeMap<String, BTreeSet<Vec<usize>>>,
}

#[derive(Serialize, Deserialize)]
struct FinStructureJson {
    signature: Signature,
    elements: Vec<String>,
    relations: BTreeMap<String, Vec<Vec<String>>>,
}

impl FinStructure {
    pub fn new(signature: Signature, elements: Vec<String>) -> Result<Self> {
        signature.validate()?;
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert(e.clone()) {
                return Err(Error::Parse(format!("duplicate element label {e}")));
            }
        }
        let relations = signature
            .relations
            .iter()
            .map(|r| (r.name.clone(), BTreeSet::new()))
            .collect();
        Ok(FinStructure {
            signature,
            elements,
            relations,
        })
    }

    /// Structure over `n` elements labelled `"0".."n-1"`.
    pub fn with_numbered_elements(signature: Signature, n: usize) -> Result<Self> {
        Self::new(signature, (0..n).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn element_index(&self, label: &str) -> Result<usize> {
        self.elements
            .iter()
            .position(|e| e == label)
            .ok_or_else(|| Error::UnknownElement(label.to_string()))
    }

    pub fn add_element(&mut self, label: impl Into<String>) -> Result<usize> {
        let label = label.into();
        if self.elements.contains(&label) {
            return Err(Error::Parse(format!("duplicate element label {label}")));
        }
        self.elements.push(label);
        Ok(self.elements.len() - 1)
    }

    pub fn add_tuple(&mut self, relation: &str, tuple: &[usize]) -> Result<()> {
        let sym = self.signature.relation(relation)?;
        if tuple.len() != sym.arity {
            return Err(Error::IndexOutOfRange(format!(
                "relation {relation} has arity {}, got tuple of length {}",
                sym.arity,
                tuple.len()
            )));
        }
        for &i in tuple {
            if i >= self.elements.len() {
                return Err(Error::IndexOutOfRange(format!(
                    "element index {i} out of range (size {})",
                    self.elements.len()
                )));
            }
        }
        self.relations
            .get_mut(relation)
            .unwrap()
            .insert(tuple.to_vec());
        Ok(())
    }

    pub fn remove_tuple(&mut self, relation: &str, tuple: &[usize]) -> Result<()> {
        self.signature.relation(relation)?;
        self.relations.get_mut(relation).unwrap().remove(tuple);
        Ok(())
    }

    /// Add both orientations of a binary relation.
    pub fn add_edge(&mut self, relation: &str, i: usize, j: usize) -> Result<()> {
        self.add_tuple(relation, &[i, j])?;
        self.add_tuple(relation, &[j, i])
    }

    pub fn holds(&self, relation: &str, tuple: &[usize]) -> bool {
        self.relations
            .get(relation)
            .map(|set| set.contains(tuple))
            .unwrap_or(false)
    }

    pub fn tuples(&self, relation: &str) -> impl Iterator<Item = &Vec<usize>> {
        self.relations.get(relation).into_iter().flatten()
    }

    pub fn tuple_count(&self, relation: &str) -> usize {
        self.relations.get(relation).map(|s| s.len()).unwrap_or(0)
    }

    /// The induced substructure on the given labels, elements in the given order.
    pub fn induced_substructure(&self, labels: &[String]) -> Result<FinStructure> {
        let mut index_of_old = BTreeMap::new();
        for (new_idx, label) in labels.iter().enumerate() {
            let old = self.element_index(label)?;
            if index_of_old.insert(old, new_idx).is_some() {
                return Err(Error::Parse(format!("repeated element label {label}")));
            }
        }
        let mut out = FinStructure::new(self.signature.clone(), labels.to_vec())?;
        for (name, set) in &self.relations {
            for tuple in set {
                if let Some(mapped) = tuple
                    .iter()
                    .map(|i| index_of_old.get(i).copied())
                    .collect::<Option<Vec<usize>>>()
                {
                    out.relations.get_mut(name).unwrap().insert(mapped);
                }
            }
        }
        Ok(out)
    }

    /// The reduct to the first `layer_count` layers of the signature.
    pub fn restrict_language(&self, layer_count: usize) -> Result<FinStructure> {
        let sig = self.signature.restrict_layers(layer_count)?;
        let mut out = FinStructure::new(sig, self.elements.clone())?;
        for (name, set) in &self.relations {
            if out.signature.has_relation(name) {
                out.relations.insert(name.clone(), set.clone());
            }
        }
        Ok(out)
    }

    /// Canonical JSON value: relation tuple lists sorted, labels as written.
    pub fn to_json(&self) -> serde_json::Value {
        let rels = self
            .relations
            .iter()
            .map(|(name, set)| {
                (
                    name.clone(),
                    set.iter()
                        .map(|t| {
                            t.iter()
                                .map(|&i| self.elements[i].clone())
                                .collect::<Vec<String>>()
                        })
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        serde_json::to_value(FinStructureJson {
            signature: self.signature.clone(),
            elements: self.elements.clone(),
            relations: rels,
        })
        .expect("structure serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<FinStructure> {
        let raw: FinStructureJson = serde_json::from_value(value.clone())?;
        let mut out = FinStructure::new(raw.signature, raw.elements)?;
        for (name, tuples) in raw.relations {
            for tuple in tuples {
                let idx: Vec<usize> = tuple
                    .iter()
                    .map(|l| out.element_index(l))
                    .collect::<Result<_>>()?;
                out.add_tuple(&name, &idx)?;
            }
        }
        Ok(out)
    }

    /// Relabel elements as `"0".."n-1"` preserving order.
    pub fn renumbered(&self) -> FinStructure {
        let mut out = FinStructure::with_numbered_elements(self.signature.clone(), self.size())
            .expect("renumbering cannot fail");
        out.relations = self.relations.clone();
        out
    }
}

/// The complete graph on `n` numbered vertices over the `E0` signature.
pub fn complete_graph(n: usize) -> FinStructure {
    let mut g = FinStructure::with_numbered_elements(Signature::single_binary(), n).unwrap();
    for i in 0..n {
        for j in (i + 1)..n {
            g.add_edge("E0", i, j).unwrap();
        }
    }
    g
}

/// The path with `edge_count` edges on `edge_count + 1` numbered vertices.
pub fn path_graph(edge_count: usize) -> FinStructure {
    let mut g =
        FinStructure::with_numbered_elements(Signature::single_binary(), edge_count + 1).unwrap();
    for i in 0..edge_count {
        g.add_edge("E0", i, i + 1).unwrap();
    }
    g
}

/// The empty graph on `n` numbered vertices.
pub fn empty_graph(n: usize) -> FinStructure {
    FinStructure::with_numbered_elements(Signature::single_binary(), n).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_query() {
        let mut g = empty_graph(3);
        g.add_edge("E0", 0, 1).unwrap();
        assert!(g.holds("E0", &[0, 1]));
        assert!(g.holds("E0", &[1, 0]));
        assert!(!g.holds("E0", &[0, 2]));
        assert_eq!(g.tuple_count("E0"), 2);
    }

    #[test]
    fn induced_substructure_keeps_edges() {
        let k3 = complete_graph(3);
        let sub = k3
            .induced_substructure(&["0".into(), "2".into()])
            .unwrap();
        assert_eq!(sub.size(), 2);
        assert!(sub.holds("E0", &[0, 1]));
    }

    #[test]
    fn induced_substructure_unknown_label() {
        let k3 = complete_graph(3);
        let err = k3.induced_substructure(&["7".into()]).unwrap_err();
        assert!(matches!(err, Error::UnknownElement(_)));
    }

    #[test]
    fn json_roundtrip() {
        let mut g = path_graph(2);
        g.add_edge("E0", 0, 2).unwrap();
        let v = g.to_json();
        let back = FinStructure::from_json(&v).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.to_json(), v);
    }

    #[test]
    fn restrict_language_drops_layers() {
        let sig = Signature::layered_binary(2);
        let mut s = FinStructure::with_numbered_elements(sig, 2).unwrap();
        s.add_edge("E0", 0, 1).unwrap();
        s.add_edge("E1", 0, 1).unwrap();
        let r = s.restrict_language(1).unwrap();
        assert!(r.holds("E0", &[0, 1]));
        assert!(!r.signature.has_relation("E1"));
    }
}
