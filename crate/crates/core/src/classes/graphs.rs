//! Graph-flavoured ages: graphs and triangle-free graphs, possibly layered.
//!
//! A layered graph structure interprets every relation as a symmetric
//! irreflexive binary relation; membership requires each layer reduct to lie
//! in the base age (all graphs, or all triangle-free graphs).

use crate::error::{Error, Result};
use crate::formula::{Demand, DemandSlot};
use crate::qftype::QfType;
use crate::structure::FinStructure;

/// Is every layer a symmetric irreflexive binary relation, and (if
/// `triangle_free`) does every layer avoid K3?
pub fn contains_layered_graph(s: &FinStructure, triangle_free: bool) -> Result<bool> {
    for rel in &s.signature.relations {
        if rel.arity != 2 {
            return Err(Error::SignatureMismatch(format!(
                "relation {} must be binary",
                rel.name
            )));
        }
        for t in s.tuples(&rel.name) {
            if t[0] == t[1] {
                return Ok(false);
            }
            if !s.holds(&rel.name, &[t[1], t[0]]) {
                return Ok(false);
            }
        }
        if triangle_free {
            let n = s.size();
            for a in 0..n {
                for b in (a + 1)..n {
                    if !s.holds(&rel.name, &[a, b]) {
                        continue;
                    }
                    for c in (b + 1)..n {
                        if s.holds(&rel.name, &[a, c]) && s.holds(&rel.name, &[b, c]) {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Free amalgam: union of both structures over the shared part, no cross
/// atoms. The caller guarantees disjoint output labels.
pub fn strong_amalgam_graph(
    m: &FinStructure,
    n: &FinStructure,
    over: &[String],
    out_labels_m: &[String],
    out_labels_n: &[String],
) -> Result<FinStructure> {
    if m.signature != n.signature {
        return Err(Error::SignatureMismatch(
            "amalgamation arguments have different signatures".into(),
        ));
    }
    let mut s = FinStructure::new(m.signature.clone(), Vec::new())?;
    for l in out_labels_m {
        s.add_element(l.clone())?;
    }
    // position of each n-element in the output
    let mut n_index_to_out = std::collections::BTreeMap::new();
    for l in over {
        n_index_to_out.insert(n.element_index(l)?, m.element_index(l)?);
    }
    let mut fresh_pos = 0usize;
    for (ni, _) in n.elements().iter().enumerate() {
        if let std::collections::btree_map::Entry::Vacant(e) = n_index_to_out.entry(ni) {
            let pos = s.add_element(out_labels_n[fresh_pos].clone())?;
            e.insert(pos);
            fresh_pos += 1;
        }
    }
    for rel in &m.signature.relations {
        for t in m.tuples(&rel.name) {
            s.add_tuple(&rel.name, t)?;
        }
        for t in n.tuples(&rel.name) {
            let mapped: Vec<usize> = t.iter().map(|&i| n_index_to_out[&i]).collect();
            s.add_tuple(&rel.name, &mapped)?;
        }
    }
    Ok(s)
}

/// One fresh element carrying exactly the demanded atoms against the anchor
/// tuple; non-adjacent to everything else on every layer.
pub fn canonical_witness_graph(
    s: &FinStructure,
    tuple: &[String],
    demand: &Demand,
    fresh_label: &str,
    triangle_free: bool,
) -> Result<FinStructure> {
    let anchors: Vec<usize> = tuple
        .iter()
        .map(|l| s.element_index(l))
        .collect::<Result<_>>()?;
    if anchors.len() != demand.anchor_arity {
        return Err(Error::IndexOutOfRange(format!(
            "demand anchor arity {} but {} anchors given",
            demand.anchor_arity,
            anchors.len()
        )));
    }
    let mut out = s.clone();
    let y = out.add_element(fresh_label.to_string())?;
    for atom in &demand.atoms {
        out.signature.relation(&atom.relation)?;
        if !atom.positive {
            continue; // negative atoms coincide with the default policy
        }
        let mapped: Vec<usize> = atom
            .slots
            .iter()
            .map(|sl| match sl {
                DemandSlot::Anchor(i) => anchors[*i],
                DemandSlot::Witness => y,
            })
            .collect();
        if mapped.len() != 2 {
            return Err(Error::UnsupportedFormula(
                "graph demands must use binary atoms".into(),
            ));
        }
        out.add_tuple(&atom.relation, &mapped)?;
        out.add_tuple(&atom.relation, &[mapped[1], mapped[0]])?;
    }
    // demanded negative atoms must actually fail (a positive demand on the
    // same pair would contradict them)
    let mut assignment = anchors.clone();
    assignment.push(y);
    if !demand.body().eval(&out, &assignment)? {
        return Err(Error::UnsatisfiableDemand(
            "contradictory demand atoms on one pair".into(),
        ));
    }
    if !contains_layered_graph(&out, triangle_free)? {
        return Err(Error::UnsatisfiableDemand(
            "demanded witness leaves the age".into(),
        ));
    }
    Ok(out)
}

fn check_type_in_age(q: &QfType, triangle_free: bool) -> Result<()> {
    for rel in &q.signature.relations {
        if rel.arity != 2 {
            return Err(Error::SignatureMismatch(format!(
                "relation {} must be binary",
                rel.name
            )));
        }
        for a in 0..q.var_count {
            if q.atom(&rel.name, &[a, a])? {
                return Err(Error::NotInAge(format!("loop on variable {a}")));
            }
            for b in 0..q.var_count {
                if q.atom(&rel.name, &[a, b])? != q.atom(&rel.name, &[b, a])? {
                    return Err(Error::NotInAge(format!(
                        "asymmetric atoms on ({a},{b})"
                    )));
                }
            }
        }
        if triangle_free {
            for a in 0..q.var_count {
                for b in (a + 1)..q.var_count {
                    for c in (b + 1)..q.var_count {
                        if q.atom(&rel.name, &[a, b])?
                            && q.atom(&rel.name, &[a, c])?
                            && q.atom(&rel.name, &[b, c])?
                        {
                            return Err(Error::NotInAge(format!(
                                "triangle on ({a},{b},{c})"
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Duplicate variables with the free-amalgam policy: copies of the same
/// variable are non-adjacent on every layer, cross atoms copy the original.
pub fn iterated_duplicate_graph(
    q: &QfType,
    multiplicities: &[usize],
    triangle_free: bool,
) -> Result<QfType> {
    if multiplicities.len() != q.var_count {
        return Err(Error::IndexOutOfRange(format!(
            "{} multiplicities for {} variables",
            multiplicities.len(),
            q.var_count
        )));
    }
    if multiplicities.iter().any(|&m| m == 0) {
        return Err(Error::IndexOutOfRange(
            "multiplicities must be positive".into(),
        ));
    }
    if !q.non_redundant {
        return Err(Error::NotDuplicableInAge("type must be non-redundant".into()));
    }
    check_type_in_age(q, triangle_free)?;
    let mut owner = Vec::new();
    for (i, &c) in multiplicities.iter().enumerate() {
        for _ in 0..c {
            owner.push(i);
        }
    }
    QfType::from_fn(q.signature.clone(), owner.len(), true, |rel, vars| {
        let (a, b) = (owner[vars[0]], owner[vars[1]]);
        if a == b {
            false
        } else {
            q.atom(rel, &[a, b]).unwrap()
        }
    })
}

/// Extend the signature by fresh layers whose atoms are all false.
pub fn extend_language_graph(q: &QfType, target: &crate::signature::Signature) -> Result<QfType> {
    let current_layers = q.signature.layers;
    if target.restrict_layers(current_layers)? != q.signature {
        return Err(Error::SignatureMismatch(
            "type signature is not a layer prefix of the target".into(),
        ));
    }
    QfType::from_fn(target.clone(), q.var_count, q.non_redundant, |rel, vars| {
        if q.signature.has_relation(rel) {
            q.atom(rel, vars).unwrap()
        } else {
            false
        }
    })
}
