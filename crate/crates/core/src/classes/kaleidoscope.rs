//! Kaleidoscope layered graphs: splitting of order 2 over a graph-like base.
//!
//! Splitting a non-redundant type `q` on `k` variables duplicates every
//! variable and then adds one fresh layer per ordered 4-tuple of distinct
//! output variables `(a, b, c, d)`. On that layer the pair `(a, b)` receives
//! the first of the two non-equal two-element base structures (an edge) and
//! `(c, d)` the second (a non-edge); everything else is non-adjacent. Any two
//! distinct unordered pairs are then separated by some fresh layer that puts
//! an edge on exactly one of them.

use crate::error::{Error, Result};
use crate::qftype::QfType;
use crate::signature::{RelationSymbol, Signature};

use super::graphs::iterated_duplicate_graph;

/// Name of the fresh layer for the ordered tuple `(a, b, c, d)`.
fn split_layer_name(base_layers: usize, tuple: &[usize]) -> String {
    let parts: Vec<String> = tuple.iter().map(|v| v.to_string()).collect();
    format!("E{}_{}", base_layers, parts.join("_"))
}

/// All ordered `len`-tuples of distinct values below `n`, lexicographic.
fn ordered_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).filter_map(move |v| {
                    if t.contains(&v) {
                        None
                    } else {
                        let mut nt = t.clone();
                        nt.push(v);
                        Some(nt)
                    }
                })
            })
            .collect();
    }
    out
}

pub fn split_type_kaleidoscope(q: &QfType, triangle_free_base: bool) -> Result<(usize, QfType)> {
    if !q.non_redundant {
        return Err(Error::NotDuplicableInAge("type must be non-redundant".into()));
    }
    if q.var_count < 2 {
        return Err(Error::OrderTooSmall {
            need: 2,
            got: q.var_count,
        });
    }
    let doubled = iterated_duplicate_graph(q, &vec![2; q.var_count], triangle_free_base)?;
    let n = doubled.var_count;
    let base_layers = doubled.signature.layers;
    let fresh = ordered_tuples(n, 4);

    let mut relations = doubled.signature.relations.clone();
    for (i, t) in fresh.iter().enumerate() {
        relations.push(RelationSymbol {
            name: split_layer_name(base_layers, t),
            arity: 2,
            layer: base_layers + i,
        });
    }
    let layer_count = base_layers + fresh.len();
    let sig = Signature::new(relations, layer_count)?;

    // fresh layer for (a,b,c,d): a single edge on {a,b}; {c,d} and all other
    // pairs stay non-adjacent, which is the second base structure
    let mut edge_of_layer = std::collections::HashMap::new();
    for t in &fresh {
        edge_of_layer.insert(split_layer_name(base_layers, t), (t[0], t[1]));
    }
    let out = QfType::from_fn(sig, n, true, |rel, vars| {
        if doubled.signature.has_relation(rel) {
            doubled.atom(rel, vars).unwrap()
        } else {
            let &(a, b) = edge_of_layer.get(rel).expect("fresh layer");
            (vars[0] == a && vars[1] == b) || (vars[0] == b && vars[1] == a)
        }
    })?;
    Ok((layer_count, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qftype::qf_type_of;
    use crate::structure::complete_graph;

    #[test]
    fn split_layer_budget() {
        let q = qf_type_of(&complete_graph(2), &["0".into(), "1".into()]).unwrap();
        let (layers, out) = split_type_kaleidoscope(&q, false).unwrap();
        // 1 base layer + 24 ordered 4-tuples from 4 variables
        assert_eq!(layers, 25);
        assert_eq!(out.var_count, 4);
        assert_eq!(out.signature.layers, 25);
    }

    #[test]
    fn split_pairs_distinct_and_restrict() {
        let q = qf_type_of(&complete_graph(2), &["0".into(), "1".into()]).unwrap();
        let (_, out) = split_type_kaleidoscope(&q, false).unwrap();
        let mut pair_types = Vec::new();
        for a in 0..4 {
            for b in (a + 1)..4 {
                pair_types.push(out.restrict_vars(&[a, b]).unwrap());
            }
        }
        for i in 0..pair_types.len() {
            for j in (i + 1)..pair_types.len() {
                assert_ne!(pair_types[i], pair_types[j]);
            }
        }
        for sel in [[0usize, 2], [0, 3], [1, 2], [1, 3]] {
            let r = out
                .restrict_vars(&sel)
                .unwrap()
                .restrict_language(q.signature.layers)
                .unwrap();
            assert_eq!(r, q);
        }
    }

    #[test]
    fn small_type_rejected() {
        let q = qf_type_of(&complete_graph(1), &["0".into()]).unwrap();
        assert!(matches!(
            split_type_kaleidoscope(&q, false),
            Err(Error::OrderTooSmall { need: 2, got: 1 })
        ));
    }
}
