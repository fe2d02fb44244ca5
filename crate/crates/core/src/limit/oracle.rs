//! Lazy atom oracles over boundary addresses.
//!
//! Every atomic fact about a tuple of stage-`n` addresses is computed by
//! structural recursion on the addresses and the engine's scalar records —
//! no stage is ever enumerated.  Graph-like adjacency descends to the stage
//! where one endpoint was born; metric distances replay the per-stage
//! perturbation formula down to the same ground.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::address::Address;
use crate::classes::metric::{relation_name, signature_of_values};
use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::qftype::QfType;
use crate::signature::Signature;

use super::engine::{LimitEngine, Rat, RootKind, SplitKind};

/// Check that `addr` denotes a stage-`n` boundary element of this run:
/// known root, zero padding up to the root's birth, then one in-range
/// duplication letter and split bit per stage.
pub fn validate_address(engine: &LimitEngine, addr: &Address, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidAddress(format!(
            "stage {n} has an empty boundary"
        )));
    }
    if n > engine.current_stage() {
        return Err(Error::InvalidAddress(format!(
            "run stops at stage {}, address checked at {n}",
            engine.current_stage()
        )));
    }
    if addr.len() != 2 * n {
        return Err(Error::InvalidAddress(format!(
            "address {addr} has length {}, boundary {n} needs {}",
            addr.len(),
            2 * n
        )));
    }
    let root = engine
        .root(addr.0[0])
        .ok_or_else(|| Error::InvalidAddress(format!("unknown root letter {}", addr.0[0])))?;
    if root.birth > n {
        return Err(Error::InvalidAddress(format!(
            "root {} is born at stage {}, after boundary {n}",
            root.letter, root.birth
        )));
    }
    for i in 1..(2 * root.birth - 2) {
        if addr.0[i] != 0 {
            return Err(Error::InvalidAddress(format!(
                "address {addr}: position {i} precedes the root's birth and must be 0"
            )));
        }
    }
    for h in root.birth..=n {
        let dup = addr.0[2 * h - 2];
        let split = addr.0[2 * h - 1];
        let stage = engine.stage(h);
        if dup < 1 || dup > stage.lambda {
            return Err(Error::InvalidAddress(format!(
                "address {addr}: duplication letter {dup} at stage {h} is outside 1..={}",
                stage.lambda
            )));
        }
        let max_split = stage.split.factor() - 1;
        if split > max_split {
            return Err(Error::InvalidAddress(format!(
                "address {addr}: split letter {split} at stage {h} exceeds {max_split}"
            )));
        }
    }
    Ok(())
}

/// Base-layer adjacency between two boundary addresses of equal stage.
///
/// Recursion: a pair sharing its stage parent is non-adjacent (duplicates
/// and split halves of one element never connect); otherwise the atom was
/// fixed when the younger endpoint was born — by the witness demand for
/// witness roots, isolated for mass roots — and is inherited downward.
pub fn adjacent(engine: &LimitEngine, x: &Address, y: &Address) -> bool {
    debug_assert_eq!(x.len(), y.len());
    if x == y || x.len() < 4 {
        return false;
    }
    let len = x.len();
    if x.0[..len - 2] == y.0[..len - 2] {
        return false;
    }
    let m = len / 2;
    let bx = engine.root(x.0[0]).expect("validated root").birth;
    let by = engine.root(y.0[0]).expect("validated root").birth;
    if bx == m || by == m {
        let adj_to = |newborn: &Address, other: &Address| -> bool {
            match &engine.root(newborn.0[0]).unwrap().kind {
                RootKind::Mass => false,
                RootKind::Witness(rec) => rec
                    .template
                    .signs
                    .iter()
                    .zip(&rec.anchors)
                    .any(|(&sign, anchor)| sign && anchor.0[..] == other.0[..len - 2]),
            }
        };
        if bx == m {
            adj_to(x, y)
        } else {
            adj_to(y, x)
        }
    } else {
        adjacent(
            engine,
            &Address(x.0[..len - 2].to_vec()),
            &Address(y.0[..len - 2].to_vec()),
        )
    }
}

/// A split-stage layer atom for a Kaleidoscope run: stage `h` contributes
/// three symmetric layers with slots 0 and 1 coding the split bits of the
/// lexicographically smaller and larger parent's child, and slot 2 marking
/// the two halves of one parent.
pub fn kal_atom(engine: &LimitEngine, x: &Address, y: &Address, h: usize, slot: usize) -> bool {
    debug_assert!(slot < 3);
    if x == y {
        return false;
    }
    let bx = engine.root(x.0[0]).expect("validated root").birth;
    let by = engine.root(y.0[0]).expect("validated root").birth;
    if bx > h || by > h {
        return false;
    }
    let u = &x.0[..2 * h];
    let v = &y.0[..2 * h];
    if u == v {
        return false;
    }
    let pu = &u[..2 * h - 1];
    let pv = &v[..2 * h - 1];
    if pu == pv {
        return slot == 2;
    }
    if slot == 2 {
        return false;
    }
    let (a, b) = (u[2 * h - 1], v[2 * h - 1]);
    let (small_bit, large_bit) = if pu < pv { (a, b) } else { (b, a) };
    if slot == 0 {
        small_bit == 1
    } else {
        large_bit == 1
    }
}

/// Memo table for exact distances; one per report run is plenty.
pub type DistCache = HashMap<(Vec<u64>, Vec<u64>), Rat>;

/// Exact distance between two boundary addresses of a metric run.
pub fn distance(engine: &LimitEngine, x: &Address, y: &Address) -> Rat {
    distance_cached(engine, x, y, &mut DistCache::new())
}

/// Exact distance with an external memo table.
///
/// Recursion: the two halves of one split element sit at exactly the least
/// positive threshold; any other pair takes the value of its stage parents
/// (the least threshold for duplicates of one element, the previous
/// boundary's distance otherwise, with newborn roots entering at the cap or
/// by the minimal 1-Lipschitz extension of their demanded distances) and
/// subtracts the stage's quadratic-plus-selection perturbation.
pub fn distance_cached(engine: &LimitEngine, x: &Address, y: &Address, cache: &mut DistCache) -> Rat {
    debug_assert_eq!(x.len(), y.len());
    if x == y {
        return Rat::zero();
    }
    let key = if x <= y {
        (x.0.clone(), y.0.clone())
    } else {
        (y.0.clone(), x.0.clone())
    };
    if let Some(v) = cache.get(&key) {
        return v.clone();
    }
    let t = engine.class.thresholds().expect("metric class");
    let s_min = t.s_min().clone();
    let len = x.len();
    let m = len / 2;
    let val = if x.0[..len - 1] == y.0[..len - 1] {
        // the two halves of one split element: least threshold, exact
        s_min
    } else {
        let base = if x.0[..len - 2] == y.0[..len - 2] {
            s_min
        } else {
            parent_value(engine, m, &x.0[..len - 2], &y.0[..len - 2], cache)
        };
        let stage = engine.stage(m);
        if stage.split == SplitKind::Expand {
            base
        } else {
            let (a, b) = (x.0[len - 1], y.0[len - 1]);
            let code = if x.0[..len - 1] < y.0[..len - 1] {
                2 * a + b + 1
            } else {
                2 * b + a + 1
            };
            &base - &stage.beta * &base * &base
                - &stage.eps * Rat::from_integer(code.into())
        }
    };
    cache.insert(key, val.clone());
    val
}

/// Distance between two stage-`m` parents of length `2m − 2`: previous
/// boundary elements recurse; roots born at stage `m` enter at the cap
/// (mass) or by the minimal 1-Lipschitz extension of their demand (witness).
fn parent_value(
    engine: &LimitEngine,
    m: usize,
    w: &[u64],
    w2: &[u64],
    cache: &mut DistCache,
) -> Rat {
    let t = engine.class.thresholds().expect("metric class");
    let bw = engine.root(w[0]).expect("validated root").birth;
    let bw2 = engine.root(w2[0]).expect("validated root").birth;
    match (bw == m, bw2 == m) {
        (false, false) => distance_cached(
            engine,
            &Address(w.to_vec()),
            &Address(w2.to_vec()),
            cache,
        ),
        (true, true) => t.cap(),
        (true, false) => newborn_value(engine, w[0], w2, cache),
        (false, true) => newborn_value(engine, w2[0], w, cache),
    }
}

fn newborn_value(engine: &LimitEngine, letter: u64, other: &[u64], cache: &mut DistCache) -> Rat {
    let t = engine.class.thresholds().expect("metric class");
    match &engine.root(letter).unwrap().kind {
        RootKind::Mass => t.cap(),
        RootKind::Witness(rec) => {
            let other = Address(other.to_vec());
            let mut best = t.cap();
            for (anchor, u) in rec.anchors.iter().zip(&rec.values) {
                let cand = u + distance_cached(engine, anchor, &other, cache);
                if cand < best {
                    best = cand;
                }
            }
            best
        }
    }
}

/// One atom of the class's demand relation between boundary addresses:
/// base adjacency for graph-like classes, a threshold comparison for metric
/// classes.  Diagonal pairs follow the class convention (never adjacent;
/// within every distance threshold).
pub fn boundary_atom(engine: &LimitEngine, relation: &str, x: &Address, y: &Address) -> bool {
    match engine.class.thresholds() {
        Some(t) => {
            let q = t
                .values()
                .iter()
                .find(|v| relation_name(v) == relation)
                .expect("relation names a threshold");
            if x == y {
                return !q.is_negative();
            }
            distance(engine, x, y) <= *q
        }
        None => {
            debug_assert_eq!(relation, "E0");
            if x == y {
                false
            } else {
                adjacent(engine, x, y)
            }
        }
    }
}

fn kal_layer_count(n: usize) -> usize {
    1 + 3 * (n - 1)
}

/// The boundary-`n` signature of the run's class.
pub fn boundary_signature(engine: &LimitEngine, n: usize) -> Result<Signature> {
    match &engine.class {
        AmalgamationClass::Metric { thresholds } => Ok(signature_of_values(thresholds.values())),
        AmalgamationClass::Kaleidoscope { .. } => Ok(Signature::layered_binary(kal_layer_count(n))),
        _ => Ok(Signature::layered_binary(n)),
    }
}

/// The exact quantifier-free type of a tuple of distinct stage-`n`
/// addresses, over the boundary signature of the run's class.
///
/// Graph-like runs answer the base layer by the adjacency recursion and
/// every expansion layer by its construction rule; metric runs compare
/// exact distances against each threshold.
pub fn address_type(engine: &LimitEngine, addrs: &[Address], n: usize) -> Result<QfType> {
    for addr in addrs {
        validate_address(engine, addr, n)?;
    }
    for i in 0..addrs.len() {
        for j in (i + 1)..addrs.len() {
            if addrs[i] == addrs[j] {
                return Err(Error::InvalidAddress(format!(
                    "addresses must be distinct, {} repeats",
                    addrs[i]
                )));
            }
        }
    }
    let sig = boundary_signature(engine, n)?;
    match &engine.class {
        AmalgamationClass::Metric { thresholds } => {
            let values: HashMap<String, Rat> = thresholds
                .values()
                .iter()
                .map(|v| (relation_name(v), v.clone()))
                .collect();
            let mut cache = DistCache::new();
            QfType::from_fn(sig, addrs.len(), true, |rel, vars| {
                let q = &values[rel];
                if vars[0] == vars[1] {
                    return !q.is_negative();
                }
                distance_cached(engine, &addrs[vars[0]], &addrs[vars[1]], &mut cache) <= *q
            })
        }
        AmalgamationClass::Kaleidoscope { .. } => {
            QfType::from_fn(sig, addrs.len(), true, |rel, vars| {
                if vars[0] == vars[1] {
                    return false;
                }
                let (x, y) = (&addrs[vars[0]], &addrs[vars[1]]);
                let layer: usize = rel[1..].parse().expect("layered relation");
                if layer == 0 {
                    adjacent(engine, x, y)
                } else {
                    let h = 2 + (layer - 1) / 3;
                    kal_atom(engine, x, y, h, (layer - 1) % 3)
                }
            })
        }
        _ => QfType::from_fn(sig, addrs.len(), true, |rel, vars| {
            if vars[0] == vars[1] || rel != "E0" {
                return false;
            }
            adjacent(engine, &addrs[vars[0]], &addrs[vars[1]])
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::metric::MetricThresholds;
    use crate::schedule::CyclicSchedule;

    fn addr(coords: &[u64]) -> Address {
        Address(coords.to_vec())
    }

    fn graphs(n: usize) -> LimitEngine {
        LimitEngine::build(AmalgamationClass::Graphs, CyclicSchedule::default_catalog(), n)
            .unwrap()
    }

    fn kal(n: usize) -> LimitEngine {
        LimitEngine::build(
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            },
            CyclicSchedule::default_catalog(),
            n,
        )
        .unwrap()
    }

    fn metric(n: usize) -> LimitEngine {
        LimitEngine::build(
            AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            },
            CyclicSchedule::default_catalog(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_malformed_addresses() {
        let e = graphs(3);
        assert!(validate_address(&e, &addr(&[2, 0, 1, 0, 1, 0]), 3).is_ok());
        // wrong length
        assert!(validate_address(&e, &addr(&[2, 0, 1, 0]), 3).is_err());
        // unknown root
        assert!(validate_address(&e, &addr(&[9, 0, 1, 0, 1, 0]), 3).is_err());
        // duplication letter 0
        assert!(validate_address(&e, &addr(&[2, 0, 0, 0, 1, 0]), 3).is_err());
        // duplication letter beyond Λ₂ = 5
        assert!(validate_address(&e, &addr(&[2, 0, 6, 0, 1, 0]), 3).is_err());
        // split bit on a non-splitting stage
        assert!(validate_address(&e, &addr(&[2, 0, 1, 1, 1, 0]), 3).is_err());
        // nonzero birth padding for the stage-3 root
        assert!(validate_address(&e, &addr(&[3, 0, 1, 0, 1, 0]), 3).is_err());
        assert!(validate_address(&e, &addr(&[3, 0, 0, 0, 1, 0]), 3).is_ok());
    }

    #[test]
    fn duplicates_and_cousins_stay_non_adjacent() {
        let e = graphs(3);
        // two duplicates of one stage-2 element
        assert!(!adjacent(
            &e,
            &addr(&[2, 0, 1, 0, 1, 0]),
            &addr(&[2, 0, 1, 0, 2, 0])
        ));
        // descendants of two stage-2 duplicates
        assert!(!adjacent(
            &e,
            &addr(&[2, 0, 1, 0, 1, 0]),
            &addr(&[2, 0, 2, 0, 1, 0])
        ));
        // the stage-3 mass root is isolated
        assert!(!adjacent(
            &e,
            &addr(&[3, 0, 0, 0, 1, 0]),
            &addr(&[2, 0, 1, 0, 1, 0])
        ));
    }

    #[test]
    fn witness_meets_exactly_its_anchor_subtrees() {
        let e = graphs(3);
        let w = e.root(1).unwrap();
        let rec = match &w.kind {
            RootKind::Witness(rec) => rec,
            _ => panic!("root 1 is the stage-3 witness"),
        };
        assert_eq!(rec.anchors.len(), 2);
        assert_eq!(rec.anchors[0], addr(&[2, 0, 1, 0]));
        assert_eq!(rec.anchors[1], addr(&[2, 0, 2, 0]));
        // adjacent to every boundary descendant of both anchors
        for dup in 1..=2u64 {
            for d in 1..=5u64 {
                assert!(adjacent(
                    &e,
                    &addr(&[1, 0, 0, 0, 1, 0]),
                    &addr(&[2, 0, dup, 0, d, 0])
                ));
            }
        }
        // not adjacent to descendants of any other stage-2 duplicate
        assert!(!adjacent(
            &e,
            &addr(&[1, 0, 0, 0, 1, 0]),
            &addr(&[2, 0, 3, 0, 1, 0])
        ));
    }

    #[test]
    fn adjacency_is_inherited_downward() {
        let e = graphs(4);
        // the stage-3 witness–anchor edge persists at boundary 4
        assert!(adjacent(
            &e,
            &addr(&[1, 0, 0, 0, 1, 0, 1, 0]),
            &addr(&[2, 0, 1, 0, 5, 0, 3, 0])
        ));
        assert!(!adjacent(
            &e,
            &addr(&[1, 0, 0, 0, 1, 0, 1, 0]),
            &addr(&[2, 0, 3, 0, 1, 0, 1, 0])
        ));
    }

    #[test]
    fn kaleidoscope_split_layers_separate_children() {
        let e = kal(3);
        // stage-2 layers are E1, E2, E3; halves of one parent carry only E3
        let x = addr(&[2, 0, 1, 0, 1, 0]);
        let sib = addr(&[2, 0, 1, 1, 1, 0]);
        assert!(!kal_atom(&e, &x, &sib, 2, 0));
        assert!(!kal_atom(&e, &x, &sib, 2, 1));
        assert!(kal_atom(&e, &x, &sib, 2, 2));
        // cross pair: parents 2/0/1 < 2/0/2, bits (0, 1) → slots (0, 1) = (f, t)
        let y = addr(&[2, 0, 2, 1, 1, 0]);
        assert!(!kal_atom(&e, &x, &y, 2, 0));
        assert!(kal_atom(&e, &x, &y, 2, 1));
        assert!(!kal_atom(&e, &x, &y, 2, 2));
        // symmetric in argument order
        assert_eq!(kal_atom(&e, &y, &x, 2, 1), kal_atom(&e, &x, &y, 2, 1));
        // stage-3 roots carry no stage-2 atoms
        let m = addr(&[3, 0, 0, 0, 1, 0]);
        for slot in 0..3 {
            assert!(!kal_atom(&e, &x, &m, 2, slot));
        }
        // distinct parents at stage 3 with bits (0, 0)
        assert!(!kal_atom(&e, &x, &y, 3, 0));
        assert!(!kal_atom(&e, &x, &y, 3, 1));
        assert!(!kal_atom(&e, &x, &y, 3, 2));
    }

    #[test]
    fn four_codes_per_parent_pair_are_distinct() {
        let e = kal(2);
        let code = |x: &Address, y: &Address| {
            (0..3)
                .map(|slot| kal_atom(&e, x, y, 2, slot))
                .collect::<Vec<_>>()
        };
        let mut seen = std::collections::HashSet::new();
        for a in 0..2u64 {
            for b in 0..2u64 {
                let x = addr(&[2, 0, 1, a]);
                let y = addr(&[2, 0, 2, b]);
                assert!(seen.insert(code(&x, &y)), "codes must differ");
            }
        }
    }

    #[test]
    fn metric_distances_ground_exactly() {
        let e = metric(2);
        let s = e.stage(2);
        let half = Rat::new(1.into(), 2.into());
        // halves of one split element: exactly the least threshold
        assert_eq!(
            distance(&e, &addr(&[2, 0, 1, 0]), &addr(&[2, 0, 1, 1])),
            half
        );
        // duplicates: least threshold minus the stage perturbation, code 1
        let d = distance(&e, &addr(&[2, 0, 1, 0]), &addr(&[2, 0, 2, 0]));
        let expect = &half - &s.beta * &half * &half - &s.eps;
        assert_eq!(d, expect);
        assert!(d < half);
        // symmetry
        assert_eq!(d, distance(&e, &addr(&[2, 0, 2, 0]), &addr(&[2, 0, 1, 0])));
        // four distinct values across the four child selections
        let mut vals = std::collections::HashSet::new();
        for a in 0..2u64 {
            for b in 0..2u64 {
                vals.insert(distance(&e, &addr(&[2, 0, 1, a]), &addr(&[2, 0, 2, b])));
            }
        }
        assert_eq!(vals.len(), 4);
    }

    #[test]
    fn metric_newborns_enter_at_cap_or_demand() {
        let e = metric(3);
        let cap = Rat::from_integer(4.into());
        // stage-3 mass root vs an old element: cap, then one perturbation
        // (both split bits 0, larger parent first, so the code is 1)
        let d = distance(&e, &addr(&[3, 0, 0, 0, 1, 0]), &addr(&[2, 0, 1, 0, 1, 0]));
        let s = e.stage(3);
        let expect = &cap - &s.beta * &cap * &cap - &s.eps;
        assert_eq!(d, expect);
        assert!(d < cap && d > Rat::from_integer(3.into()));
    }

    #[test]
    fn metric_triangle_holds_on_spot_checks() {
        let e = metric(4);
        let pts = [
            addr(&[2, 0, 1, 0, 1, 0, 1, 0]),
            addr(&[2, 0, 2, 1, 1, 0, 1, 0]),
            addr(&[3, 0, 0, 0, 2, 1, 1, 0]),
            addr(&[4, 0, 0, 0, 0, 0, 1, 0]),
            addr(&[5, 0, 0, 0, 0, 0, 2, 1]),
        ];
        let mut cache = DistCache::new();
        for a in &pts {
            for b in &pts {
                for c in &pts {
                    let ab = distance_cached(&e, a, b, &mut cache);
                    let bc = distance_cached(&e, b, c, &mut cache);
                    let ac = distance_cached(&e, a, c, &mut cache);
                    assert!(ac <= ab + bc, "triangle violated at {a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn metric_witness_realizes_demanded_distances() {
        let e = metric(4);
        let rec = match &e.root(5).unwrap().kind {
            RootKind::Witness(rec) => rec.clone(),
            _ => panic!("root 5 is the stage-4 witness"),
        };
        // the demand asks for one distance over p_max and one at p_max
        assert_eq!(rec.template.signs, vec![false, true]);
        let p_max = Rat::from_integer(2.into());
        let witness_parent = e.root(5).unwrap().birth_word();
        for (anchor, value) in rec.anchors.iter().zip(&rec.values) {
            let mut cache = DistCache::new();
            let got = parent_value(&e, 4, &witness_parent.0, &anchor.0, &mut cache);
            assert_eq!(got, *value);
        }
        assert!(rec.values[0] > p_max);
        assert_eq!(rec.values[1], p_max);
    }

    #[test]
    fn address_type_matches_oracles() {
        let e = graphs(3);
        let tuple = [addr(&[1, 0, 0, 0, 1, 0]), addr(&[2, 0, 1, 0, 1, 0])];
        let q = address_type(&e, &tuple, 3).unwrap();
        assert!(q.atom("E0", &[0, 1]).unwrap());
        assert!(q.atom("E0", &[1, 0]).unwrap());
        assert!(!q.atom("E0", &[0, 0]).unwrap());
        assert!(!q.atom("E1", &[0, 1]).unwrap());
        assert!(!q.atom("E2", &[0, 1]).unwrap());
        assert!(q.non_redundant);
        // repeated addresses are refused
        assert!(address_type(&e, &[tuple[0].clone(), tuple[0].clone()], 3).is_err());
    }

    #[test]
    fn metric_address_type_uses_thresholds() {
        let e = metric(2);
        let tuple = [addr(&[2, 0, 1, 0]), addr(&[2, 0, 1, 1])];
        let q = address_type(&e, &tuple, 2).unwrap();
        // distance exactly 1/2: inside thresholds 1/2, 1, 2, outside 0
        assert!(!q.atom("d_0", &[0, 1]).unwrap());
        assert!(q.atom("d_1/2", &[0, 1]).unwrap());
        assert!(q.atom("d_1", &[0, 1]).unwrap());
        assert!(q.atom("d_2", &[0, 1]).unwrap());
        // diagonal: distance 0 is within every threshold
        assert!(q.atom("d_0", &[0, 0]).unwrap());
    }
}
