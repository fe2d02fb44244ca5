//! Explicit construction of small boundary stages.
//!
//! The materializer replays the stage recipe bottom-up on full element
//! tables — injection, duplication, expansion — and never consults the lazy
//! atom oracles, so agreement between the two is a genuine cross-check.
//! Stages grow super-exponentially; a budget caps what may be enumerated.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::address::Address;
use crate::classes::metric::signature_of_values;
use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::structure::FinStructure;

use super::engine::{LimitEngine, Rat, RootKind, SplitKind};
use super::oracle::boundary_signature;

/// Largest stage size [`materialize_stage`] will enumerate by default.
pub const DEFAULT_STAGE_CAP: usize = 5000;

/// A fully enumerated boundary stage.
#[derive(Debug, Clone)]
pub struct MaterializedStage {
    /// The stage as a finite structure; elements are labelled by their
    /// address strings.  Metric runs carry the threshold relations.
    pub structure: FinStructure,
    /// Addresses in element order.
    pub addresses: Vec<Address>,
    /// Metric runs: the exact distance matrix behind the relations.
    pub metric: Option<Vec<Vec<Rat>>>,
}

/// Working state: addresses plus either layered adjacency matrices or a
/// distance matrix.
struct Table {
    addrs: Vec<Address>,
    layers: Vec<Vec<Vec<bool>>>,
    dist: Option<Vec<Vec<Rat>>>,
}

impl Table {
    fn len(&self) -> usize {
        self.addrs.len()
    }
}

/// Enumerate the stage-`n` boundary of a run, refusing if any intermediate
/// stage would exceed `cap` elements.
pub fn materialize_stage(
    engine: &LimitEngine,
    n: usize,
    cap: usize,
) -> Result<MaterializedStage> {
    if n > engine.current_stage() {
        return Err(Error::IndexOutOfRange(format!(
            "run stops at stage {}, cannot materialize stage {n}",
            engine.current_stage()
        )));
    }
    if n < 2 {
        return finish(engine, n, Table {
            addrs: Vec::new(),
            layers: vec![Vec::new()],
            dist: engine.class.thresholds().map(|_| Vec::new()),
        });
    }
    let metric = engine.class.thresholds().is_some();
    let mut table = Table {
        addrs: Vec::new(),
        layers: vec![Vec::new()],
        dist: if metric { Some(Vec::new()) } else { None },
    };
    for h in 2..=n {
        let record = engine.stage(h);
        let predicted = (BigUint::from(table.len())
            + BigUint::from(record.new_root_letters.len()))
            * BigUint::from(record.lambda)
            * BigUint::from(record.split.factor());
        if predicted > BigUint::from(cap) {
            return Err(Error::StageBudgetExceeded(format!(
                "stage {h} has {predicted} elements, budget is {cap}"
            )));
        }
        inject_roots(engine, h, &mut table)?;
        duplicate(engine, h, &mut table);
        expand(engine, h, &mut table);
        debug_assert_eq!(BigUint::from(table.len()), record.boundary_count);
    }
    finish(engine, n, table)
}

/// Substages `h.0` and `h.1`: append the stage's new roots.  Mass roots are
/// isolated (at the cap for metric runs); witness roots relate to exactly
/// the anchors their demand names, and metric witnesses take the minimal
/// 1-Lipschitz extension of their demanded distances.
fn inject_roots(engine: &LimitEngine, h: usize, table: &mut Table) -> Result<()> {
    let record = engine.stage(h).clone();
    let index: HashMap<Address, usize> = table
        .addrs
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    for &letter in &record.new_root_letters {
        let info = engine.root(letter).expect("recorded root");
        let rec = match &info.kind {
            RootKind::Mass => None,
            RootKind::Witness(rec) => Some(rec),
        };
        // distances from the new root to everything already present —
        // sequential, so a witness sees the stage's mass root at the cap
        let row = engine.class.thresholds().map(|t| {
            let dist = table.dist.as_ref().unwrap();
            (0..table.addrs.len())
                .map(|x| {
                    let mut best = t.cap();
                    if let Some(rec) = rec {
                        for (anchor, u) in rec.anchors.iter().zip(&rec.values) {
                            let cand = u + &dist[index[anchor]][x];
                            if cand < best {
                                best = cand;
                            }
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        });
        let mut edges = Vec::new();
        if engine.class.thresholds().is_none() {
            if let Some(rec) = rec {
                for (&sign, anchor) in rec.template.signs.iter().zip(&rec.anchors) {
                    if sign {
                        edges.push(index[anchor]);
                    }
                }
            }
        }
        let i = table.addrs.len();
        table.addrs.push(info.birth_word());
        if let Some(dist) = table.dist.as_mut() {
            let mut row = row.unwrap();
            row.push(Rat::zero());
            for (x, d) in row.iter().enumerate().take(i) {
                dist[x].push(d.clone());
            }
            dist.push(row);
        }
        for layer in table.layers.iter_mut() {
            for r in layer.iter_mut() {
                r.push(false);
            }
            layer.push(vec![false; i + 1]);
        }
        for x in edges {
            table.layers[0][i][x] = true;
            table.layers[0][x][i] = true;
        }
    }
    Ok(())
}

/// Substage `h.2`: `Λ_h` copies of every element.  Distinct parents pass
/// their relations to all copy pairs; copies of one element share nothing
/// (and sit at the least threshold in metric runs).
fn duplicate(engine: &LimitEngine, h: usize, table: &mut Table) {
    let lambda = engine.stage(h).lambda as usize;
    let old = table.len();
    let parent = |p: usize| p / lambda;
    let new_addrs: Vec<Address> = table
        .addrs
        .iter()
        .flat_map(|a| (1..=lambda as u64).map(move |j| a.child(j)))
        .collect();
    table.addrs = new_addrs;
    let size = old * lambda;
    for layer in table.layers.iter_mut() {
        let mut next = vec![vec![false; size]; size];
        for (p, row) in next.iter_mut().enumerate() {
            for (q, slot) in row.iter_mut().enumerate() {
                let (i, j) = (parent(p), parent(q));
                *slot = i != j && layer[i][j];
            }
        }
        *layer = next;
    }
    if let Some(dist) = table.dist.as_mut() {
        let s_min = engine.class.thresholds().unwrap().s_min().clone();
        let mut next = vec![vec![Rat::zero(); size]; size];
        for (p, row) in next.iter_mut().enumerate() {
            for (q, slot) in row.iter_mut().enumerate() {
                let (i, j) = (parent(p), parent(q));
                if p == q {
                    continue;
                }
                *slot = if i == j {
                    s_min.clone()
                } else {
                    dist[i][j].clone()
                };
            }
        }
        *dist = next;
    }
}

/// Substage `h.3`: expansion.  Case (a) appends `⌢0` and one empty layer;
/// case (b) splits every element in two, children of one parent separating
/// only in the fresh data (marker layer, exact least threshold) while pairs
/// from distinct parents inherit the old atoms and receive the new codes.
fn expand(engine: &LimitEngine, h: usize, table: &mut Table) {
    let record = engine.stage(h);
    if record.split == SplitKind::Expand {
        let new_addrs: Vec<Address> = table.addrs.iter().map(|a| a.child(0)).collect();
        table.addrs = new_addrs;
        if engine.class.thresholds().is_none() {
            table.layers.push(vec![vec![false; table.len()]; table.len()]);
        }
        return;
    }
    let old = table.len();
    let size = old * 2;
    let parents = std::mem::take(&mut table.addrs);
    table.addrs = parents
        .iter()
        .flat_map(|a| [a.child(0), a.child(1)])
        .collect();
    for layer in table.layers.iter_mut() {
        let mut next = vec![vec![false; size]; size];
        for (p, row) in next.iter_mut().enumerate() {
            for (q, slot) in row.iter_mut().enumerate() {
                let (i, j) = (p / 2, q / 2);
                *slot = i != j && layer[i][j];
            }
        }
        *layer = next;
    }
    match &engine.class {
        AmalgamationClass::Kaleidoscope { .. } => {
            let mut fresh = [
                vec![vec![false; size]; size],
                vec![vec![false; size]; size],
                vec![vec![false; size]; size],
            ];
            for p in 0..size {
                for q in 0..size {
                    let (i, j) = (p / 2, q / 2);
                    if i == j {
                        if p != q {
                            fresh[2][p][q] = true;
                        }
                        continue;
                    }
                    let (a, b) = ((p % 2) as u64, (q % 2) as u64);
                    let (small_bit, large_bit) = if parents[i] < parents[j] {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    fresh[0][p][q] = small_bit == 1;
                    fresh[1][p][q] = large_bit == 1;
                }
            }
            table.layers.extend(fresh);
        }
        AmalgamationClass::Metric { thresholds } => {
            let s_min = thresholds.s_min().clone();
            let dist = table.dist.as_mut().unwrap();
            let mut next = vec![vec![Rat::zero(); size]; size];
            for p in 0..size {
                for q in 0..size {
                    if p == q {
                        continue;
                    }
                    let (i, j) = (p / 2, q / 2);
                    if i == j {
                        next[p][q] = s_min.clone();
                        continue;
                    }
                    let base = &dist[i][j];
                    let (a, b) = ((p % 2) as u64, (q % 2) as u64);
                    let code = if parents[i] < parents[j] {
                        2 * a + b + 1
                    } else {
                        2 * b + a + 1
                    };
                    next[p][q] = base
                        - &record.beta * base * base
                        - &record.eps * Rat::from_integer(code.into());
                }
            }
            *dist = next;
        }
        _ => {}
    }
}

/// Pack the table into a [`FinStructure`] over the boundary signature.
fn finish(engine: &LimitEngine, n: usize, table: Table) -> Result<MaterializedStage> {
    let labels: Vec<String> = table.addrs.iter().map(|a| a.to_string()).collect();
    let structure = match engine.class.thresholds() {
        Some(t) => {
            let sig = signature_of_values(t.values());
            let mut s = FinStructure::new(sig, labels)?;
            let dist = table.dist.as_ref().unwrap();
            for (qi, q) in t.values().iter().enumerate() {
                let name = s.signature.relations[qi].name.clone();
                for i in 0..table.len() {
                    s.add_tuple(&name, &[i, i])?;
                    for j in (i + 1)..table.len() {
                        if dist[i][j] <= *q {
                            s.add_edge(&name, i, j)?;
                        }
                    }
                }
            }
            s
        }
        None => {
            let sig = boundary_signature(engine, n.max(1))?;
            let mut s = FinStructure::new(sig, labels)?;
            for (li, layer) in table.layers.iter().enumerate() {
                let name = format!("E{li}");
                for i in 0..table.len() {
                    for j in (i + 1)..table.len() {
                        if layer[i][j] {
                            s.add_edge(&name, i, j)?;
                        }
                    }
                }
            }
            s
        }
    };
    Ok(MaterializedStage {
        structure,
        addresses: table.addrs,
        metric: table.dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::metric::MetricThresholds;
    use crate::limit::oracle::{address_type, distance};
    use crate::qftype::qf_type_of;
    use crate::schedule::CyclicSchedule;

    fn build(class: AmalgamationClass, n: usize) -> LimitEngine {
        LimitEngine::build(class, CyclicSchedule::default_catalog(), n).unwrap()
    }

    #[test]
    fn stage_sizes_match_records() {
        let e = build(AmalgamationClass::Graphs, 3);
        assert_eq!(materialize_stage(&e, 2, 5000).unwrap().addresses.len(), 5);
        assert_eq!(materialize_stage(&e, 3, 5000).unwrap().addresses.len(), 168);
        let k = build(
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            },
            3,
        );
        assert_eq!(materialize_stage(&k, 2, 5000).unwrap().addresses.len(), 10);
        assert_eq!(materialize_stage(&k, 3, 5000).unwrap().addresses.len(), 576);
    }

    #[test]
    fn budget_is_enforced() {
        let e = build(AmalgamationClass::Graphs, 4);
        let err = materialize_stage(&e, 4, 5000).unwrap_err();
        assert!(matches!(err, Error::StageBudgetExceeded(_)));
        assert!(materialize_stage(&e, 4, 20000).is_ok());
    }

    #[test]
    fn graph_stage_agrees_with_oracle_on_pairs() {
        let e = build(AmalgamationClass::Graphs, 3);
        let m = materialize_stage(&e, 3, 5000).unwrap();
        for i in (0..m.addresses.len()).step_by(7) {
            for j in (0..m.addresses.len()).step_by(11) {
                if i == j {
                    continue;
                }
                let lazy = address_type(&e, &[m.addresses[i].clone(), m.addresses[j].clone()], 3)
                    .unwrap();
                let labels = [m.addresses[i].to_string(), m.addresses[j].to_string()];
                let here = qf_type_of(&m.structure, &labels).unwrap();
                assert_eq!(lazy, here, "pair {i},{j}");
            }
        }
    }

    #[test]
    fn metric_stage_agrees_with_oracle_distances() {
        let e = build(
            AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            },
            3,
        );
        let m = materialize_stage(&e, 3, 5000).unwrap();
        let dist = m.metric.as_ref().unwrap();
        assert_eq!(m.addresses.len(), 528);
        for i in (0..m.addresses.len()).step_by(17) {
            for j in (0..m.addresses.len()).step_by(23) {
                let lazy = distance(&e, &m.addresses[i], &m.addresses[j]);
                assert_eq!(lazy, dist[i][j], "pair {i},{j}");
            }
        }
    }

    #[test]
    fn kaleidoscope_stage_agrees_with_oracle_on_pairs() {
        let k = build(
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            },
            3,
        );
        let m = materialize_stage(&k, 3, 5000).unwrap();
        for i in (0..m.addresses.len()).step_by(31) {
            for j in (0..m.addresses.len()).step_by(37) {
                if i == j {
                    continue;
                }
                let lazy = address_type(&k, &[m.addresses[i].clone(), m.addresses[j].clone()], 3)
                    .unwrap();
                let labels = [m.addresses[i].to_string(), m.addresses[j].to_string()];
                let here = qf_type_of(&m.structure, &labels).unwrap();
                assert_eq!(lazy, here, "pair {i},{j}");
            }
        }
    }

    #[test]
    fn materialized_stages_belong_to_their_class() {
        for class in [
            AmalgamationClass::Graphs,
            AmalgamationClass::TriangleFree,
            AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            },
        ] {
            let e = build(class.clone(), 2);
            let m = materialize_stage(&e, 2, 5000).unwrap();
            assert!(
                class.contains(&m.structure).unwrap(),
                "stage 2 of {} is in its class",
                class.name()
            );
        }
    }
}
