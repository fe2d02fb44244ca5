//! Monte-Carlo reports over the staged run: refined-pair decay,
//! exchangeability of sampled tuples, and the sampled extension check.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::address::Address;
use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::mc::{derive_rng, mc_estimate};
use crate::report::{CsvRow, Quantity, Report};

use super::engine::{LimitEngine, RootKind, SplitKind};
use super::oracle::{adjacent, distance_cached, kal_atom, DistCache};
use super::sample::sample_address;

/// The reference refined pair: the leftmost descendants of the first two
/// duplicates that the letter-2 root receives at stage 2.
pub fn eta_target_default(engine: &LimitEngine, g: usize) -> Result<(Address, Address)> {
    if g < 2 || g > engine.current_stage() {
        return Err(Error::IndexOutOfRange(format!(
            "target depth {g} outside 2..={}",
            engine.current_stage()
        )));
    }
    let base = engine
        .root(2)
        .ok_or_else(|| Error::IndexOutOfRange("letter-2 root missing".into()))?
        .birth_word();
    let mut a = base.child(1).child(0);
    let mut b = base.child(2).child(0);
    for _ in 3..=g {
        a = a.child(1).child(0);
        b = b.child(1).child(0);
    }
    Ok((a, b))
}

/// Distinguishing description of an ordered boundary pair.  Equal points map
/// to a reserved tag; otherwise every binary layer (or, in the metric case,
/// the exact distance) goes into the string, so two pairs share a
/// fingerprint exactly when no declared relation separates them.
fn pair_fingerprint(
    engine: &LimitEngine,
    x: &Address,
    y: &Address,
    cache: &mut DistCache,
) -> String {
    if x == y {
        return "EQ".to_string();
    }
    match &engine.class {
        AmalgamationClass::Metric { .. } => distance_cached(engine, x, y, cache).to_string(),
        AmalgamationClass::Kaleidoscope { .. } => {
            let g = x.0.len() / 2;
            let mut s = String::with_capacity(3 * g);
            s.push(if adjacent(engine, x, y) { 'E' } else { 'n' });
            for h in 2..=g {
                for slot in 0..3 {
                    s.push(if kal_atom(engine, x, y, h, slot) { '1' } else { '0' });
                }
            }
            s
        }
        _ => (if adjacent(engine, x, y) { "E" } else { "n" }).to_string(),
    }
}

/// Estimated probability that an independent ordered pair reproduces the
/// reference refined pair, one row per depth `3..=depth`.  The recorded
/// bound `2^{-g} + (3/4)^{g-2}` must dominate the estimate.  Classes whose
/// run never splits have no refining layers to distinguish duplicates, so
/// the request is rejected.
pub fn eta_report(
    engine: &LimitEngine,
    depth: usize,
    trials: u64,
    run_id: &str,
    seed: u64,
) -> Result<Report> {
    if depth < 3 || depth > engine.current_stage() {
        return Err(Error::IndexOutOfRange(format!(
            "eta depth {depth} outside 3..={}",
            engine.current_stage()
        )));
    }
    if (2..=depth).all(|h| engine.stage(h).split == SplitKind::Expand) {
        return Err(Error::NoSplittingDeclared(engine.class.name()));
    }
    let mut report = Report::new();
    let mut rng = derive_rng(seed, 3);
    for g in 3..=depth {
        let (ta, tb) = eta_target_default(engine, g)?;
        let target = pair_fingerprint(engine, &ta, &tb, &mut DistCache::new());
        let est = mc_estimate(&mut rng, trials, |r| {
            let x = sample_address(engine, g, r).expect("validated depth");
            let y = sample_address(engine, g, r).expect("validated depth");
            let mut cache = DistCache::new();
            pair_fingerprint(engine, &x, &y, &mut cache) == target
        });
        let bound = 0.5f64.powi(g as i32) + 0.75f64.powi(g as i32 - 2);
        let type_id = short_type_id(&mut report, "eta_target", &target);
        report.push(CsvRow {
            run_id: run_id.to_string(),
            n: g as u64,
            quantity: Quantity::Eta,
            type_id,
            estimate: est.p_hat,
            sigma: est.sigma,
            bound,
            pass: est.p_hat <= bound,
        });
    }
    Ok(report)
}

/// Hash long fingerprints down to a stable sixteen-digit key, recording the
/// full text in the metadata the first time each key appears.
fn short_type_id(report: &mut Report, kind: &str, full: &str) -> String {
    if full.len() <= 16 {
        return full.to_string();
    }
    let digest = Sha256::digest(full.as_bytes());
    let key: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    report.note(&format!("{kind}_{key}"), full);
    key
}

/// Compares the pair-fingerprint distribution read off positions (0,1) of a
/// sampled `k`-tuple against positions (2,3).  Exchangeability makes the two
/// marginals equal, so every per-fingerprint frequency difference has to sit
/// within four standard errors.
pub fn exchangeability_report(
    engine: &LimitEngine,
    depth: usize,
    k: usize,
    trials: u64,
    run_id: &str,
    seed: u64,
) -> Result<Report> {
    if k < 4 {
        return Err(Error::IndexOutOfRange(
            "exchangeability comparison needs at least four points".into(),
        ));
    }
    if depth < 2 || depth > engine.current_stage() {
        return Err(Error::IndexOutOfRange(format!(
            "depth {depth} outside 2..={}",
            engine.current_stage()
        )));
    }
    let mut rng = derive_rng(seed, 4);
    let mut first: HashMap<String, u64> = HashMap::new();
    let mut second: HashMap<String, u64> = HashMap::new();
    for _ in 0..trials {
        let points: Vec<Address> = (0..k)
            .map(|_| sample_address(engine, depth, &mut rng).expect("validated depth"))
            .collect();
        let mut cache = DistCache::new();
        let a = pair_fingerprint(engine, &points[0], &points[1], &mut cache);
        let b = pair_fingerprint(engine, &points[2], &points[3], &mut cache);
        *first.entry(a).or_default() += 1;
        *second.entry(b).or_default() += 1;
    }
    let mut keys: Vec<String> = first.keys().chain(second.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let mut report = Report::new();
    let t = trials as f64;
    for key in keys {
        let pa = *first.get(&key).unwrap_or(&0) as f64 / t;
        let pb = *second.get(&key).unwrap_or(&0) as f64 / t;
        let sigma = ((pa * (1.0 - pa) + pb * (1.0 - pb)) / t).sqrt();
        let diff = (pa - pb).abs();
        let bound = 4.0 * sigma;
        let type_id = short_type_id(&mut report, "exch_fp", &key);
        report.push(CsvRow {
            run_id: run_id.to_string(),
            n: depth as u64,
            quantity: Quantity::Exch,
            type_id,
            estimate: diff,
            sigma,
            bound,
            pass: diff <= bound || diff == 0.0,
        });
    }
    Ok(report)
}

/// Sampled check that drawn tuples behave like points of a model of every
/// realized demand: whenever the `k` sampled points happen to project onto a
/// demand's anchor tuple, the demanded atoms must hold against the witness
/// root's leftmost descendant.  One row per (depth, demand).
pub fn as_model_report(
    engine: &LimitEngine,
    depths: &[usize],
    k: usize,
    trials: u64,
    run_id: &str,
    seed: u64,
) -> Result<Report> {
    let mut report = Report::new();
    let mut rng = derive_rng(seed, 5);
    for &depth in depths {
        if depth < 2 || depth > engine.current_stage() {
            return Err(Error::IndexOutOfRange(format!(
                "depth {depth} outside 2..={}",
                engine.current_stage()
            )));
        }
        let demands: Vec<_> = engine
            .roots()
            .filter(|r| r.birth <= depth)
            .filter_map(|r| match &r.kind {
                RootKind::Witness(rec) => Some((r.birth, r.birth_word(), rec.clone())),
                RootKind::Mass => None,
            })
            .collect();
        let mut matched = vec![0u64; demands.len()];
        let mut satisfied = vec![0u64; demands.len()];
        for _ in 0..trials {
            let points: Vec<Address> = (0..k)
                .map(|_| sample_address(engine, depth, &mut rng).expect("validated depth"))
                .collect();
            for (d, (birth, word, rec)) in demands.iter().enumerate() {
                let slot_points: Option<Vec<&Address>> = rec
                    .anchors
                    .iter()
                    .map(|anchor| {
                        points
                            .iter()
                            .find(|p| p.0[..2 * (birth - 1)] == anchor.0[..])
                    })
                    .collect();
                let Some(slot_points) = slot_points else {
                    continue;
                };
                matched[d] += 1;
                let mut y = word.clone();
                for _ in *birth..=depth {
                    y = y.child(1).child(0);
                }
                let good = rec
                    .template
                    .signs
                    .iter()
                    .zip(&slot_points)
                    .all(|(&sign, p)| {
                        super::oracle::boundary_atom(engine, &rec.relation, p, &y) == sign
                    });
                if good {
                    satisfied[d] += 1;
                }
            }
        }
        for (d, (birth, _, rec)) in demands.iter().enumerate() {
            let type_id = format!("d{depth}:stage{birth}:{}", rec.template.id());
            let estimate = if matched[d] == 0 {
                report.note(&type_id, "no sampled tuple projected onto the anchors");
                1.0
            } else {
                satisfied[d] as f64 / matched[d] as f64
            };
            let sigma = if matched[d] == 0 {
                0.0
            } else {
                (estimate * (1.0 - estimate) / matched[d] as f64).sqrt()
            };
            report.push(CsvRow {
                run_id: run_id.to_string(),
                n: depth as u64,
                quantity: Quantity::AsModel,
                type_id,
                estimate,
                sigma,
                bound: 0.9,
                pass: estimate >= 0.9,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::metric::MetricThresholds;
    use crate::schedule::CyclicSchedule;

    fn build(class: AmalgamationClass, n: usize) -> LimitEngine {
        LimitEngine::build(class, CyclicSchedule::default_catalog(), n).unwrap()
    }

    #[test]
    fn eta_needs_a_splitting_class() {
        let e = build(AmalgamationClass::Graphs, 4);
        assert!(matches!(
            eta_report(&e, 4, 10, "t", 1),
            Err(Error::NoSplittingDeclared(_))
        ));
    }

    #[test]
    fn eta_decays_under_the_declared_bound() {
        let e = build(
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            },
            5,
        );
        let r = eta_report(&e, 5, 4000, "t", 7).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.all_pass(), "{}", r.to_csv());
        for w in r.rows.windows(2) {
            assert!(
                w[1].estimate <= w[0].estimate + 2.0 * (w[0].sigma + w[1].sigma),
                "estimates fail to decay: {} then {}",
                w[0].estimate,
                w[1].estimate
            );
        }
    }

    #[test]
    fn eta_target_pairs_share_their_fingerprint_class() {
        let e = build(
            AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            },
            4,
        );
        let (a, b) = eta_target_default(&e, 4).unwrap();
        let mut cache = DistCache::new();
        let fp = pair_fingerprint(&e, &a, &b, &mut cache);
        let (a3, b3) = eta_target_default(&e, 3).unwrap();
        let fp3 = pair_fingerprint(&e, &a3, &b3, &mut cache);
        assert_ne!(fp, fp3, "each depth refines the pair's description");
        assert_ne!(fp, "EQ");
    }

    #[test]
    fn exchangeability_sees_identical_marginals() {
        let e = build(AmalgamationClass::Graphs, 4);
        let r = exchangeability_report(&e, 4, 4, 3000, "t", 3).unwrap();
        assert!(r.all_pass(), "{}", r.to_csv());
        assert!(r.rows.iter().any(|row| row.type_id == "E"));
        assert!(r.rows.iter().any(|row| row.type_id == "n"));
    }

    #[test]
    fn long_fingerprints_are_hashed_with_a_note() {
        let e = build(
            AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            },
            3,
        );
        let r = exchangeability_report(&e, 3, 4, 200, "t", 3).unwrap();
        let hashed: Vec<_> = r
            .rows
            .iter()
            .filter(|row| row.type_id.len() == 16 && row.type_id.chars().all(|c| c.is_ascii_hexdigit()))
            .collect();
        assert!(!hashed.is_empty(), "metric distances exceed the raw key width");
        for row in hashed {
            assert!(
                r.metadata.iter().any(|(k, _)| k.ends_with(&row.type_id)),
                "hashed key {} lacks its expansion note",
                row.type_id
            );
        }
    }

    #[test]
    fn sampled_tuples_model_the_realized_demands() {
        let e = build(AmalgamationClass::Graphs, 4);
        let r = as_model_report(&e, &[3, 4], 4, 4000, "t", 9).unwrap();
        assert!(r.all_pass(), "{}", r.to_csv());
        // stage-3 demand rows at both depths, stage-4 demand at depth 4
        assert_eq!(r.rows.len(), 3);
        let informative = r.rows.iter().filter(|row| row.sigma == 0.0 || row.estimate == 1.0);
        assert_eq!(informative.count(), 3);
    }
}
