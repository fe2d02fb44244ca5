//! Sampled diagnostics over staged runs: type-frequency drift, coverage
//! rates, the tail-product lemma, and small sampling utilities.

use std::collections::BTreeMap;

use num_bigint::RandBigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mc::{derive_rng, McEstimate};
use crate::qftype::{var_tuples, QfType};
use crate::report::{CsvRow, Quantity, Report};
use crate::schedule::CyclicSchedule;
use crate::signature::Signature;
use crate::structure::FinStructure;
use crate::toy::{ToySampler, TupleSample};

/// All non-redundant graph types on `1..=max_arity` distinct vertices over a
/// single edge relation.  Ids look like `l3_m5`: arity 3, edge mask 5 over
/// the pairs (0,1), (0,2), (1,2) in that bit order.
pub fn graph_type_catalog(max_arity: usize) -> Vec<(String, QfType)> {
    let sig = Signature::single_binary();
    let mut out = Vec::new();
    for arity in 1..=max_arity {
        let pairs: Vec<(usize, usize)> = (0..arity)
            .flat_map(|i| (i + 1..arity).map(move |j| (i, j)))
            .collect();
        for mask in 0..(1u32 << pairs.len()) {
            let q = QfType::from_fn(sig.clone(), arity, true, |_, tuple| {
                let (u, v) = (tuple[0], tuple[1]);
                if u == v {
                    return false;
                }
                let key = (u.min(v), u.max(v));
                let bit = pairs.iter().position(|&p| p == key).expect("pair listed");
                mask >> bit & 1 == 1
            })
            .expect("catalog type over its own signature");
            out.push((format!("l{arity}_m{mask}"), q));
        }
    }
    out
}

/// The catalog id matching a sampled tuple, or `None` when coordinates
/// repeat (catalog types describe distinct vertices only).
pub fn classify(sample: &TupleSample) -> Option<String> {
    if !sample.all_distinct() {
        return None;
    }
    let arity = sample.births.len();
    let pairs: Vec<(usize, usize)> = (0..arity)
        .flat_map(|i| (i + 1..arity).map(move |j| (i, j)))
        .collect();
    let mut mask = 0u32;
    for (bit, &(i, j)) in pairs.iter().enumerate() {
        if sample.adj[i][j] {
            mask |= 1 << bit;
        }
    }
    Some(format!("l{arity}_m{mask}"))
}

/// Estimate each catalog type's frequency at stages `1..=up_to_stage` and
/// report the drift between consecutive stages.  The row at stage `n`
/// compares stages `n-1` and `n` against the bound
/// `arity * 2^-(n-1) + 3 * (sigma_{n-1} + sigma_n)`.
pub fn delta_report<S: ToySampler>(
    sampler: &S,
    max_arity: usize,
    up_to_stage: usize,
    trials: u64,
    seed: u64,
    run_id: &str,
) -> Report {
    let catalog = graph_type_catalog(max_arity);
    let mut report = Report::new();
    report.note("delta_trials", &trials.to_string());
    for arity in 1..=max_arity {
        // counts[n - 1] maps type id -> hits at stage n.
        let mut counts: Vec<BTreeMap<String, u64>> = Vec::new();
        for n in 1..=up_to_stage {
            let mut rng = derive_rng(seed, (arity as u64) << 32 | n as u64);
            let mut c = BTreeMap::new();
            for _ in 0..trials {
                let s = sampler.sample_tuple(n, arity, &mut rng);
                if let Some(id) = classify(&s) {
                    *c.entry(id).or_insert(0) += 1;
                }
            }
            counts.push(c);
        }
        for (id, _) in catalog.iter().filter(|(i, _)| i.starts_with(&format!("l{arity}_"))) {
            for n in 2..=up_to_stage {
                let prev = McEstimate::from_counts(
                    trials,
                    *counts[n - 2].get(id).unwrap_or(&0),
                );
                let cur = McEstimate::from_counts(
                    trials,
                    *counts[n - 1].get(id).unwrap_or(&0),
                );
                let delta = (prev.p_hat - cur.p_hat).abs();
                let sigma = prev.sigma + cur.sigma;
                let bound =
                    arity as f64 * 2f64.powi(-((n - 1) as i32)) + 3.0 * sigma;
                report.push(CsvRow {
                    run_id: run_id.to_string(),
                    n: n as u64,
                    quantity: Quantity::Delta,
                    type_id: id.clone(),
                    estimate: delta,
                    sigma,
                    bound,
                    pass: delta <= bound,
                });
            }
        }
    }
    report
}

/// Estimate coverage rates: the chance that a sampled anchor tuple for the
/// stage-`j` demand was fully born before that demand's latest occurrence,
/// so the witness adjoined there still covers it.  Each row checks the lower
/// bound `(1 - l * 2^-(z-1))^2 * F_hat - 3 * sigma`, where `z` is the latest
/// occurrence of demand `j` up to the sampled stage and `F_hat` estimates
/// the chance of pairwise-distinct coordinates.
pub fn gamma_report<S: ToySampler>(
    sampler: &S,
    schedule: &CyclicSchedule,
    stages: &[usize],
    j_max: usize,
    trials: u64,
    seed: u64,
    run_id: &str,
) -> Report {
    let mut report = Report::new();
    report.note("gamma_estimator", "birth-coverage underestimate");
    report.note("gamma_trials", &trials.to_string());
    for j in 1..=j_max {
        let arity = schedule.template_at(j).arity();
        let id = schedule.id_at(j);
        for &n in stages.iter().filter(|&&n| n >= j) {
            let z = schedule.last_occurrence(n, j);
            let mut rng = derive_rng(seed, (j as u64) << 32 | n as u64);
            let mut covered = 0u64;
            let mut distinct = 0u64;
            for _ in 0..trials {
                let s = sampler.sample_tuple(n, arity, &mut rng);
                if s.births.iter().all(|&b| b + 1 <= z) {
                    covered += 1;
                }
                if s.all_distinct() {
                    distinct += 1;
                }
            }
            let gamma = McEstimate::from_counts(trials, covered);
            let f_hat = McEstimate::from_counts(trials, distinct);
            let coef = (1.0 - arity as f64 * 2f64.powi(-((z - 1) as i32))).max(0.0);
            let coef = coef * coef;
            let bound = coef * f_hat.p_hat;
            let sigma = (gamma.sigma.powi(2) + (coef * f_hat.sigma).powi(2)).sqrt();
            report.push(CsvRow {
                run_id: run_id.to_string(),
                n: n as u64,
                quantity: Quantity::Gamma,
                type_id: format!("{id}@{j}"),
                estimate: gamma.p_hat,
                sigma,
                bound,
                pass: gamma.p_hat >= bound - 3.0 * sigma,
            });
        }
    }
    report
}

/// Verdict of the tail-product check for one constant.
#[derive(Debug, Clone, Copy)]
pub struct CombLemmaCheck {
    pub c: u32,
    /// Minimal start index with every factor positive and the bound valid.
    pub k: u32,
    /// `prod_{i >= k} (1 - c * 2^-i)`, accumulated until the tail moves the
    /// partial product by less than 1e-12.
    pub product: f64,
    /// `(1 - c * 2^-k)^2`.
    pub rhs: f64,
    pub pass: bool,
    /// Number of factors actually multiplied.
    pub terms: u32,
}

/// Check `prod_{i >= k} (1 - c * 2^-i) >= (1 - c * 2^-k)^2` at the minimal
/// `k` keeping every factor positive (ascending if the bound fails there).
pub fn very_comb_lemma(c: u32) -> CombLemmaCheck {
    assert!(c >= 1, "constant must be positive");
    let mut k = 32 - c.leading_zeros(); // smallest k with 2^k > c
    loop {
        let mut product = 1.0f64;
        let mut terms = 0u32;
        let mut i = k;
        loop {
            let f = c as f64 * 2f64.powi(-(i as i32));
            if f < 1e-12 {
                break;
            }
            product *= 1.0 - f;
            terms += 1;
            i += 1;
        }
        let base = 1.0 - c as f64 * 2f64.powi(-(k as i32));
        let rhs = base * base;
        if product >= rhs || k >= 64 {
            return CombLemmaCheck {
                c,
                k,
                product,
                rhs,
                pass: product >= rhs,
                terms,
            };
        }
        k += 1;
    }
}

/// Pull back `g` along `k` independent uniform vertex choices: the sampled
/// structure on elements `0..k` holding exactly the relations its image
/// holds in `g`.
pub fn sample_gng(g: &FinStructure, k: usize, seed: u64) -> Result<FinStructure> {
    if g.size() == 0 {
        return Err(Error::EmptySource);
    }
    let mut rng = derive_rng(seed, 0);
    let map: Vec<usize> = (0..k).map(|_| rng.gen_range(0..g.size())).collect();
    let labels = (0..k).map(|i| i.to_string()).collect();
    let mut out = FinStructure::new(g.signature.clone(), labels)?;
    let relations: Vec<(String, usize)> = g
        .signature
        .relations
        .iter()
        .map(|r| (r.name.clone(), r.arity))
        .collect();
    for (rel, arity) in relations {
        for tuple in var_tuples(k, arity) {
            let image: Vec<usize> = tuple.iter().map(|&v| map[v]).collect();
            if g.holds(&rel, &image) {
                out.add_tuple(&rel, &tuple)?;
            }
        }
    }
    Ok(out)
}

/// A random graph on `k` vertices with exact rational edge probability `p`.
pub fn erdos_renyi(k: usize, p: &BigRational, seed: u64) -> Result<FinStructure> {
    if p.is_negative() || p > &BigRational::from_integer(1.into()) {
        return Err(Error::Parse(format!("edge probability {p} outside [0, 1]")));
    }
    let numer = p.numer().to_biguint().expect("nonnegative numerator");
    let denom = p.denom().to_biguint().expect("positive denominator");
    let mut rng = derive_rng(seed, 0);
    let mut g = crate::structure::empty_graph(k);
    for i in 0..k {
        for j in (i + 1)..k {
            if rng.gen_biguint_below(&denom) < numer {
                g.add_edge("E0", i, j)?;
            }
        }
    }
    Ok(g)
}
