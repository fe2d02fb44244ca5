//! Exact and Monte Carlo full-homomorphism densities.
//!
//! The density of `F` in `G` is the fraction of all maps `V(F) -> V(G)`
//! (injective or not) that preserve and reflect every relation: for each
//! relation symbol and every tuple over `V(F)`, the tuple holds in `F` exactly
//! when its image holds in `G`. For irreflexive symmetric signatures this is
//! the induced-pattern density.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mc::McEstimate;
use crate::qftype::var_tuples;
use crate::structure::FinStructure;

pub type Density = BigRational;

const ENUMERATION_BUDGET: f64 = 1e8;

fn check_pair(f: &FinStructure, g: &FinStructure) -> Result<()> {
    if f.signature != g.signature {
        return Err(Error::SignatureMismatch(
            "density arguments have different signatures".into(),
        ));
    }
    if g.size() == 0 {
        return Err(Error::EmptyTarget);
    }
    Ok(())
}

/// All atom slots of `F`: relation name, variable tuple, truth value in `F`.
fn atom_table(f: &FinStructure) -> Vec<(String, Vec<usize>, bool)> {
    let mut out = Vec::new();
    for rel in &f.signature.relations {
        for tuple in var_tuples(f.size(), rel.arity) {
            let holds = f.holds(&rel.name, &tuple);
            out.push((rel.name.clone(), tuple, holds));
        }
    }
    out
}

fn is_full_hom(table: &[(String, Vec<usize>, bool)], g: &FinStructure, map: &[usize]) -> bool {
    table.iter().all(|(rel, tuple, want)| {
        let image: Vec<usize> = tuple.iter().map(|&v| map[v]).collect();
        g.holds(rel, &image) == *want
    })
}

/// Exact full-homomorphism density of `F` in `G` by total enumeration.
pub fn full_hom_density(f: &FinStructure, g: &FinStructure) -> Result<Density> {
    check_pair(f, g)?;
    let n = f.size();
    let m = g.size();
    if (m as f64).powi(n as i32) > ENUMERATION_BUDGET {
        return Err(Error::StageBudgetExceeded(format!(
            "density enumeration over {m}^{n} maps"
        )));
    }
    let table = atom_table(f);
    let mut hits: u64 = 0;
    let mut total: u64 = 0;
    let mut map = vec![0usize; n];
    loop {
        total += 1;
        if is_full_hom(&table, g, &map) {
            hits += 1;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)));
            }
            map[pos] += 1;
            if map[pos] < m {
                break;
            }
            map[pos] = 0;
            pos += 1;
        }
    }
}

/// Monte Carlo estimate of the same density from uniform random maps.
pub fn mc_full_hom_density(
    f: &FinStructure,
    g: &FinStructure,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_pair(f, g)?;
    let table = atom_table(f);
    let n = f.size();
    let m = g.size();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    let mut map = vec![0usize; n];
    for _ in 0..trials {
        for slot in map.iter_mut() {
            *slot = rng.gen_range(0..m);
        }
        if is_full_hom(&table, g, &map) {
            successes += 1;
        }
    }
    Ok(McEstimate::from_counts(trials, successes))
}
