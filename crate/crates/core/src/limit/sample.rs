//! Sampling from the truncated invariant measure of a stage.

use num_bigint::{BigUint, RandBigInt};
use rand::Rng;

use crate::address::Address;
use crate::error::{Error, Result};
use crate::mc::derive_rng;
use crate::structure::FinStructure;

use super::engine::{LimitEngine, SplitKind};
use super::oracle::{address_type, boundary_signature};

/// A sample of `k` independent points from a stage's normalized mass.
#[derive(Debug, Clone)]
pub struct SampledStructure {
    /// The induced structure on the sample, elements labelled `"0".."k-1"`.
    /// If any two points coincide every atom is declared to hold, so the
    /// degenerate event stays visible in the output.
    pub structure: FinStructure,
    /// The sampled addresses in draw order (repeats possible).
    pub addresses: Vec<Address>,
    pub collision_flag: bool,
}

/// Draw one boundary address: a root with probability proportional to its
/// mass, then a uniform duplication letter and split bit per stage.  The
/// chance of each address is exactly its mass over the stage total.
pub fn sample_address<R: Rng>(engine: &LimitEngine, n: usize, rng: &mut R) -> Result<Address> {
    let roots: Vec<_> = engine.roots().filter(|r| r.birth <= n).collect();
    if roots.is_empty() {
        return Err(Error::EmptySource);
    }
    // base masses are dyadic: weight 2^{M − (letter+1)} over denominator 2^M
    let max_letter = roots.iter().map(|r| r.letter).max().unwrap();
    let weights: Vec<BigUint> = roots
        .iter()
        .map(|r| BigUint::from(1u32) << (max_letter - r.letter))
        .collect();
    let total: BigUint = weights.iter().sum();
    let mut pick = rng.gen_biguint_below(&total);
    let mut chosen = roots[0];
    for (&root, w) in roots.iter().zip(&weights) {
        if pick < *w {
            chosen = root;
            break;
        }
        pick -= w;
    }
    let mut addr = chosen.birth_word();
    for h in chosen.birth..=n {
        let stage = engine.stage(h);
        addr = addr.child(rng.gen_range(1..=stage.lambda));
        let bit = if stage.split == SplitKind::Split {
            rng.gen_range(0..2)
        } else {
            0
        };
        addr = addr.child(bit);
    }
    Ok(addr)
}

/// Draw a `k`-point sample and its induced structure.  Deterministic in
/// `(seed, n, k)` for a fixed run.
pub fn sample_invariant(
    engine: &LimitEngine,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<SampledStructure> {
    if n < 2 || n > engine.current_stage() {
        return Err(Error::IndexOutOfRange(format!(
            "sampling needs a built stage with a nonempty boundary, got {n}"
        )));
    }
    let mut rng = derive_rng(seed, 1);
    let addresses: Vec<Address> = (0..k)
        .map(|_| sample_address(engine, n, &mut rng))
        .collect::<Result<_>>()?;
    let collision = (0..k).any(|i| ((i + 1)..k).any(|j| addresses[i] == addresses[j]));
    let labels: Vec<String> = (0..k).map(|i| i.to_string()).collect();
    let sig = boundary_signature(engine, n)?;
    let mut structure = FinStructure::new(sig, labels)?;
    if collision {
        for rel in structure.signature.relations.clone() {
            for i in 0..k {
                for j in 0..k {
                    structure.add_tuple(&rel.name, &[i, j])?;
                }
            }
        }
    } else if k > 0 {
        let q = address_type(engine, &addresses, n)?;
        for (key, holds) in q.atoms() {
            if holds {
                structure.add_tuple(&key.0, &key.1)?;
            }
        }
    }
    Ok(SampledStructure {
        structure,
        addresses,
        collision_flag: collision,
    })
}
