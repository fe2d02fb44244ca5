//! Symbolic staged runs over graph seeds.
//!
//! The lazy engine never materializes a stage.  It witnesses *every* anchor
//! tuple at every stage, which gives closed forms for all the counts:
//!
//! - `|B(n,n)| = |M_{n-1}|^l`  (one witness per ordered anchor tuple),
//! - `alpha_n = 2^(n-1) * |B(n,n)|`,
//! - `|B(n,i)| = |B(n-1,i)| * alpha_n` for `i < n`,
//! - `|M_n| = |B(n,n)| + alpha_n * |M_{n-1}|`.
//!
//! An element is a handle: a core (a seed vertex, or a witness identified by
//! its birth stage and anchor-tuple index) plus one branch coordinate per
//! later stage.  Uniform sampling decodes a big-integer index through the
//! slice sizes, and adjacency is resolved recursively from the handles alone:
//! copies inherit the relations of their parents, a witness relates exactly
//! to its positive anchors, and two copies of one element are never adjacent.
//!
//! Only the plain graph class is supported: its demands are always realizable
//! against any anchor tuple, which the closed-form counts rely on.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha12Rng;

use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::schedule::CyclicSchedule;
use crate::structure::FinStructure;
use crate::toy::{decode_tuple, ToySampler, TupleSample};

/// Closed-form bookkeeping for one lazy stage.
#[derive(Debug, Clone)]
pub struct LazyStage {
    pub n: usize,
    /// Anchor arity of the scheduled demand (0 at stage 0).
    pub arity: usize,
    /// Demand signs (empty at stage 0).
    pub signs: Vec<bool>,
    /// `|B(n,n)|`.
    pub witness_count: BigUint,
    /// Branching factor applied to older elements (0 at stage 0).
    pub alpha: BigUint,
    /// `|M_n|`.
    pub size: BigUint,
    /// `|B(n,i)|` for `i = 0..=n`.
    pub slice_sizes: Vec<BigUint>,
}

/// A symbolic element: its core plus one branch coordinate per stage lived
/// through after birth.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LazyElem {
    /// Birth stage of the underlying core.
    pub core_stage: usize,
    /// Seed vertex index (stage 0) or anchor-tuple index (stage >= 1).
    pub core_index: BigUint,
    /// `coords[h]` is the branch copy taken at stage `core_stage + 1 + h`.
    pub coords: Vec<BigUint>,
}

impl LazyElem {
    /// The stage this handle lives in.
    pub fn stage(&self) -> usize {
        self.core_stage + self.coords.len()
    }

    /// The same element at an earlier stage `m >= core_stage`.
    pub fn truncated(&self, m: usize) -> LazyElem {
        assert!(m >= self.core_stage && m <= self.stage());
        LazyElem {
            core_stage: self.core_stage,
            core_index: self.core_index.clone(),
            coords: self.coords[..m - self.core_stage].to_vec(),
        }
    }
}

/// A lazily evaluated staged run over a graph seed.
#[derive(Debug, Clone)]
pub struct LazyToy {
    schedule: CyclicSchedule,
    seed_labels: Vec<String>,
    seed_adj: Vec<Vec<bool>>,
    stages: Vec<LazyStage>,
}

impl LazyToy {
    /// Start from a nonempty plain graph and precompute `depth` stages.
    pub fn new(seed: &FinStructure, schedule: CyclicSchedule, depth: usize) -> Result<Self> {
        if !AmalgamationClass::Graphs.contains(seed)? {
            return Err(Error::NotInAge("lazy runs need a plain graph seed".into()));
        }
        if seed.signature.layers != 1 {
            return Err(Error::SignatureMismatch(
                "lazy runs use a single-layer graph signature".into(),
            ));
        }
        if seed.size() == 0 {
            return Err(Error::EmptySource);
        }
        let m = seed.size();
        let seed_adj: Vec<Vec<bool>> = (0..m)
            .map(|i| (0..m).map(|j| seed.holds("E0", &[i, j])).collect())
            .collect();
        let stage0 = LazyStage {
            n: 0,
            arity: 0,
            signs: Vec::new(),
            witness_count: BigUint::from(m),
            alpha: BigUint::zero(),
            size: BigUint::from(m),
            slice_sizes: vec![BigUint::from(m)],
        };
        let mut toy = LazyToy {
            schedule,
            seed_labels: seed.elements().to_vec(),
            seed_adj,
            stages: vec![stage0],
        };
        toy.extend_to(depth);
        Ok(toy)
    }

    /// Precompute stage bookkeeping up to `depth`.
    pub fn extend_to(&mut self, depth: usize) {
        while self.stages.len() <= depth {
            let n = self.stages.len();
            let prev = &self.stages[n - 1];
            let template = self.schedule.template_at(n);
            let arity = template.arity();
            let witness_count = prev.size.pow(arity as u32);
            let alpha = (BigUint::one() << (n - 1)) * &witness_count;
            let mut slice_sizes: Vec<BigUint> =
                prev.slice_sizes.iter().map(|s| s * &alpha).collect();
            slice_sizes.push(witness_count.clone());
            let size = &alpha * &prev.size + &witness_count;
            self.stages.push(LazyStage {
                n,
                arity,
                signs: template.signs.clone(),
                witness_count,
                alpha,
                size,
                slice_sizes,
            });
        }
    }

    pub fn stage(&self, n: usize) -> &LazyStage {
        &self.stages[n]
    }

    pub fn size(&self, n: usize) -> &BigUint {
        &self.stages[n].size
    }

    /// Decode the element of stage `n` with uniform index `idx`.
    pub fn element_at(&self, n: usize, idx: &BigUint) -> Result<LazyElem> {
        let stage = &self.stages[n];
        if idx >= &stage.size {
            return Err(Error::IndexOutOfRange(format!(
                "element {idx} of stage {n} (size {})",
                stage.size
            )));
        }
        let mut rest = idx.clone();
        for (i, slice) in stage.slice_sizes.iter().enumerate() {
            if &rest < slice {
                // Peel off branch coordinates, latest stage first.
                let mut coords = vec![BigUint::zero(); n - i];
                for h in (i + 1..=n).rev() {
                    let alpha = &self.stages[h].alpha;
                    coords[h - i - 1] = &rest % alpha;
                    rest /= alpha;
                }
                return Ok(LazyElem {
                    core_stage: i,
                    core_index: rest,
                    coords,
                });
            }
            rest -= slice;
        }
        unreachable!("index below total size lands in a slice");
    }

    /// Inverse of [`element_at`]: the uniform index of a handle in its stage.
    pub fn index_of(&self, elem: &LazyElem) -> BigUint {
        let n = elem.stage();
        let stage = &self.stages[n];
        let mut idx = elem.core_index.clone();
        for (h, c) in elem.coords.iter().enumerate() {
            idx = idx * &self.stages[elem.core_stage + 1 + h].alpha + c;
        }
        for slice in stage.slice_sizes.iter().take(elem.core_stage) {
            idx += slice;
        }
        idx
    }

    /// The anchors of a witness core, as handles in its birth stage minus one.
    pub fn anchors(&self, elem: &LazyElem) -> Result<Option<Vec<LazyElem>>> {
        if elem.core_stage == 0 {
            return Ok(None);
        }
        let stage = &self.stages[elem.core_stage];
        let prev_size = self.stages[elem.core_stage - 1].size.clone();
        let digits = decode_tuple(&elem.core_index, &prev_size, stage.arity);
        let mut out = Vec::with_capacity(stage.arity);
        for d in digits {
            out.push(self.element_at(elem.core_stage - 1, &d)?);
        }
        Ok(Some(out))
    }

    /// Adjacency between two handles of the same stage.
    pub fn adjacent(&self, u: &LazyElem, v: &LazyElem) -> Result<bool> {
        if u.stage() != v.stage() {
            return Err(Error::IndexOutOfRange(
                "adjacency needs handles of one stage".into(),
            ));
        }
        if u == v {
            return Ok(false);
        }
        let (a, b) = if u.core_stage >= v.core_stage {
            (u, v)
        } else {
            (v, u)
        };
        if a.core_stage == b.core_stage {
            if a.core_index == b.core_index {
                // Copies of one element are never adjacent.
                return Ok(false);
            }
            if a.core_stage == 0 {
                let i = a.core_index.to_usize().expect("seed index fits");
                let j = b.core_index.to_usize().expect("seed index fits");
                return Ok(self.seed_adj[i][j]);
            }
            // Distinct witnesses born at one stage relate only to anchors,
            // which live strictly earlier.
            return Ok(false);
        }
        let stage = &self.stages[a.core_stage];
        let anchors = self
            .anchors(a)?
            .expect("core stage above zero has anchors");
        let ancestor = b.truncated(a.core_stage - 1);
        Ok(stage
            .signs
            .iter()
            .zip(anchors.iter())
            .any(|(&sign, anchor)| sign && *anchor == ancestor))
    }

    /// Human-readable label matching the materialized engine's convention.
    pub fn label(&self, elem: &LazyElem) -> String {
        let mut out = if elem.core_stage == 0 {
            let i = elem.core_index.to_usize().expect("seed index fits");
            self.seed_labels[i].clone()
        } else {
            format!("w{}#{}", elem.core_stage, elem.core_index)
        };
        for c in &elem.coords {
            out.push('/');
            out.push_str(&c.to_string());
        }
        out
    }

    /// All elements of stage `n`, in uniform-index order.  Only for stages
    /// whose size fits in memory.
    pub fn enumerate(&self, n: usize) -> Result<Vec<LazyElem>> {
        let size = self.stages[n]
            .size
            .to_usize()
            .ok_or_else(|| Error::StageBudgetExceeded(format!("stage {n} too large to list")))?;
        (0..size)
            .map(|i| self.element_at(n, &BigUint::from(i)))
            .collect()
    }

    pub fn sample_element(&self, n: usize, rng: &mut ChaCha12Rng) -> LazyElem {
        let idx = rng.gen_biguint_below(&self.stages[n].size);
        self.element_at(n, &idx).expect("sampled index in range")
    }
}

impl ToySampler for LazyToy {
    fn max_stage(&self) -> usize {
        self.stages.len() - 1
    }

    fn sample_tuple(&self, n: usize, k: usize, rng: &mut ChaCha12Rng) -> TupleSample {
        let elems: Vec<LazyElem> = (0..k).map(|_| self.sample_element(n, rng)).collect();
        let births = elems.iter().map(|e| e.core_stage).collect();
        let eq = (0..k)
            .map(|i| (0..k).map(|j| elems[i] == elems[j]).collect())
            .collect();
        let adj = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        self.adjacent(&elems[i], &elems[j])
                            .expect("handles share a stage")
                    })
                    .collect()
            })
            .collect();
        TupleSample { births, eq, adj }
    }
}
