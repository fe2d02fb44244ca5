//! Staged finite constructions over a seed structure.
//!
//! Starting from a finite structure `M_0`, each stage `n` first adjoins one
//! witness per scheduled anchor tuple (or a single generic fresh element when
//! no tuple needs one), then branches every older element into `alpha_n`
//! interchangeable copies, where `alpha_n = 2^(n-1) * |B(n,n)|` and `B(n,n)`
//! is the set of elements born at stage `n`.  Relations are inherited: copies
//! of adjacent elements stay adjacent, copies of one element relate to each
//! other by the class duplication policy, and witnesses relate only to their
//! positive anchors.
//!
//! Two engines share this contract: the materialized engine in this module
//! builds each stage as an explicit [`FinStructure`], while [`lazy::LazyToy`]
//! represents elements symbolically and scales to stages whose sizes only fit
//! in big integers.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::schedule::CyclicSchedule;
use crate::structure::FinStructure;

pub mod lazy;
pub mod reports;

/// Default cap on materialized stage sizes.
pub const DEFAULT_ELEMENT_CAP: usize = 5_000;

/// Configuration shared by staged runs.
#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub class: AmalgamationClass,
    pub schedule: CyclicSchedule,
    /// Witness every anchor tuple, not just the tuples that lack a witness.
    pub witness_all: bool,
    /// Materialized stages above this size abort with `StageBudgetExceeded`.
    pub element_cap: usize,
}

impl ToyConfig {
    pub fn new(class: AmalgamationClass, schedule: CyclicSchedule) -> Self {
        ToyConfig {
            class,
            schedule,
            witness_all: false,
            element_cap: DEFAULT_ELEMENT_CAP,
        }
    }
}

/// The relation used to instantiate scheduled demands: the first base-layer
/// relation of the class (the single edge relation for graph-like classes,
/// the tightest distance threshold for metric classes).
pub fn base_demand_relation(class: &AmalgamationClass) -> Result<String> {
    let sig = class.signature_at(class.base_layers())?;
    Ok(sig.relations[0].name.clone())
}

/// One materialized stage.
#[derive(Debug, Clone)]
pub struct ToyStage {
    pub n: usize,
    pub structure: FinStructure,
    /// `slices[i]` lists the indices of elements born at stage `i <= n`.
    pub slices: Vec<Vec<usize>>,
    /// Birth stage of each element.
    pub births: Vec<usize>,
    /// Parent index in stage `n-1` for branched copies; elements born at this
    /// stage map to their own index.
    pub projection: Vec<usize>,
    /// Number of elements born at this stage (`|B(n,n)|`).
    pub witness_count: usize,
    /// Branching factor applied to older elements (0 at stage 0).
    pub alpha: BigUint,
}

/// A materialized staged run.
#[derive(Debug, Clone)]
pub struct ToyRun {
    pub config: ToyConfig,
    pub stages: Vec<ToyStage>,
}

/// Decode tuple index `idx` over base `m` into `len` digits, most significant
/// first.  This fixes the enumeration order of anchor tuples shared by the
/// materialized and lazy engines.
pub(crate) fn decode_tuple(idx: &BigUint, m: &BigUint, len: usize) -> Vec<BigUint> {
    let mut digits = vec![BigUint::zero(); len];
    let mut rest = idx.clone();
    for d in digits.iter_mut().rev() {
        *d = &rest % m;
        rest /= m;
    }
    digits
}

impl ToyRun {
    /// Start a run from `seed`, which must belong to the configured class.
    pub fn new(seed: FinStructure, config: ToyConfig) -> Result<Self> {
        if !config.class.contains(&seed)? {
            return Err(Error::NotInAge("seed structure".into()));
        }
        if config.witness_all
            && (!matches!(config.class, AmalgamationClass::Graphs)
                || seed.signature.layers != 1)
        {
            // Witness-all adjoins an element adjacent to the positive-slot
            // anchors of *every* tuple, which only plain graphs always admit.
            return Err(Error::SignatureMismatch(
                "witness-all staged runs support single-layer plain graphs only".into(),
            ));
        }
        for r in &seed.signature.relations {
            if r.arity != 2 {
                return Err(Error::SignatureMismatch(format!(
                    "staged runs need a binary signature, found {} of arity {}",
                    r.name, r.arity
                )));
            }
        }
        let size = seed.size();
        let stage0 = ToyStage {
            n: 0,
            structure: seed,
            slices: vec![(0..size).collect()],
            births: vec![0; size],
            projection: (0..size).collect(),
            witness_count: size,
            alpha: BigUint::zero(),
        };
        Ok(ToyRun {
            config,
            stages: vec![stage0],
        })
    }

    pub fn current_stage(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stage(&self, n: usize) -> &ToyStage {
        &self.stages[n]
    }

    /// Build stages up to and including `n`.
    pub fn run_to(&mut self, n: usize) -> Result<()> {
        while self.current_stage() < n {
            self.advance()?;
        }
        Ok(())
    }

    /// Build the next stage.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.current_stage() + 1;
        let prev = &self.stages[n - 1];
        let template = self.config.schedule.template_at(n);
        let arity = template.arity();
        let relation = base_demand_relation(&self.config.class)?;
        let demand = template.demand(&relation);

        let m = prev.structure.size();
        let m_big = BigUint::from(m);

        // Anchor tuples, in tuple-index order (most significant digit first).
        let mut anchors: Vec<Vec<usize>> = Vec::new();
        if m > 0 {
            let total = m_big.pow(arity as u32);
            let cap_big = BigUint::from(self.config.element_cap);
            if total > cap_big {
                return Err(Error::StageBudgetExceeded(format!(
                    "stage {n} needs {total} anchor tuples, cap {}",
                    self.config.element_cap
                )));
            }
            let total: usize = (&total).try_into().expect("tuple count fits usize");
            for idx in 0..total {
                let digits = decode_tuple(&BigUint::from(idx), &m_big, arity);
                let tuple: Vec<usize> = digits
                    .iter()
                    .map(|d| usize::try_from(d).expect("digit fits usize"))
                    .collect();
                if self.config.witness_all || !demand.has_witness(&prev.structure, &tuple)? {
                    anchors.push(tuple);
                }
            }
        }

        // Adjoin witnesses (or a single generic fresh element).
        let mut grown = prev.structure.clone();
        let mut witness_labels: Vec<String> = Vec::new();
        if anchors.is_empty() {
            let label = format!("w{n}#0");
            grown = add_generic_element(&self.config.class, &grown, &label)?;
            witness_labels.push(label);
        } else if self.config.witness_all {
            // One fresh element per tuple, adjacent exactly to the anchors in
            // positive demand slots.  This matches the lazy engine and stays
            // well defined on tuples whose instantiated demand is
            // contradictory (repeated anchors under mixed signs).
            for tuple in &anchors {
                let target = format!("w{n}#{}", witness_labels.len());
                let mut labels: Vec<String> = grown.elements().to_vec();
                labels.push(target.clone());
                let fresh = labels.len() - 1;
                let mut next = FinStructure::new(grown.signature.clone(), labels)?;
                let existing: Vec<Vec<usize>> = grown.tuples(&relation).cloned().collect();
                for t in existing {
                    next.add_tuple(&relation, &t)?;
                }
                for (slot, &sign) in template.signs.iter().enumerate() {
                    if sign {
                        next.add_edge(&relation, fresh, tuple[slot])?;
                    }
                }
                grown = next;
                witness_labels.push(target);
            }
        } else {
            for tuple in &anchors {
                let labels: Vec<String> = tuple
                    .iter()
                    .map(|&i| grown.elements()[i].clone())
                    .collect();
                let before: Vec<String> = grown.elements().to_vec();
                grown = self.config.class.canonical_witness(&grown, &labels, &demand)?;
                let fresh = grown
                    .elements()
                    .iter()
                    .find(|l| !before.contains(l))
                    .expect("witness adds one element")
                    .clone();
                let target = format!("w{n}#{}", witness_labels.len());
                grown = rename_element(&grown, &fresh, &target)?;
                witness_labels.push(target);
            }
        }
        let witness_count = witness_labels.len();

        // Branching factor and budget.
        let alpha_big = (BigUint::one() << (n - 1)) * BigUint::from(witness_count);
        let cap = self.config.element_cap;
        let final_size_big = &alpha_big * &m_big + BigUint::from(witness_count);
        if final_size_big > BigUint::from(cap) {
            return Err(Error::StageBudgetExceeded(format!(
                "stage {n} would have {final_size_big} elements, cap {cap}"
            )));
        }
        let alpha: usize = (&alpha_big).try_into().expect("alpha fits usize");
        let final_size: usize = (&final_size_big).try_into().expect("size fits usize");

        // Final element order: copies in (parent, copy) order, then witnesses.
        let mut labels: Vec<String> = Vec::with_capacity(final_size);
        for e in 0..m {
            let parent = &prev.structure.elements()[e];
            for c in 0..alpha {
                labels.push(format!("{parent}/{c}"));
            }
        }
        labels.extend(witness_labels.iter().cloned());
        let mut out = FinStructure::new(prev.structure.signature.clone(), labels)?;

        // Index maps between the grown structure (old + witnesses) and `out`.
        // Old element e -> copies e*alpha..(e+1)*alpha; witness k -> m*alpha+k.
        let same_owner_all = self.config.class.thresholds().is_some();
        let relations: Vec<String> = out
            .signature
            .relations
            .iter()
            .map(|r| r.name.clone())
            .collect();
        for rel in &relations {
            for u in 0..final_size {
                for v in 0..final_size {
                    let gu = grown_index(u, m, alpha);
                    let gv = grown_index(v, m, alpha);
                    let holds = if u == v || gu != gv {
                        grown.holds(rel, &[gu, gv])
                    } else {
                        // Two copies of one parent.
                        same_owner_all
                    };
                    if holds {
                        out.add_tuple(rel, &[u, v])?;
                    }
                }
            }
        }

        // Bookkeeping.
        let mut slices: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let mut births = vec![0usize; final_size];
        let mut projection = vec![0usize; final_size];
        for e in 0..m {
            for c in 0..alpha {
                let idx = e * alpha + c;
                births[idx] = prev.births[e];
                projection[idx] = e;
                slices[prev.births[e]].push(idx);
            }
        }
        for k in 0..witness_count {
            let idx = m * alpha + k;
            births[idx] = n;
            projection[idx] = idx;
            slices[n].push(idx);
        }

        self.stages.push(ToyStage {
            n,
            structure: out,
            slices,
            births,
            projection,
            witness_count,
            alpha: alpha_big,
        });
        Ok(())
    }
}

/// Map a final-stage element index to its index in the pre-branching
/// structure (old elements followed by witnesses).
fn grown_index(idx: usize, old_count: usize, alpha: usize) -> usize {
    let branched = old_count * alpha;
    if idx < branched {
        idx / alpha
    } else {
        old_count + (idx - branched)
    }
}

/// Add one fresh element with the class's default relations to everything:
/// no edges for graph-like classes, the distance cap for metric classes.
fn add_generic_element(
    class: &AmalgamationClass,
    s: &FinStructure,
    label: &str,
) -> Result<FinStructure> {
    let mut labels: Vec<String> = s.elements().to_vec();
    labels.push(label.to_string());
    let fresh = labels.len() - 1;
    let mut out = FinStructure::new(s.signature.clone(), labels)?;
    let relations: Vec<String> = out
        .signature
        .relations
        .iter()
        .map(|r| r.name.clone())
        .collect();
    for rel in &relations {
        let existing: Vec<Vec<usize>> = s.tuples(rel).cloned().collect();
        for t in existing {
            out.add_tuple(rel, &t)?;
        }
        if class.thresholds().is_some() {
            // Distances d(x,x)=0 satisfy every threshold.
            out.add_tuple(rel, &[fresh, fresh])?;
        }
    }
    if !class.contains(&out)? {
        return Err(Error::NotInAge("generic fresh element".into()));
    }
    Ok(out)
}

/// Rename one element, keeping indices and relations unchanged.
fn rename_element(s: &FinStructure, from: &str, to: &str) -> Result<FinStructure> {
    let labels: Vec<String> = s
        .elements()
        .iter()
        .map(|l| {
            if l == from {
                to.to_string()
            } else {
                l.clone()
            }
        })
        .collect();
    let mut out = FinStructure::new(s.signature.clone(), labels)?;
    let relations: Vec<String> = s
        .signature
        .relations
        .iter()
        .map(|r| r.name.clone())
        .collect();
    for rel in &relations {
        let existing: Vec<Vec<usize>> = s.tuples(rel).cloned().collect();
        for t in existing {
            out.add_tuple(rel, &t)?;
        }
    }
    Ok(out)
}

/// One sampled tuple: per-coordinate birth stages, handle-equality and
/// adjacency matrices.
#[derive(Debug, Clone)]
pub struct TupleSample {
    pub births: Vec<usize>,
    pub eq: Vec<Vec<bool>>,
    pub adj: Vec<Vec<bool>>,
}

impl TupleSample {
    pub fn all_distinct(&self) -> bool {
        let k = self.births.len();
        (0..k).all(|i| (i + 1..k).all(|j| !self.eq[i][j]))
    }
}

/// Uniform tuple sampling from a staged run.
pub trait ToySampler {
    /// Largest stage available for sampling.
    fn max_stage(&self) -> usize;
    /// Sample `k` independent uniform elements of stage `n`.
    fn sample_tuple(&self, n: usize, k: usize, rng: &mut ChaCha12Rng) -> TupleSample;
}

impl ToySampler for ToyRun {
    fn max_stage(&self) -> usize {
        self.current_stage()
    }

    fn sample_tuple(&self, n: usize, k: usize, rng: &mut ChaCha12Rng) -> TupleSample {
        let stage = &self.stages[n];
        let size = stage.structure.size();
        assert!(size > 0, "stage {n} is empty");
        let relation =
            base_demand_relation(&self.config.class).expect("class has a base relation");
        let idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..size)).collect();
        let births = idx.iter().map(|&i| stage.births[i]).collect();
        let eq = (0..k)
            .map(|i| (0..k).map(|j| idx[i] == idx[j]).collect())
            .collect();
        let adj = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| stage.structure.holds(&relation, &[idx[i], idx[j]]))
                    .collect()
            })
            .collect();
        TupleSample { births, eq, adj }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::DemandTemplate;
    use crate::structure::complete_graph;
    use num_traits::ToPrimitive;

    fn unary_schedule() -> CyclicSchedule {
        CyclicSchedule::new(vec![
            DemandTemplate::new(vec![true]),
            DemandTemplate::new(vec![false]),
        ])
    }

    #[test]
    fn filtered_unary_run_sizes() {
        let config = ToyConfig::new(AmalgamationClass::Graphs, unary_schedule());
        let mut run = ToyRun::new(complete_graph(2), config).unwrap();
        run.run_to(4).unwrap();
        let sizes: Vec<usize> = run.stages.iter().map(|s| s.structure.size()).collect();
        assert_eq!(sizes, vec![2, 3, 7, 87, 697]);
        // Transfer identity: |M_n| = |B(n,n)| + alpha_n * |M_{n-1}|.
        for n in 1..=4 {
            let alpha = run.stages[n].alpha.to_usize().unwrap();
            assert_eq!(
                run.stages[n].structure.size(),
                run.stages[n].witness_count + alpha * run.stages[n - 1].structure.size()
            );
        }
        // Slice sizes multiply by alpha each stage.
        for n in 1..=4 {
            let alpha = run.stages[n].alpha.to_usize().unwrap();
            for i in 0..n {
                assert_eq!(
                    run.stages[n].slices[i].len(),
                    run.stages[n - 1].slices[i].len() * alpha
                );
            }
            assert_eq!(run.stages[n].slices[n].len(), run.stages[n].witness_count);
        }
    }

    #[test]
    fn witness_all_run_sizes() {
        let mut config = ToyConfig::new(AmalgamationClass::Graphs, unary_schedule());
        config.witness_all = true;
        let mut run = ToyRun::new(complete_graph(2), config).unwrap();
        run.run_to(2).unwrap();
        let sizes: Vec<usize> = run.stages.iter().map(|s| s.structure.size()).collect();
        assert_eq!(sizes, vec![2, 6, 78]);
    }

    #[test]
    fn witnesses_satisfy_their_demands() {
        // Default catalog stage 3 is the binary (+,+) demand over graphs.
        let config = ToyConfig::new(
            AmalgamationClass::Graphs,
            CyclicSchedule::default_catalog(),
        );
        let mut run = ToyRun::new(complete_graph(2), config).unwrap();
        run.run_to(3).unwrap();
        let relation = "E0";
        for n in 1..=3 {
            let stage = run.stage(n);
            let prev = run.stage(n - 1);
            let template = run.config.schedule.template_at(n);
            let demand = template.demand(relation);
            // Every anchor tuple of the previous stage has a witness now:
            // each previous element survives as its copy 0.
            let m = prev.structure.size();
            for idx in 0..m.pow(template.arity() as u32) {
                let digits = decode_tuple(
                    &BigUint::from(idx),
                    &BigUint::from(m),
                    template.arity(),
                );
                let copies: Vec<usize> = digits
                    .iter()
                    .map(|d| {
                        let parent = usize::try_from(d).unwrap();
                        let label = format!("{}/0", prev.structure.elements()[parent]);
                        stage.structure.element_index(&label).unwrap()
                    })
                    .collect();
                assert!(
                    demand.has_witness(&stage.structure, &copies).unwrap(),
                    "stage {n} tuple {idx} lacks a witness"
                );
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut config = ToyConfig::new(
            AmalgamationClass::Graphs,
            CyclicSchedule::default_catalog(),
        );
        config.element_cap = 50;
        let mut run = ToyRun::new(complete_graph(2), config).unwrap();
        let err = run.run_to(8).unwrap_err();
        assert!(matches!(err, Error::StageBudgetExceeded { .. }));
    }

    #[test]
    fn metric_stage_stays_metric() {
        let class = AmalgamationClass::from_name("metric").unwrap();
        let t = class.thresholds().unwrap().clone();
        let space = crate::classes::metric::RationalMetricSpace::new(
            2,
            [((0, 1), crate::classes::metric::rat(1, 1))]
                .into_iter()
                .collect(),
        )
        .unwrap();
        let seed = crate::classes::metric::metric_to_structure(&space, &t);
        let config = ToyConfig::new(class.clone(), unary_schedule());
        let mut run = ToyRun::new(seed, config).unwrap();
        run.run_to(2).unwrap();
        for stage in &run.stages {
            assert!(class.contains(&stage.structure).unwrap());
        }
    }

    #[test]
    fn sampler_matches_structure() {
        let config = ToyConfig::new(
            AmalgamationClass::Graphs,
            CyclicSchedule::default_catalog(),
        );
        let mut run = ToyRun::new(complete_graph(3), config).unwrap();
        run.run_to(2).unwrap();
        let mut rng = crate::mc::derive_rng(7, 0);
        for _ in 0..50 {
            let s = run.sample_tuple(2, 3, &mut rng);
            assert_eq!(s.births.len(), 3);
            for i in 0..3 {
                assert!(s.eq[i][i]);
                assert!(!s.adj[i][i]);
                for j in 0..3 {
                    assert_eq!(s.adj[i][j], s.adj[j][i]);
                }
            }
        }
    }
}
