//! Stage records, root bookkeeping, and the four substage operations.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::json;
use std::collections::BTreeMap;

use crate::address::Address;
use crate::classes::metric::{relation_name, MetricThresholds};
use crate::classes::AmalgamationClass;
use crate::error::{Error, Result};
use crate::schedule::{CyclicSchedule, DemandTemplate};

pub type Rat = BigRational;

fn rat_u(n: u64) -> Rat {
    Rat::from_integer(n.into())
}

fn pow2_inv(exp: u64) -> Rat {
    Rat::new(BigUint::one().into(), (BigUint::one() << exp).into())
}

/// The base mass `m*(k) = 2^{−(k+1)}` of the root letter `k`.
pub fn base_mass(letter: u64) -> Rat {
    pow2_inv(letter + 1)
}

/// Smallest box count `Λ` such that `n` balls dropped uniformly and
/// independently into `Λ` boxes collide with probability strictly below
/// `2^{−n}`.  The collision probability `1 − ∏_{i<n}(1 − i/Λ)` is evaluated
/// in exact integer arithmetic: the condition is
/// `2^n · ∏_{i<n}(Λ − i) > (2^n − 1) · Λ^n`.
pub fn lambda_min(n: usize) -> u64 {
    assert!(n >= 2, "lambda_min is defined for stages n >= 2");
    let ok = |lam: u64| -> bool {
        if lam < n as u64 {
            return false;
        }
        let lam_big = BigUint::from(lam);
        let mut falling = BigUint::one();
        for i in 0..n as u64 {
            falling *= &lam_big - BigUint::from(i);
        }
        let pow = num_traits::pow::pow(lam_big, n);
        let two_n = BigUint::one() << n;
        (&two_n * falling) > (&two_n - BigUint::one()) * pow
    };
    // birthday seed: collision ≈ C(n,2)/Λ, so Λ ≈ C(n,2)·2^{n−1} is near the
    // answer; gallop upward to bracket, then binary-search the least valid Λ.
    let seed = std::cmp::max(n as u64, (n as u64 * (n as u64 - 1) / 2) << (n - 1).min(40));
    let mut hi = std::cmp::max(seed, n as u64);
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = n as u64 - 1; // never valid: collision probability is 1
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// How a witness root came to exist: the demand it satisfies.
#[derive(Debug, Clone)]
pub struct WitnessRecord {
    pub template: DemandTemplate,
    pub relation: String,
    /// Anchor addresses at the boundary of stage `birth − 1`.
    pub anchors: Vec<Address>,
    /// Metric classes only: the chosen exact distance from the witness to
    /// each anchor (empty for graph-like classes).
    pub values: Vec<Rat>,
}

#[derive(Debug, Clone)]
pub enum RootKind {
    /// Generic element injected by substage `n.0`.
    Mass,
    /// Witness element injected by substage `n.1`.
    Witness(WitnessRecord),
}

/// One root letter of the address tree.
#[derive(Debug, Clone)]
pub struct RootInfo {
    pub letter: u64,
    /// Stage at which the root was injected (its word is `letter⌢0^{2b−3}`).
    pub birth: usize,
    pub mass: Rat,
    pub kind: RootKind,
}

impl RootInfo {
    /// The injected word `letter⌢0^{2b−3}`, of length `2b − 2`.
    pub fn birth_word(&self) -> Address {
        Address::root(self.letter).pad_zeros(2 * self.birth - 3)
    }
}

/// Language expansion mode of substage `n.3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// Case (a): one child `x⌢0` per element, masses unchanged.
    Expand,
    /// Case (b): children `x⌢0` and `x⌢1`, masses halved.
    Split,
}

impl SplitKind {
    pub fn factor(self) -> u64 {
        match self {
            SplitKind::Expand => 1,
            SplitKind::Split => 2,
        }
    }
}

/// Scalar summary of one completed stage.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub n: usize,
    /// Duplication multiplicity `Λ_n` (zero for the empty stages 0 and 1).
    pub lambda: u64,
    pub split: SplitKind,
    /// Language layer count `α_n`.
    pub alpha: BigUint,
    /// `|X_n|`, the number of boundary addresses.
    pub boundary_count: BigUint,
    /// `Γ_n`, the largest single-address mass.
    pub gamma: Rat,
    /// Total mass of the stage (sum of `m*` over introduced roots).
    pub total_mass: Rat,
    /// Letters of roots injected at this stage.
    pub new_root_letters: Vec<u64>,
    /// Metric split perturbation scales for this stage (zero otherwise).
    pub beta: Rat,
    pub eps: Rat,
}

/// A staged inverse-limit run: per-stage scalar records, the root table,
/// and a replayable generation log.
#[derive(Debug, Clone)]
pub struct LimitEngine {
    pub class: AmalgamationClass,
    pub schedule: CyclicSchedule,
    roots: BTreeMap<u64, RootInfo>,
    stages: Vec<StageRecord>,
    gen_log: Vec<String>,
    /// Metric classes: bound on the dyadic denominator exponent of every
    /// distance realized at the current stage.
    denom_exp: u64,
    /// Metric classes: exponent `τ` with `2^{−τ}` at most the global
    /// perturbation budget derived from the threshold set.
    budget_exp: u64,
}

/// The relation used by scheduled one-point extension demands: the base
/// graph layer for graph-like classes, and the largest-threshold relation
/// for metric classes (the one demand family that is realizable against
/// arbitrary anchors).
pub fn demand_relation(class: &AmalgamationClass) -> String {
    match class.thresholds() {
        Some(t) => relation_name(t.p_max()),
        None => "E0".to_string(),
    }
}

fn tf_base(class: &AmalgamationClass) -> bool {
    matches!(
        class,
        AmalgamationClass::TriangleFree
            | AmalgamationClass::Kaleidoscope {
                triangle_free_base: true
            }
    )
}

/// Perturbation budget exponent for a metric class: `2^{−τ}` must not exceed
/// `min(Δ/2, γ₀/4, s_min²/(8·cap))`, where `Δ` is the least gap from a
/// realizable base value down to the nearest smaller threshold and `γ₀` the
/// least positive triangle slack among realizable base values.
fn metric_budget_exp(t: &MetricThresholds) -> u64 {
    let cap = t.cap();
    let s_min = t.s_min().clone();
    // realizable base values: all sums of positive thresholds, capped at 2p
    let mut vals: Vec<Rat> = vec![cap.clone()];
    let mut frontier: Vec<Rat> = vec![Rat::zero()];
    while let Some(v) = frontier.pop() {
        for q in t.values().iter().filter(|q| q.is_positive()) {
            let s = &v + q;
            let s = if s > cap { cap.clone() } else { s };
            if !vals.contains(&s) {
                vals.push(s.clone());
                if s < cap {
                    frontier.push(s);
                }
            }
        }
    }
    // least gap down to a smaller threshold (0 counts as a threshold)
    let mut delta: Option<Rat> = None;
    for v in &vals {
        let pred = t
            .values()
            .iter()
            .filter(|q| *q < v)
            .max_by(|a, b| a.partial_cmp(b).unwrap())
            .cloned()
            .unwrap_or_else(Rat::zero);
        let gap = v - pred;
        if delta.as_ref().is_none_or(|d| gap < *d) {
            delta = Some(gap);
        }
    }
    let delta = delta.unwrap();
    // least positive triangle slack among base values
    let mut gamma0: Option<Rat> = None;
    for a in &vals {
        for b in &vals {
            for c in &vals {
                let slack = a + b - c;
                if slack.is_positive() && gamma0.as_ref().is_none_or(|g| slack < *g) {
                    gamma0 = Some(slack);
                }
            }
        }
    }
    let gamma0 = gamma0.unwrap_or_else(|| s_min.clone());
    let two = rat_u(2);
    let four = rat_u(4);
    let eight = rat_u(8);
    let target = [
        delta / &two,
        gamma0 / &four,
        (&s_min * &s_min) / (eight * cap),
    ]
    .into_iter()
    .min()
    .unwrap();
    let mut exp = 0u64;
    while pow2_inv(exp) > target {
        exp += 1;
    }
    exp
}

impl LimitEngine {
    /// Stages 0 and 1: empty boundaries, `α_0 = 0`, `α_1 = 1`.
    pub fn init_stages_01(class: AmalgamationClass, schedule: CyclicSchedule) -> Result<Self> {
        if !class.constant_free() {
            return Err(Error::ConstantsUnsupported(format!(
                "class {} interprets constants",
                class.name()
            )));
        }
        let budget_exp = class.thresholds().map(metric_budget_exp).unwrap_or(0);
        let mut engine = LimitEngine {
            class,
            schedule,
            roots: BTreeMap::new(),
            stages: Vec::new(),
            gen_log: Vec::new(),
            denom_exp: 1,
            budget_exp,
        };
        for n in 0..=1usize {
            engine.stages.push(StageRecord {
                n,
                lambda: 0,
                split: SplitKind::Expand,
                alpha: BigUint::from(n),
                boundary_count: BigUint::zero(),
                gamma: Rat::zero(),
                total_mass: Rat::zero(),
                new_root_letters: Vec::new(),
                beta: Rat::zero(),
                eps: Rat::zero(),
            });
            engine.log(json!({"substage": format!("{n}"), "action": "init", "alpha": n}));
        }
        Ok(engine)
    }

    /// Convenience constructor: initialize and advance to stage `n`.
    pub fn build(
        class: AmalgamationClass,
        schedule: CyclicSchedule,
        n: usize,
    ) -> Result<Self> {
        let mut engine = LimitEngine::init_stages_01(class, schedule)?;
        engine.run_to(n)?;
        Ok(engine)
    }

    pub fn current_stage(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stage(&self, n: usize) -> &StageRecord {
        &self.stages[n]
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    pub fn roots(&self) -> impl Iterator<Item = &RootInfo> {
        self.roots.values()
    }

    pub fn root(&self, letter: u64) -> Option<&RootInfo> {
        self.roots.get(&letter)
    }

    pub fn gen_log(&self) -> &[String] {
        &self.gen_log
    }

    fn log(&mut self, value: serde_json::Value) {
        self.gen_log.push(value.to_string());
    }

    pub fn run_to(&mut self, n: usize) -> Result<()> {
        while self.current_stage() < n {
            self.advance()?;
        }
        Ok(())
    }

    /// Run the four substages of stage `n = current + 1`.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.current_stage() + 1;
        let lambda = lambda_min(n);
        let mut new_letters = Vec::new();
        if let Some(letter) = self.substage_add_mass(n, lambda)? {
            new_letters.push(letter);
        }
        if let Some(letter) = self.substage_add_witnesses(n, lambda)? {
            new_letters.push(letter);
        }
        self.substage_duplicate(n, lambda);
        self.substage_expand_split(n, lambda, new_letters)?;
        Ok(())
    }

    /// Substage `n.0`: inject the mass root `n⌢0^{2n−3}` unless the letter
    /// `n` is already taken or its fixed mass `2^{−(n+1)}` would break the
    /// halving of the maximum atom.
    fn substage_add_mass(&mut self, n: usize, lambda: u64) -> Result<Option<u64>> {
        let letter = n as u64;
        if self.roots.contains_key(&letter) {
            self.log(json!({
                "substage": format!("{n}.0"), "action": "skip",
                "reason": "letter occupied"
            }));
            return Ok(None);
        }
        if n > 2 && base_mass(letter) > self.injection_guard(n, lambda) {
            self.log(json!({
                "substage": format!("{n}.0"), "action": "skip",
                "reason": "mass exceeds halving guard"
            }));
            return Ok(None);
        }
        let info = RootInfo {
            letter,
            birth: n,
            mass: base_mass(letter),
            kind: RootKind::Mass,
        };
        self.log(json!({
            "substage": format!("{n}.0"), "action": "add_mass",
            "root": letter, "address": info.birth_word().to_string(),
            "mass": format!("{}", info.mass)
        }));
        self.roots.insert(letter, info);
        Ok(Some(letter))
    }

    /// Substage `n.1`: realize the scheduled demand on policy-chosen anchors
    /// if it is valid, allocating a fresh witness root.
    fn substage_add_witnesses(&mut self, n: usize, lambda: u64) -> Result<Option<u64>> {
        let substage = format!("{n}.1");
        let template = self.schedule.template_at(n).clone();
        let relation = demand_relation(&self.class);
        let prev = &self.stages[n - 1];
        if prev.boundary_count.is_zero() {
            self.log(json!({"substage": substage, "action": "skip", "reason": "empty boundary"}));
            return Ok(None);
        }
        if self.class.thresholds().is_some() && n < 3 {
            // the demand relation enters the language at α_2 = all base layers
            self.log(json!({
                "substage": substage, "action": "skip",
                "reason": "relation not yet in language"
            }));
            return Ok(None);
        }
        if tf_base(&self.class) && template.signs.iter().filter(|&&s| s).count() >= 2 {
            self.log(json!({
                "substage": substage, "action": "skip",
                "reason": "axiom not valid in class", "template": template.id()
            }));
            return Ok(None);
        }
        let arity = template.arity();
        if prev.boundary_count < BigUint::from(arity) {
            self.log(json!({"substage": substage, "action": "skip", "reason": "not enough anchors"}));
            return Ok(None);
        }
        let anchors = self.anchor_tuple(n, arity);
        // the paper's emptiness test for V: skip when some coordinate of the
        // anchor tuple already witnesses the demand
        if self.self_witnessed(&template, &relation, &anchors) {
            self.log(json!({
                "substage": substage, "action": "skip",
                "reason": "self-witnessed", "template": template.id(),
                "anchors": anchors.iter().map(|a| a.to_string()).collect::<Vec<_>>()
            }));
            return Ok(None);
        }
        // fresh root letter: smallest natural with no extension in the stage
        // whose base mass keeps the maximum-atom halving intact
        let guard = self.injection_guard(n, lambda);
        let mut letter = 0u64;
        let letter = loop {
            if !self.roots.contains_key(&letter) && base_mass(letter) <= guard {
                break letter;
            }
            letter += 1;
        };
        let values = self.witness_values(&template, &anchors)?;
        let info = RootInfo {
            letter,
            birth: n,
            mass: base_mass(letter),
            kind: RootKind::Witness(WitnessRecord {
                template: template.clone(),
                relation: relation.clone(),
                anchors: anchors.clone(),
                values,
            }),
        };
        self.log(json!({
            "substage": substage, "action": "add_witness",
            "template": template.id(), "relation": relation,
            "anchors": anchors.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "root": letter, "address": info.birth_word().to_string(),
            "mass": format!("{}", info.mass)
        }));
        self.roots.insert(letter, info);
        Ok(Some(letter))
    }

    /// Largest admissible mass for a root injected at stage `n`: after the
    /// stage divides every mass by at least `Λ_n`, the maximum atom must have
    /// halved, so a new root may weigh at most `Γ_{n−1} · Λ_n / 2`.
    fn injection_guard(&self, n: usize, lambda: u64) -> Rat {
        &self.stages[n - 1].gamma * rat_u(lambda) / rat_u(2)
    }

    /// Substage `n.2`: record the duplication multiplicity `Λ_n`.
    fn substage_duplicate(&mut self, n: usize, lambda: u64) {
        self.log(json!({
            "substage": format!("{n}.2"), "action": "duplicate", "lambda": lambda
        }));
    }

    /// Substage `n.3`: choose case (a) or (b), update `α`, masses, `Γ`, and
    /// the boundary count, and seal the stage record.
    fn substage_expand_split(
        &mut self,
        n: usize,
        lambda: u64,
        new_root_letters: Vec<u64>,
    ) -> Result<()> {
        let prev = &self.stages[n - 1];
        let pre_split_count =
            (&prev.boundary_count + BigUint::from(new_root_letters.len())) * BigUint::from(lambda);
        let split = match self.class.declared_splitting_order() {
            Some(order) if BigUint::from(order) <= pre_split_count => SplitKind::Split,
            _ => SplitKind::Expand,
        };
        let (alpha, beta, eps) = match (&self.class, split) {
            (AmalgamationClass::Kaleidoscope { .. }, SplitKind::Split) => {
                // three fresh symmetric layers: two child-bit code layers and
                // one same-parent marker layer
                (&prev.alpha + BigUint::from(3u32), Rat::zero(), Rat::zero())
            }
            (AmalgamationClass::Metric { thresholds }, SplitKind::Split) => {
                // three separating thresholds per unordered pair of parents,
                // plus (at stage 2) the remaining base threshold layers
                let base = BigUint::from(thresholds.len());
                let start = if prev.alpha < base {
                    base
                } else {
                    prev.alpha.clone()
                };
                let pairs = &pre_split_count * (&pre_split_count - BigUint::one())
                    / BigUint::from(2u32);
                let alpha = start + BigUint::from(3u32) * pairs;
                // dyadic perturbation scales: β_n = 2^{−b}, ε_n = 2^{−(b+5)}
                let b = std::cmp::max(
                    n as u64 + 5 + self.budget_exp,
                    self.denom_exp + 8,
                );
                self.denom_exp = 2 * self.denom_exp + b + 5;
                (alpha, pow2_inv(b), pow2_inv(b + 5))
            }
            _ => (&prev.alpha + BigUint::one(), Rat::zero(), Rat::zero()),
        };
        if alpha <= prev.alpha {
            return Err(Error::IndexOutOfRange(format!(
                "language must grow at stage {n}"
            )));
        }
        let divisor = rat_u(lambda) * rat_u(split.factor());
        let max_new_mass = new_root_letters
            .iter()
            .map(|&l| base_mass(l))
            .max()
            .unwrap_or_else(Rat::zero);
        let gamma = std::cmp::max(prev.gamma.clone(), max_new_mass) / &divisor;
        let total_mass = &prev.total_mass
            + new_root_letters
                .iter()
                .map(|&l| base_mass(l))
                .sum::<Rat>();
        let boundary_count = &pre_split_count * BigUint::from(split.factor());
        let record = StageRecord {
            n,
            lambda,
            split,
            alpha: alpha.clone(),
            boundary_count,
            gamma,
            total_mass,
            new_root_letters,
            beta,
            eps,
        };
        self.log(json!({
            "substage": format!("{n}.3"), "action": "expand",
            "case": if split == SplitKind::Split { "b" } else { "a" },
            "alpha": alpha.to_string(),
            "boundary": record.boundary_count.to_string(),
            "gamma": format!("{}", record.gamma),
            "total": format!("{}", record.total_mass)
        }));
        self.stages.push(record);
        Ok(())
    }

    /// Deterministic anchor policy: the `arity` lexicographically first
    /// boundary descendants of the root with the largest single-address
    /// mass, varying the final duplication letter.
    fn anchor_tuple(&self, n: usize, arity: usize) -> Vec<Address> {
        let boundary = n - 1;
        let top = self.top_atom_root(boundary);
        let mut base = top.birth_word();
        for _h in top.birth..boundary {
            base = base.child(1).child(0);
        }
        // vary the final duplication letter: 1..=arity ≤ Λ_{n−1}
        (0..arity)
            .map(|i| base.child(i as u64 + 1).child(0))
            .collect()
    }

    /// The root attaining the stage-`n` maximum atom mass (smallest letter
    /// on ties).
    fn top_atom_root(&self, n: usize) -> &RootInfo {
        self.roots
            .values()
            .filter(|r| r.birth <= n)
            .max_by(|a, b| {
                self.atom_mass(a, n)
                    .cmp(&self.atom_mass(b, n))
                    .then(b.letter.cmp(&a.letter))
            })
            .expect("boundary nonempty")
    }

    /// Mass of each stage-`n` boundary descendant of the given root.
    pub fn atom_mass(&self, root: &RootInfo, n: usize) -> Rat {
        let mut mass = root.mass.clone();
        for h in root.birth..=n {
            let s = &self.stages[h];
            mass /= rat_u(s.lambda) * rat_u(s.split.factor());
        }
        mass
    }

    /// Check whether some coordinate of the anchor tuple itself satisfies
    /// the demand, which empties the paper's witness-candidate set.
    fn self_witnessed(
        &self,
        template: &DemandTemplate,
        relation: &str,
        anchors: &[Address],
    ) -> bool {
        anchors.iter().any(|d| {
            template.signs.iter().zip(anchors).all(|(&sign, a)| {
                let holds = crate::limit::oracle::boundary_atom(self, relation, d, a);
                holds == sign
            })
        })
    }

    /// Metric classes: the exact distance from the witness to each anchor —
    /// `p` for a positive sign and `p + s_min/2` for a negative one.  The
    /// half-step keeps the pairwise gap strictly under every anchor
    /// distance (anchor pairs sit near or above `s_min`), so the demand is
    /// feasible against arbitrary anchors.  Graph-like classes store none.
    fn witness_values(
        &self,
        template: &DemandTemplate,
        anchors: &[Address],
    ) -> Result<Vec<Rat>> {
        let Some(t) = self.class.thresholds() else {
            return Ok(Vec::new());
        };
        let values: Vec<Rat> = template
            .signs
            .iter()
            .map(|&s| {
                if s {
                    t.p_max().clone()
                } else {
                    t.p_max() + t.s_min() / rat_u(2)
                }
            })
            .collect();
        // one-point extension feasibility: |u_i − u_j| ≤ d(a_i, a_j) ≤ u_i + u_j
        for i in 0..anchors.len() {
            for j in (i + 1)..anchors.len() {
                let d = crate::limit::oracle::distance(self, &anchors[i], &anchors[j]);
                let diff = if values[i] >= values[j] {
                    &values[i] - &values[j]
                } else {
                    &values[j] - &values[i]
                };
                if diff > d || d > &values[i] + &values[j] {
                    return Err(Error::UnsatisfiableDemand(format!(
                        "demanded distances {} and {} are incompatible with anchor distance {}",
                        values[i], values[j], d
                    )));
                }
            }
        }
        Ok(values)
    }

    /// Total mass of the deepest stage.
    pub fn total_mass(&self) -> Rat {
        self.stages.last().unwrap().total_mass.clone()
    }

    /// Exact mass of one boundary address of stage `n`.
    pub fn address_mass(&self, addr: &Address, n: usize) -> Result<Rat> {
        let root = self
            .roots
            .get(&addr.0[0])
            .ok_or_else(|| Error::InvalidAddress(format!("unknown root {}", addr.0[0])))?;
        if addr.len() != 2 * n || root.birth > n {
            return Err(Error::InvalidAddress(format!(
                "address {addr} is not on the stage-{n} boundary"
            )));
        }
        Ok(self.atom_mass(root, n))
    }
}
