//! Deterministic axiom schedules for the staged constructions.
//!
//! A schedule assigns to every stage `n ≥ 1` a one-point extension demand
//! drawn from a finite template catalog, cycling forever so that every
//! template recurs infinitely often.  The staged graph construction
//! witnesses *every* anchor tuple at each occurrence of a template, which
//! subsumes any particular enumeration of anchors; the tree-indexed limit
//! engine pairs each occurrence with explicit anchor addresses chosen by a
//! deterministic mass-ordered rotation.

use serde::{Deserialize, Serialize};

use crate::formula::Demand;

/// A sign pattern for a one-point extension demand over a single binary
/// relation: the witness `y` must be related (positively or negatively,
/// per sign) to each anchor variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTemplate {
    /// One sign per anchor variable; `true` demands the relation holds.
    pub signs: Vec<bool>,
}

impl DemandTemplate {
    pub fn new(signs: Vec<bool>) -> Self {
        assert!(!signs.is_empty(), "demand template needs at least one anchor");
        DemandTemplate { signs }
    }

    pub fn arity(&self) -> usize {
        self.signs.len()
    }

    /// Stable identifier, e.g. `ext2_pn` for a binary demand (+, −).
    pub fn id(&self) -> String {
        let mut out = format!("ext{}_", self.signs.len());
        for &s in &self.signs {
            out.push(if s { 'p' } else { 'n' });
        }
        out
    }

    /// Instantiate the template as a demand over the named binary relation.
    pub fn demand(&self, relation: &str) -> Demand {
        Demand::edge_demand(relation, &self.signs)
    }
}

/// All sign patterns up to the given arity, smallest arity first and
/// all-positive patterns first within each arity.
pub fn template_catalog(max_arity: usize) -> Vec<DemandTemplate> {
    let mut out = Vec::new();
    for arity in 1..=max_arity {
        for mask in 0u32..(1 << arity) {
            let signs = (0..arity).map(|i| mask & (1 << i) == 0).collect();
            out.push(DemandTemplate::new(signs));
        }
    }
    out
}

/// A cyclic schedule over a template catalog.  Stage `n ≥ 1` uses the
/// template at index `(n − 1) mod len`, so each template occurs at the
/// arithmetic progression of stages with that residue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicSchedule {
    pub templates: Vec<DemandTemplate>,
}

impl CyclicSchedule {
    pub fn new(templates: Vec<DemandTemplate>) -> Self {
        assert!(!templates.is_empty(), "schedule needs at least one template");
        CyclicSchedule { templates }
    }

    /// Default schedule: every sign pattern of arity at most 3.
    pub fn default_catalog() -> Self {
        CyclicSchedule::new(template_catalog(3))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn template_at(&self, stage: usize) -> &DemandTemplate {
        assert!(stage >= 1, "stages are numbered from 1");
        &self.templates[(stage - 1) % self.templates.len()]
    }

    /// Largest stage `m ≤ n` scheduled with the same template as stage `j`.
    /// This is the most recent stage at which the demand of stage `j` was
    /// (re-)witnessed by the time the run reached stage `n`.
    pub fn last_occurrence(&self, n: usize, j: usize) -> usize {
        assert!(j >= 1 && j <= n);
        let len = self.templates.len();
        let residue = (j - 1) % len;
        let mut m = n;
        loop {
            if (m - 1) % len == residue {
                return m;
            }
            m -= 1;
        }
    }

    pub fn id_at(&self, stage: usize) -> String {
        self.template_at(stage).id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_all_sign_patterns() {
        let catalog = template_catalog(3);
        assert_eq!(catalog.len(), 2 + 4 + 8);
        assert_eq!(catalog[0].id(), "ext1_p");
        assert_eq!(catalog[1].id(), "ext1_n");
        assert_eq!(catalog[2].id(), "ext2_pp");
        assert!(catalog.iter().all(|t| t.arity() <= 3));
    }

    #[test]
    fn cyclic_schedule_recurs() {
        let schedule = CyclicSchedule::default_catalog();
        let len = schedule.len();
        assert_eq!(schedule.template_at(1), schedule.template_at(1 + len));
        assert_eq!(schedule.template_at(5), schedule.template_at(5 + 3 * len));
    }

    #[test]
    fn last_occurrence_finds_most_recent_stage() {
        let schedule = CyclicSchedule::new(template_catalog(1)); // length 2
        // Stage 1, 3, 5, ... use template 0; stage 2, 4, 6, ... template 1.
        assert_eq!(schedule.last_occurrence(6, 1), 5);
        assert_eq!(schedule.last_occurrence(6, 2), 6);
        assert_eq!(schedule.last_occurrence(5, 2), 4);
        assert_eq!(schedule.last_occurrence(2, 2), 2);
    }

    #[test]
    fn demand_instantiation_mentions_relation() {
        let t = DemandTemplate::new(vec![true, false]);
        let d = t.demand("E0");
        assert_eq!(d.anchor_arity, 2);
        assert_eq!(d.atoms.len(), 2);
        assert!(d.atoms[0].positive);
        assert!(!d.atoms[1].positive);
    }
}
