//! Pluggable amalgamation classes.
//!
//! Four strategies ship: plain graphs, triangle-free graphs, Kaleidoscope
//! layered graphs over either base, and threshold-relational metric spaces.
//! Every operation is deterministic; where the mathematics leaves freedom
//! (witness side relations, duplicate relations) a fixed documented policy is
//! applied so runs are reproducible.

pub mod graphs;
pub mod kaleidoscope;
pub mod metric;

pub use metric::{
    complete_to_tms, contains_metric, metric_to_structure, structure_to_metric, MetricThresholds,
    RationalMetricSpace, TmsCompletion,
};

use crate::error::{Error, Result};
use crate::formula::Demand;
use crate::qftype::QfType;
use crate::signature::Signature;
use crate::structure::FinStructure;

/// A strategy object describing one amalgamation class. Immutable and
/// stateless after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AmalgamationClass {
    Graphs,
    TriangleFree,
    Kaleidoscope { triangle_free_base: bool },
    Metric { thresholds: MetricThresholds },
}

impl AmalgamationClass {
    /// Parse a class name: `graphs`, `triangle-free`, `kaleidoscope:<base>`,
    /// or `metric` (with the default threshold set {0, 1/2, 1, 2}).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "graphs" => Ok(AmalgamationClass::Graphs),
            "triangle-free" => Ok(AmalgamationClass::TriangleFree),
            "kaleidoscope:graphs" => Ok(AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            }),
            "kaleidoscope:triangle-free" => Ok(AmalgamationClass::Kaleidoscope {
                triangle_free_base: true,
            }),
            "metric" => Ok(AmalgamationClass::Metric {
                thresholds: MetricThresholds::default_set(),
            }),
            other => Err(Error::Parse(format!("unknown class name {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AmalgamationClass::Graphs => "graphs".into(),
            AmalgamationClass::TriangleFree => "triangle-free".into(),
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: false,
            } => "kaleidoscope:graphs".into(),
            AmalgamationClass::Kaleidoscope {
                triangle_free_base: true,
            } => "kaleidoscope:triangle-free".into(),
            AmalgamationClass::Metric { .. } => "metric".into(),
        }
    }

    /// The signature with the first `layer_count` layers active. Monotone:
    /// each signature extends the previous one.
    pub fn signature_at(&self, layer_count: usize) -> Result<Signature> {
        match self {
            AmalgamationClass::Metric { thresholds } => thresholds.signature_at(layer_count),
            _ => Ok(Signature::layered_binary(layer_count)),
        }
    }

    /// Layer count of the base language the class starts from.
    pub fn base_layers(&self) -> usize {
        match self {
            AmalgamationClass::Metric { thresholds } => thresholds.len(),
            _ => 1,
        }
    }

    pub fn declared_splitting_order(&self) -> Option<usize> {
        match self {
            AmalgamationClass::Kaleidoscope { .. } | AmalgamationClass::Metric { .. } => Some(2),
            _ => None,
        }
    }

    pub fn constant_free(&self) -> bool {
        true
    }

    pub fn thresholds(&self) -> Option<&MetricThresholds> {
        match self {
            AmalgamationClass::Metric { thresholds } => Some(thresholds),
            _ => None,
        }
    }

    /// Age membership.
    pub fn contains(&self, s: &FinStructure) -> Result<bool> {
        match self {
            AmalgamationClass::Graphs => graphs::contains_layered_graph(s, false),
            AmalgamationClass::TriangleFree => graphs::contains_layered_graph(s, true),
            AmalgamationClass::Kaleidoscope { triangle_free_base } => {
                graphs::contains_layered_graph(s, *triangle_free_base)
            }
            AmalgamationClass::Metric { .. } => metric::contains_metric(s),
        }
    }

    /// Strong amalgamation of `m` and `n` over the shared elements named in
    /// `over` (labels present in both, inducing equal substructures).
    pub fn strong_amalgam(
        &self,
        m: &FinStructure,
        n: &FinStructure,
        over: &[String],
    ) -> Result<FinStructure> {
        if !self.contains(m)? {
            return Err(Error::NotInAge("left argument".into()));
        }
        if !self.contains(n)? {
            return Err(Error::NotInAge("right argument".into()));
        }
        let m_part = m.induced_substructure(over).map_err(|_| {
            Error::BadEmbedding("shared part does not embed in the left argument".into())
        })?;
        let n_part = n.induced_substructure(over).map_err(|_| {
            Error::BadEmbedding("shared part does not embed in the right argument".into())
        })?;
        if m_part != n_part {
            return Err(Error::BadEmbedding(
                "arguments disagree on the shared part".into(),
            ));
        }

        let out_labels_m: Vec<String> = m.elements().to_vec();
        let mut taken: std::collections::BTreeSet<String> = out_labels_m.iter().cloned().collect();
        let mut out_labels_n = Vec::new();
        for l in n.elements() {
            if over.contains(l) {
                continue;
            }
            let mut candidate = l.clone();
            while taken.contains(&candidate) {
                candidate.push('\'');
            }
            taken.insert(candidate.clone());
            out_labels_n.push(candidate);
        }

        let out = match self {
            AmalgamationClass::Metric { .. } => {
                metric::strong_amalgam_metric(m, n, over, &out_labels_m, &out_labels_n)?
            }
            _ => graphs::strong_amalgam_graph(m, n, over, &out_labels_m, &out_labels_n)?,
        };
        if !self.contains(&out)? {
            return Err(Error::NotInAge("amalgam left the age".into()));
        }
        Ok(out)
    }

    /// Add one fresh element satisfying the demand against `tuple`; all other
    /// relations follow the class policy (non-adjacent for graph-like classes,
    /// farthest feasible distance for metric).
    pub fn canonical_witness(
        &self,
        s: &FinStructure,
        tuple: &[String],
        demand: &Demand,
    ) -> Result<FinStructure> {
        if !self.contains(s)? {
            return Err(Error::NotInAge("witness base structure".into()));
        }
        let mut fresh = "y".to_string();
        let mut i = 0u64;
        while s.elements().contains(&fresh) {
            i += 1;
            fresh = format!("y{i}");
        }
        match self {
            AmalgamationClass::Graphs => {
                graphs::canonical_witness_graph(s, tuple, demand, &fresh, false)
            }
            AmalgamationClass::TriangleFree => {
                graphs::canonical_witness_graph(s, tuple, demand, &fresh, true)
            }
            AmalgamationClass::Kaleidoscope { triangle_free_base } => {
                graphs::canonical_witness_graph(s, tuple, demand, &fresh, *triangle_free_base)
            }
            AmalgamationClass::Metric { .. } => {
                metric::canonical_witness_metric(s, tuple, demand, &fresh)
            }
        }
    }

    /// Duplicate each variable the given number of times; every selection of
    /// one copy per variable restricts back to `q`.
    pub fn iterated_duplicate(&self, q: &QfType, multiplicities: &[usize]) -> Result<QfType> {
        match self {
            AmalgamationClass::Graphs => graphs::iterated_duplicate_graph(q, multiplicities, false),
            AmalgamationClass::TriangleFree => {
                graphs::iterated_duplicate_graph(q, multiplicities, true)
            }
            AmalgamationClass::Kaleidoscope { triangle_free_base } => {
                graphs::iterated_duplicate_graph(q, multiplicities, *triangle_free_base)
            }
            AmalgamationClass::Metric { thresholds } => {
                metric::iterated_duplicate_metric(thresholds, q, multiplicities)
            }
        }
    }

    /// Canonical complete extension of `q` to a larger layer count.
    pub fn extend_language(&self, q: &QfType, to_layers: usize) -> Result<QfType> {
        match self {
            AmalgamationClass::Metric { thresholds } => {
                metric::extend_language_metric(thresholds, q, to_layers)
            }
            _ => {
                let target = self.signature_at(to_layers)?;
                graphs::extend_language_graph(q, &target)
            }
        }
    }

    /// Split `q`: double the variables so that distinct unordered pairs of
    /// output variables carry pairwise-distinct pair types.
    pub fn split_type(&self, q: &QfType) -> Result<(usize, QfType)> {
        match self {
            AmalgamationClass::Graphs | AmalgamationClass::TriangleFree => {
                Err(Error::NoSplittingDeclared(self.name()))
            }
            AmalgamationClass::Kaleidoscope { triangle_free_base } => {
                kaleidoscope::split_type_kaleidoscope(q, *triangle_free_base)
            }
            AmalgamationClass::Metric { thresholds } => {
                metric::split_type_metric(thresholds, q)
            }
        }
    }
}

/// All shipped class names.
pub fn shipped_class_names() -> Vec<&'static str> {
    vec![
        "graphs",
        "triangle-free",
        "kaleidoscope:graphs",
        "kaleidoscope:triangle-free",
        "metric",
    ]
}
