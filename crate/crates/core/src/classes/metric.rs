//! Threshold-relational metric spaces.
//!
//! A threshold set is a finite list of rationals starting at 0. A metric space
//! with rational distances becomes a relational structure with one binary
//! relation `d_q` per threshold, holding exactly when the distance is at most
//! `q`. The age is cut out by four axiom schemata: reflexivity of every
//! `d_q`, symmetry, monotonicity in `q`, and the triangle schema
//! `d_q(x,y) & d_r(y,z) -> d_s(x,z)` with `s` the least threshold at or above
//! `q + r` (no constraint when no such threshold exists).
//!
//! All feasibility questions (amalgamation, one-point witnesses) reduce to
//! exact-rational shortest-path computations; nothing here is approximate.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{Demand, DemandSlot};
use crate::qftype::QfType;
use crate::signature::{RelationSymbol, Signature};
use crate::structure::FinStructure;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A sorted threshold list: distinct nonnegative rationals, first element 0,
/// at least one positive value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricThresholds {
    values: Vec<Rat>,
}

impl Serialize for MetricThresholds {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        strings.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for MetricThresholds {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let strings: Vec<String> = Vec::deserialize(de)?;
        MetricThresholds::from_strings(&strings).map_err(serde::de::Error::custom)
    }
}

impl MetricThresholds {
    pub fn new(values: Vec<Rat>) -> Result<Self> {
        if values.is_empty() || !values[0].is_zero() {
            return Err(Error::Parse("threshold list must start with 0".into()));
        }
        for w in values.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Parse(
                    "threshold list must be strictly increasing".into(),
                ));
            }
        }
        if values.len() < 2 {
            return Err(Error::Parse(
                "threshold list needs at least one positive value".into(),
            ));
        }
        Ok(MetricThresholds { values })
    }

    pub fn from_strings(strings: &[String]) -> Result<Self> {
        let values: Vec<Rat> = strings
            .iter()
            .map(|s| {
                Rat::from_str(s).map_err(|e| Error::Parse(format!("bad threshold {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Self::new(values)
    }

    /// The default shipped threshold set {0, 1/2, 1, 2}.
    pub fn default_set() -> Self {
        MetricThresholds::new(vec![rat(0, 1), rat(1, 2), rat(1, 1), rat(2, 1)]).unwrap()
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The largest threshold `p`.
    pub fn p_max(&self) -> &Rat {
        self.values.last().unwrap()
    }

    /// The distance cap `2p`.
    pub fn cap(&self) -> Rat {
        self.p_max() * BigRational::from_integer(BigInt::from(2))
    }

    /// The smallest positive threshold.
    pub fn s_min(&self) -> &Rat {
        &self.values[1]
    }

    /// Signature over the first `layer_count` thresholds, one layer each.
    pub fn signature_at(&self, layer_count: usize) -> Result<Signature> {
        if layer_count > self.values.len() {
            return Err(Error::IndexOutOfRange(format!(
                "asked for {layer_count} threshold layers, class declares {}",
                self.values.len()
            )));
        }
        Ok(signature_of_values(&self.values[..layer_count]))
    }
}

pub fn relation_name(value: &Rat) -> String {
    format!("d_{value}")
}

/// Build a metric signature with the given threshold values, layer = position.
pub fn signature_of_values(values: &[Rat]) -> Signature {
    Signature {
        relations: values
            .iter()
            .enumerate()
            .map(|(i, v)| RelationSymbol {
                name: relation_name(v),
                arity: 2,
                layer: i,
            })
            .collect(),
        layers: values.len(),
    }
}

/// Parse the threshold values out of a metric signature, in layer order.
pub fn values_of_signature(sig: &Signature) -> Result<Vec<Rat>> {
    let mut rels = sig.relations.clone();
    rels.sort_by_key(|r| r.layer);
    rels.iter()
        .map(|r| {
            if r.arity != 2 {
                return Err(Error::SignatureMismatch(format!(
                    "metric relation {} must be binary",
                    r.name
                )));
            }
            let raw = r.name.strip_prefix("d_").ok_or_else(|| {
                Error::SignatureMismatch(format!("relation {} is not a threshold relation", r.name))
            })?;
            Rat::from_str(raw)
                .map_err(|e| Error::SignatureMismatch(format!("bad threshold in {}: {e}", r.name)))
        })
        .collect()
}

/// A finite metric space with rational distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMetricSpace {
    size: usize,
    dist: BTreeMap<(usize, usize), Rat>,
}

impl RationalMetricSpace {
    /// `dist` maps pairs `(i, j)` with `i < j`; validated for positivity and
    /// the triangle inequality.
    pub fn new(size: usize, dist: BTreeMap<(usize, usize), Rat>) -> Result<Self> {
        for i in 0..size {
            for j in (i + 1)..size {
                let d = dist
                    .get(&(i, j))
                    .ok_or_else(|| Error::Parse(format!("missing distance for pair ({i},{j})")))?;
                if !d.is_positive() {
                    return Err(Error::Parse(format!(
                        "distance for ({i},{j}) must be positive"
                    )));
                }
            }
        }
        let space = RationalMetricSpace { size, dist };
        for x in 0..size {
            for y in 0..size {
                for z in 0..size {
                    if space.d(x, z) > space.d(x, y) + space.d(y, z) {
                        return Err(Error::Parse(format!(
                            "triangle inequality fails on ({x},{y},{z})"
                        )));
                    }
                }
            }
        }
        Ok(space)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn d(&self, i: usize, j: usize) -> Rat {
        if i == j {
            return Rat::zero();
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.dist[&key].clone()
    }
}

/// Exact all-pairs shortest-path closure (Floyd–Warshall) in place.
pub fn close_matrix(m: &mut Vec<Vec<Rat>>) {
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = &m[i][k] + &m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
}

/// The structure of a metric space over a threshold set: `d_q(x, y)` holds
/// exactly when the distance is at most `q` (so every `d_q(x, x)` holds).
pub fn metric_to_structure(space: &RationalMetricSpace, t: &MetricThresholds) -> FinStructure {
    let sig = signature_of_values(t.values());
    let mut s = FinStructure::with_numbered_elements(sig, space.size()).unwrap();
    for q in t.values() {
        let name = relation_name(q);
        for i in 0..space.size() {
            for j in 0..space.size() {
                if space.d(i, j) <= *q {
                    s.add_tuple(&name, &[i, j]).unwrap();
                }
            }
        }
    }
    s
}

/// Check the four axiom schemata over the structure's own threshold set.
pub fn contains_metric(s: &FinStructure) -> Result<bool> {
    let values = values_of_signature(&s.signature)?;
    let names: Vec<String> = values.iter().map(relation_name).collect();
    let n = s.size();
    // reflexivity of every d_q
    for name in &names {
        for x in 0..n {
            if !s.holds(name, &[x, x]) {
                return Ok(false);
            }
        }
    }
    // symmetry
    for name in &names {
        for x in 0..n {
            for y in 0..n {
                if s.holds(name, &[x, y]) != s.holds(name, &[y, x]) {
                    return Ok(false);
                }
            }
        }
    }
    // monotonicity: d_q implies d_r for r >= q
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].cmp(&values[b]));
    for w in order.windows(2) {
        let (lo, hi) = (&names[w[0]], &names[w[1]]);
        for x in 0..n {
            for y in 0..n {
                if s.holds(lo, &[x, y]) && !s.holds(hi, &[x, y]) {
                    return Ok(false);
                }
            }
        }
    }
    // triangle schema with the least threshold at or above q + r
    for qi in 0..values.len() {
        for ri in 0..values.len() {
            let sum = &values[qi] + &values[ri];
            let si = order
                .iter()
                .copied()
                .filter(|&k| values[k] >= sum)
                .min_by(|&a, &b| values[a].cmp(&values[b]));
            let Some(si) = si else { continue };
            for x in 0..n {
                for y in 0..n {
                    if !s.holds(&names[qi], &[x, y]) {
                        continue;
                    }
                    for z in 0..n {
                        if s.holds(&names[ri], &[y, z]) && !s.holds(&names[si], &[x, z]) {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// `dd(x, y)`: the least threshold `q` with `d_q(x, y)`, `None` for +infinity.
/// Keys are pairs `(i, j)` with `i <= j`.
pub fn structure_to_metric(
    s: &FinStructure,
) -> Result<BTreeMap<(usize, usize), Option<Rat>>> {
    if !contains_metric(s)? {
        return Err(Error::NotAMetricModel(
            "structure violates a T_MS axiom schema".into(),
        ));
    }
    let values = values_of_signature(&s.signature)?;
    let mut out = BTreeMap::new();
    for i in 0..s.size() {
        for j in i..s.size() {
            let mut best: Option<Rat> = None;
            for v in &values {
                if s.holds(&relation_name(v), &[i, j]) && best.as_ref().map_or(true, |b| v < b) {
                    best = Some(v.clone());
                }
            }
            out.insert((i, j), best);
        }
    }
    Ok(out)
}

/// The conservative completion of a finite threshold model: exact
/// shortest-path distances over `min(2p, least true threshold)` edge values.
#[derive(Debug, Clone)]
pub struct TmsCompletion {
    pub delta: Vec<Vec<Rat>>,
}

impl TmsCompletion {
    /// Does `d_q(x, y)` hold in the completion, for any rational `q`?
    pub fn holds(&self, x: usize, y: usize, q: &Rat) -> bool {
        self.delta[x][y] <= *q
    }
}

pub fn complete_to_tms(s: &FinStructure) -> Result<TmsCompletion> {
    let readout = structure_to_metric(s)?; // validates the schemata
    let values = values_of_signature(&s.signature)?;
    let p = values
        .iter()
        .max()
        .cloned()
        .ok_or_else(|| Error::NotAMetricModel("empty threshold set".into()))?;
    let cap = &p + &p;
    let n = s.size();
    let mut delta = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let key = if i < j { (i, j) } else { (j, i) };
            delta[i][j] = match &readout[&key] {
                Some(q) => q.min(&cap).clone(),
                None => cap.clone(),
            };
        }
    }
    close_matrix(&mut delta);
    Ok(TmsCompletion { delta })
}

/// Distances realized by a non-redundant type: least true threshold per pair,
/// capped closure, validated to reproduce the type's atoms exactly.
fn delta_of_type(q: &QfType, cap: &Rat) -> Result<Vec<Vec<Rat>>> {
    let values = values_of_signature(&q.signature)?;
    let k = q.var_count;
    let mut delta = vec![vec![Rat::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let mut best: Option<Rat> = None;
            for v in &values {
                if q.atom(&relation_name(v), &[i, j])?
                    && best.as_ref().map_or(true, |b| v < b)
                {
                    best = Some(v.clone());
                }
            }
            let d = best.map(|b| b.min(cap.clone())).unwrap_or_else(|| cap.clone());
            if !d.is_positive() {
                return Err(Error::NotInAge(format!(
                    "zero distance between distinct variables {i} and {j}"
                )));
            }
            delta[i][j] = d;
        }
    }
    close_matrix(&mut delta);
    // the closure must still realize the type, otherwise it is inconsistent
    // with any genuine metric space
    for i in 0..k {
        for j in 0..k {
            for v in &values {
                let want = q.atom(&relation_name(v), &[i, j])?;
                if (delta[i][j] <= *v) != want {
                    return Err(Error::NotInAge(format!(
                        "type is not realizable by a metric space (atom d_{v} on ({i},{j}))"
                    )));
                }
            }
        }
    }
    Ok(delta)
}

/// The type of a distance matrix over the given threshold values.
fn type_of_delta(delta: &[Vec<Rat>], values: &[Rat]) -> QfType {
    let sig = signature_of_values(values);
    QfType::from_fn(sig, delta.len(), true, |rel, vars| {
        let v = values
            .iter()
            .find(|v| relation_name(v) == rel)
            .expect("relation drawn from values");
        delta[vars[0]][vars[1]] <= *v
    })
    .expect("total by construction")
}

/// Strong amalgamation of two threshold models over a shared part: kept atoms
/// verbatim, cross distances by shortest paths through the shared part,
/// capped at `2p`.
pub fn strong_amalgam_metric(
    m: &FinStructure,
    n: &FinStructure,
    over: &[String],
    out_labels_m: &[String],
    out_labels_n: &[String],
) -> Result<FinStructure> {
    let values = values_of_signature(&m.signature)?;
    if values_of_signature(&n.signature)? != values {
        return Err(Error::SignatureMismatch(
            "amalgamation arguments use different threshold sets".into(),
        ));
    }
    let p = values.iter().max().unwrap().clone();
    let cap = &p + &p;

    let comp_m = complete_to_tms(m)?;
    let comp_n = complete_to_tms(n)?;
    let over_m: Vec<usize> = over
        .iter()
        .map(|l| m.element_index(l))
        .collect::<Result<_>>()?;
    let over_n: Vec<usize> = over
        .iter()
        .map(|l| n.element_index(l))
        .collect::<Result<_>>()?;

    // new element list: all of m, then n minus over
    let mut s = FinStructure::new(m.signature.clone(), Vec::new())?;
    for l in out_labels_m {
        s.add_element(l.clone())?;
    }
    let mut n_index_to_out: BTreeMap<usize, usize> = BTreeMap::new();
    for (oi, l) in over.iter().enumerate() {
        let pos = m.element_index(l)?;
        n_index_to_out.insert(over_n[oi], pos);
    }
    let mut fresh = Vec::new();
    for (ni, _l) in n.elements().iter().enumerate() {
        if !n_index_to_out.contains_key(&ni) {
            let out_label = &out_labels_n[fresh.len()];
            let pos = s.add_element(out_label.clone())?;
            n_index_to_out.insert(ni, pos);
            fresh.push((ni, pos));
        }
    }

    // kept atoms
    for v in &values {
        let name = relation_name(v);
        for t in m.tuples(&name) {
            s.add_tuple(&name, t)?;
        }
        for t in n.tuples(&name) {
            let mapped: Vec<usize> = t.iter().map(|&i| n_index_to_out[&i]).collect();
            s.add_tuple(&name, &mapped)?;
        }
    }

    // cross atoms from path distances through the shared part
    for a in 0..m.size() {
        if over_m.contains(&a) {
            continue;
        }
        for &(ni, out_pos) in &fresh {
            let mut dist = cap.clone();
            for (oi, &om) in over_m.iter().enumerate() {
                let via = &comp_m.delta[a][om] + &comp_n.delta[over_n[oi]][ni];
                if via < dist {
                    dist = via;
                }
            }
            for v in &values {
                if dist <= *v {
                    let name = relation_name(v);
                    s.add_tuple(&name, &[a, out_pos])?;
                    s.add_tuple(&name, &[out_pos, a])?;
                }
            }
        }
    }
    Ok(s)
}

/// One-point extension: the largest threshold-feasible distance vector
/// satisfying the demand, undemanded values capped at `2p`.
pub fn canonical_witness_metric(
    s: &FinStructure,
    tuple: &[String],
    demand: &Demand,
    fresh_label: &str,
) -> Result<FinStructure> {
    let values = values_of_signature(&s.signature)?;
    let comp = complete_to_tms(s)?;
    let p = values.iter().max().unwrap().clone();
    let cap = &p + &p;
    let anchors: Vec<usize> = tuple
        .iter()
        .map(|l| s.element_index(l))
        .collect::<Result<_>>()?;
    if anchors.len() != demand.anchor_arity {
        return Err(Error::IndexOutOfRange(format!(
            "demand anchor arity {} but {} anchors given",
            demand.anchor_arity,
            anchors.len()
        )));
    }

    // per-anchor bounds from the demand atoms
    let mut upper: Vec<Rat> = vec![cap.clone(); anchors.len()];
    let mut lower: Vec<Option<Rat>> = vec![None; anchors.len()];
    for atom in &demand.atoms {
        if atom.slots.len() != 2 {
            return Err(Error::UnsupportedFormula(
                "metric demands must use binary threshold atoms".into(),
            ));
        }
        let anchor_slot = atom
            .slots
            .iter()
            .find_map(|sl| match sl {
                DemandSlot::Anchor(i) => Some(*i),
                DemandSlot::Witness => None,
            })
            .ok_or_else(|| {
                Error::UnsupportedFormula("metric demand atom must mention an anchor".into())
            })?;
        let raw = atom.relation.strip_prefix("d_").ok_or_else(|| {
            Error::UnsupportedFormula(format!("{} is not a threshold relation", atom.relation))
        })?;
        let q = Rat::from_str(raw)
            .map_err(|e| Error::UnsupportedFormula(format!("bad threshold: {e}")))?;
        if atom.positive {
            if q < upper[anchor_slot] {
                upper[anchor_slot] = q;
            }
        } else if lower[anchor_slot].as_ref().map_or(true, |l| q > *l) {
            lower[anchor_slot] = Some(q);
        }
    }
    for (i, u) in upper.iter().enumerate() {
        if !u.is_positive() {
            return Err(Error::UnsatisfiableDemand(format!(
                "demanded distance 0 to anchor {i}"
            )));
        }
        if let Some(l) = &lower[i] {
            if l >= u {
                return Err(Error::UnsatisfiableDemand(format!(
                    "anchor {i}: demanded distance in the empty interval ({l}, {u}]"
                )));
            }
        }
    }
    // pairwise anchor feasibility of the chosen exact values
    for i in 0..anchors.len() {
        for j in (i + 1)..anchors.len() {
            let d = &comp.delta[anchors[i]][anchors[j]];
            if (&upper[i] - &upper[j]).abs() > *d || &upper[i] + &upper[j] < *d {
                return Err(Error::UnsatisfiableDemand(format!(
                    "anchors {i} and {j}: distances {} and {} are infeasible at separation {d}",
                    upper[i], upper[j]
                )));
            }
        }
    }

    // one-point shortest-path relaxation over all elements
    let f: Vec<Rat> = (0..s.size())
        .map(|e| {
            let mut best = cap.clone();
            for (i, &a) in anchors.iter().enumerate() {
                let via = &upper[i] + &comp.delta[a][e];
                if via < best {
                    best = via;
                }
            }
            best
        })
        .collect();
    for (i, &a) in anchors.iter().enumerate() {
        if let Some(l) = &lower[i] {
            if f[a] <= *l {
                return Err(Error::UnsatisfiableDemand(format!(
                    "anchor {i}: triangle relaxation forces distance {} at or below the demanded floor {l}",
                    f[a]
                )));
            }
        }
    }

    let mut out = s.clone();
    let y = out.add_element(fresh_label.to_string())?;
    for v in &values {
        let name = relation_name(v);
        out.add_tuple(&name, &[y, y])?;
        for (e, fe) in f.iter().enumerate() {
            if fe <= v {
                out.add_tuple(&name, &[y, e])?;
                out.add_tuple(&name, &[e, y])?;
            }
        }
    }
    Ok(out)
}

/// Build the duplicated distance matrix: `copies[i]` copies of variable `i`,
/// same-variable copies at the class's smallest positive threshold.
fn duplicated_delta(delta: &[Vec<Rat>], copies: &[usize], s_min: &Rat) -> Vec<Vec<Rat>> {
    let mut owner = Vec::new();
    for (i, &c) in copies.iter().enumerate() {
        for _ in 0..c {
            owner.push(i);
        }
    }
    let total = owner.len();
    let mut out = vec![vec![Rat::zero(); total]; total];
    for a in 0..total {
        for b in 0..total {
            if a == b {
                continue;
            }
            out[a][b] = if owner[a] == owner[b] {
                s_min.clone()
            } else {
                delta[owner[a]][owner[b]].clone()
            };
        }
    }
    out
}

pub fn iterated_duplicate_metric(
    t: &MetricThresholds,
    q: &QfType,
    multiplicities: &[usize],
) -> Result<QfType> {
    if multiplicities.len() != q.var_count {
        return Err(Error::IndexOutOfRange(format!(
            "{} multiplicities for {} variables",
            multiplicities.len(),
            q.var_count
        )));
    }
    if multiplicities.iter().any(|&m| m == 0) {
        return Err(Error::IndexOutOfRange(
            "multiplicities must be positive".into(),
        ));
    }
    if !q.non_redundant {
        return Err(Error::NotDuplicableInAge("type must be non-redundant".into()));
    }
    let values = values_of_signature(&q.signature)?;
    let delta = delta_of_type(q, &t.cap())?;
    let dup = duplicated_delta(&delta, multiplicities, t.s_min());
    Ok(type_of_delta(&dup, &values))
}

pub fn extend_language_metric(t: &MetricThresholds, q: &QfType, to_layers: usize) -> Result<QfType> {
    let current = values_of_signature(&q.signature)?;
    if to_layers < current.len() {
        return Err(Error::IndexOutOfRange(format!(
            "cannot shrink from {} to {to_layers} layers",
            current.len()
        )));
    }
    let target = t.signature_at(to_layers)?;
    let target_values = values_of_signature(&target)?;
    if target_values[..current.len()] != current[..] {
        return Err(Error::SignatureMismatch(
            "type thresholds are not a prefix of the class thresholds".into(),
        ));
    }
    if to_layers == current.len() {
        return Ok(q.clone());
    }
    let delta = delta_of_type(q, &t.cap())?;
    Ok(type_of_delta(&delta, &target_values))
}

/// Splitting of order 2: duplicate every variable, then perturb all distances
/// to pairwise-distinct values (preserving every original threshold atom) and
/// refine the threshold list with midpoints so each cell isolates one value.
pub fn split_type_metric(t: &MetricThresholds, q: &QfType) -> Result<(usize, QfType)> {
    if !q.non_redundant {
        return Err(Error::NotDuplicableInAge("type must be non-redundant".into()));
    }
    if q.var_count < 2 {
        return Err(Error::OrderTooSmall {
            need: 2,
            got: q.var_count,
        });
    }
    let base_values = values_of_signature(&q.signature)?;
    let delta = delta_of_type(q, &t.cap())?;
    let copies = vec![2usize; q.var_count];
    let mut work = duplicated_delta(&delta, &copies, t.s_min());
    let n = work.len();

    // minimum positive gap between any current distance and any base
    // threshold (0 included, so this also bounds the values away from 0)
    let mut gap: Option<Rat> = None;
    for row in &work {
        for d in row {
            if d.is_zero() {
                continue;
            }
            for v in &base_values {
                let g = d - v;
                if g.is_positive() && gap.as_ref().map_or(true, |cur| g < *cur) {
                    gap = Some(g);
                }
            }
        }
    }
    let gap = gap.unwrap_or_else(|| Rat::one());

    // subtract eps * 3^(pair index + 1); the closure then yields
    // pairwise-distinct values without touching any base-threshold atom
    let pair_count = n * (n - 1) / 2;
    let three = BigRational::from_integer(BigInt::from(3));
    let mut pow = three.clone();
    let mut top = three.clone();
    for _ in 0..=pair_count {
        top = &top * &three;
    }
    let eps = gap / top;
    for i in 0..n {
        for j in (i + 1)..n {
            let bump = &eps * &pow;
            work[i][j] = &work[i][j] - &bump;
            work[j][i] = work[i][j].clone();
            pow = &pow * &three;
        }
    }
    close_matrix(&mut work);

    // refined thresholds: base values plus midpoints between consecutive
    // distinct realized values
    let mut realized: Vec<Rat> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            realized.push(work[i][j].clone());
        }
    }
    realized.sort();
    realized.dedup();
    let mut fresh: Vec<Rat> = Vec::new();
    let two = BigRational::from_integer(BigInt::from(2));
    for w in realized.windows(2) {
        fresh.push((&w[0] + &w[1]) / &two);
    }
    if let Some(first) = realized.first() {
        fresh.push(first / &two);
    }
    fresh.retain(|v| !base_values.contains(v));
    fresh.sort();
    fresh.dedup();

    let mut all_values = base_values.clone();
    all_values.extend(fresh);
    let out = type_of_delta(&work, &all_values);
    Ok((all_values.len(), out))
}
