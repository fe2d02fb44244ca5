//! Quantifier-free formulas, one-point extension demands, and pithy Pi-2
//! sentences (universal closures of a single bounded existential).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::FinStructure;

/// A quantifier-free formula over variables `0..k` (free-variable indices are
/// whatever the atoms mention).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QfFormula {
    True,
    False,
    Atom { relation: String, vars: Vec<usize> },
    Eq(usize, usize),
    Not(Box<QfFormula>),
    And(Vec<QfFormula>),
    Or(Vec<QfFormula>),
}

impl QfFormula {
    pub fn atom(relation: impl Into<String>, vars: &[usize]) -> Self {
        QfFormula::Atom {
            relation: relation.into(),
            vars: vars.to_vec(),
        }
    }

    pub fn not(f: QfFormula) -> Self {
        QfFormula::Not(Box::new(f))
    }

    /// Largest variable index mentioned, plus one.
    pub fn var_span(&self) -> usize {
        match self {
            QfFormula::True | QfFormula::False => 0,
            QfFormula::Atom { vars, .. } => vars.iter().map(|v| v + 1).max().unwrap_or(0),
            QfFormula::Eq(a, b) => (*a).max(*b) + 1,
            QfFormula::Not(f) => f.var_span(),
            QfFormula::And(fs) | QfFormula::Or(fs) => {
                fs.iter().map(|f| f.var_span()).max().unwrap_or(0)
            }
        }
    }

    /// Rename variables: `v` becomes `map[v]`.
    pub fn subst(&self, map: &[usize]) -> Result<QfFormula> {
        let get = |v: usize| -> Result<usize> {
            map.get(v)
                .copied()
                .ok_or_else(|| Error::IndexOutOfRange(format!("no substitution for variable {v}")))
        };
        Ok(match self {
            QfFormula::True => QfFormula::True,
            QfFormula::False => QfFormula::False,
            QfFormula::Atom { relation, vars } => QfFormula::Atom {
                relation: relation.clone(),
                vars: vars.iter().map(|&v| get(v)).collect::<Result<_>>()?,
            },
            QfFormula::Eq(a, b) => QfFormula::Eq(get(*a)?, get(*b)?),
            QfFormula::Not(f) => QfFormula::not(f.subst(map)?),
            QfFormula::And(fs) => {
                QfFormula::And(fs.iter().map(|f| f.subst(map)).collect::<Result<_>>()?)
            }
            QfFormula::Or(fs) => {
                QfFormula::Or(fs.iter().map(|f| f.subst(map)).collect::<Result<_>>()?)
            }
        })
    }

    /// Evaluate under an assignment of element indices to variables.
    pub fn eval(&self, s: &FinStructure, assignment: &[usize]) -> Result<bool> {
        match self {
            QfFormula::True => Ok(true),
            QfFormula::False => Ok(false),
            QfFormula::Atom { relation, vars } => {
                let tuple: Vec<usize> = vars
                    .iter()
                    .map(|&v| {
                        assignment.get(v).copied().ok_or_else(|| {
                            Error::IndexOutOfRange(format!("unassigned variable {v}"))
                        })
                    })
                    .collect::<Result<_>>()?;
                s.signature.relation(relation)?;
                Ok(s.holds(relation, &tuple))
            }
            QfFormula::Eq(a, b) => {
                let x = assignment
                    .get(*a)
                    .ok_or_else(|| Error::IndexOutOfRange(format!("unassigned variable {a}")))?;
                let y = assignment
                    .get(*b)
                    .ok_or_else(|| Error::IndexOutOfRange(format!("unassigned variable {b}")))?;
                Ok(x == y)
            }
            QfFormula::Not(f) => Ok(!f.eval(s, assignment)?),
            QfFormula::And(fs) => {
                for f in fs {
                    if !f.eval(s, assignment)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            QfFormula::Or(fs) => {
                for f in fs {
                    if f.eval(s, assignment)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}

/// One slot of a demand atom: an anchor variable or the witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DemandSlot {
    Anchor(usize),
    Witness,
}

/// A single demanded atom relating the witness to anchor variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemandAtom {
    pub relation: String,
    pub slots: Vec<DemandSlot>,
    pub positive: bool,
}

/// A conjunctive one-point extension demand: the witness `y` must satisfy
/// every listed atom against the anchor tuple `x_0..x_{arity-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub anchor_arity: usize,
    pub atoms: Vec<DemandAtom>,
}

impl Demand {
    pub fn new(anchor_arity: usize, atoms: Vec<DemandAtom>) -> Result<Self> {
        for a in &atoms {
            for s in &a.slots {
                if let DemandSlot::Anchor(i) = s {
                    if *i >= anchor_arity {
                        return Err(Error::IndexOutOfRange(format!(
                            "anchor slot {i} out of range (arity {anchor_arity})"
                        )));
                    }
                }
            }
            if !a.slots.contains(&DemandSlot::Witness) {
                return Err(Error::UnsupportedFormula(
                    "demand atom does not mention the witness".into(),
                ));
            }
        }
        Ok(Demand {
            anchor_arity,
            atoms,
        })
    }

    /// Binary-edge demand: `E(y, x_i)` (or its negation) for each listed anchor.
    pub fn edge_demand(relation: &str, signs: &[bool]) -> Self {
        Demand {
            anchor_arity: signs.len(),
            atoms: signs
                .iter()
                .enumerate()
                .map(|(i, &positive)| DemandAtom {
                    relation: relation.to_string(),
                    slots: vec![DemandSlot::Witness, DemandSlot::Anchor(i)],
                    positive,
                })
                .collect(),
        }
    }

    /// The demand as a quantifier-free formula with variables
    /// `0..anchor_arity` for the anchors and `anchor_arity` for the witness.
    pub fn body(&self) -> QfFormula {
        let mut parts = Vec::new();
        for a in &self.atoms {
            let vars: Vec<usize> = a
                .slots
                .iter()
                .map(|s| match s {
                    DemandSlot::Anchor(i) => *i,
                    DemandSlot::Witness => self.anchor_arity,
                })
                .collect();
            let atom = QfFormula::atom(a.relation.clone(), &vars);
            parts.push(if a.positive {
                atom
            } else {
                QfFormula::not(atom)
            });
        }
        QfFormula::And(parts)
    }

    /// Does witness element `y` satisfy the demand against `anchors` in `s`?
    pub fn satisfied(&self, s: &FinStructure, anchors: &[usize], y: usize) -> Result<bool> {
        if anchors.len() != self.anchor_arity {
            return Err(Error::IndexOutOfRange(format!(
                "demand anchor arity {} but got {} anchors",
                self.anchor_arity,
                anchors.len()
            )));
        }
        let mut assignment = anchors.to_vec();
        assignment.push(y);
        self.body().eval(s, &assignment)
    }

    /// Is some element of `s` (including the anchors themselves) a witness?
    pub fn has_witness(&self, s: &FinStructure, anchors: &[usize]) -> Result<bool> {
        for y in 0..s.size() {
            if self.satisfied(s, anchors, y)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// A pithy Pi-2 sentence: for all anchor tuples, some `y` satisfies the body.
/// Variables `0..anchor_arity` are universal, `anchor_arity` is the bounded
/// existential.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PithyPi2Sentence {
    pub anchor_arity: usize,
    pub body: QfFormula,
}

impl PithyPi2Sentence {
    pub fn new(anchor_arity: usize, body: QfFormula) -> Result<Self> {
        if body.var_span() > anchor_arity + 1 {
            return Err(Error::UnsupportedFormula(format!(
                "body mentions variable {} but only {} universals plus one existential are bound",
                body.var_span() - 1,
                anchor_arity
            )));
        }
        Ok(PithyPi2Sentence { anchor_arity, body })
    }

    pub fn from_demand(d: &Demand) -> Self {
        PithyPi2Sentence {
            anchor_arity: d.anchor_arity,
            body: d.body(),
        }
    }

    /// Brute-force truth in a finite structure.
    pub fn holds_in(&self, s: &FinStructure) -> Result<bool> {
        let mut assignment = vec![0usize; self.anchor_arity + 1];
        self.holds_rec(s, &mut assignment, 0)
    }

    fn holds_rec(&self, s: &FinStructure, assignment: &mut Vec<usize>, depth: usize) -> Result<bool> {
        if depth == self.anchor_arity {
            if s.size() == 0 {
                // vacuous: no anchor tuples exist only when arity > 0
                return Ok(self.anchor_arity > 0);
            }
            for y in 0..s.size() {
                assignment[self.anchor_arity] = y;
                if self.body.eval(s, assignment)? {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        for x in 0..s.size() {
            assignment[depth] = x;
            if !self.holds_rec(s, assignment, depth + 1)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
