//! Morleyization of a single formula by a fresh relation symbol.
//!
//! Given a base signature and a formula — either quantifier-free in free
//! variables `x_0..x_{l-1}`, or a single existential `exists y. phi` with
//! quantifier-free `phi` — this module produces the expanded signature with a
//! fresh relation `R` of arity `l + 1` (a dummy final slot `w` keeps every
//! defining relation at least unary even for sentences), the defining axioms
//! as pithy Pi-2 sentences, and the canonical expansion of any finite
//! structure.

use crate::error::{Error, Result};
use crate::formula::{PithyPi2Sentence, QfFormula};
use crate::signature::{RelationSymbol, Signature};
use crate::structure::FinStructure;

/// A formula eligible for Morleyization: `matrix` over variables
/// `0..free_count`, plus variable `free_count` as the existential when
/// `existential` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorleyFormula {
    pub free_count: usize,
    pub matrix: QfFormula,
    pub existential: bool,
}

impl MorleyFormula {
    pub fn qf(free_count: usize, matrix: QfFormula) -> Result<Self> {
        if matrix.var_span() > free_count {
            return Err(Error::UnsupportedFormula(format!(
                "matrix mentions variable {} outside {} free variables",
                matrix.var_span() - 1,
                free_count
            )));
        }
        Ok(MorleyFormula {
            free_count,
            matrix,
            existential: false,
        })
    }

    pub fn exists(free_count: usize, matrix: QfFormula) -> Result<Self> {
        if matrix.var_span() > free_count + 1 {
            return Err(Error::UnsupportedFormula(format!(
                "matrix mentions variable {} outside {} free variables plus one existential",
                matrix.var_span() - 1,
                free_count
            )));
        }
        Ok(MorleyFormula {
            free_count,
            matrix,
            existential: true,
        })
    }

    /// Does the formula hold of `tuple` in `s` (brute-forcing the existential)?
    pub fn holds_of(&self, s: &FinStructure, tuple: &[usize]) -> Result<bool> {
        if tuple.len() != self.free_count {
            return Err(Error::IndexOutOfRange(format!(
                "formula has {} free variables, tuple has {}",
                self.free_count,
                tuple.len()
            )));
        }
        if !self.existential {
            return self.matrix.eval(s, tuple);
        }
        let mut assignment = tuple.to_vec();
        assignment.push(0);
        for y in 0..s.size() {
            assignment[self.free_count] = y;
            if self.matrix.eval(s, &assignment)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// The result of Morleyizing one formula.
#[derive(Debug, Clone)]
pub struct MorleyExpansion {
    pub formula: MorleyFormula,
    pub relation: RelationSymbol,
    pub signature: Signature,
    pub axioms: Vec<PithyPi2Sentence>,
}

/// Expand `base` by a fresh defining relation for `formula`.
///
/// The new relation has arity `free_count + 1` and lives on a fresh layer.
/// The returned axioms pin `R(x_0..x_{l-1}, w)` to the formula, with the dummy
/// slot `w` unconstrained.
pub fn pithy_pi2_expansion(
    base: &Signature,
    formula: &MorleyFormula,
    relation_name: &str,
) -> Result<MorleyExpansion> {
    if base.has_relation(relation_name) {
        return Err(Error::SignatureMismatch(format!(
            "relation {relation_name} already present"
        )));
    }
    let l = formula.free_count;
    let relation = RelationSymbol {
        name: relation_name.to_string(),
        arity: l + 1,
        layer: base.layers,
    };
    let mut relations = base.relations.clone();
    relations.push(relation.clone());
    let signature = Signature::new(relations, base.layers + 1)?;

    let r_atom = |witness_slot: usize| -> QfFormula {
        let mut vars: Vec<usize> = (0..l).collect();
        vars.push(witness_slot);
        QfFormula::atom(relation_name, &vars)
    };

    let mut axioms = Vec::new();
    if !formula.existential {
        // forall x_0..x_{l-1}, w (exists dummy y): R(x,w) <-> phi(x).
        // Universals are 0..=l (w at slot l); the existential l+1 is unused.
        let r = r_atom(l);
        let body = QfFormula::And(vec![
            QfFormula::Or(vec![QfFormula::not(r.clone()), formula.matrix.clone()]),
            QfFormula::Or(vec![r, QfFormula::not(formula.matrix.clone())]),
        ]);
        axioms.push(PithyPi2Sentence::new(l + 1, body)?);
    } else {
        // forall x, w exists y: R(x,w) -> phi(x,y).
        // Universals 0..=l (w at slot l); existential at l+1; the matrix's
        // existential variable l is renamed to l+1.
        let mut map: Vec<usize> = (0..l).collect();
        map.push(l + 1);
        let phi_y = formula.matrix.subst(&map)?;
        axioms.push(PithyPi2Sentence::new(
            l + 1,
            QfFormula::Or(vec![QfFormula::not(r_atom(l)), phi_y]),
        )?);
        // forall x, w, z (exists dummy): phi(x,z) -> R(x,w).
        // Universals 0..=l+1 (w at l, z at l+1); existential l+2 unused.
        let phi_z = formula.matrix.subst(&map)?;
        axioms.push(PithyPi2Sentence::new(
            l + 2,
            QfFormula::Or(vec![QfFormula::not(phi_z), r_atom(l)]),
        )?);
    }

    Ok(MorleyExpansion {
        formula: formula.clone(),
        relation,
        signature,
        axioms,
    })
}

impl MorleyExpansion {
    /// The canonical expansion: `R(a, w)` holds for every `w` exactly when the
    /// formula holds of `a` in the base structure.
    pub fn expand_structure(&self, s: &FinStructure) -> Result<FinStructure> {
        let base_layers = self.signature.layers - 1;
        if s.signature != self.signature.restrict_layers(base_layers)? {
            return Err(Error::SignatureMismatch(
                "structure signature does not match the expansion base".into(),
            ));
        }
        let mut out = FinStructure::new(self.signature.clone(), s.elements().to_vec())?;
        for rel in &s.signature.relations {
            for tuple in s.tuples(&rel.name) {
                out.add_tuple(&rel.name, tuple)?;
            }
        }
        let l = self.formula.free_count;
        let mut tuple = vec![0usize; l];
        loop {
            if self.formula.holds_of(s, &tuple)? {
                for w in 0..s.size() {
                    let mut full = tuple.clone();
                    full.push(w);
                    out.add_tuple(&self.relation.name, &full)?;
                }
            }
            // advance the odometer over all l-tuples
            let mut pos = 0;
            loop {
                if pos == l {
                    return Ok(out);
                }
                tuple[pos] += 1;
                if tuple[pos] < s.size() {
                    break;
                }
                tuple[pos] = 0;
                pos += 1;
            }
            if s.size() == 0 {
                return Ok(out);
            }
        }
    }

    /// Do all defining axioms hold in the expanded structure?
    pub fn axioms_hold(&self, expanded: &FinStructure) -> Result<bool> {
        for ax in &self.axioms {
            if !ax.holds_in(expanded)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
