//! Names the violated invariant when a stored structure fails its class.

use anyhow::Result;
use num_rational::BigRational;

use invforge_core::classes::metric::values_of_signature;
use invforge_core::classes::AmalgamationClass;
use invforge_core::structure::FinStructure;

/// `None` when the structure belongs to the class; otherwise a short name of
/// the first violated invariant, with the offending elements spelled out.
pub fn diagnose(class: &AmalgamationClass, s: &FinStructure) -> Result<Option<String>> {
    if class.contains(s)? {
        return Ok(None);
    }
    let reason = match class {
        AmalgamationClass::Graphs => graph_layers(s, &[]),
        AmalgamationClass::TriangleFree => graph_layers(s, &[0]),
        AmalgamationClass::Kaleidoscope { triangle_free_base } => {
            let forbidden: Vec<usize> = if *triangle_free_base { vec![0] } else { vec![] };
            graph_layers(s, &forbidden)
        }
        AmalgamationClass::Metric { .. } => metric_schemata(s),
    };
    Ok(Some(reason.unwrap_or_else(|| "class membership".to_string())))
}

/// Check every binary layer for graph axioms; layers listed in
/// `triangle_free` must additionally avoid triangles.
fn graph_layers(s: &FinStructure, triangle_free: &[usize]) -> Option<String> {
    let n = s.size();
    for (layer, rel) in s.signature.relations.iter().enumerate() {
        let name = &rel.name;
        for i in 0..n {
            if s.holds(name, &[i, i]) {
                return Some(format!("irreflexivity of {name} at ({})", s.elements()[i]));
            }
            for j in 0..n {
                if s.holds(name, &[i, j]) != s.holds(name, &[j, i]) {
                    return Some(format!(
                        "symmetry of {name} at ({} {})",
                        s.elements()[i],
                        s.elements()[j]
                    ));
                }
            }
        }
        if triangle_free.contains(&layer) {
            for i in 0..n {
                for j in i + 1..n {
                    if !s.holds(name, &[i, j]) {
                        continue;
                    }
                    for k in j + 1..n {
                        if s.holds(name, &[j, k]) && s.holds(name, &[i, k]) {
                            return Some(format!(
                                "forbidden substructure: {name} triangle at ({} {} {})",
                                s.elements()[i],
                                s.elements()[j],
                                s.elements()[k]
                            ));
                        }
                    }
                }
            }
        }
    }
    None
}

/// Check the threshold-relational metric schemata in a fixed order, naming
/// the first failing pair or triple.
fn metric_schemata(s: &FinStructure) -> Option<String> {
    let values: Vec<BigRational> = values_of_signature(&s.signature).ok()?;
    let names: Vec<String> = s.signature.relations.iter().map(|r| r.name.clone()).collect();
    let n = s.size();
    for name in &names {
        for i in 0..n {
            // thresholds are non-negative, so every d_q must hold on the diagonal
            if !s.holds(name, &[i, i]) {
                return Some(format!("reflexivity of {name} at ({})", s.elements()[i]));
            }
            for j in 0..n {
                if s.holds(name, &[i, j]) != s.holds(name, &[j, i]) {
                    return Some(format!(
                        "symmetry of {name} at ({} {})",
                        s.elements()[i],
                        s.elements()[j]
                    ));
                }
            }
        }
    }
    // larger thresholds contain smaller ones
    for q in 0..values.len().saturating_sub(1) {
        for i in 0..n {
            for j in 0..n {
                if s.holds(&names[q], &[i, j]) && !s.holds(&names[q + 1], &[i, j]) {
                    return Some(format!(
                        "threshold monotonicity {} vs {} at ({} {})",
                        names[q],
                        names[q + 1],
                        s.elements()[i],
                        s.elements()[j]
                    ));
                }
            }
        }
    }
    // triangle schema: d_q(i,j) and d_r(j,k) force d_t(i,k) for the least
    // threshold t >= q + r, when one exists
    for (qi, qname) in names.iter().enumerate() {
        for (ri, rname) in names.iter().enumerate() {
            let sum = &values[qi] + &values[ri];
            let Some(ti) = values.iter().position(|v| *v >= sum) else {
                continue;
            };
            for i in 0..n {
                for j in 0..n {
                    if !s.holds(qname, &[i, j]) {
                        continue;
                    }
                    for k in 0..n {
                        if s.holds(rname, &[j, k]) && !s.holds(&names[ti], &[i, k]) {
                            return Some(format!(
                                "triangle schema {qname}+{rname}=>{} at ({} {} {})",
                                names[ti],
                                s.elements()[i],
                                s.elements()[j],
                                s.elements()[k]
                            ));
                        }
                    }
                }
            }
        }
    }
    None
}
