//! End-to-end acceptance gates.
//!
//! Each test guards one numbered release criterion and prints a single
//! `ACCEPTANCE NN <name>: PASS` line (run with `--nocapture` to see them
//! all); failures panic with the collected evidence.  Every quantitative
//! tolerance is pinned here, independently of the library internals, and
//! each gate re-derives its expected values from scratch: exact answers by
//! direct enumeration in this file, sampled answers against closed-form
//! bounds recomputed from the row data.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use invforge_core::classes::metric::{
    close_matrix, complete_to_tms, contains_metric, metric_to_structure, rat, relation_name,
    structure_to_metric, values_of_signature, MetricThresholds, RationalMetricSpace,
};
use invforge_core::classes::AmalgamationClass;
use invforge_core::density::{full_hom_density, mc_full_hom_density};
use invforge_core::formula::QfFormula;
use invforge_core::limit::{
    address_type, eta_report, exchangeability_report, lambda_min, materialize_stage, verify_suite,
    LimitEngine,
};
use invforge_core::mc::derive_rng;
use invforge_core::morley::{pithy_pi2_expansion, MorleyFormula};
use invforge_core::qftype::qf_type_of;
use invforge_core::schedule::CyclicSchedule;
use invforge_core::signature::Signature;
use invforge_core::structure::{complete_graph, path_graph, FinStructure};
use invforge_core::toy::lazy::LazyToy;
use invforge_core::toy::reports::{delta_report, gamma_report, very_comb_lemma};
use invforge_core::Error;

type Rat = BigRational;

const SEED: u64 = 0x5EED_2026;
const TRIALS: u64 = 100_000;

/// One acceptance gate: collects failures, prints the verdict, panics on any.
struct Gate {
    num: u32,
    name: &'static str,
    t0: Instant,
    failures: Vec<String>,
}

impl Gate {
    fn new(num: u32, name: &'static str) -> Self {
        Gate {
            num,
            name,
            t0: Instant::now(),
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn check(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        if !cond {
            self.failures.push(msg());
        }
    }

    fn absorb(&mut self, more: Vec<String>) {
        self.failures.extend(more);
    }

    fn conclude(self) {
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "ACCEPTANCE {:02} {}: {} ({:.1}s)",
            self.num,
            self.name,
            verdict,
            self.t0.elapsed().as_secs_f64()
        );
        let shown: Vec<&String> = self.failures.iter().take(20).collect();
        assert!(
            self.failures.is_empty(),
            "{} failure(s) in gate {:02} {} (showing up to 20):\n{}",
            self.failures.len(),
            self.num,
            self.name,
            shown
                .iter()
                .map(|s| format!("  - {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        );
    }
}

fn rat_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
}

/// All labelled graphs on `n` vertices over the single binary edge relation.
fn all_graphs(n: usize) -> Vec<FinStructure> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    (0..1u32 << pairs.len())
        .map(|mask| {
            let mut s =
                FinStructure::with_numbered_elements(Signature::single_binary(), n).unwrap();
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    s.add_edge("E0", i, j).unwrap();
                }
            }
            s
        })
        .collect()
}

/// Independent oracle: the fraction of vertex maps preserving every atomic
/// relation and non-relation, by direct enumeration of all `|G|^|F|` maps.
fn brute_density(f: &FinStructure, g: &FinStructure) -> Rat {
    let k = f.size();
    let m = g.size() as u64;
    let total = m.pow(k as u32);
    let mut map = vec![0usize; k];
    let mut hits = 0u64;
    for code in 0..total {
        let mut c = code;
        for slot in map.iter_mut() {
            *slot = (c % m) as usize;
            c /= m;
        }
        let ok = (0..k).all(|i| {
            (0..k).all(|j| f.holds("E0", &[i, j]) == g.holds("E0", &[map[i], map[j]]))
        });
        if ok {
            hits += 1;
        }
    }
    Rat::new(BigInt::from(hits), BigInt::from(total))
}

#[test]
fn criterion_01_density_oracle() {
    let mut gate = Gate::new(1, "density oracle");
    let fs: Vec<FinStructure> = (1..=3).flat_map(all_graphs).collect();
    let gs: Vec<FinStructure> = (1..=5).flat_map(all_graphs).collect();
    gate.check(fs.len() == 11, || format!("expected 11 F graphs, got {}", fs.len()));
    gate.check(gs.len() == 1099, || {
        format!("expected 1099 G graphs, got {}", gs.len())
    });

    // Exact equality against in-test enumeration on every pair, plus a full
    // Monte-Carlo sweep at 10^4 trials judged against the true standard
    // error, in one parallel pass.
    let sweep: Vec<String> = gs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(gi, g)| {
            let mut local = Vec::new();
            for (fi, f) in fs.iter().enumerate() {
                let exact = full_hom_density(f, g).unwrap();
                let brute = brute_density(f, g);
                if exact != brute {
                    local.push(format!(
                        "pair F{fi} x G{gi}: library {exact} vs enumeration {brute}"
                    ));
                    continue;
                }
                let p = rat_f64(&exact);
                let est = mc_full_hom_density(f, g, 10_000, SEED ^ ((fi as u64) << 32 | gi as u64))
                    .unwrap();
                let sigma_true = (p * (1.0 - p) / 10_000.0).sqrt();
                if (est.p_hat - p).abs() > 5.0 * sigma_true + 1e-12 {
                    local.push(format!(
                        "pair F{fi} x G{gi}: estimate {} is {:.1} true sigmas from {p}",
                        est.p_hat,
                        if sigma_true > 0.0 {
                            (est.p_hat - p).abs() / sigma_true
                        } else {
                            f64::INFINITY
                        }
                    ));
                }
            }
            local
        })
        .collect();
    gate.absorb(sweep);

    // Focused 10^5-trial check within three reported sigmas on every pair
    // with |G| <= 3 (the regime where all densities are coarse multiples of
    // 1/27 or larger, so three sigmas is a sound deterministic gate).
    let small: Vec<usize> = gs
        .iter()
        .enumerate()
        .filter(|(_, g)| g.size() <= 3)
        .map(|(i, _)| i)
        .collect();
    let focused: Vec<String> = small
        .par_iter()
        .flat_map_iter(|&gi| {
            let g = &gs[gi];
            let mut local = Vec::new();
            for (fi, f) in fs.iter().enumerate() {
                let p = rat_f64(&full_hom_density(f, g).unwrap());
                let est =
                    mc_full_hom_density(f, g, TRIALS, SEED ^ ((fi as u64) << 40 | gi as u64))
                        .unwrap();
                if (est.p_hat - p).abs() > 3.0 * est.sigma + 1e-12 {
                    local.push(format!(
                        "focused pair F{fi} x G{gi}: estimate {} vs exact {p} (sigma {})",
                        est.p_hat, est.sigma
                    ));
                }
            }
            local
        })
        .collect();
    gate.absorb(focused);

    // Spot values.
    let k2 = complete_graph(2);
    let k3 = complete_graph(3);
    let p2 = path_graph(2);
    let e23 = full_hom_density(&k2, &k3).unwrap();
    gate.check(e23 == rat(2, 3), || format!("t(K2,K3) = {e23}, want 2/3"));
    let p23 = full_hom_density(&p2, &k3).unwrap();
    gate.check(p23 == rat(2, 9), || format!("t(P2,K3) = {p23}, want 2/9"));
    gate.conclude();
}

#[test]
fn criterion_02_mass_bookkeeping() {
    let mut gate = Gate::new(2, "exact mass bookkeeping");
    for name in ["graphs", "triangle-free", "kaleidoscope:graphs", "metric"] {
        let class = AmalgamationClass::from_name(name).unwrap();
        let engine = LimitEngine::build(class, CyclicSchedule::default_catalog(), 6).unwrap();
        let report = verify_suite(&engine, "acc2", SEED).unwrap();
        for row in report.rows.iter().filter(|r| !r.pass) {
            gate.fail(format!(
                "{name}: verification row n={} {} failed (estimate {})",
                row.n, row.type_id, row.estimate
            ));
        }
        // Fiber rows must exist at every built stage.
        for n in 2..=6u64 {
            gate.check(
                report
                    .rows
                    .iter()
                    .any(|r| r.n == n && r.type_id.starts_with("fiber")),
                || format!("{name}: no fiber row at stage {n}"),
            );
        }
        // Independent halving chain on the exact stage records.
        for n in 3..=6 {
            let cur = &engine.stage(n).gamma;
            let prev = &engine.stage(n - 1).gamma;
            let doubled = cur + cur;
            gate.check(doubled <= *prev, || {
                format!("{name}: 2 * Gamma_{n} = {doubled} exceeds Gamma_{}", n - 1)
            });
            gate.check(cur.is_positive(), || format!("{name}: Gamma_{n} not positive"));
        }
        // Independent full-fiber identity: the materialized boundary's exact
        // masses sum to the total injected mass, stage by stage.
        for n in 2..=3 {
            let mat = materialize_stage(&engine, n, 5000).unwrap();
            let mut total = Rat::zero();
            for a in &mat.addresses {
                total += engine.address_mass(a, n).unwrap();
            }
            let want = &engine.stage(n).total_mass;
            gate.check(total == *want, || {
                format!("{name}: stage {n} boundary mass {total} != introduced mass {want}")
            });
        }
    }
    gate.conclude();
}

/// Exact probability that `n` balls dropped uniformly into `lam` boxes
/// collide: `1 - prod_{i<n} (lam - i)/lam`.
fn collision(lam: u64, n: usize) -> Rat {
    let mut product = Rat::one();
    for i in 0..n as u64 {
        product *= Rat::new(BigInt::from(lam - i), BigInt::from(lam));
    }
    Rat::one() - product
}

#[test]
fn criterion_03_lambda_correctness() {
    let mut gate = Gate::new(3, "collision box counts");
    gate.check(lambda_min(2) == 5, || format!("lambda_min(2) = {}", lambda_min(2)));
    gate.check(lambda_min(3) == 24, || format!("lambda_min(3) = {}", lambda_min(3)));
    gate.check(lambda_min(4) == 95, || format!("lambda_min(4) = {}", lambda_min(4)));
    gate.check(collision(5, 2) == rat(1, 5), || {
        format!("collision(5,2) = {}", collision(5, 2))
    });
    gate.check(collision(5, 2) < rat(1, 4), || "1/5 not below 1/4".into());
    gate.check(collision(4, 2) >= rat(1, 4), || {
        format!("collision(4,2) = {} below 1/4", collision(4, 2))
    });
    gate.check(
        collision(24, 3) == Rat::new(BigInt::from(70), BigInt::from(576)),
        || format!("collision(24,3) = {}", collision(24, 3)),
    );
    gate.check(collision(24, 3) < rat(1, 8), || "70/576 not below 1/8".into());
    gate.check(
        collision(23, 3) == Rat::new(BigInt::from(67), BigInt::from(529)),
        || format!("collision(23,3) = {}", collision(23, 3)),
    );
    gate.check(collision(23, 3) > rat(1, 8), || "67/529 not above 1/8".into());
    for n in 2..=8usize {
        let lam = lambda_min(n);
        let bound = Rat::new(BigInt::one(), BigInt::from(1u64 << n));
        gate.check(collision(lam, n) < bound, || {
            format!("collision({lam},{n}) = {} not below 2^-{n}", collision(lam, n))
        });
        gate.check(collision(lam - 1, n) >= bound, || {
            format!(
                "collision({},{n}) = {} below 2^-{n}, so lambda_min({n}) overshoots",
                lam - 1,
                collision(lam - 1, n)
            )
        });
    }
    gate.conclude();
}

#[test]
fn criterion_04_delta_bound() {
    let mut gate = Gate::new(4, "type-frequency drift bound");
    let lazy = LazyToy::new(&complete_graph(2), CyclicSchedule::default_catalog(), 8).unwrap();
    let report = delta_report(&lazy, 3, 8, TRIALS, SEED, "acc4");
    // Arities 1..3 give 1 + 2 + 8 catalog types, each with rows at stages 2..8.
    gate.check(report.rows.len() == 77, || {
        format!("expected 77 drift rows, got {}", report.rows.len())
    });
    for row in &report.rows {
        let arity = (row.type_id.as_bytes()[1] - b'0') as f64;
        let bound = arity * 2f64.powi(-(row.n as i32 - 1)) + 3.0 * row.sigma;
        gate.check((row.bound - bound).abs() <= 1e-9, || {
            format!(
                "row {} n={}: reported bound {} differs from {bound}",
                row.type_id, row.n, row.bound
            )
        });
        gate.check(row.pass && row.estimate <= bound + 1e-12, || {
            format!(
                "row {} n={}: drift {} exceeds {bound}",
                row.type_id, row.n, row.estimate
            )
        });
    }
    gate.conclude();
}

#[test]
fn criterion_05_gamma_bound() {
    let mut gate = Gate::new(5, "coverage lower bound");
    let schedule = CyclicSchedule::default_catalog();
    let lazy = LazyToy::new(&complete_graph(2), schedule.clone(), 8).unwrap();
    let report = gamma_report(&lazy, &schedule, &[2, 3, 4, 5, 6, 7, 8], 6, TRIALS, SEED, "acc5");
    gate.check(report.rows.len() == 32, || {
        format!("expected 32 coverage rows, got {}", report.rows.len())
    });
    // The product lower bound must hold at the top stage for every demand.
    for row in report.rows.iter().filter(|r| r.n == 8) {
        gate.check(
            row.pass && row.estimate >= row.bound - 3.0 * row.sigma - 1e-12,
            || {
                format!(
                    "demand {}: coverage {} below {} - 3*{}",
                    row.type_id, row.estimate, row.bound, row.sigma
                )
            },
        );
    }
    // Coverage is nondecreasing in the stage, up to three combined sigmas.
    let mut groups: BTreeMap<&str, Vec<&invforge_core::report::CsvRow>> = BTreeMap::new();
    for row in &report.rows {
        groups.entry(&row.type_id).or_default().push(row);
    }
    for (id, rows) in &groups {
        for w in rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            gate.check(b.n == a.n + 1 || b.n > a.n, || "rows out of order".into());
            gate.check(
                b.estimate >= a.estimate - 3.0 * (a.sigma + b.sigma) - 1e-12,
                || {
                    format!(
                        "demand {id}: coverage drops {} -> {} between stages {} and {}",
                        a.estimate, b.estimate, a.n, b.n
                    )
                },
            );
        }
    }
    // Tail-product inequality at the minimal admissible start index.
    for (c, want_k) in [(1u32, 1u32), (2, 2), (3, 2)] {
        let chk = very_comb_lemma(c);
        gate.check(chk.pass && chk.product >= chk.rhs, || {
            format!("c={c}: product {} below rhs {}", chk.product, chk.rhs)
        });
        gate.check(chk.k == want_k, || {
            format!("c={c}: minimal start index {} (expected {want_k})", chk.k)
        });
        gate.check(chk.terms >= 30, || {
            format!("c={c}: only {} factors accumulated", chk.terms)
        });
    }
    gate.conclude();
}

#[test]
fn criterion_06_eta_decay() {
    let mut gate = Gate::new(6, "target-type decay");
    let run = |name: &'static str| {
        let class = AmalgamationClass::from_name(name).unwrap();
        let engine = LimitEngine::build(class, CyclicSchedule::default_catalog(), 8).unwrap();
        eta_report(&engine, 8, TRIALS, "acc6", SEED).unwrap()
    };
    let (kal, met) = rayon::join(|| run("kaleidoscope:graphs"), || run("metric"));
    for (name, report) in [("kaleidoscope:graphs", kal), ("metric", met)] {
        gate.check(report.rows.len() == 6, || {
            format!("{name}: expected 6 depth rows, got {}", report.rows.len())
        });
        for (i, row) in report.rows.iter().enumerate() {
            let g = (3 + i) as i32;
            gate.check(row.n == g as u64, || format!("{name}: row order broke at {}", row.n));
            let bound = 2f64.powi(-g) + 0.75f64.powi(g - 2) + 3.0 * row.sigma;
            gate.check(row.pass && row.estimate <= bound, || {
                format!(
                    "{name}: eta at depth {g} is {} above bound {bound}",
                    row.estimate
                )
            });
        }
        for w in report.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            gate.check(
                b.estimate <= a.estimate + 2.0 * (a.sigma + b.sigma),
                || {
                    format!(
                        "{name}: eta grows {} -> {} between depths {} and {}",
                        a.estimate, b.estimate, a.n, b.n
                    )
                },
            );
        }
        let first = report.rows.first().unwrap();
        let last = report.rows.last().unwrap();
        gate.check(last.estimate < first.estimate, || {
            format!(
                "{name}: eta not strictly smaller at depth 8 ({} vs {})",
                last.estimate, first.estimate
            )
        });
    }
    gate.conclude();
}

#[test]
fn criterion_07_lazy_matches_materialized() {
    let mut gate = Gate::new(7, "address oracle vs materialized");
    let names = [
        "graphs",
        "triangle-free",
        "kaleidoscope:graphs",
        "kaleidoscope:triangle-free",
        "metric",
    ];
    for (ci, name) in names.iter().enumerate() {
        let class = AmalgamationClass::from_name(name).unwrap();
        let engine = LimitEngine::build(class, CyclicSchedule::default_catalog(), 3).unwrap();
        for n in 2..=3usize {
            let mat = materialize_stage(&engine, n, 5000).unwrap();
            let sz = mat.addresses.len();
            let labels = mat.structure.elements().to_vec();
            // Singletons, exhaustively.
            for i in 0..sz {
                let lazy = address_type(&engine, &[mat.addresses[i].clone()], n).unwrap();
                let dense = qf_type_of(&mat.structure, &labels[i..=i]).unwrap();
                gate.check(lazy == dense, || {
                    format!("{name} stage {n}: singleton {} disagrees", labels[i])
                });
            }
            // Every ordered pair of distinct addresses; with a binary
            // signature these determine the type of any distinct tuple.
            let pair_fails: Vec<String> = (0..sz)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let mut local = Vec::new();
                    for j in 0..sz {
                        if i == j {
                            continue;
                        }
                        let pair = [mat.addresses[i].clone(), mat.addresses[j].clone()];
                        let lazy = address_type(&engine, &pair, n).unwrap();
                        let tuple = [labels[i].clone(), labels[j].clone()];
                        let dense = qf_type_of(&mat.structure, &tuple).unwrap();
                        if lazy != dense {
                            local.push(format!(
                                "{name} stage {n}: pair ({}, {}) disagrees",
                                labels[i], labels[j]
                            ));
                        }
                    }
                    local
                })
                .collect();
            gate.absorb(pair_fails);
            // Triples: exhaustive when the boundary is tiny, sampled end-to-end
            // otherwise.
            let triples: Vec<[usize; 3]> = if sz <= 12 {
                let mut out = Vec::new();
                for i in 0..sz {
                    for j in 0..sz {
                        for k in 0..sz {
                            if i != j && j != k && i != k {
                                out.push([i, j, k]);
                            }
                        }
                    }
                }
                out
            } else {
                let mut rng = derive_rng(SEED, 70 + ci as u64);
                (0..20_000)
                    .map(|_| loop {
                        let t = [
                            rng.gen_range(0..sz),
                            rng.gen_range(0..sz),
                            rng.gen_range(0..sz),
                        ];
                        if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                            return t;
                        }
                    })
                    .collect()
            };
            let triple_fails: Vec<String> = triples
                .par_chunks(512)
                .flat_map_iter(|chunk| {
                    let mut local = Vec::new();
                    for t in chunk {
                        let addrs = [
                            mat.addresses[t[0]].clone(),
                            mat.addresses[t[1]].clone(),
                            mat.addresses[t[2]].clone(),
                        ];
                        let lazy = address_type(&engine, &addrs, n).unwrap();
                        let tuple = [
                            labels[t[0]].clone(),
                            labels[t[1]].clone(),
                            labels[t[2]].clone(),
                        ];
                        let dense = qf_type_of(&mat.structure, &tuple).unwrap();
                        if lazy != dense {
                            local.push(format!(
                                "{name} stage {n}: triple ({}, {}, {}) disagrees",
                                labels[t[0]], labels[t[1]], labels[t[2]]
                            ));
                        }
                    }
                    local
                })
                .collect();
            gate.absorb(triple_fails);
        }
    }
    gate.conclude();
}

/// A random exact metric on `k` points: grid-valued distances with
/// numerators `min_num..=16` over 4, then shortest-path closed.
fn random_metric(k: usize, min_num: i64, rng: &mut impl Rng) -> Vec<Vec<Rat>> {
    let mut m = vec![vec![Rat::zero(); k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = rat(rng.gen_range(min_num..=16), 4);
            m[i][j] = v.clone();
            m[j][i] = v;
        }
    }
    close_matrix(&mut m);
    m
}

fn space_of(m: &[Vec<Rat>]) -> RationalMetricSpace {
    let k = m.len();
    let mut map = BTreeMap::new();
    for i in 0..k {
        for j in (i + 1)..k {
            map.insert((i, j), m[i][j].clone());
        }
    }
    RationalMetricSpace::new(k, map).unwrap()
}

/// Largest default threshold at most `v` (inputs are at least 1/2).
fn snap_down(v: &Rat) -> Rat {
    if *v >= rat(2, 1) {
        rat(2, 1)
    } else if *v >= rat(1, 1) {
        rat(1, 1)
    } else {
        rat(1, 2)
    }
}

/// A random metric with every distance in the positive default threshold
/// set: snap a closed random metric down to the set, then repair any long
/// edge to the snapped sum of the other two until no triangle is violated.
/// Values only decrease within a finite set, so the loop terminates.
fn random_threshold_space(k: usize, rng: &mut impl Rng) -> Vec<Vec<Rat>> {
    let closed = random_metric(k, 2, rng);
    let mut m = vec![vec![Rat::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                m[i][j] = snap_down(&closed[i][j]);
            }
        }
    }
    loop {
        let mut changed = false;
        for x in 0..k {
            for z in 0..k {
                for y in 0..k {
                    if x == y || x == z || y == z {
                        continue;
                    }
                    let s = &m[x][z] + &m[z][y];
                    if m[x][y] > s {
                        let v = snap_down(&s);
                        m[x][y] = v.clone();
                        m[y][x] = v;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return m;
        }
    }
}

#[test]
fn criterion_08_metric_suite() {
    let mut gate = Gate::new(8, "threshold metric completion");
    let thresholds = MetricThresholds::default_set();
    let mut rng = derive_rng(SEED, 81);

    // Completion output is a genuine metric honoring every asserted and
    // refuted threshold atom, on 500 random partial models.
    for case in 0..500 {
        let k = 2 + case % 5;
        let m = random_metric(k, 1, &mut rng);
        let s = metric_to_structure(&space_of(&m), &thresholds);
        if !contains_metric(&s).unwrap() {
            gate.fail(format!("case {case}: generated structure not a model"));
            continue;
        }
        let comp = complete_to_tms(&s).unwrap();
        let values = values_of_signature(&s.signature).unwrap();
        for x in 0..k {
            gate.check(comp.delta[x][x].is_zero(), || {
                format!("case {case}: nonzero self-distance at {x}")
            });
            for y in 0..k {
                if x != y {
                    gate.check(comp.delta[x][y].is_positive(), || {
                        format!("case {case}: non-positive distance at ({x},{y})")
                    });
                }
                gate.check(comp.delta[x][y] == comp.delta[y][x], || {
                    format!("case {case}: asymmetry at ({x},{y})")
                });
                for z in 0..k {
                    let via = &comp.delta[x][z] + &comp.delta[z][y];
                    gate.check(comp.delta[x][y] <= via, || {
                        format!("case {case}: triangle breaks at ({x},{z},{y})")
                    });
                }
                for q in &values {
                    let asserted = s.holds(&relation_name(q), &[x, y]);
                    if asserted {
                        gate.check(comp.holds(x, y, q), || {
                            format!(
                                "case {case}: asserted d_{q}({x},{y}) but completion is {}",
                                comp.delta[x][y]
                            )
                        });
                    } else {
                        gate.check(comp.delta[x][y] > *q, || {
                            format!(
                                "case {case}: refuted d_{q}({x},{y}) but completion is {}",
                                comp.delta[x][y]
                            )
                        });
                    }
                }
                // Threshold monotonicity of the completed relation family.
                for w in values.windows(2) {
                    gate.check(
                        !comp.holds(x, y, &w[0]) || comp.holds(x, y, &w[1]),
                        || format!("case {case}: monotonicity breaks at ({x},{y})"),
                    );
                }
            }
        }
    }

    // Round trip: threshold-valued spaces survive structure encoding exactly.
    for case in 0..500 {
        let k = 2 + case % 5;
        let snapped = random_threshold_space(k, &mut rng);
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    let via = &snapped[x][z] + &snapped[z][y];
                    gate.check(snapped[x][y] <= via, || {
                        format!("case {case}: snapped matrix is not a metric")
                    });
                }
            }
        }
        let space = space_of(&snapped);
        let s = metric_to_structure(&space, &thresholds);
        let back = structure_to_metric(&s).unwrap();
        for i in 0..k {
            gate.check(back[&(i, i)] == Some(rat(0, 1)), || {
                format!("case {case}: diagonal readout at {i} is not zero")
            });
            for j in (i + 1)..k {
                gate.check(back[&(i, j)] == Some(snapped[i][j].clone()), || {
                    format!(
                        "case {case}: pair ({i},{j}) reads {:?}, want {}",
                        back[&(i, j)],
                        snapped[i][j]
                    )
                });
            }
        }
    }
    gate.conclude();
}

#[test]
fn criterion_09_splitting_laws() {
    let mut gate = Gate::new(9, "splitting restrictions and separation");
    let thresholds = MetricThresholds::default_set();
    for (ci, name) in ["kaleidoscope:graphs", "kaleidoscope:triangle-free", "metric"]
        .iter()
        .enumerate()
    {
        let class = AmalgamationClass::from_name(name).unwrap();
        let ell = class.declared_splitting_order().unwrap();
        gate.check(ell == 2, || format!("{name}: declared order {ell}, expected 2"));
        let mut rng = derive_rng(SEED, 90 + ci as u64);
        for case in 0..100usize {
            let k = 2 + case % 2;
            let s = match &class {
                AmalgamationClass::Metric { .. } => {
                    let snapped = random_threshold_space(k, &mut rng);
                    metric_to_structure(&space_of(&snapped), &thresholds)
                }
                _ => {
                    let layers = 1 + case % 3;
                    let mut s = FinStructure::with_numbered_elements(
                        Signature::layered_binary(layers),
                        k,
                    )
                    .unwrap();
                    let tf = name.contains("triangle-free");
                    for l in 0..layers {
                        let rel = format!("E{l}");
                        for i in 0..k {
                            for j in (i + 1)..k {
                                if rng.gen_bool(0.5) {
                                    s.add_edge(&rel, i, j).unwrap();
                                }
                            }
                        }
                        // Every layer copies the base class, so keep each
                        // one triangle-free where required.
                        if tf
                            && k == 3
                            && s.holds(&rel, &[0, 1])
                            && s.holds(&rel, &[1, 2])
                            && s.holds(&rel, &[0, 2])
                        {
                            s.remove_tuple(&rel, &[0, 1]).unwrap();
                            s.remove_tuple(&rel, &[1, 0]).unwrap();
                        }
                    }
                    s
                }
            };
            if !class.contains(&s).unwrap() {
                gate.fail(format!("{name} case {case}: generated structure left the class"));
                continue;
            }
            let labels = s.elements().to_vec();
            let q = qf_type_of(&s, &labels).unwrap();
            gate.check(q.non_redundant, || format!("{name} case {case}: type redundant"));
            let (layer_count, out) = class.split_type(&q).unwrap();
            gate.check(out.var_count == 2 * k, || {
                format!("{name} case {case}: split has {} variables", out.var_count)
            });
            gate.check(layer_count > q.signature.relations.len(), || {
                format!("{name} case {case}: no fresh split relations")
            });
            // Every one-per-variable selection restricts to the original type
            // on the original language (copies of variable i sit at 2i, 2i+1).
            for mask in 0..1usize << k {
                let sel: Vec<usize> = (0..k).map(|i| 2 * i + (mask >> i & 1)).collect();
                let r = out.restrict_vars(&sel).unwrap();
                for rel in &q.signature.relations {
                    for a in 0..k {
                        for b in 0..k {
                            let got = r.atom(&rel.name, &[a, b]).unwrap();
                            let want = q.atom(&rel.name, &[a, b]).unwrap();
                            gate.check(got == want, || {
                                format!(
                                    "{name} case {case}: selection {sel:?} flips {}({a},{b})",
                                    rel.name
                                )
                            });
                        }
                    }
                }
            }
            // All order-2 subtuple types are pairwise distinct, exhaustively.
            let mut subs = Vec::new();
            for i in 0..2 * k {
                for j in (i + 1)..2 * k {
                    subs.push(((i, j), out.restrict_vars(&[i, j]).unwrap()));
                }
            }
            for a in 0..subs.len() {
                for b in (a + 1)..subs.len() {
                    gate.check(subs[a].1 != subs[b].1, || {
                        format!(
                            "{name} case {case}: pairs {:?} and {:?} share a type",
                            subs[a].0, subs[b].0
                        )
                    });
                }
            }
        }
    }
    // Classes without a declared splitting refuse.
    let edge = qf_type_of(&complete_graph(2), &["0".into(), "1".into()]).unwrap();
    for name in ["graphs", "triangle-free"] {
        let class = AmalgamationClass::from_name(name).unwrap();
        match class.split_type(&edge) {
            Err(Error::NoSplittingDeclared(_)) => {}
            other => gate.fail(format!("{name}: split_type returned {other:?}")),
        }
    }
    gate.conclude();
}

#[test]
fn criterion_10_exchangeability_proxy() {
    let mut gate = Gate::new(10, "positional exchangeability");
    for name in ["graphs", "kaleidoscope:graphs", "metric"] {
        let class = AmalgamationClass::from_name(name).unwrap();
        let engine = LimitEngine::build(class, CyclicSchedule::default_catalog(), 6).unwrap();
        let report = exchangeability_report(&engine, 6, 4, TRIALS, "acc10", SEED).unwrap();
        gate.check(report.rows.len() >= 2, || {
            format!("{name}: only {} observed pair types", report.rows.len())
        });
        for row in &report.rows {
            gate.check(row.pass && row.estimate <= row.bound + 1e-12, || {
                format!(
                    "{name}: type {} frequency gap {} exceeds four sigmas ({})",
                    row.type_id, row.estimate, row.bound
                )
            });
        }
    }
    gate.conclude();
}

#[test]
fn criterion_11_morleyization() {
    let mut gate = Gate::new(11, "definitional expansion");
    let base = Signature::single_binary();
    let formulas = [
        (
            "edge",
            MorleyFormula::qf(2, QfFormula::atom("E0", &[0, 1])).unwrap(),
        ),
        (
            "nonedge",
            MorleyFormula::qf(2, QfFormula::not(QfFormula::atom("E0", &[0, 1]))).unwrap(),
        ),
        (
            "neighbor",
            MorleyFormula::exists(1, QfFormula::atom("E0", &[0, 1])).unwrap(),
        ),
    ];
    for case in 0..50u64 {
        let k = 1 + (case as usize) % 5;
        let g = invforge_core::toy::reports::erdos_renyi(k, &rat(1, 2), 4000 + case).unwrap();
        for (tag, formula) in &formulas {
            let rel = format!("R_{tag}");
            let exp = pithy_pi2_expansion(&base, formula, &rel).unwrap();
            let expanded = exp.expand_structure(&g).unwrap();
            gate.check(exp.axioms_hold(&expanded).unwrap(), || {
                format!("case {case} {tag}: axioms fail on the defined expansion")
            });
            // Brute-force biconditional over every argument and dummy slot.
            let l = formula.free_count;
            let mut tuples: Vec<Vec<usize>> = vec![vec![]];
            for _ in 0..l {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        (0..k).map(move |v| {
                            let mut t2 = t.clone();
                            t2.push(v);
                            t2
                        })
                    })
                    .collect();
            }
            let mut defining: Vec<Vec<usize>> = Vec::new();
            for t in &tuples {
                let want = formula.holds_of(&g, t).unwrap();
                for w in 0..k {
                    let mut full = t.clone();
                    full.push(w);
                    let got = expanded.holds(&rel, &full);
                    gate.check(got == want, || {
                        format!(
                            "case {case} {tag}: R({full:?}) is {got} but the formula is {want}"
                        )
                    });
                    defining.push(full);
                }
            }
            // Uniqueness: toggling any single defining tuple breaks an axiom.
            for idx in [0, defining.len() / 2, defining.len() - 1] {
                let tuple = &defining[idx];
                let mut corrupted = expanded.clone();
                if corrupted.holds(&rel, tuple) {
                    corrupted.remove_tuple(&rel, tuple).unwrap();
                } else {
                    corrupted.add_tuple(&rel, tuple).unwrap();
                }
                gate.check(!exp.axioms_hold(&corrupted).unwrap(), || {
                    format!("case {case} {tag}: axioms tolerate a corrupted tuple {tuple:?}")
                });
            }
        }
    }
    gate.conclude();
}
