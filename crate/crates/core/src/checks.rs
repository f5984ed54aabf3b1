//! Exhaustive finite checks, each producing a JSON-ready report.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use serde_json::{json, Value};

use crate::factors::FactorId;
use crate::graph::{Ball, GraphError, GraphPath, QgParams, Visit, WalkOptions};
use crate::matching::{bar_p, boundary_sample, check_continuity, ContinuityReport, MatchError, ProductMatch};
use crate::morse::{concat_quasi_geodesic, delta_of, nesting_with_delta, Gauge, MorseError};
use crate::rational::{ceil_nonneg, fmt_q, int, Q};
use crate::rays::{comb_member_with_delta, is_geodesic_from_base, phi, psi, sample_indices, CombKind, CombRay, CombTail, RayError};
use crate::words::{FreeProduct, Word};

const SHOWN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    Counterexample,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Verified => 0,
            Status::Counterexample => 1,
            Status::Inconclusive => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    pub instances: u64,
    pub skipped: u64,
    pub counterexample_count: u64,
    pub counterexamples: Vec<String>,
    pub vacuous: bool,
    pub notes: Vec<String>,
    pub details: Value,
}

impl CheckReport {
    fn new(check: &str) -> Self {
        CheckReport {
            check: check.to_string(),
            status: Status::Verified,
            instances: 0,
            skipped: 0,
            counterexample_count: 0,
            counterexamples: Vec::new(),
            vacuous: false,
            notes: Vec::new(),
            details: Value::Null,
        }
    }

    fn fail(&mut self, what: String) {
        self.counterexample_count += 1;
        if self.counterexamples.len() < SHOWN {
            self.counterexamples.push(what);
        }
    }

    fn finish(mut self) -> Self {
        self.vacuous = self.instances == 0;
        if self.status != Status::Inconclusive {
            self.status = if self.counterexample_count > 0 { Status::Counterexample } else { Status::Verified };
        }
        self
    }

    fn inconclusive(mut self, why: String) -> Self {
        self.status = Status::Inconclusive;
        self.notes.push(why);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Verified
    }

    fn absorb(&mut self, other: &CheckReport) {
        self.instances += other.instances;
        self.skipped += other.skipped;
        for c in &other.counterexamples {
            if self.counterexamples.len() < SHOWN {
                self.counterexamples.push(c.clone());
            }
        }
        self.counterexample_count += other.counterexample_count;
        if other.status == Status::Inconclusive {
            self.status = Status::Inconclusive;
        }
        self.notes.extend(other.notes.iter().cloned());
    }
}

/// Order-preserving parallel map over scoped worker threads.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(items.len()).max(1);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || items.iter().enumerate().skip(w).step_by(workers).map(|(i, x)| (i, f(x))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

fn path_text(ball: &Ball, vs: &[u32]) -> String {
    vs.iter().map(|&v| ball.product().format(ball.word(v))).collect::<Vec<_>>().join(" -> ")
}

/// Every lazy walk e → w of length ≤ d(e, w) + `extra` visits each prefix vertex of w.
pub fn prefix_transit(ball: &Ball, extra: usize, cap: u64) -> CheckReport {
    let mut report = CheckReport::new("prefix-transit");
    let targets: Vec<u32> = (0..ball.len() as u32).collect();
    let results = par_map(&targets, |&w| ball.transit_check(w, extra, cap));
    let mut over = None;
    for r in results {
        match r {
            Ok(t) => {
                report.instances += t.paths;
                for v in &t.violations {
                    report.fail(path_text(ball, &v.vertices));
                }
            }
            Err(GraphError::CapExceeded { count }) => over = Some(count),
            Err(e) => report.fail(e.to_string()),
        }
    }
    report.details = json!({ "radius": ball.radius(), "targets": ball.len(), "extra": extra });
    let report = report.finish();
    match over {
        Some(count) => report.inconclusive(format!("path cap {cap} exceeded ({count} paths)")),
        None => report,
    }
}

/// Orbit representative (smallest index) of every vertex under the factor symmetries of the ball.
fn orbit_representative(ball: &Ball) -> Vec<u32> {
    let maps = ball.factor_symmetries();
    (0..ball.len()).map(|v| maps.iter().map(|m| m[v]).min().unwrap_or(v as u32)).collect()
}

/// For (λ, ε)-quasi-geodesic walks with both endpoints in Γ_A: π∘γ is (λ, ε)-quasi-geodesic and
/// d_H(γ, π∘γ) ≤ λ²ε + ε + 1.
///
/// Factor symmetries and reversal preserve every quantity involved, so walks are enumerated
/// from one start per orbit and only towards endpoints whose orbit comes no earlier.
pub fn projection_qg(ball: &Ball, grid: &[(Q, Q)], node_budget: u64) -> CheckReport {
    let mut report = CheckReport::new("projection-qg");
    let in_a: Vec<u32> = (0..ball.len() as u32).filter(|&v| ball.word(v).in_factor_copy(FactorId::A)).collect();
    let rep = orbit_representative(ball);
    let starts: Vec<u32> = in_a.iter().copied().filter(|&v| rep[v as usize] == v).collect();
    let proj: Vec<u32> = (0..ball.len() as u32).map(|v| ball.project_vertex(v, FactorId::A)).collect();
    let span = in_a.iter().flat_map(|&a| in_a.iter().map(move |&b| (a, b))).map(|(a, b)| ball.d(a, b)).max().unwrap_or(0);
    let mut per_point = Vec::new();
    for &(lambda, eps) in grid {
        let qg = QgParams::new(lambda, eps);
        let bound = lambda * lambda * eps + eps + int(1);
        let max_len = qg.max_len(span) as usize;
        let (ln, ld) = (*lambda.numer() as i128, *lambda.denom() as i128);
        let (en, ed) = (*eps.numer() as i128, *eps.denom() as i128);
        let lower = qg.lower_coefficients();
        let results = par_map(&starts, |&start| {
            let mut part = CheckReport::new("projection-qg");
            let ends: Vec<u32> = in_a.iter().copied().filter(|&q| rep[q as usize] >= start).collect();
            let is_end: HashSet<u32> = ends.iter().copied().collect();
            let mut nodes = 0u64;
            let mut proj_ok: Vec<bool> = Vec::new();
            let mut pointwise: Vec<u64> = Vec::new();
            // reach[n][q] = min over j ≤ n of λ(d(γ_j, q) + ε) + j, scaled by ld·ed; an endpoint q
            // stays reachable while n + d(γ_n, q) fits under it
            let mut reach: Vec<i128> = Vec::new();
            let opts = WalkOptions { lazy: true, max_len, qg: Some(qg) };
            ball.walks(start, &opts, |p| {
                nodes += 1;
                if nodes > node_budget {
                    return Visit::Stop;
                }
                let n = p.len() - 1;
                let cur = p[n];
                let k_len = ends.len();
                reach.truncate(n * k_len);
                let mut feasible = false;
                for (k, &q) in ends.iter().enumerate() {
                    let dq = ball.d(cur, q) as i128;
                    let here = ln * (dq * ed + en) + n as i128 * ld * ed;
                    let r = if n == 0 { here } else { reach[(n - 1) * k_len + k].min(here) };
                    reach.push(r);
                    feasible |= (n as i128 + dq) * ld * ed <= r;
                }
                if !feasible {
                    return Visit::Prune;
                }
                proj_ok.truncate(n);
                pointwise.truncate(n);
                let pc = proj[cur as usize];
                // π is 1-Lipschitz, so π∘γ also has steps of length ≤ 1
                let ok_here = (0..n).all(|s| lower.holds((n - s) as u64, ball.d(proj[p[s] as usize], pc)));
                proj_ok.push(ok_here && proj_ok.last().copied().unwrap_or(true));
                pointwise.push(ball.d(cur, pc).max(pointwise.last().copied().unwrap_or(0)));
                if n >= 1 && is_end.contains(&cur) {
                    part.instances += 1;
                    if !proj_ok[n] {
                        part.fail(format!("({}, {}) projection not quasi-geodesic: {}", fmt_q(&lambda), fmt_q(&eps), path_text(ball, p)));
                    }
                    if int(pointwise[n] as i64) > bound {
                        let image: Vec<u32> = p.iter().map(|&v| proj[v as usize]).collect();
                        let h = ball.hausdorff(p, &image);
                        if int(h as i64) > bound {
                            part.fail(format!("({}, {}) Hausdorff distance {h}: {}", fmt_q(&lambda), fmt_q(&eps), path_text(ball, p)));
                        }
                    }
                }
                Visit::Continue
            });
            if nodes > node_budget {
                part = part.inconclusive(format!("node budget {node_budget} exhausted from {}", ball.product().format(ball.word(start))));
            }
            part
        });
        let mut point = CheckReport::new("projection-qg");
        for r in &results {
            point.absorb(r);
        }
        per_point.push(json!({
            "lambda": fmt_q(&lambda),
            "eps": fmt_q(&eps),
            "bound": fmt_q(&bound),
            "paths": point.instances,
            "counterexamples": point.counterexample_count,
        }));
        report.absorb(&point);
    }
    report.details = json!({
        "radius": ball.radius(),
        "endpoints": in_a.len(),
        "starts": starts.len(),
        "reduction": "factor symmetries and reversal",
        "grid": per_point,
    });
    let inconclusive = report.status == Status::Inconclusive;
    let mut out = report.finish();
    if inconclusive {
        out.status = Status::Inconclusive;
    }
    out
}

/// Over geodesics γ between ball vertices and p, q in the ball: whenever the separation hypothesis holds the
/// concatenation is a (3λ, ε+1)-quasi-geodesic.
pub fn concat_qg(ball: &Ball, grid: &[(Q, Q)]) -> CheckReport {
    let mut report = CheckReport::new("concat-qg");
    let n = ball.len() as u32;
    let pairs: Vec<(u32, u32)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|(u, v)| u != v).collect();
    let mut hyp_failed = 0u64;
    let results = par_map(&pairs, |&(u, v)| {
        let mut part = CheckReport::new("concat-qg");
        let mut hyp = 0u64;
        let gamma = match crate::morse::canonical_geodesic(ball, u, v) {
            Ok(g) => GraphPath::new(g),
            Err(_) => {
                part.skipped += 1;
                return (part, hyp);
            }
        };
        let len = gamma.len() as u64;
        for &(lambda, eps) in grid {
            let qg = QgParams::new(lambda, eps);
            // the separation hypothesis |t − t′| ≥ 3λ(d(p, γ) + d(q, γ)) caps d(p, γ) + d(q, γ) by |γ| / 3λ
            let reach = (int(len as i64) / (int(3) * lambda)).floor().to_integer().max(0) as u64;
            let near: Vec<(u32, usize, u64)> = (0..n)
                .filter_map(|p| {
                    let (t, d) = gamma
                        .vertices
                        .iter()
                        .enumerate()
                        .map(|(i, &g)| (i, ball.d(p, g)))
                        .min_by_key(|&(i, d)| (d, i))
                        .expect("nonempty");
                    (d <= reach).then_some((p, t, d))
                })
                .collect();
            for &(p, t, dp) in &near {
                for &(q, t2, dq) in &near {
                    let gap = int(t.abs_diff(t2) as i64);
                    if gap < int(3) * lambda * int((dp + dq) as i64) {
                        hyp += 1;
                        continue;
                    }
                    match concat_quasi_geodesic(ball, p, q, &gamma, qg) {
                        Ok((path, cert)) => {
                            part.instances += 1;
                            if !cert.verified {
                                part.fail(format!("({}, {}) {}", fmt_q(&lambda), fmt_q(&eps), path_text(ball, &path.vertices)));
                            }
                        }
                        Err(MorseError::BallTooSmall) => part.skipped += 1,
                        Err(e) => part.fail(e.to_string()),
                    }
                }
            }
        }
        (part, hyp)
    });
    for (r, h) in &results {
        report.absorb(r);
        hyp_failed += h;
    }
    report.details = json!({ "radius": ball.radius(), "geodesics": pairs.len(), "hypothesis_failed": hyp_failed });
    report.finish()
}

/// Ô^{n+4δ}(ξ) ⊂ Ô^n(x) ⊂ Ô^n(ξ) for centres x, their realizations ξ and candidates y, all
/// ball elements, in the exact word metric.
pub fn nbhd_nesting(ball: &Ball, gauge: &Gauge, max_n: u64, cap: usize) -> Result<CheckReport, MorseError> {
    let mut report = CheckReport::new("nbhd-nesting");
    let g = ball.product();
    let delta = delta_of(gauge)?;
    let shift = ceil_nonneg(&(int(4) * delta));
    let words: Vec<&Word> = (0..ball.len() as u32).map(|v| ball.word(v)).collect();
    let mut realizations: Vec<Vec<Vec<Word>>> = Vec::with_capacity(words.len());
    for w in &words {
        match g.realizations(w, cap) {
            Ok(r) => realizations.push(r),
            Err(_) => {
                return Ok(report.inconclusive(format!("more than {cap} realizations of {}", g.format(w))));
            }
        }
    }
    let close = |a: &[Word], b: &[Word], n: usize| (0..=n).all(|t| int(g.distance(&a[t], &b[t]) as i64) < delta);
    let idx: Vec<usize> = (0..words.len()).collect();
    let results = par_map(&idx, |&x| {
        let mut part = CheckReport::new("nbhd-nesting");
        let dx = g.norm(words[x]);
        for n in 1..=max_n {
            let deep = n + shift;
            if dx < deep {
                continue;
            }
            let (n, deep) = (n as usize, deep as usize);
            for (y, ry) in realizations.iter().enumerate() {
                if (g.norm(words[y]) as usize) < deep {
                    continue;
                }
                let in_z = ry.iter().any(|eta| realizations[x].iter().all(|xi| close(eta, xi, n)));
                for xi in &realizations[x] {
                    part.instances += 1;
                    let in_deep = ry.iter().any(|eta| close(eta, xi, deep));
                    let in_shallow = ry.iter().any(|eta| close(eta, xi, n));
                    if in_deep && !in_z {
                        part.fail(format!("{} in the depth-{deep} neighborhood of a realization of {} but not in the depth-{n} neighborhood of the element", g.format(words[y]), g.format(words[x])));
                    }
                    if in_z && !in_shallow {
                        part.fail(format!("{} in Ô^{n}({}) but not near one of its realizations", g.format(words[y]), g.format(words[x])));
                    }
                }
            }
        }
        part
    });
    for r in &results {
        report.absorb(r);
    }
    report.details = json!({ "radius": ball.radius(), "delta": fmt_q(&delta), "max_n": max_n });
    Ok(report.finish())
}

/// Geodesic rays from e that stay < K apart on [0, D], D = 6K, stay < δ apart on [0, D − 2K].
pub fn ray_merge(g: &FreeProduct, rays: &[Vec<Word>], gauge: &Gauge, max_k: u64) -> Result<CheckReport, MorseError> {
    let mut report = CheckReport::new("ray-merge");
    let delta = delta_of(gauge)?;
    let mut per_k = Vec::new();
    for k in 1..=max_k {
        let d = (6 * k) as usize;
        let mut distinct: Vec<&[Word]> = rays.iter().filter(|r| r.len() > d).map(|r| &r[..=d]).collect();
        distinct.sort();
        distinct.dedup();
        // close rays share their vertex at time D − K in a tree; in general this bucketing is only
        // a heuristic, so every bucket pair is still checked exactly
        let mut buckets: BTreeMap<&Word, Vec<&[Word]>> = BTreeMap::new();
        for r in &distinct {
            buckets.entry(&r[d - k as usize]).or_default().push(r);
        }
        let mut close_pairs = 0u64;
        for bucket in buckets.values() {
            for a in bucket {
                for b in bucket {
                    if (0..=d).all(|t| g.distance(&a[t], &b[t]) < k) {
                        close_pairs += 1;
                        report.instances += 1;
                        let limit = d - 2 * k as usize;
                        if let Some(t) = (0..=limit).find(|&t| int(g.distance(&a[t], &b[t]) as i64) >= delta) {
                            report.fail(format!("K = {k}: rays ending {} and {} differ by {} at t = {t}", g.format(&a[d]), g.format(&b[d]), g.distance(&a[t], &b[t])));
                        }
                    }
                }
            }
        }
        per_k.push(json!({ "K": k, "D": d, "rays": distinct.len(), "close_pairs": close_pairs }));
    }
    report.details = json!({ "delta": fmt_q(&delta), "per_K": per_k });
    Ok(report.finish())
}

/// Prefix index: syllable prefix → population members starting with it.
pub struct PopulationIndex<'a> {
    pub rays: &'a [CombRay],
    buckets: HashMap<Vec<crate::factors::FactorElement>, Vec<usize>>,
    depth: usize,
}

impl<'a> PopulationIndex<'a> {
    pub fn new(rays: &'a [CombRay], depth: usize) -> Self {
        let mut buckets: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, r) in rays.iter().enumerate() {
            let syl = r.expand(depth);
            for m in 0..=syl.len() {
                buckets.entry(syl[..m].to_vec()).or_default().push(i);
            }
        }
        PopulationIndex { rays, buckets, depth }
    }

    /// Members that could lie in V_k(a): they must share a's first syllables.
    pub fn candidates(&self, a: &CombRay, k: usize) -> &[usize] {
        let m = match a.len() {
            Some(la) => la,
            None => k,
        }
        .min(self.depth);
        let key = a.expand(m);
        self.buckets.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The three axioms of the neighborhood system {V_k} on a population.
pub fn v_system(
    g: &FreeProduct,
    pop: &[CombRay],
    gauge: &Gauge,
    max_i: usize,
    max_k: usize,
    centers: usize,
    members: usize,
    seed: u64,
) -> Result<CheckReport, RayError> {
    let mut report = CheckReport::new("v-system");
    let delta = delta_of(gauge)?;
    let index = PopulationIndex::new(pop, 8);
    let sample = sample_indices(pop.len(), centers, seed);
    let results = par_map(&sample, |&ai| -> Result<CheckReport, RayError> {
        let mut part = CheckReport::new("v-system");
        let a = &pop[ai];
        let member = |c: &CombRay, k: usize, b: &CombRay| comb_member_with_delta(g, delta, c, k, b);
        // (1) a ∈ V_k(a)
        for k in 1..=max_k {
            part.instances += 1;
            if !member(a, k, a)? {
                part.fail(format!("(1) {} not in its own V_{k}", a.format(g)));
            }
        }
        // (2) V_k decreasing in k, so V_max(i,j) ⊆ V_i ∩ V_j
        for &bi in index.candidates(a, 1) {
            let b = &pop[bi];
            let mut prev = true;
            for k in 1..=max_k {
                let now = member(a, k, b)?;
                part.instances += 1;
                if now && !prev {
                    part.fail(format!("(2) {} in V_{k} but not V_{}({})", b.format(g), k - 1, a.format(g)));
                }
                prev = now;
            }
        }
        // (3) V_k(b) ⊆ V_i(a) for b ∈ V_j(a)
        for i in 1..=max_i {
            let j = match a.kind() {
                CombKind::Infinite => i + 1,
                CombKind::Finite => nesting_with_delta(i as u64, delta) as usize,
            };
            let inside: Vec<usize> = index.candidates(a, j).iter().copied().filter(|&bi| member(a, j, &pop[bi]).unwrap_or(false)).collect();
            for &s in &sample_indices(inside.len(), members, seed ^ (ai as u64) ^ ((i as u64) << 32)) {
                let b = &pop[inside[s]];
                let k = match (a.kind(), b.kind()) {
                    (CombKind::Infinite, _) | (CombKind::Finite, CombKind::Finite) => j,
                    (CombKind::Finite, CombKind::Infinite) => a.len().expect("finite") + 1,
                };
                for &ci in index.candidates(b, k) {
                    let c = &pop[ci];
                    if member(b, k, c)? {
                        part.instances += 1;
                        if !member(a, i, c)? {
                            part.fail(format!("(3) i = {i}, j = {j}, k = {k}: {} in V_k({}) but not in V_i({})", c.format(g), b.format(g), a.format(g)));
                        }
                    }
                }
            }
        }
        Ok(part)
    });
    for r in results {
        report.absorb(&r?);
    }
    report.details = json!({
        "population": pop.len(),
        "centers": sample.len(),
        "members_per_center": members,
        "max_i": max_i,
        "max_k": max_k,
        "delta": fmt_q(&delta),
        "seed": seed,
    });
    Ok(report.finish())
}

/// Enough depth to see every stored syllable and some of the continuation.
pub fn roundtrip_depth(g: &FreeProduct, a: &CombRay) -> usize {
    let norm = |xs: &[crate::factors::FactorElement]| xs.iter().map(|s| g.factor(s.factor).norm(s) as usize).sum::<usize>();
    let head = norm(a.stored());
    match a.tail() {
        CombTail::Cycle(c) => head + 2 * norm(c),
        _ => head + 3,
    }
}

/// Ψ∘Φ agrees with a on stable syllables and Φ∘Ψ reproduces the ray, over a population; then
/// Φ∘Ψ on canonical realizations of every ball element.
pub fn phi_psi(g: &FreeProduct, pop: &[CombRay], ball: Option<&Ball>) -> CheckReport {
    let mut report = CheckReport::new("phi-psi");
    let results = par_map(pop, |a| {
        let mut part = CheckReport::new("phi-psi");
        part.instances += 1;
        let depth = roundtrip_depth(g, a);
        let ray = match phi(g, a, depth) {
            Ok(r) => r,
            Err(e) => {
                part.fail(format!("{}: {e}", a.format(g)));
                return part;
            }
        };
        if !is_geodesic_from_base(g, &ray.vertices) {
            part.fail(format!("{}: Φ is not geodesic", a.format(g)));
        }
        let back = match psi(g, &ray.vertices) {
            Ok(c) => c,
            Err(e) => {
                part.fail(format!("{}: {e}", a.format(g)));
                return part;
            }
        };
        let stable = back.stable_syllables();
        let expect = a.expand(stable.len());
        let agrees = match a.kind() {
            CombKind::Finite => stable == a.stored(),
            CombKind::Infinite => stable == expect.as_slice(),
        };
        if !agrees {
            part.fail(format!("{}: Ψ∘Φ gives {}", a.format(g), back.format(g)));
        }
        match phi(g, &back, depth) {
            Ok(again) if again.vertices == ray.vertices => {}
            _ => part.fail(format!("{}: Φ∘Ψ does not reproduce the ray", a.format(g))),
        }
        part
    });
    for r in &results {
        report.absorb(r);
    }
    let mut stored = 0u64;
    if let Some(ball) = ball {
        for v in 0..ball.len() as u32 {
            let w = ball.word(v);
            let ray = g.canonical_realization(w);
            stored += 1;
            report.instances += 1;
            let ok = psi(g, &ray).and_then(|c| phi(g, &c, ray.len() - 1)).map(|r| r.vertices == ray).unwrap_or(false);
            if !ok {
                report.fail(format!("stored ray to {} not reproduced", g.format(w)));
            }
        }
    }
    report.details = json!({ "population": pop.len(), "stored_rays": stored });
    report.finish()
}

/// p̄(b) ∈ V_l(p̄(a)) for sampled infinite-type a and population members b ∈ V_l(a).
pub fn induced_containment(
    pm: &mut ProductMatch,
    pop: &[CombRay],
    gauge: &Gauge,
    max_l: usize,
    centers: usize,
    seed: u64,
) -> Result<CheckReport, MatchError> {
    let mut report = CheckReport::new("induced-containment");
    let delta = delta_of(gauge)?;
    let index = PopulationIndex::new(pop, 8);
    let infinite: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].kind() == CombKind::Infinite).collect();
    let sample: Vec<usize> = sample_indices(infinite.len(), centers, seed).into_iter().map(|i| infinite[i]).collect();
    let g1 = pm.g1.clone();
    let g2 = pm.g2.clone();
    let mut images: HashMap<usize, CombRay> = HashMap::new();
    for &ai in &sample {
        let a = &pop[ai];
        for l in 1..=max_l {
            for &bi in index.candidates(a, l) {
                let b = &pop[bi];
                if !comb_member_with_delta(&g1, delta, a, l, b)? {
                    continue;
                }
                report.instances += 1;
                for idx in [ai, bi] {
                    if !images.contains_key(&idx) {
                        let img = bar_p(pm, &pop[idx])?;
                        images.insert(idx, img);
                    }
                }
                if !comb_member_with_delta(&g2, delta, &images[&ai], l, &images[&bi])? {
                    report.fail(format!("l = {l}: p̄({}) = {} not in V_l({})", b.format(&g1), images[&bi].format(&g2), images[&ai].format(&g2)));
                }
            }
        }
    }
    report.details = json!({ "centers": sample.len(), "max_l": max_l, "images": images.len() });
    Ok(report.finish())
}

/// check_continuity at both ends of each line factor, for l = 1..=max_l.
pub fn continuity_suite(pm: &ProductMatch, max_l: u64, budget: u64) -> Result<(CheckReport, Vec<ContinuityReport>), MatchError> {
    let mut report = CheckReport::new("continuity");
    let mut all = Vec::new();
    for f in [FactorId::A, FactorId::B] {
        let m = pm.factor(f);
        let spec = m.source();
        if !spec.has_boundary() {
            continue;
        }
        let sample = boundary_sample(spec, 2, 2);
        for positive in [true, false] {
            let z = spec.line_end(positive)?;
            for l in 1..=max_l {
                let r = check_continuity(m, &z, l, budget, &sample)?;
                report.instances += 1;
                if r.inconclusive {
                    report.status = Status::Inconclusive;
                    report.notes.push(format!("factor {f}, z = {}, l = {l}: inconclusive", r.z));
                } else if !r.verified() {
                    report.fail(format!("factor {f}, z = {}, l = {l}: {:?}", r.z, r.counterexamples));
                } else if r.vacuous {
                    report.fail(format!("factor {f}, z = {}, l = {l}: only vacuous witnesses", r.z));
                }
                all.push(r);
            }
        }
    }
    let inconclusive = report.status == Status::Inconclusive;
    let mut out = report.finish();
    if inconclusive {
        out.status = Status::Inconclusive;
    }
    Ok((out, all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::FactorSpec;
    use crate::rays::PopulationSpec;

    fn zz() -> FreeProduct {
        FreeProduct::new(FactorSpec::integer_line(FactorId::A), FactorSpec::integer_line(FactorId::B)).unwrap()
    }

    #[test]
    fn transit_small() {
        let b = Ball::build(&zz(), 3, 10_000).unwrap();
        let r = prefix_transit(&b, 2, 1_000_000);
        assert!(r.passed() && r.instances > 0);
        let zero = Ball::build(&zz(), 0, 10).unwrap();
        let r = prefix_transit(&zero, 2, 100);
        assert!(r.passed());
    }

    #[test]
    fn projection_small() {
        let b = Ball::build(&zz(), 3, 10_000).unwrap();
        let r = projection_qg(&b, &[(int(1), int(0)), (int(2), int(1))], 10_000_000);
        assert!(r.passed(), "{r:?}");
        assert!(r.instances > 0);
    }

    #[test]
    fn concat_small() {
        let b = Ball::build(&zz(), 3, 10_000).unwrap();
        let r = concat_qg(&b, &[(int(1), int(0))]);
        assert!(r.passed() && r.instances > 0, "{r:?}");
    }

    #[test]
    fn nesting_small() {
        let b = Ball::build(&zz(), 6, 10_000).unwrap();
        let r = nbhd_nesting(&b, &Gauge::tree(), 2, 64).unwrap();
        assert!(r.passed() && r.instances > 0, "{r:?}");
    }

    #[test]
    fn phi_psi_small() {
        let g = zz();
        let pop = crate::rays::comb_population(&g, &PopulationSpec::standard(&g, 2, 2)).unwrap();
        let b = Ball::build(&g, 4, 10_000).unwrap();
        let r = phi_psi(&g, &pop, Some(&b));
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn v_system_small() {
        let g = zz();
        let pop = crate::rays::comb_population(&g, &PopulationSpec::standard(&g, 2, 2)).unwrap();
        let r = v_system(&g, &pop, &Gauge::tree(), 2, 14, 40, 8, 7).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn report_statuses() {
        let mut r = CheckReport::new("x");
        r.instances = 3;
        r.fail("bad".into());
        assert_eq!(r.finish().status.exit_code(), 1);
        assert!(CheckReport::new("y").finish().vacuous);
    }
}
