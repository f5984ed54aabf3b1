//! Finite balls of Γ(A∗B, S_A ∪ S_B), exhaustive walk enumeration and the projection π on vertices.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde_json::{json, Value};
use thiserror::Error;

use crate::factors::{FactorId, FactorKind, FactorSpec};
use crate::geometry::{Geometry, RealizationCapExceeded};
use crate::rational::Q;
use crate::words::{FreeProduct, GenLabel, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("predicted ball size {predicted} exceeds the vertex budget {budget}")]
    BudgetExceeded { predicted: u128, budget: u128 },
    #[error("the ball of radius {radius} cannot certify d({u}, {v})")]
    PossiblyTruncated { u: u32, v: u32, radius: u32 },
    #[error("result cap exceeded: {count} results exist")]
    CapExceeded { count: u64 },
    #[error("path endpoints are not in the e-copy of factor {0}")]
    EndpointsOutsideFactor(FactorId),
    #[error("word {0} is not in the ball")]
    NotInBall(String),
    #[error("vertex list is not a path in the ball")]
    NotAPath,
}

/// Distances are stored in a byte matrix, so radii stay below this bound.
pub const MAX_RADIUS: u32 = 120;
const METRIC_MATRIX_LIMIT: usize = 12_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Index into `FreeProduct::labels()`.
    pub label: u16,
    /// `None` marks an edge leaving the ball.
    pub to: Option<u32>,
}

/// A discrete map [0, n] → Ball; consecutive vertices are equal or adjacent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphPath {
    pub vertices: Vec<u32>,
}

impl GraphPath {
    pub fn new(vertices: Vec<u32>) -> Self {
        GraphPath { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> u32 {
        self.vertices[0]
    }

    pub fn end(&self) -> u32 {
        *self.vertices.last().expect("nonempty path")
    }
}

/// Exact (λ, ε) parameters of a quasi-geodesic test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QgParams {
    pub lambda: Q,
    pub eps: Q,
}

impl QgParams {
    pub fn new(lambda: Q, eps: Q) -> Self {
        assert!(lambda >= Q::from_integer(1), "lambda must be at least 1");
        assert!(eps >= Q::from_integer(0), "epsilon must be nonnegative");
        QgParams { lambda, eps }
    }

    /// |t−s|/λ − ε ≤ d ≤ λ|t−s| + ε, by integer cross-multiplication.
    pub fn admits(&self, dt: u64, d: u64) -> bool {
        let (ln, ld) = (*self.lambda.numer() as i128, *self.lambda.denom() as i128);
        let (en, ed) = (*self.eps.numer() as i128, *self.eps.denom() as i128);
        let (dt, d) = (dt as i128, d as i128);
        let lower = dt * ld * ed <= ln * (d * ed + en);
        let upper = d * ld * ed <= ln * dt * ed + en * ld;
        lower && upper
    }

    /// The lower inequality as `dt·c ≤ a·d + b` over the integers. For unit-speed walks with λ ≥ 1
    /// the upper inequality always holds, so this is the whole test there.
    pub fn lower_coefficients(&self) -> LowerBound {
        let (ln, ld) = (*self.lambda.numer(), *self.lambda.denom());
        let (en, ed) = (*self.eps.numer(), *self.eps.denom());
        LowerBound { a: ln * ed, b: ln * en, c: ld * ed }
    }

    /// Longest parameter interval a quasi-geodesic with endpoints at distance `d` can have.
    pub fn max_len(&self, d: u64) -> u64 {
        let bound = self.lambda * (Q::from_integer(d as i64) + self.eps);
        bound.floor().to_integer().max(0) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LowerBound {
    a: i64,
    b: i64,
    c: i64,
}

impl LowerBound {
    #[inline]
    pub fn holds(&self, dt: u64, d: u64) -> bool {
        dt as i64 * self.c <= self.a * d as i64 + self.b
    }
}

/// Checks every index pair of a discrete path against the (λ, ε) inequalities.
pub fn is_qg_by(n: usize, qg: &QgParams, dist: impl Fn(usize, usize) -> u64) -> bool {
    (0..n).all(|s| (s + 1..n).all(|t| qg.admits((t - s) as u64, dist(s, t))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visit {
    /// Report the path and keep extending it.
    Continue,
    /// Do not extend this path further.
    Prune,
    Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct WalkOptions {
    pub lazy: bool,
    pub max_len: usize,
    pub qg: Option<QgParams>,
}

#[derive(Debug)]
pub struct Ball {
    product: FreeProduct,
    radius: u32,
    vertices: Vec<Word>,
    index: HashMap<Word, u32>,
    depth: Vec<u32>,
    adjacency: Vec<Vec<Edge>>,
    syllable_ids: Vec<Vec<u32>>,
    syllable_tail: Vec<Vec<u32>>,
    syllable_dist: Vec<Vec<u32>>,
    syllable_factor: Vec<FactorId>,
    metric: OnceLock<Vec<u8>>,
}

/// Number of elements of each word length 0..=radius in a factor.
pub fn factor_sphere_sizes(spec: &FactorSpec, radius: u32) -> Vec<u128> {
    let r = radius as usize;
    let mut out = vec![0u128; r + 1];
    out[0] = 1;
    match spec.kind() {
        FactorKind::IntegerLine => out.iter_mut().skip(1).for_each(|c| *c = 2),
        FactorKind::FreeGroup(n) => {
            let n = n as u128;
            for (k, c) in out.iter_mut().enumerate().skip(1) {
                *c = (2 * n).saturating_mul((2 * n - 1).saturating_pow(k as u32 - 1));
            }
        }
        FactorKind::IntegerLattice(d) => {
            // points of L1 norm k: Σ_j 2^j C(d, j) C(k−1, j−1)
            let binom = |n: u128, k: u128| -> u128 {
                if k > n {
                    return 0;
                }
                (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
            };
            for (k, c) in out.iter_mut().enumerate().skip(1) {
                *c = (1..=d.min(k))
                    .map(|j| (1u128 << j).saturating_mul(binom(d as u128, j as u128)).saturating_mul(binom(k as u128 - 1, j as u128 - 1)))
                    .fold(0u128, |a, b| a.saturating_add(b));
            }
        }
        FactorKind::FiniteTable => {
            for x in spec.enumerate() {
                let k = spec.norm(&x) as usize;
                if k <= r {
                    out[k] += 1;
                }
            }
        }
    }
    out
}

/// Vertex count of the radius-R ball from the growth series (1+α)(1+β)/(1−αβ).
pub fn predicted_ball_size(product: &FreeProduct, radius: u32) -> u128 {
    let r = radius as usize;
    let mut alpha = factor_sphere_sizes(product.factor(FactorId::A), radius);
    let mut beta = factor_sphere_sizes(product.factor(FactorId::B), radius);
    alpha[0] = 0;
    beta[0] = 0;
    let mul = |p: &[u128], q: &[u128]| -> Vec<u128> {
        let mut out = vec![0u128; r + 1];
        for (i, &a) in p.iter().enumerate() {
            for (j, &b) in q.iter().enumerate().take(r + 1 - i) {
                out[i + j] = out[i + j].saturating_add(a.saturating_mul(b));
            }
        }
        out
    };
    let ab = mul(&alpha, &beta);
    // 1/(1−αβ) = Σ (αβ)^k
    let mut geom = vec![0u128; r + 1];
    geom[0] = 1;
    let mut power = geom.clone();
    for _ in 0..=r {
        power = mul(&power, &ab);
        if power.iter().all(|&c| c == 0) {
            break;
        }
        for (g, p) in geom.iter_mut().zip(&power) {
            *g = g.saturating_add(*p);
        }
    }
    let mut one_a = alpha.clone();
    one_a[0] = 1;
    let mut one_b = beta.clone();
    one_b[0] = 1;
    mul(&mul(&one_a, &one_b), &geom).iter().fold(0u128, |a, &b| a.saturating_add(b))
}

impl Ball {
    pub fn build(product: &FreeProduct, radius: u32, budget: u128) -> Result<Ball, GraphError> {
        let predicted = predicted_ball_size(product, radius);
        if predicted > budget || radius > MAX_RADIUS {
            return Err(GraphError::BudgetExceeded { predicted, budget });
        }
        let labels = product.labels().to_vec();
        let mut vertices = vec![Word::identity()];
        let mut index = HashMap::from([(Word::identity(), 0u32)]);
        let mut depth = vec![0u32];
        let mut adjacency: Vec<Vec<Edge>> = Vec::new();
        let mut head = 0usize;
        while head < vertices.len() {
            let w = vertices[head].clone();
            let mut edges = Vec::with_capacity(labels.len());
            for (li, &l) in labels.iter().enumerate() {
                let v = product.mul_label(&w, l);
                let nv = product.norm(&v) as u32;
                let to = if nv > radius {
                    None
                } else {
                    Some(*index.entry(v.clone()).or_insert_with(|| {
                        vertices.push(v);
                        depth.push(nv);
                        (vertices.len() - 1) as u32
                    }))
                };
                edges.push(Edge { label: li as u16, to });
            }
            adjacency.push(edges);
            head += 1;
        }
        let mut ball = Ball {
            product: product.clone(),
            radius,
            vertices,
            index,
            depth,
            adjacency,
            syllable_ids: Vec::new(),
            syllable_tail: Vec::new(),
            syllable_dist: Vec::new(),
            syllable_factor: Vec::new(),
            metric: OnceLock::new(),
        };
        ball.intern_syllables();
        Ok(ball)
    }

    fn intern_syllables(&mut self) {
        let mut ids: HashMap<crate::factors::FactorElement, u32> = HashMap::new();
        let mut elems = Vec::new();
        for w in &self.vertices {
            let mut row = Vec::with_capacity(w.syllable_count());
            for s in w.syllables() {
                let id = *ids.entry(s.clone()).or_insert_with(|| {
                    elems.push(s.clone());
                    (elems.len() - 1) as u32
                });
                row.push(id);
            }
            let norms: Vec<u32> = w.syllables().iter().map(|s| self.product.factor(s.factor).norm(s) as u32).collect();
            let mut tail = vec![0u32; norms.len() + 1];
            for i in (0..norms.len()).rev() {
                tail[i] = tail[i + 1] + norms[i];
            }
            self.syllable_ids.push(row);
            self.syllable_tail.push(tail);
        }
        let n = elems.len();
        let mut dist = vec![vec![u32::MAX; n]; n];
        for i in 0..n {
            for j in 0..n {
                if elems[i].factor == elems[j].factor {
                    dist[i][j] = self.product.factor(elems[i].factor).distance(&elems[i], &elems[j]).expect("same factor") as u32;
                }
            }
        }
        self.syllable_factor = elems.iter().map(|e| e.factor).collect();
        self.syllable_dist = dist;
    }

    /// Exact Γ-distance between two ball vertices via the common syllable prefix.
    fn word_metric(&self, u: usize, v: usize) -> u32 {
        let (su, sv) = (&self.syllable_ids[u], &self.syllable_ids[v]);
        let mut j = 0;
        while j < su.len() && j < sv.len() && su[j] == sv[j] {
            j += 1;
        }
        let (tu, tv) = (&self.syllable_tail[u], &self.syllable_tail[v]);
        if j < su.len() && j < sv.len() && self.syllable_factor[su[j] as usize] == self.syllable_factor[sv[j] as usize] {
            self.syllable_dist[su[j] as usize][sv[j] as usize] + tu[j + 1] + tv[j + 1]
        } else {
            tu[j] + tv[j]
        }
    }

    fn metric_matrix(&self) -> Option<&[u8]> {
        let n = self.vertices.len();
        if n > METRIC_MATRIX_LIMIT {
            return None;
        }
        Some(self.metric.get_or_init(|| {
            let mut m = vec![0u8; n * n];
            for u in 0..n {
                for v in u + 1..n {
                    let d = self.word_metric(u, v) as u8;
                    m[u * n + v] = d;
                    m[v * n + u] = d;
                }
            }
            m
        }))
    }

    /// Exact Γ-distance (not restricted to paths inside the ball).
    #[inline]
    pub fn d(&self, u: u32, v: u32) -> u64 {
        match self.metric_matrix() {
            Some(m) => m[u as usize * self.vertices.len() + v as usize] as u64,
            None => self.word_metric(u as usize, v as usize) as u64,
        }
    }

    /// Distance certified to be realized by a geodesic inside the ball.
    pub fn distance(&self, u: u32, v: u32) -> Result<u64, GraphError> {
        let d = self.d(u, v);
        if self.depth[u as usize] + self.depth[v as usize] <= self.radius {
            return Ok(d);
        }
        // otherwise certify by exhibiting one geodesic that stays inside
        match self.enumerate_geodesics(u, v, 1) {
            Ok(found) if found.is_empty() => Err(GraphError::PossiblyTruncated { u, v, radius: self.radius }),
            _ => Ok(d),
        }
    }

    pub fn product(&self) -> &FreeProduct {
        &self.product
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn word(&self, v: u32) -> &Word {
        &self.vertices[v as usize]
    }

    pub fn words(&self) -> &[Word] {
        &self.vertices
    }

    pub fn depth(&self, v: u32) -> u32 {
        self.depth[v as usize]
    }

    pub fn index_of(&self, w: &Word) -> Option<u32> {
        self.index.get(w).copied()
    }

    pub fn vertex(&self, text: &str) -> Result<u32, GraphError> {
        let w = self.product.parse(text).map_err(|_| GraphError::NotInBall(text.to_string()))?;
        self.index_of(&w).ok_or_else(|| GraphError::NotInBall(text.to_string()))
    }

    pub fn edges(&self, v: u32) -> &[Edge] {
        &self.adjacency[v as usize]
    }

    pub fn label(&self, e: &Edge) -> GenLabel {
        self.product.labels()[e.label as usize]
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.adjacency[v as usize].iter().filter_map(|e| e.to)
    }

    pub fn is_path(&self, path: &GraphPath) -> bool {
        !path.vertices.is_empty()
            && path.vertices.iter().all(|&v| (v as usize) < self.len())
            && path.vertices.windows(2).all(|p| p[0] == p[1] || self.neighbors(p[0]).any(|w| w == p[1]))
    }

    pub fn path_from_words(&self, words: &[Word]) -> Result<GraphPath, GraphError> {
        let vertices = words
            .iter()
            .map(|w| self.index_of(w).ok_or_else(|| GraphError::NotInBall(self.product.format(w))))
            .collect::<Result<Vec<_>, _>>()?;
        let path = GraphPath::new(vertices);
        if self.is_path(&path) {
            Ok(path)
        } else {
            Err(GraphError::NotAPath)
        }
    }

    pub fn is_quasi_geodesic(&self, path: &GraphPath, qg: &QgParams) -> bool {
        let v = &path.vertices;
        is_qg_by(v.len(), qg, |s, t| self.d(v[s], v[t]))
    }

    /// Depth-first walk enumeration from `start`. The visitor sees every admissible walk,
    /// including the trivial one, in deterministic order (stationary step first, then labels).
    pub fn walks(&self, start: u32, opts: &WalkOptions, mut visit: impl FnMut(&[u32]) -> Visit) {
        let mut path = vec![start];
        // per level: next move to try; move 0 is the stationary step
        let mut cursor: Vec<usize> = vec![0];
        match visit(&path) {
            Visit::Stop | Visit::Prune => return,
            Visit::Continue => {}
        }
        let moves = self.product.labels().len() + 1;
        let lower = opts.qg.map(|q| q.lower_coefficients());
        while let Some(c) = cursor.last_mut() {
            if path.len() > opts.max_len || *c >= moves {
                cursor.pop();
                path.pop();
                continue;
            }
            let m = *c;
            *c += 1;
            let cur = *path.last().expect("nonempty");
            let next = if m == 0 {
                if !opts.lazy {
                    continue;
                }
                cur
            } else {
                match self.adjacency[cur as usize][m - 1].to {
                    Some(n) => n,
                    None => continue,
                }
            };
            if let Some(lb) = &lower {
                // steps have length ≤ 1 and λ ≥ 1, so only the lower inequality can fail
                let n = path.len();
                if !(0..n).rev().all(|s| lb.holds((n - s) as u64, self.d(path[s], next))) {
                    continue;
                }
            }
            path.push(next);
            match visit(&path) {
                Visit::Stop => return,
                Visit::Prune => {
                    path.pop();
                }
                Visit::Continue => cursor.push(0),
            }
        }
    }

    /// All lazy walks u → v of length ≤ maxlen inside the ball.
    pub fn enumerate_paths(&self, u: u32, v: u32, maxlen: usize, cap: usize) -> Result<Vec<GraphPath>, GraphError> {
        let mut out = Vec::new();
        let mut count = 0u64;
        let opts = WalkOptions { lazy: true, max_len: maxlen, qg: None };
        self.walks(u, &opts, |p| {
            let cur = *p.last().expect("nonempty");
            let used = p.len() - 1;
            if used + self.d(cur, v) as usize > maxlen {
                return Visit::Prune;
            }
            if cur == v {
                count += 1;
                if out.len() < cap {
                    out.push(GraphPath::new(p.to_vec()));
                }
            }
            Visit::Continue
        });
        if count > cap as u64 {
            return Err(GraphError::CapExceeded { count });
        }
        Ok(out)
    }

    /// All geodesic vertex paths u → v inside the ball.
    pub fn enumerate_geodesics(&self, u: u32, v: u32, cap: usize) -> Result<Vec<GraphPath>, GraphError> {
        let target = self.d(u, v);
        let mut out = Vec::new();
        let mut count = 0u64;
        let opts = WalkOptions { lazy: false, max_len: target as usize, qg: None };
        self.walks(u, &opts, |p| {
            let cur = *p.last().expect("nonempty");
            let used = (p.len() - 1) as u64;
            if used + self.d(cur, v) != target {
                return Visit::Prune;
            }
            if cur == v {
                count += 1;
                if out.len() < cap {
                    out.push(GraphPath::new(p.to_vec()));
                }
                return Visit::Prune;
            }
            Visit::Continue
        });
        if count > cap as u64 {
            return Err(GraphError::CapExceeded { count });
        }
        Ok(out)
    }

    /// Vertex-wise image under π onto the e-copy of `target`.
    pub fn project_path(&self, path: &GraphPath, target: FactorId) -> Result<GraphPath, GraphError> {
        let ends = [path.start(), path.end()];
        if ends.iter().any(|&v| !self.word(v).in_factor_copy(target)) {
            return Err(GraphError::EndpointsOutsideFactor(target));
        }
        Ok(GraphPath::new(path.vertices.iter().map(|&v| self.project_vertex(v, target)).collect()))
    }

    pub fn project_vertex(&self, v: u32, target: FactorId) -> u32 {
        let w = self.word(v);
        let img = self.product.from_factor(&self.product.project_to_factor(w, target));
        self.index_of(&img).expect("projection does not increase length")
    }

    /// Vertex maps of the ball induced by factor-preserving signed generator permutations.
    /// Each is an isometry fixing e, both factor copies Γ_A, Γ_B, and commuting with π.
    pub fn factor_symmetries(&self) -> Vec<Vec<u32>> {
        let g = &self.product;
        let pa = g.factor(FactorId::A).signed_permutations();
        let pb = g.factor(FactorId::B).signed_permutations();
        let mut out = Vec::new();
        for ia in &pa {
            for ib in &pb {
                let map = self
                    .vertices
                    .iter()
                    .map(|w| {
                        let syl = w
                            .syllables()
                            .iter()
                            .map(|s| {
                                let images = if s.factor == FactorId::A { ia } else { ib };
                                g.factor(s.factor).map_element(s, images)
                            })
                            .collect();
                        let img = g.word(syl).expect("automorphisms keep syllables nontrivial");
                        self.index_of(&img).expect("automorphisms preserve length")
                    })
                    .collect();
                out.push(map);
            }
        }
        out
    }

    pub fn hausdorff(&self, a: &[u32], b: &[u32]) -> u64 {
        let one_side = |x: &[u32], y: &[u32]| x.iter().map(|&p| y.iter().map(|&q| self.d(p, q)).min().unwrap_or(0)).max().unwrap_or(0);
        one_side(a, b).max(one_side(b, a))
    }

    /// Every lazy walk e → w of length ≤ d(e,w)+extra visits all prefix vertices of w.
    pub fn transit_check(&self, w: u32, extra: usize, cap: u64) -> Result<TransitReport, GraphError> {
        let word = self.word(w).clone();
        let prefixes: Vec<u32> = if word.is_identity() {
            Vec::new()
        } else {
            self.product
                .prefix_vertices(&word)
                .expect("nonidentity")
                .iter()
                .map(|p| self.index_of(p).expect("prefixes are closer to e"))
                .collect()
        };
        let maxlen = self.depth(w) as usize + extra;
        let mut report = TransitReport { target: w, paths: 0, violations: Vec::new() };
        let mut exceeded = false;
        let opts = WalkOptions { lazy: true, max_len: maxlen, qg: None };
        self.walks(0, &opts, |p| {
            let cur = *p.last().expect("nonempty");
            if p.len() - 1 + self.d(cur, w) as usize > maxlen {
                return Visit::Prune;
            }
            if cur == w {
                report.paths += 1;
                if report.paths > cap {
                    exceeded = true;
                    return Visit::Stop;
                }
                if !prefixes.iter().all(|q| p.contains(q)) && report.violations.len() < 8 {
                    report.violations.push(GraphPath::new(p.to_vec()));
                }
            }
            Visit::Continue
        });
        if exceeded {
            return Err(GraphError::CapExceeded { count: report.paths });
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Value {
        let p = &self.product;
        json!({
            "radius": self.radius,
            "vertices": self.vertices.iter().map(|w| p.format(w)).collect::<Vec<_>>(),
            "adjacency": self.adjacency.iter().map(|edges| {
                edges.iter().map(|e| json!({
                    "label": self.label_name(e),
                    "to": e.to,
                })).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }

    fn label_name(&self, e: &Edge) -> String {
        let l = self.label(e);
        self.product.factor(l.factor).letter_name(l.letter)
    }

    /// Graphviz rendering; each undirected edge appears once, boundary edges are omitted.
    pub fn to_dot(&self, highlight: &[u32]) -> String {
        let mut out = String::from("graph ball {\n  node [shape=point];\n");
        for (i, w) in self.vertices.iter().enumerate() {
            let mark = if highlight.contains(&(i as u32)) { ", color=red" } else { "" };
            out.push_str(&format!("  v{i} [xlabel=\"{}\"{mark}];\n", self.product.format(w)));
        }
        for (i, edges) in self.adjacency.iter().enumerate() {
            for e in edges {
                if let Some(j) = e.to {
                    if (i as u32) < j {
                        out.push_str(&format!("  v{i} -- v{j} [label=\"{}\"];\n", self.label_name(e)));
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitReport {
    pub target: u32,
    pub paths: u64,
    pub violations: Vec<GraphPath>,
}

impl TransitReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Geometry for Ball {
    type Point = u32;

    fn base(&self) -> u32 {
        0
    }

    fn dist(&self, a: &u32, b: &u32) -> u64 {
        self.d(*a, *b)
    }

    fn realizations(&self, x: &u32, cap: usize) -> Result<Vec<Vec<u32>>, RealizationCapExceeded> {
        self.enumerate_geodesics(0, *x, cap)
            .map(|ps| ps.into_iter().map(|p| p.vertices).collect())
            .map_err(|e| match e {
                GraphError::CapExceeded { count } => RealizationCapExceeded { count },
                _ => RealizationCapExceeded { count: u64::MAX },
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::FactorSpec;
    use crate::rational::int;

    fn zz() -> FreeProduct {
        FreeProduct::new(FactorSpec::integer_line(FactorId::A), FactorSpec::integer_line(FactorId::B)).unwrap()
    }

    fn dihedral() -> FreeProduct {
        FreeProduct::new(FactorSpec::cyclic(FactorId::A, 2).unwrap(), FactorSpec::cyclic(FactorId::B, 2).unwrap()).unwrap()
    }

    /// Independent oracle: BFS over words using only `mul_label` and a visited set.
    fn bfs_count(g: &FreeProduct, radius: u32) -> usize {
        let mut seen = std::collections::HashSet::from([Word::identity()]);
        let mut frontier = vec![Word::identity()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in g.labels() {
                    let v = g.mul_label(w, l);
                    if seen.insert(v.clone()) {
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        seen.len()
    }

    #[test]
    fn ball_sizes() {
        let d = dihedral();
        assert_eq!(Ball::build(&d, 4, 1000).unwrap().len(), 9);
        assert_eq!(bfs_count(&d, 4), 9);
        let g = zz();
        assert_eq!(Ball::build(&g, 2, 1000).unwrap().len(), 17);
        assert_eq!(Ball::build(&g, 0, 1000).unwrap().len(), 1);
        assert_eq!(predicted_ball_size(&g, 5), bfs_count(&g, 5) as u128);
        let h = FreeProduct::new(FactorSpec::lattice(FactorId::A, 2), FactorSpec::cyclic(FactorId::B, 3).unwrap()).unwrap();
        assert_eq!(predicted_ball_size(&h, 4), bfs_count(&h, 4) as u128);
        assert!(matches!(Ball::build(&g, 6, 100), Err(GraphError::BudgetExceeded { predicted: 1457, .. })));
    }

    #[test]
    fn distance_examples() {
        let g = zz();
        let b = Ball::build(&g, 4, 10_000).unwrap();
        assert_eq!(b.distance(b.vertex("x").unwrap(), b.vertex("y").unwrap()).unwrap(), 2);
        let d = dihedral();
        let bd = Ball::build(&d, 4, 1000).unwrap();
        let abab = bd.vertex("a b a b").unwrap();
        assert_eq!(bd.distance(0, abab).unwrap(), 4);
        assert_eq!(bd.distance(abab, abab).unwrap(), 0);
        let far1 = b.vertex("x^4").unwrap();
        assert_eq!(b.distance(far1, b.vertex("x^-4").unwrap()).unwrap(), 8);
        assert_eq!(b.distance(far1, b.vertex("x^3 y").unwrap()).unwrap(), 2);
        // in ℤ/6 the short way from 2 to −2 passes 3, which lies outside the radius-2 ball
        let h = FreeProduct::new(FactorSpec::cyclic(FactorId::A, 6).unwrap(), FactorSpec::integer_line(FactorId::B)).unwrap();
        let bh = Ball::build(&h, 2, 1000).unwrap();
        let (p, q) = (bh.vertex("a^2").unwrap(), bh.vertex("a^-2").unwrap());
        assert_eq!(bh.d(p, q), 2);
        assert!(matches!(bh.distance(p, q), Err(GraphError::PossiblyTruncated { .. })));
    }

    #[test]
    fn geodesic_examples() {
        let g = zz();
        let b = Ball::build(&g, 3, 10_000).unwrap();
        assert_eq!(b.enumerate_geodesics(0, b.vertex("x y").unwrap(), 10).unwrap().len(), 1);
        assert_eq!(b.enumerate_geodesics(5, 5, 10).unwrap(), vec![GraphPath::new(vec![5])]);
        let h = FreeProduct::new(FactorSpec::lattice(FactorId::A, 2), FactorSpec::integer_line(FactorId::B)).unwrap();
        let bh = Ball::build(&h, 3, 10_000).unwrap();
        assert_eq!(bh.enumerate_geodesics(0, bh.vertex("p q").unwrap(), 10).unwrap().len(), 2);
    }

    #[test]
    fn path_examples() {
        let g = zz();
        let b = Ball::build(&g, 3, 10_000).unwrap();
        let x = b.vertex("x").unwrap();
        assert_eq!(b.enumerate_paths(0, x, 1, 100).unwrap().len(), 1);
        // oracle: 1 walk of length 1, 2 lazy walks of length 2, 7 strict + 3 lazy of length 3
        assert_eq!(b.enumerate_paths(0, x, 3, 100).unwrap().len(), 13);
        assert!(b.enumerate_paths(0, b.vertex("x^2").unwrap(), 1, 100).unwrap().is_empty());
        assert!(matches!(b.enumerate_paths(0, x, 3, 5), Err(GraphError::CapExceeded { count: 13 })));
    }

    #[test]
    fn projection_examples() {
        let g = zz();
        let b = Ball::build(&g, 3, 10_000).unwrap();
        let words = |s: &[&str]| b.path_from_words(&s.iter().map(|t| g.parse(t).unwrap()).collect::<Vec<_>>()).unwrap();
        let gamma = words(&["e", "y", "y x", "y", "e"]);
        assert_eq!(b.project_path(&gamma, FactorId::A).unwrap(), words(&["e", "e", "e", "e", "e"]));
        let gamma = words(&["e", "x", "x y", "x", "x^2"]);
        assert_eq!(b.project_path(&gamma, FactorId::A).unwrap(), words(&["e", "x", "x", "x", "x^2"]));
        let line = words(&["x^-1", "e", "x", "x^2"]);
        assert_eq!(b.project_path(&line, FactorId::A).unwrap(), line);
        let bad = words(&["e", "y"]);
        assert!(b.project_path(&bad, FactorId::A).is_err());
    }

    #[test]
    fn transit_examples() {
        let g = zz();
        let b = Ball::build(&g, 4, 10_000).unwrap();
        assert!(b.transit_check(b.vertex("x y x^-1").unwrap(), 2, 1 << 20).unwrap().holds());
        assert!(b.transit_check(b.vertex("x").unwrap(), 2, 1 << 20).unwrap().holds());
        let h = FreeProduct::new(FactorSpec::lattice(FactorId::A, 2), FactorSpec::integer_line(FactorId::B)).unwrap();
        let bh = Ball::build(&h, 3, 10_000).unwrap();
        assert!(bh.transit_check(bh.vertex("p q").unwrap(), 2, 1 << 20).unwrap().holds());
    }

    #[test]
    fn qg_predicate() {
        let one_two = QgParams::new(int(1), int(2));
        let one_one = QgParams::new(int(1), int(1));
        let g = zz();
        let b = Ball::build(&g, 2, 1000).unwrap();
        let back = GraphPath::new(vec![0, b.vertex("x").unwrap(), 0]);
        assert!(b.is_quasi_geodesic(&back, &one_two));
        assert!(!b.is_quasi_geodesic(&back, &one_one));
        assert_eq!(one_two.max_len(3), 5);
    }
}
