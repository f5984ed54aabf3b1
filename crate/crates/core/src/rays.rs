//! Truncated geodesic rays, the corresponding rays λ_x, combinatorial rays (𝒯 ∪ 𝒮), their
//! neighborhoods V_k and the translations Φ and Ψ.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::factors::{FactorBoundaryPoint, FactorElement, FactorError, FactorId, FactorKind, FactorSpec, Letter};
use crate::geometry::Geometry;
use crate::morse::{delta_of, neighborhood_member_with_delta, Candidate, Center, Gauge, MorseError};
use crate::rational::Q;
use crate::words::{FreeProduct, GenLabel, Word, WordError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RayError {
    #[error("factor {0} has no bi-infinite geodesic line")]
    NoLine(FactorId),
    #[error("depth {depth} exceeds the {content} vertices of content")]
    DepthExceedsContent { depth: usize, content: usize },
    #[error("invalid combinatorial ray: {0}")]
    Invalid(String),
    #[error("syllable {0} is not yet stable")]
    Unstable(usize),
    #[error("path is not a geodesic from e")]
    NotGeodesic,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Morse(#[from] MorseError),
}

/// Factor of the i-th syllable (1-indexed): odd positions lie in A.
pub fn position_factor(i: usize) -> FactorId {
    if i % 2 == 1 {
        FactorId::A
    } else {
        FactorId::B
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    FactorBoundary(FactorBoundaryPoint),
    Comb(CombRay),
    Stored,
}

/// A geodesic ray from e cut at a finite depth, with a note on how it continues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RayTrunc<P> {
    pub vertices: Vec<P>,
    pub provenance: Provenance,
}

impl<P> RayTrunc<P> {
    pub fn depth(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

/// d(e, v_t) = t along the whole path.
pub fn is_geodesic_from_base<G: Geometry>(geo: &G, vertices: &[G::Point]) -> bool {
    vertices.first().is_some_and(|v| *v == geo.base())
        && vertices.iter().enumerate().all(|(t, v)| geo.norm(v) == t as u64)
        && vertices.windows(2).all(|p| geo.dist(&p[0], &p[1]) == 1)
}

fn require_line(spec: &FactorSpec) -> Result<(), RayError> {
    match spec.kind() {
        FactorKind::IntegerLine | FactorKind::FreeGroup(_) | FactorKind::IntegerLattice(1) => Ok(()),
        _ => Err(RayError::NoLine(spec.id())),
    }
}

/// λ(A): the powers of the first generator, as its positive and negative halves.
pub fn lambda_line(
    spec: &FactorSpec,
    depth: usize,
) -> Result<(RayTrunc<FactorElement>, RayTrunc<FactorElement>), RayError> {
    require_line(spec)?;
    let half = |positive| -> Result<RayTrunc<FactorElement>, RayError> {
        let z = spec.line_end(positive)?;
        Ok(RayTrunc { vertices: spec.boundary_ray(&z, depth)?, provenance: Provenance::FactorBoundary(z) })
    };
    Ok((half(true)?, half(false)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaX {
    pub ray: RayTrunc<FactorElement>,
    /// Boundary point [λ_x].
    pub end: FactorBoundaryPoint,
    /// Point of x·λ(A) closest to e.
    pub x0: FactorElement,
    /// x = x0 · g^{t_x}; negative values are mirrored.
    pub t_x: i64,
    pub mirrored: bool,
    /// First index from which λ_x runs along x·λ(A).
    pub t1: usize,
}

/// Corresponding ray of x. In tree factors x·λ(A) has a unique closest point to e, and the
/// realization of its forward half is unique, so the choice is canonical.
pub fn lambda_x(spec: &FactorSpec, x: &FactorElement, depth: usize) -> Result<LambdaX, RayError> {
    require_line(spec)?;
    spec.check(x)?;
    let letters = spec.geodesic_letters(x);
    let run = match letters.last() {
        Some(&last) if last.index == 0 => letters.iter().rev().take_while(|&&l| l == last).count(),
        _ => 0,
    };
    let negative = run > 0 && letters[letters.len() - 1].inverse;
    let t_x = if negative { -(run as i64) } else { run as i64 };
    let w = &letters[..letters.len() - run];
    let x0 = spec.from_letters(w);
    let end = spec.boundary_point(w.to_vec(), vec![Letter::new(0, negative)])?;
    let full = spec.boundary_ray(&end, depth.max(w.len()))?;
    let x_inv = spec.inverse(x);
    let on_line = |v: &FactorElement| {
        let rel = spec.geodesic_letters(&spec.multiply(&x_inv, v).expect("same factor"));
        rel.first().is_none_or(|&f| f.index == 0 && rel.iter().all(|&l| l == f))
    };
    let t1 = (0..full.len()).find(|&t| full[t..].iter().all(on_line)).unwrap_or(full.len());
    let mut vertices = full;
    vertices.truncate(depth + 1);
    Ok(LambdaX {
        ray: RayTrunc { vertices, provenance: Provenance::FactorBoundary(end.clone()) },
        end,
        x0,
        t_x,
        mirrored: negative,
        t1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombKind {
    Finite,
    Infinite,
}

/// Continuation after the stored syllables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CombTail {
    /// Finite type: a boundary direction in the factor after u_n.
    Boundary(FactorBoundaryPoint),
    /// Infinite type: the syllables repeat this cycle forever.
    Cycle(Vec<FactorElement>),
    /// Infinite type known only up to the stored syllables; the last one may still grow.
    Open,
}

/// (u_1, …, u_n; z) of finite type, or an infinite alternating syllable sequence.
/// u_1 lies in A and may be trivial; every later syllable is nontrivial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CombRay {
    syllables: Vec<FactorElement>,
    tail: CombTail,
}

fn check_syllables(g: &FreeProduct, syl: &[FactorElement], offset: usize) -> Result<(), RayError> {
    for (i, s) in syl.iter().enumerate() {
        let pos = offset + i + 1;
        if s.factor != position_factor(pos) {
            return Err(RayError::Invalid(format!("syllable {pos} must lie in {}", position_factor(pos))));
        }
        g.factor(s.factor).check(s)?;
        if pos > 1 && g.factor(s.factor).is_identity(s) {
            return Err(RayError::Invalid(format!("syllable {pos} is trivial")));
        }
    }
    Ok(())
}

impl CombRay {
    pub fn finite(g: &FreeProduct, syllables: Vec<FactorElement>, z: FactorBoundaryPoint) -> Result<Self, RayError> {
        check_syllables(g, &syllables, 0)?;
        let want = position_factor(syllables.len() + 1);
        if z.factor != want {
            return Err(RayError::Invalid(format!("tail must lie in {want}")));
        }
        if !g.factor(want).has_boundary() {
            return Err(FactorError::NoBoundary(want).into());
        }
        Ok(CombRay { syllables, tail: CombTail::Boundary(z) })
    }

    /// prefix · cycle^∞, rolled back to the shortest prefix.
    pub fn periodic(g: &FreeProduct, mut prefix: Vec<FactorElement>, mut cycle: Vec<FactorElement>) -> Result<Self, RayError> {
        if cycle.is_empty() || cycle.len() % 2 == 1 {
            return Err(RayError::Invalid("a syllable cycle needs positive even length".into()));
        }
        check_syllables(g, &prefix, 0)?;
        check_syllables(g, &cycle, prefix.len())?;
        if prefix.is_empty() && g.factor(FactorId::A).is_identity(&cycle[0]) {
            return Err(RayError::Invalid("trivial syllable inside the cycle".into()));
        }
        while prefix.last().is_some_and(|l| Some(l) == cycle.last()) {
            prefix.pop();
            cycle.rotate_right(1);
        }
        Ok(CombRay { syllables: prefix, tail: CombTail::Cycle(cycle) })
    }

    pub fn open(g: &FreeProduct, syllables: Vec<FactorElement>) -> Result<Self, RayError> {
        check_syllables(g, &syllables, 0)?;
        Ok(CombRay { syllables, tail: CombTail::Open })
    }

    pub fn kind(&self) -> CombKind {
        match self.tail {
            CombTail::Boundary(_) => CombKind::Finite,
            _ => CombKind::Infinite,
        }
    }

    /// l(a): the syllable count of a finite-type ray, None for infinite type.
    pub fn len(&self) -> Option<usize> {
        match self.tail {
            CombTail::Boundary(_) => Some(self.syllables.len()),
            _ => None,
        }
    }

    pub fn stored(&self) -> &[FactorElement] {
        &self.syllables
    }

    pub fn tail(&self) -> &CombTail {
        &self.tail
    }

    /// γ(a) for finite type.
    pub fn boundary(&self) -> Option<&FactorBoundaryPoint> {
        match &self.tail {
            CombTail::Boundary(z) => Some(z),
            _ => None,
        }
    }

    /// u_i (1-indexed), if it exists and is stable.
    pub fn syllable(&self, i: usize) -> Result<Option<FactorElement>, RayError> {
        if i == 0 {
            return Err(RayError::Invalid("syllables are 1-indexed".into()));
        }
        let n = self.syllables.len();
        match &self.tail {
            CombTail::Boundary(_) => Ok(self.syllables.get(i - 1).cloned()),
            CombTail::Cycle(c) => Ok(Some(if i <= n { self.syllables[i - 1].clone() } else { c[(i - 1 - n) % c.len()].clone() })),
            CombTail::Open => {
                if i < n {
                    Ok(Some(self.syllables[i - 1].clone()))
                } else {
                    Err(RayError::Unstable(i))
                }
            }
        }
    }

    /// Syllables known not to change when the ray is extended.
    pub fn stable_syllables(&self) -> &[FactorElement] {
        match self.tail {
            CombTail::Open => &self.syllables[..self.syllables.len().saturating_sub(1)],
            _ => &self.syllables,
        }
    }

    /// The first `count` syllables (fewer for short finite-type rays).
    pub fn expand(&self, count: usize) -> Vec<FactorElement> {
        match &self.tail {
            CombTail::Cycle(c) => (0..count)
                .map(|i| if i < self.syllables.len() { self.syllables[i].clone() } else { c[(i - self.syllables.len()) % c.len()].clone() })
                .collect(),
            _ => self.syllables.iter().take(count).cloned().collect(),
        }
    }

    pub fn format(&self, g: &FreeProduct) -> String {
        let syl = |xs: &[FactorElement]| xs.iter().map(|s| g.factor(s.factor).format_element(s)).collect::<Vec<_>>().join(" | ");
        let head = syl(&self.syllables);
        let tail = match &self.tail {
            CombTail::Boundary(z) => format!("tail={}", format_boundary(g.factor(z.factor), z)),
            CombTail::Cycle(c) => format!("cycle={}", syl(c)),
            CombTail::Open => "open".to_string(),
        };
        if head.is_empty() {
            format!("; {tail}")
        } else {
            format!("{head} ; {tail}")
        }
    }

    pub fn to_json(&self, g: &FreeProduct) -> Value {
        let kind = match self.kind() {
            CombKind::Finite => "finite",
            CombKind::Infinite => "infinite",
        };
        json!({ "type": kind, "text": self.format(g), "length": self.len() })
    }
}

/// `+inf`/`-inf` for the ends of the first generator, otherwise `prefix / block`.
pub fn format_boundary(spec: &FactorSpec, z: &FactorBoundaryPoint) -> String {
    match z.sign() {
        Some(true) => "+inf".into(),
        Some(false) => "-inf".into(),
        None => format!("{} / {}", spec.format_letters(z.prefix()), spec.format_letters(z.block())),
    }
}

pub fn parse_boundary(g: &FreeProduct, factor: FactorId, text: &str) -> Result<FactorBoundaryPoint, RayError> {
    let spec = g.factor(factor);
    let text = text.trim();
    match text {
        "+inf" | "inf" => return Ok(spec.line_end(true)?),
        "-inf" => return Ok(spec.line_end(false)?),
        _ => {}
    }
    let (prefix, block) = text.split_once('/').ok_or_else(|| RayError::Invalid(format!("bad boundary point {text:?}")))?;
    let letters = |s: &str| -> Result<Vec<Letter>, RayError> {
        let x = g.parse_factor_element(factor, s)?;
        Ok(spec.geodesic_letters(&x))
    };
    Ok(spec.boundary_point(letters(prefix)?, letters(block)?)?)
}

/// Parses `x | y | x ; tail=+inf`, `x ; cycle=y | x` or `x | y ; open`.
pub fn parse_comb(g: &FreeProduct, text: &str) -> Result<CombRay, RayError> {
    let (head, tail) = text.split_once(';').ok_or_else(|| RayError::Invalid("missing `;` before the tail".into()))?;
    let syl = |s: &str, offset: usize| -> Result<Vec<FactorElement>, RayError> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split('|').enumerate().map(|(i, part)| Ok(g.parse_factor_element(position_factor(offset + i + 1), part)?)).collect()
    };
    let syllables = syl(head, 0)?;
    let tail = tail.trim();
    if let Some(z) = tail.strip_prefix("tail=") {
        let z = parse_boundary(g, position_factor(syllables.len() + 1), z)?;
        CombRay::finite(g, syllables, z)
    } else if let Some(c) = tail.strip_prefix("cycle=") {
        let n = syllables.len();
        CombRay::periodic(g, syllables, syl(c, n)?)
    } else if tail == "open" {
        CombRay::open(g, syllables)
    } else {
        Err(RayError::Invalid(format!("unknown tail {tail:?}")))
    }
}

/// Φ: concatenates canonical syllable geodesics and the tail ray, cut at `depth`.
pub fn phi(g: &FreeProduct, a: &CombRay, depth: usize) -> Result<RayTrunc<Word>, RayError> {
    let mut cur = Word::identity();
    let mut vertices = vec![cur.clone()];
    let mut push_letters = |factor: FactorId, letters: &mut dyn Iterator<Item = Letter>, vertices: &mut Vec<Word>| {
        for letter in letters {
            if vertices.len() > depth {
                return;
            }
            cur = g.mul_label(&cur, GenLabel { factor, letter });
            vertices.push(cur.clone());
        }
    };
    let syllable_letters = |s: &FactorElement| g.factor(s.factor).geodesic_letters(s);
    for s in &a.syllables {
        push_letters(s.factor, &mut syllable_letters(s).into_iter(), &mut vertices);
    }
    match &a.tail {
        CombTail::Boundary(z) => {
            let mut k = 0;
            let mut letters = std::iter::from_fn(|| {
                k += 1;
                Some(z.letter(k - 1))
            });
            push_letters(z.factor, &mut letters, &mut vertices);
        }
        CombTail::Cycle(c) => {
            // every cycle syllable is nontrivial, so each pass adds at least one vertex
            while vertices.len() <= depth {
                for s in c {
                    push_letters(s.factor, &mut syllable_letters(s).into_iter(), &mut vertices);
                }
            }
        }
        CombTail::Open => {
            if vertices.len() <= depth {
                return Err(RayError::DepthExceedsContent { depth, content: vertices.len() - 1 });
            }
        }
    }
    vertices.truncate(depth + 1);
    Ok(RayTrunc { vertices, provenance: Provenance::Comb(a.clone()) })
}

/// Ψ: maximal same-factor runs of a geodesic from e. A leading B-run yields u_1 = e.
pub fn psi(g: &FreeProduct, ray: &[Word]) -> Result<CombRay, RayError> {
    if !is_geodesic_from_base(g, ray) {
        return Err(RayError::NotGeodesic);
    }
    let last = ray.last().expect("nonempty");
    let mut syllables = Vec::new();
    if last.first_factor() == Some(FactorId::B) {
        syllables.push(g.factor(FactorId::A).identity());
    }
    syllables.extend(last.syllables().iter().cloned());
    CombRay::open(g, syllables)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombNeighborhood {
    pub center: CombRay,
    pub k: usize,
    pub gauge: Gauge,
}

/// Membership b ∈ V_k(a).
pub fn comb_neighborhood_member(g: &FreeProduct, n: &CombNeighborhood, b: &CombRay) -> Result<bool, RayError> {
    comb_member_with_delta(g, delta_of(&n.gauge)?, &n.center, n.k, b)
}

pub fn comb_member_with_delta(g: &FreeProduct, delta: Q, a: &CombRay, k: usize, b: &CombRay) -> Result<bool, RayError> {
    if k == 0 {
        return Err(RayError::Invalid("neighborhood index must be positive".into()));
    }
    let agree = |count: usize| -> Result<bool, RayError> {
        for i in 1..=count {
            if a.syllable(i)? != b.syllable(i)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    match a.len() {
        None => {
            if b.len().is_some_and(|lb| lb < k) {
                return Ok(false);
            }
            agree(k)
        }
        Some(la) => {
            let z = a.boundary().expect("finite type");
            let lb = b.len();
            if lb.is_some_and(|lb| lb < la) || !agree(la)? {
                return Ok(false);
            }
            let spec = g.factor(z.factor);
            let center = Center::Path(spec.boundary_ray(z, k)?);
            if lb == Some(la) {
                let zb = b.boundary().expect("finite type");
                let cand = Candidate::Path(spec.boundary_ray(zb, k)?);
                Ok(neighborhood_member_with_delta(spec, delta, k as u64, false, &center, &cand, NBHD_CAP)?)
            } else {
                let u = b.syllable(la + 1)?.expect("l(b) > l(a)");
                Ok(neighborhood_member_with_delta(spec, delta, k as u64, true, &center, &Candidate::Vertex(u), NBHD_CAP)?)
            }
        }
    }
}

const NBHD_CAP: usize = 4096;

/// Exhaustive population of combinatorial rays: syllables from the per-factor alphabets up to
/// `depth`, finite tails with blocks of length ≤ `period`, and syllable cycles of length 2.
#[derive(Clone, Debug)]
pub struct PopulationSpec {
    pub alphabet_a: Vec<FactorElement>,
    pub alphabet_b: Vec<FactorElement>,
    pub depth: usize,
    pub period: usize,
}

impl PopulationSpec {
    pub fn standard(g: &FreeProduct, depth: usize, period: usize) -> Self {
        PopulationSpec {
            alphabet_a: default_alphabet(g.factor(FactorId::A)),
            alphabet_b: default_alphabet(g.factor(FactorId::B)),
            depth,
            period,
        }
    }

    fn alphabet(&self, f: FactorId) -> &[FactorElement] {
        match f {
            FactorId::A => &self.alphabet_a,
            FactorId::B => &self.alphabet_b,
        }
    }
}

/// ±1, ±2, ±13 on line factors (13 lies beyond the depth-12 neighborhoods of the tree gauge);
/// the nontrivial radius-2 ball elsewhere.
pub fn default_alphabet(spec: &FactorSpec) -> Vec<FactorElement> {
    match spec.kind() {
        FactorKind::IntegerLine | FactorKind::IntegerLattice(1) => [1i64, -1, 2, -2, 13, -13]
            .iter()
            .map(|&k| spec.from_letters(&vec![Letter::new(0, k < 0); k.unsigned_abs() as usize]))
            .collect(),
        _ => spec.ball(2).into_iter().filter(|x| !spec.is_identity(x)).collect(),
    }
}

/// Boundary points `block^∞` with primitive blocks of length ≤ `period`.
pub fn boundary_points(spec: &FactorSpec, period: usize) -> Vec<FactorBoundaryPoint> {
    if !spec.has_boundary() {
        return Vec::new();
    }
    let letters: Vec<Letter> = spec.generators().to_vec();
    let mut out = BTreeSet::new();
    let mut words: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..period {
        words = words
            .iter()
            .flat_map(|w| letters.iter().map(move |&l| w.iter().copied().chain([l]).collect::<Vec<_>>()))
            .collect();
        for w in &words {
            if let Ok(z) = spec.boundary_point(Vec::new(), w.clone()) {
                out.insert(z);
            }
        }
    }
    out.into_iter().collect()
}

pub fn comb_population(g: &FreeProduct, pop: &PopulationSpec) -> Result<Vec<CombRay>, RayError> {
    // all syllable prefixes of length ≤ depth, u_1 possibly trivial
    let mut prefixes: Vec<Vec<FactorElement>> = vec![Vec::new()];
    let mut layer: Vec<Vec<FactorElement>> = vec![Vec::new()];
    for pos in 1..=pop.depth {
        let f = position_factor(pos);
        let mut choices: Vec<FactorElement> = pop.alphabet(f).to_vec();
        if pos == 1 {
            choices.insert(0, g.factor(FactorId::A).identity());
        }
        layer = layer
            .iter()
            .flat_map(|p| choices.iter().map(move |c| p.iter().cloned().chain([c.clone()]).collect::<Vec<_>>()))
            .collect();
        prefixes.extend(layer.iter().cloned());
    }
    let tails: HashMap<FactorId, Vec<FactorBoundaryPoint>> = [FactorId::A, FactorId::B]
        .into_iter()
        .map(|f| (f, boundary_points(g.factor(f), pop.period)))
        .collect();
    let mut out = BTreeSet::new();
    for p in &prefixes {
        let next = position_factor(p.len() + 1);
        for z in &tails[&next] {
            out.insert(CombRay::finite(g, p.clone(), z.clone())?);
        }
        let first = pop.alphabet(next);
        let second = pop.alphabet(next.other());
        for c0 in first {
            for c1 in second {
                out.insert(CombRay::periodic(g, p.clone(), vec![c0.clone(), c1.clone()])?);
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Deterministic sample of at most `n` items, in their original order.
pub fn sample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng);
    idx.truncate(n);
    idx.sort_unstable();
    idx
}
