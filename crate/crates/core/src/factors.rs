//! Concrete factor groups with exact word metrics and eventually periodic boundary points.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorId {
    A,
    B,
}

impl FactorId {
    pub fn other(self) -> FactorId {
        match self {
            FactorId::A => FactorId::B,
            FactorId::B => FactorId::A,
        }
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorId::A => write!(f, "A"),
            FactorId::B => write!(f, "B"),
        }
    }
}

/// A formal generator symbol `g_index` or its formal inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub index: u16,
    pub inverse: bool,
}

impl Letter {
    pub fn new(index: u16, inverse: bool) -> Self {
        Letter { index, inverse }
    }

    pub fn inv(self) -> Self {
        Letter { index: self.index, inverse: !self.inverse }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    Int(i64),
    Vector(Vec<i64>),
    Reduced(Vec<Letter>),
    Index(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorElement {
    pub factor: FactorId,
    pub payload: Payload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    IntegerLine,
    IntegerLattice(usize),
    FreeGroup(usize),
    FiniteTable,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FactorError {
    #[error("elements belong to different factors ({0} vs {1})")]
    MixedFactor(FactorId, FactorId),
    #[error("payload does not match the factor kind")]
    KindMismatch,
    #[error("non-canonical element: {0}")]
    NonCanonical(String),
    #[error("result cap exceeded: {count} results exist")]
    CapExceeded { count: u64 },
    #[error("factor {0} has no Morse boundary")]
    NoBoundary(FactorId),
    #[error("invalid group table: {0}")]
    InvalidTable(String),
    #[error("invalid boundary point: {0}")]
    InvalidBoundary(String),
    #[error("invalid generator names: {0}")]
    BadNames(String),
}

#[derive(Clone, Debug)]
struct GroupTable {
    mul: Vec<Vec<u32>>,
    identity: u32,
    inv: Vec<u32>,
    gens: Vec<u32>,
    dist: Vec<u32>,
    words: Vec<Vec<Letter>>,
}

#[derive(Clone, Debug)]
pub struct FactorSpec {
    id: FactorId,
    kind: FactorKind,
    names: Vec<String>,
    steps: Vec<Letter>,
    table: Option<GroupTable>,
}

const DEFAULT_FREE_A: [&str; 4] = ["x", "y", "z", "w"];
const DEFAULT_FREE_B: [&str; 4] = ["u", "v", "t", "k"];
const DEFAULT_LATTICE_A: [&str; 4] = ["p", "q", "r", "s"];
const DEFAULT_LATTICE_B: [&str; 4] = ["m", "n", "k", "l"];

fn default_names(id: FactorId, count: usize, lattice: bool) -> Vec<String> {
    let pool: &[&str] = match (id, lattice) {
        (FactorId::A, false) => &DEFAULT_FREE_A,
        (FactorId::B, false) => &DEFAULT_FREE_B,
        (FactorId::A, true) => &DEFAULT_LATTICE_A,
        (FactorId::B, true) => &DEFAULT_LATTICE_B,
    };
    let stem = match id {
        FactorId::A => "a",
        FactorId::B => "b",
    };
    (0..count)
        .map(|i| match pool.get(i) {
            Some(n) if count <= pool.len() => n.to_string(),
            _ => format!("{stem}{i}"),
        })
        .collect()
}

fn valid_name(n: &str) -> bool {
    !n.is_empty()
        && n != "e"
        && n.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn paired_steps(count: usize) -> Vec<Letter> {
    (0..count as u16).flat_map(|i| [Letter::new(i, false), Letter::new(i, true)]).collect()
}

impl FactorSpec {
    pub fn integer_line(id: FactorId) -> Self {
        let name = match id {
            FactorId::A => "x",
            FactorId::B => "y",
        };
        FactorSpec {
            id,
            kind: FactorKind::IntegerLine,
            names: vec![name.to_string()],
            steps: paired_steps(1),
            table: None,
        }
    }

    pub fn lattice(id: FactorId, dim: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be positive");
        FactorSpec {
            id,
            kind: FactorKind::IntegerLattice(dim),
            names: default_names(id, dim, true),
            steps: paired_steps(dim),
            table: None,
        }
    }

    pub fn free_group(id: FactorId, rank: usize) -> Self {
        assert!(rank >= 1, "free group rank must be positive");
        FactorSpec {
            id,
            kind: FactorKind::FreeGroup(rank),
            names: default_names(id, rank, false),
            steps: paired_steps(rank),
            table: None,
        }
    }

    /// `mul[i][j]` is the index of the product of elements i and j; `gens` are element indices.
    pub fn finite_table(id: FactorId, mul: Vec<Vec<u32>>, gens: Vec<u32>) -> Result<Self, FactorError> {
        let n = mul.len();
        if n == 0 {
            return Err(FactorError::InvalidTable("empty table".into()));
        }
        if mul.iter().any(|row| row.len() != n || row.iter().any(|&v| v as usize >= n)) {
            return Err(FactorError::InvalidTable("table is not a square table over its indices".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|i| mul[e][i] as usize == i && mul[i][e] as usize == i))
            .ok_or_else(|| FactorError::InvalidTable("no identity element".into()))? as u32;
        let mut inv = vec![0u32; n];
        for (i, slot) in inv.iter_mut().enumerate() {
            *slot = (0..n)
                .find(|&j| mul[i][j] == identity && mul[j][i] == identity)
                .ok_or_else(|| FactorError::InvalidTable(format!("element {i} has no inverse")))?
                as u32;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = mul[a][b] as usize;
                for c in 0..n {
                    if mul[ab][c] != mul[a][mul[b][c] as usize] {
                        return Err(FactorError::InvalidTable(format!("associativity fails at ({a},{b},{c})")));
                    }
                }
            }
        }
        if gens.is_empty() {
            return Err(FactorError::InvalidTable("no generators".into()));
        }
        if gens.iter().any(|&g| g as usize >= n || g == identity) {
            return Err(FactorError::InvalidTable("generator out of range or equal to the identity".into()));
        }
        let mut steps = Vec::new();
        let mut seen = HashSet::new();
        for (i, &g) in gens.iter().enumerate() {
            if seen.insert(g) {
                steps.push(Letter::new(i as u16, false));
            }
            if seen.insert(inv[g as usize]) {
                steps.push(Letter::new(i as u16, true));
            }
        }
        let elem = |l: Letter| if l.inverse { inv[gens[l.index as usize] as usize] } else { gens[l.index as usize] };
        let mut dist = vec![u32::MAX; n];
        let mut words: Vec<Vec<Letter>> = vec![Vec::new(); n];
        dist[identity as usize] = 0;
        let mut queue = VecDeque::from([identity]);
        while let Some(v) = queue.pop_front() {
            for &s in &steps {
                let w = mul[v as usize][elem(s) as usize];
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[v as usize] + 1;
                    let mut word = words[v as usize].clone();
                    word.push(s);
                    words[w as usize] = word;
                    queue.push_back(w);
                }
            }
        }
        if dist.iter().any(|&d| d == u32::MAX) {
            return Err(FactorError::InvalidTable("generators do not generate the group".into()));
        }
        let count = gens.len();
        Ok(FactorSpec {
            id,
            kind: FactorKind::FiniteTable,
            names: default_finite_names(id, count),
            steps,
            table: Some(GroupTable { mul, identity, inv, gens, dist, words }),
        })
    }

    /// ℤ/n with the single generator 1.
    pub fn cyclic(id: FactorId, modulus: u32) -> Result<Self, FactorError> {
        if modulus < 2 {
            return Err(FactorError::InvalidTable("cyclic modulus must be at least 2".into()));
        }
        let mul = (0..modulus).map(|i| (0..modulus).map(|j| (i + j) % modulus).collect()).collect();
        FactorSpec::finite_table(id, mul, vec![1])
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, FactorError> {
        if names.len() != self.names.len() {
            return Err(FactorError::BadNames(format!("expected {} names, got {}", self.names.len(), names.len())));
        }
        if let Some(bad) = names.iter().find(|n| !valid_name(n)) {
            return Err(FactorError::BadNames(format!("{bad:?} is not a valid generator name")));
        }
        let distinct: HashSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(FactorError::BadNames("duplicate generator name".into()));
        }
        self.names = names;
        Ok(self)
    }

    pub fn id(&self) -> FactorId {
        self.id
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn letter_count(&self) -> usize {
        self.names.len()
    }

    /// Cayley-graph generating set in deterministic order g0, g0⁻¹, g1, g1⁻¹, …
    pub fn generators(&self) -> &[Letter] {
        &self.steps
    }

    pub fn order(&self) -> Option<usize> {
        self.table.as_ref().map(|t| t.mul.len())
    }

    pub fn has_boundary(&self) -> bool {
        matches!(self.kind, FactorKind::IntegerLine | FactorKind::FreeGroup(_) | FactorKind::IntegerLattice(1))
    }

    pub fn letter_by_name(&self, name: &str) -> Option<u16> {
        self.names.iter().position(|n| n == name).map(|i| i as u16)
    }

    pub fn identity(&self) -> FactorElement {
        let payload = match self.kind {
            FactorKind::IntegerLine => Payload::Int(0),
            FactorKind::IntegerLattice(d) => Payload::Vector(vec![0; d]),
            FactorKind::FreeGroup(_) => Payload::Reduced(Vec::new()),
            FactorKind::FiniteTable => Payload::Index(self.table().identity),
        };
        FactorElement { factor: self.id, payload }
    }

    pub fn is_identity(&self, x: &FactorElement) -> bool {
        match &x.payload {
            Payload::Int(n) => *n == 0,
            Payload::Vector(v) => v.iter().all(|&c| c == 0),
            Payload::Reduced(w) => w.is_empty(),
            Payload::Index(i) => self.table.as_ref().is_some_and(|t| t.identity == *i),
        }
    }

    fn table(&self) -> &GroupTable {
        self.table.as_ref().expect("finite factor carries a table")
    }

    /// Validates that `x` is a canonical element of this factor.
    pub fn check(&self, x: &FactorElement) -> Result<(), FactorError> {
        if x.factor != self.id {
            return Err(FactorError::MixedFactor(self.id, x.factor));
        }
        match (&x.payload, self.kind) {
            (Payload::Int(_), FactorKind::IntegerLine) => Ok(()),
            (Payload::Vector(v), FactorKind::IntegerLattice(d)) if v.len() == d => Ok(()),
            (Payload::Reduced(w), FactorKind::FreeGroup(r)) => {
                if w.iter().any(|l| l.index as usize >= r) {
                    return Err(FactorError::NonCanonical("letter out of range".into()));
                }
                if w.windows(2).any(|p| p[0] == p[1].inv()) {
                    return Err(FactorError::NonCanonical("adjacent inverse pair".into()));
                }
                Ok(())
            }
            (Payload::Index(i), FactorKind::FiniteTable) if (*i as usize) < self.table().mul.len() => Ok(()),
            (Payload::Index(_), FactorKind::FiniteTable) => Err(FactorError::NonCanonical("index out of range".into())),
            _ => Err(FactorError::KindMismatch),
        }
    }

    fn same(&self, x: &FactorElement, y: &FactorElement) -> Result<(), FactorError> {
        if x.factor != y.factor {
            return Err(FactorError::MixedFactor(x.factor, y.factor));
        }
        if x.factor != self.id {
            return Err(FactorError::MixedFactor(self.id, x.factor));
        }
        Ok(())
    }

    pub fn letter_element(&self, l: Letter) -> FactorElement {
        self.step(&self.identity(), l)
    }

    /// Right multiplication by a single generator letter.
    pub fn step(&self, x: &FactorElement, l: Letter) -> FactorElement {
        let sign = if l.inverse { -1 } else { 1 };
        let payload = match &x.payload {
            Payload::Int(n) => Payload::Int(n + sign),
            Payload::Vector(v) => {
                let mut v = v.clone();
                v[l.index as usize] += sign;
                Payload::Vector(v)
            }
            Payload::Reduced(w) => {
                let mut w = w.clone();
                if w.last() == Some(&l.inv()) {
                    w.pop();
                } else {
                    w.push(l);
                }
                Payload::Reduced(w)
            }
            Payload::Index(i) => {
                let t = self.table();
                let g = t.gens[l.index as usize];
                let g = if l.inverse { t.inv[g as usize] } else { g };
                Payload::Index(t.mul[*i as usize][g as usize])
            }
        };
        FactorElement { factor: x.factor, payload }
    }

    pub fn from_letters(&self, letters: &[Letter]) -> FactorElement {
        letters.iter().fold(self.identity(), |acc, &l| self.step(&acc, l))
    }

    pub fn multiply(&self, x: &FactorElement, y: &FactorElement) -> Result<FactorElement, FactorError> {
        self.same(x, y)?;
        let payload = match (&x.payload, &y.payload) {
            (Payload::Int(a), Payload::Int(b)) => Payload::Int(a + b),
            (Payload::Vector(a), Payload::Vector(b)) => Payload::Vector(a.iter().zip(b).map(|(p, q)| p + q).collect()),
            (Payload::Reduced(a), Payload::Reduced(b)) => {
                let mut out = a.clone();
                for &l in b {
                    if out.last() == Some(&l.inv()) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Payload::Reduced(out)
            }
            (Payload::Index(a), Payload::Index(b)) => Payload::Index(self.table().mul[*a as usize][*b as usize]),
            _ => return Err(FactorError::KindMismatch),
        };
        Ok(FactorElement { factor: x.factor, payload })
    }

    pub fn inverse(&self, x: &FactorElement) -> FactorElement {
        let payload = match &x.payload {
            Payload::Int(n) => Payload::Int(-n),
            Payload::Vector(v) => Payload::Vector(v.iter().map(|c| -c).collect()),
            Payload::Reduced(w) => Payload::Reduced(w.iter().rev().map(|l| l.inv()).collect()),
            Payload::Index(i) => Payload::Index(self.table().inv[*i as usize]),
        };
        FactorElement { factor: x.factor, payload }
    }

    /// Word length d(e, x).
    pub fn norm(&self, x: &FactorElement) -> u64 {
        match &x.payload {
            Payload::Int(n) => n.unsigned_abs(),
            Payload::Vector(v) => v.iter().map(|c| c.unsigned_abs()).sum(),
            Payload::Reduced(w) => w.len() as u64,
            Payload::Index(i) => self.table().dist[*i as usize] as u64,
        }
    }

    pub fn distance(&self, x: &FactorElement, y: &FactorElement) -> Result<u64, FactorError> {
        self.same(x, y)?;
        Ok(self.norm(&self.multiply(&self.inverse(x), y)?))
    }

    /// All geodesic vertex paths x → y in lexicographic generator order, up to `cap`.
    pub fn geodesics(&self, x: &FactorElement, y: &FactorElement, cap: usize) -> Result<Vec<Vec<FactorElement>>, FactorError> {
        self.same(x, y)?;
        let mut out = Vec::new();
        let mut count = 0u64;
        let mut path = vec![x.clone()];
        self.geodesic_dfs(y, &mut path, cap, &mut out, &mut count);
        if count > cap as u64 {
            return Err(FactorError::CapExceeded { count });
        }
        Ok(out)
    }

    fn geodesic_dfs(
        &self,
        target: &FactorElement,
        path: &mut Vec<FactorElement>,
        cap: usize,
        out: &mut Vec<Vec<FactorElement>>,
        count: &mut u64,
    ) {
        let cur = path.last().expect("nonempty").clone();
        let remaining = self.distance(&cur, target).expect("same factor");
        if remaining == 0 {
            *count += 1;
            if out.len() < cap {
                out.push(path.clone());
            }
            return;
        }
        for &s in &self.steps {
            let next = self.step(&cur, s);
            if self.distance(&next, target).expect("same factor") + 1 == remaining {
                path.push(next);
                self.geodesic_dfs(target, path, cap, out, count);
                path.pop();
            }
        }
    }

    /// Letters of the lexicographically first geodesic word for `x`.
    pub fn geodesic_letters(&self, x: &FactorElement) -> Vec<Letter> {
        match &x.payload {
            Payload::Int(n) => vec![Letter::new(0, *n < 0); n.unsigned_abs() as usize],
            Payload::Vector(v) => v
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| std::iter::repeat_n(Letter::new(i as u16, c < 0), c.unsigned_abs() as usize))
                .collect(),
            Payload::Reduced(w) => w.clone(),
            Payload::Index(i) => self.table().words[*i as usize].clone(),
        }
    }

    /// Vertices e, s1, s1s2, … along the canonical geodesic to `x`.
    pub fn canonical_geodesic(&self, x: &FactorElement) -> Vec<FactorElement> {
        let mut cur = self.identity();
        let mut out = vec![cur.clone()];
        for l in self.geodesic_letters(x) {
            cur = self.step(&cur, l);
            out.push(cur.clone());
        }
        out
    }

    /// Generator maps g_i ↦ g_π(i)^{±1} that extend to automorphisms of the factor, each given
    /// as the image of every generator index. Tables only get the identity.
    pub fn signed_permutations(&self) -> Vec<Vec<Letter>> {
        let n = match self.kind {
            FactorKind::IntegerLine => 1,
            FactorKind::IntegerLattice(d) | FactorKind::FreeGroup(d) => d,
            FactorKind::FiniteTable => return vec![(0..self.letter_count() as u16).map(|i| Letter::new(i, false)).collect()],
        };
        let mut perms: Vec<Vec<u16>> = vec![Vec::new()];
        for _ in 0..n {
            perms = perms
                .iter()
                .flat_map(|p| (0..n as u16).filter(|i| !p.contains(i)).map(|i| [p.as_slice(), &[i]].concat()))
                .collect();
        }
        let mut out = Vec::new();
        for p in perms {
            for signs in 0u32..(1 << n) {
                out.push(p.iter().enumerate().map(|(k, &i)| Letter::new(i, signs >> k & 1 == 1)).collect());
            }
        }
        out
    }

    /// Image of `x` under the automorphism sending generator i to `images[i]`.
    pub fn map_element(&self, x: &FactorElement, images: &[Letter]) -> FactorElement {
        let letters: Vec<Letter> = self
            .geodesic_letters(x)
            .into_iter()
            .map(|l| {
                let img = images[l.index as usize];
                if l.inverse {
                    img.inv()
                } else {
                    img
                }
            })
            .collect();
        self.from_letters(&letters)
    }

    /// Breadth-first enumeration of the factor: e first, ties broken by generator order.
    pub fn enumerate(&self) -> FactorEnumerator<'_> {
        FactorEnumerator::new(self)
    }

    pub fn ball(&self, radius: u64) -> Vec<FactorElement> {
        self.enumerate().take_while(|x| self.norm(x) <= radius).collect()
    }

    pub fn boundary_point(&self, prefix: Vec<Letter>, block: Vec<Letter>) -> Result<FactorBoundaryPoint, FactorError> {
        if !self.has_boundary() {
            return Err(FactorError::NoBoundary(self.id));
        }
        let rank = self.letter_count();
        if prefix.iter().chain(&block).any(|l| l.index as usize >= rank) {
            return Err(FactorError::InvalidBoundary("letter out of range".into()));
        }
        if block.is_empty() {
            return Err(FactorError::InvalidBoundary("empty repeating block".into()));
        }
        if prefix.windows(2).any(|p| p[0] == p[1].inv()) {
            return Err(FactorError::InvalidBoundary("prefix is not reduced".into()));
        }
        let n = block.len();
        if (0..n).any(|i| block[i] == block[(i + 1) % n].inv()) {
            return Err(FactorError::InvalidBoundary("block is not cyclically reduced".into()));
        }
        if prefix.last().is_some_and(|&l| l == block[0].inv()) {
            return Err(FactorError::InvalidBoundary("prefix cancels against the block".into()));
        }
        Ok(FactorBoundaryPoint::canonical(self.id, prefix, block))
    }

    /// The end of the line at sign `+1` or `-1` of generator 0.
    pub fn line_end(&self, positive: bool) -> Result<FactorBoundaryPoint, FactorError> {
        self.boundary_point(Vec::new(), vec![Letter::new(0, !positive)])
    }

    pub fn boundary_ray(&self, z: &FactorBoundaryPoint, depth: usize) -> Result<Vec<FactorElement>, FactorError> {
        if !self.has_boundary() {
            return Err(FactorError::NoBoundary(self.id));
        }
        if z.factor != self.id {
            return Err(FactorError::MixedFactor(self.id, z.factor));
        }
        let mut cur = self.identity();
        let mut out = vec![cur.clone()];
        for i in 0..depth {
            cur = self.step(&cur, z.letter(i));
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn letter_name(&self, l: Letter) -> String {
        let base = &self.names[l.index as usize];
        if l.inverse {
            format!("{base}^-1")
        } else {
            base.clone()
        }
    }

    /// Run-length encodes letters as `x^2 y^-1`; the empty word prints as `e`.
    pub fn format_letters(&self, letters: &[Letter]) -> String {
        if letters.is_empty() {
            return "e".into();
        }
        let mut parts = Vec::new();
        let mut i = 0;
        while i < letters.len() {
            let l = letters[i];
            let mut j = i;
            while j < letters.len() && letters[j] == l {
                j += 1;
            }
            let count = (j - i) as i64;
            let exp = if l.inverse { -count } else { count };
            let name = &self.names[l.index as usize];
            parts.push(if exp == 1 { name.clone() } else { format!("{name}^{exp}") });
            i = j;
        }
        parts.join(" ")
    }

    pub fn format_element(&self, x: &FactorElement) -> String {
        self.format_letters(&self.geodesic_letters(x))
    }
}

fn default_finite_names(id: FactorId, count: usize) -> Vec<String> {
    let stem = match id {
        FactorId::A => "a",
        FactorId::B => "b",
    };
    if count == 1 {
        vec![stem.to_string()]
    } else {
        (0..count).map(|i| format!("{stem}{i}")).collect()
    }
}

/// Lazy breadth-first enumeration of a factor group.
pub struct FactorEnumerator<'a> {
    spec: &'a FactorSpec,
    queue: VecDeque<FactorElement>,
    seen: HashSet<FactorElement>,
}

impl<'a> FactorEnumerator<'a> {
    fn new(spec: &'a FactorSpec) -> Self {
        let e = spec.identity();
        let mut seen = HashSet::new();
        seen.insert(e.clone());
        FactorEnumerator { spec, queue: VecDeque::from([e]), seen }
    }
}

impl Iterator for FactorEnumerator<'_> {
    type Item = FactorElement;

    fn next(&mut self) -> Option<FactorElement> {
        let x = self.queue.pop_front()?;
        for &s in self.spec.generators() {
            let y = self.spec.step(&x, s);
            if self.seen.insert(y.clone()) {
                self.queue.push_back(y);
            }
        }
        Some(x)
    }
}

/// Eventually periodic reduced infinite word `prefix · block^∞` in a factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorBoundaryPoint {
    pub factor: FactorId,
    prefix: Vec<Letter>,
    block: Vec<Letter>,
}

impl FactorBoundaryPoint {
    fn canonical(factor: FactorId, mut prefix: Vec<Letter>, mut block: Vec<Letter>) -> Self {
        let n = block.len();
        if let Some(p) = (1..=n).find(|&p| n % p == 0 && (0..n).all(|i| block[i] == block[i % p])) {
            block.truncate(p);
        }
        while prefix.last().is_some_and(|&l| Some(&l) == block.last()) {
            prefix.pop();
            block.rotate_right(1);
        }
        FactorBoundaryPoint { factor, prefix, block }
    }

    pub fn prefix(&self) -> &[Letter] {
        &self.prefix
    }

    pub fn block(&self) -> &[Letter] {
        &self.block
    }

    /// The i-th letter of the unrolled infinite word.
    pub fn letter(&self, i: usize) -> Letter {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.block[(i - self.prefix.len()) % self.block.len()]
        }
    }

    pub fn letters(&self, count: usize) -> Vec<Letter> {
        (0..count).map(|i| self.letter(i)).collect()
    }

    /// For single-letter directions (the ends of a line), `Some(true)` means the positive end.
    pub fn sign(&self) -> Option<bool> {
        (self.prefix.is_empty() && self.block.len() == 1 && self.block[0].index == 0).then(|| !self.block[0].inverse)
    }

    pub fn map_letters(&self, f: impl Fn(Letter) -> Letter) -> Self {
        FactorBoundaryPoint::canonical(
            self.factor,
            self.prefix.iter().map(|&l| f(l)).collect(),
            self.block.iter().map(|&l| f(l)).collect(),
        )
    }

    pub fn with_factor(&self, factor: FactorId) -> Self {
        FactorBoundaryPoint { factor, ..self.clone() }
    }

    pub fn describe(&self, spec: &FactorSpec) -> String {
        let block = spec.format_letters(&self.block);
        if self.prefix.is_empty() {
            format!("({block})^inf")
        } else {
            format!("{} ({block})^inf", spec.format_letters(&self.prefix))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(i: u16) -> Letter {
        Letter::new(i, false)
    }
    fn li(i: u16) -> Letter {
        Letter::new(i, true)
    }

    #[test]
    fn line_multiply() {
        let z = FactorSpec::integer_line(FactorId::A);
        let a = FactorElement { factor: FactorId::A, payload: Payload::Int(3) };
        let b = FactorElement { factor: FactorId::A, payload: Payload::Int(-5) };
        assert_eq!(z.multiply(&a, &b).unwrap().payload, Payload::Int(-2));
    }

    #[test]
    fn free_multiply_reduces() {
        let f = FactorSpec::free_group(FactorId::A, 2);
        let u = f.from_letters(&[l(0), l(1)]);
        let v = f.from_letters(&[li(1), l(0)]);
        assert_eq!(f.multiply(&u, &v).unwrap().payload, Payload::Reduced(vec![l(0), l(0)]));
    }

    #[test]
    fn z2_table() {
        let c = FactorSpec::cyclic(FactorId::A, 2).unwrap();
        let one = FactorElement { factor: FactorId::A, payload: Payload::Index(1) };
        assert_eq!(c.multiply(&one, &one).unwrap().payload, Payload::Index(0));
        assert_eq!(c.generators().len(), 1);
    }

    #[test]
    fn mixed_factor_rejected() {
        let f = FactorSpec::integer_line(FactorId::A);
        let a = f.identity();
        let b = FactorElement { factor: FactorId::B, payload: Payload::Int(1) };
        assert!(matches!(f.multiply(&a, &b), Err(FactorError::MixedFactor(..))));
    }

    #[test]
    fn distances() {
        let z2 = FactorSpec::lattice(FactorId::A, 2);
        let p = FactorElement { factor: FactorId::A, payload: Payload::Vector(vec![2, -3]) };
        assert_eq!(z2.distance(&z2.identity(), &p).unwrap(), 5);
        let f = FactorSpec::free_group(FactorId::A, 2);
        let w = f.from_letters(&[l(0), l(1), li(0)]);
        assert_eq!(f.distance(&f.identity(), &w).unwrap(), 3);
    }

    #[test]
    fn cyclic_six_distance_by_bfs_oracle() {
        let c = FactorSpec::cyclic(FactorId::A, 6).unwrap();
        // oracle: shortest walk on the 6-cycle is min(k, 6-k)
        for k in 0..6u32 {
            let x = FactorElement { factor: FactorId::A, payload: Payload::Index(k) };
            assert_eq!(c.norm(&x), k.min(6 - k) as u64);
        }
    }

    #[test]
    fn geodesic_counts() {
        let f = FactorSpec::free_group(FactorId::A, 2);
        let xy = f.from_letters(&[l(0), l(1)]);
        let paths = f.geodesics(&f.identity(), &xy, 10).unwrap();
        assert_eq!(paths, vec![vec![f.identity(), f.from_letters(&[l(0)]), xy.clone()]]);
        let z2 = FactorSpec::lattice(FactorId::A, 2);
        let p = FactorElement { factor: FactorId::A, payload: Payload::Vector(vec![1, 1]) };
        assert_eq!(z2.geodesics(&z2.identity(), &p, 10).unwrap().len(), 2);
        let z = FactorSpec::integer_line(FactorId::A);
        let four = FactorElement { factor: FactorId::A, payload: Payload::Int(4) };
        assert_eq!(z.geodesics(&z.identity(), &four, 10).unwrap().len(), 1);
        let far = FactorElement { factor: FactorId::A, payload: Payload::Vector(vec![2, 2]) };
        assert_eq!(z2.geodesics(&z2.identity(), &far, 3), Err(FactorError::CapExceeded { count: 6 }));
    }

    #[test]
    fn boundary_rays() {
        let z = FactorSpec::integer_line(FactorId::A);
        let plus = z.line_end(true).unwrap();
        let ray: Vec<_> = z.boundary_ray(&plus, 3).unwrap().into_iter().map(|x| x.payload).collect();
        assert_eq!(ray, (0..=3).map(Payload::Int).collect::<Vec<_>>());
        let f = FactorSpec::free_group(FactorId::A, 2);
        let zb = f.boundary_point(vec![l(0)], vec![l(1)]).unwrap();
        let ray = f.boundary_ray(&zb, 3).unwrap();
        let expect: Vec<_> = [vec![], vec![l(0)], vec![l(0), l(1)], vec![l(0), l(1), l(1)]]
            .into_iter()
            .map(|w| f.from_letters(&w))
            .collect();
        assert_eq!(ray, expect);
        let z2 = FactorSpec::lattice(FactorId::A, 2);
        assert_eq!(z2.boundary_point(vec![], vec![l(0)]), Err(FactorError::NoBoundary(FactorId::A)));
        let c = FactorSpec::cyclic(FactorId::A, 5).unwrap();
        assert!(c.boundary_ray(&plus, 2).is_err());
    }

    #[test]
    fn boundary_canonical_form() {
        let f = FactorSpec::free_group(FactorId::A, 2);
        let a = f.boundary_point(vec![l(0), l(1)], vec![l(0), l(1)]).unwrap();
        let b = f.boundary_point(vec![], vec![l(0), l(1), l(0), l(1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.block(), &[l(0), l(1)]);
        assert!(f.boundary_point(vec![l(0)], vec![l(0), li(0)]).is_err());
        assert!(f.boundary_point(vec![li(1)], vec![l(1)]).is_err());
    }

    #[test]
    fn enumeration_order() {
        let z = FactorSpec::integer_line(FactorId::A);
        let first: Vec<_> = z.enumerate().take(5).map(|x| x.payload).collect();
        assert_eq!(first, vec![Payload::Int(0), Payload::Int(1), Payload::Int(-1), Payload::Int(2), Payload::Int(-2)]);
        let f = FactorSpec::free_group(FactorId::A, 2);
        assert_eq!(f.ball(2).len(), 17);
    }

    #[test]
    fn table_validation() {
        assert!(FactorSpec::finite_table(FactorId::A, vec![vec![0, 1], vec![1, 1]], vec![1]).is_err());
        assert!(FactorSpec::finite_table(FactorId::A, vec![vec![0]], vec![0]).is_err());
        // ℤ/4 generated by 2 alone does not generate
        assert!(FactorSpec::finite_table(FactorId::A, (0..4).map(|i| (0..4).map(|j| (i + j) % 4).collect()).collect(), vec![2]).is_err());
    }

    #[test]
    fn names_and_format() {
        let f = FactorSpec::free_group(FactorId::A, 2);
        assert_eq!(f.format_letters(&[l(0), l(0), li(1)]), "x^2 y^-1");
        assert_eq!(f.format_element(&f.identity()), "e");
        assert!(f.clone().with_names(vec!["p".into(), "p".into()]).is_err());
        assert!(f.clone().with_names(vec!["p".into(), "e".into()]).is_err());
        let g = f.with_names(vec!["p".into(), "q".into()]).unwrap();
        assert_eq!(g.letter_by_name("q"), Some(1));
    }
}
