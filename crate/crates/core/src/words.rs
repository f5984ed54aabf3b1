//! Normal forms in the free product A∗B.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::factors::{FactorElement, FactorError, FactorId, FactorSpec, Letter, Payload};
use crate::geometry::{Geometry, RealizationCapExceeded};

/// Reduced alternating syllable sequence; the empty sequence is e.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    syllables: Vec<FactorElement>,
}

impl Word {
    pub fn identity() -> Self {
        Word { syllables: Vec::new() }
    }

    pub fn syllables(&self) -> &[FactorElement] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    pub fn first_factor(&self) -> Option<FactorId> {
        self.syllables.first().map(|s| s.factor)
    }

    pub fn last_factor(&self) -> Option<FactorId> {
        self.syllables.last().map(|s| s.factor)
    }

    /// True when the word is a single syllable of `factor` or e.
    pub fn in_factor_copy(&self, factor: FactorId) -> bool {
        self.syllables.len() <= 1 && self.syllables.iter().all(|s| s.factor == factor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SyllableLength(pub u64);

impl fmt::Display for SyllableLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An edge label of Γ(A∗B, S_A ∪ S_B).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenLabel {
    pub factor: FactorId,
    pub letter: Letter,
}

impl GenLabel {
    pub fn inv(self) -> Self {
        GenLabel { factor: self.factor, letter: self.letter.inv() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("operation undefined on the identity word")]
    EmptyWord,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("syllables do not alternate or contain an identity")]
    NotReduced,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("factor specs must be given as A then B")]
    WrongFactorOrder,
    #[error("generator name {0:?} is used by both factors")]
    SharedName(String),
}

const MAX_PARSE_EXPONENT: i64 = 1 << 20;

#[derive(Clone, Debug)]
pub struct FreeProduct {
    a: FactorSpec,
    b: FactorSpec,
    labels: Vec<GenLabel>,
}

impl FreeProduct {
    pub fn new(a: FactorSpec, b: FactorSpec) -> Result<Self, WordError> {
        if a.id() != FactorId::A || b.id() != FactorId::B {
            return Err(WordError::WrongFactorOrder);
        }
        if let Some(n) = a.names().iter().find(|n| b.names().contains(n)) {
            return Err(WordError::SharedName(n.clone()));
        }
        let labels = a
            .generators()
            .iter()
            .map(|&letter| GenLabel { factor: FactorId::A, letter })
            .chain(b.generators().iter().map(|&letter| GenLabel { factor: FactorId::B, letter }))
            .collect();
        Ok(FreeProduct { a, b, labels })
    }

    pub fn factor(&self, id: FactorId) -> &FactorSpec {
        match id {
            FactorId::A => &self.a,
            FactorId::B => &self.b,
        }
    }

    /// Generating set S_A ∪ S_B in deterministic order (A first).
    pub fn labels(&self) -> &[GenLabel] {
        &self.labels
    }

    pub fn word(&self, syllables: Vec<FactorElement>) -> Result<Word, WordError> {
        for s in &syllables {
            self.factor(s.factor).check(s)?;
            if self.factor(s.factor).is_identity(s) {
                return Err(WordError::NotReduced);
            }
        }
        if syllables.windows(2).any(|p| p[0].factor == p[1].factor) {
            return Err(WordError::NotReduced);
        }
        Ok(Word { syllables })
    }

    pub fn from_factor(&self, x: &FactorElement) -> Word {
        if self.factor(x.factor).is_identity(x) {
            Word::identity()
        } else {
            Word { syllables: vec![x.clone()] }
        }
    }

    pub fn label_element(&self, l: GenLabel) -> FactorElement {
        self.factor(l.factor).letter_element(l.letter)
    }

    /// Right multiplication by one generator.
    pub fn mul_label(&self, w: &Word, l: GenLabel) -> Word {
        let mut syl = w.syllables.clone();
        let spec = self.factor(l.factor);
        match syl.last() {
            Some(last) if last.factor == l.factor => {
                let next = spec.step(last, l.letter);
                syl.pop();
                if !spec.is_identity(&next) {
                    syl.push(next);
                }
            }
            _ => syl.push(spec.letter_element(l.letter)),
        }
        Word { syllables: syl }
    }

    pub fn multiply(&self, u: &Word, v: &Word) -> Word {
        let mut out = u.syllables.clone();
        for s in &v.syllables {
            match out.last() {
                Some(last) if last.factor == s.factor => {
                    let spec = self.factor(s.factor);
                    let merged = spec.multiply(last, s).expect("same factor");
                    out.pop();
                    if !spec.is_identity(&merged) {
                        out.push(merged);
                    }
                }
                _ => out.push(s.clone()),
            }
        }
        Word { syllables: out }
    }

    pub fn inverse(&self, w: &Word) -> Word {
        Word { syllables: w.syllables.iter().rev().map(|s| self.factor(s.factor).inverse(s)).collect() }
    }

    /// d(e, w): the sum of the syllables' factor word lengths.
    pub fn norm(&self, w: &Word) -> u64 {
        w.syllables.iter().map(|s| self.factor(s.factor).norm(s)).sum()
    }

    pub fn distance(&self, u: &Word, v: &Word) -> u64 {
        self.norm(&self.multiply(&self.inverse(u), v))
    }

    pub fn syllable_length(&self, w: &Word) -> SyllableLength {
        let n = w.syllables.len() as u64;
        let lead = u64::from(w.first_factor() == Some(FactorId::B));
        SyllableLength(if n == 0 { 0 } else { n + lead })
    }

    /// Products of the first i syllables for 1 ≤ i < n: the forced transit points of every path e → w.
    pub fn prefix_vertices(&self, w: &Word) -> Result<Vec<Word>, WordError> {
        if w.is_identity() {
            return Err(WordError::EmptyWord);
        }
        Ok((1..w.syllables.len()).map(|i| Word { syllables: w.syllables[..i].to_vec() }).collect())
    }

    /// Syllables padded to start in A (a leading identity of A when w starts in B or is e).
    fn padded(&self, w: &Word) -> Vec<FactorElement> {
        let mut out = Vec::with_capacity(w.syllables.len() + 1);
        if w.first_factor() != Some(FactorId::A) {
            out.push(self.a.identity());
        }
        out.extend(w.syllables.iter().cloned());
        out
    }

    /// Membership of v in the shadow C_w.
    pub fn in_shadow(&self, w: &Word, v: &Word) -> bool {
        let pw = self.padded(w);
        let pv = self.padded(v);
        pv.len() > pw.len() && pv[..pw.len()] == pw[..]
    }

    /// π̃ onto the given factor: the leading syllable if it lies there, else the factor identity.
    pub fn project_to_factor(&self, v: &Word, target: FactorId) -> FactorElement {
        match v.syllables.first() {
            Some(s) if s.factor == target => s.clone(),
            _ => self.factor(target).identity(),
        }
    }

    pub fn labels_of(&self, w: &Word) -> Vec<GenLabel> {
        w.syllables
            .iter()
            .flat_map(|s| {
                let f = s.factor;
                self.factor(f).geodesic_letters(s).into_iter().map(move |letter| GenLabel { factor: f, letter })
            })
            .collect()
    }

    /// Vertices of the lexicographically first geodesic e → w.
    pub fn canonical_realization(&self, w: &Word) -> Vec<Word> {
        let mut cur = Word::identity();
        let mut out = vec![cur.clone()];
        for l in self.labels_of(w) {
            cur = self.mul_label(&cur, l);
            out.push(cur.clone());
        }
        out
    }

    /// All geodesics e → w: products of factor geodesics through the prefix vertices.
    pub fn realizations(&self, w: &Word, cap: usize) -> Result<Vec<Vec<Word>>, WordError> {
        let mut per_syllable = Vec::with_capacity(w.syllables.len());
        let mut total: u64 = 1;
        let mut overflow = false;
        for s in &w.syllables {
            let spec = self.factor(s.factor);
            match spec.geodesics(&spec.identity(), s, cap) {
                Ok(g) => {
                    total = total.saturating_mul(g.len() as u64);
                    per_syllable.push(g);
                }
                Err(FactorError::CapExceeded { count }) => {
                    total = total.saturating_mul(count);
                    overflow = true;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if overflow || total > cap as u64 {
            return Err(WordError::Factor(FactorError::CapExceeded { count: total }));
        }
        let mut partial: Vec<Vec<Word>> = vec![vec![Word::identity()]];
        let mut prefix = Word::identity();
        for (s, geos) in w.syllables.iter().zip(&per_syllable) {
            let mut next = Vec::with_capacity(partial.len() * geos.len());
            for p in &partial {
                for g in geos {
                    let mut q = p.clone();
                    for x in &g[1..] {
                        q.push(self.multiply(&prefix, &self.from_factor(x)));
                    }
                    next.push(q);
                }
            }
            partial = next;
            prefix = self.multiply(&prefix, &Word { syllables: vec![s.clone()] });
        }
        Ok(partial)
    }

    fn lookup_name(&self, name: &str) -> Option<GenLabel> {
        for id in [FactorId::A, FactorId::B] {
            if let Some(index) = self.factor(id).letter_by_name(name) {
                return Some(GenLabel { factor: id, letter: Letter::new(index, false) });
            }
        }
        None
    }

    /// Parses whitespace-separated tokens `x`, `x^-1`, `x^k`; `e` or empty input is the identity.
    pub fn parse(&self, text: &str) -> Result<Word, WordError> {
        let mut w = Word::identity();
        for tok in text.split_whitespace() {
            if tok == "e" {
                continue;
            }
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => {
                    let e: i64 = e.parse().map_err(|_| WordError::Parse(format!("bad exponent in {tok:?}")))?;
                    (n, e)
                }
                None => (tok, 1),
            };
            if exp.abs() > MAX_PARSE_EXPONENT {
                return Err(WordError::Parse(format!("exponent too large in {tok:?}")));
            }
            let label = self.lookup_name(name).ok_or_else(|| WordError::Parse(format!("unknown generator {name:?}")))?;
            let label = if exp < 0 { label.inv() } else { label };
            let spec = self.factor(label.factor);
            let x = match spec.kind() {
                crate::factors::FactorKind::IntegerLine => {
                    FactorElement { factor: label.factor, payload: Payload::Int(exp) }
                }
                _ => spec.from_letters(&vec![label.letter; exp.unsigned_abs() as usize]),
            };
            w = self.multiply(&w, &self.from_factor(&x));
        }
        Ok(w)
    }

    pub fn parse_factor_element(&self, factor: FactorId, text: &str) -> Result<FactorElement, WordError> {
        let w = self.parse(text)?;
        match w.syllables.as_slice() {
            [] => Ok(self.factor(factor).identity()),
            [s] if s.factor == factor => Ok(s.clone()),
            _ => Err(WordError::Parse(format!("{text:?} is not an element of factor {factor}"))),
        }
    }

    pub fn format(&self, w: &Word) -> String {
        if w.is_identity() {
            return "e".into();
        }
        w.syllables.iter().map(|s| self.factor(s.factor).format_element(s)).collect::<Vec<_>>().join(" ")
    }
}

impl Geometry for FreeProduct {
    type Point = Word;

    fn base(&self) -> Word {
        Word::identity()
    }

    fn dist(&self, a: &Word, b: &Word) -> u64 {
        self.distance(a, b)
    }

    fn realizations(&self, x: &Word, cap: usize) -> Result<Vec<Vec<Word>>, RealizationCapExceeded> {
        FreeProduct::realizations(self, x, cap).map_err(|e| match e {
            WordError::Factor(FactorError::CapExceeded { count }) => RealizationCapExceeded { count },
            _ => RealizationCapExceeded { count: u64::MAX },
        })
    }
}

impl Geometry for FactorSpec {
    type Point = FactorElement;

    fn base(&self) -> FactorElement {
        self.identity()
    }

    fn dist(&self, a: &FactorElement, b: &FactorElement) -> u64 {
        self.distance(a, b).expect("points of one factor")
    }

    fn realizations(&self, x: &FactorElement, cap: usize) -> Result<Vec<Vec<FactorElement>>, RealizationCapExceeded> {
        self.geodesics(&self.identity(), x, cap).map_err(|e| match e {
            FactorError::CapExceeded { count } => RealizationCapExceeded { count },
            _ => RealizationCapExceeded { count: u64::MAX },
        })
    }
}
