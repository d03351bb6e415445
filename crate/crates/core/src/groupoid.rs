//! Pair groupoids `X × X`, their global bisections (permutations of `X`) and
//! cyclic flows.
//!
//! Points are stored 0-based; everything user-facing (display, JSON, CLI) is
//! 1-based, so the arrow `Arrow { range: 0, source: 1 }` prints as `(1,2)`.
//!
//! A bisection `g` is the set of arrows `{(x, g(x))}`. The groupoid product of
//! bisections is `g·h = {(x, g(x))·(g(x), h(g(x)))}`, i.e. the permutation
//! `x ↦ h(g(x))`. This is the order in which block-permutation matrices
//! multiply: `U_g U_h = U_{g·h}`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `n` for enumerating all of `Bis(G) ≅ Sₙ`.
pub const ENUMERATION_CAP: usize = 8;

/// Arrow `(r, d)` of a pair groupoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arrow {
    pub range: usize,
    pub source: usize,
}

impl Arrow {
    pub const fn new(range: usize, source: usize) -> Self {
        Self { range, source }
    }

    pub const fn unit(x: usize) -> Self {
        Self::new(x, x)
    }

    pub const fn inverse(self) -> Self {
        Self::new(self.source, self.range)
    }

    pub const fn is_unit(self) -> bool {
        self.range == self.source
    }

    /// Parses the 1-based form `"(x,y)"`.
    pub fn parse(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("arrow `{s}` is not of the form (x,y)")))?;
        let mut parts = inner.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("arrow `{s}` needs exactly two points")));
        };
        let point = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse(format!("`{t}` is not a 1-based point label"))),
            }
        };
        Ok(Self::new(point(a)?, point(b)?))
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.range + 1, self.source + 1)
    }
}

/// `(x,y)·(y,z) = (x,z)`; defined only when the middle points agree.
pub fn compose(g: Arrow, h: Arrow) -> Result<Arrow> {
    if g.source != h.range {
        return Err(Error::NotComposable { left: g, right: h });
    }
    Ok(Arrow::new(g.range, h.source))
}

/// The pair groupoid over `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGroupoid {
    points: usize,
}

impl PairGroupoid {
    pub fn new(points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidDescriptor("a groupoid needs at least one point".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn arrows(&self) -> impl Iterator<Item = Arrow> + '_ {
        let n = self.points;
        (0..n).flat_map(move |x| (0..n).map(move |y| Arrow::new(x, y)))
    }

    pub fn units(&self) -> impl Iterator<Item = Arrow> {
        (0..self.points).map(Arrow::unit)
    }

    pub fn composable_pairs(&self) -> impl Iterator<Item = (Arrow, Arrow)> + '_ {
        let n = self.points;
        self.arrows().flat_map(move |g| (0..n).map(move |z| (g, Arrow::new(g.source, z))))
    }

    pub fn composable_triples(&self) -> impl Iterator<Item = (Arrow, Arrow, Arrow)> + '_ {
        let n = self.points;
        self.composable_pairs().flat_map(move |(g, h)| (0..n).map(move |w| (g, h, Arrow::new(h.source, w))))
    }

    pub fn contains(&self, g: Arrow) -> bool {
        g.range < self.points && g.source < self.points
    }

    /// Every bisection, i.e. all of `Sₙ`, for `n` up to `cap`.
    pub fn bisections(&self, cap: usize) -> Result<Vec<Bisection>> {
        if self.points > cap {
            return Err(Error::EnumerationCap { n: self.points, cap });
        }
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..self.points).collect();
        heap_permutations(&mut perm, self.points, &mut out);
        out.sort();
        Ok(out.into_iter().map(|perm| Bisection { perm }).collect())
    }

    /// The involutive bisections `g = g*`, sorted by their one-line form.
    pub fn self_adjoint_bisections(&self, cap: usize) -> Result<Vec<Bisection>> {
        Ok(self.bisections(cap)?.into_iter().filter(Bisection::is_self_adjoint).collect())
    }
}

fn heap_permutations(perm: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(perm.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(perm, k - 1, out);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        perm.swap(j, k - 1);
    }
}

/// A global bisection of a pair groupoid: a permutation of the points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bisection {
    perm: Vec<usize>,
}

impl Bisection {
    /// From a 0-based image array.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        if n == 0 {
            return Err(Error::InvalidDescriptor("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidDescriptor(format!("{perm:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self { perm })
    }

    /// From the 1-based one-line form, e.g. `[2,3,4,1]`.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidDescriptor(format!("one-line form {images:?} must be 1-based")));
        }
        Self::new(images.iter().map(|&p| p - 1).collect())
    }

    pub fn one_line(&self) -> Vec<usize> {
        self.perm.iter().map(|p| p + 1).collect()
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect() }
    }

    /// The cycle `x ↦ x + 1 mod n`.
    pub fn shift(n: usize) -> Self {
        Self { perm: (0..n).map(|x| (x + 1) % n).collect() }
    }

    pub fn points(&self) -> usize {
        self.perm.len()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.perm[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.perm
    }

    /// Bisection product `self · other`: first `self`, then `other`.
    pub fn then(&self, other: &Self) -> Self {
        assert_eq!(self.points(), other.points(), "bisections over different bases");
        Self { perm: self.perm.iter().map(|&y| other.perm[y]).collect() }
    }

    /// `g*`, the inverse bisection.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (x, &y) in self.perm.iter().enumerate() {
            inv[y] = x;
        }
        Self { perm: inv }
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::identity(self.points()), |acc, _| acc.then(self))
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(x, &y)| x == y)
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.perm.iter().enumerate().all(|(x, &y)| self.perm[y] == x)
    }

    /// Cycle lengths in order of each cycle's smallest point.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        let mut seen = vec![false; self.perm.len()];
        let mut out = Vec::new();
        for start in 0..self.perm.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.perm[x];
                len += 1;
            }
            out.push(len);
        }
        out
    }

    pub fn order(&self) -> usize {
        self.cycle_lengths().into_iter().fold(1, lcm)
    }

    /// On a finite set a flow is minimal exactly when it is transitive: a
    /// single cycle through every point.
    pub fn is_minimal_flow(&self) -> bool {
        self.cycle_lengths() == [self.points()]
    }

    /// The arrows `(x, g(x))` making up the bisection.
    pub fn arrows(&self) -> impl Iterator<Item = Arrow> + '_ {
        self.perm.iter().enumerate().map(|(x, &y)| Arrow::new(x, y))
    }

    pub fn graph(&self) -> BTreeSet<Arrow> {
        self.arrows().collect()
    }
}

impl fmt::Display for Bisection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.one_line())
    }
}

impl Serialize for Bisection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_line().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bisection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let images = Vec::<usize>::deserialize(d)?;
        Self::from_one_line(&images).map_err(serde::de::Error::custom)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// The cyclic group generated by one bisection: `[g, g², …, g^ord = id]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicFlow {
    generator: Bisection,
    elements: Vec<Bisection>,
}

impl CyclicFlow {
    pub fn new(generator: Bisection) -> Self {
        let mut elements = vec![generator.clone()];
        while !elements.last().expect("non-empty").is_identity() {
            let next = elements.last().expect("non-empty").then(&generator);
            elements.push(next);
        }
        Self { generator, elements }
    }

    pub fn generator(&self) -> &Bisection {
        &self.generator
    }

    pub fn elements(&self) -> &[Bisection] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// `{(x, gᵐ(x)) : 1 ≤ m ≤ ord, x ∈ X}`.
    pub fn orbit_arrows(&self) -> BTreeSet<Arrow> {
        self.elements.iter().flat_map(Bisection::graph).collect()
    }

    /// Arrows of `X × X` that the flow never reaches.
    pub fn missing_arrows(&self) -> Vec<Arrow> {
        let reached = self.orbit_arrows();
        let g = PairGroupoid::new(self.generator.points()).expect("non-empty");
        g.arrows().filter(|a| !reached.contains(a)).collect()
    }
}

pub fn cyclic_flow(g: &Bisection) -> CyclicFlow {
    CyclicFlow::new(g.clone())
}

pub fn is_minimal_flow(g: &Bisection) -> bool {
    g.is_minimal_flow()
}
