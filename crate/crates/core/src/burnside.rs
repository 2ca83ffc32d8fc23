//! The first Grigorchuk group, realized as automorphisms of the rooted
//! binary tree: finitely generated, infinite, and torsion - every element
//! has finite order (a power of two).  Its weighted left-regular
//! representation gives a locally constant Banach cocycle whose top
//! exponent is ln 2, attained along a geodesic ray, while every measure on
//! a periodic orbit sees exponent zero.
//!
//! Letters: `a` swaps the two subtrees; `b = (a, c)`, `c = (a, d)`,
//! `d = (e, b)` act without a root swap.  Words are kept reduced under
//! x^2 = e and the Klein relations bc = cb = d, bd = db = c, cd = dc = b,
//! so a reduced word alternates `a` with letters from {b, c, d}.  The word
//! problem is decided through the contracting wreath recursion: sections of
//! a word of length L have length at most (L + 1)/2, so recursion bottoms
//! out in the nucleus {e, a, b, c, d}.  Collapsing nucleus sections back to
//! leaves yields a canonical portrait, which doubles as a cheap equality
//! key; the recursive triviality test stays available as an independent
//! oracle.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

const A: u8 = 0;
const B: u8 = 1;
const C: u8 = 2;
const D: u8 = 3;

/// Wreath recursion of each letter: (left section, right section, root swap).
/// Sections of letters are letters or empty, which is what makes the
/// recursion contracting.
const LETTER_SECTIONS: [(&[u8], &[u8], bool); 4] = [
    (&[], &[], true),      // a = (e, e) swap
    (&[A], &[C], false),   // b = (a, c)
    (&[A], &[D], false),   // c = (a, d)
    (&[], &[B], false),    // d = (e, b)
];

#[derive(Debug, Error)]
#[error("invalid letter {0:?}; expected a/b/c/d or the single word \"e\"")]
pub struct ParseLetter(char);

/// A reduced word over {a, b, c, d}.  Derived equality is *word* equality;
/// equality in the group is `same_class` (or portrait equality).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct GrigorchukElement {
    letters: Vec<u8>,
}

impl GrigorchukElement {
    pub fn identity() -> Self {
        GrigorchukElement::default()
    }

    /// Parse "e" or a word like "abad"; the result is reduced.
    pub fn parse(word: &str) -> Result<Self, ParseLetter> {
        if word == "e" {
            return Ok(Self::identity());
        }
        let mut g = Self::identity();
        for ch in word.chars() {
            let l = match ch {
                'a' => A,
                'b' => B,
                'c' => C,
                'd' => D,
                other => return Err(ParseLetter(other)),
            };
            g.push(l);
        }
        Ok(g)
    }

    fn from_reduced(letters: Vec<u8>) -> Self {
        GrigorchukElement { letters }
    }

    /// Append one letter, keeping the word reduced.  x^2 = e cancels; a
    /// distinct pair from {b, c, d} collapses to the third, which is the
    /// xor of the two codes.  The collapse cannot cascade because reduced
    /// words alternate `a` with {b, c, d}.
    fn push(&mut self, letter: u8) {
        match self.letters.last() {
            Some(&top) if top == letter => {
                self.letters.pop();
            }
            Some(&top) if top != A && letter != A => {
                self.letters.pop();
                self.letters.push(top ^ letter);
            }
            _ => self.letters.push(letter),
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Group product; with the composition convention used throughout,
    /// `g.mul(&h)` applies h first.
    pub fn mul(&self, rhs: &GrigorchukElement) -> GrigorchukElement {
        let mut out = self.clone();
        for &l in &rhs.letters {
            out.push(l);
        }
        out
    }

    /// All four generators are involutions, so inversion reverses the word.
    pub fn inverse(&self) -> GrigorchukElement {
        GrigorchukElement::from_reduced(self.letters.iter().rev().copied().collect())
    }

    /// First-level sections and root activity: the element acts on a tree
    /// address (i, rest) as (swap(i), section_i(rest)).
    pub fn sections(&self) -> (GrigorchukElement, GrigorchukElement, bool) {
        let mut left = GrigorchukElement::identity();
        let mut right = GrigorchukElement::identity();
        let mut swap = false;
        // Fold letters right to left (apply order), prepending each:
        // (l * acc)|_i = l|_{swap_acc(i)} * acc|_i.
        for &l in self.letters.iter().rev() {
            let (s0, s1, sw) = LETTER_SECTIONS[l as usize];
            let (lo, hi) = if swap { (s1, s0) } else { (s0, s1) };
            left = prepend(lo, &left);
            right = prepend(hi, &right);
            swap ^= sw;
        }
        (left, right, swap)
    }

    /// True iff the element acts trivially on the tree.  Recursive on
    /// sections; terminates because sections of a word of length >= 2 are
    /// strictly shorter, and single letters all act nontrivially.
    pub fn is_trivial(&self) -> bool {
        if self.letters.is_empty() {
            return true;
        }
        if self.letters.len() == 1 {
            return false;
        }
        let (left, right, swap) = self.sections();
        !swap && left.is_trivial() && right.is_trivial()
    }

    /// Canonical portrait: expand sections until they lie in the nucleus,
    /// then collapse any interior node whose children match a nucleus
    /// recursion back to a leaf.  Two words represent the same group
    /// element iff their portraits are equal.
    pub fn portrait(&self) -> Portrait {
        if self.letters.len() <= 1 {
            return Portrait::Leaf(self.letters.first().map_or(0, |&l| l + 1));
        }
        let (left, right, swap) = self.sections();
        collapse(swap, left.portrait(), right.portrait())
    }

    pub fn same_class(&self, other: &GrigorchukElement) -> bool {
        self.portrait() == other.portrait()
    }

    /// Permutation induced on the 2^depth leaves, msb = first tree level.
    /// Brute-force oracle for cross-validating the algebra.
    pub fn act_on_leaves(&self, depth: u32) -> Vec<u32> {
        let p = self.portrait();
        (0..1u32 << depth).map(|leaf| act_leaf(&p, leaf, depth)).collect()
    }
}

fn prepend(letters: &[u8], tail: &GrigorchukElement) -> GrigorchukElement {
    let mut out = GrigorchukElement {
        letters: Vec::with_capacity(letters.len() + tail.letters.len()),
    };
    for &l in letters.iter().chain(&tail.letters) {
        out.push(l);
    }
    out
}

impl fmt::Display for GrigorchukElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for &l in &self.letters {
            f.write_str(match l {
                A => "a",
                B => "b",
                C => "c",
                _ => "d",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for GrigorchukElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Minimal portrait with nucleus leaves (0 = e, 1..=4 = a, b, c, d).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Portrait {
    Leaf(u8),
    Node {
        swap: bool,
        left: Box<Portrait>,
        right: Box<Portrait>,
    },
}

fn collapse(swap: bool, left: Portrait, right: Portrait) -> Portrait {
    use Portrait::Leaf;
    match (swap, &left, &right) {
        (false, Leaf(0), Leaf(0)) => Leaf(0),
        (true, Leaf(0), Leaf(0)) => Leaf(1),
        (false, Leaf(1), Leaf(3)) => Leaf(2),
        (false, Leaf(1), Leaf(4)) => Leaf(3),
        (false, Leaf(0), Leaf(2)) => Leaf(4),
        _ => Portrait::Node {
            swap,
            left: Box::new(left),
            right: Box::new(right),
        },
    }
}

fn act_leaf(p: &Portrait, leaf: u32, depth: u32) -> u32 {
    if depth == 0 {
        return leaf;
    }
    let top = (leaf >> (depth - 1)) & 1;
    let rest = leaf & ((1 << (depth - 1)) - 1);
    let (swap, child) = match p {
        Portrait::Leaf(0) => return leaf,
        Portrait::Leaf(l) => {
            let (s0, s1, sw) = LETTER_SECTIONS[(l - 1) as usize];
            let side = if top == 0 { s0 } else { s1 };
            let child = side.first().map_or(Portrait::Leaf(0), |&x| Portrait::Leaf(x + 1));
            return ((top ^ sw as u32) << (depth - 1)) | act_leaf(&child, rest, depth - 1);
        }
        Portrait::Node { swap, left, right } => {
            (*swap, if top == 0 { left.as_ref() } else { right.as_ref() })
        }
    };
    ((top ^ swap as u32) << (depth - 1)) | act_leaf(child, rest, depth - 1)
}

#[derive(Debug, Error)]
#[error("order exceeds the cap {cap}")]
pub struct OrderCap {
    pub cap: u64,
}

/// Smallest k with g^k = e, by repeated squaring: orders in this group are
/// powers of two, so the first trivial square power is the order.
pub fn element_order(g: &GrigorchukElement, cap: u64) -> Result<u64, OrderCap> {
    let mut h = g.clone();
    let mut k = 1u64;
    while !h.is_trivial() {
        k *= 2;
        if k > cap {
            return Err(OrderCap { cap });
        }
        h = h.mul(&h);
    }
    Ok(k)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("class not found within the radius-{radius} ball")]
pub struct RadiusExceeded {
    pub radius: usize,
}

/// Geodesic balls of the Cayley graph over S = {a, b, c, d}, built by
/// breadth-first search with portrait interning.  Each class stores the
/// first geodesic spelling discovered; expanding spheres in id order with
/// letters in a < b < c < d order makes that spelling the lexicographically
/// least geodesic, and every prefix of it is an earlier representative.
pub struct BallTable {
    reps: Vec<GrigorchukElement>,
    level: Vec<usize>,
    sphere_start: Vec<usize>,
    index: HashMap<Portrait, usize>,
}

impl BallTable {
    pub fn build(radius: usize) -> BallTable {
        let e = GrigorchukElement::identity();
        let mut index = HashMap::new();
        index.insert(e.portrait(), 0);
        let mut table = BallTable {
            reps: vec![e],
            level: vec![0],
            sphere_start: vec![0, 1],
            index,
        };
        table.grow_to(radius);
        table
    }

    pub fn grow_to(&mut self, radius: usize) {
        while self.radius() < radius {
            let r = self.radius();
            let (lo, hi) = (self.sphere_start[r], self.sphere_start[r + 1]);
            for i in lo..hi {
                for letter in [A, B, C, D] {
                    let mut w = self.reps[i].clone();
                    w.push(letter);
                    let p = w.portrait();
                    if !self.index.contains_key(&p) {
                        self.index.insert(p, self.reps.len());
                        self.reps.push(w);
                        self.level.push(r + 1);
                    }
                }
            }
            assert!(
                self.reps.len() > *self.sphere_start.last().unwrap(),
                "empty sphere at radius {}: the group is infinite",
                r + 1
            );
            self.sphere_start.push(self.reps.len());
        }
    }

    pub fn radius(&self) -> usize {
        self.sphere_start.len() - 2
    }

    pub fn class_count(&self) -> usize {
        self.reps.len()
    }

    pub fn representative(&self, id: usize) -> &GrigorchukElement {
        &self.reps[id]
    }

    pub fn id_of(&self, g: &GrigorchukElement) -> Option<usize> {
        self.index.get(&g.portrait()).copied()
    }

    /// Geodesic distance from the identity.
    pub fn word_length(&self, g: &GrigorchukElement) -> Result<usize, RadiusExceeded> {
        self.id_of(g)
            .map(|id| self.level[id])
            .ok_or(RadiusExceeded { radius: self.radius() })
    }

    /// Ids of every class with |g|_S <= radius.
    pub fn ball_ids(&self, radius: usize) -> std::ops::Range<usize> {
        assert!(radius <= self.radius());
        0..self.sphere_start[radius + 1]
    }

    /// Number of classes at each distance 0..=radius.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.sphere_start.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Cumulative ball sizes |B(0)|, |B(1)|, ...
    pub fn ball_sizes(&self) -> Vec<usize> {
        self.sphere_start[1..].to_vec()
    }

    /// The lexicographically least geodesic word of length exactly r.
    pub fn lex_min_at(&self, r: usize) -> &GrigorchukElement {
        &self.reps[self.sphere_start[r]]
    }
}

/// The operator norm of the weighted left-regular image of g is exactly
/// 2^{|g|_S}; reported in log2 units.
pub fn operator_norm_log2(
    g: &GrigorchukElement,
    table: &BallTable,
) -> Result<f64, RadiusExceeded> {
    table.word_length(g).map(|l| l as f64)
}

/// Finite-truncation spot check of the norm formula: restrict the action to
/// the span of the radius-`inner` ball and take the largest column bound
/// max_h 2^{|gh| - |h|}.  The triangle inequality caps the exponent by
/// |g|_S, and h = e attains it, so the result must equal |g|_S exactly.
/// The table must cover radius |g|_S + inner.
pub fn truncated_column_bound_log2(
    g: &GrigorchukElement,
    table: &BallTable,
    inner: usize,
) -> Result<f64, RadiusExceeded> {
    let mut best = i64::MIN;
    for id in table.ball_ids(inner) {
        let h = table.representative(id);
        let len = table.word_length(&g.mul(h))? as i64;
        best = best.max(len - table.level[id] as i64);
    }
    Ok(best as f64)
}

/// Certified bound on the exponent of a measure sitting on the periodic
/// orbit of g: the cocycle norm of g^n is 2^{|g^n|_S}, and g^n cycles
/// through order(g) classes, so (1/n) |g^n|_S ln 2 -> 0.  Returns the max
/// over n in [n_max/2, n_max], growing the table as the cycle requires.
pub fn periodic_banach_exponent(
    g: &GrigorchukElement,
    n_max: usize,
    table: &mut BallTable,
) -> Result<f64, OrderCap> {
    assert!(n_max >= 2);
    let order = element_order(g, 1 << 20)? as usize;
    let mut lengths = Vec::with_capacity(order);
    let mut h = GrigorchukElement::identity();
    for _ in 0..order {
        let len = loop {
            match table.word_length(&h) {
                Ok(len) => break len,
                Err(_) => table.grow_to(table.radius() + 1),
            }
        };
        lengths.push(len);
        h = h.mul(g);
    }
    let mut bound = 0.0f64;
    for n in (n_max / 2).max(1)..=n_max {
        bound = bound.max(lengths[n % order] as f64 * std::f64::consts::LN_2 / n as f64);
    }
    Ok(bound)
}

/// A geodesic ray: a word of length n every prefix of which is geodesic.
/// Along it the cocycle norm at step k is exactly 2^k, so the exponent is
/// exactly ln 2 - the top exponent, since no product of k generator images
/// can exceed norm 2^k.
pub struct RayCertificate {
    pub witness: GrigorchukElement,
    pub exponent: f64,
}

pub fn geodesic_ray_exponent(
    table: &BallTable,
    n: usize,
) -> Result<RayCertificate, RadiusExceeded> {
    if table.radius() < n {
        return Err(RadiusExceeded { radius: table.radius() });
    }
    let witness = table.lex_min_at(n).clone();
    for k in 0..=n {
        let prefix = GrigorchukElement::from_reduced(witness.letters[..k].to_vec());
        assert_eq!(table.word_length(&prefix), Ok(k), "prefix {prefix} is not geodesic");
    }
    Ok(RayCertificate {
        witness,
        exponent: std::f64::consts::LN_2,
    })
}
