//! Unit-quaternion rotations of S^3 and reduced words over a rotation
//! alphabet.
//!
//! Points of the base sphere live in R^4 with coordinates (x, y, z, u); the
//! scalar part of the corresponding quaternion is x, so the identity rotation
//! fixes the base point (1, 0, 0, 0). A unit quaternion q acts on R^4 by left
//! Hamilton multiplication v -> q * v, which is a linear isometry whose
//! complex eigenvalues are e^{+/- i theta} with theta = arccos(x_q). Because
//! left multiplication restricts to rotations on two orthogonal invariant
//! planes with the same angle, the geometric series sum_{k<n} q^k(v) obeys
//! the uniform bound ||sum|| <= 2 / |q - 1| for every n, which is the
//! quantitative heart of the boundedness certificates in this crate.

mod relations;

pub use relations::{no_short_relation_check, shortest_relation_witness, RelationWitness};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::{Add, Neg, Sub};

/// Below this quaternion distance from the identity the geometric-series
/// closed form (division by |1 - q|^2) is numerically meaningless.
pub const IDENTITY_EPS: f64 = 1e-12;

/// A point of R^4. The scalar (real) part of the associated quaternion is
/// `x`; `(y, z, u)` span the imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

pub const ZERO4: Vector4 = Vector4 { x: 0.0, y: 0.0, z: 0.0, u: 0.0 };

/// Base point fixed by every rotation alphabet we build: the quaternion 1.
pub const BASE_POINT: Vector4 = Vector4 { x: 1.0, y: 0.0, z: 0.0, u: 0.0 };

impl Vector4 {
    pub const fn new(x: f64, y: f64, z: f64, u: f64) -> Self {
        Vector4 { x, y, z, u }
    }

    pub fn dot(self, o: Vector4) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z + self.u * o.u
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vector4) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, c: f64) -> Vector4 {
        Vector4::new(c * self.x, c * self.y, c * self.z, c * self.u)
    }

    /// Hamilton product with `x` as the scalar part. Not restricted to unit
    /// length; used both for rotations and for the geometric-series closed
    /// form, which divides by non-unit quaternions.
    pub fn quat_mul(self, o: Vector4) -> Vector4 {
        Vector4::new(
            self.x * o.x - self.y * o.y - self.z * o.z - self.u * o.u,
            self.x * o.y + self.y * o.x + self.z * o.u - self.u * o.z,
            self.x * o.z - self.y * o.u + self.z * o.x + self.u * o.y,
            self.x * o.u + self.y * o.z - self.z * o.y + self.u * o.x,
        )
    }

    /// Quaternion conjugate (negated imaginary part).
    pub fn conj(self) -> Vector4 {
        Vector4::new(self.x, -self.y, -self.z, -self.u)
    }

    /// Quaternion inverse; `None` when the norm is too small to divide by.
    pub fn quat_inv(self) -> Option<Vector4> {
        let n2 = self.norm_sq();
        if n2 < 1e-300 {
            return None;
        }
        Some(self.conj().scale(1.0 / n2))
    }

    pub fn normalized(self) -> Option<Vector4> {
        let n = self.norm();
        if n < 1e-300 {
            return None;
        }
        Some(self.scale(1.0 / n))
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.u]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Vector4::new(a[0], a[1], a[2], a[3])
    }
}

impl Add for Vector4 {
    type Output = Vector4;
    fn add(self, o: Vector4) -> Vector4 {
        Vector4::new(self.x + o.x, self.y + o.y, self.z + o.z, self.u + o.u)
    }
}

impl Sub for Vector4 {
    type Output = Vector4;
    fn sub(self, o: Vector4) -> Vector4 {
        Vector4::new(self.x - o.x, self.y - o.y, self.z - o.z, self.u - o.u)
    }
}

impl Neg for Vector4 {
    type Output = Vector4;
    fn neg(self) -> Vector4 {
        Vector4::new(-self.x, -self.y, -self.z, -self.u)
    }
}

impl Serialize for Vector4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector4 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vector4::from_array(<[f64; 4]>::deserialize(d)?))
    }
}

/// A rotation of S^3: a quaternion of unit norm acting by left
/// multiplication. Construction renormalizes, and `compose` renormalizes
/// after every Hamilton product so long products cannot drift off the
/// sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Vector4);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(BASE_POINT);

    /// Normalizes the given components. Panics on a (near-)zero vector,
    /// which no caller can produce from valid inputs.
    pub fn new(x: f64, y: f64, z: f64, u: f64) -> Self {
        Self::from_vector(Vector4::new(x, y, z, u))
    }

    pub fn from_vector(v: Vector4) -> Self {
        UnitQuaternion(v.normalized().expect("cannot normalize zero quaternion"))
    }

    /// Quaternion with polar angle `theta` about the imaginary unit `axis`:
    /// cos(theta) + sin(theta) * axis. Its eigen-angle is |theta| and its
    /// displacement |q - 1| equals 2 sin(|theta| / 2).
    pub fn from_polar(theta: f64, axis: [f64; 3]) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        assert!(n > 1e-300, "rotation axis must be nonzero");
        let s = theta.sin() / n;
        UnitQuaternion::new(theta.cos(), s * axis[0], s * axis[1], s * axis[2])
    }

    pub fn vector(self) -> Vector4 {
        self.0
    }

    /// Group operation: `self` after `other` (Hamilton product, renormalized).
    pub fn compose(self, other: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion::from_vector(self.0.quat_mul(other.0))
    }

    /// Inverse rotation; for unit quaternions this is the conjugate.
    pub fn inverse(self) -> UnitQuaternion {
        UnitQuaternion(self.0.conj())
    }

    /// Action on R^4 by left multiplication. Linear, and an isometry:
    /// ||q * v|| = ||v||. No renormalization is applied to `v`.
    pub fn act(self, v: Vector4) -> Vector4 {
        self.0.quat_mul(v)
    }

    /// Rotation angle theta in [0, pi] of the two invariant planes of the
    /// left-multiplication action: theta = arccos(clamp(x, -1, 1)). The
    /// complex eigenvalues of the action are e^{+/- i theta}.
    pub fn eigen_angle(self) -> f64 {
        self.0.x.clamp(-1.0, 1.0).acos()
    }

    /// Quaternion distance to the identity, |q - 1| = 2 sin(eigen_angle / 2).
    /// This is also the displacement ||q(v) - v|| of every point v of S^3.
    pub fn displacement(self) -> f64 {
        (self.0 - BASE_POINT).norm()
    }

    /// n-th power by repeated composition (renormalizing at every step).
    pub fn power(self, n: usize) -> UnitQuaternion {
        let mut acc = UnitQuaternion::IDENTITY;
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(base);
            }
            base = base.compose(base);
            k >>= 1;
        }
        acc
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vector4::deserialize(d)?;
        Ok(UnitQuaternion::from_vector(v))
    }
}

/// One letter of a word: a generator index plus an orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub index: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(index: usize, inverse: bool) -> Self {
        Letter { index, inverse }
    }

    /// 0-based generator index.
    pub fn index(self) -> usize {
        self.index
    }

    pub fn is_inverse(self) -> bool {
        self.inverse
    }

    pub fn inverted(self) -> Letter {
        Letter { index: self.index, inverse: !self.inverse }
    }

    fn cancels(self, o: Letter) -> bool {
        self.index == o.index && self.inverse != o.inverse
    }

    /// Signed 1-based integer encoding used in JSON and file names: letter
    /// (i, +) maps to i + 1 and (i, -) to -(i + 1).
    pub fn signed(self) -> i64 {
        let v = self.index as i64 + 1;
        if self.inverse {
            -v
        } else {
            v
        }
    }

    pub fn from_signed(s: i64) -> Option<Letter> {
        if s == 0 {
            return None;
        }
        Some(Letter { index: (s.unsigned_abs() as usize) - 1, inverse: s < 0 })
    }
}

/// A reduced word over a generator alphabet, stored in application order:
/// `letters[0]` acts first. Adjacent letters are never mutual inverses;
/// `push` cancels on the fly and `reduce` restores the invariant for bulk
/// edits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BaseWord {
    letters: Vec<Letter>,
}

impl BaseWord {
    pub fn empty() -> Self {
        BaseWord { letters: Vec::new() }
    }

    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut w = BaseWord::empty();
        for l in letters {
            w.push(l);
        }
        w
    }

    /// Positive word from 0-based generator indices, in application order.
    pub fn positive(indices: impl IntoIterator<Item = usize>) -> Self {
        Self::from_letters(indices.into_iter().map(|i| Letter::new(i, false)))
    }

    pub fn push(&mut self, l: Letter) {
        match self.letters.last() {
            Some(last) if last.cancels(l) => {
                self.letters.pop();
            }
            _ => self.letters.push(l),
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn is_positive(&self) -> bool {
        self.letters.iter().all(|l| !l.inverse)
    }

    /// Formal inverse: letters reversed and individually inverted.
    pub fn inverse(&self) -> BaseWord {
        BaseWord::from_letters(self.letters.iter().rev().map(|l| l.inverted()))
    }

    pub fn concat(&self, o: &BaseWord) -> BaseWord {
        let mut w = self.clone();
        for &l in o.letters() {
            w.push(l);
        }
        w
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(letters: impl IntoIterator<Item = Letter>) -> BaseWord {
        Self::from_letters(letters)
    }

    pub fn signed(&self) -> Vec<i64> {
        self.letters.iter().map(|l| l.signed()).collect()
    }

    /// File-name-safe token, e.g. `[2, -1]` becomes "2_-1"; the empty word
    /// becomes "e".
    pub fn token(&self) -> String {
        if self.is_empty() {
            return "e".to_string();
        }
        self.signed().iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
    }
}

impl Serialize for BaseWord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.signed().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BaseWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let signed = Vec::<i64>::deserialize(d)?;
        let letters: Option<Vec<Letter>> = signed.iter().map(|&s| Letter::from_signed(s)).collect();
        let letters = letters.ok_or_else(|| serde::de::Error::custom("word letters are nonzero signed indices"))?;
        Ok(BaseWord::from_letters(letters))
    }
}

/// Resolves one letter against the alphabet.
pub fn letter_rotation(gens: &[UnitQuaternion], l: Letter) -> UnitQuaternion {
    let q = gens[l.index];
    if l.inverse {
        q.inverse()
    } else {
        q
    }
}

/// Evaluates a word to its rotation. Letters act in storage order, so the
/// result is q_{i_l} * ... * q_{i_1} for letters [i_1, ..., i_l].
pub fn evaluate_word(gens: &[UnitQuaternion], word: &BaseWord) -> UnitQuaternion {
    let mut acc = UnitQuaternion::IDENTITY;
    for &l in word.letters() {
        acc = letter_rotation(gens, l).compose(acc);
    }
    acc
}

/// Partial geometric sum sum_{k=0}^{n-1} q^k(v), computed by iteration.
pub fn partial_sum(q: UnitQuaternion, v: Vector4, n: usize) -> Vector4 {
    let mut acc = ZERO4;
    let mut cur = v;
    for k in 0..n {
        if k > 0 {
            cur = q.act(cur);
        }
        acc = acc + cur;
    }
    acc
}

/// Closed form (1 - q^n)(1 - q)^{-1} v of the partial geometric sum. Fails
/// when q is (numerically) the identity; callers then use n * v.
pub fn partial_sum_closed(q: UnitQuaternion, v: Vector4, n: usize) -> Result<Vector4, IdentityBase> {
    if q.displacement() < IDENTITY_EPS {
        return Err(IdentityBase);
    }
    if n == 0 {
        return Ok(ZERO4);
    }
    let one_minus_q = BASE_POINT - q.vector();
    let one_minus_qn = BASE_POINT - q.power(n).vector();
    let inv = one_minus_q.quat_inv().expect("|1 - q| bounded away from zero");
    Ok(one_minus_qn.quat_mul(inv).quat_mul(v))
}

/// The base rotation is too close to the identity for the geometric-series
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("base rotation is numerically the identity; use n * v for the partial sum")]
pub struct IdentityBase;

/// Uniform bound 2 / |q - 1| on ||sum_{k=0}^{n-1} q^k(v)|| over all n and
/// unit v. Infinite when q is the identity (the sums then grow linearly).
pub fn partial_sum_bound(q: UnitQuaternion) -> f64 {
    let d = q.displacement();
    if d == 0.0 {
        f64::INFINITY
    } else {
        2.0 / d
    }
}

/// Worst deviations of a seeded sweep over random rotations and start
/// vectors: how far any iterated partial sum overshoots the uniform bound
/// (negative when every sum stays inside) and how far the closed form
/// strays from iteration.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SeriesAudit {
    pub pairs: usize,
    pub n_max: usize,
    pub max_bound_overshoot: f64,
    pub max_closed_form_defect: f64,
}

/// Check the geometric-series machinery on `pairs` seeded random (q, v):
/// every partial sum up to n_max against 2/|q - 1|, and the closed form
/// against iteration at every length. Rotations are resampled until the
/// eigen angle clears `min_angle`, keeping the bound meaningful.
pub fn series_audit(seed: u64, pairs: usize, n_max: usize, min_angle: f64) -> SeriesAudit {
    let mut rng = crate::sampling::stream_rng(seed, crate::sampling::stream::SERIES_PAIRS);
    let mut max_overshoot = f64::NEG_INFINITY;
    let mut max_defect = 0.0f64;
    for _ in 0..pairs {
        let q = loop {
            let q = crate::sampling::random_unit_quaternion(&mut rng);
            if q.eigen_angle() >= min_angle {
                break q;
            }
        };
        let v = crate::sampling::random_unit_vector4(&mut rng);
        let bound = partial_sum_bound(q);
        let mut acc = ZERO4;
        let mut cur = v;
        for n in 1..=n_max {
            acc = acc + cur;
            cur = q.act(cur);
            max_overshoot = max_overshoot.max(acc.norm() - bound);
            let closed = partial_sum_closed(q, v, n).expect("eigen angle bounded below");
            max_defect = max_defect.max(closed.dist(acc));
        }
    }
    SeriesAudit {
        pairs,
        n_max,
        max_bound_overshoot: max_overshoot,
        max_closed_form_defect: max_defect,
    }
}
