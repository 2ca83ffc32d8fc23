//! Certified absence of short relations in a rotation alphabet.
//!
//! A reduced word w of length at most 2k evaluates within tol of the
//! identity exactly when two distinct reduced words u, z of length at most k
//! (with |u| + |z| <= 2k) evaluate within tol of each other: split w = u v
//! and take z = v^{-1}; bi-invariance of the quaternion metric gives
//! |u z^{-1} - 1| = |u - z|. The check below therefore enumerates only
//! half-length words and looks for near-collisions among their values,
//! which turns an O((2m-1)^L) scan into an O((2m-1)^{L/2}) one and keeps
//! length-8 certificates tractable for alphabets with dozens of rotations.
//!
//! Near-collisions are found exactly with a shifted-grid scheme: with cell
//! width 2.5 tol and all 16 half-cell offsets in R^4, any two points within
//! tol of each other share a cell under at least one offset, so hashing
//! cell coordinates and comparing only equal hashes misses nothing. Hash
//! collisions merely create candidate pairs that the exact distance test
//! then discards.

use super::{evaluate_word, BaseWord, Letter, UnitQuaternion, Vector4, BASE_POINT};

/// A reduced word of length <= max_len whose rotation lies within tol of
/// the identity, together with the half-word pair that produced it.
#[derive(Debug, Clone)]
pub struct RelationWitness {
    pub relation: BaseWord,
    pub left: BaseWord,
    pub right: BaseWord,
    pub distance: f64,
}

/// True when no nontrivial reduced word of length <= max_len over the
/// alphabet (generators and inverses) evaluates within `tol` quaternion
/// distance of the identity. A necessary condition for the alphabet to
/// generate a free group, not a proof of freeness.
pub fn no_short_relation_check(gens: &[UnitQuaternion], max_len: usize, tol: f64) -> bool {
    shortest_relation_witness(gens, max_len, tol).is_none()
}

/// Like [`no_short_relation_check`] but returns the offending relation, if
/// any, for diagnostics. Deterministic: the witness is the first hit in a
/// fixed enumeration order.
pub fn shortest_relation_witness(
    gens: &[UnitQuaternion],
    max_len: usize,
    tol: f64,
) -> Option<RelationWitness> {
    assert!(tol > 0.0 && tol < 2.0, "relation tolerance must be positive and below the sphere diameter");
    if gens.is_empty() || max_len == 0 {
        return None;
    }
    let enumeration = HalfWords::new(gens, max_len);
    assert!(
        enumeration.total <= 150_000_000,
        "alphabet of {} rotations needs {} half-words at length {}; relation check would not fit",
        gens.len(),
        enumeration.total,
        enumeration.half_len,
    );

    let cell = 2.5 * tol;
    let mut buf: Vec<(u64, u32)> = Vec::with_capacity(enumeration.total);
    let mut best: Option<RelationWitness> = None;
    for pass in 0..16u32 {
        buf.clear();
        enumeration.for_each(|rank, value| {
            buf.push((cell_hash(value, cell, pass), rank));
        });
        buf.sort_unstable();
        let mut run_start = 0;
        while run_start < buf.len() {
            let mut run_end = run_start + 1;
            while run_end < buf.len() && buf[run_end].0 == buf[run_start].0 {
                run_end += 1;
            }
            if run_end - run_start > 1 {
                check_run(&enumeration, &buf[run_start..run_end], max_len, tol, &mut best);
            }
            run_start = run_end;
        }
        if best.is_some() {
            // A witness from any pass settles the answer.
            return best;
        }
    }
    None
}

fn check_run(
    enumeration: &HalfWords,
    run: &[(u64, u32)],
    max_len: usize,
    tol: f64,
    best: &mut Option<RelationWitness>,
) {
    for i in 0..run.len() {
        for j in (i + 1)..run.len() {
            let (ra, rb) = (run[i].1, run[j].1);
            if ra == rb {
                continue;
            }
            let wa = enumeration.decode(ra);
            let wb = enumeration.decode(rb);
            if wa.len() + wb.len() > max_len {
                continue;
            }
            let va = evaluate_word(enumeration.gens, &wa).vector();
            let vb = evaluate_word(enumeration.gens, &wb).vector();
            let d = va.dist(vb);
            if d <= tol {
                let relation = wb.inverse().concat(&wa);
                debug_assert!(!relation.is_empty(), "distinct reduced half-words cannot cancel fully");
                let replace = match best {
                    Some(w) => relation.len() < w.relation.len(),
                    None => true,
                };
                if replace {
                    *best = Some(RelationWitness { relation, left: wa, right: wb, distance: d });
                }
            }
        }
    }
}

/// Enumeration of all reduced words of length <= ceil(max_len / 2),
/// assigning each a dense mixed-radix rank that can be decoded back to the
/// word. Letter codes are 2 * index + (1 if inverse); code c cancels code
/// c ^ 1.
struct HalfWords<'a> {
    gens: &'a [UnitQuaternion],
    half_len: usize,
    /// offsets[l] = number of reduced words of length < l.
    offsets: Vec<usize>,
    total: usize,
}

impl<'a> HalfWords<'a> {
    fn new(gens: &'a [UnitQuaternion], max_len: usize) -> Self {
        let half_len = max_len.div_ceil(2);
        let alphabet = 2 * gens.len();
        let mut offsets = vec![0usize; half_len + 2];
        let mut count = 1usize; // the empty word
        let mut level = 1usize;
        offsets[1] = 1;
        for l in 1..=half_len {
            level = if l == 1 { alphabet } else { level.saturating_mul(alphabet - 1) };
            count = count.saturating_add(level);
            offsets[l + 1] = count;
        }
        HalfWords { gens, half_len, offsets, total: count }
    }

    /// Visits every reduced word of length <= half_len with its rank and
    /// rotation value, in rank order.
    fn for_each(&self, mut visit: impl FnMut(u32, Vector4)) {
        visit(0, BASE_POINT);
        let alphabet = 2 * self.gens.len();
        let mut codes = vec![0usize; self.half_len];
        let mut values = vec![BASE_POINT; self.half_len + 1];
        self.descend(1, &mut codes, &mut values, alphabet, &mut visit);
    }

    fn descend(
        &self,
        depth: usize,
        codes: &mut [usize],
        values: &mut [Vector4],
        alphabet: usize,
        visit: &mut impl FnMut(u32, Vector4),
    ) {
        if depth > self.half_len {
            return;
        }
        let banned = if depth == 1 { usize::MAX } else { codes[depth - 2] ^ 1 };
        for code in 0..alphabet {
            if code == banned {
                continue;
            }
            codes[depth - 1] = code;
            let q = self.code_rotation(code);
            let value = q.act(values[depth - 1]);
            values[depth] = value;
            visit(self.rank(&codes[..depth]), value);
            self.descend(depth + 1, codes, values, alphabet, visit);
        }
    }

    fn code_rotation(&self, code: usize) -> UnitQuaternion {
        let q = self.gens[code >> 1];
        if code & 1 == 1 {
            q.inverse()
        } else {
            q
        }
    }

    fn rank(&self, codes: &[usize]) -> u32 {
        let alphabet = 2 * self.gens.len();
        let mut r = 0usize;
        for (i, &c) in codes.iter().enumerate() {
            if i == 0 {
                r = c;
            } else {
                let banned = codes[i - 1] ^ 1;
                let digit = if c > banned { c - 1 } else { c };
                r = r * (alphabet - 1) + digit;
            }
        }
        let rank = self.offsets[codes.len()] + r;
        debug_assert!(rank < self.total);
        rank as u32
    }

    fn decode(&self, rank: u32) -> BaseWord {
        let rank = rank as usize;
        if rank == 0 {
            return BaseWord::empty();
        }
        let alphabet = 2 * self.gens.len();
        let len = (1..=self.half_len)
            .find(|&l| rank < self.offsets[l + 1])
            .expect("rank beyond enumeration");
        let mut r = rank - self.offsets[len];
        let mut digits = vec![0usize; len];
        for i in (1..len).rev() {
            digits[i] = r % (alphabet - 1);
            r /= alphabet - 1;
        }
        digits[0] = r;
        let mut codes = vec![0usize; len];
        codes[0] = digits[0];
        for i in 1..len {
            let banned = codes[i - 1] ^ 1;
            codes[i] = if digits[i] >= banned { digits[i] + 1 } else { digits[i] };
        }
        BaseWord::from_letters(codes.iter().map(|&c| Letter::new(c >> 1, c & 1 == 1)))
    }
}

/// Hash of the grid cell containing `v` under the given half-cell offset
/// pattern (one bit per coordinate). Equal cells always hash equally, so
/// the scheme can only over-report candidate pairs.
fn cell_hash(v: Vector4, cell: f64, pass: u32) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for (dim, c) in v.as_array().into_iter().enumerate() {
        let offset = if pass >> dim & 1 == 1 { 0.5 } else { 0.0 };
        // Coordinates lie in [-1, 1]; shift keeps the argument positive.
        let idx = ((c + 2.0) / cell + offset).floor() as i64 as u64;
        h ^= idx.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = h.wrapping_mul(0x100_0000_01b3);
        h ^= h >> 29;
    }
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^ (h >> 32)
}
