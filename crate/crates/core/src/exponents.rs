//! Derivative growth statistics: per-word ellipticity and group-level
//! exponential growth.
//!
//! For a single word w the fiber translation of w^n is a fixed linear image
//! of the partial sum S_n of the word rotation's orbit, so its norm is
//! bounded by l * 2/|q_w - 1| uniformly in n - every element is elliptic,
//! and `periodic_exponent` certifies it empirically: the grid maximum of the
//! log2 fiber derivative stays bounded and its least-squares slope over the
//! back half of the sweep vanishes.  (The translation bound also caps the
//! derivative from below, so the one-sided maximum certifies both sides.)
//!
//! The group as a whole is anything but elliptic: along the recurrent
//! sequence w_n the translation's first coordinate is the recorded x-sum,
//! which grows like n, so the fiber derivative at the pinned point
//! (v0, p_0) is exactly 2^{x_sum(n)} >= 2^{n/2}. `growth_exponent` certifies
//! that rate and cross-checks the recorded sums against the independent
//! skew-product routes. `dichotomy_report` packages both sides.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circle_flows::CirclePoint;
use crate::recurrence::RecurrentSystem;
use crate::rotor::{BaseWord, Letter};
use crate::sampling::{low_discrepancy_sphere, stream, stream_rng};
use crate::skew::{ProductPoint, SkewSystem, WordIteration};
use rand::Rng;

/// Sampling grid and sweep length for the per-word statistics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrbitSpec {
    /// Powers n = 1..=n_max are swept.
    pub n_max: usize,
    pub base_samples: usize,
    pub circle_samples: usize,
    pub seed: u64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        OrbitSpec { n_max: 400, base_samples: 32, circle_samples: 32, seed: 42 }
    }
}

#[derive(Debug, Error)]
#[error("word rotation is within {eigen_angle} of the identity; the partial-sum bound degenerates")]
pub struct DegenerateWord {
    pub eigen_angle: f64,
}

/// Outcome of one word's power sweep.
#[derive(Debug, Clone, Serialize)]
pub struct WordReport {
    pub word: BaseWord,
    /// Rotation angle of the word rotation q_w.
    pub eigen_angle: f64,
    /// The a-priori bound l * 2/|q_w - 1| on every translation norm.
    pub translation_bound: f64,
    /// max over the grid of the log2 fiber derivative of w^n, n = 1..=n_max.
    pub max_log2_by_n: Vec<f64>,
    /// max over the grid of the translation norm of w^n, n = 1..=n_max.
    pub max_norm_by_n: Vec<f64>,
    /// Largest translation norm seen in the sweep.
    pub max_translation_norm: f64,
    /// Least-squares slope of the tail half of `max_log2_by_n`.
    pub slope: f64,
    /// |slope| within `slope_tol` of zero.
    pub elliptic: bool,
    /// Every translation norm stayed within the a-priori bound (+1e-6).
    pub bound_ok: bool,
}

/// Tolerance on the tail slope below which a sweep counts as elliptic
/// (bits per step).
pub const SLOPE_TOL: f64 = 1e-3;
/// Slack allowed on the translation-norm bound, absorbing roundoff of the
/// closed-form accumulation.
pub const BOUND_SLACK: f64 = 1e-6;

/// Sweep the powers of one word over a sample grid.
pub fn periodic_exponent(
    system: &SkewSystem,
    word: &BaseWord,
    spec: &OrbitSpec,
) -> Result<WordReport, DegenerateWord> {
    assert!(spec.n_max >= 8, "sweep too short for a tail fit");
    assert!(spec.base_samples > 0 && spec.circle_samples > 0);
    let probe = WordIteration::new(system, word, ProductPoint {
        base: crate::rotor::BASE_POINT,
        fiber: CirclePoint::new(0.0),
    });
    let eigen_angle = probe.word_rotation().eigen_angle();
    if probe.word_rotation().displacement() <= 1e-6 {
        return Err(DegenerateWord { eigen_angle });
    }

    let bases = low_discrepancy_sphere(spec.seed, spec.base_samples);
    let offset = stream_rng(spec.seed, stream::GRID_OFFSET).gen::<f64>();
    let circles: Vec<CirclePoint> = (0..spec.circle_samples)
        .map(|j| CirclePoint::new((j as f64 + offset) / spec.circle_samples as f64))
        .collect();

    let mut iterations: Vec<WordIteration> = bases
        .iter()
        .flat_map(|&b| {
            circles
                .iter()
                .map(move |&c| ProductPoint { base: b, fiber: c })
        })
        .map(|p| WordIteration::new(system, word, p))
        .collect();

    let mut max_log2_by_n = Vec::with_capacity(spec.n_max);
    let mut max_norm_by_n = Vec::with_capacity(spec.n_max);
    let mut translation_bound = 0.0f64;
    let mut bound_ok = true;
    for _ in 1..=spec.n_max {
        let mut level = f64::NEG_INFINITY;
        let mut norm_level = 0.0f64;
        for iter in &mut iterations {
            let step = iter.advance();
            level = level.max(step.log2_fiber_derivative);
            let norm = step.translation.norm();
            norm_level = norm_level.max(norm);
            translation_bound = step.translation_bound;
            if norm > step.translation_bound + BOUND_SLACK {
                bound_ok = false;
            }
        }
        max_log2_by_n.push(level);
        max_norm_by_n.push(norm_level);
    }

    let slope = tail_slope(&max_log2_by_n);
    let max_translation_norm = max_norm_by_n.iter().cloned().fold(0.0, f64::max);
    Ok(WordReport {
        word: word.clone(),
        eigen_angle,
        translation_bound,
        max_log2_by_n,
        max_norm_by_n,
        max_translation_norm,
        slope,
        elliptic: slope.abs() <= SLOPE_TOL,
        bound_ok,
    })
}

/// Least-squares slope of values[n-1] against n over the back half of the
/// sweep, where transients from the first partial sums have died out.
pub fn tail_slope(values: &[f64]) -> f64 {
    let n = values.len();
    let from = n / 2;
    let xs: Vec<f64> = (from..n).map(|i| (i + 1) as f64).collect();
    let ys = &values[from..];
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let var: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    cov / var
}

/// Growth certificate of the recurrent sequence.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// log2 fiber derivative of the n-letter word at the pinned point,
    /// for n = 1..=len (equal to the recorded x-sums).
    pub values: Vec<f64>,
    /// min_n values[n-1]/n: the certified growth rate in bits per letter.
    pub rate_bits: f64,
    /// The same rate in nats (times ln 2).
    pub rate_nats: f64,
    /// Whether every value clears n/2 and the rate clears 1/2 bit.
    pub certified: bool,
    /// Largest discrepancy of the independent skew-product cross-checks.
    pub cross_check_defect: f64,
}

/// Tolerance for the growth certificate comparisons.
pub const GROWTH_EPS: f64 = 1e-9;

pub fn growth_exponent(rec: &RecurrentSystem) -> GrowthReport {
    let skew = rec.skew();
    let pin = ProductPoint {
        base: rec.config.v0,
        fiber: CirclePoint::new(skew.flows().specs()[0].fixed_point),
    };

    let values: Vec<f64> = rec.steps.iter().map(|s| s.x_sum).collect();
    let rate_bits = values
        .iter()
        .zip(1..)
        .map(|(v, n)| v / n as f64)
        .fold(f64::INFINITY, f64::min);

    // Two independent routes to the same numbers: the closed-form
    // translation of each prefix word, and (for a shorter prefix) the plain
    // letter-by-letter orbit derivative.
    let mut defect = 0.0f64;
    let len = values.len();
    let mut checkpoints = vec![1, len];
    checkpoints.extend([len / 2, 10].iter().filter(|&&n| n >= 1 && n <= len));
    for &n in &checkpoints {
        let prefix = prefix_word(rec, n);
        let t = skew.translation_sum(&prefix, rec.config.v0, 1);
        let d = skew.flows().vector_log2_derivative(t, pin.fiber);
        defect = defect.max((d - values[n - 1]).abs());
    }
    let direct_n = len.min(200);
    let d = skew.word_fiber_log2_derivative(&prefix_word(rec, direct_n), pin);
    defect = defect.max((d - values[direct_n - 1]).abs());

    let certified = values
        .iter()
        .zip(1..)
        .all(|(v, n)| *v >= n as f64 / 2.0 - GROWTH_EPS)
        && rate_bits >= 0.5 - GROWTH_EPS
        && defect <= GROWTH_EPS;
    GrowthReport {
        values,
        rate_bits,
        rate_nats: rate_bits * std::f64::consts::LN_2,
        certified,
        cross_check_defect: defect,
    }
}

fn prefix_word(rec: &RecurrentSystem, n: usize) -> BaseWord {
    let mut w = BaseWord::empty();
    for step in &rec.steps[..n] {
        w.push(Letter::new(step.letter, false));
    }
    w
}

/// Deterministic sample of positive words over the generator alphabet,
/// skipping words whose rotation is too close to the identity for the
/// partial-sum bound to mean anything.
pub fn sample_positive_words(
    system: &SkewSystem,
    seed: u64,
    count: usize,
    max_len: usize,
) -> Vec<BaseWord> {
    let mut rng = stream_rng(seed, stream::WORD_SAMPLE);
    let gens = system.generators().len();
    let mut words = Vec::with_capacity(count);
    let mut guard = 0;
    while words.len() < count {
        guard += 1;
        assert!(guard < 10_000, "word sampling failed to find non-degenerate words");
        let len = rng.gen_range(2..=max_len);
        let mut w = BaseWord::empty();
        for _ in 0..len {
            w.push(Letter::new(rng.gen_range(0..gens), false));
        }
        let q = crate::rotor::evaluate_word(system.generators(), &w);
        if q.displacement() > 5e-2 {
            words.push(w);
        }
    }
    words
}

/// Both sides of the story for one constructed system: every sampled word
/// elliptic, the sequence exponentially growing.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub words: Vec<WordReport>,
    pub growth: GrowthReport,
    pub all_elliptic: bool,
    pub all_bounds_hold: bool,
}

pub fn dichotomy_report(
    rec: &RecurrentSystem,
    spec: &OrbitSpec,
    extra_words: usize,
    max_len: usize,
) -> Result<DichotomyReport, DegenerateWord> {
    let skew = rec.skew();
    let mut words: Vec<BaseWord> = (0..skew.generators().len())
        .map(|i| {
            let mut w = BaseWord::empty();
            w.push(Letter::new(i, false));
            w
        })
        .collect();
    words.extend(sample_positive_words(&skew, spec.seed, extra_words, max_len));

    let reports: Result<Vec<WordReport>, DegenerateWord> = words
        .par_iter()
        .map(|w| periodic_exponent(&skew, w, spec))
        .collect();
    let reports = reports?;

    let all_elliptic = reports.iter().all(|r| r.elliptic);
    let all_bounds_hold = reports.iter().all(|r| r.bound_ok);
    Ok(DichotomyReport {
        words: reports,
        growth: growth_exponent(rec),
        all_elliptic,
        all_bounds_hold,
    })
}
