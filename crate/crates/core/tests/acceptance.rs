//! Whole-construction certification. Each test certifies one headline
//! inequality at its stated tolerance and runtime budget, and prints a
//! one-line verdict (shown with `--nocapture`, or on failure).
//!
//! The closed-form/direct-iteration agreement is a gate: the derivative
//! sweeps call it first, since their numbers mean nothing if the prefix
//! convention is off.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use skewlab::artifacts::{ArtifactWriter, Manifest};
use skewlab::burnside::{
    element_order, geodesic_ray_exponent, periodic_banach_exponent, BallTable, GrigorchukElement,
};
use skewlab::circle_flows::{calibration_audit, CirclePoint, FlowSystem};
use skewlab::exponents::{
    dichotomy_report, growth_exponent, periodic_exponent, sample_positive_words, OrbitSpec,
};
use skewlab::recurrence::{build, BuilderConfig, RecurrentSystem};
use skewlab::rotor::{no_short_relation_check, series_audit};
use skewlab::sampling::low_discrepancy_sphere;
use skewlab::skew::{ProductPoint, WordIteration};

const SEED: u64 = 42;
const SEQUENCE_LEN: usize = 500;

/// The constructed system, shared by the sequence-dependent certificates,
/// with the time the construction itself took.
fn fixture() -> &'static (RecurrentSystem, Duration) {
    static FIXTURE: OnceLock<(RecurrentSystem, Duration)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let t0 = Instant::now();
        let rec = build(&BuilderConfig::default(), SEQUENCE_LEN)
            .expect("the construction must complete at the default parameters");
        (rec, t0.elapsed())
    })
}

/// Worst closed-form vs direct-iteration defect over 20 seeded positive
/// words of length <= 4, 50 sample points of S^3 x S^1, 50 powers each.
fn closed_form_defect() -> &'static (f64, Duration) {
    static GATE: OnceLock<(f64, Duration)> = OnceLock::new();
    GATE.get_or_init(|| {
        let t0 = Instant::now();
        let (rec, _) = fixture();
        let skew = rec.skew();
        let words = sample_positive_words(&skew, SEED, 20, 4);
        let bases = low_discrepancy_sphere(SEED, 50);
        let mut worst = 0.0f64;
        for word in &words {
            for (j, &base) in bases.iter().enumerate() {
                let start = ProductPoint {
                    base,
                    fiber: CirclePoint::new((j as f64 + 0.5) / bases.len() as f64),
                };
                let mut closed = WordIteration::new(&skew, word, start);
                let mut direct = start;
                for _ in 0..50 {
                    direct = skew.apply_word(word, direct);
                    let step = closed.advance();
                    worst = worst.max(step.base.dist(direct.base));
                    worst = worst.max(step.fiber.dist(direct.fiber));
                }
            }
        }
        (worst, t0.elapsed())
    })
}

fn require_closed_form_gate() {
    let (worst, _) = *closed_form_defect();
    assert!(worst <= 1e-6, "iteration gate failed: closed form off by {worst:.3e}");
}

#[test]
fn partial_sum_bounds_hold_for_random_rotation_pairs() {
    let t0 = Instant::now();
    let audit = series_audit(SEED, 200, 1000, 0.05);
    assert!(
        audit.max_bound_overshoot <= 1e-8,
        "partial sum exceeded 2/|q-1| by {:.3e}",
        audit.max_bound_overshoot
    );
    assert!(
        audit.max_closed_form_defect <= 1e-9,
        "closed form off by {:.3e}",
        audit.max_closed_form_defect
    );
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:.2?}");
    println!(
        "[PASS] partial sums of 200 rotation pairs stay within 2/|q-1| up to n = 1000 \
         (overshoot {:.2e}, closed-form defect {:.2e}, {elapsed:.2?})",
        audit.max_bound_overshoot, audit.max_closed_form_defect
    );
}

#[test]
fn flow_calibration_is_exact_where_promised() {
    let t0 = Instant::now();
    let flows = FlowSystem::standard();
    for i in 0..4 {
        let p = CirclePoint::new(flows.specs()[i].fixed_point);
        // Time-1 derivative at the fixed point is 2, exactly.
        assert_eq!(flows.flow_log2_derivative(i, 1.0, p), 1.0);
    }
    let audit = calibration_audit(&flows, SEED, 200);
    assert!(audit.fixed_point_exact, "2^t at a fixed point was not bit-exact");
    assert!(
        audit.ode_derivative_defect <= 1e-6,
        "variational ODE disagrees by {:.3e}",
        audit.ode_derivative_defect
    );
    assert!(
        audit.group_law_defect <= 1e-8,
        "group law off by {:.3e}",
        audit.group_law_defect
    );
    assert!(
        audit.commutation_defect <= 1e-12,
        "flows fail to commute by {:.3e}",
        audit.commutation_defect
    );
    assert!(audit.monotone, "a time-t map lost monotonicity");
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:.2?}");
    println!(
        "[PASS] flow calibration: derivative 2 exact, ODE defect {:.2e}, group law {:.2e}, \
         commutation {:.2e} ({elapsed:.2?})",
        audit.ode_derivative_defect, audit.group_law_defect, audit.commutation_defect
    );
}

#[test]
fn closed_form_iteration_matches_direct_orbits() {
    let (worst, elapsed) = *closed_form_defect();
    assert!(worst <= 1e-6, "worst defect {worst:.3e}");
    println!(
        "[PASS] closed-form iteration matches direct orbits to {worst:.2e} \
         over 20 words x 50 points x 50 powers ({elapsed:.2?})"
    );
}

#[test]
fn recurrent_sequence_stays_in_the_delta_ball() {
    require_closed_form_gate();
    let (rec, built_in) = fixture();
    assert_eq!(rec.steps.len(), SEQUENCE_LEN);
    let delta = rec.config.delta;
    let mut max_dist = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for step in &rec.steps {
        assert!(
            step.dist_to_origin <= delta,
            "step {} left the delta-ball: {}",
            step.n,
            step.dist_to_origin
        );
        assert!(
            step.x_sum >= step.n as f64 / 2.0 - 1e-9,
            "step {}: x-sum {} under n/2",
            step.n,
            step.x_sum
        );
        max_dist = max_dist.max(step.dist_to_origin);
        min_margin = min_margin.min(step.x_sum - step.n as f64 / 2.0);
    }
    assert!(*built_in < Duration::from_secs(30), "construction took {built_in:.2?}");
    println!(
        "[PASS] {SEQUENCE_LEN}-step recurrence: max distance {max_dist:.3} <= delta = {delta}, \
         x-sum margin over n/2 at least {min_margin:.3} (built in {built_in:.2?})"
    );
}

#[test]
fn derivative_growth_is_exponential_at_the_pinned_point() {
    require_closed_form_gate();
    let (rec, _) = fixture();
    let t0 = Instant::now();
    let report = growth_exponent(rec);
    for (value, n) in report.values.iter().zip(1..) {
        assert!(
            *value >= n as f64 / 2.0 - 1e-9,
            "power {n}: log2 derivative {value} under n/2"
        );
    }
    assert!(
        report.rate_nats >= std::f64::consts::LN_2 / 2.0 - 1e-9,
        "rate {} nats/letter under ln2/2",
        report.rate_nats
    );
    assert!(
        report.cross_check_defect <= 1e-9,
        "derivative cross-checks disagree by {:.3e}",
        report.cross_check_defect
    );
    assert!(report.certified);
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:.2?}");
    println!(
        "[PASS] exponential derivative growth: rate {:.5} nats/letter >= ln2/2 = {:.5}, \
         cross-check defect {:.2e} ({elapsed:.2?})",
        report.rate_nats,
        std::f64::consts::LN_2 / 2.0,
        report.cross_check_defect
    );
}

#[test]
fn every_swept_word_is_elliptic_with_bounded_translations() {
    require_closed_form_gate();
    let (rec, _) = fixture();
    let t0 = Instant::now();
    let spec = OrbitSpec { n_max: 2000, base_samples: 32, circle_samples: 32, seed: SEED };
    let report =
        dichotomy_report(rec, &spec, 20, 6).expect("no degenerate word reaches the sweep");
    // Every single generator (more than the minimum of four) plus 20 seeded
    // positive words of length <= 6.
    assert_eq!(report.words.len(), rec.generators.len() + 20);
    let mut worst_slope = 0.0f64;
    for word in &report.words {
        assert!(
            word.max_translation_norm <= word.translation_bound + 1e-6,
            "word {}: translation norm {} exceeds bound {}",
            word.word.token(),
            word.max_translation_norm,
            word.translation_bound
        );
        assert!(
            word.slope.abs() <= 1e-3,
            "word {}: tail slope {:.3e} bits/step is not flat",
            word.word.token(),
            word.slope
        );
        worst_slope = worst_slope.max(word.slope.abs());
    }
    assert!(report.all_elliptic && report.all_bounds_hold);
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:.2?}");
    println!(
        "[PASS] all {} words elliptic over n <= 2000 on a 32x32 grid: worst |slope| {:.2e} \
         bits/step, every translation within 2l/|q-1| + 1e-6 ({elapsed:.2?})",
        report.words.len(),
        worst_slope
    );
}

#[test]
fn grigorchuk_certificates_and_exponents_hold() {
    let t0 = Instant::now();
    let g = |w: &str| GrigorchukElement::parse(w).expect("fixed word parses");
    for w in ["a", "b", "c", "d"] {
        assert!(g(w).mul(&g(w)).is_trivial(), "{w}^2 is not the identity");
    }
    assert!(g("bc").same_class(&g("d")));
    assert!(g("cd").same_class(&g("b")));
    assert!(g("db").same_class(&g("c")));
    assert_eq!(element_order(&g("ad"), 256).expect("order under cap"), 4);

    let mut table = BallTable::build(12);
    let balls = table.ball_sizes();
    assert_eq!(balls.len(), 13);
    assert!(
        balls.windows(2).all(|w| w[1] > w[0]),
        "ball sizes fail to strictly increase: {balls:?}"
    );

    let short: Vec<GrigorchukElement> =
        table.ball_ids(4).map(|id| table.representative(id).clone()).collect();
    for rep in &short {
        let order = element_order(rep, 256)
            .unwrap_or_else(|_| panic!("order of {rep} exceeds 256"));
        assert!(order.is_power_of_two(), "{rep} has order {order}");
    }

    // Exponent bounds for measures on the periodic orbits: small at the
    // certification horizon and shrinking when the horizon doubles.
    let mut worst = 0.0f64;
    let mut worst_doubled = 0.0f64;
    for rep in &short {
        let lo = periodic_banach_exponent(rep, 512, &mut table).expect("order under cap");
        let hi = periodic_banach_exponent(rep, 1024, &mut table).expect("order under cap");
        assert!(lo <= 0.1, "{rep}: exponent bound {lo:.4} at N = 512");
        assert!(hi <= lo, "{rep}: bound grew from {lo:.4} to {hi:.4}");
        worst = worst.max(lo);
        worst_doubled = worst_doubled.max(hi);
    }
    assert!(worst_doubled < worst);

    let ray = geodesic_ray_exponent(&table, 12).expect("table covers radius 12");
    assert_eq!(ray.exponent, std::f64::consts::LN_2);
    assert_eq!(ray.witness.len(), 12);

    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:.2?}");
    println!(
        "[PASS] weighted-cocycle certificates: relations and 2-power orders through |g| <= 4, \
         periodic exponent bounds {worst:.4} -> {worst_doubled:.4} under doubling, \
         ray {} gives exponent ln 2 exactly, balls strictly increase to radius 12 ({elapsed:.2?})",
        ray.witness
    );
}

#[test]
fn emitted_generators_admit_no_short_relation() {
    let (rec, _) = fixture();
    let t0 = Instant::now();
    assert!(
        no_short_relation_check(&rec.generators, 8, 1e-6),
        "a reduced word of length <= 8 lands within 1e-6 of the identity"
    );
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:.2?}");
    println!(
        "[PASS] no relation of length <= 8 at tolerance 1e-6 among the {} generators \
         ({elapsed:.2?})",
        rec.generators.len()
    );
}

#[test]
fn artifacts_are_byte_identical_across_repeated_runs() {
    let (rec, _) = fixture();
    let t0 = Instant::now();

    // The construction itself is reproducible: a fresh run from the same
    // seed emits the same alphabet.
    let again = build(&BuilderConfig::default(), 120).expect("rebuild");
    assert_eq!(
        serde_json::to_vec(&again.generators).unwrap(),
        serde_json::to_vec(&rec.generators).unwrap()
    );

    let emit = |dir: &std::path::Path| {
        let writer = ArtifactWriter::new(dir).unwrap();
        writer.write_generators(rec).unwrap();
        writer.write_sequence(rec).unwrap();
        let growth = growth_exponent(rec);
        writer.write_growth(rec, &growth).unwrap();
        let spec = OrbitSpec { n_max: 64, base_samples: 4, circle_samples: 4, seed: SEED };
        let word = skewlab::rotor::BaseWord::positive([0, 1]);
        let sweep = periodic_exponent(&rec.skew(), &word, &spec).unwrap();
        writer.write_elliptic(&sweep).unwrap();
        writer.write_burnside_balls(&BallTable::build(6)).unwrap();
        let mut manifest = Manifest::new("acceptance", SEED, serde_json::json!({}));
        manifest.wall_time_seconds = 0.0; // pinned: reruns must match bit for bit
        writer.write_manifest(&manifest).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit(a.path());
    emit(b.path());

    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in &names {
        let left = std::fs::read(a.path().join(name)).unwrap();
        let right = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
    println!(
        "[PASS] repeated runs emit byte-identical artifacts ({} files, {:.2?})",
        names.len(),
        t0.elapsed()
    );
}
