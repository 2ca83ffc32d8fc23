//! Laboratory driver: each subcommand runs one certification pass and drops
//! its artifacts (CSV tables, a JSON summary, a manifest) into the output
//! directory.
//!
//! Exit codes: 0 when every check passes, 1 when a numerical invariant is
//! breached (the first failing check is named on stderr), 2 when the
//! configuration or the environment is unusable.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use skewlab::artifacts::{ArtifactWriter, Manifest};
use skewlab::burnside::{
    element_order, geodesic_ray_exponent, periodic_banach_exponent, BallTable, GrigorchukElement,
};
use skewlab::circle_flows::{calibration_audit, FlowSystem};
use skewlab::exponents::{
    dichotomy_report, growth_exponent, periodic_exponent, GrowthReport, OrbitSpec, WordReport,
    GROWTH_EPS,
};
use skewlab::recurrence::{build, BuildError, BuilderConfig, RecurrentSystem};
use skewlab::rotor::{series_audit, no_short_relation_check, BaseWord, Letter, BASE_POINT};

#[derive(Parser)]
#[command(name = "skewlab", version, about = "Derivative-growth laboratory for a skew-product group on S^3 x S^1")]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every pseudorandom choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Length of the recurrent sequence.
    #[arg(long, global = true, value_name = "N")]
    n_growth: Option<usize>,
    /// Powers swept per word in ellipticity checks.
    #[arg(long, global = true, value_name = "N")]
    n_periodic: Option<usize>,
    /// Radius of the recurrence ball.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Radius of the Grigorchuk ball table.
    #[arg(long, global = true, value_name = "R")]
    ball_radius: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the geometric partial-sum bound and closed form for random
    /// rotation pairs.
    PartialSums,
    /// Calibrate the four circle flows against direct integration.
    Flows,
    /// Construct the generator family and its recurrent sequence.
    Build,
    /// Certify exponential growth of derivatives along the sequence.
    Growth,
    /// Sweep powers of chosen words and certify bounded derivatives.
    Elliptic {
        /// Word as comma-separated signed 1-based generator indices,
        /// e.g. "2,-1,3". Repeatable.
        #[arg(long = "word", value_name = "LETTERS", required = true, allow_hyphen_values = true)]
        words: Vec<String>,
    },
    /// Full dichotomy run: build, relation screen, ellipticity sweep of the
    /// alphabet plus sampled words, growth certificate.
    Dichotomy,
    /// Growth table and exponent certificates for the Grigorchuk group
    /// acting on its ball quasi-regular representation.
    Burnside,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PartialSums => "partial-sums",
            Command::Flows => "flows",
            Command::Build => "build",
            Command::Growth => "growth",
            Command::Elliptic { .. } => "elliptic",
            Command::Dichotomy => "dichotomy",
            Command::Burnside => "burnside",
        }
    }
}

/// On-disk config; every field optional so files can override selectively.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    delta: Option<f64>,
    cover_radius: Option<f64>,
    theta_drift: Option<f64>,
    eta: Option<f64>,
    n_growth: Option<usize>,
    n_periodic: Option<usize>,
    word_sample_size: Option<usize>,
    word_max_len: Option<usize>,
    ball_radius: Option<usize>,
    base_samples: Option<usize>,
    circle_samples: Option<usize>,
    relation_length: Option<usize>,
}

/// Fully resolved run parameters; echoed verbatim into the manifest. The
/// output directory is skipped so two runs into different directories leave
/// identical artifacts.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    seed: u64,
    #[serde(skip_serializing)]
    out: PathBuf,
    delta: f64,
    cover_radius: f64,
    theta_drift: f64,
    eta: f64,
    n_growth: usize,
    n_periodic: usize,
    word_sample_size: usize,
    word_max_len: usize,
    ball_radius: usize,
    base_samples: usize,
    circle_samples: usize,
    relation_length: usize,
}

impl RunConfig {
    fn builder(&self) -> BuilderConfig {
        BuilderConfig {
            v0: BASE_POINT,
            delta: self.delta,
            cover_radius: self.cover_radius,
            theta_drift: self.theta_drift,
            eta: self.eta,
            seed: self.seed,
        }
    }

    fn orbit_spec(&self) -> OrbitSpec {
        OrbitSpec {
            n_max: self.n_periodic,
            base_samples: self.base_samples,
            circle_samples: self.circle_samples,
            seed: self.seed,
        }
    }
}

/// A problem that prevents the run from meaning anything: bad config, bad
/// word syntax, unwritable output. Exit code 2.
#[derive(Debug)]
struct Unusable(String);

impl std::fmt::Display for Unusable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<std::io::Error> for Unusable {
    fn from(e: std::io::Error) -> Self {
        Unusable(format!("io: {e}"))
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Unusable> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Unusable(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| Unusable(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let defaults = BuilderConfig::default();
    let cfg = RunConfig {
        seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
        out: cli.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("artifacts")),
        delta: cli.delta.or(file.delta).unwrap_or(defaults.delta),
        cover_radius: file.cover_radius.unwrap_or(defaults.cover_radius),
        theta_drift: file.theta_drift.unwrap_or(defaults.theta_drift),
        eta: file.eta.unwrap_or(defaults.eta),
        n_growth: cli.n_growth.or(file.n_growth).unwrap_or(200),
        n_periodic: cli.n_periodic.or(file.n_periodic).unwrap_or(2000),
        word_sample_size: file.word_sample_size.unwrap_or(20),
        word_max_len: file.word_max_len.unwrap_or(6),
        ball_radius: cli.ball_radius.or(file.ball_radius).unwrap_or(12),
        base_samples: file.base_samples.unwrap_or(32),
        circle_samples: file.circle_samples.unwrap_or(32),
        relation_length: file.relation_length.unwrap_or(4),
    };
    let invalid = |what: &str| Err(Unusable(format!("config: {what}")));
    if cfg.n_growth == 0 {
        return invalid("n_growth must be at least 1");
    }
    if cfg.n_periodic < 8 {
        return invalid("n_periodic must be at least 8 for the tail fit");
    }
    if cfg.base_samples == 0 || cfg.circle_samples == 0 {
        return invalid("sample grid must be nonempty");
    }
    if cfg.word_max_len < 2 {
        return invalid("word_max_len must be at least 2");
    }
    if cfg.ball_radius == 0 {
        return invalid("ball_radius must be at least 1");
    }
    Ok(cfg)
}

/// Ordered list of named pass/fail checks; the run's verdict.
#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, ok: bool) {
        self.0.push((name.into(), ok));
    }

    fn all_ok(&self) -> bool {
        self.0.iter().all(|(_, ok)| *ok)
    }

    fn first_failure(&self) -> Option<&str> {
        self.0.iter().find(|(_, ok)| !*ok).map(|(name, _)| name.as_str())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg) {
        Ok(checks) => {
            for (name, ok) in &checks.0 {
                println!("{} {name}", if *ok { "[ ok ]" } else { "[FAIL]" });
            }
            println!("artifacts: {}", cfg.out.display());
            match checks.first_failure() {
                None => ExitCode::SUCCESS,
                Some(name) => {
                    eprintln!("invariant breach: {name}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Checks, Unusable> {
    let start = Instant::now();
    let writer = ArtifactWriter::new(&cfg.out)?;
    let (mut summary, checks) = match &cli.command {
        Command::PartialSums => run_partial_sums(cfg)?,
        Command::Flows => run_flows(cfg)?,
        Command::Build => run_build(cfg, &writer)?,
        Command::Growth => run_growth(cfg, &writer)?,
        Command::Elliptic { words } => run_elliptic(cfg, &writer, words)?,
        Command::Dichotomy => run_dichotomy(cfg, &writer)?,
        Command::Burnside => run_burnside(cfg, &writer)?,
    };
    if let Some(obj) = summary.as_object_mut() {
        obj.insert("pass".into(), json!(checks.all_ok()));
        obj.insert(
            "checks".into(),
            json!(checks.0.iter().map(|(n, ok)| json!({"name": n, "ok": ok})).collect::<Vec<_>>()),
        );
    }
    writer.write_summary(&summary)?;
    let mut manifest = Manifest::new(
        cli.command.name(),
        cfg.seed,
        serde_json::to_value(cfg).expect("config serializes"),
    );
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    writer.write_manifest(&manifest)?;
    Ok(checks)
}

const SERIES_PAIRS: usize = 200;
const SERIES_N_MAX: usize = 1000;
const SERIES_MIN_ANGLE: f64 = 0.05;

fn run_partial_sums(cfg: &RunConfig) -> Result<(serde_json::Value, Checks), Unusable> {
    let audit = series_audit(cfg.seed, SERIES_PAIRS, SERIES_N_MAX, SERIES_MIN_ANGLE);
    let mut checks = Checks::default();
    checks.push(
        format!("partial sums of {SERIES_PAIRS} rotation pairs stay within 2/|q-1| up to n = {SERIES_N_MAX}"),
        audit.max_bound_overshoot <= 1e-8,
    );
    checks.push(
        "closed form (1-q^n)(1-q)^-1 v matches direct summation to 1e-9",
        audit.max_closed_form_defect <= 1e-9,
    );
    Ok((json!({ "subcommand": "partial-sums", "audit": audit }), checks))
}

const FLOW_SAMPLES: usize = 200;

fn run_flows(cfg: &RunConfig) -> Result<(serde_json::Value, Checks), Unusable> {
    let audit = calibration_audit(&FlowSystem::standard(), cfg.seed, FLOW_SAMPLES);
    let mut checks = Checks::default();
    checks.push("fixed-point derivative is 2^t bit for bit", audit.fixed_point_exact);
    checks.push("closed-form derivative matches the variational ODE to 1e-6", audit.ode_derivative_defect <= 1e-6);
    checks.push("one-parameter group law holds to 1e-8", audit.group_law_defect <= 1e-8);
    checks.push("distinct flows commute to 1e-12", audit.commutation_defect <= 1e-12);
    checks.push("every time-t map is monotone", audit.monotone);
    Ok((json!({ "subcommand": "flows", "audit": audit }), checks))
}

/// Build the system or convert the failure into either a failed check (the
/// construction's own invariants broke) or an unusable-config error.
fn build_checked(cfg: &RunConfig) -> Result<Result<RecurrentSystem, String>, Unusable> {
    match build(&cfg.builder(), cfg.n_growth) {
        Ok(rec) => Ok(Ok(rec)),
        Err(BuildError::Config(msg)) => Err(Unusable(format!("config: {msg}"))),
        Err(e) => Ok(Err(e.to_string())),
    }
}

fn sequence_checks(rec: &RecurrentSystem, checks: &mut Checks) {
    let delta = rec.config.delta;
    let max_dist = rec.steps.iter().map(|s| s.dist_to_origin).fold(0.0, f64::max);
    checks.push(
        format!("recurrent orbit stays within delta = {delta} of the pinned point"),
        max_dist <= delta,
    );
    let half_bit = rec
        .steps
        .iter()
        .all(|s| s.x_sum >= s.n as f64 / 2.0 - GROWTH_EPS);
    checks.push("every prefix gains at least half a bit per letter", half_bit);
}

fn build_summary(rec: &RecurrentSystem) -> serde_json::Value {
    json!({
        "generator_count": rec.generators.len(),
        "drift_index": rec.drift_index,
        "n_steps": rec.steps.len(),
        "max_dist_to_v0": rec.steps.iter().map(|s| s.dist_to_origin).fold(0.0, f64::max),
        "final_x_sum": rec.steps.last().map(|s| s.x_sum),
    })
}

fn run_build(cfg: &RunConfig, writer: &ArtifactWriter) -> Result<(serde_json::Value, Checks), Unusable> {
    let mut checks = Checks::default();
    let rec = match build_checked(cfg)? {
        Ok(rec) => rec,
        Err(failure) => {
            checks.push(format!("construction completes: {failure}"), false);
            return Ok((json!({ "subcommand": "build" }), checks));
        }
    };
    writer.write_generators(&rec)?;
    writer.write_sequence(&rec)?;
    sequence_checks(&rec, &mut checks);
    let mut summary = build_summary(&rec);
    summary["subcommand"] = json!("build");
    Ok((summary, checks))
}

fn growth_checks(report: &GrowthReport, checks: &mut Checks) {
    let floor = report
        .values
        .iter()
        .zip(1..)
        .all(|(v, n)| *v >= n as f64 / 2.0 - GROWTH_EPS);
    checks.push("log2 derivative of every prefix clears n/2", floor);
    checks.push(
        format!("certified growth rate {:.4} bits/letter is at least 1/2", report.rate_bits),
        report.rate_bits >= 0.5 - GROWTH_EPS,
    );
    checks.push(
        "closed-form and orbit-replay derivatives agree to 1e-9",
        report.cross_check_defect <= GROWTH_EPS,
    );
}

fn growth_summary(report: &GrowthReport) -> serde_json::Value {
    json!({
        "rate_bits": report.rate_bits,
        "rate_nats": report.rate_nats,
        "cross_check_defect": report.cross_check_defect,
        "certified": report.certified,
    })
}

fn run_growth(cfg: &RunConfig, writer: &ArtifactWriter) -> Result<(serde_json::Value, Checks), Unusable> {
    let mut checks = Checks::default();
    let rec = match build_checked(cfg)? {
        Ok(rec) => rec,
        Err(failure) => {
            checks.push(format!("construction completes: {failure}"), false);
            return Ok((json!({ "subcommand": "growth" }), checks));
        }
    };
    writer.write_generators(&rec)?;
    writer.write_sequence(&rec)?;
    sequence_checks(&rec, &mut checks);
    let report = growth_exponent(&rec);
    writer.write_growth(&rec, &report)?;
    growth_checks(&report, &mut checks);
    let mut summary = build_summary(&rec);
    summary["subcommand"] = json!("growth");
    summary["growth"] = growth_summary(&report);
    Ok((summary, checks))
}

fn parse_word(text: &str, generators: usize) -> Result<BaseWord, Unusable> {
    let bad = |what: String| Unusable(format!("word \"{text}\": {what}"));
    let mut word = BaseWord::empty();
    for part in text.split(',') {
        let signed: i64 = part
            .trim()
            .parse()
            .map_err(|_| bad(format!("\"{part}\" is not a signed index")))?;
        let letter = Letter::from_signed(signed)
            .ok_or_else(|| bad("0 is not a letter".to_string()))?;
        if letter.index() >= generators {
            return Err(bad(format!("index {signed} exceeds the {generators}-letter alphabet")));
        }
        word.push(letter);
    }
    if word.is_empty() {
        return Err(bad("empty word".to_string()));
    }
    Ok(word)
}

fn word_entry(report: &WordReport) -> serde_json::Value {
    json!({
        "word": report.word.token(),
        "eigen_angle": report.eigen_angle,
        "translation_bound": report.translation_bound,
        "max_translation_norm": report.max_translation_norm,
        "tail_slope": report.slope,
        "elliptic": report.elliptic,
        "bound_ok": report.bound_ok,
    })
}

fn word_checks(report: &WordReport, checks: &mut Checks) {
    let token = report.word.token();
    checks.push(
        format!("word {token}: tail slope {:+.2e} bits/step is flat", report.slope),
        report.elliptic,
    );
    checks.push(
        format!(
            "word {token}: translation norms stay within the a-priori bound {:.3}",
            report.translation_bound
        ),
        report.bound_ok,
    );
}

fn run_elliptic(
    cfg: &RunConfig,
    writer: &ArtifactWriter,
    words: &[String],
) -> Result<(serde_json::Value, Checks), Unusable> {
    let mut checks = Checks::default();
    let rec = match build_checked(cfg)? {
        Ok(rec) => rec,
        Err(failure) => {
            checks.push(format!("construction completes: {failure}"), false);
            return Ok((json!({ "subcommand": "elliptic" }), checks));
        }
    };
    let skew = rec.skew();
    let words: Vec<BaseWord> = words
        .iter()
        .map(|text| parse_word(text, skew.generators().len()))
        .collect::<Result<_, _>>()?;
    let spec = cfg.orbit_spec();
    let mut entries = Vec::new();
    for word in &words {
        match periodic_exponent(&skew, word, &spec) {
            Ok(report) => {
                writer.write_elliptic(&report)?;
                word_checks(&report, &mut checks);
                entries.push(word_entry(&report));
            }
            Err(e) => {
                checks.push(
                    format!("word {}: rotation is certifiable (angle {:.2e})", word.token(), e.eigen_angle),
                    false,
                );
            }
        }
    }
    Ok((json!({ "subcommand": "elliptic", "n_max": spec.n_max, "words": entries }), checks))
}

fn run_dichotomy(cfg: &RunConfig, writer: &ArtifactWriter) -> Result<(serde_json::Value, Checks), Unusable> {
    let mut checks = Checks::default();
    let rec = match build_checked(cfg)? {
        Ok(rec) => rec,
        Err(failure) => {
            checks.push(format!("construction completes: {failure}"), false);
            return Ok((json!({ "subcommand": "dichotomy" }), checks));
        }
    };
    writer.write_generators(&rec)?;
    writer.write_sequence(&rec)?;
    sequence_checks(&rec, &mut checks);

    let skew = rec.skew();
    checks.push(
        format!("alphabet admits no relation of length <= {}", cfg.relation_length),
        no_short_relation_check(skew.generators(), cfg.relation_length, 1e-6),
    );

    let spec = cfg.orbit_spec();
    match dichotomy_report(&rec, &spec, cfg.word_sample_size, cfg.word_max_len) {
        Ok(report) => {
            for word in &report.words {
                writer.write_elliptic(word)?;
            }
            writer.write_growth(&rec, &report.growth)?;
            let worst_slope = report
                .words
                .iter()
                .map(|w| w.slope.abs())
                .fold(0.0, f64::max);
            checks.push(
                format!(
                    "all {} swept words are elliptic (worst |slope| {:.2e} bits/step)",
                    report.words.len(),
                    worst_slope
                ),
                report.all_elliptic,
            );
            checks.push(
                "every translation norm respects its a-priori bound",
                report.all_bounds_hold,
            );
            growth_checks(&report.growth, &mut checks);
            let summary = json!({
                "subcommand": "dichotomy",
                "generator_count": rec.generators.len(),
                "n_max": spec.n_max,
                "words": report.words.iter().map(word_entry).collect::<Vec<_>>(),
                "growth": growth_summary(&report.growth),
            });
            Ok((summary, checks))
        }
        Err(e) => {
            checks.push(
                format!("every swept word has a certifiable rotation (angle {:.2e})", e.eigen_angle),
                false,
            );
            Ok((json!({ "subcommand": "dichotomy" }), checks))
        }
    }
}

/// Horizon for the periodic-orbit exponent bounds; doubling it must shrink
/// the worst bound.
const BANACH_N: usize = 512;
/// Order search cap; every short element's order is a power of two well
/// under this.
const ORDER_CAP: u64 = 256;
/// Length of the certified geodesic ray.
const RAY_LEN: usize = 12;

fn run_burnside(cfg: &RunConfig, writer: &ArtifactWriter) -> Result<(serde_json::Value, Checks), Unusable> {
    let mut checks = Checks::default();
    let mut table = BallTable::build(cfg.ball_radius);
    writer.write_burnside_balls(&table)?;

    let g = |w: &str| GrigorchukElement::parse(w).expect("fixed word parses");
    let relations = [
        ("a", "a"), ("b", "b"), ("c", "c"), ("d", "d"),
        ("bc", "d"), ("cd", "b"), ("db", "c"),
    ];
    let involutions = relations[..4]
        .iter()
        .all(|(w, _)| g(w).mul(&g(w)).is_trivial());
    let klein = relations[4..]
        .iter()
        .all(|(w, v)| g(w).same_class(&g(v)));
    checks.push("generators are involutions", involutions);
    checks.push("b, c, d multiply as the Klein four-group", klein);
    checks.push("ab and ba differ (the group is nonabelian)", !g("ab").same_class(&g("ba")));

    let mut orders = Vec::new();
    let short_radius = cfg.ball_radius.min(4);
    let mut orders_ok = true;
    for id in table.ball_ids(short_radius) {
        let rep = table.representative(id).clone();
        match element_order(&rep, ORDER_CAP) {
            Ok(order) => {
                orders_ok &= order.is_power_of_two();
                orders.push(json!({ "word": rep.to_string(), "order": order }));
            }
            Err(_) => orders_ok = false,
        }
    }
    checks.push(
        format!("all {} classes of the radius-{short_radius} ball have 2-power order", orders.len()),
        orders_ok,
    );

    let mut worst = [0.0f64; 2];
    let mut decreasing = true;
    for id in table.ball_ids(short_radius) {
        let rep = table.representative(id).clone();
        let lo = periodic_banach_exponent(&rep, BANACH_N, &mut table)
            .map_err(|e| Unusable(format!("order search capped at {}", e.cap)))?;
        let hi = periodic_banach_exponent(&rep, 2 * BANACH_N, &mut table)
            .map_err(|e| Unusable(format!("order search capped at {}", e.cap)))?;
        worst[0] = worst[0].max(lo);
        worst[1] = worst[1].max(hi);
        decreasing &= hi <= lo;
    }
    checks.push(
        format!("periodic-orbit exponent bounds at N = {BANACH_N} stay below 0.1 (worst {:.4})", worst[0]),
        worst[0] <= 0.1,
    );
    checks.push(
        format!("doubling the horizon shrinks the worst bound to {:.4}", worst[1]),
        decreasing && worst[1] < worst[0],
    );

    let ray_len = cfg.ball_radius.min(RAY_LEN);
    let ray = geodesic_ray_exponent(&table, ray_len)
        .expect("table covers the ray length by construction");
    checks.push(
        format!("geodesic ray {} certifies exponent ln 2 exactly", ray.witness),
        ray.exponent == std::f64::consts::LN_2 && ray.witness.len() == ray_len,
    );

    let summary = json!({
        "subcommand": "burnside",
        "group": "grigorchuk-first",
        "ball_radius": cfg.ball_radius,
        "class_count": table.ball_sizes().get(cfg.ball_radius),
        "sphere_sizes": table.sphere_sizes()[..=cfg.ball_radius],
        "orders": orders,
        "periodic_exponent_bounds": { "n": BANACH_N, "worst": worst[0], "worst_doubled": worst[1] },
        "ray": { "witness": ray.witness.to_string(), "length": ray_len, "exponent": ray.exponent },
    });
    Ok((summary, checks))
}
