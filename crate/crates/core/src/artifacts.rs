//! Deterministic run artifacts: CSV and JSON files whose bytes are a pure
//! function of config + seed, so repeated runs diff clean.  Floats are
//! printed with the standard shortest-round-trip formatting; the manifest's
//! wall time is the single nondeterministic field an output directory may
//! contain.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::burnside::BallTable;
use crate::exponents::{GrowthReport, WordReport};
use crate::recurrence::RecurrentSystem;
use crate::rotor::letter_rotation;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Elapsed wall time; deliberately excluded from reproducibility
    /// comparisons.
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64, config: serde_json::Value) -> Manifest {
        Manifest {
            tool: "skewlab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            config,
            wall_time_seconds: 0.0,
        }
    }
}

pub struct ArtifactWriter {
    dir: PathBuf,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<ArtifactWriter> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ArtifactWriter { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> io::Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> io::Result<PathBuf> {
        self.write_json("manifest.json", manifest)
    }

    /// The constructed alphabet: builder config echo, the rotation of each
    /// generator, which one is the drift, and the four circle-flow profiles.
    pub fn write_generators(&self, rec: &RecurrentSystem) -> io::Result<PathBuf> {
        let skew = rec.skew();
        let value = serde_json::json!({
            "config": rec.config,
            "generators": rec.generators,
            "drift_index": rec.drift_index,
            "flows": skew.flows().specs(),
        });
        self.write_json("generators.json", &value)
    }

    /// One row per builder step: the letter applied, the distance to the
    /// pinned base point after applying it, and the running x-sum.
    pub fn write_sequence(&self, rec: &RecurrentSystem) -> io::Result<PathBuf> {
        let mut out = String::from("n,letter,dist_to_v0,x_sum\n");
        for step in &rec.steps {
            writeln!(out, "{},{},{},{}", step.n, step.letter, step.dist_to_origin, step.x_sum)
                .unwrap();
        }
        self.write_bytes("sequence.csv", out.as_bytes())
    }

    /// Growth sweep along the recurrent word: the log2 fiber derivative at
    /// the pinned point and the norm of the translation sum, per prefix.
    pub fn write_growth(&self, rec: &RecurrentSystem, report: &GrowthReport) -> io::Result<PathBuf> {
        let mut out = String::from("n,log2_fiber_derivative,translation_norm\n");
        // The translation of the n-letter prefix is the sum of the base
        // orbit points, replayed here from the generators.
        let mut orbit = rec.config.v0;
        let mut sum = crate::rotor::ZERO4;
        for (step, value) in rec.steps.iter().zip(&report.values) {
            sum = sum + orbit;
            writeln!(out, "{},{},{}", step.n, value, sum.norm()).unwrap();
            orbit = letter_rotation(&rec.generators, crate::rotor::Letter::new(step.letter, false))
                .act(orbit);
        }
        self.write_bytes("growth.csv", out.as_bytes())
    }

    /// Per-power maxima of one word's ellipticity sweep, named by the
    /// word's signed token.
    pub fn write_elliptic(&self, report: &WordReport) -> io::Result<PathBuf> {
        let mut out = String::from("n,max_log2_fiber_derivative,max_translation_norm\n");
        for (i, (level, norm)) in report.max_log2_by_n.iter().zip(&report.max_norm_by_n).enumerate()
        {
            writeln!(out, "{},{},{}", i + 1, level, norm).unwrap();
        }
        self.write_bytes(&format!("elliptic_{}.csv", report.word.token()), out.as_bytes())
    }

    pub fn write_burnside_balls(&self, table: &BallTable) -> io::Result<PathBuf> {
        let mut out = String::from("radius,sphere,ball\n");
        let spheres = table.sphere_sizes();
        let balls = table.ball_sizes();
        for (r, (sphere, ball)) in spheres.iter().zip(&balls).enumerate() {
            writeln!(out, "{r},{sphere},{ball}").unwrap();
        }
        self.write_bytes("burnside_balls.csv", out.as_bytes())
    }

    pub fn write_summary(&self, value: &impl Serialize) -> io::Result<PathBuf> {
        self.write_json("summary.json", value)
    }
}
