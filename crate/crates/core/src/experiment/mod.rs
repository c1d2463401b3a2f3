//! Randomized localization trials comparing the three GCC modes.
//!
//! A run places one tetrahedral array at the room centre, draws source
//! positions uniformly in the room, simulates each event for every requested
//! reverberation time, and localizes it on every requested grid pitch in all
//! requested modes. Every trial has its own RNG stream, so results do not
//! depend on scheduling or thread count.

pub mod stats;
pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gcc::{Band, GccMode, Signal};
use crate::geometry::{ArrayGeometry, Point3};
use crate::roomsim::{simulate_event, RoomSpec, SimulationOptions};
use crate::srpmap::{build_grid, compute_maps_with_spectra, localize, Grid, PairSpectra, SrpSetup};

pub use stats::{
    bucket_by_rho, mean_deviation, mean_error, permutation_deviance_test, wilcoxon_rank_sum, wilcoxon_signed_rank,
    ErrorStats, RhoBucket,
};
pub use synth::{SignalBank, SignalSource};

/// Sources closer than this to any microphone are redrawn.
pub const MIC_EXCLUSION_RADIUS: f64 = 0.1;

const POSITION_STREAM: u64 = 0;
const SIGNAL_STREAM: u64 = 1;

/// RNG for one purpose of one trial; independent of every other trial.
pub fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 8) | purpose);
    rng
}

/// Regular tetrahedron with its centroid at `center`.
pub fn tetrahedron_array(center: Point3, edge: f64) -> Result<ArrayGeometry> {
    if !(edge > 0.0 && edge.is_finite()) {
        return Err(invalid(format!("edge must be positive, got {edge}")));
    }
    // alternate cube corners: edge 2*sqrt(2), centroid at the origin
    let s = edge / (2.0 * std::f64::consts::SQRT_2);
    let corners = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    ArrayGeometry::new(
        corners
            .iter()
            .map(|&[x, y, z]| center + Point3::new(x, y, z) * s)
            .collect(),
    )
}

/// Circumradius of a regular tetrahedron.
pub fn tetrahedron_circumradius(edge: f64) -> f64 {
    edge * (3.0f64 / 8.0).sqrt()
}

/// Uniform positions strictly inside the room, at least
/// [`MIC_EXCLUSION_RADIUS`] from every point in `avoid`.
pub fn sample_positions(room: &RoomSpec, n: usize, seed: u64, avoid: &[Point3]) -> Result<Vec<Point3>> {
    room.validate()?;
    if n == 0 {
        return Err(invalid("need at least one source position"));
    }
    let [a, b, c] = room.dimensions;
    (0..n)
        .map(|i| {
            let mut rng = trial_rng(seed, i, POSITION_STREAM);
            for _ in 0..10_000 {
                let p = Point3::new(rng.gen_range(0.0..a), rng.gen_range(0.0..b), rng.gen_range(0.0..c));
                let interior = p.x > 0.0 && p.y > 0.0 && p.z > 0.0;
                if interior && avoid.iter().all(|m| m.distance(p) >= MIC_EXCLUSION_RADIUS) {
                    return Ok(p);
                }
            }
            Err(invalid("could not place a source away from the microphones"))
        })
        .collect()
}

/// Array description; the shape is always a regular tetrahedron centred in the room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub edge: f64,
}

/// Signal band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandHz {
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for BandHz {
    fn default() -> Self {
        Self {
            f_min: synth::SYNTH_BAND_HZ.0,
            f_max: synth::SYNTH_BAND_HZ.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub room: RoomSpec,
    /// Reverberation times to simulate; defaults to the room's own value.
    #[serde(default)]
    pub rt60: Option<Vec<f64>>,
    pub array: ArraySpec,
    /// Number of random sources; mutually exclusive with `sources`.
    #[serde(default)]
    pub n_sources: Option<usize>,
    /// Explicit source positions instead of random ones.
    #[serde(default)]
    pub sources: Option<Vec<Point3>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta_r")]
    pub delta_r: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<GccMode>,
    #[serde(default)]
    pub band: BandHz,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub signal: SignalSource,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Use the paired signed-rank test instead of the rank-sum test.
    #[serde(default)]
    pub paired_wilcoxon: bool,
    #[serde(default = "default_histogram_bin")]
    pub histogram_bin: f64,
    /// Image-method order; derived from the reverberation time when absent.
    #[serde(default)]
    pub max_order: Option<usize>,
}

fn default_delta_r() -> Vec<f64> {
    vec![0.5]
}

fn default_modes() -> Vec<GccMode> {
    GccMode::ALL.to_vec()
}

fn default_sample_rate() -> f64 {
    44100.0
}

fn default_permutations() -> usize {
    10_000
}

fn default_histogram_bin() -> f64 {
    0.25
}

impl ExperimentConfig {
    /// Config with defaults for everything but the room, array and source count.
    pub fn new(room: RoomSpec, edge: f64, n_sources: usize) -> Self {
        Self {
            room,
            rt60: None,
            array: ArraySpec { edge },
            n_sources: Some(n_sources),
            sources: None,
            seed: 0,
            delta_r: default_delta_r(),
            modes: default_modes(),
            band: BandHz::default(),
            sample_rate: default_sample_rate(),
            signal: SignalSource::default(),
            permutations: default_permutations(),
            paired_wilcoxon: false,
            histogram_bin: default_histogram_bin(),
            max_order: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn rt60_values(&self) -> Vec<f64> {
        self.rt60.clone().unwrap_or_else(|| vec![self.room.rt60])
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        for &t in &self.rt60_values() {
            RoomSpec { rt60: t, ..self.room }.validate()?;
        }
        if self.rt60.as_ref().is_some_and(Vec::is_empty) {
            return Err(invalid("rt60 list is empty"));
        }
        match (&self.n_sources, &self.sources) {
            (Some(0), _) => return Err(invalid("n_sources must be at least 1")),
            (Some(_), Some(_)) => return Err(invalid("give either n_sources or sources, not both")),
            (None, None) => return Err(invalid("n_sources is required")),
            (None, Some(s)) if s.is_empty() => return Err(invalid("sources list is empty")),
            _ => {}
        }
        if self.delta_r.is_empty() || self.delta_r.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid("delta_r must be a non-empty list of positive pitches"));
        }
        if self.modes.is_empty() {
            return Err(invalid("modes list is empty"));
        }
        Band::from_hz(self.band.f_min, self.band.f_max)?;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {}", self.sample_rate)));
        }
        if self.band.f_max > self.sample_rate / 2.0 {
            return Err(invalid("band exceeds the Nyquist frequency"));
        }
        if self.permutations < 1000 {
            return Err(invalid(format!("permutations must be at least 1000, got {}", self.permutations)));
        }
        if !(self.histogram_bin.is_finite() && self.histogram_bin > 0.0) {
            return Err(invalid("histogram_bin must be positive"));
        }
        if !(self.array.edge.is_finite() && self.array.edge > 0.0) {
            return Err(invalid("array edge must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEstimate {
    pub mode: GccMode,
    pub estimate: Point3,
    pub error: f64,
    /// Distance from the estimate to the array centre.
    pub distance: f64,
}

/// One source localized under one reverberation time and grid pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub rt60: f64,
    pub delta_r: f64,
    pub true_pos: Point3,
    /// Distance from the source to the array centre.
    pub true_distance: f64,
    pub rho: f64,
    pub estimates: Vec<ModeEstimate>,
}

impl TrialResult {
    pub fn estimate(&self, mode: GccMode) -> Option<&ModeEstimate> {
        self.estimates.iter().find(|e| e.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub rt60: f64,
    pub delta_r: f64,
    pub mode: GccMode,
    /// `None` pools every bucket.
    pub bucket: Option<RhoBucket>,
    pub stats: Option<ErrorStats>,
    /// Fraction of trials whose estimate is closer to the array than the source.
    pub underestimation_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub rt60: f64,
    pub delta_r: f64,
    pub bucket: Option<RhoBucket>,
    pub mode_a: GccMode,
    pub mode_b: GccMode,
    pub wilcoxon_p: f64,
    pub deviance_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub rt60: f64,
    pub delta_r: f64,
    pub mode: GccMode,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub array: ArrayGeometry,
    pub r_m: f64,
    /// Ordered by reverberation time, then grid pitch, then trial.
    pub trials: Vec<TrialResult>,
    pub stats: Vec<StatsRow>,
    pub significance: Vec<SignificanceRow>,
    pub histogram: Vec<HistogramRow>,
}

fn bucket_label(b: Option<RhoBucket>) -> &'static str {
    b.map_or("all", RhoBucket::label)
}

fn in_bucket(t: &TrialResult, b: Option<RhoBucket>) -> bool {
    b.is_none_or(|b| RhoBucket::of(t.rho) == b)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let center = config.room.bounds().center();
    let array = tetrahedron_array(center, config.array.edge)?;
    let r_m = tetrahedron_circumradius(config.array.edge);
    let positions = match &config.sources {
        Some(s) => {
            if let Some(p) = s.iter().find(|p| !config.room.bounds().contains(**p)) {
                return Err(Error::PositionOutsideRoom(p.x, p.y, p.z));
            }
            s.clone()
        }
        None => sample_positions(&config.room, config.n_sources.unwrap_or(1), config.seed, array.mics())?,
    };
    let bank = SignalBank::new(config.signal.clone(), config.sample_rate)?;
    let band = Band::from_hz(config.band.f_min, config.band.f_max)?;
    let grids: Vec<Grid> = config
        .delta_r
        .iter()
        .map(|&d| build_grid(config.room.bounds(), d))
        .collect::<Result<_>>()?;
    let rt60s = config.rt60_values();

    let per_trial: Vec<Vec<TrialResult>> = positions
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let signal = bank.draw(&mut trial_rng(config.seed, i, SIGNAL_STREAM))?;
            run_trial(config, &array, &grids, &rt60s, band, i, p, &signal)
        })
        .collect::<Result<_>>()?;

    // regroup so that each (rt60, delta_r) block is contiguous
    let blocks = rt60s.len() * grids.len();
    let mut trials = Vec::with_capacity(blocks * positions.len());
    for b in 0..blocks {
        trials.extend(per_trial.iter().map(|t| t[b].clone()));
    }

    let mut report = ExperimentReport {
        config: config.clone(),
        array,
        r_m,
        trials,
        stats: Vec::new(),
        significance: Vec::new(),
        histogram: Vec::new(),
    };
    report.summarize()?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    config: &ExperimentConfig,
    array: &ArrayGeometry,
    grids: &[Grid],
    rt60s: &[f64],
    band: Band,
    index: usize,
    source: Point3,
    signal: &Signal,
) -> Result<Vec<TrialResult>> {
    let center = array.centroid();
    let true_distance = source.distance(center);
    let r_m = tetrahedron_circumradius(config.array.edge);
    let mut out = Vec::with_capacity(rt60s.len() * grids.len());
    for &rt60 in rt60s {
        let room = RoomSpec { rt60, ..config.room };
        let options = SimulationOptions {
            attenuate: false,
            max_order: config.max_order,
        };
        let mics = simulate_event(&room, source, array, signal, options)?;
        let spectra = PairSpectra::compute(&mics, array)?;
        for grid in grids {
            let setup = SrpSetup {
                spectra: &spectra,
                array,
                band,
                c: config.room.c,
                delta_r: grid.delta_r(),
            };
            let maps = compute_maps_with_spectra(grid, &setup, &config.modes)?;
            let estimates = maps
                .iter()
                .map(|m| {
                    let est = localize(m)?.estimate;
                    Ok(ModeEstimate {
                        mode: m.mode,
                        estimate: est,
                        error: est.distance(source),
                        distance: est.distance(center),
                    })
                })
                .collect::<Result<_>>()?;
            out.push(TrialResult {
                trial: index,
                rt60,
                delta_r: grid.delta_r(),
                true_pos: source,
                true_distance,
                rho: true_distance / r_m,
                estimates,
            });
        }
    }
    Ok(out)
}

impl ExperimentReport {
    /// Trials of one (rt60, delta_r) block.
    pub fn block(&self, rt60: f64, delta_r: f64) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(move |t| t.rt60 == rt60 && t.delta_r == delta_r)
    }

    /// Errors of `mode` in one block, optionally restricted to a distance bucket.
    pub fn errors(&self, rt60: f64, delta_r: f64, mode: GccMode, bucket: Option<RhoBucket>) -> Vec<f64> {
        self.block(rt60, delta_r)
            .filter(|t| in_bucket(t, bucket))
            .filter_map(|t| t.estimate(mode).map(|e| e.error))
            .collect()
    }

    pub fn stats_for(&self, rt60: f64, delta_r: f64, mode: GccMode, bucket: Option<RhoBucket>) -> Option<&StatsRow> {
        self.stats
            .iter()
            .find(|s| s.rt60 == rt60 && s.delta_r == delta_r && s.mode == mode && s.bucket == bucket)
    }

    fn summarize(&mut self) -> Result<()> {
        let cfg = &self.config;
        let buckets: Vec<Option<RhoBucket>> =
            std::iter::once(None).chain(RhoBucket::ALL.iter().copied().map(Some)).collect();
        let diagonal = Point3::from(cfg.room.dimensions).norm();
        let n_bins = (diagonal / cfg.histogram_bin).ceil() as usize;
        let mut test_index = 0u64;
        let (mut stats_rows, mut sig_rows, mut hist_rows) = (Vec::new(), Vec::new(), Vec::new());
        for rt60 in cfg.rt60_values() {
            for &delta_r in &cfg.delta_r {
                for &bucket in &buckets {
                    let in_b: Vec<&TrialResult> =
                        self.block(rt60, delta_r).filter(|t| in_bucket(t, bucket)).collect();
                    for &mode in &cfg.modes {
                        let errors = self.errors(rt60, delta_r, mode, bucket);
                        let under = in_b
                            .iter()
                            .filter(|t| t.estimate(mode).is_some_and(|e| e.distance < t.true_distance))
                            .count();
                        stats_rows.push(StatsRow {
                            rt60,
                            delta_r,
                            mode,
                            bucket,
                            stats: ErrorStats::from_errors(&errors).ok(),
                            underestimation_rate: (!in_b.is_empty()).then(|| under as f64 / in_b.len() as f64),
                        });
                    }
                    for (ia, &mode_a) in cfg.modes.iter().enumerate() {
                        for &mode_b in &cfg.modes[ia + 1..] {
                            test_index += 1;
                            let a = self.errors(rt60, delta_r, mode_a, bucket);
                            let b = self.errors(rt60, delta_r, mode_b, bucket);
                            if a.is_empty() {
                                continue;
                            }
                            let wilcoxon_p = if cfg.paired_wilcoxon {
                                wilcoxon_signed_rank(&a, &b)?
                            } else {
                                wilcoxon_rank_sum(&a, &b)?
                            };
                            let perm_seed = cfg.seed ^ test_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
                            sig_rows.push(SignificanceRow {
                                rt60,
                                delta_r,
                                bucket,
                                mode_a,
                                mode_b,
                                wilcoxon_p,
                                deviance_p: permutation_deviance_test(&a, &b, cfg.permutations, perm_seed)?,
                            });
                        }
                    }
                }
                for &mode in &cfg.modes {
                    let mut counts = vec![0usize; n_bins.max(1)];
                    for e in self.errors(rt60, delta_r, mode, None) {
                        let bin = ((e / cfg.histogram_bin) as usize).min(counts.len() - 1);
                        counts[bin] += 1;
                    }
                    for (i, count) in counts.into_iter().enumerate() {
                        hist_rows.push(HistogramRow {
                            rt60,
                            delta_r,
                            mode,
                            bin_lo: i as f64 * cfg.histogram_bin,
                            bin_hi: (i + 1) as f64 * cfg.histogram_bin,
                            count,
                        });
                    }
                }
            }
        }
        self.stats = stats_rows;
        self.significance = sig_rows;
        self.histogram = hist_rows;
        Ok(())
    }

    pub fn trials_csv(&self) -> String {
        let mut s = String::from(
            "trial,rt60,delta_r,mode,true_x,true_y,true_z,est_x,est_y,est_z,error,rho,true_distance,est_distance\n",
        );
        for t in &self.trials {
            for e in &t.estimates {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    t.trial,
                    t.rt60,
                    t.delta_r,
                    e.mode,
                    t.true_pos.x,
                    t.true_pos.y,
                    t.true_pos.z,
                    e.estimate.x,
                    e.estimate.y,
                    e.estimate.z,
                    e.error,
                    t.rho,
                    t.true_distance,
                    e.distance
                );
            }
        }
        s
    }

    pub fn stats_csv(&self) -> String {
        let mut s = String::from("rt60,delta_r,mode,bucket,n,mean_error,mean_deviation,underestimation_rate\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.stats {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.rt60,
                r.delta_r,
                r.mode,
                bucket_label(r.bucket),
                r.stats.map_or(0, |x| x.n),
                opt(r.stats.map(|x| x.mean_error)),
                opt(r.stats.map(|x| x.mean_deviation)),
                opt(r.underestimation_rate)
            );
        }
        s
    }

    pub fn significance_csv(&self) -> String {
        let test = if self.config.paired_wilcoxon {
            "signed_rank_p"
        } else {
            "rank_sum_p"
        };
        let mut s = format!("rt60,delta_r,bucket,mode_a,mode_b,{test},deviance_p\n");
        for r in &self.significance {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.rt60,
                r.delta_r,
                bucket_label(r.bucket),
                r.mode_a,
                r.mode_b,
                r.wilcoxon_p,
                r.deviance_p
            );
        }
        s
    }

    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("rt60,delta_r,mode,trial,true_distance,est_distance\n");
        for t in &self.trials {
            for e in &t.estimates {
                let _ = writeln!(s, "{},{},{},{},{},{}", t.rt60, t.delta_r, e.mode, t.trial, t.true_distance, e.distance);
            }
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("rt60,delta_r,mode,bin_lo,bin_hi,count\n");
        for r in &self.histogram {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.rt60, r.delta_r, r.mode, r.bin_lo, r.bin_hi, r.count);
        }
        s
    }

    /// Writes `trials.csv`, `stats.csv`, `significance.csv`, `scatter.csv` and
    /// `histogram.csv` into an existing directory.
    pub fn write_csv_files(&self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output directory {} does not exist", dir.display()),
            )));
        }
        fs::write(dir.join("trials.csv"), self.trials_csv())?;
        fs::write(dir.join("stats.csv"), self.stats_csv())?;
        fs::write(dir.join("significance.csv"), self.significance_csv())?;
        fs::write(dir.join("scatter.csv"), self.scatter_csv())?;
        fs::write(dir.join("histogram.csv"), self.histogram_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SoundSpeed;

    fn room() -> RoomSpec {
        RoomSpec::new([8.0, 10.0, 4.0], 0.0, SoundSpeed::default()).unwrap()
    }

    #[test]
    fn tetrahedron_edges_and_centroid() {
        let c = Point3::new(4.0, 5.0, 2.0);
        for edge in [0.5, 3.0] {
            let a = tetrahedron_array(c, edge).unwrap();
            for (k, l) in a.pairs() {
                assert!((a.mics()[k].distance(a.mics()[l]) - edge).abs() < 1e-12);
            }
            assert!(a.centroid().distance(c) < 1e-12);
            for m in a.mics() {
                assert!((m.distance(c) - tetrahedron_circumradius(edge)).abs() < 1e-12);
            }
        }
        assert!((tetrahedron_circumradius(3.0) - 1.837117).abs() < 1e-6);
        assert!(tetrahedron_array(c, 0.0).is_err());
    }

    #[test]
    fn positions_reproducible_inside_and_away_from_mics() {
        let array = tetrahedron_array(Point3::new(4.0, 5.0, 2.0), 0.5).unwrap();
        let a = sample_positions(&room(), 500, 9, array.mics()).unwrap();
        assert_eq!(a, sample_positions(&room(), 500, 9, array.mics()).unwrap());
        assert_ne!(a, sample_positions(&room(), 500, 10, array.mics()).unwrap());
        // prefixes agree because each index has its own stream
        assert_eq!(a[..20], sample_positions(&room(), 20, 9, array.mics()).unwrap()[..]);
        for p in &a {
            assert!(p.x > 0.0 && p.x < 8.0 && p.y > 0.0 && p.y < 10.0 && p.z > 0.0 && p.z < 4.0);
            assert!(array.mics().iter().all(|m| m.distance(*p) >= MIC_EXCLUSION_RADIUS));
        }
    }

    #[test]
    fn config_json_roundtrip_and_rejection() {
        let text = r#"{"room": {"dimensions": [8, 10, 4]}, "array": {"edge": 0.5}, "n_sources": 3,
            "rt60": [0.0, 0.6], "delta_r": [1.0], "signal": {"kind": "noise", "duration": 0.1}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.rt60_values(), vec![0.0, 0.6]);
        assert_eq!(cfg.modes, GccMode::ALL.to_vec());
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let unknown = text.replace("\"n_sources\"", "\"n_source\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let zero = text.replace("\"n_sources\": 3", "\"n_sources\": 0");
        assert!(ExperimentConfig::from_json(&zero).is_err());
    }

    #[test]
    fn small_run_is_consistent() {
        let mut cfg = ExperimentConfig::new(room(), 0.5, 4);
        cfg.sample_rate = 16000.0;
        cfg.delta_r = vec![1.0];
        cfg.signal = SignalSource::Noise { duration: 0.05 };
        cfg.permutations = 1000;
        cfg.seed = 3;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.trials.len(), 4);
        for t in &report.trials {
            assert_eq!(t.estimates.len(), 3);
            for e in &t.estimates {
                assert!((e.error - e.estimate.distance(t.true_pos)).abs() < 1e-12);
            }
        }
        // pooled mean equals the count-weighted bucket means
        for &mode in &cfg.modes {
            let all = report.stats_for(0.0, 1.0, mode, None).unwrap().stats.unwrap();
            let mut weighted = 0.0;
            for b in RhoBucket::ALL {
                if let Some(s) = report.stats_for(0.0, 1.0, mode, Some(b)).unwrap().stats {
                    weighted += s.mean_error * s.n as f64;
                }
            }
            assert!((weighted / all.n as f64 - all.mean_error).abs() < 1e-12);
        }
        let total: usize = report.histogram.iter().filter(|h| h.mode == GccMode::Standard).map(|h| h.count).sum();
        assert_eq!(total, 4);
        assert_eq!(report.trials_csv(), run_experiment(&cfg).unwrap().trials_csv());
    }
}
