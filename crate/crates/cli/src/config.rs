//! JSON payloads for the `rir` and `map` subcommands.

use serde::Deserialize;
use srp_phat::experiment::{tetrahedron_array, ArraySpec, BandHz, SignalSource};
use srp_phat::roomsim::RoomSpec;
use srp_phat::{ArrayGeometry, GccMode, Point3};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RirConfig {
    pub room: RoomSpec,
    pub source: Point3,
    pub mic: Point3,
    #[serde(default = "default_rir_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub max_order: Option<usize>,
}

fn default_rir_rate() -> f64 {
    16000.0
}

/// Either a regular tetrahedron centred in the room or explicit positions.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ArrayConfig {
    Tetrahedron(ArraySpec),
    Mics(MicList),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicList {
    pub mics: Vec<Point3>,
}

impl ArrayConfig {
    pub fn build(&self, room: &RoomSpec) -> srp_phat::Result<ArrayGeometry> {
        match self {
            ArrayConfig::Tetrahedron(spec) => tetrahedron_array(room.bounds().center(), spec.edge),
            ArrayConfig::Mics(list) => ArrayGeometry::new(list.mics.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub room: RoomSpec,
    pub array: ArrayConfig,
    pub source: Point3,
    #[serde(default = "default_delta_r")]
    pub delta_r: f64,
    #[serde(default = "default_mode")]
    pub mode: GccMode,
    #[serde(default)]
    pub band: BandHz,
    #[serde(default = "default_map_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub signal: SignalSource,
    #[serde(default)]
    pub seed: u64,
    /// Height of the exported slice; the source height when absent.
    #[serde(default)]
    pub slice_z: Option<f64>,
    #[serde(default)]
    pub max_order: Option<usize>,
}

fn default_delta_r() -> f64 {
    0.5
}

fn default_mode() -> GccMode {
    GccMode::BandLimited
}

fn default_map_rate() -> f64 {
    44100.0
}
