//! Grids, SRP maps and peak picking.
//!
//! For every grid point and every unordered microphone pair, the pair frame
//! gives the TDOA-gradient norm, which in turn caps the correlation band so
//! that a step of `delta_r` cannot skip over a correlation peak. The pair
//! correlation is then evaluated at the point's TDOA and summed.
//!
//! Compared with the textbook double sum over all `(k, l)`, self-pairs and
//! the mirrored `(l, k)` terms are left out, as is the `2*pi` prefactor. None
//! of these change the location of the maximum.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gcc::{self, Band, CrossSpectrumPhat, GccMode, Signal};
use crate::geometry::{self, ArrayGeometry, Point3, SoundSpeed};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point3,
    pub max: Point3,
}

impl Bounds {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        let b = Self { min, max };
        let e = b.extent();
        if !(min.is_finite() && max.is_finite() && e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return Err(invalid(format!("box extents must be positive, got {min:?}..{max:?}")));
        }
        Ok(b)
    }

    /// Box `[0, dims]` on every axis.
    pub fn from_dimensions(dims: [f64; 3]) -> Result<Self> {
        Self::new(Point3::ORIGIN, dims.into())
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        self.min.midpoint(self.max)
    }

    pub fn contains(&self, p: Point3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

/// Regular lattice of cell centres, ordered with `x` varying fastest, then
/// `y`, then `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Bounds,
    delta_r: f64,
    dims: [usize; 3],
    origin: Point3,
    points: Vec<Point3>,
}

impl Grid {
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn delta_r(&self) -> f64 {
        self.delta_r
    }

    /// Cells per axis `[nx, ny, nz]`.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [nx, ny, _] = self.dims;
        (iz * ny + iy) * nx + ix
    }

    pub fn cell(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Index of the grid point closest to `p`.
    pub fn nearest(&self, p: Point3) -> usize {
        let axis = |v: f64, o: f64, n: usize| -> usize {
            let i = ((v - o) / self.delta_r).round();
            i.clamp(0.0, (n - 1) as f64) as usize
        };
        self.index(
            axis(p.x, self.origin.x, self.dims[0]),
            axis(p.y, self.origin.y, self.dims[1]),
            axis(p.z, self.origin.z, self.dims[2]),
        )
    }
}

/// Cell-centre lattice of pitch `delta_r` inside `bounds`; `floor(extent / delta_r)`
/// cells per axis, centred in the box.
pub fn build_grid(bounds: Bounds, delta_r: f64) -> Result<Grid> {
    if !(delta_r > 0.0 && delta_r.is_finite()) {
        return Err(invalid(format!("delta_r must be positive, got {delta_r}")));
    }
    let e = bounds.extent();
    let count = |extent: f64| (extent / delta_r * (1.0 + 1e-12)).floor() as usize;
    let dims = [count(e.x), count(e.y), count(e.z)];
    if dims.contains(&0) {
        return Err(Error::EmptyGrid);
    }
    let first = |lo: f64, extent: f64, n: usize| lo + 0.5 * (extent - n as f64 * delta_r) + 0.5 * delta_r;
    let origin = Point3::new(
        first(bounds.min.x, e.x, dims[0]),
        first(bounds.min.y, e.y, dims[1]),
        first(bounds.min.z, e.z, dims[2]),
    );
    let mut points = Vec::with_capacity(dims.iter().product());
    for iz in 0..dims[2] {
        for iy in 0..dims[1] {
            for ix in 0..dims[0] {
                points.push(Point3::new(
                    origin.x + ix as f64 * delta_r,
                    origin.y + iy as f64 * delta_r,
                    origin.z + iz as f64 * delta_r,
                ));
            }
        }
    }
    Ok(Grid {
        bounds,
        delta_r,
        dims,
        origin,
        points,
    })
}

/// Whitened cross-spectra for every unordered microphone pair `k < l`.
#[derive(Debug, Clone)]
pub struct PairSpectra {
    pairs: Vec<(usize, usize)>,
    spectra: Vec<CrossSpectrumPhat>,
}

impl PairSpectra {
    pub fn compute(signals: &[Signal], array: &ArrayGeometry) -> Result<Self> {
        if signals.len() != array.len() {
            return Err(invalid(format!(
                "{} signals for {} microphones",
                signals.len(),
                array.len()
            )));
        }
        let fs = signals[0].sample_rate();
        if let Some(s) = signals.iter().find(|s| s.sample_rate() != fs) {
            return Err(Error::SampleRateMismatch(fs, s.sample_rate()));
        }
        let pairs = array.pairs();
        let spectra = pairs
            .par_iter()
            .map(|&(k, l)| gcc::pair_spectrum(&signals[k], &signals[l]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, spectra })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn spectra(&self) -> &[CrossSpectrumPhat] {
        &self.spectra
    }

    fn bin_spacing(&self) -> f64 {
        self.spectra[0].bin_spacing()
    }

    fn nyquist(&self) -> f64 {
        self.spectra[0].nyquist()
    }
}

/// Everything needed to evaluate SRP values besides the point itself.
#[derive(Debug, Clone, Copy)]
pub struct SrpSetup<'a> {
    pub spectra: &'a PairSpectra,
    pub array: &'a ArrayGeometry,
    pub band: Band,
    pub c: SoundSpeed,
    pub delta_r: f64,
}

impl SrpSetup<'_> {
    fn validate(&self) -> Result<()> {
        if self.spectra.pairs.len() != self.array.pairs().len() {
            return Err(invalid("one spectrum per unordered microphone pair required"));
        }
        if !(self.delta_r > 0.0) {
            return Err(invalid("delta_r must be positive"));
        }
        if self.band.omega_max > self.spectra.nyquist() {
            return Err(invalid(format!(
                "band upper edge {} Hz exceeds Nyquist {} Hz",
                self.band.f_max(),
                self.spectra.nyquist() / (2.0 * std::f64::consts::PI)
            )));
        }
        Ok(())
    }
}

/// SRP value of one point in one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpPoint {
    pub value: f64,
    /// Smallest upper integration limit applied across pairs, rad/s.
    pub omega_hat_min: f64,
    pub condition_violated: bool,
}

impl SrpPoint {
    fn new(band: Band) -> Self {
        Self {
            value: 0.0,
            omega_hat_min: band.omega_max,
            condition_violated: false,
        }
    }
}

/// Per-pair correlation values at one point for the three modes.
#[derive(Debug, Clone, Copy)]
struct PairTerms {
    omega_hat: f64,
    violated: bool,
    standard: Option<f64>,
    limited: Option<f64>,
    normalized: Option<f64>,
}

fn pair_terms(setup: &SrpSetup<'_>, pair_index: usize, point: Point3, want_full: bool) -> Result<PairTerms> {
    let (k, l) = setup.spectra.pairs[pair_index];
    let spec = &setup.spectra.spectra[pair_index];
    let mics = setup.array.mics();
    let band = setup.band;
    let frame = geometry::pair_frame(mics[k], mics[l], point)?;
    let grad = geometry::tdoa_gradient_norm(frame, setup.c);
    let limit = geometry::max_alias_free_frequency(grad, setup.delta_r, band, setup.spectra.bin_spacing())?;
    let tau = geometry::tdoa(mics[k], mics[l], point, setup.c)?;
    let omega_hat = limit.omega_hat_max;
    let mut violated = limit.condition_violated;

    let mut eval = |cutoffs: &[f64], out: &mut [f64]| -> Result<bool> {
        match gcc::gcc_eval_cutoffs(spec, band.omega_min, cutoffs, tau, out) {
            Ok(()) => Ok(true),
            Err(Error::EmptyBand { .. }) => {
                violated = true;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    };

    let (limited, full) = if omega_hat < band.omega_max {
        if want_full {
            let mut out = [0.0; 2];
            if eval(&[omega_hat, band.omega_max], &mut out)? {
                (Some(out[0]), Some(out[1]))
            } else {
                let mut full = [0.0];
                let ok = eval(&[band.omega_max], &mut full)?;
                (None, ok.then_some(full[0]))
            }
        } else {
            let mut out = [0.0];
            (eval(&[omega_hat], &mut out)?.then_some(out[0]), None)
        }
    } else {
        let mut out = [0.0];
        let v = eval(&[band.omega_max], &mut out)?.then_some(out[0]);
        (v, v)
    };
    let normalized = limited.map(|v| gcc::normalization_factor(band, omega_hat) * v);
    Ok(PairTerms {
        omega_hat,
        violated,
        standard: full,
        limited,
        normalized,
    })
}

/// SRP values of `point` for each requested mode, from one pass per pair.
pub fn srp_values(setup: &SrpSetup<'_>, point: Point3, modes: &[GccMode]) -> Result<Vec<SrpPoint>> {
    setup.validate()?;
    srp_values_unchecked(setup, point, modes)
}

fn srp_values_unchecked(setup: &SrpSetup<'_>, point: Point3, modes: &[GccMode]) -> Result<Vec<SrpPoint>> {
    let want_full = modes.contains(&GccMode::Standard);
    let mut out: Vec<SrpPoint> = modes.iter().map(|_| SrpPoint::new(setup.band)).collect();
    for p in 0..setup.spectra.pairs.len() {
        let terms = pair_terms(setup, p, point, want_full)?;
        for (slot, mode) in out.iter_mut().zip(modes) {
            let (term, omega) = match mode {
                GccMode::Standard => (terms.standard, setup.band.omega_max),
                GccMode::BandLimited => (terms.limited, terms.omega_hat),
                GccMode::BandLimitedNormalized => (terms.normalized, terms.omega_hat),
            };
            match term {
                Some(v) => slot.value += v,
                None => slot.condition_violated = true,
            }
            if *mode != GccMode::Standard {
                slot.condition_violated |= terms.violated;
            }
            slot.omega_hat_min = slot.omega_hat_min.min(omega);
        }
    }
    Ok(out)
}

/// SRP value of a single point in one mode.
pub fn srp_value(setup: &SrpSetup<'_>, point: Point3, mode: GccMode) -> Result<SrpPoint> {
    Ok(srp_values(setup, point, &[mode])?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrpMap {
    pub grid: Grid,
    pub mode: GccMode,
    pub values: Vec<f64>,
    /// Per point, the smallest upper correlation limit applied across pairs, Hz.
    pub applied_f_max: Vec<f64>,
    pub condition_violated: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationResult {
    pub estimate: Point3,
    pub peak_value: f64,
    pub peak_index: usize,
}

/// Maps for several modes over one grid, sharing spectra and per-pair work.
pub fn compute_maps_with_spectra(grid: &Grid, setup: &SrpSetup<'_>, modes: &[GccMode]) -> Result<Vec<SrpMap>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    setup.validate()?;
    let per_point = grid
        .points()
        .par_iter()
        .map(|&p| srp_values_unchecked(setup, p, modes))
        .collect::<Result<Vec<_>>>()?;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(modes
        .iter()
        .enumerate()
        .map(|(m, &mode)| SrpMap {
            grid: grid.clone(),
            mode,
            values: per_point.iter().map(|v| v[m].value).collect(),
            applied_f_max: per_point.iter().map(|v| v[m].omega_hat_min / two_pi).collect(),
            condition_violated: per_point.iter().map(|v| v[m].condition_violated).collect(),
        })
        .collect())
}

/// Maps for several modes from raw microphone signals.
pub fn compute_maps(
    grid: &Grid,
    signals: &[Signal],
    array: &ArrayGeometry,
    modes: &[GccMode],
    band: Band,
    c: SoundSpeed,
) -> Result<Vec<SrpMap>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let spectra = PairSpectra::compute(signals, array)?;
    let setup = SrpSetup {
        spectra: &spectra,
        array,
        band,
        c,
        delta_r: grid.delta_r(),
    };
    compute_maps_with_spectra(grid, &setup, modes)
}

pub fn compute_map(
    grid: &Grid,
    signals: &[Signal],
    array: &ArrayGeometry,
    mode: GccMode,
    band: Band,
    c: SoundSpeed,
) -> Result<SrpMap> {
    Ok(compute_maps(grid, signals, array, &[mode], band, c)?.remove(0))
}

/// Grid point with the largest SRP value; ties go to the lowest index.
pub fn localize(map: &SrpMap) -> Result<LocalizationResult> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in map.values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (peak_index, peak_value) = best.ok_or(Error::EmptyGrid)?;
    Ok(LocalizationResult {
        estimate: map.grid.points()[peak_index],
        peak_value,
        peak_index,
    })
}

impl SrpMap {
    /// Columns `x,y,z,value,f_max_applied,condition_violated`, one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,z,value,f_max_applied,condition_violated")?;
        for (i, p) in self.grid.points().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.x,
                p.y,
                p.z,
                self.values[i],
                self.applied_f_max[i],
                u8::from(self.condition_violated[i])
            )?;
        }
        Ok(())
    }

    /// Horizontal slice at the grid layer nearest to `z`: a header row of x
    /// coordinates, then one row per y holding `y` followed by the values.
    pub fn write_slice_csv<W: Write>(&self, z: f64, mut w: W) -> std::io::Result<()> {
        let [nx, ny, _] = self.grid.dims();
        let iz = self.grid.cell(self.grid.nearest(Point3::new(0.0, 0.0, z)))[2];
        let pts = self.grid.points();
        write!(w, "y\\x")?;
        for ix in 0..nx {
            write!(w, ",{}", pts[self.grid.index(ix, 0, iz)].x)?;
        }
        writeln!(w)?;
        for iy in 0..ny {
            write!(w, "{}", pts[self.grid.index(0, iy, iz)].y)?;
            for ix in 0..nx {
                write!(w, ",{}", self.values[self.grid.index(ix, iy, iz)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
