//! Positions, propagation delays and TDOA mathematics.
//!
//! The central quantity is the norm of the TDOA gradient of a microphone pair
//! at a candidate position. Moving one grid step `delta_r` changes the lag at
//! which that pair's correlation is sampled by at most `grad_norm * delta_r`,
//! so the correlation must not carry energy above `pi / (grad_norm * delta_r)`
//! if its peaks are to survive the sampling.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gcc::Band;

/// Distance under which a point is treated as sitting on a microphone.
pub const MIC_GUARD_RADIUS: f64 = 1e-9;

const MIN_MIC_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn midpoint(self, other: Point3) -> Point3 {
        (self + other) * 0.5
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, rhs: f64) -> Point3 {
        Point3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3::new(x, y, z)
    }
}

/// Speed of sound in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SoundSpeed(f64);

impl SoundSpeed {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(invalid(format!("sound speed must be positive, got {c}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for SoundSpeed {
    fn default() -> Self {
        Self(343.0)
    }
}

impl TryFrom<f64> for SoundSpeed {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

impl From<SoundSpeed> for f64 {
    fn from(c: SoundSpeed) -> f64 {
        c.0
    }
}

/// Ordered set of microphone positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    mics: Vec<Point3>,
}

impl ArrayGeometry {
    pub fn new(mics: Vec<Point3>) -> Result<Self> {
        if mics.len() < 2 {
            return Err(invalid("an array needs at least two microphones"));
        }
        if let Some(p) = mics.iter().find(|p| !p.is_finite()) {
            return Err(invalid(format!("non-finite microphone position {p:?}")));
        }
        for (k, a) in mics.iter().enumerate() {
            for b in &mics[k + 1..] {
                if a.distance(*b) <= MIN_MIC_SEPARATION {
                    return Err(Error::DegeneratePair);
                }
            }
        }
        Ok(Self { mics })
    }

    pub fn mics(&self) -> &[Point3] {
        &self.mics
    }

    pub fn len(&self) -> usize {
        self.mics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mics.is_empty()
    }

    /// Unordered pairs `(k, l)` with `k < l`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let k = self.mics.len();
        (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
    }

    pub fn centroid(&self) -> Point3 {
        let sum = self.mics.iter().fold(Point3::ORIGIN, |acc, &p| acc + p);
        sum * (1.0 / self.mics.len() as f64)
    }

    /// Largest distance from the centroid to a microphone.
    pub fn radius(&self) -> f64 {
        let c = self.centroid();
        self.mics.iter().map(|m| m.distance(c)).fold(0.0, f64::max)
    }
}

/// Position of a candidate point relative to the midpoint of a microphone pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFrame {
    /// Distance from the pair midpoint to the point.
    pub r: f64,
    /// Half the inter-microphone distance.
    pub r_m: f64,
    /// Cosine of the angle between the midpoint-to-point vector and the
    /// midpoint-to-`mic_k` vector.
    pub cos_phi: f64,
}

impl PairFrame {
    pub fn rho(&self) -> f64 {
        self.r / self.r_m
    }

    /// Distances from the point to `mic_k` and `mic_l`.
    fn mic_distances(&self) -> (f64, f64) {
        let (rho, c) = (self.rho(), self.cos_phi);
        let s = 1.0 - c * c;
        let d_k = ((rho - c) * (rho - c) + s).sqrt() * self.r_m;
        let d_l = ((rho + c) * (rho + c) + s).sqrt() * self.r_m;
        (d_k, d_l)
    }
}

pub fn propagation_delay(point: Point3, mic: Point3, c: SoundSpeed) -> f64 {
    point.distance(mic) / c.get()
}

/// `(|point - mic_l| - |point - mic_k|) / c`: positive when the wavefront
/// reaches `mic_k` first.
pub fn tdoa(mic_k: Point3, mic_l: Point3, point: Point3, c: SoundSpeed) -> Result<f64> {
    check_pair(mic_k, mic_l)?;
    Ok((point.distance(mic_l) - point.distance(mic_k)) / c.get())
}

pub fn pair_frame(mic_k: Point3, mic_l: Point3, point: Point3) -> Result<PairFrame> {
    check_pair(mic_k, mic_l)?;
    let m = mic_k.midpoint(mic_l);
    let to_point = point - m;
    let to_k = mic_k - m;
    let r = to_point.norm();
    let r_m = to_k.norm();
    let cos_phi = if r == 0.0 {
        0.0
    } else {
        (to_point.dot(to_k) / (r * r_m)).clamp(-1.0, 1.0)
    };
    Ok(PairFrame { r, r_m, cos_phi })
}

fn check_pair(mic_k: Point3, mic_l: Point3) -> Result<()> {
    if mic_k.distance(mic_l) <= MIN_MIC_SEPARATION {
        Err(Error::DegeneratePair)
    } else {
        Ok(())
    }
}

/// Closed-form norm of the TDOA gradient, in s/m. Lies in `[0, 2/c]`.
///
/// The expression is singular on the microphones themselves; within
/// [`MIC_GUARD_RADIUS`] of either one the supremum `2/c` is returned.
pub fn tdoa_gradient_norm(frame: PairFrame, c: SoundSpeed) -> f64 {
    let c = c.get();
    let sup = 2.0 / c;
    let (d_k, d_l) = frame.mic_distances();
    if d_k < MIC_GUARD_RADIUS || d_l < MIC_GUARD_RADIUS {
        return sup;
    }
    let rho = frame.rho();
    // (rho^2 + 1)^2 - 4 rho^2 cos^2(phi) factors into (d_k d_l / r_m^2)^2.
    let denom = d_k * d_l / (frame.r_m * frame.r_m);
    let radicand = 2.0 - 2.0 * (rho * rho - 1.0) / denom;
    (radicand.max(0.0).sqrt() / c).min(sup)
}

/// Upper bound on the lag step between neighbouring grid points.
pub fn sampling_interval_bound(grad_norm: f64, delta_r: f64) -> Result<f64> {
    if !(delta_r > 0.0) {
        return Err(invalid(format!("delta_r must be positive, got {delta_r}")));
    }
    if !(grad_norm >= 0.0) {
        return Err(invalid(format!("gradient norm must be non-negative, got {grad_norm}")));
    }
    Ok(grad_norm * delta_r)
}

/// Upper integration limit for one (point, pair) evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliasFreeLimit {
    /// Applied upper limit in rad/s.
    pub omega_hat_max: f64,
    /// The alias-free condition could not be met inside the band and the limit
    /// was floored at `omega_min + floor_width`.
    pub condition_violated: bool,
}

/// Largest upper frequency (rad/s) for which a grid of pitch `delta_r` samples
/// the pair correlation without aliasing, clamped into the signal band.
///
/// When the rule falls below `band.omega_min + floor_width` the result is
/// floored there and flagged; `floor_width` is normally one DFT bin.
pub fn max_alias_free_frequency(
    grad_norm: f64,
    delta_r: f64,
    band: Band,
    floor_width: f64,
) -> Result<AliasFreeLimit> {
    let step = sampling_interval_bound(grad_norm, delta_r)?;
    if step == 0.0 {
        return Ok(AliasFreeLimit {
            omega_hat_max: band.omega_max,
            condition_violated: false,
        });
    }
    let rule = PI / step;
    let floor = (band.omega_min + floor_width.max(0.0)).min(band.omega_max);
    if rule < floor {
        Ok(AliasFreeLimit {
            omega_hat_max: floor,
            condition_violated: true,
        })
    } else {
        Ok(AliasFreeLimit {
            omega_hat_max: rule.min(band.omega_max),
            condition_violated: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolutionScenario {
    /// Sources expected between the microphones (`r <~ r_m`).
    Distributed,
    /// Sources no closer than `min_rho` half-apertures from the pair midpoint.
    FarField { min_rho: f64 },
}

/// Grid pitch (m) below which no aliasing occurs for a signal reaching
/// `omega_max`. The returned value is a strict upper bound.
pub fn required_resolution(scenario: ResolutionScenario, omega_max: f64, c: SoundSpeed) -> Result<f64> {
    if !(omega_max > 0.0) {
        return Err(invalid(format!("omega_max must be positive, got {omega_max}")));
    }
    let c = c.get();
    match scenario {
        ResolutionScenario::Distributed => Ok(c * PI / (2.0 * omega_max)),
        ResolutionScenario::FarField { min_rho } => {
            if !(min_rho > 1.0) {
                return Err(Error::InvalidRho(min_rho));
            }
            if min_rho.is_infinite() {
                return Ok(f64::INFINITY);
            }
            let rho2 = min_rho * min_rho;
            let shrink = (1.0 - (rho2 - 1.0) / (rho2 + 1.0)).sqrt();
            Ok(c * PI / (SQRT_2 * omega_max) / shrink)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: f64 = 343.0;

    fn c() -> SoundSpeed {
        SoundSpeed::default()
    }

    #[test]
    fn delay_basics() {
        let mic = Point3::new(1.0, -2.0, 0.5);
        assert_eq!(propagation_delay(mic, mic, c()), 0.0);
        let p = mic + Point3::new(0.0, 3.43, 0.0);
        assert!((propagation_delay(p, mic, c()) - 0.01).abs() < 1e-15);
        let shift = Point3::new(7.0, 1.5, -3.0);
        let a = propagation_delay(p, mic, c());
        let b = propagation_delay(p + shift, mic + shift, c());
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn tdoa_examples() {
        let k = Point3::new(0.0, 0.0, 0.0);
        let l = Point3::new(1.0, 0.0, 0.0);
        assert_eq!(tdoa(k, l, Point3::new(0.5, 2.0, -1.0), c()).unwrap(), 0.0);
        assert!((tdoa(k, l, k, c()).unwrap() - 1.0 / C).abs() < 1e-15);
        assert!(matches!(tdoa(k, k, l, c()), Err(Error::DegeneratePair)));
    }

    #[test]
    fn pair_frame_examples() {
        let k = Point3::new(0.5, 0.0, 0.0);
        let l = Point3::new(-0.5, 0.0, 0.0);
        let f = pair_frame(k, l, Point3::ORIGIN).unwrap();
        assert_eq!((f.r, f.r_m, f.cos_phi), (0.0, 0.5, 0.0));
        let f = pair_frame(k, l, Point3::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!((f.r, f.r_m, f.cos_phi), (2.0, 0.5, 1.0));
        let f = pair_frame(k, l, Point3::new(0.0, 3.0, 0.0)).unwrap();
        assert_eq!((f.r, f.r_m, f.cos_phi), (3.0, 0.5, 0.0));
    }

    #[test]
    fn gradient_special_values() {
        let at_center = PairFrame { r: 0.0, r_m: 0.5, cos_phi: 0.0 };
        assert_eq!(tdoa_gradient_norm(at_center, c()), 2.0 / C);
        // the angle is irrelevant at the centre
        for cos_phi in [-1.0, -0.3, 0.7, 1.0] {
            let f = PairFrame { cos_phi, ..at_center };
            assert!((tdoa_gradient_norm(f, c()) - 2.0 / C).abs() < 1e-15);
        }
        let broadside = PairFrame { r: 0.5, r_m: 0.5, cos_phi: 0.0 };
        assert!((tdoa_gradient_norm(broadside, c()) - SQRT_2 / C).abs() < 1e-15);
        let far_endfire = PairFrame { r: 0.5e4, r_m: 0.5, cos_phi: 1.0 };
        assert!(tdoa_gradient_norm(far_endfire, c()) < 1e-3 / C);
    }

    #[test]
    fn gradient_on_microphone_is_supremum() {
        let k = Point3::new(0.5, 0.0, 0.0);
        let l = Point3::new(-0.5, 0.0, 0.0);
        for p in [k, l, k + Point3::new(1e-10, 0.0, 0.0)] {
            let f = pair_frame(k, l, p).unwrap();
            assert_eq!(tdoa_gradient_norm(f, c()), 2.0 / C);
        }
    }

    #[test]
    fn interval_bound() {
        let v = sampling_interval_bound(2.0 / C, 0.5).unwrap();
        assert!((v - 1.0 / C).abs() < 1e-18);
        assert_eq!(sampling_interval_bound(0.0, 0.5).unwrap(), 0.0);
        assert!(sampling_interval_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn alias_free_frequency_examples() {
        let wide = Band::new(0.0, 2.0 * PI * 20_000.0).unwrap();
        let lim = max_alias_free_frequency(2.0 / C, 0.5, wide, 1.0).unwrap();
        assert!((lim.omega_hat_max / (2.0 * PI) - 171.5).abs() < 1e-9);
        assert!(!lim.condition_violated);

        let band = Band::from_hz(100.0, 6000.0).unwrap();
        let lim = max_alias_free_frequency(0.0, 0.5, band, 1.0).unwrap();
        assert_eq!(lim.omega_hat_max, band.omega_max);
        let lim = max_alias_free_frequency(1e-6, 0.5, band, 1.0).unwrap();
        assert_eq!(lim.omega_hat_max, band.omega_max);

        // rule below omega_min: floored and flagged
        let lim = max_alias_free_frequency(2.0 / C, 5.0, band, 3.0).unwrap();
        assert!(lim.condition_violated);
        assert_eq!(lim.omega_hat_max, band.omega_min + 3.0);
    }

    #[test]
    fn resolution_examples() {
        let omega = 2.0 * PI * 171.5;
        let d = required_resolution(ResolutionScenario::Distributed, omega, c()).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let far = required_resolution(ResolutionScenario::FarField { min_rho: 1e8 }, omega, c()).unwrap();
        assert!(far > 1e6);
        assert!(matches!(
            required_resolution(ResolutionScenario::FarField { min_rho: 1.0 }, omega, c()),
            Err(Error::InvalidRho(_))
        ));
    }

    #[test]
    fn far_field_resolution_matches_bound_inversion() {
        // Independent route: evaluate the broadside gradient at min_rho and
        // invert grad * dr = pi / omega.
        let omega = 2.0 * PI * 1000.0;
        for rho in [1.0 + 1e-9, 1.5, 3.0, 10.0, 57.0] {
            let dr = required_resolution(ResolutionScenario::FarField { min_rho: rho }, omega, c()).unwrap();
            let grad = tdoa_gradient_norm(PairFrame { r: rho, r_m: 1.0, cos_phi: 0.0 }, c());
            let expected = PI / (omega * grad);
            assert!((dr - expected).abs() / expected < 1e-12, "rho={rho}");
        }
        // rho -> 1+ approaches the broadside value sqrt(2)/c, i.e. sqrt(2) times
        // the distributed bound
        let near = required_resolution(ResolutionScenario::FarField { min_rho: 1.0 + 1e-12 }, omega, c()).unwrap();
        let dist = required_resolution(ResolutionScenario::Distributed, omega, c()).unwrap();
        assert!((near / dist - SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn array_validation() {
        assert!(ArrayGeometry::new(vec![Point3::ORIGIN]).is_err());
        assert!(matches!(
            ArrayGeometry::new(vec![Point3::ORIGIN, Point3::new(1e-7, 0.0, 0.0)]),
            Err(Error::DegeneratePair)
        ));
        let a = ArrayGeometry::new(vec![
            Point3::ORIGIN,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        assert_eq!(a.pairs(), vec![(0, 1), (0, 2), (1, 2)]);
    }
}
