use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srp_phat::experiment::{synth, tetrahedron_array};
use srp_phat::geometry::{max_alias_free_frequency, pair_frame, tdoa, tdoa_gradient_norm};
use srp_phat::roomsim::{simulate_event, RoomSpec, SimulationOptions};
use srp_phat::srpmap::{build_grid, compute_maps, localize, Bounds, Grid, SrpMap};
use srp_phat::{ArrayGeometry, Band, GccMode, Point3, Signal, SoundSpeed};

const FS: f64 = 16000.0;

fn room() -> RoomSpec {
    RoomSpec::new([8.0, 10.0, 4.0], 0.0, SoundSpeed::default()).unwrap()
}

fn center() -> Point3 {
    Point3::new(4.0, 5.0, 2.0)
}

fn band() -> Band {
    Band::from_hz(100.0, 6000.0).unwrap()
}

fn source_signal(seed: u64) -> Signal {
    synth::band_limited_noise(&mut ChaCha8Rng::seed_from_u64(seed), 1600, FS).unwrap()
}

fn speech(seed: u64) -> Signal {
    synth::speech_like(&mut ChaCha8Rng::seed_from_u64(seed), 3200, FS).unwrap()
}

fn maps_for(array: &ArrayGeometry, grid: &Grid, source: Point3, x: &Signal) -> Vec<SrpMap> {
    let mics = simulate_event(&room(), source, array, x, SimulationOptions::default()).unwrap();
    compute_maps(grid, &mics, array, &GccMode::ALL, band(), SoundSpeed::default()).unwrap()
}

fn argmax(map: &SrpMap) -> Point3 {
    localize(map).unwrap().estimate
}

#[test]
fn on_grid_source_is_strict_maximum() {
    let x = source_signal(1);
    for delta_r in [0.5, 1.0] {
        let grid = build_grid(room().bounds(), delta_r).unwrap();
        for edge in [0.5, 3.0] {
            let array = tetrahedron_array(center(), edge).unwrap();
            for target in [Point3::new(1.2, 2.3, 0.7), Point3::new(6.0, 8.6, 3.4)] {
                let idx = grid.nearest(target);
                let maps = maps_for(&array, &grid, grid.points()[idx], &x);
                for map in maps.iter().filter(|m| m.mode != GccMode::BandLimited) {
                    let top = map.values[idx];
                    let runner_up = map
                        .values
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != idx)
                        .map(|(_, v)| *v)
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert!(top > runner_up, "{} dr={delta_r} edge={edge}: {top} <= {runner_up}", map.mode);
                    assert_eq!(localize(map).unwrap().peak_index, idx);
                }
            }
        }
    }
}

/// Band-limited sum for an ideal pure-delay spectrum, integrated numerically.
fn band_limited_oracle(array: &ArrayGeometry, source: Point3, p: Point3, delta_r: f64) -> f64 {
    let c = SoundSpeed::default();
    let b = band();
    array
        .pairs()
        .iter()
        .map(|&(k, l)| {
            let (mk, ml) = (array.mics()[k], array.mics()[l]);
            let g = tdoa_gradient_norm(pair_frame(mk, ml, p).unwrap(), c);
            let hi = max_alias_free_frequency(g, delta_r, b, 1.0).unwrap().omega_hat_max;
            let d = tdoa(mk, ml, p, c).unwrap() - tdoa(mk, ml, source, c).unwrap();
            let n = 20_000;
            let dw = (hi - b.omega_min) / n as f64;
            (0..n)
                .map(|i| ((b.omega_min + (i as f64 + 0.5) * dw) * d).cos() * dw / PI)
                .sum::<f64>()
        })
        .sum()
}

/// Without normalization, points with a higher per-point cutoff integrate more
/// bins and can outscore the true source cell.
#[test]
fn band_limited_mode_is_biased_toward_wider_bands() {
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 1.0).unwrap();
    let source = Point3::new(2.5, 6.5, 1.5);
    let maps = maps_for(&array, &grid, source, &source_signal(5));
    let b = maps.iter().find(|m| m.mode == GccMode::BandLimited).unwrap();
    let est = argmax(b);
    assert_ne!(est, source);
    let (v_true, v_est) = (b.values[grid.nearest(source)], b.values[grid.nearest(est)]);
    assert!(v_est > v_true);
    for (p, v) in [(source, v_true), (est, v_est)] {
        let oracle = band_limited_oracle(&array, source, p, 1.0);
        assert!((v / oracle - 1.0).abs() < 5e-3, "map {v} vs oracle {oracle}");
    }
    for m in maps.iter().filter(|m| m.mode != GccMode::BandLimited) {
        assert_eq!(argmax(m), source, "{}", m.mode);
    }
}

#[test]
fn fine_grid_makes_standard_and_band_limited_coincide() {
    let c = SoundSpeed::default();
    // below pi*c/(2*omega_max) the limit never bites
    let delta_r = 0.9 * PI * c.get() / (2.0 * band().omega_max);
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let near = Point3::new(4.1, 5.05, 2.02);
    let bounds = Bounds::new(near, near + Point3::new(0.1, 0.1, 0.1)).unwrap();
    let grid = build_grid(bounds, delta_r).unwrap();
    let maps = maps_for(&array, &grid, Point3::new(2.0, 3.0, 1.0), &source_signal(2));
    for (s, b) in maps[0].values.iter().zip(&maps[1].values) {
        assert!((s - b).abs() <= 1e-9 * s.abs().max(1.0));
    }
    assert!(maps[1].condition_violated.iter().all(|v| !v));
    assert!(maps[1].applied_f_max.iter().all(|f| (f - 6000.0).abs() < 1e-9));
}

#[test]
fn amplitude_scaling_leaves_estimates_unchanged() {
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 1.0).unwrap();
    let x = speech(3);
    let source = Point3::new(1.7, 7.3, 2.9);
    let a = maps_for(&array, &grid, source, &x);
    let b = maps_for(&array, &grid, source, &x.scaled(37.5));
    for (m, n) in a.iter().zip(&b) {
        assert_eq!(localize(m).unwrap().peak_index, localize(n).unwrap().peak_index);
    }
}

#[test]
fn microphone_order_does_not_matter() {
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 1.0).unwrap();
    let source = Point3::new(6.2, 2.1, 0.9);
    let mics = simulate_event(&room(), source, &array, &speech(4), SimulationOptions::default()).unwrap();
    let order = [2, 0, 3, 1];
    let permuted = ArrayGeometry::new(order.iter().map(|&i| array.mics()[i]).collect()).unwrap();
    let permuted_signals: Vec<Signal> = order.iter().map(|&i| mics[i].clone()).collect();
    let c = SoundSpeed::default();
    let a = compute_maps(&grid, &mics, &array, &GccMode::ALL, band(), c).unwrap();
    let b = compute_maps(&grid, &permuted_signals, &permuted, &GccMode::ALL, band(), c).unwrap();
    for (m, n) in a.iter().zip(&b) {
        for (u, v) in m.values.iter().zip(&n.values) {
            assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn maps_do_not_depend_on_thread_count() {
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 1.0).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| maps_for(&array, &grid, Point3::new(3.3, 8.1, 0.6), &speech(6)))
    };
    let (a, b) = (run(1), run(3));
    for (m, n) in a.iter().zip(&b) {
        assert_eq!(m.values, n.values);
        assert_eq!(m.applied_f_max, n.applied_f_max);
    }
}

#[test]
fn near_source_standard_peak_pulled_toward_array() {
    // large array, source at rho ~ 3, off the 0.5 m lattice
    let array = tetrahedron_array(center(), 3.0).unwrap();
    let grid = build_grid(room().bounds(), 0.5).unwrap();
    let source = Point3::new(0.6, 0.7, 0.6);
    let maps = maps_for(&array, &grid, source, &synth::speech_like(&mut ChaCha8Rng::seed_from_u64(11), 3200, FS).unwrap());
    let standard = argmax(&maps[0]);
    assert!(standard.distance(center()) < source.distance(center()));
    assert_eq!(argmax(&maps[2]), grid.points()[grid.nearest(source)]);
}

#[test]
fn far_source_modes_agree_within_a_cell() {
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 0.5).unwrap();
    let source = Point3::new(1.76, 0.28, 2.70);
    let maps = maps_for(&array, &grid, source, &synth::speech_like(&mut ChaCha8Rng::seed_from_u64(11), 3200, FS).unwrap());
    let est: Vec<Point3> = maps.iter().map(argmax).collect();
    let cheb = |a: Point3, b: Point3| (a.x - b.x).abs().max((a.y - b.y).abs()).max((a.z - b.z).abs());
    for a in &est {
        for b in &est {
            assert!(cheb(*a, *b) <= 0.5 + 1e-12, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn applied_cutoff_respects_the_alias_free_rule() {
    let c = SoundSpeed::default();
    let array = tetrahedron_array(center(), 0.5).unwrap();
    let grid = build_grid(room().bounds(), 0.5).unwrap();
    let maps = maps_for(&array, &grid, Point3::new(2.0, 2.0, 2.0), &source_signal(7));
    let b = &maps[1];
    for (i, &p) in grid.points().iter().enumerate() {
        let worst = array
            .pairs()
            .iter()
            .map(|&(k, l)| tdoa_gradient_norm(pair_frame(array.mics()[k], array.mics()[l], p).unwrap(), c))
            .fold(0.0, f64::max);
        let omega = 2.0 * PI * b.applied_f_max[i];
        assert!(omega * worst * 0.5 <= PI + 1e-9);
        assert!(!b.condition_violated[i]);
    }
}
