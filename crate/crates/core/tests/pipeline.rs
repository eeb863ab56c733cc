use ace_core::homomorphic::{smooth_spectral_map, LifterSpec, DEFAULT_FLOOR_REL};
use ace_core::phantom::{apply_tgc, simulate, PhantomSpec, SystemEffects, TgcProfile};
use ace_core::rfm::{run_rfm, Method, RfmOptions};
use ace_core::spectral::{local_power_spectra, select_band, Taper};
use ace_core::ScanConfig;

fn small_config() -> ScanConfig {
    ScanConfig {
        num_lines: 16,
        ..ScanConfig::default()
    }
}

fn frame(seed: u64) -> ace_core::RfFrame {
    let spec = PhantomSpec { seed, ..PhantomSpec::default() };
    simulate(&spec, &SystemEffects::default(), &small_config()).unwrap()
}

#[test]
fn power_of_two_gain_leaves_every_output_identical() {
    let f = frame(1);
    for method in [Method::Baseline, Method::Improved] {
        let opts = RfmOptions::default().with_method(method);
        let a = run_rfm(&f, &opts).unwrap();
        let b = run_rfm(&f.scaled(8.0).unwrap(), &opts).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn arbitrary_gain_changes_nothing_beyond_rounding() {
    let f = frame(2);
    for method in [Method::Baseline, Method::Improved] {
        let opts = RfmOptions::default().with_method(method);
        let a = run_rfm(&f, &opts).unwrap().result;
        let b = run_rfm(&f.scaled(3.7).unwrap(), &opts).unwrap().result;
        assert_eq!(a.band, b.band);
        for (x, y) in a.per_frequency.iter().zip(&b.per_frequency) {
            assert!((x.alpha_db_cm_mhz - y.alpha_db_cm_mhz).abs() < 1e-9);
        }
    }
}

fn default_frame(seed: u64) -> ace_core::RfFrame {
    let spec = PhantomSpec { seed, ..PhantomSpec::default() };
    simulate(&spec, &SystemEffects::default(), &ScanConfig::default()).unwrap()
}

#[test]
fn exponential_tgc_barely_moves_the_estimate() {
    let opts = RfmOptions::default();
    for seed in 0..3 {
        let f = default_frame(seed);
        let gains = TgcProfile::Exponential { rate_per_m: 60.0 }.gains(f.config()).unwrap();
        let boosted = apply_tgc(&f, &gains).unwrap();
        let a = run_rfm(&f, &opts).unwrap().result.aggregate_alpha_db_cm_mhz;
        let b = run_rfm(&boosted, &opts).unwrap().result.aggregate_alpha_db_cm_mhz;
        assert!((a - b).abs() < 0.02, "seed {seed}: {a} vs {b}");
    }
}

/// RMS of in-band log power around its least-squares quadratic. The log of
/// the Gaussian pulse spectrum is itself quadratic, so what remains is ripple.
fn detrended_ripple(row: &[f64], lo: usize, hi: usize) -> f64 {
    let mid = (lo + hi) as f64 / 2.0;
    let xs: Vec<f64> = (lo..=hi).map(|i| (i as f64 - mid) / (hi - lo) as f64).collect();
    let ys: Vec<f64> = (lo..=hi).map(|i| row[i].ln()).collect();
    let mut a = [[0.0f64; 4]; 3];
    for (x, y) in xs.iter().zip(&ys) {
        let p = [1.0, *x, x * x];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += p[r] * p[c];
            }
            a[r][3] += p[r] * y;
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let f = a[j][i] / a[i][i];
            let pivot = a[i];
            for (dst, src) in a[j].iter_mut().zip(pivot) {
                *dst -= f * src;
            }
        }
    }
    let mut coef = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| a[i][j] * coef[j]).sum();
        coef[i] = (a[i][3] - s) / a[i][i];
    }
    let n = xs.len() as f64;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - coef[0] - coef[1] * x - coef[2] * x * x).powi(2))
        .sum();
    (ss / n).sqrt()
}

#[test]
fn smoothing_reduces_in_band_ripple_in_every_row() {
    for seed in [4, 9] {
        let f = default_frame(seed);
        let half = 256.0 * f.config().depth_per_sample();
        let map = local_power_spectra(&f, 512, 128, Taper::Hann)
            .unwrap()
            .crop_depths(0.005 + half, 0.045 - half)
            .unwrap();
        let band = select_band(&map, 15.0).unwrap();
        let smooth = smooth_spectral_map(&map, &LifterSpec::default_for(512), DEFAULT_FLOOR_REL).unwrap();
        for k in 0..map.num_windows() {
            let before = detrended_ripple(map.row(k), band.bin_lo, band.bin_hi);
            let after = detrended_ripple(smooth.row(k), band.bin_lo, band.bin_hi);
            assert!(after < before, "seed {seed} window {k}: {after} >= {before}");
        }
    }
}

#[test]
fn repeated_runs_are_identical() {
    let opts = RfmOptions::default();
    let a = run_rfm(&frame(5), &opts).unwrap();
    let b = run_rfm(&frame(5), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimates_land_near_truth_on_a_small_phantom() {
    let f = frame(6);
    let improved = run_rfm(&f, &RfmOptions::default()).unwrap().result;
    assert!((improved.aggregate_alpha_db_cm_mhz - 0.68).abs() < 0.15, "{}", improved.aggregate_alpha_db_cm_mhz);
    let baseline = run_rfm(&f, &RfmOptions::default().with_method(Method::Baseline)).unwrap().result;
    assert!(improved.oscillation_metric < baseline.oscillation_metric);
    assert_eq!(improved.lifter_cutoff, Some(32));
    let half = 256.0 * f.config().depth_per_sample();
    assert_eq!(improved.fit_range, (0.005 + half, 0.045 - half));
}
