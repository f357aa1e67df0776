use qmimo::frontend::induced_partition_1d;
use qmimo::geometry::{build_paraboloid_code, build_shattering_code};
use qmimo::rates::{dmc_from_partition, mutual_information_probs};
use qmimo::simulator::{highsnr_sweep, simulate_code, SweepTarget, TrialReport};
use qmimo::{ChannelModel, RegionCode};

const GRID: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];

fn siso(p: f64) -> ChannelModel {
    ChannelModel::siso(1.0, p).unwrap()
}

/// Induced-channel mutual information of a scalar code with uniform inputs.
fn analytic_mi(code: &RegionCode) -> f64 {
    let xs: Vec<f64> = code.constellation().iter().map(|x| x[0]).collect();
    let span = xs.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 10.0 + 100.0;
    let part = induced_partition_1d(code.frontend(), (-span, span)).unwrap();
    let dmc = dmc_from_partition(1.0, &xs, &part);
    let probs = vec![1.0 / xs.len() as f64; xs.len()];
    mutual_information_probs(&dmc, &probs)
}

fn check_sweep(reports: &[TrialReport], messages: usize, n_q: usize) {
    let cap = (messages as f64).log2().min(n_q as f64) + 0.005;
    for r in reports {
        assert!((0.0..=1.0).contains(&r.ser));
        assert!(r.empirical_mi_bits >= 0.0 && r.empirical_mi_bits <= cap, "{r:?}");
    }
    for w in reports.windows(2) {
        assert!(w[1].ser <= w[0].ser + 2.0 * (w[0].ci95_ser + w[1].ci95_ser) + 1e-12, "{w:?}");
        assert!(
            w[1].empirical_mi_bits >= w[0].empirical_mi_bits - 0.02,
            "MI fell from {} to {}",
            w[0].empirical_mi_bits,
            w[1].empirical_mi_bits
        );
    }
}

#[test]
fn figure_one_codes_at_high_snr() {
    let ch = siso(400.0);
    let a = simulate_code(&RegionCode::figure1a().scaled(20.0), &ch, 100_000, 11).unwrap();
    assert!(a.ser < 1e-4);
    assert!((a.empirical_mi_bits - 3f64.log2()).abs() < 0.02);
    let b = simulate_code(&RegionCode::figure1b().scaled(20.0), &ch, 100_000, 11).unwrap();
    assert!(b.ser < 1e-4);
    assert!((b.empirical_mi_bits - 2.0).abs() < 0.02);
}

#[test]
fn paraboloid_sweep_saturates_at_two_bits() {
    let code = build_paraboloid_code(1, 2, 0).unwrap();
    let reports = highsnr_sweep(&SweepTarget::Code(code), &siso(1.0), &GRID, 100_000, 3).unwrap();
    check_sweep(&reports, 4, 2);
    assert!((reports.last().unwrap().empirical_mi_bits - 2.0).abs() < 0.02);
}

#[test]
fn shattering_sweep_saturates_at_log_three() {
    let code = build_shattering_code(1, 2, 2, 0).unwrap();
    assert_eq!(code.message_count(), 3);
    let reports = highsnr_sweep(&SweepTarget::Code(code), &siso(1.0), &GRID, 100_000, 3).unwrap();
    check_sweep(&reports, 3, 2);
    assert!((reports.last().unwrap().empirical_mi_bits - 3f64.log2()).abs() < 0.02);
}

#[test]
fn scalar_codes_match_the_induced_channel() {
    let codes = [
        RegionCode::figure1a(),
        RegionCode::figure1b(),
        build_paraboloid_code(1, 2, 0).unwrap(),
        build_paraboloid_code(1, 3, 1).unwrap(),
        build_shattering_code(1, 2, 2, 0).unwrap(),
    ];
    for code in codes {
        for &p in &[GRID[0], GRID[2]] {
            let at = code.at_power(p);
            let r = simulate_code(&at, &siso(p), 1_000_000, 5).unwrap();
            let exact = analytic_mi(&at);
            assert!((r.empirical_mi_bits - exact).abs() <= 0.02, "P = {p}: {} vs {exact}", r.empirical_mi_bits);
        }
    }
}

#[test]
fn partition_targets_sweep_like_codes() {
    let code = RegionCode::figure1b();
    let target = SweepTarget::Partition {
        frontend: code.frontend().clone(),
        points: code.constellation().to_vec(),
        probs: vec![0.25; 4],
    };
    let reports = highsnr_sweep(&target, &siso(1.0), &GRID, 50_000, 9).unwrap();
    check_sweep(&reports, 4, 2);
    let as_code = highsnr_sweep(&SweepTarget::Code(code), &siso(1.0), &GRID, 50_000, 9).unwrap();
    for (a, b) in reports.iter().zip(&as_code) {
        assert!((a.empirical_mi_bits - b.empirical_mi_bits).abs() < 0.03);
    }
}

#[test]
fn identical_seeds_give_identical_reports() {
    let code = build_paraboloid_code(2, 3, 4).unwrap();
    let ch = ChannelModel::diagonal(&[1.0, 1.0], 10.0).unwrap();
    let a = simulate_code(&code.at_power(10.0), &ch, 20_000, 8).unwrap();
    let b = simulate_code(&code.at_power(10.0), &ch, 20_000, 8).unwrap();
    assert_eq!(a.csv_row(), b.csv_row());
    assert_eq!(a, b);
    let again = build_paraboloid_code(2, 3, 4).unwrap();
    assert_eq!(code.to_json(), again.to_json());
}

#[test]
fn noiseless_channel_never_errs() {
    for code in [RegionCode::figure1a(), RegionCode::figure1b(), build_paraboloid_code(2, 3, 2).unwrap()] {
        let ch = ChannelModel::diagonal(&vec![1.0; code.dim()], 1.0).unwrap().noiseless();
        let r = simulate_code(&code, &ch, 10_000, 1).unwrap();
        assert_eq!(r.ser, 0.0);
    }
}
