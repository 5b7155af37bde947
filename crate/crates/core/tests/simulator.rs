use mictact::detect::tap_location;
use mictact::sim::{
    adc_quantize, simulate_drag, simulate_tap, DragParams, SensorLayout, TapParams, TextureId, NUM_MICS,
};
use mictact::DragEpisode;
use rustfft::{num_complex::Complex, FftPlanner};

/// Samples where the robot moves at exactly the commanded speed.
fn cruise(ep: &DragEpisode) -> Vec<usize> {
    let v = ep.nominal_velocity_mm_s;
    (0..ep.len())
        .filter(|&i| {
            let [vx, vy, _] = ep.robot_vel_mm_s[i];
            (vx.hypot(vy) - v).abs() < 1e-9
        })
        .collect()
}

fn centered(ep: &DragEpisode, idx: &[usize], mic: usize) -> Vec<f64> {
    let x: Vec<f64> = idx.iter().map(|&i| ep.mic_counts[i][mic] as f64).collect();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf[..x.len() / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn loudest_mic(ep: &DragEpisode, idx: &[usize]) -> usize {
    (0..NUM_MICS)
        .max_by(|&a, &b| {
            let ea: f64 = centered(ep, idx, a).iter().map(|v| v * v).sum();
            let eb: f64 = centered(ep, idx, b).iter().map(|v| v * v).sum();
            ea.total_cmp(&eb)
        })
        .unwrap()
}

#[test]
fn bump_fundamental_dominates_spectrum() {
    let layout = SensorLayout::default();
    let params = DragParams::default();
    for seed in 0..8 {
        let ep = simulate_drag(&layout, &TextureId::C.spec(), 60.0, seed, &params).unwrap();
        let idx = cruise(&ep);
        let x = centered(&ep, &idx, loudest_mic(&ep, &idx));
        let p = power_spectrum(&x);
        let df = ep.sample_rate_hz / x.len() as f64;
        let lo = (2.0 / df).ceil() as usize;
        let hi = (200.0 / df).floor() as usize;
        let peak = (lo..=hi).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let expected = 60.0 / 3.0 / df;
        assert!(
            (peak as f64 - expected).abs() <= 1.0,
            "seed {seed}: peak at {} Hz, expected 20 Hz (bin width {df:.2} Hz)",
            peak as f64 * df
        );
    }
}

fn band_energy_above(ep: &DragEpisode, f_lo: f64) -> f64 {
    let idx = cruise(ep);
    let mut total = 0.0;
    for mic in 0..NUM_MICS {
        let x = centered(ep, &idx, mic);
        let df = ep.sample_rate_hz / x.len() as f64;
        let p = power_spectrum(&x);
        total += p.iter().enumerate().filter(|(k, _)| *k as f64 * df > f_lo).map(|(_, v)| v).sum::<f64>();
    }
    total
}

#[test]
fn flat_indenter_is_quieter_than_coarse_texture() {
    let layout = SensorLayout::default();
    let params = DragParams::default();
    for v in [20.0, 40.0, 60.0] {
        for seed in 0..4 {
            let flat = simulate_drag(&layout, &TextureId::A.spec(), v, seed, &params).unwrap();
            let coarse = simulate_drag(&layout, &TextureId::D.spec(), v, seed, &params).unwrap();
            assert_eq!(flat.robot_pos_mm, coarse.robot_pos_mm, "same seed must share the path");
            assert!(band_energy_above(&flat, 10.0) < band_energy_above(&coarse, 10.0));
        }
    }
}

#[test]
fn tap_amplitude_falls_with_distance() {
    let layout = SensorLayout::default();
    let params = TapParams::default();
    let peak = |d: f64, seed: u64| {
        let ep = simulate_tap(&layout, tap_location(&layout, 0, d), 55.0, seed, &params).unwrap();
        let bias = ep.mic_counts[0][0] as f64;
        ep.mic_counts.iter().map(|r| (r[0] as f64 - bias).abs()).fold(0.0, f64::max)
    };
    for seed in 0..5 {
        assert!(peak(6.0, seed) < peak(2.0, seed));
    }
    let near = tap_location(&layout, 0, 2.0);
    let far = tap_location(&layout, 0, 6.0);
    assert!(layout.receptive_gain(0, &far) < layout.receptive_gain(0, &near));
}

#[test]
fn adc_reference_levels() {
    assert_eq!(adc_quantize(0.0), 1241);
    assert_eq!(adc_quantize(1.0), 4095);
    assert_eq!(adc_quantize(-1.0), 0);
}

#[test]
fn same_seed_same_episode() {
    let layout = SensorLayout::default();
    let params = DragParams::default();
    let a = simulate_drag(&layout, &TextureId::B.spec(), 35.0, 99, &params).unwrap();
    let b = simulate_drag(&layout, &TextureId::B.spec(), 35.0, 99, &params).unwrap();
    let c = simulate_drag(&layout, &TextureId::B.spec(), 35.0, 100, &params).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mic_counts, c.mic_counts);
    let t = TapParams::default();
    let p = tap_location(&layout, 0, 4.0);
    assert_eq!(
        simulate_tap(&layout, p, 10.0, 5, &t).unwrap(),
        simulate_tap(&layout, p, 10.0, 5, &t).unwrap()
    );
}

#[test]
fn streams_are_aligned_and_labeled() {
    let layout = SensorLayout::default();
    let ep = simulate_drag(&layout, &TextureId::D.spec(), 25.0, 3, &DragParams::default()).unwrap();
    ep.check_consistent().unwrap();
    assert_eq!(ep.texture, Some(TextureId::D));
    let (s, e) = ep.meta.motion_span.unwrap();
    assert!(s < e && e <= ep.len());
    let start = ep.meta.start_mm.unwrap();
    let first = ep.robot_pos_mm[0];
    assert!((first[0] - start.x).abs() < 1e-9 && (first[1] - start.y).abs() < 1e-9);
    assert!(ep.robot_pos_mm.iter().all(|p| layout.sensing_area.contains(&mictact::Point::new(p[0], p[1]))));
}
