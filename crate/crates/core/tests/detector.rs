use mictact::detect::{
    bias_episode, first_crossing, ft_onset_index, onset_index, response_time_study, tap_location, FtDetectorConfig,
    MicDetector, MicDetectorConfig, StudyConfig,
};
use mictact::sim::{simulate_tap, SensorLayout, TapParams, FT_FZ, NUM_MICS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noise_stream(seed: u64, len: usize, sigma: f64) -> Vec<u16> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(1241.0, sigma).unwrap();
    (0..len).map(|_| n.sample(&mut rng).round() as u16).collect()
}

#[test]
fn quiet_noise_never_fires() {
    let cfg = MicDetectorConfig::default();
    for seed in 0..10 {
        assert_eq!(onset_index(&noise_stream(seed, 100_000, 2.0), &cfg), None);
    }
}

#[test]
fn step_on_noise_fires_at_step() {
    let cfg = MicDetectorConfig::default();
    for seed in 0..20 {
        let mut s = noise_stream(seed, 2_000, 2.0);
        for v in &mut s[1_000..] {
            *v += 40;
        }
        assert_eq!(onset_index(&s, &cfg), Some(1_000));
    }
}

proptest! {
    #[test]
    fn detection_is_causal(seed in any::<u64>(), step_at in 20usize..400, cut in 1usize..500, rise in 0u16..60) {
        let cfg = MicDetectorConfig::default();
        let mut s = noise_stream(seed, 500, 2.0);
        for v in &mut s[step_at..] {
            *v += rise;
        }
        let full = onset_index(&s, &cfg);
        let prefix = onset_index(&s[..cut], &cfg);
        match full {
            Some(i) if i < cut => prop_assert_eq!(prefix, Some(i)),
            _ => prop_assert_eq!(prefix, None),
        }
    }

    #[test]
    fn streaming_matches_batch(stream in prop::collection::vec(1200u16..1300, 0..300)) {
        let cfg = MicDetectorConfig::default();
        let mut det = MicDetector::new(cfg);
        let hits: Vec<usize> = stream.iter().filter_map(|&v| det.feed(v)).collect();
        prop_assert!(hits.len() <= 1);
        prop_assert_eq!(hits.first().copied(), onset_index(&stream, &cfg));
        prop_assert_eq!(det.fired(), hits.first().copied());
    }
}

#[test]
fn offline_label_precedes_threshold_crossing() {
    let layout = SensorLayout::default();
    let params = TapParams {
        flatline_prob: 0.0,
        ..TapParams::default()
    };
    let cfg = FtDetectorConfig::default();
    for (k, v) in [10.0, 55.0, 100.0].into_iter().cycle().take(30).enumerate() {
        let loc = tap_location(&layout, k % NUM_MICS, (k % 4) as f64 * 2.0);
        let ep = simulate_tap(&layout, loc, v, k as u64, &params).unwrap();
        let quiet = ((params.pre_contact_s - 0.05) * ep.sample_rate_hz) as usize;
        let tared = bias_episode(&ep, 0..quiet, &cfg).unwrap();
        let fz = tared.ft_channel(FT_FZ);
        let label = ft_onset_index(&fz, &cfg).expect("tap has a contact");
        let crossing = first_crossing(&fz, cfg.contact_force_n).unwrap();
        assert!(label <= crossing, "tap {k}: label {label} after crossing {crossing}");
        let truth = ep.meta.contact_index.unwrap();
        assert!(
            label <= truth + 2 && label + cfg.decrease_within >= truth,
            "tap {k}: label {label} vs contact {truth}"
        );
    }
}

#[test]
fn small_study_has_expected_shape() {
    let layout = SensorLayout::default();
    let cfg = StudyConfig {
        episodes_per_cell: 12,
        ..StudyConfig::default()
    };
    let table = response_time_study(&layout, &TapParams::default(), &cfg).unwrap();
    assert_eq!(table.cells.len(), 3);
    for row in &table.cells {
        assert_eq!(row.len(), 4);
        for cell in row {
            assert_eq!(cell.episodes, 12);
            assert!(cell.detected + cell.dropped_flatline + cell.ft_missing <= 12);
            if cell.reported {
                let m = cell.mean_ms.unwrap();
                assert!((1.0..=8.0).contains(&m), "{m} ms");
            }
        }
    }
    assert_eq!(table.cell(10.0, 6.0).unwrap().display(), "-");
    assert!(table.to_csv().lines().count() > 1);
}
