//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Runtime budgets are stated for 4 cores and scaled up on smaller machines.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use mictact::detect::{onset_index, response_time_study, MicDetectorConfig, StudyConfig};
use mictact::harness::{
    drag_infos, make_held_out_velocity_splits, make_velocity_cv_splits, run_fold, snr_baseline_localize,
    DragInfo, EvalContext, Fold, SplitPlan, SplitStrategy, TrainConfig,
};
use mictact::model::{loss_and_grad, ModelConfig, ModelParams, Target};
use mictact::pipeline::{
    collect_runs, detect_from_manifest, grid_windows, preprocess, simulate_corpus, train_run, write_report,
    write_study, CorpusSpec, DragGrid, RunConfig, RunInputs, MANIFEST_FILE,
};
use mictact::signal::{window_slice, window_starts, Highpass, WindowConfig, WindowSample};
use mictact::sim::{SensorLayout, SimConfig, DRAG_VELOCITIES, HELD_OUT_VELOCITIES, NUM_MICS};
use mictact::{Point, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

static SERIAL: Mutex<()> = Mutex::new(());

fn budget_scale() -> f64 {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get()) as f64;
    (4.0 / cores).max(1.0)
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget_s: f64,
    start: Instant,
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Criterion {
    fn start(id: u32, name: &'static str, budget_s: f64) -> Self {
        Self {
            id,
            name,
            budget_s,
            start: Instant::now(),
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let limit = self.budget_s * budget_scale();
        self.check(elapsed <= limit, format!("runtime {elapsed:.1} s <= {limit:.0} s"));
        let pass = self.failures.is_empty();
        println!(
            "criterion {:>2} {:<32} {}  {}",
            self.id,
            self.name,
            if pass { "PASS" } else { "FAIL" },
            if pass { self.notes.join("; ") } else { self.failures.join("; ") }
        );
        assert!(pass, "criterion {} failed: {}", self.id, self.failures.join("; "));
    }
}

fn perturbed(cfg: ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce);
    for v in p.values.iter_mut() {
        *v += rng.random_range(-0.2..0.2);
    }
    p
}

#[test]
fn c01_gradient_oracle() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(1, "gradient oracle", 60.0);
    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    for task in Task::ALL {
        let cfg = ModelConfig::tiny(task);
        let mut p = perturbed(cfg.clone(), 17);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..cfg.window * cfg.in_channels).map(|_| rng.random_range(-40.0..40.0)).collect())
            .collect();
        let w: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let t: Vec<Target> = (0..3)
            .map(|i| match task {
                Task::Texture => Target::Class(i + 1),
                Task::Localize => Target::Values(vec![6.0 + 3.0 * i as f64, 18.0 - i as f64]),
                Task::Velocity => Target::Values(vec![22.0 + 12.0 * i as f64]),
            })
            .collect();
        let (_, g) = loss_and_grad(&p, &w, &t).unwrap();
        let floor = 1e-6 * g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut worst = 0.0f64;
        for spec in p.layout.specs.clone() {
            let r = spec.range();
            let mut diff = 0.0;
            let mut na = 0.0f64;
            let mut nn = 0.0f64;
            for i in r {
                let orig = p.values[i];
                p.values[i] = orig + EPS;
                let up = loss_and_grad(&p, &w, &t).unwrap().0;
                p.values[i] = orig - EPS;
                let down = loss_and_grad(&p, &w, &t).unwrap().0;
                p.values[i] = orig;
                let num = (up - down) / (2.0 * EPS);
                diff += (g[i] - num).powi(2);
                na += g[i] * g[i];
                nn += num * num;
            }
            let rel = diff.sqrt() / na.sqrt().max(nn.sqrt()).max(floor);
            worst = worst.max(rel);
            if rel > TOL {
                c.check(false, format!("{task} {}: rel {rel:.2e} > {TOL:e}", spec.name));
            }
        }
        c.check(worst <= TOL, format!("{task} worst rel {worst:.1e} <= {TOL:e}"));
    }
    c.finish();
}

fn sine(f: f64, n: usize, fs: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
}

fn middle_amplitude(y: &[f64], f: f64, fs: f64) -> f64 {
    let (a, b) = (y.len() / 4, 3 * y.len() / 4);
    let (mut s, mut co) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate().take(b).skip(a) {
        let ph = 2.0 * PI * f * i as f64 / fs;
        s += v * ph.sin();
        co += v * ph.cos();
    }
    2.0 * s.hypot(co) / (b - a) as f64
}

#[test]
fn c02_filter_correctness() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(2, "zero-phase high-pass filter", 10.0);
    let fs = 2000.0;
    let hp = Highpass::preprocessing();
    let n = 40_000;

    let dc = hp.filtfilt(&vec![1234.5; n]).unwrap();
    let dc_rel = dc.iter().fold(0.0f64, |m, v| m.max(v.abs())) / 1234.5;
    c.check(dc_rel <= 1e-6, format!("DC residual {dc_rel:.1e} <= 1e-6"));

    let a1 = middle_amplitude(&hp.filtfilt(&sine(1.0, n, fs)).unwrap(), 1.0, fs);
    let oracle1 = 1.0 / (1.0 + 3f64.powi(6));
    c.check(a1 <= 0.002, format!("1 Hz amplitude {a1:.5} <= 0.002"));
    c.check(
        (a1 - oracle1).abs() <= 0.1 * oracle1,
        format!("1 Hz within 10% of |H|^2 oracle {oracle1:.5}"),
    );

    let a100 = middle_amplitude(&hp.filtfilt(&sine(100.0, n, fs)).unwrap(), 100.0, fs);
    c.check((a100 - 1.0).abs() <= 0.01, format!("100 Hz amplitude {a100:.5} within 1%"));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..8000).map(|_| noise.sample(&mut rng)).collect();
    let y = hp.filtfilt(&x).unwrap();
    let xcorr = |lag: i64| -> f64 {
        (0..x.len() as i64)
            .filter(|i| (0..y.len() as i64).contains(&(i + lag)))
            .map(|i| x[i as usize] * y[(i + lag) as usize])
            .sum()
    };
    let lag = (-100..=100).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
    c.check(lag == 0, format!("cross-correlation lag {lag} == 0"));
    c.finish();
}

#[test]
fn c03_windowing_formula() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(3, "window count formula", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..1500usize);
        let offset = rng.random_range(1..400usize);
        let len = rng.random_range(n..n + 20_000);
        let want = (len - n) / offset + 1;
        let starts = window_starts(len, n, offset);
        let spans = window_slice(&(7..7 + len), n, offset);
        if starts.len() != want || spans.len() != want || spans.last().unwrap().end > 7 + len {
            bad += 1;
        }
    }
    c.check(bad == 0, format!("{bad}/1000 triples disagree with floor((L-n)/offset)+1"));
    c.finish();
}

fn desk_drag_ids(seed: u64) -> Vec<DragInfo> {
    DragGrid::desk(seed)
        .jobs()
        .iter()
        .map(|j| DragInfo {
            drag_id: format!("drag-{}-v{}-s{}#0", j.texture, j.velocity_mm_s, j.seed),
            velocity_mm_s: j.velocity_mm_s,
        })
        .collect()
}

fn leaks(plan: &SplitPlan, velocity: &BTreeMap<&str, f64>) -> usize {
    let mut n = 0;
    for f in &plan.folds {
        if f.check_disjoint().is_err() {
            n += 1;
        }
        if let Some(v) = f.held_out_velocity {
            n += f.test.iter().filter(|id| velocity[id.as_str()] != v).count();
            n += f.train.iter().chain(&f.val).filter(|id| velocity[id.as_str()] == v).count();
        }
    }
    n
}

#[test]
fn c04_split_hygiene() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(4, "split hygiene", 5.0);
    let mut plans = 0;
    let mut bad = 0;
    for seed in 0..20 {
        let drags = desk_drag_ids(seed);
        let velocity: BTreeMap<&str, f64> = drags.iter().map(|d| (d.drag_id.as_str(), d.velocity_mm_s)).collect();
        for task in Task::ALL {
            let held = make_held_out_velocity_splits(task, &drags, &HELD_OUT_VELOCITIES, 0.1, seed).unwrap();
            let cv = make_velocity_cv_splits(task, &drags, 10, 0.1, seed).unwrap();
            bad += leaks(&held, &velocity) + leaks(&cv, &velocity);
            plans += 2;
        }
    }
    c.check(bad == 0, format!("{bad} leaks over {plans} plans"));
    c.finish();
}

fn fold<'a>(plan: &'a SplitPlan, name: &str) -> &'a Fold {
    plan.folds.iter().find(|f| f.name == name).unwrap()
}

#[test]
fn c05_texture_held_out_velocity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(5, "texture, held-out velocity", 15.0 * 60.0);
    let samples = grid_windows(&DragGrid::desk(42), &SimConfig::default(), &WindowConfig::for_task(Task::Texture)).unwrap();
    let plan = make_held_out_velocity_splits(Task::Texture, &drag_infos(&samples), &HELD_OUT_VELOCITIES, 0.1, 42).unwrap();
    let mut acc = BTreeMap::new();
    for f in &plan.folds {
        let run = run_fold(
            &samples,
            f,
            plan.strategy,
            ModelConfig::for_task(Task::Texture),
            &TrainConfig::for_task(Task::Texture),
            EvalContext::default(),
        )
        .unwrap();
        let a = run.report.texture.unwrap().accuracy;
        eprintln!("texture {}: accuracy {a:.4} (best epoch {})", f.name, run.outcome.best_epoch);
        acc.insert((f.held_out_velocity.unwrap() * 10.0) as i64, a);
    }
    let get = |v: i64| acc[&(v * 10)];
    c.check(get(40) >= 0.90, format!("40 mm/s {:.3} >= 0.90", get(40)));
    for v in [30, 50, 60] {
        c.check(get(v) >= 0.80, format!("{v} mm/s {:.3} >= 0.80", get(v)));
    }
    let others = [30, 40, 50, 60].iter().map(|&v| get(v)).sum::<f64>() / 4.0;
    c.check(get(20) <= others, format!("20 mm/s {:.3} <= mean of others {others:.3}", get(20)));
    c.finish();
}

fn mic_contact_window(layout: &SensorLayout, mic: usize, seed: u64) -> WindowSample {
    let n = 100;
    let at = layout.mic_positions[mic];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mut data = Vec::with_capacity(n * NUM_MICS);
    for t in 0..n {
        let source = 80.0 * (2.0 * PI * 25.0 * t as f64 / 2000.0).sin();
        for m in 0..NUM_MICS {
            data.push((layout.receptive_gain(m, &at) * source + noise.sample(&mut rng)) as f32);
        }
    }
    WindowSample {
        episode_id: format!("at-mic-{mic}"),
        drag_id: format!("at-mic-{mic}#0"),
        start: 0,
        n,
        sample_rate_hz: 2000.0,
        data,
        raw: Vec::new(),
        noise_floor: [2.0; NUM_MICS],
        label_texture: None,
        label_pos_mm: [at.x, at.y],
        label_vel_mm_s: 0.0,
        nominal_velocity_mm_s: 0.0,
    }
}

#[test]
fn c06_localization_vs_snr_baseline() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(6, "localization vs SNR baseline", 15.0 * 60.0);
    let layout = SensorLayout::default();
    let mut worst = 0.0f64;
    for mic in 0..NUM_MICS {
        let w = mic_contact_window(&layout, mic, mic as u64);
        let p = snr_baseline_localize(&w, &layout).unwrap();
        worst = worst.max(p.dist(&Point::new(w.label_pos_mm[0], w.label_pos_mm[1])));
    }
    c.check(worst <= 1e-9, format!("baseline error at mic sites {worst:.1e} <= 1e-9 mm"));

    let samples = grid_windows(&DragGrid::desk(42), &SimConfig::default(), &WindowConfig::for_task(Task::Localize)).unwrap();
    let plan = make_held_out_velocity_splits(Task::Localize, &drag_infos(&samples), &HELD_OUT_VELOCITIES, 0.1, 42).unwrap();
    let run = run_fold(
        &samples,
        fold(&plan, "heldout-40"),
        plan.strategy,
        ModelConfig::for_task(Task::Localize),
        &TrainConfig::for_task(Task::Localize),
        EvalContext {
            layout: Some(&layout),
            ..EvalContext::default()
        },
    )
    .unwrap();
    let learned = run.report.localization.unwrap().median;
    let snr = run.report.snr_baseline.unwrap().median;
    c.check(learned < snr, format!("heldout-40 median {learned:.2} mm < SNR baseline {snr:.2} mm"));
    c.finish();
}

#[test]
fn c07_velocity_vs_position_derivative() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(7, "velocity vs position derivative", 15.0 * 60.0);
    let grid = DragGrid::desk(42);
    let sim = SimConfig::default();
    let vel_cfg = WindowConfig {
        keep_raw: true,
        ..WindowConfig::with_window(200)
    };
    let vel = grid_windows(&grid, &sim, &vel_cfg).unwrap();
    let pos = grid_windows(&grid, &sim, &WindowConfig::with_window(100)).unwrap();
    let plan = make_velocity_cv_splits(Task::Velocity, &drag_infos(&vel), 10, 0.1, 42).unwrap();
    let f = fold(&plan, "cv-0");
    let position = run_fold(
        &pos,
        f,
        plan.strategy,
        ModelConfig::with_window(Task::Localize, 100),
        &TrainConfig::for_task(Task::Localize),
        EvalContext::default(),
    )
    .unwrap();
    let filter = Highpass::preprocessing();
    let run = run_fold(
        &vel,
        f,
        SplitStrategy::VelocityCv,
        ModelConfig::with_window(Task::Velocity, 200),
        &TrainConfig::for_task(Task::Velocity),
        EvalContext {
            position_model: Some(&position.outcome.params),
            filter: Some(&filter),
            ..EvalContext::default()
        },
    )
    .unwrap();
    let direct = run.report.velocity.unwrap().overall.median;
    let derived = run.report.position_derivative_baseline.unwrap().overall.median;
    c.check(
        direct < derived,
        format!("cv-0 at 0.10 s: direct median {direct:.2} mm/s < position derivative {derived:.2} mm/s"),
    );
    c.finish();
}

#[test]
fn c08_detector_properties() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(8, "microphone onset detector", 30.0);
    let cfg = MicDetectorConfig::default();
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mut false_pos = 0;
    for s in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let stream: Vec<u16> = (0..100_000).map(|_| (2000.0f64 + noise.sample(&mut rng)).round() as u16).collect();
        false_pos += usize::from(onset_index(&stream, &cfg).is_some());
    }
    c.check(false_pos == 0, format!("{false_pos} false positives in 100 x 1e5 noise samples"));

    let mut misplaced = 0;
    for at in [20, 21, 100, 999, 5000] {
        let stream: Vec<u16> = (0..at + 50).map(|i| if i < at { 2000 } else { 2020 }).collect();
        misplaced += usize::from(onset_index(&stream, &cfg) != Some(at));
    }
    c.check(misplaced == 0, format!("{misplaced}/5 +20 steps not detected at the step"));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut acausal = 0;
    for _ in 0..500 {
        let len = rng.random_range(50..600);
        let step = rng.random_range(0..len);
        let rise = rng.random_range(0..40u16);
        let stream: Vec<u16> = (0..len)
            .map(|i| (2000.0f64 + noise.sample(&mut rng)).round() as u16 + if i >= step { rise } else { 0 })
            .collect();
        let full = onset_index(&stream, &cfg);
        let cut = rng.random_range(0..=len);
        let prefix = onset_index(&stream[..cut], &cfg);
        let want = full.filter(|&i| i < cut);
        acausal += usize::from(prefix != want);
    }
    c.check(acausal == 0, format!("{acausal}/500 truncations change an earlier decision"));
    c.finish();
}

#[test]
fn c09_response_time_study() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(9, "tap response-time study", 120.0);
    let sim = SimConfig::default();
    let cfg = StudyConfig::default();
    let table = response_time_study(&SensorLayout::default(), &sim.tap, &cfg).unwrap();
    eprint!("{}", table.to_text());
    let mut out_of_range = Vec::new();
    for row in &table.cells {
        for cell in row.iter().filter(|c| c.reported) {
            let m = cell.mean_ms.unwrap();
            if !(1.0..=8.0).contains(&m) {
                out_of_range.push(format!("({} mm, {} mm/s) {m:.2}", cell.distance_mm, cell.velocity_mm_s));
            }
        }
    }
    c.check(out_of_range.is_empty(), format!("reported means in [1, 8] ms {out_of_range:?}"));
    let mut non_monotone = Vec::new();
    for (di, &d) in table.distances_mm.iter().enumerate() {
        let means: Vec<f64> = table.cells.iter().filter(|r| r[di].reported).map(|r| r[di].mean_ms.unwrap()).collect();
        if means.windows(2).any(|w| w[1] > w[0]) {
            non_monotone.push(d);
        }
    }
    c.check(non_monotone.is_empty(), format!("mean non-increasing in velocity at every distance {non_monotone:?}"));
    let slow_far = table.cell(10.0, 6.0).unwrap().display();
    c.check(slow_far == "-", format!("(6 mm, 10 mm/s) shows `{slow_far}`"));
    c.finish();
}

fn pipeline_once(root: &Path) {
    let sim = SimConfig::default();
    let layout = SensorLayout::default();
    let corpus = root.join("corpus");
    let taps = root.join("taps");
    simulate_corpus(&CorpusSpec::Drags(DragGrid::standard(2, 7)), &sim, &corpus).unwrap();
    let study = StudyConfig {
        episodes_per_cell: 5,
        ..StudyConfig::default()
    };
    simulate_corpus(&CorpusSpec::Taps(study.clone()), &sim, &taps).unwrap();
    let manifest = corpus.join(MANIFEST_FILE);

    let run = |task: Task, window: WindowConfig, fold: &str, position: Option<&Path>| -> PathBuf {
        let ds = preprocess(&manifest, &window).unwrap();
        ds.write(&root.join(format!("{task}.mtwd"))).unwrap();
        let dir = root.join(format!("train-{task}"));
        let mut cfg = RunConfig::for_task(task, &dir).with_window(window.window);
        if task != Task::Texture {
            cfg.split = SplitStrategy::VelocityCv;
            cfg.cv_rounds = 2;
        }
        cfg.folds = vec![fold.to_string()];
        cfg.train.max_epochs = 2;
        let inputs = RunInputs {
            layout: &layout,
            position_run: position,
        };
        train_run(&ds, &cfg, inputs).unwrap();
        dir
    };
    let texture = run(Task::Texture, WindowConfig::for_task(Task::Texture), "heldout-40", None);
    let localize = run(Task::Localize, WindowConfig::with_window(100), "cv-0", None);
    let velocity = run(
        Task::Velocity,
        WindowConfig {
            keep_raw: true,
            ..WindowConfig::with_window(200)
        },
        "cv-0",
        Some(&localize),
    );
    let table = detect_from_manifest(&taps.join(MANIFEST_FILE), &study).unwrap();
    write_study(&root.join("detect"), &study, &table).unwrap();
    let dirs = [texture.as_path(), localize.as_path(), velocity.as_path(), &root.join("detect")];
    write_report(&root.join("report"), &collect_runs(&dirs).unwrap()).unwrap();
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn c10_reproducibility() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut c = Criterion::start(10, "byte-identical reruns", 10.0 * 60.0);
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline_once(&a);
    pipeline_once(&b);
    let (fa, fb) = (files(&a), files(&b));
    c.check(fa.keys().eq(fb.keys()), format!("{} files in both runs", fa.len()));
    let mut counts = BTreeMap::new();
    let mut differ = Vec::new();
    for (path, bytes) in &fa {
        let kind = match path.extension().and_then(|e| e.to_str()) {
            Some("mtep") => "episodes",
            Some("mtck") => "checkpoints",
            _ if path.components().any(|c| {
                let c = c.as_os_str().to_string_lossy();
                c.starts_with("report") || c.starts_with("response_times") || c.starts_with("velocity_")
            }) =>
            {
                "reports"
            }
            _ => "other",
        };
        *counts.entry(kind).or_insert(0) += 1;
        // Run configs record their own output directory.
        if path.file_name().is_some_and(|n| n == "run_config.json") {
            continue;
        }
        if fb.get(path) != Some(bytes) {
            differ.push(path.display().to_string());
        }
    }
    c.check(differ.is_empty(), format!("identical bytes {counts:?}, differing {differ:?}"));
    c.finish();
}

#[test]
fn desk_grid_has_expected_size() {
    assert_eq!(DragGrid::desk(0).len(), 4 * DRAG_VELOCITIES.len() * 40);
    assert_eq!(DragGrid::desk(0).len(), 1440);
}
