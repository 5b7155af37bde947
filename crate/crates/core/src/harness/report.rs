use serde::{Deserialize, Serialize};

use super::metrics::{BinSummary, ConfusionMatrix, ErrorSummary, NUM_CLASSES};
use super::splits::SplitStrategy;
use crate::Task;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureEval {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub adjacent_error_share: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityEval {
    pub overall: ErrorSummary,
    pub bins: Vec<BinSummary>,
}

/// A result measured on recorded sensor data, kept next to synthetic numbers
/// for orientation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub metric: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub fold: String,
    pub strategy: SplitStrategy,
    pub held_out_velocity: Option<f64>,
    pub window: usize,
    pub history_s: f64,
    pub test_windows: usize,
    pub best_epoch: usize,
    pub texture: Option<TextureEval>,
    pub localization: Option<ErrorSummary>,
    pub snr_baseline: Option<ErrorSummary>,
    pub velocity: Option<VelocityEval>,
    pub position_derivative_baseline: Option<VelocityEval>,
    pub real_data_reference: Vec<ReferenceValue>,
}

fn reference(metric: &str, value: &str) -> ReferenceValue {
    ReferenceValue {
        metric: metric.into(),
        value: value.into(),
    }
}

/// Results reported for the physical sensor, per task.
pub fn real_data_reference(task: Task) -> Vec<ReferenceValue> {
    match task {
        Task::Texture => vec![reference("mean held-out-velocity accuracy", "77.3%")],
        Task::Localize => vec![
            reference("mean/median localization error", "1.8 / 1.5 mm"),
            reference("SNR baseline mean/median error", "5.5 / 5.3 mm"),
        ],
        Task::Velocity => vec![
            reference("median velocity error, 0.05 / 0.10 / 0.25 s history", "5.1 / 4.5 / 5.3 mm/s"),
            reference("position-derivative baseline median error", "9.7 mm/s"),
        ],
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "task,fold,held_out_velocity,window,test_windows,best_epoch,accuracy,loc_mean_mm,loc_median_mm,snr_mean_mm,snr_median_mm,vel_mean_mm_s,vel_median_mm_s,deriv_mean_mm_s,deriv_median_mm_s"
    }

    pub fn csv_row(&self) -> String {
        let mm = |s: &Option<ErrorSummary>| (opt(s.as_ref().map(|e| e.mean)), opt(s.as_ref().map(|e| e.median)));
        let vm = |s: &Option<VelocityEval>| (opt(s.as_ref().map(|e| e.overall.mean)), opt(s.as_ref().map(|e| e.overall.median)));
        let (lm, lmed) = mm(&self.localization);
        let (sm, smed) = mm(&self.snr_baseline);
        let (vmean, vmed) = vm(&self.velocity);
        let (dm, dmed) = vm(&self.position_derivative_baseline);
        format!(
            "{},{},{},{},{},{},{},{lm},{lmed},{sm},{smed},{vmean},{vmed},{dm},{dmed}",
            self.task,
            self.fold,
            self.held_out_velocity.map(|v| v.to_string()).unwrap_or_default(),
            self.window,
            self.test_windows,
            self.best_epoch,
            opt(self.texture.as_ref().map(|t| t.accuracy)),
        )
    }

    /// Per-bin velocity errors as CSV (`bin,count,mean,median`).
    pub fn velocity_bins_csv(&self) -> Option<String> {
        let v = self.velocity.as_ref()?;
        let mut s = String::from("bin_mm_s,count,mean_mm_s,median_mm_s\n");
        for b in &v.bins {
            s.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                b.bin_mm_s, b.errors.count, b.errors.mean, b.errors.median
            ));
        }
        Some(s)
    }
}

pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(EvalReport::csv_header());
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Row-normalized confusion-matrix heatmap as a standalone SVG document.
pub fn confusion_svg(m: &ConfusionMatrix, title: &str) -> String {
    const CELL: usize = 60;
    const LEFT: usize = 70;
    const TOP: usize = 50;
    let names = ['a', 'b', 'c', 'd'];
    let width = LEFT + NUM_CLASSES * CELL + 20;
    let height = TOP + NUM_CLASSES * CELL + 50;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        width / 2,
        escape(title)
    ));
    let rows = m.row_sums();
    for (t, row) in m.counts.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            let frac = if rows[t] == 0 { 0.0 } else { count as f64 / rows[t] as f64 };
            let shade = (255.0 * (1.0 - frac)).round() as u8;
            let (x, y) = (LEFT + p * CELL, TOP + t * CELL);
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#444\"/>\n"
            ));
            let color = if frac > 0.5 { "#fff" } else { "#000" };
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{color}\">{count}</text>\n",
                x + CELL / 2,
                y + CELL / 2 + 4
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8,
            TOP + t * CELL + CELL / 2 + 4,
            names[t]
        ));
    }
    for (p, n) in names.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{n}</text>\n",
            LEFT + p * CELL + CELL / 2,
            TOP + NUM_CLASSES * CELL + 18
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">predicted</text>\n",
        LEFT + NUM_CLASSES * CELL / 2,
        TOP + NUM_CLASSES * CELL + 38
    ));
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
