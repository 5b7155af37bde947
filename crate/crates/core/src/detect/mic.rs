use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicDetectorConfig {
    /// Required rise above the running median, in ADC counts.
    pub threshold_counts: f64,
    /// Number of preceding samples in the running median.
    pub history: usize,
}

impl Default for MicDetectorConfig {
    fn default() -> Self {
        Self {
            threshold_counts: 18.0,
            history: 20,
        }
    }
}

/// Causal single-channel onset detector.
///
/// Fires on the first sample that is at least `threshold_counts` above the
/// median of the `history` samples before it, then stays latched.
#[derive(Clone, Debug)]
pub struct MicDetector {
    cfg: MicDetectorConfig,
    ring: VecDeque<u16>,
    scratch: Vec<u16>,
    index: usize,
    fired: Option<usize>,
}

impl MicDetector {
    pub fn new(cfg: MicDetectorConfig) -> Self {
        assert!(cfg.history >= 1, "detector history must be at least one sample");
        Self {
            cfg,
            ring: VecDeque::with_capacity(cfg.history),
            scratch: Vec::with_capacity(cfg.history),
            index: 0,
            fired: None,
        }
    }

    /// Processes one sample; returns its index if this sample triggers the detector.
    pub fn feed(&mut self, sample: u16) -> Option<usize> {
        let i = self.index;
        self.index += 1;
        let mut hit = None;
        if self.fired.is_none() && self.ring.len() == self.cfg.history {
            self.scratch.clear();
            self.scratch.extend(self.ring.iter());
            self.scratch.sort_unstable();
            let h = self.scratch.len();
            let med = if h % 2 == 1 {
                self.scratch[h / 2] as f64
            } else {
                0.5 * (self.scratch[h / 2 - 1] as f64 + self.scratch[h / 2] as f64)
            };
            if sample as f64 - med >= self.cfg.threshold_counts {
                self.fired = Some(i);
                hit = Some(i);
            }
        }
        if self.ring.len() == self.cfg.history {
            self.ring.pop_front();
        }
        self.ring.push_back(sample);
        hit
    }

    pub fn fired(&self) -> Option<usize> {
        self.fired
    }

    pub fn reset(&mut self) {
        self.ring.clear();
        self.index = 0;
        self.fired = None;
    }
}

/// Index of the first detection in a stored stream.
pub fn onset_index(stream: &[u16], cfg: &MicDetectorConfig) -> Option<usize> {
    let mut det = MicDetector::new(*cfg);
    stream.iter().find_map(|&s| det.feed(s))
}
