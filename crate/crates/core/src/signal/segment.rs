use std::ops::Range;

use crate::sim::DragEpisode;

pub const DEFAULT_VEL_THRESHOLD_MM_S: f64 = 5.0;

/// One contiguous run of significant motion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub drag_id: String,
    pub span: Range<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.span.len()
    }

    pub fn is_empty(&self) -> bool {
        self.span.is_empty()
    }
}

/// Maximal runs where `speeds[i] >= threshold`, dropping runs shorter than `min_len`.
pub fn motion_runs(speeds: &[f64], threshold: f64, min_len: usize) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &s) in speeds.iter().enumerate() {
        match (s >= threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                runs.push(a..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push(a..speeds.len());
    }
    runs.retain(|r| r.len() >= min_len.max(1));
    runs
}

/// Splits an episode into drag segments tagged `<episode_id>#<k>`.
pub fn segment_drags(episode: &DragEpisode, vel_threshold: f64, min_len: usize) -> Vec<Segment> {
    motion_runs(&episode.planar_speeds(), vel_threshold, min_len)
        .into_iter()
        .enumerate()
        .map(|(k, span)| Segment {
            drag_id: format!("{}#{k}", episode.episode_id),
            span,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(parts: &[(f64, usize)]) -> Vec<f64> {
        parts
            .iter()
            .flat_map(|&(v, n)| std::iter::repeat_n(v, n))
            .collect()
    }

    #[test]
    fn single_run() {
        let s = profile(&[(0.0, 300), (40.0, 1200), (0.0, 100)]);
        assert_eq!(motion_runs(&s, 5.0, 500), vec![300..1500]);
    }

    #[test]
    fn no_motion() {
        assert!(motion_runs(&vec![0.0; 1000], 5.0, 500).is_empty());
    }

    #[test]
    fn two_runs_get_distinct_ids() {
        let speeds = profile(&[(0.0, 50), (40.0, 600), (0.0, 50), (40.0, 600), (0.0, 10)]);
        let ep = crate::signal::test_episode(vec![[1241; 10]; speeds.len()], speeds);
        let segs = segment_drags(&ep, 5.0, 500);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].span, 50..650);
        assert_eq!(segs[1].span, 700..1300);
        assert_ne!(segs[0].drag_id, segs[1].drag_id);
    }

    #[test]
    fn short_runs_dropped_and_open_ended_run_kept() {
        let s = profile(&[(40.0, 100), (0.0, 10), (40.0, 700)]);
        assert_eq!(motion_runs(&s, 5.0, 500), vec![110..810]);
    }
}
