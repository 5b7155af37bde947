use std::ops::Range;

use crate::sim::TextureId;
use crate::stats::median;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowLabels {
    pub texture: Option<TextureId>,
    pub pos_mm: [f64; 2],
    pub vel_mm_s: f64,
}

/// Position at the window's last timestep and median planar speed over it.
pub fn label_window(
    span: &Range<usize>,
    robot_pos_mm: &[[f64; 3]],
    robot_vel_mm_s: &[[f64; 3]],
    texture: Option<TextureId>,
) -> Result<WindowLabels> {
    let len = robot_pos_mm.len().min(robot_vel_mm_s.len());
    if span.is_empty() || span.end > len {
        return Err(Error::MissingRobotSamples {
            start: span.start,
            end: span.end,
            len,
        });
    }
    let last = robot_pos_mm[span.end - 1];
    let speeds: Vec<f64> = robot_vel_mm_s[span.clone()]
        .iter()
        .map(|v| v[0].hypot(v[1]))
        .collect();
    Ok(WindowLabels {
        texture,
        pos_mm: [last[0], last[1]],
        vel_mm_s: median(&speeds).unwrap_or(0.0),
    })
}
