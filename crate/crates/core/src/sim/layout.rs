//! Microphone placement on the sensing area.
//!
//! Four inner microphones form a centered square. Six outer microphones sit on
//! the feasible arcs around the square's corners: each lies exactly
//! `outer_offset_mm` from its nearest inner microphone while staying inside the
//! area by `edge_margin_mm`. The outer ring is 180° rotationally symmetric:
//! the upper-left and lower-right corners carry two microphones (at the ends of
//! their arcs), the other two corners one each (at the arc midpoint).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NUM_MICS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn square(side: f64) -> Self {
        Self {
            min: Point::new(0.0, 0.0),
            max: Point::new(side, side),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    /// Point on the border at arc-length `s` (counter-clockwise from `min`).
    pub fn border_point(&self, s: f64) -> Point {
        let (w, h) = (self.width(), self.height());
        let s = s.rem_euclid(self.perimeter());
        if s < w {
            Point::new(self.min.x + s, self.min.y)
        } else if s < w + h {
            Point::new(self.max.x, self.min.y + (s - w))
        } else if s < 2.0 * w + h {
            Point::new(self.max.x - (s - w - h), self.max.y)
        } else {
            Point::new(self.min.x, self.max.y - (s - 2.0 * w - h))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub inner_side_mm: f64,
    pub outer_offset_mm: f64,
    pub area_mm: f64,
    pub edge_margin_mm: f64,
    pub receptive_decay_mm: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            inner_side_mm: 8.0,
            outer_offset_mm: 9.0,
            area_mm: 24.0,
            edge_margin_mm: 0.5,
            receptive_decay_mm: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub mic_positions: Vec<Point>,
    pub sensing_area: Rect,
    pub receptive_decay_mm: f64,
}

/// Indices of the inner-square microphones in every layout built here.
pub const INNER_MICS: [usize; 4] = [0, 1, 2, 3];

pub fn build_layout(config: &LayoutConfig) -> Result<SensorLayout> {
    let LayoutConfig {
        inner_side_mm: side,
        outer_offset_mm: offset,
        area_mm: area,
        edge_margin_mm: margin,
        receptive_decay_mm: decay,
    } = *config;
    if !(side > 0.0 && offset > 0.0 && area > 0.0 && margin >= 0.0) {
        return Err(Error::InvalidLayout(format!(
            "dimensions must be positive: {config:?}"
        )));
    }
    if !(decay > 0.0) {
        return Err(Error::InvalidLayout(
            "receptive_decay_mm must be positive".into(),
        ));
    }
    let sensing_area = Rect::square(area);
    let c = area / 2.0;
    let h = side / 2.0;

    // Inner square, counter-clockwise from lower-left.
    let inner = [
        Point::new(c - h, c - h),
        Point::new(c + h, c - h),
        Point::new(c + h, c + h),
        Point::new(c - h, c + h),
    ];
    if let Some(p) = inner.iter().find(|p| !sensing_area.contains(p)) {
        return Err(Error::InvalidLayout(format!(
            "inner microphone at ({:.2}, {:.2}) lies outside the {area} mm area",
            p.x, p.y
        )));
    }

    // Room between an inner microphone and the area edge along each axis.
    let room = c - h - margin;
    if room <= 0.0 || offset > room * std::f64::consts::SQRT_2 {
        return Err(Error::InvalidLayout(format!(
            "outer ring at {offset} mm does not fit inside the {area} mm area"
        )));
    }
    // Angle from the outward axis; both coordinates must stay within `room`.
    let lo = (room / offset).min(1.0).acos();
    let hi = std::f64::consts::FRAC_PI_2 - lo;
    let mid = std::f64::consts::FRAC_PI_4;

    // Outward diagonal direction for each inner corner.
    let corner = |k: usize, theta: f64| -> Point {
        let (sx, sy) = match k {
            0 => (-1.0, -1.0),
            1 => (1.0, -1.0),
            2 => (1.0, 1.0),
            _ => (-1.0, 1.0),
        };
        Point::new(
            inner[k].x + sx * offset * theta.cos(),
            inner[k].y + sy * offset * theta.sin(),
        )
    };
    let outer = [
        corner(3, lo),
        corner(3, hi),
        corner(2, mid),
        corner(1, hi),
        corner(1, lo),
        corner(0, mid),
    ];

    let mut mic_positions = inner.to_vec();
    mic_positions.extend_from_slice(&outer);
    for p in &mic_positions {
        if !sensing_area.contains(p) {
            return Err(Error::InvalidLayout(format!(
                "microphone at ({:.3}, {:.3}) lies outside the sensing area",
                p.x, p.y
            )));
        }
    }
    Ok(SensorLayout {
        mic_positions,
        sensing_area,
        receptive_decay_mm: decay,
    })
}

impl Default for SensorLayout {
    fn default() -> Self {
        build_layout(&LayoutConfig::default()).expect("default layout is valid")
    }
}

impl SensorLayout {
    /// Amplitude factor `exp(-d / decay)` for a contact at `p` seen by `mic`.
    pub fn receptive_gain(&self, mic: usize, p: &Point) -> f64 {
        (-self.mic_positions[mic].dist(p) / self.receptive_decay_mm).exp()
    }

    pub fn nearest_mic(&self, p: &Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in self.mic_positions.iter().enumerate() {
            let d = m.dist(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Checks every structural invariant of the layout.
    pub fn validate(&self, inner_side_mm: f64, outer_offset_mm: f64) -> Result<()> {
        const TOL: f64 = 1e-9;
        if self.mic_positions.len() != NUM_MICS {
            return Err(Error::InvalidLayout(format!(
                "expected {NUM_MICS} microphones, got {}",
                self.mic_positions.len()
            )));
        }
        if !(self.receptive_decay_mm > 0.0) {
            return Err(Error::InvalidLayout("non-positive receptive decay".into()));
        }
        if let Some(p) = self
            .mic_positions
            .iter()
            .find(|p| !self.sensing_area.contains(p))
        {
            return Err(Error::InvalidLayout(format!(
                "microphone ({}, {}) outside the sensing area",
                p.x, p.y
            )));
        }
        let inner: Vec<Point> = INNER_MICS.iter().map(|&i| self.mic_positions[i]).collect();
        for (i, a) in inner.iter().enumerate() {
            let nn = inner
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.dist(b))
                .fold(f64::INFINITY, f64::min);
            if (nn - inner_side_mm).abs() > TOL {
                return Err(Error::InvalidLayout(format!(
                    "inner nearest-neighbor distance {nn} != {inner_side_mm}"
                )));
            }
        }
        for p in &self.mic_positions[INNER_MICS.len()..] {
            let nn = inner.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min);
            if (nn - outer_offset_mm).abs() > TOL {
                return Err(Error::InvalidLayout(format!(
                    "outer microphone is {nn} mm from the inner square, expected {outer_offset_mm}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid() {
        let cfg = LayoutConfig::default();
        let layout = build_layout(&cfg).unwrap();
        layout.validate(cfg.inner_side_mm, cfg.outer_offset_mm).unwrap();
    }

    #[test]
    fn inner_mics_are_centered_square() {
        let layout = SensorLayout::default();
        let c = layout.sensing_area.center();
        for &i in &INNER_MICS {
            let p = layout.mic_positions[i];
            assert!(((p.x - c.x).abs() - 4.0).abs() < 1e-12);
            assert!(((p.y - c.y).abs() - 4.0).abs() < 1e-12);
        }
        let s2 = 8.0 * std::f64::consts::SQRT_2;
        for &i in &INNER_MICS {
            for &j in &INNER_MICS {
                if i < j {
                    let d = layout.mic_positions[i].dist(&layout.mic_positions[j]);
                    assert!((d - 8.0).abs() < 1e-12 || (d - s2).abs() < 1e-12, "{d}");
                }
            }
        }
    }

    #[test]
    fn oversized_inner_square_is_rejected() {
        let cfg = LayoutConfig {
            inner_side_mm: 30.0,
            ..Default::default()
        };
        assert!(matches!(build_layout(&cfg), Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn oversized_outer_ring_is_rejected() {
        let cfg = LayoutConfig {
            outer_offset_mm: 12.0,
            ..Default::default()
        };
        assert!(build_layout(&cfg).is_err());
    }

    #[test]
    fn nonpositive_decay_is_rejected() {
        let cfg = LayoutConfig {
            receptive_decay_mm: 0.0,
            ..Default::default()
        };
        assert!(build_layout(&cfg).is_err());
    }

    #[test]
    fn border_point_walks_the_perimeter() {
        let r = Rect::square(24.0);
        assert_eq!(r.border_point(0.0), Point::new(0.0, 0.0));
        assert_eq!(r.border_point(30.0), Point::new(24.0, 6.0));
        assert_eq!(r.border_point(60.0), Point::new(12.0, 24.0));
        assert_eq!(r.border_point(90.0), Point::new(0.0, 6.0));
        for k in 0..200 {
            let p = r.border_point(k as f64 * 0.7);
            let on_edge = p.x == 0.0 || p.y == 0.0 || p.x == 24.0 || p.y == 24.0;
            assert!(on_edge && r.contains(&p));
        }
    }
}
