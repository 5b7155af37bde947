use std::ops::Range;

/// Start indices of the sliding windows over a segment of length `len`.
///
/// Yields `floor((len - n) / offset) + 1` starts, or none when `len < n`.
pub fn window_starts(len: usize, n: usize, offset: usize) -> Vec<usize> {
    assert!(n >= 1 && offset >= 1, "window length and offset must be positive");
    if len < n {
        return Vec::new();
    }
    (0..=(len - n) / offset).map(|k| k * offset).collect()
}

/// Absolute sample spans of the windows inside `segment`.
pub fn window_slice(segment: &Range<usize>, n: usize, offset: usize) -> Vec<Range<usize>> {
    window_starts(segment.len(), n, offset)
        .into_iter()
        .map(|s| segment.start + s..segment.start + s + n)
        .collect()
}
