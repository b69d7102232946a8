use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Fixed-depth tapped delay line. Reads are newest-first; slots that have not
/// been written yet read as `fill_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TappedDelayLine {
    depth: usize,
    fill_value: f64,
    buffer: VecDeque<f64>,
}

impl TappedDelayLine {
    pub fn new(depth: usize, fill_value: f64) -> Self {
        Self {
            depth,
            fill_value,
            buffer: VecDeque::with_capacity(depth),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of values actually pushed, saturating at `depth`.
    pub fn filled(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, v: f64) {
        if self.depth == 0 {
            return;
        }
        if self.buffer.len() == self.depth {
            self.buffer.pop_back();
        }
        self.buffer.push_front(v);
    }

    /// Tap `i` (0 = newest).
    pub fn tap(&self, i: usize) -> f64 {
        self.buffer.get(i).copied().unwrap_or(self.fill_value)
    }

    pub fn vector(&self) -> Vec<f64> {
        (0..self.depth).map(|i| self.tap(i)).collect()
    }

    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend((0..self.depth).map(|i| self.tap(i)));
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newest_first_with_padding() {
        let mut line = TappedDelayLine::new(3, 0.0);
        line.push(1.0);
        line.push(2.0);
        assert_eq!(line.vector(), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn fresh_line_reads_fill() {
        assert_eq!(TappedDelayLine::new(2, 0.0).vector(), vec![0.0, 0.0]);
        assert_eq!(TappedDelayLine::new(2, -1.5).vector(), vec![-1.5, -1.5]);
    }

    #[test]
    fn oldest_is_evicted() {
        let mut line = TappedDelayLine::new(3, 0.0);
        for v in 1..=4 {
            line.push(v as f64);
        }
        assert_eq!(line.vector(), vec![4.0, 3.0, 2.0]);
        assert_eq!(line.filled(), 3);
    }

    #[test]
    fn zero_depth_is_empty() {
        let mut line = TappedDelayLine::new(0, 0.0);
        line.push(1.0);
        assert!(line.vector().is_empty());
    }
}
