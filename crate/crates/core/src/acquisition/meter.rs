//! Scratch-memory accounting for the acquisition engine.

use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicUsize, Ordering};

/// Counts bytes of working buffers held by the engine and remembers the peak.
#[derive(Debug, Default)]
pub struct ScratchMeter {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl ScratchMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> usize {
        self.current.load(Ordering::Relaxed)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::Relaxed)
    }

    /// Registers `bytes` until the returned guard is dropped.
    pub fn track(&self, bytes: usize) -> Tracked<'_> {
        let now = self.current.fetch_add(bytes, Ordering::Relaxed) + bytes;
        self.peak.fetch_max(now, Ordering::Relaxed);
        Tracked { meter: self, bytes }
    }

    /// A zeroed `f64` buffer whose size is charged to this meter.
    pub fn buffer(&self, len: usize) -> MeteredVec<'_> {
        let guard = self.track(len * std::mem::size_of::<f64>());
        MeteredVec { data: vec![0.0; len], _guard: guard }
    }
}

#[derive(Debug)]
pub struct Tracked<'m> {
    meter: &'m ScratchMeter,
    bytes: usize,
}

impl Drop for Tracked<'_> {
    fn drop(&mut self) {
        self.meter.current.fetch_sub(self.bytes, Ordering::Relaxed);
    }
}

#[derive(Debug)]
pub struct MeteredVec<'m> {
    data: Vec<f64>,
    _guard: Tracked<'m>,
}

impl Deref for MeteredVec<'_> {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for MeteredVec<'_> {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_current_and_peak() {
        let m = ScratchMeter::new();
        {
            let _a = m.buffer(10);
            let _b = m.track(20);
            assert_eq!(m.current(), 100);
        }
        assert_eq!(m.current(), 0);
        assert_eq!(m.peak(), 100);
        let _c = m.track(8);
        assert_eq!(m.peak(), 100);
    }
}
