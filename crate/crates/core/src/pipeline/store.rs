use super::PipelineError;
use crate::image::GrayImage;
use crate::model_io::read_image;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

/// Running total and high-water mark of image bytes held in memory.
#[derive(Debug, Default)]
pub struct ResidentCounter {
    current: AtomicU64,
    peak: AtomicU64,
}

impl ResidentCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, bytes: u64) {
        let now = self.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    pub fn sub(&self, bytes: u64) {
        self.current.fetch_sub(bytes, Ordering::SeqCst);
    }

    pub fn current(&self) -> u64 {
        self.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::SeqCst)
    }

    /// Restarts the high-water mark from the current total.
    pub fn reset_peak(&self) {
        self.peak.store(self.current(), Ordering::SeqCst);
    }
}

/// Gray tiles loaded for one cluster; every byte is reported to the counter
/// and released when the cache is dropped.
pub struct TileCache<'c> {
    counter: &'c ResidentCounter,
    tiles: BTreeMap<u32, GrayImage>,
}

impl<'c> TileCache<'c> {
    pub fn new(counter: &'c ResidentCounter) -> Self {
        Self { counter, tiles: BTreeMap::new() }
    }

    /// Decodes `path` and keeps its gray plane under `id`. The decoded 8-bit
    /// buffer counts as resident until it is converted.
    pub fn load(&mut self, id: u32, path: &Path) -> Result<(), PipelineError> {
        if self.tiles.contains_key(&id) {
            return Ok(());
        }
        let image = read_image(path)?;
        let raw = image.byte_len() as u64;
        self.counter.add(raw);
        let gray = image.to_gray();
        self.counter.add(gray.byte_len() as u64);
        drop(image);
        self.counter.sub(raw);
        self.tiles.insert(id, gray);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&GrayImage> {
        self.tiles.get(&id)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

impl Drop for TileCache<'_> {
    fn drop(&mut self) {
        for t in self.tiles.values() {
            self.counter.sub(t.byte_len() as u64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::model_io::write_image;

    #[test]
    fn counter_tracks_peak() {
        let c = ResidentCounter::new();
        c.add(10);
        c.add(5);
        c.sub(12);
        assert_eq!((c.current(), c.peak()), (3, 15));
        c.reset_peak();
        assert_eq!(c.peak(), 3);
    }

    #[test]
    fn cache_releases_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ppm");
        write_image(&p, &Image::new(4, 3, 3)).unwrap();
        let c = ResidentCounter::new();
        {
            let mut cache = TileCache::new(&c);
            cache.load(1, &p).unwrap();
            cache.load(1, &p).unwrap();
            assert_eq!(c.current(), 4 * 3 * 4);
            assert_eq!(c.peak(), 4 * 3 * 4 + 4 * 3 * 3);
            assert_eq!(cache.len(), 1);
        }
        assert_eq!(c.current(), 0);
    }
}
