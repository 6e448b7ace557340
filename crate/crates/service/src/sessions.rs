use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use maskfx_core::{RasterImage, SegmentationManifest};
use uuid::Uuid;

/// Uploaded image and the manifest currently attached to it.
#[derive(Debug, Clone)]
pub struct Session {
    pub image: Arc<RasterImage>,
    pub manifest: Arc<SegmentationManifest>,
    pub created: SystemTime,
}

struct Entry {
    session: Session,
    last_used: Instant,
}

/// Shared session map; every lookup refreshes the idle clock.
#[derive(Clone, Default)]
pub struct SessionTable {
    inner: Arc<Mutex<HashMap<Uuid, Entry>>>,
}

impl SessionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, image: RasterImage, manifest: SegmentationManifest) -> Uuid {
        let id = Uuid::new_v4();
        let session = Session {
            image: Arc::new(image),
            manifest: Arc::new(manifest),
            created: SystemTime::now(),
        };
        let entry = Entry {
            session,
            last_used: Instant::now(),
        };
        self.lock().insert(id, entry);
        id
    }

    pub fn get(&self, id: &Uuid) -> Option<Session> {
        let mut map = self.lock();
        let entry = map.get_mut(id)?;
        entry.last_used = Instant::now();
        Some(entry.session.clone())
    }

    /// Swaps the manifest; false if the session is gone.
    pub fn replace_manifest(&self, id: &Uuid, manifest: SegmentationManifest) -> bool {
        let mut map = self.lock();
        match map.get_mut(id) {
            Some(entry) => {
                entry.session.manifest = Arc::new(manifest);
                entry.last_used = Instant::now();
                true
            }
            None => false,
        }
    }

    pub fn remove(&self, id: &Uuid) -> bool {
        self.lock().remove(id).is_some()
    }

    /// Drops sessions idle for longer than `ttl` as of `now`; returns how many.
    pub fn sweep(&self, now: Instant, ttl: Duration) -> usize {
        let mut map = self.lock();
        let before = map.len();
        map.retain(|_, e| now.saturating_duration_since(e.last_used) <= ttl);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<Uuid, Entry>> {
        // a panic while holding the lock cannot leave the map half-updated
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}
