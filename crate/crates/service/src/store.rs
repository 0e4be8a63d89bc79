use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use meddm_core::Session;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Where session ids come from. Ids are 128 random bits in hex.
#[derive(Debug)]
pub enum IdSource {
    /// Thread-local CSPRNG seeded by the operating system.
    Os,
    /// Reproducible ids, for tests.
    Seeded(Box<Mutex<ChaCha20Rng>>),
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded(Box::new(Mutex::new(ChaCha20Rng::seed_from_u64(seed))))
    }

    pub fn next_id(&self) -> String {
        let mut bytes = [0u8; 16];
        match self {
            IdSource::Os => rand::rng().fill(&mut bytes),
            IdSource::Seeded(rng) => rng.lock().expect("id rng poisoned").fill_bytes(&mut bytes),
        }
        hex::encode(bytes)
    }
}

pub type SharedSession = Arc<tokio::sync::Mutex<Session>>;

#[derive(Debug)]
struct Entry {
    session: SharedSession,
    touched: Instant,
}

/// In-memory sessions with idle expiry.
#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    ids: IdSource,
    entries: Mutex<HashMap<String, Entry>>,
}

impl SessionStore {
    pub fn new(ttl: Duration, ids: IdSource) -> Self {
        SessionStore { ttl, ids, entries: Mutex::new(HashMap::new()) }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// An id not currently in use.
    pub fn fresh_id(&self) -> String {
        let entries = self.entries.lock().expect("store poisoned");
        loop {
            let id = self.ids.next_id();
            if !entries.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn insert(&self, session: Session) -> SharedSession {
        let id = session.id.clone();
        let shared = Arc::new(tokio::sync::Mutex::new(session));
        let mut entries = self.entries.lock().expect("store poisoned");
        entries.insert(id, Entry { session: shared.clone(), touched: Instant::now() });
        shared
    }

    /// Looks up a live session and refreshes its idle timer.
    pub fn get(&self, id: &str) -> Option<SharedSession> {
        let now = Instant::now();
        let mut entries = self.entries.lock().expect("store poisoned");
        match entries.get_mut(id) {
            Some(e) if now.duration_since(e.touched) <= self.ttl => {
                e.touched = now;
                Some(e.session.clone())
            }
            Some(_) => {
                entries.remove(id);
                None
            }
            None => None,
        }
    }

    /// Drops idle sessions; returns how many went.
    pub fn evict_expired(&self) -> usize {
        let now = Instant::now();
        let mut entries = self.entries.lock().expect("store poisoned");
        let before = entries.len();
        entries.retain(|_, e| now.duration_since(e.touched) <= self.ttl);
        before - entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
