use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Questions a single worker may answer in total.
pub const WORKER_QUOTA: usize = 200;
/// Ratings needed before an image's mean becomes its label.
pub const MIN_RATINGS: usize = 5;
/// Appends between aggregate snapshots.
const SNAPSHOT_EVERY: usize = 50;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("worker {0:?} has used the question quota")]
    Quota(String),
    #[error("invalid rating: {0}")]
    Validation(String),
    #[error("image {given:?} is not the current item (expected {expected:?})")]
    Ordering { given: String, expected: Option<String> },
    #[error("worker {worker:?} already rated image {image:?}")]
    Conflict { worker: String, image: String },
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown image {0:?}")]
    NotFound(String),
    #[error("rating log: {0}")]
    Log(String),
    #[error("startup: {0}")]
    Startup(String),
}

impl From<std::io::Error> for AnnotationError {
    fn from(e: std::io::Error) -> Self {
        AnnotationError::Log(e.to_string())
    }
}

type Result<T> = std::result::Result<T, AnnotationError>;

/// One worker's rating of one image on the 9-point scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub worker_id: String,
    pub image_id: String,
    pub valence: u8,
    pub arousal: u8,
    /// UTC seconds.
    pub timestamp: u64,
}

impl RatingEvent {
    fn validate(&self) -> Result<()> {
        for (axis, v) in [("valence", self.valence), ("arousal", self.arousal)] {
            if !(1..=9).contains(&v) {
                return Err(AnnotationError::Validation(format!("{axis} {v} outside 1..=9")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateLabel {
    pub image_id: String,
    pub n_ratings: usize,
    pub valence_mean: Option<f64>,
    pub arousal_mean: Option<f64>,
    pub finalized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerSession {
    pub session_id: String,
    pub worker_id: String,
    pub order: Vec<String>,
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreviousItem {
    pub image_id: String,
    pub valence: u8,
    pub arousal: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextItem {
    Rate {
        image_id: String,
        previous: Option<PreviousItem>,
    },
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub images: Vec<String>,
    pub seed: u64,
    pub quota: usize,
    pub min_ratings: usize,
}

impl ProtocolConfig {
    pub fn new(images: Vec<String>, seed: u64) -> Self {
        Self {
            images,
            seed,
            quota: WORKER_QUOTA,
            min_ratings: MIN_RATINGS,
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
struct Tally {
    n: usize,
    valence: u64,
    arousal: u64,
}

/// In-memory protocol state derived from the rating events.
#[derive(Debug, Clone)]
pub struct Protocol {
    config: ProtocolConfig,
    rated: HashMap<String, HashSet<String>>,
    last: HashMap<String, RatingEvent>,
    tallies: HashMap<String, Tally>,
    sessions: HashMap<String, WorkerSession>,
    next_session: u64,
}

fn worker_seed(worker: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(worker.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

impl Protocol {
    pub fn new(mut config: ProtocolConfig) -> Self {
        config.images.sort();
        config.images.dedup();
        Self {
            config,
            rated: HashMap::new(),
            last: HashMap::new(),
            tallies: HashMap::new(),
            sessions: HashMap::new(),
            next_session: 1,
        }
    }

    pub fn images(&self) -> &[String] {
        &self.config.images
    }

    pub fn has_image(&self, id: &str) -> bool {
        self.config.images.binary_search_by(|i| i.as_str().cmp(id)).is_ok()
    }

    pub fn ratings_by(&self, worker: &str) -> usize {
        self.rated.get(worker).map_or(0, HashSet::len)
    }

    fn already_rated(&self, worker: &str, image: &str) -> bool {
        self.rated.get(worker).is_some_and(|s| s.contains(image))
    }

    /// Applies an event without any session bookkeeping (log replay).
    pub fn apply(&mut self, event: RatingEvent) -> Result<()> {
        event.validate()?;
        if self.already_rated(&event.worker_id, &event.image_id) {
            return Err(AnnotationError::Conflict {
                worker: event.worker_id,
                image: event.image_id,
            });
        }
        self.rated
            .entry(event.worker_id.clone())
            .or_default()
            .insert(event.image_id.clone());
        let t = self.tallies.entry(event.image_id.clone()).or_default();
        t.n += 1;
        t.valence += u64::from(event.valence);
        t.arousal += u64::from(event.arousal);
        self.last.insert(event.worker_id.clone(), event);
        Ok(())
    }

    /// Starts a session over the worker's unrated images in a per-worker
    /// seeded order, cut to the remaining quota.
    pub fn open_session(&mut self, worker: &str) -> Result<&WorkerSession> {
        let done = self.ratings_by(worker);
        if done >= self.config.quota {
            return Err(AnnotationError::Quota(worker.to_string()));
        }
        let mut order: Vec<String> = self
            .config
            .images
            .iter()
            .filter(|i| !self.already_rated(worker, i))
            .cloned()
            .collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(worker_seed(worker, self.config.seed)));
        order.truncate(self.config.quota - done);
        let session_id = format!("s{}", self.next_session);
        self.next_session += 1;
        let session = WorkerSession {
            session_id: session_id.clone(),
            worker_id: worker.to_string(),
            order,
            cursor: 0,
        };
        Ok(self.sessions.entry(session_id).or_insert(session))
    }

    pub fn remaining_quota(&self, worker: &str) -> usize {
        self.config.quota.saturating_sub(self.ratings_by(worker))
    }

    pub fn session(&self, id: &str) -> Result<&WorkerSession> {
        self.sessions
            .get(id)
            .ok_or_else(|| AnnotationError::UnknownSession(id.to_string()))
    }

    /// Current image plus the worker's most recent rating as anchor.
    pub fn next_item(&mut self, session_id: &str) -> Result<NextItem> {
        let session = self
            .sessions
            .get(session_id)
            .ok_or_else(|| AnnotationError::UnknownSession(session_id.to_string()))?;
        let worker = session.worker_id.clone();
        // skip items rated meanwhile through another session of the same worker
        let mut cursor = session.cursor;
        while cursor < session.order.len() && self.already_rated(&worker, &session.order[cursor]) {
            cursor += 1;
        }
        let current = session.order.get(cursor).cloned();
        self.sessions.get_mut(session_id).unwrap().cursor = cursor;
        let Some(image_id) = current else {
            return Ok(NextItem::Complete);
        };
        if self.ratings_by(&worker) >= self.config.quota {
            return Ok(NextItem::Complete);
        }
        let previous = self.last.get(&worker).map(|e| PreviousItem {
            image_id: e.image_id.clone(),
            valence: e.valence,
            arousal: e.arousal,
        });
        Ok(NextItem::Rate { image_id, previous })
    }

    /// Checks a submission against the session without changing state.
    pub fn check_submission(&self, session_id: &str, image_id: &str, valence: i64, arousal: i64) -> Result<RatingEvent> {
        let session = self.session(session_id)?;
        for (axis, v) in [("valence", valence), ("arousal", arousal)] {
            if !(1..=9).contains(&v) {
                return Err(AnnotationError::Validation(format!("{axis} {v} outside 1..=9")));
            }
        }
        if self.already_rated(&session.worker_id, image_id) {
            return Err(AnnotationError::Conflict {
                worker: session.worker_id.clone(),
                image: image_id.to_string(),
            });
        }
        let expected = session.order.get(session.cursor);
        if expected.map(String::as_str) != Some(image_id) {
            return Err(AnnotationError::Ordering {
                given: image_id.to_string(),
                expected: expected.cloned(),
            });
        }
        if self.ratings_by(&session.worker_id) >= self.config.quota {
            return Err(AnnotationError::Quota(session.worker_id.clone()));
        }
        Ok(RatingEvent {
            worker_id: session.worker_id.clone(),
            image_id: image_id.to_string(),
            valence: valence as u8,
            arousal: arousal as u8,
            timestamp: 0,
        })
    }

    fn advance(&mut self, session_id: &str) {
        if let Some(s) = self.sessions.get_mut(session_id) {
            s.cursor += 1;
        }
    }

    pub fn aggregate(&self, image_id: &str) -> Result<AggregateLabel> {
        match self.tallies.get(image_id) {
            Some(t) => Ok(self.label_of(image_id, t)),
            None if self.has_image(image_id) => Ok(self.label_of(image_id, &Tally::default())),
            None => Err(AnnotationError::NotFound(image_id.to_string())),
        }
    }

    fn label_of(&self, image_id: &str, t: &Tally) -> AggregateLabel {
        let mean = |sum: u64| (t.n > 0).then(|| sum as f64 / t.n as f64);
        AggregateLabel {
            image_id: image_id.to_string(),
            n_ratings: t.n,
            valence_mean: mean(t.valence),
            arousal_mean: mean(t.arousal),
            finalized: t.n >= self.config.min_ratings,
        }
    }

    /// Aggregates of every image with at least one rating, sorted by id.
    pub fn aggregates(&self) -> Vec<AggregateLabel> {
        let mut out: Vec<_> = self
            .tallies
            .iter()
            .map(|(id, t)| self.label_of(id, t))
            .collect();
        out.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        out
    }
}

/// Parses the log, returning the events and the byte length of the
/// well-formed prefix. A torn final line (crash mid-append) is excluded;
/// any other malformed line is an error.
fn scan_log(path: &Path) -> Result<(Vec<RatingEvent>, u64)> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut events = Vec::new();
    let mut offset = 0usize;
    let mut no = 0;
    while offset < bytes.len() {
        no += 1;
        let (line, next, complete) = match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(i) => (&bytes[offset..offset + i], offset + i + 1, true),
            None => (&bytes[offset..], bytes.len(), false),
        };
        if line.iter().all(u8::is_ascii_whitespace) {
            offset = next;
            continue;
        }
        match serde_json::from_slice(line) {
            Ok(e) if complete => events.push(e),
            Ok(_) => break,
            Err(_) if next == bytes.len() => break,
            Err(e) => return Err(AnnotationError::Log(format!("line {no}: {e}"))),
        }
        offset = next;
    }
    Ok((events, offset as u64))
}

/// Reads every complete event of a JSON-lines rating log.
pub fn read_log(path: &Path) -> Result<Vec<RatingEvent>> {
    scan_log(path).map(|(events, _)| events)
}

/// Rebuilds protocol state from a log file.
pub fn replay_log(path: &Path, config: ProtocolConfig) -> Result<Protocol> {
    apply_all(Protocol::new(config), read_log(path)?)
}

fn apply_all(mut protocol: Protocol, events: Vec<RatingEvent>) -> Result<Protocol> {
    for event in events {
        protocol.apply(event)?;
    }
    Ok(protocol)
}

/// Protocol state backed by the durable rating log.
#[derive(Debug)]
pub struct RatingStore {
    protocol: Protocol,
    log_path: PathBuf,
    log: File,
    since_snapshot: usize,
}

impl RatingStore {
    /// Opens (or creates) the log and replays it.
    pub fn open(log_path: impl Into<PathBuf>, config: ProtocolConfig) -> Result<Self> {
        let log_path = log_path.into();
        let (events, valid) = scan_log(&log_path)?;
        let protocol = apply_all(Protocol::new(config), events)?;
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        // drop a torn tail so the next append starts on a fresh line
        if log.metadata()?.len() > valid {
            log.set_len(valid)?;
            log.sync_all()?;
        }
        Ok(Self {
            protocol,
            log_path,
            log,
            since_snapshot: 0,
        })
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn protocol_mut(&mut self) -> &mut Protocol {
        &mut self.protocol
    }

    pub fn snapshot_path(&self) -> PathBuf {
        let mut p = self.log_path.clone().into_os_string();
        p.push(".snapshot.json");
        p.into()
    }

    /// Validates, appends durably, then updates the derived state.
    pub fn submit(&mut self, session_id: &str, image_id: &str, valence: i64, arousal: i64, timestamp: u64) -> Result<RatingEvent> {
        let mut event = self
            .protocol
            .check_submission(session_id, image_id, valence, arousal)?;
        event.timestamp = timestamp;
        let mut line = serde_json::to_vec(&event).map_err(|e| AnnotationError::Log(e.to_string()))?;
        line.push(b'\n');
        self.log.write_all(&line)?;
        self.log.sync_data()?;
        self.protocol.apply(event.clone())?;
        self.protocol.advance(session_id);
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_EVERY {
            self.write_snapshot()?;
        }
        Ok(event)
    }

    /// Writes the derived aggregates next to the log.
    pub fn write_snapshot(&mut self) -> Result<()> {
        let json = serde_json::to_vec_pretty(&self.protocol.aggregates())
            .map_err(|e| AnnotationError::Log(e.to_string()))?;
        let tmp = self.snapshot_path().with_extension("tmp");
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, self.snapshot_path())?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.log.sync_all()?;
        self.write_snapshot()
    }
}
