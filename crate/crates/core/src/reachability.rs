//! Reachable state sets of finite instances, with an on-disk cache.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use fnv::FnvHashSet;
use rayon::prelude::*;
use thiserror::Error;

use crate::evaluator::{initial_state, successor_states};
use crate::instance::{decode_state, encode_state, fingerprint, Fingerprint, Instance, State};
use crate::spec_lang::Protocol;

const MAGIC: &[u8; 8] = b"INDREACH";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("reachable set exceeds the limit of {limit} states ({count} discovered by depth {depth})")]
    LimitExceeded { limit: usize, depth: usize, count: usize },
    #[error("stale cache: {0}")]
    StaleCache(String),
    #[error("corrupt cache file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The reachable states of one protocol instance in breadth-first
/// discovery order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachSet {
    states: Vec<State>,
    index: FnvHashSet<Fingerprint>,
    instance: String,
    digest: String,
    depth: usize,
}

impl ReachSet {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, fp: Fingerprint) -> bool {
        self.index.contains(&fp)
    }

    pub fn instance(&self) -> &str {
        &self.instance
    }

    pub fn protocol_digest(&self) -> &str {
        &self.digest
    }

    /// Length of the longest shortest path from the initial state.
    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Breadth-first closure from the initial state. Each frontier level is
/// expanded in parallel and merged in frontier order, so the result does
/// not depend on the number of threads.
pub fn compute_reach(protocol: &Protocol, inst: &Instance, limit: usize) -> Result<ReachSet, ReachError> {
    let init = initial_state(protocol, inst);
    let mut index = FnvHashSet::default();
    index.insert(fingerprint(&init));
    let mut states = vec![init];
    let mut level_start = 0;
    let mut depth = 0;
    if limit == 0 {
        return Err(ReachError::LimitExceeded { limit, depth, count: 1 });
    }
    while level_start < states.len() {
        let frontier = &states[level_start..];
        let expanded: Vec<Vec<State>> = frontier
            .par_iter()
            .map(|s| successor_states(s, protocol, inst))
            .collect();
        let next_start = states.len();
        for post in expanded.into_iter().flatten() {
            if index.insert(fingerprint(&post)) {
                states.push(post);
                if states.len() > limit {
                    return Err(ReachError::LimitExceeded {
                        limit,
                        depth: depth + 1,
                        count: states.len(),
                    });
                }
            }
        }
        if states.len() > next_start {
            depth += 1;
        }
        level_start = next_start;
    }
    Ok(ReachSet {
        states,
        index,
        instance: inst.to_string(),
        digest: protocol.digest(),
        depth,
    })
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

pub fn save_reach(reach: &ReachSet, path: &Path) -> Result<(), ReachError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_bytes(&mut out, reach.digest.as_bytes());
    put_bytes(&mut out, reach.instance.as_bytes());
    out.extend_from_slice(&(reach.depth as u64).to_le_bytes());
    out.extend_from_slice(&(reach.states.len() as u64).to_le_bytes());
    for s in &reach.states {
        put_bytes(&mut out, &encode_state(s));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ReachError> {
        if self.0.len() < n {
            return Err(ReachError::Corrupt("unexpected end of file".into()));
        }
        let (h, t) = self.0.split_at(n);
        self.0 = t;
        Ok(h)
    }

    fn u32(&mut self) -> Result<u32, ReachError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ReachError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], ReachError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, ReachError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| ReachError::Corrupt("invalid utf-8".into()))
    }
}

/// Loads a cache written by [`save_reach`], refusing it unless it was
/// produced for the same protocol text and instance.
pub fn load_reach(path: &Path, protocol: &Protocol, inst: &Instance) -> Result<ReachSet, ReachError> {
    let data = fs::read(path)?;
    let mut r = Reader(&data);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(ReachError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ReachError::Corrupt(format!("unsupported format version {version}")));
    }
    let digest = r.string()?;
    let instance = r.string()?;
    if digest != protocol.digest() {
        return Err(ReachError::StaleCache("protocol has changed since the cache was written".into()));
    }
    if instance != inst.to_string() {
        return Err(ReachError::StaleCache(format!(
            "cache is for instance `{instance}`, not `{inst}`"
        )));
    }
    let depth = r.u64()? as usize;
    let count = r.u64()?;
    let mut states = Vec::new();
    let mut index = FnvHashSet::default();
    for i in 0..count {
        let s = decode_state(protocol, inst, r.bytes()?)
            .ok_or_else(|| ReachError::Corrupt(format!("state record {i} does not decode")))?;
        if !index.insert(fingerprint(&s)) {
            return Err(ReachError::Corrupt(format!("state record {i} is a duplicate")));
        }
        states.push(s);
    }
    if !r.0.is_empty() {
        return Err(ReachError::Corrupt("trailing bytes".into()));
    }
    Ok(ReachSet {
        states,
        index,
        instance,
        digest,
        depth,
    })
}
