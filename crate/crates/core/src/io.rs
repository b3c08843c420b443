//! Event ingestion, graph persistence, and truth files.
//!
//! Events are newline-delimited JSON records, one observation per line,
//! streamable in one pass with bounded memory per batch. Graph files embed
//! a format version and a checksum over the payload bytes; everything is
//! written in canonical order, so identical graphs produce identical bytes.
//! All writes go through a temp file plus rename.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Graph, MacId, Mapping, Match, ObservationSet, UserId};
use crate::synth::WorldTruth;

/// Graph file format version this build reads and writes.
pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// One observation event: an identifier sighted at a location on a day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub day: u32,
    pub loc: u32,
    pub kind: EventKind,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    User,
    Mac,
}

/// Parses newline-delimited events into batches keyed by (day, location).
/// Duplicate identifiers collapse by set semantics; a token seen under
/// both kinds aborts with a namespace collision; an event-free stream is
/// an error.
pub fn read_events(reader: impl BufRead) -> Result<ObservationSet> {
    let mut obs = ObservationSet::new();
    let mut seen_users: HashSet<String> = HashSet::new();
    let mut seen_macs: HashSet<String> = HashSet::new();
    let mut records = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: lineno,
                reason: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "empty id".into(),
            });
        }
        match record.kind {
            EventKind::User => {
                if seen_macs.contains(&record.id) {
                    return Err(Error::NamespaceCollision(record.id));
                }
                seen_users.insert(record.id.clone());
                obs.insert_user(record.day, record.loc, UserId(record.id));
            }
            EventKind::Mac => {
                if seen_users.contains(&record.id) {
                    return Err(Error::NamespaceCollision(record.id));
                }
                seen_macs.insert(record.id.clone());
                obs.insert_mac(record.day, record.loc, MacId(record.id));
            }
        }
        records += 1;
    }
    if records == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(obs)
}

pub fn parse_events(path: &Path) -> Result<ObservationSet> {
    read_events(BufReader::new(File::open(path)?))
}

/// Writes a batch collection as events in canonical (day, location, kind,
/// token) order, so rewrites are byte-identical.
pub fn write_events(obs: &ObservationSet, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for batch in obs.iter() {
        for user in &batch.users {
            let record = EventRecord {
                day: batch.day,
                loc: batch.location,
                kind: EventKind::User,
                id: user.0.clone(),
            };
            serde_json::to_writer(&mut out, &record).expect("event serialization is infallible");
            out.push(b'\n');
        }
        for mac in &batch.macs {
            let record = EventRecord {
                day: batch.day,
                loc: batch.location,
                kind: EventKind::Mac,
                id: mac.0.clone(),
            };
            serde_json::to_writer(&mut out, &record).expect("event serialization is infallible");
            out.push(b'\n');
        }
    }
    atomic_write(path, &out)
}

#[derive(Serialize)]
struct GraphPayload<'g> {
    matches: Vec<(&'g UserId, &'g MacId)>,
    mappings: &'g [Mapping],
}

#[derive(Deserialize)]
struct GraphPayloadOwned {
    matches: Vec<(UserId, MacId)>,
    mappings: Vec<Mapping>,
}

#[derive(Deserialize)]
struct GraphFileHeader<'a> {
    format_version: u32,
    checksum: String,
    #[serde(borrow)]
    payload: &'a serde_json::value::RawValue,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Persists a normalized graph: header with format version and payload
/// checksum, matches as pairs, mappings with sorted sides, in canonical
/// order. Byte-stable across runs.
pub fn write_graph(g: &Graph, path: &Path) -> Result<()> {
    let payload = GraphPayload {
        matches: g.matches.iter().map(|m| (&m.user, &m.mac)).collect(),
        mappings: &g.mappings,
    };
    let payload_json = serde_json::to_string(&payload).expect("graph serialization is infallible");
    let checksum = sha256_hex(payload_json.as_bytes());
    let doc = format!(
        "{{\"format_version\":{GRAPH_FORMAT_VERSION},\"checksum\":\"{checksum}\",\"payload\":{payload_json}}}\n"
    );
    atomic_write(path, doc.as_bytes())
}

/// Reads a graph back, verifying version and checksum before trusting the
/// payload. Round-trips [`write_graph`] exactly.
pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    let header: GraphFileHeader<'_> = serde_json::from_str(&text)
        .map_err(|e| Error::CorruptGraph(format!("{}: {e}", path.display())))?;
    if header.format_version != GRAPH_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: header.format_version,
            expected: GRAPH_FORMAT_VERSION,
        });
    }
    let payload_bytes = header.payload.get().as_bytes();
    let checksum = sha256_hex(payload_bytes);
    if checksum != header.checksum {
        return Err(Error::CorruptGraph(format!(
            "{}: checksum mismatch",
            path.display()
        )));
    }
    let payload: GraphPayloadOwned = serde_json::from_str(header.payload.get())
        .map_err(|e| Error::CorruptGraph(format!("{}: {e}", path.display())))?;
    Ok(Graph {
        mappings: payload.mappings,
        matches: payload
            .matches
            .into_iter()
            .map(|(user, mac)| Match { user, mac })
            .collect(),
    })
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    device: u32,
    user: String,
    mac: String,
}

/// Writes one record per device: index, primary user token, mac token.
pub fn write_truth(truth: &WorldTruth, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for (d, (user, mac)) in truth.pairs.iter().enumerate() {
        let record = TruthRecord {
            device: d as u32,
            user: user.0.clone(),
            mac: mac.0.clone(),
        };
        serde_json::to_writer(&mut out, &record).expect("truth serialization is infallible");
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

/// Reads the device pairing back for verification.
pub fn read_truth_pairs(path: &Path) -> Result<Vec<(UserId, MacId)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TruthRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
        pairs.push((UserId(record.user), MacId(record.mac)));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct ScheduleRecord {
    device: u32,
    day: u32,
    loc: Option<u32>,
}

/// Debug dump of the presence schedule, one record per (device, day).
pub fn write_schedule(truth: &WorldTruth, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for (t, day_schedule) in truth.schedule.iter().enumerate() {
        for (d, loc) in day_schedule.iter().enumerate() {
            let record = ScheduleRecord {
                device: d as u32,
                day: t as u32,
                loc: *loc,
            };
            serde_json::to_writer(&mut out, &record).expect("schedule serialization is infallible");
            out.push(b'\n');
        }
    }
    atomic_write(path, &out)
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = format!(
        ".{}.tmp{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into()),
        std::process::id()
    );
    let tmp = match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => dir.join(name),
        None => std::path::PathBuf::from(name),
    };
    {
        let mut writer = BufWriter::new(File::create(&tmp)?);
        writer.write_all(bytes)?;
        writer.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
