//! Text persistence for profiles, PAC links and id maps.
//!
//! All files are comma-separated UTF-8 with `\n` line endings. Output order
//! is fixed (profiles by id, links as given, id maps by numeric id) so the
//! same data always produces the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::emotion::{Aii, EmotionLabel, EmotionVector, NUM_EMOTIONS};
use crate::ingest::{EntityId, IdMap, ScopedId};
use crate::pac::{LinkKind, PacLink};

/// Significant digits written for every profile component.
pub const PROFILE_DIGITS: usize = 10;

/// Decimal places written for link scores.
pub const AII_DECIMALS: usize = 6;

const LINK_HEADER: [&str; 6] = ["source_dataset", "source_id", "target_dataset", "target_id", "aii", "kind"];
const ID_MAP_HEADER: [&str; 2] = ["numeric_id", "raw_id"];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
}

impl StoreError {
    fn parse(row: usize, message: impl std::fmt::Display) -> Self {
        StoreError::Parse { row, message: message.to_string() }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Shortest decimal rendering with at most `digits` significant digits.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn profile_header() -> Vec<&'static str> {
    std::iter::once("id").chain(EmotionLabel::ALL.iter().map(|l| l.name())).collect()
}

pub fn write_profiles<W: Write>(out: W, profiles: &BTreeMap<EntityId, EmotionVector>) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(profile_header()).map_err(csv_io)?;
    for (id, v) in profiles {
        let mut row = Vec::with_capacity(NUM_EMOTIONS + 1);
        row.push(id.to_string());
        row.extend(v.values().iter().map(|&x| format_significant(x, PROFILE_DIGITS)));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()
}

pub fn save_profiles(profiles: &BTreeMap<EntityId, EmotionVector>, path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    write_profiles(&mut buf, profiles).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_profiles<R: Read>(input: R) -> Result<BTreeMap<EntityId, EmotionVector>, StoreError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = r.headers().map_err(|e| StoreError::parse(1, e))?.clone();
    let header_ok = headers.len() == NUM_EMOTIONS + 1
        && headers[0].trim() == "id"
        && EmotionLabel::ALL
            .iter()
            .zip(headers.iter().skip(1))
            .all(|(l, h)| h.parse::<EmotionLabel>().ok() == Some(*l));
    if !header_ok {
        return Err(StoreError::Header {
            expected: profile_header().join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = BTreeMap::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| StoreError::parse(row, e))?;
        if record.len() != NUM_EMOTIONS + 1 {
            return Err(StoreError::parse(row, format!("expected {} fields, found {}", NUM_EMOTIONS + 1, record.len())));
        }
        let id = record[0].trim();
        if id.is_empty() {
            return Err(StoreError::parse(row, "empty id"));
        }
        let mut values = [0.0; NUM_EMOTIONS];
        for (slot, field) in values.iter_mut().zip(record.iter().skip(1)) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| StoreError::parse(row, format!("`{field}` is not a number")))?;
        }
        let v = EmotionVector::new(values).map_err(|e| StoreError::parse(row, e))?;
        if out.insert(EntityId::from(id), v).is_some() {
            return Err(StoreError::DuplicateId { row, id: id.to_string() });
        }
    }
    Ok(out)
}

pub fn load_profiles(path: &Path) -> Result<BTreeMap<EntityId, EmotionVector>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_profiles(io::BufReader::new(file))
}

pub fn write_links<W: Write>(out: W, links: &[PacLink]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LINK_HEADER).map_err(csv_io)?;
    for link in links {
        w.write_record([
            link.source.dataset.as_str(),
            link.source.id.as_str(),
            link.target.dataset.as_str(),
            link.target.id.as_str(),
            &format!("{:.*}", AII_DECIMALS, link.aii.value()),
            link.kind.as_str(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()
}

pub fn save_links(links: &[PacLink], path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    write_links(&mut buf, links).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_links<R: Read>(input: R) -> Result<Vec<PacLink>, StoreError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| StoreError::parse(1, e))?.clone();
    if headers.iter().ne(LINK_HEADER.iter().copied()) {
        return Err(StoreError::Header {
            expected: LINK_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| StoreError::parse(row, e))?;
        let aii = record[4]
            .parse::<f64>()
            .ok()
            .and_then(Aii::new)
            .ok_or_else(|| StoreError::parse(row, format!("bad aii `{}`", &record[4])))?;
        let kind = LinkKind::parse(&record[5])
            .ok_or_else(|| StoreError::parse(row, format!("unknown link kind `{}`", &record[5])))?;
        out.push(PacLink {
            source: ScopedId::new(&record[0], &record[1]),
            target: ScopedId::new(&record[2], &record[3]),
            aii,
            kind,
        });
    }
    Ok(out)
}

pub fn load_links(path: &Path) -> Result<Vec<PacLink>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_links(io::BufReader::new(file))
}

pub fn write_id_map<W: Write>(out: W, map: &IdMap) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ID_MAP_HEADER).map_err(csv_io)?;
    for (n, raw) in map.iter() {
        w.write_record([n.to_string().as_str(), raw]).map_err(csv_io)?;
    }
    w.flush()
}

pub fn save_id_map(map: &IdMap, path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    write_id_map(&mut buf, map).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_id_map<R: Read>(input: R) -> Result<IdMap, StoreError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| StoreError::parse(1, e))?.clone();
    if headers.iter().ne(ID_MAP_HEADER.iter().copied()) {
        return Err(StoreError::Header {
            expected: ID_MAP_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut map = IdMap::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| StoreError::parse(row, e))?;
        let n: u64 = record[0]
            .parse()
            .map_err(|_| StoreError::parse(row, format!("bad numeric id `{}`", &record[0])))?;
        map.insert(&record[1], n).map_err(|e| StoreError::parse(row, e))?;
    }
    Ok(map)
}

pub fn load_id_map(path: &Path) -> Result<IdMap, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_id_map(io::BufReader::new(file))
}
