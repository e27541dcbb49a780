//! Report ingestion: duplicate removal, protocol filtering and patient-level
//! dataset splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reports shorter than this many characters are treated as empty.
pub const MIN_REPORT_CHARS: usize = 550;

/// Protocol descriptions accepted by default, compared after lowercasing.
pub const DEFAULT_PROTOCOLS: [&str; 2] = [
    "ct chest wo contrast w 3d mips protocol",
    "ct chest without contrast with 3d mips protocol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Preliminary,
    Verified,
}

/// One radiology report as exported from the record system.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportRecord {
    pub accession: String,
    pub mrn: String,
    pub protocol: String,
    pub status: ReportStatus,
    pub addendum_count: u32,
    pub text: String,
}

impl ReportRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.accession.trim().is_empty() {
            return Err("empty accession".into());
        }
        if self.mrn.trim().is_empty() {
            return Err(format!("empty mrn for accession {}", self.accession));
        }
        Ok(())
    }
}

/// Reads report records from a `.csv` file (with header row) or from JSON
/// lines (any other extension).
pub fn read_records(path: &Path) -> Result<Vec<ReportRecord>> {
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_csv {
        read_records_csv(file, path)
    } else {
        read_records_jsonl(BufReader::new(file), path)
    }
}

pub fn read_records_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<Vec<ReportRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReportRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        record
            .validate()
            .map_err(|m| Error::parse(path, i + 1, m))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<ReportRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<ReportRecord>() {
        let record = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        record
            .validate()
            .map_err(|m| Error::parse(path, out.len() + 2, m))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records_jsonl<W: Write>(mut out: W, records: &[ReportRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads an accession exclusion list: one accession per line, blank lines and
/// `#` comments ignored.
pub fn read_exclusions(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Record count after each step of the duplicate-removal ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCount {
    pub step: &'static str,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub records: Vec<ReportRecord>,
    pub stages: Vec<StageCount>,
}

/// Runs the duplicate-removal ladder with no manual exclusions.
pub fn dedup(records: &[ReportRecord]) -> Vec<ReportRecord> {
    dedup_with_exclusions(records, &HashSet::new()).records
}

/// Duplicate removal, in order: exact duplicates, preliminary reports of
/// accessions that have a verified one, versions with fewer addenda than the
/// most-addended version, manually excluded accessions, and reports under
/// [`MIN_REPORT_CHARS`] characters.
///
/// Output is ordered by accession, then by input position.
pub fn dedup_with_exclusions(
    records: &[ReportRecord],
    excluded_accessions: &HashSet<String>,
) -> DedupOutcome {
    let mut stages = vec![StageCount {
        step: "raw data",
        count: records.len(),
    }];
    let mut kept: Vec<(usize, &ReportRecord)> = records.iter().enumerate().collect();

    let mut seen = HashSet::new();
    kept.retain(|(_, r)| seen.insert(*r));
    stages.push(StageCount {
        step: "exact duplicates",
        count: kept.len(),
    });

    let mut verified = HashSet::new();
    for (_, r) in &kept {
        if r.status == ReportStatus::Verified {
            verified.insert(r.accession.as_str());
        }
    }
    kept.retain(|(_, r)| {
        r.status == ReportStatus::Verified || !verified.contains(r.accession.as_str())
    });
    stages.push(StageCount {
        step: "preliminary vs. verified",
        count: kept.len(),
    });

    let mut max_addenda: HashMap<&str, u32> = HashMap::new();
    for (_, r) in &kept {
        let entry = max_addenda.entry(r.accession.as_str()).or_insert(0);
        *entry = (*entry).max(r.addendum_count);
    }
    kept.retain(|(_, r)| r.addendum_count == max_addenda[r.accession.as_str()]);
    stages.push(StageCount {
        step: "addenda",
        count: kept.len(),
    });

    kept.retain(|(_, r)| !excluded_accessions.contains(&r.accession));
    stages.push(StageCount {
        step: "manual exclusions",
        count: kept.len(),
    });

    kept.retain(|(_, r)| r.text.chars().count() >= MIN_REPORT_CHARS);
    stages.push(StageCount {
        step: "empty reports",
        count: kept.len(),
    });

    kept.sort_by(|a, b| a.1.accession.cmp(&b.1.accession).then(a.0.cmp(&b.0)));
    DedupOutcome {
        records: kept.into_iter().map(|(_, r)| r.clone()).collect(),
        stages,
    }
}

/// Keeps records whose lowercased protocol equals one of `accepted`
/// (also compared lowercased).
pub fn filter_protocol(records: &[ReportRecord], accepted: &[&str]) -> Result<Vec<ReportRecord>> {
    if accepted.is_empty() {
        return Err(Error::Config("accepted protocol list is empty".into()));
    }
    let accepted: HashSet<String> = accepted.iter().map(|p| p.to_lowercase()).collect();
    Ok(records
        .iter()
        .filter(|r| accepted.contains(&r.protocol.to_lowercase()))
        .cloned()
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Reserved,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Reserved, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Reserved => "reserved",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub reserved: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            val: 0.06,
            reserved: 0.04,
            test: 0.20,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, reserved: f64, test: f64) -> Result<Self> {
        let f = SplitFractions {
            train,
            val,
            reserved,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.reserved, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be finite and nonnegative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    fn bucket(&self, u: f64) -> Split {
        if u < self.train {
            Split::Train
        } else if u < self.train + self.val {
            Split::Val
        } else if u < self.train + self.val + self.reserved {
            Split::Reserved
        } else {
            Split::Test
        }
    }
}

impl FromStr for SplitFractions {
    type Err = Error;

    /// Parses `train,val,reserved,test`, e.g. `0.7,0.06,0.04,0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad split fractions {s:?}: {e}")))?;
        match parts[..] {
            [a, b, c, d] => SplitFractions::new(a, b, c, d),
            _ => Err(Error::Config(format!(
                "expected four split fractions, got {}",
                parts.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub mrn: String,
    pub split: Split,
}

/// Uniform value in [0, 1) derived from SHA-256 of `"{mrn}:{seed}"`.
fn unit_hash(mrn: &str, seed: u64) -> f64 {
    let digest = Sha256::digest(format!("{mrn}:{seed}").as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

/// Split for one patient. Depends only on `(mrn, seed)`.
pub fn split_for_mrn(mrn: &str, fractions: &SplitFractions, seed: u64) -> Split {
    fractions.bucket(unit_hash(mrn, seed))
}

/// Assigns every distinct MRN in `records` to a split, sorted by MRN.
pub fn split_by_patient(
    records: &[ReportRecord],
    fractions: &SplitFractions,
    seed: u64,
) -> Result<Vec<SplitAssignment>> {
    fractions.validate()?;
    let mrns: BTreeSet<&str> = records.iter().map(|r| r.mrn.as_str()).collect();
    Ok(mrns
        .into_iter()
        .map(|mrn| SplitAssignment {
            mrn: mrn.to_string(),
            split: split_for_mrn(mrn, fractions, seed),
        })
        .collect())
}

pub fn write_split_csv<W: Write>(out: W, assignments: &[SplitAssignment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["mrn", "split"])?;
    for a in assignments {
        wtr.write_record([a.mrn.as_str(), a.split.as_str()])?;
    }
    wtr.flush().map_err(|e| Error::io("<split output>", e))?;
    Ok(())
}
