//! On-disk formats and reference tables.
//!
//! Three kinds of data move through the pipeline and all of them are owned by
//! this module:
//!
//! * **DMAT matrices** — a small binary container for dense `f32` matrices
//!   (extracted image features, voxel response tables). Layout: 4-byte magic
//!   `DMAT`, `u16` format version (currently 1), `u16` dtype code (1 =
//!   little-endian `f32`), `u32` row count, `u32` column count, then the
//!   payload in row-major order. Every matrix travels with a JSON sidecar at
//!   `<path>.json` describing what the rows and columns mean; a matrix
//!   without its sidecar is unreadable on purpose.
//! * **JSONL logs** — newline-delimited JSON used for prompt sets and trial
//!   transcripts. The readers here are generic over the record type and
//!   report the 1-based line number of the first malformed record.
//! * **Fixture tables** — the published per-model reference numbers
//!   (alignment scores, capitulation rates, resistance summaries, category /
//!   tactic / difficulty breakdowns) embedded into the binary so reports can
//!   be regenerated without network access. See [`FixtureTables`].
//!
//! All readers validate shape and value invariants at the boundary and
//! return typed [`DataError`]s; nothing in here panics on bad input.

mod fixtures;
mod records;

pub use fixtures::{
    load_fixture_tables, ArchitectureFixture, BrainFixture, CategoryFixture, DifficultyFixture,
    FixtureTables, ModelCatalogEntry, ResistanceFixture, SycophancyFixture, TacticFixture,
    TwoTurnFixture, CATEGORY_DESCRIPTIONS, N_CATEGORIES, N_DIFFICULTY_LEVELS, ROI_NAMES,
};
pub use records::{BrainScoreCard, Category, ModelEvalSummary, PromptRecord, TrialOutcome};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Magic bytes at the start of every matrix file.
pub const DMAT_MAGIC: [u8; 4] = *b"DMAT";
/// Current container format version.
pub const DMAT_VERSION: u16 = 1;
/// Dtype code for little-endian `f32`, the only payload type we store.
pub const DMAT_DTYPE_F32: u16 = 1;

const DMAT_HEADER_LEN: usize = 16;

/// Everything that can go wrong while reading or writing pipeline data.
#[derive(Debug, Error)]
pub enum DataError {
    /// The file does not start with the `DMAT` magic bytes.
    #[error("not a matrix file: bad magic {found:?} (expected {DMAT_MAGIC:?})")]
    BadMagic { found: [u8; 4] },
    /// The container version is one this build does not understand.
    #[error("unsupported matrix format version {found} (expected {DMAT_VERSION})")]
    VersionMismatch { found: u16 },
    /// The payload dtype is not `f32`.
    #[error("unsupported matrix dtype code {found} (expected {DMAT_DTYPE_F32} = f32)")]
    UnsupportedDtype { found: u16 },
    /// The file ended before the declared payload was complete.
    #[error("matrix payload truncated: expected {expected} bytes after the header, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    /// Row or column counts that cannot describe a real matrix.
    #[error("invalid matrix shape: {what}")]
    InvalidShape { what: String },
    /// The `<path>.json` sidecar is required and was not found.
    #[error("sidecar not found at {path} (every matrix needs its descriptor)")]
    SidecarMissing { path: PathBuf },
    /// A structural rule about the data was broken (non-finite values,
    /// mask indices out of range, sidecar/payload disagreement, ...).
    #[error("data invariant violated: {what}")]
    InvariantViolation { what: String },
    /// A JSONL record failed to parse; `line` is 1-based.
    #[error("malformed record at {path}:{line}: {source}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    /// Filesystem-level failure, tagged with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// JSON (de)serialization failure outside of JSONL line handling.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// What a matrix's rows and columns represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Rows are stimuli, columns are extracted feature dimensions.
    Features,
    /// Rows are stimuli, columns are voxels; region masks index columns.
    Responses,
}

/// JSON descriptor stored at `<matrix path>.json`.
///
/// `stimulus_ids` names the rows (one id per row, in order). For
/// [`MatrixKind::Responses`] matrices, `roi_masks` maps each region name to
/// the column indices belonging to it; feature matrices carry no masks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: MatrixKind,
    /// Free-form identifier: model name for features, subject id for responses.
    pub id: String,
    pub stimulus_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi_masks: Option<BTreeMap<String, Vec<u32>>>,
}

/// Path of the JSON descriptor that accompanies `matrix_path`.
pub fn sidecar_path(matrix_path: &Path) -> PathBuf {
    let mut name = matrix_path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

fn validate_pair(matrix: &Array2<f32>, sidecar: &Sidecar) -> Result<(), DataError> {
    let (rows, cols) = matrix.dim();
    if rows == 0 || cols == 0 {
        return Err(DataError::InvalidShape {
            what: format!("matrix must be non-empty, got {rows}x{cols}"),
        });
    }
    if sidecar.stimulus_ids.len() != rows {
        return Err(DataError::InvariantViolation {
            what: format!(
                "sidecar lists {} stimulus ids but the matrix has {} rows",
                sidecar.stimulus_ids.len(),
                rows
            ),
        });
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for id in &sidecar.stimulus_ids {
            if !seen.insert(id.as_str()) {
                return Err(DataError::InvariantViolation {
                    what: format!("duplicate stimulus id {id:?}"),
                });
            }
        }
    }
    if let Some(bad) = matrix.iter().position(|v| !v.is_finite()) {
        return Err(DataError::InvariantViolation {
            what: format!(
                "payload contains a non-finite value at flat index {bad} \
                 (row {}, col {})",
                bad / cols,
                bad % cols
            ),
        });
    }
    match (sidecar.kind, &sidecar.roi_masks) {
        (MatrixKind::Responses, None) => {
            return Err(DataError::InvariantViolation {
                what: "response matrices must carry roi_masks in their sidecar".into(),
            });
        }
        (MatrixKind::Features, Some(_)) => {
            return Err(DataError::InvariantViolation {
                what: "feature matrices must not carry roi_masks".into(),
            });
        }
        (MatrixKind::Responses, Some(masks)) => {
            if masks.is_empty() {
                return Err(DataError::InvariantViolation {
                    what: "roi_masks must name at least one region".into(),
                });
            }
            for (name, idx) in masks {
                if idx.is_empty() {
                    return Err(DataError::InvariantViolation {
                        what: format!("region {name:?} has an empty mask"),
                    });
                }
                if let Some(&out) = idx.iter().find(|&&i| i as usize >= cols) {
                    return Err(DataError::InvariantViolation {
                        what: format!(
                            "region {name:?} mask index {out} is out of range for {cols} columns"
                        ),
                    });
                }
                // Masks are sorted, duplicate-free index lists (overlap
                // across regions is fine; repetition within one is not).
                if let Some(w) = idx.windows(2).find(|w| w[0] >= w[1]) {
                    return Err(DataError::InvariantViolation {
                        what: format!(
                            "region {name:?} mask must be strictly ascending \
                             ({} then {})",
                            w[0], w[1]
                        ),
                    });
                }
            }
        }
        (MatrixKind::Features, None) => {}
    }
    Ok(())
}

/// Soft check that each column of a matrix looks z-scored (mean ≈ 0,
/// standard deviation ≈ 1, both within 0.1).
///
/// Returns human-readable warnings rather than an error: preprocessing
/// conventions differ slightly between pipelines and a hard failure would
/// reject legitimate data, but staying silent would hide a forgotten
/// normalization step. An empty result means every column passed.
pub fn zscore_warnings(matrix: &Array2<f32>) -> Vec<String> {
    const TOL: f64 = 0.1;
    const MAX_DETAILS: usize = 5;
    let (rows, cols) = matrix.dim();
    if rows < 2 {
        return vec![format!("cannot assess z-scoring with only {rows} row(s)")];
    }
    let mut offending: Vec<(usize, f64, f64)> = Vec::new();
    for j in 0..cols {
        let col = matrix.column(j);
        let mean = col.iter().map(|&v| v as f64).sum::<f64>() / rows as f64;
        let var = col
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / rows as f64;
        let std = var.sqrt();
        if mean.abs() > TOL || (std - 1.0).abs() > TOL {
            offending.push((j, mean, std));
        }
    }
    if offending.is_empty() {
        return Vec::new();
    }
    let mut out = vec![format!(
        "{} of {cols} column(s) deviate from z-scoring (|mean| > {TOL} or |std - 1| > {TOL})",
        offending.len()
    )];
    for &(j, mean, std) in offending.iter().take(MAX_DETAILS) {
        out.push(format!("  column {j}: mean {mean:.4}, std {std:.4}"));
    }
    if offending.len() > MAX_DETAILS {
        out.push(format!("  ... and {} more", offending.len() - MAX_DETAILS));
    }
    out
}

/// Write `matrix` to `path` in the DMAT container format and its descriptor
/// to `<path>.json`. Validates the pair before touching the filesystem.
pub fn write_dmat(path: &Path, matrix: &Array2<f32>, sidecar: &Sidecar) -> Result<(), DataError> {
    validate_pair(matrix, sidecar)?;
    let (rows, cols) = matrix.dim();
    if rows > u32::MAX as usize || cols > u32::MAX as usize {
        return Err(DataError::InvalidShape {
            what: format!("matrix {rows}x{cols} exceeds the u32 dimension limit"),
        });
    }

    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&DMAT_MAGIC).map_err(|e| DataError::io(path, e))?;
    w.write_all(&DMAT_VERSION.to_le_bytes())
        .map_err(|e| DataError::io(path, e))?;
    w.write_all(&DMAT_DTYPE_F32.to_le_bytes())
        .map_err(|e| DataError::io(path, e))?;
    w.write_all(&(rows as u32).to_le_bytes())
        .map_err(|e| DataError::io(path, e))?;
    w.write_all(&(cols as u32).to_le_bytes())
        .map_err(|e| DataError::io(path, e))?;
    // Row-major payload. `Array2` in standard layout iterates row-major.
    let mut buf = Vec::with_capacity(cols * 4);
    for row in matrix.rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))?;

    let sc_path = sidecar_path(path);
    let sc_file = File::create(&sc_path).map_err(|e| DataError::io(&sc_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(sc_file), sidecar)?;
    Ok(())
}

/// Read a DMAT matrix and its sidecar back from `path`.
///
/// Rejects wrong magic/version/dtype, truncated or oversized payloads,
/// non-finite values, and any sidecar/payload disagreement.
pub fn read_dmat(path: &Path) -> Result<(Array2<f32>, Sidecar), DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut header = [0u8; DMAT_HEADER_LEN];
    r.read_exact(&mut header).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DataError::TruncatedPayload {
                expected: DMAT_HEADER_LEN as u64,
                found: 0,
            }
        } else {
            DataError::io(path, e)
        }
    })?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != DMAT_MAGIC {
        return Err(DataError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(header[4..6].try_into().unwrap());
    if version != DMAT_VERSION {
        return Err(DataError::VersionMismatch { found: version });
    }
    let dtype = u16::from_le_bytes(header[6..8].try_into().unwrap());
    if dtype != DMAT_DTYPE_F32 {
        return Err(DataError::UnsupportedDtype { found: dtype });
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(DataError::InvalidShape {
            what: format!("header declares an empty {rows}x{cols} matrix"),
        });
    }

    let expected = (rows as u64) * (cols as u64) * 4;
    let mut payload = Vec::new();
    let found = r
        .read_to_end(&mut payload)
        .map_err(|e| DataError::io(path, e))? as u64;
    if found < expected {
        return Err(DataError::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(DataError::InvariantViolation {
            what: format!(
                "{} trailing bytes after a {rows}x{cols} payload",
                found - expected
            ),
        });
    }

    let mut values = Vec::with_capacity(rows * cols);
    for chunk in payload.chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    let matrix = Array2::from_shape_vec((rows, cols), values).expect("shape matches payload");

    let sc_path = sidecar_path(path);
    let sc_file = File::open(&sc_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::SidecarMissing { path: sc_path.clone() }
        } else {
            DataError::io(&sc_path, e)
        }
    })?;
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(sc_file))?;

    validate_pair(&matrix, &sidecar)?;
    Ok((matrix, sidecar))
}

/// Read a JSONL file into a vector of records, skipping blank lines.
/// The first malformed line aborts the read with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| DataError::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Write records as JSONL, one compact JSON object per line.
///
/// The write is atomic at the file level: records go to a `.tmp` sibling
/// which is renamed over the target only after every line has been written,
/// so interrupted runs never leave a half-written log behind.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<(), DataError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let file = File::create(&tmp).map_err(|e| DataError::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for record in records {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n").map_err(|e| DataError::io(&tmp, e))?;
        }
        w.flush().map_err(|e| DataError::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| DataError::io(path, e))?;
    Ok(())
}
