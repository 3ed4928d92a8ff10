//! Epoch set persistence.
//!
//! A stored set is a directory holding `manifest.json` (metadata and one
//! entry per epoch) and `data.f32le` (raw little-endian f32 samples,
//! epoch-major then channel-major). Offsets in the manifest are byte
//! positions into the data file and must match the packed layout exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, EpochRecord, EpochSet, Ratings};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";
pub const DATA_NAME: &str = "data.f32le";

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    format_version: u32,
    dataset_name: String,
    n_epochs: usize,
    n_channels: usize,
    n_samples: usize,
    fs_hz: f64,
    scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    subject: u32,
    trial: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arousal: Option<f64>,
    emotional: bool,
    offset_bytes: u64,
}

/// Writes `bytes` to `path` via a `.tmp` sibling and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes the set into `dir` (created if absent). Both files go through
/// temp-and-rename so a crash never leaves a half-written corpus behind.
pub fn write_epochset(set: &EpochSet, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    let epoch_bytes = (set.n_channels() * set.n_samples() * 4) as u64;

    let manifest = ManifestFile {
        format_version: FORMAT_VERSION,
        dataset_name: set.dataset_name.clone(),
        n_epochs: set.len(),
        n_channels: set.n_channels(),
        n_samples: set.n_samples(),
        fs_hz: set.fs,
        scheme: set.scheme_name.clone(),
        seed: set.seed,
        records: set
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| ManifestRecord {
                subject: r.subject_id,
                trial: r.trial_id,
                valence: r.ratings.map(|x| x.valence),
                arousal: r.ratings.map(|x| x.arousal),
                emotional: r.emotional,
                offset_bytes: i as u64 * epoch_bytes,
            })
            .collect(),
    };

    let data_path = dir.join(DATA_NAME);
    let data_tmp = tmp_path(&data_path);
    {
        let mut out = BufWriter::new(File::create(&data_tmp)?);
        for record in set.records() {
            for &v in record.samples() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
    }
    fs::rename(&data_tmp, &data_path)?;

    let json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST_NAME), &json)?;
    Ok(())
}

/// Loads a set previously written by [`write_epochset`], checking the
/// format version, the data file size, and every record offset.
pub fn read_epochset(dir: &Path) -> Result<EpochSet, CorpusError> {
    let json = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: ManifestFile = serde_json::from_str(&json)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CorpusError::UnsupportedVersion(manifest.format_version));
    }
    if manifest.records.len() != manifest.n_epochs {
        return Err(CorpusError::RecordCount {
            declared: manifest.n_epochs,
            listed: manifest.records.len(),
        });
    }

    let epoch_bytes = (manifest.n_channels * manifest.n_samples * 4) as u64;
    let data_path = dir.join(DATA_NAME);
    let expected = manifest.n_epochs as u64 * epoch_bytes;
    let actual = fs::metadata(&data_path)?.len();
    if actual != expected {
        return Err(CorpusError::SizeMismatch { expected, actual });
    }

    let mut data = BufReader::new(File::open(&data_path)?);
    let mut raw = vec![0u8; epoch_bytes as usize];
    let mut records = Vec::with_capacity(manifest.n_epochs);
    for (i, m) in manifest.records.iter().enumerate() {
        let offset = i as u64 * epoch_bytes;
        if m.offset_bytes != offset {
            return Err(CorpusError::BadOffset {
                record: i,
                expected: offset,
                actual: m.offset_bytes,
            });
        }
        let ratings = match (m.valence, m.arousal) {
            (Some(v), Some(a)) => Some(Ratings::new(v, a)?),
            (None, None) => None,
            _ => return Err(CorpusError::PartialRatings { record: i }),
        };
        data.read_exact(&mut raw)?;
        let channels = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        records.push(EpochRecord::new(
            m.subject,
            m.trial,
            manifest.fs_hz,
            manifest.n_channels,
            manifest.n_samples,
            channels,
            ratings,
            m.emotional,
        )?);
    }

    EpochSet::new(
        manifest.dataset_name,
        manifest.scheme,
        manifest.seed,
        manifest.fs_hz,
        manifest.n_channels,
        manifest.n_samples,
        records,
    )
}
