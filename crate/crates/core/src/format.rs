//! On-disk latent files.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic    b"LATW"
//! version  u16 = 1
//! n        u32
//! dim      u32
//! payload  n * dim f32, row-major
//! ```
//!
//! Metadata lives next to the binary in `<file>.meta.csv` with the header
//! `sample_id,age_years,identity_id,age_group`; CSV rows correspond to binary
//! rows by position and an empty cell means the field is absent. A
//! standardized set additionally carries its scaler in `<file>.scaler.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::latent::{LabeledLatentSet, LatentError, SampleMeta};
use crate::scaler::Scaler;

pub const MAGIC: &[u8; 4] = b"LATW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn meta_path(path: &Path) -> PathBuf {
    sidecar(path, ".meta.csv")
}

pub fn scaler_path(path: &Path) -> PathBuf {
    sidecar(path, ".scaler.json")
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Serializes a matrix to the binary layout. Values are narrowed to f32.
pub fn encode_latents(vectors: &DMatrix<f64>) -> Result<Vec<u8>, LatentError> {
    let (n, dim) = vectors.shape();
    let n32 = u32::try_from(n).map_err(|_| LatentError::ShapeMismatch("too many rows".into()))?;
    let d32 = u32::try_from(dim).map_err(|_| LatentError::ShapeMismatch("dim too large".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + n * dim * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&n32.to_le_bytes());
    buf.extend_from_slice(&d32.to_le_bytes());
    for row in 0..n {
        for col in 0..dim {
            let v = vectors[(row, col)] as f32;
            if !v.is_finite() {
                return Err(LatentError::NonFiniteValue { row, col });
            }
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

/// Parses the binary layout into an `n x dim` matrix.
pub fn decode_latents(bytes: &[u8]) -> Result<DMatrix<f64>, LatentError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(LatentError::MagicMismatch);
    }
    if bytes.len() < HEADER_LEN {
        return Err(LatentError::TruncatedPayload {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(LatentError::UnsupportedVersion(version));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| LatentError::ShapeMismatch("declared shape overflows".into()))?;
    if bytes.len() < expected {
        return Err(LatentError::TruncatedPayload {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(LatentError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let mut m = DMatrix::zeros(n, dim);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        let (row, col) = (k / dim, k % dim);
        if !v.is_finite() {
            return Err(LatentError::NonFiniteValue { row, col });
        }
        m[(row, col)] = f64::from(v);
    }
    Ok(m)
}

pub fn read_meta_csv(path: &Path) -> Result<Vec<SampleMeta>, LatentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(LatentError::from)).collect()
}

pub fn write_meta_csv(path: &Path, meta: &[SampleMeta]) -> Result<(), LatentError> {
    let mut wtr = csv::Writer::from_path(path)?;
    // serde skips the header for an empty sequence
    if meta.is_empty() {
        wtr.write_record(["sample_id", "age_years", "identity_id", "age_group"])?;
    }
    for m in meta {
        wtr.serialize(m)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scaler(path: &Path) -> Result<Scaler, LatentError> {
    let scaler: Scaler = serde_json::from_slice(&fs::read(path)?)?;
    scaler.validate()?;
    Ok(scaler)
}

pub fn write_scaler(path: &Path, scaler: &Scaler) -> Result<(), LatentError> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, scaler)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Loads a latent file with its default sidecars.
pub fn load_latents(path: impl AsRef<Path>) -> Result<LabeledLatentSet, LatentError> {
    load_latents_with_meta(path, None)
}

/// Loads a latent file, optionally reading metadata from an explicit CSV.
///
/// Without metadata, sample ids are the row indices.
pub fn load_latents_with_meta(
    path: impl AsRef<Path>,
    meta_override: Option<&Path>,
) -> Result<LabeledLatentSet, LatentError> {
    let path = path.as_ref();
    let vectors = decode_latents(&fs::read(path)?)?;
    let default_meta = meta_path(path);
    let meta_file = meta_override.map(Path::to_path_buf).or_else(|| {
        default_meta.exists().then_some(default_meta)
    });
    let meta = match meta_file {
        Some(p) => read_meta_csv(&p)?,
        None => (0..vectors.nrows())
            .map(|i| SampleMeta::new(i.to_string()))
            .collect(),
    };
    let set = LabeledLatentSet::new(vectors, meta)?;
    let sp = scaler_path(path);
    if sp.exists() {
        set.with_scaler(read_scaler(&sp)?)
    } else {
        Ok(set)
    }
}

/// Writes the binary file, its metadata CSV, and the scaler of a standardized set.
pub fn save_latents(set: &LabeledLatentSet, path: impl AsRef<Path>) -> Result<(), LatentError> {
    let path = path.as_ref();
    fs::write(path, encode_latents(set.vectors())?)?;
    write_meta_csv(&meta_path(path), set.meta())?;
    let sp = scaler_path(path);
    match set.scaler() {
        Some(scaler) => write_scaler(&sp, scaler)?,
        None if sp.exists() => fs::remove_file(&sp)?,
        None => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::AgeGroupScheme;

    #[test]
    fn small_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.latw");
        let set = LabeledLatentSet::from_rows(4, &[vec![1., 2., 3., 4.], vec![5., 6., 7., 8.]])
            .unwrap();
        save_latents(&set, &p).unwrap();
        let back = load_latents(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 4);
        assert_eq!(back, set);
        assert_eq!(fs::metadata(&p).unwrap().len(), (HEADER_LEN + 32) as u64);
    }

    #[test]
    fn short_payload_is_truncated() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let bytes = encode_latents(&m).unwrap();
        let err = decode_latents(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(
            err,
            LatentError::TruncatedPayload { expected: 30, actual: 27 }
        ));
        assert!(matches!(
            decode_latents(&bytes[..10]),
            Err(LatentError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_latents(&DMatrix::zeros(1, 2)).unwrap();
        bytes.push(0);
        assert!(matches!(
            decode_latents(&bytes),
            Err(LatentError::TrailingBytes { extra: 1 })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_latents(&DMatrix::zeros(1, 2)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_latents(&bytes), Err(LatentError::MagicMismatch)));
        let mut bytes = encode_latents(&DMatrix::zeros(1, 2)).unwrap();
        bytes[4] = 2;
        assert!(matches!(
            decode_latents(&bytes),
            Err(LatentError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = encode_latents(&DMatrix::zeros(1, 2)).unwrap();
        bytes[HEADER_LEN + 4..HEADER_LEN + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_latents(&bytes),
            Err(LatentError::NonFiniteValue { row: 0, col: 1 })
        ));
    }

    #[test]
    fn empty_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.latw");
        let set = LabeledLatentSet::new(DMatrix::zeros(0, 512), vec![]).unwrap();
        save_latents(&set, &p).unwrap();
        let back = load_latents(&p).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.dim(), 512);
    }

    #[test]
    fn zero_vector_payload() {
        let bytes = encode_latents(&DMatrix::zeros(1, 512)).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 512 * 4);
        assert!(bytes[HEADER_LEN..].iter().all(|b| *b == 0));
    }

    #[test]
    fn metadata_and_scaler_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.latw");
        let meta = vec![
            SampleMeta::new("x").with_age(17.5).with_identity("id1").with_group(0),
            SampleMeta::new("y"),
            SampleMeta::new("z,quoted").with_age(0.1),
        ];
        let rows = vec![vec![1.0, -2.0], vec![0.5, 0.25], vec![3.0, 1.0]];
        let set = LabeledLatentSet::from_rows_with_meta(2, &rows, meta).unwrap();
        let (std_set, _) = crate::scaler::standardize(&set).unwrap();
        // narrow to f32 so the payload is exactly representable
        let narrowed = decode_latents(&encode_latents(std_set.vectors()).unwrap()).unwrap();
        let std_set = std_set.replace_vectors(narrowed, std_set.scaler().cloned());
        save_latents(&std_set, &p).unwrap();
        let back = load_latents(&p).unwrap();
        assert_eq!(back, std_set);
        assert!(back.is_standardized());
        back.validate_groups(&AgeGroupScheme::four()).unwrap();

        // overwriting with an unstandardized set drops the stale scaler
        save_latents(&set, &p).unwrap();
        assert!(!load_latents(&p).unwrap().is_standardized());
    }

    #[test]
    fn metadata_count_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.latw");
        fs::write(&p, encode_latents(&DMatrix::zeros(2, 1)).unwrap()).unwrap();
        write_meta_csv(&meta_path(&p), &[SampleMeta::new("only")]).unwrap();
        assert!(matches!(
            load_latents(&p),
            Err(LatentError::MetadataCountMismatch { meta: 1, rows: 2 })
        ));
    }

    #[test]
    fn duplicate_ids_in_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.latw");
        fs::write(&p, encode_latents(&DMatrix::zeros(2, 1)).unwrap()).unwrap();
        fs::write(
            meta_path(&p),
            "sample_id,age_years,identity_id,age_group\na,,,\na,3,,\n",
        )
        .unwrap();
        assert!(matches!(
            load_latents(&p),
            Err(LatentError::DuplicateSampleId(_))
        ));
    }
}
