//! Persistence of operator matrices: a small binary container with a JSON
//! header, plus CSV export for inspection.
//!
//! Container layout:
//!
//! ```text
//! bytes 0..8    magic, b"NTDMAT01" (single matrix) or b"NTDBNK01" (bank)
//! bytes 8..16   header length H as little-endian u64
//! bytes 16..16+H  JSON header (metadata, matrix count, size)
//! rest          count * m * m doubles, little endian, row major
//! ```
//!
//! Entries round-trip exactly: raw f64 bits are written, nothing is
//! formatted or rounded. Writes go through a temp file in the target
//! directory and a final rename, so readers never observe partial files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::ntd::{Direction, NoiseSpec, OperatorKind, OperatorMatrix};

const MAGIC_MATRIX: &[u8; 8] = b"NTDMAT01";
const MAGIC_BANK: &[u8; 8] = b"NTDBNK01";
const MAX_HEADER_BYTES: u64 = 1 << 20;

/// Metadata stored next to the entries. The load system id and mesh hash
/// let readers refuse to mix artifacts from incompatible runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub load_system_id: String,
    pub mesh_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    m: usize,
    count: usize,
    kind: String,
    /// Raw asymmetry per matrix, recorded before symmetrization.
    presym: Vec<f64>,
    #[serde(flatten)]
    meta: MatrixMeta,
}

/// Hex SHA-256 digest, the hash used for all artifact identity checks.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn write_container(
    path: &Path,
    magic: &[u8; 8],
    matrices: &[&OperatorMatrix],
    meta: &MatrixMeta,
) -> Result<()> {
    let first = matrices
        .first()
        .ok_or_else(|| CoreError::invalid("cannot write an empty matrix container"))?;
    let m = first.dim();
    for mat in matrices {
        if mat.dim() != m {
            return Err(CoreError::invalid("matrices in one container must share a size"));
        }
        if mat.kind != first.kind {
            return Err(CoreError::invalid("matrices in one container must share a kind"));
        }
        if mat.load_system_id != meta.load_system_id {
            return Err(CoreError::invalid(format!(
                "matrix load system '{}' does not match metadata '{}'",
                mat.load_system_id, meta.load_system_id
            )));
        }
    }
    let header = Header {
        m,
        count: matrices.len(),
        kind: first.kind.name().to_string(),
        presym: matrices.iter().map(|mat| mat.presym_asymmetry).collect(),
        meta: meta.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| CoreError::invalid(format!("header serialization failed: {e}")))?;

    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(magic)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for mat in matrices {
            for i in 0..m {
                for j in 0..m {
                    w.write_all(&mat.entries[(i, j)].to_le_bytes())?;
                }
            }
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CoreError::Io(e.error))?;
    Ok(())
}

fn read_container(path: &Path, magic: &[u8; 8]) -> Result<(Vec<OperatorMatrix>, MatrixMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut got_magic = [0u8; 8];
    r.read_exact(&mut got_magic)?;
    if &got_magic != magic {
        return Err(CoreError::ArtifactMismatch(format!(
            "{} starts with {:?}, expected {:?}",
            path.display(),
            String::from_utf8_lossy(&got_magic),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes);
    if header_len > MAX_HEADER_BYTES {
        return Err(CoreError::ArtifactMismatch(format!(
            "{} declares an implausible header of {header_len} bytes",
            path.display()
        )));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes).map_err(|e| {
        CoreError::ArtifactMismatch(format!("{}: malformed header: {e}", path.display()))
    })?;
    let kind = OperatorKind::parse(&header.kind)?;
    if header.presym.len() != header.count {
        return Err(CoreError::ArtifactMismatch(format!(
            "{}: header lists {} asymmetry records for {} matrices",
            path.display(),
            header.presym.len(),
            header.count
        )));
    }

    let m = header.m;
    let mut matrices = Vec::with_capacity(header.count);
    let mut buf = vec![0u8; 8 * m];
    for k in 0..header.count {
        let mut entries = DMatrix::zeros(m, m);
        for i in 0..m {
            r.read_exact(&mut buf).map_err(|_| {
                CoreError::ArtifactMismatch(format!(
                    "{}: truncated payload in matrix {k} row {i}",
                    path.display()
                ))
            })?;
            for j in 0..m {
                entries[(i, j)] = f64::from_le_bytes(buf[8 * j..8 * j + 8].try_into().unwrap());
            }
        }
        matrices.push(OperatorMatrix {
            entries,
            load_system_id: header.meta.load_system_id.clone(),
            kind,
            presym_asymmetry: header.presym[k],
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CoreError::ArtifactMismatch(format!(
            "{}: trailing bytes after the declared payload",
            path.display()
        )));
    }
    Ok((matrices, header.meta))
}

/// Write one matrix.
pub fn write_matrix(path: &Path, matrix: &OperatorMatrix, meta: &MatrixMeta) -> Result<()> {
    write_container(path, MAGIC_MATRIX, &[matrix], meta)
}

/// Read one matrix.
pub fn read_matrix(path: &Path) -> Result<(OperatorMatrix, MatrixMeta)> {
    let (mut matrices, meta) = read_container(path, MAGIC_MATRIX)?;
    if matrices.len() != 1 {
        return Err(CoreError::ArtifactMismatch(format!(
            "{} holds {} matrices, expected exactly one",
            path.display(),
            matrices.len()
        )));
    }
    Ok((matrices.pop().unwrap(), meta))
}

/// Write a bank of matrices sharing one size, kind and load system.
pub fn write_bank(path: &Path, matrices: &[OperatorMatrix], meta: &MatrixMeta) -> Result<()> {
    let refs: Vec<&OperatorMatrix> = matrices.iter().collect();
    write_container(path, MAGIC_BANK, &refs, meta)
}

/// Read a bank of matrices.
pub fn read_bank(path: &Path) -> Result<(Vec<OperatorMatrix>, MatrixMeta)> {
    read_container(path, MAGIC_BANK)
}

/// Plain CSV dump of the entries, full double precision.
pub fn export_csv(path: &Path, matrix: &OperatorMatrix) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        let m = matrix.dim();
        for i in 0..m {
            let row: Vec<String> =
                (0..m).map(|j| format!("{:.17e}", matrix.entries[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CoreError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sample(kind: OperatorKind, seedish: f64) -> OperatorMatrix {
        let entries = DMatrix::from_fn(4, 4, |i, j| {
            seedish * ((i * 7 + j * 3) as f64).sin() + (i == j) as u8 as f64
        });
        OperatorMatrix::from_raw(entries, "sys-1".into(), kind)
    }

    fn meta() -> MatrixMeta {
        MatrixMeta {
            load_system_id: "sys-1".into(),
            mesh_hash: "abcd".into(),
            alpha: Some(1.5),
            beta: Some(0.25),
            direction: Some(Direction::Raise),
            noise: None,
            comment: None,
        }
    }

    #[test]
    fn matrix_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ntd");
        let m = sample(OperatorKind::Difference, 0.37);
        write_matrix(&path, &m, &meta()).unwrap();
        let (back, got_meta) = read_matrix(&path).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(back.kind, m.kind);
        assert_eq!(back.load_system_id, m.load_system_id);
        assert_eq!(back.presym_asymmetry, m.presym_asymmetry);
        assert_eq!(got_meta, meta());
    }

    #[test]
    fn bank_roundtrip_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.ntd");
        let mats: Vec<OperatorMatrix> =
            (0..5).map(|k| sample(OperatorKind::Derivative, 0.1 * k as f64)).collect();
        write_bank(&path, &mats, &meta()).unwrap();
        let (back, _) = read_bank(&path).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in back.iter().zip(&mats) {
            assert_eq!(a.entries, b.entries);
        }
    }

    #[test]
    fn wrong_magic_and_corruption_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ntd");
        let m = sample(OperatorKind::Difference, 0.2);
        write_matrix(&path, &m, &meta()).unwrap();

        // A single-matrix file is not a bank.
        assert!(matches!(read_bank(&path), Err(CoreError::ArtifactMismatch(_))));

        // Truncate payload.
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(read_matrix(&path).is_err());

        // Trailing garbage.
        let mut longer = bytes.clone();
        longer.push(0);
        std::fs::write(&path, &longer).unwrap();
        assert!(matches!(read_matrix(&path), Err(CoreError::ArtifactMismatch(_))));
    }

    #[test]
    fn mismatched_metadata_rejected_at_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ntd");
        let m = sample(OperatorKind::Difference, 0.2);
        let mut wrong = meta();
        wrong.load_system_id = "other".into();
        assert!(write_matrix(&path, &m, &wrong).is_err());
        assert!(write_bank(&path, &[], &meta()).is_err());
    }

    #[test]
    fn csv_export_has_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = sample(OperatorKind::Ntd, 1.0 / 3.0);
        export_csv(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 4);
        let first: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, m.entries[(0, 0)]);
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
