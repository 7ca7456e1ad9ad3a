//! On-disk format for the inverted-file product-quantization index.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "TLIVFPQ1"
//! u32 dim, u32 coarse_clusters, u32 subspaces, u32 code_bits
//! u64 entry_count
//! coarse centroids   coarse_clusters × dim × f32
//! codebooks          subspaces × 2^code_bits × (dim / subspaces) × f32
//! per inverted list: u64 length,
//!                    then per entry u32 id, subspaces × u8 code, u32 value
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{IvfList, IvfPqIndex, PqCodebook};
use crate::error::{Error, Result};
use crate::util::binio::{write_f32s, write_u32, write_u64, CountingReader};
use crate::util::Matrix;

pub const INDEX_MAGIC: &[u8; 8] = b"TLIVFPQ1";

pub fn write_index_file(path: &Path, index: &IvfPqIndex) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(INDEX_MAGIC)?;
    write_u32(&mut w, index.dim() as u32)?;
    write_u32(&mut w, index.coarse_clusters() as u32)?;
    write_u32(&mut w, index.subspaces() as u32)?;
    write_u32(&mut w, index.code_bits())?;
    write_u64(&mut w, index.len() as u64)?;
    write_f32s(&mut w, index.coarse().data())?;
    for book in index.pq().codebooks() {
        write_f32s(&mut w, book.data())?;
    }
    let m = index.subspaces();
    for list in index.lists() {
        write_u64(&mut w, list.ids.len() as u64)?;
        for (pos, &id) in list.ids.iter().enumerate() {
            write_u32(&mut w, id)?;
            w.write_all(&list.codes[pos * m..(pos + 1) * m])?;
            write_u32(&mut w, list.values[pos])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_file(path: &Path) -> Result<IvfPqIndex> {
    let mut r = CountingReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(INDEX_MAGIC, "vector index")?;
    let dim = r.read_u32("dimension")? as usize;
    let c = r.read_u32("coarse cluster count")? as usize;
    let m = r.read_u32("subspace count")? as usize;
    let code_bits = r.read_u32("code bits")?;
    let n = r.read_u64("entry count")?;
    if dim == 0 || m == 0 || dim % m != 0 {
        return Err(Error::Data(format!(
            "invalid index header: dim {dim} with {m} subspaces"
        )));
    }
    if !(1..=8).contains(&code_bits) {
        return Err(Error::Data(format!("invalid index header: {code_bits} code bits")));
    }
    let ksub = 1usize << code_bits;
    let dsub = dim / m;
    let coarse = Matrix::from_vec(r.read_f32s(c * dim, "coarse centroids")?, dim)?;
    let mut codebooks = Vec::with_capacity(m);
    for sub in 0..m {
        let data = r.read_f32s(ksub * dsub, &format!("codebook {sub}"))?;
        codebooks.push(Matrix::from_vec(data, dsub)?);
    }
    let pq = PqCodebook::from_parts(codebooks)?;
    let mut lists = Vec::with_capacity(c);
    let mut total = 0u64;
    for li in 0..c {
        let len = r.read_u64(&format!("length of list {li}"))?;
        total = total.saturating_add(len);
        if total > n {
            return Err(Error::Data(format!(
                "inverted lists hold more than the declared {n} entries"
            )));
        }
        let mut list = IvfList::default();
        let mut entry = vec![0u8; 4 + m + 4];
        for e in 0..len {
            r.read_exact_at(&mut entry, &format!("entry {e} of list {li}"))?;
            list.ids.push(u32::from_le_bytes([entry[0], entry[1], entry[2], entry[3]]));
            list.codes.extend_from_slice(&entry[4..4 + m]);
            let v = &entry[4 + m..];
            list.values.push(u32::from_le_bytes([v[0], v[1], v[2], v[3]]));
        }
        lists.push(list);
    }
    if total != n {
        return Err(Error::Data(format!(
            "inverted lists hold {total} entries but the header declares {n}"
        )));
    }
    IvfPqIndex::from_parts(dim, code_bits, coarse, pq, lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;
    use crate::vindex::IvfPqConfig;

    fn build_sample(seed: u64) -> (Matrix, Vec<u32>, IvfPqIndex) {
        let mut rng = SplitMix64::new(seed);
        let mut keys = Matrix::new(8);
        for _ in 0..300 {
            let row: Vec<f32> = (0..8).map(|_| (rng.next_f64() * 4.0 - 2.0) as f32).collect();
            keys.push_row(&row);
        }
        let values: Vec<u32> = (0..300).map(|i| i * 3 % 11).collect();
        let config = IvfPqConfig {
            coarse_clusters: 8,
            subspaces: 4,
            code_bits: 5,
            kmeans_iters: 15,
            train_sample: 0,
            seed: 77,
        };
        let index = IvfPqIndex::build(&keys, &values, &config).unwrap();
        (keys, values, index)
    }

    #[test]
    fn round_trip_preserves_search_results_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let (keys, _, index) = build_sample(4);
        write_index_file(&path, &index).unwrap();
        let loaded = read_index_file(&path).unwrap();
        assert_eq!(loaded.dim(), index.dim());
        assert_eq!(loaded.coarse().data(), index.coarse().data());
        assert_eq!(loaded.lists(), index.lists());
        for id in [0u32, 100, 299] {
            assert_eq!(loaded.reconstruct(id), index.reconstruct(id));
        }
        let q = keys.row(42);
        assert_eq!(loaded.search(q, 10, 4), index.search(q, 10, 4));
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        let (_, _, index) = build_sample(9);
        write_index_file(&a, &index).unwrap();
        let loaded = read_index_file(&a).unwrap();
        write_index_file(&b, &loaded).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn header_layout_is_pinned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let (_, _, index) = build_sample(2);
        write_index_file(&path, &index).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..8], b"TLIVFPQ1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8); // dim
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8); // lists
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 4); // subspaces
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 5); // code bits
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 300); // entries
    }

    #[test]
    fn corrupt_magic_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let (_, _, index) = build_sample(3);
        write_index_file(&path, &index).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = read_index_file(&path).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncated_file_reports_what_was_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let (_, _, index) = build_sample(5);
        write_index_file(&path, &index).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = read_index_file(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn entry_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bin");
        let (_, _, index) = build_sample(6);
        write_index_file(&path, &index).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Bump the declared entry count.
        bytes[24] = bytes[24].wrapping_add(1);
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_index_file(&path).is_err());
    }
}
