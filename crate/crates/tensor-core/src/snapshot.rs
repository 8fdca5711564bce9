use crate::error::TensorError;
use crate::store::ParamStore;
use crate::tensor::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// File magic for parameter snapshots.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"MRLP";
/// Current snapshot format version.
pub const SNAPSHOT_VERSION: u32 = 1;

/// Writes every parameter to `writer` in store order.
///
/// Layout: the 4-byte magic, a `u32` format version, then one record per
/// parameter: `u32` name length, the UTF-8 name, `u32` rank (always 2),
/// one `u32` per dimension, then the row-major payload as little-endian
/// `f64`. Records run to end of file; there is no trailing index.
pub fn save_params<W: Write>(store: &ParamStore, writer: &mut W) -> Result<(), TensorError> {
    writer.write_all(SNAPSHOT_MAGIC)?;
    writer.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    for (_, name, tensor) in store.iter() {
        let name_bytes = name.as_bytes();
        writer.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        writer.write_all(name_bytes)?;
        writer.write_all(&2u32.to_le_bytes())?;
        writer.write_all(&(tensor.rows() as u32).to_le_bytes())?;
        writer.write_all(&(tensor.cols() as u32).to_le_bytes())?;
        for &v in tensor.data() {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Convenience wrapper writing a snapshot file at `path`.
pub fn save_params_to_path(store: &ParamStore, path: &Path) -> Result<(), TensorError> {
    let mut writer = BufWriter::new(File::create(path)?);
    save_params(store, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32, TensorError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Reads a snapshot back into a fresh [`ParamStore`], preserving order.
pub fn load_params<R: Read>(reader: &mut R) -> Result<ParamStore, TensorError> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(TensorError::SnapshotFormat(format!(
            "bad magic {magic:?}, expected {SNAPSHOT_MAGIC:?}"
        )));
    }
    let version = read_u32(reader)?;
    if version != SNAPSHOT_VERSION {
        return Err(TensorError::SnapshotFormat(format!(
            "unsupported version {version}, expected {SNAPSHOT_VERSION}"
        )));
    }

    let mut store = ParamStore::new();
    loop {
        // A record starts with the name length; clean EOF here ends the file.
        let mut len_buf = [0u8; 4];
        match reader.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        reader.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| TensorError::SnapshotFormat(format!("parameter name not UTF-8: {e}")))?;

        let rank = read_u32(reader)?;
        if rank != 2 {
            return Err(TensorError::SnapshotFormat(format!(
                "parameter `{name}` has rank {rank}, expected 2"
            )));
        }
        let rows = read_u32(reader)? as usize;
        let cols = read_u32(reader)? as usize;
        if rows == 0 || cols == 0 {
            return Err(TensorError::SnapshotFormat(format!(
                "parameter `{name}` has empty shape {rows}x{cols}"
            )));
        }
        let mut data = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            reader.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        store.insert(&name, Tensor::new(rows, cols, data)?)?;
    }
    Ok(store)
}

/// Convenience wrapper reading a snapshot file at `path`.
pub fn load_params_from_path(path: &Path) -> Result<ParamStore, TensorError> {
    let mut reader = BufReader::new(File::open(path)?);
    load_params(&mut reader)
}
