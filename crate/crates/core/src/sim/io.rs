//! Binary (`WTB1`) and CSV serialization of trajectory batches.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic      4 bytes  "WTB1"
//! regime     u8       0 = restart_record, 1 = consecutive
//! n          u32
//! N          u32
//! p1         u32
//! seed       u64
//! burn_in    u32
//! data       n * N * p1 f64, row-major [trajectory][sample][node]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Regime, TrajectoryBatch};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WTB1";

fn to_u32(value: usize, field: &'static str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::invalid(field, format!("{value} exceeds u32")))
}

pub fn write_batch<W: Write>(batch: &TrajectoryBatch, mut w: W) -> Result<()> {
    let io = |e| Error::io("<batch>", e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_u8(batch.regime.tag()).map_err(io)?;
    w.write_u32::<LittleEndian>(to_u32(batch.n, "n")?).map_err(io)?;
    w.write_u32::<LittleEndian>(to_u32(batch.trajectory_len, "N")?)
        .map_err(io)?;
    w.write_u32::<LittleEndian>(to_u32(batch.node_count, "p1")?)
        .map_err(io)?;
    w.write_u64::<LittleEndian>(batch.seed).map_err(io)?;
    w.write_u32::<LittleEndian>(to_u32(batch.burn_in, "burn_in")?)
        .map_err(io)?;
    for &x in &batch.data {
        w.write_f64::<LittleEndian>(x).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_batch<R: Read>(mut r: R) -> Result<TrajectoryBatch> {
    let corrupt = |what: &str| Error::CorruptBatch(what.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("missing magic"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let header = |e: std::io::Error| Error::CorruptBatch(format!("truncated header: {e}"));
    let tag = r.read_u8().map_err(header)?;
    let regime = Regime::from_tag(tag).ok_or_else(|| corrupt("unknown regime tag"))?;
    let n = r.read_u32::<LittleEndian>().map_err(header)? as usize;
    let trajectory_len = r.read_u32::<LittleEndian>().map_err(header)? as usize;
    let node_count = r.read_u32::<LittleEndian>().map_err(header)? as usize;
    let seed = r.read_u64::<LittleEndian>().map_err(header)?;
    let burn_in = r.read_u32::<LittleEndian>().map_err(header)? as usize;

    let len = n
        .checked_mul(trajectory_len)
        .and_then(|v| v.checked_mul(node_count))
        .ok_or_else(|| corrupt("shape overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::CorruptBatch(format!("read failed: {e}")))?;
    if bytes.len() != len * 8 {
        return Err(Error::CorruptBatch(format!(
            "shape mismatch: header implies {} data bytes, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(TrajectoryBatch {
        regime,
        n,
        trajectory_len,
        node_count,
        seed,
        burn_in,
        data,
    })
}

pub fn save_batch(batch: &TrajectoryBatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_batch(batch, BufWriter::new(file))
}

pub fn load_batch(path: impl AsRef<Path>) -> Result<TrajectoryBatch> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_batch(BufReader::new(file))
}

/// CSV with columns `trajectory,k,x0,...,x{p}`.
pub fn write_batch_csv(batch: &TrajectoryBatch, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["trajectory".to_string(), "k".to_string()];
    header.extend((0..batch.node_count).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for r in 0..batch.n {
        for k in 0..batch.trajectory_len {
            let mut rec = vec![r.to_string(), k.to_string()];
            rec.extend((0..batch.node_count).map(|i| format!("{:e}", batch.sample(r, k, i))));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::chain_graph;
    use crate::model::ModelSpec;
    use crate::sim::simulate;
    use proptest::prelude::*;

    fn batch(regime: Regime, seed: u64) -> TrajectoryBatch {
        let g = chain_graph(3).unwrap();
        let m = ModelSpec::default().build(&g).unwrap();
        simulate(&m, &g, regime, 3, 7, seed).unwrap()
    }

    fn encode(b: &TrajectoryBatch) -> Vec<u8> {
        let mut buf = Vec::new();
        write_batch(b, &mut buf).unwrap();
        buf
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(seed in any::<u64>(), consecutive in any::<bool>()) {
            let regime = if consecutive { Regime::Consecutive } else { Regime::RestartRecord };
            let b = batch(regime, seed);
            let back = read_batch(encode(&b).as_slice()).unwrap();
            prop_assert_eq!(back.regime, regime);
            prop_assert_eq!(back.seed, seed);
            prop_assert!(b.data.iter().zip(&back.data).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert_eq!(back, b);
        }
    }

    #[test]
    fn header_layout() {
        let b = batch(Regime::Consecutive, 77);
        let buf = encode(&b);
        assert_eq!(&buf[..4], b"WTB1");
        assert_eq!(buf[4], 1);
        assert_eq!(u32::from_le_bytes(buf[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[9..13].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(buf[13..17].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[17..25].try_into().unwrap()), 77);
        assert_eq!(buf.len(), 29 + 3 * 7 * 3 * 8);
    }

    #[test]
    fn truncated_and_corrupt_files_fail() {
        let buf = encode(&batch(Regime::RestartRecord, 1));
        assert!(matches!(
            read_batch(&buf[..buf.len() - 3]),
            Err(Error::CorruptBatch(_))
        ));
        assert!(matches!(read_batch(&buf[..10]), Err(Error::CorruptBatch(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_batch(bad.as_slice()).is_err());
        let mut bad = buf;
        bad[4] = 9;
        assert!(read_batch(bad.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let b = batch(Regime::RestartRecord, 5);
        let path = dir.path().join("b.wtb");
        save_batch(&b, &path).unwrap();
        assert_eq!(load_batch(&path).unwrap(), b);
        let csv_path = dir.path().join("b.csv");
        write_batch_csv(&b, &csv_path).unwrap();
        let text = std::fs::read_to_string(csv_path).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 7);
        assert!(text.starts_with("trajectory,k,x0,x1,x2"));
    }
}
