//! Little-endian checkpoint: `EXWQ`, version, layer count, then per layer
//! rows, cols, row-major weights and biases as `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::network::{Dense, QNetwork, LAYER_SHAPES};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EXWQ";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(net: &QNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.param_count() * 4 + net.layers.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for l in &net.layers {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("layer too large".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses a checkpoint and checks that the layer shapes are the expected ones.
pub fn decode_checkpoint(buf: &[u8]) -> Result<QNetwork> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let count = r.u32()? as usize;
    if count != LAYER_SHAPES.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} layers, found {count}",
            LAYER_SHAPES.len()
        )));
    }
    let mut layers = Vec::with_capacity(count);
    for (k, &(er, ec)) in LAYER_SHAPES.iter().enumerate() {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != (er, ec) {
            return Err(Error::Checkpoint(format!(
                "layer {k} is {rows}x{cols}, expected {er}x{ec}"
            )));
        }
        let weights = r.f32s(rows * cols)?;
        let bias = r.f32s(cols)?;
        layers.push(Dense { rows, cols, weights, bias });
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes after last layer".into()));
    }
    let net = QNetwork { layers };
    net.check_finite()?;
    Ok(net)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_checkpoint(net: &QNetwork, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&encode_checkpoint(net)).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<QNetwork> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip() {
        let net = QNetwork::init(&mut ChaCha8Rng::seed_from_u64(5));
        let bytes = encode_checkpoint(&net);
        assert_eq!(&bytes[..4], b"EXWQ");
        assert_eq!(decode_checkpoint(&bytes).unwrap(), net);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.exwq");
        save_checkpoint(&net, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), net);
    }

    #[test]
    fn corrupt_inputs() {
        let net: QNetwork = QNetwork::zeros();
        let mut bytes = encode_checkpoint(&net);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        bytes[4] = 9;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::VersionMismatch { found: 9, .. })));
        let mut bad = encode_checkpoint(&net);
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut extra = encode_checkpoint(&net);
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }
}
