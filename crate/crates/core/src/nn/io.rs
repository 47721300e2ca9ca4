//! `EMAE` model files: magic, u16 version, u64 seed, then the encoder
//! weights, encoder bias, decoder weights and decoder bias as little-endian
//! `f64` in that order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Autoencoder, Matrix, NnError, HIDDEN_DIM, INPUT_DIM};

pub const MODEL_MAGIC: [u8; 4] = *b"EMAE";
pub const MODEL_VERSION: u16 = 1;

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, NnError> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|e| NnError::Format(format!("truncated parameters: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Autoencoder {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(&MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for group in self.param_groups() {
            for v in group {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let mut header = [0u8; 14];
        r.read_exact(&mut header)
            .map_err(|_| NnError::Format("file shorter than header".into()))?;
        if header[..4] != MODEL_MAGIC {
            return Err(NnError::Format(format!("bad magic {:02x?}", &header[..4])));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != MODEL_VERSION {
            return Err(NnError::Format(format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(header[6..14].try_into().unwrap());
        let w_enc = Matrix::new(HIDDEN_DIM, INPUT_DIM, read_f64s(r, HIDDEN_DIM * INPUT_DIM)?)?;
        let b_enc = read_f64s(r, HIDDEN_DIM)?;
        let w_dec = Matrix::new(INPUT_DIM, HIDDEN_DIM, read_f64s(r, INPUT_DIM * HIDDEN_DIM)?)?;
        let b_dec = read_f64s(r, INPUT_DIM)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(NnError::Format("trailing bytes after parameters".into()));
        }
        Autoencoder::from_parts(w_enc, b_enc, w_dec, b_dec, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Autoencoder::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_size() {
        let ae = Autoencoder::init(77);
        let mut buf = Vec::new();
        ae.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 14 + 8 * (2 * HIDDEN_DIM * INPUT_DIM + HIDDEN_DIM + INPUT_DIM));
        let back = Autoencoder::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, ae);
        assert_eq!(back.seed(), 77);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut buf = Vec::new();
        Autoencoder::init(1).write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Autoencoder::read_from(&mut bad.as_slice()), Err(NnError::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(Autoencoder::read_from(&mut bad.as_slice()), Err(NnError::Format(_))));
        let short = &buf[..buf.len() - 1];
        assert!(Autoencoder::read_from(&mut &short[..]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(Autoencoder::read_from(&mut long.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.emae");
        let ae = Autoencoder::init(3);
        ae.save(&p).unwrap();
        assert_eq!(Autoencoder::load(&p).unwrap(), ae);
    }
}
