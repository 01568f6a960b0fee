//! Matrix files: a one-line JSON header followed by raw column-major data.
//!
//! Layout on disk:
//!
//! ```text
//! {"rows":R,"cols":C,"dtype":"c128"}\n
//! R*C little-endian f64 pairs (re, im), column by column
//! ```
//!
//! The format exists for golden-file tests and FFI consumers; it is not a
//! general interchange format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    rows: usize,
    cols: usize,
    dtype: String,
}

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    let header = Header {
        rows: m.nrows(),
        cols: m.ncols(),
        dtype: "c128".into(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: &mut R) -> Result<DMatrix<Complex64>> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::param("header", "missing newline-terminated header"));
    }
    let header: Header = serde_json::from_slice(&line)?;
    if header.dtype != "c128" {
        return Err(Error::param(
            "dtype",
            format!("unsupported dtype {:?}", header.dtype),
        ));
    }
    let count = header.rows.checked_mul(header.cols).ok_or_else(|| {
        Error::param("header", "rows * cols overflows")
    })?;
    let mut buf = [0u8; 16];
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        data.push(Complex64::new(re, im));
    }
    Ok(DMatrix::from_vec(header.rows, header.cols, data))
}

pub fn save_matrix<P: AsRef<Path>>(path: P, m: &DMatrix<Complex64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix<P: AsRef<Path>>(path: P) -> Result<DMatrix<Complex64>> {
    let mut r = BufReader::new(File::open(path)?);
    read_matrix(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::gen_precoder;

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = gen_precoder(20, 100.0, 3).unwrap().matrix().clone();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m).unwrap();
        let back = read_matrix(&mut &bytes[..]).unwrap();
        assert_eq!(back.nrows(), 20);
        assert_eq!(back.ncols(), 10);
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn golden_bytes_for_tiny_matrix() {
        let m = DMatrix::from_vec(1, 2, vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)]);
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m).unwrap();
        let mut want = br#"{"rows":1,"cols":2,"dtype":"c128"}"#.to_vec();
        want.push(b'\n');
        for v in [1.0f64, -2.0, 0.5, 0.0] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, want);
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        let bad = b"{\"rows\":1,\"cols\":1,\"dtype\":\"f64\"}\n".to_vec();
        assert!(read_matrix(&mut &bad[..]).is_err());

        let no_newline = br#"{"rows":1,"cols":1,"dtype":"c128"}"#.to_vec();
        assert!(read_matrix(&mut &no_newline[..]).is_err());

        let mut truncated = b"{\"rows\":2,\"cols\":2,\"dtype\":\"c128\"}\n".to_vec();
        truncated.extend_from_slice(&[0u8; 16]);
        assert!(read_matrix(&mut &truncated[..]).is_err());
    }

    #[test]
    fn save_and_load_via_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mat");
        let m = gen_precoder(8, 1.0, 9).unwrap().matrix().clone();
        save_matrix(&path, &m).unwrap();
        let back = load_matrix(&path).unwrap();
        assert_eq!(m, back);
    }
}
