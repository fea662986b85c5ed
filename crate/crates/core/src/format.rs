//! Basis files: a one-line JSON header followed by the payload.
//!
//! Binary payload: `m` columns of `n * B` little-endian `f64`, column-major.
//! The CSV variant starts with `# <header>` and has one row per ambient
//! coordinate, each value printed with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blockspace::{BlockShape, SubspaceBasis};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Bin,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub m: usize,
    #[serde(rename = "scaling_M")]
    pub scaling_m: f64,
    pub bits_consumed: u64,
    pub certificate: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFile {
    pub header: Header,
    pub basis: SubspaceBasis,
}

impl BasisFile {
    pub fn new(
        basis: SubspaceBasis,
        scaling_m: f64,
        bits_consumed: u64,
        certificate: Value,
    ) -> Self {
        let shape = basis.shape();
        Self {
            header: Header {
                version: FORMAT_VERSION,
                n: shape.blocks(),
                b: shape.width(),
                m: basis.dim(),
                scaling_m,
                bits_consumed,
                certificate,
            },
            basis,
        }
    }

    /// Header JSON with keys in sorted order.
    fn header_line(&self) -> Result<String> {
        let value = serde_json::to_value(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        serde_json::to_string(&value).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_bytes(&self, encoding: Encoding) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        match encoding {
            Encoding::Bin => {
                out.extend_from_slice(self.header_line()?.as_bytes());
                out.push(b'\n');
                out.reserve(self.basis.matrix().len() * 8);
                for v in self.basis.matrix() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Encoding::Csv => {
                writeln!(out, "# {}", self.header_line()?)?;
                let rows = self.basis.rows();
                for r in 0..rows {
                    let line: Vec<String> = (0..self.basis.dim())
                        .map(|j| format!("{:.16e}", self.basis.matrix()[j * rows + r]))
                        .collect();
                    writeln!(out, "{}", line.join(","))?;
                }
            }
        }
        Ok(out)
    }

    /// Parses either encoding, detected from the first byte.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.first() {
            Some(b'{') => Self::parse_bin(bytes),
            Some(b'#') => Self::parse_csv(bytes),
            _ => Err(Error::Format(
                "expected a JSON header or '#' comment line".into(),
            )),
        }
    }

    pub fn encoding_of(bytes: &[u8]) -> Option<Encoding> {
        match bytes.first() {
            Some(b'{') => Some(Encoding::Bin),
            Some(b'#') => Some(Encoding::Csv),
            _ => None,
        }
    }

    fn parse_header(line: &[u8]) -> Result<(Header, BlockShape)> {
        let header: Header =
            serde_json::from_slice(line).map_err(|e| Error::Format(format!("header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let shape =
            BlockShape::new(header.n, header.b).map_err(|e| Error::Format(e.to_string()))?;
        if header.m > shape.ambient_dim() {
            return Err(Error::Format(format!(
                "m = {} exceeds n*B = {}",
                header.m,
                shape.ambient_dim()
            )));
        }
        Ok((header, shape))
    }

    fn parse_bin(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&c| c == b'\n')
            .ok_or_else(|| Error::Format("missing header terminator".into()))?;
        let (header, shape) = Self::parse_header(&bytes[..nl])?;
        let payload = &bytes[nl + 1..];
        let expected = shape.ambient_dim() * header.m * 8;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let q = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let basis = SubspaceBasis::from_parts(shape, header.m, q)?;
        Ok(Self { header, basis })
    }

    fn parse_csv(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        let (header, shape) = Self::parse_header(first.trim_start_matches('#').trim().as_bytes())?;
        let rows = shape.ambient_dim();
        let m = header.m;
        let mut q = vec![0.0; rows * m];
        let mut r = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            if r == rows {
                return Err(Error::Format(format!("more than {rows} data rows")));
            }
            let fields: Vec<&str> = if m == 0 {
                Vec::new()
            } else {
                line.split(',').collect()
            };
            if fields.len() != m {
                return Err(Error::Format(format!(
                    "row {r} has {} values, expected {m}",
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                q[j * rows + r] = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("row {r}: bad number {f:?}")))?;
            }
            r += 1;
        }
        if r != rows {
            return Err(Error::Format(format!(
                "{r} data rows, header implies {rows}"
            )));
        }
        let basis = SubspaceBasis::from_parts(shape, m, q)?;
        Ok(Self { header, basis })
    }

    /// Writes through a temporary file in the destination directory, so
    /// `path` either holds the complete file or is left untouched.
    pub fn write(&self, path: &Path, encoding: Encoding) -> Result<()> {
        let bytes = self.to_bytes(encoding)?;
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> BasisFile {
        let basis = SubspaceBasis::orthonormalized(
            BlockShape::new(3, 2).unwrap(),
            2,
            vec![
                0.1,
                -0.7,
                1.0 / 3.0,
                2.0,
                1e-300,
                5.0, //
                1.0,
                0.0,
                -2.0,
                1.0,
                std::f64::consts::PI,
                0.25,
            ],
        )
        .unwrap();
        BasisFile::new(basis, 1.5, 4096, json!({"z": 1, "a": [0.1, 2]}))
    }

    #[test]
    fn binary_layout() {
        let f = sample();
        let bytes = f.to_bytes(Encoding::Bin).unwrap();
        let nl = bytes.iter().position(|&c| c == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..nl]).unwrap();
        assert_eq!(
            header,
            r#"{"B":2,"bits_consumed":4096,"certificate":{"a":[0.1,2],"z":1},"m":2,"n":3,"scaling_M":1.5,"version":1}"#
        );
        assert_eq!(bytes.len() - nl - 1, 6 * 2 * 8);
        assert_eq!(&bytes[nl + 1..nl + 9], &f.basis.matrix()[0].to_le_bytes());
    }

    #[test]
    fn round_trips() {
        let f = sample();
        for enc in [Encoding::Bin, Encoding::Csv] {
            let bytes = f.to_bytes(enc).unwrap();
            let back = BasisFile::from_bytes(&bytes).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.to_bytes(enc).unwrap(), bytes);
            assert_eq!(BasisFile::encoding_of(&bytes), Some(enc));
        }
    }

    #[test]
    fn rejects_malformed() {
        let bytes = sample().to_bytes(Encoding::Bin).unwrap();
        assert!(matches!(
            BasisFile::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            BasisFile::from_bytes(b"hello"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            BasisFile::from_bytes(b"{\"version\":2}\n"),
            Err(Error::Format(_))
        ));
        let csv = String::from_utf8(sample().to_bytes(Encoding::Csv).unwrap()).unwrap();
        let cut: String = csv.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            BasisFile::from_bytes(cut.as_bytes()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        let f = sample();
        f.write(&path, Encoding::Bin).unwrap();
        assert_eq!(BasisFile::read(&path).unwrap(), f);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
