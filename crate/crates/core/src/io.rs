//! Flat binary layout for sample ensembles and the CSV dialect used by all
//! reports.
//!
//! Binary layout: four little-endian `u64` header words `(dim, N, count,
//! seed)`, then `f64` pairs `(re, im)` in mode-major order: the outer loop
//! runs over modes, the inner loop over samples.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{FourierGrid, SpectralField};

/// Ensemble contents as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredEnsemble {
    pub grid: FourierGrid,
    pub seed: u64,
    pub fields: Vec<SpectralField>,
}

pub fn write_ensemble<W: Write>(mut out: W, grid: &FourierGrid, seed: u64, fields: &[SpectralField]) -> Result<()> {
    if let Some(f) = fields.iter().find(|f| f.grid() != grid || f.components() != 1) {
        return Err(Error::Format(format!(
            "expected scalar fields on {grid:?}, found {} component(s) on {:?}",
            f.components(),
            f.grid()
        )));
    }
    let io = |e: std::io::Error| Error::Format(e.to_string());
    for word in [grid.dim() as u64, grid.modes_per_dim() as u64, fields.len() as u64, seed] {
        out.write_all(&word.to_le_bytes()).map_err(io)?;
    }
    let mut buf = Vec::with_capacity(16 * fields.len());
    for idx in 0..grid.len() {
        buf.clear();
        for f in fields {
            let z = f.get(idx, 0);
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_ensemble<R: Read>(mut input: R) -> Result<StoredEnsemble> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 4];
    for h in header.iter_mut() {
        input
            .read_exact(&mut word)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        *h = u64::from_le_bytes(word);
    }
    let [dim, n, count, seed] = header;
    let grid = FourierGrid::new(dim as usize, n as usize)?;
    let count = usize::try_from(count).map_err(|_| Error::Format("count overflows".into()))?;
    let mut fields = vec![SpectralField::zeros(grid, 1); count];
    let mut pair = [0u8; 16];
    for idx in 0..grid.len() {
        for f in fields.iter_mut() {
            input
                .read_exact(&mut pair)
                .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
            let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
            f.set(idx, 0, Complex64::new(re, im));
        }
    }
    if input.read(&mut pair).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(StoredEnsemble { grid, seed, fields })
}

/// Float formatting for CSV output: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Minimal CSV builder: comma separated, header row, LF line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.columns, "CSV row width mismatch");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let c = c.as_ref();
            if c.contains([',', '"', '\n']) {
                self.text.push('"');
                self.text.push_str(&c.replace('"', "\"\""));
                self.text.push('"');
            } else {
                self.text.push_str(c);
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
