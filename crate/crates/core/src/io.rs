//! Plain-text matrix files.
//!
//! ```text
//! M <p> <rows> <cols>
//! <row-major residues, whitespace separated>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::PrimeModulus;
use crate::matrix::ResidueMatrix;

pub fn parse_matrix(text: &str) -> Result<(PrimeModulus, ResidueMatrix)> {
    let mut lines = text.lines();
    let header = lines
        .by_ref()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "M" {
        return Err(Error::Parse(format!("bad header '{header}', expected 'M p rows cols'")));
    }
    let num = |s: &str, what: &str| -> Result<u64> {
        s.parse::<u64>()
            .map_err(|_| Error::Parse(format!("bad {what} '{s}' in header")))
    };
    let modulus = PrimeModulus::new(num(fields[1], "modulus")?)?;
    let rows = num(fields[2], "row count")? as usize;
    let cols = num(fields[3], "column count")? as usize;

    let mut data = Vec::with_capacity(rows * cols);
    for tok in lines.flat_map(str::split_whitespace) {
        let v = tok
            .parse::<u32>()
            .map_err(|_| Error::Parse(format!("bad entry '{tok}'")))?;
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    let matrix = ResidueMatrix::new(rows, cols, data, modulus).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((modulus, matrix))
}

pub fn format_matrix(a: &ResidueMatrix, modulus: PrimeModulus) -> String {
    let mut s = String::with_capacity(16 + a.data().len() * 3);
    writeln!(s, "M {} {} {}", modulus.p(), a.rows(), a.cols()).unwrap();
    for r in 0..a.rows() {
        let row = a.row(r);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<(PrimeModulus, ResidueMatrix)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: &Path, a: &ResidueMatrix, modulus: PrimeModulus) -> Result<()> {
    fs::write(path, format_matrix(a, modulus)).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
