use crate::error::{Error, Result};
use crate::hypercube::SpinVector;
use std::io::{BufRead, Write};

/// Reads one example per line, either `d` characters from `{+,-}` or a
/// comma-separated list of `±1` integers. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<SpinVector>> {
    let mut out: Vec<SpinVector> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = if line.contains(',') {
            let signs = line
                .split(',')
                .map(|t| match t.trim() {
                    "1" | "+1" => Ok(1i8),
                    "-1" => Ok(-1i8),
                    other => Err(Error::Parse(format!("line {}: expected ±1, got {other:?}", lineno + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            SpinVector::from_signs(&signs)?
        } else {
            SpinVector::parse_plus_minus(line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?
        };
        if let Some(first) = out.first() {
            if first.dim() != v.dim() {
                return Err(Error::Parse(format!(
                    "line {}: dimension {} differs from {}",
                    lineno + 1,
                    v.dim(),
                    first.dim()
                )));
            }
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse("dataset is empty".into()));
    }
    Ok(out)
}

/// Writes one `{+,-}` line per example.
pub fn write_dataset<W: Write>(mut out: W, data: &[SpinVector]) -> Result<()> {
    for v in data {
        writeln!(out, "{}", v.to_plus_minus())?;
    }
    Ok(())
}
