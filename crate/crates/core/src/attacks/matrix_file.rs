//! Plain-text unitaries: a `dim d` line, then `d` rows of `d` whitespace
//! separated `re,im` pairs. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quantum::{C64, UnitarySpec};

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MatrixFile(format!("line {line}: {msg}"))
}

fn parse_entry(token: &str, line: usize) -> Result<C64> {
    let (re, im) = token.split_once(',').ok_or_else(|| bad(line, format!("`{token}` is not a re,im pair")))?;
    let re: f64 = re.trim().parse().map_err(|_| bad(line, format!("bad real part `{re}`")))?;
    let im: f64 = im.trim().parse().map_err(|_| bad(line, format!("bad imaginary part `{im}`")))?;
    Ok(C64::new(re, im))
}

/// Parses and validates a unitary. Non-unitary matrices are rejected with
/// [`Error::NonUnitary`].
pub fn parse_matrix_file(text: &str) -> Result<UnitarySpec> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (first, header) = lines.next().ok_or_else(|| Error::MatrixFile("empty file".into()))?;
    let dim: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dim", d] => d.parse().map_err(|_| bad(first, format!("bad dimension `{d}`")))?,
        _ => return Err(bad(first, "expected `dim <d>`")),
    };
    let mut entries = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for (line, text) in lines {
        let row: Vec<C64> = text.split_whitespace().map(|t| parse_entry(t, line)).collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(bad(line, format!("expected {dim} entries, found {}", row.len())));
        }
        entries.extend(row);
        rows += 1;
    }
    if rows != dim {
        return Err(Error::MatrixFile(format!("expected {dim} rows, found {rows}")));
    }
    UnitarySpec::new(dim, entries)
}

pub fn format_matrix_file(u: &UnitarySpec) -> String {
    let mut out = format!("dim {}\n", u.dim());
    for r in 0..u.dim() {
        let row: Vec<String> = (0..u.dim()).map(|c| {
            let z = u.get(r, c);
            format!("{:?},{:?}", z.re, z.im)
        }).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn load_unitary(path: &Path) -> Result<UnitarySpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MatrixFile(format!("{}: {e}", path.display())))?;
    parse_matrix_file(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let u = UnitarySpec::random(3, 17);
        assert_eq!(parse_matrix_file(&format_matrix_file(&u)).unwrap(), u);
    }

    #[test]
    fn parses_hand_written_cnot() {
        let text = "dim 4\n# control first\n1,0 0,0 0,0 0,0\n0,0 1,0 0,0 0,0\n0,0 0,0 0,0 1,0\n0,0 0,0 1,0 0,0\n";
        assert_eq!(parse_matrix_file(text).unwrap(), UnitarySpec::cnot());
    }

    #[test]
    fn rejects_malformed_and_non_unitary() {
        assert!(matches!(parse_matrix_file(""), Err(Error::MatrixFile(_))));
        assert!(matches!(parse_matrix_file("size 2\n"), Err(Error::MatrixFile(_))));
        assert!(matches!(parse_matrix_file("dim 2\n1,0 0,0\n"), Err(Error::MatrixFile(_))));
        assert!(matches!(parse_matrix_file("dim 2\n1,0 0\n0,0 1,0\n"), Err(Error::MatrixFile(_))));
        assert!(matches!(parse_matrix_file("dim 2\n1,0 1,0\n0,0 1,0\n"), Err(Error::NonUnitary(_))));
    }
}
