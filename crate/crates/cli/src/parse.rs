//! Wire formats: matrices as `a,b;c,d` and ranges as `lo..hi`, `a,b,c` or a
//! single value.

use num_bigint::BigInt;
use sllift_core::IntMatrix;

use crate::CliError;

/// Parses `rows` separated by `;`, entries by `,`. A trailing `;` is allowed.
pub fn parse_matrix(s: &str, n: usize) -> Result<IntMatrix, CliError> {
    let mut rows: Vec<&str> = s.split(';').map(str::trim).collect();
    if rows.len() > 1 && rows.last() == Some(&"") {
        rows.pop();
    }
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let entries: Vec<&str> = row.split(',').map(str::trim).collect();
        if entries.len() != n {
            return Err(CliError::Usage(format!(
                "matrix row {} has {} entries, expected {n}: \"{row}\"",
                i + 1,
                entries.len()
            )));
        }
        for (j, tok) in entries.iter().enumerate() {
            let v: BigInt = tok.parse().map_err(|_| {
                CliError::Usage(format!(
                    "invalid matrix entry \"{tok}\" at row {}, column {}",
                    i + 1,
                    j + 1
                ))
            })?;
            data.push(v);
        }
    }
    if rows.len() != n {
        return Err(CliError::Usage(format!(
            "matrix has {} rows, expected {n}",
            rows.len()
        )));
    }
    IntMatrix::new(n, n, data).map_err(|e| CliError::Usage(e.to_string()))
}

/// A parsed range argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Values(pub Vec<u64>);

pub fn parse_values(s: &str) -> Result<Values, String> {
    parse_range(s).map(Values)
}

/// `lo..hi` (inclusive), `a,b,c`, or a single value.
pub fn parse_range(s: &str) -> Result<Vec<u64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid number \"{}\" in range \"{s}\"", t.trim()))
    };
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(format!("empty range \"{s}\""));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices() {
        let m = parse_matrix("5,0;0,5", 2).unwrap();
        assert_eq!(m, IntMatrix::from_i64(2, 2, &[5, 0, 0, 5]));
        let m = parse_matrix(" -1, 2 ; 3,4 ;", 2).unwrap();
        assert_eq!(m, IntMatrix::from_i64(2, 2, &[-1, 2, 3, 4]));
        let err = parse_matrix("1,x;0,1", 2).unwrap_err().to_string();
        assert!(err.contains("\"x\"") && err.contains("row 1, column 2"), "{err}");
        assert!(parse_matrix("1,0,0;0,1", 2).is_err());
        assert!(parse_matrix("1,0", 2).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_range("16,101").unwrap(), vec![16, 101]);
        assert_eq!(parse_range("7").unwrap(), vec![7]);
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("a..2").unwrap_err().contains("\"a\""));
    }
}
