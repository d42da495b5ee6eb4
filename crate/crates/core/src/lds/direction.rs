//! Direction numbers of base-2 Sobol' sequences.
//!
//! Tables use the conventional text layout, one line per dimension starting
//! at dimension 2:
//!
//! ```text
//! d s a m_1 ... m_s
//! ```
//!
//! where `s` is the degree of the primitive polynomial, `a` encodes its
//! interior coefficients and `m_1..m_s` are the initial odd integers
//! `m_j < 2^j`. Dimension 1 is always the van der Corput sequence and is not
//! listed. A non-numeric first line (the usual `d s a m_i` header) and lines
//! starting with `#` are skipped.

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of binary digits produced per coordinate.
pub const DIGITS: usize = 32;

const BUILTIN_TABLE: &str = include_str!("../../data/new-joe-kuo-6.1024.txt");

/// Direction numbers and quality parameter of a base-2 digital
/// `(t, d)`-sequence.
///
/// Direction number `j` (1-based) of every dimension is stored as a 32-bit
/// integer whose lowest set bit is digit `j`, i.e. the generating matrix is
/// upper triangular with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalSequenceSpec {
    directions: Vec<[u32; DIGITS]>,
    t: u32,
}

#[derive(Debug, Clone)]
struct TableRow {
    degree: u32,
    coefficients: u32,
    initial: Vec<u32>,
}

impl DigitalSequenceSpec {
    /// The first `dimension` dimensions of the bundled Joe–Kuo table
    /// (`new-joe-kuo-6`, 1024 dimensions).
    pub fn sobol(dimension: usize) -> Result<Self> {
        static TABLE: OnceLock<Vec<TableRow>> = OnceLock::new();
        let rows = TABLE.get_or_init(|| {
            parse_table(BUILTIN_TABLE, Path::new("<builtin>"))
                .expect("bundled direction-number table is well formed")
        });
        Self::from_rows(rows, dimension)
    }

    /// Parses a direction-number table and keeps its first `dimension`
    /// dimensions.
    pub fn from_table(text: &str, dimension: usize) -> Result<Self> {
        let rows = parse_table(text, Path::new("<table>"))?;
        Self::from_rows(&rows, dimension)
    }

    pub fn from_table_file(path: &Path, dimension: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let rows = parse_table(&text, path)?;
        Self::from_rows(&rows, dimension)
    }

    /// Builds a spec from explicit direction numbers, validating that each
    /// number has its lowest set bit at its own digit position.
    pub fn from_direction_numbers(directions: Vec<[u32; DIGITS]>, t: u32) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidDirectionNumbers(
                "dimension must be at least 1".into(),
            ));
        }
        for (dim, column) in directions.iter().enumerate() {
            for (j, &v) in column.iter().enumerate() {
                // digit j+1 sits at bit 31-j
                if v == 0 || v.trailing_zeros() as usize != DIGITS - 1 - j {
                    return Err(Error::InvalidDirectionNumbers(format!(
                        "dimension {}: direction number {} = {:#010x} must have its lowest set bit at digit {}",
                        dim + 1,
                        j + 1,
                        v,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { directions, t })
    }

    fn from_rows(rows: &[TableRow], dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidDirectionNumbers(
                "dimension must be at least 1".into(),
            ));
        }
        if dimension - 1 > rows.len() {
            return Err(Error::InvalidDirectionNumbers(format!(
                "table provides {} dimensions, {} requested",
                rows.len() + 1,
                dimension
            )));
        }
        let mut directions = Vec::with_capacity(dimension);
        directions.push(van_der_corput());
        let mut t = 0;
        for row in &rows[..dimension - 1] {
            directions.push(expand(row));
            t += row.degree - 1;
        }
        Self::from_direction_numbers(directions, t)
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Quality parameter `t`; for Sobol' tables this is the sum of
    /// `degree - 1` over the primitive polynomials in use.
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn direction_numbers(&self, dimension: usize) -> &[u32; DIGITS] {
        &self.directions[dimension]
    }

    /// Unscrambled 32-digit coordinate of point `index`.
    #[inline]
    pub fn coordinate(&self, index: u32, dimension: usize) -> u32 {
        let v = &self.directions[dimension];
        let mut bits = index;
        let mut x = 0;
        while bits != 0 {
            let j = bits.trailing_zeros();
            x ^= v[j as usize];
            bits &= bits - 1;
        }
        x
    }
}

fn van_der_corput() -> [u32; DIGITS] {
    std::array::from_fn(|j| 1u32 << (DIGITS - 1 - j))
}

fn expand(row: &TableRow) -> [u32; DIGITS] {
    let s = row.degree as usize;
    let mut v = [0u32; DIGITS];
    for (j, &m) in row.initial.iter().enumerate().take(DIGITS) {
        v[j] = m << (DIGITS - 1 - j);
    }
    for j in s..DIGITS {
        let mut next = v[j - s] ^ (v[j - s] >> s);
        for k in 1..s {
            if (row.coefficients >> (s - 1 - k)) & 1 == 1 {
                next ^= v[j - k];
            }
        }
        v[j] = next;
    }
    v
}

fn parse_table(text: &str, path: &Path) -> Result<Vec<TableRow>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && !line.starts_with(|c: char| c.is_ascii_digit()) {
            continue;
        }
        let fields = line
            .split_whitespace()
            .map(|f| f.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, format!("non-integer field: {e}")))?;
        if fields.len() < 3 {
            return Err(parse_err(line_no, "expected `d s a m_1 ... m_s`".into()));
        }
        let (dim, degree, coefficients) = (fields[0], fields[1], fields[2]);
        let initial = fields[3..].to_vec();
        let expected_dim = rows.len() as u32 + 2;
        if dim != expected_dim {
            return Err(parse_err(
                line_no,
                format!("expected dimension {expected_dim}, found {dim}"),
            ));
        }
        if degree == 0 || degree as usize > DIGITS {
            return Err(parse_err(line_no, format!("degree {degree} out of range")));
        }
        if initial.len() != degree as usize {
            return Err(parse_err(
                line_no,
                format!("degree {degree} needs {degree} initial numbers, found {}", initial.len()),
            ));
        }
        if degree > 1 && coefficients >> (degree - 1) != 0 {
            return Err(parse_err(
                line_no,
                format!("coefficient word {coefficients} has more than {} bits", degree - 1),
            ));
        }
        for (j, &m) in initial.iter().enumerate() {
            if m % 2 == 0 || u64::from(m) >= 1u64 << (j + 1) {
                return Err(parse_err(
                    line_no,
                    format!("m_{} = {m} must be odd and below 2^{}", j + 1, j + 1),
                ));
            }
        }
        rows.push(TableRow {
            degree,
            coefficients,
            initial,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_dimension_matches_hand_recursion() {
        // x + 1, m_1 = 1: m_j = 2 m_{j-1} xor m_{j-1}, so m = 1, 3, 5, 15, ...
        let spec = DigitalSequenceSpec::sobol(2).unwrap();
        let v = spec.direction_numbers(1);
        assert_eq!(v[0], 1 << 31);
        assert_eq!(v[1], 3 << 30);
        assert_eq!(v[2], 5 << 29);
        assert_eq!(v[3], 15 << 28);
        assert_eq!(v[4], 17 << 27);
    }

    #[test]
    fn bundled_table_covers_64_dimensions() {
        let spec = DigitalSequenceSpec::sobol(1024).unwrap();
        assert_eq!(spec.dimension(), 1024);
        assert!(DigitalSequenceSpec::sobol(1025).is_err());
        assert_eq!(DigitalSequenceSpec::sobol(2).unwrap().t(), 0);
        assert_eq!(DigitalSequenceSpec::sobol(3).unwrap().t(), 1);
    }

    #[test]
    fn rejects_malformed_tables() {
        let even = "d s a m_i\n2 1 0 2\n";
        assert!(DigitalSequenceSpec::from_table(even, 2).is_err());
        let short = "2 2 1 1\n";
        assert!(DigitalSequenceSpec::from_table(short, 2).is_err());
        let skipped = "3 1 0 1\n";
        assert!(DigitalSequenceSpec::from_table(skipped, 2).is_err());
        let too_big = "2 2 1 1 5\n";
        assert!(DigitalSequenceSpec::from_table(too_big, 2).is_err());
        let ok = "d s a m_i\n2 1 0 1\n3 2 1 1 3\n";
        assert_eq!(DigitalSequenceSpec::from_table(ok, 3).unwrap().dimension(), 3);
    }

    #[test]
    fn rejects_singular_direction_numbers() {
        let mut v = van_der_corput();
        v[4] = 0;
        assert!(DigitalSequenceSpec::from_direction_numbers(vec![v], 0).is_err());
        let mut w = van_der_corput();
        w[2] |= 1;
        assert!(DigitalSequenceSpec::from_direction_numbers(vec![w], 0).is_err());
        assert!(DigitalSequenceSpec::from_direction_numbers(vec![], 0).is_err());
    }
}
