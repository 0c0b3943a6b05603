//! PHYLIP-style square distance matrices and taxon weight tables.
//!
//! The reader accepts the relaxed PHYLIP layout: a first line holding the
//! taxon count, then one row per taxon consisting of a whitespace-delimited
//! label followed by the full row of values. Rows may wrap onto continuation
//! lines; a continuation is recognized because the previous row is still
//! short. Matrices must be symmetric up to a small relative tolerance and
//! the diagonal is ignored.

use crate::dissim::DissimilarityMap;

use super::ParseError;

/// Relative tolerance used when reconciling the two halves of a symmetric
/// matrix read from text.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A dissimilarity matrix together with the taxon labels naming its rows.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    /// Taxon labels in row order.
    pub labels: Vec<String>,
    /// The packed upper triangle of the (symmetrized) matrix.
    pub matrix: DissimilarityMap<f64>,
}

fn matrix_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Matrix {
        line,
        message: message.into(),
    }
}

struct Row {
    label: String,
    values: Vec<f64>,
    line: usize,
}

/// Parses a relaxed PHYLIP distance matrix.
///
/// ```
/// let text = "3\nalpha 0 1.5 2.0\nbeta 1.5 0 2.5\ngamma 2.0 2.5 0\n";
/// let m = wlstrees::io::read_phylip(text).unwrap();
/// assert_eq!(m.labels, ["alpha", "beta", "gamma"]);
/// assert_eq!(m.matrix.get(0, 2), 2.0);
/// ```
pub fn read_phylip(text: &str) -> Result<LabeledMatrix, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| matrix_err(1, "empty input, expected a taxon count"))?;
    let header = header.trim();
    let n: usize = header.split_whitespace().next().unwrap().parse().map_err(|_| {
        matrix_err(
            header_line,
            format!("expected a taxon count, found {header:?}"),
        )
    })?;
    if n < 2 {
        return Err(matrix_err(
            header_line,
            format!("need at least 2 taxa, header says {n}"),
        ));
    }

    let mut rows: Vec<Row> = Vec::with_capacity(n);
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let continuing = rows.last().is_some_and(|r| r.values.len() < n);
        if continuing {
            // Continuation of the previous row: every field is a number.
            let row = rows.last_mut().unwrap();
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    matrix_err(line_no, format!("expected a number, found {field:?}"))
                })?;
                row.values.push(v);
            }
            if row.values.len() > n {
                return Err(matrix_err(
                    line_no,
                    format!(
                        "row for {:?} has {} values, expected {n}",
                        row.label,
                        row.values.len()
                    ),
                ));
            }
        } else {
            if rows.len() == n {
                return Err(matrix_err(
                    line_no,
                    format!("unexpected extra row, header promised {n} taxa"),
                ));
            }
            let label = fields.next().unwrap().to_string();
            if label.parse::<f64>().is_ok() {
                return Err(matrix_err(
                    line_no,
                    format!("row must start with a taxon label, found number {label:?}"),
                ));
            }
            let mut values = Vec::with_capacity(n);
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    matrix_err(line_no, format!("expected a number, found {field:?}"))
                })?;
                values.push(v);
            }
            if values.len() > n {
                return Err(matrix_err(
                    line_no,
                    format!("row for {label:?} has {} values, expected {n}", values.len()),
                ));
            }
            rows.push(Row {
                label,
                values,
                line: line_no,
            });
        }
    }

    if rows.len() != n {
        return Err(matrix_err(
            rows.last().map_or(header_line, |r| r.line),
            format!("found {} taxon rows, header promised {n}", rows.len()),
        ));
    }
    if let Some(short) = rows.iter().find(|r| r.values.len() != n) {
        return Err(matrix_err(
            short.line,
            format!(
                "row for {:?} has {} values, expected {n}",
                short.label,
                short.values.len()
            ),
        ));
    }

    let mut labels = Vec::with_capacity(n);
    for row in &rows {
        if labels.contains(&row.label) {
            return Err(matrix_err(
                row.line,
                format!("duplicate taxon label {:?}", row.label),
            ));
        }
        labels.push(row.label.clone());
    }

    let mut matrix = DissimilarityMap::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let upper = rows[i].values[j];
            let lower = rows[j].values[i];
            let scale = upper.abs().max(lower.abs()).max(1.0);
            if !upper.is_finite() || !lower.is_finite() {
                return Err(matrix_err(
                    rows[j].line,
                    format!(
                        "non-finite entry between {:?} and {:?}",
                        rows[i].label, rows[j].label
                    ),
                ));
            }
            if (upper - lower).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(matrix_err(
                    rows[j].line,
                    format!(
                        "matrix is not symmetric: entry ({}, {}) is {upper} above the \
                         diagonal but {lower} below",
                        rows[i].label, rows[j].label
                    ),
                ));
            }
            matrix.set(i, j, 0.5 * (upper + lower));
        }
    }

    Ok(LabeledMatrix { labels, matrix })
}

/// Renders a labeled matrix in the same relaxed PHYLIP layout accepted by
/// [`read_phylip`].
pub fn write_phylip(labels: &[String], matrix: &DissimilarityMap<f64>) -> String {
    let n = matrix.n();
    debug_assert_eq!(labels.len(), n);
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = format!("{n}\n");
    for i in 0..n {
        out.push_str(&format!("{:<width$}", labels[i]));
        for j in 0..n {
            let v = if i == j { 0.0 } else { matrix.get(i, j) };
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses a taxon weight table: one `label value` pair per line, `#` starting
/// a comment, blank lines ignored.
pub fn read_taxon_weights(text: &str) -> Result<Vec<(String, f64)>, ParseError> {
    let mut weights = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let label = fields.next().unwrap().to_string();
        let value = fields
            .next()
            .ok_or_else(|| matrix_err(line_no, format!("missing weight for {label:?}")))?;
        let value: f64 = value.parse().map_err(|_| {
            matrix_err(line_no, format!("expected a number, found {value:?}"))
        })?;
        if let Some(extra) = fields.next() {
            return Err(matrix_err(
                line_no,
                format!("unexpected trailing field {extra:?}"),
            ));
        }
        if weights.iter().any(|(l, _)| l == &label) {
            return Err(matrix_err(
                line_no,
                format!("duplicate taxon label {label:?}"),
            ));
        }
        weights.push((label, value));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_matrix_round_trips() {
        let text = "4\n\
                    a 0 1 2 3\n\
                    b 1 0 4 5\n\
                    c 2 4 0 6\n\
                    d 3 5 6 0\n";
        let m = read_phylip(text).unwrap();
        assert_eq!(m.labels, ["a", "b", "c", "d"]);
        assert_eq!(m.matrix.get(0, 3), 3.0);
        assert_eq!(m.matrix.get(2, 3), 6.0);

        let rendered = write_phylip(&m.labels, &m.matrix);
        let again = read_phylip(&rendered).unwrap();
        assert_eq!(again.labels, m.labels);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_eq!(again.matrix.get(i, j), m.matrix.get(i, j));
            }
        }
    }

    #[test]
    fn wrapped_rows_are_continued() {
        let text = "3\nalpha 0 1.5\n2.0\nbeta 1.5 0 2.5\ngamma 2.0 2.5 0\n";
        let m = read_phylip(text).unwrap();
        assert_eq!(m.matrix.get(0, 2), 2.0);
        assert_eq!(m.matrix.get(1, 2), 2.5);
    }

    #[test]
    fn diagonal_is_ignored() {
        let text = "2\nx 7.5 1\ny 1 -3\n";
        let m = read_phylip(text).unwrap();
        assert_eq!(m.matrix.get(0, 1), 1.0);
    }

    #[test]
    fn asymmetry_is_rejected_with_line() {
        let text = "3\na 0 1 2\nb 1 0 4\nc 2 4.1 0\n";
        match read_phylip(text) {
            Err(ParseError::Matrix { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("not symmetric"), "{message}");
            }
            other => panic!("expected a symmetry error, got {other:?}"),
        }
    }

    #[test]
    fn tiny_asymmetry_is_averaged() {
        let v = 1.0 + 4e-13;
        let text = format!("2\na 0 {v}\nb 1.0 0\n");
        let m = read_phylip(&text).unwrap();
        let got = m.matrix.get(0, 1);
        assert!((got - (0.5 + 0.5 * v)).abs() < 1e-15);
    }

    #[test]
    fn header_and_shape_errors_carry_lines() {
        assert!(matches!(
            read_phylip("zebra\n"),
            Err(ParseError::Matrix { line: 1, .. })
        ));
        assert!(matches!(
            read_phylip("1\na 0\n"),
            Err(ParseError::Matrix { line: 1, .. })
        ));
        // Too few rows.
        assert!(matches!(
            read_phylip("3\na 0 1 2\nb 1 0 3\n"),
            Err(ParseError::Matrix { .. })
        ));
        // Extra row.
        assert!(matches!(
            read_phylip("2\na 0 1\nb 1 0\nc 9 9\n"),
            Err(ParseError::Matrix { line: 4, .. })
        ));
        // Overfull row.
        assert!(matches!(
            read_phylip("2\na 0 1 7\nb 1 0\n"),
            Err(ParseError::Matrix { line: 2, .. })
        ));
        // Bad number.
        assert!(matches!(
            read_phylip("2\na 0 one\nb 1 0\n"),
            Err(ParseError::Matrix { line: 2, .. })
        ));
        // Duplicate label.
        assert!(matches!(
            read_phylip("2\na 0 1\na 1 0\n"),
            Err(ParseError::Matrix { line: 3, .. })
        ));
        // Numeric label suggests a missing label column.
        assert!(matches!(
            read_phylip("2\n0 0 1\nb 1 0\n"),
            Err(ParseError::Matrix { line: 2, .. })
        ));
    }

    #[test]
    fn weights_parse_with_comments() {
        let text = "# leaf weights\nhuman 1.0\nmouse 2.5 # rodent\n\nrat 0.5\n";
        let w = read_taxon_weights(text).unwrap();
        assert_eq!(
            w,
            vec![
                ("human".to_string(), 1.0),
                ("mouse".to_string(), 2.5),
                ("rat".to_string(), 0.5)
            ]
        );
    }

    #[test]
    fn weight_table_errors() {
        assert!(matches!(
            read_taxon_weights("human\n"),
            Err(ParseError::Matrix { line: 1, .. })
        ));
        assert!(matches!(
            read_taxon_weights("human abc\n"),
            Err(ParseError::Matrix { line: 1, .. })
        ));
        assert!(matches!(
            read_taxon_weights("a 1\nb 2 extra\n"),
            Err(ParseError::Matrix { line: 2, .. })
        ));
        assert!(matches!(
            read_taxon_weights("a 1\na 2\n"),
            Err(ParseError::Matrix { line: 2, .. })
        ));
    }
}
