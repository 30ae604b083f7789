//! Tab-separated reports with a `#`-prefixed header line.

use std::fmt::Write;

/// Renders a header and rows. Cells must not contain tabs or newlines.
pub fn render<R, C>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = C>,
    C: IntoIterator,
    C::Item: std::fmt::Display,
{
    let mut out = String::new();
    out.push('#');
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for cell in row {
            if !first {
                out.push('\t');
            }
            first = false;
            write!(out, "{}", cell).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Splits a TSV document into rows, skipping `#` lines and blank lines.
pub fn parse(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect()
}
