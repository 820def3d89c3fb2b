//! Text rendering of a factor matrix with its summary panels:
//!
//! ```text
//!  g'V1 | |V1| ... |VN| | ||V||_F
//!  -----+---------------+--------
//!   g_1 | V11  ...  V1N | |row 1|
//!   ... |               |
//!  -----+---------------+--------
//!       |   .  M2 ... MN | M
//! ```

use std::fmt::Write;

use basketquad_core::math::dot;
use basketquad_core::FactorMatrix;

/// Renders `v` at `decimals` places. `sizes` are the node counts for factors
/// `2..`; missing entries print as 1. `max_columns` limits the factor
/// columns shown (the norms still cover the whole matrix).
pub fn render(v: &FactorMatrix, g: &[f64], sizes: &[usize], decimals: usize, max_columns: Option<usize>) -> String {
    let n = v.assets();
    let shown = max_columns.unwrap_or(v.factors()).clamp(1, v.factors());
    let f = |x: f64| format!("{x:.decimals$}");

    let corner = f(dot(g, &v.first_column()));
    let col_norms = v.column_norms();
    let row_norms = v.row_norms();
    let header: Vec<String> = col_norms[..shown].iter().map(|x| f(*x)).collect();
    let body: Vec<Vec<String>> = (0..n).map(|k| v.matrix().row(k)[..shown].iter().map(|x| f(*x)).collect()).collect();
    let mut footer = vec!["\u{b7}".to_string()];
    footer.extend((1..shown).map(|j| sizes.get(j - 1).copied().unwrap_or(1).to_string()));
    let total: u128 = sizes.iter().map(|&m| m as u128).product();

    let left: Vec<String> = g.iter().map(|x| f(*x)).collect();
    let lw = left.iter().chain([&corner]).map(|s| s.chars().count()).max().unwrap_or(0);
    let cw = header
        .iter()
        .chain(body.iter().flatten())
        .chain(footer.iter())
        .map(|s| s.chars().count())
        .max()
        .unwrap_or(0);
    let right: Vec<String> = row_norms.iter().map(|x| f(*x)).collect();
    let frob = f(v.frobenius_norm());

    let cells = |row: &[String]| row.iter().map(|s| format!("{s:>cw$}")).collect::<Vec<_>>().join(" ");
    let rule = format!("{}-+-{}-+-{}", "-".repeat(lw), "-".repeat(shown * (cw + 1) - 1), "-".repeat(frob.len().max(8)));

    let mut out = String::new();
    let _ = writeln!(out, "{corner:>lw$} | {} | {frob}", cells(&header));
    let _ = writeln!(out, "{rule}");
    for k in 0..n {
        let _ = writeln!(out, "{:>lw$} | {} | {}", left[k], cells(&body[k]), right[k]);
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{:>lw$} | {} | {total}", "", cells(&footer));
    out
}
