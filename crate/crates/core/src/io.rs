//! MatrixMarket coordinate files and CSV exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, TripletBuilder};

pub const MM_GENERAL: &str = "%%MatrixMarket matrix coordinate real general";
pub const MM_SYMMETRIC: &str = "%%MatrixMarket matrix coordinate real symmetric";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixSymmetry {
    General,
    Symmetric,
}

/// Renders `a` in MatrixMarket coordinate format. Values are written with 17
/// significant digits, so a round trip is lossless in `f64`. The symmetric
/// form stores the lower triangle and requires exact symmetry.
pub fn matrix_market_string<T: Real>(a: &CsrMatrix<T>, symmetry: MatrixSymmetry) -> Result<String> {
    let entries: Vec<(usize, usize, T)> = match symmetry {
        MatrixSymmetry::General => a.triplets().collect(),
        MatrixSymmetry::Symmetric => {
            if a.rows() != a.cols() || a.symmetry_defect() != T::zero() {
                return Err(Error::InvalidArgument(
                    "symmetric MatrixMarket output needs an exactly symmetric matrix".into(),
                ));
            }
            a.triplets().filter(|&(i, j, _)| i >= j).collect()
        }
    };
    let header = match symmetry {
        MatrixSymmetry::General => MM_GENERAL,
        MatrixSymmetry::Symmetric => MM_SYMMETRIC,
    };
    let mut out = String::with_capacity(32 * (entries.len() + 2));
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{} {} {}", a.rows(), a.cols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v.as_f64());
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("MatrixMarket line {line}: {msg}"))
}

/// Parses a real coordinate MatrixMarket matrix (general or symmetric).
pub fn parse_matrix_market<T: Real>(text: &str) -> Result<CsrMatrix<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
    {
        return Err(parse_err(1, format!("unsupported header `{header}`")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('%'));
    let (lno, size) = data
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| parse_err(lno + 1, e)))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(lno + 1, "size line needs three integers"));
    };
    let mut b = TripletBuilder::with_capacity(rows, cols, if symmetric { 2 * nnz } else { nnz });
    let mut count = 0;
    for (lno, line) in data {
        let mut it = line.split_whitespace();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| parse_err(lno + 1, format!("missing {what}")))
        };
        let i: usize = next("row")?.parse().map_err(|e| parse_err(lno + 1, e))?;
        let j: usize = next("column")?.parse().map_err(|e| parse_err(lno + 1, e))?;
        let v: f64 = next("value")?.parse().map_err(|e| parse_err(lno + 1, e))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(
                lno + 1,
                format!("index ({i}, {j}) outside {rows}x{cols}"),
            ));
        }
        let v = T::lit(v);
        b.push(i - 1, j - 1, v);
        if symmetric && i != j {
            b.push(j - 1, i - 1, v);
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::Parse(format!(
            "MatrixMarket: expected {nnz} entries, found {count}"
        )));
    }
    Ok(b.build())
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

pub fn write_matrix_market<T: Real>(
    path: &Path,
    a: &CsrMatrix<T>,
    symmetry: MatrixSymmetry,
) -> Result<()> {
    write_text(path, &matrix_market_string(a, symmetry)?)
}

pub fn read_matrix_market<T: Real>(path: &Path) -> Result<CsrMatrix<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text)
}

/// Nodal values as CSV with header `x,y,value`, in node order.
pub fn state_csv<T: Real>(mesh: &TriMesh<T>, values: &[T]) -> String {
    let mut out = String::from("x,y,value\n");
    for (p, v) in mesh.coords().iter().zip(values) {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            p[0].as_f64(),
            p[1].as_f64(),
            v.as_f64()
        );
    }
    out
}

/// Boundary values as CSV with header `s,value`, `s` the counterclockwise
/// arc length from the origin.
pub fn control_csv<T: Real>(mesh: &TriMesh<T>, values: &[T]) -> String {
    let mut out = String::from("s,value\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e}",
            mesh.boundary_arc_length(k).as_f64(),
            v.as_f64()
        );
    }
    out
}
