use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Reads a headerless, comma-separated numeric matrix.
pub fn load_csv_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(rows.len() as u64 + 1, |p| p.line());
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("not a finite number: '{cell}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("{} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "empty file".into()));
    }
    DenseMatrix::from_rows(&rows)
}

/// Writes `m` with 17 significant digits, which round-trips every `f64`.
pub fn save_csv_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(m.rows() * m.cols() * 25);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", m.get(i, j)));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a vector stored as a single column or a single row.
pub fn load_csv_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let m = load_csv_matrix(path)?;
    match (m.rows(), m.cols()) {
        (_, 1) => Ok(m.col(0).to_vec()),
        (1, _) => Ok(m.row(0)),
        (r, c) => Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected a vector, found a {r}x{c} matrix"),
        }),
    }
}

/// Writes `v` as a single column.
pub fn save_csv_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    save_csv_matrix(&DenseMatrix::from_col_major(v.len(), 1, v.to_vec())?, path)
}

/// Grayscale pixels in row-major order, scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Reads a PGM image, ASCII (`P2`) or binary (`P5`).
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };

    let mut pos = 0;
    // Header tokens, skipping whitespace and `#` comments.
    let next_token =|pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos).ok_or_else(|| fail("empty file".into()))?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => return Err(fail(format!("unsupported magic '{other}'"))),
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(&mut pos).ok_or_else(|| fail(format!("missing {name}")))?;
        *slot = tok
            .parse()
            .map_err(|_| fail(format!("bad {name} '{tok}'")))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 || (binary && maxval > 255) {
        return Err(fail(format!("unsupported maxval {maxval}")));
    }
    let count = width * height;
    let scale = 1.0 / maxval as f64;

    let raw: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the payload.
        let start = pos + 1;
        let payload = bytes.get(start..start + count).ok_or_else(|| {
            fail(format!(
                "truncated payload: {} of {count} bytes",
                bytes.len().saturating_sub(start)
            ))
        })?;
        payload.iter().map(|&b| b as usize).collect()
    } else {
        let mut v = Vec::with_capacity(count);
        for i in 0..count {
            let tok = next_token(&mut pos)
                .ok_or_else(|| fail(format!("truncated payload: {i} of {count} values")))?;
            v.push(tok.parse().map_err(|_| fail(format!("bad pixel '{tok}'")))?);
        }
        v
    };
    if let Some(&p) = raw.iter().find(|&&p| p > maxval) {
        return Err(fail(format!("pixel {p} exceeds maxval {maxval}")));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: raw.into_iter().map(|p| p as f64 * scale).collect(),
    })
}
