//! File formats: matrix CSV with holes, mask CSV, grayscale PGM, spectrum
//! CSV, and the seeded square-block corruption used for inpainting runs.
//!
//! Matrix CSV is comma-separated with one row per LF-terminated line. An
//! empty field or a `NaN` token (any case) marks an unobserved entry, which
//! is stored as `0`. Values are written in Rust's shortest round-trip
//! decimal form, so write/read is bit-exact for finite values.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{singular_values, DenseMatrix, ObservationSet};

/// A matrix together with the entries that were actually present in the file.
#[derive(Debug, Clone)]
pub struct MaskedMatrixFile {
    pub matrix: DenseMatrix,
    pub omega: ObservationSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Pgm,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Lines of a text file, dropping the empty remainder after a final newline
/// and any trailing `\r`.
fn lines(text: &str) -> Vec<&str> {
    let mut out: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    if out.last() == Some(&"") {
        out.pop();
    }
    out
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<MaskedMatrixFile> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let rows = lines(&text);
    if rows.is_empty() {
        return Err(format_err(path, "no rows"));
    }
    let cols = rows[0].split(',').count();
    let mut values = Vec::with_capacity(rows.len() * cols);
    let mut flags = Vec::with_capacity(rows.len() * cols);
    for (line_no, line) in rows.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(
                path,
                line_no + 1,
                fields.len().min(cols) + 1,
                format!("ragged row: expected {cols} fields, found {}", fields.len()),
            ));
        }
        for (col, field) in fields.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                values.push(0.0);
                flags.push(false);
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line_no + 1, col + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no + 1, col + 1, format!("non-finite value {field:?}")));
            }
            values.push(v);
            flags.push(true);
        }
    }
    let n_rows = rows.len();
    Ok(MaskedMatrixFile {
        matrix: DenseMatrix::new(n_rows, cols, values)?,
        omega: ObservationSet::from_flags(n_rows, cols, flags)?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_text(path.as_ref(), &matrix_csv(m, None))
}

/// Writes `m` with unobserved entries left as empty fields.
pub fn write_masked_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix, omega: &ObservationSet) -> Result<()> {
    omega.ensure_matches(m)?;
    write_text(path.as_ref(), &matrix_csv(m, Some(omega)))
}

fn matrix_csv(m: &DenseMatrix, omega: Option<&ObservationSet>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            if omega.map_or(true, |o| o.contains(i, j)) {
                out.push_str(&m.get(i, j).to_string());
            }
        }
        out.push('\n');
    }
    out
}

/// Reads `i,j` pairs (0-based), one per line. Blank lines are ignored.
pub fn read_mask_csv(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<ObservationSet> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut flags = vec![false; rows * cols];
    for (line_no, line) in lines(&text).into_iter().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = line_no + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(path, line_no, 1, format!("expected \"i,j\", found {line:?}")));
        }
        let mut idx = [0usize; 2];
        for (c, field) in fields.iter().enumerate() {
            idx[c] = field
                .parse()
                .map_err(|_| parse_err(path, line_no, c + 1, format!("not an index: {field:?}")))?;
        }
        let [i, j] = idx;
        if i >= rows || j >= cols {
            return Err(parse_err(
                path,
                line_no,
                1,
                format!("index ({i}, {j}) out of range for {rows}x{cols}"),
            ));
        }
        if std::mem::replace(&mut flags[i * cols + j], true) {
            return Err(parse_err(path, line_no, 1, format!("duplicate index ({i}, {j})")));
        }
    }
    ObservationSet::from_flags(rows, cols, flags)
}

pub fn write_mask_csv(path: impl AsRef<Path>, omega: &ObservationSet) -> Result<()> {
    let mut out = String::new();
    for (i, j) in omega.iter() {
        out.push_str(&format!("{i},{j}\n"));
    }
    write_text(path.as_ref(), &out)
}

/// Reads a P2 or P5 grayscale image with maxval at most 255.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut pos = 0;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| format_err(path, "empty file"))?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(format_err(
                path,
                format!("unsupported magic number {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(&bytes, &mut pos).ok_or_else(|| format_err(path, format!("missing {name}")))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, format!("invalid {name}")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(format_err(path, "image has no pixels"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format_err(path, format!("unsupported depth: maxval {maxval}")));
    }
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = pos + 1;
        let raster = bytes
            .get(start..start + count)
            .ok_or_else(|| format_err(path, "truncated pixel data"))?;
        data.extend(raster.iter().map(|&b| b as f64));
    } else {
        for _ in 0..count {
            let tok = next_token(&bytes, &mut pos).ok_or_else(|| format_err(path, "truncated pixel data"))?;
            let v: usize = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format_err(path, "invalid pixel value"))?;
            if v > maxval {
                return Err(format_err(path, format!("pixel value {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    }
    if data.iter().any(|&v| v > maxval as f64) {
        return Err(format_err(path, "pixel value exceeds maxval"));
    }
    DenseMatrix::new(height, width, data)
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    (*pos > start).then(|| &bytes[start..*pos])
}

/// Writes a binary (P5) image with maxval 255. Entries are rounded; with
/// `clamp` they are clamped to `[0, 255]`, otherwise out-of-range entries
/// are an error.
pub fn write_pgm(path: impl AsRef<Path>, m: &DenseMatrix, clamp: bool) -> Result<()> {
    let path = path.as_ref();
    let mut raster = Vec::with_capacity(m.rows() * m.cols());
    for (p, &v) in m.as_slice().iter().enumerate() {
        let r = v.round();
        if !clamp && !(0.0..=255.0).contains(&r) {
            return Err(Error::invalid(format!(
                "pixel ({}, {}) = {v} is outside [0, 255]",
                p / m.cols(),
                p % m.cols()
            )));
        }
        raster.push(r.clamp(0.0, 255.0) as u8);
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    write!(file, "P5\n{} {}\n255\n", m.cols(), m.rows()).map_err(io_err(path))?;
    file.write_all(&raster).map_err(io_err(path))
}

/// Detects PGM by its magic number; everything else is treated as CSV.
pub fn detect_format(path: impl AsRef<Path>) -> Result<MatrixFormat> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(match bytes.get(..2) {
        Some(b"P2") | Some(b"P5") => MatrixFormat::Pgm,
        _ => MatrixFormat::Csv,
    })
}

/// Reads a CSV or PGM input; PGM images are fully observed.
pub fn read_input(path: impl AsRef<Path>, format: Option<MatrixFormat>) -> Result<MaskedMatrixFile> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => detect_format(path)?,
    };
    match format {
        MatrixFormat::Csv => read_matrix_csv(path),
        MatrixFormat::Pgm => {
            let matrix = read_pgm(path)?;
            let omega = ObservationSet::full(matrix.rows(), matrix.cols());
            Ok(MaskedMatrixFile { matrix, omega })
        }
    }
}

/// Removes `square x square` blocks at uniformly random top-left corners
/// until at least `fraction` of the entries are missing, and returns the
/// entries that remain observed.
///
/// Blocks may overlap. The generator is ChaCha8 seeded from `seed`, so the
/// pattern depends only on the arguments.
pub fn corrupt_squares(rows: usize, cols: usize, square: usize, fraction: f64, seed: u64) -> Result<ObservationSet> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    if square == 0 || square > rows || square > cols {
        return Err(Error::invalid(format!(
            "square side {square} must lie in 1..={}",
            rows.min(cols)
        )));
    }
    let total = rows * cols;
    let target = (fraction * total as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![true; total];
    let mut removed = 0usize;
    while removed < target {
        let top = rng.random_range(0..=rows - square);
        let left = rng.random_range(0..=cols - square);
        for i in top..top + square {
            for j in left..left + square {
                if std::mem::replace(&mut observed[i * cols + j], false) {
                    removed += 1;
                }
            }
        }
    }
    ObservationSet::from_flags(rows, cols, observed)
}

/// One `index,value` line per singular value, largest first.
pub fn write_spectrum_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for (i, s) in singular_values(m)?.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    write_text(path.as_ref(), &out)
}
