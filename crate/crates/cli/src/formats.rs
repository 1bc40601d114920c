//! File formats: PGM (P2/P5) images and CSV grids.
//!
//! CSV grids are the lossless interchange format (rows are y, columns are x,
//! numeric cells); PGM carries masks ({0,255}) and quantized previews.

use std::fs;
use std::io::Write;
use std::path::Path;

use jumpscan_core::dataset::{Dataset, Grid, GroundTruth};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        /// 1-based line for text formats; byte offset for binary payloads.
        line: usize,
        msg: String,
    },
    #[error("{path}: empty image")]
    Empty { path: String },
}

type Result<T> = std::result::Result<T, FormatError>;

/// A rectangular grid of values, row-major with `index = y * width + x`
/// (matching the core grid linearization).
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn grid(&self) -> Grid {
        Grid::new_2d(self.width, self.height).expect("positive dims")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    CsvGrid,
}

impl ImageFormat {
    /// Guess from the file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> ImageFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => ImageFormat::Pgm,
            _ => ImageFormat::CsvGrid,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Read a PGM image (plain P2 or binary P5, maxval up to 65535).
pub fn read_pgm(path: &Path) -> Result<GridValues> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut pos = 0usize;

    // Header tokens with '#' comments; tracks byte offset for errors.
    let next_token = |bytes: &[u8], pos: &mut usize| -> Result<String> {
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
        if start == *pos {
            return Err(parse_err(path, start, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&bytes, &mut pos)?;
    if magic != "P2" && magic != "P5" {
        return Err(parse_err(path, 0, format!("unsupported magic {magic:?}")));
    }
    let width: usize = next_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| parse_err(path, pos, "bad width"))?;
    let height: usize = next_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| parse_err(path, pos, "bad height"))?;
    let maxval: u32 = next_token(&bytes, &mut pos)?
        .parse()
        .map_err(|_| parse_err(path, pos, "bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(
            path,
            pos,
            format!("maxval {maxval} out of range"),
        ));
    }
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    if magic == "P2" {
        for _ in 0..n {
            let tok = next_token(&bytes, &mut pos)?;
            let v: u32 = tok
                .parse()
                .map_err(|_| parse_err(path, pos, format!("bad pixel {tok:?}")))?;
            values.push(v as f64);
        }
    } else {
        // Single whitespace byte separates the header from binary data.
        pos += 1;
        let two_bytes = maxval > 255;
        let need = n * if two_bytes { 2 } else { 1 };
        if bytes.len() < pos + need {
            return Err(parse_err(
                path,
                bytes.len(),
                format!("truncated pixel data: need {need} bytes from offset {pos}"),
            ));
        }
        for i in 0..n {
            let v = if two_bytes {
                u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]) as f64
            } else {
                bytes[pos + i] as f64
            };
            values.push(v);
        }
    }
    Ok(GridValues {
        width,
        height,
        values,
    })
}

/// Write a binary P5 PGM, mapping `[0, 1]` to `0..=255` (clamped).
pub fn write_pgm_unit(path: &Path, img: &GridValues) -> Result<()> {
    let mut out = Vec::with_capacity(img.values.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height).expect("vec write");
    for v in &img.values {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Write a binary mask as P5 with values {0, 255}.
pub fn write_pgm_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let mut out = Vec::with_capacity(mask.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("vec write");
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a {0,255}-style mask: any value above half the observed maximum is
/// treated as set.
pub fn read_mask_pgm(path: &Path) -> Result<Vec<bool>> {
    let img = read_pgm(path)?;
    Ok(img.values.iter().map(|&v| v >= 128.0).collect())
}

/// Read a CSV grid: one row of comma-separated numbers per line (rows = y).
pub fn read_csv_grid(path: &Path) -> Result<GridValues> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut width = 0usize;
    let mut values = Vec::new();
    let mut height = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    parse_err(
                        path,
                        lineno + 1,
                        format!("column {}: not a number: {:?}", col + 1, cell.trim()),
                    )
                })
            })
            .collect::<Result<_>>()?;
        if height == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("row has {} cells, expected {width}", row.len()),
            ));
        }
        values.extend(row);
        height += 1;
    }
    if height == 0 || width == 0 {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(GridValues {
        width,
        height,
        values,
    })
}

/// Write a CSV grid (lossless via the shortest f64 representation).
pub fn write_csv_grid(path: &Path, img: &GridValues) -> Result<()> {
    let mut out = String::new();
    for y in 0..img.height {
        for x in 0..img.width {
            if x > 0 {
                out.push(',');
            }
            out.push_str(&img.values[y * img.width + x].to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Load an image as a fully observed dataset plus grid-backed ground truth.
/// Intensities are rescaled so the maximum is exactly 1 (skipped when the
/// maximum is 0); the jump mask starts empty and can be attached afterwards.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<(Dataset, GroundTruth)> {
    let img = match format {
        ImageFormat::Pgm => read_pgm(path)?,
        ImageFormat::CsvGrid => read_csv_grid(path)?,
    };
    let max = img.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = if max > 0.0 {
        img.values.iter().map(|v| v / max).collect()
    } else {
        img.values.clone()
    };
    let grid = img.grid();
    let mut data = Dataset::new(grid.bounds());
    for (idx, &v) in values.iter().enumerate() {
        data.insert(grid.coords(idx), v)
            .expect("grid cells are unique");
    }
    let truth =
        GroundTruth::from_grid_values(grid, values, Vec::new(), 0.0).expect("consistent grid");
    Ok((data, truth))
}
