//! Image and point-cloud I/O plus continuous pattern sampling.
//!
//! All raster coordinates are physical millimetres on a centred grid:
//! pixel `(i, j)` of a `w x h` image with pitch `p` has its centre at
//! `((i + 0.5 - w/2) * p, (j + 0.5 - h/2) * p)`, `u` along columns and
//! `v` along rows. Samples outside the image rectangle are defined to be
//! black, so geometry that misses a pattern contributes nothing.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;

use image::{DynamicImage, ImageReader, Rgb};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A full-colour pattern with channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PatternImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `pixels[j * width + i]`.
    pub pixels: Vec<[f64; 3]>,
    /// Physical size of one pixel in mm.
    pub pixel_pitch: f64,
}

/// Unnormalized non-negative accumulation buffer (projection sums).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
    pub pixel_pitch: f64,
}

impl PatternImage {
    pub fn constant(width: usize, height: usize, pixel_pitch: f64, value: [f64; 3]) -> Self {
        PatternImage {
            width,
            height,
            pixels: vec![value; width * height],
            pixel_pitch,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 3] {
        self.pixels[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: [f64; 3]) {
        self.pixels[j * self.width + i] = value;
    }

    /// Physical centre of pixel `(i, j)` on the centred grid.
    pub fn pixel_centre(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5 - self.width as f64 / 2.0) * self.pixel_pitch,
            (j as f64 + 0.5 - self.height as f64 / 2.0) * self.pixel_pitch,
        )
    }

    /// Bilinear sample at physical coordinates `(u, v)` mm.
    ///
    /// Inside the image rectangle the four surrounding pixel centres are
    /// blended (edges extend over the outer half-pixel margin); anywhere
    /// outside the rectangle the sample is black.
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        bilinear_grid(
            self.width,
            self.height,
            self.pixel_pitch,
            self.pixel_pitch,
            u,
            v,
            |i, j| self.pixels[j * self.width + i],
        )
    }
}

impl FloatImage {
    pub fn zeros(width: usize, height: usize, pixel_pitch: f64) -> Self {
        FloatImage {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
            pixel_pitch,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 3] {
        self.pixels[j * self.width + i]
    }

    pub fn max_value(&self) -> f64 {
        self.pixels
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Shared bilinear kernel over any row-major RGB grid with a centred
/// physical origin. Out-of-rectangle samples return black; neighbour
/// indices clamp at the borders so the interior is continuous.
pub(crate) fn bilinear_grid<F>(
    w: usize,
    h: usize,
    pitch_x: f64,
    pitch_y: f64,
    u: f64,
    v: f64,
    get: F,
) -> [f64; 3]
where
    F: Fn(usize, usize) -> [f64; 3],
{
    let half_w = 0.5 * w as f64 * pitch_x;
    let half_h = 0.5 * h as f64 * pitch_y;
    // negated comparison so NaN coordinates also fall out as black
    if !(u.abs() <= half_w && v.abs() <= half_h) {
        return [0.0; 3];
    }
    let x = u / pitch_x + 0.5 * w as f64 - 0.5;
    let y = v / pitch_y + 0.5 * h as f64 - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let clamp = |c: f64, n: usize| -> usize {
        if c <= 0.0 {
            0
        } else if c >= (n - 1) as f64 {
            n - 1
        } else {
            c as usize
        }
    };
    let i0 = clamp(x0, w);
    let i1 = clamp(x0 + 1.0, w);
    let j0 = clamp(y0, h);
    let j1 = clamp(y0 + 1.0, h);
    let p00 = get(i0, j0);
    let p10 = get(i1, j0);
    let p01 = get(i0, j1);
    let p11 = get(i1, j1);
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    [
        p00[0] * w00 + p10[0] * w10 + p01[0] * w01 + p11[0] * w11,
        p00[1] * w00 + p10[1] * w10 + p01[1] * w01 + p11[1] * w11,
        p00[2] * w00 + p10[2] * w10 + p01[2] * w01 + p11[2] * w11,
    ]
}

// ---------------------------------------------------------------------------
// PNG I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

pub(crate) fn quantize8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn quantize16(c: f64) -> u16 {
    (c.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Loads an 8-bit RGB(A) PNG as a pattern with the given pixel pitch.
///
/// Channels map linearly `c / 255`; an alpha channel is premultiplied
/// into the colour and then discarded.
pub fn load_pattern(path: impl AsRef<Path>, pixel_pitch_mm: f64) -> Result<PatternImage> {
    let path = path.as_ref();
    if !(pixel_pitch_mm.is_finite() && pixel_pitch_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pixel pitch must be > 0, got {pixel_pitch_mm}"
        )));
    }
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| io_error(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::NotAnImage {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (width, height, pixels) = match decoded {
        DynamicImage::ImageRgb8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img
                .pixels()
                .map(|p| [p.0[0] as f64 / 255.0, p.0[1] as f64 / 255.0, p.0[2] as f64 / 255.0])
                .collect();
            (w, h, px)
        }
        DynamicImage::ImageRgba8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img
                .pixels()
                .map(|p| {
                    let a = p.0[3] as f64 / 255.0;
                    [
                        p.0[0] as f64 / 255.0 * a,
                        p.0[1] as f64 / 255.0 * a,
                        p.0[2] as f64 / 255.0 * a,
                    ]
                })
                .collect();
            (w, h, px)
        }
        other => {
            return Err(Error::UnsupportedPixelFormat {
                path: path.to_path_buf(),
                found: format!("{:?}", other.color()),
            })
        }
    };
    Ok(PatternImage {
        width,
        height,
        pixels,
        pixel_pitch: pixel_pitch_mm,
    })
}

/// Writes channels in [0, 1] as an RGB PNG, quantizing round-half-up.
pub fn save_image(img: &PatternImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let w = img.width as u32;
    let h = img.height as u32;
    let res = match depth {
        BitDepth::Eight => {
            let buf = image::ImageBuffer::from_fn(w, h, |x, y| {
                let p = img.get(x as usize, y as usize);
                Rgb([quantize8(p[0]), quantize8(p[1]), quantize8(p[2])])
            });
            buf.save(path)
        }
        BitDepth::Sixteen => {
            let buf: image::ImageBuffer<Rgb<u16>, Vec<u16>> =
                image::ImageBuffer::from_fn(w, h, |x, y| {
                    let p = img.get(x as usize, y as usize);
                    Rgb([quantize16(p[0]), quantize16(p[1]), quantize16(p[2])])
                });
            buf.save(path)
        }
    };
    res.map_err(|e| match e {
        image::ImageError::IoError(io) => io_error(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    })
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::FileNotFound(path.to_path_buf())
    } else {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
    }
}

/// File name for layer index `k`: `layer_000.png`, `layer_001.png`, ...
/// with the index increasing along +z.
pub fn layer_file_name(k: usize) -> String {
    let mut s = String::new();
    let _ = write!(s, "layer_{k:03}.png");
    s
}

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

/// A coloured point: position in mm, colour channels in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub pos: Vec3,
    pub rgb: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses the ASCII point format: one `x y z r g b` record per line with
/// `x y z` decimal mm and `r g b` integers 0-255. Lines beginning with `#`
/// are comments; blank lines are ignored; LF and CRLF both work. The first
/// malformed token is reported with its 1-based line and column.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_point_cloud(&text).map_err(|(line, column, message)| Error::PointCloudParse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    })
}

fn parse_point_cloud(text: &str) -> std::result::Result<PointCloud, (usize, usize, String)> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = tokens_with_columns(line);
        if tokens.len() != 6 {
            let col = tokens
                .get(6)
                .map(|t| t.0)
                .unwrap_or_else(|| line.len() + 1);
            return Err((
                lineno,
                col,
                format!("expected 6 fields (x y z r g b), found {}", tokens.len()),
            ));
        }
        let mut xyz = [0.0f64; 3];
        for (slot, &(col, tok)) in xyz.iter_mut().zip(&tokens[..3]) {
            let v: f64 = tok
                .parse()
                .map_err(|_| (lineno, col, format!("not a decimal coordinate: {tok:?}")))?;
            if !v.is_finite() {
                return Err((lineno, col, format!("non-finite coordinate: {tok:?}")));
            }
            *slot = v;
        }
        let mut rgb = [0.0f64; 3];
        for (slot, &(col, tok)) in rgb.iter_mut().zip(&tokens[3..]) {
            let v: i64 = tok
                .parse()
                .map_err(|_| (lineno, col, format!("not an integer colour component: {tok:?}")))?;
            if !(0..=255).contains(&v) {
                return Err((lineno, col, format!("colour component {v} out of range 0-255")));
            }
            *slot = v as f64 / 255.0;
        }
        points.push(CloudPoint {
            pos: Vec3::new(xyz[0], xyz[1], xyz[2]),
            rgb,
        });
    }
    Ok(PointCloud { points })
}

fn tokens_with_columns(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}
