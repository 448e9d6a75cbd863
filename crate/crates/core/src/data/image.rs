use std::path::Path;

use crate::mesh::Mesh;
use crate::{Error, Result};

use super::TexturedSample;

/// RGB image with channels in `[0, 1]`, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}×{height} image with {} pixels",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Bilinear lookup at texture coordinates; `v = 0` is the bottom row.
    /// Coordinates are expected in `[0, 1]`.
    pub fn sample_uv(&self, u: f64, v: f64) -> [f64; 3] {
        let x = u * (self.width - 1) as f64;
        let y = (1.0 - v) * (self.height - 1) as f64;
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let (a, b, c, d) = (self.pixel(x0, y0), self.pixel(x1, y0), self.pixel(x0, y1), self.pixel(x1, y1));
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] + (b[k] - a[k]) * fx;
            let bottom = c[k] + (d[k] - c[k]) * fx;
            out[k] = top + (bottom - top) * fy;
        }
        out
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = ::image::open(path)
        .map_err(|e| match e {
            ::image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    RgbImage::new(w as usize, h as usize, data)
}

/// Reads one `u v` pair per line; blank lines and `#` comments are skipped.
pub fn read_uv_file(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut uv = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad texture coordinate: {e}"),
            })?;
        if parsed.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected `u v`, found {} values", parsed.len()),
            });
        }
        uv.push([parsed[0], parsed[1]]);
    }
    Ok(uv)
}

/// Samples the image at every vertex's texture coordinate. Coordinates
/// outside `[0, 1]²` are clamped with a warning.
pub fn bake_image_to_vertices(
    image: &RgbImage,
    uv: &[[f64; 2]],
    mesh: &Mesh,
    mesh_id: [u8; 32],
    source_id: impl Into<String>,
) -> Result<TexturedSample> {
    if uv.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "{} texture coordinates for {} vertices; every vertex needs a uv",
            uv.len(),
            mesh.n_vertices()
        )));
    }
    let mut clamped = 0usize;
    let mut colors = ndarray::Array2::zeros((uv.len(), 3));
    for (i, &[u, v]) in uv.iter().enumerate() {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Vertex {
                vertex: i,
                reason: "non-finite texture coordinate".into(),
            });
        }
        let (cu, cv) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if cu != u || cv != v {
            clamped += 1;
        }
        let c = image.sample_uv(cu, cv);
        for k in 0..3 {
            colors[[i, k]] = c[k].clamp(0.0, 1.0);
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} texture coordinates outside [0,1] were clamped");
    }
    TexturedSample::new(mesh_id, colors, source_id.into())
}
