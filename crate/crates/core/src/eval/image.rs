//! Binary PPM images and CP compression of an `H × W × 3` image tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::als::{als, AlsConfig};
use crate::error::{ensure, Error, Result};
use crate::report::DecompositionReport;
use crate::tensor::{kruskal_to_tensor, DenseTensor, KruskalForm};

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        ensure!(pixels.len() == height * width * 3, Dimension, "{} bytes for a {}x{} RGB image", pixels.len(), height, width);
        Ok(Self { height, width, pixels })
    }

    pub fn to_tensor(&self) -> DenseTensor {
        let data = self.pixels.iter().map(|&b| b as f64).collect();
        DenseTensor::new(vec![self.height, self.width, 3], data).expect("h·w·3 entries")
    }

    /// Tone map: subtract the minimum, divide by the new maximum, scale to
    /// 255 and truncate.
    pub fn from_tensor(t: &DenseTensor) -> Result<Self> {
        ensure!(t.order() == 3 && t.dims()[2] == 3, Dimension, "image tensor must be H×W×3, got {:?}", t.dims());
        let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.data().iter().map(|v| v - lo).fold(0.0, f64::max);
        let pixels = t
            .data()
            .iter()
            .map(|&v| if hi > 0.0 { ((v - lo) / hi * 255.0) as u8 } else { 0 })
            .collect();
        Self::new(t.dims()[0], t.dims()[1], pixels)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments between header tokens
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PPM header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("non-ASCII PPM header".into()))?);
        }
        ensure!(fields[0] == "P6", Format, "expected P6 magic, got {:?}", fields[0]);
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PPM header field {:?}", s)));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        ensure!(maxval == 255, Format, "only 8-bit PPM is supported, maxval {}", maxval);
        ensure!(width > 0 && height > 0, Format, "empty image {}x{}", width, height);
        // exactly one whitespace byte separates the header from the raster
        ensure!(pos < bytes.len() && bytes[pos].is_ascii_whitespace(), Format, "missing raster");
        let raster = &bytes[pos + 1..];
        let need = width * height * 3;
        ensure!(raster.len() >= need, Format, "raster has {} bytes, need {}", raster.len(), need);
        Self::new(height, width, raster[..need].to_vec())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_ppm(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm())?;
        Ok(())
    }
}

/// Storage for a rank-`r` CP model of an `H × W × 3` image.
pub fn cp_parameter_count(height: usize, width: usize, rank: usize) -> usize {
    rank * (height + width + 3) + rank
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub height: usize,
    pub width: usize,
    pub rank: usize,
    pub parameters: usize,
    pub ratio: f64,
    pub relative_error: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct Compressed {
    pub form: KruskalForm,
    pub report: DecompositionReport,
    pub output: Image,
    pub stats: CompressionStats,
}

/// ALS settings used for images: light ridge and a loose stopping tolerance.
pub fn image_als_config(rank: usize, seed: u64) -> AlsConfig {
    AlsConfig { l2_reg: 1e-3, tol: 1e-5, ..AlsConfig::new(rank, seed) }
}

pub fn compress_image(img: &Image, cfg: &AlsConfig) -> Result<Compressed> {
    ensure!(cfg.rank >= 1, Validation, "rank must be positive");
    let t = img.to_tensor();
    let (form, report) = als(&t, cfg)?;
    let rec = kruskal_to_tensor(&form)?;
    let nt = crate::tensor::frobenius_norm(&t);
    let relative_error = if nt > 0.0 { crate::tensor::frobenius_norm(&t.sub(&rec)?) / nt } else { 0.0 };
    let parameters = cp_parameter_count(img.height, img.width, cfg.rank);
    let stats = CompressionStats {
        height: img.height,
        width: img.width,
        rank: cfg.rank,
        parameters,
        ratio: (img.height * img.width * 3) as f64 / parameters as f64,
        relative_error,
        sweeps: report.sweep_errors.len(),
    };
    Ok(Compressed { output: Image::from_tensor(&rec)?, form, report, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        assert_eq!(cp_parameter_count(768, 1024, 50), 89_800);
        let ratio = (768 * 1024 * 3) as f64 / 89_800.0;
        assert!(ratio >= 26.0 && ratio < 26.3);
    }

    #[test]
    fn ppm_round_trip() {
        let px: Vec<u8> = (0..4 * 5 * 3).map(|i| (i * 37 % 256) as u8).collect();
        let img = Image::new(4, 5, px).unwrap();
        let bytes = img.to_ppm();
        let back = Image::from_ppm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.to_ppm(), bytes);
        let commented = [b"P6\n# a comment\n5 4\n255\n".as_slice(), &img.pixels].concat();
        assert_eq!(Image::from_ppm(&commented).unwrap(), img);
    }

    #[test]
    fn malformed_ppm() {
        assert!(Image::from_ppm(b"P3\n1 1\n255\n\x00\x00\x00").is_err());
        assert!(Image::from_ppm(b"P6\n2 2\n255\n\x00").is_err());
        assert!(Image::from_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").is_err());
        assert!(Image::from_ppm(b"P6").is_err());
    }

    #[test]
    fn tone_map() {
        let t = DenseTensor::new(vec![1, 2, 3], vec![-1.0, 0.0, 1.0, 2.0, 3.0, 1.5]).unwrap();
        let img = Image::from_tensor(&t).unwrap();
        assert_eq!(img.pixels, vec![0, 63, 127, 191, 255, 159]);
        let flat = Image::from_tensor(&DenseTensor::zeros(&[2, 2, 3])).unwrap();
        assert!(flat.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn constant_color_is_rank_one() {
        let px: Vec<u8> = (0..6 * 7).flat_map(|_| [200u8, 100, 50]).collect();
        let img = Image::new(6, 7, px).unwrap();
        let cfg = AlsConfig { l2_reg: 0.0, ..AlsConfig::new(1, 3) };
        let c = compress_image(&img, &cfg).unwrap();
        assert!(c.stats.relative_error <= 1e-6, "relative error {}", c.stats.relative_error);
        assert_eq!(c.stats.parameters, 6 + 7 + 3 + 1);
    }
}
