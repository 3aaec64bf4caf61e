//! Raster + JSON sidecar persistence.
//!
//! `.tif`/`.tiff` files store 64-bit float samples and round-trip bit-exactly.
//! `.png` files store 16-bit samples (quantized). The sidecar `<stem>.json`
//! next to the raster carries geometry, timestamp and color space.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{ColorSpace, CoordinateSystem, PhysicalImage};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width_m: f64,
    pub height_m: f64,
    pub origin_m: [f64; 2],
    pub timestamp_s: Option<f64>,
    pub colorspace: ColorSpace,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl Sidecar {
    pub fn of(image: &PhysicalImage) -> Self {
        Self {
            width_m: image.width(),
            height_m: image.height(),
            origin_m: image.origin(),
            timestamp_s: image.timestamp(),
            colorspace: image.colorspace(),
            rows: image.rows(),
            cols: image.cols(),
            channels: image.channels(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Container {
    FloatTiff,
    Png16,
}

fn container_for(path: &Path) -> Result<Container> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("tif") | Some("tiff") => Ok(Container::FloatTiff),
        Some("png") => Ok(Container::Png16),
        other => Err(Error::invalid(format!("unsupported output container {other:?} (use .tif or .png)"))),
    }
}

/// Writes the raster and its sidecar.
pub fn save(image: &PhysicalImage, path: &Path) -> Result<()> {
    save_raster(image, path)?;
    let sidecar = serde_json::to_string_pretty(&Sidecar::of(image))?;
    std::fs::write(sidecar_path(path), sidecar)?;
    Ok(())
}

/// Writes only the pixel payload.
pub fn save_raster(image: &PhysicalImage, path: &Path) -> Result<()> {
    let (rows, cols, channels) = image.data().dim();
    let flat: Vec<f64> = image.data().iter().copied().collect();
    match container_for(path)? {
        Container::FloatTiff => {
            let mut encoder = tiff::encoder::TiffEncoder::new(BufWriter::new(File::create(path)?))?;
            if channels == 3 {
                encoder.write_image::<tiff::encoder::colortype::RGB64Float>(cols as u32, rows as u32, &flat)?;
            } else {
                encoder.write_image::<tiff::encoder::colortype::Gray64Float>(cols as u32, rows as u32, &flat)?;
            }
        }
        Container::Png16 => {
            let q: Vec<u16> = flat.iter().map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
            if channels == 3 {
                let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
                    ImageBuffer::from_raw(cols as u32, rows as u32, q).ok_or_else(|| Error::invalid("raster size"))?;
                buf.save(path)?;
            } else {
                let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                    ImageBuffer::from_raw(cols as u32, rows as u32, q).ok_or_else(|| Error::invalid("raster size"))?;
                buf.save(path)?;
            }
        }
    }
    Ok(())
}

/// Reads a raster as `(rows, cols, channels)` intensities in `[0, 1]`.
///
/// Float TIFFs are read as-is; 8/16-bit integer rasters (PNG, JPEG, TIFF) are
/// scaled by their maximum code value.
pub fn load_raster(path: &Path) -> Result<Array3<f64>> {
    let is_tiff = matches!(container_for(path), Ok(Container::FloatTiff));
    if is_tiff {
        if let Some(arr) = try_load_float_tiff(path)? {
            return Ok(arr);
        }
    }
    let dynamic = image::open(path)?;
    Ok(dynamic_to_array(&dynamic))
}

fn try_load_float_tiff(path: &Path) -> Result<Option<Array3<f64>>> {
    let mut decoder = tiff::decoder::Decoder::new(BufReader::new(File::open(path)?))?;
    let (w, h) = decoder.dimensions()?;
    let channels = match decoder.colortype()? {
        tiff::ColorType::Gray(_) => 1,
        tiff::ColorType::RGB(_) => 3,
        _ => return Ok(None),
    };
    let samples: Vec<f64> = match decoder.read_image()? {
        tiff::decoder::DecodingResult::F64(v) => v,
        tiff::decoder::DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        _ => return Ok(None),
    };
    let arr = Array3::from_shape_vec((h as usize, w as usize, channels), samples)
        .map_err(|e| Error::invalid(format!("tiff payload: {e}")))?;
    Ok(Some(arr))
}

fn dynamic_to_array(img: &DynamicImage) -> Array3<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb16();
        Array3::from_shape_fn((h, w, 3), |(r, c, k)| rgb.get_pixel(c as u32, r as u32)[k] as f64 / 65535.0)
    } else {
        let l = img.to_luma16();
        Array3::from_shape_fn((h, w, 1), |(r, c, _)| l.get_pixel(c as u32, r as u32)[0] as f64 / 65535.0)
    }
}

/// Reads a raster and its sidecar; the sidecar must exist and agree with the
/// pixel dimensions.
pub fn load(path: &Path) -> Result<PhysicalImage> {
    let sc_path = sidecar_path(path);
    let text = std::fs::read_to_string(&sc_path).map_err(|e| Error::Sidecar {
        path: sc_path.clone(),
        reason: format!("cannot read: {e}"),
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Sidecar {
        path: sc_path.clone(),
        reason: e.to_string(),
    })?;
    let data = load_raster(path)?;
    let (rows, cols, channels) = data.dim();
    if (rows, cols, channels) != (sidecar.rows, sidecar.cols, sidecar.channels) {
        return Err(Error::Sidecar {
            path: sc_path,
            reason: format!(
                "sidecar says {}x{}x{} but raster is {rows}x{cols}x{channels}",
                sidecar.rows, sidecar.cols, sidecar.channels
            ),
        });
    }
    let coords = CoordinateSystem::new(rows, cols, sidecar.width_m, sidecar.height_m, sidecar.origin_m)?;
    PhysicalImage::from_parts(data, coords, sidecar.timestamp_s, sidecar.colorspace)
}

/// Reads a plain raster (no sidecar) and attaches the given geometry.
pub fn load_with_geometry(path: &Path, width: f64, height: f64, origin: [f64; 2], timestamp: Option<f64>) -> Result<PhysicalImage> {
    PhysicalImage::new(load_raster(path)?, width, height, origin, timestamp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_image(channels: usize) -> PhysicalImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let d = Array3::from_shape_fn((8, 8, channels), |_| rng.random::<f64>());
        PhysicalImage::new(d, 2.8, 1.5, [0.25, -1.0], Some(1_650_000_000.5)).unwrap()
    }

    #[test]
    fn tiff_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1, 3] {
            let img = random_image(channels);
            let p = dir.path().join(format!("img{channels}.tif"));
            save(&img, &p).unwrap();
            let back = load(&p).unwrap();
            assert_eq!(back, img);
            assert_eq!(back.width(), 2.8);
        }
    }

    #[test]
    fn png_round_trip_quantizes_to_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(3);
        let p = dir.path().join("img.png");
        save(&img, &p).unwrap();
        let back = load(&p).unwrap();
        for (a, b) in back.data().iter().zip(img.data().iter()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }

    #[test]
    fn sidecar_inconsistency_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(1);
        let p = dir.path().join("img.tif");
        save(&img, &p).unwrap();
        let mut sc = Sidecar::of(&img);
        sc.rows = 9;
        std::fs::write(sidecar_path(&p), serde_json::to_string(&sc).unwrap()).unwrap();
        assert!(matches!(load(&p), Err(Error::Sidecar { .. })));
        std::fs::remove_file(sidecar_path(&p)).unwrap();
        assert!(matches!(load(&p), Err(Error::Sidecar { .. })));
    }
}
