//! Grayscale pixel grids, binary masks, PNG I/O and the dihedral
//! transforms used for training-set augmentation.
//!
//! Intensities follow the paper-map convention: 0 is black ink, 255 is
//! blank paper. Color inputs are collapsed to a single channel by an
//! unweighted channel average.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intensity of blank paper.
pub const PAPER: u8 = 255;
/// Intensity of full-strength ink.
pub const INK: u8 = 0;

/// North-up affine mapping from pixel to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineGeo {
    pub origin_x: f64,
    pub origin_y: f64,
    /// World units per pixel column.
    pub px_size_x: f64,
    /// World units per pixel row; negative for north-up maps.
    pub px_size_y: f64,
}

impl AffineGeo {
    pub fn new(origin_x: f64, origin_y: f64, px_size_x: f64, px_size_y: f64) -> Result<Self> {
        if px_size_x == 0.0 || px_size_y == 0.0 || !px_size_x.is_finite() || !px_size_y.is_finite()
        {
            return Err(Error::Geometry(format!(
                "pixel size must be finite and non-zero, got ({px_size_x}, {px_size_y})"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        Ok(AffineGeo {
            origin_x,
            origin_y,
            px_size_x,
            px_size_y,
        })
    }

    pub fn pixel_to_world(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.origin_x + x * self.px_size_x,
            self.origin_y + y * self.px_size_y,
        )
    }

    pub fn world_to_pixel(&self, wx: f64, wy: f64) -> (f64, f64) {
        (
            (wx - self.origin_x) / self.px_size_x,
            (wy - self.origin_y) / self.px_size_y,
        )
    }

    /// The same mapping re-anchored at pixel `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> AffineGeo {
        let (origin_x, origin_y) = self.pixel_to_world(dx, dy);
        AffineGeo {
            origin_x,
            origin_y,
            ..*self
        }
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub geo: Option<AffineGeo>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!(
                "raster must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::Dimensions(format!(
                "{width}x{height} raster needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            pixels,
            geo: None,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Raster::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn with_geo(mut self, geo: Option<AffineGeo>) -> Self {
        self.geo = geo;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = value;
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.pixels[y as usize * w..(y as usize + 1) * w]
    }

    /// Reads a PNG (or any lossless format the decoder recognises) as grayscale.
    ///
    /// Multi-channel pixels become `round((r + g + b) / 3)`; alpha is ignored.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Raster> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Raster::decode_png(&bytes).map_err(|e| match e {
            Error::Decode { message, .. } => Error::Decode {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Raster> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
        from_dynamic(img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("pixel buffer matches dimensions");
        img.save_with_format(path, ImageFormat::Png)
            .map_err(|e| Error::Encode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn dihedral(&self, t: Dihedral) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            pixels: t.apply(self.width, self.height, &self.pixels),
            geo: None,
        }
    }
}

fn from_dynamic(img: DynamicImage) -> Result<Raster> {
    let (width, height) = (img.width(), img.height());
    if width == 0 || height == 0 {
        return Err(Error::Dimensions("image has a zero dimension".into()));
    }
    let pixels = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => img.to_luma8().into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let sum = p.0[0] as u16 + p.0[1] as u16 + p.0[2] as u16;
                // sum/3 never has a fractional part of exactly 1/2
                ((sum + 1) / 3) as u8
            })
            .collect(),
    };
    Raster::new(width, height, pixels)
}

/// One boolean per pixel; `true` marks building.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Dimensions(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Masks are stored as 0/255 grayscale; any non-zero pixel reads as set.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_raster().save_png(path)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let r = Raster::load_png(path)?;
        Ok(BinaryMask::from_raster(&r))
    }

    pub fn to_raster(&self) -> Raster {
        let px = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Raster::new(self.width, self.height, px).expect("mask dimensions")
    }

    pub fn from_raster(r: &Raster) -> BinaryMask {
        BinaryMask {
            width: r.width(),
            height: r.height(),
            bits: r.pixels().iter().map(|&v| v != 0).collect(),
        }
    }
}

/// The aspect-preserving symmetries of a rectangle that the augmentation
/// recipe uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dihedral {
    Identity,
    HFlip,
    VFlip,
    Rot180,
}

impl Dihedral {
    /// Source coordinates `(x, y)` for output pixel `(x, y)`.
    #[inline]
    fn source(self, w: u32, h: u32, x: u32, y: u32) -> (u32, u32) {
        match self {
            Dihedral::Identity => (x, y),
            Dihedral::HFlip => (w - 1 - x, y),
            Dihedral::VFlip => (x, h - 1 - y),
            Dihedral::Rot180 => (w - 1 - x, h - 1 - y),
        }
    }

    fn apply<T: Copy>(self, w: u32, h: u32, src: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(src.len());
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = self.source(w, h, x, y);
                out.push(src[sy as usize * w as usize + sx as usize]);
            }
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            Dihedral::Identity => "identity",
            Dihedral::HFlip => "hflip",
            Dihedral::VFlip => "vflip",
            Dihedral::Rot180 => "rot180",
        }
    }
}

/// Names of the six augmentation variants, in output order.
pub const AUGMENT_NAMES: [&str; 6] = [
    "identity",
    "hflip",
    "vflip",
    "rot180",
    "rot180_hflip",
    "rot180_vflip",
];

/// The six-variant augmentation recipe: identity, horizontal flip,
/// vertical flip, 180° rotation, and 180° rotation applied after each flip.
///
/// The last two coincide with vflip and hflip respectively; they are still
/// emitted so the output count matches the recipe.
pub fn augment_set(img: &Raster) -> Vec<Raster> {
    let h = img.dihedral(Dihedral::HFlip);
    let v = img.dihedral(Dihedral::VFlip);
    let rot_h = h.dihedral(Dihedral::Rot180);
    let rot_v = v.dihedral(Dihedral::Rot180);
    vec![
        img.dihedral(Dihedral::Identity),
        h,
        v,
        img.dihedral(Dihedral::Rot180),
        rot_h,
        rot_v,
    ]
}
