//! Grayscale PGM/PNG codecs.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageEncoder, ImageReader};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Image2D, Mask, OrientationStack};
use crate::lift::project_max;

/// How file intensities map to pixel values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IntensityConvention {
    /// 0 is white and 1 is black; standard files are inverted on the way in and out.
    #[default]
    Paper,
    /// File values are used as they are.
    Standard,
}

impl IntensityConvention {
    pub fn name(self) -> &'static str {
        match self {
            IntensityConvention::Paper => "paper",
            IntensityConvention::Standard => "standard",
        }
    }

    /// Map between file values and pixel values; an involution.
    pub fn apply(self, image: &Image2D) -> Image2D {
        match self {
            IntensityConvention::Paper => image.inverted(),
            IntensityConvention::Standard => image.clone(),
        }
    }
}

impl fmt::Display for IntensityConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntensityConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(IntensityConvention::Paper),
            "standard" => Ok(IntensityConvention::Standard),
            other => Err(Error::config(format!(
                "unknown intensity convention '{other}', expected paper or standard"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => Ok(Format::Pgm),
        Some("png") => Ok(Format::Png),
        _ => Err(Error::io(path, "unsupported format, expected a .pgm or .png file")),
    }
}

/// Raw file values in `[0, 1]`, without any convention applied.
fn read_raw(path: &Path) -> Result<Array2<f64>> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::io(path, format!("cannot decode image: {e}")))?;
    let luma = decoded.to_luma16();
    let (w, h) = luma.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        luma.get_pixel(c as u32, r as u32)[0] as f64 / 65535.0
    }))
}

/// Read an 8/16-bit PGM or a PNG (converted to luma) as values in `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>, convention: IntensityConvention) -> Result<Image2D> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let image = Image2D::from_array(raw).map_err(|e| Error::io(path, e))?;
    Ok(convention.apply(&image))
}

fn to_gray8(image: &Image2D) -> GrayImage {
    let (rows, cols) = image.dim();
    GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        image::Luma([(image.get(r as usize, c as usize) * 255.0).round() as u8])
    })
}

fn write_gray8(gray: &GrayImage, path: &Path) -> Result<()> {
    let format = format_of(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let (w, h) = gray.dimensions();
    let res = match format {
        Format::Pgm => PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(gray.as_raw(), w, h, image::ExtendedColorType::L8),
        Format::Png => image::codecs::png::PngEncoder::new(&mut out).write_image(
            gray.as_raw(),
            w,
            h,
            image::ExtendedColorType::L8,
        ),
    };
    res.map_err(|e| Error::io(path, e))
}

/// Write an 8-bit binary PGM or 8-bit grayscale PNG, chosen by extension.
pub fn write_image(image: &Image2D, path: impl AsRef<Path>, convention: IntensityConvention) -> Result<()> {
    write_gray8(&to_gray8(&convention.apply(image)), path.as_ref())
}

/// Mask files are white (standard value at least 0.5) where pixels are corrupted.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let raw = read_raw(path.as_ref())?;
    Ok(Mask::from_array(raw.mapv(|v| v >= 0.5)))
}

pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let (rows, cols) = mask.dim();
    let gray = GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        image::Luma([if mask.get(r as usize, c as usize) { 255 } else { 0 }])
    });
    write_gray8(&gray, path.as_ref())
}

/// Write one PNG per angle slice plus the max projection into `dir`.
///
/// Returns the slice paths in angle order followed by the projection path.
pub fn write_stack_slices(
    stack: &OrientationStack,
    dir: impl AsRef<Path>,
    convention: IntensityConvention,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(stack.n_theta() + 1);
    for k in 0..stack.n_theta() {
        let slice = stack.data().index_axis(ndarray::Axis(0), k).to_owned();
        let image = Image2D::from_array(slice)?;
        let path = dir.join(format!("slice_{k:03}.png"));
        write_image(&image, &path, convention)?;
        paths.push(path);
    }
    let path = dir.join("max_projection.png");
    write_image(&project_max(stack), &path, convention)?;
    paths.push(path);
    Ok(paths)
}
