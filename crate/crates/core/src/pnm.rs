//! Binary PGM (P5) and PPM (P6) reading and writing, 8-bit samples only.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ColorSpace, Image};

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
        .map_err(|e| Error::Parse(format!("invalid PNM data: {e}")))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    match dynamic {
        DynamicImage::ImageLuma8(buf) => Image::new(w, h, ColorSpace::Gray, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => Image::new(w, h, ColorSpace::Rgb, buf.into_raw()),
        other => Err(Error::Parse(format!(
            "unsupported PNM sample layout {:?}; expected 8-bit gray or RGB",
            other.color()
        ))),
    }
}

/// P5 for gray images, P6 for anything with three channels. YCbCr data is
/// written as-is into the P6 container.
pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let (subtype, color) = match img.channels() {
        1 => (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8),
        _ => (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8),
    };
    PnmEncoder::new(Cursor::new(&mut out))
        .with_subtype(subtype)
        .write_image(img.data(), img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::Parse(format!("cannot encode PNM: {e}")))?;
    Ok(out)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    fs::write(path, encode(img)?)?;
    Ok(())
}

/// Masks are stored as P5 with 0 for background and 255 for foreground.
pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_image(path, &mask.to_image())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_image(&read_image(path)?.to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_header_is_exact() {
        let img = Image::from_fn_gray(3, 2, |x, y| (x + 10 * y) as u8).unwrap();
        let bytes = encode(&img).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert!(bytes.ends_with(&[0, 1, 2, 10, 11, 12]));
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn p6_round_trip() {
        let img = Image::from_fn_rgb(4, 3, |x, y| [x as u8, y as u8, 200]).unwrap();
        let bytes = encode(&img).unwrap();
        assert!(bytes.starts_with(b"P6"));
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn hand_written_p6_parses() {
        let mut bytes = b"P6\n# comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.colorspace(), ColorSpace::Rgb);
        assert_eq!(img.data(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn corrupt_data_is_a_parse_error() {
        assert!(matches!(decode(b"P6\n2 2\n255\n\x01\x02"), Err(Error::Parse(_))));
        assert!(matches!(decode(b"hello"), Err(Error::Parse(_))));
    }
}
