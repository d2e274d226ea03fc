//! Frame dumps with extraction boxes drawn over the rendered image.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::model::{to_rgb, BBox, Frame, GameObject, Palette, FRAME_HEIGHT, FRAME_WIDTH};

pub const REM_COLOR: [u8; 3] = [0, 255, 0];
pub const VEM_COLOR: [u8; 3] = [255, 0, 255];
pub const DASH: i32 = 2;

fn put(img: &mut RgbImage, x: i32, y: i32, rgb: [u8; 3]) {
    if (0..FRAME_WIDTH as i32).contains(&x) && (0..FRAME_HEIGHT as i32).contains(&y) {
        img.put_pixel(x as u32, y as u32, Rgb(rgb));
    }
}

/// Outline one pixel outside `b`. With `dashed`, runs of [`DASH`] pixels
/// alternate on and off along the perimeter.
pub fn draw_box(img: &mut RgbImage, b: BBox, rgb: [u8; 3], dashed: bool) {
    let (x0, y0, x1, y1) = (b.x - 1, b.y - 1, b.x + b.w, b.y + b.h);
    let mut perimeter = Vec::new();
    perimeter.extend((x0..=x1).map(|x| (x, y0)));
    perimeter.extend((y0 + 1..=y1).map(|y| (x1, y)));
    perimeter.extend((x0..x1).rev().map(|x| (x, y1)));
    perimeter.extend((y0 + 1..y1).rev().map(|y| (x0, y)));
    for (i, (x, y)) in perimeter.into_iter().enumerate() {
        if !dashed || (i as i32 / DASH) % 2 == 0 {
            put(img, x, y, rgb);
        }
    }
}

/// REM boxes solid, VEM boxes dashed.
pub fn overlay(frame: &Frame, palette: &Palette, rem: &[GameObject], vem: &[GameObject]) -> Result<RgbImage> {
    let mut img = RgbImage::from_raw(FRAME_WIDTH as u32, FRAME_HEIGHT as u32, to_rgb(frame, palette)?)
        .ok_or_else(|| Error::MalformedFrame("raster size mismatch".into()))?;
    for o in vem {
        draw_box(&mut img, o.bbox(), VEM_COLOR, true);
    }
    for o in rem {
        draw_box(&mut img, o.bbox(), REM_COLOR, false);
    }
    Ok(img)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Category;

    #[test]
    fn solid_and_dashed_outlines() {
        let frame = Frame::blank();
        let p = Palette::console();
        let o = GameObject::new(Category::from_static("Ball"), BBox::new(10, 10, 4, 4), [0, 0, 0], false);
        let img = overlay(&frame, &p, std::slice::from_ref(&o), &[]).unwrap();
        // 6x6 outline around a 4x4 box.
        let solid = img.pixels().filter(|px| px.0 == REM_COLOR).count();
        assert_eq!(solid, 20);
        let img = overlay(&frame, &p, &[], &[o]).unwrap();
        let dashed = img.pixels().filter(|px| px.0 == VEM_COLOR).count();
        assert_eq!(dashed, 10);
        assert_eq!(img.get_pixel(9, 9).0, VEM_COLOR);
    }
}
