//! 3x5 digit font drawn at 2x scale. Every glyph touches all four edges of
//! its cell and is 8-connected, so a rendered digit's tight bounds are the
//! full cell.

use crate::model::{BBox, Frame};

pub const SCALE: i32 = 2;
pub const DIGIT_W: i32 = 3 * SCALE;
pub const DIGIT_H: i32 = 5 * SCALE;
pub const GAP: i32 = 2;

/// Rows top to bottom, bit 2 = left column.
const GLYPHS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b011, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

pub fn digit_count(value: i64) -> i32 {
    let mut v = value.max(0);
    let mut n = 1;
    while v >= 10 {
        v /= 10;
        n += 1;
    }
    n
}

/// Tight box of `value` drawn left-aligned at `(x, y)`.
pub fn number_box(x: i32, y: i32, value: i64) -> BBox {
    let n = digit_count(value);
    BBox::new(x, y, n * DIGIT_W + (n - 1) * GAP, DIGIT_H)
}

pub fn draw_number(frame: &mut Frame, x: i32, y: i32, value: i64, color: u8) {
    let text = value.max(0).to_string();
    for (i, ch) in text.bytes().enumerate() {
        let glyph = &GLYPHS[usize::from(ch - b'0')];
        let gx = x + i as i32 * (DIGIT_W + GAP);
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    frame.fill_rect(
                        BBox::new(gx + col * SCALE, y + row as i32 * SCALE, SCALE, SCALE),
                        color,
                    );
                }
            }
        }
    }
}

/// Identify a glyph from a `DIGIT_W x DIGIT_H` cell; `lit(col, row)` reports
/// whether the pixel at that cell offset is set.
pub fn read_digit(lit: impl Fn(i32, i32) -> bool) -> Option<u8> {
    let mut rows = [0u8; 5];
    for (row, bits) in rows.iter_mut().enumerate() {
        for col in 0..3 {
            let (px, py) = (col * SCALE, row as i32 * SCALE);
            let on = lit(px, py);
            // Every pixel of a scaled cell must agree, otherwise it is not our font.
            for dy in 0..SCALE {
                for dx in 0..SCALE {
                    if lit(px + dx, py + dy) != on {
                        return None;
                    }
                }
            }
            if on {
                *bits |= 0b100 >> col;
            }
        }
    }
    GLYPHS.iter().position(|g| *g == rows).map(|d| d as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_span_their_cell_and_read_back() {
        for (d, glyph) in GLYPHS.iter().enumerate() {
            assert_ne!(glyph[0], 0);
            assert_ne!(glyph[4], 0);
            assert!(glyph.iter().any(|r| r & 0b100 != 0));
            assert!(glyph.iter().any(|r| r & 0b001 != 0));
            let mut f = Frame::blank();
            draw_number(&mut f, 10, 4, d as i64, 2);
            let read = read_digit(|x, y| f.get((10 + x) as usize, (4 + y) as usize) == 2);
            assert_eq!(read, Some(d as u8));
        }
    }

    #[test]
    fn number_boxes() {
        assert_eq!(number_box(36, 4, 0), BBox::new(36, 4, 6, 10));
        assert_eq!(number_box(36, 4, 20), BBox::new(36, 4, 14, 10));
        assert_eq!(number_box(0, 0, 12345).w, 5 * 6 + 4 * 2);
        assert_eq!(digit_count(-3), 1);
    }
}
