//! SVG overlays of contours on an image.

use std::fmt::Write as _;
use std::path::Path;

use base64::Engine;

use crate::energies::ImageGrid;
use crate::error::{Error, Result};
use crate::geometry::MarkerCurve;

use super::pgm::to_u8;

const COLORS: [&str; 4] = ["#e4572e", "#17bebb", "#ffc914", "#76b041"];

/// 8-bit greyscale PNG of the image.
pub fn encode_png(image: &ImageGrid) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| Error::InvalidParameter(format!("png encoding failed: {e}"));
        let mut writer = enc.write_header().map_err(png_err)?;
        let data: Vec<u8> = image.as_field().data.iter().map(|&v| to_u8(v)).collect();
        writer.write_image_data(&data).map_err(png_err)?;
    }
    Ok(out)
}

/// SVG document with the image (if any) as an embedded PNG and one
/// `polyline` per curve. Marker coordinates are written unchanged, so the
/// pixel `(x, y)` of the image sits at user coordinate `(x, y)`.
pub fn contour_svg(curves: &[MarkerCurve], image: Option<&ImageGrid>) -> Result<String> {
    let (w, h) = match image {
        Some(img) => (img.width() as f64, img.height() as f64),
        None => {
            let max = curves
                .iter()
                .flat_map(|c| c.points.iter())
                .fold((1.0_f64, 1.0_f64), |(mx, my), p| (mx.max(p.x + 1.0), my.max(p.y + 1.0)));
            (max.0.ceil(), max.1.ceil())
        }
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="-0.5 -0.5 {w} {h}">"#
    );
    if let Some(img) = image {
        let png = base64::engine::general_purpose::STANDARD.encode(encode_png(img)?);
        let _ = writeln!(
            s,
            r#"<image x="-0.5" y="-0.5" width="{w}" height="{h}" style="image-rendering:pixelated" href="data:image/png;base64,{png}"/>"#
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c.points.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{} {}"/>"#,
            COLORS[i % COLORS.len()],
            pts.join(" "),
            pts.first().cloned().unwrap_or_default()
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_contour_svg(curves: &[MarkerCurve], image: Option<&ImageGrid>, path: &Path) -> Result<()> {
    std::fs::write(path, contour_svg(curves, image)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let body = &l[start..start + l[start..].find('"').unwrap()];
                body.split(' ')
                    .map(|pair| {
                        let (x, y) = pair.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_curve_with_exact_coordinates() {
        let c = MarkerCurve::circle(Vec2::new(20.3, 17.1), 9.7, 37).unwrap();
        let svg = contour_svg(std::slice::from_ref(&c), None).unwrap();
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 1);
        // closed by repeating the first marker
        assert_eq!(lines[0].len(), 38);
        for (p, q) in c.points.iter().zip(&lines[0]) {
            assert_eq!((p.x, p.y), *q);
        }
    }

    #[test]
    fn empty_list_is_valid() {
        let svg = contour_svg(&[], None).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(polylines(&svg).is_empty());
    }

    #[test]
    fn background_png_decodes() {
        let img = ImageGrid::from_fn(24, 18, |x, y| ((x + y) % 2) as f64).unwrap();
        let svg = contour_svg(&[], Some(&img)).unwrap();
        let start = svg.find("base64,").unwrap() + 7;
        let b64 = &svg[start..start + svg[start..].find('"').unwrap()];
        let bytes = base64::engine::general_purpose::STANDARD.decode(b64).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (24, 18));
        assert_eq!(buf[0], 0);
        assert_eq!(buf[1], 255);
    }
}
