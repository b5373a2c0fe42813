mod common;

use cmt::imaging::{
    load_image, read_gray, read_image, resize, resize_rgb, save_image, to_grayscale, write_pgm, write_ppm, Image,
    RgbImage,
};
use cmt::ImageError;

#[test]
fn files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let gray = common::random_image(16, 16, 1);
    write_pgm(dir.path().join("g.pgm"), &gray).unwrap();
    assert_eq!(read_image(dir.path().join("g.pgm")).unwrap(), Image::Gray(gray.clone()));
    assert_eq!(std::fs::read(dir.path().join("g.pgm")).unwrap(), save_image(&Image::Gray(gray)));

    let rgb = RgbImage::new(5, 4, common::random_image(15, 4, 2).pixels().to_vec()).unwrap();
    write_ppm(dir.path().join("c.ppm"), &rgb).unwrap();
    assert_eq!(read_image(dir.path().join("c.ppm")).unwrap(), Image::Rgb(rgb.clone()));
    assert_eq!(read_gray(dir.path().join("c.ppm")).unwrap(), to_grayscale(&rgb));
}

#[test]
fn truncated_payload_reports_sizes() {
    let bytes = save_image(&Image::Gray(common::random_image(4, 4, 3)));
    match load_image(&bytes[..bytes.len() - 3]) {
        Err(ImageError::Truncated { expected, found }) => assert_eq!((expected, found), (16, 13)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn resize_matches_the_centre_sampling_formula() {
    for seed in 0..10u64 {
        let (w, h) = (5 + seed as usize, 3 + 2 * seed as usize);
        let img = common::random_image(w, h, seed);
        for (ow, oh) in [(7, 4), (2, 9), (w, h), (1, 1)] {
            let out = resize(&img, ow, oh).unwrap();
            for y in 0..oh {
                for x in 0..ow {
                    let sx = ((x as f64 + 0.5) * w as f64 / ow as f64).floor() as usize;
                    let sy = ((y as f64 + 0.5) * h as f64 / oh as f64).floor() as usize;
                    assert_eq!(out.get(x, y), img.get(sx, sy));
                }
            }
        }
    }
}

#[test]
fn colour_resize_moves_whole_pixels() {
    let rgb = RgbImage::new(4, 4, (0..48).map(|v| v as u8).collect()).unwrap();
    let small = resize_rgb(&rgb, 2, 2).unwrap();
    assert_eq!(small.get(0, 0), rgb.get(1, 1));
    assert_eq!(small.get(1, 1), rgb.get(3, 3));
    assert!(resize_rgb(&rgb, 0, 2).is_err());
}

#[test]
fn gray_pixels_keep_their_value_through_luminance() {
    let px: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
    let gray = to_grayscale(&RgbImage::new(256, 1, px).unwrap());
    assert!(gray.pixels().iter().enumerate().all(|(i, &g)| g as usize == i));
}
