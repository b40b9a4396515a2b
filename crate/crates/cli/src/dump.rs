//! Debug artifacts written under `--dump-debug`.

use std::fs;
use std::path::Path;

use dpt_core::imaging::{center_shift, write_pgm_normalized, write_pgm_unit};
use dpt_core::tracker::{FrameDebug, FrameResult, TrackerState};
use dpt_core::BBox;
use image::{Rgb, RgbImage};

use crate::error::{CliError, CliResult};

const BOX_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
const UPDATED_COLOR: Rgb<u8> = Rgb([255, 255, 0]);
const FROZEN_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

fn draw_rect(image: &mut RgbImage, b: &BBox, color: Rgb<u8>) {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = b.right().round() as i64 - 1;
    let y1 = b.bottom().round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            image.put_pixel(x as u32, y as u32, color);
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

/// The frame with the object box and every part region drawn on top.
/// Parts are yellow when updated this frame and red when frozen.
pub fn write_overlay(
    dir: &Path,
    index: usize,
    frame: &RgbImage,
    state: &TrackerState,
    result: Option<&FrameResult>,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut canvas = frame.clone();
    for (i, part) in state.constellation.parts.iter().enumerate() {
        let (position, color) = match result {
            Some(r) => (
                r.part_positions[i],
                if r.updated_parts[i] { UPDATED_COLOR } else { FROZEN_COLOR },
            ),
            None => (part.position, UPDATED_COLOR),
        };
        draw_rect(&mut canvas, &BBox::from_center(position, part.size.0, part.size.1), color);
    }
    let bbox = result.map_or_else(|| state.bbox(), |r| r.bbox);
    draw_rect(&mut canvas, &bbox, BOX_COLOR);
    let path = dir.join(format!("{index:05}_overlay.png"));
    canvas.save(&path).map_err(|e| CliError::Frame {
        index,
        path,
        source: e.into(),
    })
}

pub fn write_frame(
    dir: &Path,
    index: usize,
    frame: &RgbImage,
    state: &TrackerState,
    result: &FrameResult,
    debug: &FrameDebug,
) -> CliResult<()> {
    write_overlay(dir, index, frame, state, Some(result))?;
    let path = |name: &str| dir.join(format!("{index:05}_{name}.pgm"));
    let combined = path("combined");
    write_pgm_normalized(&combined, &center_shift(&debug.combined)).map_err(CliError::io(combined))?;
    if let Some(posterior) = &debug.posterior {
        let p = path("posterior");
        write_pgm_unit(&p, posterior).map_err(CliError::io(p))?;
    }
    if let Some(mask) = &debug.mask {
        let p = path("mask");
        write_pgm_unit(&p, &mask.mapv(|m| if m { 1.0 } else { 0.0 })).map_err(CliError::io(p))?;
    }
    for (i, response) in debug.part_responses.iter().enumerate() {
        let p = path(&format!("part{i}"));
        write_pgm_normalized(&p, &center_shift(response)).map_err(CliError::io(p))?;
    }
    Ok(())
}
