//! Writes a procedural target image to fit against.
//!
//! Usage: make_target <out.png> [width] [height] [seed]

use std::path::PathBuf;

use mgs_core::scene::reference_image;

fn main() {
    let mut args = std::env::args().skip(1);
    let path: PathBuf = args
        .next()
        .unwrap_or_else(|| "target.png".into())
        .into();
    let width: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let height: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(12345);
    let img = reference_image(width, height, seed);
    img.save_png(&path).expect("failed to write png");
    println!("wrote {width}x{height} target (seed {seed}) to {path:?}");
}
