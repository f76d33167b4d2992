//! Writes the bundled mini-corpus: five 681x511 RGB scenes with a few
//! conspicuous objects on a smooth background, plus synthetic fixations
//! clustered on those objects.
//!
//! cargo run -p mdis-core --example make_mini_corpus -- [OUT_DIR]

use std::path::PathBuf;

use mdis_core::metrics::{write_fixations_csv, FixationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const W: usize = 681;
const H: usize = 511;
const SUBJECTS: usize = 4;
const FIXATIONS_PER_SUBJECT: usize = 8;

enum Shape {
    Texture {
        cx: f64,
        cy: f64,
        half: f64,
    },
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
        level: f64,
    },
}

impl Shape {
    fn centre(&self) -> (f64, f64) {
        match *self {
            Shape::Texture { cx, cy, .. } | Shape::Disc { cx, cy, .. } => (cx, cy),
        }
    }
}

fn scene(seed: u64) -> (Vec<u8>, Vec<Shape>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (
        rng.gen_range(0.3..0.6),
        rng.gen_range(-0.15..0.15),
        rng.gen_range(-0.15..0.15),
    );
    let (fx, fy, ph) = (
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.0..6.28),
    );
    let tint = [rng.gen_range(0.9..1.1), 1.0, rng.gen_range(0.9..1.1)];
    let mut shapes = Vec::new();
    for k in 0..rng.gen_range(2..=3) {
        let cx = rng.gen_range(90.0..(W as f64 - 90.0));
        let cy = rng.gen_range(90.0..(H as f64 - 90.0));
        shapes.push(if k % 2 == 0 {
            Shape::Texture {
                cx,
                cy,
                half: rng.gen_range(24.0..48.0),
            }
        } else {
            Shape::Disc {
                cx,
                cy,
                r: rng.gen_range(20.0..40.0),
                level: if rng.gen() { 0.05 } else { 0.95 },
            }
        });
    }
    let mut data = Vec::with_capacity(W * H * 3);
    for y in 0..H {
        for x in 0..W {
            let (u, v) = (x as f64 / W as f64, y as f64 / H as f64);
            let mut g = a + b * u + c * v + 0.05 * (6.28 * (fx * u + fy * v) + ph).sin();
            for s in &shapes {
                match *s {
                    Shape::Texture { cx, cy, half } => {
                        if (x as f64 - cx).abs() < half && (y as f64 - cy).abs() < half {
                            g = rng.gen_range(0.1..0.9);
                        }
                    }
                    Shape::Disc { cx, cy, r, level } => {
                        if (x as f64 - cx).hypot(y as f64 - cy) < r {
                            g = level;
                        }
                    }
                }
            }
            for t in tint {
                data.push(((g * t).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    (data, shapes)
}

fn fixations(name: &str, shapes: &[Shape], seed: u64) -> FixationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let jitter = Normal::new(0.0, 12.0).unwrap();
    let mut set = FixationSet::new(name);
    for s in 0..SUBJECTS {
        for _ in 0..FIXATIONS_PER_SUBJECT {
            let (x, y) = if rng.gen_bool(0.8) {
                let (cx, cy) = shapes[rng.gen_range(0..shapes.len())].centre();
                (cx + jitter.sample(&mut rng), cy + jitter.sample(&mut rng))
            } else {
                (rng.gen_range(0.0..W as f64), rng.gen_range(0.0..H as f64))
            };
            let x = x.clamp(0.0, (W - 1) as f64).round();
            let y = y.clamp(0.0, (H - 1) as f64).round();
            set.push(format!("s{}", s + 1), x, y);
        }
    }
    set
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/tests/data/mini_corpus"
            ))
        });
    std::fs::create_dir_all(&out)?;
    let mut sets = Vec::new();
    for i in 0..5u64 {
        let name = format!("scene{}.png", i + 1);
        let (data, shapes) = scene(100 + i);
        image::save_buffer(
            out.join(&name),
            &data,
            W as u32,
            H as u32,
            image::ColorType::Rgb8,
        )?;
        sets.push(fixations(&name, &shapes, 100 + i));
    }
    write_fixations_csv(out.join("fixations.csv"), &sets)?;
    println!("wrote {}", out.display());
    Ok(())
}
