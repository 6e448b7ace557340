//! Regenerates the synthetic sample scenes under `tests/data/samples`.
//!
//! Each scene is a textured 160×120 picture plus a manifest whose masks
//! roughly trace the painted objects, with a little boundary noise so the
//! morphology stage has something to clean.
//!
//! ```text
//! cargo run -p maskfx-core --example make_samples [OUT_DIR]
//! ```

use std::path::PathBuf;

use maskfx_core::{
    write_image, BinaryMask, ClassTable, InstanceAnnotation, RasterImage, SegmentationManifest,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const W: usize = 160;
const H: usize = 120;

#[derive(Clone, Copy)]
enum Shape {
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Person { x: usize, top: usize, height: usize },
}

impl Shape {
    fn contains(self, x: usize, y: usize) -> bool {
        match self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                dx * dx + dy * dy <= 1.0
            }
            Shape::Person { x: px, top, height } => {
                let head = height as f64 / 7.0;
                let head_c = (px as f64, top as f64 + head);
                let (dx, dy) = (x as f64 - head_c.0, y as f64 - head_c.1);
                let in_head = dx * dx + dy * dy <= head * head;
                let body_top = top + (2.0 * head) as usize;
                let half = (head * 1.1) as usize;
                let in_body = y >= body_top && y < top + height && x + half >= px && x <= px + half;
                in_head || in_body
            }
        }
    }
}

struct Object {
    class_id: u32,
    score: f64,
    shape: Shape,
    color: [u8; 3],
}

fn paint(objects: &[Object], seed: u64) -> RasterImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise: Vec<i32> = (0..W * H).map(|_| rng.random_range(-12..=12)).collect();
    RasterImage::from_fn(W, H, |x, y| {
        let base = match objects.iter().rev().find(|o| o.shape.contains(x, y)) {
            Some(o) => o.color,
            None if y < H / 2 => [120 + (y as u8), 160 + (y as u8) / 2, 220],
            None => [90 + (x as u8) / 4, 110, 70 + (y as u8) / 3],
        };
        // low-frequency stripes give the filters some texture to act on
        let stripe = (((x + 2 * y) / 6) % 2) as i32 * 10;
        let n = noise[y * W + x];
        base.map(|c| (c as i32 + n + stripe - 5).clamp(0, 255) as u8)
    })
    .unwrap()
}

fn instance_mask(shape: Shape, rng: &mut StdRng) -> BinaryMask {
    let mut m = BinaryMask::from_fn(W, H, |x, y| shape.contains(x, y)).unwrap();
    // ragged boundary plus a stray speck, like real detector output
    for _ in 0..40 {
        let (x, y) = (rng.random_range(0..W), rng.random_range(0..H));
        let near_edge = [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| {
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            xx >= 0
                && yy >= 0
                && (xx as usize) < W
                && (yy as usize) < H
                && m.get(xx as usize, yy as usize) != m.get(x, y)
        });
        if near_edge {
            m.set(x, y, !m.get(x, y));
        }
    }
    let (sx, sy) = (rng.random_range(0..W - 2), rng.random_range(0..H - 2));
    m.set(sx, sy, true);
    m.set(sx + 1, sy, true);
    m
}

fn scene(name: &str, objects: Vec<Object>, seed: u64, out: &std::path::Path) {
    let classes = ClassTable::coco();
    let image = paint(&objects, seed);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    let instances = objects
        .iter()
        .map(|o| InstanceAnnotation {
            class_id: o.class_id,
            class_name: classes.name(o.class_id).unwrap().to_string(),
            score: o.score,
            mask: instance_mask(o.shape, &mut rng),
        })
        .collect();
    let manifest = SegmentationManifest::new(W, H, instances, &classes).unwrap();
    write_image(&image, out.join(format!("{name}.ppm"))).unwrap();
    std::fs::write(out.join(format!("{name}.json")), manifest.to_json() + "\n").unwrap();
    println!("{name}: {} instances", objects.len());
}

fn obj(class_id: u32, score: f64, shape: Shape, color: [u8; 3]) -> Object {
    Object { class_id, score, shape, color }
}

fn rect(x0: usize, y0: usize, x1: usize, y1: usize) -> Shape {
    Shape::Rect { x0, y0, x1, y1 }
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Shape {
    Shape::Ellipse { cx, cy, rx, ry }
}

fn person(x: usize, top: usize, height: usize) -> Shape {
    Shape::Person { x, top, height }
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/samples"));
    std::fs::create_dir_all(&out).unwrap();

    let skin = [214, 170, 140];
    scene(
        "street",
        vec![
            obj(6, 0.97, rect(8, 30, 110, 95), [200, 60, 40]),
            obj(3, 0.42, rect(112, 80, 158, 110), [40, 40, 160]),
            obj(1, 0.93, person(130, 40, 70), skin),
        ],
        1,
        &out,
    );
    scene(
        "park",
        vec![
            obj(18, 0.88, ellipse(40.0, 90.0, 22.0, 12.0), [120, 80, 40]),
            obj(18, 0.81, ellipse(100.0, 96.0, 18.0, 10.0), [230, 220, 200]),
            obj(1, 0.95, person(70, 20, 80), skin),
        ],
        2,
        &out,
    );
    scene(
        "table",
        vec![
            obj(47, 0.91, rect(20, 60, 44, 95), [240, 240, 235]),
            obj(47, 0.77, rect(60, 64, 82, 95), [60, 130, 200]),
            obj(47, 0.66, rect(96, 58, 118, 95), [220, 200, 60]),
            obj(44, 0.84, rect(128, 30, 142, 95), [50, 140, 60]),
        ],
        3,
        &out,
    );
    scene(
        "cat",
        vec![obj(17, 0.99, ellipse(80.0, 70.0, 45.0, 30.0), [90, 90, 95])],
        4,
        &out,
    );
    scene(
        "traffic",
        vec![
            obj(3, 0.9, rect(5, 70, 50, 100), [180, 30, 30]),
            obj(3, 0.86, rect(58, 72, 100, 100), [30, 30, 30]),
            obj(3, 0.7, rect(110, 68, 155, 100), [200, 200, 210]),
        ],
        5,
        &out,
    );
    scene(
        "cyclist",
        vec![
            obj(2, 0.89, ellipse(80.0, 95.0, 35.0, 14.0), [30, 30, 30]),
            obj(1, 0.94, person(80, 15, 75), skin),
        ],
        6,
        &out,
    );
    scene(
        "birds",
        vec![
            obj(16, 0.8, ellipse(50.0, 30.0, 14.0, 7.0), [40, 40, 40]),
            obj(16, 0.74, ellipse(115.0, 40.0, 12.0, 6.0), [60, 50, 40]),
        ],
        7,
        &out,
    );
    scene("empty", vec![], 8, &out);
    scene(
        "stable",
        vec![
            obj(19, 0.92, ellipse(70.0, 70.0, 40.0, 25.0), [110, 70, 40]),
            obj(1, 0.31, person(130, 40, 60), skin),
        ],
        9,
        &out,
    );
    scene(
        "depot",
        vec![
            obj(8, 0.87, rect(10, 35, 100, 100), [230, 230, 230]),
            obj(3, 0.83, rect(105, 70, 155, 100), [20, 90, 40]),
        ],
        10,
        &out,
    );
}
