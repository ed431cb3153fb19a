//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};

pub fn scenemem(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenemem"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

pub fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small textured PNGs and a manifest under `dir/img`.
pub fn tiny_corpus(dir: &Path, pools: [usize; 3]) {
    let img = dir.join("img");
    std::fs::create_dir_all(&img).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(41);
    let mut manifest = String::from("image_id\tpath\tpool\n");
    for (pool, n) in ["target", "filler", "vigilance"].into_iter().zip(pools) {
        for i in 0..n {
            let tint: f64 = rng.random();
            let pic = image::RgbImage::from_fn(24, 24, |x, y| {
                image::Rgb([
                    (tint * f64::from(x) * 10.0) as u8,
                    rng.random(),
                    ((1.0 - tint) * f64::from(y) * 10.0) as u8,
                ])
            });
            let file = format!("{pool}_{i}.png");
            pic.save(img.join(&file)).unwrap();
            manifest.push_str(&format!("{}{i:03}\t{file}\t{pool}\n", &pool[..1]));
        }
    }
    std::fs::write(dir.join("manifest.tsv"), manifest).unwrap();
}

pub fn config(run: &str) -> String {
    format!(
        r#"seed = 99
out = "{run}"
logs = ["{run}/simulated_events.jsonl"]

[ingest]
images = "img"
manifest = "manifest.tsv"

[plan]
count = 2

[sequencer]
n_targets = 10
n_fillers = 6
n_vigilance = 3
target_spacing = {{ min = 8, max = 30 }}
vigilance_spacing = {{ min = 1, max = 4 }}

[simulate]
n_subjects = 12
sessions_per_subject = 3

[consistency]
splits = 5
top_k = [5]

[features]
export_maps = true
pqft = {{ working_size = 32, sigma = 4.0, output_size = 64, zero_tolerance = 1e-10 }}
grid = 8

[fit]
features = ["hsv", "glcm"]
kernel = "sum"
folds = 3

[eval]
permutations = 500
"#
    )
}

pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn run_pipeline(dir: &Path, run: &str) {
    let cfg = format!("{run}.toml");
    std::fs::write(dir.join(&cfg), config(run)).unwrap();
    for step in ["ingest", "plan", "simulate", "score", "consistency", "features", "fit", "eval", "report"] {
        ok(scenemem(&["--config", &cfg, step], dir));
    }
}
