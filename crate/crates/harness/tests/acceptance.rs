//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances are pinned below.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vosprop_core::propagation::{affinity_between, propagate_mask, top_k};
use vosprop_core::tensor_store::{read_fmap, read_msk, upsample_to_hard, VideoManifest};
use vosprop_core::{
    boundary_f, categorize, evaluate_video, extract_correspondences, harden, jaccard, mag_filter,
    spearman_rho, AffinityConfig, AffinityMatrix, EvalResult, FeatureKey, FeatureMap, HardMask,
    MemoryBank, Similarity, SoftMask,
};
use vosprop_harness::analyze::analyze_sweep;
use vosprop_harness::evaluate::evaluate_manifest;
use vosprop_harness::propagate::{grid_hard, load_gt, run_propagation};
use vosprop_harness::sweep::{run_sweep, SweepSpec};
use vosprop_harness::synthetic::{frame_name, SyntheticSpec};
use vosprop_harness::{FilterKind, RunConfig, RunOverrides};

const IDENTITY_SECONDS: f64 = 5.0;
const COS_L2_PAIRS: usize = 50;
const JACCARD_PAIRS: usize = 100;
const BOUNDARY_PAIRS: usize = 25;
const BOUNDARY_TOL: f64 = 1e-9;
const MAG_RADII: [f64; 6] = [35.355_339_059_327_38, 1.0, 3.0, 8.5, 20.0, 49.0];
const ORACLE_SEEDS: u64 = 10;
const PARTITION_PAIRS: usize = 100;
const SPEARMAN_TOL: f64 = 1e-12;
const BENCH_MIN_JF: f64 = 95.0;
const BENCH_SECONDS: f64 = 60.0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("{e:#}")
}

fn run_config(manifest: &Path, out: &Path) -> RunConfig {
    RunConfig::resolve(RunOverrides {
        manifest: Some(manifest.to_path_buf()),
        out: Some(out.to_path_buf()),
        ..Default::default()
    })
    .expect("valid config")
}

fn random_features(
    rng: &mut ChaCha8Rng,
    c: usize,
    h: usize,
    w: usize,
    unit: bool,
) -> FeatureMap<f64> {
    let mut pixels: Vec<f64> = (0..c * h * w).map(|_| StandardNormal.sample(rng)).collect();
    if unit {
        for v in pixels.chunks_mut(c) {
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
        }
    }
    FeatureMap::from_pixels(c, h, w, &pixels).unwrap()
}

/// Random mask mixing filled rectangles, discs and salt noise; `empty` yields all background.
fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, objs: u8, empty: bool) -> HardMask {
    let mut labels = vec![0u8; h * w];
    if !empty {
        for _ in 0..rng.random_range(1..4) {
            let label = rng.random_range(1..=objs);
            let (cy, cx) = (rng.random_range(0..h) as f64, rng.random_range(0..w) as f64);
            let r = rng.random_range(1.0..(h.min(w) as f64 / 2.0).max(1.5));
            let disc = rng.random_bool(0.5);
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                    let inside = if disc {
                        dy * dy + dx * dx <= r * r
                    } else {
                        dy.abs() <= r && dx.abs() <= r * 0.7
                    };
                    if inside {
                        labels[y * w + x] = label;
                    }
                }
            }
        }
        let salt = rng.random_range(0.0..0.1);
        for l in labels.iter_mut() {
            if rng.random_bool(salt) {
                *l = rng.random_range(0..=objs);
            }
        }
    }
    HardMask::new(h, w, objs, labels).unwrap()
}

fn random_affinity(rng: &mut ChaCha8Rng, slots: usize, h: usize, w: usize) -> AffinityMatrix<f64> {
    let n = slots * h * w * h * w;
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    AffinityMatrix::from_row_major(slots, h, w, &data).unwrap()
}

// ---------------------------------------------------------------------------

fn identity_propagation() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let mut checked = 0;
    for (name, separation, topk) in [("separated", 10.0, 10usize), ("noise", 0.0, 1)] {
        let spec = SyntheticSpec {
            videos: 2,
            frames: 6,
            objects: 2,
            height: 16,
            width: 20,
            channels: 8,
            cells: vec![cell(0, 0, 1.0, separation)],
            seed: 31,
            ..Default::default()
        };
        let root = dir.path().join(name);
        let index = dataset(&root, &spec);
        // Every frame gets frame 0's features.
        for v in 0..spec.videos {
            let feats = root.join(format!("Features/synth_{v:03}/L0_T0"));
            for f in 1..spec.frames {
                std::fs::copy(
                    feats.join("00000.fmap"),
                    feats.join(format!("{}.fmap", frame_name(f as u32))),
                )
                .map_err(err)?;
            }
        }
        for sim in [Similarity::Cos, Similarity::L1, Similarity::L2] {
            let out = root.join(format!("run_{sim}"));
            let cfg = RunConfig {
                affinity: sim,
                topk,
                ..run_config(&index, &out)
            };
            let record = run_propagation(&cfg).map_err(err)?;
            ensure(record.all_ok(), || format!("{name}/{sim}: run failed"))?;
            for v in 0..spec.videos {
                let id = format!("synth_{v:03}");
                let first =
                    read_msk(root.join(format!("Annotations/{id}/00000.msk"))).map_err(err)?;
                for f in 1..spec.frames {
                    let pred = read_msk(out.join(format!("{id}/{}.msk", frame_name(f as u32))))
                        .map_err(err)?;
                    ensure(pred == first, || {
                        format!("{name}/{sim}: {id} frame {f} differs")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < IDENTITY_SECONDS, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "{checked} frames exact for cos/l1/l2 in {secs:.2}s"
    ))
}

fn cos_l2_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..COS_L2_PAIRS {
        let mem = random_features(&mut rng, 16, 12, 12, true);
        let qry = random_features(&mut rng, 16, 12, 12, true);
        let cos = affinity_between(&[&mem], &qry, Similarity::Cos).map_err(err)?;
        let l2 = affinity_between(&[&mem], &qry, Similarity::L2).map_err(err)?;
        for col in 0..cos.cols() {
            let a: BTreeSet<usize> = top_k(cos.column(col), 10)
                .into_iter()
                .map(|(_, r)| r)
                .collect();
            let b: BTreeSet<usize> = top_k(l2.column(col), 10)
                .into_iter()
                .map(|(_, r)| r)
                .collect();
            ensure(a == b, || {
                format!("pair {i} column {col}: top-k sets differ")
            })?;
        }
        let labels = random_mask(&mut rng, 12, 12, 2, false);
        let mut bank = MemoryBank::new(1, true).map_err(err)?;
        bank.init(0, mem.clone(), SoftMask::one_hot(&labels))
            .map_err(err)?;
        let hard = |aff: &AffinityMatrix<f64>, sim| -> Result<HardMask, String> {
            let cfg = AffinityConfig::new(sim).with_topk(1);
            Ok(harden(&propagate_mask(&bank, aff, &cfg).map_err(err)?.mask))
        };
        ensure(
            hard(&cos, Similarity::Cos)? == hard(&l2, Similarity::L2)?,
            || format!("pair {i}: hardened masks differ"),
        )?;
    }
    Ok(format!(
        "{COS_L2_PAIRS} pairs, top-10 sets and k=1 hardened masks identical"
    ))
}

fn jaccard_oracle(a: &HardMask, b: &HardMask, obj: u8) -> f64 {
    let set = |m: &HardMask| -> HashSet<(usize, usize)> {
        (0..m.height())
            .flat_map(|y| (0..m.width()).map(move |x| (y, x)))
            .filter(|&(y, x)| m.get(y, x) == obj)
            .collect()
    };
    let (sa, sb) = (set(a), set(b));
    let union = sa.union(&sb).count();
    if union == 0 {
        1.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

/// Boundary pixels with the image padded by background on the bottom and
/// right, then the last row and column compared only along the image.
fn boundary_oracle(m: &HardMask, obj: u8) -> Vec<(i64, i64)> {
    let (h, w) = (m.height() as i64, m.width() as i64);
    let fg = |y: i64, x: i64| y < h && x < w && m.get(y as usize, x as usize) == obj;
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let here = fg(y, x);
            let right = here != fg(y, x + 1);
            let down = here != fg(y + 1, x);
            let diag = here != fg(y + 1, x + 1);
            let edge = if y == h - 1 && x == w - 1 {
                false
            } else if y == h - 1 {
                right
            } else if x == w - 1 {
                down
            } else {
                right || down || diag
            };
            if edge {
                out.push((y, x));
            }
        }
    }
    out
}

fn boundary_f_oracle(pred: &HardMask, gt: &HardMask, obj: u8, tol: f64) -> f64 {
    let (h, w) = (gt.height() as f64, gt.width() as f64);
    let r = (tol * (h * h + w * w).sqrt()).ceil() as i64;
    let (pb, gb) = (boundary_oracle(pred, obj), boundary_oracle(gt, obj));
    let near = |p: &(i64, i64), set: &[(i64, i64)]| {
        set.iter()
            .any(|q| (p.0 - q.0).pow(2) + (p.1 - q.1).pow(2) <= r * r)
    };
    let (np, ng) = (pb.len(), gb.len());
    let (precision, recall) = match (np, ng) {
        (0, 0) => (1.0, 1.0),
        (0, _) => (1.0, 0.0),
        (_, 0) => (0.0, 1.0),
        _ => (
            pb.iter().filter(|p| near(p, &gb)).count() as f64 / np as f64,
            gb.iter().filter(|g| near(g, &pb)).count() as f64 / ng as f64,
        ),
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..JACCARD_PAIRS {
        let a = random_mask(&mut rng, 16, 16, 2, i % 10 == 0);
        let b = random_mask(&mut rng, 16, 16, 2, i % 15 == 0);
        for obj in 1..=2 {
            let got = jaccard(&a, &b, obj).map_err(err)?;
            let want = jaccard_oracle(&a, &b, obj);
            ensure(got == want, || {
                format!("jaccard pair {i} obj {obj}: {got} vs {want}")
            })?;
        }
    }
    let mut worst = 0.0f64;
    for i in 0..BOUNDARY_PAIRS {
        let (h, w) = (rng.random_range(8..40), rng.random_range(8..60));
        let tol = [0.008, 0.03, 0.06][i % 3];
        let a = random_mask(&mut rng, h, w, 2, i == 7);
        let b = random_mask(&mut rng, h, w, 2, i == 11);
        for obj in 1..=2 {
            let got = boundary_f(&a, &b, obj, tol).map_err(err)?;
            let want = boundary_f_oracle(&a, &b, obj, tol);
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= BOUNDARY_TOL, || {
                format!("boundary pair {i} obj {obj}: {got} vs {want}")
            })?;
        }
    }
    let empty = HardMask::background(10, 10, 1).map_err(err)?;
    ensure(jaccard(&empty, &empty, 1).map_err(err)? == 1.0, || {
        "empty jaccard".into()
    })?;
    ensure(
        boundary_f(&empty, &empty, 1, 0.008).map_err(err)? == 1.0,
        || "empty F".into(),
    )?;
    Ok(format!(
        "jaccard exact on {JACCARD_PAIRS} pairs, boundary max |diff| {worst:.1e} on {BOUNDARY_PAIRS}, empty -> 1.0"
    ))
}

fn mag_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut radii = MAG_RADII.to_vec();
    radii.sort_by(f64::total_cmp);
    let mut kept_on_boundary = 0;
    for trial in 0..3 {
        let aff = random_affinity(&mut rng, 2, 30, 40);
        let mut previous: Option<Vec<bool>> = None;
        for &r in &radii {
            let filtered = mag_filter(&aff, r);
            let mut survivors = Vec::with_capacity(aff.rows() * aff.cols());
            for col in 0..aff.cols() {
                let (qy, qx) = aff.query_pixel(col);
                for row in 0..aff.rows() {
                    let (_, my, mx) = aff.memory_pixel(row);
                    let d2 = (qy as i64 - my as i64).pow(2) + (qx as i64 - mx as i64).pow(2);
                    // 25√2 is compared through its exact square.
                    let expect = if r == MAG_RADII[0] {
                        d2 <= 1250
                    } else {
                        (d2 as f64) <= r * r
                    };
                    let v = filtered.get(row, col);
                    let kept = !AffinityMatrix::is_excluded(v);
                    ensure(kept == expect, || {
                        format!("trial {trial} r={r}: row {row} col {col} d2={d2} kept={kept}")
                    })?;
                    if kept {
                        ensure(v == aff.get(row, col), || "survivor score changed".into())?;
                    }
                    if r == MAG_RADII[0] && kept && d2 == 1250 {
                        kept_on_boundary += 1;
                    }
                    survivors.push(kept);
                }
            }
            if let Some(prev) = &previous {
                ensure(prev.iter().zip(&survivors).all(|(&a, &b)| !a || b), || {
                    format!("trial {trial}: survivors at r={r} do not contain smaller radius")
                })?;
            }
            previous = Some(survivors);
        }
    }
    ensure(kept_on_boundary > 0, || {
        "no entries exactly on the 25√2 boundary".into()
    })?;
    Ok(format!(
        "6 radii incl. 25√2 exact, {kept_on_boundary} on-boundary entries kept, survivor sets nested"
    ))
}

fn oracle_direction() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut gains = Vec::new();
    for seed in 0..ORACLE_SEEDS {
        let spec = SyntheticSpec {
            videos: 2,
            frames: 8,
            objects: 2,
            height: 16,
            width: 20,
            channels: 8,
            confusers: 2,
            seed: 100 + seed,
            cells: vec![cell(0, 0, 1.0, 3.0)],
            ..Default::default()
        };
        let root = dir.path().join(format!("s{seed}"));
        let index = dataset(&root, &spec);
        let score = |filter: FilterKind| -> Result<f64, String> {
            let out = root.join(format!("{filter:?}"));
            let cfg = RunConfig {
                filter,
                ..run_config(&index, &out)
            };
            ensure(run_propagation(&cfg).map_err(err)?.all_ok(), || {
                "run failed".into()
            })?;
            Ok(evaluate_manifest(&out, &index, 0)
                .map_err(err)?
                .jf_percent())
        };
        let plain = score(FilterKind::None)?;
        let oracle = score(FilterKind::Oracle)?;
        ensure(oracle >= plain, || {
            format!("seed {seed}: oracle {oracle:.2} < unfiltered {plain:.2}")
        })?;
        gains.push(oracle - plain);
    }
    let min = gains.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    Ok(format!(
        "{ORACLE_SEEDS} seeds, J&F gain min {min:.1} mean {mean:.1}"
    ))
}

fn correspondence_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..PARTITION_PAIRS {
        let slots = rng.random_range(1..4);
        let (h, w) = (rng.random_range(2..10), rng.random_range(2..10));
        let aff = random_affinity(&mut rng, slots, h, w);
        let memory: Vec<HardMask> = (0..slots)
            .map(|_| random_mask(&mut rng, h, w, 2, false))
            .collect();
        let query = random_mask(&mut rng, h, w, 2, i % 9 == 0);
        let set = categorize(&extract_correspondences(&aff), &memory, &query).map_err(err)?;
        let c = set.counts();
        ensure(
            c.fg_fg + c.bg_bg + c.fg_bg == h * w && c.unknown == 0,
            || format!("pair {i}: {c:?} for {h}x{w}"),
        )?;
    }
    Ok(format!(
        "{PARTITION_PAIRS} pairs, FG-FG + BG-BG + FG-BG = H*W"
    ))
}

fn spearman() -> Outcome {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let cases = [
        ([2.0, 4.0, 6.0, 8.0, 10.0], 1.0),
        ([50.0, 40.0, 30.0, 20.0, 10.0], -1.0),
        // Rank differences (2, 0, 2, 0, 0): 1 - 6*8 / (5*24) = 0.6.
        ([30.0, 20.0, 10.0, 40.0, 50.0], 0.6),
    ];
    for (y, want) in cases {
        let got = spearman_rho(&x, &y).map_err(err)?;
        ensure((got - want).abs() <= SPEARMAN_TOL, || {
            format!("rho {got} vs {want}")
        })?;
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let seps = [6.0, 4.0, 3.0, 2.2, 1.6, 1.0];
    let spec = SyntheticSpec {
        videos: 3,
        frames: 8,
        objects: 2,
        height: 16,
        width: 20,
        channels: 16,
        seed: 5,
        cells: seps
            .iter()
            .enumerate()
            .map(|(i, &s)| cell(i as u32, 0, 1.0, s))
            .collect(),
        ..Default::default()
    };
    let index = dataset(&dir.path().join("data"), &spec);
    let sweep_out = dir.path().join("sweep");
    run_sweep(&SweepSpec {
        layers: (0..6).collect(),
        timesteps: vec![0],
        template: run_config(&index, &sweep_out),
    })
    .map_err(err)?;
    let analysis = analyze_sweep(&sweep_out, &sweep_out, None, 0).map_err(err)?;
    let rho = analysis.spearman_rho;
    ensure((rho + 1.0).abs() <= SPEARMAN_TOL, || {
        let pairs: Vec<String> = analysis
            .cells
            .iter()
            .map(|c| format!("({:.4}, {:.4})", c.fg_bg, c.jf))
            .collect();
        format!("analyze-corrs rho {rho}, cells {}", pairs.join(" "))
    })?;
    Ok("+1 / -1 / 0.6 within 1e-12; analyze-corrs on 6 inverted cells rho = -1".into())
}

/// Labels every query pixel with the ground-truth label of its L2-nearest
/// first-frame pixel, then scores like a propagation run.
fn nearest_neighbour_oracle(index: &Path) -> Result<f64, String> {
    let key = FeatureKey {
        layer: 0,
        timestep: 0,
    };
    let mut videos = Vec::new();
    for path in vosprop_core::tensor_store::DatasetIndex::manifest_paths(index).map_err(err)? {
        let m = VideoManifest::load(&path).map_err(err)?;
        let first = read_fmap(m.feature_path(0, key).unwrap()).map_err(err)?;
        let (h, w) = (first.height(), first.width());
        let first_gt = grid_hard(&load_gt(&m, 0).map_err(err)?, h, w).map_err(err)?;
        let mem = first.pixel_vectors();
        let c = first.channels();
        let (mut preds, mut gts) = (Vec::new(), Vec::new());
        for pos in 1..m.frames.len() {
            let q = read_fmap(m.feature_path(pos, key).unwrap())
                .map_err(err)?
                .pixel_vectors();
            let labels: Vec<u8> = q
                .chunks(c)
                .map(|qv| {
                    let d = |mv: &[f32]| {
                        mv.iter()
                            .zip(qv)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f32>()
                    };
                    let best = mem
                        .chunks(c)
                        .enumerate()
                        .min_by(|a, b| d(a.1).total_cmp(&d(b.1)))
                        .unwrap()
                        .0;
                    first_gt.labels()[best]
                })
                .collect();
            let grid = HardMask::new(h, w, m.objects, labels).map_err(err)?;
            let soft: SoftMask<f32> = SoftMask::one_hot(&grid);
            preds.push(upsample_to_hard(&soft, m.image_height, m.image_width).map_err(err)?);
            gts.push(load_gt(&m, pos).map_err(err)?);
        }
        videos.push(evaluate_video(&m.video_id, &preds, &gts, m.objects, 0.008).map_err(err)?);
    }
    Ok(EvalResult::from_videos(videos).jf_percent())
}

fn benchmark_spec(stride: usize) -> SyntheticSpec {
    SyntheticSpec {
        videos: 5,
        frames: 20,
        objects: 2,
        height: 32,
        width: 40,
        channels: 16,
        stride,
        seed: 2024,
        cells: vec![cell(0, 0, 1.0, 10.0)],
        ..Default::default()
    }
}

fn run_benchmark(root: &Path, stride: usize) -> Result<(f64, f64), String> {
    let index = dataset(root, &benchmark_spec(stride));
    let out = root.join("run");
    let cfg = RunConfig {
        memory_n: 8,
        topk: 10,
        ..run_config(&index, &out)
    };
    ensure(run_propagation(&cfg).map_err(err)?.all_ok(), || {
        "benchmark run failed".into()
    })?;
    let jf = evaluate_manifest(&out, &index, 0)
        .map_err(err)?
        .jf_percent();
    Ok((jf, nearest_neighbour_oracle(&index)?))
}

fn end_to_end_benchmark() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let started = Instant::now();
    let (jf, nn) = run_benchmark(&dir.path().join("s1"), 1)?;
    let secs = started.elapsed().as_secs_f64();
    ensure(jf >= BENCH_MIN_JF, || {
        format!("J&F {jf:.2} < {BENCH_MIN_JF} (nn oracle {nn:.2})")
    })?;
    ensure(secs < BENCH_SECONDS, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "J&F {jf:.2} (nn oracle {nn:.2}) in {secs:.1}s, 5x20 frames, 32x40 grid"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let d = dir.path();
    let check = |o: std::process::Output, what: &str| -> Result<(), String> {
        ensure(o.status.success(), || {
            format!("{what}: {}", String::from_utf8_lossy(&o.stderr))
        })
    };
    let gen = |name: &str| {
        vosprop(&[
            "gen-synthetic",
            "--out",
            p(&d.join(name)),
            "--videos",
            "3",
            "--frames",
            "6",
            "--height",
            "12",
            "--width",
            "16",
            "--channels",
            "8",
            "--confusers",
            "1",
            "--stride",
            "2",
            "--layers",
            "0,1",
            "--seed",
            "77",
            "--separation",
            "4",
        ])
    };
    check(gen("data_a"), "gen-synthetic")?;
    check(gen("data_b"), "gen-synthetic")?;
    ensure(tree(&d.join("data_a")) == tree(&d.join("data_b")), || {
        "generator output differs".into()
    })?;

    let index = d.join("data_a/dataset.json");
    let mut compared = 0;
    for filter in ["none", "mag", "oracle"] {
        let mut trees = Vec::new();
        for threads in ["1", "4"] {
            let out = d.join(format!("run_{filter}_{threads}"));
            check(
                vosprop(&[
                    "propagate",
                    "--manifest",
                    p(&index),
                    "--out",
                    p(&out),
                    "--filter",
                    filter,
                    "--mag-radius",
                    "3",
                    "--mag-units",
                    "image",
                    "--threads",
                    threads,
                ]),
                "propagate",
            )?;
            check(
                vosprop(&[
                    "evaluate",
                    "--pred",
                    p(&out),
                    "--manifest",
                    p(&index),
                    "--threads",
                    threads,
                ]),
                "evaluate",
            )?;
            trees.push(tree(&out));
        }
        ensure(trees[0] == trees[1], || {
            format!("propagate --filter {filter} differs across threads")
        })?;
        compared += trees[0].len();
    }

    let mut trees = Vec::new();
    for threads in ["1", "3"] {
        let out = d.join(format!("sweep_{threads}"));
        check(
            vosprop(&[
                "sweep",
                "--manifest",
                p(&index),
                "--out",
                p(&out),
                "--layers",
                "0,1,5",
                "--timesteps",
                "0",
                "--threads",
                threads,
            ]),
            "sweep",
        )?;
        check(
            vosprop(&["analyze-corrs", "--sweep", p(&out), "--threads", threads]),
            "analyze-corrs",
        )?;
        trees.push(tree(&out));
    }
    ensure(trees[0] == trees[1], || {
        "sweep/analyze-corrs differ across threads".into()
    })?;
    compared += trees[0].len();
    Ok(format!(
        "{compared} files byte-identical across --threads for all commands"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("identity propagation", identity_propagation),
        ("cos/l2 argmax equivalence", cos_l2_equivalence),
        ("metric oracles", metric_oracles),
        ("mag filter semantics", mag_semantics),
        ("oracle filter direction", oracle_direction),
        ("correspondence partition", correspondence_partition),
        ("spearman", spearman),
        ("end-to-end synthetic benchmark", end_to_end_benchmark),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    // Informational: features at half resolution lose boundary detail that
    // no matching strategy can recover.
    if let Ok(dir) = tempfile::tempdir() {
        if let Ok((jf, nn)) = run_benchmark(dir.path(), 2) {
            println!("INFO  benchmark at stride 2: J&F {jf:.2} (nn oracle {nn:.2})");
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
