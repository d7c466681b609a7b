//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use gesture_core::classifier::{
    cross_validate, kfold_split, knn, metric_distance, GestureDatabase, KnnParams, Kind, Metric, Voting,
};
use gesture_core::control::{decode, encode, send, GestureTable, RobotServer};
use gesture_core::dataset::{build_db, load_frames, scan, IngestReport};
use gesture_core::dynamic::histogram_intersection;
use gesture_core::flow::{centroid_transition, horn_schunck, FlowParams, GateDecision, HornSchunck, TrackRecord};
use gesture_core::hand::chamfer_dt;
use gesture_core::moments::{
    central_moment, principal_moments, radial_extents, raw_moment, static_vector, ExtentMode,
};
use gesture_core::pipeline::{gate, PipelineConfig};
use gesture_core::skin::{skin_mask, SkinParams};
use gesture_core::synth::write_dataset;
use gesture_core::{BinaryMask, ColorSpace, Error, Image};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> std::result::Result<Duration, String> {
    let t = start.elapsed();
    check(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

// Skin intervals.

fn skin_intervals() -> Outcome {
    let start = Instant::now();
    let p = SkinParams::default();
    let mut swept = 0usize;
    for y in [0u8, 128, 255] {
        let mut data = Vec::with_capacity(256 * 256 * 3);
        for cr in 0..=255u8 {
            for cb in 0..=255u8 {
                data.extend_from_slice(&[y, cb, cr]);
            }
        }
        let img = Image::new(256, 256, ColorSpace::YCbCr, data).map_err(|e| e.to_string())?;
        let mask = skin_mask(&img, &p).map_err(|e| e.to_string())?;
        for cr in 0..256usize {
            for cb in 0..256usize {
                let want = (77..=127).contains(&cb) && (133..=173).contains(&cr);
                check(mask.get(cb, cr) == want, || format!("Y={y} Cb={cb} Cr={cr}: got {}", mask.get(cb, cr)))?;
                swept += 1;
            }
        }
    }
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("{swept} (Y,Cb,Cr) triples match in {t:.2?}"))
}

// Chamfer distance transform.

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    let blobs: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..6))
        .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64), rng.gen_range(3.0..20.0)))
        .collect();
    let speckle = rng.gen_range(0.0..0.08);
    BinaryMask::from_fn(w, h, |x, y| {
        let inside = blobs.iter().any(|&(cx, cy, r)| (x as f64 - cx).hypot(y as f64 - cy) <= r);
        inside ^ rng.gen_bool(speckle)
    })
}

/// Shortest 3/4-weighted 8-neighbor path to background; outside the frame
/// is background.
fn dt_oracle(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut dist = vec![u32::MAX; w * h];
    let mut heap = BinaryHeap::new();
    for y in 0..h {
        for x in 0..w {
            let seed = if !mask.get(x, y) {
                0
            } else if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                3
            } else {
                continue;
            };
            dist[y * w + x] = seed;
            heap.push(Reverse((seed, x, y)));
        }
    }
    while let Some(Reverse((d, x, y))) = heap.pop() {
        if d > dist[y * w + x] {
            continue;
        }
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nd = d + if dx != 0 && dy != 0 { 4 } else { 3 };
                let j = ny as usize * w + nx as usize;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((nd, nx as usize, ny as usize)));
                }
            }
        }
    }
    dist
}

fn euclid_to_background(mask: &BinaryMask, x: usize, y: usize) -> f64 {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let (fx, fy) = (x as f64, y as f64);
    let mut best = (fx + 1.0).min(w - fx).min(fy + 1.0).min(h - fy);
    for (bx, by) in mask.complement().foreground() {
        best = best.min((fx - bx as f64).hypot(fy - by as f64));
    }
    best
}

fn chamfer_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for m in 0..50 {
        let mask = random_mask(&mut rng, 64, 64);
        let dt = chamfer_dt(&mask);
        let oracle = dt_oracle(&mask);
        check(dt.values() == oracle.as_slice(), || format!("mask {m}: DT differs from the shortest-path oracle"))?;
        for (x, y) in mask.foreground() {
            let e = euclid_to_background(&mask, x, y);
            let rel = (dt.get(x, y) as f64 / 3.0 - e).abs() / e;
            worst = worst.max(rel);
            check(rel <= 0.10, || format!("mask {m} ({x},{y}): dist/3 {} vs Euclidean {e}", dt.get(x, y) as f64 / 3.0))?;
        }
    }
    let t = within_time(start, Duration::from_secs(10))?;
    Ok(format!("50 masks exact, worst Euclidean deviation {:.1}% in {t:.2?}", worst * 100.0))
}

// Moments.

/// Agreement to `tol` relative to the larger operand or to `scale`, the sum
/// of absolute summands (moments that cancel to ~0 have no magnitude of
/// their own).
fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

struct MomentOracle {
    area: f64,
    perimeter: f64,
    imax: f64,
    imin: f64,
    dmax: f64,
    dmin: f64,
    axis_dmax: f64,
    axis_dmin: f64,
}

fn moment_oracle(mask: &BinaryMask) -> MomentOracle {
    let (w, h) = (mask.width(), mask.height());
    let on = |x: isize, y: isize| x >= 0 && y >= 0 && x < w as isize && y < h as isize && mask.get(x as usize, y as usize);
    let pts: Vec<(f64, f64)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| mask.get(x, y)).map(|(x, y)| (x as f64, y as f64)).collect();
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        a += (x - cx) * (x - cx);
        c += (y - cy) * (y - cy);
        b += (x - cx) * (y - cy);
    }
    // Eigenvalues of [[a, b], [b, c]] from trace and determinant.
    let half_tr = (a + c) / 2.0;
    let det = a * c - b * b;
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    let (imax, imin) = (half_tr + disc, det / (half_tr + disc));
    let mut boundary = Vec::new();
    for &(x, y) in &pts {
        let (xi, yi) = (x as isize, y as isize);
        if !(on(xi - 1, yi) && on(xi + 1, yi) && on(xi, yi - 1) && on(xi, yi + 1)) {
            boundary.push((x, y));
        }
    }
    let r: Vec<f64> = boundary.iter().map(|&(x, y)| (x - cx).hypot(y - cy)).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, v: &mut dyn Iterator<Item = f64>| v.fold(init, f);
    let ax = |p: &(f64, f64)| (p.0 - cx).abs();
    let ay = |p: &(f64, f64)| (p.1 - cy).abs();
    MomentOracle {
        area: n,
        perimeter: boundary.len() as f64,
        imax,
        imin,
        dmax: fold(f64::max, 0.0, &mut r.iter().copied()),
        dmin: fold(f64::min, f64::INFINITY, &mut r.iter().copied()),
        axis_dmax: fold(f64::max, 0.0, &mut pts.iter().map(ax)).hypot(fold(f64::max, 0.0, &mut pts.iter().map(ay))),
        axis_dmin: fold(f64::min, f64::INFINITY, &mut pts.iter().map(ax))
            .hypot(fold(f64::min, f64::INFINITY, &mut pts.iter().map(ay))),
    }
}

fn moments_oracle() -> Outcome {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut tested = 0;
    while tested < 100 {
        let mask = random_mask(&mut rng, 72, 60);
        let o = moment_oracle(&mask);
        if o.area < 3.0 || o.imin <= 1e-6 * o.imax || o.dmin < 1e-3 || o.axis_dmin < 1e-3 {
            continue;
        }
        tested += 1;
        let pts: Vec<(f64, f64)> = mask.foreground().map(|(x, y)| (x as f64, y as f64)).collect();
        let (cx, cy) = (raw_moment(&mask, 1, 0) / o.area, raw_moment(&mask, 0, 1) / o.area);
        for p in 0..=3u32 {
            for q in 0..=3u32 {
                let terms = pts.iter().map(|&(x, y)| x.powi(p as i32) * y.powi(q as i32));
                let (sum, scale) = terms.fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
                let got = raw_moment(&mask, p, q);
                check(close(got, sum, scale, TOL), || format!("M{p}{q}: {got} vs {sum}"))?;
                let terms = pts.iter().map(|&(x, y)| (x - cx).powi(p as i32) * (y - cy).powi(q as i32));
                let (sum, scale) = terms.fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
                let got = central_moment(&mask, p, q).map_err(|e| e.to_string())?;
                check(close(got, sum, scale, TOL), || format!("mu{p}{q}: {got} vs {sum}"))?;
            }
        }
        let (imax, imin) = principal_moments(&mask).map_err(|e| e.to_string())?;
        check(close(imax, o.imax, 0.0, TOL) && close(imin, o.imin, 0.0, TOL), || {
            format!("principal ({imax}, {imin}) vs ({}, {})", o.imax, o.imin)
        })?;
        let (dmax, dmin) = radial_extents(&mask, ExtentMode::Radial).map_err(|e| e.to_string())?;
        check(close(dmax, o.dmax, 0.0, TOL) && close(dmin, o.dmin, 0.0, TOL), || {
            format!("radial ({dmax}, {dmin}) vs ({}, {})", o.dmax, o.dmin)
        })?;
        let (dmax, dmin) = radial_extents(&mask, ExtentMode::PerAxis).map_err(|e| e.to_string())?;
        check(close(dmax, o.axis_dmax, 0.0, TOL) && close(dmin, o.axis_dmin, 0.0, TOL), || {
            format!("per-axis ({dmax}, {dmin}) vs ({}, {})", o.axis_dmax, o.axis_dmin)
        })?;
        let (a, p) = (o.area, o.perimeter);
        let want = [
            p.powi(4) / o.imin,
            a * a / o.imax,
            a * a / o.imin,
            o.dmax / o.dmin,
            p * p / a,
            (o.imin + o.imax) / (a * a),
            (o.imax - o.imin) / (o.imax + o.imin),
        ];
        let got = static_vector(&mask).map_err(|e| e.to_string())?.values;
        for i in 0..7 {
            // The elongation is a difference; bound it by its operands.
            let scale = if i == 6 { 1.0 } else { 0.0 };
            check(close(got[i], want[i], scale, TOL), || format!("v{}: {} vs {}", i + 1, got[i], want[i]))?;
        }
    }
    for n in 2..=40 {
        let square = BinaryMask::from_fn(50, 50, |x, y| (5..5 + n).contains(&x) && (5..5 + n).contains(&y));
        let v = static_vector(&square).map_err(|e| e.to_string())?;
        check(v.values[6] == 0.0, || format!("{n}x{n} square elongation {}", v.values[6]))?;
    }
    let t = within_time(start, Duration::from_secs(5))?;
    Ok(format!("100 masks within {TOL:e}, squares exact in {t:.2?}"))
}

// Horn-Schunck.

fn gray(w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) -> Image {
    Image::from_fn_gray(w, h, f).unwrap()
}

fn horn_schunck_checks() -> Outcome {
    let start = Instant::now();
    let (w, h) = (176, 144);
    let p = FlowParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let noise = gray(w, h, |_, _| rng.gen());
    let flow = horn_schunck(&noise, &noise, &p).map_err(|e| e.to_string())?;
    check(flow.u().iter().chain(flow.v()).all(|&c| c == 0.0), || "identical frames give nonzero flow".into())?;

    let f1 = gray(w, h, |x, _| (x + 10) as u8);
    let f2 = gray(w, h, |x, _| (x + 9) as u8);
    let flow = horn_schunck(&f1, &f2, &p).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for y in 10..h - 10 {
        for x in 10..w - 10 {
            let (u, v) = flow.at(x, y);
            worst = worst.max((u - 1.0).abs());
            check((u - 1.0).abs() <= 0.2 && v.abs() <= 0.2, || format!("ramp flow at ({x},{y}) = ({u}, {v})"))?;
        }
    }

    for pair in 0..20 {
        let a = gray(w, h, |_, _| rng.gen());
        let (sx, sy) = (rng.gen_range(-2i32..=2), rng.gen_range(-2i32..=2));
        let b = gray(w, h, |x, y| {
            let (ox, oy) = ((x as i32 - sx).clamp(0, w as i32 - 1), (y as i32 - sy).clamp(0, h as i32 - 1));
            a.sample(ox as usize, oy as usize).saturating_add(rng.gen_range(0..6))
        });
        let mut hs = HornSchunck::new(&a, &b, p.alpha).map_err(|e| e.to_string())?;
        hs.step();
        let e1 = hs.energy();
        for _ in 1..p.iterations {
            hs.step();
        }
        let e100 = hs.energy();
        check(e100 <= e1, || format!("pair {pair}: energy rose from {e1} to {e100}"))?;
    }
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!("zero flow exact, ramp |u-1| <= {worst:.3}, energy non-increasing on 20 pairs in {t:.2?}"))
}

// Centroid transition.

fn record(x: f64, y: f64) -> TrackRecord {
    TrackRecord { bbox: None, centroid: Some((x, y)), area: 1 }
}

fn centroid_transitions() -> Outcome {
    let cases = [
        ((127.9951, 91.7437), (133.0188, 83.4235), 9.7192),
        ((156.5291, 167.0471), (202.4838, 93.6265), 85.6165),
        ((131.5066, 39.8289), (128.6642, 127.8271), 88.0441),
    ];
    let mut lines = Vec::new();
    let mut failed = false;
    for ((x0, y0), (x1, y1), want) in cases {
        let got = centroid_transition(&record(x0, y0), &record(x1, y1)).map_err(|e| e.to_string())?;
        let ok = (got - want).abs() <= 1e-3;
        failed |= !ok;
        lines.push(format!("{want} -> {got:.4}{}", if ok { "" } else { " MISMATCH" }));
    }
    let detail = lines.join("; ");
    if failed {
        Err(detail)
    } else {
        Ok(detail)
    }
}

// KNN and k-fold.

fn knn_oracle(rows: &[(Vec<f64>, u32)], q: &[f64], p: &KnnParams) -> u32 {
    let w = vec![1.0; q.len()];
    let mut d: Vec<(f64, usize)> =
        rows.iter().enumerate().map(|(i, r)| (metric_distance(p.metric, q, &r.0, &w).unwrap(), i)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nn = &d[..p.k];
    let mut labels: Vec<u32> = nn.iter().map(|&(_, i)| rows[i].1).collect();
    labels.sort();
    labels.dedup();
    let count = |l: u32| nn.iter().filter(|&&(_, i)| rows[i].1 == l).count();
    let inv = |l: u32, power: i32| -> f64 {
        nn.iter().filter(|&&(_, i)| rows[i].1 == l).map(|&(d, _)| if d == 0.0 { f64::INFINITY } else { d.powi(-power) }).sum()
    };
    // Candidates in ascending label order; strict improvement keeps the lowest on ties.
    let best_by = |key: &dyn Fn(u32) -> (f64, f64)| {
        let mut best = labels[0];
        for &l in &labels[1..] {
            if key(l).partial_cmp(&key(best)) == Some(std::cmp::Ordering::Greater) {
                best = l;
            }
        }
        best
    };
    match p.voting {
        Voting::Majority => best_by(&|l| (count(l) as f64, inv(l, 1))),
        Voting::InverseDistance { power } => {
            let exact = |l: u32| nn.iter().filter(|&&(d, i)| d == 0.0 && rows[i].1 == l).count();
            if labels.iter().any(|&l| exact(l) > 0) {
                best_by(&|l| (exact(l) as f64, 0.0))
            } else {
                best_by(&|l| (inv(l, power), 0.0))
            }
        }
    }
}

fn knn_and_folds() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut instances = 0;
    for kind in [Kind::Static7, Kind::Dynamic12, Kind::Sequence60] {
        for voting in [Voting::Majority, Voting::InverseDistance { power: 2 }] {
            for i in 0..167 {
                let n = rng.gen_range(1..40);
                // Coarse values make distance ties and exact matches common.
                let coarse = i % 2 == 0;
                let value = |rng: &mut ChaCha8Rng| if coarse { rng.gen_range(0..3) as f64 } else { rng.gen_range(-5.0..5.0) };
                let rows: Vec<(Vec<f64>, u32)> =
                    (0..n).map(|_| ((0..kind.dim()).map(|_| value(&mut rng)).collect(), rng.gen_range(1..5))).collect();
                let mut db = GestureDatabase::new(kind);
                for (f, l) in &rows {
                    db.push(f.clone(), *l, None).map_err(|e| e.to_string())?;
                }
                let q: Vec<f64> =
                    if coarse && rng.gen_bool(0.3) { rows[0].0.clone() } else { (0..kind.dim()).map(|_| value(&mut rng)).collect() };
                let metric = if rng.gen_bool(0.5) { Metric::L1 } else { Metric::Euclidean };
                let p = KnnParams { k: rng.gen_range(1..=n.min(9)), voting, metric, weights: None };
                let got = knn(&db, &q, &p).map_err(|e| e.to_string())?.label;
                let want = knn_oracle(&rows, &q, &p);
                check(got == want, || format!("{kind:?} {voting:?} k={}: got {got}, oracle {want}", p.k))?;
                instances += 1;
            }
        }
    }
    let mut splits = 0;
    for k in 2..=10usize {
        for n in k..=200usize {
            let folds = kfold_split(n, k, n as u64 * 31 + k as u64).map_err(|e| e.to_string())?;
            check(folds.len() == n && folds.iter().all(|&f| f < k), || format!("n={n} k={k}: not a partition"))?;
            let mut sizes = vec![0usize; k];
            for &f in &folds {
                sizes[f] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            check(hi - lo <= 1, || format!("n={n} k={k}: fold sizes {sizes:?}"))?;
            splits += 1;
        }
    }
    let t = start.elapsed();
    Ok(format!("{instances} KNN instances match, {splits} (n,k) splits balanced in {t:.2?}"))
}

// Synthetic corpus benchmark and gate routing.

fn class_of(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().next().map(|c| c.as_os_str().to_string_lossy().into_owned()).unwrap_or_default()
}

/// Mean per-class rate, counting samples that failed extraction as misses.
fn recognition(db: &GestureDatabase, report: &IngestReport, root: &Path, cfg: &PipelineConfig) -> std::result::Result<(f64, String), String> {
    let knn = KnnParams { k: 1, ..cfg.classifier.knn.clone() };
    let cv = cross_validate(db, &knn, cfg.classifier.folds, cfg.classifier.seed).map_err(|e| e.to_string())?;
    let mut failed: BTreeMap<u32, usize> = BTreeMap::new();
    for (path, _) in &report.failures {
        if let Some(l) = cfg.label_of(&class_of(path, root)) {
            *failed.entry(l).or_default() += 1;
        }
    }
    let mut rates = Vec::new();
    for (i, &l) in cv.labels.iter().enumerate() {
        let total: usize = cv.confusion[i].iter().sum::<usize>() + failed.remove(&l).unwrap_or(0);
        rates.push(cv.confusion[i][i] as f64 / total as f64);
    }
    rates.extend(failed.values().map(|_| 0.0));
    let avg = rates.iter().sum::<f64>() / rates.len() as f64;
    let lowest = rates.iter().cloned().fold(1.0, f64::min);
    Ok((avg, format!("{:.1}% (lowest class {:.0}%, {} failed)", avg * 100.0, lowest * 100.0, report.failures.len())))
}

fn corpus_benchmark(root: &Path, cfg: &PipelineConfig) -> Outcome {
    let start = Instant::now();
    write_dataset(root, 10, 0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut failed = false;
    for (dir, kind) in [("static", Kind::Static7), ("small", Kind::Dynamic12), ("large", Kind::Sequence60)] {
        let sub = root.join(dir);
        let (db, report) = build_db(&sub, kind, cfg).map_err(|e| e.to_string())?;
        let (avg, text) = recognition(&db, &report, &sub, cfg)?;
        failed |= avg < 0.90;
        parts.push(format!("{dir} {text}"));
    }
    let t = start.elapsed();
    failed |= t >= Duration::from_secs(300);
    let detail = format!("{} in {t:.1?}", parts.join(", "));
    if failed {
        Err(detail)
    } else {
        Ok(detail)
    }
}

fn gate_routing(root: &Path, cfg: &PipelineConfig) -> Outcome {
    let mut samples = Vec::new();
    for (dir, kind, want) in [("small", Kind::Dynamic12, GateDecision::Small), ("large", Kind::Sequence60, GateDecision::Large)] {
        let sub = root.join(dir);
        if !sub.is_dir() {
            write_dataset(root, 10, 0).map_err(|e| e.to_string())?;
        }
        for s in scan(&sub, kind, cfg).map_err(|e| e.to_string())? {
            samples.push((s, want));
        }
    }
    let results: Vec<_> = samples
        .par_iter()
        .map(|(s, want)| {
            let got = load_frames(&s.path).and_then(|seq| gate(&seq, cfg));
            (s, want, got)
        })
        .collect();
    let mut wrong = Vec::new();
    let (mut small_max, mut large_min) = (0.0f64, f64::INFINITY);
    for (s, want, got) in &results {
        match got {
            Ok(g) if g.decision == **want => match want {
                GateDecision::Small => small_max = small_max.max(g.transition),
                GateDecision::Large => large_min = large_min.min(g.transition),
            },
            Ok(g) => wrong.push(format!("{}/{} -> {:?} ({:.1})", s.class, s.person, g.decision, g.transition)),
            Err(e) => wrong.push(format!("{}/{}: {e}", s.class, s.person)),
        }
    }
    let detail = format!(
        "{}/{} routed correctly (small max {small_max:.1} px, large min {large_min:.1} px)",
        results.len() - wrong.len(),
        results.len()
    );
    if wrong.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; wrong: {}", wrong.join(", ")))
    }
}

// Histogram intersection.

fn histogram_intersection_props() -> Outcome {
    let config = Config { cases: 2000, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let hist = prop::collection::vec(0u64..40, 1..64).prop_filter("nonzero mass", |h| h.iter().sum::<u64>() > 0);
    runner
        .run(&hist, |h| {
            prop_assert_eq!(histogram_intersection(&h, &h).unwrap(), 1.0);
            Ok(())
        })
        .map_err(|e| format!("HI(h,h): {e}"))?;
    // Equal-mass pairs: move `amount` units from one bin to another (0 keeps them equal).
    let pair = (hist, any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0u64..5).prop_map(|(h1, a, b, amount)| {
        let mut h2 = h1.clone();
        let (i, j) = (a.index(h1.len()), b.index(h1.len()));
        let moved = amount.min(h2[i]);
        h2[i] -= moved;
        h2[j] += moved;
        (h1, h2)
    });
    runner
        .run(&pair, |(h1, h2)| {
            let hi = histogram_intersection(&h1, &h2).unwrap();
            prop_assert_eq!(hi == 1.0, h1 == h2, "HI {} for {:?} vs {:?}", hi, h1, h2);
            Ok(())
        })
        .map_err(|e| format!("equal mass: {e}"))?;
    let shuffled = prop::collection::vec(0u64..40, 2..64)
        .prop_filter("nonzero mass", |h| h.iter().sum::<u64>() > 0)
        .prop_shuffle()
        .prop_flat_map(|h1| (Just(h1.clone()), Just(h1).prop_shuffle()));
    runner
        .run(&shuffled, |(h1, h2)| {
            let hi = histogram_intersection(&h1, &h2).unwrap();
            prop_assert_eq!(hi == 1.0, h1 == h2);
            Ok(())
        })
        .map_err(|e| format!("permuted: {e}"))?;
    Ok("HI(h,h) = 1 and equal-mass HI = 1 iff equal over 6000 generated cases".into())
}

// Control link.

fn control_link() -> Outcome {
    let mut pairs = 0;
    for n in 1..=64 {
        for i in 1..=n {
            let msg = encode(i, n).map_err(|e| e.to_string())?;
            check(decode(&msg).map_err(|e| e.to_string())? == i, || format!("round trip {i}/{n}"))?;
            pairs += 1;
        }
    }
    let names = ["wave", "bow", "clap", "nod", "point", "sit"].map(String::from).to_vec();
    let table = GestureTable::new(names).map_err(|e| e.to_string())?;
    let server = RobotServer::bind("127.0.0.1:0", table).map_err(|e| e.to_string())?.spawn().map_err(|e| e.to_string())?;
    let port = server.addr().port();
    check(encode(3, 6).unwrap() == b"0,0,1,0,0,0\n", || "class 3 of 6 does not encode as 0,0,1,0,0,0".into())?;
    let reply = send("127.0.0.1", port, 3, 6, Duration::from_secs(2)).map_err(|e| e.to_string())?;
    check(reply == "ACK clap", || format!("class 3 reply {reply:?}"))?;
    let mut worst = Duration::ZERO;
    for i in 1..=6 {
        let t = Instant::now();
        send("127.0.0.1", port, i, 6, Duration::from_secs(2)).map_err(|e| e.to_string())?;
        worst = worst.max(t.elapsed());
    }
    check(worst < Duration::from_millis(50), || format!("loopback latency {worst:?}"))?;

    let stream = TcpStream::connect(("127.0.0.1", port)).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(Duration::from_secs(2))).map_err(|e| e.to_string())?;
    let mut writer = stream.try_clone().map_err(|e| e.to_string())?;
    writer.write_all(b"0,1,1,0,0,0\n\n0,x,1\n0,0,0,0,0,0,1\n0,0,1,0,0,0\n").map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(stream);
    let expected = ["ERR not one-hot", "ERR empty", "ERR not an integer: \"x\"", "ERR unknown gesture 7", "ACK clap"];
    for want in expected {
        let mut line = String::new();
        reader.read_line(&mut line).map_err(|e| e.to_string())?;
        check(line.trim_end() == want, || format!("expected {want:?}, got {line:?}"))?;
    }
    check(server.performed() == ["clap", "wave", "bow", "clap", "nod", "point", "sit", "clap"], || {
        format!("performed {:?}", server.performed())
    })?;
    check(matches!(send("127.0.0.1", port, 7, 6, Duration::from_secs(1)), Err(Error::Argument(_))), || {
        "class 7 of 6 was not rejected locally".into()
    })?;
    server.shutdown().map_err(|e| e.to_string())?;
    let down = std::net::TcpListener::bind("127.0.0.1:0").and_then(|l| l.local_addr()).map_err(|e| e.to_string())?.port();
    check(matches!(send("127.0.0.1", down, 1, 6, Duration::from_secs(1)), Err(Error::Transport(_))), || {
        "sending to a closed port did not fail with a transport error".into()
    })?;
    Ok(format!("{pairs} round trips, ACK clap for 0,0,1,0,0,0, ERR replies in order, latency {worst:.1?}"))
}

fn main() {
    let corpus = tempfile::tempdir().expect("temp dir");
    let cfg = PipelineConfig::default();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("skin intervals exact", Box::new(skin_intervals)),
        ("chamfer DT oracle equivalence", Box::new(chamfer_oracle)),
        ("moments oracle equivalence", Box::new(moments_oracle)),
        ("Horn-Schunck zero flow, ramp, energy", Box::new(horn_schunck_checks)),
        ("centroid transition reference values", Box::new(centroid_transitions)),
        ("KNN oracle and k-fold partitions", Box::new(knn_and_folds)),
        ("synthetic corpus 10-fold recognition", Box::new(|| corpus_benchmark(corpus.path(), &cfg))),
        ("amplitude gate routing", Box::new(|| gate_routing(corpus.path(), &cfg))),
        ("histogram intersection properties", Box::new(histogram_intersection_props)),
        ("control link", Box::new(control_link)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{:>2}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failures} failed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
