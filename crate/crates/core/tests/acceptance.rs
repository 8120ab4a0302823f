//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapebench::baselines::{
    build_similarity_matrix, embed_row, fit_embedding, mean_shape, optimal_threshold, retrieve, similarity_row,
    SimilarityMode,
};
use shapebench::dataset::{Frame, Split};
use shapebench::metrics::{chamfer, fscore_sweep, iou, point_distances, precision_recall_f};
use shapebench::pipeline::{self, Method, RunConfig};
use shapebench::shape::synth::{generate_synthetic, Recipe, ShapeSpec};
use shapebench::shape::{
    marching_cubes, rotate_mesh, sample_surface, voxelize_mesh, PointCloud, Pose, Vec3, VoxelGrid,
};
use shapebench::stats::{ks_statistic, ks_two_sample, EvalReport};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_grid(rng: &mut ChaCha8Rng, res: usize, fill: f64) -> VoxelGrid {
    let mut g = VoxelGrid::from_fn(res, |_, _, _| rng.random_bool(fill)).unwrap();
    g.set_index(0, true);
    g
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud::from_arrays(&pts).unwrap()
}

fn metric_identities() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..100 {
        let a = random_grid(&mut rng, 16, 0.3);
        let b = random_grid(&mut rng, 16, 0.3);
        ensure(iou(&a, &a).unwrap() == 1.0, format!("iou(a,a) != 1 at {i}"))?;
        ensure(
            iou(&a, &b).unwrap() == iou(&b, &a).unwrap(),
            format!("iou asymmetric at {i}"),
        )?;
        let x = random_cloud(&mut rng, 300);
        let y = random_cloud(&mut rng, 300);
        ensure(chamfer(&x, &x).unwrap() == 0.0, format!("chamfer(x,x) != 0 at {i}"))?;
        ensure(
            chamfer(&x, &y).unwrap() == chamfer(&y, &x).unwrap(),
            format!("chamfer asymmetric at {i}"),
        )?;
        let p = precision_recall_f(&x, &x, 0.01).unwrap();
        ensure(
            (p.precision, p.recall, p.fscore) == (100.0, 100.0, 100.0),
            format!("PRF(x,x) = {p:?} at {i}"),
        )?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), format!("took {t:?}"))?;
    Ok(format!("100 pairs in {:.2}s", t.as_secs_f64()))
}

fn brute_force_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = random_cloud(&mut rng, 500);
        let y = random_cloud(&mut rng, 500);
        let fast = point_distances(&x, &y).unwrap();
        for (p, f) in x.points().iter().zip(&fast) {
            let slow = y.points().iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max((slow - f).abs());
        }
    }
    ensure(worst <= 1e-12, format!("point distance error {worst:e}"))?;
    for i in 0..50 {
        let a = random_grid(&mut rng, 16, 0.4);
        let b = random_grid(&mut rng, 16, 0.4);
        let (mut inter, mut union) = (0, 0);
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let (p, q) = (a.get(x, y, z), b.get(x, y, z));
                    inter += (p && q) as usize;
                    union += (p || q) as usize;
                }
            }
        }
        ensure(
            iou(&a, &b).unwrap() == inter as f64 / union as f64,
            format!("iou differs from counting at {i}"),
        )?;
    }
    for i in 0..50 {
        let a: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 20.0).round()).collect();
        let b: Vec<f64> = (0..150).map(|_| (rng.random::<f64>() * 22.0).round()).collect();
        let mut d = 0.0f64;
        for &x in a.iter().chain(&b) {
            let fa = a.iter().filter(|&&v| v <= x).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&v| v <= x).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        ensure(ks_statistic(&a, &b) == d, format!("KS D differs from ECDF scan at {i}"))?;
    }
    Ok(format!("max point distance error {worst:e}"))
}

fn fscore_semantics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ds: Vec<f64> = (1..=30).map(|i| i as f64 * 0.005).collect();
    let mut zero_cases = 0;
    for i in 0..50 {
        let x = random_cloud(&mut rng, 200);
        // shrink y toward a corner so low thresholds give P or R = 0
        let y = PointCloud::new(random_cloud(&mut rng, 200).points().iter().map(|p| p * 0.3).collect()).unwrap();
        let sweep = fscore_sweep(&x, &y, &ds).unwrap();
        for w in sweep.windows(2) {
            ensure(w[1].1.fscore >= w[0].1.fscore, format!("F decreased at pair {i}"))?;
        }
        for (_, p) in &sweep {
            if p.precision == 0.0 || p.recall == 0.0 {
                zero_cases += 1;
                ensure(p.fscore == 0.0, format!("F = {} with P or R = 0", p.fscore))?;
            } else {
                let h = 2.0 * p.precision * p.recall / (p.precision + p.recall);
                ensure(
                    (p.fscore - h).abs() <= 1e-12,
                    format!("harmonic mean off by {}", p.fscore - h),
                )?;
            }
        }
    }
    // a far-away reconstruction has P = R = 0 at small d
    let far = PointCloud::from_arrays(&[[5.0, 5.0, 5.0]]).unwrap();
    let p = precision_recall_f(&random_cloud(&mut rng, 10), &far, 0.01).unwrap();
    ensure(p.precision == 0.0 && p.fscore == 0.0, "far reconstruction scored")?;
    Ok(format!("50 sweeps, {zero_cases} zero cases"))
}

fn chamfer_outlier_witness() -> Check {
    let mut gt = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                gt.push([i as f64 * 0.1, j as f64 * 0.1, k as f64 * 0.1]);
            }
        }
    }
    // both reconstructions miss exactly one point at d = 0.01; one misses by a hair, one is an outlier
    let mut near = gt.clone();
    near[555][0] += 0.011;
    let mut outlier = gt.clone();
    outlier[999] = [1.4, 0.9, 0.9];
    let gt = PointCloud::from_arrays(&gt).unwrap();
    let near = PointCloud::from_arrays(&near).unwrap();
    let outlier = PointCloud::from_arrays(&outlier).unwrap();
    let f_near = precision_recall_f(&gt, &near, 0.01).unwrap().fscore;
    let f_out = precision_recall_f(&gt, &outlier, 0.01).unwrap().fscore;
    let cd_near = chamfer(&gt, &near).unwrap();
    let cd_out = chamfer(&gt, &outlier).unwrap();
    ensure(
        (f_near - f_out).abs() <= 1e-9,
        format!("F differs: {f_near} vs {f_out}"),
    )?;
    let rel = (cd_out - cd_near).abs() / cd_near.min(cd_out);
    ensure(rel >= 0.2, format!("CD differs by only {:.1}%", rel * 100.0))?;
    Ok(format!("F = {f_near:.3} both, CD {cd_near:.2e} vs {cd_out:.2e}"))
}

fn threshold_oracle() -> Check {
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 20.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in 0..50 {
        let n = rng.random_range(1..8);
        let base = random_grid(&mut rng, 8, 0.4);
        let members: Vec<VoxelGrid> = (0..n)
            .map(|_| {
                let mut g = base.clone();
                for i in 0..g.len() {
                    if rng.random_bool(0.2) {
                        g.set_index(i, !g.get_index(i));
                    }
                }
                g
            })
            .collect();
        let refs: Vec<&VoxelGrid> = members.iter().collect();
        let got = optimal_threshold(&mean_shape(&refs).unwrap(), &refs, &grid).unwrap();

        // exhaustive search from raw occupancy counts
        let len = members[0].len();
        let counts: Vec<usize> = (0..len)
            .map(|i| members.iter().filter(|m| m.get_index(i)).count())
            .collect();
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for &tau in &grid {
            let mut total = 0.0;
            for m in &members {
                let (mut inter, mut union) = (0usize, 0usize);
                for (i, &count) in counts.iter().enumerate() {
                    let p = count as f64 / n as f64 > tau;
                    let q = m.get_index(i);
                    inter += (p && q) as usize;
                    union += (p || q) as usize;
                }
                total += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            }
            let avg = total / n as f64;
            if avg > best.1 {
                best = (tau, avg);
            }
        }
        ensure(
            got.tau == best.0 && (got.mean_iou - best.1).abs() <= 1e-12,
            format!(
                "cluster {c}: got tau {} / {}, exhaustive {} / {}",
                got.tau, got.mean_iou, best.0, best.1
            ),
        )?;
    }
    let mut a = VoxelGrid::new(8).unwrap();
    a.set(1, 1, 1, true);
    let mut ab = a.clone();
    ab.set(5, 5, 5, true);
    let members = [&a, &ab];
    let worked = optimal_threshold(&mean_shape(&members).unwrap(), &members, &grid).unwrap();
    ensure(worked.tau == 0.05, format!("{{a}}/{{a,b}} gave tau {}", worked.tau))?;
    ensure(
        worked.mean_iou == 0.75,
        format!("{{a}}/{{a,b}} mean IoU {}", worked.mean_iou),
    )?;
    Ok("50 clusters match, worked example tau = 0.05".into())
}

fn desk_config(root: &Path) -> RunConfig {
    RunConfig {
        dataset: root.join("data"),
        output: root.join("out"),
        ..RunConfig::default()
    }
}

fn run_desk(root: &Path) -> Result<(RunConfig, EvalReport), String> {
    let cfg = desk_config(root);
    pipeline::run_gen(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_split(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_materialize(&cfg).map_err(|e| e.to_string())?;
    for m in [Method::Cluster, Method::Retrieval] {
        pipeline::run_fit(&cfg, m).map_err(|e| e.to_string())?;
    }
    pipeline::run_predict(&cfg).map_err(|e| e.to_string())?;
    let report = pipeline::evaluate_run(&cfg).map_err(|e| e.to_string())?;
    pipeline::emit_reports(&cfg, &report).map_err(|e| e.to_string())?;
    Ok((cfg, report))
}

fn oracle_dominance(cfg: &RunConfig, report: &EvalReport) -> Check {
    let split = Split::load(&cfg.dataset).map_err(|e| e.to_string())?;
    ensure(split.test.len() >= 64, format!("only {} test shapes", split.test.len()))?;
    let iou_of = |id: &str, m: &str| {
        report
            .entries()
            .iter()
            .find(|e| e.shape_id == id && e.method == m && e.metric == "iou")
            .map(|e| e.value)
    };
    let mut ok = 0;
    for id in &split.test {
        let (Some(o), Some(r)) = (iou_of(id, "oracle_nn"), iou_of(id, "retrieval")) else {
            return Err(format!("{id} missing from the report"));
        };
        ensure(o >= r, format!("{id}: oracle {o} < retrieval {r}"))?;
        ok += 1;
    }
    Ok(format!("{ok}/{} test shapes", split.test.len()))
}

fn oracle_miou(root: &Path, contamination: f64) -> Result<f64, String> {
    let cfg = RunConfig {
        contamination,
        methods: vec![Method::OracleNn],
        ..desk_config(root)
    };
    pipeline::run_gen(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_materialize(&cfg).map_err(|e| e.to_string())?;
    pipeline::run_predict(&cfg).map_err(|e| e.to_string())?;
    let report = pipeline::evaluate_run(&cfg).map_err(|e| e.to_string())?;
    let v = report.values("oracle_nn", "iou", None);
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

fn contamination_effect(tmp: &Path) -> Check {
    let full = oracle_miou(&tmp.join("c1"), 1.0)?;
    let none = oracle_miou(&tmp.join("c0"), 0.0)?;
    ensure(full == 1.0, format!("contamination 1: oracle mIoU {full}"))?;
    ensure(
        full - none >= 0.1,
        format!("drop only {:.3} ({full} → {none})", full - none),
    )?;
    Ok(format!("oracle mIoU {full:.3} → {none:.3}"))
}

fn embedding_fidelity() -> Check {
    let mut grids = Vec::new();
    for (c, recipe) in Recipe::ALL.iter().enumerate() {
        for i in 0..6 {
            let spec = ShapeSpec {
                class_id: recipe.to_string(),
                recipe: *recipe,
                jitter: 0.4,
                seed: (c * 100 + i) as u64,
                holdout: None,
            };
            let mesh = generate_synthetic(&spec).map_err(|e| e.to_string())?;
            grids.push(voxelize_mesh(&mesh, 16, true).map_err(|e| e.to_string())?);
        }
    }
    let (train, queries) = grids.split_at(40);
    let n = train.len();
    let sim = build_similarity_matrix(train).map_err(|e| e.to_string())?;
    let ids = (0..n).map(|i| i.to_string()).collect();
    let model = fit_embedding(&sim, n, ids).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let dd = (model.descriptor(i) - model.descriptor(j)).norm();
            let dr = (sim.row(i) - sim.row(j)).norm();
            worst = worst.max((dd - dr).abs());
        }
    }
    ensure(worst <= 1e-6, format!("distance error {worst:e}"))?;
    let mut checked = 0;
    for q in queries.iter().chain(train.iter()) {
        let row = similarity_row(q, train).map_err(|e| e.to_string())?;
        let got = retrieve(
            &model,
            &embed_row(&model, &row).map_err(|e| e.to_string())?,
            SimilarityMode::Euclidean,
        )
        .map_err(|e| e.to_string())?;
        let mut best = (0, f64::INFINITY);
        for i in 0..n {
            let d: f64 = row.iter().zip(sim.row(i).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        ensure(
            got == best.0,
            format!("query {checked}: retrieved {got}, brute force {}", best.0),
        )?;
        checked += 1;
    }
    Ok(format!("max distance error {worst:.1e}, {checked} queries agree"))
}

fn ks_calibration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a: Vec<f64> = (0..100).map(|_| rng.random()).collect();
    let same = ks_two_sample(&a, &a).unwrap();
    ensure(
        same.d_stat == 0.0 && same.p_value == 1.0,
        format!("identical samples: {same:?}"),
    )?;
    let lo = vec![0.1; 100];
    let hi = vec![0.9; 100];
    let disjoint = ks_two_sample(&lo, &hi).unwrap();
    ensure(
        disjoint.d_stat == 1.0 && disjoint.p_value < 1e-6,
        format!("disjoint: {disjoint:?}"),
    )?;
    let trials = 1000;
    let mut rejected = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        rejected += (ks_two_sample(&x, &y).unwrap().p_value < 0.05) as usize;
    }
    let rate = 100.0 * rejected as f64 / trials as f64;
    ensure((3.0..=8.0).contains(&rate), format!("rejection rate {rate}%"))?;
    Ok(format!("rejection rate {rate:.1}% at alpha 0.05"))
}

fn geometry_round_trip() -> Check {
    let res = 64;
    let pitch = 1.0 / res as f64;
    let center = Vec3::new(0.5, 0.5, 0.5);
    let sphere = VoxelGrid::from_fn(res, |x, y, z| {
        let p = Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * pitch;
        (p - center).norm() <= 0.4
    })
    .unwrap();
    let mesh = marching_cubes(&sphere);
    let cloud = sample_surface(&mesh, 10_000, 10).map_err(|e| e.to_string())?;
    let worst = cloud
        .points()
        .iter()
        .map(|p| ((p - center).norm() - 0.4).abs())
        .fold(0.0, f64::max);
    ensure(
        worst <= pitch,
        format!("point {worst:.4} from the sphere, pitch {pitch:.4}"),
    )?;
    let again = voxelize_mesh(&mesh, res, true).map_err(|e| e.to_string())?;
    let score = iou(&sphere, &again).unwrap();
    ensure(score >= 0.95, format!("re-voxelization IoU {score}"))?;
    Ok(format!("max deviation {worst:.4} (pitch {pitch:.4}), IoU {score:.4}"))
}

fn viewer_frame() -> Check {
    let mut checked = 0;
    for (i, recipe) in Recipe::ALL.iter().enumerate() {
        let spec = ShapeSpec {
            class_id: recipe.to_string(),
            recipe: *recipe,
            jitter: 0.4,
            seed: i as u64,
            holdout: None,
        };
        let mesh = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let object = voxelize_mesh(&rotate_mesh(&mesh, Pose::IDENTITY).unwrap(), 32, true).unwrap();
        let viewer = voxelize_mesh(&rotate_mesh(&mesh, Pose::new(0.0, 0.0).unwrap()).unwrap(), 32, true).unwrap();
        ensure(object == viewer, format!("{recipe}: identity viewer grid differs"))?;
        let quarter = Pose::new(90.0, 0.0).unwrap();
        let mut turned = mesh.clone();
        for _ in 0..4 {
            turned = rotate_mesh(&turned, quarter).unwrap();
        }
        let composed = voxelize_mesh(&turned, 32, true).unwrap();
        ensure(
            composed == object,
            format!("{recipe}: four quarter turns changed the grid"),
        )?;
        checked += 1;
    }
    // the same through the materialization stage
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        dataset: dir.path().to_path_buf(),
        classes: 2,
        shapes_per_class: 3,
        resolution: 16,
        low_resolution: 8,
        ..RunConfig::default()
    };
    pipeline::run_gen(&cfg).map_err(|e| e.to_string())?;
    let index = pipeline::run_materialize(&cfg).map_err(|e| e.to_string())?;
    let set = index.set(16, Frame::Object).unwrap();
    let manifest = shapebench::dataset::Manifest::load(&cfg.dataset).unwrap();
    for s in &manifest.shapes {
        let mesh = shapebench::ply::load_mesh(cfg.dataset.join(&s.mesh)).unwrap();
        let viewer = voxelize_mesh(&rotate_mesh(&mesh, Pose::new(0.0, 0.0).unwrap()).unwrap(), 16, true).unwrap();
        ensure(
            set.load_grid(&cfg.dataset, &s.id).unwrap() == viewer,
            format!("{}: stored grid differs", s.id),
        )?;
    }
    Ok(format!("{checked} recipes, {} stored grids", manifest.shapes.len()))
}

fn determinism(tmp: &Path) -> (Check, Option<(RunConfig, EvalReport)>) {
    let start = Instant::now();
    let first = match run_desk(&tmp.join("run1")) {
        Ok(r) => r,
        Err(e) => return (Err(e), None),
    };
    let one = start.elapsed();
    let second = run_desk(&tmp.join("run2"));
    let total = start.elapsed();
    let check = (|| {
        let second = second?;
        let stats = |cfg: &RunConfig| -> Result<Vec<(String, Vec<u8>)>, String> {
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(cfg.stats_dir())
                .map_err(|e| e.to_string())?
                .map(|e| {
                    let p = e.unwrap().path();
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            files.push((
                "report.json".into(),
                std::fs::read(cfg.report_path()).map_err(|e| e.to_string())?,
            ));
            Ok(files)
        };
        let (a, b) = (stats(&first.0)?, stats(&second.0)?);
        ensure(a.len() == b.len(), "different file sets")?;
        for ((na, da), (_, db)) in a.iter().zip(&b) {
            ensure(da == db, format!("{na} differs between runs"))?;
        }
        ensure(one < Duration::from_secs(300), format!("one run took {one:?}"))?;
        Ok(format!(
            "{} files identical, {:.1}s per run",
            a.len(),
            total.as_secs_f64() / 2.0
        ))
    })();
    (check, Some(first))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Check)> = vec![
        (1, "metric identities", metric_identities()),
        (2, "brute-force equivalence", brute_force_equivalence()),
        (3, "F-score semantics", fscore_semantics()),
        (4, "Chamfer outlier witness", chamfer_outlier_witness()),
        (5, "threshold search oracle", threshold_oracle()),
    ];
    // the desk runs of criterion 12 also serve criterion 6
    let (c12, desk) = determinism(tmp.path());
    results.push((
        6,
        "oracle NN dominance",
        match &desk {
            Some((cfg, report)) => oracle_dominance(cfg, report),
            None => Err("desk run failed".into()),
        },
    ));
    results.push((7, "contamination effect", contamination_effect(tmp.path())));
    results.push((8, "embedding fidelity", embedding_fidelity()));
    results.push((9, "KS calibration", ks_calibration()));
    results.push((10, "geometry round trip", geometry_round_trip()));
    results.push((11, "viewer frame", viewer_frame()));
    results.push((12, "end-to-end determinism", c12));

    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
