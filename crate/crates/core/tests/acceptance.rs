//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles here are written independently of the library code they
//! check (local heat-kernel series, nalgebra rotations, explicit EM loops).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rand_distr::StandardNormal;

use se3_diffuse::backbone::{
    atom2frame, frame_to_atoms, ideal_helix_frames, atoms_from_frames, l_2d, l_bb, IdealGeometry, Psi,
};
use se3_diffuse::igso3::{conditional_score, f_igso3, Igso3Table, TruncationConfig};
use se3_diffuse::pdb::{parse_backbone, write_pdb};
use se3_diffuse::rng::{stream, SimRng};
use se3_diffuse::schedules::{
    dsm_weights, RotationSchedule, RotationScheduleKind, Schedules, TranslationSchedule,
};
use se3_diffuse::se3::{
    center, reverse_walk, sample_reference, score_from_denoised, DenoisedScore, ForwardSampler, Frame, FrameSet,
    SimConfig,
};
use se3_diffuse::so3::{exp_vec, log_vec, random_unit_vector, rotation_angle, Mat3, UniformSo3Sampler};
use se3_diffuse::stats::ks_two_sample;
use se3_diffuse::tabulated::{linspace, trapezoid};
use se3_diffuse::toy::{ks_nearest_angle, nearest_grid_index, run_forward, run_reverse, DiscreteTarget, Record, ToyRunConfig};
use se3_diffuse::{Rotation, Vec3};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lib<T>(r: se3_diffuse::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn gaussian3(rng: &mut SimRng) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Heat-kernel character series, summed to a fixed 2000 terms with no early
/// stop.
fn series_f(omega: f64, t: f64) -> f64 {
    let half = 0.5 * omega;
    let s = half.sin();
    (0..2000)
        .map(|l| {
            let l = l as f64;
            let w = (2.0 * l + 1.0) * (-l * (l + 1.0) * t / 2.0).exp();
            let chi = if s.abs() < 1e-12 { 2.0 * l + 1.0 } else { ((l + 0.5) * omega).sin() / s };
            w * chi
        })
        .sum()
}

fn na(r: &Rotation) -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(*r.matrix())
}

/// Rotation angle from trace and skew part, without `acos`.
fn oracle_angle(m: &Mat3) -> f64 {
    let skew = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    (0.5 * skew.norm()).atan2(0.5 * (m.trace() - 1.0))
}

// 1
fn normalization() -> Outcome {
    let cfg = TruncationConfig::default();
    let omega = linspace(0.0, std::f64::consts::PI, 10_000);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in [0.05, 0.1, 0.5, 1.5, 4.0] {
        let ys = omega
            .iter()
            .map(|&w| Ok(f_igso3(w, t, &cfg)? * (1.0 - w.cos()) / std::f64::consts::PI))
            .collect::<se3_diffuse::Result<Vec<_>>>();
        let err = (trapezoid(&omega, &lib(ys)?) - 1.0).abs();
        parts.push(format!("t={t}: {err:.1e}"));
        worst = worst.max(err);
    }
    check(worst < 1e-4, format!("max |mass - 1| = {worst:.2e} < 1e-4 ({})", parts.join(", ")))
}

// 2
fn score_gradient() -> Outcome {
    let cfg = TruncationConfig::default();
    let uniform = UniformSo3Sampler::default();
    let mut rng = stream(2, 0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let t = [0.1, 0.5, 1.0][i % 3];
        let table = lib(Igso3Table::build(t, &cfg))?;
        let r0 = uniform.sample(&mut rng);
        let rt = table.sample(&r0, &mut rng);
        let score = lib(conditional_score(&r0, &rt, t, &cfg))?;
        let (a0, at) = (na(&r0), na(&rt));
        let log_p = |r: &Rotation3<f64>| series_f(oracle_angle((a0.inverse() * r).matrix()), t).ln();
        // orthonormal tangent basis R·hat(e_i) under tr(u vᵀ)/2
        let mut fd = Mat3::zeros();
        for k in 0..3 {
            let axis = Unit::new_normalize(Vec3::ith(k, 1.0));
            let plus = at * Rotation3::from_axis_angle(&axis, h);
            let minus = at * Rotation3::from_axis_angle(&axis, -h);
            let d = (log_p(&plus) - log_p(&minus)) / (2.0 * h);
            let mut e = Mat3::zeros();
            let (j, l) = ((k + 1) % 3, (k + 2) % 3);
            e[(l, j)] = 1.0;
            e[(j, l)] = -1.0;
            fd += at.matrix() * e * d;
        }
        let norm = |m: &Mat3| (0.5 * (m * m.transpose()).trace()).sqrt();
        worst = worst.max(norm(&(score - fd)) / norm(&fd));
    }
    check(worst < 1e-4, format!("max relative error {worst:.2e} < 1e-4 over 50 configurations"))
}

// 3
fn exp_log_roundtrip() -> Outcome {
    let mut rng = stream(3, 0);
    let mut worst_v: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for _ in 0..10_000 {
        let len = rng.random_range(1e-12..std::f64::consts::PI - 1e-3);
        let v = random_unit_vector(&mut rng) * len;
        let r = exp_vec(&v);
        worst_v = worst_v.max((log_vec(&r) - v).norm());
        let reference = Rotation3::from_scaled_axis(v);
        worst_r = worst_r.max((r.matrix() - reference.matrix()).norm());
    }
    check(
        worst_v < 1e-9 && worst_r < 1e-9,
        format!("max |log(exp v) - v| = {worst_v:.2e}, max |exp v - reference| = {worst_r:.2e}, both < 1e-9"),
    )
}

// 4
fn flat_limit() -> Outcome {
    let cfg = TruncationConfig::default();
    let mut sup: f64 = 0.0;
    for w in linspace(0.0, std::f64::consts::PI, 10_000) {
        sup = sup.max((lib(f_igso3(w, 16.0, &cfg))? - 1.0).abs());
    }
    let table = lib(Igso3Table::build(50.0, &cfg))?;
    let uniform = UniformSo3Sampler::default();
    let (mut ra, mut rb) = (stream(4, 0), stream(4, 1));
    let a: Vec<f64> = (0..100_000).map(|_| rotation_angle(&table.sample(&Rotation::identity(), &mut ra))).collect();
    let b: Vec<f64> = (0..100_000).map(|_| rotation_angle(&uniform.sample(&mut rb))).collect();
    let ks = ks_two_sample(&a, &b);
    check(sup < 1e-3 && ks < 0.02, format!("sup|f(.,16) - 1| = {sup:.2e} < 1e-3, KS(t=50, uniform) = {ks:.4} < 0.02"))
}

// 5
fn toy_agreement() -> Outcome {
    let target = lib(DiscreteTarget::random(3, 0))?;
    let run = ToyRunConfig { n_paths: 5000, t_final: 4.0, n_steps: 200, seed: 5, ..Default::default() };
    let grid = run.time_grid();
    let mut indices = vec![1];
    indices.extend([1.0, 2.0, 3.0].map(|t| nearest_grid_index(&grid, t)));
    let record = Record::Indices(indices.clone());
    let fwd = lib(run_forward(&target, &run, &record))?;
    let rev = lib(run_reverse(&target, &run, &TruncationConfig::default(), &record))?;
    let mut ok = true;
    let mut parts = Vec::new();
    for &i in &indices {
        let ks = ks_nearest_angle(fwd.at_index(i).unwrap(), rev.at_index(i).unwrap(), &target);
        ok &= ks < 0.05;
        let label = if i == 1 { "terminal " } else { "" };
        parts.push(format!("{label}t={:.4}: {ks:.4}", grid[i]));
    }
    check(ok, format!("KS < 0.05 at each of [{}]", parts.join(", ")))
}

// 6
fn semigroup() -> Outcome {
    let cfg = TruncationConfig::default();
    let (t1, t2, t3) = (lib(Igso3Table::build(0.3, &cfg))?, lib(Igso3Table::build(0.5, &cfg))?, lib(Igso3Table::build(0.8, &cfg))?);
    let (mut ra, mut rb) = (stream(6, 0), stream(6, 1));
    let id = Rotation::identity();
    let chained: Vec<f64> = (0..100_000)
        .map(|_| {
            let mid = t1.sample(&id, &mut ra);
            rotation_angle(&t2.sample(&mid, &mut ra))
        })
        .collect();
    let single: Vec<f64> = (0..100_000).map(|_| rotation_angle(&t3.sample(&id, &mut rb))).collect();
    let ks = ks_two_sample(&chained, &single);
    check(ks < 0.02, format!("KS(0.3 then 0.5, 0.8) = {ks:.4} < 0.02"))
}

// 7
fn vp_sde() -> Outcome {
    let ts = TranslationSchedule::default();
    let x0 = Vec3::new(1.0, -2.0, 0.5);
    let (n_paths, n_steps) = (100_000usize, 5000usize);
    let ds = 1.0 / n_steps as f64;
    let checkpoints = [(n_steps / 4, 0.25), (n_steps / 2, 0.5), (n_steps, 1.0)];
    let mut sums = vec![Vec3::zeros(); checkpoints.len()];
    let mut sample_sq = vec![Vec3::zeros(); checkpoints.len()];
    let mut rng = stream(7, 0);
    for _ in 0..n_paths {
        let mut x = x0;
        let mut next = 0;
        for k in 0..n_steps {
            let s = k as f64 * ds;
            let beta = ts.beta(s);
            x += -0.5 * beta * x * ds + gaussian3(&mut rng) * (beta * ds).sqrt();
            if k + 1 == checkpoints[next].0 {
                sums[next] += x;
                sample_sq[next] += x.component_mul(&x);
                next += 1;
            }
        }
    }
    let n = n_paths as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, &(_, s)) in checkpoints.iter().enumerate() {
        let mean = sums[j] / n;
        let var = (sample_sq[j] / n - mean.component_mul(&mean)) * (n / (n - 1.0));
        let want_mean = x0 * (-0.5 * ts.integrated(s)).exp();
        let want_var = 1.0 - (-ts.integrated(s)).exp();
        let se_mean = (want_var / n).sqrt();
        let se_var = want_var * (2.0 / (n - 1.0)).sqrt();
        let z_mean = (mean - want_mean).abs().max() / se_mean;
        let z_var = (var - Vec3::repeat(want_var)).abs().max() / se_var;
        ok &= z_mean < 3.0 && z_var < 3.0;
        parts.push(format!("s={s}: mean {z_mean:.2} SE, var {z_var:.2} SE"));
    }
    check(ok, format!("within 3 SE per coordinate ({})", parts.join("; ")))
}

// 8
fn schedule_derivatives() -> Outcome {
    let ts = TranslationSchedule::default();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let kinds = [RotationScheduleKind::Logarithmic, RotationScheduleKind::Linear];
    for i in 0..100 {
        let s = (i as f64 + 0.5) / 100.0;
        let d_g = (ts.integrated(s + h) - ts.integrated(s - h)) / (2.0 * h);
        worst = worst.max((d_g - ts.beta(s)).abs());
        for kind in kinds {
            let rs = lib(RotationSchedule::new(0.1, 1.5, kind))?;
            let d_var = (rs.variance(s + h) - rs.variance(s - h)) / (2.0 * h);
            worst = worst.max((d_var - rs.diffusion(s).powi(2)).abs());
        }
    }
    let rs = RotationSchedule::default();
    let ends = ts.beta(0.0) == 0.1 && ts.beta(1.0) == 20.0 && rs.sigma(0.0) == 0.1 && rs.sigma(1.0) == 1.5;
    check(
        worst < 1e-6 && ends,
        format!("max FD error {worst:.2e} < 1e-6; endpoints exact: {ends}"),
    )
}

// 9
fn dsm_calibration() -> Outcome {
    let cfg = TruncationConfig::default();
    let schedules = Schedules::default();
    let uniform = UniformSo3Sampler::default();
    let mut rng = stream(9, 0);
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let table = lib(Igso3Table::build(schedules.rotation.variance(t), &cfg))?;
        let lambda = lib(dsm_weights(t, &schedules, &cfg))?.rotation;
        let mut frames0 = Vec::with_capacity(100_000);
        let mut frames_t = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let r0 = uniform.sample(&mut rng);
            frames_t.push(Frame::new(table.sample(&r0, &mut rng), Vec3::zeros()));
            frames0.push(Frame::new(r0, Vec3::zeros()));
        }
        let (fs0, fs_t) = (FrameSet::new(frames0), FrameSet::new(frames_t));
        // trivial prediction: the denoised rotation is the noisy one
        let pred = lib(score_from_denoised(&fs_t, &fs_t, t, &schedules, &cfg))?;
        let mut total = 0.0;
        for ((p, f0), ft) in pred.iter().zip(fs0.frames()).zip(fs_t.frames()) {
            let exact = lib(conditional_score(&f0.rotation, &ft.rotation, schedules.rotation.variance(t), &cfg))?;
            let d = p.rot - exact;
            total += 0.5 * (d * d.transpose()).trace();
        }
        let loss = lambda * total / 1e5;
        ok &= (loss - 1.0).abs() < 0.03;
        parts.push(format!("t={t}: {loss:.4}"));
    }
    check(ok, format!("loss within 1 ± 0.03 ({})", parts.join(", ")))
}

// 10
fn rotation_invariance() -> Outcome {
    let cfg = TruncationConfig::default();
    let schedules = Schedules::default();
    let uniform = UniformSo3Sampler::default();
    let mut rng = stream(10, 0);
    let frames = (0..8).map(|_| Frame::new(uniform.sample(&mut rng), gaussian3(&mut rng))).collect();
    let fs0 = center(&FrameSet::new(frames));
    let g = Frame::new(uniform.sample(&mut rng), Vec3::zeros());
    let rotated = center(&fs0.transformed(&g));
    let sampler = lib(ForwardSampler::new(0.5, &schedules, &cfg))?;
    let stats = |fs: &FrameSet, seed: u64| -> Result<[Vec<f64>; 3], String> {
        let mut rng = stream(10, seed);
        let mut out: [Vec<f64>; 3] = Default::default();
        for _ in 0..100_000 {
            let d = lib(sampler.sample(fs, &mut rng))?;
            let f = d.frames();
            out[0].push((f[0].translation - f[1].translation).norm());
            out[1].push(rotation_angle(&f[0].rotation.relative_to(&f[1].rotation)));
            out[2].push(f[0].translation.norm());
        }
        Ok(out)
    };
    let (a, b) = (stats(&fs0, 1)?, stats(&rotated, 2)?);
    let ks: Vec<f64> = a.iter().zip(&b).map(|(x, y)| ks_two_sample(x, y)).collect();
    check(
        ks.iter().all(|&k| k < 0.02),
        format!(
            "KS pairwise distance {:.4}, relative angle {:.4}, distance to centroid {:.4}, all < 0.02",
            ks[0], ks[1], ks[2]
        ),
    )
}

// 11
fn backbone_roundtrip() -> Outcome {
    let geom = IdealGeometry::default();
    let uniform = UniformSo3Sampler::default();
    let mut rng = stream(11, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let f = Frame::new(uniform.sample(&mut rng), gaussian3(&mut rng) * 3.0);
        let psi = Psi::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let atoms = frame_to_atoms(&f, &psi, &geom);
        let back = lib(atom2frame(&atoms))?;
        worst = worst.max((back.rotation.matrix() - f.rotation.matrix()).abs().max());
        worst = worst.max((back.translation - f.translation).abs().max());
        let again = frame_to_atoms(&back, &psi, &geom);
        for (p, q) in again.atoms().iter().zip(atoms.atoms().iter()) {
            worst = worst.max((p - q).abs().max());
        }
    }
    let helix = lib(ideal_helix_frames(40))?;
    let psis: Vec<Psi> = (0..40).map(|i| Psi::from_angle(0.1 * i as f64 - 2.0)).collect();
    let truth = lib(atoms_from_frames(&helix, &psis, &geom))?;
    let (bb, two_d) = (lib(l_bb(&truth, &truth))?, lib(l_2d(&truth, &truth))?);
    let parsed = lib(parse_backbone(&lib(write_pdb(&truth, 'A'))?))?;
    let mut pdb_err: f64 = 0.0;
    for (p, q) in parsed.iter().zip(&truth) {
        let (fp, fq) = (lib(atom2frame(p))?, lib(atom2frame(q))?);
        pdb_err = pdb_err.max(rotation_angle(&fp.rotation.relative_to(&fq.rotation)));
    }
    check(
        worst < 1e-10 && bb == 0.0 && two_d == 0.0 && parsed.len() == truth.len() && pdb_err < 1e-3,
        format!(
            "roundtrip error {worst:.2e} < 1e-10; l_bb = {bb}, l_2d = {two_d}; PDB rotation error {pdb_err:.2e} rad < 1e-3"
        ),
    )
}

// 12
fn determinism() -> Outcome {
    let cfg = TruncationConfig::default();
    let schedules = Schedules::default();
    let walk = |noise_seed: u64| -> Result<Vec<u64>, String> {
        let init = sample_reference(12, &UniformSo3Sampler::default(), &mut stream(12, 0));
        let score = DenoisedScore { pred0: lib(ideal_helix_frames(12))?, schedules, truncation: cfg };
        let sim = SimConfig { n_steps: 100, eps: 0.01, zeta: 0.0, seed: noise_seed };
        let traj = lib(reverse_walk(&init, &score, &schedules, &sim, &mut stream(noise_seed, 0)))?;
        Ok(traj
            .states
            .iter()
            .flat_map(|s| s.frames().iter().flat_map(|f| f.rotation.to_row_array().into_iter().chain(f.translation.iter().copied())).collect::<Vec<_>>())
            .map(f64::to_bits)
            .collect())
    };
    let walk_same = walk(1)? == walk(1)? && walk(1)? == walk(2)?;

    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let commands: [&[&str]; 9] = [
        &["igso3", "eval", "--t", "0.5", "--out", "eval.csv"],
        &["igso3", "sample", "--t", "0.5", "--n", "500", "--seed", "3", "--out", "sample.csv"],
        &["igso3", "score", "--t", "0.5", "--n", "500", "--seed", "3", "--out", "score.csv"],
        &["igso3", "table", "--t", "0.5", "--out", "table.bin"],
        &["schedule", "dump", "--out", "schedule.csv"],
        &["toy", "forward", "--paths", "300", "--steps", "60", "--seed", "4", "--out-dir", "fwd"],
        &["toy", "reverse", "--paths", "300", "--steps", "60", "--seed", "4", "--out-dir", "rev"],
        &["toy", "compare", "--a", "fwd", "--b", "rev", "--out", "compare.json"],
        &[
            "sample-backbones", "--n-residues", "12", "--n-chains", "2", "--n-steps", "80", "--seed", "5",
            "--out", "bb.pdb", "--trajectory", "traj.csv",
        ],
    ];
    for dir in &dirs {
        for args in commands {
            let status = Command::new(env!("CARGO_BIN_EXE_se3-diffuse"))
                .args(args)
                .current_dir(dir.path())
                .env_remove("SE3_DIFFUSE_IGSO3_CACHE")
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("`{}` exited with {status}", args.join(" ")));
            }
        }
    }
    let (a, b) = (snapshot(dirs[0].path())?, snapshot(dirs[1].path())?);
    let differing: Vec<&PathBuf> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let same_files = a.keys().eq(b.keys());
    check(
        walk_same && same_files && differing.is_empty(),
        format!(
            "zeta = 0 reverse walk bit-identical across runs and noise seeds: {walk_same}; {} CLI files compared, {} differ",
            a.len(),
            differing.len()
        ),
    )
}

/// File contents under `root`; manifests lose their wall-clock duration.
fn snapshot(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            if path.to_string_lossy().ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
                v.as_object_mut().map(|o| o.remove("duration_seconds"));
                bytes = serde_json::to_vec(&v).map_err(|e| e.to_string())?;
            }
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
        }
    }
    Ok(out)
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("IGSO3 normalization", normalization),
        ("score vs finite-difference gradient", score_gradient),
        ("exp/log roundtrip", exp_log_roundtrip),
        ("flat limit", flat_limit),
        ("toy forward/reverse agreement", toy_agreement),
        ("heat-kernel semigroup", semigroup),
        ("translation VP-SDE moments", vp_sde),
        ("schedule derivative identities", schedule_derivatives),
        ("trivial-prediction DSM calibration", dsm_calibration),
        ("centered-process rotation invariance", rotation_invariance),
        ("backbone roundtrip", backbone_roundtrip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
