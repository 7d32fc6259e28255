//! Monte-Carlo checks of the forward and reverse processes against their
//! forward-sampler oracles.

use se3_diffuse::backbone::{dsm_loss, ideal_helix_frames};
use se3_diffuse::igso3::{Igso3Table, TruncationConfig};
use se3_diffuse::rng::stream;
use se3_diffuse::schedules::Schedules;
use se3_diffuse::se3::{
    center, reverse_walk_with, sample_reference, score_from_denoised, DenoisedScore, ForwardSampler, Frame,
    FrameSet, SimConfig, TangentSe3,
};
use se3_diffuse::so3::{exp_vec, rotation_angle, UniformSo3Sampler};
use se3_diffuse::stats::{ks_two_sample, mean};
use se3_diffuse::toy::{nearest_angles, run_forward, run_reverse, DiscreteTarget, Record, ToyRunConfig};
use se3_diffuse::{Rotation, Vec3};

/// Variance ratio at the first positive grid time for a locally Gaussian
/// target under the start-of-step reverse scheme: each step maps `v` to
/// `v (1 − dt/t)² + dt`, with the score `−x/t` taken at the step's start.
fn scheme_variance_ratio(grid: &[f64]) -> f64 {
    let n = grid.len();
    let mut v = grid[n - 1];
    for i in (2..n).rev() {
        let dt = grid[i] - grid[i - 1];
        v = v * (1.0 - dt / grid[i]).powi(2) + dt;
    }
    v / grid[1]
}

fn fraction_below(xs: &[f64], cut: f64) -> f64 {
    xs.iter().filter(|&&a| a < cut).count() as f64 / xs.len() as f64
}

#[test]
fn toy_terminal_concentration_matches_exact_and_discretized_laws() {
    let target = DiscreteTarget::random(3, 0).unwrap();
    let cfg = TruncationConfig::default();
    let run = ToyRunConfig { n_paths: 5000, seed: 11, ..Default::default() };
    let record = Record::Indices(vec![1]);
    let fwd = run_forward(&target, &run, &record).unwrap();
    let rev = run_reverse(&target, &run, &cfg, &record).unwrap();
    let t1 = fwd.grid[1];
    let exact = Igso3Table::build(t1, &cfg).unwrap().angle_cdf(0.3);
    let model = Igso3Table::build(t1 * scheme_variance_ratio(&fwd.grid), &cfg).unwrap().angle_cdf(0.3);
    let se = (0.25f64 / 5000.0).sqrt();
    let f = fraction_below(&nearest_angles(fwd.at_index(1).unwrap(), &target), 0.3);
    let r = fraction_below(&nearest_angles(rev.at_index(1).unwrap(), &target), 0.3);
    // atoms are far apart relative to sqrt(t1), so each mixture component
    // behaves like a single heat kernel
    assert!((f - exact).abs() < 4.0 * se, "forward {f} vs exact {exact}");
    assert!((r - model).abs() < 4.0 * se + 0.02, "reverse {r} vs scheme model {model}");
    // the uniform law puts about 0.004 of its mass this close to some atom
    assert!(r > 0.5);
}

#[test]
fn single_atom_reverse_spread_matches_the_scheme_model() {
    let target = DiscreteTarget::uniform(vec![Rotation::identity()]).unwrap();
    let run = ToyRunConfig { n_paths: 5000, seed: 12, ..Default::default() };
    let record = Record::Indices(vec![1]);
    let fwd = run_forward(&target, &run, &record).unwrap();
    let rev = run_reverse(&target, &run, &TruncationConfig::default(), &record).unwrap();
    let angles = |s: &[Rotation]| s.iter().map(rotation_angle).collect::<Vec<_>>();
    let (a, b) = (mean(&angles(fwd.at_index(1).unwrap())), mean(&angles(rev.at_index(1).unwrap())));
    // angles scale with the standard deviation near the identity
    let predicted = a * scheme_variance_ratio(&fwd.grid).sqrt();
    assert!((b - predicted).abs() < 0.015, "reverse {b}, forward {a}, predicted {predicted}");
}

#[test]
fn toy_forward_matches_the_heat_kernel() {
    // one atom at the identity: the forward marginal at t is IGSO3(t)
    let target = DiscreteTarget::uniform(vec![Rotation::identity()]).unwrap();
    let run = ToyRunConfig { n_paths: 5000, t_final: 1.0, n_steps: 101, seed: 13, ..Default::default() };
    let fwd = run_forward(&target, &run, &Record::Indices(vec![50])).unwrap();
    let t = fwd.grid[50];
    let table = Igso3Table::build(t, &TruncationConfig::default()).unwrap();
    let mut rng = stream(13, 99);
    let exact: Vec<f64> = (0..5000).map(|_| table.sample_angle(&mut rng)).collect();
    let walked: Vec<f64> = fwd.at_index(50).unwrap().iter().map(rotation_angle).collect();
    let ks = ks_two_sample(&walked, &exact);
    assert!(ks < 0.05, "KS {ks}");
}

#[test]
fn exact_score_reverse_walk_recovers_the_eps_marginal() {
    let schedules = Schedules::default();
    let cfg = TruncationConfig::default();
    let target = center(&FrameSet::new(vec![Frame::identity()]));
    let score = DenoisedScore { pred0: target.clone(), schedules, truncation: cfg };
    let sim = SimConfig { n_steps: 500, eps: 0.01, zeta: 1.0, seed: 14 };
    let uniform = UniformSo3Sampler::default();
    let n = 10_000;
    let mut walked = Vec::with_capacity(n);
    for p in 0..n {
        let mut rng = stream(sim.seed, p as u64);
        // a single frame stays at the origin after centering, so only the
        // rotation carries information
        let init = sample_reference(1, &uniform, &mut rng);
        let end = reverse_walk_with(&init, &score, &schedules, &sim, &mut rng, |_, _, _| {}).unwrap();
        walked.push(rotation_angle(&end.frames()[0].rotation));
    }
    let sampler = ForwardSampler::new(sim.eps, &schedules, &cfg).unwrap();
    let mut rng = stream(sim.seed, u64::MAX);
    let exact: Vec<f64> = (0..n)
        .map(|_| rotation_angle(&sampler.sample(&target, &mut rng).unwrap().frames()[0].rotation))
        .collect();
    let ks = ks_two_sample(&walked, &exact);
    assert!(ks < 0.05, "KS {ks}");
}

#[test]
fn denoising_towards_a_fixed_target_lands_near_it() {
    let schedules = Schedules::default();
    let cfg = TruncationConfig::default();
    let target = ideal_helix_frames(6).unwrap();
    let score = DenoisedScore { pred0: target.clone(), schedules, truncation: cfg };
    let sim = SimConfig { n_steps: 300, eps: 0.01, zeta: 0.0, seed: 15 };
    let mut rng = stream(15, 0);
    let init = sample_reference(6, &UniformSo3Sampler::default(), &mut rng);
    let end = reverse_walk_with(&init, &score, &schedules, &sim, &mut rng, |_, _, _| {}).unwrap();
    for (f, g) in end.frames().iter().zip(target.frames()) {
        assert!(rotation_angle(&f.rotation.relative_to(&g.rotation)) < 0.1);
        assert!((f.translation - g.translation).norm() < 0.2);
    }
}

#[test]
fn dsm_loss_is_zero_at_the_exact_score_and_grows_under_perturbation() {
    let schedules = Schedules::default();
    let cfg = TruncationConfig::default();
    let fs0 = ideal_helix_frames(8).unwrap();
    let mut rng = stream(16, 0);
    for t in [0.1, 0.5, 0.9] {
        let fs_t = ForwardSampler::new(t, &schedules, &cfg).unwrap().sample(&fs0, &mut rng).unwrap();
        let exact = score_from_denoised(&fs_t, &fs0, t, &schedules, &cfg).unwrap();
        let at_truth = dsm_loss(&exact, &fs0, &fs_t, t, &schedules, &cfg).unwrap();
        assert!(at_truth.rotation.abs() < 1e-20 && at_truth.translation < 1e-20, "{at_truth:?}");
        let bumped: Vec<TangentSe3> = exact
            .iter()
            .zip(fs_t.frames())
            .map(|(s, f)| TangentSe3 {
                rot: s.rot + f.rotation.matrix() * se3_diffuse::so3::hat(&Vec3::new(0.1, 0.0, -0.2)).matrix(),
                trans: s.trans + Vec3::new(0.05, 0.0, 0.0),
            })
            .collect();
        let off = dsm_loss(&bumped, &fs0, &fs_t, t, &schedules, &cfg).unwrap();
        assert!(off.rotation > 0.0 && off.translation > 0.0);
    }
}

#[test]
fn forward_marginal_is_invariant_to_a_global_rotation() {
    let schedules = Schedules::default();
    let sampler = ForwardSampler::new(0.3, &schedules, &TruncationConfig::default()).unwrap();
    let fs0 = ideal_helix_frames(5).unwrap();
    let g = Frame::new(exp_vec(&Vec3::new(0.4, -1.1, 2.0)), Vec3::zeros());
    let rotated = center(&fs0.transformed(&g));
    let spread = |fs: &FrameSet, seed: u64| -> Vec<f64> {
        let mut rng = stream(17, seed);
        (0..20_000)
            .map(|_| {
                let d = sampler.sample(fs, &mut rng).unwrap();
                (d.frames()[0].translation - d.frames()[4].translation).norm()
            })
            .collect()
    };
    let ks = ks_two_sample(&spread(&fs0, 0), &spread(&rotated, 1));
    assert!(ks < 1.95 * (2.0 / 20_000f64).sqrt(), "KS {ks}");
}
