//! The SE(3)^N noising process and its time reversal.
//!
//! A [`FrameSet`] holds one rigid frame `T_n = (R_n, X_n)` per residue.
//! Translations are in nanometers. The forward process noises rotations with
//! IGSO3 at time `σ_r(t)²` and translations with the VP marginal, then
//! removes the center of mass. Sampling runs the reverse SDE as a geodesic
//! random walk with the product-metric exponential map, re-centering after
//! every step.

use rand::Rng;

use crate::igso3::{conditional_score, Igso3Table, TruncationConfig};
use crate::schedules::{trans_conditional_score, trans_marginal, Schedules};
use crate::so3::{expmap, hat_matrix, standard_normal_vec, Mat3, Rotation, UniformSo3Sampler, Vec3};
use crate::{Error, Result};

/// Rotations are projected back onto SO(3) this often during a walk.
pub const RENORMALIZE_EVERY: usize = 100;

/// One residue frame `T = (R, X)` acting as `v ↦ R v + X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Frame {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Frame { rotation, translation }
    }

    pub fn identity() -> Self {
        Frame::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.rotation.matrix() * v + self.translation
    }

    /// `self · other = (R R', R x' + x)`.
    pub fn compose(&self, other: &Frame) -> Frame {
        Frame::new(self.rotation * other.rotation, self.apply(&other.translation))
    }

    pub fn inverse(&self) -> Frame {
        let r_inv = self.rotation.inverse();
        Frame::new(r_inv, -(r_inv.matrix() * self.translation))
    }
}

/// An ordered set of frames, optionally pinned to zero center of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    frames: Vec<Frame>,
    centered: bool,
}

impl FrameSet {
    pub fn new(frames: Vec<Frame>) -> Self {
        FrameSet { frames, centered: false }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn center_of_mass(&self) -> Vec3 {
        let sum: Vec3 = self.frames.iter().map(|f| f.translation).sum();
        sum / self.frames.len().max(1) as f64
    }

    /// Applies the rigid motion `g` to every frame from the left.
    pub fn transformed(&self, g: &Frame) -> FrameSet {
        FrameSet {
            frames: self.frames.iter().map(|f| g.compose(f)).collect(),
            centered: self.centered && g.translation == Vec3::zeros(),
        }
    }

    fn check_finite(&self, step: usize) -> Result<()> {
        let finite = self
            .frames
            .iter()
            .all(|f| f.rotation.is_finite() && f.translation.iter().all(|x| x.is_finite()));
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite { step })
        }
    }
}

/// Shifts translations by minus their mean. Rotations are untouched.
pub fn center(fs: &FrameSet) -> FrameSet {
    if fs.centered {
        return fs.clone();
    }
    let com = fs.center_of_mass();
    FrameSet {
        frames: fs
            .frames
            .iter()
            .map(|f| Frame::new(f.rotation, f.translation - com))
            .collect(),
        centered: true,
    }
}

/// A tangent vector at a frame: `rot` lives in `Tan_R SO(3)` (so `Rᵀ rot`
/// is skew), `trans` in ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentSe3 {
    pub rot: Mat3,
    pub trans: Vec3,
}

impl TangentSe3 {
    pub fn zero() -> Self {
        TangentSe3 { rot: Mat3::zeros(), trans: Vec3::zeros() }
    }
}

/// Product-metric exponential `(R exp(Rᵀ v_r), x + v_x)`.
pub fn se3_expmap(f0: &Frame, v: &TangentSe3) -> Result<Frame> {
    Ok(Frame::new(expmap(&f0.rotation, &v.rot)?, f0.translation + v.trans))
}

/// A plug-in approximation of `∇ log p_t` on SE(3)^N. `t` is forward time.
pub trait ScoreField: Sync {
    fn score(&self, t: f64, fs: &FrameSet) -> Result<Vec<TangentSe3>>;
}

impl<F> ScoreField for F
where
    F: Fn(f64, &FrameSet) -> Result<Vec<TangentSe3>> + Sync,
{
    fn score(&self, t: f64, fs: &FrameSet) -> Result<Vec<TangentSe3>> {
        self(t, fs)
    }
}

/// Simulation settings for [`reverse_walk`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub n_steps: usize,
    /// Reverse trajectories stop at forward time `eps`.
    pub eps: f64,
    /// Noise scale `ζ` on the diffusion term.
    pub zeta: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_steps: 500, eps: 0.01, zeta: 1.0, seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidInput(format!("n_steps must be >= 2, got {}", self.n_steps)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::InvalidInput(format!("zeta must lie in [0, 1], got {}", self.zeta)));
        }
        Ok(())
    }

    /// Forward times visited by the reverse walk: uniform from 1 down to `eps`.
    pub fn time_grid(&self) -> Vec<f64> {
        let dt = (1.0 - self.eps) / (self.n_steps - 1) as f64;
        (0..self.n_steps)
            .map(|k| if k == self.n_steps - 1 { self.eps } else { 1.0 - k as f64 * dt })
            .collect()
    }
}

/// Forward noising at a fixed time with its IGSO3 table prebuilt.
#[derive(Debug, Clone)]
pub struct ForwardSampler {
    t: f64,
    schedules: Schedules,
    table: Igso3Table,
}

impl ForwardSampler {
    pub fn new(t: f64, schedules: &Schedules, cfg: &TruncationConfig) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidInput(format!("forward time must lie in (0, 1], got {t}")));
        }
        let table = Igso3Table::build(schedules.rotation.variance(t), cfg)?;
        Ok(ForwardSampler { t, schedules: *schedules, table })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Draws `T^(t) | T^(0)` frame by frame, then centers.
    pub fn sample<R: Rng + ?Sized>(&self, fs0: &FrameSet, rng: &mut R) -> Result<FrameSet> {
        if !fs0.is_centered() {
            return Err(Error::InvalidInput("forward sampling expects a centered frame set".into()));
        }
        let ts = &self.schedules.translation;
        let frames = fs0
            .frames
            .iter()
            .map(|f| {
                let rotation = self.table.sample(&f.rotation, rng);
                let m = trans_marginal(&f.translation, self.t, ts);
                let translation = m.mean + standard_normal_vec(rng) * m.variance.sqrt();
                Frame::new(rotation, translation)
            })
            .collect();
        Ok(center(&FrameSet::new(frames)))
    }
}

/// One forward draw at time `t`. Builds a table; use [`ForwardSampler`] for
/// repeated draws.
pub fn forward_sample<R: Rng + ?Sized>(
    fs0: &FrameSet,
    t: f64,
    schedules: &Schedules,
    cfg: &TruncationConfig,
    rng: &mut R,
) -> Result<FrameSet> {
    ForwardSampler::new(t, schedules, cfg)?.sample(fs0, rng)
}

/// Draw from the reference law: uniform rotations, standard normal
/// translations, centered.
pub fn sample_reference<R: Rng + ?Sized>(n: usize, uniform: &UniformSo3Sampler, rng: &mut R) -> FrameSet {
    let frames = (0..n)
        .map(|_| Frame::new(uniform.sample(rng), standard_normal_vec(rng)))
        .collect();
    center(&FrameSet::new(frames))
}

/// Drift of the reverse SDE at reverse time `s` (forward time `1 − s`):
/// rotation `g_r² ∇_r log p`, translation `g_x² ∇_x log p + (β/2) X`.
pub fn reverse_drift(
    fs: &FrameSet,
    s: f64,
    score: &dyn ScoreField,
    schedules: &Schedules,
) -> Result<Vec<TangentSe3>> {
    let t = 1.0 - s;
    let scores = score.score(t, fs)?;
    if scores.len() != fs.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: fs.len() });
    }
    let g_r2 = schedules.rotation.diffusion(t).powi(2);
    let ts = &schedules.translation;
    let g_x2 = ts.beta(t);
    let f_x = ts.drift_coeff(t);
    Ok(fs
        .frames
        .iter()
        .zip(scores)
        .map(|(f, sc)| TangentSe3 {
            rot: sc.rot * g_r2,
            trans: sc.trans * g_x2 - f.translation * f_x,
        })
        .collect())
}

/// Euler–Maruyama geodesic random walk for the reverse process.
///
/// Starts at forward time 1 and walks the grid of [`SimConfig::time_grid`]
/// down to `eps`. `on_step(k, t, state)` sees every state including the
/// initial one. Returns the final state.
pub fn reverse_walk_with<R, F>(
    init: &FrameSet,
    score: &dyn ScoreField,
    schedules: &Schedules,
    cfg: &SimConfig,
    rng: &mut R,
    mut on_step: F,
) -> Result<FrameSet>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &FrameSet),
{
    cfg.validate()?;
    if !init.is_centered() {
        return Err(Error::InvalidInput("reverse walk expects a centered initial state".into()));
    }
    let times = cfg.time_grid();
    let mut state = init.clone();
    on_step(0, times[0], &state);
    for k in 0..times.len() - 1 {
        let t = times[k];
        let dt = t - times[k + 1];
        let drift = reverse_drift(&state, 1.0 - t, score, schedules)?;
        let noise_r = cfg.zeta * schedules.rotation.diffusion(t) * dt.sqrt();
        let noise_x = cfg.zeta * schedules.translation.diffusion(t) * dt.sqrt();
        let mut frames = Vec::with_capacity(state.len());
        for (f, d) in state.frames.iter().zip(&drift) {
            let mut step = TangentSe3 { rot: d.rot * dt, trans: d.trans * dt };
            if cfg.zeta != 0.0 {
                let z_r = standard_normal_vec(rng);
                let z_x = standard_normal_vec(rng);
                step.rot += f.rotation.matrix() * hat_matrix(&(z_r * noise_r));
                step.trans += z_x * noise_x;
            }
            let mut next = se3_expmap(f, &step).map_err(|e| match e {
                Error::NotTangent { .. } if !step.rot.iter().all(|x| x.is_finite()) => {
                    Error::NonFinite { step: k + 1 }
                }
                other => other,
            })?;
            if (k + 1) % RENORMALIZE_EVERY == 0 {
                next.rotation = next.rotation.renormalize();
            }
            frames.push(next);
        }
        state = center(&FrameSet::new(frames));
        state.check_finite(k + 1)?;
        on_step(k + 1, times[k + 1], &state);
    }
    Ok(state)
}

/// States of a reverse walk, one per grid time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FrameSet>,
}

/// [`reverse_walk_with`] recording every state.
pub fn reverse_walk<R: Rng + ?Sized>(
    init: &FrameSet,
    score: &dyn ScoreField,
    schedules: &Schedules,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(cfg.n_steps);
    let mut states = Vec::with_capacity(cfg.n_steps);
    reverse_walk_with(init, score, schedules, cfg, rng, |_, t, s| {
        times.push(t);
        states.push(s.clone());
    })?;
    Ok(Trajectory { times, states })
}

/// Score of `p_{t|0}(· | pred0)` evaluated at `fs_t`, frame by frame.
pub fn score_from_denoised(
    fs_t: &FrameSet,
    pred0: &FrameSet,
    t: f64,
    schedules: &Schedules,
    cfg: &TruncationConfig,
) -> Result<Vec<TangentSe3>> {
    if fs_t.len() != pred0.len() {
        return Err(Error::LengthMismatch { left: fs_t.len(), right: pred0.len() });
    }
    let rot_time = schedules.rotation.variance(t);
    fs_t.frames
        .iter()
        .zip(&pred0.frames)
        .map(|(ft, f0)| {
            Ok(TangentSe3 {
                rot: conditional_score(&f0.rotation, &ft.rotation, rot_time, cfg)?,
                trans: trans_conditional_score(&f0.translation, &ft.translation, t, &schedules.translation),
            })
        })
        .collect()
}

/// Score field that always denoises towards a fixed frame set.
#[derive(Debug, Clone)]
pub struct DenoisedScore {
    pub pred0: FrameSet,
    pub schedules: Schedules,
    pub truncation: TruncationConfig,
}

impl ScoreField for DenoisedScore {
    fn score(&self, t: f64, fs: &FrameSet) -> Result<Vec<TangentSe3>> {
        score_from_denoised(fs, &self.pred0, t, &self.schedules, &self.truncation)
    }
}

/// Score of the reference law: zero for rotations, `−X` for translations.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceScore;

impl ScoreField for ReferenceScore {
    fn score(&self, _t: f64, fs: &FrameSet) -> Result<Vec<TangentSe3>> {
        Ok(fs
            .frames
            .iter()
            .map(|f| TangentSe3 { rot: Mat3::zeros(), trans: -f.translation })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::so3::{exp_vec, rotation_angle, sample_tangent_gaussian};
    use crate::stats::{mean, variance};
    use approx::assert_abs_diff_eq;

    fn random_set(n: usize, seed: u64) -> FrameSet {
        let mut rng = stream(seed, 0);
        let uniform = UniformSo3Sampler::default();
        FrameSet::new(
            (0..n)
                .map(|_| Frame::new(uniform.sample(&mut rng), standard_normal_vec(&mut rng)))
                .collect(),
        )
    }

    #[test]
    fn center_examples() {
        let fs = FrameSet::new(vec![
            Frame::new(Rotation::identity(), Vec3::new(1.0, 0.0, 0.0)),
            Frame::new(Rotation::identity(), Vec3::new(3.0, 0.0, 0.0)),
        ]);
        let c = center(&fs);
        assert_eq!(c.frames()[0].translation, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(c.frames()[1].translation, Vec3::new(1.0, 0.0, 0.0));
        assert!(c.is_centered());

        let fs = random_set(7, 1);
        let once = center(&fs);
        assert_eq!(center(&once), once);
        assert!(once.center_of_mass().amax() < 1e-12);
        for (a, b) in fs.frames().iter().zip(once.frames()) {
            assert_eq!(a.rotation, b.rotation);
        }
    }

    #[test]
    fn expmap_examples() {
        let f0 = random_set(1, 2).frames()[0];
        assert_eq!(se3_expmap(&f0, &TangentSe3::zero()).unwrap(), f0);

        let v = Vec3::new(0.2, -0.4, 0.1);
        let x = Vec3::new(1.0, 2.0, 3.0);
        let out = se3_expmap(&Frame::identity(), &TangentSe3 { rot: hat_matrix(&v), trans: x }).unwrap();
        assert_eq!(out, Frame::new(exp_vec(&v), x));

        // translation never sees the rotation part
        let a = se3_expmap(&f0, &TangentSe3 { rot: f0.rotation.matrix() * hat_matrix(&v), trans: x }).unwrap();
        let b = se3_expmap(&f0, &TangentSe3 { rot: Mat3::zeros(), trans: x }).unwrap();
        assert_eq!(a.translation, b.translation);

        let bad = TangentSe3 { rot: Mat3::identity(), trans: x };
        assert!(se3_expmap(&f0, &bad).is_err());
    }

    #[test]
    fn frame_group_laws() {
        let fs = random_set(2, 3);
        let (a, b) = (fs.frames()[0], fs.frames()[1]);
        let v = Vec3::new(0.1, 0.2, 0.3);
        assert!((a.compose(&b).apply(&v) - a.apply(&b.apply(&v))).amax() < 1e-12);
        let id = a.compose(&a.inverse());
        assert!((id.rotation.matrix() - Mat3::identity()).amax() < 1e-12);
        assert!(id.translation.amax() < 1e-12);
    }

    #[test]
    fn forward_small_time_matches_its_marginal() {
        // σ_r(0) = σ_min keeps rotation noise O(0.1) rad even as t → 0, so
        // closeness is checked against the analytic marginal at t = 0.02.
        let n = 4;
        let fs0 = center(&random_set(n, 4));
        let sched = Schedules::default();
        let cfg = TruncationConfig::default();
        let t = 0.02;
        let sampler = ForwardSampler::new(t, &sched, &cfg).unwrap();
        let table = Igso3Table::build(sched.rotation.variance(t), &cfg).unwrap();
        let mut rng = stream(4, 1);
        let (mut angles, mut dx) = (Vec::new(), Vec::new());
        let scale = sched.translation.mean_scale(t);
        for _ in 0..10_000 {
            let out = sampler.sample(&fs0, &mut rng).unwrap();
            assert!(out.center_of_mass().amax() < 1e-12);
            let (a, b) = (&fs0.frames()[0], &out.frames()[0]);
            angles.push(rotation_angle(&a.rotation.relative_to(&b.rotation)));
            dx.push(b.translation.x - scale * a.translation.x);
        }
        angles.sort_by(f64::total_cmp);
        let p99 = angles[9900];
        let exact_p99 = {
            let cdf = table.cdf_values();
            let i = cdf.partition_point(|&c| c < 0.99);
            table.omega()[i]
        };
        assert!((p99 - exact_p99).abs() < 0.03, "{p99} vs {exact_p99}");
        assert!(p99 < 0.6);
        let expected = sched.translation.variance(t) * (n as f64 - 1.0) / n as f64;
        let se = expected * (2.0f64 / 9999.0).sqrt();
        assert!((variance(&dx) - expected).abs() < 3.0 * se, "{} vs {expected}", variance(&dx));
        assert!(mean(&dx).abs() < 3.0 * (expected / 10_000.0).sqrt());
    }

    #[test]
    fn forward_requires_centered_input() {
        let sampler = ForwardSampler::new(0.5, &Schedules::default(), &TruncationConfig::default()).unwrap();
        assert!(sampler.sample(&random_set(3, 5), &mut stream(5, 1)).is_err());
    }

    #[test]
    fn forward_at_one_translations_are_centered_normals() {
        let n = 5;
        let fs0 = center(&random_set(n, 6));
        let sampler = ForwardSampler::new(1.0, &Schedules::default(), &TruncationConfig::default()).unwrap();
        let mut rng = stream(6, 1);
        let draws = 20_000;
        let xs: Vec<f64> = (0..draws).map(|_| sampler.sample(&fs0, &mut rng).unwrap().frames()[0].translation.x).collect();
        let expected = (n as f64 - 1.0) / n as f64;
        // standard error of a sample variance ≈ var·√(2/(n−1))
        let se = expected * (2.0 / (draws as f64 - 1.0)).sqrt();
        assert!((variance(&xs) - expected).abs() < 3.0 * se, "{}", variance(&xs));
    }

    #[test]
    fn reverse_drift_examples() {
        let sched = Schedules::default();
        let zero_score = |_t: f64, fs: &FrameSet| Ok(vec![TangentSe3::zero(); fs.len()]);
        let fs = center(&FrameSet::new(vec![Frame::identity()]));
        let d = reverse_drift(&fs, 0.3, &zero_score, &sched).unwrap();
        assert_eq!(d[0].trans, Vec3::zeros());
        assert_eq!(d[0].rot, Mat3::zeros());

        let fs = FrameSet::new(vec![Frame::new(Rotation::identity(), Vec3::new(1.0, 0.0, 0.0))]);
        let d = reverse_drift(&fs, 1.0, &zero_score, &sched).unwrap();
        assert_abs_diff_eq!(d[0].trans, Vec3::new(0.05, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn reverse_drift_rotation_is_tangent() {
        let sched = Schedules::default();
        let fs = center(&random_set(3, 7));
        let target = center(&random_set(3, 8));
        let score = DenoisedScore { pred0: target, schedules: sched, truncation: TruncationConfig::default() };
        for (f, d) in fs.frames().iter().zip(reverse_drift(&fs, 0.4, &score, &sched).unwrap()) {
            let skew = f.rotation.matrix().tr_mul(&d.rot);
            assert!((skew + skew.transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn zero_noise_walk_ignores_seed() {
        let sched = Schedules::default();
        let init = center(&random_set(4, 9));
        let target = center(&random_set(4, 10));
        let score = DenoisedScore { pred0: target, schedules: sched, truncation: TruncationConfig::default() };
        let cfg = SimConfig { n_steps: 50, zeta: 0.0, ..Default::default() };
        let a = reverse_walk(&init, &score, &sched, &cfg, &mut stream(1, 0)).unwrap();
        let b = reverse_walk(&init, &score, &sched, &cfg, &mut stream(2, 0)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.times.len(), 50);
        assert_eq!(a.times[0], 1.0);
        assert_eq!(*a.times.last().unwrap(), cfg.eps);
    }

    #[test]
    fn walk_states_stay_valid() {
        let sched = Schedules::default();
        let uniform = UniformSo3Sampler::default();
        let mut rng = stream(11, 0);
        let init = sample_reference(6, &uniform, &mut rng);
        let cfg = SimConfig { n_steps: 1000, ..Default::default() };
        let mut worst: f64 = 0.0;
        reverse_walk_with(&init, &ReferenceScore, &sched, &cfg, &mut rng, |_, _, s| {
            assert!(s.is_centered());
            assert!(s.center_of_mass().amax() < 1e-12);
            for f in s.frames() {
                worst = worst.max(f.rotation.orthonormality_error());
            }
        })
        .unwrap();
        assert!(worst < 1e-8, "drift {worst}");
    }

    #[test]
    fn walk_rejects_bad_config_and_uncentered_init() {
        let sched = Schedules::default();
        let init = center(&random_set(2, 12));
        let bad = SimConfig { n_steps: 1, ..Default::default() };
        assert!(reverse_walk(&init, &ReferenceScore, &sched, &bad, &mut stream(0, 0)).is_err());
        let raw = random_set(2, 12);
        assert!(reverse_walk(&raw, &ReferenceScore, &sched, &SimConfig::default(), &mut stream(0, 0)).is_err());
    }

    #[test]
    fn non_finite_score_aborts_with_step() {
        let sched = Schedules::default();
        let init = center(&random_set(2, 13));
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let score = |_t: f64, fs: &FrameSet| {
            let k = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            let v = if k >= 3 { f64::NAN } else { 0.0 };
            Ok(vec![TangentSe3 { rot: Mat3::zeros(), trans: Vec3::repeat(v) }; fs.len()])
        };
        let cfg = SimConfig { n_steps: 10, zeta: 0.0, ..Default::default() };
        let err = reverse_walk(&init, &score, &sched, &cfg, &mut stream(0, 0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 4 }), "{err:?}");
    }

    #[test]
    fn score_from_denoised_examples() {
        let sched = Schedules::default();
        let cfg = TruncationConfig::default();
        let fs = random_set(3, 14);
        let t = 0.05;
        let out = score_from_denoised(&fs, &fs, t, &sched, &cfg).unwrap();
        let ts = &sched.translation;
        for (f, s) in fs.frames().iter().zip(&out) {
            assert_eq!(s.rot, Mat3::zeros());
            let expected = -f.translation * (1.0 - ts.mean_scale(t)) / ts.variance(t);
            assert!((s.trans - expected).amax() < 1e-12);
        }
        let shorter = FrameSet::new(fs.frames()[..2].to_vec());
        assert!(score_from_denoised(&fs, &shorter, t, &sched, &cfg).is_err());
    }

    #[test]
    fn centering_commutes_with_ou_step() {
        // center(x + a·x·dt + b·z) vs centered state with the noise projected
        // onto the zero-mean subspace: compare first and second moments.
        let n = 4;
        let fs = random_set(n, 15);
        let (dt, beta) = (0.01, 5.0);
        let mut rng = stream(15, 1);
        let draws = 20_000;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let centered = center(&fs);
        for _ in 0..draws {
            let z: Vec<Vec3> = (0..n).map(|_| standard_normal_vec(&mut rng)).collect();
            let step = |f: &Frame, z: &Vec3| f.translation * (1.0 - 0.5 * beta * dt) + z * (beta * dt).sqrt();
            let lhs = center(&FrameSet::new(
                fs.frames().iter().zip(&z).map(|(f, z)| Frame::new(f.rotation, step(f, z))).collect(),
            ));
            a.push(lhs.frames()[0].translation.x);
            let z2: Vec<Vec3> = (0..n).map(|_| standard_normal_vec(&mut rng)).collect();
            let zbar: Vec3 = z2.iter().sum::<Vec3>() / n as f64;
            let f0 = &centered.frames()[0];
            b.push(step(f0, &(z2[0] - zbar)).x);
        }
        let se_mean = (variance(&a) / draws as f64).sqrt();
        assert!((mean(&a) - mean(&b)).abs() < 3.0 * se_mean * 2f64.sqrt());
        let se_var = variance(&a) * (2.0 / draws as f64).sqrt();
        assert!((variance(&a) - variance(&b)).abs() < 3.0 * se_var * 2f64.sqrt());
    }

    #[test]
    fn tangent_noise_keeps_frames_on_group() {
        let mut rng = stream(16, 0);
        let f0 = random_set(1, 16).frames()[0];
        let step = TangentSe3 { rot: sample_tangent_gaussian(&f0.rotation, &mut rng), trans: Vec3::zeros() };
        assert!(se3_expmap(&f0, &step).unwrap().rotation.is_valid(1e-12));
    }
}
