//! Backbone geometry: residue frames from N, CA, C atoms, atom placement
//! from frames and the ψ torsion, and the training losses.
//!
//! Lengths are nanometres throughout.

use std::path::Path;

use crate::igso3::{conditional_score, TruncationConfig};
use crate::schedules::{denoised_from_trans_score, dsm_weights, Schedules};
use crate::se3::{center, Frame, FrameSet, TangentSe3};
use crate::so3::{norm, Rotation, Vec3};
use crate::{Error, Result};

/// Minimum `‖(C − CA) × (N − CA)‖` for a residue to define a frame.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Neighbourhood cutoff of the pairwise distance loss.
pub const DISTANCE_CUTOFF_NM: f64 = 0.6;

/// Default weight of the auxiliary losses.
pub const DEFAULT_AUX_WEIGHT: f64 = 0.25;

/// Auxiliary losses apply for `t` below this fraction of the final time 1.
pub const AUX_TIME_THRESHOLD: f64 = 0.25;

const DEFAULT_GEOMETRY_JSON: &str = include_str!("../config/ideal_geometry.json");

/// Backbone heavy atoms of one residue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueAtoms {
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
    pub o: Vec3,
}

impl ResidueAtoms {
    pub fn atoms(&self) -> [Vec3; 4] {
        [self.n, self.ca, self.c, self.o]
    }

    pub fn transformed(&self, f: &Frame) -> ResidueAtoms {
        ResidueAtoms { n: f.apply(&self.n), ca: f.apply(&self.ca), c: f.apply(&self.c), o: f.apply(&self.o) }
    }
}

/// Atom names in [`ResidueAtoms::atoms`] order.
pub const ATOM_NAMES: [&str; 4] = ["N", "CA", "C", "O"];

#[derive(serde::Serialize, serde::Deserialize)]
struct GeometryDoc {
    n: [f64; 3],
    ca: [f64; 3],
    c: [f64; 3],
    o: [f64; 3],
}

/// Local residue coordinates with CA at the origin, C on the +x axis and N
/// in the xy-plane (positive y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGeometry {
    atoms: ResidueAtoms,
}

impl IdealGeometry {
    pub fn new(n: Vec3, ca: Vec3, c: Vec3, o: Vec3) -> Result<Self> {
        if ca != Vec3::zeros() {
            return Err(Error::InvalidInput("ideal CA must sit at the origin".into()));
        }
        for (name, p) in [("N", n), ("C", c), ("O", o)] {
            if !(p.norm() > 0.0) || !p.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput(format!("ideal {name} must be a finite nonzero position")));
            }
        }
        if !((o - c).norm() > 0.0) {
            return Err(Error::InvalidInput("ideal C=O bond has zero length".into()));
        }
        if c.cross(&n).norm() <= COLLINEAR_TOL {
            return Err(Error::Degenerate("ideal N, CA, C are collinear".into()));
        }
        Ok(IdealGeometry { atoms: ResidueAtoms { n, ca, c, o } })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GeometryDoc = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("ideal geometry: {e}")))?;
        IdealGeometry::new(doc.n.into(), doc.ca.into(), doc.c.into(), doc.o.into())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        IdealGeometry::from_json(&text).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        let a = &self.atoms;
        let doc = GeometryDoc { n: a.n.into(), ca: a.ca.into(), c: a.c.into(), o: a.o.into() };
        serde_json::to_string_pretty(&doc).expect("plain arrays serialize")
    }

    pub fn atoms(&self) -> &ResidueAtoms {
        &self.atoms
    }
}

impl Default for IdealGeometry {
    fn default() -> Self {
        IdealGeometry::from_json(DEFAULT_GEOMETRY_JSON).expect("bundled geometry is valid")
    }
}

/// The ψ torsion as a unit `(cos, sin)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psi {
    cos: f64,
    sin: f64,
}

impl Psi {
    pub fn from_angle(psi: f64) -> Self {
        let (sin, cos) = psi.sin_cos();
        Psi { cos, sin }
    }

    /// Normalizes an arbitrary nonzero pair.
    pub fn from_pair(cos: f64, sin: f64) -> Result<Self> {
        let r = cos.hypot(sin);
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("psi pair ({cos}, {sin}) cannot be normalized")));
        }
        Ok(Psi { cos: cos / r, sin: sin / r })
    }

    pub fn zero() -> Self {
        Psi { cos: 1.0, sin: 0.0 }
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn sin(&self) -> f64 {
        self.sin
    }

    pub fn angle(&self) -> f64 {
        self.sin.atan2(self.cos)
    }
}

/// Gram–Schmidt frame of a residue: translation CA, rotation columns
/// `e₁ ∥ C − CA`, `e₂` from `N − CA`, `e₃ = e₁ × e₂`.
pub fn atom2frame(res: &ResidueAtoms) -> Result<Frame> {
    let v1 = res.c - res.ca;
    let v2 = res.n - res.ca;
    if v1.cross(&v2).norm() <= COLLINEAR_TOL {
        return Err(Error::Degenerate("N, CA and C are collinear".into()));
    }
    let e1 = v1.normalize();
    let e2 = (v2 - e1 * e1.dot(&v2)).normalize();
    let e3 = e1.cross(&e2);
    let r = crate::so3::Mat3::from_columns(&[e1, e2, e3]);
    Ok(Frame::new(Rotation::from_matrix_unchecked(r), res.ca))
}

/// Places the ideal atoms by `f`, with O first turned by `ψ` about the
/// CA*→C* axis (right-handed).
pub fn frame_to_atoms(f: &Frame, psi: &Psi, geom: &IdealGeometry) -> ResidueAtoms {
    let g = &geom.atoms;
    let k = g.c.normalize();
    // Rodrigues about an axis through the origin (CA* = 0)
    let o = g.o * psi.cos + k.cross(&g.o) * psi.sin + k * k.dot(&g.o) * (1.0 - psi.cos);
    ResidueAtoms { n: f.apply(&g.n), ca: f.translation, c: f.apply(&g.c), o: f.apply(&o) }
}

/// Frames of a chain in nanometres, centered.
pub fn frames_from_atoms(residues: &[ResidueAtoms]) -> Result<FrameSet> {
    let frames = residues.iter().map(atom2frame).collect::<Result<Vec<_>>>()?;
    Ok(center(&FrameSet::new(frames)))
}

/// Atoms of every frame; `psi` is broadcast when it has one entry.
pub fn atoms_from_frames(fs: &FrameSet, psi: &[Psi], geom: &IdealGeometry) -> Result<Vec<ResidueAtoms>> {
    let n = fs.len();
    if psi.len() != n && psi.len() != 1 {
        return Err(Error::LengthMismatch { left: n, right: psi.len() });
    }
    Ok(fs
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| frame_to_atoms(f, &psi[if psi.len() == 1 { 0 } else { i }], geom))
        .collect())
}

/// CA radius, rise and turn per residue of an ideal α-helix.
pub const HELIX_RADIUS_NM: f64 = 0.23;
pub const HELIX_RISE_NM: f64 = 0.15;
pub const HELIX_TURN_DEG: f64 = 100.0;

/// Centered frames of an ideal α-helix of `n` residues. Each frame comes
/// from Gram–Schmidt on the neighbouring CA positions, standing in for C
/// (next CA) and N (previous CA).
pub fn ideal_helix_frames(n: usize) -> Result<FrameSet> {
    let ca = |i: f64| {
        let a = (HELIX_TURN_DEG * i).to_radians();
        Vec3::new(HELIX_RADIUS_NM * a.cos(), HELIX_RADIUS_NM * a.sin(), HELIX_RISE_NM * i)
    };
    let residues: Vec<ResidueAtoms> = (0..n)
        .map(|i| {
            let i = i as f64;
            ResidueAtoms { n: ca(i - 1.0), ca: ca(i), c: ca(i + 1.0), o: ca(i + 1.0) }
        })
        .collect();
    frames_from_atoms(&residues)
}

fn check_lengths(pred: &[ResidueAtoms], truth: &[ResidueAtoms]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("losses need at least one residue".into()));
    }
    Ok(())
}

/// Mean squared atom error over the four backbone atoms.
pub fn l_bb(pred: &[ResidueAtoms], truth: &[ResidueAtoms]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, q)| p.atoms().into_iter().zip(q.atoms()))
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(total / (4 * pred.len()) as f64)
}

/// Squared error of pairwise atom distances over all ordered residue and
/// atom pairs whose true distance is below the cutoff, normalized by the
/// neighbour count minus `N`.
pub fn l_2d(pred: &[ResidueAtoms], truth: &[ResidueAtoms]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let p: Vec<Vec3> = pred.iter().flat_map(|r| r.atoms()).collect();
    let q: Vec<Vec3> = truth.iter().flat_map(|r| r.atoms()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..q.len() {
        for j in 0..q.len() {
            let d = (q[i] - q[j]).norm();
            if d < DISTANCE_CUTOFF_NM {
                let dh = (p[i] - p[j]).norm();
                sum += (d - dh).powi(2);
                count += 1;
            }
        }
    }
    // self-pairs alone contribute 4N to the count, so Z = count − N is
    // always positive; the degenerate case is having nothing else
    if count <= q.len() {
        return Err(Error::Degenerate(format!("no neighbours within {DISTANCE_CUTOFF_NM} nm beyond self-pairs")));
    }
    Ok(sum / (count - pred.len()) as f64)
}

/// Rotation and translation parts of the denoising score-matching loss.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DsmLoss {
    pub rotation: f64,
    pub translation: f64,
}

impl DsmLoss {
    pub fn total(&self) -> f64 {
        self.rotation + self.translation
    }
}

/// `λ_r` times the mean squared rotation score error, plus the mean squared
/// error of the translations recovered from the predicted score.
pub fn dsm_loss(
    score_pred: &[TangentSe3],
    fs0: &FrameSet,
    fs_t: &FrameSet,
    t: f64,
    schedules: &Schedules,
    cfg: &TruncationConfig,
) -> Result<DsmLoss> {
    let n = fs0.len();
    if fs_t.len() != n {
        return Err(Error::LengthMismatch { left: n, right: fs_t.len() });
    }
    if score_pred.len() != n {
        return Err(Error::LengthMismatch { left: n, right: score_pred.len() });
    }
    if n == 0 {
        return Err(Error::InvalidInput("losses need at least one frame".into()));
    }
    let weights = dsm_weights(t, schedules, cfg)?;
    let rot_time = schedules.rotation.variance(t);
    let mut rot = 0.0;
    let mut trans = 0.0;
    for ((s, f0), ft) in score_pred.iter().zip(fs0.frames()).zip(fs_t.frames()) {
        let exact = conditional_score(&f0.rotation, &ft.rotation, rot_time, cfg)?;
        rot += norm(&(s.rot - exact)).powi(2);
        let x0_hat = denoised_from_trans_score(&s.trans, &ft.translation, t, &schedules.translation);
        trans += (f0.translation - x0_hat).norm_squared();
    }
    Ok(DsmLoss { rotation: weights.rotation * rot / n as f64, translation: trans / n as f64 })
}

/// Inputs of [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossComponents {
    pub dsm: DsmLoss,
    pub bb: f64,
    pub two_d: f64,
}

/// `L_dsm + w·1{t < 1/4}·(L_bb + L_2D)`.
pub fn total_loss(c: &LossComponents, t: f64, w: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidInput(format!("loss time must lie in (0, 1], got {t}")));
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("auxiliary weight must be >= 0, got {w}")));
    }
    let aux = if t < AUX_TIME_THRESHOLD { w * (c.bb + c.two_d) } else { 0.0 };
    Ok(c.dsm.total() + aux)
}
