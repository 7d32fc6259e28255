use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::output::{
    ensure_dir, fmt_f64, manifest_path_for, quat_fields, read_json, read_numeric_csv, write_file, write_json,
    CsvOut, ManifestBuilder,
};
use super::table_io;
use super::*;
use crate::backbone::{atoms_from_frames, ideal_helix_frames, IdealGeometry, Psi};
use crate::igso3::{conditional_score_coeffs, f_and_df};
use crate::pdb::write_pdb_chains;
use crate::rng::{aux_stream, stream};
use crate::se3::{reverse_walk_with, sample_reference, DenoisedScore, FrameSet, ReferenceScore, ScoreField, SimConfig};
use crate::so3::{rotation_angle, UniformSo3Sampler};
use crate::stats::ks_two_sample;
use crate::tabulated::linspace;
use crate::toy::{marginal_stats, nearest_grid_index, run_forward, run_reverse, DiscreteTarget, Record, ToyRunConfig};

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Igso3(Igso3Command::Eval(a)) => igso3_eval(a),
        Command::Igso3(Igso3Command::Sample(a)) => igso3_sample(a, false),
        Command::Igso3(Igso3Command::Score(a)) => igso3_sample(a, true),
        Command::Igso3(Igso3Command::Table(a)) => igso3_table(a),
        Command::Schedule(ScheduleCommand::Dump(a)) => schedule_dump(a),
        Command::Toy(ToyCommand::Forward(a)) => toy_run(a, false),
        Command::Toy(ToyCommand::Reverse(a)) => toy_run(a, true),
        Command::Toy(ToyCommand::Compare(a)) => toy_compare(a),
        Command::SampleBackbones(a) => sample_backbones(a),
    }
}

fn igso3_eval(args: &Igso3EvalArgs) -> Result<()> {
    let cfg = args.series.truncation()?;
    let mut manifest = ManifestBuilder::new("igso3 eval", args, None);
    let mut out = CsvOut::create(&args.out, &["omega", "f", "df_domega"])?;
    for omega in linspace(0.0, std::f64::consts::PI, cfg.angle_grid) {
        let (f, df) = f_and_df(omega, args.t, &cfg)?;
        out.numbers(&[omega, f, df])?;
    }
    out.finish()?;
    manifest.output(&args.out);
    manifest.write(&manifest_path_for(&args.out))?;
    Ok(())
}

fn igso3_sample(args: &Igso3SampleArgs, with_score: bool) -> Result<()> {
    let cfg = args.series.truncation()?;
    let name = if with_score { "igso3 score" } else { "igso3 sample" };
    let mut manifest = ManifestBuilder::new(name, args, Some(args.seed));
    let (table, cache_hit) = table_io::load_or_build(args.t, &cfg, table_io::cache_dir().as_deref())?;
    manifest.note("table_cache_hit", cache_hit);
    let mut rng = stream(args.seed, 0);
    let identity = crate::so3::Rotation::identity();
    let header: &[&str] = if with_score {
        &["index", "a", "b", "c", "d", "omega", "s1", "s2", "s3"]
    } else {
        &["index", "a", "b", "c", "d", "omega"]
    };
    let mut out = CsvOut::create(&args.out, header)?;
    for i in 0..args.n {
        let r = table.sample(&identity, &mut rng);
        let q = quat_fields(&r);
        let mut row = vec![i.to_string()];
        row.extend(q.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(rotation_angle(&r)));
        if with_score {
            let c = conditional_score_coeffs(&identity, &r, args.t, &cfg)?;
            row.extend(c.iter().map(|v| fmt_f64(*v)));
        }
        out.row(row)?;
    }
    out.finish()?;
    manifest.output(&args.out);
    manifest.write(&manifest_path_for(&args.out))?;
    Ok(())
}

fn igso3_table(args: &Igso3TableArgs) -> Result<()> {
    let cfg = args.series.truncation()?;
    let mut manifest = ManifestBuilder::new("igso3 table", args, None);
    let (path, hit) = match &args.out {
        Some(out) => {
            let table = crate::igso3::Igso3Table::build(args.t, &cfg)?;
            table_io::save(&table, out, args.format == TableFormat::Csv)?;
            (out.clone(), false)
        }
        None => {
            let dir = table_io::cache_dir().ok_or_else(|| {
                Error::InvalidInput(format!("igso3 table needs --out or the {CACHE_ENV} directory"))
            })?;
            if args.format == TableFormat::Csv {
                return Err(Error::InvalidInput("the cache stores binary tables only".into()));
            }
            ensure_dir(&dir)?;
            let (_, hit) = table_io::load_or_build(args.t, &cfg, Some(&dir))?;
            (dir.join(table_io::cache_file_name(args.t, &cfg)), hit)
        }
    };
    manifest.note("cache_hit", hit);
    manifest.output(&path);
    manifest.write(&manifest_path_for(&path))?;
    Ok(())
}

/// Column names of `schedule dump`.
pub const SCHEDULE_COLUMNS: [&str; 7] = ["s", "beta", "G_x", "trans_var", "sigma_r", "rot_var", "g_r"];

fn schedule_dump(args: &ScheduleArgs) -> Result<()> {
    if args.points < 2 {
        return Err(Error::InvalidInput("schedule dump needs at least 2 points".into()));
    }
    let sched = args.schedule.schedules()?;
    let mut manifest = ManifestBuilder::new("schedule dump", args, None);
    let mut out = CsvOut::create(&args.out, &SCHEDULE_COLUMNS)?;
    let (tr, rot) = (&sched.translation, &sched.rotation);
    for s in linspace(0.0, 1.0, args.points) {
        out.numbers(&[
            s,
            tr.beta(s),
            tr.integrated(s),
            tr.variance(s),
            rot.sigma(s),
            rot.variance(s),
            rot.diffusion(s),
        ])?;
    }
    out.finish()?;
    manifest.output(&args.out);
    manifest.write(&manifest_path_for(&args.out))?;
    Ok(())
}

/// `summary.json` of a toy run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ToySummary {
    pub direction: String,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub steps: usize,
    pub paths: usize,
    pub atoms_file: String,
    pub records: Vec<ToyRecord>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ToyRecord {
    pub index: usize,
    pub t: f64,
    pub file: String,
    #[serde(default)]
    pub stats: serde_json::Value,
}

pub const ATOMS_FILE: &str = "atoms.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn toy_time_file(index: usize) -> String {
    format!("t{index:04}.csv")
}

fn toy_run(args: &ToyArgs, reverse: bool) -> Result<()> {
    let direction = if reverse { "reverse" } else { "forward" };
    let cfg = args.series.truncation()?;
    if args.atoms == 0 {
        return Err(Error::InvalidInput("--atoms must be >= 1".into()));
    }
    if args.bins == 0 {
        return Err(Error::InvalidInput("--bins must be >= 1".into()));
    }
    let run = ToyRunConfig {
        n_paths: args.paths,
        t_final: args.t_final,
        n_steps: args.steps,
        seed: args.seed,
        ..Default::default()
    };
    run.validate()?;
    let grid = run.time_grid();
    let mut indices = vec![0, 1, grid.len() - 1];
    for &t in &args.record_times {
        if !(0.0..=args.t_final).contains(&t) {
            return Err(Error::InvalidInput(format!("record time {t} lies outside [0, {}]", args.t_final)));
        }
        indices.push(nearest_grid_index(&grid, t));
    }
    indices.sort_unstable();
    indices.dedup();
    let target = DiscreteTarget::random(args.atoms, args.atom_seed)?;
    let mut manifest = ManifestBuilder::new(&format!("toy {direction}"), args, Some(args.seed));
    let marginals = if reverse {
        run_reverse(&target, &run, &cfg, &Record::Indices(indices))?
    } else {
        run_forward(&target, &run, &Record::Indices(indices))?
    };

    let dir = &args.out_dir;
    ensure_dir(dir)?;
    let atoms_path = dir.join(ATOMS_FILE);
    let mut atoms = CsvOut::create(&atoms_path, &["atom_id", "weight", "a", "b", "c", "d"])?;
    for (k, (atom, w)) in target.atoms().iter().zip(target.weights()).enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(*w)];
        row.extend(quat_fields(atom).iter().map(|v| fmt_f64(*v)));
        atoms.row(row)?;
    }
    atoms.finish()?;
    manifest.output(&atoms_path);

    let mut header = vec!["path_id".to_string(), "a".into(), "b".into(), "c".into(), "d".into()];
    header.extend((0..args.atoms).map(|k| format!("angle_to_atom_{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut records = Vec::with_capacity(marginals.recorded.len());
    for (&index, samples) in marginals.recorded.iter().zip(&marginals.samples) {
        let file = toy_time_file(index);
        let path = dir.join(&file);
        let mut out = CsvOut::create(&path, &header_refs)?;
        for (p, r) in samples.iter().enumerate() {
            let mut row = vec![p.to_string()];
            row.extend(quat_fields(r).iter().map(|v| fmt_f64(*v)));
            row.extend(target.angles_to_atoms(r).iter().map(|v| fmt_f64(*v)));
            out.row(row)?;
        }
        out.finish()?;
        manifest.output(&path);
        let stats = marginal_stats(samples, &target, args.bins)?;
        records.push(ToyRecord {
            index,
            t: grid[index],
            file,
            stats: serde_json::to_value(stats).expect("stats serialize"),
        });
    }
    let summary = ToySummary {
        direction: direction.into(),
        t_final: args.t_final,
        steps: args.steps,
        paths: args.paths,
        atoms_file: ATOMS_FILE.into(),
        records,
    };
    let summary_path = dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    manifest.output(&summary_path);
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(())
}

/// `toy compare` output.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompareReport {
    pub records: Vec<CompareRecord>,
    /// Largest KS statistic over recorded times `t > 0`.
    pub max_ks: f64,
    /// Largest KS statistic including `t = 0`, where the forward marginal is
    /// a point mass and agreement is not expected.
    pub max_ks_all: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompareRecord {
    pub index: usize,
    pub t: f64,
    pub ks: f64,
}

/// Angle to the nearest atom for every row of a toy time file.
pub fn nearest_angles_from_csv(path: &Path) -> Result<Vec<f64>> {
    let csv = read_numeric_csv(path)?;
    let cols: Vec<usize> = csv
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("angle_to_atom_"))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err(Error::Parse { path: path.into(), msg: "no angle_to_atom columns".into() });
    }
    Ok(csv
        .rows
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).fold(f64::INFINITY, f64::min))
        .collect())
}

fn toy_compare(args: &CompareArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("toy compare", args, None);
    let sa: ToySummary = read_json(&args.a.join(SUMMARY_FILE))?;
    let sb: ToySummary = read_json(&args.b.join(SUMMARY_FILE))?;
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| Error::io(&p, e));
    if read(args.a.join(&sa.atoms_file))? != read(args.b.join(&sb.atoms_file))? {
        return Err(Error::InvalidInput("the two runs use different atoms".into()));
    }
    let grid_a: Vec<(usize, f64)> = sa.records.iter().map(|r| (r.index, r.t)).collect();
    let grid_b: Vec<(usize, f64)> = sb.records.iter().map(|r| (r.index, r.t)).collect();
    if sa.t_final != sb.t_final || sa.steps != sb.steps || grid_a != grid_b {
        return Err(Error::InvalidInput("mismatched grids: runs differ in T, steps or recorded times".into()));
    }
    let records = sa
        .records
        .iter()
        .zip(&sb.records)
        .map(|(ra, rb)| {
            let a = nearest_angles_from_csv(&args.a.join(&ra.file))?;
            let b = nearest_angles_from_csv(&args.b.join(&rb.file))?;
            Ok(CompareRecord { index: ra.index, t: ra.t, ks: ks_two_sample(&a, &b) })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_of = |pos_only: bool| {
        records
            .iter()
            .filter(|r| !pos_only || r.t > 0.0)
            .map(|r| r.ks)
            .fold(0.0, f64::max)
    };
    let report = CompareReport { max_ks: max_of(true), max_ks_all: max_of(false), records };
    write_json(&args.out, &report)?;
    manifest.note("max_ks", report.max_ks);
    manifest.output(&args.out);
    manifest.write(&manifest_path_for(&args.out))?;
    Ok(())
}

/// Column names of the backbone trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 10] = ["t", "chain_id", "residue_index", "a", "b", "c", "d", "x", "y", "z"];

/// PDB chain identifiers in order.
pub const CHAIN_IDS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

fn sample_backbones(args: &SampleArgs) -> Result<()> {
    if args.n_residues == 0 {
        return Err(Error::InvalidInput("--n-residues must be >= 1".into()));
    }
    if args.n_chains == 0 || args.n_chains > CHAIN_IDS.len() {
        return Err(Error::InvalidInput(format!("--n-chains must lie in 1..={}", CHAIN_IDS.len())));
    }
    if args.trajectory_every == 0 {
        return Err(Error::InvalidInput("--trajectory-every must be >= 1".into()));
    }
    let schedules = args.schedule.schedules()?;
    let trunc = args.series.truncation()?;
    let sim = SimConfig { n_steps: args.n_steps, eps: args.eps, zeta: args.zeta, seed: args.seed };
    sim.validate()?;
    let geom = match &args.geometry {
        Some(p) => IdealGeometry::load(p)?,
        None => IdealGeometry::default(),
    };
    let score: Box<dyn ScoreField> = match args.score {
        ScoreKind::PriorOnly => Box::new(ReferenceScore),
        ScoreKind::FixedTarget => Box::new(DenoisedScore {
            pred0: ideal_helix_frames(args.n_residues)?,
            schedules,
            truncation: trunc,
        }),
    };
    let mut manifest = ManifestBuilder::new("sample-backbones", args, Some(args.seed));
    let keep_traj = args.trajectory.is_some();
    let uniform = UniformSo3Sampler::default();
    let chains: Vec<(FrameSet, Vec<[f64; 10]>)> = (0..args.n_chains)
        .into_par_iter()
        .map(|c| {
            let init = sample_reference(args.n_residues, &uniform, &mut aux_stream(args.init_seed, c as u64));
            let mut rng = stream(args.seed, c as u64);
            let mut rows = Vec::new();
            let last = args.n_steps - 1;
            let fin = reverse_walk_with(&init, score.as_ref(), &schedules, &sim, &mut rng, |k, t, fs| {
                if keep_traj && (k % args.trajectory_every == 0 || k == last) {
                    for (i, f) in fs.frames().iter().enumerate() {
                        let q = quat_fields(&f.rotation);
                        let x = f.translation;
                        rows.push([t, c as f64, i as f64, q[0], q[1], q[2], q[3], x.x, x.y, x.z]);
                    }
                }
            })?;
            Ok((fin, rows))
        })
        .collect::<Result<_>>()?;

    let atoms = chains
        .iter()
        .map(|(fs, _)| atoms_from_frames(fs, &[Psi::zero()], &geom))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<char> = CHAIN_IDS.chars().collect();
    let labelled: Vec<(char, &[crate::backbone::ResidueAtoms])> =
        atoms.iter().enumerate().map(|(c, a)| (ids[c], a.as_slice())).collect();
    write_file(&args.out, write_pdb_chains(&labelled)?.as_bytes())?;
    manifest.output(&args.out);
    if let Some(path) = &args.trajectory {
        let mut out = CsvOut::create(path, &TRAJECTORY_COLUMNS)?;
        for (_, rows) in &chains {
            for r in rows {
                let mut fields: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
                fields[1] = (r[1] as usize).to_string();
                fields[2] = (r[2] as usize).to_string();
                out.row(fields)?;
            }
        }
        out.finish()?;
        manifest.output(path);
    }
    manifest.write(&manifest_path_for(&args.out))?;
    Ok(())
}
