//! File-level pipeline stages: cohort generation, categorisation and
//! splitting, corruption, and per-arm training/evaluation.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arm::ExperimentArm;
use crate::curriculum::OrderingStrategy;
use crate::dataset::{preprocess, scaled_category_sizes, splits_for_categories, category_draw, Sample, SplitSpec};
use crate::error::{Error, Result};
use crate::grid::{CaseRecord, Split};
use crate::manifest::{load_manifest, manifest_dir, save_manifest, CaseFiles, ImageVariant, Manifest, ManifestCase};
use crate::motion::{add_skull, corrupt_image, sample_trajectory, MotionTrajectory, SeverityCategory, SkullConfig};
use crate::phantom::{generate_cohort, PhantomConfig};
use crate::rng::{Purpose, SimRng};
use crate::segmenter::checkpoint::save_checkpoint;
use crate::segmenter::network::predict_mask;
use crate::segmenter::train::{fit, TrainConfig, TrainLog};
use crate::segmenter::SegmenterParams;
use crate::stats::dice_score;
use crate::tensor_io::{write_tensor, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything configurable through `--config`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub phantom: PhantomConfig,
    pub skull: SkullConfig,
    pub train: TrainConfig,
    /// Per-category split counts; scaled from the full-cohort template when absent.
    pub split: Option<SplitSpec>,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn case_dir(case_id: &str) -> PathBuf {
    PathBuf::from("cases").join(case_id)
}

/// Writes a case's image and masks under `root` and returns the relative paths.
pub fn write_case(root: &Path, case: &CaseRecord) -> Result<CaseFiles> {
    let rel = case_dir(&case.case_id);
    create_dir(&root.join(&rel))?;
    let files = CaseFiles {
        image: rel.join("image.mrt"),
        brain_mask: rel.join("brain_mask.mrt"),
        lesion_mask: rel.join("lesion_mask.mrt"),
        skull_image: None,
        motion_image: None,
    };
    write_tensor(root.join(&files.image), &Tensor::Image(case.image.clone()))?;
    write_tensor(root.join(&files.brain_mask), &Tensor::Mask(case.brain_mask.clone()))?;
    write_tensor(root.join(&files.lesion_mask), &Tensor::Mask(case.lesion_mask.clone()))?;
    Ok(files)
}

/// Generates `count` phantoms into `out_dir` and writes the manifest.
pub fn write_cohort(out_dir: &Path, count: usize, cfg: &PhantomConfig, seed: u64) -> Result<PathBuf> {
    let cohort = generate_cohort(count, cfg, seed)?;
    create_dir(out_dir)?;
    let mut manifest = Manifest::new(seed);
    manifest.phantom = Some(*cfg);
    for case in &cohort {
        manifest.cases.push(ManifestCase {
            case_id: case.case_id.clone(),
            files: write_case(out_dir, case)?,
            severity: None,
            split: None,
            trajectory: None,
        });
    }
    let path = out_dir.join(MANIFEST_FILE);
    save_manifest(&path, &manifest)?;
    Ok(path)
}

/// Assigns motion categories (largest-remainder sizes) and train/val/test
/// splits, rewriting the manifest in place.
pub fn split_manifest(path: &Path, seed: u64, spec: Option<&SplitSpec>) -> Result<Manifest> {
    let mut manifest = load_manifest(path)?;
    let n = manifest.cases.len();
    if n == 0 {
        return Err(Error::validation("manifest has no cases"));
    }
    let sizes = scaled_category_sizes(n);
    let categories = category_draw(sizes, &mut SimRng::derive(seed, Purpose::Category, 0));
    let spec = match spec {
        Some(s) => s.clone(),
        None => SplitSpec::scaled(sizes),
    };
    let splits = splits_for_categories(&categories, &spec, seed)?;
    for ((case, cat), split) in manifest.cases.iter_mut().zip(categories).zip(splits) {
        case.severity = Some(cat);
        case.split = Some(split);
    }
    save_manifest(path, &manifest)?;
    Ok(manifest)
}

struct Corrupted {
    skull: Tensor,
    motion: Tensor,
    trajectory: MotionTrajectory,
}

fn corrupt_one(manifest: &Manifest, base: &Path, index: usize, seed: u64, skull: &SkullConfig) -> Result<Corrupted> {
    let case = manifest.load_case(base, index, ImageVariant::Original)?;
    let severity = case
        .severity
        .ok_or_else(|| Error::validation(format!("case {}: no severity assigned; run split first", case.case_id)))?;
    let with_skull = add_skull(&case.image, &case.brain_mask, skull)?;
    let mut rng = SimRng::derive(seed, Purpose::Trajectory, index as u64);
    let trajectory = sample_trajectory(severity, case.image.height(), &mut rng);
    let motion = corrupt_image(&with_skull, &trajectory)?;
    Ok(Corrupted {
        skull: Tensor::Image(with_skull),
        motion: Tensor::Image(motion),
        trajectory,
    })
}

/// Per-index map over `0..n` on up to `threads` workers; output order is
/// the index order.
fn parallel_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| s.spawn(move || (start..(start + chunk).min(n)).map(f).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Adds the skull to every case and applies one sampled trajectory per case
/// (identity for minimal), writing both images next to the originals.
pub fn corrupt_manifest(path: &Path, seed: u64, skull: &SkullConfig, threads: usize) -> Result<Manifest> {
    skull.validate()?;
    let mut manifest = load_manifest(path)?;
    let base = manifest_dir(path).to_path_buf();
    let results = parallel_map(manifest.cases.len(), threads, |i| corrupt_one(&manifest, &base, i, seed, skull))?;
    for (case, out) in manifest.cases.iter_mut().zip(results) {
        let rel = case_dir(&case.case_id);
        let skull_rel = rel.join("skull.mrt");
        let motion_rel = rel.join("motion.mrt");
        write_tensor(base.join(&skull_rel), &out.skull)?;
        write_tensor(base.join(&motion_rel), &out.motion)?;
        case.files.skull_image = Some(skull_rel);
        case.files.motion_image = Some(motion_rel);
        case.trajectory = Some(out.trajectory);
    }
    manifest.skull = Some(*skull);
    save_manifest(path, &manifest)?;
    Ok(manifest)
}

/// Smallest multiple of 4 covering every case in the manifest.
pub fn padded_size(manifest: &Manifest, base: &Path) -> Result<usize> {
    let mut side = 0;
    for i in 0..manifest.cases.len() {
        let c = manifest.load_case(base, i, ImageVariant::Original)?;
        side = side.max(c.image.height()).max(c.image.width());
    }
    Ok(side.div_ceil(4) * 4)
}

/// Preprocessed samples of one split and image variant, in manifest order.
pub fn load_samples(manifest: &Manifest, base: &Path, split: Split, variant: ImageVariant, target: usize) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (i, case) in manifest.cases.iter().enumerate() {
        if case.split == Some(split) {
            out.push(preprocess(&manifest.load_case(base, i, variant)?, target)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDice {
    pub case_id: String,
    pub severity: Option<SeverityCategory>,
    pub dice: f64,
}

pub const DICE_CSV: &str = "dice.csv";
pub const TRAIN_LOG: &str = "train_log.json";
pub const CONFIG_JSON: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, Clone)]
pub struct ArmRun {
    pub arm: ExperimentArm,
    pub params: SegmenterParams,
    pub log: TrainLog,
    pub dice: Vec<CaseDice>,
}

/// Dice of every sample under `params`.
pub fn evaluate(params: &SegmenterParams, samples: &[Sample]) -> Result<Vec<CaseDice>> {
    samples
        .iter()
        .map(|s| {
            Ok(CaseDice {
                case_id: s.case_id.clone(),
                severity: s.severity,
                dice: dice_score(&predict_mask(params, &s.image)?, &s.target)?,
            })
        })
        .collect()
}

pub fn dice_csv(rows: &[CaseDice]) -> String {
    let mut s = String::from("case_id,severity,dice\n");
    for r in rows {
        let sev = r.severity.map(|c| c.name().to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", r.case_id, sev, r.dice));
    }
    s
}

pub fn parse_dice_csv(text: &str, path: &Path) -> Result<Vec<CaseDice>> {
    let bad = |line: usize, why: &str| Error::validation(format!("{}:{}: {why}", path.display(), line + 1));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "case_id,severity,dice")) => {}
        _ => return Err(bad(0, "expected header case_id,severity,dice")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i, "expected 3 fields"));
        }
        let severity = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse::<SeverityCategory>().map_err(|_| bad(i, "bad severity"))?)
        };
        let dice: f64 = fields[2].parse().map_err(|_| bad(i, "bad dice value"))?;
        if !(0.0..=1.0).contains(&dice) {
            return Err(bad(i, "dice outside [0, 1]"));
        }
        out.push(CaseDice {
            case_id: fields[0].to_string(),
            severity,
            dice,
        });
    }
    Ok(out)
}

fn require_variant(manifest: &Manifest, arm: ExperimentArm, variant: ImageVariant) -> Result<()> {
    let missing = manifest.cases.iter().find(|c| match variant {
        ImageVariant::Original => false,
        ImageVariant::Skull => c.files.skull_image.is_none(),
        ImageVariant::Motion => c.files.motion_image.is_none(),
    });
    if let Some(c) = missing {
        return Err(Error::validation(format!(
            "arm {arm} needs {variant:?} images but case {} has none; run corrupt first",
            c.case_id
        )));
    }
    Ok(())
}

/// Trains and evaluates the given arms, writing each arm's outputs to
/// `out_dir/<arm>/`. Arms that share training data and ordering reuse one
/// trained model (training is deterministic, so this only saves time).
pub fn run_arms(manifest_path: &Path, arms: &[ExperimentArm], cfg: &TrainConfig, out_dir: &Path) -> Result<Vec<ArmRun>> {
    cfg.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path).to_path_buf();
    if manifest.cases.iter().any(|c| c.split.is_none() || c.severity.is_none()) {
        return Err(Error::validation("manifest cases lack severity/split; run split first"));
    }
    for &arm in arms {
        require_variant(&manifest, arm, arm.train_variant())?;
        require_variant(&manifest, arm, arm.test_variant())?;
    }
    let target = padded_size(&manifest, &base)?;
    let mut trained: BTreeMap<(u8, bool), (SegmenterParams, TrainLog)> = BTreeMap::new();
    let mut runs = Vec::new();
    for &arm in arms {
        let key = (arm.train_variant() as u8, arm.strategy() == OrderingStrategy::Curriculum);
        if let Entry::Vacant(slot) = trained.entry(key) {
            let train = load_samples(&manifest, &base, Split::Train, arm.train_variant(), target)?;
            let val = load_samples(&manifest, &base, Split::Val, arm.train_variant(), target)?;
            let arm_cfg = TrainConfig {
                strategy: arm.strategy(),
                ..cfg.clone()
            };
            slot.insert(fit(&train, &val, &arm_cfg)?);
        }
        let (params, log) = trained[&key].clone();
        let test = load_samples(&manifest, &base, Split::Test, arm.test_variant(), target)?;
        if test.is_empty() {
            return Err(Error::validation("manifest has no test cases"));
        }
        let dice = evaluate(&params, &test)?;
        let run = ArmRun { arm, params, log, dice };
        let arm_cfg = TrainConfig {
            strategy: arm.strategy(),
            ..cfg.clone()
        };
        write_arm(out_dir, &run, &arm_cfg)?;
        runs.push(run);
    }
    Ok(runs)
}

pub fn write_arm(out_dir: &Path, run: &ArmRun, cfg: &TrainConfig) -> Result<()> {
    let dir = out_dir.join(run.arm.slug());
    create_dir(&dir)?;
    let csv = dir.join(DICE_CSV);
    fs::write(&csv, dice_csv(&run.dice)).map_err(|e| Error::io(&csv, e))?;
    write_json(&dir.join(TRAIN_LOG), &run.log)?;
    write_json(&dir.join(CONFIG_JSON), cfg)?;
    save_checkpoint(dir.join(CHECKPOINT_DIR), &run.params)
}
