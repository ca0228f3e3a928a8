//! JSON experiment manifest.
//!
//! File paths inside a manifest are relative to the directory holding the
//! manifest, so a whole experiment directory can be moved as a unit.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CaseRecord, Split};
use crate::motion::{MotionTrajectory, SeverityCategory, SkullConfig};
use crate::phantom::PhantomConfig;
use crate::tensor_io::{read_image, read_mask};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFiles {
    pub image: PathBuf,
    pub brain_mask: PathBuf,
    pub lesion_mask: PathBuf,
    /// Clean image with the simulated skull added.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skull_image: Option<PathBuf>,
    /// Skull image after the sampled motion trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_image: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub files: CaseFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<SeverityCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<MotionTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skull: Option<SkullConfig>,
    #[serde(default)]
    pub cases: Vec<ManifestCase>,
}

/// Which image variant of a case to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageVariant {
    Original,
    Skull,
    Motion,
}

impl Manifest {
    pub fn new(seed: u64) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            seed,
            phantom: None,
            skull: None,
            cases: Vec::new(),
        }
    }

    /// Checks the in-memory invariants (version, unique ids).
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported manifest format_version {}",
                self.format_version
            )));
        }
        let mut seen = HashSet::new();
        for case in &self.cases {
            if !seen.insert(case.case_id.as_str()) {
                return Err(Error::validation(format!("duplicate case_id {:?}", case.case_id)));
            }
        }
        Ok(())
    }

    fn check_files_exist(&self, base: &Path) -> Result<()> {
        for case in &self.cases {
            let f = &case.files;
            let paths = [Some(&f.image), Some(&f.brain_mask), Some(&f.lesion_mask), f.skull_image.as_ref(), f.motion_image.as_ref()];
            for rel in paths.into_iter().flatten() {
                let full = base.join(rel);
                if !full.is_file() {
                    return Err(Error::validation(format!(
                        "case {}: missing file {}",
                        case.case_id,
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Loads one case's grids. `base` is the manifest directory.
    pub fn load_case(&self, base: &Path, index: usize, variant: ImageVariant) -> Result<CaseRecord> {
        let entry = &self.cases[index];
        let image_path = match variant {
            ImageVariant::Original => Some(&entry.files.image),
            ImageVariant::Skull => entry.files.skull_image.as_ref(),
            ImageVariant::Motion => entry.files.motion_image.as_ref(),
        }
        .ok_or_else(|| {
            Error::validation(format!("case {}: no {variant:?} image in manifest", entry.case_id))
        })?;
        let mut record = CaseRecord::new(
            entry.case_id.clone(),
            read_image(base.join(image_path))?,
            read_mask(base.join(&entry.files.brain_mask))?,
            read_mask(base.join(&entry.files.lesion_mask))?,
        )?;
        record.severity = entry.severity;
        record.split = entry.split;
        Ok(record)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a manifest, including that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    manifest.validate()?;
    manifest.check_files_exist(manifest_dir(path))?;
    Ok(manifest)
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    fs::write(path, manifest.to_json()).map_err(|e| Error::io(path, e))
}

/// Directory that relative case paths resolve against.
pub fn manifest_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Image2D, MaskGrid};
    use crate::tensor_io::write_tensor;

    fn case(id: &str) -> ManifestCase {
        ManifestCase {
            case_id: id.into(),
            files: CaseFiles {
                image: format!("{id}_image.mrt").into(),
                brain_mask: format!("{id}_brain.mrt").into(),
                lesion_mask: format!("{id}_lesion.mrt").into(),
                skull_image: None,
                motion_image: None,
            },
            severity: None,
            split: None,
            trajectory: None,
        }
    }

    fn write_case_files(dir: &Path, id: &str) {
        write_tensor(dir.join(format!("{id}_image.mrt")), &Image2D::zeros(4, 4).into()).unwrap();
        write_tensor(dir.join(format!("{id}_brain.mrt")), &MaskGrid::zeros(4, 4).into()).unwrap();
        write_tensor(dir.join(format!("{id}_lesion.mrt")), &MaskGrid::zeros(4, 4).into()).unwrap();
    }

    #[test]
    fn empty_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, r#"{"format_version": 1, "seed": 3, "cases": []}"#).unwrap();
        let m = load_manifest(&path).unwrap();
        assert!(m.cases.is_empty());
        assert_eq!(m.seed, 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_case_files(dir.path(), "a");
        let mut m = Manifest::new(1);
        m.cases = vec![case("a"), case("a")];
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, m.to_json()).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(1);
        m.cases = vec![case("ghost")];
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, m.to_json()).unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("ghost_image.mrt"));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_case_files(dir.path(), "a");
        let mut m = Manifest::new(99);
        let mut c = case("a");
        c.severity = Some(SeverityCategory::Mild);
        c.split = Some(Split::Val);
        m.cases.push(c);
        let path = dir.path().join("manifest.json");
        save_manifest(&path, &m).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), m);
        let rec = m.load_case(dir.path(), 0, ImageVariant::Original).unwrap();
        assert_eq!(rec.severity, Some(SeverityCategory::Mild));
        assert!(m.load_case(dir.path(), 0, ImageVariant::Motion).is_err());
    }
}
