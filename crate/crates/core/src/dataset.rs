//! Category assignment, train/val/test splits, and per-slice preprocessing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CaseRecord, Image2D, MaskGrid, Split};
use crate::motion::SeverityCategory;
use crate::rng::SimRng;

/// Full-cohort category sizes (minimal, mild, moderate, severe).
pub const FULL_CATEGORY_SIZES: [usize; 4] = [64, 64, 64, 67];

/// Largest-remainder apportionment of `total` over `weights`.
/// Ties in the remainder go to the lower index.
pub fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    assert!(sum > 0, "weights must not all be zero");
    let mut counts: Vec<usize> = weights.iter().map(|&w| total * w / sum).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // remainder numerators are total*w mod sum; compare exactly in integers
    order.sort_by(|&a, &b| {
        let ra = (total * weights[a]) % sum;
        let rb = (total * weights[b]) % sum;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Category sizes for a cohort of `total` cases, proportional to the full
/// 64/64/64/67 partition.
pub fn scaled_category_sizes(total: usize) -> [usize; 4] {
    let v = largest_remainder(total, &FULL_CATEGORY_SIZES);
    [v[0], v[1], v[2], v[3]]
}

/// Randomly partitions `cases` into the four severity categories with exact
/// per-category counts. Cases keep their input order.
pub fn assign_categories(mut cases: Vec<CaseRecord>, sizes: [usize; 4], rng: &mut SimRng) -> Result<Vec<CaseRecord>> {
    let total: usize = sizes.iter().sum();
    if total != cases.len() {
        return Err(Error::validation(format!(
            "category sizes {sizes:?} sum to {total}, cohort has {} cases",
            cases.len()
        )));
    }
    for (case, category) in cases.iter_mut().zip(category_draw(sizes, rng)) {
        case.severity = Some(category);
    }
    Ok(cases)
}

/// The category of each position in a random partition with exact counts.
pub fn category_draw(sizes: [usize; 4], rng: &mut SimRng) -> Vec<SeverityCategory> {
    let mut order: Vec<usize> = (0..sizes.iter().sum()).collect();
    rng.shuffle(&mut order);
    let mut out = vec![SeverityCategory::Minimal; order.len()];
    let mut next = 0;
    for (category, &size) in SeverityCategory::ALL.iter().zip(&sizes) {
        for &idx in &order[next..next + size] {
            out[idx] = *category;
        }
        next += size;
    }
    out
}

/// Train/val/test counts for one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        SplitCounts { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Proportional rescale to `size` cases by largest remainder. Any split
    /// that would come out empty borrows one case from the largest split,
    /// provided `size >= 3`.
    pub fn scaled_to(&self, size: usize) -> SplitCounts {
        let mut v = largest_remainder(size, &[self.train, self.val, self.test]);
        if size >= 3 {
            for i in 0..3 {
                if v[i] == 0 {
                    let donor = (0..3).max_by_key(|&j| (v[j], usize::MAX - j)).unwrap();
                    v[donor] -= 1;
                    v[i] += 1;
                }
            }
        }
        SplitCounts::new(v[0], v[1], v[2])
    }
}

/// Per-category split counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub per_category: BTreeMap<SeverityCategory, SplitCounts>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        let mut per_category = BTreeMap::new();
        per_category.insert(SeverityCategory::Minimal, SplitCounts::new(38, 6, 20));
        per_category.insert(SeverityCategory::Mild, SplitCounts::new(38, 6, 20));
        per_category.insert(SeverityCategory::Moderate, SplitCounts::new(38, 6, 20));
        per_category.insert(SeverityCategory::Severe, SplitCounts::new(40, 6, 21));
        SplitSpec { per_category }
    }
}

impl SplitSpec {
    pub fn uniform(counts: SplitCounts) -> Self {
        SplitSpec {
            per_category: SeverityCategory::ALL.iter().map(|&c| (c, counts)).collect(),
        }
    }

    /// The default spec rescaled to the given category sizes.
    pub fn scaled(sizes: [usize; 4]) -> Self {
        let base = SplitSpec::default();
        SplitSpec {
            per_category: SeverityCategory::ALL
                .iter()
                .zip(sizes)
                .map(|(&c, n)| (c, base.per_category[&c].scaled_to(n)))
                .collect(),
        }
    }

    pub fn counts(&self, category: SeverityCategory) -> SplitCounts {
        self.per_category
            .get(&category)
            .copied()
            .unwrap_or(SplitCounts::new(0, 0, 0))
    }
}

/// Random split of the cases of one category.
pub fn assign_splits(mut cases: Vec<CaseRecord>, counts: SplitCounts, rng: &mut SimRng) -> Result<Vec<CaseRecord>> {
    let splits = split_draw(cases.len(), counts, rng)?;
    for (case, split) in cases.iter_mut().zip(splits) {
        case.split = Some(split);
    }
    Ok(cases)
}

/// The split of each position in a random draw with exact counts.
pub fn split_draw(n: usize, counts: SplitCounts, rng: &mut SimRng) -> Result<Vec<Split>> {
    if counts.total() != n {
        return Err(Error::validation(format!(
            "split {}/{}/{} does not sum to {n} cases",
            counts.train, counts.val, counts.test
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut out = vec![Split::Train; n];
    for (k, &idx) in order.iter().enumerate() {
        out[idx] = if k < counts.train {
            Split::Train
        } else if k < counts.train + counts.val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

/// Splits every category of a categorized cohort according to `spec`.
/// Each category draws from its own stream so categories are independent.
pub fn assign_all_splits(cases: Vec<CaseRecord>, spec: &SplitSpec, seed: u64) -> Result<Vec<CaseRecord>> {
    let severities: Vec<SeverityCategory> = cases
        .iter()
        .map(|c| {
            c.severity
                .ok_or_else(|| Error::validation(format!("case {} has no severity", c.case_id)))
        })
        .collect::<Result<_>>()?;
    let splits = splits_for_categories(&severities, spec, seed)?;
    Ok(cases
        .into_iter()
        .zip(splits)
        .map(|(mut c, s)| {
            c.split = Some(s);
            c
        })
        .collect())
}

/// Split assignment for a list of categories (shared by the in-memory and
/// manifest paths).
pub fn splits_for_categories(severities: &[SeverityCategory], spec: &SplitSpec, seed: u64) -> Result<Vec<Split>> {
    let mut out = vec![Split::Train; severities.len()];
    for category in SeverityCategory::ALL {
        let members: Vec<usize> = (0..severities.len()).filter(|&i| severities[i] == category).collect();
        if members.is_empty() && spec.counts(category).total() == 0 {
            continue;
        }
        let mut rng = SimRng::derive(seed, crate::rng::Purpose::Split, category.index() as u64);
        let draw = split_draw(members.len(), spec.counts(category), &mut rng)
            .map_err(|e| Error::validation(format!("{category}: {e}")))?;
        for (&i, s) in members.iter().zip(draw) {
            out[i] = s;
        }
    }
    Ok(out)
}

/// Zero-mean, unit-std normalization using in-brain statistics (population
/// std). The same affine map applies to every pixel.
pub fn normalize_in_brain(image: &Image2D, brain_mask: &MaskGrid) -> Result<Image2D> {
    if image.shape() != brain_mask.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", image.shape(), brain_mask.shape())));
    }
    let inside: Vec<f64> = image
        .data()
        .iter()
        .zip(brain_mask.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v as f64)
        .collect();
    if inside.is_empty() {
        return Err(Error::validation("normalization needs a non-empty brain mask"));
    }
    let n = inside.len() as f64;
    let mean = inside.iter().sum::<f64>() / n;
    let var = inside.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std < 1e-8 { 1.0 } else { std };
    let out: Vec<f64> = image.data().iter().map(|&v| (v as f64 - mean) / scale).collect();
    Image2D::from_f64(image.height(), image.width(), &out)
}

/// Offsets (top, left, bottom, right) of a centered pad; odd remainders go
/// to the bottom/right.
pub fn pad_offsets(height: usize, width: usize, target_h: usize, target_w: usize) -> Result<(usize, usize, usize, usize)> {
    if height > target_h || width > target_w {
        return Err(Error::validation(format!(
            "{height}x{width} does not fit in {target_h}x{target_w}"
        )));
    }
    let top = (target_h - height) / 2;
    let left = (target_w - width) / 2;
    Ok((top, left, target_h - height - top, target_w - width - left))
}

fn pad_slice<T: Copy + Default>(data: &[T], h: usize, w: usize, target: usize) -> Result<Vec<T>> {
    let (top, left, _, _) = pad_offsets(h, w, target, target)?;
    let mut out = vec![T::default(); target * target];
    for r in 0..h {
        let dst = (top + r) * target + left;
        out[dst..dst + w].copy_from_slice(&data[r * w..(r + 1) * w]);
    }
    Ok(out)
}

/// Zero-pads an image to `target x target`.
pub fn pad_image(image: &Image2D, target: usize) -> Result<Image2D> {
    let data = pad_slice(image.data(), image.height(), image.width(), target)?;
    Image2D::new(target, target, data)
}

pub fn pad_mask(mask: &MaskGrid, target: usize) -> Result<MaskGrid> {
    let data = pad_slice(mask.data(), mask.height(), mask.width(), target)?;
    MaskGrid::new(target, target, data)
}

/// A training-ready slice: normalized, padded image plus its lesion target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub case_id: String,
    pub severity: Option<SeverityCategory>,
    pub image: Image2D,
    pub target: MaskGrid,
}

/// Normalize then pad.
pub fn preprocess(case: &CaseRecord, target: usize) -> Result<Sample> {
    let normalized = normalize_in_brain(&case.image, &case.brain_mask)?;
    Ok(Sample {
        case_id: case.case_id.clone(),
        severity: case.severity,
        image: pad_image(&normalized, target)?,
        target: pad_mask(&case.lesion_mask, target)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_cohort, PhantomConfig};

    #[test]
    fn largest_remainder_cases() {
        assert_eq!(scaled_category_sizes(259), [64, 64, 64, 67]);
        assert_eq!(scaled_category_sizes(16), [4, 4, 4, 4]);
        assert_eq!(scaled_category_sizes(64), [16, 16, 16, 16]);
        assert_eq!(largest_remainder(10, &[1, 1, 1]), vec![4, 3, 3]);
    }

    #[test]
    fn categories_exact_and_deterministic() {
        let cohort = generate_cohort(16, &PhantomConfig::with_size(32), 1).unwrap();
        let a = assign_categories(cohort.clone(), [4, 4, 4, 4], &mut SimRng::new(2)).unwrap();
        let b = assign_categories(cohort.clone(), [4, 4, 4, 4], &mut SimRng::new(2)).unwrap();
        assert_eq!(a, b);
        for cat in SeverityCategory::ALL {
            assert_eq!(a.iter().filter(|c| c.severity == Some(cat)).count(), 4);
        }
        assert!(assign_categories(cohort, [4, 4, 4, 5], &mut SimRng::new(2)).is_err());
    }

    #[test]
    fn full_cohort_category_draw() {
        let draw = category_draw(FULL_CATEGORY_SIZES, &mut SimRng::new(9));
        let counts: Vec<usize> = SeverityCategory::ALL
            .iter()
            .map(|c| draw.iter().filter(|d| *d == c).count())
            .collect();
        assert_eq!(counts, vec![64, 64, 64, 67]);
    }

    #[test]
    fn split_counts_full_and_desk() {
        let spec = SplitSpec::default();
        let mild = split_draw(64, spec.counts(SeverityCategory::Mild), &mut SimRng::new(1)).unwrap();
        let count = |s| mild.iter().filter(|&&x| x == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (38, 6, 20));
        let severe = split_draw(67, spec.counts(SeverityCategory::Severe), &mut SimRng::new(1)).unwrap();
        let count = |s| severe.iter().filter(|&&x| x == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (40, 6, 21));
        assert!(split_draw(5, SplitCounts::new(2, 1, 1), &mut SimRng::new(1)).is_err());
    }

    #[test]
    fn desk_scale_split_counts() {
        let spec = SplitSpec::scaled([4, 4, 4, 4]);
        for c in SeverityCategory::ALL {
            assert_eq!(spec.counts(c), SplitCounts::new(2, 1, 1));
        }
        let spec = SplitSpec::scaled([16, 16, 16, 16]);
        for c in SeverityCategory::ALL {
            assert_eq!(spec.counts(c), SplitCounts::new(10, 1, 5));
        }
        assert_eq!(SplitSpec::scaled(FULL_CATEGORY_SIZES), SplitSpec::default());
    }

    #[test]
    fn splits_partition_every_case() {
        let cohort = generate_cohort(16, &PhantomConfig::with_size(32), 4).unwrap();
        let cases = assign_categories(cohort, [4, 4, 4, 4], &mut SimRng::new(5)).unwrap();
        let cases = assign_all_splits(cases, &SplitSpec::scaled([4, 4, 4, 4]), 6).unwrap();
        for cat in SeverityCategory::ALL {
            let of: Vec<_> = cases.iter().filter(|c| c.severity == Some(cat)).collect();
            let n = |s| of.iter().filter(|c| c.split == Some(s)).count();
            assert_eq!((n(Split::Train), n(Split::Val), n(Split::Test)), (2, 1, 1));
        }
    }

    #[test]
    fn normalization_moments() {
        let cohort = generate_cohort(1, &PhantomConfig::default(), 8).unwrap();
        let case = &cohort[0];
        let out = normalize_in_brain(&case.image, &case.brain_mask).unwrap();
        let inside: Vec<f64> = out
            .data()
            .iter()
            .zip(case.brain_mask.data())
            .filter(|(_, &m)| m != 0)
            .map(|(&v, _)| v as f64)
            .collect();
        let n = inside.len() as f64;
        let mean = inside.iter().sum::<f64>() / n;
        let std = (inside.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn normalization_constant_and_empty() {
        let img = Image2D::from_fn(4, 4, |_, _| 3.0);
        let brain = MaskGrid::from_fn(4, 4, |r, _| r < 2);
        let out = normalize_in_brain(&img, &brain).unwrap();
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(out.get(r, c), 0.0);
            }
        }
        assert!(matches!(normalize_in_brain(&img, &MaskGrid::zeros(4, 4)), Err(Error::Validation(_))));
    }

    #[test]
    fn normalization_is_affine_invariant() {
        let cohort = generate_cohort(1, &PhantomConfig::default(), 9).unwrap();
        let case = &cohort[0];
        let base = normalize_in_brain(&case.image, &case.brain_mask).unwrap();
        let moved = case.image.map(|v| (3.5 * v as f64 + 2.0) as f32);
        let again = normalize_in_brain(&moved, &case.brain_mask).unwrap();
        for (a, b) in base.data().iter().zip(again.data()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn pad_geometry() {
        assert_eq!(pad_offsets(240, 240, 256, 256).unwrap(), (8, 8, 8, 8));
        assert_eq!(pad_offsets(5, 4, 8, 8).unwrap(), (1, 2, 2, 2));
        assert!(pad_offsets(9, 4, 8, 8).is_err());

        let img = Image2D::from_fn(64, 64, |r, c| (r * 64 + c) as f32);
        assert_eq!(pad_image(&img, 64).unwrap(), img);

        let small = Image2D::from_fn(5, 4, |_, _| 1.0);
        let padded = pad_image(&small, 8).unwrap();
        assert_eq!(padded.get(0, 3), 0.0);
        assert_eq!(padded.get(1, 2), 1.0);
        assert_eq!(padded.get(5, 5), 1.0);
        assert_eq!(padded.get(6, 5), 0.0);
        assert_eq!(padded.get(5, 6), 0.0);
        let mask = pad_mask(&MaskGrid::from_fn(5, 4, |_, _| true), 8).unwrap();
        assert_eq!(mask.count(), 20);
    }
}
