use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::VideoClip;

use super::clip::{generate_clip, mean_visible_centroid, GroundTruthFrame, Label, PhantomParams, DEFAULT_SPECKLE};
use super::gvid::{read_clip, write_clip};
use super::mask::MaskShape;

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const CLIP_DIR: &str = "clips";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Clip counts per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub no_ivc: usize,
    pub ivc_no_sniff: usize,
    pub ivc_sniff: usize,
}

impl Default for ClassCounts {
    fn default() -> Self {
        Self {
            no_ivc: 613,
            ivc_no_sniff: 177,
            ivc_sniff: 210,
        }
    }
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::NoIvc => self.no_ivc,
            Label::IvcNoSniff => self.ivc_no_sniff,
            Label::IvcSniff => self.ivc_sniff,
        }
    }

    pub fn total(&self) -> usize {
        self.no_ivc + self.ivc_no_sniff + self.ivc_sniff
    }

    /// Counts proportional to `self` summing to `total` (largest remainder).
    pub fn scaled_to(&self, total: usize) -> ClassCounts {
        let sum = self.total().max(1) as f64;
        let exact: Vec<f64> = Label::ALL.iter().map(|&l| self.get(l) as f64 * total as f64 / sum).collect();
        let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        let short = total - out.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            out[i] += 1;
        }
        ClassCounts {
            no_ivc: out[0],
            ivc_no_sniff: out[1],
            ivc_sniff: out[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default)]
    pub counts: ClassCounts,
    pub dims: [usize; 3],
    pub seed: u64,
    #[serde(default)]
    pub mask_shape: MaskShape,
    #[serde(default = "default_speckle")]
    pub speckle_strength: f64,
}

fn default_speckle() -> f64 {
    DEFAULT_SPECKLE
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            counts: ClassCounts::default(),
            dims: [16, 64, 64],
            seed: 42,
            mask_shape: MaskShape::Fan,
            speckle_strength: DEFAULT_SPECKLE,
        }
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Clip path relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    pub split: Split,
    pub seed: u64,
    pub gt: Vec<GroundTruthFrame>,
    pub contraction: f64,
}

impl ManifestEntry {
    pub fn mean_centroid(&self) -> Option<[f64; 2]> {
        mean_visible_centroid(&self.gt)
    }
}

/// Per-clip seed for the `index`-th clip of a dataset.
pub fn clip_seed(dataset_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(dataset_seed);
    rng.set_stream(index + 1);
    rng.next_u64()
}

/// Stratified 70/15/15 assignment for `n` clips of one class.
fn split_class(n: usize, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let n_train = (0.70 * n as f64).round() as usize;
    let n_val = ((0.15 * n as f64).round() as usize).min(n - n_train);
    let mut splits: Vec<Split> = (0..n)
        .map(|i| match i {
            i if i < n_train => Split::Train,
            i if i < n_train + n_val => Split::Val,
            _ => Split::Test,
        })
        .collect();
    splits.shuffle(rng);
    splits
}

/// Generates the entries (and clips) of a dataset without touching disk.
pub fn generate_entries(spec: &DatasetSpec) -> Result<Vec<(ManifestEntry, VideoClip)>> {
    let mut split_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.counts.total());
    let mut index = 0u64;
    for label in Label::ALL {
        let n = spec.counts.get(label);
        let splits = split_class(n, &mut split_rng);
        for split in splits {
            let seed = clip_seed(spec.seed, index);
            let params = PhantomParams::sample(label, spec.dims, spec.mask_shape, spec.speckle_strength, seed)?;
            let (clip, gt) = generate_clip(&params)?;
            out.push((
                ManifestEntry {
                    path: format!("{CLIP_DIR}/{index:05}.gvid"),
                    label,
                    split,
                    seed,
                    gt: gt.frames,
                    contraction: gt.contraction_fraction,
                },
                clip,
            ));
            index += 1;
        }
    }
    Ok(out)
}

/// Writes `clips/*.gvid` and `manifest.jsonl` under `dir`; returns the
/// manifest path.
pub fn generate_dataset(spec: &DatasetSpec, dir: &Path) -> Result<PathBuf> {
    let clip_dir = dir.join(CLIP_DIR);
    std::fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;
    let manifest_path = dir.join(MANIFEST_NAME);
    let mut manifest = Vec::new();
    for (entry, clip) in generate_entries(spec)? {
        write_clip(&dir.join(&entry.path), &clip)?;
        serde_json::to_writer(&mut manifest, &entry)?;
        manifest.push(b'\n');
    }
    let mut f = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(&manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

/// A parsed manifest with its base directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub base: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        let mut bad = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ManifestEntry>(line) {
                Ok(e) => entries.push(e),
                Err(e) => bad.push(format!("line {}: {e}", i + 1)),
            }
        }
        if !bad.is_empty() {
            return Err(Error::Manifest { entries: bad });
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { base, entries })
    }

    pub fn clip_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base.join(&entry.path)
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Loads the clips of `entries`; any unreadable file fails the whole call
    /// with every offending path listed.
    pub fn load<'a>(&self, entries: impl IntoIterator<Item = &'a ManifestEntry>) -> Result<Vec<(&'a ManifestEntry, VideoClip)>> {
        let mut out = Vec::new();
        let mut bad = Vec::new();
        for e in entries {
            match read_clip(&self.clip_path(e)) {
                Ok(c) => out.push((e, c)),
                Err(err) => bad.push(format!("{} ({err})", e.path)),
            }
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(Error::Manifest { entries: bad })
        }
    }

    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.label).or_default() += 1;
        }
        m
    }
}
