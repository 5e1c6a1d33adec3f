//! Dataset manifests and the 40/40/20 train/test/validation split.
//!
//! File layout: a `# seed=<u64>` header line, then one
//! `image_id<TAB>image_path<TAB>annotation_path<TAB>split` line per image.
//! Relative paths are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub annotation_path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

/// `(image_id, image_path, annotation_path)`
pub type ImageItem = (String, PathBuf, PathBuf);

/// Split sizes for `n` images: test and validation take the floor of 40 %
/// and 20 %; training takes the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let test = n * 2 / 5;
    let val = n / 5;
    (n - test - val, test, val)
}

/// Seeded shuffle, then contiguous train/test/val blocks. Entries keep
/// their input order in the manifest.
pub fn make_splits(items: Vec<ImageItem>, seed: u64) -> Result<DatasetManifest> {
    if items.is_empty() {
        return Err(Error::invalid("cannot split an empty image list"));
    }
    let mut seen = HashSet::new();
    if let Some((dup, _, _)) = items.iter().find(|(id, _, _)| !seen.insert(id.clone())) {
        return Err(Error::invalid(format!("duplicate image id {dup:?}")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
    let (train, test, _) = split_sizes(items.len());
    let mut splits = vec![Split::Val; items.len()];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + test {
            Split::Test
        } else {
            Split::Val
        };
    }
    Ok(DatasetManifest {
        seed,
        entries: items
            .into_iter()
            .zip(splits)
            .map(|((image_id, image_path, annotation_path), split)| ManifestEntry {
                image_id,
                image_path,
                annotation_path,
                split,
            })
            .collect(),
        base_dir: PathBuf::new(),
    })
}

impl DatasetManifest {
    /// Reassigns splits with a new seed.
    pub fn resplit(&self, seed: u64) -> Result<DatasetManifest> {
        let items = self
            .entries
            .iter()
            .map(|e| (e.image_id.clone(), e.image_path.clone(), e.annotation_path.clone()))
            .collect();
        Ok(DatasetManifest {
            base_dir: self.base_dir.clone(),
            ..make_splits(items, seed)?
        })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# seed={}\n", self.seed);
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.image_id,
                e.image_path.display(),
                e.annotation_path.display(),
                e.split
            ));
        }
        out
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>, context: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            context: context.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let seed = match lines.next() {
            Some((_, header)) => header
                .strip_prefix("# seed=")
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| err(1, format!("expected '# seed=<n>' header, found {header:?}")))?,
            None => return Err(err(1, "empty manifest".into())),
        };
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(i + 1, format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            let split = Split::parse(fields[3].trim())
                .ok_or_else(|| err(i + 1, format!("unknown split {:?}", fields[3])))?;
            if !seen.insert(fields[0].to_string()) {
                return Err(err(i + 1, format!("duplicate image id {:?}", fields[0])));
            }
            entries.push(ManifestEntry {
                image_id: fields[0].to_string(),
                image_path: PathBuf::from(fields[1]),
                annotation_path: PathBuf::from(fields[2]),
                split,
            });
        }
        Ok(DatasetManifest {
            seed,
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
