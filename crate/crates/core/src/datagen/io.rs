use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Episode, GeneratorConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: GeneratorConfig,
    /// Split name → episode indices.
    pub splits: BTreeMap<String, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Result<Vec<&Episode>> {
        let indices = self.manifest.splits.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.manifest.splits.keys().map(String::as_str).collect();
            Error::Invalid(format!("unknown split `{name}` (have: {})", known.join(", ")))
        })?;
        indices
            .iter()
            .map(|&i| {
                self.episodes
                    .get(i)
                    .ok_or_else(|| Error::Format(format!("split `{name}` refers to missing episode {i}")))
            })
            .collect()
    }
}

fn episode_path(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join("episodes").join(format!("{index:04}.json"))
}

/// Writes `manifest.json` and `episodes/NNNN.json`.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    let episodes = dir.join("episodes");
    std::fs::create_dir_all(&episodes).map_err(|e| Error::io(&episodes, e))?;
    let write = |path: &Path, text: String| std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e));
    for (i, ep) in dataset.episodes.iter().enumerate() {
        write(
            &episode_path(dir, i),
            serde_json::to_string_pretty(ep).expect("episode serializes"),
        )?;
    }
    write(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&dataset.manifest).expect("manifest serializes"),
    )
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let read = |path: &Path| std::fs::read_to_string(path).map_err(|e| Error::io(path, e));
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest =
        serde_json::from_str(&read(&manifest_path)?).map_err(|e| Error::json(&manifest_path, e))?;
    let total = manifest.splits.values().flatten().map(|&i| i + 1).max().unwrap_or(0);
    let episodes = (0..total)
        .map(|i| {
            let path = episode_path(dir, i);
            serde_json::from_str(&read(&path)?).map_err(|e| Error::json(&path, e))
        })
        .collect::<Result<Vec<Episode>>>()?;
    Ok(Dataset { manifest, episodes })
}

/// Contiguous disjoint split of `total` indices into `train` and the rest.
pub fn split_indices(total: usize, train: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if train > total {
        return Err(Error::Invalid(format!(
            "cannot take {train} training episodes from {total}"
        )));
    }
    Ok(((0..train).collect(), (train..total).collect()))
}
