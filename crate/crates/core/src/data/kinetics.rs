use std::path::{Path, PathBuf};

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use super::SkeletonSequence;
use crate::error::{Error, Result};
use crate::modules::ChannelSemantics;

/// Joints and persons kept when reading a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipFormat {
    pub joints: usize,
    pub persons: usize,
}

impl Default for ClipFormat {
    fn default() -> Self {
        ClipFormat { joints: 18, persons: 2 }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClipFile {
    #[serde(default)]
    data: Vec<FrameRecord>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    label_index: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    #[serde(default)]
    frame_index: Option<i64>,
    #[serde(default)]
    skeleton: Vec<PersonRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersonRecord {
    pose: Vec<f64>,
    score: Vec<f64>,
}

/// Parses one clip in the Kinetics-skeleton JSON layout.
///
/// Frames are taken in list order. In each frame the `format.persons`
/// skeletons with the highest summed score are kept. Normalized x and y are
/// shifted by -0.5, and joints with zero score are zeroed. A clip without
/// frames becomes a single all-zero frame.
pub fn parse_kinetics_clip(text: &str, id: &str, format: ClipFormat) -> Result<SkeletonSequence> {
    let clip: ClipFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("{id}: {e}")))?;
    let n = format.joints;
    let t_raw = clip.data.len().max(1);
    let mut coords = Array4::<f32>::zeros((format.persons, 3, t_raw, n));

    for (t, frame) in clip.data.iter().enumerate() {
        for (i, person) in frame.skeleton.iter().enumerate() {
            if person.pose.len() != 2 * n || person.score.len() != n {
                return Err(Error::Data(format!(
                    "{id}: frame {t} (frame_index {:?}), skeleton {i}: expected {} pose values and {n} scores, got {} and {}",
                    frame.frame_index,
                    2 * n,
                    person.pose.len(),
                    person.score.len()
                )));
            }
            if person.pose.iter().chain(&person.score).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("{id}: frame {t}, skeleton {i}: non-finite value")));
            }
        }
        let mut order: Vec<usize> = (0..frame.skeleton.len()).collect();
        let total = |i: usize| frame.skeleton[i].score.iter().sum::<f64>();
        order.sort_by(|&a, &b| total(b).total_cmp(&total(a)));
        for (m, &i) in order.iter().take(format.persons).enumerate() {
            let p = &frame.skeleton[i];
            for j in 0..n {
                let conf = p.score[j];
                if conf == 0.0 {
                    continue;
                }
                coords[[m, 0, t, j]] = (p.pose[2 * j] - 0.5) as f32;
                coords[[m, 1, t, j]] = (p.pose[2 * j + 1] - 0.5) as f32;
                coords[[m, 2, t, j]] = conf as f32;
            }
        }
    }

    Ok(SkeletonSequence {
        coords,
        semantics: ChannelSemantics::XyConf,
        label: clip.label_index.and_then(|l| usize::try_from(l).ok()),
        id: id.to_string(),
    })
}

pub fn load_kinetics_clip(path: impl AsRef<Path>, format: ClipFormat) -> Result<SkeletonSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_kinetics_clip(&text, &path.display().to_string(), format)
}

/// Serializes a 2-D clip in the layout [`parse_kinetics_clip`] reads.
/// Persons whose every value in a frame is zero are omitted from that frame.
pub fn write_kinetics_clip(seq: &SkeletonSequence) -> Result<String> {
    if seq.semantics != ChannelSemantics::XyConf {
        return Err(Error::Data("the Kinetics layout holds (x, y, score) clips only".into()));
    }
    let (m, _, t, n) = seq.coords.dim();
    let mut data = Vec::with_capacity(t);
    for f in 0..t {
        let mut skeleton = Vec::new();
        for p in 0..m {
            let person = seq.coords.slice(ndarray::s![p, .., f, ..]);
            if person.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut pose = Vec::with_capacity(2 * n);
            let mut score = Vec::with_capacity(n);
            for j in 0..n {
                let conf = person[[2, j]] as f64;
                if conf == 0.0 {
                    pose.extend([0.0, 0.0]);
                } else {
                    pose.extend([person[[0, j]] as f64 + 0.5, person[[1, j]] as f64 + 0.5]);
                }
                score.push(conf);
            }
            skeleton.push(PersonRecord { pose, score });
        }
        data.push(FrameRecord {
            frame_index: Some(f as i64 + 1),
            skeleton,
        });
    }
    let file = ClipFile {
        data,
        label: seq.label.map(|l| format!("class_{l}")),
        label_index: seq.label.map(|l| l as i64),
    };
    Ok(serde_json::to_string(&file)?)
}

/// One manifest line: a clip path and its label, if the line gives one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Option<usize>,
}

/// Reads a manifest: one clip per line as `path [label]`, relative paths
/// resolved against the manifest's directory, `#` starting a comment line.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (clip, label) = match line.rsplit_once(char::is_whitespace) {
            Some((p, l)) => {
                let label = l
                    .parse()
                    .map_err(|_| Error::Data(format!("{}:{}: bad label `{l}`", path.display(), i + 1)))?;
                (p.trim_end(), Some(label))
            }
            None => (line, None),
        };
        entries.push(ManifestEntry {
            path: base.join(clip),
            label,
        });
    }
    if entries.is_empty() {
        return Err(Error::Data(format!("manifest {} lists no clips", path.display())));
    }
    Ok(entries)
}

/// Writes each clip as `clip_NNNN.json` under `dir` plus `manifest.txt`,
/// and returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, clips: &[SkeletonSequence]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, clip) in clips.iter().enumerate() {
        let name = format!("clip_{i:04}.json");
        std::fs::write(dir.join(&name), write_kinetics_clip(clip)?)?;
        manifest.push_str(&name);
        if let Some(l) = clip.label {
            manifest.push_str(&format!(" {l}"));
        }
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest)?;
    Ok(path)
}
