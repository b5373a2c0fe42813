//! On-disk corpus layout.
//!
//! ```text
//! root/train/<class>/NNNN.pgm      classification
//! root/test/<class>/NNNN.pgm
//! root/images/NNNN.pgm             segmentation and infection
//! root/masks/NNNN.pgm              lung masks, 0/255
//! root/infected/NNNN.pgm           infection masks, 0/255
//! root/reports/NNNN.json           ground-truth InfectionReport
//! root/manifest.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{read_gray, write_pgm};
use crate::postproc::{BinaryMask, InfectionReport};
use crate::synthdata::{InfectionSample, SynthSpec};
use crate::training::{LabeledDataset, Target};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SynthSpec,
    /// Sample counts by split and class, e.g. `"train/positive"`.
    pub counts: BTreeMap<String, usize>,
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(root)?;
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    fs::write(root.join(MANIFEST), text + "\n")?;
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(root.join(MANIFEST))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("manifest: {e}")))
}

fn file_name(i: usize) -> String {
    format!("{i:04}.pgm")
}

fn is_image(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm"))
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Dataset(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Writes a classification set under `dir/<class>/NNNN.pgm`; returns the
/// per-class counts.
pub fn write_classification(dir: &Path, ds: &LabeledDataset) -> Result<Vec<usize>> {
    let mut counts = vec![0; ds.num_classes()];
    for name in ds.class_names() {
        fs::create_dir_all(dir.join(name))?;
    }
    for (i, s) in ds.samples().iter().enumerate() {
        let c = ds.label(i);
        write_pgm(dir.join(&ds.class_names()[c]).join(file_name(counts[c])), &s.image)?;
        counts[c] += 1;
    }
    Ok(counts)
}

/// Reads `dir/<class>/*.pgm`; classes are the subdirectories in name order.
pub fn read_classification(dir: &Path) -> Result<LabeledDataset> {
    let mut classes = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Dataset(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.is_dir() {
            classes.push(path);
        }
    }
    classes.sort();
    if classes.is_empty() {
        return Err(Error::Dataset(format!("{} has no class directories", dir.display())));
    }
    let mut names = Vec::new();
    let mut samples = Vec::new();
    for (c, class_dir) in classes.iter().enumerate() {
        names.push(class_dir.file_name().expect("dir entry").to_string_lossy().into_owned());
        for file in list_images(class_dir)? {
            samples.push((read_gray(&file).map_err(|e| Error::Dataset(format!("{}: {e}", file.display())))?, c));
        }
    }
    if samples.is_empty() {
        return Err(Error::Dataset(format!("{} contains no images", dir.display())));
    }
    LabeledDataset::classification(names, samples)
}

fn write_mask(path: PathBuf, mask: &BinaryMask) -> Result<()> {
    write_pgm(path, &mask.to_gray())
}

/// Writes `root/images` and `root/masks`.
pub fn write_segmentation(root: &Path, ds: &LabeledDataset) -> Result<()> {
    fs::create_dir_all(root.join("images"))?;
    fs::create_dir_all(root.join("masks"))?;
    for (i, s) in ds.samples().iter().enumerate() {
        let Target::Mask(m) = &s.target else {
            return Err(Error::Dataset("segmentation corpus needs masks".into()));
        };
        write_pgm(root.join("images").join(file_name(i)), &s.image)?;
        write_mask(root.join("masks").join(file_name(i)), m)?;
    }
    Ok(())
}

fn read_mask(path: &Path) -> Result<BinaryMask> {
    Ok(BinaryMask::from_gray(&read_gray(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?))
}

/// Pairs `root/images/X` with `root/masks/X`.
pub fn read_segmentation(root: &Path) -> Result<LabeledDataset> {
    let images = list_images(&root.join("images"))?;
    if images.is_empty() {
        return Err(Error::Dataset(format!("{} has no images", root.join("images").display())));
    }
    let mut samples = Vec::with_capacity(images.len());
    for path in images {
        let mask_path = root.join("masks").join(path.file_name().expect("file"));
        if !mask_path.is_file() {
            return Err(Error::Dataset(format!("no mask for {}", path.display())));
        }
        let image = read_gray(&path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        samples.push((image, read_mask(&mask_path)?));
    }
    LabeledDataset::segmentation(samples)
}

/// Writes images, lung masks, infection masks and ground-truth reports.
pub fn write_infection(root: &Path, samples: &[InfectionSample]) -> Result<()> {
    for sub in ["images", "masks", "infected", "reports"] {
        fs::create_dir_all(root.join(sub))?;
    }
    for (i, s) in samples.iter().enumerate() {
        write_pgm(root.join("images").join(file_name(i)), &s.image)?;
        write_mask(root.join("masks").join(file_name(i)), &s.lung)?;
        write_mask(root.join("infected").join(file_name(i)), &s.infected)?;
        let report = serde_json::to_string(&s.report).expect("report serialises");
        fs::write(root.join("reports").join(format!("{i:04}.json")), report + "\n")?;
    }
    Ok(())
}

/// Ground-truth report stored next to an infection corpus image.
pub fn read_report(path: &Path) -> Result<InfectionReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}
