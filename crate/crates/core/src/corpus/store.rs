//! Corpus directories: one PGM + sidecar per map and a `corpus.json`
//! manifest listing them in order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, ManifestEntry};
use crate::error::{Error, Result};
use crate::raster::{read_map, write_map};

pub const MANIFEST_FILE: &str = "corpus.json";
pub const QUANTIZATION_STEP: f64 = 1.0 / 65535.0;

#[derive(Serialize, Deserialize)]
struct StoredEntry {
    path: String,
    #[serde(flatten)]
    entry: ManifestEntry,
}

fn file_name(i: usize) -> String {
    format!("map_{i:05}.pgm")
}

pub(super) fn save(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut stored = Vec::with_capacity(corpus.len());
    for (i, (m, e)) in corpus.maps.iter().zip(&corpus.manifest).enumerate() {
        let name = file_name(i);
        write_map(m, &dir.join(&name))?;
        stored.push(StoredEntry {
            path: name,
            entry: e.clone(),
        });
    }
    let mut text = serde_json::to_string_pretty(&stored)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub(super) fn load(dir: &Path) -> Result<Corpus> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::parse("corpus.json", format!("{}: {e}", path.display())))?;
    let stored: Vec<StoredEntry> = serde_json::from_str(&text).map_err(|e| Error::parse("corpus.json", e.to_string()))?;
    let mut maps = Vec::with_capacity(stored.len());
    let mut manifest = Vec::with_capacity(stored.len());
    for s in stored {
        if Path::new(&s.path).is_absolute() || s.path.contains("..") {
            return Err(Error::parse("path", format!("{} is not a relative path inside the corpus", s.path)));
        }
        maps.push(read_map(&dir.join(&s.path)).map_err(|e| e.with_source(&s.entry.id))?);
        manifest.push(s.entry);
    }
    Corpus::new(maps, manifest)
}

/// SHA-256 over geometry, manifest, metadata and the 16-bit quantized
/// values, so the hash survives a save/load round trip.
pub(super) fn hash(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    h.update((corpus.width() as u64).to_le_bytes());
    h.update(corpus.pixel_size().to_le_bytes());
    h.update((corpus.len() as u64).to_le_bytes());
    for (m, e) in corpus.maps.iter().zip(&corpus.manifest) {
        let header = serde_json::to_vec(&(e, &m.meta)).expect("manifest serializes");
        h.update((header.len() as u64).to_le_bytes());
        h.update(&header);
        for &v in m.values() {
            h.update(((v * 65535.0).round() as u16).to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
