use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wpaco::instance_io::{group_key, parse_orlib, parse_single};
use wpaco::{Instance, RunResult};

use crate::args::InputArgs;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub tf: f64,
    pub rdd: f64,
    pub seed: u64,
    pub n: usize,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<ManifestRow>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Instance id -> `(RDD, TF)` key in thousandths.
pub fn manifest_groups(rows: &[ManifestRow]) -> BTreeMap<String, (u32, u32)> {
    rows.iter()
        .map(|r| (r.id.clone(), group_key(r.rdd, r.tf)))
        .collect()
}

pub struct Loaded {
    pub instances: Vec<Instance>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn load_file(path: &Path, input: &InputArgs, id: Option<&str>) -> Result<Vec<Instance>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = id.map(str::to_string).unwrap_or_else(|| stem(path));
    let parsed = match input.n {
        Some(n) => parse_orlib(&bytes, n, &name, input.layout),
        None => parse_single(&bytes, &name, input.layout).map(|i| vec![i]),
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn is_instance_file(path: &Path) -> bool {
    path.is_file()
        && !matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("csv" | "json" | "jsonl")
        )
}

pub fn load_instances(input: &InputArgs) -> Result<Loaded> {
    let mut instances = Vec::new();
    for path in &input.instances {
        if path.is_dir() {
            let manifest = path.join(MANIFEST);
            if manifest.is_file() {
                let rows = read_manifest(&manifest)?;
                for r in &rows {
                    let file = path.join(format!("{}.txt", r.id));
                    instances.extend(load_file(&file, input, Some(&r.id))?);
                }
            } else {
                let mut files: Vec<PathBuf> = fs::read_dir(path)
                    .with_context(|| format!("listing {}", path.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| is_instance_file(p))
                    .collect();
                files.sort();
                for f in files {
                    instances.extend(load_file(&f, input, None)?);
                }
            }
        } else {
            instances.extend(load_file(path, input, None)?);
        }
    }
    if instances.is_empty() {
        bail!("no instances found");
    }
    let mut seen = std::collections::BTreeSet::new();
    for i in &instances {
        if !seen.insert(i.id()) {
            bail!("duplicate instance id '{}'", i.id());
        }
    }
    Ok(Loaded { instances })
}

/// One line of results.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub label: String,
    pub rep: usize,
    #[serde(flatten)]
    pub result: RunResult,
}

pub fn read_records(path: &Path) -> Result<Vec<SolveRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Keeps file names portable whatever an id contains.
pub fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}
