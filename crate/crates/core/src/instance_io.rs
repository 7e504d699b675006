//! Instance generation, OR-Library style instance files and best-known
//! reference tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Time};
use crate::seeding::mix_seed;

/// Tardiness factor and relative due-date range values used by the
/// benchmark generator.
pub const FACTOR_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub tf: f64,
    pub rdd: f64,
    pub seed: u64,
    pub p_range: (Time, Time),
    pub w_range: (u64, u64),
}

impl GeneratorConfig {
    pub fn new(n: usize, tf: f64, rdd: f64, seed: u64) -> Self {
        Self {
            n,
            tf,
            rdd,
            seed,
            p_range: (1, 100),
            w_range: (1, 10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("job count must be at least 1".into()));
        }
        for (name, v) in [("TF", self.tf), ("RDD", self.rdd)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} is outside (0, 1]")));
            }
        }
        let (plo, phi) = self.p_range;
        let (wlo, whi) = self.w_range;
        if plo < 1 || plo > phi || wlo < 1 || wlo > whi {
            return Err(Error::Config(
                "processing time and weight ranges need 1 <= low <= high".into(),
            ));
        }
        Ok(())
    }

    /// Integer due-date bounds `[ceil(S(1-TF-RDD/2)), floor(S(1-TF+RDD/2))]`
    /// before clamping at zero. Factors are resolved to thousandths so the
    /// bounds are exact.
    pub fn due_date_bounds(&self, total_processing: Time) -> (i64, i64) {
        let tf = (self.tf * 1000.0).round() as i64;
        let rdd = (self.rdd * 1000.0).round() as i64;
        let s = total_processing as i64;
        // S * (2000 - 2 tf - rdd) / 2000 and S * (2000 - 2 tf + rdd) / 2000
        let lo_num = s * (2000 - 2 * tf - rdd);
        let hi_num = s * (2000 - 2 * tf + rdd);
        (
            lo_num.div_euclid(2000) + i64::from(lo_num.rem_euclid(2000) != 0),
            hi_num.div_euclid(2000),
        )
    }
}

fn instance_id(n: usize, tf: f64, rdd: f64, replicate: usize) -> String {
    format!("n{n}_tf{tf:.1}_rdd{rdd:.1}_{}", replicate + 1)
}

pub fn generate_instance(cfg: &GeneratorConfig) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (plo, phi) = cfg.p_range;
    let (wlo, whi) = cfg.w_range;
    let p: Vec<Time> = (0..cfg.n).map(|_| rng.random_range(plo..=phi)).collect();
    let w: Vec<u64> = (0..cfg.n).map(|_| rng.random_range(wlo..=whi)).collect();
    let (lo, hi) = cfg.due_date_bounds(p.iter().sum());
    // Narrow ranges can contain no lattice point; collapse onto the floor.
    let (lo, hi) = if lo > hi { (hi, hi) } else { (lo, hi) };
    let d: Vec<Time> = (0..cfg.n)
        .map(|_| rng.random_range(lo..=hi).max(0) as Time)
        .collect();
    Instance::from_columns(instance_id(cfg.n, cfg.tf, cfg.rdd, 0), &p, &d, &w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationEntry {
    pub instance: Instance,
    pub tf: f64,
    pub rdd: f64,
    pub seed: u64,
}

impl EvaluationEntry {
    /// Grouping key `(RDD, TF)` in thousandths.
    pub fn group(&self) -> (u32, u32) {
        group_key(self.rdd, self.tf)
    }
}

pub fn group_key(rdd: f64, tf: f64) -> (u32, u32) {
    ((rdd * 1000.0).round() as u32, (tf * 1000.0).round() as u32)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationSet {
    pub entries: Vec<EvaluationEntry>,
}

impl EvaluationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.entries.iter().map(|e| &e.instance)
    }

    /// Entries grouped by `(RDD, TF)`, keys in thousandths.
    pub fn groups(&self) -> BTreeMap<(u32, u32), Vec<&EvaluationEntry>> {
        let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for e in &self.entries {
            out.entry(e.group()).or_default().push(e);
        }
        out
    }
}

/// `per_combo` instances of `n` jobs for each of the 25 TF x RDD combinations.
pub fn generate_evaluation_set(n: usize, per_combo: usize, seed: u64) -> Result<EvaluationSet> {
    if per_combo < 1 {
        return Err(Error::Config("per_combo must be at least 1".into()));
    }
    let mut entries = Vec::with_capacity(25 * per_combo);
    for (ti, &tf) in FACTOR_GRID.iter().enumerate() {
        for (ri, &rdd) in FACTOR_GRID.iter().enumerate() {
            for rep in 0..per_combo {
                let child = mix_seed(seed, &[ti as u64, ri as u64, rep as u64]);
                let cfg = GeneratorConfig::new(n, tf, rdd, child);
                let instance = generate_instance(&cfg)?.with_id(instance_id(n, tf, rdd, rep));
                entries.push(EvaluationEntry {
                    instance,
                    tf,
                    rdd,
                    seed: child,
                });
            }
        }
    }
    Ok(EvaluationSet { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    ProcessingTime,
    Weight,
    DueDate,
}

/// Order of the three n-value blocks inside one instance record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout(pub [Field; 3]);

impl Default for BlockLayout {
    /// processing times, weights, due dates
    fn default() -> Self {
        Self([Field::ProcessingTime, Field::Weight, Field::DueDate])
    }
}

impl std::str::FromStr for BlockLayout {
    type Err = Error;

    /// Three letters from `p`, `w`, `d`, e.g. `pwd`.
    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<Field> = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'p' => Ok(Field::ProcessingTime),
                'w' => Ok(Field::Weight),
                'd' => Ok(Field::DueDate),
                other => Err(Error::Config(format!("unknown layout field '{other}'"))),
            })
            .collect::<Result<_>>()?;
        let arr: [Field; 3] = fields
            .try_into()
            .map_err(|_| Error::Config(format!("layout '{s}' must name three fields")))?;
        if arr[0] == arr[1] || arr[1] == arr[2] || arr[0] == arr[2] {
            return Err(Error::Config(format!("layout '{s}' repeats a field")));
        }
        Ok(Self(arr))
    }
}

struct Token {
    offset: usize,
    value: i64,
}

fn tokenize(text: &[u8]) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < text.len() {
        if text[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < text.len() && !text[i].is_ascii_whitespace() {
            i += 1;
        }
        let raw = std::str::from_utf8(&text[start..i]).map_err(|_| Error::Parse {
            offset: start,
            message: "token is not valid UTF-8".into(),
        })?;
        let value = raw.parse::<i64>().map_err(|_| Error::Parse {
            offset: start,
            message: format!("'{raw}' is not an integer"),
        })?;
        tokens.push(Token {
            offset: start,
            value,
        });
    }
    Ok(tokens)
}

/// Parses consecutive blocks of `3n` integers into instances named
/// `{stem}_{k}` for `k = 1, 2, ...`.
pub fn parse_orlib(
    text: &[u8],
    n: usize,
    stem: &str,
    layout: BlockLayout,
) -> Result<Vec<Instance>> {
    if n == 0 {
        return Err(Error::Config("job count must be at least 1".into()));
    }
    let tokens = tokenize(text)?;
    if tokens.is_empty() || tokens.len() % (3 * n) != 0 {
        return Err(Error::Parse {
            offset: text.len(),
            message: format!(
                "found {} integers, expected a positive multiple of {}",
                tokens.len(),
                3 * n
            ),
        });
    }
    let mut out = Vec::with_capacity(tokens.len() / (3 * n));
    for (k, block) in tokens.chunks(3 * n).enumerate() {
        let mut p = Vec::new();
        let mut w = Vec::new();
        let mut d = Vec::new();
        for (field, values) in layout.0.iter().zip(block.chunks(n)) {
            for tok in values {
                let ok = match field {
                    Field::ProcessingTime | Field::Weight => tok.value >= 1,
                    Field::DueDate => tok.value >= 0,
                };
                if !ok {
                    return Err(Error::Parse {
                        offset: tok.offset,
                        message: format!("{field:?} value {} is out of range", tok.value),
                    });
                }
                let v = tok.value as u64;
                match field {
                    Field::ProcessingTime => p.push(v),
                    Field::Weight => w.push(v),
                    Field::DueDate => d.push(v),
                }
            }
        }
        out.push(Instance::from_columns(
            format!("{stem}_{}", k + 1),
            &p,
            &d,
            &w,
        )?);
    }
    Ok(out)
}

/// Parses a file holding exactly one instance, inferring `n` from the
/// integer count.
pub fn parse_single(text: &[u8], id: &str, layout: BlockLayout) -> Result<Instance> {
    let count = tokenize(text)?.len();
    if count == 0 || count % 3 != 0 {
        return Err(Error::Parse {
            offset: text.len(),
            message: format!("found {count} integers, expected a positive multiple of 3"),
        });
    }
    let mut v = parse_orlib(text, count / 3, id, layout)?;
    Ok(v.remove(0).with_id(id))
}

/// Writes instances in the default layout, one line per block.
pub fn serialize_orlib(instances: &[Instance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let line = |vals: Vec<u64>| {
            vals.iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        let jobs = inst.jobs();
        let _ = writeln!(
            out,
            "{}",
            line(jobs.iter().map(|j| j.processing_time).collect())
        );
        let _ = writeln!(out, "{}", line(jobs.iter().map(|j| j.weight).collect()));
        let _ = writeln!(out, "{}", line(jobs.iter().map(|j| j.due_date).collect()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReferenceTable {
    best: BTreeMap<String, u64>,
}

impl ReferenceTable {
    pub fn get(&self, id: &str) -> Option<u64> {
        self.best.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, best_twt: u64) -> Result<()> {
        let id = id.into();
        if self.best.contains_key(&id) {
            return Err(Error::Reference(format!("duplicate id '{id}'")));
        }
        self.best.insert(id, best_twt);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.best.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Reads `id,best_twt` rows. The header row is optional.
pub fn load_reference(text: &str) -> Result<ReferenceTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut table = ReferenceTable::default();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Reference(format!(
                "row {} has {} fields, expected 2",
                line + 1,
                record.len()
            )));
        }
        if line == 0 && &record[0] == "id" && &record[1] == "best_twt" {
            continue;
        }
        let value: i64 = record[1].parse().map_err(|_| {
            Error::Reference(format!(
                "row {}: '{}' is not an integer",
                line + 1,
                &record[1]
            ))
        })?;
        if value < 0 {
            return Err(Error::Reference(format!(
                "row {}: negative best value {value}",
                line + 1
            )));
        }
        table.insert(&record[0], value as u64)?;
    }
    Ok(table)
}
