//! Phong to microfacet specular mapping through an empirical conditional
//! distribution of roughness given a binned Phong key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Uniform roughness bins over `[0, 1]`.
pub const DEFAULT_ROUGHNESS_BINS: usize = 20;
const DECILES: usize = 10;

/// Phong parameters binned as (exponent decile, intensity decile).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhongKey {
    pub exponent: u8,
    pub intensity: u8,
}

impl PhongKey {
    pub fn new(exponent: u8, intensity: u8) -> Self {
        PhongKey { exponent, intensity }
    }

    fn distance(self, o: PhongKey) -> u32 {
        (self.exponent.abs_diff(o.exponent) + self.intensity.abs_diff(o.intensity)) as u32
    }
}

impl fmt::Display for PhongKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.exponent, self.intensity)
    }
}

/// One line of the observations CSV.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Observation {
    pub phong_exponent: f64,
    pub phong_intensity: f64,
    pub roughness: f64,
}

/// Reads `phong_exponent,phong_intensity,roughness` rows. A header line
/// with those names is optional.
pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<Observation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_observations(&text)
}

pub fn parse_observations(text: &str) -> Result<Vec<Observation>> {
    let has_header = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with("phong_exponent"));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        if i == 0 && has_header {
            continue;
        }
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let obs: Observation = rec
            .deserialize(None)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if ![obs.phong_exponent, obs.phong_intensity, obs.roughness].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        out.push(obs);
    }
    Ok(out)
}

/// Increasing bin edges; bin `i` covers `[edges[i], edges[i + 1])`, with
/// the last bin closed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges(Vec<f64>);

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue(format!("bin edges {edges:?} must be finite and strictly increasing")));
        }
        Ok(BinEdges(edges))
    }

    pub fn uniform(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidValue("at least one bin is required".into()));
        }
        Self::new((0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect())
    }

    pub fn roughness() -> Self {
        Self::uniform(DEFAULT_ROUGHNESS_BINS, 0.0, 1.0).expect("valid default bins")
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        (self.0[bin], self.0[bin + 1])
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let (lo, hi) = (self.0[0], *self.0.last().unwrap());
        if !(lo..=hi).contains(&v) {
            return None;
        }
        let i = self.0.partition_point(|e| *e <= v);
        Some((i - 1).min(self.len() - 1))
    }
}

/// Nine interior decile cut points of a sample.
fn decile_cuts(values: &mut [f64]) -> [f64; DECILES - 1] {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    std::array::from_fn(|k| values[((k + 1) * n / DECILES).min(n - 1)])
}

fn decile_of(cuts: &[f64; DECILES - 1], v: f64) -> u8 {
    cuts.partition_point(|c| *c <= v) as u8
}

/// Counts `N(p, m)` of roughness bin `m` under Phong key `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    bins: BinEdges,
    exponent_cuts: Option<[f64; DECILES - 1]>,
    intensity_cuts: Option<[f64; DECILES - 1]>,
    rows: BTreeMap<PhongKey, Vec<u64>>,
}

impl ConditionalTable {
    /// Table from pre-keyed observations.
    pub fn from_keyed(observations: &[(PhongKey, f64)], bins: BinEdges) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidValue("no observations".into()));
        }
        let mut rows: BTreeMap<PhongKey, Vec<u64>> = BTreeMap::new();
        for &(key, m) in observations {
            let b = bins
                .bin_of(m)
                .ok_or_else(|| Error::OutOfRange(format!("value {m} outside bins {:?}", bins.edges())))?;
            rows.entry(key).or_insert_with(|| vec![0; bins.len()])[b] += 1;
        }
        Ok(ConditionalTable {
            bins,
            exponent_cuts: None,
            intensity_cuts: None,
            rows,
        })
    }

    pub fn bins(&self) -> &BinEdges {
        &self.bins
    }

    pub fn keys(&self) -> impl Iterator<Item = PhongKey> + '_ {
        self.rows.keys().copied()
    }

    pub fn counts(&self, key: PhongKey) -> Option<&[u64]> {
        self.rows.get(&key).map(|r| r.as_slice())
    }

    /// Normalised row `P(m | p)`.
    pub fn probabilities(&self, key: PhongKey) -> Result<Vec<f64>> {
        let row = self.row(key)?;
        let total: u64 = row.iter().sum();
        Ok(row.iter().map(|c| *c as f64 / total as f64).collect())
    }

    /// Key of raw Phong parameters under the decile cuts learnt at build time.
    pub fn key_for(&self, phong_exponent: f64, phong_intensity: f64) -> Result<PhongKey> {
        match (&self.exponent_cuts, &self.intensity_cuts) {
            (Some(e), Some(i)) => Ok(PhongKey::new(decile_of(e, phong_exponent), decile_of(i, phong_intensity))),
            _ => Err(Error::InvalidValue("table was built from pre-keyed observations".into())),
        }
    }

    fn row(&self, key: PhongKey) -> Result<&[u64]> {
        self.rows.get(&key).map(|r| r.as_slice()).ok_or_else(|| {
            let mut keys: Vec<PhongKey> = self.rows.keys().copied().collect();
            keys.sort_by_key(|k| (k.distance(key), *k));
            let nearest: Vec<String> = keys.iter().take(3).map(|k| k.to_string()).collect();
            Error::UnknownKey {
                key: key.to_string(),
                nearest: nearest.join(", "),
            }
        })
    }

    /// Draws a roughness for `key`: a bin by inverse CDF, then a uniform
    /// value inside it.
    pub fn sample_with(&self, key: PhongKey, rng: &mut impl Rng) -> Result<f64> {
        let row = self.row(key)?;
        let total: u64 = row.iter().sum();
        let target = rng.random_range(0..total);
        let mut acc = 0;
        let bin = row
            .iter()
            .position(|c| {
                acc += c;
                acc > target
            })
            .expect("target below row total");
        let (lo, hi) = self.bins.bounds(bin);
        Ok(rng.random_range(lo..hi))
    }

    /// `n` samples from one seeded stream.
    pub fn sample_many(&self, key: PhongKey, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_with(key, &mut rng)).collect()
    }

    /// Key-value text form.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut out = format!("bins = {}\n", join(self.bins.edges()));
        if let (Some(e), Some(i)) = (&self.exponent_cuts, &self.intensity_cuts) {
            out += &format!("exponent_deciles = {}\n", join(e));
            out += &format!("intensity_deciles = {}\n", join(i));
        }
        for (k, row) in &self.rows {
            let counts: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out += &format!("row {} {} = {}\n", k.exponent, k.intensity, counts.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut bins = None;
        let (mut exponent_cuts, mut intensity_cuts) = (None, None);
        let mut rows = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Parse { line, message };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (key, value) = l.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let floats = || -> Result<Vec<f64>> {
                value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t}: {e}"))))
                    .collect()
            };
            let cuts = || -> Result<[f64; DECILES - 1]> {
                floats()?.try_into().map_err(|_| err("expected nine decile cuts".into()))
            };
            let mut words = key.split_whitespace();
            match words.next() {
                Some("bins") => bins = Some(BinEdges::new(floats()?).map_err(|e| err(e.to_string()))?),
                Some("exponent_deciles") => exponent_cuts = Some(cuts()?),
                Some("intensity_deciles") => intensity_cuts = Some(cuts()?),
                Some("row") => {
                    let mut decile = || -> Result<u8> {
                        let t = words.next().ok_or_else(|| err("row needs two key indices".into()))?;
                        t.parse().map_err(|e| err(format!("{t}: {e}")))
                    };
                    let k = PhongKey::new(decile()?, decile()?);
                    let counts: Vec<u64> = value
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|e| err(format!("{t}: {e}"))))
                        .collect::<Result<_>>()?;
                    if counts.iter().sum::<u64>() == 0 {
                        return Err(err(format!("row {k} has no counts")));
                    }
                    rows.insert(k, counts);
                }
                _ => return Err(err(format!("unknown key `{}`", key.trim()))),
            }
        }
        let bins = bins.ok_or(Error::Parse {
            line: 0,
            message: "missing `bins`".into(),
        })?;
        if let Some((k, r)) = rows.iter().find(|(_, r)| r.len() != bins.len()) {
            return Err(Error::Parse {
                line: 0,
                message: format!("row {k} has {} counts for {} bins", r.len(), bins.len()),
            });
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "table has no rows".into(),
            });
        }
        Ok(ConditionalTable {
            bins,
            exponent_cuts,
            intensity_cuts,
            rows,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Table over decile Phong keys and 20 uniform roughness bins.
pub fn build_conditional(observations: &[Observation]) -> Result<ConditionalTable> {
    if observations.is_empty() {
        return Err(Error::InvalidValue("no observations".into()));
    }
    let e_cuts = decile_cuts(&mut observations.iter().map(|o| o.phong_exponent).collect::<Vec<_>>());
    let i_cuts = decile_cuts(&mut observations.iter().map(|o| o.phong_intensity).collect::<Vec<_>>());
    let keyed: Vec<(PhongKey, f64)> = observations
        .iter()
        .map(|o| {
            let k = PhongKey::new(decile_of(&e_cuts, o.phong_exponent), decile_of(&i_cuts, o.phong_intensity));
            (k, o.roughness)
        })
        .collect();
    let mut table = ConditionalTable::from_keyed(&keyed, BinEdges::roughness())?;
    table.exponent_cuts = Some(e_cuts);
    table.intensity_cuts = Some(i_cuts);
    Ok(table)
}

/// One seeded roughness draw for `key`.
pub fn sample_conditional(table: &ConditionalTable, key: PhongKey, seed: u64) -> Result<f64> {
    table.sample_with(key, &mut ChaCha8Rng::seed_from_u64(seed))
}
