use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{product_spectrum, spectrum, spectrum_direction_mode, Spectrum, WeightedChiSquare, DEFAULT_GRID_FACTOR, DEFAULT_TRUNCATION};
use crate::{Error, Result};

/// Tag stored with every cached value; records with another tag are ignored.
pub const GENERATOR_VERSION: &str = "codcov-nulldist-1";

/// Seed of the isotropic random directions used by spectrum grids in
/// dimension four and above.
pub const SPECTRUM_SEED: u64 = 0x5E_ED0F_BA11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueRequest {
    pub p: usize,
    pub q: usize,
    pub alpha: f64,
    pub m_r: usize,
    pub m_s: usize,
    pub truncation: usize,
}

impl CriticalValueRequest {
    pub fn new(p: usize, q: usize, alpha: f64) -> Self {
        CriticalValueRequest {
            p,
            q,
            alpha,
            m_r: DEFAULT_GRID_FACTOR,
            m_s: DEFAULT_GRID_FACTOR,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Err(Error::param("dimensions must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.truncation == 0 {
            return Err(Error::param("truncation must be at least 1"));
        }
        Ok(())
    }

    /// The law is symmetric in the two dimensions.
    fn key(&self) -> Key {
        Key {
            small: self.p.min(self.q),
            large: self.p.max(self.q),
            alpha: self.alpha.to_bits(),
            m_r: self.m_r,
            m_s: self.m_s,
            truncation: self.truncation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Key {
    small: usize,
    large: usize,
    alpha: u64,
    m_r: usize,
    m_s: usize,
    truncation: usize,
}

/// One line of the cache file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub p: usize,
    pub q: usize,
    pub alpha: f64,
    #[serde(rename = "M_R")]
    pub m_r: usize,
    #[serde(rename = "M_S")]
    pub m_s: usize,
    #[serde(rename = "K")]
    pub truncation: usize,
    pub value: f64,
    pub generator_version: String,
}

type LawKey = (usize, usize, usize, usize, usize);

/// Critical values `Q_{1-alpha}` with an optional line-delimited JSON store.
///
/// Spectra and the derived laws are memoized in memory so that several
/// levels for the same dimensions share one eigen-decomposition.
#[derive(Default)]
pub struct CriticalValues {
    path: Option<PathBuf>,
    values: Mutex<HashMap<Key, f64>>,
    spectra: Mutex<HashMap<(usize, usize, usize), Arc<Spectrum>>>,
    laws: Mutex<HashMap<LawKey, Arc<WeightedChiSquare>>>,
    solves: AtomicUsize,
}

impl CriticalValues {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing records from `path`; new values are appended to it.
    /// A missing file is created lazily; unreadable lines are skipped.
    pub fn with_file(path: impl AsRef<Path>) -> Self {
        let path = path.as_ref().to_path_buf();
        let mut values = HashMap::new();
        match std::fs::File::open(&path) {
            Ok(file) => {
                for (lineno, line) in BufReader::new(file).lines().enumerate() {
                    let Ok(line) = line else { break };
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<CacheRecord>(&line) {
                        Ok(rec) if rec.generator_version == GENERATOR_VERSION => {
                            let req = CriticalValueRequest {
                                p: rec.p,
                                q: rec.q,
                                alpha: rec.alpha,
                                m_r: rec.m_r,
                                m_s: rec.m_s,
                                truncation: rec.truncation,
                            };
                            values.insert(req.key(), rec.value);
                        }
                        Ok(_) => {}
                        Err(e) => log::warn!("{}:{}: skipping cache line: {e}", path.display(), lineno + 1),
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => log::warn!("cannot read critical-value cache {}: {e}", path.display()),
        }
        CriticalValues {
            path: Some(path),
            values: Mutex::new(values),
            ..Default::default()
        }
    }

    /// Number of eigen-decompositions performed by this instance (the
    /// one-dimensional spectrum is closed form and not counted).
    pub fn spectral_solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Cached value, if present.
    pub fn lookup(&self, req: &CriticalValueRequest) -> Option<f64> {
        self.values.lock().expect("cache lock").get(&req.key()).copied()
    }

    pub fn get(&self, req: &CriticalValueRequest) -> Result<f64> {
        req.validate()?;
        if let Some(v) = self.lookup(req) {
            return Ok(v);
        }
        let value = self.compute(req)?;
        self.values.lock().expect("cache lock").insert(req.key(), value);
        if let Err(e) = self.append(req, value) {
            log::warn!("{e}; continuing without persisting");
        }
        Ok(value)
    }

    /// Computes without consulting or updating the stored values.
    pub fn compute(&self, req: &CriticalValueRequest) -> Result<f64> {
        req.validate()?;
        self.law(req)?.quantile(1.0 - req.alpha)
    }

    /// The limiting law for the request's dimensions, grid, and truncation.
    pub fn law(&self, req: &CriticalValueRequest) -> Result<Arc<WeightedChiSquare>> {
        let key = req.key();
        let law_key = (key.small, key.large, key.m_r, key.m_s, key.truncation);
        if let Some(l) = self.laws.lock().expect("cache lock").get(&law_key) {
            return Ok(Arc::clone(l));
        }
        let first = self.spectrum(key.small, req.m_r, req.m_s)?;
        let second = self.spectrum(key.large, req.m_r, req.m_s)?;
        let products = product_spectrum(&first, &second, req.truncation)?;
        let law = Arc::new(WeightedChiSquare::from_products(&products)?);
        if law.tail_outside_series() {
            log::warn!(
                "({}, {}): truncated products left the series range; raise the truncation",
                key.small,
                key.large
            );
        }
        self.laws.lock().expect("cache lock").insert(law_key, Arc::clone(&law));
        Ok(law)
    }

    pub fn spectrum(&self, dim: usize, m_r: usize, m_s: usize) -> Result<Arc<Spectrum>> {
        if let Some(s) = self.spectra.lock().expect("cache lock").get(&(dim, m_r, m_s)) {
            return Ok(Arc::clone(s));
        }
        let sp = Arc::new(spectrum(dim, m_r, m_s, spectrum_direction_mode(dim), SPECTRUM_SEED)?);
        if dim > 1 {
            self.solves.fetch_add(1, Ordering::Relaxed);
        }
        self.spectra.lock().expect("cache lock").insert((dim, m_r, m_s), Arc::clone(&sp));
        Ok(sp)
    }

    fn append(&self, req: &CriticalValueRequest, value: f64) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let io = |source| Error::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let rec = CacheRecord {
            p: req.p,
            q: req.q,
            alpha: req.alpha,
            m_r: req.m_r,
            m_s: req.m_s,
            truncation: req.truncation,
            value,
            generator_version: GENERATOR_VERSION.to_string(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        writeln!(file, "{line}").map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: usize, q: usize, alpha: f64) -> CriticalValueRequest {
        CriticalValueRequest { p, q, alpha, m_r: 12, m_s: 12, truncation: 5000 }
    }

    #[test]
    fn repeated_call_is_bit_identical() {
        let cv = CriticalValues::in_memory();
        let a = cv.get(&small(2, 1, 0.05)).unwrap();
        let b = cv.get(&small(2, 1, 0.05)).unwrap();
        let c = cv.get(&small(1, 2, 0.05)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("cv.jsonl");
        let first = CriticalValues::with_file(&path);
        let v = first.get(&small(1, 1, 0.1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let rec: CacheRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(rec.value, v);
        assert_eq!(rec.generator_version, GENERATOR_VERSION);

        let second = CriticalValues::with_file(&path);
        assert_eq!(second.get(&small(1, 1, 0.1)).unwrap(), v);
        assert_eq!(second.spectral_solves(), 0);
        assert_eq!(second.lookup(&small(1, 1, 0.05)), None);
    }

    #[test]
    fn stale_or_garbled_lines_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cv.jsonl");
        std::fs::write(
            &path,
            "not json\n{\"p\":1,\"q\":1,\"alpha\":0.1,\"M_R\":12,\"M_S\":12,\"K\":5000,\"value\":9.0,\"generator_version\":\"old\"}\n",
        )
        .unwrap();
        let cv = CriticalValues::with_file(&path);
        assert_eq!(cv.lookup(&small(1, 1, 0.1)), None);
    }

    #[test]
    fn spectral_solves_are_counted_once_per_dimension() {
        let cv = CriticalValues::in_memory();
        cv.get(&small(2, 2, 0.1)).unwrap();
        cv.get(&small(2, 2, 0.05)).unwrap();
        assert_eq!(cv.spectral_solves(), 1);
    }

    #[test]
    fn unwritable_path_still_computes() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        let cv = CriticalValues::with_file(blocker.join("cv.jsonl"));
        assert!(cv.get(&small(1, 1, 0.1)).is_ok());
    }

    #[test]
    fn invalid_requests() {
        let cv = CriticalValues::in_memory();
        assert!(cv.get(&small(0, 1, 0.1)).is_err());
        assert!(cv.get(&small(1, 1, 1.0)).is_err());
        assert!(cv.get(&small(1, 1, 0.0)).is_err());
    }

    #[test]
    fn levels_are_ordered() {
        let cv = CriticalValues::in_memory();
        let a = cv.get(&small(2, 2, 0.1)).unwrap();
        let b = cv.get(&small(2, 2, 0.05)).unwrap();
        let c = cv.get(&small(2, 2, 0.01)).unwrap();
        assert!(a < b && b < c);
    }
}
