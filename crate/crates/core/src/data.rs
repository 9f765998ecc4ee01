//! Datasets: CSV ingestion and export, column normalization, and synthetic
//! generators for the orbital-distance and pendulum-timing experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Gravitational acceleration used by the pendulum generator (m/s^2).
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}, column {col}: cannot parse `{text}` as a number")]
    Parse { row: usize, col: usize, text: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("target is zero at row {row}")]
    ZeroTarget { row: usize },
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("divisor for column `{0}` is zero")]
    ZeroDivisor(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("dataset has no input columns")]
    NoVariables,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid generator argument: {0}")]
    InvalidArgument(String),
}

/// Observations `(x_i, y_i)` with named columns. Rows are numbered from 1
/// (the header is row 0) in error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variable_names: Vec<String>,
    target_name: String,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    provenance: String,
    normalization: BTreeMap<String, f64>,
}

impl Dataset {
    /// Validates shapes, finiteness and nonzero targets.
    pub fn new(
        variable_names: Vec<String>,
        target_name: &str,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        provenance: &str,
    ) -> Result<Self, DataError> {
        if variable_names.is_empty() {
            return Err(DataError::NoVariables);
        }
        if x.is_empty() || y.is_empty() {
            return Err(DataError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for name in variable_names.iter().chain(std::iter::once(&target_name.to_string())) {
            if !seen.insert(name.clone()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        if x.len() != y.len() {
            return Err(DataError::Width {
                row: x.len().min(y.len()) + 1,
                expected: variable_names.len() + 1,
                found: variable_names.len(),
            });
        }
        let m = variable_names.len();
        for (i, (row, &t)) in x.iter().zip(&y).enumerate() {
            if row.len() != m {
                return Err(DataError::Width {
                    row: i + 1,
                    expected: m,
                    found: row.len(),
                });
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i + 1, col: col + 1 });
            }
            if !t.is_finite() {
                return Err(DataError::NonFinite { row: i + 1, col: m + 1 });
            }
            if t == 0.0 {
                return Err(DataError::ZeroTarget { row: i + 1 });
            }
        }
        Ok(Dataset {
            variable_names,
            target_name: target_name.to_string(),
            x,
            y,
            provenance: provenance.to_string(),
            normalization: BTreeMap::new(),
        })
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Accumulated divisor per normalized column.
    pub fn normalization(&self) -> &BTreeMap<String, f64> {
        &self.normalization
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|n| n == name)
    }

    /// Divides the named columns (inputs or target) by the given divisors.
    /// Repeated normalization composes multiplicatively.
    pub fn normalize(&self, divisors: &[(&str, f64)]) -> Result<Dataset, DataError> {
        let mut out = self.clone();
        for &(name, div) in divisors {
            if div == 0.0 || !div.is_finite() {
                return Err(DataError::ZeroDivisor(name.to_string()));
            }
            if name == self.target_name {
                out.y.iter_mut().for_each(|v| *v /= div);
            } else {
                let d = self
                    .column_index(name)
                    .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
                out.x.iter_mut().for_each(|row| row[d] /= div);
            }
            *out.normalization.entry(name.to_string()).or_insert(1.0) *= div;
        }
        out.normalization.retain(|_, v| *v != 1.0);
        Ok(out)
    }

    /// Reads a headed CSV file; every column except `target` is an input.
    pub fn load_csv(path: impl AsRef<Path>, target: &str) -> Result<Dataset, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut ds = Dataset::from_reader(file, target)?;
        ds.provenance = format!("csv:{}", path.display());
        Ok(ds)
    }

    pub fn from_reader(reader: impl Read, target: &str) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| DataError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let t = header
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| DataError::MissingColumn(target.to_string()))?;
        let names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != t)
            .map(|(_, h)| h.clone())
            .collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            if rec.len() != header.len() {
                return Err(DataError::Width {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            let mut xs = Vec::with_capacity(names.len());
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| DataError::Parse {
                    row,
                    col: c + 1,
                    text: field.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonFinite { row, col: c + 1 });
                }
                if c == t {
                    if v == 0.0 {
                        return Err(DataError::ZeroTarget { row });
                    }
                    y.push(v);
                } else {
                    xs.push(v);
                }
            }
            x.push(xs);
        }
        Dataset::new(names, target, x, y, "csv")
    }

    /// Writes inputs then the target, shortest round-trip decimal form.
    pub fn write_csv(&self, out: impl Write) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| DataError::Csv(e.to_string());
        let mut header = self.variable_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header).map_err(csv_err)?;
        for (row, t) in self.x.iter().zip(&self.y) {
            let rec: Vec<String> = row.iter().chain(std::iter::once(t)).map(|v| format!("{v:?}")).collect();
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DataError::Csv(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Planetary systems following Kepler's third law in normalized units:
/// columns `tau` (period), `M` (stellar mass), `m` (planet mass, negligible),
/// target `d = cbrt(tau^2 M) (1 + eta)` with `eta` uniform in
/// `[-noise_rel, noise_rel]`.
pub fn synth_kepler(n_systems: usize, noise_rel: f64, seed: u64) -> Result<Dataset, DataError> {
    if n_systems < 3 {
        return Err(DataError::InvalidArgument(format!("need at least 3 systems, got {n_systems}")));
    }
    if !(0.0..1.0).contains(&noise_rel) {
        return Err(DataError::InvalidArgument(format!("relative noise {noise_rel} not in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n_systems);
    let mut y = Vec::with_capacity(n_systems);
    for _ in 0..n_systems {
        let tau: f64 = rng.random_range(0.1..=30.0);
        let star: f64 = rng.random_range(0.5..=2.0);
        let planet = star * rng.random_range(0.0..=1e-3);
        let eta = if noise_rel > 0.0 {
            rng.random_range(-noise_rel..=noise_rel)
        } else {
            0.0
        };
        x.push(vec![tau, star, planet]);
        y.push(kepler_distance(tau, star) * (1.0 + eta));
    }
    Dataset::new(
        vec!["tau".into(), "M".into(), "m".into()],
        "d",
        x,
        y,
        &format!("synth_kepler(n={n_systems}, noise_rel={noise_rel}, seed={seed})"),
    )
}

/// `cbrt(tau^2 M)`.
pub fn kepler_distance(tau: f64, star_mass: f64) -> f64 {
    (tau * tau * star_mass).cbrt()
}

/// Midpoint-crossing times of a pendulum: columns `l` (length, m), `i`,
/// `t_i`, `j` with `1 <= i < j <= 60`, target `t_j = pi j sqrt(l / g)`
/// plus uniform additive noise in `[-noise_abs, noise_abs]` seconds.
pub fn synth_pendulum(n_tuples: usize, noise_abs: f64, seed: u64) -> Result<Dataset, DataError> {
    if n_tuples < 3 {
        return Err(DataError::InvalidArgument(format!("need at least 3 tuples, got {n_tuples}")));
    }
    if !(noise_abs >= 0.0 && noise_abs.is_finite()) {
        return Err(DataError::InvalidArgument(format!("noise {noise_abs} must be nonnegative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| {
        if noise_abs > 0.0 {
            rng.random_range(-noise_abs..=noise_abs)
        } else {
            0.0
        }
    };
    let mut x = Vec::with_capacity(n_tuples);
    let mut y = Vec::with_capacity(n_tuples);
    for _ in 0..n_tuples {
        let l: f64 = rng.random_range(0.28..=0.307);
        let j = rng.random_range(2..=60u32);
        let i = rng.random_range(1..j);
        let ti = crossing_time(l, f64::from(i)) + noise(&mut rng);
        let tj = crossing_time(l, f64::from(j)) + noise(&mut rng);
        x.push(vec![l, f64::from(i), ti, f64::from(j)]);
        y.push(tj);
    }
    Dataset::new(
        vec!["l".into(), "i".into(), "t_i".into(), "j".into()],
        "t_j",
        x,
        y,
        &format!("synth_pendulum(n={n_tuples}, noise_abs={noise_abs}, seed={seed})"),
    )
}

/// `pi k sqrt(l / g)`.
pub fn crossing_time(length: f64, k: f64) -> f64 {
    PI * k * (length / GRAVITY).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn load(text: &str, target: &str) -> Result<Dataset, DataError> {
        Dataset::from_reader(text.as_bytes(), target)
    }

    #[test]
    fn loads_headed_csv() {
        let ds = load("a,d,b\n1,2,3\n4,5,6\n", "d").unwrap();
        assert_eq!(ds.n_vars(), 2);
        assert_eq!(ds.variable_names(), ["a", "b"]);
        assert_eq!(ds.x(), [vec![1.0, 3.0], vec![4.0, 6.0]]);
        assert_eq!(ds.y(), [2.0, 5.0]);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load("a,d\n1,2\n3,abc\n", "d"),
            Err(DataError::Parse { row: 2, col: 2, .. })
        ));
        assert!(matches!(load("a,d\n1,0\n", "d"), Err(DataError::ZeroTarget { row: 1 })));
        assert!(matches!(load("a,b\n1,2\n", "d"), Err(DataError::MissingColumn(_))));
        assert!(matches!(load("a,d\n", "d"), Err(DataError::Empty)));
        assert!(matches!(load("d\n1\n", "d"), Err(DataError::NoVariables)));
        assert!(matches!(load("a,d\n1,2,3\n", "d"), Err(DataError::Width { .. })));
        assert!(matches!(load("a,d\n1,inf\n", "d"), Err(DataError::NonFinite { .. })));
        let err = Dataset::load_csv("/nonexistent/file.csv", "d").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/file.csv"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = synth_kepler(20, 0.05, 1).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), "d").unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.y(), ds.y());
        assert_eq!(back.variable_names(), ds.variable_names());
    }

    #[test]
    fn normalization() {
        let ds = synth_kepler(5, 0.0, 3).unwrap();
        assert_eq!(ds.normalize(&[("tau", 1.0), ("M", 1.0), ("m", 1.0)]).unwrap(), ds);
        let n = ds.normalize(&[("tau", 365.25)]).unwrap();
        assert_relative_eq!(n.x()[0][0], ds.x()[0][0] / 365.25);
        assert_eq!(n.normalization()["tau"], 365.25);
        let twice = n.normalize(&[("tau", 2.0)]).unwrap();
        assert_eq!(twice.normalization()["tau"], 730.5);
        let back = twice.normalize(&[("tau", 1.0 / 730.5)]).unwrap();
        for (a, b) in back.x().iter().zip(ds.x()) {
            assert_relative_eq!(a[0], b[0], max_relative = 1e-12);
        }
        assert!(matches!(ds.normalize(&[("tau", 0.0)]), Err(DataError::ZeroDivisor(_))));
        assert!(matches!(ds.normalize(&[("zz", 2.0)]), Err(DataError::MissingColumn(_))));
        let t = ds.normalize(&[("d", 2.0)]).unwrap();
        assert_relative_eq!(t.y()[0], ds.y()[0] / 2.0);
    }

    #[test]
    fn kepler_generator() {
        assert_eq!(kepler_distance(8.0, 1.0), 4.0);
        let a = synth_kepler(8, 0.01, 42).unwrap();
        assert_eq!(a, synth_kepler(8, 0.01, 42).unwrap());
        assert_eq!(a.len(), 8);
        assert_ne!(a, synth_kepler(8, 0.01, 43).unwrap());
        for (row, &d) in a.x().iter().zip(a.y()) {
            assert!((0.1..=30.0).contains(&row[0]) && (0.5..=2.0).contains(&row[1]));
            assert!(row[2] <= 1e-3 * row[1]);
            assert!((d / kepler_distance(row[0], row[1]) - 1.0).abs() <= 0.01 + 1e-12);
        }
        let exact = synth_kepler(50, 0.0, 9).unwrap();
        for (row, &d) in exact.x().iter().zip(exact.y()) {
            assert_relative_eq!(d.powi(3), row[0] * row[0] * row[1], max_relative = 1e-12);
        }
        assert!(synth_kepler(2, 0.0, 0).is_err());
    }

    #[test]
    fn pendulum_generator() {
        assert_relative_eq!(crossing_time(0.3, 10.0), 5.494, epsilon = 5e-4);
        let a = synth_pendulum(10, 0.005, 7).unwrap();
        assert_eq!(a, synth_pendulum(10, 0.005, 7).unwrap());
        assert_eq!(a.variable_names(), ["l", "i", "t_i", "j"]);
        let exact = synth_pendulum(40, 0.0, 5).unwrap();
        for (row, &t) in exact.x().iter().zip(exact.y()) {
            let (l, i, ti, j) = (row[0], row[1], row[2], row[3]);
            assert!((0.28..=0.307).contains(&l));
            assert!(1.0 <= i && i < j && j <= 60.0);
            assert_relative_eq!(ti, crossing_time(l, i), max_relative = 1e-12);
            assert_relative_eq!(t, crossing_time(l, j), max_relative = 1e-12);
        }
    }
}
