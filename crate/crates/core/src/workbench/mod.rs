//! Synthetic instances, file ingestion and the benchmark harness.

mod bench;
mod io;

use std::path::PathBuf;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::{normalize_columns, Dictionary};
use crate::error::{Error, Result};
use crate::matrix::{norm2, DenseMatrix, FlopCounter, HouseholderQr};
use crate::pursuit::SparseSignal;

pub use bench::{
    emit_report, render_report, run_benchmark, BenchConfig, BenchReportRow, ReportFormat,
    REPORT_HEADER,
};
pub use io::{load_csv_matrix, load_csv_vector, load_pgm, save_csv_matrix, save_csv_vector, GrayImage};

/// Distribution of the nonzero coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    #[default]
    Gaussian,
    UniformPm1,
    Rademacher,
    /// Gray levels `{64, 128, 192, 255}` drawn uniformly, a stand-in for
    /// piecewise-constant image intensities.
    Phantom,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    #[default]
    GaussianNormalized,
    /// `[I | H_S]` under a random rotation, with `H_S` randomly chosen,
    /// randomly signed columns of the normalised Hadamard matrix. Coherence
    /// is `1/sqrt(N)`; needs `N` a power of two and `d <= 2N`.
    Incoherent,
    FromFile,
}

impl std::str::FromStr for ValueDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ValueDist::Gaussian),
            "uniform_pm1" => Ok(ValueDist::UniformPm1),
            "rademacher" => Ok(ValueDist::Rademacher),
            "phantom" => Ok(ValueDist::Phantom),
            _ => Err(Error::Parameter(format!("unknown value distribution '{s}'"))),
        }
    }
}

impl std::str::FromStr for DictKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_normalized" => Ok(DictKind::GaussianNormalized),
            "incoherent" => Ok(DictKind::Incoherent),
            "from_file" => Ok(DictKind::FromFile),
            _ => Err(Error::Parameter(format!("unknown dictionary kind '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub c: usize,
    #[serde(default)]
    pub noise_l2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub value_dist: ValueDist,
    #[serde(default)]
    pub dict_kind: DictKind,
    /// CSV dictionary for [`DictKind::FromFile`]; columns are normalised on
    /// load.
    #[serde(default)]
    pub dict_path: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl InstanceSpec {
    pub fn new(n: usize, d: usize, k: usize, seed: u64) -> Self {
        InstanceSpec {
            n,
            d,
            k,
            c: 1,
            noise_l2: 0.0,
            seed,
            value_dist: ValueDist::default(),
            dict_kind: DictKind::default(),
            dict_path: None,
        }
    }

    pub fn with_noise(mut self, noise_l2: f64) -> Self {
        self.noise_l2 = noise_l2;
        self
    }

    pub fn with_values(mut self, v: ValueDist) -> Self {
        self.value_dist = v;
        self
    }

    pub fn with_dict(mut self, kind: DictKind) -> Self {
        self.dict_kind = kind;
        self
    }

    pub fn with_block_size(mut self, c: usize) -> Self {
        self.c = c;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dict_kind != DictKind::FromFile && (self.n == 0 || self.d == 0) {
            return Err(Error::Parameter(format!(
                "dictionary shape {}x{}",
                self.n, self.d
            )));
        }
        if self.k == 0 || self.k > self.d {
            return Err(Error::Parameter(format!("sparsity {} outside 1..={}", self.k, self.d)));
        }
        if self.c == 0 {
            return Err(Error::Parameter("block size 0".into()));
        }
        if !(self.noise_l2 >= 0.0) || !self.noise_l2.is_finite() {
            return Err(Error::Parameter(format!("noise level {}", self.noise_l2)));
        }
        Ok(())
    }
}

/// A generated problem `y = Phi x + e`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub dict: Dictionary,
    pub x: SparseSignal,
    pub y: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Builds the instance described by `spec`. The same spec always yields
/// bit-identical output.
pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dict = match spec.dict_kind {
        DictKind::GaussianNormalized => gaussian_dictionary(spec.n, spec.d, &mut rng)?,
        DictKind::Incoherent => incoherent_dictionary(spec.n, spec.d, &mut rng)?,
        DictKind::FromFile => {
            let path = spec
                .dict_path
                .as_ref()
                .ok_or_else(|| Error::Parameter("from_file dictionary without a path".into()))?;
            normalize_columns(&load_csv_matrix(path)?)?.0
        }
    };
    let (n, d) = (dict.n_measurements(), dict.n_atoms());
    if spec.k > d {
        return Err(Error::Parameter(format!("sparsity {} exceeds {d} atoms", spec.k)));
    }

    let support = sample(&mut rng, d, spec.k).into_vec();
    let values: Vec<f64> = (0..spec.k).map(|_| draw_value(spec.value_dist, &mut rng)).collect();
    let x = SparseSignal::new(d, support, values)?;

    let clean = dict.synthesize(&x.to_dense())?;
    let noise = if spec.noise_l2 > 0.0 {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let s = spec.noise_l2 / norm2(&g);
        g.into_iter().map(|v| v * s).collect()
    } else {
        vec![0.0; n]
    };
    let y = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok(Instance { dict, x, y, noise })
}

fn draw_value(dist: ValueDist, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = match dist {
            ValueDist::Gaussian => rng.sample(StandardNormal),
            ValueDist::UniformPm1 => rng.random_range(-1.0..=1.0),
            ValueDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ValueDist::Phantom => [64.0, 128.0, 192.0, 255.0][rng.random_range(0..4)],
        };
        if v != 0.0 {
            return v;
        }
    }
}

fn gaussian_dictionary(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(normalize_columns(&DenseMatrix::from_col_major(n, d, data)?)?.0)
}

fn incoherent_dictionary(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    if !n.is_power_of_two() || d > 2 * n {
        return Err(Error::Parameter(format!(
            "incoherent dictionary needs N a power of two and d <= 2N (got {n}x{d})"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    // Sylvester Hadamard entry: (-1)^popcount(i & j).
    let hadamard = |i: usize, j: usize| {
        if (i & j).count_ones().is_multiple_of(2) {
            scale
        } else {
            -scale
        }
    };
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d.min(n) {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(e);
    }
    if d > n {
        for h in sample(rng, n, d - n).into_vec() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            cols.push((0..n).map(|i| sign * hadamard(i, h)).collect());
        }
    }
    let g: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut ctr = FlopCounter::new();
    let rotation = HouseholderQr::factor(&DenseMatrix::from_col_major(n, n, g)?, &mut ctr)?;
    for c in &mut cols {
        rotation.apply_qt(c, &mut ctr);
    }
    Ok(normalize_columns(&DenseMatrix::from_columns(&cols)?)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::coherence;

    #[test]
    fn noiseless_instance_is_exact() {
        let inst = gen_instance(&InstanceSpec::new(20, 40, 5, 3)).unwrap();
        let clean = inst.dict.synthesize(&inst.x.to_dense()).unwrap();
        let diff: Vec<f64> = inst.y.iter().zip(&clean).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-12);
        assert_eq!(inst.x.sparsity(), 5);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = InstanceSpec::new(16, 32, 4, 99).with_noise(0.5);
        let (a, b) = (gen_instance(&spec).unwrap(), gen_instance(&spec).unwrap());
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert_eq!(a.dict.matrix(), b.dict.matrix());
        let other = gen_instance(&InstanceSpec::new(16, 32, 4, 100).with_noise(0.5)).unwrap();
        assert_ne!(a.y, other.y);
    }

    #[test]
    fn noise_is_calibrated() {
        for level in [0.1, 50.0, 100.0, 150.0] {
            let inst = gen_instance(&InstanceSpec::new(64, 128, 8, 5).with_noise(level)).unwrap();
            let clean = inst.dict.synthesize(&inst.x.to_dense()).unwrap();
            let e: Vec<f64> = inst.y.iter().zip(&clean).map(|(a, b)| a - b).collect();
            assert!((norm2(&e) - level).abs() <= 1e-9, "{level}");
            assert!((norm2(&inst.noise) - level).abs() <= 1e-12 * level);
        }
    }

    #[test]
    fn value_distributions() {
        for (dist, check) in [
            (ValueDist::Rademacher, (|v: f64| v.abs() == 1.0) as fn(f64) -> bool),
            (ValueDist::UniformPm1, |v: f64| v.abs() <= 1.0),
            (ValueDist::Phantom, |v: f64| [64.0, 128.0, 192.0, 255.0].contains(&v)),
        ] {
            let inst = gen_instance(&InstanceSpec::new(8, 30, 20, 1).with_values(dist)).unwrap();
            assert!(inst.x.values().iter().all(|&v| check(v)), "{dist:?}");
        }
    }

    #[test]
    fn incoherent_dictionary_coherence() {
        let inst = gen_instance(
            &InstanceSpec::new(64, 100, 3, 8).with_dict(DictKind::Incoherent),
        )
        .unwrap();
        let mu = coherence(&inst.dict).unwrap();
        assert!((mu - 0.125).abs() < 1e-12, "{mu}");
        assert!(gen_instance(&InstanceSpec::new(60, 100, 3, 8).with_dict(DictKind::Incoherent)).is_err());
    }

    #[test]
    fn spec_validation_and_missing_file() {
        assert!(gen_instance(&InstanceSpec::new(8, 10, 11, 0)).is_err());
        assert!(gen_instance(&InstanceSpec::new(8, 10, 0, 0)).is_err());
        assert!(gen_instance(&InstanceSpec::new(8, 10, 2, 0).with_noise(-1.0)).is_err());
        let mut spec = InstanceSpec::new(8, 10, 2, 0).with_dict(DictKind::FromFile);
        spec.dict_path = Some("/nonexistent/dict.csv".into());
        assert!(matches!(gen_instance(&spec), Err(Error::Io { .. })));
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: InstanceSpec = toml::from_str(
            "n = 32\nd = 64\nk = 4\nnoise_l2 = 50.0\nvalue_dist = \"phantom\"\ndict_kind = \"incoherent\"\n",
        )
        .unwrap();
        assert_eq!(spec.c, 1);
        assert_eq!(spec.value_dist, ValueDist::Phantom);
        assert_eq!(spec.dict_kind, DictKind::Incoherent);
        assert!(toml::from_str::<InstanceSpec>("n = 1\nd = 2\nk = 1\nbogus = 3\n").is_err());
    }
}
