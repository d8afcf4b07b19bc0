//! Synthetic data recipes, CSV ingestion, standardisation and splitting.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{fit_weibull_mle, WeibullParams};
use crate::error::{domain, Error, Result};

/// Floor applied to targets before they reach the Weibull likelihood.
pub const TARGET_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d`
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Shape parameter fitted on the training targets (or on the noise, for synthetic data).
    pub k_hat: Option<f64>,
    pub standardization: Option<Standardizer>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        targets: Array1<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyData("dataset has no rows".into()));
        }
        if features.nrows() != targets.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if !features.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return domain("dataset contains non-finite values");
        }
        Ok(Self {
            features,
            targets,
            feature_names,
            target_name: target_name.into(),
            k_hat: None,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            k_hat: self.k_hat,
            standardization: self.standardization.clone(),
        }
    }

    /// Raises targets in `[0, floor)` to `floor`; negative targets are rejected.
    pub fn prepare_for_weibull(&self, floor: f64) -> Result<Dataset> {
        if let Some(bad) = self.targets.iter().find(|y| **y < 0.0) {
            return domain(format!(
                "Weibull head needs non-negative targets, found {bad} in '{}'",
                self.target_name
            ));
        }
        let mut out = self.clone();
        out.targets.mapv_inplace(|y| y.max(floor));
        Ok(out)
    }

    /// Fits `k̂` on the targets and stores it on the dataset.
    pub fn fit_shape(&mut self) -> Result<WeibullParams> {
        let prepared = self.prepare_for_weibull(TARGET_FLOOR)?;
        let fit = fit_weibull_mle(prepared.targets.as_slice().expect("contiguous"))?;
        self.k_hat = Some(fit.k);
        Ok(fit)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for (row, y) in self.features.rows().into_iter().zip(self.targets.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds `y = x² + ε` on the given inputs.
pub fn synthesize(xs: &[f64], noise: &[f64]) -> Result<Dataset> {
    if xs.len() != noise.len() {
        return Err(Error::Shape("inputs and noise differ in length".into()));
    }
    let targets: Array1<f64> = xs.iter().zip(noise).map(|(x, e)| x * x + e).collect();
    let features = Array2::from_shape_vec((xs.len(), 1), xs.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(features, targets, vec!["x".into()], "y")
}

/// `n` uniformly spaced inputs over the closed interval, `y = x² + ε`,
/// `ε ~ Weibull(noise)`. `k_hat` is fitted on the targets.
pub fn gen_synthetic(x_range: (f64, f64), n: usize, noise: WeibullParams, seed: u64) -> Result<Dataset> {
    let (lo, hi) = x_range;
    if n < 2 {
        return domain(format!("synthetic data needs at least 2 points, got {n}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return domain(format!("invalid input range [{lo}, {hi}]"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let mut data = synthesize(&xs, &eps)?;
    data.k_hat = data.fit_shape().ok().map(|p| p.k);
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecipe {
    pub train_range: (f64, f64),
    pub test_range: (f64, f64),
    pub noise: WeibullParams,
    pub n_train: usize,
    pub n_test: usize,
}

impl SyntheticRecipe {
    pub const DEFAULT_N_TRAIN: usize = 1000;
    pub const DEFAULT_N_TEST: usize = 500;

    /// Train on `[−4, 4]`, test on `[−5, 5]`, `ε ~ Weibull(1.6, λ)`.
    pub fn main(lambda: f64) -> Result<Self> {
        Ok(Self {
            train_range: (-4.0, 4.0),
            test_range: (-5.0, 5.0),
            noise: WeibullParams::new(1.6, lambda)?,
            n_train: Self::DEFAULT_N_TRAIN,
            n_test: Self::DEFAULT_N_TEST,
        })
    }

    /// Train on `[0, 3]`, test on `[0, 4]`, `ε ~ Weibull(1.2, 0.2)`.
    pub fn appendix() -> Self {
        Self {
            train_range: (0.0, 3.0),
            test_range: (0.0, 4.0),
            noise: WeibullParams { k: 1.2, lambda: 0.2 },
            n_train: Self::DEFAULT_N_TRAIN,
            n_test: Self::DEFAULT_N_TEST,
        }
    }

    /// Train and test sets; the test set reuses the training `k̂`.
    pub fn generate(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let train = gen_synthetic(self.train_range, self.n_train, self.noise, seed)?;
        let mut test = gen_synthetic(
            self.test_range,
            self.n_test,
            self.noise,
            seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        )?;
        test.k_hat = train.k_hat;
        Ok((train, test))
    }
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows skipped because a used column was missing or not a finite number.
    pub dropped_rows: usize,
}

/// Reads a headed CSV; `feature_columns = None` uses every column except the target.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    feature_columns: Option<&[String]>,
) -> Result<CsvLoad> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyData(format!("{} has no header row", path.display())));
    }
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let target_idx = *index.get(target_column).ok_or_else(|| {
        Error::Schema(format!(
            "target column '{target_column}' not found; available columns: {}",
            headers.join(", ")
        ))
    })?;
    let feature_names: Vec<String> = match feature_columns {
        Some(cols) => cols.to_vec(),
        None => headers
            .iter()
            .filter(|h| h.as_str() != target_column)
            .cloned()
            .collect(),
    };
    let mut feature_idx = Vec::with_capacity(feature_names.len());
    for name in &feature_names {
        let i = index.get(name.as_str()).ok_or_else(|| {
            Error::Schema(format!(
                "feature column '{name}' not found; available columns: {}",
                headers.join(", ")
            ))
        })?;
        feature_idx.push(*i);
    }
    if feature_idx.is_empty() {
        return Err(Error::Schema("no feature columns besides the target".into()));
    }

    let parse = |rec: &csv::StringRecord, i: usize| -> Option<f64> {
        rec.get(i)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
    };
    let mut values = Vec::new();
    let mut targets = Vec::new();
    let mut dropped = 0;
    for rec in reader.records() {
        let rec = rec?;
        let row: Option<Vec<f64>> = feature_idx.iter().map(|&i| parse(&rec, i)).collect();
        match (row, parse(&rec, target_idx)) {
            (Some(row), Some(y)) => {
                values.extend(row);
                targets.push(y);
            }
            _ => dropped += 1,
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyData(format!(
            "{} has no usable rows ({dropped} dropped)",
            path.display()
        )));
    }
    let features = Array2::from_shape_vec((targets.len(), feature_idx.len()), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let dataset = Dataset::new(features, Array1::from(targets), feature_names, target_column)?;
    Ok(CsvLoad {
        dataset,
        dropped_rows: dropped,
    })
}

/// Per-feature affine map to zero mean and unit (population) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Constant features carry `1.0` here.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.len() < 2 {
            return domain("standardisation needs at least 2 rows");
        }
        let n = data.len() as f64;
        let mut mean = Vec::with_capacity(data.n_features());
        let mut std = Vec::with_capacity(data.n_features());
        for col in data.features.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    pub fn transform_features(&self, features: &mut Array2<f64>) -> Result<()> {
        if features.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardiser fitted on {} features, data has {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        for mut row in features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(())
    }

    /// Applies the transform once; a dataset that is already standardised is rejected.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.standardization.is_some() {
            return Err(Error::Config("dataset is already standardised".into()));
        }
        let mut out = data.clone();
        self.transform_features(&mut out.features)?;
        out.standardization = Some(self.clone());
        Ok(out)
    }
}

/// Fits a [`Standardizer`] on `data` and applies it.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let s = Standardizer::fit(data)?;
    let out = s.apply(data)?;
    Ok((out, s))
}

/// Seeded random row split into `(train, test)`; row order is preserved within each side.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return domain(format!("test fraction must lie in (0, 1), got {test_fraction}"));
    }
    let n = data.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::EmptyData(format!(
            "splitting {n} rows with fraction {test_fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = idx.split_at_mut(n_test);
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((data.select_rows(train_idx), data.select_rows(test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn synthesize_arithmetic() {
        let d = synthesize(&[2.0], &[0.1]).unwrap();
        assert!((d.targets[0] - 4.1).abs() < 1e-15);
    }

    #[test]
    fn main_recipe_ranges() {
        let (train, test) = SyntheticRecipe::main(0.2).unwrap().generate(1).unwrap();
        let col = train.features.column(0);
        assert_eq!(col[0], -4.0);
        assert_eq!(col[col.len() - 1], 4.0);
        assert_eq!(train.len(), 1000);
        let tcol = test.features.column(0);
        assert_eq!((tcol[0], tcol[tcol.len() - 1]), (-5.0, 5.0));
        let refit = fit_weibull_mle(train.targets.as_slice().unwrap()).unwrap().k;
        assert_eq!(train.k_hat, Some(refit));
        assert_eq!(test.k_hat, train.k_hat);

        let app = SyntheticRecipe::appendix();
        assert_eq!((app.train_range, app.test_range), ((0.0, 3.0), (0.0, 4.0)));
        assert_eq!((app.noise.k, app.noise.lambda), (1.2, 0.2));
    }

    #[test]
    fn generation_reproducible() {
        let r = SyntheticRecipe::main(0.3).unwrap();
        assert_eq!(r.generate(5).unwrap(), r.generate(5).unwrap());
        assert_ne!(r.generate(5).unwrap().0.targets, r.generate(6).unwrap().0.targets);
    }

    #[test]
    fn csv_basic_and_missing_target() {
        let f = write("a,recovery_rate,b\n1,0.5,2\n3,0.25,4\n5,0.75,6\n");
        let load = load_csv(f.path(), "recovery_rate", None).unwrap();
        assert_eq!(load.dataset.len(), 3);
        assert_eq!(load.dataset.feature_names, vec!["a", "b"]);
        assert_eq!(load.dataset.features, array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);

        let err = load_csv(f.path(), "lgd", None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Schema(_)));
        assert!(msg.contains("recovery_rate") && msg.contains("a, "));
    }

    #[test]
    fn csv_column_order_irrelevant_with_names() {
        let f1 = write("a,b,y\n1,2,9\n3,4,8\n");
        let f2 = write("y,b,a\n9,2,1\n8,4,3\n");
        let names = vec!["a".to_string(), "b".to_string()];
        let d1 = load_csv(f1.path(), "y", Some(&names)).unwrap().dataset;
        let d2 = load_csv(f2.path(), "y", Some(&names)).unwrap().dataset;
        assert_eq!(d1, d2);
    }

    #[test]
    fn csv_drops_bad_rows() {
        let f = write("x,y\n1,2\n,3\nfoo,4\n5,inf\n6,7\n");
        let load = load_csv(f.path(), "y", None).unwrap();
        assert_eq!(load.dataset.len(), 2);
        assert_eq!(load.dropped_rows, 3);
        let empty = write("x,y\nfoo,bar\n");
        assert!(matches!(load_csv(empty.path(), "y", None), Err(Error::EmptyData(_))));
    }

    #[test]
    fn standardize_contract() {
        let d = Dataset::new(array![[1.0, 5.0], [3.0, 5.0]], array![0.0, 1.0], vec!["a".into(), "c".into()], "y").unwrap();
        let (s, t) = standardize(&d).unwrap();
        assert_eq!(s.features, array![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(t.std[1], 1.0);
        assert!(t.apply(&s).is_err());
    }

    #[test]
    fn split_contract() {
        let d = Dataset::new(
            Array2::from_shape_fn((10, 1), |(i, _)| i as f64),
            Array1::from_iter((0..10).map(|i| i as f64)),
            vec!["x".into()],
            "y",
        )
        .unwrap();
        let (tr, te) = split(&d, 0.2, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut all: Vec<f64> = tr.targets.iter().chain(te.targets.iter()).cloned().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        let (tr2, te2) = split(&d, 0.2, 3).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        assert!(split(&d, 0.01, 3).is_err());
        assert!(split(&d, 1.0, 3).is_err());
    }

    #[test]
    fn weibull_floor() {
        let d = Dataset::new(array![[0.0], [1.0]], array![0.0, 0.5], vec!["x".into()], "y").unwrap();
        let p = d.prepare_for_weibull(TARGET_FLOOR).unwrap();
        assert_eq!(p.targets, array![1e-6, 0.5]);
        let neg = Dataset::new(array![[0.0]], array![-0.1], vec!["x".into()], "y").unwrap();
        assert!(neg.prepare_for_weibull(TARGET_FLOOR).is_err());
    }
}
