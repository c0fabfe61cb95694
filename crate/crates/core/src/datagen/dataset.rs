use super::DataError;

/// Labeled classification data: `n` rows of `m` real features, labels in `[0, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        if labels.is_empty() {
            return Err(DataError::InvalidArgument("dataset has no samples".into()));
        }
        if n_features == 0 || n_classes == 0 {
            return Err(DataError::InvalidArgument(
                "feature and class counts must be positive".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(DataError::InvalidArgument(format!(
                "{} feature values do not fill {} rows of {} features",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(DataError::InvalidArgument(format!(
                "label {bad} outside [0, {n_classes})"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::InvalidArgument(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Dataset {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Keeps the class count of the parent.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }

    /// The dataset repeated `times` times, row order preserved.
    pub fn repeated(&self, times: usize) -> Dataset {
        let idx: Vec<usize> = (0..times).flat_map(|_| 0..self.len()).collect();
        self.subset(&idx)
    }
}
