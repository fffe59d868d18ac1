use crate::quantizer::{CodeIndexGrid, QuantizerError};

/// Per-code selection counts of one codebook layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageHistogram {
    counts: Vec<u64>,
}

impl UsageHistogram {
    pub fn new(codebook_size: usize) -> Self {
        Self { counts: vec![0; codebook_size] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    /// Counts the codes chosen by `layer` across all frames of `grid`.
    pub fn from_grid(grid: &CodeIndexGrid, layer: usize, codebook_size: usize) -> Result<Self, QuantizerError> {
        let mut hist = Self::new(codebook_size);
        for t in 0..grid.frames() {
            hist.record(grid.get(t, layer) as usize)?;
        }
        Ok(hist)
    }

    pub fn record(&mut self, index: usize) -> Result<(), QuantizerError> {
        let size = self.counts.len();
        let slot = self.counts.get_mut(index).ok_or(QuantizerError::IndexOutOfRange { index, size })?;
        *slot += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &UsageHistogram) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of codes used at least once.
    pub fn active_codes(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Shannon entropy (bits) of the empirical code distribution.
pub fn usage_entropy(hist: &UsageHistogram) -> Result<f64, QuantizerError> {
    let total = hist.total();
    if total == 0 {
        return Err(QuantizerError::EmptyHistogram);
    }
    let total = total as f64;
    let h = hist
        .counts()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Usage histograms for every layer of a residual quantizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerUsage {
    pub layers: Vec<UsageHistogram>,
}

impl LayerUsage {
    pub fn new(layers: usize, codebook_size: usize) -> Self {
        Self { layers: vec![UsageHistogram::new(codebook_size); layers] }
    }

    pub fn record_grid(&mut self, grid: &CodeIndexGrid) -> Result<(), QuantizerError> {
        for (layer, hist) in self.layers.iter_mut().enumerate().take(grid.layers()) {
            for t in 0..grid.frames() {
                hist.record(grid.get(t, layer) as usize)?;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &LayerUsage) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.merge(b);
        }
    }

    pub fn entropies(&self) -> Result<Vec<f64>, QuantizerError> {
        self.layers.iter().map(usage_entropy).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(usage_entropy(&UsageHistogram::from_counts(vec![0, 42, 0])).unwrap(), 0.0);
        assert_eq!(usage_entropy(&UsageHistogram::from_counts(vec![3; 1024])).unwrap(), 10.0);
        assert_eq!(usage_entropy(&UsageHistogram::from_counts(vec![1, 1, 2])).unwrap(), 1.5);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        assert!(matches!(usage_entropy(&UsageHistogram::new(8)), Err(QuantizerError::EmptyHistogram)));
    }

    #[test]
    fn counts_sum_to_frames() {
        let grid = CodeIndexGrid::new(4, 2, vec![0, 1, 0, 3, 2, 1, 0, 0]).unwrap();
        let hist = UsageHistogram::from_grid(&grid, 0, 4).unwrap();
        assert_eq!(hist.counts(), &[3, 0, 1, 0]);
        assert_eq!(hist.total(), 4);
        assert!(UsageHistogram::from_grid(&grid, 1, 2).is_err());
    }
}
