//! Criterion benchmarks for the wavelet, DDIM and ROC kernels; see `benches/`.
