//! Modular quantum extreme reservoir computing.
//!
//! Images are compressed with PCA, encoded into a product state of `n` qubits,
//! pushed through a fixed modular reservoir simulated exactly as a statevector,
//! and read out as the `2^n` computational-basis probabilities. Only the
//! softmax classifier on top of those probabilities is trained.
//!
//! The modules follow the data path:
//!
//! - [`statevector`]: amplitudes, gates and probabilities
//! - [`reservoir`]: module couplings, inter-module connectivity, CUE sampling
//! - [`preprocess`]: PCA, rescaling, angle encoding and the full feature map
//! - [`classifier`]: standardisation, softmax regression, Adagrad, smoothed accuracy
//! - [`entanglement`]: entropy across the module-1 cut
//! - [`datasets`]: MNIST / Fashion-MNIST / CIFAR-10 loaders and fetching
//! - [`harness`]: experiments, sweeps, caches and result files

// `!(x > 0.0)` is used on purpose so NaN is rejected; kernels index explicitly.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod seed;
pub mod statevector;
pub mod reservoir;
pub mod matrix;
pub mod preprocess;
pub mod classifier;
pub mod entanglement;
pub mod datasets;
pub mod harness;
