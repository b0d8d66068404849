//! Signal-level simulation of the relay protocol.
//!
//! * [`fourhop`]: the 4-hop training round and relay-side LS estimation.
//! * [`exchange`]: pipelined data exchange over a chain of any length.
//! * [`multihop`]: hop-by-hop pilot relaying over a `2N`-hop chain.
//! * [`baseline`]: per-hop point-to-point estimation for comparison.

pub mod baseline;
pub mod exchange;
pub mod fourhop;
pub mod multihop;

pub use baseline::{baseline_squared_errors, point_to_point_baseline};
pub use exchange::{
    effective_snr_at_t1, run_data_exchange, run_data_exchange_4hop, theoretical_aesnr_4hop, Constellation, CsiMode,
    DataExchangeRecord, EndNodeCsi, EstimatedCsi, ExchangeConfig, SpectralAccounting,
};
pub use fourhop::{ls_estimate_relay, run_training_round_4hop, FourHopTrainingObservation, RelaySelfEstimate};
pub use multihop::{run_training_2nhop, MultiHopTrainingObservation};

use crate::numeric::{sample_cgauss, CVec, RngStream};

/// Length-`l` CN(0, σ²) noise; zero when `sigma2 == 0`.
pub(crate) fn noise(l: usize, sigma2: f64, rng: &mut RngStream) -> CVec {
    sample_cgauss(l, sigma2, rng).expect("noise variance validated by caller")
}
