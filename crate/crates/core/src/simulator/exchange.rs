//! Pipelined network-coded data exchange over a relay chain.
//!
//! Nodes sit at positions `0..=2N`: T₁ at 0, the left relays
//! `R₁, R₃, …, R_{2N−3}` at `1..N`, the centre `R_{2N−1}` at `N`, the right
//! relays `R_{2N−2}, …, R₂` at `N+1..2N`, and T₂ at `2N`. Even positions
//! transmit in even phases and odd positions in odd phases, so every node
//! hears both neighbours at once. End nodes send a fresh symbol every other
//! phase. Relays amplify and forward; every relay except the two next to the
//! end nodes first subtracts the echo of its own previous transmission. R₁ and
//! R₂ forward their echo, which the end nodes remove themselves.
//!
//! A cancelling neighbour never forwards back what it received from the
//! relay in question, so the echo arriving from such a neighbour excludes that
//! part. Relays therefore keep their signal split by arrival side and hold
//! one echo coefficient per side. With exact coefficients no signal ever
//! reverses direction at a cancelling relay.
//!
//! At an odd phase `φ`, T₁ receives
//!
//! ```text
//! y = c_d·x₁(φ−1) + c_b·x₁(φ−3) + c_x·x₂(φ−2N+1) + noise
//! ```
//!
//! where `c_d ∝ h₁²`, `c_b ∝ h₁²h₂²` (one bounce off position 2) and
//! `c_x ∝ ∏h_i g_i`. For four hops these composites are `h₁²`, `θ₁`, `θ₂`.

use crate::channel::{composite_varpi, linear_to_db, ChainGains, ChannelRealization, Gains, PowerProfile};
use crate::error::{domain, Error, Result};
use crate::numeric::{RngStream, C64, ZERO};
use rand::Rng;

/// Reported AESNR when the residual is exactly zero.
pub const AESNR_CAP_DB: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constellation {
    /// Unit-power QPSK.
    Qpsk,
    /// Unit-power circular Gaussian.
    Gaussian,
}

impl Constellation {
    fn draw(self, rng: &mut RngStream) -> C64 {
        match self {
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let re = if rng.gen::<bool>() { s } else { -s };
                let im = if rng.gen::<bool>() { s } else { -s };
                C64::new(re, im)
            }
            Constellation::Gaussian => rng.cgauss(1.0),
        }
    }
}

/// Composite channel knowledge T₁ uses to strip its own symbols and scale
/// the remote one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndNodeCsi {
    /// `h₁²`
    pub h1_sq: C64,
    /// `h₁²h₂²`
    pub bounce: C64,
    /// `∏h_i g_i`
    pub cross: C64,
}

impl EndNodeCsi {
    pub fn perfect(ch: &ChannelRealization) -> Self {
        let (h1, h2) = (ch.h[0], ch.h[1]);
        Self { h1_sq: h1 * h1, bounce: h1 * h1 * h2 * h2, cross: composite_varpi(ch).1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedCsi {
    pub end: EndNodeCsi,
    /// Echo coefficient estimates `[via left neighbour, via right neighbour]`
    /// per chain position; ignored at positions that do not cancel.
    pub relay_echo: Vec<[C64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CsiMode {
    Perfect,
    Estimated(EstimatedCsi),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeConfig {
    /// Number of remote symbols T₁ decodes.
    pub rounds: usize,
    pub sigma_n2: f64,
    pub p1: f64,
    pub p2: f64,
    pub constellation: Constellation,
}

impl ExchangeConfig {
    pub fn from_profile(profile: &PowerProfile, rounds: usize) -> Self {
        Self { rounds, sigma_n2: profile.sigma_n2, p1: profile.p1, p2: profile.p2, constellation: Constellation::Qpsk }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodedSymbol {
    /// 1-based index `j` of `x₂^(j)`.
    pub index: usize,
    pub phase: usize,
    pub sent: C64,
    /// T₁'s sample after removing its own symbols.
    pub post_cancel: C64,
    /// True gain of `x₂^(j)` in that sample.
    pub true_coeff: C64,
    pub estimate: C64,
}

#[derive(Clone, Debug)]
pub struct DataExchangeRecord {
    pub n_pairs: usize,
    pub perfect_csi: bool,
    /// Unit-power symbols of T₁ and T₂ before power scaling, one per even phase.
    pub x1: Vec<C64>,
    pub x2: Vec<C64>,
    /// Signal received by T₁ at each odd phase (index `(φ−1)/2`).
    pub y1: Vec<C64>,
    /// `tx[φ][p]`: what position `p` transmitted in phase `φ`.
    pub tx: Vec<Vec<C64>>,
    /// Largest `|true echo − subtracted echo|` seen at each position, summed
    /// over both sides.
    pub echo_residual: Vec<f64>,
    pub decoded: Vec<DecodedSymbol>,
}

impl DataExchangeRecord {
    pub fn phases(&self) -> usize {
        self.tx.len()
    }

    pub fn max_symbol_error(&self) -> f64 {
        self.decoded.iter().map(|d| (d.estimate - d.sent).norm()).fold(0.0, f64::max)
    }
}

struct Chain<'a> {
    n: usize,
    links: Vec<C64>,
    gains: &'a ChainGains,
}

impl<'a> Chain<'a> {
    fn new(ch: &ChannelRealization, gains: &'a ChainGains) -> Result<Self> {
        let n = ch.n_pairs();
        if gains.n_pairs() != n || gains.right.len() != n - 1 {
            return Err(Error::Config("chain gains do not match the realization".into()));
        }
        let mut links = ch.h.clone();
        links.extend(ch.g.iter().rev());
        Ok(Self { n, links, gains })
    }

    fn last(&self) -> usize {
        2 * self.n
    }

    fn is_relay(&self, p: usize) -> bool {
        p > 0 && p < self.last()
    }

    fn cancels(&self, p: usize) -> bool {
        p >= 2 && p + 2 <= self.last()
    }

    fn first_phase(&self, p: usize) -> usize {
        p.min(self.last() - p)
    }

    fn gain(&self, p: usize, phase: usize) -> f64 {
        let g = self.gains;
        if p == 1 && phase == 1 {
            g.startup[0]
        } else if p + 1 == self.last() && phase == 1 {
            g.startup[1]
        } else if p < self.n {
            g.left[p - 1]
        } else if p == self.n {
            g.center
        } else {
            g.right[self.last() - p - 1]
        }
    }

    /// `link² · gain` of the round trip `p → q → p`.
    fn echo_coefficient(&self, p: usize, q: usize, phase: usize) -> C64 {
        let l = self.link(p.min(q));
        l * l * self.gain(q, phase)
    }

    /// Link between positions `p` and `p + 1`.
    fn link(&self, p: usize) -> C64 {
        self.links[p]
    }

    /// Product of relay gains met by the remote symbol T₂ sent at `phase0`.
    fn cross_gain(&self, phase0: usize) -> f64 {
        let last = self.last();
        (1..last).map(|p| self.gain(p, phase0 + last - p)).product()
    }
}

/// Runs the pipelined exchange over an arbitrary chain.
pub fn run_data_exchange(
    ch: &ChannelRealization,
    gains: &ChainGains,
    cfg: &ExchangeConfig,
    csi: &CsiMode,
    rng: &mut RngStream,
) -> Result<DataExchangeRecord> {
    if cfg.rounds == 0 {
        return domain("at least one exchange round is required");
    }
    if !(cfg.sigma_n2 >= 0.0) || !(cfg.p1 > 0.0) || !(cfg.p2 > 0.0) {
        return domain("noise variance must be nonnegative and powers positive");
    }
    let chain = Chain::new(ch, gains)?;
    let last = chain.last();
    if let CsiMode::Estimated(e) = csi {
        if e.relay_echo.len() != last + 1 {
            return Err(Error::Config(format!("relay_echo needs {} entries", last + 1)));
        }
    }
    let n_phases = 2 * (cfg.rounds - 1) + last;
    let (s1, s2) = (cfg.p1.sqrt(), cfg.p2.sqrt());

    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut y1 = Vec::new();
    let mut tx: Vec<Vec<C64>> = Vec::with_capacity(n_phases);
    // signal held by each position, split as [from left, from right, own noise]
    let mut clean = vec![[ZERO; 3]; last + 1];
    let mut last_tx = vec![[ZERO; 3]; last + 1];
    let mut echo_residual = vec![0.0f64; last + 1];
    let mut decoded = Vec::with_capacity(cfg.rounds);

    for phase in 0..n_phases {
        let parity = phase % 2;
        // transmissions
        let mut now = vec![ZERO; last + 1];
        if parity == 0 {
            let a = cfg.constellation.draw(rng);
            let b = cfg.constellation.draw(rng);
            x1.push(a);
            x2.push(b);
            now[0] = a * s1;
            now[last] = b * s2;
        }
        for p in (1..last).filter(|p| p % 2 == parity) {
            if phase >= chain.first_phase(p) {
                let g = chain.gain(p, phase);
                last_tx[p] = clean[p].map(|c| c * g);
                now[p] = last_tx[p].iter().sum();
            }
        }
        // receptions
        for p in (0..=last).filter(|p| p % 2 != parity) {
            let mut parts = [ZERO; 3];
            let mut residual = ZERO;
            for (side, q) in [(0, p.checked_sub(1)), (1, Some(p + 1).filter(|&q| q <= last))] {
                let Some(q) = q else { continue };
                parts[side] = chain.link(p.min(q)) * now[q];
                if chain.cancels(p) && chain.is_relay(q) {
                    let own = last_tx[p];
                    let mut echoed: C64 = own.iter().sum();
                    if chain.cancels(q) {
                        echoed -= own[side];
                    }
                    let exact = chain.echo_coefficient(p, q, phase);
                    let coeff = match csi {
                        CsiMode::Perfect => exact,
                        CsiMode::Estimated(e) => e.relay_echo[p][side],
                    };
                    residual += (exact - coeff) * echoed;
                    parts[side] -= coeff * echoed;
                }
            }
            echo_residual[p] = echo_residual[p].max(residual.norm());
            parts[2] = rng.cgauss(cfg.sigma_n2);
            let rx: C64 = parts.iter().sum();
            if chain.is_relay(p) {
                clean[p] = parts;
            } else if p == 0 {
                y1.push(rx);
                if phase + 1 >= last {
                    let phase0 = phase + 1 - last;
                    let index = phase0 / 2 + 1;
                    if index <= cfg.rounds {
                        let est_csi = match csi {
                            CsiMode::Perfect => EndNodeCsi::perfect(ch),
                            CsiMode::Estimated(e) => e.end,
                        };
                        let true_csi = EndNodeCsi::perfect(ch);
                        let coeffs = |c: &EndNodeCsi| end_coefficients(&chain, phase, phase0, c);
                        let (cd, cb, cx) = coeffs(&est_csi);
                        let true_cx = coeffs(&true_csi).2;
                        let own_now = x1[(phase - 1) / 2] * s1;
                        let own_prev = if phase >= 3 { x1[(phase - 3) / 2] * s1 } else { ZERO };
                        let post = rx - cd * own_now - cb * own_prev;
                        decoded.push(DecodedSymbol {
                            index,
                            phase,
                            sent: x2[phase0 / 2],
                            post_cancel: post,
                            true_coeff: true_cx * s2,
                            estimate: post / (cx * s2),
                        });
                    }
                }
            }
        }
        tx.push(now);
    }
    Ok(DataExchangeRecord {
        n_pairs: chain.n,
        perfect_csi: matches!(csi, CsiMode::Perfect),
        x1,
        x2,
        y1,
        tx,
        echo_residual,
        decoded,
    })
}

/// Gains of T₁'s current symbol, its symbol from two phases earlier, and the
/// remote symbol sent at `phase0`, all in the sample received at `phase`.
fn end_coefficients(chain: &Chain, phase: usize, phase0: usize, c: &EndNodeCsi) -> (C64, C64, C64) {
    let g1 = chain.gain(1, phase);
    let direct = c.h1_sq * g1;
    let bounce = if phase >= 3 { c.bounce * (chain.gain(1, phase - 2) * chain.gain(2, phase - 1) * g1) } else { ZERO };
    let cross = c.cross * chain.cross_gain(phase0);
    (direct, bounce, cross)
}

/// The 4-hop exchange: R₁, R₂ start with `α̃₁, α̃₂`, R₃ forwards with `α₃`.
pub fn run_data_exchange_4hop(
    ch: &ChannelRealization,
    gains: &Gains,
    cfg: &ExchangeConfig,
    csi: &CsiMode,
    rng: &mut RngStream,
) -> Result<DataExchangeRecord> {
    if ch.n_pairs() != 2 {
        return domain("4-hop exchange needs a 2-pair realization");
    }
    run_data_exchange(ch, &ChainGains::from_gains(gains), cfg, csi, rng)
}

/// Average effective SNR at T₁ in dB: power of the remote symbol's true
/// contribution over the power of everything else left after cancellation.
pub fn effective_snr_at_t1(record: &DataExchangeRecord) -> Result<f64> {
    if record.decoded.is_empty() {
        return domain("record holds no completed exchange");
    }
    let (mut sig, mut res) = (0.0, 0.0);
    for d in &record.decoded {
        let wanted = d.true_coeff * d.sent;
        sig += wanted.norm_sqr();
        res += (d.post_cancel - wanted).norm_sqr();
    }
    if res == 0.0 {
        return Ok(AESNR_CAP_DB);
    }
    Ok(linear_to_db(sig / res).min(AESNR_CAP_DB))
}

/// Expected AESNR in dB with perfect CSI for one 4-hop realization, over the
/// same `rounds` the simulator decodes.
///
/// After exact cancellation T₁'s sample at phase `φ` holds the remote symbol
/// plus the noise of T₁, of R₁ at `φ−1` and `φ−3`, of R₂ at `φ−3` and of R₃
/// at `φ−2`, giving a noise power
/// `σ_n²[1 + g₁(φ)²|h₁|² + g₁(φ)²α₃²|h₁h₂|²(g₁(φ−2)²|h₂|² + g₂(φ−2)²|g₂|² + 1)]`.
pub fn theoretical_aesnr_4hop(ch: &ChannelRealization, gains: &Gains, cfg: &ExchangeConfig) -> Result<f64> {
    let cg = ChainGains::from_gains(gains);
    let chain = Chain::new(ch, &cg)?;
    if chain.n != 2 {
        return domain("4-hop realization required");
    }
    let (h1, h2, g2) = (ch.h[0].norm_sqr(), ch.h[1].norm_sqr(), ch.g[1].norm_sqr());
    let cross = composite_varpi(ch).1;
    let (mut sig, mut noise) = (0.0, 0.0);
    for j in 1..=cfg.rounds {
        let phase0 = 2 * (j - 1);
        let phase = phase0 + 3;
        let ga = chain.gain(1, phase);
        let inner = chain.gain(1, phase - 2).powi(2) * h2 + chain.gain(3, phase - 2).powi(2) * g2 + 1.0;
        noise += cfg.sigma_n2 * (1.0 + ga * ga * h1 + ga * ga * chain.gain(2, phase - 1).powi(2) * h1 * h2 * inner);
        sig += (cross * chain.cross_gain(phase0)).norm_sqr() * cfg.p2;
    }
    if noise == 0.0 {
        return Ok(AESNR_CAP_DB);
    }
    Ok(linear_to_db(sig / noise).min(AESNR_CAP_DB))
}

/// Phase bookkeeping for one exchange of a symbol pair over `2N` hops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralAccounting {
    /// Phases from a symbol pair entering the chain to both being delivered.
    pub coded_phases_per_exchange: usize,
    /// Phases for point-to-point relaying in both directions.
    pub point_to_point_phases: usize,
    /// Phases between completed exchanges once the pipeline is full.
    pub steady_state_period: usize,
}

impl SpectralAccounting {
    pub fn for_hops(n_pairs: usize) -> Self {
        Self { coded_phases_per_exchange: 2 * n_pairs, point_to_point_phases: 4 * n_pairs, steady_state_period: 2 }
    }

    /// Point-to-point phases over network-coded phases for one exchange.
    pub fn exchange_gain(&self) -> f64 {
        self.point_to_point_phases as f64 / self.coded_phases_per_exchange as f64
    }

    /// Throughput ratio once the pipeline is full.
    pub fn steady_state_gain(&self) -> f64 {
        self.point_to_point_phases as f64 / self.steady_state_period as f64
    }

    /// Exchanges completed per phase, measured on a record after the
    /// pipeline has filled.
    pub fn measured_steady_rate(record: &DataExchangeRecord) -> f64 {
        let fill = 2 * record.n_pairs - 1;
        let steady: Vec<_> = record.decoded.iter().filter(|d| d.phase > fill).collect();
        match (steady.first(), steady.last()) {
            (Some(a), Some(b)) if b.phase > a.phase => (steady.len() - 1) as f64 / (b.phase - a.phase) as f64,
            _ => 0.0,
        }
    }
}
