//! Highway geometry and the V2V radio channel.
//!
//! The channel between a platoon leader and any receiving vehicle is the
//! product of a large-scale coefficient (free-space pathloss, log-normal
//! shadowing, antenna gain) and a small-scale Rayleigh power coefficient.
//! The two evolve on different clocks: the large-scale part is redrawn once
//! per episode (the 100 ms period), the small-scale part every 1 ms slot.
//!
//! All gains are linear and unitless; conversion helpers live at the bottom.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::config::{LaneScheme, ScenarioConfig};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Free-space model floor; below ~1 m the far-field assumption breaks down.
const MIN_LINK_DISTANCE_M: f64 = 1.0;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Vehicle positions, meters. `positions[p][0]` is platoon p's leader,
/// `positions[p][platoon_len - 1]` its tail; vehicles drive toward +x.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Topology {
    pub positions: Vec<Vec<[f64; 2]>>,
}

impl Topology {
    pub fn n_platoons(&self) -> usize {
        self.positions.len()
    }

    pub fn leader(&self, platoon: usize) -> [f64; 2] {
        self.positions[platoon][0]
    }

    /// Follower `j` in 1..=M.
    pub fn follower(&self, platoon: usize, j: usize) -> [f64; 2] {
        debug_assert!(j >= 1);
        self.positions[platoon][j]
    }

    pub fn tail(&self, platoon: usize) -> [f64; 2] {
        *self.positions[platoon].last().expect("non-empty platoon")
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Lay platoons out on the road: heads evenly spaced `head_spacing_m` apart
/// along +x (with a per-episode uniform jitter), followers trailing at a
/// uniform `head_to_tail_m / M` gap, lanes assigned by the configured scheme.
pub fn build_topology(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<Topology> {
    cfg.validate()?;
    let m = cfg.n_followers();
    let spacing = cfg.head_to_tail_m / m as f64;
    let mut positions = Vec::with_capacity(cfg.n_platoons);
    for p in 0..cfg.n_platoons {
        let jitter = if cfg.head_jitter_m > 0.0 {
            rng.random_range(-cfg.head_jitter_m..=cfg.head_jitter_m)
        } else {
            0.0
        };
        let head_x = p as f64 * cfg.head_spacing_m + jitter;
        let lane_y = match cfg.lane_spacing_scheme {
            LaneScheme::Alternating => (p % 2) as f64 * cfg.lane_width_m,
            LaneScheme::SingleLane => 0.0,
        };
        let platoon: Vec<[f64; 2]> = (0..cfg.platoon_len)
            .map(|k| [head_x - k as f64 * spacing, lane_y])
            .collect();
        positions.push(platoon);
    }
    Ok(Topology { positions })
}

// ---------------------------------------------------------------------------
// Fading
// ---------------------------------------------------------------------------

/// Fading state of one directed link (leader of some platoon -> a receiver).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkState {
    /// Large-scale coefficient in dB: gain - pathloss - shadowing.
    pub alpha_db: f64,
    /// Small-scale Rayleigh power coefficient; unit-mean exponential.
    pub h: f64,
}

impl LinkState {
    /// Linear channel gain g = 10^(alpha/10) * h.
    pub fn gain(&self) -> f64 {
        db_to_linear(self.alpha_db) * self.h
    }
}

/// Fading for every (transmitting leader, receiving platoon, follower) link.
#[derive(Clone, Debug)]
pub struct LinkFading {
    n_platoons: usize,
    n_followers: usize,
    alpha_db: Vec<f64>,
    h: Vec<f64>,
}

impl LinkFading {
    /// Assemble a fading state from explicit per-link coefficients, indexed
    /// `[(tx * n_platoons + rx_platoon) * n_followers + follower - 1]`.
    pub fn from_parts(
        n_platoons: usize,
        n_followers: usize,
        alpha_db: Vec<f64>,
        h: Vec<f64>,
    ) -> Result<Self> {
        let expect = n_platoons * n_platoons * n_followers;
        if alpha_db.len() != expect || h.len() != expect {
            return Err(Error::Domain(format!(
                "need {expect} per-link coefficients for {n_platoons} platoons x {n_followers} followers"
            )));
        }
        if h.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain("small-scale coefficients must be >= 0".into()));
        }
        Ok(Self { n_platoons, n_followers, alpha_db, h })
    }

    fn idx(&self, tx: usize, rx_platoon: usize, follower: usize) -> usize {
        debug_assert!((1..=self.n_followers).contains(&follower));
        (tx * self.n_platoons + rx_platoon) * self.n_followers + (follower - 1)
    }

    /// Link from platoon `tx`'s leader to follower `j` (1..=M) of `rx_platoon`.
    pub fn link(&self, tx: usize, rx_platoon: usize, follower: usize) -> LinkState {
        let i = self.idx(tx, rx_platoon, follower);
        LinkState { alpha_db: self.alpha_db[i], h: self.h[i] }
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    /// Draw the per-episode large-scale coefficients for every link:
    /// alpha_dB = G - PL(d) - SH with SH ~ Normal(0, shadow_std^2).
    /// Small-scale coefficients start at their unit mean.
    pub fn sample_large_scale(
        topo: &Topology,
        cfg: &ScenarioConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let n = topo.n_platoons();
        let m = cfg.n_followers();
        let shadow = Normal::new(0.0, cfg.shadow_std_db)
            .map_err(|e| Error::Config(format!("shadow_std_db: {e}")))?;
        let mut alpha_db = Vec::with_capacity(n * n * m);
        for tx in 0..n {
            let tx_pos = topo.leader(tx);
            for rx_platoon in 0..n {
                for follower in 1..=m {
                    let d = dist(tx_pos, topo.follower(rx_platoon, follower))
                        .max(MIN_LINK_DISTANCE_M);
                    let sh = shadow.sample(rng);
                    alpha_db.push(cfg.antenna_gain_db - pathloss_db(d, cfg.carrier_hz)? - sh);
                }
            }
        }
        let h = vec![1.0; alpha_db.len()];
        Ok(Self { n_platoons: n, n_followers: m, alpha_db, h })
    }

    /// Redraw every small-scale coefficient i.i.d. unit-mean exponential
    /// (Rayleigh amplitude => exponential power). Called once per slot.
    pub fn resample_small_scale(&mut self, rng: &mut impl Rng) {
        for h in &mut self.h {
            *h = Exp1.sample(rng);
        }
    }
}

// ---------------------------------------------------------------------------
// Link budget
// ---------------------------------------------------------------------------

/// Free-space pathloss 20*log10(4*pi*d*f/c), dB.
pub fn pathloss_db(d_m: f64, carrier_hz: f64) -> Result<f64> {
    if d_m <= 0.0 {
        return Err(Error::Domain(format!("pathloss distance must be > 0, got {d_m}")));
    }
    let ratio = 4.0 * std::f64::consts::PI * d_m * carrier_hz / SPEED_OF_LIGHT_M_S;
    Ok(20.0 * ratio.log10())
}

/// One platoon's transmit decision for a slot: which subchannel its leader
/// occupies and at what linear power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission {
    pub subchannel: usize,
    pub power_w: f64,
}

/// SINR at follower `j` of `rx_platoon` on subchannel `ch`.
///
/// Numerator: the platoon's own leader, if it transmits on `ch` (else 0).
/// Denominator: noise plus every other platoon's leader active on `ch`.
pub fn sinr(
    fading: &LinkFading,
    noise_w: f64,
    transmissions: &[Option<Transmission>],
    rx_platoon: usize,
    follower: usize,
    ch: usize,
) -> f64 {
    let own = match transmissions[rx_platoon] {
        Some(t) if t.subchannel == ch => t,
        _ => return 0.0,
    };
    let signal = own.power_w * fading.link(rx_platoon, rx_platoon, follower).gain();
    let mut denom = noise_w;
    for (tx, t) in transmissions.iter().enumerate() {
        if tx == rx_platoon {
            continue;
        }
        if let Some(t) = t {
            if t.subchannel == ch {
                denom += t.power_w * fading.link(tx, rx_platoon, follower).gain();
            }
        }
    }
    signal / denom
}

/// Effective groupcast rate of a platoon on `ch`, bits/s/Hz: the groupcast is
/// limited by the worst receiver, so this is the minimum over followers of
/// log2(1 + SINR).
pub fn effective_rate(
    fading: &LinkFading,
    noise_w: f64,
    transmissions: &[Option<Transmission>],
    platoon: usize,
    ch: usize,
) -> f64 {
    (1..=fading.n_followers())
        .map(|j| rate_bps_hz(sinr(fading, noise_w, transmissions, platoon, j, ch)))
        .fold(f64::INFINITY, f64::min)
}

/// Tail-receiver shortcut: under pure pathloss the tail vehicle is the worst
/// receiver, so its rate alone is a cheap stand-in for `effective_rate`.
pub fn effective_rate_tail(
    fading: &LinkFading,
    noise_w: f64,
    transmissions: &[Option<Transmission>],
    platoon: usize,
    ch: usize,
) -> f64 {
    let tail = fading.n_followers();
    rate_bps_hz(sinr(fading, noise_w, transmissions, platoon, tail, ch))
}

fn rate_bps_hz(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

// ---------------------------------------------------------------------------
// Unit conversions
// ---------------------------------------------------------------------------

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
