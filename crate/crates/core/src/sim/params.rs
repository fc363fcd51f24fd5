use serde::{Deserialize, Serialize};

use super::SimError;

/// Smallest and largest exponents accepted for a fixed contention window.
pub const FIXED_CW_EXP_RANGE: (u32, u32) = (4, 10);
/// Largest exponent accepted anywhere (CW = 65535).
pub const MAX_CW_EXP: u32 = 16;
/// Upper bound on MPDUs per A-MPDU.
pub const MAX_AMPDU: u32 = 64;

/// PHY/MAC timing and framing constants shared by every station.
///
/// Defaults are 5 GHz OFDM-era values: 9 µs slot, 34 µs DIFS, 16 µs SIFS,
/// a 40 µs PHY preamble/header and a 32 µs block ACK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub slot_us: f64,
    pub difs_us: f64,
    pub sifs_us: f64,
    pub phy_header_us: f64,
    pub block_ack_us: f64,
    pub mpdu_payload_bytes: u32,
    /// MAC header plus A-MPDU delimiter, per MPDU.
    pub mpdu_overhead_bytes: u32,
    /// Independent per-MPDU error probability on collision-free transmissions.
    pub per: f64,
    /// Drop an aggregate after this many collisions. `None` retries forever.
    pub retry_limit: Option<u32>,
    /// Aggregates a TCP-like station may have unacknowledged before pausing.
    pub tcp_window: u32,
    /// Delay of the cumulative transport ACK, in slots.
    pub tcp_ack_delay_slots: u32,
    /// Per-station buffer for non-saturated stations, in MPDUs.
    pub queue_limit_mpdus: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            slot_us: 9.0,
            difs_us: 34.0,
            sifs_us: 16.0,
            phy_header_us: 40.0,
            block_ack_us: 32.0,
            mpdu_payload_bytes: 1500,
            mpdu_overhead_bytes: 40,
            per: 0.0,
            retry_limit: None,
            tcp_window: 4,
            tcp_ack_delay_slots: 2,
            queue_limit_mpdus: 1024,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let durations = [
            ("slot_us", self.slot_us),
            ("difs_us", self.difs_us),
            ("sifs_us", self.sifs_us),
            ("phy_header_us", self.phy_header_us),
            ("block_ack_us", self.block_ack_us),
        ];
        for (field, value) in durations {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::config(field, format!("must be a positive duration, got {value}")));
            }
        }
        if self.mpdu_payload_bytes == 0 {
            return Err(SimError::config("mpdu_payload_bytes", "must be > 0"));
        }
        if !(self.per >= 0.0 && self.per < 1.0) {
            return Err(SimError::config("per", format!("must lie in [0, 1), got {}", self.per)));
        }
        if self.tcp_window == 0 {
            return Err(SimError::config("tcp_window", "must be >= 1"));
        }
        if self.queue_limit_mpdus == 0 {
            return Err(SimError::config("queue_limit_mpdus", "must be >= 1"));
        }
        Ok(())
    }

    /// Bits carried by one MPDU's payload (overhead excluded).
    pub fn payload_bits(&self) -> u64 {
        u64::from(self.mpdu_payload_bytes) * 8
    }
}

/// Airtime of one aggregated transmission, from the PHY header to the end
/// of the block ACK.
pub fn tx_duration(ampdu_n: u32, params: &SimParams, phy_rate_mbps: f64) -> Result<f64, SimError> {
    if ampdu_n < 1 {
        return Err(SimError::Domain(format!("ampdu_n must be >= 1, got {ampdu_n}")));
    }
    if !(phy_rate_mbps.is_finite() && phy_rate_mbps > 0.0) {
        return Err(SimError::Domain(format!("phy rate must be positive, got {phy_rate_mbps}")));
    }
    let mpdu_bits = f64::from(params.mpdu_payload_bytes + params.mpdu_overhead_bytes) * 8.0;
    Ok(params.phy_header_us
        + f64::from(ampdu_n) * mpdu_bits / phy_rate_mbps
        + params.sifs_us
        + params.block_ack_us)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generation {
    #[serde(rename = "wifi5")]
    WiFi5,
    #[serde(rename = "wifi6")]
    WiFi6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    SaturatedUdp,
    WindowedTcpLike,
}

/// PHY rate assigned to each Wi-Fi generation. No per-packet rate adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateTable {
    pub wifi5_mbps: f64,
    pub wifi6_mbps: f64,
}

impl Default for RateTable {
    fn default() -> Self {
        Self { wifi5_mbps: 433.0, wifi6_mbps: 600.0 }
    }
}

impl RateTable {
    pub fn rate(&self, generation: Generation) -> f64 {
        match generation {
            Generation::WiFi5 => self.wifi5_mbps,
            Generation::WiFi6 => self.wifi6_mbps,
        }
    }
}

/// One associated station.
///
/// A saturated station always has an aggregate queued. Otherwise MPDUs
/// arrive as a Poisson stream at `offered_load_mbps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationCfg {
    pub id: u32,
    pub generation: Generation,
    pub phy_rate_mbps: f64,
    pub traffic: Traffic,
    pub saturated: bool,
    #[serde(default)]
    pub offered_load_mbps: f64,
}

impl StationCfg {
    pub fn saturated(id: u32, generation: Generation, rates: &RateTable) -> Self {
        Self {
            id,
            generation,
            phy_rate_mbps: rates.rate(generation),
            traffic: Traffic::SaturatedUdp,
            saturated: true,
            offered_load_mbps: 0.0,
        }
    }

    /// `n` identical saturated UDP stations of one generation.
    pub fn homogeneous(n: usize, generation: Generation, rates: &RateTable) -> Vec<Self> {
        (0..n as u32).map(|id| Self::saturated(id, generation, rates)).collect()
    }
}

pub fn validate_stations(stations: &[StationCfg]) -> Result<(), SimError> {
    if stations.is_empty() {
        return Err(SimError::config("stations", "at least one station is required"));
    }
    for (i, s) in stations.iter().enumerate() {
        if !(s.phy_rate_mbps.is_finite() && s.phy_rate_mbps > 0.0) {
            return Err(SimError::config(format!("stations[{i}].phy_rate_mbps"), "must be > 0"));
        }
        if !s.saturated && !(s.offered_load_mbps.is_finite() && s.offered_load_mbps > 0.0) {
            return Err(SimError::config(
                format!("stations[{i}].offered_load_mbps"),
                "non-saturated stations need a positive offered load",
            ));
        }
    }
    let fastest_wifi5 = stations
        .iter()
        .filter(|s| s.generation == Generation::WiFi5)
        .map(|s| s.phy_rate_mbps)
        .fold(f64::NEG_INFINITY, f64::max);
    let slowest_wifi6 = stations
        .iter()
        .filter(|s| s.generation == Generation::WiFi6)
        .map(|s| s.phy_rate_mbps)
        .fold(f64::INFINITY, f64::min);
    if fastest_wifi5 > slowest_wifi6 {
        return Err(SimError::config(
            "stations.phy_rate_mbps",
            format!("a Wi-Fi 5 station ({fastest_wifi5} Mbps) outpaces a Wi-Fi 6 station ({slowest_wifi6} Mbps)"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CwMode {
    /// Binary exponential backoff between `2^min - 1` and `2^max - 1`.
    StandardBeb { cw_min_exp: u32, cw_max_exp: u32 },
    /// Constant window `2^cw_exp - 1`.
    Fixed { cw_exp: u32 },
}

/// The two decision variables: contention window behaviour and A-MPDU length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacControls {
    pub cw_mode: CwMode,
    pub ampdu_n: u32,
}

impl MacControls {
    pub const DEFAULT_CW_MIN_EXP: u32 = 4;
    pub const DEFAULT_CW_MAX_EXP: u32 = 10;

    pub fn standard_beb(ampdu_n: u32) -> Self {
        Self {
            cw_mode: CwMode::StandardBeb {
                cw_min_exp: Self::DEFAULT_CW_MIN_EXP,
                cw_max_exp: Self::DEFAULT_CW_MAX_EXP,
            },
            ampdu_n,
        }
    }

    pub fn fixed(cw_exp: u32, ampdu_n: u32) -> Self {
        Self { cw_mode: CwMode::Fixed { cw_exp }, ampdu_n }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.cw_mode {
            CwMode::Fixed { cw_exp } => {
                let (lo, hi) = FIXED_CW_EXP_RANGE;
                if !(lo..=hi).contains(&cw_exp) {
                    return Err(SimError::config("cw_exp", format!("must lie in [{lo}, {hi}], got {cw_exp}")));
                }
            }
            CwMode::StandardBeb { cw_min_exp, cw_max_exp } => {
                if cw_min_exp < 1 || cw_max_exp > MAX_CW_EXP {
                    return Err(SimError::config(
                        "cw_mode",
                        format!("BEB exponents must lie in [1, {MAX_CW_EXP}]"),
                    ));
                }
                if cw_min_exp > cw_max_exp {
                    return Err(SimError::config(
                        "cw_min_exp",
                        format!("{cw_min_exp} exceeds cw_max_exp {cw_max_exp}"),
                    ));
                }
            }
        }
        if !(1..=MAX_AMPDU).contains(&self.ampdu_n) {
            return Err(SimError::config("ampdu_n", format!("must lie in [1, {MAX_AMPDU}], got {}", self.ampdu_n)));
        }
        Ok(())
    }

    /// Exponent bounds `(min, max)` the per-station stage may take.
    pub fn exp_bounds(&self) -> (u32, u32) {
        match self.cw_mode {
            CwMode::Fixed { cw_exp } => (cw_exp, cw_exp),
            CwMode::StandardBeb { cw_min_exp, cw_max_exp } => (cw_min_exp, cw_max_exp),
        }
    }
}

/// `CW = 2^exp - 1`.
pub fn cw_from_exp(exp: u32) -> u32 {
    (1u32 << exp) - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed() -> SimParams {
        SimParams {
            phy_header_us: 0.0,
            sifs_us: 0.0,
            block_ack_us: 0.0,
            mpdu_overhead_bytes: 0,
            ..SimParams::default()
        }
    }

    #[test]
    fn tx_duration_payload_only() {
        // Zero overheads are invalid params but fine for the pure airtime formula.
        let p = zeroed();
        assert!((tx_duration(1, &p, 100.0).unwrap() - 120.0).abs() < 1e-12);
        assert!((tx_duration(2, &p, 100.0).unwrap() - 240.0).abs() < 1e-12);
    }

    #[test]
    fn tx_duration_full_aggregate() {
        let p = SimParams {
            phy_header_us: 40.0,
            sifs_us: 16.0,
            block_ack_us: 32.0,
            mpdu_payload_bytes: 1500,
            mpdu_overhead_bytes: 40,
            ..SimParams::default()
        };
        // 40 + 64 * 1540 * 8 / 600 + 16 + 32 = 88 + 788480 / 600
        let expected = 1402.133_333_333_333_3;
        assert!((tx_duration(64, &p, 600.0).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn tx_duration_rejects_empty_aggregate() {
        assert!(matches!(tx_duration(0, &SimParams::default(), 600.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn per_bit_airtime_falls_with_aggregation() {
        let p = SimParams::default();
        let mut prev_total = 0.0;
        let mut prev_per_bit = f64::INFINITY;
        for n in 1..=MAX_AMPDU {
            let d = tx_duration(n, &p, 433.0).unwrap();
            let per_bit = d / (f64::from(n) * p.payload_bits() as f64);
            assert!(d > prev_total);
            assert!(per_bit < prev_per_bit);
            prev_total = d;
            prev_per_bit = per_bit;
        }
    }

    #[test]
    fn params_validation_names_field() {
        let bad = SimParams { per: 1.0, ..SimParams::default() };
        match bad.validate() {
            Err(SimError::Config { field, .. }) => assert_eq!(field, "per"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = SimParams { difs_us: 0.0, ..SimParams::default() };
        assert!(matches!(bad.validate(), Err(SimError::Config { field, .. }) if field == "difs_us"));
    }

    #[test]
    fn controls_bounds() {
        assert!(MacControls::fixed(4, 1).validate().is_ok());
        assert!(MacControls::fixed(10, 64).validate().is_ok());
        assert!(MacControls::fixed(3, 1).validate().is_err());
        assert!(MacControls::fixed(11, 1).validate().is_err());
        assert!(MacControls::fixed(5, 0).validate().is_err());
        assert!(MacControls::fixed(5, 65).validate().is_err());
        let inverted = MacControls {
            cw_mode: CwMode::StandardBeb { cw_min_exp: 6, cw_max_exp: 5 },
            ampdu_n: 1,
        };
        assert!(inverted.validate().is_err());
        assert!(MacControls::standard_beb(8).validate().is_ok());
    }

    #[test]
    fn generation_rate_ordering_checked() {
        let rates = RateTable::default();
        let mut roster = vec![
            StationCfg::saturated(0, Generation::WiFi5, &rates),
            StationCfg::saturated(1, Generation::WiFi6, &rates),
        ];
        assert!(validate_stations(&roster).is_ok());
        roster[0].phy_rate_mbps = 900.0;
        assert!(validate_stations(&roster).is_err());
        assert!(validate_stations(&[]).is_err());
    }
}
