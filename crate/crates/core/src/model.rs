//! Network description and the closed-form link quantities derived from it:
//! outage complements over Rayleigh fading, primary band availability and the
//! per-(band, user) secondary service rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthogonal::AssignmentMatrix;

/// Slot timing shared by all terminals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    /// Slot duration `T` in seconds.
    pub duration: f64,
    /// Secondary sensing time `tau` in seconds, carved out of the slot.
    pub sensing: f64,
    /// Packet size `b` in bits.
    pub packet_bits: f64,
}

impl SlotConfig {
    pub fn new(duration: f64, sensing: f64, packet_bits: f64) -> Result<Self> {
        let slot = SlotConfig {
            duration,
            sensing,
            packet_bits,
        };
        slot.validate()?;
        Ok(slot)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config(format!(
                "slot duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.sensing.is_finite() && self.sensing >= 0.0 && self.sensing < self.duration) {
            return Err(Error::config(format!(
                "sensing duration must lie in [0, T), got {} with T = {}",
                self.sensing, self.duration
            )));
        }
        if !(self.packet_bits.is_finite() && self.packet_bits > 0.0) {
            return Err(Error::config(format!(
                "packet size must be positive, got {}",
                self.packet_bits
            )));
        }
        Ok(())
    }
}

/// How a primary band's link is described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimaryLink {
    /// Mean SNR and mean channel gain of the primary link.
    Physical { snr: f64, gain: f64 },
    /// Correct-reception probability of the primary link and band availability, taken verbatim.
    Abstract { out_complement: f64, availability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryBand {
    /// Bandwidth in Hz. Zero marks a virtual band.
    pub bandwidth: f64,
    /// Bernoulli arrival rate of the primary queue (packets/slot). Required for physical
    /// links; for abstract links it is derived from the availability when absent.
    pub arrival_rate: Option<f64>,
    pub link: PrimaryLink,
}

/// How a secondary user's links are described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SecondaryLink {
    Physical { snr: f64, gain: f64 },
    /// Correct-reception probability on every band, one entry per band.
    Abstract { out_complement: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryUser {
    /// Bernoulli arrival rate (packets/slot).
    pub arrival_rate: f64,
    pub link: SecondaryLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Physical,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub slot: SlotConfig,
    pub bands: Vec<PrimaryBand>,
    pub users: Vec<SecondaryUser>,
}

fn check_probability(value: f64, what: &str) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must lie in [0, 1], got {value}")))
    }
}

fn check_positive(value: f64, what: &str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must be positive, got {value}")))
    }
}

impl Scenario {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Input mode shared by every band and user, or a configuration error when they mix.
    pub fn mode(&self) -> Result<InputMode> {
        let band_modes = self.bands.iter().map(|b| match b.link {
            PrimaryLink::Physical { .. } => InputMode::Physical,
            PrimaryLink::Abstract { .. } => InputMode::Abstract,
        });
        let user_modes = self.users.iter().map(|u| match u.link {
            SecondaryLink::Physical { .. } => InputMode::Physical,
            SecondaryLink::Abstract { .. } => InputMode::Abstract,
        });
        let mut modes = band_modes.chain(user_modes);
        let first = modes
            .next()
            .ok_or_else(|| Error::config("scenario has no bands or users"))?;
        if modes.any(|m| m != first) {
            return Err(Error::config(
                "bands and users mix physical and abstract input modes",
            ));
        }
        Ok(first)
    }

    pub fn validate(&self) -> Result<()> {
        self.slot.validate()?;
        if self.bands.is_empty() {
            return Err(Error::config("at least one primary band is required"));
        }
        if self.users.is_empty() {
            return Err(Error::config("at least one secondary user is required"));
        }
        self.mode()?;
        for (j, band) in self.bands.iter().enumerate() {
            let tag = format!("band {}", j + 1);
            if !(band.bandwidth.is_finite() && band.bandwidth >= 0.0) {
                return Err(Error::config(format!(
                    "{tag}: bandwidth must be non-negative, got {}",
                    band.bandwidth
                )));
            }
            match band.link {
                PrimaryLink::Physical { snr, gain } => {
                    let lambda = band.arrival_rate.ok_or_else(|| {
                        Error::config(format!("{tag}: physical bands need an arrival rate"))
                    })?;
                    check_probability(lambda, &format!("{tag}: arrival rate"))?;
                    check_positive(snr, &format!("{tag}: snr"))?;
                    check_positive(gain, &format!("{tag}: channel gain"))?;
                }
                PrimaryLink::Abstract {
                    out_complement,
                    availability,
                } => {
                    check_probability(out_complement, &format!("{tag}: outage complement"))?;
                    check_probability(availability, &format!("{tag}: availability"))?;
                    if let Some(lambda) = band.arrival_rate {
                        check_probability(lambda, &format!("{tag}: arrival rate"))?;
                        let implied = band_availability(lambda, out_complement);
                        if (implied - availability).abs() > 1e-9 {
                            return Err(Error::config(format!(
                                "{tag}: availability {availability} disagrees with arrival rate \
                                 {lambda} and service rate {out_complement} (implies {implied})"
                            )));
                        }
                    }
                }
            }
        }
        for (k, user) in self.users.iter().enumerate() {
            let tag = format!("user {}", k + 1);
            check_probability(user.arrival_rate, &format!("{tag}: arrival rate"))?;
            match &user.link {
                SecondaryLink::Physical { snr, gain } => {
                    check_positive(*snr, &format!("{tag}: snr"))?;
                    check_positive(*gain, &format!("{tag}: channel gain"))?;
                }
                SecondaryLink::Abstract { out_complement } => {
                    if out_complement.len() != self.bands.len() {
                        return Err(Error::config(format!(
                            "{tag}: expected {} outage complements (one per band), got {}",
                            self.bands.len(),
                            out_complement.len()
                        )));
                    }
                    for (j, &p) in out_complement.iter().enumerate() {
                        check_probability(p, &format!("{tag}: outage complement on band {}", j + 1))?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn secondary_rates(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.arrival_rate).collect()
    }

    /// Copy of the scenario with the secondary arrival rates replaced.
    pub fn with_secondary_rates(&self, rates: &[f64]) -> Result<Scenario> {
        if rates.len() != self.users.len() {
            return Err(Error::dimension(format!(
                "{} rates for {} users",
                rates.len(),
                self.users.len()
            )));
        }
        let mut out = self.clone();
        for (user, &rate) in out.users.iter_mut().zip(rates) {
            check_probability(rate, "secondary arrival rate")?;
            user.arrival_rate = rate;
        }
        Ok(out)
    }

    /// Per-link success probabilities and arrival rates the simulator needs.
    pub fn link_profile(&self) -> Result<LinkProfile> {
        self.validate()?;
        let mut pu_success = Vec::with_capacity(self.bands.len());
        let mut pu_arrival = Vec::with_capacity(self.bands.len());
        for band in &self.bands {
            match band.link {
                PrimaryLink::Physical { snr, gain } => {
                    pu_success.push(primary_outage_complement(&self.slot, band.bandwidth, snr, gain)?);
                    pu_arrival.push(band.arrival_rate.unwrap_or(0.0));
                }
                PrimaryLink::Abstract {
                    out_complement,
                    availability,
                } => {
                    let mu_p = if band.bandwidth == 0.0 { 0.0 } else { out_complement };
                    pu_success.push(mu_p);
                    let lambda = band
                        .arrival_rate
                        .unwrap_or_else(|| ((1.0 - availability) * mu_p).clamp(0.0, 1.0));
                    pu_arrival.push(lambda);
                }
            }
        }
        let su_success = self.secondary_out_complements()?;
        Ok(LinkProfile {
            su_success,
            pu_success,
            pu_arrival,
            su_arrival: self.secondary_rates(),
        })
    }

    /// `out[j][k]`: probability that user `k`'s packet survives the channel on band `j`.
    fn secondary_out_complements(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; self.users.len()]; self.bands.len()];
        for (j, band) in self.bands.iter().enumerate() {
            for (k, user) in self.users.iter().enumerate() {
                out[j][k] = match &user.link {
                    SecondaryLink::Physical { snr, gain } => {
                        secondary_outage_complement(&self.slot, band.bandwidth, *snr, *gain)?
                    }
                    SecondaryLink::Abstract { out_complement } => {
                        if band.bandwidth == 0.0 {
                            0.0
                        } else {
                            out_complement[j]
                        }
                    }
                };
            }
        }
        Ok(out)
    }
}

/// Link-level view of a scenario used by the slot simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    /// `su_success[j][k]`: correct-reception probability of user `k` on band `j`.
    pub su_success: Vec<Vec<f64>>,
    pub pu_success: Vec<f64>,
    pub pu_arrival: Vec<f64>,
    pub su_arrival: Vec<f64>,
}

/// Derived service rates of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    /// `mu[j][k]`: mean service rate of user `k` when it holds band `j` (packets/slot).
    pub mu: Vec<Vec<f64>>,
    /// Mean service rate of each primary queue.
    pub mu_p: Vec<f64>,
    /// Probability that each primary band is idle.
    pub pi: Vec<f64>,
}

impl RateMatrix {
    /// Rate matrix from service rates alone, with every band always idle and a
    /// perfect primary link. Convenient for analytic work where only `mu` matters.
    pub fn from_service(mu: Vec<Vec<f64>>) -> Result<Self> {
        let n_bands = mu.len();
        let rates = RateMatrix {
            mu,
            mu_p: vec![1.0; n_bands],
            pi: vec![1.0; n_bands],
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() {
            return Err(Error::dimension("rate matrix has no bands"));
        }
        let n_users = self.mu[0].len();
        if n_users == 0 {
            return Err(Error::dimension("rate matrix has no users"));
        }
        if self.mu.iter().any(|row| row.len() != n_users) {
            return Err(Error::dimension("rate matrix rows differ in length"));
        }
        if self.mu_p.len() != self.mu.len() || self.pi.len() != self.mu.len() {
            return Err(Error::dimension(
                "primary rates and availabilities must have one entry per band",
            ));
        }
        let all = self.mu.iter().flatten().chain(&self.mu_p).chain(&self.pi);
        for &v in all {
            check_probability(v, "rate matrix entry")?;
        }
        Ok(())
    }

    pub fn n_bands(&self) -> usize {
        self.mu.len()
    }

    pub fn n_users(&self) -> usize {
        self.mu.first().map_or(0, Vec::len)
    }

    /// Service rates of a 2-band, 2-user network as `[[mu11, mu12], [mu21, mu22]]`.
    pub fn as_2x2(&self) -> Result<[[f64; 2]; 2]> {
        if self.n_bands() != 2 || self.n_users() != 2 {
            return Err(Error::Unsupported(format!(
                "expected 2 bands and 2 users, got {} bands and {} users",
                self.n_bands(),
                self.n_users()
            )));
        }
        Ok([
            [self.mu[0][0], self.mu[0][1]],
            [self.mu[1][0], self.mu[1][1]],
        ])
    }
}

/// Probability that a secondary packet sent over band width `bandwidth` (Hz) is decoded,
/// given that the first `tau` seconds of the slot were spent sensing.
pub fn secondary_outage_complement(
    slot: &SlotConfig,
    bandwidth: f64,
    snr: f64,
    gain: f64,
) -> Result<f64> {
    slot.validate()?;
    let effective = slot.duration - slot.sensing;
    outage_complement(slot.packet_bits, effective, bandwidth, snr, gain)
}

/// Probability that a primary packet is decoded; primaries transmit over the whole slot.
pub fn primary_outage_complement(
    slot: &SlotConfig,
    bandwidth: f64,
    snr: f64,
    gain: f64,
) -> Result<f64> {
    slot.validate()?;
    outage_complement(slot.packet_bits, slot.duration, bandwidth, snr, gain)
}

fn outage_complement(bits: f64, airtime: f64, bandwidth: f64, snr: f64, gain: f64) -> Result<f64> {
    if !(bandwidth.is_finite() && bandwidth >= 0.0) {
        return Err(Error::input(format!("bandwidth must be non-negative, got {bandwidth}")));
    }
    check_positive(snr, "snr").map_err(|e| Error::Input(e.to_string()))?;
    check_positive(gain, "channel gain").map_err(|e| Error::Input(e.to_string()))?;
    if bandwidth == 0.0 {
        return Ok(0.0);
    }
    let spectral = bits / (airtime * bandwidth);
    let threshold = spectral.exp2() - 1.0;
    Ok((-threshold / (snr * gain)).exp())
}

/// Probability that a primary queue with Bernoulli(`lambda_p`) arrivals and
/// Bernoulli(`mu_p`) service is empty; zero once the queue saturates.
pub fn band_availability(lambda_p: f64, mu_p: f64) -> f64 {
    if mu_p <= 0.0 {
        return if lambda_p > 0.0 { 0.0 } else { 1.0 };
    }
    1.0 - (lambda_p / mu_p).min(1.0)
}

pub fn rate_matrix(scenario: &Scenario) -> Result<RateMatrix> {
    scenario.validate()?;
    let mut mu_p = Vec::with_capacity(scenario.n_bands());
    let mut pi = Vec::with_capacity(scenario.n_bands());
    for band in &scenario.bands {
        match band.link {
            PrimaryLink::Physical { snr, gain } => {
                let service = primary_outage_complement(&scenario.slot, band.bandwidth, snr, gain)?;
                mu_p.push(service);
                pi.push(band_availability(band.arrival_rate.unwrap_or(0.0), service));
            }
            PrimaryLink::Abstract {
                out_complement,
                availability,
            } => {
                mu_p.push(out_complement);
                pi.push(availability);
            }
        }
    }
    let complements = scenario.secondary_out_complements()?;
    let mu = complements
        .iter()
        .zip(&pi)
        .map(|(row, &p)| row.iter().map(|&c| p * c).collect())
        .collect();
    let rates = RateMatrix { mu, mu_p, pi };
    rates.validate()?;
    Ok(rates)
}

/// Mean service rate of user `k` under long-run assignment fractions `omega`.
pub fn secondary_service_rate(omega: &AssignmentMatrix, rates: &RateMatrix, k: usize) -> Result<f64> {
    if omega.n_bands() != rates.n_bands() || omega.n_users() != rates.n_users() {
        return Err(Error::dimension(format!(
            "assignment is {}x{} but rates are {}x{}",
            omega.n_bands(),
            omega.n_users(),
            rates.n_bands(),
            rates.n_users()
        )));
    }
    if k >= rates.n_users() {
        return Err(Error::dimension(format!("user index {k} out of range")));
    }
    Ok((0..rates.n_bands())
        .map(|j| omega.get(j, k) * rates.mu[j][k])
        .sum())
}

/// Number of orthogonal assignment patterns of `n_users` users over `n_bands` bands.
pub fn permutation_count(n_bands: usize, n_users: usize) -> Result<u64> {
    if n_bands == 0 || n_users == 0 {
        return Err(Error::input("band and user counts must be at least 1"));
    }
    let hi = n_bands.max(n_users) as u64;
    let lo = n_bands.abs_diff(n_users) as u64;
    ((lo + 1)..=hi).try_fold(1u64, |acc, f| {
        acc.checked_mul(f)
            .ok_or_else(|| Error::Overflow(format!("{hi}!/{lo}!")))
    })
}
