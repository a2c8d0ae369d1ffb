//! On-disk scenario format (TOML).
//!
//! ```toml
//! mode = "abstract"            # or "physical"
//!
//! [slot]
//! T = 1.0                      # slot duration, s
//! tau = 0.1                    # sensing time, s
//! b = 100.0                    # packet size, bits
//!
//! [[bands]]
//! bandwidth_W = 1.0e6
//! arrival_rate_lambda_p = 0.75 # required for physical bands
//! out_complement_p = 1.0       # abstract: primary link success probability
//! availability_pi = 0.25       # abstract: band idle probability
//! # gamma_p = ..., sigma2_p = ...   physical: mean SNR and mean channel gain
//!
//! [[users]]
//! arrival_rate_lambda_s = 0.1
//! out_complement_row = [0.7, 0.8]  # abstract: success probability per band
//! # gamma_s = ..., sigma2_s = ...     physical
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    InputMode, PrimaryBand, PrimaryLink, Scenario, SecondaryLink, SecondaryUser, SlotConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSection {
    #[serde(rename = "T")]
    pub t: f64,
    pub tau: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    #[serde(rename = "bandwidth_W")]
    pub bandwidth_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival_rate_lambda_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_complement_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub availability_pi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub arrival_rate_lambda_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_complement_row: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub mode: InputMode,
    pub slot: SlotSection,
    pub bands: Vec<BandSection>,
    pub users: Vec<UserSection>,
}

fn require(value: Option<f64>, what: &str) -> Result<f64> {
    value.ok_or_else(|| Error::config(format!("{what} is required")))
}

fn forbid<T>(value: &Option<T>, what: &str, mode: &str) -> Result<()> {
    if value.is_some() {
        return Err(Error::config(format!("{what} is not used in {mode} mode")));
    }
    Ok(())
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Canonical TOML emission.
    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// SHA-256 of the canonical emission, hex encoded.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.emit()?.as_bytes())))
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let slot = SlotConfig::new(self.slot.t, self.slot.tau, self.slot.b)?;
        let mut bands = Vec::with_capacity(self.bands.len());
        for (j, b) in self.bands.iter().enumerate() {
            let tag = format!("bands[{}]", j + 1);
            let link = match self.mode {
                InputMode::Physical => {
                    forbid(&b.out_complement_p, &format!("{tag}.out_complement_p"), "physical")?;
                    forbid(&b.availability_pi, &format!("{tag}.availability_pi"), "physical")?;
                    PrimaryLink::Physical {
                        snr: require(b.gamma_p, &format!("{tag}.gamma_p"))?,
                        gain: require(b.sigma2_p, &format!("{tag}.sigma2_p"))?,
                    }
                }
                InputMode::Abstract => {
                    forbid(&b.gamma_p, &format!("{tag}.gamma_p"), "abstract")?;
                    forbid(&b.sigma2_p, &format!("{tag}.sigma2_p"), "abstract")?;
                    PrimaryLink::Abstract {
                        out_complement: require(b.out_complement_p, &format!("{tag}.out_complement_p"))?,
                        availability: require(b.availability_pi, &format!("{tag}.availability_pi"))?,
                    }
                }
            };
            bands.push(PrimaryBand {
                bandwidth: b.bandwidth_w,
                arrival_rate: b.arrival_rate_lambda_p,
                link,
            });
        }
        let mut users = Vec::with_capacity(self.users.len());
        for (k, u) in self.users.iter().enumerate() {
            let tag = format!("users[{}]", k + 1);
            let link = match self.mode {
                InputMode::Physical => {
                    forbid(&u.out_complement_row, &format!("{tag}.out_complement_row"), "physical")?;
                    SecondaryLink::Physical {
                        snr: require(u.gamma_s, &format!("{tag}.gamma_s"))?,
                        gain: require(u.sigma2_s, &format!("{tag}.sigma2_s"))?,
                    }
                }
                InputMode::Abstract => {
                    forbid(&u.gamma_s, &format!("{tag}.gamma_s"), "abstract")?;
                    forbid(&u.sigma2_s, &format!("{tag}.sigma2_s"), "abstract")?;
                    SecondaryLink::Abstract {
                        out_complement: u
                            .out_complement_row
                            .clone()
                            .ok_or_else(|| Error::config(format!("{tag}.out_complement_row is required")))?,
                    }
                }
            };
            users.push(SecondaryUser {
                arrival_rate: u.arrival_rate_lambda_s,
                link,
            });
        }
        let scenario = Scenario { slot, bands, users };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let mode = scenario.mode()?;
        let bands = scenario
            .bands
            .iter()
            .map(|b| {
                let mut s = BandSection {
                    bandwidth_w: b.bandwidth,
                    arrival_rate_lambda_p: b.arrival_rate,
                    gamma_p: None,
                    sigma2_p: None,
                    out_complement_p: None,
                    availability_pi: None,
                };
                match b.link {
                    PrimaryLink::Physical { snr, gain } => {
                        s.gamma_p = Some(snr);
                        s.sigma2_p = Some(gain);
                    }
                    PrimaryLink::Abstract {
                        out_complement,
                        availability,
                    } => {
                        s.out_complement_p = Some(out_complement);
                        s.availability_pi = Some(availability);
                    }
                }
                s
            })
            .collect();
        let users = scenario
            .users
            .iter()
            .map(|u| {
                let mut s = UserSection {
                    arrival_rate_lambda_s: u.arrival_rate,
                    gamma_s: None,
                    sigma2_s: None,
                    out_complement_row: None,
                };
                match &u.link {
                    SecondaryLink::Physical { snr, gain } => {
                        s.gamma_s = Some(*snr);
                        s.sigma2_s = Some(*gain);
                    }
                    SecondaryLink::Abstract { out_complement } => {
                        s.out_complement_row = Some(out_complement.clone());
                    }
                }
                s
            })
            .collect();
        Ok(ScenarioDocument {
            mode,
            slot: SlotSection {
                t: scenario.slot.duration,
                tau: scenario.slot.sensing,
                b: scenario.slot.packet_bits,
            },
            bands,
            users,
        })
    }
}
