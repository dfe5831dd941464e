//! Latency profiles: where the time between the end of a question and the
//! first reply audio goes.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::TurnsimError;

/// Which ASR event the answer pipeline waits for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AsrCommit {
    /// Final recognition.
    #[default]
    Final,
    /// The point after which hypotheses rarely change.
    Stable,
    /// Final recognition on a slower vendor.
    SlowFinal,
}

/// Multiplicative noise on the ASR and LLM terms. The TTS term is drawn
/// uniformly from its range when jitter is on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Jitter {
    #[default]
    None,
    /// Log-normal multiplier with median 1.
    Lognormal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyProfile {
    pub name: String,
    #[serde(default = "d_first_hyp")]
    pub asr_first_hyp_ms: f64,
    #[serde(default = "d_stable")]
    pub asr_stable_ms: f64,
    #[serde(default = "d_final")]
    pub asr_final_ms: f64,
    #[serde(default = "d_slow_final")]
    pub asr_slow_final_ms: f64,
    #[serde(default)]
    pub asr_commit: AsrCommit,
    #[serde(default)]
    pub llm_initial_ms: f64,
    pub llm_per_token_ms: f64,
    #[serde(default)]
    pub llm_worst_case_ms: Option<f64>,
    #[serde(default = "d_tts")]
    pub tts_first_audio_ms: [f64; 2],
    #[serde(default = "d_rate")]
    pub speaking_rate_syll_per_s: f64,
    #[serde(default)]
    pub jitter: Jitter,
    #[serde(default)]
    pub seed: u64,
}

fn d_first_hyp() -> f64 {
    150.0
}
fn d_stable() -> f64 {
    500.0
}
fn d_final() -> f64 {
    650.0
}
fn d_slow_final() -> f64 {
    2000.0
}
fn d_tts() -> [f64; 2] {
    [80.0, 100.0]
}
fn d_rate() -> f64 {
    4.0
}

pub const BUILTIN_PROFILES: [&str; 3] = ["paper-groq", "paper-slow", "paper-azure-asr"];

impl LatencyProfile {
    fn base(name: &str, per_token: f64, cap: f64) -> Self {
        Self {
            name: name.into(),
            asr_first_hyp_ms: d_first_hyp(),
            asr_stable_ms: d_stable(),
            asr_final_ms: d_final(),
            asr_slow_final_ms: d_slow_final(),
            asr_commit: AsrCommit::Final,
            llm_initial_ms: 0.0,
            llm_per_token_ms: per_token,
            llm_worst_case_ms: Some(cap),
            tts_first_audio_ms: d_tts(),
            speaking_rate_syll_per_s: d_rate(),
            jitter: Jitter::None,
            seed: 0,
        }
    }

    /// Fast ASR final, 240 tokens/s LLM capped at 250 ms.
    pub fn paper_groq() -> Self {
        Self::base("paper-groq", 1000.0 / 240.0, 250.0)
    }

    /// Fast ASR final, 94 ms/token LLM capped at 650 ms.
    pub fn paper_slow() -> Self {
        Self::base("paper-slow", 94.0, 650.0)
    }

    /// As `paper-groq`, but committing at the stable-hypothesis point.
    pub fn paper_azure_asr() -> Self {
        Self {
            asr_commit: AsrCommit::Stable,
            ..Self::base("paper-azure-asr", 1000.0 / 240.0, 250.0)
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-groq" => Some(Self::paper_groq()),
            "paper-slow" => Some(Self::paper_slow()),
            "paper-azure-asr" => Some(Self::paper_azure_asr()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, TurnsimError> {
        let profile: Self =
            toml::from_str(text).map_err(|e| TurnsimError::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, TurnsimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TurnsimError::InvalidProfile(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            TurnsimError::InvalidProfile(m) => {
                TurnsimError::InvalidProfile(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    /// A built-in name, or else a path to a TOML profile.
    pub fn resolve(name_or_path: &str) -> Result<Self, TurnsimError> {
        match Self::builtin(name_or_path) {
            Some(p) => Ok(p),
            None => Self::load(Path::new(name_or_path)),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<(), TurnsimError> {
        let durations = [
            ("asr_first_hyp_ms", self.asr_first_hyp_ms),
            ("asr_stable_ms", self.asr_stable_ms),
            ("asr_final_ms", self.asr_final_ms),
            ("asr_slow_final_ms", self.asr_slow_final_ms),
            ("llm_initial_ms", self.llm_initial_ms),
            ("llm_per_token_ms", self.llm_per_token_ms),
            ("llm_worst_case_ms", self.llm_worst_case_ms.unwrap_or(0.0)),
            ("tts_first_audio_ms[0]", self.tts_first_audio_ms[0]),
            ("tts_first_audio_ms[1]", self.tts_first_audio_ms[1]),
        ];
        for (field, v) in durations {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TurnsimError::InvalidProfile(format!(
                    "{field} must be a finite duration ≥ 0, got {v}"
                )));
            }
        }
        if self.tts_first_audio_ms[0] > self.tts_first_audio_ms[1] {
            return Err(TurnsimError::InvalidProfile(
                "tts_first_audio_ms range is reversed".into(),
            ));
        }
        if !(self.speaking_rate_syll_per_s.is_finite() && self.speaking_rate_syll_per_s > 0.0) {
            return Err(TurnsimError::InvalidProfile(
                "speaking_rate_syll_per_s must be positive".into(),
            ));
        }
        if let Jitter::Lognormal { sigma } = self.jitter {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(TurnsimError::InvalidProfile(format!(
                    "jitter sigma must be ≥ 0, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    pub fn asr_commit_ms(&self) -> f64 {
        match self.asr_commit {
            AsrCommit::Final => self.asr_final_ms,
            AsrCommit::Stable => self.asr_stable_ms,
            AsrCommit::SlowFinal => self.asr_slow_final_ms,
        }
    }

    /// Time from prompt to the last generated token, capped by the
    /// worst-case figure when the profile declares one.
    pub fn llm_time_ms(&self, response_tokens: u32) -> f64 {
        let t = self.llm_initial_ms + response_tokens as f64 * self.llm_per_token_ms;
        match self.llm_worst_case_ms {
            Some(cap) => t.min(cap),
            None => t,
        }
    }

    /// Upper end of the TTS range; used when jitter is off.
    pub fn tts_ms(&self) -> f64 {
        self.tts_first_audio_ms[1]
    }

    /// ASR commit + LLM + TTS, without jitter.
    pub fn serial_gap_ms(&self, response_tokens: u32) -> f64 {
        self.asr_commit_ms() + self.llm_time_ms(response_tokens) + self.tts_ms()
    }

    /// The serial gap with one jitter draw applied.
    pub(crate) fn sample_serial_gap_ms(&self, response_tokens: u32, rng: &mut ChaCha8Rng) -> f64 {
        match self.jitter {
            Jitter::None => self.serial_gap_ms(response_tokens),
            Jitter::Lognormal { sigma } => {
                let noise = LogNormal::new(0.0, sigma).expect("sigma validated");
                let [lo, hi] = self.tts_first_audio_ms;
                let tts = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                };
                self.asr_commit_ms() * noise.sample(rng)
                    + self.llm_time_ms(response_tokens) * noise.sample(rng)
                    + tts
            }
        }
    }
}
