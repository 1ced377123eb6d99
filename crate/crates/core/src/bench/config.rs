use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output reference signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// `r_i(t) = A sin(2π f t - 0.9 (2 i / (n_y - 1)) π)` for zero-based
    /// channel `i`; a single channel uses zero phase.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// The same constant on every channel.
    Constant { value: f64 },
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::Sinusoid {
            amplitude: 1.2,
            frequency: 1.0 / 30.0,
        }
    }
}

impl ReferenceSpec {
    pub fn value(&self, channel: usize, n_outputs: usize, t: f64) -> f64 {
        match *self {
            ReferenceSpec::Sinusoid {
                amplitude,
                frequency,
            } => {
                let phase = if n_outputs > 1 {
                    0.9 * (2.0 * channel as f64 / (n_outputs - 1) as f64) * std::f64::consts::PI
                } else {
                    0.0
                };
                amplitude * (2.0 * std::f64::consts::PI * frequency * t - phase).sin()
            }
            ReferenceSpec::Constant { value } => value,
        }
    }
}

/// Solver used to cross-check closed-loop QP solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckSolver {
    GoldfarbIdnani,
    Enumeration,
}

/// Closed-loop benchmark configuration. Defaults reproduce the six-mass
/// experiment: `N = 27`, `T_s = 4 ms`, `Q = 210 I`, `R = 0.008 I`, `P = 45 Q`,
/// `|Δu| <= 0.5`, `|u| <= 1`, `|y| <= 1e6`, 17500 steps, no iteration cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub masses: usize,
    pub horizon: usize,
    pub ts: f64,
    pub steps: usize,
    pub q_weight: f64,
    pub r_weight: f64,
    pub terminal_factor: f64,
    pub du_limit: f64,
    pub u_limit: f64,
    pub y_limit: f64,
    pub seed: u64,
    /// Initial positions are drawn uniformly from `[-spread, spread]`.
    pub initial_spread: f64,
    pub reference: ReferenceSpec,
    /// Sample the reference over the whole horizon; when false the current
    /// value is held across the horizon.
    pub preview: bool,
    pub eps_q: f64,
    /// Iteration cap per solve; absent means unbounded.
    pub max_iter: Option<usize>,
    pub check_solver: Option<CheckSolver>,
    /// Number of randomly chosen steps to cross-check; absent means all.
    pub check_samples: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            masses: 6,
            horizon: 27,
            ts: 0.004,
            steps: 17_500,
            q_weight: 210.0,
            r_weight: 0.008,
            terminal_factor: 45.0,
            du_limit: 0.5,
            u_limit: 1.0,
            y_limit: 1e6,
            seed: 0,
            initial_spread: 1.2,
            reference: ReferenceSpec::default(),
            preview: true,
            eps_q: crate::qp::DEFAULT_EPS_Q,
            max_iter: None,
            check_solver: None,
            check_samples: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
    }
}

impl BenchConfig {
    /// Two masses, `N = 8`, 1500 steps; otherwise the defaults.
    pub fn down_scaled() -> Self {
        BenchConfig {
            masses: 2,
            horizon: 8,
            steps: 1500,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses == 0 {
            return Err(Error::InvalidConfig("masses must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        positive("ts", self.ts)?;
        positive("q_weight", self.q_weight)?;
        positive("r_weight", self.r_weight)?;
        positive("du_limit", self.du_limit)?;
        positive("u_limit", self.u_limit)?;
        positive("y_limit", self.y_limit)?;
        positive("eps_q", self.eps_q)?;
        if !(self.terminal_factor > 1.0 && self.terminal_factor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "terminal_factor must exceed 1 so that P - Q is positive definite, got {}",
                self.terminal_factor
            )));
        }
        if !(self.initial_spread >= 0.0 && self.initial_spread.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial_spread must be nonnegative and finite, got {}",
                self.initial_spread
            )));
        }
        let finite_ref = match self.reference {
            ReferenceSpec::Sinusoid {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
            ReferenceSpec::Constant { value } => value.is_finite(),
        };
        if !finite_ref {
            return Err(Error::InvalidConfig("reference parameters must be finite".into()));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses and validates a TOML document. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// `key=value` pairs describing the run, in a fixed order.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("masses", self.masses.to_string()),
            ("horizon", self.horizon.to_string()),
            ("ts", self.ts.to_string()),
            ("steps", self.steps.to_string()),
            ("q_weight", self.q_weight.to_string()),
            ("r_weight", self.r_weight.to_string()),
            ("terminal_factor", self.terminal_factor.to_string()),
            ("du_limit", self.du_limit.to_string()),
            ("u_limit", self.u_limit.to_string()),
            ("y_limit", self.y_limit.to_string()),
            ("seed", self.seed.to_string()),
            ("initial_spread", self.initial_spread.to_string()),
        ];
        match self.reference {
            ReferenceSpec::Sinusoid {
                amplitude,
                frequency,
            } => {
                out.push(("reference", "sinusoid".into()));
                out.push(("reference_amplitude", amplitude.to_string()));
                out.push(("reference_frequency", frequency.to_string()));
            }
            ReferenceSpec::Constant { value } => {
                out.push(("reference", "constant".into()));
                out.push(("reference_value", value.to_string()));
            }
        }
        out.push(("preview", self.preview.to_string()));
        out.push(("eps_q", format!("{:e}", self.eps_q)));
        out.push((
            "max_iter",
            self.max_iter.map_or("unbounded".into(), |m| m.to_string()),
        ));
        out
    }
}

/// One-based line and column of a byte offset.
pub(crate) fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    (line, column)
}
