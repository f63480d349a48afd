use std::path::Path;

use super::PolicyError;
use crate::kv::KvDoc;

/// Tunables shared by the policies, loadable from a `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    /// ACP step size and backlog floor, packets.
    pub kappa: f64,
    /// Shortest ACP epoch, milliseconds.
    pub epoch_ms: f64,
    /// Smoothing factor for the RTT and inter-ACK averages.
    pub ewma_alpha: f64,
    pub gamma: f64,
    pub lr: f64,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    /// Number of age bins for the Q table.
    pub bins: usize,
    /// Upper bound on the ACP backlog target, packets.
    pub backlog_cap: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            epoch_ms: 10.0,
            ewma_alpha: 0.125,
            gamma: 0.99,
            lr: 0.1,
            epsilon0: 1.0,
            epsilon_decay: 0.995,
            bins: 64,
            backlog_cap: 64.0,
        }
    }
}

impl PolicyConfig {
    /// Starts from the defaults and overrides every key present in `doc`.
    pub fn from_kv(doc: &KvDoc) -> Result<Self, PolicyError> {
        let mut cfg = Self::default();
        for (key, value) in doc.entries() {
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| PolicyError::Config(format!("{key}: not a number: `{value}`")))
            };
            match key.as_str() {
                "kappa" => cfg.kappa = num()?,
                "epoch_ms" => cfg.epoch_ms = num()?,
                "ewma_alpha" => cfg.ewma_alpha = num()?,
                "gamma" => cfg.gamma = num()?,
                "lr" => cfg.lr = num()?,
                "epsilon0" => cfg.epsilon0 = num()?,
                "epsilon_decay" => cfg.epsilon_decay = num()?,
                "bins" => {
                    cfg.bins = value
                        .parse()
                        .map_err(|_| PolicyError::Config(format!("bins: not a count: `{value}`")))?
                }
                "backlog_cap" => cfg.backlog_cap = num()?,
                other => return Err(PolicyError::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        Self::from_kv(&KvDoc::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push("kappa", self.kappa)
            .push("epoch_ms", self.epoch_ms)
            .push("ewma_alpha", self.ewma_alpha)
            .push("gamma", self.gamma)
            .push("lr", self.lr)
            .push("epsilon0", self.epsilon0)
            .push("epsilon_decay", self.epsilon_decay)
            .push("bins", self.bins)
            .push("backlog_cap", self.backlog_cap);
        doc
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let fail = |msg: String| Err(PolicyError::Config(msg));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.backlog_cap >= self.kappa && self.backlog_cap.is_finite()) {
            return fail(format!(
                "backlog_cap must be at least kappa, got {}",
                self.backlog_cap
            ));
        }
        if !(self.epoch_ms > 0.0 && self.epoch_ms.is_finite()) {
            return fail(format!("epoch_ms must be positive, got {}", self.epoch_ms));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return fail(format!(
                "ewma_alpha must be in (0, 1], got {}",
                self.ewma_alpha
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return fail(format!("lr must be in (0, 1], got {}", self.lr));
        }
        if !unit(self.epsilon0) || !unit(self.epsilon_decay) {
            return fail("epsilon0 and epsilon_decay must be in [0, 1]".into());
        }
        if self.bins < 2 {
            return fail(format!("need at least 2 bins, got {}", self.bins));
        }
        Ok(())
    }
}
