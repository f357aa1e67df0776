use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::frontend::{
    apply_frontend, parse_pattern, pattern_string, FrontendSpec, MultivariatePolynomial, Scenario,
};

/// A one-shot code: constellation points whose noiseless channel outputs
/// fall into distinct quantization regions, and the map from ADC patterns
/// back to messages.
///
/// Messages are numbered from 0 in the API and from 1 in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCode {
    constellation: Vec<Vec<f64>>,
    frontend: FrontendSpec,
    pattern_map: BTreeMap<Vec<bool>, usize>,
    patterns: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct RegionCodeDoc {
    constellation: Vec<Vec<f64>>,
    frontend: FrontendSpec,
    pattern_map: BTreeMap<String, usize>,
}

impl RegionCode {
    pub fn new(
        constellation: Vec<Vec<f64>>,
        frontend: FrontendSpec,
        pattern_map: BTreeMap<Vec<bool>, usize>,
    ) -> Result<Self> {
        let m = constellation.len();
        if m == 0 || pattern_map.is_empty() {
            return Err(Error::InvalidCode("a code needs at least one message".into()));
        }
        let dim = constellation[0].len();
        if constellation.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidCode("constellation points must be finite and of equal length".into()));
        }
        if pattern_map.len() != m {
            return Err(Error::InvalidCode(format!("{m} messages but {} patterns", pattern_map.len())));
        }
        let mut patterns: Vec<Option<Vec<bool>>> = vec![None; m];
        for (bits, &msg) in &pattern_map {
            if bits.len() != frontend.n_q() {
                return Err(Error::InvalidCode(format!("pattern {} has the wrong length", pattern_string(bits))));
            }
            match patterns.get_mut(msg) {
                Some(slot @ None) => *slot = Some(bits.clone()),
                Some(Some(_)) => return Err(Error::InvalidCode(format!("message {} has two patterns", msg + 1))),
                None => return Err(Error::InvalidCode(format!("message index {} out of range", msg + 1))),
            }
        }
        let patterns = patterns.into_iter().map(|p| p.expect("bijection checked")).collect();
        Ok(Self { constellation, frontend, pattern_map, patterns })
    }

    /// Code whose patterns are read off the noiseless outputs `h x_m`.
    pub fn from_noiseless(
        constellation: Vec<Vec<f64>>,
        frontend: FrontendSpec,
        channel: Option<&ChannelModel>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, x) in constellation.iter().enumerate() {
            let y = match channel {
                Some(ch) => ch.transmit(x)?,
                None => x.clone(),
            };
            let bits = apply_frontend(&frontend, &y)?;
            if let Some(prev) = map.insert(bits.clone(), m) {
                return Err(Error::InvalidCode(format!(
                    "messages {} and {} share pattern {}",
                    prev + 1,
                    m + 1,
                    pattern_string(&bits)
                )));
            }
        }
        Self::new(constellation, frontend, map)
    }

    /// Two threshold comparators `Y ≷ 0`, `Y ≷ 1` and amplitudes
    /// `−0.5, 0.5, 1.5`: three messages.
    pub fn figure1a() -> Self {
        let y = MultivariatePolynomial::variable(1, 0);
        let fe = FrontendSpec::new(Scenario::II, vec![y.clone(), y], vec![0.0, 1.0], None).expect("valid");
        Self::from_noiseless(vec![vec![-0.5], vec![0.5], vec![1.5]], fe, None).expect("separable")
    }

    /// Comparators `Y ≷ 0`, `Y² ≷ 1` and amplitudes `−1.5, −0.5, 0.5, 1.5`:
    /// four messages.
    pub fn figure1b() -> Self {
        let fe = FrontendSpec::new(
            Scenario::V,
            vec![MultivariatePolynomial::variable(1, 0), MultivariatePolynomial::squared_norm(1)],
            vec![0.0, 1.0],
            None,
        )
        .expect("valid");
        Self::from_noiseless(vec![vec![-1.5], vec![-0.5], vec![0.5], vec![1.5]], fe, None).expect("separable")
    }

    pub fn message_count(&self) -> usize {
        self.constellation.len()
    }

    pub fn n_q(&self) -> usize {
        self.frontend.n_q()
    }

    /// Length of a constellation point.
    pub fn dim(&self) -> usize {
        self.constellation[0].len()
    }

    pub fn constellation(&self) -> &[Vec<f64>] {
        &self.constellation
    }

    pub fn frontend(&self) -> &FrontendSpec {
        &self.frontend
    }

    pub fn pattern_map(&self) -> &BTreeMap<Vec<bool>, usize> {
        &self.pattern_map
    }

    pub fn pattern(&self, message: usize) -> &[bool] {
        &self.patterns[message]
    }

    pub fn decode_exact(&self, bits: &[bool]) -> Option<usize> {
        self.pattern_map.get(bits).copied()
    }

    /// Message whose pattern is nearest in Hamming distance; ties go to the
    /// smallest message index.
    pub fn decode(&self, bits: &[bool]) -> usize {
        if let Some(m) = self.decode_exact(bits) {
            return m;
        }
        let mut best = (usize::MAX, 0);
        for (m, p) in self.patterns.iter().enumerate() {
            let d = p.iter().zip(bits).filter(|(a, b)| a != b).count();
            if d < best.0 {
                best = (d, m);
            }
        }
        best.1
    }

    /// Decoded message for every pattern index (ADC 1 most significant).
    pub fn decoder_table(&self) -> Vec<usize> {
        let n = self.n_q();
        (0..1u32 << n).map(|i| self.decode(&crate::frontend::pattern_bits(i, n))).collect()
    }

    /// `(1/n_t) E‖X‖²` under uniform messages.
    pub fn average_power(&self) -> f64 {
        let total: f64 = self.constellation.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum();
        total / (self.message_count() * self.dim()) as f64
    }

    /// Points multiplied by `s > 0`, with the front-end rescaled so every
    /// point keeps its pattern.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constellation: self.constellation.iter().map(|x| x.iter().map(|v| v * s).collect()).collect(),
            frontend: self.frontend.scaled(s),
            pattern_map: self.pattern_map.clone(),
            patterns: self.patterns.clone(),
        }
    }

    /// The code rescaled to unit average power.
    pub fn normalized(&self) -> Self {
        let p = self.average_power();
        if p > 0.0 {
            self.scaled(1.0 / p.sqrt())
        } else {
            self.clone()
        }
    }

    /// The code at average power `power`.
    pub fn at_power(&self, power: f64) -> Self {
        self.normalized().scaled(power.sqrt())
    }

    /// Checks that every message decodes to itself without noise.
    pub fn round_trip(&self, channel: Option<&ChannelModel>) -> Result<()> {
        for (m, x) in self.constellation.iter().enumerate() {
            let y = match channel {
                Some(ch) => ch.transmit(x)?,
                None => x.clone(),
            };
            let bits = apply_frontend(&self.frontend, &y)?;
            match self.decode_exact(&bits) {
                Some(d) if d == m => {}
                other => {
                    return Err(Error::InvalidCode(format!(
                        "message {} produced pattern {} decoding to {:?}",
                        m + 1,
                        pattern_string(&bits),
                        other.map(|d| d + 1)
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = RegionCodeDoc {
            constellation: self.constellation.clone(),
            frontend: self.frontend.clone(),
            pattern_map: self.pattern_map.iter().map(|(k, v)| (pattern_string(k), v + 1)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RegionCodeDoc = serde_json::from_str(text)?;
        let mut map = BTreeMap::new();
        for (k, v) in doc.pattern_map {
            if v == 0 {
                return Err(Error::InvalidCode("messages are numbered from 1".into()));
            }
            map.insert(parse_pattern(&k)?, v - 1);
        }
        Self::new(doc.constellation, doc.frontend, map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
