use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadBalance {
    #[default]
    None,
    Horizontal,
    Vertical,
    Both,
}

impl LoadBalance {
    pub const ALL: [LoadBalance; 4] = [LoadBalance::None, LoadBalance::Horizontal, LoadBalance::Vertical, LoadBalance::Both];

    pub fn name(self) -> &'static str {
        match self {
            LoadBalance::None => "none",
            LoadBalance::Horizontal => "horizontal",
            LoadBalance::Vertical => "vertical",
            LoadBalance::Both => "both",
        }
    }

    pub fn vertical(self) -> bool {
        matches!(self, LoadBalance::Vertical | LoadBalance::Both)
    }

    pub fn horizontal(self) -> bool {
        matches!(self, LoadBalance::Horizontal | LoadBalance::Both)
    }
}

impl std::str::FromStr for LoadBalance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LoadBalance::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::parse(None, format!("unknown load-balance mode `{s}`")))
    }
}

/// Output predication: `Off`, or skip input dot products whose hidden
/// intermediate falls below the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredicationRepr", into = "PredicationRepr")]
pub enum Predication {
    #[default]
    Off,
    Threshold(f64),
}

impl Predication {
    pub fn theta(self) -> f64 {
        match self {
            Predication::Off => f64::NEG_INFINITY,
            Predication::Threshold(t) => t,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PredicationRepr {
    Word(String),
    Value(f64),
}

impl TryFrom<PredicationRepr> for Predication {
    type Error = String;
    fn try_from(r: PredicationRepr) -> std::result::Result<Self, String> {
        match r {
            PredicationRepr::Word(w) if w == "off" => Ok(Predication::Off),
            PredicationRepr::Word(w) => Err(format!("predication must be \"off\" or a number, got `{w}`")),
            PredicationRepr::Value(v) => Ok(Predication::Threshold(v)),
        }
    }
}

impl From<Predication> for PredicationRepr {
    fn from(p: Predication) -> Self {
        match p {
            Predication::Off => PredicationRepr::Word("off".into()),
            Predication::Threshold(v) => PredicationRepr::Value(v),
        }
    }
}

/// On-chip memory sizes. `None` means unbounded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Capacities {
    pub weight_bytes_per_lane: Option<u64>,
    pub mask_bytes_per_lane: Option<u64>,
    pub act_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceleratorConfig {
    pub horiz_lanes: usize,
    pub vert_lanes: usize,
    pub horiz_pes: usize,
    pub queue_depth: usize,
    pub act_banks: usize,
    pub act_word_bits: u32,
    pub weight_word_bits: u32,
    pub load_balance: LoadBalance,
    pub dup_fraction: f64,
    pub predication: Predication,
    pub dram_bytes_per_cycle: f64,
    pub onchip_act_timesteps: usize,
    /// Cycles charged at the start of every matrix-vector phase.
    pub pipeline_fill: u64,
    pub capacities: Capacities,
}

impl Default for AcceleratorConfig {
    fn default() -> Self {
        AcceleratorConfig {
            horiz_lanes: 16,
            vert_lanes: 2,
            horiz_pes: 2,
            queue_depth: 1,
            act_banks: 1,
            act_word_bits: 60,
            weight_word_bits: 10,
            load_balance: LoadBalance::None,
            dup_fraction: 0.10,
            predication: Predication::Off,
            dram_bytes_per_cycle: 25.6,
            onchip_act_timesteps: 333,
            pipeline_fill: 5,
            capacities: Capacities::default(),
        }
    }
}

/// Quantities that follow from a valid config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub total_lanes: usize,
    pub lanes_per_pe: usize,
    pub total_pes: usize,
    /// Words in each PE's activation register file.
    pub act_regfile_words: usize,
    /// Elements the VVAdd unit retires per cycle.
    pub vvadd_width: usize,
}

/// Activation register files are provisioned for 512 entries split across
/// the vertical lanes.
const ACT_REGFILE_ENTRIES: usize = 512;

impl AcceleratorConfig {
    /// One of the named topologies: `(horiz, vert, pes)`.
    pub fn topology(h: usize, v: usize, p: usize) -> Self {
        AcceleratorConfig {
            horiz_lanes: h,
            vert_lanes: v,
            horiz_pes: p,
            ..Default::default()
        }
    }

    /// Pareto-front designs by total lane count.
    pub fn lanes(total: usize) -> Option<Self> {
        let (h, v, p) = match total {
            32 => (16, 2, 2),
            64 => (32, 2, 2),
            128 => (32, 4, 2),
            256 => (32, 8, 2),
            512 => (32, 16, 1),
            1024 => (32, 32, 1),
            _ => return None,
        };
        Some(Self::topology(h, v, p))
    }

    pub fn total_lanes(&self) -> usize {
        self.horiz_lanes * self.vert_lanes
    }

    /// Stable identifier used to order sweep results.
    pub fn id(&self) -> String {
        let pred = match self.predication {
            Predication::Off => "off".to_string(),
            Predication::Threshold(t) => format!("{t}"),
        };
        format!(
            "h{:02}-v{:02}-p{:02}-q{}-b{}-{}-pred{}",
            self.horiz_lanes,
            self.vert_lanes,
            self.horiz_pes,
            self.queue_depth,
            self.act_banks,
            self.load_balance.name(),
            pred
        )
    }

    /// Parses a TOML document whose keys mirror the struct fields; absent
    /// keys keep their defaults. Does not validate.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::toml(src, &e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<Derived> {
        let mut errs = Vec::new();
        let (h, v, p) = (self.horiz_lanes, self.vert_lanes, self.horiz_pes);
        for (name, x) in [("horiz_lanes", h), ("vert_lanes", v)] {
            if x == 0 || x > 32 {
                errs.push(format!("{name} = {x} must be in 1..=32"));
            } else if !x.is_power_of_two() {
                errs.push(format!("{name} = {x} must be a power of two"));
            }
        }
        if p == 0 || (h > 0 && h % p != 0) {
            errs.push(format!("horiz_pes = {p} must divide horiz_lanes = {h}"));
        }
        if self.queue_depth == 0 {
            errs.push("queue_depth must be at least 1".into());
        }
        if self.act_banks == 0 {
            errs.push("act_banks must be at least 1".into());
        }
        if self.weight_word_bits == 0 || self.act_word_bits < self.weight_word_bits {
            errs.push(format!(
                "act_word_bits = {} must hold at least one {}-bit value",
                self.act_word_bits, self.weight_word_bits
            ));
        }
        if !(0.0..=1.0).contains(&self.dup_fraction) {
            errs.push(format!("dup_fraction = {} must be in [0, 1]", self.dup_fraction));
        }
        if let Predication::Threshold(t) = self.predication {
            if t.is_nan() || t > 0.0 {
                errs.push(format!("predication threshold = {t} must be <= 0"));
            }
        }
        if !(self.dram_bytes_per_cycle > 0.0 && self.dram_bytes_per_cycle.is_finite()) {
            errs.push(format!("dram_bytes_per_cycle = {} must be positive", self.dram_bytes_per_cycle));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Derived {
            total_lanes: h * v,
            lanes_per_pe: h / p,
            total_pes: p * v,
            act_regfile_words: ACT_REGFILE_ENTRIES.div_ceil(v),
            vvadd_width: (self.act_word_bits / self.weight_word_bits) as usize * self.act_banks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_topologies_validate() {
        for n in [32, 64, 128, 256, 512, 1024] {
            let c = AcceleratorConfig::lanes(n).unwrap();
            assert_eq!(c.validate().unwrap().total_lanes, n);
        }
    }

    #[test]
    fn regfile_words_follow_vertical_lanes() {
        let d = AcceleratorConfig::topology(32, 32, 1).validate().unwrap();
        assert_eq!(d.act_regfile_words, 16);
        let d = AcceleratorConfig::topology(32, 8, 2).validate().unwrap();
        assert_eq!(d.act_regfile_words, 64);
    }

    #[test]
    fn violations_are_listed_individually() {
        let mut c = AcceleratorConfig::topology(64, 1, 3);
        c.queue_depth = 0;
        match c.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_roundtrip_and_line_numbers() {
        let mut c = AcceleratorConfig::lanes(256).unwrap();
        c.load_balance = LoadBalance::Vertical;
        c.predication = Predication::Threshold(-0.5);
        assert_eq!(AcceleratorConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        match AcceleratorConfig::from_toml_str("queue_depth = 2\nact_bankz = 4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn predication_toml_forms() {
        let c: AcceleratorConfig = toml::from_str("predication = \"off\"").unwrap();
        assert_eq!(c.predication, Predication::Off);
        let c: AcceleratorConfig = toml::from_str("predication = -0.25").unwrap();
        assert_eq!(c.predication, Predication::Threshold(-0.25));
        assert!(toml::from_str::<AcceleratorConfig>("predication = \"on\"").is_err());
    }
}
