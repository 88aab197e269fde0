use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear function of array size in bits. Points are `(x, y)`
/// with strictly increasing `x`; beyond the last point the final segment's
/// slope continues, below the first the first value holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Curve {
    points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("curve needs at least one point"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite() || *y < 0.0) {
            return Err(Error::param("curve points must be finite and non-negative"));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::param(format!("curve x values must increase: {} then {}", w[0].0, w[1].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::param(format!("curve must be non-decreasing: {} then {}", w[0].1, w[1].1)));
            }
        }
        Ok(Curve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 || p.len() == 1 {
            return p[0].1;
        }
        let i = p.partition_point(|(px, _)| *px < x).min(p.len() - 1);
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for Curve {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Curve::new(points)
    }
}

impl From<Curve> for Vec<(f64, f64)> {
    fn from(c: Curve) -> Self {
        c.points
    }
}

/// Abstract per-event and per-bit costs. The defaults are synthetic: one
/// area unit is roughly one bit of a large SRAM array, one energy unit
/// roughly one 10-bit MAC. Only ratios between designs are meaningful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitCosts {
    /// Energy per bit read from an array of the given size.
    pub sram_read_energy: Curve,
    /// Fixed cost of every SRAM access (decode, sense enable), whatever its
    /// width.
    pub sram_access_energy: f64,
    /// Total area of one array of the given size, periphery included.
    pub sram_area: Curve,
    /// One register-file or queue access.
    pub regfile_access_energy: f64,
    pub mac_energy: f64,
    /// One 32-bit add, e.g. merging a popped partial sum.
    pub add_energy: f64,
    /// One VVAdd element (adds, activation and requantization).
    pub vvadd_energy: f64,
    pub register_bit_area: f64,
    /// Clocking energy of one register bit per cycle, paid whether or not
    /// the register changes.
    pub register_bit_energy_per_cycle: f64,
    pub dram_energy_per_byte: f64,
    /// Per SRAM bit per cycle.
    pub leakage_per_bit_per_cycle: f64,
    /// Datapath of one lane or PE: multiplier, popcount, LNZD, control.
    pub lane_logic_area: f64,
    /// One adder of the VVAdd unit.
    pub adder_area: f64,
}

impl Default for UnitCosts {
    fn default() -> Self {
        let k = 1024.0;
        UnitCosts {
            // Flat below 32 Kib: small arrays stop getting cheaper per read.
            sram_read_energy: Curve::new(vec![
                (0.0, 0.010),
                (32.0 * k, 0.010),
                (64.0 * k, 0.014),
                (256.0 * k, 0.024),
                (1024.0 * k, 0.048),
                (4096.0 * k, 0.110),
            ])
            .unwrap(),
            // A fixed periphery plus cells that get denser with size.
            sram_area: Curve::new(vec![
                (0.0, 2048.0),
                (4.0 * k, 2048.0 + 4.0 * k * 1.25),
                (16.0 * k, 2048.0 + 16.0 * k * 1.125),
                (64.0 * k, 2048.0 + 64.0 * k * 1.06),
                (256.0 * k, 2048.0 + 256.0 * k * 1.02),
                (1024.0 * k, 2048.0 + 1024.0 * k),
            ])
            .unwrap(),
            sram_access_energy: 0.5,
            regfile_access_energy: 0.05,
            mac_energy: 1.0,
            add_energy: 0.125,
            vvadd_energy: 2.0,
            register_bit_area: 4.0,
            register_bit_energy_per_cycle: 0.0005,
            dram_energy_per_byte: 15.0,
            leakage_per_bit_per_cycle: 2e-7,
            lane_logic_area: 1500.0,
            adder_area: 300.0,
        }
    }
}

impl UnitCosts {
    /// Reads overrides from TOML; absent keys keep their defaults.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let c: UnitCosts = toml::from_str(src).map_err(|e| Error::toml(src, &e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("unit costs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("regfile_access_energy", self.regfile_access_energy),
            ("sram_access_energy", self.sram_access_energy),
            ("mac_energy", self.mac_energy),
            ("add_energy", self.add_energy),
            ("vvadd_energy", self.vvadd_energy),
            ("register_bit_area", self.register_bit_area),
            ("register_bit_energy_per_cycle", self.register_bit_energy_per_cycle),
            ("dram_energy_per_byte", self.dram_energy_per_byte),
            ("leakage_per_bit_per_cycle", self.leakage_per_bit_per_cycle),
            ("lane_logic_area", self.lane_logic_area),
            ("adder_area", self.adder_area),
        ];
        let bad: Vec<String> = scalars
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v >= 0.0))
            .map(|(n, v)| format!("{n} = {v} must be finite and >= 0"))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Energy of one `width`-bit read from an array of `size` bits.
    pub fn sram_read(&self, size: u64, width: u64) -> f64 {
        self.sram_access_energy + width as f64 * self.sram_read_energy.eval(size as f64)
    }

    /// Area of `count` identical arrays of `size` bits; zero when either is.
    pub fn sram_arrays(&self, count: usize, size: u64) -> f64 {
        if count == 0 || size == 0 {
            0.0
        } else {
            count as f64 * self.sram_area.eval(size as f64)
        }
    }
}
