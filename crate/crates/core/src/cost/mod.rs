//! Abstract area, energy and power accounting for the accelerator and for
//! CSR-based baselines.

mod csr;
mod masr;
mod units;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csr::{cost_csr_baseline, CsrBaseline, CsrVariant};
pub use masr::{cost_masr, masr_footprint, MasrFootprint};
pub use units::{Curve, UnitCosts};

/// One value per resource category. Area never has a DRAM share.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub weight_sram: f64,
    pub mask_sram: f64,
    pub act_sram: f64,
    pub row_offset_sram: f64,
    pub registers: f64,
    pub logic: f64,
    pub dram: f64,
}

impl Breakdown {
    pub const CATEGORIES: [&'static str; 7] =
        ["weight_sram", "mask_sram", "act_sram", "row_offset_sram", "registers", "logic", "dram"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.weight_sram,
            self.mask_sram,
            self.act_sram,
            self.row_offset_sram,
            self.registers,
            self.logic,
            self.dram,
        ]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::CATEGORIES.into_iter().zip(self.values())
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    fn scale(&self, k: f64) -> Self {
        let v = self.values().map(|x| x * k);
        Breakdown {
            weight_sram: v[0],
            mask_sram: v[1],
            act_sram: v[2],
            row_offset_sram: v[3],
            registers: v[4],
            logic: v[5],
            dram: v[6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCost {
    pub name: String,
    pub cycles: u64,
    pub area: Breakdown,
    pub energy: Breakdown,
    /// Part of `energy` paid per cycle regardless of activity: SRAM leakage
    /// and register clocking.
    pub static_energy: f64,
}

impl DesignCost {
    pub fn total_area(&self) -> f64 {
        self.area.total()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.total()
    }

    /// Average energy per cycle, by category.
    pub fn power(&self) -> Breakdown {
        if self.cycles == 0 {
            Breakdown::default()
        } else {
            self.energy.scale(1.0 / self.cycles as f64)
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power().total()
    }
}

/// `value / normalizer` per category; `None` where the normalizer's
/// category is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub categories: Vec<(String, Option<f64>)>,
    pub total: f64,
}

impl Ratios {
    pub fn get(&self, category: &str) -> Option<f64> {
        self.categories.iter().find(|(c, _)| c == category).and_then(|(_, r)| *r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCost {
    pub name: String,
    pub area: Ratios,
    pub energy: Ratios,
    pub power: Ratios,
}

fn ratios(x: &Breakdown, base: &Breakdown) -> Ratios {
    Ratios {
        categories: x
            .entries()
            .zip(base.values())
            .map(|((c, v), b)| (c.to_string(), (b != 0.0).then(|| v / b)))
            .collect(),
        total: x.total() / base.total(),
    }
}

/// Normalizes every design against `designs[normalize_to]`.
pub fn compare(designs: &[DesignCost], normalize_to: usize) -> Result<Vec<NormalizedCost>> {
    let base = designs
        .get(normalize_to)
        .ok_or_else(|| Error::param(format!("normalizer index {normalize_to} out of {} designs", designs.len())))?;
    if base.total_area() <= 0.0 || base.total_energy() <= 0.0 {
        return Err(Error::param(format!("normalizer `{}` has a zero total", base.name)));
    }
    let base_power = base.power();
    if base_power.total() <= 0.0 {
        return Err(Error::param(format!("normalizer `{}` ran zero cycles", base.name)));
    }
    Ok(designs
        .iter()
        .map(|d| NormalizedCost {
            name: d.name.clone(),
            area: ratios(&d.area, &base.area),
            energy: ratios(&d.energy, &base.energy),
            power: ratios(&d.power(), &base_power),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(name: &str, k: f64) -> DesignCost {
        DesignCost {
            name: name.into(),
            cycles: 100,
            area: Breakdown {
                weight_sram: 10.0 * k,
                mask_sram: 2.0 * k,
                logic: 1.0,
                ..Default::default()
            },
            energy: Breakdown {
                weight_sram: 5.0 * k,
                dram: 1.0,
                ..Default::default()
            },
            static_energy: 0.0,
        }
    }

    #[test]
    fn self_comparison_is_all_ones() {
        let d = design("a", 1.0);
        let c = compare(&[d.clone(), d], 0).unwrap();
        for n in &c {
            for r in [&n.area, &n.energy, &n.power] {
                assert_eq!(r.total, 1.0);
                assert!(r.categories.iter().all(|(_, v)| v.is_none() || *v == Some(1.0)));
            }
        }
    }

    #[test]
    fn empty_category_is_absent() {
        let c = compare(&[design("a", 1.0), design("b", 2.0)], 0).unwrap();
        assert_eq!(c[1].area.get("weight_sram"), Some(2.0));
        assert_eq!(c[1].area.get("row_offset_sram"), None);
        assert_eq!(c[1].area.get("dram"), None);
        assert_eq!(c[1].energy.get("dram"), Some(1.0));
    }

    #[test]
    fn zero_normalizer_rejected() {
        let mut z = design("z", 1.0);
        z.energy = Breakdown::default();
        assert!(compare(&[design("a", 1.0), z], 1).is_err());
        assert!(compare(&[design("a", 1.0)], 3).is_err());
    }

    #[test]
    fn power_is_energy_per_cycle() {
        let d = design("a", 1.0);
        assert!((d.total_power() - d.total_energy() / 100.0).abs() < 1e-12);
    }
}
