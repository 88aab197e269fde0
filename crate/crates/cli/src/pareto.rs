use serde::{Deserialize, Serialize};

use crate::runner::RunRow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub config_id: String,
    pub lanes: usize,
    pub cycles: u64,
    pub energy: f64,
    pub area: f64,
    pub on_energy_front: bool,
    pub on_area_front: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Energy,
    Area,
}

impl ParetoPoint {
    fn cost(&self, o: Objective) -> f64 {
        match o {
            Objective::Energy => self.energy,
            Objective::Area => self.area,
        }
    }

    /// Strictly better in one objective and no worse in the other.
    pub fn dominates(&self, other: &ParetoPoint, o: Objective) -> bool {
        let (a, b) = (self.cost(o), other.cost(o));
        self.cycles <= other.cycles && a <= b && (self.cycles < other.cycles || a < b)
    }
}

/// Indices of the non-dominated points under `(cycles, o)`, fastest first,
/// ties broken by config id.
pub fn front(points: &[ParetoPoint], o: Objective) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len())
        .filter(|&i| !points.iter().any(|q| q.dominates(&points[i], o)))
        .collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.cycles.cmp(&q.cycles).then_with(|| p.config_id.cmp(&q.config_id))
    });
    idx
}

/// Pareto points of the successful rows with both front flags filled in.
pub fn pareto_points(rows: &[RunRow]) -> Vec<ParetoPoint> {
    let mut pts: Vec<ParetoPoint> = rows
        .iter()
        .filter(|r| r.ok())
        .map(|r| ParetoPoint {
            config_id: r.config_id.clone(),
            lanes: r.lanes,
            cycles: r.total_cycles,
            energy: r.energy,
            area: r.area,
            on_energy_front: false,
            on_area_front: false,
        })
        .collect();
    for i in front(&pts, Objective::Energy) {
        pts[i].on_energy_front = true;
    }
    for i in front(&pts, Objective::Area) {
        pts[i].on_area_front = true;
    }
    pts
}
