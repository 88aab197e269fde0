use masr_cli::experiments::{BankRow, ScaleRow};
use masr_cli::pareto::{front, pareto_points, Objective, ParetoPoint};
use masr_cli::report::{read_table, table_string, Format, Table};
use masr_cli::runner::RunRow;
use proptest::prelude::*;

fn point(i: usize, cycles: u64, energy: u32, area: u32) -> ParetoPoint {
    ParetoPoint {
        config_id: format!("c{i:03}"),
        lanes: 1,
        cycles,
        energy: energy as f64,
        area: area as f64,
        on_energy_front: false,
        on_area_front: false,
    }
}

fn ids(pts: &[ParetoPoint], idx: Vec<usize>) -> Vec<String> {
    idx.into_iter().map(|i| pts[i].config_id.clone()).collect()
}

proptest! {
    #[test]
    fn front_is_permutation_invariant_and_non_dominated(
        raw in prop::collection::vec((1u64..20, 1u32..20, 1u32..20), 0..30),
        shuffle in any::<u64>(),
    ) {
        let pts: Vec<ParetoPoint> = raw.iter().enumerate().map(|(i, &(c, e, a))| point(i, c, e, a)).collect();
        let mut perm = pts.clone();
        let mut s = shuffle;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        for o in [Objective::Energy, Objective::Area] {
            let f = front(&pts, o);
            prop_assert_eq!(ids(&pts, f.clone()), ids(&perm, front(&perm, o)));
            for &i in &f {
                prop_assert!(!f.iter().any(|&j| pts[j].dominates(&pts[i], o)));
            }
            for i in 0..pts.len() {
                if !f.contains(&i) {
                    prop_assert!(pts.iter().any(|q| q.dominates(&pts[i], o)));
                }
            }
        }
    }

    #[test]
    fn scale_rows_roundtrip(rows in prop::collection::vec(
        (1usize..5000, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, any::<u64>(), any::<u64>(), -1e300f64..1e300),
        0..20,
    )) {
        let rows: Vec<ScaleRow> = rows
            .into_iter()
            .map(|(hidden, nz, weight_density, act_density, sparse_cycles, dense_cycles, speedup)| ScaleRow {
                hidden, nz, weight_density, act_density, sparse_cycles, dense_cycles, speedup,
            })
            .collect();
        for f in [Format::Csv, Format::Json] {
            let back: Vec<ScaleRow> = read_table(f, table_string(&rows, f).as_bytes()).unwrap();
            prop_assert_eq!(&back, &rows);
        }
    }
}

#[test]
fn failed_rows_are_kept_out_of_the_front() {
    let cfg = masr_core::sim::AcceleratorConfig::default();
    let bad = RunRow::failed(&cfg, 1, &masr_core::Error::Capacity("weights".into()));
    assert!(pareto_points(&[bad]).is_empty());
}

#[test]
fn fig9_left_schema() {
    assert_eq!(BankRow::COLUMNS, ["banks", "category", "fraction"]);
    let empty = table_string::<BankRow>(&[], Format::Csv);
    assert_eq!(empty.lines().count(), 2);
    let json = table_string::<BankRow>(&[], Format::Json);
    let back: Vec<BankRow> = read_table(Format::Json, json.as_bytes()).unwrap();
    assert!(back.is_empty());
}
