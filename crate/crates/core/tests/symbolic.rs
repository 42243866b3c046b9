//! Random oblivious schedules: the symbolic trajectory evaluated at η
//! reproduces the numeric run, and residual degrees stay within k.

use proptest::prelude::*;

use pcli_lab::instances::QuadraticInstance;
use pcli_lab::pcli::{
    residual_poly, run, symbolic_run, CoefficientGrids, CoefficientSchedule, DiagonalOperator,
    PcliState, SideInformation,
};
use pcli_lab::poly::Wide;

/// A schedule whose grids at step `k` are drawn from `table[k % len]`.
fn table_schedule(p: usize, table: Vec<Vec<f64>>) -> CoefficientSchedule {
    CoefficientSchedule::new("random", p, move |k, _| {
        let row = &table[k % table.len()];
        let mut g = CoefficientGrids::zeros(p);
        for i in 0..p {
            for j in 0..p {
                g.a[i][j] = DiagonalOperator::Scalar(row[2 * (i * p + j)]);
                g.b[i][j] = DiagonalOperator::Scalar(row[2 * (i * p + j) + 1]);
            }
        }
        Ok(g)
    })
}

fn schedule_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..=3).prop_flat_map(|p| {
        let row = prop::collection::vec(-0.6f64..0.6, 2 * p * p);
        (Just(p), prop::collection::vec(row, 1..4))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbolic_matches_numeric(
        (p, table) in schedule_strategy(),
        v in prop::collection::vec(0.2f64..2.0, 1..4),
        eta in 0.05f64..1.0,
        k in 0usize..12,
    ) {
        let sched = table_schedule(p, table);
        let info = SideInformation::smooth(1.0).unwrap();
        let d = v.len();
        let inst = QuadraticInstance::new(vec![eta; d], v.iter().map(|x| -eta * x).collect()).unwrap();
        let states = run(&inst, &sched, &info, &PcliState::zeros(p, d), k).unwrap();
        let traj = symbolic_run::<Wide>(&sched, &info, &v, k).unwrap();
        for i in 0..p {
            for (c, (a, b)) in traj.point(i, eta).iter().zip(&states[k].points[i]).enumerate() {
                let scale = b.abs().max(v[c]).max(1.0);
                prop_assert!((a - b).abs() <= 1e-10 * scale, "point {i} coord {c}: {a} vs {b}");
            }
        }
        for c in 0..d {
            let r = residual_poly(&traj, c).unwrap();
            prop_assert!(r.degree().unwrap_or(0) <= k);
        }
    }
}
