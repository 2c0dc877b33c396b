// diagnostic: per-point mean kernel HRC for scenario Ib
use causal_hr::frailty::FrailtyFamily;
use causal_hr::numeric::derive_seed;
use causal_hr::sensitivity::*;
use causal_hr::simulate::*;
use rayon::prelude::*;

fn main() {
    let resolved = resolve(&ScenarioSpec::ib(0.7, 5_000, 0.2)).unwrap();
    let req = SensitivityRequest {
        method: Method::Kernel,
        families: vec![FrailtyFamily::Gamma],
        taus: vec![0.7],
        grid: GridRule::FromData { n_points: 51, min_at_risk: 10 },
        weighting: Weighting::None,
    };
    let first = generate_resolved(&resolved, derive_seed(100, 1, 0)).unwrap();
    let grid = resolve_grid(&first.sample, &req).unwrap();
    println!("grid: [{:.4}, {:.4}]", grid.min(), grid.max());
    let reps = 60usize;
    let all: Vec<Vec<(Option<f64>, f64, f64, f64)>> = (0..reps).into_par_iter().map(|rep| {
        let ds = generate_resolved(&resolved, derive_seed(100, 1, rep as u64)).unwrap();
        let prepared = prepare_arms(&ds.sample, &req, &grid, None).unwrap();
        let curves = curves_from_prepared(&prepared, &req).unwrap();
        let sm = prepared.smoothed.as_ref().unwrap();
        curves[0].points.iter().enumerate().map(|(i, p)| {
            (if p.flag == PointFlag::Ok { p.estimate } else { None },
             sm[1].values[i], sm[0].values[i],
             sm[1].plan.local_bandwidth[i])
        }).collect()
    }).collect();
    for (i, &t) in grid.points().iter().enumerate() {
        let vals: Vec<f64> = all.iter().filter_map(|r| r[i].0).collect();
        let l1: f64 = all.iter().map(|r| r[i].1).sum::<f64>() / reps as f64;
        let l0: f64 = all.iter().map(|r| r[i].2).sum::<f64>() / reps as f64;
        let bw: f64 = all.iter().map(|r| r[i].3).sum::<f64>() / reps as f64;
        let m = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        println!("t={t:7.3} n_ok={:3} mean_hrc={m:8.4} l1={l1:8.4} l0={l0:8.4} bw1={bw:6.3}", vals.len());
    }
}
