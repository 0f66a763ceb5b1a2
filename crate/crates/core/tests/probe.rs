use normsim_core::engine::{run_simulation, SimConfig};
use normsim_core::games::GameKind;
use rayon::prelude::*;

fn probe(label: &str, kind: GameKind, n_act: usize, reps: u64, f: impl Fn(&mut SimConfig) + Sync) {
    let results: Vec<_> = (0..reps).into_par_iter().map(|seed| {
        let mut c = SimConfig::new(kind, n_act);
        c.rounds = 2000;
        c.seed = seed;
        f(&mut c);
        let out = run_simulation(&c).unwrap();
        (out.summary.converged_round, out.summary.final_avg_payoff)
    }).collect();
    let conv: Vec<u32> = results.iter().filter_map(|r| r.0).collect();
    let mean_round = conv.iter().map(|&r| r as f64).sum::<f64>() / conv.len().max(1) as f64;
    let hi = if matches!(kind, GameKind::Cghp | GameKind::Fscghp) { 9.5 } else { 0.98 };
    let optimal = results.iter().filter(|r| r.1 > hi).count();
    println!("{label:22} {kind:?}({n_act}) conv {:2}/{} mean_round {:4.0} highpay {}", conv.len(), reps, mean_round, optimal);
}

#[test]
#[ignore]
fn probe_floor2() {
    for floor in [0.12f64, 0.2, 0.3] {
        for c_val in [10.0f64, 20.0] {
            probe(&format!("C={c_val} floor={floor}"), GameKind::Cg, 6, 20, move |c| {
                c.params.fmq_weight = c_val; c.params.epsilon_conflict_floor = floor; });
            probe(&format!("C={c_val} floor={floor}"), GameKind::Cghp, 6, 20, move |c| {
                c.params.fmq_weight = c_val; c.params.epsilon_conflict_floor = floor; });
        }
    }
}
