use robbins::{mc_compare, RuleParams, SimConfig};

#[test]
fn paired_t_vs_xmax() {
    let opt = RuleParams::new(0.34328, 1.82571, 2.0).unwrap();
    let tam = RuleParams::new(0.42, 1.95, 1.95).unwrap();
    for x_max in [200.0, 1000.0, 2000.0, 5000.0] {
        let cmp = mc_compare(
            &tam,
            &opt,
            &SimConfig {
                x_max,
                seed: 42,
                replicates: 500_000,
            },
        )
        .unwrap();
        println!(
            "x_max {x_max}: diff {:+.5} +- {:.5}, t = {:+.2}, sd_diff = {:.3}, n {}",
            cmp.mean_diff,
            cmp.std_error_diff,
            cmp.t_statistic,
            cmp.std_error_diff * (cmp.n_used as f64).sqrt(),
            cmp.n_used
        );
    }
}
