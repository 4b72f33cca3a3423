use qparity::config::{Measurement, Mode, Protocol, SimConfig};
use qparity::protocols::{run_protocol_with, RunOptions};

fn main() {
    for mode in [Mode::LuReset, Mode::Hamiltonian] {
        let config = SimConfig {
            measurement: Measurement::Full,
            protocol: Protocol::PF,
            mode,
            dt: 1e-4,
            t_max: 5.0,
            c0: 0.0,
            grid_points: 200,
            ..SimConfig::default()
        };
        let mut worst = 0.0f64;
        let mut worst_t = 0.0;
        let mut worst_seed = 0;
        for seed in 0..100u64 {
            let rec = run_protocol_with(&config, seed, RunOptions::default()).unwrap();
            for (t, c) in rec.times.iter().zip(&rec.concurrence) {
                if *t >= 0.05 {
                    let d = (c - (1.0 - (-t).exp()).sqrt()).abs();
                    if d > worst {
                        worst = d;
                        worst_t = *t;
                        worst_seed = seed;
                    }
                }
            }
        }
        println!("{mode:?}: worst {worst:.4e} at t={worst_t} seed={worst_seed}");
        // profile of worst seed
        let rec = run_protocol_with(&config, worst_seed, RunOptions::default()).unwrap();
        for (t, c) in rec.times.iter().zip(&rec.concurrence) {
            if (*t - worst_t).abs() < 0.26 {
                println!("  t={t:.3} C={c:.6} analytic={:.6}", (1.0 - (-t).exp()).sqrt());
            }
        }
    }
}
