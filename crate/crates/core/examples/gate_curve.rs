// SPDX-License-Identifier: MIT OR Apache-2.0

//! Print the Beta gate over s in [-1, 1] for a few (k, c) settings.
//!
//!     cargo run --example gate_curve

use rudder::gate::{gate_slope_at_zero, gate_value, GateConfig};

fn main() {
    let settings = [(5.0, 1.0), (8.0, 1.0), (5.0, 3.0), (20.0, 1.0)];
    print!("{:>6}", "s");
    for (k, c) in settings {
        print!("  k={k:<4} c={c:<3}");
    }
    println!();
    for i in 0..=20 {
        let s = -1.0 + 0.1 * i as f64;
        print!("{s:>6.2}");
        for (k, c) in settings {
            let cfg = GateConfig {
                k,
                c,
                ..GateConfig::default()
            };
            print!("  {:>13.4}", gate_value(s, &cfg).g);
        }
        println!();
    }
    println!();
    for (k, c) in settings {
        let cfg = GateConfig {
            k,
            c,
            ..GateConfig::default()
        };
        println!("k={k} c={c}: slope at s=0 is {:.4}", gate_slope_at_zero(&cfg));
    }

    // Clamping bounds the gate; the posterior mean itself never reaches 0 or 1.
    let clamped = GateConfig {
        g_min: 0.2,
        g_max: 0.8,
        ..GateConfig::default()
    };
    for s in [-1.0, 0.0, 1.0] {
        let out = gate_value(s, &clamped);
        println!("clamped to [0.2, 0.8]: s={s:+.1} g_raw={:.4} g={:.4}", out.g_raw, out.g);
    }
}
