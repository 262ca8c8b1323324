use ipeps::ctmrg::energy_per_site;
use ipeps::gates::ModelParams;
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    for scheme in [Scheme::Svdu, Scheme::Ntu] {
        let config = TruncationConfig::new(scheme, 2);
        let mut ev =
            ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0)
                .unwrap();
        let ins = pauli_insertions();
        println!("--- scheme {scheme}");
        for _ in 0..7 {
            let mut max_eps = 0.0f64;
            for _ in 0..20 {
                let out = ev.step(None).unwrap();
                max_eps = max_eps.max(out.report.max_eps);
            }
            let env = ev.converge_env(12, 1e-10, 200).unwrap();
            let e = energy_per_site(&env, ev.state().inner(), &params, &ins).unwrap();
            println!(
                "beta {:.3}: E {e:+.8} (max_eps {max_eps:.2e}, env sweeps {})",
                ev.state().beta(),
                env.sweeps_used()
            );
        }
    }
}
