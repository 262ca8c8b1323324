use ipeps::gates::{second_order_schedule, thermal_gate, ModelParams, Target};
use ipeps::lattice::apply_gate_and_reduce;
use ipeps::tensor::svd_truncated;
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev =
        ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    let gate = thermal_gate(params, 0.00125).unwrap();
    let schedule = second_order_schedule(|s| thermal_gate(params, s), 0.0025).unwrap();
    let _ = &schedule;
    for step in 1..=70 {
        let out = ev.step(None).unwrap();
        if step >= 55 && step <= 68 {
            // spectrum of the HorizontalAB product on the current state
            let pair = apply_gate_and_reduce(ev.state().inner(), &gate, ipeps::lattice::BondId::HorizontalAB).unwrap();
            let prod = pair.exact_product();
            let s = svd_truncated(&prod, 8, 0.0).unwrap().s;
            let smax = s[0];
            let rel: Vec<String> = s.iter().map(|x| format!("{:.2e}", x / smax)).collect();
            println!(
                "step {step}: max_eps {:.2e} | product spectrum {:?}",
                out.report.max_eps,
                rel
            );
        }
    }
}
