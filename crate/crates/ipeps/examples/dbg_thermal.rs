use ipeps::ctmrg::{converge, correlation_length, energy_per_site, Axis};
use ipeps::gates::ModelParams;
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};
use std::time::Instant;

fn main() {
    // evolve to beta=0.1 classical and compare energy
    let params = ModelParams::new(0.0, 0.0);
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev = ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    let t0 = Instant::now();
    while ev.state().beta() + 1e-12 < 0.1 {
        ev.step(None).unwrap();
    }
    println!("evolved to beta=0.1 in {:?} ({} steps)", t0.elapsed(), ev.steps_taken());
    let env = ev.converge_env(8, 1e-10, 50).unwrap();
    println!("env converged={} sweeps={}", env.converged(), env.sweeps_used());
    let ins = pauli_insertions();
    let e = energy_per_site(&env, ev.state().inner(), &params, &ins).unwrap();
    println!("E(0.1) = {e:.10}");

    // continue to 0.35 and check xi
    let config = TruncationConfig::new(Scheme::Ntu, 2);
    let mut ev = ThermalEvolution::new(ev.state().clone(), params, 0.0025, config, 0.0).unwrap();
    let t0 = Instant::now();
    while ev.state().beta() + 1e-12 < 0.35 {
        ev.step(None).unwrap();
    }
    println!("to beta=0.35 in {:?}", t0.elapsed());
    let env = ev.converge_env(16, 1e-10, 200).unwrap();
    println!("env converged={} sweeps={}", env.converged(), env.sweeps_used());
    let e = energy_per_site(&env, ev.state().inner(), &params, &ins).unwrap();
    println!("E(0.35) = {e:.10}");
    let xi_h = correlation_length(&env, ev.state().inner(), Axis::Horizontal).unwrap();
    let xi_v = correlation_length(&env, ev.state().inner(), Axis::Vertical).unwrap();
    let exact = 1.0 / ((1.0f64 / 0.35f64.tanh()).ln() - 2.0 * 0.35);
    println!("xi_h {xi_h:.6} xi_v {xi_v:.6} exact {exact:.6}");
}
