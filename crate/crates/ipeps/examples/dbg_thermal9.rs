use ipeps::gates::{thermal_gate, ModelParams, Target};
use ipeps::lattice::{apply_gate_and_reduce, assemble, IpepsState};
use ipeps::tensor::contract;
use ipeps::thermal::*;
use ipeps::truncation::{svdu_truncate, Scheme, TruncationConfig};

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev =
        ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    // manually replay the schedule on the side at interesting steps
    let gate = thermal_gate(params, 0.00125).unwrap();
    for step in 1..=70 {
        if (60..=66).contains(&step) {
            // replicate one sub-update by hand on the current state and
            // check assembled two-site object against the direct one
            let state = ev.state().inner().clone();
            let mut worst = 0.0f64;
            for bond in ipeps::lattice::BondId::ALL {
                let pair = apply_gate_and_reduce(&state, &gate, bond).unwrap();
                let (m_a, m_b, _rep) = svdu_truncate(&pair, 2).unwrap();
                let s2 = assemble(&state, &pair, &m_a, &m_b).unwrap();
                let (a_rot, b_rot) = state.canonical_pair(bond);
                let ag = contract(&gate.g_a, &a_rot, &[(1, 0)]).unwrap();
                let bg = contract(&gate.g_b, &b_rot, &[(1, 0)]).unwrap();
                let direct = contract(&ag, &bg, &[(1, 1), (5, 3)]).unwrap();
                let (a2, b2) = s2.canonical_pair(bond);
                let two = contract(&a2, &b2, &[(4, 2)]).unwrap();
                let scale = (s2.normalization_log() - state.normalization_log()).exp();
                let mut scaled = two.clone();
                scaled.scale_mut(scale);
                let diff = scaled.sub(&direct).unwrap().norm() / direct.norm();
                worst = worst.max(diff);
            }
            println!("step {step}: worst single-bond assembled-vs-direct {worst:.3e}");
        }
        ev.step(None).unwrap();
    }
    let _ = Target::OneSite;
}
