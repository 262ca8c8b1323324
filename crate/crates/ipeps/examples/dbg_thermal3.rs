use ipeps::ctmrg::{converge, energy_per_site};
use ipeps::gates::ModelParams;
use ipeps::lattice::IpepsState;
use ipeps::tensor::DenseTensor;
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

/// Exact classical-Ising purification at inverse temperature beta:
/// bond factor e^{K σσ} with K = β/2, split into per-leg weights.
fn exact_classical_state(beta: f64) -> IpepsState<f64> {
    let k = beta / 2.0;
    let w = [k.cosh().sqrt(), k.sinh().sqrt()];
    // legs [phys(4), t, l, b, r]; phys: 0=x,1=y,2=z,3=id
    let t = DenseTensor::from_fn(vec![4, 2, 2, 2, 2], |idx| {
        let (a, t, l, b, r) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let parity = (t + l + b + r) % 2;
        let want = if parity == 1 { 2 } else { 3 };
        if a == want {
            w[t] * w[l] * w[b] * w[r]
        } else {
            0.0
        }
    });
    IpepsState::new(t.clone(), t).unwrap()
}

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let ins = pauli_insertions();
    for beta in [0.1, 0.2, 0.35] {
        let exact = exact_classical_state(beta);
        for chi in [8, 16] {
            let env = converge(&exact, chi, 1e-10, 300).unwrap();
            let e = energy_per_site(&env, &exact, &params, &ins).unwrap();
            println!(
                "analytic beta {beta}: chi {chi} E {e:+.8} (conv {} sweeps {})",
                env.converged(),
                env.sweeps_used()
            );
        }
    }
    // compare evolved SVDU state against analytic at beta=0.2 observable-wise
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev =
        ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    while ev.state().beta() + 1e-12 < 0.2 {
        ev.step(None).unwrap();
    }
    let st = ev.state().inner();
    println!("svdu state A tensor:");
    for a in 0..4 {
        for t in 0..2 {
            for l in 0..2 {
                for b in 0..2 {
                    for r in 0..2 {
                        let v = st.a().at(&[a, t, l, b, r]);
                        if v.abs() > 1e-12 {
                            println!("  A[{a};{t}{l}{b}{r}] = {v:+.6}");
                        }
                    }
                }
            }
        }
    }
}
