use ipeps::gates::{thermal_gate, ModelParams};
use ipeps::lattice::apply_gate_and_reduce;
use ipeps::tensor::{contract, svd_truncated, DenseTensor};
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev =
        ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    let gate = thermal_gate(params, 0.00125).unwrap();
    for _ in 0..63 {
        ev.step(None).unwrap();
    }
    let state = ev.state().inner().clone();
    for bond in ipeps::lattice::BondId::ALL {
        let pair = apply_gate_and_reduce(&state, &gate, bond).unwrap();
        let prod = pair.exact_product();
        let svd = svd_truncated(&prod, 2, 0.0).unwrap();
        let recon = svd.reconstruct();
        // compare against the rank-2 best approx from a trusted route:
        // full-rank svd, then keep top 2
        let full = svd_truncated(&prod, 8, 0.0).unwrap();
        let err_full = full.reconstruct().sub(&prod).unwrap().norm() / prod.norm();
        let err2 = recon.sub(&prod).unwrap().norm() / prod.norm();
        // u orthonormality
        let uu = contract(&svd.u.dagger(), &svd.u, &[(1, 0)]).unwrap();
        let uu_dev = uu.sub(&DenseTensor::identity(svd.s.len())).unwrap().max_abs();
        let vv = contract(&svd.vt, &svd.vt.dagger(), &[(1, 0)]).unwrap();
        let vv_dev = vv.sub(&DenseTensor::identity(svd.s.len())).unwrap().max_abs();
        println!(
            "{bond:?}: rank2-recon err {err2:.3e} (expected ~{:.1e}) | full recon err {err_full:.3e} | u dev {uu_dev:.2e} v dev {vv_dev:.2e} | s2/s1 {:.4}",
            svd.truncation_weight.sqrt(),
            svd.s[1] / svd.s[0],
        );
        if err2 > 1e-8 {
            // dump the matrix for offline analysis
            println!("prod dims {:?}", prod.dims());
            for i in 0..prod.dim(0) {
                let row: Vec<String> = (0..prod.dim(1))
                    .map(|j| format!("{:+.3e}", prod.at(&[i, j])))
                    .collect();
                println!("  {}", row.join(" "));
            }
        }
    }
}
