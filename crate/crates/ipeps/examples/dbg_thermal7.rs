use ipeps::ctmrg::site_double;
use ipeps::gates::ModelParams;
use ipeps::lattice::IpepsState;
use ipeps::tensor::{contract, svd_truncated, DenseTensor};
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

fn zz_w4(state: &IpepsState<f64>) -> f64 {
    // quick width-2 cylinder: enough to see gross corruption
    let ins = pauli_insertions();
    let ea = site_double(state.a(), None).unwrap();
    let eb = site_double(state.b(), None).unwrap();
    let ea_z = site_double(state.a(), Some(&ins.sz)).unwrap();
    let eb_z = site_double(state.b(), Some(&ins.sz)).unwrap();
    // width-2 ring: column = A over B with both vertical bonds contracted
    let col = |t1: &DenseTensor<f64>, t2: &DenseTensor<f64>| -> DenseTensor<f64> {
        // t[u,l,d,r]: contract t1.d-t2.u and t1.u-t2.d (ring)
        let x = contract(t1, t2, &[(2, 0), (0, 2)]).unwrap(); // [l1,r1,l2,r2]
        x.permuted(&[0, 2, 1, 3])
            .into_reshaped(vec![t1.dim(1) * t1.dim(1), t1.dim(3) * t1.dim(3)])
            .unwrap()
    };
    let t_plain_1 = col(&ea, &eb);
    let t_plain_2 = col(&eb, &ea);
    let t_z1 = col(&ea_z, &eb);
    let t_z2 = col(&eb_z, &ea);
    let dim = t_plain_1.dim(0);
    let mut v = DenseTensor::new(vec![dim], vec![1.0; dim]).unwrap();
    let mut u = v.clone();
    for _ in 0..500 {
        v = contract(&t_plain_1, &contract(&t_plain_2, &v, &[(1, 0)]).unwrap(), &[(1, 0)]).unwrap();
        let n = v.norm();
        v.scale_mut(1.0 / n);
        u = contract(&contract(&u, &t_plain_1, &[(0, 0)]).unwrap(), &t_plain_2, &[(0, 0)]).unwrap();
        let n = u.norm();
        u.scale_mut(1.0 / n);
    }
    let num = contract(&contract(&u, &t_z1, &[(0, 0)]).unwrap(), &t_z2, &[(0, 0)]).unwrap();
    let num = contract(&num, &v, &[(0, 0)]).unwrap().data()[0];
    let den = contract(&contract(&u, &t_plain_1, &[(0, 0)]).unwrap(), &t_plain_2, &[(0, 0)]).unwrap();
    let den = contract(&den, &v, &[(0, 0)]).unwrap().data()[0];
    num / den
}

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let config = TruncationConfig::new(Scheme::Svdu, 2);
    let mut ev =
        ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0).unwrap();
    for step in 1..=100 {
        ev.step(None).unwrap();
        if step % 4 == 0 && step >= 40 {
            let st = ev.state().inner();
            // bond spectra of A as matrix (rest x right-leg)
            let am = st.a().permuted(&[0, 1, 2, 3, 4]).reshaped(vec![4 * 8, 2]).unwrap();
            let s = svd_truncated(&am, 2, 0.0).unwrap().s;
            println!(
                "step {step} beta {:.4}: zz2 {:+.6} bond-s ratio {:.3e}",
                ev.state().beta(),
                zz_w4(st),
                s[1] / s[0]
            );
        }
    }
}
