use ipeps::ctmrg::site_double;
use ipeps::gates::ModelParams;
use ipeps::lattice::IpepsState;
use ipeps::tensor::{contract, DenseTensor};
use ipeps::thermal::*;
use ipeps::truncation::{Scheme, TruncationConfig};

fn exact_classical_state(beta: f64) -> IpepsState<f64> {
    let k = beta / 2.0;
    let w = [k.cosh().sqrt(), k.sinh().sqrt()];
    let t = DenseTensor::from_fn(vec![4, 2, 2, 2, 2], |idx| {
        let (a, t, l, b, r) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let parity = (t + l + b + r) % 2;
        let want = if parity == 1 { 2 } else { 3 };
        if a == want { w[t] * w[l] * w[b] * w[r] } else { 0.0 }
    });
    IpepsState::new(t.clone(), t).unwrap()
}

/// Column transfer matrix on a width-4 ring of the double layer, built as a
/// dense (4^w)^2 matrix by explicit loops. Sites alternate starting at `s0`.
fn column_matrix(sites: &[&DenseTensor<f64>]) -> Vec<f64> {
    let w = sites.len();
    let d = sites[0].dim(0); // fused leg dim
    let dim = d.pow(w as u32);
    let mut m = vec![0.0f64; dim * dim];
    let mut lidx = vec![0usize; w];
    let mut ridx = vec![0usize; w];
    for li in 0..dim {
        let mut rem = li;
        for i in (0..w).rev() { lidx[i] = rem % d; rem /= d; }
        for ri in 0..dim {
            let mut rem = ri;
            for i in (0..w).rev() { ridx[i] = rem % d; rem /= d; }
            // sum over vertical ring bonds v[i] between site i and i+1
            let mut acc = 0.0;
            let vdim = d.pow(w as u32);
            let mut v = vec![0usize; w];
            for vi in 0..vdim {
                let mut rem = vi;
                for i in (0..w).rev() { v[i] = rem % d; rem /= d; }
                let mut prod = 1.0;
                for i in 0..w {
                    let up = v[(i + w - 1) % w];
                    let down = v[i];
                    prod *= sites[i].at(&[up, lidx[i], down, ridx[i]]);
                    if prod == 0.0 { break; }
                }
                acc += prod;
            }
            m[li * dim + ri] = acc;
        }
    }
    m
}

fn cylinder_zz(state: &IpepsState<f64>, w: usize) -> f64 {
    let ins = pauli_insertions();
    let ea = site_double(state.a(), None).unwrap();
    let eb = site_double(state.b(), None).unwrap();
    let ea_z = site_double(state.a(), Some(&ins.sz)).unwrap();
    let eb_z = site_double(state.b(), Some(&ins.sz)).unwrap();
    let mk = |use_z_first: bool, start_a: bool| -> Vec<f64> {
        let mut v: Vec<&DenseTensor<f64>> = Vec::new();
        for i in 0..w {
            let a_site = (i % 2 == 0) == start_a;
            v.push(match (i, a_site, use_z_first) {
                (0, true, true) => &ea_z,
                (0, false, true) => &eb_z,
                (_, true, _) => &ea,
                (_, false, _) => &eb,
            });
        }
        column_matrix(&v)
    };
    let t_a = mk(false, true);
    let t_b = mk(false, false);
    let t_az = mk(true, true);
    let t_bz = mk(true, false);
    let dim = (4usize).pow(w as u32);
    let matvec = |m: &Vec<f64>, v: &Vec<f64>| -> Vec<f64> {
        (0..dim)
            .map(|i| m[i * dim..(i + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    let vecmat = |v: &Vec<f64>, m: &Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for i in 0..dim {
            let vi = v[i];
            if vi != 0.0 {
                for j in 0..dim { out[j] += vi * m[i * dim + j]; }
            }
        }
        out
    };
    let mut v = vec![1.0f64; dim];
    let mut u = vec![1.0f64; dim];
    for _ in 0..400 {
        v = matvec(&t_a, &matvec(&t_b, &v));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        u = vecmat(&vecmat(&u, &t_a), &t_b);
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= n);
    }
    let quad = |m1: &Vec<f64>, m2: &Vec<f64>| -> f64 {
        let x = matvec(&m2, &v);
        let y = vecmat(&u, &m1);
        y.iter().zip(&x).map(|(a, b)| a * b).sum()
    };
    quad(&t_az, &t_bz) / quad(&t_a, &t_b)
}

fn main() {
    let beta = 0.2;
    let params = ModelParams::new(0.0, 0.0);
    let exact = exact_classical_state(beta);
    println!("analytic zz (w=4): {:+.6}", cylinder_zz(&exact, 4));
    for scheme in [Scheme::Svdu, Scheme::Ntu] {
        let config = TruncationConfig::new(scheme, 2);
        let mut ev =
            ThermalEvolution::new(infinite_temperature_state(), params, 0.0025, config, 0.0)
                .unwrap();
        while ev.state().beta() + 1e-12 < beta {
            ev.step(None).unwrap();
        }
        println!("{scheme} zz (w=4): {:+.6}", cylinder_zz(ev.state().inner(), 4));
    }
}
