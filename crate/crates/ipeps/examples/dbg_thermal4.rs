use ipeps::ctmrg::{converge, expect_two_site, expect_one_site};
use ipeps::lattice::{BondId, IpepsState};
use ipeps::tensor::DenseTensor;
use ipeps::thermal::pauli_insertions;

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

fn onsager_nn(beta: f64) -> f64 {
    let k = 2.0 * (2.0 * beta).sinh() / (2.0 * beta).cosh().powi(2);
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..80 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    let kk = std::f64::consts::PI / (2.0 * a);
    let coth = 1.0 / (2.0 * beta).tanh();
    let u = -2.0 * coth
        * (1.0 + (2.0 * (2.0 * beta).tanh().powi(2) - 1.0) * (2.0 / std::f64::consts::PI) * kk);
    -u / 2.0
}

// classical cylinder NN correlator (ring direction), width w
fn cylinder_nn(beta: f64, w: usize) -> f64 {
    let n = 1usize << w;
    let spin = |s: usize, i: usize| if (s >> i) & 1 == 1 { 1.0 } else { -1.0 };
    let mut t = vec![0.0f64; n * n];
    for s1 in 0..n {
        for s2 in 0..n {
            let mut e = 0.0;
            for i in 0..w {
                let j = (i + 1) % w;
                e += 0.5 * beta * (spin(s1, i) * spin(s1, j) + spin(s2, i) * spin(s2, j));
                e += beta * spin(s1, i) * spin(s2, i);
            }
            t[s1 * n + s2] = e.exp();
        }
    }
    let mut v = vec![1.0f64; n];
    for _ in 0..3000 {
        let mut w_ = vec![0.0f64; n];
        for i in 0..n {
            w_[i] = t[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let nm = w_.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut w_ { *x /= nm; }
        let diff: f64 = w_.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w_;
        if diff < 1e-15 { break; }
    }
    let norm: f64 = v.iter().map(|x| x * x).sum();
    let mut corr = 0.0;
    for s in 0..n {
        corr += v[s] * v[s] * spin(s, 0) * spin(s, 1);
    }
    corr / norm
}

fn main() {
    let ins = pauli_insertions();
    for beta in [0.1f64, 0.2] {
        let exact = exact_classical_state(beta);
        let env = converge(&exact, 16, 1e-11, 400).unwrap();
        let zz_h = expect_two_site(&env, &exact, BondId::HorizontalAB, &ins.sz, &ins.sz).unwrap();
        let zz_h2 = expect_two_site(&env, &exact, BondId::HorizontalBA, &ins.sz, &ins.sz).unwrap();
        let zz_v = expect_two_site(&env, &exact, BondId::VerticalAB, &ins.sz, &ins.sz).unwrap();
        let sz = expect_one_site(&env, &exact, &ins.sz).unwrap();
        println!(
            "beta {beta}: conv {} sweeps {} | ctmrg zz_h {zz_h:.9} zz_h2 {zz_h2:.9} zz_v {zz_v:.9} sz {sz:.2e}",
            env.converged(), env.sweeps_used()
        );
        println!(
            "        onsager {:.9} | cylinder w10 {:.9} w12 {:.9}",
            onsager_nn(beta),
            cylinder_nn(beta, 10),
            cylinder_nn(beta, 12)
        );
    }
}
