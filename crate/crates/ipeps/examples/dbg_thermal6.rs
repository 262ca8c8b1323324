use ipeps::gates::{second_order_schedule, thermal_gate, ModelParams};
use ipeps::lattice::{apply_gate_and_reduce, assemble, BondId, IpepsState};
use ipeps::tensor::{contract, DenseTensor};
use ipeps::truncation::{svdu_truncate, Scheme, TruncationConfig};

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

fn main() {
    let params = ModelParams::new(0.0, 0.0);
    let state = exact_classical_state(0.2);
    let gate = thermal_gate(params, 0.00125).unwrap();

    // one bond update via svdu, checked against the direct gated object
    let bond = BondId::HorizontalAB;
    let pair = apply_gate_and_reduce(&state, &gate, bond).unwrap();
    let (m_a, m_b, rep) = svdu_truncate(&pair, 2).unwrap();
    println!("svd weight {:.3e}", rep.svd_truncation_weight);

    // direct: gated two-site object
    let (a_rot, b_rot) = state.canonical_pair(bond);
    let ag = contract(&gate.g_a, &a_rot, &[(1, 0)]).unwrap();
    let bg = contract(&gate.g_b, &b_rot, &[(1, 0)]).unwrap();
    let direct = contract(&ag, &bg, &[(1, 1), (5, 3)]).unwrap();

    // assembled: A'·B'^T over the new bond
    let s2 = assemble(&state, &pair, &m_a, &m_b).unwrap();
    let (a2, b2) = s2.canonical_pair(bond);
    let two = contract(&a2, &b2, &[(4, 2)]).unwrap();
    // legs: [p,t,l,b, p2,t2,b2,r2] on both? direct legs [o,t,l,b, o2,t2,b2,r2]
    let scale = direct.norm() / two.norm();
    let mut scaled = two.clone();
    scaled.scale_mut(scale);
    let diff = scaled.sub(&direct).unwrap().norm() / direct.norm();
    println!("two-site reconstruction rel diff (svdu, up to scale): {diff:.3e}");

    // also compare against NTU's m's
    let metric = ipeps::truncation::ntu_metric(&state, &pair).unwrap();
    let config = TruncationConfig::new(Scheme::Ntu, 2);
    let (n_a, n_b, nrep) = ipeps::truncation::als_optimize(&pair, &metric, &config).unwrap();
    let s3 = assemble(&state, &pair, &n_a, &n_b).unwrap();
    let (a3, b3) = s3.canonical_pair(bond);
    let two3 = contract(&a3, &b3, &[(4, 2)]).unwrap();
    let scale3 = direct.norm() / two3.norm();
    let mut scaled3 = two3.clone();
    scaled3.scale_mut(scale3);
    let diff3 = scaled3.sub(&direct).unwrap().norm() / direct.norm();
    println!("two-site reconstruction rel diff (ntu): {diff3:.3e}  eps {:.3e}", nrep.epsilon_final);

    // compare the assembled SINGLE tensors' other bonds: do the spectator
    // legs of A'/B' still match the partner's in the full lattice? These
    // must contract with the *unmodified* B on the other three bonds.
    println!("A' dims {:?} B' dims {:?}", s2.a().dims(), s2.b().dims());
}
