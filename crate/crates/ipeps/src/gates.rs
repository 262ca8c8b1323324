//! Quantum Ising model gates and their second-order Suzuki-Trotter schedule.
//!
//! The Hamiltonian is `H = -J Σ_{<jj'>} σ^z_j σ^z_j' - h_x Σ σ^x - h_z Σ σ^z`
//! with ferromagnetic coupling `J = 1`. Real-time evolution uses unitary
//! two-site gates `exp(+i dt σ^z σ^z)` factorized to an internal rank `r`;
//! imaginary-time evolution of a Hermitian purification uses the bond gate
//! `G = 1 + tanh(dβ/4) σ^z σ^z` lifted to a superoperator acting on the
//! operator-basis legs `O = (σ^x, σ^y, σ^z, 1)`.
//!
//! Gate builders take the *effective* step of a single application; the
//! schedule constructor halves the full step for its palindromic sub-gates.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::BondId;
use crate::scalar::Scalar;
use crate::tensor::{contract, linalg::herm_map, svd_truncated, DenseTensor};

/// Relative singular-value cutoff for gate factorization.
const GATE_RANK_CUTOFF: f64 = 1e-14;

/// Quantum Ising couplings. `coupling` is fixed at 1 by the public
/// constructor; tests use [`ModelParams::with_coupling`] to switch terms off.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub hx: f64,
    pub hz: f64,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

fn default_coupling() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(hx: f64, hz: f64) -> Self {
        assert!(hx >= 0.0 && hz >= 0.0, "fields must be non-negative");
        Self {
            hx,
            hz,
            coupling: 1.0,
        }
    }

    pub fn with_coupling(hx: f64, hz: f64, coupling: f64) -> Self {
        Self { hx, hz, coupling }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GateKind {
    UnitaryQuench,
    PurificationThermal,
}

/// A factorized two-site Trotter gate plus the matching one-site gates.
///
/// `g_a`/`g_b` have legs `[phys-out, phys-in, rank]` and recombine to the
/// full two-site gate when contracted over the rank leg. `g_a` applies to
/// sublattice A, `g_b` to B.
#[derive(Debug, Clone)]
pub struct TrotterGate<T: Scalar> {
    pub g_a: DenseTensor<T>,
    pub g_b: DenseTensor<T>,
    pub rank: usize,
    pub one_site_a: DenseTensor<T>,
    pub one_site_b: DenseTensor<T>,
    /// Effective step of one application of this gate.
    pub step: f64,
    pub kind: GateKind,
}

impl<T: Scalar> TrotterGate<T> {
    /// Recombine the factors into the full two-site gate
    /// `[a-out, a-in, b-out, b-in]`.
    pub fn two_site(&self) -> DenseTensor<T> {
        contract(&self.g_a, &self.g_b, &[(2, 2)]).expect("factor ranks agree")
    }

    /// Identity gate of physical dimension `p` (rank 1, identity one-site).
    pub fn identity(p: usize, kind: GateKind) -> Self {
        let mut g_a = DenseTensor::zeros(vec![p, p, 1]);
        let mut g_b = DenseTensor::zeros(vec![p, p, 1]);
        for i in 0..p {
            g_a.set(&[i, i, 0], T::one());
            g_b.set(&[i, i, 0], T::one());
        }
        Self {
            g_a,
            g_b,
            rank: 1,
            one_site_a: DenseTensor::identity(p),
            one_site_b: DenseTensor::identity(p),
            step: 0.0,
            kind,
        }
    }
}

/// Schedule entry: either the one-site gates on both sublattices, or a
/// two-site gate on one of the four inequivalent bonds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    OneSite,
    Bond(BondId),
}

/// Second-order (palindromic) Suzuki-Trotter schedule for one full step.
///
/// Layout: half-step one-site gates, the four bonds forward, the four bonds
/// in exact reverse, half-step one-site gates. Every gate in the list is
/// built by `builder` at `step / 2`, so each bond and each site accumulates
/// one full `step` per schedule.
pub fn second_order_schedule<T: Scalar>(
    builder: impl Fn(f64) -> Result<TrotterGate<T>>,
    step: f64,
) -> Result<Vec<(TrotterGate<T>, Target)>> {
    assert!(step > 0.0, "step must be positive");
    let half = builder(step / 2.0)?;
    let forward = [
        BondId::HorizontalAB,
        BondId::HorizontalBA,
        BondId::VerticalAB,
        BondId::VerticalBA,
    ];
    let mut items = Vec::with_capacity(10);
    items.push((half.clone(), Target::OneSite));
    for b in forward {
        items.push((half.clone(), Target::Bond(b)));
    }
    for b in forward.iter().rev() {
        items.push((half.clone(), Target::Bond(*b)));
    }
    items.push((half, Target::OneSite));
    Ok(items)
}

// ---------------------------------------------------------------------------
// Pauli helpers
// ---------------------------------------------------------------------------

pub fn pauli_x() -> DenseTensor<Complex64> {
    DenseTensor::new(
        vec![2, 2],
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

pub fn pauli_y() -> DenseTensor<Complex64> {
    DenseTensor::new(
        vec![2, 2],
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

pub fn pauli_z() -> DenseTensor<Complex64> {
    DenseTensor::new(
        vec![2, 2],
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    )
    .unwrap()
}

pub fn pauli_id() -> DenseTensor<Complex64> {
    DenseTensor::identity(2)
}

/// Operator basis `O^1 = σ^x, O^2 = σ^y, O^3 = σ^z, O^4 = 1`, unnormalized
/// so that `Tr[O^a O^b] = 2 δ_ab`.
pub fn operator_basis() -> [DenseTensor<Complex64>; 4] {
    [pauli_x(), pauli_y(), pauli_z(), pauli_id()]
}

/// Kronecker product of two matrices: `[(i1 i2), (j1 j2)]`.
pub fn kron<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> DenseTensor<T> {
    let (ra, ca) = (a.dim(0), a.dim(1));
    let (rb, cb) = (b.dim(0), b.dim(1));
    DenseTensor::from_fn(vec![ra * rb, ca * cb], |idx| {
        let (i, j) = (idx[0], idx[1]);
        a.at(&[i / rb, j / cb]) * b.at(&[i % rb, j % cb])
    })
}

fn matmul2<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> DenseTensor<T> {
    contract(a, b, &[(1, 0)]).expect("matrix shapes agree")
}

fn trace2<T: Scalar>(a: &DenseTensor<T>) -> T {
    let n = a.dim(0);
    (0..n).map(|i| a.at(&[i, i])).fold(T::zero(), |acc, x| acc + x)
}

// ---------------------------------------------------------------------------
// Gate builders
// ---------------------------------------------------------------------------

/// Split a two-site gate `[ao, ai, bo, bi]` across the a|b cut by SVD.
fn factor_two_site<T: Scalar>(
    g2: &DenseTensor<T>,
) -> Result<(DenseTensor<T>, DenseTensor<T>, usize)> {
    let p_out = g2.dim(0);
    let p_in = g2.dim(1);
    let mat = g2.reshaped(vec![p_out * p_in, g2.dim(2) * g2.dim(3)])?;
    let svd = svd_truncated(&mat, p_out * p_in, GATE_RANK_CUTOFF)?;
    let r = svd.rank();
    let mut g_a = svd.u.clone();
    for i in 0..g_a.dim(0) {
        for k in 0..r {
            let v = g_a.data()[i * r + k] * T::from_real(svd.s[k].sqrt());
            g_a.data_mut()[i * r + k] = v;
        }
    }
    let mut g_b_t = svd.vt.clone();
    let cols = g_b_t.dim(1);
    for k in 0..r {
        for j in 0..cols {
            let v = g_b_t.data()[k * cols + j] * T::from_real(svd.s[k].sqrt());
            g_b_t.data_mut()[k * cols + j] = v;
        }
    }
    let g_a = g_a.into_reshaped(vec![p_out, p_in, r])?;
    // vt rows are the b-side factors: [k, (bo bi)] -> [bo, bi, k]
    let g_b = g_b_t
        .into_reshaped(vec![r, g2.dim(2), g2.dim(3)])?
        .permuted(&[1, 2, 0]);
    Ok((g_a, g_b, r))
}

/// Unitary gate set for one application at effective step `dt_eff`:
/// bond factor pair for `exp(+i dt_eff J σ^z σ^z)` and one-site gates
/// `exp(+i dt_eff (h_x σ^x + h_z σ^z))`.
pub fn quench_gate(params: ModelParams, dt_eff: f64) -> Result<TrotterGate<Complex64>> {
    assert!(dt_eff > 0.0, "time step must be positive");
    let zz = kron(&pauli_z(), &pauli_z()).scaled(Complex64::new(params.coupling, 0.0));
    let u2 = herm_map(&zz, |lam| Complex64::new(0.0, dt_eff * lam).exp())?;
    // [ (ao bo), (ai bi) ] -> [ao, ai, bo, bi]
    let g2 = DenseTensor::from_fn(vec![2, 2, 2, 2], |idx| {
        u2.at(&[idx[0] * 2 + idx[2], idx[1] * 2 + idx[3]])
    });
    let (g_a, g_b, rank) = factor_two_site(&g2)?;

    let h1 = pauli_x()
        .scaled(Complex64::new(params.hx, 0.0))
        .add(&pauli_z().scaled(Complex64::new(params.hz, 0.0)))?;
    let u1 = herm_map(&h1, |lam| Complex64::new(0.0, dt_eff * lam).exp())?;

    Ok(TrotterGate {
        g_a,
        g_b,
        rank,
        one_site_a: u1.clone(),
        one_site_b: u1,
        step: dt_eff,
        kind: GateKind::UnitaryQuench,
    })
}

/// Expand the conjugation `X ↦ L X L†` in the operator basis; returns the
/// real matrix `S[a_out, a_in]` with `L O^{a_in} L† = Σ S[a_out,a_in] O^{a_out}`.
fn conjugation_superop_1site(l: &DenseTensor<Complex64>) -> Result<DenseTensor<f64>> {
    let basis = operator_basis();
    let ldag = l.dagger();
    let mut out = DenseTensor::zeros(vec![4, 4]);
    let mut max_imag = 0.0f64;
    for (a_in, o_in) in basis.iter().enumerate() {
        let m = matmul2(&matmul2(l, o_in), &ldag);
        for (a_out, o_out) in basis.iter().enumerate() {
            let coeff = trace2(&matmul2(&m, o_out)) * Complex64::new(0.5, 0.0);
            max_imag = max_imag.max(coeff.im.abs());
            out.set(&[a_out, a_in], coeff.re);
        }
    }
    if max_imag > 1e-12 {
        return Err(Error::BasisExpansion(max_imag));
    }
    Ok(out)
}

/// Expand the two-site conjugation `X ↦ G X G†` in the operator basis;
/// returns the real tensor `[a_out, a_in, b_out, b_in]`.
fn conjugation_superop_2site(g: &DenseTensor<Complex64>) -> Result<DenseTensor<f64>> {
    let basis = operator_basis();
    let gdag = g.dagger();
    let mut out = DenseTensor::zeros(vec![4, 4, 4, 4]);
    let mut max_imag = 0.0f64;
    for (a_in, oa) in basis.iter().enumerate() {
        for (b_in, ob) in basis.iter().enumerate() {
            let m = matmul2(&matmul2(g, &kron(oa, ob)), &gdag);
            for (a_out, oa2) in basis.iter().enumerate() {
                for (b_out, ob2) in basis.iter().enumerate() {
                    let coeff =
                        trace2(&matmul2(&m, &kron(oa2, ob2))) * Complex64::new(0.25, 0.0);
                    max_imag = max_imag.max(coeff.im.abs());
                    out.set(&[a_out, a_in, b_out, b_in], coeff.re);
                }
            }
        }
    }
    if max_imag > 1e-12 {
        return Err(Error::BasisExpansion(max_imag));
    }
    Ok(out)
}

/// Thermal gate set for one application at effective step `dβ_eff`, acting on
/// the `p = d² = 4` operator-basis legs of a Hermitian purification.
///
/// The bond superoperator realizes conjugation by
/// `G = 1 + tanh(J dβ_eff / 4) σ^z σ^z` (the constant prefactor of the bond
/// exponential is dropped; state normalization absorbs it). One-site
/// superoperators realize conjugation by `exp(+dβ_eff (h_x σ^x + h_z σ^z)/4)`,
/// the Gibbs-weight direction for the ferromagnetic sign convention. All
/// entries are real by Hermiticity of the map; a larger imaginary residue is
/// reported as a basis-expansion error.
pub fn thermal_gate(params: ModelParams, dbeta_eff: f64) -> Result<TrotterGate<f64>> {
    assert!(dbeta_eff > 0.0, "inverse-temperature step must be positive");
    let c = (params.coupling * dbeta_eff / 4.0).tanh();
    let g_bond = kron(&pauli_id(), &pauli_id())
        .add(&kron(&pauli_z(), &pauli_z()).scaled(Complex64::new(c, 0.0)))?;
    let superop = conjugation_superop_2site(&g_bond)?;
    let (g_a, g_b, rank) = factor_two_site(&superop)?;

    let h1 = pauli_x()
        .scaled(Complex64::new(params.hx, 0.0))
        .add(&pauli_z().scaled(Complex64::new(params.hz, 0.0)))?;
    let k1 = herm_map(&h1, |lam| Complex64::new((dbeta_eff / 4.0 * lam).exp(), 0.0))?;
    let one_site = conjugation_superop_1site(&k1)?;

    Ok(TrotterGate {
        g_a,
        g_b,
        rank,
        one_site_a: one_site.clone(),
        one_site_b: one_site,
        step: dbeta_eff,
        kind: GateKind::PurificationThermal,
    })
}
