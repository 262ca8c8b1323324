//! The iPEPS state on the checkerboard square lattice.
//!
//! Two rank-5 tensors `A` and `B` tile the infinite lattice in a
//! checkerboard pattern; every neighbor of an A site is a B site. Site
//! tensors carry legs `[phys, top, left, bottom, right]`. The four
//! inequivalent bonds are reduced to one canonical geometry (A left, B
//! right, active legs `A.right`–`B.left`) by lattice rotations/reflections,
//! which keep the sublattice structure intact.
//!
//! Gate application splits each gated tensor into a fixed isometry `Q` and a
//! small reduced matrix `R` by thin QR; truncation schemes only ever touch
//! the reduced matrices.

use crate::error::{Error, Result};
use crate::gates::TrotterGate;
use crate::scalar::Scalar;
use crate::tensor::{contract, qr, DenseTensor};

pub const LEG_PHYS: usize = 0;
pub const LEG_TOP: usize = 1;
pub const LEG_LEFT: usize = 2;
pub const LEG_BOTTOM: usize = 3;
pub const LEG_RIGHT: usize = 4;

/// One of the four inequivalent nearest-neighbor bonds on the checkerboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BondId {
    /// A on the left, B on the right: `A.right`–`B.left`.
    HorizontalAB,
    /// B on the left, A on the right: `B.right`–`A.left`.
    HorizontalBA,
    /// A on top, B below: `A.bottom`–`B.top`.
    VerticalAB,
    /// B on top, A below: `B.bottom`–`A.top`.
    VerticalBA,
}

impl BondId {
    pub const ALL: [BondId; 4] = [
        BondId::HorizontalAB,
        BondId::HorizontalBA,
        BondId::VerticalAB,
        BondId::VerticalBA,
    ];

    /// Leg permutation taking a site tensor into the canonical frame where
    /// this bond looks like `A.right`–`B.left` (new leg i = old leg perm[i]).
    pub(crate) fn to_canonical(self) -> [usize; 5] {
        match self {
            BondId::HorizontalAB => [0, 1, 2, 3, 4],
            // mirror left-right
            BondId::HorizontalBA => [0, 1, 4, 3, 2],
            // rotate counterclockwise: up becomes left
            BondId::VerticalAB => [0, 4, 1, 2, 3],
            // rotate clockwise: down becomes left
            BondId::VerticalBA => [0, 2, 3, 4, 1],
        }
    }

    pub(crate) fn from_canonical(self) -> [usize; 5] {
        match self {
            BondId::HorizontalAB => [0, 1, 2, 3, 4],
            BondId::HorizontalBA => [0, 1, 4, 3, 2],
            BondId::VerticalAB => [0, 2, 3, 4, 1],
            BondId::VerticalBA => [0, 4, 1, 2, 3],
        }
    }
}

/// Two-sublattice iPEPS snapshot.
///
/// Both tensors are kept at max-abs 1; the scale removed over the history of
/// the state accumulates (in log) in `normalization_log`. States are
/// immutable snapshots: evolution produces new values.
#[derive(Debug, Clone)]
pub struct IpepsState<T: Scalar> {
    a: DenseTensor<T>,
    b: DenseTensor<T>,
    normalization_log: f64,
}

impl<T: Scalar> IpepsState<T> {
    pub fn new(a: DenseTensor<T>, b: DenseTensor<T>) -> Result<Self> {
        Self::with_log(a, b, 0.0)
    }

    pub fn with_log(a: DenseTensor<T>, b: DenseTensor<T>, normalization_log: f64) -> Result<Self> {
        if a.rank() != 5 || b.rank() != 5 {
            return Err(Error::InvalidState("site tensors must be rank 5".into()));
        }
        if a.dim(LEG_PHYS) != b.dim(LEG_PHYS) {
            return Err(Error::InvalidState("physical dimensions differ".into()));
        }
        let facing = [
            (LEG_RIGHT, LEG_LEFT),
            (LEG_LEFT, LEG_RIGHT),
            (LEG_BOTTOM, LEG_TOP),
            (LEG_TOP, LEG_BOTTOM),
        ];
        for (la, lb) in facing {
            if a.dim(la) != b.dim(lb) {
                return Err(Error::InvalidState(format!(
                    "A leg {la} (dim {}) does not face B leg {lb} (dim {})",
                    a.dim(la),
                    b.dim(lb)
                )));
            }
        }
        let mut state = Self {
            a,
            b,
            normalization_log,
        };
        state.normalize_mut()?;
        Ok(state)
    }

    pub fn a(&self) -> &DenseTensor<T> {
        &self.a
    }

    pub fn b(&self) -> &DenseTensor<T> {
        &self.b
    }

    pub fn phys_dim(&self) -> usize {
        self.a.dim(LEG_PHYS)
    }

    /// Largest virtual dimension in the state.
    pub fn bond_dim(&self) -> usize {
        (1..5).map(|l| self.a.dim(l).max(self.b.dim(l))).max().unwrap()
    }

    pub fn normalization_log(&self) -> f64 {
        self.normalization_log
    }

    fn normalize_mut(&mut self) -> Result<()> {
        for t in [&mut self.a, &mut self.b] {
            if !t.is_finite() {
                return Err(Error::NonFinite("state tensor"));
            }
            let m = t.max_abs();
            if m == 0.0 {
                return Err(Error::InvalidState("state tensor is identically zero".into()));
            }
            t.scale_mut(T::from_real(1.0 / m));
            self.normalization_log += m.ln();
        }
        Ok(())
    }

    /// Site tensors in the canonical frame of `bond` (A left, B right).
    pub fn canonical_pair(&self, bond: BondId) -> (DenseTensor<T>, DenseTensor<T>) {
        let perm = bond.to_canonical();
        (self.a.permuted(&perm), self.b.permuted(&perm))
    }

    /// Rebuild a state from canonical-frame tensors of `bond`.
    pub fn from_canonical_pair(
        &self,
        bond: BondId,
        a_rot: DenseTensor<T>,
        b_rot: DenseTensor<T>,
    ) -> Result<Self> {
        let perm = bond.from_canonical();
        Self::with_log(
            a_rot.permuted(&perm),
            b_rot.permuted(&perm),
            self.normalization_log,
        )
    }

    /// Absorb one-site gates `[out, in]` into the physical legs.
    pub fn apply_one_site(&self, u_a: &DenseTensor<T>, u_b: &DenseTensor<T>) -> Result<Self> {
        let a = contract(u_a, &self.a, &[(1, LEG_PHYS)])?;
        let b = contract(u_b, &self.b, &[(1, LEG_PHYS)])?;
        Self::with_log(a, b, self.normalization_log)
    }
}

/// Uniform product state: `D = 1`, identical local vector on both sublattices.
pub fn initial_product_state<T: Scalar>(p: usize, local_vector: &[T]) -> Result<IpepsState<T>> {
    if local_vector.len() != p {
        return Err(Error::InvalidState(format!(
            "local vector length {} != physical dimension {p}",
            local_vector.len()
        )));
    }
    if local_vector.iter().all(|x| x.modulus() == 0.0) {
        return Err(Error::InvalidState("local vector is zero".into()));
    }
    let t = DenseTensor::new(vec![p, 1, 1, 1, 1], local_vector.to_vec())?;
    IpepsState::new(t.clone(), t)
}

/// Gated bond split into fixed isometries and reduced matrices, all in the
/// canonical frame of `bond`.
///
/// `q_a` has legs `[p, top, left, bottom, q]`, `q_b` has
/// `[p, top, bottom, right, q]`; the isometry legs `q` face the reduced
/// matrices `r_a`, `r_b` of shape `(q, rank·D_bond)`.
#[derive(Debug, Clone)]
pub struct ReducedPair<T: Scalar> {
    pub q_a: DenseTensor<T>,
    pub q_b: DenseTensor<T>,
    pub r_a: DenseTensor<T>,
    pub r_b: DenseTensor<T>,
    pub bond: BondId,
}

impl<T: Scalar> ReducedPair<T> {
    /// The exact (untruncated) bond product `R_A R_B^T`, legs `(q_a, q_b)`.
    pub fn exact_product(&self) -> DenseTensor<T> {
        contract(&self.r_a, &self.r_b, &[(1, 1)]).expect("fused bond legs agree")
    }
}

/// Apply the two-site gate factors to `bond` and QR-reduce both sides.
///
/// The gated tensor `A·G_A` is grouped as (physical + three spectator bonds)
/// × (gate rank × bond leg) and thin-QR'd; likewise `B·G_B`. The bond-facing
/// leg of each reduced matrix has dimension `rank·D_bond`.
pub fn apply_gate_and_reduce<T: Scalar>(
    state: &IpepsState<T>,
    gate: &TrotterGate<T>,
    bond: BondId,
) -> Result<ReducedPair<T>> {
    let p = state.phys_dim();
    if gate.g_a.dim(1) != p || gate.g_b.dim(1) != p {
        return Err(Error::Shape(format!(
            "gate physical dimension {} != state physical dimension {p}",
            gate.g_a.dim(1)
        )));
    }
    let (a_rot, b_rot) = state.canonical_pair(bond);

    // A side: active leg is `right`.
    // g_a[out,in,k] * a[p,t,l,b,r] -> [out,k,t,l,b,r] -> [out,t,l,b,k,r]
    let ag = contract(&gate.g_a, &a_rot, &[(1, LEG_PHYS)])?.permuted(&[0, 2, 3, 4, 1, 5]);
    let (dp, dt, dl, db) = (ag.dim(0), ag.dim(1), ag.dim(2), ag.dim(3));
    let (rk, dr) = (ag.dim(4), ag.dim(5));
    let a_mat = ag.reshaped(vec![dp * dt * dl * db, rk * dr])?;
    let (q_a, r_a) = qr(&a_mat)?;
    let kq_a = q_a.dim(1);
    let q_a = q_a.into_reshaped(vec![dp, dt, dl, db, kq_a])?;

    // B side: active leg is `left`.
    // g_b[out,in,k] * b[p,t,l,b,r] -> [out,k,t,l,b,r] -> [out,t,b,r,k,l]
    let bg = contract(&gate.g_b, &b_rot, &[(1, LEG_PHYS)])?.permuted(&[0, 2, 4, 5, 1, 3]);
    let (dp2, dt2, db2, dr2) = (bg.dim(0), bg.dim(1), bg.dim(2), bg.dim(3));
    let (rk2, dl2) = (bg.dim(4), bg.dim(5));
    let b_mat = bg.reshaped(vec![dp2 * dt2 * db2 * dr2, rk2 * dl2])?;
    let (q_b, r_b) = qr(&b_mat)?;
    let kq_b = q_b.dim(1);
    let q_b = q_b.into_reshaped(vec![dp2, dt2, db2, dr2, kq_b])?;

    Ok(ReducedPair {
        q_a,
        q_b,
        r_a,
        r_b,
        bond,
    })
}

/// Fuse optimized bond matrices back onto the isometries and return the
/// updated, renormalized state.
///
/// `m_a`, `m_b` map the isometry legs to the new bond of dimension
/// `m_a.dim(1) == m_b.dim(1)`.
pub fn assemble<T: Scalar>(
    state: &IpepsState<T>,
    pair: &ReducedPair<T>,
    m_a: &DenseTensor<T>,
    m_b: &DenseTensor<T>,
) -> Result<IpepsState<T>> {
    if m_a.dim(1) != m_b.dim(1) {
        return Err(Error::Shape("bond dimensions of m_a and m_b differ".into()));
    }
    let a_rot = contract(&pair.q_a, m_a, &[(4, 0)])?; // [p,t,l,b,new]
    let b_rot = contract(&pair.q_b, m_b, &[(4, 0)])?; // [p,t,b,r,new]
    let b_rot = b_rot.permuted(&[0, 1, 4, 2, 3]); // -> [p,t,l,b,r]
    state.from_canonical_pair(pair.bond, a_rot, b_rot)
}
