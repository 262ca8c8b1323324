//! Corner transfer matrix renormalization for the checkerboard double-layer
//! network: environment convergence, expectation values, connected
//! correlators and correlation lengths.
//!
//! Each sublattice site carries four corner matrices (χ×χ) and four edge
//! tensors (χ×D²×χ). One sweep performs the four directional moves
//! (left/right/up/down); projectors come from the singular vectors of the
//! grown half-plane corners, two per move (one per physical cut parity of
//! the checkerboard). Convergence is detected on the normalized corner
//! spectra.
//!
//! Environments are mode-agnostic: the double-layer tensors contract bra
//! against ket over the physical leg, which is the norm network for a pure
//! state and the trace-metric network for a Hermitian-basis purification.
//! Operator insertions are supplied by the caller as `[bra, ket]` matrices.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{BondId, IpepsState};
use crate::scalar::Scalar;
use crate::tensor::{contract, linalg::leading_eigenvalues, svd_truncated, DenseTensor};

/// Sublattice index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sub {
    A,
    B,
}

impl Sub {
    pub fn other(self) -> Sub {
        match self {
            Sub::A => Sub::B,
            Sub::B => Sub::A,
        }
    }

    fn idx(self) -> usize {
        match self {
            Sub::A => 0,
            Sub::B => 1,
        }
    }
}

/// Lattice axis for correlators and correlation lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

// ---------------------------------------------------------------------------
// Double-layer tensors
// ---------------------------------------------------------------------------

/// Interleave and fuse the (ket, bra) leg pairs of `contract(t, conj t)`
/// output `[x1..xn, x1'..xn']` into `[X1..Xn]` with ket-major fusion.
fn fuse_bra_ket<T: Scalar>(t: &DenseTensor<T>) -> DenseTensor<T> {
    let half = t.rank() / 2;
    let mut perm = Vec::with_capacity(2 * half);
    for i in 0..half {
        perm.push(i);
        perm.push(half + i);
    }
    let t = t.permuted(&perm);
    let dims: Vec<usize> = (0..half).map(|i| t.dim(2 * i) * t.dim(2 * i + 1)).collect();
    t.into_reshaped(dims).expect("pair fusion preserves length")
}

/// Double-layer site tensor with legs `[up, left, down, right]` (each D²).
/// `op` is an optional `[bra, ket]` insertion on the physical leg.
pub fn site_double<T: Scalar>(
    site: &DenseTensor<T>,
    op: Option<&DenseTensor<T>>,
) -> Result<DenseTensor<T>> {
    let ket = match op {
        // Σ_a op[b,a]·site[a,..] leaves the bra index b on the physical slot.
        Some(w) => contract(w, site, &[(1, 0)])?,
        None => site.clone(),
    };
    let d = contract(&ket, &site.conj(), &[(0, 0)])?; // [t,l,b,r, t',l',b',r']
    Ok(fuse_bra_ket(&d))
}

#[derive(Debug, Clone)]
pub(crate) struct DoubleTensors<T: Scalar> {
    pub e: [DenseTensor<T>; 2],
}

impl<T: Scalar> DoubleTensors<T> {
    pub fn from_state(state: &IpepsState<T>) -> Result<Self> {
        Ok(Self {
            e: [
                site_double(state.a(), None)?,
                site_double(state.b(), None)?,
            ],
        })
    }

    fn e(&self, s: Sub) -> &DenseTensor<T> {
        &self.e[s.idx()]
    }
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Converged corner and edge tensors for both sublattices.
///
/// Leg conventions (χ legs unless noted; site-facing legs are fused D²):
/// `c_tl [r,d]`, `t_t [l,d,r]`, `c_tr [l,d]`, `t_r [u,l,d]`, `c_br [u,l]`,
/// `t_b [r,u,l]`, `c_bl [r,u]`, `t_l [d,r,u]`.
#[derive(Debug, Clone)]
pub struct CtmEnvironment<T: Scalar> {
    c_tl: [DenseTensor<T>; 2],
    t_t: [DenseTensor<T>; 2],
    c_tr: [DenseTensor<T>; 2],
    t_r: [DenseTensor<T>; 2],
    c_br: [DenseTensor<T>; 2],
    t_b: [DenseTensor<T>; 2],
    c_bl: [DenseTensor<T>; 2],
    t_l: [DenseTensor<T>; 2],
    chi: usize,
    converged: bool,
    sweeps_used: usize,
    /// Normalized corner spectra after the last sweep, for convergence tests.
    spectra: Vec<Vec<f64>>,
}

fn trace_legs<T: Scalar>(t: &DenseTensor<T>, keep: &[usize]) -> DenseTensor<T> {
    // Trace out the (ket, bra) diagonal of every leg not in `keep` of a
    // fused double tensor: here implemented via explicit sums, only used at
    // initialization on small tensors.
    let dims: Vec<usize> = keep.iter().map(|&l| t.dim(l)).collect();
    let traced: Vec<usize> = (0..t.rank()).filter(|l| !keep.contains(l)).collect();
    DenseTensor::from_fn(dims, |idx| {
        let mut full = vec![0usize; t.rank()];
        for (pos, &l) in keep.iter().enumerate() {
            full[l] = idx[pos];
        }
        let mut acc = T::zero();
        let traced_dims: Vec<usize> = traced.iter().map(|&l| side_dim(t.dim(l))).collect();
        let total: usize = traced_dims.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            for (pos, &l) in traced.iter().enumerate() {
                let d = traced_dims[pos];
                let k = rem % d;
                rem /= d;
                full[l] = k * d + k; // (ket, bra) diagonal of the fused leg
            }
            acc += t.at(&full);
        }
        acc
    })
}

fn side_dim(fused: usize) -> usize {
    let d = (fused as f64).sqrt().round() as usize;
    debug_assert_eq!(d * d, fused, "fused leg is a perfect square");
    d
}

impl<T: Scalar> CtmEnvironment<T> {
    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn sweeps_used(&self) -> usize {
        self.sweeps_used
    }

    pub fn singular_value_history(&self) -> &[Vec<f64>] {
        &self.spectra
    }

    pub fn t_t(&self, s: Sub) -> &DenseTensor<T> {
        &self.t_t[s.idx()]
    }

    pub fn t_b(&self, s: Sub) -> &DenseTensor<T> {
        &self.t_b[s.idx()]
    }

    pub fn t_l(&self, s: Sub) -> &DenseTensor<T> {
        &self.t_l[s.idx()]
    }

    pub fn t_r(&self, s: Sub) -> &DenseTensor<T> {
        &self.t_r[s.idx()]
    }

    /// `c_tl · t_l · c_bl` fused: legs `[top χ, site-facing D², bottom χ]`.
    pub fn left_cap(&self, s: Sub) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x = contract(&self.c_tl[i], &self.t_l[i], &[(1, 2)])?; // [r_c, d_tl, r_tl]
        let x = contract(&x, &self.c_bl[i], &[(1, 1)])?; // [r_c, r_tl, r_bl]
        Ok(x)
    }

    /// `c_tr · t_r · c_br` fused: legs `[top χ, site-facing D², bottom χ]`.
    pub fn right_cap(&self, s: Sub) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x = contract(&self.c_tr[i], &self.t_r[i], &[(1, 0)])?; // [l_c, l_tr, d_tr]
        let x = contract(&x, &self.c_br[i], &[(2, 0)])?; // [l_c, l_tr, l_br]
        Ok(x)
    }

    /// `c_tl · t_t · c_tr` fused: legs `[left χ, site-facing D², right χ]`.
    fn top_cap(&self, s: Sub) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x = contract(&self.c_tl[i], &self.t_t[i], &[(0, 0)])?; // [d_c, d_tt, r_tt]
        let x = contract(&x, &self.c_tr[i], &[(2, 0)])?; // [d_c, d_tt, d_ctr]
        Ok(x)
    }

    /// `c_bl · t_b · c_br` fused: legs `[left χ, site-facing D², right χ]`.
    fn bottom_cap(&self, s: Sub) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x = contract(&self.c_bl[i], &self.t_b[i], &[(0, 2)])?; // [u_c, r_tb, u_tb]
        let x = contract(&x, &self.c_br[i], &[(1, 1)])?; // [u_c, u_tb, u_cbr]
        Ok(x.permuted(&[0, 1, 2]))
    }

    /// Relabel the environment into the canonical frame of `bond`, matching
    /// the site-tensor rotations of [`IpepsState::canonical_pair`].
    pub fn rotated_for_bond(&self, bond: BondId) -> Self {
        match bond {
            BondId::HorizontalAB => self.clone(),
            BondId::HorizontalBA => self.mirrored_lr(),
            BondId::VerticalAB => self.rotated_ccw(),
            BondId::VerticalBA => self.rotated_cw(),
        }
    }

    fn mirrored_lr(&self) -> Self {
        let map2 = |t: &DenseTensor<T>| t.permuted(&[1, 0]);
        let map3 = |t: &DenseTensor<T>| t.permuted(&[2, 1, 0]);
        Self {
            c_tl: self.c_tr.clone(),
            c_tr: self.c_tl.clone(),
            c_bl: [map2(&self.c_br[0]), map2(&self.c_br[1])],
            c_br: [map2(&self.c_bl[0]), map2(&self.c_bl[1])],
            t_t: [map3(&self.t_t[0]), map3(&self.t_t[1])],
            t_b: [map3(&self.t_b[0]), map3(&self.t_b[1])],
            t_l: [map3(&self.t_r[0]), map3(&self.t_r[1])],
            t_r: [map3(&self.t_l[0]), map3(&self.t_l[1])],
            chi: self.chi,
            converged: self.converged,
            sweeps_used: self.sweeps_used,
            spectra: self.spectra.clone(),
        }
    }

    fn rotated_ccw(&self) -> Self {
        let map2 = |t: &DenseTensor<T>| t.permuted(&[1, 0]);
        Self {
            c_tl: [map2(&self.c_tr[0]), map2(&self.c_tr[1])],
            t_t: self.t_r.clone(),
            c_tr: self.c_br.clone(),
            t_r: self.t_b.clone(),
            c_br: self.c_bl.clone(),
            t_b: self.t_l.clone(),
            c_bl: [map2(&self.c_tl[0]), map2(&self.c_tl[1])],
            t_l: self.t_t.clone(),
            chi: self.chi,
            converged: self.converged,
            sweeps_used: self.sweeps_used,
            spectra: self.spectra.clone(),
        }
    }

    fn rotated_cw(&self) -> Self {
        let map2 = |t: &DenseTensor<T>| t.permuted(&[1, 0]);
        Self {
            c_tl: [map2(&self.c_bl[0]), map2(&self.c_bl[1])],
            t_t: self.t_l.clone(),
            c_tr: [map2(&self.c_tl[0]), map2(&self.c_tl[1])],
            t_r: self.t_t.clone(),
            c_br: self.c_tr.clone(),
            t_b: self.t_r.clone(),
            c_bl: self.c_br.clone(),
            t_l: self.t_b.clone(),
            chi: self.chi,
            converged: self.converged,
            sweeps_used: self.sweeps_used,
            spectra: self.spectra.clone(),
        }
    }

    fn init(doubles: &DoubleTensors<T>, chi: usize) -> Self {
        let corner = |s: Sub, keep: [usize; 2]| trace_legs(doubles.e(s), &keep);
        let edge = |s: Sub, keep: [usize; 3]| trace_legs(doubles.e(s), &keep);
        // Site legs: [u, l, d, r]. Corners come from the diagonal neighbor
        // (same sublattice), edges from the adjacent neighbor (opposite).
        Self {
            c_tl: [corner(Sub::A, [2, 3]), corner(Sub::B, [2, 3])], // [d, r] -> [r, d]? see below
            t_t: [edge(Sub::B, [1, 2, 3]), edge(Sub::A, [1, 2, 3])], // [l, d, r]
            c_tr: [corner(Sub::A, [1, 2]), corner(Sub::B, [1, 2])], // [l, d]
            t_r: [edge(Sub::B, [0, 1, 2]), edge(Sub::A, [0, 1, 2])], // [u, l, d]
            c_br: [corner(Sub::A, [0, 1]), corner(Sub::B, [0, 1])], // [u, l]
            t_b: [
                edge(Sub::B, [3, 0, 1]),
                edge(Sub::A, [3, 0, 1]),
            ], // [r, u, l]
            c_bl: [
                corner(Sub::A, [3, 0]),
                corner(Sub::B, [3, 0]),
            ], // [r, u]
            t_l: [
                edge(Sub::B, [2, 3, 0]),
                edge(Sub::A, [2, 3, 0]),
            ], // [d, r, u]
            chi,
            converged: false,
            sweeps_used: 0,
            spectra: Vec::new(),
        }
        .fixup_tl_init()
    }

    fn fixup_tl_init(mut self) -> Self {
        // trace_legs(.., [2,3]) yields [d, r]; the convention is [r, d].
        for t in &mut self.c_tl {
            *t = t.permuted(&[1, 0]);
        }
        self
    }

    fn normalize_all(&mut self) -> Result<()> {
        for group in [
            &mut self.c_tl,
            &mut self.t_t,
            &mut self.c_tr,
            &mut self.t_r,
            &mut self.c_br,
            &mut self.t_b,
            &mut self.c_bl,
            &mut self.t_l,
        ] {
            for t in group.iter_mut() {
                if !t.is_finite() {
                    return Err(Error::CtmrgDiverged);
                }
                let m = t.max_abs();
                if m > 0.0 {
                    t.scale_mut(T::from_real(1.0 / m));
                }
            }
        }
        Ok(())
    }

    fn corner_spectra(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(8);
        for group in [&self.c_tl, &self.c_tr, &self.c_br, &self.c_bl] {
            for t in group.iter() {
                let svd = svd_truncated(t, self.chi.max(1), 0.0)?;
                let s0 = svd.s.first().copied().unwrap_or(0.0).max(1e-300);
                let mut s: Vec<f64> = svd.s.iter().map(|x| x / s0).collect();
                s.resize(self.chi, 0.0);
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Biorthogonal projector pair for one cut, from the SVD of the
    /// half-plane overlap `M = r_first^T · r_second`.
    ///
    /// Both grown pieces map the fused cut leg (their leg 0) to a boundary
    /// leg. Returns `(p_first, p_second)` with the oblique insertion
    /// `p_first · p_second^T ≈ 1` on the cut: legs on the `r_first` side
    /// contract `p_first`, legs on the `r_second` side contract `p_second`,
    /// and `r_first^T · p_first · p_second^T · r_second` reproduces the
    /// overlap exactly at full rank.
    fn oblique_pair(
        r_first: &DenseTensor<T>,
        r_second: &DenseTensor<T>,
        chi: usize,
    ) -> Result<(DenseTensor<T>, DenseTensor<T>)> {
        let m = contract(&r_first.transposed(), r_second, &[(1, 0)])?;
        let svd = svd_truncated(&m, chi, 1e-12)?;
        if svd.s[0] <= 0.0 {
            return Err(Error::CtmrgDiverged);
        }
        let k = svd.rank();
        let s_isqrt: Vec<f64> = svd.s.iter().map(|&s| 1.0 / s.sqrt()).collect();
        // p_first = r_second · vt† · S^{-1/2}; p_second = r_first · conj(u) · S^{-1/2}
        let mut vtd = svd.vt.dagger();
        for i in 0..vtd.dim(0) {
            for j in 0..k {
                let v = vtd.data()[i * k + j] * T::from_real(s_isqrt[j]);
                vtd.data_mut()[i * k + j] = v;
            }
        }
        let mut uc = svd.u.conj();
        for i in 0..uc.dim(0) {
            for j in 0..k {
                let v = uc.data()[i * k + j] * T::from_real(s_isqrt[j]);
                uc.data_mut()[i * k + j] = v;
            }
        }
        let p_first = contract(r_second, &vtd, &[(1, 0)])?;
        let p_second = contract(r_first, &uc, &[(1, 0)])?;
        Ok((p_first, p_second))
    }

    /// Upper-left quarter around one site: corner, both adjacent edges and
    /// the site double tensor. Legs `[d_chi, d_D2, r_chi, r_D2]`.
    fn quarter_tl(&self, s: Sub, doubles: &DoubleTensors<T>) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x1 = contract(&self.c_tl[i], &self.t_t[i], &[(0, 0)])?; // [d_c, d_tt, r_tt]
        let x2 = contract(&self.t_l[i], doubles.e(s), &[(1, 1)])?; // [d_tl, u_tl, u_E, d_E, r_E]
        let q = contract(&x1, &x2, &[(0, 1), (1, 2)])?; // [r_tt, d_tl, d_E, r_E]
        Ok(q.permuted(&[1, 2, 0, 3]))
    }

    /// Lower-left quarter. Legs `[u_chi, u_D2, r_chi, r_D2]`.
    fn quarter_bl(&self, s: Sub, doubles: &DoubleTensors<T>) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x1 = contract(&self.c_bl[i], &self.t_b[i], &[(0, 2)])?; // [u_c, r_tb, u_tb]
        let x2 = contract(&self.t_l[i], doubles.e(s), &[(1, 1)])?; // [d_tl, u_tl, u_E, d_E, r_E]
        let q = contract(&x1, &x2, &[(0, 0), (2, 3)])?; // [r_tb, u_tl, u_E, r_E]
        Ok(q.permuted(&[1, 2, 0, 3]))
    }

    /// Upper-right quarter. Legs `[d_chi, d_D2, l_chi, l_D2]`.
    fn quarter_tr(&self, s: Sub, doubles: &DoubleTensors<T>) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x1 = contract(&self.c_tr[i], &self.t_t[i], &[(0, 2)])?; // [d_c, l_tt, d_tt]
        let x2 = contract(&self.t_r[i], doubles.e(s), &[(1, 3)])?; // [u_tr, d_tr, u_E, l_E, d_E]
        let q = contract(&x1, &x2, &[(0, 0), (2, 2)])?; // [l_tt, d_tr, l_E, d_E]
        Ok(q.permuted(&[1, 3, 0, 2]))
    }

    /// Lower-right quarter. Legs `[u_chi, u_D2, l_chi, l_D2]`.
    fn quarter_br(&self, s: Sub, doubles: &DoubleTensors<T>) -> Result<DenseTensor<T>> {
        let i = s.idx();
        let x1 = contract(&self.c_br[i], &self.t_b[i], &[(1, 0)])?; // [u_c, u_tb, l_tb]
        let x2 = contract(&self.t_r[i], doubles.e(s), &[(1, 3)])?; // [u_tr, d_tr, u_E, l_E, d_E]
        let q = contract(&x1, &x2, &[(0, 1), (1, 4)])?; // [l_tb, u_tr, u_E, l_E]
        Ok(q.permuted(&[1, 2, 0, 3]))
    }

    /// Group a rank-4 quarter `[a1, a2, b1, b2]` into the matrix
    /// `(a1 a2) x (b1 b2)`.
    fn group_front(q: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        q.reshaped(vec![q.dim(0) * q.dim(1), q.dim(2) * q.dim(3)])
    }

    /// Group a rank-4 quarter `[a1, a2, b1, b2]` into `(b1 b2) x (a1 a2)`.
    fn group_back(q: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        Self::group_front(&q.permuted(&[2, 3, 0, 1]))
    }

    fn left_move(&mut self, doubles: &DoubleTensors<T>) -> Result<()> {
        let grown = |s: Sub| -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let o = s.other().idx();
            let ctl = contract(&self.c_tl[o], &self.t_t[o], &[(0, 0)])?; // [d_c, d_t, r]
            let d0 = ctl.dim(0) * ctl.dim(1);
            let ctl = ctl.into_reshaped(vec![d0, self.t_t[o].dim(2)])?;
            let tl = contract(&self.t_l[o], doubles.e(s.other()), &[(1, 1)])? // [d,u, uE,dE,rE]
                .permuted(&[1, 2, 0, 3, 4]); // [u, uE, d, dE, r]
            let (u1, u2, d1, d2, r) = (tl.dim(0), tl.dim(1), tl.dim(2), tl.dim(3), tl.dim(4));
            let tl = tl.into_reshaped(vec![u1 * u2, d1 * d2, r])?;
            let cbl = contract(&self.c_bl[o], &self.t_b[o], &[(0, 2)])? // [u_c, r_tb, u_tb]
                .permuted(&[0, 2, 1]); // [u_c, u_tb, r]
            let d0 = cbl.dim(0) * cbl.dim(1);
            let cbl = cbl.into_reshaped(vec![d0, self.t_b[o].dim(0)])?;
            Ok((ctl, tl, cbl))
        };
        let (ctl_a, tl_a, cbl_a) = grown(Sub::A)?;
        let (ctl_b, tl_b, cbl_b) = grown(Sub::B)?;

        // cut types: v_ab = A-top / B-bottom, v_ba = B-top / A-bottom;
        // `first` attaches to the northern side of each cut. The half-plane
        // pieces are full quarters around the absorbed column's sites.
        let q_tl_a = Self::group_front(&self.quarter_tl(Sub::A, doubles)?)?;
        let q_tl_b = Self::group_front(&self.quarter_tl(Sub::B, doubles)?)?;
        let q_bl_a = Self::group_front(&self.quarter_bl(Sub::A, doubles)?)?;
        let q_bl_b = Self::group_front(&self.quarter_bl(Sub::B, doubles)?)?;
        let (p1f, p1s) = Self::oblique_pair(&q_tl_a, &q_bl_b, self.chi)?;
        let (p2f, p2s) = Self::oblique_pair(&q_tl_b, &q_bl_a, self.chi)?;

        let update = |ctl: &DenseTensor<T>,
                      tl: &DenseTensor<T>,
                      cbl: &DenseTensor<T>,
                      top_n: &DenseTensor<T>,   // northern attachment of the top cut
                      top_s: &DenseTensor<T>,   // southern attachment of the top cut
                      bot_n: &DenseTensor<T>,
                      bot_s: &DenseTensor<T>|
         -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let new_ctl = contract(&top_n.transposed(), ctl, &[(1, 0)])?.permuted(&[1, 0]); // [r, d]
            let x = contract(&top_s.transposed(), tl, &[(1, 0)])?; // [u', d_f, r]
            let new_tl = contract(&x, bot_n, &[(1, 0)])?.permuted(&[2, 1, 0]); // [d, r, u]
            let new_cbl = contract(&bot_s.transposed(), cbl, &[(1, 0)])?.permuted(&[1, 0]); // [r, u]
            Ok((new_ctl, new_tl, new_cbl))
        };
        // A: top cut v_ab, bottom cut v_ba; B: swapped.
        let (ctl_a2, tl_a2, cbl_a2) = update(&ctl_a, &tl_a, &cbl_a, &p1f, &p1s, &p2f, &p2s)?;
        let (ctl_b2, tl_b2, cbl_b2) = update(&ctl_b, &tl_b, &cbl_b, &p2f, &p2s, &p1f, &p1s)?;
        self.c_tl = [ctl_a2, ctl_b2];
        self.t_l = [tl_a2, tl_b2];
        self.c_bl = [cbl_a2, cbl_b2];
        self.normalize_all()
    }

    fn right_move(&mut self, doubles: &DoubleTensors<T>) -> Result<()> {
        let grown = |s: Sub| -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let o = s.other().idx();
            let ctr = contract(&self.c_tr[o], &self.t_t[o], &[(0, 2)])? // [d_c, l_t, d_t]
                .permuted(&[0, 2, 1]); // [d_c, d_t, l]
            let d0 = ctr.dim(0) * ctr.dim(1);
            let ctr = ctr.into_reshaped(vec![d0, self.t_t[o].dim(0)])?;
            let tr = contract(&self.t_r[o], doubles.e(s.other()), &[(1, 3)])? // [u,d, uE,lE,dE]
                .permuted(&[0, 2, 1, 4, 3]); // [u, uE, d, dE, l]
            let (u1, u2, d1, d2, l) = (tr.dim(0), tr.dim(1), tr.dim(2), tr.dim(3), tr.dim(4));
            let tr = tr.into_reshaped(vec![u1 * u2, d1 * d2, l])?;
            let cbr = contract(&self.c_br[o], &self.t_b[o], &[(1, 0)])?; // [u_c, u_tb, l]
            let d0 = cbr.dim(0) * cbr.dim(1);
            let cbr = cbr.into_reshaped(vec![d0, self.t_b[o].dim(2)])?;
            Ok((ctr, tr, cbr))
        };
        let (ctr_a, tr_a, cbr_a) = grown(Sub::A)?;
        let (ctr_b, tr_b, cbr_b) = grown(Sub::B)?;

        let q_tr_a = Self::group_front(&self.quarter_tr(Sub::A, doubles)?)?;
        let q_tr_b = Self::group_front(&self.quarter_tr(Sub::B, doubles)?)?;
        let q_br_a = Self::group_front(&self.quarter_br(Sub::A, doubles)?)?;
        let q_br_b = Self::group_front(&self.quarter_br(Sub::B, doubles)?)?;
        let (p1f, p1s) = Self::oblique_pair(&q_tr_a, &q_br_b, self.chi)?;
        let (p2f, p2s) = Self::oblique_pair(&q_tr_b, &q_br_a, self.chi)?;

        let update = |ctr: &DenseTensor<T>,
                      tr: &DenseTensor<T>,
                      cbr: &DenseTensor<T>,
                      top_n: &DenseTensor<T>,
                      top_s: &DenseTensor<T>,
                      bot_n: &DenseTensor<T>,
                      bot_s: &DenseTensor<T>|
         -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let new_ctr = contract(&top_n.transposed(), ctr, &[(1, 0)])?.permuted(&[1, 0]); // [l, d]
            let x = contract(&top_s.transposed(), tr, &[(1, 0)])?; // [u', d_f, l]
            let new_tr = contract(&x, bot_n, &[(1, 0)])?; // [u, l, d]
            let new_cbr = contract(&bot_s.transposed(), cbr, &[(1, 0)])?; // [u, l]
            Ok((new_ctr, new_tr, new_cbr))
        };
        let (ctr_a2, tr_a2, cbr_a2) = update(&ctr_a, &tr_a, &cbr_a, &p1f, &p1s, &p2f, &p2s)?;
        let (ctr_b2, tr_b2, cbr_b2) = update(&ctr_b, &tr_b, &cbr_b, &p2f, &p2s, &p1f, &p1s)?;
        self.c_tr = [ctr_a2, ctr_b2];
        self.t_r = [tr_a2, tr_b2];
        self.c_br = [cbr_a2, cbr_b2];
        self.normalize_all()
    }

    fn up_move(&mut self, doubles: &DoubleTensors<T>) -> Result<()> {
        let grown = |s: Sub| -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let o = s.other().idx();
            let ctl = contract(&self.c_tl[o], &self.t_l[o], &[(1, 2)])? // [r_c, d_tl, r_tl]
                .permuted(&[0, 2, 1]); // [r_c, r_tl, d]
            let d0 = ctl.dim(0) * ctl.dim(1);
            let ctl = ctl.into_reshaped(vec![d0, self.t_l[o].dim(0)])?;
            let tt = contract(&self.t_t[o], doubles.e(s.other()), &[(1, 0)])? // [l,r, lE,dE,rE]
                .permuted(&[0, 2, 1, 4, 3]); // [l, lE, r, rE, d]
            let (l1, l2, r1, r2, d) = (tt.dim(0), tt.dim(1), tt.dim(2), tt.dim(3), tt.dim(4));
            let tt = tt.into_reshaped(vec![l1 * l2, r1 * r2, d])?;
            let ctr = contract(&self.c_tr[o], &self.t_r[o], &[(1, 0)])?; // [l_c, l_tr, d]
            let d0 = ctr.dim(0) * ctr.dim(1);
            let ctr = ctr.into_reshaped(vec![d0, self.t_r[o].dim(2)])?;
            Ok((ctl, tt, ctr))
        };
        let (ctl_a, tt_a, ctr_a) = grown(Sub::A)?;
        let (ctl_b, tt_b, ctr_b) = grown(Sub::B)?;

        // cut types: h_ab = A-left / B-right, h_ba = B-left / A-right;
        // `first` attaches to the western side of each cut.
        let q_tl_a = Self::group_back(&self.quarter_tl(Sub::A, doubles)?)?;
        let q_tl_b = Self::group_back(&self.quarter_tl(Sub::B, doubles)?)?;
        let q_tr_a = Self::group_back(&self.quarter_tr(Sub::A, doubles)?)?;
        let q_tr_b = Self::group_back(&self.quarter_tr(Sub::B, doubles)?)?;
        let (p1f, p1s) = Self::oblique_pair(&q_tl_a, &q_tr_b, self.chi)?;
        let (p2f, p2s) = Self::oblique_pair(&q_tl_b, &q_tr_a, self.chi)?;

        let update = |ctl: &DenseTensor<T>,
                      tt: &DenseTensor<T>,
                      ctr: &DenseTensor<T>,
                      left_w: &DenseTensor<T>,
                      left_e: &DenseTensor<T>,
                      right_w: &DenseTensor<T>,
                      right_e: &DenseTensor<T>|
         -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let new_ctl = contract(&left_w.transposed(), ctl, &[(1, 0)])?; // [r, d]
            let x = contract(&left_e.transposed(), tt, &[(1, 0)])?; // [l', r_f, d]
            let new_tt = contract(&x, right_w, &[(1, 0)])?; // [l, d, r]
            let new_ctr = contract(&right_e.transposed(), ctr, &[(1, 0)])?; // [l, d]
            Ok((new_ctl, new_tt, new_ctr))
        };
        let (ctl_a2, tt_a2, ctr_a2) = update(&ctl_a, &tt_a, &ctr_a, &p1f, &p1s, &p2f, &p2s)?;
        let (ctl_b2, tt_b2, ctr_b2) = update(&ctl_b, &tt_b, &ctr_b, &p2f, &p2s, &p1f, &p1s)?;
        self.c_tl = [ctl_a2, ctl_b2];
        self.t_t = [tt_a2, tt_b2];
        self.c_tr = [ctr_a2, ctr_b2];
        self.normalize_all()
    }

    fn down_move(&mut self, doubles: &DoubleTensors<T>) -> Result<()> {
        let grown = |s: Sub| -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let o = s.other().idx();
            let cbl = contract(&self.c_bl[o], &self.t_l[o], &[(1, 0)])?; // [r_c, r_tl, u]
            let d0 = cbl.dim(0) * cbl.dim(1);
            let cbl = cbl.into_reshaped(vec![d0, self.t_l[o].dim(2)])?;
            let tb = contract(&self.t_b[o], doubles.e(s.other()), &[(1, 2)])? // [r,l, uE,lE,rE]
                .permuted(&[0, 4, 2, 1, 3]); // [r, rE, u, l, lE]
            let (r1, r2, u, l1, l2) = (tb.dim(0), tb.dim(1), tb.dim(2), tb.dim(3), tb.dim(4));
            let tb = tb.into_reshaped(vec![r1 * r2, u, l1 * l2])?;
            let cbr = contract(&self.c_br[o], &self.t_r[o], &[(0, 2)])? // [l_c, u_tr, l_tr]
                .permuted(&[0, 2, 1]); // [l_c, l_tr, u]
            let d0 = cbr.dim(0) * cbr.dim(1);
            let cbr = cbr.into_reshaped(vec![d0, self.t_r[o].dim(0)])?;
            Ok((cbl, tb, cbr))
        };
        let (cbl_a, tb_a, cbr_a) = grown(Sub::A)?;
        let (cbl_b, tb_b, cbr_b) = grown(Sub::B)?;

        let q_bl_a = Self::group_back(&self.quarter_bl(Sub::A, doubles)?)?;
        let q_bl_b = Self::group_back(&self.quarter_bl(Sub::B, doubles)?)?;
        let q_br_a = Self::group_back(&self.quarter_br(Sub::A, doubles)?)?;
        let q_br_b = Self::group_back(&self.quarter_br(Sub::B, doubles)?)?;
        let (p1f, p1s) = Self::oblique_pair(&q_bl_a, &q_br_b, self.chi)?;
        let (p2f, p2s) = Self::oblique_pair(&q_bl_b, &q_br_a, self.chi)?;

        let update = |cbl: &DenseTensor<T>,
                      tb: &DenseTensor<T>,
                      cbr: &DenseTensor<T>,
                      left_w: &DenseTensor<T>,
                      left_e: &DenseTensor<T>,
                      right_w: &DenseTensor<T>,
                      right_e: &DenseTensor<T>|
         -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
            let new_cbl = contract(&left_w.transposed(), cbl, &[(1, 0)])?; // [r, u]
            // tb legs: [r_f, u, l_f]; r is on its right (west of the right
            // cut), l on its left (east of the left cut).
            let x = contract(&right_w.transposed(), tb, &[(1, 0)])?; // [r', u, l_f]
            let new_tb = contract(&x, left_e, &[(2, 0)])?; // [r, u, l]
            let new_cbr = contract(&right_e.transposed(), cbr, &[(1, 0)])?.permuted(&[1, 0]); // [u, l]
            Ok((new_cbl, new_tb, new_cbr))
        };
        let (cbl_a2, tb_a2, cbr_a2) = update(&cbl_a, &tb_a, &cbr_a, &p1f, &p1s, &p2f, &p2s)?;
        let (cbl_b2, tb_b2, cbr_b2) = update(&cbl_b, &tb_b, &cbr_b, &p2f, &p2s, &p1f, &p1s)?;
        self.c_bl = [cbl_a2, cbl_b2];
        self.t_b = [tb_a2, tb_b2];
        self.c_br = [cbr_a2, cbr_b2];
        self.normalize_all()
    }
}

/// Converge the environment of `state` at dimension `chi`.
///
/// Directional moves run until the normalized corner spectra change by less
/// than `tol` between sweeps or `max_sweeps` is exhausted; the `converged`
/// flag records which. Convergence starts cold from traced double tensors,
/// so results are reproducible functions of the state alone.
pub fn converge<T: Scalar>(
    state: &IpepsState<T>,
    chi: usize,
    tol: f64,
    max_sweeps: usize,
) -> Result<CtmEnvironment<T>> {
    assert!(chi >= 1);
    let doubles = DoubleTensors::from_state(state)?;
    let mut env = CtmEnvironment::init(&doubles, chi);
    env.normalize_all()?;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    for sweep in 1..=max_sweeps {
        env.left_move(&doubles)?;
        env.right_move(&doubles)?;
        env.up_move(&doubles)?;
        env.down_move(&doubles)?;
        env.sweeps_used = sweep;
        let spectra = env.corner_spectra()?;
        if let Some(p) = &prev {
            let diff = p
                .iter()
                .zip(&spectra)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0f64, f64::max);
            if diff < tol {
                env.converged = true;
                env.spectra = spectra;
                return Ok(env);
            }
        }
        prev = Some(spectra);
    }
    env.spectra = prev.unwrap_or_default();
    Ok(env)
}

// ---------------------------------------------------------------------------
// Expectation values
// ---------------------------------------------------------------------------

/// Column transfer piece for site `s`: `t_t · E · t_b` with legs
/// `[(l χ, l D², l χ), (r χ, r D², r χ)]` fused into two legs.
fn column<T: Scalar>(
    env: &CtmEnvironment<T>,
    s: Sub,
    e_site: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    let x = contract(env.t_t(s), e_site, &[(1, 0)])?; // [l_tt, r_tt, lE, dE, rE]
    let x = contract(&x, env.t_b(s), &[(3, 1)])?; // [l_tt, r_tt, lE, rE, r_tb, l_tb]
    let x = x.permuted(&[0, 2, 5, 1, 3, 4]); // [l3 | r3]
    let l = x.dim(0) * x.dim(1) * x.dim(2);
    let r = x.dim(3) * x.dim(4) * x.dim(5);
    x.into_reshaped(vec![l, r])
}

fn cap_vec<T: Scalar>(cap: DenseTensor<T>) -> DenseTensor<T> {
    let n = cap.len();
    cap.into_reshaped(vec![n]).expect("cap fuse")
}

/// Ring value around a row of sites starting at sublattice `start`, with the
/// given per-column double tensors.
fn row_value<T: Scalar>(
    env: &CtmEnvironment<T>,
    start: Sub,
    cols: &[DenseTensor<T>],
) -> Result<T> {
    let mut v = cap_vec(env.left_cap(start)?);
    for col in cols {
        v = contract(&v, col, &[(0, 0)])?;
    }
    let mut s = start;
    for _ in 1..cols.len() {
        s = s.other();
    }
    let rcap = cap_vec(env.right_cap(s)?);
    let out = contract(&v, &rcap, &[(0, 0)])?;
    Ok(out.data()[0])
}

/// One-site expectation on sublattice `s`: ratio of the operator-inserted
/// ring to the norm ring. `op` is a `[bra, ket]` insertion matrix.
pub fn expect_one_site_sub<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    s: Sub,
    op: &DenseTensor<T>,
) -> Result<f64> {
    let site = match s {
        Sub::A => state.a(),
        Sub::B => state.b(),
    };
    let e_plain = site_double(site, None)?;
    let e_op = site_double(site, Some(op))?;
    let num = row_value(env, s, &[column(env, s, &e_op)?])?;
    let den = row_value(env, s, &[column(env, s, &e_plain)?])?;
    ratio(num, den)
}

/// One-site expectation averaged over the two sublattices.
pub fn expect_one_site<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    op: &DenseTensor<T>,
) -> Result<f64> {
    Ok((expect_one_site_sub(env, state, Sub::A, op)?
        + expect_one_site_sub(env, state, Sub::B, op)?)
        / 2.0)
}

fn ratio<T: Scalar>(num: T, den: T) -> Result<f64> {
    let d = den.modulus();
    if !d.is_finite() || d < 1e-280 {
        return Err(Error::IllConditionedState);
    }
    Ok((num / den).real())
}

/// Two-site expectation `⟨op_left ⊗ op_right⟩` on the given bond; the ops
/// attach to the bond's left/top and right/bottom sites respectively.
pub fn expect_two_site<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    bond: BondId,
    op_left: &DenseTensor<T>,
    op_right: &DenseTensor<T>,
) -> Result<f64> {
    // Rotate everything into the canonical horizontal frame of the bond.
    let env_r = env.rotated_for_bond(bond);
    let (a_rot, b_rot) = state.canonical_pair(bond);
    let ea_op = site_double(&a_rot, Some(op_left))?;
    let eb_op = site_double(&b_rot, Some(op_right))?;
    let ea = site_double(&a_rot, None)?;
    let eb = site_double(&b_rot, None)?;
    let num = row_value(
        &env_r,
        Sub::A,
        &[column(&env_r, Sub::A, &ea_op)?, column(&env_r, Sub::B, &eb_op)?],
    )?;
    let den = row_value(
        &env_r,
        Sub::A,
        &[column(&env_r, Sub::A, &ea)?, column(&env_r, Sub::B, &eb)?],
    )?;
    ratio(num, den)
}

/// Insertion matrices for the observables of one scalar mode.
#[derive(Debug, Clone)]
pub struct PauliInsertions<T: Scalar> {
    pub sx: DenseTensor<T>,
    pub sz: DenseTensor<T>,
}

/// Energy per site of the quantum Ising model:
/// `-J (⟨σzσz⟩_h + ⟨σzσz⟩_v) - h_x ⟨σx⟩ - h_z ⟨σz⟩` with the bond averages
/// over the two inequivalent bonds of each orientation (two bonds per site).
pub fn energy_per_site<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    params: &crate::gates::ModelParams,
    ins: &PauliInsertions<T>,
) -> Result<f64> {
    let zz_h = (expect_two_site(env, state, BondId::HorizontalAB, &ins.sz, &ins.sz)?
        + expect_two_site(env, state, BondId::HorizontalBA, &ins.sz, &ins.sz)?)
        / 2.0;
    let zz_v = (expect_two_site(env, state, BondId::VerticalAB, &ins.sz, &ins.sz)?
        + expect_two_site(env, state, BondId::VerticalBA, &ins.sz, &ins.sz)?)
        / 2.0;
    let sx = expect_one_site(env, state, &ins.sx)?;
    let sz = expect_one_site(env, state, &ins.sz)?;
    Ok(-params.coupling * (zz_h + zz_v) - params.hx * sx - params.hz * sz)
}

/// Connected correlator `⟨op1_n op2_{n+R}⟩ - ⟨op1_n⟩⟨op2_{n+R}⟩` along a
/// lattice axis, with the first operator on an A site.
pub fn connected_correlator<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    op1: &DenseTensor<T>,
    op2: &DenseTensor<T>,
    r: usize,
    axis: Axis,
) -> Result<f64> {
    assert!(r >= 1, "separation must be at least 1");
    let (env_r, state_r) = match axis {
        Axis::Horizontal => (env.clone(), state.clone()),
        Axis::Vertical => {
            let (a, b) = state.canonical_pair(BondId::VerticalAB);
            (
                env.rotated_for_bond(BondId::VerticalAB),
                IpepsState::with_log(a, b, state.normalization_log())?,
            )
        }
    };
    let sub_at = |k: usize| if k % 2 == 0 { Sub::A } else { Sub::B };
    let site = |s: Sub| match s {
        Sub::A => state_r.a(),
        Sub::B => state_r.b(),
    };
    let mut cols_num = Vec::with_capacity(r + 1);
    let mut cols_den = Vec::with_capacity(r + 1);
    for k in 0..=r {
        let s = sub_at(k);
        let op = if k == 0 {
            Some(op1)
        } else if k == r {
            Some(op2)
        } else {
            None
        };
        cols_num.push(column(&env_r, s, &site_double(site(s), op)?)?);
        cols_den.push(column(&env_r, s, &site_double(site(s), None)?)?);
    }
    let num = row_value(&env_r, Sub::A, &cols_num)?;
    let den = row_value(&env_r, Sub::A, &cols_den)?;
    let joint = ratio(num, den)?;
    let m1 = expect_one_site_sub(&env_r, &state_r, Sub::A, op1)?;
    let m2 = expect_one_site_sub(&env_r, &state_r, sub_at(r), op2)?;
    Ok(joint - m1 * m2)
}

/// Correlation length from the two leading eigenvalues of the row-to-row
/// transfer operator built from edge tensors (one checkerboard period = two
/// columns, so `ξ = 2 / ln|λ0/λ1|` in lattice units).
///
/// Returns 0 when the subleading eigenvalue vanishes (product states) and
/// infinity when the two leading eigenvalues are degenerate to 1e-12.
pub fn correlation_length<T: Scalar>(
    env: &CtmEnvironment<T>,
    state: &IpepsState<T>,
    axis: Axis,
) -> Result<f64> {
    let (env_r, state_r) = match axis {
        Axis::Horizontal => (env.clone(), state.clone()),
        Axis::Vertical => {
            let (a, b) = state.canonical_pair(BondId::VerticalAB);
            (
                env.rotated_for_bond(BondId::VerticalAB),
                IpepsState::with_log(a, b, state.normalization_log())?,
            )
        }
    };
    let ea = site_double(state_r.a(), None)?;
    let eb = site_double(state_r.b(), None)?;
    let chi_t = env_r.t_t(Sub::A).dim(0);
    let dmid = ea.dim(1);
    let chi_b = env_r.t_b(Sub::A).dim(2);
    let dim = chi_t * dmid * chi_b;
    if dim == 1 {
        return Ok(0.0);
    }

    // One-column application as three small contractions, complexified so a
    // single Arnoldi implementation serves both scalar kinds.
    let apply_col = |s: Sub, e: &DenseTensor<T>, v: &DenseTensor<Complex64>| {
        let tt = complexify(env_r.t_t(s));
        let eb = complexify(e);
        let tb = complexify(env_r.t_b(s));
        let x = contract(&tt, v, &[(0, 0)]).unwrap(); // [d, r, l2, l3]
        let x = contract(&x, &eb, &[(0, 0), (2, 1)]).unwrap(); // [r_tt, l3, dE, rE]
        let x = contract(&x, &tb, &[(1, 2), (2, 1)]).unwrap(); // [r_tt, rE, r_tb]
        x
    };
    let matvec = |vflat: &[Complex64]| -> Vec<Complex64> {
        let v = DenseTensor::new(vec![chi_t, ea.dim(1), chi_b], vflat.to_vec()).unwrap();
        let v = apply_col(Sub::A, &ea, &v);
        let v = apply_col(Sub::B, &eb, &v);
        v.data().to_vec()
    };
    let eigs = leading_eigenvalues(dim, 2, matvec)?;
    if eigs.len() < 2 {
        return Ok(0.0);
    }
    let l0 = eigs[0].norm();
    let l1 = eigs[1].norm();
    if l0 <= 0.0 {
        return Err(Error::IllConditionedState);
    }
    if l1 / l0 > 1.0 - 1e-12 {
        return Ok(f64::INFINITY);
    }
    if l1 <= 1e-14 * l0 {
        return Ok(0.0);
    }
    Ok(2.0 / (l0 / l1).ln())
}

fn complexify<T: Scalar>(t: &DenseTensor<T>) -> DenseTensor<Complex64> {
    DenseTensor::new(
        t.dims().to_vec(),
        t.data()
            .iter()
            .map(|x| Complex64::new(x.real(), x.imaginary()))
            .collect(),
    )
    .expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{pauli_x, pauli_z};
    use crate::lattice::initial_product_state;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plus_state() -> IpepsState<Complex64> {
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        initial_product_state(2, &[s2, s2]).unwrap()
    }

    fn zero_state() -> IpepsState<Complex64> {
        initial_product_state(2, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn product_state_one_site_expectations() {
        let plus = plus_state();
        let env = converge(&plus, 8, 1e-10, 50).unwrap();
        assert!(env.converged());
        let sx = expect_one_site(&env, &plus, &pauli_x()).unwrap();
        assert!((sx - 1.0).abs() < 1e-12);
        let sz = expect_one_site(&env, &plus, &pauli_z()).unwrap();
        assert!(sz.abs() < 1e-12);

        let zero = zero_state();
        let env = converge(&zero, 8, 1e-10, 50).unwrap();
        let sz = expect_one_site(&env, &zero, &pauli_z()).unwrap();
        assert!((sz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_of_product_states() {
        use crate::gates::ModelParams;
        let ins = PauliInsertions {
            sx: pauli_x(),
            sz: pauli_z(),
        };
        let plus = plus_state();
        let env = converge(&plus, 8, 1e-10, 50).unwrap();
        let e = energy_per_site(&env, &plus, &ModelParams::with_coupling(1.3, 0.0, 0.0), &ins)
            .unwrap();
        assert!((e - (-1.3)).abs() < 1e-12, "plus state, field only: {e}");

        let zero = zero_state();
        let env = converge(&zero, 8, 1e-10, 50).unwrap();
        let e = energy_per_site(&env, &zero, &ModelParams::new(0.0, 0.0), &ins).unwrap();
        assert!((e - (-2.0)).abs() < 1e-12, "polarized state: {e}");
    }

    #[test]
    fn expectations_invariant_under_state_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = vec![2usize, 2, 2, 2, 2];
        let a = DenseTensor::from_fn(dims.clone(), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = DenseTensor::from_fn(dims, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let s1 = IpepsState::new(a.clone(), b.clone()).unwrap();
        let s2 = IpepsState::new(
            a.scaled(Complex64::new(3.7, 0.0)),
            b.scaled(Complex64::new(0.2, 0.0)),
        )
        .unwrap();
        // normalization makes the tensors identical; expectation must agree
        let env1 = converge(&s1, 12, 1e-10, 100).unwrap();
        let v1 = expect_one_site(&env1, &s1, &pauli_z()).unwrap();
        let env2 = converge(&s2, 12, 1e-10, 100).unwrap();
        let v2 = expect_one_site(&env2, &s2, &pauli_z()).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn rotated_environment_reproduces_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = vec![2usize, 2, 2, 2, 2];
        let a = DenseTensor::from_fn(dims.clone(), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = DenseTensor::from_fn(dims, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let s = IpepsState::new(a, b).unwrap();
        let env = converge(&s, 10, 1e-9, 100).unwrap();
        let want = expect_one_site_sub(&env, &s, Sub::A, &pauli_z()).unwrap();
        for bond in BondId::ALL {
            let env_r = env.rotated_for_bond(bond);
            let (ar, br) = s.canonical_pair(bond);
            let sr = IpepsState::with_log(ar, br, 0.0).unwrap();
            let got = expect_one_site_sub(&env_r, &sr, Sub::A, &pauli_z()).unwrap();
            assert!(
                (got - want).abs() < 1e-10,
                "bond {bond:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn product_state_correlators_vanish() {
        let plus = plus_state();
        let env = converge(&plus, 4, 1e-10, 50).unwrap();
        for r in 1..=4 {
            let c = connected_correlator(&env, &plus, &pauli_z(), &pauli_z(), r, Axis::Horizontal)
                .unwrap();
            assert!(c.abs() < 1e-12, "r={r}: {c}");
        }
        let xi = correlation_length(&env, &plus, Axis::Horizontal).unwrap();
        assert_eq!(xi, 0.0);
    }

    #[test]
    fn correlator_r1_matches_bond_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = vec![2usize, 2, 2, 2, 2];
        let a = DenseTensor::from_fn(dims.clone(), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = DenseTensor::from_fn(dims, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let s = IpepsState::new(a, b).unwrap();
        let env = converge(&s, 16, 1e-11, 200).unwrap();
        let zz = expect_two_site(&env, &s, BondId::HorizontalAB, &pauli_z(), &pauli_z()).unwrap();
        let ma = expect_one_site_sub(&env, &s, Sub::A, &pauli_z()).unwrap();
        let mb = expect_one_site_sub(&env, &s, Sub::B, &pauli_z()).unwrap();
        let c1 =
            connected_correlator(&env, &s, &pauli_z(), &pauli_z(), 1, Axis::Horizontal).unwrap();
        assert!(
            (c1 - (zz - ma * mb)).abs() < 1e-10,
            "{c1} vs {}",
            zz - ma * mb
        );
    }
}
