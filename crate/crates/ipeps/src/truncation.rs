//! Bond-truncation schemes: SVDU (local Frobenius), NTU (exact
//! nearest-neighborhood metric), and FTU (CTMRG-approximated infinite
//! metric), sharing one alternating-least-squares optimizer.
//!
//! After a two-site gate the bond carries dimension `r·D`; the truncation
//! minimizes
//!
//! ```text
//! ε = [M_A M_B^T − R_A R_B^T]† g [M_A M_B^T − R_A R_B^T]
//! ```
//!
//! in a scheme-dependent metric `g` over the isometry legs. SVDU is the
//! `g = 1` closed form; NTU contracts the metric exactly from the six
//! neighbor tensors of the bond; FTU assembles it from converged CTMRG
//! corners and edges, hermitized and clamped to the PSD cone.

use serde::{Deserialize, Serialize};

use crate::ctmrg::CtmEnvironment;
use crate::error::{Error, Result};
use crate::gates::{Target, TrotterGate};
use crate::lattice::{apply_gate_and_reduce, assemble, BondId, IpepsState, ReducedPair};
use crate::scalar::Scalar;
use crate::tensor::{contract, pinv_hermitian, svd_truncated, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Svdu,
    Ntu,
    Ftu,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "svdu" => Ok(Scheme::Svdu),
            "ntu" => Ok(Scheme::Ntu),
            "ftu" => Ok(Scheme::Ftu),
            other => Err(format!("unknown scheme '{other}' (svdu|ntu|ftu)")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Svdu => "svdu",
            Scheme::Ntu => "ntu",
            Scheme::Ftu => "ftu",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct TruncationConfig {
    pub scheme: Scheme,
    pub target_d: usize,
    pub als_max_sweeps: usize,
    pub als_rel_tol: f64,
    pub pinv_tol_grid: Vec<f64>,
}

impl TruncationConfig {
    pub fn new(scheme: Scheme, target_d: usize) -> Self {
        assert!(target_d >= 1);
        Self {
            scheme,
            target_d,
            als_max_sweeps: 100,
            als_rel_tol: 1e-12,
            pinv_tol_grid: vec![1e-15, 1e-12, 1e-10, 1e-8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricProvenance {
    NtuExact,
    FtuCtmrg,
}

/// Metric over the two isometry legs of a reduced bond, stored as a
/// `(ka·kb) × (ka·kb)` square matrix with row = bra pair, column = ket pair.
#[derive(Debug, Clone)]
pub struct MetricTensor<T: Scalar> {
    pub g: DenseTensor<T>,
    pub ka: usize,
    pub kb: usize,
    pub provenance: MetricProvenance,
    /// Negative spectral weight removed by the PSD clamp, as a fraction of
    /// the total absolute spectrum (zero for NTU).
    pub clamped_weight: f64,
    /// Set when the clamped weight exceeds 5% of the trace.
    pub clamp_warning: bool,
}

impl<T: Scalar> MetricTensor<T> {
    pub fn identity(ka: usize, kb: usize) -> Self {
        Self {
            g: DenseTensor::identity(ka * kb),
            ka,
            kb,
            provenance: MetricProvenance::NtuExact,
            clamped_weight: 0.0,
            clamp_warning: false,
        }
    }

    fn hermitized(mut self) -> Self {
        let gd = self.g.dagger();
        self.g = self
            .g
            .add(&gd)
            .expect("square metric")
            .scaled(T::from_real(0.5));
        self
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationReport {
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub sweeps_used: usize,
    pub chosen_pinv_tol: f64,
    pub svd_truncation_weight: f64,
}

// ---------------------------------------------------------------------------
// SVDU
// ---------------------------------------------------------------------------

fn scale_columns<T: Scalar>(m: &DenseTensor<T>, s: &[f64], f: impl Fn(f64) -> f64) -> DenseTensor<T> {
    let (rows, cols) = (m.dim(0), m.dim(1));
    let mut out = m.clone();
    for i in 0..rows {
        for j in 0..cols {
            let v = out.data()[i * cols + j] * T::from_real(f(s[j]));
            out.data_mut()[i * cols + j] = v;
        }
    }
    out
}

/// Truncated SVD of `R_A R_B^T` with the symmetric square-root split
/// `M_A = U √S`, `M_B^T = √S V^T`.
pub fn svdu_truncate<T: Scalar>(
    pair: &ReducedPair<T>,
    target_d: usize,
) -> Result<(DenseTensor<T>, DenseTensor<T>, TruncationReport)> {
    let prod = pair.exact_product();
    let svd = svd_truncated(&prod, target_d, 0.0)?;
    let m_a = scale_columns(&svd.u, &svd.s, f64::sqrt);
    let m_b = scale_columns(&svd.vt.transposed(), &svd.s, f64::sqrt);
    let w = svd.truncation_weight;
    Ok((
        m_a,
        m_b,
        TruncationReport {
            epsilon_initial: w,
            epsilon_final: w,
            sweeps_used: 0,
            chosen_pinv_tol: 0.0,
            svd_truncation_weight: w,
        },
    ))
}

// ---------------------------------------------------------------------------
// NTU metric
// ---------------------------------------------------------------------------

/// Exact metric of the nearest-neighbor cluster around the gated bond.
///
/// The bond's two sites are inserted with the fixed isometries `Q_A`, `Q_B`;
/// the six neighbor tensors (four vertical neighbors and the two outer
/// horizontal ones, in the canonical frame) close the cluster, with external
/// legs traced pairwise between bra and ket. Assembly is corner-first over
/// double-layer edge tensors; the dominant contraction scales like `D^8`.
pub fn ntu_metric<T: Scalar>(
    state: &IpepsState<T>,
    pair: &ReducedPair<T>,
) -> Result<MetricTensor<T>> {
    let (a_rot, b_rot) = state.canonical_pair(pair.bond);
    let g = ntu_metric_canonical(&a_rot, &b_rot, &pair.q_a, &pair.q_b)?;
    let ka = pair.q_a.dim(4);
    let kb = pair.q_b.dim(4);
    Ok(MetricTensor {
        g,
        ka,
        kb,
        provenance: MetricProvenance::NtuExact,
        clamped_weight: 0.0,
        clamp_warning: false,
    }
    .hermitized())
}

/// Metric assembly in the canonical frame (bond = `A.right`–`B.left`).
fn ntu_metric_canonical<T: Scalar>(
    a_rot: &DenseTensor<T>,
    b_rot: &DenseTensor<T>,
    q_a: &DenseTensor<T>,
    q_b: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    let a_c = a_rot.conj();
    let b_c = b_rot.conj();

    // Neighbor double tensors with external legs traced at formation.
    // Site legs: [p, t, l, b, r].
    let edge_left = contract(b_rot, &b_c, &[(0, 0), (1, 1), (2, 2), (3, 3)])?; // [r, r']
    let corner_tl = contract(b_rot, &b_c, &[(0, 0), (1, 1), (2, 2)])?; // [b, r, b', r']
    let corner_bl = contract(b_rot, &b_c, &[(0, 0), (2, 2), (3, 3)])?; // [t, r, t', r']
    let corner_tr = contract(a_rot, &a_c, &[(0, 0), (1, 1), (4, 4)])?; // [l, b, l', b']
    let corner_br = contract(a_rot, &a_c, &[(0, 0), (3, 3), (4, 4)])?; // [t, l, t', l']
    let edge_right = contract(a_rot, &a_c, &[(0, 0), (1, 1), (3, 3), (4, 4)])?; // [l, l']

    // Central isometries doubled over the physical leg.
    let qa_d = contract(q_a, &q_a.conj(), &[(0, 0)])?; // [t,l,b,q, t',l',b',q']
    let qb_d = contract(q_b, &q_b.conj(), &[(0, 0)])?; // [t,b,r,q, t',b',r',q']

    // Left half: edge, then top and bottom corners.
    let l1 = contract(&qa_d, &edge_left, &[(1, 0), (5, 1)])?; // [t,b,q,t',b',q']
    let l2 = contract(&l1, &corner_tl, &[(0, 0), (3, 2)])?; // [b,q,b',q', rtl,rtl']
    let l3 = contract(&l2, &corner_bl, &[(0, 0), (2, 2)])?; // [q,q',rtl,rtl',rbl,rbl']

    // Right half, mirror image.
    let r1 = contract(&qb_d, &edge_right, &[(2, 0), (6, 1)])?; // [t,b,q,t',b',q']
    let r2 = contract(&r1, &corner_tr, &[(0, 1), (3, 3)])?; // [b,q,b',q', ltr,ltr']
    let r3 = contract(&r2, &corner_br, &[(0, 0), (2, 2)])?; // [q,q',ltr,ltr',lbr,lbr']

    // Close the two neighbor bonds parallel to the central one.
    let g4 = contract(&l3, &r3, &[(2, 2), (3, 3), (4, 4), (5, 5)])?; // [qa,qa',qb,qb']

    let ka = q_a.dim(4);
    let kb = q_b.dim(4);
    // rows = bra pair (qa', qb'), cols = ket pair (qa, qb)
    g4.permuted(&[1, 3, 0, 2])
        .into_reshaped(vec![ka * kb, ka * kb])
}

// ---------------------------------------------------------------------------
// FTU metric
// ---------------------------------------------------------------------------

/// Metric from converged CTMRG corners and edges around the two-site hole,
/// with the same central-isometry insertion as NTU, hermitized and clamped
/// onto the PSD cone.
pub fn ftu_metric<T: Scalar>(
    env: &CtmEnvironment<T>,
    pair: &ReducedPair<T>,
) -> Result<MetricTensor<T>> {
    if !env.converged() {
        return Err(Error::StaleEnvironment);
    }
    let env = env.rotated_for_bond(pair.bond);
    let q_a = &pair.q_a;
    let q_b = &pair.q_b;

    let qa_d = fuse_pairs_q(&contract(q_a, &q_a.conj(), &[(0, 0)])?)?; // [T,L,B,q,q']
    let qb_d = fuse_pairs_q(&contract(q_b, &q_b.conj(), &[(0, 0)])?)?; // [T,B,R,q,q']

    // Left cap around A: c_tl, t_l, c_bl.
    let lcap = env.left_cap(crate::ctmrg::Sub::A)?; // [top χ, mid D², bot χ]
    let x1 = contract(&lcap, &qa_d, &[(1, 1)])?; // [χt, χb, T, B, q, q']
    let x2 = contract(&x1, env.t_t(crate::ctmrg::Sub::A), &[(0, 0), (2, 1)])?;
    // -> [χb, B, q, q', r_t]
    let left = contract(&x2, env.t_b(crate::ctmrg::Sub::A), &[(0, 2), (1, 1)])?;
    // t_b legs are [r, u, l]; contracted l and u -> [q, q', r_t, r_b]

    // Right cap around B: c_tr, t_r, c_br.
    let rcap = env.right_cap(crate::ctmrg::Sub::B)?; // [top χ, mid D², bot χ]
    let y1 = contract(&rcap, &qb_d, &[(1, 2)])?; // [χt, χb, T, B, q, q']
    let y2 = contract(&y1, env.t_t(crate::ctmrg::Sub::B), &[(0, 2), (2, 1)])?;
    // t_t legs [l, d, r]; contracted r and d -> [χb, B, q, q', l_t]
    let right = contract(&y2, env.t_b(crate::ctmrg::Sub::B), &[(0, 0), (1, 1)])?;
    // t_b legs [r, u, l]; contracted r and u -> [q, q', l_t, l_b]

    let g4 = contract(&left, &right, &[(2, 2), (3, 3)])?; // [qa,qa',qb,qb']
    let ka = q_a.dim(4);
    let kb = q_b.dim(4);
    let g = g4
        .permuted(&[1, 3, 0, 2])
        .into_reshaped(vec![ka * kb, ka * kb])?;

    let metric = MetricTensor {
        g,
        ka,
        kb,
        provenance: MetricProvenance::FtuCtmrg,
        clamped_weight: 0.0,
        clamp_warning: false,
    }
    .hermitized();
    clamp_to_psd(metric)
}

/// Fuse the (ket, bra) leg pairs of a doubled isometry, keeping the two
/// isometry legs unfused at the end: [x1..xn,q, x1'..xn',q'] ->
/// [X1..Xn, q, q'] with Xi = (xi, xi').
fn fuse_pairs_q<T: Scalar>(qd: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let half = qd.rank() / 2;
    let n = half - 1;
    // interleave: [x1, x1', x2, x2', ..., q, q']
    let mut perm = Vec::with_capacity(2 * half);
    for i in 0..n {
        perm.push(i);
        perm.push(half + i);
    }
    perm.push(n);
    perm.push(half + n);
    let t = qd.permuted(&perm);
    let mut dims = Vec::with_capacity(n + 2);
    for i in 0..n {
        dims.push(t.dim(2 * i) * t.dim(2 * i + 1));
    }
    dims.push(t.dim(2 * n));
    dims.push(t.dim(2 * n + 1));
    t.into_reshaped(dims)
}

/// Project a hermitized metric onto the PSD cone by eigenvalue clamping.
pub(crate) fn clamp_to_psd<T: Scalar>(mut metric: MetricTensor<T>) -> Result<MetricTensor<T>> {
    let (vals, v) = crate::tensor::eigh(&metric.g)?;
    let total: f64 = vals.iter().map(|x| x.abs()).sum();
    let negative: f64 = vals.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    if negative == 0.0 {
        return Ok(metric);
    }
    let n = vals.len();
    let mut scaled = v.clone();
    for i in 0..n {
        for j in 0..n {
            let x = scaled.data()[i * n + j] * T::from_real(vals[j].max(0.0));
            scaled.data_mut()[i * n + j] = x;
        }
    }
    metric.g = contract(&scaled, &v.dagger(), &[(1, 0)])?;
    metric.clamped_weight = if total > 0.0 { negative / total } else { 0.0 };
    metric.clamp_warning = metric.clamped_weight > 0.05;
    Ok(metric)
}

// ---------------------------------------------------------------------------
// ALS optimizer
// ---------------------------------------------------------------------------

/// Quadratic form `v† g v` (real part; imaginary part is numerical noise for
/// Hermitian `g`).
fn quad_form<T: Scalar>(g: &DenseTensor<T>, v: &DenseTensor<T>) -> Result<f64> {
    let w = contract(g, v, &[(1, 0)])?;
    let mut acc = T::zero();
    for (x, y) in v.data().iter().zip(w.data()) {
        acc += x.conjugate() * *y;
    }
    Ok(acc.real())
}

fn product_vec<T: Scalar>(m_a: &DenseTensor<T>, m_b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let x = contract(m_a, m_b, &[(1, 1)])?;
    let len = x.len();
    x.into_reshaped(vec![len])
}

/// ε(M_A, M_B) normalized by the exact-product norm in the same metric.
fn normalized_eps<T: Scalar>(
    g: &DenseTensor<T>,
    m_a: &DenseTensor<T>,
    m_b: &DenseTensor<T>,
    r_vec: &DenseTensor<T>,
    denom: f64,
) -> Result<f64> {
    let x = product_vec(m_a, m_b)?;
    let diff = x.sub(r_vec)?;
    Ok(quad_form(g, &diff)? / denom)
}

/// Alternating least squares for the bond matrices in a given metric.
///
/// Seeded by [`svdu_truncate`]. Before each half-update the pair is tilted
/// (`M_A = U S, M_B^T = U_B^T` for the A update and vice versa); the update
/// solves `M = pinv(g_M, tol) · J_M`, scanning `tol` over the configured grid
/// and keeping the ε-minimal candidate. The loop ends when the relative ε
/// change drops below `als_rel_tol` or the sweep budget runs out, and the
/// result is balanced symmetrically (`M_A = U_A S^{1/2}`, `M_B^T = S^{1/2} U_B^T`).
pub fn als_optimize<T: Scalar>(
    pair: &ReducedPair<T>,
    metric: &MetricTensor<T>,
    config: &TruncationConfig,
) -> Result<(DenseTensor<T>, DenseTensor<T>, TruncationReport)> {
    let (m_a0, m_b0, seed_report) = svdu_truncate(pair, config.target_d)?;
    let ka = metric.ka;
    let kb = metric.kb;
    let rd = pair.r_a.dim(1);

    // No truncation: the SVDU split is exact and there is nothing to optimize.
    if ka.min(kb).min(rd) <= config.target_d {
        return Ok((m_a0, m_b0, seed_report));
    }

    let r_mat = pair.exact_product();
    let r_vec = r_mat.reshaped(vec![ka * kb])?;
    let denom = quad_form(&metric.g, &r_vec)?;
    if !(denom > 0.0) || !denom.is_finite() {
        // The exact product lies in the metric's kernel; any truncation is
        // as good as any other under this metric.
        return Ok((m_a0, m_b0, seed_report));
    }

    let g4 = metric.g.reshaped(vec![ka, kb, ka, kb])?; // [i', j', i, j]
    // Source contraction g·R, independent of the iterates.
    let gr = contract(&g4, &r_mat, &[(2, 0), (3, 1)])?; // [i', j']

    let mut m_a = m_a0;
    let mut m_b = m_b0;
    let d = config.target_d.min(rd);
    let eps_initial = normalized_eps(&metric.g, &m_a, &m_b, &r_vec, denom)?;
    let mut eps_prev = eps_initial;
    let mut sweeps_used = 0usize;
    let mut chosen_tol = 0.0f64;

    for sweep in 1..=config.als_max_sweeps {
        // --- optimize M_A with the pair tilted as M_A = U S, M_B = conj(V) ---
        let x = contract(&m_a, &m_b, &[(1, 1)])?;
        let svd = svd_truncated(&x, d, 0.0)?;
        let k = svd.rank();
        m_a = scale_columns(&svd.u, &svd.s, |s| s);
        m_b = svd.vt.transposed();

        let tmp = contract(&g4, &m_b, &[(3, 0)])?; // [i', j', i, t]
        let g_a = contract(&tmp, &m_b.conj(), &[(1, 0)])? // [i', i, t, t']
            .permuted(&[0, 3, 1, 2])
            .into_reshaped(vec![ka * k, ka * k])?;
        let j_a = contract(&gr, &m_b.conj(), &[(1, 0)])? // [i', t']
            .into_reshaped(vec![ka * k])?;
        let eps_here = normalized_eps(&metric.g, &m_a, &m_b, &r_vec, denom)?;
        if let Some((cand, tol)) = best_pinv_solve(
            &metric.g, &g_a, &j_a, &m_b, &r_vec, denom, ka, k, config, true, eps_here,
        )? {
            m_a = cand;
            chosen_tol = tol;
        }

        // --- optimize M_B with the pair tilted as M_A = U, M_B^T = S V^T ---
        let x = contract(&m_a, &m_b, &[(1, 1)])?;
        let svd = svd_truncated(&x, d, 0.0)?;
        let k = svd.rank();
        m_a = svd.u.clone();
        m_b = scale_columns(&svd.vt.transposed(), &svd.s, |s| s);

        let tmp = contract(&g4, &m_a, &[(2, 0)])?; // [i', j', j, t]
        let g_b = contract(&tmp, &m_a.conj(), &[(0, 0)])? // [j', j, t, t']
            .permuted(&[0, 3, 1, 2])
            .into_reshaped(vec![kb * k, kb * k])?;
        let j_b = contract(&gr, &m_a.conj(), &[(0, 0)])? // [j', t']
            .into_reshaped(vec![kb * k])?;
        let eps_here = normalized_eps(&metric.g, &m_a, &m_b, &r_vec, denom)?;
        if let Some((cand, tol)) = best_pinv_solve(
            &metric.g, &g_b, &j_b, &m_a, &r_vec, denom, kb, k, config, false, eps_here,
        )? {
            m_b = cand;
            chosen_tol = tol;
        }

        let eps_now = normalized_eps(&metric.g, &m_a, &m_b, &r_vec, denom)?;
        sweeps_used = sweep;
        if eps_now > eps_prev + 1e-12 {
            return Err(Error::MonotonicityViolation {
                sweep,
                prev: eps_prev,
                curr: eps_now,
            });
        }
        let rel_change = (eps_prev - eps_now).abs() / eps_prev.abs().max(1e-300);
        eps_prev = eps_now;
        // exact truncations sit at rounding-noise level where the relative
        // test never settles
        if rel_change < config.als_rel_tol || eps_now.abs() < 1e-26 {
            break;
        }
    }

    // Balanced symmetric split of the converged product.
    let x = contract(&m_a, &m_b, &[(1, 1)])?;
    let svd = svd_truncated(&x, d, 0.0)?;
    let m_a = scale_columns(&svd.u, &svd.s, f64::sqrt);
    let m_b = scale_columns(&svd.vt.transposed(), &svd.s, f64::sqrt);
    let eps_final = normalized_eps(&metric.g, &m_a, &m_b, &r_vec, denom)?;

    Ok((
        m_a,
        m_b,
        TruncationReport {
            epsilon_initial: eps_initial,
            epsilon_final: eps_final,
            sweeps_used,
            chosen_pinv_tol: chosen_tol,
            svd_truncation_weight: seed_report.svd_truncation_weight,
        },
    ))
}

/// Solve one ALS half-step over the pseudo-inverse tolerance grid; returns
/// the ε-minimal candidate that improves on the incumbent, or `None` when
/// the incumbent should be kept (so ε never increases within a half-step).
#[allow(clippy::too_many_arguments)]
fn best_pinv_solve<T: Scalar>(
    g_full: &DenseTensor<T>,
    g_red: &DenseTensor<T>,
    j_red: &DenseTensor<T>,
    partner: &DenseTensor<T>,
    r_vec: &DenseTensor<T>,
    denom: f64,
    rows: usize,
    k: usize,
    config: &TruncationConfig,
    updating_a: bool,
    eps_incumbent: f64,
) -> Result<Option<(DenseTensor<T>, f64)>> {
    let mut best: Option<(DenseTensor<T>, f64, f64)> = None;
    let mut degenerate = 0usize;
    for &tol in &config.pinv_tol_grid {
        let pinv = match pinv_hermitian(g_red, tol) {
            Ok(p) => p,
            Err(Error::DegenerateMetric) => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let sol = contract(&pinv, j_red, &[(1, 0)])?.into_reshaped(vec![rows, k])?;
        let eps = if updating_a {
            normalized_eps(g_full, &sol, partner, r_vec, denom)?
        } else {
            normalized_eps(g_full, partner, &sol, r_vec, denom)?
        };
        if !eps.is_finite() || eps > eps_incumbent {
            continue;
        }
        if best.as_ref().map_or(true, |(_, _, e)| eps < *e) {
            best = Some((sol, tol, eps));
        }
    }
    if best.is_none() && degenerate == config.pinv_tol_grid.len() {
        return Err(Error::DegenerateMetric);
    }
    Ok(best.map(|(sol, tol, _)| (sol, tol)))
}

// ---------------------------------------------------------------------------
// One full evolution step
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BondReport {
    pub bond: BondId,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub sweeps_used: usize,
    pub chosen_pinv_tol: f64,
    pub svd_truncation_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    /// Largest normalized ε over the bond updates of this step.
    pub max_eps: f64,
    pub bonds: Vec<BondReport>,
    pub metric_clamp_warnings: usize,
}

/// Apply one full second-order schedule to the state.
///
/// Bond gates are reduced, truncated in the scheme's metric and reassembled;
/// one-site gates are absorbed directly into the physical legs. The FTU
/// scheme requires a converged environment of the entering state, which is
/// held fixed across the bonds of the step.
pub fn evolve_step<T: Scalar>(
    state: &IpepsState<T>,
    schedule: &[(TrotterGate<T>, Target)],
    config: &TruncationConfig,
    env: Option<&CtmEnvironment<T>>,
) -> Result<(IpepsState<T>, StepReport)> {
    if config.scheme == Scheme::Ftu && env.is_none() {
        return Err(Error::StaleEnvironment);
    }
    let mut current = state.clone();
    let mut bonds = Vec::new();
    let mut clamp_warnings = 0usize;
    for (gate, target) in schedule {
        match target {
            Target::OneSite => {
                current = current.apply_one_site(&gate.one_site_a, &gate.one_site_b)?;
            }
            Target::Bond(bond) => {
                let pair = apply_gate_and_reduce(&current, gate, *bond)?;
                let (m_a, m_b, report) = match config.scheme {
                    Scheme::Svdu => svdu_truncate(&pair, config.target_d)?,
                    Scheme::Ntu => {
                        let metric = ntu_metric(&current, &pair)?;
                        als_optimize(&pair, &metric, config)?
                    }
                    Scheme::Ftu => {
                        let metric = ftu_metric(env.expect("checked above"), &pair)?;
                        if metric.clamp_warning {
                            clamp_warnings += 1;
                        }
                        als_optimize(&pair, &metric, config)?
                    }
                };
                current = assemble(&current, &pair, &m_a, &m_b)?;
                bonds.push(BondReport {
                    bond: *bond,
                    epsilon_initial: report.epsilon_initial,
                    epsilon_final: report.epsilon_final,
                    sweeps_used: report.sweeps_used,
                    chosen_pinv_tol: report.chosen_pinv_tol,
                    svd_truncation_weight: report.svd_truncation_weight,
                });
            }
        }
    }
    let max_eps = bonds
        .iter()
        .map(|b| b.epsilon_final)
        .fold(0.0f64, f64::max);
    Ok((
        current,
        StepReport {
            max_eps,
            bonds,
            metric_clamp_warnings: clamp_warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{quench_gate, thermal_gate, GateKind, ModelParams, TrotterGate};
    use crate::lattice::initial_product_state;
    use crate::tensor::eigh;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn rand_state_c(rng: &mut ChaCha8Rng, p: usize, d: usize) -> IpepsState<Complex64> {
        let dims = vec![p, d, d, d, d];
        let a = DenseTensor::from_fn(dims.clone(), |_| rand_c(rng));
        let b = DenseTensor::from_fn(dims, |_| rand_c(rng));
        IpepsState::new(a, b).unwrap()
    }

    fn rand_state_r(rng: &mut ChaCha8Rng, p: usize, d: usize) -> IpepsState<f64> {
        let dims = vec![p, d, d, d, d];
        let a = DenseTensor::from_fn(dims.clone(), |_| rng.gen_range(-1.0..1.0));
        let b = DenseTensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0));
        IpepsState::new(a, b).unwrap()
    }

    fn rand_gate_c(rng: &mut ChaCha8Rng, p: usize, r: usize) -> TrotterGate<Complex64> {
        TrotterGate {
            g_a: DenseTensor::from_fn(vec![p, p, r], |_| rand_c(rng)),
            g_b: DenseTensor::from_fn(vec![p, p, r], |_| rand_c(rng)),
            rank: r,
            one_site_a: DenseTensor::identity(p),
            one_site_b: DenseTensor::identity(p),
            step: 0.0,
            kind: GateKind::UnitaryQuench,
        }
    }

    fn rand_gate_r(rng: &mut ChaCha8Rng, p: usize, r: usize) -> TrotterGate<f64> {
        TrotterGate {
            g_a: DenseTensor::from_fn(vec![p, p, r], |_| rng.gen_range(-1.0..1.0)),
            g_b: DenseTensor::from_fn(vec![p, p, r], |_| rng.gen_range(-1.0..1.0)),
            rank: r,
            one_site_a: DenseTensor::identity(p),
            one_site_b: DenseTensor::identity(p),
            step: 0.0,
            kind: GateKind::PurificationThermal,
        }
    }

    /// Brute-force nested-sum contraction of the eight-site neighborhood
    /// network, written with explicit index loops only.
    pub(crate) fn ntu_metric_oracle<T: Scalar>(
        a_rot: &DenseTensor<T>,
        b_rot: &DenseTensor<T>,
        q_a: &DenseTensor<T>,
        q_b: &DenseTensor<T>,
    ) -> DenseTensor<T> {
        let p = a_rot.dim(0);
        let d = a_rot.dim(1); // all virtual legs equal here
        let ka = q_a.dim(4);
        let kb = q_b.dim(4);
        let cj = |x: T| x.conjugate();

        // closed neighbor doubles
        let mut e_l = vec![T::zero(); d * d];
        let mut c_tl = vec![T::zero(); d * d * d * d];
        let mut c_bl = vec![T::zero(); d * d * d * d];
        let mut c_tr = vec![T::zero(); d * d * d * d];
        let mut c_br = vec![T::zero(); d * d * d * d];
        let mut e_r = vec![T::zero(); d * d];
        for pp in 0..p {
            for t in 0..d {
                for l in 0..d {
                    for b in 0..d {
                        for r in 0..d {
                            for x2 in 0..d {
                                let bv = b_rot.at(&[pp, t, l, b, r]);
                                let av = a_rot.at(&[pp, t, l, b, r]);
                                // e_l[r, r']: trace p,t,l,b
                                e_l[r * d + x2] += bv * cj(b_rot.at(&[pp, t, l, b, x2]));
                                // e_r[l, l']: trace p,t,b,r
                                e_r[l * d + x2] += av * cj(a_rot.at(&[pp, t, x2, b, r]));
                                for y2 in 0..d {
                                    // c_tl[b,b',r,r']: trace p,t,l
                                    c_tl[((b * d + x2) * d + r) * d + y2] +=
                                        bv * cj(b_rot.at(&[pp, t, l, x2, y2]));
                                    // c_bl[t,t',r,r']: trace p,l,b
                                    c_bl[((t * d + x2) * d + r) * d + y2] +=
                                        bv * cj(b_rot.at(&[pp, x2, l, b, y2]));
                                    // c_tr[l,l',b,b']: trace p,t,r
                                    c_tr[((l * d + x2) * d + b) * d + y2] +=
                                        av * cj(a_rot.at(&[pp, t, x2, y2, r]));
                                    // c_br[t,t',l,l']: trace p,b,r
                                    c_br[((t * d + x2) * d + l) * d + y2] +=
                                        av * cj(a_rot.at(&[pp, x2, y2, b, r]));
                                }
                            }
                        }
                    }
                }
            }
        }

        // left half: qa doubled with eL, cTL, cBL; free (qa, qa', x, x', y, y')
        let mut left = vec![T::zero(); ka * ka * d * d * d * d];
        for qa in 0..ka {
            for qa2 in 0..ka {
                for x in 0..d {
                    for x2 in 0..d {
                        for y in 0..d {
                            for y2 in 0..d {
                                let mut acc = T::zero();
                                for pp in 0..p {
                                    for t in 0..d {
                                        for t2 in 0..d {
                                            for l in 0..d {
                                                for l2 in 0..d {
                                                    for b in 0..d {
                                                        for b2 in 0..d {
                                                            acc += q_a.at(&[pp, t, l, b, qa])
                                                                * cj(q_a.at(&[pp, t2, l2, b2, qa2]))
                                                                * e_l[l * d + l2]
                                                                * c_tl[((t * d + t2) * d + x) * d + x2]
                                                                * c_bl[((b * d + b2) * d + y) * d + y2];
                                                        }
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                                left[((((qa * ka + qa2) * d + x) * d + x2) * d + y) * d + y2] = acc;
                            }
                        }
                    }
                }
            }
        }

        // right half: qb doubled with eR, cTR, cBR
        let mut right = vec![T::zero(); kb * kb * d * d * d * d];
        for qb in 0..kb {
            for qb2 in 0..kb {
                for x in 0..d {
                    for x2 in 0..d {
                        for y in 0..d {
                            for y2 in 0..d {
                                let mut acc = T::zero();
                                for pp in 0..p {
                                    for t in 0..d {
                                        for t2 in 0..d {
                                            for b in 0..d {
                                                for b2 in 0..d {
                                                    for r in 0..d {
                                                        for r2 in 0..d {
                                                            acc += q_b.at(&[pp, t, b, r, qb])
                                                                * cj(q_b.at(&[pp, t2, b2, r2, qb2]))
                                                                * e_r[r * d + r2]
                                                                * c_tr[((x * d + x2) * d + t) * d + t2]
                                                                * c_br[((b * d + b2) * d + y) * d + y2];
                                                        }
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                                right[((((qb * kb + qb2) * d + x) * d + x2) * d + y) * d + y2] = acc;
                            }
                        }
                    }
                }
            }
        }

        // close the parallel bonds; rows = bra pair, cols = ket pair
        DenseTensor::from_fn(vec![ka * kb, ka * kb], |idx| {
            let (qa2, qb2) = (idx[0] / kb, idx[0] % kb);
            let (qa, qb) = (idx[1] / kb, idx[1] % kb);
            let mut acc = T::zero();
            for x in 0..d {
                for x2 in 0..d {
                    for y in 0..d {
                        for y2 in 0..d {
                            acc += left
                                [((((qa * ka + qa2) * d + x) * d + x2) * d + y) * d + y2]
                                * right
                                    [((((qb * kb + qb2) * d + x) * d + x2) * d + y) * d + y2];
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn svdu_no_truncation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = TrotterGate::<Complex64>::identity(2, GateKind::UnitaryQuench);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        // r = 1, so rD = D and no truncation happens at target D
        let (m_a, m_b, rep) = svdu_truncate(&pair, 2).unwrap();
        assert_eq!(rep.svd_truncation_weight, 0.0);
        let prod = contract(&m_a, &m_b, &[(1, 1)]).unwrap();
        let exact = pair.exact_product();
        assert!(prod.sub(&exact).unwrap().norm() / exact.norm() < 1e-12);
    }

    #[test]
    fn svdu_zero_side_gives_zero_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let mut pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        pair.r_b = DenseTensor::zeros(pair.r_b.dims().to_vec());
        let (m_a, m_b, rep) = svdu_truncate(&pair, 2).unwrap();
        let prod = contract(&m_a, &m_b, &[(1, 1)]).unwrap();
        assert_eq!(prod.max_abs(), 0.0);
        assert!(rep.epsilon_final.is_finite());
    }

    #[test]
    fn ntu_metric_is_scalar_for_product_state() {
        // Unentangled environment: with the central isometries inserted the
        // metric collapses to a positive multiple of the identity (the
        // physical trace pairs bra and ket isometries to 1).
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        let state = initial_product_state(2, &[s2, s2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let metric = ntu_metric(&state, &pair).unwrap();
        let (vals, _) = eigh(&metric.g).unwrap();
        assert!(vals[0] > 0.0);
        for &v in &vals {
            assert!((v - vals[0]).abs() < 1e-12 * vals[0], "eigenvalue spread {v}");
        }
    }

    #[test]
    fn ntu_metric_matches_bruteforce_complex_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bond in BondId::ALL {
            let state = rand_state_c(&mut rng, 2, 2);
            let gate = rand_gate_c(&mut rng, 2, 2);
            let pair = apply_gate_and_reduce(&state, &gate, bond).unwrap();
            let metric = ntu_metric(&state, &pair).unwrap();
            let (a_rot, b_rot) = state.canonical_pair(bond);
            let oracle = ntu_metric_oracle(&a_rot, &b_rot, &pair.q_a, &pair.q_b);
            let diff = metric.g.sub(&oracle).unwrap().norm() / oracle.norm();
            assert!(diff < 1e-11, "bond {bond:?}: {diff}");
        }
    }

    #[test]
    fn ntu_metric_matches_bruteforce_real_p4() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = rand_state_r(&mut rng, 4, 2);
        let gate = rand_gate_r(&mut rng, 4, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::VerticalBA).unwrap();
        let metric = ntu_metric(&state, &pair).unwrap();
        let (a_rot, b_rot) = state.canonical_pair(BondId::VerticalBA);
        let oracle = ntu_metric_oracle(&a_rot, &b_rot, &pair.q_a, &pair.q_b);
        let diff = metric.g.sub(&oracle).unwrap().norm() / oracle.norm();
        assert!(diff < 1e-11, "{diff}");
    }

    #[test]
    fn ntu_metric_hermitian_psd_at_d3() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let state = rand_state_c(&mut rng, 2, 3);
            let gate = rand_gate_c(&mut rng, 2, 2);
            let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
            let metric = ntu_metric(&state, &pair).unwrap();
            let herm_dev = metric.g.sub(&metric.g.dagger()).unwrap().norm() / metric.g.norm();
            assert!(herm_dev < 1e-12);
            let (vals, _) = eigh(&metric.g).unwrap();
            let lam_max = vals[0];
            let lam_min = *vals.last().unwrap();
            assert!(lam_min >= -1e-12 * lam_max, "λmin {lam_min}, λmax {lam_max}");
        }
    }

    #[test]
    fn als_with_identity_metric_reproduces_svdu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let config = TruncationConfig::new(Scheme::Ntu, 2);
        let metric = MetricTensor::<Complex64>::identity(pair.q_a.dim(4), pair.q_b.dim(4));
        let (m_a, _m_b, rep) = als_optimize(&pair, &metric, &config).unwrap();
        let (s_a, _s_b, srep) = svdu_truncate(&pair, 2).unwrap();
        // Eckart-Young: the identity-metric optimum is the truncated SVD;
        // compare singular-value spectra of the optimized matrices.
        let sv1 = svd_truncated(&m_a, 2, 0.0).unwrap().s;
        let sv2 = svd_truncated(&s_a, 2, 0.0).unwrap().s;
        for (x, y) in sv1.iter().zip(&sv2) {
            assert!((x - y).abs() < 1e-10 * sv2[0]);
        }
        assert!(rep.epsilon_final <= srep.epsilon_final + 1e-12);
    }

    #[test]
    fn als_no_truncation_needs_no_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = TrotterGate::<Complex64>::identity(2, GateKind::UnitaryQuench);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let config = TruncationConfig::new(Scheme::Ntu, 4);
        let metric = ntu_metric(&state, &pair).unwrap();
        let (_, _, rep) = als_optimize(&pair, &metric, &config).unwrap();
        assert_eq!(rep.sweeps_used, 0);
        assert!(rep.epsilon_final < 1e-24);
    }

    #[test]
    fn als_beats_random_search_under_random_psd_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let ka = pair.q_a.dim(4);
        let kb = pair.q_b.dim(4);
        let n = ka * kb;
        let w = DenseTensor::from_fn(vec![n, n], |_| rand_c(&mut rng));
        let g = contract(&w, &w.dagger(), &[(1, 0)]).unwrap();
        let metric = MetricTensor {
            g,
            ka,
            kb,
            provenance: MetricProvenance::NtuExact,
            clamped_weight: 0.0,
            clamp_warning: false,
        };
        let config = TruncationConfig::new(Scheme::Ntu, 2);
        let (_, _, rep) = als_optimize(&pair, &metric, &config).unwrap();

        // random search with optimal rescaling of each trial
        let r_mat = pair.exact_product();
        let r_vec = r_mat.reshaped(vec![n]).unwrap();
        let denom = quad_form(&metric.g, &r_vec).unwrap();
        let gr = contract(&metric.g, &r_vec, &[(1, 0)]).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..2000 {
            // each trial is rescaled by its optimal prefactor, so the
            // comparison is fair: eps = (R†gR - |X†gR|²/X†gX)/R†gR
            let m_a = DenseTensor::from_fn(vec![ka, 2], |_| rand_c(&mut rng));
            let m_b = DenseTensor::from_fn(vec![kb, 2], |_| rand_c(&mut rng));
            let x = product_vec(&m_a, &m_b).unwrap();
            let xx = quad_form(&metric.g, &x).unwrap();
            let mut xr = Complex64::default();
            for (xi, gri) in x.data().iter().zip(gr.data()) {
                xr += xi.conj() * gri;
            }
            let eps = if xx > 0.0 {
                (denom - xr.norm_sqr() / xx).max(0.0) / denom
            } else {
                1.0
            };
            best = best.min(eps);
        }
        assert!(
            rep.epsilon_final <= best + 1e-12,
            "als {} vs random {best}",
            rep.epsilon_final
        );
    }

    #[test]
    fn eps_is_gauge_invariant_on_the_internal_leg() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let state = rand_state_c(&mut rng, 2, 2);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let metric = ntu_metric(&state, &pair).unwrap();
        let config = TruncationConfig::new(Scheme::Ntu, 2);
        let (m_a, m_b, rep) = als_optimize(&pair, &metric, &config).unwrap();

        // well-conditioned random gauge X on the internal leg
        let x = DenseTensor::from_fn(vec![2, 2], |idx| {
            Complex64::new(if idx[0] == idx[1] { 2.0 } else { 0.0 }, 0.0)
                + rand_c(&mut rng) * Complex64::new(0.3, 0.0)
        });
        // invert via svd
        let svd = svd_truncated(&x, 2, 0.0).unwrap();
        let mut inv = svd.vt.dagger();
        for i in 0..2 {
            for j in 0..svd.rank() {
                let v = inv.data()[i * svd.rank() + j]
                    * Complex64::new(1.0 / svd.s[j], 0.0);
                inv.data_mut()[i * svd.rank() + j] = v;
            }
        }
        let x_inv = contract(&inv, &svd.u.dagger(), &[(1, 0)]).unwrap();
        let m_a_g = contract(&m_a, &x, &[(1, 0)]).unwrap();
        let m_b_g = contract(&m_b, &x_inv, &[(1, 1)]).unwrap();

        let r_vec = pair
            .exact_product()
            .reshaped(vec![metric.ka * metric.kb])
            .unwrap();
        let denom = quad_form(&metric.g, &r_vec).unwrap();
        let eps_g = normalized_eps(&metric.g, &m_a_g, &m_b_g, &r_vec, denom).unwrap();
        assert!(
            (eps_g - rep.epsilon_final).abs() < 1e-10 * (1.0 + rep.epsilon_final),
            "{} vs {}",
            eps_g,
            rep.epsilon_final
        );
    }

    #[test]
    fn ntu_never_worse_than_svdu_in_its_own_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let config = TruncationConfig::new(Scheme::Ntu, 2);
        let mut mean_svdu = 0.0;
        let mut mean_ntu = 0.0;
        for _ in 0..20 {
            let state = rand_state_c(&mut rng, 2, 3);
            let gate = rand_gate_c(&mut rng, 2, 2);
            let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
            let metric = ntu_metric(&state, &pair).unwrap();
            let (_, _, rep) = als_optimize(&pair, &metric, &config).unwrap();
            assert!(rep.epsilon_final <= rep.epsilon_initial + 1e-12);
            mean_svdu += rep.epsilon_initial;
            mean_ntu += rep.epsilon_final;
        }
        assert!(mean_ntu <= mean_svdu);
    }

    #[test]
    fn evolve_step_identity_schedule_is_inert() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let state = rand_state_c(&mut rng, 2, 2);
        let params = ModelParams::with_coupling(0.0, 0.0, 0.0);
        let schedule = crate::gates::second_order_schedule(|s| quench_gate(params, s), 0.01)
            .unwrap();
        for scheme in [Scheme::Svdu, Scheme::Ntu] {
            let config = TruncationConfig::new(scheme, 2);
            let (_s2, rep) = evolve_step(&state, &schedule, &config, None).unwrap();
            assert!(rep.max_eps < 1e-20, "scheme {scheme}: {}", rep.max_eps);
        }
    }

    #[test]
    fn classical_quench_step_is_exact_at_d2() {
        // hx = 0: the gated state is exactly rank-2 along each bond.
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        let mut state = initial_product_state(2, &[s2, s2]).unwrap();
        let params = ModelParams::new(0.0, 0.0);
        let schedule =
            crate::gates::second_order_schedule(|s| quench_gate(params, s), 0.01).unwrap();
        let config = TruncationConfig::new(Scheme::Svdu, 2);
        for step in 0..5 {
            let (s2_, rep) = evolve_step(&state, &schedule, &config, None).unwrap();
            state = s2_;
            if step > 0 {
                assert!(rep.max_eps < 1e-20, "step {step}: {}", rep.max_eps);
            }
        }
        assert_eq!(state.bond_dim(), 2);
    }

    #[test]
    fn thermal_step_is_exact_at_d2_for_classical_model() {
        let mut state =
            initial_product_state(4, &[0.0f64, 0.0, 0.0, 1.0]).unwrap();
        let params = ModelParams::new(0.0, 1e-2);
        let schedule =
            crate::gates::second_order_schedule(|s| thermal_gate(params, s), 0.0025).unwrap();
        let config = TruncationConfig::new(Scheme::Ntu, 2);
        for step in 0..5 {
            let (s2_, rep) = evolve_step(&state, &schedule, &config, None).unwrap();
            state = s2_;
            if step > 0 {
                assert!(rep.max_eps < 1e-18, "step {step}: {}", rep.max_eps);
            }
        }
        assert_eq!(state.bond_dim(), 2);
    }

    #[test]
    fn ftu_matches_ntu_for_product_state() {
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        let state = initial_product_state(2, &[s2, s2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let env = crate::ctmrg::converge(&state, 4, 1e-10, 100).unwrap();
        for bond in BondId::ALL {
            let pair = apply_gate_and_reduce(&state, &gate, bond).unwrap();
            let ntu = ntu_metric(&state, &pair).unwrap();
            let ftu = ftu_metric(&env, &pair).unwrap();
            let n = ntu.g.scaled(Complex64::new(1.0 / ntu.g.norm(), 0.0));
            let f = ftu.g.scaled(Complex64::new(1.0 / ftu.g.norm(), 0.0));
            let diff = n.sub(&f).unwrap().norm();
            assert!(diff < 1e-8, "bond {bond:?}: {diff}");
        }
    }

    #[test]
    fn ftu_matches_ntu_for_separable_state() {
        // rank-1 site tensors: the environment factorizes exactly, so the
        // CTMRG metric must agree with the exact neighborhood one.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut outer = |d: usize| -> Vec<Complex64> {
            (0..d).map(|_| rand_c(&mut rng)).collect()
        };
        let mk = |p: &[Complex64], t: &[Complex64], l: &[Complex64], b: &[Complex64], r: &[Complex64]| {
            DenseTensor::from_fn(vec![2, 2, 2, 2, 2], |idx| {
                p[idx[0]] * t[idx[1]] * l[idx[2]] * b[idx[3]] * r[idx[4]]
            })
        };
        let (pa, ta, la, ba, ra) = (outer(2), outer(2), outer(2), outer(2), outer(2));
        let (pb, tb, lb, bb, rb) = (outer(2), outer(2), outer(2), outer(2), outer(2));
        let a = mk(&pa, &ta, &la, &ba, &ra);
        let b = mk(&pb, &tb, &lb, &bb, &rb);
        let state = IpepsState::new(a, b).unwrap();
        let gate = rand_gate_c(&mut rng, 2, 2);
        let env = crate::ctmrg::converge(&state, 8, 1e-11, 200).unwrap();
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        let ntu = ntu_metric(&state, &pair).unwrap();
        let ftu = ftu_metric(&env, &pair).unwrap();
        let n = ntu.g.scaled(Complex64::new(1.0 / ntu.g.norm(), 0.0));
        let f = ftu.g.scaled(Complex64::new(1.0 / ftu.g.norm(), 0.0));
        let diff = n.sub(&f).unwrap().norm();
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn ftu_requires_converged_environment() {
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        let state = initial_product_state(2, &[s2, s2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let gate = rand_gate_c(&mut rng, 2, 2);
        let pair = apply_gate_and_reduce(&state, &gate, BondId::HorizontalAB).unwrap();
        // max_sweeps = 0 leaves the environment unconverged
        let env = crate::ctmrg::converge(&state, 4, 1e-10, 0).unwrap();
        assert!(matches!(
            ftu_metric(&env, &pair),
            Err(Error::StaleEnvironment)
        ));
    }

    #[test]
    fn psd_clamp_reports_negative_weight() {
        let mut g = DenseTensor::<f64>::identity(4);
        g.set(&[3, 3], -0.5); // indefinite
        let metric = MetricTensor {
            g,
            ka: 2,
            kb: 2,
            provenance: MetricProvenance::FtuCtmrg,
            clamped_weight: 0.0,
            clamp_warning: false,
        };
        let clamped = clamp_to_psd(metric).unwrap();
        assert!((clamped.clamped_weight - 0.5 / 3.5).abs() < 1e-12);
        assert!(clamped.clamp_warning);
        let (vals, _) = eigh(&clamped.g).unwrap();
        assert!(vals.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn ftu_evolve_step_classical_quench() {
        use crate::gates::quench_gate;
        let s2 = Complex64::new(0.5f64.sqrt(), 0.0);
        let mut state = initial_product_state(2, &[s2, s2]).unwrap();
        let params = ModelParams::new(0.0, 0.0);
        let schedule =
            crate::gates::second_order_schedule(|s| quench_gate(params, s), 0.01).unwrap();
        let config = TruncationConfig::new(Scheme::Ftu, 2);
        for step in 0..3 {
            let env = crate::ctmrg::converge(&state, 8, 1e-10, 100).unwrap();
            let (next, rep) = evolve_step(&state, &schedule, &config, Some(&env)).unwrap();
            state = next;
            if step > 0 {
                assert!(rep.max_eps < 1e-18, "step {step}: {}", rep.max_eps);
            }
        }
    }
}
