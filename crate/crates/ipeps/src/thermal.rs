//! Hermitian thermal-state purification.
//!
//! The density operator at inverse temperature β is represented as
//! `ρ(β) = ρ(β/2) ρ(β/2)†` with `ρ(β/2)` an iPEPO written in the Hermitian
//! operator basis `O = (σ^x, σ^y, σ^z, 1)`. In this basis the iPEPO becomes
//! an ordinary iPEPS with physical dimension `d² = 4` whose tensors stay
//! real through the whole evolution — Hermiticity of the represented
//! operator is structural rather than numerical (the real scalar type cannot
//! hold an imaginary residue).
//!
//! One full second-order step conjugates by `e^{-dβ H/4}` on both sides,
//! advancing β by dβ.

use serde::Serialize;

use crate::ctmrg::{self, CtmEnvironment, PauliInsertions};
use crate::error::{Error, Result};
use crate::gates::{operator_basis, second_order_schedule, thermal_gate, ModelParams};
use crate::lattice::{initial_product_state, IpepsState};
use crate::tensor::DenseTensor;
use crate::truncation::{evolve_step, Scheme, StepReport, TruncationConfig};

/// Purification snapshot: a real iPEPS with `p = 4` plus its β bookkeeping.
#[derive(Debug, Clone)]
pub struct PurificationState {
    inner: IpepsState<f64>,
    beta: f64,
}

impl PurificationState {
    pub fn new(inner: IpepsState<f64>, beta: f64) -> Result<Self> {
        if inner.phys_dim() != 4 {
            return Err(Error::InvalidState(
                "purification needs operator-basis physical dimension 4".into(),
            ));
        }
        Ok(Self { inner, beta })
    }

    pub fn inner(&self) -> &IpepsState<f64> {
        &self.inner
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Infinite-temperature start: `ρ(0/2) ∝ 1`, i.e. a D = 1 product state with
/// only the identity component of the operator basis populated.
pub fn infinite_temperature_state() -> PurificationState {
    let state = initial_product_state(4, &[0.0, 0.0, 0.0, 1.0]).expect("nonzero local vector");
    PurificationState { inner: state, beta: 0.0 }
}

/// `[bra, ket]` insertion matrix realizing `Tr[O^b σ O^a] / d` on the
/// operator-basis legs. The anti-symmetric imaginary part cancels against
/// the bra-ket symmetric real environment, so only the real part is kept; a
/// non-negligible symmetric imaginary part would be a coding bug.
pub fn insertion(op: &DenseTensor<num_complex::Complex64>) -> Result<DenseTensor<f64>> {
    let basis = operator_basis();
    let mut out = DenseTensor::zeros(vec![4, 4]);
    let mut max_sym_imag = 0.0f64;
    for (b, ob) in basis.iter().enumerate() {
        for (a, oa) in basis.iter().enumerate() {
            let m = crate::tensor::contract(
                &crate::tensor::contract(ob, op, &[(1, 0)])?,
                oa,
                &[(1, 0)],
            )?;
            let tr = (0..2).map(|i| m.at(&[i, i])).sum::<num_complex::Complex64>();
            let w = tr * num_complex::Complex64::new(0.5, 0.0);
            out.set(&[b, a], w.re);
            // Hermiticity of the insertion: Im W[b,a] = -Im W[a,b].
            if b <= a {
                let m2 = crate::tensor::contract(
                    &crate::tensor::contract(oa, op, &[(1, 0)])?,
                    ob,
                    &[(1, 0)],
                )?;
                let tr2 = (0..2).map(|i| m2.at(&[i, i])).sum::<num_complex::Complex64>();
                max_sym_imag = max_sym_imag.max((w.im + 0.5 * tr2.im).abs());
            }
        }
    }
    if max_sym_imag > 1e-12 {
        return Err(Error::SymmetryViolation(max_sym_imag));
    }
    Ok(out)
}

/// Pauli insertions for purification observables.
pub fn pauli_insertions() -> PauliInsertions<f64> {
    PauliInsertions {
        sx: insertion(&crate::gates::pauli_x()).expect("hermitian basis"),
        sz: insertion(&crate::gates::pauli_z()).expect("hermitian basis"),
    }
}

/// Imaginary-time evolution driver state.
pub struct ThermalEvolution {
    state: PurificationState,
    params: ModelParams,
    dbeta: f64,
    config: TruncationConfig,
    warmup_beta: f64,
    schedule: Vec<(crate::gates::TrotterGate<f64>, crate::gates::Target)>,
    steps_taken: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalStepOutcome {
    pub beta: f64,
    pub scheme_used: Scheme,
    #[serde(flatten)]
    pub report: StepReport,
}

impl ThermalEvolution {
    /// Set up evolution from `state` with full-step `dbeta`. While
    /// `β < warmup_beta` the truncation scheme is forced to SVDU, which
    /// sidesteps the zero modes of a too-large bond dimension right after
    /// initialization.
    pub fn new(
        state: PurificationState,
        params: ModelParams,
        dbeta: f64,
        config: TruncationConfig,
        warmup_beta: f64,
    ) -> Result<Self> {
        assert!(dbeta > 0.0, "dbeta must be positive");
        assert!(warmup_beta >= 0.0);
        let schedule = second_order_schedule(|s| thermal_gate(params, s), dbeta)?;
        Ok(Self {
            state,
            params,
            dbeta,
            config,
            warmup_beta,
            schedule,
            steps_taken: 0,
        })
    }

    pub fn state(&self) -> &PurificationState {
        &self.state
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn scheme_in_use(&self) -> Scheme {
        if self.state.beta < self.warmup_beta {
            Scheme::Svdu
        } else {
            self.config.scheme
        }
    }

    /// Advance β by one full step. `env` is only consulted by the FTU
    /// scheme, which requires it converged on the entering state.
    pub fn step(&mut self, env: Option<&CtmEnvironment<f64>>) -> Result<ThermalStepOutcome> {
        let scheme_used = self.scheme_in_use();
        let mut config = self.config.clone();
        config.scheme = scheme_used;
        let (next, report) = evolve_step(&self.state.inner, &self.schedule, &config, env)?;
        self.steps_taken += 1;
        self.state = PurificationState {
            inner: next,
            beta: self.state.beta + self.dbeta,
        };
        Ok(ThermalStepOutcome {
            beta: self.state.beta,
            scheme_used,
            report,
        })
    }

    /// Converge an observable environment for the current state.
    pub fn converge_env(&self, chi: usize, tol: f64, max_sweeps: usize) -> Result<CtmEnvironment<f64>> {
        ctmrg::converge(&self.state.inner, chi, tol, max_sweeps)
    }
}
