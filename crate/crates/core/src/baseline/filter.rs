use crate::error::{Error, Result};
use crate::qcore::{CMat2, DensityMatrix, C64};
use crate::sim::{dissipator, em_step, record_drift, Trajectory};

/// One conditional update driven by a recorded increment: the Wiener
/// increment is reconstructed as `dW = dy − √(γη)Tr[(L + L†)ρ]dt`.
pub fn filter_step(rho: &DensityMatrix, h: &CMat2, gamma: f64, eta: f64, dt: f64, dy: f64) -> Result<DensityMatrix> {
    let dw = dy - record_drift(&CMat2::pauli_z(), rho.mat(), gamma, eta) * dt;
    Ok(em_step(rho, h, gamma, eta, dt, dw)?.rho)
}

/// Runs [`filter_step`] over a record with `(H, γ)` supplied per step.
pub fn run_filter<F>(record: &[f64], dt: f64, eta: f64, mut schedule: F) -> Result<Vec<DensityMatrix>>
where
    F: FnMut(usize, &DensityMatrix) -> (CMat2, f64),
{
    let mut rho = DensityMatrix::ground();
    let mut out = Vec::with_capacity(record.len());
    for (t, &dy) in record.iter().enumerate() {
        let (h, gamma) = schedule(t, &rho);
        rho = filter_step(&rho, &h, gamma, eta, dt, dy)
            .map_err(|e| match e {
                Error::Integration { reason, .. } => Error::Integration { step: t, reason },
                other => other,
            })?;
        out.push(rho);
    }
    Ok(out)
}

/// The oracle filter: true parameters and switch time.
pub fn exact_filter(traj: &Trajectory) -> Result<Vec<DensityMatrix>> {
    let p = traj.params;
    run_filter(&traj.record, p.dt, p.eta, |t, _| (p.hamiltonian(t), p.gamma_at(t)))
}

/// `−i[H, ρ] + γD[σz](ρ)`
pub fn lindblad_rhs(rho: &CMat2, h: &CMat2, gamma: f64) -> CMat2 {
    h.commutator(rho).scale_c(C64::new(0.0, -1.0)) + dissipator(&CMat2::pauli_z(), rho).scale(gamma)
}

/// Classical fourth-order Runge–Kutta step of the unconditional equation.
pub fn lindblad_rk4_step(rho: &CMat2, h: &CMat2, gamma: f64, dt: f64) -> CMat2 {
    let f = |r: &CMat2| lindblad_rhs(r, h, gamma);
    let k1 = f(rho);
    let k2 = f(&(*rho + k1.scale(dt / 2.0)));
    let k3 = f(&(*rho + k2.scale(dt / 2.0)));
    let k4 = f(&(*rho + k3.scale(dt)));
    *rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
}

/// Ignores the record and propagates the ensemble-average state with the
/// given schedule.
pub fn lindblad_filter<F>(steps: usize, dt: f64, mut schedule: F) -> Result<Vec<DensityMatrix>>
where
    F: FnMut(usize) -> (CMat2, f64),
{
    let mut rho = *DensityMatrix::ground().mat();
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let (h, gamma) = schedule(t);
        rho = lindblad_rk4_step(&rho, &h, gamma, dt).hermitize();
        rho = rho.scale(1.0 / rho.trace().re);
        out.push(DensityMatrix::new(rho)?);
    }
    Ok(out)
}
