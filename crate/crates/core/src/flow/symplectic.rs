use std::thread;

use super::{flow_map, IntegratorConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::quasivel::MechanicalSystem;
use crate::reduction::ReducedProblem;
use crate::skinner_rusk::{lift_differential, presymplectic_form, W1State};

/// Central-difference step for flow-map and lift differentials.
const FD_STEP: f64 = 1e-5;

/// `Ω_{W₁}` at `w` as a `4n × 4n` skew matrix: `Dλᵀ Ω Dλ` with `λ` the lift
/// to `W₀` and `Dλ` by central differences.
pub fn pulled_back_form<M: MechanicalSystem>(rp: &ReducedProblem<M>, w: &W1State<f64>) -> Result<Matrix<f64>> {
    let dl = lift_differential(rp, w, FD_STEP)?;
    let om = presymplectic_form(w.n(), w.m());
    Ok(dl.transpose().matmul(&om).matmul(&dl))
}

fn shifted(w: &W1State<f64>, v: &[f64], s: f64) -> Result<W1State<f64>> {
    let x: Vec<f64> = w.to_vec().iter().zip(v).map(|(a, b)| a + s * b).collect();
    W1State::from_slice(w.n(), w.m(), &x)
}

/// `max |Ω_{W₁}(DF·V, DF·W) − Ω_{W₁}(V, W)|` over the probe pairs
/// `(probes[0], probes[1]), (probes[2], probes[3]), …`, where `F` is the
/// numerical flow map over `cfg`'s span.
///
/// `DF·V` is a central difference of two trajectories started at
/// `w0 ± εV`. The reference side uses the same difference of the two starting
/// points, so a zero-length span gives exactly zero.
pub fn monitor_symplecticity<M: MechanicalSystem>(
    rp: &ReducedProblem<M>,
    w0: &W1State<f64>,
    cfg: &IntegratorConfig,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if probes.is_empty() || probes.len() % 2 != 0 || probes.iter().any(|p| p.len() != w0.dim()) {
        return Err(Error::Dimension(format!(
            "need an even, non-zero number of probe vectors of length {}",
            w0.dim()
        )));
    }
    let starts: Vec<(W1State<f64>, W1State<f64>)> = probes
        .iter()
        .map(|v| Ok((shifted(w0, v, FD_STEP)?, shifted(w0, v, -FD_STEP)?)))
        .collect::<Result<_>>()?;

    let (end, ends) = thread::scope(|s| {
        let end = s.spawn(|| flow_map(rp, w0, cfg));
        let handles: Vec<_> = starts
            .iter()
            .map(|(p, m)| (s.spawn(move || flow_map(rp, p, cfg)), s.spawn(move || flow_map(rp, m, cfg))))
            .collect();
        let ends: Vec<Result<(W1State<f64>, W1State<f64>)>> = handles
            .into_iter()
            .map(|(hp, hm)| Ok((hp.join().expect("flow thread panicked")?, hm.join().expect("flow thread panicked")?)))
            .collect();
        (end.join().expect("flow thread panicked"), ends)
    });
    let end = end?;

    let diff = |(a, b): (&W1State<f64>, &W1State<f64>)| -> Vec<f64> {
        a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| (x - y) / (2.0 * FD_STEP)).collect()
    };
    let before: Vec<Vec<f64>> = starts.iter().map(|(p, m)| diff((p, m))).collect();
    let after: Vec<Vec<f64>> = ends
        .into_iter()
        .map(|r| r.map(|(p, m)| diff((&p, &m))))
        .collect::<Result<_>>()?;

    let om0 = pulled_back_form(rp, w0)?;
    let om1 = if end == *w0 { om0.clone() } else { pulled_back_form(rp, &end)? };
    let mut worst: f64 = 0.0;
    for k in (0..probes.len()).step_by(2) {
        let w_before = dot(&before[k], &om0.mul_vec(&before[k + 1]));
        let w_after = dot(&after[k], &om1.mul_vec(&after[k + 1]));
        worst = worst.max((w_after - w_before).abs());
    }
    Ok(worst)
}
