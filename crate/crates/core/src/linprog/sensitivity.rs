use super::{dot, LinearProgram, LpError, LpSolution, LpStatus};

/// Direction of change of the LP data. Empty fields mean "no change".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpPerturbation {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), LpError> {
    if got != 0 && got != want {
        return Err(LpError::Malformed(format!("perturbation {what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Directional derivative of the optimal value along `pert`.
///
/// Uses the optimal primal/dual pair, so it is only defined when that pair is
/// unique: degenerate solutions yield [`LpError::Degenerate`].
pub fn sensitivity(lp: &LinearProgram, sol: &LpSolution, pert: &LpPerturbation) -> Result<f64, LpError> {
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(sol.status));
    }
    if sol.is_degenerate() {
        return Err(LpError::Degenerate);
    }
    let n = lp.n_vars();
    check_len("c", pert.c.len(), n)?;
    check_len("a_eq", pert.a_eq.len(), lp.a_eq.len())?;
    check_len("b_eq", pert.b_eq.len(), lp.b_eq.len())?;
    check_len("a_ub", pert.a_ub.len(), lp.a_ub.len())?;
    check_len("b_ub", pert.b_ub.len(), lp.b_ub.len())?;
    for r in pert.a_eq.iter().chain(&pert.a_ub) {
        check_len("row", r.len(), n)?;
    }

    let z = &sol.z_star;
    let mut dv = if pert.c.is_empty() { 0.0 } else { dot(&pert.c, z) };
    let rows = |da: &[Vec<f64>], db: &[f64], y: &[f64]| -> f64 {
        (0..y.len())
            .map(|i| {
                let b = db.get(i).copied().unwrap_or(0.0);
                let a = da.get(i).map_or(0.0, |r| if r.is_empty() { 0.0 } else { dot(r, z) });
                y[i] * (b - a)
            })
            .sum()
    };
    dv += rows(&pert.a_eq, &pert.b_eq, &sol.dual.eq);
    dv += rows(&pert.a_ub, &pert.b_ub, &sol.dual.ub);
    Ok(dv)
}
