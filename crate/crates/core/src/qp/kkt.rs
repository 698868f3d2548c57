use super::dense::{lstsq, Mat};
use super::QpProblem;
use crate::error::Result;
use crate::scalar::{norm_inf, Scalar};

/// First-order optimality residuals at a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport<T> {
    /// `‖Px + q + A_eqᵀν + A_inᵀλ‖∞` with the best sign-consistent multipliers.
    pub stationarity: T,
    pub primal_feasibility: T,
    pub complementarity: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.complementarity)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Upper,
    Both,
}

/// Evaluates the KKT conditions at `x` without any solver state.
///
/// Multipliers are estimated by least squares over the constraints active
/// at `x`; any multiplier with the wrong sign is dropped (largest first) and
/// the fit repeated, so a point where the objective still decreases into the
/// feasible set reports a nonzero stationarity residual.
pub fn check_kkt<T: Scalar>(pb: &QpProblem<T>, x: &[T]) -> Result<KktReport<T>> {
    pb.validate()?;
    if x.len() != pb.num_vars() {
        return Err(crate::error::Error::contract(format!(
            "x has length {} but the problem has {} variables",
            x.len(),
            pb.num_vars()
        )));
    }
    let n = x.len();
    let me = pb.b_eq.len();
    let ain_x = pb.a_in.mul_vec(x);
    let aeq_x = pb.a_eq.mul_vec(x);

    let mut primal = T::zero();
    for (a, b) in aeq_x.iter().zip(&pb.b_eq) {
        primal = primal.max((*a - *b).abs());
    }
    let act_tol = T::epsilon().sqrt();
    let mut active: Vec<(usize, Side)> = Vec::new();
    for r in 0..ain_x.len() {
        let (a, l, u) = (ain_x[r], pb.l_in[r], pb.u_in[r]);
        primal = primal.max(l - a).max(a - u);
        let at_lo = l.is_finite() && a - l <= act_tol * (T::one() + l.abs());
        let at_hi = u.is_finite() && u - a <= act_tol * (T::one() + u.abs());
        match (at_lo, at_hi) {
            (true, true) => active.push((r, Side::Both)),
            (true, false) => active.push((r, Side::Lower)),
            (false, true) => active.push((r, Side::Upper)),
            _ => {}
        }
    }

    let px = pb.p.mul_vec(x);
    let grad: Vec<T> = px.iter().zip(&pb.q).map(|(a, b)| *a + *b).collect();

    let residual_for = |active: &[(usize, Side)]| -> (Vec<T>, Vec<T>) {
        let k = me + active.len();
        let mut jac = Mat::zeros(n, k);
        for i in 0..me {
            for (j, v) in pb.a_eq.row(i).iter().enumerate() {
                jac[(j, i)] = *v;
            }
        }
        for (c, (r, _)) in active.iter().enumerate() {
            for (j, v) in pb.a_in.row(*r).iter().enumerate() {
                jac[(j, me + c)] = *v;
            }
        }
        let neg: Vec<T> = grad.iter().map(|g| -*g).collect();
        let w = lstsq(&jac, &neg);
        let mut res = grad.clone();
        for (ri, v) in res.iter_mut().zip(jac.mul_vec(&w)) {
            *ri += v;
        }
        (w, res)
    };

    loop {
        let (w, res) = residual_for(&active);
        // Lower-bound multipliers must be ≤ 0 and upper ≥ 0 in this sign convention.
        let worst = active
            .iter()
            .enumerate()
            .filter_map(|(c, (_, side))| {
                let lam = w[me + c];
                let bad = match side {
                    Side::Lower => lam.max(T::zero()),
                    Side::Upper => (-lam).max(T::zero()),
                    Side::Both => T::zero(),
                };
                (bad > T::zero()).then_some((c, bad))
            })
            .fold(None::<(usize, T)>, |acc, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            });
        if let Some((c, _)) = worst {
            active.remove(c);
            continue;
        }
        let mut comp = T::zero();
        for (c, (r, side)) in active.iter().enumerate() {
            let lam = w[me + c].abs();
            let dist = match side {
                Side::Lower => ain_x[*r] - pb.l_in[*r],
                Side::Upper => pb.u_in[*r] - ain_x[*r],
                Side::Both => T::zero(),
            };
            comp = comp.max(lam * dist.abs());
        }
        return Ok(KktReport {
            stationarity: norm_inf(&res),
            primal_feasibility: primal,
            complementarity: comp,
        });
    }
}
