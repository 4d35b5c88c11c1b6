//! Brute-force reference solvers that share no code with the simplex.

use activeset::lp::{LinearProgram, MilpProblem};
use nalgebra::{DMatrix, DVector};

const FEAS: f64 = 1e-7;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Calls `f` with every `k`-subset of `0..n`, in lexicographic order.
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Whether `z` satisfies every row and bound of `lp` up to a scaled tolerance.
pub fn is_feasible(lp: &LinearProgram, z: &[f64], tol: f64) -> bool {
    let scale = |row: &[f64], b: f64| 1.0 + b.abs() + row.iter().zip(z).map(|(a, v)| (a * v).abs()).fold(0.0, f64::max);
    lp.eq_matrix
        .iter()
        .zip(&lp.eq_rhs)
        .all(|(row, b)| (dot(row, z) - b).abs() <= tol * scale(row, *b))
        && lp
            .ub_matrix
            .iter()
            .zip(&lp.ub_rhs)
            .all(|(row, b)| dot(row, z) - b <= tol * scale(row, *b))
        && lp
            .var_bounds
            .iter()
            .zip(z)
            .all(|(&(lo, hi), &v)| v >= lo - tol * (1.0 + lo.abs()) && v <= hi + tol * (1.0 + hi.abs()))
}

/// Minimum of the objective over all basic feasible points, found by
/// solving every square system of equalities plus tight inequalities.
/// Requires finite variable bounds, so the feasible region is a polytope.
/// `None` means infeasible.
pub fn vertex_min(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    assert!(lp.var_bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite()));
    let mut rows: Vec<(Vec<f64>, f64)> = lp.ub_matrix.iter().cloned().zip(lp.ub_rhs.iter().copied()).collect();
    for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), hi));
        rows.push((e, lo));
    }
    // Keep a linearly independent subset of the equality rows. The rest are
    // implied when consistent, and the final feasibility test checks that.
    let mut eqs: Vec<(&Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        let k = eqs.len() + 1;
        let m = DMatrix::from_fn(k, n, |r, j| if r + 1 < k { eqs[r].0[j] } else { row[j] });
        if m.rank(1e-9) == k {
            eqs.push((row, *rhs));
        }
    }
    let m_eq = eqs.len();
    if m_eq > n {
        return None;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_subset(rows.len(), n - m_eq, &mut |pick| {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, &(row, rhs)) in eqs.iter().enumerate() {
            for j in 0..n {
                a[(r, j)] = row[j];
            }
            b[r] = rhs;
        }
        for (k, &i) in pick.iter().enumerate() {
            for j in 0..n {
                a[(m_eq + k, j)] = rows[i].0[j];
            }
            b[m_eq + k] = rows[i].1;
        }
        let lu = a.lu();
        if lu.determinant().abs() < 1e-9 {
            return;
        }
        let Some(z) = lu.solve(&b) else { return };
        let z: Vec<f64> = z.iter().copied().collect();
        if !is_feasible(lp, &z, FEAS * 10.0) {
            return;
        }
        let obj = dot(&lp.objective, &z);
        if best.as_ref().map_or(true, |(o, _)| obj < *o) {
            best = Some((obj, z));
        }
    });
    best
}

/// Minimum over every assignment of the binaries, each restricted LP solved
/// with [`vertex_min`]. `None` means infeasible.
pub fn milp_min(p: &MilpProblem) -> Option<f64> {
    let base = &p.base;
    let n = base.num_vars();
    let cont: Vec<usize> = (0..n).filter(|j| !p.binary_vars.contains(j)).collect();
    let k = p.binary_vars.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << k) {
        let fixed: Vec<f64> = (0..k).map(|b| f64::from((mask >> b) & 1)).collect();
        let mut fix = vec![None; n];
        for (b, &j) in p.binary_vars.iter().enumerate() {
            fix[j] = Some(fixed[b]);
        }
        let restrict = |row: &[f64], rhs: f64| {
            let shift: f64 = (0..n).filter_map(|j| fix[j].map(|v| row[j] * v)).sum();
            (cont.iter().map(|&j| row[j]).collect::<Vec<f64>>(), rhs - shift)
        };
        let mut lp = LinearProgram::new(cont.len());
        lp.objective = cont.iter().map(|&j| base.objective[j]).collect();
        lp.var_bounds = cont.iter().map(|&j| base.var_bounds[j]).collect();
        let constant: f64 = (0..n).filter_map(|j| fix[j].map(|v| base.objective[j] * v)).sum();
        let mut consistent = true;
        for (row, rhs) in base.eq_matrix.iter().zip(&base.eq_rhs) {
            let (r, b) = restrict(row, *rhs);
            if r.iter().all(|&a| a == 0.0) {
                // Only binaries in this row: it is a check, not a constraint.
                consistent &= b.abs() <= FEAS * (1.0 + rhs.abs());
                continue;
            }
            lp.eq_matrix.push(r);
            lp.eq_rhs.push(b);
        }
        if !consistent {
            continue;
        }
        for (row, rhs) in base.ub_matrix.iter().zip(&base.ub_rhs) {
            let (r, b) = restrict(row, *rhs);
            lp.ub_matrix.push(r);
            lp.ub_rhs.push(b);
        }
        let value = if cont.is_empty() {
            is_feasible(&lp, &[], FEAS * 10.0).then_some(constant)
        } else {
            vertex_min(&lp).map(|(o, _)| o + constant)
        };
        if let Some(v) = value {
            if best.map_or(true, |b| v < b) {
                best = Some(v);
            }
        }
    }
    best
}
