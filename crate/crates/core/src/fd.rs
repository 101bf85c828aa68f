//! Second-order finite differences on a uniform grid with the multi-point
//! conditions eliminated into the rows next to the endpoints.
//!
//! The discrete operator is tridiagonal plus two correction rows, so every
//! shifted system is solved in O(N) by a pivoted tridiagonal factorization
//! and a rank-two update.

use crate::error::{Error, Result};
use crate::problem::{Coefficient, MinusCondition, MultiPointCondition, Problem};

/// Relative distance below which an η counts as lying on a grid node.
const NODE_SNAP: f64 = 1e-10;

/// Uniform grid `x_j = -1 + j h`, `j = 0..=n+1`, with `n` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Invalid(format!(
                "grid needs at least 3 interior nodes, got {n}"
            )));
        }
        Ok(Grid {
            n,
            h: 2.0 / (n as f64 + 1.0),
        })
    }

    /// Coordinate of node `j` (0 and `n + 1` are the endpoints).
    pub fn x(&self, j: usize) -> f64 {
        if j == self.n + 1 {
            1.0
        } else {
            -1.0 + j as f64 * self.h
        }
    }

    pub fn interior(&self) -> Vec<f64> {
        (1..=self.n).map(|j| self.x(j)).collect()
    }

    /// Linear interpolation weights for `u(eta)` over full-grid node indices,
    /// plus whether `eta` fell between nodes.
    pub fn interpolate(&self, eta: f64) -> (Vec<(usize, f64)>, bool) {
        let s = (eta + 1.0) / self.h;
        let j = (s.floor() as usize).min(self.n);
        let frac = s - j as f64;
        if frac <= NODE_SNAP {
            (vec![(j, 1.0)], false)
        } else if frac >= 1.0 - NODE_SNAP {
            (vec![(j + 1, 1.0)], false)
        } else {
            (vec![(j, 1.0 - frac), (j + 1, frac)], true)
        }
    }
}

/// Endpoint values as linear combinations of interior values.
#[derive(Clone, Debug, PartialEq)]
pub struct Elimination {
    /// `u_0 = Σ w u_i` with `i` a 0-based interior index.
    pub minus: Vec<(usize, f64)>,
    /// `u_{n+1} = Σ w u_i`.
    pub plus: Vec<(usize, f64)>,
    /// η points that required interpolation.
    pub interpolated: Vec<f64>,
}

impl Elimination {
    /// Builds the elimination; the 2×2 coupling between the two endpoint
    /// values is solved first.
    pub fn new(grid: &Grid, minus: &MinusCondition, plus: &MultiPointCondition) -> Result<Self> {
        let n = grid.n;
        let mut interpolated = Vec::new();
        let mut full = |cond: &MultiPointCondition| {
            let mut row = vec![0.0; n + 2];
            for (a, e) in cond.alphas.iter().zip(&cond.etas) {
                let (w, off) = grid.interpolate(*e);
                if off {
                    interpolated.push(*e);
                }
                for (j, wj) in w {
                    row[j] += a * wj;
                }
            }
            row
        };
        let row_minus = match minus {
            MinusCondition::MultiPoint(m) => full(m),
            MinusCondition::Separated(s) => {
                // c0 u_0 + c1 (-3 u_0 + 4 u_1 - u_2) / 2h = 0
                let h = grid.h;
                let d = s.c0 - 1.5 * s.c1 / h;
                if d.abs() < 1e-300 {
                    return Err(Error::Singular(
                        "separated condition degenerates on this grid".into(),
                    ));
                }
                let mut row = vec![0.0; n + 2];
                row[1] = -2.0 * s.c1 / h / d;
                row[2] = 0.5 * s.c1 / h / d;
                row
            }
        };
        let row_plus = full(plus);
        let m = [
            [1.0 - row_minus[0], -row_minus[n + 1]],
            [-row_plus[0], 1.0 - row_plus[n + 1]],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::Singular(format!(
                "endpoint coupling determinant {det:e}"
            )));
        }
        let inv = [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ];
        let combine = |c0: f64, c1: f64| {
            (1..=n)
                .filter_map(|j| {
                    let w = c0 * row_minus[j] + c1 * row_plus[j];
                    (w != 0.0).then_some((j - 1, w))
                })
                .collect::<Vec<_>>()
        };
        interpolated.sort_by(f64::total_cmp);
        interpolated.dedup();
        Ok(Elimination {
            minus: combine(inv[0][0], inv[0][1]),
            plus: combine(inv[1][0], inv[1][1]),
            interpolated,
        })
    }

    /// Endpoint values `(u_0, u_{n+1})` for interior values `u`.
    pub fn endpoint_values(&self, u: &[f64]) -> (f64, f64) {
        let dot = |w: &[(usize, f64)]| w.iter().map(|&(i, c)| c * u[i]).sum::<f64>();
        (dot(&self.minus), dot(&self.plus))
    }
}

/// Discretized `-u''` on the interior nodes together with the coefficient values.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub grid: Grid,
    pub x: Vec<f64>,
    /// `r` at the interior nodes.
    pub r: Vec<f64>,
    pub elimination: Elimination,
}

impl DiscreteSystem {
    pub fn new(problem: &Problem, n: usize) -> Result<Self> {
        let grid = Grid::new(n)?;
        let x = grid.interior();
        let r = x.iter().map(|&xi| problem.r.value(xi)).collect();
        let elimination = Elimination::new(&grid, &problem.spec.bc_minus, problem.plus())?;
        Ok(DiscreteSystem {
            grid,
            x,
            r,
            elimination,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// `A u` with the endpoint values eliminated.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        let h2 = self.grid.h * self.grid.h;
        let (u0, un) = self.elimination.endpoint_values(u);
        (0..n)
            .map(|i| {
                let left = if i == 0 { u0 } else { u[i - 1] };
                let right = if i + 1 == n { un } else { u[i + 1] };
                (2.0 * u[i] - left - right) / h2
            })
            .collect()
    }

    /// Dense `A` (for small systems and cross-checks).
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let h2 = self.grid.h * self.grid.h;
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 / h2;
            if i > 0 {
                a[(i, i - 1)] = -1.0 / h2;
            }
            if i + 1 < n {
                a[(i, i + 1)] = -1.0 / h2;
            }
        }
        for &(j, w) in &self.elimination.minus {
            a[(0, j)] -= w / h2;
        }
        for &(j, w) in &self.elimination.plus {
            a[(n - 1, j)] -= w / h2;
        }
        a
    }

    /// Factorization of `A - diag(d)`.
    pub fn factor(&self, d: &[f64]) -> Result<ShiftedSolver> {
        ShiftedSolver::new(self, d)
    }

    /// Values of a coefficient at the interior nodes.
    pub fn sample(&self, c: &Coefficient) -> Vec<f64> {
        self.x.iter().map(|&x| c.value(x)).collect()
    }
}

/// LU factorization of a tridiagonal matrix with partial pivoting.
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    /// Upper factor: main, first and second superdiagonal.
    d: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    /// Multipliers and row swaps.
    l: Vec<f64>,
    swap: Vec<bool>,
}

impl TridiagonalLu {
    /// Factors the matrix with subdiagonal `sub`, diagonal `diag` and
    /// superdiagonal `sup` (`sub[i]` sits in row `i + 1`).
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut d = diag.to_vec();
        let mut u1: Vec<f64> = sup.to_vec();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swap = vec![false; n.saturating_sub(1)];
        let mut low: Vec<f64> = sub.to_vec();
        let scale = diag
            .iter()
            .chain(sub)
            .chain(sup)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n.saturating_sub(1) {
            // Rows i and i+1 hold (d[i], u1[i], u2[i]) and (low[i], d[i+1], u1[i+1]).
            if low[i].abs() > d[i].abs() {
                swap[i] = true;
                let (a0, a1, a2) = (d[i], u1[i], u2[i]);
                d[i] = low[i];
                u1[i] = d[i + 1];
                u2[i] = u1[i + 1];
                low[i] = a0;
                d[i + 1] = a1;
                u1[i + 1] = a2;
            }
            if d[i] == 0.0 {
                return Err(Error::Singular(format!("zero pivot in row {i}")));
            }
            let m = low[i] / d[i];
            l[i] = m;
            d[i + 1] -= m * u1[i];
            u1[i + 1] -= m * u2[i];
        }
        if n > 0 && d[n - 1].abs() <= 1e-15 * scale {
            return Err(Error::Singular("zero pivot in the last row".into()));
        }
        Ok(TridiagonalLu { d, u1, u2, l, swap })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.l[i] * y[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * y[i + 2];
            }
            y[i] = s / self.d[i];
        }
        y
    }
}

/// Solver for `(A - diag(d)) x = y` by a tridiagonal factorization and the
/// Woodbury identity for the two eliminated boundary rows.
#[derive(Clone, Debug)]
pub struct ShiftedSolver {
    lu: TridiagonalLu,
    /// Correction rows of the first and last equation.
    rows: [Vec<(usize, f64)>; 2],
    /// `T⁻¹ e_1`, `T⁻¹ e_n`.
    z: [Vec<f64>; 2],
    /// Inverse of the 2×2 capacitance matrix.
    cap_inv: [[f64; 2]; 2],
}

impl ShiftedSolver {
    fn new(sys: &DiscreteSystem, d: &[f64]) -> Result<Self> {
        let n = sys.n();
        let h2 = sys.grid.h * sys.grid.h;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 / h2 - d[i]).collect();
        let off = vec![-1.0 / h2; n - 1];
        let lu = TridiagonalLu::new(&off, &diag, &off)?;
        let scale = |w: &[(usize, f64)]| w.iter().map(|&(j, c)| (j, -c / h2)).collect::<Vec<_>>();
        let rows = [scale(&sys.elimination.minus), scale(&sys.elimination.plus)];
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let mut en = vec![0.0; n];
        en[n - 1] = 1.0;
        let z = [lu.solve(&e1), lu.solve(&en)];
        let dot = |row: &[(usize, f64)], v: &[f64]| row.iter().map(|&(j, c)| c * v[j]).sum::<f64>();
        let cap = [
            [1.0 + dot(&rows[0], &z[0]), dot(&rows[0], &z[1])],
            [dot(&rows[1], &z[0]), 1.0 + dot(&rows[1], &z[1])],
        ];
        let det = cap[0][0] * cap[1][1] - cap[0][1] * cap[1][0];
        if !(det.abs() > 1e-14) {
            return Err(Error::Singular(format!(
                "boundary capacitance determinant {det:e}"
            )));
        }
        let cap_inv = [
            [cap[1][1] / det, -cap[0][1] / det],
            [-cap[1][0] / det, cap[0][0] / det],
        ];
        Ok(ShiftedSolver {
            lu,
            rows,
            z,
            cap_inv,
        })
    }

    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.lu.solve(y);
        let dot = |row: &[(usize, f64)], v: &[f64]| row.iter().map(|&(j, c)| c * v[j]).sum::<f64>();
        let v = [dot(&self.rows[0], &x), dot(&self.rows[1], &x)];
        let c = [
            self.cap_inv[0][0] * v[0] + self.cap_inv[0][1] * v[1],
            self.cap_inv[1][0] * v[0] + self.cap_inv[1][1] * v[1],
        ];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi -= self.z[0][i] * c[0] + self.z[1][i] * c[1];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CoefficientSpec;
    use proptest::prelude::*;

    #[test]
    fn dirichlet_is_tridiagonal() {
        let p = Problem::dirichlet(CoefficientSpec::expression("1")).unwrap();
        let s = DiscreteSystem::new(&p, 9).unwrap();
        assert!(s.elimination.minus.is_empty() && s.elimination.plus.is_empty());
        let a = s.dense();
        let h2 = s.grid.h * s.grid.h;
        assert!((a[(0, 0)] - 2.0 / h2).abs() < 1e-12);
        assert!((a[(3, 4)] + 1.0 / h2).abs() < 1e-12);
        assert_eq!(a[(0, 5)], 0.0);
    }

    #[test]
    fn endpoint_coupling() {
        // u(-1) = 0.5 u(1), u(1) = 0.5 u(-1) forces both endpoint values to zero.
        let p = Problem::multipoint(
            CoefficientSpec::expression("1"),
            (vec![0.5], vec![1.0]),
            (vec![0.5], vec![-1.0]),
        )
        .unwrap();
        let s = DiscreteSystem::new(&p, 7).unwrap();
        assert!(s.elimination.minus.is_empty() && s.elimination.plus.is_empty());
        // Off-grid η is interpolated and recorded.
        let p = Problem::multipoint(
            CoefficientSpec::expression("1"),
            (vec![0.5], vec![0.1]),
            (vec![0.5], vec![0.0]),
        )
        .unwrap();
        let s = DiscreteSystem::new(&p, 8).unwrap();
        assert_eq!(s.elimination.interpolated, vec![0.0, 0.1]);
        let u: Vec<f64> = s.x.iter().map(|x| 1.0 + x).collect();
        let (u0, un) = s.elimination.endpoint_values(&u);
        assert!((u0 - 0.55).abs() < 1e-12 && (un - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shifted_solver_matches_dense(
            a in -0.45f64..0.45, b in -0.45f64..0.45,
            e1 in -0.9f64..0.95, e2 in -0.95f64..0.9,
            shift in -50.0f64..50.0, n in 5usize..40,
        ) {
            let p = Problem::multipoint(CoefficientSpec::expression("2 - cos(pi*x/2)"), (vec![a], vec![e1]), (vec![b], vec![e2])).unwrap();
            let s = DiscreteSystem::new(&p, n).unwrap();
            let d: Vec<f64> = s.r.iter().map(|r| shift * r).collect();
            let mut m = s.dense();
            for i in 0..n { m[(i, i)] -= d[i]; }
            let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
            if let Ok(solver) = s.factor(&d) {
                let x = solver.solve(&y);
                let r = &m * nalgebra::DVector::from_vec(x.clone()) - nalgebra::DVector::from_vec(y.clone());
                let scale = m.norm() * nalgebra::DVector::from_vec(x).norm();
                prop_assert!(r.norm() <= 1e-10 * scale.max(1.0));
            }
            let u: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let au = s.apply(&u);
            let dense = &s.dense() * nalgebra::DVector::from_vec(u);
            for i in 0..n { prop_assert!((au[i] - dense[i]).abs() <= 1e-9 * dense.amax().max(1.0)); }
        }
    }
}
