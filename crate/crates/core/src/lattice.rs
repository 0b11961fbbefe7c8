//! Exact linear algebra over ℚ and ℤ: echelon forms, independence, lattice
//! saturation with a unimodular complement.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::Rational;

/// Reduced row echelon form and the pivot column of each nonzero row.
pub fn rref(rows: &[Vec<Rational>]) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vec<Rational>]) -> usize {
    rref(rows).1.len()
}

/// Indices of a maximal independent subfamily, chosen greedily in order.
pub fn independent_rows(rows: &[Vec<Rational>]) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut acc: Vec<Vec<Rational>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        acc.push(row.clone());
        if rank(&acc) == acc.len() {
            kept.push(i);
        } else {
            acc.pop();
        }
    }
    kept
}

/// Coefficients `c` with `Σ c_i rows_i = v`, for independent `rows`.
pub fn solve(rows: &[Vec<Rational>], v: &[Rational]) -> Option<Vec<Rational>> {
    let k = rows.len();
    if k == 0 {
        return v.iter().all(Zero::is_zero).then(Vec::new);
    }
    // Columns of the system are the rows; augment with v.
    let n = v.len();
    let mut aug: Vec<Vec<Rational>> = (0..n)
        .map(|j| {
            let mut line: Vec<Rational> = rows.iter().map(|r| r[j].clone()).collect();
            line.push(v[j].clone());
            line
        })
        .collect();
    let mut r = 0;
    let mut where_: Vec<Option<usize>> = vec![None; k];
    for c in 0..k {
        let Some(p) = (r..n).find(|&i| !aug[i][c].is_zero()) else {
            continue;
        };
        aug.swap(r, p);
        let inv = aug[r][c].recip();
        for x in aug[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..n {
            if i != r && !aug[i][c].is_zero() {
                let f = aug[i][c].clone();
                for j in 0..=k {
                    let d = &f * &aug[r][j];
                    aug[i][j] -= d;
                }
            }
        }
        where_[c] = Some(r);
        r += 1;
    }
    if aug[r..].iter().any(|line| !line[k].is_zero()) {
        return None;
    }
    let mut out = Vec::with_capacity(k);
    for w in where_ {
        out.push(w.map_or_else(Rational::zero, |i| aug[i][k].clone()));
    }
    Some(out)
}

/// `Σ c_i rows_i`.
pub fn combine(rows: &[Vec<Rational>], coeffs: &[Rational], width: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); width];
    for (row, c) in rows.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += c * x;
        }
    }
    out
}

/// A column-style Hermite reduction `M·U = [H | 0]` of an integer matrix with
/// `U` unimodular; `Q = U⁻¹`. The first `rank` rows of `Q` are a basis of the
/// saturation `ℚM ∩ ℤ^c`, the remaining rows span a complement.
#[derive(Clone, Debug)]
pub struct Saturation {
    pub rank: usize,
    pub u: Vec<Vec<BigInt>>,
    pub q: Vec<Vec<BigInt>>,
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

impl Saturation {
    pub fn new(rows: &[Vec<BigInt>], cols: usize) -> Self {
        let mut m: Vec<Vec<BigInt>> = rows.to_vec();
        let mut u = identity(cols);
        let mut q = identity(cols);
        let mut next = 0;
        for i in 0..m.len() {
            if next == cols {
                break;
            }
            loop {
                let nonzero: Vec<usize> = (next..cols).filter(|&j| !m[i][j].is_zero()).collect();
                if nonzero.is_empty() {
                    break;
                }
                let &j0 = nonzero
                    .iter()
                    .min_by(|&&a, &&b| m[i][a].abs().cmp(&m[i][b].abs()))
                    .expect("nonempty");
                if j0 != next {
                    swap_cols(&mut m, &mut u, &mut q, j0, next);
                }
                let mut done = true;
                for j in next + 1..cols {
                    if m[i][j].is_zero() {
                        continue;
                    }
                    let k = m[i][j].div_floor(&m[i][next]);
                    add_col(&mut m, &mut u, &mut q, next, j, &-k);
                    if !m[i][j].is_zero() {
                        done = false;
                    }
                }
                if done {
                    if m[i][next].is_negative() {
                        negate_col(&mut m, &mut u, &mut q, next);
                    }
                    next += 1;
                    break;
                }
            }
        }
        Saturation { rank: next, u, q }
    }

    /// Coordinates of `v` in the basis given by the rows of `Q`.
    pub fn coords(&self, v: &[BigInt]) -> Vec<BigInt> {
        let n = self.u.len();
        (0..n)
            .map(|j| {
                v.iter()
                    .zip(&self.u)
                    .fold(BigInt::zero(), |acc, (x, row)| acc + x * &row[j])
            })
            .collect()
    }

    pub fn from_coords(&self, w: &[BigInt]) -> Vec<BigInt> {
        let n = self.q.len();
        (0..n)
            .map(|j| {
                w.iter()
                    .zip(&self.q)
                    .fold(BigInt::zero(), |acc, (x, row)| acc + x * &row[j])
            })
            .collect()
    }

    pub fn basis(&self) -> &[Vec<BigInt>] {
        &self.q[..self.rank]
    }

    /// Projection of `ℤ^c` onto the saturation along the complement.
    pub fn project(&self, v: &[BigInt]) -> Vec<BigInt> {
        let mut w = self.coords(v);
        for x in w.iter_mut().skip(self.rank) {
            *x = BigInt::zero();
        }
        self.from_coords(&w)
    }
}

fn swap_cols(m: &mut [Vec<BigInt>], u: &mut [Vec<BigInt>], q: &mut [Vec<BigInt>], a: usize, b: usize) {
    for row in m.iter_mut().chain(u.iter_mut()) {
        row.swap(a, b);
    }
    q.swap(a, b);
}

/// `col_b += k · col_a`.
fn add_col(m: &mut [Vec<BigInt>], u: &mut [Vec<BigInt>], q: &mut [Vec<BigInt>], a: usize, b: usize, k: &BigInt) {
    for row in m.iter_mut().chain(u.iter_mut()) {
        let d = &row[a] * k;
        row[b] += d;
    }
    let rb = q[b].clone();
    for (x, y) in q[a].iter_mut().zip(rb) {
        *x -= k * y;
    }
}

fn negate_col(m: &mut [Vec<BigInt>], u: &mut [Vec<BigInt>], q: &mut [Vec<BigInt>], a: usize) {
    for row in m.iter_mut().chain(u.iter_mut()) {
        row[a] = -&row[a];
    }
    for x in q[a].iter_mut() {
        *x = -&*x;
    }
}

/// A basis of the lattice spanned by integer vectors of length `dim`, each
/// basis vector an integer combination of the inputs.
pub fn lattice_basis(gens: &[Vec<BigInt>], dim: usize) -> Vec<Vec<BigInt>> {
    let m = gens.len();
    let rows: Vec<Vec<BigInt>> = (0..dim).map(|i| gens.iter().map(|g| g[i].clone()).collect()).collect();
    let sat = Saturation::new(&rows, m);
    (0..sat.rank)
        .map(|j| {
            (0..dim)
                .map(|i| (0..m).fold(BigInt::zero(), |acc, k| acc + &gens[k][i] * &sat.u[k][j]))
                .collect()
        })
        .collect()
}

pub fn to_rational(v: &[BigInt]) -> Vec<Rational> {
    v.iter().map(|x| BigRational::from_integer(x.clone())).collect()
}

/// Integer determinant by fraction-free elimination.
pub fn determinant(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    let rows: Vec<Vec<Rational>> = m.iter().map(|r| to_rational(r)).collect();
    let mut a = rows;
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return BigInt::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for i in c + 1..n {
            let f = &a[i][c] / &a[c][c];
            for j in c..n {
                let d = &f * &a[c][j];
                a[i][j] -= d;
            }
        }
    }
    det.to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;

    fn iv(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn rank_and_solve() {
        let rows = vec![vec![int(1), int(1)], vec![int(1), int(-1)]];
        assert_eq!(rank(&rows), 2);
        let c = solve(&rows, &[int(1), int(0)]).unwrap();
        assert_eq!(c, vec![crate::arith::rat(1, 2), crate::arith::rat(1, 2)]);
        let dep = vec![vec![int(2), int(4)], vec![int(1), int(2)], vec![int(0), int(1)]];
        assert_eq!(independent_rows(&dep), vec![0, 2]);
        assert!(solve(&dep[..1], &[int(0), int(1)]).is_none());
    }

    #[test]
    fn saturation_of_a_sublattice() {
        // span of (2,4,0): saturation is spanned by (1,2,0)
        let s = Saturation::new(&[iv(&[2, 4, 0])], 3);
        assert_eq!(s.rank, 1);
        let b = &s.basis()[0];
        assert!(b == &iv(&[1, 2, 0]) || b == &iv(&[-1, -2, 0]));
        assert_eq!(determinant(&s.q).abs(), BigInt::one());
        let v = iv(&[3, 6, 0]);
        assert_eq!(s.project(&v), v);
        let p = s.project(&iv(&[0, 0, 5]));
        assert_eq!(s.project(&p), p);
    }

    #[test]
    fn lattice_basis_spans() {
        let b = lattice_basis(&[iv(&[2, 0]), iv(&[0, 2]), iv(&[1, 1])], 2);
        assert_eq!(b.len(), 2);
        assert_eq!(determinant(&b).abs(), BigInt::from(2));
    }

    #[test]
    fn dependent_rows_do_not_raise_rank() {
        let s = Saturation::new(&[iv(&[1, 1]), iv(&[2, 2]), iv(&[1, -1])], 2);
        assert_eq!(s.rank, 2);
        let s = Saturation::new(&[iv(&[3, 3]), iv(&[2, 2])], 2);
        assert_eq!(s.rank, 1);
    }
}
