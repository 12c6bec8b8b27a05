//! Largest-modulus eigenvalue of a sparse, generally non-symmetric matrix by
//! restarted Arnoldi: each cycle builds a Krylov basis, takes Ritz values from the
//! Hessenberg projection and restarts from the dominant Ritz vector. The first
//! cycle starts from the normalized all-ones vector.

use num_complex::Complex;

use super::scalar::{dot, norm2, Real};
use super::sparse::SparseMatrix;
use super::NumericsError;

const KRYLOV_DIM: usize = 48;

/// Estimates `max |λ|` over the eigenvalues of a square sparse matrix.
///
/// Converges once the dominant Ritz pair has residual `‖M y − θ y‖ ≤ tol·|θ|‖y‖`.
/// `max_iters` bounds the number of restart cycles.
pub fn spectral_radius<T: Real>(m: &SparseMatrix<T>, tol: f64, max_iters: usize) -> Result<f64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 || m.nnz() == 0 || m.max_abs() == T::zero() {
        return Err(NumericsError::InvalidArgument(
            "spectral radius of a zero matrix".into(),
        ));
    }
    let dim = n.min(KRYLOV_DIM);
    let mut start = vec![T::one() / T::lit(n as f64).sqrt(); n];
    let mut estimate = f64::NAN;

    for _ in 0..max_iters.max(1) {
        let arnoldi = Arnoldi::build(m, &start, dim);
        let h = arnoldi.hessenberg();
        let ritz = hessenberg_eigenvalues(&h)?;
        let theta = ritz
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("non-empty Krylov basis");
        estimate = theta.norm();
        if arnoldi.invariant || estimate == 0.0 {
            return Ok(estimate);
        }

        let y = hessenberg_eigenvector(&h, theta);
        let (re, im) = arnoldi.lift(&y);
        let residual = complex_residual(m, &re, &im, theta);
        let size = (norm2(&re).as_f64().powi(2) + norm2(&im).as_f64().powi(2)).sqrt();
        if residual <= tol * estimate * size {
            return Ok(estimate);
        }

        // Re(y) + Im(y) spans the same invariant plane for a conjugate pair.
        let mut next: Vec<T> = re.iter().zip(&im).map(|(&a, &b)| a + b).collect();
        let norm = norm2(&next);
        if !(norm > T::zero()) || !norm.is_finite() {
            next = re;
        }
        let norm = norm2(&next);
        next.iter_mut().for_each(|v| *v = *v / norm);
        start = next;
    }
    Err(NumericsError::NoConvergence {
        iterations: max_iters,
        last_estimate: estimate,
    })
}

struct Arnoldi<T> {
    /// Orthonormal basis vectors, `basis.len() == h.len()`.
    basis: Vec<Vec<T>>,
    /// Column `j` of the Hessenberg matrix, rows `0..=j+1`.
    columns: Vec<Vec<f64>>,
    invariant: bool,
}

impl<T: Real> Arnoldi<T> {
    fn build(m: &SparseMatrix<T>, start: &[T], dim: usize) -> Self {
        let mut basis = vec![start.to_vec()];
        let mut columns = Vec::with_capacity(dim);
        let mut invariant = false;
        let mut w = vec![T::zero(); start.len()];
        for j in 0..dim {
            m.matvec_into(&basis[j], &mut w);
            let scale = norm2(&w).as_f64();
            let mut col = vec![0.0; j + 2];
            // Two Gram-Schmidt passes keep the basis orthogonal to working precision.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    col[i] += c.as_f64();
                    for (wk, &vk) in w.iter_mut().zip(v) {
                        *wk = *wk - c * vk;
                    }
                }
            }
            let beta = norm2(&w);
            col[j + 1] = beta.as_f64();
            columns.push(col);
            if !(beta.as_f64() > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
                invariant = true;
                break;
            }
            if j + 1 < dim {
                basis.push(w.iter().map(|&x| x / beta).collect());
            }
        }
        basis.truncate(columns.len());
        Self {
            basis,
            columns,
            invariant,
        }
    }

    /// Square Hessenberg projection, row-major.
    fn hessenberg(&self) -> Vec<Vec<f64>> {
        let k = self.columns.len();
        let mut h = vec![vec![0.0; k]; k];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate().take(k) {
                h[i][j] = v;
            }
        }
        h
    }

    fn lift(&self, y: &[Complex<f64>]) -> (Vec<T>, Vec<T>) {
        let n = self.basis[0].len();
        let mut re = vec![T::zero(); n];
        let mut im = vec![T::zero(); n];
        for (v, c) in self.basis.iter().zip(y) {
            let (a, b) = (T::lit(c.re), T::lit(c.im));
            for i in 0..n {
                re[i] = re[i] + a * v[i];
                im[i] = im[i] + b * v[i];
            }
        }
        (re, im)
    }
}

fn complex_residual<T: Real>(m: &SparseMatrix<T>, re: &[T], im: &[T], theta: Complex<f64>) -> f64 {
    let mre = m.matvec(re);
    let mim = m.matvec(im);
    let (tr, ti) = (theta.re, theta.im);
    let mut acc = 0.0;
    for i in 0..re.len() {
        let (a, b) = (re[i].as_f64(), im[i].as_f64());
        let dr = mre[i].as_f64() - (tr * a - ti * b);
        let di = mim[i].as_f64() - (tr * b + ti * a);
        acc += dr * dr + di * di;
    }
    acc.sqrt()
}

/// Eigenvector of a small Hessenberg matrix for an (approximate) eigenvalue, by
/// inverse iteration with complex Gaussian elimination.
fn hessenberg_eigenvector(h: &[Vec<f64>], theta: Complex<f64>) -> Vec<Complex<f64>> {
    let k = h.len();
    let scale = h
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let shift = theta + Complex::new(scale * 1e-10, 0.0);
    let mut a: Vec<Vec<Complex<f64>>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| Complex::new(h[i][j], 0.0) - if i == j { shift } else { Complex::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    // LU with partial pivoting.
    let mut perm: Vec<usize> = (0..k).collect();
    for c in 0..k {
        let p = (c..k)
            .max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm()))
            .unwrap();
        a.swap(c, p);
        perm.swap(c, p);
        if a[c][c].norm() < scale * 1e-300 {
            a[c][c] = Complex::new(scale * f64::EPSILON, 0.0);
        }
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            a[r][c] = f;
            for j in c + 1..k {
                let t = a[c][j];
                a[r][j] -= f * t;
            }
        }
    }
    let mut y = vec![Complex::new(1.0, 0.0); k];
    for _ in 0..3 {
        let mut b: Vec<Complex<f64>> = perm.iter().map(|&p| y[p]).collect();
        for r in 0..k {
            for j in 0..r {
                let t = a[r][j] * b[j];
                b[r] -= t;
            }
        }
        for r in (0..k).rev() {
            for j in r + 1..k {
                let t = a[r][j] * b[j];
                b[r] -= t;
            }
            b[r] /= a[r][r];
        }
        let norm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        y = b.into_iter().map(|c| c / norm).collect();
    }
    y
}

/// All eigenvalues of an upper Hessenberg matrix (shifted QR, Francis double step).
pub(crate) fn hessenberg_eigenvalues(h: &[Vec<f64>]) -> Result<Vec<Complex<f64>>, NumericsError> {
    let n = h.len();
    // 1-based working copy keeps the index arithmetic of the classic algorithm intact.
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[i][j];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                let mut y = a[nn - 1][nn - 1];
                let mut w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(NumericsError::NoConvergence {
                            iterations: its,
                            last_estimate: f64::NAN,
                        });
                    }
                    if its == 10 || its == 20 || its == 40 {
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    let (mut p, mut q, mut r);
                    loop {
                        let z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    pp += r * a[k + 2][j];
                                    a[k + 2][j] -= pp * z;
                                }
                                a[k + 1][j] -= pp * y;
                                a[k][j] -= pp * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    pp += z * a[i][k + 2];
                                    a[i][k + 2] -= pp * r;
                                }
                                a[i][k + 1] -= pp * q;
                                a[i][k] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn == 0 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}
