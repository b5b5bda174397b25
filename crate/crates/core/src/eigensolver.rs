//! Dense Hermitian eigensolver.
//!
//! The matrix is reduced to Hermitian tridiagonal form with complex
//! Householder reflectors `P = I - u u*` (`u* u = 2`). A diagonal unitary
//! then rotates the complex sub-diagonal onto the non-negative reals, and the
//! resulting real symmetric tridiagonal matrix is diagonalised by implicit QL
//! with Wilkinson-type shifts. Eigenvectors are assembled as `Q D Z`.

use num_complex::Complex64;

use crate::{Error, HermitianMatrix, Result};

/// Total QL iterations allowed per unit of dimension.
const ITERATIONS_PER_EIGENVALUE: usize = 30;

/// Eigenvalues in ascending order, optionally with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    /// Column-major `n x n`: eigenvector `k` occupies `[k * n, (k + 1) * n)`.
    eigenvectors: Option<Vec<Complex64>>,
}

impl Spectrum {
    /// Spectrum from raw values (sorted here). Rejects non-finite values.
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("a spectrum needs at least one eigenvalue".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite eigenvalue {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues: values, eigenvectors: None })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn has_eigenvectors(&self) -> bool {
        self.eigenvectors.is_some()
    }

    /// Unit eigenvector paired with `eigenvalues()[k]`.
    pub fn eigenvector(&self, k: usize) -> Option<&[Complex64]> {
        let n = self.n();
        self.eigenvectors.as_ref().map(|v| &v[k * n..(k + 1) * n])
    }

    pub fn into_eigenvalues(self) -> Vec<f64> {
        self.eigenvalues
    }
}

/// Eigenvalues and eigenvectors of `h`.
///
/// Each eigenvector is normalised so that its largest-magnitude component
/// (lowest index on ties) is real and positive.
pub fn eigh(h: &HermitianMatrix) -> Result<Spectrum> {
    decompose(h, true)
}

/// Eigenvalues only; skips all eigenvector accumulation.
pub fn eigvalsh(h: &HermitianMatrix) -> Result<Spectrum> {
    decompose(h, false)
}

/// Matrix with row and column `j` (0-based) removed.
pub fn minor(h: &HermitianMatrix, j: usize) -> Result<HermitianMatrix> {
    h.minor(j)
}

fn decompose(h: &HermitianMatrix, vectors: bool) -> Result<Spectrum> {
    let n = h.n();
    if let Some((idx, z)) = h.as_slice().iter().enumerate().find(|(_, z)| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain(format!("matrix entry ({}, {}) = {z} is not finite", idx / n, idx % n)));
    }
    let tri = tridiagonalize(h, vectors);
    let mut diag = tri.diag;
    // off[i] couples i and i+1; off[n-1] is workspace for the QL sweep.
    let mut off = vec![0.0; n];
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let e = tri.sub[k];
        let r = e.norm();
        off[k] = r;
        phases[k + 1] = if r > 0.0 { phases[k] * (e / r) } else { phases[k] };
    }
    let mut zt = if vectors { Some(identity_real(n)) } else { None };
    tql(&mut diag, &mut off, zt.as_deref_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();

    let eigenvectors = match (zt, tri.q) {
        (Some(zt), Some(mut q)) => {
            // Q <- Q D
            for row in q.chunks_exact_mut(n) {
                for (qk, ph) in row.iter_mut().zip(&phases) {
                    *qk *= ph;
                }
            }
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for (col, &src) in order.iter().enumerate() {
                let zcol = &zt[src * n..(src + 1) * n];
                let dst = &mut out[col * n..(col + 1) * n];
                for (r, qrow) in q.chunks_exact(n).enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (qv, &zv) in qrow.iter().zip(zcol) {
                        acc += qv * zv;
                    }
                    dst[r] = acc;
                }
                fix_phase(dst);
            }
            Some(out)
        }
        _ => None,
    };
    Ok(Spectrum { eigenvalues, eigenvectors })
}

fn identity_real(n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    z
}

fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm_sqr();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    let pivot = v[best];
    let r = pivot.norm();
    if r == 0.0 {
        return;
    }
    let rot = pivot.conj() / r;
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[best] = Complex64::new(r, 0.0);
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `sub[k] = T[k+1][k]`, complex.
    sub: Vec<Complex64>,
    /// Row-major accumulated reflectors, `A = Q T Q*`.
    q: Option<Vec<Complex64>>,
}

fn tridiagonalize(h: &HermitianMatrix, accumulate: bool) -> Tridiagonal {
    let n = h.n();
    // Lower triangle (j <= i) in split real/imaginary storage.
    let mut ar = vec![0.0; n * n];
    let mut ai = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let z = h.get(i, j);
            ar[i * n + j] = z.re;
            ai[i * n + j] = z.im;
        }
    }
    let mut diag = vec![0.0; n];
    let mut sub = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut reflectors: Vec<(usize, Vec<Complex64>)> = Vec::new();
    let (mut ur, mut ui) = (vec![0.0; n], vec![0.0; n]);
    let (mut pr, mut pi) = (vec![0.0; n], vec![0.0; n]);

    for k in 0..n.saturating_sub(2) {
        diag[k] = ar[k * n + k];
        let m = n - k - 1;
        let off = k + 1;
        let mut xnorm2 = 0.0;
        let mut tail_zero = true;
        for i in 0..m {
            let (re, im) = (ar[(off + i) * n + k], ai[(off + i) * n + k]);
            xnorm2 += re * re + im * im;
            if i > 0 && (re != 0.0 || im != 0.0) {
                tail_zero = false;
            }
        }
        let xnorm = xnorm2.sqrt();
        let alpha = Complex64::new(ar[off * n + k], ai[off * n + k]);
        if xnorm == 0.0 || (tail_zero && alpha.im == 0.0 && alpha.re <= 0.0) {
            sub[k] = alpha;
            continue;
        }
        let aabs = alpha.norm();
        let phase = if aabs > 0.0 { alpha / aabs } else { Complex64::new(1.0, 0.0) };
        sub[k] = -phase * xnorm;
        let scale = (2.0 / (2.0 * xnorm * (xnorm + aabs))).sqrt();
        let (ur, ui) = (&mut ur[..m], &mut ui[..m]);
        for i in 0..m {
            ur[i] = ar[(off + i) * n + k] * scale;
            ui[i] = ai[(off + i) * n + k] * scale;
        }
        ur[0] += phase.re * xnorm * scale;
        ui[0] += phase.im * xnorm * scale;

        // p = A22 u from the lower triangle.
        let (pr, pi) = (&mut pr[..m], &mut pi[..m]);
        pr.fill(0.0);
        pi.fill(0.0);
        for i in 0..m {
            let base = (off + i) * n + off;
            let (rr, ri) = (&ar[base..base + i], &ai[base..base + i]);
            let (uir, uii) = (ur[i], ui[i]);
            let (dr, di) = lower_row_matvec(rr, ri, &ur[..i], &ui[..i], uir, uii, &mut pr[..i], &mut pi[..i]);
            let d = ar[base + i];
            pr[i] += dr + d * uir;
            pi[i] += di + d * uii;
        }
        // q = p - (u* p / 2) u
        let mut up = 0.0;
        for i in 0..m {
            up += ur[i] * pr[i] + ui[i] * pi[i];
        }
        let half = 0.5 * up;
        for i in 0..m {
            pr[i] -= half * ur[i];
            pi[i] -= half * ui[i];
        }
        // A22 -= u q* + q u* (lower triangle)
        for i in 0..m {
            let base = (off + i) * n + off;
            let (uir, uii, qir, qii) = (ur[i], ui[i], pr[i], pi[i]);
            let rr = &mut ar[base..=base + i];
            let ri = &mut ai[base..=base + i];
            let cols = ur[..=i].iter().zip(&ui[..=i]).zip(pr[..=i].iter().zip(&pi[..=i]));
            for ((a, b), ((&ujr, &uji), (&qjr, &qji))) in rr.iter_mut().zip(ri.iter_mut()).zip(cols) {
                *a -= uir * qjr + uii * qji + qir * ujr + qii * uji;
                *b -= uii * qjr - uir * qji + qii * ujr - qir * uji;
            }
        }
        if accumulate {
            let u: Vec<Complex64> = ur.iter().zip(ui.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect();
            reflectors.push((off, u));
        }
    }
    if n >= 2 {
        diag[n - 2] = ar[(n - 2) * n + n - 2];
        sub[n - 2] = Complex64::new(ar[(n - 1) * n + n - 2], ai[(n - 1) * n + n - 2]);
    }
    diag[n - 1] = ar[(n - 1) * n + n - 1];

    let q = accumulate.then(|| {
        let zero = Complex64::new(0.0, 0.0);
        let mut q = vec![zero; n * n];
        for i in 0..n {
            q[i * n + i] = Complex64::new(1.0, 0.0);
        }
        // Q = P_0 P_1 ... applied from the right.
        for (off, u) in &reflectors {
            for row in q.chunks_exact_mut(n) {
                let seg = &mut row[*off..];
                let mut s = zero;
                for (qv, uv) in seg.iter().zip(u) {
                    s += qv * uv;
                }
                for (qv, uv) in seg.iter_mut().zip(u) {
                    *qv -= s * uv.conj();
                }
            }
        }
        q
    });
    Tridiagonal { diag, sub, q }
}

/// One strictly-lower row `a[i][0..i]` of the symmetric matvec: returns
/// `sum_j a[i][j] u[j]` and accumulates `conj(a[i][j]) u_i` into `p[j]`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn lower_row_matvec(
    rr: &[f64],
    ri: &[f64],
    ur: &[f64],
    ui: &[f64],
    uir: f64,
    uii: f64,
    pr: &mut [f64],
    pi: &mut [f64],
) -> (f64, f64) {
    const LANES: usize = 4;
    let len = rr.len();
    let split = len - len % LANES;
    let mut acc_r = [0.0; LANES];
    let mut acc_i = [0.0; LANES];
    let (hr, tr) = rr.split_at(split);
    let (hi, ti) = ri.split_at(split);
    let (hur, tur) = ur[..len].split_at(split);
    let (hui, tui) = ui[..len].split_at(split);
    let (hpr, tpr) = pr[..len].split_at_mut(split);
    let (hpi, tpi) = pi[..len].split_at_mut(split);
    for (((((a4, b4), ur4), ui4), pr4), pi4) in hr
        .chunks_exact(LANES)
        .zip(hi.chunks_exact(LANES))
        .zip(hur.chunks_exact(LANES))
        .zip(hui.chunks_exact(LANES))
        .zip(hpr.chunks_exact_mut(LANES))
        .zip(hpi.chunks_exact_mut(LANES))
    {
        for l in 0..LANES {
            let (a, b) = (a4[l], b4[l]);
            acc_r[l] += a * ur4[l] - b * ui4[l];
            acc_i[l] += a * ui4[l] + b * ur4[l];
            pr4[l] += a * uir + b * uii;
            pi4[l] += a * uii - b * uir;
        }
    }
    let mut sr = (acc_r[0] + acc_r[1]) + (acc_r[2] + acc_r[3]);
    let mut si = (acc_i[0] + acc_i[1]) + (acc_i[2] + acc_i[3]);
    for (((((&a, &b), &xr), &xi), yr), yi) in
        tr.iter().zip(ti).zip(tur).zip(tui).zip(tpr.iter_mut()).zip(tpi.iter_mut())
    {
        sr += a * xr - b * xi;
        si += a * xi + b * xr;
        *yr += a * uir + b * uii;
        *yi += a * uii - b * uir;
    }
    (sr, si)
}

/// Implicit QL on a real symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[i]` the coupling between `i` and `i + 1`
/// (`e[n-1]` is scratch). With `zt`, the rotations are applied to the rows of
/// `zt` (the transposed eigenvector matrix).
fn tql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let cap = ITERATIONS_PER_EIGENVALUE * n;
    let mut total = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > cap {
                return Err(Error::NoConvergence { index: l, iterations: total - 1 });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = zt.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
