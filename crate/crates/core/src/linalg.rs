// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense symmetric eigendecomposition backed by LAPACK.
//!
//! The only LAPACK routine used by the crate is `dsyevd` (divide-and-conquer
//! symmetric eigensolver). Singular structure of a rectangular matrix `G` is
//! always obtained through the Gram matrix of its smaller side, which costs
//! `O(min(p, m)^3)` and is the cheapest exact route at the dense sizes this
//! crate targets (p, m up to a few thousand).

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

// openblas-src provides the LAPACK symbols that lapack-sys declares.
extern crate openblas_src;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matrix whose column `k` is
/// the eigenvector for eigenvalue `k`.
pub fn sym_eigh(c: &ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let (n, m) = c.dim();
    if n == 0 || n != m {
        return Err(Error::invalid_input(format!(
            "sym_eigh requires a nonempty square matrix, got {n}x{m}"
        )));
    }
    // A symmetric matrix has identical row-major and column-major layouts,
    // so the flattened buffer can be handed to LAPACK directly.
    let mut a: Vec<f64> = c.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let ni = n as i32;
    let mut info = 0i32;
    let jobz = b'V' as std::ffi::c_char;
    let uplo = b'L' as std::ffi::c_char;

    // Workspace query, then the real call.
    let mut lwork_q = [0.0f64; 1];
    let mut liwork_q = [0i32; 1];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            lwork_q.as_mut_ptr(),
            &(-1i32),
            liwork_q.as_mut_ptr(),
            &(-1i32),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::solver(format!("dsyevd workspace query failed: info={info}")));
    }
    let lwork = lwork_q[0] as i32;
    let liwork = liwork_q[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::solver(format!("dsyevd failed to converge: info={info}")));
    }
    // LAPACK wrote eigenvectors column-major into `a`; reinterpreting the
    // row-major buffer and transposing recovers column-per-eigenvector.
    let vecs = Array2::from_shape_vec((n, n), a)
        .map_err(|e| Error::solver(format!("eigenvector reshape: {e}")))?
        .reversed_axes();
    Ok((w, vecs))
}

/// Singular values of `g` in descending order (`dgesdd`, values only).
///
/// Unlike the Gram route this is accurate near zero, which matters when
/// nuclear norms are compared against tight feasibility tolerances.
pub fn singular_values(g: &ArrayView2<f64>) -> Result<Vec<f64>> {
    let (p, m) = g.dim();
    if p == 0 || m == 0 {
        return Err(Error::invalid_input("singular_values needs a nonempty matrix"));
    }
    // LAPACK is column-major: feed the transpose (row-major p x m buffer
    // reads as column-major m x p) and ask for the SVD of that. Singular
    // values are transpose-invariant.
    let mut a: Vec<f64> = g.iter().copied().collect();
    let rows = m as i32; // rows of the column-major interpretation
    let cols = p as i32;
    let k = p.min(m);
    let mut s = vec![0.0f64; k];
    let jobz = b'N' as std::ffi::c_char;
    let mut info = 0i32;
    let mut iwork = vec![0i32; 8 * k];
    let mut lwork_q = [0.0f64; 1];
    let mut u = [0.0f64; 1];
    let mut vt = [0.0f64; 1];
    let one = 1i32;
    unsafe {
        lapack_sys::dgesdd_(
            &jobz,
            &rows,
            &cols,
            a.as_mut_ptr(),
            &rows,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            lwork_q.as_mut_ptr(),
            &(-1i32),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::solver(format!("dgesdd workspace query failed: info={info}")));
    }
    let lwork = lwork_q[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        lapack_sys::dgesdd_(
            &jobz,
            &rows,
            &cols,
            a.as_mut_ptr(),
            &rows,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::solver(format!("dgesdd failed to converge: info={info}")));
    }
    Ok(s)
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(g: &ArrayView2<f64>) -> Result<f64> {
    Ok(singular_values(g)?.iter().sum())
}

/// Applies a spectral reweighting `g = sum_i d_i u_i v_i' -> sum_i w_i u_i v_i'`
/// where `w_i = weight(d_i)` and only indices with nonzero weight are kept.
///
/// `factors` holds, per retained singular triplet, the pair `(column of the
/// Gram eigenvector matrix, w_i / d_i)`; the caller has already decided which
/// triplets survive. `right` indicates whether the eigenvectors belong to the
/// right Gram matrix `G'G` (true) or the left one `GG'` (false).
fn reweighted(
    g: &ArrayView2<f64>,
    vecs: &Array2<f64>,
    factors: &[(usize, f64)],
    right: bool,
) -> Array2<f64> {
    let k = factors.len();
    let side = if right { g.dim().1 } else { g.dim().0 };
    let mut basis = Array2::<f64>::zeros((side, k));
    for (out, &(col, scale)) in factors.iter().enumerate() {
        let v = vecs.column(col);
        for i in 0..side {
            basis[[i, out]] = v[i] * scale;
        }
    }
    if right {
        // (G V diag(w/d)) V'
        let mut vt = Array2::<f64>::zeros((k, side));
        for (out, &(col, _)) in factors.iter().enumerate() {
            let v = vecs.column(col);
            for i in 0..side {
                vt[[out, i]] = v[i];
            }
        }
        g.dot(&basis).dot(&vt)
    } else {
        // (U diag(w/d) U') G
        let mut ut = Array2::<f64>::zeros((k, side));
        for (out, &(col, _)) in factors.iter().enumerate() {
            let u = vecs.column(col);
            for i in 0..side {
                ut[[out, i]] = u[i];
            }
        }
        basis.dot(&ut.dot(g))
    }
}

/// Decomposition data shared by nuclear-ball projection: descending singular
/// values plus the Gram eigenvectors they came from.
pub(crate) struct GramSpectrum {
    /// Descending singular values of `g`.
    pub d: Vec<f64>,
    /// Eigenvector matrix of the smaller Gram matrix (columns ascending).
    vecs: Array2<f64>,
    /// Whether `vecs` are right singular vectors.
    right: bool,
}

impl GramSpectrum {
    pub fn compute(g: &ArrayView2<f64>) -> Result<Self> {
        let (p, m) = g.dim();
        let right = m <= p;
        let gram = if right { g.t().dot(g) } else { g.dot(&g.t()) };
        let (lam, vecs) = sym_eigh(&gram.view())?;
        let k = lam.len();
        let d = (0..k).map(|i| lam[k - 1 - i].max(0.0).sqrt()).collect();
        Ok(GramSpectrum { d, vecs, right })
    }

    /// Rebuilds `g` with its singular values replaced by `new_d` (descending,
    /// aligned with `self.d`); entries equal to zero drop their triplet.
    pub fn with_singular_values(&self, g: &ArrayView2<f64>, new_d: &[f64]) -> Array2<f64> {
        let k = self.d.len();
        let mut factors = Vec::new();
        for (i, &w) in new_d.iter().enumerate() {
            if w > 0.0 && self.d[i] > 0.0 {
                // descending index i corresponds to ascending column k-1-i
                factors.push((k - 1 - i, w / self.d[i]));
            }
        }
        if factors.is_empty() {
            return Array2::zeros(g.raw_dim());
        }
        reweighted(g, &self.vecs, &factors, self.right)
    }
}
