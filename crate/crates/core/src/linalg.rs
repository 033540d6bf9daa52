//! Dense complex linear algebra used throughout the crate.
//!
//! Operators on `L` sites with local dimension `d` are stored as dense
//! `d^L x d^L` column-major matrices. Site `0` is the most significant digit
//! of a basis index, so an operator `A ⊗ B` on sites `(0, 1)` of a two-site
//! system is the ordinary Kronecker product.
//!
//! The two-site kernels in this module ([`apply_pair_left`],
//! [`hole_contract`], [`add_unit_pair`]) never materialize a full layer
//! operator; they act on the rows of a matrix through a precomputed
//! [`PairLayout`].

use faer::{c64, Mat, MatRef, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = Mat<c64>;
/// Dense real matrix.
pub type RMat = Mat<f64>;

/// Largest dimension for which [`spectral_norm`] uses a full singular value
/// decomposition; larger matrices fall back to Lanczos iteration.
pub const DENSE_SVD_LIMIT: usize = 1024;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

/// Entrywise complex conjugate (no transpose).
pub fn conj(a: &CMat) -> CMat {
    a.conjugate().to_owned()
}

pub fn scale(a: &CMat, s: c64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            acc += z.norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for z in a.col_as_slice(j) {
            m = m.max(z.norm());
        }
    }
    m
}

pub fn ensure_square(a: &CMat) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub fn ensure_same_shape(a: &CMat, b: &CMat) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok(())
}

/// `‖A†A − I‖_F`.
pub fn unitarity_defect(a: &CMat) -> f64 {
    let n = a.ncols();
    let g = a.adjoint() * a;
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { ONE } else { ZERO };
            acc += (g[(i, j)] - target).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `max |A − A†|`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `Σ_ij conj(A_ij) B_ij = Tr[A† B]`.
pub fn inner_product(a: &CMat, b: &CMat) -> c64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            acc += x.conj() * y;
        }
    }
    acc
}

/// `e^{-i H t}` for Hermitian `H` via eigendecomposition.
///
/// Real symmetric input (all imaginary parts exactly zero) takes the cheaper
/// real eigensolver path, which matters for the largest lattices.
pub fn hermitian_exp(h: &CMat, t: f64) -> Result<CMat> {
    let n = ensure_square(h)?;
    let defect = hermiticity_defect(h);
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect });
    }
    let is_real = (0..n).all(|j| h.col_as_slice(j).iter().all(|z| z.im == 0.0));
    if is_real {
        let hr = RMat::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
        let evd = hr
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
        let v = evd.U();
        let lambda = evd.S().column_vector();
        let mut vc = v.to_owned();
        let mut vs = v.to_owned();
        for k in 0..n {
            let (s, c) = (lambda[k] * t).sin_cos();
            vc.col_as_slice_mut(k).iter_mut().for_each(|x| *x *= c);
            vs.col_as_slice_mut(k).iter_mut().for_each(|x| *x *= s);
        }
        let re = &vc * v.transpose();
        let im = &vs * v.transpose();
        Ok(CMat::from_fn(n, n, |i, j| c64::new(re[(i, j)], -im[(i, j)])))
    } else {
        let hs = CMat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
        let evd = hs
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
        let v = evd.U();
        let lambda = evd.S().column_vector();
        let mut vp = v.to_owned();
        for k in 0..n {
            let phase = c64::from_polar(1.0, -lambda[k].re * t);
            vp.col_as_slice_mut(k).iter_mut().for_each(|x| *x *= phase);
        }
        Ok(&vp * v.adjoint())
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    if a.nrows().max(a.ncols()) <= DENSE_SVD_LIMIT {
        let s = a
            .singular_values()
            .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
        Ok(s.first().copied().unwrap_or(0.0))
    } else {
        lanczos_spectral_norm(a)
    }
}

/// Largest singular value from Lanczos iteration on `A†A` with full
/// reorthogonalization.
fn lanczos_spectral_norm(a: &CMat) -> Result<f64> {
    let (rows, cols) = (a.nrows(), a.ncols());
    let max_steps = cols.min(300);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<c64> = (0..cols)
        .map(|_| {
            c64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    normalize(&mut q);

    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut y = vec![ZERO; rows];
    let mut theta_prev = 0.0f64;
    let mut theta = 0.0f64;
    for step in 0..max_steps {
        // w = A† A q
        y.iter_mut().for_each(|v| *v = ZERO);
        for (j, qj) in q.iter().enumerate() {
            for (yi, aij) in y.iter_mut().zip(a.col_as_slice(j)) {
                *yi += aij * qj;
            }
        }
        let mut w: Vec<c64> = (0..cols)
            .map(|j| {
                a.col_as_slice(j)
                    .iter()
                    .zip(&y)
                    .fold(ZERO, |acc, (aij, yi)| acc + aij.conj() * yi)
            })
            .collect();
        let a_k = dot(&q, &w).re;
        alpha.push(a_k);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let b_k = norm(&w);

        if step % 5 == 4 || b_k <= 1e-14 * theta.max(1e-300) || step + 1 == max_steps {
            theta = tridiagonal_max_eigenvalue(&alpha, &beta)?;
            if (theta - theta_prev).abs() <= 1e-15 * theta.max(1e-300) {
                break;
            }
            theta_prev = theta;
        }
        if b_k <= 1e-14 * theta.max(1e-300) {
            theta = tridiagonal_max_eigenvalue(&alpha, &beta)?;
            break;
        }
        beta.push(b_k);
        q = w.into_iter().map(|v| v / b_k).collect();
    }
    Ok(theta.max(0.0).sqrt())
}

fn tridiagonal_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    let k = alpha.len();
    let t = RMat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let ev = t
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    Ok(ev.last().copied().unwrap_or(0.0))
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [c64]) {
    let n = norm(a);
    a.iter_mut().for_each(|z| *z /= n);
}

/// Index bookkeeping for a two-site operator embedded in a `d^L` space.
///
/// Every basis index decomposes as `base + offsets[a]`, where `base` has zero
/// digits on both sites of the pair and `a = i_first * d + i_second` indexes
/// the two-site block.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLayout {
    bases: Vec<usize>,
    offsets: Vec<usize>,
}

impl PairLayout {
    pub fn new(first: usize, second: usize, sites: usize, local_dim: usize) -> Self {
        let stride = |s: usize| local_dim.pow((sites - 1 - s) as u32);
        let (sf, ss) = (stride(first), stride(second));
        let dim = local_dim.pow(sites as u32);
        let bases = (0..dim)
            .filter(|&idx| (idx / sf) % local_dim == 0 && (idx / ss) % local_dim == 0)
            .collect();
        let offsets = (0..local_dim * local_dim)
            .map(|a| (a / local_dim) * sf + (a % local_dim) * ss)
            .collect();
        Self { bases, offsets }
    }

    /// Dimension of the two-site block, `d²`.
    pub fn block_dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn bases(&self) -> &[usize] {
        &self.bases
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// `X ← (G on the pair) · X`.
pub fn apply_pair_left(x: &mut CMat, gate: &CMat, layout: &PairLayout) {
    let m = layout.block_dim();
    debug_assert_eq!(gate.nrows(), m);
    if m == 4 {
        let mut g = [ZERO; 16];
        for a in 0..4 {
            for c in 0..4 {
                g[4 * a + c] = gate[(a, c)];
            }
        }
        let off = [
            layout.offsets[0],
            layout.offsets[1],
            layout.offsets[2],
            layout.offsets[3],
        ];
        for j in 0..x.ncols() {
            let col = x.col_as_slice_mut(j);
            for &b in &layout.bases {
                let v = [col[b + off[0]], col[b + off[1]], col[b + off[2]], col[b + off[3]]];
                for a in 0..4 {
                    col[b + off[a]] = g[4 * a] * v[0]
                        + g[4 * a + 1] * v[1]
                        + g[4 * a + 2] * v[2]
                        + g[4 * a + 3] * v[3];
                }
            }
        }
        return;
    }
    let mut buf = vec![ZERO; m];
    for j in 0..x.ncols() {
        let col = x.col_as_slice_mut(j);
        for &b in &layout.bases {
            for (a, v) in buf.iter_mut().enumerate() {
                *v = col[b + layout.offsets[a]];
            }
            for a in 0..m {
                let mut acc = ZERO;
                for (c, v) in buf.iter().enumerate() {
                    acc += gate[(a, c)] * v;
                }
                col[b + layout.offsets[a]] = acc;
            }
        }
    }
}

/// Two-site partial contraction of `left · right` with the pair left open.
///
/// Returns the `d² x d²` matrix
/// `E[a, b] = Σ_z Σ_rest left[(b, rest), z] · right_t[(a, rest), z]`,
/// i.e. the transpose of the partial trace over all other sites of
/// `left · right_tᵀ`. Supplying `right` in transposed form keeps both operands
/// column-contiguous.
pub fn hole_contract(left: &CMat, right_t: &CMat, layout: &PairLayout) -> CMat {
    let m = layout.block_dim();
    let mut acc = vec![ZERO; m * m];
    if m == 4 {
        let off = [
            layout.offsets[0],
            layout.offsets[1],
            layout.offsets[2],
            layout.offsets[3],
        ];
        let mut a16 = [ZERO; 16];
        for z in 0..left.ncols() {
            let l = left.col_as_slice(z);
            let r = right_t.col_as_slice(z);
            for &base in &layout.bases {
                let lv = [l[base + off[0]], l[base + off[1]], l[base + off[2]], l[base + off[3]]];
                let rv = [r[base + off[0]], r[base + off[1]], r[base + off[2]], r[base + off[3]]];
                for a in 0..4 {
                    for b in 0..4 {
                        a16[4 * a + b] += rv[a] * lv[b];
                    }
                }
            }
        }
        acc.copy_from_slice(&a16);
    } else {
        for z in 0..left.ncols() {
            let l = left.col_as_slice(z);
            let r = right_t.col_as_slice(z);
            for &base in &layout.bases {
                for a in 0..m {
                    let ra = r[base + layout.offsets[a]];
                    for b in 0..m {
                        acc[m * a + b] += ra * l[base + layout.offsets[b]];
                    }
                }
            }
        }
    }
    CMat::from_fn(m, m, |a, b| acc[m * a + b])
}

/// `dst ← dst + (E_{cd} on the pair) · src`, with `E_{cd}` a matrix unit of
/// the two-site block.
pub fn add_unit_pair(dst: &mut CMat, src: &CMat, c: usize, d: usize, layout: &PairLayout) {
    let (oc, od) = (layout.offsets[c], layout.offsets[d]);
    for j in 0..src.ncols() {
        let s = src.col_as_slice(j);
        let t = dst.col_as_slice_mut(j);
        for &b in &layout.bases {
            t[b + oc] += s[b + od];
        }
    }
}

/// Embeds a two-site operator into the full space as `op ⊗ I_rest`.
pub fn embed_pair(op: &CMat, layout: &PairLayout, dim: usize) -> CMat {
    let mut out = CMat::zeros(dim, dim);
    add_embedded_pair(&mut out, op, layout);
    out
}

/// `dst ← dst + op ⊗ I_rest`.
pub fn add_embedded_pair(dst: &mut CMat, op: &CMat, layout: &PairLayout) {
    let m = layout.block_dim();
    for &b in &layout.bases {
        for c in 0..m {
            for a in 0..m {
                dst[(b + layout.offsets[a], b + layout.offsets[c])] += op[(a, c)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        CMat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO })
    }

    fn pauli_z() -> CMat {
        CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => ONE,
            (1, 1) => -ONE,
            _ => ZERO,
        })
    }

    fn sample(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| {
            c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
    }

    #[test]
    fn pair_layout_matches_kronecker_embedding() {
        // sites (1, 2) of a three-qubit register: I ⊗ op
        let op = sample(4, 1);
        let layout = PairLayout::new(1, 2, 3, 2);
        let embedded = embed_pair(&op, &layout, 8);
        let expected = kron(identity(2).as_ref(), op.as_ref());
        assert!(frobenius_norm(&(&embedded - &expected)) < 1e-14);

        // reversed site order swaps the tensor factors
        let a = pauli_x();
        let b = pauli_z();
        let ab = kron(a.as_ref(), b.as_ref());
        let layout = PairLayout::new(1, 0, 2, 2);
        let embedded = embed_pair(&ab, &layout, 4);
        let expected = kron(b.as_ref(), a.as_ref());
        assert!(frobenius_norm(&(&embedded - &expected)) < 1e-14);
    }

    #[test]
    fn apply_pair_left_equals_dense_product() {
        let g = sample(4, 2);
        let x = sample(16, 3);
        for (p, q) in [(0, 1), (2, 3), (3, 0), (1, 3)] {
            let layout = PairLayout::new(p, q, 4, 2);
            let mut y = x.clone();
            apply_pair_left(&mut y, &g, &layout);
            let dense = embed_pair(&g, &layout, 16);
            let expected = &dense * &x;
            assert!(frobenius_norm(&(&y - &expected)) < 1e-12, "pair ({p},{q})");
        }
    }

    #[test]
    fn apply_pair_left_general_local_dimension() {
        let g = sample(9, 4);
        let x = sample(27, 5);
        let layout = PairLayout::new(2, 0, 3, 3);
        let mut y = x.clone();
        apply_pair_left(&mut y, &g, &layout);
        let expected = &embed_pair(&g, &layout, 27) * &x;
        assert!(frobenius_norm(&(&y - &expected)) < 1e-12);
    }

    #[test]
    fn hole_contract_is_transposed_partial_trace() {
        let left = sample(16, 6);
        let right = sample(16, 7);
        let layout = PairLayout::new(1, 2, 4, 2);
        let env = hole_contract(&left, &transpose(&right), &layout);
        // Σ_ab env[a,b] Δ[a,b] = Tr[(Δ ⊗ I) left right] for any Δ
        let delta = sample(4, 8);
        let lhs = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .fold(ZERO, |acc, (a, b)| acc + env[(a, b)] * delta[(a, b)]);
        let prod = &embed_pair(&delta, &layout, 16) * &(&left * &right);
        let rhs = (0..16).fold(ZERO, |acc, i| acc + prod[(i, i)]);
        assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn add_unit_pair_applies_matrix_unit() {
        let src = sample(8, 9);
        let layout = PairLayout::new(0, 2, 3, 2);
        let mut dst = CMat::zeros(8, 8);
        add_unit_pair(&mut dst, &src, 1, 2, &layout);
        let unit = CMat::from_fn(4, 4, |a, b| if (a, b) == (1, 2) { ONE } else { ZERO });
        let expected = &embed_pair(&unit, &layout, 8) * &src;
        assert!(frobenius_norm(&(&dst - &expected)) < 1e-14);
    }

    #[test]
    fn hermitian_exp_real_and_complex_paths_agree() {
        let a = sample(6, 10);
        let h = CMat::from_fn(6, 6, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
        let hr = CMat::from_fn(6, 6, |i, j| c64::new(h[(i, j)].re, 0.0));
        let u = hermitian_exp(&h, 0.7).unwrap();
        assert!(unitarity_defect(&u) < 1e-13);
        // real path against the complex path on a real matrix with a tiny
        // imaginary perturbation removed afterwards
        let ur = hermitian_exp(&hr, 0.7).unwrap();
        let mut hc = hr.clone();
        hc[(0, 1)] += c64::new(0.0, 1e-300);
        hc[(1, 0)] -= c64::new(0.0, 1e-300);
        let uc = hermitian_exp(&hc, 0.7).unwrap();
        assert!(frobenius_norm(&(&ur - &uc)) < 1e-12);
    }

    #[test]
    fn hermitian_exp_rejects_non_hermitian() {
        let a = sample(3, 11);
        assert!(matches!(hermitian_exp(&a, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn lanczos_matches_svd() {
        let a = sample(80, 12);
        let svd = a.singular_values().unwrap()[0];
        let lanczos = lanczos_spectral_norm(&a).unwrap();
        assert!((svd - lanczos).abs() < 1e-10 * svd, "{svd} vs {lanczos}");
    }
}
