//! The unitary group 𝒰(m) as a Riemannian submanifold of ℂ^{m×m}.
//!
//! Tangent vectors at `V` are `V·A` with `A` anti-Hermitian. Real coordinates
//! use the isometry `𝔰(R) = ½(R − Rᵀ) + (i/2)(R + Rᵀ)` between real `m x m`
//! matrices and anti-Hermitian ones; a real `m x m` block is flattened
//! row-major (`r = i·m + j`).

use faer::c64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

/// Maximum `‖G†G − I‖_F` accepted for a [`UnitaryGate`].
pub const UNITARITY_TOL: f64 = 1e-12;

/// Maximum `max |A + A†|` accepted by [`real_extract`].
pub const ANTIHERMITIAN_TOL: f64 = 1e-10;

/// Singular values of `V + ξ` below this fraction of the largest make the
/// retraction fail.
const RETRACTION_RANK_TOL: f64 = 1e-13;

/// A square unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate(CMat);

impl UnitaryGate {
    /// Wraps `m` after checking `‖m†m − I‖_F ≤ 1e−12`.
    pub fn new(m: CMat) -> Result<Self> {
        linalg::ensure_square(&m)?;
        let defect = linalg::unitarity_defect(&m);
        if defect > UNITARITY_TOL {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self(m))
    }

    /// Nearest unitary matrix to `m` (its polar factor). Used to repair
    /// round-off drift; `m` must be close to unitary for the result to be
    /// meaningful.
    pub fn reunitarize(m: &CMat) -> Result<Self> {
        linalg::ensure_square(m)?;
        Ok(Self(polar_factor(m)?))
    }

    pub fn identity(m: usize) -> Self {
        Self(linalg::identity(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn adjoint(&self) -> CMat {
        linalg::adjoint(&self.0)
    }
}

/// `½(A − A†)`, anti-Hermitian bit-for-bit.
pub fn antihermitian_part(a: &CMat) -> Result<CMat> {
    let n = linalg::ensure_square(a)?;
    let mut z = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = (a[(i, j)] - a[(j, i)].conj()) * 0.5;
            if i == j {
                z[(i, i)] = c64::new(0.0, v.im);
            } else {
                z[(i, j)] = v;
                z[(j, i)] = -v.conj();
            }
        }
    }
    Ok(z)
}

/// `½(A + A†)`.
pub fn hermitian_part(a: &CMat) -> Result<CMat> {
    let n = linalg::ensure_square(a)?;
    let mut z = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            if i == j {
                z[(i, i)] = c64::new(v.re, 0.0);
            } else {
                z[(i, j)] = v;
                z[(j, i)] = v.conj();
            }
        }
    }
    Ok(z)
}

/// Orthogonal projection onto the tangent space at `V`: `V·asym(V†X)`.
pub fn project_tangent(v: &UnitaryGate, x: &CMat) -> Result<CMat> {
    linalg::ensure_same_shape(v.matrix(), x)?;
    let vx = v.matrix().adjoint() * x;
    Ok(v.matrix() * antihermitian_part(&vx)?)
}

/// Riemannian metric `Re Tr[X†Y]`.
pub fn inner(x: &CMat, y: &CMat) -> Result<f64> {
    linalg::ensure_same_shape(x, y)?;
    Ok(linalg::inner_product(x, y).re)
}

/// Polar retraction: the unitary factor `Q` of `V + ξ = Q·P`.
pub fn retract_polar(v: &UnitaryGate, xi: &CMat) -> Result<UnitaryGate> {
    linalg::ensure_same_shape(v.matrix(), xi)?;
    let sum = v.matrix() + xi;
    let q = polar_factor(&sum)?;
    if linalg::unitarity_defect(&q) > UNITARITY_TOL {
        return Ok(UnitaryGate(polar_factor(&q)?));
    }
    Ok(UnitaryGate(q))
}

fn polar_factor(a: &CMat) -> Result<CMat> {
    let svd = a
        .svd()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let n = s.nrows();
    let (mut largest, mut smallest) = (0.0f64, f64::INFINITY);
    for k in 0..n {
        largest = largest.max(s[k].re);
        smallest = smallest.min(s[k].re);
    }
    if !(smallest > RETRACTION_RANK_TOL * largest) {
        return Err(Error::SingularRetraction { smallest });
    }
    Ok(svd.U() * svd.V().adjoint())
}

/// `𝔰(R) = ½(R − Rᵀ) + (i/2)(R + Rᵀ)`.
pub fn real_embed(r: &RMat) -> Result<CMat> {
    if r.nrows() != r.ncols() {
        return Err(Error::NotSquare {
            rows: r.nrows(),
            cols: r.ncols(),
        });
    }
    let m = r.nrows();
    Ok(CMat::from_fn(m, m, |i, j| embed_entry(r[(i, j)], r[(j, i)])))
}

/// `𝔰⁻¹(A) = Re A + Im A` for anti-Hermitian `A`.
pub fn real_extract(a: &CMat) -> Result<RMat> {
    let m = linalg::ensure_square(a)?;
    let defect = antihermiticity_defect(a);
    if defect > ANTIHERMITIAN_TOL * (1.0 + linalg::max_abs(a)) {
        return Err(Error::NotAntiHermitian { defect });
    }
    Ok(RMat::from_fn(m, m, |i, j| a[(i, j)].re + a[(i, j)].im))
}

/// `max |A + A†|`.
pub fn antihermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            d = d.max((a[(i, j)] + a[(j, i)].conj()).norm());
        }
    }
    d
}

#[inline]
fn embed_entry(rij: f64, rji: f64) -> c64 {
    c64::new(0.5 * (rij - rji), 0.5 * (rij + rji))
}

/// `𝔰` applied to a row-major flattened block.
pub(crate) fn embed_flat(block: &[f64], m: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| embed_entry(block[i * m + j], block[j * m + i]))
}

/// `𝔰⁻¹` into a row-major flattened block, without the anti-Hermiticity check.
pub(crate) fn extract_flat(a: &CMat, out: &mut [f64]) {
    let m = a.nrows();
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = a[(i, j)].re + a[(i, j)].im;
        }
    }
}

/// A tangent vector at `base` in real coordinates: `V·𝔰(R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentRealCoords {
    pub coords: RMat,
    pub base: UnitaryGate,
}

impl TangentRealCoords {
    pub fn new(base: UnitaryGate, coords: RMat) -> Result<Self> {
        if coords.nrows() != base.dim() || coords.ncols() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: coords.nrows(),
            });
        }
        Ok(Self { coords, base })
    }

    /// Coordinates of an ambient tangent vector `X = V·A`.
    pub fn from_tangent(base: UnitaryGate, x: &CMat) -> Result<Self> {
        linalg::ensure_same_shape(base.matrix(), x)?;
        let a = base.matrix().adjoint() * x;
        let coords = real_extract(&a)?;
        Ok(Self { coords, base })
    }

    /// The ambient tangent vector `V·𝔰(R)`.
    pub fn tangent_vector(&self) -> CMat {
        let a = real_embed(&self.coords).expect("coords are square");
        self.base.matrix() * a
    }
}

/// A tangent vector of the product manifold 𝒰(m)ⁿ in flat real coordinates:
/// `n` row-major `m x m` blocks laid out consecutively.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent {
    data: Vec<f64>,
    blocks: usize,
    m: usize,
}

impl ProductTangent {
    pub fn zeros(blocks: usize, m: usize) -> Self {
        Self {
            data: vec![0.0; blocks * m * m],
            blocks,
            m,
        }
    }

    pub fn from_flat(data: Vec<f64>, blocks: usize, m: usize) -> Result<Self> {
        if data.len() != blocks * m * m {
            return Err(Error::DimensionMismatch {
                expected: blocks * m * m,
                found: data.len(),
            });
        }
        Ok(Self { data, blocks, m })
    }

    pub fn from_blocks(blocks: &[TangentRealCoords]) -> Result<Self> {
        let m = blocks.first().map_or(0, |b| b.base.dim());
        let mut out = Self::zeros(blocks.len(), m);
        for (l, b) in blocks.iter().enumerate() {
            if b.base.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: b.base.dim(),
                });
            }
            let dst = out.block_mut(l);
            for i in 0..m {
                for j in 0..m {
                    dst[i * m + j] = b.coords[(i, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, l: usize) -> &[f64] {
        let s = self.m * self.m;
        &self.data[l * s..(l + 1) * s]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.m * self.m;
        &mut self.data[l * s..(l + 1) * s]
    }

    pub fn block_matrix(&self, l: usize) -> RMat {
        let b = self.block(l);
        RMat::from_fn(self.m, self.m, |i, j| b[i * self.m + j])
    }

    /// Attaches base points to every block.
    pub fn to_blocks(&self, bases: &[UnitaryGate]) -> Result<Vec<TangentRealCoords>> {
        if bases.len() != self.blocks {
            return Err(Error::DimensionMismatch {
                expected: self.blocks,
                found: bases.len(),
            });
        }
        (0..self.blocks)
            .map(|l| TangentRealCoords::new(bases[l].clone(), self.block_matrix(l)))
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Ambient tangent vector of block `l` at `base`.
    pub fn tangent_block(&self, l: usize, base: &UnitaryGate) -> CMat {
        base.matrix() * embed_flat(self.block(l), self.m)
    }
}
