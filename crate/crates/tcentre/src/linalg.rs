//! Small dense complex linear algebra shared by every module: Hermitian
//! eigendecomposition with a deterministic ordering/phase convention,
//! matrix functions built on it, and a Newton polar decomposition.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Frobenius-norm Hermiticity defect `|H - H^dag|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).norm()
}

/// Error unless `|H - H^dag| < 1e-12 |H|` (absolute floor 1e-30 for H ~ 0).
pub fn check_hermitian(m: &DMatrix<C64>) -> Result<()> {
    let tol = 1e-12 * m.norm().max(1e-18);
    let dev = hermiticity_defect(m);
    if dev > tol {
        return Err(Error::NonHermitian {
            deviation: dev,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with a reproducible convention:
/// eigenvalues ascending, and each eigenvector scaled so its largest-magnitude
/// component is real and positive. Within a degenerate block (eigenvalues
/// closer than 1e-9 of the spectral span) vectors are ordered by descending
/// magnitude of their first nonzero component; only the spectral projector of
/// such a block is contract-stable, not the individual vectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: DVector<f64>,
    /// Unitary matrix whose columns are the corresponding eigenvectors.
    pub vectors: DMatrix<C64>,
}

pub fn eigh(m: &DMatrix<C64>) -> Result<HermitianEigen> {
    check_hermitian(m)?;
    let n = m.nrows();
    // Symmetrize exactly before factorizing so roundoff in the constructor
    // cannot leak into the decomposition.
    let h = (m + m.adjoint()).scale(0.5);
    let se = nalgebra::linalg::SymmetricEigen::new(h);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));

    let span = (se.eigenvalues.max() - se.eigenvalues.min()).abs().max(1e-300);
    let degeneracy_tol = 1e-9 * span;

    // Tie-break inside degenerate blocks: descending |first nonzero component|.
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n
            && (se.eigenvalues[order[j]] - se.eigenvalues[order[i]]).abs() <= degeneracy_tol
        {
            j += 1;
        }
        if j - i > 1 {
            let key = |col: usize| -> f64 {
                let v = se.eigenvectors.column(col);
                v.iter()
                    .find(|c| c.norm() > 1e-12)
                    .map(|c| c.norm())
                    .unwrap_or(0.0)
            };
            order[i..j].sort_by(|&a, &b| key(b).total_cmp(&key(a)));
        }
        i = j;
    }

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = se.eigenvalues[src];
        let col = se.eigenvectors.column(src);
        // Phase convention: largest-magnitude component (lowest index on
        // ties) made real positive.
        let mut pivot = 0;
        let mut best = -1.0;
        for (k, c) in col.iter().enumerate() {
            if c.norm() > best + 1e-15 {
                best = c.norm();
                pivot = k;
            }
        }
        let phase = if col[pivot].norm() > 0.0 {
            col[pivot].conj() / C64::new(col[pivot].norm(), 0.0)
        } else {
            C64::new(1.0, 0.0)
        };
        vectors.set_column(dst, &(col * phase));
    }
    Ok(HermitianEigen { values, vectors })
}

impl HermitianEigen {
    /// exp(-i H t) assembled from the decomposition.
    pub fn propagator(&self, t_s: f64) -> DMatrix<C64> {
        let phases = DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&w| C64::new(0.0, -w * t_s).exp()),
        );
        &self.vectors * DMatrix::from_diagonal(&phases) * self.vectors.adjoint()
    }
}

/// Unitary factor W of the polar decomposition M = W P (P Hermitian psd),
/// i.e. the unitary closest to M in Frobenius norm. Newton iteration
/// X <- (X + X^-dag)/2, quadratically convergent for nonsingular M.
pub fn polar_unitary(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = m.nrows();
    let scale = m.norm();
    if scale < 1e-300 {
        return Err(Error::SingularAverageUnitary);
    }
    let mut x = m.clone().unscale(scale / (n as f64).sqrt());
    for _ in 0..60 {
        let inv = x
            .clone()
            .try_inverse()
            .ok_or(Error::SingularAverageUnitary)?;
        let next = (&x + inv.adjoint()).scale(0.5);
        let delta = (&next - &x).norm();
        x = next;
        if delta < 1e-15 * (n as f64).sqrt() {
            let defect = (x.adjoint() * &x - DMatrix::<C64>::identity(n, n)).norm();
            if defect > 1e-10 {
                return Err(Error::SingularAverageUnitary);
            }
            return Ok(x);
        }
    }
    Err(Error::SingularAverageUnitary)
}

/// Kronecker product of two square complex matrices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Trace distance (1/2) |rho - sigma|_1 between Hermitian matrices.
pub fn trace_distance(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    let diff = rho - sigma;
    match eigh(&diff) {
        Ok(e) => 0.5 * e.values.iter().map(|w| w.abs()).sum::<f64>(),
        // A non-Hermitian difference only arises from caller error; fall back
        // to the Frobenius bound rather than panicking mid-analysis.
        Err(_) => 0.5 * diff.norm() * (diff.nrows() as f64).sqrt(),
    }
}
