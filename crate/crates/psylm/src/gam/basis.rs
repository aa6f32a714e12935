//! Cubic B-spline bases on [0,1] with clamped uniform knots, and difference
//! penalties for P-spline smoothing.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Clamped uniform knot vector for `num_basis` functions of the given degree
/// over [0,1]. Length is num_basis + degree + 1.
pub fn uniform_knots(num_basis: usize, degree: usize) -> Vec<f64> {
    let interior = num_basis - degree - 1;
    let mut knots = vec![0.0; degree + 1];
    for i in 1..=interior {
        knots.push(i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat(1.0).take(degree + 1));
    knots
}

/// Evaluates all B-spline basis functions at one point via the Cox-de Boor
/// recursion in its triangular form. `x` must already lie in [0,1].
fn basis_row(x: f64, knots: &[f64], num_basis: usize, degree: usize) -> Vec<f64> {
    // find the knot span [t_mu, t_mu+1) containing x, clamping at the right end
    let mut mu = degree;
    while mu + 1 < num_basis && x >= knots[mu + 1] {
        mu += 1;
    }
    // triangular evaluation: b holds the degree-d nonzero values
    let mut b = vec![0.0; degree + 1];
    b[0] = 1.0;
    for d in 1..=degree {
        let mut saved = 0.0;
        for j in 0..d {
            let i = mu - d + 1 + j;
            let denom = knots[i + d] - knots[i];
            let term = if denom > 0.0 { b[j] / denom } else { 0.0 };
            b[j] = saved + (knots[i + d] - x) * term;
            saved = (x - knots[i]) * term;
        }
        b[d] = saved;
    }
    let mut row = vec![0.0; num_basis];
    for (j, &v) in b.iter().enumerate() {
        row[mu - degree + j] = v;
    }
    row
}

/// B-spline design matrix for points in [0,1]. Points outside the interval
/// are clamped; the number of clamped points is returned alongside.
pub fn bspline_basis(
    x: &[f64],
    num_basis: usize,
    degree: usize,
) -> Result<(DMatrix<f64>, usize)> {
    if num_basis < degree + 1 {
        return Err(Error::Argument(format!(
            "num_basis {num_basis} must be at least degree+1 = {}",
            degree + 1
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("basis input contains non-finite values".into()));
    }
    let knots = uniform_knots(num_basis, degree);
    let mut clamped = 0;
    let mut matrix = DMatrix::zeros(x.len(), num_basis);
    for (i, &xi) in x.iter().enumerate() {
        let v = if (0.0..=1.0).contains(&xi) {
            xi
        } else {
            clamped += 1;
            xi.clamp(0.0, 1.0)
        };
        for (j, b) in basis_row(v, &knots, num_basis, degree).into_iter().enumerate() {
            matrix[(i, j)] = b;
        }
    }
    Ok((matrix, clamped))
}

/// Greville abscissae of the clamped knot vector: the x locations each
/// basis coefficient acts at.
pub fn greville_abscissae(num_basis: usize, degree: usize) -> Vec<f64> {
    let knots = uniform_knots(num_basis, degree);
    (0..num_basis)
        .map(|j| knots[j + 1..j + 1 + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

/// S = D'D where D takes order-th divided differences of the coefficient
/// vector over the Greville abscissae. Its null space is exactly the
/// coefficient vectors representing polynomials of degree < order, so the
/// standard order-2 choice penalizes curvature and leaves linear trends
/// unpenalized even with clamped boundary knots.
pub fn difference_penalty(num_basis: usize, degree: usize, order: usize) -> DMatrix<f64> {
    assert!(num_basis > order);
    let xi = greville_abscissae(num_basis, degree);
    let mut d = DMatrix::zeros(num_basis - order, num_basis);
    for row in 0..num_basis - order {
        // divided-difference stencil: c_i = 1 / prod_{l != i} (xi_i - xi_l)
        for i in row..=row + order {
            let mut denom = 1.0;
            for l in row..=row + order {
                if l != i {
                    denom *= xi[i] - xi[l];
                }
            }
            d[(row, i)] = 1.0 / denom;
        }
    }
    d.transpose() * d
}

/// Row-wise Kronecker product of two bases with equal row counts.
pub fn row_tensor(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b1.nrows() != b2.nrows() {
        return Err(Error::Argument(format!(
            "tensor margins disagree on row count: {} vs {}",
            b1.nrows(),
            b2.nrows()
        )));
    }
    let (m, k) = (b1.ncols(), b2.ncols());
    let mut out = DMatrix::zeros(b1.nrows(), m * k);
    for r in 0..b1.nrows() {
        for i in 0..m {
            for j in 0..k {
                out[(r, i * k + j)] = b1[(r, i)] * b2[(r, j)];
            }
        }
    }
    Ok(out)
}

/// Kronecker product of two square penalty matrices.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (am, an) = (a.nrows(), a.ncols());
    let (bm, bn) = (b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(am * bm, an * bn);
    for i in 0..am {
        for j in 0..an {
            for p in 0..bm {
                for q in 0..bn {
                    out[(i * bm + p, j * bn + q)] = a[(i, j)] * b[(p, q)];
                }
            }
        }
    }
    out
}
