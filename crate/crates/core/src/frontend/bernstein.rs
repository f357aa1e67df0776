use super::MultivariatePolynomial;
use crate::error::{invalid, Error, Result};

/// Tensor-product Bernstein polynomial on `[-L, L]^dim`, stored by its
/// control values `f(node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinPolynomial {
    dim: usize,
    degree: usize,
    half_width: f64,
    /// Row-major control values, last axis fastest.
    control: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BernsteinApproximation {
    pub poly: BernsteinPolynomial,
    pub sup_error: f64,
    pub sign_agreement: f64,
}

impl BernsteinPolynomial {
    pub fn fit(f: &dyn Fn(&[f64]) -> f64, dim: usize, half_width: f64, degree: usize) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(format!(
                "Bernstein approximation supports dim 1 or 2, got {dim}"
            )));
        }
        if degree == 0 {
            return invalid("Bernstein degree must be at least 1");
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return invalid("half width must be positive and finite");
        }
        let n = degree + 1;
        let node = |k: usize| -half_width + 2.0 * half_width * k as f64 / degree as f64;
        let control = if dim == 1 {
            (0..n).map(|i| f(&[node(i)])).collect()
        } else {
            (0..n * n).map(|ij| f(&[node(ij / n), node(ij % n)])).collect()
        };
        Ok(Self { dim, degree, half_width, control })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn unit(&self, y: f64) -> f64 {
        (y + self.half_width) / (2.0 * self.half_width)
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return invalid(format!("expected {} coordinates, got {}", self.dim, y.len()));
        }
        let n = self.degree + 1;
        Ok(if self.dim == 1 {
            de_casteljau(&self.control, self.unit(y[0]))
        } else {
            let u1 = self.unit(y[1]);
            let inner: Vec<f64> = self.control.chunks(n).map(|row| de_casteljau(row, u1)).collect();
            de_casteljau(&inner, self.unit(y[0]))
        })
    }

    /// Power-basis expansion in the original coordinates.
    ///
    /// Coefficients grow like `2^degree`, so evaluating the result loses
    /// precision at high degree; prefer [`BernsteinPolynomial::eval`].
    pub fn to_polynomial(&self) -> MultivariatePolynomial {
        let basis: Vec<MultivariatePolynomial> = (0..=self.degree).map(|k| self.basis_1d(k)).collect();
        let mut out = MultivariatePolynomial::zero(self.dim);
        if self.dim == 1 {
            for (k, c) in self.control.iter().enumerate() {
                out = out.add(&basis[k].scale(*c));
            }
        } else {
            let n = self.degree + 1;
            let lift = |p: &MultivariatePolynomial, axis: usize| {
                p.compose(&[MultivariatePolynomial::variable(2, axis)]).expect("univariate composition")
            };
            let b0: Vec<_> = basis.iter().map(|b| lift(b, 0)).collect();
            let b1: Vec<_> = basis.iter().map(|b| lift(b, 1)).collect();
            for (ij, c) in self.control.iter().enumerate() {
                if *c != 0.0 {
                    out = out.add(&b0[ij / n].mul(&b1[ij % n]).scale(*c));
                }
            }
        }
        out
    }

    /// `C(n,k) u^k (1-u)^{n-k}` with `u = (y + L) / 2L`, as a polynomial in `y`.
    fn basis_1d(&self, k: usize) -> MultivariatePolynomial {
        let s = 1.0 / (2.0 * self.half_width);
        let u = MultivariatePolynomial::univariate(&[0.5, s]);
        let one_minus_u = MultivariatePolynomial::univariate(&[0.5, -s]);
        u.pow(k as u32)
            .mul(&one_minus_u.pow((self.degree - k) as u32))
            .scale(binomial_f64(self.degree, k))
    }
}

fn de_casteljau(control: &[f64], u: f64) -> f64 {
    let mut b = control.to_vec();
    let v = 1.0 - u;
    for r in 1..b.len() {
        for i in 0..b.len() - r {
            b[i] = v * b[i] + u * b[i + 1];
        }
    }
    b[0]
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bernstein approximation of `f` on `[-L, L]^dim` with error statistics
/// over a `test_grid`-per-axis equispaced grid (endpoints included).
pub fn bernstein_approximate(
    f: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    half_width: f64,
    degree: usize,
    test_grid: usize,
) -> Result<BernsteinApproximation> {
    let poly = BernsteinPolynomial::fit(f, dim, half_width, degree)?;
    if test_grid < 2 {
        return invalid("test grid needs at least 2 points per axis");
    }
    let at = |i: usize| -half_width + 2.0 * half_width * i as f64 / (test_grid - 1) as f64;
    let total = test_grid.pow(dim as u32);
    let mut sup_error: f64 = 0.0;
    let mut agree = 0usize;
    let mut y = vec![0.0; dim];
    for flat in 0..total {
        if dim == 1 {
            y[0] = at(flat);
        } else {
            y[0] = at(flat / test_grid);
            y[1] = at(flat % test_grid);
        }
        let exact = f(&y);
        let approx = poly.eval(&y)?;
        sup_error = sup_error.max((exact - approx).abs());
        if sign(exact) == sign(approx) {
            agree += 1;
        }
    }
    Ok(BernsteinApproximation { poly, sup_error, sign_agreement: agree as f64 / total as f64 })
}
