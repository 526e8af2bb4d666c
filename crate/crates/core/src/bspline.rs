//! Univariate and tensor-product B-spline bases on open knot vectors over `[0, 1]`.

use crate::error::{Error, Result};

/// Default bound on the ratio of neighbouring span lengths.
pub const DEFAULT_THETA: f64 = 10.0;

const KNOT_TOL: f64 = 1e-14;

/// A `p`-open knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
    theta: f64,
}

/// Values and derivatives of the `p + 1` basis functions supported on one span.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Index of the first supported basis function.
    pub first: usize,
    /// `derivs[k][j]` is the `k`-th derivative of basis function `first + j`.
    pub derivs: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn values(&self) -> &[f64] {
        &self.derivs[0]
    }

    /// Iterator over `(basis index, value, derivatives up to nderiv)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, Vec<f64>)> + '_ {
        (0..self.derivs[0].len()).map(move |j| {
            (
                self.first + j,
                self.derivs[0][j],
                self.derivs.iter().map(|row| row[j]).collect(),
            )
        })
    }
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        Self::with_theta(degree, knots, DEFAULT_THETA)
    }

    pub fn with_theta(degree: usize, knots: Vec<f64>, theta: f64) -> Result<Self> {
        let kv = KnotVector {
            degree,
            knots,
            theta,
        };
        kv.validate()?;
        Ok(kv)
    }

    /// Open knot vector with `spans` equal spans.
    pub fn uniform(degree: usize, spans: usize) -> Result<Self> {
        if spans == 0 {
            return Err(Error::InvalidKnots("at least one span required".into()));
        }
        let interior = (1..spans)
            .map(|i| i as f64 / spans as f64)
            .collect::<Vec<_>>();
        Self::from_interior(degree, &interior)
    }

    /// Open knot vector with the given interior breakpoints (each of multiplicity one).
    pub fn from_interior(degree: usize, interior: &[f64]) -> Result<Self> {
        let mut knots = vec![0.0; degree + 1];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    fn validate(&self) -> Result<()> {
        let p = self.degree;
        let k = &self.knots;
        if !(self.theta >= 1.0) {
            return Err(Error::InvalidKnots(format!("theta {} < 1", self.theta)));
        }
        if k.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "degree {p} needs at least {} knots, got {}",
                2 * (p + 1),
                k.len()
            )));
        }
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if k.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        if k[..=p].iter().any(|&x| x != 0.0) || k[k.len() - p - 1..].iter().any(|&x| x != 1.0) {
            return Err(Error::InvalidKnots(format!(
                "first and last {} knots must equal 0 and 1",
                p + 1
            )));
        }
        // interior multiplicity at most p keeps the span structure open
        let n = k.len() - p - 1;
        for i in (p + 1)..n {
            let mult = k.iter().filter(|&&x| (x - k[i]).abs() <= KNOT_TOL).count();
            if mult > p.max(1) {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {} has multiplicity {mult} > {}",
                    k[i],
                    p.max(1)
                )));
            }
        }
        let lens = self.span_lengths();
        for w in lens.windows(2) {
            let r = w[0] / w[1];
            if r > self.theta || r < 1.0 / self.theta {
                return Err(Error::InvalidKnots(format!(
                    "neighbouring spans {} and {} violate quasi-uniformity bound {}",
                    w[0], w[1], self.theta
                )));
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn span_lengths(&self) -> Vec<f64> {
        self.spans().iter().map(|s| s.end - s.start).collect()
    }

    /// Non-empty knot spans in increasing order.
    pub fn spans(&self) -> Vec<KnotSpan> {
        let p = self.degree;
        (p..self.len())
            .filter(|&i| self.knots[i + 1] > self.knots[i])
            .map(|i| KnotSpan {
                index: i,
                start: self.knots[i],
                end: self.knots[i + 1],
            })
            .collect()
    }

    /// Knot span index containing `x`; right-continuous, with `x = 1` in the last span.
    pub fn find_span(&self, x: f64) -> usize {
        let p = self.degree;
        let n = self.len();
        if x >= self.knots[n] {
            // last non-empty span
            let mut s = n - 1;
            while self.knots[s] >= self.knots[s + 1] {
                s -= 1;
            }
            return s;
        }
        if x <= self.knots[p] {
            let mut s = p;
            while self.knots[s + 1] <= x {
                s += 1;
            }
            return s;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Cox-de Boor evaluation of the `p + 1` supported basis functions and their
    /// derivatives up to `nderiv`.
    pub fn eval_basis(&self, x: f64, nderiv: usize) -> Result<BasisEval> {
        if nderiv > self.degree {
            return Err(Error::DerivativeOrder {
                requested: nderiv,
                degree: self.degree,
            });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        let span = self.find_span(x);
        Ok(BasisEval {
            first: span - self.degree,
            derivs: self.ders_at_span(span, x, nderiv),
        })
    }

    /// Basis values/derivatives for a known span; `x` is not range-checked.
    pub(crate) fn ders_at_span(&self, span: usize, x: f64, nderiv: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                // lower triangle holds knot differences
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; nderiv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nderiv {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r as isize <= pk as isize {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            for v in row.iter_mut() {
                *v *= fac;
            }
            fac *= (p - k) as f64;
        }
        ders
    }

    /// Knot averages, one per basis function.
    pub fn greville_points(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.len())
                .map(|j| 0.5 * (self.knots[j] + self.knots[j + 1]))
                .collect();
        }
        (0..self.len())
            .map(|j| self.knots[j + 1..=j + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Degree `p - 1` knot vector obtained by dropping the first and last knot.
    pub fn truncate_knots(&self) -> Result<KnotVector> {
        if self.degree == 0 {
            return Err(Error::TruncateDegreeZero);
        }
        let knots = self.knots[1..self.knots.len() - 1].to_vec();
        KnotVector::with_theta(self.degree - 1, knots, self.theta)
    }

    /// Uniform h-refinement: bisect every non-empty span.
    pub fn refine(&self) -> KnotVector {
        let p = self.degree;
        let mut knots = vec![0.0; p + 1];
        let spans = self.spans();
        for (i, s) in spans.iter().enumerate() {
            knots.push(0.5 * (s.start + s.end));
            if i + 1 < spans.len() {
                let mult = self.knots[p + 1..self.len()]
                    .iter()
                    .filter(|&&x| x == s.end)
                    .count();
                knots.extend(std::iter::repeat_n(s.end, mult));
            }
        }
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        KnotVector {
            degree: p,
            knots,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotSpan {
    /// Knot index `i` with `knots[i] <= x < knots[i + 1]`.
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

/// Tensor product of univariate bases in `d` = 1, 2 or 3 directions.
///
/// Global indices are lexicographic with the first direction running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    dirs: Vec<KnotVector>,
}

/// One supported tensor basis function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorEval {
    pub index: usize,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl TensorBasis {
    pub fn new(dirs: Vec<KnotVector>) -> Result<Self> {
        if dirs.is_empty() || dirs.len() > 3 {
            return Err(Error::Dimension(format!(
                "tensor basis needs 1 to 3 directions, got {}",
                dirs.len()
            )));
        }
        Ok(TensorBasis { dirs })
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn direction(&self, k: usize) -> &KnotVector {
        &self.dirs[k]
    }

    pub fn directions(&self) -> &[KnotVector] {
        &self.dirs
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dirs.iter().map(KnotVector::len).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &i) in multi.iter().enumerate() {
            idx += i * stride;
            stride *= self.dirs[k].len();
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.dirs
            .iter()
            .map(|kv| {
                let i = idx % kv.len();
                idx /= kv.len();
                i
            })
            .collect()
    }

    /// Values and gradients of all supported basis functions at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<TensorEval>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, basis has {}",
                x.len(),
                self.dim()
            )));
        }
        let per_dir = self
            .dirs
            .iter()
            .zip(x)
            .map(|(kv, &xi)| kv.eval_basis(xi, kv.degree().min(1)))
            .collect::<Result<Vec<_>>>()?;
        let counts: Vec<usize> = per_dir.iter().map(|e| e.values().len()).collect();
        let total: usize = counts.iter().product();
        let d = self.dim();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut local = [0usize; 3];
            for k in 0..d {
                local[k] = rem % counts[k];
                rem /= counts[k];
            }
            let multi: Vec<usize> = (0..d).map(|k| per_dir[k].first + local[k]).collect();
            let mut value = 1.0;
            for k in 0..d {
                value *= per_dir[k].derivs[0][local[k]];
            }
            let gradient = (0..d)
                .map(|g| {
                    (0..d)
                        .map(|k| {
                            let e = &per_dir[k];
                            if k == g {
                                e.derivs.get(1).map_or(0.0, |r| r[local[k]])
                            } else {
                                e.derivs[0][local[k]]
                            }
                        })
                        .product()
                })
                .collect();
            out.push(TensorEval {
                index: self.linear_index(&multi),
                value,
                gradient,
            });
        }
        Ok(out)
    }
}
