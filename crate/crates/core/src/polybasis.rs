//! Graded multivariate polynomial bases.
//!
//! A [`GradedBasis`] lists every multi-index of total degree at most `d` in
//! graded lexicographic order (degree first, then lexicographic with
//! `X1 > X2 > ... > Xp`). Because the order is graded, the basis of degree
//! `d` is a prefix of the basis of any higher degree, which the rank-curve
//! code relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial (or of a tensor Chebyshev product).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        let degree = exponents.iter().sum();
        Self { exponents, degree }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Graded lexicographic comparison with `X1 > X2 > ...`.
    pub fn grlex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exponents.cmp(&self.exponents))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Monomial,
    TensorChebyshev,
}

impl BasisKind {
    pub fn code(self) -> u8 {
        match self {
            BasisKind::Monomial => 0,
            BasisKind::TensorChebyshev => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BasisKind::Monomial),
            1 => Some(BasisKind::TensorChebyshev),
            _ => None,
        }
    }
}

/// Per-coordinate interval mapped affinely onto `[-1, 1]` before Chebyshev
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ScaleBox {
    pub fn identity(p: usize) -> Self {
        Self {
            lo: vec![-1.0; p],
            hi: vec![1.0; p],
        }
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        let b = Self { lo, hi };
        b.check()?;
        Ok(b)
    }

    /// Bounding box of `points` (rows of length `p`), padded by `pad` times the
    /// width on each side. Zero-width coordinates get a unit half-width.
    pub fn bounding<'a>(p: usize, points: impl IntoIterator<Item = &'a [f64]>, pad: f64) -> Self {
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for x in points {
            for j in 0..p {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        for j in 0..p {
            if !lo[j].is_finite() || !hi[j].is_finite() {
                lo[j] = -1.0;
                hi[j] = 1.0;
                continue;
            }
            let width = hi[j] - lo[j];
            if width <= 0.0 {
                lo[j] -= 1.0;
                hi[j] += 1.0;
            } else {
                lo[j] -= pad * width;
                hi[j] += pad * width;
            }
        }
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn check(&self) -> Result<()> {
        for (j, (&l, &h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::invalid(format!(
                    "degenerate scale box interval {j}: [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    /// Affine map of coordinate `j` onto `[-1, 1]`.
    #[inline]
    pub fn rescale(&self, j: usize, x: f64) -> f64 {
        (2.0 * x - self.lo[j] - self.hi[j]) / (self.hi[j] - self.lo[j])
    }
}

/// Number of multi-indices in `p` variables of degree at most `d`: C(p+d, d).
pub fn basis_size(p: usize, d: usize) -> usize {
    binomial(p + d, d)
}

/// Exact binomial coefficient; saturates at `usize::MAX`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Ordered multi-index set up to a maximal total degree, with its evaluation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedBasis {
    ambient_dim: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    kind: BasisKind,
    scale_box: ScaleBox,
}

impl GradedBasis {
    /// Enumerates the complete graded basis. For the monomial kind the
    /// supplied box is replaced by the identity box.
    pub fn new(p: usize, d: usize, kind: BasisKind, scale_box: ScaleBox) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        let scale_box = match kind {
            BasisKind::Monomial => ScaleBox::identity(p),
            BasisKind::TensorChebyshev => {
                if scale_box.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        actual: scale_box.dim(),
                    });
                }
                scale_box.check()?;
                scale_box
            }
        };
        let mut indices = Vec::with_capacity(basis_size(p, d));
        let mut buf = vec![0u32; p];
        for deg in 0..=d as u32 {
            push_degree(&mut indices, &mut buf, 0, deg);
        }
        Ok(Self {
            ambient_dim: p,
            max_degree: d,
            indices,
            kind,
            scale_box,
        })
    }

    pub fn monomial(p: usize, d: usize) -> Result<Self> {
        Self::new(p, d, BasisKind::Monomial, ScaleBox::identity(p))
    }

    pub fn chebyshev(p: usize, d: usize, scale_box: ScaleBox) -> Result<Self> {
        Self::new(p, d, BasisKind::TensorChebyshev, scale_box)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn scale_box(&self) -> &ScaleBox {
        &self.scale_box
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The same basis truncated to degree `d`; a prefix of `self`.
    pub fn truncate(&self, d: usize) -> Self {
        let d = d.min(self.max_degree);
        let len = basis_size(self.ambient_dim, d);
        Self {
            ambient_dim: self.ambient_dim,
            max_degree: d,
            indices: self.indices[..len].to_vec(),
            kind: self.kind,
            scale_box: self.scale_box.clone(),
        }
    }

    /// Position of a multi-index in the basis.
    pub fn position(&self, exponents: &[u32]) -> Option<usize> {
        if exponents.len() != self.ambient_dim {
            return None;
        }
        let target = MultiIndex::new(exponents.to_vec());
        if target.degree() as usize > self.max_degree {
            return None;
        }
        self.indices
            .binary_search_by(|probe| probe.grlex_cmp(&target))
            .ok()
    }

    /// Basis vector `v_d(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `v_d(x)` into `out`, which must have length `self.len()`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                actual: x.len(),
            });
        }
        debug_assert_eq!(out.len(), self.len());
        let p = self.ambient_dim;
        let stride = self.max_degree + 1;
        // table[j * stride + k] = k-th univariate basis function at coordinate j
        let mut table = vec![0.0; p * stride];
        for (j, &xj) in x.iter().enumerate() {
            let row = &mut table[j * stride..(j + 1) * stride];
            match self.kind {
                BasisKind::Monomial => powers_into(xj, row),
                BasisKind::TensorChebyshev => {
                    chebyshev_table_into(self.scale_box.rescale(j, xj), row)
                }
            }
        }
        for (slot, idx) in out.iter_mut().zip(&self.indices) {
            *slot = idx
                .exponents
                .iter()
                .enumerate()
                .map(|(j, &e)| table[j * stride + e as usize])
                .product();
        }
        Ok(())
    }

    /// Re-expresses coefficients in this basis as coefficients in the
    /// monomial basis of the same dimension and degree.
    pub fn to_monomial_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: coeffs.len(),
            });
        }
        if self.kind == BasisKind::Monomial {
            return Ok(coeffs.to_vec());
        }
        let p = self.ambient_dim;
        let d = self.max_degree;
        let cheb = chebyshev_monomial_coefficients(d);
        // per coordinate: univariate coefficients of T_k(a x + b) in powers of x
        let shifted: Vec<Vec<Vec<f64>>> = (0..p)
            .map(|j| {
                let a = 2.0 / (self.scale_box.hi[j] - self.scale_box.lo[j]);
                let b = -(self.scale_box.hi[j] + self.scale_box.lo[j])
                    / (self.scale_box.hi[j] - self.scale_box.lo[j]);
                cheb.iter().map(|c| compose_affine(c, a, b)).collect()
            })
            .collect();
        let mut out = vec![0.0; self.len()];
        let mut buf = vec![0u32; p];
        for (idx, &w) in self.indices.iter().zip(coeffs) {
            if w == 0.0 {
                continue;
            }
            expand_tensor(
                &shifted,
                idx.exponents(),
                0,
                w,
                &mut buf,
                &mut |exps, value| {
                    // every expanded monomial has degree <= idx.degree() <= d
                    let pos = self.position(exps).expect("monomial within basis");
                    out[pos] += value;
                },
            );
        }
        Ok(out)
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, buf: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(MultiIndex::new(buf.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e;
        push_degree(out, buf, pos + 1, remaining - e);
    }
    buf[pos] = 0;
}

fn expand_tensor(
    shifted: &[Vec<Vec<f64>>],
    exps: &[u32],
    j: usize,
    acc: f64,
    buf: &mut [u32],
    emit: &mut dyn FnMut(&[u32], f64),
) {
    if j == exps.len() {
        emit(buf, acc);
        return;
    }
    let poly = &shifted[j][exps[j] as usize];
    for (m, &c) in poly.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        buf[j] = m as u32;
        expand_tensor(shifted, exps, j + 1, acc * c, buf, emit);
    }
    buf[j] = 0;
}

fn powers_into(x: f64, out: &mut [f64]) {
    let mut acc = 1.0;
    for slot in out.iter_mut() {
        *slot = acc;
        acc *= x;
    }
}

/// Fills `out[k] = T_k(t)` by the three-term recurrence.
pub fn chebyshev_table_into(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * t * out[k - 1] - out[k - 2];
    }
}

/// `T_k(t)` through the three-term recurrence, valid for every real `t`.
pub fn chebyshev_t_recurrence(k: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `T_k(t)` for `|t| >= 1` from `((t + sqrt(t^2 - 1))^k + (t + sqrt(t^2 - 1))^-k) / 2`,
/// using parity for negative `t`.
pub fn chebyshev_t_closed(k: usize, t: f64) -> f64 {
    if t < 0.0 {
        let v = chebyshev_t_closed(k, -t);
        return if k % 2 == 0 { v } else { -v };
    }
    let root = t + (t * t - 1.0).max(0.0).sqrt();
    // exp/ln form keeps large k from overflowing the intermediate power early
    let lk = k as f64 * root.ln();
    0.5 * (lk.exp() + (-lk).exp())
}

/// First-kind Chebyshev polynomial `T_k(t)`: recurrence on `[-1, 1]`, closed
/// form outside.
pub fn chebyshev_t(k: usize, t: f64) -> f64 {
    if t.abs() <= 1.0 {
        chebyshev_t_recurrence(k, t)
    } else {
        chebyshev_t_closed(k, t)
    }
}

/// Monomial coefficients of `T_0 .. T_d`.
fn chebyshev_monomial_coefficients(d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    out.push(vec![1.0]);
    if d >= 1 {
        out.push(vec![0.0, 1.0]);
    }
    for k in 2..=d {
        let mut c = vec![0.0; k + 1];
        for (i, &v) in out[k - 1].iter().enumerate() {
            c[i + 1] += 2.0 * v;
        }
        for (i, &v) in out[k - 2].iter().enumerate() {
            c[i] -= v;
        }
        out.push(c);
    }
    out
}

/// Coefficients of `q(a x + b)` given coefficients of `q(t)`.
fn compose_affine(q: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    for (j, &c) in q.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (m, slot) in out.iter_mut().enumerate().take(j + 1) {
            *slot += c * binomial(j, m) as f64 * a.powi(m as i32) * b.powi((j - m) as i32);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exps(b: &GradedBasis) -> Vec<Vec<u32>> {
        b.indices().iter().map(|i| i.exponents().to_vec()).collect()
    }

    #[test]
    fn two_variables_degree_three_order() {
        let b = GradedBasis::monomial(2, 3).unwrap();
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
            vec![3, 0],
            vec![2, 1],
            vec![1, 2],
            vec![0, 3],
        ];
        assert_eq!(exps(&b), expected);
    }

    #[test]
    fn constant_only_and_counts() {
        let b = GradedBasis::monomial(1, 0).unwrap();
        assert_eq!(exps(&b), vec![vec![0]]);
        assert_eq!(GradedBasis::monomial(3, 2).unwrap().len(), 10);
    }

    #[test]
    fn sizes_match_binomial_exhaustively() {
        for p in 1..=4 {
            for d in 0..=12 {
                let b = GradedBasis::monomial(p, d).unwrap();
                assert_eq!(b.len(), binomial(p + d, d), "p={p} d={d}");
                assert_eq!(b.len(), basis_size(p, d));
            }
        }
    }

    #[test]
    fn order_is_strictly_graded_lex() {
        let b = GradedBasis::monomial(4, 6).unwrap();
        for w in b.indices().windows(2) {
            let (a, c) = (&w[0], &w[1]);
            assert!(
                a.degree() < c.degree()
                    || (a.degree() == c.degree() && a.exponents() > c.exponents()),
                "{a:?} !< {c:?}"
            );
            assert_eq!(a.grlex_cmp(c), std::cmp::Ordering::Less);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(GradedBasis::monomial(0, 3).is_err());
        let degenerate = ScaleBox {
            lo: vec![0.0, 1.0],
            hi: vec![1.0, 1.0],
        };
        assert!(GradedBasis::chebyshev(2, 2, degenerate).is_err());
        let b = GradedBasis::monomial(2, 2).unwrap();
        assert!(matches!(
            b.eval(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn monomial_evaluation() {
        let b = GradedBasis::monomial(2, 2).unwrap();
        assert_eq!(b.eval(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
        let at_zero = GradedBasis::monomial(3, 4).unwrap().eval(&[0.0; 3]).unwrap();
        assert_eq!(at_zero[0], 1.0);
        assert!(at_zero[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chebyshev_endpoint_is_all_ones() {
        let b = GradedBasis::chebyshev(3, 5, ScaleBox::identity(3)).unwrap();
        assert!(b.eval(&[1.0; 3]).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn chebyshev_scalar_values() {
        for t in [-3.0, -0.3, 0.0, 0.7, 2.5] {
            assert_eq!(chebyshev_t(0, t), 1.0);
        }
        assert!((chebyshev_t(2, 0.5) + 0.5).abs() < 1e-15);
        let rec = chebyshev_t_recurrence(5, 1.3);
        let closed = chebyshev_t_closed(5, 1.3);
        // 16 t^5 - 20 t^3 + 5 t
        let direct = 16.0 * 1.3f64.powi(5) - 20.0 * 1.3f64.powi(3) + 5.0 * 1.3;
        assert!((rec - closed).abs() < 1e-12);
        assert!((rec - direct).abs() < 1e-12);
        assert!((chebyshev_t(3, -1.7) - chebyshev_t_recurrence(3, -1.7)).abs() < 1e-12);
    }

    #[test]
    fn truncate_is_prefix() {
        let b = GradedBasis::chebyshev(3, 6, ScaleBox::identity(3)).unwrap();
        let t = b.truncate(4);
        assert_eq!(t.indices(), &b.indices()[..t.len()]);
        let x = [0.3, -0.2, 0.9];
        assert_eq!(t.eval(&x).unwrap(), b.eval(&x).unwrap()[..t.len()].to_vec());
    }

    #[test]
    fn monomial_conversion_reproduces_values() {
        let bx = ScaleBox::new(vec![-1.3, 0.0, -2.0], vec![0.7, 2.0, 1.0]).unwrap();
        let b = GradedBasis::chebyshev(3, 3, bx).unwrap();
        let m = GradedBasis::monomial(3, 3).unwrap();
        let coeffs: Vec<f64> = (0..b.len()).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let mono = b.to_monomial_coefficients(&coeffs).unwrap();
        for x in [[0.1, 0.5, -0.4], [-1.0, 1.7, 0.3], [0.6, 0.2, 0.9]] {
            let lhs: f64 = b.eval(&x).unwrap().iter().zip(&coeffs).map(|(a, c)| a * c).sum();
            let rhs: f64 = m.eval(&x).unwrap().iter().zip(&mono).map(|(a, c)| a * c).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    proptest! {
        #[test]
        fn monomials_are_multiplicative(
            x in prop::collection::vec(-2.0f64..2.0, 3),
            a in 0usize..35,
            c in 0usize..35,
        ) {
            let b = GradedBasis::monomial(3, 8).unwrap();
            let v = b.eval(&x).unwrap();
            let ea = b.indices()[a].exponents();
            let ec = b.indices()[c].exponents();
            let sum: Vec<u32> = ea.iter().zip(ec).map(|(p, q)| p + q).collect();
            if let Some(pos) = b.position(&sum) {
                let prod = v[a] * v[c];
                prop_assert!((v[pos] - prod).abs() <= 1e-12 * prod.abs().max(1.0));
            }
        }

        #[test]
        fn chebyshev_paths_agree_above_one(k in 0usize..60, t in 1.0f64..3.0) {
            let rec = chebyshev_t_recurrence(k, t);
            let closed = chebyshev_t_closed(k, t);
            prop_assert!((rec - closed).abs() <= 1e-10 * closed.abs());
        }

        #[test]
        fn position_inverts_enumeration(i in 0usize..210) {
            let b = GradedBasis::monomial(4, 6).unwrap();
            prop_assert_eq!(b.position(b.indices()[i].exponents()), Some(i));
        }
    }
}
