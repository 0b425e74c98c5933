use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exponent vector of a monomial `y^α = y_1^α_1 ⋯ y_n^α_n`.
///
/// Ordered graded-lexicographically: ascending total degree, then
/// lexicographically with `y_1` leading, so that in two variables the
/// monomials of degree two come out as `y1^2, y1*y2, y2^2`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// `α! = α_1! ⋯ α_n!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `α·μ = Σ α_i μ_i`
    pub fn dot(&self, mu: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(mu)
            .map(|(&a, m)| m * f64::from(a))
            .sum()
    }

    /// Human-readable monomial, e.g. `y1^2*y2`; the constant monomial is `1`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| {
                if a == 1 {
                    format!("y{}", i + 1)
                } else {
                    format!("y{}^{}", i + 1, a)
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// `dim P_N` for `n` variables: the number of monomials of degree at most `order`.
pub fn monomial_count(n: usize, order: usize) -> usize {
    binomial(n + order, n)
}

/// All monomials of degree at most `order` in graded-lex order, with the
/// offsets of each homogeneous degree block.
#[derive(Debug)]
pub struct MonomialBasis {
    n: usize,
    order: usize,
    monomials: Vec<MultiIndex>,
    offsets: Vec<usize>,
}

impl MonomialBasis {
    /// Shared basis for `(n, order)`.
    pub fn get(n: usize, order: usize) -> Arc<MonomialBasis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((n, order))
            .or_insert_with(|| Arc::new(MonomialBasis::build(n, order)))
            .clone()
    }

    fn build(n: usize, order: usize) -> MonomialBasis {
        let mut monomials = Vec::with_capacity(monomial_count(n, order));
        let mut offsets = Vec::with_capacity(order + 2);
        for d in 0..=order {
            offsets.push(monomials.len());
            let mut buf = vec![0u32; n];
            push_degree(&mut buf, 0, d as u32, &mut monomials);
        }
        offsets.push(monomials.len());
        MonomialBasis {
            n,
            order,
            monomials,
            offsets,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    /// Index range of the homogeneous monomials of degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        if d > self.order {
            return self.len()..self.len();
        }
        self.offsets[d]..self.offsets[d + 1]
    }

    /// Position of `exps` in the graded-lex enumeration (independent of `order`).
    pub fn rank(&self, exps: &[u32]) -> usize {
        rank(self.n, exps)
    }
}

fn push_degree(buf: &mut [u32], i: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if i + 1 == buf.len() {
        buf[i] = remaining;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[i] = e;
        push_degree(buf, i + 1, remaining - e, out);
    }
    buf[i] = 0;
}

pub(crate) fn rank(n: usize, exps: &[u32]) -> usize {
    let d: usize = exps.iter().map(|&a| a as usize).sum();
    let mut pos = if d == 0 { 0 } else { binomial(n + d - 1, n) };
    let mut r = d;
    for (i, &a) in exps.iter().enumerate().take(n.saturating_sub(1)) {
        let a = a as usize;
        let k = n - i - 1;
        if r > a {
            pos += binomial(r - a - 1 + k, k);
        }
        r -= a;
    }
    pos
}
