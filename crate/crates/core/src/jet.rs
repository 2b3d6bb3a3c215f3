//! Truncated Taylor series in two variables `(s, θ)` with complex
//! coefficients, used to apply the stationary phase operators exactly.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

type C = Complex64;

/// `Σ_{a+b ≤ deg} c_{ab} s^a θ^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    deg: usize,
    c: Vec<C>,
}

fn idx(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

impl Jet2 {
    pub fn zero(deg: usize) -> Self {
        Jet2 { deg, c: vec![C::new(0.0, 0.0); (deg + 1) * (deg + 2) / 2] }
    }

    pub fn constant(deg: usize, v: C) -> Self {
        let mut j = Jet2::zero(deg);
        j.c[0] = v;
        j
    }

    /// The coordinate `s`.
    pub fn s(deg: usize) -> Self {
        let mut j = Jet2::zero(deg);
        if deg >= 1 {
            j.c[idx(1, 0)] = C::new(1.0, 0.0);
        }
        j
    }

    /// The coordinate `θ`.
    pub fn theta(deg: usize) -> Self {
        let mut j = Jet2::zero(deg);
        if deg >= 1 {
            j.c[idx(0, 1)] = C::new(1.0, 0.0);
        }
        j
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    pub fn coeff(&self, a: usize, b: usize) -> C {
        if a + b > self.deg {
            C::new(0.0, 0.0)
        } else {
            self.c[idx(a, b)]
        }
    }

    pub fn set(&mut self, a: usize, b: usize, v: C) {
        self.c[idx(a, b)] = v;
    }

    /// `∂_s^a ∂_θ^b` at the origin.
    pub fn derivative(&self, a: usize, b: usize) -> C {
        let f = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        self.coeff(a, b) * (f(a) * f(b))
    }

    pub fn value(&self) -> C {
        self.c[0]
    }

    pub fn scale(&self, k: C) -> Self {
        Jet2 { deg: self.deg, c: self.c.iter().map(|v| v * k).collect() }
    }

    /// Drops all terms of total degree below `n`.
    pub fn drop_below(&self, n: usize) -> Self {
        let mut j = self.clone();
        for t in 0..n.min(self.deg + 1) {
            for b in 0..=t {
                j.c[idx(t - b, b)] = C::new(0.0, 0.0);
            }
        }
        j
    }

    /// Smallest total degree with a nonzero coefficient.
    pub fn order(&self) -> Option<usize> {
        (0..=self.deg).find(|&t| (0..=t).any(|b| self.c[idx(t - b, b)] != C::new(0.0, 0.0)))
    }

    pub fn powu(&self, k: usize) -> Self {
        let mut r = Jet2::constant(self.deg, C::new(1.0, 0.0));
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// `exp` of the series.
    pub fn exp(&self) -> Self {
        let f0 = self.value();
        let g = self.drop_below(1);
        let mut term = Jet2::constant(self.deg, C::new(1.0, 0.0));
        let mut sum = term.clone();
        for k in 1..=self.deg {
            term = (&term * &g).scale(C::new(1.0 / k as f64, 0.0));
            sum = &sum + &term;
        }
        sum.scale(f0.exp())
    }

    /// The second-order operator `α ∂_s² + β ∂_s∂_θ + γ ∂_θ²`; the result has
    /// degree `deg − 2`.
    pub fn apply_second_order(&self, alpha: C, beta: C, gamma: C) -> Self {
        let deg = self.deg.saturating_sub(2);
        let mut out = Jet2::zero(deg);
        for t in 0..=deg {
            for b in 0..=t {
                let a = t - b;
                let v = alpha * self.coeff(a + 2, b) * ((a + 2) * (a + 1)) as f64
                    + beta * self.coeff(a + 1, b + 1) * ((a + 1) * (b + 1)) as f64
                    + gamma * self.coeff(a, b + 2) * ((b + 2) * (b + 1)) as f64;
                out.c[idx(a, b)] = v;
            }
        }
        out
    }

    /// Evaluates the truncated polynomial.
    pub fn eval(&self, s: C, th: C) -> C {
        let mut v = C::new(0.0, 0.0);
        for t in 0..=self.deg {
            for b in 0..=t {
                v += self.c[idx(t - b, b)] * s.powu((t - b) as u32) * th.powu(b as u32);
            }
        }
        v
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, o: &Jet2) -> Jet2 {
        let deg = self.deg.min(o.deg);
        let mut r = Jet2::zero(deg);
        for (i, v) in r.c.iter_mut().enumerate() {
            *v = self.c[i] + o.c[i];
        }
        r
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, o: &Jet2) -> Jet2 {
        self + &(-o)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(C::new(-1.0, 0.0))
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, o: &Jet2) -> Jet2 {
        let deg = self.deg.min(o.deg);
        let mut r = Jet2::zero(deg);
        for t1 in 0..=deg {
            for b1 in 0..=t1 {
                let x = self.c[idx(t1 - b1, b1)];
                if x == C::new(0.0, 0.0) {
                    continue;
                }
                for t2 in 0..=(deg - t1) {
                    for b2 in 0..=t2 {
                        r.c[idx(t1 - b1 + t2 - b2, b1 + b2)] += x * o.c[idx(t2 - b2, b2)];
                    }
                }
            }
        }
        r
    }
}
