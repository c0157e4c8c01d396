//! Finite fields GF(pⁿ) in polynomial representation.
//!
//! Elements are coefficient vectors of length `n` (constant term first) reduced
//! modulo a fixed monic irreducible polynomial. The reduction polynomial is the
//! first monic irreducible of degree `n` when candidates are ordered by the
//! base-`p` integer encoding of their lower coefficients, so a given `(p, n)`
//! always yields the same field.
//!
//! Elements also have a compact integer index `Σ cᵢ·pⁱ` in `[0, q)`, which the
//! design constructions use together with [`FieldTables`].

use crate::error::{Error, Result};

/// Upper bound on the field order.
pub const MAX_ORDER: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    coeffs: Vec<u32>,
}

impl FieldElement {
    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    p: u32,
    n: u32,
    q: u32,
    /// Monic, constant term first, length n + 1.
    modulus: Vec<u32>,
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits `q` into `(p, n)` with `q = pⁿ`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q % d == 0)?;
    let mut rest = q;
    let mut n = 0;
    while rest % p == 0 {
        rest /= p;
        n += 1;
    }
    (rest == 1).then_some((p, n))
}

pub fn is_prime_power(q: u32) -> bool {
    prime_power(q).is_some()
}

impl Field {
    pub fn new(p: u32, n: u32) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::NonPrimeBase(p));
        }
        if n == 0 {
            return Err(Error::ZeroDegree);
        }
        let q = (p as u64).checked_pow(n).filter(|&q| q <= MAX_ORDER).ok_or_else(|| {
            Error::TooLarge(format!("field order {p}^{n} exceeds {MAX_ORDER}"))
        })? as u32;
        let modulus = if n == 1 {
            vec![0, 1]
        } else {
            smallest_irreducible(p, n)
        };
        Ok(Field { p, n, q, modulus })
    }

    /// GF(q) for a prime power `q`.
    pub fn with_order(q: u32) -> Result<Field> {
        match prime_power(q) {
            Some((p, n)) => Field::new(p, n),
            None => Err(Error::NonPrimeBase(q)),
        }
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    /// The reduction polynomial, constant term first, including the leading 1.
    pub fn reduction_poly(&self) -> &[u32] {
        &self.modulus
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            coeffs: vec![0; self.n as usize],
        }
    }

    pub fn one(&self) -> FieldElement {
        let mut e = self.zero();
        e.coeffs[0] = 1;
        e
    }

    /// Element with integer index `i` (base-`p` digits, constant term first).
    pub fn element(&self, i: u32) -> FieldElement {
        assert!(i < self.q, "index {i} out of range for GF({})", self.q);
        let mut coeffs = Vec::with_capacity(self.n as usize);
        let mut rest = i;
        for _ in 0..self.n {
            coeffs.push(rest % self.p);
            rest /= self.p;
        }
        FieldElement { coeffs }
    }

    /// Builds an element from coefficients, reducing each mod p.
    pub fn from_coeffs(&self, coeffs: &[u32]) -> FieldElement {
        assert!(coeffs.len() <= self.n as usize);
        let mut e = self.zero();
        for (slot, &c) in e.coeffs.iter_mut().zip(coeffs) {
            *slot = c % self.p;
        }
        e
    }

    pub fn index(&self, e: &FieldElement) -> u32 {
        e.coeffs.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.q).map(move |i| self.element(i))
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        FieldElement {
            coeffs: a
                .coeffs
                .iter()
                .zip(&b.coeffs)
                .map(|(&x, &y)| (x + y) % self.p)
                .collect(),
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        FieldElement {
            coeffs: a.coeffs.iter().map(|&x| (self.p - x) % self.p).collect(),
        }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let p = self.p as u64;
        let n = self.n as usize;
        let mut prod = vec![0u64; 2 * n - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        // x^n ≡ -(m_0 + m_1 x + ... + m_{n-1} x^{n-1})
        for d in (n..prod.len()).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for (i, &m) in self.modulus[..n].iter().enumerate() {
                let sub = c * m as u64 % p;
                prod[d - n + i] = (prod[d - n + i] + p - sub) % p;
            }
        }
        FieldElement {
            coeffs: prod[..n].iter().map(|&c| c as u32).collect(),
        }
    }

    pub fn pow(&self, a: &FieldElement, mut e: u64) -> FieldElement {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via a^(q-2).
    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(a, self.q as u64 - 2))
    }

    pub fn tables(&self) -> FieldTables {
        let q = self.q as usize;
        let elems: Vec<FieldElement> = self.elements().collect();
        let mut add = vec![0u32; q * q];
        let mut mul = vec![0u32; q * q];
        for (i, a) in elems.iter().enumerate() {
            for (j, b) in elems.iter().enumerate().skip(i) {
                let s = self.index(&self.add(a, b));
                let m = self.index(&self.mul(a, b));
                add[i * q + j] = s;
                add[j * q + i] = s;
                mul[i * q + j] = m;
                mul[j * q + i] = m;
            }
        }
        FieldTables {
            q: self.q,
            add,
            mul,
        }
    }
}

/// Addition and multiplication tables over element indices.
#[derive(Debug, Clone)]
pub struct FieldTables {
    q: u32,
    add: Vec<u32>,
    mul: Vec<u32>,
}

impl FieldTables {
    pub fn order(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        self.add[(a * self.q + b) as usize]
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[(a * self.q + b) as usize]
    }
}

/// Remainder of `a` modulo the monic polynomial `m` over GF(p). Constant term first.
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u64> = a.iter().map(|&c| c as u64).collect();
    let dm = m.len() - 1;
    let p = p as u64;
    while r.len() > dm {
        let c = r.pop().unwrap() % p;
        if c != 0 {
            let shift = r.len() - dm;
            for (i, &mi) in m[..dm].iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - c * mi as u64 % p) % p;
            }
        }
    }
    r.into_iter().map(|c| c as u32).collect()
}

fn monic_from_code(mut code: u64, degree: u32, p: u32) -> Vec<u32> {
    let mut poly = Vec::with_capacity(degree as usize + 1);
    for _ in 0..degree {
        poly.push((code % p as u64) as u32);
        code /= p as u64;
    }
    poly.push(1);
    poly
}

/// True if the monic polynomial `f` has no monic divisor of degree 1..=deg/2.
pub(crate) fn is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() as u32 - 1;
    for d in 1..=deg / 2 {
        let count = (p as u64).pow(d);
        for code in 0..count {
            let g = monic_from_code(code, d, p);
            if poly_rem(f, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn smallest_irreducible(p: u32, n: u32) -> Vec<u32> {
    let count = (p as u64).pow(n);
    (0..count)
        .map(|code| monic_from_code(code, n, p))
        .find(|f| is_irreducible(f, p))
        .expect("an irreducible polynomial exists for every degree")
}
