//! Arithmetic in small finite fields F_{p^e} and their subfield lattices.
//!
//! Fields are always built as F_p[t]/(m(t)) over the prime field, with m the
//! lexicographically smallest monic irreducible of degree e (coefficients
//! compared constant term first).  This pins down every derived object —
//! element codes, enumeration order, canonical generators — so that repeated
//! runs produce identical matrices.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// Largest absolute extension degree supported (up to F_{8^6} = F_{2^18}).
pub const MAX_DEGREE: usize = 18;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("characteristic {0} is not prime")]
    NonPrime(u64),
    #[error("extension degree {0} out of range 1..={MAX_DEGREE}")]
    DegreeOutOfRange(usize),
    #[error("{0} is not the order of a subfield of this field")]
    InvalidSubfield(u64),
    #[error("no element of relative degree {0} exists in this field")]
    NoSuchGenerator(usize),
    #[error("division by zero")]
    DivisionByZero,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// ---- dense polynomials over F_p, constant term first ----

fn poly_trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    poly_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = mod_inv(m[dm], p);
    while r.len() > dm {
        let dr = r.len() - 1;
        let c = (r[dr] * lead_inv) % p;
        for i in 0..=dm {
            let idx = dr - dm + i;
            r[idx] = (r[idx] + p - c * m[i] % p) % p;
        }
        poly_trim(&mut r);
    }
    r
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

fn poly_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    poly_rem(&poly_mul(a, b, p), m, p)
}

/// x^n mod m over F_p.
fn poly_x_powmod(mut n: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut base = poly_rem(&[0, 1], m, p);
    let mut acc = vec![1u64];
    while n > 0 {
        if n & 1 == 1 {
            acc = poly_mulmod(&acc, &base, m, p);
        }
        base = poly_mulmod(&base, &base, m, p);
        n >>= 1;
    }
    acc
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn mod_inv(a: u64, p: u64) -> u64 {
    // p prime, a != 0 mod p
    let mut r = 1u64;
    let mut base = a % p;
    let mut n = p - 2;
    while n > 0 {
        if n & 1 == 1 {
            r = r * base % p;
        }
        base = base * base % p;
        n >>= 1;
    }
    r
}

fn is_irreducible(f: &[u64], p: u64) -> bool {
    let e = (f.len() - 1) as u64;
    if e == 1 {
        return true;
    }
    // x^(p^e) == x mod f, and gcd(x^(p^(e/l)) - x, f) = 1 for prime l | e.
    let pe = p.checked_pow(e as u32).unwrap();
    let xq = poly_x_powmod(pe, f, p);
    let mut diff = xq;
    if diff.len() < 2 {
        diff.resize(2, 0);
    }
    diff[1] = (diff[1] + p - 1) % p;
    poly_trim(&mut diff);
    if !diff.is_empty() {
        return false;
    }
    let mut n = e;
    let mut l = 2;
    let mut primes = vec![];
    while l * l <= n {
        if n % l == 0 {
            primes.push(l);
            while n % l == 0 {
                n /= l;
            }
        }
        l += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    for l in primes {
        let mut g = poly_x_powmod(p.pow((e / l) as u32), f, p);
        if g.len() < 2 {
            g.resize(2, 0);
        }
        g[1] = (g[1] + p - 1) % p;
        poly_trim(&mut g);
        let gcd = poly_gcd(&g, f, p);
        if gcd.len() != 1 {
            return false;
        }
    }
    true
}

/// A finite field F_{p^e} = F_p[t]/(modulus).
pub struct FiniteField {
    p: u64,
    e: usize,
    modulus: Vec<u64>,
    /// t^(e+i) reduced mod modulus, i = 0..e-1.
    red: Vec<Vec<u64>>,
}

impl fmt::Debug for FiniteField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.p, self.e)
    }
}

impl PartialEq for FiniteField {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e && self.modulus == other.modulus
    }
}
impl Eq for FiniteField {}

impl FiniteField {
    /// Lexicographically smallest monic irreducible modulus of degree e.
    pub fn new(p: u64, e: usize) -> Result<Arc<FiniteField>, GfError> {
        if !is_prime(p) {
            return Err(GfError::NonPrime(p));
        }
        if e == 0 || e > MAX_DEGREE {
            return Err(GfError::DegreeOutOfRange(e));
        }
        let mut modulus = None;
        let count = p.checked_pow(e as u32).expect("field order fits in u64");
        'search: for code in 0..count {
            let mut f = vec![0u64; e + 1];
            let mut c = code;
            // minimal integer code sum(a_i p^i): the constant term is the
            // least significant digit
            for i in 0..e {
                f[i] = c % p;
                c /= p;
            }
            f[e] = 1;
            if is_irreducible(&f, p) {
                modulus = Some(f);
                break 'search;
            }
        }
        let modulus = modulus.expect("an irreducible polynomial of every degree exists");
        let mut red = Vec::with_capacity(e.max(1));
        for i in 0..e {
            let mut x = vec![0u64; e + i + 1];
            x[e + i] = 1;
            red.push(poly_rem(&x, &modulus, p));
        }
        Ok(Arc::new(FiniteField { p, e, modulus, red }))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn order(&self) -> u64 {
        self.p.pow(self.e as u32)
    }
    /// Modulus coefficients, constant term first, length e+1, monic.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn zero(self: &Arc<Self>) -> FieldElement {
        FieldElement {
            field: self.clone(),
            c: vec![0; self.e],
        }
    }
    pub fn one(self: &Arc<Self>) -> FieldElement {
        self.from_code(1)
    }
    /// The residue class of t.
    pub fn generator(self: &Arc<Self>) -> FieldElement {
        if self.e == 1 {
            // t == -modulus[0]
            return self.from_int(-(self.modulus[0] as i64));
        }
        let mut c = vec![0; self.e];
        c[1] = 1;
        FieldElement {
            field: self.clone(),
            c,
        }
    }

    /// Decode sum(c_i p^i) -> element with coefficients (c_0, ..., c_{e-1}).
    pub fn from_code(self: &Arc<Self>, code: u64) -> FieldElement {
        let mut c = vec![0u64; self.e];
        let mut v = code;
        for slot in c.iter_mut() {
            *slot = v % self.p;
            v /= self.p;
        }
        assert_eq!(v, 0, "code out of range for field of order {}", self.order());
        FieldElement {
            field: self.clone(),
            c,
        }
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(self: &Arc<Self>, v: i64) -> FieldElement {
        let p = self.p as i64;
        let mut c = vec![0u64; self.e];
        c[0] = v.rem_euclid(p) as u64;
        FieldElement {
            field: self.clone(),
            c,
        }
    }

    /// All field elements in ascending code order.
    pub fn enumerate(self: &Arc<Self>) -> impl Iterator<Item = FieldElement> + '_ {
        let f = self.clone();
        (0..self.order()).map(move |code| f.from_code(code))
    }

    fn mul_coeffs(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let p = self.p;
        let e = self.e;
        let mut prod = vec![0u64; 2 * e - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        let mut out = vec![0u64; e];
        out.copy_from_slice(&prod[..e]);
        for i in 0..e.saturating_sub(1) {
            let c = prod[e + i];
            if c == 0 {
                continue;
            }
            for (k, &r) in self.red[i].iter().enumerate() {
                out[k] = (out[k] + c * r) % p;
            }
        }
        out
    }
}

/// An element of a [`FiniteField`], as a coefficient vector in t.
#[derive(Clone)]
pub struct FieldElement {
    field: Arc<FiniteField>,
    c: Vec<u64>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#GF({}^{})", self.code(), self.field.p, self.field.e)
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c && *self.field == *other.field
    }
}
impl Eq for FieldElement {}
impl std::hash::Hash for FieldElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.c.hash(state);
    }
}

impl FieldElement {
    pub fn field(&self) -> &Arc<FiniteField> {
        &self.field
    }
    pub fn coeffs(&self) -> &[u64] {
        &self.c
    }
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }
    /// Integer code sum(c_i p^i).
    pub fn code(&self) -> u64 {
        let mut v = 0u64;
        for &ci in self.c.iter().rev() {
            v = v * self.field.p + ci;
        }
        v
    }

    fn same_field(&self, other: &FieldElement) {
        assert!(
            Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field,
            "elements of different fields"
        );
    }

    pub fn inv(&self) -> Result<FieldElement, GfError> {
        if self.is_zero() {
            return Err(GfError::DivisionByZero);
        }
        Ok(self.pow(self.field.order() - 2))
    }

    pub fn pow(&self, mut n: u64) -> FieldElement {
        let mut acc = self.field.one();
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    /// Order of the subfield F_q if q is a valid subfield order, i.e. q = p^d with d | e.
    fn subfield_degree(&self, q: u64) -> Result<usize, GfError> {
        let p = self.field.p;
        let mut d = 0usize;
        let mut v = q;
        while v > 1 && v % p == 0 {
            v /= p;
            d += 1;
        }
        if v != 1 || d == 0 || self.field.e % d != 0 {
            return Err(GfError::InvalidSubfield(q));
        }
        Ok(d)
    }

    /// x -> x^q, a generator of Gal(F_{p^e} / F_q).
    pub fn frobenius(&self, q: u64) -> Result<FieldElement, GfError> {
        self.subfield_degree(q)?;
        Ok(self.pow(q))
    }

    /// True if x lies in the subfield of order q.
    pub fn is_rational(&self, q: u64) -> Result<bool, GfError> {
        Ok(self.frobenius(q)? == *self)
    }

    /// Size of the Frobenius orbit of x over F_q (the degree of x over F_q).
    pub fn degree_over(&self, q: u64) -> Result<usize, GfError> {
        self.subfield_degree(q)?;
        let mut y = self.pow(q);
        let mut deg = 1;
        while y != *self {
            y = y.pow(q);
            deg += 1;
        }
        Ok(deg)
    }

    /// Monic minimal polynomial of x over F_q; coefficients (constant first)
    /// are returned inside the ambient field but lie in F_q.
    pub fn minimal_polynomial(&self, q: u64) -> Result<Vec<FieldElement>, GfError> {
        let deg = self.degree_over(q)?;
        let f = &self.field;
        // product of (X - sigma^i(x)) as a polynomial in X over the ambient field
        let mut poly = vec![f.one()];
        let mut conj = self.clone();
        for _ in 0..deg {
            let mut next = vec![f.zero(); poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i + 1] = &next[i + 1] + c;
                next[i] = &next[i] - &(c * &conj);
            }
            poly = next;
            conj = conj.pow(q);
        }
        for c in &poly {
            debug_assert!(c.is_rational(q).unwrap());
        }
        Ok(poly)
    }

    /// Trace and norm of x down to F_q, using the full extension degree
    /// [F_{p^e} : F_q] many conjugates (with repetition if x lies deeper).
    pub fn trace_norm(&self, q: u64) -> Result<(FieldElement, FieldElement), GfError> {
        let d = self.subfield_degree(q)?;
        let m = self.field.e / d;
        let mut tr = self.field.zero();
        let mut nm = self.field.one();
        let mut conj = self.clone();
        for _ in 0..m {
            tr = &tr + &conj;
            nm = &nm * &conj;
            conj = conj.pow(q);
        }
        debug_assert!(tr.is_rational(q).unwrap() && nm.is_rational(q).unwrap());
        Ok((tr, nm))
    }
}

impl Add for &FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &FieldElement) -> FieldElement {
        self.same_field(rhs);
        let p = self.field.p;
        let c = self
            .c
            .iter()
            .zip(&rhs.c)
            .map(|(&a, &b)| (a + b) % p)
            .collect();
        FieldElement {
            field: self.field.clone(),
            c,
        }
    }
}

impl Sub for &FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &FieldElement) -> FieldElement {
        self.same_field(rhs);
        let p = self.field.p;
        let c = self
            .c
            .iter()
            .zip(&rhs.c)
            .map(|(&a, &b)| (a + p - b) % p)
            .collect();
        FieldElement {
            field: self.field.clone(),
            c,
        }
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        let p = self.field.p;
        let c = self.c.iter().map(|&a| (p - a) % p).collect();
        FieldElement {
            field: self.field.clone(),
            c,
        }
    }
}

impl Mul for &FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &FieldElement) -> FieldElement {
        self.same_field(rhs);
        FieldElement {
            field: self.field.clone(),
            c: self.field.mul_coeffs(&self.c, &rhs.c),
        }
    }
}

// ---- F_p linear algebra helpers (used for subfield computations) ----

fn fp_solve_kernel(mat: &[Vec<u64>], p: u64) -> Vec<Vec<u64>> {
    // kernel of the column-vector map v -> mat * v; mat is rows x cols
    let rows = mat.len();
    let cols = if rows == 0 { 0 } else { mat[0].len() };
    let mut m: Vec<Vec<u64>> = mat.to_vec();
    let mut pivot_col_of_row = vec![];
    let mut pivot_cols = vec![];
    let mut r = 0;
    for c in 0..cols {
        let mut pr = None;
        for i in r..rows {
            if m[i][c] != 0 {
                pr = Some(i);
                break;
            }
        }
        let Some(pr) = pr else { continue };
        m.swap(r, pr);
        let inv = mod_inv(m[r][c], p);
        for x in m[r].iter_mut() {
            *x = *x * inv % p;
        }
        for i in 0..rows {
            if i != r && m[i][c] != 0 {
                let f = m[i][c];
                for j in 0..cols {
                    m[i][j] = (m[i][j] + p - f * m[r][j] % p) % p;
                }
            }
        }
        pivot_col_of_row.push(c);
        pivot_cols.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let mut basis = vec![];
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![0u64; cols];
        v[free] = 1;
        for (row, &pc) in pivot_col_of_row.iter().enumerate() {
            v[pc] = (p - m[row][free] % p) % p;
        }
        basis.push(v);
    }
    basis
}

fn fp_invert(mat: &[Vec<u64>], p: u64) -> Option<Vec<Vec<u64>>> {
    let n = mat.len();
    let mut m: Vec<Vec<u64>> = mat
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u64::from(j == i)));
            r
        })
        .collect();
    for c in 0..n {
        let pr = (c..n).find(|&i| m[i][c] != 0)?;
        m.swap(c, pr);
        let inv = mod_inv(m[c][c], p);
        for x in m[c].iter_mut() {
            *x = *x * inv % p;
        }
        for i in 0..n {
            if i != c && m[i][c] != 0 {
                let f = m[i][c];
                for j in 0..2 * n {
                    m[i][j] = (m[i][j] + p - f * m[c][j] % p) % p;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// The subfield F_q inside an ambient field K = F_{p^e}, together with the
/// canonical identification with the standalone field F_q (lex-min modulus).
///
/// The identification sends the standalone generator to the root of the
/// standalone modulus in K with the smallest element code.
pub struct Subfield {
    field: Arc<FiniteField>,
    standalone: Arc<FiniteField>,
    q: u64,
    d: usize,
    elems: Vec<FieldElement>,
    codes: HashMap<Vec<u64>, u64>,
    /// inverse of the F_p matrix whose columns are root^i * t^j
    dec_inv: Vec<Vec<u64>>,
}

impl Subfield {
    pub fn new(field: &Arc<FiniteField>, q: u64) -> Result<Subfield, GfError> {
        let probe = field.zero();
        let d = probe.subfield_degree(q)?;
        let p = field.p();
        let e = field.e();
        let standalone = FiniteField::new(p, d)?;

        // F_p-matrix of x -> x^(p^d) minus identity; its kernel is F_q.
        let mut frob = vec![vec![0u64; e]; e];
        for j in 0..e {
            let mut b = field.zero();
            b.c[j] = 1;
            let img = b.pow(p.pow(d as u32));
            for i in 0..e {
                frob[i][j] = img.c[i];
            }
        }
        for i in 0..e {
            frob[i][i] = (frob[i][i] + p - 1) % p;
        }
        let kernel = fp_solve_kernel(&frob, p);
        assert_eq!(kernel.len(), d, "subfield has F_p-dimension d");

        // all q subfield elements, as a set
        let mut members = vec![];
        let total = p.pow(d as u32);
        for mut idx in 0..total {
            let mut c = vec![0u64; e];
            for b in &kernel {
                let digit = idx % p;
                idx /= p;
                for (slot, &bv) in c.iter_mut().zip(b) {
                    *slot = (*slot + digit * bv) % p;
                }
            }
            members.push(FieldElement {
                field: field.clone(),
                c,
            });
        }

        // canonical embedding: smallest-code root of the standalone modulus
        let root = if d == 1 {
            field.one()
        } else {
            let mut best: Option<FieldElement> = None;
            for x in &members {
                // evaluate standalone modulus at x
                let mut v = field.zero();
                for &mc in standalone.modulus().iter().rev() {
                    v = &(&v * x) + &field.from_int(mc as i64);
                }
                if v.is_zero() {
                    if best.as_ref().map_or(true, |b| x.code() < b.code()) {
                        best = Some(x.clone());
                    }
                }
            }
            best.expect("standalone modulus splits in any field containing F_q")
        };

        let mut elems = Vec::with_capacity(q as usize);
        let mut codes = HashMap::new();
        for code in 0..q {
            let sa = standalone.from_code(code);
            let mut img = field.zero();
            for &ci in sa.coeffs().iter().rev() {
                img = &(&img * &root) + &field.from_int(ci as i64);
            }
            codes.insert(img.c.clone(), code);
            elems.push(img);
        }

        // decomposition basis {root^i t^j : i < d, j < e/d} for K over F_p
        let m = e / d;
        let t = if e == 1 { field.one() } else { field.generator() };
        let mut cols = vec![vec![0u64; e]; e];
        let mut tj = field.one();
        for j in 0..m {
            let mut ri = field.one();
            for i in 0..d {
                let prod = &ri * &tj;
                for (r, &v) in prod.c.iter().enumerate() {
                    cols[r][j * d + i] = v;
                }
                ri = &ri * &root;
            }
            tj = &tj * &t;
        }
        let dec_inv = fp_invert(&cols, p).expect("decomposition basis is a basis");

        Ok(Subfield {
            field: field.clone(),
            standalone,
            q,
            d,
            elems,
            codes,
            dec_inv,
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }
    pub fn field(&self) -> &Arc<FiniteField> {
        &self.field
    }
    /// The standalone presentation of F_q over its prime field.
    pub fn standalone(&self) -> &Arc<FiniteField> {
        &self.standalone
    }
    /// [K : F_q]
    pub fn codegree(&self) -> usize {
        self.field.e() / self.d
    }
    /// Subfield elements inside K, indexed by standalone code.
    pub fn elements(&self) -> &[FieldElement] {
        &self.elems
    }
    pub fn element(&self, code: u64) -> &FieldElement {
        &self.elems[code as usize]
    }
    /// Standalone code of x, if x lies in the subfield.
    pub fn code_of(&self, x: &FieldElement) -> Option<u64> {
        self.codes.get(&x.c).copied()
    }
    pub fn contains(&self, x: &FieldElement) -> bool {
        self.codes.contains_key(&x.c)
    }

    /// Coordinates of x over F_q in the basis {1, t, ..., t^(m-1)}, m = [K:F_q].
    /// Entries are subfield elements of K.
    pub fn decompose(&self, x: &FieldElement) -> Vec<FieldElement> {
        let p = self.field.p();
        let e = self.field.e();
        let coords: Vec<u64> = (0..e)
            .map(|r| {
                let mut acc = 0u64;
                for (j, &xv) in x.c.iter().enumerate() {
                    acc = (acc + self.dec_inv[r][j] * xv) % p;
                }
                acc
            })
            .collect();
        let m = self.codegree();
        (0..m)
            .map(|j| {
                let mut v = self.field.zero();
                let mut ri = self.field.one();
                let root = if self.d == 1 {
                    self.field.one()
                } else {
                    // reconstruct the embedding root as element(standalone generator code)
                    self.elems[self.standalone.generator().code() as usize].clone()
                };
                for i in 0..self.d {
                    let digit = coords[j * self.d + i];
                    if digit != 0 {
                        v = &v + &(&ri * &self.field.from_int(digit as i64));
                    }
                    ri = &ri * &root;
                }
                v
            })
            .collect()
    }

    /// First element of K in code order whose Frobenius orbit over F_q has
    /// size exactly m; generates F_{q^m} over F_q.
    pub fn canonical_generator(&self, m: usize) -> Result<FieldElement, GfError> {
        if m == 0 || self.codegree() % m != 0 {
            return Err(GfError::NoSuchGenerator(m));
        }
        for x in self.field.enumerate() {
            if x.degree_over(self.q)? == m {
                return Ok(x);
            }
        }
        Err(GfError::NoSuchGenerator(m))
    }
}
