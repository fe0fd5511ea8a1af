//! Projective plane geometry over finite fields: point enumeration, Galois
//! orbits, lines and conics, products and rational spans of conjugate forms,
//! and linear systems of plane curves with assigned base points, including
//! infinitely-near chains handled by explicit blow-up charts.
//!
//! Everything is computed inside one ambient field K large enough to contain
//! all conjugate points; rationality over the subfield F_q is imposed at the
//! end by F_q-linear algebra.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::gf::{FieldElement, FiniteField, GfError, Subfield};

#[derive(Debug, Error)]
pub enum PlaneError {
    #[error("field error: {0}")]
    Gf(#[from] GfError),
    #[error("degenerate conditions: {0}")]
    Degenerate(String),
    #[error("forms are not a single Frobenius orbit")]
    NotAnOrbit,
    #[error("result is not rational over the requested subfield")]
    NotRational,
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

type Result<T> = std::result::Result<T, PlaneError>;

/// A point of P^2(K), normalized so the first nonzero coordinate is 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PlanePoint {
    coords: [FieldElement; 3],
}

impl std::fmt::Debug for PlanePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}:{}:{})",
            self.coords[0].code(),
            self.coords[1].code(),
            self.coords[2].code()
        )
    }
}

impl PlanePoint {
    pub fn new(coords: [FieldElement; 3]) -> Result<PlanePoint> {
        let lead = coords
            .iter()
            .position(|c| !c.is_zero())
            .ok_or_else(|| PlaneError::Degenerate("(0:0:0) is not a point".into()))?;
        let inv = coords[lead].inv()?;
        Ok(PlanePoint {
            coords: [
                &coords[0] * &inv,
                &coords[1] * &inv,
                &coords[2] * &inv,
            ],
        })
    }

    pub fn coords(&self) -> &[FieldElement; 3] {
        &self.coords
    }

    pub fn frobenius(&self, q: u64) -> Result<PlanePoint> {
        Ok(PlanePoint {
            // normalization is preserved: leading 1 maps to 1
            coords: [
                self.coords[0].frobenius(q)?,
                self.coords[1].frobenius(q)?,
                self.coords[2].frobenius(q)?,
            ],
        })
    }

    /// The Frobenius orbit of the point over F_q, starting at self.
    pub fn galois_orbit(&self, q: u64) -> Result<Vec<PlanePoint>> {
        let mut orbit = vec![self.clone()];
        let mut cur = self.frobenius(q)?;
        while cur != *self {
            orbit.push(cur.clone());
            cur = cur.frobenius(q)?;
        }
        Ok(orbit)
    }

    pub fn degree(&self, q: u64) -> Result<usize> {
        Ok(self.galois_orbit(q)?.len())
    }

    pub fn is_rational(&self, q: u64) -> Result<bool> {
        Ok(self.frobenius(q)? == *self)
    }
}

/// Rational points of P^2(F_q) inside K, in the deterministic scan order
/// (1:y:z), then (0:1:z), then (0:0:1); y and z run through the subfield in
/// element-code order.
pub fn enumerate_points(sub: &Subfield) -> Vec<PlanePoint> {
    let f = sub.field();
    let one = f.one();
    let zero = f.zero();
    let mut pts = vec![];
    for y in sub.elements() {
        for z in sub.elements() {
            pts.push(PlanePoint {
                coords: [one.clone(), y.clone(), z.clone()],
            });
        }
    }
    for z in sub.elements() {
        pts.push(PlanePoint {
            coords: [zero.clone(), one.clone(), z.clone()],
        });
    }
    pts.push(PlanePoint {
        coords: [zero.clone(), zero, one],
    });
    pts
}

/// Exponent triples (a, b, c) with a+b+c = d in descending lexicographic
/// order; this fixes coefficient vector layout for all forms of degree d.
pub fn monomials(d: usize) -> Vec<(usize, usize, usize)> {
    let mut out = vec![];
    for a in (0..=d).rev() {
        for b in (0..=d - a).rev() {
            out.push((a, b, d - a - b));
        }
    }
    out
}

/// A homogeneous form in X, Y, Z with coefficients in K, stored in the
/// [`monomials`] order for its degree.
#[derive(Clone, PartialEq, Eq)]
pub struct Form {
    degree: usize,
    coeffs: Vec<FieldElement>,
}

impl std::fmt::Debug for Form {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for ((a, b, c), co) in monomials(self.degree).into_iter().zip(&self.coeffs) {
            if co.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{}*X^{a}Y^{b}Z^{c}", co.code())?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Form {
    pub fn zero(field: &Arc<FiniteField>, degree: usize) -> Form {
        Form {
            degree,
            coeffs: vec![field.zero(); monomials(degree).len()],
        }
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<FieldElement>) -> Form {
        assert_eq!(coeffs.len(), monomials(degree).len());
        Form { degree, coeffs }
    }

    /// Build a form from (exponent triple, coefficient) terms.
    pub fn from_terms(
        field: &Arc<FiniteField>,
        degree: usize,
        terms: &[((usize, usize, usize), FieldElement)],
    ) -> Form {
        let mons = monomials(degree);
        let mut f = Form::zero(field, degree);
        for (exp, c) in terms {
            let idx = mons.iter().position(|m| m == exp).expect("valid exponent");
            f.coeffs[idx] = &f.coeffs[idx] + c;
        }
        f
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }
    pub fn coeff(&self, exp: (usize, usize, usize)) -> &FieldElement {
        let idx = monomials(self.degree)
            .iter()
            .position(|m| *m == exp)
            .expect("valid exponent");
        &self.coeffs[idx]
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!(self.degree, other.degree);
        Form {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, s: &FieldElement) -> Form {
        Form {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn mul(&self, other: &Form) -> Form {
        let d = self.degree + other.degree;
        let mons = monomials(d);
        let field = self.coeffs[0].field();
        let mut coeffs = vec![field.zero(); mons.len()];
        let ma = monomials(self.degree);
        let mb = monomials(other.degree);
        for (ia, ea) in ma.iter().enumerate() {
            if self.coeffs[ia].is_zero() {
                continue;
            }
            for (ib, eb) in mb.iter().enumerate() {
                if other.coeffs[ib].is_zero() {
                    continue;
                }
                let exp = (ea.0 + eb.0, ea.1 + eb.1, ea.2 + eb.2);
                let idx = mons.iter().position(|m| *m == exp).unwrap();
                coeffs[idx] = &coeffs[idx] + &(&self.coeffs[ia] * &other.coeffs[ib]);
            }
        }
        Form { degree: d, coeffs }
    }

    /// Coefficient-wise Frobenius x -> x^q; maps the zero set to its
    /// conjugate curve.
    pub fn frobenius(&self, q: u64) -> Result<Form> {
        Ok(Form {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.frobenius(q))
                .collect::<std::result::Result<_, _>>()?,
        })
    }

    /// Rescale so the first nonzero coefficient (in monomial order) is 1.
    pub fn normalize(&self) -> Result<Form> {
        let lead = self
            .coeffs
            .iter()
            .find(|c| !c.is_zero())
            .ok_or_else(|| PlaneError::Degenerate("zero form".into()))?;
        Ok(self.scale(&lead.inv()?))
    }

    pub fn is_rational(&self, q: u64) -> Result<bool> {
        for c in &self.coeffs {
            if !c.is_rational(q)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn evaluate(&self, p: &PlanePoint) -> FieldElement {
        let field = self.coeffs[0].field();
        let [x, y, z] = p.coords();
        let mut acc = field.zero();
        for ((a, b, c), co) in monomials(self.degree).into_iter().zip(&self.coeffs) {
            if co.is_zero() {
                continue;
            }
            let term = &(&x.pow(a as u64) * &y.pow(b as u64)) * &z.pow(c as u64);
            acc = &acc + &(co * &term);
        }
        acc
    }
}

/// The line through two distinct points.
pub fn line_through(p1: &PlanePoint, p2: &PlanePoint) -> Result<Form> {
    if p1 == p2 {
        return Err(PlaneError::Degenerate("line through equal points".into()));
    }
    let rows = vec![p1.coords().to_vec(), p2.coords().to_vec()];
    let ker = kernel_basis(rows, 3)?;
    assert_eq!(ker.len(), 1);
    Form::from_coeffs(1, ker.into_iter().next().unwrap()).normalize()
}

/// The conic through five points; fails if the five evaluation conditions
/// are dependent (the conic is then not unique).
pub fn conic_through(pts: &[PlanePoint; 5]) -> Result<Form> {
    let mons = monomials(2);
    let rows: Vec<Vec<FieldElement>> = pts
        .iter()
        .map(|p| {
            let [x, y, z] = p.coords();
            mons.iter()
                .map(|&(a, b, c)| &(&x.pow(a as u64) * &y.pow(b as u64)) * &z.pow(c as u64))
                .collect()
        })
        .collect();
    let ker = kernel_basis(rows, 6)?;
    if ker.len() != 1 {
        return Err(PlaneError::Degenerate(
            "five points impose dependent conditions on conics".into(),
        ));
    }
    Form::from_coeffs(2, ker.into_iter().next().unwrap()).normalize()
}

/// The intersection point of two distinct lines.
pub fn intersect_lines(l1: &Form, l2: &Form) -> Result<PlanePoint> {
    assert_eq!((l1.degree(), l2.degree()), (1, 1));
    let rows = vec![l1.coeffs().to_vec(), l2.coeffs().to_vec()];
    let ker = kernel_basis(rows, 3)?;
    if ker.len() != 1 {
        return Err(PlaneError::Degenerate("lines do not meet in a point".into()));
    }
    let v = ker.into_iter().next().unwrap();
    PlanePoint::new([v[0].clone(), v[1].clone(), v[2].clone()])
}

/// The two-point basis of a line's solutions, from the deterministic kernel
/// reduction; entries stay in the field generated by the line coefficients.
pub fn line_point_basis(l: &Form) -> Result<[PlanePoint; 2]> {
    assert_eq!(l.degree(), 1);
    let ker = kernel_basis(vec![l.coeffs().to_vec()], 3)?;
    assert_eq!(ker.len(), 2);
    let mut it = ker.into_iter();
    let a = it.next().unwrap();
    let b = it.next().unwrap();
    Ok([
        PlanePoint::new([a[0].clone(), a[1].clone(), a[2].clone()])?,
        PlanePoint::new([b[0].clone(), b[1].clone(), b[2].clone()])?,
    ])
}

/// True when the three points lie on a common line.
pub fn collinear(a: &PlanePoint, b: &PlanePoint, c: &PlanePoint) -> bool {
    let rows = vec![
        a.coords().to_vec(),
        b.coords().to_vec(),
        c.coords().to_vec(),
    ];
    matrix_rank(&rows) < 3
}

/// Product of the full Frobenius orbit of a form; the result has
/// coefficients in F_q.
pub fn orbit_product(f: &Form, q: u64) -> Result<Form> {
    let f = f.normalize()?;
    let mut prod = f.clone();
    let mut conj = f.frobenius(q)?;
    while conj != f {
        prod = prod.mul(&conj);
        conj = conj.frobenius(q)?;
    }
    if !prod.is_rational(q)? {
        return Err(PlaneError::NotRational);
    }
    prod.normalize()
}

/// Rational basis of the F_q-span of a full conjugate orbit of forms
/// [f, f^sigma, ..., f^(sigma^(m-1))]: the twisted sums
/// sum_i sigma^i(theta^j) f^(sigma^i) for j = 0..m, with theta the canonical
/// generator of the degree-m subfield extension.
pub fn rationalize_span(forms: &[Form], sub: &Subfield) -> Result<Vec<Form>> {
    let q = sub.q();
    let m = forms.len();
    if m == 0 {
        return Ok(vec![]);
    }
    for i in 0..m {
        if forms[(i + 1) % m] != forms[i].frobenius(q)? {
            return Err(PlaneError::NotAnOrbit);
        }
    }
    let theta = sub.canonical_generator(m)?;
    let field = sub.field();
    let mut out = vec![];
    for j in 0..m {
        let mut acc = Form::zero(field, forms[0].degree());
        let mut scalar = theta.pow(j as u64);
        for f in forms {
            acc = acc.add(&f.scale(&scalar));
            scalar = scalar.frobenius(q)?;
        }
        if !acc.is_rational(q)? {
            return Err(PlaneError::NotRational);
        }
        out.push(acc);
    }
    Ok(out)
}

/// One interpolation constraint on curves of a fixed degree.
#[derive(Clone, Debug)]
pub enum PointCondition {
    /// Multiplicity >= m at an honest plane point.
    Ordinary {
        point: PlanePoint,
        multiplicity: usize,
    },
    /// A chain of infinitely-near points: the curve passes through `base`,
    /// and at each step its virtual transform under the blow-up chart
    /// (x, y) -> (x, x y) passes through the point of the exceptional line
    /// with chart coordinate `directions[i]`.  All multiplicities are 1.
    Chain {
        base: PlanePoint,
        directions: Vec<FieldElement>,
    },
}

fn binom_mod(n: usize, k: usize, p: u64) -> u64 {
    // exact small binomial, then reduced
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    ((num / den) % p as u128) as u64
}

/// Local data of a normalized point: the index of the chart coordinate
/// (which equals 1) and the two affine coordinates, in X,Y,Z order.
fn chart(p: &PlanePoint) -> (usize, FieldElement, FieldElement) {
    let lead = p.coords().iter().position(|c| !c.is_zero()).unwrap();
    let others: Vec<_> = (0..3).filter(|&i| i != lead).collect();
    (
        lead,
        p.coords()[others[0]].clone(),
        p.coords()[others[1]].clone(),
    )
}

/// Expansion of the monomial X^a Y^b Z^c around p in its affine chart:
/// coefficients of u^i v^l for all i, l.  Row index order: (i, l).
fn monomial_local_expansion(
    exp: (usize, usize, usize),
    p: &PlanePoint,
) -> BTreeMap<(usize, usize), FieldElement> {
    let field = p.coords()[0].field().clone();
    let (lead, pu, pv) = chart(p);
    let exps = [exp.0, exp.1, exp.2];
    let others: Vec<_> = (0..3).filter(|&i| i != lead).collect();
    let (eu, ev) = (exps[others[0]], exps[others[1]]);
    let pf = field.p();
    let mut out = BTreeMap::new();
    for i in 0..=eu {
        for l in 0..=ev {
            let c = binom_mod(eu, i, pf) * binom_mod(ev, l, pf) % pf;
            if c == 0 {
                continue;
            }
            let val = &(&field.from_int(c as i64) * &pu.pow((eu - i) as u64))
                * &pv.pow((ev - l) as u64);
            if !val.is_zero() {
                out.insert((i, l), val);
            }
        }
    }
    out
}

/// Bivariate polynomial whose coefficients are K-linear forms in the N
/// unknown coefficients of the curve.
type LinPoly = BTreeMap<(usize, usize), Vec<FieldElement>>;

fn linpoly_add_into(dst: &mut LinPoly, key: (usize, usize), idx: usize, val: &FieldElement, n: usize) {
    let field = val.field().clone();
    let row = dst.entry(key).or_insert_with(|| vec![field.zero(); n]);
    row[idx] = &row[idx] + val;
}

fn chain_rows(
    base: &PlanePoint,
    directions: &[FieldElement],
    degree: usize,
) -> Vec<Vec<FieldElement>> {
    let field = base.coords()[0].field().clone();
    let mons = monomials(degree);
    let n = mons.len();
    let zero_row = vec![field.zero(); n];

    // local expansion of the general curve around the base point
    let mut poly: LinPoly = BTreeMap::new();
    for (idx, &exp) in mons.iter().enumerate() {
        for (key, val) in monomial_local_expansion(exp, base) {
            linpoly_add_into(&mut poly, key, idx, &val, n);
        }
    }

    let mut rows = vec![poly.get(&(0, 0)).cloned().unwrap_or_else(|| zero_row.clone())];
    for dir in directions {
        // virtual transform: substitute (x, xy), drop the constant (it is
        // constrained to zero by the previous row), divide by x
        let mut blown: LinPoly = BTreeMap::new();
        for ((i, j), row) in &poly {
            if (*i, *j) == (0, 0) {
                continue;
            }
            let key = (i + j - 1, *j);
            for (idx, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    linpoly_add_into(&mut blown, key, idx, v, n);
                }
            }
        }
        // recenter at the chart point (0, dir): y -> y + dir
        let mut shifted: LinPoly = BTreeMap::new();
        let pf = field.p();
        for ((i, j), row) in &blown {
            for jp in 0..=*j {
                let c = binom_mod(*j, jp, pf);
                if c == 0 {
                    continue;
                }
                let scalar = &field.from_int(c as i64) * &dir.pow((*j - jp) as u64);
                if scalar.is_zero() {
                    continue;
                }
                for (idx, v) in row.iter().enumerate() {
                    if !v.is_zero() {
                        linpoly_add_into(&mut shifted, (*i, jp), idx, &(v * &scalar), n);
                    }
                }
            }
        }
        rows.push(
            shifted
                .get(&(0, 0))
                .cloned()
                .unwrap_or_else(|| zero_row.clone()),
        );
        poly = shifted;
    }
    rows
}

fn ordinary_rows(p: &PlanePoint, mult: usize, degree: usize) -> Vec<Vec<FieldElement>> {
    let field = p.coords()[0].field().clone();
    let mons = monomials(degree);
    let n = mons.len();
    let mut by_key: BTreeMap<(usize, usize), Vec<FieldElement>> = BTreeMap::new();
    for i in 0..mult {
        for l in 0..mult - i {
            by_key.insert((i, l), vec![field.zero(); n]);
        }
    }
    for (idx, &exp) in mons.iter().enumerate() {
        for ((i, l), val) in monomial_local_expansion(exp, p) {
            if i + l < mult {
                let row = by_key.get_mut(&(i, l)).unwrap();
                row[idx] = &row[idx] + &val;
            }
        }
    }
    by_key.into_values().collect()
}

/// Row-reduce over the field and return a deterministic kernel basis:
/// one vector per non-pivot column, in column order, with free coord = 1.
fn kernel_basis(mut rows: Vec<Vec<FieldElement>>, ncols: usize) -> Result<Vec<Vec<FieldElement>>> {
    let field = rows
        .first()
        .and_then(|r| r.first())
        .expect("kernel_basis needs at least one row")
        .field()
        .clone();
    rows.retain(|r| r.iter().any(|c| !c.is_zero()));
    if rows.is_empty() {
        // kernel is everything
        let mut out = vec![];
        for j in 0..ncols {
            let mut v = vec![field.zero(); ncols];
            v[j] = field.one();
            out.push(v);
        }
        return Ok(out);
    }
    let mut pivots: Vec<usize> = vec![];
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, pr);
        let inv = rows[r][c].inv()?;
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let sub = &f * &rows[r][j];
                    rows[i][j] = &rows[i][j] - &sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let mut basis = vec![];
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![field.zero(); ncols];
        v[free] = field.one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -&rows[row][free];
        }
        basis.push(v);
    }
    Ok(basis)
}

/// Rank of a matrix over the field.
pub fn matrix_rank(rows: &[Vec<FieldElement>]) -> usize {
    let mut rows: Vec<Vec<FieldElement>> = rows
        .iter()
        .filter(|r| r.iter().any(|c| !c.is_zero()))
        .cloned()
        .collect();
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(pr) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, pr);
        let inv = rows[rank][c].inv().unwrap();
        for x in rows[rank].iter_mut() {
            *x = &*x * &inv;
        }
        for i in rank + 1..rows.len() {
            if !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let sub = &f * &rows[rank][j];
                    rows[i][j] = &rows[i][j] - &sub;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Basis over F_q of the forms of the given degree satisfying all the
/// conditions.  The condition set must be Galois-stable over F_q; the basis
/// is the deterministic reduced kernel under the fixed monomial order.
pub fn linear_system(
    sub: &Subfield,
    degree: usize,
    conditions: &[PointCondition],
) -> Result<Vec<Form>> {
    let field = sub.field();
    let n = monomials(degree).len();
    let mut rows_k: Vec<Vec<FieldElement>> = vec![];
    for cond in conditions {
        match cond {
            PointCondition::Ordinary {
                point,
                multiplicity,
            } => rows_k.extend(ordinary_rows(point, *multiplicity, degree)),
            PointCondition::Chain { base, directions } => {
                rows_k.extend(chain_rows(base, directions, degree))
            }
        }
    }
    // impose rationality: split every K-row into [K : F_q] rows over F_q
    let mut rows_q: Vec<Vec<FieldElement>> = vec![];
    for row in rows_k {
        let m = sub.codegree();
        let mut split = vec![vec![field.zero(); n]; m];
        for (j, entry) in row.iter().enumerate() {
            for (l, c) in sub.decompose(entry).into_iter().enumerate() {
                split[l][j] = c;
            }
        }
        rows_q.extend(split);
    }
    if rows_q.is_empty() {
        // no conditions: full space of forms
        let mut out = vec![];
        for j in 0..n {
            let mut v = vec![field.zero(); n];
            v[j] = field.one();
            out.push(Form::from_coeffs(degree, v));
        }
        return Ok(out);
    }
    let basis = kernel_basis(rows_q, n)?;
    let forms: Vec<Form> = basis
        .into_iter()
        .map(|v| Form::from_coeffs(degree, v))
        .collect();
    for f in &forms {
        if !f.is_rational(sub.q())? {
            return Err(PlaneError::NotRational);
        }
    }
    Ok(forms)
}

/// First chart coordinate on the exceptional line of the blow-up at `base`
/// cut out by the given line through `base`; errors when the tangent
/// direction lies at infinity of the chart.
pub fn chain_direction(base: &PlanePoint, tangent: &Form) -> Result<FieldElement> {
    assert_eq!(tangent.degree(), 1);
    if !tangent.evaluate(base).is_zero() {
        return Err(PlaneError::Degenerate(
            "tangent line does not pass through the base point".into(),
        ));
    }
    // linear part of the dehomogenized, translated line: A u + B v
    let (lead, _, _) = chart(base);
    let others: Vec<usize> = (0..3).filter(|&i| i != lead).collect();
    let coeff_of = |axis: usize| -> FieldElement {
        let mut e = [0usize; 3];
        e[axis] = 1;
        tangent.coeff((e[0], e[1], e[2])).clone()
    };
    // translating does not change degree-1 coefficients of the affine vars
    let a = coeff_of(others[0]);
    let b = coeff_of(others[1]);
    if b.is_zero() {
        return Err(PlaneError::Unsupported(
            "tangent direction at infinity of the first blow-up chart".into(),
        ));
    }
    Ok(-&(&a * &b.inv()?))
}

/// All F_q-rational points lying on the form, in enumeration order.
pub fn rational_points_on(sub: &Subfield, f: &Form) -> Vec<PlanePoint> {
    enumerate_points(sub)
        .into_iter()
        .filter(|p| f.evaluate(p).is_zero())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(p: u64, e: usize, q: u64) -> (Arc<FiniteField>, Subfield) {
        let f = FiniteField::new(p, e).unwrap();
        let sub = Subfield::new(&f, q).unwrap();
        (f, sub)
    }

    #[test]
    fn point_count_is_q2_plus_q_plus_1() {
        for (p, e, q) in [(2, 2, 2), (3, 1, 3), (2, 4, 4), (5, 2, 5), (3, 2, 9)] {
            let (_, sub) = setup(p, e, q);
            let pts = enumerate_points(&sub);
            assert_eq!(pts.len() as u64, q * q + q + 1);
            // all distinct, all rational
            let set: std::collections::HashSet<_> = pts.iter().cloned().collect();
            assert_eq!(set.len(), pts.len());
            for pt in &pts {
                assert!(pt.is_rational(q).unwrap());
            }
        }
    }

    #[test]
    fn galois_orbit_sizes() {
        let (f, sub) = setup(2, 6, 2);
        let zeta = sub.canonical_generator(3).unwrap();
        let p = PlanePoint::new([zeta.clone(), f.zero(), f.one()]).unwrap();
        let orbit = p.galois_orbit(2).unwrap();
        assert_eq!(orbit.len(), 3);
        assert_eq!(p.degree(2).unwrap(), 3);
        // conjugates are collinear on Y = 0
        for c in &orbit {
            assert!(c.coords()[1].is_zero());
        }
        let g6 = sub.canonical_generator(6).unwrap();
        let p6 = PlanePoint::new([g6, f.zero(), f.one()]).unwrap();
        assert_eq!(p6.degree(2).unwrap(), 6);
    }

    #[test]
    fn line_and_conic_through_points() {
        let (f, sub) = setup(5, 1, 5);
        let pt = |x: i64, y: i64, z: i64| {
            PlanePoint::new([f.from_int(x), f.from_int(y), f.from_int(z)]).unwrap()
        };
        let l = line_through(&pt(1, 0, 0), &pt(0, 1, 0)).unwrap();
        assert!(l.evaluate(&pt(1, 0, 0)).is_zero());
        assert!(l.evaluate(&pt(1, 1, 0)).is_zero());
        assert!(!l.evaluate(&pt(0, 0, 1)).is_zero());
        assert!(line_through(&pt(1, 0, 0), &pt(1, 0, 0)).is_err());

        // five points on the standard conic Y^2 = XZ: (t^2, t, 1)
        let five = [pt(0, 0, 1), pt(1, 1, 1), pt(4, 2, 1), pt(4, 3, 1), pt(1, 4, 1)];
        let q2 = conic_through(&five).unwrap();
        for t in 0..5 {
            assert!(q2.evaluate(&pt(t * t, t, 1)).is_zero());
        }
        assert!(q2.evaluate(&pt(1, 0, 0)).is_zero()); // the point at infinity
        let _ = sub;
    }

    #[test]
    fn conic_through_degenerate_set() {
        let (f, _) = setup(5, 1, 5);
        let pt = |x: i64, y: i64, z: i64| {
            PlanePoint::new([f.from_int(x), f.from_int(y), f.from_int(z)]).unwrap()
        };
        // four collinear points (plus one off): conditions become dependent
        let bad = [pt(0, 0, 1), pt(1, 0, 1), pt(2, 0, 1), pt(3, 0, 1), pt(0, 1, 0)];
        assert!(conic_through(&bad).is_err());
    }

    #[test]
    fn orbit_product_matches_trace_norm_expansion() {
        // product of conjugate lines X - z(Y+Z), X - z^q(Y+Z) equals
        // X^2 - tr(z) X(Y+Z) + N(z) (Y+Z)^2
        for q in [2u64, 3, 4, 5] {
            let (p, e) = match q {
                4 => (2, 4),
                _ => (q, 2),
            };
            let (f, sub) = setup(p, e, q);
            let zeta = sub.canonical_generator(2).unwrap();
            let one = f.one();
            let line = Form::from_terms(
                &f,
                1,
                &[
                    ((1, 0, 0), one.clone()),
                    ((0, 1, 0), -&zeta),
                    ((0, 0, 1), -&zeta),
                ],
            );
            let prod = orbit_product(&line, q).unwrap();
            let (tr, nm) = zeta.trace_norm(q).unwrap();
            let ypz = Form::from_terms(&f, 1, &[((0, 1, 0), one.clone()), ((0, 0, 1), one.clone())]);
            let x = Form::from_terms(&f, 1, &[((1, 0, 0), one.clone())]);
            let expected = x
                .mul(&x)
                .add(&x.mul(&ypz).scale(&-&tr))
                .add(&ypz.mul(&ypz).scale(&nm));
            assert_eq!(prod, expected.normalize().unwrap());
            assert!(prod.is_rational(q).unwrap());
        }
    }

    #[test]
    fn rationalize_span_gives_rational_basis_of_same_rank() {
        let (f, sub) = setup(2, 3, 2);
        let zeta = sub.canonical_generator(3).unwrap();
        let line = Form::from_terms(
            &f,
            1,
            &[
                ((1, 0, 0), f.one()),
                ((0, 1, 0), zeta.clone()),
                ((0, 0, 1), &zeta * &zeta),
            ],
        );
        let orbit: Vec<Form> = {
            let mut v = vec![line.clone()];
            for _ in 0..2 {
                v.push(v.last().unwrap().frobenius(2).unwrap());
            }
            v
        };
        let rat = rationalize_span(&orbit, &sub).unwrap();
        assert_eq!(rat.len(), 3);
        for r in &rat {
            assert!(r.is_rational(2).unwrap());
        }
        // the rational forms span the same space as the orbit
        let to_rows = |fs: &[Form]| fs.iter().map(|f| f.coeffs().to_vec()).collect::<Vec<_>>();
        let orbit_rank = matrix_rank(&to_rows(&orbit));
        let mut all = to_rows(&orbit);
        all.extend(to_rows(&rat));
        assert_eq!(matrix_rank(&to_rows(&rat)), orbit_rank);
        assert_eq!(matrix_rank(&all), orbit_rank);
        assert_eq!(orbit_rank, 3);
        // not an orbit: wrong order
        let bad = vec![orbit[0].clone(), orbit[2].clone(), orbit[1].clone()];
        assert!(rationalize_span(&bad, &sub).is_err());
    }

    #[test]
    fn linear_system_three_conjugate_collinear_points_has_dim_7() {
        for q in [3u64, 4, 5] {
            let (p, e) = if q == 4 { (2, 6) } else { (q, 3) };
            let (f, sub) = setup(p, e, q);
            let zeta = sub.canonical_generator(3).unwrap();
            let base = PlanePoint::new([zeta, f.zero(), f.one()]).unwrap();
            let conds: Vec<PointCondition> = base
                .galois_orbit(q)
                .unwrap()
                .into_iter()
                .map(|point| PointCondition::Ordinary {
                    point,
                    multiplicity: 1,
                })
                .collect();
            let sys = linear_system(&sub, 3, &conds).unwrap();
            assert_eq!(sys.len(), 7);
            for s in &sys {
                for c in &conds {
                    if let PointCondition::Ordinary { point, .. } = c {
                        assert!(s.evaluate(point).is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn linear_system_double_point_kills_partials_in_char_2() {
        // multiplicity 2 at a rational point over F_2: conics through it
        // doubly are exactly the doubled lines avoided... dimension check:
        // deg-2 forms with mult >= 2 at (0:0:1) = span{X^2, XY, Y^2}: dim 3
        let (f, sub) = setup(2, 1, 2);
        let p = PlanePoint::new([f.zero(), f.zero(), f.one()]).unwrap();
        let sys = linear_system(
            &sub,
            2,
            &[PointCondition::Ordinary {
                point: p,
                multiplicity: 2,
            }],
        )
        .unwrap();
        assert_eq!(sys.len(), 3);
        for s in &sys {
            assert!(s.coeff((0, 0, 2)).is_zero());
            assert!(s.coeff((1, 0, 1)).is_zero());
            assert!(s.coeff((0, 1, 1)).is_zero());
        }
    }

    #[test]
    fn chain_conditions_match_hand_computation() {
        // cubics through (0:0:1) whose strict transform meets the
        // exceptional line at direction 0 twice more: this forces, in the
        // affine chart (x, y) = (X/Z, Y/Z), the conditions
        // a00 = 0, a10 = 0, a20 = 0 (coefficients of 1, x, x^2).
        let (f, sub) = setup(3, 1, 3);
        let base = PlanePoint::new([f.zero(), f.zero(), f.one()]).unwrap();
        let sys = linear_system(
            &sub,
            3,
            &[PointCondition::Chain {
                base,
                directions: vec![f.zero(), f.zero()],
            }],
        )
        .unwrap();
        assert_eq!(sys.len(), 7);
        for s in &sys {
            assert!(s.coeff((0, 0, 3)).is_zero()); // 1
            assert!(s.coeff((1, 0, 2)).is_zero()); // x
            assert!(s.coeff((2, 0, 1)).is_zero()); // x^2
        }
    }

    #[test]
    fn chain_direction_from_tangent_line() {
        let (f, _) = setup(5, 1, 5);
        let base = PlanePoint::new([f.zero(), f.zero(), f.one()]).unwrap();
        // line Y = 2X passes through base; in chart (x, y) its direction is 2
        let l = Form::from_terms(
            &f,
            1,
            &[((1, 0, 0), f.from_int(-2)), ((0, 1, 0), f.one())],
        );
        assert_eq!(chain_direction(&base, &l).unwrap(), f.from_int(2));
        // X = 0 has direction at infinity of the chart
        let x = Form::from_terms(&f, 1, &[((1, 0, 0), f.one())]);
        assert!(chain_direction(&base, &x).is_err());
    }
}
