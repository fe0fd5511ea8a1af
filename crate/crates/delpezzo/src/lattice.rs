//! Exact integer-lattice computations: Smith normal form with unimodular
//! transforms, saturations, orthogonal complements under the hyperbolic
//! intersection form diag(1, -1, ..., -1), and the divisor class-group
//! reports (Cartier rank, Weil quotient invariants, embedding factors)
//! attached to each surface family.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("integer overflow in lattice computation")]
    Overflow,
    #[error("vector does not lie in the given subgroup")]
    NotASubgroup,
    #[error("descriptor validation failed: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

type Result<T> = std::result::Result<T, LatticeError>;

fn ck_add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or(LatticeError::Overflow)
}
fn ck_mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or(LatticeError::Overflow)
}

/// Dense integer matrix, row major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    a: Vec<i64>,
}

impl std::fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.a[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix {
            rows,
            cols,
            a: vec![0; rows * cols],
        }
    }
    pub fn identity(n: usize) -> IntMatrix {
        let mut m = IntMatrix::zero(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }
    pub fn from_rows(rows: Vec<Vec<i64>>) -> IntMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        IntMatrix {
            rows: r,
            cols: c,
            a: rows.into_iter().flatten().collect(),
        }
    }
    /// diag(1, -1, ..., -1): the intersection form of a blown-up plane.
    pub fn hyperbolic_form(n: usize) -> IntMatrix {
        let mut g = IntMatrix::zero(n, n);
        g[(0, 0)] = 1;
        for i in 1..n {
            g[(i, i)] = -1;
        }
        g
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }
    pub fn row_vecs(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(LatticeError::Dimension(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // accumulate in i128 so only the final entries need to fit i64
        let mut acc = vec![0i128; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let x = self[(i, k)] as i128;
                if x == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let cell = &mut acc[i * other.cols + j];
                    *cell = x
                        .checked_mul(other[(k, j)] as i128)
                        .and_then(|p| cell.checked_add(p))
                        .ok_or(LatticeError::Overflow)?;
                }
            }
        }
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                out[(i, j)] = i64::try_from(acc[i * other.cols + j])
                    .map_err(|_| LatticeError::Overflow)?;
            }
        }
        Ok(out)
    }

    /// Product of three matrices, accumulating the intermediate product in
    /// i128: only the final entries must fit i64. Needed for round-trip
    /// checks like U*A*V where the two-matrix partial products can exceed
    /// i64 even though the triple product is small.
    pub fn mul3(&self, b: &IntMatrix, c: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != b.rows || b.cols != c.rows {
            return Err(LatticeError::Dimension(format!(
                "{}x{} * {}x{} * {}x{}",
                self.rows, self.cols, b.rows, b.cols, c.rows, c.cols
            )));
        }
        let mut bc = vec![0i128; b.rows * c.cols];
        for i in 0..b.rows {
            for k in 0..b.cols {
                let x = b[(i, k)] as i128;
                if x == 0 {
                    continue;
                }
                for j in 0..c.cols {
                    let cell = &mut bc[i * c.cols + j];
                    *cell = x
                        .checked_mul(c[(k, j)] as i128)
                        .and_then(|p| cell.checked_add(p))
                        .ok_or(LatticeError::Overflow)?;
                }
            }
        }
        let mut out = IntMatrix::zero(self.rows, c.cols);
        for i in 0..self.rows {
            for j in 0..c.cols {
                let mut acc: i128 = 0;
                for k in 0..self.cols {
                    acc = (self[(i, k)] as i128)
                        .checked_mul(bc[k * c.cols + j])
                        .and_then(|p| acc.checked_add(p))
                        .ok_or(LatticeError::Overflow)?;
                }
                out[(i, j)] = i64::try_from(acc).map_err(|_| LatticeError::Overflow)?;
            }
        }
        Ok(out)
    }

    /// Horizontal concatenation.
    pub fn hcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = IntMatrix::zero(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                out[(i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    /// Vertical concatenation.
    pub fn vcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols);
        let mut rows = self.row_vecs();
        rows.extend(other.row_vecs());
        IntMatrix::from_rows(rows)
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&x| x == 0)
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.a[i * self.cols + j]
    }
}
impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.a[i * self.cols + j]
    }
}

/// U * A * V = D with U, V unimodular and D diagonal with a divisibility
/// chain d_1 | d_2 | ... | d_r, d_i > 0.
pub struct SmithForm {
    pub u: IntMatrix,
    /// inverse of u, maintained through every elementary operation
    pub uinv: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    /// inverse of v, maintained through every elementary operation
    pub vinv: IntMatrix,
    pub rank: usize,
}

impl SmithForm {
    pub fn invariant_factors(&self) -> Vec<i64> {
        (0..self.rank).map(|i| self.d[(i, i)]).collect()
    }
}

/// Working matrix for the SNF reduction: i128 entries so intermediate
/// growth on small inputs never overflows; converted back to i64 at the end.
struct Work {
    rows: usize,
    cols: usize,
    a: Vec<i128>,
}

impl Work {
    fn from(m: &IntMatrix) -> Work {
        Work {
            rows: m.rows,
            cols: m.cols,
            a: m.a.iter().map(|&x| x as i128).collect(),
        }
    }
    fn identity(n: usize) -> Work {
        let mut a = vec![0i128; n * n];
        for i in 0..n {
            a[i * n + i] = 1;
        }
        Work { rows: n, cols: n, a }
    }
    fn get(&self, i: usize, j: usize) -> i128 {
        self.a[i * self.cols + j]
    }
    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            for c in 0..self.cols {
                self.a.swap(i * self.cols + c, j * self.cols + c);
            }
        }
    }
    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in 0..self.rows {
                self.a.swap(r * self.cols + i, r * self.cols + j);
            }
        }
    }
    fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            self.a[i * self.cols + c] = -self.a[i * self.cols + c];
        }
    }
    fn negate_col(&mut self, j: usize) {
        for r in 0..self.rows {
            self.a[r * self.cols + j] = -self.a[r * self.cols + j];
        }
    }
    /// row_i += f * row_j; leaves the matrix unchanged on overflow
    fn add_row(&mut self, i: usize, j: usize, f: i128) -> Result<()> {
        let mut tmp = Vec::with_capacity(self.cols);
        for c in 0..self.cols {
            let t = f
                .checked_mul(self.get(j, c))
                .and_then(|x| x.checked_add(self.get(i, c)))
                .ok_or(LatticeError::Overflow)?;
            tmp.push(t);
        }
        self.a[i * self.cols..(i + 1) * self.cols].copy_from_slice(&tmp);
        Ok(())
    }
    /// col_i += f * col_j; leaves the matrix unchanged on overflow
    fn add_col(&mut self, i: usize, j: usize, f: i128) -> Result<()> {
        let mut tmp = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let t = f
                .checked_mul(self.get(r, j))
                .and_then(|x| x.checked_add(self.get(r, i)))
                .ok_or(LatticeError::Overflow)?;
            tmp.push(t);
        }
        for (r, t) in tmp.into_iter().enumerate() {
            self.a[r * self.cols + i] = t;
        }
        Ok(())
    }
    fn row_norm_sq(&self, i: usize) -> f64 {
        (0..self.cols).map(|c| (self.get(i, c) as f64).powi(2)).sum()
    }
    fn col_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).map(|r| (self.get(r, j) as f64).powi(2)).sum()
    }
    fn norm_sq(&self) -> f64 {
        self.a.iter().map(|&x| (x as f64).powi(2)).sum()
    }
    fn into_int(self) -> Result<IntMatrix> {
        let mut out = IntMatrix::zero(self.rows, self.cols);
        for (dst, &src) in out.a.iter_mut().zip(&self.a) {
            *dst = i64::try_from(src).map_err(|_| LatticeError::Overflow)?;
        }
        Ok(out)
    }
}

/// Division rounded to nearest, so the remainder satisfies |r| <= |b|/2;
/// keeps elimination entries small.
fn div_round(a: i128, b: i128) -> i128 {
    let q = a / b;
    let r = a - q * b;
    if 2 * r.abs() > b.abs() {
        q + if (r < 0) == (b < 0) { 1 } else { -1 }
    } else {
        q
    }
}

/// Full reduction state: the working matrix plus both transforms and their
/// exact inverses, all updated in lock-step by every elementary operation.
struct SnfState {
    a: Work,
    u: Work,
    uinv: Work,
    v: Work,
    vinv: Work,
}

impl SnfState {
    fn new(a0: &IntMatrix) -> SnfState {
        SnfState {
            a: Work::from(a0),
            u: Work::identity(a0.rows),
            uinv: Work::identity(a0.rows),
            v: Work::identity(a0.cols),
            vinv: Work::identity(a0.cols),
        }
    }

    /// row_i += f * row_j on A and U, mirrored into U^-1.
    fn add_row(&mut self, i: usize, j: usize, f: i128) -> Result<()> {
        self.a.add_row(i, j, f)?;
        self.u.add_row(i, j, f)?;
        self.uinv.add_col(j, i, -f)
    }
    /// col_j += f * col_k on A and V, mirrored into V^-1.
    fn add_col(&mut self, j: usize, k: usize, f: i128) -> Result<()> {
        self.a.add_col(j, k, f)?;
        self.v.add_col(j, k, f)?;
        self.vinv.add_row(k, j, -f)
    }
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap_rows(i, j);
        self.u.swap_rows(i, j);
        self.uinv.swap_cols(i, j);
    }
    fn swap_cols(&mut self, i: usize, j: usize) {
        self.a.swap_cols(i, j);
        self.v.swap_cols(i, j);
        self.vinv.swap_rows(i, j);
    }
    fn negate_row(&mut self, i: usize) {
        self.a.negate_row(i);
        self.u.negate_row(i);
        self.uinv.negate_col(i);
    }
    fn negate_col(&mut self, j: usize) {
        self.a.negate_col(j);
        self.v.negate_col(j);
        self.vinv.negate_row(j);
    }

    fn is_diagonal(&self) -> bool {
        (0..self.a.rows)
            .all(|i| (0..self.a.cols).all(|j| i == j || self.a.get(i, j) == 0))
    }

    /// One row-Hermite pass: bring A to row echelon form with positive
    /// pivots and the entries above each pivot reduced to nearest.
    fn row_pass(&mut self) -> Result<()> {
        let (m, n) = (self.a.rows, self.a.cols);
        let mut r = 0;
        for col in 0..n {
            if r >= m {
                break;
            }
            loop {
                let mut best: Option<usize> = None;
                for i in r..m {
                    if self.a.get(i, col) != 0
                        && best.map_or(true, |b| self.a.get(i, col).abs() < self.a.get(b, col).abs())
                    {
                        best = Some(i);
                    }
                }
                let Some(b) = best else { break };
                self.swap_rows(r, b);
                let mut done = true;
                for i in r + 1..m {
                    if self.a.get(i, col) != 0 {
                        let f = div_round(self.a.get(i, col), self.a.get(r, col));
                        self.add_row(i, r, -f)?;
                        if self.a.get(i, col) != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    break;
                }
            }
            if self.a.get(r, col) != 0 {
                if self.a.get(r, col) < 0 {
                    self.negate_row(r);
                }
                let p = self.a.get(r, col);
                for i in 0..r {
                    let f = div_round(self.a.get(i, col), p);
                    if f != 0 {
                        self.add_row(i, r, -f)?;
                    }
                }
                r += 1;
            }
        }
        Ok(())
    }

    /// Column-Hermite pass, the transpose of `row_pass`.
    fn col_pass(&mut self) -> Result<()> {
        let (m, n) = (self.a.rows, self.a.cols);
        let mut c = 0;
        for row in 0..m {
            if c >= n {
                break;
            }
            loop {
                let mut best: Option<usize> = None;
                for j in c..n {
                    if self.a.get(row, j) != 0
                        && best.map_or(true, |b| self.a.get(row, j).abs() < self.a.get(row, b).abs())
                    {
                        best = Some(j);
                    }
                }
                let Some(b) = best else { break };
                self.swap_cols(c, b);
                let mut done = true;
                for j in c + 1..n {
                    if self.a.get(row, j) != 0 {
                        let f = div_round(self.a.get(row, j), self.a.get(row, c));
                        self.add_col(j, c, -f)?;
                        if self.a.get(row, j) != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    break;
                }
            }
            if self.a.get(row, c) != 0 {
                if self.a.get(row, c) < 0 {
                    self.negate_col(c);
                }
                let p = self.a.get(row, c);
                for j in 0..c {
                    let f = div_round(self.a.get(row, j), p);
                    if f != 0 {
                        self.add_col(j, c, -f)?;
                    }
                }
                c += 1;
            }
        }
        Ok(())
    }

    /// Alternate row/column Hermite passes until A is diagonal. The pivot
    /// gcds divide strictly at each alternation, so this converges (two or
    /// three passes in practice); the cap turns a cycle into an error.
    fn diagonalize(&mut self) -> Result<()> {
        let mut passes = 0;
        while !self.is_diagonal() {
            passes += 1;
            if passes > 64 {
                return Err(LatticeError::Overflow);
            }
            self.row_pass()?;
            if self.is_diagonal() {
                break;
            }
            self.col_pass()?;
        }
        Ok(())
    }

    /// Move the nonzero diagonal entries to the front, make them positive,
    /// and sort them ascending. Returns the rank.
    fn compact_and_sort(&mut self) -> usize {
        let k = self.a.rows.min(self.a.cols);
        let mut rank = 0;
        for i in 0..k {
            if self.a.get(i, i) != 0 {
                if i != rank {
                    self.swap_rows(i, rank);
                    self.swap_cols(i, rank);
                }
                rank += 1;
            }
        }
        for i in 0..rank {
            if self.a.get(i, i) < 0 {
                self.negate_row(i);
            }
        }
        for i in 0..rank {
            for j in i + 1..rank {
                if self.a.get(j, j) < self.a.get(i, i) {
                    self.swap_rows(i, j);
                    self.swap_cols(i, j);
                }
            }
        }
        rank
    }

    /// Final gcd-fixing pass: for each out-of-order pair replace
    /// diag(d_i, d_j) by diag(gcd, lcm) via a local 2x2 reduction.
    fn enforce_divisibility(&mut self, rank: usize) -> Result<()> {
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..rank {
                for j in i + 1..rank {
                    if self.a.get(j, j) % self.a.get(i, i) == 0 {
                        continue;
                    }
                    changed = true;
                    self.add_row(i, j, 1)?;
                    while self.a.get(i, j) != 0 || self.a.get(j, i) != 0 {
                        // smallest of the four block entries becomes the pivot
                        let mut best = (i, i);
                        for r in [i, j] {
                            for c in [i, j] {
                                let x = self.a.get(r, c);
                                if x != 0
                                    && (self.a.get(best.0, best.1) == 0
                                        || x.abs() < self.a.get(best.0, best.1).abs())
                                {
                                    best = (r, c);
                                }
                            }
                        }
                        if best.0 != i {
                            self.swap_rows(i, j);
                        }
                        if best.1 != i {
                            self.swap_cols(i, j);
                        }
                        let p = self.a.get(i, i);
                        if self.a.get(j, i) != 0 {
                            let f = div_round(self.a.get(j, i), p);
                            self.add_row(j, i, -f)?;
                        }
                        if self.a.get(i, j) != 0 {
                            let f = div_round(self.a.get(i, j), p);
                            self.add_col(j, i, -f)?;
                        }
                    }
                    if self.a.get(i, i) < 0 {
                        self.negate_row(i);
                    }
                    if self.a.get(j, j) < 0 {
                        self.negate_row(j);
                    }
                }
            }
        }
        Ok(())
    }

    /// Size-reduce the transforms while keeping U*A*V = D exact. With D
    /// diagonal, "row_i += c * row_j of U" can be compensated inside V
    /// whenever d_i | c * d_j, so the transforms retain a lattice of valid
    /// moves; greedy nearest-integer sweeps over that lattice shrink the
    /// entries that elimination inflated. Moves are only kept when they
    /// lower the combined size of all four transform matrices.
    fn reduce_transforms(&mut self) {
        let k = self.a.rows.min(self.a.cols);
        let d: Vec<i128> = (0..k.max(self.a.rows).max(self.a.cols))
            .map(|i| if i < k { self.a.get(i, i) } else { 0 })
            .collect();
        let mut cur = self.transform_cost();
        for _ in 0..64 {
            let mut improved = false;
            let m = self.a.rows;
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let nj = self.u.row_norm_sq(j);
                    if nj == 0.0 {
                        continue;
                    }
                    let dot: f64 = (0..m)
                        .map(|t| self.u.get(i, t) as f64 * self.u.get(j, t) as f64)
                        .sum();
                    for c in snapped_candidates(-dot / nj, d[i], d[j]) {
                        if self.try_row_move(i, j, c, &d, &mut cur) {
                            improved = true;
                            break;
                        }
                    }
                }
            }
            let n = self.a.cols;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let nj = self.v.col_norm_sq(j);
                    if nj == 0.0 {
                        continue;
                    }
                    let dot: f64 = (0..n)
                        .map(|t| self.v.get(t, i) as f64 * self.v.get(t, j) as f64)
                        .sum();
                    for c in snapped_candidates(-dot / nj, d[i], d[j]) {
                        if self.try_col_move(i, j, c, &d, &mut cur) {
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    fn transform_cost(&self) -> f64 {
        self.u.norm_sq() + self.uinv.norm_sq() + self.v.norm_sq() + self.vinv.norm_sq()
    }

    /// U row_i += c * U row_j with the compensating column move in V;
    /// keeps the move only if the combined transform size drops.
    fn try_row_move(&mut self, i: usize, j: usize, c: i128, d: &[i128], cur: &mut f64) -> bool {
        let Some(f) = compensation(c, d[i], d[j]) else {
            return false;
        };
        if self.apply_row_move(i, j, c, f).is_err() {
            return false;
        }
        let next = self.transform_cost();
        if next < *cur {
            *cur = next;
            true
        } else {
            self.apply_row_move(i, j, -c, -f)
                .expect("reverting a move that just succeeded");
            false
        }
    }

    fn apply_row_move(&mut self, i: usize, j: usize, c: i128, f: i128) -> Result<()> {
        self.u.add_row(i, j, c)?;
        if let Err(e) = self.uinv.add_col(j, i, -c) {
            self.u.add_row(i, j, -c).expect("revert");
            return Err(e);
        }
        if f != 0 {
            if let Err(e) = self.v.add_col(j, i, f) {
                self.u.add_row(i, j, -c).expect("revert");
                self.uinv.add_col(j, i, c).expect("revert");
                return Err(e);
            }
            if let Err(e) = self.vinv.add_row(i, j, -f) {
                self.u.add_row(i, j, -c).expect("revert");
                self.uinv.add_col(j, i, c).expect("revert");
                self.v.add_col(j, i, -f).expect("revert");
                return Err(e);
            }
        }
        Ok(())
    }

    /// V col_i += c * V col_j with the compensating row move in U.
    fn try_col_move(&mut self, i: usize, j: usize, c: i128, d: &[i128], cur: &mut f64) -> bool {
        let Some(g) = compensation(c, d[i], d[j]) else {
            return false;
        };
        if self.apply_col_move(i, j, c, g).is_err() {
            return false;
        }
        let next = self.transform_cost();
        if next < *cur {
            *cur = next;
            true
        } else {
            self.apply_col_move(i, j, -c, -g)
                .expect("reverting a move that just succeeded");
            false
        }
    }

    fn apply_col_move(&mut self, i: usize, j: usize, c: i128, g: i128) -> Result<()> {
        self.v.add_col(i, j, c)?;
        if let Err(e) = self.vinv.add_row(j, i, -c) {
            self.v.add_col(i, j, -c).expect("revert");
            return Err(e);
        }
        if g != 0 {
            if let Err(e) = self.u.add_row(j, i, g) {
                self.v.add_col(i, j, -c).expect("revert");
                self.vinv.add_row(j, i, c).expect("revert");
                return Err(e);
            }
            if let Err(e) = self.uinv.add_col(i, j, -g) {
                self.v.add_col(i, j, -c).expect("revert");
                self.vinv.add_row(j, i, c).expect("revert");
                self.u.add_row(j, i, -g).expect("revert");
                return Err(e);
            }
        }
        Ok(())
    }
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Compensating multiplier for a transform move: adding c * (index j) to
/// (index i) perturbs D by c*d_j at position (i, j), which a single
/// mirrored move cancels exactly when d_i divides c*d_j.
fn compensation(c: i128, di: i128, dj: i128) -> Option<i128> {
    if c == 0 {
        return None;
    }
    if di == 0 {
        // a kernel row/column may only absorb other kernel rows/columns
        return if dj == 0 { Some(0) } else { None };
    }
    if dj == 0 {
        return Some(0);
    }
    let p = c.checked_mul(dj)?;
    if p % di == 0 {
        Some(-(p / di))
    } else {
        None
    }
}

/// Nearest-integer move sizes around the real Lagrange coefficient, snapped
/// to the granularity d_i / gcd(d_i, d_j) that validity requires.
fn snapped_candidates(c0: f64, di: i128, dj: i128) -> Vec<i128> {
    if !c0.is_finite() || c0.abs() > 1e30 {
        return vec![];
    }
    let base = c0.round() as i128;
    let mut out = vec![];
    for c in [base, base - 1, base + 1] {
        if c == 0 {
            continue;
        }
        let snapped = if di > 0 && dj != 0 {
            let g = di / gcd_i128(di, dj);
            div_round(c, g) * g
        } else {
            c
        };
        if snapped != 0 && !out.contains(&snapped) {
            out.push(snapped);
        }
    }
    out
}

pub fn smith_normal_form(a0: &IntMatrix) -> Result<SmithForm> {
    let mut st = SnfState::new(a0);
    st.diagonalize()?;
    let rank = st.compact_and_sort();
    st.enforce_divisibility(rank)?;
    st.reduce_transforms();
    Ok(SmithForm {
        u: st.u.into_int()?,
        uinv: st.uinv.into_int()?,
        d: st.a.into_int()?,
        v: st.v.into_int()?,
        vinv: st.vinv.into_int()?,
        rank,
    })
}

/// Basis of {x in Z^rows(A) : x A = 0}; the result is a saturated sublattice.
/// LLL-reduce the rows of a full-rank generator matrix: same row lattice,
/// short nearly-orthogonal basis. Elimination can hand back generator
/// matrices with entries far larger than the lattice warrants (an echelon
/// basis of a skew hyperplane lattice is a classic example), and the
/// reduced basis is what downstream computations can safely multiply.
/// Row operations are exact; Gram-Schmidt runs in f64, so the output is
/// approximately reduced, which is all that is needed here.
fn lll_rows(m: &IntMatrix) -> Result<IntMatrix> {
    let n = m.rows;
    if n < 2 {
        return Ok(m.clone());
    }
    let mut b = Work::from(m);
    let dot = |b: &Work, i: usize, j: usize| -> Result<f64> {
        let mut acc: i128 = 0;
        for t in 0..b.cols {
            acc = b
                .get(i, t)
                .checked_mul(b.get(j, t))
                .and_then(|p| acc.checked_add(p))
                .ok_or(LatticeError::Overflow)?;
        }
        Ok(acc as f64)
    };
    // fresh Gram-Schmidt data for rows 0..=k
    let gram = |b: &Work, k: usize| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut mu = vec![vec![0.0; n]; n];
        let mut bstar = vec![0.0; n];
        for i in 0..=k {
            let mut norm = dot(b, i, i)?;
            for j in 0..i {
                let mut proj = dot(b, i, j)?;
                for t in 0..j {
                    proj -= mu[i][t] * mu[j][t] * bstar[t];
                }
                mu[i][j] = if bstar[j] > 0.0 { proj / bstar[j] } else { 0.0 };
                norm -= mu[i][j] * mu[i][j] * bstar[j];
            }
            bstar[i] = norm.max(0.0);
        }
        Ok((mu, bstar))
    };
    let mut k = 1;
    let mut steps = 0;
    while k < n {
        steps += 1;
        if steps > 10_000 {
            break; // exact ops kept the lattice intact; settle for less reduction
        }
        let (mu, _) = gram(&b, k)?;
        let mut mu_k = mu[k].clone();
        // f64 Gram-Schmidt can misjudge near-degenerate bases; the norm can
        // legitimately rise mid-cascade, so judge the cascade as a whole and
        // undo it if the row ends up longer than it started
        let before = b.row_norm_sq(k);
        let mut applied: Vec<(usize, i128)> = vec![];
        let mut bad = false;
        for j in (0..k).rev() {
            let r = mu_k[j].round();
            if r != 0.0 && r.abs() < 9e18 {
                if b.add_row(k, j, -(r as i128)).is_err() {
                    bad = true; // wildly wrong f64 coefficient; abandon cascade
                    break;
                }
                applied.push((j, r as i128));
                for t in 0..=j {
                    mu_k[t] -= r * mu[j][t];
                }
            }
        }
        if bad || b.row_norm_sq(k) > before {
            for &(j, r) in applied.iter().rev() {
                b.add_row(k, j, r).expect("reverting an exact row operation");
            }
        }
        let (mu, bstar2) = gram(&b, k)?;
        if bstar2[k] >= (0.99 - mu[k][k - 1] * mu[k][k - 1]) * bstar2[k - 1] {
            k += 1;
        } else {
            b.swap_rows(k, k - 1);
            k = k.max(2) - 1;
        }
    }
    b.into_int()
}

pub fn kernel(a: &IntMatrix) -> Result<IntMatrix> {
    let s = smith_normal_form(a)?;
    lll_rows(
        &IntMatrix::from_rows((s.rank..a.rows).map(|i| s.u.row(i).to_vec()).collect())
            .pad_cols(a.rows),
    )
}

/// Basis of the row lattice of A (independent rows spanning the same group).
pub fn row_basis(a: &IntMatrix) -> Result<IntMatrix> {
    let s = smith_normal_form(a)?;
    let mut rows = vec![];
    for i in 0..s.rank {
        let d = s.d[(i, i)] as i128;
        let row: Option<Vec<i64>> = s
            .vinv
            .row(i)
            .iter()
            .map(|&x| i64::try_from(x as i128 * d).ok())
            .collect();
        rows.push(row.ok_or(LatticeError::Overflow)?);
    }
    lll_rows(&IntMatrix::from_rows(rows).pad_cols(a.cols))
}

impl IntMatrix {
    pub fn pad_cols(self, cols: usize) -> IntMatrix {
        if self.rows > 0 {
            assert_eq!(self.cols, cols);
            self
        } else {
            IntMatrix::zero(0, cols)
        }
    }
}

/// Basis of the saturation (primitive hull) of the row lattice of S:
/// all integer vectors with a multiple inside the span of S.
pub fn saturation(s_mat: &IntMatrix) -> Result<IntMatrix> {
    let s = smith_normal_form(s_mat)?;
    lll_rows(
        &IntMatrix::from_rows((0..s.rank).map(|i| s.vinv.row(i).to_vec()).collect())
            .pad_cols(s_mat.cols),
    )
}

/// Basis of {x in Z^n : x G s^T = 0 for all rows s of S}; saturated.
pub fn orthogonal_complement(s: &IntMatrix, g: &IntMatrix) -> Result<IntMatrix> {
    kernel(&g.mul(&s.transpose())?)
}

/// Basis of the fixed sublattice {x : x A = x} of an integer action on row
/// vectors; saturated.
pub fn fixed_sublattice(action: &IntMatrix) -> Result<IntMatrix> {
    let mut m = action.clone();
    for i in 0..m.rows.min(m.cols) {
        m[(i, i)] -= 1;
    }
    kernel(&m)
}

/// Intersection of the row groups of L1 and L2 (as groups, not saturated).
pub fn intersection(l1: &IntMatrix, l2: &IntMatrix) -> Result<IntMatrix> {
    assert_eq!(l1.cols, l2.cols);
    let stacked = l1.vcat(l2);
    let ker = kernel(&stacked)?;
    // each kernel row (a | b) gives a*L1 = -b*L2 in the intersection
    let mut gens = vec![];
    for i in 0..ker.rows {
        let mut x = vec![0i64; l1.cols];
        for r in 0..l1.rows {
            let f = ker[(i, r)];
            for c in 0..l1.cols {
                x[c] = ck_add(x[c], ck_mul(f, l1[(r, c)])?)?;
            }
        }
        gens.push(x);
    }
    row_basis(&IntMatrix::from_rows(gens).pad_cols(l1.cols))
}

/// Integer y with y B = x, or NotASubgroup.
pub fn solve_in_span(b: &IntMatrix, x: &[i64]) -> Result<Vec<i64>> {
    let s = smith_normal_form(b)?;
    let xv = IntMatrix::from_rows(vec![x.to_vec()]).mul(&s.v)?;
    let mut c = vec![0i64; b.rows];
    for i in 0..b.cols {
        let t = xv[(0, i)];
        if i < s.rank {
            let d = s.d[(i, i)];
            if t % d != 0 {
                return Err(LatticeError::NotASubgroup);
            }
            c[i] = t / d;
        } else if t != 0 {
            return Err(LatticeError::NotASubgroup);
        }
    }
    let y = IntMatrix::from_rows(vec![c]).mul(&s.u)?;
    Ok(y.row(0).to_vec())
}

/// Invariants and splitting data of Z^n / <rows of S>.
pub struct Quotient {
    pub free_rank: usize,
    /// invariant factors > 1, in divisibility order
    pub torsion: Vec<i64>,
    rank: usize,
    dvec: Vec<i64>,
    v: IntMatrix,
}

impl Quotient {
    /// (torsion coordinates, free coordinates) of the class of x.
    pub fn project(&self, x: &[i64]) -> Result<(Vec<i64>, Vec<i64>)> {
        let c = IntMatrix::from_rows(vec![x.to_vec()]).mul(&self.v)?;
        let mut torsion = vec![];
        for i in 0..self.rank {
            let d = self.dvec[i];
            if d > 1 {
                torsion.push(c[(0, i)].rem_euclid(d));
            }
        }
        let free = (self.rank..c.cols).map(|i| c[(0, i)]).collect();
        Ok((torsion, free))
    }
}

/// Structure of Z^n modulo the group generated by the rows of S.
pub fn quotient_invariants(n: usize, s_mat: &IntMatrix) -> Result<Quotient> {
    assert!(s_mat.rows == 0 || s_mat.cols == n);
    let s = if s_mat.rows == 0 {
        smith_normal_form(&IntMatrix::zero(0, n))?
    } else {
        smith_normal_form(s_mat)?
    };
    let dvec = s.invariant_factors();
    Ok(Quotient {
        free_rank: n - s.rank,
        torsion: dvec.iter().copied().filter(|&d| d > 1).collect(),
        rank: s.rank,
        dvec,
        v: if s_mat.rows == 0 { IntMatrix::identity(n) } else { s.v },
    })
}

/// Divisibility chain of the row group of A inside the row group of B
/// (requires A's rows to lie in B's group). All factors 1 iff equal groups
/// of the same rank.
pub fn embedding_invariants(a: &IntMatrix, b: &IntMatrix) -> Result<Vec<i64>> {
    let mut coords = vec![];
    for i in 0..a.rows {
        coords.push(solve_in_span(b, a.row(i))?);
    }
    let x = IntMatrix::from_rows(coords).pad_cols(b.rows);
    let s = smith_normal_form(&x)?;
    Ok(s.invariant_factors())
}

// ---- class-group pipeline ----

/// Lattice-side description of one surface family: the ambient Picard
/// lattice of the blown-up plane with its Galois action, the effective
/// (-2)-classes, and the (-1)-classes contracted before taking the
/// anticanonical model.
#[derive(Clone)]
pub struct LatticeDescriptor {
    pub ambient_rank: usize,
    pub roots: Vec<Vec<i64>>,
    pub contractions: Vec<Vec<i64>>,
    /// permutation of the basis (E_0, ..., E_r): index i maps to galois[i]
    pub galois: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ClassGroupReport {
    pub cartier_rank: usize,
    pub weil_free_rank: usize,
    pub weil_torsion: Vec<i64>,
    /// divisibility chain of the Cartier classes inside the free part of the
    /// Weil group
    pub embedding_factors: Vec<i64>,
    pub anticanonical_torsion: Vec<i64>,
    pub anticanonical_free: Vec<i64>,
}

fn dot(g: &IntMatrix, x: &[i64], y: &[i64]) -> Result<i64> {
    let mut acc = 0i64;
    for i in 0..x.len() {
        acc = ck_add(acc, ck_mul(x[i], ck_mul(g[(i, i)], y[i])?)?)?;
    }
    Ok(acc)
}

fn canonical_class(n: usize) -> Vec<i64> {
    let mut k = vec![1i64; n];
    k[0] = -3;
    k
}

/// Checks every numerical claim the descriptor makes: root and contraction
/// self-intersections and canonical degrees, Galois stability of both lists,
/// and orthogonality of roots to the contracted classes.
pub fn validate_descriptor(d: &LatticeDescriptor) -> Result<()> {
    let n = d.ambient_rank;
    let g = IntMatrix::hyperbolic_form(n);
    let k = canonical_class(n);
    let fail = |msg: String| Err(LatticeError::Validation(msg));
    let mut seen = vec![false; n];
    if d.galois.len() != n || d.galois[0] != 0 {
        return fail("galois action must permute E_1..E_r and fix E_0".into());
    }
    for &img in &d.galois {
        if img >= n || seen[img] {
            return fail("galois action is not a permutation".into());
        }
        seen[img] = true;
    }
    let permute = |x: &[i64]| {
        let mut y = vec![0i64; n];
        for (i, &xi) in x.iter().enumerate() {
            y[d.galois[i]] = xi;
        }
        y
    };
    for r in &d.roots {
        if r.len() != n {
            return fail("root length mismatch".into());
        }
        if dot(&g, r, r)? != -2 {
            return fail(format!("root {r:?} has self-intersection != -2"));
        }
        if dot(&g, r, &k)? != 0 {
            return fail(format!("root {r:?} is not orthogonal to K"));
        }
        if !d.roots.contains(&permute(r)) {
            return fail(format!("root set not Galois stable at {r:?}"));
        }
        for c in &d.contractions {
            if dot(&g, r, c)? != 0 {
                return fail(format!("root {r:?} meets contracted class {c:?}"));
            }
        }
    }
    for c in &d.contractions {
        if c.len() != n {
            return fail("contraction length mismatch".into());
        }
        if dot(&g, c, c)? != -1 {
            return fail(format!("contracted class {c:?} has self-intersection != -1"));
        }
        if dot(&g, c, &k)? != -1 {
            return fail(format!("contracted class {c:?} has K-degree != -1"));
        }
        if !d.contractions.contains(&permute(c)) {
            return fail(format!("contracted set not Galois stable at {c:?}"));
        }
    }
    Ok(())
}

pub fn class_group_report(d: &LatticeDescriptor) -> Result<ClassGroupReport> {
    validate_descriptor(d)?;
    let n = d.ambient_rank;
    let g = IntMatrix::hyperbolic_form(n);

    // Galois action on row vectors: x -> x P
    let mut p = IntMatrix::zero(n, n);
    for (i, &img) in d.galois.iter().enumerate() {
        p[(i, img)] = 1;
    }

    // Weil classes of the contracted surface: Galois-fixed part of the
    // orthogonal complement of the contracted classes.
    let mut pm1 = p.clone();
    for i in 0..n {
        pm1[(i, i)] -= 1;
    }
    let cond = if d.contractions.is_empty() {
        pm1
    } else {
        let f = IntMatrix::from_rows(d.contractions.clone());
        pm1.hcat(&g.mul(&f.transpose())?)
    };
    let c = kernel(&cond)?; // saturated, rank x n

    // Galois-fixed part of the group generated by the effective roots.
    let rbar = IntMatrix::from_rows(d.roots.clone()).pad_cols(n);
    let r = intersection(&rbar, &c)?;

    // Cartier classes: orthogonal complement of the roots inside C.
    let cart_in_c = if r.rows == 0 {
        IntMatrix::identity(c.rows)
    } else {
        kernel(&c.mul(&g.mul(&r.transpose())?)?)?
    };

    // Weil group of the anticanonical model: C / R.
    let mut r_in_c = vec![];
    for i in 0..r.rows {
        r_in_c.push(solve_in_span(&c, r.row(i))?);
    }
    let r_in_c = IntMatrix::from_rows(r_in_c).pad_cols(c.rows);
    let quot = quotient_invariants(c.rows, &r_in_c)?;

    // sanity: R and its complement only share 0
    let cart = cart_in_c.mul(&c)?;
    if r.rows > 0 && intersection(&r, &cart)?.rows != 0 {
        return Err(LatticeError::Validation(
            "roots meet their orthogonal complement".into(),
        ));
    }

    // Cartier classes projected to the free part of the quotient; a torsion
    // component in the image is fine and is dropped here (the torsion data
    // survives in the anticanonical projection below).
    let mut free_coords = vec![];
    for i in 0..cart_in_c.rows {
        let (_tors, free) = quot.project(cart_in_c.row(i))?;
        free_coords.push(free);
    }
    let embedding_factors = if cart_in_c.rows == 0 {
        vec![]
    } else {
        let x = IntMatrix::from_rows(free_coords);
        smith_normal_form(&x)?.invariant_factors()
    };

    // image of -K on the contracted surface
    let mut anti: Vec<i64> = canonical_class(n).iter().map(|x| -x).collect();
    for f in &d.contractions {
        let s = dot(&g, &anti, f)?;
        for (ai, &fi) in anti.iter_mut().zip(f) {
            *ai = ck_add(*ai, ck_mul(s, fi)?)?;
        }
    }
    let anti_in_c = solve_in_span(&c, &anti)?;
    let (anticanonical_torsion, anticanonical_free) = quot.project(&anti_in_c)?;

    Ok(ClassGroupReport {
        cartier_rank: cart_in_c.rows,
        weil_free_rank: quot.free_rank,
        weil_torsion: quot.torsion.clone(),
        embedding_factors,
        anticanonical_torsion,
        anticanonical_free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<i64>>) -> IntMatrix {
        IntMatrix::from_rows(rows)
    }

    #[test]
    fn snf_pinned_example() {
        let a = m(vec![vec![2, 4], vec![6, 8]]);
        let s = smith_normal_form(&a).unwrap();
        assert_eq!(s.rank, 2);
        assert_eq!(s.invariant_factors(), vec![2, 4]);
        assert_eq!(s.u.mul(&a).unwrap().mul(&s.v).unwrap(), s.d);
        assert_eq!(s.u.mul(&s.uinv).unwrap(), IntMatrix::identity(2));
        assert_eq!(s.v.mul(&s.vinv).unwrap(), IntMatrix::identity(2));
    }

    #[test]
    fn snf_divisibility_and_transforms() {
        let cases = vec![
            m(vec![vec![0, 0], vec![0, 0]]),
            m(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]),
            m(vec![vec![2, 0], vec![0, 3]]),
            m(vec![vec![6, 10, 15]]),
            m(vec![vec![-4], vec![6]]),
        ];
        for a in cases {
            let s = smith_normal_form(&a).unwrap();
            assert_eq!(s.u.mul(&a).unwrap().mul(&s.v).unwrap(), s.d);
            assert_eq!(s.u.mul(&s.uinv).unwrap(), IntMatrix::identity(a.rows));
            assert_eq!(s.v.mul(&s.vinv).unwrap(), IntMatrix::identity(a.cols));
            let f = s.invariant_factors();
            for w in f.windows(2) {
                assert_eq!(w[1] % w[0], 0);
            }
            for x in f {
                assert!(x > 0);
            }
        }
        // gcd landing: single row (6,10,15) has gcd 1
        let s = smith_normal_form(&m(vec![vec![6, 10, 15]])).unwrap();
        assert_eq!(s.invariant_factors(), vec![1]);
    }

    #[test]
    fn saturation_examples() {
        // index-2 sublattice of a line
        let s = saturation(&m(vec![vec![2, 4]])).unwrap();
        assert_eq!(s.row_vecs(), vec![vec![1, 2]]);
        // already saturated
        let s2 = saturation(&s).unwrap();
        assert_eq!(row_basis(&s2).unwrap().row_vecs(), s.row_vecs());
        // 2*(F - E) type generator: saturation divides out the content
        let s3 = saturation(&m(vec![vec![0, -2, -2]])).unwrap();
        assert_eq!(s3.rows, 1);
        assert_eq!(s3.row(0).iter().map(|x| x.abs()).sum::<i64>(), 2);
    }

    #[test]
    fn kernel_and_orthogonal_complement() {
        let g = IntMatrix::hyperbolic_form(4);
        // complement of E0 - E1 - E2 in Z^4
        let s = m(vec![vec![1, -1, -1, 0]]);
        let c = orthogonal_complement(&s, &g).unwrap();
        assert_eq!(c.rows, 3);
        for i in 0..c.rows {
            assert_eq!(dot(&g, c.row(i), &[1, -1, -1, 0]).unwrap(), 0);
        }
        // membership: E3 and E1 - E2 are orthogonal to s
        solve_in_span(&c, &[0, 0, 0, 1]).unwrap();
        solve_in_span(&c, &[0, 1, -1, 0]).unwrap();
        assert!(solve_in_span(&c, &[0, 1, 0, 0]).is_err());
    }

    #[test]
    fn fixed_sublattice_of_permutation() {
        // cyclic permutation of 3 coordinates fixing the 0th
        let mut p = IntMatrix::zero(4, 4);
        p[(0, 0)] = 1;
        p[(1, 2)] = 1;
        p[(2, 3)] = 1;
        p[(3, 1)] = 1;
        let f = fixed_sublattice(&p).unwrap();
        assert_eq!(f.rows, 2);
        solve_in_span(&f, &[1, 0, 0, 0]).unwrap();
        solve_in_span(&f, &[0, 1, 1, 1]).unwrap();
        assert!(solve_in_span(&f, &[0, 1, 0, 0]).is_err());
    }

    #[test]
    fn quotient_invariants_examples() {
        // Z^2 / <(2, 0)> = Z/2 + Z
        let q = quotient_invariants(2, &m(vec![vec![2, 0]])).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion, vec![2]);
        // Z^3 / <(0,1,-1), (3,-2,-1)> = Z/3 + Z
        let q = quotient_invariants(3, &m(vec![vec![0, 1, -1], vec![3, -2, -1]])).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion, vec![3]);
        // projection is a homomorphism killing the subgroup
        let (t, f) = q.project(&[0, 1, -1]).unwrap();
        assert!(t.iter().all(|&x| x == 0) && f.iter().all(|&x| x == 0));
        let (t, _) = q.project(&[1, 0, 0]).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn embedding_invariants_examples() {
        let b = m(vec![vec![0, 1, 1, 1]]);
        let a = m(vec![vec![0, 2, 2, 2]]);
        assert_eq!(embedding_invariants(&a, &b).unwrap(), vec![2]);
        assert_eq!(embedding_invariants(&b, &b).unwrap(), vec![1]);
        assert!(embedding_invariants(&m(vec![vec![1, 0, 0, 0]]), &b).is_err());
    }

    #[test]
    fn intersection_of_groups_is_not_saturated() {
        // <(1,1)> and <(2,0),(0,2)> intersect in <(2,2)>
        let l1 = m(vec![vec![1, 1]]);
        let l2 = m(vec![vec![2, 0], vec![0, 2]]);
        let i = intersection(&l1, &l2).unwrap();
        assert_eq!(i.rows, 1);
        assert_eq!(i.row(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn validation_rejects_bad_descriptors() {
        // a (-1)-class listed as a root
        let d = LatticeDescriptor {
            ambient_rank: 4,
            roots: vec![vec![0, 1, 0, 0]],
            contractions: vec![],
            galois: vec![0, 1, 2, 3],
        };
        assert!(matches!(
            class_group_report(&d),
            Err(LatticeError::Validation(_))
        ));
        // root set not stable under the action
        let d = LatticeDescriptor {
            ambient_rank: 4,
            roots: vec![vec![0, 1, -1, 0]],
            contractions: vec![],
            galois: vec![0, 1, 3, 2],
        };
        assert!(matches!(
            class_group_report(&d),
            Err(LatticeError::Validation(_))
        ));
    }
}
