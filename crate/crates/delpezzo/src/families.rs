//! The eight code families: deterministic point configurations, anticanonical
//! section bases, evaluation plans, and the lattice data of the corresponding
//! surfaces.
//!
//! Naming: `degD-S` is the family of weak del Pezzo surfaces of degree D with
//! singularity type S on the anticanonical model.  Each builder produces a
//! [`CodeInstance`] whose generator matrix has shape (D+1) x n with n the
//! number of rational points of the model.

use std::sync::Arc;

use thiserror::Error;

use crate::code::nq1_weil_serre;
use crate::gf::{FieldElement, FiniteField, GfError, Subfield};
use crate::lattice::{ClassGroupReport, LatticeDescriptor, LatticeError};
use crate::plane::{
    self, chain_direction, collinear, enumerate_points, intersect_lines, line_point_basis,
    line_through, linear_system, matrix_rank, orbit_product, rationalize_span, Form, PlaneError,
    PlanePoint, PointCondition,
};

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("field error: {0}")]
    Gf(#[from] GfError),
    #[error("plane error: {0}")]
    Plane(#[from] PlaneError),
    #[error("lattice error: {0}")]
    Lattice(#[from] LatticeError),
    #[error("unknown family '{0}'")]
    UnknownFamily(String),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("family {family} is not defined over F_{q}")]
    ExcludedFieldOrder { family: &'static str, q: u64 },
    #[error("configuration search failed for {family} over F_{q}: {detail}")]
    SearchFailed {
        family: &'static str,
        q: u64,
        detail: String,
    },
    #[error("no rational point of the contracted curve has a nonzero section vector")]
    NoRepresentative,
    #[error("invalid option: {0}")]
    BadOption(String),
    #[error("configuration validation failed: {0}")]
    Validation(String),
}

type Result<T> = std::result::Result<T, FamilyError>;

pub fn prime_power(q: u64) -> Option<(u64, usize)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= q {
        if q % p == 0 {
            let mut v = q;
            let mut e = 0;
            while v % p == 0 {
                v /= p;
                e += 1;
            }
            return (v == 1).then_some((p, e));
        }
        p += 1;
    }
    Some((q, 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyId {
    Deg6A1,
    Deg52A1,
    Deg4A1,
    Deg44A1,
    Deg4A2,
    Deg4D5,
    Deg3A1,
    Deg33A2,
}

impl FamilyId {
    pub const ALL: [FamilyId; 8] = [
        FamilyId::Deg6A1,
        FamilyId::Deg52A1,
        FamilyId::Deg4A1,
        FamilyId::Deg44A1,
        FamilyId::Deg4A2,
        FamilyId::Deg4D5,
        FamilyId::Deg3A1,
        FamilyId::Deg33A2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Deg6A1 => "deg6-a1",
            FamilyId::Deg52A1 => "deg5-2a1",
            FamilyId::Deg4A1 => "deg4-a1",
            FamilyId::Deg44A1 => "deg4-4a1",
            FamilyId::Deg4A2 => "deg4-a2",
            FamilyId::Deg4D5 => "deg4-d5",
            FamilyId::Deg3A1 => "deg3-a1",
            FamilyId::Deg33A2 => "deg3-3a2",
        }
    }

    pub fn parse(s: &str) -> Result<FamilyId> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FamilyError::UnknownFamily(s.to_string()))
    }

    /// Degree of the anticanonical model; the code dimension is degree + 1.
    pub fn degree(self) -> usize {
        match self {
            FamilyId::Deg6A1 => 6,
            FamilyId::Deg52A1 => 5,
            FamilyId::Deg4A1 | FamilyId::Deg44A1 | FamilyId::Deg4A2 | FamilyId::Deg4D5 => 4,
            FamilyId::Deg3A1 | FamilyId::Deg33A2 => 3,
        }
    }

    pub fn dimension(self) -> usize {
        self.degree() + 1
    }

    /// Field orders over which the construction degenerates.
    pub fn excluded_q(self) -> &'static [u64] {
        match self {
            FamilyId::Deg6A1 | FamilyId::Deg44A1 | FamilyId::Deg4A2 | FamilyId::Deg3A1 => &[2],
            FamilyId::Deg4A1 => &[2, 3],
            FamilyId::Deg52A1 | FamilyId::Deg4D5 | FamilyId::Deg33A2 => &[],
        }
    }

    /// [K : F_q] for the ambient field holding all conjugate points.
    pub fn extension_degree(self) -> usize {
        match self {
            FamilyId::Deg6A1 => 3,
            FamilyId::Deg52A1 => 2,
            FamilyId::Deg4A1 | FamilyId::Deg44A1 | FamilyId::Deg4A2 => 4,
            FamilyId::Deg4D5 => 1,
            FamilyId::Deg3A1 => 6,
            FamilyId::Deg33A2 => 3,
        }
    }

    /// Picard lattice of the blown-up plane with the family's effective
    /// roots, contracted classes and Galois action.
    pub fn lattice_descriptor(self) -> LatticeDescriptor {
        let v = |entries: &[i64]| entries.to_vec();
        match self {
            FamilyId::Deg6A1 => LatticeDescriptor {
                ambient_rank: 4,
                roots: vec![v(&[1, -1, -1, -1])],
                contractions: vec![],
                galois: vec![0, 2, 3, 1],
            },
            FamilyId::Deg52A1 => LatticeDescriptor {
                ambient_rank: 5,
                roots: vec![v(&[0, 1, -1, 0, 0]), v(&[0, 0, 0, 1, -1])],
                contractions: vec![],
                galois: vec![0, 3, 4, 1, 2],
            },
            FamilyId::Deg4A1 => LatticeDescriptor {
                ambient_rank: 7,
                roots: vec![v(&[2, -1, -1, -1, -1, -1, -1])],
                contractions: vec![v(&[1, -1, -1, 0, 0, 0, 0])],
                galois: vec![0, 2, 1, 4, 5, 6, 3],
            },
            FamilyId::Deg44A1 => LatticeDescriptor {
                ambient_rank: 7,
                roots: vec![
                    v(&[1, -1, -1, 0, 0, -1, 0]),
                    v(&[1, 0, -1, -1, 0, 0, -1]),
                    v(&[1, 0, 0, -1, -1, -1, 0]),
                    v(&[1, -1, 0, 0, -1, 0, -1]),
                ],
                contractions: vec![v(&[1, 0, 0, 0, 0, -1, -1])],
                galois: vec![0, 2, 3, 4, 1, 6, 5],
            },
            FamilyId::Deg4A2 => LatticeDescriptor {
                ambient_rank: 7,
                roots: vec![
                    v(&[1, -1, 0, -1, 0, -1, 0]),
                    v(&[1, 0, -1, 0, -1, 0, -1]),
                ],
                contractions: vec![v(&[1, 0, 0, 0, 0, -1, -1])],
                galois: vec![0, 2, 3, 4, 1, 6, 5],
            },
            FamilyId::Deg4D5 => LatticeDescriptor {
                ambient_rank: 6,
                roots: vec![
                    v(&[1, -1, -1, -1, 0, 0]),
                    v(&[0, 1, -1, 0, 0, 0]),
                    v(&[0, 0, 1, -1, 0, 0]),
                    v(&[0, 0, 0, 1, -1, 0]),
                    v(&[0, 0, 0, 0, 1, -1]),
                ],
                contractions: vec![],
                galois: vec![0, 1, 2, 3, 4, 5],
            },
            FamilyId::Deg3A1 => LatticeDescriptor {
                ambient_rank: 7,
                roots: vec![v(&[2, -1, -1, -1, -1, -1, -1])],
                contractions: vec![],
                galois: vec![0, 2, 3, 4, 5, 6, 1],
            },
            FamilyId::Deg33A2 => LatticeDescriptor {
                ambient_rank: 7,
                roots: vec![
                    v(&[0, 1, 0, 0, -1, 0, 0]),
                    v(&[0, 0, 1, 0, 0, -1, 0]),
                    v(&[0, 0, 0, 1, 0, 0, -1]),
                    v(&[1, -1, -1, 0, -1, 0, 0]),
                    v(&[1, 0, -1, -1, 0, -1, 0]),
                    v(&[1, -1, 0, -1, 0, 0, -1]),
                ],
                contractions: vec![],
                galois: vec![0, 2, 3, 1, 5, 6, 4],
            },
        }
    }

    /// The class-group invariants each family must exhibit.
    pub fn expected_class_group(self) -> ExpectedClassGroup {
        let e = |cr, wf, tors: &[i64], emb: &[i64]| ExpectedClassGroup {
            cartier_rank: cr,
            weil_free_rank: wf,
            weil_torsion: tors.to_vec(),
            embedding_factors: emb.to_vec(),
        };
        match self {
            FamilyId::Deg6A1 => e(1, 1, &[], &[2]),
            FamilyId::Deg52A1 => e(2, 2, &[], &[1, 2]),
            FamilyId::Deg4A1 => e(1, 1, &[], &[1]),
            FamilyId::Deg44A1 => e(1, 1, &[2], &[1]),
            FamilyId::Deg4A2 => e(1, 1, &[], &[1]),
            FamilyId::Deg4D5 => e(1, 1, &[], &[4]),
            FamilyId::Deg3A1 => e(1, 1, &[], &[1]),
            FamilyId::Deg33A2 => e(1, 1, &[3], &[1]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectedClassGroup {
    pub cartier_rank: usize,
    pub weil_free_rank: usize,
    pub weil_torsion: Vec<i64>,
    pub embedding_factors: Vec<i64>,
}

impl ExpectedClassGroup {
    pub fn matches(&self, r: &ClassGroupReport) -> bool {
        self.cartier_rank == r.cartier_rank
            && self.weil_free_rank == r.weil_free_rank
            && self.weil_torsion == r.weil_torsion
            && self.embedding_factors == r.embedding_factors
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DistanceExpectation {
    Exact(u64),
    /// d_min >= the stated value (n minus the Weil-Serre curve bound).
    AtLeast(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ExpectedParameters {
    pub n: u64,
    pub k: usize,
    pub d: DistanceExpectation,
}

/// Predicted [n, k, d] (or a distance lower bound) for the family over F_q.
pub fn expected_parameters(id: FamilyId, q: u64) -> Result<ExpectedParameters> {
    prime_power(q).ok_or(FamilyError::NotPrimePower(q))?;
    if id.excluded_q().contains(&q) {
        return Err(FamilyError::ExcludedFieldOrder {
            family: id.name(),
            q,
        });
    }
    let n = match id {
        FamilyId::Deg6A1 | FamilyId::Deg44A1 | FamilyId::Deg4A2 | FamilyId::Deg3A1 => q * q + 1,
        FamilyId::Deg52A1 | FamilyId::Deg4D5 | FamilyId::Deg33A2 => q * q + q + 1,
        FamilyId::Deg4A1 => q * q - q + 1,
    };
    let d = match id {
        FamilyId::Deg6A1 => DistanceExpectation::Exact(q * q - 2 * q),
        FamilyId::Deg52A1 => DistanceExpectation::Exact(q * q - q - 1),
        FamilyId::Deg4D5 => DistanceExpectation::Exact(q * q - q),
        _ => {
            let bound = nq1_weil_serre(q).expect("q is a prime power");
            DistanceExpectation::AtLeast(n.saturating_sub(bound))
        }
    };
    Ok(ExpectedParameters {
        n,
        k: id.dimension(),
        d,
    })
}

/// One evaluation column of the generator matrix.
#[derive(Clone, Debug)]
pub enum EvalColumn {
    /// A rational plane point away from every contracted curve.
    Plane(PlanePoint),
    /// The image of a contracted curve, evaluated at a representative
    /// rational point of that curve.
    Contracted {
        curve: &'static str,
        point: PlanePoint,
    },
    /// A point of the exceptional line over a blown-up rational point,
    /// evaluated through the degree-one local functional.
    Exceptional { u: FieldElement, v: FieldElement },
}

impl EvalColumn {
    pub fn kind(&self) -> String {
        match self {
            EvalColumn::Plane(_) => "plane".into(),
            EvalColumn::Contracted { curve, .. } => format!("contracted:{curve}"),
            EvalColumn::Exceptional { .. } => "exceptional".into(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BuildOptions {
    /// code of the deg4-d5 cubic coefficient in F_q; must be nonzero
    pub alpha: Option<u64>,
    /// code of the deg4-d5 direction parameter in F_q
    pub beta: Option<u64>,
    /// reserved; the construction is fully deterministic
    pub seed: Option<u64>,
}

/// A fully built code instance: the section basis and evaluation plan over
/// the ambient field K, plus everything needed to reproduce it.
pub struct CodeInstance {
    pub id: FamilyId,
    pub q: u64,
    pub sub: Subfield,
    pub sections: Vec<Form>,
    pub plan: Vec<EvalColumn>,
    /// contracted curves, in blow-down-then-anticanonical declaration order
    pub contracted: Vec<(&'static str, Form)>,
    /// named configuration constants as element codes in K
    pub constants: Vec<(String, u64)>,
    /// deg4-d5 parameters, inside K
    pub alpha: Option<FieldElement>,
    pub beta: Option<FieldElement>,
    pub expected: ExpectedParameters,
}

impl CodeInstance {
    pub fn field(&self) -> &Arc<FiniteField> {
        self.sub.field()
    }
    pub fn k(&self) -> usize {
        self.sections.len()
    }
    pub fn n(&self) -> usize {
        self.plan.len()
    }

    /// Value of one generator-matrix entry, inside K (always in F_q).
    pub fn entry(&self, section: usize, col: &EvalColumn) -> FieldElement {
        let s = &self.sections[section];
        match col {
            EvalColumn::Plane(p) | EvalColumn::Contracted { point: p, .. } => {
                // evaluate at the Y = 1 representative when possible; each
                // choice of representative gives a monomially equivalent
                // code, and this chart makes the affine structure of the
                // matrix explicit
                let v = s.evaluate(p);
                let y = &p.coords()[1];
                if y.is_zero() {
                    v
                } else {
                    &v * &y.inv().expect("nonzero").pow(s.degree() as u64)
                }
            }
            EvalColumn::Exceptional { u, v } => {
                // degree-one part of the local equation along the last
                // exceptional line of the deg4-d5 chain:
                // (alpha*a21 + beta*a11) u + a01 v
                let alpha = self.alpha.as_ref().expect("exceptional column needs alpha");
                let beta = self.beta.as_ref().expect("exceptional column needs beta");
                let a01 = s.coeff((0, 1, 2));
                let a11 = s.coeff((1, 1, 1));
                let a21 = s.coeff((2, 1, 0));
                let cu = &(alpha * a21) + &(beta * a11);
                &(&cu * u) + &(a01 * v)
            }
        }
    }
}

fn context(id: FamilyId, q: u64) -> Result<Subfield> {
    let (p, d) = prime_power(q).ok_or(FamilyError::NotPrimePower(q))?;
    let field = FiniteField::new(p, d * id.extension_degree())?;
    Ok(Subfield::new(&field, q)?)
}

/// First rational point of the curve, in plane enumeration order, where the
/// sections do not all vanish.
fn contracted_representative(
    sub: &Subfield,
    curve: &Form,
    sections: &[Form],
) -> Result<PlanePoint> {
    for p in plane::rational_points_on(sub, curve) {
        if sections.iter().any(|s| !s.evaluate(&p).is_zero()) {
            return Ok(p);
        }
    }
    Err(FamilyError::NoRepresentative)
}

/// Plane columns: rational points off all the given curves, in enumeration
/// order.
fn plane_columns(sub: &Subfield, off: &[&Form]) -> Vec<EvalColumn> {
    enumerate_points(sub)
        .into_iter()
        .filter(|p| off.iter().all(|f| !f.evaluate(p).is_zero()))
        .map(EvalColumn::Plane)
        .collect()
}

fn push_contracted(
    sub: &Subfield,
    sections: &[Form],
    contracted: &[(&'static str, Form)],
    plan: &mut Vec<EvalColumn>,
) -> Result<()> {
    for (name, curve) in contracted {
        plan.push(EvalColumn::Contracted {
            curve: name,
            point: contracted_representative(sub, curve, sections)?,
        });
    }
    Ok(())
}

fn section_rank(sections: &[Form]) -> usize {
    matrix_rank(
        &sections
            .iter()
            .map(|s| s.coeffs().to_vec())
            .collect::<Vec<_>>(),
    )
}

pub fn build_instance(id: FamilyId, q: u64, opts: &BuildOptions) -> Result<CodeInstance> {
    let expected = expected_parameters(id, q)?;
    if (opts.alpha.is_some() || opts.beta.is_some()) && id != FamilyId::Deg4D5 {
        return Err(FamilyError::BadOption(
            "--alpha/--beta only apply to deg4-d5".into(),
        ));
    }
    let inst = match id {
        FamilyId::Deg6A1 => build_deg6_a1(q, expected)?,
        FamilyId::Deg52A1 => build_deg5_2a1(q, expected)?,
        FamilyId::Deg4A1 => build_deg4_a1(q, expected)?,
        FamilyId::Deg44A1 => build_deg4_4a1(q, expected)?,
        FamilyId::Deg4A2 => build_deg4_a2(q, expected)?,
        FamilyId::Deg4D5 => build_deg4_d5(q, opts, expected)?,
        FamilyId::Deg3A1 => build_deg3_a1(q, expected)?,
        FamilyId::Deg33A2 => build_deg3_3a2(q, expected)?,
    };
    debug_assert_eq!(inst.n() as u64, inst.expected.n);
    Ok(inst)
}

// ---- family builders ----

/// Cubics through three conjugate collinear points on Y = 0: the blow-up has
/// one effective root (the strict transform of the line) and the
/// anticanonical model acquires one singular rational point.
fn build_deg6_a1(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg6A1, q)?;
    let f = sub.field().clone();
    let one = f.one();
    let zeta = sub.canonical_generator(3)?;
    // minimal polynomial X^3 + a2 X^2 + a1 X + a0 of zeta over F_q
    let mp = zeta.minimal_polynomial(q)?;
    let (a0, a1, a2) = (mp[0].clone(), mp[1].clone(), mp[2].clone());

    let t = |e: (usize, usize, usize), c: FieldElement| (e, c);
    let mono = |e: (usize, usize, usize)| Form::from_terms(&f, 3, &[t(e, one.clone())]);
    let p_form = Form::from_terms(
        &f,
        3,
        &[
            t((3, 0, 0), one.clone()),
            t((2, 0, 1), a2),
            t((1, 0, 2), a1),
            t((0, 0, 3), a0),
        ],
    );
    let sections = vec![
        mono((0, 3, 0)), // Y^3
        mono((1, 2, 0)), // X Y^2
        mono((0, 2, 1)), // Y^2 Z
        mono((2, 1, 0)), // X^2 Y
        mono((0, 1, 2)), // Y Z^2
        mono((1, 1, 1)), // X Y Z
        p_form,
    ];
    let line = Form::from_terms(&f, 1, &[t((0, 1, 0), one.clone())]);
    let contracted = vec![("l123", line.clone())];
    let mut plan = plane_columns(&sub, &[&line]);
    push_contracted(&sub, &sections, &contracted, &mut plan)?;
    Ok(CodeInstance {
        id: FamilyId::Deg6A1,
        q,
        constants: vec![("zeta".into(), zeta.code())],
        sub,
        sections,
        plan,
        contracted,
        alpha: None,
        beta: None,
        expected,
    })
}

/// Cubics with two conjugate tangency chains along the line Y = 0; both
/// singular points of the model are non-rational, so every plane point is
/// kept and the code length is q^2 + q + 1.
fn build_deg5_2a1(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg52A1, q)?;
    let f = sub.field().clone();
    let one = f.one();
    let zeta = sub.canonical_generator(2)?;
    // tangent line at p1 = (zeta : 0 : 1): X - zeta (Y + Z)
    let l = Form::from_terms(
        &f,
        1,
        &[
            ((1, 0, 0), one.clone()),
            ((0, 1, 0), -&zeta),
            ((0, 0, 1), -&zeta),
        ],
    );
    let pi = orbit_product(&l, q)?;
    let y = Form::from_terms(&f, 1, &[((0, 1, 0), one.clone())]);
    let ypz = Form::from_terms(&f, 1, &[((0, 1, 0), one.clone()), ((0, 0, 1), one.clone())]);
    let x = Form::from_terms(&f, 1, &[((1, 0, 0), one.clone())]);
    let y2 = y.mul(&y);
    let sections = vec![
        y2.mul(&y),
        y2.mul(&x),
        y2.mul(&ypz),
        y.mul(&pi),
        x.mul(&pi),
        ypz.mul(&pi),
    ];
    let plan = plane_columns(&sub, &[]);
    Ok(CodeInstance {
        id: FamilyId::Deg52A1,
        q,
        constants: vec![("zeta".into(), zeta.code())],
        sub,
        sections,
        plan,
        contracted: vec![],
        alpha: None,
        beta: None,
        expected,
    })
}

/// Base-point conditions of the deg6-a1 system: the three conjugate
/// collinear points on Y = 0.
pub fn deg6_a1_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let zeta = f.from_code(inst.constants[0].1);
    let p1 = PlanePoint::new([zeta, f.zero(), f.one()])?;
    Ok(p1
        .galois_orbit(inst.q)?
        .into_iter()
        .map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 1,
        })
        .collect())
}

/// Base-point conditions for the deg5-2a1 cross-check: two conjugate chains
/// (p_i, tangent direction of the line l at p_i).
pub fn deg5_2a1_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field();
    let q = inst.q;
    let zeta = f.from_code(inst.constants[0].1);
    let one = f.one();
    let l = Form::from_terms(
        f,
        1,
        &[
            ((1, 0, 0), one.clone()),
            ((0, 1, 0), -&zeta),
            ((0, 0, 1), -&zeta),
        ],
    );
    let p1 = PlanePoint::new([zeta, f.zero(), f.one()])?;
    let mut conds = vec![];
    let mut pt = p1;
    let mut tangent = l;
    for _ in 0..2 {
        conds.push(PointCondition::Chain {
            directions: vec![chain_direction(&pt, &tangent)?],
            base: pt.clone(),
        });
        pt = pt.frobenius(q)?;
        tangent = tangent.frobenius(q)?;
    }
    Ok(conds)
}

fn conic_form(f: &Arc<FiniteField>) -> Form {
    // Y^2 - XZ
    Form::from_terms(
        f,
        2,
        &[((0, 2, 0), f.one()), ((1, 0, 1), -&f.one())],
    )
}

fn conic_point(f: &Arc<FiniteField>, t: &FieldElement) -> Result<PlanePoint> {
    Ok(PlanePoint::new([&(t * t) * &f.one(), t.clone(), f.one()])?)
}

/// Quartics with a degree-2 pair and a degree-4 orbit on a smooth conic,
/// double along the line joining the pair.  Both the line and the conic are
/// contracted, so the plane loses their 2(q+1) rational points and the model
/// regains two: n = q^2 - q + 1.
fn build_deg4_a1(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg4A1, q)?;
    let f = sub.field().clone();
    let t1 = sub.canonical_generator(2)?;
    let t3 = sub.canonical_generator(4)?;
    let p1 = conic_point(&f, &t1)?;
    let p3 = conic_point(&f, &t3)?;
    let pair = p1.galois_orbit(q)?;
    let quad = p3.galois_orbit(q)?;
    debug_assert_eq!((pair.len(), quad.len()), (2, 4));

    let qf = conic_form(&f);
    let l12 = line_through(&pair[0], &pair[1])?;
    if !l12.is_rational(q)? {
        return Err(FamilyError::Validation("l12 must be rational".into()));
    }
    let l35 = line_through(&quad[0], &quad[2])?;
    let l46 = l35.frobenius(q)?;
    let l13 = line_through(&pair[0], &quad[0])?;
    let quartic = orbit_product(&l13, q)?;
    if quartic.degree() != 4 {
        return Err(FamilyError::Validation(
            "lines l13, l24, l15, l26 must form one orbit of size 4".into(),
        ));
    }
    let axes: [Form; 3] = [
        Form::from_terms(&f, 1, &[((1, 0, 0), f.one())]),
        Form::from_terms(&f, 1, &[((0, 1, 0), f.one())]),
        Form::from_terms(&f, 1, &[((0, 0, 1), f.one())]),
    ];
    let ql12 = qf.mul(&l12);
    let mut sections: Vec<Form> = axes.iter().map(|a| ql12.mul(a)).collect();
    sections.push(l12.mul(&l12).mul(&l35).mul(&l46));
    sections.push(quartic);
    for s in &sections {
        if !s.is_rational(q)? {
            return Err(FamilyError::Validation("section not rational".into()));
        }
    }
    let contracted = vec![("l12", l12.clone()), ("conic", qf.clone())];
    let mut plan = plane_columns(&sub, &[&l12, &qf]);
    push_contracted(&sub, &sections, &contracted, &mut plan)?;
    Ok(CodeInstance {
        id: FamilyId::Deg4A1,
        q,
        constants: vec![("t1".into(), t1.code()), ("t3".into(), t3.code())],
        sub,
        sections,
        plan,
        contracted,
        alpha: None,
        beta: None,
        expected,
    })
}

/// Interpolation conditions defining the deg4-a1 system, for cross-checks.
pub fn deg4_a1_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let q = inst.q;
    let t1 = f.from_code(inst.constants[0].1);
    let t3 = f.from_code(inst.constants[1].1);
    let mut conds = vec![];
    for p in conic_point(&f, &t1)?.galois_orbit(q)? {
        conds.push(PointCondition::Ordinary {
            point: p,
            multiplicity: 2,
        });
    }
    for p in conic_point(&f, &t3)?.galois_orbit(q)? {
        conds.push(PointCondition::Ordinary {
            point: p,
            multiplicity: 1,
        });
    }
    Ok(conds)
}

/// The collinear triples among the given points, as sorted index triples.
fn collinear_triples(pts: &[PlanePoint]) -> Vec<[usize; 3]> {
    let mut out = vec![];
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                if collinear(&pts[i], &pts[j], &pts[k]) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Degree-4 orbit sweep shared by deg4-4a1 and deg4-a2: candidates
/// (zeta : c : 1) with c running through K in code order; `accept` performs
/// the family-specific checks and completes the configuration.
fn sweep_degree4_orbit<T>(
    sub: &Subfield,
    family: &'static str,
    q: u64,
    mut accept: impl FnMut(&[PlanePoint], u64) -> Result<Option<T>>,
) -> Result<T> {
    let f = sub.field();
    let zeta = sub.canonical_generator(4)?;
    for c in f.enumerate() {
        let p1 = PlanePoint::new([zeta.clone(), c.clone(), f.one()])?;
        let orbit = p1.galois_orbit(q)?;
        if orbit.len() != 4 || !collinear_triples(&orbit).is_empty() {
            continue;
        }
        if let Some(t) = accept(&orbit, c.code())? {
            return Ok(t);
        }
    }
    Err(FamilyError::SearchFailed {
        family,
        q,
        detail: "no degree-4 orbit in general position found".into(),
    })
}

/// Quartics through a degree-4 orbit, double at the two conjugate diagonal
/// points of the complete quadrilateral it spans; the line through the
/// diagonal points is contracted.
fn build_deg4_4a1(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg44A1, q)?;
    let built = sweep_degree4_orbit(&sub, "deg4-4a1", q, |orbit, c_code| {
        let [p1, p2, p3, p4] = [&orbit[0], &orbit[1], &orbit[2], &orbit[3]];
        let l12 = line_through(p1, p2)?;
        let l34 = line_through(p3, p4)?;
        let l23 = line_through(p2, p3)?;
        let l14 = line_through(p1, p4)?;
        let p5 = intersect_lines(&l12, &l34)?;
        let p6 = intersect_lines(&l23, &l14)?;
        if p5 == p6 || p5.degree(q)? != 2 || orbit.contains(&p5) || orbit.contains(&p6) {
            return Ok(None);
        }
        let pts: Vec<PlanePoint> = orbit.iter().cloned().chain([p5.clone(), p6.clone()]).collect();
        // exactly the four prescribed collinearities, nothing accidental
        let mut triples = collinear_triples(&pts);
        triples.sort();
        if triples != vec![[0, 1, 4], [0, 3, 5], [1, 2, 5], [2, 3, 4]] {
            return Ok(None);
        }
        let l56 = line_through(&p5, &p6)?;
        if !l56.is_rational(q)? || pts[..4].iter().any(|p| l56.evaluate(p).is_zero()) {
            return Ok(None);
        }
        let mut conds: Vec<PointCondition> = orbit
            .iter()
            .map(|p| PointCondition::Ordinary {
                point: p.clone(),
                multiplicity: 1,
            })
            .collect();
        for p in [&p5, &p6] {
            conds.push(PointCondition::Ordinary {
                point: p.clone(),
                multiplicity: 2,
            });
        }
        let sections = linear_system(&sub, 4, &conds)?;
        if sections.len() != 5 {
            return Ok(None);
        }
        Ok(Some((sections, conds, l56, c_code)))
    })?;
    let (sections, _conds, l56, c_code) = built;
    let zeta = sub.canonical_generator(4)?;
    let contracted = vec![("l56", l56.clone())];
    let mut plan = plane_columns(&sub, &[&l56]);
    push_contracted(&sub, &sections, &contracted, &mut plan)?;
    Ok(CodeInstance {
        id: FamilyId::Deg44A1,
        q,
        constants: vec![("zeta".into(), zeta.code()), ("c".into(), c_code)],
        sub,
        sections,
        plan,
        contracted,
        alpha: None,
        beta: None,
        expected,
    })
}

/// Quartics through a degree-4 orbit, double at a conjugate pair sitting on
/// the two lines (p1 p3) and (p2 p4); the line joining the pair is
/// contracted and the two long lines become the A2 configuration.
fn build_deg4_a2(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg4A2, q)?;
    let q2 = Subfield::new(sub.field(), q * q)?;
    let built = sweep_degree4_orbit(&sub, "deg4-a2", q, |orbit, c_code| {
        let (p1, p3) = (&orbit[0], &orbit[2]);
        let l13 = line_through(p1, p3)?.normalize()?;
        let l24 = l13.frobenius(q)?;
        let cross = intersect_lines(&l13, &l24)?;
        // sweep the F_{q^2}-points of (p1 p3) in a fixed parametrization
        let [b0, b1] = line_point_basis(&l13)?;
        let mut candidates: Vec<PlanePoint> = vec![];
        for t in q2.elements() {
            let coords = [
                &b0.coords()[0] + &(t * &b1.coords()[0]),
                &b0.coords()[1] + &(t * &b1.coords()[1]),
                &b0.coords()[2] + &(t * &b1.coords()[2]),
            ];
            candidates.push(PlanePoint::new(coords)?);
        }
        candidates.push(b1.clone());
        for p5 in candidates {
            if p5 == *p1 || p5 == *p3 || p5 == cross || p5.degree(q)? != 2 {
                continue;
            }
            let p6 = p5.frobenius(q)?;
            let pts: Vec<PlanePoint> =
                orbit.iter().cloned().chain([p5.clone(), p6.clone()]).collect();
            let mut triples = collinear_triples(&pts);
            triples.sort();
            if triples != vec![[0, 2, 4], [1, 3, 5]] {
                continue;
            }
            let l56 = line_through(&p5, &p6)?;
            if !l56.is_rational(q)? || pts[..4].iter().any(|p| l56.evaluate(p).is_zero()) {
                continue;
            }
            let mut conds: Vec<PointCondition> = orbit
                .iter()
                .map(|p| PointCondition::Ordinary {
                    point: p.clone(),
                    multiplicity: 1,
                })
                .collect();
            for p in [&p5, &p6] {
                conds.push(PointCondition::Ordinary {
                    point: p.clone(),
                    multiplicity: 2,
                });
            }
            let sections = linear_system(&sub, 4, &conds)?;
            if sections.len() != 5 {
                continue;
            }
            return Ok(Some((sections, l56, c_code, p5)));
        }
        Ok(None)
    })?;
    let (sections, l56, c_code, p5) = built;
    let zeta = sub.canonical_generator(4)?;
    let contracted = vec![("l56", l56.clone())];
    let mut plan = plane_columns(&sub, &[&l56]);
    push_contracted(&sub, &sections, &contracted, &mut plan)?;
    Ok(CodeInstance {
        id: FamilyId::Deg4A2,
        q,
        constants: vec![
            ("zeta".into(), zeta.code()),
            ("c".into(), c_code),
            ("p5x".into(), p5.coords()[0].code()),
            ("p5y".into(), p5.coords()[1].code()),
            ("p5z".into(), p5.coords()[2].code()),
        ],
        sub,
        sections,
        plan,
        contracted,
        alpha: None,
        beta: None,
        expected,
    })
}

/// Cubics through the rational chain of length 5 over (0:0:1) with the first
/// three points on Y = 0: the family with a D5 point.  The fifth blow-up
/// point is rational, so q+1 exceptional columns replace the q+1 points of
/// the contracted configuration... here nothing is contracted: the plan is
/// the q^2 points with Y != 0 plus q+1 exceptional-line columns.
fn build_deg4_d5(q: u64, opts: &BuildOptions, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg4D5, q)?;
    let f = sub.field().clone();
    let getp = |v: Option<u64>, default: u64, name: &str| -> Result<FieldElement> {
        let code = v.unwrap_or(default);
        if code >= q {
            return Err(FamilyError::BadOption(format!(
                "{name} code {code} out of range for F_{q}"
            )));
        }
        Ok(sub.element(code).clone())
    };
    let alpha = getp(opts.alpha, 1, "alpha")?;
    let beta = getp(opts.beta, 0, "beta")?;
    if alpha.is_zero() {
        return Err(FamilyError::BadOption("alpha must be nonzero".into()));
    }
    let one = f.one();
    let s1 = Form::from_terms(
        &f,
        3,
        &[
            ((0, 1, 2), alpha.clone()),
            ((1, 1, 1), -&beta),
            ((3, 0, 0), -&(&alpha * &alpha)),
        ],
    );
    let mono = |e| Form::from_terms(&f, 3, &[(e, one.clone())]);
    let sections = vec![
        s1,
        mono((0, 3, 0)), // Y^3
        mono((2, 1, 0)), // X^2 Y
        mono((1, 2, 0)), // X Y^2
        mono((0, 2, 1)), // Y^2 Z
    ];
    let y = Form::from_terms(&f, 1, &[((0, 1, 0), one.clone())]);
    let mut plan = plane_columns(&sub, &[&y]);
    for v in sub.elements() {
        plan.push(EvalColumn::Exceptional {
            u: one.clone(),
            v: v.clone(),
        });
    }
    plan.push(EvalColumn::Exceptional {
        u: f.zero(),
        v: one.clone(),
    });
    Ok(CodeInstance {
        id: FamilyId::Deg4D5,
        q,
        constants: vec![("alpha".into(), alpha.code()), ("beta".into(), beta.code())],
        sub,
        sections,
        plan,
        contracted: vec![],
        alpha: Some(alpha),
        beta: Some(beta),
        expected,
    })
}

/// Base-point conditions of the deg4-4a1 system, rebuilt from the stored
/// configuration constants.
pub fn deg4_4a1_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let q = inst.q;
    let zeta = f.from_code(inst.constants[0].1);
    let c = f.from_code(inst.constants[1].1);
    let orbit = PlanePoint::new([zeta, c, f.one()])?.galois_orbit(q)?;
    let p5 = intersect_lines(
        &line_through(&orbit[0], &orbit[1])?,
        &line_through(&orbit[2], &orbit[3])?,
    )?;
    let p6 = intersect_lines(
        &line_through(&orbit[1], &orbit[2])?,
        &line_through(&orbit[0], &orbit[3])?,
    )?;
    Ok(orbit
        .into_iter()
        .map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 1,
        })
        .chain([p5, p6].into_iter().map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 2,
        }))
        .collect())
}

/// Base-point conditions of the deg4-a2 system, rebuilt from the stored
/// configuration constants.
pub fn deg4_a2_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let q = inst.q;
    let zeta = f.from_code(inst.constants[0].1);
    let c = f.from_code(inst.constants[1].1);
    let orbit = PlanePoint::new([zeta, c, f.one()])?.galois_orbit(q)?;
    let p5 = PlanePoint::new([
        f.from_code(inst.constants[2].1),
        f.from_code(inst.constants[3].1),
        f.from_code(inst.constants[4].1),
    ])?;
    let p6 = p5.frobenius(q)?;
    Ok(orbit
        .into_iter()
        .map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 1,
        })
        .chain([p5, p6].into_iter().map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 2,
        }))
        .collect())
}

/// The chain conditions cutting out the deg4-d5 system.
pub fn deg4_d5_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field();
    let base = PlanePoint::new([f.zero(), f.zero(), f.one()])?;
    let alpha = inst.alpha.clone().expect("deg4-d5 instance");
    let beta = inst.beta.clone().expect("deg4-d5 instance");
    Ok(vec![PointCondition::Chain {
        base,
        directions: vec![f.zero(), f.zero(), alpha, beta],
    }])
}

/// Cubics through a degree-6 orbit on a smooth conic; the conic is the one
/// effective root and gets contracted to a rational singular point.
fn build_deg3_a1(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg3A1, q)?;
    let f = sub.field().clone();
    let t = sub.canonical_generator(6)?;
    let p1 = conic_point(&f, &t)?;
    let orbit = p1.galois_orbit(q)?;
    if orbit.len() != 6 {
        return Err(FamilyError::Validation(
            "conic parameter does not give a degree-6 point".into(),
        ));
    }
    let qf = conic_form(&f);
    let l14 = line_through(&orbit[0], &orbit[3])?;
    let cubic = orbit_product(&l14, q)?;
    if cubic.degree() != 3 {
        return Err(FamilyError::Validation(
            "lines l14, l25, l36 must form one orbit of size 3".into(),
        ));
    }
    let mono = |e| Form::from_terms(&f, 1, &[(e, f.one())]);
    let sections = vec![
        qf.mul(&mono((1, 0, 0))),
        qf.mul(&mono((0, 1, 0))),
        qf.mul(&mono((0, 0, 1))),
        cubic,
    ];
    let contracted = vec![("conic", qf.clone())];
    let mut plan = plane_columns(&sub, &[&qf]);
    push_contracted(&sub, &sections, &contracted, &mut plan)?;
    Ok(CodeInstance {
        id: FamilyId::Deg3A1,
        q,
        constants: vec![("t".into(), t.code())],
        sub,
        sections,
        plan,
        contracted,
        alpha: None,
        beta: None,
        expected,
    })
}

/// Cubics with three conjugate tangency chains along the sides of the
/// triangle spanned by a degree-3 orbit; all plane points survive.
fn build_deg3_3a2(q: u64, expected: ExpectedParameters) -> Result<CodeInstance> {
    let sub = context(FamilyId::Deg33A2, q)?;
    let f = sub.field().clone();
    let zeta = sub.canonical_generator(3)?;
    let mut chosen = None;
    for c in f.enumerate() {
        let p1 = PlanePoint::new([zeta.clone(), c.clone(), f.one()])?;
        let orbit = p1.galois_orbit(q)?;
        if orbit.len() == 3 && !collinear(&orbit[0], &orbit[1], &orbit[2]) {
            chosen = Some((orbit, c.code()));
            break;
        }
    }
    let Some((orbit, c_code)) = chosen else {
        return Err(FamilyError::SearchFailed {
            family: "deg3-3a2",
            q,
            detail: "no non-degenerate degree-3 orbit found".into(),
        });
    };
    let l12 = line_through(&orbit[0], &orbit[1])?.normalize()?;
    let l23 = l12.frobenius(q)?;
    let l13 = l23.frobenius(q)?;
    let m = l12.mul(&l23).mul(&l23);
    let m_orbit = vec![m.clone(), m.frobenius(q)?, m.frobenius(q)?.frobenius(q)?];
    let mut sections = rationalize_span(&m_orbit, &sub)?;
    sections.push(l12.mul(&l23).mul(&l13));
    let plan = plane_columns(&sub, &[]);
    Ok(CodeInstance {
        id: FamilyId::Deg33A2,
        q,
        constants: vec![("zeta".into(), zeta.code()), ("c".into(), c_code)],
        sub,
        sections,
        plan,
        contracted: vec![],
        alpha: None,
        beta: None,
        expected,
    })
}

/// Base-point conditions of the deg3-a1 system: the degree-6 orbit on the
/// conic.
pub fn deg3_a1_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let t = f.from_code(inst.constants[0].1);
    Ok(conic_point(&f, &t)?
        .galois_orbit(inst.q)?
        .into_iter()
        .map(|point| PointCondition::Ordinary {
            point,
            multiplicity: 1,
        })
        .collect())
}

/// The three conjugate chain conditions of the deg3-3a2 system.
pub fn deg3_3a2_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    let f = inst.field().clone();
    let q = inst.q;
    let zeta = f.from_code(inst.constants[0].1);
    let c = f.from_code(inst.constants[1].1);
    let p1 = PlanePoint::new([zeta, c, f.one()])?;
    let orbit = p1.galois_orbit(q)?;
    let l12 = line_through(&orbit[0], &orbit[1])?.normalize()?;
    let l23 = l12.frobenius(q)?;
    let l13 = l23.frobenius(q)?;
    let mut conds = vec![];
    for (pt, tangent) in [(&orbit[0], &l12), (&orbit[1], &l23), (&orbit[2], &l13)] {
        conds.push(PointCondition::Chain {
            base: pt.clone(),
            directions: vec![chain_direction(pt, tangent)?],
        });
    }
    Ok(conds)
}

/// The base-point conditions of any built instance, rebuilt from its stored
/// constants.
pub fn base_conditions(inst: &CodeInstance) -> Result<Vec<PointCondition>> {
    match inst.id {
        FamilyId::Deg6A1 => deg6_a1_conditions(inst),
        FamilyId::Deg52A1 => deg5_2a1_conditions(inst),
        FamilyId::Deg4A1 => deg4_a1_conditions(inst),
        FamilyId::Deg44A1 => deg4_4a1_conditions(inst),
        FamilyId::Deg4A2 => deg4_a2_conditions(inst),
        FamilyId::Deg4D5 => deg4_d5_conditions(inst),
        FamilyId::Deg3A1 => deg3_a1_conditions(inst),
        FamilyId::Deg33A2 => deg3_3a2_conditions(inst),
    }
}

// ---- validation ----

#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Re-verify a built instance: section rationality and rank, plan size and
/// disjointness, proportionality of section vectors along contracted curves,
/// and the lattice-side class-group invariants.
pub fn validate_instance(inst: &CodeInstance) -> ValidationReport {
    let mut checks = vec![];
    let mut check = |name: &str, pass: bool, detail: String| {
        checks.push(ValidationCheck {
            name: name.into(),
            pass,
            detail,
        });
    };
    let q = inst.q;

    let k = inst.id.dimension();
    check(
        "section-count",
        inst.sections.len() == k,
        format!("{} sections, expected {k}", inst.sections.len()),
    );
    let rational = inst
        .sections
        .iter()
        .all(|s| s.is_rational(q).unwrap_or(false));
    check("sections-rational", rational, String::new());
    let rank = section_rank(&inst.sections);
    check(
        "sections-independent",
        rank == inst.sections.len(),
        format!("coefficient rank {rank}"),
    );
    check(
        "plan-length",
        inst.n() as u64 == inst.expected.n,
        format!("{} columns, expected {}", inst.n(), inst.expected.n),
    );

    // contraction consistency: along each contracted curve the section
    // vectors at rational points are pairwise proportional
    for (name, curve) in &inst.contracted {
        let pts = plane::rational_points_on(&inst.sub, curve);
        let vecs: Vec<Vec<FieldElement>> = pts
            .iter()
            .map(|p| inst.sections.iter().map(|s| s.evaluate(p)).collect())
            .filter(|v: &Vec<FieldElement>| v.iter().any(|x| !x.is_zero()))
            .collect();
        let proportional = vecs.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            (0..a.len()).all(|i| {
                (0..a.len()).all(|j| &a[i] * &b[j] == &a[j] * &b[i])
            })
        });
        check(
            &format!("contraction-consistent:{name}"),
            !vecs.is_empty() && proportional,
            format!("{} usable points", vecs.len()),
        );
    }

    match crate::lattice::class_group_report(&inst.id.lattice_descriptor()) {
        Ok(report) => check(
            "class-group",
            inst.id.expected_class_group().matches(&report),
            format!("{report:?}"),
        ),
        Err(e) => check("class-group", false, e.to_string()),
    }

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in FamilyId::ALL {
            assert_eq!(FamilyId::parse(id.name()).unwrap(), id);
        }
        assert!(matches!(
            FamilyId::parse("deg9-e8"),
            Err(FamilyError::UnknownFamily(_))
        ));
    }

    #[test]
    fn expected_parameters_table() {
        let exp = |id, q| expected_parameters(id, q).unwrap();
        // pinned values over F_4 and F_3
        assert_eq!(
            exp(FamilyId::Deg6A1, 3),
            ExpectedParameters {
                n: 10,
                k: 7,
                d: DistanceExpectation::Exact(3)
            }
        );
        assert_eq!(
            exp(FamilyId::Deg52A1, 4),
            ExpectedParameters {
                n: 21,
                k: 6,
                d: DistanceExpectation::Exact(11)
            }
        );
        assert_eq!(
            exp(FamilyId::Deg4A1, 4),
            ExpectedParameters {
                n: 13,
                k: 5,
                d: DistanceExpectation::AtLeast(4)
            }
        );
        assert_eq!(
            exp(FamilyId::Deg4D5, 2),
            ExpectedParameters {
                n: 7,
                k: 5,
                d: DistanceExpectation::Exact(2)
            }
        );
        assert!(matches!(
            expected_parameters(FamilyId::Deg6A1, 2),
            Err(FamilyError::ExcludedFieldOrder { q: 2, .. })
        ));
        assert!(matches!(
            expected_parameters(FamilyId::Deg6A1, 6),
            Err(FamilyError::NotPrimePower(6))
        ));
    }

    #[test]
    fn class_groups_match_all_families() {
        for id in FamilyId::ALL {
            let report = crate::lattice::class_group_report(&id.lattice_descriptor())
                .unwrap_or_else(|e| panic!("{}: {e}", id.name()));
            assert!(
                id.expected_class_group().matches(&report),
                "{}: got {report:?}",
                id.name()
            );
        }
    }

    #[test]
    fn deg6_a1_matrix_structure() {
        let inst = build_instance(FamilyId::Deg6A1, 3, &BuildOptions::default()).unwrap();
        assert_eq!(inst.n(), 10);
        assert_eq!(inst.k(), 7);
        // last column is the contracted representative: first six sections
        // vanish on the line, the cubic section does not
        let last = inst.plan.last().unwrap();
        assert!(matches!(last, EvalColumn::Contracted { curve: "l123", .. }));
        for i in 0..6 {
            assert!(inst.entry(i, last).is_zero());
        }
        assert!(!inst.entry(6, last).is_zero());
        assert!(validate_instance(&inst).is_ok());
    }

    #[test]
    fn builders_are_deterministic() {
        for (id, q) in [
            (FamilyId::Deg6A1, 3),
            (FamilyId::Deg52A1, 2),
            (FamilyId::Deg44A1, 3),
            (FamilyId::Deg4D5, 3),
            (FamilyId::Deg33A2, 2),
        ] {
            let a = build_instance(id, q, &BuildOptions::default()).unwrap();
            let b = build_instance(id, q, &BuildOptions::default()).unwrap();
            assert_eq!(a.constants, b.constants);
            assert_eq!(a.sections.len(), b.sections.len());
            for (x, y) in a.sections.iter().zip(&b.sections) {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn all_families_validate_small_q() {
        for id in FamilyId::ALL {
            for q in [2u64, 3, 4] {
                if id.excluded_q().contains(&q) {
                    continue;
                }
                let inst = build_instance(id, q, &BuildOptions::default())
                    .unwrap_or_else(|e| panic!("{} q={q}: {e}", id.name()));
                let report = validate_instance(&inst);
                assert!(
                    report.is_ok(),
                    "{} q={q}: {:#?}",
                    id.name(),
                    report
                        .checks
                        .iter()
                        .filter(|c| !c.pass)
                        .collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn solver_agrees_with_explicit_bases() {
        // families with independent interpolation conditions: the solver
        // space and the closed-form basis must span the same space
        for q in [2u64, 3, 4] {
            let inst = build_instance(FamilyId::Deg52A1, q, &BuildOptions::default()).unwrap();
            let conds = deg5_2a1_conditions(&inst).unwrap();
            assert_spans_match(&inst, &linear_system(&inst.sub, 3, &conds).unwrap());

            let inst = build_instance(FamilyId::Deg4D5, q, &BuildOptions::default()).unwrap();
            let conds = deg4_d5_conditions(&inst).unwrap();
            assert_spans_match(&inst, &linear_system(&inst.sub, 3, &conds).unwrap());

            let inst = build_instance(FamilyId::Deg33A2, q, &BuildOptions::default()).unwrap();
            let conds = deg3_3a2_conditions(&inst).unwrap();
            assert_spans_match(&inst, &linear_system(&inst.sub, 3, &conds).unwrap());
        }
        for q in [4u64, 5] {
            let inst = build_instance(FamilyId::Deg4A1, q, &BuildOptions::default()).unwrap();
            let conds = deg4_a1_conditions(&inst).unwrap();
            assert_spans_match(&inst, &linear_system(&inst.sub, 4, &conds).unwrap());
        }
    }

    fn assert_spans_match(inst: &CodeInstance, solved: &[Form]) {
        let rows = |fs: &[Form]| fs.iter().map(|f| f.coeffs().to_vec()).collect::<Vec<_>>();
        let a = rows(&inst.sections);
        let b = rows(solved);
        let ra = matrix_rank(&a);
        let rb = matrix_rank(&b);
        let mut all = a;
        all.extend(b);
        assert_eq!(ra, inst.sections.len(), "{}", inst.id.name());
        assert_eq!(rb, ra, "{}", inst.id.name());
        assert_eq!(matrix_rank(&all), ra, "{}", inst.id.name());
    }

    #[test]
    fn deg4_d5_rejects_bad_options() {
        let opts = BuildOptions {
            alpha: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            build_instance(FamilyId::Deg4D5, 3, &opts),
            Err(FamilyError::BadOption(_))
        ));
        let opts = BuildOptions {
            alpha: Some(7),
            ..Default::default()
        };
        assert!(build_instance(FamilyId::Deg4D5, 3, &opts).is_err());
        let opts = BuildOptions {
            alpha: Some(2),
            ..Default::default()
        };
        assert!(matches!(
            build_instance(FamilyId::Deg6A1, 3, &opts),
            Err(FamilyError::BadOption(_))
        ));
    }

    #[test]
    fn deg4_d5_exceptional_columns_match_reference_functional() {
        let inst = build_instance(
            FamilyId::Deg4D5,
            5,
            &BuildOptions {
                alpha: Some(2),
                beta: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        let f = inst.field();
        let alpha = f.from_code(2);
        let beta = f.from_code(3);
        // for the section basis the functional is
        // (-beta^2 u + alpha v, 0, alpha u, 0, 0)
        for col in &inst.plan {
            if let EvalColumn::Exceptional { u, v } = col {
                let expect0 = &(&-&(&beta * &beta) * u) + &(&alpha * v);
                assert_eq!(inst.entry(0, col), expect0);
                assert!(inst.entry(1, col).is_zero());
                assert_eq!(inst.entry(2, col), &alpha * u);
                assert!(inst.entry(3, col).is_zero());
                assert!(inst.entry(4, col).is_zero());
            }
        }
        // q+1 exceptional columns
        let count = inst
            .plan
            .iter()
            .filter(|c| matches!(c, EvalColumn::Exceptional { .. }))
            .count();
        assert_eq!(count, 6);
    }
}
