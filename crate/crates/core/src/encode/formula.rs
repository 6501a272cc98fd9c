use std::fmt;
use std::ops::Not;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Integer PB terms, constant and the scale that produced them.
type IntegerTerms = (Vec<(BigInt, Lit)>, BigInt, BigInt);

/// Signed variable reference: `+v` is the variable, `-v` its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        assert!(var >= 1 && var <= i32::MAX as u32, "variable ids start at 1");
        Lit(if positive { var as i32 } else { -(var as i32) })
    }

    pub fn pos(var: u32) -> Lit {
        Lit::new(var, true)
    }

    pub fn from_dimacs(v: i32) -> Lit {
        assert!(v != 0);
        Lit(v)
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    /// Truth value under an assignment indexed by variable id.
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var() as usize] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Eq => "=",
        }
    }
}

/// `Σ coef·lit (rel) bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PBConstraint {
    pub terms: Vec<(i64, Lit)>,
    pub relation: Relation,
    pub bound: i64,
}

impl PBConstraint {
    pub fn new(terms: Vec<(i64, Lit)>, relation: Relation, bound: i64) -> Result<Self> {
        let mut vars: Vec<u32> = terms.iter().map(|(_, l)| l.var()).collect();
        vars.sort_unstable();
        if vars.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::EncodingUnsupported(
                "duplicate variable within a PB constraint".into(),
            ));
        }
        Ok(PBConstraint { terms, relation, bound })
    }

    pub fn at_most(lits: &[Lit], k: i64) -> Self {
        PBConstraint {
            terms: lits.iter().map(|&l| (1, l)).collect(),
            relation: Relation::Le,
            bound: k,
        }
    }

    pub fn at_least(lits: &[Lit], k: i64) -> Self {
        PBConstraint {
            terms: lits.iter().map(|&l| (1, l)).collect(),
            relation: Relation::Ge,
            bound: k,
        }
    }

    pub fn exactly(lits: &[Lit], k: i64) -> Self {
        PBConstraint {
            terms: lits.iter().map(|&l| (1, l)).collect(),
            relation: Relation::Eq,
            bound: k,
        }
    }

    pub fn holds(&self, assignment: &[bool]) -> bool {
        let lhs: i128 = self
            .terms
            .iter()
            .filter(|(_, l)| l.eval(assignment))
            .map(|(c, _)| *c as i128)
            .sum();
        let b = self.bound as i128;
        match self.relation {
            Relation::Ge => lhs >= b,
            Relation::Le => lhs <= b,
            Relation::Eq => lhs == b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CopyTag {
    X,
    Y,
}

impl CopyTag {
    fn slot(self) -> usize {
        match self {
            CopyTag::X => 0,
            CopyTag::Y => 1,
        }
    }
}

impl fmt::Display for CopyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CopyTag::X => "x",
            CopyTag::Y => "y",
        })
    }
}

/// How one feature of one copy is represented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureVars {
    /// Single-valued domain; nothing to decide.
    Constant,
    /// One variable, true for level 1.
    Binary(u32),
    /// One variable per categorical value, exactly one true.
    OneHot(Vec<u32>),
    /// Little-endian binary representation of the level index.
    Bits(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarRole {
    Input { copy: CopyTag, feature: usize },
    Class { copy: CopyTag, class: usize },
    Aux,
}

/// Bookkeeping from features and classes to solver variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarMap {
    roles: Vec<VarRole>,
    inputs: [Option<Vec<FeatureVars>>; 2],
    classes: [Option<Vec<Lit>>; 2],
    truth: Option<u32>,
}

impl VarMap {
    pub fn num_vars(&self) -> u32 {
        self.roles.len() as u32
    }

    pub fn role(&self, var: u32) -> Option<&VarRole> {
        self.roles.get(var.checked_sub(1)? as usize)
    }

    pub fn inputs(&self, copy: CopyTag) -> Option<&[FeatureVars]> {
        self.inputs[copy.slot()].as_deref()
    }

    pub fn classes(&self, copy: CopyTag) -> Option<&[Lit]> {
        self.classes[copy.slot()].as_deref()
    }

    pub(crate) fn set_inputs(&mut self, copy: CopyTag, vars: Vec<FeatureVars>) {
        self.inputs[copy.slot()] = Some(vars);
    }

    pub(crate) fn set_classes(&mut self, copy: CopyTag, lits: Vec<Lit>) {
        self.classes[copy.slot()] = Some(lits);
    }

    /// Variables standing for input features of either copy.
    pub fn input_vars(&self) -> Vec<u32> {
        (1..=self.num_vars())
            .filter(|&v| matches!(self.role(v), Some(VarRole::Input { .. })))
            .collect()
    }
}

/// Mixed clausal and pseudo-Boolean constraint set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Formula {
    pub clauses: Vec<Vec<Lit>>,
    pub pb: Vec<PBConstraint>,
    pub varmap: VarMap,
}

/// Rational affine expression over literals: `constant + Σ coef·lit`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub constant: BigRational,
    pub terms: Vec<(BigRational, Lit)>,
}

impl LinExpr {
    pub fn constant(c: BigRational) -> Self {
        LinExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, factor: &BigRational) {
        self.constant += &other.constant * factor;
        for (c, l) in &other.terms {
            self.terms.push((c * factor, *l));
        }
    }

    pub fn add_term(&mut self, coef: BigRational, lit: Lit) {
        self.terms.push((coef, lit));
    }
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Formula {
    pub fn new() -> Self {
        Formula::default()
    }

    pub fn num_vars(&self) -> u32 {
        self.varmap.num_vars()
    }

    pub fn new_var(&mut self, role: VarRole) -> u32 {
        self.varmap.roles.push(role);
        self.varmap.roles.len() as u32
    }

    pub fn new_aux(&mut self) -> Lit {
        Lit::pos(self.new_var(VarRole::Aux))
    }

    /// A literal fixed to true.
    pub fn true_lit(&mut self) -> Lit {
        if let Some(v) = self.varmap.truth {
            return Lit::pos(v);
        }
        let v = self.new_var(VarRole::Aux);
        self.varmap.truth = Some(v);
        self.clauses.push(vec![Lit::pos(v)]);
        Lit::pos(v)
    }

    pub fn false_lit(&mut self) -> Lit {
        !self.true_lit()
    }

    pub fn add_clause(&mut self, lits: Vec<Lit>) {
        debug_assert!(lits.iter().all(|l| l.var() <= self.num_vars()));
        self.clauses.push(lits);
    }

    pub fn add_pb(&mut self, c: PBConstraint) {
        debug_assert!(c.terms.iter().all(|(_, l)| l.var() <= self.num_vars()));
        self.pb.push(c);
    }

    /// Checks every clause and PB constraint; `assignment[v]` is the value
    /// of variable `v` (index 0 unused).
    pub fn check(&self, assignment: &[bool]) -> bool {
        assignment.len() > self.num_vars() as usize
            && self.clauses.iter().all(|c| c.iter().any(|l| l.eval(assignment)))
            && self.pb.iter().all(|c| c.holds(assignment))
    }

    pub fn and_gate(&mut self, lits: &[Lit]) -> Lit {
        match lits {
            [] => self.true_lit(),
            [l] => *l,
            _ => {
                let g = self.new_aux();
                let mut long = vec![g];
                for &l in lits {
                    self.clauses.push(vec![!g, l]);
                    long.push(!l);
                }
                self.clauses.push(long);
                g
            }
        }
    }

    pub fn or_gate(&mut self, lits: &[Lit]) -> Lit {
        let negated: Vec<Lit> = lits.iter().map(|&l| !l).collect();
        !self.and_gate(&negated)
    }

    pub fn xor_gate(&mut self, a: Lit, b: Lit) -> Lit {
        let g = self.new_aux();
        self.clauses.push(vec![!g, a, b]);
        self.clauses.push(vec![!g, !a, !b]);
        self.clauses.push(vec![g, !a, b]);
        self.clauses.push(vec![g, a, !b]);
        g
    }

    /// Scales a rational expression to integer PB terms over distinct
    /// variables. Returns `(terms, constant, scale)` with
    /// `expr·scale = Σ terms + constant`.
    fn integer_terms(expr: &LinExpr) -> Result<IntegerTerms> {
        let mut scale = BigInt::one();
        for (c, _) in &expr.terms {
            scale = scale.lcm(c.denom());
        }
        scale = scale.lcm(expr.constant.denom());
        let mut by_var: Vec<(u32, BigInt)> = Vec::new();
        let mut constant = (&expr.constant * BigRational::from_integer(scale.clone())).to_integer();
        for (c, l) in &expr.terms {
            let coef = (c * BigRational::from_integer(scale.clone())).to_integer();
            // a·¬v = a - a·v
            let (v, signed) = if l.is_positive() {
                (l.var(), coef)
            } else {
                constant += &coef;
                (l.var(), -coef)
            };
            match by_var.iter_mut().find(|(x, _)| *x == v) {
                Some(entry) => entry.1 += signed,
                None => by_var.push((v, signed)),
            }
        }
        let terms = by_var
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(v, c)| (c, Lit::pos(v)))
            .collect();
        Ok((terms, constant, scale))
    }

    fn to_i64(v: &BigInt) -> Result<i64> {
        v.to_i64()
            .filter(|x| x.unsigned_abs() < (1u64 << 61))
            .ok_or_else(|| Error::EncodingUnsupported(format!("PB coefficient {v} exceeds the supported range")))
    }

    /// Integer form of `expr >= bound` (or `>` when `strict`):
    /// `Σ terms >= b` over distinct positive literals.
    fn ge_form(expr: &LinExpr, bound: &BigRational, strict: bool) -> Result<(Vec<(i64, Lit)>, i64)> {
        let mut e = expr.clone();
        e.constant -= bound;
        let (terms, constant, _) = Self::integer_terms(&e)?;
        let mut b = -constant;
        if strict {
            b += 1;
        }
        let terms = terms
            .iter()
            .map(|(c, l)| Ok((Self::to_i64(c)?, *l)))
            .collect::<Result<Vec<_>>>()?;
        Ok((terms, Self::to_i64(&b)?))
    }

    /// Asserts `expr >= bound` (`>` when `strict`).
    pub fn add_ge(&mut self, expr: &LinExpr, bound: &BigRational, strict: bool) -> Result<()> {
        let (terms, b) = Self::ge_form(expr, bound, strict)?;
        self.add_pb(PBConstraint {
            terms,
            relation: Relation::Ge,
            bound: b,
        });
        Ok(())
    }

    /// Asserts `expr <= bound` (`<` when `strict`).
    pub fn add_le(&mut self, expr: &LinExpr, bound: &BigRational, strict: bool) -> Result<()> {
        let mut neg = LinExpr::default();
        neg.add_scaled(expr, &-BigRational::one());
        self.add_ge(&neg, &-bound.clone(), strict)
    }

    /// Literal equivalent to `expr >= bound` (`>` when `strict`).
    pub fn reify_ge(&mut self, expr: &LinExpr, bound: &BigRational, strict: bool) -> Result<Lit> {
        let (terms, b) = Self::ge_form(expr, bound, strict)?;
        let min: i64 = terms.iter().map(|(c, _)| (*c).min(0)).sum();
        let max: i64 = terms.iter().map(|(c, _)| (*c).max(0)).sum();
        if b <= min {
            return Ok(self.true_lit());
        }
        if b > max {
            return Ok(self.false_lit());
        }
        let out = self.new_aux();
        // out → Σ >= b
        let mut fwd = terms.clone();
        fwd.push((b - min, !out));
        self.add_pb(PBConstraint {
            terms: fwd,
            relation: Relation::Ge,
            bound: b,
        });
        // ¬out → Σ <= b - 1
        let mut bwd: Vec<(i64, Lit)> = terms.iter().map(|(c, l)| (-c, *l)).collect();
        bwd.push((max - b + 1, out));
        self.add_pb(PBConstraint {
            terms: bwd,
            relation: Relation::Ge,
            bound: 1 - b,
        });
        Ok(out)
    }

    pub fn reify_le(&mut self, expr: &LinExpr, bound: &BigRational, strict: bool) -> Result<Lit> {
        let mut neg = LinExpr::default();
        neg.add_scaled(expr, &-BigRational::one());
        self.reify_ge(&neg, &-bound.clone(), strict)
    }

    pub fn reify_eq(&mut self, expr: &LinExpr, bound: &BigRational) -> Result<Lit> {
        let ge = self.reify_ge(expr, bound, false)?;
        let le = self.reify_le(expr, bound, false)?;
        Ok(self.and_gate(&[ge, le]))
    }
}

/// Convenience for integer-valued expressions.
pub fn int_expr(constant: i64, terms: impl IntoIterator<Item = (i64, Lit)>) -> LinExpr {
    LinExpr {
        constant: int(constant),
        terms: terms.into_iter().map(|(c, l)| (int(c), l)).collect(),
    }
}
