//! Pseudo-Boolean to CNF translation.
//!
//! Every constraint is first brought to `Σ a·l >= B` with positive
//! coefficients. Literals whose coefficient reaches `B` on their own act as
//! guards: the constraint is `guard ∨ rest >= B`, so each clause the rest
//! produces for an *overflow* gets the guards appended. That makes the
//! big-M pattern used for reified constraints cost no more than the plain
//! constraint.
//!
//! Strategy for the rest:
//! * a single clause when any remaining literal suffices,
//! * pairwise clauses for at-most-one over few literals,
//! * a sequential (weight) counter, counting either up to `B` or up to the
//!   slack `W - B`, whichever is smaller,
//! * a binary adder network with a comparator when the counter would be too
//!   large (big coefficients).
//!
//! All auxiliaries are either functionally defined or only constrained
//! upward, so the projected model count over the original variables is
//! unchanged.

use super::formula::{Lit, PBConstraint, Relation};

/// Largest counter (literals × counter width) before falling back to adders.
pub const COUNTER_LIMIT: i128 = 2_048;
/// At-most-one over at most this many literals uses the pairwise encoding.
pub const PAIRWISE_LIMIT: usize = 8;

struct Sink<'a> {
    next_var: &'a mut u32,
    clauses: Vec<Vec<Lit>>,
}

impl Sink<'_> {
    fn fresh(&mut self) -> Lit {
        *self.next_var += 1;
        Lit::pos(*self.next_var)
    }

    fn push(&mut self, c: Vec<Lit>) {
        self.clauses.push(c);
    }

    /// Clause that fires when the constraint would be violated; the guards
    /// can still rescue it.
    fn push_guarded(&mut self, mut c: Vec<Lit>, guards: &[Lit]) {
        c.extend_from_slice(guards);
        self.clauses.push(c);
    }
}

/// Translates one PB constraint into clauses. Fresh variables are numbered
/// from `*next_var + 1`, and `*next_var` is advanced past them.
pub fn pb_to_cnf(c: &PBConstraint, next_var: &mut u32) -> Vec<Vec<Lit>> {
    let mut sink = Sink {
        next_var,
        clauses: Vec::new(),
    };
    let terms: Vec<(i128, Lit)> = c.terms.iter().map(|&(a, l)| (a as i128, l)).collect();
    let b = c.bound as i128;
    let negated = || terms.iter().map(|&(a, l)| (-a, l)).collect::<Vec<_>>();
    match c.relation {
        Relation::Ge => encode_ge(&terms, b, &mut sink),
        Relation::Le => encode_ge(&negated(), -b, &mut sink),
        Relation::Eq => {
            encode_ge(&terms, b, &mut sink);
            encode_ge(&negated(), -b, &mut sink);
        }
    }
    sink.clauses
}

/// Normal form: positive coefficients over distinct variables, bound
/// adjusted, coefficients clipped to the bound.
fn normalize(terms: &[(i128, Lit)], bound: i128) -> (Vec<(i128, Lit)>, i128) {
    let mut merged: Vec<(u32, i128)> = Vec::new();
    let mut b = bound;
    for &(a, l) in terms {
        let (v, coef) = if l.is_positive() {
            (l.var(), a)
        } else {
            b -= a;
            (l.var(), -a)
        };
        match merged.iter_mut().find(|(x, _)| *x == v) {
            Some(e) => e.1 += coef,
            None => merged.push((v, coef)),
        }
    }
    let mut out = Vec::with_capacity(merged.len());
    for (v, a) in merged {
        if a > 0 {
            out.push((a, Lit::pos(v)));
        } else if a < 0 {
            b += -a;
            out.push((-a, !Lit::pos(v)));
        }
    }
    if b > 0 {
        for t in &mut out {
            t.0 = t.0.min(b);
        }
    }
    (out, b)
}

fn encode_ge(terms: &[(i128, Lit)], bound: i128, sink: &mut Sink) {
    let (terms, b) = normalize(terms, bound);
    if b <= 0 {
        return;
    }
    let total: i128 = terms.iter().map(|t| t.0).sum();
    if total < b {
        sink.push(Vec::new());
        return;
    }
    let guards: Vec<Lit> = terms.iter().filter(|t| t.0 >= b).map(|t| t.1).collect();
    let rest: Vec<(i128, Lit)> = terms.iter().filter(|t| t.0 < b).copied().collect();
    let rest_total: i128 = rest.iter().map(|t| t.0).sum();
    if rest_total < b {
        sink.push(guards);
        return;
    }
    let min_coef = rest.iter().map(|t| t.0).min().unwrap();
    if rest.iter().all(|t| t.0 == min_coef) {
        let k = (b + min_coef - 1) / min_coef;
        let lits: Vec<Lit> = rest.iter().map(|t| t.1).collect();
        return encode_card_ge(&lits, k as usize, &guards, sink);
    }
    let n = rest.len() as i128;
    let slack = rest_total - b;
    if n * b.min(slack) <= COUNTER_LIMIT {
        if b <= slack {
            counter_at_least(&rest, b, &guards, sink);
        } else {
            let flipped: Vec<(i128, Lit)> = rest.iter().map(|&(a, l)| (a, !l)).collect();
            counter_at_most(&flipped, slack, &guards, sink);
        }
    } else {
        adder_ge(&rest, b, &guards, sink);
    }
}

/// `Σ lits >= k` with `1 <= k <= lits.len()`.
fn encode_card_ge(lits: &[Lit], k: usize, guards: &[Lit], sink: &mut Sink) {
    let n = lits.len();
    if k == 1 {
        sink.push_guarded(lits.to_vec(), guards);
        return;
    }
    let at_most = n - k;
    let negated: Vec<Lit> = lits.iter().map(|&l| !l).collect();
    if at_most == 0 {
        for &l in lits {
            sink.push_guarded(vec![l], guards);
        }
    } else if at_most == 1 && n <= PAIRWISE_LIMIT {
        for i in 0..n {
            for j in i + 1..n {
                sink.push_guarded(vec![!negated[i], !negated[j]], guards);
            }
        }
    } else if (n as i128) * (k.min(at_most) as i128) <= COUNTER_LIMIT {
        let unit = |ls: &[Lit]| ls.iter().map(|&l| (1i128, l)).collect::<Vec<_>>();
        if k <= at_most {
            counter_at_least(&unit(lits), k as i128, guards, sink);
        } else {
            counter_at_most(&unit(&negated), at_most as i128, guards, sink);
        }
    } else {
        let unit: Vec<(i128, Lit)> = lits.iter().map(|&l| (1, l)).collect();
        adder_ge(&unit, k as i128, guards, sink);
    }
}

/// Sequential weight counter for `Σ a·l <= k`: `s[i][j]` holds when the
/// prefix `0..=i` sums to more than `j` (1-based `j`, so `s[i][j-1]`).
fn counter_at_most(terms: &[(i128, Lit)], k: i128, guards: &[Lit], sink: &mut Sink) {
    let k = k as usize;
    if k == 0 {
        for &(_, l) in terms {
            sink.push_guarded(vec![!l], guards);
        }
        return;
    }
    let mut prev: Vec<Lit> = Vec::new();
    for (i, &(a, x)) in terms.iter().enumerate() {
        let a = a as usize;
        if a > k {
            sink.push_guarded(vec![!x], guards);
        }
        let last = i + 1 == terms.len();
        let cur: Vec<Lit> = if last {
            Vec::new()
        } else {
            (0..k).map(|_| sink.fresh()).collect()
        };
        if !last {
            for &c in cur.iter().take(a.min(k)) {
                sink.push(vec![!x, c]);
            }
            for (&p, &c) in prev.iter().zip(&cur) {
                sink.push(vec![!p, c]);
            }
        }
        for (j, &p) in prev.iter().enumerate() {
            // prefix sum >= j+1 and x adds a: sum >= j+1+a
            let target = j + a;
            if target < k {
                if !last {
                    sink.push(vec![!x, !p, cur[target]]);
                }
            } else {
                sink.push_guarded(vec![!x, !p], guards);
            }
        }
        prev = cur;
    }
}

/// Weighted counter for `Σ a·l >= b`: `t[i][j]` may only hold when the
/// prefix `0..=i` reaches `j+1`; the last row must reach `b`.
fn counter_at_least(terms: &[(i128, Lit)], b: i128, guards: &[Lit], sink: &mut Sink) {
    let b = b as usize;
    let mut prev: Vec<Lit> = Vec::new();
    for &(a, x) in terms {
        let a = a as usize;
        let cur: Vec<Lit> = (0..b).map(|_| sink.fresh()).collect();
        for j in 0..b {
            // t[i][j] → t[i-1][j] ∨ (x ∧ t[i-1][j-a]); t[-1][_] is false
            // and t[_][negative] is true.
            match prev.get(j) {
                Some(&p) => {
                    sink.push(vec![!cur[j], p, x]);
                    if j >= a {
                        sink.push(vec![!cur[j], p, prev[j - a]]);
                    }
                }
                None => {
                    sink.push(vec![!cur[j], x]);
                    if j >= a {
                        sink.push(vec![!cur[j]]);
                    }
                }
            }
        }
        prev = cur;
    }
    sink.push_guarded(vec![prev[b - 1]], guards);
}

#[derive(Clone, Copy)]
enum Bit {
    Const(bool),
    Var(Lit),
}

fn and2(a: Bit, b: Bit, sink: &mut Sink) -> Bit {
    match (a, b) {
        (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::Const(false),
        (Bit::Const(true), x) | (x, Bit::Const(true)) => x,
        (Bit::Var(x), Bit::Var(y)) => {
            let g = sink.fresh();
            sink.push(vec![!g, x]);
            sink.push(vec![!g, y]);
            sink.push(vec![g, !x, !y]);
            Bit::Var(g)
        }
    }
}

fn or2(a: Bit, b: Bit, sink: &mut Sink) -> Bit {
    match (a, b) {
        (Bit::Const(true), _) | (_, Bit::Const(true)) => Bit::Const(true),
        (Bit::Const(false), x) | (x, Bit::Const(false)) => x,
        (Bit::Var(x), Bit::Var(y)) => {
            let g = sink.fresh();
            sink.push(vec![g, !x]);
            sink.push(vec![g, !y]);
            sink.push(vec![!g, x, y]);
            Bit::Var(g)
        }
    }
}

fn full_adder(a: Lit, b: Lit, c: Lit, sink: &mut Sink) -> (Lit, Lit) {
    let s = sink.fresh();
    let carry = sink.fresh();
    for mask in 0u8..8 {
        let pick = |bit: u8, l: Lit| if mask >> bit & 1 == 1 { !l } else { l };
        let parity = mask.count_ones() % 2 == 1;
        // inputs (a,b,c) with values given by mask; clause excludes the
        // wrong sum value for that input combination.
        let clause = vec![pick(0, a), pick(1, b), pick(2, c), if parity { s } else { !s }];
        sink.push(clause);
    }
    sink.push(vec![!a, !b, carry]);
    sink.push(vec![!a, !c, carry]);
    sink.push(vec![!b, !c, carry]);
    sink.push(vec![a, b, !carry]);
    sink.push(vec![a, c, !carry]);
    sink.push(vec![b, c, !carry]);
    (s, carry)
}

fn half_adder(a: Lit, b: Lit, sink: &mut Sink) -> (Lit, Lit) {
    let s = sink.fresh();
    let carry = sink.fresh();
    sink.push(vec![!s, a, b]);
    sink.push(vec![!s, !a, !b]);
    sink.push(vec![s, !a, b]);
    sink.push(vec![s, a, !b]);
    sink.push(vec![!carry, a]);
    sink.push(vec![!carry, b]);
    sink.push(vec![carry, !a, !b]);
    (s, carry)
}

/// Adder network computing `Σ a·l` in binary, then `sum >= b`.
fn adder_ge(terms: &[(i128, Lit)], b: i128, guards: &[Lit], sink: &mut Sink) {
    let mut buckets: Vec<std::collections::VecDeque<Lit>> = Vec::new();
    for &(a, l) in terms {
        let mut bit = 0;
        let mut a = a;
        while a > 0 {
            if a & 1 == 1 {
                if buckets.len() <= bit {
                    buckets.resize_with(bit + 1, Default::default);
                }
                buckets[bit].push_back(l);
            }
            a >>= 1;
            bit += 1;
        }
    }
    let mut sum_bits: Vec<Bit> = Vec::new();
    let mut i = 0;
    while i < buckets.len() {
        while buckets[i].len() >= 2 {
            let (s, c) = if buckets[i].len() >= 3 {
                let x = buckets[i].pop_front().unwrap();
                let y = buckets[i].pop_front().unwrap();
                let z = buckets[i].pop_front().unwrap();
                full_adder(x, y, z, sink)
            } else {
                let x = buckets[i].pop_front().unwrap();
                let y = buckets[i].pop_front().unwrap();
                half_adder(x, y, sink)
            };
            buckets[i].push_back(s);
            if buckets.len() <= i + 1 {
                buckets.resize_with(i + 2, Default::default);
            }
            buckets[i + 1].push_back(c);
        }
        sum_bits.push(match buckets[i].front() {
            Some(&l) => Bit::Var(l),
            None => Bit::Const(false),
        });
        i += 1;
    }
    let width = sum_bits.len().max(128 - b.leading_zeros() as usize);
    let mut ge = Bit::Const(true);
    for j in 0..width {
        let s = sum_bits.get(j).copied().unwrap_or(Bit::Const(false));
        ge = if b >> j & 1 == 1 {
            and2(s, ge, sink)
        } else {
            or2(s, ge, sink)
        };
    }
    match ge {
        Bit::Const(true) => {}
        Bit::Const(false) => sink.push_guarded(Vec::new(), guards),
        Bit::Var(r) => sink.push_guarded(vec![r], guards),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Number of assignments to the `n` original variables that extend to
    /// a model of `clauses` (brute force over the auxiliaries as well).
    fn projected_count(n: u32, total: u32, clauses: &[Vec<Lit>]) -> usize {
        let aux = total - n;
        assert!(total <= 22, "too many variables for brute force");
        (0u64..1 << n)
            .filter(|&m| {
                (0u64..1 << aux).any(|x| {
                    let mut a = vec![false];
                    a.extend((0..n).map(|i| m >> i & 1 == 1));
                    a.extend((0..aux).map(|i| x >> i & 1 == 1));
                    clauses.iter().all(|c| c.iter().any(|l| l.eval(&a)))
                })
            })
            .count()
    }

    fn direct_count(n: u32, c: &PBConstraint) -> usize {
        (0u64..1 << n)
            .filter(|&m| {
                let mut a = vec![false];
                a.extend((0..n).map(|i| m >> i & 1 == 1));
                c.holds(&a)
            })
            .count()
    }

    fn lits(n: u32) -> Vec<Lit> {
        (1..=n).map(Lit::pos).collect()
    }

    #[test]
    fn at_most_one_of_three_is_pairwise() {
        let mut next = 3;
        let cnf = pb_to_cnf(&PBConstraint::at_most(&lits(3), 1), &mut next);
        assert_eq!(cnf.len(), 3);
        assert!(cnf.iter().all(|c| c.len() == 2 && c.iter().all(|l| !l.is_positive())));
        assert_eq!(next, 3);
    }

    #[test]
    fn at_most_two_of_five_counts_sixteen() {
        let mut next = 5;
        let c = PBConstraint::at_most(&lits(5), 2);
        let cnf = pb_to_cnf(&c, &mut next);
        assert_eq!(projected_count(5, next, &cnf), 16);
    }

    #[test]
    fn trivial_bound_gives_no_clauses() {
        let mut next = 4;
        let c = PBConstraint {
            terms: vec![(3, Lit::pos(1)), (1, Lit::pos(2)), (5, !Lit::pos(3))],
            relation: Relation::Ge,
            bound: 0,
        };
        assert!(pb_to_cnf(&c, &mut next).is_empty());
    }

    #[test]
    fn infeasible_gives_empty_clause() {
        let mut next = 2;
        let c = PBConstraint::at_least(&lits(2), 3);
        assert_eq!(pb_to_cnf(&c, &mut next), vec![Vec::<Lit>::new()]);
    }

    /// Small deterministic generator so the exhaustive check below covers
    /// many coefficient shapes.
    fn lcg(state: &mut u64) -> u64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        *state >> 33
    }

    #[test]
    fn projected_counts_preserved_on_random_constraints() {
        let mut st = 7u64;
        for round in 0..300 {
            let n = 1 + (lcg(&mut st) % 6) as u32;
            let max_coef = [1, 2, 5, 40][round % 4];
            let terms: Vec<(i64, Lit)> = (1..=n)
                .map(|v| {
                    let a = 1 + (lcg(&mut st) % max_coef) as i64;
                    let a = if lcg(&mut st).is_multiple_of(3) { -a } else { a };
                    (a, Lit::new(v, lcg(&mut st).is_multiple_of(2)))
                })
                .collect();
            let span: i64 = terms.iter().map(|t| t.0.abs()).sum();
            let bound = (lcg(&mut st) % (2 * span as u64 + 1)) as i64 - span;
            let relation = [Relation::Ge, Relation::Le, Relation::Eq][(lcg(&mut st) % 3) as usize];
            let c = PBConstraint { terms, relation, bound };
            let mut next = n;
            let cnf = pb_to_cnf(&c, &mut next);
            if next > 22 {
                continue;
            }
            assert_eq!(projected_count(n, next, &cnf), direct_count(n, &c), "{c:?}");
        }
    }

    #[test]
    fn adder_path_preserves_counts() {
        let mut st = 11u64;
        for _ in 0..60 {
            let n = 2 + (lcg(&mut st) % 3) as u32;
            let terms: Vec<(i128, Lit)> = (1..=n).map(|v| (1 + (lcg(&mut st) % 9) as i128, Lit::pos(v))).collect();
            let total: i128 = terms.iter().map(|t| t.0).sum();
            let b = 1 + (lcg(&mut st) as i128 % total);
            let mut next = n;
            let mut sink = Sink {
                next_var: &mut next,
                clauses: Vec::new(),
            };
            adder_ge(&terms, b, &[], &mut sink);
            let cnf = sink.clauses;
            if next > 22 {
                continue;
            }
            let c = PBConstraint {
                terms: terms.iter().map(|&(a, l)| (a as i64, l)).collect(),
                relation: Relation::Ge,
                bound: b as i64,
            };
            assert_eq!(projected_count(n, next, &cnf), direct_count(n, &c), "{c:?}");
        }
    }

    #[test]
    fn guard_literal_relaxes_constraint() {
        // x4 ∨ (x1 + x2 + x3 >= 2), written in big-M form.
        let c = PBConstraint {
            terms: vec![(1, Lit::pos(1)), (1, Lit::pos(2)), (1, Lit::pos(3)), (2, Lit::pos(4))],
            relation: Relation::Ge,
            bound: 2,
        };
        let mut next = 4;
        let cnf = pb_to_cnf(&c, &mut next);
        assert_eq!(projected_count(4, next, &cnf), direct_count(4, &c));
    }
}
