//! Conflict-driven clause learning over plain clauses.
//!
//! Two watched literals with blockers, first-UIP learning with local
//! minimization, VSIDS branching (ties broken by variable index), phase
//! saving, Luby restarts and LBD-guided learnt-clause reduction. Search is
//! fully deterministic for a given clause order.

use std::time::Instant;

use crate::encode::Lit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    pub conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
}

type CRef = u32;

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

#[derive(Clone, Copy)]
struct L(u32);

impl L {
    fn from_lit(l: Lit) -> L {
        L(l.var() * 2 + u32::from(!l.is_positive()))
    }
    fn to_lit(self) -> Lit {
        Lit::new(self.0 >> 1, self.0 & 1 == 0)
    }
    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }
    fn neg(self) -> L {
        L(self.0 ^ 1)
    }
    fn idx(self) -> usize {
        self.0 as usize
    }
    fn sign(self) -> bool {
        self.0 & 1 == 1
    }
}

impl PartialEq for L {
    fn eq(&self, o: &L) -> bool {
        self.0 == o.0
    }
}

struct Clause {
    lits: Vec<L>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: L,
}

/// Indexed max-heap on variable activity.
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn better(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] >= 0
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if !Self::better(act, v, self.heap[p]) {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = i as i32;
            i = p;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && Self::better(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !Self::better(act, self.heap[c], v) {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = i as i32;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = i as i32;
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }
}

pub struct Solver {
    num_vars: u32,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    trail: Vec<L>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    num_learnts: usize,
    max_learnts: usize,
    model: Vec<bool>,
    pub stats: Stats,
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            num_vars: 0,
            clauses: Vec::new(),
            watches: vec![Vec::new(), Vec::new()],
            assigns: vec![UNDEF],
            level: vec![0],
            reason: vec![None],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0],
            var_inc: 1.0,
            cla_inc: 1.0,
            heap: VarHeap {
                heap: Vec::new(),
                pos: vec![-1],
            },
            phase: vec![false],
            seen: vec![false],
            ok: true,
            num_learnts: 0,
            max_learnts: 4000,
            model: Vec::new(),
            stats: Stats::default(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn reserve_vars(&mut self, n: u32) {
        while self.num_vars < n {
            self.num_vars += 1;
            let v = self.num_vars;
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            self.assigns.push(UNDEF);
            self.level.push(0);
            self.reason.push(None);
            self.activity.push(0.0);
            self.phase.push(false);
            self.seen.push(false);
            self.heap.pos.push(-1);
            self.heap.insert(v, &self.activity);
        }
    }

    fn value(&self, l: L) -> i8 {
        let a = self.assigns[l.var()];
        if l.sign() {
            -a
        } else {
            a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: L, reason: Option<CRef>) {
        let v = l.var();
        self.assigns[v] = if l.sign() { FALSE } else { TRUE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Adds a clause at the root. Returns `false` once the clause set is
    /// known to be unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let max_var = lits.iter().map(|l| l.var()).max().unwrap_or(0);
        self.reserve_vars(max_var);
        let mut c: Vec<L> = Vec::with_capacity(lits.len());
        for &l in lits {
            let x = L::from_lit(l);
            match self.value(x) {
                TRUE => return true,
                FALSE => continue,
                _ => {}
            }
            if c.contains(&x.neg()) {
                return true;
            }
            if !c.contains(&x) {
                c.push(x);
            }
        }
        match c.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(c, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<L>, learnt: bool, lbd: u32) -> CRef {
        let cref = self.clauses.len() as CRef;
        self.watches[lits[0].idx()].push(Watcher { cref, blocker: lits[1] });
        self.watches[lits[1].idx()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            lbd,
            activity: 0.0,
        });
        if learnt {
            self.num_learnts += 1;
        }
        cref
    }

    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p.neg();
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = Watcher {
                        cref: w.cref,
                        blocker: first,
                    };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                let len = self.clauses[cref].lits.len();
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != FALSE {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[l.idx()].push(Watcher {
                            cref: w.cref,
                            blocker: first,
                        });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.idx()] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        if self.heap.contains(v as u32) {
            let i = self.heap.pos[v] as usize;
            self.heap.up(i, &self.activity);
        }
    }

    fn bump_clause(&mut self, c: CRef) {
        let cl = &mut self.clauses[c as usize];
        cl.activity += self.cla_inc;
        if cl.activity > 1e20 {
            for c in &mut self.clauses {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn analyze(&mut self, mut confl: CRef) -> (Vec<L>, u32) {
        let mut learnt: Vec<L> = vec![L(0)];
        let mut path = 0;
        let mut p: Option<L> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit.var()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var()].expect("implied literal has a reason");
        }
        learnt[0] = p.unwrap().neg();

        // Drop literals implied by the rest of the clause.
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let redundant = match self.reason[q.var()] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..]
                    .iter()
                    .all(|x| self.seen[x.var()] || self.level[x.var()] == 0),
            };
            if !redundant {
                keep.push(q);
            }
        }
        for q in &learnt {
            self.seen[q.var()] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var()] > self.level[learnt[max_i].var()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var()]
        };
        (learnt, bt)
    }

    fn lbd(&self, lits: &[L]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.level[l.var()]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.phase[v] = !l.sign();
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn locked(&self, c: CRef) -> bool {
        let l0 = self.clauses[c as usize].lits[0];
        self.value(l0) == TRUE && self.reason[l0.var()] == Some(c)
    }

    fn reduce_db(&mut self) {
        let mut learnts: Vec<CRef> = (0..self.clauses.len() as CRef)
            .filter(|&c| {
                let cl = &self.clauses[c as usize];
                cl.learnt && !cl.deleted
            })
            .collect();
        learnts.sort_by(|&a, &b| {
            let (x, y) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            y.lbd
                .cmp(&x.lbd)
                .then(x.activity.partial_cmp(&y.activity).unwrap())
                .then(a.cmp(&b))
        });
        let target = learnts.len() / 2;
        let mut removed = 0;
        for c in learnts {
            if removed >= target {
                break;
            }
            if self.clauses[c as usize].lbd <= 2 || self.locked(c) {
                continue;
            }
            let cl = &mut self.clauses[c as usize];
            cl.deleted = true;
            cl.lits = Vec::new();
            removed += 1;
            self.num_learnts -= 1;
        }
        self.max_learnts += self.max_learnts / 10;
    }

    fn pick_branch(&mut self) -> Option<L> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(L(v * 2 + u32::from(!self.phase[v as usize])));
            }
        }
        None
    }

    /// Runs the search. `Unknown` means a limit was hit; the solver can be
    /// resumed or extended afterwards.
    pub fn solve(&mut self, limits: Limits) -> Status {
        if !self.ok {
            return Status::Unsat;
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Status::Unsat;
        }
        let start_conflicts = self.stats.conflicts;
        let mut restart_count = 0u64;
        let mut budget = (luby(2.0, restart_count) * 100.0) as u64;
        let mut since_restart = 0u64;
        let mut ticks = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Status::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let lbd = self.lbd(&learnt);
                    let first = learnt[0];
                    let c = self.attach(learnt, true, lbd);
                    self.bump_clause(c);
                    self.enqueue(first, Some(c));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                if let Some(max) = limits.conflicts {
                    if self.stats.conflicts - start_conflicts >= max {
                        self.cancel_until(0);
                        return Status::Unknown;
                    }
                }
            } else {
                if since_restart >= budget {
                    self.cancel_until(0);
                    self.stats.restarts += 1;
                    restart_count += 1;
                    budget = (luby(2.0, restart_count) * 100.0) as u64;
                    since_restart = 0;
                }
                if self.num_learnts >= self.max_learnts + self.trail.len() {
                    self.reduce_db();
                }
                match self.pick_branch() {
                    None => {
                        self.model = self.assigns.iter().map(|&a| a == TRUE).collect();
                        self.cancel_until(0);
                        return Status::Sat;
                    }
                    Some(l) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
            ticks += 1;
            if ticks.is_multiple_of(512) {
                if let Some(d) = limits.deadline {
                    if Instant::now() >= d {
                        self.cancel_until(0);
                        return Status::Unknown;
                    }
                }
            }
        }
    }

    /// Model of the last `Sat` answer; index 0 is unused.
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn value_of(&self, l: Lit) -> bool {
        let v = self.model[l.var() as usize];
        if l.is_positive() {
            v
        } else {
            !v
        }
    }

    #[allow(dead_code)]
    fn debug_lit(l: L) -> Lit {
        l.to_lit()
    }
}
