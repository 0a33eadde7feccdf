//! Exact calculus of continuous, nonincreasing, nonnegative piecewise-linear
//! functions of wealth on `[0, ∞)`.
//!
//! The value functions of the shortfall recursion all live in this class.
//! Besides evaluation and pointwise min/max, the module implements the
//! one-step Bellman composition
//!
//! ```text
//! ψ(y) = min_{u ∈ [−y/a1, −y/a2]}  p·h1(y + u·a1) + (1 − p)·h2(y + u·a2)
//! ```
//!
//! exactly, as the lower envelope of finitely many candidate curves, together
//! with the piecewise-affine minimizer `u(y)` (smallest minimizer on ties).
//!
//! Writing `z1 = y + u·a1`, `z2 = y + u·a2` and `λ = −a2/a1`, the feasible
//! set is the segment `λ·z1 + z2 = (1 + λ)·y`, `z1, z2 ≥ 0`. The objective is
//! piecewise linear along it, so its smallest minimizer sits at an endpoint
//! (`z1 = 0` or `z2 = 0`) or at a kink of `h1` in `z1` or of `h2` in `z2`.
//! Only kinks where the slope increases can host it, which keeps the
//! candidate count small.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Breakpoints closer than this (relative to the abscissa scale) are fused.
const FUSE_REL: f64 = 1e-14;
/// A middle point within this distance (relative to the value scale) of the
/// chord through its neighbours is dropped.
const COLLINEAR_REL: f64 = 1e-12;
/// Monotonicity/sign violations below this (relative) are rounding noise.
const REPAIR_REL: f64 = 1e-9;
/// Candidate values closer than this (relative) are treated as tied.
const TIE_REL: f64 = 1e-12;

/// A continuous, nonincreasing, nonnegative piecewise-linear function on
/// `[0, ∞)`, linear between `breaks` and constant after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFn {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PwlFn {
    /// Builds a function from its breakpoints, checking every invariant.
    /// Rounding-sized violations of monotonicity or sign are clamped.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<PwlFn> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::InvalidPwl("breaks and values must be nonempty and of equal length"));
        }
        if breaks[0] != 0.0 {
            return Err(Error::InvalidPwl("first breakpoint must be 0"));
        }
        if breaks.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPwl("non-finite breakpoint or value"));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPwl("breakpoints must be strictly increasing"));
        }
        Self::from_raw(breaks, values)
    }

    pub fn zero() -> PwlFn {
        PwlFn {
            breaks: alloc::vec![0.0],
            values: alloc::vec![0.0],
        }
    }

    pub fn constant(level: f64) -> Result<PwlFn> {
        if !(level.is_finite() && level >= 0.0) {
            return Err(Error::NegativeLevel(level));
        }
        Ok(PwlFn {
            breaks: alloc::vec![0.0],
            values: alloc::vec![level],
        })
    }

    /// `y ↦ (c − y)^+`.
    pub fn hinge(c: f64) -> Result<PwlFn> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::NegativeLevel(c));
        }
        if c == 0.0 {
            return Ok(PwlFn::zero());
        }
        Ok(PwlFn {
            breaks: alloc::vec![0.0, c],
            values: alloc::vec![c, 0.0],
        })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of breakpoints.
    pub fn len(&self) -> usize {
        self.breaks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value on the constant tail.
    pub fn tail(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn last_break(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.values[0] == 0.0
    }

    fn value_scale(&self) -> f64 {
        self.values[0].max(1.0)
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::NegativeWealth(y));
        }
        Ok(self.at(y))
    }

    /// Evaluation without the sign check; negative arguments read the value
    /// at 0.
    #[inline]
    pub fn at(&self, y: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= y);
        if i == 0 {
            return self.values[0];
        }
        if i == self.breaks.len() {
            return self.tail();
        }
        let (x0, x1) = (self.breaks[i - 1], self.breaks[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * ((y - x0) / (x1 - x0))
    }

    /// Slopes of the linear pieces, one per breakpoint; the last entry is the
    /// tail slope 0.
    pub fn slopes(&self) -> Vec<f64> {
        let m = self.breaks.len();
        let mut out = Vec::with_capacity(m);
        for i in 0..m - 1 {
            out.push((self.values[i + 1] - self.values[i]) / (self.breaks[i + 1] - self.breaks[i]));
        }
        out.push(0.0);
        out
    }

    /// Largest absolute slope.
    pub fn max_abs_slope(&self) -> f64 {
        self.slopes().iter().map(|s| s.abs()).fold(0.0, f64::max)
    }

    /// Checks the class invariants without repairing anything.
    pub fn check_invariants(&self) -> Result<()> {
        if self.breaks[0] != 0.0 {
            return Err(Error::InvalidPwl("first breakpoint must be 0"));
        }
        if self.breaks.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater)) {
            return Err(Error::InvalidPwl("breakpoints must be strictly increasing"));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidPwl("values must be finite and nonnegative"));
        }
        if self.values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidPwl("values must be nonincreasing"));
        }
        Ok(())
    }

    /// Normalizes raw breakpoint data: fuses near-duplicate abscissae, clamps
    /// rounding-sized monotonicity and sign violations, and drops collinear
    /// interior points.
    pub(crate) fn from_raw(breaks: Vec<f64>, values: Vec<f64>) -> Result<PwlFn> {
        debug_assert_eq!(breaks.len(), values.len());
        let v_scale = values.iter().copied().fold(1.0, f64::max);
        // relative to the abscissa, so a far breakpoint does not coarsen
        // the near ones
        let fuse = |x: f64| FUSE_REL * x.abs().max(1.0);
        let repair = REPAIR_REL * v_scale;

        let mut bx: Vec<f64> = Vec::with_capacity(breaks.len());
        let mut bv: Vec<f64> = Vec::with_capacity(breaks.len());
        for (x, v) in breaks.into_iter().zip(values) {
            if !(x.is_finite() && v.is_finite()) {
                return Err(Error::InvalidPwl("non-finite breakpoint or value"));
            }
            let mut v = v;
            if v < 0.0 {
                if v < -repair {
                    return Err(Error::InvalidPwl("values must be nonnegative"));
                }
                v = 0.0;
            }
            match bx.last() {
                None => {
                    if x.abs() > fuse(0.0) {
                        return Err(Error::InvalidPwl("first breakpoint must be 0"));
                    }
                    bx.push(0.0);
                    bv.push(v);
                }
                Some(&last) => {
                    if x < last - fuse(last) {
                        return Err(Error::InvalidPwl("breakpoints must be increasing"));
                    }
                    let prev = *bv.last().unwrap();
                    if v > prev {
                        if v - prev > repair {
                            return Err(Error::InvalidPwl("values must be nonincreasing"));
                        }
                        v = prev;
                    }
                    if x - last <= fuse(last) {
                        // fused: keep the smaller value at the shared abscissa
                        *bv.last_mut().unwrap() = v.min(prev);
                        continue;
                    }
                    bx.push(x);
                    bv.push(v);
                }
            }
        }

        // Drop interior points lying on the chord of their neighbours, and a
        // trailing point on a flat segment (it merges into the tail).
        let tol = COLLINEAR_REL * v_scale;
        let mut ox: Vec<f64> = Vec::with_capacity(bx.len());
        let mut ov: Vec<f64> = Vec::with_capacity(bx.len());
        for i in 0..bx.len() {
            while ox.len() >= 2 {
                let j = ox.len() - 1;
                let (x0, v0) = (ox[j - 1], ov[j - 1]);
                let (xm, vm) = (ox[j], ov[j]);
                let chord = v0 + (bv[i] - v0) * ((xm - x0) / (bx[i] - x0));
                if (vm - chord).abs() <= tol {
                    ox.pop();
                    ov.pop();
                } else {
                    break;
                }
            }
            ox.push(bx[i]);
            ov.push(bv[i]);
        }
        while ox.len() >= 2 {
            let j = ox.len() - 1;
            if (ov[j - 1] - ov[j]).abs() <= tol {
                let v = ov[j];
                ox.pop();
                ov.pop();
                *ov.last_mut().unwrap() = v.min(*ov.last().unwrap());
            } else {
                break;
            }
        }
        let out = PwlFn {
            breaks: ox,
            values: ov,
        };
        debug_assert!(out.check_invariants().is_ok(), "{out:?}");
        Ok(out)
    }

    /// Pointwise minimum.
    pub fn min(&self, other: &PwlFn) -> PwlFn {
        combine(self, other, f64::min)
    }

    /// Pointwise maximum.
    pub fn max(&self, other: &PwlFn) -> PwlFn {
        combine(self, other, f64::max)
    }

    /// Maximal intervals (in increasing order, the last possibly unbounded)
    /// on which `self(y) ≤ other(y) + tol`.
    pub fn region_le(&self, other: &PwlFn, tol: f64) -> Vec<(f64, f64)> {
        let xs = merged_breaks(self, other);
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut push = |lo: f64, hi: f64| {
            if let Some(last) = out.last_mut() {
                if last.1 >= lo {
                    last.1 = last.1.max(hi);
                    return;
                }
            }
            out.push((lo, hi));
        };
        for w in xs.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let d0 = self.at(x0) - other.at(x0) - tol;
            let d1 = self.at(x1) - other.at(x1) - tol;
            match (d0 <= 0.0, d1 <= 0.0) {
                (true, true) => push(x0, x1),
                (true, false) => {
                    let xc = x0 + (x1 - x0) * (d0 / (d0 - d1));
                    push(x0, xc);
                }
                (false, true) => {
                    let xc = x0 + (x1 - x0) * (d0 / (d0 - d1));
                    push(xc, x1);
                }
                (false, false) => {}
            }
        }
        let last = *xs.last().unwrap();
        if self.tail() - other.tail() - tol <= 0.0 {
            push(last, f64::INFINITY);
        } else if self.at(last) - other.at(last) - tol <= 0.0 {
            push(last, last);
        }
        out
    }
}

fn merged_breaks(f: &PwlFn, g: &PwlFn) -> Vec<f64> {
    let mut xs = Vec::with_capacity(f.len() + g.len());
    let (mut i, mut j) = (0, 0);
    while i < f.breaks.len() || j < g.breaks.len() {
        let next = match (f.breaks.get(i), g.breaks.get(j)) {
            (Some(&a), Some(&b)) => match a.partial_cmp(&b).unwrap() {
                Ordering::Less => {
                    i += 1;
                    a
                }
                Ordering::Greater => {
                    j += 1;
                    b
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    a
                }
            },
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        xs.push(next);
    }
    xs
}

fn combine(f: &PwlFn, g: &PwlFn, pick: fn(f64, f64) -> f64) -> PwlFn {
    let xs = merged_breaks(f, g);
    let mut bx = Vec::with_capacity(xs.len() + 4);
    let mut bv = Vec::with_capacity(xs.len() + 4);
    for (idx, &x0) in xs.iter().enumerate() {
        let (f0, g0) = (f.at(x0), g.at(x0));
        bx.push(x0);
        bv.push(pick(f0, g0));
        if let Some(&x1) = xs.get(idx + 1) {
            let d0 = f0 - g0;
            let d1 = f.at(x1) - g.at(x1);
            if (d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0) {
                let xc = x0 + (x1 - x0) * (d0 / (d0 - d1));
                if xc > x0 && xc < x1 {
                    bx.push(xc);
                    bv.push(pick(f.at(xc), g.at(xc)));
                }
            }
        }
    }
    PwlFn::from_raw(bx, bv).expect("min/max of valid functions is valid")
}

/// Which candidate of the Bellman composition a policy piece follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateKind {
    /// `u = −y/a1`: all wealth lost on an up move.
    LeftEndpoint,
    /// `u = −y/a2`: all wealth lost on a down move.
    RightEndpoint,
    /// Up-move wealth pinned at a breakpoint of the up-continuation.
    UpBreakpoint,
    /// Down-move wealth pinned at a breakpoint of the down-continuation.
    DownBreakpoint,
    /// Left end of a set of minimizers (ties broken towards the smallest
    /// exposure) pinned at an interior breakpoint.
    InteriorFlat,
}

/// On `[lo, hi]` the optimal exposure is `u(y) = alpha + beta·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePolicyPiece {
    pub lo: f64,
    /// May be `f64::INFINITY` for the last piece.
    pub hi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kind: CandidateKind,
}

impl AffinePolicyPiece {
    #[inline]
    pub fn exposure(&self, y: f64) -> f64 {
        self.alpha + self.beta * y
    }

    /// Whether `u(y) ∈ [−y/a1, −y/a2]` at both finite ends of the interval.
    pub fn is_feasible(&self, a1: f64, a2: f64) -> bool {
        let ok = |y: f64| {
            let u = self.exposure(y);
            let slack = 1e-9 * (1.0 + u.abs() + y / a1);
            u >= -y / a1 - slack && u <= -y / a2 + slack
        };
        ok(self.lo) && (!self.hi.is_finite() || ok(self.hi))
    }
}

/// Exposure prescribed by a piecewise policy at wealth `y`, with ties at a
/// shared endpoint resolved towards the smaller exposure and the result
/// clamped into the admissible interval.
pub fn policy_exposure(pieces: &[AffinePolicyPiece], y: f64, a1: f64, a2: f64) -> f64 {
    if pieces.is_empty() || y <= 0.0 {
        return 0.0;
    }
    let i = pieces.partition_point(|p| p.lo <= y).max(1) - 1;
    let mut u = pieces[i].exposure(y);
    if i > 0 && pieces[i].lo == y {
        u = u.min(pieces[i - 1].exposure(y));
    }
    u.clamp(-y / a1, -y / a2)
}

#[derive(Debug, Clone, Copy)]
struct Label {
    id: u32,
    alpha: f64,
    beta: f64,
    kind: CandidateKind,
}

impl Label {
    #[inline]
    fn exposure(&self, y: f64) -> f64 {
        self.alpha + self.beta * y
    }
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    y0: f64,
    y1: f64,
    v0: f64,
    v1: f64,
    label: Label,
    tied: bool,
}

impl Seg {
    #[inline]
    fn at(&self, y: f64) -> f64 {
        if !self.y1.is_finite() || self.y1 == self.y0 {
            self.v0
        } else {
            self.v0 + (self.v1 - self.v0) * ((y - self.y0) / (self.y1 - self.y0))
        }
    }
}

struct Envelope {
    segs: Vec<Seg>,
    tie_tol: f64,
    collinear_tol: f64,
}

impl Envelope {
    fn push(&mut self, seg: Seg) {
        if seg.y1 <= seg.y0 && seg.y1.is_finite() {
            return;
        }
        if let Some(last) = self.segs.last_mut() {
            if last.label.id == seg.label.id && last.tied == seg.tied && last.y1 == seg.y0 {
                let merged_ok = if seg.y1.is_finite() {
                    let chord = last.v0 + (seg.v1 - last.v0) * ((seg.y0 - last.y0) / (seg.y1 - last.y0));
                    (chord - last.v1).abs() <= self.collinear_tol
                } else {
                    (last.v1 - last.v0).abs() <= self.collinear_tol && (seg.v0 - last.v1).abs() <= self.collinear_tol
                };
                if merged_ok {
                    last.y1 = seg.y1;
                    last.v1 = seg.v1;
                    return;
                }
            }
        }
        self.segs.push(seg);
    }

    /// Emits the better of two linear pieces on `[x0, x1]` (values `e*`,
    /// `c*` at the ends), splitting at crossings of value or, on ties, of
    /// exposure.
    #[allow(clippy::too_many_arguments)]
    fn emit(&mut self, x0: f64, x1: f64, e: (f64, f64), c: (f64, f64), el: Label, cl: Label, e_tied: bool) {
        let tol = self.tie_tol;
        let d0 = e.0 - c.0;
        let d1 = e.1 - c.1;
        let piece = |y0: f64, y1: f64, v: (f64, f64), label: Label, tied: bool| Seg {
            y0,
            y1,
            v0: v.0,
            v1: v.1,
            label,
            tied,
        };
        let lerp = |v: (f64, f64), x: f64| {
            if x1.is_finite() && x1 > x0 {
                v.0 + (v.1 - v.0) * ((x - x0) / (x1 - x0))
            } else {
                v.0
            }
        };
        if d0.abs() <= tol && d1.abs() <= tol {
            // Tie: the smaller exposure wins; split where the exposures cross.
            let du0 = el.exposure(x0) - cl.exposure(x0);
            let dbeta = el.beta - cl.beta;
            let du1 = if x1.is_finite() {
                el.exposure(x1) - cl.exposure(x1)
            } else if dbeta != 0.0 {
                dbeta * f64::INFINITY
            } else {
                du0
            };
            let v = (e.0.min(c.0), e.1.min(c.1));
            if du0 <= 0.0 && du1 <= 0.0 {
                self.push(piece(x0, x1, v, el, true));
            } else if du0 >= 0.0 && du1 >= 0.0 {
                self.push(piece(x0, x1, v, cl, true));
            } else {
                let xc = (x0 - du0 / dbeta).clamp(x0, if x1.is_finite() { x1 } else { f64::MAX });
                let vc = lerp(v, xc);
                let (first, second) = if du0 < 0.0 { (el, cl) } else { (cl, el) };
                self.push(piece(x0, xc, (v.0, vc), first, true));
                self.push(piece(xc, x1, (vc, v.1), second, true));
            }
        } else if d0 <= tol && d1 <= tol {
            self.push(piece(x0, x1, e, el, e_tied));
        } else if d0 >= -tol && d1 >= -tol {
            self.push(piece(x0, x1, c, cl, false));
        } else {
            let xc = x0 + (x1 - x0) * (d0 / (d0 - d1));
            let ve = lerp(e, xc);
            if d0 < 0.0 {
                self.push(piece(x0, xc, (e.0, ve), el, e_tied));
                self.push(piece(xc, x1, (ve, c.1), cl, false));
            } else {
                self.push(piece(x0, xc, (c.0, ve), cl, false));
                self.push(piece(xc, x1, (ve, e.1), el, e_tied));
            }
        }
    }
}

/// A candidate curve: defined on `[breaks[0], ∞)`, linear between breaks,
/// constant after the last.
struct Curve {
    label: Label,
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl Curve {
    fn segs(&self) -> Vec<Seg> {
        let m = self.breaks.len();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let (y1, v1) = if i + 1 < m {
                (self.breaks[i + 1], self.values[i + 1])
            } else {
                (f64::INFINITY, self.values[i])
            };
            out.push(Seg {
                y0: self.breaks[i],
                y1,
                v0: self.values[i],
                v1,
                label: self.label,
                tied: false,
            });
        }
        out
    }
}

fn merge(env: &mut Envelope, cand: &Curve) {
    let start = cand.breaks[0];
    // The envelope is nonincreasing and the candidate never drops below its
    // tail, so only the stretch from `start` to where the envelope falls
    // strictly below that tail can change.
    let floor = *cand.values.last().unwrap() - env.tie_tol;
    let i0 = env.segs.partition_point(|s| s.y1 <= start && s.y1.is_finite());
    if i0 == env.segs.len() || env.segs[i0].v0 < floor {
        return;
    }
    let i1 = i0 + env.segs[i0..].partition_point(|s| s.v0 >= floor);
    let end = env.segs.get(i1).map_or(f64::INFINITY, |s| s.y0);

    let mut old = core::mem::take(&mut env.segs);
    let tail = old.split_off(i1);
    env.segs = old.drain(..i0).collect();
    let new = cand.segs();

    let mut cuts: Vec<f64> = Vec::with_capacity(old.len() + new.len());
    {
        let (mut i, mut j) = (0, 0);
        while i < old.len() || j < new.len() {
            let a = old.get(i).map(|s| s.y0);
            let b = new.get(j).map(|s| s.y0).filter(|&b| b < end);
            let x = match (a, b) {
                (Some(a), Some(b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(a), Some(b)) if b < a => {
                    j += 1;
                    b
                }
                (Some(a), Some(_)) => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(a), None) => {
                    i += 1;
                    a
                }
                (None, Some(b)) => {
                    j += 1;
                    b
                }
                (None, None) => break,
            };
            if cuts.last().map_or(true, |&l| x > l) {
                cuts.push(x);
            }
        }
    }

    let (mut i, mut j) = (0usize, 0usize);
    for (idx, &x0) in cuts.iter().enumerate() {
        let x1 = cuts.get(idx + 1).copied().unwrap_or(end);
        while old[i].y1 <= x0 && i + 1 < old.len() {
            i += 1;
        }
        let es = old[i];
        let e = (es.at(x0), if x1.is_finite() { es.at(x1) } else { es.v0 });
        if x0 < start {
            env.push(Seg {
                y0: x0,
                y1: x1,
                v0: e.0,
                v1: e.1,
                label: es.label,
                tied: es.tied,
            });
            continue;
        }
        while new[j].y1 <= x0 && j + 1 < new.len() {
            j += 1;
        }
        let cs = new[j];
        let c = (cs.at(x0), if x1.is_finite() { cs.at(x1) } else { cs.v0 });
        env.emit(x0, x1, e, c, es.label, cs.label, es.tied);
    }
    env.segs.extend(tail);
}

/// Collects the breakpoints of `h` at which its slope does not decrease
/// (including 0). Only these can pin the smallest minimizer.
fn convex_kinks(h: &PwlFn) -> Vec<(f64, f64)> {
    let slopes = h.slopes();
    let tol = 1e-12 * (1.0 + h.max_abs_slope());
    let mut out = alloc::vec![(0.0, h.values[0])];
    for i in 1..h.len() {
        if slopes[i] >= slopes[i - 1] - tol {
            out.push((h.breaks[i], h.values[i]));
        }
    }
    out
}

/// The exact one-step Bellman composition.
///
/// Returns `ψ` and the smallest minimizer as affine pieces covering
/// `[0, ∞)`. At `y = 0` the admissible set is `{0}` and
/// `ψ(0) = p·h1(0) + (1 − p)·h2(0)` exactly.
pub fn bellman_compose(
    h1: &PwlFn,
    h2: &PwlFn,
    p: f64,
    a1: f64,
    a2: f64,
) -> Result<(PwlFn, Vec<AffinePolicyPiece>)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if !(a1 > 0.0 && a2 < 0.0 && a1.is_finite() && a2.is_finite()) {
        return Err(Error::InvalidReturns { a1, a2 });
    }
    let q = 1.0 - p;
    let lam = -a2 / a1;
    let inv = 1.0 / (1.0 + lam);
    // wealth y at which z1 = b1 and z2 = b2
    let grid = |b1: f64, b2: f64| (lam * b1 + b2) * inv;

    let scale = h1.value_scale().max(h2.value_scale());
    let mut env = Envelope {
        segs: Vec::new(),
        tie_tol: TIE_REL * scale,
        collinear_tol: COLLINEAR_REL * scale,
    };

    let mut curves: Vec<Curve> = Vec::new();
    let mut next_id = 0u32;
    for (b1, v1) in convex_kinks(h1) {
        let kind = if b1 == 0.0 {
            CandidateKind::LeftEndpoint
        } else {
            CandidateKind::UpBreakpoint
        };
        curves.push(Curve {
            label: Label {
                id: next_id,
                alpha: b1 / a1,
                beta: -1.0 / a1,
                kind,
            },
            breaks: h2.breaks.iter().map(|&b2| grid(b1, b2)).collect(),
            values: h2.values.iter().map(|&v2| p * v1 + q * v2).collect(),
        });
        next_id += 1;
    }
    for (b2, v2) in convex_kinks(h2) {
        let kind = if b2 == 0.0 {
            CandidateKind::RightEndpoint
        } else {
            CandidateKind::DownBreakpoint
        };
        curves.push(Curve {
            label: Label {
                id: next_id,
                alpha: b2 / a2,
                beta: -1.0 / a2,
                kind,
            },
            breaks: h1.breaks.iter().map(|&b1| grid(b1, b2)).collect(),
            values: h1.values.iter().map(|&v1| p * v1 + q * v2).collect(),
        });
        next_id += 1;
    }

    // The left endpoint candidate (first curve) is defined from y = 0.
    env.segs = curves[0].segs();
    for cand in &curves[1..] {
        merge(&mut env, cand);
    }

    let segs = env.segs;
    let mut bx = Vec::with_capacity(segs.len());
    let mut bv = Vec::with_capacity(segs.len());
    for (i, s) in segs.iter().enumerate() {
        let v = if i == 0 { s.v0 } else { s.v0.min(segs[i - 1].v1) };
        bx.push(s.y0);
        bv.push(v);
    }
    let psi = PwlFn::from_raw(bx, bv)?;

    let mut pieces: Vec<AffinePolicyPiece> = Vec::new();
    let mut last_id = u32::MAX;
    for s in &segs {
        let kind = match s.label.kind {
            CandidateKind::UpBreakpoint | CandidateKind::DownBreakpoint if s.tied => CandidateKind::InteriorFlat,
            k => k,
        };
        match pieces.last_mut() {
            Some(last) if last_id == s.label.id && last.kind == kind => last.hi = s.y1,
            _ => {
                pieces.push(AffinePolicyPiece {
                    lo: s.y0,
                    hi: s.y1,
                    alpha: s.label.alpha,
                    beta: s.label.beta,
                    kind,
                });
                last_id = s.label.id;
            }
        }
    }
    for piece in &pieces {
        if !piece.is_feasible(a1, a2) {
            return Err(Error::InfeasiblePolicy {
                depth: 0,
                lo: piece.lo,
                hi: piece.hi,
            });
        }
    }
    Ok((psi, pieces))
}
