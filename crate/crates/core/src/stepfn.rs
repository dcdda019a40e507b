//! Exact piecewise-constant functions on `[0, end]` (or `[0, ∞)`).
//!
//! A [`StepFn`] stores one value per open interval between breakpoints and
//! one value *at* each breakpoint. Left- and right-continuous curves are the
//! two common special cases, but isolated point values are allowed: the
//! willing-to-buy functions take a distinct value exactly at merit-order
//! ties, and several bid constructions splice curves at a single price.
//!
//! Because every function is constant between breakpoints, any infimum or
//! supremum of a comparison set reduces to scanning the merged breakpoints
//! plus one witness per open interval (see [`cells`]).

use crate::error::Error;
use crate::rational::{int, Rational};
use num_traits::Zero;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepFn {
    breaks: Vec<Rational>,
    /// `plateaus[i]` holds on `(breaks[i-1], breaks[i])`; `plateaus[0]` starts at 0.
    plateaus: Vec<Rational>,
    at_breaks: Vec<Rational>,
    end: Option<Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    /// Value at a breakpoint equals the plateau on its left.
    Left,
    /// Value at a breakpoint equals the plateau on its right.
    Right,
}

/// A piece of the domain on which every function in a scan is constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cell {
    Point(Rational),
    Open { from: Rational, to: Option<Rational> },
}

impl Cell {
    pub fn lower(&self) -> &Rational {
        match self {
            Cell::Point(x) => x,
            Cell::Open { from, .. } => from,
        }
    }

    /// `None` for the unbounded trailing interval.
    pub fn upper(&self) -> Option<&Rational> {
        match self {
            Cell::Point(x) => Some(x),
            Cell::Open { to, .. } => to.as_ref(),
        }
    }

    pub fn witness(&self) -> Rational {
        match self {
            Cell::Point(x) => x.clone(),
            Cell::Open { from, to: Some(to) } => (from + to) / int(2),
            Cell::Open { from, to: None } => from + int(1),
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Cell::Point(_))
    }
}

impl StepFn {
    pub fn constant(value: Rational, end: Option<Rational>) -> Self {
        StepFn { breaks: vec![], plateaus: vec![value], at_breaks: vec![], end }
    }

    /// Builds from raw parts and normalizes redundant breakpoints away.
    ///
    /// `plateaus.len()` must be `breaks.len() + 1` and `at_breaks.len()`
    /// must equal `breaks.len()`. Breakpoints must be strictly increasing,
    /// non-negative and not beyond `end`.
    pub fn from_parts(
        breaks: Vec<Rational>,
        plateaus: Vec<Rational>,
        at_breaks: Vec<Rational>,
        end: Option<Rational>,
    ) -> Result<Self, Error> {
        if plateaus.len() != breaks.len() + 1 || at_breaks.len() != breaks.len() {
            return Err(Error::MalformedStepFn(format!(
                "{} breakpoints need {} plateaus and {} point values, got {} and {}",
                breaks.len(),
                breaks.len() + 1,
                breaks.len(),
                plateaus.len(),
                at_breaks.len()
            )));
        }
        if let Some(e) = &end {
            if *e <= Rational::zero() {
                return Err(Error::MalformedStepFn("domain end must be positive".into()));
            }
        }
        for w in breaks.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::MalformedStepFn("breakpoints must be strictly increasing".into()));
            }
        }
        if let Some(first) = breaks.first() {
            if *first < Rational::zero() {
                return Err(Error::MalformedStepFn("breakpoints must be non-negative".into()));
            }
        }
        if let (Some(last), Some(e)) = (breaks.last(), &end) {
            if last > e {
                return Err(Error::MalformedStepFn("breakpoint beyond domain end".into()));
            }
        }
        let mut f = StepFn { breaks, plateaus, at_breaks, end };
        f.normalize();
        Ok(f)
    }

    /// Plateau `i` covers `(b[i-1], b[i]]`; the tail plateau covers `(b[last], end]`.
    pub fn left_continuous(
        breaks: Vec<Rational>,
        plateaus: Vec<Rational>,
        end: Option<Rational>,
    ) -> Result<Self, Error> {
        let at = plateaus.iter().take(breaks.len()).cloned().collect();
        Self::from_parts(breaks, plateaus, at, end)
    }

    /// Plateau `i` covers `[b[i-1], b[i])`.
    pub fn right_continuous(
        breaks: Vec<Rational>,
        plateaus: Vec<Rational>,
        end: Option<Rational>,
    ) -> Result<Self, Error> {
        let at = plateaus.iter().skip(1).cloned().collect();
        Self::from_parts(breaks, plateaus, at, end)
    }

    /// `value·1{x ≥ at}` on `[0, ∞)`.
    pub fn step_up(at: Rational, value: Rational) -> Self {
        Self::right_continuous(vec![at], vec![Rational::zero(), value], None).expect("valid step")
    }

    fn normalize(&mut self) {
        let n = self.breaks.len();
        if n > 0 && self.breaks[0].is_zero() {
            self.plateaus[0] = self.at_breaks[0].clone();
        }
        if n > 0 && self.end.as_ref() == self.breaks.last() {
            self.plateaus[n] = self.at_breaks[n - 1].clone();
        }
        let mut breaks = Vec::with_capacity(n);
        let mut plateaus = Vec::with_capacity(n + 1);
        let mut at = Vec::with_capacity(n);
        plateaus.push(self.plateaus[0].clone());
        for i in 0..n {
            let left = plateaus.last().unwrap();
            if *left == self.at_breaks[i] && self.at_breaks[i] == self.plateaus[i + 1] {
                continue;
            }
            breaks.push(self.breaks[i].clone());
            at.push(self.at_breaks[i].clone());
            plateaus.push(self.plateaus[i + 1].clone());
        }
        self.breaks = breaks;
        self.plateaus = plateaus;
        self.at_breaks = at;
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breaks
    }

    pub fn plateaus(&self) -> &[Rational] {
        &self.plateaus
    }

    pub fn point_values(&self) -> &[Rational] {
        &self.at_breaks
    }

    pub fn domain_end(&self) -> Option<&Rational> {
        self.end.as_ref()
    }

    pub fn in_domain(&self, x: &Rational) -> bool {
        !x.is_negative_value() && self.end.as_ref().is_none_or(|e| x <= e)
    }

    pub fn eval(&self, x: &Rational) -> Result<Rational, Error> {
        if !self.in_domain(x) {
            return Err(Error::OutOfDomain { x: x.clone() });
        }
        let idx = self.breaks.partition_point(|b| b < x);
        if idx < self.breaks.len() && self.breaks[idx] == *x {
            Ok(self.at_breaks[idx].clone())
        } else {
            Ok(self.plateaus[idx].clone())
        }
    }

    /// `f(x⁻)`; defined for `0 < x ≤ end`.
    pub fn eval_left(&self, x: &Rational) -> Result<Rational, Error> {
        if !x.is_positive_value() || !self.in_domain(x) {
            return Err(Error::OutOfDomain { x: x.clone() });
        }
        Ok(self.plateaus[self.breaks.partition_point(|b| b < x)].clone())
    }

    /// `f(x⁺)`; defined for `0 ≤ x < end`.
    pub fn eval_right(&self, x: &Rational) -> Result<Rational, Error> {
        if x.is_negative_value() || self.end.as_ref().is_some_and(|e| x >= e) {
            return Err(Error::OutOfDomain { x: x.clone() });
        }
        Ok(self.plateaus[self.breaks.partition_point(|b| b <= x)].clone())
    }

    /// Derived continuity class; `None` when some breakpoint carries an
    /// isolated value. A constant function reports `Left`.
    pub fn continuity(&self) -> Option<Continuity> {
        let left = (0..self.breaks.len()).all(|i| self.at_breaks[i] == self.plateaus[i]);
        let right = (0..self.breaks.len()).all(|i| self.at_breaks[i] == self.plateaus[i + 1]);
        match (left, right) {
            (true, _) => Some(Continuity::Left),
            (false, true) => Some(Continuity::Right),
            _ => None,
        }
    }

    /// Value sequence along the domain: plateau, point, plateau, ...
    fn ordered_values(&self) -> Vec<&Rational> {
        cells(&[self], &[]).iter().map(|c| self.value_on(c)).collect()
    }

    fn value_on(&self, cell: &Cell) -> &Rational {
        match cell {
            Cell::Point(x) => {
                let idx = self.breaks.partition_point(|b| b < x);
                if idx < self.breaks.len() && self.breaks[idx] == *x {
                    &self.at_breaks[idx]
                } else {
                    &self.plateaus[idx]
                }
            }
            Cell::Open { from, .. } => &self.plateaus[self.breaks.partition_point(|b| b <= from)],
        }
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.ordered_values().windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_non_increasing(&self) -> bool {
        self.ordered_values().windows(2).all(|w| w[0] >= w[1])
    }

    pub fn max_value(&self) -> Rational {
        self.ordered_values().into_iter().max().unwrap().clone()
    }

    pub fn min_value(&self) -> Rational {
        self.ordered_values().into_iter().min().unwrap().clone()
    }

    /// True if `f(x) == 0` everywhere on the domain.
    pub fn is_identically_zero(&self) -> bool {
        self.ordered_values().into_iter().all(|v| v.is_zero())
    }

    pub fn map(&self, op: impl Fn(&Rational) -> Rational) -> StepFn {
        zip_cells(&[self], &[], |_, v| op(&v[0]))
    }

    /// `self` on `[0, at]`, `other` on `(at, end]`.
    pub fn splice(&self, at: &Rational, other: &StepFn) -> StepFn {
        zip_cells(&[self, other], std::slice::from_ref(at), |cell, v| {
            if cell.upper().is_some_and(|u| u <= at) {
                v[0].clone()
            } else {
                v[1].clone()
            }
        })
    }

    /// Truncates (or asserts) the domain to `[0, end]`.
    pub fn restrict(&self, end: &Rational) -> StepFn {
        let cut = match &self.end {
            Some(e) if e < end => e.clone(),
            _ => end.clone(),
        };
        let mut breaks = Vec::new();
        let mut plateaus = vec![self.plateaus[0].clone()];
        let mut at = Vec::new();
        for (i, b) in self.breaks.iter().enumerate() {
            if *b > cut {
                break;
            }
            breaks.push(b.clone());
            at.push(self.at_breaks[i].clone());
            plateaus.push(self.plateaus[i + 1].clone());
        }
        StepFn::from_parts(breaks, plateaus, at, Some(cut)).expect("restriction of a valid function")
    }

    /// Smallest domain end among the operands.
    fn common_end(fns: &[&StepFn]) -> Option<Rational> {
        fns.iter().filter_map(|f| f.end.clone()).min()
    }
}

trait SignExt {
    fn is_negative_value(&self) -> bool;
    fn is_positive_value(&self) -> bool;
}

impl SignExt for Rational {
    fn is_negative_value(&self) -> bool {
        *self < Rational::zero()
    }
    fn is_positive_value(&self) -> bool {
        *self > Rational::zero()
    }
}

/// Partition of the common domain into points and open intervals on which
/// every function in `fns` is constant. Point `0` is always present, and so
/// is the common domain end when finite. `extra` adds cut points inside the
/// domain.
pub fn cells(fns: &[&StepFn], extra: &[Rational]) -> Vec<Cell> {
    let end = StepFn::common_end(fns);
    let mut points: Vec<Rational> = fns
        .iter()
        .flat_map(|f| f.breaks.iter().cloned())
        .chain(extra.iter().cloned())
        .chain(std::iter::once(Rational::zero()))
        .chain(end.iter().cloned())
        .filter(|x| !x.is_negative_value() && end.as_ref().is_none_or(|e| x <= e))
        .collect();
    points.sort();
    points.dedup();
    let mut out = Vec::with_capacity(points.len() * 2);
    for (i, p) in points.iter().enumerate() {
        out.push(Cell::Point(p.clone()));
        match points.get(i + 1) {
            Some(next) => out.push(Cell::Open { from: p.clone(), to: Some(next.clone()) }),
            None if end.is_none() => out.push(Cell::Open { from: p.clone(), to: None }),
            None => {}
        }
    }
    out
}

/// Values of every function on one cell.
pub fn values_on(fns: &[&StepFn], cell: &Cell) -> Vec<Rational> {
    fns.iter().map(|f| f.value_on(cell).clone()).collect()
}

/// Builds a new function cell by cell over the merged grid of `fns`.
pub fn zip_cells(fns: &[&StepFn], extra: &[Rational], op: impl Fn(&Cell, Vec<Rational>) -> Rational) -> StepFn {
    let end = StepFn::common_end(fns);
    let grid = cells(fns, extra);
    let mut breaks = Vec::new();
    let mut at = Vec::new();
    let mut plateaus = Vec::new();
    for cell in &grid {
        let v = op(cell, values_on(fns, cell));
        match cell {
            Cell::Point(x) => {
                if plateaus.is_empty() {
                    plateaus.push(v.clone());
                }
                breaks.push(x.clone());
                at.push(v);
            }
            Cell::Open { .. } => plateaus.push(v),
        }
    }
    if plateaus.len() == breaks.len() {
        plateaus.push(at.last().unwrap().clone());
    }
    StepFn::from_parts(breaks, plateaus, at, end).expect("merged grid is well formed")
}

/// Pointwise sum; breakpoints are the merged union.
pub fn sum(fns: &[&StepFn]) -> StepFn {
    zip_cells(fns, &[], |_, v| v.into_iter().fold(Rational::zero(), |a, b| a + b))
}

/// Closed or half-open search window `[lo, hi]` / `(lo, hi]`.
#[derive(Clone, Debug)]
pub struct Window {
    pub lo: Rational,
    pub lo_open: bool,
    pub hi: Rational,
}

impl Window {
    pub fn closed(lo: Rational, hi: Rational) -> Self {
        Window { lo, lo_open: false, hi }
    }

    pub fn open_closed(lo: Rational, hi: Rational) -> Self {
        Window { lo, lo_open: true, hi }
    }

    fn contains(&self, cell: &Cell) -> bool {
        match cell {
            Cell::Point(x) => (if self.lo_open { *x > self.lo } else { *x >= self.lo }) && *x <= self.hi,
            Cell::Open { from, to } => *from >= self.lo && to.as_ref().is_some_and(|t| *t <= self.hi),
        }
    }
}

/// `inf{x ∈ window : pred(f₁(x), …)}`, or `None` for the empty set.
pub fn inf_where(fns: &[&StepFn], window: &Window, pred: impl Fn(&[Rational]) -> bool) -> Option<Rational> {
    cells(fns, &[window.lo.clone(), window.hi.clone()])
        .iter()
        .filter(|c| window.contains(c))
        .find(|c| pred(&values_on(fns, c)))
        .map(|c| c.lower().clone())
}

/// `sup{x ∈ window : pred(f₁(x), …)}`, or `None` for the empty set.
pub fn sup_where(fns: &[&StepFn], window: &Window, pred: impl Fn(&[Rational]) -> bool) -> Option<Rational> {
    cells(fns, &[window.lo.clone(), window.hi.clone()])
        .iter()
        .rev()
        .filter(|c| window.contains(c))
        .find(|c| pred(&values_on(fns, c)))
        .map(|c| c.upper().expect("window is bounded").clone())
}

/// `inf{x ∈ (0, upper] : f(x) > g(x)}` with `inf ∅ = upper`.
pub fn inf_exceeding(f: &StepFn, g: &StepFn, upper: &Rational) -> Rational {
    inf_where(&[f, g], &Window::open_closed(Rational::zero(), upper.clone()), |v| v[0] > v[1])
        .unwrap_or_else(|| upper.clone())
}

/// `sup{x ∈ [0, upper] : f(x) > g(x)}` with `sup ∅ = 0`.
pub fn sup_exceeding(f: &StepFn, g: &StepFn, upper: &Rational) -> Rational {
    sup_where(&[f, g], &Window::closed(Rational::zero(), upper.clone()), |v| v[0] > v[1]).unwrap_or_else(Rational::zero)
}
