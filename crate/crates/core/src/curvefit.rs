//! Stagewise least-squares fitting of lines and quadratics.
//!
//! A stagewise fit visits the points in order. Stage `k` solves the exact
//! least-squares problem on the first `k` points, starting its solver from
//! the model produced at stage `k - 1`. The only state carried from one
//! stage to the next is the accumulated normal-equation moments and the
//! previous model, so the final stage reproduces the batch fit.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// `y = a·x + b`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    pub a: f64,
    pub b: f64,
}

/// `y = a·x² + b·x + c`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// A model evaluated as a function of `x`.
pub trait Curve {
    fn eval(&self, x: f64) -> f64;
}

impl Curve for LineModel {
    fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

impl Curve for QuadModel {
    fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitModel {
    Line(LineModel),
    Quad(QuadModel),
}

impl Curve for FitModel {
    fn eval(&self, x: f64) -> f64 {
        match self {
            FitModel::Line(m) => m.eval(x),
            FitModel::Quad(m) => m.eval(x),
        }
    }
}

impl LineModel {
    fn from_coefficients(c: [f64; 2]) -> Self {
        Self { a: c[1], b: c[0] }
    }

    fn coefficients(&self) -> [f64; 2] {
        [self.b, self.a]
    }
}

impl QuadModel {
    fn from_coefficients(c: [f64; 3]) -> Self {
        Self {
            a: c[2],
            b: c[1],
            c: c[0],
        }
    }

    fn coefficients(&self) -> [f64; 3] {
        [self.c, self.b, self.a]
    }
}

/// Sum of squared vertical distances `Σ (y_i − f(x_i))²`.
pub fn residual_sum<C: Curve + ?Sized>(model: &C, points: &[Point2]) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.y - model.eval(p.x);
            r * r
        })
        .sum()
}

/// Normal equations of a degree `D - 1` polynomial fit, accumulated one
/// point at a time. Coefficients are ordered by ascending power.
#[derive(Debug, Clone)]
pub struct NormalSystem<const D: usize> {
    // power sums Σ x^p for p < 2D - 1, stored with room for D = 3
    moments: [f64; 5],
    rhs: [f64; D],
    distinct_x: Vec<f64>,
    count: usize,
}

/// Result of one solve of the normal equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution<const D: usize> {
    pub coefficients: [f64; D],
    /// Refinement sweeps spent. A good warm start converges in fewer.
    pub iterations: usize,
}

const MAX_REFINEMENTS: usize = 8;

impl<const D: usize> Default for NormalSystem<D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const D: usize> NormalSystem<D> {
    pub fn new() -> Self {
        assert!((1..=3).contains(&D), "only degrees 0..=2 are supported");
        Self {
            moments: [0.0; 5],
            rhs: [0.0; D],
            distinct_x: Vec::with_capacity(D),
            count: 0,
        }
    }

    pub fn push(&mut self, p: Point2) {
        let mut xp = 1.0;
        for m in self.moments.iter_mut().take(2 * D - 1) {
            *m += xp;
            xp *= p.x;
        }
        let mut xp = 1.0;
        for r in self.rhs.iter_mut() {
            *r += xp * p.y;
            xp *= p.x;
        }
        if self.distinct_x.len() < D && !self.distinct_x.contains(&p.x) {
            self.distinct_x.push(p.x);
        }
        self.count += 1;
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// The system has a unique solution iff there are at least `D` distinct
    /// abscissae.
    pub fn is_determined(&self) -> bool {
        self.distinct_x.len() >= D
    }

    fn matrix(&self) -> [[f64; D]; D] {
        let mut n = [[0.0; D]; D];
        for (i, row) in n.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.moments[i + j];
            }
        }
        n
    }

    /// Solves the normal equations by iterative refinement starting from
    /// `warm_start` (zero when absent). The solution does not depend on the
    /// starting point, only the number of sweeps does.
    pub fn solve(&self, warm_start: Option<[f64; D]>) -> Result<Solution<D>> {
        if !self.is_determined() {
            return Err(Error::DegenerateInput(format!(
                "need at least {D} distinct x values, have {}",
                self.distinct_x.len()
            )));
        }
        let n = self.matrix();
        let mut coef = warm_start.unwrap_or([0.0; D]);
        if coef.iter().any(|c| !c.is_finite()) {
            coef = [0.0; D];
        }
        let mut iterations = 0;
        while iterations < MAX_REFINEMENTS {
            let mut residual = self.rhs;
            for (i, r) in residual.iter_mut().enumerate() {
                for (j, c) in coef.iter().enumerate() {
                    *r -= n[i][j] * c;
                }
            }
            let delta = gauss_solve(n, residual)?;
            iterations += 1;
            let mut step = 0.0f64;
            let mut size = 0.0f64;
            for (c, d) in coef.iter_mut().zip(delta.iter()) {
                *c += d;
                step = step.max(d.abs());
                size = size.max(c.abs());
            }
            if step <= 1e-15 * (1.0 + size) {
                break;
            }
        }
        Ok(Solution {
            coefficients: coef,
            iterations,
        })
    }
}

fn gauss_solve<const D: usize>(mut m: [[f64; D]; D], mut b: [f64; D]) -> Result<[f64; D]> {
    for col in 0..D {
        let pivot = (col..D)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[pivot][col] == 0.0 || !m[pivot][col].is_finite() {
            return Err(Error::DegenerateInput("singular normal equations".into()));
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..D {
            let f = m[row][col] / m[col][col];
            for k in col..D {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; D];
    for row in (0..D).rev() {
        let mut acc = b[row];
        for k in row + 1..D {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

fn check_finite(points: &[Point2]) -> Result<()> {
    match points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
        Some(i) => Err(Error::DegenerateInput(format!("point {i} is not finite"))),
        None => Ok(()),
    }
}

fn batch<const D: usize>(points: &[Point2]) -> Result<[f64; D]> {
    check_finite(points)?;
    if points.len() < D {
        return Err(Error::DegenerateInput(format!(
            "need at least {D} points, have {}",
            points.len()
        )));
    }
    let mut sys = NormalSystem::<D>::new();
    points.iter().for_each(|&p| sys.push(p));
    Ok(sys.solve(None)?.coefficients)
}

pub fn fit_line_batch(points: &[Point2]) -> Result<LineModel> {
    batch::<2>(points).map(LineModel::from_coefficients)
}

pub fn fit_quad_batch(points: &[Point2]) -> Result<QuadModel> {
    batch::<3>(points).map(QuadModel::from_coefficients)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStage {
    /// Number of leading points covered by this stage.
    pub stage_index: usize,
    pub model: FitModel,
    pub residual: f64,
    pub iterations: usize,
}

/// Per-stage record of a stagewise fit. Stages whose prefix is degenerate
/// (too few distinct `x`) are listed in `skipped` instead of `stages`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub stages: Vec<FitStage>,
    pub skipped: Vec<usize>,
}

impl FitTrace {
    /// Samples every stage model at `samples` evenly spaced abscissae in
    /// `[x_min, x_max]`. Rows are `(stage_index, x, y)`.
    pub fn sampled_curves(&self, x_min: f64, x_max: f64, samples: usize) -> Vec<(usize, f64, f64)> {
        let samples = samples.max(2);
        let step = (x_max - x_min) / (samples - 1) as f64;
        self.stages
            .iter()
            .flat_map(|s| {
                (0..samples).map(move |i| {
                    let x = x_min + step * i as f64;
                    (s.stage_index, x, s.model.eval(x))
                })
            })
            .collect()
    }
}

fn stagewise<const D: usize>(
    points: &[Point2],
    wrap: impl Fn([f64; D]) -> FitModel,
) -> Result<([f64; D], FitTrace)> {
    check_finite(points)?;
    if points.len() < D {
        return Err(Error::DegenerateInput(format!(
            "need at least {D} points, have {}",
            points.len()
        )));
    }
    let mut sys = NormalSystem::<D>::new();
    let mut trace = FitTrace::default();
    let mut previous: Option<[f64; D]> = None;
    for (i, &p) in points.iter().enumerate() {
        sys.push(p);
        let stage = i + 1;
        if stage < D {
            continue;
        }
        if !sys.is_determined() {
            trace.skipped.push(stage);
            continue;
        }
        let sol = sys.solve(previous)?;
        let model = wrap(sol.coefficients);
        trace.stages.push(FitStage {
            stage_index: stage,
            residual: residual_sum(&model, &points[..stage]),
            model,
            iterations: sol.iterations,
        });
        previous = Some(sol.coefficients);
    }
    match previous {
        Some(c) => Ok((c, trace)),
        None => Err(Error::DegenerateInput(
            "every prefix has too few distinct x values".into(),
        )),
    }
}

pub fn fit_line_stagewise(points: &[Point2]) -> Result<(LineModel, FitTrace)> {
    let (c, trace) = stagewise::<2>(points, |c| FitModel::Line(LineModel::from_coefficients(c)))?;
    Ok((LineModel::from_coefficients(c), trace))
}

pub fn fit_quad_stagewise(points: &[Point2]) -> Result<(QuadModel, FitTrace)> {
    let (c, trace) = stagewise::<3>(points, |c| FitModel::Quad(QuadModel::from_coefficients(c)))?;
    Ok((QuadModel::from_coefficients(c), trace))
}

/// Exposes the warm-start hook for callers that keep their own models.
pub fn refine_line(points: &[Point2], start: LineModel) -> Result<(LineModel, usize)> {
    check_finite(points)?;
    let mut sys = NormalSystem::<2>::new();
    points.iter().for_each(|&p| sys.push(p));
    let sol = sys.solve(Some(start.coefficients()))?;
    Ok((LineModel::from_coefficients(sol.coefficients), sol.iterations))
}

pub fn refine_quad(points: &[Point2], start: QuadModel) -> Result<(QuadModel, usize)> {
    check_finite(points)?;
    let mut sys = NormalSystem::<3>::new();
    points.iter().for_each(|&p| sys.push(p));
    let sol = sys.solve(Some(start.coefficients()))?;
    Ok((QuadModel::from_coefficients(sol.coefficients), sol.iterations))
}
