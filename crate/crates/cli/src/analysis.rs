//! Curve diagnostics derived from scenario outputs.

use kicked_harmonics::fit::{linear_fit, LinearFit};
use serde::Serialize;

/// When a quantum curve first falls below `ratio` times the classical one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "t", rename_all = "snake_case")]
pub enum Departure {
    At(usize),
    /// No departure up to and including this time.
    NotBy(usize),
}

impl Departure {
    /// Whether `self` is certainly earlier than `later`.
    pub fn before(self, later: Departure) -> Option<bool> {
        match (self, later) {
            (Departure::At(a), Departure::At(b)) => Some(a < b),
            (Departure::At(a), Departure::NotBy(b)) => (a <= b).then_some(true),
            (Departure::NotBy(_), _) => None,
        }
    }
}

pub fn departure_time(quantum: &[(usize, f64)], classical: &[(usize, f64)], ratio: f64) -> Option<Departure> {
    let mut last = None;
    for &(t, q) in quantum.iter().filter(|r| r.0 >= 1) {
        let Some(&(_, c)) = classical.iter().find(|r| r.0 == t) else { continue };
        if c <= 0.0 {
            continue;
        }
        if q < ratio * c {
            return Some(Departure::At(t));
        }
        last = Some(t);
    }
    last.map(Departure::NotBy)
}

/// Classical estimate at one time.
#[derive(Clone, Copy, Debug)]
pub struct NoisyPoint {
    pub t: usize,
    pub m2: f64,
    pub sigma: f64,
    pub flagged: bool,
}

/// Estimates more than this many noise standard deviations above zero
/// count as resolved.
pub const NOISE_SIGMAS: f64 = 10.0;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpFit {
    pub t_start: usize,
    pub t_end: usize,
    /// Growth rate of `ln m2` per period.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Log-linear fit over the first contiguous run of resolved, unflagged
/// points with `t >= 1`.
pub fn exponential_window(points: &[NoisyPoint]) -> Option<ExpFit> {
    let ok = |p: &NoisyPoint| p.t >= 1 && !p.flagged && p.m2 > NOISE_SIGMAS * p.sigma && p.m2 > 0.0;
    let start = points.iter().position(ok)?;
    let run: Vec<&NoisyPoint> = points[start..].iter().take_while(|p| ok(p)).collect();
    if run.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = run.iter().map(|p| p.t as f64).collect();
    let ys: Vec<f64> = run.iter().map(|p| p.m2.ln()).collect();
    let f = linear_fit(&xs, &ys)?;
    Some(ExpFit {
        t_start: run[0].t,
        t_end: run[run.len() - 1].t,
        rate: f.slope,
        intercept: f.intercept,
        r2: f.r2,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Rise {
    pub g0_lo: f64,
    pub g0_hi: f64,
    /// `m2(g0_hi) / m2(g0_lo)`.
    pub ratio: f64,
    /// `ln ratio / ln(g0_hi / g0_lo)`.
    pub elasticity: f64,
}

/// Adjacent grid pairs with the largest `m2` ratio and the largest
/// log-log slope. Pairs with a non-positive `m2` or `g0` are skipped.
pub fn steepest_rise(scan: &[(f64, f64)]) -> Option<(Rise, Rise)> {
    let mut best_ratio: Option<Rise> = None;
    let mut best_elast: Option<Rise> = None;
    for w in scan.windows(2) {
        let ((g0, m0), (g1, m1)) = (w[0], w[1]);
        if m0 <= 0.0 || m1 <= 0.0 || g0 <= 0.0 || g1 <= g0 {
            continue;
        }
        let ratio = m1 / m0;
        let r = Rise { g0_lo: g0, g0_hi: g1, ratio, elasticity: ratio.ln() / (g1 / g0).ln() };
        if best_ratio.is_none_or(|b| r.ratio > b.ratio) {
            best_ratio = Some(r);
        }
        if best_elast.is_none_or(|b| r.elasticity > b.elasticity) {
            best_elast = Some(r);
        }
    }
    Some((best_ratio?, best_elast?))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearWindow {
    pub t_start: usize,
    pub t_end: usize,
    pub slope: f64,
    pub r2: f64,
    /// The window reached the end of the available series.
    pub censored: bool,
}

/// Longest initial window `[t_0, t_end]` of at least `min_points` points
/// over which `y` vs `t` fits a line with `R^2 >= r2_min`.
pub fn linear_window(series: &[(usize, f64)], r2_min: f64, min_points: usize) -> Option<LinearWindow> {
    if series.len() < min_points {
        return None;
    }
    let fit_upto = |n: usize| -> Option<LinearFit> {
        let xs: Vec<f64> = series[..n].iter().map(|r| r.0 as f64).collect();
        let ys: Vec<f64> = series[..n].iter().map(|r| r.1).collect();
        linear_fit(&xs, &ys)
    };
    let mut best: Option<(usize, LinearFit)> = None;
    for n in min_points..=series.len() {
        if let Some(f) = fit_upto(n).filter(|f| f.r2 >= r2_min) {
            best = Some((n, f));
        }
    }
    let (n, f) = best?;
    Some(LinearWindow {
        t_start: series[0].0,
        t_end: series[n - 1].0,
        slope: f.slope,
        r2: f.r2,
        censored: n == series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn departure_is_first_drop_below_ratio() {
        let c = [(1, 1.0), (2, 4.0), (3, 16.0), (4, 64.0)];
        let q = [(1, 1.0), (2, 3.0), (3, 7.0), (4, 10.0)];
        assert_eq!(departure_time(&q, &c, 0.5), Some(Departure::At(3)));
        let q2 = [(1, 1.0), (2, 4.0)];
        assert_eq!(departure_time(&q2, &c, 0.5), Some(Departure::NotBy(2)));
        assert_eq!(Departure::At(2).before(Departure::NotBy(2)), Some(true));
        assert_eq!(Departure::At(3).before(Departure::NotBy(2)), None);
        assert_eq!(Departure::At(3).before(Departure::At(2)), Some(false));
    }

    #[test]
    fn exponential_window_stops_at_noise() {
        let pts: Vec<NoisyPoint> = (0..8)
            .map(|t| NoisyPoint {
                t,
                m2: if t == 0 { 0.0 } else { (0.7 * t as f64).exp() },
                sigma: 0.01,
                flagged: t >= 6,
            })
            .collect();
        let f = exponential_window(&pts).unwrap();
        assert_eq!((f.t_start, f.t_end), (1, 5));
        assert!((f.rate - 0.7).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steepest_rise_finds_jump() {
        let scan = [(0.0, 0.0), (0.1, 1.0), (0.2, 1.5), (0.3, 30.0), (0.4, 35.0)];
        let (ratio, elast) = steepest_rise(&scan).unwrap();
        assert_eq!((ratio.g0_lo, ratio.g0_hi), (0.2, 0.3));
        assert_eq!((elast.g0_lo, elast.g0_hi), (0.2, 0.3));
    }

    #[test]
    fn linear_window_ends_at_bend() {
        let s: Vec<(usize, f64)> = (0..30).map(|t| (t, if t <= 15 { t as f64 } else { 15.0 })).collect();
        let w = linear_window(&s, 0.98, 4).unwrap();
        assert!(w.t_end >= 15 && w.t_end < 29, "{w:?}");
        assert!(!w.censored);
        let line: Vec<(usize, f64)> = (0..10).map(|t| (t, 2.0 * t as f64)).collect();
        assert!(linear_window(&line, 0.98, 4).unwrap().censored);
        // an early wobble does not hide a longer linear stretch
        let wobble: Vec<(usize, f64)> =
            (0..20).map(|t| (t, if t == 2 { 5.0 } else { t as f64 })).collect();
        assert_eq!(linear_window(&wobble, 0.98, 4).unwrap().t_end, 19);
    }
}
