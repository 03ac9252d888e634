//! DIviding RECTangles (Jones, Perttunen & Stuckman 1993) over a box.
//!
//! The box is normalized to the unit hypercube. Each rectangle is stored as
//! its center plus an integer trisection level per axis (side length
//! `3^-level`), so rectangle sizes compare exactly. Per iteration the
//! potentially optimal rectangles are selected, their sample points are
//! evaluated as one batch (in parallel, merged in candidate order), and the
//! rectangles are trisected along their longest sides, best direction first.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LavaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DirectOptions {
    /// Total objective evaluations allowed, including the initial center.
    pub max_evaluations: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            max_evaluations: 40,
            epsilon: 1e-4,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Every evaluation in the order it was made.
    pub evaluations: Vec<Evaluation>,
    pub iterations: usize,
}

struct Rect {
    center: Vec<f64>,
    levels: Vec<u32>,
    value: f64,
    size: f64,
}

fn half_diagonal(levels: &[u32]) -> f64 {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    0.5 * sorted.iter().map(|&l| 3f64.powi(-2 * l as i32)).sum::<f64>().sqrt()
}

fn potentially_optimal(rects: &[Rect], epsilon: f64) -> Vec<usize> {
    // best rectangle per distinct size
    let mut groups: Vec<usize> = Vec::new();
    for (idx, r) in rects.iter().enumerate() {
        if !r.value.is_finite() {
            continue;
        }
        match groups.iter_mut().find(|g| rects[**g].size == r.size) {
            Some(g) if r.value < rects[*g].value => *g = idx,
            Some(_) => {}
            None => groups.push(idx),
        }
    }
    groups.sort_by(|&a, &b| rects[a].size.total_cmp(&rects[b].size));
    let fmin = groups.iter().map(|&g| rects[g].value).fold(f64::INFINITY, f64::min);

    let mut chosen = Vec::new();
    for (pos, &j) in groups.iter().enumerate() {
        let (dj, fj) = (rects[j].size, rects[j].value);
        let k_low = groups[..pos]
            .iter()
            .map(|&i| (fj - rects[i].value) / (dj - rects[i].size))
            .fold(f64::NEG_INFINITY, f64::max);
        let k_up = groups[pos + 1..]
            .iter()
            .map(|&i| (rects[i].value - fj) / (rects[i].size - dj))
            .fold(f64::INFINITY, f64::min);
        if k_up <= 0.0 || k_low > k_up {
            continue;
        }
        if k_up.is_finite() && fj - k_up * dj > fmin - epsilon * fmin.abs() {
            continue;
        }
        chosen.push(j);
    }
    chosen
}

/// Minimizes `objective` over the box `[lower, upper]`.
pub fn minimize<F>(objective: F, lower: &[f64], upper: &[f64], opts: &DirectOptions) -> Result<DirectResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if opts.max_evaluations < 1 {
        return Err(LavaError::param("DIRECT evaluation budget must be at least 1"));
    }
    if lower.is_empty() || lower.len() != upper.len() {
        return Err(LavaError::param("DIRECT bounds must be non-empty and equally long"));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(LavaError::param("DIRECT bounds need lower < upper on every axis"));
    }
    let dim = lower.len();
    let to_actual = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&t, (&l, &h))| l + t * (h - l))
            .collect()
    };
    let eval = |u: &[f64]| -> Evaluation {
        let x = to_actual(u);
        let v = objective(&x);
        Evaluation {
            x,
            value: if v.is_nan() { f64::INFINITY } else { v },
        }
    };

    let center = vec![0.5; dim];
    let first = eval(&center);
    let levels = vec![0u32; dim];
    let mut rects = vec![Rect {
        size: half_diagonal(&levels),
        center,
        levels,
        value: first.value,
    }];
    let mut evaluations = vec![first];
    let mut iterations = 0;

    while evaluations.len() < opts.max_evaluations && iterations < opts.max_iterations {
        let por = potentially_optimal(&rects, opts.epsilon);
        // (rect index, axes to split, sample centers)
        let mut plan: Vec<(usize, Vec<usize>, Vec<Vec<f64>>)> = Vec::new();
        let mut planned = 0;
        for r in por {
            let rect = &rects[r];
            let min_level = *rect.levels.iter().min().unwrap();
            let axes: Vec<usize> = (0..dim).filter(|&i| rect.levels[i] == min_level).collect();
            if evaluations.len() + planned + 2 * axes.len() > opts.max_evaluations {
                break;
            }
            let delta = 3f64.powi(-(min_level as i32 + 1));
            let mut samples = Vec::with_capacity(2 * axes.len());
            for &i in &axes {
                let mut plus = rect.center.clone();
                plus[i] += delta;
                let mut minus = rect.center.clone();
                minus[i] -= delta;
                samples.push(plus);
                samples.push(minus);
            }
            planned += samples.len();
            plan.push((r, axes, samples));
        }
        if plan.is_empty() {
            break;
        }
        iterations += 1;

        let flat: Vec<&Vec<f64>> = plan.iter().flat_map(|(_, _, s)| s.iter()).collect();
        let results: Vec<Evaluation> = flat.par_iter().map(|u| eval(u)).collect();

        let mut offset = 0;
        for (r, axes, samples) in plan {
            let vals = &results[offset..offset + samples.len()];
            offset += samples.len();
            let mut order: Vec<(f64, usize, usize)> = axes
                .iter()
                .enumerate()
                .map(|(k, &i)| (vals[2 * k].value.min(vals[2 * k + 1].value), i, k))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut levels = rects[r].levels.clone();
            for (_, axis, k) in order {
                levels[axis] += 1;
                for s in 0..2 {
                    rects.push(Rect {
                        center: samples[2 * k + s].clone(),
                        size: half_diagonal(&levels),
                        levels: levels.clone(),
                        value: vals[2 * k + s].value,
                    });
                }
            }
            rects[r].size = half_diagonal(&levels);
            rects[r].levels = levels;
        }
        evaluations.extend(results);
    }

    let best = evaluations
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, e)| e.clone())
        .expect("at least one evaluation");
    Ok(DirectResult {
        x: best.x,
        value: best.value,
        evaluations,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize) -> DirectOptions {
        DirectOptions {
            max_evaluations: n,
            ..Default::default()
        }
    }

    #[test]
    fn budget_one_is_center() {
        let r = minimize(|x| x[0] * x[0], &[-4.0, -4.0], &[4.0, 6.0], &opts(1)).unwrap();
        assert_eq!(r.evaluations.len(), 1);
        assert_eq!(r.x, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(minimize(|_| 0.0, &[0.0], &[1.0], &opts(0)).is_err());
        assert!(minimize(|_| 0.0, &[1.0], &[1.0], &opts(5)).is_err());
    }

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2);
        let r = minimize(f, &[-4.0, -4.0], &[4.0, 4.0], &opts(200)).unwrap();
        assert!(r.evaluations.len() <= 200);
        assert!((r.x[0] - 1.0).abs() < 0.05 && (r.x[1] + 2.0).abs() < 0.05, "{:?}", r.x);
    }

    #[test]
    fn best_is_min_of_evaluations() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[0] * x[0] * 0.1;
        let r = minimize(f, &[-5.0], &[5.0], &opts(60)).unwrap();
        let m = r.evaluations.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        assert_eq!(r.value, m);
    }

    #[test]
    fn multimodal_finds_global_basin() {
        // global minimum near x = -0.52, a local one near x = 1.55
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[0] * x[0] * 0.1;
        let r = minimize(f, &[-5.0], &[5.0], &opts(100)).unwrap();
        assert!((r.x[0] + 0.52).abs() < 0.05, "{:?}", r.x);
    }
}
