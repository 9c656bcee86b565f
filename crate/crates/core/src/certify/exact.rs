//! Exact envelope gap for scalar inputs.
//!
//! In one dimension `ĥ` is the lower convex hull of the points `(bᵢ, zᵢ)` and
//! `č` is the upper envelope of the support lines. Both are piecewise linear,
//! so their difference attains its maximum over `[min bᵢ, max bᵢ]` at a
//! breakpoint of either envelope or at an endpoint.

use super::{lower_env, CertifyError, EnvelopePair};

/// Lower convex hull of `(x, z)` points, sorted by `x`.
fn lower_hull(env: &EnvelopePair) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = env.points().iter().map(|p| (p.b[0], p.value)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|later, earlier| later.0 == earlier.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or above the chord from a to p
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn hull_value(hull: &[(f64, f64)], x: f64) -> f64 {
    let k = hull.partition_point(|p| p.0 < x);
    if k < hull.len() && hull[k].0 == x {
        return hull[k].1;
    }
    let (a, b) = (hull[k.saturating_sub(1)], hull[k.min(hull.len() - 1)]);
    if a.0 == b.0 {
        return a.1;
    }
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// Abscissae where the upper envelope of the support lines changes line.
fn line_breakpoints(env: &EnvelopePair) -> Vec<f64> {
    // line: z = slope·x + intercept
    let mut lines: Vec<(f64, f64)> = env.points().iter().map(|p| (p.grad[0], p.value - p.grad[0] * p.b[0])).collect();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // equal slopes: keep the highest intercept (last after sorting)
    let mut unique: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        if unique.last().is_some_and(|u| u.0 == l.0) {
            unique.pop();
        }
        unique.push(l);
    }
    let cross = |a: (f64, f64), b: (f64, f64)| (a.1 - b.1) / (b.0 - a.0);
    let mut env_lines: Vec<(f64, f64)> = Vec::with_capacity(unique.len());
    for l in unique {
        while env_lines.len() >= 2 {
            let (a, b) = (env_lines[env_lines.len() - 2], env_lines[env_lines.len() - 1]);
            // b never wins if l overtakes a no later than b does
            if cross(a, l) <= cross(a, b) {
                env_lines.pop();
            } else {
                break;
            }
        }
        env_lines.push(l);
    }
    env_lines.windows(2).map(|w| cross(w[0], w[1])).collect()
}

/// Supremum over the hull of `max(ĥ_f − č_Φ, ĥ_Φ − č_f)`, where it is attained,
/// and the number of candidate points examined.
pub fn exact_1d_gap(f: &EnvelopePair, phi: &EnvelopePair) -> Result<(f64, f64, usize), CertifyError> {
    for env in [f, phi] {
        if env.dim() != 1 {
            return Err(CertifyError::NotOneDimensional(env.dim()));
        }
    }
    let (hf, hp) = (lower_hull(f), lower_hull(phi));
    let lo = hp[0].0.max(hf[0].0);
    let hi = hp[hp.len() - 1].0.min(hf[hf.len() - 1].0);
    let mut xs: Vec<f64> = vec![lo, hi];
    xs.extend(hf.iter().chain(&hp).map(|p| p.0));
    xs.extend(line_breakpoints(f));
    xs.extend(line_breakpoints(phi));
    xs.retain(|&x| x >= lo && x <= hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut best = (f64::NEG_INFINITY, lo);
    for &x in &xs {
        let g = (hull_value(&hf, x) - lower_env(phi, &[x])).max(hull_value(&hp, x) - lower_env(f, &[x]));
        if g > best.0 {
            best = (g, x);
        }
    }
    Ok((best.0, best.1, xs.len()))
}
