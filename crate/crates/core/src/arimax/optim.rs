//! Derivative-free minimization with a quasi-Newton polish.
//!
//! The estimation objective (conditional sum of squares) is smooth but
//! cheap to evaluate and low-dimensional, so the classic recipe works
//! well: a Nelder–Mead simplex search to get near the optimum, followed
//! by a BFGS polish with central-difference gradients to tighten the
//! last digits. Both stages are fully deterministic.

/// Outcome of a minimization stage.
#[derive(Debug, Clone)]
pub struct OptimResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Whether the stage met its convergence tolerance before the
    /// iteration cap.
    pub converged: bool,
    /// Iterations actually used.
    pub iterations: usize,
}

/// Relative objective-change tolerance shared by both stages.
pub const REL_TOL: f64 = 1e-10;

/// Nelder–Mead iteration cap.
pub const MAX_SIMPLEX_ITER: usize = 500;

/// BFGS polish iteration cap.
pub const MAX_POLISH_ITER: usize = 200;

fn relative_gap(worst: f64, best: f64) -> f64 {
    (worst - best) / (1.0 + best.abs())
}

/// Minimizes `f` by the Nelder–Mead simplex method.
///
/// The initial simplex perturbs each coordinate of `x0` by 5% of its
/// magnitude (or 0.1 for zero coordinates). Converges when the relative
/// objective spread across the simplex drops below [`REL_TOL`].
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], max_iter: usize) -> OptimResult {
    let dim = x0.len();
    if dim == 0 {
        return OptimResult { x: Vec::new(), value: f(&[]), converged: true, iterations: 0 };
    }
    // Standard coefficients: reflection, expansion, contraction, shrink.
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += if v[i] == 0.0 { 0.1 } else { 0.05 * v[i].abs() };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Sort vertices best-first; stable sort keeps ties deterministic.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if relative_gap(values[dim], values[0]) < REL_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let blend = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect()
        };

        let reflected = blend(ALPHA);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = blend(GAMMA);
            let fe = f(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            // Contract toward the better of the worst vertex and the
            // reflection; shrink the whole simplex if that fails too.
            let (contracted, bound) = if fr < values[dim] {
                (blend(RHO), fr)
            } else {
                (blend(-RHO), values[dim])
            };
            let fc = f(&contracted);
            if fc < bound {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                let best = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + SIGMA * (*x - b);
                    }
                }
                for (val, v) in values.iter_mut().zip(&simplex).skip(1) {
                    *val = f(v);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty simplex");
    OptimResult {
        x: simplex[best].clone(),
        value: values[best],
        converged,
        iterations,
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS polish with central-difference gradients and Armijo backtracking.
///
/// Starts from `x0` (typically the simplex optimum) with an identity
/// inverse-Hessian guess. Converges on relative objective change below
/// [`REL_TOL`] or an infinity-norm gradient below 1e-8; a failed line
/// search at a descent direction of `-g` also counts as stationary.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], max_iter: usize) -> OptimResult {
    const C1: f64 = 1e-4;
    const GRAD_TOL: f64 = 1e-8;
    let dim = x0.len();
    if dim == 0 {
        return OptimResult { x: Vec::new(), value: f(&[]), converged: true, iterations: 0 };
    }
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = gradient(&f, &x);
    // Inverse Hessian approximation, row-major.
    let mut h_inv: Vec<f64> = {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        m
    };

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        if g.iter().all(|v| v.abs() < GRAD_TOL) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir: Vec<f64> = (0..dim)
            .map(|i| -(0..dim).map(|j| h_inv[i * dim + j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !(slope < 0.0) {
            // Curvature information went bad; restart from steepest descent.
            for i in 0..dim {
                for j in 0..dim {
                    h_inv[i * dim + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        // Backtracking line search under the Armijo condition.
        let mut step = 1.0;
        let mut x_new = Vec::new();
        let mut f_new = f64::INFINITY;
        let mut ok = false;
        while step > 1e-14 {
            x_new = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            f_new = f(&x_new);
            if f_new <= fx + C1 * step * slope {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            // No progress possible along a genuine descent direction:
            // numerically stationary.
            converged = true;
            break;
        }

        let g_new = gradient(&f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // Standard inverse-Hessian update:
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1 / (sᵀ y).
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..dim)
                .map(|i| (0..dim).map(|j| h_inv[i * dim + j] * yv[j]).sum::<f64>())
                .collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..dim {
                for j in 0..dim {
                    h_inv[i * dim + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }

        let gap = relative_gap(fx, f_new);
        x = x_new;
        fx = f_new;
        g = g_new;
        if gap >= 0.0 && gap < REL_TOL {
            converged = true;
            break;
        }
    }
    OptimResult { x, value: fx, converged, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let r = nelder_mead(sphere, &[3.0, -2.0, 1.5], MAX_SIMPLEX_ITER);
        assert!(r.converged);
        assert!(r.value < 1e-8, "value {}", r.value);
    }

    #[test]
    fn bfgs_polish_tightens_simplex_result() {
        let rough = nelder_mead(rosenbrock, &[-1.2, 1.0], 120);
        let polished = bfgs(rosenbrock, &rough.x, MAX_POLISH_ITER);
        assert!(polished.value <= rough.value + 1e-15);
        assert!((polished.x[0] - 1.0).abs() < 1e-4, "x0 = {}", polished.x[0]);
        assert!((polished.x[1] - 1.0).abs() < 1e-4, "x1 = {}", polished.x[1]);
    }

    #[test]
    fn optimizers_are_deterministic() {
        let a = nelder_mead(rosenbrock, &[0.5, 0.5], MAX_SIMPLEX_ITER);
        let b = nelder_mead(rosenbrock, &[0.5, 0.5], MAX_SIMPLEX_ITER);
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
        let pa = bfgs(sphere, &[1.0, 2.0], MAX_POLISH_ITER);
        let pb = bfgs(sphere, &[1.0, 2.0], MAX_POLISH_ITER);
        assert_eq!(pa.x, pb.x);
    }

    #[test]
    fn zero_dimension_is_trivially_converged() {
        let r = nelder_mead(|_| 7.0, &[], MAX_SIMPLEX_ITER);
        assert!(r.converged);
        assert_eq!(r.value, 7.0);
        let r = bfgs(|_| 7.0, &[], MAX_POLISH_ITER);
        assert!(r.converged);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        // Objective is infinite outside |x| < 2; the optimum is at 1.
        let f = |x: &[f64]| {
            if x[0].abs() >= 2.0 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[-1.5], MAX_SIMPLEX_ITER);
        let r = bfgs(f, &r.x, MAX_POLISH_ITER);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "x = {}", r.x[0]);
    }
}
