//! Nelder-Mead simplex minimisation.
//!
//! Standard coefficients (reflection 1, expansion 2, contraction 0.5,
//! shrink 0.5); converged when the value spread across the simplex
//! falls below the tolerance. Objectives returning NaN are treated as
//! +inf so infeasible regions are simply walked out of.

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize(
    mut objective: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    options: &SimplexOptions,
) -> SimplexResult {
    assert_eq!(x0.len(), steps.len(), "one initial step per dimension");
    let dim = x0.len();
    let mut eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;

        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        if (values[worst] - values[best]).abs() < options.tolerance {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let point = |coef: f64, from: &[f64]| -> Vec<f64> {
            (0..dim).map(|d| centroid[d] + coef * (from[d] - centroid[d])).collect()
        };

        let reflected = point(-1.0, &simplex[worst]);
        let reflected_value = eval(&reflected);

        if reflected_value < values[best] {
            let expanded = point(-2.0, &simplex[worst]);
            let expanded_value = eval(&expanded);
            if expanded_value < reflected_value {
                simplex[worst] = expanded;
                values[worst] = expanded_value;
            } else {
                simplex[worst] = reflected;
                values[worst] = reflected_value;
            }
            continue;
        }
        if reflected_value < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = reflected_value;
            continue;
        }

        let contracted = point(0.5, &simplex[worst]);
        let contracted_value = eval(&contracted);
        if contracted_value < values[worst] {
            simplex[worst] = contracted;
            values[worst] = contracted_value;
            continue;
        }

        // shrink towards the best vertex
        let best_point = simplex[best].clone();
        for &i in order.iter().skip(1) {
            for d in 0..dim {
                simplex[i][d] = best_point[d] + 0.5 * (simplex[i][d] - best_point[d]);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .expect("non-empty simplex");
    SimplexResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let result = minimize(
            rosen,
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &SimplexOptions {
                max_iterations: 2000,
                tolerance: 1e-12,
            },
        );
        assert!(result.converged);
        assert!((result.x[0] - 1.0).abs() < 1e-4, "{:?}", result.x);
        assert!((result.x[1] - 1.0).abs() < 1e-4, "{:?}", result.x);
    }

    #[test]
    fn walks_out_of_infeasible_regions() {
        // objective undefined (NaN) left of zero
        let f = |p: &[f64]| {
            if p[0] < 0.0 {
                f64::NAN
            } else {
                (p[0] - 3.0).powi(2) + (p[1] - 1.0).powi(2)
            }
        };
        let result = minimize(f, &[0.5, 0.0], &[0.2, 0.2], &SimplexOptions::default());
        assert!((result.x[0] - 3.0).abs() < 1e-3, "{:?}", result.x);
        assert!((result.x[1] - 1.0).abs() < 1e-3, "{:?}", result.x);
    }

    #[test]
    fn reports_non_convergence() {
        let result = minimize(
            |p: &[f64]| p[0],
            &[0.0],
            &[1.0],
            &SimplexOptions {
                max_iterations: 5,
                tolerance: 1e-12,
            },
        );
        assert!(!result.converged);
        assert_eq!(result.iterations, 5);
    }
}
