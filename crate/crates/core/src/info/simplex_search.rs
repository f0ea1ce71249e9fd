//! Nelder–Mead downhill simplex search.

#[allow(dead_code)]
pub(crate) struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge
/// `step`. Stops after `max_evals` evaluations or once the spread of values
/// across the simplex falls below `ftol`.
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> SearchOutcome {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    points.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    let lerp = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    };

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if values[n] - values[0] <= ftol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &points[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }

        // Reflection goes through the centroid away from the worst point.
        let reflected = lerp(&centroid, &points[n], -REFLECT);
        let fr = f(&reflected);
        evals += 1;

        if fr < values[0] {
            let expanded = lerp(&centroid, &points[n], -EXPAND);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                points[n] = expanded;
                values[n] = fe;
            } else {
                points[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            points[n] = reflected;
            values[n] = fr;
            continue;
        }

        let (contracted, fc) = if fr < values[n] {
            let c = lerp(&centroid, &reflected, CONTRACT);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = lerp(&centroid, &points[n], CONTRACT);
            let fc = f(&c);
            (c, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            points[n] = contracted;
            values[n] = fc;
            continue;
        }

        let best = points[0].clone();
        for i in 1..=n {
            points[i] = lerp(&best, &points[i], SHRINK);
            values[i] = f(&points[i]);
        }
        evals += n;
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("simplex is never empty");
    SearchOutcome {
        x: points.swap_remove(best),
        value: values[best],
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let out = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2000,
            1e-20,
        );
        assert!((out.x[0] - 1.0).abs() < 1e-6);
        assert!((out.x[1] + 2.0).abs() < 1e-6);
        assert!(out.evaluations <= 2000 + 2);
    }

    #[test]
    fn rosenbrock() {
        let out = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            0.3,
            10_000,
            1e-24,
        );
        assert!(out.value < 1e-10, "{}", out.value);
    }
}
