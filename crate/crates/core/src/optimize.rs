//! Derivative-free minimisation (Nelder–Mead simplex).

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop as soon as the best value falls below this.
    pub target: f64,
    pub max_iterations: usize,
    /// Stop when the simplex has shrunk below this size in every coordinate.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            target: 1e-6,
            max_iterations: 200,
            x_tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub iterations: usize,
}

fn combine<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    // a + t (b − a)
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = a[i] + t * (b[i] - a[i]);
    }
    out
}

/// Minimises `f` from `x0` with an initial simplex of axis steps `step`.
///
/// Coefficients are the usual reflection 1, expansion 2, contraction 1/2 and
/// shrink 1/2. The iteration order is fixed, so results are reproducible.
pub fn nelder_mead<const N: usize, F>(
    f: F,
    x0: [f64; N],
    step: [f64; N],
    opts: NelderMeadOptions,
) -> Minimum<N>
where
    F: Fn(&[f64; N]) -> f64,
{
    let eval = |x: &[f64; N]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, eval(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += step[i];
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let size = (0..N)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(x, _)| (x[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if best < opts.target || iterations >= opts.max_iterations || size < opts.x_tolerance {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let (worst_x, worst_v) = simplex[N];
        let second_worst = simplex[N - 1].1;

        let reflected = combine(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected);
        if fr < best {
            let expanded = combine(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded);
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[N] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst_v {
            let x = combine(&centroid, &worst_x, -0.5);
            (x, eval(&x))
        } else {
            let x = combine(&centroid, &worst_x, 0.5);
            (x, eval(&x))
        };
        if fc < worst_v.min(fr) {
            simplex[N] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            let x = combine(&anchor, &vertex.0, 0.5);
            *vertex = (x, eval(&x));
        }
    }
    let (x, value) = simplex[0];
    Minimum { x, value, iterations }
}
