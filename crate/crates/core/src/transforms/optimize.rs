//! Golden-section minimisation with a coarse unimodality scan.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[lo, hi]` until the bracket is shorter than `tol`.
/// Returns `(x_min, f_min)`.
pub fn golden_section_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Samples `f` on `points` equispaced nodes and checks that the samples
/// first decrease and then increase.
pub fn unimodality_scan(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let table: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, f(x))
        })
        .collect();
    let mut rising = false;
    let mut ok = table.iter().all(|(_, y)| y.is_finite());
    for w in table.windows(2) {
        let dy = w[1].1 - w[0].1;
        if dy > 0.0 {
            rising = true;
        } else if dy < 0.0 && rising {
            ok = false;
        }
    }
    if ok {
        Ok(table)
    } else {
        let rendered = table
            .iter()
            .map(|(x, y)| format!("{x:.6},{y:.9}"))
            .collect::<Vec<_>>()
            .join("\n");
        Err(Error::NotUnimodal {
            lo,
            hi,
            table: rendered,
        })
    }
}
