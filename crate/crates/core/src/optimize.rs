//! One-dimensional minimizers used by the fits and the loop search.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMinimum {
    pub x: f64,
    pub f: f64,
    pub index: usize,
    pub points: usize,
    pub step: f64,
}

impl GridMinimum {
    pub fn on_edge(&self) -> bool {
        self.index == 0 || self.index + 1 == self.points
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub f: f64,
}

/// Evaluates `f` on `points` equally spaced abscissae spanning `[lo, hi]`.
/// NaN values never win. Ties keep the first point.
pub fn grid_minimum<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, points: usize) -> GridMinimum {
    assert!(points >= 2, "grid needs at least two points");
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = GridMinimum {
        x: lo,
        f: f64::INFINITY,
        index: 0,
        points,
        step,
    };
    for i in 0..points {
        let x = if i + 1 == points { hi } else { lo + i as f64 * step };
        let v = f(x);
        if v < best.f {
            best.x = x;
            best.f = v;
            best.index = i;
        }
    }
    best
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search on `[lo, hi]`, stopping once the bracket is
/// narrower than `tol`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Minimum {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    let (fa, fb) = (f(a), f(b));
    [(x, fx), (a, fa), (b, fb)].into_iter().fold(
        Minimum { x, f: fx },
        |m, (x, v)| if v < m.f { Minimum { x, f: v } } else { m },
    )
}

/// Brent's parabolic-interpolation minimizer on `[lo, hi]`.
pub fn brent<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, rel_tol: f64, max_iter: usize) -> Minimum {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, f: fx }
}

/// Coarse grid followed by Brent refinement inside the neighbouring cells.
pub fn grid_then_brent<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, points: usize) -> (GridMinimum, Minimum) {
    let grid = grid_minimum(f, lo, hi, points);
    let a = (grid.x - grid.step).max(lo);
    let b = (grid.x + grid.step).min(hi);
    let refined = brent(f, a, b, 1e-12, 200);
    let best = if refined.f <= grid.f {
        refined
    } else {
        Minimum { x: grid.x, f: grid.f }
    };
    (grid, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_finds_parabola_vertex() {
        let g = grid_minimum(&|x: f64| (x - 0.3).powi(2), 0.0, 1.0, 11);
        assert_eq!(g.index, 3);
        assert!(!g.on_edge());
        let g = grid_minimum(&|x: f64| x, 0.0, 1.0, 11);
        assert!(g.on_edge());
    }

    #[test]
    fn brent_and_golden_agree_on_smooth_minimum() {
        let f = |x: f64| (x - 1.234_567).powi(2) + 0.5 * (x - 1.234_567).powi(4) + 2.0;
        let b = brent(&f, 0.0, 3.0, 1e-12, 200);
        let g = golden_section(&f, 0.0, 3.0, 1e-12, 500);
        assert!((b.x - 1.234_567).abs() < 1e-7);
        assert!((g.x - 1.234_567).abs() < 1e-7);
    }

    #[test]
    fn brent_on_cosine() {
        let m = brent(&|x: f64| x.cos(), 2.0, 4.5, 1e-12, 200);
        assert!((m.x - std::f64::consts::PI).abs() < 1e-7);
        assert!((m.f + 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_then_brent_refines() {
        let (g, m) = grid_then_brent(&|x: f64| (x - 0.4321).powi(2), -1.0, 1.0, 21);
        assert!(!g.on_edge());
        assert!((m.x - 0.4321).abs() < 1e-7);
    }
}
