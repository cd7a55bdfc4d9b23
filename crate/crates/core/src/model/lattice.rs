use super::norm::{within, NormFamily, NormSpec, Point, ORIGIN};

/// Largest integer `n` with `scale · √n ≤ r` (boundary slack included).
fn euclid_sq_bound(norm: &NormSpec, r: f64) -> Option<u64> {
    if r < 0.0 {
        return None;
    }
    let c = norm.scale_constant;
    let mut n = ((r / c) * (r / c)).floor() as u64;
    while within(c * ((n + 1) as f64).sqrt(), r) {
        n += 1;
    }
    while n > 0 && !within(c * (n as f64).sqrt(), r) {
        n -= 1;
    }
    Some(n)
}

/// Number of points of `Z^d` with squared Euclidean length at most `n`.
fn count_sq_ball(d: usize, n: u64) -> u64 {
    let m = n.isqrt();
    if d == 1 {
        return 2 * m + 1;
    }
    let mut total = count_sq_ball(d - 1, n);
    for x in 1..=m {
        total += 2 * count_sq_ball(d - 1, n - x * x);
    }
    total
}

/// `|{x ∈ Z^d : ‖x‖ ≤ r}|`.
pub fn lattice_ball_count(norm: &NormSpec, r: f64) -> u64 {
    if r < 0.0 {
        return 0;
    }
    match norm.family {
        NormFamily::ScaledSup => {
            let m = norm.coordinate_bound(r) as u64;
            (2 * m + 1).pow(norm.d as u32)
        }
        NormFamily::ScaledEuclidean => match euclid_sq_bound(norm, r) {
            Some(n) => count_sq_ball(norm.d, n),
            None => 0,
        },
    }
}

/// Calls `f` on every lattice point of the cube `[-m, m]^d`.
pub fn for_each_in_cube(d: usize, m: i64, mut f: impl FnMut(&Point)) {
    if m < 0 {
        return;
    }
    let mut x = ORIGIN;
    for c in x.iter_mut().take(d) {
        *c = -m;
    }
    loop {
        f(&x);
        let mut i = 0;
        loop {
            if i == d {
                return;
            }
            if x[i] < m {
                x[i] += 1;
                break;
            }
            x[i] = -m;
            i += 1;
        }
    }
}

/// Lattice points with `s_lo < ‖x‖ ≤ s_hi`, in lexicographic cube order.
pub fn shell_points(norm: &NormSpec, s_lo: f64, s_hi: f64) -> Vec<Point> {
    let m = norm.coordinate_bound(s_hi);
    let mut out = Vec::new();
    for_each_in_cube(norm.d, m, |x| {
        let s = norm.lattice_norm(x);
        if within(s, s_hi) && !within(s, s_lo) {
            out.push(*x);
        }
    });
    out
}

/// All points of the lattice ball `B_r`, origin first.
pub fn ball_points(norm: &NormSpec, r: f64) -> Vec<Point> {
    let mut pts = vec![ORIGIN];
    let m = norm.coordinate_bound(r);
    for_each_in_cube(norm.d, m, |x| {
        if *x != ORIGIN && within(norm.lattice_norm(x), r) {
            pts.push(*x);
        }
    });
    pts
}
