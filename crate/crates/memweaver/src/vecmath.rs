//! Small dense-vector helpers used by clustering, the walk, and segmentation.

/// Compensated dot product (Ogita-Rump Dot2): fma-exact products plus
/// two-sum error tracking keep the result accurate to about one ulp even
/// when the terms cancel, which matters for near-orthogonal cosines raised
/// to fractional powers.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(*y, -p);
        let t = sum + p;
        let s_err = if sum.abs() >= p.abs() {
            (sum - t) + p
        } else {
            (p - t) + sum
        };
        sum = t;
        comp += p_err + s_err;
    }
    sum + comp
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Returns a unit-norm copy; zero vectors are returned unchanged.
pub fn l2_normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        return a.to_vec();
    }
    a.iter().map(|x| x / n).collect()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
