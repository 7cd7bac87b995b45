//! Dense kernels over row-major slices.

/// `y = W x + b` with `W` of shape `rows × x.len()`.
pub fn affine(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, yr) in y.iter_mut().enumerate() {
        *yr = b.get(r).copied().unwrap_or(0.0) + dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `y += W x`.
pub fn matvec_add(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, yr) in y.iter_mut().enumerate() {
        *yr += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `x_grad += Wᵀ dy`.
pub fn matvec_t_add(w: &[f64], dy: &[f64], x_grad: &mut [f64]) {
    let cols = x_grad.len();
    for (r, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(d, &w[r * cols..(r + 1) * cols], x_grad);
        }
    }
}

/// `G += dy ⊗ x`.
pub fn outer_add(dy: &[f64], x: &[f64], g: &mut [f64]) {
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(d, x, &mut g[r * cols..(r + 1) * cols]);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators; fixed order keeps results reproducible
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        s[0] += a[j] * b[j];
        s[1] += a[j + 1] * b[j + 1];
        s[2] += a[j + 2] * b[j + 2];
        s[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
