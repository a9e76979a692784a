//! Integration primitives for integrands carrying inverse square-root endpoint
//! behaviour, principal values, and semi-infinite rays.
//!
//! Every finite interval is handled with the Gauss rule for the weight
//! `1/sqrt((x - lo)(hi - x))`. A multi-interval weight `1/r(x)` is split into
//! that local factor and a smooth remainder which the caller folds into the
//! integrand. Principal values and logarithmic potentials are computed by
//! expanding the smooth part in Chebyshev polynomials and mapping each basis
//! element through its exact image.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};

/// Default number of nodes per cut or gap.
pub const DEFAULT_ORDER: usize = 128;

/// Gauss rule for `∫_lo^hi p(x) / sqrt((x - lo)(hi - x)) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh<T: Scalar> {
    lo: T,
    hi: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    angles: Vec<T>,
}

impl<T: Scalar> IntervalMesh<T> {
    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in strictly increasing order.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Angles `θ_i` with `x_i = center + half_width * cos θ_i`.
    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn center(&self) -> T {
        (self.lo + self.hi) * lit(0.5)
    }

    pub fn half_width(&self) -> T {
        (self.hi - self.lo) * lit(0.5)
    }

    /// Map `x` to the reference coordinate on `[-1, 1]`.
    pub fn to_local(&self, x: T) -> T {
        (x - self.center()) / self.half_width()
    }

    pub fn from_local(&self, u: T) -> T {
        self.center() + self.half_width() * u
    }

    /// `sqrt((x - lo)(hi - x))`, the factor absorbed by the rule.
    pub fn edge_factor(&self, x: T) -> T {
        ((x - self.lo) * (self.hi - x)).abs().sqrt()
    }
}

/// Build the `n`-point inverse square-root Gauss rule on `(lo, hi)`.
pub fn make_mesh<T: Scalar>(lo: T, hi: T, n: usize) -> Result<IntervalMesh<T>> {
    if n < 2 {
        return Err(Error::InvalidOrder(n));
    }
    let scale = T::one().max(lo.abs()).max(hi.abs());
    if !(hi - lo > T::tiny() * scale) {
        return Err(Error::CollapsedInterval {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    let c = (lo + hi) * lit(0.5);
    let h = (hi - lo) * lit(0.5);
    let nn: T = from_usize(n);
    let w = T::PI() / nn;
    let mut nodes = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    // reversed so that nodes increase
    for i in (1..=n).rev() {
        let theta = from_usize::<T>(2 * i - 1) * T::PI() / (lit::<T>(2.0) * nn);
        angles.push(theta);
        nodes.push(c + h * theta.cos());
    }
    Ok(IntervalMesh {
        lo,
        hi,
        nodes,
        weights: vec![w; n],
        angles,
    })
}

/// `Σ w_i f(x_i) ≈ ∫ f(x) / sqrt((x - lo)(hi - x)) dx`.
pub fn integrate_singular<T: Scalar, F: Fn(T) -> T>(f: F, mesh: &IntervalMesh<T>) -> Result<T> {
    let mut acc = T::zero();
    for (&x, &w) in mesh.nodes.iter().zip(&mesh.weights) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite(x.to_f64().unwrap_or(f64::NAN)));
        }
        acc = acc + w * fx;
    }
    Ok(acc)
}

/// Principal value `P∫ f(t) / ((t - x0) sqrt((t - lo)(hi - t))) dt`.
pub fn pv_integrate<T: Scalar, F: Fn(T) -> T>(f: F, mesh: &IntervalMesh<T>, x0: T) -> Result<T> {
    let xi = mesh.to_local(x0);
    if !(xi.abs() < T::one() - T::tiny()) {
        return Err(Error::NearEndpoint {
            x: x0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let values = sample(&f, mesh)?;
    let series = ChebSeries::from_samples(mesh, &values);
    Ok(series.cauchy(xi) / mesh.half_width())
}

fn sample<T: Scalar, F: Fn(T) -> T>(f: &F, mesh: &IntervalMesh<T>) -> Result<Vec<T>> {
    mesh.nodes
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(x.to_f64().unwrap_or(f64::NAN)))
            }
        })
        .collect()
}

/// `S(ξ) = sign(ξ) sqrt(ξ² - 1)` and `w = ξ - S`, for `|ξ| > 1`.
#[inline]
fn outer_branch<T: Scalar>(xi: T) -> (T, T) {
    let s = (xi * xi - T::one()).sqrt();
    let s = if xi < T::zero() { -s } else { s };
    (s, xi - s)
}

/// Chebyshev expansion `F(u) = Σ_k c_k T_k(u)` of a function sampled on the
/// nodes of an [`IntervalMesh`], together with the exact images of `T_k`
/// under the weighted Cauchy and logarithmic transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries<T: Scalar> {
    coeffs: Vec<T>,
}

impl<T: Scalar> ChebSeries<T> {
    pub fn from_samples(mesh: &IntervalMesh<T>, values: &[T]) -> Self {
        assert_eq!(values.len(), mesh.order());
        let n = values.len();
        let scale = lit::<T>(2.0) / from_usize(n);
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let kk: T = from_usize(k);
            let mut acc = T::zero();
            for (&v, &th) in values.iter().zip(&mesh.angles) {
                acc = acc + v * (kk * th).cos();
            }
            coeffs.push(acc * scale);
        }
        coeffs[0] = coeffs[0] * lit(0.5);
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn eval(&self, u: T) -> T {
        // Clenshaw
        let two_u = u + u;
        let (mut b1, mut b2) = (T::zero(), T::zero());
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + two_u * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + u * b1 - b2
    }

    /// `∫_{-1}^{1} F(u) / sqrt(1 - u²) du`.
    pub fn weighted_integral(&self) -> T {
        T::PI() * self.coeffs[0]
    }

    /// `∫_{-1}^{1} F(u) / ((u - ξ) sqrt(1 - u²)) du`, principal value for `|ξ| ≤ 1`.
    pub fn cauchy(&self, xi: T) -> T {
        if xi.abs() <= T::one() {
            // Σ c_k U_{k-1}(ξ)
            let two_xi = xi + xi;
            let (mut u_prev, mut u_cur) = (T::zero(), T::one());
            let mut acc = T::zero();
            for &c in self.coeffs.iter().skip(1) {
                acc = acc + c * u_cur;
                let next = two_xi * u_cur - u_prev;
                u_prev = u_cur;
                u_cur = next;
            }
            T::PI() * acc
        } else {
            let (s, w) = outer_branch(xi);
            let mut pw = T::one();
            let mut acc = T::zero();
            for &c in &self.coeffs {
                acc = acc + c * pw;
                pw = pw * w;
            }
            -T::PI() * acc / s
        }
    }

    /// Derivative of [`Self::cauchy`] with respect to `ξ`.
    pub fn cauchy_deriv(&self, xi: T) -> T {
        if xi.abs() <= T::one() {
            // d/dξ U_n: U'_{n+1} = 2 U_n + 2ξ U'_n - U'_{n-1}
            let two_xi = xi + xi;
            let two: T = lit(2.0);
            let (mut u_prev, mut u_cur) = (T::zero(), T::one());
            let (mut d_prev, mut d_cur) = (T::zero(), T::zero());
            let mut acc = T::zero();
            for &c in self.coeffs.iter().skip(1) {
                acc = acc + c * d_cur;
                let next = two_xi * u_cur - u_prev;
                let dnext = two * u_cur + two_xi * d_cur - d_prev;
                u_prev = u_cur;
                u_cur = next;
                d_prev = d_cur;
                d_cur = dnext;
            }
            T::PI() * acc
        } else {
            // d/dξ [w^k / S] = -k w^k / S² - ξ w^k / S³
            let (s, w) = outer_branch(xi);
            let mut pw = T::one();
            let mut acc = T::zero();
            for (k, &c) in self.coeffs.iter().enumerate() {
                let kk: T = from_usize(k);
                acc = acc + c * pw * (-kk / (s * s) - xi / (s * s * s));
                pw = pw * w;
            }
            -T::PI() * acc
        }
    }

    /// `∫_{-1}^{1} ln|ξ - u| F(u) / sqrt(1 - u²) du`.
    pub fn log_potential(&self, xi: T) -> T {
        let pi = T::PI();
        let ln2 = T::LN_2();
        if xi.abs() <= T::one() {
            let two_xi = xi + xi;
            let (mut t_prev, mut t_cur) = (T::one(), xi);
            let mut acc = -pi * ln2 * self.coeffs[0];
            for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
                acc = acc - pi * c * t_cur / from_usize(k);
                let next = two_xi * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
            }
            acc
        } else {
            let (s, w) = outer_branch(xi);
            let mut acc = pi * self.coeffs[0] * ((xi.abs() + s.abs()) * lit(0.5)).ln();
            let mut pw = w;
            for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
                acc = acc - pi * c * pw / from_usize(k);
                pw = pw * w;
            }
            acc
        }
    }
}

/// Second-kind expansion `g(u) = Σ_n b_n U_n(u)` used for transforms with the
/// weight `sqrt(1 - u²)` in the numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtSeries<T: Scalar> {
    coeffs: Vec<T>,
}

impl<T: Scalar> SqrtSeries<T> {
    pub fn from_samples(mesh: &IntervalMesh<T>, values: &[T]) -> Self {
        assert_eq!(values.len(), mesh.order());
        let n = values.len();
        let scale = lit::<T>(2.0) / from_usize(n);
        let mut coeffs = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let kk: T = from_usize(k + 1);
            let mut acc = T::zero();
            for (&v, &th) in values.iter().zip(&mesh.angles) {
                acc = acc + v * (kk * th).sin() * th.sin();
            }
            coeffs.push(acc * scale);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// `∫_{-1}^{1} sqrt(1 - u²) g(u) du`.
    pub fn integral(&self) -> T {
        T::FRAC_PI_2() * self.coeffs[0]
    }

    /// `∫_{-1}^{1} sqrt(1 - u²) g(u) / (u - ξ) du`, principal value for `|ξ| ≤ 1`.
    pub fn transform(&self, xi: T) -> T {
        let mut acc = T::zero();
        if xi.abs() <= T::one() {
            let two_xi = xi + xi;
            let (mut t_prev, mut t_cur) = (T::one(), xi);
            for &b in &self.coeffs {
                acc = acc + b * t_cur;
                let next = two_xi * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
            }
        } else {
            let (_, w) = outer_branch(xi);
            let mut pw = w;
            for &b in &self.coeffs {
                acc = acc + b * pw;
                pw = pw * w;
            }
        }
        -T::PI() * acc
    }
}

/// Gauss–Legendre nodes and weights on `(-1, 1)`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nn = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nn + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nn * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = lit(-x);
        nodes[n - 1 - i] = lit(x);
        weights[i] = lit(w);
        weights[n - 1 - i] = lit(w);
    }
    (nodes, weights)
}

/// Quadrature for `∫_start^∞ f(t) dt` with `f = O(t⁻²)`, tolerating an
/// inverse square-root singularity at `start`.
///
/// Uses `t = start + L s² / (1 - s²)` with Gauss–Legendre in `s ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMesh<T: Scalar> {
    start: T,
    scale: T,
    nodes: Vec<T>,
    offsets: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> RayMesh<T> {
    pub fn new(start: T, scale: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidOrder(n));
        }
        let (gx, gw) = gauss_legendre::<T>(n);
        let half: T = lit(0.5);
        let two: T = lit(2.0);
        let mut nodes = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (x, w) in gx.into_iter().zip(gw) {
            let s = (x + T::one()) * half;
            let one_m = T::one() - s * s;
            let d = scale * s * s / one_m;
            offsets.push(d);
            nodes.push(start + d);
            weights.push(w * half * two * scale * s / (one_m * one_m));
        }
        Ok(Self {
            start,
            scale,
            nodes,
            offsets,
            weights,
        })
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
}

/// `∫_start^∞ f(t) dt` on a [`RayMesh`].
pub fn integrate_ray<T: Scalar, F: Fn(T) -> T>(f: F, mesh: &RayMesh<T>) -> Result<T> {
    integrate_ray_offset(|t, _| f(t), mesh)
}

/// Like [`integrate_ray`], but `f(t, t - start)` also receives the exact offset
/// from the start, for integrands with a singular factor there.
pub fn integrate_ray_offset<T: Scalar, F: Fn(T, T) -> T>(f: F, mesh: &RayMesh<T>) -> Result<T> {
    // tail ∫_T^∞ f ≈ T f(T) for f ~ t⁻²; an O(1/t) integrand leaves an O(1) estimate
    let d_far = mesh.scale * lit(1e8);
    let far = mesh.start + d_far;
    let tail = (f(far, d_far) * far).abs();
    if !(tail < lit(1e-6)) {
        return Err(Error::SlowDecay {
            tail: tail.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut acc = T::zero();
    for ((&t, &d), &w) in mesh.nodes.iter().zip(&mesh.offsets).zip(&mesh.weights) {
        let ft = f(t, d);
        if !ft.is_finite() {
            return Err(Error::NonFinite(t.to_f64().unwrap_or(f64::NAN)));
        }
        acc = acc + w * ft;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn beta_moment(k: usize) -> f64 {
        // ∫ x^k / sqrt(1 - x²) dx = π (k-1)!!/k!! for even k, 0 for odd k
        if k % 2 == 1 {
            return 0.0;
        }
        let mut v = PI;
        let mut j = 1;
        while j < k {
            v *= j as f64 / (j + 1) as f64;
            j += 2;
        }
        v
    }

    #[test]
    fn reference_rule_matches_classical_nodes() {
        let n = 7;
        let m = make_mesh(-1.0, 1.0, n).unwrap();
        for (i, (&x, &w)) in m.nodes().iter().zip(m.weights()).enumerate() {
            let expect = ((2 * (n - i) - 1) as f64 * PI / (2 * n) as f64).cos();
            assert!((x - expect).abs() < 1e-15);
            assert!((w - PI / n as f64).abs() < 1e-15);
        }
        let total: f64 = m.weights().iter().sum();
        assert!((total - PI).abs() < 1e-13);
    }

    #[test]
    fn moments_are_exact_to_degree_2n_minus_1() {
        let n = 6;
        let m = make_mesh(-1.0, 1.0, n).unwrap();
        for k in 0..2 * n {
            let got = integrate_singular(|x: f64| x.powi(k as i32), &m).unwrap();
            assert!((got - beta_moment(k)).abs() < 1e-13, "k={k} {got}");
        }
    }

    #[test]
    fn nodes_increase_and_stay_interior() {
        let m = make_mesh(0.0f64, 2.0, 33).unwrap();
        assert!(m.nodes().windows(2).all(|p| p[0] < p[1]));
        assert!(m.nodes()[0] > 0.0 && *m.nodes().last().unwrap() < 2.0);
        let r = make_mesh(-1.0, 1.0, 33).unwrap();
        for (a, b) in m.nodes().iter().zip(r.nodes()) {
            assert!((a - (b + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(make_mesh(1.0, 1.0, 8), Err(Error::CollapsedInterval { .. })));
        assert!(matches!(make_mesh(0.0, 1.0, 1), Err(Error::InvalidOrder(1))));
        let m = make_mesh(-1.0, 1.0, 8).unwrap();
        assert!(matches!(
            integrate_singular(|x: f64| 1.0 / x.abs().min(0.0), &m),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn arcsine_examples() {
        let m = make_mesh(-1.0, 1.0, 64).unwrap();
        assert!((integrate_singular(|_| 1.0, &m).unwrap() - PI).abs() < 1e-13);
        assert!((integrate_singular(|x: f64| x * x, &m).unwrap() - PI / 2.0).abs() < 1e-13);
        assert!(integrate_singular(|x: f64| x, &m).unwrap().abs() < 1e-14);
    }

    #[test]
    fn principal_value_examples() {
        let m = make_mesh(-1.0f64, 1.0, 32).unwrap();
        for &x0 in &[-0.9, -0.3, 0.0, 0.41, 0.77] {
            assert!(pv_integrate(|_| 1.0f64, &m, x0).unwrap().abs() < 1e-13);
            assert!((pv_integrate(|t: f64| t, &m, x0).unwrap() - PI).abs() < 1e-13);
            assert!((pv_integrate(|t: f64| t - x0, &m, x0).unwrap() - PI).abs() < 1e-13);
        }
        assert!(matches!(pv_integrate(|_| 1.0, &m, 1.0), Err(Error::NearEndpoint { .. })));
    }

    /// Symmetric-excision brute force: trapezoid in θ (t = cos θ removes the
    /// edge singularity) with the pole excised by a symmetric pair.
    fn brute_pv(f: impl Fn(f64) -> f64, x0: f64) -> f64 {
        // P∫ f(t)/((t-x0) sqrt(1-t²)) dt = P∫_0^π f(cos θ)/(cos θ - x0) dθ
        let th0 = x0.acos();
        let g = |th: f64| (f(th.cos()) - f(x0)) / (th.cos() - x0);
        // the f(x0) part integrates to zero exactly; the rest is regular
        let n = 200_000;
        let h = PI / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let th = (i as f64 + 0.5) * h;
            if (th - th0).abs() < 1e-9 {
                continue;
            }
            acc += g(th) * h;
        }
        acc
    }

    #[test]
    fn principal_value_matches_excision_oracle() {
        let m = make_mesh(-1.0, 1.0, 64).unwrap();
        let f = |t: f64| (1.3 * t).exp() / (2.0 + t);
        for &x0 in &[-0.7, 0.05, 0.6] {
            let got = pv_integrate(f, &m, x0).unwrap();
            let want = brute_pv(f, x0);
            assert!((got - want).abs() < 1e-6, "{x0}: {got} vs {want}");
        }
    }

    #[test]
    fn cauchy_transform_off_interval_and_derivative() {
        let m = make_mesh(-1.0, 1.0, 64).unwrap();
        let f = |u: f64| 1.0 / (3.0 + u);
        let vals: Vec<f64> = m.nodes().iter().map(|&u| f(u)).collect();
        let s = ChebSeries::from_samples(&m, &vals);
        for &xi in &[1.2, -1.7, 4.0] {
            let direct = integrate_singular(|u| f(u) / (u - xi), &m).unwrap();
            assert!((s.cauchy(xi) - direct).abs() < 1e-12);
            let d = integrate_singular(|u| f(u) / ((u - xi) * (u - xi)), &m).unwrap();
            assert!((s.cauchy_deriv(xi) - d).abs() < 1e-11);
        }
        // inside: derivative of the PV by central differences
        for &xi in &[-0.4, 0.3] {
            let e = 1e-5;
            let fd = (s.cauchy(xi + e) - s.cauchy(xi - e)) / (2.0 * e);
            assert!((s.cauchy_deriv(xi) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn log_potential_of_arcsine_is_flat() {
        let m = make_mesh(-1.0, 1.0, 16).unwrap();
        let s = ChebSeries::from_samples(&m, &[1.0; 16]);
        for &xi in &[-0.8, 0.0, 0.5] {
            assert!((s.log_potential(xi) + PI * LN_2).abs() < 1e-13);
        }
        // outside: ∫ ln|ξ-u|/sqrt(1-u²) = π ln((ξ + sqrt(ξ²-1))/2)
        let xi: f64 = 2.5;
        let want = PI * ((xi + (xi * xi - 1.0).sqrt()) / 2.0).ln();
        assert!((s.log_potential(xi) - want).abs() < 1e-13);
    }

    #[test]
    fn sqrt_series_transform() {
        let m = make_mesh(-1.0, 1.0, 48).unwrap();
        // g = 1: P∫ sqrt(1-u²)/(u-ξ) du = -π ξ inside
        let s = SqrtSeries::from_samples(&m, &vec![1.0; 48]);
        assert!((s.transform(0.3) + PI * 0.3).abs() < 1e-13);
        assert!((s.integral() - PI / 2.0).abs() < 1e-14);
        // outside against direct quadrature
        let g = |u: f64| (0.5 * u).cos();
        let vals: Vec<f64> = m.nodes().iter().map(|&u| g(u)).collect();
        let s = SqrtSeries::from_samples(&m, &vals);
        let xi = -1.4;
        let direct = integrate_singular(|u| (1.0 - u * u) * g(u) / (u - xi), &m).unwrap();
        assert!((s.transform(xi) - direct).abs() < 1e-12);
    }

    #[test]
    fn ray_examples() {
        let m = RayMesh::new(1.0, 1.0, 96).unwrap();
        assert!((integrate_ray(|t: f64| 1.0 / (t * t), &m).unwrap() - 1.0).abs() < 1e-13);
        let m2 = RayMesh::new(2.0, 2.0, 96).unwrap();
        assert!((integrate_ray(|t: f64| t.powi(-3), &m2).unwrap() - 0.125).abs() < 1e-13);
        let v = integrate_ray(|t: f64| 1.0 / (t * t - 1.0).sqrt() - 1.0 / t, &m).unwrap();
        assert!((v - LN_2).abs() < 1e-12, "{v}");
        assert!(matches!(
            integrate_ray(|t: f64| 1.0 / t, &m),
            Err(Error::SlowDecay { .. })
        ));
    }

    #[test]
    fn single_precision_rule() {
        let m = make_mesh(-1.0f32, 1.0, 16).unwrap();
        let v = integrate_singular(|x: f32| x * x, &m).unwrap();
        assert!((v - std::f32::consts::FRAC_PI_2).abs() < 1e-5);
    }

    #[test]
    fn doubling_order_converges() {
        let f = |x: f64| (x * 0.7).sin() * (1.0 + x * x).recip();
        let a = integrate_singular(f, &make_mesh(-2.0, 3.0, 64).unwrap()).unwrap();
        let b = integrate_singular(f, &make_mesh(-2.0, 3.0, 128).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn affine_covariance(lo in -5.0f64..5.0, w in 0.1f64..4.0, a in 0.2f64..3.0, b in -2.0f64..2.0) {
                let f = |x: f64| (0.3 * x).exp() + x * x;
                let m = make_mesh(lo, lo + w, 40).unwrap();
                let direct = integrate_singular(f, &m).unwrap();
                // L(x) = a x + b maps (lo', hi') onto (lo, lo + w)
                let l = |x: f64| a * x + b;
                let m2 = make_mesh((lo - b) / a, (lo + w - b) / a, 40).unwrap();
                let pulled = integrate_singular(|x| f(l(x)), &m2).unwrap();
                prop_assert!((direct - pulled).abs() < 1e-12 * (1.0 + direct.abs()));
            }
        }
    }
}
