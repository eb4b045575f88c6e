//! Check-loss primitives: `ρ_τ`, its score `ψ_τ`, the proximal map, the Moreau
//! envelope and group soft-thresholding.

use nalgebra::DVector;

/// `ρ_τ(r) = r (τ − 1{r < 0})`.
#[inline]
pub fn rho(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        r * (tau - 1.0)
    } else {
        r * tau
    }
}

/// `ψ_τ(r) = τ − 1{r < 0}`; `ψ_τ(0) = τ`.
#[inline]
pub fn psi(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

/// Asymmetric soft-threshold `prox_{γρ_τ}(v)`.
#[inline]
pub fn prox_check(v: f64, gamma: f64, tau: f64) -> f64 {
    let hi = gamma * tau;
    let lo = -gamma * (1.0 - tau);
    if v > hi {
        v - hi
    } else if v < lo {
        v - lo
    } else {
        0.0
    }
}

pub fn check_loss_sum(r: &DVector<f64>, tau: f64) -> f64 {
    r.iter().map(|&x| rho(x, tau)).sum()
}

pub fn check_loss_mean(r: &DVector<f64>, tau: f64) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    check_loss_sum(r, tau) / r.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoreauParams {
    pub h: f64,
    pub tau: f64,
}

impl MoreauParams {
    pub fn new(h: f64, tau: f64) -> Self {
        debug_assert!(h > 0.0 && tau > 0.0 && tau < 1.0);
        Self { h, tau }
    }
}

/// Value and derivative of `M_h(r) = min_s ρ_τ(s) + (s − r)²/(2h)`.
#[inline]
pub fn moreau_value_grad(r: f64, params: MoreauParams) -> (f64, f64) {
    let MoreauParams { h, tau } = params;
    let s = prox_check(r, h, tau);
    let d = s - r;
    (rho(s, tau) + d * d / (2.0 * h), -d / h)
}

/// `(1 − κ/‖v‖₂)₊ v`, the exact zero vector when `‖v‖₂ ≤ κ`.
pub fn group_shrink(v: &DVector<f64>, kappa: f64) -> DVector<f64> {
    let norm = v.norm();
    if norm <= kappa {
        DVector::zeros(v.len())
    } else {
        v * (1.0 - kappa / norm)
    }
}
