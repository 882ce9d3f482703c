//! Lower-bound instances: one task per exponent on atoms x₀..x_d, with the
//! Bayes labels at x₁..x_d given by a packing element.

use super::packing::vg_packing;
use crate::distributions::make_lower_bound_family;
use crate::error::{invalid, Result};
use crate::hypothesis::{HypothesisClass, Label, MAX_FINITE_SUPPORT};
use crate::procedures::MultisourceInstance;

/// All 2^d labelings of x₁..x_d with x₀ = +1, followed by the member that
/// labels x₀ as −1 and every other atom +1.
pub fn lower_bound_class(d: usize) -> Result<HypothesisClass> {
    if d == 0 || d + 1 > MAX_FINITE_SUPPORT {
        return Err(invalid(format!("d = {d} outside 1..={}", MAX_FINITE_SUPPORT - 1)));
    }
    let mut members = Vec::with_capacity((1 << d) + 1);
    for m in 0u32..(1 << d) {
        let mut labels = vec![Label::Pos];
        labels.extend((0..d).map(|i| Label::from_bool(m >> i & 1 == 0)));
        members.push(labels);
    }
    let mut flipped = vec![Label::Pos; d + 1];
    flipped[0] = Label::Neg;
    members.push(flipped);
    HypothesisClass::finite(d + 1, members)
}

/// Sources with the given exponents plus a target with ρ = 1, all sharing
/// the sign vector `sigma`; C_β = C_ρ = 2. `sizes` has one entry per source
/// and a final target entry.
pub fn build_lower_bound_instance_with_sigma(
    rhos: &[f64],
    beta: f64,
    sigma: &[Label],
    epsilon: f64,
    sizes: &[usize],
) -> Result<MultisourceInstance> {
    if sizes.len() != rhos.len() + 1 {
        return Err(invalid("sizes needs one entry per source plus the target"));
    }
    let mut all = rhos.to_vec();
    all.push(1.0);
    let tasks = make_lower_bound_family(&all, beta, epsilon, sigma.len(), sigma)?;
    MultisourceInstance::new(tasks, sizes.to_vec(), all, beta, 2.0, 2.0, lower_bound_class(sigma.len())?)
}

/// As above, with σ the `sigma_index`-th element of the d-dimensional packing.
pub fn build_lower_bound_instance(
    rhos: &[f64],
    beta: f64,
    d: usize,
    sigma_index: usize,
    epsilon: f64,
    sizes: &[usize],
) -> Result<MultisourceInstance> {
    let packing = vg_packing(d)?;
    let sigma = packing
        .get(sigma_index)
        .ok_or(crate::error::Error::IndexOutOfRange { index: sigma_index, max: packing.len() - 1 })?;
    build_lower_bound_instance_with_sigma(rhos, beta, &sigma.labels(), epsilon, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_shape() {
        let c = lower_bound_class(3).unwrap();
        assert_eq!(c.members().len(), 9);
        assert_eq!(c.vc_dimension(), 3);
        assert!(lower_bound_class(16).is_err());
    }

    #[test]
    fn instances_validate() {
        for (beta, rhos) in [(0.0, vec![1.0, 2.0]), (0.5, vec![1.5, f64::INFINITY, 3.0]), (1.0, vec![1.0, 4.0])] {
            for idx in [0, 1, 2] {
                let sizes = vec![10; rhos.len() + 1];
                let inst = build_lower_bound_instance(&rhos, beta, 8, idx, 0.3, &sizes).unwrap();
                let rep = inst.validate().unwrap();
                assert!(rep.holds(), "beta {beta} rhos {rhos:?}: {:?}", rep.failures());
            }
        }
        assert!(build_lower_bound_instance(&[1.0], 0.5, 8, 99, 0.3, &[1, 1]).is_err());
        assert!(build_lower_bound_instance(&[0.5], 0.5, 8, 0, 0.3, &[1, 1]).is_err());
    }
}
