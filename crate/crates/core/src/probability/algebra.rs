//! Superposition algebra and membership degrees.

use crate::error::{Error, Result};
use crate::graph::{Param, Relation};

use super::spec::Gaussian;

fn check_unit(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("probability {p} outside [0,1]")))
    }
}

pub fn gaussian_membership(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    Ok(Gaussian::new(mu, sigma)?.membership(x))
}

/// p1 + p2 - p1*p2.
pub fn superpose(p1: f64, p2: f64) -> Result<f64> {
    check_unit(p1)?;
    check_unit(p2)?;
    Ok(p1 + p2 - p1 * p2)
}

/// Removes `p2` from a superposed value `p`.
pub fn unsuperpose(p: f64, p2: f64) -> Result<f64> {
    if p2 >= 1.0 {
        return Err(Error::UndoCertainty);
    }
    if p < p2 {
        return Err(Error::LedgerCorruption { value: p, contribution: p2 });
    }
    Ok((p - p2) / (1.0 - p2))
}

/// 1 - prod(1 - p_i).
pub fn superpose_n(ps: &[f64]) -> Result<f64> {
    let mut keep = 1.0;
    for &p in ps {
        check_unit(p)?;
        keep *= 1.0 - p;
    }
    Ok(1.0 - keep)
}

/// How well an instance relation's parameters fit its base relation.
pub fn relational_membership(instance: &Relation, base: &Relation) -> Result<f64> {
    if instance.kind != base.kind {
        return Err(Error::Kind(format!(
            "{} relation cannot be scored against a {} base",
            instance.kind, base.kind
        )));
    }
    Ok(params_membership(&instance.params, &base.params))
}

/// Product over the specification's parameters of the observation's
/// membership; parameters the observation lacks contribute 1.
pub(crate) fn params_membership<'a>(
    observed: &std::collections::BTreeMap<String, Param>,
    spec: impl IntoIterator<Item = (&'a String, &'a Param)>,
) -> f64 {
    spec.into_iter()
        .filter(|(name, _)| name.as_str() != "k")
        .map(|(name, s)| observed.get(name).map_or(1.0, |o| o.membership_under(s)))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BasicRelationKind;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_membership(1.7, 1.7, 0.1).unwrap(), 1.0);
        // Independent evaluation of the closed form at one sigma.
        let one_sigma = 1.0 / (0.5f64).exp();
        assert!((gaussian_membership(1.8, 1.7, 0.1).unwrap() - one_sigma).abs() < 1e-9);
        assert!(close(gaussian_membership(1.7, 1.0, 0.5).unwrap(), (-0.98f64).exp()));
        assert!(gaussian_membership(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn superpose_examples() {
        assert!(close(superpose(0.3, 0.6).unwrap(), 0.72));
        assert_eq!(superpose(0.42, 0.0).unwrap(), 0.42);
        assert_eq!(superpose(0.42, 1.0).unwrap(), 1.0);
        assert!(superpose(1.2, 0.1).is_err());
    }

    #[test]
    fn unsuperpose_examples() {
        assert!(close(unsuperpose(0.72, 0.6).unwrap(), 0.3));
        assert_eq!(unsuperpose(0.42, 0.0).unwrap(), 0.42);
        let both = superpose(0.5, 0.4).unwrap();
        assert!(close(unsuperpose(both, 0.4).unwrap(), 0.5));
        assert_eq!(unsuperpose(1.0, 1.0), Err(Error::UndoCertainty));
        assert!(matches!(unsuperpose(0.2, 0.5), Err(Error::LedgerCorruption { .. })));
    }

    #[test]
    fn superpose_n_examples() {
        // Inclusion-exclusion with product joints for three events of 0.5.
        let p = 0.5;
        let ie = 3.0 * p - 3.0 * p * p + p * p * p;
        assert!(close(superpose_n(&[0.5, 0.5, 0.5]).unwrap(), ie));
        assert_eq!(superpose_n(&[]).unwrap(), 0.0);
        assert!(close(superpose_n(&[0.3, 0.6]).unwrap(), 0.72));
    }

    #[test]
    fn relational_membership_examples() {
        let mut base = Relation::new(BasicRelationKind::HasComponent, "x", "y");
        base.params.insert("angle".into(), Param::Gauss(Gaussian::new(0.0, 10.0).unwrap()));
        base.params.insert("distance".into(), Param::Interval { lo: 0.0, hi: 5.0 });
        let mut inst = Relation::new(BasicRelationKind::HasComponent, "x1", "y1");
        assert_eq!(relational_membership(&inst, &base).unwrap(), 1.0);
        inst.params.insert("angle".into(), Param::Real(10.0));
        assert!(close(relational_membership(&inst, &base).unwrap(), (-0.5f64).exp()));
        inst.params.insert("distance".into(), Param::Real(7.0));
        assert_eq!(relational_membership(&inst, &base).unwrap(), 0.0);
        let other = Relation::new(BasicRelationKind::Move, "x1", "y1");
        assert!(matches!(relational_membership(&other, &base), Err(Error::Kind(_))));
    }
}
