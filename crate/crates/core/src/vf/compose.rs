use crate::error::{Error, Result};
use crate::footworld::Plan;

use super::value::ValueNet;

/// Product of factors taken in ascending order, so that the result does not
/// depend on the order in which filters are listed (float products are not
/// associative).
fn ordered_product(factors: &mut [f64]) -> f64 {
    factors.sort_by(f64::total_cmp);
    factors.iter().product()
}

/// Product of clamped per-filter values, `prod_k VF_k(s_k, p)`.
pub fn compose(filters: &[(&ValueNet, &[f64])], plan: &Plan) -> Result<f64> {
    if filters.is_empty() {
        return Err(Error::usage("composition needs at least one filter"));
    }
    let mut factors = filters.iter().map(|(net, state)| net.eval(state, plan)).collect::<Result<Vec<_>>>()?;
    Ok(ordered_product(&mut factors))
}

/// [`compose`] for every plan of a candidate set.
pub fn compose_many(filters: &[(&ValueNet, &[f64])], plans: &[Plan]) -> Result<Vec<f64>> {
    if filters.is_empty() {
        return Err(Error::usage("composition needs at least one filter"));
    }
    let per_filter = filters.iter().map(|(net, state)| net.eval_many(state, plans)).collect::<Result<Vec<_>>>()?;
    product_scores(&per_filter)
}

/// Product of already-evaluated per-filter score vectors.
pub fn product_scores(per_filter: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = per_filter.first().ok_or_else(|| Error::usage("composition needs at least one filter"))?;
    if per_filter.iter().any(|f| f.len() != first.len()) {
        return Err(Error::usage("filter score vectors differ in length"));
    }
    let mut factors = Vec::with_capacity(per_filter.len());
    Ok((0..first.len())
        .map(|i| {
            factors.clear();
            factors.extend(per_filter.iter().map(|f| f[i]));
            ordered_product(&mut factors)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkParams;
    use crate::rng::seeded;

    fn constant(v: f64) -> ValueNet {
        let mut n = ValueNet::new(0, 1, &[2], 0.75, &mut seeded(0)).unwrap();
        n.net = NetworkParams::zeros(&n.net.layer_dims()).unwrap();
        n.net.layers_mut().last_mut().unwrap().bias[0] = v;
        n
    }

    #[test]
    fn products() {
        let p = Plan::from_slice(&[0.0; 12]).unwrap();
        let (a, b, z) = (constant(1.0), constant(1.0), constant(0.0));
        let s: &[f64] = &[0.0];
        assert_eq!(compose(&[(&a, s), (&b, s), (&a, s)], &p).unwrap(), 1.0);
        assert_eq!(compose(&[(&a, s), (&z, s)], &p).unwrap(), 0.0);
        let (c, d) = (constant(2.0), constant(1.5));
        assert_eq!(compose(&[(&c, s), (&d, s)], &p).unwrap(), compose(&[(&d, s), (&c, s)], &p).unwrap());
        assert!(compose(&[], &p).is_err());
    }
}
