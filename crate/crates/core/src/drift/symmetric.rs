use super::DriftError;

/// All elementary symmetric polynomials `e_0, ..., e_K` of `values` by the
/// triangular recurrence `e_k <- e_k + v e_{k-1}`, in `O(N K)`.
pub fn elementary_symmetric_all(values: &[f64], max_degree: usize) -> Vec<f64> {
    let top = max_degree.min(values.len());
    let mut e = vec![0.0; top + 1];
    e[0] = 1.0;
    for (j, &v) in values.iter().enumerate() {
        for k in (1..=top.min(j + 1)).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e
}

/// `e_k(values)`, the sum of all `k`-fold products of distinct entries.
pub fn elementary_symmetric(values: &[f64], k: usize) -> Result<f64, DriftError> {
    if k > values.len() {
        return Err(DriftError::Degree { k, len: values.len() });
    }
    Ok(elementary_symmetric_all(values, k)[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 3).unwrap(), 6.0);
        assert_eq!(elementary_symmetric(&[4.0, 5.0], 0).unwrap(), 1.0);
        assert_eq!(elementary_symmetric(&[], 0).unwrap(), 1.0);
        assert!(elementary_symmetric(&[1.0], 2).is_err());
    }

    fn by_subsets(values: &[f64], k: usize) -> f64 {
        (0u32..1 << values.len())
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| {
                (0..values.len())
                    .filter(|j| m & (1 << j) != 0)
                    .map(|j| values[j])
                    .product::<f64>()
            })
            .sum()
    }

    proptest! {
        #[test]
        fn product_identity(values in prop::collection::vec(0.0f64..0.05, 0..=12)) {
            let prod: f64 = values.iter().map(|a| 1.0 + a).product();
            let sum: f64 = elementary_symmetric_all(&values, values.len()).iter().sum();
            prop_assert!((prod - sum).abs() <= 1e-12 * prod);
        }

        #[test]
        fn matches_subset_enumeration(values in prop::collection::vec(-1.0f64..1.0, 0..=9), k in 0usize..10) {
            prop_assume!(k <= values.len());
            let got = elementary_symmetric(&values, k).unwrap();
            prop_assert!((got - by_subsets(&values, k)).abs() <= 1e-12);
        }
    }
}
