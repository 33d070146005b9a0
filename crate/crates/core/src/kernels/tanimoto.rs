use crate::error::{Error, Result};

/// Fixed-width binary fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    width: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn from_indices(width: usize, indices: &[usize]) -> Result<Self> {
        let mut words = vec![0u64; width.div_ceil(64)];
        for &i in indices {
            if i >= width {
                return Err(Error::invalid(format!("bit index {i} outside width {width}")));
            }
            let (w, b) = (i / 64, i % 64);
            if words[w] & (1 << b) != 0 {
                return Err(Error::invalid(format!("duplicate bit index {i}")));
            }
            words[w] |= 1 << b;
        }
        Ok(Self { width, words })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.width).filter(|&i| self.words[i / 64] & (1 << (i % 64)) != 0).collect()
    }
}

/// `|a ∧ b| / |a ∨ b|`; two empty fingerprints have similarity 0.
pub fn tanimoto(a: &BitVector, b: &BitVector) -> Result<f64> {
    if a.width != b.width {
        return Err(Error::DimMismatch { expected: a.width, got: b.width });
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(f64::from(inter) / f64::from(union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(idx: &[usize]) -> BitVector {
        BitVector::from_indices(2048, idx).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(tanimoto(&bv(&[1, 5, 700]), &bv(&[1, 5, 700])).unwrap(), 1.0);
        assert_eq!(tanimoto(&bv(&[1, 2]), &bv(&[3, 4])).unwrap(), 0.0);
        assert_eq!(tanimoto(&bv(&[1, 2]), &bv(&[2, 3])).unwrap(), 1.0 / 3.0);
        assert_eq!(tanimoto(&bv(&[]), &bv(&[])).unwrap(), 0.0);
    }

    #[test]
    fn width_mismatch_and_bad_indices() {
        let a = BitVector::from_indices(64, &[1]).unwrap();
        assert!(matches!(tanimoto(&a, &bv(&[1])), Err(Error::DimMismatch { .. })));
        assert!(BitVector::from_indices(8, &[8]).is_err());
        assert!(BitVector::from_indices(8, &[3, 3]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in prop::collection::btree_set(0usize..300, 0..40),
            b in prop::collection::btree_set(0usize..300, 0..40),
        ) {
            let a: Vec<_> = a.into_iter().collect();
            let b: Vec<_> = b.into_iter().collect();
            let (x, y) = (BitVector::from_indices(300, &a).unwrap(), BitVector::from_indices(300, &b).unwrap());
            let s = tanimoto(&x, &y).unwrap();
            prop_assert_eq!(s, tanimoto(&y, &x).unwrap());
            prop_assert!((0.0..=1.0).contains(&s));
            if !a.is_empty() {
                prop_assert_eq!(tanimoto(&x, &x).unwrap(), 1.0);
            }
            prop_assert_eq!(x.indices(), a);
        }
    }
}
