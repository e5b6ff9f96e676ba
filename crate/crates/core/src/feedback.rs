//! Limited feedback: per-sublink direction quantization with correlated random
//! codebooks, exact norms, reconstruction and the feedback budget arithmetic.

use alloc::vec::Vec;

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CorrelatedSampler, CorrelationMatrix, GlobalChannel};
use crate::linalg::{inner, norm_sqr, CVector, C64};
use crate::{Error, Result};

/// Largest supported codebook size in bits.
pub const MAX_BITS: u32 = 20;

/// `2^B` unit-norm directions for one (user, BS) sublink.
///
/// Entry `j` is the `j`-th draw of one seeded stream, so codebooks sharing a
/// seed are nested: the `B`-bit book is a prefix of the `B + 1`-bit book.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<CVector>,
    bits: u32,
}

impl Codebook {
    /// Draws `e_j ~ CN(0, R)` and normalizes each to unit length.
    pub fn generate(correlation: &CorrelationMatrix, bits: u32, seed: u64) -> Result<Self> {
        if bits < 1 {
            return Err(Error::invalid("bits", "direction feedback needs at least one bit"));
        }
        if bits > MAX_BITS {
            return Err(Error::invalid("bits", "codebook too large"));
        }
        let sampler = CorrelatedSampler::new(correlation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = 1usize << bits;
        let mut entries = Vec::with_capacity(size);
        while entries.len() < size {
            let e = sampler.sample(&mut rng);
            let n = norm_sqr(&e).sqrt();
            if n > 0.0 {
                entries.push(e / C64::new(n, 0.0));
            }
        }
        Ok(Codebook { entries, bits })
    }

    /// Codebook from explicit entries; each is normalized. The size need not be a power of two.
    pub fn from_entries(entries: Vec<CVector>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::invalid("entries", "codebook needs at least one entry"));
        };
        let dim = first.len();
        let mut normalized = Vec::with_capacity(entries.len());
        for e in entries {
            if e.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.len() });
            }
            let n = norm_sqr(&e).sqrt();
            if !(n > 0.0) {
                return Err(Error::invalid("entries", "zero codeword"));
            }
            normalized.push(e / C64::new(n, 0.0));
        }
        let bits = usize::BITS - (normalized.len() - 1).leading_zeros();
        Ok(Codebook { entries: normalized, bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].len()
    }

    pub fn entries(&self) -> &[CVector] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &CVector {
        &self.entries[index]
    }

    /// Index of the codeword best aligned with `v`: `argmax_j |v c_j^H|`, lowest index on ties.
    pub fn quantize(&self, v: &CVector) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, c) in self.entries.iter().enumerate() {
            let a = inner(v, c).norm_sqr();
            if a > best.1 {
                best = (j, a);
            }
        }
        best.0
    }

    /// `1 - |v c^H|^2` of the chosen codeword for a unit vector `v`.
    pub fn distortion(&self, v: &CVector) -> f64 {
        1.0 - inner(v, &self.entries[self.quantize(v)]).norm_sqr()
    }
}

/// Feedback of one sublink: exact norm and codeword index.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantizedSublink {
    pub cqi: f64,
    pub index: usize,
}

impl QuantizedSublink {
    /// Quantizes `h` against `codebook`; a zero sublink maps to index 0 with zero norm.
    pub fn new(h: &CVector, codebook: &Codebook) -> Result<Self> {
        if h.len() != codebook.dim() {
            return Err(Error::DimensionMismatch { expected: codebook.dim(), found: h.len() });
        }
        let cqi = norm_sqr(h).sqrt();
        if cqi == 0.0 {
            return Ok(QuantizedSublink { cqi, index: 0 });
        }
        let v = h / C64::new(cqi, 0.0);
        Ok(QuantizedSublink { cqi, index: codebook.quantize(&v) })
    }

    /// `rho c_j`.
    pub fn reconstruct(&self, codebook: &Codebook) -> CVector {
        codebook.entry(self.index) * C64::new(self.cqi, 0.0)
    }
}

/// Quantized global channel of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedChannel {
    pub sublinks: Vec<QuantizedSublink>,
    pub reconstructed: GlobalChannel,
    /// Direction bits spent on this channel.
    pub bits: u64,
}

/// Quantizes every sublink of `channel` with its own codebook.
pub fn quantize_channel(channel: &GlobalChannel, codebooks: &[Codebook]) -> Result<QuantizedChannel> {
    if channel.sublinks.len() != codebooks.len() {
        return Err(Error::DimensionMismatch { expected: codebooks.len(), found: channel.sublinks.len() });
    }
    let sublinks = channel.sublinks.iter().zip(codebooks).map(|(h, c)| QuantizedSublink::new(h, c)).collect::<Result<Vec<_>>>()?;
    let reconstructed = reconstruct(&sublinks, codebooks)?;
    let bits = codebooks.iter().map(|c| u64::from(c.bits())).sum();
    Ok(QuantizedChannel { sublinks, reconstructed, bits })
}

/// Concatenates `rho_m c_{m, j_m}` over the sublinks.
pub fn reconstruct(sublinks: &[QuantizedSublink], codebooks: &[Codebook]) -> Result<GlobalChannel> {
    if sublinks.len() != codebooks.len() {
        return Err(Error::DimensionMismatch { expected: codebooks.len(), found: sublinks.len() });
    }
    let mut out = Vec::with_capacity(sublinks.len());
    for (s, c) in sublinks.iter().zip(codebooks) {
        if s.index >= c.len() {
            return Err(Error::invalid("index", "codeword index out of range"));
        }
        out.push(s.reconstruct(c));
    }
    Ok(GlobalChannel::from_sublinks(out))
}

/// How a scheduler collects channel directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeedbackClass {
    /// Every user reports every sublink before scheduling (GUS, SUS).
    OnePhase,
    /// Only scheduled users report their sublinks (NUS, LUS, RUS).
    TwoPhase,
    /// Every user reports its local sublink, then scheduled users report all (LocalNUS).
    TwoPhaseLocal,
}

/// Per-user cap `B_u` and total cap `B_t` on direction bits per slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeedbackBudget {
    pub per_user: u32,
    pub total: u32,
}

/// Codebook size in bits per sublink allowed by `budget`.
///
/// One-phase: `floor(min(B_u / M, B_t / (K M^2)))`; two-phase:
/// `floor(min(B_u / M, B_t / (M L)))`; two-phase local:
/// `floor(min(B_u / M, B_t / (M K + M L)))`.
pub fn codebook_bits(class: FeedbackClass, m: usize, k: usize, l_budget: usize, budget: FeedbackBudget) -> Result<u32> {
    if m == 0 || k == 0 || l_budget == 0 {
        return Err(Error::invalid("cluster", "M, K and L must be positive"));
    }
    let (m, k, l) = (m as u64, k as u64, l_budget as u64);
    let per_user = u64::from(budget.per_user) / m;
    let total = u64::from(budget.total)
        / match class {
            FeedbackClass::OnePhase => k * m * m,
            FeedbackClass::TwoPhase => m * l,
            FeedbackClass::TwoPhaseLocal => m * k + m * l,
        };
    let bits = per_user.min(total);
    if bits == 0 {
        return Err(Error::BudgetTooSmall { per_user: budget.per_user, total: budget.total });
    }
    Ok(bits.min(u64::from(MAX_BITS)) as u32)
}

/// Direction bits spent in one slot serving `l` users with `bits`-bit codebooks:
/// `M^2 K B`, `M L B` or `(M K + M L) B`.
pub fn feedback_bits_per_slot(class: FeedbackClass, m: usize, k: usize, l: usize, bits: u32) -> u64 {
    let (m, k, l, b) = (m as u64, k as u64, l as u64, u64::from(bits));
    match class {
        FeedbackClass::OnePhase => m * m * k * b,
        FeedbackClass::TwoPhase => m * l * b,
        FeedbackClass::TwoPhaseLocal => (m * k + m * l) * b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::single_bounce_correlation;
    use crate::linalg::{complex_gaussian_vector, CMatrix};
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn unit(v: CVector) -> CVector {
        let n = norm_sqr(&v).sqrt();
        v / C64::new(n, 0.0)
    }

    #[test]
    fn identity_codebook_shape() {
        let c = Codebook::generate(&CorrelationMatrix::identity(2), 4, 11).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.bits(), 4);
        for e in c.entries() {
            assert!((norm_sqr(e) - 1.0).abs() < 1e-14);
        }
        let mut acc = 0.0;
        let mut pairs = 0;
        for i in 0..16 {
            for j in 0..i {
                acc += inner(c.entry(i), c.entry(j)).norm();
                pairs += 1;
            }
        }
        assert!(acc / (pairs as f64) < 1.0);
        assert_eq!(c, Codebook::generate(&CorrelationMatrix::identity(2), 4, 11).unwrap());
        assert_ne!(c, Codebook::generate(&CorrelationMatrix::identity(2), 4, 12).unwrap());
        assert!(Codebook::generate(&CorrelationMatrix::identity(2), 0, 1).is_err());
    }

    #[test]
    fn rank_one_codebook_is_one_direction() {
        let ones = CMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let c = Codebook::generate(&CorrelationMatrix::new(ones).unwrap(), 3, 5).unwrap();
        for e in c.entries() {
            assert!((inner(e, c.entry(0)).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_spread_codebook_beats_isotropic_on_matched_channels() {
        let r = single_bounce_correlation(0.3, 5f64.to_radians(), 4, 0.5).unwrap();
        let sampler = CorrelatedSampler::new(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (mut matched, mut iso) = (0.0, 0.0);
        for t in 0..10_000u64 {
            let v = unit(sampler.sample(&mut rng));
            matched += Codebook::generate(&r, 2, t).unwrap().distortion(&v);
            iso += Codebook::generate(&CorrelationMatrix::identity(4), 2, t).unwrap().distortion(&v);
        }
        assert!(matched < iso, "{matched} vs {iso}");
    }

    #[test]
    fn quantize_examples() {
        let c = Codebook::generate(&CorrelationMatrix::identity(3), 3, 2).unwrap();
        for j in 0..c.len() {
            assert_eq!(c.quantize(c.entry(j)), j);
            let rotated = c.entry(j) * C64::from_polar(1.0, 1.234);
            assert_eq!(c.quantize(&rotated), j);
        }
        let single = Codebook::from_entries(vec![c.entry(0).clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(single.quantize(&complex_gaussian_vector(3, &mut rng)), 0);
        }
    }

    #[test]
    fn quantizer_picks_nearest_not_farthest() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Codebook::generate(&CorrelationMatrix::identity(2), 3, 9).unwrap();
        let mut differ = 0;
        for _ in 0..200 {
            let v = unit(complex_gaussian_vector(2, &mut rng));
            let near = c.quantize(&v);
            let far = (0..c.len()).min_by(|&a, &b| inner(&v, c.entry(a)).norm().total_cmp(&inner(&v, c.entry(b)).norm())).unwrap();
            for j in 0..c.len() {
                assert!(inner(&v, c.entry(near)).norm() >= inner(&v, c.entry(j)).norm());
            }
            differ += usize::from(near != far);
            assert!(c.distortion(&v) <= 1.0 - inner(&v, c.entry(far)).norm_sqr());
        }
        assert_eq!(differ, 200);
    }

    #[test]
    fn distortion_shrinks_with_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<CVector> = (0..2000).map(|_| unit(complex_gaussian_vector(2, &mut rng))).collect();
        let mean = |b: u32| {
            let c = Codebook::generate(&CorrelationMatrix::identity(2), b, 77).unwrap();
            vs.iter().map(|v| c.distortion(v)).sum::<f64>() / vs.len() as f64
        };
        let curve: Vec<f64> = [2, 4, 6, 8, 12].iter().map(|&b| mean(b)).collect();
        for w in curve.windows(2) {
            assert!(w[1] < w[0], "{curve:?}");
        }
        // random vector quantization of N_t = 2 has mean distortion about 2^{-B}
        assert!(curve[4] < 1e-3, "{curve:?}");
    }

    #[test]
    fn reconstruction_keeps_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let books: Vec<Codebook> = (0..3).map(|m| Codebook::generate(&CorrelationMatrix::identity(2), 2, 100 + m).unwrap()).collect();
        let mut subs: Vec<CVector> = (0..3).map(|_| complex_gaussian_vector(2, &mut rng)).collect();
        subs[2] = CVector::zeros(2);
        let h = GlobalChannel::from_sublinks(subs);
        let q = quantize_channel(&h, &books).unwrap();
        assert_eq!(q.bits, 6);
        for (m, s) in q.reconstructed.sublinks.iter().enumerate() {
            assert!((norm_sqr(s).sqrt() - h.sublink_norms()[m]).abs() < 1e-12);
        }
        assert_eq!(norm_sqr(&q.reconstructed.sublinks[2]), 0.0);

        let hit = GlobalChannel::from_sublinks(books.iter().map(|b| b.entry(1) * C64::from_polar(2.5, 0.7)).collect());
        let q = quantize_channel(&hit, &books).unwrap();
        for (m, s) in q.reconstructed.sublinks.iter().enumerate() {
            assert!((inner(s, &hit.sublinks[m]).norm() - norm_sqr(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn budget_arithmetic() {
        let b = FeedbackBudget { per_user: 12, total: 432 };
        assert_eq!(codebook_bits(FeedbackClass::OnePhase, 3, 20, 12, b).unwrap(), 2);
        assert_eq!(codebook_bits(FeedbackClass::TwoPhase, 3, 20, 12, b).unwrap(), 4);
        assert_eq!(codebook_bits(FeedbackClass::TwoPhaseLocal, 3, 20, 12, b).unwrap(), 4);
        let wide = FeedbackBudget { per_user: 12, total: u32::MAX };
        assert_eq!(codebook_bits(FeedbackClass::OnePhase, 3, 20, 12, wide).unwrap(), 4);
        let tiny = FeedbackBudget { per_user: 12, total: 100 };
        assert!(matches!(codebook_bits(FeedbackClass::OnePhase, 3, 20, 12, tiny), Err(Error::BudgetTooSmall { .. })));
        assert_eq!(feedback_bits_per_slot(FeedbackClass::OnePhase, 3, 20, 12, 2), 360);
        assert_eq!(feedback_bits_per_slot(FeedbackClass::TwoPhase, 3, 20, 12, 4), 144);
        assert_eq!(feedback_bits_per_slot(FeedbackClass::TwoPhaseLocal, 3, 20, 12, 4), 384);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nested_codebooks_never_lose_alignment(seed in any::<u64>(), vseed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(vseed);
            let v = unit(complex_gaussian_vector(2, &mut rng));
            let mut last = f64::INFINITY;
            for b in 1..=8 {
                let c = Codebook::generate(&CorrelationMatrix::identity(2), b, seed).unwrap();
                let d = c.distortion(&v);
                prop_assert!(d <= last);
                last = d;
            }
        }

        #[test]
        fn reconstruct_matches_cqi(seed in any::<u64>(), bits in 1u32..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let books: Vec<Codebook> = (0..2)
                .map(|m| Codebook::generate(&CorrelationMatrix::identity(4), bits, seed ^ m).unwrap())
                .collect();
            let h = GlobalChannel::from_sublinks((0..2).map(|_| complex_gaussian_vector(4, &mut rng)).collect());
            let q = quantize_channel(&h, &books).unwrap();
            for (s, r) in q.sublinks.iter().zip(&q.reconstructed.sublinks) {
                prop_assert!(s.index < books[0].len());
                prop_assert!((norm_sqr(r).sqrt() - s.cqi).abs() <= 1e-12 * s.cqi);
            }
        }
    }
}
