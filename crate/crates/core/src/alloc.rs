//! Discrete half of the compound action: CC selection vectors and their
//! realisation as RB assignments with a uniform per-RB power split.
//!
//! A selection vector holds one block of `M + n_m − 1` bits per UE slot of a
//! gNB: the PCC bit, `n_m` resolution bits for CC index 1, then one bit for
//! each remaining SCC. Element `ℓ` of a vector is bit `ℓ` of its index, so
//! enumeration order is plain counting order.

use crate::env::{AllocationState, NetworkConfig};
use crate::error::{Error, Result};

/// Largest number of decision bits that may be enumerated exhaustively.
pub const MAX_DECISION_BITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CcVector(pub u32);

impl CcVector {
    pub fn bit(self, position: usize) -> bool {
        (self.0 >> position) & 1 == 1
    }

    pub fn count_ones(self) -> u32 {
        self.0.count_ones()
    }

    /// Bits as `0.0`/`1.0`, element 0 first.
    pub fn to_f64(self, len: usize) -> Vec<f64> {
        (0..len).map(|l| if self.bit(l) { 1.0 } else { 0.0 }).collect()
    }
}

/// Bit layout and enumeration of the selection vectors for one gNB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CcVectorSet {
    pub num_ccs: usize,
    pub slots: usize,
    pub resolution: usize,
    /// PCC-constrained vectors with every slot active, in enumeration order.
    pub pcc_constrained: Vec<CcVector>,
}

pub fn bits_per_ue(num_ccs: usize, resolution: usize) -> usize {
    if num_ccs < 2 {
        1
    } else {
        num_ccs + resolution - 1
    }
}

pub fn enumerate_cc_vectors(num_ccs: usize, slots: usize, resolution: usize) -> Result<CcVectorSet> {
    if num_ccs == 0 || slots == 0 || resolution == 0 {
        return Err(Error::Config(format!(
            "cannot enumerate with {num_ccs} CCs, {slots} UEs, resolution {resolution}"
        )));
    }
    let bits = bits_per_ue(num_ccs, resolution) * slots;
    if bits > MAX_DECISION_BITS {
        return Err(Error::DimensionTooLarge {
            bits,
            max: MAX_DECISION_BITS,
        });
    }
    let mut set = CcVectorSet {
        num_ccs,
        slots,
        resolution,
        pcc_constrained: Vec::new(),
    };
    set.pcc_constrained = set.constrained(&vec![true; slots]);
    Ok(set)
}

impl CcVectorSet {
    pub fn bits_per_ue(&self) -> usize {
        bits_per_ue(self.num_ccs, self.resolution)
    }

    pub fn total_bits(&self) -> usize {
        self.bits_per_ue() * self.slots
    }

    pub fn len_all(&self) -> usize {
        1 << self.total_bits()
    }

    pub fn all(&self) -> impl Iterator<Item = CcVector> {
        (0..self.len_all() as u32).map(CcVector)
    }

    fn offset(&self, slot: usize) -> usize {
        slot * self.bits_per_ue()
    }

    pub fn pcc_bit(&self, v: CcVector, slot: usize) -> bool {
        v.bit(self.offset(slot))
    }

    /// Resolution bits of CC index 1 for `slot`.
    pub fn fine_bits(&self, v: CcVector, slot: usize) -> usize {
        if self.num_ccs < 2 {
            return 0;
        }
        let base = self.offset(slot) + 1;
        (0..self.resolution).filter(|&b| v.bit(base + b)).count()
    }

    /// Whether any bit that maps to `cc` is set for `slot`.
    pub fn cc_selected(&self, v: CcVector, slot: usize, cc: usize) -> bool {
        match cc {
            0 => self.pcc_bit(v, slot),
            1 => self.fine_bits(v, slot) > 0,
            _ => v.bit(self.offset(slot) + self.resolution + cc - 1),
        }
    }

    /// Vectors with the PCC bit set for every active slot and no bits set
    /// for inactive ones, in enumeration order.
    pub fn constrained(&self, active: &[bool]) -> Vec<CcVector> {
        let l = self.bits_per_ue();
        let block = (1u32 << l) - 1;
        self.all()
            .filter(|v| {
                active.iter().enumerate().all(|(slot, &on)| {
                    let bits = (v.0 >> (slot * l)) & block;
                    if on {
                        bits & 1 == 1
                    } else {
                        bits == 0
                    }
                })
            })
            .collect()
    }

    /// Every bit of every active slot set.
    pub fn all_ones(&self, active: &[bool]) -> CcVector {
        let l = self.bits_per_ue();
        let block = (1u32 << l) - 1;
        CcVector(
            active
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .fold(0, |acc, (slot, _)| acc | (block << (slot * l))),
        )
    }
}

/// Picks the candidate with the largest evaluation. Later candidates win
/// ties; NaN evaluations are never selected.
pub fn select_cc<F>(mut evaluator: F, candidates: &[CcVector]) -> Result<(CcVector, f64)>
where
    F: FnMut(CcVector) -> Result<f64>,
{
    let mut best: Option<(CcVector, f64)> = None;
    let mut best_value = f64::NEG_INFINITY;
    for &v in candidates {
        let value = evaluator(v)?;
        if best_value <= value {
            best_value = value;
            best = Some((v, value));
        }
    }
    best.ok_or(Error::NoCandidates)
}

/// How the RBs of the fine-resolution CC map onto its selection bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbRule {
    /// Each set bit owns a fixed block of this many RBs.
    Uniform(usize),
    /// All RBs are dealt round-robin over the set bits.
    RoundRobinShare,
}

pub fn rb_units_per_bit(n_max: usize, k: usize, resolution: usize) -> RbRule {
    let units = k.max(1) * resolution.max(1);
    if n_max.is_multiple_of(units) {
        RbRule::Uniform(n_max / units)
    } else {
        RbRule::RoundRobinShare
    }
}

/// RB assignment of one gNB's slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RbPlan {
    /// Network-wide UE index of each slot.
    pub ues: Vec<usize>,
    /// `rbs[slot][cc]` lists the RB indices held, ascending.
    pub rbs: Vec<Vec<Vec<usize>>>,
}

impl RbPlan {
    pub fn rb_count(&self, slot: usize, cc: usize) -> usize {
        self.rbs[slot][cc].len()
    }

    pub fn total_rbs(&self, slot: usize) -> usize {
        self.rbs[slot].iter().map(Vec::len).sum()
    }

    /// `[slot][cc]` RB counts.
    pub fn rb_counts(&self) -> Vec<Vec<usize>> {
        self.rbs.iter().map(|ccs| ccs.iter().map(Vec::len).collect()).collect()
    }

    /// Writes the plan and the given per-slot powers into `alloc`, replacing
    /// whatever those UEs held before.
    pub fn apply(&self, powers: &[f64], alloc: &mut AllocationState) -> Result<()> {
        let split = per_rb_power(powers, self)?;
        for (slot, &ue) in self.ues.iter().enumerate() {
            alloc.alpha.row_mut(ue).fill(false);
            alloc.beta.slice_mut(ndarray::s![ue, .., ..]).fill(false);
            alloc.per_rb_power.slice_mut(ndarray::s![ue, .., ..]).fill(0.0);
            alloc.ue_power[ue] = if self.total_rbs(slot) > 0 { powers[slot] } else { 0.0 };
            for (cc, rbs) in self.rbs[slot].iter().enumerate() {
                if rbs.is_empty() {
                    continue;
                }
                alloc.alpha[[ue, cc]] = true;
                for &r in rbs {
                    alloc.beta[[ue, cc, r]] = true;
                    alloc.per_rb_power[[ue, cc, r]] = split[slot];
                }
            }
        }
        Ok(())
    }
}

fn round_robin(n: usize, owners: &[usize], slots: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); slots];
    if owners.is_empty() {
        return out;
    }
    for r in 0..n {
        out[owners[r % owners.len()]].push(r);
    }
    out
}

/// Realises a selection vector for the slots `ues` (network UE indices in
/// slot order) of one gNB.
pub fn allocate_rbs(
    alpha_ext: CcVector,
    set: &CcVectorSet,
    ues: &[usize],
    active: &[bool],
    cfg: &NetworkConfig,
) -> Result<RbPlan> {
    let slots = ues.len();
    if slots != set.slots || active.len() != slots {
        return Err(Error::Shape(format!(
            "{} UE slots and {} activity flags for a {}-slot vector set",
            slots,
            active.len(),
            set.slots
        )));
    }
    let n = cfg.rbs_per_cc;
    let on: Vec<usize> = (0..slots).filter(|&s| active[s]).collect();
    for &s in &on {
        if !set.pcc_bit(alpha_ext, s) {
            return Err(Error::Constraint(format!("PCC bit clear for UE {}", ues[s])));
        }
    }
    let mut rbs = vec![vec![Vec::new(); set.num_ccs]; slots];

    for (s, held) in round_robin(n, &on, slots).into_iter().enumerate() {
        rbs[s][0] = held;
    }
    for cc in 1..set.num_ccs {
        let fine = cc == 1 && set.resolution > 1;
        let per_slot = if fine {
            match rb_units_per_bit(n, on.len(), set.resolution) {
                RbRule::Uniform(unit) => {
                    let mut out = vec![Vec::new(); slots];
                    let base = 1;
                    for (rank, &s) in on.iter().enumerate() {
                        for b in 0..set.resolution {
                            if alpha_ext.bit(set.offset(s) + base + b) {
                                let start = (rank * set.resolution + b) * unit;
                                out[s].extend(start..start + unit);
                            }
                        }
                    }
                    out
                }
                RbRule::RoundRobinShare => {
                    let owners: Vec<usize> = on
                        .iter()
                        .flat_map(|&s| {
                            (0..set.resolution)
                                .filter(move |&b| alpha_ext.bit(set.offset(s) + 1 + b))
                                .map(move |_| s)
                        })
                        .collect();
                    let mut out = round_robin(n, &owners, slots);
                    out.iter_mut().for_each(|v| v.sort_unstable());
                    out
                }
            }
        } else {
            let owners: Vec<usize> = on.iter().copied().filter(|&s| set.cc_selected(alpha_ext, s, cc)).collect();
            round_robin(n, &owners, slots)
        };
        for (s, held) in per_slot.into_iter().enumerate() {
            rbs[s][cc] = held;
        }
    }
    Ok(RbPlan {
        ues: ues.to_vec(),
        rbs,
    })
}

/// Uniform per-RB power for each slot: its total power over all RBs it holds.
pub fn per_rb_power(powers: &[f64], plan: &RbPlan) -> Result<Vec<f64>> {
    if powers.len() != plan.ues.len() {
        return Err(Error::Shape(format!(
            "{} powers for {} UE slots",
            powers.len(),
            plan.ues.len()
        )));
    }
    powers
        .iter()
        .enumerate()
        .map(|(slot, &p)| {
            let count = plan.total_rbs(slot);
            match (count, p > 0.0) {
                (0, true) => Err(Error::NoResourceBlocks {
                    ue: plan.ues[slot],
                    power: p,
                }),
                (0, false) => Ok(0.0),
                _ => Ok(p / count as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumeration_sizes() {
        let s = enumerate_cc_vectors(2, 1, 1).unwrap();
        assert_eq!((s.len_all(), s.pcc_constrained.len()), (4, 2));
        let s = enumerate_cc_vectors(2, 2, 1).unwrap();
        assert_eq!((s.len_all(), s.pcc_constrained.len()), (16, 4));
        let s = enumerate_cc_vectors(2, 1, 5).unwrap();
        assert_eq!((s.len_all(), s.pcc_constrained.len()), (64, 32));
        let s = enumerate_cc_vectors(2, 2, 5).unwrap();
        assert_eq!(s.total_bits(), 12);
        assert!(matches!(
            enumerate_cc_vectors(3, 3, 5),
            Err(Error::DimensionTooLarge { bits: 21, max: 16 })
        ));
    }

    #[test]
    fn enumeration_is_duplicate_free() {
        let s = enumerate_cc_vectors(3, 2, 2).unwrap();
        let all: Vec<_> = s.all().collect();
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(all.len(), dedup.len());
        assert_eq!(s.pcc_constrained.len(), 1 << 6);
        assert!(s.pcc_constrained.iter().all(|&v| s.pcc_bit(v, 0) && s.pcc_bit(v, 1)));
    }

    #[test]
    fn inactive_slots_hold_nothing() {
        let s = enumerate_cc_vectors(2, 2, 2).unwrap();
        let c = s.constrained(&[true, false]);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|v| v.0 >> 3 == 0));
        assert_eq!(s.all_ones(&[true, false]), CcVector(0b111));
        assert_eq!(s.all_ones(&[true, true]), CcVector(0b111_111));
    }

    #[test]
    fn unit_rules() {
        assert_eq!(rb_units_per_bit(50, 1, 5), RbRule::Uniform(10));
        assert_eq!(rb_units_per_bit(50, 1, 2), RbRule::Uniform(25));
        assert_eq!(rb_units_per_bit(50, 2, 5), RbRule::Uniform(5));
        assert_eq!(rb_units_per_bit(50, 3, 2), RbRule::RoundRobinShare);
    }

    #[test]
    fn select_ties_go_to_last() {
        let s = enumerate_cc_vectors(2, 2, 1).unwrap();
        let (v, r) = select_cc(|_| Ok(1.0), &s.pcc_constrained).unwrap();
        assert_eq!(v, *s.pcc_constrained.last().unwrap());
        assert_eq!(r, 1.0);
        let (v, _) = select_cc(|v| Ok(v.count_ones() as f64), &s.pcc_constrained).unwrap();
        assert_eq!(v, CcVector(0b1111));
        assert!(matches!(select_cc(|_| Ok(0.0), &[]), Err(Error::NoCandidates)));
        let (v, _) = select_cc(|v| Ok(if v.0 == 0b0101 { 2.0 } else { f64::NAN }), &s.pcc_constrained).unwrap();
        assert_eq!(v, CcVector(0b0101));
    }

    #[test]
    fn evaluator_called_once_per_candidate() {
        let s = enumerate_cc_vectors(2, 1, 5).unwrap();
        let mut calls = 0;
        select_cc(
            |_| {
                calls += 1;
                Ok(0.0)
            },
            &s.pcc_constrained,
        )
        .unwrap();
        assert_eq!(calls, 32);
    }

    #[test]
    fn two_ues_split_the_pcc() {
        let cfg = NetworkConfig::single_cell(&[25.0, 25.0]);
        let s = enumerate_cc_vectors(2, 2, 1).unwrap();
        let plan = allocate_rbs(CcVector(0b0101), &s, &[0, 1], &[true, true], &cfg).unwrap();
        assert_eq!(plan.rb_counts(), vec![vec![25, 0], vec![25, 0]]);
        let plan = allocate_rbs(CcVector(0b1111), &s, &[0, 1], &[true, true], &cfg).unwrap();
        assert_eq!(plan.rb_counts(), vec![vec![25, 25], vec![25, 25]]);
        let plan = allocate_rbs(CcVector(0b0111), &s, &[0, 1], &[true, true], &cfg).unwrap();
        assert_eq!(plan.rb_counts(), vec![vec![25, 50], vec![25, 0]]);
    }

    #[test]
    fn fine_resolution_units() {
        let mut cfg = NetworkConfig::single_cell(&[25.0]);
        cfg.rb_resolution = 5;
        let s = enumerate_cc_vectors(2, 1, 5).unwrap();
        // PCC plus three of five resolution bits.
        let plan = allocate_rbs(CcVector(0b10_1011), &s, &[0], &[true], &cfg).unwrap();
        assert_eq!(plan.rb_counts(), vec![vec![50, 30]]);
        let plan = allocate_rbs(CcVector(0b1), &s, &[0], &[true], &cfg).unwrap();
        assert_eq!(plan.rb_count(0, 1), 0);
        assert!(allocate_rbs(CcVector(0b10), &s, &[0], &[true], &cfg).is_err());
    }

    #[test]
    fn power_split() {
        let cfg = NetworkConfig::single_cell(&[25.0]);
        let s = enumerate_cc_vectors(2, 1, 1).unwrap();
        let pcc_only = allocate_rbs(CcVector(0b01), &s, &[0], &[true], &cfg).unwrap();
        assert_eq!(per_rb_power(&[0.5], &pcc_only).unwrap(), vec![0.01]);
        assert_eq!(per_rb_power(&[0.0], &pcc_only).unwrap(), vec![0.0]);

        let mut cfg2 = cfg.clone();
        cfg2.rb_resolution = 2;
        let s2 = enumerate_cc_vectors(2, 1, 2).unwrap();
        let plan = allocate_rbs(CcVector(0b011), &s2, &[0], &[true], &cfg2).unwrap();
        assert_eq!(plan.total_rbs(0), 75);
        let p = per_rb_power(&[0.5], &plan).unwrap()[0];
        assert!((p - 6.667e-3).abs() < 1e-6);
        assert!((p * 75.0 - 0.5).abs() < 1e-15);

        let empty = RbPlan {
            ues: vec![4],
            rbs: vec![vec![vec![], vec![]]],
        };
        assert!(matches!(
            per_rb_power(&[0.1], &empty),
            Err(Error::NoResourceBlocks { ue: 4, .. })
        ));
    }

    #[test]
    fn applied_plan_is_valid() {
        let mut cfg = NetworkConfig::single_cell(&[25.0, 35.0]);
        cfg.rb_resolution = 5;
        let s = enumerate_cc_vectors(2, 2, 5).unwrap();
        let mut alloc = AllocationState::for_config(&cfg);
        let v = CcVector(0b011111_101011);
        let plan = allocate_rbs(v, &s, &[0, 1], &[true, true], &cfg).unwrap();
        assert_eq!(plan.rb_counts(), vec![vec![25, 15], vec![25, 20]]);
        plan.apply(&[0.3, 0.5], &mut alloc).unwrap();
        alloc.validate(&cfg).unwrap();
    }

    /// Independent argmax: checks the PCC rule arithmetically and keeps the
    /// last maximum.
    fn brute_force(bits_per_ue: usize, slots: usize, f: &dyn Fn(u32) -> f64) -> (u32, f64) {
        let mut best = (u32::MAX, f64::NEG_INFINITY);
        for idx in 0..(1u32 << (bits_per_ue * slots)) {
            let ok = (0..slots).all(|s| (idx / (1 << (s * bits_per_ue))) % 2 == 1);
            if ok && f(idx) >= best.1 {
                best = (idx, f(idx));
            }
        }
        best
    }

    #[test]
    fn select_matches_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let m = rng.random_range(1..=3usize);
            let res = if m >= 2 { [1, 2, 5][rng.random_range(0..3)] } else { 1 };
            let slots = rng.random_range(1..=2usize);
            let Ok(set) = enumerate_cc_vectors(m, slots, res) else { continue };
            if set.total_bits() > 8 {
                continue;
            }
            let table: Vec<f64> = (0..set.len_all()).map(|_| rng.random_range(0..4) as f64).collect();
            let (v, r) = select_cc(|v| Ok(table[v.0 as usize]), &set.pcc_constrained).unwrap();
            let (ov, or) = brute_force(set.bits_per_ue(), slots, &|i| table[i as usize]);
            assert_eq!((v.0, r), (ov, or));
        }
    }

    proptest! {
        #[test]
        fn plans_conserve_rbs_and_power(
            m in 2usize..=3,
            res in prop::sample::select(vec![1usize, 2, 5]),
            slots in 1usize..=2,
            raw in any::<u32>(),
            p0 in 0.0f64..0.5,
            p1 in 0.0f64..0.5,
        ) {
            let set = enumerate_cc_vectors(m, slots, res).unwrap();
            let v = set.pcc_constrained[raw as usize % set.pcc_constrained.len()];
            let mut cfg = NetworkConfig::single_cell(&vec![20.0; slots]);
            cfg.num_ccs = m;
            cfg.rb_resolution = res;
            let ues: Vec<usize> = (0..slots).collect();
            let plan = allocate_rbs(v, &set, &ues, &vec![true; slots], &cfg).unwrap();
            for cc in 0..m {
                let mut seen = vec![false; cfg.rbs_per_cc];
                for s in 0..slots {
                    for &r in &plan.rbs[s][cc] {
                        prop_assert!(!seen[r]);
                        seen[r] = true;
                    }
                }
            }
            for s in 0..slots {
                prop_assert!(plan.rb_count(s, 0) > 0);
                if res == 1 {
                    let cc2 = plan.rb_count(s, 1);
                    prop_assert!(slots > 1 || cc2 == 0 || cc2 == 50);
                }
            }
            let powers = [p0, p1];
            let mut alloc = AllocationState::for_config(&cfg);
            plan.apply(&powers[..slots], &mut alloc).unwrap();
            alloc.validate(&cfg).unwrap();
            for s in 0..slots {
                let total: f64 = alloc.per_rb_power.slice(ndarray::s![s, .., ..]).sum();
                prop_assert!((total - powers[s]).abs() <= 1e-9 * powers[s].max(1e-300));
            }
        }
    }
}
