//! Uncertainty-based sampling budgets, per-region point sampling with
//! repetition, farthest-point sampling, ball-query grouping, and the
//! three-branch layered grouping pipeline.
//!
//! The budget allocator turns per-region density statistics (mean m_i and
//! standard deviation sigma_i) into point counts: mid and far regions get
//! `m + k * sigma` rounded to the nearest multiple of the granularity
//! (ties round up), far first, then mid, with near taking the remainder so
//! the three budgets always sum to the requested total.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{DensityStats, Region, RegionPartition};

/// Index value used to pad samples drawn from an empty region. Consumers
/// substitute a zero point and carry the `padded_empty` flag.
pub const PAD_INDEX: usize = usize::MAX;

/// Per-region point counts; the three parts always sum to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingBudget {
    pub total: usize,
    pub near: usize,
    pub mid: usize,
    pub far: usize,
}

impl SamplingBudget {
    pub fn for_region(&self, region: Region) -> usize {
        match region {
            Region::Near => self.near,
            Region::Mid => self.mid,
            Region::Far => self.far,
        }
    }
}

/// Multipliers on the mid/far standard deviations, plus the rounding
/// granularity for budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub k_mid: f64,
    pub k_far: f64,
    pub granularity: usize,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::numbered(4).unwrap()
    }
}

impl StrategySpec {
    pub fn new(k_mid: f64, k_far: f64, granularity: usize) -> Result<Self> {
        if k_mid < 0.0 || k_far < 0.0 || !k_mid.is_finite() || !k_far.is_finite() {
            return Err(Error::Validation(format!(
                "strategy multipliers must be finite and nonnegative, got ({k_mid}, {k_far})"
            )));
        }
        if granularity == 0 {
            return Err(Error::Validation("granularity must be positive".into()));
        }
        Ok(Self {
            k_mid,
            k_far,
            granularity,
        })
    }

    /// Zero-uncertainty split: mid and far budgets from the means alone.
    pub fn natural() -> Self {
        Self::new(0.0, 0.0, 1024).unwrap()
    }

    /// The four numbered uncertainty strategies:
    /// 1 -> (1.0, 1.0), 2 -> (1.5, 1.5), 3 -> (2.0, 2.0), 4 -> (1.5, 2.0).
    pub fn numbered(n: u8) -> Result<Self> {
        let (k_mid, k_far) = match n {
            1 => (1.0, 1.0),
            2 => (1.5, 1.5),
            3 => (2.0, 2.0),
            4 => (1.5, 2.0),
            _ => {
                return Err(Error::Validation(format!(
                    "strategy number must be 1..=4, got {n}"
                )))
            }
        };
        Self::new(k_mid, k_far, 1024)
    }
}

/// Round to the nearest multiple of `granularity` (half rounds up), never
/// below one granule.
fn round_to_granule(raw: f64, granularity: usize) -> usize {
    let g = granularity as f64;
    let n = (raw / g + 0.5).floor().max(1.0);
    n as usize * granularity
}

/// Derive per-region budgets from density statistics.
pub fn allocate_budget(
    stats: &DensityStats,
    strategy: &StrategySpec,
    total: usize,
) -> Result<SamplingBudget> {
    if total < 3 * strategy.granularity {
        return Err(Error::Validation(format!(
            "total {total} is below three granules of {}",
            strategy.granularity
        )));
    }
    let far_raw = stats.mean[2] + strategy.k_far * stats.sigma[2];
    let far = round_to_granule(far_raw, strategy.granularity);
    let mid_raw = stats.mean[1] + strategy.k_mid * stats.sigma[1];
    let mid = round_to_granule(mid_raw, strategy.granularity);
    let near = total as i64 - mid as i64 - far as i64;
    if near <= 0 {
        return Err(Error::InfeasibleStrategy(format!(
            "mid {mid} + far {far} exhaust the total {total}"
        )));
    }
    let near = near as usize;
    if near <= mid || near <= far {
        return Err(Error::InfeasibleStrategy(format!(
            "near budget {near} is not the largest region (mid {mid}, far {far})"
        )));
    }
    Ok(SamplingBudget {
        total,
        near,
        mid,
        far,
    })
}

/// Fractions of proposals kept per region; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalRatios {
    pub near: f64,
    pub mid: f64,
    pub far: f64,
}

impl Default for ProposalRatios {
    fn default() -> Self {
        Self {
            near: 0.3,
            mid: 0.5,
            far: 0.2,
        }
    }
}

impl ProposalRatios {
    pub fn new(near: f64, mid: f64, far: f64) -> Result<Self> {
        for v in [near, mid, far] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::Validation(format!(
                    "proposal ratios must lie in (0, 1), got {v}"
                )));
            }
        }
        if (near + mid + far - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "proposal ratios must sum to 1, got {}",
                near + mid + far
            )));
        }
        Ok(Self { near, mid, far })
    }

    /// Split `total` proposals by ratio, assigning rounding remainders to the
    /// largest fractional parts.
    pub fn allocate(&self, total: usize) -> [usize; 3] {
        let raw = [
            self.near * total as f64,
            self.mid * total as f64,
            self.far * total as f64,
        ];
        let mut out = raw.map(|v| v.floor() as usize);
        let mut rest: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v - v.floor()))
            .collect();
        rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut missing = total - out.iter().sum::<usize>();
        for (i, _) in rest {
            if missing == 0 {
                break;
            }
            out[i] += 1;
            missing -= 1;
        }
        out
    }
}

/// Result of sampling a region to a fixed budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledRegion {
    /// Cloud indices, exactly `budget` of them; `PAD_INDEX` when the source
    /// region was empty.
    pub indices: Vec<usize>,
    pub padded_empty: bool,
}

/// Sample `budget` indices from a region's index set. With enough points the
/// draw is uniform without replacement; otherwise every point appears once
/// and the remainder is filled by uniform repetition. Deterministic per seed.
pub fn sample_region(points: &[usize], budget: usize, seed: u64) -> Result<SampledRegion> {
    use rand::SeedableRng;
    if budget == 0 {
        return Err(Error::Validation("budget must be positive".into()));
    }
    if points.is_empty() {
        return Ok(SampledRegion {
            indices: vec![PAD_INDEX; budget],
            padded_empty: true,
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let indices = if points.len() >= budget {
        rand::seq::index::sample(&mut rng, points.len(), budget)
            .into_iter()
            .map(|i| points[i])
            .collect()
    } else {
        use rand::Rng;
        let mut out: Vec<usize> = points.to_vec();
        while out.len() < budget {
            out.push(points[rng.random_range(0..points.len())]);
        }
        out
    };
    Ok(SampledRegion {
        indices,
        padded_empty: false,
    })
}

/// How farthest-point sampling picks its first point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpsStart {
    /// Start from the point nearest the input centroid (fully deterministic).
    NearestCentroid,
    /// Start from a fixed index.
    Index(usize),
    /// Start from a seeded random index.
    Random(u64),
}

/// Greedy max-min farthest-point sampling.
///
/// Each selection maximizes the minimum distance to the chosen set, with
/// ties broken by the lowest index. If `k` exceeds the input size, the
/// selected permutation repeats until `k` indices are emitted.
pub fn farthest_point_sampling(points: &[[f64; 3]], k: usize, start: FpsStart) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::Validation(
            "farthest-point sampling needs a nonempty input".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let n = points.len();
    let first = match start {
        FpsStart::NearestCentroid => {
            let mut centroid = [0.0; 3];
            for p in points {
                for (c, v) in centroid.iter_mut().zip(p.iter()) {
                    *c += v / n as f64;
                }
            }
            argmin_dist(points, centroid)
        }
        FpsStart::Index(i) => {
            if i >= n {
                return Err(Error::Validation(format!(
                    "start index {i} out of range for {n} points"
                )));
            }
            i
        }
        FpsStart::Random(seed) => {
            use rand::{Rng, SeedableRng};
            rand_chacha::ChaCha8Rng::seed_from_u64(seed).random_range(0..n)
        }
    };

    let mut selected = Vec::with_capacity(k.min(n));
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = first;
    selected.push(first);
    while selected.len() < k.min(n) {
        let cp = points[current];
        let mut best = 0usize;
        let mut best_d = f64::NEG_INFINITY;
        for (j, p) in points.iter().enumerate() {
            let d = dist_sq(*p, cp);
            if d < min_d2[j] {
                min_d2[j] = d;
            }
            // strict > keeps the lowest index on ties
            if min_d2[j] > best_d {
                best_d = min_d2[j];
                best = j;
            }
        }
        selected.push(best);
        current = best;
    }
    if k > n {
        let base = selected.clone();
        let mut cycle = base.iter().cycle();
        while selected.len() < k {
            selected.push(*cycle.next().unwrap());
        }
    }
    Ok(selected)
}

fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn argmin_dist(points: &[[f64; 3]], target: [f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, p) in points.iter().enumerate() {
        let d = dist_sq(*p, target);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Gather up to `max_samples` cloud indices within `radius` of each centroid,
/// in ascending index order. Groups short of `max_samples` repeat their first
/// index; a centroid with no neighbors gets its nearest point repeated.
pub fn ball_query(
    centroids: &[[f64; 3]],
    cloud: &[[f64; 3]],
    radius: f64,
    max_samples: usize,
) -> Result<Vec<Vec<usize>>> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::Validation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if max_samples == 0 {
        return Err(Error::Validation("max_samples must be at least 1".into()));
    }
    if cloud.is_empty() {
        return Err(Error::Validation("ball query needs a nonempty cloud".into()));
    }
    let r2 = radius * radius;
    let groups = centroids
        .par_iter()
        .map(|c| {
            let mut group = Vec::with_capacity(max_samples);
            for (j, p) in cloud.iter().enumerate() {
                if dist_sq(*p, *c) <= r2 {
                    group.push(j);
                    if group.len() == max_samples {
                        break;
                    }
                }
            }
            if group.is_empty() {
                group.push(argmin_dist(cloud, *c));
            }
            let first = group[0];
            while group.len() < max_samples {
                group.push(first);
            }
            group
        })
        .collect();
    Ok(groups)
}

/// Grouping radii for one set-abstraction layer: one radius per scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerRadii {
    Single(f64),
    Pair(f64, f64),
}

impl LayerRadii {
    pub fn scales(&self) -> Vec<f64> {
        match *self {
            LayerRadii::Single(r) => vec![r],
            LayerRadii::Pair(a, b) => vec![a, b],
        }
    }
}

/// Radii and centroid counts for one backbone branch. The radii grow across
/// layers while the group sizes shrink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSchedule {
    pub radii: Vec<LayerRadii>,
    pub group_sizes: Vec<usize>,
    pub samples_per_group: usize,
}

impl BranchSchedule {
    pub fn new(
        radii: Vec<LayerRadii>,
        group_sizes: Vec<usize>,
        samples_per_group: usize,
    ) -> Result<Self> {
        if radii.len() != group_sizes.len() || radii.is_empty() {
            return Err(Error::Validation(format!(
                "need matching nonempty radii and group sizes, got {} and {}",
                radii.len(),
                group_sizes.len()
            )));
        }
        if samples_per_group == 0 {
            return Err(Error::Validation("samples_per_group must be positive".into()));
        }
        for w in radii.windows(2) {
            let lo = w[0].scales();
            let hi = w[1].scales();
            let increasing = match (lo.as_slice(), hi.as_slice()) {
                ([a], [b]) => a < b,
                ([a0, a1], [b0, b1]) => a0 < b0 && a1 < b1,
                _ => false, // mixed arities across layers are not supported
            };
            if !increasing {
                return Err(Error::Validation(format!(
                    "radii must strictly increase across layers: {lo:?} !< {hi:?}"
                )));
            }
        }
        for w in group_sizes.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::Validation(format!(
                    "group sizes must strictly decrease across layers: {} <= {}",
                    w[0], w[1]
                )));
            }
        }
        for r in radii.iter().flat_map(|r| r.scales()) {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::Validation(format!("radius {r} must be positive")));
            }
        }
        Ok(Self {
            radii,
            group_sizes,
            samples_per_group,
        })
    }

    pub fn layers(&self) -> usize {
        self.radii.len()
    }
}

/// One set-abstraction layer's output for a branch. Indices refer to the
/// previous layer's point set (the region sample for layer 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerOutput {
    pub centroid_indices: Vec<usize>,
    /// groups[scale][centroid] = member indices, `samples_per_group` each.
    pub groups: Vec<Vec<Vec<usize>>>,
}

impl LayerOutput {
    /// (num centroids, samples per group) per grouping scale.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.groups
            .iter()
            .map(|per_scale| {
                let samples = per_scale.first().map_or(0, Vec::len);
                (per_scale.len(), samples)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchOutput {
    pub region: Region,
    pub sampled: SampledRegion,
    pub layers: Vec<LayerOutput>,
    /// False when the source region held no points and the branch runs on
    /// zero padding.
    pub valid: bool,
}

impl BranchOutput {
    pub fn centroid_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| l.centroid_indices.len())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub budget: SamplingBudget,
    /// Branch outputs in fixed near, mid, far order.
    pub branches: Vec<BranchOutput>,
}

impl PipelineOutput {
    /// Cloud indices in the fixed near-mid-far concatenation order.
    pub fn concatenated_indices(&self) -> Vec<usize> {
        self.branches
            .iter()
            .flat_map(|b| b.sampled.indices.iter().copied())
            .collect()
    }
}

/// Run the three-branch sampling and grouping pipeline: per region, sample to
/// budget, then alternate farthest-point sampling and ball-query grouping per
/// layer. Branches execute in parallel; outputs are identical for any thread
/// count because each branch derives its own seed.
pub fn build_branch_pipeline(
    positions: &[[f64; 3]],
    partition: &RegionPartition,
    budget: &SamplingBudget,
    schedules: &[BranchSchedule; 3],
    seed: u64,
) -> Result<PipelineOutput> {
    let layers = schedules[0].layers();
    if schedules.iter().any(|s| s.layers() != layers) {
        return Err(Error::Validation(
            "all branch schedules must have the same number of layers".into(),
        ));
    }
    let branches: Result<Vec<BranchOutput>> = Region::ALL
        .par_iter()
        .map(|&region| {
            let schedule = &schedules[region.index()];
            let region_indices = partition.region(region);
            let region_budget = budget.for_region(region);
            let sampled = sample_region(
                region_indices,
                region_budget,
                seed.wrapping_add(region.index() as u64),
            )?;
            let coords: Vec<[f64; 3]> = sampled
                .indices
                .iter()
                .map(|&i| {
                    if i == PAD_INDEX {
                        [0.0; 3]
                    } else {
                        positions[i]
                    }
                })
                .collect();
            let mut working = coords;
            let mut outputs = Vec::with_capacity(schedule.layers());
            for l in 0..schedule.layers() {
                let centroid_indices = farthest_point_sampling(
                    &working,
                    schedule.group_sizes[l],
                    FpsStart::NearestCentroid,
                )?;
                let centroids: Vec<[f64; 3]> =
                    centroid_indices.iter().map(|&i| working[i]).collect();
                let mut groups = Vec::new();
                for radius in schedule.radii[l].scales() {
                    groups.push(ball_query(
                        &centroids,
                        &working,
                        radius,
                        schedule.samples_per_group,
                    )?);
                }
                outputs.push(LayerOutput {
                    centroid_indices,
                    groups,
                });
                working = centroids;
            }
            Ok(BranchOutput {
                region,
                sampled: sampled.clone(),
                layers: outputs,
                valid: !sampled.padded_empty,
            })
        })
        .collect();
    Ok(PipelineOutput {
        budget: *budget,
        branches: branches?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::DensityStats;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_stats() -> DensityStats {
        DensityStats {
            mean: [13_800.0, 3_600.0, 1_000.0],
            sigma: [1_800.0, 1_100.0, 500.0],
            n_scenes: 3_712,
        }
    }

    #[test]
    fn strategy_4_reproduces_reference_split() {
        let b = allocate_budget(&reference_stats(), &StrategySpec::numbered(4).unwrap(), 16_384)
            .unwrap();
        assert_eq!((b.near, b.mid, b.far), (9_216, 5_120, 2_048));
        assert_eq!(b.near + b.mid + b.far, b.total);
    }

    #[test]
    fn natural_strategy_splits_by_means() {
        let b = allocate_budget(&reference_stats(), &StrategySpec::natural(), 16_384).unwrap();
        assert_eq!((b.near, b.mid, b.far), (11_264, 4_096, 1_024));
    }

    #[test]
    fn zero_sigma_is_proportional_for_power_of_two_means() {
        let stats = DensityStats {
            mean: [12_000.0, 3_000.0, 1_000.0],
            sigma: [0.0; 3],
            n_scenes: 10,
        };
        let b = allocate_budget(&stats, &StrategySpec::numbered(3).unwrap(), 16_384).unwrap();
        assert_eq!((b.near, b.mid, b.far), (12_288, 3_072, 1_024));
    }

    /// Scalar oracle for the budget arithmetic, written independently of the
    /// implementation path.
    fn oracle_budget(stats: &DensityStats, k_mid: f64, k_far: f64, total: i64) -> (i64, i64, i64) {
        let g = 1024f64;
        let round = |raw: f64| -> i64 {
            let mut n = (raw / g).floor();
            if raw - n * g >= (n + 1.0) * g - raw {
                n += 1.0;
            }
            (n.max(1.0) * g) as i64
        };
        let far = round(stats.mean[2] + k_far * stats.sigma[2]);
        let mid = round(stats.mean[1] + k_mid * stats.sigma[1]);
        (total - mid - far, mid, far)
    }

    #[test]
    fn all_numbered_strategies_match_scalar_oracle() {
        let stats = reference_stats();
        for n in 1..=4u8 {
            let s = StrategySpec::numbered(n).unwrap();
            let b = allocate_budget(&stats, &s, 16_384).unwrap();
            let (wn, wm, wf) = oracle_budget(&stats, s.k_mid, s.k_far, 16_384);
            assert_eq!(
                (b.near as i64, b.mid as i64, b.far as i64),
                (wn, wm, wf),
                "strategy {n}"
            );
        }
    }

    #[test]
    fn budget_conservation_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let stats = DensityStats {
                mean: [
                    rng.random_range(8_000.0..15_000.0),
                    rng.random_range(2_000.0..5_000.0),
                    rng.random_range(500.0..2_000.0),
                ],
                sigma: [
                    rng.random_range(0.0..2_000.0),
                    rng.random_range(0.0..1_500.0),
                    rng.random_range(0.0..800.0),
                ],
                n_scenes: 100,
            };
            let s = StrategySpec::numbered(rng.random_range(1..=4)).unwrap();
            if let Ok(b) = allocate_budget(&stats, &s, 16_384) {
                assert_eq!(b.near + b.mid + b.far, 16_384);
                assert!(b.near > b.mid && b.near > b.far);
            }
        }
    }

    #[test]
    fn raising_k_far_never_lowers_far_budget() {
        let stats = reference_stats();
        let mut last = 0;
        for step in 0..=8 {
            let k_far = step as f64 * 0.5;
            let s = StrategySpec::new(1.0, k_far, 1024).unwrap();
            let far = round_to_granule(stats.mean[2] + s.k_far * stats.sigma[2], 1024);
            assert!(far >= last);
            last = far;
        }
    }

    #[test]
    fn infeasible_strategy_errors() {
        let stats = DensityStats {
            mean: [1_000.0, 9_000.0, 7_000.0],
            sigma: [0.0; 3],
            n_scenes: 2,
        };
        assert!(matches!(
            allocate_budget(&stats, &StrategySpec::natural(), 16_384),
            Err(Error::InfeasibleStrategy(_))
        ));
    }

    #[test]
    fn proposal_ratios_validate_and_allocate() {
        assert!(ProposalRatios::new(0.3, 0.5, 0.2).is_ok());
        assert!(ProposalRatios::new(0.5, 0.5, 0.2).is_err());
        assert!(ProposalRatios::new(1.0, 0.0, 0.0).is_err());
        let r = ProposalRatios::default();
        assert_eq!(r.allocate(100), [30, 50, 20]);
        assert_eq!(r.allocate(101).iter().sum::<usize>(), 101);
    }

    #[test]
    fn sample_region_without_replacement() {
        let points: Vec<usize> = (100..110).collect();
        let s = sample_region(&points, 4, 9).unwrap();
        assert_eq!(s.indices.len(), 4);
        assert!(!s.padded_empty);
        let mut uniq = s.indices.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 4);
        assert!(s.indices.iter().all(|i| points.contains(i)));
        // determinism
        assert_eq!(sample_region(&points, 4, 9).unwrap(), s);
    }

    #[test]
    fn sample_region_with_repetition() {
        let points = vec![7, 8, 9];
        let s = sample_region(&points, 7, 3).unwrap();
        assert_eq!(s.indices.len(), 7);
        for p in &points {
            assert!(s.indices.contains(p), "{p} missing");
        }
    }

    #[test]
    fn sample_region_empty_is_padded() {
        let s = sample_region(&[], 5, 0).unwrap();
        assert!(s.padded_empty);
        assert_eq!(s.indices, vec![PAD_INDEX; 5]);
    }

    #[test]
    fn sample_region_selection_frequency_is_uniform() {
        let points: Vec<usize> = (0..10).collect();
        let mut counts = [0u32; 10];
        let trials = 10_000u32;
        for t in 0..trials {
            let s = sample_region(&points, 4, t as u64).unwrap();
            for i in s.indices {
                counts[i] += 1;
            }
        }
        // binomial(10_000, 0.4): 3 sigma ~ 147
        let expect = trials as f64 * 0.4;
        let band = 3.0 * (trials as f64 * 0.4 * 0.6).sqrt();
        for (i, c) in counts.iter().enumerate() {
            assert!(
                (*c as f64 - expect).abs() <= band,
                "point {i} drawn {c} times, expected {expect} +/- {band}"
            );
        }
    }

    #[test]
    fn fps_square_picks_diagonal() {
        let pts = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let got = farthest_point_sampling(&pts, 2, FpsStart::Index(0)).unwrap();
        assert_eq!(got, vec![0, 2]);
    }

    #[test]
    fn fps_k_equals_n_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let mut got = farthest_point_sampling(&pts, 50, FpsStart::NearestCentroid).unwrap();
        got.sort_unstable();
        assert_eq!(got, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn fps_k_beyond_n_repeats_selection() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let got = farthest_point_sampling(&pts, 7, FpsStart::Index(0)).unwrap();
        assert_eq!(got.len(), 7);
        assert_eq!(&got[..3], &got[3..6]);
    }

    /// O(n^2 k) reference: recompute every min-distance from scratch.
    fn fps_oracle(points: &[[f64; 3]], k: usize, first: usize) -> Vec<usize> {
        let mut selected = vec![first];
        while selected.len() < k.min(points.len()) {
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for (j, p) in points.iter().enumerate() {
                let d = selected
                    .iter()
                    .map(|&s| dist_sq(*p, points[s]))
                    .fold(f64::INFINITY, f64::min);
                if d > best_d {
                    best_d = d;
                    best = j;
                }
            }
            selected.push(best);
        }
        selected
    }

    #[test]
    fn fps_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let n = rng.random_range(20..200);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(-10.0..10.0),
                        rng.random_range(-10.0..10.0),
                        rng.random_range(-2.0..2.0),
                    ]
                })
                .collect();
            let k = rng.random_range(1..=20.min(n));
            let start = rng.random_range(0..n);
            let got = farthest_point_sampling(&pts, k, FpsStart::Index(start)).unwrap();
            let want = fps_oracle(&pts, k, start);
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn fps_spreads_better_than_random_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut wins = 0;
        let trials = 100;
        for _ in 0..trials {
            let pts: Vec<[f64; 3]> = (0..200)
                .map(|_| {
                    [
                        rng.random_range(0.0..10.0),
                        rng.random_range(0.0..10.0),
                        0.0,
                    ]
                })
                .collect();
            let fps = farthest_point_sampling(&pts, 10, FpsStart::NearestCentroid).unwrap();
            let min_pair = |ids: &[usize]| {
                let mut best = f64::INFINITY;
                for (a, &i) in ids.iter().enumerate() {
                    for &j in &ids[a + 1..] {
                        best = best.min(dist_sq(pts[i], pts[j]));
                    }
                }
                best
            };
            let random: Vec<usize> = rand::seq::index::sample(&mut rng, 200, 10).into_vec();
            if min_pair(&fps) >= min_pair(&random) {
                wins += 1;
            }
        }
        assert!(wins >= 95, "fps won only {wins}/{trials} trials");
    }

    #[test]
    fn ball_query_padding_and_full_coverage() {
        let cloud = [
            [0.0, 0.0, 0.0],
            [0.05, 0.0, 0.0],
            [5.0, 0.0, 0.0],
        ];
        // centroid on a cloud point, small radius: the two near points
        let g = ball_query(&[[0.0, 0.0, 0.0]], &cloud, 0.1, 4).unwrap();
        assert_eq!(g[0], vec![0, 1, 0, 0]);
        // radius covering everything
        let g = ball_query(&[[0.0, 0.0, 0.0]], &cloud, 10.0, 3).unwrap();
        assert_eq!(g[0], vec![0, 1, 2]);
        // no point in radius: nearest repeated
        let g = ball_query(&[[100.0, 0.0, 0.0]], &cloud, 0.5, 3).unwrap();
        assert_eq!(g[0], vec![2, 2, 2]);
    }

    #[test]
    fn ball_query_matches_distance_filter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cloud: Vec<[f64; 3]> = (0..500)
            .map(|_| {
                [
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let centroids: Vec<[f64; 3]> = (0..32)
            .map(|_| {
                [
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let got = ball_query(&centroids, &cloud, 0.8, 16).unwrap();
        for (c, group) in centroids.iter().zip(got.iter()) {
            let mut want: Vec<usize> = cloud
                .iter()
                .enumerate()
                .filter(|(_, p)| dist_sq(**p, *c) <= 0.64)
                .map(|(j, _)| j)
                .collect();
            if want.is_empty() {
                want.push(argmin_dist(&cloud, *c));
            }
            want.truncate(16);
            let first = want[0];
            while want.len() < 16 {
                want.push(first);
            }
            assert_eq!(*group, want);
        }
    }

    #[test]
    fn ball_query_soundness_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cloud: Vec<[f64; 3]> = (0..300)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0])
            .collect();
        let centroids = &cloud[..20];
        let groups = ball_query(centroids, &cloud, 0.5, 8).unwrap();
        for (c, group) in centroids.iter().zip(groups.iter()) {
            for &j in group {
                assert!(dist_sq(cloud[j], *c) <= 0.25 + 1e-12);
            }
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(BranchSchedule::new(
            vec![LayerRadii::Single(0.4), LayerRadii::Single(0.8)],
            vec![128, 32],
            16,
        )
        .is_ok());
        // radii must increase
        assert!(BranchSchedule::new(
            vec![LayerRadii::Single(0.8), LayerRadii::Single(0.4)],
            vec![128, 32],
            16,
        )
        .is_err());
        // group sizes must decrease
        assert!(BranchSchedule::new(
            vec![LayerRadii::Single(0.4), LayerRadii::Single(0.8)],
            vec![32, 128],
            16,
        )
        .is_err());
        // pairs compared per component
        assert!(BranchSchedule::new(
            vec![LayerRadii::Pair(0.1, 0.5), LayerRadii::Pair(0.5, 1.0)],
            vec![128, 32],
            16,
        )
        .is_ok());
    }
}
