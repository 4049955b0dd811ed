//! Processing architectures: the flat daisy chain and the two-level
//! sub-array tree, with the node visitation schedules receivers execute.
//!
//! A schedule is a list of groups. Each group's leaves are visited
//! sequentially during dispersion; pooling combines the groups' final
//! estimates with the group weights (ascending group order, so floating-point
//! summation order is deterministic). The chain is the single-group case with
//! weight one, which makes its pooling the identity on the leaf estimate.
//!
//! Leaf indices are 0-based internally; the CLI and the JSON partition format
//! use 1-based antenna numbering.

use rand::Rng;
use serde::Deserialize;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// A processing architecture over `M` per-antenna nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    /// Serial daisy chain over all `m` nodes.
    Chain { m: usize },
    /// Two-level tree: disjoint sub-arrays, each dispersed sequentially, with
    /// positive per-sub-array pooling weights summing to one at the root.
    SubarrayTree {
        subarrays: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
}

impl Topology {
    /// Number of leaves (antennas).
    pub fn m(&self) -> usize {
        match self {
            Topology::Chain { m } => *m,
            Topology::SubarrayTree { subarrays, .. } => {
                subarrays.iter().map(|s| s.len()).sum()
            }
        }
    }
}

/// One dispersion group: leaves visited sequentially, and the weight its
/// final estimate carries in the pooled combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleGroup {
    pub leaves: Vec<usize>,
    pub weight: f64,
}

/// A concrete visitation plan for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    groups: Vec<ScheduleGroup>,
}

impl Schedule {
    pub fn groups(&self) -> &[ScheduleGroup] {
        &self.groups
    }

    /// All leaves in dispersion order (group concatenation).
    pub fn dispersion_order(&self) -> Vec<usize> {
        self.groups.iter().flat_map(|g| g.leaves.iter().copied()).collect()
    }

    /// Total scheduled node visits per cycle.
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.leaves.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat daisy chain over `m >= 1` nodes, rooted at node 0.
pub fn build_chain(m: usize) -> Result<Topology> {
    if m == 0 {
        return Err(Error::invalid("build_chain: M must be positive"));
    }
    Ok(Topology::Chain { m })
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Two-level sub-array tree from a disjoint cover of `0..M`. Missing weights
/// default to uniform `1/S`; provided weights must be positive and sum to one
/// within `1e-12`.
pub fn build_subarray_tree(
    partition: Vec<Vec<usize>>,
    weights: Option<Vec<f64>>,
) -> Result<Topology> {
    if partition.is_empty() || partition.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid(
            "build_subarray_tree: partition must be a nonempty list of nonempty groups",
        ));
    }
    let m: usize = partition.iter().map(|s| s.len()).sum();
    let mut seen = vec![false; m];
    for &leaf in partition.iter().flatten() {
        if leaf >= m || seen[leaf] {
            return Err(Error::invalid(format!(
                "build_subarray_tree: partition must cover 0..{m} disjointly (offending leaf {leaf})"
            )));
        }
        seen[leaf] = true;
    }
    let weights = match weights {
        Some(w) => {
            if w.len() != partition.len() {
                return Err(Error::invalid(format!(
                    "build_subarray_tree: {} weights for {} subarrays",
                    w.len(),
                    partition.len()
                )));
            }
            if w.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
                return Err(Error::invalid("build_subarray_tree: weights must be positive"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::invalid(format!(
                    "build_subarray_tree: weights must sum to 1, got {sum}"
                )));
            }
            w
        }
        None => vec![1.0 / partition.len() as f64; partition.len()],
    };
    Ok(Topology::SubarrayTree {
        subarrays: partition,
        weights,
    })
}

/// Samples a chain root with probability proportional to the antenna's
/// channel energy `||h_m||^2`.
pub fn select_random_root(channel: &ChannelRealization, stream: RngStream) -> Result<usize> {
    let mut rng = stream.rng();
    select_random_root_with(channel, &mut rng)
}

/// As [`select_random_root`] but drawing from an already-positioned generator.
pub fn select_random_root_with(
    channel: &ChannelRealization,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<usize> {
    let energies: Vec<f64> = (0..channel.m()).map(|m| channel.row_norm_sq(m)).collect();
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("select_random_root: channel has zero energy"));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (m, &e) in energies.iter().enumerate() {
        acc += e;
        if u < acc {
            return Ok(m);
        }
    }
    Ok(channel.m() - 1)
}

/// Builds the visitation schedule.
///
/// For a chain the order is the circular rotation starting at `root`
/// (`root, root+1, ..., M-1, 0, ..., root-1`), with a single weight-one
/// pooling group. For a tree, each sub-array is dispersed in ascending leaf
/// index from the shared initial guess and pooled with its weight; root
/// re-selection is a chain-only mechanism, so trees accept only `root == 0`.
pub fn make_schedule(topology: &Topology, root: usize) -> Result<Schedule> {
    match topology {
        Topology::Chain { m } => {
            if root >= *m {
                return Err(Error::invalid(format!(
                    "make_schedule: root {root} out of range for M={m}"
                )));
            }
            let leaves = (0..*m).map(|i| (root + i) % m).collect();
            Ok(Schedule {
                groups: vec![ScheduleGroup { leaves, weight: 1.0 }],
            })
        }
        Topology::SubarrayTree { subarrays, weights } => {
            if root != 0 {
                return Err(Error::invalid(
                    "make_schedule: sub-array trees support only the canonical root 0",
                ));
            }
            let groups = subarrays
                .iter()
                .zip(weights.iter())
                .map(|(leaves, &weight)| {
                    let mut leaves = leaves.clone();
                    leaves.sort_unstable();
                    ScheduleGroup { leaves, weight }
                })
                .collect();
            Ok(Schedule { groups })
        }
    }
}

/// CLI topology description: `chain`, `tree:SxN` (S equal groups of N), or a
/// path to a JSON partition file.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Chain,
    /// `tree:SxN` — S sub-arrays of N consecutive antennas each.
    EqualTree { groups: usize, group_size: usize },
    /// Explicit partition (typically loaded from JSON).
    Explicit {
        subarrays: Vec<Vec<usize>>,
        weights: Option<Vec<f64>>,
    },
}

impl TopologySpec {
    /// Realizes the spec for an `M`-antenna system.
    pub fn build(&self, m: usize) -> Result<Topology> {
        match self {
            TopologySpec::Chain => build_chain(m),
            TopologySpec::EqualTree { groups, group_size } => {
                if groups * group_size != m {
                    return Err(Error::invalid(format!(
                        "topology tree:{groups}x{group_size} does not cover M={m} antennas"
                    )));
                }
                let partition = (0..*groups)
                    .map(|g| (g * group_size..(g + 1) * group_size).collect())
                    .collect();
                build_subarray_tree(partition, None)
            }
            TopologySpec::Explicit { subarrays, weights } => {
                build_subarray_tree(subarrays.clone(), weights.clone())
            }
        }
    }
}

/// Parses the CLI topology string: `chain` or `tree:SxN`. Anything else is
/// rejected here; the CLI treats non-matching strings as JSON file paths.
pub fn parse_topology_spec(spec: &str) -> Result<TopologySpec> {
    if spec == "chain" {
        return Ok(TopologySpec::Chain);
    }
    if let Some(rest) = spec.strip_prefix("tree:") {
        let (s, n) = rest
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::invalid(format!("topology '{spec}': expected tree:SxN")))?;
        let groups: usize = s
            .parse()
            .map_err(|_| Error::invalid(format!("topology '{spec}': bad group count '{s}'")))?;
        let group_size: usize = n
            .parse()
            .map_err(|_| Error::invalid(format!("topology '{spec}': bad group size '{n}'")))?;
        if groups == 0 || group_size == 0 {
            return Err(Error::invalid(format!(
                "topology '{spec}': groups and sizes must be positive"
            )));
        }
        return Ok(TopologySpec::EqualTree { groups, group_size });
    }
    Err(Error::invalid(format!(
        "topology '{spec}': expected 'chain', 'tree:SxN', or a JSON partition file"
    )))
}

#[derive(Debug, Deserialize)]
struct PartitionFile {
    subarrays: Vec<Vec<usize>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

/// Parses a JSON partition document
/// `{"subarrays": [[1,2],[3,4]], "weights": [0.5, 0.5]}` with 1-based
/// antenna indices.
pub fn parse_partition_json(bytes: &[u8]) -> Result<TopologySpec> {
    let parsed: PartitionFile = serde_json::from_slice(bytes)?;
    let mut subarrays = Vec::with_capacity(parsed.subarrays.len());
    for group in parsed.subarrays {
        let mut zero_based = Vec::with_capacity(group.len());
        for leaf in group {
            if leaf == 0 {
                return Err(Error::invalid(
                    "partition file: antenna indices are 1-based, found 0",
                ));
            }
            zero_based.push(leaf - 1);
        }
        subarrays.push(zero_based);
    }
    Ok(TopologySpec::Explicit {
        subarrays,
        weights: parsed.weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_stationary;

    #[test]
    fn chain_dispersion_order() {
        let topo = build_chain(3).unwrap();
        let sched = make_schedule(&topo, 0).unwrap();
        assert_eq!(sched.dispersion_order(), vec![0, 1, 2]);
        assert_eq!(sched.groups().len(), 1);
        assert_eq!(sched.groups()[0].weight, 1.0);
    }

    #[test]
    fn chain_degenerate_single_node() {
        let topo = build_chain(1).unwrap();
        let sched = make_schedule(&topo, 0).unwrap();
        assert_eq!(sched.dispersion_order(), vec![0]);
    }

    #[test]
    fn chain_of_paper_scale() {
        assert_eq!(build_chain(128).unwrap().m(), 128);
        assert!(build_chain(0).is_err());
    }

    #[test]
    fn rotation_from_root() {
        // Root 1 in a 4-chain (0-based): order (1,2,3,0).
        let topo = build_chain(4).unwrap();
        let sched = make_schedule(&topo, 1).unwrap();
        assert_eq!(sched.dispersion_order(), vec![1, 2, 3, 0]);
        assert!(make_schedule(&topo, 4).is_err());
    }

    #[test]
    fn tree_uniform_default_weights() {
        let topo = build_subarray_tree(vec![vec![0, 1], vec![2, 3]], None).unwrap();
        match &topo {
            Topology::SubarrayTree { weights, .. } => {
                assert_eq!(weights, &vec![0.5, 0.5]);
            }
            _ => panic!("expected tree"),
        }
        let singletons = build_subarray_tree(vec![vec![0], vec![1], vec![2]], None).unwrap();
        match &singletons {
            Topology::SubarrayTree { weights, .. } => {
                for w in weights {
                    assert!((w - 1.0 / 3.0).abs() < 1e-15);
                }
            }
            _ => panic!("expected tree"),
        }
    }

    #[test]
    fn tree_rejects_bad_partitions() {
        assert!(build_subarray_tree(vec![], None).is_err());
        assert!(build_subarray_tree(vec![vec![0, 0]], None).is_err());
        assert!(build_subarray_tree(vec![vec![0], vec![0]], None).is_err());
        assert!(build_subarray_tree(vec![vec![0, 2]], None).is_err());
        assert!(build_subarray_tree(vec![vec![0], vec![1]], Some(vec![0.5])).is_err());
        assert!(build_subarray_tree(vec![vec![0], vec![1]], Some(vec![0.7, 0.7])).is_err());
        assert!(build_subarray_tree(vec![vec![0], vec![1]], Some(vec![-0.5, 1.5])).is_err());
    }

    #[test]
    fn tree_schedule_groups_and_weights() {
        let topo = build_subarray_tree(vec![vec![0, 1], vec![2, 3]], Some(vec![0.25, 0.75])).unwrap();
        let sched = make_schedule(&topo, 0).unwrap();
        assert_eq!(sched.groups().len(), 2);
        assert_eq!(sched.groups()[0].leaves, vec![0, 1]);
        assert_eq!(sched.groups()[0].weight, 0.25);
        assert_eq!(sched.groups()[1].weight, 0.75);
        assert!(make_schedule(&topo, 1).is_err());
    }

    #[test]
    fn root_sampling_uniform_for_equal_rows() {
        // A stationary draw replaced by unit rows: every root equally likely.
        let ch = generate_stationary(4, 4, RngStream::new(3, 0))
            .unwrap()
            .normalize_rows()
            .unwrap();
        let draws = 40_000u64;
        let mut counts = [0usize; 4];
        for i in 0..draws {
            let root = select_random_root(&ch, RngStream::new(91, i)).unwrap();
            counts[root] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn root_sampling_degenerate_mass() {
        // One nonzero row: always chosen.
        let mut h = crate::numerics::CMatrix::zeros(3, 2);
        h[(1, 0)] = crate::numerics::C64::new(1.0, -2.0);
        let ch = ChannelRealization::from_matrix(h).unwrap();
        for i in 0..50u64 {
            assert_eq!(select_random_root(&ch, RngStream::new(7, i)).unwrap(), 1);
        }
        let all_zero =
            ChannelRealization::from_matrix(crate::numerics::CMatrix::zeros(3, 2)).unwrap();
        assert!(select_random_root(&all_zero, RngStream::new(7, 0)).is_err());
    }

    #[test]
    fn parse_specs() {
        assert_eq!(parse_topology_spec("chain").unwrap(), TopologySpec::Chain);
        assert_eq!(
            parse_topology_spec("tree:4x32").unwrap(),
            TopologySpec::EqualTree { groups: 4, group_size: 32 }
        );
        assert!(parse_topology_spec("tree:0x4").is_err());
        assert!(parse_topology_spec("tree:4").is_err());
        assert!(parse_topology_spec("ring").is_err());
    }

    #[test]
    fn equal_tree_builds_partition() {
        let topo = parse_topology_spec("tree:2x3").unwrap().build(6).unwrap();
        match topo {
            Topology::SubarrayTree { subarrays, .. } => {
                assert_eq!(subarrays, vec![vec![0, 1, 2], vec![3, 4, 5]]);
            }
            _ => panic!("expected tree"),
        }
        assert!(parse_topology_spec("tree:2x3").unwrap().build(7).is_err());
    }

    #[test]
    fn parse_partition_json_one_based() {
        let spec = parse_partition_json(
            br#"{"subarrays": [[1, 2], [3, 4]], "weights": [0.25, 0.75]}"#,
        )
        .unwrap();
        let topo = spec.build(4).unwrap();
        match topo {
            Topology::SubarrayTree { subarrays, weights } => {
                assert_eq!(subarrays, vec![vec![0, 1], vec![2, 3]]);
                assert_eq!(weights, vec![0.25, 0.75]);
            }
            _ => panic!("expected tree"),
        }
        assert!(parse_partition_json(br#"{"subarrays": [[0, 1]]}"#).is_err());
        assert!(parse_partition_json(b"not json").is_err());
    }
}
