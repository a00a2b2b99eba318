//! DBSCAN over activity sequences under the normalized edit distance.
//!
//! A point is core when its eps-neighborhood (itself included) holds at
//! least `min_points` points. Clusters are the density-connected components
//! of core points; a non-core point in reach of several clusters joins the
//! one discovered first in input order, and unreachable points are noise.
//!
//! Identical sequences have identical neighborhoods, so the sweep runs over
//! groups of equal sequences with member-weighted counts; this changes
//! nothing about the resulting partition and keeps the pairwise distance
//! work proportional to the number of distinct sequences.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::edit_distance::{edit_distance_normalized, levenshtein};
use super::ClusterAssignment;
use crate::error::{Error, Result};

/// An activity-label sequence (one encoded trace prefix).
pub type Sequence = Vec<String>;

/// A trained DBSCAN clustering. Member sequences are stored verbatim:
/// runtime assignment needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanClusters {
    pub eps: f64,
    pub min_points: usize,
    pub clusters: Vec<Vec<Sequence>>,
    pub noise: Vec<Sequence>,
    /// Cluster id per input sequence (`None` = noise); training-time
    /// bookkeeping, not persisted.
    #[serde(skip)]
    pub labels: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GroupState {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// Clusters `sequences` with DBSCAN under the normalized edit distance.
pub fn cluster_dbscan(sequences: &[Sequence], eps: f64, min_points: usize) -> Result<DbscanClusters> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if min_points == 0 {
        return Err(Error::Parameter("min_points must be at least 1".into()));
    }

    // Intern labels so the edit-distance inner loop compares integers.
    let mut symbols: HashMap<&str, u32> = HashMap::new();
    let interned: Vec<Vec<u32>> = sequences
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|label| {
                    let next = symbols.len() as u32;
                    *symbols.entry(label.as_str()).or_insert(next)
                })
                .collect()
        })
        .collect();

    // Group identical sequences, keeping first-occurrence order.
    let mut group_of: HashMap<&[u32], usize> = HashMap::new();
    let mut group_members: Vec<Vec<usize>> = Vec::new();
    for (i, seq) in interned.iter().enumerate() {
        match group_of.get(seq.as_slice()) {
            Some(&g) => group_members[g].push(i),
            None => {
                group_of.insert(seq.as_slice(), group_members.len());
                group_members.push(vec![i]);
            }
        }
    }
    let group_repr: Vec<&[u32]> = group_members
        .iter()
        .map(|m| interned[m[0]].as_slice())
        .collect();
    let group_count = group_members.len();

    // eps-neighborhoods between groups (self always included).
    let neighbors: Vec<Vec<usize>> = (0..group_count)
        .into_par_iter()
        .map(|g| {
            (0..group_count)
                .filter(|&h| {
                    g == h || {
                        let a = group_repr[g];
                        let b = group_repr[h];
                        // cheap lower bound before the DP
                        let longest = a.len().max(b.len());
                        let diff = a.len().abs_diff(b.len());
                        longest == 0
                            || (diff as f64 <= eps * longest as f64
                                && levenshtein(a, b) as f64 <= eps * longest as f64)
                    }
                })
                .collect()
        })
        .collect();
    let neighbor_weight = |g: usize| -> usize {
        neighbors[g].iter().map(|&h| group_members[h].len()).sum()
    };

    let mut state = vec![GroupState::Unvisited; group_count];
    let mut cluster_count = 0usize;
    for g in 0..group_count {
        if state[g] != GroupState::Unvisited {
            continue;
        }
        if neighbor_weight(g) < min_points {
            state[g] = GroupState::Noise;
            continue;
        }
        let cid = cluster_count;
        cluster_count += 1;
        state[g] = GroupState::Cluster(cid);
        let mut queue: VecDeque<usize> = neighbors[g].iter().copied().filter(|&h| h != g).collect();
        while let Some(q) = queue.pop_front() {
            match state[q] {
                GroupState::Cluster(_) => {}
                // previously unreachable border point, claimed now
                GroupState::Noise => state[q] = GroupState::Cluster(cid),
                GroupState::Unvisited => {
                    state[q] = GroupState::Cluster(cid);
                    if neighbor_weight(q) >= min_points {
                        queue.extend(neighbors[q].iter().copied());
                    }
                }
            }
        }
    }

    let mut labels: Vec<Option<usize>> = vec![None; sequences.len()];
    let mut clusters: Vec<Vec<Sequence>> = vec![Vec::new(); cluster_count];
    let mut noise: Vec<Sequence> = Vec::new();
    for (g, members) in group_members.iter().enumerate() {
        for &i in members {
            match state[g] {
                GroupState::Cluster(cid) => {
                    labels[i] = Some(cid);
                    clusters[cid].push(sequences[i].clone());
                }
                GroupState::Noise => noise.push(sequences[i].clone()),
                GroupState::Unvisited => unreachable!("every group is visited"),
            }
        }
    }

    Ok(DbscanClusters {
        eps,
        min_points,
        clusters,
        noise,
        labels,
    })
}

/// Assigns a sequence to the cluster holding the globally nearest member.
/// Noise is never an assignment target; ties keep the lowest cluster id.
///
/// Trained models always hold at least one cluster (all-noise fits are
/// rejected at training time).
pub fn assign_dbscan(clusters: &DbscanClusters, sequence: &[String]) -> ClusterAssignment {
    assert!(
        !clusters.clusters.is_empty(),
        "assignment requires at least one cluster"
    );
    let mut best = ClusterAssignment {
        cluster_id: 0,
        distance: f64::INFINITY,
    };
    for (cid, members) in clusters.clusters.iter().enumerate() {
        for member in members {
            let distance = edit_distance_normalized(member, sequence);
            if distance < best.distance {
                best = ClusterAssignment {
                    cluster_id: cid,
                    distance,
                };
            }
        }
    }
    best
}
