//! Candidate associations and the pairwise geometric-consistency graph.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::clique::AdjacencyMatrix;
use crate::map::{ObjectMap, SemanticObject};

/// A same-class pairing of one reference object with one vehicle object,
/// by index into the two maps it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Association {
    pub ref_index: usize,
    pub veh_index: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AssociationError {
    #[error("index out of range")]
    OutOfRange,
    #[error("class mismatch between reference and vehicle object")]
    ClassMismatch,
}

impl Association {
    /// Checks both indices and that the two objects share a class.
    pub fn new(
        ref_map: &ObjectMap,
        veh_map: &ObjectMap,
        ref_index: usize,
        veh_index: usize,
    ) -> Result<Self, AssociationError> {
        let (r, v) = ref_map
            .get(ref_index)
            .zip(veh_map.get(veh_index))
            .ok_or(AssociationError::OutOfRange)?;
        if r.class != v.class {
            return Err(AssociationError::ClassMismatch);
        }
        Ok(Self {
            ref_index,
            veh_index,
        })
    }

    pub fn shares_endpoint(&self, other: &Association) -> bool {
        self.ref_index == other.ref_index || self.veh_index == other.veh_index
    }
}

/// All same-class pairs, sorted by `(ref_index, veh_index)`.
///
/// With a `prior`, every object that appears in a prior association is paired
/// only with its prior partner, and the remaining objects are paired all to
/// all within their class. Prior pairs that are out of range or
/// class-inconsistent are ignored.
pub fn build_candidate_associations(
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
    prior: Option<&[Association]>,
) -> Vec<Association> {
    let mut out = Vec::new();
    let mut ref_locked = vec![false; ref_map.len()];
    let mut veh_locked = vec![false; veh_map.len()];
    if let Some(prior) = prior {
        for a in prior {
            if let Ok(a) = Association::new(ref_map, veh_map, a.ref_index, a.veh_index) {
                if !ref_locked[a.ref_index] && !veh_locked[a.veh_index] {
                    ref_locked[a.ref_index] = true;
                    veh_locked[a.veh_index] = true;
                    out.push(a);
                }
            }
        }
    }
    let mut veh_by_class: HashMap<_, Vec<usize>> = HashMap::new();
    for (j, o) in veh_map.iter().enumerate() {
        if !veh_locked[j] {
            veh_by_class.entry(o.class).or_default().push(j);
        }
    }
    for (i, o) in ref_map.iter().enumerate() {
        if ref_locked[i] {
            continue;
        }
        if let Some(js) = veh_by_class.get(&o.class) {
            out.extend(js.iter().map(|&j| Association {
                ref_index: i,
                veh_index: j,
            }));
        }
    }
    out.sort_unstable();
    out
}

/// `| ‖p_i − p_j‖ − ‖q_i − q_j‖ |` for two associations.
pub fn pairwise_consistency(
    a_i: &Association,
    a_j: &Association,
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
) -> f64 {
    let c = |m: &ObjectMap, k: usize| m.objects()[k].centroid;
    let dp = (c(ref_map, a_i.ref_index) - c(ref_map, a_j.ref_index)).norm();
    let dq = (c(veh_map, a_i.veh_index) - c(veh_map, a_j.veh_index)).norm();
    (dp - dq).abs()
}

/// Graph over associations; an edge joins two associations that share no
/// endpoint and whose distance discrepancy is strictly below epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyGraph {
    vertices: Vec<Association>,
    adjacency: AdjacencyMatrix,
}

impl ConsistencyGraph {
    pub fn vertices(&self) -> &[Association] {
        &self.vertices
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.has_edge(i, j)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_count()
    }
}

fn distance_table(objects: &[SemanticObject], used: &[bool]) -> Vec<f64> {
    let n = objects.len();
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        if !used[i] {
            continue;
        }
        for j in i + 1..n {
            if used[j] {
                let d = (objects[i].centroid - objects[j].centroid).norm();
                table[i * n + j] = d;
                table[j * n + i] = d;
            }
        }
    }
    table
}

/// Builds the consistency graph. Vertex order follows `associations`.
pub fn build_graph(
    associations: &[Association],
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
    epsilon: f64,
) -> ConsistencyGraph {
    build_graph_with(associations, ref_map, veh_map, epsilon, true)
}

pub(crate) fn build_graph_with(
    associations: &[Association],
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
    epsilon: f64,
    parallel: bool,
) -> ConsistencyGraph {
    let n = associations.len();
    let (nr, nv) = (ref_map.len(), veh_map.len());
    let mut ref_used = vec![false; nr];
    let mut veh_used = vec![false; nv];
    for a in associations {
        ref_used[a.ref_index] = true;
        veh_used[a.veh_index] = true;
    }
    let dref = distance_table(ref_map.objects(), &ref_used);
    let dveh = distance_table(veh_map.objects(), &veh_used);
    let stride = n.div_ceil(64);

    // Upper triangle only; the lower half is mirrored afterwards.
    let row = |i: usize| {
        let a = associations[i];
        let mut bits = vec![0u64; stride];
        let ref_row = &dref[a.ref_index * nr..(a.ref_index + 1) * nr];
        let veh_row = &dveh[a.veh_index * nv..(a.veh_index + 1) * nv];
        for (j, b) in associations.iter().enumerate().skip(i + 1) {
            let consistent = (b.ref_index != a.ref_index)
                & (b.veh_index != a.veh_index)
                & ((ref_row[b.ref_index] - veh_row[b.veh_index]).abs() < epsilon);
            bits[j / 64] |= u64::from(consistent) << (j % 64);
        }
        bits
    };
    let mut rows: Vec<Vec<u64>> = if parallel {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    for i in 0..n {
        for w in (i + 1) / 64..stride {
            let mut word = rows[i][w];
            while word != 0 {
                let j = w * 64 + word.trailing_zeros() as usize;
                word &= word - 1;
                if j > i {
                    rows[j][i / 64] |= 1 << (i % 64);
                }
            }
        }
    }
    ConsistencyGraph {
        vertices: associations.to_vec(),
        adjacency: AdjacencyMatrix::from_rows(n, rows),
    }
}
