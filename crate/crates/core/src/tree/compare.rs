use super::{label_map, Result, Topology};

/// Robinson-Foulds distance: the number of nontrivial bipartitions present in
/// exactly one of the two topologies. Leaves are matched by label.
pub fn robinson_foulds(t1: &Topology, t2: &Topology) -> Result<usize> {
    let canon2 = label_map(t1, t2)?;
    let canon1: Vec<usize> = (0..t1.num_leaves()).collect();
    let s1 = t1.splits(&canon1);
    let s2 = t2.splits(&canon2);
    Ok(s1.symmetric_difference(&s2).count())
}
