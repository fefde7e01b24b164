//! Cyber-link availability via minimal path sets, and the mapping from
//! component states to element availabilities (the consequence table for
//! cyber failures).

use std::collections::{BTreeSet, HashMap};

use crate::casemodel::{CaseModel, CompId, ComponentKind, Controller, MgId, SwitchId};
use crate::Real;

/// Communication topology. Nodes are controller components (DMS, MGCCs, MCs,
/// LCs, CBCs); edges are cyber-link components. Minimal path sets are cached
/// per queried (source, target) pair.
#[derive(Debug, Clone)]
pub struct CyberGraph {
    /// node component ids, sorted for deterministic ordering
    nodes: Vec<CompId>,
    node_of: HashMap<CompId, usize>,
    /// (a, b, link component)
    edges: Vec<(usize, usize, CompId)>,
    adjacency: Vec<Vec<(usize, usize)>>, // node -> (edge idx, other node)
    cache: HashMap<(CompId, CompId), Vec<BTreeSet<CompId>>>,
}

#[derive(Debug, thiserror::Error)]
#[error("unknown cyber node component {0}")]
pub struct UnknownNode(pub CompId);

impl CyberGraph {
    pub fn new(mut node_comps: Vec<CompId>, edge_list: &[(CompId, CompId, CompId)]) -> Result<Self, UnknownNode> {
        node_comps.sort_unstable();
        node_comps.dedup();
        let node_of: HashMap<CompId, usize> =
            node_comps.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); node_comps.len()];
        for &(a, b, link) in edge_list {
            let &ia = node_of.get(&a).ok_or(UnknownNode(a))?;
            let &ib = node_of.get(&b).ok_or(UnknownNode(b))?;
            let e = edges.len();
            edges.push((ia, ib, link));
            adjacency[ia].push((e, ib));
            adjacency[ib].push((e, ia));
        }
        Ok(CyberGraph { nodes: node_comps, node_of, edges, adjacency, cache: HashMap::new() })
    }

    pub fn from_case(case: &CaseModel) -> Self {
        let mut nodes: Vec<CompId> = case
            .doc
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind.is_cyber() && c.kind != ComponentKind::CyberLink)
            .map(|(i, _)| i)
            .collect();
        nodes.sort_unstable();
        let edges: Vec<(CompId, CompId, CompId)> = case
            .doc
            .cyber_edges
            .iter()
            .map(|e| (case.comp_index[&e.a], case.comp_index[&e.b], case.comp_index[&e.link]))
            .collect();
        let mut g = Self::new(nodes, &edges).expect("case validation guarantees node refs");
        g.warm_cache(case);
        g
    }

    /// Precomputes every pair the simulator will query, so shared references
    /// stay immutable afterwards.
    fn warm_cache(&mut self, case: &CaseModel) {
        let dms = case.comp_index[&case.doc.substation.dms];
        let mut pairs: Vec<(CompId, CompId)> = Vec::new();
        for mg in &case.doc.microgrids {
            let mgcc = case.comp_index[&mg.mgcc];
            pairs.push((mgcc, dms));
            for der in [&mg.wind, &mg.pv].into_iter().flatten() {
                pairs.push((case.comp_index[&der.mc], mgcc));
            }
            for de in &mg.diesel {
                pairs.push((case.comp_index[&de.mc], mgcc));
            }
            if let Some(e) = &mg.ess {
                pairs.push((case.comp_index[&e.mc], mgcc));
            }
            for lp in &mg.load_points {
                pairs.push((case.comp_index[&lp.lc], mgcc));
            }
        }
        for sw in &case.switches {
            for ctl in &sw.controllers {
                let c = match ctl {
                    Controller::Dms => dms,
                    Controller::Mgcc(m) => case.comp_index[&case.doc.microgrids[*m].mgcc],
                };
                pairs.push((c, sw.cbc));
            }
        }
        for (a, b) in pairs {
            let _ = self.minimal_paths(a, b);
        }
    }

    pub fn contains(&self, comp: CompId) -> bool {
        self.node_of.contains_key(&comp)
    }

    /// Every link component incident to `comp`'s node.
    pub fn incident_links(&self, comp: CompId) -> impl Iterator<Item = CompId> + '_ {
        let n = self.node_of[&comp];
        self.adjacency[n].iter().map(move |&(e, _)| self.edges[e].2)
    }

    /// Enumerates the element sets of all simple paths between two nodes.
    /// Each set holds the node and link component ids along one route; the
    /// result is minimal (no set contains another) and ordered
    /// lexicographically by element id for reproducibility.
    pub fn minimal_paths(&mut self, src: CompId, dst: CompId) -> Result<&[BTreeSet<CompId>], UnknownNode> {
        if !self.node_of.contains_key(&src) {
            return Err(UnknownNode(src));
        }
        if !self.node_of.contains_key(&dst) {
            return Err(UnknownNode(dst));
        }
        if !self.cache.contains_key(&(src, dst)) {
            let paths = self.enumerate(src, dst);
            self.cache.insert((src, dst), paths);
        }
        Ok(&self.cache[&(src, dst)])
    }

    /// Cached variant for immutable access after [`CyberGraph::from_case`].
    pub fn cached_paths(&self, src: CompId, dst: CompId) -> &[BTreeSet<CompId>] {
        self.cache
            .get(&(src, dst))
            .map(|v| v.as_slice())
            .unwrap_or_else(|| panic!("path pair not precomputed"))
    }

    fn enumerate(&self, src: CompId, dst: CompId) -> Vec<BTreeSet<CompId>> {
        let s = self.node_of[&src];
        let d = self.node_of[&dst];
        if s == d {
            return vec![BTreeSet::from([src])];
        }
        let mut found: Vec<BTreeSet<CompId>> = Vec::new();
        let mut on_path = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = vec![s];
        on_path[s] = true;
        let mut edge_stack = Vec::new();
        self.dfs(s, d, &mut on_path, &mut stack, &mut edge_stack, &mut found);
        // Drop supersets; distinct simple paths can cover the same element
        // set only if identical, so plain pairwise minimality suffices.
        let mut minimal: Vec<BTreeSet<CompId>> = Vec::new();
        for set in &found {
            if !found.iter().any(|o| o != set && o.is_subset(set)) && !minimal.contains(set) {
                minimal.push(set.clone());
            }
        }
        minimal.sort_by(|a, b| a.iter().collect::<Vec<_>>().cmp(&b.iter().collect::<Vec<_>>()));
        minimal
    }

    fn dfs(
        &self,
        node: usize,
        d: usize,
        on_path: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        edge_stack: &mut Vec<usize>,
        found: &mut Vec<BTreeSet<CompId>>,
    ) {
        for &(e, other) in &self.adjacency[node] {
            if on_path[other] {
                continue;
            }
            edge_stack.push(e);
            if other == d {
                let mut set: BTreeSet<CompId> = stack.iter().map(|&n| self.nodes[n]).collect();
                set.insert(self.nodes[d]);
                set.extend(edge_stack.iter().map(|&e| self.edges[e].2));
                found.push(set);
            } else {
                on_path[other] = true;
                stack.push(other);
                self.dfs(other, d, on_path, stack, edge_stack, found);
                stack.pop();
                on_path[other] = false;
            }
            edge_stack.pop();
        }
    }
}

/// Structure function over minimal path sets: the link is available iff some
/// path set has all its elements up.
pub fn link_available(paths: &[BTreeSet<CompId>], up: impl Fn(CompId) -> bool) -> bool {
    paths.iter().any(|set| set.iter().all(|&c| up(c)))
}

/// Per-hour 0/1 availabilities after applying the cyber consequence mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityFrame {
    pub hour: u64,
    pub upstream_up: bool,
    pub dms_up: bool,
    pub dms_upstream_link_up: bool,
    /// per microgrid
    pub mgcc_up: Vec<bool>,
    pub mgcc_isolated: Vec<bool>,
    pub mgcc_dms_link: Vec<bool>,
    /// φ per DER; diesel indexed per unit
    pub wind_avail: Vec<Real>,
    pub pv_avail: Vec<Real>,
    pub diesel_avail: Vec<Vec<Real>>,
    pub ess_avail: Vec<Real>,
    /// per (mg, load point)
    pub transformer_up: Vec<Vec<bool>>,
    pub lc_avail: Vec<Vec<bool>>,
    /// per switch installation
    pub switch_accessible: Vec<bool>,
    pub switch_closed_ok: Vec<bool>,
}

impl AvailabilityFrame {
    /// Shutdown applies when the MGCC is down or every cyber link to/from it
    /// has failed.
    pub fn mg_shutdown(&self, m: MgId) -> bool {
        !self.mgcc_up[m] || self.mgcc_isolated[m]
    }

    pub fn all_clear(&self) -> bool {
        self.upstream_up
            && self.dms_up
            && self.dms_upstream_link_up
            && self.mgcc_up.iter().all(|&b| b)
            && self.mgcc_dms_link.iter().all(|&b| b)
            && self.transformer_up.iter().flatten().all(|&b| b)
    }
}

/// Behaviour toggles applied while deriving frames (scenario studies).
#[derive(Debug, Clone, Copy, Default)]
pub struct FrameOptions {
    /// Treat DMS/MGCC failures as covered by distributed control whenever the
    /// remaining controllers required for it are up.
    pub distributed_control: bool,
    /// Disable indirect impacts: switch mis-operation and LC failures.
    pub ablate_indirect: bool,
}

/// Availability of a registered switch: its CBC must be up and at least one
/// associated controller must be up with an available cyber route to the CBC.
pub fn switch_accessible(
    case: &CaseModel,
    cyber: &CyberGraph,
    sw: SwitchId,
    up: &dyn Fn(CompId) -> bool,
    opts: FrameOptions,
) -> bool {
    let inst = &case.switches[sw];
    if !up(inst.switch) {
        return false; // physically failed switches cannot operate
    }
    if opts.ablate_indirect {
        return true;
    }
    if !up(inst.cbc) {
        return false;
    }
    let dms = case.comp_index[&case.doc.substation.dms];
    inst.controllers.iter().any(|ctl| {
        let node = match ctl {
            Controller::Dms => dms,
            Controller::Mgcc(m) => case.comp_index[&case.doc.microgrids[*m].mgcc],
        };
        up(node) && link_available(cyber.cached_paths(node, inst.cbc), up)
    })
}

/// Derives the availability frame for one contingency state. `failed` is the
/// component failed-set; `hour` tags the frame with the window start.
pub fn availability_frame(
    case: &CaseModel,
    cyber: &CyberGraph,
    failed: &[bool],
    hour: u64,
    opts: FrameOptions,
) -> AvailabilityFrame {
    let raw_up = |c: CompId| !failed[c];
    let dms = case.comp_index[&case.doc.substation.dms];
    let upstream = case.comp_index[&case.doc.substation.upstream];

    // Distributed control substitutes for failed main controllers when the
    // controllers beneath them are all up.
    let dms_covered = opts.distributed_control
        && case.doc.microgrids.iter().all(|mg| raw_up(case.comp_index[&mg.mgcc]));
    let mgcc_covered: Vec<bool> = case
        .doc
        .microgrids
        .iter()
        .map(|mg| {
            opts.distributed_control && {
                let ders = [&mg.wind, &mg.pv]
                    .into_iter()
                    .flatten()
                    .map(|d| case.comp_index[&d.mc])
                    .chain(mg.diesel.iter().map(|d| case.comp_index[&d.mc]))
                    .chain(mg.ess.iter().map(|e| case.comp_index[&e.mc]));
                let lcs = mg.load_points.iter().map(|lp| case.comp_index[&lp.lc]);
                ders.chain(lcs).all(raw_up)
            }
        })
        .collect();

    // Effective up-predicate used downstream, including path evaluation
    // through a virtually covered controller node.
    let up = |c: CompId| -> bool {
        if raw_up(c) {
            return true;
        }
        if c == dms {
            return dms_covered;
        }
        for (m, mg) in case.doc.microgrids.iter().enumerate() {
            if case.comp_index[&mg.mgcc] == c {
                return mgcc_covered[m];
            }
        }
        false
    };

    let m_count = case.num_microgrids();
    let mut frame = AvailabilityFrame {
        hour,
        upstream_up: up(upstream),
        dms_up: up(dms),
        dms_upstream_link_up: case
            .doc
            .substation
            .dms_upstream_link
            .as_ref()
            .map(|l| up(case.comp_index[l]))
            .unwrap_or(true),
        mgcc_up: Vec::with_capacity(m_count),
        mgcc_isolated: Vec::with_capacity(m_count),
        mgcc_dms_link: Vec::with_capacity(m_count),
        wind_avail: Vec::with_capacity(m_count),
        pv_avail: Vec::with_capacity(m_count),
        diesel_avail: Vec::with_capacity(m_count),
        ess_avail: Vec::with_capacity(m_count),
        transformer_up: Vec::with_capacity(m_count),
        lc_avail: Vec::with_capacity(m_count),
        switch_accessible: Vec::with_capacity(case.switches.len()),
        switch_closed_ok: Vec::with_capacity(case.switches.len()),
    };

    for mg in &case.doc.microgrids {
        let mgcc = case.comp_index[&mg.mgcc];
        let mgcc_up = up(mgcc);
        frame.mgcc_up.push(mgcc_up);
        frame
            .mgcc_isolated
            .push(cyber.contains(mgcc) && cyber.incident_links(mgcc).all(|l| !up(l)));
        frame.mgcc_dms_link.push(link_available(cyber.cached_paths(mgcc, dms), up));

        // φ = physical availability · controller · controller link
        let unit_phi = |phys_id: &str, mc_id: &str| -> Real {
            let phys = up(case.comp_index[phys_id]);
            let mc = case.comp_index[mc_id];
            let linked = link_available(cyber.cached_paths(mc, mgcc), up);
            if phys && up(mc) && linked {
                1.0
            } else {
                0.0
            }
        };
        frame
            .wind_avail
            .push(mg.wind.as_ref().map(|d| unit_phi(&d.component, &d.mc)).unwrap_or(0.0));
        frame
            .pv_avail
            .push(mg.pv.as_ref().map(|d| unit_phi(&d.component, &d.mc)).unwrap_or(0.0));
        frame
            .diesel_avail
            .push(mg.diesel.iter().map(|de| unit_phi(&de.component, &de.mc)).collect());
        frame
            .ess_avail
            .push(mg.ess.as_ref().map(|e| unit_phi(&e.component, &e.mc)).unwrap_or(0.0));
        frame.transformer_up.push(
            mg.load_points.iter().map(|lp| up(case.comp_index[&lp.transformer])).collect(),
        );
        frame.lc_avail.push(
            mg.load_points
                .iter()
                .map(|lp| {
                    if opts.ablate_indirect {
                        return true;
                    }
                    let lc = case.comp_index[&lp.lc];
                    up(lc) && link_available(cyber.cached_paths(lc, mgcc), up)
                })
                .collect(),
        );
    }

    for sw in 0..case.switches.len() {
        frame.switch_accessible.push(switch_accessible(case, cyber, sw, &up, opts));
        frame.switch_closed_ok.push(up(case.switches[sw].switch));
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> CyberGraph {
        // nodes 0=A,1=B,2=C; links 10=e_AB, 11=e_BC, 12=e_AC
        CyberGraph::new(vec![0, 1, 2], &[(0, 1, 10), (1, 2, 11), (0, 2, 12)]).unwrap()
    }

    #[test]
    fn triangle_has_two_minimal_paths() {
        let mut g = triangle();
        let paths = g.minimal_paths(0, 2).unwrap();
        let expect: Vec<BTreeSet<usize>> =
            vec![BTreeSet::from([0, 1, 2, 10, 11]), BTreeSet::from([0, 2, 12])];
        assert_eq!(paths, expect.as_slice());
    }

    #[test]
    fn source_equals_target_is_singleton() {
        let mut g = triangle();
        assert_eq!(g.minimal_paths(1, 1).unwrap(), &[BTreeSet::from([1])]);
    }

    #[test]
    fn unknown_node_is_an_error() {
        let mut g = triangle();
        assert!(g.minimal_paths(0, 99).is_err());
    }

    #[test]
    fn all_up_available_and_shared_cut_fails() {
        let mut g = triangle();
        let paths = g.minimal_paths(0, 2).unwrap().to_vec();
        assert!(link_available(&paths, |_| true));
        // both routes end at node 2
        assert!(!link_available(&paths, |c| c != 2));
        // cutting one link keeps the other route
        assert!(link_available(&paths, |c| c != 12));
    }

    /// Oracle: breadth-first reachability over the surviving subgraph.
    fn reachable(
        edges: &[(usize, usize, usize)],
        up: &dyn Fn(usize) -> bool,
        s: usize,
        d: usize,
    ) -> bool {
        if !up(s) || !up(d) {
            return false;
        }
        let mut seen = std::collections::HashSet::from([s]);
        let mut queue = vec![s];
        while let Some(n) = queue.pop() {
            if n == d {
                return true;
            }
            for &(a, b, l) in edges {
                if !up(l) {
                    continue;
                }
                let next = if a == n {
                    b
                } else if b == n {
                    a
                } else {
                    continue;
                };
                if up(next) && seen.insert(next) {
                    queue.push(next);
                }
            }
        }
        false
    }

    #[test]
    fn random_graphs_match_reachability_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let n = rng.gen_range(3..=8);
            let nodes: Vec<usize> = (0..n).collect();
            let mut edges = Vec::new();
            let mut lid = 100;
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.gen_bool(0.45) {
                        edges.push((a, b, lid));
                        lid += 1;
                    }
                }
            }
            let mut g = CyberGraph::new(nodes.clone(), &edges).unwrap();
            let src = rng.gen_range(0..n);
            let dst = rng.gen_range(0..n);
            let paths = g.minimal_paths(src, dst).unwrap().to_vec();

            for _ in 0..25 {
                let mut down = std::collections::HashSet::new();
                for &node in &nodes {
                    if rng.gen_bool(0.25) {
                        down.insert(node);
                    }
                }
                for &(_, _, l) in &edges {
                    if rng.gen_bool(0.25) {
                        down.insert(l);
                    }
                }
                let up = |c: usize| !down.contains(&c);
                assert_eq!(
                    link_available(&paths, up),
                    reachable(&edges, &up, src, dst),
                    "src {src} dst {dst} down {down:?}"
                );
            }

            for a in &paths {
                for b in &paths {
                    assert!(a == b || !a.is_subset(b));
                }
            }

            // monotonicity: repairing a component never breaks the link
            let mut down: Vec<usize> = nodes
                .iter()
                .copied()
                .chain(edges.iter().map(|e| e.2))
                .filter(|_| rng.gen_bool(0.4))
                .collect();
            let before = link_available(&paths, |c| !down.contains(&c));
            if let Some(fixed) = down.pop() {
                let after = link_available(&paths, |c| !down.contains(&c));
                assert!(!before || after, "repairing {fixed} broke the link");
            }
        }
    }
}
