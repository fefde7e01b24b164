//! System description: components, microgrids, network topology, load
//! segments, cyber edges and exogenous series configuration.
//!
//! A case is a single JSON document (see `cases/rbts6f4.json` for the bundled
//! example). [`parse_case`] loads and fully links it; every cross-reference
//! and structural invariant is checked at that point so the rest of the
//! simulator can index without re-validation.

mod series;

pub use series::{build_series, ExogenousSeries, SeriesConfig};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

use crate::Real;

pub type CompId = usize;
pub type MgId = usize;

#[derive(Error, Debug)]
pub enum CaseError {
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("case parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate component id {0:?}")]
    DuplicateId(String),
    #[error("component {id:?} referenced by {context} is not defined")]
    DanglingRef { id: String, context: String },
    #[error("component {id:?} referenced by {context} has kind {actual:?}, expected {expected:?}")]
    KindMismatch { id: String, context: String, actual: ComponentKind, expected: ComponentKind },
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("series error: {0}")]
    Series(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Line,
    Transformer,
    Busbar,
    Switch,
    PhysicalDer,
    PhysicalEss,
    Dms,
    Mgcc,
    Mc,
    Lc,
    Cbc,
    CyberLink,
    Upstream,
}

impl ComponentKind {
    pub fn is_cyber(self) -> bool {
        matches!(
            self,
            ComponentKind::Dms
                | ComponentKind::Mgcc
                | ComponentKind::Mc
                | ComponentKind::Lc
                | ComponentKind::Cbc
                | ComponentKind::CyberLink
        )
    }
}

/// Two-state repairable component with exponential up/down times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    pub kind: ComponentKind,
    /// occurrences/year
    pub failure_rate: Real,
    /// repairs/year
    pub repair_rate: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRef {
    pub switch: String,
    pub cbc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationDoc {
    pub capacity_mw: Real,
    pub dms: String,
    pub upstream: String,
    #[serde(default)]
    pub dms_upstream_link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneDoc {
    /// Feeder span energising this zone; its failure is a fault here.
    pub feed_line: String,
    /// Internal protection switch at the zone's upstream boundary.
    #[serde(default)]
    pub feed_switch: Option<SwitchRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerDoc {
    pub component: String,
    pub mc: String,
    pub capacity_mw: Real,
    #[serde(default)]
    pub zone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DieselDoc {
    pub component: String,
    pub mc: String,
    pub max_output_mw: Real,
    /// $/MWh
    pub fuel_cost: Real,
    /// $/MWh
    pub emission_cost: Real,
    #[serde(default)]
    pub zone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssDoc {
    pub component: String,
    pub mc: String,
    pub max_charge_mw: Real,
    pub max_discharge_mw: Real,
    pub charge_eff: Real,
    pub discharge_eff: Real,
    pub soc_min_mwh: Real,
    pub soc_max_mwh: Real,
    /// SOC at the start of every scheduling day.
    pub soc_init_mwh: Real,
    /// $/MWh
    pub charge_cost: Real,
    /// $/MWh
    pub discharge_cost: Real,
    #[serde(default)]
    pub zone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    /// share of the load point's demand, in (0, 1]
    pub proportion: Real,
    /// interruption cost, $/MWh
    pub cost: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPointDoc {
    pub id: String,
    pub bus: usize,
    #[serde(default)]
    pub zone: usize,
    pub peak_mw: Real,
    pub segments: Vec<SegmentDoc>,
    pub transformer: String,
    pub lc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrogridDoc {
    pub tag: usize,
    pub mgcc: String,
    pub zones: Vec<ZoneDoc>,
    #[serde(default)]
    pub wind: Option<DerDoc>,
    #[serde(default)]
    pub pv: Option<DerDoc>,
    #[serde(default)]
    pub diesel: Vec<DieselDoc>,
    #[serde(default)]
    pub ess: Option<EssDoc>,
    pub load_points: Vec<LoadPointDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LineEnd {
    Mg(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDoc {
    pub from: LineEnd,
    /// receiving microgrid tag
    pub to: usize,
    pub capacity_mw: Real,
    pub line: String,
    pub poi: SwitchRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackupDoc {
    /// microgrid tag the tie bus belongs to
    pub mg: usize,
    #[serde(default)]
    pub zone: usize,
    pub capacity_mw: Real,
    pub switch: SwitchRef,
    #[serde(default)]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyberEdgeDoc {
    pub a: String,
    pub b: String,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultsDoc {
    /// service/transmission price on joint-operation purchases, $/MWh
    pub lambda_ser: Real,
    /// expensive-energy threshold for SbER, $/MWh
    pub lambda_thr: Real,
    /// SOC-hold multiplier; None means the mean energy price is used
    #[serde(default)]
    pub lambda_ess: Option<Real>,
}

impl Default for DefaultsDoc {
    fn default() -> Self {
        DefaultsDoc { lambda_ser: 0.5, lambda_thr: 2.0, lambda_ess: None }
    }
}

/// The raw case document as serialized on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDoc {
    pub name: String,
    pub components: Vec<ComponentSpec>,
    pub substation: SubstationDoc,
    pub microgrids: Vec<MicrogridDoc>,
    pub lines: Vec<LineDoc>,
    #[serde(default)]
    pub backup: Option<BackupDoc>,
    #[serde(default)]
    pub cyber_edges: Vec<CyberEdgeDoc>,
    pub series: SeriesConfig,
    #[serde(default)]
    pub defaults: DefaultsDoc,
}

/// Aggregated microgrid load segments: unique interruption costs in
/// ascending order; `contributions[r]` lists `(load point index, proportion)`
/// pairs feeding segment `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCatalog {
    pub costs: Vec<Real>,
    pub contributions: Vec<Vec<(usize, Real)>>,
}

impl SegmentCatalog {
    pub fn num_segments(&self) -> usize {
        self.costs.len()
    }
}

/// Controllers able to command a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    Dms,
    Mgcc(MgId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchInstall {
    pub switch: CompId,
    pub cbc: CompId,
    pub controllers: Vec<Controller>,
    /// normally-open tie switches conduct only when actively closed
    pub normally_open: bool,
}

pub type SwitchId = usize;

/// Node of the physical bus graph: the substation or one zone of a microgrid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhysNode {
    Substation,
    Zone(MgId, usize),
    /// virtual node behind the normally-open backup tie
    Backup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysEdge {
    pub a: usize,
    pub b: usize,
    /// line component whose failure is a fault on this edge (None for the tie)
    pub line: Option<CompId>,
    pub switch: Option<SwitchId>,
    /// Some(line index) for inter-microgrid lines carrying a flow limit
    pub inter: Option<usize>,
}

/// Physical connectivity graph used for fault isolation and zoning.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhysTopo {
    pub nodes: Vec<PhysNode>,
    pub edges: Vec<PhysEdge>,
    pub node_index: HashMap<PhysNode, usize>,
    pub adjacency: Vec<Vec<usize>>, // node -> incident edge ids
}

impl PhysTopo {
    pub fn node(&self, n: PhysNode) -> usize {
        self.node_index[&n]
    }
}

/// Fully linked, validated case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseModel {
    pub doc: CaseDoc,
    pub comp_index: HashMap<String, CompId>,
    /// microgrid tag -> index into doc.microgrids
    pub mg_index: HashMap<usize, MgId>,
    pub catalogs: Vec<SegmentCatalog>,
    pub switches: Vec<SwitchInstall>,
    pub topo: PhysTopo,
    /// per line (doc order): microgrid indices strictly downstream of it
    pub line_subtree: Vec<Vec<MgId>>,
    /// feed line (doc index) of each microgrid
    pub feed_line_of: Vec<usize>,
    /// registry ids, populated when present
    pub backup_switch: Option<SwitchId>,
    pub poi_switch_of_line: Vec<SwitchId>,
    pub internal_switch_of: Vec<Vec<Option<SwitchId>>>,
}

impl serde::Serialize for CaseModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.doc.serialize(s)
    }
}

pub fn parse_case(path: impl AsRef<Path>) -> Result<CaseModel, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
    CaseModel::from_json(&text)
}

impl CaseModel {
    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let doc: CaseDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("case serializes")
    }

    pub fn num_components(&self) -> usize {
        self.doc.components.len()
    }

    pub fn num_microgrids(&self) -> usize {
        self.doc.microgrids.len()
    }

    pub fn component(&self, id: CompId) -> &ComponentSpec {
        &self.doc.components[id]
    }

    pub fn microgrid(&self, m: MgId) -> &MicrogridDoc {
        &self.doc.microgrids[m]
    }

    pub fn from_doc(doc: CaseDoc) -> Result<Self, CaseError> {
        let mut comp_index = HashMap::new();
        for (i, c) in doc.components.iter().enumerate() {
            if comp_index.insert(c.id.clone(), i).is_some() {
                return Err(CaseError::DuplicateId(c.id.clone()));
            }
            if c.failure_rate < 0.0 {
                return Err(CaseError::Invalid(format!(
                    "component {:?}: failure_rate must be >= 0",
                    c.id
                )));
            }
            if c.failure_rate > 0.0 && c.repair_rate <= 0.0 {
                return Err(CaseError::Invalid(format!(
                    "component {:?}: repair_rate must be > 0 when failure_rate > 0",
                    c.id
                )));
            }
        }

        let resolve = |id: &str, context: &str, expected: ComponentKind| -> Result<CompId, CaseError> {
            let &idx = comp_index.get(id).ok_or_else(|| CaseError::DanglingRef {
                id: id.to_string(),
                context: context.to_string(),
            })?;
            let actual = doc.components[idx].kind;
            if actual != expected {
                return Err(CaseError::KindMismatch {
                    id: id.to_string(),
                    context: context.to_string(),
                    actual,
                    expected,
                });
            }
            Ok(idx)
        };

        resolve(&doc.substation.dms, "substation.dms", ComponentKind::Dms)?;
        resolve(&doc.substation.upstream, "substation.upstream", ComponentKind::Upstream)?;
        if let Some(l) = &doc.substation.dms_upstream_link {
            resolve(l, "substation.dms_upstream_link", ComponentKind::CyberLink)?;
        }

        let mut mg_index = HashMap::new();
        for (m, mg) in doc.microgrids.iter().enumerate() {
            if mg_index.insert(mg.tag, m).is_some() {
                return Err(CaseError::Invalid(format!("duplicate microgrid tag {}", mg.tag)));
            }
            if mg.zones.is_empty() {
                return Err(CaseError::Invalid(format!("microgrid {} has no zones", mg.tag)));
            }
        }

        let mut catalogs = Vec::with_capacity(doc.microgrids.len());
        for mg in &doc.microgrids {
            let ctx = format!("microgrid {}", mg.tag);
            let mgcc_ctx = format!("{ctx}.mgcc");
            resolve(&mg.mgcc, &mgcc_ctx, ComponentKind::Mgcc)?;
            for (z, zone) in mg.zones.iter().enumerate() {
                resolve(&zone.feed_line, &format!("{ctx}.zones[{z}].feed_line"), ComponentKind::Line)?;
                if let Some(sw) = &zone.feed_switch {
                    if z == 0 {
                        return Err(CaseError::Invalid(format!(
                            "{ctx}: zone 0 is fed by the POI, it cannot carry an internal switch"
                        )));
                    }
                    resolve(&sw.switch, &format!("{ctx}.zones[{z}].feed_switch"), ComponentKind::Switch)?;
                    resolve(&sw.cbc, &format!("{ctx}.zones[{z}].feed_switch.cbc"), ComponentKind::Cbc)?;
                }
            }
            let check_zone = |zone: usize, what: &str| -> Result<(), CaseError> {
                if zone >= mg.zones.len() {
                    return Err(CaseError::Invalid(format!(
                        "{ctx}: {what} placed in unknown zone {zone}"
                    )));
                }
                Ok(())
            };
            if let Some(w) = &mg.wind {
                resolve(&w.component, &format!("{ctx}.wind"), ComponentKind::PhysicalDer)?;
                resolve(&w.mc, &format!("{ctx}.wind.mc"), ComponentKind::Mc)?;
                check_zone(w.zone, "wind unit")?;
            }
            if let Some(p) = &mg.pv {
                resolve(&p.component, &format!("{ctx}.pv"), ComponentKind::PhysicalDer)?;
                resolve(&p.mc, &format!("{ctx}.pv.mc"), ComponentKind::Mc)?;
                check_zone(p.zone, "pv unit")?;
            }
            for (d, de) in mg.diesel.iter().enumerate() {
                resolve(&de.component, &format!("{ctx}.diesel[{d}]"), ComponentKind::PhysicalDer)?;
                resolve(&de.mc, &format!("{ctx}.diesel[{d}].mc"), ComponentKind::Mc)?;
                check_zone(de.zone, "diesel unit")?;
                if de.max_output_mw <= 0.0 {
                    return Err(CaseError::Invalid(format!(
                        "{ctx}.diesel[{d}]: max_output_mw must be > 0"
                    )));
                }
            }
            if let Some(e) = &mg.ess {
                resolve(&e.component, &format!("{ctx}.ess"), ComponentKind::PhysicalEss)?;
                resolve(&e.mc, &format!("{ctx}.ess.mc"), ComponentKind::Mc)?;
                check_zone(e.zone, "ess")?;
                if !(0.0 <= e.soc_min_mwh && e.soc_min_mwh <= e.soc_max_mwh) {
                    return Err(CaseError::Invalid(format!(
                        "{ctx}.ess: need 0 <= soc_min <= soc_max"
                    )));
                }
                if !(e.soc_min_mwh <= e.soc_init_mwh && e.soc_init_mwh <= e.soc_max_mwh) {
                    return Err(CaseError::Invalid(format!("{ctx}.ess: soc_init out of range")));
                }
                if e.max_charge_mw < 0.0 || e.max_discharge_mw < 0.0 {
                    return Err(CaseError::Invalid(format!("{ctx}.ess: rates must be >= 0")));
                }
                for (eff, name) in [(e.charge_eff, "charge_eff"), (e.discharge_eff, "discharge_eff")] {
                    if !(eff > 0.0 && eff <= 1.0) {
                        return Err(CaseError::Invalid(format!("{ctx}.ess: {name} must be in (0,1]")));
                    }
                }
            }
            for lp in &mg.load_points {
                let lp_ctx = format!("{ctx}.load_points[{}]", lp.id);
                resolve(&lp.transformer, &format!("{lp_ctx}.transformer"), ComponentKind::Transformer)?;
                resolve(&lp.lc, &format!("{lp_ctx}.lc"), ComponentKind::Lc)?;
                check_zone(lp.zone, &format!("load point {}", lp.id))?;
                if lp.peak_mw < 0.0 {
                    return Err(CaseError::Invalid(format!("{lp_ctx}: peak_mw must be >= 0")));
                }
                if lp.segments.is_empty() {
                    return Err(CaseError::Invalid(format!("{lp_ctx}: needs at least one segment")));
                }
                let mut total = 0.0;
                for s in &lp.segments {
                    if !(s.proportion > 0.0 && s.proportion <= 1.0) {
                        return Err(CaseError::Invalid(format!(
                            "{lp_ctx}: segment proportion must be in (0,1]"
                        )));
                    }
                    if s.cost < 0.0 {
                        return Err(CaseError::Invalid(format!("{lp_ctx}: segment cost must be >= 0")));
                    }
                    total += s.proportion;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(CaseError::Invalid(format!(
                        "{lp_ctx}: segment proportions sum to {total}, expected 1"
                    )));
                }
            }
            catalogs.push(aggregate_segments(mg));
        }

        // Lines must form a tree rooted at the substation.
        let mut feed_line_of = vec![usize::MAX; doc.microgrids.len()];
        for (li, line) in doc.lines.iter().enumerate() {
            let ctx = format!("lines[{li}]");
            resolve(&line.line, &format!("{ctx}.line"), ComponentKind::Line)?;
            resolve(&line.poi.switch, &format!("{ctx}.poi"), ComponentKind::Switch)?;
            resolve(&line.poi.cbc, &format!("{ctx}.poi.cbc"), ComponentKind::Cbc)?;
            let &to = mg_index.get(&line.to).ok_or_else(|| CaseError::DanglingRef {
                id: format!("microgrid tag {}", line.to),
                context: ctx.clone(),
            })?;
            match &line.from {
                LineEnd::Named(s) if s == "substation" => {}
                LineEnd::Named(s) => {
                    return Err(CaseError::Invalid(format!(
                        "{ctx}: from must be a microgrid tag or \"substation\", got {s:?}"
                    )));
                }
                LineEnd::Mg(tag) => {
                    if !mg_index.contains_key(tag) {
                        return Err(CaseError::DanglingRef {
                            id: format!("microgrid tag {tag}"),
                            context: ctx.clone(),
                        });
                    }
                    if *tag == line.to {
                        return Err(CaseError::Invalid(format!("{ctx}: self-loop")));
                    }
                }
            }
            if feed_line_of[to] != usize::MAX {
                return Err(CaseError::Invalid(format!(
                    "microgrid {} has more than one feed line (non-radial)",
                    line.to
                )));
            }
            feed_line_of[to] = li;
        }
        for (m, &f) in feed_line_of.iter().enumerate() {
            if f == usize::MAX {
                return Err(CaseError::Invalid(format!(
                    "microgrid {} is not connected by any line (non-radial)",
                    doc.microgrids[m].tag
                )));
            }
        }
        // Reachability from the substation (cycle check falls out of the
        // single-feed property plus reachability).
        let mut order = Vec::new();
        let mut visited = vec![false; doc.microgrids.len()];
        let mut stack: Vec<Option<MgId>> = vec![None]; // None = substation
        while let Some(node) = stack.pop() {
            for (li, line) in doc.lines.iter().enumerate() {
                let from_matches = match (&line.from, node) {
                    (LineEnd::Named(_), None) => true,
                    (LineEnd::Mg(tag), Some(m)) => mg_index[tag] == m,
                    _ => false,
                };
                if from_matches {
                    let to = mg_index[&line.to];
                    if !visited[to] {
                        visited[to] = true;
                        order.push(li);
                        stack.push(Some(to));
                    }
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(CaseError::Invalid(
                "line graph is not a tree rooted at the substation".into(),
            ));
        }

        // Subtree membership per line, for the flow recursion.
        let mut line_subtree: Vec<Vec<MgId>> = vec![Vec::new(); doc.lines.len()];
        for (li, line) in doc.lines.iter().enumerate() {
            let mut members = vec![mg_index[&line.to]];
            let mut i = 0;
            while i < members.len() {
                let m = members[i];
                for l2 in &doc.lines {
                    if let LineEnd::Mg(tag) = &l2.from {
                        if mg_index[tag] == m {
                            members.push(mg_index[&l2.to]);
                        }
                    }
                }
                i += 1;
            }
            members.sort_unstable();
            line_subtree[li] = members;
        }

        if let Some(b) = &doc.backup {
            let &m = mg_index.get(&b.mg).ok_or_else(|| CaseError::DanglingRef {
                id: format!("microgrid tag {}", b.mg),
                context: "backup.mg".into(),
            })?;
            if b.zone >= doc.microgrids[m].zones.len() {
                return Err(CaseError::Invalid("backup.zone out of range".into()));
            }
            resolve(&b.switch.switch, "backup.switch", ComponentKind::Switch)?;
            resolve(&b.switch.cbc, "backup.switch.cbc", ComponentKind::Cbc)?;
        }

        for (i, e) in doc.cyber_edges.iter().enumerate() {
            let ctx = format!("cyber_edges[{i}]");
            resolve(&e.link, &format!("{ctx}.link"), ComponentKind::CyberLink)?;
            for node in [&e.a, &e.b] {
                let &idx = comp_index.get(node.as_str()).ok_or_else(|| CaseError::DanglingRef {
                    id: node.clone(),
                    context: ctx.clone(),
                })?;
                if doc.components[idx].kind == ComponentKind::CyberLink {
                    return Err(CaseError::Invalid(format!(
                        "{ctx}: endpoint {node:?} is a cyber link, expected a controller node"
                    )));
                }
            }
        }

        // Switch registry and physical bus graph.
        let mut switches = Vec::new();
        let register =
            |sw: &SwitchRef, controllers: Vec<Controller>, normally_open: bool, switches: &mut Vec<SwitchInstall>| {
                switches.push(SwitchInstall {
                    switch: comp_index[&sw.switch],
                    cbc: comp_index[&sw.cbc],
                    controllers,
                    normally_open,
                });
                switches.len() - 1
            };

        let mut poi_switch_of_line = Vec::with_capacity(doc.lines.len());
        for line in &doc.lines {
            let mut ctl = vec![Controller::Dms];
            if let LineEnd::Mg(tag) = &line.from {
                ctl.push(Controller::Mgcc(mg_index[tag]));
            }
            ctl.push(Controller::Mgcc(mg_index[&line.to]));
            poi_switch_of_line.push(register(&line.poi, ctl, false, &mut switches));
        }
        let mut internal_switch_of: Vec<Vec<Option<SwitchId>>> = Vec::new();
        for (m, mg) in doc.microgrids.iter().enumerate() {
            let mut per_zone = vec![None; mg.zones.len()];
            for (z, zone) in mg.zones.iter().enumerate() {
                if let Some(sw) = &zone.feed_switch {
                    per_zone[z] = Some(register(sw, vec![Controller::Mgcc(m)], false, &mut switches));
                }
            }
            internal_switch_of.push(per_zone);
        }
        let backup_switch = doc.backup.as_ref().map(|b| {
            let m = mg_index[&b.mg];
            register(&b.switch, vec![Controller::Dms, Controller::Mgcc(m)], true, &mut switches)
        });

        let mut topo = PhysTopo::default();
        let add_node = |n: PhysNode, topo: &mut PhysTopo| -> usize {
            let id = topo.nodes.len();
            topo.nodes.push(n);
            topo.node_index.insert(n, id);
            topo.adjacency.push(Vec::new());
            id
        };
        add_node(PhysNode::Substation, &mut topo);
        for (m, mg) in doc.microgrids.iter().enumerate() {
            for z in 0..mg.zones.len() {
                add_node(PhysNode::Zone(m, z), &mut topo);
            }
        }
        let add_edge = |a: usize, b: usize, line: Option<CompId>, switch: Option<SwitchId>, inter: Option<usize>, topo: &mut PhysTopo| {
            let id = topo.edges.len();
            topo.edges.push(PhysEdge { a, b, line, switch, inter });
            topo.adjacency[a].push(id);
            topo.adjacency[b].push(id);
        };
        // inter-microgrid lines: from the sending end's last zone (or the
        // substation) into zone 0 of the receiving microgrid.
        for (li, line) in doc.lines.iter().enumerate() {
            let to = mg_index[&line.to];
            let a = match &line.from {
                LineEnd::Named(_) => topo.node(PhysNode::Substation),
                LineEnd::Mg(tag) => {
                    let m = mg_index[tag];
                    topo.node(PhysNode::Zone(m, doc.microgrids[m].zones.len() - 1))
                }
            };
            let b = topo.node(PhysNode::Zone(to, 0));
            // Zone 0 is energised through the POI line itself, so the two
            // references must name the same component.
            if doc.microgrids[to].zones[0].feed_line != line.line {
                return Err(CaseError::Invalid(format!(
                    "microgrid {}: zones[0].feed_line must equal its feeding line {:?}",
                    line.to, line.line
                )));
            }
            add_edge(a, b, Some(comp_index[&line.line]), Some(poi_switch_of_line[li]), Some(li), &mut topo);
        }
        // internal zone chain edges
        for (m, mg) in doc.microgrids.iter().enumerate() {
            for z in 1..mg.zones.len() {
                let a = topo.node(PhysNode::Zone(m, z - 1));
                let b = topo.node(PhysNode::Zone(m, z));
                add_edge(
                    a,
                    b,
                    Some(comp_index[&mg.zones[z].feed_line]),
                    internal_switch_of[m][z],
                    None,
                    &mut topo,
                );
            }
        }
        if let Some(b) = &doc.backup {
            let m = mg_index[&b.mg];
            let anchor = topo.node(PhysNode::Zone(m, b.zone));
            let bk = add_node(PhysNode::Backup, &mut topo);
            add_edge(anchor, bk, None, backup_switch, None, &mut topo);
        }

        Ok(CaseModel {
            doc,
            comp_index,
            mg_index,
            catalogs,
            switches,
            topo,
            line_subtree,
            feed_line_of,
            backup_switch,
            poi_switch_of_line,
            internal_switch_of,
        })
    }

    /// Raw (availability-independent) demand of segment `r` of microgrid `m`
    /// at an hourly load fraction.
    pub fn segment_raw_demand(&self, m: MgId, r: usize, load_frac: Real) -> Real {
        self.catalogs[m].contributions[r]
            .iter()
            .map(|&(lp, theta)| theta * self.doc.microgrids[m].load_points[lp].peak_mw * load_frac)
            .sum()
    }
}

/// Aggregates a microgrid's load-point segments into unique ascending
/// interruption costs; segments sharing a cost share one aggregate variable.
pub fn aggregate_segments(mg: &MicrogridDoc) -> SegmentCatalog {
    let mut costs: Vec<Real> = mg
        .load_points
        .iter()
        .flat_map(|lp| lp.segments.iter().map(|s| s.cost))
        .collect();
    costs.sort_by(|a, b| a.total_cmp(b));
    costs.dedup();
    let contributions = costs
        .iter()
        .map(|&c| {
            let mut list = Vec::new();
            for (li, lp) in mg.load_points.iter().enumerate() {
                for s in &lp.segments {
                    if s.cost == c {
                        list.push((li, s.proportion));
                    }
                }
            }
            list
        })
        .collect();
    SegmentCatalog { costs, contributions }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(id: &str, segs: &[(f64, f64)]) -> LoadPointDoc {
        LoadPointDoc {
            id: id.into(),
            bus: 1,
            zone: 0,
            peak_mw: 1.0,
            segments: segs.iter().map(|&(p, c)| SegmentDoc { proportion: p, cost: c }).collect(),
            transformer: "tr".into(),
            lc: "lc".into(),
        }
    }

    fn mg_with(lps: Vec<LoadPointDoc>) -> MicrogridDoc {
        MicrogridDoc {
            tag: 1,
            mgcc: "mgcc".into(),
            zones: vec![ZoneDoc { feed_line: "zl".into(), feed_switch: None }],
            wind: None,
            pv: None,
            diesel: vec![],
            ess: None,
            load_points: lps,
        }
    }

    #[test]
    fn aggregation_merges_equal_costs() {
        let mg = mg_with(vec![
            lp("a", &[(0.5, 50.0), (0.3, 80.0), (0.2, 100.0)]),
            lp("b", &[(0.5, 50.0), (0.3, 80.0), (0.2, 100.0)]),
            lp("c", &[(0.5, 100.0), (0.5, 180.0)]),
        ]);
        let cat = aggregate_segments(&mg);
        assert_eq!(cat.costs, vec![50.0, 80.0, 100.0, 180.0]);
        let demand: Vec<f64> = (0..4)
            .map(|r| cat.contributions[r].iter().map(|&(i, th)| th * mg.load_points[i].peak_mw).sum())
            .collect();
        let expect = [1.0, 0.6, 0.9, 0.5];
        for (d, e) in demand.iter().zip(expect) {
            assert!((d - e).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_identity_single_segment() {
        let mg = mg_with(vec![lp("a", &[(1.0, 7.5)])]);
        let cat = aggregate_segments(&mg);
        assert_eq!(cat.costs, vec![7.5]);
        assert_eq!(cat.contributions[0], vec![(0, 1.0)]);
    }

    #[test]
    fn aggregation_doubles_for_identical_points() {
        let mg1 = mg_with(vec![lp("a", &[(0.6, 1.0), (0.4, 2.0)])]);
        let mg2 = mg_with(vec![
            lp("a", &[(0.6, 1.0), (0.4, 2.0)]),
            lp("b", &[(0.6, 1.0), (0.4, 2.0)]),
        ]);
        let c1 = aggregate_segments(&mg1);
        let c2 = aggregate_segments(&mg2);
        for r in 0..c1.costs.len() {
            let d1: f64 = c1.contributions[r].iter().map(|&(_, t)| t).sum();
            let d2: f64 = c2.contributions[r].iter().map(|&(_, t)| t).sum();
            assert!((d2 - 2.0 * d1).abs() < 1e-12);
        }
    }

    #[test]
    fn catalog_costs_strictly_increase() {
        let mg = mg_with(vec![
            lp("a", &[(0.3, 0.1), (0.5, 0.15), (0.2, 0.2)]),
            lp("b", &[(0.2, 2.0), (0.8, 12.87)]),
        ]);
        let cat = aggregate_segments(&mg);
        for w in cat.costs.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
}
