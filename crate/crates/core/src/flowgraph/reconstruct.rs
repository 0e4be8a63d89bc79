use serde::{Deserialize, Serialize};

use super::dbscan::{centroids, dbscan};
use super::geometry::{convex_hull, polyline_distance, Point};
use super::{
    DetectionFile, FlowEdge, FlowGraph, FlowNode, FlowgraphError, ReconstructConfig, ShapeDet, TextDet, Warning,
    WarningCode,
};

/// A connector resolved to the two shapes it joins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorLink {
    pub connector_id: u32,
    pub from: u32,
    pub to: u32,
    pub tail: Point,
    pub head: Point,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Resolution {
    pub links: Vec<ConnectorLink>,
    pub warnings: Vec<Warning>,
}

fn check_input(d: &DetectionFile) -> Result<(), FlowgraphError> {
    if let Some(s) = d.shapes.iter().find(|s| !s.bbox.is_well_ordered()) {
        return Err(FlowgraphError::InvalidDetection(format!("shape {} has a malformed bbox", s.id)));
    }
    if let Some(t) = d.texts.iter().find(|t| !t.bbox.is_well_ordered()) {
        return Err(FlowgraphError::InvalidDetection(format!("text {} has a malformed bbox", t.id)));
    }
    if !d.shapes.iter().any(|s| !s.class.is_arrow()) {
        return Err(FlowgraphError::NoShapes);
    }
    Ok(())
}

fn nearest_shape<'a>(shapes: &[&'a ShapeDet], p: Point) -> Option<(&'a ShapeDet, f64)> {
    shapes.iter().map(|s| (*s, s.bbox.distance_to(p))).min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
}

/// Finds the start and end shape of every connector.
///
/// Each connector's contour is reduced to its convex hull, hull vertices are
/// clustered, and the two cluster centroids farthest apart are taken as the
/// line's termini. The terminus next to an arrow-head detection is the head;
/// without a unique arrow match the lower terminus (larger y) is the head.
pub fn resolve_connectors(d: &DetectionFile, cfg: &ReconstructConfig) -> Result<Resolution, FlowgraphError> {
    check_input(d)?;
    let nodes: Vec<&ShapeDet> = d.shapes.iter().filter(|s| !s.class.is_arrow()).collect();
    let arrows: Vec<Point> = d.shapes.iter().filter(|s| s.class.is_arrow()).map(|s| s.bbox.center()).collect();

    let mut connectors: Vec<_> = d.connectors.iter().collect();
    connectors.sort_by_key(|c| c.id);

    let mut out = Resolution::default();
    for c in connectors {
        let degenerate =
            |why: &str| Warning { code: WarningCode::DegenerateConnector, subject: c.id, message: why.to_string() };
        if c.points.len() < 2 || c.points.iter().any(|p| !p.is_finite()) {
            out.warnings.push(degenerate("connector needs at least two finite points"));
            continue;
        }
        let hull = convex_hull(&c.points);
        let labels = dbscan(&hull, cfg.eps, cfg.min_pts)?;
        let candidates = centroids(&hull, &labels);
        if candidates.len() < 2 {
            out.warnings.push(degenerate(&format!("{} endpoint cluster(s) after clustering", candidates.len())));
            continue;
        }
        let mut best = (0, 1, candidates[0].dist2(candidates[1]));
        for i in 0..candidates.len() {
            for j in i + 1..candidates.len() {
                let d2 = candidates[i].dist2(candidates[j]);
                if d2 > best.2 {
                    best = (i, j, d2);
                }
            }
        }
        let (a, b) = (candidates[best.0], candidates[best.1]);
        let near_arrow = |p: Point| arrows.iter().any(|c| c.dist(p) <= cfg.arrow_dist);
        let (tail, head) = match (near_arrow(a), near_arrow(b)) {
            (true, false) => (b, a),
            (false, true) => (a, b),
            _ if a.y > b.y => (b, a),
            _ => (a, b),
        };
        let attach =
            |p: Point| nearest_shape(&nodes, p).filter(|(_, dist)| *dist <= cfg.attach_dist).map(|(s, _)| s.id);
        match (attach(tail), attach(head)) {
            (Some(from), Some(to)) => out.links.push(ConnectorLink { connector_id: c.id, from, to, tail, head }),
            (f, t) => {
                let which = match (f, t) {
                    (None, None) => "both ends",
                    (None, _) => "tail",
                    _ => "head",
                };
                out.warnings.push(Warning {
                    code: WarningCode::UnattachedConnector,
                    subject: c.id,
                    message: format!("{which} not within {} px of any shape", cfg.attach_dist),
                });
            }
        }
    }
    Ok(out)
}

fn reading_order(a: &&TextDet, b: &&TextDet) -> std::cmp::Ordering {
    a.bbox.y0.total_cmp(&b.bbox.y0).then(a.bbox.x0.total_cmp(&b.bbox.x0)).then(a.id.cmp(&b.id))
}

/// Assembles a flow graph: texts are absorbed into the shapes they overlap,
/// connectors become directed edges, and leftover texts near a connector
/// become that edge's label.
pub fn reconstruct(d: &DetectionFile, cfg: &ReconstructConfig) -> Result<(FlowGraph, Vec<Warning>), FlowgraphError> {
    check_input(d)?;
    let mut shapes: Vec<&ShapeDet> = d.shapes.iter().filter(|s| !s.class.is_arrow()).collect();
    shapes.sort_by(|a, b| a.bbox.y0.total_cmp(&b.bbox.y0).then(a.bbox.x0.total_cmp(&b.bbox.x0)).then(a.id.cmp(&b.id)));
    let mut texts: Vec<&TextDet> = d.texts.iter().collect();
    texts.sort_by(reading_order);

    let mut absorbed = vec![false; texts.len()];
    let mut warnings = Vec::new();
    let mut nodes = Vec::with_capacity(shapes.len());
    for s in &shapes {
        let mut parts = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            if !absorbed[i] && t.bbox.intersection_area(&s.bbox) >= cfg.text_overlap * t.bbox.area() {
                absorbed[i] = true;
                let piece = t.text.trim();
                if !piece.is_empty() {
                    parts.push(piece);
                }
            }
        }
        let text = parts.join(" ");
        if text.is_empty() {
            warnings.push(Warning {
                code: WarningCode::EmptyNodeText,
                subject: s.id,
                message: "no text inside the shape".into(),
            });
        }
        nodes.push(FlowNode { id: s.id, shape_class: s.class, text, bbox: Some(s.bbox), is_reference: false });
    }

    let resolution = resolve_connectors(d, cfg)?;
    warnings.extend(resolution.warnings);
    let polylines: Vec<&[Point]> = resolution
        .links
        .iter()
        .map(|l| d.connectors.iter().find(|c| c.id == l.connector_id).map(|c| c.points.as_slice()).unwrap_or(&[]))
        .collect();
    let mut labels: Vec<Vec<&str>> = vec![Vec::new(); resolution.links.len()];
    for (i, t) in texts.iter().enumerate() {
        if absorbed[i] || t.text.trim().is_empty() {
            continue;
        }
        let centre = t.bbox.center();
        let nearest = polylines
            .iter()
            .enumerate()
            .map(|(k, pl)| (k, polyline_distance(centre, pl)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match nearest {
            Some((k, dist)) if dist <= cfg.label_dist => labels[k].push(t.text.trim()),
            _ => warnings.push(Warning {
                code: WarningCode::OrphanText,
                subject: t.id,
                message: format!("text `{}` belongs to no shape or connector", t.text.trim()),
            }),
        }
    }

    let edges = resolution
        .links
        .iter()
        .zip(labels)
        .map(|(l, parts)| FlowEdge {
            from: l.from,
            to: l.to,
            label: if parts.is_empty() { None } else { Some(parts.join(" ")) },
        })
        .collect();
    let mut graph = FlowGraph { nodes, edges };
    graph.normalize();
    Ok((graph, warnings))
}
