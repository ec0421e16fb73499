//! Reader for the "new style" cascade XML schema (`<cascade>` element with
//! `stageType` BOOST and `featureType` HAAR or LBP).

use roxmltree::{Document, Node};

use super::model::{CascadeModel, Features, HaarFeature, LbpFeature, Split, Stage, Stump, WeightedRect};
use super::CascadeError;
use crate::imaging::Rect;

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(name))
}

fn require<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Result<Node<'a, 'i>, CascadeError> {
    child(node, name).ok_or_else(|| CascadeError::Malformed(format!("missing <{name}> inside <{}>", node.tag_name().name())))
}

fn items<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.is_element() && c.has_tag_name("_"))
}

fn text<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().unwrap_or("").trim()
}

fn numbers<T: std::str::FromStr>(node: Node, what: &str) -> Result<Vec<T>, CascadeError> {
    text(node)
        .split_ascii_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| CascadeError::Malformed(format!("bad number {t:?} in <{what}>")))
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(node: Node, name: &str) -> Result<T, CascadeError> {
    let n = require(node, name)?;
    text(n)
        .parse::<T>()
        .map_err(|_| CascadeError::Malformed(format!("bad value {:?} in <{name}>", text(n))))
}

fn to_rect(v: &[i64], ctx: &str) -> Result<Rect, CascadeError> {
    if v[..4].iter().any(|&c| c < 0 || c > u32::MAX as i64) || v[2] == 0 || v[3] == 0 {
        return Err(CascadeError::Malformed(format!("bad rectangle {:?} in {ctx}", &v[..4])));
    }
    Ok(Rect::new(v[0] as u32, v[1] as u32, v[2] as u32, v[3] as u32))
}

/// Parse a cascade XML document into a validated [`CascadeModel`].
///
/// Only stump trees and upright features are accepted; anything else fails
/// with [`CascadeError::Unsupported`] naming the offending element.
pub fn parse_cascade(xml: &str) -> Result<CascadeModel, CascadeError> {
    let doc = Document::parse(xml).map_err(|e| CascadeError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    let cascade = if root.has_tag_name("cascade") {
        root
    } else {
        child(root, "cascade").ok_or_else(|| {
            CascadeError::Unsupported("no <cascade> element (old-style cascade files are not supported)".into())
        })?
    };

    let stage_type = text(require(cascade, "stageType")?);
    if stage_type != "BOOST" {
        return Err(CascadeError::Unsupported(format!("<stageType> {stage_type}")));
    }
    let feature_type = text(require(cascade, "featureType")?).to_string();
    let width: u32 = scalar(cascade, "width")?;
    let height: u32 = scalar(cascade, "height")?;

    let features_node = require(cascade, "features")?;
    let features = match feature_type.as_str() {
        "HAAR" => Features::Haar(parse_haar_features(features_node)?),
        "LBP" => Features::Lbp(parse_lbp_features(features_node)?),
        other => return Err(CascadeError::Unsupported(format!("<featureType> {other}"))),
    };
    let is_lbp = matches!(features, Features::Lbp(_));

    let mut stages = Vec::new();
    for (si, stage_node) in items(require(cascade, "stages")?).enumerate() {
        let threshold: f64 = scalar(stage_node, "stageThreshold")?;
        let mut weak = Vec::new();
        for (wi, weak_node) in items(require(stage_node, "weakClassifiers")?).enumerate() {
            let where_ = format!("stage {si} weak classifier {wi}");
            let nodes: Vec<f64> = numbers(require(weak_node, "internalNodes")?, "internalNodes")?;
            let leaves: Vec<f64> = numbers(require(weak_node, "leafValues")?, "leafValues")?;
            let node_len = if is_lbp { 11 } else { 4 };
            if nodes.len() != node_len || leaves.len() != 2 {
                return Err(CascadeError::Unsupported(format!(
                    "<internalNodes> of {where_}: only depth-1 stumps are supported"
                )));
            }
            if nodes[2] < 0.0 || nodes[2].fract() != 0.0 {
                return Err(CascadeError::Malformed(format!("bad feature index in {where_}")));
            }
            let split = if is_lbp {
                let mut table = [0i32; 8];
                for (slot, v) in table.iter_mut().zip(&nodes[3..]) {
                    if v.fract() != 0.0 || *v < i32::MIN as f64 || *v > i32::MAX as f64 {
                        return Err(CascadeError::Malformed(format!("bad subset word in {where_}")));
                    }
                    *slot = *v as i32;
                }
                Split::Subset(table)
            } else {
                Split::Threshold(nodes[3])
            };
            weak.push(Stump {
                feature: nodes[2] as usize,
                split,
                left: leaves[0],
                right: leaves[1],
            });
        }
        stages.push(Stage { threshold, weak });
    }

    if let Some(declared) = child(cascade, "stageNum") {
        let declared: usize = text(declared)
            .parse()
            .map_err(|_| CascadeError::Malformed("bad <stageNum>".into()))?;
        if declared != stages.len() {
            return Err(CascadeError::Malformed(format!(
                "<stageNum> declares {declared} stages but {} are present",
                stages.len()
            )));
        }
    }

    CascadeModel::new(width, height, stages, features)
}

fn parse_haar_features(node: Node) -> Result<Vec<HaarFeature>, CascadeError> {
    let mut out = Vec::new();
    for (fi, f) in items(node).enumerate() {
        if let Some(t) = child(f, "tilted") {
            if text(t) != "0" {
                return Err(CascadeError::Unsupported(format!("<tilted> on haar feature {fi}")));
            }
        }
        let mut rects = Vec::new();
        for r in items(require(f, "rects")?) {
            let v: Vec<f64> = numbers(r, "rects")?;
            if v.len() != 5 || v[..4].iter().any(|c| c.fract() != 0.0) {
                return Err(CascadeError::Malformed(format!("haar feature {fi} rectangle needs x y w h weight")));
            }
            let ints: Vec<i64> = v[..4].iter().map(|&c| c as i64).collect();
            rects.push(WeightedRect {
                rect: to_rect(&ints, &format!("haar feature {fi}"))?,
                weight: v[4],
            });
        }
        out.push(HaarFeature { rects });
    }
    Ok(out)
}

fn parse_lbp_features(node: Node) -> Result<Vec<LbpFeature>, CascadeError> {
    let mut out = Vec::new();
    for (fi, f) in items(node).enumerate() {
        let v: Vec<i64> = numbers(require(f, "rect")?, "rect")?;
        if v.len() != 4 {
            return Err(CascadeError::Malformed(format!("lbp feature {fi} rectangle needs x y w h")));
        }
        out.push(LbpFeature {
            cell: to_rect(&v, &format!("lbp feature {fi}"))?,
        });
    }
    Ok(out)
}
