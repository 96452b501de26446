use std::fmt::Write as _;

use super::path_data::parse_path_data;
use super::{
    ClipartDocument, DocumentError, FillRule, Layer, LayerContent, Segment, Subpath, VectorPath,
};
use crate::geometry::{Affine, Point2D, Rgba};

const SVG_NS: &str = "http://www.w3.org/2000/svg";

/// Elements that carry features outside the supported subset.
const REJECTED: &[(&str, &str)] = &[
    ("linearGradient", "gradient"),
    ("radialGradient", "gradient"),
    ("meshgradient", "gradient"),
    ("pattern", "pattern"),
    ("filter", "filter"),
    ("text", "text"),
    ("tspan", "text"),
    ("textPath", "text"),
    ("image", "embedded image"),
    ("mask", "mask"),
    ("clipPath", "clip path"),
    ("use", "use reference"),
    ("symbol", "symbol"),
    ("marker", "marker"),
    ("foreignObject", "foreign object"),
    ("style", "CSS stylesheet"),
    ("svg", "nested svg"),
    ("switch", "switch"),
];

const IGNORED: &[&str] = &["title", "desc", "metadata", "defs"];

#[derive(Clone)]
struct Style {
    fill: Option<Rgba>,
    fill_opacity: f64,
    opacity: f64,
    fill_rule: FillRule,
    transform: Affine,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            fill: Some(Rgba::BLACK),
            fill_opacity: 1.0,
            opacity: 1.0,
            fill_rule: FillRule::NonZero,
            transform: Affine::IDENTITY,
        }
    }
}

/// Parses the supported SVG subset into a [`ClipartDocument`].
///
/// Transforms (including the viewBox mapping) are baked into absolute
/// coordinates. Each top-level `<g>` becomes a layer; runs of ungrouped
/// top-level shapes are collected into one layer each.
pub fn parse_svg(text: &str) -> Result<ClipartDocument, DocumentError> {
    let xml = roxmltree::Document::parse(text).map_err(|e| DocumentError::Xml(e.to_string()))?;
    let root = xml.root_element();
    if root.tag_name().name() != "svg" {
        return Err(DocumentError::Invalid("root element is not <svg>".into()));
    }

    let viewbox = match root.attribute("viewBox") {
        Some(v) => {
            let n = parse_number_list(v, "viewBox")?;
            if n.len() != 4 || n[2] <= 0.0 || n[3] <= 0.0 {
                return Err(attr_err("viewBox", v));
            }
            Some([n[0], n[1], n[2], n[3]])
        }
        None => None,
    };
    let width = match root.attribute("width") {
        Some(v) => parse_length(v, "width")?,
        None => viewbox.map(|v| v[2]).ok_or_else(|| attr_err("width", "missing"))?,
    };
    let height = match root.attribute("height") {
        Some(v) => parse_length(v, "height")?,
        None => viewbox.map(|v| v[3]).ok_or_else(|| attr_err("height", "missing"))?,
    };
    if !(width > 0.0 && height > 0.0) {
        return Err(DocumentError::Invalid("canvas width and height must be > 0".into()));
    }

    let mut base = Style::default();
    if let Some([vx, vy, vw, vh]) = viewbox {
        base.transform =
            Affine::scale(width / vw, height / vh).then_after(&Affine::translate(-vx, -vy));
    }
    let base = apply_presentation(root, &base, text)?;

    let mut layers = Vec::new();
    let mut loose: Vec<VectorPath> = Vec::new();
    let next_layer_name = |layers: &Vec<Layer>| format!("layer{}", layers.len());

    for child in root.children().filter(|n| n.is_element()) {
        if !is_svg(child) {
            continue;
        }
        let name = child.tag_name().name();
        check_supported(child)?;
        if IGNORED.contains(&name) {
            continue;
        }
        if name == "g" {
            if !loose.is_empty() {
                let n = next_layer_name(&layers);
                layers.push(new_layer(n, layers.len() as i32, std::mem::take(&mut loose)));
            }
            let mut paths = Vec::new();
            collect(child, &base, text, &mut paths)?;
            let layer_name = child
                .attribute("id")
                .or_else(|| {
                    child.attributes().find(|a| a.name() == "label").map(|a| a.value())
                })
                .map(str::to_owned)
                .unwrap_or_else(|| next_layer_name(&layers));
            let z = match child.attribute("data-z") {
                Some(v) => v.trim().parse::<i32>().map_err(|_| attr_err("data-z", v))?,
                None => layers.len() as i32,
            };
            layers.push(new_layer(layer_name, z, paths));
        } else {
            collect(child, &base, text, &mut loose)?;
        }
    }
    if !loose.is_empty() {
        let n = next_layer_name(&layers);
        layers.push(new_layer(n, layers.len() as i32, loose));
    }

    let doc = ClipartDocument { layers, width, height };
    doc.validate()?;
    Ok(doc)
}

fn new_layer(name: String, z_order: i32, paths: Vec<VectorPath>) -> Layer {
    Layer { name, z_order, content: LayerContent::Paths(paths) }
}

fn is_svg(n: roxmltree::Node) -> bool {
    matches!(n.tag_name().namespace(), None | Some(SVG_NS))
}

fn attr_err(name: &str, value: &str) -> DocumentError {
    DocumentError::Attribute { name: name.into(), value: value.into() }
}

fn check_supported(n: roxmltree::Node) -> Result<(), DocumentError> {
    let name = n.tag_name().name();
    if let Some((_, feature)) = REJECTED.iter().find(|(el, _)| *el == name) {
        return Err(DocumentError::Unsupported(format!("{feature} (<{name}>)")));
    }
    for attr in ["filter", "mask", "clip-path"] {
        if n.attribute(attr).is_some() {
            return Err(DocumentError::Unsupported(format!("{attr} attribute")));
        }
    }
    if name == "defs" {
        for d in n.descendants().filter(|d| d.is_element() && is_svg(*d)) {
            let dn = d.tag_name().name();
            if let Some((_, feature)) = REJECTED.iter().find(|(el, _)| *el == dn) {
                return Err(DocumentError::Unsupported(format!("{feature} (<{dn}>)")));
            }
        }
    }
    Ok(())
}

/// Walks a subtree, appending every filled shape in document order.
fn collect(
    node: roxmltree::Node,
    parent: &Style,
    text: &str,
    out: &mut Vec<VectorPath>,
) -> Result<(), DocumentError> {
    if !is_svg(node) {
        return Ok(());
    }
    check_supported(node)?;
    let name = node.tag_name().name();
    if IGNORED.contains(&name) {
        return Ok(());
    }
    let style = apply_presentation(node, parent, text)?;
    match name {
        "g" | "a" => {
            for child in node.children().filter(|n| n.is_element()) {
                collect(child, &style, text, out)?;
            }
            return Ok(());
        }
        "line" => return Ok(()),
        _ => {}
    }
    let subpaths = match name {
        "path" => match node.attribute_node("d") {
            Some(attr) => {
                let offset = attr.range_value().start;
                parse_path_data(attr.value()).map_err(|e| match e {
                    DocumentError::PathData { offset: o, message } => {
                        DocumentError::PathData { offset: offset + o, message }
                    }
                    other => other,
                })?
            }
            None => Vec::new(),
        },
        "rect" => rect_subpaths(node)?,
        "circle" => {
            let r = num_attr(node, "r", 0.0)?;
            ellipse_subpath(num_attr(node, "cx", 0.0)?, num_attr(node, "cy", 0.0)?, r, r)
        }
        "ellipse" => ellipse_subpath(
            num_attr(node, "cx", 0.0)?,
            num_attr(node, "cy", 0.0)?,
            num_attr(node, "rx", 0.0)?,
            num_attr(node, "ry", 0.0)?,
        ),
        "polygon" | "polyline" => {
            let pts = parse_number_list(node.attribute("points").unwrap_or(""), "points")?;
            if pts.len() % 2 != 0 {
                return Err(attr_err("points", "odd coordinate count"));
            }
            let pts: Vec<Point2D> = pts.chunks(2).map(|c| Point2D::new(c[0], c[1])).collect();
            polygon_subpath(pts, name == "polygon")
        }
        other => {
            log::warn!("ignoring unknown element <{other}>");
            Vec::new()
        }
    };
    let Some(fill) = style.fill else { return Ok(()) };
    let mut subpaths: Vec<Subpath> = subpaths.into_iter().filter(|s| !s.segments.is_empty()).collect();
    if subpaths.is_empty() {
        return Ok(());
    }
    if !style.transform.is_identity() {
        for sp in &mut subpaths {
            for p in &mut sp.points {
                *p = style.transform.apply(*p);
            }
        }
    }
    let alpha = (fill.a * style.fill_opacity * style.opacity).clamp(0.0, 1.0);
    out.push(VectorPath {
        subpaths,
        fill: Rgba { a: alpha, ..fill },
        fill_rule: style.fill_rule,
    });
    Ok(())
}

fn apply_presentation(
    node: roxmltree::Node,
    parent: &Style,
    _text: &str,
) -> Result<Style, DocumentError> {
    let mut s = parent.clone();
    s.opacity = parent.opacity;
    let mut decls: Vec<(String, String)> = Vec::new();
    for a in node.attributes() {
        if a.namespace().is_none() {
            decls.push((a.name().to_owned(), a.value().to_owned()));
        }
    }
    if let Some(style) = node.attribute("style") {
        for decl in style.split(';') {
            if let Some((k, v)) = decl.split_once(':') {
                decls.push((k.trim().to_owned(), v.trim().to_owned()));
            }
        }
    }
    let mut own_opacity = 1.0;
    for (k, v) in &decls {
        match k.as_str() {
            "fill" => s.fill = parse_paint(v)?,
            "fill-opacity" => s.fill_opacity = parse_unit_number(v, "fill-opacity")?,
            "opacity" => own_opacity = parse_unit_number(v, "opacity")?,
            "fill-rule" => {
                s.fill_rule = match v.trim() {
                    "nonzero" => FillRule::NonZero,
                    "evenodd" => FillRule::EvenOdd,
                    _ => return Err(attr_err("fill-rule", v)),
                }
            }
            "filter" | "mask" | "clip-path" if v.trim() != "none" => {
                return Err(DocumentError::Unsupported(format!("{k} property")));
            }
            "stroke" if v.trim() != "none" => {
                log::warn!("stroke `{v}` ignored: strokes are not rendered");
            }
            _ => {}
        }
    }
    s.opacity *= own_opacity;
    if let Some(t) = node.attribute("transform") {
        s.transform = parent.transform.then_after(&parse_transform(t)?);
    }
    Ok(s)
}

fn parse_unit_number(v: &str, name: &str) -> Result<f64, DocumentError> {
    let t = v.trim();
    let x = if let Some(p) = t.strip_suffix('%') {
        p.parse::<f64>().map(|x| x / 100.0)
    } else {
        t.parse::<f64>()
    }
    .map_err(|_| attr_err(name, v))?;
    Ok(x.clamp(0.0, 1.0))
}

fn parse_length(v: &str, name: &str) -> Result<f64, DocumentError> {
    let t = v.trim();
    let t = t.strip_suffix("px").unwrap_or(t);
    if t.ends_with(|c: char| c.is_ascii_alphabetic() || c == '%') {
        return Err(DocumentError::Unsupported(format!("length unit in {name}=\"{v}\"")));
    }
    t.trim().parse::<f64>().map_err(|_| attr_err(name, v))
}

fn num_attr(node: roxmltree::Node, name: &str, default: f64) -> Result<f64, DocumentError> {
    match node.attribute(name) {
        Some(v) => parse_length(v, name),
        None => Ok(default),
    }
}

fn parse_number_list(v: &str, name: &str) -> Result<Vec<f64>, DocumentError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| attr_err(name, v)))
        .collect()
}

fn parse_paint(v: &str) -> Result<Option<Rgba>, DocumentError> {
    let t = v.trim();
    if t.starts_with("url(") {
        return Err(DocumentError::Unsupported(format!("paint server fill `{t}` (gradient/pattern)")));
    }
    if t == "none" || t == "transparent" {
        return Ok(None);
    }
    parse_color(t).map(Some).ok_or_else(|| attr_err("fill", v))
}

fn parse_color(t: &str) -> Option<Rgba> {
    if let Some(hex) = t.strip_prefix('#') {
        let digits: Vec<u8> =
            hex.chars().map(|c| c.to_digit(16).map(|d| d as u8)).collect::<Option<_>>()?;
        return match digits.len() {
            3 => Some(Rgba::from_rgb8(digits[0] * 17, digits[1] * 17, digits[2] * 17)),
            6 => Some(Rgba::from_rgb8(
                digits[0] * 16 + digits[1],
                digits[2] * 16 + digits[3],
                digits[4] * 16 + digits[5],
            )),
            _ => None,
        };
    }
    if let Some(inner) = t.strip_prefix("rgb(").and_then(|r| r.strip_suffix(')')) {
        let comps: Vec<&str> = inner.split(',').map(str::trim).collect();
        if comps.len() != 3 {
            return None;
        }
        let mut c = [0.0; 3];
        for (i, s) in comps.iter().enumerate() {
            c[i] = match s.strip_suffix('%') {
                Some(p) => p.trim().parse::<f64>().ok()? / 100.0,
                None => s.parse::<f64>().ok()? / 255.0,
            }
            .clamp(0.0, 1.0);
        }
        return Some(Rgba::new(c[0], c[1], c[2], 1.0));
    }
    let (r, g, b) = match t.to_ascii_lowercase().as_str() {
        "black" => (0, 0, 0),
        "white" => (255, 255, 255),
        "red" => (255, 0, 0),
        "lime" => (0, 255, 0),
        "green" => (0, 128, 0),
        "blue" => (0, 0, 255),
        "yellow" => (255, 255, 0),
        "cyan" | "aqua" => (0, 255, 255),
        "magenta" | "fuchsia" => (255, 0, 255),
        "gray" | "grey" => (128, 128, 128),
        "silver" => (192, 192, 192),
        "maroon" => (128, 0, 0),
        "olive" => (128, 128, 0),
        "purple" => (128, 0, 128),
        "teal" => (0, 128, 128),
        "navy" => (0, 0, 128),
        "orange" => (255, 165, 0),
        "brown" => (165, 42, 42),
        "pink" => (255, 192, 203),
        _ => return None,
    };
    Some(Rgba::from_rgb8(r, g, b))
}

/// Parses an SVG transform list; functions compose left to right.
fn parse_transform(v: &str) -> Result<Affine, DocumentError> {
    let mut acc = Affine::IDENTITY;
    let mut rest = v.trim();
    while !rest.is_empty() {
        let open = rest.find('(').ok_or_else(|| attr_err("transform", v))?;
        let close = rest.find(')').ok_or_else(|| attr_err("transform", v))?;
        let name = rest[..open].trim().trim_start_matches(',').trim();
        let args = parse_number_list(&rest[open + 1..close], "transform")?;
        let t = match (name, args.as_slice()) {
            ("matrix", [a, b, c, d, e, f]) => Affine { m: [*a, *b, *c, *d, *e, *f] },
            ("translate", [x]) => Affine::translate(*x, 0.0),
            ("translate", [x, y]) => Affine::translate(*x, *y),
            ("scale", [s]) => Affine::scale(*s, *s),
            ("scale", [x, y]) => Affine::scale(*x, *y),
            ("rotate", [a]) => Affine::rotate(a.to_radians()),
            ("rotate", [a, cx, cy]) => Affine::translate(*cx, *cy)
                .then_after(&Affine::rotate(a.to_radians()))
                .then_after(&Affine::translate(-cx, -cy)),
            ("skewX", [a]) => Affine { m: [1.0, 0.0, a.to_radians().tan(), 1.0, 0.0, 0.0] },
            ("skewY", [a]) => Affine { m: [1.0, a.to_radians().tan(), 0.0, 1.0, 0.0, 0.0] },
            _ => return Err(attr_err("transform", v)),
        };
        acc = acc.then_after(&t);
        rest = rest[close + 1..].trim_start();
    }
    Ok(acc)
}

fn polygon_subpath(pts: Vec<Point2D>, closed: bool) -> Vec<Subpath> {
    if pts.len() < 2 {
        return Vec::new();
    }
    let n = pts.len();
    let mut segments: Vec<Segment> = (1..n).map(|end| Segment::Line { end }).collect();
    if closed || n >= 3 {
        segments.push(Segment::Line { end: 0 });
    }
    let closed = segments.last().map(Segment::end) == Some(0);
    vec![Subpath { points: pts, segments, closed }]
}

const KAPPA: f64 = 0.552_284_749_830_793_4;

fn ellipse_subpath(cx: f64, cy: f64, rx: f64, ry: f64) -> Vec<Subpath> {
    if rx <= 0.0 || ry <= 0.0 {
        return Vec::new();
    }
    let (kx, ky) = (rx * KAPPA, ry * KAPPA);
    let p = Point2D::new;
    let points = vec![
        p(cx + rx, cy),
        p(cx + rx, cy + ky),
        p(cx + kx, cy + ry),
        p(cx, cy + ry),
        p(cx - kx, cy + ry),
        p(cx - rx, cy + ky),
        p(cx - rx, cy),
        p(cx - rx, cy - ky),
        p(cx - kx, cy - ry),
        p(cx, cy - ry),
        p(cx + kx, cy - ry),
        p(cx + rx, cy - ky),
    ];
    let segments = (0..4)
        .map(|q| Segment::Cubic { ctrl1: 3 * q + 1, ctrl2: 3 * q + 2, end: (3 * q + 3) % 12 })
        .collect();
    vec![Subpath { points, segments, closed: true }]
}

fn rect_subpaths(node: roxmltree::Node) -> Result<Vec<Subpath>, DocumentError> {
    let x = num_attr(node, "x", 0.0)?;
    let y = num_attr(node, "y", 0.0)?;
    let w = num_attr(node, "width", 0.0)?;
    let h = num_attr(node, "height", 0.0)?;
    if w <= 0.0 || h <= 0.0 {
        return Ok(Vec::new());
    }
    let (rx_attr, ry_attr) = (node.attribute("rx"), node.attribute("ry"));
    let mut rx = match rx_attr {
        Some(v) => parse_length(v, "rx")?,
        None => 0.0,
    };
    let mut ry = match ry_attr {
        Some(v) => parse_length(v, "ry")?,
        None => rx,
    };
    if rx_attr.is_none() {
        rx = ry;
    }
    rx = rx.clamp(0.0, w / 2.0);
    ry = ry.clamp(0.0, h / 2.0);
    let p = Point2D::new;
    if rx == 0.0 || ry == 0.0 {
        return Ok(polygon_subpath(vec![p(x, y), p(x + w, y), p(x + w, y + h), p(x, y + h)], true));
    }
    let (kx, ky) = (rx * (1.0 - KAPPA), ry * (1.0 - KAPPA));
    let points = vec![
        p(x + rx, y),
        p(x + w - rx, y),
        p(x + w - kx, y),
        p(x + w, y + ky),
        p(x + w, y + ry),
        p(x + w, y + h - ry),
        p(x + w, y + h - ky),
        p(x + w - kx, y + h),
        p(x + w - rx, y + h),
        p(x + rx, y + h),
        p(x + kx, y + h),
        p(x, y + h - ky),
        p(x, y + h - ry),
        p(x, y + ry),
        p(x, y + ky),
        p(x + kx, y),
    ];
    let segments = vec![
        Segment::Line { end: 1 },
        Segment::Cubic { ctrl1: 2, ctrl2: 3, end: 4 },
        Segment::Line { end: 5 },
        Segment::Cubic { ctrl1: 6, ctrl2: 7, end: 8 },
        Segment::Line { end: 9 },
        Segment::Cubic { ctrl1: 10, ctrl2: 11, end: 12 },
        Segment::Line { end: 13 },
        Segment::Cubic { ctrl1: 14, ctrl2: 15, end: 0 },
    ];
    Ok(vec![Subpath { points, segments, closed: true }])
}

/// Writes the document as SVG: one top-level `<g>` per layer in z order.
/// Raster layers have no representation in the subset and are omitted.
pub fn serialize_svg(doc: &ClipartDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="{SVG_NS}" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = doc.width,
        h = doc.height
    );
    for layer in doc.layers_in_paint_order() {
        let LayerContent::Paths(paths) = &layer.content else {
            log::warn!("raster layer `{}` omitted from SVG output", layer.name);
            continue;
        };
        let _ = writeln!(out, r#"  <g id="{}" data-z="{}">"#, escape(&layer.name), layer.z_order);
        for path in paths {
            let mut d = String::new();
            for sp in &path.subpaths {
                write_subpath(&mut d, sp);
            }
            let f = path.fill;
            let _ = write!(out, r#"    <path d="{}" fill="{}""#, d.trim_end(), hex_color(&f));
            if f.a < 1.0 {
                let _ = write!(out, r#" fill-opacity="{}""#, f.a);
            }
            if path.fill_rule == FillRule::EvenOdd {
                out.push_str(r#" fill-rule="evenodd""#);
            }
            out.push_str("/>\n");
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn write_subpath(d: &mut String, sp: &Subpath) {
    let p = &sp.points;
    let _ = write!(d, "M {} {} ", p[0].x, p[0].y);
    let n = sp.segments.len();
    for (k, seg) in sp.segments.iter().enumerate() {
        match *seg {
            // The implicit closing line is expressed by `Z` alone.
            Segment::Line { end: 0 } if sp.closed && k + 1 == n => {}
            Segment::Line { end } => {
                let _ = write!(d, "L {} {} ", p[end].x, p[end].y);
            }
            Segment::Cubic { ctrl1, ctrl2, end } => {
                let (a, b, c) = (p[ctrl1], p[ctrl2], p[end]);
                let _ = write!(d, "C {} {} {} {} {} {} ", a.x, a.y, b.x, b.y, c.x, c.y);
            }
        }
    }
    if sp.closed {
        d.push_str("Z ");
    }
}

fn hex_color(c: &Rgba) -> String {
    let b = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", b(c.r), b(c.g), b(c.b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(body: &str) -> String {
        format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="100" height="80">{body}</svg>"#)
    }

    #[test]
    fn single_triangle() {
        let doc = parse_svg(&wrap(r#"<path d="M 0 0 L 10 0 L 0 10 Z"/>"#)).unwrap();
        assert_eq!(doc.layers.len(), 1);
        let paths = doc.layers[0].paths();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].subpaths[0].points.len(), 3);
        assert!(paths[0].subpaths[0].closed);
        assert_eq!(paths[0].fill, Rgba::BLACK);
    }

    #[test]
    fn group_transform_is_flattened() {
        let doc = parse_svg(&wrap(
            r#"<g transform="translate(10 5)"><path transform="scale(2)" d="M1 1 L2 1 L2 2 Z" fill="red"/></g>"#,
        ))
        .unwrap();
        let p = &doc.layers[0].paths()[0].subpaths[0].points;
        assert_eq!(p[0], Point2D::new(12.0, 7.0));
        assert_eq!(p[2], Point2D::new(14.0, 9.0));
    }

    #[test]
    fn viewbox_maps_to_canvas() {
        let doc = parse_svg(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="200" height="200" viewBox="0 0 100 100"><path d="M10 10 L20 10 L20 20 Z"/></svg>"#,
        )
        .unwrap();
        assert_eq!(doc.layers[0].paths()[0].subpaths[0].points[0], Point2D::new(20.0, 20.0));
    }

    #[test]
    fn gradients_are_rejected_by_name() {
        let err = parse_svg(&wrap(
            r#"<defs><linearGradient id="g"/></defs><path d="M0 0 L1 0 L1 1 Z" fill="url(#g)"/>"#,
        ))
        .unwrap_err();
        assert!(err.to_string().contains("gradient"), "{err}");
        let err = parse_svg(&wrap(r#"<text>hi</text>"#)).unwrap_err();
        assert!(err.to_string().contains("text"), "{err}");
        let err = parse_svg(&wrap(r#"<path d="M0 0 L1 0 L1 1 Z" filter="url(#f)"/>"#)).unwrap_err();
        assert!(err.to_string().contains("filter"), "{err}");
    }

    #[test]
    fn path_error_offset_is_document_relative() {
        let src = wrap(r#"<path d="M 0 0 L 1 q"/>"#);
        match parse_svg(&src) {
            Err(DocumentError::PathData { offset, .. }) => {
                let d_start = src.find("M 0 0").unwrap();
                assert_eq!(offset, d_start + 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn layers_follow_top_level_groups() {
        let doc = parse_svg(&wrap(
            r#"<g id="body"><path d="M0 0 L5 0 L5 5 Z"/></g><g id="arm"><path d="M0 0 L5 0 L5 5 Z"/></g>"#,
        ))
        .unwrap();
        let names: Vec<_> = doc.layers.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["body", "arm"]);
        assert_eq!(doc.layers[1].z_order, 1);
    }

    #[test]
    fn two_layers_serialize_as_two_groups_in_z_order() {
        let mut doc = parse_svg(&wrap(
            r#"<g id="a"><path d="M0 0 L5 0 L5 5 Z"/></g><g id="b"><path d="M0 0 L5 0 L5 5 Z"/></g>"#,
        ))
        .unwrap();
        doc.layers[0].z_order = 7;
        let svg = serialize_svg(&doc);
        assert_eq!(svg.matches("<g ").count(), 2);
        assert!(svg.find(r#"id="b""#).unwrap() < svg.find(r#"id="a""#).unwrap());
        let back = parse_svg(&svg).unwrap();
        assert_eq!(back.layer("a").unwrap().z_order, 7);
    }

    #[test]
    fn shapes_become_paths() {
        let doc = parse_svg(&wrap(
            r#"<rect x="1" y="2" width="3" height="4"/><circle cx="50" cy="40" r="10"/><polygon points="0,0 4,0 4,4"/>"#,
        ))
        .unwrap();
        let paths = doc.layers[0].paths();
        assert_eq!(paths.len(), 3);
        assert_eq!(paths[0].control_point_count(), 4);
        assert_eq!(paths[1].control_point_count(), 12);
        assert_eq!(paths[2].control_point_count(), 3);
    }

    #[test]
    fn unfilled_shapes_are_skipped() {
        let doc = parse_svg(&wrap(
            r#"<path d="M0 0 L5 0 L5 5 Z" fill="none" stroke="black"/><path d="M0 0 L5 0 L5 5 Z"/>"#,
        ))
        .unwrap();
        assert_eq!(doc.layers[0].paths().len(), 1);
    }
}
