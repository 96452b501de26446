use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clipmotion::config::{GroupConfig, RunConfig};
use clipmotion::document::{group_contour, serialize_svg, ClipartDocument, LayerContent, Polygon};
use clipmotion::pipeline::{DeformModel, LayerGroup, Scene};
use clipmotion::renderer::RenderSettings;
use clipmotion::rigging::{bind_extrapolated, Rig};
use clipmotion::trajectory::FrameSchedule;

use crate::artifacts::{
    create_dir, file_record, load_document, load_skeleton, prepare_out_dir, write_json, KeypointSource,
    RigGroupRecord, RigManifest, FORMAT, RIG_MANIFEST, TOOL_VERSION,
};
use crate::error::{CliError, Result};

/// Groups to rig: the configured ones, or one group over every layer.
fn resolve_groups(cfg: &RunConfig) -> Vec<GroupConfig> {
    if cfg.groups.is_empty() {
        vec![GroupConfig { name: "all".into(), layers: Vec::new(), keypoints: cfg.keypoints.clone() }]
    } else {
        cfg.groups.clone()
    }
}

/// Control points of the group's layers, in document order.
fn group_points(doc: &ClipartDocument, layers: &[String]) -> Vec<clipmotion::geometry::Point2D> {
    doc.layers_in_paint_order()
        .into_iter()
        .filter(|l| layers.is_empty() || layers.contains(&l.name))
        .flat_map(|l| l.paths().iter().flat_map(|p| p.control_points().copied()).collect::<Vec<_>>())
        .collect()
}

pub fn run(input: &Path, out: &Path, cfg: &RunConfig, force: bool) -> Result<()> {
    cfg.validate()?;
    let doc = load_document(input)?;
    doc.validate()?;
    let groups = resolve_groups(cfg);

    let mut rigs = Vec::new();
    let mut contours = Vec::new();
    let mut records = Vec::new();
    for g in &groups {
        let contour = group_contour(&doc, &g.layers, cfg.contour.flatten_tolerance, cfg.contour.alpha_threshold)
            .map_err(|e| CliError::rig(format!("group {:?}: {e}", g.name)))?;
        let override_skeleton = g.keypoints.as_deref().map(load_skeleton).transpose()?;
        let source = if override_skeleton.is_some() { KeypointSource::Override } else { KeypointSource::StraightSkeleton };
        let rig = Rig::build(&contour.polygon, override_skeleton, &cfg.rig)
            .map_err(|e| CliError::rig(format!("group {:?}: {e}", g.name)))?;
        log::info!(
            "group {}: {} keypoints, {} bones, {} triangles",
            g.name,
            rig.skeleton.keypoints.len(),
            rig.skeleton.bones.len(),
            rig.mesh.triangles.len()
        );
        records.push(RigGroupRecord {
            name: g.name.clone(),
            layers: g.layers.clone(),
            keypoint_source: source,
            keypoints: rig.skeleton.keypoints.len(),
            bones: rig.skeleton.bones.len(),
            triangles: rig.mesh.triangles.len(),
        });
        contours.push(contour.polygon);
        rigs.push(rig);
    }

    // Every control point must have exactly one owner.
    let scene_groups: Vec<LayerGroup> = groups
        .iter()
        .zip(&rigs)
        .map(|(g, rig)| LayerGroup { name: g.name.clone(), layers: g.layers.clone(), rig: rig.clone() })
        .collect();
    let schedule = FrameSchedule::new(2, false).expect("two frames is a valid schedule");
    Scene::layered(doc.clone(), scene_groups, RenderSettings::new(8, 8), schedule, DeformModel::Arap)?;

    prepare_out_dir(out, force)?;
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("svg").to_ascii_lowercase();
    let input_copy = out.join(format!("input.{ext}"));
    fs::copy(input, &input_copy).map_err(|e| CliError::io(&input_copy, e))?;

    let vector = doc.layers.iter().all(|l| matches!(l.content, LayerContent::Paths(_)));
    for (g, rig) in groups.iter().zip(&rigs) {
        let gdir = out.join(&g.name);
        create_dir(&gdir)?;
        let skel_path = gdir.join("skeleton.toml");
        fs::write(&skel_path, rig.skeleton.to_toml()).map_err(|e| CliError::io(&skel_path, e))?;
        write_json(&gdir.join("mesh.json"), &rig.mesh)?;
        if vector {
            let binding = bind_extrapolated(&rig.mesh, &group_points(&doc, &g.layers))?;
            write_json(&gdir.join("binding.json"), &binding)?;
        }
    }
    let preview = out.join("preview.svg");
    fs::write(&preview, preview_svg(&doc, &contours, &rigs)).map_err(|e| CliError::io(&preview, e))?;

    let manifest = RigManifest {
        format: FORMAT,
        tool_version: TOOL_VERSION.into(),
        input: file_record(out, &input_copy)?,
        options: cfg.rig.clone(),
        contour: cfg.contour.clone(),
        groups: records,
    };
    write_json(&out.join(RIG_MANIFEST), &manifest)?;
    println!("rig written to {}", out.display());
    Ok(())
}

fn ring_points(ring: &[clipmotion::geometry::Point2D]) -> String {
    ring.iter().map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

/// Artwork (faded, vector input only), contour, mesh and skeleton overlay.
pub fn preview_svg(doc: &ClipartDocument, contours: &[Polygon], rigs: &[Rig]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = doc.width,
        h = doc.height
    );
    if doc.control_point_count() > 0 {
        let art = serialize_svg(doc);
        let body_start = art.find("<svg").and_then(|i| art[i..].find('>').map(|j| i + j + 1));
        if let (Some(a), Some(b)) = (body_start, art.rfind("</svg>")) {
            let _ = writeln!(s, r#"  <g id="artwork" opacity="0.35">{}</g>"#, &art[a..b]);
        }
    }
    for (k, (contour, rig)) in contours.iter().zip(rigs).enumerate() {
        let _ = writeln!(s, r#"  <g id="rig{k}">"#);
        let _ = writeln!(
            s,
            r#"    <polygon points="{}" fill="none" stroke="black" stroke-width="1"/>"#,
            ring_points(&contour.vertices)
        );
        let v = &rig.mesh.vertices;
        for &(a, b) in &rig.mesh.edges() {
            let _ = writeln!(
                s,
                r##"    <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#8899aa" stroke-width="0.4"/>"##,
                v[a].x, v[a].y, v[b].x, v[b].y
            );
        }
        let kp = &rig.skeleton.keypoints;
        for &(a, b) in &rig.skeleton.bones {
            let _ = writeln!(
                s,
                r##"    <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#d62828" stroke-width="2"/>"##,
                kp[a].x, kp[a].y, kp[b].x, kp[b].y
            );
        }
        for p in kp {
            let _ = writeln!(s, r##"    <circle cx="{}" cy="{}" r="3" fill="#1d3557"/>"##, p.x, p.y);
        }
        s.push_str("  </g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Output directory next to the input when `--out` is absent.
pub fn default_out(input: &Path) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("clipart");
    input.with_file_name(format!("{stem}.rig"))
}
