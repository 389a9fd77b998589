use sir_core::clustering::{cluster_views, select_source_views};
use sir_core::geometry::PixelCoord;
use sir_core::model_io::{read_depth_map, read_sparse_model, write_depth_map, DepthMap};
use sir_core::oracle::{RigSpec, SceneSpec};
use sir_core::pipeline::engine::{build_graph, MANIFEST_FILE};
use sir_core::pipeline::layout::write_recaptured;
use sir_core::pipeline::oracle_fixture::{generate_fixture, view_stem, FixtureSpec};
use sir_core::pipeline::{evaluate_run, Layout, SweepConfig};
use sir_core::recapture::GridSpec;
use std::path::Path;

fn small_fixture(dir: &Path, rows: u32, cols: u32) -> FixtureSpec {
    let spec = FixtureSpec {
        scene: SceneSpec::default(),
        rig: RigSpec { rows, cols, width: 320, height: 240, focal: 300.0, ..RigSpec::default() },
        sparse_spacing: 2.0,
    };
    generate_fixture(&spec, dir).unwrap();
    spec
}

#[test]
fn recapture_counts_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    small_fixture(&fx, 2, 3);

    write_recaptured(&fx.join("sparse"), &fx.join("images"), GridSpec::new(2, 2).unwrap(), &dir.path().join("g/sparse"), &dir.path().join("g/images")).unwrap();
    let split = read_sparse_model(&dir.path().join("g/sparse")).unwrap();
    assert_eq!(split.views.len(), 24);
    assert_eq!(std::fs::read_dir(dir.path().join("g/images")).unwrap().count(), 24);

    write_recaptured(&fx.join("sparse"), &fx.join("images"), GridSpec::single(), &dir.path().join("o/sparse"), &dir.path().join("o/images")).unwrap();
    let native = read_sparse_model(&fx.join("sparse")).unwrap();
    let same = read_sparse_model(&dir.path().join("o/sparse")).unwrap();
    assert_eq!(native.views.len(), same.views.len());
    for (id, v) in &native.views {
        let w = &same.views[id];
        assert_eq!((&v.name, v.camera_id), (&w.name, w.camera_id));
        assert!(v.extrinsics.bitwise_eq(&w.extrinsics));
        assert_eq!(native.view_camera(*id), same.view_camera(*id));
    }
    for k in 0..6 {
        let name = format!("{}.ppm", view_stem(k));
        assert_eq!(std::fs::read(fx.join("images").join(&name)).unwrap(), std::fs::read(dir.path().join("o/images").join(&name)).unwrap());
    }
}

/// Fraction of the reference tile's visible ground that lands inside the source tile.
fn shared_footprint(layout: &Layout, gt: &DepthMap, reference: u32, source: u32) -> f64 {
    let r = layout.view(reference).unwrap();
    let s = layout.view(source).unwrap();
    let (mut seen, mut shared) = (0usize, 0usize);
    for y in (0..r.size.1).step_by(3) {
        for x in (0..r.size.0).step_by(3) {
            let Some(d) = gt.get(r.origin.0 + x, r.origin.1 + y) else { continue };
            seen += 1;
            let p = r.camera.unproject(PixelCoord::center_of(x, y), d as f64).unwrap();
            if let Ok(q) = s.camera.project(&p) {
                shared += s.camera.contains(q) as usize;
            }
        }
    }
    shared as f64 / seen.max(1) as f64
}

#[test]
fn tile_sources_come_from_other_images_covering_the_same_ground() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    small_fixture(&fx, 2, 3);
    let model_dir = dir.path().join("sir/sparse");
    write_recaptured(&fx.join("sparse"), &fx.join("images"), GridSpec::new(2, 2).unwrap(), &model_dir, &dir.path().join("sir/images")).unwrap();
    let layout = Layout::load(&model_dir).unwrap();
    let graph = build_graph(&layout, &SweepConfig::default()).unwrap();
    let clusters = cluster_views(&graph, 20).unwrap();
    let mut checked = 0;
    for cluster in &clusters {
        for &reference in &cluster.members {
            let r = layout.view(reference).unwrap();
            let gt = read_depth_map(&fx.join("gt").join(format!("{}.sird", layout.parents[r.parent].name.trim_end_matches(".ppm")))).unwrap();
            for source in select_source_views(reference, cluster, &graph, 4).unwrap() {
                let s = layout.view(source).unwrap();
                assert_ne!(s.parent, r.parent, "source {source} of {reference} is a tile of the same image");
                let share = shared_footprint(&layout, &gt, reference, source);
                assert!(share >= 0.3, "source {source} of {reference} shares only {share:.3}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 24);
}

#[test]
fn evaluating_ground_truth_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    small_fixture(&fx, 1, 2);
    let out = dir.path().join("run");
    let mut views = Vec::new();
    for k in 0..2 {
        let stem = view_stem(k);
        let gt = read_depth_map(&fx.join("gt").join(format!("{stem}.sird"))).unwrap();
        for sub in ["depth", "filtered"] {
            write_depth_map(&out.join(sub).join(format!("{stem}.sird")), &gt).unwrap();
        }
        views.push(serde_json::json!({
            "id": k + 1, "stem": stem, "parent": stem, "cluster": 0, "origin": [0, 0], "size": [320, 240],
            "scale": [1.0, 1.0], "min_depth": 50.0, "max_depth": 70.0, "inverse_step": 1e-5
        }));
    }
    std::fs::write(out.join(MANIFEST_FILE), serde_json::json!({ "mode": "native", "views": views }).to_string()).unwrap();
    let m = evaluate_run(&out, &fx).unwrap();
    assert_eq!(m.filtered.overall.median_abs_error, Some(0.0));
    assert_eq!(m.filtered.overall.completeness, 1.0);

    for k in 0..2 {
        let map = DepthMap::invalid(view_stem(k), 320, 240);
        write_depth_map(&out.join("filtered").join(format!("{}.sird", view_stem(k))), &map).unwrap();
    }
    let m = evaluate_run(&out, &fx).unwrap();
    assert_eq!(m.filtered.overall.median_abs_error, None);
    assert_eq!(m.filtered.overall.completeness, 0.0);
    assert!(evaluate_run(&out, dir.path()).is_err());
}
