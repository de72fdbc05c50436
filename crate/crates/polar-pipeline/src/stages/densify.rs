//! Densification stage: polarization-enhanced patch matching per view,
//! cross-view consistency filtering, and back-projection of the surviving
//! hypotheses into new Gaussians appended to the corrected cloud.

use polar_core::image::BinaryImage;
use polar_core::png16::write_mask_png;
use polar_core::FloatImage;
use polar_patchmatch::{
    backproject_to_gaussians, densify_schedule, geometric_check, init_hypotheses,
    polarimetric_check, propagate, smooth_normals, PmConfig,
};
use polar_patchmatch::candidates::{PmView, ViewBundle};
use serde::{Deserialize, Serialize};
use splat_forward::GaussianCloud;
use synth_scene::corrupt_depth;

use crate::artifacts::{
    load_ground_truth, load_manifest, save_pfm, stage_dir, stage_path, view_file, write_json,
    CORRECT, DENSIFY,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{
    corrupt_seed, count_covered, crm_substituted, load_view_products, mean_coverage,
    normals_from_depth, par_map, ViewProducts,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensifySummary {
    pub views: usize,
    pub input_points: usize,
    pub spawned_points: usize,
    pub total_points: usize,
    /// Foreground fraction with valid depth before / after densification.
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Training steps on which the schedule would trigger densification.
    pub scheduled_steps: usize,
}

/// Window radius of the post-propagation normal average.
const NORMAL_SMOOTH_RADIUS: usize = 2;

struct ViewData {
    products: ViewProducts,
    foreground: BinaryImage,
    /// Corrupted stand-in depth (same seed as the correction stage).
    depth: FloatImage,
    /// Finite-difference normals of the stand-in depth.
    normal: FloatImage,
}

fn pm_view(vd: &ViewData, depth: &FloatImage, normal: &FloatImage) -> PmView {
    let (w, h) = (depth.width(), depth.height());
    PmView {
        camera: vd.products.camera.clone(),
        image: vd.products.intensity.clone(),
        crm_image: crm_substituted(&vd.products),
        reflective: vd.products.masks.reflective(),
        polar: vd.products.polar.clone(),
        depth: depth.clone(),
        normal: normal.clone(),
        // Filled in by ViewBundle::new.
        use_crm: BinaryImage::new(w, h),
        luma: FloatImage::new(w, h, 1),
        crm_luma: FloatImage::new(w, h, 1),
    }
}

/// Reference view plus its nearest ring neighbors.
fn bundle_indices(i: usize, n: usize, sources: usize) -> Vec<usize> {
    let mut out = vec![i];
    let mut k = 1;
    while out.len() < (sources + 1).min(n) {
        let fwd = (i + k) % n;
        if !out.contains(&fwd) {
            out.push(fwd);
        }
        if out.len() >= (sources + 1).min(n) {
            break;
        }
        let bwd = (i + n - k % n) % n;
        if !out.contains(&bwd) {
            out.push(bwd);
        }
        k += 1;
    }
    out
}

pub fn cmd_densify(cfg: &PipelineConfig, threads: usize) -> Result<DensifySummary, CliError> {
    let root = cfg.output_root();
    let manifest = load_manifest(&root)?;
    let cloud_path = stage_path(&root, CORRECT).join("cloud.ply");
    if !cloud_path.exists() {
        return Err(CliError::Data(format!(
            "missing {} (run the correct stage first)",
            cloud_path.display()
        )));
    }
    let cloud = GaussianCloud::load(&cloud_path)?;
    let dir = stage_dir(&root, DENSIFY)?;
    let n = manifest.views;

    let data: Vec<ViewData> = par_map(n, threads, |i| {
        let products = load_view_products(cfg, &root, i)?;
        let gt = load_ground_truth(&root, i)?;
        let depth = corrupt_depth(
            &gt.depth,
            cfg.scene.depth_noise_rel,
            cfg.scene.hole_fraction,
            corrupt_seed(cfg.seed, i),
        );
        let normal = normals_from_depth(&depth, &products.camera);
        Ok(ViewData {
            products,
            foreground: gt.foreground,
            depth,
            normal,
        })
    })?;

    let pm_cfg_for = |i: usize| PmConfig {
        seed: corrupt_seed(cfg.seed, i) ^ 0x706d,
        ..cfg.patchmatch.clone()
    };

    // Pass 1: patch matching on the stand-in depth per reference view. The
    // per-pixel normal noise of the discrete search is near zero-mean, so a
    // small window average sharpens the normals that seed the new Gaussians.
    let fields = par_map(n, threads, |i| {
        let idx = bundle_indices(i, n, cfg.densify.sources_per_view);
        let views = idx
            .iter()
            .map(|&j| pm_view(&data[j], &data[j].depth, &data[j].normal))
            .collect();
        let pm = pm_cfg_for(i);
        let bundle = ViewBundle::new(views, 0, &pm)?;
        let field = init_hypotheses(&bundle, &pm)?;
        let mut field = propagate(field, &bundle, &pm);
        smooth_normals(&mut field, NORMAL_SMOOTH_RADIUS);
        Ok(field)
    })?;
    let refined_depths: Vec<FloatImage> = fields.iter().map(|f| f.depth_map()).collect();
    let refined_normals: Vec<FloatImage> = fields.iter().map(|f| f.normal_map()).collect();

    // Pass 2: cross-view consistency checks on the refined depths, then
    // back-projection of the surviving hypotheses.
    struct ViewOut {
        gaussians: Vec<splat_forward::Gaussian>,
        valid: BinaryImage,
    }
    let outputs: Vec<ViewOut> = par_map(n, threads, |i| {
        let idx = bundle_indices(i, n, cfg.densify.sources_per_view);
        let views = idx
            .iter()
            .map(|&j| pm_view(&data[j], &refined_depths[j], &refined_normals[j]))
            .collect();
        let pm = pm_cfg_for(i);
        let bundle = ViewBundle::new(views, 0, &pm)?;
        let field = &fields[i];
        let geo = geometric_check(&bundle, field, &pm);
        let pol = polarimetric_check(&bundle, field, &pm);
        let valid = geo.and(&pol);

        save_pfm(&refined_depths[i], &view_file(&dir, i, "dopt.pfm"))?;
        save_pfm(&refined_normals[i], &view_file(&dir, i, "nopt.pfm"))?;
        write_mask_png(&valid, &view_file(&dir, i, "valid.png"))?;

        let ss = cfg.densify.spawn_stride.max(1);
        let (w, h) = (valid.width(), valid.height());
        let mut spawn = BinaryImage::new(w, h);
        for y in (0..h).step_by(ss) {
            for x in (0..w).step_by(ss) {
                spawn.set(x, y, valid.get(x, y) && data[i].foreground.get(x, y));
            }
        }
        let gaussians = backproject_to_gaussians(&bundle, field, &spawn)?;
        Ok(ViewOut { gaussians, valid })
    })?;

    // The validated refined geometry replaces the stand-in where available:
    // an input point seen by any check-validated refined pixel is dropped in
    // favor of the Gaussians spawned there (the stand-in's coarse footprints
    // otherwise bias the blended depth), and persists only where matching
    // produced no validated depth.
    let input_points = cloud.len();
    let mut kept: Vec<splat_forward::Gaussian> = Vec::new();
    let mut pruned: Vec<splat_forward::Gaussian> = Vec::new();
    for g in &cloud.gaussians {
        let p = nalgebra::Point3::from(g.mu);
        let replaced = outputs.iter().enumerate().any(|(j, out)| {
            let cam = &data[j].products.camera;
            let Ok((px, z)) = cam.project_point(&p) else {
                return false;
            };
            let (xi, yi) = (px.x.round() as i64, px.y.round() as i64);
            if z <= 0.0 || !refined_depths[j].in_bounds(xi, yi) {
                return false;
            }
            let (xi, yi) = (xi as usize, yi as usize);
            out.valid.get(xi, yi) && refined_depths[j].get(xi, yi, 0) > 0.0
        });
        if replaced {
            pruned.push(g.clone());
        } else {
            kept.push(g.clone());
        }
    }

    let mut augmented = GaussianCloud {
        gaussians: kept,
        scene_scale: cloud.scene_scale,
    };
    for out in &outputs {
        augmented.gaussians.extend(out.gaussians.iter().cloned());
    }

    // Coverage: foreground fraction reached by the rendered cloud before and
    // after densification. Pruning near check-invalid regions can open
    // coverage holes the narrow spawned footprints do not close, so pruned
    // stand-ins whose projection lands near an uncovered pixel are restored
    // until the output covers at least as much as the input.
    let alpha_maps = |c: &GaussianCloud| -> Result<Vec<FloatImage>, CliError> {
        par_map(n, threads, |i| {
            Ok(splat_forward::render(c, &data[i].products.camera)?.alpha)
        })
    };
    let coverage_of = |alphas: &[FloatImage]| -> f64 {
        let counts: Vec<(usize, usize)> = (0..n)
            .map(|i| {
                count_covered(&data[i].foreground, |x, y| {
                    alphas[i].get(x, y, 0) >= cfg.splat.min_alpha
                })
            })
            .collect();
        mean_coverage(&counts)
    };
    let coverage_before = coverage_of(&alpha_maps(&cloud)?);
    let mut coverage_after = coverage_of(&alpha_maps(&augmented)?);
    // Window radius matching the stand-in footprint (input_stride pixels of
    // tangential sigma, see the back-projection scale convention).
    let readd_radius = (cfg.densify.input_stride as i64 * 2).max(2);
    while coverage_after < coverage_before && !pruned.is_empty() {
        let alphas = alpha_maps(&augmented)?;
        let near_uncovered = |g: &splat_forward::Gaussian| {
            (0..n).any(|j| {
                let cam = &data[j].products.camera;
                let Ok((px, z)) = cam.project_point(&nalgebra::Point3::from(g.mu)) else {
                    return false;
                };
                if z <= 0.0 {
                    return false;
                }
                let (cx, cy) = (px.x.round() as i64, px.y.round() as i64);
                for dy in -readd_radius..=readd_radius {
                    for dx in -readd_radius..=readd_radius {
                        let (x, y) = (cx + dx, cy + dy);
                        if !alphas[j].in_bounds(x, y) {
                            continue;
                        }
                        let (x, y) = (x as usize, y as usize);
                        if data[j].foreground.get(x, y)
                            && alphas[j].get(x, y, 0) < cfg.splat.min_alpha
                        {
                            return true;
                        }
                    }
                }
                false
            })
        };
        let (readd, rest): (Vec<_>, Vec<_>) = pruned.into_iter().partition(&near_uncovered);
        pruned = rest;
        if readd.is_empty() {
            // No candidate helps the uncovered pixels; restore everything so
            // the output cloud strictly extends the input.
            augmented.gaussians.extend(pruned.drain(..));
        } else {
            augmented.gaussians.extend(readd);
        }
        coverage_after = coverage_of(&alpha_maps(&augmented)?);
    }
    augmented.save(&dir.join("augmented.ply"))?;

    let summary = DensifySummary {
        views: n,
        input_points,
        spawned_points: augmented.len() - input_points,
        total_points: augmented.len(),
        coverage_before,
        coverage_after,
        lambda1: cfg.patchmatch.lambda1,
        lambda2: cfg.patchmatch.lambda2,
        scheduled_steps: (cfg.patchmatch.densify_start..=cfg.patchmatch.densify_end)
            .filter(|&s| densify_schedule(s, &cfg.patchmatch))
            .count(),
    };
    write_json(&summary, &dir.join("densify_report.json"))?;
    eprintln!(
        "densify: spawned {} points ({} total), coverage {:.3} -> {:.3}",
        summary.spawned_points, summary.total_points, summary.coverage_before,
        summary.coverage_after
    );
    Ok(summary)
}
