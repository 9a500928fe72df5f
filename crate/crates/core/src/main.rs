use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use serde::Serialize;

use pyramid_mvs::depth::{l1_error, DepthMap};
use pyramid_mvs::fusion::{cloud_metrics, consistency_filter, fuse, FusionConfig};
use pyramid_mvs::geometry::{
    depth_interval_for_offset, depth_search_range, level_extent, planes_for_interval,
};
use pyramid_mvs::io::dataset::{load_color_image, Dataset};
use pyramid_mvs::io::pfm::{read_pfm, write_pfm, PfmImage};
use pyramid_mvs::io::ply::{read_ply, write_ply};
use pyramid_mvs::io::volume::{write_volume, VolumeDump};
use pyramid_mvs::io::write_scene;
use pyramid_mvs::pipeline::{
    infer_depth_observed, PipelineConfig, RunMetadata, DEFAULT_REFINE_PLANES, DEFAULT_SAMPLE_OFFSET_PX, DEFAULT_TEMPERATURE,
};
use pyramid_mvs::synth::{Scene, SceneSpec};
use pyramid_mvs::{Error, Result};

#[derive(Parser)]
#[command(name = "pmvs", version, about = "Coarse-to-fine plane-sweep multi-view stereo")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer the depth pyramid of one reference view.
    Depth(DepthArgs),
    /// Filter and fuse per-view depth maps into a point cloud.
    Fuse(FuseArgs),
    /// Accuracy / completeness of a cloud against ground truth.
    EvalCloud {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        cap: f64,
    },
    /// Per-level mean absolute depth error against ground-truth depth maps.
    EvalDepth {
        /// Directory written by `depth`.
        #[arg(long)]
        est: PathBuf,
        /// Dataset root or directory of `{id:08}.pfm` ground truth.
        #[arg(long)]
        gt: PathBuf,
    },
    /// Render a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        scene: SceneChoice,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        cameras: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth sampling statistics for one reference view.
    SweepInfo {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "ref")]
        reference: usize,
        #[arg(long, default_value_t = 5)]
        views: usize,
        #[arg(long, default_value = "auto", value_parser = parse_auto)]
        levels: Auto,
        #[arg(long, default_value_t = DEFAULT_REFINE_PLANES)]
        refine_planes: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_OFFSET_PX)]
        sample_offset: f64,
        #[arg(long)]
        range_offset: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneChoice {
    Plane,
    Sphere,
    Heightfield,
}

#[derive(clap::Args)]
struct DepthArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long = "ref")]
    reference: usize,
    /// Total views including the reference.
    #[arg(long, default_value_t = 5)]
    views: usize,
    /// Coarsest level index, or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    levels: Auto,
    /// Coarse plane count, or `auto` to derive it from the sample offset.
    #[arg(long, default_value = "96", value_parser = parse_auto)]
    coarse_planes: Auto,
    #[arg(long, default_value_t = DEFAULT_REFINE_PLANES)]
    refine_planes: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_OFFSET_PX)]
    sample_offset: f64,
    /// Residual search half-width in pixels (default: refine_planes / 2 * sample_offset).
    #[arg(long)]
    range_offset: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    tau: f64,
    /// Also write every level's cost and probability volume.
    #[arg(long)]
    dump_volumes: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FuseArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    depths: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    conf: f64,
    #[arg(long, default_value_t = 1.0)]
    reproj_px: f64,
    #[arg(long, default_value_t = 0.01)]
    rel_depth: f64,
    #[arg(long, default_value_t = 3)]
    min_views: usize,
    #[arg(long)]
    out: PathBuf,
}

/// A count that may be left to the program (`auto`).
#[derive(Clone, Copy, Debug)]
struct Auto(Option<usize>);

fn parse_auto(s: &str) -> std::result::Result<Auto, String> {
    if s == "auto" {
        Ok(Auto(None))
    } else {
        s.parse()
            .map(|n| Auto(Some(n)))
            .map_err(|_| format!("expected a non-negative integer or `auto`, got `{s}`"))
    }
}

fn depth_file(dir: &Path, id: usize, level: usize) -> PathBuf {
    dir.join(format!("depth_{id:08}_l{level}.pfm"))
}

fn conf_file(dir: &Path, id: usize, level: usize) -> PathBuf {
    dir.join(format!("conf_{id:08}_l{level}.pfm"))
}

fn meta_file(dir: &Path, id: usize) -> PathBuf {
    dir.join(format!("meta_{id:08}.json"))
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string(value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn run_depth(args: &DepthArgs, json: bool) -> Result<()> {
    let dataset = Dataset::open(&args.dataset)?;
    if args.views < 2 {
        return Err(Error::InvalidConfig("--views must be at least 2".into()));
    }
    let sources = dataset.select_sources(args.reference, args.views - 1)?;
    if sources.is_empty() {
        return Err(Error::Dataset("no source views available".into()));
    }
    let reference = dataset.load_view(args.reference)?;
    let source_views = sources
        .iter()
        .map(|&id| dataset.load_view(id))
        .collect::<Result<Vec<_>>>()?;
    let config = PipelineConfig {
        levels: args.levels.0,
        coarse_planes: args.coarse_planes.0,
        refine_planes: args.refine_planes,
        sample_offset_px: args.sample_offset,
        range_offset_px: args.range_offset,
        temperature: args.tau,
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut dump_err = None;
    let out = &args.out;
    let id = args.reference;
    let inference = infer_depth_observed(&reference, &source_views, &config, |cv, pv| {
        if !args.dump_volumes || dump_err.is_some() {
            return;
        }
        let l = cv.level;
        let res = write_volume(
            &VolumeDump::from_cost(cv),
            &out.join(format!("cost_{id:08}_l{l}.vol")),
        )
        .and_then(|_| {
            write_volume(
                &VolumeDump::from_probability(pv),
                &out.join(format!("prob_{id:08}_l{l}.vol")),
            )
        });
        if let Err(e) = res {
            dump_err = Some(e);
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }

    for map in &inference.levels {
        write_pfm(&PfmImage::from_depth(map), &depth_file(out, id, map.level))?;
        write_pfm(&PfmImage::from_confidence(map), &conf_file(out, id, map.level))?;
    }
    let meta = RunMetadata::new(id, sources.clone(), &config, &inference);
    let meta_path = meta_file(out, id);
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
        .map_err(|e| Error::io(&meta_path, e))?;

    emit(json, &meta, || {
        let mut s = format!(
            "reference {id}, sources {:?}, descriptor {}, tau {}\n",
            sources, meta.descriptor, meta.temperature
        );
        for r in &meta.levels {
            s += &format!(
                "level {}: {}x{} {} M={} interval={:.6}\n",
                r.level, r.width, r.height, r.hypothesis_kind, r.hypotheses_per_pixel, r.mean_interval
            );
        }
        s
    })
}

fn load_estimate(dir: &Path, id: usize, level: usize) -> Result<DepthMap> {
    let mut map = read_pfm(&depth_file(dir, id, level))?.to_depth(level);
    let conf_path = conf_file(dir, id, level);
    if conf_path.is_file() {
        let conf = read_pfm(&conf_path)?;
        if (conf.width, conf.height) != (map.width, map.height) {
            return Err(Error::Dataset(format!(
                "{}: size differs from its depth map",
                conf_path.display()
            )));
        }
        map.confidence = conf.data.iter().map(|&c| c as f64).collect();
    }
    Ok(map)
}

#[derive(Serialize)]
struct FuseReport {
    views: Vec<usize>,
    points: usize,
    surviving_pixels: Vec<usize>,
}

fn run_fuse(args: &FuseArgs, json: bool) -> Result<()> {
    let dataset = Dataset::open(&args.dataset)?;
    let cfg = FusionConfig {
        conf_min: args.conf,
        reproj_px_max: args.reproj_px,
        rel_depth_max: args.rel_depth,
        min_consistent_views: args.min_views,
    };
    cfg.validate()?;
    let ids: Vec<usize> = dataset
        .ids()
        .into_iter()
        .filter(|&id| depth_file(&args.depths, id, 0).is_file())
        .collect();
    if ids.len() < 2 {
        return Err(Error::Dataset(format!(
            "need full-resolution depth maps of at least two views in {}",
            args.depths.display()
        )));
    }
    let maps = ids
        .iter()
        .map(|&id| load_estimate(&args.depths, id, 0))
        .collect::<Result<Vec<_>>>()?;
    let cams = ids
        .iter()
        .map(|&id| dataset.camera(id))
        .collect::<Result<Vec<_>>>()?;
    let colors = ids
        .iter()
        .map(|&id| load_color_image(&dataset.view(id)?.image))
        .collect::<Result<Vec<_>>>()?;
    let filtered = consistency_filter(&maps, &cams, &cfg)?;
    let cloud = fuse(&filtered, &cams, &cfg, Some(&colors))?;
    write_ply(&cloud, &args.out)?;
    let report = FuseReport {
        views: ids,
        points: cloud.len(),
        surviving_pixels: filtered.iter().map(|m| m.valid_count()).collect(),
    };
    emit(json, &report, || {
        format!(
            "fused {} views into {} points -> {}\n",
            report.views.len(),
            report.points,
            args.out.display()
        )
    })
}

fn run_eval_cloud(est: &Path, gt: &Path, cap: f64, json: bool) -> Result<()> {
    let m = cloud_metrics(&read_ply(est)?, &read_ply(gt)?, cap)?;
    emit(json, &m, || {
        format!(
            "accuracy {}\ncompleteness {}\noverall {}\n",
            m.accuracy, m.completeness, m.overall
        )
    })
}

#[derive(Serialize)]
struct ViewDepthReport {
    id: usize,
    per_level: Vec<f64>,
    total: f64,
}

fn run_eval_depth(est: &Path, gt: &Path, json: bool) -> Result<()> {
    let gt_dir = if gt.join("depths").is_dir() {
        gt.join("depths")
    } else {
        gt.to_path_buf()
    };
    let mut levels_by_id: std::collections::BTreeMap<usize, usize> = Default::default();
    let entries = std::fs::read_dir(est).map_err(|e| Error::io(est, e))?;
    for entry in entries {
        let name = entry.map_err(|e| Error::io(est, e))?.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix("depth_").and_then(|r| r.strip_suffix(".pfm")) else {
            continue;
        };
        let Some((id, level)) = rest.split_once("_l") else {
            continue;
        };
        if let (Ok(id), Ok(level)) = (id.parse::<usize>(), level.parse::<usize>()) {
            let top = levels_by_id.entry(id).or_insert(0);
            *top = (*top).max(level);
        }
    }
    if levels_by_id.is_empty() {
        return Err(Error::Dataset(format!(
            "no depth maps found in {}",
            est.display()
        )));
    }
    let mut reports = Vec::new();
    for (&id, &top) in &levels_by_id {
        let estimates = (0..=top)
            .map(|l| load_estimate(est, id, l))
            .collect::<Result<Vec<_>>>()?;
        let gt_path = gt_dir.join(format!("{id:08}.pfm"));
        let truth = read_pfm(&gt_path)?.to_depth(0).pyramid(top);
        let r = l1_error(&estimates, &truth)?;
        reports.push(ViewDepthReport {
            id,
            per_level: r.per_level,
            total: r.total,
        });
    }
    emit(json, &reports, || {
        let mut s = String::new();
        for r in &reports {
            for (l, e) in r.per_level.iter().enumerate() {
                s += &format!("view {} level {l}: {e}\n", r.id);
            }
            s += &format!("view {} total: {}\n", r.id, r.total);
        }
        s
    })
}

fn run_synth(scene: SceneChoice, seed: u64, cameras: usize, out: &Path, json: bool) -> Result<()> {
    let spec = match scene {
        SceneChoice::Plane => SceneSpec::plane(seed, cameras),
        SceneChoice::Sphere => SceneSpec::sphere(seed, cameras),
        SceneChoice::Heightfield => SceneSpec::heightfield(seed, cameras),
    };
    let scene = Scene::build(&spec)?;
    write_scene(&scene, out)?;
    emit(json, &spec, || {
        format!(
            "wrote {} views of a {}x{} scene (seed {seed}) to {}\n",
            cameras,
            spec.width,
            spec.height,
            out.display()
        )
    })
}

#[derive(Serialize)]
struct SweepLevel {
    level: usize,
    width: usize,
    height: usize,
    interval: f64,
    search_range_min: Option<f64>,
    search_range_mean: Option<f64>,
    search_range_max: Option<f64>,
    degenerate_pixels: usize,
}

#[derive(Serialize)]
struct SweepInfo {
    reference: usize,
    sources: Vec<usize>,
    depth_min: f64,
    depth_max: f64,
    top_level: usize,
    derived_coarse_planes: usize,
    refine_planes: usize,
    range_offset_px: f64,
    levels: Vec<SweepLevel>,
}

#[allow(clippy::too_many_arguments)]
fn run_sweep_info(
    dataset: &Path,
    reference: usize,
    views: usize,
    levels: Auto,
    refine_planes: usize,
    sample_offset: f64,
    range_offset: Option<f64>,
    json: bool,
) -> Result<()> {
    let dataset = Dataset::open(dataset)?;
    let sources = dataset.select_sources(reference, views.saturating_sub(1).max(1))?;
    let ref_cam = dataset.camera(reference)?;
    let src_cams = sources
        .iter()
        .map(|&id| dataset.camera(id))
        .collect::<Result<Vec<_>>>()?;
    let first = src_cams
        .first()
        .ok_or_else(|| Error::Dataset("no source views available".into()))?;
    let config = PipelineConfig {
        levels: levels.0,
        refine_planes,
        sample_offset_px: sample_offset,
        range_offset_px: range_offset,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let top = config.top_level(ref_cam.width, ref_cam.height);
    let range_px = config.effective_range_offset();
    let mid = 0.5 * (ref_cam.depth_min + ref_cam.depth_max);
    let mut out = Vec::new();
    for level in (0..=top).rev() {
        let interval = depth_interval_for_offset(&ref_cam, &src_cams, level, sample_offset)?;
        let (w, h) = (level_extent(ref_cam.width, level), level_extent(ref_cam.height, level));
        let (r, s) = (ref_cam.at_level(level), first.at_level(level));
        let (mut lo, mut hi, mut sum, mut n, mut bad) = (f64::INFINITY, 0.0f64, 0.0, 0usize, 0);
        for y in 0..h {
            for x in 0..w {
                let p = Vector2::new(x as f64, y as f64);
                match depth_search_range(&r, &s, &p, mid, range_px) {
                    Ok((a, b)) => {
                        let sp = b - a;
                        lo = lo.min(sp);
                        hi = hi.max(sp);
                        sum += sp;
                        n += 1;
                    }
                    Err(_) => bad += 1,
                }
            }
        }
        out.push(SweepLevel {
            level,
            width: w,
            height: h,
            interval,
            search_range_min: (n > 0).then_some(lo),
            search_range_mean: (n > 0).then(|| sum / n as f64),
            search_range_max: (n > 0).then_some(hi),
            degenerate_pixels: bad,
        });
    }
    let top_interval = out[0].interval;
    let info = SweepInfo {
        reference,
        sources,
        depth_min: ref_cam.depth_min,
        depth_max: ref_cam.depth_max,
        top_level: top,
        derived_coarse_planes: planes_for_interval(&ref_cam, top_interval),
        refine_planes,
        range_offset_px: range_px,
        levels: out,
    };
    emit(json, &info, || {
        let mut s = format!(
            "reference {} sources {:?} depth range [{}, {}]\ncoarsest level {}: derived M = {}\n",
            info.reference,
            info.sources,
            info.depth_min,
            info.depth_max,
            info.top_level,
            info.derived_coarse_planes
        );
        for l in &info.levels {
            s += &format!(
                "level {} ({}x{}): interval {:.6}",
                l.level, l.width, l.height, l.interval
            );
            if let (Some(a), Some(m), Some(b)) =
                (l.search_range_min, l.search_range_mean, l.search_range_max)
            {
                s += &format!(", s_p min/mean/max {a:.6}/{m:.6}/{b:.6}");
            }
            s += &format!(", degenerate {}\n", l.degenerate_pixels);
        }
        s
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let json = cli.json;
    match cli.command {
        Command::Depth(args) => run_depth(&args, json),
        Command::Fuse(args) => run_fuse(&args, json),
        Command::EvalCloud { est, gt, cap } => run_eval_cloud(&est, &gt, cap, json),
        Command::EvalDepth { est, gt } => run_eval_depth(&est, &gt, json),
        Command::Synth {
            scene,
            seed,
            cameras,
            out,
        } => run_synth(scene, seed, cameras, &out, json),
        Command::SweepInfo {
            dataset,
            reference,
            views,
            levels,
            refine_planes,
            sample_offset,
            range_offset,
        } => run_sweep_info(
            &dataset,
            reference,
            views,
            levels,
            refine_planes,
            sample_offset,
            range_offset,
            json,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
