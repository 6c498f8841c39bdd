use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use raygroup::config::PipelineConfig;
use raygroup::eval::{ApMethod, DEFAULT_IOU_THRESHOLDS};
use raygroup::pipeline::{report_json, run_eval, run_pipeline, run_synth, synth_outputs};

#[derive(Parser)]
#[command(
    name = "raygroup",
    version,
    about = "Ray-based grouping geometry engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grouping pipeline on one scene and write report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Scene stem or .pts/.ann path.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write scene.ply, seeds.ply and anchors.ply.
        #[arg(long)]
        ply: bool,
    },
    /// Score detections against ground truth; prints a JSON report.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated IoU thresholds.
        #[arg(long, value_delimiter = ',')]
        iou: Option<Vec<f64>>,
        /// Pipeline config supplying thresholds, AP method and NMS threshold.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eleven_point: bool,
        /// Apply class-wise NMS at this IoU before scoring.
        #[arg(long)]
        nms: Option<f64>,
    },
    /// Generate a synthetic annotated scene.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> raygroup::Result<()> {
    match cli.command {
        Command::Run {
            config,
            scene,
            out,
            ply,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = run_pipeline(&cfg, &scene, &out, ply)?;
            eprintln!(
                "{} clusters ({} positive), report in {}",
                report.grouping.num_clusters,
                report.grouping.num_positive,
                out.join("report.json").display()
            );
        }
        Command::Eval {
            dets,
            gt,
            iou,
            config,
            eleven_point,
            nms,
        } => {
            let cfg = config.as_deref().map(PipelineConfig::load).transpose()?;
            let thresholds = iou
                .or_else(|| cfg.as_ref().map(|c| c.iou_thresholds.clone()))
                .unwrap_or_else(|| DEFAULT_IOU_THRESHOLDS.to_vec());
            let method = if eleven_point {
                ApMethod::ElevenPoint
            } else {
                cfg.as_ref().map_or(ApMethod::AllPoint, |c| c.ap_method)
            };
            let nms = nms.or_else(|| cfg.as_ref().map(|c| c.nms_threshold));
            let report = run_eval(&dets, &gt, &thresholds, method, nms)?;
            print!("{}", report_json(&report));
        }
        Command::Synth { spec, out } => {
            let scene = run_synth(&spec, &out)?;
            let (pts, ann) = synth_outputs(&out);
            eprintln!(
                "{} points, {} boxes -> {} {}",
                scene.cloud.len(),
                scene.annotation.boxes.len(),
                pts.display(),
                ann.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
