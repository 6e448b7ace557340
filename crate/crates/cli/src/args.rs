use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use maskfx_core::config::{
    ClassSettings, MorphologySettings, RenderSettings, SegmenterSettings, ServeSettings, Settings,
};

/// Instance-aware artistic filtering: filter the most important object class
/// and the background of a photo with two different effects.
#[derive(Debug, Parser)]
#[command(name = "maskfx", version)]
pub struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true, value_name = "P")]
    pub config: Option<PathBuf>,

    /// Class table file (`<id> <name>` per line) replacing the COCO table.
    #[arg(long, global = true, value_name = "P")]
    pub class_table: Option<PathBuf>,

    /// Class priority file (one class name per line, highest first).
    #[arg(long, global = true, value_name = "P")]
    pub priority: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter foreground and background separately and fuse them.
    Render(RenderArgs),
    /// Print the ranked class list of a manifest.
    Classes(ClassesArgs),
    /// List the registered filters and their parameters.
    Filters(FiltersArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Input image; `.ppm` or `.png`.
    #[arg(long, value_name = "P")]
    pub image: Option<PathBuf>,
    /// Segmentation manifest (JSON).
    #[arg(long, value_name = "P", conflicts_with = "segment")]
    pub manifest: Option<PathBuf>,
    /// Produce the manifest with the configured external segmenter.
    #[arg(long)]
    pub segment: bool,
    /// Segmenter command template with `{input}` and `{output}`
    /// (default: config file, then MASKFX_SEGMENTER).
    #[arg(long, value_name = "CMD")]
    pub segmenter: Option<String>,
    /// Foreground filter, `keyword[:name=value,...]`.
    #[arg(long, value_name = "SPEC")]
    pub fg: Option<String>,
    /// Background filter, `keyword[:name=value,...]`.
    #[arg(long, value_name = "SPEC")]
    pub bg: Option<String>,
    /// Class name or id to filter instead of the top-ranked one.
    #[arg(long, value_name = "NAME")]
    pub class: Option<String>,
    /// Ignore instances scoring below this (default 0.5).
    #[arg(long, value_name = "F")]
    pub score_threshold: Option<f64>,
    /// Gaussian feather sigma for the mask edge; 0 gives a hard edge.
    #[arg(long, value_name = "F")]
    pub feather: Option<f64>,
    #[command(flatten)]
    pub morphology: MorphologyArgs,
    /// Output image; `.ppm` or `.png`.
    #[arg(long, value_name = "P")]
    pub out: Option<PathBuf>,
    /// Render on a running service instead of locally.
    #[arg(long, value_name = "URL")]
    pub remote: Option<String>,
}

#[derive(Debug, Args)]
pub struct MorphologyArgs {
    /// Skip mask cleanup.
    #[arg(long)]
    pub no_morphology: bool,
    /// `square` or `disk`.
    #[arg(long, value_name = "SHAPE")]
    pub open_shape: Option<String>,
    /// Opening radius (default 2).
    #[arg(long, value_name = "N")]
    pub open_radius: Option<usize>,
    /// `square` or `disk`.
    #[arg(long, value_name = "SHAPE")]
    pub close_shape: Option<String>,
    /// Closing radius (default 2).
    #[arg(long, value_name = "N")]
    pub close_radius: Option<usize>,
    /// Components smaller than this fraction of the image are dropped.
    #[arg(long, value_name = "F")]
    pub min_area_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassesArgs {
    #[arg(long, value_name = "P")]
    pub manifest: Option<PathBuf>,
    /// Ignore instances scoring below this (default 0.5).
    #[arg(long, value_name = "F")]
    pub score_threshold: Option<f64>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Ask a running service; requires --image.
    #[arg(long, value_name = "URL", requires = "image")]
    pub remote: Option<String>,
    /// Image uploaded with --remote.
    #[arg(long, value_name = "P", requires = "remote")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FiltersArgs {
    #[arg(long)]
    pub json: bool,
    /// List the registry of a running service.
    #[arg(long, value_name = "URL")]
    pub remote: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// 0 picks a free port.
    #[arg(long, value_name = "N")]
    pub port: Option<u16>,
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of static assets served under `/`.
    #[arg(long, value_name = "P")]
    pub static_dir: Option<PathBuf>,
    /// Idle seconds before a session is dropped.
    #[arg(long, value_name = "SECS")]
    pub session_ttl: Option<u64>,
    /// Segmenter command template run on every upload.
    #[arg(long, value_name = "CMD")]
    pub segmenter: Option<String>,
}

impl Cli {
    /// Flags as a settings layer, to be merged over the config file.
    pub fn settings(&self) -> Settings {
        let mut s = Settings {
            classes: ClassSettings {
                table: self.class_table.clone(),
                priority: self.priority.clone(),
            },
            ..Settings::default()
        };
        match &self.command {
            Command::Render(r) => {
                s.render = RenderSettings {
                    image: r.image.clone(),
                    manifest: r.manifest.clone(),
                    out: r.out.clone(),
                    fg: r.fg.clone(),
                    bg: r.bg.clone(),
                    class: r.class.clone(),
                    score_threshold: r.score_threshold,
                    feather: r.feather,
                };
                s.morphology = r.morphology.settings();
                s.segmenter = SegmenterSettings {
                    command: r.segmenter.clone(),
                };
            }
            Command::Classes(c) => {
                s.render.manifest = c.manifest.clone();
                s.render.image = c.image.clone();
                s.render.score_threshold = c.score_threshold;
            }
            Command::Filters(_) => {}
            Command::Serve(v) => {
                s.serve = ServeSettings {
                    port: v.port,
                    static_dir: v.static_dir.clone(),
                    session_ttl_secs: v.session_ttl,
                };
                s.segmenter.command = v.segmenter.clone();
            }
        }
        s
    }
}

impl MorphologyArgs {
    fn settings(&self) -> MorphologySettings {
        MorphologySettings {
            enabled: self.no_morphology.then_some(false),
            open_shape: self.open_shape.clone(),
            open_radius: self.open_radius,
            close_shape: self.close_shape.clone(),
            close_radius: self.close_radius,
            min_area_fraction: self.min_area_fraction,
        }
    }
}
