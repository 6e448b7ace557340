use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use maskfx_client::Client;
use maskfx_core::api::{ClassList, FilterList, RenderRequest};
use maskfx_core::config::Settings;
use maskfx_core::filters::FilterSchema;
use maskfx_core::segmentation::{load_manifest_with, segmenter_from_env};
use maskfx_core::selection::{compose_class_masks, rank_class_masks, DEFAULT_SCORE_THRESHOLD};
use maskfx_core::{
    decode_image, read_image, run_external_segmenter, write_image, ClassSummary, ClassTable,
    FilterRegistry, PriorityTable, RasterImage, Renderer, SegmentationManifest,
};
use maskfx_service::ServiceConfig;

use crate::args::{ClassesArgs, Cli, Command, FiltersArgs, RenderArgs, ServeArgs};

pub const DEFAULT_PORT: u16 = 8080;

pub enum Failure {
    /// Bad invocation; reported with usage text and exit status 2.
    Usage {
        subcommand: &'static str,
        message: String,
    },
    /// Anything that went wrong while doing the work; exit status 1.
    Pipeline(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Pipeline(e)
    }
}

type Result<T, E = Failure> = std::result::Result<T, E>;

fn usage(subcommand: &'static str, message: impl Into<String>) -> Failure {
    Failure::Usage {
        subcommand,
        message: message.into(),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => Settings::load(p).context("reading config")?,
        None => Settings::default(),
    };
    let settings = base.merged_with(cli.settings());
    match &cli.command {
        Command::Render(a) => render(a, settings),
        Command::Classes(a) => classes(a, settings),
        Command::Filters(a) => filters(a),
        Command::Serve(a) => serve(a, settings),
    }
}

fn renderer(s: &Settings) -> anyhow::Result<Renderer> {
    let classes = match &s.classes.table {
        Some(p) => ClassTable::load(p).with_context(|| format!("class table {}", p.display()))?,
        None => ClassTable::coco(),
    };
    let priority = match &s.classes.priority {
        Some(p) => PriorityTable::load(p, &classes)
            .with_context(|| format!("priority file {}", p.display()))?,
        None => PriorityTable::default(),
    };
    Ok(Renderer {
        registry: FilterRegistry::with_builtins(),
        classes,
        priority,
    })
}

/// Segmenter template: flag, then config file, then the environment.
fn segmenter_template(s: &Settings) -> Option<String> {
    s.segmenter.command.clone().or_else(segmenter_from_env)
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn load_manifest_file(path: &Path, classes: &ClassTable) -> anyhow::Result<SegmentationManifest> {
    load_manifest_with(path, classes).with_context(|| format!("manifest {}", path.display()))
}

fn report(class: Option<(&str, u32)>, mask_area: usize, notice: Option<&str>) {
    match class {
        Some((name, id)) => println!("class: {name} (id {id})"),
        None => println!("class: none"),
    }
    println!("mask area: {mask_area}");
    if let Some(n) = notice {
        eprintln!("note: {n}");
    }
}

enum ManifestSource {
    File(PathBuf),
    Segmenter(String),
}

fn render(args: &RenderArgs, s: Settings) -> Result<()> {
    const CMD: &str = "render";
    let r = &s.render;
    let image_path = r.image.clone().ok_or_else(|| usage(CMD, "--image is required"))?;
    let out_path = r.out.clone().ok_or_else(|| usage(CMD, "--out is required"))?;
    if r.fg.is_none() || r.bg.is_none() {
        return Err(usage(CMD, "both --fg and --bg are required"));
    }
    let source = if args.segment {
        match segmenter_template(&s) {
            Some(t) => ManifestSource::Segmenter(t),
            None if args.remote.is_some() => ManifestSource::Segmenter(String::new()),
            None => {
                return Err(usage(
                    CMD,
                    "--segment needs a segmenter: pass --segmenter, set [segmenter] command, or set MASKFX_SEGMENTER",
                ))
            }
        }
    } else if let Some(m) = &r.manifest {
        ManifestSource::File(m.clone())
    } else {
        return Err(usage(CMD, "one of --manifest or --segment is required"));
    };

    let renderer = renderer(&s)?;
    let config = r
        .to_config(&s.morphology, &renderer.classes)
        .map_err(anyhow::Error::from)?;

    if let Some(url) = &args.remote {
        let manifest = match &source {
            ManifestSource::File(p) => Some(load_manifest_file(p, &renderer.classes)?),
            ManifestSource::Segmenter(_) => None,
        };
        let request = RenderRequest {
            class_id: config.class_override,
            fg: r.fg.clone().unwrap_or_default(),
            bg: r.bg.clone().unwrap_or_default(),
            params: None,
            feather: Some(config.feather_sigma),
            morphology: Some(s.morphology.clone()),
            score_threshold: Some(config.score_threshold),
        };
        let rendered = runtime()?.block_on(async {
            let client = Client::new(url)?;
            let bytes = std::fs::read(&image_path)
                .with_context(|| format!("reading {}", image_path.display()))?;
            let session = client.create_session(bytes).await?;
            let id = session.session_id;
            let result = async {
                if let Some(m) = &manifest {
                    client.put_manifest(&id, m.to_json()).await?;
                }
                client.render(&id, &request).await
            }
            .await;
            let _ = client.delete_session(&id).await;
            anyhow::Ok(result?)
        })?;
        let image = decode_image(&rendered.png, Path::new("service response"))
            .map_err(anyhow::Error::from)?;
        write_output(&image, &out_path)?;
        let class = rendered.class_name.as_deref().zip(rendered.class_id);
        report(class, rendered.mask_area, rendered.notice.as_deref());
        return Ok(());
    }

    let image = read_image(&image_path).map_err(anyhow::Error::from)?;
    let manifest = match &source {
        ManifestSource::File(p) => load_manifest_file(p, &renderer.classes)?,
        ManifestSource::Segmenter(t) => run_external_segmenter(&image_path, t, &renderer.classes)
            .map_err(anyhow::Error::from)?,
    };
    let out = renderer
        .render(&image, &manifest, &config)
        .map_err(anyhow::Error::from)?;
    write_output(&out.image, &out_path)?;
    let class = out.selected.as_ref().map(|c| (c.class_name.as_str(), c.class_id));
    report(class, out.mask_area, out.notice.as_deref());
    Ok(())
}

fn write_output(image: &RasterImage, path: &Path) -> anyhow::Result<()> {
    write_image(image, path).with_context(|| format!("writing {}", path.display()))
}

fn classes(args: &ClassesArgs, s: Settings) -> Result<()> {
    let threshold = s.render.score_threshold.unwrap_or(DEFAULT_SCORE_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(anyhow!("score threshold {threshold} outside [0, 1]").into());
    }
    let renderer = renderer(&s)?;
    let ranked: Vec<ClassSummary> = match &args.remote {
        Some(url) => {
            let image_path = s.render.image.clone().unwrap_or_default();
            let manifest = s
                .render
                .manifest
                .as_deref()
                .map(|p| load_manifest_file(p, &renderer.classes))
                .transpose()?;
            runtime()?.block_on(async {
                let client = Client::new(url)?;
                let bytes = std::fs::read(&image_path)
                    .with_context(|| format!("reading {}", image_path.display()))?;
                let id = client.create_session(bytes).await?.session_id;
                let result = async {
                    if let Some(m) = &manifest {
                        client.put_manifest(&id, m.to_json()).await?;
                    }
                    client.classes(&id, Some(threshold)).await
                }
                .await;
                let _ = client.delete_session(&id).await;
                anyhow::Ok(result?)
            })?
        }
        None => {
            let path = s
                .render
                .manifest
                .clone()
                .ok_or_else(|| usage("classes", "--manifest is required"))?;
            let manifest = load_manifest_file(&path, &renderer.classes)?;
            rank_class_masks(compose_class_masks(&manifest, threshold), &renderer.priority)
                .iter()
                .map(|c| c.summary())
                .collect()
        }
    };
    if args.json {
        let list = ClassList { classes: ranked };
        println!("{}", serde_json::to_string_pretty(&list).map_err(anyhow::Error::from)?);
        return Ok(());
    }
    println!("{:<5} {:<16} {:>4} {:>9} {:>9}", "rank", "class", "id", "area", "instances");
    for (i, c) in ranked.iter().enumerate() {
        println!(
            "{:<5} {:<16} {:>4} {:>9} {:>9}",
            i + 1,
            c.class_name,
            c.class_id,
            c.area,
            c.instance_count
        );
    }
    Ok(())
}

fn describe(schema: &FilterSchema) -> String {
    let mut out = format!("{:<20} {}\n", schema.keyword, schema.description);
    for p in &schema.params {
        let open = if p.min_inclusive { '[' } else { '(' };
        let kind = if p.integer { "int" } else { "real" };
        out.push_str(&format!(
            "    {:<14} {kind:<4} {open}{}, {}]  default {}  {}\n",
            p.name, p.min, p.max, p.default, p.description
        ));
    }
    out
}

fn filters(args: &FiltersArgs) -> Result<()> {
    let schemas = match &args.remote {
        Some(url) => runtime()?.block_on(async { anyhow::Ok(Client::new(url)?.filters().await?) })?,
        None => FilterRegistry::with_builtins().schemas(),
    };
    if args.json {
        let list = FilterList { filters: schemas };
        println!("{}", serde_json::to_string_pretty(&list).map_err(anyhow::Error::from)?);
    } else {
        for s in &schemas {
            print!("{}", describe(s));
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs, s: Settings) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let config = ServiceConfig {
        renderer: renderer(&s)?,
        segmenter: segmenter_template(&s),
        session_ttl: s
            .serve
            .session_ttl_secs
            .map(Duration::from_secs)
            .unwrap_or(maskfx_service::DEFAULT_SESSION_TTL),
        static_dir: s.serve.static_dir.clone(),
        ..ServiceConfig::default()
    };
    if let Some(dir) = &config.static_dir {
        if !dir.is_dir() {
            return Err(anyhow!("static directory {} does not exist", dir.display()).into());
        }
    }
    let port = s.serve.port.unwrap_or(DEFAULT_PORT);
    let addr = format!("{}:{port}", args.host);
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        let local = listener.local_addr()?;
        println!("listening on http://{local}");
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        maskfx_service::serve(listener, config, shutdown)
            .await
            .context("service failed")
    })?;
    Ok(())
}
