use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use maskfx_core::read_image;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(rel)
}

fn maskfx() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_maskfx"));
    cmd.env_remove("MASKFX_SEGMENTER");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn render_cmd(scene: &str, fg: &str, bg: &str, out: &Path) -> Command {
    let mut cmd = maskfx();
    cmd.arg("render")
        .arg("--image")
        .arg(data(&format!("samples/{scene}.ppm")))
        .arg("--manifest")
        .arg(data(&format!("samples/{scene}.json")))
        .args(["--fg", fg, "--bg", bg, "--out"])
        .arg(out);
    cmd
}

#[test]
fn identity_render_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.ppm");
    let res = run(render_cmd("street", "preserve", "preserve", &out).args(["--feather", "0", "--no-morphology"]));
    assert!(res.status.success(), "{}", text(&res.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(data("samples/street.ppm")).unwrap());
}

#[test]
fn golden_composite_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("street.png");
    let res = run(&mut render_cmd("street", "detail-enhancement", "gray", &out));
    assert!(res.status.success(), "{}", text(&res.stderr));
    let stdout = text(&res.stdout);
    assert!(stdout.contains("class: person (id 1)"), "{stdout}");
    assert!(stdout.contains("mask area: "));
    let golden = read_image(data("golden/street__detail-enhancement__gray.png")).unwrap();
    assert_eq!(read_image(&out).unwrap(), golden);
}

#[test]
fn missing_image_is_a_usage_error() {
    let res = run(maskfx().args(["render", "--manifest", "a.json", "--fg", "preserve", "--bg", "gray", "--out", "b.ppm"]));
    assert_eq!(res.status.code(), Some(2));
    let err = text(&res.stderr);
    assert!(err.contains("--image") && err.contains("Usage"), "{err}");

    let res = run(maskfx().args(["render", "--image", "a.ppm", "--fg", "preserve", "--bg", "gray", "--out", "b.ppm"]));
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res.stderr).contains("--manifest"));
    assert_eq!(run(maskfx().args(["render", "--bogus"])).status.code(), Some(2));
}

#[test]
fn pipeline_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.png");
    let res = run(&mut render_cmd("cat", "sparkle", "gray", &out));
    assert_eq!(res.status.code(), Some(1));
    assert!(text(&res.stderr).contains("sparkle"));
    assert!(!out.exists());

    let mut cmd = maskfx();
    cmd.args(["render", "--manifest"]).arg(data("samples/cat.json"));
    cmd.args(["--image", "/nonexistent.ppm", "--fg", "gray", "--bg", "gray", "--out"]).arg(&out);
    assert_eq!(run(&mut cmd).status.code(), Some(1));
}

#[test]
fn classes_lists_person_first() {
    let res = run(maskfx().arg("classes").arg("--manifest").arg(data("samples/street.json")));
    assert!(res.status.success());
    let stdout = text(&res.stdout);
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{stdout}");
    assert!(rows[0].contains("person") && rows[1].contains("bus"), "{stdout}");

    let res = run(maskfx().args(["classes", "--json", "--score-threshold", "0.3", "--manifest"]).arg(data("samples/street.json")));
    let list: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(list["classes"].as_array().unwrap().len(), 3);
    assert_eq!(list["classes"][0]["class_name"], "person");
}

#[test]
fn empty_manifest_gives_an_empty_table() {
    let res = run(maskfx().arg("classes").arg("--manifest").arg(data("samples/empty.json")));
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(text(&res.stdout).lines().count(), 1);
}

#[test]
fn corrupt_manifest_exits_one_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"image_width": 4, "instances": "nope"}"#).unwrap();
    let res = run(maskfx().arg("classes").arg("--manifest").arg(&path));
    assert_eq!(res.status.code(), Some(1));
    let err = text(&res.stderr);
    assert!(err.contains("bad.json") && err.contains("schema"), "{err}");
}

#[test]
fn filters_lists_the_registry() {
    let res = run(maskfx().arg("filters"));
    assert!(res.status.success());
    let stdout = text(&res.stdout);
    for k in ["preserve", "gray-blur", "bilateral", "edge-preserve", "pencil-sketch", "median-blur"] {
        assert!(stdout.lines().any(|l| l.starts_with(k)), "{k}");
    }
}

#[test]
fn segmenter_from_environment_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.ppm");
    let stub = format!("sh '{}' {{input}} {{output}}", data("stubs/full_frame.sh").display());
    let mut cmd = maskfx();
    cmd.args(["render", "--segment", "--no-morphology", "--fg", "gray", "--bg", "preserve", "--image"])
        .arg(data("samples/cat.ppm"))
        .arg("--out")
        .arg(&out)
        .env("MASKFX_SEGMENTER", &stub);
    let res = run(&mut cmd);
    assert!(res.status.success(), "{}", text(&res.stderr));
    let stdout = text(&res.stdout);
    assert!(stdout.contains("class: person") && stdout.contains(&format!("mask area: {}", 160 * 120)), "{stdout}");

    let failing = format!("sh '{}' {{input}} {{output}}", data("stubs/failing.sh").display());
    let mut cmd = maskfx();
    cmd.args(["render", "--segment", "--fg", "gray", "--bg", "preserve", "--image"])
        .arg(data("samples/cat.ppm"))
        .arg("--out")
        .arg(&out)
        .env("MASKFX_SEGMENTER", &stub)
        .args(["--segmenter", &failing]);
    let res = run(&mut cmd);
    assert_eq!(res.status.code(), Some(1));
    assert!(text(&res.stderr).contains("model weights not found"));

    let mut cmd = maskfx();
    cmd.args(["render", "--segment", "--fg", "gray", "--bg", "gray", "--out", "x.ppm", "--image"])
        .arg(data("samples/cat.ppm"));
    assert_eq!(run(&mut cmd).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("maskfx.toml");
    std::fs::write(
        &config,
        format!(
            "[render]\nimage = {:?}\nmanifest = {:?}\nfg = \"pencil-sketch\"\nbg = \"gray\"\n",
            data("samples/street.ppm"),
            data("samples/street.json")
        ),
    )
    .unwrap();
    let from_file = dir.path().join("file.png");
    let res = run(maskfx().arg("--config").arg(&config).arg("render").arg("--out").arg(&from_file));
    assert!(res.status.success(), "{}", text(&res.stderr));

    let overridden = dir.path().join("flag.png");
    let res = run(maskfx().arg("--config").arg(&config).args(["render", "--fg", "detail-enhancement", "--out"]).arg(&overridden));
    assert!(res.status.success());
    let golden = read_image(data("golden/street__detail-enhancement__gray.png")).unwrap();
    assert_eq!(read_image(&overridden).unwrap(), golden);
    assert_ne!(read_image(&from_file).unwrap(), golden);

    let res = run(maskfx().arg("--config").arg(dir.path().join("missing.toml")).arg("filters"));
    assert_eq!(res.status.code(), Some(1));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server() -> (Server, String) {
    let mut child = maskfx()
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    (Server(child), url)
}

#[test]
fn remote_render_matches_local_render() {
    let (_server, url) = start_server();
    let dir = tempfile::tempdir().unwrap();
    for (fg, bg) in [("detail-enhancement", "gray"), ("pencil-sketch", "bilateral:sigma_space=2")] {
        let local = dir.path().join("local.ppm");
        let remote = dir.path().join("remote.ppm");
        let a = run(render_cmd("park", fg, bg, &local).args(["--feather", "1.5", "--class", "dog"]));
        let b = run(render_cmd("park", fg, bg, &remote).args(["--feather", "1.5", "--class", "dog", "--remote", &url]));
        assert!(a.status.success() && b.status.success(), "{}", text(&b.stderr));
        assert_eq!(std::fs::read(&local).unwrap(), std::fs::read(&remote).unwrap());
        assert_eq!(text(&a.stdout), text(&b.stdout));
    }

    let res = run(maskfx().args(["filters", "--json", "--remote", &url]));
    let list: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(list["filters"].as_array().unwrap().len() >= 8);

    let res = run(maskfx().args(["classes", "--remote", &url, "--image"]).arg(data("samples/street.ppm")).arg("--manifest").arg(data("samples/street.json")));
    assert!(text(&res.stdout).lines().nth(1).unwrap().contains("person"));

    let out = dir.path().join("x.png");
    let res = run(render_cmd("cat", "vortex", "gray", &out).args(["--remote", &url]));
    assert_eq!(res.status.code(), Some(1));
    assert!(text(&res.stderr).contains("vortex"));
}
