//! Every command in the README's shell examples runs and exits 0.

use std::process::Command;

#[test]
fn readme_examples_succeed() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let mut in_shell = false;
    let mut commands = Vec::new();
    for line in readme.lines() {
        match line.trim() {
            "```sh" => in_shell = true,
            "```" => in_shell = false,
            l if in_shell && l.starts_with("ucs ") => commands.push(l.to_owned()),
            _ => {}
        }
    }
    assert!(commands.len() >= 5, "found {commands:?}");

    let dir = tempfile::tempdir().unwrap();
    for cmd in &commands {
        let status = Command::new(env!("CARGO_BIN_EXE_ucs"))
            .args(cmd.split_whitespace().skip(1))
            .current_dir(dir.path())
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "`{cmd}` exited with {status}");
    }
}
