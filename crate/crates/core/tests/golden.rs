//! The canonical transcript in `docs/` must match what the server emits.
//! Regenerate with `HWSIM_BLESS=1 cargo test -p hwsim-core --test golden`.

use std::fs;
use std::io::BufReader;
use std::os::unix::net::UnixStream;
use std::path::PathBuf;
use std::thread;

use hwsim_core::protocol::{run_client, serve_session, Message};
use hwsim_core::runtime::{RunConfig, ScriptedPlanner};
use hwsim_core::scenario::bundled;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/transcripts/coffee_gt.jsonl")
}

fn transcript() -> String {
    let ep = bundled::episode("coffee").unwrap();
    let (server, peer) = UnixStream::pair().unwrap();
    let ep2 = ep.clone();
    let client = thread::spawn(move || {
        let r = BufReader::new(peer.try_clone().unwrap());
        run_client(&mut ScriptedPlanner::ground_truth(&ep2), r, peer).unwrap()
    });
    let s = serve_session(
        &ep,
        &RunConfig::default(),
        BufReader::new(server.try_clone().unwrap()),
        server,
    );
    client.join().unwrap();
    s.transcript
        .iter()
        .map(|t| serde_json::to_string(t).unwrap() + "\n")
        .collect()
}

#[test]
fn canonical_transcript_is_current() {
    let now = transcript();
    let path = golden_path();
    if std::env::var_os("HWSIM_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &now).unwrap();
    }
    let want = fs::read_to_string(&path).expect("golden transcript; run with HWSIM_BLESS=1");
    assert_eq!(now, want, "transcript changed; re-bless and review docs/protocol.md");
}

#[test]
fn every_golden_line_is_a_valid_message() {
    let text = fs::read_to_string(golden_path()).unwrap();
    for l in text.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        Message::from_line(v["line"].as_str().unwrap()).unwrap();
    }
}
