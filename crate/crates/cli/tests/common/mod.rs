#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use specmix_core::dsp::{write_wav, WaveBuffer};

pub fn specmix(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_specmix"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("SPECMIX_THREADS", n.to_string()),
        None => cmd.env_remove("SPECMIX_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Deterministic tone plus a little noise.
pub fn tone(len: usize, rate: u32, freq: f64, seed: u64) -> WaveBuffer {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let samples = (0..len)
        .map(|n| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let jitter = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let t = n as f64 / rate as f64;
            (0.4 * (2.0 * std::f64::consts::PI * freq * t).sin() + 0.05 * jitter) as f32
        })
        .collect();
    WaveBuffer::new(samples, rate).unwrap()
}

/// `n` clips of varying length with labels cycling through `classes`.
pub fn classification_dataset(dir: &Path, n: usize, classes: &[&str]) -> PathBuf {
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).unwrap();
    let mut manifest = String::from("classification\n");
    for i in 0..n {
        let name = format!("clip{i}.wav");
        let len = 30_000 + 2_000 * (i % 5);
        write_wav(audio.join(&name), &tone(len, 44_100, 220.0 * (1 + i % 7) as f64, i as u64)).unwrap();
        manifest.push_str(&format!("audio/{name}\t{}\n", classes[i % classes.len()]));
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

pub fn enhancement_dataset(dir: &Path, n: usize) -> PathBuf {
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).unwrap();
    let mut manifest = String::from("enhancement\n");
    for i in 0..n {
        let len = 12_000 + 3_000 * i;
        let clean = tone(len, 16_000, 300.0 + 50.0 * i as f64, 100 + i as u64);
        let other = tone(len, 16_000, 1_700.0, 200 + i as u64);
        let noisy: Vec<f32> = clean.samples().iter().zip(other.samples()).map(|(s, n)| s + 0.5 * n).collect();
        write_wav(audio.join(format!("clean{i}.wav")), &clean).unwrap();
        write_wav(audio.join(format!("noisy{i}.wav")), &WaveBuffer::new(noisy, 16_000).unwrap()).unwrap();
        manifest.push_str(&format!("audio/noisy{i}.wav\taudio/clean{i}.wav\n"));
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

pub fn extract(manifest: &Path, task: &str, out: &Path) -> Output {
    specmix(
        &["extract", "--manifest", manifest.to_str().unwrap(), "--task", task, "--out", out.to_str().unwrap()],
        None,
    )
}

pub fn augment(index: &Path, out: &Path, extra: &[&str], threads: Option<usize>) -> Output {
    let mut args = vec!["augment", "--index", index.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    specmix(&args, threads)
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}
