#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const WORDS: [&str; 16] = [
    "the", "council", "voted", "to", "close", "library", "on", "monday", "residents", "protested", "budget", "cuts", "mayor", "said",
    "plan", "was",
];

/// Small rated corpus. Summary 0 of every article is the reference.
pub fn dataset_jsonl(n_articles: usize) -> String {
    let mut out = String::new();
    for a in 0..n_articles {
        let article = format!(
            "The council voted to close the library on Monday. Residents protested the budget cuts. \
             The mayor said the plan was final. Article {a} ends here."
        );
        let summaries = [
            ("reference", "The council voted to close the library. Residents protested.", [0.9, 0.7]),
            ("sysA", "The council voted to close the library on Monday.", [0.6, 0.4]),
            ("sysB", "The mayor said the plan was final.", [-0.2, 0.0]),
            ("sysC", "Article ends here.", [-0.8, -0.6 + 0.01 * a as f64]),
        ];
        let sums: Vec<String> = summaries
            .iter()
            .map(|(sys, text, r)| format!(r#"{{"system":"{sys}","text":"{text}","ratings":[{},{}]}}"#, r[0], r[1]))
            .collect();
        writeln!(out, r#"{{"article_id":"a{a:02}","article":"{article}","summaries":[{}]}}"#, sums.join(",")).unwrap();
    }
    out
}

/// Deterministic 4-dimensional vectors for [`WORDS`], with a count header.
pub fn vectors_text() -> String {
    let mut out = format!("{} 4\n", WORDS.len());
    for (i, w) in WORDS.iter().enumerate() {
        let x = i as f64;
        writeln!(out, "{w} {} {} {} {}", (x * 0.7).sin(), (x * 1.3).cos(), x / 16.0 - 0.5, ((x * 2.1).sin() * 0.5)).unwrap();
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Run {
    let mut argv = vec!["sumreward"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = sumreward::cli::run(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
