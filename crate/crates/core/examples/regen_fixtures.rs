//! Regenerates the canned LM outputs under fixtures/toy/lm. Run from the
//! workspace root: `cargo run -p sharpen-core --example regen_fixtures`.

use std::collections::HashMap;
use std::path::Path;
use sharpen_core::pipeline::{Pipeline, PipelineConfig};
use sharpen_core::querygen::{build_contrastive_prompt, build_simple_prompt, prompt_hash};
use sharpen_core::Corpus;

fn main() {
    let dir = Path::new("fixtures/toy");
    let mut cfg = PipelineConfig::load(&dir.join("config.json")).unwrap();
    let tmp = std::env::temp_dir().join("mkfixtures");
    let _ = std::fs::remove_dir_all(&tmp);
    cfg.paths.workdir = tmp.clone();
    let p = Pipeline::new(cfg.clone()).unwrap();
    p.embed().unwrap();
    let refs = p.select_refs().unwrap();
    let docs = sharpen_core::load_corpus(&cfg.paths.corpus).unwrap();
    let corpus = Corpus::new(docs.clone()).unwrap();
    let qs: HashMap<&str, [&str; 2]> = [
        ("d01", ["feeding a wild starter culture", "sour tang from a long cold proof"]),
        ("d02", ["caraway seeds in rye loaf", "baking bread with dry yeast packets"]),
        ("d03", ["filter items in a list expression", "nested loops inside one line"]),
        ("d04", ["build a mapping from key value pairs", "invert a dictionary in one line"]),
        ("d05", ["fever and chills from influenza", "muscle aches with fatigue in winter"]),
        ("d06", ["sneezing and itchy eyes in spring", "runny nose caused by pollen"]),
        ("d07", ["deduct rent and utilities for a home workspace", "self employed internet expense"]),
        ("d08", ["receipts needed for charity gifts", "limits on donations to qualified organizations"]),
        ("d09", ["weekly long run mileage", "taper before a 26 mile race"]),
        ("d10", ["brick workouts for swim bike run", "open water swim sessions"]),
    ]
    .into_iter()
    .collect();
    let out = dir.join("lm");
    let body = |a: &str, b: &str| {
        format!("<PLAN>Focus on what only this document covers.</PLAN>\n<QUERY>{a}</QUERY>\n<PLAN>Use a detail absent from the other text.</PLAN>\n<QUERY>{b}</QUERY>\n")
    };
    for r in &refs {
        let d = corpus.get(&r.doc_id).unwrap();
        let [a, b] = qs[d.id.as_str()];
        for (i, rid) in r.reference_ids.iter().enumerate() {
            let prompt = build_contrastive_prompt(d, corpus.get(rid).unwrap(), &cfg.prompt);
            // second reference repeats one query and adds a variant
            let text = if i == 0 { body(a, b) } else { body(b, &format!("{a} explained")) };
            std::fs::write(out.join(format!("{}.txt", prompt_hash(&prompt))), text).unwrap();
        }
    }
    for d in &docs {
        let [a, _] = qs[d.id.as_str()];
        let prompt = build_simple_prompt(d, &cfg.prompt);
        let text = format!("<PLAN>Ask about the main point.</PLAN>\n<QUERY>{}</QUERY>\n", d.title.as_deref().unwrap_or(a).to_lowercase());
        std::fs::write(out.join(format!("{}.txt", prompt_hash(&prompt))), text).unwrap();
    }
    println!("wrote fixtures for {} documents", refs.len());
}
