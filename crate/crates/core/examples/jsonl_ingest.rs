//! Reading vote- and score-annotated JSONL, including the records that
//! ingestion tolerates and the ones it rejects.

use vpo::data::{attach_targets, parse_jsonl, IngestOptions};
use vpo::vote_model::EstimatorConfig;

const GOOD: &str = r#"{"context":0,"y1":0,"y2":1,"v1":101,"v2":9}
{"context":0,"y1":2,"y2":1,"v1":15,"v2":14,"post_id":"t3_abc"}

{"context":1,"y1":0,"y2":2,"s1":8,"s2":6}
{"context":1,"y1":1,"y2":0,"v1":-3,"v2":5}
"#;

fn main() -> vpo::Result<()> {
    let (ds, stats) = parse_jsonl(GOOD.as_bytes(), &IngestOptions::default())?;
    println!("{stats:?}");
    println!("provenance {:?}, shape {:?}", ds.provenance, ds.shape());
    for pair in attach_targets(&ds, EstimatorConfig::default()).pairs {
        println!(
            "x={} y1={} y2={} votes {}:{} target {:.4}",
            pair.context.0,
            pair.y1.0,
            pair.y2.0,
            pair.votes.v1(),
            pair.votes.v2(),
            pair.target.expect("attached").value()
        );
    }

    println!();
    for bad in [
        r#"{"context":0,"y1":1,"y2":1,"v1":2,"v2":3}"#,
        r#"{"context":0,"y1":1,"v1":2,"v2":3}"#,
        r#"{"context":0,"y1":0,"y2":1,"v1":"many","v2":3}"#,
        r#"{"context":0,"y1":0,"y2":1,"#,
    ] {
        let err = parse_jsonl(bad.as_bytes(), &IngestOptions::default()).unwrap_err();
        println!("exit {} <- {err}", err.exit_code());
    }
    Ok(())
}
