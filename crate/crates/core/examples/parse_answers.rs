//! How raw model text becomes typed pass results: fenced JSON, prose around
//! the object, hedged type strings, and what counts as a parse failure.
//!
//!     cargo run --example parse_answers

use accident_grounding::parser::{extract_json_block, parse_pass1, parse_pass2, parse_type_answer};

fn main() {
    let coarse = "Sure! Here is my answer:\n```json\n{\"time\": 31, \"x\": 1040, \"y\": 388, \"type\": \"Rear-End\"}\n```";
    println!("extracted block: {}", extract_json_block(coarse).unwrap());
    // Duration 26.8 s: the time clamps to the clip, x to the 1000 grid.
    println!("pass 1: {:?}", parse_pass1(coarse, 26.8).unwrap());

    // Fine answers are not clamped; the spatial gate needs to see -1.
    for text in [r#"{"time": 11.4, "x": 512, "y": 488}"#, r#"{"time": -1, "x": -1, "y": -1}"#] {
        println!("pass 2: {text} -> {:?}", parse_pass2(text).unwrap());
    }

    for text in ["t_bone", "This looks like a **sideswipe** to me.", "I cannot tell."] {
        match parse_type_answer(text) {
            Ok(c) => println!("type:   {text:?} -> {}", c.as_str()),
            Err(e) => println!("type:   {text:?} -> error: {e}"),
        }
    }

    match parse_pass1("no JSON at all", 10.0) {
        Ok(p) => println!("unexpected: {p:?}"),
        Err(e) => println!("pass 1 failure: {e}"),
    }
}
