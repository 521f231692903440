//! The two confidence gates on a handful of fine-pass answers, including
//! boundary hedges, abstentions, out-of-grid points and the m = 0 bypass.
//!
//!     cargo run --example gates

use accident_grounding::gates::{merge, Source};
use accident_grounding::parser::{CollisionType, Pass1Result, Pass2Result};
use accident_grounding::sampler::refinement_window;

fn label(s: Source) -> &'static str {
    match s {
        Source::Pass1 => "coarse",
        Source::Pass2 => "fine",
    }
}

fn main() {
    let pass1 = Pass1Result { t1: 10.0, raw_x1: 640.0, raw_y1: 380.0, c1: CollisionType::Single };
    let window = refinement_window(pass1.t1, 20.0, 3.0);
    println!("coarse answer t1=10 at (640, 380); refinement window {window:?}\n");

    let cases = [
        ("confident", Pass2Result { t2: 11.4, raw_x2: 512.0, raw_y2: 488.0 }, 10.0),
        ("abstained", Pass2Result { t2: -1.0, raw_x2: 512.0, raw_y2: 488.0 }, 10.0),
        ("hedged near start", Pass2Result { t2: 7.1, raw_x2: 512.0, raw_y2: 488.0 }, 10.0),
        ("exactly tau from edge", Pass2Result { t2: 7.3, raw_x2: 512.0, raw_y2: 488.0 }, 10.0),
        ("point on the margin", Pass2Result { t2: 11.4, raw_x2: 10.0, raw_y2: 990.0 }, 10.0),
        ("point outside margin", Pass2Result { t2: 11.4, raw_x2: 5.0, raw_y2: 500.0 }, 10.0),
        ("invalid point, m=10", Pass2Result { t2: 11.4, raw_x2: -1.0, raw_y2: -1.0 }, 10.0),
        ("invalid point, m=0", Pass2Result { t2: 11.4, raw_x2: -1.0, raw_y2: -1.0 }, 0.0),
        ("failed call", Pass2Result::SENTINEL, 10.0),
    ];
    println!("{:<24} {:>6} {:>7}  {:<18} {:>6}", "case", "t*", "time", "point", "space");
    for (name, pass2, margin) in cases {
        let d = merge(&pass1, &pass2, window, 0.3, margin);
        let point = format!("({:.3}, {:.3})", d.point_star.0, d.point_star.1);
        println!(
            "{name:<24} {:>6.1} {:>7}  {point:<18} {:>6}",
            d.t_star,
            label(d.time_source),
            label(d.space_source)
        );
    }
}
