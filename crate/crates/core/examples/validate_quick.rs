use mos_core::validate::{Level, Validator, DEFAULT_VALIDATION_SEED};

fn main() {
    let level = match std::env::args().nth(1).as_deref() {
        Some("full") => Level::Full,
        _ => Level::Quick,
    };
    let v = Validator::new(level, DEFAULT_VALIDATION_SEED);
    let mut all = true;
    for r in v.run_all() {
        println!("{}", r.status_line());
        for d in &r.details {
            println!("    {d}");
        }
        all &= r.pass;
    }
    println!("overall: {}", if all { "PASS" } else { "FAIL" });
}
