//! Traits of a questionnaire and the dense trait index.
//!
//! cargo run --example traits

use rebound_alarm::pattern::{enumerate_traits, TraitSpace};

fn main() {
    let answers = [0i8, 1, -1, -1];
    let traits = enumerate_traits(&answers);
    println!("questionnaire {answers:?}: {} traits", traits.len());
    let space = TraitSpace::new(answers.len());
    for t in &traits {
        println!("  p={} q={} r={} values=({})  index {}", t.p, t.q, t.r, t.values_string(), space.index(t));
    }
    for l in [4, 10, 48] {
        println!("L={l}: universe {} traits", TraitSpace::new(l).size());
    }
}
