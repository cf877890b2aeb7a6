//! Scores predicted PR labels against reference labels.

use patchprov::classify::PrLabel::{self, NE, PA, PN};
use patchprov::report::evaluate;

fn main() {
    let truth: [PrLabel; 8] = [PA, PA, PN, NE, NE, PA, PN, NE];
    let predicted: [PrLabel; 8] = [PA, PN, PN, NE, NE, PA, PN, PA];
    let e = evaluate(&predicted, &truth).expect("aligned, non-empty");
    for (label, row) in ["PA", "PN", "NE"].iter().zip(e.confusion) {
        println!("{label} {row:?}");
    }
    for c in &e.per_class {
        println!("{}: precision {:.1} recall {:.1} f1 {:.1}", c.label, c.precision, c.recall, c.f1);
    }
    println!("agreement {:.1}%, kappa {:?}", e.agreement, e.cohens_kappa);
    println!("{}", serde_json::to_string_pretty(&e.overall).unwrap());
}
