use grantmine_core::preprocess::stem;

const VOCABULARY: &str = include_str!("data/porter_voc.txt");
const OUTPUT: &str = include_str!("data/porter_output.txt");

#[test]
fn agrees_with_reference_vocabulary() {
    let pairs: Vec<(&str, &str)> = VOCABULARY.lines().zip(OUTPUT.lines()).collect();
    assert_eq!(pairs.len(), 23_531);
    let mismatches: Vec<_> = pairs
        .iter()
        .filter(|(word, expected)| stem(word) != *expected)
        .collect();
    let agreement = 1.0 - mismatches.len() as f64 / pairs.len() as f64;
    eprintln!("porter agreement {agreement:.5} ({} mismatches)", mismatches.len());
    assert!(
        agreement >= 0.995,
        "agreement {agreement:.4}, first mismatches: {:?}",
        &mismatches[..mismatches.len().min(10)]
    );
}

#[test]
fn idempotent_on_reference_outputs() {
    // Porter is not idempotent in general; count the stems that move again.
    let moved = OUTPUT.lines().filter(|s| stem(s) != *s).count();
    let total = OUTPUT.lines().count();
    eprintln!("{moved} of {total} reference stems change on a second pass");
    assert!(moved as f64 / (total as f64) < 0.05, "{moved} of {total} stems change on a second pass");
}
