//! Levenshtein distance over symbol sequences, normalized to [0, 1].

/// Classic single-row dynamic program; works over any symbol type.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (j, long_sym) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, short_sym) in short.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if short_sym == long_sym {
                diag
            } else {
                1 + diag.min(above).min(row[i])
            };
            diag = above;
        }
    }
    *row.last().unwrap()
}

/// Levenshtein distance divided by the longer length; 0 when both are empty.
pub fn edit_distance_normalized<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}
