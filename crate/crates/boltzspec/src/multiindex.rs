//! Graded-lexicographic multi-indices for tensor polynomial bases.

/// All multi-indices in `dim` variables with total degree at most `max_degree`,
/// ordered by ascending total degree and lexicographically (first entry
/// largest) within each degree. This ordering fixes matrix layouts everywhere.
pub fn graded_lex(dim: usize, max_degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        let mut block = Vec::new();
        compositions(degree, dim, &mut Vec::new(), &mut block);
        out.extend(block);
    }
    out
}

fn compositions(remaining: usize, slots: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if slots == 1 {
        let mut idx = prefix.clone();
        idx.push(remaining as u8);
        out.push(idx);
        return;
    }
    for k in (0..=remaining).rev() {
        prefix.push(k as u8);
        compositions(remaining - k, slots - 1, prefix, out);
        prefix.pop();
    }
}

/// Number of multi-indices of total degree <= `max_degree` in `dim` variables,
/// i.e. C(max_degree + dim, dim).
pub fn count(dim: usize, max_degree: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 1..=dim {
        num *= max_degree + i;
        den *= i;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_formula() {
        for d in [2, 3] {
            for n in 0..=8 {
                assert_eq!(graded_lex(d, n).len(), count(d, n));
            }
        }
        // C(2+3,3) = 10
        assert_eq!(count(3, 2), 10);
    }

    #[test]
    fn ordering_is_graded() {
        let idx = graded_lex(3, 4);
        let deg = |a: &Vec<u8>| a.iter().map(|&x| x as usize).sum::<usize>();
        for w in idx.windows(2) {
            assert!(deg(&w[0]) <= deg(&w[1]));
        }
        assert_eq!(idx[0], vec![0, 0, 0]);
        assert_eq!(idx[1], vec![1, 0, 0]);
        assert_eq!(idx[2], vec![0, 1, 0]);
        assert_eq!(idx[3], vec![0, 0, 1]);
    }
}
