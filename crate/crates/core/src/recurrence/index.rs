use crate::sources::Alphabet;

const NONE: u32 = u32::MAX;
const DENSE_ALPHABET: usize = 16;

/// Suffix-automaton transitions: a flat table for small alphabets, sorted
/// edge lists otherwise.
#[derive(Clone, Debug)]
enum Edges {
    Dense { width: usize, next: Vec<u32> },
    Sparse(Vec<Vec<(u8, u32)>>),
}

impl Edges {
    fn new(alphabet: Alphabet, capacity: usize) -> Self {
        if alphabet.size() <= DENSE_ALPHABET {
            Edges::Dense {
                width: alphabet.size(),
                next: Vec::with_capacity(capacity * alphabet.size()),
            }
        } else {
            Edges::Sparse(Vec::with_capacity(capacity))
        }
    }

    fn push_state(&mut self) {
        match self {
            Edges::Dense { width, next } => next.extend(std::iter::repeat_n(NONE, *width)),
            Edges::Sparse(v) => v.push(Vec::new()),
        }
    }

    #[inline]
    fn get(&self, state: u32, c: u8) -> u32 {
        match self {
            Edges::Dense { width, next } => next[state as usize * *width + c as usize],
            Edges::Sparse(v) => {
                let e = &v[state as usize];
                match e.binary_search_by_key(&c, |&(k, _)| k) {
                    Ok(i) => e[i].1,
                    Err(_) => NONE,
                }
            }
        }
    }

    fn set(&mut self, state: u32, c: u8, to: u32) {
        match self {
            Edges::Dense { width, next } => next[state as usize * *width + c as usize] = to,
            Edges::Sparse(v) => {
                let e = &mut v[state as usize];
                match e.binary_search_by_key(&c, |&(k, _)| k) {
                    Ok(i) => e[i].1 = to,
                    Err(i) => e.insert(i, (c, to)),
                }
            }
        }
    }

    fn copy_state(&mut self, from: u32, to: u32) {
        match self {
            Edges::Dense { width, next } => {
                let w = *width;
                next.copy_within(from as usize * w..(from as usize + 1) * w, to as usize * w);
            }
            Edges::Sparse(v) => v[to as usize] = v[from as usize].clone(),
        }
    }
}

/// Generalized suffix automaton over a set of strings. Substrings never span
/// two strings. Every state records the end of its earliest occurrence in the
/// concatenated (string-major) coordinate system.
#[derive(Clone, Debug)]
pub(crate) struct SuffixAutomaton {
    alphabet: Alphabet,
    edges: Edges,
    link: Vec<u32>,
    len: Vec<u32>,
    first_end: Vec<u32>,
}

impl SuffixAutomaton {
    pub(crate) fn build<'a>(
        alphabet: Alphabet,
        strings: impl IntoIterator<Item = &'a [u8]>,
    ) -> Self {
        let strings: Vec<&[u8]> = strings.into_iter().collect();
        let total: usize = strings.iter().map(|s| s.len()).sum();
        let mut sam = SuffixAutomaton {
            alphabet,
            edges: Edges::new(alphabet, 2 * total + 1),
            link: Vec::with_capacity(2 * total + 1),
            len: Vec::with_capacity(2 * total + 1),
            first_end: Vec::with_capacity(2 * total + 1),
        };
        sam.new_state(0, NONE, NONE);
        let mut pos = 0u32;
        for s in strings {
            let mut last = 0u32;
            for &c in s {
                last = sam.extend(last, c, pos);
                pos += 1;
            }
        }
        sam
    }

    fn new_state(&mut self, len: u32, link: u32, first_end: u32) -> u32 {
        let id = self.len.len() as u32;
        self.edges.push_state();
        self.len.push(len);
        self.link.push(link);
        self.first_end.push(first_end);
        id
    }

    fn clone_state(&mut self, q: u32, len: u32) -> u32 {
        let id = self.new_state(len, self.link[q as usize], self.first_end[q as usize]);
        self.edges.copy_state(q, id);
        id
    }

    /// Redirects `c`-edges pointing at `q` to `to`, walking suffix links from `p`.
    fn redirect(&mut self, mut p: u32, c: u8, q: u32, to: u32) {
        while p != NONE && self.edges.get(p, c) == q {
            self.edges.set(p, c, to);
            p = self.link[p as usize];
        }
    }

    fn extend(&mut self, last: u32, c: u8, pos: u32) -> u32 {
        let existing = self.edges.get(last, c);
        if existing != NONE {
            // the extended string already occurred earlier
            let q = existing;
            if self.len[q as usize] == self.len[last as usize] + 1 {
                return q;
            }
            let clone = self.clone_state(q, self.len[last as usize] + 1);
            self.link[q as usize] = clone;
            self.redirect(last, c, q, clone);
            return clone;
        }
        let cur = self.new_state(self.len[last as usize] + 1, NONE, pos);
        let mut p = last;
        while p != NONE && self.edges.get(p, c) == NONE {
            self.edges.set(p, c, cur);
            p = self.link[p as usize];
        }
        if p == NONE {
            self.link[cur as usize] = 0;
            return cur;
        }
        let q = self.edges.get(p, c);
        if self.len[p as usize] + 1 == self.len[q as usize] {
            self.link[cur as usize] = q;
        } else {
            let clone = self.clone_state(q, self.len[p as usize] + 1);
            self.link[q as usize] = clone;
            self.link[cur as usize] = clone;
            self.redirect(p, c, q, clone);
        }
        cur
    }

    pub(crate) fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// State reached by reading `pattern` from the root.
    pub(crate) fn walk(&self, pattern: &[u8]) -> Option<u32> {
        let mut state = 0u32;
        for &c in pattern {
            if !self.alphabet.contains(c) {
                return None;
            }
            state = self.edges.get(state, c);
            if state == NONE {
                return None;
            }
        }
        Some(state)
    }

    /// 0-based start of the earliest occurrence of `pattern`.
    pub(crate) fn first_start(&self, pattern: &[u8]) -> Option<usize> {
        if pattern.is_empty() {
            return Some(0);
        }
        let s = self.walk(pattern)?;
        Some(self.first_end[s as usize] as usize + 1 - pattern.len())
    }

    /// Length of the longest prefix of `pattern` occurring as a substring.
    pub(crate) fn longest_prefix(&self, pattern: &[u8]) -> usize {
        let mut state = 0u32;
        for (i, &c) in pattern.iter().enumerate() {
            if !self.alphabet.contains(c) {
                return i;
            }
            state = self.edges.get(state, c);
            if state == NONE {
                return i;
            }
        }
        pattern.len()
    }

    #[cfg(test)]
    pub(crate) fn state_count(&self) -> usize {
        self.len.len()
    }
}
