//! Porter stemmer (the 1980 algorithm), used by ROUGE when stemming is
//! enabled. Operates on lowercase ASCII; tokens containing anything else
//! pass through unchanged.

pub fn porter_stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut s = Stemmer {
        b: word.as_bytes().to_vec(),
    };
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    String::from_utf8_lossy(&s.b).into_owned()
}

struct Stemmer {
    b: Vec<u8>,
}

impl Stemmer {
    fn last(&self) -> u8 {
        self.b[self.b.len() - 1]
    }

    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.cons(i - 1),
            _ => true,
        }
    }

    /// The `m` in `[C](VC)^m[V]` over the prefix `b[0..len]`.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < len && self.cons(i) {
            i += 1;
        }
        loop {
            while i < len && !self.cons(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
            m += 1;
            while i < len && self.cons(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
        }
    }

    fn vowel_in(&self, len: usize) -> bool {
        (0..len).any(|i| !self.cons(i))
    }

    fn double_cons_end(&self) -> bool {
        let n = self.b.len();
        n >= 2 && self.b[n - 1] == self.b[n - 2] && self.cons(n - 1)
    }

    /// consonant-vowel-consonant ending at index `i`, last consonant not w/x/y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.cons(i) || self.cons(i - 1) || !self.cons(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    /// Stem length if the word ends with `suffix`.
    fn ends(&self, suffix: &str) -> Option<usize> {
        self.b
            .len()
            .checked_sub(suffix.len())
            .filter(|&sl| &self.b[sl..] == suffix.as_bytes())
    }

    fn replace(&mut self, stem_len: usize, replacement: &str) {
        self.b.truncate(stem_len);
        self.b.extend_from_slice(replacement.as_bytes());
    }

    fn step1ab(&mut self) {
        if self.last() == b's' {
            if let Some(sl) = self.ends("sses") {
                self.replace(sl, "ss");
            } else if let Some(sl) = self.ends("ies") {
                self.replace(sl, "i");
            } else if self.b.len() >= 2 && self.b[self.b.len() - 2] != b's' {
                self.b.pop();
            }
        }
        if let Some(sl) = self.ends("eed") {
            if self.measure(sl) > 0 {
                self.b.pop(); // eed -> ee
            }
            return;
        }
        let matched = self
            .ends("ed")
            .filter(|&sl| self.vowel_in(sl))
            .or_else(|| self.ends("ing").filter(|&sl| self.vowel_in(sl)));
        let Some(sl) = matched else { return };
        self.b.truncate(sl);
        if self.ends("at").is_some() || self.ends("bl").is_some() || self.ends("iz").is_some() {
            self.b.push(b'e');
        } else if self.double_cons_end() {
            if !matches!(self.last(), b'l' | b's' | b'z') {
                self.b.pop();
            }
        } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len() - 1) {
            self.b.push(b'e');
        }
    }

    fn step1c(&mut self) {
        if self.last() == b'y' && self.vowel_in(self.b.len() - 1) {
            let n = self.b.len();
            self.b[n - 1] = b'i';
        }
    }

    /// The first matching suffix consumes the step; its replacement applies
    /// only when the stem measure is positive.
    fn replace_first(&mut self, rules: &[(&str, &str)]) {
        for (suffix, replacement) in rules {
            if let Some(sl) = self.ends(suffix) {
                if self.measure(sl) > 0 {
                    self.replace(sl, replacement);
                }
                return;
            }
        }
    }

    fn step2(&mut self) {
        self.replace_first(&[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ]);
    }

    fn step3(&mut self) {
        self.replace_first(&[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ]);
    }

    fn step4(&mut self) {
        for suffix in [
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent",
            "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ] {
            if let Some(sl) = self.ends(suffix) {
                if suffix == "ion" && (sl == 0 || !matches!(self.b[sl - 1], b's' | b't')) {
                    return;
                }
                if self.measure(sl) > 1 {
                    self.b.truncate(sl);
                }
                return;
            }
        }
    }

    fn step5(&mut self) {
        // 5a: drop a final e when the measure allows it.
        if self.last() == b'e' {
            let m = self.measure(self.b.len());
            if m > 1 || (m == 1 && !self.cvc(self.b.len() - 2)) {
                self.b.pop();
            }
        }
        // 5b: -ll -> -l at measure > 1.
        if self.last() == b'l' && self.double_cons_end() && self.measure(self.b.len()) > 1 {
            self.b.pop();
        }
    }
}
