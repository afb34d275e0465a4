/// Token id used for empty input.
pub const OOV_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const SEP_ID: usize = 2;
const RESERVED: usize = 3;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Hashing tokenizer: lowercase, split on non-alphanumerics, FNV-1a into `vocab_size` buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    vocab_size: usize,
}

impl Tokenizer {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size > RESERVED, "vocabulary must exceed the reserved ids");
        Tokenizer { vocab_size }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Lowercased alphanumeric words of `text`; `[CLS]`/`[SEP]` markers are kept verbatim.
    pub fn words(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for piece in text.split_whitespace() {
            if piece == CLS || piece == SEP {
                out.push(piece.to_string());
                continue;
            }
            out.extend(
                piece
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|w| !w.is_empty())
                    .map(str::to_lowercase),
            );
        }
        out
    }

    pub fn word_id(&self, word: &str) -> usize {
        match word {
            CLS => CLS_ID,
            SEP => SEP_ID,
            w => RESERVED + (fnv1a(w.as_bytes()) % (self.vocab_size - RESERVED) as u64) as usize,
        }
    }

    /// Token ids of `text`; never empty.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        self.encode_words(&Self::words(text))
    }

    pub fn encode_words<S: AsRef<str>>(&self, words: &[S]) -> Vec<usize> {
        let ids: Vec<usize> = words.iter().map(|w| self.word_id(w.as_ref())).collect();
        if ids.is_empty() {
            vec![OOV_ID]
        } else {
            ids
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
