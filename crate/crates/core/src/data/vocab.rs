use crate::error::{Error, Result};
use crate::lsl::{language_set, LanguageId, Quality};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
const HQ: usize = 3;
const LQ: usize = 4;
const FIRST_LANG: usize = 5;

const SYMBOLS: &[u8; 64] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+/";

/// Token space: specials, quality tags, one tag per language, then the pivot
/// alphabet. Ids depend only on the sorted language set and alphabet size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    languages: Vec<LanguageId>,
    alphabet_size: usize,
}

impl Vocab {
    pub fn new(languages: &[LanguageId], alphabet_size: usize) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(Error::Config("alphabet needs at least two symbols".into()));
        }
        Ok(Self { languages: language_set(languages.iter().cloned()), alphabet_size })
    }

    pub fn len(&self) -> usize {
        FIRST_LANG + self.languages.len() + self.alphabet_size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn languages(&self) -> &[LanguageId] {
        &self.languages
    }

    pub fn quality_tag(&self, q: Quality) -> usize {
        match q {
            Quality::High => HQ,
            Quality::Low => LQ,
        }
    }

    pub fn lang_tag(&self, lang: &LanguageId) -> Result<usize> {
        self.languages
            .binary_search(lang)
            .map(|i| FIRST_LANG + i)
            .map_err(|_| Error::Routing(lang.to_string()))
    }

    fn first_symbol(&self) -> usize {
        FIRST_LANG + self.languages.len()
    }

    pub fn symbol(&self, index: usize) -> usize {
        debug_assert!(index < self.alphabet_size);
        self.first_symbol() + index
    }

    pub fn symbol_index(&self, id: usize) -> Option<usize> {
        id.checked_sub(self.first_symbol()).filter(|&i| i < self.alphabet_size)
    }

    pub fn token_text(&self, id: usize) -> String {
        match id {
            PAD => "<pad>".into(),
            BOS => "<s>".into(),
            EOS => "</s>".into(),
            HQ => "<HQ>".into(),
            LQ => "<LQ>".into(),
            _ => {
                if let Some(i) = self.symbol_index(id) {
                    symbol_text(i, self.alphabet_size)
                } else if let Some(l) = self.languages.get(id - FIRST_LANG) {
                    format!("<{l}>")
                } else {
                    "<unk>".into()
                }
            }
        }
    }

    pub fn token_id(&self, text: &str) -> Result<usize> {
        match text {
            "<pad>" => return Ok(PAD),
            "<s>" => return Ok(BOS),
            "</s>" => return Ok(EOS),
            "<HQ>" => return Ok(HQ),
            "<LQ>" => return Ok(LQ),
            _ => {}
        }
        if let Some(code) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            return self.lang_tag(&LanguageId::new(code)?);
        }
        parse_symbol(text, self.alphabet_size)
            .map(|i| self.symbol(i))
            .ok_or_else(|| Error::Data(format!("unknown token `{text}`")))
    }

    /// Space-separated symbol text for a sequence of symbol token ids.
    pub fn render(&self, ids: &[usize]) -> String {
        let parts: Vec<String> = ids.iter().map(|&id| self.token_text(id)).collect();
        parts.join(" ")
    }

    pub fn parse(&self, text: &str) -> Result<Vec<usize>> {
        text.split_whitespace().map(|t| self.token_id(t)).collect()
    }
}

pub(crate) fn symbol_text(index: usize, alphabet_size: usize) -> String {
    if alphabet_size <= SYMBOLS.len() {
        (SYMBOLS[index] as char).to_string()
    } else {
        format!("s{index}")
    }
}

pub(crate) fn parse_symbol(text: &str, alphabet_size: usize) -> Option<usize> {
    let i = if alphabet_size <= SYMBOLS.len() {
        let &[b] = text.as_bytes() else { return None };
        SYMBOLS.iter().position(|&c| c == b)?
    } else {
        text.strip_prefix('s')?.parse().ok()?
    };
    (i < alphabet_size).then_some(i)
}
