use std::collections::HashMap;

use super::{TokenId, BOS, EOS, FIRST_REAL, PAD};
use crate::error::{Error, Result};

/// Bijective token string <-> id mapping with the reserved ids
/// `0 = <pad>`, `1 = <s>`, `2 = </s>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const PAD_STR: &'static str = "<pad>";
    pub const BOS_STR: &'static str = "<s>";
    pub const EOS_STR: &'static str = "</s>";

    /// Vocabulary of `size` ids whose real tokens are spelled `0`, `1`, ...
    pub fn synthetic(size: usize) -> Result<Self> {
        if size < 4 {
            return Err(Error::Config(format!(
                "vocabulary size must be at least 4, got {size}"
            )));
        }
        Self::from_real_tokens((0..size - FIRST_REAL as usize).map(|i| i.to_string()))
    }

    /// Builds a vocabulary from real-token spellings; reserved tokens are
    /// prepended. Duplicates and reserved spellings are rejected.
    pub fn from_real_tokens<I, S>(real: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = vec![
            Self::PAD_STR.into(),
            Self::BOS_STR.into(),
            Self::EOS_STR.into(),
        ];
        tokens.extend(real.into_iter().map(Into::into));
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid token spelling {t:?}")));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Config(format!("duplicate token {t:?}")));
            }
        }
        if tokens.len() < 4 {
            return Err(Error::Config(
                "vocabulary needs at least one real token".into(),
            ));
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Space-separated spellings to ids. Unknown tokens are all reported.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut ids = Vec::new();
        let mut unknown = Vec::new();
        for tok in text.split_whitespace() {
            match self.id(tok) {
                Some(id) => ids.push(id),
                None => unknown.push(tok.to_string()),
            }
        }
        if unknown.is_empty() {
            Ok(ids)
        } else {
            Err(Error::UnknownTokens(unknown))
        }
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn is_special(id: TokenId) -> bool {
    id == PAD || id == BOS || id == EOS
}
