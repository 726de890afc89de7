use super::{EntityId, StepError};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Keyword(String),
    Instance(EntityId),
    Integer(String, i64),
    Real(String, f64),
    String(String),
    Binary(String),
    Enum(String),
    Dollar,
    Star,
    LParen,
    RParen,
    Comma,
    Equals,
    Semicolon,
    Eof,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match self {
            Token::Keyword(k) => format!("keyword {k}"),
            Token::Instance(id) => format!("#{id}"),
            Token::Integer(t, _) | Token::Real(t, _) => format!("number {t}"),
            Token::String(_) => "string".into(),
            Token::Binary(_) => "binary literal".into(),
            Token::Enum(e) => format!(".{e}."),
            Token::Dollar => "'$'".into(),
            Token::Star => "'*'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Comma => "','".into(),
            Token::Equals => "'='".into(),
            Token::Semicolon => "';'".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    pub(crate) fn error(&self, offset: usize, message: impl Into<String>) -> StepError {
        let line = 1 + self.bytes[..offset.min(self.bytes.len())]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        StepError::Syntax {
            offset,
            line,
            message: message.into(),
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) -> Result<(), StepError> {
        loop {
            match self.peek_byte() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.bytes.get(self.pos + 1) == Some(&b'*') => {
                    let start = self.pos;
                    match self.src[self.pos + 2..].find("*/") {
                        Some(end) => self.pos += 2 + end + 2,
                        None => return Err(self.error(start, "unterminated comment")),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    /// Next token and the byte offset where it starts.
    pub(crate) fn next_token(&mut self) -> Result<(Token, usize), StepError> {
        self.skip_trivia()?;
        let start = self.pos;
        let Some(b) = self.peek_byte() else {
            return Ok((Token::Eof, start));
        };
        let tok = match b {
            b'(' => self.single(Token::LParen),
            b')' => self.single(Token::RParen),
            b',' => self.single(Token::Comma),
            b'=' => self.single(Token::Equals),
            b';' => self.single(Token::Semicolon),
            b'$' => self.single(Token::Dollar),
            b'*' => self.single(Token::Star),
            b'#' => self.instance()?,
            b'\'' => self.string()?,
            b'"' => self.binary()?,
            b'.' => self.enumeration()?,
            b'0'..=b'9' | b'+' | b'-' => self.number()?,
            b'A'..=b'Z' | b'a'..=b'z' | b'_' | b'!' => self.keyword(),
            other => {
                return Err(self.error(start, format!("unexpected character {:?}", other as char)))
            }
        };
        Ok((tok, start))
    }

    fn single(&mut self, tok: Token) -> Token {
        self.pos += 1;
        tok
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek_byte().is_some_and(&pred) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn keyword(&mut self) -> Token {
        let start = self.pos;
        self.pos += 1;
        // '-' only occurs in the ISO-10303-21 / END-ISO-10303-21 markers.
        self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        Token::Keyword(self.src[start..self.pos].to_ascii_uppercase())
    }

    fn instance(&mut self) -> Result<Token, StepError> {
        let start = self.pos;
        self.pos += 1;
        let digits = self.take_while(|b| b.is_ascii_digit());
        digits
            .parse::<EntityId>()
            .map(Token::Instance)
            .map_err(|_| self.error(start, "expected digits after '#'"))
    }

    fn string(&mut self) -> Result<Token, StepError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(q) = rest.find('\'') else {
                return Err(self.error(start, "unterminated string"));
            };
            out.push_str(&rest[..q]);
            self.pos += q + 1;
            if self.peek_byte() == Some(b'\'') {
                out.push('\'');
                self.pos += 1;
            } else {
                return Ok(Token::String(out));
            }
        }
    }

    fn binary(&mut self) -> Result<Token, StepError> {
        let start = self.pos;
        self.pos += 1;
        let hex = self.take_while(|b| b.is_ascii_hexdigit());
        if self.peek_byte() != Some(b'"') {
            return Err(self.error(start, "malformed binary literal"));
        }
        self.pos += 1;
        Ok(Token::Binary(hex.to_string()))
    }

    fn enumeration(&mut self) -> Result<Token, StepError> {
        let start = self.pos;
        self.pos += 1;
        let name = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
        if name.is_empty() || self.peek_byte() != Some(b'.') {
            return Err(self.error(start, "malformed enumeration"));
        }
        self.pos += 1;
        Ok(Token::Enum(name.to_ascii_uppercase()))
    }

    fn number(&mut self) -> Result<Token, StepError> {
        let start = self.pos;
        if matches!(self.peek_byte(), Some(b'+' | b'-')) {
            self.pos += 1;
        }
        if self.take_while(|b| b.is_ascii_digit()).is_empty() {
            return Err(self.error(start, "expected digits"));
        }
        let mut is_real = false;
        if self.peek_byte() == Some(b'.') {
            is_real = true;
            self.pos += 1;
            self.take_while(|b| b.is_ascii_digit());
            if matches!(self.peek_byte(), Some(b'e' | b'E')) {
                self.pos += 1;
                if matches!(self.peek_byte(), Some(b'+' | b'-')) {
                    self.pos += 1;
                }
                if self.take_while(|b| b.is_ascii_digit()).is_empty() {
                    return Err(self.error(start, "malformed exponent"));
                }
            }
        }
        let text = &self.src[start..self.pos];
        if is_real {
            // Rust's float parser accepts "1." and "1.E-07" as written.
            let value = text
                .parse::<f64>()
                .map_err(|e| self.error(start, format!("bad real {text:?}: {e}")))?;
            Ok(Token::Real(text.to_string(), value))
        } else {
            let value = text
                .parse::<i64>()
                .map_err(|e| self.error(start, format!("bad integer {text:?}: {e}")))?;
            Ok(Token::Integer(text.to_string(), value))
        }
    }
}
