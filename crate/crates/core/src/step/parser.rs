use super::lexer::{Lexer, Token};
use super::{count_content_lines, Arg, Entity, EntityBody, EntityGraph, Record, StepError, StepFile};

/// Parses a complete Part 21 document.
///
/// Multiple DATA sections are merged into one graph. Anything after
/// `END-ISO-10303-21;` is ignored.
pub fn parse_step(text: &str) -> Result<StepFile, StepError> {
    let mut p = Parser::new(text)?;
    p.expect_keyword("ISO-10303-21")?;
    p.expect(Token::Semicolon)?;

    if !p.at_keyword("HEADER") {
        return Err(StepError::MissingSection("HEADER"));
    }
    p.bump()?;
    p.expect(Token::Semicolon)?;
    let mut header = Vec::new();
    while !p.at_keyword("ENDSEC") {
        header.push(p.header_record()?);
    }
    p.bump()?;
    p.expect(Token::Semicolon)?;

    let mut data = EntityGraph::new();
    let mut saw_data = false;
    while p.at_keyword("DATA") {
        saw_data = true;
        p.bump()?;
        // Edition 3 allows DATA('name',(schemas)); the arguments are not kept.
        if p.tok == Token::LParen {
            p.arg_list()?;
        }
        p.expect(Token::Semicolon)?;
        while !p.at_keyword("ENDSEC") {
            data.insert(p.entity()?)?;
        }
        p.bump()?;
        p.expect(Token::Semicolon)?;
    }
    if !saw_data {
        return Err(StepError::MissingSection("DATA"));
    }
    p.expect_keyword("END-ISO-10303-21")?;
    p.expect(Token::Semicolon)?;

    Ok(StepFile {
        header,
        data,
        line_count: count_content_lines(text),
    })
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, StepError> {
        let mut lexer = Lexer::new(text);
        let (tok, at) = lexer.next_token()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<Token, StepError> {
        let (next, at) = self.lexer.next_token()?;
        self.at = at;
        Ok(std::mem::replace(&mut self.tok, next))
    }

    fn unexpected(&self, wanted: &str) -> StepError {
        self.lexer.error(
            self.at,
            format!("expected {wanted}, found {}", self.tok.describe()),
        )
    }

    fn expect(&mut self, want: Token) -> Result<(), StepError> {
        if self.tok == want {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected(&want.describe()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.tok, Token::Keyword(k) if k == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), StepError> {
        if self.at_keyword(kw) {
            self.bump()?;
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn keyword(&mut self) -> Result<String, StepError> {
        match &self.tok {
            Token::Keyword(_) => match self.bump()? {
                Token::Keyword(k) => Ok(k),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("keyword")),
        }
    }

    fn header_record(&mut self) -> Result<Record, StepError> {
        let rec = self.record()?;
        self.expect(Token::Semicolon)?;
        Ok(rec)
    }

    fn record(&mut self) -> Result<Record, StepError> {
        let keyword = self.keyword()?;
        let args = self.arg_list()?;
        Ok(Record { keyword, args })
    }

    fn entity(&mut self) -> Result<Entity, StepError> {
        let start = self.at;
        let id = match self.tok {
            Token::Instance(id) => id,
            _ => return Err(self.unexpected("entity instance '#n'")),
        };
        self.bump()?;
        self.expect(Token::Equals)?;
        let body = if self.tok == Token::LParen {
            self.bump()?;
            let mut parts = Vec::new();
            while self.tok != Token::RParen {
                parts.push(self.record()?);
            }
            self.bump()?;
            if parts.len() < 2 {
                return Err(self
                    .lexer
                    .error(start, format!("complex entity #{id} needs at least two parts")));
            }
            EntityBody::Complex(parts)
        } else {
            EntityBody::Simple(self.record()?)
        };
        if self.tok != Token::Semicolon {
            return Err(self.unexpected("';'"));
        }
        let end = self.at + 1;
        self.bump()?;
        Ok(Entity {
            id,
            body,
            span: start..end,
        })
    }

    /// `( arg, arg, ... )`
    fn arg_list(&mut self) -> Result<Vec<Arg>, StepError> {
        self.expect(Token::LParen)?;
        let mut args = Vec::new();
        if self.tok == Token::RParen {
            self.bump()?;
            return Ok(args);
        }
        loop {
            args.push(self.arg()?);
            match self.tok {
                Token::Comma => {
                    self.bump()?;
                }
                Token::RParen => {
                    self.bump()?;
                    return Ok(args);
                }
                _ => return Err(self.unexpected("',' or ')'")),
            }
        }
    }

    fn arg(&mut self) -> Result<Arg, StepError> {
        if self.tok == Token::LParen {
            return Ok(Arg::List(self.arg_list()?));
        }
        if let Token::Keyword(_) = self.tok {
            let keyword = self.keyword()?;
            self.expect(Token::LParen)?;
            let inner = self.arg()?;
            self.expect(Token::RParen)?;
            return Ok(Arg::Typed {
                keyword,
                arg: Box::new(inner),
            });
        }
        let arg = match self.bump()? {
            Token::Integer(text, value) => Arg::Integer { text, value },
            Token::Real(text, value) => Arg::Real { text, value },
            Token::String(s) => Arg::String(s),
            Token::Binary(b) => Arg::Binary(b),
            Token::Enum(e) => Arg::Enum(e),
            Token::Instance(id) => Arg::Ref(id),
            Token::Dollar => Arg::Dollar,
            Token::Star => Arg::Star,
            other => {
                return Err(self.lexer.error(
                    self.at,
                    format!("expected parameter, found {}", other.describe()),
                ))
            }
        };
        Ok(arg)
    }
}
