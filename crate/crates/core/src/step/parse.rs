use std::collections::{BTreeMap, BTreeSet};

use super::strings::decode_step_string;
use super::{EntityId, StepEntity, StepError, StepFile, StepHeader, StepValue};

/// Parses a complete SPF document.
///
/// Every `#n` used in the DATA section must resolve to an instance of the same
/// file, otherwise [`StepError::DanglingReference`] lists the missing ids.
pub fn parse_step(bytes: &[u8]) -> Result<StepFile, StepError> {
    let mut p = Parser { src: bytes, pos: 0 };
    p.skip_ws();
    p.expect_keyword("ISO-10303-21")?;
    p.expect_byte(b';')?;

    p.skip_ws();
    if !p.at_keyword("HEADER") {
        return Err(StepError::MissingSection { section: "HEADER" });
    }
    p.expect_keyword("HEADER")?;
    p.expect_byte(b';')?;
    let header = p.header_section()?;

    let mut entities = BTreeMap::new();
    let mut saw_data = false;
    loop {
        p.skip_ws();
        if p.at_keyword("DATA") {
            p.expect_keyword("DATA")?;
            p.skip_ws();
            if p.peek() == Some(b'(') {
                // named data section parameters are not needed downstream
                p.value()?;
            }
            p.expect_byte(b';')?;
            p.data_section(&mut entities)?;
            saw_data = true;
        } else if p.at_keyword("END-ISO-10303-21") {
            p.expect_keyword("END-ISO-10303-21")?;
            p.expect_byte(b';')?;
            break;
        } else if p.peek().is_none() {
            if !saw_data {
                return Err(StepError::MissingSection { section: "DATA" });
            }
            return Err(p.error("missing END-ISO-10303-21"));
        } else {
            return Err(p.error("expected DATA section or END-ISO-10303-21"));
        }
    }
    if !saw_data {
        return Err(StepError::MissingSection { section: "DATA" });
    }

    let mut missing = BTreeSet::new();
    for entity in entities.values() {
        let mut check = |id: EntityId| {
            if !entities.contains_key(&id) {
                missing.insert(id);
            }
        };
        entity.attributes.iter().for_each(|v| v.visit_refs(&mut check));
        for (_, attrs) in &entity.extra_records {
            attrs.iter().for_each(|v| v.visit_refs(&mut check));
        }
    }
    if !missing.is_empty() {
        return Err(StepError::DanglingReference { ids: missing.into_iter().collect() });
    }

    Ok(StepFile::from_parts(header, entities))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> StepError {
        let upto = &self.src[..self.pos.min(self.src.len())];
        let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = upto.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        StepError::Syntax { offset: self.pos, line, column: self.pos - line_start + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        loop {
            while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
                self.pos += 1;
            }
            if self.src[self.pos..].starts_with(b"/*") {
                match find(&self.src[self.pos + 2..], b"*/") {
                    Some(end) => self.pos += 2 + end + 2,
                    None => self.pos = self.src.len(),
                }
            } else {
                return;
            }
        }
    }

    fn expect_byte(&mut self, b: u8) -> Result<(), StepError> {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", b as char)))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        let rest = &self.src[self.pos..];
        rest.len() >= kw.len()
            && rest[..kw.len()].eq_ignore_ascii_case(kw.as_bytes())
            && !rest.get(kw.len()).is_some_and(|&b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), StepError> {
        self.skip_ws();
        if self.at_keyword(kw) {
            self.pos += kw.len();
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    /// Reads a standard keyword (`[A-Za-z_][A-Za-z0-9_]*`), upper-cased.
    fn keyword(&mut self) -> Result<String, StepError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
            _ => return Err(self.error("expected keyword")),
        }
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).to_ascii_uppercase())
    }

    fn header_section(&mut self) -> Result<StepHeader, StepError> {
        let mut header = StepHeader::default();
        loop {
            self.skip_ws();
            if self.at_keyword("ENDSEC") {
                self.expect_keyword("ENDSEC")?;
                self.expect_byte(b';')?;
                return Ok(header);
            }
            if self.peek().is_none() {
                return Err(self.error("unterminated HEADER section"));
            }
            let name = self.keyword()?;
            let attrs = self.parameter_list()?;
            self.expect_byte(b';')?;
            match name.as_str() {
                "FILE_DESCRIPTION" => {
                    if let Some(list) = attrs.first().and_then(StepValue::as_list) {
                        header.description = list.iter().filter_map(|v| v.as_str().map(String::from)).collect();
                    }
                }
                "FILE_NAME" => {
                    header.file_name = attrs.iter().flat_map(collect_strings).collect();
                }
                "FILE_SCHEMA" => {
                    if let Some(list) = attrs.first().and_then(StepValue::as_list) {
                        header.schema_identifiers = list.iter().filter_map(|v| v.as_str().map(String::from)).collect();
                    }
                }
                _ => {}
            }
            header.records.push((name, attrs));
        }
    }

    fn data_section(&mut self, entities: &mut BTreeMap<EntityId, StepEntity>) -> Result<(), StepError> {
        loop {
            self.skip_ws();
            if self.at_keyword("ENDSEC") {
                self.expect_keyword("ENDSEC")?;
                self.expect_byte(b';')?;
                return Ok(());
            }
            let start = self.pos;
            let entity = match self.peek() {
                Some(b'#') => self.instance()?,
                None => return Err(self.error("unterminated DATA section")),
                _ => return Err(self.error("expected entity instance")),
            };
            if entities.contains_key(&entity.id) {
                self.pos = start;
                return Err(self.error(format!("duplicate instance name {}", entity.id)));
            }
            entities.insert(entity.id, entity);
        }
    }

    fn instance(&mut self) -> Result<StepEntity, StepError> {
        let id = self.entity_ref()?;
        self.expect_byte(b'=')?;
        self.skip_ws();
        let entity = if self.peek() == Some(b'(') {
            // complex instance: (A(..)B(..)...)
            self.pos += 1;
            let mut records = Vec::new();
            loop {
                self.skip_ws();
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    break;
                }
                let name = self.keyword()?;
                let attrs = self.parameter_list()?;
                records.push((name, attrs));
            }
            if records.is_empty() {
                return Err(self.error("empty complex instance"));
            }
            let (type_name, attributes) = records.remove(0);
            StepEntity { id, type_name, attributes, extra_records: records }
        } else {
            let type_name = self.keyword()?;
            let attributes = self.parameter_list()?;
            StepEntity { id, type_name, attributes, extra_records: Vec::new() }
        };
        self.expect_byte(b';')?;
        Ok(entity)
    }

    fn entity_ref(&mut self) -> Result<EntityId, StepError> {
        self.expect_byte(b'#')?;
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(EntityId)
            .ok_or_else(|| self.error("expected instance number after '#'"))
    }

    fn parameter_list(&mut self) -> Result<Vec<StepValue>, StepError> {
        self.expect_byte(b'(')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(self.error("expected ',' or ')'")),
            }
        }
    }

    fn value(&mut self) -> Result<StepValue, StepError> {
        self.skip_ws();
        match self.peek() {
            Some(b'$') => {
                self.pos += 1;
                Ok(StepValue::Unset)
            }
            Some(b'*') => {
                self.pos += 1;
                Ok(StepValue::Derived)
            }
            Some(b'#') => self.entity_ref().map(StepValue::Ref),
            Some(b'\'') => self.string(),
            Some(b'"') => self.binary(),
            Some(b'.') => self.enumeration(),
            Some(b'(') => self.parameter_list().map(StepValue::List),
            Some(b) if b == b'+' || b == b'-' || b.is_ascii_digit() => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let name = self.keyword()?;
                self.expect_byte(b'(')?;
                let inner = self.value()?;
                self.expect_byte(b')')?;
                Ok(StepValue::Typed(name, Box::new(inner)))
            }
            Some(_) => Err(self.error("unexpected character in parameter")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn string(&mut self) -> Result<StepValue, StepError> {
        let open = self.pos;
        self.pos += 1;
        let start = self.pos;
        loop {
            match self.peek() {
                Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => self.pos += 2,
                Some(b'\'') => break,
                Some(_) => self.pos += 1,
                None => {
                    self.pos = open;
                    return Err(self.error("unterminated string"));
                }
            }
        }
        let raw = &self.src[start..self.pos];
        self.pos += 1;
        let text = match std::str::from_utf8(raw) {
            Ok(s) => s.to_owned(),
            // legacy exporters write raw ISO 8859-1 bytes
            Err(_) => raw.iter().map(|&b| b as char).collect(),
        };
        Ok(StepValue::String(decode_step_string(&text)))
    }

    fn binary(&mut self) -> Result<StepValue, StepError> {
        self.pos += 1;
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_hexdigit()) {
            self.pos += 1;
        }
        let digits = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.expect_byte(b'"')?;
        Ok(StepValue::Binary(digits))
    }

    fn enumeration(&mut self) -> Result<StepValue, StepError> {
        self.pos += 1;
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.pos += 1;
        }
        if self.peek() != Some(b'.') || self.pos == start {
            return Err(self.error("malformed enumeration"));
        }
        let token = String::from_utf8_lossy(&self.src[start..self.pos]).to_ascii_uppercase();
        self.pos += 1;
        Ok(StepValue::Enum(token))
    }

    fn number(&mut self) -> Result<StepValue, StepError> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'+' | b'-')) {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(self.error("expected digits"));
        }
        let mut real = false;
        if self.peek() == Some(b'.') {
            real = true;
            self.pos += 1;
            while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'E' | b'e')) {
            real = true;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == exp_start {
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if real {
            // Rust rejects a trailing '.' before an exponent ("1.E-3")
            let normalized = text.replacen(".E", ".0E", 1).replacen(".e", ".0e", 1);
            normalized.parse::<f64>().map(StepValue::Real).map_err(|_| self.error("malformed real"))
        } else {
            match text.parse::<i64>() {
                Ok(v) => Ok(StepValue::Integer(v)),
                Err(_) => text.parse::<f64>().map(StepValue::Real).map_err(|_| self.error("malformed integer")),
            }
        }
    }
}

fn collect_strings(v: &StepValue) -> Vec<String> {
    match v {
        StepValue::List(items) => items.iter().flat_map(collect_strings).collect(),
        other => other.as_str().map(String::from).into_iter().collect(),
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
