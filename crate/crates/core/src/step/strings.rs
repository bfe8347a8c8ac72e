//! String literal encoding per ISO 10303-21 (`''`, `\\`, `\X\`, `\X2\`, `\X4\`, `\S\`).

/// Decodes the raw content between the quotes of a string literal.
///
/// Doubled apostrophes collapse to one. Unrecognized backslash sequences are
/// kept verbatim.
pub fn decode_step_string(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\'' && chars.get(i + 1) == Some(&'\'') {
            out.push('\'');
            i += 2;
            continue;
        }
        if c != '\\' {
            out.push(c);
            i += 1;
            continue;
        }
        let rest = &chars[i..];
        if starts_with(rest, "\\\\") {
            out.push('\\');
            i += 2;
        } else if starts_with(rest, "\\X2\\") {
            i += 4;
            let mut units = Vec::new();
            while i + 4 <= chars.len() && !starts_with(&chars[i..], "\\X0\\") {
                match hex_value(&chars[i..i + 4]) {
                    Some(u) => units.push(u as u16),
                    None => break,
                }
                i += 4;
            }
            out.extend(char::decode_utf16(units).map(|r| r.unwrap_or('\u{FFFD}')));
            if starts_with(&chars[i.min(chars.len())..], "\\X0\\") {
                i += 4;
            }
        } else if starts_with(rest, "\\X4\\") {
            i += 4;
            while i + 8 <= chars.len() && !starts_with(&chars[i..], "\\X0\\") {
                match hex_value(&chars[i..i + 8]).and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => break,
                }
                i += 8;
            }
            if starts_with(&chars[i.min(chars.len())..], "\\X0\\") {
                i += 4;
            }
        } else if starts_with(rest, "\\X\\") && rest.len() >= 5 {
            match hex_value(&rest[3..5]) {
                Some(b) => {
                    out.push(char::from(b as u8));
                    i += 5;
                }
                None => {
                    out.push('\\');
                    i += 1;
                }
            }
        } else if starts_with(rest, "\\S\\") && rest.len() >= 4 {
            let base = rest[3] as u32;
            out.push(char::from_u32(base + 128).unwrap_or('\u{FFFD}'));
            i += 4;
        } else if rest.len() >= 4 && rest[1] == 'P' && rest[3] == '\\' {
            // code page switch; only ISO 8859-1 is mapped precisely
            i += 4;
        } else {
            out.push('\\');
            i += 1;
        }
    }
    out
}

/// Encodes a string as the content of a string literal (without quotes).
pub fn encode_step_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending: Vec<u16> = Vec::new();
    let flush = |pending: &mut Vec<u16>, out: &mut String| {
        if !pending.is_empty() {
            out.push_str("\\X2\\");
            for u in pending.drain(..) {
                out.push_str(&format!("{u:04X}"));
            }
            out.push_str("\\X0\\");
        }
    };
    for c in s.chars() {
        match c {
            '\'' => {
                flush(&mut pending, &mut out);
                out.push_str("''");
            }
            '\\' => {
                flush(&mut pending, &mut out);
                out.push_str("\\\\");
            }
            ' '..='~' => {
                flush(&mut pending, &mut out);
                out.push(c);
            }
            _ if (c as u32) <= 0xFFFF => pending.push(c as u32 as u16),
            _ => {
                flush(&mut pending, &mut out);
                out.push_str(&format!("\\X4\\{:08X}\\X0\\", c as u32));
            }
        }
    }
    flush(&mut pending, &mut out);
    out
}

fn starts_with(chars: &[char], pat: &str) -> bool {
    let mut it = chars.iter();
    pat.chars().all(|p| it.next() == Some(&p))
}

fn hex_value(chars: &[char]) -> Option<u32> {
    chars.iter().try_fold(0u32, |acc, c| c.to_digit(16).map(|d| acc * 16 + d))
}
