//! Textual assembly for the simulator ISA.
//!
//! Statements are separated by newlines or `;`. A statement may carry any
//! number of `name:` prefixes, each of which becomes a LABEL slot. `#` and
//! `//` start a comment. `.rept N` / `.endr` repeat the enclosed statements
//! and may share a line with them (`.rept 6 NOP .endr`). Mnemonics and
//! register names are case-insensitive; immediates are decimal or `0x` hex.

use std::collections::HashMap;

use super::{AsmError, Instruction, MemRef, Opcode, Operand, Program, Reg};

struct Frame {
    count: usize,
    line: usize,
    body: Vec<(Instruction, usize)>,
}

pub fn assemble(source: &str) -> Result<Program, AsmError> {
    let mut stack = vec![Frame {
        count: 1,
        line: 0,
        body: Vec::new(),
    }];

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = strip_comment(raw);
        for stmt in text.split(';') {
            parse_statement(stmt, line, &mut stack)?;
        }
    }

    if stack.len() > 1 {
        let open = stack.last().map(|f| f.line).unwrap_or_default();
        return Err(AsmError::Parse {
            line: open,
            message: "unterminated .rept".into(),
        });
    }
    let items = stack.pop().map(|f| f.body).unwrap_or_default();
    check_labels(&items)?;
    Program::new(items.into_iter().map(|(i, _)| i).collect())
}

/// Canonical text for `program`; `assemble` of the result reproduces it.
pub fn disassemble(program: &Program) -> String {
    let mut out = String::new();
    for instr in program.instructions() {
        out.push_str(&instr.to_string());
        out.push('\n');
    }
    out
}

fn strip_comment(line: &str) -> &str {
    let cut = [line.find('#'), line.find("//")]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(line.len());
    &line[..cut]
}

fn parse_err(line: usize, message: impl Into<String>) -> AsmError {
    AsmError::Parse {
        line,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn emit(stack: &mut [Frame], instr: Instruction, line: usize) {
    stack
        .last_mut()
        .expect("root frame always present")
        .body
        .push((instr, line));
}

fn close_rept(stack: &mut Vec<Frame>, line: usize) -> Result<(), AsmError> {
    if stack.len() < 2 {
        return Err(parse_err(line, ".endr without .rept"));
    }
    let frame = stack.pop().unwrap();
    let parent = stack.last_mut().unwrap();
    for _ in 0..frame.count {
        parent.body.extend(frame.body.iter().cloned());
    }
    Ok(())
}

fn parse_statement(stmt: &str, line: usize, stack: &mut Vec<Frame>) -> Result<(), AsmError> {
    let mut rest = stmt.trim();
    while !rest.is_empty() {
        // Label prefixes.
        if let Some(colon) = rest.find(':') {
            let head = rest[..colon].trim();
            if is_ident(head) && !head.starts_with('.') && !head.contains(char::is_whitespace) {
                emit(stack, Instruction::label(head), line);
                rest = rest[colon + 1..].trim_start();
                continue;
            }
        }

        let (word, tail) = split_word(rest);
        let lower = word.to_ascii_lowercase();
        if lower == ".rept" {
            let (count, tail) = split_word(tail);
            let count = parse_number(count)
                .ok_or_else(|| parse_err(line, format!("bad .rept count `{count}`")))?;
            stack.push(Frame {
                count: count as usize,
                line,
                body: Vec::new(),
            });
            rest = tail;
            continue;
        }
        if lower == ".endr" {
            close_rept(stack, line)?;
            rest = tail;
            continue;
        }

        let opcode: Opcode = word
            .parse()
            .map_err(|_| parse_err(line, format!("unknown mnemonic `{word}`")))?;

        // Operands run up to a trailing directive, if any.
        let (operand_text, after) = match tail.find(" .") {
            Some(pos)
                if tail[pos + 1..].starts_with(".endr") || tail[pos + 1..].starts_with(".rept") =>
            {
                (&tail[..pos], tail[pos..].trim_start())
            }
            _ if tail.starts_with('.') => ("", tail),
            _ => (tail, ""),
        };
        let operands = parse_operands(opcode, operand_text.trim(), line)?;
        let instr = Instruction::new(opcode, operands);
        instr.validate().map_err(|m| parse_err(line, m))?;
        emit(stack, instr, line);
        rest = after;
    }
    Ok(())
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(pos) => (&s[..pos], s[pos..].trim_start()),
        None => (s, ""),
    }
}

fn parse_number(s: &str) -> Option<u64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b.trim_start()),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()?
    } else if body.chars().all(|c| c.is_ascii_digit()) && !body.is_empty() {
        body.parse().ok()?
    } else {
        return None;
    };
    Some(if neg { v.wrapping_neg() } else { v })
}

fn parse_mem(inner: &str, line: usize) -> Result<MemRef, AsmError> {
    let inner = inner.trim();
    let split = inner.find(['+', '-']);
    let (base, disp) = match split {
        Some(pos) => {
            let d = parse_number(&inner[pos..].replace(' ', ""))
                .ok_or_else(|| parse_err(line, format!("bad displacement in `[{inner}]`")))?;
            (inner[..pos].trim(), d as i64)
        }
        None => (inner, 0),
    };
    let base: Reg = base
        .parse()
        .map_err(|_| parse_err(line, format!("bad base register `{base}`")))?;
    Ok(MemRef::new(base, disp))
}

fn parse_operands(opcode: Opcode, text: &str, line: usize) -> Result<Vec<Operand>, AsmError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|raw| {
            let tok = raw.trim();
            if opcode.takes_label() {
                return if is_ident(tok) {
                    Ok(Operand::Label(tok.to_string()))
                } else {
                    Err(parse_err(line, format!("bad label `{tok}`")))
                };
            }
            if let Some(inner) = tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                return parse_mem(inner, line).map(Operand::Mem);
            }
            if let Ok(r) = tok.parse::<Reg>() {
                return Ok(Operand::Reg(r));
            }
            parse_number(tok)
                .map(Operand::Imm)
                .ok_or_else(|| parse_err(line, format!("bad operand `{tok}`")))
        })
        .collect()
}

fn check_labels(items: &[(Instruction, usize)]) -> Result<(), AsmError> {
    let mut defined: HashMap<&str, usize> = HashMap::new();
    for (instr, line) in items {
        if instr.opcode == Opcode::Label {
            let name = instr.label_name().unwrap_or_default();
            if defined.insert(name, *line).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line: *line,
                    label: name.to_string(),
                });
            }
        }
    }
    for (instr, line) in items {
        if instr.opcode.takes_label() {
            let name = instr.label_name().unwrap_or_default();
            if !defined.contains_key(name) {
                return Err(AsmError::UndefinedLabel {
                    line: *line,
                    label: name.to_string(),
                });
            }
        }
    }
    Ok(())
}
