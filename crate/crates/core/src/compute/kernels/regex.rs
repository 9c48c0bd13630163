//! Byte-oriented regular expressions for the pattern-matching kernel.
//!
//! Supported syntax: literal bytes, `.` (any byte), `*` (zero or more),
//! `|` (alternation), `( )` grouping, character classes `[abc]`, `[a-z]`,
//! `[^...]`, and `\` to escape any of the above. Anything else (`+`, `?`,
//! `{`, `^`, `$`, ...) is rejected.
//!
//! Matching is leftmost-longest: scanning left to right, the longest match
//! starting at the first position that has a nonempty match is reported, and
//! scanning resumes at its end. Empty matches are never reported.

use crate::error::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Ast {
    Empty,
    Set(Box<ByteSet>),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Star(Box<Ast>),
}

#[derive(Clone, PartialEq, Eq)]
struct ByteSet([u64; 4]);

impl std::fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ByteSet({} bytes)", (0..=255u8).filter(|b| self.contains(*b)).count())
    }
}

impl ByteSet {
    fn empty() -> Self {
        ByteSet([0; 4])
    }

    fn full() -> Self {
        ByteSet([u64::MAX; 4])
    }

    fn single(b: u8) -> Self {
        let mut s = Self::empty();
        s.insert(b);
        s
    }

    fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1 << (b & 63);
    }

    fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] & (1 << (b & 63)) != 0
    }

    fn negate(&mut self) {
        for w in &mut self.0 {
            *w = !*w;
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, what: &str) -> KernelError {
        KernelError::UnsupportedPattern(format!("{what} at byte {}", self.pos))
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn alt(&mut self) -> Result<Ast, KernelError> {
        let mut branches = vec![self.concat()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Ast::Alt(branches) })
    }

    fn concat(&mut self) -> Result<Ast, KernelError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == b'|' || c == b')' {
                break;
            }
            let mut atom = self.atom()?;
            while self.peek() == Some(b'*') {
                self.pos += 1;
                if !matches!(atom, Ast::Star(_)) {
                    atom = Ast::Star(Box::new(atom));
                }
            }
            items.push(atom);
        }
        Ok(match items.len() {
            0 => Ast::Empty,
            1 => items.pop().unwrap(),
            _ => Ast::Concat(items),
        })
    }

    fn atom(&mut self) -> Result<Ast, KernelError> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match c {
            b'.' => Ok(Ast::Set(Box::new(ByteSet::full()))),
            b'(' => {
                let inner = self.alt()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("unclosed group"));
                }
                self.pos += 1;
                Ok(inner)
            }
            b'[' => self.class(),
            b'\\' => {
                let e = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                self.pos += 1;
                Ok(Ast::Set(Box::new(ByteSet::single(e))))
            }
            b'*' => Err(self.err("repetition without operand")),
            b'+' | b'?' | b'{' | b'}' | b'^' | b'$' | b']' => Err(self.err("unsupported operator")),
            lit => Ok(Ast::Set(Box::new(ByteSet::single(lit)))),
        }
    }

    fn class(&mut self) -> Result<Ast, KernelError> {
        let mut set = ByteSet::empty();
        let negate = self.peek() == Some(b'^');
        if negate {
            self.pos += 1;
        }
        let mut first = true;
        loop {
            let c = self.peek().ok_or_else(|| self.err("unclosed class"))?;
            self.pos += 1;
            if c == b']' && !first {
                break;
            }
            first = false;
            let lo = if c == b'\\' {
                let e = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                self.pos += 1;
                e
            } else {
                c
            };
            if self.peek() == Some(b'-') && self.src.get(self.pos + 1).is_some_and(|&n| n != b']') {
                self.pos += 1;
                let mut hi = self.peek().unwrap();
                self.pos += 1;
                if hi == b'\\' {
                    hi = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                    self.pos += 1;
                }
                if hi < lo {
                    return Err(self.err("reversed class range"));
                }
                for b in lo..=hi {
                    set.insert(b);
                }
            } else {
                set.insert(lo);
            }
        }
        if negate {
            set.negate();
        }
        Ok(Ast::Set(Box::new(set)))
    }
}

#[derive(Debug, Clone)]
enum Inst {
    Byte(Box<ByteSet>, usize),
    Split(usize, usize),
    Jump(usize),
    Match,
}

/// A compiled pattern (Thompson NFA).
#[derive(Debug, Clone)]
pub struct Regex {
    prog: Vec<Inst>,
    start: usize,
}

impl Regex {
    pub fn new(pattern: &str) -> Result<Regex, KernelError> {
        let mut p = Parser { src: pattern.as_bytes(), pos: 0 };
        let ast = p.alt()?;
        if p.pos != p.src.len() {
            return Err(p.err("unbalanced `)`"));
        }
        let mut prog = vec![Inst::Match];
        let start = compile(&ast, 0, &mut prog);
        Ok(Regex { prog, start })
    }

    fn closure(&self, pc: usize, set: &mut Vec<usize>, seen: &mut [u32], gen: u32) {
        let mut stack = vec![pc];
        while let Some(pc) = stack.pop() {
            if seen[pc] == gen {
                continue;
            }
            seen[pc] = gen;
            match &self.prog[pc] {
                Inst::Split(a, b) => {
                    stack.push(*b);
                    stack.push(*a);
                }
                Inst::Jump(t) => stack.push(*t),
                Inst::Byte(..) | Inst::Match => set.push(pc),
            }
        }
    }

    /// Length of the longest match starting at `start`, if any (may be 0).
    pub fn longest_at(&self, hay: &[u8], start: usize) -> Option<usize> {
        let mut seen = vec![0u32; self.prog.len()];
        let mut gen = 1;
        let mut cur = Vec::new();
        let mut next = Vec::new();
        self.closure(self.start, &mut cur, &mut seen, gen);
        let mut best = None;
        let mut pos = start;
        loop {
            if cur.iter().any(|&pc| matches!(self.prog[pc], Inst::Match)) {
                best = Some(pos - start);
            }
            if pos == hay.len() || cur.is_empty() {
                break;
            }
            let b = hay[pos];
            gen += 1;
            next.clear();
            for &pc in &cur {
                if let Inst::Byte(set, out) = &self.prog[pc] {
                    if set.contains(b) {
                        self.closure(*out, &mut next, &mut seen, gen);
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
            pos += 1;
        }
        best
    }

    pub fn find_all(&self, hay: &[u8]) -> Vec<Match> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < hay.len() {
            match self.longest_at(hay, pos) {
                Some(len) if len > 0 => {
                    out.push(Match { offset: pos, len });
                    pos += len;
                }
                _ => pos += 1,
            }
        }
        out
    }
}

/// Emits code for `ast` that continues at `next`; returns its entry point.
fn compile(ast: &Ast, next: usize, prog: &mut Vec<Inst>) -> usize {
    match ast {
        Ast::Empty => next,
        Ast::Set(set) => {
            prog.push(Inst::Byte(set.clone(), next));
            prog.len() - 1
        }
        Ast::Concat(items) => items.iter().rev().fold(next, |cont, item| compile(item, cont, prog)),
        Ast::Alt(branches) => {
            let entries: Vec<usize> = branches.iter().map(|b| compile(b, next, prog)).collect();
            entries
                .into_iter()
                .rev()
                .reduce(|rest, entry| {
                    prog.push(Inst::Split(entry, rest));
                    prog.len() - 1
                })
                .unwrap()
        }
        Ast::Star(inner) => {
            // loop: split -> (inner -> jump loop) | next
            prog.push(Inst::Jump(usize::MAX));
            let jump = prog.len() - 1;
            let body = compile(inner, jump, prog);
            prog.push(Inst::Split(body, next));
            let split = prog.len() - 1;
            prog[jump] = Inst::Jump(split);
            split
        }
    }
}

pub fn regex_match(hay: &[u8], pattern: &str) -> Result<Vec<Match>, KernelError> {
    Ok(Regex::new(pattern)?.find_all(hay))
}
