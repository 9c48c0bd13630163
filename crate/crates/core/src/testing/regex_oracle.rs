//! Brute-force regex reference: random small patterns are generated as trees,
//! printed for the real engine, and matched here by exhaustive backtracking
//! over every (start, end) pair.

use rand::Rng;

#[derive(Debug, Clone)]
pub enum Node {
    Lit(u8),
    Any,
    Class { negated: bool, members: Vec<u8> },
    Cat(Vec<Node>),
    Alt(Vec<Node>),
    Star(Box<Node>),
}

const ALPHABET: &[u8] = b"abc";

impl Node {
    fn render(&self, out: &mut Vec<String>) {
        match self {
            Node::Lit(b) => out.push((*b as char).to_string()),
            Node::Any => out.push(".".into()),
            Node::Class { negated, members } => {
                let mut s = String::from("[");
                if *negated {
                    s.push('^');
                }
                s.extend(members.iter().map(|&b| b as char));
                s.push(']');
                out.push(s);
            }
            Node::Cat(items) => {
                for item in items {
                    let wrap = matches!(item, Node::Alt(_));
                    if wrap {
                        out.push("(".into());
                    }
                    item.render(out);
                    if wrap {
                        out.push(")".into());
                    }
                }
            }
            Node::Alt(branches) => {
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push("|".into());
                    }
                    b.render(out);
                }
            }
            Node::Star(inner) => {
                let wrap = matches!(**inner, Node::Cat(_) | Node::Alt(_) | Node::Star(_));
                if wrap {
                    out.push("(".into());
                }
                inner.render(out);
                if wrap {
                    out.push(")".into());
                }
                out.push("*".into());
            }
        }
    }

    /// Pattern text and its token count.
    pub fn pattern(&self) -> (String, usize) {
        let mut toks = Vec::new();
        self.render(&mut toks);
        let n = toks.len();
        (toks.concat(), n)
    }

    fn random<R: Rng>(rng: &mut R, depth: u32) -> Node {
        let leaf = depth == 0 || rng.gen_bool(0.45);
        if leaf {
            return match rng.gen_range(0..6) {
                0 => Node::Any,
                1 => {
                    let mut members: Vec<u8> =
                        ALPHABET.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                    if members.is_empty() {
                        members.push(b'a');
                    }
                    Node::Class { negated: rng.gen_bool(0.3), members }
                }
                _ => Node::Lit(ALPHABET[rng.gen_range(0..ALPHABET.len())]),
            };
        }
        match rng.gen_range(0..3) {
            0 => Node::Cat((0..rng.gen_range(2..4)).map(|_| Node::random(rng, depth - 1)).collect()),
            1 => Node::Alt((0..2).map(|_| Node::random(rng, depth - 1)).collect()),
            _ => Node::Star(Box::new(Node::random(rng, depth - 1))),
        }
    }

    fn accepts(&self, b: u8) -> bool {
        match self {
            Node::Lit(l) => *l == b,
            Node::Any => true,
            Node::Class { negated, members } => members.contains(&b) != *negated,
            _ => unreachable!(),
        }
    }

    /// Calls `k(end)` for every way this node can match starting at `i`;
    /// stops early when `k` returns true.
    fn walk(&self, s: &[u8], i: usize, k: &mut dyn FnMut(usize) -> bool) -> bool {
        match self {
            Node::Lit(_) | Node::Any | Node::Class { .. } => i < s.len() && self.accepts(s[i]) && k(i + 1),
            Node::Cat(items) => walk_seq(items, s, i, k),
            Node::Alt(branches) => branches.iter().any(|b| b.walk(s, i, k)),
            Node::Star(inner) => {
                if k(i) {
                    return true;
                }
                // only iterate on progress, so empty bodies cannot loop
                inner.walk(s, i, &mut |j| j > i && self.walk(s, j, k))
            }
        }
    }
}

fn walk_seq(items: &[Node], s: &[u8], i: usize, k: &mut dyn FnMut(usize) -> bool) -> bool {
    match items.split_first() {
        None => k(i),
        Some((first, rest)) => first.walk(s, i, &mut |j| walk_seq(rest, s, j, k)),
    }
}

fn full_match(node: &Node, s: &[u8], i: usize, j: usize) -> bool {
    node.walk(&s[..j], i, &mut |end| end == j)
}

/// Leftmost-longest, non-overlapping, nonempty matches.
pub fn find_all_tree(hay: &[u8], node: &Node) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < hay.len() {
        let longest = (i + 1..=hay.len()).rev().find(|&j| full_match(node, hay, i, j));
        match longest {
            Some(j) => {
                out.push((i, j - i));
                i = j;
            }
            None => i += 1,
        }
    }
    out
}

pub struct Case {
    pub pattern: String,
    pub hay: Vec<u8>,
    tree: Node,
}

impl Case {
    pub fn expected(&self) -> Vec<(usize, usize)> {
        find_all_tree(&self.hay, &self.tree)
    }
}

/// Random pattern of at most 8 tokens and a haystack of at most 32 bytes.
pub fn random_case<R: Rng>(rng: &mut R) -> Case {
    let tree = loop {
        let n = Node::random(rng, 3);
        if n.pattern().1 <= 8 {
            break n;
        }
    };
    let (pattern, _) = tree.pattern();
    let len = rng.gen_range(0..=32);
    let hay: Vec<u8> = (0..len).map(|_| b"abcd"[rng.gen_range(0..4)]).collect();
    Case { pattern, hay, tree }
}
