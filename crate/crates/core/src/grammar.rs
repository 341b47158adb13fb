//! Typed concept expressions.
//!
//! A concept classifies `(n, x)` pairs, where `n` is the total number of items
//! (in `[5, 100]`) and `x` is how many of them the subject has (in `[0, n]`).
//! Expressions are built from comparisons of `x` against either an integer
//! constant or a fixed fraction of `n`, combined with `and` / `or`:
//!
//! ```text
//! Bool         -> Bool and Bool | Bool or Bool
//! Bool         -> x == Int | x != Int | x > Int | x < Int
//! Bool         -> x > Scaled | x < Scaled
//! Scaled       -> Fraction * n
//! Int          -> [0, 100]
//! Fraction     -> 1/5 | 1/4 | 1/3 | 2/5 | 1/2 | 3/5 | 2/3 | 3/4 | 4/5
//! ```
//!
//! Ill-typed forms such as `x == 1/2 * n` or `n < 5` are unrepresentable: the
//! only way to build a [`Comparison`] is through [`Comparison::new`], which
//! enforces the rules above.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest integer constant the grammar admits.
pub const MAX_CONSTANT: u8 = 100;

/// An exact rational drawn from the grammar's fixed list of fractions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fraction {
    numerator: u8,
    denominator: u8,
}

/// Every fraction the grammar can multiply `n` by, in ascending order.
pub const FRACTIONS: [Fraction; 9] = [
    Fraction::raw(1, 5),
    Fraction::raw(1, 4),
    Fraction::raw(1, 3),
    Fraction::raw(2, 5),
    Fraction::raw(1, 2),
    Fraction::raw(3, 5),
    Fraction::raw(2, 3),
    Fraction::raw(3, 4),
    Fraction::raw(4, 5),
];

impl Fraction {
    const fn raw(numerator: u8, denominator: u8) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    /// Looks up `numerator/denominator` in the grammar's fraction list.
    /// Unreduced spellings (`2/4`) are not accepted.
    pub fn new(numerator: u32, denominator: u32) -> Option<Self> {
        FRACTIONS
            .iter()
            .copied()
            .find(|f| u32::from(f.numerator) == numerator && u32::from(f.denominator) == denominator)
    }

    pub fn numerator(self) -> u8 {
        self.numerator
    }

    pub fn denominator(self) -> u8 {
        self.denominator
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// The two integer variables a concept talks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarRef {
    /// Total number of items, `n` (grammar symbol `Var1`).
    Total,
    /// The subject's number of items, `x` (grammar symbol `Var2`).
    Count,
}

impl VarRef {
    pub fn symbol(self) -> &'static str {
        match self {
            VarRef::Total => "n",
            VarRef::Count => "x",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompareOp {
    Eq,
    Neq,
    Gt,
    Lt,
}

impl CompareOp {
    pub const ALL: [CompareOp; 4] = [CompareOp::Eq, CompareOp::Neq, CompareOp::Gt, CompareOp::Lt];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Neq => "!=",
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
        }
    }

    /// The operator obtained by swapping operands (`a > b` iff `b < a`).
    pub fn flipped(self) -> Self {
        match self {
            CompareOp::Gt => CompareOp::Lt,
            CompareOp::Lt => CompareOp::Gt,
            op => op,
        }
    }
}

/// Right-hand side of a comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NumericTerm {
    /// Integer constant in `[0, 100]`.
    Int(u8),
    /// `fraction * n`: the only multiplication the grammar allows.
    Scaled(Fraction),
}

impl fmt::Display for NumericTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericTerm::Int(v) => write!(f, "{v}"),
            NumericTerm::Scaled(frac) => write!(f, "{frac} * n"),
        }
    }
}

/// A well-typed comparison `x <op> <term>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    op: CompareOp,
    rhs: NumericTerm,
}

impl Comparison {
    pub fn new(op: CompareOp, rhs: NumericTerm) -> Result<Self, TypeError> {
        match rhs {
            NumericTerm::Int(v) if v > MAX_CONSTANT => Err(TypeError::ConstantOutOfRange(u32::from(v))),
            NumericTerm::Scaled(_) if matches!(op, CompareOp::Eq | CompareOp::Neq) => {
                Err(TypeError::EqualityWithScaled(op))
            }
            _ => Ok(Self { op, rhs }),
        }
    }

    pub fn op(&self) -> CompareOp {
        self.op
    }

    pub fn rhs(&self) -> NumericTerm {
        self.rhs
    }

    /// Left-hand side is always the subject's count.
    pub fn lhs(&self) -> VarRef {
        VarRef::Count
    }

    /// Exact truth value on one `(total, num)` pair. Scaled thresholds are
    /// compared by cross-multiplication so no rounding is involved.
    #[inline]
    pub fn holds(&self, total: u32, num: u32) -> bool {
        match self.rhs {
            NumericTerm::Int(c) => {
                let c = u32::from(c);
                match self.op {
                    CompareOp::Eq => num == c,
                    CompareOp::Neq => num != c,
                    CompareOp::Gt => num > c,
                    CompareOp::Lt => num < c,
                }
            }
            NumericTerm::Scaled(frac) => {
                let lhs = num * u32::from(frac.denominator);
                let rhs = u32::from(frac.numerator) * total;
                match self.op {
                    CompareOp::Gt => lhs > rhs,
                    CompareOp::Lt => lhs < rhs,
                    CompareOp::Eq | CompareOp::Neq => unreachable!("rejected by Comparison::new"),
                }
            }
        }
    }

    /// Operators in this comparison: the comparison itself, plus one for a `*`.
    pub fn operator_count(&self) -> usize {
        match self.rhs {
            NumericTerm::Int(_) => 1,
            NumericTerm::Scaled(_) => 2,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x {} {})", self.op.symbol(), self.rhs)
    }
}

/// A concept expression: a finite tree of comparisons joined by `and` / `or`.
///
/// Children are reference counted so enumerated expressions can share
/// subtrees; the tree itself is immutable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConceptExpr {
    And(Arc<ConceptExpr>, Arc<ConceptExpr>),
    Or(Arc<ConceptExpr>, Arc<ConceptExpr>),
    Compare(Comparison),
}

impl ConceptExpr {
    pub fn compare(op: CompareOp, rhs: NumericTerm) -> Result<Self, TypeError> {
        Comparison::new(op, rhs).map(ConceptExpr::Compare)
    }

    pub fn and(lhs: ConceptExpr, rhs: ConceptExpr) -> Self {
        ConceptExpr::And(Arc::new(lhs), Arc::new(rhs))
    }

    pub fn or(lhs: ConceptExpr, rhs: ConceptExpr) -> Self {
        ConceptExpr::Or(Arc::new(lhs), Arc::new(rhs))
    }

    /// Number of operator nodes (`==`, `!=`, `>`, `<`, `*`, `and`, `or`),
    /// i.e. the expression's description length.
    pub fn count_operators(&self) -> usize {
        match self {
            ConceptExpr::And(a, b) | ConceptExpr::Or(a, b) => 1 + a.count_operators() + b.count_operators(),
            ConceptExpr::Compare(c) => c.operator_count(),
        }
    }

    /// Fully parenthesized text form; inverse of [`parse_expression`].
    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn evaluate(&self, total: u32, num: u32) -> bool {
        match self {
            ConceptExpr::And(a, b) => a.evaluate(total, num) && b.evaluate(total, num),
            ConceptExpr::Or(a, b) => a.evaluate(total, num) || b.evaluate(total, num),
            ConceptExpr::Compare(c) => c.holds(total, num),
        }
    }

    /// Leaf comparisons, left to right.
    pub fn comparisons(&self) -> Vec<Comparison> {
        let mut out = Vec::new();
        self.collect_comparisons(&mut out);
        out
    }

    fn collect_comparisons(&self, out: &mut Vec<Comparison>) {
        match self {
            ConceptExpr::And(a, b) | ConceptExpr::Or(a, b) => {
                a.collect_comparisons(out);
                b.collect_comparisons(out);
            }
            ConceptExpr::Compare(c) => out.push(*c),
        }
    }
}

impl fmt::Display for ConceptExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConceptExpr::And(a, b) => write!(f, "({a} and {b})"),
            ConceptExpr::Or(a, b) => write!(f, "({a} or {b})"),
            ConceptExpr::Compare(c) => c.fmt(f),
        }
    }
}

impl FromStr for ConceptExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

impl Serialize for ConceptExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConceptExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(serde::de::Error::custom)
    }
}

/// Sorts the children of every `and` / `or` node by their rendered text.
///
/// Operator count and extension are unchanged; commuted spellings of the same
/// expression map to one tree.
pub fn canonicalize(expr: &ConceptExpr) -> ConceptExpr {
    canonical_with_text(expr).0
}

fn canonical_with_text(expr: &ConceptExpr) -> (ConceptExpr, String) {
    match expr {
        ConceptExpr::Compare(c) => (expr.clone(), c.to_string()),
        ConceptExpr::And(a, b) => {
            let (a, b, text) = ordered_pair(a, b, "and");
            (ConceptExpr::And(a, b), text)
        }
        ConceptExpr::Or(a, b) => {
            let (a, b, text) = ordered_pair(a, b, "or");
            (ConceptExpr::Or(a, b), text)
        }
    }
}

fn ordered_pair(a: &ConceptExpr, b: &ConceptExpr, word: &str) -> (Arc<ConceptExpr>, Arc<ConceptExpr>, String) {
    let (a, a_text) = canonical_with_text(a);
    let (b, b_text) = canonical_with_text(b);
    if a_text <= b_text {
        let text = format!("({a_text} {word} {b_text})");
        (Arc::new(a), Arc::new(b), text)
    } else {
        let text = format!("({b_text} {word} {a_text})");
        (Arc::new(b), Arc::new(a), text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("constant {0} is outside [0, 100]")]
    ConstantOutOfRange(u32),
    #[error("`{}` cannot compare against a scaled total", .0.symbol())]
    EqualityWithScaled(CompareOp),
    #[error("{0}/{1} is not one of the grammar's fractions")]
    UnknownFraction(u32, u32),
    #[error("only the total n may be scaled by a fraction")]
    ScaledCount,
    #[error("a comparison must relate x to a constant or a scaled total")]
    BadOperands,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("type error at byte {position}: {source}")]
    Type { position: usize, source: TypeError },
}

impl ExprError {
    pub fn position(&self) -> usize {
        match self {
            ExprError::Parse { position, .. } | ExprError::Type { position, .. } => *position,
        }
    }
}

/// Parses the textual form produced by [`ConceptExpr::render`].
///
/// Parentheses around comparisons are optional, whitespace is free, `and`
/// binds tighter than `or`, and chains associate to the left. A comparison
/// written with `x` on the right (`10 > x`) is normalized to `x < 10`.
pub fn parse_expression(text: &str) -> Result<ConceptExpr, ExprError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.parse_or()?;
    match parser.peek() {
        (Token::End, _) => Ok(expr),
        (tok, at) => Err(parse_err(at, format!("unexpected {tok} after expression"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    LParen,
    RParen,
    And,
    Or,
    Op(CompareOp),
    Star,
    Slash,
    Int(u32),
    Var(VarRef),
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::And => f.write_str("`and`"),
            Token::Or => f.write_str("`or`"),
            Token::Op(op) => write!(f, "`{}`", op.symbol()),
            Token::Star => f.write_str("`*`"),
            Token::Slash => f.write_str("`/`"),
            Token::Int(v) => write!(f, "`{v}`"),
            Token::Var(v) => write!(f, "`{}`", v.symbol()),
            Token::End => f.write_str("end of input"),
        }
    }
}

fn parse_err(position: usize, message: impl Into<String>) -> ExprError {
    ExprError::Parse {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let token = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'>' => Token::Op(CompareOp::Gt),
            b'<' => Token::Op(CompareOp::Lt),
            b'=' | b'!' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(parse_err(i, format!("expected `{}=`", c as char)));
                }
                i += 1;
                Token::Op(if c == b'=' { CompareOp::Eq } else { CompareOp::Neq })
            }
            b'0'..=b'9' => {
                while i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                }
                let digits = &text[start..=i];
                let value = digits
                    .parse::<u32>()
                    .map_err(|_| parse_err(start, format!("integer `{digits}` is too large")))?;
                Token::Int(value)
            }
            c if c.is_ascii_alphabetic() => {
                while i + 1 < bytes.len() && bytes[i + 1].is_ascii_alphanumeric() {
                    i += 1;
                }
                match &text[start..=i] {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "x" => Token::Var(VarRef::Count),
                    "n" => Token::Var(VarRef::Total),
                    word => return Err(parse_err(start, format!("unknown word `{word}`"))),
                }
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(parse_err(start, format!("unexpected character `{ch}`")));
            }
        };
        tokens.push((token, start));
        i += 1;
    }
    tokens.push((Token::End, text.len()));
    Ok(tokens)
}

enum Operand {
    Var(VarRef),
    Int(u32),
    Product { numerator: u32, denominator: u32, var: VarRef },
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> (Token, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Token, usize) {
        let tok = self.peek();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Token) -> Result<usize, ExprError> {
        let (tok, at) = self.bump();
        if tok == want {
            Ok(at)
        } else {
            Err(parse_err(at, format!("expected {want}, found {tok}")))
        }
    }

    fn parse_or(&mut self) -> Result<ConceptExpr, ExprError> {
        let mut lhs = self.parse_and()?;
        while self.peek().0 == Token::Or {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = ConceptExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<ConceptExpr, ExprError> {
        let mut lhs = self.parse_primary()?;
        while self.peek().0 == Token::And {
            self.bump();
            let rhs = self.parse_primary()?;
            lhs = ConceptExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_primary(&mut self) -> Result<ConceptExpr, ExprError> {
        if self.peek().0 == Token::LParen {
            self.bump();
            let inner = self.parse_or()?;
            self.expect(Token::RParen)?;
            return Ok(inner);
        }
        self.parse_comparison()
    }

    fn parse_comparison(&mut self) -> Result<ConceptExpr, ExprError> {
        let start = self.peek().1;
        let lhs = self.parse_operand()?;
        let op = match self.bump() {
            (Token::Op(op), _) => op,
            (tok, at) => return Err(parse_err(at, format!("expected a comparison operator, found {tok}"))),
        };
        let rhs = self.parse_operand()?;
        let type_err = |source| ExprError::Type { position: start, source };

        let (op, term) = match (lhs, rhs) {
            (Operand::Var(VarRef::Count), term) => (op, term),
            (term, Operand::Var(VarRef::Count)) => (op.flipped(), term),
            _ => return Err(type_err(TypeError::BadOperands)),
        };
        let rhs = match term {
            Operand::Int(v) if v > u32::from(MAX_CONSTANT) => return Err(type_err(TypeError::ConstantOutOfRange(v))),
            Operand::Int(v) => NumericTerm::Int(v as u8),
            Operand::Product { var: VarRef::Count, .. } => return Err(type_err(TypeError::ScaledCount)),
            Operand::Product {
                numerator, denominator, ..
            } => NumericTerm::Scaled(
                Fraction::new(numerator, denominator)
                    .ok_or_else(|| type_err(TypeError::UnknownFraction(numerator, denominator)))?,
            ),
            Operand::Var(_) => return Err(type_err(TypeError::BadOperands)),
        };
        ConceptExpr::compare(op, rhs).map_err(type_err)
    }

    fn parse_operand(&mut self) -> Result<Operand, ExprError> {
        match self.bump() {
            (Token::Var(v), _) => Ok(Operand::Var(v)),
            (Token::Int(value), _) => {
                if self.peek().0 != Token::Slash {
                    return Ok(Operand::Int(value));
                }
                self.bump();
                let denominator = match self.bump() {
                    (Token::Int(d), _) => d,
                    (tok, at) => return Err(parse_err(at, format!("expected a denominator, found {tok}"))),
                };
                self.expect(Token::Star)?;
                let var = match self.bump() {
                    (Token::Var(v), _) => v,
                    (tok, at) => return Err(parse_err(at, format!("expected a variable, found {tok}"))),
                };
                Ok(Operand::Product {
                    numerator: value,
                    denominator,
                    var,
                })
            }
            (tok, at) => Err(parse_err(at, format!("expected a variable or number, found {tok}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(op: CompareOp, v: u8) -> ConceptExpr {
        ConceptExpr::compare(op, NumericTerm::Int(v)).unwrap()
    }

    fn half() -> Fraction {
        Fraction::new(1, 2).unwrap()
    }

    #[test]
    fn operator_counts() {
        let between = ConceptExpr::and(int(CompareOp::Gt, 5), int(CompareOp::Lt, 10));
        assert_eq!(between.count_operators(), 3);
        assert_eq!(int(CompareOp::Lt, 5).count_operators(), 1);
        let less_than_half = ConceptExpr::compare(CompareOp::Lt, NumericTerm::Scaled(half())).unwrap();
        assert_eq!(less_than_half.count_operators(), 2);
    }

    #[test]
    fn rendering() {
        let between = ConceptExpr::and(int(CompareOp::Gt, 5), int(CompareOp::Lt, 10));
        assert_eq!(between.render(), "((x > 5) and (x < 10))");
        let less_than_half = ConceptExpr::compare(CompareOp::Lt, NumericTerm::Scaled(half())).unwrap();
        assert_eq!(less_than_half.render(), "(x < 1/2 * n)");
        assert_eq!(int(CompareOp::Eq, 0).render(), "(x == 0)");
    }

    #[test]
    fn parses_rendered_and_loose_forms() {
        assert_eq!(parse_expression("(x < 5)").unwrap(), int(CompareOp::Lt, 5));
        assert_eq!(parse_expression("  x<5 ").unwrap(), int(CompareOp::Lt, 5));
        assert_eq!(parse_expression("(10 > x)").unwrap(), int(CompareOp::Lt, 10));
        let e = parse_expression("x > 5 and x < 10 or x == 50").unwrap();
        assert_eq!(e.render(), "(((x > 5) and (x < 10)) or (x == 50))");
        assert_eq!(parse_expression("(x < 1/2 * n)").unwrap().count_operators(), 2);
    }

    #[test]
    fn rejects_ill_typed_forms() {
        for text in ["x == 1/3 * n", "(x != 1/2 * n)", "x < 1/3 * x", "n < 5", "x < 2/4 * n", "x < 101", "x < n", "5 < 6"] {
            match parse_expression(text) {
                Err(ExprError::Type { .. }) => {}
                other => panic!("{text}: expected a type error, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for text in ["(x > )", "", "(x > 5", "x > 5)", "x = 5", "y > 5", "x > 5 and", "x > 1/2 n", "x > 5 # 3"] {
            match parse_expression(text) {
                Err(ExprError::Parse { .. }) => {}
                other => panic!("{text:?}: expected a parse error, got {other:?}"),
            }
        }
        assert_eq!(parse_expression("(x > )").unwrap_err().position(), 5);
    }

    #[test]
    fn constructor_enforces_types() {
        assert_eq!(
            Comparison::new(CompareOp::Eq, NumericTerm::Scaled(half())),
            Err(TypeError::EqualityWithScaled(CompareOp::Eq))
        );
        assert_eq!(
            Comparison::new(CompareOp::Lt, NumericTerm::Int(101)),
            Err(TypeError::ConstantOutOfRange(101))
        );
        assert_eq!(Fraction::new(2, 4), None);
        assert_eq!(FRACTIONS.len(), 9);
    }

    #[test]
    fn canonical_child_order() {
        let or = ConceptExpr::or(int(CompareOp::Gt, 17), int(CompareOp::Lt, 5));
        assert_eq!(canonicalize(&or), ConceptExpr::or(int(CompareOp::Lt, 5), int(CompareOp::Gt, 17)));
        assert_eq!(canonicalize(&int(CompareOp::Lt, 5)), int(CompareOp::Lt, 5));
        let a = int(CompareOp::Eq, 3);
        let b = int(CompareOp::Gt, 40);
        assert_eq!(
            canonicalize(&ConceptExpr::and(a.clone(), b.clone())),
            canonicalize(&ConceptExpr::and(b, a))
        );
    }

    #[test]
    fn scaled_comparison_is_exact_at_boundaries() {
        // 1/2 * 10 = 5 exactly: x < 5 is false at x = 5, x > 5 false too.
        let lt = Comparison::new(CompareOp::Lt, NumericTerm::Scaled(half())).unwrap();
        let gt = Comparison::new(CompareOp::Gt, NumericTerm::Scaled(half())).unwrap();
        assert!(lt.holds(10, 4));
        assert!(!lt.holds(10, 5));
        assert!(!gt.holds(10, 5));
        assert!(gt.holds(10, 6));
        let third = Comparison::new(CompareOp::Lt, NumericTerm::Scaled(Fraction::new(1, 3).unwrap())).unwrap();
        assert!(third.holds(99, 32));
        assert!(!third.holds(99, 33));
    }
}
