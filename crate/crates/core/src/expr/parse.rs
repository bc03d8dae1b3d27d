use super::{BinOp, Expr, ExprError, Func, SymbolTable};

/// Parses infix text into an expression tree, resolving identifiers against
/// `table`. No rewriting is applied: the tree mirrors the text.
pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        table,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            // `-3` is a literal; `-3^2` and `-x` negate the whole power.
            let save = self.pos;
            if let Some(c) = self.number_literal()? {
                if self.peek() != Some(b'^') {
                    return Ok(Expr::constant(-c));
                }
            }
            self.pos = save;
            let inner = self.unary()?;
            return Ok(Expr::binary(BinOp::Mul, Expr::constant(-1.0), inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let value = self.number_literal()?.expect("digit present");
                Ok(Expr::constant(value))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                if let Some(func) = Func::from_name(name) {
                    if !self.eat(b'(') {
                        self.pos = start;
                        return Err(self.error(&format!("expected `(` after `{name}`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected `)`"));
                    }
                    return Ok(Expr::unary(func, arg));
                }
                if !self.table.contains(name) {
                    return Err(ExprError::UnknownIdentifier(name.to_string()));
                }
                Ok(Expr::symbol(name))
            }
            Some(c) => Err(self.error(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number_literal(&mut self) -> Result<Option<f64>, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Ok(None);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Some)
            .map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Node, Symbol, SymbolKind};

    fn table() -> SymbolTable {
        SymbolTable::car_following(
            &["k1".into(), "k2".into(), "tau".into(), "C".into(), "gamma".into()],
            2,
        )
        .unwrap()
    }

    #[test]
    fn difference_of_symbols() {
        let e = parse("u - v", &table()).unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Sub, Expr::symbol("u"), Expr::symbol("v"))
        );
    }

    #[test]
    fn cthrv_dynamics_shape() {
        let e = parse("k1*(s - tau*v) + k2*(u - v)", &table()).unwrap();
        let Node::Binary(BinOp::Add, lhs, rhs) = e.node() else {
            panic!("top node should be a sum: {e}");
        };
        assert_eq!(lhs.to_string(), "k1 * (s - tau * v)");
        assert_eq!(rhs.to_string(), "k2 * (u - v)");
    }

    #[test]
    fn ftl_dynamics_shape() {
        let e = parse("C*(u - v)/s^gamma", &table()).unwrap();
        let Node::Binary(BinOp::Div, num, den) = e.node() else {
            panic!("top node should be a quotient");
        };
        assert_eq!(num.to_string(), "C * (u - v)");
        assert_eq!(den, &Expr::binary(BinOp::Pow, Expr::symbol("s"), Expr::symbol("gamma")));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let t = table();
        assert_eq!(parse("s^v^u", &t).unwrap().to_string(), "s^v^u");
        let neg = parse("-s^2", &t).unwrap();
        assert_eq!(neg.to_string(), "(-1) * s^2");
        assert_eq!(parse("-2.5", &t).unwrap().as_const(), Some(-2.5));
        assert_eq!(parse("s^-2", &t).unwrap().to_string(), "s^(-2)");
        assert_eq!(parse("1.5e-3", &t).unwrap().as_const(), Some(1.5e-3));
    }

    #[test]
    fn errors_carry_position_and_name() {
        let t = table();
        assert_eq!(
            parse("s + w", &t),
            Err(ExprError::UnknownIdentifier("w".into()))
        );
        match parse("s + * v", &t) {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse("(s + v", &t), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("tanh s", &t), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("", &t), Err(ExprError::Syntax { .. })));
        let aux = SymbolTable::new(vec![Symbol::new("x", SymbolKind::Auxiliary)]).unwrap();
        assert!(parse("x ) ", &aux).is_err());
    }
}
