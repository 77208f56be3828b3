use super::{BinOp, Expr, ExprError, Func, Var};

impl Expr {
    /// Evaluates at `(s, v, w)`. Any non-finite intermediate is a domain fault.
    pub fn eval(&self, s: f64, v: f64, w: f64) -> Result<f64, ExprError> {
        let x = match self {
            Expr::Num(x) => *x,
            Expr::Var(Var::S) => s,
            Expr::Var(Var::V) => v,
            Expr::Var(Var::W) => w,
            Expr::Neg(e) => -e.eval(s, v, w)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(s, v, w)?;
                let b = r.eval(s, v, w)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.fault("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(s, v, w)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.fault("logarithm of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.fault("square root of a negative number"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Tanh => a.tanh(),
                    Func::Min => a.min(args[1].eval(s, v, w)?),
                    Func::Max => a.max(args[1].eval(s, v, w)?),
                }
            }
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(self.fault("non-finite result"))
        }
    }

    fn fault(&self, reason: &str) -> ExprError {
        ExprError::Eval {
            node: self.to_string(),
            reason: reason.into(),
        }
    }
}
