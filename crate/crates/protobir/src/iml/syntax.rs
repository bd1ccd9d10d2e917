//! IML abstract syntax and its surface printer.

use crate::bir::syntax::{Label, WIDTHS};
use crate::bits::Bits;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Binary builtins written infix.
pub const INFIX: [&str; 14] = ["∨", "∧", "⊻", "=", "<>", "<", "<=", "<<", ">>", "+", "-", "*", "/", "%"];

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IExp {
    Bits(Bits),
    Var(String),
    App(String, Vec<IExp>),
    /// The undefined value.
    Bot,
}

impl IExp {
    pub fn var(name: &str) -> IExp {
        IExp::Var(name.to_string())
    }

    pub fn word(v: u128, w: usize) -> IExp {
        IExp::Bits(Bits::from_u128(v, w))
    }

    pub fn app(op: &str, args: Vec<IExp>) -> IExp {
        IExp::App(op.to_string(), args)
    }

    pub fn bin(op: &str, a: IExp, b: IExp) -> IExp {
        IExp::App(op.to_string(), vec![a, b])
    }

    pub fn free_vars(&self, out: &mut Vec<String>) {
        match self {
            IExp::Var(v) if !out.contains(v) => out.push(v.clone()),
            IExp::App(_, args) => args.iter().for_each(|a| a.free_vars(out)),
            _ => {}
        }
    }

    pub fn contains_bot(&self) -> bool {
        match self {
            IExp::Bot => true,
            IExp::App(_, args) => args.iter().any(IExp::contains_bot),
            _ => false,
        }
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> IExp {
        match self {
            IExp::Var(v) => IExp::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            IExp::App(op, args) => IExp::App(op.clone(), args.iter().map(|a| a.rename(map)).collect()),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Process {
    Nil,
    Par(Arc<Process>, Arc<Process>),
    /// `!^{counter<=bound} body; cont`: spawns `bound` copies of `body` with the counter
    /// bound to 1..=bound, then continues as `cont`.
    Repl { counter: String, bound: u64, body: Arc<Process>, cont: Arc<Process> },
    New { var: String, bits: usize, cont: Arc<Process> },
    In { chan: String, ids: Vec<IExp>, var: String, cont: Arc<Process> },
    Out { chan: String, ids: Vec<IExp>, payload: IExp, cont: Arc<Process> },
    Event { name: String, args: Vec<IExp>, cont: Arc<Process> },
    If { cond: IExp, then: Arc<Process>, else_: Arc<Process> },
    Let { var: String, exp: IExp, cont: Arc<Process> },
    Assume { cond: IExp, cont: Arc<Process> },
    /// Hands control to a program at `pc`. `slot` numbers the run sites of a system.
    Run { pc: Label, args: Vec<IExp>, slot: usize },
}

impl Process {
    pub fn par(a: Process, b: Process) -> Process {
        Process::Par(Arc::new(a), Arc::new(b))
    }

    /// Right-nested parallel composition; empty is `0`.
    pub fn par_all(mut ps: Vec<Process>) -> Process {
        let Some(mut acc) = ps.pop() else { return Process::Nil };
        while let Some(p) = ps.pop() {
            acc = Process::par(p, acc);
        }
        acc
    }

    pub fn new_(var: &str, bits: usize, cont: Process) -> Process {
        Process::New { var: var.into(), bits, cont: Arc::new(cont) }
    }

    pub fn input(chan: &str, ids: Vec<IExp>, var: &str, cont: Process) -> Process {
        Process::In { chan: chan.into(), ids, var: var.into(), cont: Arc::new(cont) }
    }

    pub fn output(chan: &str, ids: Vec<IExp>, payload: IExp, cont: Process) -> Process {
        Process::Out { chan: chan.into(), ids, payload, cont: Arc::new(cont) }
    }

    pub fn event(name: &str, args: Vec<IExp>, cont: Process) -> Process {
        Process::Event { name: name.into(), args, cont: Arc::new(cont) }
    }

    pub fn if_(cond: IExp, then: Process, else_: Process) -> Process {
        Process::If { cond, then: Arc::new(then), else_: Arc::new(else_) }
    }

    pub fn let_(var: &str, exp: IExp, cont: Process) -> Process {
        Process::Let { var: var.into(), exp, cont: Arc::new(cont) }
    }

    pub fn assume(cond: IExp, cont: Process) -> Process {
        Process::Assume { cond, cont: Arc::new(cont) }
    }

    pub fn repl(counter: &str, bound: u64, body: Process, cont: Process) -> Process {
        Process::Repl { counter: counter.into(), bound, body: Arc::new(body), cont: Arc::new(cont) }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Nil)
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        1 + match self {
            Process::Nil | Process::Run { .. } => 0,
            Process::Par(a, b) => a.size() + b.size(),
            Process::Repl { body, cont, .. } => body.size() + cont.size(),
            Process::If { then, else_, .. } => then.size() + else_.size(),
            Process::New { cont, .. }
            | Process::In { cont, .. }
            | Process::Out { cont, .. }
            | Process::Event { cont, .. }
            | Process::Let { cont, .. }
            | Process::Assume { cont, .. } => cont.size(),
        }
    }

    /// Renumbers `run` sites in pre-order starting at 0. Returns the count.
    pub fn number_runs(&self) -> (Process, usize) {
        let mut next = 0;
        let p = self.map_runs(&mut next);
        (p, next)
    }

    fn map_runs(&self, next: &mut usize) -> Process {
        let a = |p: &Arc<Process>, next: &mut usize| Arc::new(p.map_runs(next));
        match self {
            Process::Run { pc, args, .. } => {
                let slot = *next;
                *next += 1;
                Process::Run { pc: pc.clone(), args: args.clone(), slot }
            }
            Process::Nil => Process::Nil,
            Process::Par(x, y) => {
                let x = a(x, next);
                Process::Par(x, a(y, next))
            }
            Process::Repl { counter, bound, body, cont } => {
                let body = a(body, next);
                Process::Repl { counter: counter.clone(), bound: *bound, body, cont: a(cont, next) }
            }
            Process::If { cond, then, else_ } => {
                let then = a(then, next);
                Process::If { cond: cond.clone(), then, else_: a(else_, next) }
            }
            Process::New { var, bits, cont } => Process::New { var: var.clone(), bits: *bits, cont: a(cont, next) },
            Process::In { chan, ids, var, cont } => Process::In { chan: chan.clone(), ids: ids.clone(), var: var.clone(), cont: a(cont, next) },
            Process::Out { chan, ids, payload, cont } => {
                Process::Out { chan: chan.clone(), ids: ids.clone(), payload: payload.clone(), cont: a(cont, next) }
            }
            Process::Event { name, args, cont } => Process::Event { name: name.clone(), args: args.clone(), cont: a(cont, next) },
            Process::Let { var, exp, cont } => Process::Let { var: var.clone(), exp: exp.clone(), cont: a(cont, next) },
            Process::Assume { cond, cont } => Process::Assume { cond: cond.clone(), cont: a(cont, next) },
        }
    }

    /// True when some `run` site occurs.
    pub fn has_run(&self) -> bool {
        match self {
            Process::Run { .. } => true,
            Process::Nil => false,
            Process::Par(a, b) => a.has_run() || b.has_run(),
            Process::Repl { body, cont, .. } => body.has_run() || cont.has_run(),
            Process::If { then, else_, .. } => then.has_run() || else_.has_run(),
            Process::New { cont, .. }
            | Process::In { cont, .. }
            | Process::Out { cont, .. }
            | Process::Event { cont, .. }
            | Process::Let { cont, .. }
            | Process::Assume { cont, .. } => cont.has_run(),
        }
    }

    /// Renames bound variables to `v0, v1, ...` in binding order, so that two
    /// processes differing only in variable numbering compare equal.
    pub fn alpha_normal(&self) -> Process {
        let mut next = 0;
        self.alpha(&BTreeMap::new(), &mut next)
    }

    fn alpha(&self, map: &BTreeMap<String, String>, next: &mut usize) -> Process {
        let bind = |v: &str, next: &mut usize| {
            let mut m = map.clone();
            m.insert(v.to_string(), format!("v{next}"));
            *next += 1;
            m
        };
        let r = |e: &IExp| e.rename(map);
        let rs = |es: &[IExp]| es.iter().map(|e| e.rename(map)).collect::<Vec<_>>();
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => {
                let a = a.alpha(map, next);
                Process::par(a, b.alpha(map, next))
            }
            Process::Repl { counter, bound, body, cont } => {
                let m = bind(counter, next);
                let name = m[counter].clone();
                let body = body.alpha(&m, next);
                Process::repl(&name, *bound, body, cont.alpha(map, next))
            }
            Process::New { var, bits, cont } => {
                let m = bind(var, next);
                Process::new_(&m[var], *bits, cont.alpha(&m, next))
            }
            Process::In { chan, ids, var, cont } => {
                let ids = rs(ids);
                let m = bind(var, next);
                Process::input(chan, ids, &m[var], cont.alpha(&m, next))
            }
            Process::Out { chan, ids, payload, cont } => Process::output(chan, rs(ids), r(payload), cont.alpha(map, next)),
            Process::Event { name, args, cont } => Process::event(name, rs(args), cont.alpha(map, next)),
            Process::If { cond, then, else_ } => {
                let then = then.alpha(map, next);
                Process::if_(r(cond), then, else_.alpha(map, next))
            }
            Process::Let { var, exp, cont } => {
                let exp = r(exp);
                let m = bind(var, next);
                Process::let_(&m[var], exp, cont.alpha(&m, next))
            }
            Process::Assume { cond, cont } => Process::assume(r(cond), cont.alpha(map, next)),
            Process::Run { pc, args, slot } => Process::Run { pc: pc.clone(), args: rs(args), slot: *slot },
        }
    }
}

fn fmt_bits(b: &Bits, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let n = b.len();
    if WIDTHS.iter().any(|w| usize::from(*w) == n) {
        write!(f, "{}:{n}", b.to_u128().unwrap_or(0))
    } else {
        write!(f, "{}", b.to_hex())
    }
}

fn fmt_list(es: &[IExp], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for IExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IExp::Bits(b) => fmt_bits(b, f),
            IExp::Var(v) => write!(f, "{v}"),
            IExp::Bot => write!(f, "⊥"),
            IExp::App(op, args) if args.len() == 2 && INFIX.contains(&op.as_str()) => {
                write!(f, "({} {op} {})", args[0], args[1])
            }
            IExp::App(op, args) if op == "¬" && args.len() == 1 => write!(f, "¬{}", args[0]),
            IExp::App(op, args) => {
                write!(f, "{op}(")?;
                fmt_list(args, f)?;
                write!(f, ")")
            }
        }
    }
}

fn fmt_chan(chan: &str, ids: &[IExp], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{chan}")?;
    if !ids.is_empty() {
        write!(f, "[")?;
        fmt_list(ids, f)?;
        write!(f, "]")?;
    }
    Ok(())
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Nil => write!(f, "0"),
            Process::Par(a, b) => write!(f, "({a} | {b})"),
            Process::Repl { counter, bound, body, cont } => write!(f, "!^{{{counter}<={bound}}} ({body}); {cont}"),
            Process::New { var, bits, cont } => write!(f, "new {var}: fixed_{bits}; {cont}"),
            Process::In { chan, ids, var, cont } => {
                write!(f, "in(")?;
                fmt_chan(chan, ids, f)?;
                write!(f, ", {var}); {cont}")
            }
            Process::Out { chan, ids, payload, cont } => {
                write!(f, "out(")?;
                fmt_chan(chan, ids, f)?;
                write!(f, ", {payload}); {cont}")
            }
            Process::Event { name, args, cont } => {
                write!(f, "event {name}(")?;
                fmt_list(args, f)?;
                write!(f, "); {cont}")
            }
            Process::If { cond, then, else_ } => write!(f, "if {cond} then ({then}) else ({else_})"),
            Process::Let { var, exp, cont } => write!(f, "let {var} = {exp} in {cont}"),
            Process::Assume { cond, cont } => write!(f, "assume {cond}; {cont}"),
            Process::Run { pc, args, .. } => {
                write!(f, "run(@{pc}, (")?;
                fmt_list(args, f)?;
                write!(f, "))")
            }
        }
    }
}

/// Multi-line rendering: one prefix per line, branches and parallel parts indented.
pub fn pretty(p: &Process) -> String {
    let mut out = String::new();
    pretty_into(p, 0, &mut out);
    out
}

fn pretty_into(p: &Process, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let line = |out: &mut String, s: String| {
        out.push_str(&pad);
        out.push_str(&s);
        out.push('\n');
    };
    match p {
        Process::Nil => line(out, "0".into()),
        Process::Run { .. } => line(out, p.to_string()),
        Process::Par(a, b) => {
            line(out, "(".into());
            pretty_into(a, depth + 1, out);
            line(out, "|".into());
            pretty_into(b, depth + 1, out);
            line(out, ")".into());
        }
        Process::Repl { counter, bound, body, cont } => {
            line(out, format!("!^{{{counter}<={bound}}} ("));
            pretty_into(body, depth + 1, out);
            line(out, ");".into());
            pretty_into(cont, depth, out);
        }
        Process::If { cond, then, else_ } => {
            line(out, format!("if {cond} then ("));
            pretty_into(then, depth + 1, out);
            line(out, ") else (".into());
            pretty_into(else_, depth + 1, out);
            line(out, ")".into());
        }
        Process::New { var, bits, cont } => {
            line(out, format!("new {var}: fixed_{bits};"));
            pretty_into(cont, depth, out);
        }
        Process::Let { var, exp, cont } => {
            line(out, format!("let {var} = {exp} in"));
            pretty_into(cont, depth, out);
        }
        Process::In { cont, .. } | Process::Out { cont, .. } | Process::Event { cont, .. } | Process::Assume { cont, .. } => {
            let full = p.to_string();
            let tail = cont.to_string();
            let head = full[..full.len() - tail.len()].trim_end().to_string();
            line(out, head);
            pretty_into(cont, depth, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_surface_syntax() {
        let p = Process::new_(
            "x",
            64,
            Process::let_("c", IExp::app("conc1", vec![IExp::var("x")]), Process::output("c", vec![], IExp::var("c"), Process::Nil)),
        );
        assert_eq!(p.to_string(), "new x: fixed_64; let c = conc1(x) in out(c, c); 0");
    }

    #[test]
    fn literals_print_by_width() {
        assert_eq!(IExp::word(5, 8).to_string(), "5:8");
        assert_eq!(IExp::word(5, 4).to_string(), "0x5");
        assert_eq!(IExp::word(1, 3).to_string(), "0b001");
    }

    #[test]
    fn alpha_normal_ignores_numbering() {
        let a = Process::new_("x_1", 4, Process::output("c", vec![], IExp::var("x_1"), Process::Nil));
        let b = Process::new_("y_9", 4, Process::output("c", vec![], IExp::var("y_9"), Process::Nil));
        assert_eq!(a.alpha_normal(), b.alpha_normal());
        let free = Process::output("c", vec![], IExp::var("pad"), Process::Nil);
        assert_eq!(free.alpha_normal(), free);
    }

    #[test]
    fn runs_are_numbered_in_preorder() {
        let r = |pc| Process::Run { pc: Label::Addr(pc), args: vec![], slot: 99 };
        let (p, n) = Process::par(r(1), Process::par(r(2), r(3))).number_runs();
        assert_eq!(n, 3);
        let Process::Par(a, _) = &p else { panic!() };
        assert!(matches!(**a, Process::Run { slot: 0, .. }));
    }
}
