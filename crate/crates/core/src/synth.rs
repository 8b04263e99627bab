//! Seeded generator of small, syntactically valid introductory programs.
//! Identifiers are abstract slots so a program can be re-rendered under any
//! consistent renaming. Used by property tests, acceptance checks and benches.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

const WORDS: &[&str] = &[
    "weight", "total", "count", "value", "rate", "score", "price", "amount", "height", "width", "speed", "level",
    "index", "limit", "factor", "sum", "bonus", "tax", "length", "step",
];
const FUNCS: &[&str] = &["compute", "convert", "scale", "report", "adjust", "measure", "update", "combine"];
const CONSTS: &[&str] = &["RATE", "LIMIT", "RATIO", "FACTOR", "BONUS", "OFFSET"];
const BUILTINS: &[&str] = &["abs", "round", "int", "float"];
const NUMBERS: &[&str] = &["0.378", "2", "3", "7", "12", "9.81", "100", "0.5", "42", "1.5"];
const COMMENTS: &[&str] = &["compute the result", "convert units", "keep a running total", "check the range"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Constant,
    Function,
    Variable,
}

#[derive(Debug, Clone)]
enum Expr {
    Name(usize),
    Num(&'static str),
    Bin(Box<Expr>, &'static str, Box<Expr>),
    Builtin(&'static str, Box<Expr>),
    Call(usize, Vec<Expr>),
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, Expr),
    AugAdd(usize, Expr),
    If(Expr, Vec<Stmt>),
    For(usize, Expr, Vec<Stmt>),
    Print(usize),
    PrintF(&'static str, usize),
    Return(usize),
    Comment(&'static str),
}

#[derive(Debug, Clone)]
struct Function {
    name: usize,
    params: Vec<usize>,
    body: Vec<Stmt>,
}

/// A generated program over numbered identifier slots.
#[derive(Debug, Clone)]
pub struct SynthProgram {
    slots: Vec<Slot>,
    names: Vec<String>,
    constants: Vec<(usize, &'static str)>,
    functions: Vec<Function>,
    main: Vec<Stmt>,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    slots: Vec<Slot>,
    names: Vec<String>,
}

impl<R: Rng> Gen<'_, R> {
    fn slot(&mut self, kind: Slot) -> usize {
        let pool = match kind {
            Slot::Constant => CONSTS,
            Slot::Function => FUNCS,
            Slot::Variable => WORDS,
        };
        let base = *pool.choose(self.rng).expect("non-empty pool");
        let mut name = base.to_string();
        let mut n = 2;
        while self.names.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.slots.push(kind);
        self.names.push(name);
        self.slots.len() - 1
    }

    fn expr(&mut self, readable: &[usize], depth: usize) -> Expr {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=2 if !readable.is_empty() => Expr::Name(*readable.choose(self.rng).unwrap()),
            3..=5 if depth < 2 => {
                let op = *["+", "-", "*", "/"].choose(self.rng).unwrap();
                Expr::Bin(Box::new(self.expr(readable, depth + 1)), op, Box::new(self.expr(readable, depth + 1)))
            }
            6 if depth < 2 => Expr::Builtin(BUILTINS.choose(self.rng).unwrap(), Box::new(self.expr(readable, depth + 1))),
            _ => Expr::Num(NUMBERS.choose(self.rng).unwrap()),
        }
    }

    fn block(&mut self, locals: &mut Vec<usize>, readable_outer: &[usize], len: usize, nest: usize) -> Vec<Stmt> {
        let mut out = Vec::new();
        while out.iter().filter(|s| !matches!(s, Stmt::Comment(_))).count() < len {
            let readable: Vec<usize> = readable_outer.iter().chain(locals.iter()).copied().collect();
            match self.rng.random_range(0..12) {
                0 => out.push(Stmt::Comment(COMMENTS.choose(self.rng).unwrap())),
                1 if nest < 2 => {
                    let cond = Expr::Bin(Box::new(self.expr(&readable, 1)), ">", Box::new(Expr::Num("3")));
                    let len = self.rng.random_range(1..3);
                    let body = self.block(locals, readable_outer, len, nest + 1);
                    out.push(Stmt::If(cond, body));
                }
                2 if nest < 2 && !locals.is_empty() => {
                    let acc = *locals.choose(self.rng).unwrap();
                    let var = self.slot(Slot::Variable);
                    let bound = Expr::Builtin("int", Box::new(self.expr(&readable, 1)));
                    out.push(Stmt::For(var, bound, vec![Stmt::AugAdd(acc, Expr::Name(var))]));
                }
                3 if !locals.is_empty() => out.push(Stmt::Print(*locals.choose(self.rng).unwrap())),
                4 if !locals.is_empty() => {
                    out.push(Stmt::PrintF(COMMENTS.choose(self.rng).unwrap(), *locals.choose(self.rng).unwrap()))
                }
                5 if !locals.is_empty() => {
                    let target = *locals.choose(self.rng).unwrap();
                    out.push(Stmt::AugAdd(target, self.expr(&readable, 1)));
                }
                _ => {
                    let value = self.expr(&readable, 0);
                    let target = if !locals.is_empty() && self.rng.random_bool(0.2) {
                        *locals.choose(self.rng).unwrap()
                    } else {
                        let v = self.slot(Slot::Variable);
                        locals.push(v);
                        v
                    };
                    out.push(Stmt::Assign(target, value));
                }
            }
        }
        out
    }
}

/// Generates one program: module constants, one to three functions, and module-level calls.
pub fn random_program(rng: &mut impl Rng) -> SynthProgram {
    let mut g = Gen { rng, slots: Vec::new(), names: Vec::new() };
    let constants: Vec<(usize, &'static str)> =
        (0..g.rng.random_range(0..3)).map(|_| (g.slot(Slot::Constant), *NUMBERS.choose(g.rng).unwrap())).collect();
    let const_slots: Vec<usize> = constants.iter().map(|c| c.0).collect();
    let mut functions: Vec<Function> = Vec::new();
    for _ in 0..g.rng.random_range(1..4) {
        let name = g.slot(Slot::Function);
        let params: Vec<usize> = (0..g.rng.random_range(0..3)).map(|_| g.slot(Slot::Variable)).collect();
        let len = if g.rng.random_bool(0.15) { g.rng.random_range(14..20) } else { g.rng.random_range(2..8) };
        let mut body = g.block(&mut params.clone(), &const_slots, len, 0);
        let mut locals: Vec<usize> = params.clone();
        collect_assigned(&body, &mut locals);
        let ret = match locals.last() {
            Some(&v) => v,
            None => {
                let v = g.slot(Slot::Variable);
                body.push(Stmt::Assign(v, Expr::Num("0")));
                v
            }
        };
        body.push(Stmt::Return(ret));
        functions.push(Function { name, params, body });
    }
    let mut main = Vec::new();
    for f in &functions {
        let result = g.slot(Slot::Variable);
        let args = f.params.iter().map(|_| Expr::Num(NUMBERS.choose(g.rng).unwrap())).collect();
        main.push(Stmt::Assign(result, Expr::Call(f.name, args)));
        main.push(Stmt::Print(result));
    }
    SynthProgram { slots: g.slots, names: g.names, constants, functions, main }
}

fn collect_assigned(stmts: &[Stmt], out: &mut Vec<usize>) {
    for s in stmts {
        match s {
            Stmt::Assign(v, _) if !out.contains(v) => out.push(*v),
            Stmt::If(_, body) | Stmt::For(_, _, body) => collect_assigned(body, out),
            _ => {}
        }
    }
}

impl SynthProgram {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_comments(&self) -> bool {
        fn any(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|s| match s {
                Stmt::Comment(_) => true,
                Stmt::If(_, b) | Stmt::For(_, _, b) => any(b),
                _ => false,
            })
        }
        self.functions.iter().any(|f| any(&f.body))
    }

    pub fn render(&self) -> String {
        self.render_with(&self.names, true)
    }

    /// Renders under `names` (one per slot). Comments are optional.
    pub fn render_with(&self, names: &[String], comments: bool) -> String {
        assert_eq!(names.len(), self.names.len(), "one name per slot");
        let mut out = String::new();
        for (slot, value) in &self.constants {
            out.push_str(&format!("{} = {}\n", names[*slot], value));
        }
        for f in &self.functions {
            if !out.is_empty() {
                out.push('\n');
            }
            let params: Vec<&str> = f.params.iter().map(|&p| names[p].as_str()).collect();
            out.push_str(&format!("def {}({}):\n", names[f.name], params.join(", ")));
            render_block(&f.body, names, comments, 1, &mut out);
        }
        out.push('\n');
        render_block(&self.main, names, comments, 0, &mut out);
        out
    }

    /// A fresh, consistent renaming: every slot gets a new distinct name of the same case.
    pub fn fresh_names(&self, rng: &mut impl Rng) -> Vec<String> {
        let mut used = std::collections::HashSet::new();
        self.slots
            .iter()
            .map(|kind| loop {
                let word = WORDS.choose(rng).unwrap();
                let candidate = format!("{word}_r{}", rng.random_range(0..10_000));
                let candidate = if *kind == Slot::Constant { candidate.to_uppercase() } else { candidate };
                if used.insert(candidate.clone()) {
                    break candidate;
                }
            })
            .collect()
    }
}

fn render_expr(e: &Expr, names: &[String], nested: bool) -> String {
    match e {
        Expr::Name(v) => names[*v].clone(),
        Expr::Num(n) => n.to_string(),
        Expr::Bin(l, op, r) => {
            let s = format!("{} {} {}", render_expr(l, names, true), op, render_expr(r, names, true));
            if nested {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Builtin(f, a) => format!("{f}({})", render_expr(a, names, false)),
        Expr::Call(f, args) => {
            let args: Vec<String> = args.iter().map(|a| render_expr(a, names, false)).collect();
            format!("{}({})", names[*f], args.join(", "))
        }
    }
}

fn render_block(stmts: &[Stmt], names: &[String], comments: bool, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for s in stmts {
        let line = match s {
            Stmt::Comment(text) if comments => format!("# {text}"),
            Stmt::Comment(_) => continue,
            Stmt::Assign(v, e) => format!("{} = {}", names[*v], render_expr(e, names, false)),
            Stmt::AugAdd(v, e) => format!("{} += {}", names[*v], render_expr(e, names, false)),
            Stmt::Print(v) => format!("print({})", names[*v]),
            Stmt::PrintF(label, v) => format!("print(f\"{label}: {{{}}}\")", names[*v]),
            Stmt::Return(v) => format!("return {}", names[*v]),
            Stmt::If(cond, body) => {
                out.push_str(&format!("{pad}if {}:\n", render_expr(cond, names, false)));
                render_block(body, names, comments, depth + 1, out);
                continue;
            }
            Stmt::For(v, bound, body) => {
                out.push_str(&format!("{pad}for {} in range({}):\n", names[*v], render_expr(bound, names, false)));
                render_block(body, names, comments, depth + 1, out);
                continue;
            }
        };
        out.push_str(&pad);
        out.push_str(&line);
        out.push('\n');
    }
}


const FUZZ_NAMES: &[&str] = &["weight", "ghost", "z", "s", "x1", "Total", "class", "print", "weight_str", "mars_weight", ""];

/// One random structural mutation of a model response: drop or overwrite a
/// key, retype a value, append or duplicate an item.
pub fn mutate_response(v: &mut Value, rng: &mut impl Rng) {
    mutate(v, rng, 0);
}

fn random_scalar(rng: &mut impl Rng) -> Value {
    match rng.random_range(0..7) {
        0 => json!(FUZZ_NAMES.choose(rng).unwrap()),
        1 => json!(rng.random_range(-3i64..60)),
        2 => json!(rng.random_range(0..12) as f64 + 0.5),
        3 => json!(rng.random_bool(0.5)),
        4 => Value::Null,
        5 => json!("x".repeat(rng.random_range(0..700))),
        _ => json!([]),
    }
}

fn mutate(v: &mut Value, rng: &mut impl Rng, depth: usize) {
    match v {
        Value::Object(map) => {
            let keys: Vec<String> = map.keys().cloned().collect();
            match rng.random_range(0..6) {
                0 if !keys.is_empty() => {
                    map.remove(keys.choose(rng).unwrap());
                }
                1 => {
                    let key = ["name", "line", "score", "suggested_name", "positive", "text", "misleading_type"]
                        .choose(rng)
                        .unwrap();
                    map.insert(key.to_string(), random_object_or_scalar(rng));
                }
                _ if !keys.is_empty() => {
                    let k = keys.choose(rng).unwrap();
                    if depth < 4 && rng.random_bool(0.6) {
                        mutate(map.get_mut(k).unwrap(), rng, depth + 1);
                    } else {
                        map.insert(k.clone(), random_scalar(rng));
                    }
                }
                _ => {}
            }
        }
        Value::Array(items) => match rng.random_range(0..4) {
            0 => items.push(random_object_or_scalar(rng)),
            1 if !items.is_empty() => {
                let dup = items.choose(rng).unwrap().clone();
                items.push(dup);
            }
            _ if !items.is_empty() => {
                let i = rng.random_range(0..items.len());
                mutate(&mut items[i], rng, depth + 1);
            }
            _ => items.push(random_object_or_scalar(rng)),
        },
        other => *other = random_scalar(rng),
    }
}

fn random_object_or_scalar(rng: &mut impl Rng) -> Value {
    if rng.random_bool(0.6) {
        json!({
            "name": FUZZ_NAMES.choose(rng).unwrap(),
            "line": rng.random_range(-2i64..40),
            "score": rng.random_range(-1i64..13),
            "misleading_type": rng.random_bool(0.5),
            "suggested_name": FUZZ_NAMES.choose(rng).unwrap(),
            "explanation": "clearer",
            "text": "Nice comment",
        })
    } else {
        random_scalar(rng)
    }
}
