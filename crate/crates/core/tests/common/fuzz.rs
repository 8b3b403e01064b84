//! Random program generator for sandbox fuzzing. Output is mostly valid
//! code in the supported subset, salted with banned constructs, malformed
//! syntax and resource-hungry loops.

use rand::Rng;

const NAMES: [&str; 5] = ["a", "b", "xs", "s", "n"];
const OBJECTS: [&str; 4] = ["car", "person", "dog", "unicorn"];
const BANNED: [&str; 8] = [
    "import os",
    "while True:\n{i}    pass",
    "with open('x') as f:\n{i}    pass",
    "try:\n{i}    pass\n{i}except:\n{i}    pass",
    "f = lambda: 1",
    "del a",
    "global a",
    "raise ValueError",
];
const JUNK: [&str; 8] = ["return (", "a = = 1", "for in range(3):", "if:", "return [1, 2", "xs[0] = 1", "a, b = 1, 2", "return {1: 2}"];

pub struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    depth: usize,
}

impl<'r, R: Rng> Gen<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Self { rng, depth: 0 }
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.rng.random_range(0..items.len())]
    }

    fn object(&mut self) -> String {
        format!("\"{}\"", self.pick(&OBJECTS))
    }

    fn expr(&mut self) -> String {
        self.depth += 1;
        let leaf = self.depth > 4 || self.rng.random_bool(0.35);
        let out = if leaf {
            match self.rng.random_range(0..7) {
                0 => self.rng.random_range(-5..50).to_string(),
                1 => format!("{:.1}", self.rng.random_range(-10.0..10.0)),
                2 => format!("\"{}\"", self.pick(&["", "yes", "ab", "Red car"])),
                3 => self.pick(&["True", "False", "None"]).to_string(),
                4 => "image".to_string(),
                _ => self.pick(&NAMES).to_string(),
            }
        } else {
            match self.rng.random_range(0..14) {
                0 => format!("{} {} {}", self.expr(), self.pick(&["+", "-", "*", "/", "//", "%", "**"]), self.expr()),
                1 => format!("{} {} {}", self.expr(), self.pick(&["==", "!=", "<", "<=", ">", ">=", "in", "not in"]), self.expr()),
                2 => format!("{} {} {}", self.expr(), self.pick(&["and", "or"]), self.expr()),
                3 => format!("not {}", self.expr()),
                4 => format!("-{}", self.expr()),
                5 => format!("[{}, {}]", self.expr(), self.expr()),
                6 => format!("{}[{}]", self.expr(), self.expr()),
                7 => format!("({} if {} else {})", self.expr(), self.expr(), self.expr()),
                8 => format!("f\"{{{}}} x\"", self.pick(&NAMES)),
                9 => {
                    let f = self.pick(&["len", "str", "int", "float", "bool", "abs", "min", "max", "sorted", "range"]);
                    format!("{f}({})", self.expr())
                }
                10 => format!("range({})", self.pick(&["3", "10", "10 ** 6", "10 ** 9", "-2", "1, 9, 2"])),
                11 => {
                    let f = self.pick(&["get_object_boxes", "exists", "count", "query"]);
                    format!("{f}(image, {})", self.object())
                }
                12 => format!("crop(image, get_object_boxes(image, {})[0])", self.object()),
                _ => format!("{}({})", self.pick(&["print", "open", "eval", "exec", "__import__"]), self.expr()),
            }
        };
        self.depth -= 1;
        out
    }

    fn block(&mut self, indent: usize, out: &mut String) {
        let count = self.rng.random_range(1..4);
        for _ in 0..count {
            self.stmt(indent, out);
        }
    }

    fn stmt(&mut self, indent: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        let nested = indent < 4;
        match self.rng.random_range(0..20) {
            0..=4 => {
                let (name, value) = (self.pick(&NAMES), self.expr());
                out.push_str(&format!("{pad}{name} = {value}\n"));
            }
            5 => {
                let (name, op, value) = (self.pick(&NAMES), self.pick(&["+=", "-=", "*="]), self.expr());
                out.push_str(&format!("{pad}{name} {op} {value}\n"));
            }
            6 | 7 if nested => {
                let cond = self.expr();
                out.push_str(&format!("{pad}if {cond}:\n"));
                self.block(indent + 1, out);
                if self.rng.random_bool(0.5) {
                    let cond = self.expr();
                    out.push_str(&format!("{pad}elif {cond}:\n"));
                    self.block(indent + 1, out);
                }
                if self.rng.random_bool(0.5) {
                    out.push_str(&format!("{pad}else:\n"));
                    self.block(indent + 1, out);
                }
            }
            8 | 9 if nested => {
                let var = self.pick(&NAMES);
                let iter = match self.rng.random_range(0..4) {
                    0 => format!("range({})", self.pick(&["5", "1000", "100000", "10 ** 7"])),
                    1 => format!("get_object_boxes(image, {})", self.object()),
                    2 => "\"abcdef\"".to_string(),
                    _ => self.expr(),
                };
                out.push_str(&format!("{pad}for {var} in {iter}:\n"));
                self.block(indent + 1, out);
            }
            10 => out.push_str(&format!("{pad}s = s + s\n")),
            11 => out.push_str(&format!("{pad}xs = xs + xs\n")),
            12 => {
                let e = self.expr();
                out.push_str(&format!("{pad}{e}\n"));
            }
            13 => out.push_str(&format!("{pad}pass\n")),
            14 if self.rng.random_bool(0.3) => {
                let line = self.pick(&BANNED).replace("{i}", &pad);
                out.push_str(&format!("{pad}{line}\n"));
            }
            15 if self.rng.random_bool(0.3) => {
                let line = self.pick(&JUNK);
                out.push_str(&format!("{pad}{line}\n"));
            }
            _ => {
                let e = self.expr();
                out.push_str(&format!("{pad}return {e}\n"));
            }
        }
    }

    pub fn program(&mut self) -> String {
        let mut out = String::from("def execute_command(image):\n");
        out.push_str("    a = 1\n    b = 2\n    xs = [1, 2]\n    s = \"ab\"\n    n = 0\n");
        self.block(1, &mut out);
        if self.rng.random_bool(0.7) {
            let e = self.expr();
            out.push_str(&format!("    return {e}\n"));
        }
        out
    }
}
