//! Deck parsing and re-emission.
//!
//! The dialect is a SPICE-2-style subset: fixed card positions, no
//! expressions, no subcircuits. One card per line, `*` starts a comment,
//! `+` continues the previous card, `.END` optionally terminates the deck,
//! and the first line is always the title.
//!
//! ```text
//! R<name> n1 n2 value
//! C<name> n1 n2 value [IC=volts]
//! L<name> n1 n2 value [IC=amps]
//! V<name> n+ n- [DC] value | SIN(off ampl freq) | PULSE(v1 v2 td tr tf pw per)
//!                 [AC mag [phase_deg]]
//! I<name> n+ n-  (same forms as V, in amperes)
//! D<name> n+ n- model
//! M<name> nd ng ns model
//! .MODEL name D|NMOS|PMOS (KEY=value ...)
//! .OP
//! .DC source start stop step
//! .TRAN tstep tstop [UIC]
//! .AC DEC|LIN npoints fstart fstop
//! .IC V(node)=volts ...
//! .PRINT V(node)|I(vsource) ...
//! .END
//! ```
//!
//! Values take engineering suffixes `f p n u m k meg g t` (case-insensitive,
//! longest match, so `10MEG` is 1e7 while `10m` is 1e-2); trailing unit
//! letters after the number or suffix are ignored (`10V`, `4.7kOhm`).
//! Names are compared case-insensitively; node `0` is ground.
//!
//! See `DECK_FORMAT.md` at the repository root for the full reference.

use std::collections::BTreeMap;
use std::fmt;

/// The distinguished ground node label.
pub const GROUND: &str = "0";

/// Returns true when two names are the same identifier (ASCII case-folded).
pub fn same_name(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// Case-folded key used wherever names index a map.
pub fn name_key(name: &str) -> String {
    name.to_ascii_lowercase()
}

/// Time-domain description of an independent source.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Dc(f64),
    Sin {
        offset: f64,
        amplitude: f64,
        freq: f64,
    },
    Pulse {
        v1: f64,
        v2: f64,
        delay: f64,
        rise: f64,
        fall: f64,
        width: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor {
        name: String,
        n1: String,
        n2: String,
        ohms: f64,
    },
    Capacitor {
        name: String,
        n1: String,
        n2: String,
        farads: f64,
        ic: Option<f64>,
    },
    Inductor {
        name: String,
        n1: String,
        n2: String,
        henries: f64,
        ic: Option<f64>,
    },
    VSource {
        name: String,
        np: String,
        nn: String,
        waveform: Waveform,
        ac_mag: Option<f64>,
        ac_phase: Option<f64>,
    },
    ISource {
        name: String,
        np: String,
        nn: String,
        waveform: Waveform,
        ac_mag: Option<f64>,
        ac_phase: Option<f64>,
    },
    Diode {
        name: String,
        np: String,
        nn: String,
        model: String,
    },
    Mosfet {
        name: String,
        nd: String,
        ng: String,
        ns: String,
        model: String,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Resistor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::Inductor { name, .. }
            | Element::VSource { name, .. }
            | Element::ISource { name, .. }
            | Element::Diode { name, .. }
            | Element::Mosfet { name, .. } => name,
        }
    }

    /// Terminal node names in field order.
    pub fn nodes(&self) -> Vec<&str> {
        match self {
            Element::Resistor { n1, n2, .. }
            | Element::Capacitor { n1, n2, .. }
            | Element::Inductor { n1, n2, .. } => vec![n1, n2],
            Element::VSource { np, nn, .. }
            | Element::ISource { np, nn, .. }
            | Element::Diode { np, nn, .. } => vec![np, nn],
            Element::Mosfet { nd, ng, ns, .. } => vec![nd, ng, ns],
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, Element::Diode { .. } | Element::Mosfet { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Diode,
    Nmos,
    Pmos,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Diode => write!(f, "D"),
            ModelKind::Nmos => write!(f, "NMOS"),
            ModelKind::Pmos => write!(f, "PMOS"),
        }
    }
}

/// `.MODEL` card: named device parameter set.
///
/// Parameter keys are stored lower-case. `D` models accept `IS` and `N`;
/// `NMOS`/`PMOS` accept `VTO`, `KP`, `W`, `L`, `LAMBDA`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCard {
    pub name: String,
    pub kind: ModelKind,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcScale {
    Dec,
    Lin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    NodeVoltage(String),
    SourceCurrent(String),
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probe::NodeVoltage(n) => write!(f, "V({n})"),
            Probe::SourceCurrent(s) => write!(f, "I({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Op,
    Dc {
        source: String,
        start: f64,
        stop: f64,
        step: f64,
    },
    Tran {
        tstep: f64,
        tstop: f64,
        uic: bool,
    },
    Ac {
        scale: AcScale,
        npoints: usize,
        fstart: f64,
        fstop: f64,
    },
    Ic(BTreeMap<String, f64>),
    Print(Vec<Probe>),
}

/// One parsed deck: title line, elements in deck order, model cards and
/// analysis directives in deck order.
#[derive(Debug, Clone)]
pub struct Netlist {
    pub title: String,
    pub elements: Vec<Element>,
    pub models: BTreeMap<String, ModelCard>,
    pub directives: Vec<Directive>,
    /// Source line/column of each element (parallel to `elements`), for
    /// diagnostics. Decks built in code carry zeros here.
    positions: Vec<(u32, u32)>,
}

impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        // source positions are diagnostics, not deck structure
        self.title == other.title
            && self.elements == other.elements
            && self.models == other.models
            && self.directives == other.directives
    }
}

impl Netlist {
    pub fn new(title: impl Into<String>) -> Self {
        Netlist {
            title: title.into(),
            elements: Vec::new(),
            models: BTreeMap::new(),
            directives: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub fn push_element(&mut self, e: Element) {
        self.elements.push(e);
        self.positions.push((0, 0));
    }

    pub fn add_model(&mut self, m: ModelCard) {
        self.models.insert(name_key(&m.name), m);
    }

    /// Line/column (1-based) the element was parsed from, (0, 0) if built in
    /// code.
    pub fn element_position(&self, idx: usize) -> (u32, u32) {
        self.positions.get(idx).copied().unwrap_or((0, 0))
    }

    /// Line number the element was parsed from, 0 if built in code.
    pub fn element_line(&self, idx: usize) -> u32 {
        self.element_position(idx).0
    }

    pub fn model_for(&self, name: &str) -> Option<&ModelCard> {
        self.models.get(&name_key(name))
    }

    pub fn find_element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| same_name(e.name(), name))
    }

    pub fn has_nonlinear(&self) -> bool {
        self.elements.iter().any(Element::is_nonlinear)
    }

    /// Node initial conditions merged over all `.IC` directives (later cards
    /// override earlier ones). Keys are case-folded node names.
    pub fn initial_conditions(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for d in &self.directives {
            if let Directive::Ic(map) = d {
                for (node, v) in map {
                    out.insert(name_key(node), *v);
                }
            }
        }
        out
    }
}

/// One parse diagnostic, tied to a deck line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

/// All diagnostics from one parsing pass; independent problems on different
/// cards are accumulated rather than reported one at a time.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Engineering-suffix scaling. Longest match wins, so `meg` is checked
/// before the single letters; everything is case-insensitive. Negative
/// powers are applied by division so that `100n` lands on the same f64 as
/// the literal `1e-7`.
enum Scale {
    Mul(f64),
    Div(f64),
}

fn suffix_scale(rest: &str) -> (Scale, usize) {
    let lower = rest.to_ascii_lowercase();
    if lower.starts_with("meg") {
        return (Scale::Mul(1e6), 3);
    }
    match lower.chars().next() {
        Some('f') => (Scale::Div(1e15), 1),
        Some('p') => (Scale::Div(1e12), 1),
        Some('n') => (Scale::Div(1e9), 1),
        Some('u') => (Scale::Div(1e6), 1),
        Some('m') => (Scale::Div(1e3), 1),
        Some('k') => (Scale::Mul(1e3), 1),
        Some('g') => (Scale::Mul(1e9), 1),
        Some('t') => (Scale::Mul(1e12), 1),
        _ => (Scale::Mul(1.0), 0),
    }
}

/// Parse a value token: number, optional engineering suffix, optional
/// trailing unit letters (ignored).
pub fn parse_value(token: &str) -> Result<f64, String> {
    let bytes = token.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let mut saw_digit = false;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
        saw_digit = true;
    }
    if end < bytes.len() && bytes[end] == b'.' {
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
            saw_digit = true;
        }
    }
    if !saw_digit {
        return Err(format!("malformed number '{token}'"));
    }
    // exponent only when 'e'/'E' is followed by a (signed) digit; otherwise
    // the letter belongs to a suffix or unit
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut probe = end + 1;
        if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
            probe += 1;
        }
        if probe < bytes.len() && bytes[probe].is_ascii_digit() {
            probe += 1;
            while probe < bytes.len() && bytes[probe].is_ascii_digit() {
                probe += 1;
            }
            end = probe;
        }
    }
    let magnitude: f64 = token[..end]
        .parse()
        .map_err(|_| format!("malformed number '{token}'"))?;
    let rest = &token[end..];
    let (scale, used) = suffix_scale(rest);
    let trailing = &rest[used..];
    if !trailing.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(format!("malformed number '{token}'"));
    }
    Ok(match scale {
        Scale::Mul(m) => magnitude * m,
        Scale::Div(d) => magnitude / d,
    })
}

/// A logical card: tokens plus the source position it started at.
struct Card {
    line: u32,
    col: u32,
    tokens: Vec<String>,
}

/// Split a card into tokens, treating `(`, `)`, `,` and `=` as standalone
/// punctuation so `SIN(0 1 1k)`, `IS=1e-14` and `V(out)=2` all tokenize
/// uniformly.
fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        match c {
            '(' | ')' | ',' | '=' => {
                spaced.push(' ');
                spaced.push(c);
                spaced.push(' ');
            }
            _ => spaced.push(c),
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

struct Parser {
    diagnostics: Vec<Diagnostic>,
}

impl Parser {
    fn error(&mut self, line: u32, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line,
            message: message.into(),
        });
    }
}

/// Parse a whole deck. All diagnostics are accumulated: a deck with several
/// independent bad cards reports all of them in one pass.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut lines = text.lines().enumerate();
    let title = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
    let mut netlist = Netlist::new(title);
    let mut parser = Parser {
        diagnostics: Vec::new(),
    };

    // fold continuations into logical cards
    let mut cards: Vec<Card> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx as u32 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if trimmed.eq_ignore_ascii_case(".end") {
            break;
        }
        if let Some(cont) = trimmed.strip_prefix('+') {
            match cards.last_mut() {
                Some(card) => card.tokens.extend(tokenize(cont)),
                None => parser.error(line_no, "continuation '+' with no preceding card"),
            }
            continue;
        }
        let col = (raw.len() - raw.trim_start().len()) as u32 + 1;
        cards.push(Card {
            line: line_no,
            col,
            tokens: tokenize(trimmed),
        });
    }

    for card in &cards {
        parse_card(&mut parser, &mut netlist, card);
    }

    validate(&mut parser, &netlist);

    if parser.diagnostics.is_empty() {
        Ok(netlist)
    } else {
        Err(ParseError {
            diagnostics: parser.diagnostics,
        })
    }
}

fn parse_card(p: &mut Parser, netlist: &mut Netlist, card: &Card) {
    let head = &card.tokens[0];
    let first = head.chars().next().unwrap_or(' ');
    match first.to_ascii_uppercase() {
        '.' => parse_directive(p, netlist, card),
        'R' => parse_two_terminal(p, netlist, card, 'R'),
        'C' => parse_two_terminal(p, netlist, card, 'C'),
        'L' => parse_two_terminal(p, netlist, card, 'L'),
        'V' => parse_source(p, netlist, card, true),
        'I' => parse_source(p, netlist, card, false),
        'D' => parse_diode(p, netlist, card),
        'M' => parse_mosfet(p, netlist, card),
        c => p.error(card.line, format!("unknown element '{c}'")),
    }
}

fn expect_value(p: &mut Parser, line: u32, tok: Option<&String>, what: &str) -> Option<f64> {
    match tok {
        Some(t) => match parse_value(t) {
            Ok(v) => Some(v),
            Err(e) => {
                p.error(line, format!("{what}: {e}"));
                None
            }
        },
        None => {
            p.error(line, format!("missing {what}"));
            None
        }
    }
}

fn parse_two_terminal(p: &mut Parser, netlist: &mut Netlist, card: &Card, kind: char) {
    let t = &card.tokens;
    if t.len() < 4 {
        p.error(
            card.line,
            format!("{}: expected '{kind}name n1 n2 value'", t[0]),
        );
        return;
    }
    let name = t[0].clone();
    let n1 = t[1].clone();
    let n2 = t[2].clone();
    let Some(value) = expect_value(p, card.line, t.get(3), "element value") else {
        return;
    };
    if value <= 0.0 {
        p.error(card.line, format!("{name}: value must be positive"));
        return;
    }
    // optional IC=… tail for C and L
    let mut ic = None;
    let mut rest = 4;
    if t.len() > rest {
        if kind != 'R' && t[rest].eq_ignore_ascii_case("ic") {
            if t.len() >= rest + 3 && t[rest + 1] == "=" {
                ic = expect_value(p, card.line, t.get(rest + 2), "IC value");
                rest += 3;
            } else {
                p.error(card.line, format!("{name}: expected IC=value"));
                return;
            }
        }
        if t.len() > rest {
            p.error(card.line, format!("{name}: unexpected trailing tokens"));
            return;
        }
    }
    let e = match kind {
        'R' => Element::Resistor {
            name,
            n1,
            n2,
            ohms: value,
        },
        'C' => Element::Capacitor {
            name,
            n1,
            n2,
            farads: value,
            ic,
        },
        _ => Element::Inductor {
            name,
            n1,
            n2,
            henries: value,
            ic,
        },
    };
    netlist.elements.push(e);
    netlist.positions.push((card.line, card.col));
}

/// Parse the waveform part of a source card starting at `t[i]`; returns the
/// waveform and the index one past it.
fn parse_waveform(
    p: &mut Parser,
    line: u32,
    t: &[String],
    mut i: usize,
) -> Option<(Waveform, usize)> {
    let head = t.get(i)?;
    let upper = head.to_ascii_uppercase();
    let take_args = |p: &mut Parser, i: &mut usize, n: usize| -> Option<Vec<f64>> {
        let mut j = *i + 1;
        let parenthesized = t.get(j).map(|s| s == "(").unwrap_or(false);
        if parenthesized {
            j += 1;
        }
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let v = expect_value(p, line, t.get(j), "waveform parameter")?;
            vals.push(v);
            j += 1;
        }
        if parenthesized {
            if t.get(j).map(|s| s == ")").unwrap_or(false) {
                j += 1;
            } else {
                p.error(line, "expected ')' after waveform parameters");
                return None;
            }
        }
        *i = j;
        Some(vals)
    };
    match upper.as_str() {
        "DC" => {
            let v = expect_value(p, line, t.get(i + 1), "DC value")?;
            Some((Waveform::Dc(v), i + 2))
        }
        "SIN" => {
            let a = take_args(p, &mut i, 3)?;
            Some((
                Waveform::Sin {
                    offset: a[0],
                    amplitude: a[1],
                    freq: a[2],
                },
                i,
            ))
        }
        "PULSE" => {
            let a = take_args(p, &mut i, 7)?;
            Some((
                Waveform::Pulse {
                    v1: a[0],
                    v2: a[1],
                    delay: a[2],
                    rise: a[3],
                    fall: a[4],
                    width: a[5],
                    period: a[6],
                },
                i,
            ))
        }
        _ => {
            let v = expect_value(p, line, t.get(i), "source value")?;
            Some((Waveform::Dc(v), i + 1))
        }
    }
}

fn parse_source(p: &mut Parser, netlist: &mut Netlist, card: &Card, is_voltage: bool) {
    let t = &card.tokens;
    if t.len() < 3 {
        p.error(card.line, format!("{}: expected 'name n+ n- value'", t[0]));
        return;
    }
    let name = t[0].clone();
    let np = t[1].clone();
    let nn = t[2].clone();
    let mut i = 3;
    let mut waveform = Waveform::Dc(0.0);
    let has_spec = t
        .get(i)
        .map(|s| !s.eq_ignore_ascii_case("ac"))
        .unwrap_or(false);
    if has_spec {
        match parse_waveform(p, card.line, t, i) {
            Some((w, next)) => {
                waveform = w;
                i = next;
            }
            None => return,
        }
    }
    let mut ac_mag = None;
    let mut ac_phase = None;
    if t.get(i)
        .map(|s| s.eq_ignore_ascii_case("ac"))
        .unwrap_or(false)
    {
        let Some(mag) = expect_value(p, card.line, t.get(i + 1), "AC magnitude") else {
            return;
        };
        ac_mag = Some(mag);
        i += 2;
        if i < t.len() {
            ac_phase = expect_value(p, card.line, t.get(i), "AC phase");
            if ac_phase.is_none() {
                return;
            }
            i += 1;
        }
    }
    if i < t.len() {
        p.error(card.line, format!("{name}: unexpected trailing tokens"));
        return;
    }
    if let Waveform::Pulse {
        rise,
        fall,
        width,
        period,
        ..
    } = waveform
    {
        if rise < 0.0 || fall < 0.0 || width < 0.0 || period < 0.0 {
            p.error(card.line, format!("{name}: PULSE timing must be ≥ 0"));
            return;
        }
        if period > 0.0 && period < rise + fall + width {
            p.error(
                card.line,
                format!("{name}: PULSE period shorter than rise+fall+width"),
            );
            return;
        }
    }
    let e = if is_voltage {
        Element::VSource {
            name,
            np,
            nn,
            waveform,
            ac_mag,
            ac_phase,
        }
    } else {
        Element::ISource {
            name,
            np,
            nn,
            waveform,
            ac_mag,
            ac_phase,
        }
    };
    netlist.elements.push(e);
    netlist.positions.push((card.line, card.col));
}

fn parse_diode(p: &mut Parser, netlist: &mut Netlist, card: &Card) {
    let t = &card.tokens;
    if t.len() != 4 {
        p.error(card.line, format!("{}: expected 'Dname n+ n- model'", t[0]));
        return;
    }
    netlist.elements.push(Element::Diode {
        name: t[0].clone(),
        np: t[1].clone(),
        nn: t[2].clone(),
        model: t[3].clone(),
    });
    netlist.positions.push((card.line, card.col));
}

fn parse_mosfet(p: &mut Parser, netlist: &mut Netlist, card: &Card) {
    let t = &card.tokens;
    if t.len() != 5 {
        p.error(
            card.line,
            format!("{}: expected 'Mname nd ng ns model'", t[0]),
        );
        return;
    }
    netlist.elements.push(Element::Mosfet {
        name: t[0].clone(),
        nd: t[1].clone(),
        ng: t[2].clone(),
        ns: t[3].clone(),
        model: t[4].clone(),
    });
    netlist.positions.push((card.line, card.col));
}

fn parse_directive(p: &mut Parser, netlist: &mut Netlist, card: &Card) {
    let t = &card.tokens;
    let head = t[0].to_ascii_uppercase();
    match head.as_str() {
        ".OP" => {
            if t.len() != 1 {
                p.error(card.line, ".OP takes no arguments");
                return;
            }
            netlist.directives.push(Directive::Op);
        }
        ".DC" => {
            if t.len() != 5 {
                p.error(card.line, ".DC: expected 'source start stop step'");
                return;
            }
            let source = t[1].clone();
            let (Some(start), Some(stop), Some(step)) = (
                expect_value(p, card.line, t.get(2), "DC start"),
                expect_value(p, card.line, t.get(3), "DC stop"),
                expect_value(p, card.line, t.get(4), "DC step"),
            ) else {
                return;
            };
            if step <= 0.0 || !((stop - start) / step).is_finite() {
                p.error(card.line, ".DC: step must be > 0 and span finite");
                return;
            }
            netlist.directives.push(Directive::Dc {
                source,
                start,
                stop,
                step,
            });
        }
        ".TRAN" => {
            if t.len() < 3 || t.len() > 4 {
                p.error(card.line, ".TRAN: expected 'tstep tstop [UIC]'");
                return;
            }
            let (Some(tstep), Some(tstop)) = (
                expect_value(p, card.line, t.get(1), "TRAN tstep"),
                expect_value(p, card.line, t.get(2), "TRAN tstop"),
            ) else {
                return;
            };
            let uic = match t.get(3) {
                Some(s) if s.eq_ignore_ascii_case("uic") => true,
                Some(s) => {
                    p.error(card.line, format!(".TRAN: unexpected token '{s}'"));
                    return;
                }
                None => false,
            };
            if tstep <= 0.0 || tstop < tstep {
                p.error(card.line, ".TRAN: need tstep > 0 and tstop ≥ tstep");
                return;
            }
            netlist
                .directives
                .push(Directive::Tran { tstep, tstop, uic });
        }
        ".AC" => {
            if t.len() != 5 {
                p.error(card.line, ".AC: expected 'DEC|LIN npoints fstart fstop'");
                return;
            }
            let scale = match t[1].to_ascii_uppercase().as_str() {
                "DEC" => AcScale::Dec,
                "LIN" => AcScale::Lin,
                other => {
                    p.error(card.line, format!(".AC: unknown scale '{other}'"));
                    return;
                }
            };
            let npoints = match t[2].parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => {
                    p.error(card.line, ".AC: npoints must be a positive integer");
                    return;
                }
            };
            let (Some(fstart), Some(fstop)) = (
                expect_value(p, card.line, t.get(3), "AC fstart"),
                expect_value(p, card.line, t.get(4), "AC fstop"),
            ) else {
                return;
            };
            if fstart <= 0.0 || fstop < fstart {
                p.error(card.line, ".AC: need fstart > 0 and fstop ≥ fstart");
                return;
            }
            netlist.directives.push(Directive::Ac {
                scale,
                npoints,
                fstart,
                fstop,
            });
        }
        ".IC" => {
            // sequence of V ( node ) = value
            let mut map = BTreeMap::new();
            let mut i = 1;
            while i < t.len() {
                let ok = t[i].eq_ignore_ascii_case("v")
                    && t.get(i + 1).map(|s| s == "(").unwrap_or(false)
                    && t.get(i + 3).map(|s| s == ")").unwrap_or(false)
                    && t.get(i + 4).map(|s| s == "=").unwrap_or(false);
                if !ok {
                    p.error(card.line, ".IC: expected V(node)=value entries");
                    return;
                }
                let node = t[i + 2].clone();
                let Some(v) = expect_value(p, card.line, t.get(i + 5), "IC value") else {
                    return;
                };
                map.insert(node, v);
                i += 6;
            }
            if map.is_empty() {
                p.error(card.line, ".IC: no entries");
                return;
            }
            netlist.directives.push(Directive::Ic(map));
        }
        ".PRINT" => {
            let mut probes = Vec::new();
            let mut i = 1;
            while i < t.len() {
                let kind = t[i].to_ascii_uppercase();
                let ok = (kind == "V" || kind == "I")
                    && t.get(i + 1).map(|s| s == "(").unwrap_or(false)
                    && t.get(i + 3).map(|s| s == ")").unwrap_or(false);
                if !ok {
                    p.error(card.line, ".PRINT: expected V(node) or I(vsource) probes");
                    return;
                }
                let arg = t[i + 2].clone();
                probes.push(if kind == "V" {
                    Probe::NodeVoltage(arg)
                } else {
                    Probe::SourceCurrent(arg)
                });
                i += 4;
            }
            if probes.is_empty() {
                p.error(card.line, ".PRINT: no probes");
                return;
            }
            netlist.directives.push(Directive::Print(probes));
        }
        ".MODEL" => {
            if t.len() < 3 {
                p.error(card.line, ".MODEL: expected 'name kind (KEY=value ...)'");
                return;
            }
            let name = t[1].clone();
            let kind = match t[2].to_ascii_uppercase().as_str() {
                "D" | "DIODE" => ModelKind::Diode,
                "NMOS" => ModelKind::Nmos,
                "PMOS" => ModelKind::Pmos,
                other => {
                    p.error(card.line, format!(".MODEL: unknown kind '{other}'"));
                    return;
                }
            };
            let mut params = BTreeMap::new();
            let mut i = 3;
            while i < t.len() {
                if t[i] == "(" || t[i] == ")" {
                    i += 1;
                    continue;
                }
                if t.get(i + 1).map(|s| s == "=").unwrap_or(false) {
                    let key = t[i].to_ascii_lowercase();
                    let Some(v) = expect_value(p, card.line, t.get(i + 2), "model parameter")
                    else {
                        return;
                    };
                    params.insert(key, v);
                    i += 3;
                } else {
                    p.error(
                        card.line,
                        format!(".MODEL: expected KEY=value, found '{}'", t[i]),
                    );
                    return;
                }
            }
            if let Err(msg) = check_model_params(kind, &params) {
                p.error(card.line, format!(".MODEL {name}: {msg}"));
                return;
            }
            netlist
                .models
                .insert(name_key(&name), ModelCard { name, kind, params });
        }
        other => p.error(card.line, format!("unknown directive '{other}'")),
    }
}

fn check_model_params(kind: ModelKind, params: &BTreeMap<String, f64>) -> Result<(), String> {
    let accepted: &[&str] = match kind {
        ModelKind::Diode => &["is", "n"],
        ModelKind::Nmos | ModelKind::Pmos => &["vto", "kp", "w", "l", "lambda"],
    };
    for key in params.keys() {
        if !accepted.contains(&key.as_str()) {
            return Err(format!("unknown parameter '{}'", key.to_uppercase()));
        }
    }
    let positive = |key: &str| -> Result<(), String> {
        if let Some(&v) = params.get(key) {
            if v <= 0.0 {
                return Err(format!("{} must be > 0", key.to_uppercase()));
            }
        }
        Ok(())
    };
    match kind {
        ModelKind::Diode => {
            positive("is")?;
            positive("n")?;
        }
        ModelKind::Nmos | ModelKind::Pmos => {
            positive("kp")?;
            positive("w")?;
            positive("l")?;
            if let Some(&lam) = params.get("lambda") {
                if lam < 0.0 {
                    return Err("LAMBDA must be ≥ 0".into());
                }
            }
        }
    }
    Ok(())
}

/// Whole-deck checks after all cards are in: unique names, resolvable models,
/// resolvable probe and `.IC` references.
fn validate(p: &mut Parser, netlist: &Netlist) {
    let mut seen: BTreeMap<String, u32> = BTreeMap::new();
    for (i, e) in netlist.elements.iter().enumerate() {
        let key = name_key(e.name());
        let line = netlist.element_line(i);
        if let Some(&prev) = seen.get(&key) {
            p.error(
                line,
                format!(
                    "duplicate element name '{}' (first at line {prev})",
                    e.name()
                ),
            );
        } else {
            seen.insert(key, line);
        }
        let model_ref = match e {
            Element::Diode { model, .. } => Some((model, ModelKind::Diode, "diode")),
            Element::Mosfet { model, .. } => Some((model, ModelKind::Nmos, "mosfet")),
            _ => None,
        };
        if let Some((model, want, what)) = model_ref {
            match netlist.model_for(model) {
                None => p.error(line, format!("{}: unresolved model '{model}'", e.name())),
                Some(card) => {
                    let ok = match what {
                        "diode" => card.kind == want,
                        _ => matches!(card.kind, ModelKind::Nmos | ModelKind::Pmos),
                    };
                    if !ok {
                        p.error(
                            line,
                            format!(
                                "{}: model '{model}' is {} but a {what} card needs {}",
                                e.name(),
                                card.kind,
                                if what == "diode" { "D" } else { "NMOS/PMOS" }
                            ),
                        );
                    }
                }
            }
        }
    }
    // probe and .IC references
    let node_exists = |n: &str| {
        same_name(n, GROUND)
            || netlist
                .elements
                .iter()
                .any(|e| e.nodes().iter().any(|t| same_name(t, n)))
    };
    for d in &netlist.directives {
        match d {
            Directive::Print(probes) => {
                for probe in probes {
                    match probe {
                        Probe::NodeVoltage(n) if !node_exists(n) => {
                            p.error(0, format!("unknown node '{n}' in .PRINT"));
                        }
                        Probe::SourceCurrent(s) => {
                            let ok =
                                matches!(netlist.find_element(s), Some(Element::VSource { .. }));
                            if !ok {
                                p.error(0, format!("unknown voltage source '{s}' in .PRINT"));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Directive::Ic(map) => {
                for node in map.keys() {
                    if !node_exists(node) {
                        p.error(0, format!("unknown node '{node}' in .IC"));
                    }
                }
            }
            _ => {}
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into() // fold −0 into 0
    } else {
        format!("{x}")
    }
}

fn write_waveform(out: &mut String, w: &Waveform) {
    match w {
        Waveform::Dc(v) => out.push_str(&fmt_num(*v)),
        Waveform::Sin {
            offset,
            amplitude,
            freq,
        } => out.push_str(&format!(
            "SIN({} {} {})",
            fmt_num(*offset),
            fmt_num(*amplitude),
            fmt_num(*freq)
        )),
        Waveform::Pulse {
            v1,
            v2,
            delay,
            rise,
            fall,
            width,
            period,
        } => out.push_str(&format!(
            "PULSE({} {} {} {} {} {} {})",
            fmt_num(*v1),
            fmt_num(*v2),
            fmt_num(*delay),
            fmt_num(*rise),
            fmt_num(*fall),
            fmt_num(*width),
            fmt_num(*period)
        )),
    }
}

/// Emit a canonical deck: one card per line, plain numbers (no suffixes),
/// models first, then elements and directives in order, then `.END`.
/// `parse_netlist(write_netlist(n))` is structurally equal to `n`.
pub fn write_netlist(netlist: &Netlist) -> String {
    let mut out = String::new();
    out.push_str(&netlist.title);
    out.push('\n');
    for model in netlist.models.values() {
        out.push_str(&format!(".MODEL {} {}", model.name, model.kind));
        if !model.params.is_empty() {
            out.push_str(" (");
            let parts: Vec<String> = model
                .params
                .iter()
                .map(|(k, v)| format!("{}={}", k.to_uppercase(), fmt_num(*v)))
                .collect();
            out.push_str(&parts.join(" "));
            out.push(')');
        }
        out.push('\n');
    }
    for e in &netlist.elements {
        match e {
            Element::Resistor { name, n1, n2, ohms } => {
                out.push_str(&format!("{name} {n1} {n2} {}", fmt_num(*ohms)));
            }
            Element::Capacitor {
                name,
                n1,
                n2,
                farads,
                ic,
            } => {
                out.push_str(&format!("{name} {n1} {n2} {}", fmt_num(*farads)));
                if let Some(v) = ic {
                    out.push_str(&format!(" IC={}", fmt_num(*v)));
                }
            }
            Element::Inductor {
                name,
                n1,
                n2,
                henries,
                ic,
            } => {
                out.push_str(&format!("{name} {n1} {n2} {}", fmt_num(*henries)));
                if let Some(v) = ic {
                    out.push_str(&format!(" IC={}", fmt_num(*v)));
                }
            }
            Element::VSource {
                name,
                np,
                nn,
                waveform,
                ac_mag,
                ac_phase,
            }
            | Element::ISource {
                name,
                np,
                nn,
                waveform,
                ac_mag,
                ac_phase,
            } => {
                out.push_str(&format!("{name} {np} {nn} "));
                write_waveform(&mut out, waveform);
                if let Some(mag) = ac_mag {
                    out.push_str(&format!(" AC {}", fmt_num(*mag)));
                    if let Some(ph) = ac_phase {
                        out.push_str(&format!(" {}", fmt_num(*ph)));
                    }
                }
            }
            Element::Diode {
                name,
                np,
                nn,
                model,
            } => {
                out.push_str(&format!("{name} {np} {nn} {model}"));
            }
            Element::Mosfet {
                name,
                nd,
                ng,
                ns,
                model,
            } => {
                out.push_str(&format!("{name} {nd} {ng} {ns} {model}"));
            }
        }
        out.push('\n');
    }
    for d in &netlist.directives {
        match d {
            Directive::Op => out.push_str(".OP"),
            Directive::Dc {
                source,
                start,
                stop,
                step,
            } => out.push_str(&format!(
                ".DC {source} {} {} {}",
                fmt_num(*start),
                fmt_num(*stop),
                fmt_num(*step)
            )),
            Directive::Tran { tstep, tstop, uic } => {
                out.push_str(&format!(".TRAN {} {}", fmt_num(*tstep), fmt_num(*tstop)));
                if *uic {
                    out.push_str(" UIC");
                }
            }
            Directive::Ac {
                scale,
                npoints,
                fstart,
                fstop,
            } => out.push_str(&format!(
                ".AC {} {npoints} {} {}",
                match scale {
                    AcScale::Dec => "DEC",
                    AcScale::Lin => "LIN",
                },
                fmt_num(*fstart),
                fmt_num(*fstop)
            )),
            Directive::Ic(map) => {
                out.push_str(".IC");
                for (node, v) in map {
                    out.push_str(&format!(" V({node})={}", fmt_num(*v)));
                }
            }
            Directive::Print(probes) => {
                out.push_str(".PRINT");
                for probe in probes {
                    out.push_str(&format!(" {probe}"));
                }
            }
        }
        out.push('\n');
    }
    out.push_str(".END\n");
    out
}
