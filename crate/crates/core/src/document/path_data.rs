//! SVG path-data (`d` attribute) parsing.
//!
//! Supports `M L H V C S Q T Z` in absolute and relative form. Quadratics are
//! degree-elevated to cubics. Arcs are rejected.

use super::{DocumentError, Segment, Subpath};
use crate::geometry::Point2D;

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b',' => self.pos += 1,
                _ => break,
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_separators();
        self.src.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>) -> DocumentError {
        DocumentError::PathData { offset: self.pos, message: message.into() }
    }

    fn at_number(&mut self) -> bool {
        matches!(self.peek(), Some(b'0'..=b'9' | b'.' | b'-' | b'+'))
    }

    fn number(&mut self) -> Result<f64, DocumentError> {
        self.skip_separators();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        if i < s.len() && (s[i] == b'+' || s[i] == b'-') {
            i += 1;
        }
        let mut digits = 0;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return Err(self.err("expected number"));
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let exp_start = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_start {
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).map_err(|_| self.err("invalid utf-8"))?;
        let v: f64 = text.parse().map_err(|_| self.err(format!("invalid number `{text}`")))?;
        if !v.is_finite() {
            return Err(self.err("non-finite number"));
        }
        self.pos = i;
        Ok(v)
    }

    fn pair(&mut self) -> Result<Point2D, DocumentError> {
        let x = self.number()?;
        let y = self.number()?;
        Ok(Point2D::new(x, y))
    }
}

#[derive(Default)]
struct Builder {
    subpaths: Vec<Subpath>,
    current: Option<Subpath>,
    pen: Point2D,
    start: Point2D,
    /// Reflection source for `S` / `T`.
    last_cubic_ctrl: Option<Point2D>,
    last_quad_ctrl: Option<Point2D>,
}

impl Builder {
    fn move_to(&mut self, p: Point2D) {
        self.finish_open();
        self.current = Some(Subpath { points: vec![p], segments: Vec::new(), closed: false });
        self.pen = p;
        self.start = p;
    }

    fn sub(&mut self) -> &mut Subpath {
        if self.current.is_none() {
            let p = self.pen;
            self.current = Some(Subpath { points: vec![p], segments: Vec::new(), closed: false });
            self.start = p;
        }
        self.current.as_mut().expect("subpath present")
    }

    fn line_to(&mut self, p: Point2D) {
        let sp = self.sub();
        sp.points.push(p);
        let end = sp.points.len() - 1;
        sp.segments.push(Segment::Line { end });
        self.pen = p;
    }

    fn cubic_to(&mut self, c1: Point2D, c2: Point2D, p: Point2D) {
        let sp = self.sub();
        let base = sp.points.len();
        sp.points.extend([c1, c2, p]);
        sp.segments.push(Segment::Cubic { ctrl1: base, ctrl2: base + 1, end: base + 2 });
        self.pen = p;
    }

    fn close(&mut self) {
        if let Some(mut sp) = self.current.take() {
            if sp.segments.is_empty() {
                // Lone `M x y Z`: nothing to fill.
                self.pen = self.start;
                return;
            }
            loop {
                let last = sp.points.len() - 1;
                let seg_end = sp.segments.last().map(Segment::end);
                if last > 0 && seg_end == Some(last) && sp.points[last] == sp.points[0] {
                    // The final anchor duplicates the start: retarget the last segment.
                    sp.points.pop();
                    match sp.segments.last_mut().expect("non-empty") {
                        Segment::Line { end } | Segment::Cubic { end, .. } => *end = 0,
                    }
                    // A closing line that starts at the start point is degenerate.
                    let k = sp.segments.len() - 1;
                    if k > 0
                        && matches!(sp.segments[k], Segment::Line { .. })
                        && sp.points[sp.segment_start(k)] == sp.points[0]
                    {
                        sp.segments.pop();
                        continue;
                    }
                } else if seg_end != Some(0) {
                    sp.segments.push(Segment::Line { end: 0 });
                }
                break;
            }
            sp.closed = true;
            self.subpaths.push(sp);
        }
        self.pen = self.start;
    }

    fn finish_open(&mut self) {
        if let Some(sp) = self.current.take() {
            if !sp.segments.is_empty() {
                self.subpaths.push(sp);
            }
        }
    }
}

/// Parses a path-data string into subpaths (untransformed coordinates).
/// Error offsets are byte offsets into `d`.
pub fn parse_path_data(d: &str) -> Result<Vec<Subpath>, DocumentError> {
    let mut lx = Lexer { src: d.as_bytes(), pos: 0 };
    let mut b = Builder::default();
    let mut cmd: Option<u8> = None;

    loop {
        let Some(c) = lx.peek() else { break };
        let op = if c.is_ascii_alphabetic() {
            lx.pos += 1;
            c
        } else {
            match cmd {
                // Implicit repetition; extra pairs after M are line-tos.
                Some(b'M') => b'L',
                Some(b'm') => b'l',
                Some(b'Z' | b'z') | None => return Err(lx.err("expected command")),
                Some(prev) => prev,
            }
        };
        let rel = op.is_ascii_lowercase();
        let origin = |b: &Builder| if rel { b.pen } else { Point2D::ZERO };
        let upper = op.to_ascii_uppercase();
        let mut reflect_cubic = None;
        let mut reflect_quad = None;
        match upper {
            b'M' => {
                let p = origin(&b) + lx.pair()?;
                b.move_to(p);
            }
            b'L' => {
                let p = origin(&b) + lx.pair()?;
                b.line_to(p);
            }
            b'H' => {
                let x = lx.number()? + if rel { b.pen.x } else { 0.0 };
                let p = Point2D::new(x, b.pen.y);
                b.line_to(p);
            }
            b'V' => {
                let y = lx.number()? + if rel { b.pen.y } else { 0.0 };
                let p = Point2D::new(b.pen.x, y);
                b.line_to(p);
            }
            b'C' => {
                let o = origin(&b);
                let c1 = o + lx.pair()?;
                let c2 = o + lx.pair()?;
                let p = o + lx.pair()?;
                b.cubic_to(c1, c2, p);
                reflect_cubic = Some(c2);
            }
            b'S' => {
                let o = origin(&b);
                let c1 = match b.last_cubic_ctrl {
                    Some(prev) => b.pen * 2.0 - prev,
                    None => b.pen,
                };
                let c2 = o + lx.pair()?;
                let p = o + lx.pair()?;
                b.cubic_to(c1, c2, p);
                reflect_cubic = Some(c2);
            }
            b'Q' => {
                let o = origin(&b);
                let q = o + lx.pair()?;
                let p = o + lx.pair()?;
                let p0 = b.pen;
                b.cubic_to(p0 + (q - p0) * (2.0 / 3.0), p + (q - p) * (2.0 / 3.0), p);
                reflect_quad = Some(q);
            }
            b'T' => {
                let o = origin(&b);
                let p0 = b.pen;
                let q = match b.last_quad_ctrl {
                    Some(prev) => p0 * 2.0 - prev,
                    None => p0,
                };
                let p = o + lx.pair()?;
                b.cubic_to(p0 + (q - p0) * (2.0 / 3.0), p + (q - p) * (2.0 / 3.0), p);
                reflect_quad = Some(q);
            }
            b'Z' => b.close(),
            b'A' => {
                return Err(DocumentError::Unsupported(format!(
                    "arc command `{}` at byte {}",
                    op as char,
                    lx.pos - 1
                )))
            }
            _ => return Err(lx.err(format!("unknown command `{}`", op as char))),
        }
        b.last_cubic_ctrl = reflect_cubic;
        b.last_quad_ctrl = reflect_quad;
        cmd = Some(op);
        if matches!(upper, b'Z') && lx.at_number() {
            return Err(lx.err("coordinates after closepath"));
        }
    }
    b.finish_open();
    Ok(b.subpaths)
}
