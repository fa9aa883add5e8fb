//! Pictures of a two-dimensional configuration restricted to `B_n`.
//!
//! Vertices sit on a grid of `cell × cell` pixel blocks; an open bond is a
//! segment joining the centres of its endpoints' blocks.

use percolab::lattice::{BoxSpec, EdgeId};
use percolab::percolation::EdgeStates;

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
pub const VERTEX: [u8; 3] = [150, 150, 150];
pub const BOND: [u8; 3] = [20, 20, 20];

/// Open bonds with both endpoints in `B_n`.
pub fn open_bonds(n: u32, states: impl EdgeStates) -> Vec<EdgeId> {
    BoxSpec::new(2, n)
        .interior_edges()
        .filter(|e| states.edge_open(e))
        .collect()
}

/// Text rendering: `o` for vertices, `-` and `|` for open bonds; top row is `y = n`.
pub fn render_ascii(n: u32, states: impl EdgeStates) -> String {
    let n = n as i64;
    let side = (2 * n + 1) as usize;
    let width = 2 * side - 1;
    let mut rows = Vec::with_capacity(2 * side - 1);
    for y in (-n..=n).rev() {
        let mut line = String::with_capacity(width);
        for x in -n..=n {
            line.push('o');
            if x < n {
                line.push(if states.is_open(&[x, y], 0) { '-' } else { ' ' });
            }
        }
        rows.push(line.trim_end().to_string());
        if y > -n {
            let mut line = String::with_capacity(width);
            for x in -n..=n {
                line.push(if states.is_open(&[x, y - 1], 1) {
                    '|'
                } else {
                    ' '
                });
                if x < n {
                    line.push(' ');
                }
            }
            rows.push(line.trim_end().to_string());
        }
    }
    let mut out = rows.join("\n");
    out.push('\n');
    out
}

pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
        }
    }

    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, color: [u8; 3]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.pixels[y * self.width + x] = color;
            }
        }
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    pub fn count(&self, color: [u8; 3]) -> usize {
        self.pixels.iter().filter(|&&p| p == color).count()
    }
}

pub fn render_canvas(n: u32, states: impl EdgeStates, cell: usize) -> Canvas {
    assert!(cell >= 1, "cell size must be positive");
    let ni = n as i64;
    let side = 2 * n as usize + 1;
    let mut canvas = Canvas::new(side * cell, side * cell);
    let dot = (cell / 4).max(1);
    let thick = (cell / 8).max(1);
    let center = |k: usize| k * cell + cell / 2;
    // block (col, row) for lattice point (x, y); row 0 is y = n
    let block = |x: i64, y: i64| ((x + ni) as usize, (ni - y) as usize);

    for y in -ni..=ni {
        for x in -ni..=ni {
            let (c, r) = block(x, y);
            let (cx, cy) = (center(c), center(r));
            canvas.fill(
                cx - dot / 2,
                cy - dot / 2,
                cx - dot / 2 + dot,
                cy - dot / 2 + dot,
                VERTEX,
            );
        }
    }
    for e in open_bonds(n, &states) {
        let (x, y) = (e.base.coords[0], e.base.coords[1]);
        let (c, r) = block(x, y);
        let (cx, cy) = (center(c), center(r));
        let lo = |v: usize| v - thick / 2;
        if e.axis == 0 {
            canvas.fill(cx, lo(cy), cx + cell + 1, lo(cy) + thick, BOND);
        } else {
            // y + 1 is one block row up
            canvas.fill(lo(cx), cy - cell, lo(cx) + thick, cy + 1, BOND);
        }
    }
    canvas
}

pub fn render_ppm(n: u32, states: impl EdgeStates, cell: usize) -> Vec<u8> {
    render_canvas(n, states, cell).to_ppm()
}

/// Minimal P6 reader: returns `(width, height, rgb bytes)`.
pub fn parse_ppm(bytes: &[u8]) -> Option<(usize, usize, &[u8])> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return None;
    }
    let w: usize = fields[1].parse().ok()?;
    let h: usize = fields[2].parse().ok()?;
    let data = bytes.get(pos + 1..)?;
    (data.len() == w * h * 3).then_some((w, h, data))
}
