use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bits::{mask, Bits};
use crate::error::{Error, Result};

/// Largest vertex count whose aggregator input fits in [`Bits`].
pub const MAX_VERTICES: usize = 15;

/// Bit layout of an aggregator input for graphs on `n` vertices.
///
/// `[0, id_bits)` holds the vertex code (most significant bit first),
/// `[id_bits, id_bits + edge_bits)` the upper-triangle adjacency in
/// lexicographic `(u, v)` order, and the final `n` bits the previous hidden
/// states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InputEncoding {
    pub n: usize,
    pub id_bits: usize,
    pub edge_bits: usize,
    pub dp_bits: usize,
    pub d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Id(usize),
    Edge(usize),
    Dp(usize),
}

impl InputEncoding {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_VERTICES {
            return Err(Error::EncodingMismatch(format!(
                "vertex count {n} outside 1..={MAX_VERTICES}"
            )));
        }
        let id_bits = ceil_log2(n);
        let edge_bits = n * (n - 1) / 2;
        Ok(InputEncoding {
            n,
            id_bits,
            edge_bits,
            dp_bits: n,
            d: id_bits + edge_bits + n,
        })
    }

    /// Position of edge `{u, v}` inside the adjacency block.
    pub fn edge_index(&self, u: usize, v: usize) -> usize {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        debug_assert!(u != v && v < self.n);
        u * self.n - u * (u + 1) / 2 + (v - u - 1)
    }

    /// Inverse of [`edge_index`](Self::edge_index).
    pub fn edge_endpoints(&self, k: usize) -> (usize, usize) {
        let mut base = 0;
        for u in 0..self.n {
            let row = self.n - u - 1;
            if k < base + row {
                return (u, u + 1 + (k - base));
            }
            base += row;
        }
        panic!("edge index {k} out of range for n={}", self.n)
    }

    pub fn id_var(&self, j: usize) -> usize {
        j
    }

    pub fn edge_var(&self, u: usize, v: usize) -> usize {
        self.id_bits + self.edge_index(u, v)
    }

    pub fn dp_var(&self, u: usize) -> usize {
        self.id_bits + self.edge_bits + u
    }

    pub fn kind(&self, var: usize) -> VarKind {
        if var < self.id_bits {
            VarKind::Id(var)
        } else if var < self.id_bits + self.edge_bits {
            VarKind::Edge(var - self.id_bits)
        } else {
            VarKind::Dp(var - self.id_bits - self.edge_bits)
        }
    }

    /// Id bit `j` of vertex `v` (bit 0 is the most significant).
    pub fn id_bit(&self, v: usize, j: usize) -> bool {
        (v >> (self.id_bits - 1 - j)) & 1 == 1
    }

    /// Variables per-vertex trees may read: edge and dp bits.
    pub fn body_vars(&self) -> Vec<usize> {
        (self.id_bits..self.d).collect()
    }

    /// Aggregator input for vertex `v` given the previous hidden vector.
    #[inline]
    pub fn encode(&self, v: usize, inst: &GraphInstance, h_prev: u64) -> Bits {
        let mut code = 0u128;
        for j in 0..self.id_bits {
            if self.id_bit(v, j) {
                code |= 1 << j;
            }
        }
        let word = code
            | (inst.adj << self.id_bits)
            | ((h_prev as u128 & mask(self.n)) << (self.id_bits + self.edge_bits));
        Bits::from_word(word, self.d).expect("encoding fits by construction")
    }

    /// Splits an encoded input back into (vertex, adjacency, hidden vector).
    pub fn decode(&self, x: &Bits) -> Result<(usize, u128, u64)> {
        if x.len() != self.d {
            return Err(Error::EncodingMismatch(format!(
                "expected {} bits, got {}",
                self.d,
                x.len()
            )));
        }
        let w = x.word();
        let mut v = 0usize;
        for j in 0..self.id_bits {
            v = (v << 1) | ((w >> j) & 1) as usize;
        }
        let adj = (w >> self.id_bits) & mask(self.edge_bits);
        let h = ((w >> (self.id_bits + self.edge_bits)) & mask(self.n)) as u64;
        Ok((v, adj, h))
    }
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Input to a local-iteration model: initial bits plus a simple graph.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphInstance {
    pub n: usize,
    /// Bit `v` is `Init(v)`.
    pub init: u64,
    /// Bit `k` is the edge with index `k` in the encoding order.
    pub adj: u128,
}

impl GraphInstance {
    pub fn new(n: usize, init: u64, adj: u128) -> Result<Self> {
        let enc = InputEncoding::new(n)?;
        if init & !(mask(n) as u64) != 0 || adj & !mask(enc.edge_bits) != 0 {
            return Err(Error::Dimension(format!(
                "bits set beyond the n={n} layout"
            )));
        }
        Ok(GraphInstance { n, init, adj })
    }

    pub fn edge_bits(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Number of free input bits (init plus adjacency).
    pub fn input_bits(n: usize) -> usize {
        n + n * (n - 1) / 2
    }

    /// Uniform and independent init and edge bits.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let e = n * (n - 1) / 2;
        let init = rng.gen::<u64>() & mask(n) as u64;
        let adj = rng.gen::<u128>() & mask(e);
        GraphInstance { n, init, adj }
    }

    /// The instance whose flattened index (init bits low, then adjacency)
    /// is `idx`; used to enumerate the input space.
    pub fn from_index(n: usize, idx: u128) -> Self {
        let init = (idx & mask(n)) as u64;
        let adj = idx >> n;
        GraphInstance { n, init, adj }
    }

    pub fn index(&self) -> u128 {
        self.init as u128 | (self.adj << self.n)
    }

    /// Every instance on `n` vertices, in index order.
    pub fn enumerate(n: usize) -> impl Iterator<Item = GraphInstance> {
        let total = 1u128 << Self::input_bits(n);
        (0..total).map(move |i| GraphInstance::from_index(n, i))
    }

    pub fn init_bit(&self, v: usize) -> bool {
        (self.init >> v) & 1 == 1
    }

    pub fn edge(&self, k: usize) -> bool {
        (self.adj >> k) & 1 == 1
    }

    pub fn has_edge(&self, enc: &InputEncoding, u: usize, v: usize) -> bool {
        u != v && self.edge(enc.edge_index(u, v))
    }

    pub fn with_init(mut self, init: u64) -> Self {
        self.init = init;
        self
    }
}

impl fmt::Debug for GraphInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `n=<n> init=<bits> adj=<bits>`, bit strings in layout order.
impl fmt::Display for GraphInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} init=", self.n)?;
        for v in 0..self.n {
            f.write_str(if self.init_bit(v) { "1" } else { "0" })?;
        }
        f.write_str(" adj=")?;
        for k in 0..self.edge_bits() {
            f.write_str(if self.edge(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for GraphInstance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut n = None;
        let mut init = None;
        let mut adj = None;
        let mut pos = 0;
        for tok in s.split_whitespace() {
            let at = s[pos..].find(tok).map(|i| i + pos).unwrap_or(pos);
            pos = at + tok.len();
            let (key, val) = tok.split_once('=').ok_or_else(|| Error::Parse {
                pos: at,
                msg: format!("expected key=value, got `{tok}`"),
            })?;
            match key {
                "n" => {
                    n = Some(val.parse::<usize>().map_err(|e| Error::Parse {
                        pos: at,
                        msg: e.to_string(),
                    })?)
                }
                "init" => init = Some((at + 5, val)),
                "adj" => adj = Some((at + 4, val)),
                _ => {
                    return Err(Error::Parse {
                        pos: at,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            pos: 0,
            msg: "missing n=".into(),
        })?;
        let enc = InputEncoding::new(n)?;
        let parse_bits = |field: Option<(usize, &str)>, len: usize, name: &str| -> Result<u128> {
            let (at, v) = field.ok_or(Error::Parse {
                pos: s.len(),
                msg: format!("missing {name}="),
            })?;
            if v.len() != len {
                return Err(Error::Parse {
                    pos: at,
                    msg: format!("{name} needs {len} bits, got {}", v.len()),
                });
            }
            let mut w = 0u128;
            for (i, c) in v.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => w |= 1 << i,
                    _ => {
                        return Err(Error::Parse {
                            pos: at + i,
                            msg: format!("bad bit `{c}`"),
                        })
                    }
                }
            }
            Ok(w)
        };
        let init = parse_bits(init, n, "init")? as u64;
        let adj = parse_bits(adj, enc.edge_bits, "adj")?;
        GraphInstance::new(n, init, adj)
    }
}
