//! GF(2^m) arithmetic for m in {1, 4, 8}.
//!
//! Elements are `u8` values below the field order q. Addition is XOR in any
//! binary field; multiplication and inversion come from tables built once
//! per `Field` by carry-less multiplication modulo the reduction polynomial
//! (0x11B for GF(256), the usual x^8 + x^4 + x^3 + x + 1).

use crate::{Error, Result};

const POLY_M1: u16 = 0b11; // x + 1
const POLY_M4: u16 = 0b1_0011; // x^4 + x + 1
const POLY_M8: u16 = 0x11B; // x^8 + x^4 + x^3 + x + 1

/// One finite field GF(2^m), with full multiplication and inverse tables.
#[derive(Clone)]
pub struct Field {
    m: u32,
    q: usize,
    mul: Vec<u8>,
    inv: Vec<u8>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Field(GF({}))", self.q)
    }
}

fn clmul_mod(mut a: u16, mut b: u16, poly: u16, m: u32) -> u8 {
    let mut acc: u16 = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> m & 1 == 1 {
            a ^= poly;
        }
    }
    acc as u8
}

impl Field {
    /// Builds GF(q) for q in {2, 16, 256}.
    pub fn new(q: usize) -> Result<Field> {
        let (m, poly) = match q {
            2 => (1, POLY_M1),
            16 => (4, POLY_M4),
            256 => (8, POLY_M8),
            _ => {
                return Err(Error::Validation(format!(
                    "unsupported field order {q} (expected 2, 16 or 256)"
                )))
            }
        };
        let mut mul = vec![0u8; q * q];
        for a in 0..q {
            for b in a..q {
                let p = clmul_mod(a as u16, b as u16, poly, m);
                mul[a * q + b] = p;
                mul[b * q + a] = p;
            }
        }
        let mut inv = vec![0u8; q];
        for a in 1..q {
            for b in 1..q {
                if mul[a * q + b] == 1 {
                    inv[a] = b as u8;
                    break;
                }
            }
        }
        Ok(Field { m, q, mul, inv })
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn bits(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.q + b as usize]
    }

    pub fn inv(&self, a: u8) -> Result<u8> {
        if a == 0 {
            return Err(Error::Arithmetic("inverse of zero".into()));
        }
        Ok(self.inv[a as usize])
    }

    /// Multiplies every symbol packed in a payload byte by `coeff`. For
    /// m = 8 a byte is one symbol, for m = 4 two nibbles, for m = 1 eight
    /// bits (where scaling is copy-or-zero).
    #[inline]
    pub fn mul_packed(&self, coeff: u8, byte: u8) -> u8 {
        match self.m {
            8 => self.mul(coeff, byte),
            4 => self.mul(coeff, byte >> 4) << 4 | self.mul(coeff, byte & 0x0F),
            _ => {
                if coeff & 1 == 1 {
                    byte
                } else {
                    0
                }
            }
        }
    }

    /// a + c·b on packed payload bytes, in place.
    pub fn axpy_packed(&self, dst: &mut [u8], c: u8, src: &[u8]) {
        debug_assert_eq!(dst.len(), src.len());
        if c == 0 {
            return;
        }
        if c == 1 {
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= s;
            }
            return;
        }
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= self.mul_packed(c, *s);
        }
    }
}

/// Exact rank and a row-echelon basis of `rows` over the field.
pub fn rank_and_basis(field: &Field, rows: &[Vec<u8>]) -> Result<(usize, Vec<Vec<u8>>)> {
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("ragged matrix".into()));
    }
    let mut basis: Vec<Vec<u8>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for (b, &p) in basis.iter().zip(&pivots) {
            if v[p] != 0 {
                let c = v[p];
                for (x, y) in v.iter_mut().zip(b) {
                    *x ^= field.mul(c, *y);
                }
            }
        }
        if let Some(p) = v.iter().position(|&x| x != 0) {
            let s = field.inv(v[p])?;
            for x in v.iter_mut() {
                *x = field.mul(s, *x);
            }
            basis.push(v);
            pivots.push(p);
        }
    }
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by_key(|&i| pivots[i]);
    let basis: Vec<Vec<u8>> = order.into_iter().map(|i| basis[i].clone()).collect();
    Ok((basis.len(), basis))
}
