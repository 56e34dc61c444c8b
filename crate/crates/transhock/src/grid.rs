//! The fixed computational box [Ls, L1] x [-1, 1]^2 and its tensor grid.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub ls: f64,
    pub l1: f64,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, n3: usize, ls: f64, l1: f64) -> Result<Self> {
        for (name, n) in [("n1", n1), ("n2", n2), ("n3", n3)] {
            if n < 9 || n % 2 == 0 {
                return Err(Error::Config {
                    message: format!("grid {name} must be odd and at least 9, got {n}"),
                });
            }
        }
        if !(l1 > ls) {
            return Err(Error::Config { message: format!("need L1 > Ls, got [{ls}, {l1}]") });
        }
        Ok(Self { n1, n2, n3, ls, l1 })
    }

    pub fn h1(&self) -> f64 {
        (self.l1 - self.ls) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 / (self.n2 - 1) as f64
    }

    pub fn h3(&self) -> f64 {
        2.0 / (self.n3 - 1) as f64
    }

    pub fn y1(&self, i: usize) -> f64 {
        self.ls + self.h1() * i as f64
    }

    pub fn y2(&self, j: usize) -> f64 {
        -1.0 + self.h2() * j as f64
    }

    pub fn y3(&self, k: usize) -> f64 {
        -1.0 + self.h3() * k as f64
    }
}
