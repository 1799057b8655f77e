//! Switch and link power/delay model.
//!
//! Basic power is traffic independent: a per-switch term that grows
//! superlinearly with port count plus a per-unit-length leakage term for
//! repeatered links. Per-bit energies feed the routing cost and the
//! simulator's activity-based power accounting.
//!
//! The default coefficients are a calibration, not a physical claim: they
//! place the basic power of a 32x32 mesh near 3.9 W with a torus a few
//! percent above it and the default grown topology roughly a fifth above.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, parse_err, Error, Result};
use crate::grid::Topology;
use crate::num::Scalar;

/// Coefficients of the power and delay model. Energies are joules per bit,
/// powers are watts, lengths are grid pitches.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerParams<S> {
    pub switch_base: S,
    pub switch_per_port: S,
    pub crossbar_quad: S,
    pub link_leak_per_unit: S,
    pub j_s_base: S,
    pub j_s_per_port: S,
    pub j_l_per_unit: S,
    /// Energy per allocator grant (joules).
    pub allocator_per_op: S,
    /// Wire delay in cycles per grid pitch; rounded up, at least one cycle.
    pub delay_per_unit: S,
    /// Clock frequency in hertz.
    pub clock_hz: S,
}

impl<S: Scalar> Default for PowerParams<S> {
    fn default() -> Self {
        Self {
            switch_base: S::lit(1.6e-3),
            switch_per_port: S::lit(1.0e-4),
            crossbar_quad: S::lit(1.2e-4),
            link_leak_per_unit: S::lit(2.0e-5),
            j_s_base: S::lit(2.0e-13),
            j_s_per_port: S::lit(2.0e-14),
            j_l_per_unit: S::lit(4.0e-14),
            allocator_per_op: S::lit(1.0e-13),
            delay_per_unit: S::lit(0.2),
            clock_hz: S::lit(1.0e9),
        }
    }
}

const KEYS: [&str; 10] = [
    "switch_base",
    "switch_per_port",
    "crossbar_quad",
    "link_leak_per_unit",
    "j_s_base",
    "j_s_per_port",
    "j_l_per_unit",
    "allocator_per_op",
    "delay_per_unit",
    "clock_hz",
];

impl<S: Scalar> PowerParams<S> {
    fn slot(&mut self, key: &str) -> Option<&mut S> {
        Some(match key {
            "switch_base" => &mut self.switch_base,
            "switch_per_port" => &mut self.switch_per_port,
            "crossbar_quad" => &mut self.crossbar_quad,
            "link_leak_per_unit" => &mut self.link_leak_per_unit,
            "j_s_base" => &mut self.j_s_base,
            "j_s_per_port" => &mut self.j_s_per_port,
            "j_l_per_unit" => &mut self.j_l_per_unit,
            "allocator_per_op" => &mut self.allocator_per_op,
            "delay_per_unit" => &mut self.delay_per_unit,
            "clock_hz" => &mut self.clock_hz,
            _ => return None,
        })
    }

    fn values(&self) -> [S; 10] {
        [
            self.switch_base,
            self.switch_per_port,
            self.crossbar_quad,
            self.link_leak_per_unit,
            self.j_s_base,
            self.j_s_per_port,
            self.j_l_per_unit,
            self.allocator_per_op,
            self.delay_per_unit,
            self.clock_hz,
        ]
    }

    /// Overrides a single coefficient by name.
    pub fn set(&mut self, key: &str, value: S) -> Result<()> {
        let slot = self
            .slot(key)
            .ok_or_else(|| invalid(format!("unknown power parameter `{key}`")))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in KEYS.iter().zip(self.values()) {
            if !(v >= S::zero()) || !v.is_finite() {
                return Err(invalid(format!("power parameter {k} must be finite and >= 0")));
            }
        }
        if !(self.crossbar_quad > S::zero()) {
            return Err(invalid("crossbar_quad must be positive"));
        }
        if !(self.clock_hz > S::zero()) {
            return Err(invalid("clock_hz must be positive"));
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, "expected key = value"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad number `{}`", v.trim())))?;
            p.set(k.trim(), S::lit(v)).map_err(|e| match e {
                Error::InvalidParameter(m) => parse_err(i + 1, m),
                other => other,
            })?;
        }
        p.validate()?;
        Ok(p)
    }

    /// Multiplies every energy and power coefficient by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            switch_base: self.switch_base * factor,
            switch_per_port: self.switch_per_port * factor,
            crossbar_quad: self.crossbar_quad * factor,
            link_leak_per_unit: self.link_leak_per_unit * factor,
            j_s_base: self.j_s_base * factor,
            j_s_per_port: self.j_s_per_port * factor,
            j_l_per_unit: self.j_l_per_unit * factor,
            allocator_per_op: self.allocator_per_op * factor,
            ..self.clone()
        }
    }

    pub fn cast<T: Scalar>(&self) -> PowerParams<T> {
        let c = |x: S| T::lit(x.as_f64());
        PowerParams {
            switch_base: c(self.switch_base),
            switch_per_port: c(self.switch_per_port),
            crossbar_quad: c(self.crossbar_quad),
            link_leak_per_unit: c(self.link_leak_per_unit),
            j_s_base: c(self.j_s_base),
            j_s_per_port: c(self.j_s_per_port),
            j_l_per_unit: c(self.j_l_per_unit),
            allocator_per_op: c(self.allocator_per_op),
            delay_per_unit: c(self.delay_per_unit),
            clock_hz: c(self.clock_hz),
        }
    }
}

impl<S: Scalar> fmt::Display for PowerParams<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in KEYS.iter().zip(self.values()) {
            writeln!(f, "{k} = {:e}", v.as_f64())?;
        }
        Ok(())
    }
}

impl<S: Scalar> FromStr for PowerParams<S> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Basic power split by category.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerReport<S> {
    /// Degree-independent switch term.
    pub switch_static: S,
    /// Port-proportional and crossbar (quadratic) switch terms.
    pub switch_clocking: S,
    pub link_leakage: S,
    pub total: S,
}

/// Traffic-independent power of a topology.
pub fn basic_power<S: Scalar>(topo: &Topology, params: &PowerParams<S>) -> PowerReport<S> {
    let n = S::from_usize_lossy(topo.node_count());
    let switch_static = params.switch_base * n;
    let switch_clocking = topo
        .degrees()
        .into_iter()
        .map(|d| {
            let d = S::from_usize_lossy(d);
            params.switch_per_port * d + params.crossbar_quad * d * d
        })
        .sum::<S>();
    let wl = S::lit(topo.total_wire_length() as f64);
    let link_leakage = params.link_leak_per_unit * wl;
    PowerReport {
        switch_static,
        switch_clocking,
        link_leakage,
        total: switch_static + switch_clocking + link_leakage,
    }
}

/// Per-bit switch and link energies `(J_s, J_l)` for a switch of `radix`
/// ports and a link of `length` pitches.
pub fn per_bit_energies<S: Scalar>(radix: usize, length: u32, params: &PowerParams<S>) -> (S, S) {
    (
        params.j_s_base + params.j_s_per_port * S::from_usize_lossy(radix),
        params.j_l_per_unit * S::lit(length as f64),
    )
}

/// Pipelined wire latency in cycles.
pub fn link_delay<S: Scalar>(length: u32, params: &PowerParams<S>) -> u32 {
    let c = (params.delay_per_unit * S::lit(length as f64)).ceil();
    c.to_u32().unwrap_or(u32::MAX).max(1)
}
